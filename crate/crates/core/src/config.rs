//! Experiment configuration.

use alloc::string::String;
use alloc::vec;

use crate::error::{config_err, Result};
use crate::models::SplitSpec;
use crate::numcore::{Activation, Head, MlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Algorithm {
    #[cfg_attr(feature = "serde", serde(rename = "fsl_sage"))]
    FslSage,
    #[cfg_attr(feature = "serde", serde(rename = "fedavg"))]
    FedAvg,
    #[cfg_attr(feature = "serde", serde(rename = "splitfed_ms"))]
    SplitFedMs,
    #[cfg_attr(feature = "serde", serde(rename = "splitfed_ss"))]
    SplitFedSs,
    #[cfg_attr(feature = "serde", serde(rename = "cse_fsl"))]
    CseFsl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::FslSage,
        Algorithm::FedAvg,
        Algorithm::SplitFedMs,
        Algorithm::SplitFedSs,
        Algorithm::CseFsl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FslSage => "fsl_sage",
            Algorithm::FedAvg => "fedavg",
            Algorithm::SplitFedMs => "splitfed_ms",
            Algorithm::SplitFedSs => "splitfed_ss",
            Algorithm::CseFsl => "cse_fsl",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

/// The protocol's time scales.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Schedule {
    /// `m`.
    pub clients: usize,
    /// `T`.
    pub rounds: usize,
    /// `K`, local steps per round.
    pub local_steps: usize,
    /// `Q`, smashed-data uplinks per client per round.
    pub uplinks_per_round: usize,
    /// `l`, rounds between alignments.
    pub align_interval: usize,
    /// `T′`; alignment stops after this round. `None` is the non-lazy run.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub lazy_rounds: Option<usize>,
}

impl Schedule {
    /// Whether the alignment guard fires at the start of round `t`.
    pub fn aligns_at(&self, t: usize) -> bool {
        t.is_multiple_of(self.align_interval) && self.lazy_rounds.is_none_or(|tp| t <= tp)
    }

    /// Local steps between consecutive uplinks.
    pub fn uplink_period(&self) -> usize {
        self.local_steps / self.uplinks_per_round
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Optim {
    /// `η`, server-side learning rate.
    pub server_lr: f64,
    /// `η_L`, client-side learning rate.
    pub client_lr: f64,
    pub batch_size: usize,
    /// Gradient steps per alignment.
    pub align_steps: usize,
    pub align_lr: f64,
    /// CSE-FSL local auxiliary learning rate; defaults to `client_lr`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub aux_lr: Option<f64>,
}

impl Optim {
    pub fn cse_aux_lr(&self) -> f64 {
        self.aux_lr.unwrap_or(self.client_lr)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DataConfig {
    /// Training examples shared out to clients.
    pub samples: usize,
    /// Held-out examples for evaluation and the estimation-error probe.
    pub eval_samples: usize,
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    /// Dirichlet concentration; `None` partitions i.i.d.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub dirichlet_alpha: Option<f64>,
    /// Load `samples + eval_samples` rows from this binary dataset file
    /// instead of generating them.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub dataset_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ProtocolConfig {
    /// Maximum records per client in the alignment store; `None` keeps all.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub store_capacity: Option<usize>,
    /// Rows in each measurement probe.
    pub probe_size: usize,
    /// Give every client its own auxiliary initialization.
    #[cfg_attr(feature = "serde", serde(default))]
    pub distinct_aux_init: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Seeds {
    pub dataset: u64,
    pub partition: u64,
    pub init: u64,
    pub streams: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self {
            dataset: seed,
            partition: seed,
            init: seed,
            streams: seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StopCriteria {
    /// Stop after the first round whose cumulative traffic reaches this.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub max_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub schedule: Schedule,
    pub optim: Optim,
    pub data: DataConfig,
    pub model: SplitSpec,
    pub protocol: ProtocolConfig,
    pub seeds: Seeds,
    #[cfg_attr(feature = "serde", serde(default))]
    pub stop: StopCriteria,
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(config_err!("{name} must be a finite non-negative number, got {v}"));
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if s.clients == 0 {
            return Err(config_err!("clients must be at least 1"));
        }
        if s.rounds == 0 {
            return Err(config_err!("rounds must be at least 1"));
        }
        if s.local_steps == 0 {
            return Err(config_err!("local_steps must be at least 1"));
        }
        if s.uplinks_per_round == 0 {
            return Err(config_err!("uplinks_per_round must be at least 1"));
        }
        if !s.local_steps.is_multiple_of(s.uplinks_per_round) {
            return Err(config_err!(
                "Q must divide K (Q = {}, K = {})",
                s.uplinks_per_round,
                s.local_steps
            ));
        }
        if s.align_interval == 0 {
            return Err(config_err!("align_interval (l) must be at least 1"));
        }
        if let Some(tp) = s.lazy_rounds {
            if tp > s.rounds {
                return Err(config_err!("lazy_rounds (T') = {tp} exceeds rounds (T) = {}", s.rounds));
            }
        }

        let o = &self.optim;
        check_rate("server_lr", o.server_lr)?;
        check_rate("client_lr", o.client_lr)?;
        check_rate("align_lr", o.align_lr)?;
        if let Some(a) = o.aux_lr {
            check_rate("aux_lr", a)?;
        }
        if o.batch_size == 0 {
            return Err(config_err!("batch_size must be at least 1"));
        }

        let d = &self.data;
        if d.samples < s.clients {
            return Err(config_err!("{} samples cannot cover {} clients", d.samples, s.clients));
        }
        if d.eval_samples == 0 {
            return Err(config_err!("eval_samples must be at least 1"));
        }
        if let Some(a) = d.dirichlet_alpha {
            if !a.is_finite() || a <= 0.0 {
                return Err(config_err!("dirichlet_alpha must be positive, got {a}"));
            }
        }
        if !d.separation.is_finite() || d.separation <= 0.0 {
            return Err(config_err!("separation must be positive, got {}", d.separation));
        }

        self.model.validate()?;
        if self.model.full.input_dim() != d.features {
            return Err(config_err!(
                "model input width {} differs from features {}",
                self.model.full.input_dim(),
                d.features
            ));
        }
        if self.model.full.head != Head::SoftmaxXent {
            return Err(config_err!("classification runs need a softmax_xent head"));
        }
        if self.model.full.output_dim() != d.classes {
            return Err(config_err!(
                "model output width {} differs from classes {}",
                self.model.full.output_dim(),
                d.classes
            ));
        }

        if self.protocol.probe_size == 0 {
            return Err(config_err!("probe_size must be at least 1"));
        }
        if self.protocol.store_capacity == Some(0) {
            return Err(config_err!("store_capacity must be at least 1 when set"));
        }
        Ok(())
    }
}

impl Default for RunConfig {
    /// A small Gaussian-mixture task: 20 features, 5 classes, 4 clients.
    fn default() -> Self {
        let full = MlpSpec {
            layer_dims: vec![20, 32, 16, 32, 5],
            activations: vec![
                Activation::Relu,
                Activation::Tanh,
                Activation::Relu,
                Activation::Identity,
            ],
            head: Head::SoftmaxXent,
        };
        let cut_index = 2;
        let aux = MlpSpec {
            layer_dims: vec![16, 16, 5],
            activations: vec![Activation::Relu, Activation::Identity],
            head: Head::SoftmaxXent,
        };
        Self {
            algorithm: Algorithm::FslSage,
            schedule: Schedule {
                clients: 4,
                rounds: 30,
                local_steps: 10,
                uplinks_per_round: 2,
                align_interval: 5,
                lazy_rounds: None,
            },
            optim: Optim {
                server_lr: 0.05,
                client_lr: 0.05,
                batch_size: 32,
                align_steps: 30,
                align_lr: 10.0,
                aux_lr: None,
            },
            data: DataConfig {
                samples: 8000,
                eval_samples: 1000,
                features: 20,
                classes: 5,
                separation: 2.0,
                dirichlet_alpha: Some(1.0),
                dataset_file: None,
            },
            model: SplitSpec { full, cut_index, aux },
            protocol: ProtocolConfig {
                store_capacity: None,
                probe_size: 512,
                distinct_aux_init: false,
            },
            seeds: Seeds::all(0),
            stop: StopCriteria::default(),
        }
    }
}
