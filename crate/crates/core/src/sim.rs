//! Shared experiment substrate: every algorithm sees the same data,
//! partition, initial models, probes and client streams for a given config.

use alloc::vec::Vec;

use crate::baselines::{run_cse_fsl_in, run_fedavg_in, run_splitfed_in, SplitFedMode};
use crate::config::{Algorithm, RunConfig};
use crate::data::{dirichlet_partition, gen_gaussian_mixture, iid_partition, BatchStream, Dataset, Shard};
use crate::error::{config_err, Error, Result};
use crate::metrics::{estimation_error, evaluate, global_objective, CommLedger, MetricsRow, Probe};
use crate::models::{aux_init_for, build_bundle, ModelBundle};
use crate::numcore::ParamVector;
use crate::protocol::{run_fsl_sage_in, ClientState, ServerState};

#[derive(Debug, Clone)]
pub struct Environment {
    pub train: Dataset,
    pub eval: Dataset,
    pub shards: Vec<Shard>,
    pub bundle: ModelBundle,
    /// One probe per client, drawn from its own shard.
    pub client_probes: Vec<Probe>,
    /// The whole held-out set.
    pub eval_probe: Probe,
    /// The first `probe_size` held-out rows, for the estimation error.
    pub estimation_probe: Probe,
    /// Key of each client's batch stream; client `i` uses `i` by default.
    pub stream_keys: Vec<usize>,
}

impl Environment {
    /// Generates the Gaussian-mixture data described by `config.data`.
    /// Configs naming a `dataset_file` must go through
    /// [`Environment::with_dataset`] instead.
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let d = &config.data;
        if let Some(path) = &d.dataset_file {
            return Err(config_err!("dataset_file {path:?} has to be loaded by the caller"));
        }
        let all = gen_gaussian_mixture(
            d.samples + d.eval_samples,
            d.features,
            d.classes,
            d.separation,
            config.seeds.dataset,
        )?;
        Self::with_dataset(config, all)
    }

    /// Uses a caller-supplied dataset: the first `samples` rows train, the
    /// next `eval_samples` rows evaluate.
    pub fn with_dataset(config: &RunConfig, all: Dataset) -> Result<Self> {
        config.validate()?;
        let d = &config.data;
        if all.len() < d.samples + d.eval_samples {
            return Err(config_err!(
                "dataset has {} rows, config needs {}",
                all.len(),
                d.samples + d.eval_samples
            ));
        }
        if all.dim() != d.features || all.num_classes() != d.classes {
            return Err(config_err!(
                "dataset is {} features / {} classes, config says {} / {}",
                all.dim(),
                all.num_classes(),
                d.features,
                d.classes
            ));
        }
        let (train, rest) = all.split_at(d.samples)?;
        let (eval, _) = rest.split_at(d.eval_samples)?;
        let m = config.schedule.clients;
        let shards = match d.dirichlet_alpha {
            Some(alpha) => dirichlet_partition(train.labels(), m, alpha, config.seeds.partition)?,
            None => iid_partition(train.len(), m, config.seeds.partition)?,
        };
        let bundle = build_bundle(&config.model, config.seeds.init)?;
        let probe_size = config.protocol.probe_size;
        let client_probes = shards
            .iter()
            .map(|s| {
                let p = probe_size.min(s.len());
                let idx: Vec<usize> = (0..p).map(|j| s.indices[j * s.len() / p]).collect();
                let (x, y) = train.gather(&idx);
                Probe::new(x, y)
            })
            .collect::<Result<Vec<_>>>()?;
        let all_eval: Vec<usize> = (0..eval.len()).collect();
        let (ex, ey) = eval.gather(&all_eval);
        let eval_probe = Probe::new(ex, ey)?;
        let (px, py) = eval.gather(&all_eval[..probe_size.min(eval.len())]);
        let estimation_probe = Probe::new(px, py)?;
        Ok(Self {
            train,
            eval,
            shards,
            bundle,
            client_probes,
            eval_probe,
            estimation_probe,
            stream_keys: (0..m).collect(),
        })
    }

    /// Configured batch size, capped at the client's shard size.
    pub fn batch_size(&self, config: &RunConfig, client: usize) -> usize {
        config.optim.batch_size.min(self.shards[client].len())
    }

    pub fn stream(&self, config: &RunConfig, client: usize) -> BatchStream {
        BatchStream::new(config.seeds.streams, self.stream_keys[client])
    }

    pub fn aux_init(&self, config: &RunConfig, client: usize) -> ParamVector {
        if config.protocol.distinct_aux_init && client > 0 {
            aux_init_for(&config.model, config.seeds.init, client as u64)
        } else {
            self.bundle.aux_init.clone()
        }
    }

    pub fn client_states(&self, config: &RunConfig) -> Vec<ClientState> {
        (0..config.schedule.clients)
            .map(|i| ClientState {
                id: i,
                client_params: self.bundle.client_init.clone(),
                aux_params: self.aux_init(config, i),
                shard: self.shards[i].clone(),
                stream: self.stream(config, i),
                batch_size: self.batch_size(config, i),
            })
            .collect()
    }

    /// Measures the round-boundary model `(client, server)`.
    pub(crate) fn measure(
        &self,
        round: usize,
        client: &ParamVector,
        server: &ParamVector,
        ledger: &CommLedger,
        estimators: Option<(&[ClientState], &ServerState)>,
    ) -> Result<MetricsRow> {
        let objective = global_objective(&self.bundle, client, server, &self.client_probes)?;
        if !objective.loss.is_finite() || !objective.grad_norm_sq.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        let (eval_loss, eval_accuracy) = evaluate(&self.bundle, client, server, &self.eval_probe)?;
        let epsilon_t = match estimators {
            Some((clients, srv)) => Some(estimation_error(&self.bundle, clients, srv, &self.estimation_probe)?),
            None => None,
        };
        Ok(MetricsRow {
            round,
            train_loss: objective.loss,
            eval_loss,
            eval_accuracy,
            cumulative_bytes: ledger.total_bytes(),
            epsilon_t,
            grad_norm_sq: Some(objective.grad_norm_sq),
            alignment_loss: None,
            epsilon_pre_align: None,
            epsilon_post_align: None,
        })
    }
}

/// Final models and the full record of a run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<MetricsRow>,
    pub ledger: CommLedger,
    pub final_client: ParamVector,
    pub final_server: ParamVector,
    /// Per-client auxiliary parameters; empty for algorithms without one.
    pub final_aux: Vec<ParamVector>,
}

impl RunReport {
    pub fn best_accuracy(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.eval_accuracy).reduce(f64::max)
    }

    /// Cumulative bytes at the first round whose eval accuracy reaches
    /// `target`.
    pub fn bytes_to_target(&self, target: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.eval_accuracy >= target)
            .map(|r| r.cumulative_bytes)
    }
}

/// True once the byte budget (if any) is spent.
pub(crate) fn budget_spent(config: &RunConfig, ledger: &CommLedger) -> bool {
    config.stop.max_bytes.is_some_and(|cap| ledger.total_bytes() >= cap)
}

/// Runs `config.algorithm` on freshly generated data.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let env = Environment::build(config)?;
    run_in(&env, config)
}

/// Runs `config.algorithm` on a prepared environment.
pub fn run_in(env: &Environment, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    match config.algorithm {
        Algorithm::FslSage => run_fsl_sage_in(env, config),
        Algorithm::FedAvg => run_fedavg_in(env, config),
        Algorithm::SplitFedMs => run_splitfed_in(env, config, SplitFedMode::MultiServer),
        Algorithm::SplitFedSs => run_splitfed_in(env, config, SplitFedMode::SingleServer),
        Algorithm::CseFsl => run_cse_fsl_in(env, config),
    }
}
