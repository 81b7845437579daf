//! Client / server / auxiliary architectures cut from one full network.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config_err, Result};
use crate::numcore::{Head, MlpSpec, ParamVector};
use crate::rng::{self, Purpose, SimRng};

/// A full network, the layer index where it is cut, and the auxiliary
/// network that stands in for the server side at each client.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub full: MlpSpec,
    /// Number of layers kept on the client.
    pub cut_index: usize,
    pub aux: MlpSpec,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        self.full.validate()?;
        self.aux.validate()?;
        let layers = self.full.num_layers();
        if self.cut_index < 1 || self.cut_index >= layers {
            return Err(config_err!(
                "cut_index must satisfy 1 <= cut_index < {layers}, got {}",
                self.cut_index
            ));
        }
        if self.full.head == Head::None {
            return Err(config_err!("the full network needs a loss head"));
        }
        if self.aux.head != self.full.head {
            return Err(config_err!("auxiliary and server networks must share a loss head"));
        }
        if self.aux.input_dim() != self.cut_dim() {
            return Err(config_err!(
                "auxiliary input width {} differs from cut width {}",
                self.aux.input_dim(),
                self.cut_dim()
            ));
        }
        if self.aux.output_dim() != self.full.output_dim() {
            return Err(config_err!(
                "auxiliary output width {} differs from model output width {}",
                self.aux.output_dim(),
                self.full.output_dim()
            ));
        }
        Ok(())
    }

    /// Width of the cut-layer activations.
    pub fn cut_dim(&self) -> usize {
        self.full.layer_dims[self.cut_index]
    }

    pub fn client_spec(&self) -> MlpSpec {
        MlpSpec {
            layer_dims: self.full.layer_dims[..=self.cut_index].to_vec(),
            activations: self.full.activations[..self.cut_index].to_vec(),
            head: Head::None,
        }
    }

    pub fn server_spec(&self) -> MlpSpec {
        MlpSpec {
            layer_dims: self.full.layer_dims[self.cut_index..].to_vec(),
            activations: self.full.activations[self.cut_index..].to_vec(),
            head: self.full.head,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub split: SplitSpec,
    pub client_spec: MlpSpec,
    pub server_spec: MlpSpec,
    pub aux_spec: MlpSpec,
    pub client_init: ParamVector,
    pub server_init: ParamVector,
    pub aux_init: ParamVector,
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(spec: &MlpSpec, rng: &mut SimRng) -> ParamVector {
    let mut data = Vec::with_capacity(spec.num_params());
    for w in spec.layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        for _ in 0..fan_in * fan_out {
            data.push(rng.random_range(-a..a));
        }
        data.extend(core::iter::repeat_n(0.0, fan_out));
    }
    ParamVector::from_parts(spec.manifest(), data).expect("manifest built from the same spec")
}

/// Initial auxiliary parameters for one client; index 0 is the bundle's.
pub fn aux_init_for(split: &SplitSpec, seed: u64, client: u64) -> ParamVector {
    init_params(&split.aux, &mut rng::stream(seed, Purpose::AuxInit, client))
}

/// Splits a freshly initialized full model at the cut and initializes the
/// auxiliary network from a separate stream.
pub fn build_bundle(split: &SplitSpec, seed: u64) -> Result<ModelBundle> {
    split.validate()?;
    let full = init_params(&split.full, &mut rng::stream(seed, Purpose::ModelInit, 0));
    let (client_init, server_init) = decompose(split, &full)?;
    Ok(ModelBundle {
        split: split.clone(),
        client_spec: split.client_spec(),
        server_spec: split.server_spec(),
        aux_spec: split.aux.clone(),
        client_init,
        server_init,
        aux_init: aux_init_for(split, seed, 0),
    })
}

/// The monolithic network `x = (x_c, x_s)`.
pub fn compose(split: &SplitSpec, client: &ParamVector, server: &ParamVector) -> Result<(MlpSpec, ParamVector)> {
    split.client_spec().check_params(client)?;
    split.server_spec().check_params(server)?;
    Ok((split.full.clone(), client.concat(server)))
}

pub fn decompose(split: &SplitSpec, full: &ParamVector) -> Result<(ParamVector, ParamVector)> {
    split.full.check_params(full)?;
    full.split_blocks(2 * split.cut_index)
}
