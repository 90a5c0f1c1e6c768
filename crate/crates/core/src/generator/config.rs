//! JSON configuration documents for model specs.
//!
//! A document is either a catalog entry {"model": name, "params": {...}}
//! or a raw characteristics document {"state": ..., "drift": ...,
//! "diffusion": ..., "jumps": ...}. Raw documents can only carry
//! state-combination (moment table) jump kernels; pushforward kernels are
//! function-valued and exist only through catalog entries.

use serde::{Deserialize, Serialize};

use super::{
    ConditionAJumps, DiffusionSpec, DriftSpec, GeneratorSpec, JumpSpec, Model, StateSpace,
};
use crate::error::{Error, Result};
use crate::montecarlo::SimulationSpec;

/// Raw characteristics document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSpec {
    pub state: StateSpace,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<ConditionAJumps>,
}

impl RawSpec {
    pub fn to_generator_spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            state: self.state.clone(),
            drift: self.drift.clone(),
            diffusion: self.diffusion.clone(),
            jumps: self
                .jumps
                .clone()
                .filter(|j| !j.is_empty())
                .map(JumpSpec::ConditionA),
        }
    }
}

/// Either a catalog entry or a raw characteristics document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecDocument {
    Catalog(Model),
    Raw(RawSpec),
}

impl SpecDocument {
    pub fn generator_spec(&self, max_degree: u32) -> Result<GeneratorSpec> {
        match self {
            SpecDocument::Catalog(model) => model.generator_spec(max_degree),
            SpecDocument::Raw(raw) => Ok(raw.to_generator_spec()),
        }
    }

    /// The simulation face; only catalog entries carry one.
    pub fn simulation_spec(&self) -> Result<SimulationSpec> {
        match self {
            SpecDocument::Catalog(model) => model.simulation_spec(),
            SpecDocument::Raw(_) => Err(Error::InvalidParameter(
                "raw characteristics documents carry no simulation scheme; \
                 use a catalog model"
                    .into(),
            )),
        }
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SpecDocument::Catalog(m) => Some(m),
            SpecDocument::Raw(_) => None,
        }
    }
}
