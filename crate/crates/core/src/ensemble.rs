//! Parallel trajectory ensembles with per-trajectory random streams.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::qj::{self, QjStepper, TrajectoryRecord};
use crate::qsd::{self, Diffusion, QsdStepper};
use crate::sim::{trajectory_rng, SimParams};
use crate::stats::{average, EnsembleSummary};

/// Stochastic unraveling used for a trajectory ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unraveling {
    #[serde(rename = "qj")]
    QuantumJump,
    #[serde(rename = "qsd-homodyne")]
    Homodyne,
    #[serde(rename = "qsd-heterodyne")]
    Heterodyne,
}

impl Unraveling {
    pub fn name(self) -> &'static str {
        match self {
            Unraveling::QuantumJump => "qj",
            Unraveling::Homodyne => "qsd-homodyne",
            Unraveling::Heterodyne => "qsd-heterodyne",
        }
    }
}

impl fmt::Display for Unraveling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Unraveling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qj" => Ok(Unraveling::QuantumJump),
            "qsd-homodyne" => Ok(Unraveling::Homodyne),
            "qsd-heterodyne" => Ok(Unraveling::Heterodyne),
            other => Err(Error::InvalidArgument(format!("unknown unraveling `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub unraveling: Unraveling,
    pub params: SimParams,
    pub n_traj: usize,
    pub seed: u64,
}

enum Stepper<'a> {
    Jump(QjStepper<'a>),
    Diffusive(QsdStepper),
}

/// Runs `n_traj` trajectories in parallel; trajectory `k` uses random stream
/// `k`, so the records do not depend on the number of worker threads.
pub fn run_ensemble(scenario: &Scenario, spec: &EnsembleSpec) -> Result<Vec<TrajectoryRecord>> {
    if spec.n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
    }
    spec.params.check()?;
    let dt = spec.params.step();
    let stepper = match spec.unraveling {
        Unraveling::QuantumJump => Stepper::Jump(QjStepper::new(scenario, dt)?),
        Unraveling::Homodyne => Stepper::Diffusive(QsdStepper::new(scenario, Diffusion::Homodyne, dt)?),
        Unraveling::Heterodyne => Stepper::Diffusive(QsdStepper::new(scenario, Diffusion::Heterodyne, dt)?),
    };
    log::info!(
        "running {} {} trajectories, dt = {dt:e}, t_max = {}",
        spec.n_traj,
        spec.unraveling,
        spec.params.t_max
    );
    (0..spec.n_traj as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(spec.seed, k);
            match &stepper {
                Stepper::Jump(st) => qj::run_with(st, scenario.initial(), &spec.params, &mut rng, spec.seed, k),
                Stepper::Diffusive(st) => qsd::run_with(st, scenario.initial(), &spec.params, &mut rng, spec.seed, k),
            }
        })
        .collect()
}

/// [`run_ensemble`] followed by [`average`].
pub fn simulate(scenario: &Scenario, spec: &EnsembleSpec) -> Result<EnsembleSummary> {
    average(&run_ensemble(scenario, spec)?)
}
