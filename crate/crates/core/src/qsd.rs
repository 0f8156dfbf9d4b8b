//! Diffusive unravelings: homodyne and heterodyne quantum state diffusion.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::entanglement::concurrence_of_vec;
use crate::error::{Error, Result};
use crate::linalg::{Mat4, Vec4, I};
use crate::model::Scenario;
use crate::qj::TrajectoryRecord;
use crate::sim::{trajectory_rng, SimParams, TrajRng};
use crate::state::QubitPairState;

/// Largest `dt·γ_max` accepted by the diffusive integrators.
pub const MAX_RATE_STEP: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diffusion {
    Homodyne,
    Heterodyne,
}

/// Wiener increments for one step, one entry per channel.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseIncrement {
    /// Real `dw` with variance `dt`.
    Real(Vec<f64>),
    /// `dξ = (dw₁ + i·dw₂)/√2`, so `E[dξ dξ*] = dt` and `E[dξ²] = 0`.
    Complex(Vec<Complex64>),
}

pub fn sample_noise(kind: Diffusion, channels: usize, dt: f64, rng: &mut impl Rng) -> NoiseIncrement {
    let sd = dt.sqrt();
    match kind {
        Diffusion::Homodyne => NoiseIncrement::Real(
            (0..channels).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect(),
        ),
        Diffusion::Heterodyne => {
            let h = sd * std::f64::consts::FRAC_1_SQRT_2;
            NoiseIncrement::Complex(
                (0..channels)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(h * re, h * im)
                    })
                    .collect(),
            )
        }
    }
}

/// Euler–Maruyama stepper with the drift `−iH₀ − K` precomputed from the
/// unshifted operators.
#[derive(Clone, Debug)]
pub struct QsdStepper {
    kind: Diffusion,
    dt: f64,
    drift: Mat4,
    ops: Vec<(Mat4, f64)>,
}

impl QsdStepper {
    pub fn new(scenario: &Scenario, kind: Diffusion, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let stiffness = dt * scenario.max_rate();
        if stiffness > MAX_RATE_STEP {
            return Err(Error::StepTooLarge { prob: stiffness, limit: MAX_RATE_STEP });
        }
        let drift = scenario.h0().scale(-I) - scenario.base_k();
        let ops = scenario.channels().iter().map(|ch| (ch.op.lifted(), ch.rate)).collect();
        Ok(QsdStepper { kind, dt, drift, ops })
    }

    pub fn kind(&self) -> Diffusion {
        self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channels(&self) -> usize {
        self.ops.len()
    }

    pub fn step(&self, psi: &Vec4, rng: &mut impl Rng) -> Result<Vec4> {
        let noise = sample_noise(self.kind, self.ops.len(), self.dt, rng);
        self.apply(psi, &noise)
    }

    /// Applies one increment with given noise and renormalizes.
    pub fn apply(&self, psi: &Vec4, noise: &NoiseIncrement) -> Result<Vec4> {
        let dt = self.dt;
        let mut d = self.drift.apply(psi).scale_re(dt);
        match noise {
            NoiseIncrement::Real(dw) if self.kind == Diffusion::Homodyne && dw.len() == self.ops.len() => {
                for ((op, rate), &w) in self.ops.iter().zip(dw) {
                    let jpsi = op.apply(psi);
                    let r = psi.inner(&jpsi).re;
                    let drift = jpsi.scale_re(r) - psi.scale_re(0.5 * r * r);
                    let diff = jpsi - psi.scale_re(r);
                    d = d + drift.scale_re(rate * dt) + diff.scale_re(rate.sqrt() * w);
                }
            }
            NoiseIncrement::Complex(dxi) if self.kind == Diffusion::Heterodyne && dxi.len() == self.ops.len() => {
                for ((op, rate), &xi) in self.ops.iter().zip(dxi) {
                    let jpsi = op.apply(psi);
                    let e = psi.inner(&jpsi);
                    let drift = jpsi.scale(e.conj()) - psi.scale_re(0.5 * e.norm_sqr());
                    let diff = (jpsi - psi.scale(e * 0.5)).scale(xi) - psi.scale(e.conj() * xi.conj() * 0.5);
                    d = d + drift.scale_re(0.5 * rate * dt) + diff.scale_re(rate.sqrt());
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "noise increment does not match a {:?} stepper with {} channels",
                    self.kind,
                    self.ops.len()
                )))
            }
        }
        let next = *psi + d;
        let n = next.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFinite("diffusive step"));
        }
        Ok(next.scale_re(1.0 / n))
    }
}

pub fn step_homodyne(state: &QubitPairState, scenario: &Scenario, dt: f64, rng: &mut impl Rng) -> Result<QubitPairState> {
    let stepper = QsdStepper::new(scenario, Diffusion::Homodyne, dt)?;
    QubitPairState::from_vec(stepper.step(state.as_vec(), rng)?)
}

pub fn step_heterodyne(state: &QubitPairState, scenario: &Scenario, dt: f64, rng: &mut impl Rng) -> Result<QubitPairState> {
    let stepper = QsdStepper::new(scenario, Diffusion::Heterodyne, dt)?;
    QubitPairState::from_vec(stepper.step(state.as_vec(), rng)?)
}

/// Runs trajectory `stream` of the ensemble seeded with `seed`.
pub fn run_trajectory_qsd(
    kind: Diffusion,
    scenario: &Scenario,
    params: &SimParams,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    params.check()?;
    let stepper = QsdStepper::new(scenario, kind, params.step())?;
    let mut rng = trajectory_rng(seed, stream);
    run_with(&stepper, scenario.initial(), params, &mut rng, seed, stream)
}

pub(crate) fn run_with(
    stepper: &QsdStepper,
    initial: &QubitPairState,
    params: &SimParams,
    rng: &mut TrajRng,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let times = params.times();
    let substeps = params.substeps();
    let mut psi = *initial.as_vec();
    let mut concurrences = Vec::with_capacity(times.len());
    let mut states = params.retain_states.then(|| Vec::with_capacity(times.len()));
    concurrences.push(concurrence_of_vec(&psi));
    if let Some(st) = states.as_mut() {
        st.push(*initial);
    }
    for _ in 1..times.len() {
        for _ in 0..substeps {
            psi = stepper.step(&psi, rng)?;
        }
        concurrences.push(concurrence_of_vec(&psi));
        if let Some(st) = states.as_mut() {
            st.push(QubitPairState::from_vec(psi)?);
        }
    }
    Ok(TrajectoryRecord { seed, stream, times, concurrences, states, events: Vec::new() })
}
