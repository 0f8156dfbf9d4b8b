//! Quantum-jump (photon-counting) unraveling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entanglement::concurrence_of_vec;
use crate::error::{Error, Result};
use crate::linalg::{expm, Mat4, Vec4, DEFAULT_EXPM_TOL, I};
use crate::model::Scenario;
use crate::sim::{trajectory_rng, SimParams, TrajRng};
use crate::state::QubitPairState;

/// Largest first-order jump probability accepted in one step.
pub const MAX_STEP_JUMP_PROB: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: usize,
    pub channel_id: String,
}

/// Recorded history of one trajectory on the recording grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub times: Vec<f64>,
    pub concurrences: Vec<f64>,
    pub states: Option<Vec<QubitPairState>>,
    pub events: Vec<JumpEvent>,
}

/// Precomputed no-jump propagator and jump operators for a fixed step.
#[derive(Clone, Debug)]
pub struct QjStepper<'a> {
    scenario: &'a Scenario,
    dt: f64,
    no_jump: Mat4,
    ops: Vec<Mat4>,
}

impl<'a> QjStepper<'a> {
    pub fn new(scenario: &'a Scenario, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let no_jump = expm(&scenario.heff().scale(-I * dt), DEFAULT_EXPM_TOL)?;
        let ops = scenario.channels().iter().map(|ch| ch.op.lifted()).collect();
        Ok(QjStepper { scenario, dt, no_jump, ops })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances a normalized state from `t` to `t + dt`.
    ///
    /// The jump probability is `1 − ‖e^{−iH_eff dt}ψ‖²`, so the probability of
    /// seeing no jump over many steps is exactly the survival probability.
    /// A jump picks channel `m` with weight `γ_m ‖L_m(t)ψ‖²`.
    pub fn step(&self, psi: &Vec4, t: f64, rng: &mut impl Rng) -> Result<(Vec4, Option<usize>)> {
        let channels = self.scenario.channels();
        let (weights, images, total) = self.jump_weights(psi, t)?;
        let evolved = self.no_jump.apply(psi);
        let survive = evolved.norm_sqr();
        let p_jump = (1.0 - survive).max(0.0);
        let u: f64 = rng.random();
        if u < p_jump && total > 0.0 {
            let target = u / p_jump * total;
            let mut acc = 0.0;
            let mut chosen = weights.len() - 1;
            for (m, w) in weights.iter().enumerate() {
                acc += w;
                if target < acc {
                    chosen = m;
                    break;
                }
            }
            let image = images[chosen];
            let n2 = image.norm_sqr();
            if !(n2 > 0.0) || weights[chosen] == 0.0 {
                return Err(Error::ImpossibleJump(channels[chosen].id.clone()));
            }
            return Ok((image.scale_re(1.0 / n2.sqrt()), Some(chosen)));
        }
        if !(survive > 0.0) {
            return Err(Error::NonFinite("no-jump norm"));
        }
        Ok((evolved.scale_re(1.0 / survive.sqrt()), None))
    }

    fn jump_weights(&self, psi: &Vec4, t: f64) -> Result<(Vec<f64>, Vec<Vec4>, f64)> {
        let channels = self.scenario.channels();
        let mut weights = Vec::with_capacity(channels.len());
        let mut images = Vec::with_capacity(channels.len());
        for (ch, op) in channels.iter().zip(&self.ops) {
            let image = op.apply(psi) + psi.scale(ch.shift_at(t));
            weights.push(ch.rate * image.norm_sqr());
            images.push(image);
        }
        let total: f64 = weights.iter().sum();
        let prob = total * self.dt;
        if !prob.is_finite() {
            return Err(Error::NonFinite("jump probability"));
        }
        if prob > MAX_STEP_JUMP_PROB {
            return Err(Error::StepTooLarge { prob, limit: MAX_STEP_JUMP_PROB });
        }
        Ok((weights, images, total))
    }

    /// Every possible outcome of [`QjStepper::step`] with its probability:
    /// the no-jump state first, then one entry per channel that can fire.
    pub fn branches(&self, psi: &Vec4, t: f64) -> Result<Vec<(f64, Vec4)>> {
        let (weights, images, total) = self.jump_weights(psi, t)?;
        let evolved = self.no_jump.apply(psi);
        let survive = evolved.norm_sqr();
        let p_jump = (1.0 - survive).max(0.0);
        let mut out = vec![(1.0 - p_jump, evolved.scale_re(1.0 / survive.sqrt()))];
        if total > 0.0 {
            for (w, image) in weights.iter().zip(&images) {
                if *w > 0.0 {
                    out.push((p_jump * w / total, image.scale_re(1.0 / image.norm())));
                }
            }
        }
        Ok(out)
    }
}

/// One step from `t` to `t + dt`; builds the propagator on every call, so loops
/// should use [`QjStepper`].
pub fn step_qj(
    state: &QubitPairState,
    scenario: &Scenario,
    t: f64,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<(QubitPairState, Option<JumpEvent>)> {
    let stepper = QjStepper::new(scenario, dt)?;
    let (next, jump) = stepper.step(state.as_vec(), t, rng)?;
    let event = jump.map(|m| JumpEvent { time: t + dt, channel: m, channel_id: scenario.channels()[m].id.clone() });
    Ok((QubitPairState::from_vec(next)?, event))
}

/// Runs trajectory `stream` of the ensemble seeded with `seed`.
pub fn run_trajectory(scenario: &Scenario, params: &SimParams, seed: u64, stream: u64) -> Result<TrajectoryRecord> {
    params.check()?;
    let stepper = QjStepper::new(scenario, params.step())?;
    let mut rng = trajectory_rng(seed, stream);
    run_with(&stepper, scenario.initial(), params, &mut rng, seed, stream)
}

pub(crate) fn run_with(
    stepper: &QjStepper<'_>,
    initial: &QubitPairState,
    params: &SimParams,
    rng: &mut TrajRng,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let times = params.times();
    let substeps = params.substeps();
    let dt = stepper.dt();
    let scenario = stepper.scenario;

    let mut psi = *initial.as_vec();
    let mut concurrences = Vec::with_capacity(times.len());
    let mut states = params.retain_states.then(|| Vec::with_capacity(times.len()));
    let mut events = Vec::new();
    concurrences.push(concurrence_of_vec(&psi));
    if let Some(st) = states.as_mut() {
        st.push(*initial);
    }

    for k in 1..times.len() {
        let t0 = times[k - 1];
        for j in 0..substeps {
            let t = t0 + j as f64 * dt;
            let (next, jump) = stepper.step(&psi, t, rng)?;
            psi = next;
            if let Some(m) = jump {
                log::trace!("jump on {} at t = {}", scenario.channels()[m].id, t + dt);
                events.push(JumpEvent { time: t + dt, channel: m, channel_id: scenario.channels()[m].id.clone() });
            }
        }
        concurrences.push(concurrence_of_vec(&psi));
        if let Some(st) = states.as_mut() {
            st.push(QubitPairState::from_vec(psi)?);
        }
    }
    Ok(TrajectoryRecord { seed, stream, times, concurrences, states, events })
}

/// Probability of no jump during `[0, t]` starting from `state`, `‖e^{−iH_eff t}ψ‖²`.
pub fn survival_probability(scenario: &Scenario, state: &QubitPairState, t: f64) -> Result<f64> {
    if scenario.is_time_dependent() {
        return Err(Error::Unsupported("survival probability needs a time-independent effective Hamiltonian".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let prop = expm(&scenario.heff().scale(-I * t), DEFAULT_EXPM_TOL)?;
    Ok(prop.apply(state.as_vec()).norm_sqr())
}

/// Target for the largest per-step jump probability used by [`default_dt`].
pub const DEFAULT_STEP_JUMP_PROB: f64 = 0.01;

/// Step for which the total jump probability from any basis state stays at or
/// below [`DEFAULT_STEP_JUMP_PROB`]. Shifted channels are bounded by
/// `γ(‖J b‖ + |α|)²`.
pub fn default_dt(scenario: &Scenario) -> f64 {
    let mut worst: f64 = 0.0;
    for b in 0..4 {
        let e = Vec4::basis(b);
        let total: f64 = scenario
            .channels()
            .iter()
            .map(|ch| {
                let norm = ch.op.lifted().apply(&e).norm() + ch.shift.map_or(0.0, |a| a.norm());
                ch.rate * norm * norm
            })
            .sum();
        worst = worst.max(total);
    }
    if worst > 0.0 {
        DEFAULT_STEP_JUMP_PROB / worst
    } else {
        f64::INFINITY
    }
}
