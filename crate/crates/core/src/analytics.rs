//! Closed-form disentanglement rates, common-bath mean concurrence and a
//! numerical search over unravelings of thermal baths.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entanglement::preconcurrence_unnormalized;
use crate::error::{Error, Result};
use crate::linalg::{det2, expm, trace2, Mat2, DEFAULT_EXPM_TOL};
use crate::model::{preset_common_bath, preset_rotated_thermal, JumpChannel, Mixing, Scenario, ThermalRates};
use crate::sim::trajectory_rng;
use crate::state::QubitPairState;

/// Rates of one channel; the scenario rates are the sums over channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRates {
    pub id: String,
    pub qj: f64,
    pub ho: f64,
    pub ho_opt: f64,
    pub het: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub kappa_qj: f64,
    /// Optimal jump rate over mixings, for thermal presets only.
    pub kappa_qj_opt_thermal: Option<f64>,
    pub kappa_ho: f64,
    pub kappa_ho_opt: f64,
    pub kappa_het: f64,
    pub channels: Vec<ChannelRates>,
}

/// Local 2×2 operator of a channel, with the homodyne shift applied when
/// `shifted`; heterodyne shifts average out and are never applied.
fn local_op(ch: &JumpChannel, shifted: bool) -> Result<Mat2> {
    let base = ch.op.local().ok_or_else(|| Error::NonLocalChannel(ch.id.clone()))?;
    if shifted && ch.het_freq.is_none() {
        Ok(*base + Mat2::identity().scale(ch.shift_at(0.0)))
    } else {
        Ok(*base)
    }
}

fn half_trace_jj(j: &Mat2) -> f64 {
    0.5 * (j.adjoint() * *j).trace().re
}

fn channel_qj(ch: &JumpChannel) -> Result<f64> {
    let j = local_op(ch, true)?;
    Ok(ch.rate * (half_trace_jj(&j) - det2(&j).norm()))
}

fn channel_ho(ch: &JumpChannel) -> Result<f64> {
    let j = local_op(ch, false)?;
    let tr = trace2(&j);
    Ok(ch.rate * (half_trace_jj(&j) - det2(&j).re - 0.5 * tr.im * tr.im))
}

fn channel_ho_opt(ch: &JumpChannel) -> Result<f64> {
    let j = local_op(ch, false)?;
    let tr = trace2(&j);
    Ok(ch.rate * (half_trace_jj(&j) - (det2(&j) - tr * tr * 0.25).norm() - 0.25 * tr.norm_sqr()))
}

fn channel_het(ch: &JumpChannel) -> Result<f64> {
    let j = local_op(ch, false)?;
    Ok(ch.rate * (half_trace_jj(&j) - 0.25 * trace2(&j).norm_sqr()))
}

fn sum_channels(s: &Scenario, f: fn(&JumpChannel) -> Result<f64>) -> Result<f64> {
    s.channels().iter().map(f).sum()
}

/// `½ tr₄ K − Σ γ |det J|`, homodyne shifts included.
pub fn kappa_qj(s: &Scenario) -> Result<f64> {
    sum_channels(s, channel_qj)
}

/// The same rate as a sum of squares with `J̃ = e^{−iθ}J`, `2θ = arg det J`
/// (`θ = 0` when `det J = 0`):
/// `Σ γ/2 (|⟨↑|J̃|↑⟩ − ⟨↓|J̃†|↓⟩|² + |⟨↑|J̃ + J̃†|↓⟩|²)`.
pub fn kappa_qj_decomposed(s: &Scenario) -> Result<f64> {
    let mut total = 0.0;
    for ch in s.channels() {
        let j = local_op(ch, true)?;
        let det = det2(&j);
        let theta = if det.norm() == 0.0 { 0.0 } else { 0.5 * det.arg() };
        let jt = j.scale(Complex64::from_polar(1.0, -theta));
        let diag = jt[(0, 0)] - jt[(1, 1)].conj();
        let off = jt[(0, 1)] + jt[(1, 0)].conj();
        total += 0.5 * ch.rate * (diag.norm_sqr() + off.norm_sqr());
    }
    Ok(total)
}

/// `½ Σ_i (√γ₋ − √γ₊)²`, the smallest jump rate reachable by mixing the
/// thermal channels of each qubit.
pub fn kappa_opt_thermal(rates: &ThermalRates) -> f64 {
    (0..2).map(|q| 0.5 * (rates.minus[q].sqrt() - rates.plus[q].sqrt()).powi(2)).sum()
}

/// Homodyne limit: `½ tr₄ K − Σ γ (Re det J + ½ (Im tr J)²)`.
pub fn kappa_ho(s: &Scenario) -> Result<f64> {
    sum_channels(s, channel_ho)
}

/// Homodyne limit minimized over laser phases:
/// `½ tr₄ K − Σ γ (|det J − ¼ (tr J)²| + ¼ |tr J|²)`.
pub fn kappa_ho_opt(s: &Scenario) -> Result<f64> {
    sum_channels(s, channel_ho_opt)
}

/// Heterodyne limit: `½ tr₄ K − ¼ Σ γ |tr J|²`.
pub fn kappa_het(s: &Scenario) -> Result<f64> {
    sum_channels(s, channel_het)
}

pub fn rate_report(s: &Scenario) -> Result<RateReport> {
    let mut channels = Vec::with_capacity(s.channels().len());
    for ch in s.channels() {
        channels.push(ChannelRates {
            id: ch.id.clone(),
            qj: channel_qj(ch)?,
            ho: channel_ho(ch)?,
            ho_opt: channel_ho_opt(ch)?,
            het: channel_het(ch)?,
        });
    }
    Ok(RateReport {
        kappa_qj: channels.iter().map(|c| c.qj).sum(),
        kappa_qj_opt_thermal: s.preset().thermal_rates().map(|r| kappa_opt_thermal(&r)),
        kappa_ho: channels.iter().map(|c| c.ho).sum(),
        kappa_ho_opt: channels.iter().map(|c| c.ho_opt).sum(),
        kappa_het: channels.iter().map(|c| c.het).sum(),
        channels,
    })
}

/// `C₀ e^{−κt}`.
pub fn mean_concurrence_independent(c0: f64, kappa: f64, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c0) || !(kappa >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("need C0 in [0, 1] and κ ≥ 0, got C0 = {c0}, κ = {kappa}")));
    }
    Ok(c0 * (-kappa * t).exp())
}

/// Amplitudes of the initial state entering the common-bath mean concurrence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonBathCurve {
    /// `c↑↓ + c↓↑`
    pub c_plus: Complex64,
    /// `c↑↓ − c↓↑`
    pub c_minus: Complex64,
    pub c_uu: Complex64,
    pub c_dd: Complex64,
    pub gamma: f64,
}

impl CommonBathCurve {
    pub fn new(initial: &QubitPairState, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::NegativeRate { what: "γ".into(), rate: gamma });
        }
        let [uu, ud, du, dd] = initial.amplitudes();
        Ok(CommonBathCurve { c_plus: ud + du, c_minus: ud - du, c_uu: uu, c_dd: dd, gamma })
    }

    pub fn mean(&self, t: f64) -> f64 {
        common_bath_mean(self, t)
    }

    /// Long-time limit `|c₋|²/2`.
    pub fn asymptote(&self) -> f64 {
        0.5 * self.c_minus.norm_sqr()
    }
}

/// `½|c₋² − c₊² e^{−2γt} + 4 c↑↑ c↓↓ e^{−γt}| + 2|c↑↑|² γt e^{−2γt}`.
pub fn common_bath_mean(curve: &CommonBathCurve, t: f64) -> f64 {
    let gt = curve.gamma * t;
    let e1 = (-gt).exp();
    let e2 = e1 * e1;
    let inner = curve.c_minus * curve.c_minus - curve.c_plus * curve.c_plus * e2 + curve.c_uu * curve.c_dd * (4.0 * e1);
    0.5 * inner.norm() + 2.0 * curve.c_uu.norm_sqr() * gt * e2
}

/// Time `γ⁻¹ ln|c₊/c₋|` at which the mean vanishes, which happens only when
/// `c↑↑ = 0` and `c₊/c₋` is real with modulus above one.
pub fn common_bath_vanish_time(curve: &CommonBathCurve) -> Option<f64> {
    const TOL: f64 = 1e-12;
    if curve.c_uu.norm() > TOL || curve.c_minus.norm() <= TOL || curve.gamma <= 0.0 {
        return None;
    }
    let ratio = curve.c_plus / curve.c_minus;
    if ratio.im.abs() > TOL * ratio.norm().max(1.0) || ratio.norm() <= 1.0 {
        return None;
    }
    Some(ratio.norm().ln() / curve.gamma)
}

/// Contributions of the trajectories with no jump and with exactly one jump
/// in `[0, t]` to the common-bath mean concurrence.
pub fn common_bath_one_jump_pieces(initial: &QubitPairState, gamma: f64, t: f64) -> Result<(f64, f64)> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let s = preset_common_bath(gamma)?;
    let decay = expm(&s.k().scale_re(-t), DEFAULT_EXPM_TOL)?;
    let survivor = decay.apply(initial.as_vec());
    let no_jump = preconcurrence_unnormalized(&survivor).norm();
    let gt = gamma * t;
    let one_jump = 2.0 * initial.amp(QubitPairState::UU).norm_sqr() * gt * (-2.0 * gt).exp();
    Ok((no_jump, one_jump))
}

/// Best mixing found by [`optimize_unraveling`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnravelingOptimum {
    pub mixing: [Mixing; 2],
    /// Channel ids of the optimal scenario with their laser phases `½ arg det J`.
    pub phases: Vec<(String, f64)>,
    pub rate: f64,
    pub closed_form: f64,
}

/// `e^{iα} [[e^{iβ} cos θ, e^{iφ} sin θ], [−e^{−iφ} sin θ, e^{−iβ} cos θ]]`.
fn unitary_from_angles(x: &[f64]) -> Mixing {
    let (theta, beta, phi, alpha) = (x[0], x[1], x[2], x[3]);
    let g = Complex64::from_polar(1.0, alpha);
    let (s, co) = theta.sin_cos();
    Mixing {
        rows: vec![
            [g * Complex64::from_polar(co, beta), g * Complex64::from_polar(s, phi)],
            [-g * Complex64::from_polar(s, -phi), g * Complex64::from_polar(co, -beta)],
        ],
        rates: None,
    }
}

struct QubitObjective {
    rates: ThermalRates,
    qubit: usize,
}

impl QubitObjective {
    fn rate_of(&self, mixing: &Mixing) -> Result<f64> {
        let id = Mixing::identity();
        let pair = if self.qubit == 0 { [mixing, &id] } else { [&id, mixing] };
        let s = preset_rotated_thermal(self.rates, pair)?;
        let prefix = if self.qubit == 0 { "A" } else { "B" };
        let mut total = 0.0;
        for ch in s.channels().iter().filter(|ch| ch.id.starts_with(prefix)) {
            total += channel_qj(ch)?;
        }
        Ok(total)
    }
}

impl CostFunction for QubitObjective {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        self.rate_of(&unitary_from_angles(x)).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

fn local_search(obj: QubitObjective, start: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let step = 0.4;
    let mut simplex = vec![start.clone()];
    for k in 0..start.len() {
        let mut v = start.clone();
        v[k] += step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-13)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|state| state.max_iters(2000))
        .run()
        .map_err(|e| Error::InvalidArgument(format!("optimizer failed: {e}")))?;
    let best = res.state.best_param.clone().unwrap_or(start);
    Ok((best, res.state.best_cost))
}

/// Minimizes the jump rate of a thermal scenario over unitary mixings of each
/// qubit's `σ₊`/`σ₋` channels by multi-start Nelder–Mead. The first start is
/// the identity mixing, which is kept unless a restart is strictly better.
pub fn optimize_unraveling(rates: &ThermalRates, restarts: usize, seed: u64) -> Result<UnravelingOptimum> {
    let rates = ThermalRates::new(rates.plus[0], rates.minus[0], rates.plus[1], rates.minus[1])?;
    let mut mixings = [Mixing::identity(), Mixing::identity()];
    let mut rate = 0.0;
    for q in 0..2 {
        let mut rng = trajectory_rng(seed, q as u64);
        let mut best_x = vec![0.0; 4];
        let mut best = QubitObjective { rates, qubit: q }.rate_of(&unitary_from_angles(&best_x))?;
        for r in 0..restarts.max(1) {
            let start = if r == 0 {
                vec![0.0; 4]
            } else {
                (0..4).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
            };
            let (x, cost) = local_search(QubitObjective { rates, qubit: q }, start)?;
            if cost < best - 1e-12 {
                best = cost;
                best_x = x;
            }
        }
        log::debug!("qubit {q}: best jump rate {best}");
        mixings[q] = unitary_from_angles(&best_x);
        rate += best;
    }
    let s = preset_rotated_thermal(rates, [&mixings[0], &mixings[1]])?;
    let phases = s.channels().iter().map(|ch| ch.id.clone()).zip(laser_phases(&s)?).collect();
    Ok(UnravelingOptimum { mixing: mixings, phases, rate, closed_form: kappa_opt_thermal(&rates) })
}

/// `½ arg det J` in `[0, π)` for each channel (`0` when `det J = 0`): the laser
/// phases that make every determinant real and non-negative.
pub fn laser_phases(s: &Scenario) -> Result<Vec<f64>> {
    s.channels()
        .iter()
        .map(|ch| {
            let det = det2(&local_op(ch, false)?);
            Ok(if det.norm() == 0.0 { 0.0 } else { 0.5 * det.arg().rem_euclid(2.0 * std::f64::consts::PI) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::concurrence_pure;
    use crate::linalg::{c, pauli, Mat4, ZERO};
    use crate::model::{
        custom, preset_dephasing, preset_photon_counting, preset_thermal, with_heterodyne, with_homodyne_shift,
        with_laser_phases, ChannelOp,
    };
    use proptest::prelude::{prop_assert, prop_assume, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_mat2(rng: &mut impl Rng) -> Mat2 {
        let mut m = Mat2::zeros();
        for r in 0..2 {
            for col in 0..2 {
                m.0[r][col] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        m
    }

    fn random_local_scenario(rng: &mut impl Rng) -> Scenario {
        let n = rng.random_range(1..=4);
        let channels = (0..n)
            .map(|k| {
                let op = random_mat2(rng);
                let op = if k % 2 == 0 { ChannelOp::QubitA(op) } else { ChannelOp::QubitB(op) };
                JumpChannel::new(format!("c{k}"), op, rng.random_range(0.0..2.0))
            })
            .collect();
        custom(Mat4::zeros(), channels, QubitPairState::bell_phi(0.0)).unwrap()
    }

    #[test]
    fn preset_jump_rates() {
        let pc = preset_photon_counting(1.0, 1.0).unwrap();
        assert!((kappa_qj(&pc).unwrap() - 1.0).abs() < 1e-15);
        let th = preset_thermal(1.0, 2.0, 1.0, 2.0).unwrap();
        assert!((kappa_qj(&th).unwrap() - 3.0).abs() < 1e-15);
        let dp = preset_dephasing([0.36, 0.48, 0.8], [0.0, 0.0, 1.0], 1.0, 2.0).unwrap();
        assert!(kappa_qj(&dp).unwrap().abs() < 1e-15);
        assert!(matches!(kappa_qj(&preset_common_bath(1.0).unwrap()), Err(Error::NonLocalChannel(_))));
    }

    #[test]
    fn decomposition_examples() {
        let single = custom(
            Mat4::zeros(),
            vec![JumpChannel::new("a", ChannelOp::QubitA(pauli::sigma_minus()), 0.7)],
            QubitPairState::bell_phi(0.0),
        )
        .unwrap();
        assert!((kappa_qj_decomposed(&single).unwrap() - 0.35).abs() < 1e-15);
        let dp = preset_dephasing([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 1.0).unwrap();
        assert!(kappa_qj_decomposed(&dp).unwrap().abs() < 1e-15);
    }

    #[test]
    fn decomposition_equals_direct_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..1000 {
            let s = random_local_scenario(&mut rng);
            let a = kappa_qj(&s).unwrap();
            let b = kappa_qj_decomposed(&s).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            assert!(b >= 0.0);
        }
    }

    #[test]
    fn rate_orderings() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let s = random_local_scenario(&mut rng);
            let r = rate_report(&s).unwrap();
            assert!(r.kappa_ho_opt <= r.kappa_qj + 1e-12);
            assert!(r.kappa_het >= r.kappa_ho_opt - 1e-12);
            assert!(r.kappa_ho_opt <= r.kappa_ho + 1e-12);
            assert!(r.kappa_qj >= -1e-12);
        }
    }

    #[test]
    fn sigma_minus_limits_coincide() {
        let s = preset_photon_counting(0.4, 1.2).unwrap();
        let r = rate_report(&s).unwrap();
        for k in [r.kappa_qj, r.kappa_ho, r.kappa_ho_opt, r.kappa_het] {
            assert!((k - 0.8).abs() < 1e-15);
        }
        // zero temperature: no mixing beats photon counting
        assert!((r.kappa_qj_opt_thermal.unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(r.channels.len(), 2);
    }

    #[test]
    fn thermal_optimum_closed_form() {
        let zero_t = ThermalRates::new(0.0, 1.0, 0.0, 3.0).unwrap();
        assert!((kappa_opt_thermal(&zero_t) - 2.0).abs() < 1e-15);
        let infinite_t = ThermalRates::new(1.5, 1.5, 0.2, 0.2).unwrap();
        assert!(kappa_opt_thermal(&infinite_t).abs() < 1e-15);
        // two qubits with γ₊ = 1, γ₋ = 2: 2 · ½(√2 − 1)² = 3 − 2√2
        let fig = ThermalRates::new(1.0, 2.0, 1.0, 2.0).unwrap();
        assert!((kappa_opt_thermal(&fig) - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);
        let th = preset_thermal(1.0, 2.0, 1.0, 2.0).unwrap();
        assert_eq!(rate_report(&th).unwrap().kappa_qj_opt_thermal, Some(kappa_opt_thermal(&fig)));
    }

    #[test]
    fn optimal_mixing_reaches_closed_form() {
        let rates = ThermalRates::new(1.0, 2.0, 0.5, 3.0).unwrap();
        let opt = Mixing::optimal();
        let s = preset_rotated_thermal(rates, [&opt, &opt]).unwrap();
        assert!((kappa_qj(&s).unwrap() - kappa_opt_thermal(&rates)).abs() < 1e-12);
    }

    #[test]
    fn phase_rotation_changes_homodyne_but_not_jump_rate() {
        let s = preset_dephasing([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, 1.0).unwrap();
        let rotated = with_laser_phases(&s, &[FRAC_PI_2, FRAC_PI_2]).unwrap();
        assert!((kappa_qj(&s).unwrap() - kappa_qj(&rotated).unwrap()).abs() < 1e-15);
        // each Hermitian traceless channel gives γ(1 − det) = 2γ
        assert!((kappa_ho(&s).unwrap() - 4.0).abs() < 1e-15);
        assert!(kappa_ho(&rotated).unwrap().abs() < 1e-15);
        assert!(kappa_ho_opt(&s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn homodyne_phase_scan_matches_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let j = random_mat2(&mut rng);
            let s = custom(Mat4::zeros(), vec![JumpChannel::new("a", ChannelOp::QubitB(j), 1.3)], QubitPairState::bell_phi(0.0)).unwrap();
            let scan = (0..10_000)
                .map(|k| {
                    let theta = std::f64::consts::PI * k as f64 / 10_000.0;
                    kappa_ho(&with_laser_phases(&s, &[theta]).unwrap()).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((scan - kappa_ho_opt(&s).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn shifted_dephasing_rate() {
        // J = σ_z shifted by ±α at half rate: κ = 2 Σ γ min(α², 1)
        for alpha in [0.3, 0.8, 1.0, 1.7] {
            let s = preset_dephasing([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.5, 1.5).unwrap();
            let shifted = with_homodyne_shift(&s, &[c(alpha, 0.0), c(alpha, 0.0)]).unwrap();
            let expected = 2.0 * (0.5 + 1.5) * f64::min(alpha * alpha, 1.0);
            let got = kappa_qj(&shifted).unwrap();
            assert!((got - expected).abs() < 1e-12, "α = {alpha}: {got} vs {expected}");
            assert!((kappa_qj_decomposed(&shifted).unwrap() - got).abs() < 1e-12);
            assert!((kappa_ho(&shifted).unwrap() - kappa_ho(&s).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn heterodyne_shift_is_ignored_by_jump_rate() {
        let s = preset_photon_counting(1.0, 2.0).unwrap();
        let het = with_heterodyne(&s, &[4.0, 4.0], &[1.0, 1.0]).unwrap();
        let a = rate_report(&s).unwrap();
        let b = rate_report(&het).unwrap();
        assert!((a.kappa_qj - b.kappa_qj).abs() < 1e-15);
        assert!((a.kappa_het - b.kappa_het).abs() < 1e-15);
    }

    #[test]
    fn independent_mean_curve() {
        assert_eq!(mean_concurrence_independent(0.7, 2.0, 0.0).unwrap(), 0.7);
        assert_eq!(mean_concurrence_independent(0.7, 0.0, 9.0).unwrap(), 0.7);
        assert!((mean_concurrence_independent(1.0, 1.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(mean_concurrence_independent(1.2, 1.0, 1.0).is_err());
        assert!(mean_concurrence_independent(0.5, -1.0, 1.0).is_err());
    }

    fn split_excitation_state() -> QubitPairState {
        let s5 = 5f64.sqrt();
        QubitPairState::new([ZERO, c(2.0 / s5, 0.0), c(1.0 / s5, 0.0), ZERO]).unwrap()
    }

    #[test]
    fn common_bath_curve_values() {
        let curve = CommonBathCurve::new(&split_excitation_state(), 1.0).unwrap();
        assert!((curve.mean(0.0) - 0.8).abs() < 1e-15);
        let t0 = common_bath_vanish_time(&curve).unwrap();
        assert!((t0 - 3f64.ln()).abs() < 1e-14);
        assert!(curve.mean(t0) < 1e-14);
        assert!((curve.mean(40.0) - 0.1).abs() < 1e-15);
        assert!((curve.asymptote() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn common_bath_vanish_time_cases() {
        let singlet = CommonBathCurve::new(&QubitPairState::bell_psi(true), 1.0).unwrap();
        assert_eq!(common_bath_vanish_time(&singlet), None);
        assert!((singlet.mean(3.0) - 1.0).abs() < 1e-15);
        let s53 = 53f64.sqrt();
        let inset = QubitPairState::new([c(0.0, 7.0 / s53), ZERO, ZERO, c(0.0, 2.0 / s53)]).unwrap();
        let curve = CommonBathCurve::new(&inset, 1.0).unwrap();
        assert_eq!(common_bath_vanish_time(&curve), None);
        // 28/53 e^{−t} + 98/53 t e^{−2t}
        for t in [0.0f64, 0.1, 0.5, 2.0] {
            let expected = 28.0 / 53.0 * (-t).exp() + 98.0 / 53.0 * t * (-2.0 * t).exp();
            assert!((curve.mean(t) - expected).abs() < 1e-14);
        }
        assert!(curve.mean(0.1) > curve.mean(0.0));
        // complex ratio c₊/c₋ never crosses zero
        let twisted = QubitPairState::normalized([ZERO, c(2.0, 0.0), c(0.0, 1.0), ZERO]).unwrap();
        assert_eq!(common_bath_vanish_time(&CommonBathCurve::new(&twisted, 1.0).unwrap()), None);
    }

    #[test]
    fn one_jump_pieces() {
        let (nj, oj) = common_bath_one_jump_pieces(&split_excitation_state(), 1.0, 0.7).unwrap();
        assert_eq!(oj, 0.0);
        assert!((nj - CommonBathCurve::new(&split_excitation_state(), 1.0).unwrap().mean(0.7)).abs() < 1e-12);

        let up = QubitPairState::basis(QubitPairState::UU);
        for t in [0.2, 0.5, 1.5] {
            let (_, oj) = common_bath_one_jump_pieces(&up, 1.0, t).unwrap();
            assert!((oj - 2.0 * t * (-2.0 * t).exp()).abs() < 1e-15);
        }
    }

    /// Simpson quadrature of `∫₀ᵗ γ |𝒞(e^{−(t−s)K} J e^{−sK} ψ₀)| ds`.
    fn one_jump_quadrature(initial: &QubitPairState, gamma: f64, t: f64) -> f64 {
        let s = preset_common_bath(gamma).unwrap();
        let j = s.channels()[0].op.lifted();
        let n = 2000;
        let h = t / n as f64;
        let f = |tj: f64| {
            let first = expm(&s.k().scale_re(-tj), 1e-15).unwrap().apply(initial.as_vec());
            let after = expm(&s.k().scale_re(-(t - tj)), 1e-15).unwrap().apply(&j.apply(&first));
            gamma * preconcurrence_unnormalized(&after).norm()
        };
        let mut acc = f(0.0) + f(t);
        for k in 1..n {
            acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn one_jump_term_matches_quadrature() {
        let s53 = 53f64.sqrt();
        let inset = QubitPairState::new([c(0.0, 7.0 / s53), ZERO, ZERO, c(0.0, 2.0 / s53)]).unwrap();
        for st in [inset, QubitPairState::basis(0)] {
            for t in [0.3, 1.0, 2.5] {
                let (nj, oj) = common_bath_one_jump_pieces(&st, 1.0, t).unwrap();
                assert!((oj - one_jump_quadrature(&st, 1.0, t)).abs() < 1e-8);
                let curve = CommonBathCurve::new(&st, 1.0).unwrap();
                assert!((nj + oj - curve.mean(t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optimizer_recovers_closed_form() {
        let fig = ThermalRates::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let res = optimize_unraveling(&fig, 8, 1).unwrap();
        assert!((res.rate - res.closed_form).abs() < 1e-6);
        assert!((res.closed_form - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);
        for q in 0..2 {
            assert!(res.mixing[q].rows.iter().flatten().all(|u| (u.norm() - 0.5f64.sqrt()).abs() < 1e-3));
        }

        let zero_t = ThermalRates::new(0.0, 1.0, 0.0, 2.0).unwrap();
        let res = optimize_unraveling(&zero_t, 8, 2).unwrap();
        assert_eq!(res.mixing[0], Mixing::identity());
        assert_eq!(res.mixing[1], Mixing::identity());
        assert!((res.rate - 1.5).abs() < 1e-12);

        let equal = ThermalRates::new(0.7, 0.7, 1.1, 1.1).unwrap();
        assert!(optimize_unraveling(&equal, 8, 3).unwrap().rate < 1e-6);
    }

    #[test]
    fn optimal_scheme_phases() {
        let fig = ThermalRates::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let opt = Mixing::optimal();
        let s = preset_rotated_thermal(fig, [&opt, &opt]).unwrap();
        let phases = laser_phases(&s).unwrap();
        let expected = [FRAC_PI_2, 0.0, FRAC_PI_2, 0.0];
        for (got, want) in phases.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{phases:?}");
        }
        // the phases turn every optimal channel into one with real positive determinant
        let rotated = with_laser_phases(&s, &phases).unwrap();
        for ch in rotated.channels() {
            let d = det2(ch.op.local().unwrap());
            assert!(d.im.abs() < 1e-12 && d.re > 0.0);
        }
    }

    proptest! {
        #[test]
        fn eq21_at_zero_is_pure_concurrence(re in proptest::array::uniform4(-1.0f64..1.0), im in proptest::array::uniform4(-1.0f64..1.0)) {
            let amps = [0, 1, 2, 3].map(|k| c(re[k], im[k]));
            prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-3);
            let s = QubitPairState::normalized(amps).unwrap();
            let curve = CommonBathCurve::new(&s, 1.0).unwrap();
            prop_assert!((curve.mean(0.0) - concurrence_pure(&s).unwrap()).abs() < 1e-12);
        }
    }
}
