//! Scenario catalog: Hamiltonian, measurement channels and initial state for
//! each physical setting, with the derived damping operator
//! `K = ½ Σ γ J†J` and effective Hamiltonian `H_eff = H₀ − iK`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, herm_eig4, lift_a, lift_b, pauli, sandwich_superop, Mat16, Mat2, Mat4, I, ONE};
use crate::state::QubitPairState;

/// Tolerance for comparing two flattened Lindblad generators.
pub const GENERATOR_TOL: f64 = 1e-10;
/// Lowest eigenvalue of `K` accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
const UNIT_VECTOR_TOL: f64 = 1e-12;
const ISOMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Locality {
    QubitA,
    QubitB,
    Joint,
}

impl fmt::Display for Locality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Locality::QubitA => "qubit-A",
            Locality::QubitB => "qubit-B",
            Locality::Joint => "joint",
        })
    }
}

/// A jump operator: a 2×2 operator acting on one qubit or a 4×4 joint operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelOp {
    QubitA(Mat2),
    QubitB(Mat2),
    Joint(Mat4),
}

impl ChannelOp {
    pub fn locality(&self) -> Locality {
        match self {
            ChannelOp::QubitA(_) => Locality::QubitA,
            ChannelOp::QubitB(_) => Locality::QubitB,
            ChannelOp::Joint(_) => Locality::Joint,
        }
    }

    pub fn local(&self) -> Option<&Mat2> {
        match self {
            ChannelOp::QubitA(m) | ChannelOp::QubitB(m) => Some(m),
            ChannelOp::Joint(_) => None,
        }
    }

    pub fn lifted(&self) -> Mat4 {
        match self {
            ChannelOp::QubitA(m) => lift_a(m),
            ChannelOp::QubitB(m) => lift_b(m),
            ChannelOp::Joint(m) => *m,
        }
    }

    fn scaled(&self, s: Complex64) -> ChannelOp {
        match self {
            ChannelOp::QubitA(m) => ChannelOp::QubitA(m.scale(s)),
            ChannelOp::QubitB(m) => ChannelOp::QubitB(m.scale(s)),
            ChannelOp::Joint(m) => ChannelOp::Joint(m.scale(s)),
        }
    }
}

/// One measurement channel.
///
/// The jump operator actually applied at time `t` is `op + shift·e^{iΩt}·1`,
/// where the shift models the local-oscillator amplitude of homodyne
/// (`Ω` absent) or heterodyne detection.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpChannel {
    pub id: String,
    pub op: ChannelOp,
    pub rate: f64,
    pub shift: Option<Complex64>,
    pub het_freq: Option<f64>,
}

impl JumpChannel {
    pub fn new(id: impl Into<String>, op: ChannelOp, rate: f64) -> Self {
        JumpChannel { id: id.into(), op, rate, shift: None, het_freq: None }
    }

    pub fn locality(&self) -> Locality {
        self.op.locality()
    }

    pub fn is_local(&self) -> bool {
        self.locality() != Locality::Joint
    }

    pub fn is_time_dependent(&self) -> bool {
        self.het_freq.is_some()
    }

    /// `α·e^{iΩt}`, or zero when unshifted.
    pub fn shift_at(&self, t: f64) -> Complex64 {
        match (self.shift, self.het_freq) {
            (Some(a), Some(w)) => a * Complex64::from_polar(1.0, w * t),
            (Some(a), None) => a,
            (None, _) => Complex64::new(0.0, 0.0),
        }
    }

    /// Effective 2×2 jump operator at time `t` for local channels.
    pub fn effective_local(&self, t: f64) -> Option<Mat2> {
        let shift = self.shift_at(t);
        self.op.local().map(|m| *m + Mat2::identity().scale(shift))
    }

    /// Effective jump operator at time `t`, lifted to the two-qubit space.
    pub fn effective(&self, t: f64) -> Mat4 {
        self.op.lifted() + Mat4::identity().scale(self.shift_at(t))
    }
}

/// Temperature-type rates `γ₊`, `γ₋` for qubits A and B (index 0 and 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalRates {
    pub plus: [f64; 2],
    pub minus: [f64; 2],
}

impl ThermalRates {
    pub fn new(plus_a: f64, minus_a: f64, plus_b: f64, minus_b: f64) -> Result<Self> {
        for (what, r) in [("γ₊(A)", plus_a), ("γ₋(A)", minus_a), ("γ₊(B)", plus_b), ("γ₋(B)", minus_b)] {
            check_rate(what, r)?;
        }
        Ok(ThermalRates { plus: [plus_a, plus_b], minus: [minus_a, minus_b] })
    }

    pub fn total(&self) -> f64 {
        self.plus.iter().chain(self.minus.iter()).sum()
    }
}

/// Which catalog entry a scenario came from; used to pick the matching closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    PhotonCounting { gamma: [f64; 2] },
    Thermal(ThermalRates),
    RotatedThermal(ThermalRates),
    Dephasing { gamma: [f64; 2] },
    CommonBath { gamma: f64 },
    Custom,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::PhotonCounting { .. } => "photon_counting",
            Preset::Thermal(_) => "thermal",
            Preset::RotatedThermal(_) => "rotated_thermal",
            Preset::Dephasing { .. } => "dephasing",
            Preset::CommonBath { .. } => "common_bath",
            Preset::Custom => "custom",
        }
    }

    /// Rates of the underlying `σ₊/σ₋` master equation, when there is one.
    pub fn thermal_rates(&self) -> Option<ThermalRates> {
        match *self {
            Preset::PhotonCounting { gamma } => Some(ThermalRates { plus: [0.0, 0.0], minus: gamma }),
            Preset::Thermal(r) | Preset::RotatedThermal(r) => Some(r),
            _ => None,
        }
    }
}

/// Isometric mixing `u_{μm}` (rows `μ`, columns `m ∈ {+, −}`) for one qubit,
/// with optional per-row rates `γ_μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixing {
    pub rows: Vec<[Complex64; 2]>,
    pub rates: Option<Vec<f64>>,
}

impl Mixing {
    pub fn identity() -> Self {
        Mixing { rows: vec![[ONE, c(0.0, 0.0)], [c(0.0, 0.0), ONE]], rates: None }
    }

    /// `u_{1±} = ±u_{2±} = 1/√2`, the minimum-rate choice.
    pub fn optimal() -> Self {
        let h = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Mixing { rows: vec![[h, h], [h, -h]], rates: None }
    }

    /// Largest entry of `|U†U − 1|`.
    pub fn isometry_defect(&self) -> f64 {
        let mut gram = Mat2::zeros();
        for row in &self.rows {
            for m in 0..2 {
                for n in 0..2 {
                    gram.0[m][n] += row[m].conj() * row[n];
                }
            }
        }
        (gram - Mat2::identity()).max_abs()
    }
}

/// A complete physical setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    h0: Mat4,
    channels: Vec<JumpChannel>,
    initial: QubitPairState,
    preset: Preset,
    derived_k: Mat4,
    derived_heff: Mat4,
}

fn check_rate(what: &str, rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::NegativeRate { what: what.to_string(), rate });
    }
    Ok(())
}

fn damping_operator(channels: &[JumpChannel], t: f64, shifted: bool) -> Mat4 {
    let mut k = Mat4::zeros();
    for ch in channels {
        let j = if shifted { ch.effective(t) } else { ch.op.lifted() };
        k += (j.adjoint() * j).scale_re(0.5 * ch.rate);
    }
    k
}

impl Scenario {
    /// Assembles a scenario and its derived operators without validating it;
    /// see [`validate_scenario`] and [`Scenario::new`].
    pub fn from_parts(h0: Mat4, channels: Vec<JumpChannel>, initial: QubitPairState, preset: Preset) -> Self {
        let derived_k = damping_operator(&channels, 0.0, true);
        let derived_heff = h0 - derived_k.scale(I);
        Scenario { h0, channels, initial, preset, derived_k, derived_heff }
    }

    /// Assembles and validates.
    pub fn new(h0: Mat4, channels: Vec<JumpChannel>, initial: QubitPairState, preset: Preset) -> Result<Self> {
        let s = Self::from_parts(h0, channels, initial, preset);
        let report = validate_scenario(&s, None);
        if !report.is_ok() {
            return Err(Error::InvalidScenario(report.to_string()));
        }
        Ok(s)
    }

    pub fn h0(&self) -> &Mat4 {
        &self.h0
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn initial(&self) -> &QubitPairState {
        &self.initial
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    /// `½ Σ γ L†L` with the shifted (applied) jump operators.
    pub fn k(&self) -> &Mat4 {
        &self.derived_k
    }

    pub fn heff(&self) -> &Mat4 {
        &self.derived_heff
    }

    /// `½ Σ γ J†J` built from the unshifted operators, as used by the diffusive limits.
    pub fn base_k(&self) -> Mat4 {
        damping_operator(&self.channels, 0.0, false)
    }

    pub fn all_local(&self) -> bool {
        self.channels.iter().all(JumpChannel::is_local)
    }

    pub fn first_joint_channel(&self) -> Option<&JumpChannel> {
        self.channels.iter().find(|ch| !ch.is_local())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.channels.iter().any(JumpChannel::is_time_dependent)
    }

    pub fn max_rate(&self) -> f64 {
        self.channels.iter().map(|ch| ch.rate).fold(0.0, f64::max)
    }

    pub fn with_initial(mut self, initial: QubitPairState) -> Self {
        self.initial = initial;
        self
    }

    /// Replaces `H₀` by `H_A ⊗ 1 + 1 ⊗ H_B`.
    pub fn with_local_hamiltonian(self, h_a: &Mat2, h_b: &Mat2) -> Result<Self> {
        if h_a.hermiticity_defect() > 1e-12 || h_b.hermiticity_defect() > 1e-12 {
            return Err(Error::InvalidArgument("local Hamiltonians must be Hermitian".into()));
        }
        let h0 = lift_a(h_a) + lift_b(h_b);
        Scenario::new(h0, self.channels, self.initial, self.preset)
    }

    /// Lindblad generator flattened to a 16×16 matrix acting on column-stacked `ρ`.
    pub fn liouvillian(&self) -> Mat16 {
        liouvillian_at(&self.h0, &self.channels, 0.0)
    }
}

/// Superoperator of `ρ ↦ −i[H, ρ] + Σ γ (LρL† − ½{L†L, ρ})` with the jump
/// operators evaluated at time `t`.
pub fn liouvillian_at(h0: &Mat4, channels: &[JumpChannel], t: f64) -> Mat16 {
    let id = Mat4::identity();
    let mut gen = (sandwich_superop(h0, &id) - sandwich_superop(&id, h0)).scale(-I);
    for ch in channels {
        let l = ch.effective(t);
        let ldl = l.adjoint() * l;
        let d = sandwich_superop(&l, &l.adjoint())
            - sandwich_superop(&ldl, &id).scale_re(0.5)
            - sandwich_superop(&id, &ldl).scale_re(0.5);
        gen += d.scale_re(ch.rate);
    }
    gen
}

fn default_initial() -> QubitPairState {
    QubitPairState::bell_phi(0.0)
}

/// Spontaneous emission of each qubit into its own zero-temperature bath,
/// monitored by photon counters: channels `σ₋` on A and B.
pub fn preset_photon_counting(gamma_a: f64, gamma_b: f64) -> Result<Scenario> {
    check_rate("γ_A", gamma_a)?;
    check_rate("γ_B", gamma_b)?;
    let channels = vec![
        JumpChannel::new("A-", ChannelOp::QubitA(pauli::sigma_minus()), gamma_a),
        JumpChannel::new("B-", ChannelOp::QubitB(pauli::sigma_minus()), gamma_b),
    ];
    Scenario::new(Mat4::zeros(), channels, default_initial(), Preset::PhotonCounting { gamma: [gamma_a, gamma_b] })
}

/// Positive-temperature baths: `σ₋` with rates `γ₋` and `σ₊` with rates `γ₊` on each qubit.
pub fn preset_thermal(plus_a: f64, minus_a: f64, plus_b: f64, minus_b: f64) -> Result<Scenario> {
    let rates = ThermalRates::new(plus_a, minus_a, plus_b, minus_b)?;
    Scenario::new(Mat4::zeros(), thermal_channels(&rates), default_initial(), Preset::Thermal(rates))
}

fn thermal_channels(rates: &ThermalRates) -> Vec<JumpChannel> {
    vec![
        JumpChannel::new("A-", ChannelOp::QubitA(pauli::sigma_minus()), rates.minus[0]),
        JumpChannel::new("A+", ChannelOp::QubitA(pauli::sigma_plus()), rates.plus[0]),
        JumpChannel::new("B-", ChannelOp::QubitB(pauli::sigma_minus()), rates.minus[1]),
        JumpChannel::new("B+", ChannelOp::QubitB(pauli::sigma_plus()), rates.plus[1]),
    ]
}

/// Pure dephasing along unit directions: channels `v_i·σ` with rates `γ_i`.
pub fn preset_dephasing(v_a: [f64; 3], v_b: [f64; 3], gamma_a: f64, gamma_b: f64) -> Result<Scenario> {
    check_rate("γ_A", gamma_a)?;
    check_rate("γ_B", gamma_b)?;
    for v in [v_a, v_b] {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_VECTOR_TOL {
            return Err(Error::InvalidArgument(format!("dephasing direction {v:?} has norm {norm}, expected 1")));
        }
    }
    let channels = vec![
        JumpChannel::new("A", ChannelOp::QubitA(pauli::dot(v_a)), gamma_a),
        JumpChannel::new("B", ChannelOp::QubitB(pauli::dot(v_b)), gamma_b),
    ];
    Scenario::new(Mat4::zeros(), channels, default_initial(), Preset::Dephasing { gamma: [gamma_a, gamma_b] })
}

/// Rotated measurement basis for thermal baths:
/// `J_μ = Σ_m (γ_m/γ_μ)^{1/2} u_{μm} σ_m` with rate `γ_μ` on each qubit.
///
/// When `Mixing::rates` is absent, `γ_μ = Σ_m γ_m |u_{μm}|²`; rows with
/// `γ_μ = 0` carry no jumps and are dropped. The resulting Lindblad generator
/// is checked against the one of [`preset_thermal`].
pub fn preset_rotated_thermal(rates: ThermalRates, mixing: [&Mixing; 2]) -> Result<Scenario> {
    ThermalRates::new(rates.plus[0], rates.minus[0], rates.plus[1], rates.minus[1])?;
    let mut channels = Vec::new();
    for (q, mix) in mixing.iter().enumerate() {
        let defect = mix.isometry_defect();
        if defect > ISOMETRY_TOL {
            return Err(Error::InvalidArgument(format!("mixing for qubit {} is not an isometry (|U†U − 1| = {defect:e})", q_label(q))));
        }
        if let Some(r) = &mix.rates {
            if r.len() != mix.rows.len() {
                return Err(Error::InvalidArgument("one rate per mixing row is required".into()));
            }
        }
        let (gp, gm) = (rates.plus[q], rates.minus[q]);
        for (mu, row) in mix.rows.iter().enumerate() {
            let natural = gp * row[0].norm_sqr() + gm * row[1].norm_sqr();
            let rate = match &mix.rates {
                Some(r) => {
                    check_rate("γ_μ", r[mu])?;
                    r[mu]
                }
                None => natural,
            };
            if natural == 0.0 {
                continue;
            }
            if rate == 0.0 {
                return Err(Error::InvalidArgument(format!("row {mu} of the qubit {} mixing needs a positive rate", q_label(q))));
            }
            let op = pauli::sigma_plus().scale(row[0] * (gp / rate).sqrt())
                + pauli::sigma_minus().scale(row[1] * (gm / rate).sqrt());
            let op = if q == 0 { ChannelOp::QubitA(op) } else { ChannelOp::QubitB(op) };
            channels.push(JumpChannel::new(format!("{}{}", q_label(q), mu + 1), op, rate));
        }
    }
    let s = Scenario::new(Mat4::zeros(), channels, default_initial(), Preset::RotatedThermal(rates))?;
    let reference = Scenario::from_parts(Mat4::zeros(), thermal_channels(&rates), default_initial(), Preset::Thermal(rates));
    ensure_same_generator(&s, &reference)?;
    Ok(s)
}

fn q_label(q: usize) -> &'static str {
    if q == 0 {
        "A"
    } else {
        "B"
    }
}

fn ensure_same_generator(s: &Scenario, reference: &Scenario) -> Result<()> {
    let report = validate_scenario(s, Some(reference));
    if report.is_ok() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(report.to_string()))
    }
}

/// Homodyne detection via 50% beam splitters: every channel `J` with rate `γ`
/// becomes the pair `J ± α` with rates `γ/2`.
pub fn with_homodyne_shift(s: &Scenario, shifts: &[Complex64]) -> Result<Scenario> {
    split_channels(s, shifts.iter().map(|&a| (a, None)).collect())
}

/// Heterodyne detection: channels `J ± α e^{iΩt}` with rates `γ/2`, evaluated
/// at the jump time.
pub fn with_heterodyne(s: &Scenario, amplitudes: &[f64], freqs: &[f64]) -> Result<Scenario> {
    if amplitudes.len() != s.channels.len() || freqs.len() != s.channels.len() {
        return Err(Error::InvalidArgument(format!(
            "heterodyne needs one amplitude and one frequency per channel ({} channels, {} amplitudes, {} frequencies)",
            s.channels.len(),
            amplitudes.len(),
            freqs.len()
        )));
    }
    for (a, w) in amplitudes.iter().zip(freqs) {
        if !(*a > 0.0 && a.is_finite()) || !(*w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidArgument(format!("heterodyne amplitude and frequency must be positive, got α = {a}, Ω = {w}")));
        }
    }
    split_channels(s, amplitudes.iter().zip(freqs).map(|(&a, &w)| (c(a, 0.0), Some(w))).collect())
}

fn split_channels(s: &Scenario, shifts: Vec<(Complex64, Option<f64>)>) -> Result<Scenario> {
    if let Some(ch) = s.first_joint_channel() {
        return Err(Error::NonLocalChannel(ch.id.clone()));
    }
    if shifts.len() != s.channels.len() {
        return Err(Error::InvalidArgument(format!("expected {} shifts, got {}", s.channels.len(), shifts.len())));
    }
    if s.channels.iter().any(|ch| ch.shift.is_some()) {
        return Err(Error::InvalidArgument("channels are already shifted".into()));
    }
    let mut channels = Vec::with_capacity(2 * s.channels.len());
    for (ch, (alpha, freq)) in s.channels.iter().zip(shifts) {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::NonFinite("laser amplitude"));
        }
        for (sign, tag) in [(1.0, "+α"), (-1.0, "-α")] {
            channels.push(JumpChannel {
                id: format!("{}{}", ch.id, tag),
                op: ch.op,
                rate: ch.rate / 2.0,
                shift: Some(alpha * sign),
                het_freq: freq,
            });
        }
    }
    let out = Scenario::new(s.h0, channels, s.initial, s.preset)?;
    ensure_same_generator(&out, s)?;
    Ok(out)
}

/// Laser phases for the diffusive limits: `J → e^{−iθ}J` on every channel.
/// The Lindblad generator is unchanged; the diffusive rates are not.
pub fn with_laser_phases(s: &Scenario, phases: &[f64]) -> Result<Scenario> {
    if phases.len() != s.channels.len() {
        return Err(Error::InvalidArgument(format!("expected {} phases, got {}", s.channels.len(), phases.len())));
    }
    let channels = s
        .channels
        .iter()
        .zip(phases)
        .map(|(ch, &theta)| JumpChannel { op: ch.op.scaled(Complex64::from_polar(1.0, -theta)), ..ch.clone() })
        .collect();
    Scenario::new(s.h0, channels, s.initial, s.preset)
}

/// Two qubits emitting into the same field mode: one joint channel
/// `σ₋ ⊗ 1 + 1 ⊗ σ₋` with rate `γ`.
pub fn preset_common_bath(gamma: f64) -> Result<Scenario> {
    check_rate("γ", gamma)?;
    let j = lift_a(&pauli::sigma_minus()) + lift_b(&pauli::sigma_minus());
    let channels = vec![JumpChannel::new("AB-", ChannelOp::Joint(j), gamma)];
    Scenario::new(Mat4::zeros(), channels, default_initial(), Preset::CommonBath { gamma })
}

/// Scenario from explicit channels and a Hamiltonian (`Preset::Custom`).
pub fn custom(h0: Mat4, channels: Vec<JumpChannel>, initial: QubitPairState) -> Result<Scenario> {
    Scenario::new(h0, channels, initial, Preset::Custom)
}

/// One failed check from [`validate_scenario`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    InvalidRate { channel: String, rate: f64 },
    FrequencyWithoutShift { channel: String },
    NonFiniteOperator { channel: String },
    HamiltonianNotHermitian { defect: f64 },
    DampingNotPositive { min_eigenvalue: f64 },
    EffectiveHamiltonianMismatch { defect: f64 },
    DampingTimeDependent { defect: f64 },
    InitialNotNormalized { norm: f64 },
    GeneratorMismatch { max_abs_diff: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidRate { channel, rate } => write!(f, "channel `{channel}` has invalid rate {rate}"),
            Violation::FrequencyWithoutShift { channel } => write!(f, "channel `{channel}` has a heterodyne frequency but no amplitude"),
            Violation::NonFiniteOperator { channel } => write!(f, "channel `{channel}` has non-finite operator entries"),
            Violation::HamiltonianNotHermitian { defect } => write!(f, "H0 is not Hermitian (defect {defect:e})"),
            Violation::DampingNotPositive { min_eigenvalue } => write!(f, "K has negative eigenvalue {min_eigenvalue:e}"),
            Violation::EffectiveHamiltonianMismatch { defect } => write!(f, "H_eff differs from H0 - iK by {defect:e}"),
            Violation::DampingTimeDependent { defect } => {
                write!(f, "K changes in time by {defect:e}; heterodyne channels must come in ± pairs")
            }
            Violation::InitialNotNormalized { norm } => write!(f, "initial state has norm {norm}"),
            Violation::GeneratorMismatch { max_abs_diff } => {
                write!(f, "Lindblad generator differs from the reference by {max_abs_diff:e}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Largest entrywise difference to the reference generator, when one was given.
    pub generator_diff: Option<f64>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks the scenario invariants and, when `reference` is given, that both
/// scenarios unravel the same master equation.
pub fn validate_scenario(s: &Scenario, reference: Option<&Scenario>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let v = &mut report.violations;
    for ch in &s.channels {
        if !ch.rate.is_finite() || ch.rate < 0.0 {
            v.push(Violation::InvalidRate { channel: ch.id.clone(), rate: ch.rate });
        }
        if ch.het_freq.is_some() && ch.shift.is_none() {
            v.push(Violation::FrequencyWithoutShift { channel: ch.id.clone() });
        }
        if !ch.op.lifted().is_finite() || !ch.shift.is_none_or(|a| a.re.is_finite() && a.im.is_finite()) {
            v.push(Violation::NonFiniteOperator { channel: ch.id.clone() });
        }
    }
    let defect = s.h0.hermiticity_defect();
    if !(defect <= 1e-10) {
        v.push(Violation::HamiltonianNotHermitian { defect });
    }
    if s.derived_k.is_finite() {
        match herm_eig4(&s.derived_k) {
            Ok(e) if e.values[3] < -PSD_TOL => v.push(Violation::DampingNotPositive { min_eigenvalue: e.values[3] }),
            Ok(_) => {}
            Err(_) => v.push(Violation::DampingNotPositive { min_eigenvalue: f64::NAN }),
        }
    }
    let heff_defect = (s.derived_heff - (s.h0 - s.derived_k.scale(I))).max_abs();
    if !(heff_defect <= 1e-12) {
        v.push(Violation::EffectiveHamiltonianMismatch { defect: heff_defect });
    }
    if s.is_time_dependent() {
        let max_freq = s.channels.iter().filter_map(|ch| ch.het_freq).fold(0.0, f64::max);
        let scale = 1.0 + s.derived_k.max_abs();
        let worst = [0.37, 1.0, 2.9]
            .iter()
            .map(|&x| (damping_operator(&s.channels, x / max_freq, true) - s.derived_k).max_abs())
            .fold(0.0, f64::max);
        if worst > 1e-10 * scale {
            v.push(Violation::DampingTimeDependent { defect: worst });
        }
    }
    let norm = s.initial.as_vec().norm();
    if (norm - 1.0).abs() > crate::state::NORM_TOL {
        v.push(Violation::InitialNotNormalized { norm });
    }
    if let Some(r) = reference {
        let diff = (s.liouvillian() - r.liouvillian()).max_abs();
        report.generator_diff = Some(diff);
        if !(diff <= GENERATOR_TOL) {
            report.violations.push(Violation::GeneratorMismatch { max_abs_diff: diff });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{det2, expm, Vec4, ZERO};
    use std::f64::consts::FRAC_PI_4;

    fn no_jump_propagator(s: &Scenario, t: f64) -> Mat4 {
        expm(&s.heff().scale(-I * t), 1e-14).unwrap()
    }

    #[test]
    fn photon_counting_structure() {
        let s = preset_photon_counting(1.0, 0.5).unwrap();
        assert_eq!(s.channels().len(), 2);
        assert!(s.all_local());
        assert_eq!(*s.h0(), Mat4::zeros());
        let zero = preset_photon_counting(0.0, 0.0).unwrap();
        assert_eq!(*zero.k(), Mat4::zeros());
        assert_eq!(*zero.heff(), Mat4::zeros());
        assert!(matches!(preset_photon_counting(-1.0, 0.0), Err(Error::NegativeRate { .. })));
    }

    #[test]
    fn photon_counting_single_qubit_damping() {
        // only A damps; amplitudes with A down are untouched by the no-jump evolution
        let s = preset_photon_counting(1.3, 0.0).unwrap();
        let p = no_jump_propagator(&s, 0.8);
        for idx in [QubitPairState::DU, QubitPairState::DD] {
            let out = p.apply(&Vec4::basis(idx));
            assert!((out - Vec4::basis(idx)).norm() < 1e-13);
        }
        let out = p.apply(&Vec4::basis(QubitPairState::UU));
        assert!((out.0[0].re - (-1.3f64 * 0.8 / 2.0).exp()).abs() < 1e-13);
    }

    #[test]
    fn thermal_steady_state_populations() {
        // 2×2 rate equation fixed point: p↑ γ₋ = p↓ γ₊
        let (gp, gm) = (0.7, 1.9);
        let s = preset_thermal(gp, gm, gp, gm).unwrap();
        // product of single-qubit steady states is annihilated by the generator
        let q = [gp / (gp + gm), gm / (gp + gm)];
        let rho = Mat4::from_real_diag([q[0] * q[0], q[0] * q[1], q[1] * q[0], q[1] * q[1]]);
        let gen = s.liouvillian();
        let mut v = crate::linalg::Vector::<16>::default();
        for r in 0..4 {
            for col in 0..4 {
                v.0[4 * col + r] = rho.0[r][col];
            }
        }
        assert!(gen.apply(&v).norm() < 1e-14);
        assert!(preset_thermal(0.0, 0.0, 0.0, 0.0).unwrap().liouvillian().max_abs() == 0.0);
    }

    #[test]
    fn dephasing_operators() {
        let s = preset_dephasing([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], 0.4, 0.4).unwrap();
        assert_eq!(s.channels()[0].op, ChannelOp::QubitA(pauli::sigma_z()));
        // K_i = γ/2·1 on each qubit, so K = γ·1
        assert!((*s.k() - Mat4::identity().scale_re(0.4)).max_abs() < 1e-15);
        assert!(preset_dephasing([1.0, 1.0, 0.0], [0.0, 0.0, 1.0], 1.0, 1.0).is_err());

        // e^{iπ/4}σ₋ + e^{−iπ/4}σ₊ = v·σ with v = (cos π/4, sin π/4, 0)
        let j = pauli::sigma_minus().scale(Complex64::from_polar(1.0, FRAC_PI_4))
            + pauli::sigma_plus().scale(Complex64::from_polar(1.0, -FRAC_PI_4));
        let v = pauli::dot([FRAC_PI_4.cos(), FRAC_PI_4.sin(), 0.0]);
        assert!((j - v).max_abs() < 1e-15);
        assert!((det2(&j) + ONE).norm() < 1e-15);
        assert!(j.trace().norm() < 1e-15);
    }

    #[test]
    fn rotated_thermal_identity_and_optimal() {
        let rates = ThermalRates::new(1.0, 2.0, 0.5, 3.0).unwrap();
        let id = Mixing::identity();
        let s = preset_rotated_thermal(rates, [&id, &id]).unwrap();
        let thermal = preset_thermal(1.0, 2.0, 0.5, 3.0).unwrap();
        // same operator set (possibly relabelled)
        for ch in s.channels() {
            assert!(thermal.channels().iter().any(|t| (t.op.lifted().scale_re(t.rate.sqrt()) - ch.op.lifted().scale_re(ch.rate.sqrt())).max_abs() < 1e-14));
        }
        let opt = Mixing::optimal();
        let s = preset_rotated_thermal(rates, [&opt, &opt]).unwrap();
        let report = validate_scenario(&s, Some(&thermal));
        assert!(report.is_ok(), "{report}");
        assert!(report.generator_diff.unwrap() <= GENERATOR_TOL);

        let bad = Mixing { rows: vec![[ONE, ONE]], rates: None };
        assert!(preset_rotated_thermal(rates, [&bad, &id]).is_err());
    }

    #[test]
    fn rotated_thermal_custom_rates_keep_generator() {
        let rates = ThermalRates::new(0.3, 1.1, 0.2, 0.9).unwrap();
        let opt = Mixing { rates: Some(vec![0.25, 4.0]), ..Mixing::optimal() };
        // three-row isometry
        let third = 1.0 / 3f64.sqrt();
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let three = Mixing {
            rows: vec![[c(third, 0.0), c(third, 0.0)], [c(third, 0.0), w * third], [c(third, 0.0), w * w * third]],
            rates: None,
        };
        assert!(three.isometry_defect() < 1e-12);
        let s = preset_rotated_thermal(rates, [&opt, &three]).unwrap();
        assert_eq!(s.channels().len(), 5);
    }

    #[test]
    fn homodyne_shift_doubles_channels_and_keeps_generator() {
        let s = preset_photon_counting(1.0, 0.7).unwrap();
        let zero = with_homodyne_shift(&s, &[ZERO, ZERO]).unwrap();
        assert_eq!(zero.channels().len(), 4);
        assert!((zero.liouvillian() - s.liouvillian()).max_abs() < 1e-14);
        let shifted = with_homodyne_shift(&s, &[c(2.0, 0.5), c(-1.0, 3.0)]).unwrap();
        assert!((shifted.liouvillian() - s.liouvillian()).max_abs() < GENERATOR_TOL);
        assert!(shifted.channels().iter().all(|ch| (ch.rate - 0.5).abs() < 1e-15 || (ch.rate - 0.35).abs() < 1e-15));

        let cb = preset_common_bath(1.0).unwrap();
        assert!(matches!(with_homodyne_shift(&cb, &[ONE]), Err(Error::NonLocalChannel(_))));
    }

    #[test]
    fn heterodyne_channels() {
        let s = preset_photon_counting(1.0, 1.0).unwrap();
        let h = with_heterodyne(&s, &[3.0, 3.0], &[20.0, 25.0]).unwrap();
        assert!(h.is_time_dependent());
        assert_eq!(h.channels().len(), 4);
        let ch = &h.channels()[0];
        let t = 0.123;
        let expected = pauli::sigma_minus() + Mat2::identity().scale(Complex64::from_polar(3.0, 20.0 * t));
        assert!((ch.effective_local(t).unwrap() - expected).max_abs() < 1e-14);
        assert!(validate_scenario(&h, Some(&s)).is_ok());
        assert!(with_heterodyne(&s, &[3.0], &[1.0]).is_err());
        assert!(with_heterodyne(&s, &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(with_heterodyne(&s, &[1.0, 1.0], &[1.0, -1.0]).is_err());

        // Ω → 0 reduces to the homodyne operator
        let slow = with_heterodyne(&s, &[3.0, 3.0], &[1e-300, 1e-300]).unwrap();
        let homo = with_homodyne_shift(&s, &[c(3.0, 0.0), c(3.0, 0.0)]).unwrap();
        for (a, b) in slow.channels().iter().zip(homo.channels()) {
            assert!((a.effective(5.0) - b.effective(5.0)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn common_bath_structure() {
        let s = preset_common_bath(2.0).unwrap();
        let j = s.channels()[0].op.lifted();
        let up_up = Vec4::basis(QubitPairState::UU);
        let out = j.apply(&up_up);
        assert!((out - (Vec4::basis(1) + Vec4::basis(2))).norm() < 1e-15);
        let out2 = j.apply(&out);
        assert!((out2 - Vec4::basis(3).scale_re(2.0)).norm() < 1e-15);
        assert_eq!(j * j * j, Mat4::zeros());

        let e = herm_eig4(s.k()).unwrap();
        let expected = [2.0, 2.0, 0.0, 0.0];
        for (got, want) in e.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        let dark = QubitPairState::bell_psi(true);
        assert!(s.k().apply(dark.as_vec()).norm() < 1e-15);
        assert_eq!(s.first_joint_channel().map(|c| c.locality()), Some(Locality::Joint));
    }

    #[test]
    fn common_bath_propagator_coefficients() {
        let gamma = 0.9;
        let t = 0.7;
        let s = preset_common_bath(gamma).unwrap();
        let p = expm(&s.k().scale_re(-t), 1e-14).unwrap();
        let amps = [c(0.3, 0.1), c(-0.2, 0.5), c(0.4, -0.3), c(0.1, 0.2)];
        let out = p.apply(&crate::linalg::Vector(amps));
        let e = (-gamma * t).exp();
        let expected = [
            amps[0] * e,
            (amps[1] * (e + 1.0) + amps[2] * (e - 1.0)) * 0.5,
            (amps[2] * (e + 1.0) + amps[1] * (e - 1.0)) * 0.5,
            amps[3],
        ];
        for k in 0..4 {
            assert!((out.0[k] - expected[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn validation_reports_bad_rate() {
        let ch = JumpChannel::new("bad", ChannelOp::QubitA(pauli::sigma_minus()), -1.0);
        let s = Scenario::from_parts(Mat4::zeros(), vec![ch.clone()], QubitPairState::basis(0), Preset::Custom);
        let report = validate_scenario(&s, None);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::InvalidRate { .. })));
        assert!(custom(Mat4::zeros(), vec![ch], QubitPairState::basis(0)).is_err());

        let orphan = JumpChannel { het_freq: Some(1.0), ..JumpChannel::new("w", ChannelOp::QubitA(pauli::sigma_minus()), 1.0) };
        let s = Scenario::from_parts(Mat4::zeros(), vec![orphan], QubitPairState::basis(0), Preset::Custom);
        assert!(!validate_scenario(&s, None).is_ok());

        // a lone heterodyne channel makes K time dependent
        let lone = JumpChannel { shift: Some(ONE), het_freq: Some(3.0), ..JumpChannel::new("w", ChannelOp::QubitA(pauli::sigma_minus()), 1.0) };
        let s = Scenario::from_parts(Mat4::zeros(), vec![lone], QubitPairState::basis(0), Preset::Custom);
        assert!(validate_scenario(&s, None).violations.iter().any(|v| matches!(v, Violation::DampingTimeDependent { .. })));

        let a = preset_photon_counting(1.0, 1.0).unwrap();
        let b = preset_photon_counting(1.0, 1.1).unwrap();
        assert!(validate_scenario(&a, Some(&b)).violations.iter().any(|v| matches!(v, Violation::GeneratorMismatch { .. })));
    }

    #[test]
    fn derived_operators_invariants() {
        let rates = ThermalRates::new(0.4, 1.0, 0.1, 0.6).unwrap();
        let scenarios = vec![
            preset_photon_counting(1.0, 2.0).unwrap(),
            preset_thermal(0.4, 1.0, 0.1, 0.6).unwrap(),
            preset_dephasing([0.6, 0.0, 0.8], [0.0, 1.0, 0.0], 0.3, 0.9).unwrap(),
            preset_rotated_thermal(rates, [&Mixing::optimal(), &Mixing::identity()]).unwrap(),
            preset_common_bath(1.0).unwrap(),
        ];
        for s in &scenarios {
            let e = herm_eig4(s.k()).unwrap();
            assert!(e.values[3] >= -PSD_TOL);
            // i(H_eff − H₀) = K is Hermitian
            let ik = (*s.heff() - *s.h0()).scale(I);
            assert!(ik.hermiticity_defect() < 1e-14);
            let local_expected = !matches!(s.preset(), Preset::CommonBath { .. });
            assert_eq!(s.all_local(), local_expected);
        }
    }

    #[test]
    fn laser_phase_rotation_keeps_generator() {
        let s = preset_dephasing([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 0.5).unwrap();
        let r = with_laser_phases(&s, &[FRAC_PI_4, 1.0]).unwrap();
        assert!(validate_scenario(&r, Some(&s)).is_ok());
    }
}
