//! Scenario files.
//!
//! A scenario file is TOML with the top-level keys `preset`, `params`,
//! `initial_state`, `custom_channels` and an optional `[run]` table holding
//! default run settings. Unknown keys are rejected. Complex numbers are
//! written as `[re, im]` pairs and matrices as arrays of rows.
//!
//! ```toml
//! preset = "thermal"
//! initial_state = [[0.7071067811865476, 0.0], [0, 0], [0, 0], [0.0, -0.7071067811865476]]
//!
//! [params]
//! gamma_plus = [1.0, 1.0]
//! gamma_minus = [2.0, 2.0]
//!
//! [run]
//! t_max = 2.0
//! record_grid = 0.02
//! n_traj = 1500
//! ```
//!
//! | preset            | required params                                   |
//! |-------------------|---------------------------------------------------|
//! | `photon_counting` | `gamma`, or `gamma_a` and `gamma_b`               |
//! | `thermal`         | `gamma_plus`, `gamma_minus` (each `[A, B]`)       |
//! | `rotated_thermal` | as `thermal`, plus `mixing` or `mixing_a`/`mixing_b` |
//! | `dephasing`       | `v_a`, `v_b`, and `gamma` or `gamma_a`/`gamma_b`  |
//! | `common_bath`     | `gamma`                                           |
//! | `custom`          | `custom_channels`, optional `hamiltonian`         |
//!
//! Optional params for every preset except `custom`: `laser_phases` (one
//! per channel), then either `homodyne_shift` (one `[re, im]` per channel) or
//! `heterodyne_amplitude` with `heterodyne_frequency`, and local Hamiltonians
//! `hamiltonian_a`/`hamiltonian_b`.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Deserialize;
use toml::Spanned;

use crate::ensemble::Unraveling;
use crate::error::{Error, Result};
use crate::linalg::{c, Mat2, Mat4};
use crate::model::{
    custom, preset_common_bath, preset_dephasing, preset_photon_counting, preset_rotated_thermal, preset_thermal,
    with_heterodyne, with_homodyne_shift, with_laser_phases, ChannelOp, JumpChannel, Mixing, Scenario, ThermalRates,
};
use crate::state::QubitPairState;

/// Norm mismatch of `initial_state` above which loading logs a warning.
pub const INITIAL_NORM_WARN: f64 = 1e-6;

type Complex = [f64; 2];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Spanned<String>,
    params: Option<Spanned<RawParams>>,
    initial_state: Option<Spanned<Vec<Complex>>>,
    custom_channels: Option<Vec<Spanned<RawChannel>>>,
    run: Option<Spanned<RawRun>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    gamma: Option<f64>,
    gamma_a: Option<f64>,
    gamma_b: Option<f64>,
    gamma_plus: Option<[f64; 2]>,
    gamma_minus: Option<[f64; 2]>,
    v_a: Option<[f64; 3]>,
    v_b: Option<[f64; 3]>,
    mixing: Option<String>,
    mixing_a: Option<Vec<[Complex; 2]>>,
    mixing_b: Option<Vec<[Complex; 2]>>,
    mixing_rates_a: Option<Vec<f64>>,
    mixing_rates_b: Option<Vec<f64>>,
    laser_phases: Option<Vec<f64>>,
    homodyne_shift: Option<Vec<Complex>>,
    heterodyne_amplitude: Option<Vec<f64>>,
    heterodyne_frequency: Option<Vec<f64>>,
    hamiltonian_a: Option<Vec<Vec<Complex>>>,
    hamiltonian_b: Option<Vec<Vec<Complex>>>,
    hamiltonian: Option<Vec<Vec<Complex>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    id: String,
    /// `"A"`, `"B"` or `"AB"`.
    on: String,
    rate: f64,
    matrix: Vec<Vec<Complex>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    t_max: Option<f64>,
    dt: Option<f64>,
    record_grid: Option<f64>,
    n_traj: Option<usize>,
    seed: Option<u64>,
    unraveling: Option<String>,
}

/// How the dynamics is evaluated: a trajectory ensemble or the master equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Trajectories(Unraveling),
    Master,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Trajectories(u) => u.fmt(f),
            Method::Master => f.write_str("master"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "master" {
            return Ok(Method::Master);
        }
        s.parse::<Unraveling>().map(Method::Trajectories).map_err(|_| {
            Error::InvalidArgument(format!("unknown unraveling `{s}`, expected qj, qsd-homodyne, qsd-heterodyne or master"))
        })
    }
}

/// Run defaults from the `[run]` table; command-line flags take precedence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSettings {
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub record_grid: Option<f64>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub method: Option<Method>,
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub run: RunSettings,
}

struct Source<'a> {
    text: &'a str,
    origin: String,
}

impl Source<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Range<usize>, msg: impl fmt::Display) -> Error {
        let line = self.line_of(span.start);
        let snippet = self.text.lines().nth(line - 1).unwrap_or("").trim_end();
        Error::Config(format!("{}:{line}: {msg}\n  {line} | {snippet}", self.origin))
    }
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_with_origin(&text, path.display().to_string())
}

/// Parses scenario text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    parse_with_origin(text, "<scenario>".into())
}

fn parse_with_origin(text: &str, origin: String) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    let src = Source { text, origin };
    let run = match &raw.run {
        Some(r) => run_settings(&src, r)?,
        None => RunSettings::default(),
    };
    let scenario = build(&src, &raw)?;
    Ok(ScenarioConfig { scenario, run })
}

fn run_settings(src: &Source, run: &Spanned<RawRun>) -> Result<RunSettings> {
    let r = run.get_ref();
    let method = match &r.unraveling {
        Some(u) => Some(u.parse::<Method>().map_err(|e| src.err(run.span(), e))?),
        None => None,
    };
    for (name, v) in [("t_max", r.t_max), ("dt", r.dt), ("record_grid", r.record_grid)] {
        if let Some(x) = v {
            if !(x.is_finite() && x > 0.0) {
                return Err(src.err(run.span(), format!("run.{name} must be positive, got {x}")));
            }
        }
    }
    if r.n_traj == Some(0) {
        return Err(src.err(run.span(), "run.n_traj must be at least 1"));
    }
    Ok(RunSettings { t_max: r.t_max, dt: r.dt, record_grid: r.record_grid, n_traj: r.n_traj, seed: r.seed, method })
}

fn cx(z: Complex) -> Complex64 {
    c(z[0], z[1])
}

fn mat2(rows: &[Vec<Complex>]) -> Option<Mat2> {
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return None;
    }
    let mut m = Mat2::zeros();
    for (i, r) in rows.iter().enumerate() {
        for (j, z) in r.iter().enumerate() {
            m.0[i][j] = cx(*z);
        }
    }
    Some(m)
}

fn mat4(rows: &[Vec<Complex>]) -> Option<Mat4> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return None;
    }
    let mut m = Mat4::zeros();
    for (i, r) in rows.iter().enumerate() {
        for (j, z) in r.iter().enumerate() {
            m.0[i][j] = cx(*z);
        }
    }
    Some(m)
}

fn pair_rates(src: &Source, span: &Range<usize>, p: &RawParams) -> Result<(f64, f64)> {
    match (p.gamma, p.gamma_a, p.gamma_b) {
        (Some(g), None, None) => Ok((g, g)),
        (None, Some(a), Some(b)) => Ok((a, b)),
        _ => Err(src.err(span.clone(), "give either `gamma` or both `gamma_a` and `gamma_b`")),
    }
}

fn mixing(src: &Source, span: &Range<usize>, rows: &Option<Vec<[Complex; 2]>>, rates: &Option<Vec<f64>>, shared: &Option<Mixing>) -> Result<Mixing> {
    let mut m = match (rows, shared) {
        (Some(rows), None) => Mixing { rows: rows.iter().map(|r| [cx(r[0]), cx(r[1])]).collect(), rates: None },
        (None, Some(m)) => m.clone(),
        (Some(_), Some(_)) => return Err(src.err(span.clone(), "`mixing` conflicts with `mixing_a`/`mixing_b`")),
        (None, None) => return Err(src.err(span.clone(), "rotated_thermal needs `mixing` or both `mixing_a` and `mixing_b`")),
    };
    m.rates = rates.clone();
    Ok(m)
}

fn build(src: &Source, raw: &RawConfig) -> Result<Scenario> {
    let preset = raw.preset.get_ref().as_str();
    let pspan = raw.preset.span();
    let empty = RawParams::default();
    let (p, span) = match &raw.params {
        Some(sp) => (sp.get_ref(), sp.span()),
        None => (&empty, pspan.clone()),
    };
    let wrap = |e: Error| src.err(span.clone(), e);
    if raw.custom_channels.is_some() && preset != "custom" {
        return Err(src.err(pspan, format!("`custom_channels` requires preset = \"custom\", found \"{preset}\"")));
    }
    if preset != "custom" && p.hamiltonian.is_some() {
        return Err(src.err(span, "`hamiltonian` is only read for preset = \"custom\"; use `hamiltonian_a`/`hamiltonian_b`"));
    }

    let mut s = match preset {
        "photon_counting" => {
            let (a, b) = pair_rates(src, &span, p)?;
            preset_photon_counting(a, b).map_err(wrap)?
        }
        "thermal" | "rotated_thermal" => {
            let (Some(plus), Some(minus)) = (p.gamma_plus, p.gamma_minus) else {
                return Err(src.err(span, format!("{preset} needs `gamma_plus` and `gamma_minus`")));
            };
            if preset == "thermal" {
                preset_thermal(plus[0], minus[0], plus[1], minus[1]).map_err(wrap)?
            } else {
                let rates = ThermalRates::new(plus[0], minus[0], plus[1], minus[1]).map_err(wrap)?;
                let shared = match p.mixing.as_deref() {
                    None => None,
                    Some("identity") => Some(Mixing::identity()),
                    Some("optimal") => Some(Mixing::optimal()),
                    Some(other) => return Err(src.err(span, format!("unknown mixing `{other}`, expected identity or optimal"))),
                };
                let ma = mixing(src, &span, &p.mixing_a, &p.mixing_rates_a, &shared)?;
                let mb = mixing(src, &span, &p.mixing_b, &p.mixing_rates_b, &shared)?;
                preset_rotated_thermal(rates, [&ma, &mb]).map_err(wrap)?
            }
        }
        "dephasing" => {
            let (Some(va), Some(vb)) = (p.v_a, p.v_b) else {
                return Err(src.err(span, "dephasing needs `v_a` and `v_b`"));
            };
            let (a, b) = pair_rates(src, &span, p)?;
            preset_dephasing(va, vb, a, b).map_err(wrap)?
        }
        "common_bath" => {
            let Some(g) = p.gamma else {
                return Err(src.err(span, "common_bath needs `gamma`"));
            };
            preset_common_bath(g).map_err(wrap)?
        }
        "custom" => return build_custom(src, raw, p, span),
        other => {
            return Err(src.err(
                pspan,
                format!("unknown preset `{other}`, expected photon_counting, thermal, rotated_thermal, dephasing, common_bath or custom"),
            ))
        }
    };

    if let Some(phases) = &p.laser_phases {
        s = with_laser_phases(&s, phases).map_err(wrap)?;
    }
    match (&p.homodyne_shift, &p.heterodyne_amplitude, &p.heterodyne_frequency) {
        (None, None, None) => {}
        (Some(shift), None, None) => {
            let shifts: Vec<Complex64> = shift.iter().map(|z| cx(*z)).collect();
            s = with_homodyne_shift(&s, &shifts).map_err(wrap)?;
        }
        (None, Some(amp), Some(freq)) => s = with_heterodyne(&s, amp, freq).map_err(wrap)?,
        _ => {
            return Err(src.err(
                span,
                "use either `homodyne_shift` or both `heterodyne_amplitude` and `heterodyne_frequency`",
            ))
        }
    }
    match (&p.hamiltonian_a, &p.hamiltonian_b) {
        (None, None) => {}
        (ha, hb) => {
            let parse = |h: &Option<Vec<Vec<Complex>>>, q: &str| -> Result<Mat2> {
                match h {
                    None => Ok(Mat2::zeros()),
                    Some(rows) => mat2(rows).ok_or_else(|| src.err(span.clone(), format!("`hamiltonian_{q}` must be 2×2"))),
                }
            };
            s = s.with_local_hamiltonian(&parse(ha, "a")?, &parse(hb, "b")?).map_err(wrap)?;
        }
    }
    apply_initial(src, raw, s)
}

fn build_custom(src: &Source, raw: &RawConfig, p: &RawParams, span: Range<usize>) -> Result<Scenario> {
    let unused = [
        ("gamma", p.gamma.is_some()),
        ("gamma_a", p.gamma_a.is_some()),
        ("gamma_b", p.gamma_b.is_some()),
        ("gamma_plus", p.gamma_plus.is_some()),
        ("gamma_minus", p.gamma_minus.is_some()),
        ("v_a", p.v_a.is_some()),
        ("v_b", p.v_b.is_some()),
        ("mixing", p.mixing.is_some() || p.mixing_a.is_some() || p.mixing_b.is_some()),
        ("laser_phases", p.laser_phases.is_some()),
        ("homodyne_shift", p.homodyne_shift.is_some()),
        ("heterodyne_amplitude", p.heterodyne_amplitude.is_some() || p.heterodyne_frequency.is_some()),
        ("hamiltonian_a", p.hamiltonian_a.is_some() || p.hamiltonian_b.is_some()),
    ];
    if let Some((name, _)) = unused.iter().find(|(_, set)| *set) {
        return Err(src.err(span, format!("`{name}` does not apply to preset = \"custom\"")));
    }
    let Some(list) = &raw.custom_channels else {
        return Err(src.err(raw.preset.span(), "preset = \"custom\" needs at least one [[custom_channels]] entry"));
    };
    let mut channels = Vec::with_capacity(list.len());
    for entry in list {
        let ch = entry.get_ref();
        let here = |msg: String| src.err(entry.span(), msg);
        let op = match ch.on.as_str() {
            "A" | "B" => {
                let m = mat2(&ch.matrix).ok_or_else(|| here(format!("channel `{}` acts on one qubit and needs a 2×2 matrix", ch.id)))?;
                if ch.on == "A" {
                    ChannelOp::QubitA(m)
                } else {
                    ChannelOp::QubitB(m)
                }
            }
            "AB" => ChannelOp::Joint(mat4(&ch.matrix).ok_or_else(|| here(format!("joint channel `{}` needs a 4×4 matrix", ch.id)))?),
            other => return Err(here(format!("channel `{}`: `on` must be \"A\", \"B\" or \"AB\", got \"{other}\"", ch.id))),
        };
        channels.push(JumpChannel::new(ch.id.clone(), op, ch.rate));
    }
    let h0 = match &p.hamiltonian {
        None => Mat4::zeros(),
        Some(rows) => mat4(rows).ok_or_else(|| src.err(span.clone(), "`hamiltonian` must be 4×4"))?,
    };
    let s = custom(h0, channels, QubitPairState::bell_phi(0.0)).map_err(|e| src.err(span.clone(), e))?;
    apply_initial(src, raw, s)
}

fn apply_initial(src: &Source, raw: &RawConfig, s: Scenario) -> Result<Scenario> {
    let Some(init) = &raw.initial_state else {
        return Ok(s);
    };
    let amps = init.get_ref();
    if amps.len() != 4 {
        return Err(src.err(init.span(), format!("initial_state needs 4 amplitudes, got {}", amps.len())));
    }
    let amps = [cx(amps[0]), cx(amps[1]), cx(amps[2]), cx(amps[3])];
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(src.err(init.span(), format!("initial_state has norm {norm}")));
    }
    if (norm - 1.0).abs() > INITIAL_NORM_WARN {
        log::warn!("{}:{}: initial_state has norm {norm}; normalizing", src.origin, src.line_of(init.span().start));
    }
    let state = QubitPairState::normalized(amps).map_err(|e| src.err(init.span(), e))?;
    Ok(s.with_initial(state))
}
