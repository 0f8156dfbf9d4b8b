//! Master-equation baseline and mixed-state concurrence.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig4, pauli::sigma_yy, singular_values4, Mat4, I};
use crate::model::Scenario;
use crate::sim::SimParams;
use crate::state::QubitPairState;

/// Largest `dt·γ_max` accepted by the RK4 integrator.
pub const MAX_RATE_STEP: f64 = 0.05;
/// Most negative eigenvalue tolerated on the recording grid.
pub const POSITIVITY_TOL: f64 = 1e-6;
const TRACE_DRIFT_WARN: f64 = 1e-8;

/// Hermitian, unit-trace, positive semidefinite 4×4 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[Complex64; 4]; 4]", into = "[[Complex64; 4]; 4]")]
pub struct DensityMatrix(Mat4);

impl TryFrom<[[Complex64; 4]; 4]> for DensityMatrix {
    type Error = Error;
    fn try_from(rows: [[Complex64; 4]; 4]) -> Result<Self> {
        Self::new(Mat4::from_rows(rows))
    }
}

impl From<DensityMatrix> for [[Complex64; 4]; 4] {
    fn from(d: DensityMatrix) -> Self {
        d.0 .0
    }
}

impl DensityMatrix {
    pub fn new(m: Mat4) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        let defect = m.hermiticity_defect();
        if defect > 1e-9 {
            return Err(Error::NotHermitian { defect });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("density matrix trace is {tr}")));
        }
        let min_eig = herm_eig4(&m)?.values[3];
        if min_eig < -1e-8 {
            return Err(Error::PositivityViolation { time: 0.0, min_eig });
        }
        Ok(DensityMatrix(m))
    }

    pub fn from_pure(state: &QubitPairState) -> Self {
        let v = state.as_vec();
        DensityMatrix(v.outer(v))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat4 {
        self.0
    }
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// With `ρ = W W†` from the eigen-decomposition of `ρ`, the `λᵢ` are the
/// singular values of the symmetric matrix `Wᵀ (σ_y⊗σ_y) W`, which equal the
/// square roots of the eigenvalues of `ρ (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
/// Eigenvalues of `ρ` down to `−1e−8` are clipped to zero.
pub fn concurrence_mixed(rho: &DensityMatrix) -> Result<f64> {
    let eig = herm_eig4(&rho.0)?;
    let mut w = eig.vectors;
    for (k, &p) in eig.values.iter().enumerate() {
        if p < -1e-8 {
            return Err(Error::PositivityViolation { time: f64::NAN, min_eig: p });
        }
        let s = p.max(0.0).sqrt();
        for r in 0..4 {
            w.0[r][k] *= s;
        }
    }
    let tau = w.transpose() * sigma_yy() * w;
    let l = singular_values4(&tau)?;
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Lindblad right-hand side `−i[H₀, ρ] + Σ γ (LρL† − ½{L†L, ρ})` with the
/// jump operators evaluated at time `t`.
pub fn lindblad_rhs(rho: &Mat4, scenario: &Scenario, t: f64) -> Mat4 {
    let mut heff = *scenario.h0();
    let mut jumps = Mat4::zeros();
    for ch in scenario.channels() {
        let l = ch.effective(t);
        let ldl = l.adjoint() * l;
        heff = heff - ldl.scale(I * (0.5 * ch.rate));
        jumps += (l * *rho * l.adjoint()).scale_re(ch.rate);
    }
    let coherent = heff * *rho - *rho * heff.adjoint();
    coherent.scale(-I) + jumps
}

/// Density matrices and their concurrence on the recording grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub concurrences: Vec<f64>,
    /// Largest `|tr ρ − 1|` removed by renormalization after a single step.
    pub max_trace_drift: f64,
}

/// Integrates the master equation from the scenario's initial state with RK4.
pub fn evolve_rho(scenario: &Scenario, params: &SimParams) -> Result<RhoSeries> {
    evolve_rho_from(scenario, DensityMatrix::from_pure(scenario.initial()), params)
}

pub fn evolve_rho_from(scenario: &Scenario, rho0: DensityMatrix, params: &SimParams) -> Result<RhoSeries> {
    params.check()?;
    let dt = params.step();
    let stiffness = dt * scenario.max_rate();
    if stiffness > MAX_RATE_STEP {
        return Err(Error::StepTooLarge { prob: stiffness, limit: MAX_RATE_STEP });
    }
    let times = params.times();
    let substeps = params.substeps();
    let mut rho = rho0.0;
    let mut states = vec![rho0];
    let mut concurrences = vec![concurrence_mixed(&rho0)?];
    let mut max_drift: f64 = 0.0;

    for k in 1..times.len() {
        let t0 = times[k - 1];
        for j in 0..substeps {
            let t = t0 + j as f64 * dt;
            let f = |r: &Mat4, tt: f64| lindblad_rhs(r, scenario, tt);
            let k1 = f(&rho, t);
            let k2 = f(&(rho + k1.scale_re(0.5 * dt)), t + 0.5 * dt);
            let k3 = f(&(rho + k2.scale_re(0.5 * dt)), t + 0.5 * dt);
            let k4 = f(&(rho + k3.scale_re(dt)), t + dt);
            rho += (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(dt / 6.0);
            rho = (rho + rho.adjoint()).scale_re(0.5);
            let tr = rho.trace().re;
            if !tr.is_finite() || tr <= 0.0 {
                return Err(Error::NonFinite("density matrix trace"));
            }
            let drift = (tr - 1.0).abs();
            if drift > TRACE_DRIFT_WARN {
                log::warn!("trace drift {drift:e} in one step at t = {t}");
            }
            max_drift = max_drift.max(drift);
            rho = rho.scale_re(1.0 / tr);
        }
        let min_eig = herm_eig4(&rho)?.values[3];
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::PositivityViolation { time: times[k], min_eig });
        }
        let d = DensityMatrix(rho);
        concurrences.push(concurrence_mixed(&d)?);
        states.push(d);
    }
    Ok(RhoSeries { times, states, concurrences, max_trace_drift: max_drift })
}
