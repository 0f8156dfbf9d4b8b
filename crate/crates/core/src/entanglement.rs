//! Pure-state concurrence, pre-concurrence and entanglement of formation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Vec4;
use crate::state::QubitPairState;

/// Norm deviation tolerated on inputs to the concurrence functions.
pub const INPUT_NORM_TOL: f64 = 1e-6;

/// `⟨ψ|σ_y⊗σ_y T|ψ⟩`, the complex quantity whose modulus is the concurrence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preconcurrence {
    pub value: Complex64,
}

impl Preconcurrence {
    pub fn concurrence(&self) -> f64 {
        self.value.norm()
    }
}

/// `2(c*↑↓ c*↓↑ − c*↑↑ c*↓↓)` for arbitrary (not necessarily normalized) amplitudes.
pub fn preconcurrence_unnormalized(v: &Vec4) -> Complex64 {
    let [uu, ud, du, dd] = v.0;
    (ud.conj() * du.conj() - uu.conj() * dd.conj()) * 2.0
}

pub fn preconcurrence(state: &QubitPairState) -> Result<Preconcurrence> {
    check_norm(state.as_vec())?;
    Ok(Preconcurrence { value: preconcurrence_unnormalized(state.as_vec()) })
}

pub fn concurrence_pure(state: &QubitPairState) -> Result<f64> {
    Ok(preconcurrence(state)?.concurrence())
}

/// Concurrence of an arbitrary vector after normalization; `0` for the null vector.
pub fn concurrence_of_vec(v: &Vec4) -> f64 {
    let n2 = v.norm_sqr();
    if n2 == 0.0 {
        return 0.0;
    }
    preconcurrence_unnormalized(v).norm() / n2
}

fn check_norm(v: &Vec4) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// Binary entropy in nats.
fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// Entanglement of formation `f(C) = h((1 + √(1 − C²))/2)` in nats.
pub fn eof_from_concurrence(concurrence: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&concurrence) {
        return Err(Error::InvalidArgument(format!("concurrence {concurrence} outside [0, 1]")));
    }
    let root = (1.0 - concurrence * concurrence).max(0.0).sqrt();
    Ok(binary_entropy(0.5 * (1.0 + root)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli::{sigma_yy, sigma_x, sigma_y, sigma_z};
    use crate::linalg::{c, det2, kron2, lift_a, lift_b, Mat2, Mat4, Vector, ZERO};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Operator form `⟨ψ|O σ_y⊗σ_y T|ψ⟩` evaluated by brute force.
    fn antiunitary_expectation(op: &Mat4, psi: &Vec4) -> Complex64 {
        let conj = psi.conj();
        let image = (*op * sigma_yy()).apply(&conj);
        psi.inner(&image)
    }

    fn random_state(rng: &mut impl Rng) -> QubitPairState {
        let amps = [(); 4].map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        QubitPairState::normalized(amps).unwrap()
    }

    fn random_mat2(rng: &mut impl Rng) -> Mat2 {
        let mut m = Mat2::zeros();
        for r in 0..2 {
            for col in 0..2 {
                m.0[r][col] = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn preconcurrence_examples() {
        let bell = QubitPairState::bell_phi(0.0);
        assert!((preconcurrence(&bell).unwrap().value - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(preconcurrence(&QubitPairState::basis(1)).unwrap().value, ZERO);
        let s5 = 5f64.sqrt();
        let split = QubitPairState::new([ZERO, c(2.0 / s5, 0.0), c(1.0 / s5, 0.0), ZERO]).unwrap();
        assert!((preconcurrence(&split).unwrap().value - c(0.8, 0.0)).norm() < 1e-15);
        assert!((concurrence_pure(&split).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bell_and_product_concurrence() {
        for s in [
            QubitPairState::bell_phi(0.0),
            QubitPairState::bell_phi(1.3),
            QubitPairState::bell_psi(true),
            QubitPairState::bell_psi(false),
        ] {
            assert!((concurrence_pure(&s).unwrap() - 1.0).abs() < 1e-15);
        }
        let a = Vector([c(0.6, 0.0), c(0.0, 0.8)]);
        let b = Vector([c(0.28, 0.96), c(0.0, 0.0)]);
        let p = QubitPairState::product(&a, &b).unwrap();
        assert!(concurrence_pure(&p).unwrap() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        let v = Vector([c(2.0, 0.0), ZERO, ZERO, ZERO]);
        assert!(check_norm(&v).is_err());
    }

    #[test]
    fn eof_examples() {
        assert_eq!(eof_from_concurrence(0.0).unwrap(), 0.0);
        assert!((eof_from_concurrence(1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        // h((1 + √0.75)/2) evaluated independently
        let p: f64 = (1.0 + 0.75f64.sqrt()) / 2.0;
        let expected = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((expected - 0.245_775_4).abs() < 1e-6);
        assert!((eof_from_concurrence(0.5).unwrap() - expected).abs() < 1e-15);
        assert!(eof_from_concurrence(1.5).is_err());
        assert!(eof_from_concurrence(-0.1).is_err());
    }

    #[test]
    fn eof_midpoint_convex() {
        let grid: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
        for w in grid.windows(3) {
            let f = |x: f64| eof_from_concurrence(x).unwrap();
            assert!(f(w[1]) <= 0.5 * (f(w[0]) + f(w[2])) + 1e-15);
        }
    }

    #[test]
    fn amplitude_formula_matches_operator_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            let direct = antiunitary_expectation(&Mat4::identity(), s.as_vec());
            assert!((direct - preconcurrence(&s).unwrap().value).norm() < 1e-12);
        }
    }

    #[test]
    fn local_operator_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in 0..200 {
            let s = random_state(&mut rng);
            let o = random_mat2(&mut rng);
            let lifted = if k % 2 == 0 { lift_a(&o) } else { lift_b(&o) };
            let pre = preconcurrence(&s).unwrap().value;
            let lhs = antiunitary_expectation(&lifted, s.as_vec());
            assert!((lhs - pre * o.trace() * 0.5).norm() < 1e-10);
            // ⟨σ_y⊗σ_y T O†⟩ gives the same value
            let conj_image = sigma_yy().apply(&lifted.adjoint().apply(s.as_vec()).conj());
            assert!((s.as_vec().inner(&conj_image) - lhs).norm() < 1e-10);
        }
    }

    #[test]
    fn local_jump_determinant_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 0..200 {
            let s = random_state(&mut rng);
            let o = random_mat2(&mut rng);
            let lifted = if k % 2 == 0 { lift_a(&o) } else { lift_b(&o) };
            let image = lifted.apply(s.as_vec());
            // ⟨ψ|O† σyσy T O|ψ⟩ = ⟨Oψ|σyσy T|Oψ⟩
            let lhs = preconcurrence_unnormalized(&image);
            let pre = preconcurrence(&s).unwrap().value;
            assert!((lhs - pre * det2(&o.adjoint())).norm() < 1e-10);
            // concurrence update after a jump
            let n2 = image.norm_sqr();
            if n2 > 1e-6 {
                let after = concurrence_of_vec(&image);
                let before = pre.norm();
                assert!((after - before * det2(&o).norm() / n2).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn correlation_bounded_by_concurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let random_observable = |rng: &mut ChaCha8Rng| {
            let v: [f64; 4] = [(); 4].map(|_| rng.random_range(-1.0..1.0));
            let h = Mat2::identity().scale_re(v[0]) + sigma_x().scale_re(v[1]) + sigma_y().scale_re(v[2]) + sigma_z().scale_re(v[3]);
            // operator norm |a| + ‖b‖ for a·1 + b·σ
            let norm = v[0].abs() + (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
            h.scale_re(1.0 / norm.max(1.0))
        };
        for _ in 0..500 {
            let s = random_state(&mut rng);
            let ja = random_observable(&mut rng);
            let jb = random_observable(&mut rng);
            let psi = s.as_vec();
            let joint = psi.inner(&kron2(&ja, &jb).apply(psi));
            let ea = psi.inner(&lift_a(&ja).apply(psi));
            let eb = psi.inner(&lift_b(&jb).apply(psi));
            assert!((joint - ea * eb).norm() <= concurrence_pure(&s).unwrap() + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn concurrence_in_unit_interval(re in proptest::array::uniform4(-1.0f64..1.0), im in proptest::array::uniform4(-1.0f64..1.0)) {
            let amps = [0, 1, 2, 3].map(|k| c(re[k], im[k]));
            prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-6);
            let s = QubitPairState::normalized(amps).unwrap();
            let conc = concurrence_pure(&s).unwrap();
            prop_assert!((0.0..=1.0 + 1e-9).contains(&conc));
            prop_assert!((conc - concurrence_of_vec(&Vector(amps))).abs() < 1e-12);
        }
    }
}
