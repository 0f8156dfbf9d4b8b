//! Time grids and random-number streams shared by the engines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator used for every trajectory.
///
/// ChaCha8 is counter based; trajectory `k` of an ensemble seeded with
/// `master_seed` draws from stream `k` of the key derived from `master_seed`,
/// so trajectories are independent of each other and of the worker that runs them.
pub type TrajRng = ChaCha8Rng;

pub fn trajectory_rng(master_seed: u64, stream: u64) -> TrajRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Integration step, recording stride and horizon of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub t_max: f64,
    pub dt: f64,
    pub record_grid: f64,
    #[serde(default)]
    pub retain_states: bool,
}

impl SimParams {
    /// Requires `0 < dt ≤ record_grid ≤ t_max`.
    pub fn new(t_max: f64, dt: f64, record_grid: f64) -> Result<Self> {
        let p = SimParams { t_max, dt, record_grid, retain_states: false };
        p.check()?;
        Ok(p)
    }

    pub fn retaining_states(mut self) -> Self {
        self.retain_states = true;
        self
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.dt.is_finite()
            && self.record_grid.is_finite()
            && self.t_max.is_finite()
            && self.dt > 0.0
            && self.dt <= self.record_grid * (1.0 + 1e-12)
            && self.record_grid <= self.t_max * (1.0 + 1e-12);
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt <= grid <= t_max, got dt = {}, grid = {}, t_max = {}",
                self.dt, self.record_grid, self.t_max
            )));
        }
        Ok(())
    }

    /// Number of recording intervals.
    pub fn intervals(&self) -> usize {
        (self.t_max / self.record_grid + 1e-9).floor() as usize
    }

    /// Integration steps per recording interval.
    pub fn substeps(&self) -> usize {
        ((self.record_grid / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Actual step, `record_grid / substeps`, never larger than `dt`.
    pub fn step(&self) -> f64 {
        self.record_grid / self.substeps() as f64
    }

    /// Recording times `0, grid, 2·grid, …`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.intervals()).map(|k| k as f64 * self.record_grid).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn grid_bookkeeping() {
        let p = SimParams::new(3.0, 0.001, 0.1).unwrap();
        assert_eq!(p.intervals(), 30);
        assert_eq!(p.substeps(), 100);
        assert!((p.step() - 0.001).abs() < 1e-15);
        let t = p.times();
        assert_eq!(t.len(), 31);
        assert!(t.windows(2).all(|w| w[1] > w[0]));

        let odd = SimParams::new(1.0, 0.03, 0.1).unwrap();
        assert_eq!(odd.substeps(), 4);
        assert!(odd.step() <= 0.03);
    }

    #[test]
    fn grid_rejects_bad_ordering() {
        assert!(SimParams::new(1.0, 0.2, 0.1).is_err());
        assert!(SimParams::new(0.05, 0.01, 0.1).is_err());
        assert!(SimParams::new(1.0, 0.0, 0.1).is_err());
        assert!(SimParams::new(f64::NAN, 0.01, 0.1).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(trajectory_rng(9, 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(trajectory_rng(9, 3), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(trajectory_rng(9, 4), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
