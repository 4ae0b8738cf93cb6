//! Stationary Ornstein-Uhlenbeck paths and the sup-ratio event.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::stats::{frequency, Estimate};

/// Paths simulated per random stream; fixes the work split independently of threads.
const CHUNK: usize = 1000;

/// A unit-variance stationary O-U path with `Corr(U(s), U(t)) = exp(-|s - t|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Exact discretisation on `0, dt, ..., steps * dt`: a stationary start and
/// the AR(1) transition `U' = e^{-dt} U + sqrt(1 - e^{-2dt}) Z`.
pub fn simulate_ou_path(steps: usize, dt: f64, rng: &mut StreamRng) -> OuPath {
    let rho = (-dt).exp();
    let innov = (1.0 - rho * rho).sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut u: f64 = StandardNormal.sample(rng);
    values.push(u);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(rng);
        u = rho * u + innov * z;
        values.push(u);
    }
    OuPath { times: (0..=steps).map(|k| k as f64 * dt).collect(), values }
}

fn check(a: f64, b: f64, dt: f64) -> Result<()> {
    if !(a >= 0.0 && a < b) {
        return Err(Error::InvalidArgument(format!("need 0 <= A < B, got A = {a}, B = {b}")));
    }
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(Error::InvalidArgument(format!("dt must lie in (0, 0.01], got {dt}")));
    }
    Ok(())
}

/// Per-path indicator of `sup_{[0,B]} |U| > sup_{[0,A]} |U|`. Paths are
/// simulated in fixed chunks, chunk `c` on `stream.substream(c)`.
pub fn ou_sup_events(a: f64, b: f64, paths: usize, dt: f64, stream: &RngStream) -> Result<Vec<bool>> {
    check(a, b, dt)?;
    let steps_a = (a / dt).round() as usize;
    let steps_b = (b / dt).round() as usize;
    let chunks = paths.div_ceil(CHUNK);
    let events: Vec<Vec<bool>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c as u64).rng();
            let count = CHUNK.min(paths - c * CHUNK);
            (0..count)
                .map(|_| {
                    let path = simulate_ou_path(steps_b, dt, &mut rng);
                    let sup = |k: usize| path.values[..=k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    sup(steps_b) > sup(steps_a)
                })
                .collect()
        })
        .collect();
    Ok(events.into_iter().flatten().collect())
}

/// Monte Carlo probability of the sup-ratio event; its limit is `(B - A) / B`.
pub fn simulate_ou_sup_ratio(a: f64, b: f64, paths: usize, dt: f64, stream: &RngStream) -> Result<Estimate> {
    Ok(frequency(ou_sup_events(a, b, paths, dt, stream)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mc_se, variance};

    #[test]
    fn rejects_bad_intervals() {
        let s = RngStream::new(1, 0);
        assert!(simulate_ou_sup_ratio(2.0, 1.0, 10, 0.01, &s).is_err());
        assert!(simulate_ou_sup_ratio(0.0, 1.0, 10, 0.1, &s).is_err());
    }

    #[test]
    fn zero_a_is_nearly_sure() {
        // certain in continuous time; the grid misses a few early excursions
        let est = simulate_ou_sup_ratio(0.0, 1.0, 500, 0.01, &RngStream::new(2, 0)).unwrap();
        assert!(est.value > 0.9, "{}", est.value);
    }

    #[test]
    fn stationary_unit_variance() {
        let mut rng = RngStream::new(3, 0).rng();
        let ends: Vec<f64> = (0..4000).map(|_| *simulate_ou_path(100, 0.01, &mut rng).values.last().unwrap()).collect();
        let sq: Vec<f64> = ends.iter().map(|v| v * v).collect();
        let v = variance(&ends);
        assert!((v - 1.0).abs() < 3.0 * mc_se(&sq) + 1e-3, "variance {v}");
    }
}
