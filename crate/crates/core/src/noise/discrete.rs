use rand::Rng;
use rand_distr::StandardNormal;

use super::{regenerative, ProcessSpec, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{ReplicaKey, StreamRole};
use crate::tensor::cholesky_psd;

/// Draws `ξ(0..n)` from the stationary law of a discrete-time model.
///
/// Output is a pure function of `(spec, n, key)`, and every stream is consumed
/// front to back, so a longer run extends a shorter one with the same key.
pub fn generate_discrete(
    spec: &ProcessSpec,
    n: usize,
    key: impl Into<ReplicaKey>,
) -> Result<Trajectory> {
    let key = key.into();
    if n == 0 {
        return Err(Error::InvalidArgument("trajectory length must be at least 1".into()));
    }
    spec.validate()?;
    let d = spec.dimension();
    let traj = match spec {
        ProcessSpec::IidGaussian { covariance } => {
            let chol = cholesky_psd(covariance)?;
            let mut rng = key.stream(StreamRole::Innovations);
            let mut z = vec![0.0; d];
            let mut data = Vec::with_capacity(n * d);
            for _ in 0..n {
                z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                for i in 0..d {
                    data.push((0..=i).map(|j| chol[(i, j)] * z[j]).sum());
                }
            }
            Trajectory::from_flat(d, data)
        }
        ProcessSpec::Ma1 { theta } => {
            let mut rng = key.stream(StreamRole::Innovations);
            let mut prev: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut cur = vec![0.0; d];
            let mut data = Vec::with_capacity(n * d);
            for _ in 0..n {
                cur.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                for i in 0..d {
                    let lagged: f64 = (0..d).map(|j| theta[(i, j)] * prev[j]).sum();
                    data.push(cur[i] + lagged);
                }
                std::mem::swap(&mut prev, &mut cur);
            }
            Trajectory::from_flat(d, data)
        }
        ProcessSpec::DoublingMap { frequencies } => {
            let words = doubling_orbit(n, key);
            let mut data = Vec::with_capacity(n * d);
            for w in words {
                for &f in frequencies {
                    // frac(f x) is exact in 64-bit fixed point: f·W mod 2⁶⁴.
                    let phase = (f.wrapping_mul(w) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    data.push((std::f64::consts::TAU * phase).cos());
                }
            }
            Trajectory::from_flat(d, data)
        }
        ProcessSpec::Regenerative { .. } => {
            return regenerative::stationarize_regenerative(spec, key, n);
        }
        ProcessSpec::Ou { .. } | ProcessSpec::Suspension { .. } => {
            return Err(Error::UnsupportedKind {
                kind: spec.kind_name(),
                operation: "generate_discrete",
            });
        }
    };
    Ok(traj.with_meta(spec, key))
}

/// Orbit `x_0, …, x_{n-1}` of the doubling map in 64-bit fixed point.
///
/// A fair bit stream `b_1 b_2 …` is drawn and `x_k` is the binary fraction
/// `0.b_{k+1} b_{k+2} … b_{k+64}`, so `x_{k+1}` agrees with `frac(2 x_k)` in
/// every retained bit and the orbit never collapses the way iterating
/// `2x mod 1` in floating point does.
pub fn doubling_orbit(n: usize, key: impl Into<ReplicaKey>) -> Vec<u64> {
    let mut rng = key.into().stream(StreamRole::Bits);
    let mut word: u64 = rng.random();
    let mut reservoir: u64 = 0;
    let mut left = 0u32;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            if left == 0 {
                reservoir = rng.random();
                left = 64;
            }
            let bit = reservoir >> 63;
            reservoir <<= 1;
            left -= 1;
            word = (word << 1) | bit;
        }
        out.push(word);
    }
    out
}
