use rand::Rng;
use rand_distr::StandardNormal;

use super::{discrete::generate_discrete, CellProfile, ProcessSpec, Roof, SampledPath};
use crate::error::{Error, Result};
use crate::rng::{ReplicaKey, StreamRole};
use crate::tensor::{cholesky_psd, expm, lyapunov_solve, sym, Tensor2};

/// Relative tolerance for "the grid step divides the horizon".
pub(crate) const GRID_TOL: f64 = 1e-9;

/// Number of grid cells `horizon / h`, if it is an integer.
pub fn grid_cells(horizon: f64, h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("grid step {h} must be positive")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be non-negative")));
    }
    let cells = (horizon / h).round();
    if (cells * h - horizon).abs() > GRID_TOL * horizon.max(h) {
        return Err(Error::GridMismatch(format!(
            "step {h} does not divide horizon {horizon}"
        )));
    }
    Ok(cells as usize)
}

/// One-step transition of the augmented state `(Ξ, ∫Ξ)` of an OU process
/// over a grid step `h`: `z' = Φ z + L η` with `η ~ N(0, I_{2d})`.
#[derive(Clone, Debug)]
pub struct OuTransition {
    pub step: f64,
    /// `exp(A h)` for `A = [[-M, 0], [I, 0]]`.
    pub phi: Tensor2,
    /// `∫₀ʰ exp(A s) G Gᵀ exp(Aᵀ s) ds` with `G = [I; 0]`.
    pub cov: Tensor2,
    pub chol: Tensor2,
    /// Stationary covariance of `Ξ`.
    pub stationary: Tensor2,
    stationary_chol: Tensor2,
}

/// Exact transition of `(Ξ(t), ∫₀ᵗ Ξ)` via Van Loan's block exponential.
pub fn ou_transition(drift: &Tensor2, h: f64) -> Result<OuTransition> {
    let d = drift.dim();
    let n = 2 * d;
    let stationary = lyapunov_solve(drift, &Tensor2::identity(d))?;
    let stationary_chol = cholesky_psd(&sym(&stationary))?;
    let mut a = Tensor2::zeros(n);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = -drift[(i, j)];
        }
        a[(d + i, i)] = 1.0;
    }
    // C = [[-A, GGᵀ], [0, Aᵀ]] h; exp(C) = [[·, F12], [0, F22]],
    // Φ = F22ᵀ and Q = F22ᵀ F12.
    let mut c = Tensor2::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = -a[(i, j)] * h;
            c[(n + i, n + j)] = a[(j, i)] * h;
        }
    }
    for i in 0..d {
        c[(i, n + i)] = h;
    }
    let e = expm(&c)?;
    let mut f12 = Tensor2::zeros(n);
    let mut f22t = Tensor2::zeros(n);
    for i in 0..n {
        for j in 0..n {
            f12[(i, j)] = e[(i, n + j)];
            f22t[(j, i)] = e[(n + i, n + j)];
        }
    }
    let cov = sym(&f22t.matmul(&f12));
    let chol = cholesky_psd(&cov)?;
    Ok(OuTransition {
        step: h,
        phi: f22t,
        cov,
        chol,
        stationary,
        stationary_chol,
    })
}

/// Samples a continuous-time model on the grid `0, h, …, horizon`.
///
/// * `ou`: stationary start `Ξ(0) ~ N(0, Σ_OU)` and exact Gaussian transitions
///   of `(Ξ, ∫Ξ)`, so `integrated` carries no discretization error.
/// * `suspension`: the flow over the base sequence under the roof, started
///   from a size-biased cell at a uniform grid phase. Roof heights must be
///   multiples of `h`. `integrated` is absent; `cell_starts` lists the grid
///   indices where cells begin.
pub fn generate_continuous(
    spec: &ProcessSpec,
    horizon: f64,
    h: f64,
    key: impl Into<ReplicaKey>,
) -> Result<SampledPath> {
    let key = key.into();
    let cells = grid_cells(horizon, h)?;
    spec.validate()?;
    match spec {
        ProcessSpec::Ou { drift } => {
            let tr = ou_transition(drift, h)?;
            sample_ou(&tr, cells, key)
        }
        ProcessSpec::Suspension {
            base,
            roof,
            profile,
        } => sample_suspension(base, roof, *profile, cells, h, key),
        _ => Err(Error::UnsupportedKind {
            kind: spec.kind_name(),
            operation: "generate_continuous",
        }),
    }
}

pub(crate) fn sample_ou(tr: &OuTransition, cells: usize, key: ReplicaKey) -> Result<SampledPath> {
    let d = tr.stationary.dim();
    let n = 2 * d;
    let points = cells + 1;
    let mut values = Vec::with_capacity(points * d);
    let mut integrated = Vec::with_capacity(points * d);

    let mut init = key.stream(StreamRole::InitialState);
    let z0: Vec<f64> = (0..d).map(|_| init.sample(StandardNormal)).collect();
    let mut state = vec![0.0; n];
    state[..d].copy_from_slice(&tr.stationary_chol.matvec(&z0));
    values.extend_from_slice(&state[..d]);
    integrated.extend_from_slice(&state[d..]);

    let mut rng = key.stream(StreamRole::Innovations);
    let mut eta = vec![0.0; n];
    let mut next = vec![0.0; n];
    let phi = tr.phi.as_slice();
    let chol = tr.chol.as_slice();
    for _ in 0..cells {
        eta.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        for i in 0..n {
            let row = i * n;
            let mut acc = 0.0;
            for j in 0..n {
                acc += phi[row + j] * state[j];
            }
            for j in 0..=i {
                acc += chol[row + j] * eta[j];
            }
            next[i] = acc;
        }
        std::mem::swap(&mut state, &mut next);
        values.extend_from_slice(&state[..d]);
        integrated.extend_from_slice(&state[d..]);
    }
    SampledPath::new(tr.step, d, values, Some(integrated))
}

fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn sample_suspension(
    base: &ProcessSpec,
    roof: &Roof,
    profile: CellProfile,
    cells: usize,
    h: f64,
    key: ReplicaKey,
) -> Result<SampledPath> {
    let d = base.dimension();
    let steps_per_height = roof
        .heights
        .iter()
        .map(|&tau| grid_cells(tau, h))
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::GridMismatch(format!("roof heights must be multiples of h = {h}")))?;
    if steps_per_height.contains(&0) {
        return Err(Error::GridMismatch(format!("roof height below grid step {h}")));
    }
    let min_steps = *steps_per_height.iter().min().expect("non-empty roof");
    // Enough base cells to cover the horizon from any starting phase.
    let base_len = cells / min_steps + 2;
    let base_traj = generate_discrete(base, base_len, key)?;

    let mut roof_rng = key.stream(StreamRole::Roof);
    let mean = roof.mean();
    let biased: Vec<f64> = roof
        .heights
        .iter()
        .zip(&roof.probabilities)
        .map(|(t, p)| t * p / mean)
        .collect();
    let first = draw_index(&biased, roof_rng.random());
    let mut cell_len = steps_per_height[first];
    let mut phase = key.stream(StreamRole::Phase).random_range(0..cell_len);

    let points = cells + 1;
    let mut values = Vec::with_capacity(points * d);
    let mut cell_starts = Vec::new();
    let mut cell = 0usize;
    for g in 0..points {
        if phase == cell_len {
            cell += 1;
            phase = 0;
            cell_len = steps_per_height[draw_index(&roof.probabilities, roof_rng.random())];
            cell_starts.push(g);
        }
        let shape = profile.value(phase as f64 / cell_len as f64);
        values.extend(base_traj.step(cell).iter().map(|v| v * shape));
        phase += 1;
    }
    let mut path = SampledPath::new(h, d, values, None)?;
    path.cell_starts = Some(cell_starts);
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_alignment() {
        assert_eq!(grid_cells(1000.0, 1e-2).unwrap(), 100_000);
        assert_eq!(grid_cells(1.0, 0.1).unwrap(), 10);
        assert!(grid_cells(1.0, 0.3).is_err());
        assert!(grid_cells(1.0, 0.0).is_err());
        assert!(grid_cells(1.0, -0.5).is_err());
    }

    #[test]
    fn ou_transition_scalar_closed_form() {
        // d = 1, M = m: Φ = [[e^{-mh}, 0], [(1-e^{-mh})/m, 1]].
        let m = 1.3;
        let h = 0.2;
        let tr = ou_transition(&Tensor2::diag(&[m]), h).unwrap();
        let e = (-m * h).exp();
        assert!((tr.phi[(0, 0)] - e).abs() < 1e-14);
        assert!((tr.phi[(1, 0)] - (1.0 - e) / m).abs() < 1e-14);
        assert!(tr.phi[(0, 1)].abs() < 1e-15);
        assert!((tr.phi[(1, 1)] - 1.0).abs() < 1e-14);
        // Var Ξ(h) | Ξ(0)=0 is (1 - e^{-2mh}) / 2m.
        assert!((tr.cov[(0, 0)] - (1.0 - e * e) / (2.0 * m)).abs() < 1e-14);
        assert!((tr.stationary[(0, 0)] - 0.5 / m).abs() < 1e-15);
    }

    #[test]
    fn ou_path_shape_and_reproducibility() {
        let spec = ProcessSpec::Ou {
            drift: Tensor2::identity(2),
        };
        let a = generate_continuous(&spec, 1.0, 0.1, 4).unwrap();
        assert_eq!(a.len(), 11);
        assert!(a.has_integrated());
        assert_eq!(a.integrated(0).unwrap(), &[0.0, 0.0]);
        let b = generate_continuous(&spec, 1.0, 0.1, 4).unwrap();
        assert_eq!(a, b);
        let longer = generate_continuous(&spec, 2.0, 0.1, 4).unwrap();
        assert_eq!(longer.value(10), a.value(10));
    }

    #[test]
    fn rejects_unstable_and_discrete() {
        let spec = ProcessSpec::Ou {
            drift: Tensor2::diag(&[-1.0]),
        };
        assert!(matches!(
            generate_continuous(&spec, 1.0, 0.1, 1),
            Err(Error::SpectralGap(_))
        ));
        let iid = ProcessSpec::IidGaussian {
            covariance: Tensor2::identity(1),
        };
        assert!(generate_continuous(&iid, 1.0, 0.1, 1).is_err());
        let ou = ProcessSpec::Ou {
            drift: Tensor2::identity(1),
        };
        assert!(generate_continuous(&ou, 1.0, 0.0, 1).is_err());
    }

    #[test]
    fn suspension_unit_roof_replays_base() {
        let base = ProcessSpec::Ma1 {
            theta: Tensor2::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap(),
        };
        let spec = ProcessSpec::Suspension {
            base: Box::new(base.clone()),
            roof: Roof::constant(1.0),
            profile: CellProfile::Constant,
        };
        let path = generate_continuous(&spec, 20.0, 0.25, 3).unwrap();
        let xi = generate_discrete(&base, 30, 3).unwrap();
        let starts = path.cell_starts.clone().unwrap();
        assert_eq!(starts.len(), 20);
        // Every full cell carries one base value.
        for (c, &s) in starts.iter().enumerate() {
            for j in 0..4 {
                if s + j < path.len() {
                    assert_eq!(path.value(s + j), xi.step(c + 1));
                }
            }
        }
    }

    #[test]
    fn suspension_requires_aligned_roof() {
        let spec = ProcessSpec::Suspension {
            base: Box::new(ProcessSpec::IidGaussian {
                covariance: Tensor2::identity(1),
            }),
            roof: Roof::constant(1.0),
            profile: CellProfile::Constant,
        };
        assert!(matches!(
            generate_continuous(&spec, 3.0, 0.3, 1),
            Err(Error::GridMismatch(_))
        ));
    }
}
