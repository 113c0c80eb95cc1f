//! Monte Carlo estimation of correlations and lift second moments, and
//! comparison against oracle values.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lift::{continuous_lift, ito_lift, wz_lift, Flavor, LiftSample};
use crate::noise::{generate_continuous, generate_discrete, ProcessSpec, Trajectory};
use crate::oracles::{CorrelationSequence, Target};
use crate::rng::ReplicaKey;
use crate::tensor::Tensor2;

/// Rows at or below this count are summed directly; larger blocks are split
/// in half. The tree depends only on the row count.
const PAIRWISE_BLOCK: usize = 16;

fn pairwise_sum(rows: &[f64], width: usize, out: &mut [f64]) {
    let n = rows.len() / width;
    if n <= PAIRWISE_BLOCK {
        out.fill(0.0);
        for row in rows.chunks_exact(width) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        return;
    }
    let mid = n / 2;
    let mut right = vec![0.0; width];
    pairwise_sum(&rows[..mid * width], width, out);
    pairwise_sum(&rows[mid * width..], width, &mut right);
    for (o, r) in out.iter_mut().zip(&right) {
        *o += r;
    }
}

/// Entrywise sample means and standard errors of fixed-width samples.
///
/// Samples are kept in insertion order and reduced by a fixed pairwise tree,
/// so the result is bit-identical however the samples were produced.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    width: usize,
    data: Vec<f64>,
}

impl MomentAccumulator {
    /// Accumulator for `dim × dim` tensors.
    pub fn new(dim: usize) -> Self {
        Self::with_width(dim * dim)
    }

    pub fn with_width(width: usize) -> Self {
        Self {
            width,
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: &Tensor2) {
        self.push_slice(sample.as_slice());
    }

    pub fn push_slice(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.width, "sample width");
        self.data.extend_from_slice(sample);
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.width.max(1)
    }

    /// Means and standard errors `s / √n`, with `s` the unbiased sample
    /// standard deviation. Errors are zero with fewer than two samples.
    pub fn mean_and_se_flat(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count();
        let mut mean = vec![0.0; self.width];
        if n == 0 {
            return (mean, vec![0.0; self.width]);
        }
        pairwise_sum(&self.data, self.width, &mut mean);
        mean.iter_mut().for_each(|m| *m /= n as f64);
        if n < 2 {
            return (mean, vec![0.0; self.width]);
        }
        let dev: Vec<f64> = self
            .data
            .chunks_exact(self.width)
            .flat_map(|row| row.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)))
            .collect();
        let mut ss = vec![0.0; self.width];
        pairwise_sum(&dev, self.width, &mut ss);
        let nf = n as f64;
        let se = ss.iter().map(|s| (s / (nf - 1.0) / nf).sqrt()).collect();
        (mean, se)
    }

    /// [`Self::mean_and_se_flat`] for tensor-shaped samples.
    pub fn mean_and_se(&self) -> (Tensor2, Tensor2) {
        let d = (self.width as f64).sqrt().round() as usize;
        let (m, s) = self.mean_and_se_flat();
        (Tensor2::from_data(d, m), Tensor2::from_data(d, s))
    }
}

/// Lag-averaged correlogram `Δ̂(n) = (len - n)⁻¹ Σ_k ξ(k) ⊗ ξ(k+n)`.
pub fn empirical_delta(traj: &Trajectory, n_max: usize) -> Result<CorrelationSequence> {
    let needed = (4 * n_max).max(1);
    if traj.len() < needed {
        return Err(Error::TooShort {
            needed,
            have: traj.len(),
        });
    }
    let deltas = (0..=n_max).map(|n| lagged_mean(traj, n, 0, traj.len())).collect();
    CorrelationSequence::new(deltas, false)
}

fn lagged_mean(traj: &Trajectory, n: usize, start: usize, end: usize) -> Tensor2 {
    let mut acc = Tensor2::zeros(traj.dim());
    for k in start..end - n {
        acc.add_outer_scaled(1.0, traj.step(k), traj.step(k + n));
    }
    acc.scale(1.0 / (end - start - n) as f64)
}

/// Batch-means standard errors of the correlogram: the trajectory is cut
/// into `batches` contiguous blocks and `Δ̂(n)` is recomputed on each.
pub fn empirical_delta_se(traj: &Trajectory, n_max: usize, batches: usize) -> Result<Vec<Tensor2>> {
    if batches < 2 {
        return Err(Error::InvalidArgument("need at least two batches".into()));
    }
    let block = traj.len() / batches;
    if block < (4 * n_max).max(1) {
        return Err(Error::TooShort {
            needed: batches * (4 * n_max).max(1),
            have: traj.len(),
        });
    }
    let d = traj.dim();
    Ok((0..=n_max)
        .map(|n| {
            let mut acc = MomentAccumulator::new(d);
            for b in 0..batches {
                acc.push(&lagged_mean(traj, n, b * block, (b + 1) * block));
            }
            acc.mean_and_se().1
        })
        .collect())
}

/// Monte Carlo estimates of `E S_N(1) ⊗ S_N(1)`, `E 𝕊_N(1)` and of the mean
/// area correction `E[𝕊_N(1) - ½ S_N(1) ⊗ S_N(1)]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub sigma_hat: Tensor2,
    pub gamma_hat: Tensor2,
    pub se_sigma: Tensor2,
    pub se_gamma: Tensor2,
    pub correction_hat: Tensor2,
    pub se_correction: Tensor2,
    pub replicas: usize,
    pub scale: usize,
    pub flavor: Flavor,
    pub grid_step: Option<f64>,
    pub seed: u64,
}

/// Settings outside the core `(spec, flavor, N, M, seed)` tuple.
#[derive(Clone, Copy, Debug, Default)]
pub struct EstimateOptions {
    /// Sampling step for the continuous flavor.
    pub grid_step: Option<f64>,
    /// Worker threads; `None` uses the global pool, `Some(1)` runs inline.
    pub workers: Option<usize>,
}

impl EstimateOptions {
    pub fn with_grid_step(mut self, h: f64) -> Self {
        self.grid_step = Some(h);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }
}

fn check_flavor(spec: &ProcessSpec, flavor: Flavor, opts: &EstimateOptions) -> Result<()> {
    let ok = match flavor {
        Flavor::Ito | Flavor::Wz => spec.is_discrete(),
        Flavor::Continuous => spec.is_continuous(),
    };
    if !ok {
        return Err(Error::UnsupportedKind {
            kind: spec.kind_name(),
            operation: match flavor {
                Flavor::Ito => "ito lift",
                Flavor::Wz => "wz lift",
                Flavor::Continuous => "continuous lift",
            },
        });
    }
    if flavor == Flavor::Continuous && opts.grid_step.is_none() {
        return Err(Error::InvalidArgument("continuous flavor needs a grid step h".into()));
    }
    Ok(())
}

/// One lifted replica at `t = 1`.
pub fn lift_replica(
    spec: &ProcessSpec,
    flavor: Flavor,
    n: usize,
    key: ReplicaKey,
    opts: &EstimateOptions,
) -> Result<LiftSample> {
    check_flavor(spec, flavor, opts)?;
    match flavor {
        Flavor::Ito => ito_lift(&generate_discrete(spec, n, key)?, n, 1.0),
        Flavor::Wz => wz_lift(&generate_discrete(spec, n, key)?, n, 1.0),
        Flavor::Continuous => {
            let h = opts.grid_step.unwrap_or_default();
            let path = generate_continuous(spec, n as f64, h, key)?;
            continuous_lift(&path, n as f64, 1.0)
        }
    }
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(Error::InvalidArgument("workers must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Draws `m` independent replicas with keys `(seed, 0..m)`, lifts each at
/// `t = 1` and scale `n`, and returns entrywise means and standard errors.
pub fn estimate_characteristics(
    spec: &ProcessSpec,
    flavor: Flavor,
    n: usize,
    m: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<MomentEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("scale N must be at least 1".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two replicas".into()));
    }
    spec.validate()?;
    check_flavor(spec, flavor, opts)?;
    let d = spec.dimension();
    let width = 3 * d * d;
    let rows: Vec<Vec<f64>> = in_pool(opts.workers, || {
        (0..m as u64)
            .into_par_iter()
            .map(|r| {
                let lift = lift_replica(spec, flavor, n, ReplicaKey::new(seed, r), opts)?;
                let mut row = Vec::with_capacity(width);
                let e = lift.endpoint.as_slice();
                for i in 0..d {
                    row.extend((0..d).map(|j| e[i] * e[j]));
                }
                row.extend_from_slice(lift.area.as_slice());
                for i in 0..d {
                    row.extend((0..d).map(|j| lift.area[(i, j)] - 0.5 * e[i] * e[j]));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut acc = MomentAccumulator::with_width(width);
    for row in &rows {
        acc.push_slice(row);
    }
    let (mean, se) = acc.mean_and_se_flat();
    let block = |v: &[f64], k: usize| Tensor2::from_data(d, v[k * d * d..(k + 1) * d * d].to_vec());
    Ok(MomentEstimate {
        sigma_hat: block(&mean, 0),
        gamma_hat: block(&mean, 1),
        correction_hat: block(&mean, 2),
        se_sigma: block(&se, 0),
        se_gamma: block(&se, 1),
        se_correction: block(&se, 2),
        replicas: m,
        scale: n,
        flavor,
        grid_step: (flavor == Flavor::Continuous).then_some(opts.grid_step).flatten(),
        seed,
    })
}

/// One [`MomentEstimate`] per scale in `n_grid`, all with the same replica
/// keys, so prefix-consistent generators give common random numbers.
pub fn convergence_study(
    spec: &ProcessSpec,
    flavor: Flavor,
    n_grid: &[usize],
    m: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<Vec<MomentEstimate>> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty N grid".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N grid must be strictly ascending".into()));
    }
    n_grid
        .iter()
        .map(|&n| estimate_characteristics(spec, flavor, n, m, seed, opts))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Sigma,
    Gamma,
    Correction,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Sigma, Quantity::Gamma, Quantity::Correction];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Sigma => "sigma",
            Quantity::Gamma => "gamma",
            Quantity::Correction => "correction",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub quantity: Quantity,
    pub i: usize,
    pub j: usize,
    pub estimate: f64,
    pub se: f64,
    pub oracle: f64,
    pub bias: f64,
    /// `sign(estimate - oracle) · max(|estimate - oracle| - bias, 0) / se`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub flavor: Flavor,
    pub rows: Vec<ComparisonRow>,
    pub max_abs_z: f64,
    pub z_max: f64,
    pub pass: bool,
}

impl ComparisonReport {
    /// Rows of one quantity, i-major.
    pub fn quantity(&self, q: Quantity) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(move |r| r.quantity == q)
    }

    /// Largest `|z|` over the rows of one quantity.
    pub fn max_abs_z_of(&self, q: Quantity) -> f64 {
        self.quantity(q).map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    /// Rows with `|z| > z_max`.
    pub fn flagged(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(move |r| r.z.abs() > self.z_max)
    }
}

fn z_score(diff: f64, se: f64, bias: f64) -> f64 {
    let excess = (diff.abs() - bias).max(0.0);
    if excess == 0.0 {
        0.0
    } else if se > 0.0 {
        diff.signum() * excess / se
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Entrywise z-scores of `est` against `target` for `Σ`, `Γ` and the area
/// correction `Γ - ½Σ`. `bias_budget`, if given, is subtracted from every
/// absolute difference before scaling.
pub fn compare(
    est: &MomentEstimate,
    target: &Target,
    z_max: f64,
    bias_budget: Option<&Tensor2>,
) -> Result<ComparisonReport> {
    if est.flavor != target.flavor {
        return Err(Error::FlavorMismatch {
            estimate: est.flavor.to_string(),
            oracle: target.flavor.to_string(),
        });
    }
    let d = est.sigma_hat.dim();
    if target.chars.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: target.chars.dim(),
        });
    }
    if let Some(b) = bias_budget {
        if b.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.dim(),
            });
        }
    }
    let correction = target.chars.strat_area_correction();
    let mut rows = Vec::with_capacity(3 * d * d);
    for q in Quantity::ALL {
        let (e, s, o) = match q {
            Quantity::Sigma => (&est.sigma_hat, &est.se_sigma, &target.chars.sigma),
            Quantity::Gamma => (&est.gamma_hat, &est.se_gamma, &target.chars.gamma),
            Quantity::Correction => (&est.correction_hat, &est.se_correction, &correction),
        };
        for i in 0..d {
            for j in 0..d {
                let bias = bias_budget.map_or(0.0, |b| b[(i, j)]);
                rows.push(ComparisonRow {
                    quantity: q,
                    i,
                    j,
                    estimate: e[(i, j)],
                    se: s[(i, j)],
                    oracle: o[(i, j)],
                    bias,
                    z: z_score(e[(i, j)] - o[(i, j)], s[(i, j)], bias),
                });
            }
        }
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(ComparisonReport {
        flavor: est.flavor,
        rows,
        max_abs_z,
        z_max,
        pass: max_abs_z <= z_max,
    })
}
