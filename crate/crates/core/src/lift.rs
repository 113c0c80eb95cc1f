//! Level-2 lifts of rescaled noise: the pair `(S_N(t), 𝕊_N(t))` of endpoint
//! and iterated sum/integral.
//!
//! Area entries follow the crate's slot convention: `area[(i, j)]` is the
//! iterated quantity `∫ S^i dS^j`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::{SampledPath, Trajectory};
use crate::tensor::{Tensor2, VectorD};

/// Which enhancement a lift uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Iterated sums `Σ_{k<ℓ} ξ(k) ⊗ ξ(ℓ)`.
    Ito,
    /// Iterated integrals of the piecewise-linear interpolation.
    Wz,
    /// Iterated integrals of the time-integrated continuous process.
    Continuous,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ito => "ito",
            Self::Wz => "wz",
            Self::Continuous => "continuous",
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ito" => Ok(Self::Ito),
            "wz" => Ok(Self::Wz),
            "continuous" => Ok(Self::Continuous),
            other => Err(Error::Config(format!(
                "unknown flavor `{other}` (expected ito, wz or continuous)"
            ))),
        }
    }
}

/// One realization of `(S_N(t), 𝕊_N(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftSample {
    pub endpoint: VectorD,
    pub area: Tensor2,
    pub t: f64,
    pub scale: f64,
    pub flavor: Flavor,
    /// Grid step of a continuous lift; its trapezoid bias is `O(h)`.
    pub grid_step: Option<f64>,
}

/// Number of whole steps `⌊N t⌋`.
pub fn steps_for(n_scale: usize, t: f64) -> Result<usize> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time {t} must be non-negative")));
    }
    Ok((n_scale as f64 * t).floor() as usize)
}

/// Unnormalized sum and strict upper iterated sum of `steps`:
/// `(Σ_k ξ(k), Σ_{k<ℓ} ξ(k) ⊗ ξ(ℓ))`, in one streaming pass.
pub fn iterated_sums(traj: &Trajectory, start: usize, end: usize) -> (Vec<f64>, Tensor2) {
    let d = traj.dim();
    let mut partial = vec![0.0; d];
    let mut area = Tensor2::zeros(d);
    for k in start..end {
        let x = traj.step(k);
        area.add_outer_scaled(1.0, &partial, x);
        for (p, v) in partial.iter_mut().zip(x) {
            *p += v;
        }
    }
    (partial, area)
}

fn check_len(traj: &Trajectory, n_scale: usize, t: f64) -> Result<usize> {
    if n_scale == 0 {
        return Err(Error::InvalidArgument("scale N must be at least 1".into()));
    }
    let n = steps_for(n_scale, t)?;
    if traj.len() < n {
        return Err(Error::TooShort {
            needed: n,
            have: traj.len(),
        });
    }
    Ok(n)
}

/// Iterated-sum lift: `S_N(t) = N^{-1/2} Σ_{k<⌊Nt⌋} ξ(k)` and
/// `𝕊_N(t) = N^{-1} Σ_{k<ℓ<⌊Nt⌋} ξ(k) ⊗ ξ(ℓ)`.
pub fn ito_lift(traj: &Trajectory, n_scale: usize, t: f64) -> Result<LiftSample> {
    let n = check_len(traj, n_scale, t)?;
    let (sum, area) = iterated_sums(traj, 0, n);
    let nf = n_scale as f64;
    Ok(LiftSample {
        endpoint: VectorD::from_vec_unchecked(sum.iter().map(|x| x / nf.sqrt()).collect()),
        area: area.scale(1.0 / nf),
        t,
        scale: nf,
        flavor: Flavor::Ito,
        grid_step: None,
    })
}

/// Piecewise-linear lift through the discrete Itô–Stratonovich correction:
/// the iterated-sum area plus `(2N)^{-1} Σ_{k<⌊Nt⌋} ξ(k) ⊗ ξ(k)`.
pub fn wz_lift(traj: &Trajectory, n_scale: usize, t: f64) -> Result<LiftSample> {
    let n = check_len(traj, n_scale, t)?;
    let d = traj.dim();
    let mut partial = vec![0.0; d];
    let mut area = Tensor2::zeros(d);
    let mut diag = Tensor2::zeros(d);
    for k in 0..n {
        let x = traj.step(k);
        area.add_outer_scaled(1.0, &partial, x);
        diag.add_outer_scaled(1.0, x, x);
        for (p, v) in partial.iter_mut().zip(x) {
            *p += v;
        }
    }
    let nf = n_scale as f64;
    let area = &area.scale(1.0 / nf) + &diag.scale(0.5 / nf);
    Ok(LiftSample {
        endpoint: VectorD::from_vec_unchecked(partial.iter().map(|x| x / nf.sqrt()).collect()),
        area,
        t,
        scale: nf,
        flavor: Flavor::Wz,
        grid_step: None,
    })
}

/// Piecewise-linear lift computed cell by cell as a Riemann–Stieltjes
/// integral: over cell `k` the linear segment contributes
/// `P_k ⊗ ξ(k) / N + ξ(k) ⊗ ξ(k) / (2N)`. Requires integer `N t`; partial
/// last cells are not lifted.
pub fn wz_lift_direct(traj: &Trajectory, n_scale: usize, t: f64) -> Result<LiftSample> {
    let n = check_len(traj, n_scale, t)?;
    let exact = n_scale as f64 * t;
    if (exact - exact.round()).abs() > 1e-9 * exact.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "N·t = {exact} is not an integer"
        )));
    }
    let d = traj.dim();
    let nf = n_scale as f64;
    let mut endpoint = vec![0.0; d];
    let mut area = Tensor2::zeros(d);
    for k in 0..n {
        let dx: Vec<f64> = traj.step(k).iter().map(|x| x / nf.sqrt()).collect();
        // ∫ over the cell of (X_k + s dx) ⊗ dx ds, s ∈ [0, 1].
        area.add_outer_scaled(1.0, &endpoint, &dx);
        area.add_outer_scaled(0.5, &dx, &dx);
        for (e, v) in endpoint.iter_mut().zip(&dx) {
            *e += v;
        }
    }
    Ok(LiftSample {
        endpoint: VectorD::from_vec_unchecked(endpoint),
        area,
        t,
        scale: nf,
        flavor: Flavor::Wz,
        grid_step: None,
    })
}

/// Lift of `S̄_N(t) = N^{-1/2} ∫₀^{Nt} Ξ ds`.
///
/// With `Y(s) = ∫₀ˢ Ξ`, the area is `N^{-1} ∫₀^{Nt} Y(s) ⊗ Ξ(s) ds` by the
/// trapezoid rule on the sampling grid. `Y` comes from the path's exact
/// integral when present, otherwise from cumulative trapezoid sums.
pub fn continuous_lift(path: &SampledPath, n_scale: f64, t: f64) -> Result<LiftSample> {
    if !(n_scale.is_finite() && n_scale > 0.0) {
        return Err(Error::InvalidArgument("scale N must be positive".into()));
    }
    let h = path.grid_step;
    let cells = crate::noise::grid_cells(n_scale * t, h)?;
    if path.len() < cells + 1 {
        return Err(Error::GridMismatch(format!(
            "path covers {} cells, lift needs {cells}",
            path.len().saturating_sub(1)
        )));
    }
    let d = path.dim();
    // Y relative to its value at time zero.
    let y_start: Vec<f64> = path.integrated(0).map_or_else(|| vec![0.0; d], <[f64]>::to_vec);
    let mut y_prev = vec![0.0; d];
    let mut y_cur = vec![0.0; d];
    let mut area = Tensor2::zeros(d);
    for k in 0..cells {
        let x0 = path.value(k);
        let x1 = path.value(k + 1);
        match path.integrated(k + 1) {
            Some(y) => {
                for i in 0..d {
                    y_cur[i] = y[i] - y_start[i];
                }
            }
            None => {
                for i in 0..d {
                    y_cur[i] = y_prev[i] + 0.5 * h * (x0[i] + x1[i]);
                }
            }
        }
        area.add_outer_scaled(0.5 * h, &y_prev, x0);
        area.add_outer_scaled(0.5 * h, &y_cur, x1);
        std::mem::swap(&mut y_prev, &mut y_cur);
    }
    let endpoint: Vec<f64> = y_prev.iter().map(|y| y / n_scale.sqrt()).collect();
    Ok(LiftSample {
        endpoint: VectorD::from_vec_unchecked(endpoint),
        area: area.scale(1.0 / n_scale),
        t,
        scale: n_scale,
        flavor: Flavor::Continuous,
        grid_step: Some(h),
    })
}

/// `ξ = ∫₀^τ Ξ ds` over one roof cell from its grid samples
/// `Ξ(0), Ξ(h), …` by the left-point rule.
///
/// The rule is exact for the crate's cell profiles: piecewise-constant cells
/// always, raised-cosine cells whenever the cell holds at least two samples.
pub fn integrate_roof_cells(cell: &[&[f64]], tau: f64, h: f64) -> Result<VectorD> {
    let m = crate::noise::grid_cells(tau, h)
        .map_err(|_| Error::GridMismatch(format!("roof {tau} not aligned with grid step {h}")))?;
    if m == 0 || cell.len() < m {
        return Err(Error::GridMismatch(format!(
            "roof {tau} needs {m} samples at step {h}, got {}",
            cell.len()
        )));
    }
    let d = cell[0].len();
    let mut out = vec![0.0; d];
    for x in &cell[..m] {
        for (o, v) in out.iter_mut().zip(x.iter()) {
            *o += h * v;
        }
    }
    Ok(VectorD::from_vec_unchecked(out))
}

/// Integrates a suspension path over each complete roof cell, giving the
/// base increments `ξ(k)` seen by the flow. The partial cell before the first
/// boundary and after the last one are dropped.
pub fn suspension_increments(path: &SampledPath) -> Result<Trajectory> {
    let starts = path
        .cell_starts
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("path carries no roof cells".into()))?;
    if starts.len() < 2 {
        return Err(Error::InvalidArgument("path holds no complete roof cell".into()));
    }
    let h = path.grid_step;
    let d = path.dim();
    let mut data = Vec::with_capacity((starts.len() - 1) * d);
    for w in starts.windows(2) {
        let cell: Vec<&[f64]> = (w[0]..w[1]).map(|g| path.value(g)).collect();
        let tau = (w[1] - w[0]) as f64 * h;
        data.extend(integrate_roof_cells(&cell, tau, h)?.into_vec());
    }
    Ok(Trajectory::from_flat(d, data))
}
