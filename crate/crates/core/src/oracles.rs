//! Exact characteristics `(Σ, Γ)` from model data: Green–Kubo sums and
//! integrals of the correlation function, the OU closed form and its
//! Poisson-equation cross-check, epoch formulas for regenerative noise, and
//! the suspension-flow formulas.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lift::Flavor;
use crate::noise::{exact_delta, EpochRecord, ProcessSpec, Roof, StepRule};
use crate::rng::{ReplicaKey, StreamRole};
use crate::tensor::{
    anti, check_spectral_gap, expm, lyapunov_solve, mat_exp, sym, Characteristics, Tensor2,
    SYMMETRY_TOL,
};

/// `Δ(0..=n_max)` plus what is known about the lags beyond `n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSequence {
    pub deltas: Vec<Tensor2>,
    pub n_max: usize,
    /// `Δ(n) = 0` for every `n > n_max`.
    pub exact_tail_zero: bool,
    /// Closed-form tail `Δ(n) = amplitude · ratioⁿ` for `n > n_max`.
    pub tail: Option<GeometricTail>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricTail {
    pub amplitude: Tensor2,
    pub ratio: f64,
}

impl CorrelationSequence {
    pub fn new(deltas: Vec<Tensor2>, exact_tail_zero: bool) -> Result<Self> {
        let first = deltas
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty correlation sequence".into()))?;
        let d = first.dim();
        if let Some(bad) = deltas.iter().find(|t| t.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        if deltas.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("correlation sequence"));
        }
        let scale = first.max_abs().max(1.0);
        if !first.is_symmetric(SYMMETRY_TOL * scale) {
            return Err(Error::NotPsd("Δ(0) is not symmetric".into()));
        }
        if first.min_sym_eigenvalue() < -SYMMETRY_TOL * scale {
            return Err(Error::NotPsd("Δ(0) is not positive semidefinite".into()));
        }
        Ok(Self {
            n_max: deltas.len() - 1,
            deltas,
            exact_tail_zero,
            tail: None,
        })
    }

    pub fn with_tail(mut self, tail: GeometricTail) -> Self {
        self.tail = Some(tail);
        self
    }

    pub fn dim(&self) -> usize {
        self.deltas[0].dim()
    }

    /// `Σ_{n=1}^{n_max} Δ(n)`.
    pub fn head_sum(&self) -> Tensor2 {
        let mut s = Tensor2::zeros(self.dim());
        for d in &self.deltas[1..] {
            s.add_assign(d);
        }
        s
    }
}

/// Outcome of [`truncation_tail_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct TailCheck {
    pub pass: bool,
    /// Fitted `Σ_{n > n_max} ‖Δ(n)‖_F`, infinite for a non-decaying fit.
    pub bound: f64,
    pub ratio: f64,
    pub diagnostic: String,
}

/// Minimum number of lags for a tail fit.
pub const TAIL_MIN_LAGS: usize = 8;
const TAIL_REL_TOL: f64 = 1e-3;

/// Fits `‖Δ(n)‖_F ≈ C ρⁿ` by least squares on `log ‖Δ(n)‖_F` over the last
/// half of the lags and bounds the truncated tail by `C ρ^{n_max+1} / (1-ρ)`.
/// Passes when the bound is below `1e-3 ‖Δ(0)‖_F`, or trivially when the
/// tail is known to vanish.
pub fn truncation_tail_check(corr: &CorrelationSequence) -> Result<TailCheck> {
    if corr.exact_tail_zero {
        return Ok(TailCheck {
            pass: true,
            bound: 0.0,
            ratio: 0.0,
            diagnostic: "exact zero tail".into(),
        });
    }
    if corr.n_max < TAIL_MIN_LAGS {
        return Err(Error::InvalidArgument(format!(
            "tail check needs n_max ≥ {TAIL_MIN_LAGS}, got {}",
            corr.n_max
        )));
    }
    let head = corr.deltas[0].frobenius_norm();
    let lo = corr.n_max / 2;
    let pts: Vec<(f64, f64)> = (lo..=corr.n_max)
        .filter_map(|n| {
            let norm = corr.deltas[n].frobenius_norm();
            (norm > 0.0).then(|| (n as f64, norm.ln()))
        })
        .collect();
    if pts.is_empty() {
        return Ok(TailCheck {
            pass: true,
            bound: 0.0,
            ratio: 0.0,
            diagnostic: "last half of lags vanishes".into(),
        });
    }
    let (slope, intercept) = if pts.len() == 1 {
        // A single non-zero lag: treat as decaying at the slowest admissible rate.
        return Ok(TailCheck {
            pass: false,
            bound: f64::INFINITY,
            ratio: 1.0,
            diagnostic: "too few non-zero lags to fit a tail".into(),
        });
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    };
    let ratio = slope.exp();
    if ratio >= 1.0 {
        return Ok(TailCheck {
            pass: false,
            bound: f64::INFINITY,
            ratio,
            diagnostic: format!("non-decaying tail (fitted ratio {ratio:.4})"),
        });
    }
    let bound = (intercept + slope * (corr.n_max + 1) as f64).exp() / (1.0 - ratio);
    let pass = bound < TAIL_REL_TOL * head;
    Ok(TailCheck {
        pass,
        bound,
        ratio,
        diagnostic: format!(
            "fitted ratio {ratio:.4}, tail bound {bound:.3e} vs {:.3e}",
            TAIL_REL_TOL * head
        ),
    })
}

/// `Γ = Σ_{n≥1} Δ(n)` including whatever is known about the tail.
fn gamma_sum(corr: &CorrelationSequence) -> Result<Tensor2> {
    let mut gamma = corr.head_sum();
    if corr.exact_tail_zero {
        return Ok(gamma);
    }
    if let Some(tail) = &corr.tail {
        if tail.ratio.is_nan() || tail.ratio.abs() >= 1.0 {
            return Err(Error::TailCheck(format!(
                "geometric tail ratio {} is not summable",
                tail.ratio
            )));
        }
        let factor = tail.ratio.powi(corr.n_max as i32 + 1) / (1.0 - tail.ratio);
        gamma.add_assign(&tail.amplitude.scale(factor));
        return Ok(gamma);
    }
    let check = truncation_tail_check(corr)?;
    if !check.pass {
        return Err(Error::TailCheck(check.diagnostic));
    }
    Ok(gamma)
}

/// Itô characteristics of the iterated-sum lift:
/// `Γ = Σ_{n≥1} Δ(n)` and `Σ = Δ(0) + 2 Sym(Γ)`.
pub fn greenkubo_discrete_ito(corr: &CorrelationSequence) -> Result<Characteristics> {
    let gamma = gamma_sum(corr)?;
    let sigma = &corr.deltas[0] + &sym(&gamma).scale(2.0);
    Characteristics::new(sym(&sigma), gamma)
}

/// Characteristics of the piecewise-linear lift: the same `Σ`, and
/// `Γ̂ = ½ Δ(0) + Σ_{n≥1} Δ(n)`. Its Stratonovich correction `Γ̂ - ½Σ`
/// is `Anti(Σ_{n≥1} Δ(n))`.
pub fn greenkubo_discrete_wz(corr: &CorrelationSequence) -> Result<Characteristics> {
    let ito = greenkubo_discrete_ito(corr)?;
    let gamma = &ito.gamma + &corr.deltas[0].scale(0.5);
    Characteristics::new(ito.sigma, gamma)
}

/// `Δ̄` sampled on `0, step, 2·step, …, T` with an exponential tail bound.
#[derive(Clone, Debug)]
pub struct SampledCorrelation {
    pub step: f64,
    pub values: Vec<Tensor2>,
    /// Decay rate `λ` with `|Δ̄(s)| ≤ C e^{-λ s}` beyond the grid.
    pub tail_rate: Option<f64>,
}

/// Continuous-time characteristics: `Γ̄ = ∫₀^∞ Δ̄(s) ds`, `Σ̄ = 2 Sym(Γ̄)`.
///
/// The head integral is the composite trapezoid rule with the
/// Euler–Maclaurin endpoint correction `-h²/12 (Δ̄'(T) - Δ̄'(0))`, the
/// derivatives taken by second-order one-sided differences; the tail past `T`
/// is `Δ̄(T) / λ`.
pub fn greenkubo_continuous(delta: &SampledCorrelation) -> Result<Characteristics> {
    let rate = delta
        .tail_rate
        .filter(|r| r.is_finite() && *r > 0.0)
        .ok_or_else(|| Error::TailCheck("continuous correlation has no tail bound".into()))?;
    let n = delta.values.len();
    if n < 3 {
        return Err(Error::InvalidArgument("need at least three samples of Δ̄".into()));
    }
    let h = delta.step;
    let d = delta.values[0].dim();
    let mut gamma = Tensor2::zeros(d);
    for (k, v) in delta.values.iter().enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        gamma.add_assign(&v.scale(w));
    }
    let v = &delta.values;
    // f'(0) ≈ (-3f₀ + 4f₁ - f₂) / 2h, f'(T) ≈ (3f_n - 4f_{n-1} + f_{n-2}) / 2h.
    let d0 = &(&v[1].scale(4.0) - &v[0].scale(3.0)) - &v[2];
    let dt = &(&v[n - 1].scale(3.0) - &v[n - 2].scale(4.0)) + &v[n - 3];
    let correction = (&dt - &d0).scale(-h / 24.0);
    gamma.add_assign(&correction);
    gamma.add_assign(&v[n - 1].scale(1.0 / rate));
    let sigma = sym(&gamma).scale(2.0);
    Characteristics::new(sigma, gamma)
}

/// Samples `Δ̄(s) = Σ_OU exp(-Mᵀ s)` on `0, step, …` until the tail bound
/// `‖Σ_OU‖ e^{-λ T} / λ` drops below `1e-12`.
pub fn ou_delta_samples(drift: &Tensor2, step: f64) -> Result<SampledCorrelation> {
    let gap = check_spectral_gap(drift)?;
    let sigma_ou = lyapunov_solve(drift, &Tensor2::identity(drift.dim()))?;
    let t_max = ((sigma_ou.max_abs() / (gap * 1e-12)).ln() / gap).max(1.0);
    let n = (t_max / step).ceil() as usize + 1;
    let prop = mat_exp(&drift.transpose(), step)?;
    let mut values = Vec::with_capacity(n);
    let mut cur = sigma_ou;
    for _ in 0..n {
        let next = cur.matmul(&prop);
        values.push(cur);
        cur = next;
    }
    Ok(SampledCorrelation {
        step,
        values,
        tail_rate: Some(gap),
    })
}

/// Closed-form OU characteristics.
#[derive(Clone, Debug, Serialize)]
pub struct OuOracle {
    /// `Σ_OU`, the stationary covariance of `Ξ`.
    pub stationary: Tensor2,
    /// `Σ̄ = Γ̄ + Γ̄ᵀ`, `Γ̄ = Σ_OU (Mᵀ)⁻¹`.
    pub chars: Characteristics,
    /// `Anti(Γ̄) = ½ [Σ_OU (Mᵀ)⁻¹ - M⁻¹ Σ_OU]`.
    pub correction: Tensor2,
}

pub fn ou_closed_form(drift: &Tensor2) -> Result<OuOracle> {
    let d = drift.dim();
    let stationary = lyapunov_solve(drift, &Tensor2::identity(d))?;
    let stationary = sym(&stationary);
    let gamma = stationary.matmul(&drift.transpose().inverse()?);
    let sigma = &gamma + &gamma.transpose();
    let correction = anti(&gamma);
    Ok(OuOracle {
        stationary,
        chars: Characteristics::new(sigma, gamma)?,
        correction,
    })
}

/// Mean error of the continuous lift's area at scale `n` on an OU path
/// sampled with step `h`: `E 𝕊_N^h(1) - E 𝕊_N(1)`.
///
/// With `f(t) = E Y(t) ⊗ Ξ(t) = Γ̄ (I - e^{-Mᵀt})` the lift is the trapezoid
/// rule applied to `f` over `[0, N]`, so the error is
/// `N⁻¹ Γ̄ [(Mᵀ)⁻¹ - h/2 (I + P)(I - P)⁻¹] (I - e^{-MᵀN})`, `P = e^{-Mᵀh}`.
pub fn ou_grid_bias(drift: &Tensor2, n: f64, h: f64) -> Result<Tensor2> {
    let cells = crate::noise::grid_cells(n, h)?;
    let d = drift.dim();
    let gamma = ou_closed_form(drift)?.chars.gamma;
    let mt = drift.transpose();
    let id = Tensor2::identity(d);
    let p = mat_exp(&mt, h)?;
    let trap = (&id + &p).matmul(&(&id - &p).inverse()?).scale(0.5 * h);
    let inner = &mt.inverse()? - &trap;
    // e^{-MᵀN} = P^cells by repeated squaring.
    let mut pow = id.clone();
    let mut base = p.clone();
    let mut k = cells;
    while k > 0 {
        if k & 1 == 1 {
            pow = pow.matmul(&base);
        }
        base = base.matmul(&base);
        k >>= 1;
    }
    let decay = &id - &pow;
    Ok(gamma.matmul(&inner).matmul(&decay).scale(1.0 / n))
}

/// `∫ x ⊗ φ(x) dπ` for the Poisson solution `φ(x) = M⁻¹ x` under the
/// stationary law `π = N(0, Σ_π)`.
///
/// `Σ_π` is computed independently of the Lyapunov solver, as
/// `∫₀^∞ e^{-Ms} e^{-Mᵀs} ds` by repeated doubling of Van Loan's finite-time
/// integral, so agreement with [`ou_closed_form`] checks both routes.
pub fn ou_poisson_check(drift: &Tensor2) -> Result<Tensor2> {
    check_spectral_gap(drift)?;
    let d = drift.dim();
    let h = 1.0 / drift.norm1().max(1.0);
    // C = [[M, I], [0, -Mᵀ]] h: exp(C) = [[·, F12], [0, F22]], e^{-Mh} = F22ᵀ,
    // ∫₀ʰ e^{-Ms} e^{-Mᵀs} ds = F22ᵀ F12.
    let mut c = Tensor2::zeros(2 * d);
    for i in 0..d {
        for j in 0..d {
            c[(i, j)] = drift[(i, j)] * h;
            c[(d + i, d + j)] = -drift[(j, i)] * h;
        }
        c[(i, d + i)] = h;
    }
    let e = expm(&c)?;
    let mut f12 = Tensor2::zeros(d);
    let mut phi = Tensor2::zeros(d);
    for i in 0..d {
        for j in 0..d {
            f12[(i, j)] = e[(i, d + j)];
            phi[(j, i)] = e[(d + i, d + j)];
        }
    }
    let mut cov = phi.matmul(&f12);
    for _ in 0..200 {
        let add = phi.matmul(&cov).matmul(&phi.transpose());
        cov = &cov + &add;
        phi = phi.matmul(&phi);
        if add.max_abs() <= 1e-18 * cov.max_abs() {
            break;
        }
    }
    let cov = sym(&cov);
    // E[x ⊗ M⁻¹x]_{ij} = Σ_k E[x_i x_k] (M⁻¹)_{jk}.
    Ok(cov.matmul(&drift.inverse()?.transpose()))
}

/// Epoch-based estimate of the characteristics with jackknife errors.
#[derive(Clone, Debug)]
pub struct EpochEstimate {
    pub chars: Characteristics,
    pub se_sigma: Tensor2,
    pub se_gamma: Tensor2,
    pub epochs: usize,
}

/// `Γ = E[Σ_{τ₁≤k<ℓ<τ₂} ξ(k) ⊗ ξ(ℓ)] / E T₂` and
/// `Σ = E[X_{τ₁,τ₂} ⊗ X_{τ₁,τ₂}] / E T₂`, with expectations replaced by
/// epoch averages. Standard errors are leave-one-epoch-out jackknife errors
/// of the ratio estimators. Deterministic epoch laws give exact values.
pub fn regen_epoch_oracle(epochs: &[EpochRecord]) -> Result<EpochEstimate> {
    let first = epochs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no epochs".into()))?;
    let d = first.total.dim();
    let per_epoch: Vec<(f64, Tensor2, Tensor2)> = epochs
        .iter()
        .map(|e| {
            let mut inner = Tensor2::zeros(d);
            let mut partial = vec![0.0; d];
            for s in &e.steps {
                inner.add_outer_scaled(1.0, &partial, s.as_slice());
                for (p, x) in partial.iter_mut().zip(s.as_slice()) {
                    *p += x;
                }
            }
            let mut tot = Tensor2::zeros(d);
            tot.add_outer_scaled(1.0, e.total.as_slice(), e.total.as_slice());
            (e.length as f64, tot, inner)
        })
        .collect();
    let k = per_epoch.len() as f64;
    let mut len_sum = 0.0;
    let mut tot_sum = Tensor2::zeros(d);
    let mut inner_sum = Tensor2::zeros(d);
    for (l, t, i) in &per_epoch {
        len_sum += l;
        tot_sum.add_assign(t);
        inner_sum.add_assign(i);
    }
    let sigma = tot_sum.scale(1.0 / len_sum);
    let gamma = inner_sum.scale(1.0 / len_sum);

    let mut se_sigma = Tensor2::zeros(d);
    let mut se_gamma = Tensor2::zeros(d);
    if per_epoch.len() >= 2 {
        let mut acc_s = Tensor2::zeros(d);
        let mut acc_g = Tensor2::zeros(d);
        let mut mean_s = Tensor2::zeros(d);
        let mut mean_g = Tensor2::zeros(d);
        let loo: Vec<(Tensor2, Tensor2)> = per_epoch
            .iter()
            .map(|(l, t, i)| {
                let denom = len_sum - l;
                (
                    (&tot_sum - t).scale(1.0 / denom),
                    (&inner_sum - i).scale(1.0 / denom),
                )
            })
            .collect();
        for (s, g) in &loo {
            mean_s.add_assign(s);
            mean_g.add_assign(g);
        }
        let mean_s = mean_s.scale(1.0 / k);
        let mean_g = mean_g.scale(1.0 / k);
        for (s, g) in &loo {
            let ds = s - &mean_s;
            let dg = g - &mean_g;
            for (a, x) in acc_s.as_mut_slice().iter_mut().zip(ds.as_slice()) {
                *a += x * x;
            }
            for (a, x) in acc_g.as_mut_slice().iter_mut().zip(dg.as_slice()) {
                *a += x * x;
            }
        }
        let f = (k - 1.0) / k;
        se_sigma = Tensor2::from_data(d, acc_s.as_slice().iter().map(|x| (f * x).sqrt()).collect());
        se_gamma = Tensor2::from_data(d, acc_g.as_slice().iter().map(|x| (f * x).sqrt()).collect());
    }
    Ok(EpochEstimate {
        chars: Characteristics::new(sym(&sigma), gamma)?,
        se_sigma,
        se_gamma,
        epochs: per_epoch.len(),
    })
}

/// Exact characteristics of a regenerative spec by enumeration over the
/// epoch-length law. Also returns `Δ̄(0)` of the stationary version, needed
/// for the piecewise-linear flavor.
pub fn regen_exact(spec: &ProcessSpec) -> Result<(Characteristics, Tensor2)> {
    let ProcessSpec::Regenerative {
        dimension,
        epoch_lengths,
        step_rule,
    } = spec
    else {
        return Err(Error::UnsupportedKind {
            kind: spec.kind_name(),
            operation: "regen_exact",
        });
    };
    spec.validate()?;
    let d = *dimension;
    let mean_len: f64 = epoch_lengths
        .iter()
        .map(|m| m.length as f64 * m.probability)
        .sum();
    let mut sigma = Tensor2::zeros(d);
    let mut gamma = Tensor2::zeros(d);
    let mut delta0 = Tensor2::zeros(d);
    match step_rule {
        StepRule::SharedSignCycle => {
            // σ² = 1, so every expectation is the deterministic value of the
            // σ = +1 epoch of each length.
            for m in epoch_lengths {
                let mut partial = vec![0.0; d];
                let mut inner = Tensor2::zeros(d);
                let mut diag = Tensor2::zeros(d);
                for l in 0..m.length {
                    let e = basis(d, l % d);
                    inner.add_outer_scaled(1.0, &partial, &e);
                    diag.add_outer_scaled(1.0, &e, &e);
                    partial[l % d] += 1.0;
                }
                let mut tot = Tensor2::zeros(d);
                tot.add_outer_scaled(1.0, &partial, &partial);
                sigma.add_assign(&tot.scale(m.probability));
                gamma.add_assign(&inner.scale(m.probability));
                delta0.add_assign(&diag.scale(m.probability));
            }
            sigma = sigma.scale(1.0 / mean_len);
            gamma = gamma.scale(1.0 / mean_len);
            delta0 = delta0.scale(1.0 / mean_len);
        }
        StepRule::IndependentGaussian => {
            sigma = Tensor2::identity(d);
            delta0 = Tensor2::identity(d);
        }
    }
    Ok((Characteristics::new(sigma, gamma)?, delta0))
}

fn basis(d: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[k] = 1.0;
    e
}

/// The cross term `∫_Ω̄ (∫₀ᵘ Ξ(s; ω) ds) ⊗ Ξ(0; (ω, u)) dP̄` of a suspension
/// flow, with `P̄ = τ̄⁻¹ (P × Lebesgue)` on the region under the roof.
#[derive(Clone, Debug, PartialEq)]
pub struct SuspensionCrossTerm {
    pub value: Tensor2,
    pub mean_roof: f64,
    /// `L` with `L⁻¹ ≤ τ ≤ L`.
    pub roof_bound: f64,
    /// Entrywise standard errors when `value` is a Monte Carlo estimate.
    pub se: Option<Tensor2>,
}

fn suspension_parts(spec: &ProcessSpec) -> Result<(&ProcessSpec, &Roof, crate::noise::CellProfile)> {
    match spec {
        ProcessSpec::Suspension {
            base,
            roof,
            profile,
        } => {
            spec.validate()?;
            Ok((base, roof, *profile))
        }
        _ => Err(Error::UnsupportedKind {
            kind: spec.kind_name(),
            operation: "suspension oracle",
        }),
    }
}

/// Exact correlations of the cell integrals `ξ(k) = τ_k v(k)`, with roofs
/// drawn independently of the base values `v`: `Δ(0) = E τ² Δ_v(0)` and
/// `Δ(n) = τ̄² Δ_v(n)` for `n ≥ 1`.
pub fn suspension_base_correlation(spec: &ProcessSpec, n_max: usize) -> Result<CorrelationSequence> {
    let (base, roof, _) = suspension_parts(spec)?;
    let inner = exact_delta(base, n_max)?;
    let mean = roof.mean();
    let deltas = inner
        .deltas
        .iter()
        .enumerate()
        .map(|(n, t)| {
            if n == 0 {
                t.scale(roof.second_moment())
            } else {
                t.scale(mean * mean)
            }
        })
        .collect();
    CorrelationSequence::new(deltas, inner.exact_tail_zero)
}

/// Closed-form cross term: inside a cell `∫₀^τ τ G(u/τ) g(u/τ) du = τ²/2`
/// for any profile with `∫₀¹ g = 1`, so the term is `E τ² Δ_v(0) / (2 τ̄)`.
pub fn suspension_cross_exact(spec: &ProcessSpec) -> Result<SuspensionCrossTerm> {
    let (base, roof, _) = suspension_parts(spec)?;
    let dv0 = exact_delta(base, 0)?.deltas.swap_remove(0);
    let mean = roof.mean();
    Ok(SuspensionCrossTerm {
        value: dv0.scale(roof.second_moment() / (2.0 * mean)),
        mean_roof: mean,
        roof_bound: roof.bound(),
        se: None,
    })
}

/// Monte Carlo estimates of the cross term (sampling `(ω, u)` from `P̄`)
/// and, from independent draws of `ω ~ P`, of `Δ(0) = E ξ(0) ⊗ ξ(0)`.
#[derive(Clone, Debug)]
pub struct SuspensionMonteCarlo {
    pub cross: SuspensionCrossTerm,
    pub delta0: Tensor2,
    pub se_delta0: Tensor2,
    pub samples: usize,
}

pub fn suspension_cross_mc(spec: &ProcessSpec, samples: usize, seed: u64) -> Result<SuspensionMonteCarlo> {
    use rand::Rng;
    let (base, roof, profile) = suspension_parts(spec)?;
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let d = base.dimension();
    let mean = roof.mean();
    let biased: Vec<f64> = roof
        .heights
        .iter()
        .zip(&roof.probabilities)
        .map(|(t, p)| t * p / mean)
        .collect();
    let pick = |probs: &[f64], u: f64| {
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    };
    let mut cross = crate::estimators::MomentAccumulator::new(d);
    let mut delta0 = crate::estimators::MomentAccumulator::new(d);
    let mut sample = Tensor2::zeros(d);
    for i in 0..samples as u64 {
        // (ω, u) ~ P̄: size-biased cell, uniform position under the roof.
        let key = ReplicaKey::new(seed, 2 * i);
        let v = crate::noise::generate_discrete(base, 1, key)?;
        let mut rng = key.stream(StreamRole::CrossTerm);
        let tau = roof.heights[pick(&biased, rng.random())];
        let x = rng.random::<f64>();
        let left: Vec<f64> = v.step(0).iter().map(|a| tau * a * profile.integral(x)).collect();
        let right: Vec<f64> = v.step(0).iter().map(|a| a * profile.value(x)).collect();
        sample.as_mut_slice().fill(0.0);
        sample.add_outer_scaled(1.0, &left, &right);
        cross.push(&sample);

        // ω ~ P for Δ(0).
        let key = ReplicaKey::new(seed, 2 * i + 1);
        let v = crate::noise::generate_discrete(base, 1, key)?;
        let mut rng = key.stream(StreamRole::CrossTerm);
        let tau = roof.heights[pick(&roof.probabilities, rng.random())];
        let xi: Vec<f64> = v.step(0).iter().map(|a| tau * a).collect();
        sample.as_mut_slice().fill(0.0);
        sample.add_outer_scaled(1.0, &xi, &xi);
        delta0.push(&sample);
    }
    let (cross_mean, cross_se) = cross.mean_and_se();
    let (d0_mean, d0_se) = delta0.mean_and_se();
    Ok(SuspensionMonteCarlo {
        cross: SuspensionCrossTerm {
            value: cross_mean,
            mean_roof: mean,
            roof_bound: roof.bound(),
            se: Some(cross_se),
        },
        delta0: d0_mean,
        se_delta0: d0_se,
        samples,
    })
}

/// Flow characteristics from the base characteristics:
/// `Σ̄ = τ̄⁻¹ Σ` and `Γ̄ = τ̄⁻¹ Γ + cross`. The Stratonovich correction of the
/// result is `Anti(Γ̄)`.
pub fn suspension_oracle(base_corr: &CorrelationSequence, cross: &SuspensionCrossTerm) -> Result<Characteristics> {
    let l = cross.roof_bound;
    let tau = cross.mean_roof;
    if !(l.is_finite() && l >= 1.0 && tau >= 1.0 / l - 1e-12 && tau <= l + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "mean roof {tau} outside [1/{l}, {l}]"
        )));
    }
    let base = greenkubo_discrete_ito(base_corr)?;
    let sigma = base.sigma.scale(1.0 / tau);
    let gamma = &base.gamma.scale(1.0 / tau) + &cross.value;
    Characteristics::new(sigma, gamma)
}

/// `τ̄⁻¹ Δ(0) - 2 Sym(cross)`, which vanishes for a consistent model.
pub fn suspension_sym_identity(delta0: &Tensor2, cross: &SuspensionCrossTerm) -> Tensor2 {
    &delta0.scale(1.0 / cross.mean_roof) - &sym(&cross.value).scale(2.0)
}

/// An oracle value tagged with the lift flavor it applies to and the route
/// that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct Target {
    pub flavor: Flavor,
    pub chars: Characteristics,
    pub source: &'static str,
}

/// Exact characteristics of `spec` for `flavor`, choosing the oracle route by
/// model kind.
pub fn target_for(spec: &ProcessSpec, flavor: Flavor) -> Result<Target> {
    spec.validate()?;
    let mismatch = || Error::UnsupportedKind {
        kind: spec.kind_name(),
        operation: match flavor {
            Flavor::Ito => "ito oracle",
            Flavor::Wz => "wz oracle",
            Flavor::Continuous => "continuous oracle",
        },
    };
    let (chars, source) = match (spec, flavor) {
        (
            ProcessSpec::IidGaussian { .. } | ProcessSpec::Ma1 { .. } | ProcessSpec::DoublingMap { .. },
            Flavor::Ito | Flavor::Wz,
        ) => {
            let n_max = match spec {
                ProcessSpec::DoublingMap { .. } => 64,
                _ => 1,
            };
            let corr = exact_delta(spec, n_max)?;
            if flavor == Flavor::Ito {
                (greenkubo_discrete_ito(&corr)?, "greenkubo_discrete_ito")
            } else {
                (greenkubo_discrete_wz(&corr)?, "greenkubo_discrete_wz")
            }
        }
        (ProcessSpec::Regenerative { .. }, Flavor::Ito) => (regen_exact(spec)?.0, "regen_exact"),
        (ProcessSpec::Regenerative { .. }, Flavor::Wz) => {
            let (c, delta0) = regen_exact(spec)?;
            let gamma = &c.gamma + &delta0.scale(0.5);
            (Characteristics::new(c.sigma, gamma)?, "regen_exact+wz")
        }
        (ProcessSpec::Ou { drift }, Flavor::Continuous) => (ou_closed_form(drift)?.chars, "ou_closed_form"),
        (ProcessSpec::Suspension { base, .. }, Flavor::Continuous) => {
            let n_max = match **base {
                ProcessSpec::DoublingMap { .. } => 64,
                _ => 1,
            };
            let corr = suspension_base_correlation(spec, n_max)?;
            let cross = suspension_cross_exact(spec)?;
            (suspension_oracle(&corr, &cross)?, "suspension_oracle")
        }
        _ => return Err(mismatch()),
    };
    Ok(Target {
        flavor,
        chars,
        source,
    })
}
