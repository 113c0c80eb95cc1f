//! Stationary noise models: their parameters, seeded generators, and exact
//! correlation functions where a closed form exists.

mod continuous;
mod discrete;
mod regenerative;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::CorrelationSequence;
use crate::rng::ReplicaKey;
use crate::tensor::{cholesky_psd, check_spectral_gap, Tensor2, VectorD, MAX_DIM};

pub use continuous::{generate_continuous, grid_cells, ou_transition, OuTransition};
pub use discrete::{doubling_orbit, generate_discrete};
pub use regenerative::{
    epoch_steps, generate_epochs, stationarize_regenerative, stationary_phase, StationaryPhase,
};

/// A stationary noise model together with everything needed to sample it and
/// to evaluate its exact oracle.
///
/// This is also the `process` block of the JSON experiment config:
///
/// ```json
/// {"kind": "ma1", "theta": [[0, 1], [0, 0]]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// `ξ(k) ~ N(0, covariance)` independent.
    IidGaussian { covariance: Tensor2 },
    /// `ξ(k) = ε(k) + Θ ε(k-1)` with `ε ~ N(0, I)` independent.
    Ma1 { theta: Tensor2 },
    /// `ξ(k)_i = cos(2π f_i x_k)` along an orbit of `x ↦ 2x mod 1` started
    /// from Lebesgue measure.
    DoublingMap { frequencies: Vec<u64> },
    /// Stationary solution of `dΞ = -M Ξ dt + dB`.
    Ou { drift: Tensor2 },
    /// Increments of a regenerative process with i.i.d. epochs.
    Regenerative {
        dimension: usize,
        epoch_lengths: Vec<LengthMass>,
        step_rule: StepRule,
    },
    /// Suspension flow over a discrete base under a random roof.
    Suspension {
        base: Box<ProcessSpec>,
        roof: Roof,
        #[serde(default)]
        profile: CellProfile,
    },
}

/// One atom `P(T₂ = length) = probability` of the epoch-length law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthMass {
    pub length: usize,
    pub probability: f64,
}

/// How the steps inside one epoch of length `T` are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `ℓ` is `σ e_{ℓ mod d}` with one fair sign `σ = ±1` per epoch.
    SharedSignCycle,
    /// Every step is an independent `N(0, I)` vector.
    IndependentGaussian,
}

/// Discrete law of the roof height `τ`, drawn independently per base cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roof {
    pub heights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Roof {
    pub fn constant(height: f64) -> Self {
        Self {
            heights: vec![height],
            probabilities: vec![1.0],
        }
    }

    /// `τ̄ = E τ`.
    pub fn mean(&self) -> f64 {
        self.heights.iter().zip(&self.probabilities).map(|(h, p)| h * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.heights
            .iter()
            .zip(&self.probabilities)
            .map(|(h, p)| h * h * p)
            .sum()
    }

    /// The smallest `L` with `L⁻¹ ≤ τ ≤ L`.
    pub fn bound(&self) -> f64 {
        self.heights
            .iter()
            .fold(1.0f64, |l, &h| l.max(h).max(1.0 / h))
    }
}

/// Shape of `Ξ` inside one roof cell: `Ξ(u) = v · g(u / τ)` with `∫₀¹ g = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellProfile {
    /// `g ≡ 1`: piecewise-constant flow.
    #[default]
    Constant,
    /// `g(x) = 1 - cos 2πx`: continuous, vanishing on cell boundaries.
    RaisedCosine,
}

impl CellProfile {
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::RaisedCosine => 1.0 - (std::f64::consts::TAU * x).cos(),
        }
    }

    /// `G(x) = ∫₀ˣ g`.
    pub fn integral(self, x: f64) -> f64 {
        match self {
            Self::Constant => x,
            Self::RaisedCosine => x - (std::f64::consts::TAU * x).sin() / std::f64::consts::TAU,
        }
    }
}

impl ProcessSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::IidGaussian { .. } => "iid_gaussian",
            Self::Ma1 { .. } => "ma1",
            Self::DoublingMap { .. } => "doubling_map",
            Self::Ou { .. } => "ou",
            Self::Regenerative { .. } => "regenerative",
            Self::Suspension { .. } => "suspension",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::IidGaussian { covariance } => covariance.dim(),
            Self::Ma1 { theta } => theta.dim(),
            Self::DoublingMap { frequencies } => frequencies.len(),
            Self::Ou { drift } => drift.dim(),
            Self::Regenerative { dimension, .. } => *dimension,
            Self::Suspension { base, .. } => base.dimension(),
        }
    }

    /// Kinds that generate a discrete-time sequence `ξ(k)`.
    pub fn is_discrete(&self) -> bool {
        !self.is_continuous()
    }

    /// Kinds that generate a continuous-time path `Ξ(t)`.
    pub fn is_continuous(&self) -> bool {
        matches!(self, Self::Ou { .. } | Self::Suspension { .. })
    }

    /// Checks every invariant. Shape and range problems are reported as
    /// [`Error::Config`]; failing mathematical preconditions (spectral gap,
    /// positive semidefiniteness) keep their own variants.
    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        if d == 0 || d > MAX_DIM {
            return Err(Error::Config(format!(
                "dimension {d} outside 1..={MAX_DIM}"
            )));
        }
        match self {
            Self::IidGaussian { covariance } => {
                cholesky_psd(covariance)?;
            }
            Self::Ma1 { .. } => {}
            Self::DoublingMap { frequencies } => {
                if frequencies.contains(&0) {
                    return Err(Error::Config(
                        "doubling_map frequencies must be positive integers".into(),
                    ));
                }
            }
            Self::Ou { drift } => {
                check_spectral_gap(drift)?;
            }
            Self::Regenerative { epoch_lengths, .. } => {
                validate_masses(
                    epoch_lengths.iter().map(|m| m.probability),
                    "epoch_lengths",
                )?;
                if epoch_lengths.iter().any(|m| m.length == 0) {
                    return Err(Error::Config("epoch lengths must be at least 1".into()));
                }
                if epoch_lengths.iter().any(|m| m.length > MAX_EPOCH_LENGTH) {
                    return Err(Error::Config(format!(
                        "epoch lengths must be at most {MAX_EPOCH_LENGTH}"
                    )));
                }
            }
            Self::Suspension { base, roof, .. } => {
                if !matches!(
                    **base,
                    Self::IidGaussian { .. } | Self::Ma1 { .. } | Self::DoublingMap { .. }
                ) {
                    return Err(Error::Config(format!(
                        "suspension base must be iid_gaussian, ma1 or doubling_map, not {}",
                        base.kind_name()
                    )));
                }
                base.validate()?;
                if roof.heights.is_empty() || roof.heights.len() != roof.probabilities.len() {
                    return Err(Error::Config(
                        "roof heights and probabilities must be non-empty and equal length".into(),
                    ));
                }
                if roof.heights.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(Error::Config("roof heights must be finite and positive".into()));
                }
                validate_masses(roof.probabilities.iter().copied(), "roof probabilities")?;
            }
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON form, recorded in generated paths.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).expect("spec serializes");
        json.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        })
    }
}

/// Upper limit on the support of the epoch-length law.
pub const MAX_EPOCH_LENGTH: usize = 1 << 16;

fn validate_masses(probs: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut total = 0.0;
    let mut count = 0;
    for p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::Config(format!("{what}: probability {p} out of range")));
        }
        total += p;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Config(format!("{what}: empty distribution")));
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// A discrete-time sample path `ξ(0), …, ξ(n-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
    pub key: Option<ReplicaKey>,
    pub fingerprint: Option<u64>,
}

impl Trajectory {
    pub fn from_steps(steps: &[VectorD]) -> Result<Self> {
        let dim = steps
            .first()
            .map(VectorD::dim)
            .ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
        let mut data = Vec::with_capacity(dim * steps.len());
        for s in steps {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self::from_flat(dim, data))
    }

    /// Builds a trajectory from row-major step data.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged trajectory data");
        Self {
            dim,
            data,
            key: None,
            fingerprint: None,
        }
    }

    pub(crate) fn with_meta(mut self, spec: &ProcessSpec, key: ReplicaKey) -> Self {
        self.key = Some(key);
        self.fingerprint = Some(spec.fingerprint());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn steps(&self) -> std::slice::Chunks<'_, f64> {
        self.data.chunks(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Steps `start..end` as a new trajectory.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self::from_flat(self.dim, self.data[start * self.dim..end * self.dim].to_vec())
    }
}

/// A continuous-time path sampled on a uniform grid `0, h, 2h, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    pub grid_step: f64,
    dim: usize,
    values: Vec<f64>,
    integrated: Option<Vec<f64>>,
    /// Grid indices at which a new roof cell starts (suspension flows only).
    pub cell_starts: Option<Vec<usize>>,
}

impl SampledPath {
    pub fn new(
        grid_step: f64,
        dim: usize,
        values: Vec<f64>,
        integrated: Option<Vec<f64>>,
    ) -> Result<Self> {
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(Error::InvalidArgument(format!("grid step {grid_step} must be positive")));
        }
        if dim == 0 || !values.len().is_multiple_of(dim) || values.is_empty() {
            return Err(Error::InvalidArgument("ragged path values".into()));
        }
        if let Some(int) = &integrated {
            if int.len() != values.len() {
                return Err(Error::InvalidArgument(
                    "integrated and values lengths differ".into(),
                ));
            }
        }
        Ok(Self {
            grid_step,
            dim,
            values,
            integrated,
            cell_starts: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points (cells + 1).
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Ξ(k h)`.
    #[inline]
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Exact `∫₀^{kh} Ξ ds`, when the model provides it.
    #[inline]
    pub fn integrated(&self, k: usize) -> Option<&[f64]> {
        self.integrated
            .as_ref()
            .map(|v| &v[k * self.dim..(k + 1) * self.dim])
    }

    pub fn has_integrated(&self) -> bool {
        self.integrated.is_some()
    }
}

/// One regeneration epoch: its length, its increments, and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub length: usize,
    pub steps: Vec<VectorD>,
    pub total: VectorD,
}

impl EpochRecord {
    pub fn new(steps: Vec<VectorD>) -> Result<Self> {
        let dim = steps
            .first()
            .map(VectorD::dim)
            .ok_or_else(|| Error::InvalidArgument("empty epoch".into()))?;
        let mut total = vec![0.0; dim];
        for s in &steps {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
            for (t, x) in total.iter_mut().zip(s.as_slice()) {
                *t += x;
            }
        }
        Ok(Self {
            length: steps.len(),
            steps,
            total: VectorD::from_vec_unchecked(total),
        })
    }
}

/// Exact `Δ(n) = E ξ(0) ⊗ ξ(n)` for `n = 0..=n_max`.
///
/// Closed forms exist for `iid_gaussian`, `ma1` and `doubling_map`; the OU
/// kernel is sampled with [`crate::oracles::ou_delta_samples`].
pub fn exact_delta(spec: &ProcessSpec, n_max: usize) -> Result<CorrelationSequence> {
    spec.validate()?;
    let d = spec.dimension();
    let mut deltas = vec![Tensor2::zeros(d); n_max + 1];
    match spec {
        ProcessSpec::IidGaussian { covariance } => {
            deltas[0] = covariance.clone();
        }
        ProcessSpec::Ma1 { theta } => {
            deltas[0] = &Tensor2::identity(d) + &theta.matmul(&theta.transpose());
            if n_max >= 1 {
                deltas[1] = theta.transpose();
            }
        }
        ProcessSpec::DoublingMap { frequencies } => {
            // E cos(2π f_i x) cos(2π f_j 2ⁿ x) = ½ [f_i = 2ⁿ f_j] under Lebesgue.
            for (n, delta) in deltas.iter_mut().enumerate() {
                for (i, &fi) in frequencies.iter().enumerate() {
                    for (j, &fj) in frequencies.iter().enumerate() {
                        let shifted = u32::try_from(n)
                            .ok()
                            .and_then(|s| 1u64.checked_shl(s))
                            .and_then(|p| fj.checked_mul(p));
                        if shifted == Some(fi) {
                            delta[(i, j)] = 0.5;
                        }
                    }
                }
            }
        }
        ProcessSpec::Ou { .. } => {
            return Err(Error::UnsupportedKind {
                kind: "ou",
                operation: "exact_delta (use ou_delta_samples for the continuous kernel)",
            });
        }
        ProcessSpec::Regenerative { .. } | ProcessSpec::Suspension { .. } => {
            return Err(Error::UnsupportedKind {
                kind: spec.kind_name(),
                operation: "exact_delta",
            });
        }
    }
    let max_freq = match spec {
        ProcessSpec::DoublingMap { frequencies } => frequencies.iter().copied().max(),
        _ => None,
    };
    let exact_tail_zero = match spec {
        // Beyond lag log2(max f / min f) no frequency can map onto another.
        ProcessSpec::DoublingMap { frequencies } => {
            let min = frequencies.iter().copied().min().unwrap_or(1);
            let ratio = max_freq.unwrap_or(1) / min;
            n_max as u32 + 1 >= 64 - ratio.leading_zeros()
        }
        ProcessSpec::Ma1 { .. } => n_max >= 1,
        _ => true,
    };
    CorrelationSequence::new(deltas, exact_tail_zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[[f64; 2]]) -> Tensor2 {
        Tensor2::from_rows(rows).unwrap()
    }

    #[test]
    fn ma1_exact_delta() {
        let spec = ProcessSpec::Ma1 {
            theta: t(&[[0., 1.], [0., 0.]]),
        };
        let c = exact_delta(&spec, 2).unwrap();
        assert_eq!(c.deltas[0], t(&[[2., 0.], [0., 1.]]));
        assert_eq!(c.deltas[1], t(&[[0., 0.], [1., 0.]]));
        assert_eq!(c.deltas[2], Tensor2::zeros(2));
        assert!(c.exact_tail_zero);
    }

    #[test]
    fn doubling_exact_delta() {
        let spec = ProcessSpec::DoublingMap {
            frequencies: vec![1, 2],
        };
        let c = exact_delta(&spec, 3).unwrap();
        assert_eq!(c.deltas[0], Tensor2::identity(2).scale(0.5));
        assert_eq!(c.deltas[1], t(&[[0., 0.], [0.5, 0.]]));
        assert_eq!(c.deltas[2], Tensor2::zeros(2));
        assert_eq!(c.deltas[3], Tensor2::zeros(2));
        assert!(c.exact_tail_zero);
        assert!(!exact_delta(&spec, 0).unwrap().exact_tail_zero);
    }

    #[test]
    fn iid_exact_delta() {
        let spec = ProcessSpec::IidGaussian {
            covariance: Tensor2::identity(2),
        };
        let c = exact_delta(&spec, 4).unwrap();
        assert_eq!(c.deltas[0], Tensor2::identity(2));
        assert!(c.deltas[1..].iter().all(|d| *d == Tensor2::zeros(2)));
    }

    #[test]
    fn exact_delta_rejects_kinds_without_closed_form() {
        let spec = ProcessSpec::Regenerative {
            dimension: 2,
            epoch_lengths: vec![LengthMass {
                length: 2,
                probability: 1.0,
            }],
            step_rule: StepRule::SharedSignCycle,
        };
        assert!(matches!(
            exact_delta(&spec, 3),
            Err(Error::UnsupportedKind { .. })
        ));
    }

    #[test]
    fn spec_json_schema() {
        let spec: ProcessSpec =
            serde_json::from_str(r#"{"kind":"ma1","theta":[[0,1],[0,0]]}"#).unwrap();
        assert_eq!(spec.dimension(), 2);
        assert!(serde_json::from_str::<ProcessSpec>(
            r#"{"kind":"ma1","theta":[[0,1],[0,0]],"extra":1}"#
        )
        .is_err());
        let s: ProcessSpec = serde_json::from_str(
            r#"{"kind":"suspension","base":{"kind":"ma1","theta":[[0,1],[0,0]]},
                "roof":{"heights":[1,2],"probabilities":[0.5,0.5]}}"#,
        )
        .unwrap();
        assert_eq!(s.dimension(), 2);
        s.validate().unwrap();
        let back: ProcessSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_errors() {
        let bad_ou = ProcessSpec::Ou {
            drift: Tensor2::diag(&[1., -0.5]),
        };
        assert!(matches!(bad_ou.validate(), Err(Error::SpectralGap(_))));
        let bad_cov = ProcessSpec::IidGaussian {
            covariance: t(&[[1., 2.], [2., 1.]]),
        };
        assert!(matches!(bad_cov.validate(), Err(Error::NotPsd(_))));
        let bad_regen = ProcessSpec::Regenerative {
            dimension: 2,
            epoch_lengths: vec![LengthMass {
                length: 2,
                probability: 0.7,
            }],
            step_rule: StepRule::SharedSignCycle,
        };
        assert!(matches!(bad_regen.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn roof_moments() {
        let r = Roof {
            heights: vec![1.0, 2.0],
            probabilities: vec![0.5, 0.5],
        };
        assert_eq!(r.mean(), 1.5);
        assert_eq!(r.second_moment(), 2.5);
        assert_eq!(r.bound(), 2.0);
        assert_eq!(Roof::constant(0.25).bound(), 4.0);
    }

    #[test]
    fn profiles_integrate_to_one() {
        for p in [CellProfile::Constant, CellProfile::RaisedCosine] {
            assert!((p.integral(1.0) - 1.0).abs() < 1e-15);
            assert_eq!(p.integral(0.0), 0.0);
        }
    }
}
