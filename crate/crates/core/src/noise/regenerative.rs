//! Regenerative increments: i.i.d. epochs, and the stationary version built
//! from a size-biased first epoch entered at a uniform phase.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EpochRecord, LengthMass, ProcessSpec, StepRule, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{ReplicaKey, StreamRole};
use crate::tensor::VectorD;

struct RegenParts<'a> {
    dim: usize,
    lengths: &'a [LengthMass],
    rule: StepRule,
}

fn parts<'a>(spec: &'a ProcessSpec, operation: &'static str) -> Result<RegenParts<'a>> {
    match spec {
        ProcessSpec::Regenerative {
            dimension,
            epoch_lengths,
            step_rule,
        } => {
            spec.validate()?;
            Ok(RegenParts {
                dim: *dimension,
                lengths: epoch_lengths,
                rule: *step_rule,
            })
        }
        _ => Err(Error::UnsupportedKind {
            kind: spec.kind_name(),
            operation,
        }),
    }
}

fn draw_length(masses: &[LengthMass], weight: impl Fn(&LengthMass) -> f64, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = masses.iter().map(&weight).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for m in masses {
        acc += weight(m);
        if u < acc {
            return m.length;
        }
    }
    masses
        .iter()
        .rev()
        .find(|m| weight(m) > 0.0)
        .map_or(masses[0].length, |m| m.length)
}

/// Appends the `len` steps of one epoch to `out` (row-major, `dim` wide).
pub fn epoch_steps(rule: StepRule, dim: usize, len: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
    match rule {
        StepRule::SharedSignCycle => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for l in 0..len {
                out.extend((0..dim).map(|i| if i == l % dim { sign } else { 0.0 }));
            }
        }
        StepRule::IndependentGaussian => {
            out.extend((0..len * dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        }
    }
}

/// `k` i.i.d. post-delay epochs.
pub fn generate_epochs(
    spec: &ProcessSpec,
    k: usize,
    key: impl Into<ReplicaKey>,
) -> Result<Vec<EpochRecord>> {
    let p = parts(spec, "generate_epochs")?;
    let key = key.into();
    let mut len_rng = key.stream(StreamRole::EpochLengths);
    let mut step_rng = key.stream(StreamRole::EpochSteps);
    let mut buf = Vec::new();
    (0..k)
        .map(|_| {
            let len = draw_length(p.lengths, |m| m.probability, &mut len_rng);
            buf.clear();
            epoch_steps(p.rule, p.dim, len, &mut step_rng, &mut buf);
            let steps = buf
                .chunks(p.dim)
                .map(|s| VectorD::from_vec_unchecked(s.to_vec()))
                .collect();
            EpochRecord::new(steps)
        })
        .collect()
}

/// The size-biased length `T*` and the phase `U ∈ {1..T*}`, `V = T* - U`,
/// that start the stationary version.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StationaryPhase {
    pub t_star: usize,
    pub u: usize,
    pub v: usize,
}

/// Draws `T*` with `P(T* = m) = m P(T₂ = m) / E T₂`, then `U` uniform on
/// `{1, …, T*}` and `V = T* - U`.
pub fn stationary_phase(spec: &ProcessSpec, key: impl Into<ReplicaKey>) -> Result<StationaryPhase> {
    let p = parts(spec, "stationary_phase")?;
    let mut rng = key.into().stream(StreamRole::Phase);
    Ok(draw_phase(p.lengths, &mut rng))
}

fn draw_phase(lengths: &[LengthMass], rng: &mut ChaCha8Rng) -> StationaryPhase {
    let t_star = draw_length(lengths, |m| m.length as f64 * m.probability, rng);
    let u = rng.random_range(1..=t_star);
    StationaryPhase {
        t_star,
        u,
        v: t_star - u,
    }
}

/// Stationary increments `ξ̄(0..n)`.
///
/// The first `U` increments are steps `V, …, T*-1` of an independent epoch of
/// length `T*`; after that, fresh i.i.d. epochs follow. This is the two-case
/// construction of the stationary version: an independent copy run from its
/// first regeneration time shifted by `V`, glued at time `U` onto a delay-free
/// copy.
pub fn stationarize_regenerative(
    spec: &ProcessSpec,
    key: impl Into<ReplicaKey>,
    n: usize,
) -> Result<Trajectory> {
    let p = parts(spec, "stationarize_regenerative")?;
    if n == 0 {
        return Err(Error::InvalidArgument("trajectory length must be at least 1".into()));
    }
    let key = key.into();
    let mut phase_rng = key.stream(StreamRole::Phase);
    let phase = draw_phase(p.lengths, &mut phase_rng);

    let d = p.dim;
    let mut data = Vec::with_capacity((n + phase.t_star) * d);
    let mut head_rng = key.stream(StreamRole::InitialState);
    let mut head = Vec::with_capacity(phase.t_star * d);
    epoch_steps(p.rule, d, phase.t_star, &mut head_rng, &mut head);
    data.extend_from_slice(&head[phase.v * d..]);

    let mut len_rng = key.stream(StreamRole::EpochLengths);
    let mut step_rng = key.stream(StreamRole::EpochSteps);
    while data.len() < n * d {
        let len = draw_length(p.lengths, |m| m.probability, &mut len_rng);
        epoch_steps(p.rule, d, len, &mut step_rng, &mut data);
    }
    data.truncate(n * d);
    Ok(Trajectory::from_flat(d, data).with_meta(spec, key))
}
