//! Regenerative noise: epoch formulas, the stationary version and its lift.
//!
//!     cargo run --release --example regenerative

use gklab::estimators::{estimate_characteristics, EstimateOptions};
use gklab::noise::{generate_epochs, stationarize_regenerative, stationary_phase, LengthMass, StepRule};
use gklab::oracles::{regen_epoch_oracle, regen_exact};
use gklab::{Flavor, ProcessSpec, ReplicaKey};

fn main() -> gklab::Result<()> {
    // Two-step epochs (σe₁, σe₂) with a fair sign σ.
    let spec = ProcessSpec::Regenerative {
        dimension: 2,
        epoch_lengths: vec![LengthMass {
            length: 2,
            probability: 1.0,
        }],
        step_rule: StepRule::SharedSignCycle,
    };
    let epochs = generate_epochs(&spec, 100, 1)?;
    let e = regen_epoch_oracle(&epochs)?;
    println!("epoch oracle: Γ = {:?}, Σ = {:?}", e.chars.gamma, e.chars.sigma);

    let tr = stationarize_regenerative(&spec, 2, 6)?;
    let steps: Vec<_> = tr.steps().collect();
    println!("stationary start: {steps:?}");

    let est = estimate_characteristics(&spec, Flavor::Ito, 8192, 4000, 3, &EstimateOptions::default())?;
    println!("lift estimate: γ̂ = {:?} ± {:?}", est.gamma_hat, est.se_gamma);

    // Size-biased epoch length for T₂ uniform on {1, 2}.
    let mixed = ProcessSpec::Regenerative {
        dimension: 1,
        epoch_lengths: vec![
            LengthMass {
                length: 1,
                probability: 0.5,
            },
            LengthMass {
                length: 2,
                probability: 0.5,
            },
        ],
        step_rule: StepRule::IndependentGaussian,
    };
    let draws = 100_000;
    let twos = (0..draws)
        .filter(|&r| stationary_phase(&mixed, ReplicaKey::new(4, r)).is_ok_and(|p| p.t_star == 2))
        .count();
    println!("P(T* = 2) ≈ {:.4} (exact 2/3)", twos as f64 / draws as f64);
    let (chars, delta0) = regen_exact(&mixed)?;
    println!("mixed lengths: Σ = {:?}, Δ̄(0) = {delta0:?}", chars.sigma);
    Ok(())
}
