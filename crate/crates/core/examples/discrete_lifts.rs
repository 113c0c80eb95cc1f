//! Itô and piecewise-linear lifts of MA(1) noise against their Green–Kubo
//! characteristics.
//!
//!     cargo run --release --example discrete_lifts

use gklab::estimators::{compare, estimate_characteristics, EstimateOptions, Quantity};
use gklab::oracles::target_for;
use gklab::{Flavor, ProcessSpec, Tensor2};

fn main() -> gklab::Result<()> {
    let spec = ProcessSpec::Ma1 {
        theta: Tensor2::from_rows(&[[0.0, 1.0], [0.0, 0.0]])?,
    };
    for flavor in [Flavor::Ito, Flavor::Wz] {
        let target = target_for(&spec, flavor)?;
        let est = estimate_characteristics(&spec, flavor, 8192, 4000, 1, &EstimateOptions::default())?;
        let report = compare(&est, &target, 3.0, None)?;
        println!("{flavor}: oracle Γ = {:?}, Σ = {:?}", target.chars.gamma, target.chars.sigma);
        println!("  γ̂ = {:?} ± {:?}", est.gamma_hat, est.se_gamma);
        println!("  correction = {:?} ± {:?}", est.correction_hat, est.se_correction);
        for q in Quantity::ALL {
            println!("  max |z| {q}: {:.2}", report.max_abs_z_of(q));
        }
    }
    Ok(())
}
