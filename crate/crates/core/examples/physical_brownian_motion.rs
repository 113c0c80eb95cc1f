//! Time-integrated OU momentum ("physical Brownian motion") with a rotating
//! drift: the area correction `Anti(Σ_OU (Mᵀ)⁻¹)` is non-zero exactly when
//! `M` is not symmetric.
//!
//!     cargo run --release --example physical_brownian_motion

use gklab::estimators::{compare, estimate_characteristics, EstimateOptions};
use gklab::oracles::{ou_closed_form, ou_grid_bias, ou_poisson_check, target_for};
use gklab::{Flavor, ProcessSpec, Tensor2};

fn main() -> gklab::Result<()> {
    let h = 1e-2;
    let n = 1000;
    for drift in [Tensor2::from_rows(&[[1.0, 1.0], [-1.0, 1.0]])?, Tensor2::identity(2)] {
        let closed = ou_closed_form(&drift)?;
        println!("M = {drift:?}");
        println!("  Σ_OU = {:?}", closed.stationary);
        println!("  Γ̄ = {:?}, Poisson route {:?}", closed.chars.gamma, ou_poisson_check(&drift)?);
        println!("  correction = {:?}", closed.correction);

        let spec = ProcessSpec::Ou { drift: drift.clone() };
        let opts = EstimateOptions::default().with_grid_step(h);
        let est = estimate_characteristics(&spec, Flavor::Continuous, n, 2000, 5, &opts)?;
        let bias = ou_grid_bias(&drift, n as f64, h)?;
        let report = compare(&est, &target_for(&spec, Flavor::Continuous)?, 3.0, None)?;
        println!("  γ̂ = {:?} ± {:?}", est.gamma_hat, est.se_gamma);
        println!("  correction estimate = {:?}", est.correction_hat);
        println!("  grid bias at h = {h}: {:.1e}; max |z| = {:.2}", bias.max_abs(), report.max_abs_z);
    }
    Ok(())
}
