//! Suspension flow over MA(1) noise under a two-valued roof: the flow
//! characteristics, the cross-term identity, and a sampled flow path.
//!
//!     cargo run --release --example suspension_flow

use gklab::lift::suspension_increments;
use gklab::noise::{CellProfile, Roof};
use gklab::oracles::{
    suspension_base_correlation, suspension_cross_exact, suspension_cross_mc, suspension_oracle,
    suspension_sym_identity,
};
use gklab::{generate_continuous, ProcessSpec, Tensor2};

fn main() -> gklab::Result<()> {
    let base = ProcessSpec::Ma1 {
        theta: Tensor2::from_rows(&[[0.0, 1.0], [0.0, 0.0]])?,
    };
    for profile in [CellProfile::Constant, CellProfile::RaisedCosine] {
        let spec = ProcessSpec::Suspension {
            base: Box::new(base.clone()),
            roof: Roof {
                heights: vec![1.0, 2.0],
                probabilities: vec![0.5, 0.5],
            },
            profile,
        };
        let corr = suspension_base_correlation(&spec, 1)?;
        let cross = suspension_cross_exact(&spec)?;
        let flow = suspension_oracle(&corr, &cross)?;
        println!("{profile:?}: Σ̄ = {:?}, Γ̄ = {:?}", flow.sigma, flow.gamma);
        println!("  correction = {:?}", flow.strat_area_correction());

        let mc = suspension_cross_mc(&spec, 100_000, 6)?;
        let residual = suspension_sym_identity(&mc.delta0, &mc.cross);
        println!("  MC cross term = {:?} (exact {:?})", mc.cross.value, cross.value);
        println!("  identity residual ‖·‖_F = {:.2e}", residual.frobenius_norm());

        let path = generate_continuous(&spec, 20.0, 0.25, 7)?;
        let xi = suspension_increments(&path)?;
        println!("  {} grid points, {} complete cells", path.len(), xi.len());
    }
    Ok(())
}
