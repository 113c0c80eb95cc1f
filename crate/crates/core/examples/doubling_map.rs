//! A deterministic expanding map produces a non-zero Lévy area correction.
//!
//! Observables `cos 2πx` and `cos 4πx` of the doubling map give
//! `Δ(1) = [[0, 0], [½, 0]]` and nothing else, so the piecewise-linear lift
//! converges to a rough path with correction `[[0, -¼], [¼, 0]]`.
//!
//!     cargo run --release --example doubling_map

use gklab::estimators::{estimate_characteristics, EstimateOptions};
use gklab::noise::{doubling_orbit, exact_delta};
use gklab::oracles::{greenkubo_discrete_wz, truncation_tail_check};
use gklab::{Flavor, ProcessSpec};

fn main() -> gklab::Result<()> {
    let words = doubling_orbit(4, 3);
    for w in &words {
        println!("x = {:.17}  ({w:064b})", *w as f64 / 2f64.powi(64));
    }

    let spec = ProcessSpec::DoublingMap {
        frequencies: vec![1, 2],
    };
    let corr = exact_delta(&spec, 3)?;
    for (n, d) in corr.deltas.iter().enumerate() {
        println!("Δ({n}) = {d:?}");
    }
    println!("tail check: {}", truncation_tail_check(&corr)?.diagnostic);
    let chars = greenkubo_discrete_wz(&corr)?;
    println!("oracle correction = {:?}", chars.strat_area_correction());

    let est = estimate_characteristics(&spec, Flavor::Wz, 8192, 4000, 4, &EstimateOptions::default())?;
    println!("estimate          = {:?}", est.correction_hat);
    println!("standard errors   = {:?}", est.se_correction);
    Ok(())
}
