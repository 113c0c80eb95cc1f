//! `E 𝕊_N(1)` approaching `Γ` as `N` grows, with common random numbers
//! across the grid.
//!
//!     cargo run --release --example convergence_study

use gklab::estimators::{convergence_study, EstimateOptions};
use gklab::{Flavor, ProcessSpec, Tensor2};

fn main() -> gklab::Result<()> {
    let spec = ProcessSpec::Ma1 {
        theta: Tensor2::from_rows(&[[0.0, 1.0], [0.0, 0.0]])?,
    };
    let grid: Vec<usize> = (4..=12).map(|k| 1 << k).collect();
    let rows = convergence_study(&spec, Flavor::Ito, &grid, 2000, 9, &EstimateOptions::default())?;
    println!("{:>6} {:>10} {:>9} {:>10}", "N", "γ̂[1,0]", "se", "1 - 1/N");
    for row in rows {
        println!(
            "{:>6} {:>10.5} {:>9.5} {:>10.5}",
            row.scale,
            row.gamma_hat[(1, 0)],
            row.se_gamma[(1, 0)],
            1.0 - 1.0 / row.scale as f64
        );
    }
    Ok(())
}
