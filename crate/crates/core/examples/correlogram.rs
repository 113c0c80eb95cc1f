//! Lag-averaged correlogram of one long trajectory against the exact `Δ(n)`.
//!
//!     cargo run --release --example correlogram

use gklab::estimators::{empirical_delta, empirical_delta_se};
use gklab::noise::exact_delta;
use gklab::{generate_discrete, ProcessSpec, Tensor2};

fn main() -> gklab::Result<()> {
    let spec = ProcessSpec::Ma1 {
        theta: Tensor2::from_rows(&[[0.0, 1.0], [0.0, 0.0]])?,
    };
    let traj = generate_discrete(&spec, 1_000_000, 8)?;
    let n_max = 3;
    let hat = empirical_delta(&traj, n_max)?;
    let se = empirical_delta_se(&traj, n_max, 100)?;
    let exact = exact_delta(&spec, n_max)?;
    println!("{:>2} {:>2} {:>2} {:>10} {:>9} {:>6}", "n", "i", "j", "Δ̂", "se", "Δ");
    for n in 0..=n_max {
        for i in 0..2 {
            for j in 0..2 {
                println!(
                    "{n:>2} {i:>2} {j:>2} {:>10.5} {:>9.5} {:>6}",
                    hat.deltas[n][(i, j)],
                    se[n][(i, j)],
                    exact.deltas[n][(i, j)]
                );
            }
        }
    }
    Ok(())
}
