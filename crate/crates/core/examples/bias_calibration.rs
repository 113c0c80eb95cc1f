//! Halving study for the grid bias of the continuous lift on OU paths.
//!
//! The mean area error at step `h` is available in closed form, so the study
//! is deterministic: halve `h` until the ratio of successive errors settles,
//! then report `C = max |bias| / h` over the grid. Comparisons on the OU
//! model use `C·h` as the per-entry bias budget.
//!
//!     cargo run --release --example bias_calibration

use gklab::oracles::ou_grid_bias;
use gklab::Tensor2;

fn main() -> gklab::Result<()> {
    let drift = Tensor2::from_rows(&[[1.0, 1.0], [-1.0, 1.0]])?;
    let n = 1000.0;
    let mut c: f64 = 0.0;
    let mut prev: Option<f64> = None;
    println!("{:>10} {:>14} {:>12} {:>8}", "h", "max |bias|", "|bias| / h", "ratio");
    for k in 0..6 {
        let h = 0.08 / f64::from(1 << k);
        let bias = ou_grid_bias(&drift, n, h)?.max_abs();
        let ratio = prev.map_or(f64::NAN, |p| p / bias);
        println!("{h:>10.5} {bias:>14.4e} {:>12.4e} {ratio:>8.3}", bias / h);
        c = c.max(bias / h);
        prev = Some(bias);
    }
    println!("C = {c:.3e}");
    Ok(())
}
