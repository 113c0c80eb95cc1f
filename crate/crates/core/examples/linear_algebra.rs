//! The numerical kernels: matrix exponential, Lyapunov solve, Cholesky.
//!
//!     cargo run --release --example linear_algebra

use gklab::tensor::{anti, cholesky_psd, lyapunov_solve, mat_exp, outer, sym};
use gklab::{Tensor2, VectorD};

fn main() -> gklab::Result<()> {
    let rot = Tensor2::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])?;
    println!("exp(-π/2 J) = {:?}", mat_exp(&rot, std::f64::consts::FRAC_PI_2)?);

    let m = Tensor2::from_rows(&[[1.0, 1.0], [-1.0, 1.0]])?;
    let s = lyapunov_solve(&m, &Tensor2::identity(2))?;
    let residual = &(&m.matmul(&s) + &s.matmul(&m.transpose())) - &Tensor2::identity(2);
    println!("Σ_OU = {s:?}, residual {:.1e}", residual.max_abs());

    let c = Tensor2::from_rows(&[[4.0, 2.0], [2.0, 1.0]])?;
    let l = cholesky_psd(&c)?;
    println!("L = {l:?}, L Lᵀ = {:?}", l.matmul(&l.transpose()));

    let u = VectorD::new(vec![1.0, 2.0])?;
    let v = VectorD::new(vec![3.0, -1.0])?;
    let t = outer(&u, &v)?;
    println!("u ⊗ v = {t:?} = Sym {:?} + Anti {:?}", sym(&t), anti(&t));
    Ok(())
}
