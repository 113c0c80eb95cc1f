//! Exact algebraic identities, checked on random inputs.

use gklab::lift::{continuous_lift, iterated_sums, ito_lift, wz_lift, wz_lift_direct};
use gklab::noise::SampledPath;
use gklab::oracles::{
    greenkubo_continuous, greenkubo_discrete_ito, greenkubo_discrete_wz, ou_closed_form, ou_delta_samples,
    CorrelationSequence,
};
use gklab::tensor::{anti, expm, lyapunov_solve, mat_exp, sym};
use gklab::{Tensor2, Trajectory};
use proptest::prelude::*;

fn traj_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=4, 1usize..=60).prop_flat_map(|(d, n)| (Just(d), prop::collection::vec(-5.0f64..5.0, n * d)))
}

fn matrix(d: usize) -> impl Strategy<Value = Tensor2> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| {
        let rows: Vec<Vec<f64>> = v.chunks(d).map(<[f64]>::to_vec).collect();
        Tensor2::from_rows(&rows).unwrap()
    })
}

/// Random matrix shifted so every eigenvalue has real part at least `0.3`.
fn stable(d: usize) -> impl Strategy<Value = Tensor2> {
    matrix(d).prop_map(move |a| {
        let shift = (0.3 - a.min_eigenvalue_real_part()).max(0.0);
        &a + &Tensor2::identity(d).scale(shift)
    })
}

fn outer(u: &[f64], v: &[f64]) -> Tensor2 {
    let d = u.len();
    let mut t = Tensor2::zeros(d);
    for i in 0..d {
        for j in 0..d {
            t[(i, j)] = u[i] * v[j];
        }
    }
    t
}

fn close(a: &Tensor2, b: &Tensor2, rel: f64) -> bool {
    a.rel_diff(b, a.max_abs().max(b.max_abs()).max(1.0)) <= rel
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chen_identity((d, data) in traj_strategy(), cut in 0.0f64..=1.0) {
        let traj = Trajectory::from_flat(d, data);
        let n = traj.len();
        let m = (cut * n as f64) as usize;
        let (s, a) = iterated_sums(&traj, 0, n);
        let (s1, a1) = iterated_sums(&traj, 0, m);
        let (s2, a2) = iterated_sums(&traj, m, n);
        let joined = &(&a1 + &a2) + &outer(&s1, &s2);
        prop_assert!(close(&a, &joined, 1e-12));
        let sum: Vec<f64> = s1.iter().zip(&s2).map(|(x, y)| x + y).collect();
        prop_assert!(close(&Tensor2::diag(&s), &Tensor2::diag(&sum), 1e-12));
    }

    #[test]
    fn shuffle_identity((d, data) in traj_strategy()) {
        let traj = Trajectory::from_flat(d, data);
        let n = traj.len();
        let lift = ito_lift(&traj, n, 1.0).unwrap();
        let e = lift.endpoint.as_slice();
        let mut diag = Tensor2::zeros(d);
        for x in traj.steps() {
            diag = &diag + &outer(x, x);
        }
        let lhs = &lift.area + &lift.area.transpose();
        let rhs = &outer(e, e) - &diag.scale(1.0 / n as f64);
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let wz = wz_lift(&traj, n, 1.0).unwrap();
        prop_assert!(close(&sym(&wz.area), &outer(e, e).scale(0.5), 1e-12));
    }

    #[test]
    fn wz_matches_direct((d, data) in traj_strategy()) {
        let traj = Trajectory::from_flat(d, data);
        let n = traj.len();
        let a = wz_lift(&traj, n, 1.0).unwrap();
        let b = wz_lift_direct(&traj, n, 1.0).unwrap();
        prop_assert!(close(&a.area, &b.area, 1e-12));
        prop_assert!(close(&Tensor2::diag(a.endpoint.as_slice()), &Tensor2::diag(b.endpoint.as_slice()), 1e-12));
    }

    #[test]
    fn lyapunov_residual(m in (2usize..=4).prop_flat_map(stable)) {
        let d = m.dim();
        let s = lyapunov_solve(&m, &Tensor2::identity(d)).unwrap();
        let r = &(&m.matmul(&s) + &s.matmul(&m.transpose())) - &Tensor2::identity(d);
        prop_assert!(r.max_abs() <= 1e-12 * s.max_abs().max(1.0), "residual {}", r.max_abs());
        prop_assert!(s.is_symmetric(1e-12 * s.max_abs().max(1.0)));
        prop_assert!(s.min_sym_eigenvalue() > 0.0);
    }

    #[test]
    fn expm_semigroup(a in (1usize..=4).prop_flat_map(matrix), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let e_s = mat_exp(&a, s).unwrap();
        let e_t = mat_exp(&a, t).unwrap();
        let e_st = mat_exp(&a, s + t).unwrap();
        prop_assert!(close(&e_s.matmul(&e_t), &e_st, 1e-11));
    }

    #[test]
    fn expm_inverse(a in (1usize..=4).prop_flat_map(matrix)) {
        let d = a.dim();
        let prod = expm(&a).unwrap().matmul(&expm(&a.scale(-1.0)).unwrap());
        prop_assert!(close(&prod, &Tensor2::identity(d), 1e-11));
    }

    #[test]
    fn integration_by_parts_on_constant_paths(d in 1usize..=3, n in 2usize..=40, c in prop::collection::vec(-3.0f64..3.0, 3)) {
        // For constant Ξ the trapezoid rule is exact, and
        // ∫ Y ⊗ dY + (∫ Y ⊗ dY)ᵀ = Y(T) ⊗ Y(T) with no antisymmetric part.
        let values: Vec<f64> = (0..=n).flat_map(|_| c[..d].to_vec()).collect();
        let path = SampledPath::new(1.0, d, values, None).unwrap();
        let lift = continuous_lift(&path, n as f64, 1.0).unwrap();
        let e = lift.endpoint.as_slice();
        let lhs = &lift.area + &lift.area.transpose();
        prop_assert!(close(&lhs, &outer(e, e), 1e-12));
        prop_assert!(anti(&lift.area).max_abs() <= 1e-12 * lift.area.max_abs().max(1.0));
    }

    #[test]
    fn ito_and_wz_differ_by_quadratic_variation((d, data) in traj_strategy()) {
        let traj = Trajectory::from_flat(d, data);
        let n = traj.len();
        let ito = ito_lift(&traj, n, 1.0).unwrap();
        let wz = wz_lift(&traj, n, 1.0).unwrap();
        let mut qv = Tensor2::zeros(d);
        for x in traj.steps() {
            qv = &qv + &outer(x, x);
        }
        prop_assert!(close(&(&wz.area - &ito.area), &qv.scale(0.5 / n as f64), 1e-12));
    }

    #[test]
    fn greenkubo_identities(deltas in prop::collection::vec(matrix(2), 1..6), psd in matrix(2)) {
        // Δ(0) made symmetric positive semidefinite.
        let mut ds = deltas;
        ds.insert(0, psd.matmul(&psd.transpose()));
        let corr = CorrelationSequence::new(ds.clone(), true).unwrap();
        if let (Ok(ito), Ok(wz)) = (greenkubo_discrete_ito(&corr), greenkubo_discrete_wz(&corr)) {
            prop_assert!(close(&ito.sigma, &wz.sigma, 0.0));
            prop_assert!(wz.strat_area_correction().is_antisymmetric(1e-12));
            let mut tail = Tensor2::zeros(2);
            for d in &ds[1..] {
                tail = &tail + d;
            }
            prop_assert!(close(&wz.strat_area_correction(), &anti(&tail), 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadrature_matches_closed_form(m in (2usize..=3).prop_flat_map(stable)) {
        let sampled = ou_delta_samples(&m, 2e-3).unwrap();
        let quad = greenkubo_continuous(&sampled).unwrap();
        let exact = ou_closed_form(&m).unwrap();
        prop_assert!(close(&quad.gamma, &exact.chars.gamma, 1e-6), "{:?} vs {:?}", quad.gamma, exact.chars.gamma);
        prop_assert!(exact.chars.strat_area_correction().is_antisymmetric(1e-10));
        prop_assert!(close(&exact.correction, &exact.chars.strat_area_correction(), 1e-12));
    }
}
