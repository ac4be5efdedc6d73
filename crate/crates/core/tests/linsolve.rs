use nalgebra::{DMatrix, DVector};
use rotor_activation::linsolve::{
    solve, CholeskyFactor, LinSolveError, Preconditioner, PreparedSolver, SolverMethod, SolverSettings,
};
use rotor_activation::sparse::CsrMatrix;

fn all_settings() -> Vec<SolverSettings> {
    let mut v = vec![SolverSettings::default(), SolverSettings::cg()];
    v.push(SolverSettings {
        preconditioner: Preconditioner::None,
        ..SolverSettings::cg()
    });
    v
}

#[test]
fn identity_returns_rhs() {
    let a = CsrMatrix::identity(7);
    let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
    for s in all_settings() {
        let x = solve(&a, &b, &s).unwrap().x;
        assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-14));
    }
}

#[test]
fn two_by_two_closed_form() {
    let a = CsrMatrix::from_dense(2, &[4.0, 1.0, 1.0, 3.0]);
    for s in all_settings() {
        let x = solve(&a, &[1.0, 2.0], &s).unwrap().x;
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
    }
}

/// Sparse SPD test matrix: a random band plus a dominant diagonal.
fn random_spd(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed;
    let mut rnd = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..(i + 6).min(n) {
            let v = rnd();
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i * n + j].abs()).sum();
        a[i * n + i] = off + 0.1 + rnd().abs();
    }
    a
}

#[test]
fn random_spd_matches_dense_oracle() {
    let n = 50;
    for seed in 1..4 {
        let dense = random_spd(n, seed);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 + seed as usize) % 11) as f64 - 5.0).collect();
        let oracle = DMatrix::from_row_slice(n, n, &dense)
            .lu()
            .solve(&DVector::from_vec(b.clone()))
            .unwrap();
        let a = CsrMatrix::from_dense(n, &dense);
        for s in all_settings() {
            let sol = solve(&a, &b, &s).unwrap();
            let err = sol.x.iter().zip(oracle.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(err < 1e-8 * oracle.amax(), "{:?}: {err}", s.method);
        }
    }
}

#[test]
fn prepared_solver_reuses_factor_and_warm_start() {
    let n = 30;
    let a = CsrMatrix::from_dense(n, &random_spd(n, 9));
    let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    for s in [SolverSettings::default(), SolverSettings::cg()] {
        let p = PreparedSolver::new(a.clone(), &s).unwrap();
        let x = p.solve(&b, None).unwrap();
        let warm = p.solve(&b, Some(&x.x)).unwrap();
        assert!(warm.rel_residual < 1e-10);
        if s.method == SolverMethod::Cg {
            assert!(warm.iterations <= 1);
        }
    }
}

#[test]
fn errors_are_reported() {
    let a = CsrMatrix::from_dense(2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(CholeskyFactor::new(&a), Err(LinSolveError::SingularMatrix(_))));
    let id = CsrMatrix::identity(3);
    assert!(matches!(
        solve(&id, &[1.0, 2.0], &SolverSettings::default()),
        Err(LinSolveError::DimensionMismatch { .. })
    ));
    let bad = SolverSettings {
        rel_tol: 0.0,
        ..SolverSettings::cg()
    };
    assert!(matches!(solve(&id, &[1.0; 3], &bad), Err(LinSolveError::InvalidSettings(_))));
    let n = 40;
    let a = CsrMatrix::from_dense(n, &random_spd(n, 4));
    let capped = SolverSettings {
        max_iter: Some(2),
        rel_tol: 1e-14,
        preconditioner: Preconditioner::None,
        ..SolverSettings::cg()
    };
    match solve(&a, &vec![1.0; n], &capped) {
        Err(LinSolveError::NotConverged { best, iterations, .. }) => {
            assert_eq!(best.len(), n);
            assert_eq!(iterations, 2);
        }
        other => panic!("expected NotConverged, got {other:?}"),
    }
}
