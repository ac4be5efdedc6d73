use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rotor_activation::fd::{FdScheme, DEFAULT_FD_STEP};
use rotor_activation::fem::MaterialProperties;
use rotor_activation::heat::HeatSettings;
use rotor_activation::mesh::{read_gmsh, GmshOptions, Mesh};
use rotor_activation::ocp::{
    evaluate, fd_gradient, optimize, start_times, ControlSchedule, DirectModel, ForwardModel, ForwardResponse,
    GuessKind, OcpError, OcpProblem, ResponseModel,
};
use rotor_activation::sqp::{SqpSettings, SqpStatus};
use rotor_activation::thermoelastic::ElasticSettings;

fn mesh(name: &str) -> Arc<Mesh> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    Arc::new(read_gmsh(&path, &GmshOptions::default()).unwrap().promote_to_p2().unwrap())
}

fn direct(name: &str, problem: &OcpProblem) -> DirectModel {
    DirectModel::new(
        mesh(name),
        &MaterialProperties::default(),
        problem.n_steps,
        problem.t_f,
        &HeatSettings::default(),
        &ElasticSettings::default(),
    )
    .unwrap()
}

/// Stand-in forward model whose peak stress is `g(scaled controls)` at the
/// last knot.
struct Surrogate<G> {
    problem: OcpProblem,
    g: G,
    calls: AtomicUsize,
}

impl<G: Fn(&[f64]) -> Result<f64, String> + Sync> ForwardModel for Surrogate<G> {
    fn n_steps(&self) -> usize {
        self.problem.n_steps
    }
    fn t_f(&self) -> f64 {
        self.problem.t_f
    }
    fn t0(&self) -> f64 {
        0.0
    }
    fn simulate(&self, s: &ControlSchedule) -> Result<ForwardResponse, OcpError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let v = (self.g)(&self.problem.to_scaled(s)).map_err(OcpError::ForwardModelFailure)?;
        let n = s.n();
        let mut max_sigma = vec![0.0; n + 1];
        max_sigma[n] = v;
        Ok(ForwardResponse {
            max_sigma,
            argmax_node: vec![0; n + 1],
            max_t: vec![500.0; n + 1],
        })
    }
    fn evaluations(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

fn surrogate<G>(g: G) -> Surrogate<G> {
    Surrogate {
        problem: OcpProblem::default(),
        g,
        calls: AtomicUsize::new(0),
    }
}

#[test]
fn linear_ramp_guess_values() {
    let p = OcpProblem::default();
    let s = p.initial_guess(GuessKind::LinearRamp).unwrap();
    assert_eq!(s.n(), 20);
    for n in 1..=20 {
        assert!((s.t_e[n - 1] - 750.0 * n as f64 / 20.0).abs() < 1e-12);
        assert!((s.omega[n - 1] - 60.0 * n as f64 / 20.0).abs() < 1e-12);
    }
    let c = p.constraints(&s, 450.0);
    assert_eq!(c.ineq.len(), 2 + 20);
    // every step accelerates by 1/30 Hz/s
    for r in &c.ineq[2..] {
        let slope = p.omega_rate_limit - r * p.omega_scale / p.dt();
        assert!((slope - 1.0 / 30.0).abs() < 1e-12);
    }
}

#[test]
fn heat_first_guess_starts_rotation_late() {
    let p = OcpProblem::default();
    let s = p.initial_guess(GuessKind::HeatFirst).unwrap();
    let times = s.times();
    for k in 0..20 {
        let want = (60.0 - 0.1 * (1800.0 - times[k + 1])).max(0.0);
        assert!((s.omega[k] - want).abs() < 1e-9);
        assert_eq!(s.t_e[k], if k < 19 { 1000.0 } else { 750.0 });
    }
    assert_eq!(start_times(&s, 60.0), (Some(14), Some(1)));
    let ramp = p.initial_guess(GuessKind::LinearRamp).unwrap();
    assert_eq!(start_times(&ramp, 60.0), (Some(2), Some(10)));
}

#[test]
fn guesses_satisfy_the_control_constraints() {
    for symmetric_rate in [false, true] {
        let p = OcpProblem {
            symmetric_rate,
            ..Default::default()
        };
        for kind in [GuessKind::LinearRamp, GuessKind::HeatFirst] {
            let s = p.initial_guess(kind).unwrap();
            // the peak temperature is a model output; pass the target itself
            let c = p.constraints(&s, p.t_final);
            assert!(c.eq[0].abs() < 1e-12);
            assert!(c.ineq.iter().all(|&v| v >= -1e-12), "{kind:?}: {:?}", c.ineq);
            assert_eq!(p.bound_violation(&s), 0.0);
        }
    }
}

#[test]
fn infeasible_rate_limit_is_rejected() {
    let p = OcpProblem {
        omega_rate_limit: 0.02,
        ..Default::default()
    };
    assert!(matches!(p.validate(), Err(OcpError::InfeasibleRateLimit { .. })));
    assert!(matches!(
        p.initial_guess(GuessKind::HeatFirst),
        Err(OcpError::InfeasibleRateLimit { .. })
    ));
}

#[test]
fn quadratic_surrogate_gradient() {
    let m = surrogate(|x: &[f64]| Ok(x.iter().map(|v| v * v).sum()));
    let p = OcpProblem::default();
    let s = p.initial_guess(GuessKind::LinearRamp).unwrap();
    let base = evaluate(&m, &p, &s);
    let before = m.evaluations();
    let g = fd_gradient(&m, &p, &s, &base, DEFAULT_FD_STEP, FdScheme::Forward);
    assert_eq!(m.evaluations() - before, 40);
    assert_eq!(g.evaluations, 40);
    assert!(g.failed.is_empty());
    for (gi, xi) in g.objective.iter().zip(p.to_scaled(&s)) {
        let exact = 2.0 * xi;
        assert!((gi - exact).abs() < 1e-6 * exact.abs().max(1.0), "{gi} vs {exact}");
    }
    // the equality depends only on the last rotation
    assert!((g.eq[0][39] - 1.0).abs() < 1e-6);
    assert!(g.eq[0][..39].iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn constant_surrogate_has_zero_gradient() {
    let m = surrogate(|_: &[f64]| Ok(321.0));
    let p = OcpProblem::default();
    let s = p.initial_guess(GuessKind::HeatFirst).unwrap();
    let base = evaluate(&m, &p, &s);
    for scheme in [FdScheme::Forward, FdScheme::Central] {
        let g = fd_gradient(&m, &p, &s, &base, DEFAULT_FD_STEP, scheme);
        assert_eq!(g.evaluations, scheme.evaluations(40));
        assert!(g.objective.iter().all(|v| v.abs() < 1e-6));
    }
}

#[test]
fn failing_component_is_flagged() {
    let p = OcpProblem::default();
    let s = p.initial_guess(GuessKind::LinearRamp).unwrap();
    let x3 = p.to_scaled(&s)[3];
    let m = surrogate(move |x: &[f64]| {
        if x[3] != x3 {
            Err("diverged".into())
        } else {
            Ok(x.iter().sum())
        }
    });
    let base = evaluate(&m, &p, &s);
    assert!(base.failure.is_none());
    let g = fd_gradient(&m, &p, &s, &base, DEFAULT_FD_STEP, FdScheme::Forward);
    assert_eq!(g.failed, vec![3]);
    assert!(g.objective[3].is_nan());
    assert!((g.objective[4] - 1.0).abs() < 1e-6);

    let mut bad = s.clone();
    bad.t_e[3] += 1.0;
    let r = evaluate(&m, &p, &bad);
    assert_eq!(r.j, f64::INFINITY);
    assert!(r.failure.is_some() && !r.is_feasible(1.0));
}

#[test]
fn zero_schedule_has_no_stress_and_misses_targets() {
    let p = OcpProblem::default();
    let model = direct("disk_blade_coarse.msh", &p);
    let zero = ControlSchedule::constant(20, 1800.0, 0.0, 0.0);
    let r = evaluate(&model, &p, &zero);
    assert_eq!(r.j, 0.0);
    assert!(r.failure.is_none());
    assert!((r.constraints.eq[0] + 1.0).abs() < 1e-12);
    assert!(r.constraints.ineq[0] < 0.0 && r.constraints.ineq[1] < 0.0);
    assert!(!r.is_feasible(1e-6));
}

#[test]
fn evaluation_is_deterministic() {
    let p = OcpProblem::default();
    let model = direct("disk_blade_coarse.msh", &p);
    let s = p.initial_guess(GuessKind::HeatFirst).unwrap();
    let a = evaluate(&model, &p, &s);
    let b = evaluate(&model, &p, &s);
    assert_eq!(a.j.to_bits(), b.j.to_bits());
    assert_eq!(a.response, b.response);
    assert_eq!(model.evaluations(), 2);
}

#[test]
fn response_model_matches_direct_model() {
    let p = OcpProblem::default();
    let m = mesh("disk_blade_coarse.msh");
    let d = DirectModel::new(
        m.clone(),
        &MaterialProperties::default(),
        20,
        1800.0,
        &HeatSettings::default(),
        &ElasticSettings::default(),
    )
    .unwrap();
    let r = ResponseModel::from_direct(&d, m).unwrap();
    let mut k = 0u32;
    let mut next = || {
        k = k.wrapping_mul(1103515245).wrapping_add(12345);
        (k >> 8) as f64 / (1u32 << 24) as f64
    };
    let t_e: Vec<f64> = (0..20).map(|_| 1000.0 * next()).collect();
    let omega: Vec<f64> = (0..20).map(|_| 60.0 * next()).collect();
    for s in [
        ControlSchedule::new(t_e, omega, 1800.0).unwrap(),
        p.initial_guess(GuessKind::LinearRamp).unwrap(),
        p.initial_guess(GuessKind::HeatFirst).unwrap(),
    ] {
        let a = d.simulate(&s).unwrap();
        let b = r.simulate(&s).unwrap();
        for (x, y) in a.max_sigma.iter().zip(&b.max_sigma) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
        for (x, y) in a.max_t.iter().zip(&b.max_t) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }
}

#[test]
fn demo_forward_and_central_gradients_agree() {
    let p = OcpProblem::default();
    let m = mesh("disk_blade.msh");
    let d = DirectModel::new(
        m.clone(),
        &MaterialProperties::default(),
        20,
        1800.0,
        &HeatSettings::default(),
        &ElasticSettings::default(),
    )
    .unwrap();
    let model = ResponseModel::from_direct(&d, m).unwrap();
    let s = p.initial_guess(GuessKind::LinearRamp).unwrap();
    let base = evaluate(&model, &p, &s);
    let fwd = fd_gradient(&model, &p, &s, &base, DEFAULT_FD_STEP, FdScheme::Forward);
    let cen = fd_gradient(&model, &p, &s, &base, DEFAULT_FD_STEP, FdScheme::Central);
    assert_eq!((fwd.evaluations, cen.evaluations), (40, 80));
    let scale = cen.objective.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(scale > 0.0);
    let mut checked = 0;
    for (f, c) in fwd.objective.iter().zip(&cen.objective) {
        if c.abs() > 0.01 * scale {
            assert!((f - c).abs() <= 0.1 * c.abs(), "{f} vs {c}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn faster_rotation_never_lowers_the_peak() {
    let p = OcpProblem::default();
    let model = direct("disk_blade.msh", &p);
    let ramp = p.initial_guess(GuessKind::LinearRamp).unwrap();
    let cold = vec![MaterialProperties::default().t0; 20];
    let mut last = 0.0;
    for f in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let s = ControlSchedule::new(cold.clone(), ramp.omega.iter().map(|w| f * w).collect(), 1800.0).unwrap();
        let j = evaluate(&model, &p, &s).j;
        assert!(j > last, "J = {j} after {last} at factor {f}");
        last = j;
    }
    // with heating the centrifugal tension offsets part of the thermal peak
    let hot = |f: f64| {
        let s = ControlSchedule::new(ramp.t_e.clone(), ramp.omega.iter().map(|w| f * w).collect(), 1800.0).unwrap();
        evaluate(&model, &p, &s).j
    };
    assert!(hot(1.0) < hot(0.2));
}

#[test]
fn smoke_optimization_improves_on_the_ramp() {
    let p = OcpProblem::default();
    let m = mesh("disk_blade_coarse.msh");
    let d = DirectModel::new(
        m.clone(),
        &MaterialProperties::default(),
        20,
        1800.0,
        &HeatSettings::default(),
        &ElasticSettings::default(),
    )
    .unwrap();
    let model = ResponseModel::from_direct(&d, m).unwrap();
    let ramp = evaluate(&model, &p, &p.initial_guess(GuessKind::LinearRamp).unwrap());
    let out = optimize(
        &model,
        &p,
        &p.initial_guess(GuessKind::HeatFirst).unwrap(),
        &SqpSettings::default(),
    )
    .unwrap();
    assert_eq!(out.result.status, SqpStatus::Converged);
    assert!(out.record.is_feasible(1e-6), "{:?}", out.record.constraints);
    assert_eq!(p.bound_violation(&out.schedule), 0.0);
    assert!(out.record.j < 0.95 * ramp.j, "{} vs {}", out.record.j, ramp.j);
    // the optimum re-evaluated with the full model
    let check = evaluate(&d, &p, &out.schedule);
    assert!((check.j - out.record.j).abs() < 1e-9 * check.j);
    let history = &out.result.history;
    assert!(history.iter().filter(|h| h.accepted).all(|h| h.merit_end <= h.merit_start));
}
