use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use super::{ControlSchedule, OcpError};
use crate::fem::MaterialProperties;
use crate::heat::{HeatSettings, HeatSolver, ThermalTrajectory};
use crate::mesh::Mesh;
use crate::thermoelastic::{
    locate_max, von_mises, ElasticSettings, ElasticSolver, MechanicalTrajectory, SymTensor,
    PA_PER_MPA,
};

/// Per-knot responses of the coupled model, knots 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResponse {
    /// Peak von Mises stress over space, MPa.
    pub max_sigma: Vec<f64>,
    pub argmax_node: Vec<usize>,
    /// Peak temperature over space, °C.
    pub max_t: Vec<f64>,
}

impl ForwardResponse {
    pub fn objective(&self) -> f64 {
        self.max_sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_max_t(&self) -> f64 {
        *self.max_t.last().expect("nonempty response")
    }
}

/// A deterministic map from a schedule to the per-knot responses.
pub trait ForwardModel: Sync {
    fn n_steps(&self) -> usize;
    fn t_f(&self) -> f64;
    fn t0(&self) -> f64;
    fn simulate(&self, schedule: &ControlSchedule) -> Result<ForwardResponse, OcpError>;
    /// Number of `simulate` calls so far.
    fn evaluations(&self) -> usize;
}

fn check_grid(model: &dyn ForwardModel, s: &ControlSchedule) -> Result<(), OcpError> {
    s.validate()?;
    if s.n() != model.n_steps() || (s.t_f - model.t_f()).abs() > 1e-9 * model.t_f() {
        return Err(OcpError::InvalidSchedule(format!(
            "schedule has {} steps over {} s, model expects {} over {} s",
            s.n(),
            s.t_f,
            model.n_steps(),
            model.t_f()
        )));
    }
    Ok(())
}

/// Full heat and elasticity solves for every evaluation, with factorized
/// operators shared across evaluations.
#[derive(Debug)]
pub struct DirectModel {
    heat: HeatSolver,
    elastic: ElasticSolver,
    n_steps: usize,
    t_f: f64,
    t0: f64,
    count: AtomicUsize,
}

impl DirectModel {
    pub fn new(
        mesh: Arc<Mesh>,
        mat: &MaterialProperties,
        n_steps: usize,
        t_f: f64,
        heat: &HeatSettings,
        elastic: &ElasticSettings,
    ) -> Result<Self, OcpError> {
        if n_steps == 0 || !(t_f > 0.0) {
            return Err(OcpError::InvalidProblem("need N >= 1 and t_f > 0".into()));
        }
        if !mesh.is_p2() {
            return Err(OcpError::InvalidProblem("forward model needs a P2 mesh".into()));
        }
        let heat = HeatSolver::new(&mesh, mat, t_f / n_steps as f64, heat).map_err(OcpError::forward)?;
        let elastic = ElasticSolver::new(mesh, mat, elastic).map_err(OcpError::forward)?;
        Ok(Self {
            heat,
            elastic,
            n_steps,
            t_f,
            t0: mat.t0,
            count: AtomicUsize::new(0),
        })
    }

    pub fn heat_solver(&self) -> &HeatSolver {
        &self.heat
    }

    pub fn elastic_solver(&self) -> &ElasticSolver {
        &self.elastic
    }

    /// Both trajectories, for reporting.
    pub fn simulate_full(&self, s: &ControlSchedule) -> Result<(ThermalTrajectory, MechanicalTrajectory), OcpError> {
        check_grid(self, s)?;
        let thermal = self.heat.run(&s.t_e).map_err(OcpError::forward)?;
        let mut omega = vec![0.0];
        omega.extend(&s.omega);
        let mech = self.elastic.run(&thermal.fields, &omega).map_err(OcpError::forward)?;
        Ok((thermal, mech))
    }
}

impl ForwardModel for DirectModel {
    fn n_steps(&self) -> usize {
        self.n_steps
    }
    fn t_f(&self) -> f64 {
        self.t_f
    }
    fn t0(&self) -> f64 {
        self.t0
    }

    fn simulate(&self, s: &ControlSchedule) -> Result<ForwardResponse, OcpError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        let (thermal, mech) = self.simulate_full(s)?;
        Ok(ForwardResponse {
            max_sigma: mech.snapshots.iter().map(|x| x.max_value).collect(),
            argmax_node: mech.snapshots.iter().map(|x| x.max_node).collect(),
            max_t: thermal.max_t,
        })
    }

    fn evaluations(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

/// Superposition of precomputed unit responses.
///
/// The model is linear in the gas-temperature increments (T_e − T0) and in
/// ω², so with H_k the temperature k steps after a unit gas-temperature
/// pulse in the first step, S_k its stress field and C the stress for
/// ω = 1 rad/s at uniform T0,
///   T_n − T0 = Σ_{m≤n} (T_e[m] − T0) H_{n−m+1},
///   σ_n      = Σ_{m≤n} (T_e[m] − T0) S_{n−m+1} + ω_n² C.
#[derive(Debug)]
pub struct ResponseModel {
    mesh: Arc<Mesh>,
    heat_pulse: Vec<Vec<f64>>,
    stress_pulse: Vec<Vec<SymTensor>>,
    stress_rotation: Vec<SymTensor>,
    n_steps: usize,
    t_f: f64,
    t0: f64,
    count: AtomicUsize,
}

impl ResponseModel {
    pub fn new(
        mesh: Arc<Mesh>,
        mat: &MaterialProperties,
        n_steps: usize,
        t_f: f64,
        heat: &HeatSettings,
        elastic: &ElasticSettings,
    ) -> Result<Self, OcpError> {
        let direct = DirectModel::new(mesh.clone(), mat, n_steps, t_f, heat, elastic)?;
        Self::from_direct(&direct, mesh)
    }

    pub fn from_direct(direct: &DirectModel, mesh: Arc<Mesh>) -> Result<Self, OcpError> {
        let (n_steps, t0) = (direct.n_steps, direct.t0);
        let mut pulse = vec![t0 + 1.0];
        pulse.extend(std::iter::repeat_n(t0, n_steps - 1));
        let thermal = direct
            .heat
            .run_from(&vec![t0; direct.heat.n_nodes()], &pulse).map_err(OcpError::forward)?;
        let heat_pulse: Vec<Vec<f64>> = thermal.fields[1..]
            .iter()
            .map(|f| f.iter().map(|t| t - t0).collect())
            .collect();
        let el = &direct.elastic;
        let stress_pulse = thermal.fields[1..]
            .par_iter()
            .map(|field| {
                let u = el.displacement(field, 0.0).map_err(OcpError::forward)?;
                Ok(el.stress_tensors(&u, field))
            })
            .collect::<Result<Vec<_>, OcpError>>()?;
        let uniform = vec![t0; mesh.n_vertices()];
        let u = el.displacement(&uniform, 1.0).map_err(OcpError::forward)?;
        let stress_rotation = el.stress_tensors(&u, &uniform);
        Ok(Self {
            mesh,
            heat_pulse,
            stress_pulse,
            stress_rotation,
            n_steps,
            t_f: direct.t_f,
            t0,
            count: AtomicUsize::new(0),
        })
    }
}

impl ForwardModel for ResponseModel {
    fn n_steps(&self) -> usize {
        self.n_steps
    }
    fn t_f(&self) -> f64 {
        self.t_f
    }
    fn t0(&self) -> f64 {
        self.t0
    }

    fn simulate(&self, s: &ControlSchedule) -> Result<ForwardResponse, OcpError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        check_grid(self, s)?;
        let n = self.n_steps;
        let de: Vec<f64> = s.t_e.iter().map(|t| t - self.t0).collect();
        let tets = self.mesh.tets();
        let n_vals = self.stress_rotation.len();
        let knots: Vec<(f64, usize, f64)> = (1..=n)
            .into_par_iter()
            .map(|k| {
                let w2 = (2.0 * PI * s.omega[k - 1]).powi(2);
                let mut sigma: Vec<SymTensor> = self.stress_rotation.iter().map(|c| c.map(|v| v * w2)).collect();
                let mut temp = vec![0.0; self.heat_pulse[0].len()];
                for m in 1..=k {
                    let a = de[m - 1];
                    if a == 0.0 {
                        continue;
                    }
                    let sp = &self.stress_pulse[k - m];
                    for (acc, v) in sigma.iter_mut().zip(sp) {
                        for c in 0..6 {
                            acc[c] += a * v[c];
                        }
                    }
                    for (t, h) in temp.iter_mut().zip(&self.heat_pulse[k - m]) {
                        *t += a * h;
                    }
                }
                let vm: Vec<[f64; 4]> = (0..n_vals / 4)
                    .map(|e| std::array::from_fn(|v| von_mises(&sigma[4 * e + v]) / PA_PER_MPA))
                    .collect();
                let (mx, node) = locate_max(tets, &vm);
                let max_t = temp.iter().copied().fold(f64::NEG_INFINITY, f64::max) + self.t0;
                (mx, node, max_t)
            })
            .collect();
        let mut r = ForwardResponse {
            max_sigma: vec![0.0],
            argmax_node: vec![locate_max(tets, &vec![[0.0; 4]; tets.len()]).1],
            max_t: vec![self.t0],
        };
        for (mx, node, t) in knots {
            r.max_sigma.push(mx);
            r.argmax_node.push(node);
            r.max_t.push(t);
        }
        Ok(r)
    }

    fn evaluations(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}
