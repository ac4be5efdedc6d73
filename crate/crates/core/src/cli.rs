//! Batch commands: mesh statistics, forward simulation and optimization.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, ModelKind, RunConfig};
use crate::io::{write_vtk_file, VtkStep};
use crate::mesh::{Mesh, MeshStats};
use crate::ocp::{
    self, evaluate, ControlSchedule, DirectModel, EvaluationRecord, ForwardModel, ForwardResponse, GuessKind,
    OcpError, ResponseModel,
};
use crate::sqp::{write_history_csv, SqpStatus};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub enum ScheduleSource {
    Guess(GuessKind),
    /// T_e = T0 and ω = 0 throughout.
    Zero,
    Csv(PathBuf),
}

impl std::str::FromStr for ScheduleSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "zero" {
            Ok(ScheduleSource::Zero)
        } else {
            s.parse().map(ScheduleSource::Guess)
        }
    }
}

pub fn cmd_mesh_info(cfg: &RunConfig) -> Result<MeshStats, CliError> {
    Ok(cfg.mesh.load()?.stats())
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub schedule: ControlSchedule,
    pub record: EvaluationRecord,
    pub out_dir: PathBuf,
}

pub fn cmd_simulate(cfg: &RunConfig, source: &ScheduleSource) -> Result<SimulateReport, CliError> {
    let problem = cfg.problem();
    let schedule = match source {
        ScheduleSource::Guess(kind) => problem.initial_guess(*kind)?,
        ScheduleSource::Zero => {
            ControlSchedule::constant(cfg.time.n_steps, cfg.time.t_f, cfg.material.t0, 0.0)
        }
        ScheduleSource::Csv(path) => ControlSchedule::read_csv(File::open(path).map_err(io_err(path))?)?,
    };
    let out = prepare_output(cfg)?;
    let mesh = Arc::new(cfg.mesh.load()?.promote_to_p2().map_err(ConfigError::from)?);
    let direct = cfg.direct_model(mesh.clone())?;
    let response = write_trajectory(cfg, &direct, &mesh, &schedule, &out)?;
    let record = EvaluationRecord::from_response(&problem, &schedule, response);
    Ok(SimulateReport {
        schedule,
        record,
        out_dir: out,
    })
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub status: SqpStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub initial: EvaluationRecord,
    pub baseline: Option<EvaluationRecord>,
    pub optimum: EvaluationRecord,
    pub out_dir: PathBuf,
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<OptimizeReport, CliError> {
    let problem = cfg.problem();
    problem.validate()?;
    let guess = problem.initial_guess(cfg.optimize.guess)?;
    let out = prepare_output(cfg)?;
    let mesh = Arc::new(cfg.mesh.load()?.promote_to_p2().map_err(ConfigError::from)?);
    let direct = cfg.direct_model(mesh.clone())?;
    let response = match cfg.optimize.model {
        ModelKind::Response => Some(ResponseModel::from_direct(&direct, mesh.clone())?),
        ModelKind::Direct => None,
    };
    let model: &dyn ForwardModel = match &response {
        Some(r) => r,
        None => &direct,
    };

    let initial = evaluate(model, &problem, &guess);
    log::info!("initial guess {:?}: J = {:.3} MPa", cfg.optimize.guess, initial.j);
    let baseline = if cfg.optimize.baseline {
        let b = evaluate(model, &problem, &problem.initial_guess(GuessKind::LinearRamp)?);
        log::info!("linear-ramp baseline: J = {:.3} MPa", b.j);
        let path = out.join("baseline.csv");
        b.schedule
            .write_csv(cfg.material.t0, b.response.as_ref(), File::create(&path).map_err(io_err(&path))?)?;
        Some(b)
    } else {
        None
    };

    let outcome = ocp::optimize(model, &problem, &guess, &cfg.sqp)?;
    let path = out.join("iterations.csv");
    write_history_csv(
        &outcome.result.history,
        problem.stress_scale,
        File::create(&path).map_err(io_err(&path))?,
    )?;
    let final_response = write_trajectory(cfg, &direct, &mesh, &outcome.schedule, &out)?;
    let mut optimum = outcome.record;
    optimum.response = Some(final_response);
    Ok(OptimizeReport {
        status: outcome.result.status,
        iterations: outcome.result.iterations,
        evaluations: outcome.result.evaluations,
        initial,
        baseline,
        optimum,
        out_dir: out,
    })
}

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.output.dir.clone();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let echo = out.join("config.echo");
    fs::write(&echo, cfg.to_toml()).map_err(io_err(&echo))?;
    Ok(out)
}

/// Full simulation of `schedule`; writes `controls.csv` and, if enabled,
/// one VTK file per knot.
fn write_trajectory(
    cfg: &RunConfig,
    direct: &DirectModel,
    mesh: &Mesh,
    schedule: &ControlSchedule,
    out: &Path,
) -> Result<ForwardResponse, CliError> {
    let (thermal, mech) = direct.simulate_full(schedule)?;
    let response = ForwardResponse {
        max_sigma: mech.snapshots.iter().map(|s| s.max_value).collect(),
        argmax_node: mech.snapshots.iter().map(|s| s.max_node).collect(),
        max_t: thermal.max_t.clone(),
    };
    let path = out.join("controls.csv");
    schedule.write_csv(cfg.material.t0, Some(&response), File::create(&path).map_err(io_err(&path))?)?;
    if cfg.output.vtk {
        for (k, (field, snap)) in thermal.fields.iter().zip(&mech.snapshots).enumerate() {
            let nodal = snap.nodal_max(mesh);
            let path = out.join(format!("step_{k:04}.vtk"));
            write_vtk_file(
                mesh,
                &VtkStep {
                    time: thermal.times[k],
                    temperature: Some(field),
                    displacement: Some(&snap.displacement),
                    nodal_von_mises: Some(&nodal),
                    cell_von_mises: Some(&snap.sigma_v),
                },
                &path,
            )
            .map_err(io_err(&path))?;
        }
    }
    Ok(response)
}

/// Process exit code for an optimizer status.
pub fn exit_code(status: SqpStatus) -> i32 {
    match status {
        SqpStatus::Converged => 0,
        SqpStatus::NotConverged => 2,
        SqpStatus::NonsmoothStall => 3,
    }
}
