//! TOML run configuration. Every field has a default; unknown keys are
//! rejected. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::MaterialProperties;
use crate::heat::HeatSettings;
use crate::mesh::{
    generate_annular_sector, generate_box, read_gmsh, GmshOptions, Mesh, MeshError, PatchLabel, SectorSpec,
};
use crate::ocp::{DirectModel, ForwardModel, GuessKind, OcpError, OcpProblem, ResponseModel};
use crate::sqp::SqpSettings;
use crate::thermoelastic::ElasticSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxMesh {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshPreset {
    Demo,
    DemoCoarse,
}

/// Exactly one of `file`, `box`, `sector` or `preset`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub file: Option<PathBuf>,
    #[serde(rename = "box")]
    pub box_mesh: Option<BoxMesh>,
    pub sector: Option<SectorSpec>,
    pub preset: Option<MeshPreset>,
    /// Physical group → patch label, e.g. `"3" = "sym_x"`.
    pub groups: BTreeMap<String, PatchLabel>,
    /// Reject untagged boundary triangles in mesh files.
    pub strict: bool,
}

impl MeshConfig {
    fn group_map(&self) -> Result<BTreeMap<i32, PatchLabel>, ConfigError> {
        self.groups
            .iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<i32>()
                    .map(|t| (t, *v))
                    .map_err(|_| ConfigError::Invalid(format!("mesh.groups key `{k}` is not an integer")))
            })
            .collect()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let n = [
            self.file.is_some(),
            self.box_mesh.is_some(),
            self.sector.is_some(),
            self.preset.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if n != 1 {
            return Err(ConfigError::Invalid(
                "[mesh] needs exactly one of file, box, sector, preset".into(),
            ));
        }
        self.group_map().map(|_| ())
    }

    /// Loads or generates the linear mesh and applies the group mapping.
    pub fn load(&self) -> Result<Mesh, ConfigError> {
        self.validate()?;
        let groups = self.group_map()?;
        let mut mesh = if let Some(path) = &self.file {
            read_gmsh(
                path,
                &GmshOptions {
                    mapping: groups.clone(),
                    strict: self.strict,
                },
            )?
        } else if let Some(b) = &self.box_mesh {
            generate_box(b.lx, b.ly, b.lz, b.nx, b.ny, b.nz)?
        } else if let Some(s) = &self.sector {
            generate_annular_sector(s)?
        } else {
            match self.preset.expect("validated") {
                MeshPreset::Demo => generate_annular_sector(&SectorSpec::demo())?,
                MeshPreset::DemoCoarse => generate_annular_sector(&SectorSpec::demo_coarse())?,
            }
        };
        if self.file.is_none() {
            for (tag, label) in groups {
                mesh.set_patch_label(tag, label)?;
            }
        }
        for w in mesh.warnings() {
            log::warn!("mesh: {w}");
        }
        Ok(mesh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub t_f: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            n_steps: 20,
            t_f: 1800.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Precomputed unit responses combined by superposition.
    #[default]
    Response,
    /// Full heat and elasticity solves per evaluation.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub guess: GuessKind,
    pub model: ModelKind,
    /// Also evaluate the linear-ramp schedule for comparison.
    pub baseline: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            guess: GuessKind::HeatFirst,
            model: ModelKind::Response,
            baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `step_####.vtk` files.
    pub vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            vtk: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub material: MaterialProperties,
    pub time: TimeGrid,
    /// `n_steps` and `t_f` come from `[time]`.
    pub ocp: OcpSection,
    pub heat: HeatSettings,
    pub elastic: ElasticSettings,
    pub sqp: SqpSettings,
    pub optimize: OptimizeConfig,
    pub output: OutputConfig,
}

/// The OCP block without the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpSection {
    pub t_e_min: f64,
    pub t_e_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub t_e_final: f64,
    pub omega_final: f64,
    pub t_final: f64,
    pub omega_rate_limit: f64,
    pub symmetric_rate: bool,
    pub stress_scale: f64,
    pub temperature_scale: f64,
    pub omega_scale: f64,
    pub smooth_max: Option<f64>,
}

impl Default for OcpSection {
    fn default() -> Self {
        let p = OcpProblem::default();
        Self {
            t_e_min: p.t_e_min,
            t_e_max: p.t_e_max,
            omega_min: p.omega_min,
            omega_max: p.omega_max,
            t_e_final: p.t_e_final,
            omega_final: p.omega_final,
            t_final: p.t_final,
            omega_rate_limit: p.omega_rate_limit,
            symmetric_rate: p.symmetric_rate,
            stress_scale: p.stress_scale,
            temperature_scale: p.temperature_scale,
            omega_scale: p.omega_scale,
            smooth_max: p.smooth_max,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates a file, resolving relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(f) = &cfg.mesh.file {
            if f.is_relative() {
                cfg.mesh.file = Some(base.join(f));
            }
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.mesh.validate()?;
        self.material.validate().map_err(|e| invalid(e.to_string()))?;
        self.heat.solver.validate().map_err(|e| invalid(format!("heat.solver: {e}")))?;
        self.elastic.solver.validate().map_err(|e| invalid(format!("elastic.solver: {e}")))?;
        self.sqp.validate().map_err(|e| invalid(e.to_string()))?;
        // the rate limit is checked when a command needs it
        match self.problem().validate() {
            Ok(()) | Err(OcpError::InfeasibleRateLimit { .. }) => Ok(()),
            Err(e) => Err(invalid(e.to_string())),
        }
    }

    pub fn problem(&self) -> OcpProblem {
        let o = &self.ocp;
        OcpProblem {
            n_steps: self.time.n_steps,
            t_f: self.time.t_f,
            t_e_min: o.t_e_min,
            t_e_max: o.t_e_max,
            omega_min: o.omega_min,
            omega_max: o.omega_max,
            t_e_final: o.t_e_final,
            omega_final: o.omega_final,
            t_final: o.t_final,
            omega_rate_limit: o.omega_rate_limit,
            symmetric_rate: o.symmetric_rate,
            stress_scale: o.stress_scale,
            temperature_scale: o.temperature_scale,
            omega_scale: o.omega_scale,
            smooth_max: o.smooth_max,
        }
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn direct_model(&self, mesh: Arc<Mesh>) -> Result<DirectModel, OcpError> {
        DirectModel::new(mesh, &self.material, self.time.n_steps, self.time.t_f, &self.heat, &self.elastic)
    }

    pub fn forward_model(&self, mesh: Arc<Mesh>) -> Result<Box<dyn ForwardModel>, OcpError> {
        let direct = self.direct_model(mesh.clone())?;
        Ok(match self.optimize.model {
            ModelKind::Direct => Box::new(direct),
            ModelKind::Response => Box::new(ResponseModel::from_direct(&direct, mesh)?),
        })
    }
}
