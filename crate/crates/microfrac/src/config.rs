//! JSON case configuration: schema, validation, and resolution into
//! runnable mesh/material/solver objects.

use crate::cases::case_bcs;
use crate::constitutive::{compute_a1, ElasticParams, FractureModel, ModelKind, Softening};
use crate::error::{Error, Result};
use crate::mesh::{generate_case_mesh, BenchmarkCase, Mesh, MeshOptions};
use crate::solver::{
    CaseBcs, GmresSettings, LinearSolverKind, Materials, ScheduleBlock, SolveMode, SolverConfig,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    #[serde(rename = "SENT")]
    Sent,
    #[serde(rename = "SENS")]
    Sens,
    #[serde(rename = "LPanel")]
    LPanel,
    #[serde(rename = "TPB")]
    Tpb,
    Custom,
}

impl CaseKind {
    pub fn benchmark(self) -> Option<BenchmarkCase> {
        match self {
            CaseKind::Sent => Some(BenchmarkCase::Sent),
            CaseKind::Sens => Some(BenchmarkCase::Sens),
            CaseKind::LPanel => Some(BenchmarkCase::LPanel),
            CaseKind::Tpb => Some(BenchmarkCase::Tpb),
            CaseKind::Custom => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Target edge length for the built-in generators [mm].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Path to a `microfrac-mesh v1` file instead of a generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(rename = "E0")]
    pub e0: f64,
    pub nu: f64,
    #[serde(rename = "Gc")]
    pub gc: f64,
    pub l: f64,
    pub model: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softening: Option<SofteningName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ft: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "AT1")]
    At1,
    #[serde(rename = "AT2")]
    At2,
    QuasiBrittle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SofteningName {
    Linear,
    Exponential,
    Cornelissen,
}

impl From<SofteningName> for Softening {
    fn from(s: SofteningName) -> Self {
        match s {
            SofteningName::Linear => Softening::Linear,
            SofteningName::Exponential => Softening::Exponential,
            SofteningName::Cornelissen => Softening::Cornelissen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub steps: usize,
    pub du: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_newton_iters: usize,
    pub mode: SolverModeName,
    pub linear_solver: LinearSolverName,
    pub gmres: GmresSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_newton_iters: 25,
            mode: SolverModeName::Problem5,
            linear_solver: LinearSolverName::Gmres,
            gmres: GmresSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverModeName {
    #[serde(rename = "problem4")]
    Problem4,
    #[serde(rename = "problem5")]
    Problem5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearSolverName {
    #[serde(rename = "gmres")]
    Gmres,
    #[serde(rename = "direct")]
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmresSection {
    pub restart: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub ilu_fill: u32,
}

impl Default for GmresSection {
    fn default() -> Self {
        let g = GmresSettings::default();
        Self { restart: g.restart, max_iters: g.max_iters, rel_tol: g.rel_tol, ilu_fill: g.ilu_fill }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Write a field snapshot every N steps (0 = final step only).
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), snapshot_every: 0 }
    }
}

/// Custom-case boundary conditions, one entry per node set and component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcsSection {
    /// (set, component 0|1) pairs held at zero.
    pub fixed: Vec<(String, usize)>,
    /// (set, component, multiple of du) driven entries.
    pub driven: Vec<(String, usize, f64)>,
    pub reaction_set: String,
    pub reaction_dir: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub case: CaseKind,
    pub mesh: MeshSection,
    pub material: MaterialSection,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bcs: Option<BcsSection>,
}

/// Everything resolved and ready to run.
pub struct CaseSetup {
    pub case: CaseKind,
    pub mesh: Mesh,
    pub mats: Materials,
    pub solver: SolverConfig,
    pub bcs: CaseBcs,
    pub output_dir: PathBuf,
    pub snapshot_every: usize,
    /// Interaction parameter echoed at startup.
    pub alpha: f64,
    /// Quasi-brittle a1, when applicable.
    pub a1: Option<f64>,
}

/// Parse a config file; schema violations are reported with their key path.
pub fn parse_config(path: &Path) -> Result<CaseConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<CaseConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: CaseConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &CaseConfig) -> Result<()> {
    let m = &cfg.material;
    if !(cfg.beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {}", cfg.beta)));
    }
    if let Some(t) = cfg.thickness {
        if !(t > 0.0) {
            return Err(Error::Config(format!("thickness must be positive, got {t}")));
        }
    }
    if cfg.schedule.is_empty() {
        return Err(Error::Config("schedule must contain at least one block".into()));
    }
    for (i, s) in cfg.schedule.iter().enumerate() {
        if s.steps == 0 {
            return Err(Error::Config(format!("schedule[{i}].steps must be >= 1")));
        }
        if !s.du.is_finite() {
            return Err(Error::Config(format!("schedule[{i}].du must be finite")));
        }
    }
    match m.model {
        ModelName::QuasiBrittle => {
            if m.softening.is_none() || m.ft.is_none() {
                return Err(Error::Config(
                    "material.model QuasiBrittle requires material.softening and material.ft".into(),
                ));
            }
        }
        ModelName::At1 | ModelName::At2 => {
            if m.softening.is_some() || m.ft.is_some() {
                return Err(Error::Config(
                    "material.softening/material.ft are only valid with the QuasiBrittle model"
                        .into(),
                ));
            }
        }
    }
    match (&cfg.mesh.h, &cfg.mesh.file) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("mesh.h and mesh.file are mutually exclusive".into()))
        }
        (None, None) => return Err(Error::Config("one of mesh.h or mesh.file is required".into())),
        _ => {}
    }
    if cfg.case == CaseKind::Custom {
        if cfg.mesh.file.is_none() {
            return Err(Error::Config("case Custom requires mesh.file".into()));
        }
        if cfg.bcs.is_none() {
            return Err(Error::Config("case Custom requires a bcs section".into()));
        }
    } else if cfg.bcs.is_some() {
        return Err(Error::Config("bcs section is only valid for case Custom".into()));
    }
    if !(cfg.solver.tol > 0.0) {
        return Err(Error::Config("solver.tol must be positive".into()));
    }
    if cfg.solver.gmres.ilu_fill != 0 {
        return Err(Error::Config(
            "solver.gmres.ilu_fill: only fill level 0 is implemented".into(),
        ));
    }
    Ok(())
}

/// Resolve a validated config into mesh, materials, solver settings, and
/// boundary conditions.
pub fn build_setup(cfg: &CaseConfig) -> Result<CaseSetup> {
    let elastic = ElasticParams::new(cfg.material.e0, cfg.material.nu)?;
    let fracture = match cfg.material.model {
        ModelName::At1 => FractureModel::at1(cfg.material.gc, cfg.material.l)?,
        ModelName::At2 => FractureModel::at2(cfg.material.gc, cfg.material.l)?,
        ModelName::QuasiBrittle => FractureModel::quasi_brittle(
            &elastic,
            cfg.material.gc,
            cfg.material.l,
            cfg.material.softening.unwrap().into(),
            cfg.material.ft.unwrap(),
        )?,
    };
    let mats = Materials::new(elastic, fracture, cfg.beta);
    let a1 = match fracture.kind {
        ModelKind::QuasiBrittle(_) => Some(compute_a1(
            &elastic,
            cfg.material.gc,
            cfg.material.l,
            cfg.material.ft.unwrap(),
        )?),
        _ => None,
    };

    let mut mesh = match (&cfg.mesh.file, cfg.case.benchmark()) {
        (Some(file), _) => Mesh::read_file(Path::new(file))?,
        (None, Some(case)) => {
            let mut opts = MeshOptions::default();
            if let Some(r) = &cfg.mesh.refine {
                if let Some(enabled) = r.enabled {
                    opts.refine = enabled;
                }
                if let Some(f) = r.factor {
                    opts.factor = f;
                }
                opts.band = r.band.map(|b| (b[0], b[1]));
            }
            generate_case_mesh(case, cfg.mesh.h.unwrap(), &opts)?
        }
        (None, None) => unreachable!("validated: Custom requires mesh.file"),
    };
    let thickness = cfg
        .thickness
        .unwrap_or_else(|| cfg.case.benchmark().map_or(1.0, |c| c.default_thickness()));
    mesh.set_thickness(thickness)?;

    let bcs = match cfg.case.benchmark() {
        Some(case) => case_bcs(case),
        None => {
            let b = cfg.bcs.as_ref().unwrap();
            CaseBcs {
                driven: b.driven.clone(),
                fixed: b.fixed.clone(),
                reaction_set: b.reaction_set.clone(),
                reaction_dir: b.reaction_dir,
            }
        }
    };
    // Fail on missing node sets here instead of mid-run.
    for (set, comp, _) in &bcs.driven {
        mesh.node_set(set)?;
        if *comp > 1 {
            return Err(Error::Config(format!("bcs component {comp} out of range")));
        }
    }
    for (set, _) in &bcs.fixed {
        mesh.node_set(set)?;
    }
    mesh.node_set(&bcs.reaction_set)?;

    let solver = SolverConfig {
        tol: cfg.solver.tol,
        max_newton_iters: cfg.solver.max_newton_iters,
        mode: match cfg.solver.mode {
            SolverModeName::Problem4 => SolveMode::Problem4,
            SolverModeName::Problem5 => SolveMode::Problem5,
        },
        linear_solver: match cfg.solver.linear_solver {
            LinearSolverName::Gmres => LinearSolverKind::Gmres,
            LinearSolverName::Direct => LinearSolverKind::Direct,
        },
        gmres: GmresSettings {
            restart: cfg.solver.gmres.restart,
            max_iters: cfg.solver.gmres.max_iters,
            rel_tol: cfg.solver.gmres.rel_tol,
            ilu_fill: cfg.solver.gmres.ilu_fill,
        },
        beta: cfg.beta,
        schedule: cfg
            .schedule
            .iter()
            .map(|s| ScheduleBlock { count: s.steps, du: s.du })
            .collect(),
        progress: true,
    };

    Ok(CaseSetup {
        case: cfg.case,
        mesh,
        mats,
        solver,
        bcs,
        output_dir: PathBuf::from(&cfg.output.dir),
        snapshot_every: cfg.output.snapshot_every,
        alpha: mats.alpha,
        a1,
    })
}
