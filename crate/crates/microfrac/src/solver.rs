//! Monolithic Newton loop with pseudo-time stepping.
//!
//! Each step applies the prescribed-displacement increments through a first
//! tangent solve, then iterates assemble / constrain / solve / update until
//! the residual ratio against the first post-increment residual drops below
//! tolerance. On acceptance the pointwise phase-field history is committed
//! and the reaction recorded.

use crate::assembly::{
    apply_dirichlet, dof_u, reaction_from_forces, AssembledSystem, Assembler, Constraint,
    SolveMode, State,
};
use crate::constitutive::{ElasticParams, FractureModel};
use crate::error::{Error, Result};
use crate::local_pf::extrapolate_d;
use crate::mesh::Mesh;
use crate::sparse::{direct_solve, gmres_ilu0};

/// Material bundle: elasticity, fracture model, and the interaction
/// parameter alpha = beta Gc / l.
#[derive(Debug, Clone, Copy)]
pub struct Materials {
    pub elastic: ElasticParams,
    pub fracture: FractureModel,
    pub alpha: f64,
}

impl Materials {
    pub fn new(elastic: ElasticParams, fracture: FractureModel, beta: f64) -> Self {
        let alpha = beta * fracture.gc / fracture.length_scale;
        Self { elastic, fracture, alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Restarted GMRES with ILU(0); falls back to the direct solver once on
    /// breakdown.
    Gmres,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresSettings {
    pub restart: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Fill level of the incomplete factorization; only ILU(0) is built.
    pub ilu_fill: u32,
}

impl Default for GmresSettings {
    fn default() -> Self {
        Self { restart: 80, max_iters: 4000, rel_tol: 1e-8, ilu_fill: 0 }
    }
}

/// One block of the loading schedule: `count` steps of increment `du` [mm].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleBlock {
    pub count: usize,
    pub du: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative residual tolerance of the Newton loop.
    pub tol: f64,
    pub max_newton_iters: usize,
    pub mode: SolveMode,
    pub linear_solver: LinearSolverKind,
    pub gmres: GmresSettings,
    /// Interaction scalar: alpha = beta Gc / l.
    pub beta: f64,
    pub schedule: Vec<ScheduleBlock>,
    /// Print `step=... iters=...` progress lines.
    pub progress: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_newton_iters: 25,
            mode: SolveMode::Problem5,
            linear_solver: LinearSolverKind::Gmres,
            gmres: GmresSettings::default(),
            beta: 100.0,
            schedule: Vec::new(),
            progress: true,
        }
    }
}

/// Node-set boundary conditions of a load case. Driven sets move by
/// `scale * du` each step; fixed sets stay pinned at zero.
#[derive(Debug, Clone)]
pub struct CaseBcs {
    /// (node set, displacement component, multiple of du).
    pub driven: Vec<(String, usize, f64)>,
    /// (node set, displacement component) held at zero.
    pub fixed: Vec<(String, usize)>,
    pub reaction_set: String,
    /// Direction in which the reaction is reported positive.
    pub reaction_dir: [f64; 2],
}

impl CaseBcs {
    pub fn constraints(&self, mesh: &Mesh, du: f64) -> Result<Vec<Constraint>> {
        let mut out = Vec::new();
        for (set, comp, scale) in &self.driven {
            for &n in mesh.node_set(set)? {
                out.push(Constraint { dof: dof_u(n, *comp), value: scale * du });
            }
        }
        for (set, comp) in &self.fixed {
            for &n in mesh.node_set(set)? {
                out.push(Constraint { dof: dof_u(n, *comp), value: 0.0 });
            }
        }
        Ok(out)
    }
}

/// Converged-step summary.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    /// Accumulated prescribed displacement [mm].
    pub displacement: f64,
    /// Reaction on the driven set [N], positive along the load direction.
    pub reaction: f64,
    pub iterations: usize,
    pub residual_ratio: f64,
}

/// Internals returned by one Newton step.
pub struct StepOutcome {
    pub iterations: usize,
    pub residual_ratio: f64,
    /// Internal forces of the converged assembly, for reactions.
    pub internal_forces: Vec<f64>,
    /// Residual-ratio history of the step.
    pub ratios: Vec<f64>,
}

/// Solve the constrained system, honoring the configured solver; GMRES
/// breakdown triggers a single direct retry.
pub fn linear_solve(sys: &AssembledSystem, config: &SolverConfig) -> Result<Vec<f64>> {
    match config.linear_solver {
        LinearSolverKind::Direct => direct_solve(&sys.matrix, &sys.residual),
        LinearSolverKind::Gmres => {
            let g = &config.gmres;
            match gmres_ilu0(&sys.matrix, &sys.residual, g.restart, g.max_iters, g.rel_tol) {
                Ok(x) => Ok(x),
                Err(first) => {
                    eprintln!("warning: {first}; retrying with the direct solver");
                    direct_solve(&sys.matrix, &sys.residual)
                }
            }
        }
    }
}

fn update_state(state: &mut State, delta: &[f64], n_nodes: usize) {
    for i in 0..2 * n_nodes {
        state.u[i] += delta[i];
    }
    for i in 0..n_nodes {
        state.d[i] += delta[2 * n_nodes + i];
    }
}

/// Relative floor below which a residual counts as zero; scaled by the
/// gross force magnitude so cancellation noise converges immediately.
fn residual_floor(force_scale: f64) -> f64 {
    1e-12 * force_scale
}

/// One pseudo-time step: prescribed increments enter the first solve's
/// right-hand side, convergence is measured against the first residual
/// assembled after that solve, and the phase-field history is committed on
/// acceptance.
pub fn newton_step(
    state: &mut State,
    mesh: &Mesh,
    assembler: &Assembler,
    mats: &Materials,
    config: &SolverConfig,
    constraints: &[Constraint],
    d_hat: &[f64],
) -> Result<StepOutcome> {
    let n_nodes = mesh.num_nodes();
    let step_no = state.time_step + 1;

    // Iteration 1: tangent at the incoming state, increments on the RHS.
    let mut sys = assembler.assemble(mesh, state, config.mode, mats, d_hat)?;
    apply_dirichlet(&mut sys, constraints)?;
    let delta = linear_solve(&sys, config)?;
    update_state(state, &delta, n_nodes);
    let mut iterations = 1usize;

    let zero_constraints: Vec<Constraint> =
        constraints.iter().map(|c| Constraint { dof: c.dof, value: 0.0 }).collect();

    let mut reference: Option<f64> = None;
    let mut ratios = Vec::new();
    loop {
        let mut sys = assembler.assemble(mesh, state, config.mode, mats, d_hat)?;
        let r_norm = {
            // Free-DOF norm: constrained rows carry increments, not residuals.
            let mut fixed = vec![false; sys.residual.len()];
            for c in constraints {
                fixed[c.dof] = true;
            }
            sys.residual
                .iter()
                .zip(&fixed)
                .filter(|(_, &f)| !f)
                .map(|(r, _)| r * r)
                .sum::<f64>()
                .sqrt()
        };
        let floor = residual_floor(sys.force_scale);
        let reference_norm = *reference.get_or_insert(r_norm);
        let ratio = if reference_norm <= floor { 0.0 } else { r_norm / reference_norm };
        ratios.push(ratio);

        if r_norm <= floor || ratio < config.tol {
            state.phi_old.copy_from_slice(&sys.element_phi);
            state.psi.copy_from_slice(&sys.element_psi);
            return Ok(StepOutcome {
                iterations,
                residual_ratio: ratio,
                internal_forces: sys.internal_forces,
                ratios,
            });
        }
        if iterations >= config.max_newton_iters {
            return Err(Error::StepFailed { step: step_no, iters: iterations, ratio });
        }
        apply_dirichlet(&mut sys, &zero_constraints)?;
        let delta = linear_solve(&sys, config)?;
        update_state(state, &delta, n_nodes);
        iterations += 1;
    }
}

/// Run the full loading schedule. `on_step` fires after every accepted step
/// (for incremental output); a step failure aborts the run with the partial
/// series already flushed through the callback.
pub fn run_simulation(
    mesh: &Mesh,
    mats: &Materials,
    config: &SolverConfig,
    bcs: &CaseBcs,
    mut on_step: impl FnMut(&StepRecord, &State) -> Result<()>,
) -> Result<Vec<StepRecord>> {
    if config.schedule.is_empty() {
        return Err(Error::Config("empty load schedule".into()));
    }
    let assembler = Assembler::new(mesh)?;
    let mut state = State::new(mesh);
    let reaction_set: Vec<usize> = mesh.node_set(&bcs.reaction_set)?.to_vec();
    if reaction_set.is_empty() {
        return Err(Error::Mesh(format!("reaction node set '{}' is empty", bcs.reaction_set)));
    }

    let mut records = Vec::new();
    // Last two converged micromorphic fields and the previous increment
    // drive the extrapolation; before two steps exist d_hat = d.
    let mut d_prev: Option<Vec<f64>> = None;
    let mut d_curr = state.d.clone();
    let mut du_prev = 0.0;
    let mut step_no = 0usize;

    for block in &config.schedule {
        for _ in 0..block.count {
            step_no += 1;
            let du = block.du;
            let ratio = match (&d_prev, du_prev != 0.0) {
                (Some(_), true) => du / du_prev,
                _ => 0.0,
            };
            let d_hat = match &d_prev {
                Some(prev) => extrapolate_d(prev, &d_curr, ratio)?,
                None => d_curr.clone(),
            };
            let constraints = bcs.constraints(mesh, du)?;
            let outcome =
                newton_step(&mut state, mesh, &assembler, mats, config, &constraints, &d_hat)?;

            state.time_step = step_no;
            state.du_applied += du;
            let reaction =
                reaction_from_forces(&outcome.internal_forces, &reaction_set, bcs.reaction_dir);
            let record = StepRecord {
                step: step_no,
                displacement: state.du_applied,
                reaction,
                iterations: outcome.iterations,
                residual_ratio: outcome.residual_ratio,
            };
            if config.progress {
                println!(
                    "step={} iters={} ratio={:.3e} u={:.6e} P={:.6e}",
                    record.step,
                    record.iterations,
                    record.residual_ratio,
                    record.displacement,
                    record.reaction / 1000.0
                );
            }
            on_step(&record, &state)?;
            records.push(record);

            d_prev = Some(std::mem::replace(&mut d_curr, state.d.clone()));
            du_prev = du;
        }
    }
    Ok(records)
}

/// Convenience wrapper returning the final state alongside the series.
pub fn run_simulation_with_state(
    mesh: &Mesh,
    mats: &Materials,
    config: &SolverConfig,
    bcs: &CaseBcs,
) -> Result<(Vec<StepRecord>, State)> {
    let mut latest: Option<State> = None;
    let records = run_simulation(mesh, mats, config, bcs, |_, s| {
        latest = Some(s.clone());
        Ok(())
    })?;
    let state = latest.ok_or_else(|| Error::Config("schedule produced no steps".into()))?;
    Ok((records, state))
}
