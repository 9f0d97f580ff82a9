use anyhow::Context;
use clap::{Parser, Subcommand};
use microfrac::assembly::State;
use microfrac::config::{build_setup, parse_config, CaseSetup, LinearSolverName, SolverModeName};
use microfrac::error::Error;
use microfrac::mesh::{generate_case_mesh, BenchmarkCase, MeshOptions};
use microfrac::output::{write_field_snapshot, LodiWriter};
use microfrac::solver::run_simulation;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "microfrac", version, about = "Micromorphic phase-field fracture solver (2D)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case described by a JSON config file.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the solve mode.
        #[arg(long, value_parser = ["problem4", "problem5"])]
        mode: Option<String>,
        /// Override the interaction scalar beta.
        #[arg(long)]
        beta: Option<f64>,
        /// Override the generator target edge length [mm].
        #[arg(long)]
        mesh_h: Option<f64>,
        /// Force the direct linear solver.
        #[arg(long)]
        direct: bool,
    },
    /// Generate a benchmark mesh and write it in the text format.
    Mesh {
        /// One of: sent, sens, lpanel, tpb.
        case: String,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
        /// Disable grading toward the crack band.
        #[arg(long)]
        uniform: bool,
    },
    /// Run the built-in oracle and property suites.
    Verify,
}

fn main() -> ExitCode {
    microfrac::init_thread_cap_from_env();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = err.downcast_ref::<Error>().map(exit_code_for).unwrap_or(1);
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::PhaseFieldOutOfRange(_) => 2,
        Error::Mesh(_) | Error::DegenerateElement { .. } => 3,
        Error::LocalSolve(_)
        | Error::LocalJacobian(_)
        | Error::LinearSolver(_)
        | Error::StepFailed { .. } => 4,
        Error::Io(_) => 5,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, mode, beta, mesh_h, direct } => {
            run_case(config, out, mode, beta, mesh_h, direct)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mesh { case, h, out, uniform } => {
            let case = parse_case(&case)?;
            let opts = MeshOptions { refine: !uniform, ..Default::default() };
            let mesh = generate_case_mesh(case, h, &opts)?;
            mesh.write_file(&out)?;
            println!(
                "wrote {} ({} nodes, {} elements, area {:.6} mm^2)",
                out.display(),
                mesh.num_nodes(),
                mesh.num_elements(),
                mesh.total_area()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let mut all_ok = true;
            for r in microfrac::verify::run_all() {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", r.name, r.detail);
                all_ok &= r.passed;
            }
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(4) })
        }
    }
}

fn parse_case(name: &str) -> anyhow::Result<BenchmarkCase> {
    match name.to_ascii_lowercase().as_str() {
        "sent" => Ok(BenchmarkCase::Sent),
        "sens" => Ok(BenchmarkCase::Sens),
        "lpanel" | "l-panel" => Ok(BenchmarkCase::LPanel),
        "tpb" => Ok(BenchmarkCase::Tpb),
        other => anyhow::bail!(Error::Config(format!("unknown case '{other}'"))),
    }
}

fn run_case(
    config_path: PathBuf,
    out: Option<PathBuf>,
    mode: Option<String>,
    beta: Option<f64>,
    mesh_h: Option<f64>,
    direct: bool,
) -> anyhow::Result<()> {
    let mut cfg =
        parse_config(&config_path).with_context(|| format!("loading {}", config_path.display()))?;
    if let Some(dir) = out {
        cfg.output.dir = dir.to_string_lossy().into_owned();
    }
    if let Some(m) = mode {
        cfg.solver.mode =
            if m == "problem4" { SolverModeName::Problem4 } else { SolverModeName::Problem5 };
    }
    if let Some(b) = beta {
        cfg.beta = b;
    }
    if let Some(h) = mesh_h {
        cfg.mesh.h = Some(h);
        cfg.mesh.file = None;
    }
    if direct {
        cfg.solver.linear_solver = LinearSolverName::Direct;
    }

    let setup = build_setup(&cfg)?;
    echo_setup(&setup);

    std::fs::create_dir_all(&setup.output_dir)?;
    let lodi_path = setup.output_dir.join("lodi.csv");
    let mut lodi = LodiWriter::create(&lodi_path)?;
    let snapshot_every = setup.snapshot_every;
    let out_dir = setup.output_dir.clone();
    let mesh = &setup.mesh;
    let mut last_state: Option<State> = None;

    let result = run_simulation(mesh, &setup.mats, &setup.solver, &setup.bcs, |record, state| {
        lodi.append(record)?;
        if snapshot_every > 0 && record.step % snapshot_every == 0 {
            let path = out_dir.join(format!("snapshot_{:05}.vtk", record.step));
            write_field_snapshot(mesh, state, &path)?;
        }
        last_state = Some(state.clone());
        Ok(())
    });

    if let Some(state) = &last_state {
        write_field_snapshot(mesh, state, &out_dir.join("final.vtk"))?;
    }
    match result {
        Ok(records) => {
            println!("run complete: {} steps, series at {}", records.len(), lodi_path.display());
            Ok(())
        }
        Err(e) => {
            eprintln!("run aborted; partial series preserved at {}", lodi_path.display());
            Err(e.into())
        }
    }
}

fn echo_setup(setup: &CaseSetup) {
    println!("case={:?} alpha = beta*Gc/l = {:.6e} [MPa]", setup.case, setup.alpha);
    if let Some(a1) = setup.a1 {
        println!("quasi-brittle a1 = {a1:.4}");
    }
    println!(
        "mesh: {} nodes, {} elements, thickness {} mm",
        setup.mesh.num_nodes(),
        setup.mesh.num_elements(),
        setup.mesh.thickness()
    );
}
