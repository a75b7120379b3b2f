use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cutoff_fd::harness::{
    anisotropic_run, convergence_study, regularization_comparison, write_field_series, CutoffMode,
    ExperimentConfig, MetadataWriter,
};
use cutoff_fd::mesh::{l2_norm, max_undershoot, sig17};
use cutoff_fd::par::Execution;
use cutoff_fd::problems::lubrication::{run_lubrication_with, LubricationOptions};
use cutoff_fd::problems::{LubricationRun, LubricationSpec, MobilitySpec};
use cutoff_fd::sparse::{SolverConfig, SolverKind};
use cutoff_fd::stepper::{dirk_diagnostics, Integrator, ProblemSpec, StepperConfig};
use cutoff_fd::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cutoff-fd",
    version,
    about = "Cutoff finite-difference experiments",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anisotropic diffusion convergence study over several grids.
    AnisoConvergence(Opts),
    /// Single anisotropic run with trace and final fields.
    AnisoRun(Opts),
    /// One-dimensional thin-film touchdown run.
    Lub1d(Opts),
    /// Two-dimensional thin-film run.
    Lub2d(Opts),
    /// Unregularized versus regularized thin-film runs.
    RegCompare(Opts),
    /// Max-norm scheme diagnostics at dt and dt/2.
    Diagnostics(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum CutoffArg {
    Off,
    Nonneg,
    Delta,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Sdirk3,
    BackwardEuler,
    CrankNicolson,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Banded,
    Krylov,
}

#[derive(Args, Clone)]
struct Opts {
    /// Cells per direction; a comma-separated list for convergence studies.
    #[arg(short = 'J', long = "grid", value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long, value_enum, default_value = "nonneg")]
    cutoff: CutoffArg,
    /// Coefficient `c` of the floor `δ = c·dt·h²` in delta mode.
    #[arg(long = "delta-coefficient", default_value_t = 1.0)]
    delta_coefficient: f64,
    /// Mobility regularization; for reg-compare the regularized value.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated times at which full fields are saved.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Anisotropic problem with convection `b = [1000, 1000]`.
    #[arg(long)]
    convection: bool,
    #[arg(long, value_enum, default_value = "sdirk3")]
    integrator: IntegratorArg,
    #[arg(long, value_enum, default_value = "auto")]
    solver: SolverArg,
    /// Run independent work sequentially.
    #[arg(long)]
    sequential: bool,
    /// Touching threshold for singularity tracking.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Steps between touching-set samples.
    #[arg(long = "snapshot-every", default_value_t = 10)]
    snapshot_every: usize,
}

impl Opts {
    fn integrator(&self) -> Integrator {
        match self.integrator {
            IntegratorArg::Sdirk3 => Integrator::Sdirk3,
            IntegratorArg::BackwardEuler => Integrator::Theta(1.0),
            IntegratorArg::CrankNicolson => Integrator::Theta(0.5),
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            kind: match self.solver {
                SolverArg::Auto => SolverKind::Auto,
                SolverArg::Banded => SolverKind::Banded,
                SolverArg::Krylov => SolverKind::Krylov,
            },
            ..SolverConfig::default()
        }
    }

    fn cutoff_mode(&self) -> CutoffMode {
        match self.cutoff {
            CutoffArg::Off => CutoffMode::Off,
            CutoffArg::Nonneg => CutoffMode::Nonneg,
            CutoffArg::Delta => CutoffMode::DeltaRule,
        }
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn single_grid(&self, default: usize) -> Result<usize> {
        match self.grid.as_slice() {
            [] => Ok(default),
            [j] => Ok(*j),
            _ => Err(Error::InvalidParameter(
                "this command takes a single grid size".into(),
            )),
        }
    }

    fn experiment(
        &self,
        tag: &str,
        default_grid: &[usize],
        dt: f64,
        t_end: f64,
    ) -> ExperimentConfig {
        ExperimentConfig {
            tag: tag.into(),
            resolutions: if self.grid.is_empty() {
                default_grid.to_vec()
            } else {
                self.grid.clone()
            },
            dt: self.dt.unwrap_or(dt),
            t_end: self.t_end.unwrap_or(t_end),
            cutoff: self.cutoff_mode(),
            delta_coefficient: self.delta_coefficient,
            epsilon: self.epsilon.unwrap_or(0.0),
            convection: self.convection,
            integrator: self.integrator(),
            solver: self.solver(),
            out_dir: self.out.clone(),
            snapshot_times: self.snapshots.clone(),
            execution: self.execution(),
        }
    }

    fn metadata(&self, exp: &ExperimentConfig) -> MetadataWriter {
        let mut m = MetadataWriter::new();
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.extend(exp.metadata());
        m.set("seed", self.seed);
        m.set("parallel_feature", cfg!(feature = "parallel"));
        m
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn default_snapshots(t_end: f64) -> Vec<f64> {
    (1..=10).map(|k| t_end * k as f64 / 10.0).collect()
}

fn aniso_convergence(o: &Opts) -> Result<()> {
    let exp = o.experiment("aniso-convergence", &[10, 20, 40, 80], 1e-2, 1.0);
    let report = convergence_study(&exp)?;
    println!("J,h,l2_error,max_undershoot");
    for r in &report.rows {
        println!(
            "{},{},{},{}",
            r.j,
            sig17(r.h),
            sig17(r.l2_error),
            sig17(r.max_undershoot)
        );
    }
    println!("l2_slope={}", sig17(report.l2_slope));
    println!(
        "undershoot_slope={}",
        report
            .undershoot_slope
            .map(sig17)
            .unwrap_or_else(|| "none".into())
    );
    if let Some(dir) = &o.out {
        let mut m = o.metadata(&exp);
        m.extend(exp.anisotropic(exp.resolutions[0])?.metadata());
        m.set("grid", "per-resolution");
        m.set("slope_fit", "least-squares-log-log-all-resolutions");
        m.write_to(dir)?;
    }
    Ok(())
}

fn aniso_run(o: &Opts) -> Result<()> {
    let j = o.single_grid(80)?;
    let mut exp = o.experiment("aniso-run", &[j], 1e-2, 1.0);
    exp.resolutions = vec![j];
    exp.validate()?;
    let (spec, out) = anisotropic_run(&exp, j)?;
    let exact = spec.exact(exp.t_end).expect("manufactured solution");
    let l2 = l2_norm(&out.state.sub(&exact)?)?;
    println!("l2_error={}", sig17(l2));
    println!("u_min_pre={}", sig17(out.pre_cutoff.min()));
    println!("max_undershoot={}", sig17(max_undershoot(&out.pre_cutoff)?));
    if let Some(dir) = &o.out {
        out.trace.write_csv(create(dir, "trace.csv")?)?;
        out.state.write_csv(create(dir, "final.csv")?)?;
        out.pre_cutoff.write_csv(create(dir, "final_pre.csv")?)?;
        if !out.trace.snapshots.is_empty() {
            write_field_series(create(dir, "snapshots.csv")?, &out.trace.snapshots)?;
        }
        let mut m = o.metadata(&exp);
        m.extend(spec.metadata());
        m.write_to(dir)?;
    }
    Ok(())
}

fn lubrication_config(o: &Opts, t_end_default: f64, h: f64) -> Result<StepperConfig> {
    let t_end = o.t_end.unwrap_or(t_end_default);
    let dt = o.dt.unwrap_or(1e-6);
    let exp = ExperimentConfig {
        dt,
        cutoff: o.cutoff_mode(),
        delta_coefficient: o.delta_coefficient,
        ..Default::default()
    };
    Ok(StepperConfig {
        t0: 0.0,
        t_end,
        dt,
        cutoff: exp.cutoff_params(h)?,
        integrator: o.integrator(),
        solver: o.solver(),
        snapshot_times: if o.snapshots.is_empty() {
            default_snapshots(t_end)
        } else {
            o.snapshots.clone()
        },
    })
}

fn lubrication_options(o: &Opts) -> LubricationOptions {
    LubricationOptions {
        snapshot_every: o.snapshot_every,
        threshold: o.threshold,
    }
}

fn write_lubrication(dir: &Path, run: &LubricationRun, suffix: &str) -> Result<()> {
    run.output
        .trace
        .write_csv(create(dir, &format!("trace{suffix}.csv"))?)?;
    run.singularity
        .write_csv(create(dir, &format!("singularity{suffix}.csv"))?)?;
    write_field_series(
        create(dir, &format!("snapshots{suffix}.csv"))?,
        &run.output.trace.snapshots,
    )?;
    run.output
        .state
        .write_csv(create(dir, &format!("final{suffix}.csv"))?)?;
    Ok(())
}

fn lubrication_metadata(
    o: &Opts,
    cfg: &StepperConfig,
    spec: &LubricationSpec,
    h: f64,
) -> MetadataWriter {
    let mut m = MetadataWriter::new();
    m.set("version", env!("CARGO_PKG_VERSION"));
    m.extend(spec.metadata());
    m.set("dt", sig17(cfg.dt));
    m.set("t_end", sig17(cfg.t_end));
    m.set("h", sig17(h));
    m.set("cutoff", o.cutoff_mode().tag());
    m.set(
        "delta",
        cfg.cutoff
            .map(|c| sig17(c.delta()))
            .unwrap_or_else(|| "none".into()),
    );
    m.set("integrator", cfg.integrator.tag());
    m.set("cutoff_placement", "between-steps;stages-unfloored");
    m.set("solver", format!("{:?}", cfg.solver.kind).to_lowercase());
    m.set("solver_tol", sig17(cfg.solver.tol));
    m.set("touching_threshold", sig17(o.threshold));
    m.set(
        "touching_length",
        "run-of-k-nodes=(k-1)h;isolated=h/2;longest-run",
    );
    m.set("snapshot_every_steps", o.snapshot_every);
    m.set(
        "onset_definitions",
        "pre-cutoff-min<=0;first-touching-sample",
    );
    m.set("seed", o.seed);
    m
}

fn print_lubrication(run: &LubricationRun) {
    let opt = |v: Option<f64>| v.map(sig17).unwrap_or_else(|| "none".into());
    let last = run.output.trace.last().expect("at least one step");
    println!("onset_pre={}", opt(run.onset_pre));
    println!("onset_touching={}", opt(run.singularity.onset_time));
    println!("liftoff={}", opt(run.singularity.liftoff_time));
    println!(
        "max_touching_length={}",
        sig17(run.singularity.max_touching_length)
    );
    println!("final_min_pre={}", sig17(last.min_pre));
    println!("final_mass={}", sig17(last.mass_post));
}

fn lubrication(o: &Opts, two_d: bool) -> Result<()> {
    let eps = o.epsilon.unwrap_or(0.0);
    let mobility = MobilitySpec::regularized(eps)?;
    let (spec, t_end) = if two_d {
        (LubricationSpec::two_d(o.single_grid(80)?, mobility)?, 1e-3)
    } else {
        (
            LubricationSpec::one_d(o.single_grid(1000)?, mobility)?,
            2.5e-3,
        )
    };
    let h = spec.grid().h_max();
    let cfg = lubrication_config(o, t_end, h)?;
    let run = run_lubrication_with(&spec, &cfg, lubrication_options(o))?;
    print_lubrication(&run);
    if let Some(dir) = &o.out {
        write_lubrication(dir, &run, "")?;
        lubrication_metadata(o, &cfg, &spec, h).write_to(dir)?;
    }
    Ok(())
}

fn reg_compare(o: &Opts) -> Result<()> {
    let eps = o.epsilon.unwrap_or(1e-14);
    let spec = LubricationSpec::one_d(o.single_grid(1000)?, MobilitySpec::default())?;
    let h = spec.grid().h_max();
    let cfg = lubrication_config(o, 2.5e-3, h)?;
    let report =
        regularization_comparison(&spec, &cfg, eps, lubrication_options(o), o.execution())?;
    report.write_summary(std::io::stdout().lock())?;
    if let Some(dir) = &o.out {
        report.write_summary(create(dir, "regularization.csv")?)?;
        write_lubrication(dir, &report.reference, "_reference")?;
        write_lubrication(dir, &report.regularized, "_regularized")?;
        let mut m = lubrication_metadata(o, &cfg, &spec, h);
        m.set("epsilon_regularized", sig17(eps));
        m.set("epsilon", "0");
        m.write_to(dir)?;
    }
    Ok(())
}

fn diagnostics(o: &Opts) -> Result<()> {
    let j = o.single_grid(20)?;
    let exp = o.experiment("diagnostics", &[j], 1e-2, 1.0);
    let spec = exp.anisotropic(j)?;
    let u = spec.initial();
    let dts = [exp.dt, 0.5 * exp.dt];
    let results = exp.execution.map(dts.to_vec(), |dt| {
        dirk_diagnostics(&spec, &u, dt, exp.integrator)
    });
    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }
    let mut text = String::from("dt,norm_b1_inv,norm_b1_inv_b0,K\n");
    for d in &rows {
        text += &format!(
            "{},{},{},{}\n",
            sig17(d.dt),
            sig17(d.norm_b1_inv),
            sig17(d.norm_b1_inv_b0),
            sig17(d.k)
        );
    }
    print!("{text}");
    if let Some(dir) = &o.out {
        create(dir, "diagnostics.csv")?.write_all(text.as_bytes())?;
        let mut m = o.metadata(&exp);
        m.extend(spec.metadata());
        m.set(
            "scheme_pair",
            "B1=prod(I-a_ii*dt*L);B1^-1*B0=R(dt*L);dirichlet-rows-zero",
        );
        m.write_to(dir)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::AnisoConvergence(o) => aniso_convergence(o),
        Command::AnisoRun(o) => aniso_run(o),
        Command::Lub1d(o) => lubrication(o, false),
        Command::Lub2d(o) => lubrication(o, true),
        Command::RegCompare(o) => reg_compare(o),
        Command::Diagnostics(o) => diagnostics(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
