//! The `superlens` command line: configuration in, plain-text results out.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{
    energy_balance, evanescent_similarity, image_metrics, mode_table, reconstruct_below, ImageMetrics, Region,
};
use crate::config::{AnalysisQuadrature, ExperimentConfig};
use crate::domain::DesignField;
use crate::error::{Error, Result};
use crate::objective::{Evaluation, FocusingProblem};
use crate::optimize::{kkt_residual, run, HistoryEntry, OptimizerState};
use crate::verify::{run_all, Fault, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

const SPOT_SAMPLES: usize = 1025;

#[derive(Debug, Parser)]
#[command(name = "superlens", version, about = "Design periodic dielectric slabs that focus a point source")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; overrides `outdir` from the configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub outdir: Option<PathBuf>,

    /// Worker threads for the per-α solves (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve every quasi-momentum for one design and write fields and traces.
    Solve {
        /// Design file to solve instead of the configured initial design.
        #[arg(long, value_name = "PATH")]
        design: Option<PathBuf>,
    },
    /// Run projected gradient descent, then analyse the result.
    Optimize {
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Evaluate objective, gradient and image metrics of a design.
    Analyze {
        #[arg(long, value_name = "PATH")]
        design: Option<PathBuf>,
    },
    /// Run the built-in oracle and consistency checks.
    Verify {
        /// Coarse grids with relaxed tolerances.
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FaultArg {
    BetaSign,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Singular { .. } | Error::Inaccurate { .. } | Error::WoodAnomaly { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    if let Command::Verify { quick, inject_fault } = cli.command {
        let report = run_all(&VerifyOptions {
            reduced: quick,
            fault: inject_fault.map(|FaultArg::BetaSign| Fault::FlippedBetaSign),
        })?;
        print!("{report}");
        return Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY });
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config PATH".into()))?;
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open `{}`: {e}", path.display())))?;
    let cfg = ExperimentConfig::<f64>::parse(BufReader::new(file))?;
    let outdir = cli
        .outdir
        .clone()
        .or_else(|| cfg.outdir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&outdir)?;
    match &cli.command {
        Command::Solve { design } => cmd_solve(&cfg, design.as_deref(), &outdir),
        Command::Analyze { design } => cmd_analyze(&cfg, design.as_deref(), &outdir),
        Command::Optimize { resume } => cmd_optimize(&cfg, resume.as_deref(), &outdir),
        Command::Verify { .. } => unreachable!("handled above"),
    }
    .map(|()| EXIT_OK)
}

fn load_design(cfg: &ExperimentConfig<f64>, path: Option<&Path>) -> Result<DesignField<f64>> {
    match path {
        None => cfg.initial_design(),
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::Config(format!("cannot open design `{}`: {e}", p.display())))?;
            let d = DesignField::read_text(BufReader::new(f))?;
            if d.grid != cfg.grid()? {
                return Err(Error::Config(format!(
                    "design `{}` is {}x{}, config asks for {}x{}",
                    p.display(),
                    d.grid.nx(),
                    d.grid.ny(),
                    cfg.nx,
                    cfg.ny
                )));
            }
            Ok(d)
        }
    }
}

/// Writes through a temporary file so readers never see half a file.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    body(&mut w)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Ordered `key = value` summary.
#[derive(Debug, Default)]
struct Metrics(Vec<(String, String)>);

impl Metrics {
    fn num(&mut self, key: &str, v: f64) {
        self.0.push((key.into(), format!("{v:.16e}")));
    }

    fn text(&mut self, key: &str, v: impl ToString) {
        self.0.push((key.into(), v.to_string()));
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_file(path, |w| {
            for (k, v) in &self.0 {
                writeln!(w, "{k} = {v}")?;
            }
            Ok(())
        })
    }
}

fn write_design(path: &Path, d: &DesignField<f64>) -> Result<()> {
    write_file(path, |w| d.write_text(w))
}

/// Energy, spectra and image outputs shared by all commands.
fn write_analysis(
    cfg: &ExperimentConfig<f64>,
    problem: &FocusingProblem<f64>,
    design: &DesignField<f64>,
    eval: &Evaluation<f64>,
    outdir: &Path,
    metrics: &mut Metrics,
) -> Result<()> {
    let mut worst = 0.0_f64;
    let mut rows = Vec::new();
    for (r, ctx) in eval.per_alpha.iter().zip(problem.contexts()) {
        let e = energy_balance(design, &r.solution, &r.trace_top, &r.trace_bottom, &ctx.source_dirichlet)?;
        worst = worst.max(e.relative_residual());
        rows.push((r.alpha, e));
    }
    write_file(&outdir.join("energy.csv"), |w| {
        writeln!(w, "alpha,incident,reflected,transmitted,absorbed,evanescent_exchange,relative_residual")?;
        for (a, e) in &rows {
            writeln!(
                w,
                "{a:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.6e}",
                e.incident,
                e.reflected,
                e.transmitted,
                e.absorbed,
                e.evanescent_exchange,
                e.relative_residual()
            )?;
        }
        Ok(())
    })?;

    let images: Vec<_> = eval.per_alpha.iter().map(|r| r.trace_bottom.clone()).collect();
    let targets: Vec<_> = problem.contexts().iter().map(|c| c.target.clone()).collect();
    let weights: Vec<_> = problem.contexts().iter().map(|c| c.weight).collect();
    write_file(&outdir.join("modes.csv"), |w| {
        writeln!(w, "n,image_abs,target_abs")?;
        for (n, a, b) in mode_table(&images, &targets, &weights)? {
            writeln!(w, "{n},{a:.16e},{b:.16e}")?;
        }
        Ok(())
    })?;
    let similarity = evanescent_similarity(&images, &targets, &weights, cfg.omega)?;

    let (traces, quadrature) = match cfg.analysis_quadrature {
        AnalysisQuadrature::Midpoint => (images, problem.quadrature.clone()),
        AnalysisQuadrature::Graded => {
            let p = cfg.analysis_problem()?;
            let e = p.evaluate(design, false)?;
            (e.per_alpha.into_iter().map(|r| r.trace_bottom).collect(), p.quadrature)
        }
    };
    let image: ImageMetrics<f64> = image_metrics(&traces, &quadrature, cfg.omega, cfg.b, cfg.h1, SPOT_SAMPLES)?;
    write_file(&outdir.join("cross_section.csv"), |w| {
        writeln!(w, "x,intensity")?;
        for (x, i) in &image.cross_section {
            writeln!(w, "{x:.16e},{i:.16e}")?;
        }
        Ok(())
    })?;
    let region = Region {
        x_min: -std::f64::consts::PI,
        x_max: std::f64::consts::PI,
        x_samples: 129,
        depth: 2.0 * cfg.h1,
        y_samples: 65,
    };
    let field = reconstruct_below(&traces, &quadrature, cfg.omega, cfg.b, &region)?;
    write_file(&outdir.join("field.csv"), |w| {
        writeln!(w, "x,y,re,im,intensity")?;
        for (iy, y) in field.ys.iter().enumerate() {
            for (ix, x) in field.xs.iter().enumerate() {
                let u = field.at(ix, iy);
                writeln!(w, "{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e}", u.re, u.im, u.norm_sqr())?;
            }
        }
        Ok(())
    })?;

    metrics.num("J", eval.j);
    match image.spot_size_lambda {
        Some(s) => metrics.num("spot_size_lambda", s),
        None => metrics.text("spot_size_lambda", "unmeasurable"),
    }
    metrics.num("peak_x", image.peak_position.0);
    metrics.num("peak_y", image.peak_position.1);
    metrics.num("peak_intensity", image.peak_intensity);
    metrics.num("energy_residual", worst);
    metrics.num("evanescent_similarity", similarity);
    Ok(())
}

fn cmd_solve(cfg: &ExperimentConfig<f64>, design: Option<&Path>, outdir: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let design = load_design(cfg, design)?;
    let eval = problem.evaluate(&design, false)?;
    let dir = outdir.join("alpha");
    fs::create_dir_all(&dir)?;
    for (k, r) in eval.per_alpha.iter().enumerate() {
        write_file(&dir.join(format!("{k:03}_field.txt")), |w| r.solution.write_field(w, Some(eval.j)))?;
        write_file(&dir.join(format!("{k:03}_top.txt")), |w| r.trace_top.write_text(w))?;
        write_file(&dir.join(format!("{k:03}_bottom.txt")), |w| r.trace_bottom.write_text(w))?;
    }
    write_design(&outdir.join("design.txt"), &design)?;
    let mut m = Metrics::default();
    write_analysis(cfg, &problem, &design, &eval, outdir, &mut m)?;
    m.write(&outdir.join("metrics.txt"))
}

fn cmd_analyze(cfg: &ExperimentConfig<f64>, design: Option<&Path>, outdir: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let design = load_design(cfg, design)?;
    let eval = problem.evaluate(&design, true)?;
    let g = eval.gradient.as_ref().expect("gradient requested");
    write_file(&outdir.join("gradient.txt"), |w| g.write_text(w, &design.bounds))?;
    let mut m = Metrics::default();
    write_analysis(cfg, &problem, &design, &eval, outdir, &mut m)?;
    m.num("kkt_residual", kkt_residual(&design, g));
    m.num("gradient_l2", g.l2_norm());
    m.write(&outdir.join("metrics.txt"))
}

const CHECKPOINT: &str = "checkpoint.txt";
const CHECKPOINT_DESIGN: &str = "checkpoint_design.txt";
const LOG: &str = "log.txt";

fn write_checkpoint(outdir: &Path, state: &OptimizerState<f64>) -> Result<()> {
    write_design(&outdir.join(CHECKPOINT_DESIGN), &state.design)?;
    write_file(&outdir.join(LOG), |w| {
        writeln!(w, "# iter J step_len grad_norm kkt_residual")?;
        for h in &state.history {
            writeln!(w, "{}", h.log_line())?;
        }
        Ok(())
    })?;
    write_file(&outdir.join(CHECKPOINT), |w| {
        writeln!(w, "iteration = {}", state.iteration)?;
        writeln!(w, "last_step = {:.16e}", state.last_step)?;
        writeln!(w, "design = {CHECKPOINT_DESIGN}")?;
        writeln!(w, "log = {LOG}")?;
        Ok(())
    })
}

fn read_checkpoint(path: &Path) -> Result<(DesignField<f64>, usize, f64, Vec<HistoryEntry<f64>>)> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let f = File::open(path).map_err(|e| Error::Config(format!("cannot open checkpoint `{}`: {e}", path.display())))?;
    let (mut iteration, mut last_step, mut design, mut log) = (None, None, None, None);
    for (idx, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let Some((k, v)) = line.split_once('=') else { continue };
        let bad = || Error::Parse {
            line: idx + 1,
            message: format!("bad checkpoint entry `{}`", line.trim()),
        };
        match k.trim() {
            "iteration" => iteration = Some(v.trim().parse().map_err(|_| bad())?),
            "last_step" => last_step = Some(v.trim().parse().map_err(|_| bad())?),
            "design" => design = Some(dir.join(v.trim())),
            "log" => log = Some(dir.join(v.trim())),
            _ => return Err(bad()),
        }
    }
    let missing = |k: &str| Error::Config(format!("checkpoint lacks `{k}`"));
    let design_path = design.ok_or_else(|| missing("design"))?;
    let d = DesignField::read_text(BufReader::new(File::open(&design_path)?))?;
    let mut history = Vec::new();
    if let Some(log) = log {
        for (idx, line) in BufReader::new(File::open(log)?).lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            history.push(HistoryEntry::parse_log_line(&line, idx + 1)?);
        }
    }
    Ok((
        d,
        iteration.ok_or_else(|| missing("iteration"))?,
        last_step.ok_or_else(|| missing("last_step"))?,
        history,
    ))
}

fn cmd_optimize(cfg: &ExperimentConfig<f64>, resume: Option<&Path>, outdir: &Path) -> Result<()> {
    let problem = cfg.problem()?;
    let start = match resume {
        None => OptimizerState::start(&problem, cfg.initial_design()?)?,
        Some(path) => {
            let (d, iteration, last_step, history) = read_checkpoint(path)?;
            if d.grid != problem.grid {
                return Err(Error::Config("checkpoint design does not match the configured grid".into()));
            }
            let d = DesignField::new(d.grid, d.values, cfg.bounds)?;
            OptimizerState::resume(&problem, d, iteration, last_step, history)?
        }
    };
    let state = run(&problem, start, &cfg.optimizer(), |s| write_checkpoint(outdir, s)).map_err(|e| {
        eprintln!("optimization aborted; last accepted state is in {}", outdir.join(CHECKPOINT).display());
        e
    })?;
    write_design(&outdir.join("design.txt"), &state.design)?;
    write_file(&outdir.join("gradient.txt"), |w| state.gradient.write_text(w, &state.design.bounds))?;
    let eval = problem.evaluate(&state.design, false)?;
    let mut m = Metrics::default();
    write_analysis(cfg, &problem, &state.design, &eval, outdir, &mut m)?;
    m.num("kkt_residual", state.kkt_residual());
    m.text("iterations", state.iteration);
    m.text("status", state.status);
    m.write(&outdir.join("metrics.txt"))
}
