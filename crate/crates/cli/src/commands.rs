use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use brls_core::gridfile::{read_grid, write_grid, GridKind};
use brls_core::metrics::{
    data_misfit, model_error, scale_to_data, DepthBandPass, Method, RunReport,
};
use brls_core::render::{write_pgm, DEFAULT_CLIP_PERCENTILE};
use brls_core::rls::{assemble, brls_solve, DataBlock, WindowPlan};
use brls_core::synth::{blocks_from_gathers, make_survey, synthesize_data, ExperimentSpec};
use brls_core::{
    cgls, dot_test, CgConfig, Grid2D, IdentityOperator, SharedOperator, ShotGather,
    SignFlippedAdjoint, Survey, VelocityModel,
};
use clap::{Args, Parser, Subcommand};

use crate::config::{DotTestTarget, RunConfig};
use crate::CliError;

/// Threshold the `dottest` subcommand holds every operator to.
pub const DOT_TEST_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "brls",
    version,
    about = "Least-squares migration by block-row recursion"
)]
pub struct Cli {
    /// Override the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; `model` creates it, the imaging commands read from it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the velocity model, its reflectivity and synthetic shot gathers.
    Model(RunArgs),
    /// Migrate with the adjoint operator, scaled to the data.
    Adjoint(RunArgs),
    /// Least-squares migration by CGLS on the whole survey.
    Lsm {
        #[command(flatten)]
        run: RunArgs,
        /// CG iterations; defaults to `lsm_iterations` from the config.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Windowed recursive least-squares migration.
    Brls {
        #[command(flatten)]
        run: RunArgs,
        /// Shots per window.
        #[arg(long)]
        q: Option<usize>,
        /// Shots replaced per window step.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Check that each operator's adjoint matches its forward.
    Dottest {
        #[arg(long)]
        config: PathBuf,
        /// Number of random seeds per operator.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Render a grid file as an 8-bit PGM image.
    Render {
        input: PathBuf,
        /// Output PGM path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLIP_PERCENTILE)]
        clip_percentile: f64,
    },
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let out = Output { quiet: cli.quiet };
    match &cli.command {
        Command::Model(args) => cmd_model(args, cli.seed, &out),
        Command::Adjoint(args) => cmd_image(
            args,
            cli.seed,
            &out,
            Method::Adjoint,
            &ImageOptions::default(),
        ),
        Command::Lsm { run, iterations } => {
            let opts = ImageOptions {
                iterations: *iterations,
                ..Default::default()
            };
            cmd_image(run, cli.seed, &out, Method::Lsm, &opts)
        }
        Command::Brls { run, q, k } => {
            let opts = ImageOptions {
                q: *q,
                k: *k,
                ..Default::default()
            };
            cmd_image(run, cli.seed, &out, Method::Brls, &opts)
        }
        Command::Dottest { config, seeds } => cmd_dottest(config, *seeds, cli.seed, &out),
        Command::Render {
            input,
            out: path,
            clip_percentile,
        } => {
            let (grid, _) = read_grid(input)?;
            write_pgm(path, &grid, *clip_percentile)?;
            out.line(format_args!("wrote {}", path.display()));
            Ok(())
        }
    }
}

struct Output {
    quiet: bool,
}

impl Output {
    fn line(&self, args: std::fmt::Arguments<'_>) {
        if !self.quiet {
            println!("{args}");
        }
    }
}

#[derive(Debug, Default)]
struct ImageOptions {
    iterations: Option<usize>,
    q: Option<usize>,
    k: Option<usize>,
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<(RunConfig, ExperimentSpec), CliError> {
    let mut config = RunConfig::load(path)?;
    if let Some(s) = seed {
        config.set("seed", s);
    }
    let spec = config.experiment_spec()?;
    Ok((config, spec))
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

pub fn shot_path(dir: &Path, shot: usize) -> PathBuf {
    dir.join("shots").join(format!("shot_{shot:03}.brg"))
}

fn cmd_model(args: &RunArgs, seed: Option<u64>, out: &Output) -> Result<(), CliError> {
    let (_, spec) = load_spec(&args.config, seed)?;
    let exp = synthesize_data(&spec)?;
    let shots_dir = args.out.join("shots");
    fs::create_dir_all(&shots_dir).map_err(io_err(format!("creating {}", shots_dir.display())))?;

    let velocity = args.out.join("velocity.brg");
    write_grid(&velocity, &exp.velocity.grid, GridKind::Velocity)?;
    let truth = args.out.join("truth.brg");
    write_grid(&truth, &exp.truth, GridKind::Reflectivity)?;
    out.line(format_args!("wrote {}", velocity.display()));
    out.line(format_args!("wrote {}", truth.display()));

    let positions = &spec.geometry().shot_positions;
    for g in &exp.gathers {
        let mut traces = g.traces.clone();
        traces.o2 = positions[g.shot_index] as f64 * spec.dx;
        let path = shot_path(&args.out, g.shot_index);
        write_grid(&path, &traces, GridKind::Gather)?;
        out.line(format_args!("wrote {}", path.display()));
    }
    Ok(())
}

/// Survey and data blocks rebuilt from a `model` output directory.
struct Loaded {
    survey: Survey,
    blocks: Vec<DataBlock>,
    truth: Option<Grid2D>,
    band_pass: DepthBandPass,
}

fn load_run(dir: &Path, spec: &ExperimentSpec) -> Result<Loaded, CliError> {
    let (grid, _) = read_grid(dir.join("velocity.brg"))?;
    if grid.n1 != spec.nz || grid.n2 != spec.nx {
        return Err(CliError::Config(format!(
            "velocity.brg is {}x{} but the config grid is {}x{}",
            grid.n1, grid.n2, spec.nz, spec.nx
        )));
    }
    let velocity = VelocityModel::new(grid)?;
    let survey = make_survey(spec, &velocity)?;
    let mut gathers = Vec::with_capacity(spec.n_shots);
    for shot in 0..spec.n_shots {
        let (traces, _) = read_grid(shot_path(dir, shot))?;
        gathers.push(ShotGather {
            shot_index: shot,
            traces,
        });
    }
    let blocks = blocks_from_gathers(&survey, &gathers)?;
    let truth_path = dir.join("truth.brg");
    let truth = if truth_path.exists() {
        Some(read_grid(truth_path)?.0)
    } else {
        None
    };
    let band_pass = DepthBandPass::from_band(spec.band.f_min, spec.band.f_max, velocity.mean());
    Ok(Loaded {
        survey,
        blocks,
        truth,
        band_pass,
    })
}

fn cmd_image(
    args: &RunArgs,
    seed: Option<u64>,
    out: &Output,
    method: Method,
    opts: &ImageOptions,
) -> Result<(), CliError> {
    let (_, mut spec) = load_spec(&args.config, seed)?;
    if let Some(q) = opts.q {
        spec.q = q;
    }
    if let Some(k) = opts.k {
        spec.k = k;
    }
    let run = load_run(&args.out, &spec)?;
    let started = Instant::now();

    let (model, per_window_iterations) = match method {
        Method::Adjoint => {
            let (op, data) = assemble(&run.blocks)?;
            let image = op.apply_adjoint(&data)?;
            (scale_to_data(&run.blocks, &image)?.1, None)
        }
        Method::Lsm => {
            let iterations = opts.iterations.unwrap_or(spec.lsm_iterations);
            let (op, data) = assemble(&run.blocks)?;
            let cg = CgConfig::new(iterations, spec.cg_tolerance, spec.lambda)?;
            let (model, report) = cgls(op.as_ref(), &data, &cg, None)?;
            out.line(format_args!("lsm: {} iterations", report.iterations_run));
            (model, None)
        }
        Method::Brls => {
            let plan = WindowPlan::new(spec.n_shots, spec.q, spec.k)?;
            let outcome = brls_solve(&run.blocks, &plan, &spec.cg_config()?, false)?;
            out.line(format_args!("brls: {} windows", plan.len()));
            let iterations = outcome.iterations();
            (outcome.model, Some(iterations))
        }
    };
    let wall_time = started.elapsed().as_secs_f64();

    let report = RunReport {
        method,
        data_misfit: data_misfit(&run.blocks, &model)?,
        // A reflection-free truth has no error scale; the field is left out.
        model_error: match &run.truth {
            Some(t) => match model_error(&model, t, Some(&run.band_pass)) {
                Ok(e) => Some(e),
                Err(brls_core::Error::ZeroReference) => None,
                Err(e) => return Err(e.into()),
            },
            None => None,
        },
        per_window_iterations,
        wall_time,
    };
    let image = run.survey.empty_model().with_values(model)?;
    let image_path = args.out.join(format!("image_{method}.brg"));
    write_grid(&image_path, &image, GridKind::Image)?;
    let report_path = args.out.join(format!("report_{method}.txt"));
    fs::write(&report_path, report.to_text())
        .map_err(io_err(format!("writing {}", report_path.display())))?;
    out.line(format_args!("wrote {}", image_path.display()));
    out.line(format_args!("{}", report.to_text().trim_end()));
    Ok(())
}

fn cmd_dottest(
    path: &Path,
    seeds: Option<u64>,
    seed: Option<u64>,
    out: &Output,
) -> Result<(), CliError> {
    let mut config = RunConfig::load(path)?;
    if let Some(s) = seed {
        config.set("seed", s);
    }
    let n_seeds = match seeds {
        Some(n) => n,
        None => config.get_or("dottest_seeds", 5)?,
    };
    let base_seed: u64 = config.get_or("seed", 1)?;
    let corrupt = config.flag("corrupt_adjoint")?;

    let mut operators: Vec<(String, SharedOperator)> = match config.dottest_target()? {
        DotTestTarget::Identity(n) => vec![("identity".into(), Arc::new(IdentityOperator::new(n)))],
        DotTestTarget::Wave => {
            let spec = config.experiment_spec()?;
            let velocity = brls_core::synth::make_velocity(&spec)?;
            let survey = make_survey(&spec, &velocity)?;
            let mut ops: Vec<(String, SharedOperator)> =
                vec![("survey".into(), Arc::new(survey.survey_operator()))];
            ops.extend(
                survey
                    .shot_operators()
                    .into_iter()
                    .enumerate()
                    .map(|(i, op)| (format!("shot {i}"), op)),
            );
            ops
        }
    };
    if corrupt {
        for (_, op) in operators.iter_mut() {
            *op = Arc::new(SignFlippedAdjoint::new(op.clone()));
        }
    }

    let mut worst = 0.0f64;
    for (name, op) in &operators {
        let mut op_worst = 0.0f64;
        for s in 0..n_seeds {
            let t = dot_test(op.as_ref(), base_seed.wrapping_add(s));
            let e = if t.relative_error.is_nan() {
                f64::INFINITY
            } else {
                t.relative_error
            };
            op_worst = op_worst.max(e);
        }
        out.line(format_args!(
            "{name}: max relative error {op_worst:e} over {n_seeds} seeds"
        ));
        worst = worst.max(op_worst);
    }
    if worst >= DOT_TEST_TOLERANCE {
        return Err(CliError::DotTestFailed {
            worst,
            tolerance: DOT_TEST_TOLERANCE,
        });
    }
    out.line(format_args!("dot test passed"));
    Ok(())
}
