use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use rbf_pum::experiment::{self, RunConfig};
use rbf_pum::io;
use rbf_pum::testbed::{ProblemId, TestProblem};
use rbf_pum::{Error, FitMode, KernelFamily, RadialKernel, Result, SampleSet, Surface};

/// Fit div-free or curl-free RBF partition-of-unity approximants and run
/// convergence experiments on the built-in test problems.
#[derive(Parser, Debug)]
#[command(name = "rbf-pum", version)]
struct Args {
    /// star2d, sphere, ball, or custom
    #[arg(long, default_value = "sphere")]
    problem: String,

    /// Node coordinates for --problem custom (2 or 3 columns)
    #[arg(long)]
    nodes_file: Option<PathBuf>,

    /// Sampled vectors for --problem custom, one row per node
    #[arg(long)]
    values_file: Option<PathBuf>,

    /// Geometry for custom data: plane, sphere, euclidean2, euclidean3
    #[arg(long)]
    surface: Option<Surface>,

    /// Fit mode for custom data: div, curl-surface, curl
    #[arg(long)]
    mode: Option<FitMode>,

    /// imq or matern4 (default depends on the problem)
    #[arg(long)]
    kernel: Option<KernelFamily>,

    #[arg(long)]
    eps: Option<f64>,

    /// Target mean number of nodes per patch
    #[arg(long)]
    q: Option<f64>,

    /// Patch overlap parameter
    #[arg(long)]
    delta: Option<f64>,

    /// Glue weight decay
    #[arg(long, default_value_t = rbf_pum::glue::DEFAULT_GAMMA)]
    gamma: f64,

    /// Target node count; repeat for a refinement sequence
    #[arg(long = "n")]
    n: Vec<usize>,

    #[arg(long, default_value_t = 5)]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 20_000)]
    eval_n: usize,

    /// Run trials one at a time (patch fits stay parallel)
    #[arg(long)]
    serial_trials: bool,

    /// CSV output for experiments, evaluation output for custom data
    /// (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Points at which to evaluate a custom fit (default: the nodes)
    #[arg(long)]
    eval_points: Option<PathBuf>,

    /// Write patch centers, radii and member counts
    #[arg(long)]
    dump_cover: Option<PathBuf>,

    /// Write glue points, distances, potential jumps and residuals
    #[arg(long)]
    dump_glue: Option<PathBuf>,
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_problem(args: &Args, id: ProblemId) -> Result<()> {
    let prob = TestProblem::new(id);
    let mut cfg = RunConfig::for_problem(id);
    let def = prob.default_kernel();
    let family = args.kernel.unwrap_or(def.family());
    let eps = args.eps.unwrap_or(if family == def.family() { def.eps() } else { 1.0 });
    cfg.kernel = RadialKernel::new(family, eps).map_err(|e| e.at("kernel"))?;
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(d) = args.delta {
        cfg.delta = d;
    }
    cfg.gamma = args.gamma;
    cfg.ns = if args.n.is_empty() { vec![2000] } else { args.n.clone() };
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    cfg.eval_n = args.eval_n;
    cfg.parallel_trials = !args.serial_trials;
    cfg.validate().map_err(|e| e.at("configuration"))?;

    let result = experiment::run_experiment(&cfg)?;
    let mut out = open_out(&args.out).map_err(|e| e.at("output"))?;
    experiment::emit_csv(&result, &mut out).map_err(|e| e.at("output"))?;
    out.flush().map_err(|e| Error::from(e).at("output"))?;
    eprint!("{}", experiment::emit_summary(&result));

    if args.dump_cover.is_some() || args.dump_glue.is_some() {
        // diagnostics for the first (N, trial) pair
        let (samples, centers) = experiment::prepare_trial(&cfg, cfg.ns[0], 0)?;
        let pum = experiment::fit_prepared(&cfg, &samples, &centers)?;
        dump(args, &pum)?;
    }
    Ok(())
}

fn dump(args: &Args, pum: &rbf_pum::PumApproximant) -> Result<()> {
    if let Some(p) = &args.dump_cover {
        let mut w = create(p).map_err(|e| e.at("cover dump"))?;
        io::write_cover(&mut w, pum.cover()).map_err(|e| e.at("cover dump"))?;
        w.flush()?;
    }
    if let Some(p) = &args.dump_glue {
        let mut w = create(p).map_err(|e| e.at("glue dump"))?;
        io::write_glue(&mut w, pum).map_err(|e| e.at("glue dump"))?;
        w.flush()?;
    }
    Ok(())
}

fn run_custom(args: &Args) -> Result<()> {
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone()
            .ok_or_else(|| Error::Config(format!("--problem custom requires {flag}")).at("configuration"))
    };
    let nodes = io::read_vectors_file(&need(&args.nodes_file, "--nodes-file")?).map_err(|e| e.at("reading nodes"))?;
    let values = io::read_vectors_file(&need(&args.values_file, "--values-file")?).map_err(|e| e.at("reading values"))?;
    let surface = match args.surface {
        Some(s) => s,
        None => {
            if nodes.iter().all(|x| x.z == 0.0) {
                Surface::Plane2D
            } else {
                Surface::Sphere2
            }
        }
    };
    let mode = args.mode.unwrap_or(match surface {
        Surface::Euclidean(_) => FitMode::CurlFreeEuclidean,
        _ => FitMode::DivFreeSurface,
    });
    mode.check(surface).map_err(|e| e.at("configuration"))?;
    let kernel = RadialKernel::new(args.kernel.unwrap_or(KernelFamily::Imq), args.eps.unwrap_or(1.0))
        .map_err(|e| e.at("kernel"))?;
    let samples = SampleSet::new(nodes, values, surface).map_err(|e| e.at("sampling"))?;
    let q = args.q.unwrap_or(8.0);
    let delta = args.delta.unwrap_or(0.5);
    let pum = experiment::fit_custom(&samples, kernel, surface, mode, q, delta, args.gamma)?;
    eprintln!(
        "fitted {} nodes on {} patches (mean {:.1} members), max local residual {:.2e}, glue residual {:.2e}",
        samples.len(),
        pum.cover().len(),
        pum.cover().mean_members(),
        pum.max_local_residual(),
        pum.shifts().residual_inf()
    );

    let pts = match &args.eval_points {
        Some(p) => io::read_vectors_file(p).map_err(|e| e.at("reading evaluation points"))?,
        None => samples.nodes().to_vec(),
    };
    let (inside, outside): (Vec<_>, Vec<_>) = pts.into_iter().partition(|x| pum.cover().covers(x));
    if !outside.is_empty() {
        eprintln!("skipping {} evaluation points outside the cover", outside.len());
    }
    let (pots, fields) = pum.batch_eval(&inside).map_err(|e| e.at("evaluation"))?;
    let mut out = open_out(&args.out).map_err(|e| e.at("output"))?;
    io::write_evaluations(&mut out, &inside, &pots, &fields, surface.dim())
        .map_err(|e| e.at("output"))?;
    out.flush().map_err(|e| Error::from(e).at("output"))?;
    dump(args, &pum)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let res = if args.problem.eq_ignore_ascii_case("custom") {
        run_custom(&args)
    } else {
        args.problem
            .parse::<ProblemId>()
            .map_err(|e| e.at("configuration"))
            .and_then(|id| run_problem(&args, id))
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
