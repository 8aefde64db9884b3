use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ncp_core::dynamics::{ModelRegistry, SystemModel};
use ncp_core::geometry::{Metric, Region};
use ncp_core::io::{self, RunConfig, RunManifest, SummaryRow};
use ncp_core::policy::{envelope_check, rollout, AssignmentSet, Certificate};
use ncp_core::synthesis::{self, alpha_stats};
use ncp_core::NcpError;

/// Largest envelope violation `simulate` accepts.
const ENVELOPE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "ncp", version, about = "Synthesize, verify and run nonparametric chain policies")]
struct Cli {
    /// Worker threads (falls back to NCP_THREADS, then all cores).
    #[arg(long, global = true, env = "NCP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a verified assignment set from a run config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Roll the policy out from a set of starts and check the certified envelope.
    Simulate(SimulateArgs),
    /// Split every directly verified cell once and re-verify with maximized rates.
    Refine {
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Extend a verified set to a disjoint region.
    Expand {
        #[arg(long)]
        assignments: PathBuf,
        /// Region as inline JSON or a path to a JSON file.
        #[arg(long)]
        region: String,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Pretty-print a certificate.
    Report {
        /// certificate.json, or a directory containing one.
        path: PathBuf,
    },
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    assignments: PathBuf,
    /// Defaults to certificate.json next to the assignments.
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// JSON array of start states.
    #[arg(long, conflicts_with_all = ["grid_starts", "random_starts"])]
    starts: Option<PathBuf>,
    /// Evenly spaced starts on the region boundary.
    #[arg(long)]
    grid_starts: Option<usize>,
    /// Uniform random starts in the region.
    #[arg(long)]
    random_starts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: f64,
    #[arg(long, default_value = "sim")]
    out_dir: PathBuf,
}

/// Outcome of a command that ran to completion.
enum Status {
    Complete,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<Status> {
    match cmd {
        Command::Synth { config, out } => synth(&config, &out),
        Command::Simulate(args) => simulate(&args),
        Command::Refine { assignments, config, out } => refine(&assignments, &config, &out),
        Command::Expand { assignments, region, config, out } => expand(&assignments, &region, &config, &out),
        Command::Report { path } => report(&path),
    }
}

fn load_config(path: &Path, out: &OutArgs) -> anyhow::Result<(RunConfig, String)> {
    let (mut cfg, text) = RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = out.seed {
        cfg.synthesis.seed = seed;
    }
    Ok((cfg, text))
}

fn load_set(path: &Path) -> anyhow::Result<(AssignmentSet, SystemModel)> {
    let set: AssignmentSet = io::read_json(path).with_context(|| format!("loading assignments {}", path.display()))?;
    let model = ModelRegistry::builtin().build(&set.model.name, &set.model.params)?;
    set.validate(&model)?;
    Ok((set, model))
}

/// Writes artifacts into one directory and records them in the manifest.
struct Artifacts {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Artifacts {
    /// Refuses a directory that holds one of the inputs, so inputs are never
    /// overwritten. A non-empty `config` is copied verbatim as `config.json`.
    fn new(dir: &Path, manifest: RunManifest, inputs: &[&Path], config: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let dir = dir.canonicalize()?;
        for input in inputs {
            if input.canonicalize().ok().and_then(|p| p.parent().map(Path::to_path_buf)).as_deref() == Some(dir.as_path()) {
                bail!("--out-dir {} holds an input file; choose a fresh directory", dir.display());
            }
        }
        let mut art = Artifacts { dir, manifest };
        if !config.is_empty() {
            art.write_text("config.json", config)?;
        }
        Ok(art)
    }

    fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), text)?;
        self.manifest.record(name, text.as_bytes());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        self.write_text(name, &io::to_json(value)?)
    }

    fn finish(mut self) -> anyhow::Result<()> {
        self.manifest.finish();
        let text = io::to_json(&self.manifest)?;
        fs::write(self.dir.join("manifest.json"), text)?;
        log::info!("artifacts written to {}", self.dir.display());
        Ok(())
    }
}

fn write_synthesis(mut art: Artifacts, out: &synthesis::Synthesis) -> anyhow::Result<()> {
    art.write_json("assignments.json", &out.assignments)?;
    art.write_json("certificate.json", &out.certificate)?;
    art.write_json("report.json", &out.report)?;
    art.finish()
}

/// Splits a synthesis result into the value and its status, keeping
/// partial certificates.
fn completion(res: ncp_core::Result<synthesis::Synthesis>) -> anyhow::Result<(synthesis::Synthesis, Status)> {
    match res {
        Ok(s) => Ok((s, Status::Complete)),
        Err(NcpError::SynthesisIncomplete { uncovered, partial }) => {
            log::warn!(
                "partial certificate: {} uncovered samples, {} failed cells",
                uncovered.len(),
                partial.failed.len()
            );
            for x in uncovered.iter().take(10) {
                log::debug!("uncovered sample {x:?}");
            }
            Ok((*partial, Status::Partial))
        }
        Err(e) => Err(e.into()),
    }
}

fn synth(config: &Path, out: &OutArgs) -> anyhow::Result<Status> {
    let (cfg, text) = load_config(config, out)?;
    let model = cfg.build_model(&ModelRegistry::builtin())?;
    let manifest = RunManifest::start("synth", text.as_bytes(), cfg.synthesis.seed);
    let art = Artifacts::new(&out.out_dir, manifest, &[config], &text)?;
    let (result, status) = completion(synthesis::synthesize(&model, &cfg.norm, &cfg.region, &cfg.synthesis))?;
    print_summary(&result.report);
    write_synthesis(art, &result)?;
    Ok(status)
}

fn refine(assignments: &Path, config: &Path, out: &OutArgs) -> anyhow::Result<Status> {
    let (cfg, text) = load_config(config, out)?;
    let (set, model) = load_set(assignments)?;
    let manifest = RunManifest::start("refine", text.as_bytes(), cfg.synthesis.seed);
    let art = Artifacts::new(&out.out_dir, manifest, &[config, assignments], &text)?;
    let (result, status) = completion(synthesis::refine(&model, &set, &cfg.synthesis))?;
    let r = &result.report;
    println!(
        "min alpha {:.6} -> {:.6}, mean alpha {:.6} -> {:.6}",
        r.previous_min_alpha.unwrap_or(f64::NAN),
        r.min_alpha,
        r.previous_mean_alpha.unwrap_or(f64::NAN),
        r.mean_alpha
    );
    print_summary(r);
    write_synthesis(art, &result)?;
    Ok(status)
}

#[derive(Serialize)]
struct ExpandReport<'a> {
    old_region: &'a Region,
    new_region: &'a Region,
    triples_before: usize,
    triples_after: usize,
    failed_cells: usize,
    min_alpha: f64,
    mean_alpha: f64,
    certificate: &'a Certificate,
}

fn expand(assignments: &Path, region: &str, config: &Path, out: &OutArgs) -> anyhow::Result<Status> {
    let (cfg, text) = load_config(config, out)?;
    let (set, model) = load_set(assignments)?;
    let new_region = io::parse_region(region).context("parsing --region")?;
    let manifest = RunManifest::start("expand", text.as_bytes(), cfg.synthesis.seed);
    let mut art = Artifacts::new(&out.out_dir, manifest, &[config, assignments], &text)?;
    let (grown, cert, failed, status) = match synthesis::expand(&model, &set, &new_region, &cfg.synthesis) {
        Ok((s, c)) => (s, c, 0, Status::Complete),
        Err(NcpError::ExpansionIncomplete { cells, partial }) => {
            log::warn!("{} cells in the new region could not be certified", cells.len());
            let (s, c) = *partial;
            (s, c, cells.len(), Status::Partial)
        }
        Err(e) => return Err(e.into()),
    };
    let (min_alpha, mean_alpha) = alpha_stats(&grown);
    let rep = ExpandReport {
        old_region: &set.region,
        new_region: &new_region,
        triples_before: set.len(),
        triples_after: grown.len(),
        failed_cells: failed,
        min_alpha,
        mean_alpha,
        certificate: &cert,
    };
    println!("triples {} -> {}, {} failed cells", rep.triples_before, rep.triples_after, failed);
    art.write_json("assignments.json", &grown)?;
    art.write_json("certificate.json", &cert)?;
    art.write_json("report.json", &rep)?;
    art.finish()?;
    Ok(status)
}

fn starts_for(args: &SimulateArgs, region: &Region, metric: &Metric, x_star: &[f64]) -> anyhow::Result<Vec<Vec<f64>>> {
    Ok(match (&args.starts, args.grid_starts, args.random_starts) {
        (Some(p), _, _) => io::read_json(p).with_context(|| format!("loading starts {}", p.display()))?,
        (None, Some(n), None) => io::boundary_starts(region, metric, x_star, n)?,
        (None, None, Some(n)) => io::random_starts(region, metric, n, args.seed),
        _ => bail!("give exactly one of --starts, --grid-starts, --random-starts"),
    })
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<Status> {
    let (set, model) = load_set(&args.assignments)?;
    let cert_path = match &args.certificate {
        Some(p) => p.clone(),
        None => args.assignments.with_file_name("certificate.json"),
    };
    let cert: Certificate =
        io::read_json(&cert_path).with_context(|| format!("loading certificate {}", cert_path.display()))?;
    let starts = starts_for(args, &set.region, &set.metric, &set.equilibrium)?;
    let manifest = RunManifest::start("simulate", &fs::read(&args.assignments)?, args.seed);
    let mut art = Artifacts::new(&args.out_dir, manifest, &[&args.assignments], "")?;

    let mut rows = Vec::with_capacity(starts.len());
    let mut trajs = Vec::with_capacity(starts.len());
    for (id, x0) in starts.iter().enumerate() {
        let traj = rollout(&model, &set, x0, args.horizon).with_context(|| format!("trajectory {id}"))?;
        let env = envelope_check(&traj, &cert, &set.metric, &set.equilibrium);
        let mut csv = Vec::new();
        io::write_trajectory_csv(&mut csv, &traj, set.dt)?;
        art.write_text(&format!("traj_{id:04}.csv"), std::str::from_utf8(&csv)?)?;
        rows.push(SummaryRow {
            id,
            start: x0.clone(),
            max_violation: env.max_violation,
            settle_time: env.settle_time,
            final_distance: env.final_distance,
        });
        trajs.push(traj);
    }
    let mut summary = Vec::new();
    io::write_summary_csv(&mut summary, &rows)?;
    art.write_text("summary.csv", std::str::from_utf8(&summary)?)?;
    let mut mean = Vec::new();
    io::write_mean_norm_csv(&mut mean, &trajs, &set.metric, &set.equilibrium)?;
    art.write_text("mean_norm.csv", std::str::from_utf8(&mean)?)?;
    art.finish()?;

    let worst = rows.iter().map(|r| r.max_violation).fold(f64::NEG_INFINITY, f64::max);
    let settled = rows.iter().filter(|r| r.settle_time.is_some()).count();
    println!(
        "{} trajectories, worst envelope violation {worst:.3e}, {settled} settled in the c-ball (c = {:.6})",
        rows.len(),
        cert.c
    );
    Ok(if worst <= ENVELOPE_TOL { Status::Complete } else { Status::Partial })
}

fn report(path: &Path) -> anyhow::Result<Status> {
    let file = if path.is_dir() { path.join("certificate.json") } else { path.to_path_buf() };
    let c: Certificate = io::read_json(&file).with_context(|| format!("loading {}", file.display()))?;
    println!("certificate {}", file.display());
    println!("  bound      |phi(t) - x*| <= K e^(-lambda t) |x0 - x*| + c");
    println!("  lambda     {}", c.lambda);
    println!("  K          {}", c.k_gain);
    println!("  c (delta)  {}", c.c);
    println!("  alpha      {}", c.alpha);
    println!("  tau        {}", c.tau);
    println!("  eps        {}", c.eps);
    println!("  L          {} (sampled, inflation {})", c.lipschitz, c.inflation);
    println!("  F          {}", c.speed_bound);
    println!("  containment margin  {}", c.containment_margin);
    println!(
        "  covering   {} / {} samples uncovered, nesting {} ({} < {})",
        c.coverage.uncovered,
        c.coverage.samples_checked,
        if c.coverage.nesting_ok { "ok" } else { "violated" },
        c.coverage.nesting_radius,
        c.coverage.inradius
    );
    let consistent = c.is_consistent(1e-12);
    println!("  constants recompute from (alpha, tau, L, eps): {}", if consistent { "yes" } else { "NO" });
    Ok(if consistent && c.coverage.uncovered == 0 && c.coverage.nesting_ok { Status::Complete } else { Status::Partial })
}

fn print_summary(r: &synthesis::SynthesisReport) {
    println!(
        "verified {} cells, bootstrapped {}, failed {}; {} signals; alpha min {:.6} mean {:.6}; {} uncovered samples",
        r.verified_cells,
        r.bootstrapped_cells,
        r.failed_cells,
        r.total_signals,
        r.min_alpha,
        r.mean_alpha,
        r.uncovered_samples
    );
    println!(
        "certificate: lambda {:.6}, K {:.6}, c {:.6}, tau {:.3}, L {:.4}",
        r.certificate.lambda, r.certificate.k_gain, r.certificate.c, r.certificate.tau, r.certificate.lipschitz
    );
}
