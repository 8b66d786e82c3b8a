use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use extinct_core::config::{Resolved, RunConfig};
use extinct_core::report;

#[derive(Parser)]
#[command(name = "extinct", version, about = "Extinction-time bounds and Monte Carlo checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the selected bounds.
    Bounds(Common),
    /// Run the Monte Carlo ensemble.
    Simulate(Common),
    /// Compare bounds with the ensemble; reuses matching outputs in --out.
    Verify(Common),
    /// Run the invariant suite.
    Propcheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides sim.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the rayon default.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<(Resolved, PathBuf)> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        let res = cfg.resolve().with_context(|| format!("resolving {}", self.config.display()))?;
        for w in &res.derived.warnings {
            eprintln!("warning: {w}");
        }
        Ok((res, out))
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let common = match &cli.cmd {
        Cmd::Bounds(c) | Cmd::Simulate(c) | Cmd::Verify(c) | Cmd::Propcheck(c) => c,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let (res, out) = common.resolve()?;
    let done = |what: &str, dir: &Path| eprintln!("{what} written to {} (config {})", dir.display(), &res.hash[..12]);
    match cli.cmd {
        Cmd::Bounds(_) => {
            let rep = report::cmd_bounds(&res, &out)?;
            println!("bounds: {}", report::bound_names(&rep).join(", "));
            done("bounds", &out);
            Ok(true)
        }
        Cmd::Simulate(_) => {
            let rep = report::cmd_simulate(&res, &out)?;
            let s = &rep.stats;
            println!(
                "{} trajectories, {} extinct, {} censored, {} failed; extinction fraction {} [{}, {}]",
                s.m_traj,
                s.extinct,
                s.censored,
                s.failed,
                report::f17(s.extinction_fraction),
                report::f17(s.wilson_lower),
                report::f17(s.wilson_upper)
            );
            done("statistics", &out);
            Ok(true)
        }
        Cmd::Verify(_) => {
            let rep = report::cmd_verify(&res, &out)?;
            print!("{}", report::summary_lines(&rep));
            done("comparison", &out);
            Ok(!rep.any_violated())
        }
        Cmd::Propcheck(_) => {
            let rep = report::cmd_propcheck(&res, &out)?;
            for r in &rep.rows {
                println!(
                    "{} {:<40} worst={} tol={}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.name,
                    report::f17(r.worst),
                    report::f17(r.tolerance)
                );
            }
            done("invariants", &out);
            Ok(rep.all_pass())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
