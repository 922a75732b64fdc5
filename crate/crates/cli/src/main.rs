use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gamma_filter::experiments::{
    run_constants, run_filter, run_lp, run_simulate, run_stability, run_validate, ExperimentConfig,
};
use gamma_filter::Error;

#[derive(Parser)]
#[command(name = "gfilter", version, about = "Mixed-Gamma filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated trajectories.
    Simulate(Common),
    /// Run the mixed and grid filters on one trajectory.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV to filter instead of simulating one.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// TV between differently initialised filters against the pathwise bound.
    Stability(Common),
    /// Monte-Carlo mean of TV^p and its rate.
    Lp(Common),
    /// Closed-form filters against the grid recursion.
    Validate(Common),
    /// Print the bound constants without simulating.
    Constants(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Error::Config {
                field: "--threads".into(),
                reason: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Numerical(e.to_string()))?;
    }
    let mut config = ExperimentConfig::read(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(dir) = &common.output_dir {
        config.output_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(c) => {
            let config = load(&c)?;
            let paths = run_simulate(&config)?;
            println!("wrote {} trajectories to {}", paths.len(), config.output_dir.display());
        }
        Command::Filter { common, trajectory } => {
            let config = load(&common)?;
            let run = run_filter(&config, trajectory.as_deref())?;
            let last = run.posteriors.last().expect("initial posterior present");
            println!(
                "filtered {} observations; posterior mean {:.6e} sd {:.6e}",
                run.trajectory.len(),
                last.mean(),
                last.variance().sqrt()
            );
        }
        Command::Stability(c) => {
            let config = load(&c)?;
            let run = run_stability(&config)?;
            let s = &run.summary;
            println!("predicted log-rate {:.6}", s.constants.predicted_log_rate);
            match &s.rate_summary {
                Some(r) => println!("fitted rate median {:.6} mean {:.6}", r.median, r.mean),
                None => println!("fitted rate degenerate"),
            }
            println!(
                "fraction below threshold {:.4}; violations {} (half) {} (full)",
                s.fraction_below_threshold, s.violations_half_integral, s.violations_full_integral
            );
        }
        Command::Lp(c) => {
            let config = load(&c)?;
            let run = run_lp(&config)?;
            let s = &run.summary;
            println!(
                "rho {:.6} (ln {:.6}); E(W^p) {:.6}; fitted rate {}",
                s.rho,
                s.ln_rho,
                s.ew_p,
                s.fitted_rate.map(|r| format!("{r:.6}")).unwrap_or_else(|| "degenerate".into())
            );
        }
        Command::Validate(c) => {
            let config = load(&c)?;
            let run = run_validate(&config)?;
            let s = &run.summary;
            println!(
                "max L1 mixed vs grid {:e}; refinement monotone {}; {}",
                s.max_l1_mixed_grid,
                s.refinement_monotone,
                if s.passes { "PASS" } else { "FAIL" }
            );
        }
        Command::Constants(c) => {
            let config = load(&c)?;
            let k = run_constants(&config)?;
            println!("critical_delta {}", k.critical_delta);
            println!("delta {}", k.delta);
            if let Some(b) = &k.bound {
                println!("B {}", b.b_const);
                println!("B_bar {}", b.b_bar);
                println!("Q {}", b.q_const);
                println!("Q_typeset {}", b.q_typeset);
                println!("H {}", b.h);
                println!("h0_lip {}", b.h0_lip);
            } else {
                println!("H not certified (infimum {})", k.density_ratio.h_inf);
            }
            println!("p_max {}", k.p_max);
            if let (Some(p), Some(rho)) = (k.p, k.rho) {
                println!("p {p}");
                println!("rho {rho}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
