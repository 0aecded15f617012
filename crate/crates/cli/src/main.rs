use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rsmcast::channel::generate_channels_with_noise;
use rsmcast::dof::{dof_classic, dof_rs};
use rsmcast::harness::{
    first_rs_subproblem, read_results_file, run_experiment, summarize, ExperimentConfig, ExperimentReport, RunOptions,
};
use rsmcast::model::{read_channel_csv, write_channel_csv, ChannelMeta, SystemDims};
use rsmcast::Error;

#[derive(Parser)]
#[command(name = "rsmcast", version, about = "Rate-splitting multigroup multicast experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw i.i.d. CN(0,1) channels and dump them as CSV plus a metadata file.
    GenChannels {
        /// `N-Nt-M-G`: subcarriers, antennas, groups, users per group.
        #[arg(long)]
        dims: String,
        #[arg(long)]
        seed: u64,
        /// CSV path; metadata goes next to it with extension `.meta.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        noise_var: f64,
    },
    /// Run (or resume) an experiment and write the results CSV.
    Run(RunArgs),
    /// Like `run`, then print the summary table.
    Sweep(RunArgs),
    /// Analytic DoF for the configured system, and fitted slopes from results.
    Dof {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Recompute every cell instead of resuming from an existing output.
    #[arg(long)]
    fresh: bool,
    /// Also write the first precoder subproblem as text.
    #[arg(long)]
    dump_subproblem: Option<PathBuf>,
}

fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn gen_channels(dims: &str, seed: u64, out: &Path, noise_var: f64) -> Result<(), Error> {
    let dims = SystemDims::from_label(dims)?;
    let meta = ChannelMeta {
        dims: dims.clone(),
        noise_var,
        seed: Some(seed),
    };
    let probe = rsmcast::model::ChannelSet::zeros(dims.n_users, dims.n_subcarriers, dims.n_tx_antennas, noise_var);
    rsmcast::model::validate(&dims, &probe, &rsmcast::model::PowerBudget::from_power(1.0, noise_var))?;
    let ch = generate_channels_with_noise(&dims, seed, noise_var);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_channel_csv(&ch, BufWriter::new(File::create(out)?))?;
    std::fs::write(meta_path(out), serde_json::to_string_pretty(&meta)? + "\n")?;
    // Read back as a self-check of the dump format.
    let back = read_channel_csv(&meta, BufReader::new(File::open(out)?))?;
    if back != ch {
        return Err(Error::Parse("channel dump did not read back identically".into()));
    }
    println!("wrote {} ({} users x {} subcarriers x {} antennas)", out.display(), dims.n_users, dims.n_subcarriers, dims.n_tx_antennas);
    Ok(())
}

fn load_run_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(ExperimentConfig, ExperimentReport), Error> {
    let cfg = load_run_config(args)?;
    if let Some(path) = &args.dump_subproblem {
        std::fs::write(path, first_rs_subproblem(&cfg)?.dump())?;
    }
    let opts = RunOptions {
        resume: !args.fresh,
        ..RunOptions::for_config(&cfg)
    };
    let report = run_experiment(&cfg, &opts)?;
    println!(
        "{}: {} rows ({} computed, {} resumed, {} failed)",
        cfg.output_path.display(),
        report.rows.len(),
        report.computed,
        report.resumed,
        report.failures()
    );
    Ok((cfg, report))
}

fn dof(config: &Path, results: Option<&Path>) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(config)?;
    let d = &cfg.dims;
    println!("system {} (N={}, Nt={}, M={}, K={})", d.label(), d.n_subcarriers, d.n_tx_antennas, d.n_groups, d.n_users);
    println!("classic DoF per subcarrier: {}", dof_classic(d));
    for m_deg in 0..d.n_groups {
        println!("rate-splitting DoF per subcarrier, {m_deg} degraded groups: {:.6}", dof_rs(m_deg));
    }
    if let Some(path) = results {
        let rows = read_results_file(path)?;
        let summary = summarize(&rows, cfg.dof_window_db);
        println!();
        for entry in &summary.dof {
            match &entry.slope {
                Ok(s) => println!("empirical DoF {:<10} {s:.4} (top {} dB)", entry.algo.as_str(), entry.window_db),
                Err(e) => println!("empirical DoF {:<10} n/a ({e})", entry.algo.as_str()),
            }
        }
    }
    Ok(())
}

fn exit_for(report: &ExperimentReport) -> ExitCode {
    if report.failures() > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenChannels { dims, seed, out, noise_var } => gen_channels(dims, *seed, out, *noise_var).map(|_| ExitCode::SUCCESS),
        Command::Run(args) => run(args).map(|(_, r)| exit_for(&r)),
        Command::Sweep(args) => run(args).map(|(cfg, r)| {
            println!();
            print!("{}", summarize(&r.rows, cfg.dof_window_db));
            exit_for(&r)
        }),
        Command::Dof { config, results } => dof(config, results.as_deref()).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
