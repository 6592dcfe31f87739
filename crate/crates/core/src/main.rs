use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ris_mc::channels::{generate_ensemble, load_ensemble, save_ensemble, ChannelEnsemble};
use ris_mc::config::{ExperimentConfig, SweepAxis};
use ris_mc::harness::{self, EvalSet, SchemeTag};
use ris_mc::outer::{run_algorithm1, write_trace_csv, DesignArtifact};
use ris_mc::scattering::assemble_scattering;
use ris_mc::{Error, Result};

#[derive(Parser)]
#[command(name = "ris-mc", version, about = "Coupling-aware RIS multi-user MIMO design")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the channel and inner-solver seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Use the literal S_αβ = I fixed-coupling baseline.
    #[arg(long, global = true)]
    infeasible_baseline: bool,
    /// -v for info, -vv for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Proposed,
    Fixed,
    Conventional,
}

impl From<Scheme> for SchemeTag {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Proposed => SchemeTag::ProposedMcOptimized,
            Scheme::Fixed => SchemeTag::FixedMcBaseline,
            Scheme::Conventional => SchemeTag::ConventionalNoMc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Power,
    Elements,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a channel ensemble file.
    GenChannels {
        #[arg(long, default_value = "channels.risc")]
        output: String,
    },
    /// Run the offline coupling design and export the design and trace.
    Train {
        /// Ensemble file; generated from the config when omitted.
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Write wall_ms = 0 so repeated runs give identical bytes.
        #[arg(long)]
        no_timing: bool,
    },
    /// Score schemes on the evaluation channels.
    Eval {
        #[arg(long)]
        ensemble: Option<PathBuf>,
        /// Trained design to use for the proposed scheme; trains when omitted.
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, value_enum)]
        scheme: Vec<Scheme>,
    },
    /// Sweep transmit power or RIS size and emit CSV plus SVG.
    Sweep {
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        /// Comma-separated grid overriding the config.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Render an SVG from a sweep CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.channels.seed = seed;
        cfg.system.rng_seed = seed;
    }
    if c.infeasible_baseline {
        cfg.baseline.infeasible = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensemble_for(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<ChannelEnsemble> {
    match path {
        Some(p) => load_ensemble(p),
        None => generate_ensemble(
            &cfg.system,
            cfg.channels.q_train,
            cfg.channels.e_eval,
            cfg.channels.model,
            cfg.channels.seed,
        ),
    }
}

fn out_path(c: &Common, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&c.out_dir).map_err(|e| Error::io(&c.out_dir, e))?;
    Ok(c.out_dir.join(name))
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match cli.command {
        Command::GenChannels { output } => {
            let cfg = load_config(c)?;
            let ens = ensemble_for(&cfg, None)?;
            let path = out_path(c, &output)?;
            save_ensemble(&ens, &path)?;
            println!("wrote {} ({} training, {} evaluation, model {})", path.display(), ens.q(), ens.e(), ens.model.tag());
        }
        Command::Train { ensemble, no_timing } => {
            let cfg = load_config(c)?;
            let ens = ensemble_for(&cfg, ensemble.as_deref())?;
            let (design, trace) = run_algorithm1(&ens, &ens.params, &cfg.outer, &cfg.inner)?;
            let artifact = DesignArtifact {
                design,
                seed: ens.seed,
                config_hash: cfg.hash(),
            };
            let dpath = out_path(c, "design.txt")?;
            artifact.save(&dpath)?;
            let tpath = out_path(c, "trace.csv")?;
            write_trace_csv(&trace, &tpath, !no_timing)?;
            println!(
                "objective {:.6} -> {:.6} over {} iterations; wrote {} and {}",
                trace.initial_objective(),
                trace.final_objective_mean,
                trace.iterations.len(),
                dpath.display(),
                tpath.display()
            );
        }
        Command::Eval {
            ensemble,
            design,
            scheme,
        } => {
            let cfg = load_config(c)?;
            let ens = ensemble_for(&cfg, ensemble.as_deref())?;
            let schemes: Vec<SchemeTag> = if scheme.is_empty() {
                SchemeTag::ALL.to_vec()
            } else {
                scheme.into_iter().map(Into::into).collect()
            };
            let mut records = Vec::new();
            for s in schemes {
                let record = match (s, &design) {
                    (SchemeTag::ProposedMcOptimized, Some(path)) => {
                        let art = DesignArtifact::load(path)?;
                        if art.design.m() != ens.params.n_ris_elements {
                            return Err(Error::Dimension(format!(
                                "design has M={} but the ensemble has M={}",
                                art.design.m(),
                                ens.params.n_ris_elements
                            )));
                        }
                        let sols = harness::evaluate_matrices(
                            &assemble_scattering(&art.design),
                            &ens.evaluation,
                            &ens.params,
                            &cfg.inner,
                            EvalSet::Evaluation,
                        )?;
                        let (mean, std_err) = harness::summarize(&sols);
                        harness::ExperimentRecord {
                            scheme: s,
                            p_dbm: ens.params.tx_power_dbm,
                            m: ens.params.n_ris_elements,
                            k: ens.params.n_users,
                            n: ens.params.n_bs_antennas,
                            q: ens.q(),
                            mean_sum_rate_bits: mean,
                            std_err,
                            n_eval_channels: sols.len(),
                            seed: ens.seed,
                            config_hash: art.config_hash,
                        }
                    }
                    _ => harness::run_scheme(s, &ens, &ens.params, &cfg.outer, &cfg.inner, &cfg.baseline)?,
                };
                println!("{:<24} {:>10.4} ± {:.4} bit/s/Hz", record.scheme.as_str(), record.mean_sum_rate_bits, record.std_err);
                records.push(record);
            }
            harness::emit_csv(&records, out_path(c, "eval.csv")?)?;
        }
        Command::Sweep { axis, grid } => {
            let mut cfg = load_config(c)?;
            if let Some(a) = axis {
                cfg.sweep.axis = match a {
                    Axis::Power => SweepAxis::PowerDbm,
                    Axis::Elements => SweepAxis::NRisElements,
                };
            }
            if !grid.is_empty() {
                cfg.sweep.grid = grid;
            }
            let records = harness::sweep(cfg.sweep.axis, &cfg.sweep.grid, &cfg)?;
            let csv = out_path(c, "sweep.csv")?;
            harness::emit_csv(&records, &csv)?;
            let svg = out_path(c, "sweep.svg")?;
            harness::emit_plot(&records, &svg)?;
            for r in &records {
                println!(
                    "{:<24} P={:>6.1} M={:>4} {:>10.4} ± {:.4}",
                    r.scheme.as_str(),
                    r.p_dbm,
                    r.m,
                    r.mean_sum_rate_bits,
                    r.std_err
                );
            }
            println!("wrote {} and {}", csv.display(), svg.display());
        }
        Command::Plot { input, output } => {
            let records = harness::read_csv(&input)?;
            let output = output.unwrap_or_else(|| input.with_extension("svg"));
            harness::emit_plot(&records, &output)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "status": "error",
                "kind": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
