#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mmwave_tfa::harness::{
    self, channel_stats, emit_results, emit_sweep, oracle_check, power_sweep, run_experiment,
    Scenario, Scheme, UePlacement,
};

/// mmWave MIMO downlink simulator with time-fractional user association.
#[derive(Parser)]
#[command(name = "tfa-sim", version)]
struct Cli {
    /// TOML scenario file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one deployment at the configured transmit power.
    Run {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = Scheme::ALL)]
        schemes: Vec<Scheme>,
    },
    /// Repeat the simulation over a transmit-power grid.
    Sweep {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = Scheme::ALL)]
        schemes: Vec<Scheme>,
        /// Powers in dBm (defaults to `sweep_powers_dbm`).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        powers: Option<Vec<f64>>,
    },
    /// Compare the GA against exhaustive search slot by slot.
    OracleCheck {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Monte Carlo checks of the channel model.
    ChannelStats {
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Placement {
    Uniform,
    Congested,
}

#[derive(Args)]
struct Overrides {
    /// Master seed for placement, fading and the GA.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of slots (for `sweep`, slots per power).
    #[arg(long, global = true)]
    slots: Option<usize>,
    /// Number of UEs.
    #[arg(long, global = true)]
    num_ues: Option<usize>,
    /// Common BS transmit power in dBm.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tx_power_dbm: Option<f64>,
    /// Streams demanded by each UE.
    #[arg(long, global = true)]
    streams_per_ue: Option<usize>,
    /// Streams available at each BS.
    #[arg(long, global = true)]
    streams_per_bs: Option<usize>,
    /// Noise bandwidth in Hz.
    #[arg(long, global = true)]
    bandwidth_hz: Option<f64>,
    /// UE drop model.
    #[arg(long, global = true, value_enum)]
    placement: Option<Placement>,
    /// GA population size.
    #[arg(long, global = true)]
    ga_population: Option<usize>,
    /// GA generation limit.
    #[arg(long, global = true)]
    ga_generations: Option<usize>,
    /// GA generations without improvement before stopping.
    #[arg(long, global = true)]
    ga_stall: Option<usize>,
    /// Largest search space solved exhaustively.
    #[arg(long, global = true)]
    enumeration_cap: Option<f64>,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        if let Some(v) = self.seed {
            s.master_seed = v;
        }
        if let Some(v) = self.num_ues {
            s.num_ues = v;
        }
        if let Some(v) = self.tx_power_dbm {
            s.tx_power_dbm = v;
            s.bs_tx_power_dbm = None;
        }
        if let Some(v) = self.streams_per_ue {
            s.streams_per_ue = v;
        }
        if let Some(v) = self.streams_per_bs {
            s.streams_per_bs = v;
        }
        if let Some(v) = self.bandwidth_hz {
            s.noise.bandwidth_hz = v;
        }
        if let Some(p) = self.placement {
            s.ue_placement = match p {
                Placement::Uniform => UePlacement::UniformRandom,
                Placement::Congested => UePlacement::congested(),
            };
        }
        if let Some(v) = self.ga_population {
            s.ga.population_size = v;
        }
        if let Some(v) = self.ga_generations {
            s.ga.max_generations = v;
        }
        if let Some(v) = self.ga_stall {
            s.ga.stall_generations = v;
        }
        if let Some(v) = self.enumeration_cap {
            s.enumeration_cap = v;
        }
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Scenario::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => Scenario::default(),
    };
    cli.overrides.apply(&mut s);
    Ok(s)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut scenario = load_scenario(&cli)?;
    let started = Instant::now();
    match cli.command {
        Command::Run { out, schemes } => {
            if let Some(v) = cli.overrides.slots {
                scenario.num_slots = v;
            }
            let result = run_experiment(&scenario, &schemes)?;
            emit_results(&result, &out)?;
            for s in &result.schemes {
                println!(
                    "{:<20} mean {:.4} bits/s/Hz (+/- {:.4}), dropped/slot {:.2}",
                    s.scheme.name(),
                    s.mean_sum_rate_bpshz,
                    s.ci95_bpshz,
                    s.dropped_per_slot.iter().sum::<usize>() as f64
                        / s.dropped_per_slot.len() as f64
                );
            }
        }
        Command::Sweep {
            out,
            schemes,
            powers,
        } => {
            scenario.num_slots = cli.overrides.slots.unwrap_or(scenario.sweep_num_slots);
            if let Some(p) = powers {
                scenario.sweep_powers_dbm = p;
            }
            let results = power_sweep(&scenario, &schemes, &scenario.sweep_powers_dbm)?;
            emit_sweep(&scenario, &results, &out)?;
            print!("{}", harness::render_sweep_summary(&results));
        }
        Command::OracleCheck { out, trials } => {
            let records = oracle_check(&scenario, trials)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut summary = String::from(
                "slot,ga_utility,oracle_utility,ga_utility_direct,abs_gap,rel_gap,exact,generations,evaluations\n",
            );
            let mut traces = String::from("slot,generation,best_utility\n");
            let mut exact = 0;
            let mut within_1pct = 0;
            for r in &records {
                let hit = r.abs_gap().abs() <= 1e-9;
                exact += usize::from(hit);
                within_1pct += usize::from(r.rel_gap() <= 0.01);
                let _ = writeln!(
                    summary,
                    "{},{},{},{},{},{},{},{},{}",
                    r.slot,
                    r.ga_utility,
                    r.oracle_utility,
                    r.ga_utility_direct,
                    r.abs_gap(),
                    r.rel_gap(),
                    hit,
                    r.generations_run,
                    r.evaluations
                );
                for (g, v) in r.utility_trace.iter().enumerate() {
                    let _ = writeln!(traces, "{},{g},{v}", r.slot);
                }
            }
            write(&out.join("oracle_check.csv"), &summary)?;
            write(&out.join("ga_traces.csv"), &traces)?;
            write(
                &out.join("config.resolved"),
                &harness::render_config(&scenario)?,
            )?;
            println!(
                "GA matched the oracle in {exact}/{n} slots, within 1% in {within_1pct}/{n}",
                n = records.len()
            );
        }
        Command::ChannelStats { draws } => {
            let stats = channel_stats(
                &scenario,
                draws,
                &[10.0, 27.0, 50.0, 71.0, 100.0, 150.0, 200.0],
            )?;
            println!(
                "E||H||_F^2 over {} draws: {:.4} (expected {}, relative error {:.4})",
                stats.draws,
                stats.mean_frobenius_sq,
                stats.expected_frobenius_sq,
                stats.relative_error()
            );
            println!("distance_m,p_los,pl_los_db,pl_nlos_db");
            for ((d, p), (_, los, nlos)) in stats.los_probability.iter().zip(&stats.path_loss_db) {
                println!("{d},{p},{los},{nlos}");
            }
        }
    }
    eprintln!("elapsed {:.2} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
