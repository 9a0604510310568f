use std::path::PathBuf;
use std::process::ExitCode;

use aircomp::channel::ScenarioKind;
use aircomp::protocol::DecoderKind;
use aircomp_harness::config::FileConfig;
use aircomp_harness::learning::summarize;
use aircomp_harness::table::emit_csv;
use aircomp_harness::{analog, selftest, sweep, with_threads, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aircomp", version, about = "Digital over-the-air aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// SUM BER versus SNR for a set of decoders.
    BerSweep(Common),
    /// Federated learning accuracy over the configured uplinks.
    Feel(Common),
    /// Aggregation MSE of analog (and optionally digital) rounds.
    AnalogCompare(Common),
    /// Exhaustive-search checks of the joint decoders on the 7/5 code.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV (defaults to <subcommand>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Decoders, comma separated: fsjd, rsjd<R>, psud.
    #[arg(long, value_delimiter = ',')]
    decoder: Vec<DecoderKind>,
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<f64>,
    /// Trials per point (rounds for analog-compare, seeds for feel,
    /// ordering trials for selftest).
    #[arg(long)]
    trials: Option<usize>,
    /// Record decoding time in the wall_time column. Output then varies between runs.
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn file(&self) -> Result<FileConfig> {
        let mut f = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        if self.seed.is_some() {
            f.seed = self.seed;
        }
        Ok(f)
    }

    fn out(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::BerSweep(c) => {
            let mut spec = c.file()?.sweep()?;
            if !c.decoder.is_empty() {
                spec.decoders = c.decoder.clone();
            }
            if let Some(s) = c.scenario {
                spec.scenario = s;
            }
            if !c.snr.is_empty() {
                spec.snr_db = c.snr.clone();
            }
            if let Some(t) = c.trials {
                spec.trials = t;
            }
            spec.timing = c.timing;
            let rows = with_threads(c.threads, || sweep::sweep_sum_ber(&spec))??;
            let out = c.out("ber_sweep.csv");
            emit_csv(&rows, &out)?;
            for r in &rows {
                println!(
                    "{:>8} {:>6.2} dB  sum_ber {:.3e}  [{:.2e}, {:.2e}]",
                    r.decoder.to_string(),
                    r.snr_db,
                    r.sum_ber,
                    r.ci_low,
                    r.ci_high
                );
            }
            for (d, s0, s1) in sweep::monotonicity_violations(&rows) {
                println!("warning: {d} SUM BER rises from {s0} dB to {s1} dB");
            }
            println!("wrote {}", out.display());
        }
        Cmd::Feel(c) => {
            let f = c.file()?;
            let mut spec = f.feel()?;
            if let Some(s) = c.scenario {
                spec.base.scenario = s;
            }
            if let Some(t) = c.trials {
                spec.seeds = t;
            }
            if !c.decoder.is_empty() || !c.snr.is_empty() {
                let s = &f.feel;
                let mut uplinks: Vec<_> = spec.arms.iter().map(|a| a.uplink).collect();
                uplinks.dedup();
                let bits = s.bits.clone().unwrap_or_else(|| vec![13]);
                let decoders = if c.decoder.is_empty() {
                    s.decoders.clone().unwrap_or_else(|| vec![DecoderKind::Rsjd(512)])
                } else {
                    c.decoder.clone()
                };
                let snr = if c.snr.is_empty() {
                    s.snr_db.clone().unwrap_or_else(|| vec![9.0, 20.0])
                } else {
                    c.snr.clone()
                };
                spec.arms = aircomp_harness::learning::arms(&uplinks, &decoders, &snr, &bits);
            }
            let rows = with_threads(c.threads, || aircomp_harness::learning::sweep_feel(&spec))??;
            let out = c.out("feel.csv");
            emit_csv(&rows, &out)?;
            for s in summarize(&rows) {
                println!(
                    "{:<32} final accuracy {:.3} ± {:.3} ({} runs, {} clipped)",
                    s.arm.label(),
                    s.mean_final,
                    s.se_final,
                    s.runs,
                    s.clipped
                );
            }
            println!("wrote {}", out.display());
        }
        Cmd::AnalogCompare(c) => {
            let mut spec = c.file()?.analog();
            if let Some(d) = c.decoder.first() {
                spec.decoder = *d;
            }
            if let Some(s) = c.scenario {
                spec.scenario = s;
            }
            if !c.snr.is_empty() {
                spec.snr_db = c.snr.clone();
            }
            if let Some(t) = c.trials {
                spec.rounds = t;
            }
            let rows = with_threads(c.threads, || analog::analog_compare(&spec))??;
            let out = c.out("analog_compare.csv");
            emit_csv(&rows, &out)?;
            for r in &rows {
                println!(
                    "{:<18} {:>6.2} dB  mse {:.4e} ± {:.1e}",
                    r.mode.name(),
                    r.snr_db,
                    r.mean_mse,
                    r.se_mse
                );
            }
            println!("wrote {}", out.display());
        }
        Cmd::Selftest(c) => {
            let mut spec = c.file()?.selftest();
            if let Some(s) = c.scenario {
                spec.scenarios = vec![s];
            }
            if let Some(t) = c.trials {
                spec.ordering_trials = t;
            }
            let rows = with_threads(c.threads, || selftest::selftest(&spec))??;
            let out = c.out("selftest.csv");
            emit_csv(&rows, &out)?;
            let mut ok = true;
            for r in &rows {
                let pass = r.metric_matches == r.instances;
                ok &= pass;
                println!(
                    "{:<15} metric {}/{} exact  errors oracle {} fsjd {} psud {} of {}",
                    r.scenario.to_string(),
                    r.metric_matches,
                    r.instances,
                    r.oracle_errors,
                    r.fsjd_errors,
                    r.psud_errors,
                    r.total_sum_bits
                );
            }
            println!("wrote {}", out.display());
            if !ok {
                return Err(aircomp_harness::Error::Config(
                    "selftest: trellis metric differs from exhaustive search".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
