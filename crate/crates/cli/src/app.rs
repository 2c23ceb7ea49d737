use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use idiomlint_core::sampler::BaselineProfile;
use idiomlint_core::{Error, Result, Split};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{validate_config, Overrides};
use crate::stages::{self, EvalArgs, ResponseSource, RewardArgs, SampleArgs, StatsArgs, StatsMetric};

#[derive(Debug, Parser)]
#[command(name = "idiomlint", version, about = "Idiom-violation dataset, preference and evaluation pipeline")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, short, global = true, default_value = "idiomlint.toml")]
    pub config: PathBuf,
    /// Output directory, overriding `out_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lint the corpus and write the balanced SFT dataset.
    GenData,
    /// Query the model endpoint for every dataset instance.
    Sample(SampleCmd),
    /// Parse and score a response journal.
    Reward(RewardCmd),
    /// Build rejection-sampled preference pairs.
    BuildDpo(PreferenceCmd),
    /// Build the rejection-sampled SFT set.
    BuildRssft(PreferenceCmd),
    /// Score predictions against the dataset's gold lines.
    Eval(EvalCmd),
    /// Build the hard-idiom benchmark and optionally score predictions on it.
    Bench(BenchCmd),
    /// Paired significance tests between per-instance score files.
    Stats(StatsCmd),
    /// Check the config and print it with defaults filled in.
    CheckConfig,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown value '{s}'"))
}

#[derive(Debug, Args)]
pub struct SampleCmd {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Journal file name inside the output directory.
    #[arg(long)]
    pub journal: Option<String>,
    /// Restrict to these splits (repeatable).
    #[arg(long = "split", value_parser = parse_enum::<Split>)]
    pub splits: Vec<Split>,
    /// Draw a single sample with fixed baseline settings instead of the sampling plan.
    #[arg(long, value_parser = parse_enum::<BaselineProfile>)]
    pub profile: Option<BaselineProfile>,
}

#[derive(Debug, Args)]
pub struct RewardCmd {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub journal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreferenceCmd {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Score this raw journal instead of reading the reward stage's output.
    #[arg(long, conflicts_with = "rewarded")]
    pub journal: Option<PathBuf>,
    #[arg(long)]
    pub rewarded: Option<PathBuf>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Percentage of no-violation instances whose pairs are kept.
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub sample_index: usize,
    /// Prefix for the metric files.
    #[arg(long, default_value = "eval")]
    pub name: String,
    #[arg(long = "split", value_parser = parse_enum::<Split>)]
    pub splits: Vec<Split>,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub sample_index: usize,
}

#[derive(Debug, Args)]
pub struct StatsCmd {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long = "candidate", required = true)]
    pub candidates: Vec<PathBuf>,
    #[arg(long, default_value = "f1", value_parser = parse_enum::<StatsMetric>)]
    pub metric: StatsMetric,
    #[arg(long, default_value = "significance")]
    pub name: String,
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(cli: Cli) -> Result<()> {
    let mut overrides = Overrides {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        ..Default::default()
    };
    if let Command::BuildDpo(p) | Command::BuildRssft(p) = &cli.command {
        overrides.eta = p.eta;
        overrides.gamma = p.gamma;
        overrides.no_violation_fraction = p.fraction;
    }
    let cfg = validate_config(&cli.config, &overrides)?;
    match cli.command {
        Command::GenData => print(&stages::gen_data(&cfg)?),
        Command::Sample(c) => print(&stages::sample(
            &cfg,
            &SampleArgs {
                dataset: c.dataset,
                journal: c.journal,
                splits: c.splits,
                profile: c.profile,
            },
        )?),
        Command::Reward(c) => {
            let n = stages::reward(
                &cfg,
                &RewardArgs {
                    dataset: c.dataset,
                    journal: c.journal,
                },
            )?;
            print(&serde_json::json!({ "responses": n }));
        }
        Command::BuildDpo(c) => print(&stages::build_dpo(&cfg, &source(c))?),
        Command::BuildRssft(c) => print(&stages::build_rssft(&cfg, &source(c))?),
        Command::Eval(c) => {
            let outcome = stages::eval(
                &cfg,
                &EvalArgs {
                    dataset: c.dataset,
                    predictions: c.predictions,
                    sample_index: c.sample_index,
                    name: c.name,
                    splits: c.splits,
                },
            )?;
            print!("{}", outcome.report.to_table());
            if outcome.missing_predictions > 0 {
                log::warn!("{} instances had no prediction", outcome.missing_predictions);
            }
        }
        Command::Bench(c) => {
            let outcome = stages::bench(&cfg, c.predictions.as_deref(), c.sample_index)?;
            match outcome.report {
                Some(r) => print!("{}", r.to_table()),
                None => print(&outcome.summary),
            }
        }
        Command::Stats(c) => print(&stages::stats(
            &cfg,
            &StatsArgs {
                baseline: c.baseline,
                candidates: c.candidates,
                metric: c.metric,
                name: c.name,
            },
        )?),
        Command::CheckConfig => print(&cfg),
    }
    Ok(())
}

fn source(c: PreferenceCmd) -> ResponseSource {
    ResponseSource {
        dataset: c.dataset,
        journal: c.journal,
        rewarded: c.rewarded,
    }
}

/// Runs the command line and returns the process exit code:
/// 0 on success, 2 for usage or configuration errors, 1 for anything else.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enum_values_accept_dashes() {
        assert_eq!(parse_enum::<Split>("far-transfer"), Ok(Split::FarTransfer));
        assert_eq!(parse_enum::<Split>("in_domain"), Ok(Split::InDomain));
        assert!(parse_enum::<Split>("nowhere").is_err());
        assert_eq!(parse_enum::<StatsMetric>("detection"), Ok(StatsMetric::Detection));
    }

    #[test]
    fn per_command_overrides_parse() {
        let cli = Cli::try_parse_from(["idiomlint", "build-dpo", "--eta", "0.5", "--fraction", "20"]).unwrap();
        match cli.command {
            Command::BuildDpo(p) => assert_eq!((p.eta, p.fraction), (Some(0.5), Some(20.0))),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["idiomlint", "build-dpo", "--journal", "a", "--rewarded", "b"]).is_err());
    }
}
