use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mocrowd::core::engine::observations;
use mocrowd::core::geolearn::{learn_efficiency, GeolearnParams, SeedLabel};
use mocrowd::export::{records, write_file, EVENTS};
use mocrowd::{
    export_results, hypotheses, hypothesis_experiments, load_config, presets, read_events, run_scenario, sweep, Axis,
    HarnessError, SweepSpec,
};

#[derive(Parser)]
#[command(name = "mocrowd", version, about = "Mobile crowdsourcing simulator and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and export its result set.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat a scenario along one axis and summarise accuracy per method.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// answers_per_question, questions_per_worker or spammer_ratio
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        /// Accuracy each method must reach in targets.csv.
        #[arg(long, default_value_t = 0.9)]
        target: f64,
        /// Also export every run's result set under runs/.
        #[arg(long)]
        export_runs: bool,
    },
    /// Paired-seed dispatch comparisons.
    Hypotheses {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relearn (location class, task type) efficiency from an exported run.
    LearnLocations {
        /// Result directory written by `run`.
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        min_samples: u32,
        /// JSON list of {class, task_type, verdict} seed labels.
        #[arg(long)]
        seeds: Option<PathBuf>,
    },
    /// Print a scenario config to start from.
    ExampleConfig {
        #[arg(long, default_value_t = 60)]
        workers: usize,
        #[arg(long, default_value_t = 100)]
        tasks_per_type: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            report("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn report(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": kind, "message": message.trim_end() });
    eprintln!("{body}");
}

fn create(path: &Path) -> Result<fs::File, HarnessError> {
    fs::File::create(path).map_err(|source| HarnessError::Io { path: path.into(), source })
}

fn mkdir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|source| HarnessError::Io { path: path.into(), source })
}

fn pretty(value: &impl serde::Serialize) -> Result<Vec<u8>, HarnessError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, out } => {
            let rs = run_scenario(&load_config(&config)?)?;
            for p in export_results(&rs, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep { config, axis, values, reps, out, target, export_runs } => {
            let mut spec = SweepSpec::new(axis, values, reps, load_config(&config)?);
            spec.target_accuracy = target;
            let outcome = sweep::sweep(&spec)?;
            mkdir(&out)?;
            sweep::write_summary(&outcome.summary, create(&out.join("summary.csv"))?)?;
            sweep::write_runs(&outcome.runs, create(&out.join("runs.csv"))?)?;
            sweep::write_targets(&outcome.targets, create(&out.join("targets.csv"))?)?;
            if export_runs {
                for (i, r) in outcome.runs.iter().enumerate() {
                    let dir = out.join("runs").join(format!("{i:03}_v{}_r{}", r.value, r.repetition));
                    export_results(&r.result, &dir)?;
                }
            }
            for t in &outcome.targets {
                let v = t.smallest_value.map_or("none".to_string(), |v| v.to_string());
                println!("{}: smallest {} reaching {} = {v}", t.method, spec.axis, t.target);
            }
        }
        Command::Hypotheses { config, seeds, out } => {
            let report = hypothesis_experiments(&load_config(&config)?, seeds)?;
            mkdir(&out)?;
            write_file(&out.join("hypotheses.json"), &pretty(&report)?)?;
            hypotheses::write_csv(&report, create(&out.join("hypotheses.csv"))?)?;
            for h in [&report.h1, &report.h2, &report.h3] {
                for c in &h.comparisons {
                    let d = c.diff.map_or("n/a".to_string(), |d| format!("{d:+.4}"));
                    println!("{} {}: {} - {} = {d} (se {:.4}, n {})", h.id, c.metric, c.arm_a, c.arm_b, c.se, c.n);
                }
                for f in &h.flags {
                    println!("{} flag: {f}", h.id);
                }
            }
        }
        Command::LearnLocations { results, k, out, min_samples, seeds } => {
            let events = read_events(&results.join(EVENTS))?;
            let (deliveries, answers) = records(&events);
            let mut params = GeolearnParams { min_samples, ..GeolearnParams::default() };
            params.cluster.k = k;
            if let Some(path) = seeds {
                let text = fs::read_to_string(&path).map_err(|source| HarnessError::Io { path, source })?;
                params.seeds = serde_json::from_str::<Vec<SeedLabel>>(&text)?;
            }
            let outcome = learn_efficiency(&observations(&deliveries, &answers), &params)
                .map_err(mocrowd::core::engine::EngineError::from)?;
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record(["class", "task_type", "verdict", "confidence", "samples", "cluster"])?;
            for (p, c) in outcome.pairs.iter().zip(&outcome.clustering.assignment) {
                w.write_record([
                    p.class.0.to_string(),
                    p.task_type.0.to_string(),
                    p.verdict.name().to_string(),
                    p.confidence.to_string(),
                    p.samples.to_string(),
                    c.to_string(),
                ])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        Command::ExampleConfig { workers, tasks_per_type, seed, out } => {
            let bytes = pretty(&presets::example_city(workers, tasks_per_type, seed))?;
            match out {
                Some(p) => {
                    write_file(&p, &bytes)?;
                }
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
        }
    }
    Ok(())
}
