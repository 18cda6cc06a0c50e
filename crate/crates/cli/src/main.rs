use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dexholdem_core::bench::{
    aggregate_outcomes, counter_mismatches, generate_schedule, published_counters, read_label_lines, replay_labels,
    run_primitive_bench, TrialOutcome, TrialSpec,
};
use dexholdem_core::codec::{decode, encode};
use dexholdem_core::perceiver::named_noise;
use dexholdem_core::perception_eval::{
    aggregate_run, load_problem_set, reference_problem_set, render_header, render_rates, score_problem,
    write_problem_set, ColumnResult, RunRates,
};
use dexholdem_core::policy_sim::named_profile;
use dexholdem_core::session::{run_match, SessionConfig};
use dexholdem_core::wire::{serve, Hub};

#[derive(Parser)]
#[command(name = "dexholdem", version, about = "Closed-loop tabletop poker simulator and evaluation suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run hands headless, or serve them to consoles with --listen.
    Play {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "DEXHOLDEM_LISTEN")]
        listen: Option<String>,
        #[arg(long, default_value_t = 1)]
        hands: u32,
        /// Directory for session records.
        #[arg(long, env = "DEXHOLDEM_LOG_DIR")]
        log_dir: Option<PathBuf>,
    },
    /// Score one or more prediction runs over a problem directory layout.
    EvalPerception {
        /// Problem directories; several are averaged as repeated runs.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value = "run")]
        name: String,
    },
    /// Write a synthetic 36-problem set with noisy predictions.
    GenProblemSet {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gpt55-like")]
        noise: String,
    },
    /// Write the 80-trial primitive schedule.
    GenSchedule {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a primitive schedule under an outcome profile.
    Bench {
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Schedule file from gen-schedule; generated from --seed if absent.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SPSR/TCR report for an outcome log.
    Aggregate { log: PathBuf },
    /// Counters for a trajectory label file.
    ReplayCounters {
        labels: PathBuf,
        /// Published trajectory to compare against: i, ii or iii.
        #[arg(long)]
        compare: Option<String>,
    },
    /// List named outcome and noise profiles.
    Profiles,
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn play(config: &Path, listen: Option<String>, hands: u32, log_dir: Option<PathBuf>) -> Result<()> {
    let cfg: SessionConfig = read(config)?;
    if let Some(addr) = listen {
        let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
        log::info!("listening on {}", listener.local_addr()?);
        serve(listener, Arc::new(Hub::new(cfg)))?;
        return Ok(());
    }
    let records = run_match(&cfg, hands)?;
    for rec in &records {
        let c = &rec.counters;
        println!(
            "{}: cause={} result={} States={} AP={} DPP={} WA={} HL={} RC={} LAP={} LDP={}",
            rec.config.session_id,
            serde_json::to_value(rec.cause)?.as_str().unwrap_or_default(),
            rec.result.map_or("none".to_string(), |r| format!("{r:?}")),
            c.states,
            c.ap,
            c.dpp,
            c.wa,
            c.hl,
            c.rc,
            c.lap,
            c.ldp
        );
        if let Some(dir) = &log_dir {
            write(&dir.join(format!("{}.json", rec.config.session_id)), &encode(rec))?;
        }
    }
    Ok(())
}

fn eval_perception(dirs: &[PathBuf], strict: bool, report: Option<PathBuf>, name: &str) -> Result<()> {
    let mut runs = Vec::new();
    let mut per_run: Vec<Vec<ColumnResult>> = Vec::new();
    for dir in dirs {
        let problems = load_problem_set(dir, strict)?;
        let results: Vec<ColumnResult> = problems.iter().map(score_problem).collect();
        runs.push(RunRates::from_results(&results)?);
        per_run.push(results);
    }
    let avg = RunRates::average(&runs)?;
    println!("{}", render_header());
    println!("{}", render_rates(name, &avg));
    if let Some(path) = report {
        let reports = per_run.iter().map(|r| aggregate_run(r)).collect::<Result<Vec<_>, _>>()?;
        write(&path, &encode(&reports))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Play { config, listen, hands, log_dir } => play(&config, listen, hands, log_dir)?,
        Command::EvalPerception { dirs, strict, report, name } => eval_perception(&dirs, strict, report, &name)?,
        Command::GenProblemSet { out, seed, noise } => {
            let noise = named_noise(&noise)?;
            let problems = reference_problem_set(seed, &noise);
            fs::create_dir_all(&out)?;
            write_problem_set(&out, &problems)?;
            println!("wrote {} problems to {}", problems.len(), out.display());
        }
        Command::GenSchedule { seed, out } => {
            let schedule = generate_schedule(seed);
            let path = out.join("schedule.json");
            write(&path, &encode(&schedule))?;
            println!("wrote {} trials to {}", schedule.len(), path.display());
        }
        Command::Bench { profile, seed, schedule, out } => {
            let prof = named_profile(&profile)?;
            let schedule: Vec<TrialSpec> = match schedule {
                Some(p) => read(&p)?,
                None => generate_schedule(seed),
            };
            let (log, report) = run_primitive_bench(&schedule, &prof, seed)?;
            if let Some(out) = out {
                write(&out, &encode(&log))?;
            }
            println!("{}", encode(&report).trim_end());
        }
        Command::Aggregate { log } => {
            let log: Vec<TrialOutcome> = read(&log)?;
            let report = aggregate_outcomes(&log)?;
            println!("overall {} (N={})", report.overall, report.overall.n);
            for (g, r) in &report.groups {
                println!("{} {}", g.label(), r);
            }
        }
        Command::ReplayCounters { labels, compare } => {
            let text = fs::read_to_string(&labels).with_context(|| format!("reading {}", labels.display()))?;
            let report = replay_labels(&read_label_lines(&text))?;
            println!("{}", encode(&report).trim_end());
            if let Some(name) = compare {
                let Some(want) = published_counters(&name) else {
                    bail!("no published trajectory `{name}`");
                };
                let diff = counter_mismatches(&report, &want);
                if diff.is_empty() {
                    println!("matches published counters for ({name})");
                } else {
                    println!("differs from published counters for ({name}) in: {}", diff.join(", "));
                }
            }
        }
        Command::Profiles => {
            println!("outcome profiles:");
            for p in dexholdem_core::policy_sim::profile_names() {
                println!("  {p}");
            }
            println!("noise profiles:");
            for p in dexholdem_core::perceiver::noise_profile_names() {
                println!("  {p}");
            }
        }
    }
    Ok(())
}
