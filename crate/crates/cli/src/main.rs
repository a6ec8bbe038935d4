//! `agentprobe`: run single tests or whole suites against a subject agent,
//! and render metrics tables from run directories and annotation files.
//!
//! Exit codes for `run`: 0 pass, 10 bugs found, 20 environment failure,
//! 1 framework error, 2 usage error. `suite` exits with the most severe
//! run outcome on the same scale.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use agentprobe::config::SuiteConfig;
use agentprobe::env::http::EmailServer;
use agentprobe::env::{EnvConfig, Environment};
use agentprobe::metrics::{build_suite_metrics, render_text, AnnotationSet, SuiteMetrics};
use agentprobe::pipeline::RunRecord;
use agentprobe::suite::{
    self, load_features, prepare, read_results, run_all, write_results, FeatureEntry, SuiteError, SuiteReport,
};
use clap::{Args, Parser, Subcommand};

const USAGE: u8 = 2;
const FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "agentprobe", version, about = "End-to-end tests for AI agents")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one feature from the config's features file.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        feature: String,
    },
    /// Run every feature and aggregate the results.
    Suite {
        #[command(flatten)]
        common: Common,
    },
    /// Render metrics tables from run directories and annotation files.
    Report {
        /// JSONL annotation file; the file stem names the tester system.
        #[arg(long = "annotations")]
        annotations: Vec<PathBuf>,
        /// System the given runs belong to.
        #[arg(long, default_value = "agentprobe")]
        system: String,
        #[arg(long)]
        pricing: Option<PathBuf>,
        /// Also write the tables as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Run directories, or suite output directories holding `runs/`.
        paths: Vec<PathBuf>,
    },
    /// Serve `POST /send_email` over HTTP from a fresh environment.
    ServeEmail {
        #[arg(long, default_value = "127.0.0.1:8025")]
        addr: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Flags shared by `run` and `suite`. They override the config file and
/// `SPECOPS_*` variables, and per-feature settings where both exist.
#[derive(Args)]
struct Common {
    #[arg(long, env = "SPECOPS_CONFIG")]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Usage(String),
    Framework(String),
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Empty(_) | SuiteError::UnknownFeature(_) => Failure::Usage(e.to_string()),
            _ => Failure::Framework(e.to_string()),
        }
    }
}

fn framework(e: impl std::fmt::Display) -> Failure {
    Failure::Framework(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Run { common, feature } => cmd_run(&common, &feature),
        Cmd::Suite { common } => cmd_suite(&common),
        Cmd::Report { annotations, system, pricing, json, paths } => {
            cmd_report(&annotations, &system, pricing.as_deref(), json.as_deref(), &paths)
        }
        Cmd::ServeEmail { addr, seed } => serve_email(&addr, seed),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("agentprobe: {m}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Framework(m)) => {
            eprintln!("agentprobe: {m}");
            ExitCode::from(FAILURE)
        }
    }
}

fn load_config(c: &Common) -> Result<SuiteConfig, Failure> {
    let mut cfg = SuiteConfig::load(&c.config).map_err(framework)?;
    cfg.apply_env(std::env::vars()).map_err(framework)?;
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(t) = &c.transcript {
        cfg.provider.transcript = Some(t.clone());
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(m) = c.max_retries {
        cfg.max_retries = m;
    }
    cfg.validate().map_err(framework)?;
    Ok(cfg)
}

fn load_entries(c: &Common, cfg: &SuiteConfig) -> Result<Vec<FeatureEntry>, Failure> {
    let mut entries = load_features(&cfg.features)?;
    for e in &mut entries {
        if c.transcript.is_some() {
            e.transcript = None;
        }
        if c.seed.is_some() {
            e.seed = None;
        }
        if c.max_retries.is_some() {
            e.max_retries = None;
        }
    }
    Ok(entries)
}

fn cmd_run(c: &Common, feature: &str) -> Result<u8, Failure> {
    let cfg = load_config(c)?;
    let entries = load_entries(c, &cfg)?;
    let entry = entries
        .into_iter()
        .find(|e| e.feature.id == feature)
        .ok_or_else(|| Failure::from(SuiteError::UnknownFeature(feature.into())))?;
    let prepared = prepare(&cfg, std::slice::from_ref(&entry))?;
    cfg.ensure_out_writable().map_err(framework)?;
    let rec = prepared[0].execute().map_err(Failure::Framework)?;
    let dir = cfg.out.join("runs").join(feature);
    rec.write_dir(&dir).map_err(|e| framework(format!("{}: {e}", dir.display())))?;
    let s = rec.summary();
    println!("{feature}: {} ({} bugs) -> {}", s.outcome, s.bugs, dir.display());
    if let Some(e) = &rec.error {
        eprintln!("agentprobe: {e}");
    }
    Ok(suite::exit_code(&rec) as u8)
}

fn cmd_suite(c: &Common) -> Result<u8, Failure> {
    let cfg = load_config(c)?;
    let entries = load_entries(c, &cfg)?;
    let prepared = prepare(&cfg, &entries)?;
    cfg.ensure_out_writable().map_err(framework)?;
    let pricing = cfg.load_pricing().map_err(framework)?;
    let runs = run_all(&prepared, cfg.jobs);
    let report = SuiteReport::fold(&runs, pricing.as_ref());
    write_results(&cfg.out, &runs, &report)?;

    let records: Vec<RunRecord> = runs.iter().filter_map(|r| r.record.as_ref().ok().cloned()).collect();
    let mut set = AnnotationSet::default();
    set.add_records(&records);
    let metrics = build_suite_metrics("agentprobe", &set, &report.runs, pricing.as_ref()).map_err(framework)?;
    write_metrics(&cfg.out, std::slice::from_ref(&metrics))?;

    print!("{}", report.render_text());
    println!("results in {}", cfg.out.display());
    Ok(suite::suite_exit_code(&report) as u8)
}

fn write_metrics(out: &Path, ms: &[SuiteMetrics]) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(ms).map_err(framework)?;
    std::fs::write(out.join("metrics.json"), json).map_err(framework)?;
    std::fs::write(out.join("metrics.txt"), render_text(ms)).map_err(framework)
}

fn collect_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        let r = if p.join("record.json").exists() {
            RunRecord::read_dir(p).map(|r| vec![r])
        } else if p.join("runs").is_dir() {
            read_results(p)
        } else {
            return Err(Failure::Usage(format!("{} is neither a run nor a suite directory", p.display())));
        };
        out.extend(r.map_err(|e| framework(format!("{}: {e}", p.display())))?);
    }
    Ok(out)
}

fn cmd_report(
    annotations: &[PathBuf],
    system: &str,
    pricing: Option<&Path>,
    json: Option<&Path>,
    paths: &[PathBuf],
) -> Result<u8, Failure> {
    let pricing = match pricing {
        Some(p) => {
            let mut cfg = SuiteConfig::new("");
            cfg.pricing = Some(p.to_path_buf());
            cfg.load_pricing().map_err(framework)?
        }
        None => None,
    };
    let records = collect_records(paths)?;
    let summaries: Vec<_> = records.iter().map(RunRecord::summary).collect();

    let mut systems: Vec<(String, AnnotationSet)> = Vec::new();
    for a in annotations {
        let name = a.file_stem().map_or_else(|| "annotations".into(), |s| s.to_string_lossy().into_owned());
        let set = AnnotationSet::load(a).map_err(framework)?;
        systems.push((name, set));
    }
    if !records.is_empty() || systems.is_empty() {
        if !systems.iter().any(|(n, _)| n == system) {
            systems.insert(0, (system.to_string(), AnnotationSet::default()));
        }
        let own = systems.iter_mut().find(|(n, _)| n == system).map(|(_, s)| s);
        if let Some(set) = own {
            set.add_records(&records);
        }
    }

    let mut ms = Vec::new();
    for (name, set) in &systems {
        let runs = if name == system { &summaries[..] } else { &[] };
        ms.push(build_suite_metrics(name, set, runs, pricing.as_ref()).map_err(framework)?);
    }
    print!("{}", render_text(&ms));
    for m in &ms {
        for w in &m.warnings {
            eprintln!("warning: {}: {w}", m.system);
        }
    }
    if let Some(j) = json {
        let text = serde_json::to_string_pretty(&ms).map_err(framework)?;
        std::fs::write(j, text).map_err(|e| framework(format!("{}: {e}", j.display())))?;
    }
    Ok(0)
}

fn serve_email(addr: &str, seed: u64) -> Result<u8, Failure> {
    let env = Environment::new(&EnvConfig { seed, ..EnvConfig::default() }).map_err(framework)?;
    let server = EmailServer::start(Arc::new(Mutex::new(env)), addr).map_err(framework)?;
    println!("serving {}", server.url());
    server.join();
    Ok(0)
}
