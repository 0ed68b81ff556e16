mod commands;
mod error;
mod manifest;
mod opts;
mod svg;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use error::{CliError, CliResult};
use manifest::RunManifest;
use opts::{AnalyzeCommand, Cli, Command, Job, DEFAULT_OUT, DEFAULT_SEED};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let code = match panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            1
        }
    };
    ExitCode::from(code as u8)
}

fn read_config(path: &Option<PathBuf>) -> CliResult<Option<Value>> {
    let Some(p) = path else { return Ok(None) };
    let text = fs::read_to_string(p).map_err(CliError::io(format!("reading {}", p.display())))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
}

fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: Option<Value>,
    wrap: fn(T) -> Job,
) -> CliResult<(Job, Option<u64>)> {
    let (o, seed) = opts::merge(flags, config)?;
    Ok((wrap(o), seed))
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("`--threads` must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let config = read_config(&cli.config)?;
    let (job, config_seed) = match &cli.command {
        Command::Simulate(o) => resolve(o, config, Job::Simulate)?,
        Command::Verify(o) => resolve(o, config, Job::Verify)?,
        Command::Analyze(a) => match a {
            AnalyzeCommand::Lyapunov(o) => resolve(o, config, Job::Lyapunov)?,
            AnalyzeCommand::Dimension(o) => resolve(o, config, Job::Dimension)?,
            AnalyzeCommand::Recurrence(o) => resolve(o, config, Job::Recurrence)?,
            AnalyzeCommand::Periodic(o) => resolve(o, config, Job::Periodic)?,
            AnalyzeCommand::Attractor(o) => resolve(o, config, Job::Attractor)?,
        },
        Command::Scan(o) => {
            let spec = match (&o.spec, config) {
                (Some(_), Some(_)) => return Err(CliError::Usage("give either `--spec` or `--config`".into())),
                (Some(p), None) => read_config(&Some(p.clone()))?.expect("path given"),
                (None, Some(v)) => v,
                (None, None) => return Err(CliError::Usage("scan needs `--spec`".into())),
            };
            (Job::Scan(spec), None)
        }
        Command::Kneading(o) => resolve(o, config, Job::Kneading)?,
        Command::Replay(r) => return replay(&r.manifest, cli.out.as_deref()),
    };
    let mut job = job;
    let seed = match (&mut job, cli.seed) {
        (Job::Scan(Value::Object(spec)), flag) => {
            if let Some(s) = flag {
                spec.insert("seed".into(), s.into());
            }
            let seed = spec.entry("seed").or_insert(DEFAULT_SEED.into());
            seed.as_u64().unwrap_or(DEFAULT_SEED)
        }
        (_, flag) => flag.or(config_seed).unwrap_or(DEFAULT_SEED),
    };
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let started = manifest::now();
    let outcome = commands::run(&job, seed)?;
    let m = RunManifest {
        command: job.name().to_string(),
        config: job.config(),
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: manifest::now(),
        outputs: manifest::describe(&outcome.files),
    };
    manifest::write_all(&out_dir, &outcome.files, &m)?;
    println!("{}", outcome.summary);
    println!("outputs written to {}", out_dir.display());
    Ok(if outcome.ok { 0 } else { 1 })
}

fn replay(path: &Path, out: Option<&Path>) -> CliResult<i32> {
    let old = manifest::read(path)?;
    let job = Job::from_parts(&old.command, old.config.clone())?;
    let started = manifest::now();
    let outcome = commands::run(&job, old.seed)?;
    let fresh = manifest::describe(&outcome.files);
    let mut same = fresh.len() == old.outputs.len();
    for f in &fresh {
        let status = match old.outputs.iter().find(|o| o.file == f.file) {
            Some(o) if o.sha256 == f.sha256 => "identical",
            Some(_) => "DIFFERS",
            None => "NEW",
        };
        same &= status == "identical";
        println!("{:<20} {status} {}", f.file, f.sha256);
    }
    for o in old.outputs.iter().filter(|o| !fresh.iter().any(|f| f.file == o.file)) {
        same = false;
        println!("{:<20} MISSING", o.file);
    }
    if let Some(dir) = out {
        let m = RunManifest {
            started,
            finished: manifest::now(),
            outputs: fresh,
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..old
        };
        manifest::write_all(dir, &outcome.files, &m)?;
    }
    println!("{}", if same { "replay identical" } else { "replay differs" });
    Ok(if same { 0 } else { 1 })
}
