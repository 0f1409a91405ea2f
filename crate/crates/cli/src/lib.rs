//! Batch driver for the `carnot-lift` library.
//!
//! Every subcommand reads its inputs, writes CSV/JSON artifacts into the
//! output directory, prints one summary line and maps the outcome onto a
//! fixed exit-code vocabulary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;

use carnot_lift::Error;
use clap::{CommandFactory, Parser};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

mod args;
mod commands;
mod input;
mod output;

pub use args::{Cli, Command};
pub use output::{Artifacts, Outcome, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NOT_LIFTABLE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "CARNOT_LIFT_OUT";
/// Output directory when neither `--out` nor the environment names one.
pub const DEFAULT_OUT: &str = "carnot-lift-out";

/// Library operation and the subcommand that exposes it.
pub const COVERAGE: &[(&str, &str)] = &[
    ("multiply", "mul"),
    ("inverse", "quotient"),
    ("left_quotient", "quotient"),
    ("quasi_metric", "quotient"),
    ("dilate", "dilate"),
    ("left_invariant_frame", "frame"),
    ("contact_coframe", "coframe"),
    ("validate", "validate-algebra"),
    ("lie_differential_d0", "build-extension"),
    ("build_extension", "build-extension"),
    ("potential_form", "potential"),
    ("graded_hom_compose", "obstruction"),
    ("hom_obstruction", "obstruction"),
    ("top_wedge_coefficient", "quaternionic-check"),
    ("endpoint", "endpoint"),
    ("line_integral", "lift-curve"),
    ("horizontal_lift", "lift-curve"),
    ("closed_loop_defect", "check-lift"),
    ("lift_map", "lift-map"),
    ("fiber_hom_extract", "fiber-hom"),
    ("pansu_quotient", "pansu"),
    ("contact_generator_check", "filiform-generator"),
    ("symplectic_defect", "quaternionic-check"),
    ("lambda_from_det", "quaternionic-check"),
    ("quaternionic_structure", "quaternionic-check"),
    ("quaternionic_rigidity_check", "quaternionic-check"),
    ("poincare_primitive", "moser-correct"),
    ("moser_correct", "moser-correct"),
    ("area_preserving_check", "area-check"),
    ("group_convolve", "moser-correct"),
    ("pullback_derivative", "decay-experiment"),
    ("decay_slope", "decay-experiment"),
    ("hoelder_seminorm", "seminorm"),
    ("weierstrass", "weierstrass"),
    ("young_integral", "young"),
];

/// What a run was asked to do, recorded next to its artifacts and
/// replayable with `--manifest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: Value,
    pub seed: u64,
    pub output_dir: String,
    /// Subcommand arguments, without global flags.
    pub argv: Vec<String>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Malformed(_) | Error::Io(_) | Error::Structure(_) => EXIT_DATA,
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::NotLiftable { .. } => EXIT_NOT_LIFTABLE,
        Error::Validation(_)
        | Error::Cocycle(..)
        | Error::Grading(..)
        | Error::ChartExit(_)
        | Error::Degenerate(_) => EXIT_VALIDATION,
    }
}

/// Runs the driver on a full argument vector (program name first) and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let words: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match resolve(cli, &words) {
        Ok((cli, command, replay)) => dispatch(cli, command, replay),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

type Resolved = (Cli, Command, Vec<String>);

/// Picks the subcommand either from argv or from a manifest file.
fn resolve(cli: Cli, words: &[String]) -> Result<Resolved, (i32, String)> {
    let program = Cli::command().get_name().to_string();
    match (&cli.command, &cli.manifest) {
        (Some(_), Some(_)) => Err((EXIT_USAGE, "give either a subcommand or --manifest, not both".into())),
        (None, None) => Err((EXIT_USAGE, "no subcommand given; see --help".into())),
        (Some(cmd), None) => {
            let argv = subcommand_argv(cmd, words);
            Ok((cli.clone(), cmd.clone(), argv))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| (EXIT_DATA, format!("{}: {e}", path.display())))?;
            let manifest: ExperimentManifest = serde_json::from_str(&text).map_err(|e| {
                (EXIT_DATA, format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
            })?;
            let mut full = vec![program];
            full.extend(manifest.argv.iter().cloned());
            let parsed = Cli::try_parse_from(&full).map_err(|e| (EXIT_DATA, format!("manifest argv: {e}")))?;
            let cmd = parsed.command.clone().ok_or((EXIT_DATA, "manifest names no subcommand".to_string()))?;
            let merged = Cli {
                command: None,
                manifest: None,
                out: cli.out.clone().or_else(|| Some(PathBuf::from(&manifest.output_dir))),
                seed: cli.seed.or(Some(manifest.seed)),
                jobs: cli.jobs,
            };
            Ok((merged, cmd, manifest.argv))
        }
    }
}

/// Arguments from the subcommand name on, with the global flags removed.
fn subcommand_argv(cmd: &Command, words: &[String]) -> Vec<String> {
    let Some(start) = words.iter().skip(1).position(|a| a == cmd.name()) else {
        return vec![cmd.name().to_string()];
    };
    let mut out = Vec::new();
    let mut rest = words[start + 1..].iter();
    while let Some(w) = rest.next() {
        let flag = w.split('=').next().unwrap_or("");
        if args::GLOBAL_FLAGS.contains(&flag) {
            if !w.contains('=') {
                rest.next();
            }
            continue;
        }
        out.push(w.clone());
    }
    out
}

fn output_dir(cli: &Cli) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    }
}

fn dispatch(cli: Cli, command: Command, argv: Vec<String>) -> i32 {
    let dir = output_dir(&cli);
    let mut artifacts = match Artifacts::create(&dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: cannot create output directory {}: {e}", dir.display());
            return EXIT_DATA;
        }
    };
    let name = command.name().to_string();
    let seed = cli.seed.unwrap_or(0);
    let mut inputs = Vec::new();
    let result = {
        let ctx = commands::Context { seed, inputs: &mut inputs, artifacts: &mut artifacts };
        let job = || commands::execute(&command, ctx);
        match cli.jobs {
            Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                Ok(pool) => pool.install(job),
                Err(e) => Err(Error::InvalidArgument(format!("cannot start {n} workers: {e}"))),
            },
            None => job(),
        }
    };
    let manifest = ExperimentManifest {
        command: name.clone(),
        inputs,
        parameters: serde_json::to_value(&command).unwrap_or(Value::Null),
        seed,
        output_dir: dir.display().to_string(),
        argv,
    };
    let (code, line, body) = match result {
        Ok(outcome) => (outcome.status.code(), outcome.line, json!({ "status": outcome.status, "result": outcome.summary })),
        Err(e) => {
            let code = exit_code(&e);
            (code, format!("error: {e}"), json!({ "status": "error", "error": e.to_string() }))
        }
    };
    let mut summary = body;
    summary["command"] = json!(name);
    summary["exit_code"] = json!(code);
    summary["artifacts"] = json!(artifacts.written());
    let written = artifacts
        .write_json("manifest.json", &manifest)
        .and_then(|_| artifacts.write_json(&format!("{name}.json"), &summary));
    if code == EXIT_OK || code == EXIT_VALIDATION || code == EXIT_NOT_LIFTABLE {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    if let Err(e) = written {
        eprintln!("error: writing summary: {e}");
        return if code == EXIT_OK { EXIT_DATA } else { code };
    }
    code
}
