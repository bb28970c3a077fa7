//! Command-line front end.

use crate::ast::{SlpModel, StmtKind};
use crate::discharge::{check_all, select, CheckOptions, Verdict};
use crate::kernel::Interpretation;
use crate::parser::parse_model;
use crate::po::GenOptions;
use crate::relsem::write_set;
use crate::scope::positions;
use crate::smt::export_smt;
use crate::trace::{check_divergence, check_inclusion, Divergence, Inclusion, TraceOptions};
use crate::validate::{validate_model, Severity};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_RESOURCES: i32 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum RefMode {
    #[default]
    Inter,
    Union,
}

#[derive(Debug, Parser)]
#[command(name = "slp", version, about = "Check SLP models by finite enumeration")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Cmd,
    /// Trace depth for `trace`.
    #[arg(long, global = true, default_value_t = 18)]
    pub depth: usize,
    /// Glob over obligation ids.
    #[arg(long = "po", global = true, value_name = "PATTERN")]
    pub po: Option<String>,
    /// Close each part of a parallel substitution under ◇ separately.
    #[arg(long, global = true)]
    pub strict_paper: bool,
    /// Require WD feasibility in every state, not just in some state.
    #[arg(long, global = true)]
    pub strict_feasibility: bool,
    /// Whether REF_GRT asks for every refined event (inter) or any of them (union).
    #[arg(long, global = true, value_enum, default_value_t = RefMode::Inter)]
    pub ref_mode: RefMode,
    /// Write the JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Write SMT-LIB scripts into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub smt: Option<PathBuf>,
    /// Worker threads; 0 picks the available parallelism.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Run this command on every written script.
    #[arg(long, global = true, value_name = "CMD")]
    pub solver: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate and check every obligation.
    Check { file: PathBuf },
    /// List obligations with their sequents.
    Pos { file: PathBuf },
    /// Write one SMT-LIB script per obligation.
    ExportSmt { file: PathBuf },
    /// Trace inclusion against the machine and divergence.
    Trace { file: PathBuf },
    /// Write sets of every statement.
    Rw { file: PathBuf },
    /// Parse and validate only.
    Parse { file: PathBuf },
}

impl Cmd {
    fn file(&self) -> &Path {
        match self {
            Cmd::Check { file }
            | Cmd::Pos { file }
            | Cmd::ExportSmt { file }
            | Cmd::Trace { file }
            | Cmd::Rw { file }
            | Cmd::Parse { file } => file,
        }
    }
}

impl RunConfig {
    fn gen(&self) -> GenOptions {
        GenOptions {
            strict_paper: self.strict_paper,
            strict_feasibility: self.strict_feasibility,
            ref_union: self.ref_mode == RefMode::Union,
        }
    }

    fn check_options(&self) -> CheckOptions {
        CheckOptions { gen: self.gen(), filter: self.po.clone(), workers: self.workers }
    }
}

struct Failure(i32, String);

type CliResult<T> = Result<T, Failure>;

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure(EXIT_ERROR, e.to_string())
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parse `args` and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(&cfg, out) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "slp: {msg}");
            code
        }
    }
}

fn load(path: &Path) -> CliResult<SlpModel> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let model = parse_model(&text).map_err(|e| config_error(format!("{}:{e}", path.display())))?;
    let errors: Vec<String> = validate_model(&model)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| format!("{}:{d}", path.display()))
        .collect();
    if !errors.is_empty() {
        return Err(config_error(errors.join("\n")));
    }
    Ok(model)
}

fn interpretation(model: &SlpModel) -> CliResult<Interpretation> {
    let mut interp = Interpretation::from_model(model).map_err(config_error)?;
    if let Ok(cap) = std::env::var("SLP_STATE_CAP") {
        interp.state_cap = cap.trim().parse().map_err(|_| config_error(format!("SLP_STATE_CAP: not a number: {cap}")))?;
    }
    Ok(interp)
}

fn io(e: std::io::Error) -> Failure {
    config_error(e)
}

fn execute(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<i32> {
    let model = load(cfg.command.file())?;
    match &cfg.command {
        Cmd::Parse { .. } => {
            for d in validate_model(&model) {
                writeln!(out, "{d}").map_err(io)?;
            }
            writeln!(out, "{}: ok", model.name).map_err(io)?;
            Ok(EXIT_OK)
        }
        Cmd::Rw { .. } => rw(&model, out),
        Cmd::Pos { .. } => {
            let interp = interpretation(&model)?;
            let pos = select(&model, &interp, &cfg.check_options()).map_err(config_error)?;
            for po in &pos {
                writeln!(out, "{}  {}  {}", po.id, po.family, po.sequent).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Cmd::ExportSmt { .. } => {
            let interp = interpretation(&model)?;
            let dir = cfg.smt.clone().unwrap_or_else(|| PathBuf::from("."));
            let pos = select(&model, &interp, &cfg.check_options()).map_err(config_error)?;
            let mut code = EXIT_OK;
            std::fs::create_dir_all(&dir).map_err(io)?;
            for po in &pos {
                match export_smt(po, &model) {
                    Ok(script) => {
                        let path = dir.join(format!("{}.smt2", po.id));
                        std::fs::write(&path, script).map_err(io)?;
                        writeln!(out, "{}", path.display()).map_err(io)?;
                        solve(cfg, &path, out)?;
                    }
                    Err(e) => {
                        writeln!(out, "{}: {e}", po.id).map_err(io)?;
                        code = EXIT_RESOURCES;
                    }
                }
            }
            Ok(code)
        }
        Cmd::Check { .. } => {
            let interp = interpretation(&model)?;
            let report = check_all(&model, &interp, &cfg.check_options()).map_err(config_error)?;
            write!(out, "{}", report.table()).map_err(io)?;
            if let Some(path) = &cfg.json {
                let timings = std::env::var_os("SLP_TIMINGS").is_some();
                std::fs::write(path, report.to_json(timings)).map_err(io)?;
            }
            if let Some(dir) = &cfg.smt {
                std::fs::create_dir_all(dir).map_err(io)?;
                let pos = select(&model, &interp, &cfg.check_options()).map_err(config_error)?;
                for r in report.results.iter().filter(|r| r.verdict != Verdict::Discharged) {
                    let Some(po) = pos.iter().find(|p| p.id == r.id) else { continue };
                    match export_smt(po, &model) {
                        Ok(script) => {
                            let path = dir.join(format!("{}.smt2", po.id));
                            std::fs::write(&path, script).map_err(io)?;
                            solve(cfg, &path, out)?;
                        }
                        Err(e) => writeln!(out, "{}: {e}", po.id).map_err(io)?,
                    }
                }
            }
            Ok(report.exit_code())
        }
        Cmd::Trace { .. } => trace(cfg, &model, out),
    }
}

fn solve(cfg: &RunConfig, script: &Path, out: &mut dyn Write) -> CliResult<()> {
    let Some(cmd) = &cfg.solver else { return Ok(()) };
    let mut words = cmd.split_whitespace();
    let prog = words.next().ok_or_else(|| config_error("--solver: empty command"))?;
    let output = Command::new(prog)
        .args(words)
        .arg(script)
        .output()
        .map_err(|e| config_error(format!("--solver {cmd}: {e}")))?;
    let verdict = String::from_utf8_lossy(&output.stdout);
    writeln!(out, "{}: {}", script.display(), verdict.lines().next().unwrap_or("").trim()).map_err(io)
}

fn rw(model: &SlpModel, out: &mut dyn Write) -> CliResult<i32> {
    for p in &model.processes {
        let Some(body) = &p.body else { continue };
        for (path, stmt) in positions(body) {
            let label = match (&stmt.label, &stmt.kind) {
                (Some(l), _) => format!(" {l}"),
                (None, StmtKind::Subst(sub)) => match sub.parts().first() {
                    Some((Some(l), _)) => format!(" {l}"),
                    _ => String::new(),
                },
                _ => String::new(),
            };
            let ws: Vec<String> = write_set(stmt).into_iter().collect();
            writeln!(out, "{}.{path}{label}  {{{}}}", p.label, ws.join(", ")).map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

fn trace(cfg: &RunConfig, model: &SlpModel, out: &mut dyn Write) -> CliResult<i32> {
    let interp = interpretation(model)?;
    let opts = TraceOptions { depth: cfg.depth, workers: cfg.workers, ..TraceOptions::default() };
    let mut code = EXIT_OK;
    let worse = |code: i32, new: i32| if new == EXIT_VIOLATED || code == EXIT_VIOLATED { EXIT_VIOLATED } else { code.max(new) };
    let mut any = false;
    for p in &model.processes {
        let name = p.label.text.as_str();
        if model.refmap(name).is_some() {
            any = true;
            let inc = check_inclusion(model, name, &interp, &opts).map_err(config_error)?;
            writeln!(out, "{name}  inclusion  {inc}").map_err(io)?;
            if let Inclusion::Violated { .. } = inc {
                code = worse(code, EXIT_VIOLATED);
            }
        }
        let div = check_divergence(model, name, &interp).map_err(config_error)?;
        writeln!(out, "{name}  divergence  {div}").map_err(io)?;
        match div {
            Divergence::Discharged => {}
            Divergence::Violated(_) => code = worse(code, EXIT_VIOLATED),
            Divergence::Skipped(_) => code = worse(code, EXIT_RESOURCES),
        }
    }
    if !any {
        writeln!(out, "no REFMAP: trace inclusion not checked").map_err(io)?;
    }
    Ok(code)
}
