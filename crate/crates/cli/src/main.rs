use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ducg_core::kb::{compile_kb, decompose, parse_kb, serialize_kb, validate_kb, StateLiteral, SubDucg, VarId};
use ducg_core::KnowledgeBase;

mod run;

use run::{Outcome, RunOptions, Runner};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_UNEXPLAINED: u8 = 2;

#[derive(Parser)]
#[command(name = "ducg", version, about = "Cubic DUCG fault diagnosis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a knowledge base against the construction rules.
    Validate { kb: PathBuf },
    /// Merge the sub-DUCGs of one or more knowledge bases into one.
    Compile {
        #[arg(required = true)]
        kb: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Root ids to include (default: all).
        #[arg(long, value_delimiter = ',')]
        roots: Vec<u32>,
    },
    /// Diagnose a recorded signal file.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        signals: PathBuf,
    },
    /// Diagnose signal lines read from standard input.
    Stream {
        #[command(flatten)]
        common: Common,
    },
    /// Replay signals, then forward-predict from a hypothesis.
    Predict {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        root: u32,
        #[arg(long)]
        state: u32,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    kb: PathBuf,
    /// Write each surviving cubic graph as DOT into this directory.
    #[arg(long)]
    dot_dir: Option<PathBuf>,
    /// Also report ticks that did not trigger inference.
    #[arg(long)]
    verbose: bool,
    /// Print ranked tables instead of JSON lines.
    #[arg(long)]
    pretty: bool,
    /// Report 0 for timing_ms so output is reproducible.
    #[arg(long)]
    no_timing: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            dot_dir: self.dot_dir.clone(),
            verbose: self.verbose,
            pretty: self.pretty,
            timing: !self.no_timing,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Validate { kb } => validate(&kb),
        Command::Compile { kb, output, roots } => compile(&kb, &output, &roots),
        Command::Replay { common, signals } => {
            let kb = load_valid_kb(&common.kb)?;
            let text = read(&signals)?;
            let mut runner = Runner::new(kb, common.options(), io::stdout().lock())?;
            runner.replay(&text)?;
            Ok(exit_code(runner.finish()?))
        }
        Command::Stream { common } => {
            let kb = load_valid_kb(&common.kb)?;
            let mut runner = Runner::new(kb, common.options(), io::stdout().lock())?;
            for line in io::stdin().lock().lines() {
                let line = line.context("reading standard input")?;
                runner.stream_line(&line)?;
            }
            Ok(exit_code(runner.finish()?))
        }
        Command::Predict { kb, signals, root, state } => {
            let kb = load_valid_kb(&kb)?;
            let text = read(&signals)?;
            let options = RunOptions { dot_dir: None, verbose: false, pretty: false, timing: false };
            let mut runner = Runner::new(kb, options, io::sink())?;
            runner.replay(&text)?;
            let predictions = runner.predict(StateLiteral::new(VarId(root), state))?;
            let mut out = io::stdout().lock();
            for p in predictions {
                writeln!(out, "{}", serde_json::to_string(&p)?)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn exit_code(outcome: Outcome) -> u8 {
    if outcome.unexplained > 0 {
        EXIT_UNEXPLAINED
    } else {
        EXIT_OK
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_kb(path: &Path) -> Result<Result<KnowledgeBase, String>> {
    let text = read(path)?;
    Ok(parse_kb(&text).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        e.to_violation().to_json_line()
    }))
}

fn load_valid_kb(path: &Path) -> Result<Arc<KnowledgeBase>> {
    let kb = match load_kb(path)? {
        Ok(kb) => kb,
        Err(line) => {
            println!("{line}");
            bail!("{} is not a valid knowledge base", path.display());
        }
    };
    let violations = validate_kb(&kb);
    if !violations.is_empty() {
        for v in &violations {
            println!("{}", v.to_json_line());
        }
        bail!("{} fails validation with {} violation(s)", path.display(), violations.len());
    }
    Ok(Arc::new(kb))
}

fn validate(path: &Path) -> Result<u8> {
    let kb = match load_kb(path)? {
        Ok(kb) => kb,
        Err(line) => {
            println!("{line}");
            return Ok(EXIT_ERROR);
        }
    };
    let violations = validate_kb(&kb);
    for v in &violations {
        println!("{}", v.to_json_line());
    }
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_ERROR })
}

fn compile(paths: &[PathBuf], output: &Path, roots: &[u32]) -> Result<u8> {
    let mut subs: Vec<SubDucg> = Vec::new();
    for path in paths {
        let kb = match load_kb(path)? {
            Ok(kb) => kb,
            Err(line) => {
                println!("{line}");
                return Ok(EXIT_ERROR);
            }
        };
        if kb.subducg_decls().is_empty() {
            subs.extend(decompose(&kb));
        } else {
            for decl in kb.subducg_decls() {
                match SubDucg::from_decl(&kb, decl) {
                    Ok(sub) => subs.push(sub),
                    Err(e) => {
                        println!("{}", e.to_violation().to_json_line());
                        return Ok(EXIT_ERROR);
                    }
                }
            }
        }
    }
    let selection: BTreeSet<VarId> = roots.iter().copied().map(VarId).collect();
    let kb = match compile_kb(&subs, &selection) {
        Ok(kb) => kb,
        Err(e) => {
            println!("{}", e.to_violation().to_json_line());
            return Ok(EXIT_ERROR);
        }
    };
    let violations = validate_kb(&kb);
    for v in &violations {
        println!("{}", v.to_json_line());
    }
    if !violations.is_empty() {
        return Ok(EXIT_ERROR);
    }
    fs::write(output, serialize_kb(&kb)).with_context(|| format!("writing {}", output.display()))?;
    Ok(EXIT_OK)
}
