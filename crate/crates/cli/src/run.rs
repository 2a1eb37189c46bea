//! Shared tick loop behind `replay`, `stream` and `predict`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use ducg_core::dot::export_dot;
use ducg_core::gateway::{classify_signal_line, map_reading, GatewayConfig, Reading, SignalLine, TickBatcher};
use ducg_core::inference::Prediction;
use ducg_core::kb::StateLiteral;
use ducg_core::monitor::Monitor;
use ducg_core::{DiagnosisReport, KnowledgeBase, Status};

pub struct RunOptions {
    pub dot_dir: Option<PathBuf>,
    pub verbose: bool,
    pub pretty: bool,
    pub timing: bool,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Outcome {
    pub reports: usize,
    pub unexplained: usize,
}

pub struct Runner<W: Write> {
    kb: Arc<KnowledgeBase>,
    monitor: Monitor,
    batcher: TickBatcher,
    options: RunOptions,
    out: W,
    outcome: Outcome,
    line_no: usize,
}

impl<W: Write> Runner<W> {
    pub fn new(kb: Arc<KnowledgeBase>, options: RunOptions, out: W) -> Result<Self> {
        if let Some(dir) = &options.dot_dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let monitor = Monitor::new(kb.clone(), GatewayConfig::default())?;
        Ok(Self { kb, monitor, batcher: TickBatcher::new(), options, out, outcome: Outcome::default(), line_no: 0 })
    }

    /// Processes a whole signal file; any malformed line is an error.
    pub fn replay(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            self.line_no += 1;
            if let Some(reading) = self.parse(line).map_err(|e| anyhow!("line {}: {e}", self.line_no))? {
                self.push(reading).map_err(|e| e.context(format!("line {}", self.line_no)))?;
            }
        }
        Ok(())
    }

    /// Processes one live line; malformed lines are reported and skipped.
    pub fn stream_line(&mut self, line: &str) -> Result<()> {
        self.line_no += 1;
        match self.parse(line) {
            Ok(Some(reading)) => self.push(reading),
            Ok(None) => Ok(()),
            Err(e) => {
                eprintln!("warning: line {}: {e}; skipped", self.line_no);
                Ok(())
            }
        }
    }

    fn parse(&self, line: &str) -> Result<Option<Reading>> {
        let SignalLine::Record(reading) = classify_signal_line(line)? else {
            return Ok(None);
        };
        let var = self
            .kb
            .by_measure_point(&reading.measure_point)
            .ok_or_else(|| anyhow!("unknown measure point {:?}", reading.measure_point))?;
        map_reading(var, reading.value)?;
        Ok(Some(reading))
    }

    fn push(&mut self, reading: Reading) -> Result<()> {
        if let Some(batch) = self.batcher.push(reading)? {
            self.run_tick(&batch)?;
        }
        Ok(())
    }

    fn run_tick(&mut self, batch: &[Reading]) -> Result<()> {
        let outcome = self.monitor.push_tick(batch)?;
        let mut report = outcome.report;
        if !self.options.timing {
            report.timing_ms = 0.0;
        }
        if report.status == Status::NoTrigger && !self.options.verbose {
            return Ok(());
        }
        self.emit(&report)
    }

    fn emit(&mut self, report: &DiagnosisReport) -> Result<()> {
        self.outcome.reports += 1;
        if report.status == Status::Unexplained {
            self.outcome.unexplained += 1;
        }
        if self.options.pretty {
            write!(self.out, "{}", report.to_table(&self.kb))?;
        } else {
            writeln!(self.out, "{}", report.to_json_line())?;
        }
        self.out.flush()?;
        if let Some(dir) = &self.options.dot_dir {
            for graph in &report.graphs {
                let path = dir.join(format!("cubic_B{}_t{}.dot", graph.root, report.step));
                fs::write(&path, export_dot(graph, &self.kb)).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Ok(())
    }

    /// Flushes the last pending tick.
    pub fn finish(mut self) -> Result<Outcome> {
        if let Some(batch) = std::mem::take(&mut self.batcher).finish() {
            self.run_tick(&batch)?;
        }
        Ok(self.outcome)
    }

    pub fn predict(&mut self, hyp: StateLiteral) -> Result<Vec<Prediction>> {
        if let Some(batch) = std::mem::take(&mut self.batcher).finish() {
            self.run_tick(&batch)?;
        }
        Ok(self.monitor.session().predict(hyp)?)
    }
}
