use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// JSON lines on stdout, human summary on stderr.
    Json,
    /// Human summary on stdout only.
    Text,
}

/// Envelope for every command's output.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub config: Value,
    pub results: Value,
    pub seed: u64,
    pub wall_time: f64,
    pub version: &'static str,
}

/// Collects rows and summary lines, then writes them in the chosen format.
pub struct Output {
    format: Format,
    start: Instant,
    rows: Vec<Value>,
    summary: Vec<String>,
}

impl Output {
    pub fn new(format: Format) -> Self {
        Output { format, start: Instant::now(), rows: Vec::new(), summary: Vec::new() }
    }

    /// A table row, emitted as its own JSON line before the report.
    pub fn row(&mut self, v: impl Serialize) -> anyhow::Result<()> {
        self.rows.push(serde_json::to_value(v)?);
        Ok(())
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn finish(self, command: &'static str, config: Value, results: Value, seed: u64) -> anyhow::Result<()> {
        let report = RunReport {
            command,
            config,
            results,
            seed,
            wall_time: self.start.elapsed().as_secs_f64(),
            version: subgap::VERSION,
        };
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        match self.format {
            Format::Json => {
                for r in &self.rows {
                    writeln!(out, "{}", serde_json::to_string(r)?)?;
                }
                writeln!(out, "{}", serde_json::to_string(&report)?)?;
                let mut err = std::io::stderr().lock();
                for line in &self.summary {
                    writeln!(err, "{line}")?;
                }
            }
            Format::Text => {
                for line in &self.summary {
                    writeln!(out, "{line}")?;
                }
                writeln!(out, "seed {seed}, {:.3} s, subgap {}", report.wall_time, report.version)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
