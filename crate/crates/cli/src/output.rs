use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::cli::Format;

pub const TOOL: &str = "lsr";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: u8 = 0;
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn domain(message: impl ToString) -> Self {
        Failure {
            code: EXIT_DOMAIN,
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    /// Every flag as typed, numbers as decimal strings.
    pub parameters: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    schema: &'a str,
    run_config: &'a RunConfig,
    result: &'a Value,
}

#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// What a subcommand produced, before formatting.
pub struct Outcome {
    pub schema: &'static str,
    pub result: Value,
    pub table: Table,
    /// Extra `# key value` lines ahead of the CSV header.
    pub notes: Vec<(String, Value)>,
    pub code: u8,
}

impl Outcome {
    pub fn new<T: Serialize>(
        schema: &'static str,
        result: &T,
        table: Table,
    ) -> Result<Self, Failure> {
        Ok(Outcome {
            schema,
            result: serde_json::to_value(result).map_err(Failure::domain)?,
            table,
            notes: Vec::new(),
            code: EXIT_OK,
        })
    }
}

/// Serialized name of a unit-like enum value.
pub fn label<T: Serialize>(t: &T) -> String {
    match serde_json::to_value(t) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write(outcome: &Outcome, config: &RunConfig, path: Option<&Path>) -> io::Result<()> {
    let mut out = sink(path)?;
    match config.format {
        Format::Json => {
            let env = Envelope {
                tool: TOOL,
                version: VERSION,
                schema: outcome.schema,
                run_config: config,
                result: &outcome.result,
            };
            serde_json::to_writer_pretty(&mut out, &env)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "# {TOOL} {VERSION}")?;
            writeln!(out, "# schema {}", outcome.schema)?;
            writeln!(out, "# run_config {}", serde_json::to_string(config)?)?;
            for (key, value) in &outcome.notes {
                writeln!(out, "# {key} {}", serde_json::to_string(value)?)?;
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&outcome.table.header)?;
            for row in &outcome.table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    out.flush()
}
