//! Output sink shared by all subcommands: a file or stdout, with a short
//! provenance header on CSV output. Nothing time-dependent is written, so
//! identical invocations produce identical bytes.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use clap::ValueEnum;
use serde::Serialize;

use crate::{Failure, OutputArgs};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

pub struct Output {
    sink: Box<dyn Write>,
}

impl Output {
    pub fn open(args: &OutputArgs, config: &str, seed: Option<u64>) -> Result<Self, Failure> {
        let sink: Box<dyn Write> = match &args.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        let mut out = Output { sink };
        if matches!(args.format, Format::Csv) {
            out.line(&format!("# heatwalk {}", env!("CARGO_PKG_VERSION")))?;
            out.line(&format!("# config: {config}"))?;
            if let Some(seed) = seed {
                out.line(&format!("# seed: {seed}"))?;
            }
        }
        Ok(out)
    }

    pub fn line(&mut self, text: &str) -> Result<(), Failure> {
        writeln!(self.sink, "{text}")?;
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), Failure> {
        serde_json::to_writer_pretty(&mut self.sink, value).map_err(|e| Failure::Numerical(e.to_string()))?;
        self.line("")
    }

    pub fn write_with(&mut self, f: impl FnOnce(&mut dyn Write) -> heatwalk::Result<()>) -> Result<(), Failure> {
        f(&mut self.sink)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.sink.flush()?;
        Ok(())
    }
}
