//! Record formatting: JSON lines, CSV or an aligned table.

use std::io::{self, Write};

use clap::ValueEnum;
use stable_rank::engine::{NextRecord, RegionReport, VerifyReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    JsonLines,
    Csv,
    Table,
}

pub struct Sink<'a> {
    format: Format,
    out: &'a mut dyn Write,
    header_done: bool,
}

fn json_err(e: serde_json::Error) -> io::Error {
    io::Error::other(e)
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn interval(rec: &NextRecord) -> (f64, f64) {
    match rec.region {
        Some(RegionReport::Interval { lo, hi, .. }) => (lo, hi),
        _ => (f64::NAN, f64::NAN),
    }
}

impl<'a> Sink<'a> {
    pub fn new(format: Format, out: &'a mut dyn Write) -> Self {
        Self { format, out, header_done: false }
    }

    fn header(&mut self, csv: &str, table: &str) -> io::Result<()> {
        if !self.header_done {
            self.header_done = true;
            match self.format {
                Format::Csv => writeln!(self.out, "{csv}")?,
                Format::Table => writeln!(self.out, "{table}")?,
                Format::JsonLines => {}
            }
        }
        Ok(())
    }

    fn csv_row(&mut self, fields: &[String]) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(fields).map_err(io::Error::other)?;
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.out.write_all(&bytes)
    }

    /// A get-next result.
    pub fn next(&mut self, rec: &NextRecord) -> io::Result<()> {
        self.header(
            "index,rank,stability,confidence_error,weights,members",
            &format!("{:>5}  {:>10}  {:>10}  members", "rank", "stability", "error"),
        )?;
        let err = rec.confidence_error.map(|e| e.to_string()).unwrap_or_default();
        match self.format {
            Format::JsonLines => {
                serde_json::to_writer(&mut *self.out, rec).map_err(json_err)?;
                writeln!(self.out)
            }
            Format::Csv => self.csv_row(&[
                rec.index.to_string(),
                rec.rank.to_string(),
                rec.stability.to_string(),
                err,
                joined(&rec.weights),
                rec.members().join(";"),
            ]),
            Format::Table => {
                let err = rec.confidence_error.map(|e| format!("{e:.6}")).unwrap_or_else(|| "-".into());
                writeln!(
                    self.out,
                    "{:>5}  {:>10.6}  {:>10}  <{}>",
                    rec.rank,
                    rec.stability,
                    err,
                    rec.members().join(",")
                )
            }
        }
    }

    /// A two-attribute region: stability, bounding angles and ranking.
    pub fn region(&mut self, rec: &NextRecord) -> io::Result<()> {
        self.header(
            "stability,theta1,theta2,ranking",
            &format!("{:>10}  {:>10}  {:>10}  ranking", "stability", "theta1", "theta2"),
        )?;
        let (lo, hi) = interval(rec);
        match self.format {
            Format::JsonLines => {
                let v = serde_json::json!({
                    "index": rec.index,
                    "rank": rec.rank,
                    "stability": rec.stability,
                    "theta1": lo,
                    "theta2": hi,
                    "ranking": rec.members(),
                });
                writeln!(self.out, "{v}")
            }
            Format::Csv => {
                self.csv_row(&[rec.stability.to_string(), lo.to_string(), hi.to_string(), rec.members().join(";")])
            }
            Format::Table => {
                writeln!(self.out, "{:>10.6}  {:>10.6}  {:>10.6}  <{}>", rec.stability, lo, hi, rec.members().join(","))
            }
        }
    }

    pub fn verify(&mut self, report: &VerifyReport) -> io::Result<()> {
        match self.format {
            Format::JsonLines => {
                serde_json::to_writer(&mut *self.out, report).map_err(json_err)?;
                writeln!(self.out)
            }
            Format::Csv => {
                self.header("ranking,stability,confidence_error", "")?;
                self.csv_row(&[
                    report.ranking.join(";"),
                    report.stability.to_string(),
                    report.confidence_error.map(|e| e.to_string()).unwrap_or_default(),
                ])
            }
            Format::Table => {
                writeln!(self.out, "ranking    <{}>", report.ranking.join(","))?;
                match report.confidence_error {
                    Some(e) => writeln!(self.out, "stability  {:.6} +/- {e:.6}", report.stability)?,
                    None => writeln!(self.out, "stability  {:.6}", report.stability)?,
                }
                match &report.region {
                    RegionReport::Interval { lo, hi, .. } => writeln!(self.out, "interval   ({lo:.6}, {hi:.6})"),
                    RegionReport::HalfSpaces { half_spaces } => {
                        for h in half_spaces {
                            writeln!(self.out, "half-space {} > {}", h.above, h.below)?;
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    pub fn finish(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}
