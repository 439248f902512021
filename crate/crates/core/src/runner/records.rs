//! Run records and their CSV form.
//!
//! Header: `config_id,family,<param columns...>,fid,dim,iid,seed,aocc,
//! final_gap,restarts,status,wall_ms`. Floats use Rust's shortest
//! round-trip formatting, so writing is deterministic and reading is exact.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::configspace::{Configuration, ConfigurationSpace};
use crate::error::{Error, Result};

pub const FIXED_LEADING: [&str; 2] = ["config_id", "family"];
pub const FIXED_TRAILING: [&str; 9] = ["fid", "dim", "iid", "seed", "aocc", "final_gap", "restarts", "status", "wall_ms"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RunStatus {
    Ok,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        }
    }
}

/// One optimizer run: identity tuple, configuration values and results.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config_id: String,
    pub family: String,
    /// Parameter values as text, in space order.
    pub values: Vec<String>,
    pub fid: u32,
    pub dim: usize,
    pub iid: u32,
    /// Repetition index.
    pub seed: u32,
    pub aocc: f64,
    pub final_gap: f64,
    pub restarts: u32,
    pub status: RunStatus,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn key(&self) -> (&str, u32, usize, u32, u32) {
        (&self.config_id, self.fid, self.dim, self.iid, self.seed)
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// Records of one algorithm family.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub family: String,
    pub param_names: Vec<String>,
    pub records: Vec<RunRecord>,
}

impl Dataset {
    pub fn new(family: impl Into<String>, param_names: Vec<String>) -> Self {
        Dataset { family: family.into(), param_names, records: Vec::new() }
    }

    /// Canonical order: config-id, fid, dim, iid, seed.
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| a.key().cmp(&b.key()));
    }

    pub fn header(&self) -> Vec<String> {
        FIXED_LEADING
            .iter()
            .map(|s| s.to_string())
            .chain(self.param_names.iter().cloned())
            .chain(FIXED_TRAILING.iter().map(|s| s.to_string()))
            .collect()
    }

    pub fn ok_records(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.is_ok())
    }

    pub fn failed_count(&self) -> usize {
        self.records.len() - self.ok_records().count()
    }

    pub fn fids(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.records.iter().map(|r| r.fid).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.records.iter().map(|r| r.dim).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn iids(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.records.iter().map(|r| r.iid).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Rebuilds the configuration of a record from its text values.
    pub fn configuration(&self, record: &RunRecord, space: &ConfigurationSpace) -> Result<Configuration> {
        let cells: Vec<(&str, &str)> =
            self.param_names.iter().map(String::as_str).zip(record.values.iter().map(String::as_str)).collect();
        space.parse_configuration(&cells)
    }

    pub fn record_row(record: &RunRecord) -> Vec<String> {
        let mut row = vec![record.config_id.clone(), record.family.clone()];
        row.extend(record.values.iter().cloned());
        row.extend([
            record.fid.to_string(),
            record.dim.to_string(),
            record.iid.to_string(),
            record.seed.to_string(),
            record.aocc.to_string(),
            record.final_gap.to_string(),
            record.restarts.to_string(),
            record.status.as_str().to_string(),
            record.wall_ms.to_string(),
        ]);
        row
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header())?;
        for r in &self.records {
            w.write_record(Self::record_row(r))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Writes via a temporary file in the target directory, then renames.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_atomic(path.as_ref(), &buf)
    }

    pub fn from_csv_reader<R: Read>(input: R, context: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let lead = FIXED_LEADING.len();
        let tail = &FIXED_TRAILING;
        if header.len() < lead + tail.len()
            || header[..lead] != FIXED_LEADING
            || header[header.len() - tail.len()..].iter().zip(tail).any(|(a, b)| a != b)
        {
            return Err(Error::parse(context, "header does not match the run-record layout"));
        }
        let param_names: Vec<String> = header[lead..header.len() - tail.len()].to_vec();
        let np = param_names.len();
        let mut family: Option<String> = None;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row?;
            let line = line + 2;
            let field = |i: usize| -> &str { row.get(i).unwrap_or("") };
            let num = |i: usize, name: &str| -> Result<f64> {
                field(i).parse::<f64>().map_err(|_| Error::parse(context, format!("line {line}: bad `{name}` value {:?}", field(i))))
            };
            let int = |i: usize, name: &str| -> Result<u64> {
                field(i).parse::<u64>().map_err(|_| Error::parse(context, format!("line {line}: bad `{name}` value {:?}", field(i))))
            };
            let b = lead + np;
            let fam = field(1).to_string();
            match &family {
                None => family = Some(fam.clone()),
                Some(f) if *f != fam => {
                    return Err(Error::parse(context, format!("line {line}: mixed families `{f}` and `{fam}`")))
                }
                _ => {}
            }
            let status = match field(b + 7) {
                "ok" => RunStatus::Ok,
                "failed" => RunStatus::Failed,
                other => return Err(Error::parse(context, format!("line {line}: bad `status` value {other:?}"))),
            };
            let rec = RunRecord {
                config_id: field(0).to_string(),
                family: fam,
                values: (lead..b).map(|i| field(i).to_string()).collect(),
                fid: int(b, "fid")? as u32,
                dim: int(b + 1, "dim")? as usize,
                iid: int(b + 2, "iid")? as u32,
                seed: int(b + 3, "seed")? as u32,
                aocc: num(b + 4, "aocc")?,
                final_gap: num(b + 5, "final_gap")?,
                restarts: int(b + 6, "restarts")? as u32,
                status,
                wall_ms: int(b + 8, "wall_ms")?,
            };
            if rec.is_ok() && !(0.0..=1.0).contains(&rec.aocc) {
                return Err(Error::parse(context, format!("line {line}: `aocc` {} outside [0, 1]", rec.aocc)));
            }
            let key = (rec.config_id.clone(), rec.fid, rec.dim, rec.iid, rec.seed);
            if !seen.insert(key) {
                return Err(Error::parse(context, format!("line {line}: duplicate run identity")));
            }
            records.push(rec);
        }
        Ok(Dataset { family: family.unwrap_or_default(), param_names, records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Self::from_csv_reader(BufReader::new(file), &path.display().to_string())
    }
}

/// Writes `bytes` to `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
