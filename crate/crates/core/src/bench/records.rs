use std::fmt;
use std::fs::{File, OpenOptions};
use std::hash::{Hash, Hasher};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RunSeeds, TargetSpec};
use crate::activation::ActivationKind;
use crate::datagen::NoiseSpec;
use crate::error::Result;
use crate::network::NetworkSpec;
use crate::optimizer::TrainReport;
use crate::symmetry::SymmetryReport;

/// Version tag written into every record.
pub const RECORD_FORMAT: u32 = 1;

/// Identifies one column entry of a report: target row, baseline activation
/// and whether the first hidden activation was Seagull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub target: TargetSpec,
    pub activation: ActivationKind,
    pub seagull: bool,
}

impl CellKey {
    pub fn new(target: TargetSpec, activation: ActivationKind, seagull: bool) -> Self {
        Self {
            target,
            activation,
            seagull,
        }
    }
}

// Activation parameters are never NaN, so float equality is reflexive here.
impl Eq for CellKey {}

impl Hash for CellKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.target.hash(state);
        self.activation.to_string().hash(state);
        self.seagull.hash(state);
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}{}",
            self.target.target,
            self.target.transform,
            self.activation,
            if self.seagull { "+seagull" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub crate_version: String,
    pub record_format: u32,
    pub checkpoint_format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            record_format: RECORD_FORMAT,
            checkpoint_format: crate::checkpoint::FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub plan: String,
    pub cell: CellKey,
    pub cell_index: usize,
    pub run_index: usize,
    pub seed: u64,
    pub seeds: RunSeeds,
    pub network: NetworkSpec,
    pub init_scheme: String,
    pub train_n: usize,
    pub test_n: usize,
    pub noise: NoiseSpec,
    pub status: RunStatus,
    pub train_report: Option<TrainReport>,
    pub symmetry: Option<SymmetryReport>,
    pub versions: Versions,
}

impl RunRecord {
    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| {
            let mut r = r.clone();
            if let Some(t) = r.train_report.as_mut() {
                t.wall_time_secs = 0.0;
            }
            r
        };
        strip(self) == strip(other)
    }
}

/// Appends one JSON record per line and flushes after each.
pub struct RecordWriter {
    out: BufWriter<File>,
}

impl RecordWriter {
    /// Opens `path` for appending, creating it if needed. If the file ends in
    /// a partial line, a newline is written first so the fragment stays
    /// isolated on its own (skipped) line.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
        let len = file.metadata()?.len();
        if len > 0 {
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(len - 1))?;
            file.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok(Self { out: BufWriter::new(file) })
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedRecords {
    pub records: Vec<RunRecord>,
    /// One message per skipped line.
    pub warnings: Vec<String>,
}

/// Reads a record stream. Unparseable lines are skipped and reported.
pub fn load_records(path: impl AsRef<Path>) -> Result<LoadedRecords> {
    let text = std::fs::read_to_string(path)?;
    let mut loaded = LoadedRecords::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) => loaded.records.push(r),
            Err(e) => loaded.warnings.push(format!("line {}: skipped corrupt record ({e})", i + 1)),
        }
    }
    Ok(loaded)
}
