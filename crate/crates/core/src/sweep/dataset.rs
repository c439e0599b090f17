//! On-disk trajectory datasets.
//!
//! A dataset is a directory:
//!
//! ```text
//! manifest.toml            format version, seeding rule, column names, config, cell list
//! cells/cell_BB_QQ.bin     one file per (β index, q index)
//! ```
//!
//! A cell file is a 20-byte header followed by one block per run, in rep
//! order. All integers are little endian.
//!
//! ```text
//! header  magic "HOPD" | version u32 | beta_index u32 | q_index u32 | household_size u32
//! block   rep u32 | seed u64 | final_n_a u32 | steps u64 | absorbed u8 | size_overflow u8
//!         | tau_hh i32 | tau_wp i32            (-1 when the threshold was never passed)
//!         | homophily_hh f64 | homophily_wp f64
//!         | num_components u32 | component sizes u32 × num_components
//!         | num_records u32 | records (t, then the statistic values) i32 × (1 + width) each
//!         | crc32 u32 over every preceding byte of the block
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{RunSummary, StatRecord};

use super::config::SweepConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CELLS_DIR: &str = "cells";
const MAGIC: &[u8; 4] = b"HOPD";
const HEADER_LEN: usize = 20;

pub const SEEDING_RULE: &str =
    "seed(cell, rep) = derive_seed(master_seed, [regime_id, beta_index, q_index, rep]), \
     derive_seed folding SplitMix64 over the key; regime_id 0 = linear, 1 = nonlinear; \
     each run draws from ChaCha8 seeded with its 64-bit seed";
pub const INITIAL_CONDITION: &str = "num_a opinions A chosen uniformly without replacement; \
     workplaces a uniform random partition into equal groups";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub beta_index: u32,
    pub q_index: u32,
    pub beta: f64,
    pub q: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seeding: String,
    pub initial_condition: String,
    pub columns: Vec<String>,
    pub config: SweepConfig,
    pub cells: Vec<CellEntry>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn cell_file_name(beta_index: usize, q_index: usize) -> String {
    format!("{CELLS_DIR}/cell_{beta_index:02}_{q_index:02}.bin")
}

impl Manifest {
    pub fn new(config: &SweepConfig) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            seeding: SEEDING_RULE.into(),
            initial_condition: INITIAL_CONDITION.into(),
            columns: StatRecord::column_names(config.household_size),
            config: config.clone(),
            cells: config
                .cells()
                .map(|(bi, qi)| CellEntry {
                    beta_index: bi as u32,
                    q_index: qi as u32,
                    beta: config.betas[bi],
                    q: config.qs[qi],
                    file: cell_file_name(bi, qi),
                })
                .collect(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let probe: VersionProbe =
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: probe.format_version,
                expected: FORMAT_VERSION,
            });
        }
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_toml_string()).map_err(|e| Error::io(&path, e))
    }
}

/// One stored run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub rep: u32,
    pub seed: u64,
    pub summary: RunSummary,
    pub records: Vec<StatRecord>,
}

impl Run {
    /// Records for timesteps `1..=horizon`.
    pub fn prefix(&self, horizon: usize) -> Result<&[StatRecord]> {
        let start = self
            .records
            .iter()
            .position(|r| r.t >= 1)
            .unwrap_or(self.records.len());
        let end = start + horizon;
        if end > self.records.len() || self.records[end - 1].t as usize != horizon {
            return Err(Error::Estimation(format!(
                "run {} holds {} timesteps, horizon {horizon} requested",
                self.rep,
                self.records.len() - start
            )));
        }
        Ok(&self.records[start..end])
    }
}

fn header_bytes(beta_index: usize, q_index: usize, household_size: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(beta_index as u32).to_le_bytes());
    out.extend_from_slice(&(q_index as u32).to_le_bytes());
    out.extend_from_slice(&(household_size as u32).to_le_bytes());
    out
}

pub fn encode_run(run: &Run) -> Vec<u8> {
    let s = &run.summary;
    let mut b = Vec::new();
    b.extend_from_slice(&run.rep.to_le_bytes());
    b.extend_from_slice(&run.seed.to_le_bytes());
    b.extend_from_slice(&s.final_n_a.to_le_bytes());
    b.extend_from_slice(&s.steps.to_le_bytes());
    b.push(u8::from(s.absorbed));
    b.push(u8::from(s.size_overflow));
    for tau in [s.tau_hh, s.tau_wp] {
        b.extend_from_slice(&tau.map_or(-1, |t| t as i32).to_le_bytes());
    }
    b.extend_from_slice(&s.homophily_hh.to_le_bytes());
    b.extend_from_slice(&s.homophily_wp.to_le_bytes());
    b.extend_from_slice(&(s.component_sizes.len() as u32).to_le_bytes());
    for &c in &s.component_sizes {
        b.extend_from_slice(&c.to_le_bytes());
    }
    b.extend_from_slice(&(run.records.len() as u32).to_le_bytes());
    for r in &run.records {
        b.extend_from_slice(&(r.t as i32).to_le_bytes());
        for v in r.values() {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

/// Little-endian cursor that reports running off the end as `None`.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let bytes = self.buf.get(self.pos..self.pos + N)?;
        self.pos += N;
        Some(bytes.try_into().expect("slice length"))
    }
    fn u8(&mut self) -> Option<u8> {
        self.take::<1>().map(|b| b[0])
    }
    fn u32(&mut self) -> Option<u32> {
        self.take().map(u32::from_le_bytes)
    }
    fn i32(&mut self) -> Option<i32> {
        self.take().map(i32::from_le_bytes)
    }
    fn u64(&mut self) -> Option<u64> {
        self.take().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Option<f64> {
        self.take().map(f64::from_le_bytes)
    }
}

enum Decoded {
    Run(Run, usize),
    /// The buffer ends inside the block.
    Truncated,
    Corrupt(String),
}

/// A block as read, before checksum and record validation.
struct RawBlock {
    rep: u32,
    seed: u64,
    summary: RunSummary,
    records: Vec<(i32, Vec<i32>)>,
}

fn read_block(c: &mut Cursor<'_>, width: usize) -> Option<RawBlock> {
    let rep = c.u32()?;
    let seed = c.u64()?;
    let final_n_a = c.u32()?;
    let steps = c.u64()?;
    let absorbed = c.u8()? != 0;
    let size_overflow = c.u8()? != 0;
    let tau = |x: i32| (x >= 0).then_some(x as u32);
    let tau_hh = tau(c.i32()?);
    let tau_wp = tau(c.i32()?);
    let homophily_hh = c.f64()?;
    let homophily_wp = c.f64()?;
    let num_components = c.u32()? as usize;
    // Check lengths before allocating so garbage counts cannot exhaust memory.
    if c.buf.len() < c.pos + 4 * num_components {
        return None;
    }
    let component_sizes = (0..num_components)
        .map(|_| c.u32())
        .collect::<Option<Vec<_>>>()?;
    let num_records = c.u32()? as usize;
    if c.buf.len() < c.pos + 4 * (width + 1) * num_records {
        return None;
    }
    let mut records = Vec::with_capacity(num_records);
    for _ in 0..num_records {
        let t = c.i32()?;
        records.push((t, (0..width).map(|_| c.i32()).collect::<Option<Vec<_>>>()?));
    }
    Some(RawBlock {
        rep,
        seed,
        summary: RunSummary {
            final_n_a,
            steps,
            absorbed,
            tau_hh,
            tau_wp,
            homophily_hh,
            homophily_wp,
            component_sizes,
            size_overflow,
        },
        records,
    })
}

fn decode_run(buf: &[u8], household_size: usize) -> Decoded {
    let mut c = Cursor { buf, pos: 0 };
    let Some(raw) = read_block(&mut c, StatRecord::width(household_size)) else {
        return Decoded::Truncated;
    };
    let payload_len = c.pos;
    let Some(stored) = c.u32() else {
        return Decoded::Truncated;
    };
    if crc32fast::hash(&buf[..payload_len]) != stored {
        return Decoded::Corrupt(format!("checksum mismatch in run block {}", raw.rep));
    }
    let mut records = Vec::with_capacity(raw.records.len());
    for (t, values) in raw.records {
        if t < 0 {
            return Decoded::Corrupt(format!("negative timestep in run block {}", raw.rep));
        }
        match StatRecord::from_values(t as u32, household_size, &values) {
            Ok(r) => records.push(r),
            Err(e) => return Decoded::Corrupt(e.to_string()),
        }
    }
    let run = Run {
        rep: raw.rep,
        seed: raw.seed,
        summary: raw.summary,
        records,
    };
    Decoded::Run(run, c.pos)
}

/// Result of scanning a cell file: the runs of its valid prefix and where it ends.
pub(crate) struct CellScan {
    pub runs: Vec<Run>,
    pub valid_len: u64,
    /// Why scanning stopped before the end of the file, if it did.
    pub defect: Option<String>,
}

pub(crate) fn scan_cell_bytes(
    bytes: &[u8],
    beta_index: usize,
    q_index: usize,
    household_size: usize,
) -> CellScan {
    let header = header_bytes(beta_index, q_index, household_size);
    if bytes.len() < HEADER_LEN || bytes[..HEADER_LEN] != header[..] {
        return CellScan {
            runs: Vec::new(),
            valid_len: 0,
            defect: Some("missing or mismatched cell header".into()),
        };
    }
    let mut pos = HEADER_LEN;
    let mut runs = Vec::new();
    let mut defect = None;
    while pos < bytes.len() {
        match decode_run(&bytes[pos..], household_size) {
            Decoded::Run(run, len) if run.rep as usize == runs.len() => {
                runs.push(run);
                pos += len;
            }
            Decoded::Run(run, _) => {
                defect = Some(format!("run block {} out of order", run.rep));
                break;
            }
            Decoded::Truncated => {
                defect = Some(format!("truncated run block after rep {}", runs.len()));
                break;
            }
            Decoded::Corrupt(why) => {
                defect = Some(why);
                break;
            }
        }
    }
    CellScan {
        runs,
        valid_len: pos as u64,
        defect,
    }
}

/// Appends run blocks to a cell file, creating it with its header if needed.
pub(crate) struct CellWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl CellWriter {
    /// Opens the file and truncates it to `valid_len` bytes (0 rewrites the header).
    pub fn open(
        path: &Path,
        valid_len: u64,
        beta_index: usize,
        q_index: usize,
        household_size: usize,
    ) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(false)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.set_len(valid_len).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.seek(SeekFrom::End(0)).map_err(|e| Error::io(path, e))?;
        if valid_len == 0 {
            out.write_all(&header_bytes(beta_index, q_index, household_size))
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(CellWriter {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, run: &Run) -> Result<()> {
        self.out
            .write_all(&encode_run(run))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.flush()
    }
}

/// Read access to a complete dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    pub manifest: Manifest,
}

/// All runs of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub beta_index: usize,
    pub q_index: usize,
    pub beta: f64,
    pub q: f64,
    pub runs: Vec<Run>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest = Manifest::read(root)?;
        manifest.config.validate()?;
        if manifest.cells != Manifest::new(&manifest.config).cells {
            return Err(Error::Format(
                "manifest cell list disagrees with its config".into(),
            ));
        }
        Ok(Dataset {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &SweepConfig {
        &self.manifest.config
    }

    /// Loads and validates one cell: checksums, rep order, run count, record
    /// widths, histogram totals and per-run seeds.
    pub fn cell(&self, beta_index: usize, q_index: usize) -> Result<Cell> {
        let cfg = self.config();
        if beta_index >= cfg.betas.len() || q_index >= cfg.qs.len() {
            return Err(Error::Format(format!("no cell ({beta_index}, {q_index})")));
        }
        let path = self.root.join(cell_file_name(beta_index, q_index));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let scan = scan_cell_bytes(&bytes, beta_index, q_index, cfg.household_size);
        if let Some(defect) = scan.defect {
            return Err(if defect.starts_with("checksum") {
                Error::Checksum {
                    file: path,
                    rep: scan.runs.len() as u32,
                }
            } else {
                Error::Format(format!("{}: {defect}", path.display()))
            });
        }
        if scan.runs.len() != cfg.runs as usize {
            return Err(Error::Format(format!(
                "{}: {} of {} runs present",
                path.display(),
                scan.runs.len(),
                cfg.runs
            )));
        }
        let workplaces = cfg.num_workplaces();
        for run in &scan.runs {
            if run.seed != cfg.run_seed(beta_index, q_index, run.rep) {
                return Err(Error::Format(format!(
                    "{}: run {} carries a seed that does not follow the seeding rule",
                    path.display(),
                    run.rep
                )));
            }
            for r in &run.records {
                r.check_totals(cfg.n, workplaces)?;
            }
        }
        Ok(Cell {
            beta_index,
            q_index,
            beta: cfg.betas[beta_index],
            q: cfg.qs[q_index],
            runs: scan.runs,
        })
    }

    /// Every cell, in storage order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.config()
            .cells()
            .map(|(bi, qi)| self.cell(bi, qi))
            .collect()
    }
}
