//! Reproducible experiment orchestration.
//!
//! Work unit `(i, j)` is replicate `j` of grid size `spec.n[i]` and draws
//! only from stream `(seed, kind, i, j)`, so a record is a pure function of
//! the spec regardless of worker count or completion order. A bounded pool
//! of scoped threads pulls units from a shared cursor; results flow through
//! a channel to a single appender.
//!
//! On disk a record directory holds
//!
//! * `spec.json`: `{"spec_hash": …, "spec": …}`,
//! * `replicates.jsonl`: one [`ReplicateRow`] per line, append-only,
//! * `summary.json`: the [`Summary`], written once every unit is done.
//!
//! Resuming re-reads `replicates.jsonl`, drops a torn final line, and only
//! schedules the missing units.

mod replicate;
mod spec;
mod summary;

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use replicate::{run_replicate, Outcome, ReplicateRow};
pub use spec::{
    ExperimentKind, ExperimentSpec, Overrides, DEFAULT_BOOTSTRAP, DEFAULT_FIT_RESAMPLES,
    DEFAULT_MAX_FINAL_FREQUENCY, DEFAULT_MIN_ON_FREQUENCY, DEFAULT_MIN_P_VALUE,
    DEFAULT_SLOPE_TOLERANCE,
};
pub use summary::{
    summarize, Check, CouplingSize, CylinderSize, CylinderWidth, DecayPoint, FitSummary,
    FrequencyPoint, MomentSize, Results, ShapePoint, Summary, SOFTWARE_VERSION,
};

use crate::error::{Error, Result};

pub const SPEC_FILE: &str = "spec.json";
pub const REPLICATES_FILE: &str = "replicates.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub parallelism: usize,
    /// Record directory; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub resume: bool,
    /// Stop with [`Error::Interrupted`] after this many new replicates.
    pub stop_after: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            parallelism: 1,
            out_dir: None,
            resume: false,
            stop_after: None,
        }
    }
}

impl RunOptions {
    pub fn in_memory(parallelism: usize) -> Self {
        RunOptions {
            parallelism,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StoredSpec {
    spec_hash: String,
    spec: ExperimentSpec,
}

#[derive(Clone, Debug)]
pub struct ExperimentRecord {
    pub spec: ExperimentSpec,
    pub spec_hash: String,
    /// Sorted by `(i, j)`.
    pub replicates: Vec<ReplicateRow>,
    pub summary: Summary,
    pub software_version: String,
    pub wall_clock_seconds: f64,
    /// Units loaded from an earlier partial run.
    pub resumed: usize,
}

struct Store {
    dir: PathBuf,
    appender: File,
}

impl Store {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Opens or creates a record directory, returning previously completed rows.
    fn open(dir: &Path, spec: &ExperimentSpec, resume: bool) -> Result<(Store, Vec<ReplicateRow>)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let spec_path = dir.join(SPEC_FILE);
        let rows_path = dir.join(REPLICATES_FILE);
        let hash = spec.hash();
        let mut done = Vec::new();
        if spec_path.exists() && resume {
            let text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
            let stored: StoredSpec =
                serde_json::from_str(&text).map_err(|e| Error::json(&spec_path, e))?;
            if stored.spec_hash != hash {
                return Err(Error::SpecHashMismatch {
                    stored: stored.spec_hash,
                    current: hash,
                });
            }
            if rows_path.exists() {
                done = read_rows(&rows_path)?;
            }
        } else {
            if !resume && rows_path.exists() && fs::metadata(&rows_path).is_ok_and(|m| m.len() > 0) {
                return Err(Error::RecordExists(dir.to_path_buf()));
            }
            let stored = StoredSpec {
                spec_hash: hash,
                spec: spec.clone(),
            };
            let text = serde_json::to_string_pretty(&stored).expect("spec serializes") + "\n";
            fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))?;
            File::create(&rows_path).map_err(|e| Error::io(&rows_path, e))?;
        }
        let appender = OpenOptions::new()
            .append(true)
            .open(&rows_path)
            .map_err(|e| Error::io(&rows_path, e))?;
        Ok((
            Store {
                dir: dir.to_path_buf(),
                appender,
            },
            done,
        ))
    }

    fn append(&mut self, row: &ReplicateRow) -> Result<()> {
        let mut line = serde_json::to_string(row).expect("row serializes");
        line.push('\n');
        self.appender
            .write_all(line.as_bytes())
            .and_then(|_| self.appender.flush())
            .map_err(|e| Error::io(self.path(REPLICATES_FILE), e))
    }
}

/// Reads complete rows, truncating a torn trailing line in place.
fn read_rows(path: &Path) -> Result<Vec<ReplicateRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut rows = Vec::new();
    let mut good_len = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            break;
        }
        if !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<ReplicateRow>(line.trim_end()) {
            Ok(row) => {
                rows.push(row);
                good_len += read as u64;
            }
            Err(_) => break,
        }
    }
    let actual = fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
    if actual != good_len {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.set_len(good_len).map_err(|e| Error::io(path, e))?;
    }
    Ok(rows)
}

/// Loads a finished record's summary.
pub fn load_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
}

/// Runs (or resumes) an experiment.
pub fn run(spec: &ExperimentSpec, options: &RunOptions) -> Result<ExperimentRecord> {
    spec.validate()?;
    let started = Instant::now();
    let (mut store, previous) = match &options.out_dir {
        Some(dir) => {
            let (store, rows) = Store::open(dir, spec, options.resume)?;
            (Some(store), rows)
        }
        None => (None, Vec::new()),
    };
    let total = spec.total_replicates();
    let mut seen = BTreeSet::new();
    let mut rows: Vec<ReplicateRow> = Vec::with_capacity(total);
    for row in previous {
        if row.i < spec.n.len() && row.j < spec.replicates && seen.insert((row.i, row.j)) {
            rows.push(row);
        }
    }
    let resumed = rows.len();
    let pending: Vec<(usize, usize)> = (0..spec.n.len())
        .flat_map(|i| (0..spec.replicates).map(move |j| (i, j)))
        .filter(|unit| !seen.contains(unit))
        .collect();

    let limit = options.stop_after.unwrap_or(usize::MAX);
    let cursor = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = options.parallelism.max(1).min(pending.len().max(1));
    let mut appended = 0usize;
    let mut failure = None;

    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<ReplicateRow>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (cursor, stop, pending) = (&cursor, &stop, &pending);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let next = cursor.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, j)) = pending.get(next) else {
                    break;
                };
                if tx.send(run_replicate(spec, i, j)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            if appended >= limit || failure.is_some() {
                stop.store(true, Ordering::Relaxed);
                continue;
            }
            if let Some(store) = store.as_mut() {
                if let Err(e) = store.append(&row) {
                    failure = Some(e);
                    stop.store(true, Ordering::Relaxed);
                    continue;
                }
            }
            rows.push(row);
            appended += 1;
            if appended >= limit {
                stop.store(true, Ordering::Relaxed);
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if rows.len() < total {
        return Err(Error::Interrupted {
            completed: rows.len(),
            total,
        });
    }

    rows.sort_by_key(|r| (r.i, r.j));
    let summary = summarize(spec, &rows)?;
    if let Some(store) = &store {
        let path = store.path(SUMMARY_FILE);
        fs::write(&path, summary.to_json()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(ExperimentRecord {
        spec: spec.clone(),
        spec_hash: spec.hash(),
        replicates: rows,
        summary,
        software_version: SOFTWARE_VERSION.to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        resumed,
    })
}
