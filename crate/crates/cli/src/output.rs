//! File emission. Every file is rendered in memory, checked, and moved into
//! place with a rename so readers never see a partial file.

use std::io::Write;
use std::path::{Path, PathBuf};

use coolsim_core::collision::{StrokeSummary, SUMMARY_HEADER};
use coolsim_core::evolve::{format_float, TrajectoryRecord};
use coolsim_core::measure::{self, OutcomeLogEntry, OutcomeRow};

use crate::RunError;

/// Slack on probabilities and purities before a row is rejected.
const BOUND_SLACK: f64 = 1e-9;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    #[cfg(unix)]
    {
        // Temporary files are created owner-only; results are ordinary files.
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(io_err(path))?;
    }
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| RunError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// Collects the files written by one run.
#[derive(Debug, Default)]
pub struct Emitter {
    pub written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<(), RunError> {
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    /// `trajectory.csv`, after checking the observable bounds.
    pub fn trajectory(&mut self, dir: &Path, record: &TrajectoryRecord, n: usize) -> Result<(), RunError> {
        record.check_bounds(n).map_err(|e| RunError::Bounds(format!("trajectory: {e}")))?;
        let mut buf = Vec::new();
        record.write_csv(&mut buf).expect("writing to memory");
        self.write(dir.join("trajectory.csv"), &buf)
    }

    pub fn summary(&mut self, dir: &Path, summary: &[StrokeSummary]) -> Result<(), RunError> {
        let rows = summary.iter().map(|s| {
            vec![
                s.stroke_index.to_string(),
                format_float(s.coupling_j),
                format_float(s.e_p_pre),
                format_float(s.e_p_post),
                format_float(s.entropy_post),
                s.branch_count.to_string(),
                s.engine.name().to_string(),
            ]
        });
        self.table(dir.join("summary.csv"), &SUMMARY_HEADER, rows)
    }

    pub fn outcomes(&mut self, dir: &Path, rows: &[OutcomeRow]) -> Result<(), RunError> {
        for r in rows {
            check_unit("outcomes: p", r.probability)?;
            if let Some(fid) = r.fidelity_cond {
                check_unit("outcomes: fidelity_cond", fid)?;
            }
        }
        let mut buf = Vec::new();
        measure::write_outcomes_csv(rows, &mut buf).expect("writing to memory");
        self.write(dir.join("outcomes.csv"), &buf)
    }

    pub fn selection_log(&mut self, dir: &Path, log: &[OutcomeLogEntry]) -> Result<(), RunError> {
        for e in log {
            check_unit("selection_log: p", e.probability)?;
            check_unit("selection_log: fidelity_post", e.fidelity_post)?;
            check_unit("selection_log: purity_post", e.purity_post)?;
        }
        let mut buf = Vec::new();
        measure::write_log_csv(log, &mut buf).expect("writing to memory");
        self.write(dir.join("selection_log.csv"), &buf)
    }

    /// A CSV table with a header row.
    pub fn table<I>(&mut self, path: PathBuf, header: &[&str], rows: I) -> Result<(), RunError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| RunError::Bounds(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        let buf = w.into_inner().map_err(|e| RunError::Bounds(format!("{}: {e}", path.display())))?;
        self.write(path, &buf)
    }

    /// `metadata.toml`: the resolved config plus a `[result]` table.
    pub fn metadata(&mut self, dir: &Path, config: &toml::Table, result: &toml::Table) -> Result<(), RunError> {
        let mut doc = config.clone();
        doc.insert("result".into(), toml::Value::Table(result.clone()));
        let text = toml::to_string(&doc).expect("metadata serializes");
        self.write(dir.join("metadata.toml"), text.as_bytes())
    }
}

pub fn check_unit(what: &str, v: f64) -> Result<(), RunError> {
    if (-BOUND_SLACK..=1.0 + BOUND_SLACK).contains(&v) {
        Ok(())
    } else {
        Err(RunError::Bounds(format!("{what} = {v} outside [0, 1]")))
    }
}

/// Directory name of a grid point, e.g. `f_0.6`; distinct values give
/// distinct names.
pub fn point_dir(prefix: &str, value: f64) -> String {
    format!("{prefix}_{value}")
}
