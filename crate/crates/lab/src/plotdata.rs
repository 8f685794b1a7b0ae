//! Flat files for external plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dskg_core::blowup_ode::Classification;
use dskg_core::Result;

use crate::record::{write_records_csv, RunRecord};

pub const PHASE_COLUMNS: [&str; 9] = [
    "M",
    "p",
    "beta",
    "amplitude",
    "d1",
    "d0",
    "code",
    "classification",
    "T_est",
];

/// `1` blow-up, `0` alive at `t_max`, `-1` inconclusive.
pub fn phase_code(c: &Classification) -> i8 {
    match c {
        Classification::Blowup { .. } => 1,
        Classification::AliveAt { .. } => 0,
        Classification::Inconclusive { .. } => -1,
    }
}

/// Long-format phase diagram sorted by `(M, p, beta, amplitude, d1, d0)`.
pub fn write_phase_grid<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut rows: Vec<&RunRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        [a.mass, a.p, a.beta, a.c0, a.d1, a.d0]
            .iter()
            .zip([b.mass, b.p, b.beta, b.c0, b.d1, b.d0].iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(PHASE_COLUMNS)?;
    for r in rows {
        wr.write_record([
            r.mass.to_string(),
            r.p.to_string(),
            r.beta.to_string(),
            r.c0.to_string(),
            r.d1.to_string(),
            r.d0.to_string(),
            phase_code(&r.classification).to_string(),
            r.classification.label().to_string(),
            r.classification
                .blowup_time()
                .map(|t| t.to_string())
                .unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Write `records.csv` and `phase_grid.csv` into `dir`.
pub fn emit_plotdata(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let table = dir.join("records.csv");
    write_records_csv(records, BufWriter::new(File::create(&table)?))?;
    let phase = dir.join("phase_grid.csv");
    write_phase_grid(records, BufWriter::new(File::create(&phase)?))?;
    Ok(vec![table, phase])
}
