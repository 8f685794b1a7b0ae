use std::io::Write;

use serde::{Deserialize, Serialize};

use super::diagnostics::MomentRecord;
use super::grid::{BumpData, Grid1D};
use super::params::PhysicalParams;
use crate::blowup_ode::{Classification, GammaSchedule};
use crate::error::Result;

pub const RECORD_HEADER: [&str; 6] = ["t", "F", "Fdot_est", "Pp", "R", "max_abs_u"];

/// Diagnostics as CSV.
pub fn write_records_csv<W: Write>(records: &[MomentRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(RECORD_HEADER)?;
    for r in records {
        wr.write_record([r.t, r.f, r.fdot, r.pp, r.r, r.max_abs_u].map(|v| format!("{v:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// JSON summary of one PDE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub params: PhysicalParams,
    pub grid: Grid1D,
    pub gamma: GammaSchedule,
    pub data: BumpData,
    pub classification: Classification,
    pub holder_ok: bool,
    pub moment_law_residual: f64,
}
