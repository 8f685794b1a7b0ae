use std::io::Write;

use dskg_core::blowup_ode::{BlowupCertificate, Classification, LemmaKind};
use dskg_core::Result;
use serde::{Deserialize, Serialize};

/// Verdict of one lemma at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub lemma: LemmaKind,
    pub holds: bool,
    pub t_upper: Option<f64>,
    pub failed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl From<&BlowupCertificate> for CertificateSummary {
    fn from(c: &BlowupCertificate) -> Self {
        Self {
            lemma: c.lemma,
            holds: c.holds(),
            t_upper: c.t_upper,
            failed: c.failed().into_iter().map(String::from).collect(),
            notes: c.notes.clone(),
        }
    }
}

impl CertificateSummary {
    fn tag(&self) -> String {
        if self.holds {
            match self.t_upper {
                Some(t) => format!("{}=holds(T<={t})", self.lemma),
                None => format!("{}=holds", self.lemma),
            }
        } else {
            format!("{}=fails({})", self.lemma, self.failed.join("|"))
        }
    }
}

/// One sweep point and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub n: usize,
    /// NaN when the point's parameters were rejected.
    #[serde(deserialize_with = "nan_from_null")]
    pub m: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub mass: f64,
    pub p: f64,
    pub beta: f64,
    pub d0: f64,
    pub d1: f64,
    pub c: f64,
    pub c0: f64,
    pub c1: f64,
    pub t_max: f64,
    pub dx: f64,
    pub classification: Classification,
    pub certificates: Vec<CertificateSummary>,
    /// Hölder bridge on every record of both resolutions.
    pub holder_ok: Option<bool>,
    /// Largest recorded support radius on the fine grid.
    pub r_max: Option<f64>,
    /// Last recorded `(t, F, max|u|)` on the fine grid.
    pub last_state: Option<(f64, f64, f64)>,
    pub diagnostic: Option<String>,
    /// Wall time; kept out of the CSV table so that it stays reproducible.
    #[serde(default)]
    pub elapsed_ms: f64,
}

impl RunRecord {
    /// `-M (p (β + 1) - 1)`.
    pub fn predicted_d0(&self) -> f64 {
        -self.mass * (self.p * (self.beta + 1.0) - 1.0)
    }

    /// True if some attached lemma predicts a finite lifespan.
    pub fn certified(&self) -> bool {
        self.certificates.iter().any(|c| c.holds)
    }
}

// serde_json writes NaN as null.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub const RECORD_COLUMNS: [&str; 20] = [
    "index",
    "n",
    "m",
    "M",
    "p",
    "beta",
    "d0",
    "d1",
    "c",
    "C0",
    "C1",
    "t_max",
    "dx",
    "classification",
    "T_est",
    "T_err",
    "certificates",
    "holder_ok",
    "R_max",
    "diagnostic",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Records as CSV, one row each, header always written.
pub fn write_records_csv<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(RECORD_COLUMNS)?;
    for r in records {
        let (t_est, t_err) = match r.classification {
            Classification::Blowup { t_est, err } => (Some(t_est), Some(err)),
            _ => (None, None),
        };
        let certs: Vec<String> = r.certificates.iter().map(CertificateSummary::tag).collect();
        let diagnostic = match (&r.classification, &r.diagnostic) {
            (Classification::Inconclusive { reason }, None) => Some(reason.clone()),
            (Classification::Inconclusive { reason }, Some(d)) => Some(format!("{reason}; {d}")),
            (_, d) => d.clone(),
        };
        wr.write_record([
            r.index.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.mass.to_string(),
            r.p.to_string(),
            r.beta.to_string(),
            r.d0.to_string(),
            r.d1.to_string(),
            r.c.to_string(),
            r.c0.to_string(),
            r.c1.to_string(),
            r.t_max.to_string(),
            r.dx.to_string(),
            r.classification.label().to_string(),
            opt(t_est),
            opt(t_err),
            certs.join(";"),
            opt(r.holder_ok),
            opt(r.r_max),
            diagnostic.unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_json<R: std::io::Read>(r: R) -> Result<Vec<RunRecord>> {
    Ok(serde_json::from_reader(r)?)
}
