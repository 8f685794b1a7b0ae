//! Parameter sweeps over the weight scale `c (1 + t)^{d1} e^{d0 t}`.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use dskg_core::blowup_ode::{
    check_kato_power, check_lemma_large_energy, check_lemma_small_energy, Classification, GammaSchedule, ProbeGrid,
};
use dskg_core::semilinear::{holder_lower_bound_check, solve_fd, BumpData, FdOptions, Grid1D, PhysicalParams};
use dskg_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{MassAxis, ScanSpec};
use crate::record::{CertificateSummary, RunRecord};

/// Exponent slack `ε` of the small-energy growth condition.
pub const SMALL_ENERGY_EPS: f64 = 1e-3;
/// Furthest `a1` tried by the large-energy lemma.
pub const LARGE_ENERGY_HORIZON: f64 = 1e3;

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub index: usize,
    pub axis: MassAxis,
    /// `m` or `M`, depending on `axis`.
    pub mass_value: f64,
    pub p: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub d1: f64,
    pub d0: f64,
}

impl ScanPoint {
    fn key(&self) -> [u64; 6] {
        // + 0.0 folds -0.0 into 0.0.
        [self.mass_value, self.p, self.beta, self.amplitude, self.d1, self.d0].map(|v| (v + 0.0).to_bits())
    }

    pub fn params(&self, n: usize) -> Result<PhysicalParams> {
        match self.axis {
            MassAxis::Physical => PhysicalParams::new(n, self.mass_value, self.p, self.beta),
            MassAxis::Curved => PhysicalParams::from_curved_mass(n, self.mass_value, self.p, self.beta),
        }
    }
}

/// Cartesian product in the order mass, p, beta, amplitude, d1, d0 (fastest),
/// with duplicates dropped. Returns the points and one warning per duplicate.
pub fn expand(spec: &ScanSpec) -> Result<(Vec<ScanPoint>, Vec<String>)> {
    let (axis, masses) = spec.mass_axis()?;
    let mut seen = HashSet::new();
    let (mut points, mut warnings) = (Vec::new(), Vec::new());
    for &mass_value in masses {
        for &p in &spec.p {
            for &beta in &spec.beta {
                for &amplitude in &spec.amplitude {
                    for &d1 in &spec.d1 {
                        for &d0 in &spec.d0 {
                            let pt = ScanPoint {
                                index: points.len(),
                                axis,
                                mass_value,
                                p,
                                beta,
                                amplitude,
                                d1,
                                d0,
                            };
                            if seen.insert(pt.key()) {
                                points.push(pt);
                            } else {
                                warnings.push(format!(
                                    "duplicate grid point (mass {mass_value}, p {p}, beta {beta}, amplitude {amplitude}, d1 {d1}, d0 {d0}) skipped"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((points, warnings))
}

/// Worker count: `requested` or the available parallelism, capped by
/// `DSKG_THREADS` when set.
pub fn thread_count(requested: Option<usize>) -> Result<usize> {
    let cap = match std::env::var("DSKG_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                return Err(Error::Config(format!(
                    "DSKG_THREADS must be a positive integer, got '{s}'"
                )))
            }
        },
        Err(_) => None,
    };
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let want = requested.unwrap_or(avail);
    Ok(cap.map_or(want, |c| want.min(c)).max(1))
}

fn base_record(spec: &ScanSpec, pt: &ScanPoint) -> RunRecord {
    let (m, mass) = match pt.params(spec.n) {
        Ok(p) => (p.m(), p.mass()),
        Err(_) => match pt.axis {
            MassAxis::Physical => (pt.mass_value, f64::NAN),
            MassAxis::Curved => (f64::NAN, pt.mass_value),
        },
    };
    RunRecord {
        index: pt.index,
        n: spec.n,
        m,
        mass,
        p: pt.p,
        beta: pt.beta,
        d0: pt.d0,
        d1: pt.d1,
        c: spec.c,
        c0: pt.amplitude,
        c1: pt.amplitude,
        t_max: spec.t_max,
        dx: spec.dx,
        classification: Classification::Inconclusive {
            reason: "not run".into(),
        },
        certificates: Vec::new(),
        holder_ok: None,
        r_max: None,
        last_state: None,
        diagnostic: None,
        elapsed_ms: 0.0,
    }
}

/// Lemma verdicts for the weight and data of one point. The support of a
/// solution stays in `|x| <= r0 + 1`, which fixes `delta0`.
pub fn certificates(params: &PhysicalParams, gamma: &GammaSchedule, data: &BumpData) -> Vec<CertificateSummary> {
    let q = params.q_eff();
    let mut out = Vec::new();
    if params.mass() > 0.0 {
        if params.mass() * data.c0 + data.c1 > 0.0 {
            if let Ok(c) =
                check_lemma_small_energy(params.mass(), gamma, q, SMALL_ENERGY_EPS, 1.0, &ProbeGrid::default())
            {
                out.push(CertificateSummary::from(&c));
            }
        }
    } else if let Ok(c) = check_kato_power(gamma, q) {
        out.push(CertificateSummary::from(&c));
    }
    if data.c0 > 0.0 {
        let large = params
            .comparison(*gamma, data.r0 + 1.0)
            .and_then(|cmp| check_lemma_large_energy(&cmp, 0.0, data.c0, data.c1, LARGE_ENERGY_HORIZON));
        if let Ok(c) = large {
            out.push(CertificateSummary::from(&c));
        }
    }
    out
}

/// Run one point with the finite-difference backend at `dx` and `dx/2`.
pub fn run_point(spec: &ScanSpec, pt: &ScanPoint) -> Result<RunRecord> {
    let mut rec = base_record(spec, pt);
    let params = pt.params(spec.n)?;
    let gamma = GammaSchedule::PowerExp {
        c: spec.c,
        d0: pt.d0,
        d1: pt.d1,
    };
    gamma.validate()?;
    let data = BumpData::new(spec.r0, pt.amplitude, pt.amplitude)?;
    let grid = Grid1D::covering(spec.r0, spec.dx, spec.dt(), spec.t_max)?;
    let run = solve_fd(&data, &grid, &params, &gamma, &FdOptions::default())?;
    rec.classification = run.classification.clone();
    rec.holder_ok = Some(
        holder_lower_bound_check(&run.fine.records, &params) && holder_lower_bound_check(&run.coarse.records, &params),
    );
    rec.r_max = Some(run.fine.max_support_radius());
    rec.last_state = run.fine.records.last().map(|r| (r.t, r.f, r.max_abs_u));
    rec.certificates = certificates(&params, &gamma, &data);
    apply_certificates(&mut rec);
    Ok(rec)
}

/// A certified finite lifespan overrides an `alive_at` verdict, which only
/// says the blow-up lies beyond `t_max`.
pub fn apply_certificates(rec: &mut RunRecord) {
    if let Classification::AliveAt { t_max } = rec.classification {
        if let Some(c) = rec.certificates.iter().find(|c| c.holds) {
            rec.classification = Classification::Inconclusive {
                reason: format!("alive at t_max = {t_max} but the {} lemma predicts blow-up", c.lemma),
            };
        }
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Empirical boundary of one slice (fixed mass, p, beta, amplitude, d1)
/// along the `d0` axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub mass: f64,
    pub p: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub d1: f64,
    pub predicted_d0: f64,
    /// Largest alive `d0` and smallest blow-up `d0`.
    pub bracket: Option<(f64, f64)>,
    /// Midpoint of the bracket.
    pub threshold: Option<f64>,
    pub distance: Option<f64>,
    /// Every alive cell lies left of every blow-up cell.
    pub ordered: bool,
    pub inconclusive: usize,
    pub note: String,
}

impl SliceSummary {
    /// Width of the bracket, the local grid cell.
    pub fn cell(&self) -> Option<f64> {
        self.bracket.map(|(lo, hi)| hi - lo)
    }
}

/// One summary per slice, in order of first appearance.
pub fn boundary_summary(records: &[RunRecord]) -> Vec<SliceSummary> {
    let key = |r: &RunRecord| [r.mass, r.p, r.beta, r.c0, r.d1].map(|v| (v + 0.0).to_bits());
    let mut order: Vec<[u64; 5]> = Vec::new();
    for r in records {
        if !order.contains(&key(r)) {
            order.push(key(r));
        }
    }
    order
        .into_iter()
        .map(|k| {
            let mut cells: Vec<&RunRecord> = records.iter().filter(|r| key(r) == k).collect();
            cells.sort_by(|a, b| a.d0.total_cmp(&b.d0));
            let first = cells[0];
            let alive: Vec<f64> = cells
                .iter()
                .filter(|r| matches!(r.classification, Classification::AliveAt { .. }))
                .map(|r| r.d0)
                .collect();
            let blow: Vec<f64> = cells
                .iter()
                .filter(|r| r.classification.is_blowup())
                .map(|r| r.d0)
                .collect();
            let inconclusive = cells.len() - alive.len() - blow.len();
            let predicted = first.predicted_d0();
            let lo = alive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let hi = blow.iter().copied().fold(f64::INFINITY, f64::min);
            let ordered = lo < hi;
            let (bracket, note) = match (alive.is_empty(), blow.is_empty()) {
                (false, false) if ordered => (Some((lo, hi)), "transition found".to_string()),
                (false, false) => (
                    Some((blow.iter().copied().fold(f64::INFINITY, f64::min), lo)),
                    "alive and blow-up cells interleave".to_string(),
                ),
                (true, false) => (None, "blow-up across the slice".to_string()),
                (false, true) => (None, "no blow-up before t_max across the slice".to_string()),
                (true, true) => (None, "no classified cells".to_string()),
            };
            let threshold = bracket.map(|(a, b)| 0.5 * (a + b));
            SliceSummary {
                mass: first.mass,
                p: first.p,
                beta: first.beta,
                amplitude: first.c0,
                d1: first.d1,
                predicted_d0: predicted,
                bracket,
                threshold,
                distance: threshold.map(|t| (t - predicted).abs()),
                ordered,
                inconclusive,
                note,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutput {
    pub records: Vec<RunRecord>,
    pub warnings: Vec<String>,
    pub summary: Vec<SliceSummary>,
}

/// Sweep with the finite-difference runner.
pub fn scan(spec: &ScanSpec) -> Result<ScanOutput> {
    scan_with(spec, run_point)
}

/// Sweep with a custom per-point runner. Errors and panics of one point
/// degrade its record to `inconclusive`; the sweep itself only fails on an
/// invalid spec.
pub fn scan_with<F>(spec: &ScanSpec, runner: F) -> Result<ScanOutput>
where
    F: Fn(&ScanSpec, &ScanPoint) -> Result<RunRecord> + Sync,
{
    spec.validate()?;
    let (points, warnings) = expand(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(spec.threads)?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<RunRecord> = pool.install(|| {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|pt| {
                let start = Instant::now();
                let mut rec = match catch_unwind(AssertUnwindSafe(|| runner(spec, pt))) {
                    Ok(Ok(rec)) => rec,
                    Ok(Err(e)) => with_class(spec, pt, Classification::Inconclusive { reason: e.to_string() }),
                    Err(payload) => with_class(
                        spec,
                        pt,
                        Classification::Inconclusive {
                            reason: format!("panic: {}", panic_message(payload)),
                        },
                    ),
                };
                rec.index = pt.index;
                rec.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
                rec
            })
            .collect()
    });
    let summary = boundary_summary(&records);
    Ok(ScanOutput {
        records,
        warnings,
        summary,
    })
}

fn with_class(spec: &ScanSpec, pt: &ScanPoint, classification: Classification) -> RunRecord {
    RunRecord {
        classification,
        ..base_record(spec, pt)
    }
}
