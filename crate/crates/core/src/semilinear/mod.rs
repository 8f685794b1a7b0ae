//! Solvers for the 1-D nonlocal equation
//!
//! ```text
//! u_tt - e^{-2t} u_xx - M^2 u = Γ(t) (∫|u|^p dx)^β |u|^p,   u = e^{nt/2} φ
//! ```
//!
//! Two backends: an explicit leapfrog scheme ([`solve_fd`]) and Picard
//! iteration of the integral form through the cone kernel
//! ([`solve_picard`]). Both track the moment `F = ∫u dx`, the `p`-moment
//! and the support radius.

mod diagnostics;
mod fd;
mod grid;
mod io;
mod params;
mod picard;

pub use diagnostics::{
    holder_lower_bound_check, holder_lower_bound_check_with, moments, support_radius, verify_moment_law, MomentRecord,
    SupportInfo, HOLDER_SLACK, SUPPORT_THRESHOLD,
};
pub use fd::{
    combine_resolutions, run_fd_single, solve_fd, FdOptions, FieldHistory, PdeRun, RunOutcome, SingleRun, BLOWUP_LEVEL,
    STIFFNESS_LIMIT,
};
pub use grid::{bump, bump_integral, BumpData, Grid1D};
pub use io::{write_records_csv, RunManifest, RECORD_HEADER};
pub use params::{transform_phi_to_u, transform_u_to_phi, PhysicalParams};
pub use picard::{picard_iterate, solve_picard, PicardOptions, PicardRun};
