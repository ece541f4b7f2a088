//! VAR(p) representation, companion algebra, simulation and Monte Carlo designs.

mod dgp;
mod model;
mod panel;
mod simulate;

pub use dgp::{dgp_sigma_u, make_dgp, model_from_roots, tridiagonal_root, DgpKind, DgpSpec, DGP_MAX_RETRIES};
pub use model::{build_companion, spectral_radius, CompanionMatrix, VarModel};
pub use panel::TimeSeriesPanel;
pub use simulate::{simulate, simulate_with, GaussianInnovations, Innovations, DEFAULT_BURN_IN};
