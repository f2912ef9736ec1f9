//! Config-driven sweeps over parameter grids, their CSV and SVG output, and
//! the validation suites.

pub mod config;
pub mod svg;
pub mod sweep;
pub mod table;
pub mod validation;

pub use config::{ResolvedConfig, Scenario, SweepConfig};
pub use svg::{emit_svg, render_svg, PlotSpec};
pub use sweep::{run_sweep, theory_point, SweepResult, SweepRow, TheoryPoint};
pub use table::{emit_csv, Table};
pub use validation::{Check, Suite};
