//! One module per subcommand. Each command is a pure function of its
//! inputs and the resolved config; outputs go to the given directory.

pub mod g2;
pub mod polarization;
pub mod saturation;
pub mod simulate;
pub mod theory;

pub use g2::cmd_g2;
pub use polarization::{cmd_polar_scan, cmd_tomo};
pub use saturation::cmd_saturation;
pub use simulate::{cmd_simulate, simulate_pipeline};
pub use theory::cmd_theory;
