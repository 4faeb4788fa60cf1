//! Closed-loop simulation: scenario documents, the tick loop and CSV logs.

mod instance;
mod log;
mod run;
mod scenario;

pub use instance::{load_instance, load_instance_file, Instance};
pub use log::{read_log, write_log, write_log_file, LogLayout};
pub use run::{perturb_initial_q, run, TickLog};
pub use scenario::{load_scenario, load_scenario_file, Scenario};
