//! Experiment generators, the monitoring simulator and file formats.

pub mod config;
pub mod dynamics;
pub mod functions;
pub mod io;
pub mod monitor;
pub mod noise;
pub mod scenarios;
pub mod sweep;

pub use config::{CalibrateConfig, SimulateConfig};
pub use dynamics::{perturb_dynamics, simulate_system, LinearSystem, Perturbation};
pub use functions::{sample_rkhs_function, BoxDomain, RkhsFunction};
pub use monitor::{monitor, AlarmRule, MonitorConfig, MonitorRow, MonitorRun};
pub use noise::NoiseModel;
pub use scenarios::{generate_pair, Regime, Scenario, ScenarioConfig};
pub use sweep::{run_sweep, SweepAxis, SweepConfig, SweepResult};
