//! Target posteriors and the systems used to validate the samplers.

pub mod cox;
pub mod discrete;
pub mod gamma;
pub mod mixture;
pub mod sensor;

pub use cox::{simulate_cox_data, CoxModel};
pub use discrete::DiscreteSystem;
pub use gamma::{gamma_target, GammaTarget};
pub use mixture::GaussianMixture1d;
pub use sensor::{simulate_sensor_data, SensorData, SensorGibbsKernel, SensorModel, SensorUpdate};
