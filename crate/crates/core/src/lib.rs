pub mod autograd;
pub mod data;
pub mod distributions;
pub mod model;
pub mod ood;
pub mod rng;
pub mod scalar;
pub mod train;
