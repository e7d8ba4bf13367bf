pub mod driver;
pub mod elasticity;
pub mod metrics;
pub mod runtime;
pub mod sim;
pub mod trace;
pub mod scenarios;
