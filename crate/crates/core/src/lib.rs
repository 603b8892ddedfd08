pub mod baselines;
pub mod cli;
pub mod metrics;
pub mod queue;
pub mod sim;
pub mod solver;
pub mod topology;
pub mod workload;
