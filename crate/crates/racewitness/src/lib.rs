pub mod baselines;
pub mod cli;
pub mod closure;
pub mod cone;
pub mod dag;
pub mod decision;
pub mod io;
pub mod linearize;
pub mod m2;
pub mod oracle;
pub mod trace;
pub mod workload;
