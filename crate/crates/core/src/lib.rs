pub mod analytic;
pub mod mcsim;
pub mod model;
pub mod specfun;
