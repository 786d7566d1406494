pub mod quadrature;
pub mod specfun;
pub mod gardner_derrida;
pub mod moment_bounds;
pub mod seeds;
pub mod binary_experiment;
pub mod spherical_experiment;
pub mod report;
