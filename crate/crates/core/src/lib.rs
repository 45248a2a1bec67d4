pub mod curve;
pub mod diameter;
pub mod metric;
pub mod sampling;
pub mod constructions;
pub mod estimators;
pub mod hyperspace;
pub mod obstruction;
pub mod acceptance;
