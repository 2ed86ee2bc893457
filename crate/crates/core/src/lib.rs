pub mod celldivision;
pub mod cli;
pub mod circle;
pub mod fieldexpr;
pub mod invariants;
pub mod flow;
pub mod quadrature;
pub mod surface;
pub mod transgression;
