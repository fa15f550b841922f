//! Composite emitter × cavity Hilbert space, states and elementary operators.

mod operator;
mod space;
mod state;

pub use operator::{
    emitter_lowering, emitter_raising, ladder_operators, total_excitation_operator,
    OperatorMatrix, HERMITIAN_TOL, UNITARY_TOL,
};
pub use space::{CompositeSpace, DEFAULT_DIM_LIMIT};
pub use state::{DensityMatrix, StateVector, NORM_TOL};
