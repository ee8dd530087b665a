//! Algebroid data in local coordinates and the scalar fields defined on it.

pub mod algebroid;
pub mod fields;

pub use algebroid::{
    coordinate_frame, frame_from_vectorfields, lie_algebra, lie_bracket, nonholonomic_structure, AlgebroidStructure,
    MatrixFn, NonholonomicFrame, StructureTensor,
};
pub use fields::{Arity, ControlField, ScalarField, ScalarFn, VectorFn};

/// A point of the algebroid bundle: base point `q` and fiber coordinates `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberVelocity {
    pub q: Vec<f64>,
    pub y: Vec<f64>,
}

/// A covector split into its base part `mu_i` and fiber part `mu~_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentValue {
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}
