//! The 4×4 projectors describing Alice's Z and X outcomes and Bob's bit in
//! Eve's collective-attack picture. Coordinates are ordered `(a_I, a_X, a_Y, a_Z)`.

use nalgebra::{Matrix4, Vector4};

pub const Z00: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
pub const Z10: [f64; 4] = [0.0, 1.0, 1.0, 0.0];
pub const Z01: [f64; 4] = [0.0, 1.0, -1.0, 0.0];
pub const Z11: [f64; 4] = [1.0, 0.0, 0.0, -1.0];
pub const XPP: [f64; 4] = [1.0, 1.0, 0.0, 0.0];
pub const XMP: [f64; 4] = [0.0, 0.0, -1.0, 1.0];
pub const XPM: [f64; 4] = [0.0, 0.0, 1.0, 1.0];
pub const XMM: [f64; 4] = [1.0, -1.0, 0.0, 0.0];

/// `P(v)/2` for every Z̃ and X̃ vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisConstants {
    pub z00: Matrix4<f64>,
    pub z10: Matrix4<f64>,
    pub z01: Matrix4<f64>,
    pub z11: Matrix4<f64>,
    pub xpp: Matrix4<f64>,
    pub xmp: Matrix4<f64>,
    pub xpm: Matrix4<f64>,
    pub xmm: Matrix4<f64>,
}

fn half_projector(v: [f64; 4]) -> Matrix4<f64> {
    let v = Vector4::from(v);
    v * v.transpose() * 0.5
}

impl BasisConstants {
    pub fn new() -> Self {
        Self {
            z00: half_projector(Z00),
            z10: half_projector(Z10),
            z01: half_projector(Z01),
            z11: half_projector(Z11),
            xpp: half_projector(XPP),
            xmp: half_projector(XMP),
            xpm: half_projector(XPM),
            xmm: half_projector(XMM),
        }
    }
}

impl Default for BasisConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// The symmetry group of bit and basis flips, as sign flips of the coordinates.
pub(crate) const SYMMETRY_GROUP: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
];
