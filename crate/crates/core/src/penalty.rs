//! Corner-weighted penalty parameter.
//!
//! For an edge `e` with midpoint `m_e`,
//!
//! ```text
//! Phi_mu(e) = prod_l |m_e - c_l|^(1 - mu_l),    gamma_e = Phi_mu(e)^2 / |e|
//! ```
//!
//! so `gamma_e ~ 1/|e|` away from corners and is weakened near corners
//! with `mu_l < 1`.

use crate::mesh::{CornerSpec, Edge, Mesh};
use crate::{norm, sub};

pub fn phi_mu(edge: &Edge, corners: &[CornerSpec]) -> f64 {
    corners
        .iter()
        .filter(|c| c.mu != 1.0)
        .map(|c| norm(sub(edge.midpoint, c.position)).powf(1.0 - c.mu))
        .product()
}

pub fn gamma_edge(edge: &Edge, corners: &[CornerSpec]) -> f64 {
    let phi = phi_mu(edge, corners);
    phi * phi / edge.length
}

/// Penalty values cached per edge; every consumer reads this cache.
#[derive(Debug, Clone)]
pub struct PenaltyField {
    pub corners: Vec<CornerSpec>,
    gamma: Vec<f64>,
}

impl PenaltyField {
    pub fn new(mesh: &Mesh) -> Self {
        let gamma = mesh.edges.iter().map(|e| gamma_edge(e, &mesh.corners)).collect();
        Self { corners: mesh.corners.clone(), gamma }
    }

    #[inline]
    pub fn gamma(&self, edge: usize) -> f64 {
        self.gamma[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma
    }
}
