//! Unit-scale elliptic solves at junction nodes: the velocity potential,
//! the steady node-layer field, decay diagnostics, the solvability-identity
//! quadrature and the flux-defect coefficients of the corrector levels.
//!
//! Geometry is restricted to axis-aligned node boxes with one port per axis
//! direction, so pixel/voxel meshes represent the domain exactly: the node
//! box spans ±ℓ₀ along every ported axis, and each incident edge continues
//! as a straight stub of half-width h truncated at ξ₁ = L_trunc with a
//! Dirichlet far cap.

mod defect;
mod elliptic;
mod mesh;

pub use defect::{appendix_solvability_defect, compute_flux_defect_d, FluxDefectInputs};
pub use elliptic::{
    interp_field, solve_node_layer, solve_potential, DecayFit, NodeSeries, NodeSolution,
    PotentialField,
};
pub use mesh::{FaceKind, JunctionMesh, Region};

use crate::error::Error;
use crate::network::{EdgeEnd, Network, VertexKind};
use crate::Result;

/// One cylinder attachment on the node boundary.
#[derive(Debug, Clone, Copy)]
pub struct Port {
    /// Index into `Network::edges`.
    pub edge: usize,
    pub axis: usize,
    /// +1: the cylinder extends toward +axis; −1: toward −axis.
    pub sign: f64,
    /// Cross-section half-width.
    pub half_width: f64,
    /// Which end of the edge sits at this vertex.
    pub end: EdgeEnd,
}

/// Axis-aligned unit-scale node polytope with its ports.
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    pub dim: usize,
    pub ell0: f64,
    /// Box half-width per axis.
    pub half_widths: Vec<f64>,
    pub ports: Vec<Port>,
}

impl NodeGeometry {
    /// Builds the node polytope of an interior vertex: ported axes get
    /// half-width ℓ₀ (the port distance), free axes the largest port
    /// half-width that must pass through them.
    pub fn from_network(net: &Network, vertex_idx: usize) -> Result<Self> {
        let v = &net.vertices[vertex_idx];
        if v.kind != VertexKind::Interior {
            return Err(Error::Geometry(format!("vertex {} is not interior", v.id)));
        }
        let ell0 = v
            .ell0
            .ok_or_else(|| Error::Geometry(format!("vertex {} has no ell0", v.id)))?;
        let dim = net.dim.dim();
        let mut ports = Vec::new();
        for inc in net.incident(vertex_idx) {
            let (axis, dir_sign) = net.edge_direction(inc.edge)?;
            let sign = match inc.end {
                EdgeEnd::FromEnd => dir_sign,
                EdgeEnd::ToEnd => -dir_sign,
            };
            ports.push(Port {
                edge: inc.edge,
                axis,
                sign,
                half_width: net.edges[inc.edge].radius,
                end: inc.end,
            });
        }
        let mut half_widths = vec![0.0; dim];
        for a in 0..dim {
            let ported = ports.iter().any(|p| p.axis == a);
            if ported {
                half_widths[a] = ell0;
            } else {
                half_widths[a] = ports
                    .iter()
                    .filter(|p| p.axis != a)
                    .map(|p| p.half_width)
                    .fold(ell0, f64::max);
            }
        }
        // Ports must fit their face.
        for p in &ports {
            for a in 0..dim {
                if a != p.axis && p.half_width > half_widths[a] + 1e-12 {
                    return Err(Error::Geometry(format!(
                        "port of edge {} (half-width {}) exceeds node face extent {}",
                        net.edges[p.edge].id, p.half_width, half_widths[a]
                    )));
                }
            }
        }
        Ok(NodeGeometry { dim, ell0, half_widths, ports })
    }

    /// (axis, port distance) pairs of the ported axes, for clearance bumps.
    pub fn ported_axes(&self) -> Vec<(usize, f64)> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for p in &self.ports {
            if seen.insert(p.axis) {
                out.push((p.axis, self.half_widths[p.axis]));
            }
        }
        out
    }
}
