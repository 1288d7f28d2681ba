//! Boundary-fitted pixel/voxel mesh of the truncated unit-scale junction.

use std::collections::HashMap;

use super::NodeGeometry;
use crate::error::Error;
use crate::Result;

/// Region tag of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Node,
    /// Cylinder stub of port `p` (index into `NodeGeometry::ports`).
    Cylinder(usize),
}

/// Kind of a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Node wall Γ₀.
    NodeWall,
    /// Lateral cylinder wall Γ_p.
    Lateral(usize),
    /// Truncation cap of cylinder p (Dirichlet far field).
    FarCap(usize),
}

/// One boundary face: owning cell, axis, direction (+1 outward hi side).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    pub cell: usize,
    pub axis: usize,
    pub dir: i32,
    pub kind: FaceKind,
}

/// Uniform Cartesian mesh over the node box plus truncated stubs.
///
/// Cell centers sit at (c + ½)·δx for integer multi-indices c, so every
/// geometric feature (an integer multiple of δx) is face-aligned and the
/// mesh is boundary-fitted by construction.
#[derive(Debug, Clone)]
pub struct JunctionMesh {
    pub geo: NodeGeometry,
    pub spacing: f64,
    pub l_trunc: f64,
    /// Integer coordinates of active cells (z = 0 in 2D).
    pub coords: Vec<[i64; 3]>,
    pub region: Vec<Region>,
    index: HashMap<[i64; 3], usize>,
    /// Boundary faces, in deterministic cell order.
    pub boundary: Vec<BoundaryFace>,
}

fn snap(value: f64, spacing: f64, what: &str) -> Result<i64> {
    let q = value / spacing;
    let r = q.round();
    if (q - r).abs() > 1e-9 * q.abs().max(1.0) {
        return Err(Error::Geometry(format!(
            "{what} = {value} is not an integer multiple of the mesh spacing {spacing}"
        )));
    }
    Ok(r as i64)
}

impl JunctionMesh {
    pub fn build(geo: NodeGeometry, spacing: f64, l_trunc: f64) -> Result<Self> {
        let dim = geo.dim;
        if !(2..=3).contains(&dim) {
            return Err(Error::Geometry("junction meshes support 2 or 3 dimensions".into()));
        }
        let min_pass = 3.0 * geo.ell0;
        if l_trunc < min_pass {
            return Err(Error::Geometry(format!(
                "truncation length {l_trunc} below the cut-off span {min_pass}"
            )));
        }
        // Integer extents.
        let mut half_w = vec![0i64; dim];
        for a in 0..dim {
            half_w[a] = snap(geo.half_widths[a], spacing, "node half-width")?;
        }
        let lt = snap(l_trunc, spacing, "truncation length")?;
        let mut port_hw = Vec::new();
        for p in &geo.ports {
            port_hw.push(snap(p.half_width, spacing, "port half-width")?);
        }

        // Bounding box in integer cells.
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..dim {
            lo[a] = -half_w[a];
            hi[a] = half_w[a];
        }
        for (pi, p) in geo.ports.iter().enumerate() {
            let _ = pi;
            if p.sign > 0.0 {
                hi[p.axis] = hi[p.axis].max(lt);
            } else {
                lo[p.axis] = lo[p.axis].min(-lt);
            }
        }

        let inside_node = |c: &[i64; 3]| -> bool {
            (0..dim).all(|a| c[a] >= -half_w[a] && c[a] < half_w[a])
        };
        let inside_port = |c: &[i64; 3], pi: usize| -> bool {
            let p = &geo.ports[pi];
            let axial = if p.sign > 0.0 { c[p.axis] } else { -c[p.axis] - 1 };
            if axial < half_w[p.axis] || axial >= lt {
                return false;
            }
            (0..dim)
                .filter(|&a| a != p.axis)
                .all(|a| c[a] >= -port_hw[pi] && c[a] < port_hw[pi])
        };

        let mut coords = Vec::new();
        let mut region = Vec::new();
        let mut index = HashMap::new();
        let zrange = if dim == 3 { (lo[2], hi[2]) } else { (0, 1) };
        for x in lo[0]..hi[0] {
            for y in lo[1]..hi[1] {
                for z in zrange.0..zrange.1 {
                    let c = [x, y, z];
                    let reg = if inside_node(&c) {
                        Some(Region::Node)
                    } else {
                        (0..geo.ports.len()).find(|&pi| inside_port(&c, pi)).map(Region::Cylinder)
                    };
                    if let Some(reg) = reg {
                        index.insert(c, coords.len());
                        coords.push(c);
                        region.push(reg);
                    }
                }
            }
        }
        if coords.is_empty() {
            return Err(Error::Geometry("junction mesh has no active cells".into()));
        }

        // Boundary faces.
        let mut boundary = Vec::new();
        for (ci, c) in coords.iter().enumerate() {
            for axis in 0..dim {
                for dir in [-1i32, 1i32] {
                    let mut nb = *c;
                    nb[axis] += dir as i64;
                    if index.contains_key(&nb) {
                        continue;
                    }
                    let kind = match region[ci] {
                        Region::Node => FaceKind::NodeWall,
                        Region::Cylinder(pi) => {
                            let p = &geo.ports[pi];
                            let outward_axial = axis == p.axis
                                && ((p.sign > 0.0 && dir > 0) || (p.sign < 0.0 && dir < 0));
                            let at_cap = outward_axial
                                && (if p.sign > 0.0 { c[axis] == lt - 1 } else { c[axis] == -lt });
                            if at_cap {
                                FaceKind::FarCap(pi)
                            } else {
                                FaceKind::Lateral(pi)
                            }
                        }
                    };
                    boundary.push(BoundaryFace { cell: ci, axis, dir, kind });
                }
            }
        }

        Ok(JunctionMesh { geo, spacing, l_trunc, coords, region, index, boundary })
    }

    pub fn dim(&self) -> usize {
        self.geo.dim
    }

    pub fn n_cells(&self) -> usize {
        self.coords.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn face_area(&self) -> f64 {
        self.spacing.powi(self.dim() as i32 - 1)
    }

    pub fn cell_index(&self, c: &[i64; 3]) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Physical (unit-scale) center of a cell.
    pub fn center(&self, ci: usize) -> [f64; 3] {
        let c = self.coords[ci];
        let mut out = [0.0; 3];
        for a in 0..self.dim() {
            out[a] = (c[a] as f64 + 0.5) * self.spacing;
        }
        out
    }

    /// Axial coordinate ξ₁ ≥ 0 of a cell along port `pi` (distance from the
    /// vertex center along the cylinder axis).
    pub fn axial_coord(&self, ci: usize, pi: usize) -> f64 {
        let p = &self.geo.ports[pi];
        let x = self.center(ci)[p.axis];
        p.sign * x
    }

    /// Neighbor of a cell across (axis, dir), if active.
    pub fn neighbor(&self, ci: usize, axis: usize, dir: i32) -> Option<usize> {
        let mut nb = self.coords[ci];
        nb[axis] += dir as i64;
        self.cell_index(&nb)
    }

    /// All cells of the node region.
    pub fn node_cells(&self) -> Vec<usize> {
        (0..self.n_cells()).filter(|&i| self.region[i] == Region::Node).collect()
    }

    /// All cells of cylinder stub `pi`.
    pub fn cylinder_cells(&self, pi: usize) -> Vec<usize> {
        (0..self.n_cells())
            .filter(|&i| self.region[i] == Region::Cylinder(pi))
            .collect()
    }

    /// Interior faces from node cells into cylinder `pi` (the port plane).
    pub fn port_faces(&self, pi: usize) -> Vec<(usize, usize, i32)> {
        let p = &self.geo.ports[pi];
        let dir = if p.sign > 0.0 { 1 } else { -1 };
        let mut out = Vec::new();
        for (ci, _) in self.coords.iter().enumerate() {
            if self.region[ci] != Region::Node {
                continue;
            }
            if let Some(nb) = self.neighbor(ci, p.axis, dir) {
                if self.region[nb] == Region::Cylinder(pi) {
                    out.push((ci, p.axis, dir));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::presets;
    use crate::network::Network;

    fn channel_mesh(spacing: f64, l_trunc: f64) -> JunctionMesh {
        let net: Network = presets::two_edge_channel(-1.0, 1.0);
        let geo = NodeGeometry::from_network(&net, 0).unwrap();
        JunctionMesh::build(geo, spacing, l_trunc).unwrap()
    }

    #[test]
    fn channel_mesh_counts() {
        // Node box 0.25 × 0.25 half-widths, stubs to 2.0, spacing 1/16.
        let m = channel_mesh(1.0 / 16.0, 2.0);
        // Node: 8×8 cells; each stub: (2.0 − 0.25)/δx = 28 × 8 cells.
        assert_eq!(m.node_cells().len(), 64);
        assert_eq!(m.cylinder_cells(0).len(), 28 * 8);
        assert_eq!(m.cylinder_cells(1).len(), 28 * 8);
        assert_eq!(m.n_cells(), 64 + 2 * 224);
        // The port planes carry 8 faces each.
        assert_eq!(m.port_faces(0).len(), 8);
        assert_eq!(m.port_faces(1).len(), 8);
        // Far caps: 8 faces per stub.
        let caps: Vec<_> = m
            .boundary
            .iter()
            .filter(|f| matches!(f.kind, FaceKind::FarCap(_)))
            .collect();
        assert_eq!(caps.len(), 16);
    }

    #[test]
    fn channel_walls_have_no_node_wall_at_ports() {
        let m = channel_mesh(1.0 / 16.0, 2.0);
        // Straight channel: node walls are exactly the top/bottom strips of
        // the box (2 × 8 faces); the x faces continue into the stubs.
        let node_walls = m
            .boundary
            .iter()
            .filter(|f| f.kind == FaceKind::NodeWall)
            .count();
        assert_eq!(node_walls, 16);
    }

    #[test]
    fn misaligned_spacing_rejected() {
        let net: Network = presets::two_edge_channel(-1.0, 1.0);
        let geo = NodeGeometry::from_network(&net, 0).unwrap();
        assert!(JunctionMesh::build(geo, 0.3, 2.1).is_err());
    }

    #[test]
    fn t_junction_mesh_regions() {
        let net: Network = presets::star(1, 2, false);
        let geo = NodeGeometry::from_network(&net, 0).unwrap();
        let m = JunctionMesh::build(geo, 1.0 / 16.0, 1.5).unwrap();
        assert_eq!(m.geo.ports.len(), 3);
        for pi in 0..3 {
            assert!(!m.cylinder_cells(pi).is_empty());
            assert_eq!(m.port_faces(pi).len(), 8);
        }
    }
}
