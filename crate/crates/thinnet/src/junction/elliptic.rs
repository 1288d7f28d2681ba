//! Elliptic solves on the junction mesh: the Neumann velocity potential on
//! the node polytope and the steady convection-diffusion node-layer field on
//! the truncated junction.

use serde::Serialize;

use super::mesh::{FaceKind, JunctionMesh, Region};
use crate::error::Error;
use crate::grid::{linear_fit, Series};
use crate::sparse::{bicgstab_ilu, cg_singular_neumann, CsrBuilder, Ilu0};
use crate::Result;

/// Velocity potential on the node region: Δp = 0, ∂_ν p = 𝚟_p on the ports,
/// ∂_ν p = 0 on Γ₀, normalized to ∫ p = 0.
#[derive(Debug, Clone)]
pub struct PotentialField {
    /// Value per mesh cell; zero outside the node region.
    pub values: Vec<f64>,
    /// Port fluxes the field was solved for.
    pub fluxes: Vec<f64>,
    /// Compatibility defect Σ 𝚟_p |port| of the data.
    pub compat_defect: f64,
}

impl PotentialField {
    /// Face-normal velocity component (along +axis) at the face between
    /// `cell` and its (axis, dir) neighbor, covering node and stub cells.
    pub fn face_velocity(&self, mesh: &JunctionMesh, cell: usize, axis: usize, dir: i32) -> f64 {
        let stub_speed = |pi: usize| {
            let p = &mesh.geo.ports[pi];
            if p.axis == axis {
                p.sign * self.fluxes[pi]
            } else {
                0.0
            }
        };
        match mesh.region[cell] {
            Region::Cylinder(pi) => stub_speed(pi),
            Region::Node => match mesh.neighbor(cell, axis, dir) {
                Some(nb) => match mesh.region[nb] {
                    Region::Node => {
                        let d = (self.values[nb] - self.values[cell]) / mesh.spacing;
                        if dir > 0 {
                            d
                        } else {
                            -d
                        }
                    }
                    // Port face: the Neumann data itself.
                    Region::Cylinder(pi) => stub_speed(pi),
                },
                None => 0.0, // walls carry no normal flow
            },
        }
    }

    /// Cell-centered gradient of p by averaging the two face values.
    pub fn gradient(&self, mesh: &JunctionMesh, cell: usize) -> Vec<f64> {
        let dim = mesh.dim();
        let mut g = vec![0.0; dim];
        for (a, ga) in g.iter_mut().enumerate() {
            let hi = self.face_velocity(mesh, cell, a, 1);
            let lo = self.face_velocity(mesh, cell, a, -1);
            *ga = 0.5 * (hi + lo);
        }
        g
    }

    /// Max |discrete divergence| over node cells (flux imbalance per cell,
    /// scaled by the face area).
    pub fn max_divergence(&self, mesh: &JunctionMesh) -> f64 {
        let mut worst = 0.0_f64;
        for ci in 0..mesh.n_cells() {
            if mesh.region[ci] != Region::Node {
                continue;
            }
            let mut div = 0.0;
            for a in 0..mesh.dim() {
                div += self.face_velocity(mesh, ci, a, 1) - self.face_velocity(mesh, ci, a, -1);
            }
            worst = worst.max((div / mesh.spacing).abs());
        }
        worst
    }
}

/// Solves the node potential problem for the port fluxes 𝚟_p (= `fluxes`).
///
/// Errors with [`Error::Incompatible`] when the Neumann data violates the
/// flux balance beyond `compat_tol` (relative to the largest port flux),
/// mirroring the solvability condition of the continuous problem.
pub fn solve_potential(
    mesh: &JunctionMesh,
    fluxes: &[f64],
    compat_tol: f64,
) -> Result<PotentialField> {
    let ports = &mesh.geo.ports;
    if fluxes.len() != ports.len() {
        return Err(Error::Config(format!(
            "expected {} port fluxes, got {}",
            ports.len(),
            fluxes.len()
        )));
    }
    let area = mesh.face_area();
    // Compatibility: Σ 𝚟_p |port_p| = 0.
    let mut defect = 0.0;
    let mut scale = 0.0_f64;
    for (pi, &v) in fluxes.iter().enumerate() {
        let port_measure = mesh.port_faces(pi).len() as f64 * area;
        defect += v * port_measure;
        scale = scale.max((v * port_measure).abs());
    }
    if defect.abs() > compat_tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Incompatible { defect: defect.abs(), tolerance: compat_tol * scale });
    }

    // Dense numbering of node cells.
    let node_cells = mesh.node_cells();
    let mut local = vec![usize::MAX; mesh.n_cells()];
    for (k, &ci) in node_cells.iter().enumerate() {
        local[ci] = k;
    }
    let n = node_cells.len();
    let mut bld = CsrBuilder::new(n);
    let mut b = vec![0.0; n];
    let t_f = area / mesh.spacing;
    for (k, &ci) in node_cells.iter().enumerate() {
        for a in 0..mesh.dim() {
            for dir in [-1, 1] {
                match mesh.neighbor(ci, a, dir) {
                    Some(nb) if mesh.region[nb] == Region::Node => {
                        bld.add(k, k, t_f);
                        bld.add(k, local[nb], -t_f);
                    }
                    Some(nb) => {
                        // Port face into a cylinder: ∂_ν p = 𝚟_p.
                        if let Region::Cylinder(pi) = mesh.region[nb] {
                            b[k] += fluxes[pi] * area;
                        }
                    }
                    None => {} // Γ₀ wall: zero flux
                }
            }
        }
    }
    let a = bld.build();
    let weights = vec![mesh.cell_volume(); n];
    let p = cg_singular_neumann(&a, &b, &weights, 1e-12, 40 * n.max(100))?;

    let mut values = vec![0.0; mesh.n_cells()];
    for (k, &ci) in node_cells.iter().enumerate() {
        values[ci] = p[k];
    }
    Ok(PotentialField { values, fluxes: fluxes.to_vec(), compat_defect: defect })
}

/// Exponential decay fit of |N − target| along one stub.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub port: usize,
    /// Fitted rate β > 0 (|N − target| ∝ e^{−β ξ₁}); None when the contrast
    /// is too small to fit.
    pub beta: Option<f64>,
    /// |cross-section mean − target| one layer before the far cap.
    pub cap_mismatch: f64,
}

/// Steady node-layer field on the truncated junction.
#[derive(Debug, Clone)]
pub struct NodeSolution {
    pub values: Vec<f64>,
    pub targets: Vec<f64>,
    pub decay: Vec<DecayFit>,
    /// Kirchhoff defect Σ ω_p 𝚟_p target_p of the supplied far data.
    pub target_kirchhoff_defect: f64,
}

/// Solves −ΔN + V·∇N = 0 with homogeneous Neumann walls and Dirichlet
/// far-cap values `targets`, using upwinded conservative convection from
/// `potential` (node region) and the frozen stub speeds.
pub fn solve_node_layer(
    mesh: &JunctionMesh,
    potential: &PotentialField,
    targets: &[f64],
    weights: &[f64],
) -> Result<NodeSolution> {
    let ports = &mesh.geo.ports;
    if targets.len() != ports.len() {
        return Err(Error::Config(format!(
            "expected {} far targets, got {}",
            ports.len(),
            targets.len()
        )));
    }
    let n = mesh.n_cells();
    let area = mesh.face_area();
    let dx = mesh.spacing;
    let t_f = area / dx;

    // Fast boundary-face lookup.
    let mut face_map: std::collections::HashMap<(usize, usize, i32), FaceKind> =
        std::collections::HashMap::with_capacity(mesh.boundary.len());
    for f in &mesh.boundary {
        face_map.insert((f.cell, f.axis, f.dir), f.kind);
    }

    let mut bld = CsrBuilder::new(n);
    let mut b = vec![0.0; n];
    for ci in 0..n {
        for a in 0..mesh.dim() {
            for dir in [-1, 1] {
                let vface_signed = potential.face_velocity(mesh, ci, a, dir);
                // Outward normal velocity through this face.
                let v_out = if dir > 0 { vface_signed } else { -vface_signed };
                match mesh.neighbor(ci, a, dir) {
                    Some(nb) => {
                        // Diffusion.
                        bld.add(ci, ci, t_f);
                        bld.add(ci, nb, -t_f);
                        // Upwind convection (conservative, div-free faces).
                        if v_out >= 0.0 {
                            bld.add(ci, ci, v_out * area);
                        } else {
                            bld.add(ci, nb, v_out * area);
                        }
                    }
                    None => {
                        match face_map.get(&(ci, a, dir)) {
                            Some(FaceKind::FarCap(pi)) => {
                                // Dirichlet ghost at distance δx/2.
                                bld.add(ci, ci, 2.0 * t_f);
                                b[ci] += 2.0 * t_f * targets[*pi];
                                if v_out >= 0.0 {
                                    bld.add(ci, ci, v_out * area);
                                } else {
                                    b[ci] -= v_out * area * targets[*pi];
                                }
                            }
                            _ => {} // walls: no flux at all
                        }
                    }
                }
            }
        }
    }
    let a = bld.build();
    let ilu = Ilu0::factor(&a)?;
    // Warm start from the target average.
    let avg = targets.iter().sum::<f64>() / targets.len().max(1) as f64;
    let x0 = vec![avg; n];
    let values = bicgstab_ilu(&a, &ilu, &b, Some(&x0), 1e-12, 4000)?;

    // Kirchhoff defect of the far data.
    let mut defect = 0.0;
    for (pi, _p) in ports.iter().enumerate() {
        defect += weights[pi] * potential.fluxes[pi] * targets[pi];
    }

    let decay = fit_decay(mesh, &values, targets);
    Ok(NodeSolution { values, targets: targets.to_vec(), decay, target_kirchhoff_defect: defect })
}

fn fit_decay(mesh: &JunctionMesh, values: &[f64], targets: &[f64]) -> Vec<DecayFit> {
    let mut out = Vec::new();
    let scale = values.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1e-300);
    for (pi, _) in mesh.geo.ports.iter().enumerate() {
        // Cross-section mean of |N − target| per axial layer.
        let mut layers: std::collections::BTreeMap<i64, (f64, usize)> =
            std::collections::BTreeMap::new();
        for ci in mesh.cylinder_cells(pi) {
            let xi = mesh.axial_coord(ci, pi);
            let key = (xi / mesh.spacing).round() as i64;
            let e = layers.entry(key).or_insert((0.0, 0));
            e.0 += values[ci] - targets[pi];
            e.1 += 1;
        }
        let profile: Vec<(f64, f64)> = layers
            .iter()
            .map(|(&k, &(sum, cnt))| (k as f64 * mesh.spacing, (sum / cnt as f64).abs()))
            .collect();
        let cap_mismatch = profile.last().map(|&(_, v)| v).unwrap_or(0.0);
        // Fit on the decaying range, skipping the port vicinity and the cap.
        let usable: Vec<(f64, f64)> = profile
            .iter()
            .copied()
            .filter(|&(xi, v)| {
                xi > 2.0 * mesh.geo.ell0 && xi < 0.8 * mesh.l_trunc && v > 1e-12 * scale
            })
            .collect();
        let beta = if usable.len() >= 4 {
            let xs: Vec<f64> = usable.iter().map(|&(x, _)| x).collect();
            let ys: Vec<f64> = usable.iter().map(|&(_, v)| v.ln()).collect();
            let (slope, _) = linear_fit(&xs, &ys);
            if slope < 0.0 {
                Some(-slope)
            } else {
                None
            }
        } else {
            None
        };
        out.push(DecayFit { port: pi, beta, cap_mismatch });
    }
    out
}

/// Time-dependent node-layer fields.
///
/// With time-constant junction velocities the steady problem is linear in
/// its far targets, so the field at any t is the superposition of per-port
/// basis solves; otherwise fields are sampled on a time grid.
#[derive(Debug, Clone)]
pub enum NodeSeries {
    Basis {
        /// basis[p]: solve with targets = e_p.
        basis: Vec<Vec<f64>>,
        /// Target histories per port.
        targets: Vec<Series>,
    },
    Sampled { times: Vec<f64>, fields: Vec<Vec<f64>>, targets: Vec<Series> },
}

impl NodeSeries {
    pub fn field_at(&self, t: f64) -> Vec<f64> {
        match self {
            NodeSeries::Basis { basis, targets } => {
                let n = basis.first().map_or(0, |b| b.len());
                let mut out = vec![0.0; n];
                for (b, tg) in basis.iter().zip(targets) {
                    let c = tg.eval(t);
                    for (o, &bv) in out.iter_mut().zip(b) {
                        *o += c * bv;
                    }
                }
                out
            }
            NodeSeries::Sampled { times, fields, .. } => {
                let n = times.len();
                if n == 1 {
                    return fields[0].clone();
                }
                let dtg = times[1] - times[0];
                let u = ((t - times[0]) / dtg).clamp(0.0, (n - 1) as f64);
                let k = (u.floor() as usize).min(n - 2);
                let a = u - k as f64;
                fields[k]
                    .iter()
                    .zip(&fields[k + 1])
                    .map(|(&lo, &hi)| (1.0 - a) * lo + a * hi)
                    .collect()
            }
        }
    }

    pub fn target_at(&self, port: usize, t: f64) -> f64 {
        match self {
            NodeSeries::Basis { targets, .. } | NodeSeries::Sampled { targets, .. } => {
                targets[port].eval(t)
            }
        }
    }

    pub fn target_deriv_at(&self, port: usize, t: f64) -> f64 {
        match self {
            NodeSeries::Basis { targets, .. } | NodeSeries::Sampled { targets, .. } => {
                targets[port].deriv(t)
            }
        }
    }
}

/// Multilinear interpolation of a cell field at an arbitrary unit-scale
/// point, with constant extrapolation toward inactive neighbors.
pub fn interp_field(mesh: &JunctionMesh, field: &[f64], xi: &[f64]) -> f64 {
    let dim = mesh.dim();
    let dx = mesh.spacing;
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let u = xi[a] / dx - 0.5;
        base[a] = u.floor() as i64;
        frac[a] = u - u.floor();
    }
    // Gather the 2^dim corners, falling back to the nearest active cell.
    let nearest = {
        let mut c = [0i64; 3];
        for a in 0..dim {
            c[a] = (xi[a] / dx - 0.5).round() as i64;
        }
        mesh.cell_index(&c)
    };
    let mut acc = 0.0;
    let mut wsum = 0.0;
    let corners = 1usize << dim;
    for corner in 0..corners {
        let mut c = base;
        let mut w = 1.0;
        for a in 0..dim {
            if corner & (1 << a) != 0 {
                c[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w == 0.0 {
            continue;
        }
        let idx = mesh.cell_index(&c).or(nearest);
        if let Some(idx) = idx {
            acc += w * field[idx];
            wsum += w;
        }
    }
    if wsum > 0.0 {
        acc / wsum
    } else {
        nearest.map_or(0.0, |i| field[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction::NodeGeometry;
    use crate::network::{presets, Network};

    fn channel_parts(spacing: f64, l_trunc: f64) -> (Network, JunctionMesh) {
        let net = presets::two_edge_channel(-1.0, 1.0);
        let geo = NodeGeometry::from_network(&net, 0).unwrap();
        let mesh = JunctionMesh::build(geo, spacing, l_trunc).unwrap();
        (net, mesh)
    }

    #[test]
    fn potential_linear_in_straight_channel() {
        let (_, mesh) = channel_parts(1.0 / 16.0, 2.0);
        // Ports: edge0 toward −x (𝚟 = −1), edge1 toward +x (𝚟 = +1).
        let p = solve_potential(&mesh, &[-1.0, 1.0], 1e-8).unwrap();
        // ∇p must be the constant (1, 0): exact for linear fields.
        let mut worst = 0.0_f64;
        for ci in mesh.node_cells() {
            let g = p.gradient(&mesh, ci);
            worst = worst.max((g[0] - 1.0).abs()).max(g[1].abs());
        }
        assert!(worst < 1e-8, "gradient deviation {worst}");
        assert!(p.max_divergence(&mesh) < 1e-9);
    }

    #[test]
    fn potential_zero_fluxes_zero_field() {
        let (_, mesh) = channel_parts(1.0 / 16.0, 2.0);
        let p = solve_potential(&mesh, &[0.0, 0.0], 1e-8).unwrap();
        assert!(p.values.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn potential_incompatible_fluxes_rejected() {
        let (_, mesh) = channel_parts(1.0 / 16.0, 2.0);
        let r = solve_potential(&mesh, &[-1.0, 1.5], 1e-8);
        assert!(matches!(r, Err(Error::Incompatible { .. })));
    }

    #[test]
    fn t_junction_discrete_divergence() {
        let net = presets::star(2, 1, false);
        let geo = NodeGeometry::from_network(&net, 0).unwrap();
        let mesh = JunctionMesh::build(geo, 1.0 / 16.0, 1.5).unwrap();
        // Two inlets at −1, one outlet at +2.
        let p = solve_potential(&mesh, &[-1.0, -1.0, 2.0], 1e-8).unwrap();
        assert!(p.max_divergence(&mesh) < 1e-9, "div = {}", p.max_divergence(&mesh));
    }

    #[test]
    fn node_layer_constant_targets_constant_field() {
        let (net, mesh) = channel_parts(1.0 / 16.0, 2.0);
        let p = solve_potential(&mesh, &[-1.0, 1.0], 1e-8).unwrap();
        let w: Vec<f64> = mesh.geo.ports.iter().map(|pt| net.weight(&net.edges[pt.edge])).collect();
        let sol = solve_node_layer(&mesh, &p, &[0.7, 0.7], &w).unwrap();
        for &v in &sol.values {
            assert!((v - 0.7).abs() < 1e-10, "v = {v}");
        }
    }

    #[test]
    fn node_layer_zero_targets_zero_field() {
        let (net, mesh) = channel_parts(1.0 / 16.0, 2.0);
        let p = solve_potential(&mesh, &[-1.0, 1.0], 1e-8).unwrap();
        let w: Vec<f64> = mesh.geo.ports.iter().map(|pt| net.weight(&net.edges[pt.edge])).collect();
        let sol = solve_node_layer(&mesh, &p, &[0.0, 0.0], &w).unwrap();
        assert!(sol.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn node_layer_channel_decay_rate() {
        // Straight channel, targets (0, 1), speed 1 along +x: the deviation
        // from the upstream target decays at the 1D rate β = |𝚟| = 1.
        let (net, mesh) = channel_parts(1.0 / 24.0, 6.0);
        let p = solve_potential(&mesh, &[-1.0, 1.0], 1e-8).unwrap();
        let w: Vec<f64> = mesh.geo.ports.iter().map(|pt| net.weight(&net.edges[pt.edge])).collect();
        // Port 0 is the upstream stub (flow enters from it): target 0 there.
        let sol = solve_node_layer(&mesh, &p, &[0.0, 1.0], &w).unwrap();
        // Upstream stub sees the boundary layer.
        let beta = sol.decay[0].beta.expect("decay fit");
        assert!((beta - 1.0).abs() < 0.1, "beta = {beta}");
        // Discrete maximum principle.
        for &v in &sol.values {
            assert!((-1e-12..=1.0 + 1e-12).contains(&v), "v = {v}");
        }
    }

    #[test]
    fn interp_field_reproduces_linear() {
        let (_, mesh) = channel_parts(1.0 / 16.0, 2.0);
        let field: Vec<f64> = (0..mesh.n_cells())
            .map(|ci| {
                let c = mesh.center(ci);
                2.0 * c[0] - 0.5 * c[1]
            })
            .collect();
        for xi in [[0.0, 0.0, 0.0], [0.5, 0.05, 0.0], [-1.2, -0.03, 0.0]] {
            let got = interp_field(&mesh, &field, &xi);
            let want = 2.0 * xi[0] - 0.5 * xi[1];
            assert!((got - want).abs() < 1e-12, "xi = {xi:?}");
        }
    }
}
