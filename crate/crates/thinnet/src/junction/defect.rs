//! Solvability quadratures on the junction: the integral identity that
//! decides solvability of the exterior problem, and the flux-defect
//! coefficients d₁ / d_α entering the corrector-level Kirchhoff sums.

use super::elliptic::NodeSeries;
use super::mesh::{FaceKind, JunctionMesh, Region};
use crate::cutoff::NodeCutoff;
use crate::network::{DimensionMode, NodePhi};

/// Mesh quadrature of ∫_node F⁰ + Σ_p ∫_cyl F⁽ᵖ⁾ − ∫_Γ₀ Ψ⁰.
///
/// Callers treat |defect| ≤ tol as solvable. `f0` takes the unit-scale cell
/// center, `f_cyl` the port index and axial coordinate, `psi0` the face
/// center on the node wall.
pub fn appendix_solvability_defect(
    mesh: &JunctionMesh,
    f0: impl Fn(&[f64; 3]) -> f64,
    f_cyl: impl Fn(usize, f64) -> f64,
    psi0: impl Fn(&[f64; 3]) -> f64,
) -> f64 {
    let vol = mesh.cell_volume();
    let area = mesh.face_area();
    let mut acc = 0.0;
    for ci in 0..mesh.n_cells() {
        match mesh.region[ci] {
            Region::Node => acc += f0(&mesh.center(ci)) * vol,
            Region::Cylinder(pi) => acc += f_cyl(pi, mesh.axial_coord(ci, pi)) * vol,
        }
    }
    for f in &mesh.boundary {
        if f.kind == FaceKind::NodeWall {
            let mut c = mesh.center(f.cell);
            c[f.axis] += 0.5 * f.dir as f64 * mesh.spacing;
            acc -= psi0(&c) * area;
        }
    }
    acc
}

/// Inputs of one flux-defect evaluation.
pub struct FluxDefectInputs<'a> {
    pub mesh: &'a JunctionMesh,
    pub dim: DimensionMode,
    /// Field whose time derivative enters (N₀ for d₁, N_{α−1} for d_α).
    pub n_prev: &'a NodeSeries,
    /// Field feeding the node nonlinearity (always N₀).
    pub n_for_phi: &'a NodeSeries,
    pub node_phi: Option<&'a NodePhi>,
    /// ∂_{y₁} w_prev(0, t) per port, sampled on `times`.
    pub dw_prev_at_vertex: &'a [Vec<f64>],
    /// Near-vertex speeds 𝚟_p(t) per port, sampled on `times`.
    pub speeds: &'a [Vec<f64>],
    /// Port half-widths h_p.
    pub radii: &'a [f64],
    pub times: &'a [f64],
}

/// d(t) on the sample times:
///
/// d(t) = −(1/κ)[ ∮_{Γ₀} φ⁰(N₀, ξ, t) dσ + ∫_node ∂ₜN_prev
///                + Σ_p ∫_cyl ∂ₜÑ_prev ]
///        + Σ_p ω_p ∂_{y₁}w_prev(0,t) (1 − 𝚟_p(t) ∫ ξ χ′(ξ) dξ),
///
/// with κ = π, ω = h² in 3D mode and κ = 2, ω = h in 2D mode, and
/// Ñ_prev = N_prev − Σ_p w_prev(0,t) χ_{ℓ₀}(ξ₁) the decaying remainder.
pub fn compute_flux_defect_d(inp: &FluxDefectInputs) -> Vec<f64> {
    let mesh = inp.mesh;
    let kappa = match inp.dim {
        DimensionMode::Three => std::f64::consts::PI,
        DimensionMode::Two => 2.0,
    };
    let chi = NodeCutoff::new(mesh.geo.ell0);
    let i_chi = chi.first_moment(512);
    let vol = mesh.cell_volume();
    let area = mesh.face_area();
    let ported = mesh.geo.ported_axes();

    // Per-port ∫_cyl χ(ξ₁) dvol, for the decomposition correction.
    let chi_volumes: Vec<f64> = (0..mesh.geo.ports.len())
        .map(|pi| {
            mesh.cylinder_cells(pi)
                .iter()
                .map(|&ci| chi.eval(mesh.axial_coord(ci, pi)) * vol)
                .sum()
        })
        .collect();

    let nt = inp.times.len();
    let dt_probe = if nt >= 2 {
        (inp.times[nt - 1] - inp.times[0]) / (nt - 1) as f64
    } else {
        1.0
    };

    let mut out = Vec::with_capacity(nt);
    for (k, &t) in inp.times.iter().enumerate() {
        // Centered time difference of the previous-level field.
        let (t_lo, t_hi) = if k == 0 {
            (t, t + dt_probe)
        } else if k == nt - 1 {
            (t - dt_probe, t)
        } else {
            (t - dt_probe, t + dt_probe)
        };
        let f_lo = inp.n_prev.field_at(t_lo);
        let f_hi = inp.n_prev.field_at(t_hi);
        let inv_span = 1.0 / (t_hi - t_lo);

        let mut node_int = 0.0;
        let mut cyl_int = 0.0;
        for ci in 0..mesh.n_cells() {
            let dn_dt = (f_hi[ci] - f_lo[ci]) * inv_span;
            match mesh.region[ci] {
                Region::Node => node_int += dn_dt * vol,
                Region::Cylinder(_) => cyl_int += dn_dt * vol,
            }
        }
        // Remove the matched part: ∂ₜÑ = ∂ₜN − ẇ_prev(0,t)·χ(ξ₁) per stub.
        for (pi, &chivol) in chi_volumes.iter().enumerate() {
            let wdot = inp.n_prev.target_deriv_at(pi, t);
            cyl_int -= wdot * chivol;
        }

        // Node nonlinearity flux through Γ₀.
        let mut phi_int = 0.0;
        if let Some(phi) = inp.node_phi {
            let field = inp.n_for_phi.field_at(t);
            for f in &mesh.boundary {
                if f.kind == FaceKind::NodeWall {
                    let mut c = mesh.center(f.cell);
                    c[f.axis] += 0.5 * f.dir as f64 * mesh.spacing;
                    let xi = [c[0], c[1], c[2]];
                    phi_int += phi.eval(field[f.cell], &xi[..mesh.dim()], &ported, t) * area;
                }
            }
        }

        // Vertex-gradient terms.
        let mut grad_terms = 0.0;
        for (pi, h) in inp.radii.iter().enumerate() {
            let omega = inp.dim.weight(*h);
            let speed = inp.speeds[pi][k];
            grad_terms += omega * inp.dw_prev_at_vertex[pi][k] * (1.0 - speed * i_chi);
        }

        out.push(-(phi_int + node_int + cyl_int) / kappa + grad_terms);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Series;
    use crate::junction::{JunctionMesh, NodeGeometry};
    use crate::network::presets;

    fn channel_mesh() -> JunctionMesh {
        let net = presets::two_edge_channel(-1.0, 1.0);
        let geo = NodeGeometry::from_network(&net, 0).unwrap();
        JunctionMesh::build(geo, 1.0 / 16.0, 2.0).unwrap()
    }

    #[test]
    fn solvability_defect_balanced_data() {
        let mesh = channel_mesh();
        // Node volume: (2·0.25)·(2·0.25) = 0.25.
        let node_vol: f64 = mesh.node_cells().len() as f64 * mesh.cell_volume();
        assert!((node_vol - 0.25).abs() < 1e-12);
        // Γ₀ measure: 2 walls × 0.5 long.
        let gamma0: f64 = mesh
            .boundary
            .iter()
            .filter(|f| f.kind == FaceKind::NodeWall)
            .count() as f64
            * mesh.face_area();
        assert!((gamma0 - 1.0).abs() < 1e-12);
        // F⁰ ≡ 1, F⁽ᵖ⁾ ≡ 0, Ψ⁰ ≡ node_vol / |Γ₀| balances exactly.
        let d = appendix_solvability_defect(&mesh, |_| 1.0, |_, _| 0.0, |_| node_vol / gamma0);
        assert!(d.abs() < 1e-12, "d = {d}");
        // All zero → 0.
        let z = appendix_solvability_defect(&mesh, |_| 0.0, |_, _| 0.0, |_| 0.0);
        assert_eq!(z, 0.0);
        // F⁰ ≡ 1 alone → node volume.
        let v = appendix_solvability_defect(&mesh, |_| 1.0, |_, _| 0.0, |_| 0.0);
        assert!((v - node_vol).abs() < 1e-12);
    }

    #[test]
    fn solvability_defect_linear_in_arguments() {
        let mesh = channel_mesh();
        let f = |c: &[f64; 3]| 1.0 + c[0] - 2.0 * c[1];
        let g = |pi: usize, xi: f64| if pi == 0 { (-xi).exp() } else { 0.1 * xi };
        let p = |c: &[f64; 3]| c[0] * c[1];
        let base = appendix_solvability_defect(&mesh, f, g, p);
        let doubled = appendix_solvability_defect(
            &mesh,
            |c| 2.0 * f(c),
            |pi, xi| 2.0 * g(pi, xi),
            |c| 2.0 * p(c),
        );
        assert!((doubled - 2.0 * base).abs() < 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn flux_defect_static_field_reduces_to_gradient_terms() {
        let mesh = channel_mesh();
        let times: Vec<f64> = (0..9).map(|k| k as f64 * 0.25).collect();
        let constant_field = vec![0.4; mesh.n_cells()];
        let series = NodeSeries::Sampled {
            times: times.clone(),
            fields: vec![constant_field; times.len()],
            targets: vec![
                Series { t0: 0.0, dt: 0.25, values: vec![0.4; times.len()] },
                Series { t0: 0.0, dt: 0.25, values: vec![0.4; times.len()] },
            ],
        };
        let g = 0.7;
        let dw = vec![vec![g; times.len()], vec![0.0; times.len()]];
        let speeds = vec![vec![-1.0; times.len()], vec![1.0; times.len()]];
        let inp = FluxDefectInputs {
            mesh: &mesh,
            dim: DimensionMode::Two,
            n_prev: &series,
            n_for_phi: &series,
            node_phi: None,
            dw_prev_at_vertex: &dw,
            speeds: &speeds,
            radii: &[0.25, 0.25],
            times: &times,
        };
        let d = compute_flux_defect_d(&inp);
        // d(t) = ω g (1 − 𝚟 I_χ) with ω = h = 0.25, 𝚟 = −1, I_χ = 2.5 ℓ₀.
        let i_chi = NodeCutoff::new(0.25).first_moment(512);
        assert!(i_chi > 0.5 && i_chi < 0.75);
        let expected = 0.25 * g * (1.0 + i_chi);
        for &val in &d {
            assert!((val - expected).abs() < 1e-10, "val = {val}, expected = {expected}");
        }
    }
}
