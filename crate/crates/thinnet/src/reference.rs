//! Direct solver for the ε-dependent transport problem on the 2D thin
//! geometry, plus the error functionals and the convergence-order harness
//! that compare it against the composite approximation.
//!
//! The mesh is a single Cartesian lattice of spacing δx = 2εh_min/ρ covering
//! the axis-aligned strips (width 2εh) and the node boxes ε·Ξ⁽⁰⁾; every
//! geometric feature must land on a grid line, so the mesh is boundary
//! fitted. Time stepping is implicit Euler with first-order upwind
//! convection (unconditionally stable, discrete maximum principle); the
//! semilinear wall flux ε^α φ is resolved by Picard sub-iterations per step.

use std::collections::HashMap;

use serde::Serialize;

use crate::assemble::{
    assemble_alpha, assemble_zero_order, build_layers, build_node_assemblies, Approximation,
    NodeBuildParams,
};
use crate::error::Error;
use crate::graph_limit::{
    solve_cascade_alpha_gt1, solve_limit_alpha1, GraphGridSpec,
};
use crate::grid::linear_fit;
use crate::junction::{JunctionMesh, NodeGeometry, PotentialField};
use crate::network::{DimensionMode, EdgeEnd, Network, VertexKind};
use crate::sparse::{bicgstab_ilu, CsrBuilder, Ilu0};
use crate::Result;

// ---------------------------------------------------------------------------
// thin mesh
// ---------------------------------------------------------------------------

/// Region of a physical mesh cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRegion {
    /// Node box of a vertex (by vertex index).
    Node(usize),
    /// Strip of an edge (by edge index).
    Strip(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BFaceKind {
    /// Outer Dirichlet cap of an edge.
    Cap(usize),
    /// Lateral strip wall of an edge; `side` = ±1 along the transverse axis.
    Wall { edge: usize, side: i32 },
    /// Node box wall of a vertex.
    NodeWall(usize),
}

#[derive(Debug, Clone, Copy)]
struct BFace {
    cell: usize,
    axis: usize,
    dir: i32,
    kind: BFaceKind,
}

/// Boundary-fitted Cartesian mesh of the thin 2D network at a fixed ε.
pub struct ThinMesh {
    pub eps: f64,
    pub spacing: f64,
    pub coords: Vec<[i64; 2]>,
    pub region: Vec<CellRegion>,
    index: HashMap<[i64; 2], usize>,
    boundary: Vec<BFace>,
    /// Unit junction meshes and cell offsets per interior vertex.
    junctions: HashMap<usize, (JunctionMesh, [i64; 2])>,
    /// Ported axes (clearance info for node nonlinearities) per vertex.
    ported: HashMap<usize, Vec<(usize, f64)>>,
}

fn snap(value: f64, spacing: f64, what: &str) -> Result<i64> {
    let q = value / spacing;
    let r = q.round();
    if (q - r).abs() > 1e-9 * q.abs().max(1.0) {
        return Err(Error::Geometry(format!(
            "{what} = {value} does not sit on the mesh lattice (spacing {spacing})"
        )));
    }
    Ok(r as i64)
}

impl ThinMesh {
    /// Builds the mesh with `rho` cells across the narrowest strip.
    pub fn build(net: &Network, eps: f64, rho: usize) -> Result<Self> {
        if net.dim != DimensionMode::Two {
            return Err(Error::Config(
                "the direct reference solver works on the 2D analogue geometry".into(),
            ));
        }
        if rho < 8 {
            return Err(Error::Config(format!("resolution factor rho = {rho} below 8")));
        }
        let h_min = net.edges.iter().map(|e| e.radius).fold(f64::INFINITY, f64::min);
        // Unit-scale spacing g with 2h/g = rho for the narrowest strip.
        let g = 2.0 * h_min / rho as f64;
        let dx = eps * g;

        // Node boxes first.
        let mut index = HashMap::new();
        let mut coords: Vec<[i64; 2]> = Vec::new();
        let mut region = Vec::new();
        let mut junctions = HashMap::new();
        let mut ported = HashMap::new();
        for vi in net.interior_vertices() {
            let geo = NodeGeometry::from_network(net, vi)?;
            ported.insert(vi, geo.ported_axes());
            let pos = &net.vertices[vi].position;
            let cx = snap(pos[0], dx, "vertex position")?;
            let cy = snap(pos[1], dx, "vertex position")?;
            let bx = snap(geo.half_widths[0], g, "node half-width")?;
            let by = snap(geo.half_widths[1], g, "node half-width")?;
            for ix in -bx..bx {
                for iy in -by..by {
                    let c = [cx + ix, cy + iy];
                    if index.insert(c, coords.len()).is_none() {
                        coords.push(c);
                        region.push(CellRegion::Node(vi));
                    }
                }
            }
            // The unit junction mesh reuses the same relative spacing, so
            // its node faces coincide with physical faces exactly.
            let l_trunc_units = (3.0 * geo.ell0 / g).ceil() as i64 + 2;
            let l_trunc = l_trunc_units as f64 * g;
            let mesh = JunctionMesh::build(geo, g, l_trunc)?;
            junctions.insert(vi, (mesh, [cx, cy]));
        }

        // Strips.
        for (ei, e) in net.edges.iter().enumerate() {
            let (axis, sign) = net.edge_direction(ei)?;
            let fi = net
                .vertex_index(e.from)
                .ok_or_else(|| Error::Config(format!("edge {}: dangling from vertex", e.id)))?;
            let ti = net
                .vertex_index(e.to)
                .ok_or_else(|| Error::Config(format!("edge {}: dangling to vertex", e.id)))?;
            let from_hw = NodeGeometry::from_network(net, fi)?.half_widths[axis];
            let to_hw = if net.vertices[ti].kind == VertexKind::Interior {
                NodeGeometry::from_network(net, ti)?.half_widths[axis]
            } else {
                0.0
            };
            let pos = &net.vertices[fi].position;
            let base = [snap(pos[0], dx, "vertex position")?, snap(pos[1], dx, "vertex position")?];
            let s_lo = snap(eps * from_hw, dx, "strip start")?;
            let s_hi = snap(e.length - eps * to_hw, dx, "strip end")?;
            let hw = snap(eps * e.radius, dx, "strip half-width")?;
            let tr_axis = 1 - axis;
            for s in s_lo..s_hi {
                for w in -hw..hw {
                    let mut c = base;
                    c[axis] += if sign > 0.0 { s } else { -s - 1 };
                    c[tr_axis] += w;
                    if index.insert(c, coords.len()).is_none() {
                        coords.push(c);
                        region.push(CellRegion::Strip(ei));
                    } else {
                        return Err(Error::Geometry(format!(
                            "edge {} strip overlaps another region at {:?}",
                            e.id, c
                        )));
                    }
                }
            }
        }

        // Boundary faces.
        let mut boundary = Vec::new();
        for (ci, c) in coords.iter().enumerate() {
            for axis in 0..2 {
                for dir in [-1i32, 1i32] {
                    let mut nb = *c;
                    nb[axis] += dir as i64;
                    if index.contains_key(&nb) {
                        continue;
                    }
                    let kind = match region[ci] {
                        CellRegion::Node(vi) => BFaceKind::NodeWall(vi),
                        CellRegion::Strip(ei) => {
                            let (eaxis, _) = net.edge_direction(ei)?;
                            if axis == eaxis {
                                BFaceKind::Cap(ei)
                            } else {
                                BFaceKind::Wall { edge: ei, side: dir }
                            }
                        }
                    };
                    boundary.push(BFace { cell: ci, axis, dir, kind });
                }
            }
        }

        Ok(ThinMesh { eps, spacing: dx, coords, region, index, boundary, junctions, ported })
    }

    pub fn n_cells(&self) -> usize {
        self.coords.len()
    }

    /// Physical center of a cell.
    pub fn center(&self, ci: usize) -> [f64; 2] {
        let c = self.coords[ci];
        [(c[0] as f64 + 0.5) * self.spacing, (c[1] as f64 + 0.5) * self.spacing]
    }

    pub fn cell_at(&self, c: &[i64; 2]) -> Option<usize> {
        self.index.get(c).copied()
    }

    fn neighbor(&self, ci: usize, axis: usize, dir: i32) -> Option<usize> {
        let mut nb = self.coords[ci];
        nb[axis] += dir as i64;
        self.index.get(&nb).copied()
    }

    /// Longitudinal edge coordinate of a physical point on an edge strip.
    fn edge_y1(&self, net: &Network, ei: usize, x: &[f64; 2]) -> f64 {
        let (axis, sign) = net.edge_direction(ei).expect("validated edge");
        let fi = net.vertex_index(net.edges[ei].from).expect("validated edge");
        sign * (x[axis] - net.vertices[fi].position[axis])
    }
}

// ---------------------------------------------------------------------------
// direct solve
// ---------------------------------------------------------------------------

/// Direct solution on the thin mesh: one value row per time level.
pub struct FullSolution {
    pub mesh: ThinMesh,
    pub nt: usize,
    pub horizon: f64,
    /// Flattened per step, then per cell.
    pub values: Vec<f64>,
    /// Total mass per step.
    pub mass: Vec<f64>,
    /// Max relative conservation residual over steps.
    pub mass_audit: f64,
    pub min_value: f64,
    pub max_value: f64,
}

impl FullSolution {
    pub fn value(&self, step: usize, cell: usize) -> f64 {
        self.values[step * self.mesh.n_cells() + cell]
    }

    pub fn step_values(&self, step: usize) -> &[f64] {
        let n = self.mesh.n_cells();
        &self.values[step * n..(step + 1) * n]
    }

    pub fn time(&self, step: usize) -> f64 {
        self.horizon * step as f64 / self.nt as f64
    }
}

struct FaceVelocities<'a> {
    net: &'a Network,
    mesh: &'a ThinMesh,
    potentials: HashMap<usize, PotentialField>,
    t: f64,
}

impl FaceVelocities<'_> {
    /// Normal velocity (along +axis) through the face (cell, axis, dir).
    fn face(&self, ci: usize, axis: usize, dir: i32) -> f64 {
        let mesh = self.mesh;
        let net = self.net;
        match mesh.region[ci] {
            CellRegion::Node(vi) => {
                let (jm, offset) = &mesh.junctions[&vi];
                let c = mesh.coords[ci];
                let unit = [c[0] - offset[0], c[1] - offset[1], 0];
                match jm.cell_index(&unit) {
                    Some(uc) => self.potentials[&vi].face_velocity(jm, uc, axis, dir),
                    None => 0.0,
                }
            }
            CellRegion::Strip(ei) => {
                let e = &net.edges[ei];
                let (eaxis, sign) = net.edge_direction(ei).expect("validated edge");
                let x = mesh.center(ci);
                if axis == eaxis {
                    let mut xf = x;
                    xf[axis] += 0.5 * dir as f64 * mesh.spacing;
                    let y1 = mesh.edge_y1(net, ei, &xf);
                    sign * e.velocity().v1(y1.clamp(0.0, e.length), self.t)
                } else {
                    match &e.velocity().vbar {
                        None => 0.0,
                        Some(vb) => {
                            let y1 = mesh.edge_y1(net, ei, &x);
                            let fi = net.vertex_index(e.from).unwrap();
                            let mut off = x[axis] - net.vertices[fi].position[axis];
                            off += 0.5 * dir as f64 * mesh.spacing;
                            let xi = off / mesh.eps;
                            mesh.eps * vb.value_2d(y1, xi, self.t)
                        }
                    }
                }
            }
        }
    }
}

fn node_potentials(
    net: &Network,
    mesh: &ThinMesh,
    t: f64,
) -> Result<HashMap<usize, PotentialField>> {
    let mut out = HashMap::new();
    for (&vi, (jm, _)) in &mesh.junctions {
        let fluxes: Vec<f64> = jm
            .geo
            .ports
            .iter()
            .map(|p| match p.end {
                EdgeEnd::FromEnd => net.edges[p.edge].velocity().near_from(t),
                EdgeEnd::ToEnd => -net.edges[p.edge].velocity().near_to(t),
            })
            .collect();
        out.insert(vi, crate::junction::solve_potential(jm, &fluxes, 1e-8)?);
    }
    Ok(out)
}

/// Adds the wall-flux contributions −ε^α φ(u)·δx to the RHS.
fn add_wall_fluxes(
    net: &Network,
    mesh: &ThinMesh,
    u: &[f64],
    t: f64,
    alpha_scale: f64,
    dx: f64,
    b: &mut [f64],
) {
    for f in &mesh.boundary {
        match f.kind {
            BFaceKind::Wall { edge, side } => {
                if let Some(phi) = &net.edges[edge].phi {
                    let x = mesh.center(f.cell);
                    let y1 = mesh.edge_y1(net, edge, &x);
                    let theta = side as f64;
                    let val = phi.eval(net.dim, u[f.cell], y1, theta, t);
                    b[f.cell] -= alpha_scale * val * dx;
                }
            }
            BFaceKind::NodeWall(vi) => {
                let vid = net.vertices[vi].id;
                if let Some(phi) = net.node_phi.get(&vid) {
                    let x = mesh.center(f.cell);
                    let pos = &net.vertices[vi].position;
                    let mut xi =
                        [(x[0] - pos[0]) / mesh.eps, (x[1] - pos[1]) / mesh.eps];
                    xi[f.axis] += 0.5 * f.dir as f64 * mesh.spacing / mesh.eps;
                    let val = phi.eval(u[f.cell], &xi, &mesh.ported[&vi], t);
                    b[f.cell] -= alpha_scale * val * dx;
                }
            }
            BFaceKind::Cap(_) => {}
        }
    }
}

/// Implicit-Euler upwind solve of the full ε-dependent problem.
///
/// Wall fluxes carry the semilinear term ε^α φ resolved by Picard
/// sub-iterations (tolerance 1e-10, at most 30 per step); outer caps are
/// Dirichlet q_i(t). Aborts on nonphysical blow-up (|u| > 1e6).
pub fn solve_full(net: &Network, eps: f64, rho: usize, nt: usize) -> Result<FullSolution> {
    let mesh = ThinMesh::build(net, eps, rho)?;
    let n = mesh.n_cells();
    let dt = net.horizon / nt as f64;
    let dx = mesh.spacing;
    let vol = dx * dx;
    let diff = eps; // ε · face/dist = ε in 2D
    let alpha_scale = eps.powf(net.alpha);
    let has_phi = net.edges.iter().any(|e| e.phi.is_some()) || !net.node_phi.is_empty();

    let velocities_constant = net
        .edges
        .iter()
        .all(|e| e.velocity.as_ref().map_or(true, |v| v.is_time_constant()));

    let mut u = vec![0.0; n];
    let mut all = Vec::with_capacity((nt + 1) * n);
    all.extend_from_slice(&u);
    let mut mass = Vec::with_capacity(nt + 1);
    mass.push(0.0);
    let mut audit: f64 = 0.0;
    let mut vmin: f64 = 0.0;
    let mut vmax: f64 = 0.0;

    let mut cached: Option<(crate::sparse::Csr, Ilu0, FaceVelocities)> = None;

    for step in 1..=nt {
        let t1 = dt * step as f64;
        // Row normalization: the system is assembled as
        // (I + (Δt/vol)·Flux) u = rhs, keeping residual tolerances on the
        // scale of u itself.
        let cf = dt / vol;
        if cached.is_none() || !velocities_constant {
            let fv = FaceVelocities {
                net,
                mesh: &mesh,
                potentials: node_potentials(net, &mesh, t1)?,
                t: t1,
            };
            let mut bld = CsrBuilder::new(n);
            for ci in 0..n {
                bld.add(ci, ci, 1.0);
                for axis in 0..2 {
                    for dir in [-1, 1] {
                        if let Some(nb) = mesh.neighbor(ci, axis, dir) {
                            let vf = fv.face(ci, axis, dir);
                            let v_out = if dir > 0 { vf } else { -vf };
                            bld.add(ci, ci, cf * diff);
                            bld.add(ci, nb, -cf * diff);
                            if v_out >= 0.0 {
                                bld.add(ci, ci, cf * v_out * dx);
                            } else {
                                bld.add(ci, nb, cf * v_out * dx);
                            }
                        }
                    }
                }
            }
            for f in &mesh.boundary {
                if let BFaceKind::Cap(_) = f.kind {
                    bld.add(f.cell, f.cell, cf * 2.0 * diff);
                    let vf = fv.face(f.cell, f.axis, f.dir);
                    let v_out = if f.dir > 0 { vf } else { -vf };
                    if v_out >= 0.0 {
                        bld.add(f.cell, f.cell, cf * v_out * dx);
                    }
                }
            }
            let a = bld.build();
            let ilu = Ilu0::factor_modified(&a)?;
            cached = Some((a, ilu, fv));
        } else if let Some((_, _, fv)) = &mut cached {
            fv.t = t1;
        }
        let (a, ilu, fv) = cached.as_ref().unwrap();

        // RHS pieces independent of the Picard iterate.
        let mut b_fixed = u.clone();
        for f in &mesh.boundary {
            if let BFaceKind::Cap(ei) = f.kind {
                let q = net.edges[ei].q(t1);
                b_fixed[f.cell] += cf * 2.0 * diff * q;
                let vf = fv.face(f.cell, f.axis, f.dir);
                let v_out = if f.dir > 0 { vf } else { -vf };
                if v_out < 0.0 {
                    b_fixed[f.cell] -= cf * v_out * dx * q;
                }
            }
        }

        // Picard sub-iterations on the semilinear wall flux.
        let mut iterate = u.clone();
        let mut converged = false;
        let max_sub = if has_phi && alpha_scale > 0.0 { 30 } else { 1 };
        for _sub in 0..max_sub {
            let mut b = b_fixed.clone();
            if has_phi {
                add_wall_fluxes(net, &mesh, &iterate, t1, cf * alpha_scale, dx, &mut b);
            }
            let next = bicgstab_ilu(a, ilu, &b, Some(&iterate), 1e-11, 4000)?;
            let diff_sup = next
                .iter()
                .zip(&iterate)
                .fold(0.0_f64, |m, (&x, &y)| m.max((x - y).abs()));
            let scale = next.iter().fold(1.0_f64, |m, &x| m.max(x.abs()));
            iterate = next;
            if diff_sup <= 1e-10 * scale || max_sub == 1 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::IterationFailure { residual: f64::NAN, iterations: 30 });
        }
        u = iterate;

        // Conservation audit: Δmass/Δt + boundary outward fluxes ≈ 0.
        let m: f64 = u.iter().sum::<f64>() * vol;
        let mut boundary_flux = 0.0;
        for f in &mesh.boundary {
            if let BFaceKind::Cap(ei) = f.kind {
                let q = net.edges[ei].q(t1);
                let vf = fv.face(f.cell, f.axis, f.dir);
                let v_out = if f.dir > 0 { vf } else { -vf };
                let adv = if v_out >= 0.0 { v_out * u[f.cell] } else { v_out * q };
                let dif = 2.0 * diff * (u[f.cell] - q);
                boundary_flux += adv * dx + dif;
            }
        }
        if has_phi {
            let mut phi_b = vec![0.0; n];
            add_wall_fluxes(net, &mesh, &u, t1, alpha_scale, dx, &mut phi_b);
            boundary_flux -= phi_b.iter().sum::<f64>();
        }
        let residual = (m - mass[step - 1]) / dt + boundary_flux;
        let scale = u
            .iter()
            .fold(1e-300_f64, |mm, &x| mm.max(x.abs()))
            * vol
            * n as f64
            / dt;
        audit = audit.max(residual.abs() / scale);
        mass.push(m);
        for &x in &u {
            vmin = vmin.min(x);
            vmax = vmax.max(x);
            if x.abs() > 1e6 {
                return Err(Error::Numerical(format!(
                    "nonphysical blow-up: |u| = {} at step {step}",
                    x.abs()
                )));
            }
        }
        all.extend_from_slice(&u);
    }

    Ok(FullSolution {
        mesh,
        nt,
        horizon: net.horizon,
        values: all,
        mass,
        mass_audit: audit,
        min_value: vmin,
        max_value: vmax,
    })
}

// ---------------------------------------------------------------------------
// error functionals
// ---------------------------------------------------------------------------

/// max over mesh cells and time steps of |𝔄(x, t) − u_ε(x, t)|.
pub fn error_max(full: &FullSolution, approx: &Approximation) -> Result<f64> {
    if (full.mesh.eps - approx.eps).abs() > 1e-14 {
        return Err(Error::Consistency(format!(
            "eps mismatch: direct {} vs approximation {}",
            full.mesh.eps, approx.eps
        )));
    }
    let n = full.mesh.n_cells();
    let mut worst = 0.0_f64;
    for step in 0..=full.nt {
        let t = full.time(step);
        let frozen = approx.freeze(t);
        let row = full.step_values(step);
        for ci in 0..n {
            let x = full.mesh.center(ci);
            let a = frozen.evaluate_physical(&x)?;
            worst = worst.max((a - row[ci]).abs());
        }
    }
    Ok(worst)
}

/// |Ω_ε|^{−1/2} ‖∇𝔄 − ∇u_ε‖_{L²(Ω_ε × (0,T))} with centered (face)
/// differences of both fields; the rescaling by the domain measure keeps
/// the functional comparable across ε.
pub fn error_grad_l2(full: &FullSolution, approx: &Approximation) -> Result<f64> {
    if (full.mesh.eps - approx.eps).abs() > 1e-14 {
        return Err(Error::Consistency("eps mismatch".into()));
    }
    let mesh = &full.mesh;
    let n = mesh.n_cells();
    let dx = mesh.spacing;
    let vol = dx * dx;
    let domain_measure = vol * n as f64;
    let dt = full.horizon / full.nt as f64;

    let mut total = 0.0;
    let mut a_vals = vec![0.0; n];
    for step in 0..=full.nt {
        let t = full.time(step);
        let frozen = approx.freeze(t);
        for (ci, slot) in a_vals.iter_mut().enumerate() {
            *slot = frozen.evaluate_physical(&mesh.center(ci))?;
        }
        let row = full.step_values(step);
        let mut step_sum = 0.0;
        for ci in 0..n {
            for axis in 0..2 {
                if let Some(nb) = mesh.neighbor(ci, axis, 1) {
                    let gu = (row[nb] - row[ci]) / dx;
                    let ga = (a_vals[nb] - a_vals[ci]) / dx;
                    step_sum += (ga - gu) * (ga - gu) * vol;
                }
            }
        }
        let w = if step == 0 || step == full.nt { 0.5 } else { 1.0 };
        total += w * step_sum * dt;
    }
    Ok((total / domain_measure).sqrt())
}

// ---------------------------------------------------------------------------
// pipeline orchestration and the convergence study
// ---------------------------------------------------------------------------

/// Parameters of one verification run.
#[derive(Debug, Clone)]
pub struct StudyParams {
    /// Cells across the narrowest strip.
    pub rho: usize,
    /// Implicit time steps (ε-independent).
    pub nt_full: usize,
    pub gamma: f64,
    pub grid: GraphGridSpec,
    pub node: NodeBuildParams,
    /// Also compute the rescaled gradient error.
    pub with_gradient: bool,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            rho: 16,
            nt_full: 400,
            gamma: 0.9,
            grid: GraphGridSpec::default(),
            node: NodeBuildParams::default(),
            with_gradient: true,
        }
    }
}

/// Builds the composite approximation for the network's α regime: the
/// semilinear limit at α = 1, the two-level cascade for α ∈ (1, 2), and the
/// nonlinearity-free zero order for α ≥ 2.
pub fn build_approximation(net: &Network, eps: f64, params: &StudyParams) -> Result<Approximation> {
    if net.alpha == 1.0 {
        let w0 = solve_limit_alpha1(net, &params.grid)?;
        let nodes = build_node_assemblies(net, &w0, None, &params.node)?;
        let layers = build_layers(net, &w0, None, None, None)?;
        assemble_zero_order(net, w0, nodes, layers, eps, params.gamma)
    } else if net.alpha < 2.0 {
        let cas = solve_cascade_alpha_gt1(net, &params.grid)?;
        let nodes =
            build_node_assemblies(net, &cas.w0, Some(&cas.w_alpha_minus_1), &params.node)?;
        let layers = build_layers(net, &cas.w0, None, Some(&cas.w_alpha_minus_1), None)?;
        assemble_alpha(net, cas.w0, cas.w_alpha_minus_1, nodes, layers, eps, params.gamma)
    } else {
        // α ≥ 2: the same approximating function with the nonlinearity
        // dropped from every coefficient problem.
        let mut phi_free = net.clone();
        for e in &mut phi_free.edges {
            e.phi = None;
        }
        phi_free.node_phi = HashMap::new();
        phi_free.alpha = 1.0;
        let w0 = solve_limit_alpha1(&phi_free, &params.grid)?;
        let nodes = build_node_assemblies(&phi_free, &w0, None, &params.node)?;
        let layers = build_layers(&phi_free, &w0, None, None, None)?;
        assemble_zero_order(&phi_free, w0, nodes, layers, eps, params.gamma)
    }
}

/// Study output: per-ε errors, fitted orders, pass flag.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub errors_max: Vec<Option<f64>>,
    pub errors_grad: Vec<Option<f64>>,
    pub fitted_order: Option<f64>,
    pub fitted_order_grad: Option<f64>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,error_max,error_grad\n");
        for (k, &e) in self.epsilons.iter().enumerate() {
            let em = self.errors_max[k].map_or(String::from("nan"), crate::io::fmt_g17);
            let eg = self.errors_grad[k].map_or(String::from("nan"), crate::io::fmt_g17);
            out.push_str(&format!("{},{},{}\n", crate::io::fmt_g17(e), em, eg));
        }
        out
    }

    /// gnuplot-compatible whitespace table.
    pub fn to_plot_data(&self) -> String {
        let mut out = String::from("# eps error_max error_grad\n");
        for (k, &e) in self.epsilons.iter().enumerate() {
            let em = self.errors_max[k].unwrap_or(f64::NAN);
            let eg = self.errors_grad[k].unwrap_or(f64::NAN);
            out.push_str(&format!("{e:.6e} {em:.6e} {eg:.6e}\n"));
        }
        out
    }
}

/// Least-squares order p of err ≈ C ε^p over the successful entries.
fn fit_order(eps: &[f64], errs: &[Option<f64>]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&e, err) in eps.iter().zip(errs) {
        if let Some(v) = err {
            if *v > 0.0 {
                xs.push(e.ln());
                ys.push(v.ln());
            }
        }
    }
    if xs.len() < 2 {
        return None;
    }
    Some(linear_fit(&xs, &ys).0)
}

/// Runs the full pipeline (limit solve → node fields → layers → assemble →
/// direct solve → error norms) for each ε and fits the convergence order.
/// Pass requires strictly decreasing max errors and fitted order ≥ 0.6;
/// per-ε failures are recorded and the report still emitted.
pub fn convergence_study(
    net: &Network,
    epsilons: &[f64],
    params: &StudyParams,
) -> Result<ConvergenceReport> {
    if epsilons.len() < 3 {
        return Err(Error::Config("a convergence study needs at least 3 epsilons".into()));
    }
    for w in epsilons.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::Config("epsilons must be strictly decreasing".into()));
        }
    }

    let mut errors_max = Vec::new();
    let mut errors_grad = Vec::new();
    let mut notes = Vec::new();
    for &eps in epsilons {
        let run = (|| -> Result<(f64, Option<f64>)> {
            let approx = build_approximation(net, eps, params)?;
            let full = solve_full(net, eps, params.rho, params.nt_full)?;
            let emax = error_max(&full, &approx)?;
            let egrad =
                if params.with_gradient { Some(error_grad_l2(&full, &approx)?) } else { None };
            Ok((emax, egrad))
        })();
        match run {
            Ok((emax, egrad)) => {
                errors_max.push(Some(emax));
                errors_grad.push(egrad);
            }
            Err(e) => {
                errors_max.push(None);
                errors_grad.push(None);
                notes.push(format!("eps = {eps}: {e}"));
            }
        }
    }

    let fitted_order = fit_order(epsilons, &errors_max);
    let fitted_order_grad = fit_order(epsilons, &errors_grad);
    let all_ok = errors_max.iter().all(|e| e.is_some());
    let decreasing = errors_max.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => b < a,
        _ => false,
    });
    let pass = all_ok && decreasing && fitted_order.map_or(false, |p| p >= 0.6);

    Ok(ConvergenceReport {
        epsilons: epsilons.to_vec(),
        errors_max,
        errors_grad,
        fitted_order,
        fitted_order_grad,
        pass,
        notes,
    })
}
