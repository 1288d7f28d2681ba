//! Couples the per-edge solvers through vertex conditions: the hyperbolic
//! limit problem with its three closure branches, the first corrector level
//! w₁ (sourced by the cell correctors and the node flux defect), and the
//! weak-interaction cascade for boundary exponents α > 1.
//!
//! All edges of a network share the time grid; vertex traces are exchanged
//! on it without sub-step interpolation. Multi-node networks are solved in
//! flow-topological order, so every edge is solved exactly once: either at
//! the vertex it feeds from outside (inlet with outer data) or as an outlet
//! of its upstream vertex.

use std::collections::HashMap;

use crate::cell::{corrector_source_f, solve_cell_u1, CellInputs};
use crate::characteristics::{solve_edge_moc, EdgeGrid, EdgeSolution};
use crate::error::Error;
use crate::grid::{first_derivative_left_5pt, second_derivative_5pt, Grid2};
use crate::network::{
    DimensionMode, EdgeEnd, EdgePhi, Incidence, Network, OutletSplit,
};
use crate::Result;

/// Which expansion coefficient a [`GraphSolution`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    W0,
    W1,
    WAlphaMinus1,
    W2AlphaMinus2,
}

/// Grid sizes shared by every edge of a graph solve.
#[derive(Debug, Clone, Copy)]
pub struct GraphGridSpec {
    /// Space intervals per unit edge length (scaled by each ℓᵢ, min 16).
    pub nx_per_length: usize,
    /// Shared time intervals.
    pub nt: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GraphGridSpec {
    fn default() -> Self {
        Self { nx_per_length: 256, nt: 400, tol: 1e-10, max_iter: 60 }
    }
}

impl GraphGridSpec {
    pub fn edge_grid(&self, length: f64, horizon: f64) -> Result<EdgeGrid> {
        let nx = ((self.nx_per_length as f64 * length).round() as usize).max(16);
        EdgeGrid::new(nx, self.nt, length, horizon)
    }
}

/// One vertex trace of a solved level.
#[derive(Debug, Clone)]
pub struct VertexTrace {
    pub vertex: usize,
    pub edge: usize,
    pub values: Vec<f64>,
}

/// A coupled solution of one expansion level on the whole graph.
#[derive(Debug, Clone)]
pub struct GraphSolution {
    pub level: Level,
    pub edges: Vec<EdgeSolution>,
    pub times: Vec<f64>,
    pub traces: Vec<VertexTrace>,
    /// max over interior vertices and grid times of
    /// |Σ ω 𝚟 w(0,t) − rhs(t)|.
    pub kirchhoff_defect: f64,
    /// Remark for accepted-but-unusual parameters (e.g. α outside (3/2, 2)).
    pub warning: Option<String>,
}

impl GraphSolution {
    /// Trace of an edge at one of its ends, on the shared time grid.
    pub fn end_trace(&self, edge_idx: usize, end: EdgeEnd) -> Vec<f64> {
        match end {
            EdgeEnd::FromEnd => self.edges[edge_idx].trace_start(),
            EdgeEnd::ToEnd => self.edges[edge_idx].trace_end(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.edges.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    /// ∂_{y₁} w at the vertex end of an edge, per grid time (5-point stencil).
    pub fn x_derivative_at(&self, edge_idx: usize, end: EdgeEnd) -> Vec<f64> {
        let sol = &self.edges[edge_idx];
        let dx = sol.grid.dx();
        let nxp = sol.grid.nx + 1;
        (0..=sol.grid.nt)
            .map(|n| {
                let row = sol.values.row(n);
                match end {
                    EdgeEnd::FromEnd => first_derivative_left_5pt(&row[..5.min(nxp)], dx),
                    EdgeEnd::ToEnd => {
                        let tail: Vec<f64> = row[nxp.saturating_sub(5)..].iter().rev().copied().collect();
                        -first_derivative_left_5pt(&tail, dx)
                    }
                }
            })
            .collect()
    }
}

/// Cross-section boundary average of the nonlinearity:
/// φ̂(s, y₁, t) = ⟨φ(s, y₁, ·, t)⟩_{∂Υ} with the ω-normalization that drops
/// constant π-type factors (trapezoid on the circle in 3D, the two-point sum
/// in 2D mode).
pub fn averaged_phi(
    dim: DimensionMode,
    phi: Option<&EdgePhi>,
    radius: f64,
    s: f64,
    y1: f64,
    t: f64,
    nodes: usize,
) -> f64 {
    let Some(phi) = phi else { return 0.0 };
    match dim {
        DimensionMode::Three => {
            let m = nodes.max(8);
            let dth = 2.0 * std::f64::consts::PI / m as f64;
            let mut acc = 0.0;
            for k in 0..m {
                acc += phi.eval(dim, s, y1, k as f64 * dth, t);
            }
            acc * radius * dth / (std::f64::consts::PI * radius * radius)
        }
        DimensionMode::Two => {
            (phi.eval(dim, s, y1, 1.0, t) + phi.eval(dim, s, y1, -1.0, t)) / (2.0 * radius)
        }
    }
}

/// ∂ₛ φ̂, by the same quadrature.
pub fn averaged_phi_ds(
    dim: DimensionMode,
    phi: Option<&EdgePhi>,
    radius: f64,
    s: f64,
    y1: f64,
    t: f64,
    nodes: usize,
) -> f64 {
    let Some(phi) = phi else { return 0.0 };
    match dim {
        DimensionMode::Three => {
            let m = nodes.max(8);
            let dth = 2.0 * std::f64::consts::PI / m as f64;
            let mut acc = 0.0;
            for k in 0..m {
                acc += phi.deriv_s(dim, s, y1, k as f64 * dth, t);
            }
            acc * radius * dth / (std::f64::consts::PI * radius * radius)
        }
        DimensionMode::Two => {
            (phi.deriv_s(dim, s, y1, 1.0, t) + phi.deriv_s(dim, s, y1, -1.0, t)) / (2.0 * radius)
        }
    }
}

const PHI_QUAD_NODES: usize = 64;

// ---------------------------------------------------------------------------
// level machinery
// ---------------------------------------------------------------------------

/// Per-edge source Ψ(w, y₁, t) of one solve level.
enum LevelSource<'a> {
    /// Ψ = −φ̂(w): the semilinear limit equation.
    SemilinearPhi,
    /// Ψ ≡ 0 (cascade leading order).
    Zero,
    /// Ψ = −φ̂(w₀(y₁,t)) with frozen w₀.
    FrozenPhi(&'a GraphSolution),
    /// Ψ = −∂ₛφ̂(w₀)·w_prev with two frozen levels.
    LinearizedPhi(&'a GraphSolution, &'a GraphSolution),
    /// Ψ = −∂ₛφ̂(w₀)·w + f (first corrector; f tabulated per edge).
    Corrector(&'a GraphSolution, &'a [Grid2]),
}

/// Outer Dirichlet data at outer-end vertices.
#[derive(Clone, Copy)]
enum OuterData {
    InletQ,
    Zero,
}

struct LevelSpec<'a> {
    level: Level,
    source: LevelSource<'a>,
    outer: OuterData,
    /// Kirchhoff right side per interior vertex index.
    vertex_rhs: Option<&'a HashMap<usize, Vec<f64>>>,
    /// Use the continuity closure when a vertex has exactly one inlet.
    continuity_for_single_inlet: bool,
    force_general_split: bool,
}

fn level_psi<'a>(
    spec: &'a LevelSpec<'a>,
    net: &'a Network,
    edge_idx: usize,
) -> impl Fn(f64, f64, f64) -> f64 + Sync + 'a {
    let e = &net.edges[edge_idx];
    let dim = net.dim;
    let phi = e.phi.as_ref();
    let h = e.radius;
    move |w: f64, y1: f64, t: f64| match &spec.source {
        LevelSource::SemilinearPhi => -averaged_phi(dim, phi, h, w, y1, t, PHI_QUAD_NODES),
        LevelSource::Zero => 0.0,
        LevelSource::FrozenPhi(w0) => {
            let s0 = w0.edges[edge_idx].eval(y1, t);
            -averaged_phi(dim, phi, h, s0, y1, t, PHI_QUAD_NODES)
        }
        LevelSource::LinearizedPhi(w0, wprev) => {
            let s0 = w0.edges[edge_idx].eval(y1, t);
            let p = wprev.edges[edge_idx].eval(y1, t);
            -averaged_phi_ds(dim, phi, h, s0, y1, t, PHI_QUAD_NODES) * p
        }
        LevelSource::Corrector(w0, tables) => {
            let s0 = w0.edges[edge_idx].eval(y1, t);
            let f = crate::grid::bilinear_clamped(
                &tables[edge_idx],
                w0.edges[edge_idx].grid.dx(),
                w0.edges[edge_idx].grid.dt(),
                y1,
                t,
                0.0,
            );
            -averaged_phi_ds(dim, phi, h, s0, y1, t, PHI_QUAD_NODES) * w + f
        }
    }
}

fn solve_level(net: &Network, grid: &GraphGridSpec, spec: &LevelSpec) -> Result<GraphSolution> {
    let order = crate::network::flow_topology_order(net)
        .map_err(Error::Config)?;
    let nt = grid.nt;
    let times: Vec<f64> = (0..=nt).map(|n| net.horizon * n as f64 / nt as f64).collect();

    let mut solved: Vec<Option<EdgeSolution>> = vec![None; net.edges.len()];

    for &vi in &order {
        let inc = net.incident(vi);
        // Split incidences by transport direction at this vertex.
        let mut inlets: Vec<Incidence> = Vec::new();
        let mut outlets: Vec<Incidence> = Vec::new();
        for i in inc {
            // Near-vertex speed in the away-frame; sign fixed over time.
            let probe = net.near_speed(i, 0.5 * net.horizon);
            if probe < 0.0 {
                inlets.push(i);
            } else {
                outlets.push(i);
            }
        }
        let m = inlets.len();
        let total = m + outlets.len();
        if m == 0 || outlets.is_empty() {
            return Err(Error::Config(format!(
                "vertex {} needs both inlet and outlet edges (m = {m} of {total})",
                net.vertices[vi].id
            )));
        }

        // Solve external inlet edges (outer data at the far end).
        for i in &inlets {
            if solved[i.edge].is_some() {
                continue; // fed by an upstream vertex
            }
            let e = &net.edges[i.edge];
            let egrid = grid.edge_grid(e.length, net.horizon)?;
            let vel = e.velocity().clone();
            let v = move |y: f64, t: f64| vel.v1(y, t);
            let vel_d = e.velocity().clone();
            let dv = move |y: f64, t: f64| vel_d.dv1_dy(y, t);
            let psi = level_psi(spec, net, i.edge);
            let q_expr = e.inlet.clone();
            let outer = spec.outer;
            let inflow = move |t: f64| match outer {
                OuterData::InletQ => q_expr.as_ref().map_or(0.0, |d| d.q.eval(t)),
                OuterData::Zero => 0.0,
            };
            let sol = solve_edge_moc(v, Some(&dv), psi, inflow, &egrid, grid.tol, grid.max_iter)?;
            solved[i.edge] = Some(sol);
        }

        // Gather inlet traces at this vertex.
        let mut inlet_traces: Vec<(Incidence, Vec<f64>)> = Vec::new();
        for i in &inlets {
            let sol = solved[i.edge].as_ref().expect("inlet edge must be solved");
            let trace = match i.end {
                EdgeEnd::FromEnd => sol.trace_start(),
                EdgeEnd::ToEnd => sol.trace_end(),
            };
            inlet_traces.push((*i, trace));
        }

        // Kirchhoff right side at this vertex.
        let rhs: Vec<f64> = match spec.vertex_rhs.and_then(|m| m.get(&vi)) {
            Some(d) => {
                if d.len() != nt + 1 {
                    return Err(Error::Config(format!(
                        "vertex {} rhs series has {} samples, expected {}",
                        net.vertices[vi].id,
                        d.len(),
                        nt + 1
                    )));
                }
                d.clone()
            }
            None => vec![0.0; nt + 1],
        };

        // Inlet flux sum Σ_{j≤m} ω_j 𝚟_j(t) w_j(0,t).
        let mut influx = vec![0.0; nt + 1];
        for (i, trace) in &inlet_traces {
            let w = net.weight(&net.edges[i.edge]);
            for (n, &t) in times.iter().enumerate() {
                influx[n] += w * net.near_speed(*i, t) * trace[n];
            }
        }

        // Outlet vertex data by the branch closure.
        let use_continuity =
            spec.continuity_for_single_inlet && m == 1 && !spec.force_general_split;
        let split_weight = |edge_idx: usize| -> f64 {
            match &net.outlet_split {
                OutletSplit::Equal => 1.0 / outlets.len() as f64,
                OutletSplit::Weighted { weights } => {
                    let total: f64 = outlets
                        .iter()
                        .map(|o| weights.get(&net.edges[o.edge].id).copied().unwrap_or(0.0))
                        .sum();
                    if total <= 0.0 {
                        1.0 / outlets.len() as f64
                    } else {
                        weights.get(&net.edges[edge_idx].id).copied().unwrap_or(0.0) / total
                    }
                }
            }
        };

        for o in &outlets {
            let e = &net.edges[o.edge];
            let mut data = vec![0.0; nt + 1];
            if use_continuity {
                data.copy_from_slice(&inlet_traces[0].1);
            } else {
                let w = net.weight(e);
                let share = split_weight(o.edge);
                for (n, &t) in times.iter().enumerate() {
                    let speed = net.near_speed(*o, t);
                    if speed.abs() < 1e-14 {
                        return Err(Error::DegenerateVertex { vertex: net.vertices[vi].id, t });
                    }
                    data[n] = share * (rhs[n] - influx[n]) / (w * speed);
                }
            }

            if solved[o.edge].is_some() {
                return Err(Error::Consistency(format!(
                    "edge {} would be solved twice (flow cycle?)",
                    e.id
                )));
            }
            let egrid = grid.edge_grid(e.length, net.horizon)?;
            let vel = e.velocity().clone();
            let v = move |y: f64, t: f64| vel.v1(y, t);
            let vel_d = e.velocity().clone();
            let dv = move |y: f64, t: f64| vel_d.dv1_dy(y, t);
            let psi = level_psi(spec, net, o.edge);
            // Vertex data lives at the inflow side of the outlet edge.
            let series = crate::grid::Series {
                t0: 0.0,
                dt: net.horizon / nt as f64,
                values: data,
            };
            // Outlet edges flow away from this vertex. If the vertex sits at
            // the edge's from-end the inflow boundary is y₁ = 0 (v > 0 in the
            // edge frame); at a to-end the edge frame is reversed (v < 0) and
            // the MoC solver reads the inflow at y₁ = ℓ. Either way the data
            // series is a function of time only.
            let inflow = move |t: f64| series.eval(t);
            let sol = solve_edge_moc(v, Some(&dv), psi, inflow, &egrid, grid.tol, grid.max_iter)?;
            solved[o.edge] = Some(sol);
        }
    }

    let edges: Vec<EdgeSolution> = solved
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| Error::Config(format!("edge {} was never solved", net.edges[i].id)))
        })
        .collect::<Result<_>>()?;

    // Traces and the Kirchhoff audit.
    let mut traces = Vec::new();
    let mut defect = 0.0_f64;
    for vi in net.interior_vertices() {
        let rhs: Vec<f64> = match spec.vertex_rhs.and_then(|m| m.get(&vi)) {
            Some(d) => d.clone(),
            None => vec![0.0; nt + 1],
        };
        let mut sums = rhs.iter().map(|r| -r).collect::<Vec<f64>>();
        for i in net.incident(vi) {
            let sol = &edges[i.edge];
            let trace = match i.end {
                EdgeEnd::FromEnd => sol.trace_start(),
                EdgeEnd::ToEnd => sol.trace_end(),
            };
            let w = net.weight(&net.edges[i.edge]);
            for (n, &t) in times.iter().enumerate() {
                sums[n] += w * net.near_speed(i, t) * trace[n];
            }
            traces.push(VertexTrace {
                vertex: net.vertices[vi].id,
                edge: net.edges[i.edge].id,
                values: trace,
            });
        }
        for s in sums {
            defect = defect.max(s.abs());
        }
    }

    Ok(GraphSolution {
        level: spec.level,
        edges,
        times,
        traces,
        kirchhoff_defect: defect,
        warning: None,
    })
}

// ---------------------------------------------------------------------------
// public level solvers
// ---------------------------------------------------------------------------

/// The hyperbolic limit problem (α = 1): semilinear edge equations with the
/// branch closures — continuity for a single inlet, the flux-weighted rule
/// otherwise (the single-outlet rule is its M−m = 1 case).
pub fn solve_limit_alpha1(net: &Network, grid: &GraphGridSpec) -> Result<GraphSolution> {
    solve_level(
        net,
        grid,
        &LevelSpec {
            level: Level::W0,
            source: LevelSource::SemilinearPhi,
            outer: OuterData::InletQ,
            vertex_rhs: None,
            continuity_for_single_inlet: true,
            force_general_split: false,
        },
    )
}

/// Like [`solve_limit_alpha1`] but forcing the general flux-split closure
/// even for single-inlet vertices (branch-consistency checks).
pub fn solve_limit_alpha1_general_split(
    net: &Network,
    grid: &GraphGridSpec,
) -> Result<GraphSolution> {
    solve_level(
        net,
        grid,
        &LevelSpec {
            level: Level::W0,
            source: LevelSource::SemilinearPhi,
            outer: OuterData::InletQ,
            vertex_rhs: None,
            continuity_for_single_inlet: true,
            force_general_split: true,
        },
    )
}

/// Tabulates the corrector source f = (w₀)″ − ⟨∂ₛφ(w₀)·u₁⟩ on each edge
/// grid. Cell problems are solved lazily: only inside the nonlinearity
/// window (outside it u₁ ≡ 0 and f reduces to (w₀)″).
pub fn corrector_source_tables(
    net: &Network,
    w0: &GraphSolution,
    cell_resolution: usize,
) -> Result<Vec<Grid2>> {
    let mut tables = Vec::with_capacity(net.edges.len());
    for (ei, e) in net.edges.iter().enumerate() {
        let sol = &w0.edges[ei];
        let (nxp, ntp) = (sol.grid.nx + 1, sol.grid.nt + 1);
        let dx = sol.grid.dx();
        let mut table = Grid2::zeros(nxp, ntp);
        for n in 0..ntp {
            let t = sol.grid.t(n);
            let row = sol.values.row(n);
            for j in 0..nxp {
                let y1 = sol.grid.x(j);
                let w0_xx = second_derivative_5pt(row, dx, j);
                let in_window = e
                    .phi
                    .as_ref()
                    .map_or(false, |p| p.window.eval(y1) > 0.0);
                let f = if in_window {
                    let inp = CellInputs {
                        dim: net.dim,
                        radius: e.radius,
                        y1,
                        t,
                        w0: row[j],
                        w0_x: 0.0,
                        w0_t: 0.0,
                        velocity: e.velocity(),
                        phi: e.phi.as_ref(),
                    };
                    let cell = match net.dim {
                        DimensionMode::Two => solve_cell_u1(&inp, cell_resolution, 1, 1e-11)?,
                        DimensionMode::Three => {
                            solve_cell_u1(&inp, cell_resolution, cell_resolution, 1e-11)?
                        }
                    };
                    corrector_source_f(&inp, w0_xx, &cell)
                } else {
                    w0_xx
                };
                table.set(j, n, f);
            }
        }
        tables.push(table);
    }
    Ok(tables)
}

/// The first corrector level w₁: linear edge problems
/// ∂ₜw₁ + v ∂ₓw₁ = (−∂ₓv − ∂ₛφ̂(w₀)) w₁ + f, inlet edges with zero outer
/// data, outlets closed by (d(t) − Σ_inlets ω𝚟w₁)/((M−m) ω 𝚟) per vertex.
pub fn solve_w1(
    net: &Network,
    grid: &GraphGridSpec,
    w0: &GraphSolution,
    f_tables: &[Grid2],
    d1: &HashMap<usize, Vec<f64>>,
) -> Result<GraphSolution> {
    solve_level(
        net,
        grid,
        &LevelSpec {
            level: Level::W1,
            source: LevelSource::Corrector(w0, f_tables),
            outer: OuterData::Zero,
            vertex_rhs: Some(d1),
            continuity_for_single_inlet: false,
            force_general_split: false,
        },
    )
}

/// The three coupled levels of the α > 1 cascade.
#[derive(Debug, Clone)]
pub struct CascadeSolution {
    pub w0: GraphSolution,
    pub w_alpha_minus_1: GraphSolution,
    pub w_2alpha_minus_2: GraphSolution,
    pub warning: Option<String>,
}

/// Weak-interaction cascade for α ∈ (1, 2): the φ-free limit w₀, the
/// φ̂(w₀)-sourced w_{α−1} and the linearized w_{2α−2}, all with homogeneous
/// Kirchhoff sums and the α = 1 branch closures.
pub fn solve_cascade_alpha_gt1(net: &Network, grid: &GraphGridSpec) -> Result<CascadeSolution> {
    let alpha = net.alpha;
    if !(1.0 < alpha && alpha < 2.0) {
        return Err(Error::Config(format!("cascade needs alpha in (1, 2), got {alpha}")));
    }
    let warning = if !(1.5 < alpha && alpha < 2.0) {
        Some(format!(
            "alpha = {alpha} outside (3/2, 2): higher cascade terms between the computed levels are dropped"
        ))
    } else {
        None
    };

    let mut w0 = solve_level(
        net,
        grid,
        &LevelSpec {
            level: Level::W0,
            source: LevelSource::Zero,
            outer: OuterData::InletQ,
            vertex_rhs: None,
            continuity_for_single_inlet: true,
            force_general_split: false,
        },
    )?;
    w0.warning = warning.clone();

    let w_am1 = solve_level(
        net,
        grid,
        &LevelSpec {
            level: Level::WAlphaMinus1,
            source: LevelSource::FrozenPhi(&w0),
            outer: OuterData::Zero,
            vertex_rhs: None,
            continuity_for_single_inlet: true,
            force_general_split: false,
        },
    )?;

    let w_2am2 = solve_level(
        net,
        grid,
        &LevelSpec {
            level: Level::W2AlphaMinus2,
            source: LevelSource::LinearizedPhi(&w0, &w_am1),
            outer: OuterData::Zero,
            vertex_rhs: None,
            continuity_for_single_inlet: true,
            force_general_split: false,
        },
    )?;

    Ok(CascadeSolution { w0, w_alpha_minus_1: w_am1, w_2alpha_minus_2: w_2am2, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristics::solve_edge_fv;
    use crate::network::presets;

    fn spec(nx: usize, nt: usize) -> GraphGridSpec {
        GraphGridSpec { nx_per_length: nx, nt, tol: 1e-11, max_iter: 60 }
    }

    #[test]
    fn averaged_phi_examples() {
        use crate::expr::TimeExpr;
        use crate::network::{CrossFactor, StateFactor, Window};
        let mk = |cross: CrossFactor| EdgePhi {
            state: StateFactor::Linear { k: 1.0 },
            window: Window { lo: 0.2, hi: 0.8, margin: 0.25 },
            cross,
            time: TimeExpr::one(),
        };
        // φ = s, ξ̄-independent, h = 1, 3D: φ̂ = 2s.
        let phi = mk(CrossFactor::One);
        let got = averaged_phi(DimensionMode::Three, Some(&phi), 1.0, 3.0, 0.5, 0.0, 64);
        assert!((got - 6.0).abs() < 1e-12, "got {got}");
        // Odd harmonic integrates to zero on the circle.
        let phi = mk(CrossFactor::Harmonic { k: 1 });
        let got = averaged_phi(DimensionMode::Three, Some(&phi), 1.0, 3.0, 0.5, 0.0, 64);
        assert!(got.abs() < 1e-12);
        // (|ξ̄|/h)² restricted to the boundary is 1: same as the constant.
        let phi = mk(CrossFactor::RadialSq);
        let got = averaged_phi(DimensionMode::Three, Some(&phi), 1.0, 3.0, 0.5, 0.0, 64);
        assert!((got - 6.0).abs() < 1e-12);
    }

    #[test]
    fn channel_pure_transport_composition() {
        // m = 1, φ ≡ 0, 𝚟 = (−1, +1), q(t) = t²: the outlet trace equals
        // q(t − ℓ₁) (continuity of pure transport through the vertex).
        let net = presets::two_edge_channel(-1.0, 1.0);
        let sol = solve_limit_alpha1(&net, &spec(128, 256)).unwrap();
        assert!(sol.kirchhoff_defect < 1e-12, "defect {}", sol.kirchhoff_defect);
        let outlet_trace = sol.end_trace(1, EdgeEnd::FromEnd);
        for (n, &t) in sol.times.iter().enumerate() {
            let expected = if t > 1.0 { (t - 1.0) * (t - 1.0) } else { 0.0 };
            assert!(
                (outlet_trace[n] - expected).abs() < 2e-4,
                "t = {t}: {} vs {}",
                outlet_trace[n],
                expected
            );
        }
        // End-to-end against the FV oracle on the outlet edge (its own
        // CFL-satisfying grid).
        let fv_grid = EdgeGrid::new(256, 640, 1.0, net.horizon).unwrap();
        let fv = solve_edge_fv(
            |_, _| 1.0,
            |_, _, _| 0.0,
            |t| if t > 1.0 { (t - 1.0) * (t - 1.0) } else { 0.0 },
            &fv_grid,
        )
        .unwrap();
        let diff = sol.edges[1].max_abs_diff_sampled(&fv);
        assert!(diff < 8e-3, "diff = {diff}");
    }

    #[test]
    fn zero_data_zero_solution() {
        let mut net = presets::two_edge_channel(-1.0, 1.0);
        net.edges[0].inlet = None;
        let sol = solve_limit_alpha1(&net, &spec(64, 64)).unwrap();
        assert_eq!(sol.max_abs(), 0.0);
    }

    #[test]
    fn symmetric_star_outlet_average() {
        // 2 inlets (ω = h, 𝚟 = −1) and 2 outlets (𝚟 = +1): each outlet
        // receives (a + b)/2.
        let net = presets::star(2, 2, false);
        let sol = solve_limit_alpha1(&net, &spec(128, 256)).unwrap();
        let a = sol.end_trace(0, EdgeEnd::FromEnd);
        let b = sol.end_trace(1, EdgeEnd::FromEnd);
        let o1 = sol.end_trace(2, EdgeEnd::FromEnd);
        let o2 = sol.end_trace(3, EdgeEnd::FromEnd);
        for n in 0..a.len() {
            let avg = 0.5 * (a[n] + b[n]);
            assert!((o1[n] - avg).abs() < 1e-12);
            assert!((o2[n] - avg).abs() < 1e-12);
        }
        assert!(sol.kirchhoff_defect < 1e-12);
    }

    #[test]
    fn branch_consistency_single_inlet_symmetric_star() {
        // For a symmetric 1-in/2-out star the continuity closure and the
        // general flux split coincide.
        let net = presets::star(1, 2, false);
        let cont = solve_limit_alpha1(&net, &spec(96, 192)).unwrap();
        let gen = solve_limit_alpha1_general_split(&net, &spec(96, 192)).unwrap();
        for e in 0..3 {
            let d = cont.edges[e].values.max_abs_diff(&gen.edges[e].values);
            assert!(d < 1e-12, "edge {e}: {d}");
        }
    }

    #[test]
    fn kirchhoff_defect_on_modulated_star() {
        let net = presets::star(2, 1, true);
        let sol = solve_limit_alpha1(&net, &spec(96, 256)).unwrap();
        assert!(sol.kirchhoff_defect < 1e-10, "defect {}", sol.kirchhoff_defect);
    }

    #[test]
    fn positivity_of_transport_levels() {
        let net = presets::star(2, 2, false);
        let sol = solve_limit_alpha1(&net, &spec(96, 192)).unwrap();
        for e in &sol.edges {
            for &v in &e.values.data {
                assert!(v >= -1e-12, "negative value {v}");
            }
        }
    }

    #[test]
    fn w1_zero_sources_zero_solution() {
        let net = presets::two_edge_channel(-1.0, 1.0);
        let g = spec(64, 128);
        let w0 = solve_limit_alpha1(&net, &g).unwrap();
        // φ ≡ 0 so f = (w₀)″; with zero d₁ and linear-in-x w₀ the corrector
        // stays zero only for vanishing curvature — here use explicit zero
        // tables to check the zero-source path.
        let zero_tables: Vec<Grid2> = w0
            .edges
            .iter()
            .map(|e| Grid2::zeros(e.grid.nx + 1, e.grid.nt + 1))
            .collect();
        let d1 = HashMap::new();
        let w1 = solve_w1(&net, &g, &w0, &zero_tables, &d1).unwrap();
        assert!(w1.max_abs() < 1e-12);
    }

    /// Fills the graph grids with an analytic field (manufactured data).
    fn manufactured_w0(net: &crate::network::Network, g: &GraphGridSpec) -> GraphSolution {
        let mut edges = Vec::new();
        let f = |y: f64, t: f64| 0.25 * (std::f64::consts::PI * y).sin() * (0.4 * t).powi(2);
        for e in &net.edges {
            let egrid = g.edge_grid(e.length, net.horizon).unwrap();
            let mut values = Grid2::zeros(egrid.nx + 1, egrid.nt + 1);
            for n in 0..=egrid.nt {
                for j in 0..=egrid.nx {
                    values.set(j, n, f(egrid.x(j), egrid.t(n)));
                }
            }
            edges.push(crate::characteristics::EdgeSolution {
                grid: egrid,
                layout: crate::characteristics::Layout::Nodes,
                values,
                converged: true,
                iterations: 0,
                residual_history: Vec::new(),
            });
        }
        let nt = g.nt;
        let times = (0..=nt).map(|n| net.horizon * n as f64 / nt as f64).collect();
        GraphSolution {
            level: Level::W0,
            edges,
            times,
            traces: Vec::new(),
            kirchhoff_defect: 0.0,
            warning: None,
        }
    }

    #[test]
    fn w1_matches_fv_oracle_on_linear_problem() {
        // Channel with φ(s) = s (2D, h = 0.25 ⇒ φ̂ = 4s in the window) and a
        // manufactured smooth w₀; w₁ solves a linear problem checked against
        // a fine-grid FV solve of the same equation on the inlet edge.
        let net = presets::verification_channel(1.0, 1.0);
        let g = spec(256, 512);
        let w0 = manufactured_w0(&net, &g);
        let tables = corrector_source_tables(&net, &w0, 64).unwrap();
        let d1 = HashMap::new();
        let w1 = solve_w1(&net, &g, &w0, &tables, &d1).unwrap();

        // Oracle on the inlet edge (index 0): conservative source
        // ∂ₛφ̂(w₀)·w − f with the same frozen tables.
        let e = &net.edges[0];
        let phi = e.phi.clone();
        let dim = net.dim;
        let h = e.radius;
        let w0e = w0.edges[0].clone();
        let table = tables[0].clone();
        let grid0 = w1.edges[0].grid;
        let fv_grid = EdgeGrid::new(512, 1536, grid0.length, grid0.horizon).unwrap();
        let fv = solve_edge_fv(
            |_, _| -1.0,
            move |w, x, t| {
                let s0 = w0e.eval(x, t);
                let dphi = averaged_phi_ds(dim, phi.as_ref(), h, s0, x, t, 64);
                let f = crate::grid::bilinear_clamped(&table, grid0.dx(), grid0.dt(), x, t, 0.0);
                dphi * w - f
            },
            |_| 0.0,
            &fv_grid,
        )
        .unwrap();
        let diff = w1.edges[0].max_abs_diff_sampled(&fv);
        assert!(diff < 1e-2, "diff = {diff}");
    }

    #[test]
    fn w1_linearity_in_sources() {
        // Doubling f and d₁ doubles w₁.
        let net = presets::verification_channel(1.0, 1.0);
        let g = spec(96, 192);
        let w0 = solve_limit_alpha1(&net, &g).unwrap();
        let tables = corrector_source_tables(&net, &w0, 48).unwrap();
        let doubled: Vec<Grid2> = tables
            .iter()
            .map(|t| {
                let mut d = t.clone();
                for v in &mut d.data {
                    *v *= 2.0;
                }
                d
            })
            .collect();
        let mut d1 = HashMap::new();
        let nt = g.nt;
        d1.insert(
            0usize,
            (0..=nt).map(|n| 0.05 * (n as f64 / nt as f64).powi(2)).collect::<Vec<f64>>(),
        );
        let mut d2 = HashMap::new();
        d2.insert(
            0usize,
            (0..=nt).map(|n| 0.1 * (n as f64 / nt as f64).powi(2)).collect::<Vec<f64>>(),
        );
        let w1 = solve_w1(&net, &g, &w0, &tables, &d1).unwrap();
        let w1x2 = solve_w1(&net, &g, &w0, &doubled, &d2).unwrap();
        let scale = w1x2.max_abs().max(1e-9);
        for e in 0..net.edges.len() {
            for (a, b) in w1.edges[e].values.data.iter().zip(&w1x2.edges[e].values.data) {
                assert!((2.0 * a - b).abs() < 1e-7 * scale, "{a} vs {b}");
            }
        }
        // w₁'s Kirchhoff sum carries d₁ as its right side.
        assert!(w1.kirchhoff_defect < 1e-10, "defect {}", w1.kirchhoff_defect);
    }

    #[test]
    fn cascade_collapses_without_phi() {
        let mut net = presets::verification_channel(1.75, 0.0);
        net.alpha = 1.75;
        let g = spec(96, 192);
        let cas = solve_cascade_alpha_gt1(&net, &g).unwrap();
        assert_eq!(cas.w_alpha_minus_1.max_abs(), 0.0);
        assert_eq!(cas.w_2alpha_minus_2.max_abs(), 0.0);
        assert!(cas.w0.max_abs() > 0.0);
    }

    #[test]
    fn cascade_levels_match_fv_oracles() {
        let mut net = presets::verification_channel(1.75, 1.0);
        net.alpha = 1.75;
        let g = spec(192, 384);
        let cas = solve_cascade_alpha_gt1(&net, &g).unwrap();
        assert!(cas.w0.kirchhoff_defect < 1e-12);
        assert!(cas.w_alpha_minus_1.kirchhoff_defect < 1e-10);
        // Oracle for w_{α−1} on the inlet edge: source −φ̂(w₀) frozen.
        let e = &net.edges[0];
        let phi = e.phi.clone();
        let dim = net.dim;
        let h = e.radius;
        let w0e = cas.w0.edges[0].clone();
        let grid0 = cas.w_alpha_minus_1.edges[0].grid;
        let fv_grid = EdgeGrid::new(grid0.nx, 768, grid0.length, grid0.horizon).unwrap();
        let fv = solve_edge_fv(
            |_, _| -1.0,
            move |_w, x, t| {
                let s0 = w0e.eval(x, t);
                averaged_phi(dim, phi.as_ref(), h, s0, x, t, 64)
            },
            |_| 0.0,
            &fv_grid,
        )
        .unwrap();
        let diff = cas.w_alpha_minus_1.edges[0].max_abs_diff_sampled(&fv);
        assert!(diff < 1e-2, "diff = {diff}");
    }

    #[test]
    fn two_node_chain_feeds_downstream() {
        let net = presets::two_node_chain();
        let sol = solve_limit_alpha1(&net, &spec(96, 384)).unwrap();
        assert!(sol.kirchhoff_defect < 1e-12, "defect {}", sol.kirchhoff_defect);
        // The transfer edge's far trace feeds node B; with pure transport the
        // B-outlet inflow equals the transfer trace at ℓ (continuity, m = 1).
        let transfer_far = sol.end_trace(2, EdgeEnd::ToEnd);
        let b_out = sol.end_trace(3, EdgeEnd::FromEnd);
        for n in 0..transfer_far.len() {
            assert!((transfer_far[n] - b_out[n]).abs() < 1e-12);
        }
    }
}
