//! Builds the composite approximations: the zeroth-order evaluator (edge
//! limit values, junction fields and outlet layers blended through the χ
//! cut-offs), the α > 1 variant with the ε^{α−1} level, and a first-order
//! variant carrying εw₁ and εΠ₁ for gradient observations.
//!
//! Region dispatch per edge point at distance s from an interior vertex:
//! s ≥ 3ℓ₀ε^γ is regular, s ≤ 2ℓ₀ε^γ samples the node field at ξ = x/ε,
//! and the band in between blends the two with χ_{ℓ₀}(s/ε^γ). Outlet edges
//! whose far end carries Dirichlet data add χ_δ(y₁)·Π(η₁, t) near y₁ = ℓ.

use std::collections::HashMap;

use crate::boundary_layer::{BoundaryLayer, TimeFn};
use crate::cutoff::{NodeCutoff, OutletCutoff};
use crate::error::Error;
use crate::graph_limit::GraphSolution;
use crate::grid::Series;
use crate::junction::{interp_field, JunctionMesh, NodeSeries};
use crate::network::{EdgeEnd, EdgeRole, Network, VertexKind};
use crate::Result;

/// Junction data of one interior vertex inside an [`Approximation`].
pub struct NodeAssembly {
    pub mesh: JunctionMesh,
    pub series: NodeSeries,
    /// Optional ε^{α−1} level (targets from w_{α−1}).
    pub extra: Option<NodeSeries>,
}

/// Outlet-layer data of one edge.
pub struct LayerAssembly {
    pub cutoff: OutletCutoff,
    pub layer: BoundaryLayer,
    /// Optional ε^{α−1} layer with Φ = −w_{α−1}(ℓ, ·).
    pub extra: Option<BoundaryLayer>,
}

/// Where to evaluate the approximation.
#[derive(Debug, Clone)]
pub enum Location {
    /// Edge point: longitudinal coordinate and physical transverse offsets.
    Edge { edge: usize, y1: f64, transverse: [f64; 2] },
    /// Unit-scale junction coordinates relative to the vertex center.
    Node { vertex: usize, xi: [f64; 3] },
}

/// Composite approximation of the concentration field at a fixed ε.
pub struct Approximation {
    pub net: Network,
    pub eps: f64,
    pub gamma: f64,
    pub w0: GraphSolution,
    /// (exponent, level): the ε^{α−1} cascade level for α > 1.
    pub w_extra: Option<(f64, GraphSolution)>,
    /// First-order edge corrector εw₁ (gradient observations).
    pub w1: Option<GraphSolution>,
    /// Keyed by vertex index.
    pub nodes: HashMap<usize, NodeAssembly>,
    /// Keyed by edge index.
    pub layers: HashMap<usize, LayerAssembly>,
}

const TRACE_MATCH_TOL: f64 = 1e-10;

fn check_trace_consistency(
    net: &Network,
    w: &GraphSolution,
    nodes: &HashMap<usize, NodeAssembly>,
    use_extra: bool,
) -> Result<()> {
    for (&vi, na) in nodes {
        for (pi, port) in na.mesh.geo.ports.iter().enumerate() {
            let trace = w.end_trace(port.edge, port.end);
            let scale = w.max_abs().max(1e-12);
            for (n, &t) in w.times.iter().enumerate() {
                let series = if use_extra {
                    na.extra.as_ref().map(|s| s.target_at(pi, t))
                } else {
                    Some(na.series.target_at(pi, t))
                };
                let Some(target) = series else {
                    return Err(Error::Consistency(format!(
                        "vertex {} has no extra node level",
                        net.vertices[vi].id
                    )));
                };
                if (target - trace[n]).abs() > TRACE_MATCH_TOL * scale.max(1.0) {
                    return Err(Error::Consistency(format!(
                        "node at vertex {} disagrees with the edge trace of edge {} at t = {} ({} vs {}); \
                         was the network assembled in flow order?",
                        net.vertices[vi].id, net.edges[port.edge].id, t, target, trace[n]
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Default outlet blend width: half the gap between the nonlinearity support
/// and the outer end (ℓ/4 without a nonlinearity).
pub fn default_delta(net: &Network, edge_idx: usize) -> Result<f64> {
    let e = &net.edges[edge_idx];
    match &e.phi {
        Some(phi) => {
            let gap = e.length - phi.window.hi;
            if gap <= 0.0 {
                return Err(Error::Config(format!(
                    "edge {}: nonlinearity support reaches the outer end (no room for the outlet blend)",
                    e.id
                )));
            }
            Ok(0.5 * gap)
        }
        None => Ok(0.25 * e.length),
    }
}

/// Builds the boundary layers of every outlet edge ending at an outer
/// vertex. Φ₀ = q − w₀(ℓ, ·); with `w1` present, Φ₁ = −w₁(ℓ, ·).
pub fn build_layers(
    net: &Network,
    w0: &GraphSolution,
    w1: Option<&GraphSolution>,
    w_extra: Option<&GraphSolution>,
    delta_override: Option<f64>,
) -> Result<HashMap<usize, LayerAssembly>> {
    let mut out = HashMap::new();
    for (ei, e) in net.edges.iter().enumerate() {
        let to_outer = net
            .vertex_index(e.to)
            .map(|ti| net.vertices[ti].kind == VertexKind::Outer)
            .unwrap_or(false);
        if e.role != EdgeRole::Outlet || !to_outer {
            continue;
        }
        let delta = match delta_override {
            Some(d) => d,
            None => default_delta(net, ei)?,
        };
        let dt = w0.times[1] - w0.times[0];
        let trace = w0.end_trace(ei, EdgeEnd::ToEnd);
        let q = e.inlet.clone();
        let phi0 = Series {
            t0: 0.0,
            dt,
            values: w0
                .times
                .iter()
                .zip(&trace)
                .map(|(&t, &w)| q.as_ref().map_or(0.0, |d| d.q.eval(t)) - w)
                .collect(),
        };
        let phi1 = match w1 {
            Some(w1) => TimeFn::Sampled(Series {
                t0: 0.0,
                dt,
                values: w1.end_trace(ei, EdgeEnd::ToEnd).iter().map(|v| -v).collect(),
            }),
            None => TimeFn::constant(0.0),
        };
        let speed = TimeFn::Expr(e.velocity().near_vertex.clone());
        let layer = BoundaryLayer::new(TimeFn::Sampled(phi0), phi1, speed.clone());
        let extra = w_extra.map(|wx| {
            let phi = Series {
                t0: 0.0,
                dt,
                values: wx.end_trace(ei, EdgeEnd::ToEnd).iter().map(|v| -v).collect(),
            };
            BoundaryLayer::new(TimeFn::Sampled(phi), TimeFn::constant(0.0), speed.clone())
        });
        out.insert(
            ei,
            LayerAssembly { cutoff: OutletCutoff::new(e.length, delta), layer, extra },
        );
    }
    Ok(out)
}

/// Assembles the zeroth-order approximation; checks that every node's far
/// targets match the vertex traces of `w0`.
pub fn assemble_zero_order(
    net: &Network,
    w0: GraphSolution,
    nodes: HashMap<usize, NodeAssembly>,
    layers: HashMap<usize, LayerAssembly>,
    eps: f64,
    gamma: f64,
) -> Result<Approximation> {
    if !(2.0 / 3.0 < gamma && gamma < 1.0) {
        return Err(Error::Config(format!("gamma = {gamma} outside (2/3, 1)")));
    }
    check_trace_consistency(net, &w0, &nodes, false)?;
    let approx = Approximation {
        net: net.clone(),
        eps,
        gamma,
        w0,
        w_extra: None,
        w1: None,
        nodes,
        layers,
    };
    approx.check_blend_geometry()?;
    Ok(approx)
}

/// Assembles the α ∈ (1, 2) approximation w₀ + ε^{α−1} w_{α−1} with the
/// matching node and layer levels.
pub fn assemble_alpha(
    net: &Network,
    w0: GraphSolution,
    w_alpha_minus_1: GraphSolution,
    nodes: HashMap<usize, NodeAssembly>,
    layers: HashMap<usize, LayerAssembly>,
    eps: f64,
    gamma: f64,
) -> Result<Approximation> {
    if !(1.0 < net.alpha && net.alpha < 2.0) {
        return Err(Error::Config(format!("alpha = {} outside (1, 2)", net.alpha)));
    }
    if !(2.0 / 3.0 < gamma && gamma < 1.0) {
        return Err(Error::Config(format!("gamma = {gamma} outside (2/3, 1)")));
    }
    check_trace_consistency(net, &w0, &nodes, false)?;
    check_trace_consistency(net, &w_alpha_minus_1, &nodes, true)?;
    let approx = Approximation {
        net: net.clone(),
        eps,
        gamma,
        w0,
        w_extra: Some((net.alpha - 1.0, w_alpha_minus_1)),
        w1: None,
        nodes,
        layers,
    };
    approx.check_blend_geometry()?;
    Ok(approx)
}

/// Zeroth order plus the ε w₁ / ε Π₁ correctors on the edges (the node zone
/// keeps the zeroth-order field). Used for gradient observations.
pub fn assemble_first_order(
    net: &Network,
    w0: GraphSolution,
    w1: GraphSolution,
    nodes: HashMap<usize, NodeAssembly>,
    layers: HashMap<usize, LayerAssembly>,
    eps: f64,
    gamma: f64,
) -> Result<Approximation> {
    let mut approx = assemble_zero_order(net, w0, nodes, layers, eps, gamma)?;
    approx.w1 = Some(w1);
    Ok(approx)
}

/// Junction mesh/solve parameters for node assemblies.
#[derive(Debug, Clone, Copy)]
pub struct NodeBuildParams {
    /// Unit-scale mesh spacing (must divide ℓ₀, the port half-widths and
    /// the truncation length).
    pub spacing: f64,
    pub l_trunc: f64,
    /// Time samples when the junction velocities vary in time.
    pub time_samples: usize,
}

impl Default for NodeBuildParams {
    fn default() -> Self {
        Self { spacing: 1.0 / 32.0, l_trunc: 8.0, time_samples: 33 }
    }
}

/// Solves the junction fields of every interior vertex, with far targets
/// taken from the vertex traces of `w0` (and optionally of the ε^{α−1}
/// level). Time-constant junction velocities use per-port basis solves and
/// superposition; otherwise fields are sampled on a time grid.
pub fn build_node_assemblies(
    net: &Network,
    w0: &GraphSolution,
    extra: Option<&GraphSolution>,
    params: &NodeBuildParams,
) -> Result<HashMap<usize, NodeAssembly>> {
    use crate::junction::{solve_node_layer, solve_potential, NodeGeometry};
    let mut out = HashMap::new();
    let dt = w0.times[1] - w0.times[0];
    for vi in net.interior_vertices() {
        let geo = NodeGeometry::from_network(net, vi)?;
        let mesh = JunctionMesh::build(geo, params.spacing, params.l_trunc)?;
        let weights: Vec<f64> =
            mesh.geo.ports.iter().map(|p| net.weight(&net.edges[p.edge])).collect();
        let fluxes_at = |t: f64| -> Vec<f64> {
            mesh.geo
                .ports
                .iter()
                .map(|p| match p.end {
                    EdgeEnd::FromEnd => net.edges[p.edge].velocity().near_from(t),
                    EdgeEnd::ToEnd => -net.edges[p.edge].velocity().near_to(t),
                })
                .collect()
        };
        let targets_of = |w: &GraphSolution| -> Vec<Series> {
            mesh.geo
                .ports
                .iter()
                .map(|p| Series { t0: 0.0, dt, values: w.end_trace(p.edge, p.end) })
                .collect()
        };
        let constant = mesh
            .geo
            .ports
            .iter()
            .all(|p| net.edges[p.edge].velocity().is_time_constant());
        let (series, extra_series) = if constant {
            let pot = solve_potential(&mesh, &fluxes_at(0.0), 1e-8)?;
            let nports = mesh.geo.ports.len();
            let mut basis = Vec::with_capacity(nports);
            for p in 0..nports {
                let mut targets = vec![0.0; nports];
                targets[p] = 1.0;
                let sol = solve_node_layer(&mesh, &pot, &targets, &weights)?;
                basis.push(sol.values);
            }
            let series = NodeSeries::Basis { basis: basis.clone(), targets: targets_of(w0) };
            let extra_series =
                extra.map(|wx| NodeSeries::Basis { basis, targets: targets_of(wx) });
            (series, extra_series)
        } else {
            let samples = params.time_samples.max(5);
            let times: Vec<f64> =
                (0..samples).map(|k| net.horizon * k as f64 / (samples - 1) as f64).collect();
            let mut fields = Vec::with_capacity(samples);
            let mut extra_fields = Vec::with_capacity(samples);
            let w0_targets = targets_of(w0);
            let extra_targets = extra.map(targets_of);
            for &t in &times {
                let pot = solve_potential(&mesh, &fluxes_at(t), 1e-8)?;
                let tg: Vec<f64> = w0_targets.iter().map(|s| s.eval(t)).collect();
                fields.push(solve_node_layer(&mesh, &pot, &tg, &weights)?.values);
                if let Some(et) = &extra_targets {
                    let tg: Vec<f64> = et.iter().map(|s| s.eval(t)).collect();
                    extra_fields.push(solve_node_layer(&mesh, &pot, &tg, &weights)?.values);
                }
            }
            let series = NodeSeries::Sampled {
                times: times.clone(),
                fields,
                targets: w0_targets,
            };
            let extra_series = extra_targets.map(|tg| NodeSeries::Sampled {
                times,
                fields: extra_fields,
                targets: tg,
            });
            (series, extra_series)
        };
        out.insert(vi, NodeAssembly { mesh, series, extra: extra_series });
    }
    Ok(out)
}

/// Per-t frozen evaluator: node fields materialized once, then sampled
/// pointwise. Read-only and cheap to query.
pub struct FrozenFields<'a> {
    approx: &'a Approximation,
    t: f64,
    node_fields: HashMap<usize, (Vec<f64>, Option<Vec<f64>>)>,
}

impl Approximation {
    fn check_blend_geometry(&self) -> Result<()> {
        for vi in self.net.interior_vertices() {
            let ell0 = self.net.vertices[vi].ell0.unwrap_or(0.0);
            let band = 3.0 * ell0 * self.eps.powf(self.gamma);
            for inc in self.net.incident(vi) {
                let e = &self.net.edges[inc.edge];
                if band > 0.45 * e.length {
                    return Err(Error::Config(format!(
                        "edge {}: blend band {band:.3} swallows the edge at eps = {}",
                        e.id, self.eps
                    )));
                }
                if let Some(la) = self.layers.get(&inc.edge) {
                    if e.length - 2.0 * la.cutoff.delta < band {
                        return Err(Error::Config(format!(
                            "edge {}: outlet blend overlaps the junction band",
                            e.id
                        )));
                    }
                }
            }
            if !self.nodes.contains_key(&vi) {
                return Err(Error::Config(format!(
                    "no junction assembly for interior vertex {}",
                    self.net.vertices[vi].id
                )));
            }
        }
        Ok(())
    }

    /// Materializes the junction fields at time t.
    pub fn freeze(&self, t: f64) -> FrozenFields<'_> {
        let mut node_fields = HashMap::new();
        for (&vi, na) in &self.nodes {
            let base = na.series.field_at(t);
            let extra = na.extra.as_ref().map(|s| s.field_at(t));
            node_fields.insert(vi, (base, extra));
        }
        FrozenFields { approx: self, t, node_fields }
    }

    /// Single-point evaluation (freezes the fields for one query).
    pub fn evaluate(&self, loc: &Location, t: f64) -> Result<f64> {
        self.freeze(t).evaluate(loc)
    }

    /// The scaling of the extra level: ε^{α−1} when present.
    fn extra_weight(&self) -> f64 {
        self.w_extra
            .as_ref()
            .map_or(0.0, |(expo, _)| self.eps.powf(*expo))
    }

    /// Physical position of an edge point.
    pub fn edge_point_position(
        &self,
        edge: usize,
        y1: f64,
        transverse: [f64; 2],
    ) -> Result<Vec<f64>> {
        let net = &self.net;
        let e = &net.edges[edge];
        let (axis, sign) = net.edge_direction(edge)?;
        let from = net
            .vertex_index(e.from)
            .ok_or_else(|| Error::Geometry("dangling edge".into()))?;
        let pos = &net.vertices[from].position;
        let dim = net.dim.dim();
        let mut x = pos.clone();
        x[axis] += sign * y1;
        let mut k = 0;
        for a in 0..dim {
            if a != axis {
                x[a] += transverse[k];
                k += 1;
            }
        }
        Ok(x)
    }
}

impl FrozenFields<'_> {
    /// Node-zone value at unit coordinates ξ relative to the given vertex.
    fn node_value(&self, vertex_idx: usize, xi: &[f64]) -> Result<f64> {
        let na = self
            .approx
            .nodes
            .get(&vertex_idx)
            .ok_or_else(|| Error::Geometry(format!("no junction at vertex index {vertex_idx}")))?;
        let (base, extra) = &self.node_fields[&vertex_idx];
        let mut v = interp_field(&na.mesh, base, xi);
        if let Some(extra) = extra {
            v += self.approx.extra_weight() * interp_field(&na.mesh, extra, xi);
        }
        Ok(v)
    }

    /// Regular (edge) part at y₁, including layers where active.
    fn regular_value(&self, edge: usize, y1: f64) -> f64 {
        let a = self.approx;
        let t = self.t;
        let mut v = a.w0.edges[edge].eval(y1, t);
        if let Some((_, wx)) = &a.w_extra {
            v += a.extra_weight() * wx.edges[edge].eval(y1, t);
        }
        if let Some(w1) = &a.w1 {
            v += a.eps * w1.edges[edge].eval(y1, t);
        }
        if let Some(la) = a.layers.get(&edge) {
            let chi = la.cutoff.eval(y1);
            if chi > 0.0 {
                let eta = (a.net.edges[edge].length - y1) / a.eps;
                let mut pi = la.layer.pi0(eta, t).unwrap_or(0.0);
                if let Some(extra) = &la.extra {
                    pi += a.extra_weight() * extra.pi0(eta, t).unwrap_or(0.0);
                }
                if a.w1.is_some() {
                    pi += a.eps * la.layer.pi1(eta, t).unwrap_or(0.0);
                }
                v += chi * pi;
            }
        }
        v
    }

    /// Evaluate at a location inside the thin domain.
    pub fn evaluate(&self, loc: &Location) -> Result<f64> {
        let a = self.approx;
        match loc {
            Location::Node { vertex, xi } => {
                let vi = a
                    .net
                    .vertex_index(*vertex)
                    .ok_or_else(|| Error::Geometry(format!("unknown vertex id {vertex}")))?;
                self.node_value(vi, &xi[..a.net.dim.dim()])
            }
            Location::Edge { edge, y1, transverse } => {
                let e = &a.net.edges[*edge];
                if !(0.0 <= *y1 && *y1 <= e.length) {
                    return Err(Error::Geometry(format!(
                        "y1 = {y1} outside edge {} of length {}",
                        e.id, e.length
                    )));
                }
                // Distance to each interior end decides the zone.
                let ends = [(e.from, *y1), (e.to, e.length - *y1)];
                for (vid, s) in ends {
                    let Some(vi) = a.net.vertex_index(vid) else { continue };
                    if a.net.vertices[vi].kind != VertexKind::Interior {
                        continue;
                    }
                    let ell0 = a.net.vertices[vi].ell0.unwrap_or(0.0);
                    let scale = a.eps.powf(a.gamma);
                    let lo = 2.0 * ell0 * scale;
                    let hi = 3.0 * ell0 * scale;
                    if s >= hi {
                        continue;
                    }
                    // Unit junction coordinates of the physical point.
                    let x = self.approx.edge_point_position(*edge, *y1, *transverse)?;
                    let pos = &a.net.vertices[vi].position;
                    let mut xi = [0.0; 3];
                    for aax in 0..a.net.dim.dim() {
                        xi[aax] = (x[aax] - pos[aax]) / a.eps;
                    }
                    let node = self.node_value(vi, &xi[..a.net.dim.dim()])?;
                    if s <= lo {
                        return Ok(node);
                    }
                    let chi = NodeCutoff::new(ell0).eval(s / scale);
                    return Ok(chi * self.regular_value(*edge, *y1) + (1.0 - chi) * node);
                }
                Ok(self.regular_value(*edge, *y1))
            }
        }
    }

    /// Evaluate at a physical point, locating the containing region.
    pub fn evaluate_physical(&self, x: &[f64]) -> Result<f64> {
        let a = self.approx;
        let dim = a.net.dim.dim();
        // Inside a node box?
        for vi in a.net.interior_vertices() {
            let Some(na) = a.nodes.get(&vi) else { continue };
            let pos = &a.net.vertices[vi].position;
            let mut inside = true;
            let mut xi = [0.0; 3];
            for aax in 0..dim {
                xi[aax] = (x[aax] - pos[aax]) / a.eps;
                if xi[aax].abs() > na.mesh.geo.half_widths[aax] + 1e-12 {
                    inside = false;
                }
            }
            if inside {
                return self.node_value(vi, &xi[..dim]);
            }
        }
        // Otherwise on an edge strip.
        for (ei, e) in a.net.edges.iter().enumerate() {
            let Ok((axis, sign)) = a.net.edge_direction(ei) else { continue };
            let Some(fi) = a.net.vertex_index(e.from) else { continue };
            let pos = &a.net.vertices[fi].position;
            let y1 = sign * (x[axis] - pos[axis]);
            if !(0.0 <= y1 && y1 <= e.length + 1e-12) {
                continue;
            }
            let mut trans_ok = true;
            let mut transverse = [0.0; 2];
            let mut k = 0;
            for aax in 0..dim {
                if aax != axis {
                    let off = x[aax] - pos[aax];
                    if off.abs() > a.eps * e.radius + 1e-12 {
                        trans_ok = false;
                    }
                    transverse[k] = off;
                    k += 1;
                }
            }
            if trans_ok {
                return self.evaluate(&Location::Edge {
                    edge: ei,
                    y1: y1.min(e.length),
                    transverse,
                });
            }
        }
        Err(Error::Geometry(format!("point {x:?} outside the thin domain")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_limit::{solve_limit_alpha1, GraphGridSpec};
    use crate::network::presets;

    fn node_params() -> NodeBuildParams {
        NodeBuildParams { spacing: 1.0 / 16.0, l_trunc: 4.0, time_samples: 17 }
    }

    fn channel_approx(eps: f64) -> Approximation {
        let net = presets::verification_channel(1.0, 1.0);
        let g = GraphGridSpec { nx_per_length: 128, nt: 256, tol: 1e-11, max_iter: 60 };
        let w0 = solve_limit_alpha1(&net, &g).unwrap();
        let nodes = build_node_assemblies(&net, &w0, None, &node_params()).unwrap();
        let layers = build_layers(&net, &w0, None, None, None).unwrap();
        assemble_zero_order(&net, w0, nodes, layers, eps, 0.9).unwrap()
    }

    #[test]
    fn mid_edge_point_returns_w0() {
        let a = channel_approx(0.1);
        let t = 1.5;
        let frozen = a.freeze(t);
        let got = frozen
            .evaluate(&Location::Edge { edge: 0, y1: 0.5, transverse: [0.0, 0.0] })
            .unwrap();
        let want = a.w0.edges[0].eval(0.5, t);
        assert_eq!(got, want);
    }

    #[test]
    fn outer_boundary_returns_dirichlet_data_exactly() {
        let a = channel_approx(0.1);
        for &t in &[0.5, 1.7, 2.4] {
            let frozen = a.freeze(t);
            let got = frozen
                .evaluate(&Location::Edge { edge: 1, y1: 1.0, transverse: [0.0, 0.0] })
                .unwrap();
            // Outlet outer data is q ≡ 0: the layer cancels w₀(ℓ) exactly.
            assert!(got.abs() < 1e-12, "got {got}");
        }
    }

    #[test]
    fn node_center_with_equal_targets_returns_constant() {
        let a = channel_approx(0.1);
        // Continuity vertex: both targets equal w₀(0, t).
        let t = 2.0;
        let frozen = a.freeze(t);
        let got = frozen.evaluate(&Location::Node { vertex: 0, xi: [0.0, 0.0, 0.0] }).unwrap();
        let want = a.w0.edges[0].eval(0.0, t);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn blend_zone_continuity_at_region_boundaries() {
        let a = channel_approx(0.1);
        let t = 2.0;
        let frozen = a.freeze(t);
        let ell0 = 0.25;
        let scale = 0.1_f64.powf(0.9);
        for s_factor in [2.0, 3.0] {
            let s = s_factor * ell0 * scale;
            let lo = frozen
                .evaluate(&Location::Edge { edge: 1, y1: s - 1e-9, transverse: [0.0, 0.0] })
                .unwrap();
            let hi = frozen
                .evaluate(&Location::Edge { edge: 1, y1: s + 1e-9, transverse: [0.0, 0.0] })
                .unwrap();
            assert!((lo - hi).abs() < 1e-6, "jump at s = {s}: {lo} vs {hi}");
        }
    }

    #[test]
    fn initial_time_is_zero() {
        let a = channel_approx(0.1);
        let frozen = a.freeze(0.0);
        for &(e, y) in &[(0usize, 0.3), (1, 0.8), (1, 1.0)] {
            let v = frozen
                .evaluate(&Location::Edge { edge: e, y1: y, transverse: [0.0, 0.0] })
                .unwrap();
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn physical_locator_agrees_with_edge_locations() {
        let a = channel_approx(0.1);
        let t = 1.2;
        let frozen = a.freeze(t);
        // Physical point on the outlet edge (direction +x from the origin).
        let via_edge = frozen
            .evaluate(&Location::Edge { edge: 1, y1: 0.6, transverse: [0.01, 0.0] })
            .unwrap();
        let via_phys = frozen.evaluate_physical(&[0.6, 0.01]).unwrap();
        assert_eq!(via_edge, via_phys);
        // Outside the strips.
        assert!(frozen.evaluate_physical(&[0.6, 0.2]).is_err());
    }

    #[test]
    fn mismatched_traces_rejected() {
        let net = presets::verification_channel(1.0, 1.0);
        let g = GraphGridSpec { nx_per_length: 96, nt: 192, tol: 1e-11, max_iter: 60 };
        let w0 = solve_limit_alpha1(&net, &g).unwrap();
        let mut nodes = build_node_assemblies(&net, &w0, None, &node_params()).unwrap();
        // Corrupt one target series.
        if let NodeSeries::Basis { targets, .. } = &mut nodes.get_mut(&0).unwrap().series {
            for v in &mut targets[0].values {
                *v += 0.1;
            }
        }
        let layers = build_layers(&net, &w0, None, None, None).unwrap();
        let r = assemble_zero_order(&net, w0, nodes, layers, 0.1, 0.9);
        assert!(matches!(r, Err(Error::Consistency(_))));
    }
}
