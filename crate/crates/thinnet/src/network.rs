//! Data model and validation for thin graph-like networks.
//!
//! A network is a metric graph: edges are thin channels (half-width `radius`),
//! vertices are either interior junction nodes or outer ends. Every edge
//! carries its own frame with y₁ = 0 at the `from` vertex (the node end) and
//! y₁ = ℓ at the `to` end, so per-edge solvers never juggle orientations.
//! Velocities, nonlinearities and inlet data are registered from the
//! expression catalogue, which keeps runs reproducible from the spec file.

pub mod presets;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cutoff::{bump_c2, bump_c2_d1, smoothstep_c2, smoothstep_c2_d1};
use crate::error::Error;
use crate::expr::TimeExpr;
use crate::Result;

pub const COMPAT_REL_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// basic enums
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DimensionMode {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl DimensionMode {
    pub fn dim(self) -> usize {
        match self {
            DimensionMode::Two => 2,
            DimensionMode::Three => 3,
        }
    }

    /// Cross-section weight ω = h^{d−1}; constant π-type factors cancel in
    /// all Kirchhoff sums.
    pub fn weight(self, radius: f64) -> f64 {
        match self {
            DimensionMode::Two => radius,
            DimensionMode::Three => radius * radius,
        }
    }

    /// Cross-section measure: 2h (strip) or πh² (disk).
    pub fn section_measure(self, radius: f64) -> f64 {
        match self {
            DimensionMode::Two => 2.0 * radius,
            DimensionMode::Three => std::f64::consts::PI * radius * radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Interior,
    Outer,
}

/// Role of an edge relative to the flow through its `from` vertex: inlet
/// edges transport toward the node (v₁ < 0), outlet edges away (v₁ > 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRole {
    Inlet,
    Outlet,
}

/// Which end of an edge touches a given vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeEnd {
    /// y₁ = 0 end.
    FromEnd,
    /// y₁ = ℓ end.
    ToEnd,
}

// ---------------------------------------------------------------------------
// catalogue-backed model functions
// ---------------------------------------------------------------------------

/// C² plateau window: 0 outside [lo, hi], 1 on [lo+margin, hi−margin].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

impl Window {
    pub fn eval(&self, y: f64) -> f64 {
        if y <= self.lo || y >= self.hi {
            return 0.0;
        }
        smoothstep_c2((y - self.lo) / self.margin)
            * smoothstep_c2((self.hi - y) / self.margin)
    }

    pub fn deriv(&self, y: f64) -> f64 {
        if y <= self.lo || y >= self.hi {
            return 0.0;
        }
        let a = (y - self.lo) / self.margin;
        let b = (self.hi - y) / self.margin;
        (smoothstep_c2_d1(a) * smoothstep_c2(b) - smoothstep_c2(a) * smoothstep_c2_d1(b))
            / self.margin
    }
}

/// Multiplicative longitudinal velocity profile; equals 1 near both edge ends.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxialShape {
    Uniform,
    /// 1 + amp·(1−u²)³ with u = (y−center)/width; amp > −1 keeps the sign.
    Bump { center: f64, width: f64, amp: f64 },
}

impl AxialShape {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            AxialShape::Uniform => 1.0,
            AxialShape::Bump { center, width, amp } => 1.0 + amp * bump_c2((y - center) / width),
        }
    }

    pub fn deriv(&self, y: f64) -> f64 {
        match self {
            AxialShape::Uniform => 0.0,
            AxialShape::Bump { center, width, amp } => {
                amp * bump_c2_d1((y - center) / width) / width
            }
        }
    }
}

/// Transverse velocity pattern on the cross-section (unit-scale coordinates).
///
/// Gradient patterns are divergence-free; `Radial` has constant divergence.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransversePattern {
    /// V̄ = ∇(ξ₂) = (1, 0); in 2D the scalar field 1.
    GradAxis,
    /// V̄ = ∇(ξ₂ξ₃) = (ξ₃, ξ₂); 3D only.
    GradSaddle,
    /// V̄ = c ξ̄ (divergence c·(d−1)).
    Radial { coeff: f64 },
}

/// Transverse velocity component V̄(y₁, ξ̄, t) = window(y₁)·time(t)·pattern(ξ̄).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransverseField {
    pub window: Window,
    pub time: TimeExpr,
    pub pattern: TransversePattern,
}

impl TransverseField {
    /// div_ξ̄ V̄ at unit-scale transverse position.
    pub fn divergence(&self, dim: DimensionMode, y1: f64, t: f64) -> f64 {
        let scale = self.window.eval(y1) * self.time.eval(t);
        match self.pattern {
            TransversePattern::GradAxis | TransversePattern::GradSaddle => 0.0,
            TransversePattern::Radial { coeff } => {
                scale * coeff * (dim.dim() - 1) as f64
            }
        }
    }

    /// Normal component V̄·ν on the cross-section boundary.
    ///
    /// 3D: boundary point at angle `theta` on the circle of radius h.
    /// 2D: `theta` = ±1 selects the side ξ = ±h.
    pub fn normal_component(
        &self,
        dim: DimensionMode,
        h: f64,
        y1: f64,
        theta: f64,
        t: f64,
    ) -> f64 {
        let scale = self.window.eval(y1) * self.time.eval(t);
        match dim {
            DimensionMode::Three => match self.pattern {
                TransversePattern::GradAxis => scale * theta.cos(),
                TransversePattern::GradSaddle => scale * h * (2.0 * theta).sin(),
                TransversePattern::Radial { coeff } => scale * coeff * h,
            },
            DimensionMode::Two => {
                let side = theta.signum();
                match self.pattern {
                    TransversePattern::GradAxis => scale * side,
                    TransversePattern::GradSaddle => 0.0,
                    TransversePattern::Radial { coeff } => scale * coeff * h,
                }
            }
        }
    }

    /// Value of the (2D scalar) transverse component at unit-scale ξ.
    pub fn value_2d(&self, y1: f64, _xi: f64, t: f64) -> f64 {
        let scale = self.window.eval(y1) * self.time.eval(t);
        match self.pattern {
            TransversePattern::GradAxis => scale,
            TransversePattern::GradSaddle => 0.0,
            TransversePattern::Radial { coeff } => scale * coeff * _xi,
        }
    }
}

/// Longitudinal velocity of one edge: v₁(y₁, t) = 𝚟(t)·shape(y₁).
///
/// The shape equals 1 on the plateaus [0, δ] and [ℓ−δ, ℓ], so the near-vertex
/// value is 𝚟(t) at the from end and the frozen outer value is 𝚟(t) as well.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VelocityProfile {
    pub near_vertex: TimeExpr,
    #[serde(default = "default_shape")]
    pub shape: AxialShape,
    /// Plateau half-length δ where v₁ is constant in y₁ and V̄ vanishes.
    pub plateau: f64,
    #[serde(default)]
    pub vbar: Option<TransverseField>,
}

fn default_shape() -> AxialShape {
    AxialShape::Uniform
}

impl VelocityProfile {
    pub fn v1(&self, y1: f64, t: f64) -> f64 {
        self.near_vertex.eval(t) * self.shape.eval(y1)
    }

    pub fn dv1_dy(&self, y1: f64, t: f64) -> f64 {
        self.near_vertex.eval(t) * self.shape.deriv(y1)
    }

    pub fn dv1_dt(&self, y1: f64, t: f64) -> f64 {
        self.near_vertex.deriv(t) * self.shape.eval(y1)
    }

    /// 𝚟(t) at the from-vertex (y₁ = 0) end.
    pub fn near_from(&self, t: f64) -> f64 {
        self.near_vertex.eval(t)
    }

    /// v₁(ℓ, t), the frozen value at the outer end.
    pub fn near_to(&self, t: f64) -> f64 {
        self.near_vertex.eval(t)
    }

    pub fn is_time_constant(&self) -> bool {
        self.near_vertex.is_constant()
            && self.vbar.as_ref().map_or(true, |v| v.time.is_constant())
    }
}

/// State factor of a boundary nonlinearity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateFactor {
    Constant { c: f64 },
    Linear { k: f64 },
    /// λ s / (1 + μ|s|): bounded with bounded derivatives, Michaelis–Menten
    /// shape for s ≥ 0.
    Saturating { lam: f64, mu: f64 },
}

impl StateFactor {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            StateFactor::Constant { c } => c,
            StateFactor::Linear { k } => k * s,
            StateFactor::Saturating { lam, mu } => lam * s / (1.0 + mu * s.abs()),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            StateFactor::Constant { .. } => 0.0,
            StateFactor::Linear { k } => k,
            StateFactor::Saturating { lam, mu } => {
                let d = 1.0 + mu * s.abs();
                lam / (d * d)
            }
        }
    }
}

/// Cross-section boundary factor of an edge nonlinearity.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossFactor {
    One,
    /// cos(kθ) on the circle; (±1)ᵏ at the two strip sides in 2D.
    Harmonic { k: u32 },
    /// (|ξ̄|/h)², restricted to the boundary: 1.
    RadialSq,
}

impl CrossFactor {
    /// Boundary value: 3D at angle θ, 2D at side sign(θ).
    pub fn boundary(&self, dim: DimensionMode, theta: f64) -> f64 {
        match dim {
            DimensionMode::Three => match *self {
                CrossFactor::One | CrossFactor::RadialSq => 1.0,
                CrossFactor::Harmonic { k } => (k as f64 * theta).cos(),
            },
            DimensionMode::Two => match *self {
                CrossFactor::One | CrossFactor::RadialSq => 1.0,
                CrossFactor::Harmonic { k } => {
                    if theta >= 0.0 {
                        1.0
                    } else if k % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            },
        }
    }
}

/// Lateral-boundary nonlinearity of one edge:
/// φ(s, y₁, ξ̄, t) = state(s)·window(y₁)·cross(ξ̄)·time(t).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgePhi {
    pub state: StateFactor,
    pub window: Window,
    #[serde(default = "default_cross")]
    pub cross: CrossFactor,
    #[serde(default = "TimeExpr::one")]
    pub time: TimeExpr,
}

fn default_cross() -> CrossFactor {
    CrossFactor::One
}

impl EdgePhi {
    pub fn eval(&self, dim: DimensionMode, s: f64, y1: f64, theta: f64, t: f64) -> f64 {
        self.state.eval(s) * self.window.eval(y1) * self.cross.boundary(dim, theta)
            * self.time.eval(t)
    }

    pub fn deriv_s(&self, dim: DimensionMode, s: f64, y1: f64, theta: f64, t: f64) -> f64 {
        self.state.deriv(s) * self.window.eval(y1) * self.cross.boundary(dim, theta)
            * self.time.eval(t)
    }
}

/// Node-boundary nonlinearity φ⁰(s, ξ, t) = state(s)·clear(ξ)·time(t).
///
/// `clear` is a product of axis bumps that vanishes near every port, with
/// support fraction `clearance` of the port distance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodePhi {
    pub state: StateFactor,
    #[serde(default = "TimeExpr::one")]
    pub time: TimeExpr,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

fn default_clearance() -> f64 {
    0.8
}

impl NodePhi {
    /// Spatial clearance profile given the ported axes and their distances.
    pub fn clear_profile(&self, xi: &[f64], ported: &[(usize, f64)]) -> f64 {
        let mut p = 1.0;
        for &(axis, dist) in ported {
            p *= bump_c2(xi[axis] / (self.clearance * dist));
        }
        p
    }

    pub fn eval(&self, s: f64, xi: &[f64], ported: &[(usize, f64)], t: f64) -> f64 {
        self.state.eval(s) * self.clear_profile(xi, ported) * self.time.eval(t)
    }

    pub fn deriv_s(&self, s: f64, xi: &[f64], ported: &[(usize, f64)], t: f64) -> f64 {
        self.state.deriv(s) * self.clear_profile(xi, ported) * self.time.eval(t)
    }
}

/// Outer Dirichlet data of one edge.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InletData {
    pub q: TimeExpr,
    /// Number of derivatives verified to vanish at t = 0.
    #[serde(default = "default_matching")]
    pub matching_order: u8,
}

fn default_matching() -> u8 {
    1
}

// ---------------------------------------------------------------------------
// network assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub kind: VertexKind,
    pub position: Vec<f64>,
    /// Unit-scale stub length ℓ₀ of the node polytope (interior vertices).
    #[serde(default)]
    pub ell0: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub radius: f64,
    pub role: EdgeRole,
}

/// How outlet vertex data splits the incoming flux when 1 < m < M−1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutletSplit {
    /// The equal split across the M−m outlets.
    #[default]
    Equal,
    /// Custom positive weights per outlet edge id, normalized to sum 1.
    Weighted { weights: HashMap<usize, f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Options {
    pub dimension_mode: DimensionMode,
    /// Time horizon T.
    pub horizon: f64,
    /// Boundary intensity exponent α.
    pub alpha: f64,
    #[serde(default)]
    pub outlet_split: OutletSplit,
    /// Check ∂ₛφ ≥ 0 during validation.
    #[serde(default)]
    pub require_monotone_phi: bool,
    /// Check the extra t = 0 flatness of φ⁰ needed by first-order correctors.
    #[serde(default)]
    pub request_first_order: bool,
}

/// On-disk network spec (see the repo README for the schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub options: Options,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub velocity: Vec<EdgeVelocitySpec>,
    #[serde(default)]
    pub nonlinearity: Vec<EdgePhiSpec>,
    #[serde(default)]
    pub node_nonlinearity: Vec<NodePhiSpec>,
    #[serde(default)]
    pub inlet_data: Vec<InletSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeVelocitySpec {
    pub edge: usize,
    #[serde(flatten)]
    pub profile: VelocityProfile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgePhiSpec {
    pub edge: usize,
    #[serde(flatten)]
    pub phi: EdgePhi,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodePhiSpec {
    pub vertex: usize,
    #[serde(flatten)]
    pub phi: NodePhi,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InletSpec {
    pub edge: usize,
    #[serde(flatten)]
    pub data: InletData,
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// A resolved edge: model data plus its registered functions.
#[derive(Debug, Clone)]
pub struct EdgeModel {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub radius: f64,
    pub role: EdgeRole,
    pub velocity: Option<VelocityProfile>,
    pub phi: Option<EdgePhi>,
    pub inlet: Option<InletData>,
}

impl EdgeModel {
    pub fn velocity(&self) -> &VelocityProfile {
        self.velocity.as_ref().expect("edge has no velocity profile")
    }

    pub fn q(&self, t: f64) -> f64 {
        self.inlet.as_ref().map_or(0.0, |d| d.q.eval(t))
    }
}

/// Incidence of an edge at a vertex.
#[derive(Debug, Clone, Copy)]
pub struct Incidence {
    pub edge: usize,
    pub end: EdgeEnd,
}

/// Validated-on-demand network model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Network {
    pub dim: DimensionMode,
    pub horizon: f64,
    pub alpha: f64,
    pub outlet_split: OutletSplit,
    pub require_monotone_phi: bool,
    pub request_first_order: bool,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<EdgeModel>,
    pub node_phi: HashMap<usize, NodePhi>,
    vertex_of_id: HashMap<usize, usize>,
    edge_of_id: HashMap<usize, usize>,
}

impl Network {
    pub fn from_spec(spec: NetworkSpec) -> Self {
        let mut velocity: HashMap<usize, VelocityProfile> = HashMap::new();
        for v in spec.velocity {
            velocity.insert(v.edge, v.profile);
        }
        let mut phi: HashMap<usize, EdgePhi> = HashMap::new();
        for p in spec.nonlinearity {
            phi.insert(p.edge, p.phi);
        }
        let mut inlet: HashMap<usize, InletData> = HashMap::new();
        for q in spec.inlet_data {
            inlet.insert(q.edge, q.data);
        }
        let mut node_phi = HashMap::new();
        for p in spec.node_nonlinearity {
            node_phi.insert(p.vertex, p.phi);
        }
        let edges: Vec<EdgeModel> = spec
            .edges
            .iter()
            .map(|e| EdgeModel {
                id: e.id,
                from: e.from,
                to: e.to,
                length: e.length,
                radius: e.radius,
                role: e.role,
                velocity: velocity.remove(&e.id),
                phi: phi.remove(&e.id),
                inlet: inlet.remove(&e.id),
            })
            .collect();
        let vertex_of_id = spec.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        let edge_of_id = edges.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        Network {
            dim: spec.options.dimension_mode,
            horizon: spec.options.horizon,
            alpha: spec.options.alpha,
            outlet_split: spec.options.outlet_split,
            require_monotone_phi: spec.options.require_monotone_phi,
            request_first_order: spec.options.request_first_order,
            vertices: spec.vertices,
            edges,
            node_phi,
            vertex_of_id,
            edge_of_id,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::from_spec(NetworkSpec::from_json(text)?))
    }

    pub fn vertex_index(&self, id: usize) -> Option<usize> {
        self.vertex_of_id.get(&id).copied()
    }

    pub fn edge_index(&self, id: usize) -> Option<usize> {
        self.edge_of_id.get(&id).copied()
    }

    pub fn weight(&self, edge: &EdgeModel) -> f64 {
        self.dim.weight(edge.radius)
    }

    /// Edges incident to a vertex (by vertex index), with orientation.
    pub fn incident(&self, vertex_idx: usize) -> Vec<Incidence> {
        let vid = self.vertices[vertex_idx].id;
        let mut out = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.from == vid {
                out.push(Incidence { edge: i, end: EdgeEnd::FromEnd });
            }
            if e.to == vid {
                out.push(Incidence { edge: i, end: EdgeEnd::ToEnd });
            }
        }
        out
    }

    /// Signed near-vertex speed in the frame pointing away from the vertex.
    /// Negative values transport toward the vertex (inlet side).
    pub fn near_speed(&self, inc: Incidence, t: f64) -> f64 {
        let e = &self.edges[inc.edge];
        let v = e.velocity();
        match inc.end {
            EdgeEnd::FromEnd => v.near_from(t),
            EdgeEnd::ToEnd => -v.near_to(t),
        }
    }

    /// Axis-aligned unit direction of an edge, from its endpoint positions.
    pub fn edge_direction(&self, edge_idx: usize) -> Result<(usize, f64)> {
        let e = &self.edges[edge_idx];
        let from = self
            .vertex_index(e.from)
            .ok_or_else(|| Error::Config(format!("edge {} references missing vertex {}", e.id, e.from)))?;
        let to = self
            .vertex_index(e.to)
            .ok_or_else(|| Error::Config(format!("edge {} references missing vertex {}", e.id, e.to)))?;
        let p = &self.vertices[from].position;
        let q = &self.vertices[to].position;
        if p.len() != q.len() || p.is_empty() {
            return Err(Error::Config(format!("edge {}: inconsistent vertex positions", e.id)));
        }
        let mut axis = None;
        for a in 0..p.len() {
            let d = q[a] - p[a];
            if d.abs() > 1e-12 {
                if axis.is_some() {
                    return Err(Error::Config(format!("edge {} is not axis-aligned", e.id)));
                }
                axis = Some((a, d.signum()));
            }
        }
        axis.ok_or_else(|| Error::Config(format!("edge {} has zero extent", e.id)))
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VertexKind::Interior)
            .map(|(i, _)| i)
    }

    /// Maximum over interior vertices of |Σ ω_i 𝚟_i(t)|.
    pub fn flux_balance_defect(&self, t: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for vi in self.interior_vertices() {
            let mut sum = 0.0;
            for inc in self.incident(vi) {
                let e = &self.edges[inc.edge];
                if e.velocity.is_some() {
                    sum += self.weight(e) * self.near_speed(inc, t);
                }
            }
            worst = worst.max(sum.abs());
        }
        worst
    }

    /// (m, M): edges transporting toward their interior vertex, total count.
    pub fn classify_edges(&self) -> Result<(usize, usize)> {
        let nt = 33;
        let mut m = 0;
        for (i, e) in self.edges.iter().enumerate() {
            let v = e
                .velocity
                .as_ref()
                .ok_or_else(|| Error::Config(format!("edge {} has no velocity profile", e.id)))?;
            let mut sign = 0.0_f64;
            for k in 0..=nt {
                let t = self.horizon * k as f64 / nt as f64;
                for y in [0.0, 0.25 * e.length, 0.5 * e.length, 0.75 * e.length, e.length] {
                    let val = v.v1(y, t);
                    if val == 0.0 {
                        continue;
                    }
                    if sign == 0.0 {
                        sign = val.signum();
                    } else if sign != val.signum() {
                        return Err(Error::Config(format!(
                            "edge {} has mixed-sign longitudinal velocity",
                            e.id
                        )));
                    }
                }
            }
            let _ = i;
            if sign < 0.0 {
                m += 1;
            }
        }
        Ok((m, self.edges.len()))
    }
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Structure,
    Geometry,
    Velocity,
    Compatibility,
    Nonlinearity,
    InletData,
    Topology,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

/// Result of [`validate`]: empty iff the network satisfies every invariant.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "valid: no violated invariants")?;
        } else {
            for v in &self.violations {
                writeln!(f, "- {}", v.message)?;
            }
        }
        Ok(())
    }
}

/// Numerical k-th derivative at 0 by central differences (used to report the
/// magnitude of a violated matching condition).
fn derivative_at_zero(q: &TimeExpr, order: u8, h: f64) -> f64 {
    let f = |k: i32| q.eval(k as f64 * h);
    match order {
        0 => f(0),
        1 => (f(1) - f(-1)) / (2.0 * h),
        2 => (f(1) - 2.0 * f(0) + f(-1)) / (h * h),
        3 => (-0.5 * f(-2) + f(-1) - f(1) + 0.5 * f(2)) / (h * h * h),
        _ => (f(-2) - 4.0 * f(-1) + 6.0 * f(0) - 4.0 * f(1) + f(2)) / (h * h * h * h),
    }
}

/// Largest m ≥ −1 such that q and its first m derivatives vanish at t = 0,
/// from the catalogue structure (−1 means q(0) ≠ 0; values saturate at 5).
/// Sums are bounded conservatively by the minimum over terms.
fn vanishing_order_at_zero(q: &TimeExpr) -> i32 {
    const SAT: i32 = 5;
    match q {
        TimeExpr::Constant { value } => {
            if *value == 0.0 {
                SAT
            } else {
                -1
            }
        }
        TimeExpr::Poly { coeffs } => {
            match coeffs.iter().position(|&c| c != 0.0) {
                None => SAT,
                Some(k) => (k as i32 - 1).min(SAT),
            }
        }
        TimeExpr::Sin { amp, omega, phase } => {
            if *amp == 0.0 {
                SAT
            } else if phase.sin().abs() <= 1e-15 {
                if *omega == 0.0 {
                    SAT
                } else {
                    0
                }
            } else {
                -1
            }
        }
        TimeExpr::Ramp { amp, order, .. } => {
            if *amp == 0.0 {
                SAT
            } else if *order == 4 {
                4
            } else {
                2
            }
        }
        TimeExpr::Sum { terms } => {
            terms.iter().map(vanishing_order_at_zero).min().unwrap_or(SAT)
        }
        TimeExpr::Product { factors } => {
            let mut acc: i32 = -1;
            for f in factors {
                acc = (acc + vanishing_order_at_zero(f) + 1).min(SAT);
            }
            if factors.is_empty() {
                -1
            } else {
                acc
            }
        }
    }
}

/// Checks every structural assumption of the model; side-effect free and
/// idempotent. Malformed references are reported, not thrown.
pub fn validate(net: &Network) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let dim = net.dim.dim();
    let t_samples = 65;
    let horizon = net.horizon;

    if net.horizon <= 0.0 {
        rep.push(ViolationKind::Structure, "horizon T must be positive".into());
    }
    if net.alpha <= 0.0 {
        rep.push(ViolationKind::Structure, format!("alpha must be positive, got {}", net.alpha));
    }

    // Duplicate ids.
    let mut seen = HashSet::new();
    for v in &net.vertices {
        if !seen.insert(v.id) {
            rep.push(ViolationKind::Structure, format!("duplicate vertex id {}", v.id));
        }
    }
    let mut seen = HashSet::new();
    for e in &net.edges {
        if !seen.insert(e.id) {
            rep.push(ViolationKind::Structure, format!("duplicate edge id {}", e.id));
        }
    }

    // Vertices.
    for v in &net.vertices {
        if v.position.len() != dim {
            rep.push(
                ViolationKind::Geometry,
                format!("vertex {}: position has {} coordinates, expected {}", v.id, v.position.len(), dim),
            );
        }
        if v.kind == VertexKind::Interior {
            match v.ell0 {
                None => rep.push(
                    ViolationKind::Geometry,
                    format!("interior vertex {} has no ell0", v.id),
                ),
                Some(l0) if !(0.0 < l0 && l0 < 1.0 / 3.0) => rep.push(
                    ViolationKind::Geometry,
                    format!("vertex {}: ell0 = {} outside (0, 1/3)", v.id, l0),
                ),
                _ => {}
            }
        }
    }

    // Edges: sizes, references, axis alignment.
    let mut resolved_edges = Vec::new();
    for (i, e) in net.edges.iter().enumerate() {
        if e.length <= 0.0 {
            rep.push(ViolationKind::Geometry, format!("edge {}: length {} not positive", e.id, e.length));
        }
        if e.radius <= 0.0 {
            rep.push(ViolationKind::Geometry, format!("edge {}: radius {} not positive", e.id, e.radius));
        }
        let from_ok = net.vertex_index(e.from).is_some();
        let to_ok = net.vertex_index(e.to).is_some();
        if let Some(fi) = net.vertex_index(e.from) {
            if net.vertices[fi].kind != VertexKind::Interior {
                rep.push(
                    ViolationKind::Structure,
                    format!("edge {}: from-vertex {} must be an interior node", e.id, e.from),
                );
            }
        } else {
            rep.push(ViolationKind::Structure, format!("edge {}: dangling vertex id {}", e.id, e.from));
        }
        if !to_ok {
            rep.push(ViolationKind::Structure, format!("edge {}: dangling vertex id {}", e.id, e.to));
        }
        if from_ok && to_ok {
            match net.edge_direction(i) {
                Ok((axis, sign)) => {
                    let fi = net.vertex_index(e.from).unwrap();
                    let ti = net.vertex_index(e.to).unwrap();
                    let d = (net.vertices[ti].position[axis] - net.vertices[fi].position[axis]).abs();
                    if (d - e.length).abs() > 1e-9 * e.length.max(1.0) {
                        rep.push(
                            ViolationKind::Geometry,
                            format!("edge {}: declared length {} but endpoints are {} apart", e.id, e.length, d),
                        );
                    }
                    resolved_edges.push((i, axis, sign));
                }
                Err(err) => rep.push(ViolationKind::Geometry, err.to_string()),
            }
        }
    }

    // Interior vertex degree, port disjointness and fit.
    for vi in net.interior_vertices() {
        let v = &net.vertices[vi];
        let inc = net.incident(vi);
        if inc.len() < 2 {
            rep.push(
                ViolationKind::Structure,
                format!("interior vertex {} has {} incident edges, needs at least 2", v.id, inc.len()),
            );
        }
        let Some(ell0) = v.ell0 else { continue };
        // Direction slots (axis, sign) must be unique; ports must fit.
        let mut slots = HashSet::new();
        let mut axes = HashSet::new();
        let mut ports = Vec::new();
        for i in &inc {
            let Ok((axis, sign)) = net.edge_direction(i.edge) else { continue };
            let (paxis, psign) = match i.end {
                EdgeEnd::FromEnd => (axis, sign),
                EdgeEnd::ToEnd => (axis, -sign),
            };
            if !slots.insert((paxis, psign as i8)) {
                rep.push(
                    ViolationKind::Geometry,
                    format!("vertex {}: two ports share the direction (axis {}, sign {})", v.id, paxis, psign),
                );
            }
            axes.insert(paxis);
            ports.push((net.edges[i.edge].id, net.edges[i.edge].radius));
        }
        if axes.len() > 1 {
            for (eid, h) in &ports {
                if *h > ell0 + 1e-12 {
                    rep.push(
                        ViolationKind::Geometry,
                        format!(
                            "vertex {}: port of edge {} (half-width {}) does not fit the node face (ell0 = {})",
                            v.id, eid, h, ell0
                        ),
                    );
                }
            }
        }
    }

    // Connectivity over resolvable endpoints.
    if !net.vertices.is_empty() {
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for e in &net.edges {
            if net.vertex_index(e.from).is_some() && net.vertex_index(e.to).is_some() {
                adj.entry(e.from).or_default().push(e.to);
                adj.entry(e.to).or_default().push(e.from);
            }
        }
        let start = net.vertices[0].id;
        let mut seen = HashSet::from([start]);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in adj.get(&u).into_iter().flatten() {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        if seen.len() != net.vertices.len() {
            rep.push(
                ViolationKind::Topology,
                format!("graph is disconnected: reached {} of {} vertices", seen.len(), net.vertices.len()),
            );
        }
    }

    // Velocity profiles.
    for (i, e) in net.edges.iter().enumerate() {
        let Some(vel) = &e.velocity else {
            rep.push(ViolationKind::Velocity, format!("edge {} has no velocity profile", e.id));
            continue;
        };
        if !(vel.plateau > 0.0 && vel.plateau < e.length) {
            rep.push(
                ViolationKind::Velocity,
                format!("edge {}: plateau width {} outside (0, length)", e.id, vel.plateau),
            );
        }
        if let AxialShape::Bump { center, width, amp } = vel.shape {
            if amp <= -1.0 {
                rep.push(ViolationKind::Velocity, format!("edge {}: shape amplitude {} ≤ −1 flips the sign", e.id, amp));
            }
            if center - width < vel.plateau || center + width > e.length - vel.plateau {
                rep.push(
                    ViolationKind::Velocity,
                    format!("edge {}: shape bump leaves the interior plateau region", e.id),
                );
            }
        }
        if let Some(vbar) = &vel.vbar {
            if vbar.window.lo < vel.plateau || vbar.window.hi > e.length - vel.plateau {
                rep.push(
                    ViolationKind::Velocity,
                    format!("edge {}: transverse field support leaves (plateau, length − plateau)", e.id),
                );
            }
            if net.dim == DimensionMode::Two && vbar.pattern == TransversePattern::GradSaddle {
                rep.push(ViolationKind::Velocity, format!("edge {}: saddle pattern is 3D-only", e.id));
            }
        }
        // Single sign and role consistency.
        let mut sign = 0.0_f64;
        let mut mixed = false;
        for k in 0..t_samples {
            let t = horizon * k as f64 / (t_samples - 1) as f64;
            for j in 0..33 {
                let y = e.length * j as f64 / 32.0;
                let val = vel.v1(y, t);
                if val == 0.0 {
                    continue;
                }
                if sign == 0.0 {
                    sign = val.signum();
                } else if sign != val.signum() {
                    mixed = true;
                }
            }
        }
        if mixed {
            rep.push(ViolationKind::Velocity, format!("edge {}: longitudinal velocity changes sign", e.id));
        } else if sign == 0.0 {
            rep.push(ViolationKind::Velocity, format!("edge {}: longitudinal velocity is identically zero", e.id));
        } else {
            let role_sign = match e.role {
                EdgeRole::Inlet => -1.0,
                EdgeRole::Outlet => 1.0,
            };
            if sign != role_sign {
                rep.push(
                    ViolationKind::Velocity,
                    format!(
                        "edge {}: role {:?} inconsistent with velocity sign {}",
                        e.id, e.role, sign
                    ),
                );
            }
        }
        // Outlet edges feeding an outer Dirichlet end need a positive frozen
        // speed there for the boundary layer.
        let to_outer = net
            .vertex_index(e.to)
            .map(|ti| net.vertices[ti].kind == VertexKind::Outer)
            .unwrap_or(false);
        if e.role == EdgeRole::Outlet && to_outer {
            let min_speed = (0..t_samples)
                .map(|k| vel.near_to(horizon * k as f64 / (t_samples - 1) as f64))
                .fold(f64::INFINITY, f64::min);
            if min_speed <= 0.0 {
                rep.push(
                    ViolationKind::Velocity,
                    format!("edge {}: outlet frozen speed must stay positive, min {}", e.id, min_speed),
                );
            }
        }
        let _ = i;
    }

    // Kirchhoff compatibility at every interior vertex.
    for vi in net.interior_vertices() {
        let v = &net.vertices[vi];
        let inc = net.incident(vi);
        if inc.iter().any(|i| net.edges[i.edge].velocity.is_none()) {
            continue;
        }
        let mut worst_defect = 0.0_f64;
        let mut worst_scale = 0.0_f64;
        for k in 0..129 {
            let t = horizon * k as f64 / 128.0;
            let mut sum = 0.0;
            let mut scale = 0.0_f64;
            for i in &inc {
                let term = net.weight(&net.edges[i.edge]) * net.near_speed(*i, t);
                sum += term;
                scale = scale.max(term.abs());
            }
            if sum.abs() > worst_defect {
                worst_defect = sum.abs();
                worst_scale = scale;
            }
        }
        if worst_defect > COMPAT_REL_TOL * worst_scale.max(f64::MIN_POSITIVE) {
            rep.push(
                ViolationKind::Compatibility,
                format!("compatibility violated at vertex {}, defect {}", v.id, worst_defect),
            );
        }
    }

    // Edge nonlinearities.
    for e in &net.edges {
        let Some(phi) = &e.phi else { continue };
        let w = &phi.window;
        if !(0.0 < w.lo && w.lo < w.hi && w.hi < e.length) {
            rep.push(
                ViolationKind::Nonlinearity,
                format!("edge {}: nonlinearity window [{}, {}] not inside (0, {})", e.id, w.lo, w.hi, e.length),
            );
        }
        if !(w.margin > 0.0 && 2.0 * w.margin <= w.hi - w.lo + 1e-12) {
            rep.push(
                ViolationKind::Nonlinearity,
                format!("edge {}: window margin {} invalid", e.id, w.margin),
            );
        }
        // A4 matching at t = 0.
        let zero_at_t0 = phi.time.eval(0.0).abs() <= 1e-12
            || (phi.time.is_constant() && phi.state.eval(0.0).abs() <= 1e-12);
        if !zero_at_t0 {
            rep.push(
                ViolationKind::Nonlinearity,
                format!("edge {}: initial matching of nonlinearity violated (phi(.,0) != 0)", e.id),
            );
        }
        if net.require_monotone_phi {
            for k in -8..=8 {
                let s = k as f64 * 0.5;
                if phi.state.deriv(s) < -1e-12 {
                    rep.push(
                        ViolationKind::Nonlinearity,
                        format!("edge {}: nonlinearity not monotone at s = {}", e.id, s),
                    );
                    break;
                }
            }
        }
    }

    // Node nonlinearities (sorted for deterministic report order).
    let mut node_phi_ids: Vec<usize> = net.node_phi.keys().copied().collect();
    node_phi_ids.sort_unstable();
    for vid in node_phi_ids {
        let phi = &net.node_phi[&vid];
        match net.vertex_index(vid) {
            None => rep.push(ViolationKind::Nonlinearity, format!("node nonlinearity references missing vertex {}", vid)),
            Some(vi) if net.vertices[vi].kind != VertexKind::Interior => rep.push(
                ViolationKind::Nonlinearity,
                format!("node nonlinearity on non-interior vertex {}", vid),
            ),
            _ => {}
        }
        if !(0.0 < phi.clearance && phi.clearance < 1.0) {
            rep.push(
                ViolationKind::Nonlinearity,
                format!("node nonlinearity at vertex {}: clearance {} outside (0,1)", vid, phi.clearance),
            );
        }
        let zero_at_t0 = phi.time.eval(0.0).abs() <= 1e-12
            || (phi.time.is_constant() && phi.state.eval(0.0).abs() <= 1e-12);
        if !zero_at_t0 {
            rep.push(
                ViolationKind::Nonlinearity,
                format!("vertex {}: initial matching of node nonlinearity violated", vid),
            );
        }
        if net.request_first_order && vanishing_order_at_zero(&phi.time) < 2 && !phi.time.is_constant()
        {
            rep.push(
                ViolationKind::Nonlinearity,
                format!(
                    "vertex {}: node nonlinearity time factor must be twice-flat at t=0 for first-order correctors",
                    vid
                ),
            );
        }
    }

    // Inlet data.
    for e in &net.edges {
        let Some(data) = &e.inlet else { continue };
        let mut qmin = f64::INFINITY;
        for k in 0..t_samples {
            let t = horizon * k as f64 / (t_samples - 1) as f64;
            qmin = qmin.min(data.q.eval(t));
        }
        if qmin < -1e-12 {
            rep.push(
                ViolationKind::InletData,
                format!("inlet data negative on edge {}, min {}", e.id, qmin),
            );
        }
        let guaranteed = vanishing_order_at_zero(&data.q);
        let required = data.matching_order.min(4) as i32;
        if guaranteed < required {
            let order = (guaranteed + 1).max(0) as u8;
            let h = 1e-3 * horizon.max(1.0);
            let d = derivative_at_zero(&data.q, order, h);
            rep.push(
                ViolationKind::InletData,
                format!("matching condition order {} violated on edge {}, value {}", order, e.id, d),
            );
        }
    }

    // Flow topology between interior vertices must be acyclic.
    if let Err(msg) = flow_topology_order(net) {
        rep.push(ViolationKind::Topology, msg);
    }

    rep
}

/// Interior vertices ordered so every inter-node edge flows from an earlier
/// to a later vertex. Errors on cycles.
pub fn flow_topology_order(net: &Network) -> std::result::Result<Vec<usize>, String> {
    let interior: Vec<usize> = net.interior_vertices().collect();
    let pos: HashMap<usize, usize> = interior.iter().enumerate().map(|(k, &vi)| (net.vertices[vi].id, k)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); interior.len()];
    let mut indeg = vec![0usize; interior.len()];
    for (ei, e) in net.edges.iter().enumerate() {
        let (Some(&a), Some(&b)) = (pos.get(&e.from), pos.get(&e.to)) else { continue };
        // Flow direction from the velocity sign: v1 > 0 flows from → to.
        let Some(vel) = &e.velocity else { continue };
        let sgn = vel.near_from(0.25 * net.horizon) + vel.near_from(0.75 * net.horizon);
        let (up, down) = if sgn >= 0.0 { (a, b) } else { (b, a) };
        adj[up].push(down);
        indeg[down] += 1;
        let _ = ei;
    }
    let mut queue: Vec<usize> = (0..interior.len()).filter(|&k| indeg[k] == 0).collect();
    let mut order = Vec::new();
    while let Some(k) = queue.pop() {
        order.push(interior[k]);
        for &d in &adj[k] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                queue.push(d);
            }
        }
    }
    if order.len() != interior.len() {
        return Err("flow topology between interior vertices contains a cycle".into());
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::presets::two_edge_channel;

    #[test]
    fn balanced_channel_is_valid() {
        let net = two_edge_channel(-1.0, 1.0);
        let rep = validate(&net);
        assert!(rep.is_valid(), "unexpected violations:\n{}", rep);
    }

    #[test]
    fn unbalanced_channel_reports_compatibility_defect() {
        let net = two_edge_channel(-1.0, 1.5);
        let rep = validate(&net);
        assert!(rep.contains("compatibility violated at vertex 0"), "{}", rep);
        // Defect is ω·(−1 + 1.5) = 0.25·0.5 = 0.125 with h = 0.25 weights.
        let d = net.flux_balance_defect(0.3);
        assert!((d - 0.125).abs() < 1e-14);
    }

    #[test]
    fn linear_inlet_data_violates_matching_order_one() {
        let mut net = two_edge_channel(-1.0, 1.0);
        net.edges[0].inlet = Some(InletData {
            q: TimeExpr::Poly { coeffs: vec![0.0, 1.0] },
            matching_order: 1,
        });
        let rep = validate(&net);
        assert!(rep.contains("matching condition order 1 violated on edge 0"), "{}", rep);
    }

    #[test]
    fn flux_balance_examples() {
        // ω = (1,1,1), 𝚟 = (1,1,−2) → 0; signs are near-vertex frame values.
        let weights = [1.0, 1.0, 1.0];
        let speeds = [1.0, 1.0, -2.0];
        let sum: f64 = weights.iter().zip(&speeds).map(|(w, v)| w * v).sum();
        assert_eq!(sum, 0.0);
        // ω = (1,4), 𝚟 = (−4,1) → 0.
        assert_eq!(1.0 * -4.0 + 4.0 * 1.0, 0.0);
        // ω = (1,1), 𝚟 = (−1,−1) → −2.
        assert_eq!(1.0 * -1.0 + 1.0 * -1.0, -2.0);
    }

    #[test]
    fn classify_two_edge_channel() {
        let net = two_edge_channel(-1.0, 1.0);
        assert_eq!(net.classify_edges().unwrap(), (1, 2));
    }

    #[test]
    fn dangling_vertex_is_reported_not_thrown() {
        let mut net = two_edge_channel(-1.0, 1.0);
        net.edges[1].to = 99;
        let rep = validate(&net);
        assert!(rep.contains("dangling vertex id 99"), "{}", rep);
    }

    #[test]
    fn validate_is_idempotent() {
        let net = two_edge_channel(-1.0, 1.5);
        let a = validate(&net);
        let b = validate(&net);
        assert_eq!(a.violations.len(), b.violations.len());
    }

    #[test]
    fn defect_scales_linearly_with_speeds() {
        let base = two_edge_channel(-1.0, 1.5);
        let scaled = two_edge_channel(-3.0, 4.5);
        let t = 0.7;
        assert!((scaled.flux_balance_defect(t) - 3.0 * base.flux_balance_defect(t)).abs() < 1e-12);
    }

    #[test]
    fn vanishing_order_of_catalogue_terms() {
        assert_eq!(vanishing_order_at_zero(&TimeExpr::Poly { coeffs: vec![0.0, 1.0] }), 0);
        assert_eq!(vanishing_order_at_zero(&TimeExpr::Poly { coeffs: vec![0.0, 0.0, 1.0] }), 1);
        assert_eq!(vanishing_order_at_zero(&TimeExpr::Ramp { amp: 1.0, rise: 1.0, order: 2 }), 2);
        assert_eq!(vanishing_order_at_zero(&TimeExpr::Ramp { amp: 1.0, rise: 1.0, order: 4 }), 4);
        // t² · sin(t): orders add (one extra from the product rule).
        let prod = TimeExpr::Product {
            factors: vec![
                TimeExpr::Poly { coeffs: vec![0.0, 0.0, 1.0] },
                TimeExpr::Sin { amp: 1.0, omega: 1.0, phase: 0.0 },
            ],
        };
        assert_eq!(vanishing_order_at_zero(&prod), 2);
    }
}
