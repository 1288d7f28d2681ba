//! Canonical example networks used across tests, docs and the shipped
//! config files. All are 2D-analogue geometries on the coordinate axes.

use super::*;
use crate::expr::TimeExpr;

fn options(horizon: f64, alpha: f64) -> Options {
    Options {
        dimension_mode: DimensionMode::Two,
        horizon,
        alpha,
        outlet_split: OutletSplit::Equal,
        require_monotone_phi: false,
        request_first_order: false,
    }
}

fn plain_velocity(edge: usize, speed: TimeExpr) -> EdgeVelocitySpec {
    EdgeVelocitySpec {
        edge,
        profile: VelocityProfile {
            near_vertex: speed,
            shape: AxialShape::Uniform,
            plateau: 0.1,
            vbar: None,
        },
    }
}

/// Constant speed, optionally modulated by (1 + 0.3 sin(π t / T)).
fn speed(value: f64, modulated: bool, horizon: f64) -> TimeExpr {
    if modulated {
        TimeExpr::Product {
            factors: vec![
                TimeExpr::constant(value),
                TimeExpr::Sum {
                    terms: vec![
                        TimeExpr::one(),
                        TimeExpr::Sin { amp: 0.3, omega: std::f64::consts::PI / horizon, phase: 0.0 },
                    ],
                },
            ],
        }
    } else {
        TimeExpr::constant(value)
    }
}

/// Straight two-edge channel along the x axis: one inlet, one outlet,
/// ℓ = 1 each, h = ℓ₀ = 0.25, q(t) = t² on the inlet.
pub fn two_edge_channel(v_in: f64, v_out: f64) -> Network {
    let spec = NetworkSpec {
        options: options(2.0, 1.0),
        vertices: vec![
            Vertex { id: 0, kind: VertexKind::Interior, position: vec![0.0, 0.0], ell0: Some(0.25) },
            Vertex { id: 1, kind: VertexKind::Outer, position: vec![-1.0, 0.0], ell0: None },
            Vertex { id: 2, kind: VertexKind::Outer, position: vec![1.0, 0.0], ell0: None },
        ],
        edges: vec![
            Edge { id: 0, from: 0, to: 1, length: 1.0, radius: 0.25, role: EdgeRole::Inlet },
            Edge { id: 1, from: 0, to: 2, length: 1.0, radius: 0.25, role: EdgeRole::Outlet },
        ],
        velocity: vec![
            plain_velocity(0, TimeExpr::constant(v_in)),
            plain_velocity(1, TimeExpr::constant(v_out)),
        ],
        nonlinearity: vec![],
        node_nonlinearity: vec![],
        inlet_data: vec![InletSpec {
            edge: 0,
            data: InletData { q: TimeExpr::Poly { coeffs: vec![0.0, 0.0, 1.0] }, matching_order: 1 },
        }],
    };
    Network::from_spec(spec)
}

/// The principal verification channel: unit speeds, a C⁴ inlet ramp and a
/// windowed linear boundary nonlinearity of gain `phi_gain` on both edges.
///
/// T = 2.5 so the concentration front crosses the junction and activates the
/// outlet boundary layer inside the horizon.
pub fn verification_channel(alpha: f64, phi_gain: f64) -> Network {
    let mut spec = NetworkSpec {
        options: options(2.5, alpha),
        vertices: vec![
            Vertex { id: 0, kind: VertexKind::Interior, position: vec![0.0, 0.0], ell0: Some(0.25) },
            Vertex { id: 1, kind: VertexKind::Outer, position: vec![-1.0, 0.0], ell0: None },
            Vertex { id: 2, kind: VertexKind::Outer, position: vec![1.0, 0.0], ell0: None },
        ],
        edges: vec![
            Edge { id: 0, from: 0, to: 1, length: 1.0, radius: 0.25, role: EdgeRole::Inlet },
            Edge { id: 1, from: 0, to: 2, length: 1.0, radius: 0.25, role: EdgeRole::Outlet },
        ],
        velocity: vec![
            plain_velocity(0, TimeExpr::constant(-1.0)),
            plain_velocity(1, TimeExpr::constant(1.0)),
        ],
        nonlinearity: vec![],
        node_nonlinearity: vec![],
        inlet_data: vec![InletSpec {
            edge: 0,
            data: InletData {
                q: TimeExpr::Ramp { amp: 1.0, rise: 1.0, order: 4 },
                matching_order: 4,
            },
        }],
    };
    if phi_gain != 0.0 {
        for edge in [0usize, 1] {
            spec.nonlinearity.push(EdgePhiSpec {
                edge,
                phi: EdgePhi {
                    state: StateFactor::Linear { k: phi_gain },
                    window: Window { lo: 0.3, hi: 0.6, margin: 0.1 },
                    cross: CrossFactor::One,
                    time: TimeExpr::one(),
                },
            });
        }
    }
    Network::from_spec(spec)
}

/// Single-node star with `m` inlets and `outlets` outlet edges on the four
/// axis directions (2D mode, so m + outlets ≤ 4). Speeds balance exactly;
/// `modulated` applies a common positive time factor to all of them.
pub fn star(m: usize, outlets: usize, modulated: bool) -> Network {
    assert!(m >= 1 && outlets >= 1 && m + outlets <= 4);
    let horizon = 2.0;
    let dirs: [(f64, f64); 4] = [(-1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0)];
    let mut vertices = vec![Vertex {
        id: 0,
        kind: VertexKind::Interior,
        position: vec![0.0, 0.0],
        ell0: Some(0.25),
    }];
    let mut edges = Vec::new();
    let mut velocity = Vec::new();
    let mut inlet_data = Vec::new();
    // Inlet speeds −1 each; outlets share the balancing flux equally.
    let out_speed = m as f64 / outlets as f64;
    for k in 0..(m + outlets) {
        let (dx, dy) = dirs[k];
        let vid = k + 1;
        vertices.push(Vertex {
            id: vid,
            kind: VertexKind::Outer,
            position: vec![dx, dy],
            ell0: None,
        });
        let inlet = k < m;
        edges.push(Edge {
            id: k,
            from: 0,
            to: vid,
            length: 1.0,
            radius: 0.25,
            role: if inlet { EdgeRole::Inlet } else { EdgeRole::Outlet },
        });
        let v = if inlet { -1.0 } else { out_speed };
        velocity.push(plain_velocity(k, speed(v, modulated, horizon)));
        if inlet {
            // Stagger the inlet histories so traces differ between edges.
            let amp = 1.0 + 0.5 * k as f64;
            inlet_data.push(InletSpec {
                edge: k,
                data: InletData {
                    q: TimeExpr::Ramp { amp, rise: 0.8 + 0.3 * k as f64, order: 2 },
                    matching_order: 2,
                },
            });
        }
    }
    Network::from_spec(NetworkSpec {
        options: options(horizon, 1.0),
        vertices,
        edges,
        velocity,
        nonlinearity: vec![],
        node_nonlinearity: vec![],
        inlet_data,
    })
}

/// Two-node feed-forward chain: two inlets into node A, one transfer edge
/// A → B, two outlets leaving B.
pub fn two_node_chain() -> Network {
    let horizon = 4.0;
    let spec = NetworkSpec {
        options: options(horizon, 1.0),
        vertices: vec![
            Vertex { id: 0, kind: VertexKind::Interior, position: vec![0.0, 0.0], ell0: Some(0.2) },
            Vertex { id: 1, kind: VertexKind::Interior, position: vec![1.5, 0.0], ell0: Some(0.2) },
            Vertex { id: 2, kind: VertexKind::Outer, position: vec![-1.0, 0.0], ell0: None },
            Vertex { id: 3, kind: VertexKind::Outer, position: vec![0.0, -1.0], ell0: None },
            Vertex { id: 4, kind: VertexKind::Outer, position: vec![2.5, 0.0], ell0: None },
            Vertex { id: 5, kind: VertexKind::Outer, position: vec![1.5, 1.0], ell0: None },
        ],
        edges: vec![
            Edge { id: 0, from: 0, to: 2, length: 1.0, radius: 0.15, role: EdgeRole::Inlet },
            Edge { id: 1, from: 0, to: 3, length: 1.0, radius: 0.15, role: EdgeRole::Inlet },
            Edge { id: 2, from: 0, to: 1, length: 1.5, radius: 0.15, role: EdgeRole::Outlet },
            Edge { id: 3, from: 1, to: 4, length: 1.0, radius: 0.15, role: EdgeRole::Outlet },
            Edge { id: 4, from: 1, to: 5, length: 1.0, radius: 0.15, role: EdgeRole::Outlet },
        ],
        velocity: vec![
            plain_velocity(0, TimeExpr::constant(-1.0)),
            plain_velocity(1, TimeExpr::constant(-1.0)),
            plain_velocity(2, TimeExpr::constant(2.0)),
            plain_velocity(3, TimeExpr::constant(1.0)),
            plain_velocity(4, TimeExpr::constant(1.0)),
        ],
        nonlinearity: vec![],
        node_nonlinearity: vec![],
        inlet_data: vec![
            InletSpec {
                edge: 0,
                data: InletData {
                    q: TimeExpr::Ramp { amp: 1.0, rise: 1.0, order: 2 },
                    matching_order: 2,
                },
            },
            InletSpec {
                edge: 1,
                data: InletData {
                    q: TimeExpr::Ramp { amp: 0.5, rise: 1.5, order: 2 },
                    matching_order: 2,
                },
            },
        ],
    };
    Network::from_spec(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate;

    #[test]
    fn presets_are_valid() {
        for net in [
            two_edge_channel(-1.0, 1.0),
            verification_channel(1.0, 1.0),
            star(1, 2, false),
            star(2, 1, true),
            star(2, 2, false),
            two_node_chain(),
        ] {
            let rep = validate(&net);
            assert!(rep.is_valid(), "violations:\n{}", rep);
        }
    }

    #[test]
    fn star_classification() {
        assert_eq!(star(1, 2, false).classify_edges().unwrap(), (1, 3));
        assert_eq!(star(2, 1, false).classify_edges().unwrap(), (2, 3));
        assert_eq!(star(2, 2, false).classify_edges().unwrap(), (2, 4));
    }

    #[test]
    fn chain_topology_order_runs_downstream() {
        let net = two_node_chain();
        let order = flow_topology_order(&net).unwrap();
        assert_eq!(order.len(), 2);
        assert_eq!(net.vertices[order[0]].id, 0);
        assert_eq!(net.vertices[order[1]].id, 1);
    }
}
