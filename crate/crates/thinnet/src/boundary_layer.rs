//! Closed-form outlet boundary layers.
//!
//! At an outlet's outer Dirichlet end the hyperbolic limit misses the
//! prescribed value; the mismatch is repaired by exponentially decaying
//! layers in the stretched coordinate η₁ = (ℓ − y₁)/ε:
//!
//!   Π₀(η₁, t) = Φ₀(t) e^{−v η₁},
//!   Π₁(η₁, t) = (Φ₁ + (Φ₀ v̇/v² − Φ̇₀/v) η₁ + (Φ₀ v̇/(2v)) η₁²) e^{−v η₁},
//!
//! solving Π″ + vΠ′ = 0 and Π₁″ + vΠ₁′ = ∂ₜΠ₀ with Π_k(0, t) = Φ_k(t),
//! where v = v(t) is the frozen outlet speed and Φ₀ = q − w₀(ℓ, ·),
//! Φ₁ = −w₁(ℓ, ·).

use crate::error::Error;
use crate::expr::TimeExpr;
use crate::grid::{linear_fit, Series};
use crate::Result;

/// A scalar function of time, either a catalogue expression (analytic
/// derivative) or grid samples (centered-difference derivative).
#[derive(Debug, Clone)]
pub enum TimeFn {
    Expr(TimeExpr),
    Sampled(Series),
}

impl TimeFn {
    pub fn constant(v: f64) -> Self {
        TimeFn::Expr(TimeExpr::constant(v))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Expr(e) => e.eval(t),
            TimeFn::Sampled(s) => s.eval(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            TimeFn::Expr(e) => e.deriv(t),
            TimeFn::Sampled(s) => s.deriv(t),
        }
    }
}

/// Boundary-layer data of one outlet edge.
#[derive(Debug, Clone)]
pub struct BoundaryLayer {
    /// Φ₀(t) = q(t) − w₀(ℓ, t).
    pub phi0: TimeFn,
    /// Φ₁(t) = −w₁(ℓ, t); zero when no first-order corrector is carried.
    pub phi1: TimeFn,
    /// Frozen outlet speed v(t) ≥ θ₀ > 0.
    pub speed: TimeFn,
}

impl BoundaryLayer {
    pub fn new(phi0: TimeFn, phi1: TimeFn, speed: TimeFn) -> Self {
        Self { phi0, phi1, speed }
    }

    fn checked_speed(&self, t: f64) -> Result<f64> {
        let v = self.speed.eval(t);
        if v <= 0.0 {
            return Err(Error::Positivity { value: v, t });
        }
        Ok(v)
    }

    /// Π₀(η₁, t).
    pub fn pi0(&self, eta: f64, t: f64) -> Result<f64> {
        let v = self.checked_speed(t)?;
        Ok(self.phi0.eval(t) * (-v * eta).exp())
    }

    /// Π₁(η₁, t).
    pub fn pi1(&self, eta: f64, t: f64) -> Result<f64> {
        let v = self.checked_speed(t)?;
        let (a, b) = self.pi1_coeffs(t, v);
        let p = self.phi1.eval(t) + a * eta + b * eta * eta;
        Ok(p * (-v * eta).exp())
    }

    fn pi1_coeffs(&self, t: f64, v: f64) -> (f64, f64) {
        let phi0 = self.phi0.eval(t);
        let dphi0 = self.phi0.deriv(t);
        let dv = self.speed.deriv(t);
        let a = phi0 * dv / (v * v) - dphi0 / v;
        let b = phi0 * dv / (2.0 * v);
        (a, b)
    }

    /// ∂ₜΠ₀, needed as the source of the Π₁ problem.
    pub fn pi0_dt(&self, eta: f64, t: f64) -> Result<f64> {
        let v = self.checked_speed(t)?;
        let phi0 = self.phi0.eval(t);
        let dphi0 = self.phi0.deriv(t);
        let dv = self.speed.deriv(t);
        Ok((dphi0 - phi0 * dv * eta) * (-v * eta).exp())
    }

    /// Analytic ∂²_η Π_k + v ∂_η Π_k − (k = 1 ? ∂ₜΠ₀ : 0) at one point.
    fn residual_at(&self, k: u8, eta: f64, t: f64) -> Result<f64> {
        let v = self.checked_speed(t)?;
        match k {
            0 => {
                // Π₀″ + vΠ₀′ = (v² − v²)Π₀ = 0 identically; evaluate anyway.
                let pi = self.phi0.eval(t) * (-v * eta).exp();
                Ok(v * v * pi - v * v * pi)
            }
            1 => {
                let (a, b) = self.pi1_coeffs(t, v);
                let dp = a + 2.0 * b * eta;
                let d2p = 2.0 * b;
                let e = (-v * eta).exp();
                // (P e^{−vη})″ + v(P e^{−vη})′ = (P″ − vP′) e^{−vη}.
                let lhs = (d2p - v * dp) * e;
                Ok(lhs - self.pi0_dt(eta, t)?)
            }
            _ => Err(Error::Config(format!("layer order {k} not built"))),
        }
    }
}

/// Max residual of the layer ODE over an (η, t) lattice.
pub fn layer_residual(
    layer: &BoundaryLayer,
    k: u8,
    eta_max: f64,
    n_eta: usize,
    horizon: f64,
    n_t: usize,
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for it in 0..=n_t {
        let t = horizon * it as f64 / n_t as f64;
        for ie in 0..=n_eta {
            let eta = eta_max * ie as f64 / n_eta as f64;
            worst = worst.max(layer.residual_at(k, eta, t)?.abs());
        }
    }
    Ok(worst)
}

/// Least-squares slope of log|Π₀(·, t)|; equals −v(t) for nonzero Φ₀.
pub fn decay_slope(layer: &BoundaryLayer, t: f64, eta_max: f64, n: usize) -> Result<Option<f64>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..=n {
        let eta = eta_max * i as f64 / n as f64;
        let p = layer.pi0(eta, t)?;
        if p.abs() > 1e-280 {
            xs.push(eta);
            ys.push(p.abs().ln());
        }
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    Ok(Some(linear_fit(&xs, &ys).0))
}
