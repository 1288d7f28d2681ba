//! A small catalogue of evaluable scalar expressions.
//!
//! Model functions (near-vertex speeds, inlet data, time modulations) are
//! registered from this catalogue in the network spec file instead of being
//! arbitrary code, so runs are reproducible from the config alone. Every
//! expression evaluates its value and its first time derivative in closed
//! form.

use serde::{Deserialize, Serialize};

use crate::cutoff::{smoothstep_c2, smoothstep_c2_d1, smoothstep_c4, smoothstep_c4_d1};

/// Scalar function of one variable (usually time) with an analytic derivative.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeExpr {
    /// Constant value.
    Constant { value: f64 },
    /// Polynomial Σ coeffs[k] tᵏ.
    Poly { coeffs: Vec<f64> },
    /// amp · sin(omega t + phase).
    Sin { amp: f64, omega: f64, phase: f64 },
    /// Smooth ramp from 0 to amp over [0, rise], constant afterwards.
    ///
    /// `order` = 2 gives a C² ramp (leading t³), `order` = 4 a C⁴ ramp
    /// (leading t⁵) for problems needing higher matching at t = 0.
    Ramp { amp: f64, rise: f64, order: u8 },
    /// Sum of sub-expressions.
    Sum { terms: Vec<TimeExpr> },
    /// Product of sub-expressions.
    Product { factors: Vec<TimeExpr> },
}

impl TimeExpr {
    pub fn constant(value: f64) -> Self {
        TimeExpr::Constant { value }
    }

    pub fn zero() -> Self {
        TimeExpr::Constant { value: 0.0 }
    }

    pub fn one() -> Self {
        TimeExpr::Constant { value: 1.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeExpr::Constant { value } => *value,
            TimeExpr::Poly { coeffs } => {
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * t + c;
                }
                acc
            }
            TimeExpr::Sin { amp, omega, phase } => amp * (omega * t + phase).sin(),
            TimeExpr::Ramp { amp, rise, order } => {
                let u = t / rise;
                match order {
                    4 => amp * smoothstep_c4(u),
                    _ => amp * smoothstep_c2(u),
                }
            }
            TimeExpr::Sum { terms } => terms.iter().map(|e| e.eval(t)).sum(),
            TimeExpr::Product { factors } => factors.iter().map(|e| e.eval(t)).product(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            TimeExpr::Constant { .. } => 0.0,
            TimeExpr::Poly { coeffs } => {
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * t + k as f64 * c;
                }
                acc
            }
            TimeExpr::Sin { amp, omega, phase } => amp * omega * (omega * t + phase).cos(),
            TimeExpr::Ramp { amp, rise, order } => {
                let u = t / rise;
                let d = match order {
                    4 => smoothstep_c4_d1(u),
                    _ => smoothstep_c2_d1(u),
                };
                amp * d / rise
            }
            TimeExpr::Sum { terms } => terms.iter().map(|e| e.deriv(t)).sum(),
            TimeExpr::Product { factors } => {
                let mut total = 0.0;
                for (i, fi) in factors.iter().enumerate() {
                    let mut term = fi.deriv(t);
                    for (j, fj) in factors.iter().enumerate() {
                        if i != j {
                            term *= fj.eval(t);
                        }
                    }
                    total += term;
                }
                total
            }
        }
    }

    /// True when the expression is constant in its argument.
    pub fn is_constant(&self) -> bool {
        match self {
            TimeExpr::Constant { .. } => true,
            TimeExpr::Poly { coeffs } => coeffs.iter().skip(1).all(|&c| c == 0.0),
            TimeExpr::Sin { amp, omega, .. } => *amp == 0.0 || *omega == 0.0,
            TimeExpr::Ramp { amp, .. } => *amp == 0.0,
            TimeExpr::Sum { terms } => terms.iter().all(|e| e.is_constant()),
            TimeExpr::Product { factors } => {
                factors.iter().all(|e| e.is_constant())
                    || factors.iter().any(|e| e.is_constant() && e.eval(0.0) == 0.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(e: &TimeExpr, t: f64) -> f64 {
        let h = 1e-6;
        (e.eval(t + h) - e.eval(t - h)) / (2.0 * h)
    }

    #[test]
    fn poly_eval_and_deriv() {
        let p = TimeExpr::Poly { coeffs: vec![1.0, -2.0, 0.5, 3.0] };
        let t = 0.7;
        assert!((p.eval(t) - (1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t)).abs() < 1e-14);
        assert!((p.deriv(t) - fd(&p, t)).abs() < 1e-7);
    }

    #[test]
    fn product_rule() {
        let e = TimeExpr::Product {
            factors: vec![
                TimeExpr::Poly { coeffs: vec![0.0, 1.0] },
                TimeExpr::Sin { amp: 2.0, omega: 3.0, phase: 0.4 },
            ],
        };
        for &t in &[0.1, 0.5, 1.3] {
            assert!((e.deriv(t) - fd(&e, t)).abs() < 1e-6);
        }
    }

    #[test]
    fn ramp_matching_orders() {
        let r2 = TimeExpr::Ramp { amp: 1.0, rise: 0.5, order: 2 };
        let r4 = TimeExpr::Ramp { amp: 1.0, rise: 0.5, order: 4 };
        // Small-t behaviour: C2 ramp ~ t^3, C4 ramp ~ t^5.
        let t = 1e-3;
        assert!(r2.eval(t) < 2.0e-7);
        assert!(r4.eval(t) < 1e-10);
        assert_eq!(r2.eval(0.5), 1.0);
        assert_eq!(r4.eval(1.0), 1.0);
        for &t in &[0.1, 0.3, 0.45] {
            assert!((r2.deriv(t) - fd(&r2, t)).abs() < 1e-6);
            assert!((r4.deriv(t) - fd(&r4, t)).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_detection() {
        assert!(TimeExpr::constant(3.0).is_constant());
        assert!(TimeExpr::Poly { coeffs: vec![2.0] }.is_constant());
        assert!(!TimeExpr::Poly { coeffs: vec![2.0, 1.0] }.is_constant());
        let prod = TimeExpr::Product {
            factors: vec![TimeExpr::zero(), TimeExpr::Sin { amp: 1.0, omega: 1.0, phase: 0.0 }],
        };
        assert!(prod.is_constant());
    }

    #[test]
    fn serde_round_trip() {
        let e = TimeExpr::Sum {
            terms: vec![
                TimeExpr::Ramp { amp: 0.5, rise: 1.0, order: 2 },
                TimeExpr::Sin { amp: 0.1, omega: 3.14, phase: 0.0 },
            ],
        };
        let s = serde_json::to_string(&e).unwrap();
        let back: TimeExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
