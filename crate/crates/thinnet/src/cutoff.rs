//! Smooth cut-off functions used for blending and windowing.
//!
//! Every cut-off here is built from polynomial smoothsteps, so values and the
//! first two derivatives are available in closed form.

/// C² smoothstep: 0 for u ≤ 0, 1 for u ≥ 1, 10u³ − 15u⁴ + 6u⁵ in between.
pub fn smoothstep_c2(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

/// First derivative of [`smoothstep_c2`]: 30 u²(1−u)².
pub fn smoothstep_c2_d1(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let w = u * (1.0 - u);
        30.0 * w * w
    }
}

/// Second derivative of [`smoothstep_c2`].
pub fn smoothstep_c2_d2(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    }
}

/// C⁴ smoothstep: leading term u⁵, derivative 630 u⁴(1−u)⁴.
pub fn smoothstep_c4(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * u * u * (126.0 + u * (-420.0 + u * (540.0 + u * (-315.0 + 70.0 * u))))
    }
}

/// First derivative of [`smoothstep_c4`].
pub fn smoothstep_c4_d1(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let w = u * (1.0 - u);
        630.0 * w * w * w * w
    }
}

/// C² bump: 1 at u = 0, 0 for |u| ≥ 1, (1−u²)³ in between.
pub fn bump_c2(u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        s * s * s
    }
}

/// Derivative of [`bump_c2`] with respect to u.
pub fn bump_c2_d1(u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        -6.0 * u * s * s
    }
}

/// The junction blending cut-off χ_{ℓ₀}: 0 for s ≤ 2ℓ₀, 1 for s ≥ 3ℓ₀,
/// monotone and C² in between.
#[derive(Debug, Clone, Copy)]
pub struct NodeCutoff {
    pub ell0: f64,
}

impl NodeCutoff {
    pub fn new(ell0: f64) -> Self {
        Self { ell0 }
    }

    pub fn eval(&self, s: f64) -> f64 {
        smoothstep_c2((s - 2.0 * self.ell0) / self.ell0)
    }

    pub fn d1(&self, s: f64) -> f64 {
        smoothstep_c2_d1((s - 2.0 * self.ell0) / self.ell0) / self.ell0
    }

    pub fn d2(&self, s: f64) -> f64 {
        smoothstep_c2_d2((s - 2.0 * self.ell0) / self.ell0) / (self.ell0 * self.ell0)
    }

    /// ∫_{2ℓ₀}^{3ℓ₀} s χ'(s) ds, by composite trapezoid quadrature.
    ///
    /// Enters the flux-defect coefficients; lies strictly inside (2ℓ₀, 3ℓ₀).
    pub fn first_moment(&self, panels: usize) -> f64 {
        let a = 2.0 * self.ell0;
        let b = 3.0 * self.ell0;
        let n = panels.max(8);
        let h = (b - a) / n as f64;
        let f = |s: f64| s * self.d1(s);
        let mut acc = 0.5 * (f(a) + f(b));
        for k in 1..n {
            acc += f(a + k as f64 * h);
        }
        acc * h
    }
}

/// Outlet blending cut-off χ_δ: 1 for s ≥ ℓ − δ, 0 for s ≤ ℓ − 2δ.
#[derive(Debug, Clone, Copy)]
pub struct OutletCutoff {
    pub length: f64,
    pub delta: f64,
}

impl OutletCutoff {
    pub fn new(length: f64, delta: f64) -> Self {
        Self { length, delta }
    }

    pub fn eval(&self, s: f64) -> f64 {
        smoothstep_c2((s - (self.length - 2.0 * self.delta)) / self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoint_derivatives_vanish() {
        for u in [0.0, 1.0, -0.3, 1.7] {
            assert_eq!(smoothstep_c2_d1(u), 0.0);
            assert_eq!(smoothstep_c2_d2(u), 0.0);
            assert_eq!(smoothstep_c4_d1(u), 0.0);
        }
        assert!((smoothstep_c2(0.5) - 0.5).abs() < 1e-15);
        assert!((smoothstep_c4(0.5) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn smoothstep_derivative_matches_finite_difference() {
        let h = 1e-6;
        for &u in &[0.12, 0.37, 0.66, 0.93] {
            let fd = (smoothstep_c2(u + h) - smoothstep_c2(u - h)) / (2.0 * h);
            assert!((fd - smoothstep_c2_d1(u)).abs() < 1e-8);
            let fd2 = (smoothstep_c2_d1(u + h) - smoothstep_c2_d1(u - h)) / (2.0 * h);
            assert!((fd2 - smoothstep_c2_d2(u)).abs() < 1e-7);
            let fd4 = (smoothstep_c4(u + h) - smoothstep_c4(u - h)) / (2.0 * h);
            assert!((fd4 - smoothstep_c4_d1(u)).abs() < 1e-7);
        }
    }

    #[test]
    fn node_cutoff_moment_in_mean_value_bounds() {
        let chi = NodeCutoff::new(0.25);
        assert_eq!(chi.eval(0.5), 0.0);
        assert_eq!(chi.eval(0.75), 1.0);
        let m = chi.first_moment(512);
        // ∫ s χ' over [2ℓ₀, 3ℓ₀] with ∫χ' = 1 lies between the endpoints.
        assert!(m > 2.0 * 0.25 && m < 3.0 * 0.25);
        // Symmetric smoothstep: moment lands at the midpoint 2.5 ℓ₀.
        assert!((m - 2.5 * 0.25).abs() < 1e-6);
    }

    #[test]
    fn outlet_cutoff_support() {
        let chi = OutletCutoff::new(1.0, 0.2);
        assert_eq!(chi.eval(0.55), 0.0);
        assert_eq!(chi.eval(0.6), 0.0);
        assert_eq!(chi.eval(0.85), 1.0);
        assert_eq!(chi.eval(1.0), 1.0);
        assert!(chi.eval(0.7) > 0.0 && chi.eval(0.7) < 1.0);
    }
}
