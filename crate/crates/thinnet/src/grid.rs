//! Dense 2D grid storage and small numeric helpers shared by the solvers.

/// Row-major (time-major) storage for a scalar field on a space-time lattice.
///
/// `nx` space nodes by `nt` time nodes; entry (j, n) lives at `n * nx + j`.
#[derive(Debug, Clone)]
pub struct Grid2 {
    pub nx: usize,
    pub nt: usize,
    pub data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(nx: usize, nt: usize) -> Self {
        Self { nx, nt, data: vec![0.0; nx * nt] }
    }

    #[inline]
    pub fn get(&self, j: usize, n: usize) -> f64 {
        self.data[n * self.nx + j]
    }

    #[inline]
    pub fn set(&mut self, j: usize, n: usize, v: f64) {
        self.data[n * self.nx + j] = v;
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.nx..(n + 1) * self.nx]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.nx..(n + 1) * self.nx]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Grid2) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Uniformly spaced samples of a function of one variable, with linear
/// interpolation and a finite-difference derivative.
#[derive(Debug, Clone)]
pub struct Series {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Series {
    pub fn from_fn(t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(n >= 2);
        let dt = (t1 - t0) / (n - 1) as f64;
        let values = (0..n).map(|k| f(t0 + k as f64 * dt)).collect();
        Self { t0, dt, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation, clamped to the sample range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let u = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
        let k = (u.floor() as usize).min(n - 2);
        let a = u - k as f64;
        (1.0 - a) * self.values[k] + a * self.values[k + 1]
    }

    /// Centered-difference derivative of the sampled data, one-sided at ends.
    pub fn deriv(&self, t: f64) -> f64 {
        let n = self.values.len();
        let u = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
        let k = (u.round() as usize).min(n - 1);
        if k == 0 {
            (self.values[1] - self.values[0]) / self.dt
        } else if k == n - 1 {
            (self.values[n - 1] - self.values[n - 2]) / self.dt
        } else {
            (self.values[k + 1] - self.values[k - 1]) / (2.0 * self.dt)
        }
    }
}

/// Bilinear interpolation on a lattice with spacings (dx, dt), clamped to the
/// rectangle; reads below the first time row return `floor_value`.
#[inline]
pub fn bilinear_clamped(
    grid: &Grid2,
    dx: f64,
    dt: f64,
    x: f64,
    t: f64,
    floor_value: f64,
) -> f64 {
    if t < 0.0 {
        return floor_value;
    }
    let fx = (x / dx).clamp(0.0, (grid.nx - 1) as f64);
    let ft = (t / dt).clamp(0.0, (grid.nt - 1) as f64);
    let j = (fx.floor() as usize).min(grid.nx - 2);
    let n = (ft.floor() as usize).min(grid.nt.saturating_sub(2));
    let ax = fx - j as f64;
    let at = ft - n as f64;
    let v00 = grid.get(j, n);
    let v10 = grid.get(j + 1, n);
    let v01 = grid.get(j, n + 1);
    let v11 = grid.get(j + 1, n + 1);
    (1.0 - at) * ((1.0 - ax) * v00 + ax * v10) + at * ((1.0 - ax) * v01 + ax * v11)
}

/// Second derivative of uniformly sampled data by 5-point stencils
/// (centered inside, one-sided at the ends). Needs at least 5 samples.
pub fn second_derivative_5pt(values: &[f64], dx: f64, j: usize) -> f64 {
    let n = values.len();
    assert!(n >= 5);
    let d2 = dx * dx;
    if j >= 2 && j + 2 < n {
        (-values[j - 2] + 16.0 * values[j - 1] - 30.0 * values[j] + 16.0 * values[j + 1]
            - values[j + 2])
            / (12.0 * d2)
    } else if j < 2 {
        // Forward 5-point, second order.
        (35.0 * values[j] - 104.0 * values[j + 1] + 114.0 * values[j + 2] - 56.0 * values[j + 3]
            + 11.0 * values[j + 4])
            / (12.0 * d2)
    } else {
        (35.0 * values[j] - 104.0 * values[j - 1] + 114.0 * values[j - 2] - 56.0 * values[j - 3]
            + 11.0 * values[j - 4])
            / (12.0 * d2)
    }
}

/// One-sided 5-point first derivative at the left end of uniform samples.
pub fn first_derivative_left_5pt(values: &[f64], dx: f64) -> f64 {
    assert!(values.len() >= 5);
    (-25.0 * values[0] + 48.0 * values[1] - 36.0 * values[2] + 16.0 * values[3] - 3.0 * values[4])
        / (12.0 * dx)
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_bilinear_fields() {
        let mut g = Grid2::zeros(5, 4);
        let dx = 0.25;
        let dt = 0.5;
        for n in 0..4 {
            for j in 0..5 {
                let (x, t) = (j as f64 * dx, n as f64 * dt);
                g.set(j, n, 2.0 + 3.0 * x - 1.5 * t + 0.7 * x * t);
            }
        }
        let f = |x: f64, t: f64| 2.0 + 3.0 * x - 1.5 * t + 0.7 * x * t;
        for &(x, t) in &[(0.1, 0.2), (0.6, 1.1), (0.99, 1.49)] {
            assert!((bilinear_clamped(&g, dx, dt, x, t, 0.0) - f(x, t)).abs() < 1e-13);
        }
        // Below t=0 returns the floor value.
        assert_eq!(bilinear_clamped(&g, dx, dt, 0.5, -0.01, 7.5), 7.5);
    }

    #[test]
    fn five_point_second_derivative_exact_for_cubics() {
        let dx = 0.1;
        let vals: Vec<f64> = (0..9)
            .map(|j| {
                let x = j as f64 * dx;
                1.0 + x - 2.0 * x * x + 0.5 * x * x * x
            })
            .collect();
        for j in 0..9 {
            let x = j as f64 * dx;
            let exact = -4.0 + 3.0 * x;
            assert!(
                (second_derivative_5pt(&vals, dx, j) - exact).abs() < 1e-9,
                "j={j}"
            );
        }
    }

    #[test]
    fn left_derivative_exact_for_quartics() {
        let dx = 0.2;
        let vals: Vec<f64> = (0..6)
            .map(|j| {
                let x = j as f64 * dx;
                x * x * x * x - 2.0 * x
            })
            .collect();
        assert!((first_derivative_left_5pt(&vals, dx) - (-2.0)).abs() < 1e-10);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| -1.7 * v + 0.4).collect();
        let (s, b) = linear_fit(&x, &y);
        assert!((s + 1.7).abs() < 1e-12);
        assert!((b - 0.4).abs() < 1e-12);
    }
}
