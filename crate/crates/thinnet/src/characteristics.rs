//! Per-edge solvers for ∂ₜw + v ∂ₓw = −(∂ₓv) w + Ψ(w, x, t) with one-sided
//! inflow data and zero initial state.
//!
//! [`solve_edge_moc`] integrates the equivalent Volterra integral equations
//! along backward characteristics: each grid value is the damped boundary or
//! initial value at the characteristic foot plus the trapezoid quadrature of
//! e^{−∫∂ₓv}·Ψ along the curve, with Picard iteration batched per time step
//! (the per-step contraction factor is Lipschitz(Ψ)·Δt, so a handful of
//! sweeps reaches 1e-10). [`solve_edge_fv`] is the independent first-order
//! upwind oracle for the same problem in conservative form.

use crate::error::Error;
use crate::grid::Grid2;
use crate::Result;

/// Space-time lattice of one edge: `nx` by `nt` intervals on [0, L] × [0, T].
#[derive(Debug, Clone, Copy)]
pub struct EdgeGrid {
    pub nx: usize,
    pub nt: usize,
    pub length: f64,
    pub horizon: f64,
}

impl EdgeGrid {
    pub fn new(nx: usize, nt: usize, length: f64, horizon: f64) -> Result<Self> {
        if nx < 4 || nt < 4 {
            return Err(Error::Config(format!("grid too coarse: nx={nx}, nt={nt} (need ≥ 4)")));
        }
        if length <= 0.0 || horizon <= 0.0 {
            return Err(Error::Config("grid extents must be positive".into()));
        }
        Ok(Self { nx, nt, length, horizon })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.length * j as f64 / self.nx as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        self.horizon * n as f64 / self.nt as f64
    }
}

/// Where sample values live along the space axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// nx+1 node values at x_j = j·Δx (method of characteristics).
    Nodes,
    /// nx cell averages at x_j = (j+½)·Δx (finite volume).
    Centers,
}

/// A solved edge field on the space-time lattice.
#[derive(Debug, Clone)]
pub struct EdgeSolution {
    pub grid: EdgeGrid,
    pub layout: Layout,
    /// (nx+1 or nx) by (nt+1) values, time-major rows.
    pub values: Grid2,
    pub converged: bool,
    /// Worst-case Picard iterations used by any grid value.
    pub iterations: usize,
    /// Aggregated Picard residual per iteration index.
    pub residual_history: Vec<f64>,
}

impl EdgeSolution {
    fn x_offset(&self) -> f64 {
        match self.layout {
            Layout::Nodes => 0.0,
            Layout::Centers => 0.5 * self.grid.dx(),
        }
    }

    /// Bilinear sample clamped to the lattice.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        crate::grid::bilinear_clamped(
            &self.values,
            self.grid.dx(),
            self.grid.dt(),
            x - self.x_offset(),
            t,
            0.0,
        )
    }

    /// Trace w(0, ·) on the time grid.
    pub fn trace_start(&self) -> Vec<f64> {
        (0..=self.grid.nt).map(|n| self.eval(0.0, self.grid.t(n))).collect()
    }

    /// Trace w(L, ·) on the time grid.
    pub fn trace_end(&self) -> Vec<f64> {
        (0..=self.grid.nt).map(|n| self.eval(self.grid.length, self.grid.t(n))).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }

    /// Max |self − other| sampled at `other`'s lattice points.
    pub fn max_abs_diff_sampled(&self, other: &EdgeSolution) -> f64 {
        let mut worst = 0.0_f64;
        let off = other.x_offset();
        let cols = match other.layout {
            Layout::Nodes => other.grid.nx + 1,
            Layout::Centers => other.grid.nx,
        };
        for n in 0..=other.grid.nt {
            let t = other.grid.t(n);
            for j in 0..cols {
                let x = off + j as f64 * other.grid.dx();
                let d = (self.eval(x, t) - other.values.get(j, n)).abs();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Where a backward characteristic enters the domain of dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntrySide {
    InitialLine,
    InflowBoundary,
}

/// A backward-traced characteristic, samples ordered by increasing time.
#[derive(Debug, Clone)]
pub struct CharacteristicCurve {
    pub points: Vec<(f64, f64)>,
    pub entry: EntrySide,
    pub foot_time: f64,
}

/// Backward integration of dx/dτ = v(x, τ) from (x_end, t_end) until τ = 0
/// or the inflow boundary, with fourth-order steps of size Δt.
pub fn trace_characteristic(
    v: impl Fn(f64, f64) -> f64,
    x_end: f64,
    t_end: f64,
    grid: &EdgeGrid,
) -> Result<CharacteristicCurve> {
    let dt = grid.dt();
    let l = grid.length;
    let sign = v(x_end, t_end).signum();
    let inflow_x = if sign >= 0.0 { 0.0 } else { l };
    let check_sign = |x: f64, t: f64| -> Result<f64> {
        let val = v(x, t);
        if val != 0.0 && sign != 0.0 && val.signum() != sign {
            Err(Error::SignChange { x, t })
        } else {
            Ok(val)
        }
    };

    let mut pts = vec![(x_end, t_end)];
    let mut x = x_end;
    let mut t = t_end;
    let mut entry = EntrySide::InitialLine;
    while t > 0.0 {
        let h = dt.min(t);
        let k1 = check_sign(x, t)?;
        let k2 = check_sign((x - 0.5 * h * k1).clamp(0.0, l), t - 0.5 * h)?;
        let k3 = check_sign((x - 0.5 * h * k2).clamp(0.0, l), t - 0.5 * h)?;
        let k4 = check_sign((x - h * k3).clamp(0.0, l), t - h)?;
        let step = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let x_new = x - step;
        let crossed = (sign >= 0.0 && x_new < 0.0) || (sign < 0.0 && x_new > l);
        if crossed {
            // Bisect within the step for the boundary crossing time.
            let (mut lo, mut hi) = (t - h, t); // position(lo) outside, position(hi) inside
            let pos_at = |tau: f64| -> Result<f64> {
                let hh = t - tau;
                if hh == 0.0 {
                    return Ok(x);
                }
                let k1 = check_sign(x, t)?;
                let k2 = check_sign((x - 0.5 * hh * k1).clamp(0.0, l), t - 0.5 * hh)?;
                let k3 = check_sign((x - 0.5 * hh * k2).clamp(0.0, l), t - 0.5 * hh)?;
                let k4 = check_sign((x - hh * k3).clamp(0.0, l), t - hh)?;
                Ok(x - hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            };
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let p = pos_at(mid)?;
                let outside = (sign >= 0.0 && p < 0.0) || (sign < 0.0 && p > l);
                if outside {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 * grid.horizon.max(1.0) {
                    break;
                }
            }
            let t0 = 0.5 * (lo + hi);
            pts.push((inflow_x, t0));
            entry = EntrySide::InflowBoundary;
            break;
        }
        x = x_new.clamp(0.0, l);
        t -= h;
        pts.push((x, t.max(0.0)));
    }
    let foot_time = pts.last().unwrap().1;
    pts.reverse();
    Ok(CharacteristicCurve { points: pts, entry, foot_time })
}

// ---------------------------------------------------------------------------
// method of characteristics
// ---------------------------------------------------------------------------

struct Tables {
    /// Characteristic foot of the one-step backward curve from (j, n):
    /// interior feet store x at t_{n−1}; boundary exits store the exit time.
    foot: Grid2,
    exits: Vec<bool>,
    damping: Grid2,
    /// v > 0 after canonicalization guarantees inflow at x = 0.
    flipped: bool,
}

fn out_of_domain(sign: f64, x: f64, l: f64) -> bool {
    if sign >= 0.0 {
        x < 0.0
    } else {
        x > l
    }
}

fn build_tables(
    v: &(impl Fn(f64, f64) -> f64 + Sync),
    dv_dx: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
    grid: &EdgeGrid,
) -> Result<Tables> {
    let (nxp, ntp) = (grid.nx + 1, grid.nt + 1);
    let (dx, dt, l) = (grid.dx(), grid.dt(), grid.length);

    let mut vt = Grid2::zeros(nxp, ntp);
    for n in 0..ntp {
        let t = grid.t(n);
        let row = vt.row_mut(n);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = v(j as f64 * dx, t);
        }
    }
    // Single sign over the lattice.
    let mut sign = 0.0_f64;
    for &val in &vt.data {
        if val == 0.0 {
            continue;
        }
        if sign == 0.0 {
            sign = val.signum();
        } else if sign != val.signum() {
            let idx = vt.data.iter().position(|&w| w.signum() != sign && w != 0.0).unwrap();
            return Err(Error::SignChange {
                x: (idx % nxp) as f64 * dx,
                t: (idx / nxp) as f64 * dt,
            });
        }
    }
    if sign == 0.0 {
        sign = 1.0; // v ≡ 0: transport degenerates to pointwise ODE, keep x=0 inflow.
    }
    let flipped = sign < 0.0;

    // Canonical frame: x' = L − x when v < 0, so v' = −v(L − x') > 0.
    if flipped {
        let mut flip = Grid2::zeros(nxp, ntp);
        for n in 0..ntp {
            for j in 0..nxp {
                flip.set(j, n, -vt.get(nxp - 1 - j, n));
            }
        }
        vt = flip;
    }

    let mut dvt = Grid2::zeros(nxp, ntp);
    match dv_dx {
        Some(d) => {
            for n in 0..ntp {
                let t = grid.t(n);
                for j in 0..nxp {
                    // Chain rule under the flip: d/dx' [−v(L−x')] = ∂ₓv(L−x').
                    let val = if flipped { d(l - j as f64 * dx, t) } else { d(j as f64 * dx, t) };
                    dvt.set(j, n, val);
                }
            }
        }
        None => {
            for n in 0..ntp {
                for j in 0..nxp {
                    let val = if j == 0 {
                        (vt.get(1, n) - vt.get(0, n)) / dx
                    } else if j == nxp - 1 {
                        (vt.get(nxp - 1, n) - vt.get(nxp - 2, n)) / dx
                    } else {
                        (vt.get(j + 1, n) - vt.get(j - 1, n)) / (2.0 * dx)
                    };
                    dvt.set(j, n, val);
                }
            }
        }
    }

    let vs = |x: f64, t: f64| crate::grid::bilinear_clamped(&vt, dx, dt, x, t, 0.0);
    let ds = |x: f64, t: f64| crate::grid::bilinear_clamped(&dvt, dx, dt, x, t, 0.0);

    let mut foot = Grid2::zeros(nxp, ntp);
    let mut exits = vec![false; nxp * ntp];
    let mut damping = Grid2::zeros(nxp, ntp);
    for n in 1..ntp {
        let t1 = grid.t(n);
        let t0 = grid.t(n - 1);
        for j in 0..nxp {
            let x1 = j as f64 * dx;
            let k1 = vs(x1, t1);
            let k2 = vs((x1 - 0.5 * dt * k1).clamp(0.0, l), t1 - 0.5 * dt);
            let k3 = vs((x1 - 0.5 * dt * k2).clamp(0.0, l), t1 - 0.5 * dt);
            let k4 = vs((x1 - dt * k3).clamp(0.0, l), t0);
            let xf = x1 - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            let idx = n * nxp + j;
            if out_of_domain(1.0, xf, l) {
                // Exit through x = 0: locate the crossing time by bisection
                // on partial RK4 steps from (x1, t1).
                let pos_at = |tau: f64| {
                    let hh = t1 - tau;
                    let k1 = vs(x1, t1);
                    let k2 = vs((x1 - 0.5 * hh * k1).clamp(0.0, l), t1 - 0.5 * hh);
                    let k3 = vs((x1 - 0.5 * hh * k2).clamp(0.0, l), t1 - 0.5 * hh);
                    let k4 = vs((x1 - hh * k3).clamp(0.0, l), tau);
                    x1 - hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                };
                let (mut lo, mut hi) = (t0, t1);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if pos_at(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let texit = 0.5 * (lo + hi);
                exits[idx] = true;
                foot.data[idx] = texit;
                let seg = t1 - texit;
                let integral = 0.5 * seg * (ds(0.0, texit) + ds(x1, t1));
                damping.data[idx] = (-integral).exp();
            } else {
                let xf = xf.clamp(0.0, l);
                foot.data[idx] = xf;
                let integral = 0.5 * dt * (ds(xf, t0) + ds(x1, t1));
                damping.data[idx] = (-integral).exp();
            }
        }
    }

    Ok(Tables { foot, exits, damping, flipped })
}

/// Method-of-characteristics solve of
/// ∂ₜw + v ∂ₓw = −(∂ₓv) w + Ψ(w, x, t), w|ₜ₌₀ = 0, w|inflow = inflow(t),
/// via Picard iteration on the Volterra form (per-step batching).
///
/// The inflow boundary is x = 0 when v > 0 and x = L when v < 0; `inflow`
/// is always a function of t. `dv_dx` supplies the analytic derivative;
/// omitted, it falls back to centered differences of v.
pub fn solve_edge_moc(
    v: impl Fn(f64, f64) -> f64 + Sync,
    dv_dx: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
    psi: impl Fn(f64, f64, f64) -> f64 + Sync,
    inflow: impl Fn(f64) -> f64 + Sync,
    grid: &EdgeGrid,
    tol: f64,
    max_iter: usize,
) -> Result<EdgeSolution> {
    let tables = build_tables(&v, dv_dx, grid)?;
    let (nxp, ntp) = (grid.nx + 1, grid.nt + 1);
    let (dx, l) = (grid.dx(), grid.length);
    let flipped = tables.flipped;
    let psi_c = |w: f64, x: f64, t: f64| if flipped { psi(w, l - x, t) } else { psi(w, x, t) };

    let mut w = Grid2::zeros(nxp, ntp);
    let mut worst_iters = 0usize;
    let mut worst_residual = 0.0_f64;
    let mut history: Vec<f64> = Vec::new();
    let mut failed = false;

    for n in 1..ntp {
        let t1 = grid.t(n);
        let t0 = grid.t(n - 1);
        let (prev_row, cur_row) = {
            let (a, b) = w.data.split_at_mut(n * nxp);
            (&a[(n - 1) * nxp..], &mut b[..nxp])
        };
        let interp_prev = |x: f64| -> f64 {
            let u = (x / dx).clamp(0.0, (nxp - 1) as f64);
            let j = (u.floor() as usize).min(nxp - 2);
            let a = u - j as f64;
            (1.0 - a) * prev_row[j] + a * prev_row[j + 1]
        };
        for j in 0..nxp {
            let idx = n * nxp + j;
            let x1 = j as f64 * dx;
            let damp = tables.damping.data[idx];
            let (base, seg, foot_psi) = if tables.exits[idx] {
                let texit = tables.foot.data[idx];
                let qv = inflow(texit);
                (qv * damp, t1 - texit, psi_c(qv, 0.0, texit))
            } else {
                let xf = tables.foot.data[idx];
                let wf = interp_prev(xf);
                (wf * damp, t1 - t0, psi_c(wf, xf, t0))
            };
            // Local Picard on the implicit trapezoid endpoint.
            let mut cur = base + seg * damp * foot_psi;
            let mut iters = 0usize;
            let scale = cur.abs().max(1.0);
            let res = loop {
                let next = base + 0.5 * seg * (damp * foot_psi + psi_c(cur, x1, t1));
                let r = (next - cur).abs();
                if history.len() <= iters {
                    history.push(r);
                } else {
                    history[iters] = history[iters].max(r);
                }
                cur = next;
                iters += 1;
                if r <= tol * scale {
                    break r;
                }
                if iters >= max_iter {
                    failed = true;
                    break r;
                }
            };
            worst_iters = worst_iters.max(iters);
            worst_residual = worst_residual.max(res);
            cur_row[j] = cur;
        }
    }

    if failed {
        return Err(Error::IterationFailure { residual: worst_residual, iterations: max_iter });
    }

    // Map back to the edge frame when canonicalized.
    if flipped {
        for n in 0..ntp {
            let row = w.row_mut(n);
            row.reverse();
        }
    }

    Ok(EdgeSolution {
        grid: *grid,
        layout: Layout::Nodes,
        values: w,
        converged: true,
        iterations: worst_iters,
        residual_history: history,
    })
}

// ---------------------------------------------------------------------------
// finite-volume oracle
// ---------------------------------------------------------------------------

/// Explicit first-order upwind scheme for ∂ₜw + ∂ₓ(v w) = −source(w, x, t),
/// the conservative form of the same edge problem (Ψ = −source). Serves as
/// the independent oracle for [`solve_edge_moc`].
pub fn solve_edge_fv(
    v: impl Fn(f64, f64) -> f64 + Sync,
    source: impl Fn(f64, f64, f64) -> f64 + Sync,
    inflow: impl Fn(f64) -> f64 + Sync,
    grid: &EdgeGrid,
) -> Result<EdgeSolution> {
    let (nx, nt) = (grid.nx, grid.nt);
    let (dx, dt) = (grid.dx(), grid.dt());
    // Face velocities, (nx+1) × (nt+1).
    let mut vf = Grid2::zeros(nx + 1, nt + 1);
    let mut max_v = 0.0_f64;
    for n in 0..=nt {
        let t = grid.t(n);
        for j in 0..=nx {
            let val = v(j as f64 * dx, t);
            max_v = max_v.max(val.abs());
            vf.set(j, n, val);
        }
    }
    let cfl = max_v * dt / dx;
    if cfl > 0.95 {
        return Err(Error::CflViolation { cfl, limit: 0.95 });
    }

    let mut w = Grid2::zeros(nx, nt + 1);
    let mut flux = vec![0.0; nx + 1];
    for n in 0..nt {
        let t = grid.t(n);
        for j in 0..=nx {
            let vface = vf.get(j, n);
            let upwind = if vface >= 0.0 {
                if j == 0 {
                    inflow(t)
                } else {
                    w.get(j - 1, n)
                }
            } else if j == nx {
                inflow(t)
            } else {
                w.get(j, n)
            };
            flux[j] = vface * upwind;
        }
        for j in 0..nx {
            let xc = (j as f64 + 0.5) * dx;
            let val = w.get(j, n) - dt / dx * (flux[j + 1] - flux[j])
                - dt * source(w.get(j, n), xc, t);
            w.set(j, n + 1, val);
        }
    }

    Ok(EdgeSolution {
        grid: *grid,
        layout: Layout::Centers,
        values: w,
        converged: true,
        iterations: 1,
        residual_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, nt: usize) -> EdgeGrid {
        EdgeGrid::new(nx, nt, 1.0, 1.0).unwrap()
    }

    #[test]
    fn trace_straight_line_boundary_entry() {
        let g = grid(64, 64);
        let c = trace_characteristic(|_, _| 1.0, 0.5, 1.0, &g).unwrap();
        assert_eq!(c.entry, EntrySide::InflowBoundary);
        let (x0, t0) = c.points[0];
        assert!(x0.abs() < 1e-12);
        assert!((t0 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn trace_straight_line_initial_entry() {
        let g = grid(64, 64);
        let c = trace_characteristic(|_, _| 1.0, 0.8, 0.3, &g).unwrap();
        assert_eq!(c.entry, EntrySide::InitialLine);
        let (x0, t0) = c.points[0];
        assert!((x0 - 0.5).abs() < 1e-10);
        assert!(t0.abs() < 1e-14);
    }

    #[test]
    fn trace_exponential_characteristic() {
        // v = 1 + x: curves are x(τ) = c e^τ − 1. Through (1.8, 1.0) the
        // closed form is x(τ) = 2.8 e^{τ−1} − 1, entering the initial line
        // at x(0) = 2.8/e − 1 (the corner curve through (0,0) is x = e^τ−1,
        // strictly below this one).
        let g = EdgeGrid::new(64, 256, 2.0, 1.0).unwrap();
        let c = trace_characteristic(|x, _| 1.0 + x, 1.8, 1.0, &g).unwrap();
        assert_eq!(c.entry, EntrySide::InitialLine);
        for &(x, tau) in &c.points {
            let exact = 2.8 * (tau - 1.0).exp() - 1.0;
            assert!((x - exact).abs() < 1e-8, "x={x}, tau={tau}");
        }
        let (x0, t0) = c.points[0];
        assert!((x0 - (2.8 / std::f64::consts::E - 1.0)).abs() < 1e-8 && t0.abs() < 1e-14);
    }

    #[test]
    fn trace_detects_sign_change() {
        // v flips sign in time along every backward curve from t = 1.
        let g = grid(32, 32);
        let r = trace_characteristic(|_, t| 0.5 - t, 0.5, 1.0, &g);
        assert!(matches!(r, Err(Error::SignChange { .. })));
    }

    #[test]
    fn moc_pure_transport_square_ramp() {
        // v ≡ 1, Ψ ≡ 0, q(t) = t² ⇒ w(x,t) = q(t−x) for t > x.
        let g = grid(256, 256);
        let sol =
            solve_edge_moc(|_, _| 1.0, None, |_, _, _| 0.0, |t| t * t, &g, 1e-12, 40).unwrap();
        let w = sol.eval(0.5, 1.0);
        assert!((w - 0.25).abs() < 1e-9, "w = {w}");
        // Causality: before the front arrives the state is exactly zero.
        assert_eq!(sol.eval(0.9, 0.5), 0.0);
    }

    #[test]
    fn moc_linear_damping_closed_form() {
        // Ψ = −w with v ≡ 1 gives w = q(t−x) e^{−x}.
        let g = grid(256, 256);
        let sol =
            solve_edge_moc(|_, _| 1.0, None, |w, _, _| -w, |t| t * t, &g, 1e-12, 40).unwrap();
        let expected = 0.25 * (-0.5_f64).exp();
        assert!((sol.eval(0.5, 1.0) - expected).abs() < 2e-5);
        assert!(sol.converged);
    }

    #[test]
    fn moc_zero_data_stays_zero() {
        let g = grid(32, 32);
        let sol =
            solve_edge_moc(|_, _| 1.0, None, |_, _, _| 0.0, |_| 0.0, &g, 1e-12, 40).unwrap();
        assert_eq!(sol.max_abs(), 0.0);
    }

    #[test]
    fn moc_negative_velocity_inflow_at_right() {
        // v ≡ −1: inflow at x = L, w(x,t) = q(t−(L−x)).
        let g = grid(256, 256);
        let sol =
            solve_edge_moc(|_, _| -1.0, None, |_, _, _| 0.0, |t| t * t, &g, 1e-12, 40).unwrap();
        let w = sol.eval(0.5, 1.0);
        assert!((w - 0.25).abs() < 1e-9, "w = {w}");
        let w2 = sol.eval(0.25, 0.5);
        assert_eq!(w2, 0.0);
    }

    #[test]
    fn fv_pure_transport() {
        let g = grid(512, 512);
        let sol = solve_edge_fv(|_, _| 0.9, |_, _, _| 0.0, |t| t * t, &g).unwrap();
        let expected = |x: f64, t: f64| {
            let tau = t - x / 0.9;
            if tau > 0.0 {
                tau * tau
            } else {
                0.0
            }
        };
        let err = (sol.eval(0.45, 0.9) - expected(0.45, 0.9)).abs();
        assert!(err < 6e-3, "err = {err}");
    }

    #[test]
    fn fv_cfl_violation_detected() {
        let g = EdgeGrid::new(256, 16, 1.0, 1.0).unwrap();
        let r = solve_edge_fv(|_, _| 1.0, |_, _, _| 0.0, |_| 0.0, &g);
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn fv_zero_data_identically_zero() {
        let g = grid(64, 80);
        let sol = solve_edge_fv(|_, _| 1.0, |_, _, _| 0.0, |_| 0.0, &g).unwrap();
        assert_eq!(sol.max_abs(), 0.0);
    }

    #[test]
    fn moc_agrees_with_fv_on_sourced_problem() {
        // v ≡ 1, conservative source = +w (so Ψ = −w), q = t².
        let g = grid(512, 640);
        let moc =
            solve_edge_moc(|_, _| 1.0, None, |w, _, _| -w, |t| t * t, &g, 1e-11, 40).unwrap();
        let fv = solve_edge_fv(|_, _| 1.0, |w, _, _| w, |t| t * t, &g).unwrap();
        let diff = moc.max_abs_diff_sampled(&fv);
        assert!(diff < 5e-3, "diff = {diff}");
    }

    #[test]
    fn moc_picard_contraction_with_linear_source() {
        // Ψ = −w on T = 1: per-step batching contracts at ratio ≲ Λ·T/nt.
        let g = grid(64, 64);
        let sol =
            solve_edge_moc(|_, _| 1.0, None, |w, _, _| -w, |t| t * t, &g, 1e-13, 60).unwrap();
        let h = &sol.residual_history;
        assert!(h.len() >= 2, "history: {h:?}");
        let lam_dt = 1.0 / 64.0;
        for k in 1..h.len() {
            if h[k] == 0.0 || h[k - 1] == 0.0 {
                break;
            }
            assert!(
                h[k] <= h[k - 1] * lam_dt * 4.0,
                "residuals not contracting: {h:?}"
            );
        }
    }

    #[test]
    fn moc_causality_in_inflow_data() {
        // Changing q beyond t* leaves w before t* untouched.
        let g = grid(128, 128);
        let tstar = 0.5;
        let a = solve_edge_moc(|_, _| 1.0, None, |w, _, _| -0.5 * w, |t| t * t, &g, 1e-12, 40)
            .unwrap();
        let b = solve_edge_moc(
            |_, _| 1.0,
            None,
            |w, _, _| -0.5 * w,
            |t| if t > tstar { 5.0 + t } else { t * t },
            &g,
            1e-12,
            40,
        )
        .unwrap();
        for n in 0..=g.nt {
            let t = g.t(n);
            if t > tstar {
                break;
            }
            for j in 0..=g.nx {
                let x = g.x(j);
                assert!((a.eval(x, t) - b.eval(x, t)).abs() < 1e-12);
            }
        }
    }
}
