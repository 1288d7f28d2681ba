//! Minimal sparse linear algebra: CSR storage, conjugate gradients for the
//! compatibility-projected singular Neumann systems, and ILU(0)-preconditioned
//! BiCGStab for the upwinded convection-diffusion systems.

use crate::error::Error;
use crate::Result;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y.iter()
            .zip(b)
            .fold(0.0_f64, |m, (&ax, &bi)| m.max((ax - bi).abs()))
    }
}

/// Row-wise builder that sorts and merges duplicate entries.
#[derive(Debug)]
pub struct CsrBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, rows: vec![Vec::new(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn build(mut self) -> Csr {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in self.rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == col {
                    v += row[k].1;
                    k += 1;
                }
                col_idx.push(col);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr { n: self.n, row_ptr, col_idx, values }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients for a symmetric positive semidefinite system whose
/// nullspace is the constant vector (weighted by `weights`).
///
/// The right side is projected onto the orthogonal complement of the
/// nullspace, the iteration keeps the iterate mean-free, and the returned
/// solution has zero weighted mean.
pub fn cg_singular_neumann(
    a: &Csr,
    b: &[f64],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.n;
    let wsum: f64 = weights.iter().sum();
    // The nullspace is the constant vector; normalize by subtracting the
    // weighted (volume) mean as a constant shift.
    let project_const = |v: &mut [f64]| {
        let mean = dot(v, weights) / wsum;
        for vi in v.iter_mut() {
            *vi -= mean;
        }
    };

    let mut rhs = b.to_vec();
    // Compatibility projection: remove the component of b along the constant
    // nullspace (in the weighted inner product the residual of a consistent
    // system sums to zero).
    let imbalance = dot(&rhs, &vec![1.0; n]) / n as f64;
    for v in rhs.iter_mut() {
        *v -= imbalance;
    }

    let bnorm = rhs.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1e-300);
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bnorm * (n as f64).sqrt() || rr == 0.0 {
            project_const(&mut x);
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Numerical("CG breakdown: non-positive curvature".into()));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= tol * bnorm * (n as f64).sqrt() * 100.0 {
        project_const(&mut x);
        return Ok(x);
    }
    Err(Error::IterationFailure { residual: rr.sqrt(), iterations: max_iter })
}

/// ILU(0) factors stored over the sparsity pattern of the source matrix.
pub struct Ilu0 {
    lu: Csr,
    diag_ptr: Vec<usize>,
}

impl Ilu0 {
    /// Plain ILU(0).
    pub fn factor(a: &Csr) -> Result<Self> {
        Self::factor_inner(a, 0.0)
    }

    /// Modified ILU(0): fill dropped outside the pattern is lumped into the
    /// diagonal (row sums preserved), which conditions diffusion-dominated
    /// M-matrices much better than plain ILU(0).
    pub fn factor_modified(a: &Csr) -> Result<Self> {
        Self::factor_inner(a, 1.0)
    }

    fn factor_inner(a: &Csr, lump: f64) -> Result<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag_ptr = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag_ptr[i] = k;
                }
            }
            if diag_ptr[i] == usize::MAX {
                return Err(Error::Numerical(format!("ILU(0): empty diagonal in row {i}")));
            }
        }
        // Column lookup scratch.
        let mut colmap = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                colmap[lu.col_idx[k]] = k;
            }
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            let mut dropped = 0.0;
            for k in start..end {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let piv = lu.values[diag_ptr[j]];
                if piv == 0.0 {
                    return Err(Error::Numerical(format!("ILU(0): zero pivot at row {j}")));
                }
                let lij = lu.values[k] / piv;
                lu.values[k] = lij;
                for kk in diag_ptr[j] + 1..lu.row_ptr[j + 1] {
                    let col = lu.col_idx[kk];
                    let pos = colmap[col];
                    if pos != usize::MAX && pos >= start && pos < end {
                        lu.values[pos] -= lij * lu.values[kk];
                    } else {
                        dropped += lij * lu.values[kk];
                    }
                }
            }
            if lump != 0.0 {
                lu.values[diag_ptr[i]] -= lump * dropped;
            }
            for k in start..end {
                colmap[lu.col_idx[k]] = usize::MAX;
            }
        }
        Ok(Self { lu, diag_ptr })
    }

    /// Solves (LU) z = r in place.
    pub fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = self.lu.n;
        z.copy_from_slice(r);
        // Forward: L has unit diagonal.
        for i in 0..n {
            let mut acc = z[i];
            for k in self.lu.row_ptr[i]..self.diag_ptr[i] {
                acc -= self.lu.values[k] * z[self.lu.col_idx[k]];
            }
            z[i] = acc;
        }
        // Backward with U.
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag_ptr[i] + 1..self.lu.row_ptr[i + 1] {
                acc -= self.lu.values[k] * z[self.lu.col_idx[k]];
            }
            z[i] = acc / self.lu.values[self.diag_ptr[i]];
        }
    }
}

/// ILU(0)-preconditioned BiCGStab. Returns the solution or an iteration
/// failure carrying the last residual.
pub fn bicgstab_ilu(
    a: &Csr,
    ilu: &Ilu0,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.n;
    let bnorm = b.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let target = tol * bnorm;
    BICG_CALLS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    for _ in 0..max_iter {
        BICG_ITERS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let rnorm = r.iter().fold(0.0_f64, |m, &ri| m.max(ri.abs()));
        if rnorm <= target {
            return Ok(x);
        }
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::Numerical("BiCGStab breakdown (rho)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ilu.solve(&p, &mut phat);
        a.matvec(&phat, &mut v);
        alpha = rho / dot(&r0, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        let snorm = s.iter().fold(0.0_f64, |m, &si| m.max(si.abs()));
        if snorm <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(x);
        }
        ilu.solve(&s, &mut shat);
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Numerical("BiCGStab breakdown (t)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.abs() < 1e-300 {
            return Err(Error::Numerical("BiCGStab breakdown (omega)".into()));
        }
    }
    let rnorm = a.residual_norm(&x, b);
    if rnorm <= target * 100.0 {
        return Ok(x);
    }
    Err(Error::IterationFailure { residual: rnorm, iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d_neumann(n: usize) -> Csr {
        // -u'' with pure Neumann ends: singular, nullspace = constants.
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            if i > 0 {
                b.add(i, i - 1, -1.0);
                b.add(i, i, 1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
                b.add(i, i, 1.0);
            }
        }
        b.build()
    }

    #[test]
    fn cg_solves_projected_singular_system() {
        let n = 40;
        let a = laplacian_1d_neumann(n);
        // b = A x* for a known zero-mean x*.
        let xstar: Vec<f64> = (0..n)
            .map(|i| (i as f64 / (n - 1) as f64 * std::f64::consts::PI).cos())
            .collect();
        let mean = xstar.iter().sum::<f64>() / n as f64;
        let xstar: Vec<f64> = xstar.iter().map(|v| v - mean).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xstar, &mut b);
        let w = vec![1.0; n];
        let x = cg_singular_neumann(&a, &b, &w, 1e-12, 10_000).unwrap();
        for i in 0..n {
            assert!((x[i] - xstar[i]).abs() < 1e-8, "i={i}");
        }
    }

    #[test]
    fn bicgstab_solves_convection_diffusion_band() {
        // 1D upwind convection-diffusion, Dirichlet ends folded into rows.
        let n = 120;
        let (d, c) = (1.0, 8.0);
        let mut bld = CsrBuilder::new(n);
        for i in 0..n {
            bld.add(i, i, 2.0 * d + c);
            if i > 0 {
                bld.add(i, i - 1, -d - c);
            }
            if i + 1 < n {
                bld.add(i, i + 1, -d);
            }
        }
        let a = bld.build();
        let xstar: Vec<f64> = (0..n).map(|i| (0.05 * i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xstar, &mut b);
        let ilu = Ilu0::factor(&a).unwrap();
        let x = bicgstab_ilu(&a, &ilu, &b, None, 1e-12, 500).unwrap();
        for i in 0..n {
            assert!((x[i] - xstar[i]).abs() < 1e-8);
        }
    }
}

/// Global iteration counter for solver diagnostics (tests/benches only).
pub static BICG_ITERS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
pub static BICG_CALLS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
