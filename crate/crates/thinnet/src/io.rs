//! CSV and JSON emission. All numeric output carries 17 significant digits
//! so files round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::characteristics::{EdgeSolution, Layout};
use crate::Result;

/// 17-significant-digit representation (round-trip exact for f64).
pub fn fmt_g17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Edge field as CSV with header `x,t,w`, row-major in t.
pub fn edge_solution_csv(sol: &EdgeSolution) -> String {
    let mut out = String::from("x,t,w\n");
    let dx = sol.grid.dx();
    let off = match sol.layout {
        Layout::Nodes => 0.0,
        Layout::Centers => 0.5 * dx,
    };
    let cols = match sol.layout {
        Layout::Nodes => sol.grid.nx + 1,
        Layout::Centers => sol.grid.nx,
    };
    for n in 0..=sol.grid.nt {
        let t = sol.grid.t(n);
        for j in 0..cols {
            let x = off + j as f64 * dx;
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_g17(x),
                fmt_g17(t),
                fmt_g17(sol.values.get(j, n))
            );
        }
    }
    out
}

/// Vertex-trace CSV `t,edge_id,trace`.
pub fn traces_csv(times: &[f64], traces: &[(usize, Vec<f64>)]) -> String {
    let mut out = String::from("t,edge_id,trace\n");
    for (eid, series) in traces {
        for (n, &t) in times.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_g17(t), eid, fmt_g17(series[n]));
        }
    }
    out
}

/// Plain matrix CSV with a caller-supplied header.
pub fn matrix_csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::with_capacity(1 << 16);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_g17(v));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips() {
        for &v in &[0.1, std::f64::consts::PI, 1.0 / 3.0, 1e-17, -2.5e300] {
            let s = fmt_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }
}
