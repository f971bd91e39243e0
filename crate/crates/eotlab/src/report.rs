//! Report serialization: CSV tables and text summaries with bit-stable
//! formatting (fixed 17-significant-digit scientific notation), plus
//! atomic file writes (write to a temporary sibling, then rename).

use std::io::Write;
use std::path::Path;

use crate::estimates::SweepReport;
use crate::potentials::{grad_u, hessian_u};
use crate::sinkhorn::EntropicSolution;

/// Fixed-width float formatting: 17 significant digits, scientific.
/// Identical inputs yield identical bytes on every platform.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header of the sweep CSV for a given exponent list (the derived p0 is
/// always the last lp column).
pub fn sweep_csv_header(p_list: &[f64]) -> String {
    let mut cols = vec!["epsilon".to_string(), "gap".to_string()];
    for &p in &p_list[..p_list.len() - 1] {
        if (p - p.round()).abs() < 1e-12 {
            cols.push(format!("lp_err_p{}", p.round() as i64));
        } else {
            cols.push(format!("lp_err_p{p}"));
        }
    }
    cols.push("lp_err_p0".to_string());
    cols.extend(
        [
            "sup_u_err",
            "sup_grad_err",
            "hess_norm",
            "holder_seminorm",
            "iterations",
            "residual",
        ]
        .map(str::to_string),
    );
    cols.join(",")
}

/// One row per eps, columns as in [`sweep_csv_header`].
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = sweep_csv_header(&report.p_list);
    out.push('\n');
    for r in &report.records {
        let mut cells = vec![fmt17(r.epsilon), fmt17(r.gap)];
        for v in &r.lp_errors {
            cells.push(fmt17(*v));
        }
        cells.push(fmt17(r.sup_u_err));
        cells.push(fmt17(r.sup_grad_err));
        cells.push(fmt17(r.hess_norm));
        cells.push(fmt17(r.holder.overall));
        cells.push(r.iterations.to_string());
        cells.push(fmt17(r.residual));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Human-readable summary block: instance data, fitted exponents with
/// standard errors, and one PASS/FAIL line per gate. Deterministic bytes.
pub fn sweep_summary(report: &SweepReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "instance {} (dimension {}, resolution {})\n",
        report.instance_id, report.dimension, report.resolution
    ));
    let eps = report.epsilons();
    s.push_str(&format!(
        "epsilons: {} points from {} to {} (fit window starts at index {})\n",
        eps.len(),
        eps.first().copied().unwrap_or(f64::NAN),
        eps.last().copied().unwrap_or(f64::NAN),
        report.fit_start
    ));
    s.push_str(&format!("w2sq = {}\n", fmt17(report.w2sq)));
    s.push_str(&format!(
        "alpha_hat = {:.6} (reference Hölder constant {:.6})\n",
        report.alpha_hat, report.ref_holder_constant
    ));
    s.push_str(&format!("beta_used = {:.6}\n", report.beta_used));
    s.push_str(&format!(
        "reference gradient seminorm at beta = {:.6}: {:.6} (min_sep {:.6})\n",
        report.beta_used, report.ref_seminorm, report.min_sep
    ));
    s.push_str(&format!(
        "cpt_slope = {:.6} (stderr {:.6}, target {:.1}, window [{}, {}]: {})\n",
        report.cpt_fit.exponent,
        report.cpt_fit.stderr,
        report.dimension as f64 / 2.0,
        report.cpt_window.0,
        report.cpt_window.1,
        if report.cpt_in_window {
            "inside"
        } else {
            "outside"
        }
    ));
    s.push_str(&format!(
        "a_hat = {:.6} (stderr {:.6}, constant {:.6})\n",
        report.a_fit.exponent, report.a_fit.stderr, report.a_fit.constant
    ));
    s.push_str(&format!(
        "b_hat = {:.6} (stderr {:.6}, constant {:.6})\n",
        report.b_fit.exponent, report.b_fit.stderr, report.b_fit.constant
    ));
    s.push_str(&format!(
        "m_hat = {:.6} (stderr {:.6}, constant {:.6})\n",
        report.m_fit.exponent, report.m_fit.stderr, report.m_fit.constant
    ));
    for (k, fit) in report.lp_fits.iter().enumerate() {
        let label = if k + 1 == report.p_list.len() {
            "p0".to_string()
        } else {
            format!("p{}", report.p_list[k])
        };
        s.push_str(&format!(
            "lp_slope_{label} = {:.6} (stderr {:.6})\n",
            fit.exponent, fit.stderr
        ));
    }
    for g in &report.gates {
        s.push_str(&format!(
            "[{}] {}: {}\n",
            if g.pass { "PASS" } else { "FAIL" },
            g.name,
            g.detail
        ));
    }
    s
}

/// Per-node solution table: node coordinates, u, grad u, Hessian spectral
/// norm, then the target-side node and v on the same row index.
pub fn solution_csv(sol: &EntropicSolution) -> String {
    let dim = sol.mu.dimension();
    let mut cols = vec!["index".to_string()];
    for a in 0..dim {
        cols.push(format!("x{}", a + 1));
    }
    cols.push("u".into());
    for a in 0..dim {
        cols.push(format!("grad_u{}", a + 1));
    }
    cols.push("hess_norm".into());
    for a in 0..dim {
        cols.push(format!("y{}", a + 1));
    }
    cols.push("v".into());
    let mut out = cols.join(",");
    out.push('\n');
    let rows = sol.mu.len().max(sol.nu.len());
    for i in 0..rows {
        let mut cells = vec![i.to_string()];
        if i < sol.mu.len() {
            let x = sol.mu.node(i);
            for a in 0..dim {
                cells.push(fmt17(x[a]));
            }
            cells.push(fmt17(sol.u_values()[i]));
            let g = grad_u(sol, x).expect("node query");
            for a in 0..dim {
                cells.push(fmt17(g[a]));
            }
            cells.push(fmt17(
                hessian_u(sol, x).expect("node query").spectral_norm(),
            ));
        } else {
            for _ in 0..(2 * dim + 2) {
                cells.push(String::new());
            }
        }
        if i < sol.nu.len() {
            let y = sol.nu.node(i);
            for a in 0..dim {
                cells.push(fmt17(y[a]));
            }
            cells.push(fmt17(sol.v_values()[i]));
        } else {
            for _ in 0..(dim + 1) {
                cells.push(String::new());
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Write `contents` to `path` atomically: temp sibling file + rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp.partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_float_format_is_17_significant_digits() {
        assert_eq!(fmt17(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
        assert_eq!(fmt17(-0.0078125), "-7.8125000000000000e-3");
        // always 17 significant digits, whatever the stored double is
        assert_eq!(fmt17(-3.5e-9).len(), "-3.4999999999999999e-9".len());
    }

    #[test]
    fn header_matches_documented_schema() {
        let header = sweep_csv_header(&[2.0, 3.0, 2.0]);
        assert_eq!(
            header,
            "epsilon,gap,lp_err_p2,lp_err_p3,lp_err_p0,sup_u_err,sup_grad_err,hess_norm,holder_seminorm,iterations,residual"
        );
    }

    #[test]
    fn atomic_write_round_trip() {
        let dir = std::env::temp_dir().join(format!("eotlab-report-test-{}", std::process::id()));
        let path = dir.join("x/y.csv");
        write_atomic(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1,2\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
