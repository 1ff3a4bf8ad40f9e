//! Machine-readable report documents.
//!
//! Reports are TOML with a `schema_version` key. Floats are written with 17
//! significant digits so identical inputs give byte-identical files.

use std::fmt::Write;

use num_complex::Complex64;

use crate::admittance::AdmittanceSystem;
use crate::certificate::{CertificateReport, SolutionBall};
use crate::continuation::SweepResult;
use crate::fixed_point::SolveResult;
use crate::network::NetworkDescription;

pub const SCHEMA_VERSION: i64 = 1;

/// `x` with 17 significant digits, spelled so that TOML can read it back.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Default)]
struct Doc {
    out: String,
}

impl Doc {
    fn float(&mut self, key: &str, x: f64) {
        writeln!(self.out, "{key} = {}", fmt_f64(x)).unwrap();
    }

    fn opt_float(&mut self, key: &str, x: Option<f64>) {
        if let Some(x) = x {
            self.float(key, x);
        }
    }

    fn boolean(&mut self, key: &str, b: bool) {
        writeln!(self.out, "{key} = {b}").unwrap();
    }

    fn int(&mut self, key: &str, n: usize) {
        writeln!(self.out, "{key} = {n}").unwrap();
    }

    fn string(&mut self, key: &str, s: &str) {
        writeln!(self.out, "{key} = {}", toml::Value::String(s.to_string())).unwrap();
    }

    fn table(&mut self, name: &str) {
        writeln!(self.out, "\n[{name}]").unwrap();
    }

    fn array_table(&mut self, name: &str) {
        writeln!(self.out, "\n[[{name}]]").unwrap();
    }
}

fn header(doc: &mut Doc, kind: &str, net: &NetworkDescription) {
    writeln!(doc.out, "schema_version = {SCHEMA_VERSION}").unwrap();
    doc.string("kind", kind);
    doc.int("load_buses", net.load_count());
    doc.float("power_base_mva", net.bases().power_mva);
}

/// Report for one certificate evaluation.
pub fn check_report(net: &NetworkDescription, report: &CertificateReport) -> String {
    let mut doc = Doc::default();
    header(&mut doc, "check", net);
    if let Some(t) = &report.theorem {
        doc.boolean("theorem_ok", t.ok);
    }
    doc.boolean("corollary_ok", report.corollary.ok);
    doc.boolean("bolognani_ok", report.prior.bolognani_ok);
    doc.boolean("improved_ok", report.prior.improved_ok);
    if let Some(t) = &report.theorem {
        doc.table("theorem");
        doc.boolean("ok", t.ok);
        doc.float("xi_s_hat", t.xi_s_hat);
        doc.float("xi_delta_s", t.xi_delta_s);
        doc.float("u_min", t.u_min);
        doc.float("delta", t.delta);
        doc.opt_float("rho", t.rho);
    }
    doc.table("corollary");
    doc.boolean("ok", report.corollary.ok);
    doc.float("xi_s", report.corollary.xi_s);
    doc.opt_float("rho", report.corollary.rho);
    for d in &report.prior.detail {
        doc.array_table("prior_detail");
        doc.string("p", &d.p.to_string());
        doc.float("bolognani_value", d.bolognani_value);
        doc.boolean("bolognani_ok", d.bolognani_ok);
        doc.float("scaled_value", d.scaled_value);
        doc.float("improved_value", d.improved_value);
        doc.boolean("improved_ok", d.improved_ok);
    }
    doc.out
}

/// Report for a fixed-point run. The `[[buses]]` table has the operating
/// point layout, so a converged report can be fed back as `--operating-point`.
pub fn solve_report(
    net: &NetworkDescription,
    s: &[Complex64],
    result: &SolveResult,
    converged: bool,
    domain: Option<&SolutionBall>,
) -> String {
    let mut doc = Doc::default();
    header(&mut doc, "solve", net);
    doc.string("provenance", "solved");
    doc.table("solve");
    doc.boolean("converged", converged);
    doc.int("iterations", result.iterations);
    doc.float("final_step", result.final_step);
    doc.float("residual", result.residual);
    doc.float("residual_inf", result.residual_inf);
    doc.boolean("certified", result.certified);
    if let Some(c) = result.contained_in_d {
        doc.boolean("contained_in_d", c);
    }
    if let Some(d) = domain {
        doc.float("rho", d.rho());
    }
    let base = net.bases().power_mva;
    for ((bus, si), vi) in net.load_buses().iter().zip(s).zip(&result.v) {
        doc.array_table("buses");
        doc.string("id", &bus.id);
        doc.float("p_mw", si.re * base);
        doc.float("q_mvar", si.im * base);
        doc.float("v_re", vi.re);
        doc.float("v_im", vi.im);
        doc.float("v_mag", vi.norm());
        doc.float("v_angle_deg", vi.arg().to_degrees());
    }
    doc.out
}

/// Sweep table as CSV: `kappa,theorem,corollary,improved,prior,fp_converged`
/// with `kappa` in MVA. Columns that were not evaluated are left empty.
pub fn sweep_csv(result: &SweepResult, power_base: f64) -> String {
    let mut out = String::from("kappa,theorem,corollary,improved,prior,fp_converged\n");
    let cell = |mask: &Option<Vec<bool>>, i: usize| {
        mask.as_ref().map(|m| m[i].to_string()).unwrap_or_default()
    };
    for (i, kappa) in result.kappa_grid.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(kappa * power_base),
            cell(&result.theorem, i),
            result.corollary[i],
            result.improved[i],
            result.prior[i],
            cell(&result.fp_converged, i),
        )
        .unwrap();
    }
    out
}

/// Full `Y` (slack first) in coordinate form, one `row col re im` line per
/// stored entry.
pub fn dump_matrix(sys: &AdmittanceSystem) -> String {
    let mut out = String::from("row col re im\n");
    for (i, j, y) in sys.y.iter() {
        writeln!(out, "{i} {j} {} {}", fmt_f64(y.re), fmt_f64(y.im)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.1,
            -3.25e-7,
            1e300,
            f64::MIN_POSITIVE,
            0.1 + 0.2,
        ] {
            let s = fmt_f64(x);
            let v: toml::Value = toml::from_str(&format!("x = {s}")).unwrap();
            assert_eq!(v["x"].as_float().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }
}
