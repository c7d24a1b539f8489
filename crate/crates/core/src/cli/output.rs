//! CSV writers. Every file starts with a header naming units; numbers use
//! Rust's shortest round-trip formatting, so output is locale-free and
//! byte-identical across runs. Wall-clock columns stay empty unless timings
//! are requested.

use std::fmt::Write;

use crate::engine::{analytic_iteration_bound, PriceResult};
use crate::model::{ModelParams, OptionSpec};

use super::tables::{ConvergenceRow, PriceRow};

fn seconds(value: f64, timings: bool) -> String {
    if timings {
        format!("{value:.6}")
    } else {
        String::new()
    }
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn price_csv(result: &PriceResult, m: &ModelParams, opt: &OptionSpec, timings: bool) -> String {
    let mut out = String::from(
        "spot[currency],price[currency],iters[count],psor_max[count],bound[currency],seconds[s]\n",
    );
    let n = result.report.iterations;
    let bound = analytic_iteration_bound(m, opt.strike(), opt.maturity, 0.0, n);
    let total: f64 = result.report.seconds.iter().sum();
    for &(spot, price) in &result.prices {
        let _ = writeln!(
            out,
            "{spot},{price},{n},{},{bound},{}",
            result.report.max_psor_iterations,
            seconds(total, timings)
        );
    }
    out
}

/// One row per lattice node, time-major.
pub fn surface_csv(result: &PriceResult) -> String {
    let mut out = String::from("x[log-price],t[years],value[currency]\n");
    for (m, slice) in result.surface.slices.iter().enumerate() {
        let t = result.grid.t[m];
        for (x, v) in result.grid.x.iter().zip(slice) {
            let _ = writeln!(out, "{x},{t},{v}");
        }
    }
    out
}

/// `iterates[n - 1]` is the boundary of `u_n`; the last column repeats the
/// converged boundary.
pub fn boundary_csv(t: &[f64], iterates: &[Vec<f64>], converged: &[f64]) -> String {
    let mut out = String::from("t[years]");
    for n in 1..=iterates.len() {
        let _ = write!(out, ",s_{n}[currency]");
    }
    out.push_str(",s_converged[currency]\n");
    for (m, t) in t.iter().enumerate() {
        let _ = write!(out, "{t}");
        for b in iterates {
            let _ = write!(out, ",{}", b[m]);
        }
        let _ = writeln!(out, ",{}", converged[m]);
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow], timings: bool) -> String {
    let mut out =
        String::from("L[count],M[count],value[currency],diff[currency],psor_max[count],seconds[s]\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.intervals,
            r.time_steps,
            r.value,
            opt(r.diff),
            r.psor_max,
            seconds(r.seconds, timings)
        );
    }
    out
}

pub fn table_csv(rows: &[PriceRow], timings: bool) -> String {
    let mut out = String::from(
        "row[index],label,spot[currency],value[currency],published[currency],diff[currency],oracle[currency],iters[count],psor_max[count],seconds[s]\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.row,
            r.label,
            r.spot,
            r.value,
            r.published,
            r.value - r.published,
            opt(r.oracle),
            r.iterations,
            r.psor_max,
            seconds(r.seconds, timings)
        );
    }
    out
}

/// Per-iteration sup-norm changes, written when the fixed point fails.
pub fn diagnostics_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration[count],sup_diff[currency]\n");
    for (n, d) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{d}", n + 1);
    }
    out
}
