//! Text artifacts: the trajectory table (CSV) and key-value summaries.
//!
//! Trajectory columns, in order, for a team of `N` robots:
//!
//! | column | meaning |
//! |---|---|
//! | `t` | time, s |
//! | `p{i}_x, p{i}_y, v{i}_x, v{i}_y` | position and velocity of robot `i`, for `i = 1..N` |
//! | `uhat{i}_x, uhat{i}_y` | nominal control of robot `i` |
//! | `u{i}_x, u{i}_y` | applied control of robot `i` |
//! | `log_b` | `ln B`, `nan` without a certificate, `-inf` outside the set |
//! | `d{i}_{j}` | distance between robots `i < j`, lexicographic |
//! | `qp_status` | `unfiltered`, `slack`, `corrected` or `fallback` |
//! | `qp_iterations` | active-set iterations of the step's QP |
//!
//! Numbers are written with 9 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::certificates::ValidityReport;
use crate::sim::{SummaryMetrics, TrajectoryLog};

pub const SUMMARY_SCHEMA: &str = "barrier-compose-summary/1";
pub const VALIDITY_SCHEMA: &str = "barrier-compose-validity/1";

/// Formats with 9 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        cols.extend([format!("p{i}_x"), format!("p{i}_y"), format!("v{i}_x"), format!("v{i}_y")]);
    }
    for prefix in ["uhat", "u"] {
        for i in 1..=n {
            cols.extend([format!("{prefix}{i}_x"), format!("{prefix}{i}_y")]);
        }
    }
    cols.push("log_b".into());
    for i in 1..=n {
        for j in i + 1..=n {
            cols.push(format!("d{i}_{j}"));
        }
    }
    cols.push("qp_status".into());
    cols.push("qp_iterations".into());
    cols
}

pub fn write_trajectory<W: Write>(out: &mut W, log: &TrajectoryLog, n: usize) -> io::Result<()> {
    writeln!(out, "{}", trajectory_header(n).join(","))?;
    let mut row: Vec<String> = Vec::new();
    for r in &log.records {
        row.clear();
        row.push(num(r.t));
        for (p, v) in r.state.positions.iter().zip(&r.state.velocities) {
            row.extend([num(p[0]), num(p[1]), num(v[0]), num(v[1])]);
        }
        row.extend(r.nominal.iter().map(|&u| num(u)));
        row.extend(r.control.iter().map(|&u| num(u)));
        row.push(num(r.log_b.unwrap_or(f64::NAN)));
        row.extend(r.distances.iter().map(|&d| num(d)));
        row.push(r.status.as_str().into());
        row.push(r.qp_iterations.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn list<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Key-value summary of one run, one `key = value` per line.
pub fn summary_text(scenario: &str, log: &TrajectoryLog, m: &SummaryMetrics, kind: &str) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("schema", SUMMARY_SCHEMA.into());
    kv("scenario", scenario.into());
    kv("certificate", kind.into());
    kv("certificate_expression", log.certificate.clone().unwrap_or_else(|| "none".into()));
    kv("records", m.records.to_string());
    kv("final_time", num(log.records.last().map_or(0.0, |r| r.t)));
    kv("min_pair_distance", num(m.min_pair_distance));
    for &((i, j), lo, hi) in &m.pair_ranges {
        kv(&format!("pair.{}-{}.min", i + 1, j + 1), num(lo));
        kv(&format!("pair.{}-{}.max", i + 1, j + 1), num(hi));
    }
    for e in &m.required_edges {
        kv(&format!("edge.{}-{}.max_distance", e.edge.0 + 1, e.edge.1 + 1), num(e.max_distance));
    }
    for (k, g) in m.or_groups.iter().enumerate() {
        kv(
            &format!("or_group.{}.edges", k + 1),
            list(g.edges.iter().map(|(i, j)| format!("{}-{}", i + 1, j + 1))),
        );
        kv(&format!("or_group.{}.max_min_distance", k + 1), num(g.max_min_distance));
    }
    kv("min_log_b", m.min_log_b.map_or("n/a".into(), num));
    kv("waypoints_visited", list(&m.waypoints_visited));
    kv("waypoints_planned", list(&m.waypoints_planned));
    if let Some(per_step) = &m.satisfied_graph {
        let first = per_step.first().copied().flatten();
        let last = per_step.last().copied().flatten();
        let show = |g: Option<usize>| g.map_or("none".into(), |g| (g + 1).to_string());
        kv("satisfied_graph.first", show(first));
        kv("satisfied_graph.last", show(last));
        kv("graph_switches", m.graph_switches.to_string());
    }
    kv("max_speed", num(m.max_speed));
    kv("fallback_steps", m.fallback_steps.to_string());
    for c in &m.conditions {
        let key = format!("condition.{}", slug(&c.name));
        kv(&key, c.status.as_str().into());
        kv(&format!("{key}.certified"), c.certified.to_string());
    }
    kv("result", if m.certified_pass() { "pass" } else { "fail" }.into());
    s
}

/// Key-value rendering of a validity audit.
pub fn validity_text(scenario: &str, expression: &str, seed: u64, r: &ValidityReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("schema", VALIDITY_SCHEMA.into());
    kv("scenario", scenario.into());
    kv("certificate_expression", expression.into());
    kv("seed", seed.to_string());
    kv("requested", r.requested.to_string());
    kv("evaluated", r.evaluated.to_string());
    kv("skipped", r.skipped.to_string());
    kv("feasible", r.feasible.to_string());
    kv("infeasible", r.infeasible.to_string());
    kv("feasible_fraction", num(r.feasible_fraction()));
    kv("worst_margin", num(r.worst_margin));
    for (k, c) in r.counterexamples.iter().enumerate() {
        let key = format!("counterexample.{}", k + 1);
        kv(&format!("{key}.sample"), c.index.to_string());
        kv(&format!("{key}.margin"), num(c.margin));
        kv(
            &format!("{key}.positions"),
            list(c.state.positions.iter().flat_map(|p| [num(p[0]), num(p[1])])),
        );
        kv(
            &format!("{key}.velocities"),
            list(c.state.velocities.iter().flat_map(|v| [num(v[0]), num(v[1])])),
        );
    }
    kv("result", if r.all_feasible() { "pass" } else { "fail" }.into());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(num(0.15), "1.50000000e-1");
        assert_eq!(num(-2.0 / 3.0), "-6.66666667e-1");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn header_for_three_robots() {
        let h = trajectory_header(3);
        assert_eq!(h.len(), 1 + 12 + 6 + 6 + 1 + 3 + 2);
        assert_eq!(h[1..5], ["p1_x", "p1_y", "v1_x", "v1_y"]);
        assert_eq!(h[13], "uhat1_x");
        assert_eq!(h[19], "u1_x");
        assert_eq!(h[25..29], ["log_b", "d1_2", "d1_3", "d2_3"]);
        assert_eq!(h.last().unwrap(), "qp_iterations");
    }
}
