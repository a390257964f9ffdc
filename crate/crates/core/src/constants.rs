//! Table of the critical and profile constants, each computed by a closed
//! form and by an independent numerical route.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::analytic::{
    c_star, eta_star, k_star, k_star_by_root, phi_reduced, printed, stationary_threshold, surface_tension, CHI,
};
use crate::profile1d::{
    constant_b, constant_m, surface_tension_gradient_form, surface_tension_potential_form, surface_tension_quadrature,
};
use crate::well::potential_second;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub name: String,
    pub closed_form: f64,
    pub numeric: Option<f64>,
    pub gap: Option<f64>,
    pub note: String,
}

impl ConstantRow {
    fn pair(name: &str, closed_form: f64, numeric: f64, note: &str) -> Self {
        Self {
            name: name.into(),
            closed_form,
            numeric: Some(numeric),
            gap: Some((closed_form - numeric).abs()),
            note: note.into(),
        }
    }

    fn single(name: &str, value: f64, note: &str) -> Self {
        Self { name: name.into(), closed_form: value, numeric: None, gap: None, note: note.into() }
    }

    pub const CSV_HEADER: &'static str = "name,closed_form,numeric,gap,note";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{:.16e},{},{},\"{}\"",
            self.name,
            self.closed_form,
            opt(self.numeric),
            opt(self.gap),
            self.note.replace('"', "'")
        )
    }
}

/// Minimum of `η ↦ η^{1-1/d} + C(1-η)²` on `[1/(d+1), 1]`, where the
/// function is unimodal, by golden-section search.
fn interior_minimum(c: f64, d: usize) -> (f64, f64) {
    let f = |eta: f64| phi_reduced(eta, c, d);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1.0 / (d as f64 + 1.0), 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if b - a < 1e-15 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    // Golden section pins the minimizer only to ~sqrt(eps); polish with
    // Newton on the derivative.
    let dd = d as f64;
    let mut eta = 0.5 * (a + b);
    for _ in 0..8 {
        let g = (1.0 - 1.0 / dd) * eta.powf(-1.0 / dd) - 2.0 * c * (1.0 - eta);
        let gp = -(1.0 - 1.0 / dd) / dd * eta.powf(-1.0 / dd - 1.0) + 2.0 * c;
        eta -= g / gp;
    }
    (eta, f(eta))
}

/// `C` at which the interior minimum of the reduced energy equals its value
/// `C` at `η = 0`, found by bisection; also returns the tie volume fraction.
pub fn numeric_tie(d: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (stationary_threshold(d), 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if interior_minimum(mid, d).1 > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    (c, interior_minimum(c, d).0)
}

pub fn constants_table(d: usize) -> Vec<ConstantRow> {
    let s = surface_tension();
    let (c_num, eta_num) = numeric_tie(d);
    let cs = c_star(d);
    let relation = printed::eta_star_relation(d);
    let mut rows = vec![
        ConstantRow::pair("S", s, surface_tension_quadrature(), "2^{3/2}/3 vs quadrature of sqrt(2F)"),
        ConstantRow::pair("S_gradient", s, surface_tension_gradient_form(), "integral of (m')^2"),
        ConstantRow::pair("S_potential", s, surface_tension_potential_form(), "2 x integral of F(m)"),
        ConstantRow::pair("chi", CHI, 1.0 / potential_second(-1.0), "1/F''(-1)"),
        ConstantRow::pair("C_star", cs, c_num, "closed form vs bisection on the tie of the reduced energy"),
        ConstantRow::pair("eta_star", eta_star(d), eta_num, "2/(d+1) vs interior minimizer at the tie"),
        ConstantRow::pair(
            "K_star",
            k_star(d, s, CHI),
            k_star_by_root(d, s, CHI),
            "closed form vs root of D(K) = C_star",
        ),
        ConstantRow::pair("M", PI * PI / 6.0, constant_m(), "pi^2/6 vs quadrature"),
        ConstantRow::pair("B", 2.0, constant_b(), "2 vs quadrature"),
        ConstantRow::single("C_spinodal", stationary_threshold(d), "smallest C with a metastable droplet"),
        ConstantRow::single(
            "eta_star_printed_relation",
            relation,
            &format!(
                "(d C_star)^(-d); not the tie point: reduced energy there exceeds the uniform value by {:.6}",
                phi_reduced(relation.min(1.0), cs, d) - cs
            ),
        ),
        ConstantRow::single(
            "eta_star_printed_display",
            printed::eta_star_display(d),
            "((d+1)/2)^((d+1)/(2d)); exceeds 1",
        ),
    ];
    if d != 2 {
        rows.push(ConstantRow::single("C_star_printed", printed::c_star(d), "agrees with C_star only for d = 2"));
        rows.push(ConstantRow::single(
            "K_star_printed",
            printed::k_star(d, s, CHI),
            "agrees with K_star only for d = 2",
        ));
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_self_consistent() {
        for d in [2, 3] {
            for row in constants_table(d) {
                if let Some(gap) = row.gap {
                    assert!(gap < 1e-8, "d={d} {}: {gap}", row.name);
                }
            }
        }
    }

    #[test]
    fn printed_relation_flagged_in_two_dimensions() {
        let rows = constants_table(2);
        let rel = rows.iter().find(|r| r.name == "eta_star_printed_relation").unwrap();
        assert!((rel.closed_form - 8.0 / 27.0).abs() < 1e-12);
        assert!(rel.note.contains("not the tie point"));
        assert!(!rows.iter().any(|r| r.name == "K_star_printed"));
    }
}
