use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::Result;
use crate::projection::{assemble, factors_at_nodes, riesz_of_t, AssemblyOptions};
use crate::resolvent::a_operator_norm;

/// Oracle gaps below `GAP_FLOOR_REL · (1 + ‖T‖)` count as converged.
pub const GAP_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub terms: usize,
    pub nodes: usize,
    /// `‖(P + L) − Riesz(T_N)‖` for the truncated operator.
    pub oracle_gap: f64,
    /// `Σ_{n > N} sₙ`.
    pub tail_bound: f64,
    /// `sup_z ‖A(z) − A_N(z)‖` over the quadrature nodes.
    pub tail_norm: f64,
    /// `sup_z ‖A_N(z)‖` over the quadrature nodes.
    pub sup_norm_a: f64,
    /// `sup_z ‖B_N(z)‖` over the quadrature nodes.
    pub sup_norm_b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub coefficient_sum: f64,
    pub gap_floor: f64,
    /// Failed monotonicity checks.
    pub violations: Vec<String>,
    /// Rows where `sup_z ‖A − A_N‖` exceeds `Σ_{n>N} sₙ`. The inequality
    /// holds when `|uₙ|, |vₙ| ≤ |f − z|·|gₙ|, |hₙ|` on the contour with unit
    /// `gₙ`, `hₙ`, not in general.
    pub coefficient_bound_violations: Vec<String>,
}

impl SweepReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn coefficient_bounds_hold(&self) -> bool {
        self.coefficient_bound_violations.is_empty()
    }
}

/// Oracle gap, coefficient tail and node suprema for every pair of the
/// truncation and node ladders. Checks that the gap drops by at least
/// `(M'/M)²` per node step until the floor and that the coefficient tail is
/// nonincreasing in `N`. Rows where `‖A − A_N‖ > Σ_{n>N} sₙ` at some node are
/// listed separately.
pub fn convergence_sweep(scenario: &Scenario) -> Result<SweepReport> {
    let t = &scenario.operator;
    let space = t.space();
    let tol = scenario.options.assembly.tolerances;
    let t_norm = space.operator_norm(&t.materialize());
    let coefficients: Vec<f64> = t.perturbation().terms().iter().map(|term| term.s).collect();
    let mut report = SweepReport {
        coefficient_sum: coefficients.iter().sum::<f64>() + 0.0,
        gap_floor: GAP_FLOOR_REL * (1.0 + t_norm),
        ..SweepReport::default()
    };
    for &n in &scenario.truncation_ladder {
        let truncated = t.with_perturbation(t.perturbation().truncated(n))?;
        let tail = t.with_perturbation(crate::operator::CompactPerturbation::new(
            t.perturbation().terms().iter().skip(n).cloned().collect(),
            t.atom_count(),
        )?)?;
        // `+ 0.0` turns the empty sum's `-0.0` into `0.0`.
        let tail_bound: f64 = coefficients.iter().skip(n).sum::<f64>() + 0.0;
        let oracle = riesz_of_t(&truncated, &scenario.contour, scenario.options.verification.oracle_fallback_nodes)?;
        for &nodes in &scenario.node_ladder {
            let options = AssemblyOptions {
                nodes_per_segment: nodes,
                ..scenario.options.assembly
            };
            let bundle = assemble(&truncated, &scenario.contour, &options)?;
            let oracle_gap = space.operator_norm(&(&bundle.p_plus_l - &oracle.matrix));
            let rule = scenario.contour.quadrature(nodes)?;
            let factors = factors_at_nodes(&truncated, &rule, &tol)?;
            let (sup_norm_a, sup_norm_b) = factors
                .par_iter()
                .map(|f| (f.a_norm(space), f.b_norm(space)))
                .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
            let tail_norm = rule
                .nodes
                .par_iter()
                .map(|z| a_operator_norm(&tail, *z, &tol))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            report.rows.push(SweepRow {
                terms: n,
                nodes,
                oracle_gap,
                tail_bound,
                tail_norm,
                sup_norm_a,
                sup_norm_b,
            });
        }
    }
    check_rows(&mut report);
    Ok(report)
}

fn check_rows(report: &mut SweepReport) {
    let floor = report.gap_floor;
    let mut violations = Vec::new();
    for pair in report.rows.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        if prev.terms == next.terms {
            let ratio = next.nodes as f64 / prev.nodes as f64;
            let allowed = (prev.oracle_gap / (ratio * ratio)).max(floor);
            if next.oracle_gap > allowed {
                violations.push(format!(
                    "N = {}: oracle gap {:e} at {} nodes exceeds {allowed:e} after {:e} at {} nodes",
                    next.terms, next.oracle_gap, next.nodes, prev.oracle_gap, prev.nodes
                ));
            }
        } else if next.tail_bound > prev.tail_bound {
            violations.push(format!(
                "tail bound grows from {:e} at N = {} to {:e} at N = {}",
                prev.tail_bound, prev.terms, next.tail_bound, next.terms
            ));
        }
    }
    report.violations = violations;
    let mut bounds = Vec::new();
    for row in &report.rows {
        let slack = 1e-12 * (1.0 + row.tail_bound);
        if row.tail_norm > row.tail_bound + slack {
            bounds.push(format!(
                "N = {}, {} nodes: sup ‖A − A_N‖ = {:e} exceeds the coefficient tail {:e}",
                row.terms, row.nodes, row.tail_norm, row.tail_bound
            ));
        }
    }
    report.coefficient_bound_violations = bounds;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub terms: usize,
    /// `sup_z ‖A(z) − A_N(z)‖` over the quadrature nodes.
    pub tail_norm: f64,
    /// `Σ_{n > N} sₙ`.
    pub tail_bound: f64,
}

/// Node-wise comparison of `A(z)` with its coefficient sums.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoefficientBounds {
    pub nodes: usize,
    pub coefficient_sum: f64,
    /// `sup_z ‖A(z)‖` over the quadrature nodes.
    pub sup_norm_a: f64,
    pub tails: Vec<TailRow>,
    pub violations: Vec<String>,
}

impl CoefficientBounds {
    pub fn hold(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `‖A(z)‖ ≤ Σ sₙ` and `‖A(z) − A_N(z)‖ ≤ Σ_{n>N} sₙ` at every node of the
/// scenario's quadrature rule, for every `N` of the truncation ladder.
pub fn coefficient_bounds(scenario: &Scenario) -> Result<CoefficientBounds> {
    let t = &scenario.operator;
    let tol = scenario.options.assembly.tolerances;
    let rule = scenario.contour.quadrature(scenario.options.assembly.nodes_per_segment)?;
    let coefficients: Vec<f64> = t.perturbation().terms().iter().map(|term| term.s).collect();
    let coefficient_sum = coefficients.iter().sum::<f64>() + 0.0;
    let sup_norm_a = rule
        .nodes
        .par_iter()
        .map(|z| a_operator_norm(t, *z, &tol))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut bounds = CoefficientBounds {
        nodes: rule.len(),
        coefficient_sum,
        sup_norm_a,
        ..CoefficientBounds::default()
    };
    if sup_norm_a > coefficient_sum * (1.0 + 1e-12) {
        bounds
            .violations
            .push(format!("sup ‖A‖ = {sup_norm_a:e} exceeds Σ sₙ = {coefficient_sum:e}"));
    }
    for &n in &scenario.truncation_ladder {
        let tail = t.with_perturbation(crate::operator::CompactPerturbation::new(
            t.perturbation().terms().iter().skip(n).cloned().collect(),
            t.atom_count(),
        )?)?;
        let tail_bound = coefficients.iter().skip(n).sum::<f64>() + 0.0;
        let tail_norm = rule
            .nodes
            .par_iter()
            .map(|z| a_operator_norm(&tail, *z, &tol))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if tail_norm > tail_bound + 1e-12 * (1.0 + tail_bound) {
            bounds.violations.push(format!(
                "N = {n}: sup ‖A − A_N‖ = {tail_norm:e} exceeds the coefficient tail {tail_bound:e}"
            ));
        }
        bounds.tails.push(TailRow {
            terms: n,
            tail_norm,
            tail_bound,
        });
    }
    Ok(bounds)
}
