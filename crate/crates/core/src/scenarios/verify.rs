use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::commutant::CommutantSample;
use super::Scenario;
use crate::projection::{
    extract_subspace, factors_at_nodes, idempotent_spectrum_defect, riesz_of_t, OracleMethod, ProjectionBundle,
};
use crate::resolvent::right_inverse_residual_basis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerificationOptions {
    /// `‖P + L − Riesz(T)‖ ≤ oracle_rel · (1 + ‖T‖)`.
    pub oracle_rel: f64,
    /// Scaled idempotency, commutation and invariance residuals.
    pub residual: f64,
    /// `{0, 1}` defect of the spectrum of `P + L`.
    pub spectrum: f64,
    pub right_inverse: f64,
    /// Lattice test vectors avoid atoms with `|f_i − z| < lattice_delta`.
    pub lattice_delta: f64,
    /// Nodes per segment for the quadrature fallback of the Riesz oracle.
    pub oracle_fallback_nodes: usize,
}

impl Default for VerificationOptions {
    fn default() -> Self {
        Self {
            oracle_rel: 1e-8,
            residual: 1e-8,
            spectrum: 1e-8,
            right_inverse: 1e-10,
            lattice_delta: 1e-3,
            oracle_fallback_nodes: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(value: f64, threshold: f64) -> Self {
        Self {
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: BTreeMap<String, Check>,
    pub values: BTreeMap<String, f64>,
    pub subspace_dimension: Option<usize>,
    pub oracle_method: Option<OracleMethod>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn failed(note: String) -> Self {
        let mut report = Self::default();
        report.checks.insert(
            "completed".into(),
            Check {
                value: 0.0,
                threshold: 1.0,
                pass: false,
            },
        );
        report.notes.push(note);
        report
    }

    pub fn all_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.values().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Largest value among checks whose key starts with `prefix`.
    pub fn max_value(&self, prefix: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, c)| c.value)
            .reduce(f64::max)
    }

    fn fail(&mut self, key: &str, note: String) {
        self.checks.insert(
            key.into(),
            Check {
                value: f64::INFINITY,
                threshold: 0.0,
                pass: false,
            },
        );
        self.notes.push(note);
    }
}

/// Residual suite for an assembled bundle: oracle gap, idempotency,
/// `{0, 1}` spectrum, commutation and invariance against every sample,
/// subspace nontriviality and right-inverse residuals at every node.
pub fn verify_bundle(scenario: &Scenario, bundle: &ProjectionBundle, samples: &[CommutantSample]) -> VerificationReport {
    let t = &scenario.operator;
    let space = t.space();
    let opts = &scenario.options.verification;
    let mut report = VerificationReport::default();
    let n = t.atom_count();
    let pl = &bundle.p_plus_l;
    let t_norm = space.operator_norm(&t.materialize());
    let pl_norm = space.operator_norm(pl);
    report.values.insert("norm_t".into(), t_norm);
    report.values.insert("norm_p_plus_l".into(), pl_norm);
    report.values.insert("min_certificate".into(), bundle.min_certificate);
    report.values.insert("quadrature_nodes".into(), bundle.quadrature_nodes_used as f64);

    match riesz_of_t(t, &scenario.contour, opts.oracle_fallback_nodes) {
        Ok(oracle) => {
            let gap = space.operator_norm(&(pl - &oracle.matrix));
            report
                .checks
                .insert("oracle_gap".into(), Check::at_most(gap, opts.oracle_rel * (1.0 + t_norm)));
            report.values.insert("oracle_condition".into(), oracle.condition_estimate);
            report.values.insert("spectral_distance".into(), oracle.spectral_distance);
            report.oracle_method = Some(oracle.method);
        }
        Err(e) => report.fail("oracle_gap", format!("Riesz oracle: {e}")),
    }

    let scale = 1.0 + pl_norm;
    let idem = space.operator_norm(&(pl * pl - pl)) / (scale * scale);
    report.checks.insert("idempotency".into(), Check::at_most(idem, opts.residual));
    match idempotent_spectrum_defect(pl) {
        Ok(d) => {
            report.checks.insert("spectrum_01".into(), Check::at_most(d, opts.spectrum));
        }
        Err(e) => report.fail("spectrum_01", format!("spectrum of P + L: {e}")),
    }

    let subspace = extract_subspace(pl, space);
    match &subspace {
        Ok(basis) => {
            report.subspace_dimension = Some(basis.dimension);
            report.checks.insert(
                "subspace_nontrivial".into(),
                Check {
                    value: basis.dimension as f64,
                    threshold: n as f64,
                    pass: true,
                },
            );
        }
        Err(e) => report.fail("subspace_nontrivial", e.to_string()),
    }

    let residuals: Vec<(f64, Option<f64>)> = samples
        .par_iter()
        .map(|sample| {
            let s = &sample.matrix;
            let s_norm = space.operator_norm(s);
            let comm = if s_norm == 0.0 {
                0.0
            } else {
                space.operator_norm(&(s * pl - pl * s)) / (s_norm * scale)
            };
            let inv = subspace.as_ref().ok().map(|b| b.invariance_residual(s, space));
            (comm, inv)
        })
        .collect();
    for (i, (sample, (comm, inv))) in samples.iter().zip(residuals).enumerate() {
        let label = format!("{i:02}.{}", sample.kind.label());
        report
            .checks
            .insert(format!("commutation.{label}"), Check::at_most(comm, opts.residual));
        if let Some(inv) = inv {
            report
                .checks
                .insert(format!("invariance.{label}"), Check::at_most(inv, opts.residual));
        }
    }
    if !samples.iter().any(|s| s.kind == super::CommutantKind::Operator) {
        if let Ok(basis) = &subspace {
            let inv = basis.invariance_residual(&t.materialize(), space);
            report
                .checks
                .insert("invariance.operator".into(), Check::at_most(inv, opts.residual));
        }
    }

    let rule = match scenario.contour.quadrature(scenario.options.assembly.nodes_per_segment) {
        Ok(r) => r,
        Err(e) => {
            report.fail("right_inverse", e.to_string());
            return report;
        }
    };
    match factors_at_nodes(t, &rule, &scenario.options.assembly.tolerances) {
        Ok(factors) => {
            let worst: Vec<crate::Result<f64>> = factors
                .par_iter()
                .map(|f| right_inverse_residual_basis(t, f, opts.lattice_delta))
                .collect();
            match worst.into_iter().collect::<crate::Result<Vec<f64>>>() {
                Ok(values) => {
                    let (node, max) = values
                        .iter()
                        .enumerate()
                        .fold((0, 0.0), |acc, (j, v)| if *v > acc.1 { (j, *v) } else { acc });
                    report
                        .checks
                        .insert("right_inverse".into(), Check::at_most(max, opts.right_inverse));
                    report.values.insert("right_inverse_worst_node".into(), node as f64);
                }
                Err(e) => report.fail("right_inverse", e.to_string()),
            }
        }
        Err(e) => report.fail("right_inverse", e.to_string()),
    }
    report
}
