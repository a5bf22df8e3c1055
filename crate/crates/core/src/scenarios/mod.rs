//! End-to-end scenarios: an operator, a contour and every knob needed to run
//! the construction, plus the pieces that exercise it (commutant samples,
//! the verification suite, generators and convergence sweeps).

mod commutant;
mod examples;
mod random;
mod sweep;
mod verify;

use serde::{Deserialize, Serialize};

pub use commutant::{auxiliary_riesz_circle, sample_commutant, CommutantKind, CommutantSample, CommutantSpec};
pub use examples::{
    canonical_scenario, disk_grid, eigenvalue_on_contour_scenario, example1_scenario, example2_damping,
    example2_scenario, seeded_terms, unperturbed_scenario, DiskGrid, Envelope, Example1Options, Example2Options,
};
pub use random::{random_instance, ContourKind, RandomInstanceOptions};
pub use sweep::{
    coefficient_bounds, convergence_sweep, CoefficientBounds, SweepReport, SweepRow, TailRow, GAP_FLOOR_REL,
};
pub use verify::{verify_bundle, Check, VerificationOptions, VerificationReport};

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::hypotheses::{full_hypothesis_report, HypothesisOptions, HypothesisReport};
use crate::operator::PerturbedOperator;
use crate::projection::{assemble, extract_subspace, AssemblyOptions, ProjectionBundle, SubspaceBasis};
use crate::resolvent::FactoredCoefficients;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioOptions {
    pub assembly: AssemblyOptions,
    pub hypotheses: HypothesisOptions,
    pub verification: VerificationOptions,
    pub commutant: CommutantSpec,
}

impl ScenarioOptions {
    /// Hypothesis options sharing the node count, tolerances and seed of the run.
    pub fn synced_hypotheses(&self, seed: u64) -> HypothesisOptions {
        HypothesisOptions {
            nodes_per_segment: self.assembly.nodes_per_segment,
            tolerances: self.assembly.tolerances,
            seed,
            ..self.hypotheses
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub operator: PerturbedOperator,
    pub contour: Contour,
    pub coefficients: FactoredCoefficients,
    pub seed: u64,
    /// Term counts for truncation sweeps, strictly increasing.
    pub truncation_ladder: Vec<usize>,
    /// Nodes per segment for quadrature sweeps, strictly increasing.
    pub node_ladder: Vec<usize>,
    pub options: ScenarioOptions,
}

impl Scenario {
    /// Scenario with symmetric coefficient split and ladders covering the full term list.
    pub fn new(name: impl Into<String>, operator: PerturbedOperator, contour: Contour, seed: u64) -> Self {
        let coefficients = FactoredCoefficients::symmetric(&operator);
        let terms = operator.perturbation().len();
        let options = ScenarioOptions::default();
        Self {
            name: name.into(),
            operator,
            contour,
            coefficients,
            seed,
            truncation_ladder: vec![terms],
            node_ladder: vec![options.assembly.nodes_per_segment],
            options,
        }
    }

    pub fn with_ladders(mut self, truncation: Vec<usize>, nodes: Vec<usize>) -> Result<Self> {
        for (name, ladder) in [("truncation", &truncation), ("node", &nodes)] {
            if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} ladder {ladder:?} must be non-empty and strictly increasing"
                )));
            }
        }
        self.truncation_ladder = truncation;
        self.node_ladder = nodes;
        Ok(self)
    }

    pub fn with_nodes(mut self, nodes_per_segment: usize) -> Self {
        self.options.assembly.nodes_per_segment = nodes_per_segment;
        self
    }

    pub fn hypothesis_options(&self) -> HypothesisOptions {
        self.options.synced_hypotheses(self.seed)
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        full_hypothesis_report(&self.operator, &self.contour, &self.coefficients, &self.hypothesis_options())
    }

    pub fn assemble(&self) -> Result<ProjectionBundle> {
        assemble(&self.operator, &self.contour, &self.options.assembly)
    }
}

/// Results of hypotheses, construction and verification for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub hypotheses: HypothesisReport,
    pub bundle: Result<ProjectionBundle>,
    pub subspace: Option<Result<SubspaceBasis>>,
    pub verification: Option<VerificationReport>,
}

impl PipelineOutcome {
    pub fn all_pass(&self) -> bool {
        self.hypotheses.all_pass()
            && self.bundle.is_ok()
            && matches!(self.subspace, Some(Ok(_)))
            && self.verification.as_ref().is_some_and(VerificationReport::all_pass)
    }
}

/// Runs the hypothesis report, the construction and, if it succeeds, the
/// verification suite. The construction is attempted even when hypotheses fail.
pub fn run_scenario(scenario: &Scenario) -> PipelineOutcome {
    let hypotheses = scenario.hypotheses();
    let bundle = scenario.assemble();
    let (subspace, verification) = match &bundle {
        Ok(b) => {
            let subspace = extract_subspace(&b.p_plus_l, scenario.operator.space());
            let samples = sample_commutant(&scenario.operator, &scenario.options.commutant, scenario.seed);
            let report = match samples {
                Ok(samples) => verify_bundle(scenario, b, &samples),
                Err(e) => VerificationReport::failed(format!("commutant sampling: {e}")),
            };
            (Some(subspace), Some(report))
        }
        Err(_) => (None, None),
    };
    PipelineOutcome {
        hypotheses,
        bundle,
        subspace,
        verification,
    }
}
