//! Command implementations. Each returns a report and the artifacts to write;
//! nothing here touches the file system.

use hyperinv_core::hypotheses::{HypothesisReport, INVERTIBILITY};
use hyperinv_core::projection::{extract_subspace, riesz_of_t};
use hyperinv_core::scenarios::{
    coefficient_bounds, convergence_sweep, sample_commutant, verify_bundle, Example1Options, Example2Options, Scenario,
    SweepReport,
};
use hyperinv_core::{ComplexMatrix, Error};

use crate::config::{BaselineCommand, InstanceSection, NumericsSection, OutputsSection, ScenarioConfig, CONFIG_SCHEMA};
use crate::report::{MachineExt, ReportDocument};

/// Process exit statuses. Every run ends in exactly one of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    /// Corpus baselines no longer match.
    Drift = 1,
    Config = 2,
    Hypothesis = 3,
    SingularNode = 4,
    TrivialSubspace = 5,
    /// Verification residuals above threshold, non-monotone sweeps, or a
    /// numerical routine that did not converge.
    Failure = 6,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::NearSingular { .. } | Error::SingularSystem { .. } => Status::SingularNode,
            Error::TrivialSubspace { .. } => Status::TrivialSubspace,
            Error::InvalidParameter(_) | Error::Dimension { .. } => Status::Config,
            Error::RangeMembership { .. }
            | Error::OnCurve { .. }
            | Error::LatticeViolation { .. }
            | Error::RealLineCollision { .. }
            | Error::NoAdmissibleX0 { .. } => Status::Hypothesis,
            Error::NonFinite(_) | Error::NoConvergence { .. } | Error::NotNormal { .. } | Error::CommutantRejected(_) => {
                Status::Failure
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub report: ReportDocument,
    /// File stem and matrix, written when matrices are enabled.
    pub matrices: Vec<(&'static str, ComplexMatrix)>,
    /// Tab-separated sweep table.
    pub table: Option<String>,
}

impl Outcome {
    fn new(command: &str, scenario: &str, digest: &str) -> Self {
        Self {
            status: Status::Pass,
            report: ReportDocument::new(command, scenario, digest),
            matrices: Vec::new(),
            table: None,
        }
    }

    fn finish(mut self, status: Status) -> Self {
        self.status = status;
        self.report.exit_status = status.code();
        self
    }

    fn fail_with(mut self, stage: &str, e: &Error) -> Self {
        let status = Status::of_error(e);
        self.report.machine.text(format!("{stage}.error"), e.to_string());
        if let Error::NearSingular { node, z, sigma_min, .. } = e {
            if let Some(node) = node {
                self.report.machine.count(format!("{stage}.singular_node"), *node);
            }
            self.report.machine.text(format!("{stage}.singular_z"), z.to_string());
            self.report.machine.number(format!("{stage}.singular_sigma_min"), *sigma_min);
        }
        self.report.notes.push(format!("{stage}: {e}"));
        self.finish(status)
    }
}

pub fn command_name(command: BaselineCommand) -> &'static str {
    match command {
        BaselineCommand::Check => "check",
        BaselineCommand::Build => "build",
        BaselineCommand::Verify => "verify",
        BaselineCommand::Sweep => "sweep",
    }
}

/// Runs `command` on a parsed config. Construction errors become statuses;
/// config problems found while building the scenario give [`Status::Config`].
pub fn run(command: BaselineCommand, config: &ScenarioConfig, force: bool) -> Outcome {
    let force = force || config.force;
    let digest = config.digest();
    let name = command_name(command);
    let scenario = match config.to_scenario() {
        Ok(s) => s,
        Err(e) => {
            let mut out = Outcome::new(name, &config.name, &digest);
            out.report.machine.text("config.error", e.to_string());
            out.report.notes.push(format!("config: {e}"));
            return out.finish(Status::Config);
        }
    };
    let mut out = Outcome::new(name, &scenario.name, &digest);
    describe(&mut out, &scenario);
    match command {
        BaselineCommand::Check => check(out, &scenario),
        BaselineCommand::Build => build(out, &scenario, force, false),
        BaselineCommand::Verify => build(out, &scenario, force, true),
        BaselineCommand::Sweep => sweep(out, &scenario),
    }
}

fn describe(out: &mut Outcome, s: &Scenario) {
    let m = &mut out.report.machine;
    m.count("scenario.atoms", s.operator.atom_count());
    m.count("scenario.terms", s.operator.perturbation().len());
    m.count("scenario.seed", s.seed as usize);
    m.count("scenario.nodes_per_segment", s.options.assembly.nodes_per_segment);
    m.count("scenario.contour_segments", s.contour.segments().len());
}

fn record_hypotheses(out: &mut Outcome, report: &HypothesisReport) {
    let m = &mut out.report.machine;
    m.flag("hypotheses.all_pass", report.all_pass());
    for entry in &report.entries {
        m.flag(format!("hypotheses.{}.pass", entry.name), entry.pass);
        m.flag(format!("hypotheses.{}.applicable", entry.name), entry.applicable);
        for (key, value) in &entry.witnesses {
            m.number(format!("hypotheses.{}.{key}", entry.name), *value);
        }
        for note in &entry.notes {
            out.report.notes.push(format!("{}: {note}", entry.name));
        }
    }
}

fn check(mut out: Outcome, s: &Scenario) -> Outcome {
    let report = s.hypotheses();
    record_hypotheses(&mut out, &report);
    let status = if report.all_pass() { Status::Pass } else { Status::Hypothesis };
    out.finish(status)
}

fn build(mut out: Outcome, s: &Scenario, force: bool, verify: bool) -> Outcome {
    let hypotheses = s.hypotheses();
    record_hypotheses(&mut out, &hypotheses);
    if !hypotheses.all_pass() {
        out.report.machine.flag("build.forced", force);
        if !force {
            // A failed invertibility check means a singular node; the assembly
            // names it.
            let singular = hypotheses.entry(INVERTIBILITY).is_some_and(|e| e.applicable && !e.pass);
            if singular {
                if let Err(e) = s.assemble() {
                    return out.fail_with("build", &e);
                }
            }
            out.report
                .notes
                .push(format!("build: hypotheses failed: {}", hypotheses.failures().join(", ")));
            return out.finish(Status::Hypothesis);
        }
    }
    let bundle = match s.assemble() {
        Ok(b) => b,
        Err(e) => return out.fail_with("build", &e),
    };
    let space = s.operator.space();
    let t_norm = space.operator_norm(&s.operator.materialize());
    {
        let m = &mut out.report.machine;
        m.number("build.min_certificate", bundle.min_certificate);
        m.count("build.quadrature_nodes", bundle.quadrature_nodes_used);
        m.number("build.norm_t", t_norm);
        m.number("build.norm_l", space.operator_norm(&bundle.l));
    }
    match riesz_of_t(&s.operator, &s.contour, s.options.verification.oracle_fallback_nodes) {
        Ok(oracle) => {
            let gap = space.operator_norm(&(&bundle.p_plus_l - &oracle.matrix));
            out.report.machine.number("build.oracle_gap", gap);
            out.report.machine.number("build.oracle_gap_rel", gap / (1.0 + t_norm));
        }
        Err(e) => out.report.notes.push(format!("build: Riesz oracle unavailable: {e}")),
    }
    out.matrices.push(("p", bundle.p.clone()));
    out.matrices.push(("l", bundle.l.clone()));
    out.matrices.push(("p_plus_l", bundle.p_plus_l.clone()));
    let basis = match extract_subspace(&bundle.p_plus_l, space) {
        Ok(b) => b,
        Err(e) => return out.fail_with("build", &e),
    };
    out.report.machine.count("build.subspace_dimension", basis.dimension);
    out.matrices.push(("basis", basis.basis.clone()));
    if !verify {
        return out.finish(Status::Pass);
    }

    let samples = match sample_commutant(&s.operator, &s.options.commutant, s.seed) {
        Ok(samples) => samples,
        Err(e) => return out.fail_with("verify", &e),
    };
    let report = verify_bundle(s, &bundle, &samples);
    let m = &mut out.report.machine;
    m.count("verify.samples", samples.len());
    for (key, check) in &report.checks {
        m.number(format!("verify.{key}.value"), check.value);
        m.number(format!("verify.{key}.threshold"), check.threshold);
        m.flag(format!("verify.{key}.pass"), check.pass);
    }
    for (key, value) in &report.values {
        m.number(format!("verify.values.{key}"), *value);
    }
    m.flag("verify.all_pass", report.all_pass());
    out.report.notes.extend(report.notes.iter().map(|n| format!("verify: {n}")));
    let status = if report.all_pass() {
        Status::Pass
    } else {
        out.report
            .notes
            .push(format!("verify: failed checks: {}", report.failures().join(", ")));
        Status::Failure
    };
    out.finish(status)
}

pub const SWEEP_COLUMNS: [&str; 7] = ["N", "nodes", "oracle_gap", "tail_bound", "tail_norm", "sup_norm_a", "sup_norm_b"];

pub fn sweep_table(report: &SweepReport) -> String {
    let mut table = SWEEP_COLUMNS.join("\t");
    table.push('\n');
    for r in &report.rows {
        table.push_str(&format!(
            "{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}\t{:e}\n",
            r.terms, r.nodes, r.oracle_gap, r.tail_bound, r.tail_norm, r.sup_norm_a, r.sup_norm_b
        ));
    }
    table
}

fn sweep(mut out: Outcome, s: &Scenario) -> Outcome {
    let report = match convergence_sweep(s) {
        Ok(r) => r,
        Err(e) => return out.fail_with("sweep", &e),
    };
    let m = &mut out.report.machine;
    m.number("sweep.coefficient_sum", report.coefficient_sum);
    m.number("sweep.gap_floor", report.gap_floor);
    m.flag("sweep.monotone", report.pass());
    m.flag("sweep.coefficient_bounds_hold", report.coefficient_bounds_hold());
    for (i, r) in report.rows.iter().enumerate() {
        let key = format!("sweep.row{i:03}");
        m.count(format!("{key}.terms"), r.terms);
        m.count(format!("{key}.nodes"), r.nodes);
        m.number(format!("{key}.oracle_gap"), r.oracle_gap);
        m.number(format!("{key}.tail_bound"), r.tail_bound);
        m.number(format!("{key}.tail_norm"), r.tail_norm);
        m.number(format!("{key}.sup_norm_a"), r.sup_norm_a);
        m.number(format!("{key}.sup_norm_b"), r.sup_norm_b);
    }
    out.report.notes.extend(report.violations.iter().map(|v| format!("sweep: {v}")));
    out.report
        .notes
        .extend(report.coefficient_bound_violations.iter().map(|v| format!("sweep: {v}")));
    out.table = Some(sweep_table(&report));
    let status = if report.pass() { Status::Pass } else { Status::Failure };
    out.finish(status)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleName {
    Ex1,
    Ex2,
}

/// Generator overrides for `example`; unset fields keep the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExampleOverrides {
    pub radial: Option<usize>,
    pub angular: Option<usize>,
    pub coupling: Option<f64>,
    pub terms: Option<usize>,
    pub seed: Option<u64>,
    pub nodes: Option<usize>,
}

/// The config `example` runs, so the run can be repeated with `verify`.
pub fn example_config(name: ExampleName, o: &ExampleOverrides) -> Result<ScenarioConfig, String> {
    let (instance, label, seed) = match name {
        ExampleName::Ex1 => {
            if o.terms.is_some() {
                return Err("--terms applies to ex2 only".into());
            }
            let instance = InstanceSection::Example1 {
                radial: o.radial,
                angular: o.angular,
                coupling: o.coupling,
            };
            (instance, "example1", o.seed.unwrap_or(Example1Options::default().seed))
        }
        ExampleName::Ex2 => {
            if o.coupling.is_some() {
                return Err("--coupling applies to ex1 only".into());
            }
            let instance = InstanceSection::Example2 {
                radial: o.radial,
                angular: o.angular,
                terms: o.terms,
            };
            (instance, "example2", o.seed.unwrap_or(Example2Options::default().seed))
        }
    };
    Ok(ScenarioConfig {
        schema: CONFIG_SCHEMA.into(),
        name: label.into(),
        force: false,
        instance: Some(instance),
        space: None,
        symbol: None,
        perturbation: None,
        contour: None,
        numerics: NumericsSection {
            seed,
            nodes: o.nodes,
            ..NumericsSection::default()
        },
        outputs: OutputsSection::default(),
    })
}

/// Hypotheses, construction and verification of a worked example. For ex2
/// the node-wise coefficient bounds on `A(z)` are recorded and enforced.
pub fn run_example(name: ExampleName, config: &ScenarioConfig) -> Outcome {
    let mut out = run(BaselineCommand::Verify, config, false);
    out.report.command = "example".into();
    if name == ExampleName::Ex2 && out.status == Status::Pass {
        let scenario = match config.to_scenario() {
            Ok(s) => s,
            Err(e) => {
                out.report.notes.push(format!("config: {e}"));
                return out.finish(Status::Config);
            }
        };
        let bounds = match coefficient_bounds(&scenario) {
            Ok(b) => b,
            Err(e) => return out.fail_with("bounds", &e),
        };
        let m = &mut out.report.machine;
        m.count("bounds.nodes", bounds.nodes);
        m.number("bounds.coefficient_sum", bounds.coefficient_sum);
        m.number("bounds.sup_norm_a", bounds.sup_norm_a);
        for row in &bounds.tails {
            m.number(format!("bounds.tail{:03}.norm", row.terms), row.tail_norm);
            m.number(format!("bounds.tail{:03}.bound", row.terms), row.tail_bound);
        }
        m.flag("bounds.hold", bounds.hold());
        out.report.notes.extend(bounds.violations.iter().map(|v| format!("bounds: {v}")));
        if !bounds.hold() {
            return out.finish(Status::Failure);
        }
    }
    out
}
