//! Scenario configuration files.
//!
//! A config is a TOML document with a `schema` id, a `name`, a `[numerics]`
//! table carrying the seed, and either an `[instance]` table naming a built-in
//! generator or the four tables `[space]`, `[symbol]`, `[perturbation]` and
//! `[contour]` describing an operator by hand. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use hyperinv_core::contour::{circle, split_rectangle, Contour};
use hyperinv_core::numkernel;
use hyperinv_core::operator::{CompactPerturbation, DiscretizedMeasureSpace, MultiplicationOperator, PerturbedOperator, Term};
use hyperinv_core::resolvent::Route;
use hyperinv_core::scenarios::{
    canonical_scenario, disk_grid, eigenvalue_on_contour_scenario, example1_scenario, example2_scenario, random_instance,
    seeded_terms, unperturbed_scenario, CommutantSpec, ContourKind, Envelope, Example1Options, Example2Options,
    RandomInstanceOptions, Scenario,
};
use hyperinv_core::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG_SCHEMA: &str = "hyperinv.scenario.v1";

/// Problem with a config file. `location` is a file path, optionally with a
/// line and column or a dotted key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    fn at(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexEntry {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexEntry::Real(re) => Complex64::new(re, 0.0),
            ComplexEntry::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl Default for ComplexEntry {
    fn default() -> Self {
        ComplexEntry::Real(0.0)
    }
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    pub name: String,
    /// Construct even when hypotheses fail, as with `--force`.
    #[serde(default)]
    pub force: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourSection>,
    pub numerics: NumericsSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

/// Built-in generators. Their seed is `numerics.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSection {
    Canonical,
    Unperturbed,
    EigenvalueOnContour,
    Example1 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radial: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angular: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coupling: Option<f64>,
    },
    Example2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radial: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angular: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terms: Option<usize>,
    },
    Random {
        contour: ContourKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_atoms: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_terms: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSection {
    /// Explicit weights, or `count` atoms of unit weight.
    Atoms {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
        #[serde(default = "two")]
        p: f64,
    },
    /// Polar cells of a disk; cell centroids are the sample points.
    DiskGrid {
        radius: f64,
        radial: usize,
        angular: usize,
        #[serde(default = "two")]
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolExpression {
    /// `f(ξ) = ξ`.
    Identity,
    /// `f(ξ) = |ξ|`.
    Modulus,
    /// `f(ξ) = ξ²`.
    Square,
    /// `f(ξ) = conj(ξ)`.
    Conjugate,
}

impl SymbolExpression {
    fn eval(self, xi: Complex64) -> Complex64 {
        match self {
            SymbolExpression::Identity => xi,
            SymbolExpression::Modulus => Complex64::new(xi.norm(), 0.0),
            SymbolExpression::Square => xi * xi,
            SymbolExpression::Conjugate => xi.conj(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SymbolSection {
    Explicit { values: Vec<ComplexEntry> },
    Expression { id: SymbolExpression },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub s: f64,
    pub u: Vec<ComplexEntry>,
    pub v: Vec<ComplexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSection {
    None,
    Explicit {
        terms: Vec<TermSpec>,
    },
    /// Unit-norm seeded factors scaled by `coefficients` and shaped by `envelope`.
    Seeded {
        coefficients: Vec<f64>,
        seed: u64,
        #[serde(default)]
        envelope: Envelope,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContourSection {
    Circle {
        #[serde(default)]
        center: ComplexEntry,
        radius: f64,
    },
    SplitRectangle {
        x0: f64,
        #[serde(default)]
        rho: f64,
    },
    /// Circle about `center` through the middle of the widest gap between
    /// the distances of the symbol values and eigenvalues to `center`.
    Auto {
        #[serde(default)]
        center: ComplexEntry,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_ladder: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_ladder: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_guard_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_singular: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_inverse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_fallback_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_min_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commutant: Option<CommutantSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineCommand {
    Check,
    Build,
    #[default]
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write `P`, `L`, `P + L` and the subspace basis.
    #[serde(default = "yes")]
    pub matrices: bool,
    /// Command whose report is the corpus baseline.
    #[serde(default)]
    pub baseline_command: BaselineCommand,
}

fn yes() -> bool {
    true
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            dir: None,
            matrices: true,
            baseline_command: BaselineCommand::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Overrides {
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let location = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at(&location, e.to_string()))?;
        Self::parse(&text, &location)
    }

    pub fn parse(text: &str, location: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let place = match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    format!("{location}:{line}:{col}")
                }
                None => location.to_owned(),
            };
            ConfigError::at(place, e.message().to_owned())
        })?;
        config.validate(location)?;
        Ok(config)
    }

    fn validate(&self, location: &str) -> Result<(), ConfigError> {
        if self.schema != CONFIG_SCHEMA {
            return Err(ConfigError::at(
                format!("{location}: schema"),
                format!("expected \"{CONFIG_SCHEMA}\", found \"{}\"", self.schema),
            ));
        }
        let manual = [
            ("space", self.space.is_some()),
            ("symbol", self.symbol.is_some()),
            ("perturbation", self.perturbation.is_some()),
            ("contour", self.contour.is_some()),
        ];
        if self.instance.is_some() {
            if let Some((key, _)) = manual.iter().find(|(_, present)| *present) {
                return Err(ConfigError::at(
                    format!("{location}: {key}"),
                    "not allowed together with [instance]",
                ));
            }
        } else if let Some((key, _)) = manual.iter().find(|(_, present)| !*present) {
            return Err(ConfigError::at(
                format!("{location}: {key}"),
                "missing table; give [space], [symbol], [perturbation] and [contour] or an [instance]",
            ));
        }
        Ok(())
    }

    pub fn apply(&mut self, overrides: Overrides) {
        if let Some(nodes) = overrides.nodes {
            self.numerics.nodes = Some(nodes);
        }
        if let Some(seed) = overrides.seed {
            self.numerics.seed = seed;
        }
    }

    /// SHA-256 of the canonical JSON form, so comments and layout do not count.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let seed = self.numerics.seed;
        let scenario = match &self.instance {
            Some(instance) => self.generated(instance, seed)?,
            None => self.manual(seed)?,
        };
        self.numerics.apply(scenario).map_err(|e| ConfigError::at("numerics", e))
    }

    fn generated(&self, instance: &InstanceSection, seed: u64) -> Result<Scenario, ConfigError> {
        let err = |e: hyperinv_core::Error| ConfigError::at("instance", e.to_string());
        let mut scenario = match instance {
            InstanceSection::Canonical => canonical_scenario().map_err(err)?,
            InstanceSection::Unperturbed => unperturbed_scenario().map_err(err)?,
            InstanceSection::EigenvalueOnContour => eigenvalue_on_contour_scenario().map_err(err)?,
            InstanceSection::Example1 {
                radial,
                angular,
                coupling,
            } => {
                let d = Example1Options::default();
                example1_scenario(&Example1Options {
                    radial: radial.unwrap_or(d.radial),
                    angular: angular.unwrap_or(d.angular),
                    coupling: coupling.unwrap_or(d.coupling),
                    seed,
                })
                .map_err(err)?
            }
            InstanceSection::Example2 { radial, angular, terms } => {
                let d = Example2Options::default();
                example2_scenario(&Example2Options {
                    radial: radial.unwrap_or(d.radial),
                    angular: angular.unwrap_or(d.angular),
                    terms: terms.unwrap_or(d.terms),
                    seed,
                })
                .map_err(err)?
            }
            InstanceSection::Random {
                contour,
                max_atoms,
                max_terms,
            } => {
                let d = RandomInstanceOptions::default();
                let options = RandomInstanceOptions {
                    max_atoms: max_atoms.unwrap_or(d.max_atoms),
                    max_terms: max_terms.unwrap_or(d.max_terms),
                    ..d
                };
                random_instance(seed, *contour, &options).map_err(err)?
            }
        };
        scenario.name.clone_from(&self.name);
        scenario.seed = seed;
        Ok(scenario)
    }

    fn manual(&self, seed: u64) -> Result<Scenario, ConfigError> {
        let (Some(space_cfg), Some(symbol_cfg), Some(pert_cfg), Some(contour_cfg)) =
            (&self.space, &self.symbol, &self.perturbation, &self.contour)
        else {
            return Err(ConfigError::at("config", "operator tables are incomplete"));
        };
        let (space, points) = build_space(space_cfg)?;
        let n = space.atom_count();
        let symbol: Vec<Complex64> = match symbol_cfg {
            SymbolSection::Explicit { values } => {
                if values.len() != n {
                    return Err(ConfigError::at(
                        "symbol.values",
                        format!("{} values for {n} atoms", values.len()),
                    ));
                }
                values.iter().map(|v| v.value()).collect()
            }
            SymbolSection::Expression { id } => match &points {
                Some(points) => points.iter().map(|xi| id.eval(*xi)).collect(),
                None => {
                    return Err(ConfigError::at(
                        "symbol.id",
                        "expressions need sample points; use a disk-grid space",
                    ))
                }
            },
        };
        let terms = match pert_cfg {
            PerturbationSection::None => Vec::new(),
            PerturbationSection::Explicit { terms } => terms
                .iter()
                .enumerate()
                .map(|(i, term)| {
                    for (key, vector) in [("u", &term.u), ("v", &term.v)] {
                        if vector.len() != n {
                            return Err(ConfigError::at(
                                format!("perturbation.terms[{i}].{key}"),
                                format!("{} entries for {n} atoms", vector.len()),
                            ));
                        }
                    }
                    Ok(Term {
                        s: term.s,
                        u: term.u.iter().map(|x| x.value()).collect(),
                        v: term.v.iter().map(|x| x.value()).collect(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            PerturbationSection::Seeded {
                coefficients,
                seed,
                envelope,
            } => {
                let at = points.clone().unwrap_or_else(|| symbol.clone());
                seeded_terms(&space, &at, coefficients, *envelope, *seed)
                    .map_err(|e| ConfigError::at("perturbation", e.to_string()))?
            }
        };
        let base = MultiplicationOperator::new(space, symbol).map_err(|e| ConfigError::at("symbol", e.to_string()))?;
        let k = CompactPerturbation::new(terms, n).map_err(|e| ConfigError::at("perturbation", e.to_string()))?;
        let t = PerturbedOperator::new(base, k).map_err(|e| ConfigError::at("perturbation", e.to_string()))?;
        let contour = build_contour(contour_cfg, &t)?;
        Ok(Scenario::new(self.name.clone(), t, contour, seed))
    }
}

fn build_space(cfg: &SpaceSection) -> Result<(DiscretizedMeasureSpace, Option<Vec<Complex64>>), ConfigError> {
    let err = |e: hyperinv_core::Error| ConfigError::at("space", e.to_string());
    match cfg {
        SpaceSection::Atoms { weights, count, p } => {
            let weights = match (weights, count) {
                (Some(w), None) => w.clone(),
                (None, Some(n)) => vec![1.0; *n],
                (Some(w), Some(n)) if w.len() == *n => w.clone(),
                (Some(w), Some(n)) => {
                    return Err(ConfigError::at(
                        "space.count",
                        format!("count {n} disagrees with {} weights", w.len()),
                    ))
                }
                (None, None) => return Err(ConfigError::at("space", "atoms need weights or count")),
            };
            Ok((DiscretizedMeasureSpace::new(weights, *p).map_err(err)?, None))
        }
        SpaceSection::DiskGrid {
            radius,
            radial,
            angular,
            p,
        } => {
            let grid = disk_grid(*radius, *radial, *angular).map_err(err)?;
            let space = DiscretizedMeasureSpace::new(grid.weights, *p).map_err(err)?;
            Ok((space, Some(grid.centroids)))
        }
    }
}

fn build_contour(cfg: &ContourSection, t: &PerturbedOperator) -> Result<Contour, ConfigError> {
    let err = |e: hyperinv_core::Error| ConfigError::at("contour", e.to_string());
    match cfg {
        ContourSection::Circle { center, radius } => circle(center.value(), *radius).map_err(err),
        ContourSection::SplitRectangle { x0, rho } => split_rectangle(*x0, *rho).map_err(err),
        ContourSection::Auto { center } => {
            let center = center.value();
            let eig = numkernel::eig(&t.materialize()).map_err(err)?;
            let mut radii: Vec<f64> = t
                .symbol()
                .iter()
                .chain(&eig.eigenvalues)
                .map(|w| (w - center).norm())
                .collect();
            radii.sort_by(f64::total_cmp);
            let widest = radii
                .windows(2)
                .map(|w| (w[1] - w[0], 0.5 * (w[0] + w[1])))
                .filter(|(gap, _)| *gap > 0.0)
                .max_by(|a, b| a.0.total_cmp(&b.0));
            match widest {
                Some((_, radius)) if radius > 0.0 => circle(center, radius).map_err(err),
                _ => Err(ConfigError::at(
                    "contour",
                    "auto placement needs points at two different distances from the center",
                )),
            }
        }
    }
}

impl NumericsSection {
    fn apply(&self, mut scenario: Scenario) -> Result<Scenario, String> {
        if let Some(nodes) = self.nodes {
            if nodes == 0 {
                return Err("nodes must be positive".into());
            }
            scenario = scenario.with_nodes(nodes);
        }
        let truncation = self.truncation_ladder.clone();
        let node_ladder = self.node_ladder.clone();
        if truncation.is_some() || node_ladder.is_some() {
            let truncation = truncation.unwrap_or_else(|| scenario.truncation_ladder.clone());
            let node_ladder = node_ladder.unwrap_or_else(|| scenario.node_ladder.clone());
            scenario = scenario.with_ladders(truncation, node_ladder).map_err(|e| e.to_string())?;
        }
        let o = &mut scenario.options;
        if let Some(route) = self.route {
            o.assembly.route = route;
        }
        set(&mut o.assembly.tolerances.range_guard_rel, self.range_guard_rel);
        set(&mut o.assembly.tolerances.near_singular, self.near_singular);
        set(&mut o.verification.oracle_rel, self.oracle_rel);
        set(&mut o.verification.residual, self.residual);
        set(&mut o.verification.spectrum, self.spectrum);
        set(&mut o.verification.right_inverse, self.right_inverse);
        set(&mut o.verification.lattice_delta, self.lattice_delta);
        set(&mut o.verification.oracle_fallback_nodes, self.oracle_fallback_nodes);
        set(&mut o.hypotheses.cluster_eps, self.cluster_eps);
        set(&mut o.hypotheses.cluster_min_mass, self.cluster_min_mass);
        set(&mut o.hypotheses.contour_margin, self.contour_margin);
        set(&mut o.hypotheses.lipschitz_cap, self.lipschitz_cap);
        set(&mut o.hypotheses.x0_candidates, self.x0_candidates);
        if let Some(spec) = &self.commutant {
            o.commutant = spec.clone();
        }
        Ok(scenario)
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}
