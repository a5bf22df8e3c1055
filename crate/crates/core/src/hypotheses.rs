//! Executable checks of the existence hypotheses on a finite instance:
//! separation of two spectral clusters by the contour, the contour avoiding
//! the symbol, range membership of the perturbation vectors at every node,
//! invertibility and continuity of `A(z)` along the contour, the
//! summability conditions of the diagonal case, and the choice of the
//! vertical line `Re z = x₀` together with the measure of the excluded set.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::operator::{MultiplicationOperator, PerturbedOperator};
use crate::resolvent::{self, FactoredCoefficients, ResolventFactors, Tolerances};

/// Representatives (weighted centroids) of the `eps`-clusters of symbol
/// values carrying weight at least `min_mass`, sorted by real then imaginary part.
///
/// Clusters are peeled greedily: the atom whose `eps`-neighbourhood carries
/// the most unassigned weight (lowest index on ties) seeds the next cluster.
pub fn accumulation_points(base: &MultiplicationOperator, eps: f64, min_mass: f64) -> Result<Vec<Complex64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("cluster radius {eps} must be positive")));
    }
    let f = base.symbol();
    let w = base.space().weights();
    let n = f.len();
    let mut assigned = vec![false; n];
    let mut points = Vec::new();
    loop {
        let best = (0..n)
            .filter(|&i| !assigned[i])
            .map(|i| {
                let mass: f64 = (0..n)
                    .filter(|&j| !assigned[j] && (f[j] - f[i]).norm() <= eps)
                    .map(|j| w[j])
                    .sum();
                (i, mass)
            })
            .fold(None, |acc: Option<(usize, f64)>, (i, m)| match acc {
                Some((_, best)) if best >= m => acc,
                _ => Some((i, m)),
            });
        let Some((seed, mass)) = best else { break };
        if mass < min_mass {
            break;
        }
        let members: Vec<usize> = (0..n)
            .filter(|&j| !assigned[j] && (f[j] - f[seed]).norm() <= eps)
            .collect();
        let centroid = members.iter().map(|&j| f[j] * w[j]).sum::<Complex64>() / mass;
        for j in members {
            assigned[j] = true;
        }
        points.push(centroid);
    }
    points.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(points)
}

/// `a` inside and `b` outside the contour.
pub fn check_separation(contour: &Contour, a: Complex64, b: Complex64) -> Result<bool> {
    Ok(contour.contains(a)? && !contour.contains(b)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureZeroCheck {
    pub pass: bool,
    pub min_distance: f64,
    /// Total weight of the atoms whose symbol value lies within `delta` of the contour.
    pub tube_weight: f64,
}

pub fn check_measure_zero(base: &MultiplicationOperator, contour: &Contour, delta: f64) -> Result<MeasureZeroCheck> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("tube width {delta} must be positive")));
    }
    let mut min_distance = f64::INFINITY;
    let mut tube_weight = 0.0;
    for (f, w) in base.symbol().iter().zip(base.space().weights()) {
        let d = contour.distance_to(*f);
        min_distance = min_distance.min(d);
        if d < delta {
            tube_weight += w;
        }
    }
    Ok(MeasureZeroCheck {
        pass: min_distance >= delta,
        min_distance,
        tube_weight,
    })
}

/// `α_{n,k} = aₙ⟨uₙ, ê_k⟩`.
pub fn alpha_coefficients(t: &PerturbedOperator, coeffs: &FactoredCoefficients) -> Vec<Vec<Complex64>> {
    let space = t.space();
    t.perturbation()
        .terms()
        .iter()
        .zip(coeffs.a())
        .map(|(term, a)| space.basis_coefficients(&term.u).into_iter().map(|x| x * *a).collect())
        .collect()
}

/// `β_{n,j} = bₙ⟨ê_j, vₙ⟩`.
pub fn beta_coefficients(t: &PerturbedOperator, coeffs: &FactoredCoefficients) -> Vec<Vec<Complex64>> {
    let space = t.space();
    t.perturbation()
        .terms()
        .iter()
        .zip(coeffs.b())
        .map(|(term, b)| {
            space
                .basis_coefficients(&term.v)
                .into_iter()
                .map(|x| x.conj() * *b)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummabilityOptions {
    pub cap: f64,
    /// Relative growth allowed over the last quarter of the atoms.
    pub plateau_rel: f64,
    /// Below this many atoms there is no meaningful tail and the plateau test is skipped.
    pub plateau_min_atoms: usize,
}

impl Default for SummabilityOptions {
    fn default() -> Self {
        Self {
            cap: 1e6,
            plateau_rel: 1e-6,
            plateau_min_atoms: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityCheck {
    pub sum1: f64,
    pub sum2: f64,
    pub plateau1: bool,
    pub plateau2: bool,
    pub pass: bool,
}

fn column_partial_sums(coefficients: &[Vec<Complex64>], atoms: usize) -> Vec<f64> {
    let mut partial = Vec::with_capacity(atoms);
    let mut running = 0.0;
    for k in 0..atoms {
        running += coefficients.iter().map(|row| row[k].norm()).sum::<f64>();
        partial.push(running);
    }
    partial
}

fn plateaus(partial: &[f64], options: &SummabilityOptions) -> bool {
    let n = partial.len();
    if n < options.plateau_min_atoms || n == 0 {
        return true;
    }
    let total = partial[n - 1];
    let cut = partial[(3 * n) / 4 - 1];
    total - cut <= options.plateau_rel * total
}

/// `Σₙ Σ_k |aₙ⟨uₙ, ê_k⟩|` and `Σₙ Σ_j |bₙ⟨ê_j, vₙ⟩|` with the finite-truncation
/// witness of convergence: both below `cap` and the partial sums in atom
/// order flat over the last quarter.
pub fn check_summability(
    t: &PerturbedOperator,
    coeffs: &FactoredCoefficients,
    options: &SummabilityOptions,
) -> SummabilityCheck {
    let atoms = t.atom_count();
    let p1 = column_partial_sums(&alpha_coefficients(t, coeffs), atoms);
    let p2 = column_partial_sums(&beta_coefficients(t, coeffs), atoms);
    let sum1 = p1.last().copied().unwrap_or(0.0);
    let sum2 = p2.last().copied().unwrap_or(0.0);
    let plateau1 = plateaus(&p1, options);
    let plateau2 = plateaus(&p2, options);
    SummabilityCheck {
        sum1,
        sum2,
        plateau1,
        plateau2,
        pass: sum1 <= options.cap && sum2 <= options.cap && plateau1 && plateau2,
    }
}

/// `G(x) = Σ_k Σₙ |α_{n,k}|²/|Re f_k − x|² + Σ_j Σₙ |β_{n,j}|²/|Re f_j − x|²`.
pub fn g_value(t: &PerturbedOperator, coeffs: &FactoredCoefficients, x: f64, tol: &Tolerances) -> Result<f64> {
    let z = Complex64::new(x, 0.0);
    Ok(resolvent::norm_bound_a1(t, coeffs, z, tol)? + resolvent::norm_bound_a2(t, coeffs, z, tol)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct X0Choice {
    pub x0: f64,
    pub g: f64,
    pub admissible: usize,
    pub candidates: usize,
}

/// Admissible candidate (farther than `guard` from every `Re f_k`) minimizing
/// [`g_value`]; the first one in the given order wins ties.
pub fn choose_x0_among(
    t: &PerturbedOperator,
    coeffs: &FactoredCoefficients,
    candidates: &[f64],
    guard: f64,
) -> Result<X0Choice> {
    let tol = Tolerances {
        range_guard_rel: 0.0,
        ..Tolerances::default()
    };
    let admissible: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|x| t.symbol().iter().all(|f| (f.re - x).abs() > guard))
        .collect();
    let values: Vec<Result<f64>> = admissible.par_iter().map(|&x| g_value(t, coeffs, x, &tol)).collect();
    let mut best: Option<(f64, f64)> = None;
    for (x, g) in admissible.iter().zip(values) {
        let g = g?;
        if best.is_none_or(|(_, bg)| g < bg) {
            best = Some((*x, g));
        }
    }
    let (x0, g) = best.ok_or(Error::NoAdmissibleX0 { candidates: candidates.len() })?;
    Ok(X0Choice {
        x0,
        g,
        admissible: admissible.len(),
        candidates: candidates.len(),
    })
}

/// Candidates on a uniform grid over the open interval, each jittered by a
/// seeded uniform offset within its grid cell.
pub fn x0_candidates(interval: (f64, f64), count: usize, seed: u64) -> Result<Vec<f64>> {
    let (lo, hi) = interval;
    if !(lo < hi) || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "candidate interval ({lo}, {hi}) with {count} candidates is empty"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = (hi - lo) / count as f64;
    Ok((0..count)
        .map(|i| lo + h * (i as f64 + rng.random_range(0.05..0.95)))
        .collect())
}

pub fn choose_x0(
    t: &PerturbedOperator,
    coeffs: &FactoredCoefficients,
    interval: (f64, f64),
    candidates: usize,
    guard: f64,
    seed: u64,
) -> Result<X0Choice> {
    choose_x0_among(t, coeffs, &x0_candidates(interval, candidates, seed)?, guard)
}

/// `2δ Σₙ Σ_k |α_{n,k}|`, the bound on the length of the excluded set.
pub fn bad_set_bound(alpha: &[Vec<Complex64>], delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("half-width factor {delta} must be positive")));
    }
    let mass: f64 = alpha.iter().flatten().map(|a| a.norm()).sum();
    Ok(2.0 * delta * mass)
}

/// Exact length of `⋃ [Re f_k − δ|α_{n,k}|, Re f_k + δ|α_{n,k}|]`.
pub fn bad_set_measure(alpha: &[Vec<Complex64>], centers: &[f64], delta: f64) -> f64 {
    let mut intervals: Vec<(f64, f64)> = alpha
        .iter()
        .flat_map(|row| {
            row.iter().zip(centers).filter_map(|(a, c)| {
                let r = delta * a.norm();
                (r > 0.0).then_some((c - r, c + r))
            })
        })
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        match current {
            Some((cl, ch)) if lo <= ch => current = Some((cl, ch.max(hi))),
            Some((cl, ch)) => {
                total += ch - cl;
                current = Some((lo, hi));
            }
            None => current = Some((lo, hi)),
        }
    }
    if let Some((cl, ch)) = current {
        total += ch - cl;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOptions {
    /// Radius and minimal weight of a spectral cluster.
    pub cluster_eps: f64,
    pub cluster_min_mass: f64,
    /// Required distance between the symbol values and the contour.
    pub contour_margin: f64,
    pub nodes_per_segment: usize,
    pub tolerances: Tolerances,
    pub summability: SummabilityOptions,
    /// Adjacent-node difference quotients of `A(z)` above this value fail the continuity check.
    pub lipschitz_cap: f64,
    pub x0_candidates: usize,
    pub seed: u64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            cluster_eps: 0.1,
            cluster_min_mass: 0.0,
            contour_margin: 1e-6,
            nodes_per_segment: crate::contour::DEFAULT_NODES_PER_SEGMENT,
            tolerances: Tolerances::default(),
            summability: SummabilityOptions::default(),
            lipschitz_cap: 1e8,
            x0_candidates: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub applicable: bool,
    pub pass: bool,
    pub witnesses: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl HypothesisEntry {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            applicable: true,
            pass: false,
            witnesses: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn witness(&mut self, key: &str, value: f64) {
        self.witnesses.insert(key.to_owned(), value);
    }

    fn skipped(mut self, note: impl Into<String>) -> Self {
        self.applicable = false;
        self.pass = true;
        self.notes.push(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect()
    }
}

pub const SEPARATION: &str = "separation";
pub const CONTOUR_AVOIDS_SYMBOL: &str = "contour-avoids-symbol";
pub const RANGE_MEMBERSHIP: &str = "range-membership";
pub const INVERTIBILITY: &str = "invertibility";
pub const COMPACT_CONTINUOUS: &str = "compact-continuous";
pub const SUMMABILITY: &str = "summability";
pub const VERTICAL_LINE: &str = "vertical-line";

/// Runs every check and collects the results; failures are recorded, not raised.
pub fn full_hypothesis_report(
    t: &PerturbedOperator,
    contour: &Contour,
    coeffs: &FactoredCoefficients,
    options: &HypothesisOptions,
) -> HypothesisReport {
    let mut entries = Vec::new();
    let (separation, clusters) = separation_entry(t, contour, options);
    entries.push(separation);
    entries.push(contour_entry(t, contour, options));
    let (range, invertibility, continuity) = node_entries(t, contour, options);
    entries.push(range);
    entries.push(invertibility);
    entries.push(continuity);
    entries.push(summability_entry(t, coeffs, options));
    entries.push(vertical_line_entry(t, coeffs, &clusters, options));
    HypothesisReport { entries }
}

fn separation_entry(
    t: &PerturbedOperator,
    contour: &Contour,
    options: &HypothesisOptions,
) -> (HypothesisEntry, Option<(Complex64, Complex64)>) {
    let mut entry = HypothesisEntry::new(SEPARATION);
    let points = match accumulation_points(t.base(), options.cluster_eps, options.cluster_min_mass) {
        Ok(p) => p,
        Err(e) => {
            entry.notes.push(e.to_string());
            return (entry, None);
        }
    };
    entry.witness("clusters", points.len() as f64);
    let mut inside = None;
    let mut outside = None;
    for p in &points {
        match contour.contains(*p) {
            Ok(true) if inside.is_none() => inside = Some(*p),
            Ok(false) if outside.is_none() => outside = Some(*p),
            Err(e) => entry.notes.push(e.to_string()),
            _ => {}
        }
    }
    if let Some(a) = inside {
        entry.witness("a.re", a.re);
        entry.witness("a.im", a.im);
    }
    if let Some(b) = outside {
        entry.witness("b.re", b.re);
        entry.witness("b.im", b.im);
    }
    let pair = inside.zip(outside);
    entry.pass = pair.is_some();
    if !entry.pass {
        entry
            .notes
            .push("no cluster pair with one point inside and one outside the contour".into());
    }
    (entry, pair)
}

fn contour_entry(t: &PerturbedOperator, contour: &Contour, options: &HypothesisOptions) -> HypothesisEntry {
    let mut entry = HypothesisEntry::new(CONTOUR_AVOIDS_SYMBOL);
    match check_measure_zero(t.base(), contour, options.contour_margin) {
        Ok(check) => {
            entry.pass = check.pass;
            entry.witness("min_distance", check.min_distance);
            entry.witness("tube_weight", check.tube_weight);
            entry.witness("delta", options.contour_margin);
        }
        Err(e) => entry.notes.push(e.to_string()),
    }
    entry
}

fn node_entries(
    t: &PerturbedOperator,
    contour: &Contour,
    options: &HypothesisOptions,
) -> (HypothesisEntry, HypothesisEntry, HypothesisEntry) {
    let mut range = HypothesisEntry::new(RANGE_MEMBERSHIP);
    let mut invert = HypothesisEntry::new(INVERTIBILITY);
    let mut cont = HypothesisEntry::new(COMPACT_CONTINUOUS);
    range
        .notes
        .push("vₙ is tested against the range of the adjoint M_conj(f) − conj(z)".into());
    let rule = match contour.quadrature(options.nodes_per_segment) {
        Ok(r) => r,
        Err(e) => {
            for entry in [&mut range, &mut invert, &mut cont] {
                entry.notes.push(e.to_string());
            }
            return (range, invert, cont);
        }
    };
    let tol = options.tolerances;
    let guard_failures: Vec<(usize, Error)> = rule
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(j, z)| resolvent::check_range_membership(t, *z, &tol).err().map(|e| (j, e)))
        .collect();
    range.witness("nodes", rule.len() as f64);
    range.witness("violations", guard_failures.len() as f64);
    range.pass = guard_failures.is_empty();
    if let Some((j, e)) = guard_failures.first() {
        range.witness("first_violation_node", *j as f64);
        range.notes.push(e.to_string());
        invert.notes.push("skipped: range membership fails".into());
        cont.notes.push("skipped: range membership fails".into());
        return (range, invert, cont);
    }

    let relaxed = Tolerances {
        near_singular: 0.0,
        ..tol
    };
    let factors: Vec<Result<ResolventFactors>> = rule
        .nodes
        .par_iter()
        .map(|z| ResolventFactors::new(t, *z, &relaxed))
        .collect();
    let factors = match factors.into_iter().collect::<Result<Vec<_>>>() {
        Ok(f) => f,
        Err(e) => {
            invert.notes.push(e.to_string());
            cont.notes.push(e.to_string());
            return (range, invert, cont);
        }
    };
    let (worst_node, min_sigma) = factors
        .iter()
        .enumerate()
        .map(|(j, f)| (j, f.sigma_min))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    invert.witness("min_sigma", min_sigma);
    invert.witness("worst_node", worst_node as f64);
    invert.witness("threshold", tol.near_singular);
    invert.pass = min_sigma >= tol.near_singular;
    if !invert.pass {
        invert.notes.push(format!(
            "node {worst_node} at z = {} is within reach of the point spectrum",
            rule.nodes[worst_node]
        ));
    }

    let space = t.space();
    let norms: Vec<f64> = factors.par_iter().map(|f| f.a_norm(space)).collect();
    let m = factors.len();
    let quotients: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|j| {
            let k = (j + 1) % m;
            let step = (rule.nodes[k] - rule.nodes[j]).norm();
            if step == 0.0 {
                return 0.0;
            }
            factors[j].a_difference_norm(&factors[k], space) / step
        })
        .collect();
    let sup_norm = norms.iter().copied().fold(0.0, f64::max);
    let lipschitz = quotients.iter().copied().fold(0.0, f64::max);
    cont.witness("sup_norm_a", sup_norm);
    cont.witness("max_difference_quotient", lipschitz);
    cont.witness("coefficient_sum", t.perturbation().coefficient_sum());
    cont.pass = sup_norm.is_finite() && lipschitz.is_finite() && lipschitz <= options.lipschitz_cap;
    (range, invert, cont)
}

fn summability_entry(t: &PerturbedOperator, coeffs: &FactoredCoefficients, options: &HypothesisOptions) -> HypothesisEntry {
    let entry = HypothesisEntry::new(SUMMABILITY);
    if !t.space().is_counting() {
        return entry.skipped("skipped: summability is stated for diagonal operators on a counting measure");
    }
    let check = check_summability(t, coeffs, &options.summability);
    let mut entry = entry;
    entry.witness("sum1", check.sum1);
    entry.witness("sum2", check.sum2);
    entry.witness("plateau1", f64::from(u8::from(check.plateau1)));
    entry.witness("plateau2", f64::from(u8::from(check.plateau2)));
    entry.pass = check.pass;
    entry
}

fn vertical_line_entry(
    t: &PerturbedOperator,
    coeffs: &FactoredCoefficients,
    clusters: &Option<(Complex64, Complex64)>,
    options: &HypothesisOptions,
) -> HypothesisEntry {
    let entry = HypothesisEntry::new(VERTICAL_LINE);
    if !t.space().is_counting() {
        return entry.skipped("skipped: the vertical-line construction is stated for diagonal operators");
    }
    let Some((a, b)) = clusters else {
        return entry.skipped("skipped: no separated cluster pair");
    };
    let (lo, hi) = if a.re <= b.re { (a.re, b.re) } else { (b.re, a.re) };
    let mut entry = entry;
    if lo == hi {
        entry.notes.push("clusters share a real part".into());
        return entry;
    }
    let guard = options.tolerances.range_guard(t);
    match choose_x0(t, coeffs, (lo, hi), options.x0_candidates, guard, options.seed) {
        Ok(choice) => {
            entry.witness("x0", choice.x0);
            entry.witness("g", choice.g);
            entry.witness("admissible", choice.admissible as f64);
            entry.pass = choice.g.is_finite();
        }
        Err(e) => entry.notes.push(e.to_string()),
    }
    entry
}
