use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::contour::circle;
use crate::error::{Error, Result};
use crate::operator::{CompactPerturbation, DiscretizedMeasureSpace, MultiplicationOperator, PerturbedOperator, Term};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn basis(n: usize, i: usize) -> Vec<Complex64> {
    (0..n).map(|k| c(if k == i { 1.0 } else { 0.0 }, 0.0)).collect()
}

fn two_atom_operator(symbol: [f64; 2], terms: Vec<Term>) -> Result<PerturbedOperator> {
    let space = DiscretizedMeasureSpace::counting(2)?;
    let base = MultiplicationOperator::new(space, symbol.iter().map(|x| c(*x, 0.0)).collect())?;
    PerturbedOperator::new(base, CompactPerturbation::new(terms, 2)?)
}

/// `f = (0, 2)`, `K = e₀⊗e₁`, unit circle: `T = [[0, 1], [0, 2]]`.
pub fn canonical_scenario() -> Result<Scenario> {
    let t = two_atom_operator([0.0, 2.0], vec![Term { s: 1.0, u: basis(2, 0), v: basis(2, 1) }])?;
    Scenario::new("canonical", t, circle(c(0.0, 0.0), 1.0)?, 0).with_ladders(vec![1], vec![16, 32, 64, 128])
}

/// The canonical symbol and contour with `K = 0`.
pub fn unperturbed_scenario() -> Result<Scenario> {
    let t = two_atom_operator([0.0, 2.0], Vec::new())?;
    Scenario::new("unperturbed", t, circle(c(0.0, 0.0), 1.0)?, 0).with_ladders(vec![0], vec![16, 32, 64, 128])
}

/// `T = diag(0, 3) + e₀⊗e₀ = diag(1, 3)` with the unit circle, whose first
/// quadrature node is the eigenvalue `1`.
pub fn eigenvalue_on_contour_scenario() -> Result<Scenario> {
    let t = two_atom_operator([0.0, 3.0], vec![Term { s: 1.0, u: basis(2, 0), v: basis(2, 0) }])?;
    Ok(Scenario::new("eigenvalue-on-contour", t, circle(c(0.0, 0.0), 1.0)?, 0))
}

/// Polar grid of a disk: `radial` rings of equal width and `angular` equal
/// sectors per ring. Each cell is an atom with its area as weight and its
/// area centroid as symbol value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskGrid {
    pub weights: Vec<f64>,
    pub centroids: Vec<Complex64>,
    /// Ring index of each cell, counted from the center.
    pub ring: Vec<usize>,
}

pub fn disk_grid(radius: f64, radial: usize, angular: usize) -> Result<DiskGrid> {
    if !(radius > 0.0) || radial == 0 || angular == 0 {
        return Err(Error::InvalidParameter(format!(
            "disk grid needs a positive radius and counts, got {radius}, {radial}, {angular}"
        )));
    }
    let dr = radius / radial as f64;
    let dtheta = TAU / angular as f64;
    let half = 0.5 * dtheta;
    let mut grid = DiskGrid {
        weights: Vec::with_capacity(radial * angular),
        centroids: Vec::with_capacity(radial * angular),
        ring: Vec::with_capacity(radial * angular),
    };
    for i in 0..radial {
        let (r0, r1) = (dr * i as f64, dr * (i + 1) as f64);
        let area = 0.5 * (r1 * r1 - r0 * r0) * dtheta;
        let rho = (2.0 / 3.0) * (r1.powi(3) - r0.powi(3)) / (r1 * r1 - r0 * r0) * half.sin() / half;
        for j in 0..angular {
            grid.weights.push(area);
            grid.centroids.push(Complex64::from_polar(rho, dtheta * (j as f64 + 0.5)));
            grid.ring.push(i);
        }
    }
    Ok(grid)
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn normalized(space: &DiscretizedMeasureSpace, x: Vec<Complex64>) -> Vec<Complex64> {
    let norm = space.norm(&x);
    x.into_iter().map(|z| z / norm).collect()
}

/// Real profile multiplying both factors of every generated term.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Envelope {
    #[default]
    None,
    /// Zero on `inner ≤ |ξ| ≤ outer`, one elsewhere.
    AnnulusMask { inner: f64, outer: f64 },
    /// `1 − |ξ|`.
    OneMinusModulus,
}

impl Envelope {
    pub fn at(&self, xi: Complex64) -> f64 {
        match *self {
            Envelope::None => 1.0,
            Envelope::AnnulusMask { inner, outer } => {
                if (inner..=outer).contains(&xi.norm()) {
                    0.0
                } else {
                    1.0
                }
            }
            Envelope::OneMinusModulus => example2_damping(xi),
        }
    }
}

/// Terms `sₙ (e·gₙ)⊗(e·hₙ)` for seeded `gₙ`, `hₙ` of unit norm and the
/// envelope `e` evaluated at `points`. Each term draws `gₙ` then `hₙ`.
pub fn seeded_terms(
    space: &DiscretizedMeasureSpace,
    points: &[Complex64],
    coefficients: &[f64],
    envelope: Envelope,
    seed: u64,
) -> Result<Vec<Term>> {
    let n = space.atom_count();
    if points.len() != n {
        return Err(Error::Dimension {
            context: "seeded_terms points",
            expected: n,
            found: points.len(),
        });
    }
    let profile: Vec<f64> = points.iter().map(|xi| envelope.at(*xi)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(coefficients
        .iter()
        .map(|s| {
            let g = normalized(space, random_field(&mut rng, n));
            let h = normalized(space, random_field(&mut rng, n));
            Term {
                s: *s,
                u: g.iter().zip(&profile).map(|(x, e)| x * e).collect(),
                v: h.iter().zip(&profile).map(|(x, e)| x * e).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Example1Options {
    pub radial: usize,
    pub angular: usize,
    /// Coefficient of the single term; `g` and `h` have unit norm.
    pub coupling: f64,
    pub seed: u64,
}

impl Default for Example1Options {
    fn default() -> Self {
        Self {
            radial: 12,
            angular: 16,
            coupling: 0.05,
            seed: 1,
        }
    }
}

/// Unit disk with Lebesgue cell weights, `f(ξ) = ξ`, one term `u⊗v` with
/// `u = (1 − 1_A)g`, `v = (1 − 1_A)h` for seeded `g`, `h` and the annulus
/// `A = {1/3 ≤ |ξ| ≤ 2/3}`, and the circle `|z| = 1/2`.
pub fn example1_scenario(options: &Example1Options) -> Result<Scenario> {
    if options.radial < 8 || options.angular < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid ({}, {}) is below the minimum (8, 16)",
            options.radial, options.angular
        )));
    }
    if options.radial % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "an odd ring count {} centers a ring on |z| = 1/2",
            options.radial
        )));
    }
    let grid = disk_grid(1.0, options.radial, options.angular)?;
    let n = grid.weights.len();
    let space = DiscretizedMeasureSpace::new(grid.weights, 2.0)?;
    let envelope = Envelope::AnnulusMask {
        inner: 1.0 / 3.0,
        outer: 2.0 / 3.0,
    };
    let terms = seeded_terms(&space, &grid.centroids, &[options.coupling], envelope, options.seed)?;
    let base = MultiplicationOperator::new(space, grid.centroids)?;
    let t = PerturbedOperator::new(base, CompactPerturbation::new(terms, n)?)?;
    let mut scenario = Scenario::new("example1", t, circle(c(0.0, 0.0), 0.5)?, options.seed)
        .with_ladders(vec![1], vec![32, 64, 128])?
        .with_nodes(128);
    scenario.options.hypotheses.cluster_min_mass = 0.01;
    scenario.options.hypotheses.contour_margin = 1e-3;
    Ok(scenario)
}

/// `1 − |ξ|`.
pub fn example2_damping(xi: Complex64) -> f64 {
    1.0 - xi.norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Example2Options {
    pub radial: usize,
    pub angular: usize,
    pub terms: usize,
    pub seed: u64,
}

impl Default for Example2Options {
    fn default() -> Self {
        Self {
            radial: 8,
            angular: 16,
            terms: 8,
            seed: 2,
        }
    }
}

/// Disk of radius 2 with Lebesgue cell weights, `f(ξ) = ξ`, terms
/// `sₙ = 2⁻ⁿ` (`n = 1, 2, …`) with `uₙ = (1 − |ξ|)gₙ`, `vₙ = (1 − |ξ|)hₙ`
/// for seeded unit-norm `gₙ`, `hₙ`, and the unit circle.
pub fn example2_scenario(options: &Example2Options) -> Result<Scenario> {
    if options.terms == 0 {
        return Err(Error::InvalidParameter("example 2 needs at least one term".into()));
    }
    let grid = disk_grid(2.0, options.radial, options.angular)?;
    let n = grid.weights.len();
    let space = DiscretizedMeasureSpace::new(grid.weights, 2.0)?;
    let coefficients: Vec<f64> = (1..=options.terms).map(|k| 0.5f64.powi(k as i32)).collect();
    let terms = seeded_terms(&space, &grid.centroids, &coefficients, Envelope::OneMinusModulus, options.seed)?;
    let base = MultiplicationOperator::new(space, grid.centroids)?;
    let t = PerturbedOperator::new(base, CompactPerturbation::new(terms, n)?)?;
    let ladder: Vec<usize> = (1..=options.terms).collect();
    let mut scenario = Scenario::new("example2", t, circle(c(0.0, 0.0), 1.0)?, options.seed)
        .with_ladders(ladder, vec![64, 128, 256])?
        .with_nodes(256);
    scenario.options.hypotheses.cluster_min_mass = 0.05;
    scenario.options.hypotheses.contour_margin = 1e-3;
    Ok(scenario)
}
