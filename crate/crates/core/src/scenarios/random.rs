use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::contour::{circle, split_rectangle, Contour};
use crate::error::{Error, Result};
use crate::numkernel;
use crate::operator::{CompactPerturbation, DiscretizedMeasureSpace, MultiplicationOperator, PerturbedOperator, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourKind {
    /// `|z| = 0.5`.
    Circle,
    /// The rectangle with right edge on `Re z = x0` and half-height 1.
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomInstanceOptions {
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub max_terms: usize,
    /// Range of each coefficient `sₙ`; `uₙ`, `vₙ` have unit norm.
    pub coupling: (f64, f64),
    /// Weights are uniform in this range; `None` gives the counting measure.
    pub weights: Option<(f64, f64)>,
    /// Minimal distance from every eigenvalue of `T` to the contour.
    pub spectral_margin: f64,
    pub max_attempts: usize,
    pub nodes_per_segment: usize,
}

impl Default for RandomInstanceOptions {
    fn default() -> Self {
        Self {
            min_atoms: 2,
            max_atoms: 64,
            max_terms: 8,
            coupling: (0.005, 0.03),
            weights: Some((0.5, 2.0)),
            spectral_margin: 0.1,
            max_attempts: 64,
            nodes_per_segment: 128,
        }
    }
}

fn point_in_disk(rng: &mut ChaCha8Rng, center: Complex64, radius: f64) -> Complex64 {
    let r = radius * rng.random_range(0.0f64..1.0).sqrt();
    center + Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

fn point_in_ring(rng: &mut ChaCha8Rng, inner: f64, outer: f64) -> Complex64 {
    let r: f64 = rng.random_range(inner * inner..outer * outer);
    let r = r.sqrt();
    Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

fn unit_vector(rng: &mut ChaCha8Rng, space: &DiscretizedMeasureSpace) -> Vec<Complex64> {
    let x: Vec<Complex64> = (0..space.atom_count())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = space.norm(&x);
    x.into_iter().map(|z| z / norm).collect()
}

fn draw(rng: &mut ChaCha8Rng, kind: ContourKind, options: &RandomInstanceOptions) -> Result<(PerturbedOperator, Contour)> {
    let n = rng.random_range(options.min_atoms..=options.max_atoms);
    let inside = rng.random_range(1..n);
    let (symbol, contour): (Vec<Complex64>, Contour) = match kind {
        ContourKind::Circle => {
            let symbol = (0..n)
                .map(|i| {
                    if i < inside {
                        point_in_disk(rng, Complex64::new(0.0, 0.0), 0.35)
                    } else {
                        point_in_ring(rng, 0.65, 1.0)
                    }
                })
                .collect();
            (symbol, circle(Complex64::new(0.0, 0.0), 0.5)?)
        }
        ContourKind::Rectangle => {
            let x0 = rng.random_range(-1.0..1.0);
            let symbol = (0..n)
                .map(|i| {
                    let center = if i < inside { x0 - 0.5 } else { x0 + 0.5 };
                    point_in_disk(rng, Complex64::new(center, 0.0), 0.35)
                })
                .collect();
            (symbol, split_rectangle(x0, 0.0)?)
        }
    };
    let space = match options.weights {
        Some((lo, hi)) => DiscretizedMeasureSpace::new((0..n).map(|_| rng.random_range(lo..hi)).collect(), 2.0)?,
        None => DiscretizedMeasureSpace::counting(n)?,
    };
    let term_count = rng.random_range(1..=options.max_terms);
    let terms = (0..term_count)
        .map(|_| Term {
            s: rng.random_range(options.coupling.0..options.coupling.1),
            u: unit_vector(rng, &space),
            v: unit_vector(rng, &space),
        })
        .collect();
    let base = MultiplicationOperator::new(space, symbol)?;
    Ok((PerturbedOperator::new(base, CompactPerturbation::new(terms, n)?)?, contour))
}

/// Seeded instance whose symbol splits between the inside and outside of the
/// contour and whose spectrum stays `spectral_margin` away from it. Draws are
/// repeated until the margin holds.
pub fn random_instance(seed: u64, kind: ContourKind, options: &RandomInstanceOptions) -> Result<Scenario> {
    if options.min_atoms < 2 || options.min_atoms > options.max_atoms || options.max_terms == 0 {
        return Err(Error::InvalidParameter(format!(
            "random instance needs 2 ≤ min_atoms ≤ max_atoms and max_terms ≥ 1, got {options:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..options.max_attempts {
        let (t, contour) = draw(&mut rng, kind, options)?;
        let eigenvalues = numkernel::eig(&t.materialize())?.eigenvalues;
        let distance = eigenvalues
            .iter()
            .map(|mu| contour.distance_to(*mu))
            .fold(f64::INFINITY, f64::min);
        if distance >= options.spectral_margin {
            let name = match kind {
                ContourKind::Circle => format!("random-circle-{seed}"),
                ContourKind::Rectangle => format!("random-rectangle-{seed}"),
            };
            return Ok(Scenario::new(name, t, contour, seed).with_nodes(options.nodes_per_segment));
        }
    }
    Err(Error::NoConvergence {
        what: "random instance with spectral margin".into(),
        iterations: options.max_attempts,
    })
}
