use num_complex::Complex64;
use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{circle, Contour};
use crate::error::{Error, Result};
use crate::numkernel::{self, identity, ComplexMatrix};
use crate::operator::PerturbedOperator;
use crate::projection::riesz_of_t;

/// Commutation defect allowed at construction, relative to `‖S‖‖T‖`.
pub const CONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommutantSpec {
    /// Include `S = T` itself.
    pub include_operator: bool,
    /// One seeded polynomial in `T/max(‖T‖, 1)` per listed degree.
    pub polynomial_degrees: Vec<usize>,
    /// Number of automatically placed resolvent shifts.
    pub resolvent_count: usize,
    /// Explicit shifts `μ` for `(T − μ)⁻¹`, used in addition to the automatic ones.
    pub resolvent_shifts: Vec<Complex64>,
    /// Minimal distance from an explicit shift to the spectrum.
    pub resolvent_margin: f64,
    /// Include the Riesz projection onto an isolated eigenvalue.
    pub auxiliary_riesz: bool,
    /// Nodes per segment for Riesz projections that fall back to quadrature.
    pub riesz_nodes: usize,
}

impl Default for CommutantSpec {
    fn default() -> Self {
        Self {
            include_operator: true,
            polynomial_degrees: vec![1, 2, 3, 4, 5],
            resolvent_count: 3,
            resolvent_shifts: Vec::new(),
            resolvent_margin: 1e-3,
            auxiliary_riesz: true,
            riesz_nodes: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CommutantKind {
    Operator,
    Polynomial { degree: usize },
    Resolvent { shift: Complex64 },
    RieszProjection { center: Complex64, radius: f64 },
}

impl CommutantKind {
    pub fn label(&self) -> String {
        match self {
            CommutantKind::Operator => "operator".into(),
            CommutantKind::Polynomial { degree } => format!("polynomial-{degree}"),
            CommutantKind::Resolvent { .. } => "resolvent".into(),
            CommutantKind::RieszProjection { .. } => "riesz".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutantSample {
    pub kind: CommutantKind,
    pub matrix: ComplexMatrix,
    /// `‖ST − TS‖ / (‖S‖‖T‖)` at construction.
    pub construction_residual: f64,
}

fn commutation_defect(s: &ComplexMatrix, t: &ComplexMatrix, t_norm: f64) -> f64 {
    let scale = numkernel::spectral_norm(s) * t_norm;
    if scale == 0.0 {
        return 0.0;
    }
    numkernel::spectral_norm(&(s * t - t * s)) / scale
}

fn accept(kind: CommutantKind, matrix: ComplexMatrix, t: &ComplexMatrix, t_norm: f64) -> Result<CommutantSample> {
    let construction_residual = commutation_defect(&matrix, t, t_norm);
    if !(construction_residual <= CONSTRUCTION_TOL) {
        return Err(Error::CommutantRejected(format!(
            "{} sample fails the construction check: residual {construction_residual:e}",
            kind.label()
        )));
    }
    Ok(CommutantSample {
        kind,
        matrix,
        construction_residual,
    })
}

fn random_unit(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.random_range(0.25..1.0), rng.random_range(0.0..std::f64::consts::TAU))
}

/// Circle around the eigenvalue of `T` farthest from the rest of the
/// spectrum, with radius half that separation.
pub fn auxiliary_riesz_circle(eigenvalues: &[Complex64]) -> Result<Contour> {
    let Some(first) = eigenvalues.first() else {
        return Err(Error::InvalidParameter("empty spectrum".into()));
    };
    if eigenvalues.len() == 1 {
        return circle(*first, 1.0);
    }
    let (center, gap) = eigenvalues
        .iter()
        .map(|mu| {
            let gap = eigenvalues
                .iter()
                .filter(|nu| *nu != mu)
                .map(|nu| (nu - mu).norm())
                .fold(f64::INFINITY, f64::min);
            (*mu, gap)
        })
        .fold((*first, -1.0), |best, x| if x.1 > best.1 { x } else { best });
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::CommutantRejected("spectrum has no isolated eigenvalue".into()));
    }
    circle(center, 0.5 * gap)
}

/// Seeded, reproducible members of the commutant of `T`, each checked
/// against [`CONSTRUCTION_TOL`] before it is returned.
pub fn sample_commutant(t: &PerturbedOperator, spec: &CommutantSpec, seed: u64) -> Result<Vec<CommutantSample>> {
    let m = t.materialize();
    let n = m.nrows();
    let norm = numkernel::spectral_norm(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636f_6d6d_7574_616e);
    let mut candidates: Vec<(CommutantKind, ComplexMatrix)> = Vec::new();
    if spec.include_operator {
        candidates.push((CommutantKind::Operator, m.clone()));
    }

    let scaled = &m / Complex64::new(norm.max(1.0), 0.0);
    for &degree in &spec.polynomial_degrees {
        let coefficients: Vec<Complex64> = (0..=degree).map(|_| random_unit(&mut rng)).collect();
        // Horner evaluation.
        let mut s = identity(n) * coefficients[degree];
        for c in coefficients[..degree].iter().rev() {
            s = &s * &scaled + identity(n) * *c;
        }
        candidates.push((CommutantKind::Polynomial { degree }, s));
    }

    let needs_spectrum = spec.resolvent_count > 0 || !spec.resolvent_shifts.is_empty() || spec.auxiliary_riesz;
    let eigenvalues = if needs_spectrum {
        numkernel::eig(&m)?.eigenvalues
    } else {
        Vec::new()
    };
    let distance = |mu: Complex64| {
        eigenvalues
            .iter()
            .map(|l| (l - mu).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let mut shifts: Vec<Complex64> = (0..spec.resolvent_count)
        .map(|_| Complex64::from_polar(norm + 1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    for mu in &spec.resolvent_shifts {
        let d = distance(*mu);
        if d < spec.resolvent_margin {
            return Err(Error::CommutantRejected(format!(
                "shift {mu} lies {d:e} from the spectrum, below the margin {:e}",
                spec.resolvent_margin
            )));
        }
        shifts.push(*mu);
    }
    for shift in shifts {
        let s = numkernel::inverse(&(&m - identity(n) * shift))?;
        candidates.push((CommutantKind::Resolvent { shift }, s));
    }

    if spec.auxiliary_riesz {
        let aux = auxiliary_riesz_circle(&eigenvalues)?;
        let (center, radius) = match aux.segments()[0] {
            crate::contour::Segment::CircleArc { center, radius, .. } => (center, radius),
            crate::contour::Segment::LineSegment { start, .. } => (start, 0.0),
        };
        let projection = riesz_of_t(t, &aux, spec.riesz_nodes)?;
        candidates.push((CommutantKind::RieszProjection { center, radius }, projection.matrix));
    }
    candidates
        .into_par_iter()
        .map(|(kind, s)| accept(kind, s, &m, norm))
        .collect()
}
