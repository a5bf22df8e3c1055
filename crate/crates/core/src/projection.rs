//! Assembly of `P + L`, where `P` is the spectral indicator of `M_f` inside the
//! contour and `L = (1/2πi)∮ B(z) dz`, the independent Riesz projection of the
//! materialized `T`, and extraction of an orthonormal basis of the range.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{Contour, QuadratureRule};
use crate::error::{Error, Result};
use crate::numkernel::{self, identity, ComplexMatrix, CompensatedSum, DEFECTIVE_CONDITION};
use crate::operator::{DiscretizedMeasureSpace, MultiplicationOperator, PerturbedOperator};
use crate::resolvent::{build_b, ResolventFactors, Route, Tolerances};

/// Singular values above this cut count toward the rank of an idempotent.
pub const RANK_CUT: f64 = 0.5;

/// Nodes evaluated concurrently before their contributions are added in order.
const NODE_CHUNK: usize = 16;

fn two_pi_i() -> Complex64 {
    Complex64::new(0.0, TAU)
}

/// Diagonal indicator of the atoms whose symbol value lies inside `contour`.
pub fn analytic_p(base: &MultiplicationOperator, contour: &Contour) -> Result<ComplexMatrix> {
    let values = base
        .symbol()
        .iter()
        .map(|f| {
            let inside = contour.contains(*f)?;
            Ok(Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(numkernel::diagonal(&values))
}

/// `−(1/2πi) Σⱼ ωⱼ (f_i − zⱼ)⁻¹` per atom: the quadrature form of [`analytic_p`].
pub fn analytic_p_quadrature(base: &MultiplicationOperator, rule: &QuadratureRule) -> ComplexMatrix {
    let values: Vec<Complex64> = base
        .symbol()
        .iter()
        .map(|f| -rule.integrate(|z| (f - z).inv()) / two_pi_i())
        .collect();
    numkernel::diagonal(&values)
}

/// `L = (1/2πi) Σⱼ ωⱼ B(zⱼ)` together with the smallest invertibility
/// certificate met along the way. Node evaluations run in parallel; the sum
/// is accumulated in node order.
pub fn integrate_b(
    t: &PerturbedOperator,
    rule: &QuadratureRule,
    tol: &Tolerances,
    route: Route,
) -> Result<(ComplexMatrix, f64)> {
    let n = t.atom_count();
    let mut sum = CompensatedSum::new(n, n);
    let mut min_sigma = f64::INFINITY;
    if t.perturbation().is_empty() {
        return Ok((ComplexMatrix::zeros(n, n), 1.0));
    }
    let indices: Vec<usize> = (0..rule.len()).collect();
    for chunk in indices.chunks(NODE_CHUNK) {
        let evaluated: Vec<Result<(ComplexMatrix, f64)>> = chunk
            .par_iter()
            .map(|&j| {
                let z = rule.nodes[j];
                let at = build_b(t, z, tol, route).map_err(|e| with_node(e, j))?;
                Ok((at.b, at.invertibility_sigma_min))
            })
            .collect();
        for (&j, item) in chunk.iter().zip(evaluated) {
            let (b, sigma) = item?;
            min_sigma = min_sigma.min(sigma);
            sum.add_scaled(&b, rule.weights[j] / two_pi_i());
        }
    }
    Ok((sum.finish(), min_sigma))
}

fn with_node(e: Error, node: usize) -> Error {
    match e {
        Error::NearSingular { z, sigma_min, threshold, .. } => Error::NearSingular {
            node: Some(node),
            z,
            sigma_min,
            threshold,
        },
        other => other,
    }
}

/// Factored resolvent data at every node of `rule`, in node order.
pub fn factors_at_nodes(t: &PerturbedOperator, rule: &QuadratureRule, tol: &Tolerances) -> Result<Vec<ResolventFactors>> {
    rule.nodes
        .par_iter()
        .enumerate()
        .map(|(j, z)| ResolventFactors::new(t, *z, tol).map_err(|e| with_node(e, j)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub nodes_per_segment: usize,
    pub tolerances: Tolerances,
    pub route: Route,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            nodes_per_segment: crate::contour::DEFAULT_NODES_PER_SEGMENT,
            tolerances: Tolerances::default(),
            route: Route::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBundle {
    pub p: ComplexMatrix,
    pub l: ComplexMatrix,
    pub p_plus_l: ComplexMatrix,
    pub quadrature_nodes_used: usize,
    /// Smallest `σ_min(I + A(z)(M_f − z))` over the nodes.
    pub min_certificate: f64,
}

pub fn assemble(t: &PerturbedOperator, contour: &Contour, options: &AssemblyOptions) -> Result<ProjectionBundle> {
    let p = analytic_p(t.base(), contour)?;
    let rule = contour.quadrature(options.nodes_per_segment)?;
    let (l, min_certificate) = integrate_b(t, &rule, &options.tolerances, options.route)?;
    let p_plus_l = &p + &l;
    Ok(ProjectionBundle {
        p,
        l,
        p_plus_l,
        quadrature_nodes_used: rule.len(),
        min_certificate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Eigen,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RieszProjection {
    pub matrix: ComplexMatrix,
    pub method: OracleMethod,
    pub condition_estimate: f64,
    /// Smallest distance from an eigenvalue of `T` to the contour.
    pub spectral_distance: f64,
}

/// Riesz projection of the materialized `T` for the eigenvalues inside
/// `contour`: spectral projectors from the eigendecomposition when it is well
/// conditioned, otherwise `(1/2πi)∮(z − T)⁻¹dz` with `fallback_nodes` per segment.
pub fn riesz_of_t(t: &PerturbedOperator, contour: &Contour, fallback_nodes: usize) -> Result<RieszProjection> {
    let m = t.materialize();
    let decomposition = numkernel::eig(&m)?;
    let spectral_distance = decomposition
        .eigenvalues
        .iter()
        .map(|mu| contour.distance_to(*mu))
        .fold(f64::INFINITY, f64::min);
    let indicator = decomposition
        .eigenvalues
        .iter()
        .map(|mu| Ok(Complex64::new(if contour.contains(*mu)? { 1.0 } else { 0.0 }, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    if !decomposition.is_defective(DEFECTIVE_CONDITION) {
        return Ok(RieszProjection {
            matrix: decomposition.spectral_sum(&indicator)?,
            method: OracleMethod::Eigen,
            condition_estimate: decomposition.condition_estimate,
            spectral_distance,
        });
    }
    let rule = contour.quadrature(fallback_nodes)?;
    let n = m.nrows();
    let mut sum = CompensatedSum::new(n, n);
    let resolvents: Vec<Result<ComplexMatrix>> = rule
        .nodes
        .par_iter()
        .map(|z| numkernel::inverse(&(identity(n) * *z - &m)))
        .collect();
    for (res, w) in resolvents.into_iter().zip(&rule.weights) {
        sum.add_scaled(&res?, w / two_pi_i());
    }
    Ok(RieszProjection {
        matrix: sum.finish(),
        method: OracleMethod::Quadrature,
        condition_estimate: decomposition.condition_estimate,
        spectral_distance,
    })
}

/// Orthonormal basis (for the weighted pairing) of a range, in sample coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub basis: ComplexMatrix,
    pub dimension: usize,
}

impl SubspaceBasis {
    /// Orthogonal projector onto the subspace, in sample coordinates.
    pub fn orthoprojector(&self, space: &DiscretizedMeasureSpace) -> ComplexMatrix {
        let iso = space.to_isometric_columns(&self.basis);
        space.from_isometric(&(&iso * iso.adjoint()))
    }

    /// `‖(I − Q) S Q‖ / ‖S‖` in the weighted operator norm (0 when `S = 0`).
    pub fn invariance_residual(&self, s: &ComplexMatrix, space: &DiscretizedMeasureSpace) -> f64 {
        let q = self.orthoprojector(space);
        let n = q.nrows();
        let leak = (identity(n) - &q) * s * &q;
        let norm = space.operator_norm(s);
        if norm == 0.0 {
            return 0.0;
        }
        space.operator_norm(&leak) / norm
    }
}

/// Range of an idempotent via the SVD in the isometric frame, counting
/// singular values above [`RANK_CUT`]. Rank `0` or full rank is an error.
pub fn extract_subspace(idempotent: &ComplexMatrix, space: &DiscretizedMeasureSpace) -> Result<SubspaceBasis> {
    let n = idempotent.nrows();
    let d = numkernel::svd(&space.to_isometric(idempotent))?;
    let rank = d.singular_values.iter().filter(|s| **s > RANK_CUT).count();
    if rank == 0 || rank == n {
        return Err(Error::TrivialSubspace { rank, dimension: n });
    }
    let iso = d.left_vectors.columns(0, rank).into_owned();
    Ok(SubspaceBasis {
        basis: space.from_isometric_columns(&iso),
        dimension: rank,
    })
}

/// `max over eigenvalues μ of min(|μ|, |μ − 1|)`.
pub fn idempotent_spectrum_defect(m: &ComplexMatrix) -> Result<f64> {
    let d = numkernel::eig(m)?;
    Ok(d.eigenvalues
        .iter()
        .map(|mu| mu.norm().min((mu - 1.0).norm()))
        .fold(0.0, f64::max))
}
