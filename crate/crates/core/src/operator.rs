//! Discretized measure space, multiplication operator, compact perturbation
//! `K = Σ sₙ uₙ⊗vₙ` and the perturbed operator `T = M_f + K`.
//!
//! Vectors are stored as plain samples on the atoms; the measure enters only
//! through the pairing `⟨x, v⟩ = Σᵢ wᵢ xᵢ conj(vᵢ)`, so `(u⊗v)(x) = ⟨x, v⟩ u`.
//! Operator norms are taken in the weighted ℓ² sense: a matrix `M` acting on
//! samples has norm `‖W^{1/2} M W^{-1/2}‖₂`, see
//! [`DiscretizedMeasureSpace::to_isometric`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::{self, czero, ComplexMatrix};

/// Relative singular-value cutoff used by [`svd_of_k`].
pub const SINGULAR_DROP_REL: f64 = 1e-14;

/// Normality tolerance `‖NNᴴ − NᴴN‖ ≤ tol·‖N‖²` for [`normal_to_diagonal`].
pub const NORMALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedMeasureSpace {
    weights: Vec<f64>,
    exponent: f64,
}

impl DiscretizedMeasureSpace {
    /// `weights` are the atom masses; `exponent` is the Lebesgue exponent `p`
    /// of the underlying `Lᵖ` space, kept for reporting.
    pub fn new(weights: Vec<f64>, exponent: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("measure space needs at least one atom".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "atom {i} has non-positive weight {w}"
            )));
        }
        if !(exponent.is_finite() && exponent > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "exponent p = {exponent} must lie in (1, ∞)"
            )));
        }
        Ok(Self { weights, exponent })
    }

    /// Counting measure on `n` atoms with `p = 2`.
    pub fn counting(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n], 2.0)
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn conjugate_exponent(&self) -> f64 {
        self.exponent / (self.exponent - 1.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_counting(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    fn check_len(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.atom_count() {
            return Err(Error::Dimension {
                context,
                expected: self.atom_count(),
                found: len,
            });
        }
        Ok(())
    }

    /// Weighted ℓ² norm of a sample vector.
    pub fn norm(&self, x: &[Complex64]) -> f64 {
        x.iter()
            .zip(&self.weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `W^{1/2} M W^{-1/2}`: the matrix of the same operator in an orthonormal basis.
    pub fn to_isometric(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (sw[i] / sw[j]))
    }

    /// Inverse of [`Self::to_isometric`].
    pub fn from_isometric(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (sw[j] / sw[i]))
    }

    /// `W^{1/2} V`: columns of sample vectors expressed in the orthonormal atom basis.
    pub fn to_isometric_columns(&self, v: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * self.weights[i].sqrt())
    }

    /// Inverse of [`Self::to_isometric_columns`].
    pub fn from_isometric_columns(&self, v: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / self.weights[i].sqrt())
    }

    /// Operator norm of `m` on the weighted space.
    pub fn operator_norm(&self, m: &ComplexMatrix) -> f64 {
        if self.is_counting() {
            numkernel::spectral_norm(m)
        } else {
            numkernel::spectral_norm(&self.to_isometric(m))
        }
    }

    /// Coefficients `⟨x, êₖ⟩` against the orthonormal atom basis `êₖ = 1ₖ/√wₖ`.
    pub fn basis_coefficients(&self, x: &[Complex64]) -> Vec<Complex64> {
        x.iter()
            .zip(&self.weights)
            .map(|(z, w)| z * w.sqrt())
            .collect()
    }
}

/// `⟨x, v⟩ = Σᵢ wᵢ xᵢ conj(vᵢ)`.
pub fn pairing(x: &[Complex64], v: &[Complex64], space: &DiscretizedMeasureSpace) -> Result<Complex64> {
    space.check_len(x.len(), "pairing left argument")?;
    space.check_len(v.len(), "pairing right argument")?;
    Ok(x.iter()
        .zip(v)
        .zip(space.weights())
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicationOperator {
    space: DiscretizedMeasureSpace,
    symbol: Vec<Complex64>,
}

impl MultiplicationOperator {
    pub fn new(space: DiscretizedMeasureSpace, symbol: Vec<Complex64>) -> Result<Self> {
        space.check_len(symbol.len(), "symbol")?;
        if symbol.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("symbol"));
        }
        Ok(Self { space, symbol })
    }

    pub fn space(&self) -> &DiscretizedMeasureSpace {
        &self.space
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    /// `‖f‖_∞`
    pub fn sup_norm(&self) -> f64 {
        self.symbol.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn matrix(&self) -> ComplexMatrix {
        numkernel::diagonal(&self.symbol)
    }
}

/// One rank-one term `s·u⊗v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub s: f64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompactPerturbation {
    terms: Vec<Term>,
}

impl CompactPerturbation {
    pub fn new(terms: Vec<Term>, atom_count: usize) -> Result<Self> {
        for (n, t) in terms.iter().enumerate() {
            if !(t.s.is_finite() && t.s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "term {n} has non-positive coefficient s = {}",
                    t.s
                )));
            }
            for (vec, name) in [(&t.u, "term u vector"), (&t.v, "term v vector")] {
                if vec.len() != atom_count {
                    return Err(Error::Dimension {
                        context: name,
                        expected: atom_count,
                        found: vec.len(),
                    });
                }
                if vec.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    return Err(Error::NonFinite(name));
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ sₙ`
    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.s).sum()
    }

    /// First `n` terms (`A_N`-style truncation).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            terms: self.terms.iter().take(n).cloned().collect(),
        }
    }

    /// Concatenation of the term lists.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            terms: self.terms.iter().chain(&other.terms).cloned().collect(),
        }
    }

    /// Rescales every `uₙ`, `vₙ` to unit weighted norm, folds the norms into
    /// `sₙ`, drops null terms and sorts by decreasing `sₙ` (stable).
    pub fn normalized(&self, space: &DiscretizedMeasureSpace) -> Self {
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .filter_map(|t| {
                let (nu, nv) = (space.norm(&t.u), space.norm(&t.v));
                (nu > 0.0 && nv > 0.0).then(|| Term {
                    s: t.s * nu * nv,
                    u: t.u.iter().map(|z| z / nu).collect(),
                    v: t.v.iter().map(|z| z / nv).collect(),
                })
            })
            .collect();
        terms.sort_by(|a, b| b.s.total_cmp(&a.s));
        Self { terms }
    }

    /// Dense matrix of `K` acting on samples: `K_ij = Σₙ sₙ u_{n,i} conj(v_{n,j}) w_j`.
    pub fn dense(&self, space: &DiscretizedMeasureSpace) -> ComplexMatrix {
        let n = space.atom_count();
        let w = space.weights();
        let mut k = ComplexMatrix::zeros(n, n);
        for t in &self.terms {
            for j in 0..n {
                let col = t.v[j].conj() * (t.s * w[j]);
                if col == czero() {
                    continue;
                }
                for i in 0..n {
                    k[(i, j)] += t.u[i] * col;
                }
            }
        }
        k
    }

    /// `(u columns scaled by s, v columns)` so that `K = U·Vᴴ·W`.
    pub fn factors(&self, atom_count: usize) -> (ComplexMatrix, ComplexMatrix) {
        let r = self.terms.len();
        let u = ComplexMatrix::from_fn(atom_count, r, |i, n| self.terms[n].u[i] * self.terms[n].s);
        let v = ComplexMatrix::from_fn(atom_count, r, |i, n| self.terms[n].v[i]);
        (u, v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedOperator {
    base: MultiplicationOperator,
    perturbation: CompactPerturbation,
}

impl PerturbedOperator {
    pub fn new(base: MultiplicationOperator, perturbation: CompactPerturbation) -> Result<Self> {
        let n = base.space().atom_count();
        // Re-validate against this space.
        let perturbation = CompactPerturbation::new(perturbation.terms, n)?;
        Ok(Self { base, perturbation })
    }

    pub fn base(&self) -> &MultiplicationOperator {
        &self.base
    }

    pub fn perturbation(&self) -> &CompactPerturbation {
        &self.perturbation
    }

    pub fn space(&self) -> &DiscretizedMeasureSpace {
        self.base.space()
    }

    pub fn symbol(&self) -> &[Complex64] {
        self.base.symbol()
    }

    pub fn atom_count(&self) -> usize {
        self.base.space().atom_count()
    }

    pub fn with_perturbation(&self, perturbation: CompactPerturbation) -> Result<Self> {
        Self::new(self.base.clone(), perturbation)
    }

    /// Dense matrix of `T = M_f + K`.
    pub fn materialize(&self) -> ComplexMatrix {
        let mut t = self.perturbation.dense(self.space());
        for (i, f) in self.symbol().iter().enumerate() {
            t[(i, i)] += f;
        }
        t
    }

    /// `(T − z)·M` using the diagonal-plus-low-rank structure, `O(N²r)`.
    pub fn apply_shifted(&self, z: Complex64, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.atom_count();
        if m.nrows() != n {
            return Err(Error::Dimension {
                context: "apply_shifted operand",
                expected: n,
                found: m.nrows(),
            });
        }
        let f = self.symbol();
        let mut out = ComplexMatrix::from_fn(n, m.ncols(), |i, j| (f[i] - z) * m[(i, j)]);
        if !self.perturbation.is_empty() {
            let (u, v) = self.perturbation.factors(n);
            let w = self.space().weights();
            let vw = ComplexMatrix::from_fn(v.ncols(), n, |k, j| v[(j, k)].conj() * w[j]);
            out += u * (vw * m);
        }
        Ok(out)
    }
}

/// Singular-value expansion of a dense `K` on the weighted space, with `uₙ`,
/// `vₙ` orthonormal for the pairing and `sₙ` descending.
pub fn svd_of_k(k: &ComplexMatrix, space: &DiscretizedMeasureSpace) -> Result<CompactPerturbation> {
    let n = space.atom_count();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Dimension {
            context: "svd_of_k matrix",
            expected: n,
            found: if k.nrows() != n { k.nrows() } else { k.ncols() },
        });
    }
    let d = numkernel::svd(&space.to_isometric(k))?;
    let top = d.singular_values.first().copied().unwrap_or(0.0);
    let inv_sqrt: Vec<f64> = space.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    let terms = d
        .singular_values
        .iter()
        .enumerate()
        .take_while(|(_, &s)| s > SINGULAR_DROP_REL * top && s > 0.0)
        .map(|(j, &s)| Term {
            s,
            u: (0..n).map(|i| d.left_vectors[(i, j)] * inv_sqrt[i]).collect(),
            v: (0..n).map(|i| d.right_vectors[(i, j)] * inv_sqrt[i]).collect(),
        })
        .collect();
    CompactPerturbation::new(terms, n)
}

/// Unitary diagonalization `W N Wᴴ = diag(f)` of a normal matrix, i.e. the
/// intertwining `M_f W = W N` on the counting measure.
pub fn normal_to_diagonal(n_mat: &ComplexMatrix) -> Result<(MultiplicationOperator, ComplexMatrix)> {
    let size = n_mat.nrows();
    if n_mat.ncols() != size {
        return Err(Error::Dimension {
            context: "normal_to_diagonal",
            expected: size,
            found: n_mat.ncols(),
        });
    }
    numkernel::ensure_finite(n_mat, "normal_to_diagonal input")?;
    let norm = numkernel::spectral_norm(n_mat);
    let commutator = n_mat * n_mat.adjoint() - n_mat.adjoint() * n_mat;
    let defect = numkernel::spectral_norm(&commutator);
    if defect > NORMALITY_TOL * norm * norm {
        return Err(Error::NotNormal { defect });
    }
    let cap = 10_000 * size.max(1);
    let schur = nalgebra::Schur::try_new(n_mat.clone(), f64::EPSILON, cap).ok_or_else(|| {
        Error::NoConvergence {
            what: format!("Schur form of {size}x{size} normal matrix"),
            iterations: cap,
        }
    })?;
    let (q, u) = schur.unpack();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (u[(a, a)], u[(b, b)]);
        za.re.total_cmp(&zb.re).then(za.im.total_cmp(&zb.im))
    });
    let symbol: Vec<Complex64> = order.iter().map(|&k| u[(k, k)]).collect();
    let qh = q.adjoint();
    let w = ComplexMatrix::from_fn(size, size, |i, j| qh[(order[i], j)]);
    let base = MultiplicationOperator::new(DiscretizedMeasureSpace::counting(size)?, symbol)?;
    Ok((base, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{cone, from_real_rows};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e(n: usize, i: usize) -> Vec<Complex64> {
        (0..n).map(|k| if k == i { cone() } else { czero() }).collect()
    }

    #[test]
    fn pairing_of_basis_vectors() {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        assert_eq!(pairing(&e(2, 0), &e(2, 0), &space).unwrap(), cone());
        assert_eq!(pairing(&e(2, 0), &e(2, 1), &space).unwrap(), czero());
    }

    #[test]
    fn pairing_weighted_by_hand() {
        // 0.5·1·conj(i) + 2·(2i)·conj(1) = −0.5i + 4i
        let space = DiscretizedMeasureSpace::new(vec![0.5, 2.0], 2.0).unwrap();
        let got = pairing(&[c(1.0, 0.0), c(0.0, 2.0)], &[c(0.0, 1.0), c(1.0, 0.0)], &space).unwrap();
        assert!((got - c(0.0, 3.5)).norm() < 1e-15);
    }

    #[test]
    fn pairing_length_mismatch() {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        assert!(matches!(
            pairing(&e(3, 0), &e(2, 0), &space),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn space_rejects_bad_weights() {
        assert!(DiscretizedMeasureSpace::new(vec![1.0, 0.0], 2.0).is_err());
        assert!(DiscretizedMeasureSpace::new(vec![], 2.0).is_err());
        assert!(DiscretizedMeasureSpace::new(vec![1.0], 1.0).is_err());
        let s = DiscretizedMeasureSpace::new(vec![1.0], 3.0).unwrap();
        assert!((s.conjugate_exponent() - 1.5).abs() < 1e-15);
    }

    fn canonical() -> PerturbedOperator {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let base = MultiplicationOperator::new(space, vec![c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let k = CompactPerturbation::new(vec![Term { s: 1.0, u: e(2, 0), v: e(2, 1) }], 2).unwrap();
        PerturbedOperator::new(base, k).unwrap()
    }

    #[test]
    fn materialize_canonical() {
        let expected = from_real_rows(&[&[0.0, 1.0], &[0.0, 2.0]]);
        assert_eq!(canonical().materialize(), expected);
    }

    #[test]
    fn materialize_without_terms_is_diagonal() {
        let t = canonical().with_perturbation(CompactPerturbation::empty()).unwrap();
        assert_eq!(t.materialize(), from_real_rows(&[&[0.0, 0.0], &[0.0, 2.0]]));
    }

    #[test]
    fn materialize_projector_term() {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let base = MultiplicationOperator::new(space, vec![czero(), czero()]).unwrap();
        let k = CompactPerturbation::new(vec![Term { s: 1.0, u: e(2, 0), v: e(2, 0) }], 2).unwrap();
        let t = PerturbedOperator::new(base, k).unwrap();
        assert_eq!(t.materialize(), from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]));
    }

    #[test]
    fn apply_shifted_matches_dense() {
        let t = canonical();
        let z = c(0.3, -0.7);
        let m = ComplexMatrix::from_fn(2, 3, |i, j| c(i as f64 + 1.0, j as f64));
        let dense = (t.materialize() - numkernel::identity(2) * z) * &m;
        assert!((t.apply_shifted(z, &m).unwrap() - dense).norm() < 1e-14);
    }

    #[test]
    fn svd_of_shift_matrix_is_single_term() {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let k = svd_of_k(&from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), &space).unwrap();
        assert_eq!(k.len(), 1);
        let t = &k.terms()[0];
        assert!((t.s - 1.0).abs() < 1e-15);
        assert!((t.u[0] - cone()).norm() < 1e-15 && t.u[1].norm() < 1e-15);
        assert!((t.v[1] - cone()).norm() < 1e-15 && t.v[0].norm() < 1e-15);
    }

    #[test]
    fn svd_of_zero_is_empty() {
        let space = DiscretizedMeasureSpace::counting(3).unwrap();
        assert!(svd_of_k(&ComplexMatrix::zeros(3, 3), &space).unwrap().is_empty());
    }

    #[test]
    fn svd_of_rank_two_weighted() {
        let space = DiscretizedMeasureSpace::new(vec![0.5, 1.0, 2.0, 0.25], 2.0).unwrap();
        let a = vec![c(1.0, 0.5), c(-0.3, 0.0), c(0.2, 0.1), c(0.0, 1.0)];
        let b = vec![c(0.1, 0.0), c(1.0, -1.0), c(0.0, 0.0), c(0.4, 0.2)];
        let p = vec![c(0.0, 1.0), c(0.7, 0.0), c(-1.0, 0.2), c(0.3, 0.3)];
        let q = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, -0.5), c(-0.2, 0.9)];
        let built = CompactPerturbation::new(
            vec![Term { s: 1.0, u: a, v: b }, Term { s: 0.3, u: p, v: q }],
            4,
        )
        .unwrap();
        let k = built.dense(&space);
        let expansion = svd_of_k(&k, &space).unwrap();
        assert_eq!(expansion.len(), 2);
        assert!((expansion.dense(&space) - &k).norm() <= 1e-12 * k.norm());
        for (i, ti) in expansion.terms().iter().enumerate() {
            for (j, tj) in expansion.terms().iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((pairing(&ti.u, &tj.u, &space).unwrap() - c(expected, 0.0)).norm() < 1e-12);
                assert!((pairing(&ti.v, &tj.v, &space).unwrap() - c(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn normal_to_diagonal_of_diagonal() {
        let (f, w) = normal_to_diagonal(&numkernel::diagonal(&[cone(), c(0.0, 1.0)])).unwrap();
        assert_eq!(f.symbol(), &[c(0.0, 1.0), cone()]);
        // Sorted by real part, so W is a permutation up to phases.
        assert!((w[(0, 1)].norm() - 1.0).abs() < 1e-15);
        assert!((w[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normal_to_diagonal_of_swap() {
        // Eigenvalues of [[0,1],[1,0]] solve μ² = 1.
        let n = from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (f, w) = normal_to_diagonal(&n).unwrap();
        assert!((f.symbol()[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((f.symbol()[1] - cone()).norm() < 1e-14);
        assert!((&w * &n - f.matrix() * &w).norm() < 1e-14);
        assert!((&w * w.adjoint() - numkernel::identity(2)).norm() < 1e-14);
    }

    #[test]
    fn normal_to_diagonal_rejects_nilpotent() {
        let n = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(normal_to_diagonal(&n), Err(Error::NotNormal { .. })));
    }

    #[test]
    fn normalization_sorts_and_rescales() {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let k = CompactPerturbation::new(
            vec![
                Term { s: 1.0, u: vec![c(0.5, 0.0), czero()], v: e(2, 1) },
                Term { s: 1.0, u: vec![c(3.0, 0.0), czero()], v: e(2, 0) },
            ],
            2,
        )
        .unwrap();
        let n = k.normalized(&space);
        assert_eq!(n.terms()[0].s, 3.0);
        assert_eq!(n.terms()[1].s, 0.5);
        assert!((n.dense(&space) - k.dense(&space)).norm() < 1e-15);
    }
}
