//! Dense complex linear algebra used by every other module.
//!
//! SVD, Hessenberg reduction and partial-pivoting LU are delegated to
//! `nalgebra`. The complex Schur iteration is our own: the library's
//! double-shift sweep stalls on near-idempotent matrices. This module also
//! adds deterministic ordering and phase conventions,
//! eigenvectors recovered from the triangular Schur factor, a condition
//! estimate for the eigenbasis, and solves that refuse numerically singular
//! systems instead of returning garbage.

use nalgebra::{DMatrix, Hessenberg, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix. Row/column counts and storage come from `nalgebra`.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative threshold `σ_min / ‖M‖` below which [`solve`] reports a singular system.
pub const SOLVE_SIGMA_MIN_REL: f64 = 1e-12;

/// Condition estimate above which an eigendecomposition is treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e6;

const ITERATION_CAP_PER_DIM: usize = 10_000;

pub fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn cone() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Builds a matrix from real row slices.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(nrows, ncols, |i, j| Complex64::new(rows[i][j], 0.0))
}

pub fn diagonal(values: &[Complex64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { czero() })
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &ComplexMatrix, context: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

fn ensure_square(m: &ComplexMatrix, context: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            context,
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

fn iteration_cap(m: &ComplexMatrix) -> usize {
    ITERATION_CAP_PER_DIM * m.nrows().max(m.ncols()).max(1)
}

/// `M = Σ σₙ uₙ vₙᴴ` with σ sorted descending and orthonormal column sets.
#[derive(Debug, Clone)]
pub struct SingularDecomposition {
    pub singular_values: Vec<f64>,
    /// Left singular vectors as columns (`rows × k`).
    pub left_vectors: ComplexMatrix,
    /// Right singular vectors as columns (`cols × k`).
    pub right_vectors: ComplexMatrix,
}

impl SingularDecomposition {
    pub fn rank(&self, relative_threshold: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .take_while(|&&s| s > relative_threshold * top && s > 0.0)
            .count()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singular_values.len();
        let mut scaled = self.left_vectors.clone();
        for (j, &s) in self.singular_values.iter().enumerate().take(k) {
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.right_vectors.adjoint()
    }
}

/// Convergence tolerance handed to the bidiagonal QR. At exactly machine
/// epsilon its deflation test can accept inaccurate singular vectors.
const SVD_EPS: f64 = 8.0 * f64::EPSILON;

/// Accepted `‖UΣVᴴ − M‖_F / ‖M‖_F` before falling back to Jacobi.
const SVD_RECONSTRUCTION_REL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Singular value decomposition. Each pair `(uₙ, vₙ)` is rotated by a common
/// phase so that the largest-modulus entry of `uₙ` is real and positive.
///
/// The bidiagonal QR result is checked against `M`; when the reconstruction
/// is off, the factorization is recomputed by one-sided Jacobi.
pub fn svd(m: &ComplexMatrix) -> Result<SingularDecomposition> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SingularDecomposition {
            singular_values: Vec::new(),
            left_vectors: ComplexMatrix::zeros(rows, 0),
            right_vectors: ComplexMatrix::zeros(cols, 0),
        });
    }
    let cap = iteration_cap(m);
    let scale = m.norm();
    let fast = SVD::try_new(m.clone(), true, true, SVD_EPS, cap).map(|d| SingularDecomposition {
        singular_values: d.singular_values.iter().copied().collect(),
        left_vectors: d.u.expect("left vectors requested"),
        right_vectors: d.v_t.expect("right vectors requested").adjoint(),
    });
    let mut decomposition = match fast {
        Some(d) if (d.reconstruct() - m).norm() <= SVD_RECONSTRUCTION_REL * scale => d,
        _ => jacobi_svd(m)?,
    };
    for j in 0..decomposition.left_vectors.ncols() {
        let phase = dominant_phase(decomposition.left_vectors.column(j).iter());
        for z in decomposition.left_vectors.column_mut(j).iter_mut() {
            *z *= phase.conj();
        }
        for z in decomposition.right_vectors.column_mut(j).iter_mut() {
            *z *= phase.conj();
        }
    }
    Ok(decomposition)
}

/// One-sided (Hestenes) Jacobi SVD: orthogonalizes the columns of `M` by
/// plane rotations until every pair is orthogonal to working precision.
pub fn jacobi_svd(m: &ComplexMatrix) -> Result<SingularDecomposition> {
    ensure_finite(m, "jacobi_svd input")?;
    if m.nrows() < m.ncols() {
        let d = jacobi_svd(&m.adjoint())?;
        return Ok(SingularDecomposition {
            singular_values: d.singular_values,
            left_vectors: d.right_vectors,
            right_vectors: d.left_vectors,
        });
    }
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = identity(cols);
    let negligible = (f64::EPSILON * m.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let x = mat[(i, p)];
                        let y = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = x * c - y * s;
                        mat[(i, q)] = (x * s + y * c) * phase;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: format!("Jacobi SVD of {rows}x{cols} matrix"),
            iterations: JACOBI_MAX_SWEEPS,
        });
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let cutoff = 16.0 * f64::EPSILON * m.norm();
    let mut left = ComplexMatrix::zeros(rows, cols);
    let mut right = ComplexMatrix::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    for (k, &j) in order.iter().enumerate() {
        right.set_column(k, &v.column(j));
        let sigma = norms[j];
        if sigma > cutoff {
            left.set_column(k, &(a.column(j) / Complex64::new(sigma, 0.0)));
            singular_values.push(sigma);
        } else {
            singular_values.push(sigma);
            // Roundoff-level and null directions: complete with the standard basis vector least
            // covered by the columns found so far.
            let span = left.columns(0, k).into_owned();
            let mut best = ComplexMatrix::zeros(rows, 1);
            let mut best_norm = -1.0;
            for e in 0..rows {
                let mut x = ComplexMatrix::zeros(rows, 1);
                x[(e, 0)] = cone();
                for _ in 0..2 {
                    x -= &span * (span.adjoint() * &x);
                }
                let nx = x.norm();
                if nx > best_norm {
                    best_norm = nx;
                    best = x;
                }
            }
            left.set_column(k, &(best.column(0) / Complex64::new(best_norm, 0.0)));
        }
    }
    Ok(SingularDecomposition {
        singular_values,
        left_vectors: left,
        right_vectors: right,
    })
}

/// Unit-modulus phase of the first entry of maximal modulus.
fn dominant_phase<'a>(entries: impl Iterator<Item = &'a Complex64>) -> Complex64 {
    let mut best = czero();
    for z in entries {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        cone()
    } else {
        best / best.norm()
    }
}

/// Singular values only, sorted descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    ensure_finite(m, "singular value input")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let cap = iteration_cap(m);
    let decomposition = SVD::try_new(m.clone(), false, false, SVD_EPS, cap).ok_or_else(|| {
        Error::NoConvergence {
            what: format!("singular values of {}x{} matrix", m.nrows(), m.ncols()),
            iterations: cap,
        }
    })?;
    Ok(decomposition.singular_values.iter().copied().collect())
}

/// Largest singular value (operator 2-norm). Zero for empty or zero matrices.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.iter().all(|z| *z == czero()) {
        return 0.0;
    }
    singular_values(m)
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or(f64::NAN)
}

/// Smallest singular value of a square matrix.
pub fn sigma_min(m: &ComplexMatrix) -> Result<f64> {
    ensure_square(m, "sigma_min")?;
    Ok(singular_values(m)?.last().copied().unwrap_or(0.0))
}

/// Eigenvalues and right eigenvectors, ordered by `(Re, Im)`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors as columns.
    pub right_eigenvectors: ComplexMatrix,
    /// `cond₂` of the eigenvector matrix; infinite if it is singular.
    pub condition_estimate: f64,
}

impl EigenDecomposition {
    pub fn is_defective(&self, threshold: f64) -> bool {
        !(self.condition_estimate <= threshold)
    }

    /// `max_k ‖M xₖ − μₖ xₖ‖ / (‖M‖ ‖xₖ‖)`.
    pub fn residual(&self, m: &ComplexMatrix) -> f64 {
        let norm = spectral_norm(m).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for (k, mu) in self.eigenvalues.iter().enumerate() {
            let x = self.right_eigenvectors.column(k);
            let r = m * x - x * *mu;
            worst = worst.max(r.norm() / (norm * x.norm().max(f64::MIN_POSITIVE)));
        }
        worst
    }

    /// `X · diag(weights) · X⁻¹`, e.g. a spectral projector when the weights are 0/1.
    pub fn spectral_sum(&self, weights: &[Complex64]) -> Result<ComplexMatrix> {
        let n = self.eigenvalues.len();
        if weights.len() != n {
            return Err(Error::Dimension {
                context: "spectral_sum weights",
                expected: n,
                found: weights.len(),
            });
        }
        let x = &self.right_eigenvectors;
        let mut xw = x.clone();
        for (j, w) in weights.iter().enumerate() {
            for z in xw.column_mut(j).iter_mut() {
                *z *= *w;
            }
        }
        // (X diag(w) X⁻¹)ᵀ = X⁻ᵀ (X diag(w))ᵀ, so solve with Xᵀ.
        let solved = solve(&x.transpose(), &xw.transpose())?;
        Ok(solved.transpose())
    }
}

/// Rotation `[[c, s], [−conj(s), c]]` with real `c` that maps `(x, y)` to `(r, 0)`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ny = y.norm();
    if ny == 0.0 {
        return (1.0, czero());
    }
    let nx = x.norm();
    if nx == 0.0 {
        return (0.0, y.conj() / ny);
    }
    let r = nx.hypot(ny);
    (nx / r, (x / nx) * y.conj() / r)
}

/// Complex Schur form `M = Q U Qᴴ` by single-shift Hessenberg QR with
/// Wilkinson shifts and an exceptional shift every tenth stalled sweep.
pub fn complex_schur(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    ensure_square(m, "complex_schur")?;
    ensure_finite(m, "complex_schur input")?;
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if n <= 1 || scale == 0.0 {
        return Ok((identity(n), m.clone()));
    }
    let (mut q, mut h) = Hessenberg::new(m / Complex64::new(scale, 0.0)).unpack();
    let hnorm = h.norm();
    let cap = iteration_cap(m);
    let mut total = 0;
    let mut stalled = 0;
    let mut hi = n - 1;
    let mut rotations: Vec<(f64, Complex64)> = Vec::with_capacity(n);
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let local = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if sub <= f64::EPSILON * local || sub <= f64::EPSILON * hnorm {
                h[(lo, lo - 1)] = czero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            stalled = 0;
            continue;
        }
        total += 1;
        stalled += 1;
        if total > cap {
            return Err(Error::NoConvergence {
                what: format!("Schur form of {n}x{n} matrix"),
                iterations: cap,
            });
        }
        let (a, b, c, d) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
        let shift = if stalled % 10 == 0 {
            d + Complex64::new(0.75 * c.norm(), 0.4375 * c.norm())
        } else {
            // Eigenvalue of the trailing 2×2 block closest to `d`.
            let half = (a - d) * 0.5;
            let root = (half * half + b * c).sqrt();
            let denom = if (half + root).norm() >= (half - root).norm() { half + root } else { half - root };
            if denom.norm() == 0.0 {
                d
            } else {
                d - b * c / denom
            }
        };
        for k in lo..=hi {
            h[(k, k)] -= shift;
        }
        rotations.clear();
        for k in lo..hi {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let (x, y) = (h[(k, j)], h[(k + 1, j)]);
                h[(k, j)] = x * cs + sn * y;
                h[(k + 1, j)] = y * cs - sn.conj() * x;
            }
            h[(k + 1, k)] = czero();
            rotations.push((cs, sn));
        }
        for (offset, &(cs, sn)) in rotations.iter().enumerate() {
            let k = lo + offset;
            for i in 0..=(k + 1).min(hi) {
                let (x, y) = (h[(i, k)], h[(i, k + 1)]);
                h[(i, k)] = x * cs + y * sn.conj();
                h[(i, k + 1)] = y * cs - x * sn;
            }
            for i in 0..n {
                let (x, y) = (q[(i, k)], q[(i, k + 1)]);
                q[(i, k)] = x * cs + y * sn.conj();
                q[(i, k + 1)] = y * cs - x * sn;
            }
        }
        for k in lo..=hi {
            h[(k, k)] += shift;
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            h[(i, j)] = czero();
        }
    }
    Ok((q, h * Complex64::new(scale, 0.0)))
}

/// Eigendecomposition through the complex Schur form `M = Q U Qᴴ`.
///
/// Eigenvectors of the triangular factor are obtained by back substitution;
/// coincident diagonal entries are separated by perturbing the pivot to
/// `ε‖U‖`, so a defective input yields nearly parallel vectors and a large
/// `condition_estimate` rather than an error.
pub fn eig(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    ensure_square(m, "eig")?;
    ensure_finite(m, "eig input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            right_eigenvectors: ComplexMatrix::zeros(0, 0),
            condition_estimate: 1.0,
        });
    }
    let (q, u) = complex_schur(m)?;
    let small = (f64::EPSILON * u.norm()).max(f64::MIN_POSITIVE);

    let mut y = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = u[(k, k)];
        y[(k, k)] = cone();
        for j in (0..k).rev() {
            let mut acc = czero();
            for l in (j + 1)..=k {
                acc += u[(j, l)] * y[(l, k)];
            }
            let mut pivot = u[(j, j)] - lambda;
            if pivot.norm() < small {
                pivot = Complex64::new(small, 0.0);
            }
            y[(j, k)] = -acc / pivot;
        }
    }
    let mut x = q * y;
    for j in 0..n {
        let norm = x.column(j).norm();
        let phase = dominant_phase(x.column(j).iter());
        for z in x.column_mut(j).iter_mut() {
            *z = *z * phase.conj() / norm;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (u[(a, a)], u[(b, b)]);
        za.re.total_cmp(&zb.re).then(za.im.total_cmp(&zb.im))
    });
    let eigenvalues: Vec<Complex64> = order.iter().map(|&k| u[(k, k)]).collect();
    let right_eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| x[(i, order[j])]);

    let sv = singular_values(&right_eigenvectors)?;
    let smallest = sv.last().copied().unwrap_or(0.0);
    let condition_estimate = if smallest > 0.0 {
        sv[0] / smallest
    } else {
        f64::INFINITY
    };

    Ok(EigenDecomposition {
        eigenvalues,
        right_eigenvectors,
        condition_estimate,
    })
}

/// Solves `M X = B`, refusing systems with `σ_min(M) ≤ 1e−12 ‖M‖`.
pub fn solve(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve_with_threshold(m, b, SOLVE_SIGMA_MIN_REL)
}

pub fn solve_with_threshold(
    m: &ComplexMatrix,
    b: &ComplexMatrix,
    relative_threshold: f64,
) -> Result<ComplexMatrix> {
    ensure_square(m, "solve matrix")?;
    if b.nrows() != m.nrows() {
        return Err(Error::Dimension {
            context: "solve right-hand side",
            expected: m.nrows(),
            found: b.nrows(),
        });
    }
    ensure_finite(m, "solve matrix")?;
    ensure_finite(b, "solve right-hand side")?;
    let sv = singular_values(m)?;
    let (top, bottom) = match (sv.first(), sv.last()) {
        (Some(&t), Some(&s)) => (t, s),
        _ => return Ok(ComplexMatrix::zeros(0, b.ncols())),
    };
    let threshold = relative_threshold * top;
    if bottom == 0.0 || bottom < threshold {
        return Err(Error::SingularSystem {
            sigma_min: bottom,
            threshold,
        });
    }
    let lu = m.clone().lu();
    lu.solve(b).ok_or(Error::SingularSystem {
        sigma_min: bottom,
        threshold,
    })
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve(m, &identity(m.nrows()))
}

/// Neumaier-compensated accumulator for complex matrices; summation order is
/// the call order, so results are reproducible.
#[derive(Debug, Clone)]
pub struct CompensatedSum {
    sum: ComplexMatrix,
    carry: ComplexMatrix,
}

impl CompensatedSum {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            sum: ComplexMatrix::zeros(rows, cols),
            carry: ComplexMatrix::zeros(rows, cols),
        }
    }

    pub fn add_scaled(&mut self, term: &ComplexMatrix, weight: Complex64) {
        for ((s, c), t) in self
            .sum
            .iter_mut()
            .zip(self.carry.iter_mut())
            .zip(term.iter())
        {
            let v = *t * weight;
            let (re, cre) = neumaier(s.re, c.re, v.re);
            let (im, cim) = neumaier(s.im, c.im, v.im);
            *s = Complex64::new(re, im);
            *c = Complex64::new(cre, cim);
        }
    }

    pub fn finish(self) -> ComplexMatrix {
        self.sum + self.carry
    }
}

fn neumaier(sum: f64, carry: f64, value: f64) -> (f64, f64) {
    let t = sum + value;
    let carry = if sum.abs() >= value.abs() {
        carry + ((sum - t) + value)
    } else {
        carry + ((value - t) + sum)
    };
    (t, carry)
}
