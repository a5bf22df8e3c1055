//! Resolvent calculus around `T = M_f + K` at a point `z` off the spectrum of
//! `M_f`:
//!
//! * `A(z) = (M_f − z)⁻¹ K (M_f − z)⁻¹`, which makes sense once each `uₙ`
//!   and `vₙ` vanishes where `f = z`;
//! * its factorization `A = A₁A₂` through an orthonormal atom basis with
//!   `aₙbₙ = sₙ`;
//! * `B(z) = (I + A(z)(M_f − z))⁻¹ A(z)` and the right inverse
//!   `R(z) = (M_f − z)⁻¹ − B(z)` of `T − z`;
//! * the Hilbert–Schmidt type bounds on `‖A₁(z)‖²`, `‖A₂(z)‖²` and on the
//!   truncation tails of `A₁(z)`.
//!
//! `B(z)` is computed along two independent routes. The dense route solves
//! the `N × N` system. The factored route writes `A(z)(M_f − z) = X Zᴴ` and
//! `A(z) = X Yᴴ` with `r` columns, so `B = X (I_r + ZᴴX)⁻¹ Yᴴ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, identity, ComplexMatrix};
use crate::operator::{DiscretizedMeasureSpace, PerturbedOperator};

pub const DEFAULT_RANGE_GUARD_REL: f64 = 1e-10;
pub const DEFAULT_NEAR_SINGULAR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|f_i − z|` must exceed `range_guard_rel · max(‖f‖_∞, 1)` on the
    /// support of every `uₙ`, `vₙ`.
    pub range_guard_rel: f64,
    /// Lower bound on `σ_min(I + A(z)(M_f − z))`.
    pub near_singular: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            range_guard_rel: DEFAULT_RANGE_GUARD_REL,
            near_singular: DEFAULT_NEAR_SINGULAR,
        }
    }
}

impl Tolerances {
    pub fn range_guard(&self, t: &PerturbedOperator) -> f64 {
        self.range_guard_rel * t.base().sup_norm().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Dense,
    #[default]
    Factored,
}

/// `aₙ, bₙ > 0` with `aₙ bₙ = sₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredCoefficients {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FactoredCoefficients {
    /// `aₙ = bₙ = √sₙ`.
    pub fn symmetric(t: &PerturbedOperator) -> Self {
        let a: Vec<f64> = t.perturbation().terms().iter().map(|x| x.s.sqrt()).collect();
        Self { b: a.clone(), a }
    }

    /// `aₙ = sₙ^θ`, `bₙ = sₙ^{1−θ}`.
    pub fn balanced(t: &PerturbedOperator, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!("split exponent {theta} outside [0, 1]")));
        }
        let s = t.perturbation().terms().iter().map(|x| x.s);
        let a: Vec<f64> = s.clone().map(|s| s.powf(theta)).collect();
        let b = s.zip(&a).map(|(s, a)| s / a).collect();
        Ok(Self { a, b })
    }

    /// Explicit factors, validated against the coefficients of `t`.
    pub fn new(a: Vec<f64>, b: Vec<f64>, t: &PerturbedOperator) -> Result<Self> {
        let terms = t.perturbation().terms();
        if a.len() != terms.len() || b.len() != terms.len() {
            return Err(Error::Dimension {
                context: "factored coefficients",
                expected: terms.len(),
                found: a.len().min(b.len()),
            });
        }
        for (n, ((a, b), term)) in a.iter().zip(&b).zip(terms).enumerate() {
            if !(*a > 0.0 && *b > 0.0) || (a * b - term.s).abs() > 1e-14 * term.s {
                return Err(Error::InvalidParameter(format!(
                    "term {n}: a·b = {} does not reproduce s = {}",
                    a * b,
                    term.s
                )));
            }
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    fn check(&self, t: &PerturbedOperator) -> Result<()> {
        let r = t.perturbation().len();
        if self.a.len() != r {
            return Err(Error::Dimension {
                context: "factored coefficients",
                expected: r,
                found: self.a.len(),
            });
        }
        Ok(())
    }
}

/// Verifies that every `uₙ`, `vₙ` vanishes on atoms where `f` is within the
/// range guard of `z`.
pub fn check_range_membership(t: &PerturbedOperator, z: Complex64, tol: &Tolerances) -> Result<()> {
    let guard = tol.range_guard(t);
    for (i, f) in t.symbol().iter().enumerate() {
        let gap = (f - z).norm();
        if gap > guard {
            continue;
        }
        for (n, term) in t.perturbation().terms().iter().enumerate() {
            if term.u[i] != Complex64::new(0.0, 0.0) || term.v[i] != Complex64::new(0.0, 0.0) {
                return Err(Error::RangeMembership { term: n, atom: i, z, gap });
            }
        }
    }
    Ok(())
}

/// `1/(f_i − z)` with atoms outside every term's support mapped to zero.
fn shifted_reciprocals(t: &PerturbedOperator, z: Complex64, tol: &Tolerances) -> Result<Vec<Complex64>> {
    check_range_membership(t, z, tol)?;
    let guard = tol.range_guard(t);
    Ok(t.symbol()
        .iter()
        .map(|f| {
            let d = f - z;
            if d.norm() > guard {
                d.inv()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect())
}

/// `A(z)`, entry `(i, j) = Σₙ sₙ u_{n,i} conj(v_{n,j}) w_j / ((f_i − z)(f_j − z))`.
pub fn build_a(t: &PerturbedOperator, z: Complex64, tol: &Tolerances) -> Result<ComplexMatrix> {
    let inv = shifted_reciprocals(t, z, tol)?;
    let mut a = t.perturbation().dense(t.space());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] *= inv[i] * inv[j];
        }
    }
    Ok(a)
}

/// `A₁(z) = Σₙ aₙ ((M_f − z)⁻¹uₙ) ⊗ êₙ` and `A₂(z) = Σₙ bₙ êₙ ⊗ ((M_f − z)^{−*}vₙ)`
/// with `êₙ = 1ₙ/√wₙ`, as matrices acting on samples. Needs at most as many
/// terms as atoms.
pub fn build_a1_a2(
    t: &PerturbedOperator,
    coeffs: &FactoredCoefficients,
    z: Complex64,
    tol: &Tolerances,
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    coeffs.check(t)?;
    let n = t.atom_count();
    let terms = t.perturbation().terms();
    if terms.len() > n {
        return Err(Error::InvalidParameter(format!(
            "{} terms cannot be indexed by {n} basis atoms",
            terms.len()
        )));
    }
    let inv = shifted_reciprocals(t, z, tol)?;
    let w = t.space().weights();
    let mut a1 = ComplexMatrix::zeros(n, n);
    let mut a2 = ComplexMatrix::zeros(n, n);
    for (k, term) in terms.iter().enumerate() {
        let sw = w[k].sqrt();
        for i in 0..n {
            a1[(i, k)] = term.u[i] * inv[i] * (coeffs.a[k] * sw);
            a2[(k, i)] = term.v[i].conj() * inv[i] * (coeffs.b[k] * w[i] / sw);
        }
    }
    Ok((a1, a2))
}

/// `σ_min(I + A(z)(M_f − z))` in the weighted operator norm, from a dense `A`.
pub fn invertibility_certificate(t: &PerturbedOperator, z: Complex64, a: &ComplexMatrix) -> Result<f64> {
    let m = system_matrix(t, z, a);
    numkernel::sigma_min(&t.space().to_isometric(&m))
}

fn system_matrix(t: &PerturbedOperator, z: Complex64, a: &ComplexMatrix) -> ComplexMatrix {
    let f = t.symbol();
    let n = t.atom_count();
    ComplexMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        delta + a[(i, j)] * (f[j] - z)
    })
}

/// `B(z)` together with the `A(z)` it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventOperatorAt {
    pub z: Complex64,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    pub invertibility_sigma_min: f64,
    pub route: Route,
}

/// Low-rank representation of `B(z)` and `R(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventFactors {
    pub z: Complex64,
    /// `X_{i,n} = sₙ u_{n,i} / (f_i − z)`
    x: ComplexMatrix,
    /// `Yᴴ_{n,j} = conj(v_{n,j}) w_j / (f_j − z)`
    yh: ComplexMatrix,
    /// `(I_r + ZᴴX)⁻¹` with `Zᴴ_{n,j} = conj(v_{n,j}) w_j`
    core: ComplexMatrix,
    inv_shift: Vec<Complex64>,
    pub sigma_min: f64,
}

impl ResolventFactors {
    pub fn new(t: &PerturbedOperator, z: Complex64, tol: &Tolerances) -> Result<Self> {
        let inv = shifted_reciprocals(t, z, tol)?;
        let n = t.atom_count();
        let terms = t.perturbation().terms();
        let r = terms.len();
        let w = t.space().weights();
        let x = ComplexMatrix::from_fn(n, r, |i, k| terms[k].u[i] * terms[k].s * inv[i]);
        let zh = ComplexMatrix::from_fn(r, n, |k, j| terms[k].v[j].conj() * w[j]);
        let yh = ComplexMatrix::from_fn(r, n, |k, j| zh[(k, j)] * inv[j]);
        let sigma_min = factored_sigma_min(&x, &zh, w)?;
        if sigma_min < tol.near_singular {
            return Err(Error::NearSingular {
                node: None,
                z,
                sigma_min,
                threshold: tol.near_singular,
            });
        }
        let core = if r == 0 {
            ComplexMatrix::zeros(0, 0)
        } else {
            numkernel::inverse(&(identity(r) + &zh * &x))?
        };
        Ok(Self {
            z,
            x,
            yh,
            core,
            inv_shift: inv,
            sigma_min,
        })
    }

    pub fn rank(&self) -> usize {
        self.core.nrows()
    }

    /// Dense `B(z)`.
    pub fn b(&self) -> ComplexMatrix {
        if self.rank() == 0 {
            let n = self.x.nrows();
            return ComplexMatrix::zeros(n, n);
        }
        (&self.x * &self.core) * &self.yh
    }

    /// Dense `A(z) = X Yᴴ`.
    pub fn a(&self) -> ComplexMatrix {
        &self.x * &self.yh
    }

    /// `‖A(z)‖` in the weighted operator norm, from the factors.
    pub fn a_norm(&self, space: &DiscretizedMeasureSpace) -> f64 {
        let (l, r) = self.isometric_a_factors(space);
        low_rank_norm(&l, &r)
    }

    /// `‖A(z) − A(z')‖` in the weighted operator norm, from the factors.
    pub fn a_difference_norm(&self, other: &Self, space: &DiscretizedMeasureSpace) -> f64 {
        let (l1, r1) = self.isometric_a_factors(space);
        let (l2, r2) = other.isometric_a_factors(space);
        let (k1, k2) = (l1.ncols(), l2.ncols());
        let n = l1.nrows();
        let mut l = ComplexMatrix::zeros(n, k1 + k2);
        let mut r = ComplexMatrix::zeros(n, k1 + k2);
        l.columns_mut(0, k1).copy_from(&l1);
        l.columns_mut(k1, k2).copy_from(&(-l2));
        r.columns_mut(0, k1).copy_from(&r1);
        r.columns_mut(k1, k2).copy_from(&r2);
        low_rank_norm(&l, &r)
    }

    /// `‖B(z)‖` in the weighted operator norm, from the factors.
    pub fn b_norm(&self, space: &DiscretizedMeasureSpace) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        let (l, r) = self.isometric_a_factors(space);
        low_rank_norm(&(l * &self.core), &r)
    }

    /// `(W^{1/2}X, W^{-1/2}Y)`, so that the isometric `A` is `L Rᴴ`.
    fn isometric_a_factors(&self, space: &DiscretizedMeasureSpace) -> (ComplexMatrix, ComplexMatrix) {
        let w = space.weights();
        let l = ComplexMatrix::from_fn(self.x.nrows(), self.x.ncols(), |i, k| self.x[(i, k)] * w[i].sqrt());
        let r = ComplexMatrix::from_fn(self.yh.ncols(), self.yh.nrows(), |i, k| self.yh[(k, i)].conj() / w[i].sqrt());
        (l, r)
    }

    /// `B(z) M` in `O(N r k)`.
    pub fn apply_b(&self, m: &ComplexMatrix) -> ComplexMatrix {
        if self.rank() == 0 {
            return ComplexMatrix::zeros(self.x.nrows(), m.ncols());
        }
        &self.x * (&self.core * (&self.yh * m))
    }

    /// `R(z) M = (M_f − z)⁻¹M − B(z)M`, with `(M_f − z)⁻¹` taken on the atoms
    /// away from `z`.
    pub fn apply_r(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let d = ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| self.inv_shift[i] * m[(i, j)]);
        d - self.apply_b(m)
    }
}

/// `‖A(z)‖` in the weighted operator norm from the rank-`r` factors, with
/// no invertibility requirement on `I + A(z)(M_f − z)`.
pub fn a_operator_norm(t: &PerturbedOperator, z: Complex64, tol: &Tolerances) -> Result<f64> {
    let inv = shifted_reciprocals(t, z, tol)?;
    let n = t.atom_count();
    let terms = t.perturbation().terms();
    let w = t.space().weights();
    let l = ComplexMatrix::from_fn(n, terms.len(), |i, k| terms[k].u[i] * terms[k].s * inv[i] * w[i].sqrt());
    let r = ComplexMatrix::from_fn(n, terms.len(), |j, k| terms[k].v[j] * inv[j].conj() * w[j].sqrt());
    Ok(low_rank_norm(&l, &r))
}

/// `‖L Rᴴ‖₂` through thin QR factors of `L` and `R`.
pub fn low_rank_norm(l: &ComplexMatrix, r: &ComplexMatrix) -> f64 {
    if l.ncols() == 0 {
        return 0.0;
    }
    let rl = l.clone().qr().r();
    let rr = r.clone().qr().r();
    numkernel::spectral_norm(&(rl * rr.adjoint()))
}

/// Singular values of `I + X̃Z̃ᴴ` (isometric frame) are 1 off the span of
/// `X̃`, `Z̃`, so the minimum is read from a compression of size `≤ 2r`.
fn factored_sigma_min(x: &ComplexMatrix, zh: &ComplexMatrix, w: &[f64]) -> Result<f64> {
    let n = x.nrows();
    let r = x.ncols();
    if r == 0 {
        return Ok(1.0);
    }
    let xt = ComplexMatrix::from_fn(n, r, |i, k| x[(i, k)] * w[i].sqrt());
    let zt = ComplexMatrix::from_fn(n, r, |i, k| zh[(k, i)].conj() / w[i].sqrt());
    let mut span = ComplexMatrix::zeros(n, 2 * r);
    span.columns_mut(0, r).copy_from(&xt);
    span.columns_mut(r, r).copy_from(&zt);
    let q = span.qr().q();
    let m = q.ncols();
    let compressed = identity(m) + (q.adjoint() * &xt) * (zt.adjoint() * &q);
    let inner = numkernel::sigma_min(&compressed)?;
    Ok(if m < n { inner.min(1.0) } else { inner })
}

/// `B(z) = (I + A(z)(M_f − z))⁻¹ A(z)` via the requested route.
pub fn build_b(t: &PerturbedOperator, z: Complex64, tol: &Tolerances, route: Route) -> Result<ResolventOperatorAt> {
    match route {
        Route::Factored => {
            let factors = ResolventFactors::new(t, z, tol)?;
            Ok(ResolventOperatorAt {
                z,
                a: factors.a(),
                b: factors.b(),
                invertibility_sigma_min: factors.sigma_min,
                route,
            })
        }
        Route::Dense => {
            let a = build_a(t, z, tol)?;
            let sigma_min = invertibility_certificate(t, z, &a)?;
            if sigma_min < tol.near_singular {
                return Err(Error::NearSingular {
                    node: None,
                    z,
                    sigma_min,
                    threshold: tol.near_singular,
                });
            }
            let b = numkernel::solve_with_threshold(&system_matrix(t, z, &a), &a, 0.0)?;
            Ok(ResolventOperatorAt {
                z,
                a,
                b,
                invertibility_sigma_min: sigma_min,
                route,
            })
        }
    }
}

/// Atoms at distance at least `delta` from `z`: the supports allowed for
/// lattice test vectors.
pub fn lattice_atoms(t: &PerturbedOperator, z: Complex64, delta: f64) -> Vec<usize> {
    t.symbol()
        .iter()
        .enumerate()
        .filter(|(_, f)| (*f - z).norm() >= delta)
        .map(|(i, _)| i)
        .collect()
}

/// `‖(T − z) R(z) w − w‖ / ‖w‖` in the weighted norm, for `w` supported on
/// atoms with `|f_i − z| ≥ delta`.
pub fn right_inverse_residual(
    t: &PerturbedOperator,
    z: Complex64,
    w: &[Complex64],
    delta: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let n = t.atom_count();
    if w.len() != n {
        return Err(Error::Dimension {
            context: "right_inverse_residual vector",
            expected: n,
            found: w.len(),
        });
    }
    for (i, (wi, f)) in w.iter().zip(t.symbol()).enumerate() {
        let gap = (f - z).norm();
        if *wi != Complex64::new(0.0, 0.0) && gap < delta {
            return Err(Error::LatticeViolation { atom: i, gap });
        }
    }
    let factors = ResolventFactors::new(t, z, tol)?;
    let col = ComplexMatrix::from_column_slice(n, 1, w);
    let image = t.apply_shifted(z, &factors.apply_r(&col))? - &col;
    let space = t.space();
    let denom = space.norm(w);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(space.norm(image.as_slice()) / denom)
}

/// Maximum right-inverse residual over the normalized indicators `1ᵢ/√wᵢ` of
/// every lattice atom.
pub fn right_inverse_residual_basis(
    t: &PerturbedOperator,
    factors: &ResolventFactors,
    delta: f64,
) -> Result<f64> {
    let z = factors.z;
    let atoms = lattice_atoms(t, z, delta);
    if atoms.is_empty() {
        return Ok(0.0);
    }
    let n = t.atom_count();
    let w = t.space().weights();
    let mut basis = ComplexMatrix::zeros(n, atoms.len());
    for (c, &i) in atoms.iter().enumerate() {
        basis[(i, c)] = Complex64::new(1.0 / w[i].sqrt(), 0.0);
    }
    let image = t.apply_shifted(z, &factors.apply_r(&basis))? - &basis;
    Ok((0..atoms.len())
        .map(|c| t.space().norm(image.column(c).as_slice()))
        .fold(0.0, f64::max))
}

fn real_line_terms<'a>(
    t: &'a PerturbedOperator,
    z: Complex64,
    tol: &Tolerances,
    numerators: impl Iterator<Item = (usize, f64)> + 'a,
) -> Result<f64> {
    let guard = tol.range_guard(t);
    let x = z.re;
    let f = t.symbol();
    let mut total = 0.0;
    for (k, num) in numerators {
        if num == 0.0 {
            continue;
        }
        let gap = (f[k].re - x).abs();
        if gap <= guard {
            return Err(Error::RealLineCollision { atom: k, x, gap });
        }
        total += num / (gap * gap);
    }
    Ok(total)
}

fn a1_numerators<'a>(
    t: &'a PerturbedOperator,
    coeffs: &'a FactoredCoefficients,
    from: usize,
) -> impl Iterator<Item = (usize, f64)> + 'a {
    let w = t.space().weights();
    let terms = t.perturbation().terms();
    (from..t.atom_count()).map(move |k| {
        let s: f64 = terms
            .iter()
            .zip(&coeffs.a)
            .map(|(term, a)| a * a * w[k] * term.u[k].norm_sqr())
            .sum();
        (k, s)
    })
}

/// `Σ_k Σₙ |aₙ⟨uₙ, ê_k⟩|² / |Re f_k − Re z|²`, an upper bound on `‖A₁(z)‖²`.
pub fn norm_bound_a1(t: &PerturbedOperator, coeffs: &FactoredCoefficients, z: Complex64, tol: &Tolerances) -> Result<f64> {
    coeffs.check(t)?;
    real_line_terms(t, z, tol, a1_numerators(t, coeffs, 0))
}

/// `Σ_j Σₙ |bₙ⟨ê_j, vₙ⟩|² / |Re f_j − Re z|²`, an upper bound on `‖A₂(z)‖²`.
pub fn norm_bound_a2(t: &PerturbedOperator, coeffs: &FactoredCoefficients, z: Complex64, tol: &Tolerances) -> Result<f64> {
    coeffs.check(t)?;
    let w = t.space().weights();
    let terms = t.perturbation().terms();
    let numerators = (0..t.atom_count()).map(|j| {
        let s: f64 = terms
            .iter()
            .zip(&coeffs.b)
            .map(|(term, b)| b * b * w[j] * term.v[j].norm_sqr())
            .sum();
        (j, s)
    });
    real_line_terms(t, z, tol, numerators)
}

/// The part of [`norm_bound_a1`] carried by atoms `k ≥ n` (0-based), an
/// upper bound on `‖A₁(z) − E_n A₁(z)‖²` where `E_n` keeps the first `n` atoms.
pub fn tail_bound(
    t: &PerturbedOperator,
    coeffs: &FactoredCoefficients,
    z: Complex64,
    n: usize,
    tol: &Tolerances,
) -> Result<f64> {
    coeffs.check(t)?;
    real_line_terms(t, z, tol, a1_numerators(t, coeffs, n.min(t.atom_count())))
}

/// `E_n M`: rows at index `≥ n` zeroed.
pub fn truncate_rows(m: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let mut out = m.clone();
    for i in n.min(m.nrows())..m.nrows() {
        out.row_mut(i).fill(Complex64::new(0.0, 0.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{cone, czero, from_real_rows};
    use crate::operator::{CompactPerturbation, MultiplicationOperator, Term};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e(n: usize, i: usize) -> Vec<Complex64> {
        (0..n).map(|k| if k == i { cone() } else { czero() }).collect()
    }

    fn canonical() -> PerturbedOperator {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let base = MultiplicationOperator::new(space, vec![c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let k = CompactPerturbation::new(vec![Term { s: 1.0, u: e(2, 0), v: e(2, 1) }], 2).unwrap();
        PerturbedOperator::new(base, k).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn a_of_canonical_at_one() {
        let a = build_a(&canonical(), c(1.0, 0.0), &tol()).unwrap();
        assert!((a - from_real_rows(&[&[0.0, -1.0], &[0.0, 0.0]])).norm() < 1e-15);
    }

    #[test]
    fn a_without_terms_is_zero() {
        let t = canonical().with_perturbation(CompactPerturbation::empty()).unwrap();
        assert_eq!(build_a(&t, c(1.0, 0.0), &tol()).unwrap(), ComplexMatrix::zeros(2, 2));
    }

    #[test]
    fn a_guarded_at_symbol_value() {
        let err = build_a(&canonical(), c(0.0, 0.0), &tol()).unwrap_err();
        assert!(matches!(err, Error::RangeMembership { term: 0, atom: 0, .. }));
    }

    #[test]
    fn a1_a2_factor_a() {
        let t = canonical();
        let z = c(0.4, 0.9);
        let coeffs = FactoredCoefficients::symmetric(&t);
        let (a1, a2) = build_a1_a2(&t, &coeffs, z, &tol()).unwrap();
        let a = build_a(&t, z, &tol()).unwrap();
        assert!((a1 * a2 - &a).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn certificate_of_canonical_at_one() {
        // Singular values of [[1,−1],[0,1]] are (√5 ± 1)/2.
        let t = canonical();
        let z = c(1.0, 0.0);
        let a = build_a(&t, z, &tol()).unwrap();
        let sigma = invertibility_certificate(&t, z, &a).unwrap();
        assert!((sigma - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
        let factored = ResolventFactors::new(&t, z, &tol()).unwrap().sigma_min;
        assert!((factored - sigma).abs() < 1e-14);
    }

    #[test]
    fn certificate_without_terms_is_one() {
        let t = canonical().with_perturbation(CompactPerturbation::empty()).unwrap();
        let a = ComplexMatrix::zeros(2, 2);
        assert!((invertibility_certificate(&t, c(1.0, 0.0), &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn b_of_canonical_on_unit_circle() {
        let t = canonical();
        for route in [Route::Dense, Route::Factored] {
            let at_one = build_b(&t, c(1.0, 0.0), &tol(), route).unwrap();
            assert!((at_one.b - from_real_rows(&[&[0.0, -1.0], &[0.0, 0.0]])).norm() < 1e-15);
            for k in 0..16 {
                let z = Complex64::from_polar(1.0, 0.3 + k as f64 * 0.39);
                let b = build_b(&t, z, &tol(), route).unwrap().b;
                let expected = -1.0 / (z * (2.0 - z));
                assert!((b[(0, 1)] - expected).norm() < 1e-12);
                assert!(b[(0, 0)].norm() + b[(1, 0)].norm() + b[(1, 1)].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn near_singular_at_planted_eigenvalue() {
        // T = diag(1, 3) has the eigenvalue 1, away from both symbol values.
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let base = MultiplicationOperator::new(space, vec![c(0.0, 0.0), c(3.0, 0.0)]).unwrap();
        let k = CompactPerturbation::new(vec![Term { s: 1.0, u: e(2, 0), v: e(2, 0) }], 2).unwrap();
        let t = PerturbedOperator::new(base, k).unwrap();
        let z = c(1.0, 0.0);
        let a = build_a(&t, z, &tol()).unwrap();
        assert!(invertibility_certificate(&t, z, &a).unwrap() <= 1e-10);
        for route in [Route::Dense, Route::Factored] {
            assert!(matches!(build_b(&t, z, &tol(), route), Err(Error::NearSingular { .. })));
        }
    }

    #[test]
    fn right_inverse_on_canonical() {
        let t = canonical();
        let r = right_inverse_residual(&t, c(1.0, 0.0), &e(2, 0), 0.5, &tol()).unwrap();
        assert!(r <= 1e-12);
        let bare = t.with_perturbation(CompactPerturbation::empty()).unwrap();
        let r = right_inverse_residual(&bare, c(0.5, 0.5), &[c(1.0, 2.0), c(-1.0, 0.5)], 0.1, &tol()).unwrap();
        assert!(r <= 1e-13);
        let err = right_inverse_residual(&t, c(1.9, 0.0), &e(2, 1), 0.5, &tol()).unwrap_err();
        assert!(matches!(err, Error::LatticeViolation { atom: 1, .. }));
    }

    #[test]
    fn norm_bounds_on_single_term() {
        let space = DiscretizedMeasureSpace::counting(2).unwrap();
        let base = MultiplicationOperator::new(space, vec![c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let k = CompactPerturbation::new(vec![Term { s: 1.0, u: e(2, 0), v: e(2, 0) }], 2).unwrap();
        let t = PerturbedOperator::new(base, k).unwrap();
        let coeffs = FactoredCoefficients::symmetric(&t);
        let z = c(1.0, 0.0);
        let bound = norm_bound_a1(&t, &coeffs, z, &tol()).unwrap();
        assert!((bound - 1.0).abs() < 1e-15);
        let (a1, a2) = build_a1_a2(&t, &coeffs, z, &tol()).unwrap();
        assert!((numkernel::spectral_norm(&a1).powi(2) - 1.0).abs() < 1e-14);
        assert!((norm_bound_a2(&t, &coeffs, z, &tol()).unwrap() - 1.0).abs() < 1e-15);
        assert!((numkernel::spectral_norm(&a2).powi(2) - 1.0).abs() < 1e-14);
        assert_eq!(tail_bound(&t, &coeffs, z, 0, &tol()).unwrap(), bound);
        assert_eq!(tail_bound(&t, &coeffs, z, 2, &tol()).unwrap(), 0.0);
        assert_eq!(tail_bound(&t, &coeffs, z, 5, &tol()).unwrap(), 0.0);
    }

    #[test]
    fn norm_bounds_without_terms() {
        let t = canonical().with_perturbation(CompactPerturbation::empty()).unwrap();
        let coeffs = FactoredCoefficients::symmetric(&t);
        assert_eq!(norm_bound_a1(&t, &coeffs, c(1.0, 0.0), &tol()).unwrap(), 0.0);
        assert_eq!(norm_bound_a2(&t, &coeffs, c(1.0, 0.0), &tol()).unwrap(), 0.0);
    }

    #[test]
    fn real_line_collision() {
        let t = canonical();
        let coeffs = FactoredCoefficients::symmetric(&t);
        let err = norm_bound_a1(&t, &coeffs, c(0.0, 1.0), &tol()).unwrap_err();
        assert!(matches!(err, Error::RealLineCollision { atom: 0, .. }));
    }

    #[test]
    fn coefficient_validation() {
        let t = canonical();
        assert!(FactoredCoefficients::new(vec![2.0], vec![0.5], &t).is_ok());
        assert!(FactoredCoefficients::new(vec![2.0], vec![0.6], &t).is_err());
        let c = FactoredCoefficients::balanced(&t, 0.25).unwrap();
        assert!((c.a()[0] * c.b()[0] - 1.0).abs() < 1e-15);
    }
}
