use num_complex::Complex64;

fn node_label(node: Option<usize>) -> String {
    node.map_or_else(|| "an unindexed point".into(), |j| format!("node {j}"))
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("singular system: sigma_min = {sigma_min:e} is below threshold {threshold:e}")]
    SingularSystem { sigma_min: f64, threshold: f64 },

    #[error("matrix is not normal: commutator defect {defect:e}")]
    NotNormal { defect: f64 },

    #[error("point {point} lies on the contour (distance {distance:e})")]
    OnCurve { point: Complex64, distance: f64 },

    #[error("term {term} touches atom {atom} where |f - z| = {gap:e} is below the range guard at z = {z}")]
    RangeMembership {
        term: usize,
        atom: usize,
        z: Complex64,
        gap: f64,
    },

    #[error("I + A(z)(M_f - z) is near-singular at {} (z = {z}): sigma_min = {sigma_min:e} < {threshold:e}", node_label(*.node))]
    NearSingular {
        node: Option<usize>,
        z: Complex64,
        sigma_min: f64,
        threshold: f64,
    },

    #[error("test vector touches atom {atom} with |f - z| = {gap:e} below the lattice margin")]
    LatticeViolation { atom: usize, gap: f64 },

    #[error("Re z = {x} is within {gap:e} of Re λ_{atom}")]
    RealLineCollision { atom: usize, x: f64, gap: f64 },

    #[error("no admissible x0 among {candidates} candidates")]
    NoAdmissibleX0 { candidates: usize },

    #[error("extracted subspace is trivial: rank {rank} of {dimension}")]
    TrivialSubspace { rank: usize, dimension: usize },

    #[error("commutant sample rejected: {0}")]
    CommutantRejected(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
