use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("matrix is not unitary: {0}")]
    NonUnitaryMatrix(String),
    #[error("weights admit no scalar covariance: {0}")]
    NonScalarCovariance(String),
    #[error("mesh N={n} incompatible: {why}")]
    MeshIncompatible { n: usize, why: String },
    #[error("puncture lies on a lattice edge or vertex: {0}")]
    PunctureOnEdge(String),
    #[error("edge cannot be reflected across a single boundary line: {0}")]
    UnreflectableEdge(String),
    #[error("lattice is not compatible with the gluing: {0}")]
    LatticeIncompatible(String),
    #[error("surface fails flatness validation: {0}")]
    NotFlat(String),
    #[error("gauge is not unitary at vertex {0}")]
    NonUnitaryGauge(usize),
    #[error("kernel dimension mismatch: eigensolve {eigen}, covariant constants {constants}")]
    KernelMismatch { eigen: usize, constants: usize },
    #[error("dimension {n} exceeds the dense limit {limit}")]
    SizeLimit { n: usize, limit: usize },
    #[error("spectrum has no eigenvectors")]
    MissingVectors,
    #[error("operator is not Hermitian after symmetrisation (defect {0:e})")]
    NotHermitian(f64),
    #[error("angle {0} is not representable on this lattice")]
    AngleNotRepresentable(f64),
    #[error("requested time exceeds the truncation certificate: {0}")]
    TruncationBudgetExceeded(String),
    #[error("tail fit does not decay: {0}")]
    TailNotDecaying(String),
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("no model counterpart: {0}")]
    ModelMismatch(String),
    #[error("model neighbourhoods overlap: {0}")]
    OverlapViolation(String),
    #[error(
        "key formula residual {residual:e} exceeds budget {budget:e}; largest term error in {term}"
    )]
    BudgetExceeded {
        residual: f64,
        budget: f64,
        term: String,
    },
    #[error("corner assembly mismatch: assembled {assembled}, closed form {closed}")]
    AssemblyMismatch { assembled: f64, closed: f64 },
    #[error("ill-conditioned fit (condition number {0:e})")]
    IllConditioned(f64),
    #[error("kernel dimension changes across the sweep: {0}")]
    KernelJump(String),
    #[error("factorisation failed: {0}")]
    Factorization(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
