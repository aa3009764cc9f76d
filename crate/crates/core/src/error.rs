use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },
    #[error("not a manifold: {0}")]
    NotManifold(String),
    #[error("mesh is not orientable")]
    NotOrientable,
    #[error("resolution {got} too small for {shape} (minimum {min})")]
    ResolutionTooSmall { shape: &'static str, got: usize, min: usize },
    #[error("degenerate {degree}-simplex #{index} (zero volume)")]
    DegenerateSimplex { degree: usize, index: usize },
    #[error("degree {degree} out of range 0..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("wedge degree {0} exceeds dimension {1}")]
    DegreeOverflow(usize, usize),
    #[error("backend mismatch: {0}")]
    BackendMismatch(String),
    #[error("rank ambiguous in {context}: gap {gap:.3e} below required {required:.1e}")]
    RankAmbiguous { context: String, gap: f64, required: f64 },
    #[error("infeasible data: {0}")]
    Infeasible(String),
    #[error("not solvable: source has component {0:.3e} along Dirichlet fields")]
    NotSolvable(f64),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("input outside operator domain (angle {0:.3e} rad)")]
    OutOfDomain(f64),
    #[error("exactness failure at node {node}: angle {angle:.3e}")]
    ExactnessFailure { node: usize, angle: f64 },
    #[error("empty boundary subspace")]
    EmptyBoundarySubspace,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
