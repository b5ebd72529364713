use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by [`ErrorKind`] so callers (the CLI in particular)
/// can map them onto exit codes without matching every variant.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("singular matrix: |ad - bc| = {0:e}")]
    SingularMatrix(f64),
    #[error("map is not loxodromic ({0})")]
    NotLoxodromic(String),
    #[error("cross-ratio is indeterminate (0/0)")]
    Indeterminate,
    #[error("point is an endpoint of the geodesic; foot point undefined")]
    DegenerateFoot,
    #[error("distance from a boundary point to a geodesic is infinite")]
    BoundaryPoint,

    #[error("conjugacy class of the identity requested")]
    TrivialElement,
    #[error("expected a single generator, got word {0}")]
    NotAGenerator(String),

    #[error("generator/circle count mismatch: {0}")]
    CountMismatch(String),
    #[error("discs {0} and {1} overlap")]
    CirclesOverlap(usize, usize),
    #[error("marking violated for generator {generator}: sample point {point} ({reason})")]
    MarkingViolated {
        generator: usize,
        point: String,
        reason: String,
    },
    #[error("base point {0} is not in the closed fundamental domain")]
    BasepointOutsideDomain(String),
    #[error("derivative pole at {0}")]
    DerivativePole(String),
    #[error("convergence not established: ratio {rho:.4} ({verdict})")]
    ConvergenceNotEstablished { rho: f64, verdict: String },
    #[error("cross-ratio degenerate for word {0}")]
    CrossRatioDegenerate(String),

    #[error("divisor degree is {0}, expected 0")]
    DegreeNotZero(i64),
    #[error("divisor supports intersect at {0}")]
    SupportsIntersect(String),
    #[error("malformed divisor: {0}")]
    MalformedDivisor(String),
    #[error("point {0} is not in the fundamental domain")]
    PointNotInFundamentalDomain(String),
    #[error("real period matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("orbit collision: word {word} maps a divisor point within {distance:e} of another")]
    OrbitCollision { word: String, distance: f64 },
    #[error("evaluation point too close to a singularity ({0})")]
    TooCloseToSingularity(String),

    #[error("fundamental polygon data missing: {0}")]
    PolygonDataMissing(String),
    #[error("letter {0} is outside the free subgroup F0")]
    LetterOutsideF0(String),
    #[error("surface relation fails: residual {0:e}")]
    RelationViolated(f64),
    #[error("generator {0} does not preserve the invariant circle")]
    NotCirclePreserving(usize),
    #[error("Markov partition unavailable: {0}")]
    PartitionUnavailable(String),

    #[error("rank mismatch: {0}")]
    RankMismatch(String),
    #[error("fundamental domain data missing: {0}")]
    DomainDataMissing(String),
    #[error("factor data missing: {0}")]
    FactorDataMissing(String),
    #[error("lemma check failed: {0}")]
    DisjointnessViolated(String),
    #[error("parabolic generator rejected: {0}")]
    ParabolicGenerator(String),

    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Coarse category of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input.
    Validation,
    /// The Poincaré series gate refused the group.
    Convergence,
    /// A numerical step failed on valid input.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            ConvergenceNotEstablished { .. } => ErrorKind::Convergence,
            SingularMatrix(_)
            | Indeterminate
            | DegenerateFoot
            | DerivativePole(_)
            | CrossRatioDegenerate(_)
            | IllConditioned(_)
            | OrbitCollision { .. }
            | TooCloseToSingularity(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
