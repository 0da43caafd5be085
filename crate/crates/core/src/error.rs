use thiserror::Error;

/// Errors raised anywhere in the homogenization pipeline.
#[derive(Debug, Error)]
pub enum BhError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("1/eps = {0} is not a positive integer")]
    NonIntegerTiling(f64),
    #[error("coefficient {name} = {value} must be strictly positive")]
    NonpositiveCoefficient { name: &'static str, value: f64 },
    #[error("degenerate interface facet {facet} (measure {measure:e})")]
    DegenerateFacet { facet: usize, measure: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("interface facet {0} lacks an element on one side")]
    MissingAdjacency(usize),
    #[error("surface problem on component {component} not solvable: defect {defect:e}")]
    ComponentSingular { component: usize, defect: f64 },
    #[error("compatibility violated on component {component}: defect {defect:e} > {tolerance:e}")]
    CompatibilityViolated {
        component: usize,
        defect: f64,
        tolerance: f64,
    },
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("cross-check failed for {quantity}: discrepancy {discrepancy:e} > {tolerance:e}")]
    CrossCheckFailed {
        quantity: String,
        discrepancy: f64,
        tolerance: f64,
    },
    #[error("wrong geometry class: {0}")]
    WrongGeometryClass(String),
    #[error("singular time step at level {0}")]
    SingularStep(usize),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("missing or inconsistent artifact: {0}")]
    MissingArtifact(String),
    #[error("malformed {format} file: {reason}")]
    Parse { format: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BhError>;
