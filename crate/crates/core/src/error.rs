use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation outside domain: {0}")]
    EvaluationOutsideDomain(String),
    #[error("invalid horizon {0}")]
    InvalidHorizon(f64),
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),
    #[error("sampler failure: {0}")]
    SamplerFailure(String),
    #[error("unknown catalog name: {0}")]
    UnknownName(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("frame rank mismatch: {0}")]
    FrameRankMismatch(String),
    #[error("not a splitting: {0}")]
    NotASplitting(String),
    #[error("rank deficient lift: {0}")]
    RankDeficientLift(String),
    #[error("kernel not exposed for morphism {0}")]
    KernelNotExposed(String),
    #[error("incompatible morphisms: {0}")]
    IncompatibleMorphisms(String),
    #[error("not an action morphism: {0}")]
    NotAnActionMorphism(String),
    #[error("not a family: {0}")]
    NotAFamily(String),
    #[error("start arrow not over the path start (distance {0})")]
    StartFiberMismatch(f64),
    #[error("path is not a loop (endpoint distance {0})")]
    NotALoop(f64),
    #[error("not a fibration: {0}")]
    NotAFibration(String),
    #[error("pair sampler failure: {0}")]
    PairSamplerFailure(String),
    #[error("not a submersion: {0}")]
    NotASubmersion(String),
    #[error("partition of unity gap: sum deviates by {0}")]
    PartitionGap(f64),
    #[error("field is not source-projectable (residual {0})")]
    NonProjectableInput(f64),
    #[error("no Haar quadrature for groupoid {0}")]
    QuadratureMissing(String),
    #[error("fiber groupoid {0} is not flagged source-proper")]
    NotSourceProper(String),
    #[error("supremum unbounded: {0}")]
    SupremumUnbounded(String),
    #[error("certificate failure: {0}")]
    CertificateFailure(String),
    #[error("atlas mismatch: {0}")]
    AtlasMismatch(String),
    #[error("unknown scenario: {0}")]
    UnknownScenario(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
