use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("duplicate line between buses {from} and {to}")]
    DuplicateLine { from: usize, to: usize },

    #[error("self-loop at bus {bus}")]
    SelfLoop { bus: usize },

    #[error("transmission network is not connected")]
    Disconnected,

    #[error("invalid communication graph: {0}")]
    InvalidCommGraph(String),

    #[error("communication subgraph of area {area} is not connected")]
    AreaDisconnected { area: usize },

    #[error("designated bus {bus} does not belong to area {area}")]
    DesignatedBusOutsideArea { area: usize, bus: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("load bus {bus} has zero frequency sensitivity; algebraic elimination needs D > 0")]
    ZeroLoadDamping { bus: usize },

    #[error("peer information contract violated at bus {bus}: {reason}")]
    PeerContract { bus: usize, reason: String },

    #[error("alpha differs inside area {area}")]
    NonUniformAlpha { area: usize },

    #[error("no normal operating point: {0}")]
    NoNormalOperatingPoint(String),

    #[error("OLFC problem infeasible: certificate y = {certificate:?} gives y'b = {residual:e} while y'A = 0")]
    Infeasible { certificate: Vec<f64>, residual: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("state became non-finite after t = {time}")]
    Diverged { time: f64 },

    #[error("gain certification failed: {0}")]
    Uncertified(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
