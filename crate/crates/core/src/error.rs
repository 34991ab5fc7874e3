use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the three queues of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueId {
    /// PU queue `Q_p`.
    Primary,
    /// SU own-traffic queue `Q_s`.
    Secondary,
    /// SU relay queue `Q_sp` holding admitted PU packets.
    Relay,
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueueId::Primary => write!(f, "Q_p"),
            QueueId::Secondary => write!(f, "Q_s"),
            QueueId::Relay => write!(f, "Q_sp"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("primary queue unstable: lambda_p = {lambda_p} >= mu_p = {mu_p}")]
    PrimaryUnstable { lambda_p: f64, mu_p: f64 },

    #[error("{0} is unstable (arrival rate >= service rate)")]
    Unstable(QueueId),

    #[error("near-singular denominator in {what}: |{value:e}| < {eps:e}")]
    NearSingular {
        what: &'static str,
        value: f64,
        eps: f64,
    },

    #[error("PU delay bound psi = {psi} cannot be met at mu_p = {mu_p} for any b")]
    DelayBoundUnreachable { mu_p: f64, psi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
