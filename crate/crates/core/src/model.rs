//! Closed-form queueing model of the cooperative PU/SU network.
//!
//! The PU owns queue `Q_p`. The SU keeps its own packets in `Q_s` and the PU
//! packets it agreed to relay in `Q_sp`. A failed PU transmission that the SU
//! overheard is admitted to `Q_sp` with probability `a`; when the PU is idle
//! the SU serves `Q_s` with probability `b` and `Q_sp` otherwise.
//!
//! Everything here is a pure function of its inputs. Most quantities come in
//! two flavours: one taking a [`Policy`] and one (`*_at`) taking the PU
//! service rate `mu_p` directly, which is the coordinate the optimizer scans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, QueueId, Result};

/// Denominators with magnitude below this are reported as
/// [`Error::NearSingular`] instead of producing unbounded values.
pub const DENOM_EPS: f64 = 1e-12;

fn probability(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min: 0.0,
            max: 1.0,
        })
    }
}

fn guard(what: &'static str, den: f64) -> Result<f64> {
    if den.abs() < DENOM_EPS || !den.is_finite() {
        Err(Error::NearSingular {
            what,
            value: den,
            eps: DENOM_EPS,
        })
    } else {
        Ok(den)
    }
}

/// Channel success probabilities and Bernoulli arrival rates.
///
/// All fields are validated to lie in `[0, 1]` on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetworkParams")]
pub struct NetworkParams {
    lambda_p: f64,
    lambda_s: f64,
    h_pd: f64,
    h_ps: f64,
    h_sd: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetworkParams {
    lambda_p: f64,
    lambda_s: f64,
    h_pd: f64,
    h_ps: f64,
    h_sd: f64,
}

impl TryFrom<RawNetworkParams> for NetworkParams {
    type Error = Error;

    fn try_from(raw: RawNetworkParams) -> Result<Self> {
        NetworkParams::new(raw.lambda_p, raw.lambda_s, raw.h_pd, raw.h_ps, raw.h_sd)
    }
}

/// Non-fatal observations about a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamWarning {
    /// `h_sd <= h_pd`: relaying through the SU is never better than the direct link.
    RelayNotBetterThanDirect,
}

impl NetworkParams {
    pub fn new(lambda_p: f64, lambda_s: f64, h_pd: f64, h_ps: f64, h_sd: f64) -> Result<Self> {
        Ok(Self {
            lambda_p: probability("lambda_p", lambda_p)?,
            lambda_s: probability("lambda_s", lambda_s)?,
            h_pd: probability("h_pd", h_pd)?,
            h_ps: probability("h_ps", h_ps)?,
            h_sd: probability("h_sd", h_sd)?,
        })
    }

    pub fn lambda_p(&self) -> f64 {
        self.lambda_p
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn h_pd(&self) -> f64 {
        self.h_pd
    }

    pub fn h_ps(&self) -> f64 {
        self.h_ps
    }

    pub fn h_sd(&self) -> f64 {
        self.h_sd
    }

    pub fn with_lambda_p(self, lambda_p: f64) -> Result<Self> {
        Ok(Self {
            lambda_p: probability("lambda_p", lambda_p)?,
            ..self
        })
    }

    pub fn with_lambda_s(self, lambda_s: f64) -> Result<Self> {
        Ok(Self {
            lambda_s: probability("lambda_s", lambda_s)?,
            ..self
        })
    }

    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        if self.h_sd <= self.h_pd {
            out.push(ParamWarning::RelayNotBetterThanDirect);
        }
        out
    }

    /// Range `[h_pd, h_pd + (1 - h_pd) h_ps]` spanned by `mu_p` as `a` goes from 0 to 1.
    pub fn mu_p_bounds(&self) -> (f64, f64) {
        (self.h_pd, self.h_pd + self.relay_span())
    }

    /// `(1 - h_pd) h_ps`, the width of the `mu_p` range.
    pub fn relay_span(&self) -> f64 {
        (1.0 - self.h_pd) * self.h_ps
    }
}

/// Admission probability `a` and queue-selection probability `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct Policy {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    a: f64,
    b: f64,
}

impl TryFrom<RawPolicy> for Policy {
    type Error = Error;

    fn try_from(raw: RawPolicy) -> Result<Self> {
        Policy::new(raw.a, raw.b)
    }
}

impl Policy {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Ok(Self {
            a: probability("a", a)?,
            b: probability("b", b)?,
        })
    }

    /// Recover the policy whose admission probability yields `mu_p`.
    ///
    /// `a` is clamped to `[0, 1]` so grid endpoints that drift by an ulp stay valid.
    pub fn from_service_rate(params: &NetworkParams, mu_p: f64, b: f64) -> Result<Self> {
        Policy::new(admission_for_service_rate(params, mu_p), b)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// PU delay bound `psi` in slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DelaySpec {
    psi: f64,
}

impl DelaySpec {
    pub fn new(psi: f64) -> Result<Self> {
        if psi.is_finite() && psi > 0.0 {
            Ok(Self { psi })
        } else {
            Err(Error::InvalidConfig(format!(
                "delay bound psi must be finite and > 0, got {psi}"
            )))
        }
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

impl TryFrom<f64> for DelaySpec {
    type Error = Error;

    fn try_from(psi: f64) -> Result<Self> {
        DelaySpec::new(psi)
    }
}

impl From<DelaySpec> for f64 {
    fn from(spec: DelaySpec) -> f64 {
        spec.psi
    }
}

/// Service and relay-arrival rates implied by a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub mu_p: f64,
    pub mu_s: f64,
    pub mu_sp: f64,
    pub lambda_sp: f64,
}

/// Per-queue stability flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stability {
    pub primary: bool,
    pub secondary: bool,
    pub relay: bool,
}

impl Stability {
    pub fn all_stable(&self) -> bool {
        self.primary && self.secondary && self.relay
    }

    /// First failing queue in the order `Q_p`, `Q_sp`, `Q_s`.
    pub fn first_unstable(&self) -> Option<QueueId> {
        if !self.primary {
            Some(QueueId::Primary)
        } else if !self.relay {
            Some(QueueId::Relay)
        } else if !self.secondary {
            Some(QueueId::Secondary)
        } else {
            None
        }
    }
}

/// Average queue lengths (packets) and per-class delays (slots).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueMetrics {
    pub n_p: f64,
    pub n_sp: f64,
    pub n_s: f64,
    pub d_p: f64,
    pub d_s: f64,
}

/// `mu_p = h_pd + (1 - h_pd) h_ps a`.
pub fn primary_service_rate(params: &NetworkParams, a: f64) -> f64 {
    params.h_pd + params.relay_span() * a
}

/// Inverse of [`primary_service_rate`], clamped to `[0, 1]`.
pub fn admission_for_service_rate(params: &NetworkParams, mu_p: f64) -> f64 {
    let span = params.relay_span();
    if span <= 0.0 {
        return 0.0;
    }
    ((mu_p - params.h_pd) / span).clamp(0.0, 1.0)
}

// Fraction of slots in which the PU is backlogged. Zero when there is no PU traffic.
fn pu_load(params: &NetworkParams, mu_p: f64) -> f64 {
    if params.lambda_p == 0.0 {
        0.0
    } else {
        params.lambda_p / mu_p
    }
}

// A queue with no arrivals never holds a packet, so it counts as stable even
// when its service rate is zero.
fn holds(arrival: f64, service: f64, margin: f64) -> bool {
    arrival == 0.0 || arrival + margin < service
}

pub fn derived_rates(params: &NetworkParams, policy: &Policy) -> Result<DerivedRates> {
    rates_at(params, primary_service_rate(params, policy.a), policy.b)
}

/// Rates at PU service rate `mu_p` and selection probability `b`.
pub fn rates_at(params: &NetworkParams, mu_p: f64, b: f64) -> Result<DerivedRates> {
    if !holds(params.lambda_p, mu_p, 0.0) {
        return Err(Error::PrimaryUnstable {
            lambda_p: params.lambda_p,
            mu_p,
        });
    }
    let load = pu_load(params, mu_p);
    let idle = 1.0 - load;
    Ok(DerivedRates {
        mu_p,
        mu_s: b * params.h_sd * idle,
        mu_sp: (1.0 - b) * params.h_sd * idle,
        lambda_sp: (mu_p - params.h_pd).max(0.0) * load,
    })
}

/// Strict arrival-below-service test for each queue.
pub fn stability(params: &NetworkParams, rates: &DerivedRates) -> Stability {
    stability_with_margin(params, rates, 0.0)
}

/// Like [`stability`] but requires `arrival + margin < service` for queues with traffic.
pub fn stability_with_margin(params: &NetworkParams, rates: &DerivedRates, margin: f64) -> Stability {
    Stability {
        primary: holds(params.lambda_p, rates.mu_p, margin),
        secondary: holds(params.lambda_s, rates.mu_s, margin),
        relay: holds(rates.lambda_sp, rates.mu_sp, margin),
    }
}

/// Stability of a policy, reporting every queue unstable when `Q_p` is.
pub fn stability_of(params: &NetworkParams, policy: &Policy) -> Stability {
    match derived_rates(params, policy) {
        Ok(rates) => stability(params, &rates),
        Err(_) => Stability {
            primary: false,
            secondary: false,
            relay: false,
        },
    }
}

pub fn queue_metrics(params: &NetworkParams, policy: &Policy) -> Result<QueueMetrics> {
    queue_metrics_at(params, primary_service_rate(params, policy.a), policy.b)
}

pub fn queue_metrics_at(params: &NetworkParams, mu_p: f64, b: f64) -> Result<QueueMetrics> {
    let rates = rates_at(params, mu_p, b)?;
    if let Some(q) = stability(params, &rates).first_unstable() {
        return Err(Error::Unstable(q));
    }
    let pu = pu_side(params, mu_p, b)?;
    let su = su_side(params, mu_p, b)?;
    Ok(QueueMetrics {
        n_p: pu.n_p,
        n_sp: pu.n_sp,
        n_s: su.n_s,
        d_p: pu.d_p,
        d_s: su.d_s,
    })
}

/// `N_p`, `N_sp` and the PU delay alone. Requires `Q_p` and `Q_sp` stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuDelay {
    pub n_p: f64,
    pub n_sp: f64,
    pub d_p: f64,
}

/// PU-side metrics, usable when `Q_s` is unstable (it does not affect the PU).
pub fn pu_delay_at(params: &NetworkParams, mu_p: f64, b: f64) -> Result<PuDelay> {
    let rates = rates_at(params, mu_p, b)?;
    if !holds(rates.lambda_sp, rates.mu_sp, 0.0) {
        return Err(Error::Unstable(QueueId::Relay));
    }
    pu_side(params, mu_p, b)
}

/// SU delay alone. Requires `Q_s` stable.
pub fn su_delay_at(params: &NetworkParams, mu_p: f64, b: f64) -> Result<f64> {
    let rates = rates_at(params, mu_p, b)?;
    if !holds(params.lambda_s, rates.mu_s, 0.0) {
        return Err(Error::Unstable(QueueId::Secondary));
    }
    Ok(su_side(params, mu_p, b)?.d_s)
}

fn pu_side(params: &NetworkParams, mu_p: f64, b: f64) -> Result<PuDelay> {
    let lp = params.lambda_p;
    let h_pd = params.h_pd;
    let h_sd = params.h_sd;
    let b_bar = 1.0 - b;
    let mu_bar = 1.0 - mu_p;
    let gain = mu_p - h_pd;

    let den_p = guard("N_p", mu_p - lp)?;
    // Relay bracket shared by N_sp's numerator; its denominator factor is
    // positive exactly when Q_sp is stable.
    let bracket = b_bar * h_sd * mu_bar * lp - gain * mu_p * lp - h_pd * lp + mu_p * mu_p;
    let relay_den = |lp: f64| mu_p * (mu_p - lp) * (b_bar * h_sd * (mu_p - lp) - lp * gain);

    if lp == 0.0 {
        // Light-traffic limit of (N_p + N_sp) / lambda_p.
        let per_p = 1.0 / den_p;
        let per_sp = if gain <= 0.0 {
            0.0
        } else {
            gain * bracket / guard("N_sp", relay_den(0.0))?
        };
        return Ok(PuDelay {
            n_p: 0.0,
            n_sp: 0.0,
            d_p: per_p + per_sp,
        });
    }

    let n_p = (lp - lp * lp) / den_p;
    let n_sp = if gain <= 0.0 {
        0.0
    } else {
        lp * gain * bracket / guard("N_sp", relay_den(lp))?
    };
    Ok(PuDelay {
        n_p,
        n_sp,
        d_p: (n_p + n_sp) / lp,
    })
}

struct SuSide {
    n_s: f64,
    d_s: f64,
}

fn su_side(params: &NetworkParams, mu_p: f64, b: f64) -> Result<SuSide> {
    let lp = params.lambda_p;
    let ls = params.lambda_s;
    let h_sd = params.h_sd;
    let gap = mu_p - lp;
    let den = guard("N_s", gap * (b * h_sd * gap - ls * mu_p))?;

    if ls == 0.0 {
        let d_s = (b * h_sd * lp * (1.0 - mu_p) + gap * mu_p) / den;
        return Ok(SuSide { n_s: 0.0, d_s });
    }
    let n_s = (b * h_sd * lp * ls * (1.0 - mu_p) + (ls - ls * ls) * gap * mu_p) / den;
    Ok(SuSide { n_s, d_s: n_s / ls })
}

/// Affine-in-`b` constraint function whose 0-sublevel set is `D_p <= psi`
/// on the relay-stable region.
pub fn phi(params: &NetworkParams, policy: &Policy, spec: &DelaySpec) -> Result<f64> {
    phi_at(params, primary_service_rate(params, policy.a), policy.b, spec)
}

pub fn phi_at(params: &NetworkParams, mu_p: f64, b: f64, spec: &DelaySpec) -> Result<f64> {
    let lp = params.lambda_p;
    if !holds(lp, mu_p, 0.0) {
        return Err(Error::PrimaryUnstable { lambda_p: lp, mu_p });
    }
    let h_pd = params.h_pd;
    let h_sd = params.h_sd;
    let b_bar = 1.0 - b;
    let mu_bar = 1.0 - mu_p;
    let n_p = (lp - lp * lp) / guard("N_p", mu_p - lp)?;

    let first = lp
        * (mu_p - h_pd)
        * (b_bar * h_sd * mu_bar * lp - (mu_p - h_pd) * mu_p * lp - h_pd * lp + mu_p * mu_p);
    let second = mu_p
        * (mu_p - lp)
        * (b_bar * h_sd * (mu_p - lp) - lp * (mu_p - h_pd))
        * (lp * spec.psi - n_p);
    Ok(first - second)
}

/// Derivative of the SU delay with respect to `b`; negative wherever `Q_s` is stable.
pub fn ds_derivative(params: &NetworkParams, policy: &Policy) -> Result<f64> {
    ds_derivative_at(params, primary_service_rate(params, policy.a), policy.b)
}

pub fn ds_derivative_at(params: &NetworkParams, mu_p: f64, b: f64) -> Result<f64> {
    let rates = rates_at(params, mu_p, b)?;
    if !holds(params.lambda_s, rates.mu_s, 0.0) {
        return Err(Error::Unstable(QueueId::Secondary));
    }
    let lp = params.lambda_p;
    let ls = params.lambda_s;
    let h_sd = params.h_sd;
    let gap = mu_p - lp;
    // Common factor lambda_s cancelled from numerator and denominator so the
    // expression stays finite at lambda_s = 0.
    let num = -h_sd * mu_p * (lp * ls * (1.0 - mu_p) * gap + (1.0 - ls) * gap.powi(3));
    let root = ls * mu_p * gap - h_sd * gap * gap * b;
    Ok(num / guard("dD_s/db", root * root)?)
}
