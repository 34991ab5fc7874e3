//! Delay-constrained policy optimization.
//!
//! Both problems are solved by scanning the PU service rate `mu_p` over its
//! feasible interval. For a fixed `mu_p` the SU throughput is increasing and
//! the SU delay decreasing in `b`, so the inner optimum is the largest `b`
//! that still meets the PU delay bound, available in closed form
//! ([`b_star`]). The baseline replaces the delay bound with plain queue
//! stability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    pu_delay_at, queue_metrics_at, rates_at, su_delay_at, DelaySpec, DerivedRates,
    NetworkParams, Policy, QueueMetrics, DENOM_EPS,
};

/// Objectives within this distance of the best are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Smallest `mu_p` (least relaying) among tied grid points.
    #[default]
    SmallestMuP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Grid increment for `mu_p`.
    pub delta: f64,
    /// Interior margin used where a strictly stable point is required.
    pub eps_stab: f64,
    pub tie_break: TieBreak,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            delta: 1e-4,
            eps_stab: 1e-6,
            tie_break: TieBreak::SmallestMuP,
        }
    }
}

impl SearchConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self, params: &NetworkParams) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if !(self.eps_stab.is_finite() && self.eps_stab >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_stab must be >= 0, got {}",
                self.eps_stab
            )));
        }
        let span = params.relay_span();
        if span > 0.0 && self.delta > span * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "delta = {} exceeds the mu_p interval width {span}",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// Maximize SU throughput subject to `D_p <= psi`.
    P1,
    /// Minimize SU delay subject to `D_p <= psi`.
    P3,
    /// Maximize SU throughput subject only to queue stability.
    BlThroughput,
    /// Minimize SU delay subject only to queue stability.
    BlDelay,
}

impl Problem {
    pub fn objective(&self) -> Objective {
        match self {
            Problem::P1 | Problem::BlThroughput => Objective::Throughput,
            Problem::P3 | Problem::BlDelay => Objective::Delay,
        }
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, Problem::BlThroughput | Problem::BlDelay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Throughput,
    Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
}

/// Which constraint stopped `b` from reaching 1 at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    None,
    DelayBound,
    RelayStability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub policy: Policy,
    pub mu_p_star: f64,
    /// `mu_s` for throughput problems, `D_s` for delay problems.
    pub objective: f64,
    pub rates: DerivedRates,
    pub binding: Binding,
    /// PU delay, absent when `Q_p` or `Q_sp` is unstable.
    pub d_p: Option<f64>,
    /// SU delay, absent when `Q_s` is unstable at this point.
    pub d_s: Option<f64>,
    /// Full metrics, present only when all three queues are stable.
    pub metrics: Option<QueueMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub problem: Problem,
    pub psi: Option<f64>,
    pub status: Status,
    #[serde(flatten)]
    pub optimum: Option<Optimum>,
}

impl OptResult {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

/// Largest `b` meeting `D_p <= psi` at PU service rate `mu_p`.
///
/// Returns [`Error::DelayBoundUnreachable`] when no `b` in `[0, 1]` satisfies
/// the bound. With no PU traffic the bound is vacuous and `b = 1`.
pub fn b_star(params: &NetworkParams, mu_p: f64, spec: &DelaySpec) -> Result<f64> {
    let (lo, hi) = params.mu_p_bounds();
    if !(mu_p >= lo - 1e-12 && mu_p <= hi + 1e-12) {
        return Err(Error::OutOfRange {
            name: "mu_p",
            value: mu_p,
            min: lo,
            max: hi,
        });
    }
    let lp = params.lambda_p();
    if lp == 0.0 {
        return Ok(1.0);
    }
    if lp >= mu_p {
        return Err(Error::PrimaryUnstable { lambda_p: lp, mu_p });
    }
    let h_pd = params.h_pd();
    let h_sd = params.h_sd();
    let psi = spec.psi();
    let n_p = (lp - lp * lp) / (mu_p - lp);
    let slack = lp * psi - n_p;
    let gain = mu_p - h_pd;

    let num = lp * lp * gain * (-h_pd / mu_p - gain) + lp * mu_p * gain
        - slack * gain * (lp * lp - lp * mu_p);
    let den = -h_sd
        * (lp * lp / mu_p * gain * (1.0 - mu_p)
            - slack * (lp * lp - 2.0 * lp * mu_p + mu_p * mu_p));

    // A non-positive denominator means the constraint function does not
    // decrease as b shrinks, so no b satisfies it.
    if den < DENOM_EPS {
        return Err(Error::DelayBoundUnreachable { mu_p, psi });
    }
    let bound = 1.0 - num / den;
    if bound < 0.0 {
        return Err(Error::DelayBoundUnreachable { mu_p, psi });
    }
    Ok(bound.min(1.0))
}

/// Largest `b` keeping `Q_sp` stable with margin `eps` at service rate `mu_p`.
pub fn b_stability_limit(params: &NetworkParams, mu_p: f64, eps: f64) -> Result<f64> {
    Ok(stability_limited(params, mu_p, eps)?.0)
}

fn stability_limited(params: &NetworkParams, mu_p: f64, eps: f64) -> Result<(f64, Binding)> {
    let rates = rates_at(params, mu_p, 1.0)?;
    if rates.lambda_sp == 0.0 {
        return Ok((1.0, Binding::None));
    }
    // At b = 1 all SU access goes to Q_s, so mu_s is the whole access rate.
    let access = rates.mu_s;
    if access < DENOM_EPS {
        return Err(Error::Unstable(crate::error::QueueId::Relay));
    }
    let b = 1.0 - (rates.lambda_sp + eps) / access;
    if b < 0.0 {
        return Err(Error::Unstable(crate::error::QueueId::Relay));
    }
    Ok((b, Binding::RelayStability))
}

/// Scan points `h_pd, h_pd + delta, ...` plus the upper endpoint of the `mu_p` interval.
pub fn mu_p_grid(params: &NetworkParams, delta: f64) -> Vec<f64> {
    let (lo, hi) = params.mu_p_bounds();
    let span = hi - lo;
    if span <= 0.0 {
        return vec![lo];
    }
    let steps = (span / delta + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * delta).collect();
    match grid.last_mut() {
        Some(last) if (hi - *last).abs() <= 1e-12 => *last = hi,
        _ => grid.push(hi),
    }
    grid
}

pub fn solve_p1(params: &NetworkParams, spec: &DelaySpec, cfg: &SearchConfig) -> Result<OptResult> {
    line_search(params, Problem::P1, Some(*spec), cfg)
}

pub fn solve_p3(params: &NetworkParams, spec: &DelaySpec, cfg: &SearchConfig) -> Result<OptResult> {
    if params.lambda_s() <= 0.0 {
        return Err(Error::InvalidConfig(
            "SU delay minimization needs lambda_s > 0".into(),
        ));
    }
    line_search(params, Problem::P3, Some(*spec), cfg)
}

pub fn solve_baseline(
    params: &NetworkParams,
    objective: Objective,
    cfg: &SearchConfig,
) -> Result<OptResult> {
    let problem = match objective {
        Objective::Throughput => Problem::BlThroughput,
        Objective::Delay => Problem::BlDelay,
    };
    line_search(params, problem, None, cfg)
}

/// Dispatch on [`Problem`]; `spec` is required for P1/P3 and ignored otherwise.
pub fn solve(
    params: &NetworkParams,
    problem: Problem,
    spec: Option<&DelaySpec>,
    cfg: &SearchConfig,
) -> Result<OptResult> {
    let need_spec = || {
        spec.ok_or_else(|| Error::InvalidConfig(format!("{problem:?} needs a delay bound psi")))
    };
    match problem {
        Problem::P1 => solve_p1(params, need_spec()?, cfg),
        Problem::P3 => solve_p3(params, need_spec()?, cfg),
        Problem::BlThroughput => solve_baseline(params, Objective::Throughput, cfg),
        Problem::BlDelay => solve_baseline(params, Objective::Delay, cfg),
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    mu_p: f64,
    b: f64,
    binding: Binding,
    objective: f64,
}

fn evaluate(
    params: &NetworkParams,
    problem: Problem,
    spec: Option<&DelaySpec>,
    cfg: &SearchConfig,
    mu_p: f64,
) -> Option<Candidate> {
    let lp = params.lambda_p();
    if lp > 0.0 && mu_p <= lp + cfg.eps_stab {
        return None;
    }
    let (b, binding) = match spec {
        Some(spec) => {
            let b = b_star(params, mu_p, spec).ok()?;
            let binding = if b < 1.0 { Binding::DelayBound } else { Binding::None };
            (b, binding)
        }
        None => stability_limited(params, mu_p, cfg.eps_stab).ok()?,
    };
    let rates = rates_at(params, mu_p, b).ok()?;
    let objective = match problem.objective() {
        Objective::Throughput => rates.mu_s,
        Objective::Delay => {
            if params.lambda_s() + cfg.eps_stab >= rates.mu_s {
                return None;
            }
            su_delay_at(params, mu_p, b).ok()?
        }
    };
    Some(Candidate {
        mu_p,
        b,
        binding,
        objective,
    })
}

fn line_search(
    params: &NetworkParams,
    problem: Problem,
    spec: Option<DelaySpec>,
    cfg: &SearchConfig,
) -> Result<OptResult> {
    cfg.validate(params)?;
    let candidates: Vec<Candidate> = mu_p_grid(params, cfg.delta)
        .into_iter()
        .filter_map(|mu_p| evaluate(params, problem, spec.as_ref(), cfg, mu_p))
        .collect();

    let psi = spec.map(|s| s.psi());
    let Some(best) = select(&candidates, problem.objective(), cfg.tie_break) else {
        return Ok(OptResult {
            problem,
            psi,
            status: Status::Infeasible,
            optimum: None,
        });
    };

    let policy = Policy::from_service_rate(params, best.mu_p, best.b)?;
    let rates = rates_at(params, best.mu_p, best.b)?;
    let d_p = pu_delay_at(params, best.mu_p, best.b).ok().map(|pu| pu.d_p);
    debug_assert!(
        psi.zip(d_p).is_none_or(|(psi, d)| d <= psi * (1.0 + 1e-9)),
        "optimum violates the delay bound"
    );
    Ok(OptResult {
        problem,
        psi,
        status: Status::Feasible,
        optimum: Some(Optimum {
            policy,
            mu_p_star: best.mu_p,
            objective: best.objective,
            rates,
            binding: best.binding,
            d_p,
            d_s: su_delay_at(params, best.mu_p, best.b).ok(),
            metrics: queue_metrics_at(params, best.mu_p, best.b).ok(),
        }),
    })
}

// Candidates arrive in increasing mu_p order, so the first point within the
// tie tolerance of the best objective has the smallest mu_p.
fn select(candidates: &[Candidate], objective: Objective, _rule: TieBreak) -> Option<Candidate> {
    match objective {
        Objective::Throughput => {
            let best = candidates.iter().map(|c| c.objective).fold(f64::NEG_INFINITY, f64::max);
            candidates.iter().find(|c| c.objective >= best - TIE_TOLERANCE).copied()
        }
        Objective::Delay => {
            let best = candidates.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
            candidates.iter().find(|c| c.objective <= best + TIE_TOLERANCE).copied()
        }
    }
}
