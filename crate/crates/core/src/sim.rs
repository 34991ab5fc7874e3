//! Slot-level Monte Carlo simulation of the cooperation policy.
//!
//! Within a slot, service acts on the start-of-slot queue contents and the
//! slot's Bernoulli arrivals are appended afterwards, so a packet arriving in
//! slot `t` is first eligible in slot `t + 1`. Delay is departure slot minus
//! arrival slot. Relayed PU packets keep their original arrival stamp, which
//! makes the PU delay end to end.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! drawing exactly seven `f64` uniforms per slot in the order of the fields
//! of [`SlotDraws`].

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, QueueId, Result};
use crate::model::{NetworkParams, Policy};

pub const DEFAULT_HORIZON: u64 = 100_000;

/// Number of batches used for the batch-means standard error of delay means.
const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: NetworkParams,
    pub policy: Policy,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
}

impl SimConfig {
    /// Config with the default warmup of 10% of the horizon.
    pub fn new(params: NetworkParams, policy: Policy, horizon: u64, seed: u64) -> Self {
        Self {
            params,
            policy,
            horizon,
            warmup: horizon / 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.warmup >= self.horizon {
            return Err(Error::InvalidConfig(format!(
                "need horizon > warmup >= 0, got horizon = {}, warmup = {}",
                self.horizon, self.warmup
            )));
        }
        Ok(())
    }
}

/// Independent uniforms in `[0, 1)` consumed by one slot.
///
/// An event with probability `p` happens when its draw is `< p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDraws {
    pub pu_arrival: f64,
    pub su_arrival: f64,
    /// Destination decodes the PU transmission (`h_pd`).
    pub pd_decode: f64,
    /// SU overhears and decodes the PU transmission (`h_ps`).
    pub ps_decode: f64,
    /// Relay admission (`a`).
    pub admit: f64,
    /// Queue selection, `Q_s` when below `b`.
    pub select: f64,
    /// Destination decodes the SU transmission (`h_sd`).
    pub sd_decode: f64,
}

impl SlotDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            pu_arrival: rng.gen(),
            su_arrival: rng.gen(),
            pd_decode: rng.gen(),
            ps_decode: rng.gen(),
            admit: rng.gen(),
            select: rng.gen(),
            sd_decode: rng.gen(),
        }
    }
}

/// What happened on the channel in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotOutcome {
    pub pu_transmitted: bool,
    /// Arrival stamp of a PU packet delivered directly by the PU.
    pub pu_direct_departure: Option<u64>,
    /// Destination failed but the SU decoded the PU packet.
    pub admission_opportunity: bool,
    pub admitted: bool,
    /// SU had the channel and picked this queue.
    pub su_selected: Option<QueueId>,
    /// Arrival stamp of a packet delivered from `Q_s`.
    pub su_departure: Option<u64>,
    /// Arrival stamp of a relayed PU packet delivered from `Q_sp`.
    pub relay_departure: Option<u64>,
    /// Selected queue was empty while the other one was backlogged.
    pub wasted: bool,
    pub pu_arrived: bool,
    pub su_arrived: bool,
}

/// Queue contents as arrival-slot stamps, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimState {
    pub q_p: VecDeque<u64>,
    pub q_sp: VecDeque<u64>,
    pub q_s: VecDeque<u64>,
    pub slot: u64,
}

impl SimState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance one slot.
    pub fn step(&mut self, params: &NetworkParams, policy: &Policy, draws: &SlotDraws) -> SlotOutcome {
        let mut out = SlotOutcome::default();
        let now = self.slot;

        if let Some(&stamp) = self.q_p.front() {
            out.pu_transmitted = true;
            if draws.pd_decode < params.h_pd() {
                self.q_p.pop_front();
                out.pu_direct_departure = Some(stamp);
            } else if draws.ps_decode < params.h_ps() {
                out.admission_opportunity = true;
                if draws.admit < policy.a() {
                    // Q_sp is not served while Q_p is backlogged, so moving
                    // the packet now is the same as at the end of the slot.
                    self.q_p.pop_front();
                    self.q_sp.push_back(stamp);
                    out.admitted = true;
                }
            }
        } else {
            let (id, chosen, other) = if draws.select < policy.b() {
                (QueueId::Secondary, &mut self.q_s, &self.q_sp)
            } else {
                (QueueId::Relay, &mut self.q_sp, &self.q_s)
            };
            out.su_selected = Some(id);
            if chosen.is_empty() {
                out.wasted = !other.is_empty();
            } else if draws.sd_decode < params.h_sd() {
                let stamp = chosen.pop_front();
                match id {
                    QueueId::Secondary => out.su_departure = stamp,
                    _ => out.relay_departure = stamp,
                }
            }
        }

        if draws.pu_arrival < params.lambda_p() {
            self.q_p.push_back(now);
            out.pu_arrived = true;
        }
        if draws.su_arrival < params.lambda_s() {
            self.q_s.push_back(now);
            out.su_arrived = true;
        }
        self.slot += 1;
        out
    }
}

/// Empirical results of one run. Delay means cover packets that arrived after
/// the warmup and departed before the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub pu_delay_mean: Option<f64>,
    pub pu_delay_stderr: Option<f64>,
    pub pu_delay_samples: u64,
    pub su_delay_mean: Option<f64>,
    pub su_delay_stderr: Option<f64>,
    pub su_delay_samples: u64,
    /// `Q_s` departures per post-warmup slot.
    pub su_throughput: f64,
    /// Mean queue lengths at slot start over post-warmup slots.
    pub mean_len_p: f64,
    pub mean_len_sp: f64,
    pub mean_len_s: f64,
    pub final_len_p: u64,
    pub final_len_sp: u64,
    pub final_len_s: u64,
    pub counters: SimCounters,
}

/// Whole-run event counts, warmup included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounters {
    pub pu_arrivals: u64,
    pub su_arrivals: u64,
    pub pu_departed_direct: u64,
    pub pu_departed_relay: u64,
    pub su_departed: u64,
    pub relay_admissions: u64,
    pub admission_opportunities: u64,
    pub pu_busy_slots: u64,
    pub su_access_slots: u64,
    pub q_s_selections: u64,
    pub wasted_slots: u64,
}

pub fn run(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = SimState::new();
    let mut counters = SimCounters::default();
    let mut pu_delays = Vec::new();
    let mut su_delays = Vec::new();
    let mut len_sums = [0u64; 3];
    let mut su_departed_measured = 0u64;

    for slot in 0..cfg.horizon {
        let measured = slot >= cfg.warmup;
        if measured {
            len_sums[0] += state.q_p.len() as u64;
            len_sums[1] += state.q_sp.len() as u64;
            len_sums[2] += state.q_s.len() as u64;
        }
        let draws = SlotDraws::sample(&mut rng);
        let out = state.step(&cfg.params, &cfg.policy, &draws);

        counters.pu_arrivals += out.pu_arrived as u64;
        counters.su_arrivals += out.su_arrived as u64;
        counters.pu_busy_slots += out.pu_transmitted as u64;
        counters.admission_opportunities += out.admission_opportunity as u64;
        counters.relay_admissions += out.admitted as u64;
        counters.wasted_slots += out.wasted as u64;
        if let Some(q) = out.su_selected {
            counters.su_access_slots += 1;
            counters.q_s_selections += (q == QueueId::Secondary) as u64;
        }

        let record = |stamp: u64, sink: &mut Vec<u64>| {
            if stamp >= cfg.warmup {
                sink.push(slot - stamp);
            }
        };
        if let Some(stamp) = out.pu_direct_departure {
            counters.pu_departed_direct += 1;
            record(stamp, &mut pu_delays);
        }
        if let Some(stamp) = out.relay_departure {
            counters.pu_departed_relay += 1;
            record(stamp, &mut pu_delays);
        }
        if let Some(stamp) = out.su_departure {
            counters.su_departed += 1;
            su_departed_measured += measured as u64;
            record(stamp, &mut su_delays);
        }
    }

    let measured_slots = (cfg.horizon - cfg.warmup) as f64;
    let (pu_delay_mean, pu_delay_stderr) = mean_and_stderr(&pu_delays);
    let (su_delay_mean, su_delay_stderr) = mean_and_stderr(&su_delays);
    Ok(SimReport {
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        seed: cfg.seed,
        pu_delay_mean,
        pu_delay_stderr,
        pu_delay_samples: pu_delays.len() as u64,
        su_delay_mean,
        su_delay_stderr,
        su_delay_samples: su_delays.len() as u64,
        su_throughput: su_departed_measured as f64 / measured_slots,
        mean_len_p: len_sums[0] as f64 / measured_slots,
        mean_len_sp: len_sums[1] as f64 / measured_slots,
        mean_len_s: len_sums[2] as f64 / measured_slots,
        final_len_p: state.q_p.len() as u64,
        final_len_sp: state.q_sp.len() as u64,
        final_len_s: state.q_s.len() as u64,
        counters,
    })
}

// Batch means over departures in order; consecutive delays are correlated so
// the plain sample standard error would be too optimistic.
fn mean_and_stderr(samples: &[u64]) -> (Option<f64>, Option<f64>) {
    if samples.is_empty() {
        return (None, None);
    }
    let mean = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
    let size = samples.len() / BATCHES;
    if size == 0 {
        return (Some(mean), None);
    }
    let batch_means: Vec<f64> = samples
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<u64>() as f64 / size as f64)
        .collect();
    let k = batch_means.len() as f64;
    let bm = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (k - 1.0);
    (Some(mean), Some((var / k).sqrt()))
}
