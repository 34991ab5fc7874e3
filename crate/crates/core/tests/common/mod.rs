//! Test-only oracles and instance generators.
//!
//! The delay oracles are transcribed separately from the library so they can
//! check the closed-form inner solution and the constraint function without
//! sharing code with them.

#![allow(dead_code)]

use coopcr_core::NetworkParams;
use rand::Rng;

/// Random parameters with every field uniform in [0.05, 0.95] and h_sd > h_pd.
pub fn random_params<R: Rng>(rng: &mut R) -> NetworkParams {
    loop {
        let mut u = || rng.gen_range(0.05..0.95);
        let (lp, ls, h_pd, h_ps, h_sd) = (u(), u(), u(), u(), u());
        if h_sd > h_pd {
            return NetworkParams::new(lp, ls, h_pd, h_ps, h_sd).unwrap();
        }
    }
}

/// PU delay from queue lengths; `None` when Q_p or Q_sp is unstable.
pub fn oracle_pu_delay(p: &NetworkParams, mu_p: f64, b: f64) -> Option<f64> {
    let lp = p.lambda_p();
    let h_pd = p.h_pd();
    let h_sd = p.h_sd();
    if lp >= mu_p {
        return None;
    }
    let idle = 1.0 - lp / mu_p;
    let lambda_sp = (mu_p - h_pd) * lp / mu_p;
    let mu_sp = (1.0 - b) * h_sd * idle;
    let n_p = lp * (1.0 - lp) / (mu_p - lp);
    if lambda_sp == 0.0 {
        return Some(n_p / lp);
    }
    if lambda_sp >= mu_sp {
        return None;
    }
    let g = mu_p - h_pd;
    let n_sp = lp * g * ((1.0 - b) * h_sd * (1.0 - mu_p) * lp - g * mu_p * lp - h_pd * lp + mu_p * mu_p)
        / (mu_p * (mu_p - lp) * ((1.0 - b) * h_sd * (mu_p - lp) - lp * g));
    Some((n_p + n_sp) / lp)
}

/// SU delay; `None` when Q_s is unstable.
pub fn oracle_su_delay(p: &NetworkParams, mu_p: f64, b: f64) -> Option<f64> {
    let lp = p.lambda_p();
    let ls = p.lambda_s();
    let h_sd = p.h_sd();
    if lp >= mu_p {
        return None;
    }
    let mu_s = b * h_sd * (1.0 - lp / mu_p);
    if ls >= mu_s {
        return None;
    }
    let g = mu_p - lp;
    let n_s = (b * h_sd * lp * ls * (1.0 - mu_p) + ls * (1.0 - ls) * g * mu_p)
        / (g * (b * h_sd * g - ls * mu_p));
    Some(n_s / ls)
}

pub fn mu_s(p: &NetworkParams, mu_p: f64, b: f64) -> f64 {
    b * p.h_sd() * (1.0 - p.lambda_p() / mu_p)
}

/// Largest grid b in {0, step, ..., 1} with D_p <= psi, by enumeration.
pub fn best_b_on_grid(p: &NetworkParams, mu_p: f64, psi: f64, step: f64) -> Option<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n)
        .rev()
        .map(|k| k as f64 * step)
        .find(|&b| oracle_pu_delay(p, mu_p, b).is_some_and(|d| d <= psi))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}
