//! Parameter sweeps behind the throughput-region and delay-tradeoff curves,
//! with optional simulation of every feasible optimum.
//!
//! Rows are computed in parallel but always returned ordered by swept value,
//! then by series (delay bounds in the order given, baseline last).

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelaySpec, NetworkParams};
use crate::optimizer::{
    solve_baseline, solve_p1, solve_p3, Binding, Objective, OptResult, SearchConfig, Status,
};
use crate::sim::{self, SimConfig, DEFAULT_HORIZON};

/// Channel used throughout the reference experiments: `(h_pd, h_ps, h_sd)`.
pub const REFERENCE_CHANNEL: (f64, f64, f64) = (0.3, 0.4, 0.8);

/// Delay bounds of the reference experiments.
pub const REFERENCE_PSI: [f64; 2] = [20.0, 10.0];

pub const CSV_HEADER: [&str; 14] = [
    "swept",
    "psi",
    "status",
    "a",
    "b",
    "mu_p",
    "objective",
    "d_p_analytic",
    "d_s_analytic",
    "mu_s_analytic",
    "d_p_sim",
    "d_s_sim",
    "thr_sim",
    "seed",
];

/// CSV cell for a PU delay that grows without bound at the optimum.
pub const UNBOUNDED: &str = "unbounded";

pub fn reference_params(lambda_p: f64, lambda_s: f64) -> Result<NetworkParams> {
    let (h_pd, h_ps, h_sd) = REFERENCE_CHANNEL;
    NetworkParams::new(lambda_p, lambda_s, h_pd, h_ps, h_sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptVariable {
    LambdaP,
    LambdaS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !(in_unit(self.start) && in_unit(self.stop) && self.start <= self.stop) {
            return Err(Error::InvalidConfig(format!(
                "sweep range [{}, {}] must lie within [0, 1]",
                self.start, self.stop
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidConfig(format!("sweep step must be > 0, got {}", self.step)));
        }
        Ok(())
    }

    /// Grid values, rounded to 1e-12 so `0.1 + 2 * 0.01` prints as `0.12`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| ((self.start + k as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    /// Defaults to 10% of the horizon.
    #[serde(default)]
    pub warmup: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            warmup: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub swept: SweptVariable,
    pub range: SweepRange,
    /// Fixed parameters; the swept field is overwritten per row.
    pub base: NetworkParams,
    /// Delay bounds, one series each.
    #[serde(default)]
    pub psi: Vec<f64>,
    /// Add the stability-only baseline series.
    #[serde(default)]
    pub baseline: bool,
    /// `throughput` solves P1, `delay` solves P3.
    pub objective: Objective,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub simulation: Option<SimSettings>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.range.validate()?;
        for &psi in &self.psi {
            DelaySpec::new(psi)?;
        }
        if self.psi.is_empty() && !self.baseline {
            return Err(Error::InvalidConfig("sweep has no series".into()));
        }
        self.search.validate(&self.base)?;
        if let Some(sim) = &self.simulation {
            let warmup = sim.warmup.unwrap_or(sim.horizon / 10);
            if sim.horizon == 0 || warmup >= sim.horizon {
                return Err(Error::InvalidConfig("simulation needs horizon > warmup".into()));
            }
        }
        Ok(())
    }

    pub fn series(&self) -> Vec<Series> {
        let mut out: Vec<Series> = self.psi.iter().map(|&p| Series::Psi(p)).collect();
        if self.baseline {
            out.push(Series::Baseline);
        }
        out
    }
}

/// One curve of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Psi(f64),
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayValue {
    Finite(f64),
    Unbounded,
}

impl DelayValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            DelayValue::Finite(v) => Some(*v),
            DelayValue::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept: f64,
    pub series: Series,
    pub status: Status,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub mu_p: Option<f64>,
    pub objective: Option<f64>,
    pub d_p_analytic: Option<DelayValue>,
    pub d_s_analytic: Option<f64>,
    pub mu_s_analytic: Option<f64>,
    pub d_p_sim: Option<f64>,
    pub d_s_sim: Option<f64>,
    pub thr_sim: Option<f64>,
    pub seed: Option<u64>,
}

impl SweepRow {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    fn infeasible(swept: f64, series: Series) -> Self {
        Self {
            swept,
            series,
            status: Status::Infeasible,
            a: None,
            b: None,
            mu_p: None,
            objective: None,
            d_p_analytic: None,
            d_s_analytic: None,
            mu_s_analytic: None,
            d_p_sim: None,
            d_s_sim: None,
            thr_sim: None,
            seed: None,
        }
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let series = spec.series();
    let tasks: Vec<(f64, Series)> = spec
        .range
        .values()
        .into_iter()
        .flat_map(|v| series.iter().map(move |&s| (v, s)))
        .collect();

    tasks
        .par_iter()
        .enumerate()
        .map(|(index, &(value, series))| {
            let params = match spec.swept {
                SweptVariable::LambdaP => spec.base.with_lambda_p(value)?,
                SweptVariable::LambdaS => spec.base.with_lambda_s(value)?,
            };
            let sim = spec.simulation.map(|s| SimSettings {
                seed: s.seed.wrapping_add(index as u64),
                ..s
            });
            sweep_row(&params, value, series, spec.objective, &spec.search, sim.as_ref())
        })
        .collect()
}

fn sweep_row(
    params: &NetworkParams,
    swept: f64,
    series: Series,
    objective: Objective,
    search: &SearchConfig,
    sim: Option<&SimSettings>,
) -> Result<SweepRow> {
    let result: OptResult = match (series, objective) {
        (Series::Psi(psi), Objective::Throughput) => solve_p1(params, &DelaySpec::new(psi)?, search)?,
        (Series::Psi(psi), Objective::Delay) => solve_p3(params, &DelaySpec::new(psi)?, search)?,
        (Series::Baseline, obj) => solve_baseline(params, obj, search)?,
    };
    let Some(opt) = result.optimum else {
        return Ok(SweepRow::infeasible(swept, series));
    };

    // The baseline optimum sits on the relay stability boundary (up to the
    // search margin), where the PU delay diverges.
    let d_p = match (series, opt.binding, opt.d_p) {
        (Series::Baseline, Binding::RelayStability, _) | (_, _, None) => DelayValue::Unbounded,
        (_, _, Some(d)) => DelayValue::Finite(d),
    };

    let mut row = SweepRow {
        swept,
        series,
        status: Status::Feasible,
        a: Some(opt.policy.a()),
        b: Some(opt.policy.b()),
        mu_p: Some(opt.mu_p_star),
        objective: Some(opt.objective),
        d_p_analytic: Some(d_p),
        d_s_analytic: opt.d_s,
        mu_s_analytic: Some(opt.rates.mu_s),
        d_p_sim: None,
        d_s_sim: None,
        thr_sim: None,
        seed: None,
    };

    if let Some(settings) = sim {
        let cfg = SimConfig {
            params: *params,
            policy: opt.policy,
            horizon: settings.horizon,
            warmup: settings.warmup.unwrap_or(settings.horizon / 10),
            seed: settings.seed,
        };
        let report = sim::run(&cfg)?;
        row.seed = Some(settings.seed);
        row.thr_sim = Some(report.su_throughput);
        if d_p.finite().is_some() {
            row.d_p_sim = report.pu_delay_mean;
        }
        if opt.d_s.is_some() {
            row.d_s_sim = report.su_delay_mean;
        }
    }
    Ok(row)
}

/// SU throughput region boundary: max `mu_s` vs `lambda_p` per delay bound, plus the baseline.
pub fn throughput_region(
    base: &NetworkParams,
    psi_list: &[f64],
    grid: SweepRange,
    search: &SearchConfig,
) -> Result<Vec<SweepRow>> {
    run_sweep(&SweepSpec {
        swept: SweptVariable::LambdaP,
        range: grid,
        base: *base,
        psi: psi_list.to_vec(),
        baseline: true,
        objective: Objective::Throughput,
        search: *search,
        simulation: None,
    })
}

/// SU delay vs `lambda_s` at the delay-minimizing policy.
pub fn delay_tradeoff_su(
    base: &NetworkParams,
    psi_list: &[f64],
    lambda_s_grid: SweepRange,
    search: &SearchConfig,
    sim: Option<SimSettings>,
) -> Result<Vec<SweepRow>> {
    run_sweep(&SweepSpec {
        swept: SweptVariable::LambdaS,
        range: lambda_s_grid,
        base: *base,
        psi: psi_list.to_vec(),
        baseline: true,
        objective: Objective::Delay,
        search: *search,
        simulation: sim,
    })
}

/// PU delay vs `lambda_s` at the delay-minimizing policy. Same optima as
/// [`delay_tradeoff_su`]; the interesting column is `d_p_analytic`.
pub fn pu_delay_check(
    base: &NetworkParams,
    psi_list: &[f64],
    lambda_s_grid: SweepRange,
    search: &SearchConfig,
    sim: Option<SimSettings>,
) -> Result<Vec<SweepRow>> {
    delay_tradeoff_su(base, psi_list, lambda_s_grid, search, sim)
}

/// PU delay vs `lambda_p` at the delay-minimizing policy.
pub fn delay_tradeoff_pu(
    base: &NetworkParams,
    psi_list: &[f64],
    lambda_p_grid: SweepRange,
    search: &SearchConfig,
    sim: Option<SimSettings>,
) -> Result<Vec<SweepRow>> {
    run_sweep(&SweepSpec {
        swept: SweptVariable::LambdaP,
        range: lambda_p_grid,
        base: *base,
        psi: psi_list.to_vec(),
        baseline: true,
        objective: Objective::Delay,
        search: *search,
        simulation: sim,
    })
}

/// Where a series first becomes infeasible along the swept variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub last_feasible: Option<f64>,
    pub first_infeasible: Option<f64>,
}

pub fn feasibility_cutoff(rows: &[SweepRow], series: Series) -> Cutoff {
    let mut cut = Cutoff {
        last_feasible: None,
        first_infeasible: None,
    };
    for row in rows.iter().filter(|r| r.series == series) {
        if row.is_feasible() {
            cut.last_feasible = Some(row.swept);
        } else {
            cut.first_infeasible = Some(row.swept);
            break;
        }
    }
    cut
}

/// The four reference experiments with their parameters baked in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn file_name(&self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2_throughput_region.csv",
            Figure::Fig3 => "fig3_su_delay.csv",
            Figure::Fig4 => "fig4_pu_delay.csv",
            Figure::Fig5 => "fig5_pu_delay_tradeoff.csv",
        }
    }

    /// Rows for this figure. `sim` is ignored for the throughput region.
    pub fn rows(&self, sim: Option<SimSettings>) -> Result<Vec<SweepRow>> {
        let search = SearchConfig::default();
        match self {
            Figure::Fig2 => throughput_region(
                &reference_params(0.0, 0.2)?,
                &REFERENCE_PSI,
                SweepRange::new(0.0, 0.6, 0.01),
                &search,
            ),
            Figure::Fig3 => delay_tradeoff_su(
                &reference_params(0.2, 0.2)?,
                &REFERENCE_PSI,
                SweepRange::new(0.01, 0.5, 0.01),
                &search,
                sim,
            ),
            Figure::Fig4 => pu_delay_check(
                &reference_params(0.2, 0.2)?,
                &REFERENCE_PSI,
                SweepRange::new(0.01, 0.5, 0.01),
                &search,
                sim,
            ),
            Figure::Fig5 => delay_tradeoff_pu(
                &reference_params(0.2, 0.2)?,
                &REFERENCE_PSI,
                SweepRange::new(0.01, 0.4, 0.01),
                &search,
                sim,
            ),
        }
    }
}

/// C-style `%.6g`.
pub fn format_g(x: f64) -> String {
    const PRECISION: i32 = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        let fixed = format!("{:.*}", (PRECISION - 1 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn series_cell(series: Series) -> String {
    match series {
        Series::Psi(p) => format_g(p),
        Series::Baseline => format_g(f64::INFINITY),
    }
}

fn status_cell(status: Status) -> &'static str {
    match status {
        Status::Feasible => "feasible",
        Status::Infeasible => "infeasible",
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_g).unwrap_or_default()
}

/// Write rows in the sweep CSV format (`\n` line endings, `%.6g` numbers,
/// empty cells for missing values, `psi = inf` marks the baseline).
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let d_p = match r.d_p_analytic {
            Some(DelayValue::Finite(v)) => format_g(v),
            Some(DelayValue::Unbounded) => UNBOUNDED.to_string(),
            None => String::new(),
        };
        w.write_record([
            format_g(r.swept),
            series_cell(r.series),
            status_cell(r.status).to_string(),
            opt_cell(r.a),
            opt_cell(r.b),
            opt_cell(r.mu_p),
            opt_cell(r.objective),
            d_p,
            opt_cell(r.d_s_analytic),
            opt_cell(r.mu_s_analytic),
            opt_cell(r.d_p_sim),
            opt_cell(r.d_s_sim),
            opt_cell(r.thr_sim),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

/// Parse a sweep CSV back into rows. Values carry `%.6g` precision.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected CSV header: {header:?}")));
    }
    let bad = |col: &str, cell: &str| Error::InvalidConfig(format!("bad {col} cell: {cell:?}"));
    let num = |col: &str, cell: &str| -> Result<Option<f64>> {
        if cell.is_empty() {
            Ok(None)
        } else {
            cell.parse().map(Some).map_err(|_| bad(col, cell))
        }
    };

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let swept = num("swept", cell(0))?.ok_or_else(|| bad("swept", cell(0)))?;
        let psi = num("psi", cell(1))?.ok_or_else(|| bad("psi", cell(1)))?;
        let series = if psi.is_infinite() { Series::Baseline } else { Series::Psi(psi) };
        let status = match cell(2) {
            "feasible" => Status::Feasible,
            "infeasible" => Status::Infeasible,
            other => return Err(bad("status", other)),
        };
        let d_p_analytic = match cell(7) {
            "" => None,
            UNBOUNDED => Some(DelayValue::Unbounded),
            other => Some(DelayValue::Finite(other.parse().map_err(|_| bad("d_p_analytic", other))?)),
        };
        let seed = match cell(13) {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("seed", s))?),
        };
        rows.push(SweepRow {
            swept,
            series,
            status,
            a: num("a", cell(3))?,
            b: num("b", cell(4))?,
            mu_p: num("mu_p", cell(5))?,
            objective: num("objective", cell(6))?,
            d_p_analytic,
            d_s_analytic: num("d_s_analytic", cell(8))?,
            mu_s_analytic: num("mu_s_analytic", cell(9))?,
            d_p_sim: num("d_p_sim", cell(10))?,
            d_s_sim: num("d_s_sim", cell(11))?,
            thr_sim: num("thr_sim", cell(12))?,
            seed,
        });
    }
    Ok(rows)
}
