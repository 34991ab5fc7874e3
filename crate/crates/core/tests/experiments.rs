use coopcr_core::experiments::{
    delay_tradeoff_su, feasibility_cutoff, format_g, read_csv, reference_params, run_sweep,
    to_csv_string, Cutoff, DelayValue, Figure, Series, SimSettings, SweepRange, SweepRow,
    SweepSpec, SweptVariable, CSV_HEADER,
};
use coopcr_core::{Objective, SearchConfig, Status};
use proptest::prelude::*;
use std::sync::OnceLock;

fn figure(fig: Figure) -> &'static [SweepRow] {
    static ROWS: OnceLock<Vec<Vec<SweepRow>>> = OnceLock::new();
    let all = ROWS.get_or_init(|| Figure::ALL.iter().map(|f| f.rows(None).unwrap()).collect());
    let i = Figure::ALL.iter().position(|f| *f == fig).unwrap();
    &all[i]
}

fn close(a: Option<f64>, b: f64, tol: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() <= tol)
}

fn series(rows: &[SweepRow], s: Series) -> impl Iterator<Item = &SweepRow> {
    rows.iter().filter(move |r| r.series == s)
}

#[test]
fn throughput_region_crosses_su_load_at_delay_cutoffs() {
    // P3 at lambda_s = 0.2 is feasible exactly where the region boundary exceeds 0.2.
    let region = figure(Figure::Fig2);
    let tradeoff = figure(Figure::Fig5);
    for psi in [20.0, 10.0] {
        let crossing = series(region, Series::Psi(psi))
            .take_while(|r| r.objective.is_some_and(|mu_s| mu_s > 0.2))
            .last()
            .map(|r| r.swept);
        let cut = feasibility_cutoff(tradeoff, Series::Psi(psi));
        assert!(
            crossing.is_some_and(|c| (c - cut.last_feasible.unwrap()).abs() <= 0.01 + 1e-9),
            "psi={psi}: crossing {crossing:?}, cutoff {cut:?}"
        );
        // Once infeasible, a series stays infeasible for heavier PU load.
        let flags: Vec<bool> = series(region, Series::Psi(psi)).map(|r| r.is_feasible()).collect();
        assert!(flags.windows(2).all(|w| w[0] || !w[1]));
    }
}

#[test]
fn throughput_region_ordering() {
    let rows = figure(Figure::Fig2);
    let grid: Vec<f64> = series(rows, Series::Baseline).map(|r| r.swept).collect();
    assert_eq!(grid.len(), 61);
    for x in grid {
        let at = |s| rows.iter().find(|r| r.series == s && r.swept == x).unwrap().objective;
        let (bl, p20, p10) = (at(Series::Baseline), at(Series::Psi(20.0)), at(Series::Psi(10.0)));
        if let (Some(bl), Some(p20)) = (bl, p20) {
            assert!(bl >= p20 - 1e-12, "lambda_p={x}");
        }
        if let Some(p10) = p10 {
            assert!(p20.expect("psi=20 feasible where psi=10 is") >= p10 - 1e-12);
        }
    }
}

#[test]
fn su_delay_rows_sit_on_the_delay_bound() {
    let rows = figure(Figure::Fig4);
    for psi in [20.0, 10.0] {
        let feasible: Vec<_> = series(rows, Series::Psi(psi)).filter(|r| r.is_feasible()).collect();
        assert!(feasible.len() > 30);
        for r in feasible {
            let d_p = r.d_p_analytic.unwrap().finite().unwrap();
            assert!((d_p - psi).abs() <= 1e-3 * psi, "lambda_s={} D_p={d_p}", r.swept);
        }
    }
    for r in series(rows, Series::Baseline).filter(|r| r.is_feasible()) {
        assert_eq!(r.d_p_analytic, Some(DelayValue::Unbounded));
    }
}

#[test]
fn su_delay_ordering_is_reversed() {
    let rows = figure(Figure::Fig3);
    for r10 in series(rows, Series::Psi(10.0)).filter(|r| r.is_feasible()) {
        let at = |s| rows.iter().find(|r| r.series == s && r.swept == r10.swept).unwrap();
        let d10 = r10.d_s_analytic.unwrap();
        let d20 = at(Series::Psi(20.0)).d_s_analytic.unwrap();
        assert!(d10 >= d20 - 1e-9, "lambda_s={}", r10.swept);
        if let Some(bl) = at(Series::Baseline).d_s_analytic {
            assert!(d20 >= bl - 1e-9, "lambda_s={}", r10.swept);
        }
    }
}

#[test]
fn su_delay_feasible_range() {
    let rows = figure(Figure::Fig3);
    let c10 = feasibility_cutoff(rows, Series::Psi(10.0));
    let c20 = feasibility_cutoff(rows, Series::Psi(20.0));
    assert!(close(c10.last_feasible, 0.35, 1e-9), "{c10:?}");
    assert!(close(c20.last_feasible, 0.39, 1e-9), "{c20:?}");
}

#[test]
fn su_and_pu_delay_figures_share_optima() {
    assert_eq!(figure(Figure::Fig3), figure(Figure::Fig4));
}

#[test]
fn pu_delay_tradeoff_matches_throughput_cutoffs() {
    let rows = figure(Figure::Fig5);
    let c20 = feasibility_cutoff(rows, Series::Psi(20.0));
    let c10 = feasibility_cutoff(rows, Series::Psi(10.0));
    assert_eq!(
        (c20, c10),
        (
            Cutoff { last_feasible: Some(0.29), first_infeasible: Some(0.30) },
            Cutoff { last_feasible: Some(0.27), first_infeasible: Some(0.28) },
        )
    );
}

#[test]
fn su_delay_approaches_light_traffic_limit() {
    let search = SearchConfig::default();
    let base = reference_params(0.2, 0.2).unwrap();
    let rows = delay_tradeoff_su(&base, &[20.0], SweepRange::new(1e-6, 1e-6, 1e-6), &search, None).unwrap();
    let r = &rows[0];
    let (mu_p, b, lp, h_sd) = (r.mu_p.unwrap(), r.b.unwrap(), 0.2, 0.8);
    let mu_s = b * h_sd * (1.0 - lp / mu_p);
    let limit = (b * h_sd * lp * (1.0 - mu_p) + (mu_p - lp) * mu_p) / ((mu_p - lp) * mu_s * mu_p);
    let d_s = r.d_s_analytic.unwrap();
    assert!((d_s - limit).abs() < 1e-4 * limit, "{d_s} vs {limit}");
    // PU traffic adds waiting on top of the pure service time 1/mu_s.
    assert!(d_s > 1.0 / mu_s);
}

#[test]
fn csv_header_and_line_endings() {
    let text = to_csv_string(&figure(Figure::Fig2)[..6]).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first, CSV_HEADER.join(","));
    assert_eq!(
        first,
        "swept,psi,status,a,b,mu_p,objective,d_p_analytic,d_s_analytic,mu_s_analytic,d_p_sim,d_s_sim,thr_sim,seed"
    );
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn baseline_rows_use_inf_and_unbounded() {
    let text = to_csv_string(figure(Figure::Fig4)).unwrap();
    let bl: Vec<&str> = text.lines().filter(|l| l.split(',').nth(1) == Some("inf")).collect();
    assert!(!bl.is_empty());
    for line in bl.iter().filter(|l| l.contains(",feasible,")) {
        assert_eq!(line.split(',').nth(7), Some("unbounded"));
    }
}

#[test]
fn infeasible_rows_have_empty_cells() {
    let text = to_csv_string(figure(Figure::Fig2)).unwrap();
    let line = text.lines().find(|l| l.contains(",infeasible,")).unwrap();
    let cells: Vec<&str> = line.split(',').collect();
    assert_eq!(cells.len(), 14);
    assert!(cells[3..].iter().all(|c| c.is_empty()));
}

#[test]
fn csv_round_trip_of_figures() {
    for fig in Figure::ALL {
        let rows = figure(fig);
        let text = to_csv_string(rows).unwrap();
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), rows.len());
        assert_eq!(to_csv_string(&back).unwrap(), text);
    }
}

#[test]
fn rejects_foreign_header() {
    assert!(read_csv("x,y\n1,2\n".as_bytes()).is_err());
}

#[test]
fn simulated_sweep_is_reproducible_and_close() {
    let spec = SweepSpec {
        swept: SweptVariable::LambdaS,
        range: SweepRange::new(0.1, 0.2, 0.1),
        base: reference_params(0.2, 0.2).unwrap(),
        psi: vec![20.0],
        baseline: true,
        objective: Objective::Delay,
        search: SearchConfig::default(),
        simulation: Some(SimSettings { horizon: 400_000, warmup: None, seed: 9 }),
    };
    let rows = run_sweep(&spec).unwrap();
    assert_eq!(rows, run_sweep(&spec).unwrap());
    let seeds: Vec<_> = rows.iter().map(|r| r.seed.unwrap()).collect();
    assert_eq!(seeds, vec![9, 10, 11, 12]);
    for r in rows.iter().filter(|r| r.series == Series::Psi(20.0)) {
        let d_s = r.d_s_analytic.unwrap();
        assert!((r.d_s_sim.unwrap() - d_s).abs() < 0.1 * d_s);
        let d_p = r.d_p_analytic.unwrap().finite().unwrap();
        assert!((r.d_p_sim.unwrap() - d_p).abs() < 0.1 * d_p);
        assert!((r.thr_sim.unwrap() - r.swept).abs() < 0.05 * r.swept);
    }
    for r in rows.iter().filter(|r| r.series == Series::Baseline) {
        assert!(r.d_p_sim.is_none());
    }
}

#[test]
fn sweep_spec_rejects_empty_series() {
    let spec = SweepSpec {
        swept: SweptVariable::LambdaP,
        range: SweepRange::new(0.1, 0.2, 0.1),
        base: reference_params(0.2, 0.2).unwrap(),
        psi: vec![],
        baseline: false,
        objective: Objective::Throughput,
        search: SearchConfig::default(),
        simulation: None,
    };
    assert!(run_sweep(&spec).is_err());
}

fn opt_num() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (-1e7..1e7f64).prop_map(Some), (1e-9..1e-3f64).prop_map(Some)]
}

fn row_strategy() -> impl Strategy<Value = SweepRow> {
    (
        (0.0..1.0f64, prop_oneof![Just(Series::Baseline), (1.0..100.0f64).prop_map(Series::Psi)]),
        any::<bool>(),
        (opt_num(), opt_num(), opt_num(), opt_num()),
        prop_oneof![
            Just(None),
            Just(Some(DelayValue::Unbounded)),
            (0.0..1e4f64).prop_map(|v| Some(DelayValue::Finite(v))),
        ],
        (opt_num(), opt_num(), opt_num(), opt_num(), opt_num()),
        proptest::option::of(any::<u64>()),
    )
        .prop_map(|((swept, series), ok, (a, b, mu_p, obj), d_p, (d_s, mu_s, dps, dss, thr), seed)| {
            SweepRow {
                swept,
                series,
                status: if ok { Status::Feasible } else { Status::Infeasible },
                a,
                b,
                mu_p,
                objective: obj,
                d_p_analytic: d_p,
                d_s_analytic: d_s,
                mu_s_analytic: mu_s,
                d_p_sim: dps,
                d_s_sim: dss,
                thr_sim: thr,
                seed,
            }
        })
}

fn six_digits(x: f64) -> f64 {
    format_g(x).parse().unwrap()
}

proptest! {
    #[test]
    fn csv_round_trip_keeps_six_significant_digits(rows in prop::collection::vec(row_strategy(), 0..8)) {
        let back = read_csv(to_csv_string(&rows).unwrap().as_bytes()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (r, q) in rows.iter().zip(&back) {
            let round = |v: Option<f64>| v.map(six_digits);
            prop_assert_eq!(q.swept, six_digits(r.swept));
            prop_assert_eq!(q.status, r.status);
            prop_assert_eq!(q.seed, r.seed);
            prop_assert_eq!(q.a, round(r.a));
            prop_assert_eq!(q.objective, round(r.objective));
            prop_assert_eq!(q.thr_sim, round(r.thr_sim));
            let d_p = r.d_p_analytic.map(|d| match d {
                DelayValue::Finite(v) => DelayValue::Finite(six_digits(v)),
                u => u,
            });
            prop_assert_eq!(q.d_p_analytic, d_p);
            match r.series {
                Series::Baseline => prop_assert_eq!(q.series, Series::Baseline),
                Series::Psi(p) => prop_assert_eq!(q.series, Series::Psi(six_digits(p))),
            }
        }
    }

    #[test]
    fn format_g_round_trips_within_precision(x in -1e12..1e12f64) {
        let y: f64 = format_g(x).parse().unwrap();
        prop_assert!((x - y).abs() <= 5e-6 * x.abs());
    }
}
