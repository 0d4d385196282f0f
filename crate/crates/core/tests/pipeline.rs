use lowrisk::calibrate::{build_grid, calibrate, CalibrationMethod, CalibrationOptions};
use lowrisk::conformal::{fdr_screen, ConformalConfig};
use lowrisk::io::{read_curves, read_dataset, write_curves, write_dataset};
use lowrisk::ipcw::event_time_weights;
use lowrisk::models::{fit_censoring, fit_cox};
use lowrisk::simulate::sample_population;
use lowrisk::{ConditionalSurvival, CoxOptions, RiskProfile, SurvivalCurveSet, TimeGrid, WeibullPopulation};
use proptest::prelude::*;

const T0: f64 = 3.0;

fn lambda_hats(seed: u64, n: usize) -> Vec<Option<f64>> {
    let pop = WeibullPopulation::reference();
    let train = sample_population(&pop, 800, seed, "tr").unwrap().data;
    let cal = sample_population(&pop, n, seed + 1, "ca").unwrap().data;
    let s = fit_cox(&train, CoxOptions::default()).unwrap();
    let g = fit_censoring(&train, CoxOptions::default()).unwrap();
    let sc = s.curves_for(&cal).unwrap();
    let scores: Vec<f64> = (0..cal.len()).map(|i| sc.survival(i, T0)).collect();
    let weights = event_time_weights(&cal, &g.curves_for(&cal).unwrap(), 99.0).unwrap();
    let profile = RiskProfile::new(&cal, &scores, &weights, T0).unwrap();
    let grid = build_grid(&scores, 50).unwrap();
    let opts = CalibrationOptions { multiplier_draws: 200, seed, ..CalibrationOptions::new(0.15, 0.1) };
    [CalibrationMethod::Greedy, CalibrationMethod::Bonferroni, CalibrationMethod::Multiplier, CalibrationMethod::Ltt]
        .into_iter()
        .map(|m| calibrate(m, &profile, &weights, &grid, &opts).unwrap().lambda_hat)
        .collect()
}

#[test]
fn tabulated_curves_roundtrip_through_csv_and_screen() {
    let pop = WeibullPopulation::reference();
    let train = sample_population(&pop, 600, 5, "tr").unwrap().data;
    let cal = sample_population(&pop, 300, 6, "ca").unwrap().data;
    let test = sample_population(&pop, 200, 7, "te").unwrap().data;

    let mut buf = Vec::new();
    write_dataset(&cal, &mut buf).unwrap();
    let cal = read_dataset(buf.as_slice()).unwrap();

    let s = fit_cox(&train, CoxOptions::default()).unwrap();
    let g = fit_censoring(&train, CoxOptions::default()).unwrap();
    let grid = TimeGrid::uniform(60.0, 400).unwrap();
    let ids = |d: &lowrisk::CensoredDataset| d.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
    let tab = |m: &lowrisk::CoxModel, d: &lowrisk::CensoredDataset| {
        let set = SurvivalCurveSet::tabulate(&m.curves_for(d).unwrap(), ids(d), grid.clone()).unwrap();
        let mut out = Vec::new();
        write_curves(&set, &mut out).unwrap();
        read_curves(out.as_slice()).unwrap()
    };
    let (s_cal, g_cal, s_test) = (tab(&s, &cal), tab(&g, &cal), tab(&s, &test));

    let cfg = ConformalConfig { bootstrap_b: 100, extrapolate: true, ..ConformalConfig::new(0.2) };
    let res = fdr_screen(&s_cal, &g_cal, &cal, &s_test, T0, &cfg).unwrap();
    assert_eq!(res.p_values.len(), 200);
    assert!(res.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
    if !res.abstained {
        assert_eq!(res.rejected, res.bh_rejected);
        for &j in &res.rejected {
            assert!(res.p_values[j] <= res.q_hat);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bonferroni_never_selects_more_than_greedy(seed in 0u64..1_000, n in 150usize..500) {
        let l = lambda_hats(seed, n);
        match (l[0], l[1]) {
            (Some(g), Some(b)) => prop_assert!(b >= g),
            (None, b) => prop_assert!(b.is_none()),
            _ => {}
        }
        if let Some(ltt) = l[3] {
            prop_assert!((0.0..=1.0).contains(&ltt));
        }
    }
}
