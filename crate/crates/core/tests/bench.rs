use pkf_core::bench::{comparison_specs, mse, q_ratio_summary, run_benchmark, squared_errors, AlgorithmSpec};
use pkf_core::models::ModelPrediction;
use pkf_core::pkf::{PkfState, PkfWeights};
use pkf_core::synth::{simulate_gene_panel, BirthDeathScenario, GenePanelScenario};
use pkf_core::{
    run_pkf, GaussianEstimate, GroundTruth, ModelKind, PkfOptions, PkfResult, TimeGrid, TimeSeriesData, Trajectory,
};
use proptest::prelude::*;

fn trajectory(grid: &TimeGrid, means: &[f64]) -> Trajectory {
    Trajectory::new(
        grid.clone(),
        means.iter().map(|&m| GaussianEstimate::point(m)).collect(),
    )
    .unwrap()
}

#[test]
fn mse_is_the_mean_of_squared_errors() {
    let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
    let truth = GroundTruth::new(grid.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let est = trajectory(&grid, &[1.5, 2.0, 1.0, 7.0]);
    assert_eq!(squared_errors(&est, &truth).unwrap(), vec![0.25, 0.0, 4.0, 9.0]);
    assert_eq!(mse(&est, &truth).unwrap(), 13.25 / 4.0);
    let other = GroundTruth::new(TimeGrid::uniform(0.0, 2.0, 4).unwrap(), vec![0.0; 4]).unwrap();
    assert!(mse(&est, &other).is_err());
}

proptest! {
    #[test]
    fn prop_mse_ignores_a_common_shift(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..30),
        shift in -1e3f64..1e3,
    ) {
        let grid = TimeGrid::uniform(0.0, 1.0, pairs.len()).unwrap();
        let (est, tru): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = mse(&trajectory(&grid, &est), &GroundTruth::new(grid.clone(), tru.clone()).unwrap()).unwrap();
        let est_s: Vec<f64> = est.iter().map(|x| x + shift).collect();
        let tru_s: Vec<f64> = tru.iter().map(|x| x + shift).collect();
        let b = mse(&trajectory(&grid, &est_s), &GroundTruth::new(grid, tru_s).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}

#[test]
fn benchmark_is_deterministic_and_order_free() {
    let scenario = BirthDeathScenario::default();
    let specs = comparison_specs();
    let first = run_benchmark(&scenario, &specs).unwrap();
    let again = run_benchmark(&scenario, &specs).unwrap();
    assert_eq!(first, again);
    let reversed: Vec<AlgorithmSpec> = specs.iter().rev().copied().collect();
    let flipped = run_benchmark(&scenario, &reversed).unwrap();
    for spec in &specs {
        assert_eq!(first.row(spec).unwrap().mse, flipped.row(spec).unwrap().mse, "{spec}");
    }
}

#[test]
fn ten_pkf_iterations_win_the_benchmark() {
    let report = run_benchmark(&BirthDeathScenario::default(), &comparison_specs()).unwrap();
    assert_eq!(report.rows.len(), 12);
    let best = AlgorithmSpec::Pkf { iterations: 10 };
    let target = report.row(&best).unwrap().mse.unwrap();
    for row in &report.rows {
        assert!(row.error.is_none(), "{}: {:?}", row.spec, row.error);
        assert!(row.mse.unwrap() >= target, "{} beat PKF(10)", row.spec);
    }
    assert!(target < report.row(&AlgorithmSpec::Pkf { iterations: 1 }).unwrap().mse.unwrap());
}

/// A result whose only meaningful field is Q.
fn result_with_q(data: &TimeSeriesData, q: Vec<f64>) -> PkfResult {
    let z = data.summaries();
    PkfResult {
        final_state: PkfState {
            iteration: 1,
            filter: Trajectory::new(data.grid().clone(), z.clone()).unwrap(),
            process_uncertainty: q,
            weights: vec![PkfWeights::UNIFORM; z.len()],
            model: z.iter().map(|&estimate| ModelPrediction { estimate }).collect(),
        },
        history: None,
        convergence: Vec::new(),
    }
}

#[test]
fn q_ratio_examples() {
    let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
    let data = TimeSeriesData::new("g", grid, vec![vec![1.0, 3.0], vec![2.0, 6.0], vec![0.0, 1.0]]).unwrap();
    let v: Vec<f64> = data.summaries().iter().map(|z| z.variance).collect();
    let equal = result_with_q(&data, v.clone());
    let scaled = result_with_q(&data, v.iter().map(|x| x * std::f64::consts::E).collect());
    let summary = q_ratio_summary(&[("a".into(), &equal, &data), ("b".into(), &scaled, &data)]).unwrap();
    assert!(summary.label_mean("a").unwrap().abs() < 1e-12);
    assert!((summary.label_mean("b").unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(summary.series.len(), 2);
    assert!(q_ratio_summary(&[]).is_err());
}

#[test]
fn deciles_rank_series_by_data_variance() {
    let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
    let sets: Vec<TimeSeriesData> = (0..20)
        .map(|i| {
            let s = 1.0 + i as f64;
            TimeSeriesData::new(format!("s{i}"), grid.clone(), vec![vec![0.0, s]; 3]).unwrap()
        })
        .collect();
    let results: Vec<PkfResult> = sets.iter().map(|d| result_with_q(d, vec![1.0; 3])).collect();
    let input: Vec<(String, &PkfResult, &TimeSeriesData)> = results
        .iter()
        .zip(&sets)
        .map(|(r, d)| ("x".to_string(), r, d))
        .collect();
    let summary = q_ratio_summary(&input).unwrap();
    for (i, s) in summary.series.iter().enumerate() {
        assert_eq!(s.variance_decile, i / 2 + 1);
    }
    assert_eq!(summary.by_label_and_decile.len(), 10);
    assert!(summary.by_label_and_decile.iter().all(|g| g.count == 2));
}

#[test]
fn dynamic_genes_carry_more_process_uncertainty() {
    let scenario = GenePanelScenario {
        n_genes: 60,
        ..Default::default()
    };
    let panel = simulate_gene_panel(&scenario).unwrap();
    let results: Vec<PkfResult> = panel
        .iter()
        .map(|g| run_pkf(&g.data, ModelKind::ConstantRegulation, &PkfOptions::default()).unwrap())
        .collect();
    let input: Vec<(String, &PkfResult, &TimeSeriesData)> = panel
        .iter()
        .zip(&results)
        .map(|(g, r)| (g.label.name().to_string(), r, &g.data))
        .collect();
    let summary = q_ratio_summary(&input).unwrap();
    let dynamic = summary.label_mean("dynamic").unwrap();
    let fixed = summary.label_mean("static").unwrap();
    assert!(dynamic > fixed, "{dynamic} vs {fixed}");
}
