use adlkit::ann::ModelKind;
use adlkit::harness::{
    evaluate, load_windows, parse_report, run_experiment_on, stage_split, emit_report, CellOutcome, ExperimentConfig,
    Normalization, ReportFormat, SynthPreset,
};
use adlkit::labels::Stage;
use proptest::prelude::*;

fn tiny_standing(count: usize) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.synth.count = count;
    config.train.iters_scale = 2e-5;
    config
}

#[test]
fn full_standing_grid_has_ninety_cells() {
    let config = tiny_standing(30);
    let windows = load_windows(&config).unwrap();
    let report = run_experiment_on(&config, &windows).unwrap().report;
    assert_eq!(report.cells.len(), 3 * 5 * 3 * 2);
    assert_eq!(report.stages.len(), 1);
    for (i, cell) in report.cells.iter().enumerate() {
        assert_eq!(cell.index, i);
        assert_eq!(cell.max_iterations, 20);
        if let CellOutcome::Completed { accuracy, confusion, .. } = &cell.outcome {
            let total: u64 = confusion.iter().flatten().sum();
            let trace: u64 = (0..3).map(|k| confusion[k][k]).sum();
            assert_eq!(total, 9);
            assert!((accuracy - 100.0 * trace as f64 / total as f64).abs() < 1e-12);
            // Each class keeps 3 of its 10 windows for testing.
            assert!(confusion.iter().all(|row| row.iter().sum::<u64>() == 3));
        }
    }
    let text = emit_report(&report, ReportFormat::Text);
    assert_eq!(parse_report(&emit_report(&report, ReportFormat::Json)).unwrap(), report);
    assert!(text.contains("Average accuracy"));
}

#[test]
fn test_windows_do_not_influence_training() {
    let mut config = ExperimentConfig::default();
    config.synth.preset = SynthPreset::Full;
    config.synth.count = 35;
    config.experiment.stages = vec![Stage::Adl];
    config.experiment.combinations = vec![3];
    config.experiment.variants = vec![5];
    config.experiment.kinds = vec![ModelKind::Mlp];
    config.experiment.normalization = Normalization::On;
    config.train.iters_scale = 1e-4;
    let windows = load_windows(&config).unwrap();
    let baseline = run_experiment_on(&config, &windows).unwrap().pipeline.unwrap();

    let (_, test) = stage_split(&windows, Stage::Adl, config.experiment.split_ratio, config.seed).unwrap();
    let mut replaced = windows.clone();
    for &i in &test {
        for s in replaced[i].accel.as_mut().unwrap() {
            s.x *= 50.0;
            s.z += 3.0;
        }
    }
    let again = run_experiment_on(&config, &replaced).unwrap().pipeline.unwrap();
    assert_eq!(again.adl, baseline.adl);
}

#[test]
fn accuracy_brute_force_recount() {
    let pairs: Vec<(usize, usize)> = (0..97).map(|i| (i % 5, (i * 7 + i / 3) % 5)).collect();
    let e = evaluate(&pairs, 5).unwrap();
    let matches = pairs.iter().filter(|(t, p)| t == p).count();
    assert_eq!(e.accuracy, matches as f64 / 97.0);
    for t in 0..5 {
        assert_eq!(e.confusion[t].iter().sum::<u64>() as usize, pairs.iter().filter(|p| p.0 == t).count());
    }
}

proptest! {
    #[test]
    fn accuracy_ignores_test_order(mut pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60), seed in any::<u64>()) {
        let before = evaluate(&pairs, 4).unwrap();
        let n = pairs.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            pairs.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(evaluate(&pairs, 4).unwrap(), before);
    }
}

#[test]
fn readme_config_example_parses() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let cfg = ExperimentConfig::from_toml(block).unwrap();
    assert_eq!(cfg.pipeline.adl.kind, ModelKind::Dnn);
    assert_eq!(cfg.train.max_iterations(), 10_000);
    assert_eq!(cfg.experiment.stages, vec![Stage::Adl, Stage::Env, Stage::Standing]);
}
