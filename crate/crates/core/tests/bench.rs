use std::io::Write;

use seagull::bench::{
    emit_table, load_records, run_job, run_plan, ExperimentPlan, Metric, RecordWriter, RunOptions, RunRecord, RunStatus,
    TargetSpec,
};
use seagull::datagen::{TargetKind, TransformKind};
use seagull::ActivationKind;

fn small_plan(name: &str) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(
        name,
        vec![
            TargetSpec {
                target: TargetKind::TriangleArea,
                transform: TransformKind::Identity,
            },
            TargetSpec {
                target: TargetKind::TriangleArea,
                transform: TransformKind::Log1pF,
            },
        ],
        vec![ActivationKind::Relu, ActivationKind::Tanh],
    );
    plan.runs_per_cell = 2;
    plan.train_n = 60;
    plan.test_n = 20;
    plan.train.epochs = 2;
    plan.train.batch_size = 20;
    plan.symmetry_samples = 8;
    plan
}

fn opts(path: &std::path::Path, workers: usize) -> RunOptions {
    RunOptions {
        workers,
        records_path: Some(path.to_path_buf()),
        checkpoint_dir: None,
    }
}

#[test]
fn write_ten_read_ten_then_truncate() {
    let mut plan = small_plan("ten");
    plan.targets.truncate(1);
    plan.activations.truncate(1);
    plan.runs_per_cell = 5;
    let records = run_plan(&plan, &RunOptions::default()).unwrap();
    assert_eq!(records.len(), 10);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let mut w = RecordWriter::append(&path).unwrap();
    for r in &records {
        w.write(r).unwrap();
    }
    drop(w);
    let loaded = load_records(&path).unwrap();
    assert_eq!(loaded.records, records);
    assert!(loaded.warnings.is_empty());

    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.trim_end().len() - 40;
    std::fs::write(&path, &text[..cut]).unwrap();
    let loaded = load_records(&path).unwrap();
    assert_eq!(loaded.records.len(), 9);
    assert_eq!(loaded.warnings.len(), 1);
    assert!(loaded.warnings[0].contains("line 10"), "{:?}", loaded.warnings);
}

#[test]
fn resume_runs_only_missing_pairs_and_matches_a_clean_run() {
    let plan = small_plan("resume");
    let dir = tempfile::tempdir().unwrap();
    let full_path = dir.path().join("full.jsonl");
    let full = run_plan(&plan, &opts(&full_path, 1)).unwrap();
    assert_eq!(full.len(), 16);

    // Simulate an interrupt: keep 5 complete records and half of the sixth.
    let text = std::fs::read_to_string(&full_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let partial_path = dir.path().join("partial.jsonl");
    let mut f = std::fs::File::create(&partial_path).unwrap();
    for l in &lines[..5] {
        writeln!(f, "{l}").unwrap();
    }
    write!(f, "{}", &lines[5][..lines[5].len() / 2]).unwrap();
    drop(f);

    let resumed = run_plan(&plan, &opts(&partial_path, 2)).unwrap();
    assert_eq!(resumed.len(), 16);
    for (a, b) in full.iter().zip(&resumed) {
        assert!(a.same_outcome(b), "{} run {}", a.cell, a.run_index);
    }
    let on_disk = load_records(&partial_path).unwrap();
    assert_eq!(on_disk.records.len(), 16);
    assert_eq!(on_disk.warnings.len(), 1);

    // Nothing left to do: the file does not grow.
    let before = std::fs::metadata(&partial_path).unwrap().len();
    run_plan(&plan, &opts(&partial_path, 1)).unwrap();
    assert_eq!(std::fs::metadata(&partial_path).unwrap().len(), before);
}

#[test]
fn paired_records_differ_only_in_first_activation() {
    let plan = small_plan("pairs");
    let records = run_plan(&plan, &RunOptions::default()).unwrap();
    for pair in records.chunks(2) {
        let (base, sg) = (&pair[0], &pair[1]);
        assert!(!base.cell.seagull && sg.cell.seagull);
        assert_eq!((base.seed, base.seeds), (sg.seed, sg.seeds));
        let mut spec = base.network.clone();
        spec.layers[0].activation = ActivationKind::Seagull;
        assert_eq!(spec, sg.network);
    }
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let plan = small_plan("again");
    let job = plan.jobs()[3];
    let (a, na) = run_job(&plan, &job).unwrap();
    let (b, nb) = run_job(&plan, &job).unwrap();
    assert!(a.same_outcome(&b));
    assert_eq!(na, nb);
}

fn fake(target: TransformKind, act: ActivationKind, seagull: bool, run: usize, best: f64) -> RunRecord {
    let mut plan = small_plan("fake");
    plan.targets.retain(|t| t.transform == target);
    plan.activations = vec![act];
    let job = plan.jobs().into_iter().find(|j| j.seagull == seagull).unwrap();
    let (mut r, _) = run_job(&plan, &job).unwrap();
    r.run_index = run;
    let rep = r.train_report.as_mut().unwrap();
    rep.best_test_mae = Some(best);
    rep.final_test_mae = Some(best + 1.0);
    r
}

#[test]
fn table_aggregation_by_hand() {
    let relu = ActivationKind::Relu;
    let id = TransformKind::Identity;
    let base = [0.11, 0.13, 0.19];
    let sg = [0.031, 0.029, 0.045];
    let mut records = Vec::new();
    for (i, (&b, &s)) in base.iter().zip(&sg).enumerate() {
        records.push(fake(id, relu, false, i, b));
        records.push(fake(id, relu, true, i, s));
    }
    let table = emit_table(&records, Metric::Best);
    let cell = table.cell(records[0].cell.target, relu).unwrap();
    let b = cell.baseline.unwrap();
    let mean = (0.11 + 0.13 + 0.19) / 3.0;
    let var = ((0.11f64 - mean).powi(2) + (0.13f64 - mean).powi(2) + (0.19f64 - mean).powi(2)) / 2.0;
    assert!((b.mean - mean).abs() < 1e-12);
    assert!((b.std - var.sqrt()).abs() < 1e-12);
    assert_eq!(b.runs, 3);
    assert!((cell.seagull.unwrap().mean - (0.031 + 0.029 + 0.045) / 3.0).abs() < 1e-12);
    assert_eq!(cell.seagull_wins(), Some(true));
    assert_eq!(cell.reference, Some((0.105, 0.030)));

    let fin = emit_table(&records, Metric::Final);
    assert!((fin.cells[0].baseline.unwrap().mean - (mean + 1.0)).abs() < 1e-12);

    let md = table.to_markdown(true);
    assert!(md.contains("0.143 (**0.035**) vs paper 0.105 (0.030)"), "{md}");
}

#[test]
fn single_record_cell_and_failed_runs() {
    let tanh = ActivationKind::Tanh;
    let mut failed = fake(TransformKind::Log1pF, tanh, false, 1, 9.0);
    failed.status = RunStatus::Failed {
        reason: "diverged".into(),
    };
    failed.train_report = None;
    let records = vec![
        fake(TransformKind::Log1pF, tanh, false, 0, 0.25),
        failed,
        fake(TransformKind::Log1pF, tanh, true, 0, 0.125),
    ];
    let table = emit_table(&records, Metric::Best);
    let c = &table.cells[0];
    let b = c.baseline.unwrap();
    assert_eq!((b.mean, b.std, b.runs, b.failed), (0.25, 0.0, 1, 1));
    let md = table.to_markdown(false);
    assert!(md.contains("1 diverged run(s) excluded"), "{md}");
}

#[test]
fn incomplete_grid_keeps_explicit_gaps() {
    let relu = ActivationKind::Relu;
    let records = vec![
        fake(TransformKind::Identity, relu, false, 0, 0.2),
        fake(TransformKind::Log1pF, ActivationKind::Tanh, true, 0, 0.1),
    ];
    let table = emit_table(&records, Metric::Best);
    assert_eq!(table.cells.len(), 4);
    let csv = table.to_csv(false);
    assert_eq!(csv.lines().count(), 5);
    assert!(table.cells.iter().filter(|c| c.baseline.is_none() && c.seagull.is_none()).count() == 2);
    assert!(table.to_markdown(false).contains("n/a"));
    assert_eq!(table.seagull_win_count(), (0, 0));
}
