use domconf::harness::{run_experiment, ExperimentConfig, Method};

fn confusion(labeled_per_class: usize, lambda: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        task: "paired".into(),
        method: Method::ConfusionFinetune,
        ..ExperimentConfig::default()
    };
    cfg.split.n_target_labeled_per_class = labeled_per_class;
    cfg.loss.lambda = lambda;
    cfg
}

#[test]
fn labeled_target_examples_do_not_hurt() {
    let sup = run_experiment(&confusion(3, 0.25)).unwrap();
    let unsup = run_experiment(&confusion(0, 0.25)).unwrap();
    assert_eq!(sup.splits.len(), 5);
    assert!(
        sup.mean_accuracy() >= unsup.mean_accuracy(),
        "supervised {} < unsupervised {}",
        sup.mean_accuracy(),
        unsup.mean_accuracy()
    );
}

#[test]
fn regularized_curves_end_with_smaller_mmd() {
    let dir = tempfile::tempdir().unwrap();
    let final_mmd = |lambda: f64, name: &str| {
        let mut cfg = confusion(0, lambda);
        cfg.split.n_splits = 2;
        let out = dir.path().join(name);
        run_experiment(&cfg).unwrap().write(&out).unwrap();
        (0..2)
            .map(|i| {
                let text = std::fs::read_to_string(out.join(format!("curve_split{i}.csv"))).unwrap();
                let mut lines = text.lines();
                assert_eq!(lines.next(), Some("iteration,cls_loss,mmd,test_accuracy"));
                let last = lines.last().unwrap();
                last.split(',').nth(2).unwrap().parse::<f64>().unwrap()
            })
            .collect::<Vec<_>>()
    };
    let plain = final_mmd(0.0, "plain");
    let reg = final_mmd(0.25, "reg");
    for (r, p) in reg.iter().zip(&plain) {
        assert!(r < p, "regularized {r} vs unregularized {p}");
    }
}

#[test]
fn every_method_runs_on_the_default_task() {
    let mut base = ExperimentConfig::default();
    base.split.n_splits = 1;
    base.optimizer.iterations = 100;
    for method in Method::ALL {
        let cfg = ExperimentConfig { method, ..base.clone() };
        let report = run_experiment(&cfg).unwrap();
        let acc = report.mean_accuracy();
        assert!(acc > 0.5, "{method}: {acc}");
    }
}
