use netdiag::cascade::{model_json, train_stage, StageConfig};
use netdiag::eval::{k_fold_cv, k_fold_cv_with, select_model, stratified_folds, GridSpec};
use netdiag::preprocess::{FaultRegistry, Label};
use netdiag::rng::SplitMix64;
use netdiag::sim::{synthetic_database, ClassArtifactSpec, Noise};
use netdiag::svm::{sign_of, KernelKind, Settings};
use netdiag::SignatureDatabase;
use rand::seq::SliceRandom;

fn link_db(per_class: usize, gap: f64, jitter: f64, seed: u64) -> SignatureDatabase {
    let noise = Noise::Uniform { lo: 0.0, hi: 1.0 };
    let faulty = ClassArtifactSpec {
        m: 20,
        informative: (0..5).map(|j| (j, 0.5 + gap)).collect(),
        jitter,
        noise,
        label: Some(Label::FAULTY),
    };
    let healthy = ClassArtifactSpec {
        informative: (0..5).map(|j| (j, 0.5)).collect(),
        label: Some(Label::HEALTHY_LINK),
        ..faulty.clone()
    };
    synthetic_database(&[(faulty, per_class), (healthy, per_class)], seed, FaultRegistry::default()).unwrap()
}

fn quick() -> StageConfig {
    let mut c = StageConfig::lpd();
    c.wrapper.candidate_sizes = vec![5, 10];
    c.wrapper.folds = 3;
    c
}

#[test]
fn deleting_a_test_row_leaves_that_fold_model_alone() {
    let db = link_db(12, 0.3, 0.05, 1);
    let labels: Vec<Label> = db.labels().collect();
    let folds = stratified_folds(&labels, 4, 9).unwrap();
    let full = k_fold_cv_with(&db, Label::FAULTY, Label::HEALTHY_LINK, &quick(), &folds).unwrap();
    for victim in [0, 7, 13, 22] {
        let keep: Vec<usize> = (0..db.len()).filter(|&i| i != victim).collect();
        let smaller = db.subset(&keep);
        let smaller_folds: Vec<usize> = keep.iter().map(|&i| folds[i]).collect();
        let cv = k_fold_cv_with(&smaller, Label::FAULTY, Label::HEALTHY_LINK, &quick(), &smaller_folds).unwrap();
        let f = folds[victim];
        assert_eq!(model_json(&cv.models[f]), model_json(&full.models[f]), "fold {f}");
    }
}

#[test]
fn separable_data_scores_perfectly_under_cv() {
    let db = link_db(15, 0.4, 0.02, 2);
    for k in [2, 3, 5] {
        let cv = k_fold_cv(&db, Label::FAULTY, Label::HEALTHY_LINK, &quick(), k, 4).unwrap();
        assert_eq!(cv.mean_accuracy, 1.0, "k={k}");
        assert_eq!(cv.folds.len(), k);
    }
}

#[test]
fn permuted_labels_fall_to_chance() {
    let db = link_db(30, 0.4, 0.02, 3);
    let mut total = 0.0;
    let runs = 6;
    for r in 0..runs {
        let mut shuffled = db.clone();
        let mut labels: Vec<Option<Label>> = shuffled.rows.iter().map(|s| s.label).collect();
        labels.shuffle(&mut SplitMix64::new(100 + r));
        for (row, l) in shuffled.rows.iter_mut().zip(labels) {
            row.label = l;
        }
        total += k_fold_cv(&shuffled, Label::FAULTY, Label::HEALTHY_LINK, &quick(), 5, r).unwrap().mean_accuracy;
    }
    let mean = total / runs as f64;
    assert!((mean - 0.5).abs() <= 0.15, "{mean}");
}

#[test]
fn training_accuracy_is_at_least_cv_accuracy() {
    for seed in 0..3 {
        let db = link_db(20, 0.08, 0.1, 10 + seed);
        let cv = k_fold_cv(&db, Label::FAULTY, Label::HEALTHY_LINK, &quick(), 4, seed).unwrap();
        let trained = train_stage(&db, Label::FAULTY, Label::HEALTHY_LINK, &quick()).unwrap();
        let correct = db
            .rows
            .iter()
            .filter(|r| {
                let d = trained.model.decision_value_raw(&r.values).unwrap();
                let y = if r.label == Some(Label::FAULTY) { 1 } else { -1 };
                sign_of(d) == y
            })
            .count();
        let train_acc = correct as f64 / db.len() as f64;
        assert!(train_acc >= cv.mean_accuracy, "seed {seed}: {train_acc} < {}", cv.mean_accuracy);
    }
}

#[test]
fn cv_and_grid_repeat_for_a_seed() {
    let db = link_db(10, 0.2, 0.05, 5);
    let a = k_fold_cv(&db, Label::FAULTY, Label::HEALTHY_LINK, &quick(), 3, 8).unwrap();
    let b = k_fold_cv(&db, Label::FAULTY, Label::HEALTHY_LINK, &quick(), 3, 8).unwrap();
    assert_eq!(a.folds, b.folds);
    let ma: Vec<String> = a.models.iter().map(model_json).collect();
    let mb: Vec<String> = b.models.iter().map(model_json).collect();
    assert_eq!(ma, mb);

    let data = db.binary(Label::FAULTY, Label::HEALTHY_LINK).unwrap();
    let grid = GridSpec {
        kernels: vec![KernelKind::Linear, KernelKind::Rbf],
        c_values: vec![1.0, 10.0],
        sigma_scales: vec![0.5, 1.0],
    };
    let base = Settings::new(KernelKind::Linear);
    let g1 = select_model(&data, &grid, &base, 3, 2).unwrap();
    let g2 = select_model(&data, &grid, &base, 3, 2).unwrap();
    assert_eq!(g1, g2);
}
