use concmtf_core::matrix::Matrix;
use concmtf_core::synth::*;
use concmtf_core::tensor::{frobenius_error, superdiagonal_core};
use concmtf_core::{FactorModel, ModelKind, Ranks};

fn cfg(noise: f64, seed: u64) -> PlantedConfig {
    PlantedConfig { dims: (20, 10, 6, 5), ranks: Ranks::cp(3), noise, seed, ..Default::default() }
}

#[test]
fn noiseless_instance_has_zero_objective() {
    let inst = generate_planted(&cfg(0.0, 1)).unwrap();
    assert_eq!(planted_objective(&inst, 1.0).unwrap(), 0.0);
    let tucker = PlantedConfig { kind: ModelKind::Tucker3, ranks: Ranks(3, 2, 2), ..cfg(0.0, 2) };
    assert_eq!(planted_objective(&generate_planted(&tucker).unwrap(), 1.0).unwrap(), 0.0);
}

#[test]
fn noise_is_calibrated() {
    for seed in 0..5 {
        for kind in [ModelKind::Cp, ModelKind::Tucker3] {
            let ranks = if kind == ModelKind::Cp { Ranks::cp(3) } else { Ranks(3, 2, 4) };
            let inst = generate_planted(&PlantedConfig { kind, ranks, ..cfg(0.1, seed) }).unwrap();
            let signal = inst.signal();
            let rel = frobenius_error(&inst.tensor, &signal).unwrap() / signal.frobenius_norm();
            assert!((rel - 0.1).abs() <= 1e-9, "tensor noise {rel}");
            let side = inst.truth.reconstruct_side();
            let diff: f64 = inst.side.values().iter().zip(side.values()).map(|(a, b)| (a - b) * (a - b)).sum();
            let norm: f64 = side.values().iter().map(|v| v * v).sum();
            assert!(((diff / norm).sqrt() - 0.1).abs() <= 1e-9);
            assert!(inst.tensor.values().iter().all(|v| *v >= 0.0));
            assert!(inst.side.values().iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn generator_contract() {
    let a = generate_planted(&cfg(0.2, 9)).unwrap();
    assert_eq!(a, generate_planted(&cfg(0.2, 9)).unwrap());
    assert_ne!(a.tensor, generate_planted(&cfg(0.2, 10)).unwrap().tensor);
    for m in [&a.truth.a, &a.truth.b, &a.truth.c, &a.truth.d] {
        for col in m.columns() {
            let n: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-12);
            assert!(col.iter().all(|v| *v >= 0.0));
        }
    }
    let disjoint = generate_planted(&PlantedConfig { disjoint_words: true, ..cfg(0.0, 3) }).unwrap();
    let cols = disjoint.truth.a.columns();
    for i in 0..cols.len() {
        for j in 0..i {
            assert!(cols[i].iter().zip(&cols[j]).all(|(x, y)| x * y == 0.0));
        }
    }
    assert!(generate_planted(&PlantedConfig { sparsity: 1.5, ..cfg(0.0, 0) }).is_err());
    assert!(generate_planted(&PlantedConfig { ranks: Ranks(2, 3, 3), ..cfg(0.0, 0) }).is_err());
}

fn cp(a: Matrix, b: Matrix, c: Matrix) -> FactorModel {
    let r = a.cols();
    FactorModel { d: Matrix::zeros(1, r), core: superdiagonal_core(&vec![1.0; r]), kind: ModelKind::Cp, a, b, c }
}

fn permute_scale(m: &Matrix, perm: &[usize], scale: &[f64]) -> Matrix {
    let cols = m.columns();
    let out: Vec<Vec<f64>> = perm.iter().zip(scale).map(|(&p, s)| cols[p].iter().map(|v| v * s).collect()).collect();
    Matrix::from_columns(&out, m.rows())
}

#[test]
fn match_score_examples() {
    let truth = generate_planted(&cfg(0.0, 4)).unwrap().truth;
    assert!((factor_match_score(&truth, &truth).unwrap() - 1.0).abs() <= 1e-12);
    let perm = [2, 0, 1];
    let est = cp(
        permute_scale(&truth.a, &perm, &[3.0, 0.5, 7.0]),
        permute_scale(&truth.b, &perm, &[1.0, 2.0, 0.1]),
        permute_scale(&truth.c, &perm, &[4.0, 4.0, 4.0]),
    );
    assert!((factor_match_score(&est, &truth).unwrap() - 1.0).abs() <= 1e-12);

    // two components on disjoint supports, estimate rotated in the A mode only
    let e = Matrix::identity(2);
    let t = cp(e.clone(), e.clone(), e.clone());
    let rot = Matrix::from_rows(&[&[0.8, 0.0], &[0.6, 1.0]]);
    let est = cp(rot, e.clone(), e.clone());
    // column cosines with truth: (0.8, 1.0) on the diagonal
    assert!((factor_match_score(&est, &t).unwrap() - 0.9).abs() <= 1e-12);
    let swapped = cp(Matrix::from_rows(&[&[0.0, 0.8], &[1.0, 0.6]]), Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]), Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
    assert!((factor_match_score(&swapped, &t).unwrap() - 0.9).abs() <= 1e-12);

    let smaller = generate_planted(&PlantedConfig { ranks: Ranks::cp(2), ..cfg(0.0, 4) }).unwrap().truth;
    assert!(factor_match_score(&smaller, &truth).is_err());
}

#[test]
fn evaluate_run_is_consistent() {
    use concmtf_core::als::{fit, ConstraintConfig, FitConfig};
    use concmtf_core::topics::build_report;
    let inst = generate_planted(&cfg(0.05, 6)).unwrap();
    let fc = FitConfig { max_iters: 30, seed: 6, ..Default::default() };
    let (model, trace) = fit(&inst.tensor, &inst.side, Ranks::cp(3), ModelKind::Cp, &ConstraintConfig::nonneg_only(1.0), &fc).unwrap();
    let report = build_report(&model, inst.tensor.dims().0, None).unwrap();
    let m = evaluate_run(&inst, &model, &trace, &report);
    assert_eq!(m.iterations, trace.iterations);
    assert_eq!(m.relative_error, relative_error(&inst.tensor, &model));
    assert_eq!(m.match_score, Some(factor_match_score(&model, &inst.truth).unwrap()));
    assert!((m.mean_word_overlap - report.mean_pairwise_overlap()).abs() <= 1e-15);
    assert!((0.0..=1.0).contains(&m.match_score.unwrap()));
    assert!(m.relative_error < 0.5);
}
