use concmtf_core::als::{
    core_gram, core_linear_term, init_factors, normalize_with_compensation, objective, update_core, update_factor_a,
    update_factor_b, update_factor_c, update_factor_d, Block, BlockConstraints, ConstraintConfig, CoreConstraints,
    FactorModel, FitConfig, FitTrace, ModelKind, Ranks,
};
use concmtf_core::matrix::{kronecker, Matrix};
use concmtf_core::synth::{generate_planted, relative_error, PlantedConfig, PlantedInstance};
use concmtf_core::tensor::{superdiagonal_core, tucker_reconstruct, Tensor3};
use concmtf_core::{fit, fit_from_model};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn planted(dims: (usize, usize, usize, usize), ranks: Ranks, kind: ModelKind, noise: f64, seed: u64) -> PlantedInstance {
    generate_planted(&PlantedConfig { dims, ranks, kind, sparsity: 0.3, noise, seed, disjoint_words: false }).unwrap()
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn column_l1(m: &Matrix) -> Vec<f64> {
    m.columns().iter().map(|c| c.iter().map(|v| v.abs()).sum()).collect()
}

fn max_inner(m: &Matrix) -> f64 {
    let g = m.gram();
    let mut worst = f64::NEG_INFINITY;
    for r in 0..g.rows() {
        for s in 0..g.cols() {
            if r != s {
                worst = worst.max(g.get(r, s));
            }
        }
    }
    worst
}

fn assert_descent(trace: &FitTrace) {
    let slack = 1e-8 * (1.0 + trace.objectives[0]);
    for (n, w) in trace.objectives.windows(2).enumerate() {
        assert!(w[1] <= w[0] + slack, "objective rose at sweep {}: {} -> {}", n + 1, w[0], w[1]);
    }
}

#[test]
fn init_contract() {
    let a = init_factors((6, 5, 4, 3), Ranks(3, 2, 2), ModelKind::Tucker3, 1).unwrap();
    assert_eq!(a, init_factors((6, 5, 4, 3), Ranks(3, 2, 2), ModelKind::Tucker3, 1).unwrap());
    let all = [a.a.values(), a.b.values(), a.c.values(), a.d.values(), a.core.values()].concat();
    assert!(all.iter().all(|v| (0.0..1.0).contains(v)));
    let cp = init_factors((6, 5, 4, 3), Ranks::cp(2), ModelKind::Cp, 1).unwrap();
    assert_eq!(cp.core.values().iter().filter(|v| **v != 0.0).count(), 2);
    assert!(init_factors((6, 5, 4, 3), Ranks(3, 2, 2), ModelKind::Cp, 1).is_err());
    assert!(init_factors((6, 5, 4, 3), Ranks(7, 2, 2), ModelKind::Tucker3, 1).is_err());
}

#[test]
fn objective_examples() {
    let inst = planted((6, 5, 4, 3), Ranks(2, 2, 2), ModelKind::Tucker3, 0.0, 4);
    assert!(objective(&inst.tensor, &inst.side, &inst.truth, 1.0).unwrap() <= 1e-20);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = init_factors((6, 5, 4, 3), Ranks(2, 2, 2), ModelKind::Tucker3, 2).unwrap();
    let t = Tensor3::from_fn((6, 5, 4), |_, _, _| rng.random::<f64>());
    let y = uniform_matrix(&mut rng, 6, 3);
    let mut tensor_term = 0.0;
    for i in 0..6 {
        for j in 0..5 {
            for k in 0..4 {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        for r in 0..2 {
                            s += m.core.get(p, q, r) * m.a.get(i, p) * m.b.get(j, q) * m.c.get(k, r);
                        }
                    }
                }
                tensor_term += (t.get(i, j, k) - s).powi(2);
            }
        }
    }
    let mut side_term = 0.0;
    for i in 0..6 {
        for f in 0..3 {
            let s: f64 = (0..2).map(|r| m.a.get(i, r) * m.d.get(f, r)).sum();
            side_term += (y.get(i, f) - s).powi(2);
        }
    }
    let lambda = 0.7;
    let got = objective(&t, &y, &m, lambda).unwrap();
    assert!((got - (tensor_term + lambda * side_term)).abs() <= 1e-10 * got);
    assert!((objective(&t, &y, &m, 0.0).unwrap() - tensor_term).abs() <= 1e-10 * tensor_term);
}

#[test]
fn uncoupled_a_update_ignores_side_matrix() {
    let inst = planted((8, 6, 5, 4), Ranks(3, 2, 2), ModelKind::Tucker3, 0.2, 1);
    let m = init_factors((8, 6, 5, 4), Ranks(3, 2, 2), ModelKind::Tucker3, 3).unwrap();
    let cfg = ConstraintConfig::nonneg_only(0.0);
    let coupled = update_factor_a(&inst.tensor, &inst.side, &m, &cfg).unwrap();
    let mut bare = m.clone();
    bare.d = Matrix::zeros(0, 3);
    let alone = update_factor_a(&inst.tensor, &Matrix::zeros(8, 0), &bare, &cfg).unwrap();
    assert!(max_abs_diff(coupled.factor.values(), alone.factor.values()) <= 1e-12);
}

#[test]
fn b_and_c_updates_recover_planted_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = uniform_matrix(&mut rng, 7, 3);
    let b_true = uniform_matrix(&mut rng, 6, 2);
    let c_true = uniform_matrix(&mut rng, 5, 2);
    let core = Tensor3::from_fn((3, 2, 2), |_, _, _| rng.random::<f64>());
    let t = tucker_reconstruct(&core, &a, &b_true, &c_true).unwrap();
    let cfg = ConstraintConfig::nonneg_only(1.0);
    let mut m = init_factors((7, 6, 5, 2), Ranks(3, 2, 2), ModelKind::Tucker3, 5).unwrap();
    m.a = a;
    m.core = core;
    m.c = c_true.clone();
    let upd = update_factor_b(&t, &m, &cfg).unwrap();
    assert!(max_abs_diff(upd.factor.values(), b_true.values()) <= 1e-6);
    m.b = b_true.clone();
    m.c = uniform_matrix(&mut rng, 5, 2);
    let upd = update_factor_c(&t, &m, &cfg).unwrap();
    assert!(max_abs_diff(upd.factor.values(), c_true.values()) <= 1e-6);
}

#[test]
fn d_update_recovers_and_handles_zero_a() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut m = init_factors((7, 4, 3, 5), Ranks(3, 2, 2), ModelKind::Tucker3, 6).unwrap();
    let d_true = uniform_matrix(&mut rng, 5, 3);
    let y = m.a.matmul(&d_true.transpose()).unwrap();
    let cfg = ConstraintConfig::nonneg_only(1.0);
    let upd = update_factor_d(&y, &m, &cfg).unwrap();
    assert!(max_abs_diff(upd.factor.values(), d_true.values()) <= 1e-6);
    assert!(upd.degenerate_columns.is_empty());

    m.a = Matrix::zeros(7, 3);
    let before = m.d.clone();
    let upd = update_factor_d(&y, &m, &cfg).unwrap();
    assert_eq!(upd.factor, before);
    assert_eq!(upd.degenerate_columns, vec![0, 1, 2]);
}

#[test]
fn block_updates_never_increase_objective() {
    let inst = planted((9, 7, 5, 4), Ranks(3, 2, 2), ModelKind::Tucker3, 0.0, 21);
    let (t, y) = (&inst.tensor, &inst.side);
    let cfg = ConstraintConfig { b: BlockConstraints::bounded(50.0), ..ConstraintConfig::nonneg_only(1.0) };
    let mut m = init_factors((9, 7, 5, 4), Ranks(3, 2, 2), ModelKind::Tucker3, 8).unwrap();
    for _ in 0..3 {
        for block in [Block::A, Block::B, Block::C, Block::D, Block::Core] {
            let before = objective(t, y, &m, 1.0).unwrap();
            match block {
                Block::A => m.a = update_factor_a(t, y, &m, &cfg).unwrap().factor,
                Block::B => m.b = update_factor_b(t, &m, &cfg).unwrap().factor,
                Block::C => m.c = update_factor_c(t, &m, &cfg).unwrap().factor,
                Block::D => m.d = update_factor_d(y, &m, &cfg).unwrap().factor,
                Block::Core => m.core = update_core(t, &m, &cfg).unwrap().core,
            }
            let after = objective(t, y, &m, 1.0).unwrap();
            assert!(after <= before + 1e-10 * (1.0 + before), "{block:?}: {before} -> {after}");
        }
    }
}

#[test]
fn physics_bounds_hold_after_each_update() {
    let inst = planted((30, 20, 8, 6), Ranks(4, 3, 3), ModelKind::Tucker3, 0.1, 3);
    let (t, y) = (&inst.tensor, &inst.side);
    let cfg = ConstraintConfig::physics();
    let m = init_factors((30, 20, 8, 6), Ranks(4, 3, 3), ModelKind::Tucker3, 3).unwrap();
    let checks: [(Matrix, f64); 4] = [
        (update_factor_a(t, y, &m, &cfg).unwrap().factor, 0.05),
        (update_factor_b(t, &m, &cfg).unwrap().factor, 0.6),
        (update_factor_c(t, &m, &cfg).unwrap().factor, 0.2),
        (update_factor_d(y, &m, &cfg).unwrap().factor, 0.2),
    ];
    for (x, eps) in checks {
        assert!(column_l1(&x).iter().all(|s| *s <= eps + 1e-8));
        assert!(max_inner(&x) <= eps + 1e-8);
        assert!(x.values().iter().all(|v| *v >= -1e-12));
    }
}

#[test]
fn core_update_closed_form_for_orthonormal_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let orthonormal = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| {
        let mut cols_out: Vec<Vec<f64>> = Vec::new();
        while cols_out.len() < cols {
            let mut v: Vec<f64> = (0..rows).map(|_| rng.random::<f64>() - 0.5).collect();
            for q in &cols_out {
                let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            cols_out.push(v.iter().map(|x| x / n).collect());
        }
        Matrix::from_columns(&cols_out, rows)
    };
    let (a, b, c) = (orthonormal(&mut rng, 6, 3), orthonormal(&mut rng, 5, 2), orthonormal(&mut rng, 4, 2));
    let t = Tensor3::from_fn((6, 5, 4), |_, _, _| rng.random::<f64>() - 0.5);
    let mut m = init_factors((6, 5, 4, 2), Ranks(3, 2, 2), ModelKind::Tucker3, 1).unwrap();
    m.a = a.clone();
    m.b = b.clone();
    m.c = c.clone();
    let cfg = ConstraintConfig { core: CoreConstraints { nonneg: false, l1_eps: None }, ..ConstraintConfig::default() };
    let upd = update_core(&t, &m, &cfg).unwrap();
    let expect = Tensor3::from_fn((3, 2, 2), |p, q, r| {
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..5 {
                for k in 0..4 {
                    s += t.get(i, j, k) * a.get(i, p) * b.get(j, q) * c.get(k, r);
                }
            }
        }
        s
    });
    assert!(max_abs_diff(upd.core.values(), expect.values()) <= 1e-8);

    let zero = ConstraintConfig { core: CoreConstraints { nonneg: true, l1_eps: Some(0.0) }, ..ConstraintConfig::default() };
    let upd = update_core(&t, &m, &zero).unwrap();
    assert!(upd.core.values().iter().all(|v| *v == 0.0));
}

#[test]
fn core_gram_matches_explicit_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut m = init_factors((2, 2, 2, 1), Ranks(2, 2, 2), ModelKind::Tucker3, 0).unwrap();
    m.a = uniform_matrix(&mut rng, 2, 2);
    m.b = uniform_matrix(&mut rng, 2, 2);
    m.c = uniform_matrix(&mut rng, 2, 2);
    let big = kronecker(&m.c, &kronecker(&m.b, &m.a));
    let explicit = big.transpose().matmul(&big).unwrap();
    assert!(max_abs_diff(core_gram(&m).values(), explicit.values()) <= 1e-12);
    let t = Tensor3::from_fn((2, 2, 2), |_, _, _| rng.random::<f64>());
    let lin = big.transpose().mat_vec(t.values()).unwrap();
    assert!(max_abs_diff(&core_linear_term(&t, &m).unwrap(), &lin) <= 1e-12);
}

#[test]
fn normalization_contract() {
    let cfg = ConstraintConfig::default();
    let m = init_factors((6, 5, 4, 3), Ranks(3, 2, 2), ModelKind::Tucker3, 7).unwrap();
    let (n1, _) = normalize_with_compensation(&m, &cfg);
    for x in [&n1.a, &n1.b, &n1.c] {
        for col in x.columns() {
            assert!((col.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() <= 1e-12);
        }
    }
    let (n2, _) = normalize_with_compensation(&n1, &cfg);
    assert!(max_abs_diff(n1.a.values(), n2.a.values()) <= 1e-12);
    assert!(max_abs_diff(n1.core.values(), n2.core.values()) <= 1e-12);

    let recon = m.reconstruct();
    let mut scaled = m.clone();
    scaled.a.scale_column(0, 10.0);
    let (n3, _) = normalize_with_compensation(&scaled, &cfg);
    let target = scaled.reconstruct();
    assert!(max_abs_diff(n3.reconstruct().values(), target.values()) <= 1e-10 * target.max_abs());
    let side = scaled.reconstruct_side();
    assert!(max_abs_diff(n3.reconstruct_side().values(), side.values()) <= 1e-10 * side.max_abs());

    let (n0, _) = normalize_with_compensation(&m, &cfg);
    assert!(max_abs_diff(n0.reconstruct().values(), recon.values()) <= 1e-10 * recon.max_abs());
    assert!(max_abs_diff(n0.reconstruct_side().values(), m.reconstruct_side().values()) <= 1e-10 * m.reconstruct_side().max_abs());

    let mut z = m.clone();
    z.b.set_column(1, &[0.0; 5]);
    let (nz, report) = normalize_with_compensation(&z, &cfg);
    assert_eq!(nz.b.column(1), vec![0.0; 5]);
    assert_eq!(report.zero_columns, vec![(Block::B, 1)]);
}

#[test]
fn noiseless_tucker_fit_recovers_tensor() {
    let inst = planted((20, 15, 6, 5), Ranks(3, 2, 2), ModelKind::Tucker3, 0.0, 2);
    let fcfg = FitConfig { seed: 11, rel_tol: 1e-12, ..FitConfig::default() };
    let (m, trace) = fit(&inst.tensor, &inst.side, Ranks(3, 2, 2), ModelKind::Tucker3, &ConstraintConfig::nonneg_only(1.0), &fcfg).unwrap();
    assert!(relative_error(&inst.tensor, &m) <= 1e-3, "error {}", relative_error(&inst.tensor, &m));
    assert_descent(&trace);
}

#[test]
fn physics_config_fit_is_feasible_and_descending() {
    for kind in [ModelKind::Tucker3, ModelKind::Cp] {
        let ranks = if kind == ModelKind::Cp { Ranks::cp(4) } else { Ranks(4, 3, 3) };
        let inst = planted((30, 20, 8, 6), ranks, kind, 0.1, 5);
        let fcfg = FitConfig { seed: 5, max_iters: 40, ..FitConfig::default() };
        let (m, trace) = fit(&inst.tensor, &inst.side, ranks, kind, &ConstraintConfig::physics(), &fcfg).unwrap();
        assert!(trace.max_violation() <= 1e-8);
        assert_descent(&trace);
        assert!(m.a.values().iter().chain(m.b.values()).chain(m.core.values()).all(|v| *v >= -1e-12));
    }
}

#[test]
fn single_sweep_contract() {
    let inst = planted((8, 6, 4, 3), Ranks(2, 2, 2), ModelKind::Tucker3, 0.1, 1);
    let fcfg = FitConfig { max_iters: 1, ..FitConfig::default() };
    let (_, trace) = fit(&inst.tensor, &inst.side, Ranks(2, 2, 2), ModelKind::Tucker3, &ConstraintConfig::default(), &fcfg).unwrap();
    assert_eq!(trace.iterations, 1);
    assert_eq!(trace.objectives.len(), 2);
}

#[test]
fn invalid_configs_are_rejected() {
    let inst = planted((8, 6, 4, 3), Ranks(2, 2, 2), ModelKind::Tucker3, 0.0, 1);
    let run = |c: &ConstraintConfig, f: &FitConfig| fit(&inst.tensor, &inst.side, Ranks(2, 2, 2), ModelKind::Tucker3, c, f);
    let mut bad = ConstraintConfig::default();
    bad.a.l1_eps = Some(-1.0);
    assert!(run(&bad, &FitConfig::default()).is_err());
    assert!(run(&ConstraintConfig::nonneg_only(f64::NAN), &FitConfig::default()).is_err());
    assert!(run(&ConstraintConfig::default(), &FitConfig { max_iters: 0, ..FitConfig::default() }).is_err());
    assert!(fit(&inst.tensor, &Matrix::zeros(7, 3), Ranks(2, 2, 2), ModelKind::Tucker3, &ConstraintConfig::default(), &FitConfig::default()).is_err());
}

#[test]
fn fits_are_deterministic() {
    let inst = planted((10, 8, 5, 4), Ranks::cp(3), ModelKind::Cp, 0.1, 6);
    let fcfg = FitConfig { seed: 99, max_iters: 30, ..FitConfig::default() };
    let cfg = ConstraintConfig::physics();
    let (m1, t1) = fit(&inst.tensor, &inst.side, Ranks::cp(3), ModelKind::Cp, &cfg, &fcfg).unwrap();
    let (m2, t2) = fit(&inst.tensor, &inst.side, Ranks::cp(3), ModelKind::Cp, &cfg, &fcfg).unwrap();
    assert_eq!(m1, m2);
    let bits = |t: &FitTrace| t.objectives.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&t1), bits(&t2));
}

#[test]
fn objective_scales_quadratically_with_data() {
    let inst = planted((10, 8, 5, 4), Ranks(3, 2, 2), ModelKind::Tucker3, 0.1, 7);
    let fcfg = FitConfig { seed: 1, max_iters: 15, ..FitConfig::default() };
    let cfg = ConstraintConfig::nonneg_only(1.0);
    let (_, base) = fit(&inst.tensor, &inst.side, Ranks(3, 2, 2), ModelKind::Tucker3, &cfg, &fcfg).unwrap();
    for alpha in [0.01, 3.0, 250.0] {
        let t = inst.tensor.scaled(alpha);
        let y = inst.side.scaled(alpha);
        let (_, tr) = fit(&t, &y, Ranks(3, 2, 2), ModelKind::Tucker3, &cfg, &fcfg).unwrap();
        assert_eq!(tr.objectives.len(), base.objectives.len());
        for (x, b) in tr.objectives.iter().zip(&base.objectives) {
            let expect = alpha * alpha * b;
            assert!((x - expect).abs() <= 1e-9 * expect, "alpha {alpha}: {x} vs {expect}");
        }
    }
}

fn cp_as_frozen_tucker(m: &FactorModel) -> FactorModel {
    FactorModel { kind: ModelKind::Tucker3, ..m.clone() }
}

#[test]
fn cp_equals_frozen_superdiagonal_tucker() {
    for seed in 0..3u64 {
        let inst = planted((12, 9, 6, 4), Ranks::cp(3), ModelKind::Cp, 0.1, seed);
        let init = init_factors((12, 9, 6, 4), Ranks::cp(3), ModelKind::Cp, seed).unwrap();
        let cfg = ConstraintConfig::physics();
        let fcfg = FitConfig { max_iters: 25, rel_tol: 1e-300, ..FitConfig::default() };
        let (mc, tc) = fit_from_model(&inst.tensor, &inst.side, init.clone(), &cfg, &fcfg).unwrap();
        let frozen = FitConfig { freeze_core: true, ..fcfg };
        let (mt, tt) = fit_from_model(&inst.tensor, &inst.side, cp_as_frozen_tucker(&init), &cfg, &frozen).unwrap();
        assert_eq!(tc.objectives.len(), tt.objectives.len());
        for (x, y) in tc.objectives.iter().zip(&tt.objectives) {
            assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
        assert!(max_abs_diff(mc.a.values(), mt.a.values()) <= 1e-10);
        assert!(max_abs_diff(mc.core.values(), superdiagonal_core(&concmtf_core::tensor::superdiagonal(&mt.core)).values()) <= 1e-10);
    }
}

#[test]
fn tighter_column_bound_never_raises_column_mass() {
    let inst = planted((15, 10, 6, 5), Ranks(3, 3, 3), ModelKind::Tucker3, 0.1, 8);
    let m = init_factors((15, 10, 6, 5), Ranks(3, 3, 3), ModelKind::Tucker3, 8).unwrap();
    let mut prev = f64::INFINITY;
    for eps in [10.0, 2.0, 1.0, 0.5, 0.2, 0.05, 0.0] {
        let cfg = ConstraintConfig { a: BlockConstraints { l1_eps: Some(eps), ..BlockConstraints::nonneg() }, ..ConstraintConfig::default() };
        let upd = update_factor_a(&inst.tensor, &inst.side, &m, &cfg).unwrap();
        let worst = column_l1(&upd.factor).into_iter().fold(0.0, f64::max);
        assert!(worst <= eps + 1e-8);
        assert!(worst <= prev + 1e-8, "eps {eps}: {worst} > {prev}");
        prev = worst;
    }
}

fn block_strategy() -> impl Strategy<Value = BlockConstraints> {
    (any::<bool>(), proptest::option::of(0.05f64..3.0), proptest::option::of(0.0f64..0.5))
        .prop_map(|(nonneg, l1_eps, orth_eps)| BlockConstraints { nonneg, l1_eps, orth_eps })
}

fn config_strategy() -> impl Strategy<Value = ConstraintConfig> {
    (
        block_strategy(),
        block_strategy(),
        block_strategy(),
        block_strategy(),
        (any::<bool>(), proptest::option::of(0.1f64..5.0)),
        0.0f64..2.0,
    )
        .prop_map(|(a, b, c, d, (nonneg, l1_eps), coupling_weight)| ConstraintConfig {
            a,
            b,
            c,
            d,
            core: CoreConstraints { nonneg, l1_eps },
            coupling_weight,
            normalize_d: false,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn descent_and_feasibility_for_any_config(cfg in config_strategy(), seed in 0u64..1000, cp in any::<bool>()) {
        let (kind, ranks) = if cp { (ModelKind::Cp, Ranks::cp(3)) } else { (ModelKind::Tucker3, Ranks(3, 2, 2)) };
        let inst = planted((9, 7, 5, 4), ranks, kind, 0.1, seed);
        let fcfg = FitConfig { seed, max_iters: 25, ..FitConfig::default() };
        let (m, trace) = fit(&inst.tensor, &inst.side, ranks, kind, &cfg, &fcfg).unwrap();
        let slack = 1e-8 * (1.0 + trace.objectives[0]);
        for w in trace.objectives.windows(2) {
            prop_assert!(w[1] <= w[0] + slack);
        }
        prop_assert!(trace.max_violation() <= 1e-8);
        prop_assert!(m.a.is_finite() && m.b.is_finite() && m.c.is_finite() && m.d.is_finite());
    }
}
