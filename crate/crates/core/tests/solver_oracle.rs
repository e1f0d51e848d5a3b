mod common;

use common::*;
use keytrack::context::ContextPatchSet;
use keytrack::dsp::gaussian_label;
use keytrack::features::FeatureMap;
use keytrack::solver::{
    filter_spectrum, solve_g_bin, solve_w, spatial_from_spectrum, spectrum, train_filter, BinProblem, BinSolver,
    CropOperator, SolverParams, Spectrum,
};
use ndarray::Array3;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_params(inst: &Instance, iters: usize) -> SolverParams {
    SolverParams {
        lambda: inst.lambda,
        gamma: inst.gamma,
        mu0: 0.1,
        beta: 1.0,
        mu_max: 0.1,
        admm_iters: iters,
        bin_solver: BinSolver::ShermanMorrison,
    }
}

fn train(inst: &Instance, params: &SolverParams) -> keytrack::FilterState {
    train_filter(
        &inst.target_map(),
        &inst.context_set(),
        &inst.label,
        inst.keyfilter.as_ref(),
        params,
        &inst.crop,
    )
    .unwrap()
}

#[test]
fn admm_reaches_dense_minimizer() {
    for seed in 0..30 {
        let inst = Instance::random(seed, 8, 3, 2);
        let st = train(&inst, &oracle_params(&inst, 300));
        let e = inst.objective(&st.w);
        let e_star = inst.objective(&inst.dense_minimizer());
        assert!(relative_gap(e, e_star) <= 1e-4, "seed {seed}: {e} vs {e_star}");
        assert!(e >= e_star * (1.0 - 1e-12));
    }
}

#[test]
fn converged_state_satisfies_constraint() {
    for seed in 0..10 {
        let inst = Instance::random(100 + seed, 8, 3, 2);
        let st = train(&inst, &oracle_params(&inst, 300));
        assert!(st.constraint_gap(&inst.crop) <= 1e-4, "seed {seed}");
        assert!(st.w.iter().chain(st.g_hat.iter().map(|c| &c.re)).all(|v| v.is_finite()));
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        let inst = Instance::random(200 + seed, 6, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_tensor(&mut rng, (inst.crop.cropped.0, inst.crop.cropped.1, inst.target.dim().2));
        let grad = inst.gradient(&w);
        let h = 1e-6;
        for idx in 0..w.len() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus.as_slice_mut().unwrap()[idx] += h;
            minus.as_slice_mut().unwrap()[idx] -= h;
            let fd = (inst.objective(&plus) - inst.objective(&minus)) / (2.0 * h);
            let g = grad.as_slice().unwrap()[idx];
            assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0), "seed {seed} idx {idx}: {fd} vs {g}");
        }
    }
}

#[test]
fn full_training_beats_baseline_on_full_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let crop = CropOperator::centered((4, 4), (2, 2)).unwrap();
    let target = random_tensor(&mut rng, (4, 4, 2));
    let ctx = random_tensor(&mut rng, (4, 4, 2));
    let inst = Instance {
        target,
        context: vec![(0.3, ctx)],
        label: gaussian_label(4, 4, 0.8).unwrap(),
        keyfilter: Some(random_tensor(&mut rng, (2, 2, 2)).mapv(|v| 0.1 * v)),
        crop,
        lambda: 1e-2,
        gamma: 2.0,
    };
    let full = train(&inst, &oracle_params(&inst, 400));
    let baseline = train_filter(
        &inst.target_map(),
        &ContextPatchSet::empty(),
        &inst.label,
        None,
        &SolverParams {
            gamma: 0.0,
            ..oracle_params(&inst, 400)
        },
        &inst.crop,
    )
    .unwrap();
    assert!(inst.objective(&full.w) <= inst.objective(&baseline.w) + 1e-6);
}

#[test]
fn ridge_closed_form_without_cropping() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (rows, cols, depth) = (rng.random_range(4..9), rng.random_range(4..9), rng.random_range(1..4));
        let x = random_tensor(&mut rng, (rows, cols, depth));
        let label = gaussian_label(rows, cols, 1.0).unwrap();
        let crop = CropOperator::identity((rows, cols));
        let lambda = 1e-2;
        let params = SolverParams {
            lambda,
            gamma: 0.0,
            mu0: 0.1,
            beta: 1.0,
            mu_max: 0.1,
            admm_iters: 300,
            bin_solver: BinSolver::ShermanMorrison,
        };
        let st = train_filter(&FeatureMap::from_data(x.clone()), &ContextPatchSet::empty(), &label, None, &params, &crop)
            .unwrap();

        let n = (rows * cols) as f64;
        let x_hat = spectrum(&x);
        let y_hat = keytrack::dsp::fft2_real(label.y.view());
        let mut g_star = Spectrum::zeros((rows, cols, depth));
        for r in 0..rows {
            for c in 0..cols {
                let energy: f64 = (0..depth).map(|d| x_hat[[r, c, d]].norm_sqr()).sum();
                for d in 0..depth {
                    g_star[[r, c, d]] = x_hat[[r, c, d]] * y_hat[[r, c]].conj() / (energy + lambda / n);
                }
            }
        }
        let w_star = spatial_from_spectrum(&g_star).mapv(|v| v.re);
        let err = (&st.w - &w_star).mapv(|v| v * v).sum().sqrt();
        let norm = w_star.mapv(|v| v * v).sum().sqrt();
        assert!(err / norm <= 1e-3, "seed {seed}: {}", err / norm);
    }
}

#[test]
fn strong_keyfilter_dominates() {
    let inst = Instance::random(400, 8, 3, 2);
    let prior = train(&inst, &oracle_params(&inst, 50)).w;
    let params = SolverParams {
        gamma: 1e6,
        ..SolverParams::default()
    };
    let st = train_filter(&inst.target_map(), &inst.context_set(), &inst.label, Some(&prior), &params, &inst.crop).unwrap();
    let err = (&st.w - &prior).mapv(|v| v * v).sum().sqrt();
    let norm = prior.mapv(|v| v * v).sum().sqrt();
    assert!(err / norm <= 1e-2, "{}", err / norm);
}

#[test]
fn residual_is_mostly_non_increasing() {
    let mut steps = 0;
    let mut violations = 0;
    // mu = 1, 10, 100, 1000: every iteration raises the penalty
    for seed in 0..100 {
        let inst = Instance::random(500 + seed, 8, 3, 2);
        let params = SolverParams {
            lambda: inst.lambda,
            gamma: inst.gamma,
            admm_iters: 4,
            ..SolverParams::default()
        };
        let st = train(&inst, &params);
        for w in st.residuals.windows(2) {
            steps += 1;
            if w[1] > w[0] * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    assert!(violations as f64 <= 0.05 * steps as f64, "{violations}/{steps}");
}

#[test]
fn recovered_filter_is_real() {
    for seed in 0..10 {
        let inst = Instance::random(600 + seed, 8, 3, 2);
        let st = train(&inst, &SolverParams::default());
        let spatial = spatial_from_spectrum(&st.g_hat);
        let scale = spatial.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        assert!(spatial.iter().all(|v| v.im.abs() <= 1e-10 * scale), "seed {seed}");
    }
}

#[test]
fn parallel_schedule_is_bitwise_stable() {
    let inst = Instance::random(700, 8, 3, 2);
    let params = SolverParams::default();
    let a = train(&inst, &params);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| train(&inst, &params));
    assert_eq!(a, b);
}

#[test]
fn zero_gamma_ignores_keyfilter_values() {
    let inst = Instance::random(800, 8, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = (inst.crop.cropped.0, inst.crop.cropped.1, inst.target.dim().2);
    let key = random_tensor(&mut rng, dim);
    let params = SolverParams {
        gamma: 0.0,
        ..SolverParams::default()
    };
    let with = train_filter(&inst.target_map(), &inst.context_set(), &inst.label, Some(&key), &params, &inst.crop).unwrap();
    let without = train_filter(&inst.target_map(), &inst.context_set(), &inst.label, None, &params, &inst.crop).unwrap();
    assert_eq!(with, without);
}

#[test]
fn solve_w_examples() {
    // identity reduction on a 1x1 grid
    let crop = CropOperator::identity((1, 1));
    let g = filter_spectrum(&Array3::from_elem((1, 1, 1), 2.5));
    let zeta = Spectrum::zeros((1, 1, 1));
    let params = SolverParams {
        lambda: 0.0,
        gamma: 0.0,
        ..SolverParams::default()
    };
    let w = solve_w(&g, &zeta, None, &params, 1.0, &crop).unwrap();
    assert!((w[[0, 0, 0]] - 2.5).abs() < 1e-15);

    let params = SolverParams {
        lambda: 1.0,
        gamma: 1.0,
        ..SolverParams::default()
    };
    let g = filter_spectrum(&Array3::from_elem((1, 1, 1), 2.0));
    let key = Array3::from_elem((1, 1, 1), 3.0);
    let w = solve_w(&g, &zeta, Some(&key), &params, 1.0, &crop).unwrap();
    assert!((w[[0, 0, 0]] - 5.0 / 3.0).abs() < 1e-15);

    let bad_key = Array3::zeros((2, 1, 1));
    assert!(solve_w(&g, &zeta, Some(&bad_key), &params, 1.0, &crop).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn sherman_morrison_matches_dense(seed in any::<u64>(), d in 1usize..9, p in 0usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = complex_vec(&mut rng, d);
        let ctx: Vec<(f64, Vec<Complex64>)> = (0..p).map(|_| (rng.random_range(0.0..1.0), complex_vec(&mut rng, d))).collect();
        let ctx_refs: Vec<(f64, &[Complex64])> = ctx.iter().map(|(s, v)| (*s, v.as_slice())).collect();
        let zeta = complex_vec(&mut rng, d);
        let w_hat = complex_vec(&mut rng, d);
        let problem = BinProblem {
            target: &x0,
            context: &ctx_refs,
            label: Complex64::new(rng.random_range(0.0..2.0), 0.0),
            zeta: &zeta,
            w_hat: &w_hat,
            mu: rng.random_range(0.05..5.0),
        };
        let sm = solve_g_bin(&problem, BinSolver::ShermanMorrison).unwrap();
        let dense = solve_g_bin(&problem, BinSolver::Dense).unwrap();
        let oracle = hermitian_oracle(&problem);
        let norm = oracle.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        for ((a, b), c) in sm.iter().zip(&dense).zip(&oracle) {
            prop_assert!((a - c).norm() <= 1e-10 * norm);
            prop_assert!((b - c).norm() <= 1e-10 * norm);
        }
    }

    #[test]
    fn crop_pad_projection(rows in 1usize..12, cols in 1usize..12, depth in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mr = rng.random_range(1..=rows);
        let mc = rng.random_range(1..=cols);
        let crop = CropOperator::centered((rows, cols), (mr, mc)).unwrap();
        let v = random_tensor(&mut rng, (mr, mc, depth));
        prop_assert_eq!(crop.crop(crop.pad(v.view()).view()), v);
        let u = random_tensor(&mut rng, (rows, cols, depth));
        let projected = crop.pad(crop.crop(u.view()).view());
        let zeroed = projected.iter().zip(u.iter()).filter(|(p, o)| **p == 0.0 && **o != 0.0).count();
        prop_assert_eq!(zeroed, (rows * cols - mr * mc) * depth);
    }
}
