//! Test oracles shared by the integration suites.

#![allow(dead_code)]

use keytrack::context::{ContextPatch, ContextPatchSet};
use keytrack::dsp::{gaussian_label, Label};
use keytrack::features::FeatureMap;
use keytrack::solver::{evaluate_objective, BinProblem, CropOperator, ObjectiveInputs};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random training problem small enough for dense linear algebra.
pub struct Instance {
    pub target: Array3<f64>,
    pub context: Vec<(f64, Array3<f64>)>,
    pub label: Label,
    pub keyfilter: Option<Array3<f64>>,
    pub crop: CropOperator,
    pub lambda: f64,
    pub gamma: f64,
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dim: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0))
}

impl Instance {
    pub fn random(seed: u64, max_grid: usize, max_depth: usize, max_context: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.random_range(4..=max_grid);
        let cols = rng.random_range(4..=max_grid);
        let mr = rng.random_range(1..=rows / 2 + 1);
        let mc = rng.random_range(1..=cols / 2 + 1);
        let depth = rng.random_range(1..=max_depth);
        let p = rng.random_range(0..=max_context);
        let crop = CropOperator::centered((rows, cols), (mr, mc)).unwrap();
        let target = random_tensor(&mut rng, (rows, cols, depth));
        let context = (0..p)
            .map(|_| (rng.random_range(0.1..0.5), random_tensor(&mut rng, (rows, cols, depth))))
            .collect();
        let sigma = rng.random_range(0.5..1.5);
        let keyfilter = rng
            .random_bool(0.5)
            .then(|| random_tensor(&mut rng, (mr, mc, depth)).mapv(|v| 0.1 * v));
        Instance {
            target,
            context,
            label: gaussian_label(rows, cols, sigma).unwrap(),
            keyfilter,
            crop,
            lambda: 1e-2,
            gamma: if rng.random_bool(0.5) { 10.0 } else { 0.5 },
        }
    }

    pub fn target_map(&self) -> FeatureMap {
        FeatureMap::from_data(self.target.clone())
    }

    pub fn context_set(&self) -> ContextPatchSet {
        ContextPatchSet {
            patches: self
                .context
                .iter()
                .enumerate()
                .map(|(i, (s, x))| ContextPatch {
                    center: (i as f64 + 1.0, 0.0),
                    score: *s,
                    features: FeatureMap::from_data(x.clone()),
                })
                .collect(),
        }
    }

    pub fn gamma_eff(&self) -> f64 {
        if self.keyfilter.is_some() {
            self.gamma
        } else {
            0.0
        }
    }

    pub fn objective(&self, w: &Array3<f64>) -> f64 {
        let ctx: Vec<(f64, &Array3<f64>)> = self.context.iter().map(|(s, x)| (*s, x)).collect();
        evaluate_objective(
            w,
            &ObjectiveInputs {
                target: &self.target,
                context: &ctx,
                label: &self.label.y,
                keyfilter: self.keyfilter.as_ref(),
                lambda: self.lambda,
                gamma: self.gamma,
                crop: &self.crop,
            },
        )
        .unwrap()
    }

    /// Correlation operator: row `t` (flattened shift), column `(m, d)`.
    fn operator(&self, x: &Array3<f64>) -> DMatrix<f64> {
        let (rows, cols, depth) = x.dim();
        let (mr, mc) = self.crop.cropped;
        let (or, oc) = self.crop.offset;
        let mut a = DMatrix::zeros(rows * cols, mr * mc * depth);
        for tr in 0..rows {
            for tc in 0..cols {
                for i in 0..mr {
                    for j in 0..mc {
                        for d in 0..depth {
                            a[(tr * cols + tc, (i * mc + j) * depth + d)] =
                                x[[(or + i + tr) % rows, (oc + j + tc) % cols, d]];
                        }
                    }
                }
            }
        }
        a
    }

    /// `(H, b)` with energy `1/2 w^T H w - b^T w + const`.
    pub fn normal_equations(&self) -> (DMatrix<f64>, DVector<f64>) {
        let a0 = self.operator(&self.target);
        let n_w = a0.ncols();
        let mut h = a0.transpose() * &a0;
        for (s, x) in &self.context {
            let ap = self.operator(x);
            h += ap.transpose() * &ap * (s * s);
        }
        let g = self.gamma_eff();
        for i in 0..n_w {
            h[(i, i)] += self.lambda + g;
        }
        let y = DVector::from_iterator(self.label.y.len(), self.label.y.iter().cloned());
        let mut b = a0.transpose() * y;
        if let Some(k) = &self.keyfilter {
            for (bi, kv) in b.iter_mut().zip(k.iter()) {
                *bi += g * kv;
            }
        }
        (h, b)
    }

    fn unflatten(&self, v: &DVector<f64>) -> Array3<f64> {
        let (mr, mc) = self.crop.cropped;
        let depth = self.target.dim().2;
        Array3::from_shape_vec((mr, mc, depth), v.iter().cloned().collect()).unwrap()
    }

    /// Exact minimizer of the training energy.
    pub fn dense_minimizer(&self) -> Array3<f64> {
        let (h, b) = self.normal_equations();
        let w = h.cholesky().expect("positive definite").solve(&b);
        self.unflatten(&w)
    }

    /// Gradient of the assembled quadratic, `H w - b`.
    pub fn gradient(&self, w: &Array3<f64>) -> Array3<f64> {
        let (h, b) = self.normal_equations();
        let v = DVector::from_iterator(w.len(), w.iter().cloned());
        self.unflatten(&(h * v - b))
    }
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn label_grid(rows: usize, cols: usize, sigma: f64) -> Array2<f64> {
    gaussian_label(rows, cols, sigma).unwrap().y
}

pub fn complex_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<Complex64> {
    (0..d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Dense Hermitian solve through nalgebra, independent of the library's
/// elimination.
pub fn hermitian_oracle(p: &BinProblem<'_>) -> Vec<Complex64> {
    use nalgebra::{DMatrix, DVector};
    let d = p.target.len();
    let x0 = DVector::from_column_slice(p.target);
    let mut a = &x0 * x0.adjoint();
    for (s, x) in p.context {
        let v = DVector::from_column_slice(x);
        a += &v * v.adjoint() * Complex64::new(s * s, 0.0);
    }
    a += DMatrix::identity(d, d) * Complex64::new(p.mu, 0.0);
    let rhs = DVector::from_iterator(
        d,
        (0..d).map(|i| p.label.conj() * p.target[i] - p.zeta[i] + p.w_hat[i] * p.mu),
    );
    a.cholesky().expect("positive definite").solve(&rhs).iter().cloned().collect()
}
