//! ADMM training of the keyfilter-regularized, context-aware correlation
//! filter.
//!
//! The objective over the target-sized filter `w` (M cells x D channels) is
//!
//! ```text
//! E(w) = 1/2 ||y - sum_d x_0^d * pad(w^d)||^2 + lambda/2 ||w||^2
//!      + 1/2 sum_p S_p^2 ||sum_d x_p^d * pad(w^d)||^2
//!      + gamma/2 ||w - w_key||^2
//! ```
//!
//! where `*` is circular correlation over the full N-cell search grid and
//! `pad` zero-pads the M-cell window into that grid. ADMM splits it into a
//! frequency-domain auxiliary `g_hat`, constrained to equal
//! `w_hat = sqrt(N) * fft2(pad(w))`, and a multiplier `zeta_hat`.
//!
//! Scaling: with the unitary transform of [`crate::dsp`], a spatial quantity
//! `v` corresponds to the spectrum `sqrt(N) * fft2(v)`, and back via
//! `ifft2(.) / sqrt(N)`. Under that pairing the closed-form `w` update is
//! exactly `(mu + (lambda + gamma)/N)^-1 (mu g + zeta + gamma/N w_key)`.

mod bin;

use ndarray::{s, Array2, Array3, ArrayView3, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::context::ContextPatchSet;
use crate::dsp::{fft2_real, Fft2, Label};
use crate::error::{Error, Result};
use crate::features::FeatureMap;

pub use bin::{solve_g_bin, BinProblem, BinSolver};

pub type Spectrum = Array3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub lambda: f64,
    pub gamma: f64,
    pub mu0: f64,
    pub beta: f64,
    pub mu_max: f64,
    pub admm_iters: usize,
    pub bin_solver: BinSolver,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            lambda: 1e-3,
            gamma: 10.0,
            mu0: 1.0,
            beta: 10.0,
            mu_max: 1e3,
            admm_iters: 2,
            bin_solver: BinSolver::ShermanMorrison,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [self.lambda, self.gamma, self.mu0, self.beta, self.mu_max];
        if scalars.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!("solver parameters must be non-negative: {self:?}")));
        }
        if self.mu0 <= 0.0 || self.mu_max <= 0.0 {
            return Err(Error::InvalidParameter("penalty mu must be positive".into()));
        }
        if self.admm_iters == 0 {
            return Err(Error::InvalidParameter("admm_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Centered selection of an M-cell window out of the N-cell grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropOperator {
    pub full: (usize, usize),
    pub cropped: (usize, usize),
    pub offset: (usize, usize),
}

impl CropOperator {
    pub fn centered(full: (usize, usize), cropped: (usize, usize)) -> Result<Self> {
        if cropped.0 == 0 || cropped.1 == 0 || cropped.0 > full.0 || cropped.1 > full.1 {
            return Err(Error::InvalidParameter(format!(
                "crop window {cropped:?} does not fit grid {full:?}"
            )));
        }
        Ok(CropOperator {
            full,
            cropped,
            offset: ((full.0 - cropped.0) / 2, (full.1 - cropped.1) / 2),
        })
    }

    pub fn identity(full: (usize, usize)) -> Self {
        CropOperator {
            full,
            cropped: full,
            offset: (0, 0),
        }
    }

    /// N
    pub fn full_len(&self) -> usize {
        self.full.0 * self.full.1
    }

    /// M
    pub fn cropped_len(&self) -> usize {
        self.cropped.0 * self.cropped.1
    }

    fn window(&self) -> ndarray::SliceInfo<[ndarray::SliceInfoElem; 3], ndarray::Ix3, ndarray::Ix3> {
        let (r0, c0) = self.offset;
        s![r0..r0 + self.cropped.0, c0..c0 + self.cropped.1, ..]
    }

    pub fn crop<T: Clone>(&self, full: ArrayView3<T>) -> Array3<T> {
        full.slice(self.window()).to_owned()
    }

    pub fn pad<T: Clone + Default>(&self, cropped: ArrayView3<T>) -> Array3<T> {
        let depth = cropped.dim().2;
        let mut out = Array3::from_elem((self.full.0, self.full.1, depth), T::default());
        out.slice_mut(self.window()).assign(&cropped);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    /// Spatial filter, `(M_rows, M_cols, D)`.
    pub w: Array3<f64>,
    /// Frequency auxiliary, `(N_rows, N_cols, D)`.
    pub g_hat: Spectrum,
    pub zeta_hat: Spectrum,
    pub mu: f64,
    /// `||g_hat - w_hat||` after each iteration.
    pub residuals: Vec<f64>,
}

impl FilterState {
    /// Relative constraint gap `||g_hat - w_hat|| / ||g_hat||`.
    pub fn constraint_gap(&self, crop: &CropOperator) -> f64 {
        let w_hat = filter_spectrum(&crop.pad(self.w.view()));
        let num: f64 = Zip::from(&self.g_hat)
            .and(&w_hat)
            .fold(0.0, |acc, a, b| acc + (a - b).norm_sqr());
        let den: f64 = self.g_hat.iter().map(|v| v.norm_sqr()).sum();
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// Per-channel unitary spectrum of a real `(rows, cols, D)` tensor.
pub fn spectrum(data: &Array3<f64>) -> Spectrum {
    let (r, c, d) = data.dim();
    let plan = Fft2::plan(r, c);
    let mut out = Array3::zeros((r, c, d));
    let mut buf = Array2::zeros((r, c));
    for ch in 0..d {
        buf.zip_mut_with(&data.index_axis(Axis(2), ch), |b, &v| *b = Complex64::new(v, 0.0));
        plan.forward(&mut buf);
        out.index_axis_mut(Axis(2), ch).assign(&buf);
    }
    out
}

/// Spectrum of a spatial filter under the solver's scaling, `sqrt(N) * fft2`.
pub fn filter_spectrum(padded: &Array3<f64>) -> Spectrum {
    let (r, c, _) = padded.dim();
    let root_n = ((r * c) as f64).sqrt();
    let mut out = spectrum(padded);
    out.mapv_inplace(|v| v * root_n);
    out
}

/// Inverse of [`filter_spectrum`], complex-valued: `ifft2(.) / sqrt(N)`.
pub fn spatial_from_spectrum(spec: &Spectrum) -> Array3<Complex64> {
    let (r, c, d) = spec.dim();
    let plan = Fft2::plan(r, c);
    let inv_root_n = 1.0 / ((r * c) as f64).sqrt();
    let mut out = Array3::zeros((r, c, d));
    let mut buf = Array2::zeros((r, c));
    for ch in 0..d {
        buf.assign(&spec.index_axis(Axis(2), ch));
        plan.inverse(&mut buf);
        buf.mapv_inplace(|v| v * inv_root_n);
        out.index_axis_mut(Axis(2), ch).assign(&buf);
    }
    out
}

/// Scalar form of the spatial-filter update.
pub fn w_update(mu: f64, lambda: f64, gamma: f64, n: f64, g: f64, zeta: f64, w_key: f64) -> f64 {
    (mu * g + zeta + gamma / n * w_key) / (mu + (lambda + gamma) / n)
}

/// Spatial-filter subproblem. `g_hat` and `zeta_hat` are brought back to the
/// spatial domain and cropped before the elementwise closed form. Without a
/// keyfilter the gamma term is dropped.
pub fn solve_w(
    g_hat: &Spectrum,
    zeta_hat: &Spectrum,
    keyfilter: Option<&Array3<f64>>,
    params: &SolverParams,
    mu: f64,
    crop: &CropOperator,
) -> Result<Array3<f64>> {
    if g_hat.dim() != zeta_hat.dim() {
        let (a, b) = (g_hat.dim(), zeta_hat.dim());
        return Err(Error::shape(&[a.0, a.1, a.2], &[b.0, b.1, b.2]));
    }
    let depth = g_hat.dim().2;
    if let Some(key) = keyfilter {
        let expected = (crop.cropped.0, crop.cropped.1, depth);
        if key.dim() != expected {
            let k = key.dim();
            return Err(Error::shape(&[expected.0, expected.1, expected.2], &[k.0, k.1, k.2]));
        }
    }
    let n = crop.full_len() as f64;
    let g = crop.crop(spatial_from_spectrum(g_hat).view());
    let zeta = crop.crop(spatial_from_spectrum(zeta_hat).view());
    let gamma = if keyfilter.is_some() { params.gamma } else { 0.0 };
    let mut w = Array3::zeros(g.dim());
    match keyfilter {
        Some(key) => Zip::from(&mut w).and(&g).and(&zeta).and(key).for_each(|w, g, z, k| {
            *w = w_update(mu, params.lambda, gamma, n, g.re, z.re, *k);
        }),
        None => Zip::from(&mut w).and(&g).and(&zeta).for_each(|w, g, z| {
            *w = w_update(mu, params.lambda, 0.0, n, g.re, z.re, 0.0);
        }),
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spatial filter update"));
    }
    Ok(w)
}

/// `zeta_hat + mu (g_hat - w_hat)`.
pub fn update_multiplier(zeta_hat: &Spectrum, g_hat: &Spectrum, w_hat: &Spectrum, mu: f64) -> Result<Spectrum> {
    if zeta_hat.dim() != g_hat.dim() || g_hat.dim() != w_hat.dim() {
        let (a, b) = (g_hat.dim(), w_hat.dim());
        return Err(Error::shape(&[a.0, a.1, a.2], &[b.0, b.1, b.2]));
    }
    let mut out = zeta_hat.clone();
    Zip::from(&mut out)
        .and(g_hat)
        .and(w_hat)
        .for_each(|z, g, w| *z += (g - w) * mu);
    Ok(out)
}

/// Auxiliary subproblem over all N bins, in parallel.
fn solve_g(
    target: &Spectrum,
    context: &[(f64, Spectrum)],
    label: &Array2<Complex64>,
    zeta_hat: &Spectrum,
    w_hat: &Spectrum,
    mu: f64,
    method: BinSolver,
) -> Result<Spectrum> {
    let (r, c, d) = target.dim();
    let x0 = target.as_slice().expect("standard layout");
    let zeta = zeta_hat.as_slice().expect("standard layout");
    let wh = w_hat.as_slice().expect("standard layout");
    let ctx: Vec<(f64, &[Complex64])> = context
        .iter()
        .map(|(s, x)| (*s, x.as_slice().expect("standard layout")))
        .collect();
    let labels = label.as_slice().expect("standard layout");

    let mut out = vec![Complex64::default(); r * c * d];
    out.par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(n, slot)| {
            let range = n * d..(n + 1) * d;
            let bin_ctx: Vec<(f64, &[Complex64])> =
                ctx.iter().map(|(s, x)| (*s, &x[range.clone()])).collect();
            let problem = BinProblem {
                target: &x0[range.clone()],
                context: &bin_ctx,
                label: labels[n],
                zeta: &zeta[range.clone()],
                w_hat: &wh[range],
                mu,
            };
            bin::solve_into(&problem, method, slot)
        })?;
    Ok(Array3::from_shape_vec((r, c, d), out).expect("shape matches"))
}

/// Runs `params.admm_iters` ADMM rounds from a zero start and returns the
/// final state. `keyfilter` is the `(M_rows, M_cols, D)` spatial keyfilter;
/// `None` disables the gamma term.
pub fn train_filter(
    target: &FeatureMap,
    context: &ContextPatchSet,
    label: &Label,
    keyfilter: Option<&Array3<f64>>,
    params: &SolverParams,
    crop: &CropOperator,
) -> Result<FilterState> {
    params.validate()?;
    let (r, c, d) = target.data.dim();
    if (r, c) != crop.full {
        return Err(Error::shape(&[crop.full.0, crop.full.1], &[r, c]));
    }
    if label.dim() != (r, c) {
        return Err(Error::shape(&[r, c], &[label.dim().0, label.dim().1]));
    }
    for p in &context.patches {
        if p.features.data.dim() != target.data.dim() {
            let q = p.features.data.dim();
            return Err(Error::shape(&[r, c, d], &[q.0, q.1, q.2]));
        }
    }
    if target.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target features"));
    }

    let x0 = spectrum(&target.data);
    let ctx: Vec<(f64, Spectrum)> = context
        .patches
        .iter()
        .filter(|p| p.score != 0.0)
        .map(|p| (p.score, spectrum(&p.features.data)))
        .collect();
    let y_hat = fft2_real(label.y.view());

    let mut g_hat = Spectrum::zeros((r, c, d));
    let mut zeta_hat = Spectrum::zeros((r, c, d));
    let mut w_hat = Spectrum::zeros((r, c, d));
    let mut w = Array3::zeros((crop.cropped.0, crop.cropped.1, d));
    let mut mu = params.mu0;
    let mut residuals = Vec::with_capacity(params.admm_iters);

    for _ in 0..params.admm_iters {
        g_hat = solve_g(&x0, &ctx, &y_hat, &zeta_hat, &w_hat, mu, params.bin_solver)?;
        w = solve_w(&g_hat, &zeta_hat, keyfilter, params, mu, crop)?;
        w_hat = filter_spectrum(&crop.pad(w.view()));
        zeta_hat = update_multiplier(&zeta_hat, &g_hat, &w_hat, mu)?;
        let res: f64 = Zip::from(&g_hat)
            .and(&w_hat)
            .fold(0.0, |acc, a, b| acc + (a - b).norm_sqr());
        residuals.push(res.sqrt());
        mu = (params.beta * mu).min(params.mu_max);
    }

    Ok(FilterState {
        w,
        g_hat,
        zeta_hat,
        mu,
        residuals,
    })
}

/// Correlation response of a filter spectrum over a feature map:
/// `ifft2(sum_d conj(g_hat^d) * fft2(x^d))`, real part.
pub fn response(g_hat: &Spectrum, features: &Array3<f64>) -> Result<Array2<f64>> {
    if g_hat.dim() != features.dim() {
        let (a, b) = (g_hat.dim(), features.dim());
        return Err(Error::shape(&[a.0, a.1, a.2], &[b.0, b.1, b.2]));
    }
    let x_hat = spectrum(features);
    let (r, c, _) = x_hat.dim();
    let mut acc = Array2::from_shape_fn((r, c), |(i, j)| {
        g_hat
            .slice(s![i, j, ..])
            .iter()
            .zip(x_hat.slice(s![i, j, ..]).iter())
            .map(|(g, x)| g.conj() * x)
            .sum::<Complex64>()
    });
    Fft2::plan(r, c).inverse(&mut acc);
    Ok(acc.mapv(|v| v.re))
}

/// Inputs to [`evaluate_objective`].
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveInputs<'a> {
    pub target: &'a Array3<f64>,
    /// `(S_p, x_p)` pairs.
    pub context: &'a [(f64, &'a Array3<f64>)],
    pub label: &'a Array2<f64>,
    pub keyfilter: Option<&'a Array3<f64>>,
    pub lambda: f64,
    pub gamma: f64,
    pub crop: &'a CropOperator,
}

/// Direct spatial-domain evaluation of the training energy (no transforms).
pub fn evaluate_objective(w: &Array3<f64>, inputs: &ObjectiveInputs<'_>) -> Result<f64> {
    let crop = inputs.crop;
    let (r, c, d) = inputs.target.dim();
    if (r, c) != crop.full || inputs.label.dim() != (r, c) {
        return Err(Error::shape(&[crop.full.0, crop.full.1], &[r, c]));
    }
    if w.dim() != (crop.cropped.0, crop.cropped.1, d) {
        let q = w.dim();
        return Err(Error::shape(&[crop.cropped.0, crop.cropped.1, d], &[q.0, q.1, q.2]));
    }
    for (_, x) in inputs.context {
        if x.dim() != inputs.target.dim() {
            let q = x.dim();
            return Err(Error::shape(&[r, c, d], &[q.0, q.1, q.2]));
        }
    }

    let direct = |x: &Array3<f64>| -> Array2<f64> {
        let (mr, mc) = crop.cropped;
        let (or, oc) = crop.offset;
        Array2::from_shape_fn((r, c), |(tr, tc)| {
            let mut acc = 0.0;
            for i in 0..mr {
                let xr = (or + i + tr) % r;
                for j in 0..mc {
                    let xc = (oc + j + tc) % c;
                    for ch in 0..d {
                        acc += w[[i, j, ch]] * x[[xr, xc, ch]];
                    }
                }
            }
            acc
        })
    };

    let fit = direct(inputs.target);
    let mut energy = 0.5
        * fit
            .iter()
            .zip(inputs.label.iter())
            .map(|(a, y)| (y - a) * (y - a))
            .sum::<f64>();
    energy += 0.5 * inputs.lambda * w.iter().map(|v| v * v).sum::<f64>();
    for (score, x) in inputs.context {
        let resp = direct(x);
        energy += 0.5 * score * score * resp.iter().map(|v| v * v).sum::<f64>();
    }
    if let Some(key) = inputs.keyfilter {
        if key.dim() != w.dim() {
            let q = key.dim();
            return Err(Error::shape(&[w.dim().0, w.dim().1, d], &[q.0, q.1, q.2]));
        }
        energy += 0.5
            * inputs.gamma
            * w.iter().zip(key.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(energy)
}
