//! Frequency-domain primitives shared by every stage of the tracker.
//!
//! All transforms are unitary: both the forward and the inverse 2-D DFT
//! carry a `1/sqrt(N)` factor, so Parseval holds without extra scaling and
//! `ifft2(fft2(x)) == x`. The correlation theorem under this convention reads
//! `fft2(circular_correlate(a, b)) = sqrt(N) * fft2(a) * conj(fft2(b))`.
//! Modules that need the unnormalized spectrum multiply by `sqrt(N)`
//! explicitly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// Cached row/column plans for a fixed grid size.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Fft2 {
    /// Returns the shared plan for `rows x cols`, creating it on first use.
    pub fn plan(rows: usize, cols: usize) -> Arc<Fft2> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Fft2>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((rows, cols))
            .or_insert_with(|| Arc::new(Fft2::new(rows, cols)))
            .clone()
    }

    fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty grid");
        let mut planner = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft(cols, FftDirection::Forward),
            row_inv: planner.plan_fft(cols, FftDirection::Inverse),
            col_fwd: planner.plan_fft(rows, FftDirection::Forward),
            col_inv: planner.plan_fft(rows, FftDirection::Inverse),
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&self, grid: &mut Array2<Complex64>) {
        self.run(grid, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, grid: &mut Array2<Complex64>) {
        self.run(grid, &self.row_inv, &self.col_inv);
    }

    fn run(&self, grid: &mut Array2<Complex64>, row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(grid.dim(), (self.rows, self.cols), "grid does not match plan");
        let mut buf = vec![Complex64::default(); self.rows.max(self.cols)];
        for mut lane in grid.lanes_mut(Axis(1)) {
            let line = &mut buf[..self.cols];
            for (dst, src) in line.iter_mut().zip(lane.iter()) {
                *dst = *src;
            }
            row.process(line);
            for (dst, src) in lane.iter_mut().zip(line.iter()) {
                *dst = *src;
            }
        }
        for mut lane in grid.lanes_mut(Axis(0)) {
            let line = &mut buf[..self.rows];
            for (dst, src) in line.iter_mut().zip(lane.iter()) {
                *dst = *src;
            }
            col.process(line);
            for (dst, src) in lane.iter_mut().zip(line.iter()) {
                *dst = *src * self.scale;
            }
        }
    }
}

pub fn fft2(grid: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = grid.clone();
    let (r, c) = grid.dim();
    Fft2::plan(r, c).forward(&mut out);
    out
}

pub fn ifft2(grid: &Array2<Complex64>) -> Array2<Complex64> {
    let mut out = grid.clone();
    let (r, c) = grid.dim();
    Fft2::plan(r, c).inverse(&mut out);
    out
}

pub fn fft2_real(grid: ArrayView2<f64>) -> Array2<Complex64> {
    let mut out = grid.mapv(|v| Complex64::new(v, 0.0));
    let (r, c) = grid.dim();
    Fft2::plan(r, c).forward(&mut out);
    out
}

/// Circular cross-correlation of `signal` against `template`:
/// `out[t] = sum_n signal[n + t] * conj(template[n])`, indices taken modulo
/// the grid size. Computed through the frequency domain.
pub fn circular_correlate(
    signal: &Array2<Complex64>,
    template: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    if signal.dim() != template.dim() {
        let (a, b) = (signal.dim(), template.dim());
        return Err(Error::shape(&[a.0, a.1], &[b.0, b.1]));
    }
    let (r, c) = signal.dim();
    let plan = Fft2::plan(r, c);
    let mut s = signal.clone();
    let mut t = template.clone();
    plan.forward(&mut s);
    plan.forward(&mut t);
    let root_n = ((r * c) as f64).sqrt();
    s.zip_mut_with(&t, |a, b| *a = *a * b.conj() * root_n);
    plan.inverse(&mut s);
    Ok(s)
}

/// Separable raised-cosine window, zero on the border ring.
/// A side of length 1 is defined as 1 so degenerate grids are not erased.
pub fn hann_window(rows: usize, cols: usize) -> Array2<f64> {
    let col_w = hann_1d(cols);
    let row_w = hann_1d(rows);
    Array2::from_shape_fn((rows, cols), |(r, c)| row_w[r] * col_w[c])
}

fn hann_1d(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
        .collect()
}

/// Desired correlation response: a Gaussian bump whose peak sits at (0,0).
#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub y: Array2<f64>,
    pub peak: (usize, usize),
    pub sigma: f64,
}

impl Label {
    pub fn dim(&self) -> (usize, usize) {
        self.y.dim()
    }
}

pub fn gaussian_label(rows: usize, cols: usize, sigma: f64) -> Result<Label> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "label sigma must be positive, got {sigma}"
        )));
    }
    let (r0, c0) = (rows / 2, cols / 2);
    let denom = 2.0 * sigma * sigma;
    // Centered bump, then rolled by (-r0, -c0) so the peak lands on (0,0).
    let y = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let src_r = ((r + r0) % rows) as f64 - r0 as f64;
        let src_c = ((c + c0) % cols) as f64 - c0 as f64;
        (-(src_r * src_r + src_c * src_c) / denom).exp()
    });
    Ok(Label {
        y,
        peak: (0, 0),
        sigma,
    })
}
