//! Per-frequency-bin solve of the auxiliary subproblem.
//!
//! For bin `n` the normal equations are
//! `(sum_p S_p^2 x_p x_p^H + mu I) g = conj(y) x_0 - zeta + mu w`
//! with `S_0 = 1`. The matrix is `mu I` plus at most `P + 1` rank-one
//! Hermitian terms, so it is inverted by successive Sherman-Morrison
//! updates starting from `(mu I)^-1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Strategy for the D x D per-bin systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinSolver {
    #[default]
    ShermanMorrison,
    /// Assembles the dense matrix and runs Gaussian elimination; O(D^3).
    /// Diagnostics only.
    Dense,
}

/// One bin's inputs. `context` pairs each patch score with its spectrum at
/// this bin.
#[derive(Debug, Clone, Copy)]
pub struct BinProblem<'a> {
    pub target: &'a [Complex64],
    pub context: &'a [(f64, &'a [Complex64])],
    pub label: Complex64,
    pub zeta: &'a [Complex64],
    pub w_hat: &'a [Complex64],
    pub mu: f64,
}

impl BinProblem<'_> {
    fn depth(&self) -> usize {
        self.target.len()
    }

    fn check(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty mu must be positive, got {}",
                self.mu
            )));
        }
        let d = self.depth();
        let shapes_ok = self.zeta.len() == d
            && self.w_hat.len() == d
            && self.context.iter().all(|(_, x)| x.len() == d);
        if !shapes_ok {
            return Err(Error::shape(&[d], &[self.zeta.len(), self.w_hat.len()]));
        }
        Ok(())
    }

    fn rhs(&self) -> Vec<Complex64> {
        let y = self.label.conj();
        self.target
            .iter()
            .zip(self.zeta)
            .zip(self.w_hat)
            .map(|((x, z), w)| y * x - z + w * self.mu)
            .collect()
    }
}

pub fn solve_g_bin(problem: &BinProblem<'_>, method: BinSolver) -> Result<Vec<Complex64>> {
    problem.check()?;
    let mut out = vec![Complex64::default(); problem.depth()];
    match method {
        BinSolver::ShermanMorrison => sherman_morrison(problem, &mut out),
        BinSolver::Dense => dense(problem, &mut out)?,
    }
    Ok(out)
}

/// Writes the solution into `out` without validating shapes; the caller
/// guarantees consistency.
pub(crate) fn solve_into(problem: &BinProblem<'_>, method: BinSolver, out: &mut [Complex64]) -> Result<()> {
    match method {
        BinSolver::ShermanMorrison => {
            sherman_morrison(problem, out);
            Ok(())
        }
        BinSolver::Dense => dense(problem, out),
    }
}

fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn sherman_morrison(problem: &BinProblem<'_>, out: &mut [Complex64]) {
    let inv_mu = 1.0 / problem.mu;
    // rank-one factors u_k, with the target first
    let mut factors: Vec<Vec<Complex64>> = Vec::with_capacity(problem.context.len() + 1);
    factors.push(problem.target.to_vec());
    for (score, x) in problem.context {
        if *score != 0.0 {
            factors.push(x.iter().map(|v| v * *score).collect());
        }
    }

    // z = A_k^-1 rhs; pending[j] = A_k^-1 u_j for factors not yet folded in
    for (slot, r) in out.iter_mut().zip(problem.rhs()) {
        *slot = r * inv_mu;
    }
    let mut pending: Vec<Vec<Complex64>> = factors
        .iter()
        .map(|u| u.iter().map(|v| v * inv_mu).collect())
        .collect();

    for k in 0..factors.len() {
        let (head, tail) = pending.split_at_mut(k + 1);
        let v = &head[k];
        let u = &factors[k];
        let denom = 1.0 + dot_h(u, v).re;
        let coef = dot_h(u, out) / denom;
        for (o, vi) in out.iter_mut().zip(v) {
            *o -= vi * coef;
        }
        for other in tail.iter_mut() {
            let c = dot_h(u, other) / denom;
            for (o, vi) in other.iter_mut().zip(v) {
                *o -= vi * c;
            }
        }
    }
}

fn dense(problem: &BinProblem<'_>, out: &mut [Complex64]) -> Result<()> {
    let d = problem.depth();
    let mut a = vec![Complex64::default(); d * d];
    let mut add_outer = |u: &[Complex64], weight: f64| {
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] += u[i] * u[j].conj() * weight;
            }
        }
    };
    add_outer(problem.target, 1.0);
    for (score, x) in problem.context {
        add_outer(x, score * score);
    }
    for i in 0..d {
        a[i * d + i] += problem.mu;
    }
    let mut b = problem.rhs();

    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i * d + col].norm().total_cmp(&a[j * d + col].norm()))
            .unwrap_or(col);
        if a[pivot * d + col].norm() == 0.0 {
            return Err(Error::NonFinite("singular bin system"));
        }
        if pivot != col {
            for j in 0..d {
                a.swap(pivot * d + j, col * d + j);
            }
            b.swap(pivot, col);
        }
        let inv = a[col * d + col].inv();
        for row in col + 1..d {
            let factor = a[row * d + col] * inv;
            if factor == Complex64::default() {
                continue;
            }
            for j in col..d {
                let v = a[col * d + j];
                a[row * d + j] -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    for row in (0..d).rev() {
        let mut acc = b[row];
        for j in row + 1..d {
            acc -= a[row * d + j] * out[j];
        }
        out[row] = acc / a[row * d + row];
    }
    Ok(())
}
