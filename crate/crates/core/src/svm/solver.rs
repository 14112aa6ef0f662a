//! Pairwise coordinate ascent on the L2 soft-margin dual.
//!
//! With squared slack the dual is the hard-margin dual on the ridge-shifted
//! Gram matrix `K~ = K + I/C`:
//!
//! ```text
//! maximize   sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K~_ij
//! subject to a_i >= 0,  sum_i a_i y_i = 0
//! ```
//!
//! Internally the solver minimizes `f(a) = 1/2 a'Qa - e'a` with
//! `Q_ij = y_i y_j K~_ij` and keeps the gradient `G = Qa - e` up to date.
//! Each step picks the maximal violating pair (second-order choice of the
//! partner) and solves the two-variable subproblem exactly, clipping at zero.
//! There is no upper bound on `a`: the ridge replaces the box constraint.

use super::kernel::SymMatrix;
use crate::scalar::Scalar;

/// Result of one dual solve, kept whole for inspection.
#[derive(Debug, Clone)]
pub struct DualSolution<F> {
    pub alpha: Vec<F>,
    pub bias: F,
    /// Dual objective after every accepted pair update (first entry: start point).
    pub objective: Vec<F>,
    pub updates: usize,
    /// `ceil(updates / n)`: sweeps of `n` pair updates.
    pub sweeps: usize,
    pub converged: bool,
    /// Maximal violating-pair gap at exit.
    pub gap: F,
    /// Largest KKT residual at exit, see [`kkt_violation`].
    pub kkt_residual: F,
    /// Threshold separating support vectors from numerically-zero multipliers.
    pub support_threshold: F,
}

impl<F: Scalar> DualSolution<F> {
    /// Indices whose multiplier exceeds the support threshold.
    pub fn support(&self) -> Vec<usize> {
        let strict: Vec<usize> = (0..self.alpha.len())
            .filter(|&i| self.alpha[i] > self.support_threshold)
            .collect();
        if strict.is_empty() {
            (0..self.alpha.len())
                .filter(|&i| self.alpha[i] > F::zero())
                .collect()
        } else {
            strict
        }
    }
}

/// Dual objective `sum a - 1/2 a'Qa` evaluated directly.
pub fn dual_objective<F: Scalar>(gram: &SymMatrix<F>, y: &[i8], alpha: &[F]) -> F {
    let n = alpha.len();
    let mut quad = F::zero();
    for i in 0..n {
        if alpha[i] == F::zero() {
            continue;
        }
        for j in 0..n {
            let yy = if y[i] == y[j] { F::one() } else { -F::one() };
            quad = quad + alpha[i] * alpha[j] * yy * gram.get(i, j);
        }
    }
    alpha.iter().fold(F::zero(), |a, &b| a + b) - quad / F::from_f64_lossy(2.0)
}

/// Multipliers at or below this are numerically zero: `sqrt(eps)` times the
/// largest one. Relative, because polynomial kernels on many features give
/// large Gram entries and correspondingly small multipliers.
pub fn support_threshold<F: Scalar>(alpha: &[F]) -> F {
    let amax = alpha.iter().fold(F::zero(), |m, &a| m.max(a));
    amax * F::epsilon().sqrt()
}

/// KKT violation of point `i` given its margin term
/// `r = y_i D(x_i) - 1 + a_i / C`: `|r|` for support vectors (multiplier above
/// `threshold`), `max(0, -r)` otherwise.
pub fn kkt_violation<F: Scalar>(r: F, alpha: F, threshold: F) -> F {
    if alpha > threshold {
        r.abs()
    } else {
        (-r).max(F::zero())
    }
}

#[inline]
fn sign<F: Scalar>(y: i8) -> F {
    if y > 0 {
        F::one()
    } else {
        -F::one()
    }
}

/// Solves the dual on a precomputed ridge-shifted Gram matrix.
///
/// `max_sweeps * n` pair updates at most; stops early once the maximal
/// violating-pair gap is at most `tol`.
pub fn solve<F: Scalar>(gram: &SymMatrix<F>, y: &[i8], max_sweeps: usize, tol: F) -> DualSolution<F> {
    let n = y.len();
    assert_eq!(gram.n(), n);
    let two = F::from_f64_lossy(2.0);
    let tiny = F::from_f64_lossy(1e-12);
    let ys: Vec<F> = y.iter().map(|&v| sign(v)).collect();
    let mut alpha = vec![F::zero(); n];
    let mut grad = vec![-F::one(); n];
    let mut objective = vec![F::zero()];
    let max_updates = max_sweeps.saturating_mul(n);
    let mut updates = 0usize;

    let in_up = |t: usize, a: &[F]| y[t] > 0 || a[t] > F::zero();
    let in_low = |t: usize, a: &[F]| y[t] < 0 || a[t] > F::zero();

    let (converged, gap) = loop {
        let mut m_up = F::neg_infinity();
        let mut i_sel = usize::MAX;
        let mut m_low = F::infinity();
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if in_up(t, &alpha) && v > m_up {
                m_up = v;
                i_sel = t;
            }
            if in_low(t, &alpha) && v < m_low {
                m_low = v;
            }
        }
        let gap = m_up - m_low;
        if gap <= tol {
            break (true, gap);
        }
        if updates >= max_updates {
            break (false, gap);
        }

        let i = i_sel;
        let kii = gram.get(i, i);
        let mut j_sel = usize::MAX;
        let mut best = F::infinity();
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let b = m_up + ys[t] * grad[t];
            if b > F::zero() {
                let mut a = kii + gram.get(t, t) - two * gram.get(i, t);
                if a <= F::zero() {
                    a = tiny;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX {
            break (false, gap);
        }
        let j = j_sel;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = gram.get(i, j);
        let mut quad = kii + gram.get(j, j) - two * kij;
        if quad <= F::zero() {
            quad = tiny;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > F::zero() {
                if alpha[j] < F::zero() {
                    alpha[j] = F::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = -diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if alpha[j] < F::zero() {
                alpha[j] = F::zero();
                alpha[i] = sum;
            }
            if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            let qti = ys[t] * ys[i] * gram.get(t, i);
            let qtj = ys[t] * ys[j] * gram.get(t, j);
            grad[t] = grad[t] + qti * di + qtj * dj;
        }
        updates += 1;

        // -f(a) = -1/2 sum a_t (G_t - 1)
        let f = alpha
            .iter()
            .zip(&grad)
            .fold(F::zero(), |acc, (&a, &g)| acc + a * (g - F::one()))
            / two;
        objective.push(-f);
    };

    // bias: mean over support vectors of y_i - sum_j a_j y_j K~_ij = -y_i G_i
    let mut sol = DualSolution {
        alpha,
        bias: F::zero(),
        objective,
        updates,
        sweeps: if n == 0 { 0 } else { updates.div_ceil(n) },
        converged,
        gap,
        kkt_residual: F::zero(),
        support_threshold: F::zero(),
    };
    sol.support_threshold = support_threshold(&sol.alpha);
    let support = sol.support();
    if !support.is_empty() {
        let total = support
            .iter()
            .fold(F::zero(), |acc, &t| acc - ys[t] * grad[t]);
        sol.bias = total / F::from_usize_lossy(support.len());
    }
    // y_i D(x_i) - 1 + a_i / C == G_i + y_i b
    sol.kkt_residual = (0..n)
        .map(|t| kkt_violation(grad[t] + ys[t] * sol.bias, sol.alpha[t], sol.support_threshold))
        .fold(F::zero(), F::max);
    sol
}
