//! Bounded limited-memory quasi-Newton minimizer for the small dense
//! per-coefficient problems (dimension m2 + m3, typically 6).
//!
//! Direction: two-loop L-BFGS recursion on the gradient with bound-active
//! components masked out (gradient projection). Line search: backtracking
//! Armijo with projection onto the box after every trial step. At these
//! dimensions the memory default of 8 pairs effectively gives full BFGS.

use alloc::vec;
use alloc::vec::Vec;

// std's inherent float methods shadow this trait when dev-deps link std
#[allow(unused_imports)]
use crate::num::F64Ext;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum OptimError {
    #[error("objective returned a non-finite value or gradient at a feasible point")]
    NonFiniteObjective,
    #[error("bounds are invalid: {0}")]
    InvalidBounds(&'static str),
}

/// Componentwise box; infinities mean unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimError> {
        if lower.len() != upper.len() {
            return Err(OptimError::InvalidBounds("lower/upper lengths differ"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if l.is_nan() || u.is_nan() {
                return Err(OptimError::InvalidBounds("bounds must not be NaN"));
            }
            if l > u {
                return Err(OptimError::InvalidBounds("lower bound above upper bound"));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// Symmetric box `[-half_width, +half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((xi, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(l, u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((&xi, &l), &u)| xi >= l && xi <= u)
    }
}

/// Objective value and gradient at a point.
#[derive(Clone, Debug)]
pub struct ObjectiveEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the projected gradient.
    pub grad_tol: f64,
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Also stop once an accepted step decreases the objective by less than
    /// `f_tol_rel * (1 + |f|)`; progress below that is floating-point noise
    /// and would otherwise burn the whole iteration budget on dead line
    /// searches.
    pub f_tol_rel: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            grad_tol: 1e-6,
            memory: 8,
            f_tol_rel: 1e-14,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinimizeStatus {
    /// Projected gradient below tolerance.
    Converged,
    /// Iteration cap reached.
    IterationLimit,
    /// No acceptable step found; best iterate returned.
    LineSearchFailure,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub status: MinimizeStatus,
    pub iterations: usize,
    pub evaluations: usize,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-18;
const CURVATURE_SKIP: f64 = 1e-10;

/// Infinity norm of `x - P(x - g)`: zero exactly at a KKT point of the box.
fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &BoxBounds) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let stepped = (x[i] - g[i]).clamp(bounds.lower()[i], bounds.upper()[i]);
        worst = worst.max((x[i] - stepped).abs());
    }
    worst
}

/// Minimizes `f` inside `bounds` starting from `x0` (clamped if outside).
/// Every iterate, including the result, is feasible; accepted steps never
/// increase the objective.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    bounds: &BoxBounds,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult, OptimError>
where
    F: FnMut(&[f64]) -> ObjectiveEvaluation,
{
    let dim = x0.len();
    assert_eq!(bounds.dim(), dim, "bounds dimension mismatch");
    let mut x = x0.to_vec();
    bounds.project(&mut x);

    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], n: &mut usize| -> Result<ObjectiveEvaluation, OptimError> {
        *n += 1;
        let e = f(x);
        if !e.value.is_finite() || e.gradient.len() != x.len() {
            return Err(OptimError::NonFiniteObjective);
        }
        if e.gradient.iter().any(|g| !g.is_finite()) {
            return Err(OptimError::NonFiniteObjective);
        }
        Ok(e)
    };

    let mut cur = eval(&x, &mut evaluations)?;
    let mut s_store: Vec<Vec<f64>> = Vec::new();
    let mut y_store: Vec<Vec<f64>> = Vec::new();
    let mut rho_store: Vec<f64> = Vec::new();
    let mut status = MinimizeStatus::IterationLimit;
    let mut iterations = 0usize;

    for iter in 0..opts.max_iters {
        iterations = iter;
        if projected_gradient_norm(&x, &cur.gradient, bounds) <= opts.grad_tol {
            status = MinimizeStatus::Converged;
            break;
        }

        // mask components pinned at an active bound
        let mut active = vec![false; dim];
        let mut masked = cur.gradient.clone();
        for i in 0..dim {
            let at_lower = x[i] <= bounds.lower()[i] && cur.gradient[i] > 0.0;
            let at_upper = x[i] >= bounds.upper()[i] && cur.gradient[i] < 0.0;
            if at_lower || at_upper {
                masked[i] = 0.0;
                active[i] = true;
            }
        }

        // two-loop recursion on the masked gradient
        let mut d: Vec<f64> = masked.iter().map(|g| -g).collect();
        if !s_store.is_empty() {
            let m = s_store.len();
            let mut alpha = vec![0.0; m];
            for i in (0..m).rev() {
                let a = rho_store[i]
                    * s_store[i]
                        .iter()
                        .zip(&d)
                        .map(|(s, q)| s * q)
                        .sum::<f64>();
                alpha[i] = a;
                for (qj, yj) in d.iter_mut().zip(&y_store[i]) {
                    *qj -= a * yj;
                }
            }
            let last = m - 1;
            let sy: f64 = s_store[last]
                .iter()
                .zip(&y_store[last])
                .map(|(s, y)| s * y)
                .sum();
            let yy: f64 = y_store[last].iter().map(|y| y * y).sum();
            if yy > 0.0 {
                let gamma = sy / yy;
                for qj in d.iter_mut() {
                    *qj *= gamma;
                }
            }
            for i in 0..m {
                let b = rho_store[i]
                    * y_store[i]
                        .iter()
                        .zip(&d)
                        .map(|(y, q)| y * q)
                        .sum::<f64>();
                for (qj, sj) in d.iter_mut().zip(&s_store[i]) {
                    *qj += (alpha[i] - b) * sj;
                }
            }
        }
        for i in 0..dim {
            if active[i] {
                d[i] = 0.0;
            }
        }
        // fall back to steepest feasible descent if the direction is bad
        let descent: f64 = d.iter().zip(&cur.gradient).map(|(di, gi)| di * gi).sum();
        if !(descent < 0.0) {
            d = masked.iter().map(|g| -g).collect();
        }

        // projected backtracking line search
        let mut step = 1.0f64;
        let mut accepted = None;
        while step > MIN_STEP {
            let mut xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            bounds.project(&mut xt);
            let moved: f64 = xt
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved == 0.0 {
                break;
            }
            let et = eval(&xt, &mut evaluations)?;
            let directional: f64 = cur
                .gradient
                .iter()
                .zip(&xt)
                .zip(&x)
                .map(|((g, a), b)| g * (a - b))
                .sum();
            if et.value <= cur.value + ARMIJO_C1 * directional && et.value <= cur.value {
                accepted = Some((xt, et));
                break;
            }
            step *= 0.5;
        }

        let Some((xt, et)) = accepted else {
            status = MinimizeStatus::LineSearchFailure;
            break;
        };
        let flat = (cur.value - et.value) <= opts.f_tol_rel * (1.0 + cur.value.abs());

        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = et
            .gradient
            .iter()
            .zip(&cur.gradient)
            .map(|(a, b)| a - b)
            .collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > CURVATURE_SKIP * s_norm * y_norm {
            s_store.push(s);
            y_store.push(y);
            rho_store.push(1.0 / sy);
            if s_store.len() > opts.memory.max(1) {
                s_store.remove(0);
                y_store.remove(0);
                rho_store.remove(0);
            }
        }
        x = xt;
        cur = et;
        if flat {
            status = MinimizeStatus::Converged;
            break;
        }
    }

    if status == MinimizeStatus::IterationLimit
        && projected_gradient_norm(&x, &cur.gradient, bounds) <= opts.grad_tol
    {
        status = MinimizeStatus::Converged;
    }

    Ok(MinimizeResult {
        x,
        value: cur.value,
        status,
        iterations,
        evaluations,
    })
}

/// Compares an analytic gradient against central finite differences with
/// step `1e-6 * (1 + |x_i|)`; returns the relative error of the gradient
/// as a vector: the worst componentwise deviation divided by the larger of
/// the two gradient infinity norms (floored at 1e-8), so components that
/// are negligible against the gradient scale cannot dominate through
/// finite-difference round-off.
pub fn check_gradient<F>(mut f: F, x: &[f64]) -> f64
where
    F: FnMut(&[f64]) -> ObjectiveEvaluation,
{
    let analytic = f(x).gradient;
    let mut worst_abs = 0.0f64;
    let mut scale = analytic.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp).value;
        xp[i] = x[i] - h;
        let fm = f(&xp).value;
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        worst_abs = worst_abs.max((analytic[i] - fd).abs());
        scale = scale.max(fd.abs());
    }
    worst_abs / scale.max(1e-8)
}
