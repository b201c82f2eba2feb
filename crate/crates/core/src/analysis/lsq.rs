//! Unweighted nonlinear least squares (Levenberg-Marquardt, Marquardt
//! diagonal scaling) with a residual-variance-scaled covariance estimate.

use nalgebra::{DMatrix, DVector};

/// A scalar model `y = f(x; p)` with an analytic gradient in `p`.
pub trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, x: f64, p: &[f64]) -> f64;
    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]);
}

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step changes every parameter by less than this
    /// fraction of its magnitude.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 2000,
            step_tolerance: 1e-13,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub chi2: f64,
    /// `(J^T J)^-1 * chi2 / (n - p)`; `None` when the normal matrix is
    /// singular or there are no spare degrees of freedom.
    pub covariance: Option<DMatrix<f64>>,
    pub iterations: usize,
    /// The minimiser stopped on a tolerance rather than the iteration cap.
    pub converged: bool,
}

impl LmOutcome {
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

/// Neumaier-compensated running sum. Near the optimum the chi-squared
/// decrease per step falls below the rounding error of a naive sum over
/// thousands of residuals.
#[derive(Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(self) -> f64 {
        self.s + self.c
    }
}

pub fn chi2<M: Model>(model: &M, xs: &[f64], ys: &[f64], p: &[f64]) -> f64 {
    let mut sum = Sum::default();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - model.eval(x, p);
        sum.add(r * r);
    }
    sum.value()
}

/// `d chi2 / d p = -2 J^T r`.
pub fn chi2_gradient<M: Model>(model: &M, xs: &[f64], ys: &[f64], p: &[f64]) -> Vec<f64> {
    let m = model.n_params();
    let mut g = vec![0.0; m];
    let mut row = vec![0.0; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - model.eval(x, p);
        model.gradient(x, p, &mut row);
        for k in 0..m {
            g[k] -= 2.0 * r * row[k];
        }
    }
    g
}

fn normal_equations<M: Model>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    p: &[f64],
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let m = model.n_params();
    let mut jtj = DMatrix::<f64>::zeros(m, m);
    let mut jtr = vec![Sum::default(); m];
    let mut row = vec![0.0; m];
    let mut chi2 = Sum::default();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - model.eval(x, p);
        chi2.add(r * r);
        model.gradient(x, p, &mut row);
        for a in 0..m {
            jtr[a].add(row[a] * r);
            for b in a..m {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    let jtr = DVector::from_iterator(m, jtr.into_iter().map(Sum::value));
    (jtj, jtr, chi2.value())
}

fn covariance(jtj: &DMatrix<f64>, chi2: f64, dof: usize) -> Option<DMatrix<f64>> {
    if dof == 0 {
        return None;
    }
    // Scale to unit diagonal before inverting so the pivot test is unitless.
    let m = jtj.nrows();
    let d: Vec<f64> = (0..m).map(|i| jtj[(i, i)].sqrt()).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let scaled = DMatrix::from_fn(m, m, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let eig = scaled.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > 1e-12 * m as f64) {
        return None;
    }
    let inv = scaled.cholesky()?.inverse();
    let s2 = chi2 / dof as f64;
    Some(DMatrix::from_fn(m, m, |i, j| inv[(i, j)] / (d[i] * d[j]) * s2))
}

pub fn levenberg_marquardt<M: Model>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    initial: &[f64],
    opts: &LmOptions,
) -> LmOutcome {
    assert_eq!(xs.len(), ys.len());
    let m = model.n_params();
    assert_eq!(initial.len(), m);
    let mut p = initial.to_vec();
    let (mut jtj, mut jtr, mut current) = normal_equations(model, xs, ys, &p);
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if current == 0.0 || !current.is_finite() {
            converged = current == 0.0;
            break;
        }
        let mut damped = jtj.clone();
        for a in 0..m {
            damped[(a, a)] += lambda * jtj[(a, a)].max(1e-300);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&jtr),
            None => {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break;
                }
                continue;
            }
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let trial_chi2 = chi2(model, xs, ys, &trial);
        if trial_chi2.is_finite() && trial_chi2 < current {
            let small = p
                .iter()
                .zip(step.iter())
                .all(|(&a, &d)| d.abs() <= opts.step_tolerance * (a.abs() + opts.step_tolerance));
            p = trial;
            let ne = normal_equations(model, xs, ys, &p);
            jtj = ne.0;
            jtr = ne.1;
            current = ne.2;
            lambda = (lambda / 10.0).max(1e-15);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            // No downhill step exists at any damping: a minimum to
            // working precision.
            if lambda > 1e16 {
                converged = true;
                break;
            }
        }
    }

    let dof = xs.len().saturating_sub(m);
    LmOutcome {
        covariance: covariance(&jtj, current, dof),
        params: p,
        chi2: current,
        iterations,
        converged,
    }
}
