//! Logistic step on a flat pedestal:
//!
//! ```text
//! f(g) = L / (1 + exp(k (g - g0))) + c
//! ```
//!
//! For `L, k > 0` the curve falls from the initial plateau `L + c` to the
//! final plateau `c`, crossing the midpoint at the inflection `g0`.

use serde::{Deserialize, Serialize};

use super::lsq::{levenberg_marquardt, LmOptions, Model};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    #[serde(rename = "L")]
    pub amplitude: f64,
    #[serde(rename = "k")]
    pub rate: f64,
    #[serde(rename = "g0")]
    pub inflection: f64,
    #[serde(rename = "c")]
    pub floor: f64,
}

impl LogisticParams {
    pub fn new(amplitude: f64, rate: f64, inflection: f64, floor: f64) -> Self {
        LogisticParams {
            amplitude,
            rate,
            inflection,
            floor,
        }
    }

    fn to_vec(self) -> [f64; 4] {
        [self.amplitude, self.rate, self.inflection, self.floor]
    }

    fn from_slice(p: &[f64]) -> Self {
        LogisticParams::new(p[0], p[1], p[2], p[3])
    }

    pub fn eval(&self, g: f64) -> f64 {
        eval_logistic(g, self.amplitude, self.rate, self.inflection, self.floor)
    }

    /// Initial plateau, `L + c`.
    pub fn initial_level(&self) -> f64 {
        self.amplitude + self.floor
    }
}

/// `1 / (1 + exp(z))` without overflow for either sign of `z`.
#[inline]
fn fermi(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

pub fn eval_logistic(g: f64, amplitude: f64, rate: f64, inflection: f64, floor: f64) -> f64 {
    amplitude * fermi(rate * (g - inflection)) + floor
}

struct Logistic;

impl Model for Logistic {
    fn n_params(&self) -> usize {
        4
    }

    fn eval(&self, g: f64, p: &[f64]) -> f64 {
        eval_logistic(g, p[0], p[1], p[2], p[3])
    }

    fn gradient(&self, g: f64, p: &[f64], grad: &mut [f64]) {
        let (l, k, g0) = (p[0], p[1], p[2]);
        let s = fermi(k * (g - g0));
        let ds = s * (1.0 - s);
        grad[0] = s;
        grad[1] = -l * ds * (g - g0);
        grad[2] = l * ds * k;
        grad[3] = 1.0;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LogisticParams,
    pub uncertainties: LogisticParams,
    pub chi2: f64,
    pub n_points: usize,
    pub iterations: usize,
    pub converged: bool,
    /// First and last generation of the fitted data.
    pub span: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl LogisticFit {
    /// Converged, falling (`L, k > 0`), positive floor, and an inflection
    /// inside the data.
    pub fn is_accepted(&self) -> bool {
        let p = &self.params;
        self.converged
            && p.amplitude > 0.0
            && p.rate > 0.0
            && p.floor > 0.0
            && p.inflection >= self.span.0
            && p.inflection <= self.span.1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticFitOptions {
    /// Starting slope.
    pub initial_rate: f64,
    /// Fraction of the series at each end used to estimate the plateaus.
    pub edge_fraction: f64,
    /// Minimum number of points.
    pub min_points: usize,
}

impl Default for LogisticFitOptions {
    fn default() -> Self {
        LogisticFitOptions {
            initial_rate: 0.02,
            edge_fraction: 0.1,
            min_points: 20,
        }
    }
}

/// Plateaus from the mean of the first and last `edge_fraction` of the
/// points; `g0` where the data first reaches the midpoint.
pub fn initial_guess(points: &[(f64, f64)], opts: &LogisticFitOptions) -> LogisticParams {
    let n = points.len();
    let edge = ((n as f64 * opts.edge_fraction).round() as usize).clamp(1, n.max(1));
    let mean = |s: &[(f64, f64)]| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
    let floor = mean(&points[n - edge..]);
    let amplitude = mean(&points[..edge]) - floor;
    let mid = floor + 0.5 * amplitude;
    let inflection = points
        .iter()
        .find(|p| if amplitude >= 0.0 { p.1 <= mid } else { p.1 >= mid })
        .map(|p| p.0)
        .unwrap_or_else(|| 0.5 * (points[0].0 + points[n - 1].0));
    LogisticParams::new(amplitude, opts.initial_rate, inflection, floor)
}

fn fit_from(xs: &[f64], ys: &[f64], start: LogisticParams, span: (f64, f64)) -> LogisticFit {
    let out = levenberg_marquardt(&Logistic, xs, ys, &start.to_vec(), &LmOptions::default());
    let params = LogisticParams::from_slice(&out.params);
    let finite = out.params.iter().all(|v| v.is_finite());
    let (uncertainties, diagnostic) = match out.std_errors() {
        Some(se) => (LogisticParams::from_slice(&se), None),
        None => (
            LogisticParams::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            Some("singular covariance: parameters not identifiable".to_string()),
        ),
    };
    let converged = out.converged && finite && diagnostic.is_none();
    let diagnostic = diagnostic.or_else(|| {
        (!out.converged).then(|| format!("iteration limit reached after {}", out.iterations))
    });
    LogisticFit {
        params,
        uncertainties,
        chi2: out.chi2,
        n_points: xs.len(),
        iterations: out.iterations,
        converged,
        span,
        diagnostic,
    }
}

fn degenerate(points: &[(f64, f64)], start: LogisticParams, why: String) -> LogisticFit {
    let span = match (points.first(), points.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => (f64::NAN, f64::NAN),
    };
    LogisticFit {
        params: start,
        uncertainties: LogisticParams::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        chi2: f64::NAN,
        n_points: points.len(),
        iterations: 0,
        converged: false,
        span,
        diagnostic: Some(why),
    }
}

/// Minimum-chi-squared fit of `(generation, T)` points.
///
/// With an explicit `guess` a single minimisation starts there. Without one
/// the data-derived guess is tried together with starts that place `g0` at
/// each decile of the series, and the lowest-chi-squared converged result
/// is kept.
pub fn fit_logistic(
    points: &[(f64, f64)],
    guess: Option<LogisticParams>,
    opts: &LogisticFitOptions,
) -> LogisticFit {
    let nan = LogisticParams::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    if points.len() < opts.min_points.max(5) {
        return degenerate(
            points,
            guess.unwrap_or(nan),
            format!(
                "need at least {} points, got {}",
                opts.min_points.max(5),
                points.len()
            ),
        );
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return degenerate(points, guess.unwrap_or(nan), "non-finite data".into());
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let span = (xs[0], xs[xs.len() - 1]);
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let auto = initial_guess(points, opts);
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return degenerate(
            points,
            guess.unwrap_or(auto),
            "flat data: step amplitude is not identifiable".into(),
        );
    }

    if let Some(g) = guess {
        return fit_from(&xs, &ys, g, span);
    }

    let mut best = fit_from(&xs, &ys, auto, span);
    for d in 1..10 {
        let idx = d * (xs.len() - 1) / 10;
        let start = LogisticParams {
            inflection: xs[idx],
            ..auto
        };
        let cand = fit_from(&xs, &ys, start, span);
        let better = match (cand.converged, best.converged) {
            (true, false) => true,
            (true, true) => cand.chi2 < best.chi2,
            _ => false,
        };
        if better {
            best = cand;
        }
    }
    best
}
