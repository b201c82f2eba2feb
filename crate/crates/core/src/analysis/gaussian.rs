//! Histogram fits of one Gaussian or a sum of two.
//!
//! Samples are binned, and the expected count of each bin is modelled as the
//! component areas times the normal probability mass inside the bin. Fitting
//! bin masses rather than densities at bin centres keeps narrow peaks (sigma
//! well below the bin width) unbiased.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::lsq::{levenberg_marquardt, LmOptions, Model};
use super::AnalysisError;

/// Minimum sample count for a histogram fit.
pub const MIN_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bin_width: f64,
    /// Bin edges sit at `origin + k * bin_width`.
    pub origin: f64,
    /// Restricts binning to `[lo, hi)`; by default the data range is covered
    /// with one empty bin of padding on each side.
    pub range: Option<(f64, f64)>,
}

impl HistogramSpec {
    pub fn new(bin_width: f64) -> Self {
        HistogramSpec {
            bin_width,
            origin: 0.0,
            range: None,
        }
    }

    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(samples: &[f64], spec: &HistogramSpec) -> Result<Self, AnalysisError> {
        let w = spec.bin_width;
        if !(w > 0.0 && w.is_finite()) {
            return Err(AnalysisError::InvalidInput(format!(
                "bin width must be positive, got {w}"
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(AnalysisError::InvalidInput("non-finite sample".into()));
        }
        let (lo_k, hi_k) = match spec.range {
            Some((lo, hi)) => (
                ((lo - spec.origin) / w).floor() as i64,
                ((hi - spec.origin) / w).ceil() as i64,
            ),
            None => {
                if samples.is_empty() {
                    return Err(AnalysisError::EmptyHistogram);
                }
                let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (
                    ((min - spec.origin) / w).floor() as i64 - 1,
                    ((max - spec.origin) / w).floor() as i64 + 2,
                )
            }
        };
        let n_bins = (hi_k - lo_k).max(1) as usize;
        let edges: Vec<f64> = (0..=n_bins)
            .map(|i| spec.origin + (lo_k + i as i64) as f64 * w)
            .collect();
        let mut counts = vec![0u64; n_bins];
        for &s in samples {
            let k = ((s - spec.origin) / w).floor() as i64 - lo_k;
            if (0..n_bins as i64).contains(&k) {
                counts[k as usize] += 1;
            }
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(AnalysisError::EmptyHistogram);
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: f64,
    pub sigma: f64,
    /// Number of samples under the component.
    pub area: f64,
    /// Share of the total fitted area.
    pub weight: f64,
    pub mean_err: f64,
    pub sigma_err: f64,
    pub area_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    /// Ordered by ascending mean.
    pub components: Vec<GaussianComponent>,
    pub chi2: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl GaussianFit {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }
}

#[inline]
fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

#[inline]
fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Parameters per component: `[area, mean, ln sigma]`.
struct BinnedMixture<'a> {
    edges: &'a [f64],
    n_components: usize,
}

impl Model for BinnedMixture<'_> {
    fn n_params(&self) -> usize {
        3 * self.n_components
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let i = x as usize;
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        p.chunks_exact(3)
            .map(|c| {
                let s = c[2].exp();
                c[0] * (norm_cdf((hi - c[1]) / s) - norm_cdf((lo - c[1]) / s))
            })
            .sum()
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) {
        let i = x as usize;
        let (lo, hi) = (self.edges[i], self.edges[i + 1]);
        for (c, g) in p.chunks_exact(3).zip(grad.chunks_exact_mut(3)) {
            let s = c[2].exp();
            let (zh, zl) = ((hi - c[1]) / s, (lo - c[1]) / s);
            let (ph, pl) = (norm_pdf(zh), norm_pdf(zl));
            g[0] = norm_cdf(zh) - norm_cdf(zl);
            g[1] = c[0] * (pl - ph) / s;
            g[2] = c[0] * (zl * pl - zh * ph);
        }
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Best split of sorted data into a lower and upper group by within-group
/// sum of squares. Returns the index of the first upper element.
fn two_means_split(sorted: &[f64]) -> usize {
    let n = sorted.len();
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, &x) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
        prefix_sq[i + 1] = prefix_sq[i] + x * x;
    }
    let ss = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = prefix[b] - prefix[a];
        prefix_sq[b] - prefix_sq[a] - s * s / m
    };
    (1..n)
        .min_by(|&a, &b| {
            (ss(0, a) + ss(a, n))
                .partial_cmp(&(ss(0, b) + ss(b, n)))
                .expect("finite sums")
        })
        .unwrap_or(1)
}

pub fn fit_gaussians(
    samples: &[f64],
    spec: &HistogramSpec,
    n_components: usize,
) -> Result<GaussianFit, AnalysisError> {
    if !(1..=2).contains(&n_components) {
        return Err(AnalysisError::InvalidInput(format!(
            "n_components must be 1 or 2, got {n_components}"
        )));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let hist = Histogram::build(samples, spec)?;
    fit_histogram(samples, &hist, spec.bin_width, n_components)
}

fn fit_histogram(
    samples: &[f64],
    hist: &Histogram,
    bin_width: f64,
    n_components: usize,
) -> Result<GaussianFit, AnalysisError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let (mean, sd) = moments(&sorted);
    if sd == 0.0 {
        let c = GaussianComponent {
            mean,
            sigma: 0.0,
            area: sorted.len() as f64,
            weight: 1.0,
            mean_err: f64::NAN,
            sigma_err: f64::NAN,
            area_err: f64::NAN,
        };
        return Ok(GaussianFit {
            components: vec![c; n_components],
            chi2: f64::NAN,
            converged: false,
            diagnostic: Some("all samples identical: width not identifiable".into()),
        });
    }

    let floor_sigma = bin_width / 4.0;
    let start: Vec<f64> = if n_components == 1 {
        vec![sorted.len() as f64, mean, sd.max(floor_sigma).ln()]
    } else {
        let k = two_means_split(&sorted);
        let (m1, s1) = moments(&sorted[..k]);
        let (m2, s2) = moments(&sorted[k..]);
        vec![
            k as f64,
            m1,
            s1.max(floor_sigma).ln(),
            (sorted.len() - k) as f64,
            m2,
            s2.max(floor_sigma).ln(),
        ]
    };

    let xs: Vec<f64> = (0..hist.counts.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let model = BinnedMixture {
        edges: &hist.edges,
        n_components,
    };
    let out = levenberg_marquardt(&model, &xs, &ys, &start, &LmOptions::default());
    let se = out.std_errors();
    let total_area: f64 = out.params.chunks_exact(3).map(|c| c[0]).sum();
    let mut components: Vec<GaussianComponent> = out
        .params
        .chunks_exact(3)
        .enumerate()
        .map(|(k, c)| {
            let sigma = c[2].exp();
            let e = |i: usize| se.as_ref().map_or(f64::NAN, |s| s[3 * k + i]);
            GaussianComponent {
                mean: c[1],
                sigma,
                area: c[0],
                weight: c[0] / total_area,
                mean_err: e(1),
                sigma_err: sigma * e(2),
                area_err: e(0),
            }
        })
        .collect();
    components.sort_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap_or(std::cmp::Ordering::Equal));

    let sane = components
        .iter()
        .all(|c| c.mean.is_finite() && c.sigma > 0.0 && c.sigma.is_finite() && c.area > 0.0);
    let diagnostic = if !out.converged {
        Some(format!("iteration limit reached after {}", out.iterations))
    } else if se.is_none() {
        Some("singular covariance".into())
    } else if !sane {
        Some("fit left the valid region (non-positive area or width)".into())
    } else {
        None
    };
    Ok(GaussianFit {
        components,
        chi2: out.chi2,
        converged: diagnostic.is_none(),
        diagnostic,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BimodalityRule {
    /// Fractional chi-squared reduction the second component must buy.
    pub min_chi2_reduction: f64,
    /// Smallest weight the minor component may have.
    pub min_minor_weight: f64,
}

impl Default for BimodalityRule {
    fn default() -> Self {
        BimodalityRule {
            min_chi2_reduction: 0.5,
            min_minor_weight: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityVerdict {
    pub one: GaussianFit,
    pub two: GaussianFit,
    pub histogram: Histogram,
    pub chi2_reduction: f64,
    pub minor_weight: f64,
    pub bimodal: bool,
}

impl ModalityVerdict {
    /// Weight of the higher-mean component when the sample is bimodal.
    pub fn upper_weight(&self) -> Option<f64> {
        if self.bimodal {
            self.two.components.last().map(|c| c.weight)
        } else {
            None
        }
    }

    /// The fit the verdict selects.
    pub fn chosen(&self) -> &GaussianFit {
        if self.bimodal {
            &self.two
        } else {
            &self.one
        }
    }
}

/// Fits one and two components to the same histogram and applies `rule`.
pub fn assess_bimodality(
    samples: &[f64],
    spec: &HistogramSpec,
    rule: &BimodalityRule,
) -> Result<ModalityVerdict, AnalysisError> {
    if samples.len() < MIN_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let histogram = Histogram::build(samples, spec)?;
    let one = fit_histogram(samples, &histogram, spec.bin_width, 1)?;
    let two = fit_histogram(samples, &histogram, spec.bin_width, 2)?;
    let chi2_reduction = if one.chi2 > 0.0 && two.chi2.is_finite() {
        1.0 - two.chi2 / one.chi2
    } else {
        0.0
    };
    let minor_weight = two
        .components
        .iter()
        .map(|c| c.weight)
        .fold(f64::INFINITY, f64::min);
    let bimodal = two.converged
        && chi2_reduction > rule.min_chi2_reduction
        && minor_weight > rule.min_minor_weight;
    Ok(ModalityVerdict {
        one,
        two,
        histogram,
        chi2_reduction,
        minor_weight,
        bimodal,
    })
}
