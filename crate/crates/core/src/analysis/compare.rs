//! Ensemble statistics and the two-strategy comparison table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::gaussian::{assess_bimodality, fit_gaussians, GaussianFit, HistogramSpec, ModalityVerdict};
use super::logistic::LogisticFit;
use super::AnalysisConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: f64,
    pub std_error: f64,
}

impl SampleStats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return SampleStats {
                n,
                mean: f64::NAN,
                std_dev: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        SampleStats {
            n,
            mean,
            std_dev,
            std_error: std_dev / (n as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub label: String,
    pub n_trajectories: usize,
    pub n_accepted: usize,
    pub inflection_stats: SampleStats,
    pub convergence_stats: SampleStats,
    pub inflection_fit: Option<GaussianFit>,
    pub convergence: Option<ModalityVerdict>,
    pub warnings: Vec<String>,
}

impl StrategySummary {
    /// Location of the inflection distribution: the Gaussian mean when the
    /// fit converged, else the sample mean.
    pub fn inflection_center(&self) -> f64 {
        match &self.inflection_fit {
            Some(f) if f.converged => f.components[0].mean,
            _ => self.inflection_stats.mean,
        }
    }

    pub fn bimodal(&self) -> bool {
        self.convergence.as_ref().is_some_and(|v| v.bimodal)
    }

    /// Share of runs in the upper (slower) convergence mode.
    pub fn suboptimal_fraction(&self) -> Option<f64> {
        self.convergence.as_ref().and_then(|v| v.upper_weight())
    }
}

/// Summarises one ensemble from its per-trajectory fits; only accepted fits
/// enter the distributions.
pub fn summarize_strategy(label: &str, fits: &[LogisticFit], config: &AnalysisConfig) -> StrategySummary {
    let accepted: Vec<&LogisticFit> = fits.iter().filter(|f| f.is_accepted()).collect();
    let g0: Vec<f64> = accepted.iter().map(|f| f.params.inflection).collect();
    let c: Vec<f64> = accepted.iter().map(|f| f.params.floor).collect();
    let mut warnings = Vec::new();
    if accepted.len() < config.min_converged {
        warnings.push(format!(
            "{label}: only {} of {} fits accepted (want at least {})",
            accepted.len(),
            fits.len(),
            config.min_converged
        ));
    }
    let inflection_fit = match fit_gaussians(&g0, &HistogramSpec::new(config.inflection_bin_width), 1) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("{label}: inflection histogram fit skipped: {e}"));
            None
        }
    };
    let convergence = match assess_bimodality(
        &c,
        &HistogramSpec::new(config.convergence_bin_width),
        &config.bimodality_rule(),
    ) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("{label}: convergence histogram fit skipped: {e}"));
            None
        }
    };
    StrategySummary {
        label: label.to_string(),
        n_trajectories: fits.len(),
        n_accepted: accepted.len(),
        inflection_stats: SampleStats::of(&g0),
        convergence_stats: SampleStats::of(&c),
        inflection_fit,
        convergence,
        warnings,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: StrategySummary,
    pub candidate: StrategySummary,
    /// `1 - g0_candidate / g0_baseline`.
    pub speedup: f64,
}

pub fn compare_strategies(
    baseline: (&str, &[LogisticFit]),
    candidate: (&str, &[LogisticFit]),
    config: &AnalysisConfig,
) -> ComparisonTable {
    let a = summarize_strategy(baseline.0, baseline.1, config);
    let b = summarize_strategy(candidate.0, candidate.1, config);
    ComparisonTable {
        speedup: speedup(a.inflection_center(), b.inflection_center()),
        baseline: a,
        candidate: b,
    }
}

pub fn speedup(baseline_g0: f64, candidate_g0: f64) -> f64 {
    1.0 - candidate_g0 / baseline_g0
}

fn fmt_pm(mean: f64, sd: f64) -> String {
    format!("{mean:.0} ± {sd:.0}")
}

fn convergence_cell(s: &StrategySummary) -> String {
    match &s.convergence {
        Some(v) => v
            .chosen()
            .components
            .iter()
            .map(|c| fmt_pm(c.mean, c.sigma))
            .collect::<Vec<_>>()
            .join(" and "),
        None => fmt_pm(s.convergence_stats.mean, s.convergence_stats.std_dev),
    }
}

fn inflection_cell(s: &StrategySummary) -> String {
    match &s.inflection_fit {
        Some(f) if f.converged => fmt_pm(f.components[0].mean, f.components[0].sigma),
        _ => format!(
            "{} (sample)",
            fmt_pm(s.inflection_stats.mean, s.inflection_stats.std_dev)
        ),
    }
}

impl ComparisonTable {
    pub fn warnings(&self) -> impl Iterator<Item = &String> {
        self.baseline.warnings.iter().chain(&self.candidate.warnings)
    }

    /// Human-readable table: strategy, inflection point, convergence point.
    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 3]> = [&self.baseline, &self.candidate]
            .iter()
            .map(|s| [s.label.clone(), inflection_cell(s), convergence_cell(s)])
            .collect();
        let header = [
            "Evolutionary Strategy".to_string(),
            "Inflection Point (generations)".to_string(),
            "Convergence Point (time-steps)".to_string(),
        ];
        let widths: Vec<usize> = (0..3)
            .map(|k| {
                rows.iter()
                    .map(|r| r[k].chars().count())
                    .chain([header[k].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String; 3]| {
            let mut s = String::new();
            for k in 0..3 {
                let pad = widths[k] - cells[k].chars().count();
                s.push_str(&cells[k]);
                s.push_str(&" ".repeat(pad + 2));
            }
            s.trim_end().to_string()
        };
        let rule = "=".repeat(widths.iter().sum::<usize>() + 4);
        let mut out = String::new();
        writeln!(out, "{rule}").unwrap();
        writeln!(out, "{}", line(&header)).unwrap();
        writeln!(out, "{}", "-".repeat(rule.len())).unwrap();
        for r in &rows {
            writeln!(out, "{}", line(r)).unwrap();
        }
        writeln!(out, "{rule}").unwrap();
        writeln!(
            out,
            "speedup ({} vs {}): {:.1}%",
            self.candidate.label,
            self.baseline.label,
            100.0 * self.speedup
        )
        .unwrap();
        for s in [&self.baseline, &self.candidate] {
            writeln!(
                out,
                "{}: {}/{} fits accepted; convergence {}",
                s.label,
                s.n_accepted,
                s.n_trajectories,
                match s.suboptimal_fraction() {
                    Some(f) => format!("bimodal, upper-mode fraction {:.0}%", 100.0 * f),
                    None => "unimodal".to_string(),
                }
            )
            .unwrap();
        }
        for w in self.warnings() {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }

    /// One row per strategy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "strategy,n_trajectories,n_accepted,inflection_mean,inflection_sigma,inflection_sample_mean,inflection_sample_se,convergence_mean,convergence_sigma,bimodal,convergence_mean_2,convergence_sigma_2,suboptimal_fraction,speedup\n",
        );
        for s in [&self.baseline, &self.candidate] {
            let (im, is) = match &s.inflection_fit {
                Some(f) if f.converged => (f.components[0].mean, f.components[0].sigma),
                _ => (f64::NAN, f64::NAN),
            };
            let comps: Vec<(f64, f64)> = s
                .convergence
                .as_ref()
                .map(|v| v.chosen().components.iter().map(|c| (c.mean, c.sigma)).collect())
                .unwrap_or_default();
            let c1 = comps.first().copied().unwrap_or((f64::NAN, f64::NAN));
            let c2 = comps.get(1).copied().unwrap_or((f64::NAN, f64::NAN));
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.label,
                s.n_trajectories,
                s.n_accepted,
                im,
                is,
                s.inflection_stats.mean,
                s.inflection_stats.std_error,
                c1.0,
                c1.1,
                s.bimodal(),
                c2.0,
                c2.1,
                s.suboptimal_fraction().unwrap_or(f64::NAN),
                self.speedup
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_small_sample() {
        let s = SampleStats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.std_error - s.std_dev / 2.0).abs() < 1e-15);
        assert!(SampleStats::of(&[]).mean.is_nan());
    }

    #[test]
    fn speedup_from_table_values() {
        assert!((speedup(512.0, 300.0) - 0.4140625).abs() < 1e-12);
        assert_eq!(speedup(300.0, 300.0), 0.0);
    }
}
