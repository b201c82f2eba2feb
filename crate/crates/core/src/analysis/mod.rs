//! Curve and histogram fitting for learning trajectories and ensembles.

mod compare;
mod gaussian;
pub mod lsq;
mod logistic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{compare_strategies, speedup, summarize_strategy, ComparisonTable, SampleStats, StrategySummary};
pub use gaussian::{
    assess_bimodality, fit_gaussians, BimodalityRule, GaussianComponent, GaussianFit, Histogram,
    HistogramSpec, ModalityVerdict, MIN_SAMPLES,
};
pub use logistic::{eval_logistic, fit_logistic, initial_guess, LogisticFit, LogisticFitOptions, LogisticParams};

use crate::experiment::TPoint;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub inflection_bin_width: f64,
    pub convergence_bin_width: f64,
    pub bimodal_chi2_reduction: f64,
    pub bimodal_min_weight: f64,
    /// Fewer accepted fits per ensemble than this triggers a warning.
    pub min_converged: usize,
    pub initial_rate: f64,
    pub edge_fraction: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            inflection_bin_width: 150.0,
            convergence_bin_width: 100.0,
            bimodal_chi2_reduction: 0.5,
            bimodal_min_weight: 0.1,
            min_converged: 10,
            initial_rate: 0.02,
            edge_fraction: 0.1,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.inflection_bin_width > 0.0 && self.convergence_bin_width > 0.0) {
            return Err("analysis bin widths must be positive".into());
        }
        if !(self.edge_fraction > 0.0 && self.edge_fraction <= 0.5) {
            return Err("analysis.edge_fraction must lie in (0, 0.5]".into());
        }
        if !(0.0..1.0).contains(&self.bimodal_chi2_reduction)
            || !(0.0..0.5).contains(&self.bimodal_min_weight)
        {
            return Err("bimodality thresholds out of range".into());
        }
        Ok(())
    }

    pub fn bimodality_rule(&self) -> BimodalityRule {
        BimodalityRule {
            min_chi2_reduction: self.bimodal_chi2_reduction,
            min_minor_weight: self.bimodal_min_weight,
        }
    }

    pub fn logistic_options(&self) -> LogisticFitOptions {
        LogisticFitOptions {
            initial_rate: self.initial_rate,
            edge_fraction: self.edge_fraction,
            ..LogisticFitOptions::default()
        }
    }
}

/// Fits a `T` series with data-derived starting values.
pub fn fit_trajectory(points: &[TPoint], config: &AnalysisConfig) -> LogisticFit {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.generation as f64, p.t)).collect();
    fit_logistic(&pts, None, &config.logistic_options())
}
