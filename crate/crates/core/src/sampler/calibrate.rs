//! Choosing the scale constant from observed prior/proposal ratios.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SamplerConfig, SamplerError, Scorer, DEFAULT_M};
use crate::chordlang::Progression;

pub const DEFAULT_PERCENTILE: f64 = 0.95;
const MIN_RATIOS: usize = 20;

/// Nearest-rank percentile: the value at rank `ceil(p * n)` of the sorted list.
pub fn nearest_rank(values: &[f64], percentile: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // the epsilon keeps exact products like 0.95 * 20 from rounding up a rank
    let rank = (percentile * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

fn check(count: usize, percentile: f64) -> Result<(), SamplerError> {
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(SamplerError::InvalidConfig(format!("percentile must be in (0, 1], got {percentile}")));
    }
    if count < MIN_RATIOS {
        return Err(SamplerError::InsufficientData { needed: MIN_RATIOS, got: count });
    }
    Ok(())
}

/// `M` as the nearest-rank percentile of `P(x)/Q(x)` ratios.
pub fn calibrate_m(ratios: &[f64], percentile: f64) -> Result<f64, SamplerError> {
    check(ratios.len(), percentile)?;
    if let Some(&bad) = ratios.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(SamplerError::InvalidRatio(bad));
    }
    Ok(nearest_rank(ratios, percentile))
}

/// `log P(x) - log Q(x)` for each candidate at the configured temperatures.
pub fn log_ratios(
    candidates: &[Progression],
    scorer: &Scorer<'_>,
    cfg: &SamplerConfig,
) -> Result<Vec<f64>, SamplerError> {
    candidates
        .iter()
        .map(|c| scorer.score(c, cfg).map(|(lp, lq)| lp - lq))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationArtifact {
    #[serde(rename = "M")]
    pub m: f64,
    pub percentile: f64,
    pub count: usize,
    pub tau_p: f64,
    pub tau_q: f64,
    pub vocab_version: String,
}

impl CalibrationArtifact {
    /// Calibrates in log space so extreme ratios neither overflow nor vanish.
    pub fn from_log_ratios(
        log_ratios: &[f64],
        percentile: f64,
        cfg: &SamplerConfig,
        vocab_version: &str,
    ) -> Result<CalibrationArtifact, SamplerError> {
        check(log_ratios.len(), percentile)?;
        if let Some(&bad) = log_ratios.iter().find(|r| !r.is_finite()) {
            return Err(SamplerError::InvalidRatio(bad.exp()));
        }
        let m = nearest_rank(log_ratios, percentile).exp();
        Ok(CalibrationArtifact {
            m,
            percentile,
            count: log_ratios.len(),
            tau_p: cfg.tau_p(),
            tau_q: cfg.tau_q(),
            vocab_version: vocab_version.to_string(),
        })
    }

    /// The shipped constant, for deployments without a local calibration run.
    pub fn shipped_default(vocab_version: &str) -> CalibrationArtifact {
        CalibrationArtifact {
            m: DEFAULT_M,
            percentile: DEFAULT_PERCENTILE,
            count: 0,
            tau_p: super::DEFAULT_TAU,
            tau_q: super::DEFAULT_TAU,
            vocab_version: vocab_version.to_string(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SamplerError> {
        let text = serde_json::to_string_pretty(self).expect("artifact serializes");
        fs::write(path, text + "\n")
            .map_err(|source| SamplerError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<CalibrationArtifact, SamplerError> {
        let text = fs::read_to_string(path)
            .map_err(|source| SamplerError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| SamplerError::Format(format!("{}: {e}", path.display())))
    }
}
