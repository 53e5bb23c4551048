//! Peak picking on a spatial spectrum and direction error metrics.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::rad_to_deg;
use crate::dictionary::Grid;
use crate::error::{EstimatorError, ModelError};

/// Spectrum and picked directions returned by a sparse estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    /// `P_X,u = 1/ι_u`.
    pub power: Vec<f64>,
    /// Off-grid offsets `ν_u` (radians).
    pub offsets: Vec<f64>,
    /// `ζ_u + ν_u` at the K picked peaks, ascending (radians).
    pub picked_directions: Vec<f64>,
}

/// Indices of the `k` dominant peaks of `power`, in selection order.
///
/// Local maxima (strictly above both neighbours, one-sided at the ends)
/// are ranked by value, ties going to the lower index. If fewer than `k`
/// exist, the largest remaining points fill the gap.
pub fn peak_indices(power: &[f64], k: usize) -> Result<Vec<usize>, EstimatorError> {
    let len = power.len();
    if k > len {
        return Err(EstimatorError::TooManyPeaks {
            requested: k,
            available: len,
        });
    }
    let is_peak = |u: usize| {
        let left = u == 0 || power[u] > power[u - 1];
        let right = u + 1 == len || power[u] > power[u + 1];
        left && right
    };
    let by_value = |a: &usize, b: &usize| power[*b].total_cmp(&power[*a]).then(a.cmp(b));

    let mut peaks: Vec<usize> = (0..len).filter(|&u| is_peak(u)).collect();
    peaks.sort_by(by_value);
    peaks.truncate(k);
    if peaks.len() < k {
        let mut rest: Vec<usize> = (0..len).filter(|u| !peaks.contains(u)).collect();
        rest.sort_by(by_value);
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }
    Ok(peaks)
}

/// Picks `k` directions `ζ_u + ν_u` from the spectrum, sorted ascending.
pub fn pick_peaks(power: &[f64], offsets: &[f64], grid: &Grid, k: usize) -> Result<SpectrumResult, EstimatorError> {
    if power.len() != grid.len() {
        return Err(ModelError::LengthMismatch {
            expected: grid.len(),
            got: power.len(),
        }
        .into());
    }
    if offsets.len() != grid.len() {
        return Err(ModelError::LengthMismatch {
            expected: grid.len(),
            got: offsets.len(),
        }
        .into());
    }
    let mut picked: Vec<f64> = peak_indices(power, k)?
        .into_iter()
        .map(|u| grid.points()[u] + offsets[u])
        .collect();
    picked.sort_by(f64::total_cmp);
    Ok(SpectrumResult {
        power: power.to_vec(),
        offsets: offsets.to_vec(),
        picked_directions: picked,
    })
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

fn squared_error_sum(estimated: &[f64], truth: &[f64]) -> Result<f64, ModelError> {
    if estimated.len() != truth.len() {
        return Err(ModelError::LengthMismatch {
            expected: truth.len(),
            got: estimated.len(),
        });
    }
    let est = sorted(estimated);
    let tru = sorted(truth);
    Ok(est.iter().zip(&tru).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// RMS error in degrees between two direction sets (radians), paired in
/// sorted order.
pub fn error_e1(estimated: &[f64], truth: &[f64]) -> Result<f64, ModelError> {
    if truth.is_empty() {
        return Err(ModelError::NoSources);
    }
    let sum = squared_error_sum(estimated, truth)?;
    Ok(rad_to_deg((sum / truth.len() as f64).sqrt()))
}

/// Pooled RMS error in degrees over several trials.
pub fn error_e2(estimates: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<f64, ModelError> {
    if estimates.len() != truths.len() {
        return Err(ModelError::LengthMismatch {
            expected: truths.len(),
            got: estimates.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (est, tru) in estimates.iter().zip(truths) {
        sum += squared_error_sum(est, tru)?;
        count += tru.len();
    }
    if count == 0 {
        return Err(ModelError::NoSources);
    }
    Ok(rad_to_deg((sum / count as f64).sqrt()))
}

/// Median of a sample; NaN for an empty one.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let v = sorted(values);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
