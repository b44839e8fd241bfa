//! Overlap diagnostics: five-number summaries and fixed-width histograms of
//! a balancing score, split by treatment group.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub lower_quartile: f64,
    pub median: f64,
    pub upper_quartile: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (`(n − 1)·q` position).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn five_number_summary(values: &[f64]) -> Option<FiveNumberSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(FiveNumberSummary {
        min: sorted[0],
        lower_quartile: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        upper_quartile: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Bin edges and per-group counts over a shared range.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedHistogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub control_counts: Vec<usize>,
    pub treated_counts: Vec<usize>,
}

/// Fixed-width histogram over the pooled range of `values`. The last bin is
/// closed on the right. A degenerate range puts every value in the first bin.
pub fn grouped_histogram(values: &[f64], treatment: &[u8], bins: usize) -> Result<GroupedHistogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if values.len() != treatment.len() || values.is_empty() {
        return Err(Error::InvalidArgument("values and treatment must align and be nonempty".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + k as f64 * width })
        .collect();
    let mut control_counts = vec![0; bins];
    let mut treated_counts = vec![0; bins];
    for (&v, &t) in values.iter().zip(treatment) {
        let bin = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        if t == 1 {
            treated_counts[bin] += 1;
        } else {
            control_counts[bin] += 1;
        }
    }
    Ok(GroupedHistogram {
        edges,
        control_counts,
        treated_counts,
    })
}
