//! Metric protocols: trailing-window summary, target stopping round, and
//! relative-unit communication cost.
//!
//! One relative unit is the cost of a single client uploading one full
//! model update in one round, so a round with cohort `K` costs `K` units.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::selection::{cohort_size, FractionSchedule};

/// Total relative communication units over rounds `1..=t_star`:
/// the sum of the cohort sizes the schedule produces.
pub fn communication_cost(
    schedule: &FractionSchedule,
    t_star: usize,
    num_clients: usize,
) -> Result<u64> {
    if t_star == 0 || t_star > schedule.total_rounds() {
        return Err(Error::InvalidConfig(format!(
            "t_star {t_star} outside [1, {}]",
            schedule.total_rounds()
        )));
    }
    let mut units = 0u64;
    for t in 1..=t_star {
        units += cohort_size(schedule.fraction_at(t)?, num_clients) as u64;
    }
    Ok(units)
}

/// First round `t` (1-based, `t >= window`) whose trailing-window mean
/// accuracy strictly exceeds `target`; `None` if never. A complete window
/// is required, so rounds before `window` never qualify.
pub fn stopping_round(accuracies: &[f64], target: f64, window: usize) -> Option<usize> {
    assert!(window >= 1, "window must be >= 1");
    if accuracies.len() < window {
        return None;
    }
    for t in window..=accuracies.len() {
        let mean = accuracies[t - window..t].iter().sum::<f64>() / window as f64;
        if mean > target {
            return Some(t);
        }
    }
    None
}

/// Mean of the final `window` accuracies plus the best overall accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryMetrics {
    pub average_last_window: f64,
    pub best_accuracy: f64,
}

pub fn summary_metrics(accuracies: &[f64], window: usize) -> Result<SummaryMetrics> {
    if window == 0 {
        return Err(Error::InvalidConfig("window must be >= 1".into()));
    }
    if accuracies.len() < window {
        return Err(Error::InvalidData(format!(
            "need at least {window} accuracies, got {}",
            accuracies.len()
        )));
    }
    let tail = &accuracies[accuracies.len() - window..];
    Ok(SummaryMetrics {
        average_last_window: tail.iter().sum::<f64>() / window as f64,
        best_accuracy: accuracies
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max),
    })
}
