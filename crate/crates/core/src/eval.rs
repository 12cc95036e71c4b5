//! Continuous recognition metrics.
//!
//! A stream run is scored against scripted ground truth: N gestures
//! performed, W misclassified, M missed, P predictions emitted.
//! CRA = 1 - (W+M)/N and MPR = 1 - N/P.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::GestureKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    /// N: gestures actually performed.
    pub performed: usize,
    /// W: bursts whose matched prediction had the wrong class.
    pub misclassified: usize,
    /// M: bursts no emitted segment covered.
    pub missed: usize,
    /// P: predictions emitted (negative-class suppressions excluded).
    pub predictions: usize,
}

impl EvalCounters {
    pub fn validate(&self) -> Result<()> {
        if self.misclassified + self.missed > self.performed {
            return Err(Error::Validation(format!(
                "counters inconsistent: W {} + M {} > N {}",
                self.misclassified, self.missed, self.performed
            )));
        }
        Ok(())
    }
}

/// Exact metric evaluation. Errors on zero denominators rather than
/// inventing a value.
pub fn compute_cra_mpr(counters: &EvalCounters) -> Result<(f64, f64)> {
    counters.validate()?;
    if counters.performed == 0 {
        return Err(Error::UndefinedMetric("CRA needs at least one performed gesture"));
    }
    if counters.predictions == 0 {
        return Err(Error::UndefinedMetric("MPR needs at least one prediction"));
    }
    let n = counters.performed as f64;
    let cra = 1.0 - (counters.misclassified + counters.missed) as f64 / n;
    let mpr = 1.0 - n / counters.predictions as f64;
    Ok((cra, mpr))
}

/// Ground-truth gesture span in stream frame coordinates, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureBurst {
    pub start_frame: usize,
    pub end_frame: usize,
    pub label: GestureKind,
}

impl GestureBurst {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One emitted recognition, in stream frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub start_frame: usize,
    pub end_frame: usize,
    pub label: GestureKind,
}

fn overlap(b: &GestureBurst, p: &PredictionRecord) -> usize {
    let lo = b.start_frame.max(p.start_frame);
    let hi = b.end_frame.min(p.end_frame);
    hi.saturating_sub(lo) + usize::from(hi >= lo)
}

fn midpoint_inside(b: &GestureBurst, p: &PredictionRecord) -> bool {
    let mid = (p.start_frame + p.end_frame) as f64 / 2.0;
    b.start_frame as f64 <= mid && mid <= b.end_frame as f64
}

/// Scores predictions against ground truth.
///
/// A burst is missed when no prediction overlaps at least half of it.
/// Otherwise it is judged by the earliest prediction whose midpoint falls
/// inside the burst (falling back to the largest-overlap prediction), and
/// counts as misclassified when that prediction's class differs. Every
/// prediction counts toward P; spurious ones affect only MPR.
pub fn match_events(
    bursts: &[GestureBurst],
    predictions: &[PredictionRecord],
) -> Result<EvalCounters> {
    for b in bursts {
        if b.start_frame > b.end_frame {
            return Err(Error::Validation("burst with start after end".into()));
        }
    }
    for p in predictions {
        if p.start_frame > p.end_frame {
            return Err(Error::Validation("prediction with start after end".into()));
        }
    }
    let mut counters = EvalCounters {
        performed: bursts.len(),
        predictions: predictions.len(),
        ..EvalCounters::default()
    };
    for b in bursts {
        let covering: Vec<&PredictionRecord> = predictions
            .iter()
            .filter(|p| 2 * overlap(b, p) >= b.len())
            .collect();
        if covering.is_empty() {
            counters.missed += 1;
            continue;
        }
        let judge = covering
            .iter()
            .find(|p| midpoint_inside(b, p))
            .copied()
            .unwrap_or_else(|| {
                covering
                    .iter()
                    .max_by_key(|p| overlap(b, p))
                    .copied()
                    .unwrap()
            });
        if judge.label != b.label {
            counters.misclassified += 1;
        }
    }
    Ok(counters)
}
