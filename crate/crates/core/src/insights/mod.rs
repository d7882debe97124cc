//! Analytics over session logs: score, hand displacement, hand usage, the
//! inter-press scatter, hand-to-target distance over time and reaction-time
//! statistics. [`report`] turns the result into SVG, CSV or HTML.

pub mod report;

use serde::Serialize;
use thiserror::Error;

use crate::config::Mode;
use crate::geometry::Vec3;
use crate::input::{Hand, HandSample};
use crate::layout::TargetId;
use crate::log::{LogError, SessionLog, Snapshot};
use crate::scalar::Scalar;
use crate::time::Millis;
use crate::Position3;

pub use report::{render_report, RenderFormat};

#[derive(Debug, Error)]
pub enum InsightsError {
    #[error("log has no snapshots, presses or hand samples")]
    EmptyLog,
    #[error(transparent)]
    InvalidLog(#[from] LogError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Displacement {
    pub left: f64,
    pub right: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct HandUsage {
    pub left_presses: u32,
    pub right_presses: u32,
    pub left_fraction: f64,
    pub right_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub remaining_time_s: f64,
    pub gap_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistancePoint {
    pub t_s: f64,
    pub distance_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReactionStats {
    pub mean_s: f64,
    pub median_s: f64,
    pub best_s: f64,
    pub worst_s: f64,
    pub times_s: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InsightsReport {
    pub session_id: String,
    pub mode: Option<Mode>,
    pub score: u32,
    pub cumulative_displacement_m: Displacement,
    pub hand_usage: HandUsage,
    pub press_sequence: Vec<TargetId>,
    /// Accumulator sessions only: one point per hit.
    pub inter_press_scatter: Vec<ScatterPoint>,
    pub distance_series: Vec<DistancePoint>,
    /// Reaction sessions only.
    pub reaction_stats: Option<ReactionStats>,
}

/// A target lit over `[t_on, t_off)`. When `hand` is set only that hand's
/// samples are measured against it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LitInterval {
    pub t_on: Millis,
    pub t_off: Millis,
    pub target: TargetId,
    pub pos: Position3,
    pub hand: Option<Hand>,
}

/// Total length of a polyline.
pub fn path_length<T: Scalar>(points: impl IntoIterator<Item = Vec3<T>>) -> T {
    let mut iter = points.into_iter();
    let Some(mut prev) = iter.next() else {
        return T::zero();
    };
    let mut total = T::zero();
    for p in iter {
        total = total + p.distance(prev);
        prev = p;
    }
    total
}

/// Per-hand path length of the tracked hand positions.
pub fn cumulative_displacement(samples: &[HandSample]) -> Displacement {
    let per_hand = |hand: Hand| {
        path_length(samples.iter().filter(|s| s.hand == hand).map(|s| s.pos))
    };
    let left = per_hand(Hand::Left);
    let right = per_hand(Hand::Right);
    Displacement {
        left,
        right,
        total: left + right,
    }
}

/// Distance from each sample to the target lit at the sample's time. Samples
/// outside every interval are dropped. Intervals must not overlap.
pub fn distance_series(samples: &[HandSample], timeline: &[LitInterval]) -> Vec<DistancePoint> {
    let mut sorted: Vec<&LitInterval> = timeline.iter().collect();
    sorted.sort_by_key(|iv| iv.t_on);
    samples
        .iter()
        .filter_map(|s| {
            let idx = sorted.partition_point(|iv| iv.t_on <= s.t);
            let iv = sorted[..idx].last()?;
            if s.t >= iv.t_off || iv.hand.is_some_and(|h| h != s.hand) {
                return None;
            }
            Some(DistancePoint {
                t_s: s.t.as_secs_f64(),
                distance_m: s.pos.distance(iv.pos),
            })
        })
        .collect()
}

/// When each hit target was lit, reconstructed from accumulator snapshots.
pub fn accumulator_timeline(log: &SessionLog) -> Vec<LitInterval> {
    let limit = log.config.accumulator_limit_s;
    log.snapshots
        .iter()
        .filter_map(|s| match s {
            Snapshot::Accumulator(a) => {
                let t_off = limit.saturating_sub(a.remaining_time_s);
                Some(LitInterval {
                    t_on: t_off.saturating_sub(a.inter_press_time_s),
                    t_off,
                    target: a.target,
                    pos: a.target_pos,
                    hand: Some(a.hand),
                })
            }
            _ => None,
        })
        .collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn reaction_stats(log: &SessionLog) -> Option<ReactionStats> {
    let times: Vec<f64> = log
        .snapshots
        .iter()
        .filter_map(|s| match s {
            Snapshot::Reaction(r) => Some(r.reaction_time_s.as_secs_f64()),
            _ => None,
        })
        .collect();
    if times.is_empty() {
        return None;
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    Some(ReactionStats {
        mean_s: crate::stats::mean(&times),
        median_s: median(&sorted),
        best_s: sorted[0],
        worst_s: sorted[sorted.len() - 1],
        times_s: times,
    })
}

/// Derives the full report from a validated log.
pub fn summarize(log: &SessionLog) -> Result<InsightsReport, InsightsError> {
    log.validate()?;
    if log.snapshots.is_empty() && log.presses.is_empty() && log.hand_samples.is_empty() {
        return Err(InsightsError::EmptyLog);
    }

    let mut usage = HandUsage::default();
    for p in &log.presses {
        match p.hand {
            Hand::Left => usage.left_presses += 1,
            Hand::Right => usage.right_presses += 1,
        }
    }
    let total = usage.left_presses + usage.right_presses;
    if total > 0 {
        usage.left_fraction = f64::from(usage.left_presses) / f64::from(total);
        usage.right_fraction = 1.0 - usage.left_fraction;
    }

    let inter_press_scatter = log
        .snapshots
        .iter()
        .filter_map(|s| match s {
            Snapshot::Accumulator(a) => Some(ScatterPoint {
                remaining_time_s: a.remaining_time_s.as_secs_f64(),
                gap_s: a.inter_press_time_s.as_secs_f64(),
            }),
            _ => None,
        })
        .collect();

    // with every target lit at once there is no single referent in reaction mode
    let distance = match log.mode {
        Mode::Accumulator => distance_series(&log.hand_samples, &accumulator_timeline(log)),
        Mode::Reaction | Mode::Sequence => Vec::new(),
    };

    Ok(InsightsReport {
        session_id: log.session_id.clone(),
        mode: Some(log.mode),
        score: log.summary.score,
        cumulative_displacement_m: cumulative_displacement(&log.hand_samples),
        hand_usage: usage,
        press_sequence: log.presses.iter().filter_map(|p| p.target).collect(),
        inter_press_scatter,
        distance_series: distance,
        reaction_stats: match log.mode {
            Mode::Reaction => reaction_stats(log),
            _ => None,
        },
    })
}
