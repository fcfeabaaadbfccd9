//! Temporal focus, entropy and spread, plus the regularity and peak-shape
//! statistics used as classifier features.
//!
//! Focus and entropy work on calendar days. Spread works on continuous
//! timestamps: the mean absolute distance, in days, from each use to the mean
//! use time.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::Serialize;

use crate::corpus::{HashtagId, Occurrence, OccurrenceIndex, SECONDS_PER_DAY};
use crate::error::Result;
use crate::par;
use crate::spatial::MIN_METRIC_USES;
use crate::stats::entropy_bits;

/// Days on each side of the peak considered by the peak-shape ratios.
pub const PEAK_WINDOW_DAYS: i32 = 7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalMetrics {
    pub hashtag: String,
    pub uses: usize,
    pub active_days: usize,
    pub peak_day: NaiveDate,
    pub temporal_focus: f64,
    pub temporal_entropy: f64,
    pub temporal_spread_days: f64,
    /// `None` with fewer than three uses.
    pub local_variation: Option<f64>,
    pub peak_increase: f64,
    pub peak_decline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalMetric {
    Focus,
    Entropy,
    Spread,
}

/// `(day, uses)` in ascending day order.
pub fn day_counts(occurrences: &[Occurrence]) -> Vec<(i32, u64)> {
    let mut out: Vec<(i32, u64)> = Vec::new();
    for o in occurrences {
        match out.last_mut() {
            Some((d, n)) if *d == o.day => *n += 1,
            _ => {
                debug_assert!(out.last().is_none_or(|&(d, _)| d < o.day));
                out.push((o.day, 1));
            }
        }
    }
    out
}

/// Busiest day and its share of uses; ties go to the earliest day.
pub fn peak(counts: &[(i32, u64)]) -> (i32, f64) {
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let mut best = counts[0];
    for &c in &counts[1..] {
        if c.1 > best.1 {
            best = c;
        }
    }
    (best.0, best.1 as f64 / total as f64)
}

/// Mean absolute deviation of the timestamps from their mean, in days.
pub fn spread_days(times: &[i64]) -> f64 {
    let origin = times[0];
    let n = times.len() as f64;
    let offset_sum: i128 = times.iter().map(|&t| (t - origin) as i128).sum();
    let mean = offset_sum as f64 / n;
    let dev: f64 = times
        .iter()
        .map(|&t| ((t - origin) as f64 - mean).abs())
        .sum();
    dev / n / SECONDS_PER_DAY as f64
}

/// Local variation of the inter-event intervals of sorted `times`:
/// `3/(n-1) Σ ((I_i - I_{i+1}) / (I_i + I_{i+1}))²` over the `n` intervals.
/// Interval pairs summing to zero contribute nothing. Needs at least three
/// events.
pub fn local_variation_of(times: &[i64]) -> Option<f64> {
    if times.len() < 3 {
        return None;
    }
    let intervals: Vec<i64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let sum: f64 = intervals
        .windows(2)
        .map(|w| {
            let s = w[0] + w[1];
            if s == 0 {
                0.0
            } else {
                let r = (w[0] - w[1]) as f64 / s as f64;
                r * r
            }
        })
        .sum();
    Some(3.0 * sum / (intervals.len() - 1) as f64)
}

/// Uses in the seven days before and after `peak_day`, each divided by the
/// peak-day volume. Days without uses count zero.
pub fn peak_ratios(counts: &[(i32, u64)], peak_day: i32) -> (f64, f64) {
    let mut before = 0u64;
    let mut after = 0u64;
    let mut at = 0u64;
    for &(d, n) in counts {
        if d == peak_day {
            at = n;
        } else if d < peak_day && d >= peak_day - PEAK_WINDOW_DAYS {
            before += n;
        } else if d > peak_day && d <= peak_day + PEAK_WINDOW_DAYS {
            after += n;
        }
    }
    (before as f64 / at as f64, after as f64 / at as f64)
}

fn times(occurrences: &[Occurrence]) -> Vec<i64> {
    occurrences.iter().map(|o| o.timestamp).collect()
}

pub fn daily_counts(index: &OccurrenceIndex, hashtag: &str) -> Result<BTreeMap<NaiveDate, u64>> {
    let id = index.require(hashtag)?;
    Ok(day_counts(index.occurrences(id))
        .into_iter()
        .map(|(d, n)| (OccurrenceIndex::day_to_date(d), n))
        .collect())
}

pub fn temporal_focus(index: &OccurrenceIndex, hashtag: &str) -> Result<(NaiveDate, f64)> {
    let id = index.require(hashtag)?;
    let (d, p) = peak(&day_counts(index.occurrences(id)));
    Ok((OccurrenceIndex::day_to_date(d), p))
}

pub fn temporal_entropy(index: &OccurrenceIndex, hashtag: &str) -> Result<f64> {
    let id = index.require(hashtag)?;
    let counts: Vec<u64> = day_counts(index.occurrences(id))
        .into_iter()
        .map(|c| c.1)
        .collect();
    Ok(entropy_bits(&counts))
}

pub fn temporal_spread(index: &OccurrenceIndex, hashtag: &str) -> Result<f64> {
    let id = index.require(hashtag)?;
    Ok(spread_days(&times(index.occurrences(id))))
}

pub fn local_variation(index: &OccurrenceIndex, hashtag: &str) -> Result<Option<f64>> {
    let id = index.require(hashtag)?;
    Ok(local_variation_of(&times(index.occurrences(id))))
}

/// `(peak increase, peak decline)`.
pub fn peak_shape(index: &OccurrenceIndex, hashtag: &str) -> Result<(f64, f64)> {
    let id = index.require(hashtag)?;
    let counts = day_counts(index.occurrences(id));
    let (p, _) = peak(&counts);
    Ok(peak_ratios(&counts, p))
}

pub fn temporal_metrics(index: &OccurrenceIndex, id: HashtagId) -> TemporalMetrics {
    let occ = index.occurrences(id);
    let counts = day_counts(occ);
    let (peak_day, temporal_focus) = peak(&counts);
    let (peak_increase, peak_decline) = peak_ratios(&counts, peak_day);
    let raw: Vec<u64> = counts.iter().map(|c| c.1).collect();
    let t = times(occ);
    TemporalMetrics {
        hashtag: index.hashtag_name(id).to_string(),
        uses: occ.len(),
        active_days: counts.len(),
        peak_day: OccurrenceIndex::day_to_date(peak_day),
        temporal_focus,
        temporal_entropy: entropy_bits(&raw),
        temporal_spread_days: spread_days(&t),
        local_variation: local_variation_of(&t),
        peak_increase,
        peak_decline,
    }
}

pub fn all_temporal_metrics(index: &OccurrenceIndex, min_uses: usize) -> Vec<TemporalMetrics> {
    let ids: Vec<HashtagId> = index
        .hashtag_ids()
        .filter(|&h| index.uses(h) >= min_uses.max(MIN_METRIC_USES))
        .collect();
    par::map(&ids, |&h| temporal_metrics(index, h))
}

impl TemporalMetrics {
    pub fn get(&self, metric: TemporalMetric) -> f64 {
        match metric {
            TemporalMetric::Focus => self.temporal_focus,
            TemporalMetric::Entropy => self.temporal_entropy,
            TemporalMetric::Spread => self.temporal_spread_days,
        }
    }
}

pub fn write_temporal_csv<W: Write>(out: W, rows: &[TemporalMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "hashtag",
        "uses",
        "active_days",
        "peak_day",
        "temporal_focus",
        "temporal_entropy",
        "temporal_spread_days",
        "local_variation",
        "peak_increase",
        "peak_decline",
    ])?;
    for r in rows {
        w.write_record([
            r.hashtag.clone(),
            r.uses.to_string(),
            r.active_days.to_string(),
            r.peak_day.to_string(),
            r.temporal_focus.to_string(),
            r.temporal_entropy.to_string(),
            r.temporal_spread_days.to_string(),
            r.local_variation.map(|v| v.to_string()).unwrap_or_default(),
            r.peak_increase.to_string(),
            r.peak_decline.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = SECONDS_PER_DAY;

    fn occ(times: &[i64]) -> Vec<Occurrence> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| Occurrence {
                timestamp: t,
                location: 0,
                user: 0,
                post: i as u32,
                day: t.div_euclid(DAY) as i32,
            })
            .collect()
    }

    #[test]
    fn single_day() {
        let o = occ(&[100, 200, 300]);
        let c = day_counts(&o);
        assert_eq!(c, vec![(0, 3)]);
        assert_eq!(peak(&c), (0, 1.0));
        assert_eq!(entropy_bits(&[3]), 0.0);
        assert_eq!(peak_ratios(&c, 0), (0.0, 0.0));
    }

    #[test]
    fn uniform_four_days() {
        let o = occ(&[0, DAY, 2 * DAY, 3 * DAY]);
        let c = day_counts(&o);
        assert_eq!(peak(&c), (0, 0.25));
        let raw: Vec<u64> = c.iter().map(|x| x.1).collect();
        assert!((entropy_bits(&raw) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn three_to_one_split() {
        let o = occ(&[0, 10, 20, DAY]);
        let c = day_counts(&o);
        assert_eq!(c, vec![(0, 3), (1, 1)]);
        let raw: Vec<u64> = c.iter().map(|x| x.1).collect();
        assert!((entropy_bits(&raw) - 0.811_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn spread_examples() {
        assert_eq!(spread_days(&[5000, 5000, 5000]), 0.0);
        assert_eq!(spread_days(&[0, 100 * DAY]), 50.0);
    }

    #[test]
    fn lv_examples() {
        let periodic: Vec<i64> = (0..50).map(|i| i * 3600).collect();
        assert_eq!(local_variation_of(&periodic), Some(0.0));
        assert_eq!(local_variation_of(&[0, 10]), None);
        // Intervals 1, 3: 3/1 * ((1-3)/4)^2 = 0.75
        assert_eq!(local_variation_of(&[0, 1, 4]), Some(0.75));
        // Zero-length pairs contribute nothing.
        assert_eq!(local_variation_of(&[7, 7, 7, 7]), Some(0.0));
    }

    #[test]
    fn peak_increase_counts_seven_prior_days() {
        // One use per day on the 7 days before a 7-use peak.
        let mut t: Vec<i64> = (0..7).map(|d| d * DAY + 60).collect();
        t.extend((0..7).map(|i| 7 * DAY + i * 60));
        let c = day_counts(&occ(&t));
        let (p, f) = peak(&c);
        assert_eq!(p, 7);
        assert_eq!(f, 0.5);
        assert_eq!(peak_ratios(&c, p), (1.0, 0.0));
    }

    #[test]
    fn peak_window_is_clipped_to_seven_days() {
        let c = vec![(0, 5), (10, 10), (17, 2), (18, 4)];
        assert_eq!(peak_ratios(&c, 10), (0.0, 0.2));
    }

    #[test]
    fn peak_tie_takes_earliest_day() {
        assert_eq!(peak(&[(3, 2), (5, 2), (9, 1)]).0, 3);
    }
}
