//! The 14-feature representation of a hashtag and the spatial-vs-temporal
//! spread grid.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{HashtagId, OccurrenceIndex, PostMeta};
use crate::error::{Error, Result};
use crate::par;
use crate::spatial::spatial_metrics;
use crate::temporal::temporal_metrics;

/// Default minimum uses for a hashtag to get a feature vector.
pub const DEFAULT_MIN_OCCURRENCES: usize = 30;

pub const NUM_FEATURES: usize = 14;

/// Column names in vector order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "focus",
    "entropy",
    "spread_km",
    "local_variation",
    "avg_hashtags_per_post",
    "avg_comments_per_post",
    "exclamation_fraction",
    "question_fraction",
    "temporal_focus",
    "temporal_entropy",
    "temporal_spread_days",
    "peak_increase",
    "peak_decline",
    "user_diversity",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub hashtag: String,
    pub uses: usize,
    pub focus: f64,
    pub entropy: f64,
    pub spread_km: f64,
    /// Missing below three uses; imputed during classification.
    pub local_variation: Option<f64>,
    pub avg_hashtags_per_post: f64,
    pub avg_comments_per_post: f64,
    pub exclamation_fraction: f64,
    pub question_fraction: f64,
    pub temporal_focus: f64,
    pub temporal_entropy: f64,
    pub temporal_spread_days: f64,
    pub peak_increase: f64,
    pub peak_decline: f64,
    pub user_diversity: f64,
}

impl FeatureVector {
    /// Values in [`FEATURE_NAMES`] order; `None` marks a missing value.
    pub fn values(&self) -> [Option<f64>; NUM_FEATURES] {
        [
            Some(self.focus),
            Some(self.entropy),
            Some(self.spread_km),
            self.local_variation,
            Some(self.avg_hashtags_per_post),
            Some(self.avg_comments_per_post),
            Some(self.exclamation_fraction),
            Some(self.question_fraction),
            Some(self.temporal_focus),
            Some(self.temporal_entropy),
            Some(self.temporal_spread_days),
            Some(self.peak_increase),
            Some(self.peak_decline),
            Some(self.user_diversity),
        ]
    }

    /// Checks the documented value ranges.
    pub fn check_ranges(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        let ok = self.focus > 0.0
            && self.focus <= 1.0
            && self.entropy >= 0.0
            && self.spread_km >= 0.0
            && self.local_variation.is_none_or(|v| v >= 0.0)
            && self.avg_hashtags_per_post >= 1.0
            && self.avg_comments_per_post >= 0.0
            && frac(self.exclamation_fraction)
            && frac(self.question_fraction)
            && self.temporal_focus > 0.0
            && self.temporal_focus <= 1.0
            && self.temporal_entropy >= 0.0
            && self.temporal_spread_days >= 0.0
            && self.peak_increase >= 0.0
            && self.peak_decline >= 0.0
            && self.user_diversity > 0.0
            && self.user_diversity <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "feature vector for `{}` out of range: {self:?}",
                self.hashtag
            )))
        }
    }
}

/// Columns removed together by an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Spatial,
    Temporal,
    UserDiversity,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [
        FeatureGroup::Spatial,
        FeatureGroup::Temporal,
        FeatureGroup::UserDiversity,
    ];

    pub fn columns(self) -> &'static [usize] {
        match self {
            FeatureGroup::Spatial => &[0, 1, 2],
            FeatureGroup::Temporal => &[3, 8, 9, 10, 11, 12],
            FeatureGroup::UserDiversity => &[13],
        }
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(FeatureGroup::Spatial),
            "temporal" => Ok(FeatureGroup::Temporal),
            "user_diversity" => Ok(FeatureGroup::UserDiversity),
            other => Err(Error::InvalidInput(format!(
                "unknown feature group `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextFeatures {
    pub avg_hashtags: f64,
    pub avg_comments: f64,
    pub exclamation_fraction: f64,
    pub question_fraction: f64,
}

/// Averages over distinct posts. Missing comment counts read as zero.
pub fn text_features<'a>(posts: impl IntoIterator<Item = &'a PostMeta>) -> TextFeatures {
    let (mut n, mut tags, mut comments, mut excl, mut quest) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for p in posts {
        n += 1;
        tags += p.hashtag_count as u64;
        comments += p.comment_count.unwrap_or(0) as u64;
        excl += p.exclamation as u64;
        quest += p.question as u64;
    }
    let n = n.max(1) as f64;
    TextFeatures {
        avg_hashtags: tags as f64 / n,
        avg_comments: comments as f64 / n,
        exclamation_fraction: excl as f64 / n,
        question_fraction: quest as f64 / n,
    }
}

/// Distinct posts carrying the hashtag.
fn posts_of(index: &OccurrenceIndex, id: HashtagId) -> Vec<&PostMeta> {
    let mut ids: Vec<u32> = index.occurrences(id).iter().map(|o| o.post).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter().map(|p| index.post(p)).collect()
}

pub fn user_diversity(index: &OccurrenceIndex, id: HashtagId) -> f64 {
    let users: HashSet<u32> = index.occurrences(id).iter().map(|o| o.user).collect();
    users.len() as f64 / index.uses(id) as f64
}

fn assemble_id(index: &OccurrenceIndex, id: HashtagId) -> FeatureVector {
    let s = spatial_metrics(index, id);
    let t = temporal_metrics(index, id);
    let text = text_features(posts_of(index, id));
    FeatureVector {
        hashtag: s.hashtag,
        uses: s.uses,
        focus: s.focus,
        entropy: s.entropy,
        spread_km: s.spread_km,
        local_variation: t.local_variation,
        avg_hashtags_per_post: text.avg_hashtags,
        avg_comments_per_post: text.avg_comments,
        exclamation_fraction: text.exclamation_fraction,
        question_fraction: text.question_fraction,
        temporal_focus: t.temporal_focus,
        temporal_entropy: t.temporal_entropy,
        temporal_spread_days: t.temporal_spread_days,
        peak_increase: t.peak_increase,
        peak_decline: t.peak_decline,
        user_diversity: user_diversity(index, id),
    }
}

/// Feature vector of one hashtag with at least `min_occurrences` uses.
pub fn assemble(
    index: &OccurrenceIndex,
    hashtag: &str,
    min_occurrences: usize,
) -> Result<FeatureVector> {
    let id = index.require(hashtag)?;
    let uses = index.uses(id);
    if uses < min_occurrences.max(crate::spatial::MIN_METRIC_USES) {
        return Err(Error::BelowThreshold {
            hashtag: hashtag.to_string(),
            uses,
            threshold: min_occurrences,
        });
    }
    Ok(assemble_id(index, id))
}

/// Vectors for every qualifying hashtag, in hashtag order.
pub fn assemble_all(index: &OccurrenceIndex, min_occurrences: usize) -> Vec<FeatureVector> {
    let min = min_occurrences.max(crate::spatial::MIN_METRIC_USES);
    let ids: Vec<HashtagId> = index
        .hashtag_ids()
        .filter(|&h| index.uses(h) >= min)
        .collect();
    par::map(&ids, |&h| assemble_id(index, h))
}

pub fn write_features_csv<W: Write>(out: W, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Spread regime boundaries separating the four spread quadrants.
pub const LOCAL_SPREAD_MAX_KM: f64 = 100.0;
pub const SHORT_LIVED_MAX_DAYS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    LocalShort,
    LocalLong,
    GlobalShort,
    GlobalLong,
}

pub fn quadrant_of(spread_km: f64, spread_days: f64) -> Quadrant {
    match (
        spread_km < LOCAL_SPREAD_MAX_KM,
        spread_days < SHORT_LIVED_MAX_DAYS,
    ) {
        (true, true) => Quadrant::LocalShort,
        (true, false) => Quadrant::LocalLong,
        (false, true) => Quadrant::GlobalShort,
        (false, false) => Quadrant::GlobalLong,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadPoint {
    pub hashtag: String,
    pub spread_km: f64,
    pub spread_days: f64,
}

/// Spatial vs temporal spread of every qualifying hashtag, binned on
/// `[0, max]` along each axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadGrid {
    pub points: Vec<SpreadPoint>,
    pub bins: usize,
    pub max_km: f64,
    pub max_days: f64,
    /// `counts[x][y]`
    pub counts: Vec<Vec<u64>>,
}

pub const DEFAULT_GRID_BINS: usize = 50;

pub fn spread_grid(index: &OccurrenceIndex, min_occurrences: usize, bins: usize) -> SpreadGrid {
    let bins = bins.max(1);
    let min = min_occurrences.max(crate::spatial::MIN_METRIC_USES);
    let ids: Vec<HashtagId> = index
        .hashtag_ids()
        .filter(|&h| index.uses(h) >= min)
        .collect();
    let points = par::map(&ids, |&h| SpreadPoint {
        hashtag: index.hashtag_name(h).to_string(),
        spread_km: spatial_metrics(index, h).spread_km,
        spread_days: temporal_metrics(index, h).temporal_spread_days,
    });
    let max_km = points.iter().map(|p| p.spread_km).fold(0.0, f64::max);
    let max_days = points.iter().map(|p| p.spread_days).fold(0.0, f64::max);
    let slot = |v: f64, max: f64| {
        if max <= 0.0 {
            0
        } else {
            ((v / max * bins as f64) as usize).min(bins - 1)
        }
    };
    let mut counts = vec![vec![0u64; bins]; bins];
    for p in &points {
        counts[slot(p.spread_km, max_km)][slot(p.spread_days, max_days)] += 1;
    }
    SpreadGrid {
        points,
        bins,
        max_km,
        max_days,
        counts,
    }
}

impl SpreadGrid {
    /// Non-empty cells as `x_lo,x_hi,y_lo,y_hi,hashtags`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "spread_km_lo",
            "spread_km_hi",
            "spread_days_lo",
            "spread_days_hi",
            "hashtags",
        ])?;
        let wx = if self.max_km > 0.0 {
            self.max_km / self.bins as f64
        } else {
            0.0
        };
        let wy = if self.max_days > 0.0 {
            self.max_days / self.bins as f64
        } else {
            0.0
        };
        for (x, col) in self.counts.iter().enumerate() {
            for (y, &n) in col.iter().enumerate() {
                if n > 0 {
                    w.write_record([
                        (x as f64 * wx).to_string(),
                        ((x + 1) as f64 * wx).to_string(),
                        (y as f64 * wy).to_string(),
                        ((y + 1) as f64 * wy).to_string(),
                        n.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, IndexOptions, LocationTable};
    use crate::geo::LatLon;
    use crate::ingest::PostRecord;
    use chrono::{TimeZone, Utc};

    fn meta(text: &str, comments: Option<u32>) -> PostMeta {
        PostMeta {
            user: 0,
            location: 0,
            hashtag_count: crate::ingest::count_hashtags(text) as u16,
            comment_count: comments,
            exclamation: text.contains('!'),
            question: text.contains('?'),
        }
    }

    #[test]
    fn text_feature_examples() {
        let f = text_features(&[meta("just #a!", None)]);
        assert_eq!(
            (
                f.avg_hashtags,
                f.avg_comments,
                f.exclamation_fraction,
                f.question_fraction
            ),
            (1.0, 0.0, 1.0, 0.0)
        );
        let f = text_features(&[meta("#a #b", Some(2)), meta("#a?", Some(1))]);
        assert_eq!(f.avg_hashtags, 1.5);
        assert_eq!(f.question_fraction, 0.5);
        assert_eq!(f.avg_comments, 1.5);
    }

    fn index(n: usize, text: &str) -> OccurrenceIndex {
        let t = LocationTable::new([
            ("a".to_string(), "A".to_string(), LatLon::new(50.0, 6.0)),
            ("b".to_string(), "B".to_string(), LatLon::new(52.0, 9.0)),
        ])
        .unwrap();
        let records: Vec<PostRecord> = (0..n)
            .map(|i| PostRecord {
                post_id: format!("p{i}"),
                user_id: format!("u{}", i % 3),
                location_id: if i % 4 == 0 { "b" } else { "a" }.into(),
                timestamp: Utc
                    .timestamp_opt(1_460_000_000 + (i as i64) * 7_200, 0)
                    .unwrap(),
                text: text.into(),
                comment_count: Some(i as u32 % 2),
            })
            .collect();
        build_index(&records, t, IndexOptions::default())
    }

    #[test]
    fn assemble_checks_threshold() {
        let idx = index(10, "#h");
        assert!(matches!(
            assemble(&idx, "h", 30),
            Err(Error::BelowThreshold { uses: 10, .. })
        ));
        let v = assemble(&idx, "h", 5).unwrap();
        v.check_ranges().unwrap();
        assert_eq!(v.user_diversity, 0.3);
        assert_eq!(v.avg_comments_per_post, 0.5);
    }

    #[test]
    fn duplicate_tag_in_post_counts_post_once() {
        let idx = index(30, "#h again #h!");
        let v = assemble(&idx, "h", 30).unwrap();
        assert_eq!(v.uses, 60);
        assert_eq!(v.avg_hashtags_per_post, 2.0);
        assert_eq!(v.exclamation_fraction, 1.0);
        assert_eq!(v.user_diversity, 3.0 / 60.0);
    }

    #[test]
    fn csv_round_trip_keeps_missing_lv() {
        let idx = index(40, "#h");
        let mut v = assemble_all(&idx, 30);
        v[0].local_variation = None;
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &v).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("hashtag,uses,focus,entropy,spread_km,local_variation"));
        assert_eq!(read_features_csv(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn grid_of_point_hashtags() {
        let t = LocationTable::new([("a".to_string(), "A".to_string(), LatLon::new(50.0, 6.0))])
            .unwrap();
        let records: Vec<PostRecord> = (0..4)
            .map(|i| PostRecord {
                post_id: format!("p{i}"),
                user_id: "u".into(),
                location_id: "a".into(),
                timestamp: Utc.timestamp_opt(1_000, 0).unwrap(),
                text: format!("#t{}", i % 2),
                comment_count: None,
            })
            .collect();
        let idx = build_index(&records, t, IndexOptions::default());
        let g = spread_grid(&idx, 2, 50);
        assert_eq!(g.points.len(), 2);
        assert_eq!(g.counts[0][0], 2);
        assert!(g
            .points
            .iter()
            .all(|p| p.spread_km == 0.0 && p.spread_days == 0.0));
    }

    #[test]
    fn quadrants() {
        assert_eq!(quadrant_of(10.0, 2.0), Quadrant::LocalShort);
        assert_eq!(quadrant_of(10.0, 60.0), Quadrant::LocalLong);
        assert_eq!(quadrant_of(250.0, 1.0), Quadrant::GlobalShort);
        assert_eq!(quadrant_of(250.0, 100.0), Quadrant::GlobalLong);
    }

    #[test]
    fn ablation_groups_are_disjoint() {
        let mut seen = HashSet::new();
        for g in FeatureGroup::ALL {
            for &c in g.columns() {
                assert!(seen.insert(c));
            }
        }
        assert_eq!(
            "temporal".parse::<FeatureGroup>().unwrap(),
            FeatureGroup::Temporal
        );
    }
}
