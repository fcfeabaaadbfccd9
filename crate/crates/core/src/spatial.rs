//! Spatial focus, entropy and spread of a hashtag.
//!
//! With `P(l)` the share of a hashtag's occurrences in location `l`:
//! focus is `max_l P(l)`, entropy is `-Σ P(l) log2 P(l)`, and spread is the
//! mean great-circle distance from each occurrence to the occurrence-weighted
//! mean latitude/longitude.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::corpus::{HashtagId, LocationIdx, LocationTable, Occurrence, OccurrenceIndex};
use crate::error::Result;
use crate::geo::{haversine_km, LatLon};
use crate::par;
use crate::stats::entropy_bits;

/// Hashtags need at least this many occurrences for any metric.
pub const MIN_METRIC_USES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialMetrics {
    pub hashtag: String,
    pub uses: usize,
    pub focus_location: String,
    pub focus: f64,
    pub entropy: f64,
    pub spread_km: f64,
    pub midpoint: LatLon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialMetric {
    Focus,
    Entropy,
    Spread,
}

/// Occurrence counts per location, ordered by location index.
pub fn location_counts(occurrences: &[Occurrence]) -> Vec<(LocationIdx, u64)> {
    let mut locs: Vec<LocationIdx> = occurrences.iter().map(|o| o.location).collect();
    locs.sort_unstable();
    let mut out: Vec<(LocationIdx, u64)> = Vec::new();
    for l in locs {
        match out.last_mut() {
            Some((last, n)) if *last == l => *n += 1,
            _ => out.push((l, 1)),
        }
    }
    out
}

/// Location with the most occurrences and its share. Ties go to the
/// lexicographically smallest location id.
fn focus_of(counts: &[(LocationIdx, u64)], locations: &LocationTable) -> (LocationIdx, f64) {
    let total: u64 = counts.iter().map(|c| c.1).sum();
    let &(best, n) = counts
        .iter()
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| locations.get(b.0).id.cmp(&locations.get(a.0).id))
        })
        .expect("at least one occurrence");
    (best, n as f64 / total as f64)
}

/// Weighted mean of coordinates. Deviations are taken from the first point,
/// so identical inputs reproduce that point exactly.
pub fn weighted_midpoint(points: &[(LatLon, u64)]) -> LatLon {
    let origin = points[0].0;
    let (mut dlat, mut dlon, mut w) = (0.0, 0.0, 0.0);
    for &(p, n) in points {
        let n = n as f64;
        dlat += n * (p.lat - origin.lat);
        dlon += n * (p.lon - origin.lon);
        w += n;
    }
    LatLon::new(origin.lat + dlat / w, origin.lon + dlon / w)
}

/// Mean latitude and longitude over occurrences; a city with `k`
/// occurrences carries weight `k`.
pub fn geographic_midpoint(occurrences: &[Occurrence], locations: &LocationTable) -> LatLon {
    let points: Vec<(LatLon, u64)> = location_counts(occurrences)
        .into_iter()
        .map(|(l, n)| (locations.get(l).coord, n))
        .collect();
    weighted_midpoint(&points)
}

fn spread_of(points: &[(LatLon, u64)]) -> (LatLon, f64) {
    let mid = weighted_midpoint(points);
    let (mut sum, mut n) = (0.0, 0u64);
    for &(p, k) in points {
        sum += k as f64 * haversine_km(p, mid);
        n += k;
    }
    (mid, sum / n as f64)
}

/// `P(l)` for every location the hashtag occurred in, keyed by location id.
pub fn location_probabilities(
    index: &OccurrenceIndex,
    hashtag: &str,
) -> Result<BTreeMap<String, f64>> {
    let id = index.require(hashtag)?;
    let counts = location_counts(index.occurrences(id));
    let total = index.uses(id) as f64;
    Ok(counts
        .into_iter()
        .map(|(l, n)| (index.locations().get(l).id.clone(), n as f64 / total))
        .collect())
}

pub fn focus(index: &OccurrenceIndex, hashtag: &str) -> Result<(String, f64)> {
    let id = index.require(hashtag)?;
    let (l, p) = focus_of(&location_counts(index.occurrences(id)), index.locations());
    Ok((index.locations().get(l).id.clone(), p))
}

pub fn entropy(index: &OccurrenceIndex, hashtag: &str) -> Result<f64> {
    let id = index.require(hashtag)?;
    let counts: Vec<u64> = location_counts(index.occurrences(id))
        .into_iter()
        .map(|c| c.1)
        .collect();
    Ok(entropy_bits(&counts))
}

/// Mean distance in km from each occurrence to the geographic midpoint.
pub fn spread(index: &OccurrenceIndex, hashtag: &str) -> Result<f64> {
    let id = index.require(hashtag)?;
    Ok(spatial_metrics(index, id).spread_km)
}

/// All spatial metrics of one hashtag.
pub fn spatial_metrics(index: &OccurrenceIndex, id: HashtagId) -> SpatialMetrics {
    let locations = index.locations();
    let counts = location_counts(index.occurrences(id));
    let (focus_loc, focus) = focus_of(&counts, locations);
    let raw: Vec<u64> = counts.iter().map(|c| c.1).collect();
    let points: Vec<(LatLon, u64)> = counts
        .iter()
        .map(|&(l, n)| (locations.get(l).coord, n))
        .collect();
    let (midpoint, spread_km) = spread_of(&points);
    SpatialMetrics {
        hashtag: index.hashtag_name(id).to_string(),
        uses: index.uses(id),
        focus_location: locations.get(focus_loc).id.clone(),
        focus,
        entropy: entropy_bits(&raw),
        spread_km,
        midpoint,
    }
}

/// Metrics for every hashtag with at least `min_uses` occurrences, in
/// hashtag order.
pub fn all_spatial_metrics(index: &OccurrenceIndex, min_uses: usize) -> Vec<SpatialMetrics> {
    let ids: Vec<HashtagId> = index
        .hashtag_ids()
        .filter(|&h| index.uses(h) >= min_uses.max(MIN_METRIC_USES))
        .collect();
    par::map(&ids, |&h| spatial_metrics(index, h))
}

impl SpatialMetrics {
    pub fn get(&self, metric: SpatialMetric) -> f64 {
        match metric {
            SpatialMetric::Focus => self.focus,
            SpatialMetric::Entropy => self.entropy,
            SpatialMetric::Spread => self.spread_km,
        }
    }
}

pub fn write_spatial_csv<W: Write>(out: W, rows: &[SpatialMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "hashtag",
        "uses",
        "focus_location",
        "focus",
        "entropy",
        "spread_km",
        "midpoint_lat",
        "midpoint_lon",
    ])?;
    for r in rows {
        w.write_record([
            r.hashtag.clone(),
            r.uses.to_string(),
            r.focus_location.clone(),
            r.focus.to_string(),
            r.entropy.to_string(),
            r.spread_km.to_string(),
            r.midpoint.lat.to_string(),
            r.midpoint.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
