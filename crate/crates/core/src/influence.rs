//! Which city adopted a hashtag first, and how alike two cities' popular
//! hashtags are.
//!
//! The per-hashtag impact of city A on city B is the normalized pair-ordering
//! statistic
//!
//! ```text
//! (#{(a, b) : t_a < t_b} - #{(a, b) : t_a > t_b}) / (|A| · |B|)
//! ```
//!
//! over all pairs of A-uses and B-uses. It is +1 when every A-use precedes
//! every B-use, -1 in the reverse case and near 0 when both cities used the
//! hashtag over the same period. A hashtag seen in only one of the two
//! cities scores +1 (only in A) or -1 (only in B). Simultaneous uses count
//! as neither before nor after. This reconstructs the score from its
//! endpoint and zero behaviour; the literature version may differ in detail.

use std::io::Write;

use serde::Serialize;

use crate::corpus::{HashtagId, LocationIdx, OccurrenceIndex};
use crate::error::{Error, Result};
use crate::geo::haversine_km;
use crate::par;

/// Size of the popular-hashtag set compared by [`similarity`].
pub const TOP_N: usize = 50;

#[derive(Debug, Clone, Copy)]
struct TagRun {
    hashtag: HashtagId,
    start: usize,
    end: usize,
}

/// Per-location view of the index: for each location, the hashtags used
/// there (ascending id) with their sorted use times.
pub struct LocationView<'a> {
    index: &'a OccurrenceIndex,
    runs: Vec<Vec<TagRun>>,
    times: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactScore {
    pub source: String,
    pub target: String,
    /// Mean per-hashtag impact; `None` when neither city used any hashtag.
    pub score: Option<f64>,
    pub hashtags_considered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityScore {
    pub a: String,
    pub b: String,
    pub score: f64,
    pub distance_km: f64,
}

/// Pair-ordering counts `(a before b, a after b)` between two sorted slices
/// in `O(|a| + |b|)`.
pub fn pair_order_counts(a: &[i64], b: &[i64]) -> (u64, u64) {
    let (mut lt, mut le) = (0usize, 0usize);
    let (mut before, mut after) = (0u64, 0u64);
    for &x in a {
        while lt < b.len() && b[lt] < x {
            lt += 1;
        }
        if le < lt {
            le = lt;
        }
        while le < b.len() && b[le] <= x {
            le += 1;
        }
        after += lt as u64;
        before += (b.len() - le) as u64;
    }
    (before, after)
}

/// Impact of A on B for one hashtag given its sorted use times in each city.
/// `None` when the hashtag occurs in neither.
pub fn impact_of_times(a: &[i64], b: &[i64]) -> Option<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => None,
        (false, true) => Some(1.0),
        (true, false) => Some(-1.0),
        (false, false) => {
            let (before, after) = pair_order_counts(a, b);
            let pairs = a.len() as u64 * b.len() as u64;
            Some((before as i64 - after as i64) as f64 / pairs as f64)
        }
    }
}

fn times_in(index: &OccurrenceIndex, h: HashtagId, loc: LocationIdx) -> Vec<i64> {
    index
        .occurrences(h)
        .iter()
        .filter(|o| o.location == loc)
        .map(|o| o.timestamp)
        .collect()
}

/// Impact of city `a` on city `b` for one hashtag.
pub fn hashtag_impact(
    index: &OccurrenceIndex,
    hashtag: &str,
    a: &str,
    b: &str,
) -> Result<Option<f64>> {
    let h = index.require(hashtag)?;
    let la = index.locations().require(a)?;
    let lb = index.locations().require(b)?;
    Ok(impact_of_times(
        &times_in(index, h, la),
        &times_in(index, h, lb),
    ))
}

impl<'a> LocationView<'a> {
    pub fn new(index: &'a OccurrenceIndex) -> Self {
        let n = index.locations().len();
        let mut sizes = vec![0usize; n];
        for h in index.hashtag_ids() {
            for o in index.occurrences(h) {
                sizes[o.location as usize] += 1;
            }
        }
        let mut times: Vec<Vec<i64>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        let mut runs: Vec<Vec<TagRun>> = vec![Vec::new(); n];
        for h in index.hashtag_ids() {
            for o in index.occurrences(h) {
                let l = o.location as usize;
                let pos = times[l].len();
                times[l].push(o.timestamp);
                match runs[l].last_mut() {
                    Some(r) if r.hashtag == h => r.end = pos + 1,
                    _ => runs[l].push(TagRun {
                        hashtag: h,
                        start: pos,
                        end: pos + 1,
                    }),
                }
            }
        }
        LocationView { index, runs, times }
    }

    pub fn index(&self) -> &OccurrenceIndex {
        self.index
    }

    fn run_times(&self, loc: LocationIdx, r: &TagRun) -> &[i64] {
        &self.times[loc as usize][r.start..r.end]
    }

    /// Mean impact over every hashtag used in at least one of the two
    /// cities. Hashtags are visited in id order, which makes the score
    /// exactly antisymmetric.
    pub fn impact_between(&self, a: LocationIdx, b: LocationIdx) -> (Option<f64>, usize) {
        let (ra, rb) = (&self.runs[a as usize], &self.runs[b as usize]);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        let mut n = 0usize;
        while i < ra.len() || j < rb.len() {
            let ha = ra.get(i).map(|r| r.hashtag);
            let hb = rb.get(j).map(|r| r.hashtag);
            let score = match (ha, hb) {
                (Some(x), Some(y)) if x == y => {
                    let s = impact_of_times(self.run_times(a, &ra[i]), self.run_times(b, &rb[j]));
                    i += 1;
                    j += 1;
                    s
                }
                (Some(x), Some(y)) if x < y => {
                    i += 1;
                    Some(1.0)
                }
                (Some(_), None) => {
                    i += 1;
                    Some(1.0)
                }
                _ => {
                    j += 1;
                    Some(-1.0)
                }
            };
            if let Some(s) = score {
                sum += s;
                n += 1;
            }
        }
        ((n > 0).then(|| sum / n as f64), n)
    }

    pub fn spatial_impact(&self, a: &str, b: &str) -> Result<ImpactScore> {
        if a == b {
            return Err(Error::SameLocation(a.to_string()));
        }
        let t = self.index.locations();
        let (la, lb) = (t.require(a)?, t.require(b)?);
        let (score, n) = self.impact_between(la, lb);
        Ok(ImpactScore {
            source: a.to_string(),
            target: b.to_string(),
            score,
            hashtags_considered: n,
        })
    }

    /// Impact of `source` on each of the `top_k` highest-ranked locations,
    /// the source itself excluded.
    pub fn impact_on_top(&self, source: &str, top_k: usize) -> Result<Vec<ImpactScore>> {
        let t = self.index.locations();
        let s = t.require(source)?;
        let targets: Vec<LocationIdx> = t
            .top_ranked(top_k)
            .into_iter()
            .filter(|&l| l != s)
            .collect();
        Ok(par::map(&targets, |&l| {
            let (score, n) = self.impact_between(s, l);
            ImpactScore {
                source: source.to_string(),
                target: t.get(l).id.clone(),
                score,
                hashtags_considered: n,
            }
        }))
    }

    /// Full impact matrix over the `top_k` locations in rank order;
    /// the diagonal is `None`.
    pub fn impact_matrix(&self, top_k: usize) -> Vec<Vec<Option<f64>>> {
        let locs = self.index.locations().top_ranked(top_k);
        let k = locs.len();
        let flat = par::map_range(k * k, |p| {
            let (i, j) = (p / k, p % k);
            if i == j {
                None
            } else {
                self.impact_between(locs[i], locs[j]).0
            }
        });
        flat.chunks(k.max(1)).map(<[_]>::to_vec).collect()
    }

    /// The `n` most used hashtags in a location: count descending, then
    /// earlier first use there, then name.
    pub fn top_hashtags_at(&self, loc: LocationIdx, n: usize) -> Vec<HashtagId> {
        let mut runs: Vec<&TagRun> = self.runs[loc as usize].iter().collect();
        let times = &self.times[loc as usize];
        runs.sort_by(|x, y| {
            (y.end - y.start)
                .cmp(&(x.end - x.start))
                .then(times[x.start].cmp(&times[y.start]))
                .then(x.hashtag.cmp(&y.hashtag))
        });
        runs.into_iter().take(n).map(|r| r.hashtag).collect()
    }

    pub fn top_hashtags(&self, location: &str, n: usize) -> Result<Vec<String>> {
        let l = self.index.locations().require(location)?;
        Ok(self
            .top_hashtags_at(l, n)
            .into_iter()
            .map(|h| self.index.hashtag_name(h).to_string())
            .collect())
    }

    fn top_sets(&self, n: usize) -> Vec<Vec<HashtagId>> {
        par::map_range(self.runs.len(), |l| {
            let mut v = self.top_hashtags_at(l as LocationIdx, n);
            v.sort_unstable();
            v
        })
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<SimilarityScore> {
        let t = self.index.locations();
        let (la, lb) = (t.require(a)?, t.require(b)?);
        let mut ta = self.top_hashtags_at(la, TOP_N);
        let mut tb = self.top_hashtags_at(lb, TOP_N);
        ta.sort_unstable();
        tb.sort_unstable();
        Ok(SimilarityScore {
            a: a.to_string(),
            b: b.to_string(),
            score: intersection_size(&ta, &tb) as f64 / TOP_N as f64,
            distance_km: haversine_km(t.get(la).coord, t.get(lb).coord),
        })
    }

    /// Similarity of `source` to every other location, sorted by distance
    /// and averaged over consecutive groups of `group_size`.
    pub fn similarity_by_distance(
        &self,
        source: &str,
        group_size: usize,
    ) -> Result<Vec<DistanceGroup>> {
        if group_size == 0 {
            return Err(Error::InvalidInput("group size must be positive".into()));
        }
        let t = self.index.locations();
        let s = t.require(source)?;
        let sets = self.top_sets(TOP_N);
        let origin = t.get(s).coord;
        let mut others: Vec<(f64, LocationIdx)> = (0..t.len() as LocationIdx)
            .filter(|&l| l != s)
            .map(|l| (haversine_km(origin, t.get(l).coord), l))
            .collect();
        if others.is_empty() {
            return Err(Error::InvalidInput(
                "similarity needs at least one other location".into(),
            ));
        }
        others.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then_with(|| t.get(x.1).id.cmp(&t.get(y.1).id))
        });
        Ok(others
            .chunks(group_size)
            .map(|chunk| {
                let n = chunk.len() as f64;
                let dist = chunk.iter().map(|c| c.0).sum::<f64>() / n;
                let sim = chunk
                    .iter()
                    .map(|&(_, l)| {
                        intersection_size(&sets[s as usize], &sets[l as usize]) as f64
                            / TOP_N as f64
                    })
                    .sum::<f64>()
                    / n;
                DistanceGroup {
                    mean_distance_km: dist,
                    mean_similarity: sim,
                    size: chunk.len(),
                }
            })
            .collect())
    }
}

fn intersection_size(a: &[HashtagId], b: &[HashtagId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceGroup {
    pub mean_distance_km: f64,
    pub mean_similarity: f64,
    pub size: usize,
}

/// Equal-width histogram of impact scores over `[-1, 1]`; a score of
/// exactly 1 falls in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Targets without a defined score.
    pub undefined: usize,
}

pub fn impact_histogram(scores: &[ImpactScore], bins: usize) -> ImpactHistogram {
    let bins = bins.max(1);
    let width = 2.0 / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| -1.0 + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    let mut undefined = 0;
    for s in scores {
        match s.score {
            Some(v) => {
                let b = (((v + 1.0) / width).floor() as usize).min(bins - 1);
                counts[b] += 1;
            }
            None => undefined += 1,
        }
    }
    ImpactHistogram {
        edges,
        counts,
        undefined,
    }
}

impl ImpactHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "locations"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([
                self.edges[i].to_string(),
                self.edges[i + 1].to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_similarity_csv<W: Write>(out: W, groups: &[DistanceGroup]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mean_distance_km", "mean_similarity", "locations"])?;
    for g in groups {
        w.write_record([
            g.mean_distance_km.to_string(),
            g.mean_similarity.to_string(),
            g.size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_index, IndexOptions, LocationTable};
    use crate::geo::LatLon;
    use crate::ingest::PostRecord;
    use chrono::{TimeZone, Utc};

    fn quadratic(a: &[i64], b: &[i64]) -> (u64, u64) {
        let mut before = 0;
        let mut after = 0;
        for x in a {
            for y in b {
                if x < y {
                    before += 1;
                } else if x > y {
                    after += 1;
                }
            }
        }
        (before, after)
    }

    #[test]
    fn anchors() {
        assert_eq!(impact_of_times(&[1, 2], &[3, 4]), Some(1.0));
        assert_eq!(impact_of_times(&[3, 4], &[1, 2]), Some(-1.0));
        assert_eq!(impact_of_times(&[1, 3], &[2, 4]), Some(0.5));
        assert_eq!(impact_of_times(&[1], &[]), Some(1.0));
        assert_eq!(impact_of_times(&[], &[1]), Some(-1.0));
        assert_eq!(impact_of_times(&[], &[]), None);
        assert_eq!(impact_of_times(&[5, 5], &[5]), Some(0.0));
    }

    #[test]
    fn merge_matches_quadratic_with_ties() {
        let a = [1, 1, 2, 5, 5, 5, 9];
        let b = [0, 1, 5, 5, 7, 9, 9, 12];
        assert_eq!(pair_order_counts(&a, &b), quadratic(&a, &b));
        assert_eq!(pair_order_counts(&b, &a), quadratic(&b, &a));
        assert_eq!(pair_order_counts(&[], &b), (0, 0));
    }

    fn city(id: &str, lat: f64, lon: f64) -> (String, String, LatLon) {
        (id.to_string(), id.to_uppercase(), LatLon::new(lat, lon))
    }

    fn rec(i: usize, loc: &str, t: i64, text: &str) -> PostRecord {
        PostRecord {
            post_id: format!("p{i}"),
            user_id: "u".into(),
            location_id: loc.into(),
            timestamp: Utc.timestamp_opt(t, 0).unwrap(),
            text: text.into(),
            comment_count: None,
        }
    }

    fn small_index() -> OccurrenceIndex {
        let t = LocationTable::new([
            city("a", 50.0, 6.0),
            city("b", 51.0, 7.0),
            city("c", 54.0, 10.0),
        ])
        .unwrap();
        let records = vec![
            rec(0, "a", 1, "#x"),
            rec(1, "a", 2, "#x #y"),
            rec(2, "b", 3, "#x"),
            rec(3, "b", 4, "#x #z"),
            rec(4, "a", 10, "#w"),
            rec(5, "c", 0, "#z"),
        ];
        build_index(&records, t, IndexOptions::default())
    }

    #[test]
    fn spatial_impact_averages_hashtags() {
        let idx = small_index();
        let v = LocationView::new(&idx);
        // x: +1 (a first), y: +1 (only a), w: +1 (only a), z: -1 (only b)
        let s = v.spatial_impact("a", "b").unwrap();
        assert_eq!(s.hashtags_considered, 4);
        assert_eq!(s.score, Some(0.5));
        let r = v.spatial_impact("b", "a").unwrap();
        assert_eq!(r.score, Some(-0.5));
        assert!(matches!(
            v.spatial_impact("a", "a"),
            Err(Error::SameLocation(_))
        ));
        assert!(v.spatial_impact("a", "nowhere").is_err());
        assert_eq!(hashtag_impact(&idx, "x", "a", "b").unwrap(), Some(1.0));
        assert_eq!(hashtag_impact(&idx, "w", "b", "c").unwrap(), None);
    }

    #[test]
    fn top_hashtags_tie_rules() {
        let idx = small_index();
        let v = LocationView::new(&idx);
        // In a: x used twice; y at t=2 precedes w at t=10.
        assert_eq!(v.top_hashtags("a", 50).unwrap(), ["x", "y", "w"]);
        assert_eq!(v.top_hashtags("a", 1).unwrap(), ["x"]);
        assert!(v.top_hashtags("nowhere", 5).is_err());
    }

    #[test]
    fn similarity_uses_fixed_denominator() {
        let idx = small_index();
        let v = LocationView::new(&idx);
        let s = v.similarity("a", "b").unwrap();
        // a: {x, y, w}, b: {x, z}
        assert_eq!(s.score, 1.0 / 50.0);
        assert!(
            (s.distance_km - haversine_km(LatLon::new(50.0, 6.0), LatLon::new(51.0, 7.0))).abs()
                < 1e-12
        );
        assert_eq!(v.similarity("a", "a").unwrap().score, 3.0 / 50.0);
    }

    #[test]
    fn histogram_binning() {
        let mk = |v: Option<f64>| ImpactScore {
            source: "s".into(),
            target: "t".into(),
            score: v,
            hashtags_considered: 1,
        };
        let h = impact_histogram(&[mk(Some(-1.0)), mk(Some(1.0)), mk(Some(0.0)), mk(None)], 4);
        assert_eq!(h.counts, vec![1, 0, 1, 1]);
        assert_eq!(h.undefined, 1);
        assert_eq!(h.edges.len(), 5);
    }

    #[test]
    fn impact_on_top_excludes_source() {
        let idx = small_index();
        let v = LocationView::new(&idx);
        let rank1 = idx
            .locations()
            .get(idx.locations().top_ranked(1)[0])
            .id
            .clone();
        assert!(v.impact_on_top(&rank1, 1).unwrap().is_empty());
        assert_eq!(v.impact_on_top(&rank1, 3).unwrap().len(), 2);
        let m = v.impact_matrix(3);
        for i in 0..3 {
            assert!(m[i][i].is_none());
            for j in 0..3 {
                if i != j {
                    assert_eq!(m[i][j].map(|x| -x), m[j][i]);
                }
            }
        }
    }

    #[test]
    fn distance_groups_chunk() {
        let idx = small_index();
        let v = LocationView::new(&idx);
        let g = v.similarity_by_distance("a", 1).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g[0].mean_distance_km < g[1].mean_distance_km);
        assert!(v.similarity_by_distance("a", 0).is_err());
    }
}
