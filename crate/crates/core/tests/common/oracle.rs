//! Direct implementations of the metric definitions, written for clarity
//! and with no shared code paths beyond plain data.

use std::collections::BTreeMap;

use super::mini::{Mini, Use};

pub const R_KM: f64 = 6371.0088;

pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
    let dp = p2 - p1;
    let dl = (b.1 - a.1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R_KM * h.sqrt().min(1.0).asin()
}

pub fn entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let mut e = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n as f64;
            e -= p * p.log2();
        }
    }
    e
}

fn by_location(uses: &[&Use]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for u in uses {
        *m.entry(u.location.clone()).or_insert(0) += 1;
    }
    m
}

/// `(location, share)` of the most used location; ties go to the smallest id.
pub fn focus(uses: &[&Use]) -> (String, f64) {
    let m = by_location(uses);
    let mut best: Option<(&String, u64)> = None;
    for (l, &c) in &m {
        if best.is_none() || c > best.unwrap().1 {
            best = Some((l, c));
        }
    }
    let (l, c) = best.unwrap();
    (l.clone(), c as f64 / uses.len() as f64)
}

pub fn spatial_entropy(uses: &[&Use]) -> f64 {
    entropy(&by_location(uses).values().copied().collect::<Vec<_>>())
}

pub fn spread(mini: &Mini, uses: &[&Use]) -> f64 {
    let pts: Vec<(f64, f64)> = uses
        .iter()
        .map(|u| {
            let c = mini.coord(&u.location);
            (c.lat, c.lon)
        })
        .collect();
    let n = pts.len() as f64;
    let lat: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lon: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mid = (exact_mean(&lat), exact_mean(&lon));
    pts.iter().map(|&p| haversine(p, mid)).sum::<f64>() / n
}

/// Mean of coordinates summed exactly in 2⁻⁶⁰ fixed point, so identical
/// inputs give back their own value.
pub fn exact_mean(values: &[f64]) -> f64 {
    const SCALE: f64 = (1u64 << 60) as f64;
    let sum: i128 = values
        .iter()
        .map(|&v| {
            let fixed = (v * SCALE) as i128;
            assert_eq!(fixed as f64 / SCALE, v, "coordinate not representable");
            fixed
        })
        .sum();
    (sum / values.len() as i128) as f64 / SCALE
}

pub fn day_of(ts: i64, tz: i64) -> i64 {
    (ts + tz).div_euclid(86_400)
}

fn by_day(uses: &[&Use], tz: i64) -> BTreeMap<i64, u64> {
    let mut m = BTreeMap::new();
    for u in uses {
        *m.entry(day_of(u.ts, tz)).or_insert(0) += 1;
    }
    m
}

/// `(peak day, share)`; ties go to the earliest day.
pub fn temporal_focus(uses: &[&Use], tz: i64) -> (i64, f64) {
    let m = by_day(uses, tz);
    let mut best = (0, 0);
    for (&d, &c) in &m {
        if c > best.1 {
            best = (d, c);
        }
    }
    (best.0, best.1 as f64 / uses.len() as f64)
}

pub fn temporal_entropy(uses: &[&Use], tz: i64) -> f64 {
    entropy(&by_day(uses, tz).values().copied().collect::<Vec<_>>())
}

/// Mean absolute deviation in days, computed exactly as
/// `Σ|n·t_i − Σt| / n²` before the final division.
pub fn temporal_spread(uses: &[&Use]) -> f64 {
    let n = uses.len() as i128;
    let s: i128 = uses.iter().map(|u| u.ts as i128).sum();
    let dev: i128 = uses.iter().map(|u| (n * u.ts as i128 - s).abs()).sum();
    dev as f64 / (n * n) as f64 / 86_400.0
}

pub fn local_variation(uses: &[&Use]) -> Option<f64> {
    let mut t: Vec<i64> = uses.iter().map(|u| u.ts).collect();
    t.sort();
    if t.len() < 3 {
        return None;
    }
    let iv: Vec<f64> = (1..t.len()).map(|i| (t[i] - t[i - 1]) as f64).collect();
    let mut acc = 0.0;
    for i in 0..iv.len() - 1 {
        let s = iv[i] + iv[i + 1];
        if s > 0.0 {
            acc += ((iv[i] - iv[i + 1]) / s).powi(2);
        }
    }
    Some(3.0 * acc / (iv.len() - 1) as f64)
}

/// `(increase, decline)` around the temporal-focus peak day.
pub fn peak_shape(uses: &[&Use], tz: i64) -> (f64, f64) {
    let (peak, _) = temporal_focus(uses, tz);
    let m = by_day(uses, tz);
    let at = m[&peak] as f64;
    let before: u64 = (peak - 7..peak)
        .map(|d| m.get(&d).copied().unwrap_or(0))
        .sum();
    let after: u64 = (peak + 1..=peak + 7)
        .map(|d| m.get(&d).copied().unwrap_or(0))
        .sum();
    (before as f64 / at, after as f64 / at)
}

/// Pair-enumeration impact of `a` on `b`.
pub fn impact(a: &[i64], b: &[i64]) -> Option<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => None,
        (false, true) => Some(1.0),
        (true, false) => Some(-1.0),
        _ => {
            let mut s = 0i64;
            for &x in a {
                for &y in b {
                    if x < y {
                        s += 1;
                    } else if x > y {
                        s -= 1;
                    }
                }
            }
            Some(s as f64 / (a.len() * b.len()) as f64)
        }
    }
}

/// `(a before b, a after b)` by enumerating every pair.
pub fn pair_counts(a: &[i64], b: &[i64]) -> (u64, u64) {
    let (mut lt, mut gt) = (0, 0);
    for &x in a {
        for &y in b {
            if x < y {
                lt += 1;
            } else if x > y {
                gt += 1;
            }
        }
    }
    (lt, gt)
}

pub fn times_at(uses: &[&Use], location: &str) -> Vec<i64> {
    let mut t: Vec<i64> = uses
        .iter()
        .filter(|u| u.location == location)
        .map(|u| u.ts)
        .collect();
    t.sort();
    t
}

/// Mean per-hashtag impact over hashtags used in either city.
pub fn city_impact(mini: &Mini, a: &str, b: &str) -> Option<f64> {
    let scores: Vec<f64> = mini
        .tags()
        .iter()
        .filter_map(|t| {
            let u = mini.uses_of(t);
            impact(&times_at(&u, a), &times_at(&u, b))
        })
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// The 50 most used hashtags at a location: count descending, then first
/// use there, then name.
pub fn top50(mini: &Mini, location: &str) -> Vec<String> {
    let mut stats: BTreeMap<String, (u64, i64)> = BTreeMap::new();
    for u in mini.uses.iter().filter(|u| u.location == location) {
        let e = stats.entry(u.tag.clone()).or_insert((0, i64::MAX));
        e.0 += 1;
        e.1 = e.1.min(u.ts);
    }
    let mut v: Vec<(String, u64, i64)> = stats.into_iter().map(|(t, (c, f))| (t, c, f)).collect();
    v.sort_by(|x, y| y.1.cmp(&x.1).then(x.2.cmp(&y.2)).then(x.0.cmp(&y.0)));
    v.into_iter().take(50).map(|x| x.0).collect()
}

pub fn similarity(mini: &Mini, a: &str, b: &str) -> f64 {
    let ta = top50(mini, a);
    let tb = top50(mini, b);
    ta.iter().filter(|t| tb.contains(t)).count() as f64 / 50.0
}
