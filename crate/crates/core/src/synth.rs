//! Labeled synthetic corpora with a ground-truth ledger.
//!
//! A [`World`] places Zipf-weighted cities in a bounding box and plans
//! every hashtag up front (name, class, use count) from the master seed.
//! Each hashtag is then generated from its own ChaCha stream, so any
//! hashtag can be produced independently and in parallel with identical
//! output. The ledger records, per hashtag, exact occurrence counts per
//! city and per UTC day.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::classify::HashtagClass;
use crate::corpus::{LocationTable, OccurrenceIndex, SECONDS_PER_DAY};
use crate::error::{Error, Result};
use crate::geo::{haversine_km, LatLon};
use crate::ingest::PostRecord;
use crate::par;

/// Minimum distinct cities of a countrywide hashtag.
pub const COUNTRYWIDE_MIN_CITIES: usize = 20;
pub const COUNTRYWIDE_MAX_CITIES: usize = 40;
/// Maximum distinct cities of a local hashtag.
pub const LOCAL_MAX_CITIES: usize = 3;
/// Radius within which a local phenomenon picks its extra cities.
pub const NEARBY_KM: f64 = 40.0;
pub const LOCAL_EVENT_MAX_DAYS: i64 = 3;
pub const EVENT_MAX_DAYS: i64 = 5;
pub const LONG_LIVED_MIN_DAYS: i64 = 60;
pub const LONG_LIVED_MAX_DAYS: i64 = 300;
/// Mean arrival lag of a diffusing meme per km from its seeding city.
pub const LAG_DAYS_PER_KM: f64 = 0.05;
/// Memes are seeded in one of this many highest-weight cities.
pub const SEED_CITY_RANKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub const GERMANY: BoundingBox = BoundingBox {
        min_lat: 47.0,
        max_lat: 55.0,
        min_lon: 6.0,
        max_lon: 15.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub cities: usize,
    pub bbox: BoundingBox,
    /// Inclusive start of the simulated period.
    pub start: DateTime<Utc>,
    /// Exclusive end of the simulated period.
    pub end: DateTime<Utc>,
    pub class_counts: BTreeMap<HashtagClass, usize>,
    /// Total hashtag occurrences across the corpus.
    pub total_uses: u64,
    pub min_uses_per_hashtag: u64,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            cities: 200,
            bbox: BoundingBox::GERMANY,
            start: Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap(),
            end: Utc.with_ymd_and_hms(2017, 9, 1, 0, 0, 0).unwrap(),
            class_counts: HashtagClass::ALL.into_iter().map(|c| (c, 500)).collect(),
            total_uses: 1_000_000,
            min_uses_per_hashtag: 30,
            seed: 7,
        }
    }
}

impl WorldSpec {
    /// Splits `n` hashtags evenly over the four classes; the remainder goes
    /// to the earlier classes.
    pub fn with_hashtags(mut self, n: usize) -> Self {
        self.class_counts = HashtagClass::ALL
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, n / 4 + usize::from(i < n % 4)))
            .collect();
        self
    }

    pub fn hashtag_count(&self) -> usize {
        self.class_counts.values().sum()
    }

    fn count(&self, class: HashtagClass) -> usize {
        self.class_counts.get(&class).copied().unwrap_or(0)
    }

    fn window_days(&self) -> i64 {
        (self.end - self.start).num_seconds() / SECONDS_PER_DAY
    }

    pub fn validate(&self) -> Result<()> {
        let infeasible = |m: String| Err(Error::Infeasible(m));
        if self.cities < 2 {
            return infeasible(format!("{} cities, at least 2 required", self.cities));
        }
        let b = &self.bbox;
        if !(b.min_lat < b.max_lat && b.min_lon < b.max_lon)
            || !LatLon::new(b.min_lat, b.min_lon).is_valid()
            || !LatLon::new(b.max_lat, b.max_lon).is_valid()
        {
            return infeasible(format!("bad bounding box {b:?}"));
        }
        if self.end <= self.start {
            return infeasible("window has no positive length".into());
        }
        let countrywide = self.count(HashtagClass::Event) + self.count(HashtagClass::OtherMeme);
        if countrywide > 0 {
            if self.cities < COUNTRYWIDE_MIN_CITIES {
                return infeasible(format!(
                    "countrywide classes need {COUNTRYWIDE_MIN_CITIES} cities, spec has {}",
                    self.cities
                ));
            }
            if self.min_uses_per_hashtag < COUNTRYWIDE_MIN_CITIES as u64 {
                return infeasible(format!(
                    "countrywide classes need at least {COUNTRYWIDE_MIN_CITIES} uses per hashtag"
                ));
            }
        }
        let long_lived =
            self.count(HashtagClass::LocalPhenomenon) + self.count(HashtagClass::OtherMeme);
        if long_lived > 0 && self.window_days() < LONG_LIVED_MIN_DAYS {
            return infeasible(format!(
                "long-lived classes need a {LONG_LIVED_MIN_DAYS}-day window"
            ));
        }
        if self.window_days() < EVENT_MAX_DAYS {
            return infeasible(format!("window shorter than {EVENT_MAX_DAYS} days"));
        }
        let n = self.hashtag_count() as u64;
        if self.min_uses_per_hashtag == 0 && n > 0 {
            return infeasible("every hashtag needs at least one use".into());
        }
        if n * self.min_uses_per_hashtag > self.total_uses {
            return infeasible(format!(
                "{n} hashtags × {} uses exceeds {} total uses",
                self.min_uses_per_hashtag, self.total_uses
            ));
        }
        if n > 0 && self.total_uses > u32::MAX as u64 {
            return infeasible("total uses exceed the u32 occurrence range".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRegime {
    Local,
    Countrywide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalRegime {
    ShortLived,
    LongLived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub hashtag: String,
    pub class: HashtagClass,
    pub spatial_regime: SpatialRegime,
    pub temporal_regime: TemporalRegime,
    /// Location id where a diffusing meme started.
    pub seeding_city: Option<String>,
    pub uses: u64,
    pub posts: u64,
    pub per_city: BTreeMap<String, u64>,
    pub per_day: BTreeMap<NaiveDate, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub seed: u64,
    pub total_uses: u64,
    pub total_posts: u64,
    /// Sorted by hashtag name.
    pub hashtags: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn entry(&self, hashtag: &str) -> Option<&LedgerEntry> {
        self.hashtags
            .binary_search_by(|e| e.hashtag.as_str().cmp(hashtag))
            .ok()
            .map(|i| &self.hashtags[i])
    }

    pub fn class_counts(&self) -> BTreeMap<HashtagClass, usize> {
        let mut out = BTreeMap::new();
        for e in &self.hashtags {
            *out.entry(e.class).or_insert(0) += 1;
        }
        out
    }

    /// `(hashtag, class)` pairs, usable as a label set.
    pub fn labels(&self) -> Vec<(String, HashtagClass)> {
        self.hashtags
            .iter()
            .map(|e| (e.hashtag.clone(), e.class))
            .collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}

#[derive(Debug, Clone)]
struct Plan {
    name: String,
    class: HashtagClass,
    uses: u64,
}

/// Cities plus the per-hashtag plan; generation happens on demand.
#[derive(Debug, Clone)]
pub struct World {
    spec: WorldSpec,
    locations: LocationTable,
    coords: Vec<LatLon>,
    /// Normalized population weight by city rank.
    weights: Vec<f64>,
    user_pools: Vec<u32>,
    plans: Vec<Plan>,
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ber", "lin", "ha", "mün", "chen", "kö", "ln", "stra", "ße", "fe", "st",
    "tag", "zu", "wie", "see", "bä", "ren", "ost", "wal", "dö", "ner", "kiez", "lu", "fi",
];

const WORDS: &[&str] = &[
    "heute", "endlich", "wer", "noch", "mal", "hier", "gerade", "alle", "wieder", "morgen",
    "schön", "los", "jetzt", "leute", "echt",
];

impl World {
    pub fn new(spec: &WorldSpec) -> Result<World> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let width = spec.cities.to_string().len().max(3);
        let b = spec.bbox;
        let coords: Vec<LatLon> = (0..spec.cities)
            .map(|_| {
                LatLon::new(
                    rng.random_range(b.min_lat..b.max_lat),
                    rng.random_range(b.min_lon..b.max_lon),
                )
            })
            .collect();
        let locations = LocationTable::new(
            coords
                .iter()
                .enumerate()
                .map(|(i, &c)| (format!("c{:0width$}", i + 1), format!("City {}", i + 1), c)),
        )?;
        let raw: Vec<f64> = (1..=spec.cities).map(|r| 1.0 / r as f64).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let user_pools = weights
            .iter()
            .map(|w| 200 + (20_000.0 * w).round() as u32)
            .collect();

        let mut classes: Vec<HashtagClass> = HashtagClass::ALL
            .into_iter()
            .flat_map(|c| std::iter::repeat_n(c, spec.count(c)))
            .collect();
        classes.shuffle(&mut rng);
        let uses = allocate_uses(
            &mut rng,
            classes.len(),
            spec.total_uses,
            spec.min_uses_per_hashtag,
        );
        let mut plans: Vec<Plan> = classes
            .into_iter()
            .zip(uses)
            .enumerate()
            .map(|(i, (class, uses))| {
                let n = rng.random_range(2..=3);
                let stem: String = (0..n)
                    .map(|_| *SYLLABLES.choose(&mut rng).expect("syllables"))
                    .collect();
                Plan {
                    name: format!("{stem}{i}"),
                    class,
                    uses,
                }
            })
            .collect();
        plans.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(World {
            spec: spec.clone(),
            locations,
            coords,
            weights,
            user_pools,
            plans,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    pub fn locations(&self) -> &LocationTable {
        &self.locations
    }

    /// Number of planned hashtags.
    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    /// Records and ledger entry of hashtag `i` (in name order).
    pub fn hashtag(&self, i: usize) -> (Vec<PostRecord>, LedgerEntry) {
        let plan = &self.plans[i];
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(i as u64 + 1);
        let schedule = self.schedule(&mut rng, plan);
        self.render(&mut rng, i, plan, schedule)
    }

    /// Streams hashtags in name order, generating up to `batch` hashtags in
    /// parallel at a time.
    pub fn for_each_batch(
        &self,
        batch: usize,
        mut f: impl FnMut(Vec<(Vec<PostRecord>, LedgerEntry)>),
    ) {
        let batch = batch.max(1);
        let mut start = 0;
        while start < self.len() {
            let end = (start + batch).min(self.len());
            f(par::map_range(end - start, |k| self.hashtag(start + k)));
            start = end;
        }
    }

    fn schedule(&self, rng: &mut ChaCha8Rng, plan: &Plan) -> Schedule {
        let start = self.spec.start.timestamp();
        let window_days = self.spec.window_days();
        let by_weight = WeightedIndex::new(&self.weights).expect("positive weights");
        let day_aligned = |rng: &mut ChaCha8Rng, len: i64| {
            // First whole day inside the window, last day a burst can start.
            let first =
                (self.spec.start.timestamp() + SECONDS_PER_DAY - 1).div_euclid(SECONDS_PER_DAY);
            let last = self.spec.end.timestamp().div_euclid(SECONDS_PER_DAY) - len;
            let day = if last >= first {
                rng.random_range(first..=last)
            } else {
                first
            };
            day * SECONDS_PER_DAY
        };
        let long_span = |rng: &mut ChaCha8Rng| {
            let max = LONG_LIVED_MAX_DAYS.min(window_days);
            let days = rng.random_range(LONG_LIVED_MIN_DAYS..=max.max(LONG_LIVED_MIN_DAYS));
            let latest = self.spec.end.timestamp() - days * SECONDS_PER_DAY;
            let t0 = if latest > start {
                rng.random_range(start..latest)
            } else {
                start
            };
            (t0, days * SECONDS_PER_DAY)
        };
        match plan.class {
            HashtagClass::LocalEvent => {
                let city = by_weight.sample(rng);
                let len = rng.random_range(1..=LOCAL_EVENT_MAX_DAYS);
                let t0 = day_aligned(rng, len);
                Schedule {
                    cities: vec![(city, plan.uses, t0, t0 + len * SECONDS_PER_DAY)],
                    seeding: None,
                }
            }
            HashtagClass::Event => {
                let cities = self.countrywide_cities(rng, None);
                let counts = self.split(rng, plan.uses, &cities);
                let len = rng.random_range(1..=EVENT_MAX_DAYS);
                let t0 = day_aligned(rng, len);
                Schedule {
                    cities: cities
                        .into_iter()
                        .zip(counts)
                        .map(|(c, n)| (c, n, t0, t0 + len * SECONDS_PER_DAY))
                        .collect(),
                    seeding: None,
                }
            }
            HashtagClass::LocalPhenomenon => {
                let base = by_weight.sample(rng);
                let mut near: Vec<(f64, usize)> = (0..self.coords.len())
                    .filter(|&c| c != base)
                    .map(|c| (haversine_km(self.coords[base], self.coords[c]), c))
                    .filter(|(d, _)| *d <= NEARBY_KM)
                    .collect();
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let extra = rng.random_range(0..LOCAL_MAX_CITIES).min(near.len());
                let mut cities = vec![base];
                cities.extend(near[..extra].iter().map(|&(_, c)| c));
                cities.truncate(plan.uses as usize);
                let counts = self.split(rng, plan.uses, &cities);
                let (t0, span) = long_span(rng);
                Schedule {
                    cities: cities
                        .into_iter()
                        .zip(counts)
                        .map(|(c, n)| (c, n, t0, t0 + span))
                        .collect(),
                    seeding: None,
                }
            }
            HashtagClass::OtherMeme => {
                let seed_city = rng.random_range(0..SEED_CITY_RANKS.min(self.coords.len()));
                let cities = self.countrywide_cities(rng, Some(seed_city));
                let counts = self.split(rng, plan.uses, &cities);
                let (t0, span) = long_span(rng);
                let cities = cities
                    .into_iter()
                    .zip(counts)
                    .map(|(c, n)| {
                        let km = haversine_km(self.coords[seed_city], self.coords[c]);
                        let lag = if c == seed_city || km <= 0.0 {
                            0.0
                        } else {
                            Exp::new(1.0 / (km * LAG_DAYS_PER_KM))
                                .expect("positive rate")
                                .sample(rng)
                        };
                        let lag = ((lag * SECONDS_PER_DAY as f64) as i64).min(span * 3 / 4);
                        (c, n, t0 + lag, t0 + span)
                    })
                    .collect();
                Schedule {
                    cities,
                    seeding: Some(seed_city),
                }
            }
        }
    }

    /// Population-weighted distinct cities; `first` is always included.
    fn countrywide_cities(&self, rng: &mut ChaCha8Rng, first: Option<usize>) -> Vec<usize> {
        let m = rng
            .random_range(COUNTRYWIDE_MIN_CITIES..=COUNTRYWIDE_MAX_CITIES.min(self.coords.len()));
        // Weighted sampling without replacement by exponential keys.
        let mut keyed: Vec<(f64, usize)> = (0..self.coords.len())
            .filter(|&c| Some(c) != first)
            .map(|c| {
                (
                    -rng.random::<f64>().max(f64::MIN_POSITIVE).ln() / self.weights[c],
                    c,
                )
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut out: Vec<usize> = first.into_iter().collect();
        out.extend(keyed.into_iter().take(m - out.len()).map(|(_, c)| c));
        out
    }

    /// One use per city, the rest drawn by city weight.
    fn split(&self, rng: &mut ChaCha8Rng, uses: u64, cities: &[usize]) -> Vec<u64> {
        let mut counts = vec![1u64; cities.len()];
        let w: Vec<f64> = cities.iter().map(|&c| self.weights[c]).collect();
        let pick = WeightedIndex::new(&w).expect("positive weights");
        for _ in cities.len() as u64..uses {
            counts[pick.sample(rng)] += 1;
        }
        counts
    }

    fn render(
        &self,
        rng: &mut ChaCha8Rng,
        index: usize,
        plan: &Plan,
        schedule: Schedule,
    ) -> (Vec<PostRecord>, LedgerEntry) {
        let repeat_user = rng.random_range(0.0..0.5);
        let p_excl = rng.random_range(0.0..0.4);
        let p_question = rng.random_range(0.0..0.3);
        let mean_comments: f64 = rng.random_range(0.0..3.0);
        let comments = Exp::new(1.0 / mean_comments.max(1e-3)).expect("positive rate");
        let mut entry = LedgerEntry {
            hashtag: plan.name.clone(),
            class: plan.class,
            spatial_regime: if plan.class.is_local() {
                SpatialRegime::Local
            } else {
                SpatialRegime::Countrywide
            },
            temporal_regime: if plan.class.is_short_lived() {
                TemporalRegime::ShortLived
            } else {
                TemporalRegime::LongLived
            },
            seeding_city: schedule
                .seeding
                .map(|c| self.locations.get(c as u32).id.clone()),
            uses: 0,
            posts: 0,
            per_city: BTreeMap::new(),
            per_day: BTreeMap::new(),
        };
        let mut records = Vec::with_capacity(plan.uses as usize);
        for (city, n, from, to) in schedule.cities {
            let location_id = &self.locations.get(city as u32).id;
            let mut used: Vec<u32> = Vec::new();
            let mut left = n;
            while left > 0 {
                let user = if !used.is_empty() && rng.random_bool(repeat_user) {
                    *used.choose(rng).expect("nonempty")
                } else {
                    let u = rng.random_range(0..self.user_pools[city]);
                    used.push(u);
                    u
                };
                let ts = if to > from {
                    rng.random_range(from..to)
                } else {
                    from
                };
                let copies = if left >= 2 && rng.random_bool(0.02) {
                    2
                } else {
                    1
                };
                let w1 = WORDS.choose(rng).expect("words");
                let w2 = WORDS.choose(rng).expect("words");
                let mut text = if copies == 2 {
                    format!("{w1} #{0} {w2} #{0}", plan.name)
                } else {
                    format!("{w1} #{} {w2}", plan.name)
                };
                if rng.random_bool(p_excl) {
                    text.push('!');
                }
                if rng.random_bool(p_question) {
                    text.push('?');
                }
                let timestamp = Utc.timestamp_opt(ts, 0).single().expect("in range");
                records.push(PostRecord {
                    post_id: format!("p{index}_{}", records.len()),
                    user_id: format!("{location_id}u{user}"),
                    location_id: location_id.clone(),
                    timestamp,
                    text,
                    comment_count: Some(comments.sample(rng) as u32),
                });
                *entry.per_city.entry(location_id.clone()).or_insert(0) += copies;
                *entry.per_day.entry(timestamp.date_naive()).or_insert(0) += copies;
                entry.uses += copies;
                entry.posts += 1;
                left -= copies;
            }
        }
        (records, entry)
    }
}

/// Per city: `(city, uses, first second, end second exclusive)`.
struct Schedule {
    cities: Vec<(usize, u64, i64, i64)>,
    seeding: Option<usize>,
}

/// Heavy-tailed use counts, each at least `min`, summing to `total`.
fn allocate_uses(rng: &mut ChaCha8Rng, n: usize, total: u64, min: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    let dist = LogNormal::new(0.0, 1.0).expect("valid lognormal");
    let w: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    let sum: f64 = w.iter().sum();
    let extra = total - min * n as u64;
    let exact: Vec<f64> = w.iter().map(|x| x / sum * extra as f64).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| min + x.floor() as u64).collect();
    let mut short = total - out.iter().sum::<u64>();
    // Largest remainders take the leftover units.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    for i in order.into_iter().cycle() {
        if short == 0 {
            break;
        }
        out[i] += 1;
        short -= 1;
    }
    out
}

/// A generated corpus held in memory.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub records: Vec<PostRecord>,
    pub ledger: Ledger,
    pub locations: LocationTable,
}

/// Generates the whole corpus; records come out in hashtag-name order.
pub fn generate(spec: &WorldSpec) -> Result<SynthCorpus> {
    let world = World::new(spec)?;
    let parts = par::map_range(world.len(), |i| world.hashtag(i));
    let mut records = Vec::with_capacity(spec.total_uses as usize);
    let mut entries = Vec::with_capacity(parts.len());
    for (r, e) in parts {
        records.extend(r);
        entries.push(e);
    }
    let ledger = Ledger {
        seed: spec.seed,
        total_uses: entries.iter().map(|e| e.uses).sum(),
        total_posts: records.len() as u64,
        hashtags: entries,
    };
    Ok(SynthCorpus {
        records,
        ledger,
        locations: world.locations.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    /// In the ledger, absent from the index.
    Missing,
    /// In the index, absent from the ledger.
    Unexpected,
    /// Present in both with different counts.
    Counts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub hashtag: String,
    pub kind: DiscrepancyKind,
    pub expected_uses: u64,
    pub found_uses: u64,
    /// `(location id, expected, found)` for differing cities.
    pub cities: Vec<(String, u64, u64)>,
    /// `(day, expected, found)` for differing UTC days.
    pub days: Vec<(NaiveDate, u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub hashtags_checked: usize,
    pub expected_uses: u64,
    pub found_uses: u64,
    pub discrepancies: Vec<Discrepancy>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

fn diff_maps<K: Ord + Clone>(
    expected: &BTreeMap<K, u64>,
    found: &BTreeMap<K, u64>,
) -> Vec<(K, u64, u64)> {
    let mut keys: Vec<&K> = expected.keys().chain(found.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|k| {
            let (e, f) = (
                expected.get(k).copied().unwrap_or(0),
                found.get(k).copied().unwrap_or(0),
            );
            (e != f).then(|| (k.clone(), e, f))
        })
        .collect()
}

/// Recounts every ledger hashtag from the index; one discrepancy per
/// hashtag whose counts differ.
pub fn verify(ledger: &Ledger, index: &OccurrenceIndex) -> VerifyReport {
    let locations = index.locations();
    let mut discrepancies: Vec<Discrepancy> = par::map(&ledger.hashtags, |e| {
        let Some(id) = index.hashtag_id(&e.hashtag) else {
            return Some(Discrepancy {
                hashtag: e.hashtag.clone(),
                kind: DiscrepancyKind::Missing,
                expected_uses: e.uses,
                found_uses: 0,
                cities: Vec::new(),
                days: Vec::new(),
            });
        };
        let mut per_city = BTreeMap::new();
        let mut per_day = BTreeMap::new();
        for o in index.occurrences(id) {
            *per_city
                .entry(locations.get(o.location).id.clone())
                .or_insert(0) += 1;
            let day = OccurrenceIndex::day_to_date(o.timestamp.div_euclid(SECONDS_PER_DAY) as i32);
            *per_day.entry(day).or_insert(0) += 1;
        }
        let cities = diff_maps(&e.per_city, &per_city);
        let days = diff_maps(&e.per_day, &per_day);
        let found = index.uses(id) as u64;
        (found != e.uses || !cities.is_empty() || !days.is_empty()).then(|| Discrepancy {
            hashtag: e.hashtag.clone(),
            kind: DiscrepancyKind::Counts,
            expected_uses: e.uses,
            found_uses: found,
            cities,
            days,
        })
    })
    .into_iter()
    .flatten()
    .collect();
    for h in index.hashtag_ids() {
        let name = index.hashtag_name(h);
        if ledger.entry(name).is_none() {
            discrepancies.push(Discrepancy {
                hashtag: name.to_string(),
                kind: DiscrepancyKind::Unexpected,
                expected_uses: 0,
                found_uses: index.uses(h) as u64,
                cities: Vec::new(),
                days: Vec::new(),
            });
        }
    }
    VerifyReport {
        hashtags_checked: ledger.hashtags.len(),
        expected_uses: ledger.total_uses,
        found_uses: index.totals().uses,
        discrepancies,
    }
}
