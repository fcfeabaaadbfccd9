//! The occurrence index and location table every metric reads.
//!
//! Occurrences are stored per hashtag in one flat array (CSR layout) sorted
//! by timestamp with ties broken by post id. Hashtag ids are assigned in
//! lexicographic order of the canonical name, so the index does not depend
//! on input record order. After [`IndexBuilder::finish`] the index is
//! immutable.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::hash::BuildHasher;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use hashbrown::{DefaultHashBuilder, HashTable};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::LatLon;
use crate::ingest::{extract_hashtags, PostRecord, SkipCounts, SkipReason};
use crate::par;

pub type HashtagId = u32;
pub type LocationIdx = u32;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One use of a hashtag in one post. Strings live in the index tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    /// Unix seconds, UTC.
    pub timestamp: i64,
    pub location: LocationIdx,
    pub user: u32,
    pub post: u32,
    /// Calendar day index (days since 1970-01-01 after the index's zone offset).
    pub day: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub name: String,
    pub coord: LatLon,
    pub post_count: u64,
    /// 1-based rank by post count, descending; ties by id.
    pub rank: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocationTable {
    locations: Vec<Location>,
    #[serde(skip)]
    by_id: HashMap<String, LocationIdx>,
}

#[derive(Debug, Deserialize)]
struct LocationRow {
    location_id: String,
    name: String,
    lat: f64,
    lon: f64,
}

impl LocationTable {
    /// Builds a table from `(id, name, coordinate)` rows. Ranks start out in
    /// input order until post counts are known.
    pub fn new(rows: impl IntoIterator<Item = (String, String, LatLon)>) -> Result<Self> {
        let mut table = LocationTable::default();
        for (id, name, coord) in rows {
            if !coord.is_valid() || !coord.lat.is_finite() || !coord.lon.is_finite() {
                return Err(Error::InvalidCoordinates {
                    id,
                    lat: coord.lat,
                    lon: coord.lon,
                });
            }
            if table.by_id.contains_key(&id) {
                return Err(Error::DuplicateLocation(id));
            }
            let idx = table.locations.len() as LocationIdx;
            table.by_id.insert(id.clone(), idx);
            table.locations.push(Location {
                id,
                name,
                coord,
                post_count: 0,
                rank: idx + 1,
            });
        }
        Ok(table)
    }

    /// Reads `location_id,name,lat,lon` CSV.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for row in rdr.deserialize::<LocationRow>() {
            let row = row?;
            rows.push((row.location_id, row.name, LatLon::new(row.lat, row.lon)));
        }
        Self::new(rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["location_id", "name", "lat", "lon"])?;
        for l in &self.locations {
            w.write_record([
                l.id.as_str(),
                l.name.as_str(),
                &l.coord.lat.to_string(),
                &l.coord.lon.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn rebuild_lookup(&mut self) {
        self.by_id = self
            .locations
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i as LocationIdx))
            .collect();
    }

    /// Sets post counts and recomputes ranks.
    pub fn assign_post_counts(&mut self, counts: &[u64]) {
        assert_eq!(counts.len(), self.locations.len());
        for (l, &c) in self.locations.iter_mut().zip(counts) {
            l.post_count = c;
        }
        let mut order: Vec<usize> = (0..self.locations.len()).collect();
        order.sort_by(|&a, &b| {
            let (la, lb) = (&self.locations[a], &self.locations[b]);
            lb.post_count
                .cmp(&la.post_count)
                .then_with(|| la.id.cmp(&lb.id))
        });
        for (rank, i) in order.into_iter().enumerate() {
            self.locations[i].rank = rank as u32 + 1;
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<LocationIdx> {
        self.by_id.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<LocationIdx> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownLocation(id.to_string()))
    }

    pub fn get(&self, idx: LocationIdx) -> &Location {
        &self.locations[idx as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Location> {
        self.locations.iter()
    }

    /// Location indices with rank `1..=k`, in rank order.
    pub fn top_ranked(&self, k: usize) -> Vec<LocationIdx> {
        let mut idx: Vec<LocationIdx> = (0..self.locations.len() as LocationIdx).collect();
        idx.sort_by_key(|&i| self.locations[i as usize].rank);
        idx.truncate(k);
        idx
    }
}

/// Maps alias location ids (for example city districts) onto a canonical id.
#[derive(Debug, Clone, Default)]
pub struct LocationAliases(HashMap<String, String>);

impl LocationAliases {
    /// Reads `alias,location_id` CSV.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut map = HashMap::new();
        for row in rdr.records() {
            let row = row?;
            if row.len() < 2 {
                return Err(Error::InvalidInput("alias rows need two columns".into()));
            }
            map.insert(row[0].to_string(), row[1].to_string());
        }
        Ok(LocationAliases(map))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn resolve<'a>(&'a self, id: &'a str) -> &'a str {
        self.0.get(id).map(String::as_str).unwrap_or(id)
    }
}

/// Per-post data needed by the text features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostMeta {
    pub user: u32,
    pub location: LocationIdx,
    /// Hashtag tokens in the post, duplicates included, saturating.
    pub hashtag_count: u16,
    pub comment_count: Option<u32>,
    pub exclamation: bool,
    pub question: bool,
}

/// Strings packed end to end; entry `i` is `bytes[ends[i-1]..ends[i]]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdArena {
    bytes: String,
    ends: Vec<u64>,
}

impl IdArena {
    pub fn push(&mut self, id: &str) -> u32 {
        self.bytes.push_str(id);
        self.ends.push(self.bytes.len() as u64);
        (self.ends.len() - 1) as u32
    }

    pub fn get(&self, i: u32) -> &str {
        let i = i as usize;
        let start = if i == 0 { 0 } else { self.ends[i - 1] as usize };
        &self.bytes[start..self.ends[i] as usize]
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// Copy holding only the listed entries, in list order.
    fn select(&self, keep: &[u32]) -> IdArena {
        let mut out = IdArena::default();
        for &i in keep {
            out.push(self.get(i));
        }
        out.bytes.shrink_to_fit();
        out
    }
}

/// Global counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub uses: u64,
    pub distinct_hashtags: u64,
    pub messages_with_hashtags: u64,
    pub users: u64,
    pub locations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexOptions {
    /// Compare hashtags case-insensitively.
    pub fold_case: bool,
    /// Offset added to UTC before taking the calendar day.
    pub tz_offset_seconds: i32,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions {
            fold_case: true,
            tz_offset_seconds: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceIndex {
    hashtags: Vec<String>,
    /// First raw spelling seen for each hashtag.
    display: Vec<String>,
    offsets: Vec<usize>,
    occurrences: Vec<Occurrence>,
    locations: LocationTable,
    users: Vec<String>,
    posts: Vec<PostMeta>,
    /// Source id of each entry in `posts`.
    post_ids: IdArena,
    totals: Totals,
    skips: SkipCounts,
    options: IndexOptions,
    #[serde(skip)]
    lookup: HashMap<String, HashtagId>,
}

/// Accumulates records into an [`OccurrenceIndex`].
pub struct IndexBuilder {
    locations: LocationTable,
    aliases: LocationAliases,
    options: IndexOptions,
    post_counts: Vec<u64>,
    /// Ids of every accepted post; `seen` holds indices into it.
    all_ids: IdArena,
    seen: HashTable<u32>,
    hasher: DefaultHashBuilder,
    /// `all_ids` entry of each element of `posts`.
    tagged: Vec<u32>,
    hashtag_ids: HashMap<String, HashtagId>,
    display: Vec<String>,
    names: Vec<String>,
    user_ids: HashMap<String, u32>,
    users: Vec<String>,
    posts: Vec<PostMeta>,
    pending_tags: Vec<HashtagId>,
    pending: Vec<Occurrence>,
    skips: SkipCounts,
}

impl IndexBuilder {
    pub fn new(locations: LocationTable, options: IndexOptions) -> Self {
        let n = locations.len();
        IndexBuilder {
            locations,
            aliases: LocationAliases::default(),
            options,
            post_counts: vec![0; n],
            all_ids: IdArena::default(),
            seen: HashTable::new(),
            hasher: DefaultHashBuilder::default(),
            tagged: Vec::new(),
            hashtag_ids: HashMap::new(),
            display: Vec::new(),
            names: Vec::new(),
            user_ids: HashMap::new(),
            users: Vec::new(),
            posts: Vec::new(),
            pending_tags: Vec::new(),
            pending: Vec::new(),
            skips: SkipCounts::default(),
        }
    }

    pub fn with_aliases(mut self, aliases: LocationAliases) -> Self {
        self.aliases = aliases;
        self
    }

    /// Carries skip counts from parsing into the index.
    pub fn record_skips(&mut self, skips: &SkipCounts) {
        self.skips.merge(skips);
    }

    pub fn push(&mut self, record: &PostRecord) {
        let loc_id = self.aliases.resolve(&record.location_id);
        let Some(location) = self.locations.index_of(loc_id) else {
            self.skips.add(SkipReason::UnknownLocation);
            return;
        };
        let hash = self.hasher.hash_one(record.post_id.as_str());
        let arena = &self.all_ids;
        if self
            .seen
            .find(hash, |&i| arena.get(i) == record.post_id)
            .is_some()
        {
            self.skips.add(SkipReason::DuplicatePost);
            return;
        }
        let slot = self.all_ids.push(&record.post_id);
        let (arena, hasher) = (&self.all_ids, &self.hasher);
        self.seen
            .insert_unique(hash, slot, |&i| hasher.hash_one(arena.get(i)));
        self.post_counts[location as usize] += 1;

        let tokens = extract_hashtags(&record.text);
        if tokens.is_empty() {
            return;
        }
        let user = match self.user_ids.get(&record.user_id) {
            Some(&u) => u,
            None => {
                let u = self.users.len() as u32;
                self.users.push(record.user_id.clone());
                self.user_ids.insert(record.user_id.clone(), u);
                u
            }
        };
        let post = self.posts.len() as u32;
        self.tagged.push(slot);
        self.posts.push(PostMeta {
            user,
            location,
            hashtag_count: tokens.len().min(u16::MAX as usize) as u16,
            comment_count: record.comment_count,
            exclamation: record.text.contains('!'),
            question: record.text.contains('?'),
        });
        let timestamp = record.timestamp.timestamp();
        let day =
            (timestamp + self.options.tz_offset_seconds as i64).div_euclid(SECONDS_PER_DAY) as i32;
        for token in tokens {
            let key = if self.options.fold_case {
                token.canonical
            } else {
                token.raw.clone()
            };
            let id = match self.hashtag_ids.get(&key) {
                Some(&id) => id,
                None => {
                    let id = self.names.len() as HashtagId;
                    self.hashtag_ids.insert(key.clone(), id);
                    self.names.push(key);
                    self.display.push(token.raw);
                    id
                }
            };
            self.pending_tags.push(id);
            self.pending.push(Occurrence {
                timestamp,
                location,
                user,
                post,
                day,
            });
        }
    }

    pub fn finish(self) -> OccurrenceIndex {
        let IndexBuilder {
            mut locations,
            options,
            post_counts,
            names,
            display,
            users,
            posts,
            all_ids,
            seen,
            tagged,
            mut pending_tags,
            mut pending,
            skips,
            ..
        } = self;
        drop(seen);
        locations.assign_post_counts(&post_counts);
        let post_ids = if tagged.len() == all_ids.len() {
            all_ids
        } else {
            all_ids.select(&tagged)
        };
        drop(tagged);

        // Renumber hashtags lexicographically.
        let mut order: Vec<HashtagId> = (0..names.len() as HashtagId).collect();
        order.sort_by(|&a, &b| names[a as usize].cmp(&names[b as usize]));
        let mut remap = vec![0 as HashtagId; names.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as HashtagId;
        }
        let mut sorted_names = vec![String::new(); names.len()];
        let mut sorted_display = vec![String::new(); names.len()];
        for (old, (name, disp)) in names.into_iter().zip(display).enumerate() {
            let new = remap[old] as usize;
            sorted_names[new] = name;
            sorted_display[new] = disp;
        }

        // Counting sort into CSR layout, permuting in place: each tag is
        // replaced by its destination slot, then cycles are followed.
        let mut offsets = vec![0usize; sorted_names.len() + 1];
        for &t in &pending_tags {
            offsets[remap[t as usize] as usize + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        let mut cursor = offsets.clone();
        for t in pending_tags.iter_mut() {
            let slot = &mut cursor[remap[*t as usize] as usize];
            *t = *slot as u32;
            *slot += 1;
        }
        drop(cursor);
        for i in 0..pending.len() {
            while pending_tags[i] as usize != i {
                let j = pending_tags[i] as usize;
                pending.swap(i, j);
                pending_tags.swap(i, j);
            }
        }
        drop(pending_tags);
        pending.shrink_to_fit();
        let mut occurrences = pending;
        sort_segments(&mut occurrences, &offsets, &post_ids);

        let mut index = OccurrenceIndex {
            hashtags: sorted_names,
            display: sorted_display,
            offsets,
            occurrences,
            locations,
            users,
            posts,
            post_ids,
            totals: Totals::default(),
            skips,
            options,
            lookup: HashMap::new(),
        };
        index.totals = index.recompute_totals();
        index.rebuild_lookup();
        index
    }
}

fn sort_segments(occurrences: &mut [Occurrence], offsets: &[usize], post_ids: &IdArena) {
    let mut segments: Vec<&mut [Occurrence]> = Vec::with_capacity(offsets.len().saturating_sub(1));
    let mut rest = occurrences;
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        segments.push(head);
        rest = tail;
    }
    par::for_each_mut(&mut segments, |seg| {
        seg.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| post_ids.get(a.post).cmp(post_ids.get(b.post)))
        });
    });
}

/// Builds an index from a record stream.
pub fn build_index<'a>(
    records: impl IntoIterator<Item = &'a PostRecord>,
    locations: LocationTable,
    options: IndexOptions,
) -> OccurrenceIndex {
    let mut builder = IndexBuilder::new(locations, options);
    for r in records {
        builder.push(r);
    }
    builder.finish()
}

const MAGIC: &[u8; 8] = b"HSPIDX01";

impl OccurrenceIndex {
    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .hashtags
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i as HashtagId))
            .collect();
        self.locations.rebuild_lookup();
    }

    pub fn num_hashtags(&self) -> usize {
        self.hashtags.len()
    }

    pub fn hashtag_id(&self, name: &str) -> Option<HashtagId> {
        self.lookup.get(name).copied()
    }

    /// Resolves a hashtag, folding case when the index was built that way.
    pub fn require(&self, name: &str) -> Result<HashtagId> {
        let key = if self.options.fold_case {
            crate::ingest::canonicalize(name)
        } else {
            name.to_string()
        };
        self.hashtag_id(&key)
            .ok_or_else(|| Error::UnknownHashtag(name.to_string()))
    }

    pub fn hashtag_name(&self, id: HashtagId) -> &str {
        &self.hashtags[id as usize]
    }

    pub fn display_name(&self, id: HashtagId) -> &str {
        &self.display[id as usize]
    }

    pub fn hashtag_ids(&self) -> impl Iterator<Item = HashtagId> {
        0..self.hashtags.len() as HashtagId
    }

    /// Occurrences of a hashtag sorted by (timestamp, post id).
    pub fn occurrences(&self, id: HashtagId) -> &[Occurrence] {
        let i = id as usize;
        &self.occurrences[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn uses(&self, id: HashtagId) -> usize {
        let i = id as usize;
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Earliest use in Unix seconds. Every stored hashtag has at least one.
    pub fn first_use(&self, id: HashtagId) -> i64 {
        self.occurrences(id)[0].timestamp
    }

    pub fn locations(&self) -> &LocationTable {
        &self.locations
    }

    pub fn post(&self, idx: u32) -> &PostMeta {
        &self.posts[idx as usize]
    }

    /// Source id of a post.
    pub fn post_id(&self, idx: u32) -> &str {
        self.post_ids.get(idx)
    }

    pub fn user_name(&self, idx: u32) -> &str {
        &self.users[idx as usize]
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn skips(&self) -> &SkipCounts {
        &self.skips
    }

    pub fn options(&self) -> IndexOptions {
        self.options
    }

    /// True when any post carried a comment count.
    pub fn has_comment_counts(&self) -> bool {
        self.posts.iter().any(|p| p.comment_count.is_some())
    }

    pub fn day_to_date(day: i32) -> NaiveDate {
        NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch") + chrono::TimeDelta::days(day as i64)
    }

    /// Recomputes the global counters from the occurrence lists.
    pub fn recompute_totals(&self) -> Totals {
        let mut posts = vec![false; self.posts.len()];
        let mut users = vec![false; self.users.len()];
        let mut locations = vec![false; self.locations.len()];
        for o in &self.occurrences {
            posts[o.post as usize] = true;
            users[o.user as usize] = true;
            locations[o.location as usize] = true;
        }
        let count = |v: &[bool]| v.iter().filter(|&&b| b).count() as u64;
        Totals {
            uses: self.occurrences.len() as u64,
            distinct_hashtags: self.hashtags.len() as u64,
            messages_with_hashtags: count(&posts),
            users: count(&users),
            locations: count(&locations),
        }
    }

    /// Keeps hashtags whose first use is at or after `cutoff`.
    pub fn filter_first_use(&self, cutoff: DateTime<Utc>) -> OccurrenceIndex {
        let cutoff = cutoff.timestamp();
        let keep: Vec<HashtagId> = self
            .hashtag_ids()
            .filter(|&h| self.first_use(h) >= cutoff)
            .collect();
        let mut hashtags = Vec::with_capacity(keep.len());
        let mut display = Vec::with_capacity(keep.len());
        let mut offsets = Vec::with_capacity(keep.len() + 1);
        offsets.push(0);
        let mut occurrences = Vec::new();
        for &h in &keep {
            hashtags.push(self.hashtags[h as usize].clone());
            display.push(self.display[h as usize].clone());
            occurrences.extend_from_slice(self.occurrences(h));
            offsets.push(occurrences.len());
        }
        let mut out = OccurrenceIndex {
            hashtags,
            display,
            offsets,
            occurrences,
            locations: self.locations.clone(),
            users: self.users.clone(),
            posts: self.posts.clone(),
            post_ids: self.post_ids.clone(),
            totals: Totals::default(),
            skips: self.skips.clone(),
            options: self.options,
            lookup: HashMap::new(),
        };
        out.totals = out.recompute_totals();
        out.rebuild_lookup();
        out
    }

    /// Distinct locations a hashtag was used in.
    pub fn distinct_locations(&self, id: HashtagId) -> usize {
        let mut locs: Vec<LocationIdx> = self.occurrences(id).iter().map(|o| o.location).collect();
        locs.sort_unstable();
        locs.dedup();
        locs.len()
    }

    /// `(occurrence count, number of hashtags)` sorted by count.
    pub fn occurrence_histogram(&self) -> Vec<(u64, u64)> {
        histogram(self.hashtag_ids().map(|h| self.uses(h) as u64))
    }

    /// `(distinct location count, number of hashtags)` sorted by count.
    pub fn location_histogram(&self) -> Vec<(u64, u64)> {
        let counts = par::map_range(self.num_hashtags(), |h| {
            self.distinct_locations(h as HashtagId) as u64
        });
        histogram(counts)
    }

    /// Assigns each hashtag to the half-open bucket `[e_i, e_{i+1})` holding
    /// its use count; the last bucket is unbounded. Hashtags below the first
    /// edge are left out. Every bucket is present, possibly empty.
    pub fn partition_by_occurrences(&self, edges: &[u64]) -> Result<Partition> {
        let buckets = Bucket::from_edges(edges)?;
        let mut members: BTreeMap<Bucket, Vec<HashtagId>> =
            buckets.iter().map(|&b| (b, Vec::new())).collect();
        for h in self.hashtag_ids() {
            let n = self.uses(h) as u64;
            if let Some(b) = buckets.iter().find(|b| b.contains(n)) {
                members.get_mut(b).expect("bucket present").push(h);
            }
        }
        Ok(Partition { members })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        bincode::serialize_into(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidInput(format!(
                "{} is not a hashspread index",
                path.display()
            )));
        }
        let mut index: OccurrenceIndex = bincode::deserialize_from(r)?;
        index.rebuild_lookup();
        Ok(index)
    }

    /// JSON sidecar with the global counters and skip tallies.
    pub fn totals_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            #[serde(flatten)]
            totals: Totals,
            skipped: &'a SkipCounts,
            options: IndexOptions,
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            totals: self.totals,
            skipped: &self.skips,
            options: self.options,
        })?)
    }
}

fn histogram(values: impl IntoIterator<Item = u64>) -> Vec<(u64, u64)> {
    let mut bins: BTreeMap<u64, u64> = BTreeMap::new();
    for v in values {
        *bins.entry(v).or_default() += 1;
    }
    bins.into_iter().collect()
}

/// Occurrence-count bucket `[lo, hi)`; `hi == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bucket {
    pub lo: u64,
    pub hi: Option<u64>,
}

/// Default occurrence-bucket edges.
pub const DEFAULT_BUCKET_EDGES: [u64; 6] = [2, 5, 10, 50, 100, 1000];

impl Bucket {
    pub fn from_edges(edges: &[u64]) -> Result<Vec<Bucket>> {
        if edges.is_empty() {
            return Err(Error::InvalidBuckets("no edges given".into()));
        }
        if edges[0] < 2 {
            return Err(Error::InvalidBuckets(format!(
                "first edge must be at least 2, got {}",
                edges[0]
            )));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBuckets(
                "edges must be strictly ascending".into(),
            ));
        }
        Ok(edges
            .iter()
            .enumerate()
            .map(|(i, &lo)| Bucket {
                lo,
                hi: edges.get(i + 1).copied(),
            })
            .collect())
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= self.lo && self.hi.is_none_or(|hi| n < hi)
    }
}

impl std::fmt::Display for Bucket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{})", self.lo, hi),
            None => write!(f, "[{},inf)", self.lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub members: BTreeMap<Bucket, Vec<HashtagId>>,
}

impl Partition {
    pub fn bucket_of(&self, h: HashtagId) -> Option<Bucket> {
        self.members
            .iter()
            .find(|(_, m)| m.contains(&h))
            .map(|(b, _)| *b)
    }
}

/// Per-bucket sorted metric values; the empirical CDF is the sorted list with
/// implied ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    pub buckets: BTreeMap<Bucket, Vec<f64>>,
}

impl Partition {
    /// Evaluates `value` for every member and sorts each bucket. Values come
    /// back in the same order regardless of how the work is scheduled.
    pub fn cdf<F>(&self, value: F) -> Cdf
    where
        F: Fn(HashtagId) -> Option<f64> + Sync + Send,
    {
        let buckets = self
            .members
            .iter()
            .map(|(b, members)| {
                let mut v: Vec<f64> = par::map(members, |&h| value(h))
                    .into_iter()
                    .flatten()
                    .collect();
                v.sort_by(f64::total_cmp);
                (*b, v)
            })
            .collect();
        Cdf { buckets }
    }
}

impl Cdf {
    /// CSV with columns `bucket,value,cdf_fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bucket", "value", "cdf_fraction"])?;
        for (b, values) in &self.buckets {
            let n = values.len() as f64;
            for (i, v) in values.iter().enumerate() {
                w.write_record([
                    b.to_string(),
                    v.to_string(),
                    ((i + 1) as f64 / n).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// All values across buckets, sorted.
    pub fn merged(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.buckets.values().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Writes a two-column histogram as CSV.
pub fn write_histogram_csv<W: Write>(
    out: W,
    value_column: &str,
    rows: &[(u64, u64)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([value_column, "hashtags"])?;
    for (v, n) in rows {
        w.write_record([v.to_string(), n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn table() -> LocationTable {
        LocationTable::new([
            ("x".to_string(), "X".to_string(), LatLon::new(50.0, 6.0)),
            ("y".to_string(), "Y".to_string(), LatLon::new(52.0, 8.0)),
            ("z".to_string(), "Z".to_string(), LatLon::new(48.0, 11.0)),
        ])
        .unwrap()
    }

    fn post(id: &str, loc: &str, secs: i64, text: &str) -> PostRecord {
        PostRecord {
            post_id: id.into(),
            user_id: format!("u-{id}"),
            location_id: loc.into(),
            timestamp: Utc.timestamp_opt(secs, 0).unwrap(),
            text: text.into(),
            comment_count: None,
        }
    }

    #[test]
    fn counting_rule() {
        let idx = build_index(
            &[post("p", "x", 0, "#a #a #b")],
            table(),
            IndexOptions::default(),
        );
        let t = idx.totals();
        assert_eq!(
            (t.uses, t.distinct_hashtags, t.messages_with_hashtags),
            (3, 2, 1)
        );
        assert_eq!(idx.uses(idx.hashtag_id("a").unwrap()), 2);
    }

    #[test]
    fn empty_stream() {
        let idx = build_index(&[], table(), IndexOptions::default());
        assert_eq!(idx.totals(), Totals::default());
        assert!(idx.occurrence_histogram().is_empty());
    }

    #[test]
    fn unknown_locations_and_duplicates_are_skipped() {
        let records = [
            post("p1", "x", 0, "#a"),
            post("p2", "nowhere", 0, "#a"),
            post("p1", "y", 5, "#a"),
        ];
        let idx = build_index(&records, table(), IndexOptions::default());
        assert_eq!(idx.totals().uses, 1);
        assert_eq!(idx.skips().get(SkipReason::UnknownLocation), 1);
        assert_eq!(idx.skips().get(SkipReason::DuplicatePost), 1);
    }

    #[test]
    fn case_folding_toggle() {
        let records = [post("p1", "x", 0, "#Abi"), post("p2", "x", 1, "#abi")];
        let folded = build_index(&records, table(), IndexOptions::default());
        assert_eq!(folded.num_hashtags(), 1);
        assert_eq!(folded.display_name(0), "Abi");
        let raw = build_index(
            &records,
            table(),
            IndexOptions {
                fold_case: false,
                ..Default::default()
            },
        );
        assert_eq!(raw.num_hashtags(), 2);
    }

    #[test]
    fn sorted_with_post_id_tiebreak() {
        let records = [
            post("b", "x", 10, "#t"),
            post("c", "x", 5, "#t"),
            post("a", "y", 10, "#t"),
        ];
        let idx = build_index(&records, table(), IndexOptions::default());
        let ids: Vec<&str> = idx
            .occurrences(0)
            .iter()
            .map(|o| idx.post_id(o.post))
            .collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn ranks_follow_post_counts() {
        let records = [
            post("1", "z", 0, "plain"),
            post("2", "z", 0, "#q"),
            post("3", "y", 0, "nothing"),
        ];
        let idx = build_index(&records, table(), IndexOptions::default());
        let t = idx.locations();
        assert_eq!(t.get(t.index_of("z").unwrap()).rank, 1);
        assert_eq!(t.get(t.index_of("y").unwrap()).rank, 2);
        assert_eq!(t.get(t.index_of("x").unwrap()).rank, 3);
        assert_eq!(t.get(t.index_of("z").unwrap()).post_count, 2);
        assert_eq!(t.top_ranked(2).len(), 2);
    }

    #[test]
    fn first_use_filter_is_inclusive() {
        let cutoff = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
        let records = [
            post("1", "x", cutoff.timestamp() - 86_400, "#old"),
            post("2", "x", cutoff.timestamp(), "#edge"),
            post("3", "x", cutoff.timestamp() + 1, "#old #new"),
        ];
        let idx = build_index(&records, table(), IndexOptions::default());
        let f = idx.filter_first_use(cutoff);
        assert!(f.hashtag_id("old").is_none());
        assert!(f.hashtag_id("edge").is_some());
        assert!(f.hashtag_id("new").is_some());
        assert_eq!(f.totals().uses, 2);
        assert_eq!(idx.filter_first_use(DateTime::<Utc>::MIN_UTC), idx);
        assert_eq!(
            idx.filter_first_use(DateTime::<Utc>::MAX_UTC)
                .num_hashtags(),
            0
        );
    }

    #[test]
    fn histograms() {
        let records = [
            post("1", "x", 0, "#a #a #b"),
            post("2", "y", 0, "#a #b #c"),
            post("3", "x", 0, "#b"),
        ];
        let idx = build_index(&records, table(), IndexOptions::default());
        assert_eq!(idx.occurrence_histogram(), vec![(1, 1), (3, 2)]);
        // a in {x, y}, b in {x, y}, c in {y}
        assert_eq!(idx.location_histogram(), vec![(1, 1), (2, 2)]);
    }

    #[test]
    fn bucket_edges() {
        let b = Bucket::from_edges(&DEFAULT_BUCKET_EDGES).unwrap();
        let hit: Vec<_> = b.iter().filter(|b| b.contains(50)).collect();
        assert_eq!(hit.len(), 1);
        assert_eq!(hit[0].to_string(), "[50,100)");
        assert!(!b.iter().any(|b| b.contains(1)));
        assert!(b.last().unwrap().contains(1_000_000));
        assert!(Bucket::from_edges(&[1, 5]).is_err());
        assert!(Bucket::from_edges(&[5, 5]).is_err());
        assert!(Bucket::from_edges(&[]).is_err());
    }

    #[test]
    fn invalid_coordinates_rejected() {
        let err = LocationTable::new([("bad".into(), "B".into(), LatLon::new(91.0, 0.0))]);
        assert!(matches!(err, Err(Error::InvalidCoordinates { .. })));
        let csv = "location_id,name,lat,lon\na,A,50,6\na,B,51,7\n";
        assert!(matches!(
            LocationTable::from_csv_reader(csv.as_bytes()),
            Err(Error::DuplicateLocation(_))
        ));
    }

    #[test]
    fn aliases_merge_districts() {
        let aliases =
            LocationAliases::from_csv_reader("alias,location_id\nberlin-mitte,x\n".as_bytes())
                .unwrap();
        let mut b = IndexBuilder::new(table(), IndexOptions::default()).with_aliases(aliases);
        b.push(&post("1", "berlin-mitte", 0, "#a"));
        let idx = b.finish();
        assert_eq!(idx.totals().uses, 1);
        assert_eq!(idx.locations().get(idx.occurrences(0)[0].location).id, "x");
    }

    #[test]
    fn day_grouping_with_offset() {
        // 23:30 UTC is the next day at UTC+1.
        let secs = Utc
            .with_ymd_and_hms(2016, 6, 1, 23, 30, 0)
            .unwrap()
            .timestamp();
        let idx = build_index(
            &[post("1", "x", secs, "#a")],
            table(),
            IndexOptions::default(),
        );
        assert_eq!(
            OccurrenceIndex::day_to_date(idx.occurrences(0)[0].day),
            NaiveDate::from_ymd_opt(2016, 6, 1).unwrap()
        );
        let shifted = build_index(
            &[post("1", "x", secs, "#a")],
            table(),
            IndexOptions {
                fold_case: true,
                tz_offset_seconds: 3600,
            },
        );
        assert_eq!(
            OccurrenceIndex::day_to_date(shifted.occurrences(0)[0].day),
            NaiveDate::from_ymd_opt(2016, 6, 2).unwrap()
        );
    }

    #[test]
    fn save_and_load() {
        let records = [post("1", "x", 0, "#a #b"), post("2", "y", 99, "#a")];
        let idx = build_index(&records, table(), IndexOptions::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        idx.save(&path).unwrap();
        let back = OccurrenceIndex::load(&path).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.hashtag_id("b"), Some(1));
        assert!(idx.totals_json().unwrap().contains("\"uses\": 3"));
    }
}
