//! Post parsing and hashtag extraction.
//!
//! Corpora arrive as JSONL (one object per line) or RFC 4180 CSV with the
//! columns `post_id,user_id,location_id,timestamp,text` and an optional
//! `comment_count`. Lines that fail to parse are skipped and tallied in
//! [`SkipCounts`]; only an unreadable file is fatal.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, SecondsFormat, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostRecord {
    pub post_id: String,
    pub user_id: String,
    pub location_id: String,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    /// Replies attached to the post, when the source carries them.
    pub comment_count: Option<u32>,
}

/// A hashtag as it appears in text and its identity form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashtagToken {
    /// Matched characters without the leading `#`.
    pub raw: String,
    pub canonical: String,
}

/// Characters allowed after `#`: ASCII alphanumerics, German umlauts and
/// Eszett, dot, dash and underscore.
static HASHTAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"#([0-9A-Za-zäöüÄÖÜß._-]+)").expect("static pattern"));

/// Returns every hashtag in `text` in order of appearance, duplicates kept.
pub fn extract_hashtags(text: &str) -> Vec<HashtagToken> {
    HASHTAG
        .captures_iter(text)
        .map(|c| {
            let raw = c[1].to_string();
            let canonical = canonicalize(&raw);
            HashtagToken { raw, canonical }
        })
        .collect()
}

/// Number of hashtag tokens in `text` without allocating them.
pub fn count_hashtags(text: &str) -> usize {
    HASHTAG.find_iter(text).count()
}

/// Case-folds a raw hashtag. `ß` has no lowercase change and is kept.
pub fn canonicalize(raw: &str) -> String {
    raw.to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Jsonl,
    Csv,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::InvalidInput(format!(
                "unknown input format `{other}`"
            ))),
        }
    }
}

impl InputFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

/// Inclusive time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: Option<DateTime<Utc>>, end: Option<DateTime<Utc>>) -> Self {
        TimeWindow {
            start: start.unwrap_or(DateTime::<Utc>::MIN_UTC),
            end: end.unwrap_or(DateTime::<Utc>::MAX_UTC),
        }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MalformedJson,
    MalformedCsv,
    InvalidTimestamp,
    OutsideWindow,
    UnknownLocation,
    DuplicatePost,
}

/// Per-reason tally of skipped records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkipCounts(BTreeMap<SkipReason, u64>);

impl SkipCounts {
    pub fn add(&mut self, reason: SkipReason) {
        *self.0.entry(reason).or_default() += 1;
    }

    pub fn get(&self, reason: SkipReason) -> u64 {
        self.0.get(&reason).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn merge(&mut self, other: &SkipCounts) {
        for (&r, &n) in &other.0 {
            *self.0.entry(r).or_default() += n;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (SkipReason, u64)> + '_ {
        self.0.iter().map(|(&r, &n)| (r, n))
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct WireRecord {
    post_id: String,
    user_id: String,
    location_id: String,
    timestamp: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comment_count: Option<u32>,
}

impl WireRecord {
    fn into_record(self) -> Option<PostRecord> {
        let timestamp = DateTime::parse_from_rfc3339(self.timestamp.trim())
            .ok()?
            .with_timezone(&Utc);
        Some(PostRecord {
            post_id: self.post_id,
            user_id: self.user_id,
            location_id: self.location_id,
            timestamp,
            text: self.text,
            comment_count: self.comment_count,
        })
    }

    fn from_record(r: &PostRecord) -> Self {
        WireRecord {
            post_id: r.post_id.clone(),
            user_id: r.user_id.clone(),
            location_id: r.location_id.clone(),
            timestamp: r.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            text: r.text.clone(),
            comment_count: r.comment_count,
        }
    }
}

enum Source<R: Read> {
    Jsonl(std::io::Lines<BufReader<R>>),
    Csv(csv::DeserializeRecordsIntoIter<R, WireRecord>),
}

/// Streaming reader over a post corpus.
///
/// Yields `Err` only for fatal I/O failures; malformed lines are counted in
/// [`CorpusReader::skips`].
pub struct CorpusReader<R: Read> {
    source: Source<R>,
    window: TimeWindow,
    skips: SkipCounts,
}

/// Opens `path` for streaming.
pub fn parse_corpus(
    path: &Path,
    format: InputFormat,
    window: Option<TimeWindow>,
) -> Result<CorpusReader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(CorpusReader::new(file, format, window))
}

impl<R: Read> CorpusReader<R> {
    pub fn new(reader: R, format: InputFormat, window: Option<TimeWindow>) -> Self {
        let source = match format {
            InputFormat::Jsonl => Source::Jsonl(BufReader::new(reader).lines()),
            InputFormat::Csv => Source::Csv(
                csv::ReaderBuilder::new()
                    .has_headers(true)
                    .flexible(false)
                    .from_reader(reader)
                    .into_deserialize(),
            ),
        };
        CorpusReader {
            source,
            window: window.unwrap_or(TimeWindow::new(None, None)),
            skips: SkipCounts::default(),
        }
    }

    pub fn skips(&self) -> &SkipCounts {
        &self.skips
    }

    /// Consumes the reader into all records, returning the skip tally.
    pub fn collect_all(mut self) -> Result<(Vec<PostRecord>, SkipCounts)> {
        let mut out = Vec::new();
        for r in self.by_ref() {
            out.push(r?);
        }
        Ok((out, self.skips))
    }

    fn accept(&mut self, wire: WireRecord) -> Option<PostRecord> {
        let Some(record) = wire.into_record() else {
            self.skips.add(SkipReason::InvalidTimestamp);
            return None;
        };
        if !self.window.contains(record.timestamp) {
            self.skips.add(SkipReason::OutsideWindow);
            return None;
        }
        Some(record)
    }
}

impl<R: Read> Iterator for CorpusReader<R> {
    type Item = Result<PostRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let wire = match &mut self.source {
                Source::Jsonl(lines) => {
                    let line = match lines.next()? {
                        Ok(l) => l,
                        Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                            self.skips.add(SkipReason::MalformedJson);
                            continue;
                        }
                        Err(e) => return Some(Err(e.into())),
                    };
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<WireRecord>(&line) {
                        Ok(w) => w,
                        Err(_) => {
                            self.skips.add(SkipReason::MalformedJson);
                            continue;
                        }
                    }
                }
                Source::Csv(rows) => match rows.next()? {
                    Ok(w) => w,
                    Err(e) if e.is_io_error() => return Some(Err(e.into())),
                    Err(_) => {
                        self.skips.add(SkipReason::MalformedCsv);
                        continue;
                    }
                },
            };
            if let Some(record) = self.accept(wire) {
                return Some(Ok(record));
            }
        }
    }
}

/// Writes records as JSONL, one object per line.
pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a PostRecord>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &WireRecord::from_record(r))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes records as CSV with a header row.
pub fn write_csv<'a, W: Write>(
    out: W,
    records: impl IntoIterator<Item = &'a PostRecord>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(WireRecord::from_record(r))?;
    }
    w.flush()?;
    Ok(())
}
