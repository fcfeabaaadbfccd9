//! Hashtag classification: label files, preprocessing, six classifiers,
//! evaluation and stratified cross-validation.
//!
//! Rows enter as [`FeatureVector`]s. Missing values are imputed with the
//! training-fold median and every column is standardized on the training
//! fold only, so no test row influences a fitted transform.

mod cv;
mod eval;
mod linalg;
mod models;
mod prep;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureVector, FEATURE_NAMES};

pub use cv::{
    ablate, cross_validate, fit_fold, AblationReport, EvalReport, FoldModel, FoldPlan, MeanStd,
    Summary,
};
pub use eval::{evaluate, ClassMetrics, Evaluation};
pub use linalg::{Cholesky, SquareMatrix};
pub use models::{cart, logistic, train, CartNode, Model, ModelKind, ModelSpec};
pub use prep::{Imputer, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashtagClass {
    LocalEvent,
    LocalPhenomenon,
    Event,
    OtherMeme,
}

impl HashtagClass {
    pub const ALL: [HashtagClass; 4] = [
        HashtagClass::LocalEvent,
        HashtagClass::LocalPhenomenon,
        HashtagClass::Event,
        HashtagClass::OtherMeme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HashtagClass::LocalEvent => "local_event",
            HashtagClass::LocalPhenomenon => "local_phenomenon",
            HashtagClass::Event => "event",
            HashtagClass::OtherMeme => "other_meme",
        }
    }

    pub fn is_local(self) -> bool {
        matches!(
            self,
            HashtagClass::LocalEvent | HashtagClass::LocalPhenomenon
        )
    }

    pub fn is_short_lived(self) -> bool {
        matches!(self, HashtagClass::LocalEvent | HashtagClass::Event)
    }
}

impl std::fmt::Display for HashtagClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for HashtagClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HashtagClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown class `{s}`")))
    }
}

/// Manual labels keyed by hashtag, plus hashtags judged unclassifiable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledSet {
    labels: BTreeMap<String, HashtagClass>,
    excluded: BTreeSet<String>,
}

#[derive(Deserialize)]
struct LabelRow {
    hashtag: String,
    class: String,
}

impl LabeledSet {
    pub fn new(pairs: impl IntoIterator<Item = (String, HashtagClass)>) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (h, c) in pairs {
            if labels.insert(h.clone(), c).is_some() {
                return Err(Error::InvalidInput(format!("hashtag `{h}` labeled twice")));
            }
        }
        Ok(LabeledSet {
            labels,
            excluded: BTreeSet::new(),
        })
    }

    /// Reads `hashtag,class` rows.
    pub fn from_csv_reader<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut pairs = Vec::new();
        for row in rdr.deserialize() {
            let row: LabelRow = row?;
            pairs.push((row.hashtag.trim().to_string(), row.class.trim().parse()?));
        }
        Self::new(pairs)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f)
    }

    /// Adds an exclusion list, one hashtag per line; blank lines are ignored.
    pub fn read_exclusions<R: Read>(&mut self, input: R) -> Result<()> {
        for line in BufReader::new(input).lines() {
            let line = line?;
            let h = line.trim();
            if !h.is_empty() {
                self.excluded.insert(h.to_string());
            }
        }
        Ok(())
    }

    pub fn load_exclusions(&mut self, path: &Path) -> Result<()> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        self.read_exclusions(f)
    }

    pub fn exclude(&mut self, hashtag: impl Into<String>) {
        self.excluded.insert(hashtag.into());
    }

    /// Labeled, non-excluded hashtags in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, HashtagClass)> {
        self.labels
            .iter()
            .filter(|(h, _)| !self.excluded.contains(*h))
            .map(|(h, c)| (h.as_str(), *c))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["hashtag", "class"])?;
        for (h, c) in &self.labels {
            w.write_record([h.as_str(), c.name()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Labeled rows ready for the learners. Labels are compact indices into
/// `classes`, which holds only the classes that occur, in enum order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub labels: Vec<usize>,
    pub classes: Vec<HashtagClass>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Joins labels with feature vectors. A label lookup falls back to the
    /// lowercased name so labels may use display spelling.
    pub fn from_features(features: &[FeatureVector], labels: &LabeledSet) -> Result<Self> {
        let by_name: HashMap<&str, &FeatureVector> =
            features.iter().map(|f| (f.hashtag.as_str(), f)).collect();
        let present: BTreeSet<HashtagClass> = labels.iter().map(|(_, c)| c).collect();
        let classes: Vec<HashtagClass> = present.into_iter().collect();
        let mut ds = Dataset {
            names: Vec::new(),
            rows: Vec::new(),
            labels: Vec::new(),
            classes,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        };
        for (h, c) in labels.iter() {
            let fv = by_name
                .get(h)
                .or_else(|| by_name.get(h.to_lowercase().as_str()))
                .ok_or_else(|| Error::UnknownHashtag(h.to_string()))?;
            ds.names.push(h.to_string());
            ds.rows.push(fv.values().to_vec());
            ds.labels
                .push(ds.classes.binary_search(&c).expect("class collected above"));
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Copy without the given columns.
    pub fn drop_columns(&self, columns: &[usize]) -> Dataset {
        let keep: Vec<usize> = (0..self.dim()).filter(|c| !columns.contains(c)).collect();
        Dataset {
            names: self.names.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&c| r[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            classes: self.classes.clone(),
            feature_names: keep
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
        }
    }

    pub fn without_group(&self, group: FeatureGroup) -> Dataset {
        self.drop_columns(group.columns())
    }

    /// Copy with the labels replaced; used by permutation tests.
    pub fn with_labels(&self, labels: Vec<usize>) -> Dataset {
        assert_eq!(labels.len(), self.len());
        Dataset {
            labels,
            ..self.clone()
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Fraction held by the most frequent class.
    pub fn majority_fraction(&self) -> f64 {
        let counts = self.class_counts();
        counts.iter().copied().max().unwrap_or(0) as f64 / self.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(name: &str, x: f64) -> FeatureVector {
        FeatureVector {
            hashtag: name.into(),
            uses: 40,
            focus: 0.5,
            entropy: x,
            spread_km: 10.0 * x,
            local_variation: None,
            avg_hashtags_per_post: 1.0,
            avg_comments_per_post: 0.0,
            exclamation_fraction: 0.0,
            question_fraction: 0.0,
            temporal_focus: 0.2,
            temporal_entropy: 1.0,
            temporal_spread_days: 3.0,
            peak_increase: 0.1,
            peak_decline: 0.1,
            user_diversity: 0.9,
        }
    }

    #[test]
    fn class_names_round_trip() {
        for c in HashtagClass::ALL {
            assert_eq!(c.name().parse::<HashtagClass>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("meme".parse::<HashtagClass>().is_err());
    }

    #[test]
    fn labels_parse_and_exclude() {
        let mut set = LabeledSet::from_csv_reader(
            "hashtag,class\nb,event\na,local_event\nc,other_meme\n".as_bytes(),
        )
        .unwrap();
        set.read_exclusions("c\n\n".as_bytes()).unwrap();
        let got: Vec<_> = set.iter().collect();
        assert_eq!(
            got,
            vec![("a", HashtagClass::LocalEvent), ("b", HashtagClass::Event)]
        );
        assert!(
            LabeledSet::from_csv_reader("hashtag,class\na,event\na,event\n".as_bytes()).is_err()
        );
        assert!(LabeledSet::from_csv_reader("hashtag,class\na,nope\n".as_bytes()).is_err());
        let mut out = Vec::new();
        set.write_csv(&mut out).unwrap();
        assert_eq!(
            LabeledSet::from_csv_reader(out.as_slice()).unwrap().labels,
            set.labels
        );
    }

    #[test]
    fn dataset_compacts_classes() {
        let set = LabeledSet::new([
            ("x".to_string(), HashtagClass::OtherMeme),
            ("Y".to_string(), HashtagClass::LocalEvent),
        ])
        .unwrap();
        let ds = Dataset::from_features(&[fv("x", 1.0), fv("y", 2.0)], &set).unwrap();
        assert_eq!(
            ds.classes,
            vec![HashtagClass::LocalEvent, HashtagClass::OtherMeme]
        );
        assert_eq!(ds.names, vec!["Y", "x"]);
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.rows[0][1], Some(2.0));
        let missing = LabeledSet::new([("z".to_string(), HashtagClass::Event)]).unwrap();
        assert!(matches!(
            Dataset::from_features(&[fv("x", 1.0)], &missing),
            Err(Error::UnknownHashtag(_))
        ));
    }

    #[test]
    fn dropping_a_group_removes_its_columns() {
        let set = LabeledSet::new([("x".to_string(), HashtagClass::Event)]).unwrap();
        let ds = Dataset::from_features(&[fv("x", 1.0)], &set).unwrap();
        let d = ds.without_group(FeatureGroup::Spatial);
        assert_eq!(d.dim(), 11);
        assert_eq!(d.feature_names[0], "local_variation");
        assert_eq!(d.rows[0].len(), 11);
    }
}
