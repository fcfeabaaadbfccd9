//! Small random corpora with their ground truth kept alongside.

use chrono::{TimeZone, Utc};
use hashspread::corpus::LocationTable;
use hashspread::geo::LatLon;
use hashspread::ingest::PostRecord;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const TAGS: &[&str] = &[
    "alpha", "beta", "gamma", "döner", "straße", "x_1", "k.o", "zz",
];

/// One hashtag use as the generator wrote it.
#[derive(Debug, Clone)]
pub struct Use {
    pub tag: String,
    pub location: String,
    pub post: String,
    pub user: String,
    pub ts: i64,
}

pub struct Mini {
    pub records: Vec<PostRecord>,
    pub uses: Vec<Use>,
    pub cities: Vec<(String, LatLon)>,
    pub locations: LocationTable,
}

/// Up to `max_cities` cities and at most `max_per_tag` uses per hashtag.
/// Timestamps are drawn on a coarse grid so ties are common.
pub fn mini_corpus<R: Rng>(rng: &mut R, max_cities: usize, max_per_tag: usize) -> Mini {
    let n_cities = rng.random_range(2..=max_cities);
    let cities: Vec<(String, LatLon)> = (0..n_cities)
        .map(|i| {
            (
                format!("loc{i}"),
                LatLon::new(rng.random_range(47.0..55.0), rng.random_range(6.0..15.0)),
            )
        })
        .collect();
    let locations = LocationTable::new(
        cities
            .iter()
            .map(|(id, c)| (id.clone(), id.to_uppercase(), *c)),
    )
    .unwrap();
    let n_tags = rng.random_range(1..=TAGS.len());
    let tags: Vec<&str> = TAGS[..n_tags].to_vec();
    let base = 1_480_000_000i64;
    let step = *[1i64, 600, 3_600, 86_400].choose(rng).unwrap();
    let span = rng.random_range(1..200i64);
    let mut remaining: Vec<usize> = tags
        .iter()
        .map(|_| rng.random_range(1..=max_per_tag))
        .collect();
    let mut records = Vec::new();
    let mut uses = Vec::new();
    let mut k = 0;
    while remaining.iter().any(|&r| r > 0) {
        let open: Vec<usize> = (0..tags.len()).filter(|&t| remaining[t] > 0).collect();
        let mut in_post = vec![*open.choose(rng).unwrap()];
        if open.len() > 1 && rng.random_bool(0.2) {
            let other = *open.choose(rng).unwrap();
            in_post.push(other);
        }
        let (location, _) = cities.choose(rng).unwrap().clone();
        let ts = base + rng.random_range(0..span) * step;
        // Random-looking ids so id order differs from insertion order.
        let post = format!("{:08x}", rng.random::<u32>()) + &format!("-{k}");
        k += 1;
        let user = format!("u{}", rng.random_range(0..6));
        let mut text = String::from("hi");
        for &t in &in_post {
            if remaining[t] == 0 {
                continue;
            }
            remaining[t] -= 1;
            text.push_str(&format!(" #{} ", tags[t]));
            uses.push(Use {
                tag: tags[t].to_string(),
                location: location.clone(),
                post: post.clone(),
                user: user.clone(),
                ts,
            });
        }
        records.push(PostRecord {
            post_id: post,
            user_id: user,
            location_id: location,
            timestamp: Utc.timestamp_opt(ts, 0).unwrap(),
            text,
            comment_count: None,
        });
    }
    Mini {
        records,
        uses,
        cities,
        locations,
    }
}

impl Mini {
    pub fn uses_of(&self, tag: &str) -> Vec<&Use> {
        self.uses.iter().filter(|u| u.tag == tag).collect()
    }

    pub fn tags(&self) -> Vec<String> {
        let mut t: Vec<String> = self.uses.iter().map(|u| u.tag.clone()).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn coord(&self, id: &str) -> LatLon {
        self.cities.iter().find(|(c, _)| c == id).unwrap().1
    }
}
