use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hashspread::classify::{
    ablate, cross_validate, Dataset, HashtagClass, LabeledSet, ModelKind, ModelSpec,
};
use hashspread::corpus::{
    write_histogram_csv, IndexBuilder, IndexOptions, LocationAliases, LocationTable,
    OccurrenceIndex, DEFAULT_BUCKET_EDGES,
};
use hashspread::features::{
    assemble_all, read_features_csv, spread_grid, write_features_csv, FeatureGroup,
    DEFAULT_GRID_BINS, DEFAULT_MIN_OCCURRENCES,
};
use hashspread::influence::{impact_histogram, write_similarity_csv, LocationView};
use hashspread::ingest::{write_jsonl, CorpusReader, InputFormat, TimeWindow};
use hashspread::spatial::{spatial_metrics, write_spatial_csv, SpatialMetric, MIN_METRIC_USES};
use hashspread::synth::{verify, Ledger, World, WorldSpec};
use hashspread::temporal::{temporal_metrics, write_temporal_csv, TemporalMetric};

#[derive(Parser)]
#[command(
    name = "hashspread",
    version,
    about = "Spatial and temporal hashtag diffusion metrics"
)]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus, drop malformed or out-of-window records, and write
    /// the survivors as normalized JSONL.
    Ingest(IngestArgs),
    /// Build the occurrence index and its totals.json sidecar.
    Index(IndexArgs),
    /// Corpus-level histograms and the spread grid.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Per-hashtag metric tables and per-bucket CDFs.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Spatial impact of one location on the top-ranked locations.
    Impact(ImpactArgs),
    /// Top-50 hashtag similarity against distance from a source location.
    Similarity(SimilarityArgs),
    /// Per-hashtag feature vectors.
    Features(FeaturesArgs),
    /// Cross-validate a classifier on labeled feature vectors.
    Classify(ClassifyArgs),
    /// Generate a labeled synthetic corpus and its ledger.
    Synth(SynthArgs),
    /// Check an index against a synthetic ledger; exits 1 on any difference.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the file extension.
    #[arg(long)]
    format: Option<InputFormat>,
    /// Inclusive lower bound (RFC 3339 or YYYY-MM-DD).
    #[arg(long, value_parser = parse_instant)]
    since: Option<DateTime<Utc>>,
    /// Inclusive upper bound (RFC 3339 or YYYY-MM-DD).
    #[arg(long, value_parser = parse_instant)]
    until: Option<DateTime<Utc>>,
}

impl InputArgs {
    fn reader(&self) -> Result<CorpusReader<BufReader<File>>> {
        let format = self
            .format
            .unwrap_or_else(|| InputFormat::from_path(&self.input));
        let window = (self.since.is_some() || self.until.is_some())
            .then(|| TimeWindow::new(self.since, self.until));
        let file =
            File::open(&self.input).with_context(|| format!("opening {}", self.input.display()))?;
        Ok(CorpusReader::new(BufReader::new(file), format, window))
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    /// Skip counts as JSON; defaults to `<out>.skips.json`.
    #[arg(long)]
    skips: Option<PathBuf>,
}

#[derive(Args)]
struct IndexArgs {
    #[command(flatten)]
    input: InputArgs,
    /// CSV with columns location_id,name,lat,lon.
    #[arg(long)]
    locations: PathBuf,
    /// CSV with columns alias,location_id.
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Keep hashtag case as written.
    #[arg(long)]
    no_fold: bool,
    /// Seconds added to UTC before taking calendar days.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    tz_offset: i32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Two-column histogram of hashtags by occurrences or distinct locations.
    Histogram {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, value_enum)]
        kind: HistogramKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatial vs temporal spread grid.
    Spreadgrid {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_OCCURRENCES)]
        min_occurrences: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_BINS)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write one row per hashtag.
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HistogramKind {
    Occurrences,
    Locations,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    index: PathBuf,
    /// Keep hashtags first used at or after this instant.
    #[arg(long, value_parser = parse_instant)]
    since: Option<DateTime<Utc>>,
    /// Occurrence bucket edges for the CDFs.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BUCKET_EDGES)]
    buckets: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MetricsCommand {
    Spatial(MetricArgs),
    Temporal(MetricArgs),
}

#[derive(Args)]
struct ImpactArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    source: String,
    #[arg(long, default_value_t = 500)]
    top_k: usize,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    /// Histogram CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-target scores as CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct SimilarityArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    source: String,
    #[arg(long, default_value_t = 100)]
    group_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_OCCURRENCES)]
    min_occurrences: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    features: PathBuf,
    /// CSV with columns hashtag,class.
    #[arg(long)]
    labels: PathBuf,
    /// Hashtags to leave out, one per line.
    #[arg(long)]
    exclude: Option<PathBuf>,
    #[arg(long, default_value = "lda")]
    model: ModelKind,
    /// Fold count.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also report the accuracy drop without this feature group.
    #[arg(long)]
    ablate: Option<FeatureGroup>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    cities: usize,
    #[arg(long, default_value_t = 2000)]
    hashtags: usize,
    #[arg(long, default_value_t = 1_000_000)]
    uses: u64,
    #[arg(long, default_value_t = 30)]
    min_uses: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ledger: PathBuf,
    /// Location table; defaults to `locations.csv` next to `--out`.
    #[arg(long)]
    locations: Option<PathBuf>,
    /// Also write the ledger labels as `hashtag,class` CSV.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    ledger: PathBuf,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_instant(s: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
        .map_err(|_| format!("`{s}` is neither RFC 3339 nor YYYY-MM-DD"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn load_index(path: &Path, since: Option<DateTime<Utc>>) -> Result<OccurrenceIndex> {
    let index =
        OccurrenceIndex::load(path).with_context(|| format!("loading index {}", path.display()))?;
    Ok(match since {
        Some(t) => index.filter_first_use(t),
        None => index,
    })
}

fn ingest(args: IngestArgs) -> Result<()> {
    let mut reader = args.input.reader()?;
    let mut out = create(&args.out)?;
    let mut kept = 0u64;
    for record in reader.by_ref() {
        write_jsonl(&mut out, [&record?])?;
        kept += 1;
    }
    out.flush()?;
    let skips = reader.skips().clone();
    let skips_path = args.skips.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".skips.json");
        p.into()
    });
    let mut w = create(&skips_path)?;
    serde_json::to_writer_pretty(&mut w, &skips)?;
    w.flush()?;
    log::info!("kept {kept} records, skipped {}", skips.total());
    println!(
        "{}",
        serde_json::json!({ "records": kept, "skipped": skips })
    );
    Ok(())
}

fn index(args: IndexArgs) -> Result<()> {
    let locations = LocationTable::load_csv(&args.locations)?;
    let options = IndexOptions {
        fold_case: !args.no_fold,
        tz_offset_seconds: args.tz_offset,
    };
    let mut builder = IndexBuilder::new(locations, options);
    if let Some(a) = &args.aliases {
        builder = builder.with_aliases(LocationAliases::load_csv(a)?);
    }
    let mut reader = args.input.reader()?;
    for record in reader.by_ref() {
        builder.push(&record?);
    }
    builder.record_skips(reader.skips());
    let index = builder.finish();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    index.save(&args.out)?;
    let totals = index.totals_json()?;
    let sidecar = args.out.with_file_name("totals.json");
    fs::write(&sidecar, &totals).with_context(|| format!("writing {}", sidecar.display()))?;
    println!("{totals}");
    Ok(())
}

fn report(cmd: ReportCommand) -> Result<()> {
    match cmd {
        ReportCommand::Histogram { index, kind, out } => {
            let index = load_index(&index, None)?;
            let (column, rows) = match kind {
                HistogramKind::Occurrences => ("occurrences", index.occurrence_histogram()),
                HistogramKind::Locations => ("locations", index.location_histogram()),
            };
            let mut w = create(&out)?;
            write_histogram_csv(&mut w, column, &rows)?;
            w.flush()?;
        }
        ReportCommand::Spreadgrid {
            index,
            min_occurrences,
            bins,
            out,
            points,
        } => {
            let index = load_index(&index, None)?;
            let grid = spread_grid(&index, min_occurrences, bins);
            let mut w = create(&out)?;
            grid.write_csv(&mut w)?;
            w.flush()?;
            if let Some(p) = points {
                let mut w = create(&p)?;
                grid.write_points_csv(&mut w)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn write_cdf(dir: &Path, name: &str, cdf: &hashspread::corpus::Cdf) -> Result<()> {
    let mut w = create(&dir.join(name))?;
    cdf.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn metrics(cmd: MetricsCommand) -> Result<()> {
    match cmd {
        MetricsCommand::Spatial(a) => {
            let index = load_index(&a.index, a.since)?;
            let partition = index.partition_by_occurrences(&a.buckets)?;
            let ids: Vec<u32> = index.hashtag_ids().collect();
            let rows = hashspread::par::map(&ids, |&h| spatial_metrics(&index, h));
            for (name, metric) in [
                ("focus_cdf.csv", SpatialMetric::Focus),
                ("entropy_cdf.csv", SpatialMetric::Entropy),
                ("spread_cdf.csv", SpatialMetric::Spread),
            ] {
                write_cdf(
                    &a.out,
                    name,
                    &partition.cdf(|h| Some(rows[h as usize].get(metric))),
                )?;
            }
            let kept: Vec<_> = rows
                .into_iter()
                .filter(|r| r.uses >= MIN_METRIC_USES)
                .collect();
            let mut w = create(&a.out.join("spatial_metrics.csv"))?;
            write_spatial_csv(&mut w, &kept)?;
            w.flush()?;
        }
        MetricsCommand::Temporal(a) => {
            let index = load_index(&a.index, a.since)?;
            let partition = index.partition_by_occurrences(&a.buckets)?;
            let ids: Vec<u32> = index.hashtag_ids().collect();
            let rows = hashspread::par::map(&ids, |&h| temporal_metrics(&index, h));
            for (name, metric) in [
                ("temporal_focus_cdf.csv", TemporalMetric::Focus),
                ("temporal_entropy_cdf.csv", TemporalMetric::Entropy),
                ("temporal_spread_cdf.csv", TemporalMetric::Spread),
            ] {
                write_cdf(
                    &a.out,
                    name,
                    &partition.cdf(|h| Some(rows[h as usize].get(metric))),
                )?;
            }
            let kept: Vec<_> = rows
                .into_iter()
                .filter(|r| r.uses >= MIN_METRIC_USES)
                .collect();
            let mut w = create(&a.out.join("temporal_metrics.csv"))?;
            write_temporal_csv(&mut w, &kept)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn impact(a: ImpactArgs) -> Result<()> {
    let index = load_index(&a.index, None)?;
    let view = LocationView::new(&index);
    let scores = view.impact_on_top(&a.source, a.top_k)?;
    let hist = impact_histogram(&scores, a.bins);
    let mut w = create(&a.out)?;
    hist.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = a.scores {
        let mut w = create(&p)?;
        writeln!(w, "source,target,score,hashtags_considered")?;
        for s in &scores {
            let score = s.score.map_or(String::new(), |v| v.to_string());
            writeln!(
                w,
                "{},{},{score},{}",
                s.source, s.target, s.hashtags_considered
            )?;
        }
        w.flush()?;
    }
    Ok(())
}

fn similarity(a: SimilarityArgs) -> Result<()> {
    let index = load_index(&a.index, None)?;
    let groups = LocationView::new(&index).similarity_by_distance(&a.source, a.group_size)?;
    let mut w = create(&a.out)?;
    write_similarity_csv(&mut w, &groups)?;
    w.flush()?;
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let index = load_index(&a.index, None)?;
    let rows = assemble_all(&index, a.min_occurrences);
    let mut w = create(&a.out)?;
    write_features_csv(&mut w, &rows)?;
    w.flush()?;
    log::info!(
        "{} hashtags with at least {} uses",
        rows.len(),
        a.min_occurrences
    );
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let file =
        File::open(&a.features).with_context(|| format!("opening {}", a.features.display()))?;
    let features = read_features_csv(BufReader::new(file))?;
    let mut labels = LabeledSet::load_csv(&a.labels)?;
    if let Some(e) = &a.exclude {
        labels.load_exclusions(e)?;
    }
    let data = Dataset::from_features(&features, &labels)?;
    let mut spec = ModelSpec::new(a.model);
    if let Some(v) = a.knn_k {
        spec.knn_k = v;
    }
    if let Some(v) = a.max_depth {
        spec.cart_max_depth = v;
    }
    if let Some(v) = a.min_leaf {
        spec.cart_min_leaf = v;
    }
    if let Some(v) = a.l2 {
        spec.logistic_l2 = v;
    }
    let json = match a.ablate {
        Some(group) => serde_json::to_value(ablate(&spec, &data, group, a.k, a.repeats, a.seed)?)?,
        None => serde_json::to_value(cross_validate(&spec, &data, a.k, a.repeats, a.seed)?)?,
    };
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &json)?;
    w.flush()?;
    let acc = json
        .pointer("/summary/accuracy")
        .or_else(|| json.pointer("/ablated/summary/accuracy"))
        .cloned()
        .unwrap_or_default();
    println!(
        "{}",
        serde_json::json!({ "model": a.model.name(), "samples": data.len(), "accuracy": acc })
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = WorldSpec {
        cities: a.cities,
        total_uses: a.uses,
        min_uses_per_hashtag: a.min_uses,
        seed: a.seed,
        ..WorldSpec::default()
    }
    .with_hashtags(a.hashtags);
    let world = World::new(&spec)?;
    let mut out = create(&a.out)?;
    let mut entries = Vec::with_capacity(world.len());
    let mut posts = 0u64;
    world.for_each_batch(256, |batch| {
        for (records, entry) in batch {
            posts += records.len() as u64;
            // Write errors resurface at flush.
            let _ = write_jsonl(&mut out, &records);
            entries.push(entry);
        }
    });
    out.flush()
        .with_context(|| format!("writing {}", a.out.display()))?;
    let ledger = Ledger {
        seed: spec.seed,
        total_uses: entries.iter().map(|e| e.uses).sum(),
        total_posts: posts,
        hashtags: entries,
    };
    let mut w = create(&a.ledger)?;
    ledger.write_json(&mut w)?;
    w.flush()?;
    let locations = a
        .locations
        .unwrap_or_else(|| a.out.with_file_name("locations.csv"));
    let mut w = create(&locations)?;
    world.locations().write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = a.labels {
        let labels = LabeledSet::new(ledger.labels())?;
        let mut w = create(&p)?;
        labels.write_csv(&mut w)?;
        w.flush()?;
    }
    let classes: serde_json::Map<String, serde_json::Value> = ledger
        .class_counts()
        .into_iter()
        .map(|(c, n): (HashtagClass, usize)| (c.name().to_string(), n.into()))
        .collect();
    println!(
        "{}",
        serde_json::json!({ "posts": posts, "uses": ledger.total_uses, "hashtags": ledger.hashtags.len(), "classes": classes })
    );
    Ok(())
}

fn verify_cmd(a: VerifyArgs) -> Result<bool> {
    let index = load_index(&a.index, None)?;
    let file = File::open(&a.ledger).with_context(|| format!("opening {}", a.ledger.display()))?;
    let ledger = Ledger::read_json(BufReader::new(file))?;
    let report = verify(&ledger, &index);
    let json = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(p) => fs::write(p, json)?,
        None => println!("{json}"),
    }
    if !report.is_clean() {
        eprintln!("{} discrepancies", report.discrepancies.len());
    }
    Ok(report.is_clean())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Index(a) => index(a),
        Command::Report(c) => report(c),
        Command::Metrics(c) => metrics(c),
        Command::Impact(a) => impact(a),
        Command::Similarity(a) => similarity(a),
        Command::Features(a) => features(a),
        Command::Classify(a) => classify(a),
        Command::Synth(a) => synth(a),
        Command::Verify(a) => match verify_cmd(a) {
            Ok(true) => Ok(()),
            Ok(false) => std::process::exit(1),
            Err(e) => Err(e),
        },
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}
