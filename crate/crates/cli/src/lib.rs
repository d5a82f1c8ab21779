//! The headline click-rate analysis pipeline: CSV ingestion of per-headline
//! impression/click counts, a pooled-contingency Fisher statistic, and the
//! permutation-versus-pooled p-value comparison with BH discovery counts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use compound_bh::bh::{bh_reject, PValueVector};
use compound_bh::constructions::{
    pooled_pvalues, single_trial_pvalue, trial_null_batch, Trial, TrialNull,
};
use compound_bh::numerics::fisher_exact_onesided;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}' in CSV header")]
    MissingColumn(String),
    #[error("{bad} of {total} rows are malformed (more than 1%); first issues: {sample}")]
    TooManyBadRows {
        bad: usize,
        total: usize,
        sample: String,
    },
    #[error("no articles with both digit and non-digit headlines survived ingestion")]
    NothingToAnalyze,
    #[error(transparent)]
    Core(#[from] compound_bh::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// One headline's aggregate counts; the exchangeable unit within an article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadlineUnit {
    pub clicks: u64,
    pub impressions: u64,
}

/// Column names for the four required fields.
#[derive(Debug, Clone)]
pub struct SchemaMap {
    pub article: String,
    pub headline: String,
    pub impressions: String,
    pub clicks: String,
}

impl Default for SchemaMap {
    fn default() -> Self {
        SchemaMap {
            article: "clickability_test_id".into(),
            headline: "headline".into(),
            impressions: "impressions".into(),
            clicks: "clicks".into(),
        }
    }
}

/// Which characters count as digits when splitting headlines into groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DigitMode {
    /// ASCII 0-9 only.
    #[default]
    Ascii,
    /// Any Unicode decimal digit.
    Unicode,
}

impl DigitMode {
    pub fn headline_has_digit(self, text: &str) -> bool {
        match self {
            DigitMode::Ascii => text.bytes().any(|b| b.is_ascii_digit()),
            DigitMode::Unicode => text.chars().any(|c| c.is_numeric()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub schema: SchemaMap,
    pub digit_mode: DigitMode,
    /// Keep only articles with strictly more than this many headlines.
    pub min_headlines: Option<usize>,
}

/// A malformed row, kept for the ingestion report.
#[derive(Debug, Clone, Serialize)]
pub struct RowIssue {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestStats {
    pub rows_read: usize,
    pub rows_bad: usize,
    pub issues: Vec<RowIssue>,
    pub articles_seen: usize,
    pub dropped_no_contrast: usize,
    pub dropped_min_headlines: usize,
    pub articles_kept: usize,
    pub headlines_kept: usize,
}

/// The ingested trial set: one trial per article, digit headlines first.
pub struct TrialSet {
    pub article_ids: Vec<String>,
    pub trials: Vec<Trial<HeadlineUnit>>,
    pub stats: IngestStats,
}

const MAX_STORED_ISSUES: usize = 100;

/// Read the headline CSV, group rows into per-article trials with the
/// digit-containing headlines as the treated group, and drop articles
/// without both kinds (plus, optionally, articles at or below the headline
/// count threshold). Fails outright when required columns are missing or
/// more than 1% of rows are malformed.
pub fn ingest_headline_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<TrialSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::MissingColumn(name.to_string()))
    };
    let article_col = col(&opts.schema.article)?;
    let headline_col = col(&opts.schema.headline)?;
    let impressions_col = col(&opts.schema.impressions)?;
    let clicks_col = col(&opts.schema.clicks)?;

    struct Bucket {
        digit: Vec<HeadlineUnit>,
        plain: Vec<HeadlineUnit>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut buckets: HashMap<String, Bucket> = HashMap::new();
    let mut stats = IngestStats::default();

    for record in reader.records() {
        let record = record?;
        stats.rows_read += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String, stats: &mut IngestStats| {
            stats.rows_bad += 1;
            if stats.issues.len() < MAX_STORED_ISSUES {
                stats.issues.push(RowIssue { line, reason });
            }
        };
        let field = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let article = field(article_col);
        let headline = field(headline_col);
        let impressions = match field(impressions_col).parse::<u64>() {
            Ok(v) => v,
            Err(_) => {
                bad(
                    format!("unparsable impressions '{}'", field(impressions_col)),
                    &mut stats,
                );
                continue;
            }
        };
        let clicks = match field(clicks_col).parse::<u64>() {
            Ok(v) => v,
            Err(_) => {
                bad(
                    format!("unparsable clicks '{}'", field(clicks_col)),
                    &mut stats,
                );
                continue;
            }
        };
        if clicks > impressions {
            bad(
                format!("clicks {clicks} exceed impressions {impressions}"),
                &mut stats,
            );
            continue;
        }
        if article.is_empty() {
            bad("empty article id".into(), &mut stats);
            continue;
        }
        let unit = HeadlineUnit {
            clicks,
            impressions,
        };
        let bucket = buckets.entry(article.clone()).or_insert_with(|| {
            order.push(article.clone());
            Bucket {
                digit: Vec::new(),
                plain: Vec::new(),
            }
        });
        if opts.digit_mode.headline_has_digit(&headline) {
            bucket.digit.push(unit);
        } else {
            bucket.plain.push(unit);
        }
    }

    if stats.rows_read > 0 && stats.rows_bad * 100 > stats.rows_read {
        let sample = stats
            .issues
            .iter()
            .take(3)
            .map(|i| format!("line {}: {}", i.line, i.reason))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(PipelineError::TooManyBadRows {
            bad: stats.rows_bad,
            total: stats.rows_read,
            sample,
        });
    }

    stats.articles_seen = order.len();
    let mut article_ids = Vec::new();
    let mut trials = Vec::new();
    for id in order {
        let bucket = buckets.remove(&id).expect("bucket recorded");
        if bucket.digit.is_empty() || bucket.plain.is_empty() {
            stats.dropped_no_contrast += 1;
            continue;
        }
        let n = bucket.digit.len() + bucket.plain.len();
        if let Some(threshold) = opts.min_headlines {
            if n <= threshold {
                stats.dropped_min_headlines += 1;
                continue;
            }
        }
        let n_treated = bucket.digit.len();
        let mut units = bucket.digit;
        units.extend(bucket.plain);
        stats.headlines_kept += n;
        trials.push(Trial::new(units, n_treated)?);
        article_ids.push(id);
    }
    stats.articles_kept = trials.len();
    if trials.is_empty() {
        return Err(PipelineError::NothingToAnalyze);
    }
    Ok(TrialSet {
        article_ids,
        trials,
        stats,
    })
}

/// The per-article test statistic: both groups' clicks and no-clicks pooled
/// into a 2×2 table, scored as one minus the one-sided Fisher exact p-value
/// so that larger values indicate the digit group clicking more.
pub fn headline_statistic(trial: &Trial<HeadlineUnit>) -> f64 {
    let sum = |units: &[HeadlineUnit]| -> (u64, u64) {
        let clicks: u64 = units.iter().map(|u| u.clicks).sum();
        let impressions: u64 = units.iter().map(|u| u.impressions).sum();
        (clicks, impressions - clicks)
    };
    let (a, b) = sum(trial.treated());
    let (c, d) = sum(trial.control());
    1.0 - fisher_exact_onesided(a, b, c, d).get()
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub alphas: Vec<f64>,
    pub exact_cap: u64,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            alphas: vec![0.2, 0.5],
            exact_cap: compound_bh::constructions::DEFAULT_EXACT_CAP,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArticleResult {
    pub article_id: String,
    pub n_headlines: usize,
    pub n_treated: usize,
    pub statistic: f64,
    pub perm_p: f64,
    pub compound_p: f64,
    /// True when the permutation null was Monte Carlo sampled.
    pub approximated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscoveryCount {
    pub alpha: f64,
    pub perm_discoveries: usize,
    pub compound_discoveries: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub articles: Vec<ArticleResult>,
    pub discoveries: Vec<DiscoveryCount>,
    pub exact_cap: u64,
    pub seed: u64,
    pub approximated_trials: usize,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Per-article scatter data: permutation p against pooled p.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from(
            "article_id,n_headlines,n_treated,statistic,perm_p,compound_p,approximated\n",
        );
        for a in &self.articles {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                a.article_id,
                a.n_headlines,
                a.n_treated,
                a.statistic,
                a.perm_p,
                a.compound_p,
                a.approximated
            )
            .expect("string write");
        }
        out
    }

    /// Sorted p-value curves for both methods, with the diagonal reference.
    pub fn sorted_curve_csv(&self) -> String {
        let m = self.articles.len();
        let mut perm: Vec<f64> = self.articles.iter().map(|a| a.perm_p).collect();
        let mut compound: Vec<f64> = self.articles.iter().map(|a| a.compound_p).collect();
        perm.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        compound.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        let mut out = String::from("rank,uniform_quantile,perm_p_sorted,compound_p_sorted\n");
        for i in 0..m {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                (i + 1) as f64 / m as f64,
                perm[i],
                compound[i]
            )
            .expect("string write");
        }
        out
    }

    pub fn discoveries_csv(&self) -> String {
        let mut out = String::from("alpha,method,discoveries\n");
        for d in &self.discoveries {
            writeln!(out, "{},permutation,{}", d.alpha, d.perm_discoveries).expect("string write");
            writeln!(out, "{},compound,{}", d.alpha, d.compound_discoveries).expect("string write");
        }
        out
    }

    /// Human-readable discovery table.
    pub fn table(&self) -> String {
        let mut out = String::from("alpha    perm-p discoveries    compound-p discoveries\n");
        for d in &self.discoveries {
            writeln!(
                out,
                "{:<8} {:<21} {}",
                d.alpha, d.perm_discoveries, d.compound_discoveries
            )
            .expect("string write");
        }
        out
    }
}

/// Run the full comparison on an ingested trial set: per-article permutation
/// p-values, pooled compound p-values, and BH discovery counts at each level.
/// Deterministic given the trial set, seed, and exact cap.
pub fn analyze(set: &TrialSet, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let nulls: Vec<TrialNull> =
        trial_null_batch(&set.trials, &headline_statistic, opts.exact_cap, opts.seed)?;
    let observed: Vec<f64> = set.trials.iter().map(headline_statistic).collect();
    let compound = pooled_pvalues(&nulls, &observed)?;
    let perm: Vec<f64> = nulls
        .iter()
        .zip(&observed)
        .map(|(null, &t)| single_trial_pvalue(null, t))
        .collect();
    let perm_vec = PValueVector::new(perm.clone())?;

    let mut discoveries = Vec::with_capacity(opts.alphas.len());
    for &alpha in &opts.alphas {
        let perm_bh = bh_reject(&perm_vec, alpha)?;
        let compound_bh = bh_reject(&compound, alpha)?;
        discoveries.push(DiscoveryCount {
            alpha,
            perm_discoveries: perm_bh.k_hat,
            compound_discoveries: compound_bh.k_hat,
        });
    }

    let articles = set
        .article_ids
        .iter()
        .enumerate()
        .map(|(i, id)| ArticleResult {
            article_id: id.clone(),
            n_headlines: set.trials[i].n(),
            n_treated: set.trials[i].n_treated(),
            statistic: observed[i],
            perm_p: perm[i],
            compound_p: compound.values()[i],
            approximated: nulls[i].approximated,
        })
        .collect();
    Ok(AnalysisReport {
        articles,
        discoveries,
        exact_cap: opts.exact_cap,
        seed: opts.seed,
        approximated_trials: nulls.iter().filter(|n| n.approximated).count(),
    })
}
