//! OHLCV ingestion, day-ahead movement labels, technical-indicator feature
//! extraction and timeline segmentation.
//!
//! All operations are pure given their inputs. The hold-out partition is
//! wrapped in a read-counting guard so leakage into earlier pipeline stages
//! can be asserted, not just assumed.

mod indicators;
mod synth;

pub use indicators::{compute_indicator, IndicatorFamily, IndicatorRegistry, IndicatorSpec};
pub use synth::{synth_date, synth_regime_series, RegimeParams};

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One daily bar of trading data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    fn validate(&self) -> Result<()> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::Value(format!(
                "non-positive or non-finite price on {}",
                self.date
            )));
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(Error::Value(format!("negative volume on {}", self.date)));
        }
        if self.low > self.open.min(self.close)
            || self.high < self.open.max(self.close)
            || self.low > self.high
        {
            return Err(Error::Value(format!(
                "inconsistent high/low on {}",
                self.date
            )));
        }
        Ok(())
    }
}

/// Date-ordered series of bars.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvSeries {
    bars: Vec<OhlcvBar>,
}

impl OhlcvSeries {
    /// Build a series, sorting bars by date. Duplicate dates are rejected.
    pub fn new(mut bars: Vec<OhlcvBar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::EmptyData("series must contain at least one bar".into()));
        }
        for bar in &bars {
            bar.validate()?;
        }
        bars.sort_by_key(|b| b.date);
        for w in bars.windows(2) {
            if w[0].date == w[1].date {
                return Err(Error::Ordering(format!("duplicate date {}", w[0].date)));
            }
        }
        Ok(OhlcvSeries { bars })
    }

    pub fn bars(&self) -> &[OhlcvBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }
}

const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];

/// Load an OHLCV series from a CSV file with header
/// `date,open,high,low,close,volume` (any column order, ISO-8601 dates).
pub fn load_ohlcv(path: &Path) -> Result<OhlcvSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::File {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        },
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    let mut index = [usize::MAX; 6];
    for (i, name) in OHLCV_HEADER.iter().enumerate() {
        match headers.iter().position(|h| h.trim() == *name) {
            Some(pos) => index[i] = pos,
            None => {
                return Err(Error::Format(format!("missing column '{name}'")));
            }
        }
    }
    if headers.len() != 6 {
        return Err(Error::Format(format!(
            "expected 6 columns, found {}",
            headers.len()
        )));
    }
    let mut bars = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(index[i]).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d").map_err(|e| {
            Error::Format(format!("line {}: bad date '{}': {e}", line + 2, field(0)))
        })?;
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|e| {
                Error::Format(format!(
                    "line {}: bad {} '{}': {e}",
                    line + 2,
                    OHLCV_HEADER[i],
                    field(i)
                ))
            })
        };
        bars.push(OhlcvBar {
            date,
            open: num(1)?,
            high: num(2)?,
            low: num(3)?,
            close: num(4)?,
            volume: num(5)?,
        });
    }
    OhlcvSeries::new(bars)
}

/// Day-ahead movement labels: y(t+1) = 1 iff C(t+1) - C(t) > 0.
///
/// Returns one (date, label) pair per day t that has a following day; the
/// date is day t's.
pub fn generate_labels(series: &OhlcvSeries) -> Result<Vec<(NaiveDate, u8)>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 bars to generate a movement label".into(),
        ));
    }
    Ok(series
        .bars()
        .windows(2)
        .map(|w| (w[0].date, (w[1].close - w[0].close > 0.0) as u8))
        .collect())
}

/// Write a series back out in the canonical six-column layout.
pub fn write_ohlcv(series: &OhlcvSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "open", "high", "low", "close", "volume"])?;
    for bar in series.bars() {
        w.write_record(&[
            bar.date.format("%Y-%m-%d").to_string(),
            format!("{}", bar.open),
            format!("{}", bar.high),
            format!("{}", bar.low),
            format!("{}", bar.close),
            format!("{}", bar.volume),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One labeled pattern: feature vector + day-ahead movement label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub date: NaiveDate,
    pub features: Vec<f64>,
    pub label: u8,
}

/// Matrix of indicator features with binary movement labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureDataset {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.rows.iter().map(|r| r.label)
    }

    pub fn has_both_classes(&self) -> bool {
        let mut seen = [false; 2];
        for r in &self.rows {
            seen[r.label as usize] = true;
        }
        seen[0] && seen[1]
    }

    /// Concatenate rows of `self` and `other` (same feature set required).
    pub fn union(&self, other: &FeatureDataset) -> Result<FeatureDataset> {
        if self.feature_names != other.feature_names {
            return Err(Error::Specification(
                "cannot union datasets with different feature sets".into(),
            ));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        rows.sort_by_key(|r| r.date);
        Ok(FeatureDataset {
            feature_names: self.feature_names.clone(),
            rows,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.push("label".to_string());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.date.format("%Y-%m-%d").to_string()];
            rec.extend(row.features.iter().map(|v| format!("{v:.10}")));
            rec.push(row.label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureDataset> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.len() < 3 || headers.get(0) != Some("date") {
            return Err(Error::Format("feature CSV must start with 'date'".into()));
        }
        if headers.get(headers.len() - 1) != Some("label") {
            return Err(Error::Format("feature CSV must end with 'label'".into()));
        }
        let feature_names: Vec<String> = headers
            .iter()
            .skip(1)
            .take(headers.len() - 2)
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let date = NaiveDate::parse_from_str(record.get(0).unwrap_or(""), "%Y-%m-%d")
                .map_err(|e| Error::Format(format!("bad date: {e}")))?;
            let features = (1..record.len() - 1)
                .map(|i| {
                    record
                        .get(i)
                        .unwrap_or("")
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("bad feature value: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let label: u8 = record
                .get(record.len() - 1)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Format(format!("bad label: {e}")))?;
            if label > 1 {
                return Err(Error::Value(format!("label {label} not in {{0,1}}")));
            }
            rows.push(FeatureRow { date, features, label });
        }
        Ok(FeatureDataset { feature_names, rows })
    }
}

/// Compute the indicator feature matrix with aligned day-ahead labels.
///
/// Row t uses only bars in the lookback window ending at day t; its label
/// uses day t+1. Warm-up rows without a full lookback are dropped.
pub fn compute_features(
    series: &OhlcvSeries,
    registry: &IndicatorRegistry,
) -> Result<FeatureDataset> {
    let warmup = registry.max_lookback();
    if series.len() < warmup + 1 {
        return Err(Error::InsufficientData(format!(
            "series has {} bars, need at least {} (max lookback {} plus label day)",
            series.len(),
            warmup + 1,
            warmup
        )));
    }
    let bars = series.bars();
    let mut rows = Vec::with_capacity(series.len() - warmup);
    for t in (warmup - 1)..(series.len() - 1) {
        let mut features = Vec::with_capacity(registry.len());
        for spec in registry.specs() {
            let lb = spec.lookback();
            let value = compute_indicator(spec, &bars[t + 1 - lb..=t]);
            if !value.is_finite() {
                return Err(Error::Value(format!(
                    "indicator {} produced a non-finite value on {}",
                    spec.name, bars[t].date
                )));
            }
            features.push(value);
        }
        let label = (bars[t + 1].close - bars[t].close > 0.0) as u8;
        rows.push(FeatureRow {
            date: bars[t].date,
            features,
            label,
        });
    }
    Ok(FeatureDataset {
        feature_names: registry.names(),
        rows,
    })
}

/// Inclusive calendar date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::Specification(format!(
                "range start {start} after end {end}"
            )));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// The four timeline roles: pre-crisis, crisis train, crisis test, hold-out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineSpec {
    pub id: String,
    pub pre_crisis: DateRange,
    pub crisis_train: DateRange,
    pub crisis_test: DateRange,
    pub hold_out: DateRange,
}

impl TimelineSpec {
    fn ranges(&self) -> [(&'static str, &DateRange); 4] {
        [
            ("pre_crisis", &self.pre_crisis),
            ("crisis_train", &self.crisis_train),
            ("crisis_test", &self.crisis_test),
            ("hold_out", &self.hold_out),
        ]
    }

    fn validate(&self) -> Result<()> {
        let ranges = self.ranges();
        for i in 0..ranges.len() {
            for j in i + 1..ranges.len() {
                if ranges[i].1.overlaps(ranges[j].1) {
                    return Err(Error::Specification(format!(
                        "date ranges {} and {} overlap",
                        ranges[i].0, ranges[j].0
                    )));
                }
            }
        }
        for (name, range) in &ranges[..3] {
            if range.end >= self.hold_out.start {
                return Err(Error::Specification(format!(
                    "hold-out range must be strictly the latest; {name} ends {} after hold-out start {}",
                    range.end, self.hold_out.start
                )));
            }
        }
        Ok(())
    }

    /// 2008-crisis timeline: pre-crisis 2005-03..2006-12, crisis train
    /// 2007-01..2009-06, crisis test 2009-07..2010-04, hold-out
    /// 2010-05..2011-05.
    pub fn timeline_2008() -> TimelineSpec {
        TimelineSpec {
            id: "timeline-1-2008".into(),
            pre_crisis: month_range(2005, 3, 2006, 12),
            crisis_train: month_range(2007, 1, 2009, 6),
            crisis_test: month_range(2009, 7, 2010, 4),
            hold_out: month_range(2010, 5, 2011, 5),
        }
    }

    /// COVID-19 timeline: pre-crisis 2017-01..2018-12, crisis train
    /// 2019-01..2020-07, crisis test 2020-08..2020-12, hold-out
    /// 2021-01..2021-05.
    pub fn timeline_covid() -> TimelineSpec {
        TimelineSpec {
            id: "timeline-2-covid".into(),
            pre_crisis: month_range(2017, 1, 2018, 12),
            crisis_train: month_range(2019, 1, 2020, 7),
            crisis_test: month_range(2020, 8, 2020, 12),
            hold_out: month_range(2021, 1, 2021, 5),
        }
    }
}

/// Inclusive range from the first day of one month to the last day of
/// another.
fn month_range(y0: i32, m0: u32, y1: i32, m1: u32) -> DateRange {
    let start = NaiveDate::from_ymd_opt(y0, m0, 1).unwrap();
    let next = if m1 == 12 {
        NaiveDate::from_ymd_opt(y1 + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(y1, m1 + 1, 1).unwrap()
    };
    DateRange { start, end: next.pred_opt().unwrap() }
}

/// Hold-out dataset behind a read counter. Every access through `access()`
/// is counted, which lets tests prove the partition was untouched during
/// search and selection.
#[derive(Debug)]
pub struct Sequestered {
    ds: FeatureDataset,
    reads: AtomicUsize,
}

impl Sequestered {
    pub fn new(ds: FeatureDataset) -> Self {
        Sequestered { ds, reads: AtomicUsize::new(0) }
    }

    pub fn access(&self) -> &FeatureDataset {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.ds
    }

    pub fn read_count(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.ds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ds.is_empty()
    }
}

/// The four non-overlapping partitions of one timeline.
#[derive(Debug)]
pub struct DatasetSplit {
    pub timeline_id: String,
    pub pre_crisis: FeatureDataset,
    pub crisis_train: FeatureDataset,
    pub crisis_test: FeatureDataset,
    pub hold_out: Sequestered,
}

/// Assign rows to partitions by date; rows outside all ranges are dropped.
pub fn segment_timeline(dataset: &FeatureDataset, spec: &TimelineSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let mut parts: [FeatureDataset; 4] = std::array::from_fn(|_| FeatureDataset {
        feature_names: dataset.feature_names.clone(),
        rows: Vec::new(),
    });
    for row in &dataset.rows {
        for (i, (_, range)) in spec.ranges().iter().enumerate() {
            if range.contains(row.date) {
                parts[i].rows.push(row.clone());
                break;
            }
        }
    }
    for (i, (name, _)) in spec.ranges().iter().enumerate() {
        if parts[i].is_empty() {
            return Err(Error::Coverage(format!(
                "partition {name} has no rows in its date range"
            )));
        }
    }
    let [pre_crisis, crisis_train, crisis_test, hold] = parts;
    Ok(DatasetSplit {
        timeline_id: spec.id.clone(),
        pre_crisis,
        crisis_train,
        crisis_test,
        hold_out: Sequestered::new(hold),
    })
}

/// Per-feature z-score parameters fitted on a training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose training-set variance was zero; their sigma is forced
    /// to 1 so standardization maps them to 0.
    pub constant: Vec<bool>,
}

/// Fit per-feature mean and population standard deviation.
pub fn fit_standardization(train: &FeatureDataset) -> Result<StandardizationParams> {
    if train.is_empty() {
        return Err(Error::EmptyData("cannot fit standardization on empty dataset".into()));
    }
    let nf = train.n_features();
    let n = train.len() as f64;
    let mut mean = vec![0.0; nf];
    for row in &train.rows {
        for (m, &v) in mean.iter_mut().zip(&row.features) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; nf];
    for row in &train.rows {
        for i in 0..nf {
            let d = row.features[i] - mean[i];
            var[i] += d * d;
        }
    }
    let mut std = Vec::with_capacity(nf);
    let mut constant = Vec::with_capacity(nf);
    for v in var {
        let s = (v / n).sqrt();
        if s > 0.0 {
            std.push(s);
            constant.push(false);
        } else {
            std.push(1.0);
            constant.push(true);
        }
    }
    Ok(StandardizationParams { mean, std, constant })
}

/// Apply fitted parameters unchanged to any dataset.
pub fn apply_standardization(
    params: &StandardizationParams,
    ds: &FeatureDataset,
) -> FeatureDataset {
    let rows = ds
        .rows
        .iter()
        .map(|row| FeatureRow {
            date: row.date,
            features: row
                .features
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - params.mean[i]) / params.std[i])
                .collect(),
            label: row.label,
        })
        .collect();
    FeatureDataset {
        feature_names: ds.feature_names.clone(),
        rows,
    }
}
