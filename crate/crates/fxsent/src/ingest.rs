//! Parsing and validation of the two input corpora: the news/post CSV and
//! the OHLC price-history CSV (Investing.com-style export).
//!
//! Both parsers work off any `io::Read`, so large files stream through the
//! `csv` reader without being held in memory. Vendor quirks the OHLC parser
//! tolerates: `K`/`M` volume suffixes, thousands separators, stray trailing
//! commas inside numeric cells, signed or unsigned percentages, blank volume
//! cells, and rows in any date order (output is always sorted ascending).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::ClassLabel;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("CSV read failed")]
    Csv(#[from] csv::Error),
    #[error("news header must be `timestamp,source,pair,weight,label,text`, got `{0}`")]
    BadNewsHeader(String),
    #[error("OHLC header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("nonpositive weight at row {0}")]
    NonpositiveWeight(usize),
    #[error("row {row}: invalid {field} cell `{text}`")]
    BadCell {
        row: usize,
        field: &'static str,
        text: String,
    },
    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },
    #[error("invalid candle at {date}: {reason}")]
    InvalidCandle { date: String, reason: String },
    #[error("duplicate timestamp {0} in price series")]
    DuplicateTimestamp(String),
    #[error("price series timestamps not strictly increasing at {0}")]
    OutOfOrder(String),
    #[error("canonical OHLC CSV can only carry midnight UTC bar closes, got {0}")]
    NonMidnightClose(String),
    #[error("write failed")]
    Io(#[from] std::io::Error),
}

/// One timestamped news article or social-media post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsRecord {
    /// Publication instant (news rows use ISO-8601 timestamps).
    pub timestamp: DateTime<Utc>,
    /// Free-text source name (e.g. `reuters`).
    pub source: String,
    /// Currency-pair code the item relates to (e.g. `USDCAD`).
    pub pair: String,
    /// Relevance weight used by the weighted sentiment aggregation; > 0.
    pub relevance_weight: f64,
    /// Raw UTF-8 body text.
    pub text: String,
    /// Gold sentiment class, present only in training/evaluation corpora.
    pub label: Option<ClassLabel>,
}

/// Bar timeframe of a price series. The OHLC CSV format carries dates only,
/// so CSV-ingested series are daily or coarser; intraday series are built
/// programmatically. The timeframe is declared by the caller, not inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Timeframe {
    H4,
    D1,
    MN,
}

impl Timeframe {
    pub fn as_str(self) -> &'static str {
        match self {
            Timeframe::H4 => "H4",
            Timeframe::D1 => "D1",
            Timeframe::MN => "MN",
        }
    }
}

impl fmt::Display for Timeframe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Timeframe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H4" => Ok(Timeframe::H4),
            "D1" => Ok(Timeframe::D1),
            "MN" => Ok(Timeframe::MN),
            other => Err(format!("unknown timeframe `{other}` (expected H4|D1|MN)")),
        }
    }
}

/// One OHLC bar. `date` is the bar-close instant in UTC.
///
/// Validation requires positive finite prices and `low <= high`. Open or
/// close lying outside `[low, high]` is tolerated: vendor exports routinely
/// carry an open snapshotted from the previous close at a different cutoff,
/// so strict containment would reject real data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub date: DateTime<Utc>,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    /// Traded volume in units, absent when the export leaves the cell blank.
    pub volume: Option<u64>,
    /// Bar-over-bar change as a fraction (+0.48% -> 0.0048).
    pub change_frac: Option<f64>,
}

impl Candle {
    pub fn validate(&self) -> Result<(), IngestError> {
        let date = self.date.to_rfc3339();
        for (name, px) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !px.is_finite() || px <= 0.0 {
                return Err(IngestError::InvalidCandle {
                    date,
                    reason: format!("nonpositive {name} price {px}"),
                });
            }
        }
        if self.high < self.low {
            return Err(IngestError::InvalidCandle {
                date,
                reason: format!("high {} < low {}", self.high, self.low),
            });
        }
        Ok(())
    }
}

/// A validated, time-ordered sequence of bars for one currency pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub pair: String,
    pub timeframe: Timeframe,
    pub bars: Vec<Candle>,
}

impl PriceSeries {
    /// Validates every candle and the strict timestamp ordering.
    pub fn new(
        pair: impl Into<String>,
        timeframe: Timeframe,
        bars: Vec<Candle>,
    ) -> Result<PriceSeries, IngestError> {
        for candle in &bars {
            candle.validate()?;
        }
        for pair_of_bars in bars.windows(2) {
            let (a, b) = (&pair_of_bars[0], &pair_of_bars[1]);
            if a.date == b.date {
                return Err(IngestError::DuplicateTimestamp(a.date.to_rfc3339()));
            }
            if a.date > b.date {
                return Err(IngestError::OutOfOrder(b.date.to_rfc3339()));
            }
        }
        Ok(PriceSeries {
            pair: pair.into(),
            timeframe,
            bars,
        })
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|c| c.close).collect()
    }

    pub fn index_of(&self, timestamp: DateTime<Utc>) -> Option<usize> {
        self.bars.binary_search_by_key(&timestamp, |c| c.date).ok()
    }
}

const NEWS_HEADER: [&str; 6] = ["timestamp", "source", "pair", "weight", "label", "text"];

/// Parses the news corpus CSV (`timestamp,source,pair,weight,label,text`).
///
/// Row numbers in errors are 1-based over data rows (the header is row 0).
pub fn parse_news_csv<R: Read>(reader: R) -> Result<Vec<NewsRecord>, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = csv.headers()?.clone();
    let got: Vec<String> = headers
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    if got != NEWS_HEADER {
        return Err(IngestError::BadNewsHeader(got.join(",")));
    }

    let mut records = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row = row?;
        let n = i + 1;

        let timestamp = parse_news_timestamp(row.get(0).unwrap_or(""), n)?;
        let source = row.get(1).unwrap_or("").trim().to_string();
        let pair = row.get(2).unwrap_or("").trim().to_string();
        if pair.is_empty() {
            return Err(IngestError::EmptyField {
                row: n,
                field: "pair",
            });
        }

        let weight_text = row.get(3).unwrap_or("").trim();
        let relevance_weight: f64 = weight_text.parse().map_err(|_| IngestError::BadCell {
            row: n,
            field: "weight",
            text: weight_text.to_string(),
        })?;
        if !relevance_weight.is_finite() || relevance_weight <= 0.0 {
            return Err(IngestError::NonpositiveWeight(n));
        }

        let label_text = row.get(4).unwrap_or("").trim();
        let label = if label_text.is_empty() {
            None
        } else {
            Some(
                label_text
                    .parse::<ClassLabel>()
                    .map_err(|_| IngestError::BadCell {
                        row: n,
                        field: "label",
                        text: label_text.to_string(),
                    })?,
            )
        };

        let text = row.get(5).unwrap_or("").to_string();
        if text.trim().is_empty() {
            return Err(IngestError::EmptyField {
                row: n,
                field: "text",
            });
        }

        records.push(NewsRecord {
            timestamp,
            source,
            pair,
            relevance_weight,
            text,
            label,
        });
    }
    Ok(records)
}

fn parse_news_timestamp(text: &str, row: usize) -> Result<DateTime<Utc>, IngestError> {
    DateTime::parse_from_rfc3339(text.trim())
        .map(|dt| dt.with_timezone(&Utc))
        .map_err(|_| IngestError::BadCell {
            row,
            field: "timestamp",
            text: text.to_string(),
        })
}

/// Column positions resolved from an OHLC header row.
struct OhlcColumns {
    date: usize,
    price: usize,
    open: usize,
    high: usize,
    low: usize,
    volume: Option<usize>,
    change: Option<usize>,
}

fn resolve_ohlc_columns(headers: &csv::StringRecord) -> Result<OhlcColumns, IngestError> {
    let mut date = None;
    let mut price = None;
    let mut open = None;
    let mut high = None;
    let mut low = None;
    let mut volume = None;
    let mut change = None;
    for (i, header) in headers.iter().enumerate() {
        // "Vol." -> "vol", "Change %" / "Change, %" -> "change"
        let key: String = header
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "date" => date = Some(i),
            "price" => price = Some(i),
            "open" => open = Some(i),
            "high" => high = Some(i),
            "low" => low = Some(i),
            "vol" | "volume" => volume = Some(i),
            "change" => change = Some(i),
            _ => {}
        }
    }
    Ok(OhlcColumns {
        date: date.ok_or(IngestError::MissingColumn("Date"))?,
        price: price.ok_or(IngestError::MissingColumn("Price"))?,
        open: open.ok_or(IngestError::MissingColumn("Open"))?,
        high: high.ok_or(IngestError::MissingColumn("High"))?,
        low: low.ok_or(IngestError::MissingColumn("Low"))?,
        volume,
        change,
    })
}

/// Parses an Investing.com-style OHLC export into a validated [`PriceSeries`].
///
/// Rows are sorted ascending by date regardless of file order; duplicate
/// dates are a hard error rather than deduplicated, since silent dedup hides
/// data faults that would corrupt the indicators downstream.
pub fn parse_ohlc_csv<R: Read>(
    reader: R,
    pair: &str,
    timeframe: Timeframe,
) -> Result<PriceSeries, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let columns = resolve_ohlc_columns(&csv.headers()?.clone())?;

    let mut bars = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let row = row?;
        let n = i + 1;
        let cell = |idx: usize| row.get(idx).unwrap_or("");

        let date_text = cell(columns.date);
        let date = NaiveDate::parse_from_str(date_text.trim(), "%m/%d/%Y")
            .map_err(|_| IngestError::BadCell {
                row: n,
                field: "date",
                text: date_text.to_string(),
            })?
            .and_hms_opt(0, 0, 0)
            .expect("midnight is always valid")
            .and_utc();

        let close = parse_price_cell(cell(columns.price), n, "price")?;
        let open = parse_price_cell(cell(columns.open), n, "open")?;
        let high = parse_price_cell(cell(columns.high), n, "high")?;
        let low = parse_price_cell(cell(columns.low), n, "low")?;
        let volume = match columns.volume {
            Some(idx) => parse_volume_cell(cell(idx), n)?,
            None => None,
        };
        let change_frac = match columns.change {
            Some(idx) => parse_change_cell(cell(idx), n)?,
            None => None,
        };

        bars.push(Candle {
            date,
            open,
            high,
            low,
            close,
            volume,
            change_frac,
        });
    }

    bars.sort_by_key(|c| c.date);
    PriceSeries::new(pair, timeframe, bars)
}

/// Strips the junk a numeric cell may carry: surrounding whitespace, stray
/// trailing commas (Investing.com exports show cells like `1.3475,`), and
/// thousands separators between digits.
fn clean_numeric_text(raw: &str) -> String {
    let mut s = raw.trim();
    while let Some(stripped) = s.strip_suffix(',') {
        s = stripped.trim_end();
    }
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == ',' {
            let prev_digit = i > 0 && chars[i - 1].is_ascii_digit();
            let next_digit = i + 1 < chars.len() && chars[i + 1].is_ascii_digit();
            if prev_digit && next_digit {
                continue; // thousands separator
            }
        }
        out.push(c);
    }
    out
}

fn parse_price_cell(raw: &str, row: usize, field: &'static str) -> Result<f64, IngestError> {
    let text = clean_numeric_text(raw);
    text.parse::<f64>().map_err(|_| IngestError::BadCell {
        row,
        field,
        text: raw.to_string(),
    })
}

fn parse_volume_cell(raw: &str, row: usize) -> Result<Option<u64>, IngestError> {
    let text = clean_numeric_text(raw);
    if text.is_empty() || text == "-" {
        return Ok(None);
    }
    let bad = || IngestError::BadCell {
        row,
        field: "volume",
        text: raw.to_string(),
    };
    let (digits, multiplier) = match text.chars().last() {
        Some('K') | Some('k') => (&text[..text.len() - 1], 1_000.0),
        Some('M') | Some('m') => (&text[..text.len() - 1], 1_000_000.0),
        _ => (text.as_str(), 1.0),
    };
    let value: f64 = digits.trim().parse().map_err(|_| bad())?;
    if !value.is_finite() || value < 0.0 {
        return Err(bad());
    }
    Ok(Some((value * multiplier).round() as u64))
}

/// Parses a `Change %` cell into a fraction. The division by 100 is done by
/// exponent adjustment on the decimal text, so the stored fraction is the
/// correctly rounded value of the printed percentage.
fn parse_change_cell(raw: &str, row: usize) -> Result<Option<f64>, IngestError> {
    let cleaned = clean_numeric_text(raw);
    if cleaned.is_empty() || cleaned == "-" {
        return Ok(None);
    }
    let bad = || IngestError::BadCell {
        row,
        field: "change",
        text: raw.to_string(),
    };
    let number = cleaned.strip_suffix('%').unwrap_or(&cleaned).trim();
    let shifted = shift_decimal_exponent(number, -2).ok_or_else(bad)?;
    let value: f64 = shifted.parse().map_err(|_| bad())?;
    if !value.is_finite() {
        return Err(bad());
    }
    Ok(Some(value))
}

/// Returns a decimal string equal to `text * 10^shift`, or None when `text`
/// is not number-shaped. Works on the text itself so no rounding happens.
fn shift_decimal_exponent(text: &str, shift: i32) -> Option<String> {
    if text.is_empty() {
        return None;
    }
    match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = text[pos + 1..].parse().ok()?;
            Some(format!("{}e{}", &text[..pos], exp.checked_add(shift)?))
        }
        None => Some(format!("{text}e{shift}")),
    }
}

/// Shifts the decimal point of a plain decimal string right by `places`
/// (multiplies by 10^places), producing a human-readable plain form.
fn shift_point_right(text: &str, places: usize) -> String {
    if let Some(pos) = text.find(['e', 'E']) {
        let exp: i32 = text[pos + 1..].parse().unwrap_or(0);
        return format!("{}e{}", &text[..pos], exp + places as i32);
    }
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i.to_string(), f.to_string()),
        None => (body.to_string(), String::new()),
    };
    let mut frac = frac_part;
    while frac.len() < places {
        frac.push('0');
    }
    let moved: String = frac.chars().take(places).collect();
    let rest: String = frac.chars().skip(places).collect();
    let mut int_full = format!("{int_part}{moved}");
    int_full = int_full.trim_start_matches('0').to_string();
    if int_full.is_empty() {
        int_full.push('0');
    }
    if rest.is_empty() {
        format!("{sign}{int_full}")
    } else {
        format!("{sign}{int_full}.{rest}")
    }
}

/// Writes a [`PriceSeries`] back out in the canonical OHLC CSV layout
/// (`Date,Price,Open,High,Low,Vol.,Change %`). Re-parsing the output yields
/// an identical series. Only midnight-UTC bar closes are representable.
pub fn write_ohlc_csv<W: Write>(series: &PriceSeries, writer: &mut W) -> Result<(), IngestError> {
    writeln!(writer, "Date,Price,Open,High,Low,Vol.,Change %")?;
    for candle in &series.bars {
        let time = candle.date.time();
        if time != chrono::NaiveTime::MIN {
            return Err(IngestError::NonMidnightClose(candle.date.to_rfc3339()));
        }
        let date = candle.date.format("%m/%d/%Y");
        let volume = match candle.volume {
            Some(v) => v.to_string(),
            None => String::new(),
        };
        let change = match candle.change_frac {
            Some(frac) => format!("{}%", shift_point_right(&frac.to_string(), 2)),
            None => String::new(),
        };
        writeln!(
            writer,
            "{date},{},{},{},{},{volume},{change}",
            candle.close, candle.open, candle.high, candle.low
        )?;
    }
    Ok(())
}
