//! Technical confirmation indicators over close prices: simple moving
//! average and Wilder's relative strength index.

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::ingest::PriceSeries;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("insufficient history: {kind}({period}) needs at least {needed} closes, got {got}")]
    InsufficientHistory {
        kind: IndicatorKind,
        period: usize,
        needed: usize,
        got: usize,
    },
    #[error("period must be >= 1")]
    ZeroPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    Sma,
    Rsi,
}

impl std::fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndicatorKind::Sma => f.write_str("SMA"),
            IndicatorKind::Rsi => f.write_str("RSI"),
        }
    }
}

/// Indicator values aligned to the bars of a source series. The first
/// defined value sits at source index `first_index` (period-1 for SMA,
/// period for RSI); earlier bars have no value.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub kind: IndicatorKind,
    pub period: usize,
    pub first_index: usize,
    pub points: Vec<(DateTime<Utc>, f64)>,
}

impl IndicatorSeries {
    /// Value at a source-series bar index, if defined there.
    pub fn value_at_index(&self, bar_index: usize) -> Option<f64> {
        let offset = bar_index.checked_sub(self.first_index)?;
        self.points.get(offset).map(|&(_, v)| v)
    }
}

/// Simple moving average: value at index i (i >= period-1) is the arithmetic
/// mean of the window `closes[i-period+1 ..= i]`, computed directly per
/// window so each value is exactly the windowed mean.
pub fn sma(closes: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    if closes.len() < period {
        return Err(IndicatorError::InsufficientHistory {
            kind: IndicatorKind::Sma,
            period,
            needed: period,
            got: closes.len(),
        });
    }
    Ok(closes
        .windows(period)
        .map(|w| w.iter().sum::<f64>() / period as f64)
        .collect())
}

/// Wilder RSI. The seed average gain/loss is the plain mean of up/down moves
/// over the first `period` deltas; afterwards
/// `avg = (prev_avg * (period - 1) + current) / period`. Edge conventions:
/// no losses -> 100, no gains -> 0, neither -> 50.
pub fn rsi(closes: &[f64], period: usize) -> Result<Vec<f64>, IndicatorError> {
    if period == 0 {
        return Err(IndicatorError::ZeroPeriod);
    }
    if closes.len() < period + 1 {
        return Err(IndicatorError::InsufficientHistory {
            kind: IndicatorKind::Rsi,
            period,
            needed: period + 1,
            got: closes.len(),
        });
    }

    let mut gains = 0.0;
    let mut losses = 0.0;
    for i in 1..=period {
        let delta = closes[i] - closes[i - 1];
        if delta >= 0.0 {
            gains += delta;
        } else {
            losses -= delta;
        }
    }
    let mut avg_gain = gains / period as f64;
    let mut avg_loss = losses / period as f64;

    let mut out = Vec::with_capacity(closes.len() - period);
    out.push(rsi_value(avg_gain, avg_loss));
    for i in period + 1..closes.len() {
        let delta = closes[i] - closes[i - 1];
        let (gain, loss) = if delta >= 0.0 {
            (delta, 0.0)
        } else {
            (0.0, -delta)
        };
        avg_gain = (avg_gain * (period as f64 - 1.0) + gain) / period as f64;
        avg_loss = (avg_loss * (period as f64 - 1.0) + loss) / period as f64;
        out.push(rsi_value(avg_gain, avg_loss));
    }
    Ok(out)
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

/// SMA over a price series' closes, aligned to its bar timestamps.
pub fn sma_series(series: &PriceSeries, period: usize) -> Result<IndicatorSeries, IndicatorError> {
    let values = sma(&series.closes(), period)?;
    let first_index = period - 1;
    Ok(IndicatorSeries {
        kind: IndicatorKind::Sma,
        period,
        first_index,
        points: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (series.bars[first_index + i].date, v))
            .collect(),
    })
}

/// RSI over a price series' closes, aligned to its bar timestamps.
pub fn rsi_series(series: &PriceSeries, period: usize) -> Result<IndicatorSeries, IndicatorError> {
    let values = rsi(&series.closes(), period)?;
    let first_index = period;
    Ok(IndicatorSeries {
        kind: IndicatorKind::Rsi,
        period,
        first_index,
        points: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (series.bars[first_index + i].date, v))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sma_of_constant_series_is_the_constant() {
        let closes = vec![1.2; 8];
        let out = sma(&closes, 3).unwrap();
        assert_eq!(out.len(), 6);
        for v in out {
            assert!((v - 1.2).abs() < 1e-15);
        }
    }

    #[test]
    fn sma_hand_example() {
        let out = sma(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(out, vec![1.5, 2.5, 3.5]);
    }

    #[test]
    fn sma_insufficient_history_errors() {
        let err = sma(&[1.0], 2).unwrap_err();
        assert!(err.to_string().contains("insufficient history"), "{err}");
        assert_eq!(sma(&[1.0], 0).unwrap_err(), IndicatorError::ZeroPeriod);
    }

    #[test]
    fn rsi_is_100_on_strictly_rising_series() {
        let closes: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 * 0.01).collect();
        for v in rsi(&closes, 14).unwrap() {
            assert_eq!(v, 100.0);
        }
    }

    #[test]
    fn rsi_is_0_on_strictly_falling_series() {
        let closes: Vec<f64> = (0..30).map(|i| 2.0 - i as f64 * 0.01).collect();
        for v in rsi(&closes, 14).unwrap() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn rsi_is_50_on_flat_series() {
        let closes = vec![1.1; 20];
        for v in rsi(&closes, 14).unwrap() {
            assert_eq!(v, 50.0);
        }
    }

    /// Independent Wilder recursion, step by step, used to freeze the worked
    /// example values.
    fn wilder_oracle(closes: &[f64], period: usize) -> Vec<f64> {
        let deltas: Vec<f64> = closes.windows(2).map(|w| w[1] - w[0]).collect();
        let seed_gain: f64 =
            deltas[..period].iter().map(|&d| d.max(0.0)).sum::<f64>() / period as f64;
        let seed_loss: f64 =
            deltas[..period].iter().map(|&d| (-d).max(0.0)).sum::<f64>() / period as f64;
        let mut avgs = vec![(seed_gain, seed_loss)];
        for &d in &deltas[period..] {
            let (g, l) = *avgs.last().unwrap();
            avgs.push((
                (g * (period as f64 - 1.0) + d.max(0.0)) / period as f64,
                (l * (period as f64 - 1.0) + (-d).max(0.0)) / period as f64,
            ));
        }
        avgs.into_iter()
            .map(|(g, l)| {
                if l == 0.0 {
                    if g == 0.0 {
                        50.0
                    } else {
                        100.0
                    }
                } else {
                    100.0 - 100.0 / (1.0 + g / l)
                }
            })
            .collect()
    }

    #[test]
    fn rsi_worked_example_matches_wilder_recursion() {
        // closes [1.0, 1.1, 1.05, 1.15], period 2:
        //   deltas +0.1, -0.05, +0.1
        //   seed: avg_gain (0.1+0)/2 = 0.05, avg_loss (0+0.05)/2 = 0.025
        //   RSI_2 = 100 - 100/(1 + 2) = 66.666...
        //   step:  avg_gain (0.05*1 + 0.1)/2 = 0.075
        //          avg_loss (0.025*1 + 0)/2 = 0.0125
        //   RSI_3 = 100 - 100/(1 + 6) = 85.714...
        let closes = [1.0, 1.1, 1.05, 1.15];
        let expected = wilder_oracle(&closes, 2);
        assert!((expected[0] - 100.0 * 2.0 / 3.0).abs() < 1e-9);
        assert!((expected[1] - 100.0 * 6.0 / 7.0).abs() < 1e-9);

        let out = rsi(&closes, 2).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0] - 66.66666666666667).abs() < 1e-6, "{}", out[0]);
        assert!((out[1] - 85.71428571428571).abs() < 1e-6, "{}", out[1]);
        for (got, want) in out.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rsi_insufficient_history_errors() {
        assert!(rsi(&[1.0, 1.1], 2).is_err());
        assert!(rsi(&[1.0, 1.1, 1.2], 2).is_ok());
    }

    #[test]
    fn series_alignment_indices() {
        use crate::ingest::{Candle, Timeframe};
        let bars: Vec<Candle> = (0..10)
            .map(|i| Candle {
                date: chrono::NaiveDate::from_ymd_opt(2023, 4, 1)
                    .unwrap()
                    .and_hms_opt(0, 0, 0)
                    .unwrap()
                    .and_utc()
                    + chrono::Duration::days(i),
                open: 1.0,
                high: 1.2,
                low: 0.9,
                close: 1.0 + i as f64 * 0.01,
                volume: None,
                change_frac: None,
            })
            .collect();
        let series = PriceSeries::new("EURUSD", Timeframe::D1, bars).unwrap();

        let sma3 = sma_series(&series, 3).unwrap();
        assert_eq!(sma3.first_index, 2);
        assert_eq!(sma3.points.len(), 8);
        assert_eq!(sma3.value_at_index(1), None);
        assert!((sma3.value_at_index(2).unwrap() - 1.01).abs() < 1e-12);
        assert_eq!(sma3.points[0].0, series.bars[2].date);

        let rsi3 = rsi_series(&series, 3).unwrap();
        assert_eq!(rsi3.first_index, 3);
        assert_eq!(rsi3.points.len(), 7);
        assert_eq!(rsi3.value_at_index(2), None);
        assert_eq!(rsi3.value_at_index(3), Some(100.0));
    }

    #[test]
    fn sma_prefix_extension_preserves_shared_values() {
        let full: Vec<f64> = (0..60)
            .map(|i| 1.0 + ((i * 37) % 11) as f64 * 0.003)
            .collect();
        let suffix = &full[20..];
        let sma_full = sma(&full, 5).unwrap();
        let sma_suffix = sma(suffix, 5).unwrap();
        // Shared windows start at full index 24 == suffix index 4.
        for (i, v) in sma_suffix.iter().enumerate() {
            assert_eq!(sma_full[i + 20], *v);
        }
    }

    #[test]
    fn rsi_prefix_deviation_shrinks_as_history_grows() {
        // Deterministic pseudo-random walk.
        let mut closes = vec![1.0f64];
        let mut state: u64 = 0x9E3779B97F4A7C15;
        for _ in 0..400 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let step = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.01;
            let last = *closes.last().unwrap();
            closes.push((last + step).max(0.01));
        }
        let period = 14;
        let full = rsi(&closes, period).unwrap();
        // Deviation of truncated-history RSI from full-history RSI over the
        // last 30 bars, for progressively longer suffixes.
        let tail = 30;
        let mut deviations = Vec::new();
        for start in [200usize, 150, 100, 50] {
            let sub = rsi(&closes[start..], period).unwrap();
            let mut max_dev = 0.0f64;
            for k in 0..tail {
                let full_idx = full.len() - 1 - k;
                let sub_idx = sub.len() - 1 - k;
                max_dev = max_dev.max((full[full_idx] - sub[sub_idx]).abs());
            }
            deviations.push(max_dev);
        }
        for pair in deviations.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "deviation should shrink: {deviations:?}"
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn rsi_stays_in_bounds_on_random_walks(
            steps in proptest::collection::vec(-0.05f64..0.05, 30..200),
        ) {
            let mut closes = vec![1.0f64];
            for s in steps {
                let last = *closes.last().unwrap();
                closes.push((last * (1.0 + s)).max(1e-6));
            }
            for v in rsi(&closes, 14).unwrap() {
                proptest::prop_assert!((0.0..=100.0).contains(&v), "{}", v);
            }
        }

        #[test]
        fn sma_equals_brute_force_windowed_mean(
            closes in proptest::collection::vec(0.5f64..2.0, 5..80),
            period in 1usize..5,
        ) {
            let out = sma(&closes, period).unwrap();
            for (i, v) in out.iter().enumerate() {
                let window = &closes[i..i + period];
                let mean = window.iter().sum::<f64>() / period as f64;
                proptest::prop_assert!((v - mean).abs() < 1e-12);
            }
        }
    }
}
