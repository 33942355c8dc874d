//! Signal replay against a price series with slippage, producing per-trade
//! and compounded returns.
//!
//! Execution model: a signal observed at a bar's close is filled at the
//! *next* bar's open (a sentiment window ending at the close cannot be
//! traded at that close without lookahead). At most one position is open at
//! a time; an opposite-direction signal schedules an exit at the next open
//! and does not itself open the reverse position. Positions also exit after
//! `max_hold_bars` bars, or at the final bar's close when the data ends.
//! Entry and exit prices are worsened by `slippage_per_side` against the
//! trade.

use std::fmt;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PriceSeries;
use crate::signals::{Direction, SignalRow};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest config: {0}")]
    BadConfig(String),
    #[error("signal timestamp {0} not found in price series")]
    SignalNotInSeries(String),
    #[error("two signal rows share the bar {0}")]
    DuplicateSignalBar(String),
    #[error("slippage {slippage} exceeds price {price} at {time}")]
    SlippageExceedsPrice {
        slippage: f64,
        price: f64,
        time: String,
    },
    #[error("write failed")]
    Io(#[from] std::io::Error),
    #[error("report serialization failed")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktestConfig {
    /// Adverse price offset applied per side, in price units (1 pip = 0.0001
    /// on most USD pairs).
    pub slippage_per_side: f64,
    /// Forced exit after this many bars in a position.
    pub max_hold_bars: usize,
    /// Fee per side as a fraction of notional, subtracted from the return.
    pub fee_per_side: f64,
}

impl Default for BacktestConfig {
    fn default() -> BacktestConfig {
        BacktestConfig {
            slippage_per_side: 0.0,
            // One trading week of H4 bars.
            max_hold_bars: 42,
            fee_per_side: 0.0,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if !(self.slippage_per_side.is_finite() && self.slippage_per_side >= 0.0) {
            return Err(BacktestError::BadConfig(format!(
                "slippage_per_side must be >= 0, got {}",
                self.slippage_per_side
            )));
        }
        if self.max_hold_bars == 0 {
            return Err(BacktestError::BadConfig(
                "max_hold_bars must be >= 1".into(),
            ));
        }
        if !(self.fee_per_side.is_finite() && self.fee_per_side >= 0.0) {
            return Err(BacktestError::BadConfig(format!(
                "fee_per_side must be >= 0, got {}",
                self.fee_per_side
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradeDirection {
    Long,
    Short,
}

impl fmt::Display for TradeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TradeDirection::Long => "long",
            TradeDirection::Short => "short",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    OppositeSignal,
    MaxHold,
    EndOfData,
}

impl fmt::Display for ExitReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExitReason::OppositeSignal => "opposite_signal",
            ExitReason::MaxHold => "max_hold",
            ExitReason::EndOfData => "end_of_data",
        })
    }
}

/// One closed position. `entry_time`/`exit_time` carry the date of the bar
/// whose open (or, for end-of-data, close) filled the order, so the exit is
/// always strictly later than the entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub direction: TradeDirection,
    pub entry_time: DateTime<Utc>,
    pub entry_price: f64,
    pub exit_time: DateTime<Utc>,
    pub exit_price: f64,
    /// Long: (exit - entry)/entry - 2*fee. Short: (entry - exit)/entry - 2*fee.
    pub return_frac: f64,
    pub exit_reason: ExitReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub pair: String,
    pub trade_count: usize,
    /// Compounded across trades: prod(1 + r) - 1.
    pub cumulative_return_frac: f64,
    pub win_rate: f64,
    pub max_drawdown_frac: f64,
    /// Entry requests that arrived while a position was already open.
    pub ignored_entry_signals: usize,
    pub trades: Vec<Trade>,
    /// Equity after each trade exit, starting at 1.0 on the first bar.
    pub equity_curve: Vec<(DateTime<Utc>, f64)>,
}

struct OpenPosition {
    direction: TradeDirection,
    entry_index: usize,
    entry_time: DateTime<Utc>,
    entry_price: f64,
}

/// Replays signals over the series. Signal rows must carry timestamps that
/// exist in the series, at most one row per bar.
pub fn run_backtest(
    series: &PriceSeries,
    signals: &[SignalRow],
    config: &BacktestConfig,
) -> Result<BacktestReport, BacktestError> {
    config.validate()?;

    // Directional signals by bar index; every row is validated against the
    // series, directional or not.
    let mut by_bar: Vec<Option<TradeDirection>> = vec![None; series.bars.len()];
    let mut seen: Vec<bool> = vec![false; series.bars.len()];
    for row in signals {
        let index = series
            .index_of(row.timestamp)
            .ok_or_else(|| BacktestError::SignalNotInSeries(row.timestamp.to_rfc3339()))?;
        if seen[index] {
            return Err(BacktestError::DuplicateSignalBar(
                row.timestamp.to_rfc3339(),
            ));
        }
        seen[index] = true;
        by_bar[index] = match row.direction {
            Direction::Buy => Some(TradeDirection::Long),
            Direction::Sell => Some(TradeDirection::Short),
            Direction::None => None,
        };
    }

    let slip = config.slippage_per_side;
    let fee_drag = 2.0 * config.fee_per_side;
    let worsened_entry = |direction: TradeDirection, open: f64, time: DateTime<Utc>| {
        let price = match direction {
            TradeDirection::Long => open + slip,
            TradeDirection::Short => open - slip,
        };
        if price <= 0.0 {
            return Err(BacktestError::SlippageExceedsPrice {
                slippage: slip,
                price: open,
                time: time.to_rfc3339(),
            });
        }
        Ok(price)
    };
    let worsened_exit = |direction: TradeDirection, price: f64| match direction {
        TradeDirection::Long => price - slip,
        TradeDirection::Short => price + slip,
    };

    let mut trades: Vec<Trade> = Vec::new();
    let mut position: Option<OpenPosition> = None;
    let mut pending_entry: Option<TradeDirection> = None;
    let mut pending_exit = false;
    let mut ignored_entry_signals = 0usize;

    let close_trade = |pos: OpenPosition,
                       exit_time: DateTime<Utc>,
                       raw_price: f64,
                       reason: ExitReason,
                       trades: &mut Vec<Trade>| {
        let exit_price = worsened_exit(pos.direction, raw_price);
        let gross = match pos.direction {
            TradeDirection::Long => (exit_price - pos.entry_price) / pos.entry_price,
            TradeDirection::Short => (pos.entry_price - exit_price) / pos.entry_price,
        };
        trades.push(Trade {
            direction: pos.direction,
            entry_time: pos.entry_time,
            entry_price: pos.entry_price,
            exit_time,
            exit_price,
            return_frac: gross - fee_drag,
            exit_reason: reason,
        });
    };

    for (i, bar) in series.bars.iter().enumerate() {
        // Scheduled actions execute at this bar's open, exits first.
        if pending_exit {
            if let Some(pos) = position.take() {
                close_trade(
                    pos,
                    bar.date,
                    bar.open,
                    ExitReason::OppositeSignal,
                    &mut trades,
                );
            }
            pending_exit = false;
        }
        if let Some(pos) = position.as_ref() {
            if i - pos.entry_index >= config.max_hold_bars {
                let pos = position.take().expect("position checked above");
                close_trade(pos, bar.date, bar.open, ExitReason::MaxHold, &mut trades);
            }
        }
        if let Some(direction) = pending_entry.take() {
            debug_assert!(position.is_none(), "entries are only scheduled while flat");
            // A fill at the final bar would be force-closed at that same
            // bar's close; there is nothing left to trade, so drop it.
            if i + 1 < series.bars.len() {
                position = Some(OpenPosition {
                    direction,
                    entry_index: i,
                    entry_time: bar.date,
                    entry_price: worsened_entry(direction, bar.open, bar.date)?,
                });
            }
        }

        // The signal observed at this bar's close schedules next-open action.
        if let Some(direction) = by_bar[i] {
            match position.as_ref() {
                None => pending_entry = Some(direction),
                Some(pos) if pos.direction != direction => pending_exit = true,
                Some(_) => ignored_entry_signals += 1,
            }
        }
    }

    if let Some(pos) = position.take() {
        let last = series
            .bars
            .last()
            .expect("series has bars if a position opened");
        close_trade(
            pos,
            last.date,
            last.close,
            ExitReason::EndOfData,
            &mut trades,
        );
    }

    let start_time = series.bars.first().map(|b| b.date);
    let mut equity = 1.0f64;
    let mut equity_curve = Vec::with_capacity(trades.len() + 1);
    if let Some(t) = start_time {
        equity_curve.push((t, equity));
    }
    let mut wins = 0usize;
    for trade in &trades {
        equity *= 1.0 + trade.return_frac;
        equity_curve.push((trade.exit_time, equity));
        if trade.return_frac > 0.0 {
            wins += 1;
        }
    }
    let cumulative_return_frac = equity - 1.0;
    let win_rate = if trades.is_empty() {
        0.0
    } else {
        wins as f64 / trades.len() as f64
    };

    let mut peak = f64::NEG_INFINITY;
    let mut max_drawdown_frac = 0.0f64;
    for &(_, e) in &equity_curve {
        peak = peak.max(e);
        max_drawdown_frac = max_drawdown_frac.max((peak - e) / peak);
    }

    Ok(BacktestReport {
        pair: series.pair.clone(),
        trade_count: trades.len(),
        cumulative_return_frac,
        win_rate,
        max_drawdown_frac,
        ignored_entry_signals,
        trades,
        equity_curve,
    })
}

impl BacktestReport {
    /// Pretty JSON document; byte-deterministic for equal reports.
    pub fn to_json(&self) -> Result<String, BacktestError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    /// Human-readable summary with one line per trade.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("Backtest report for {}\n", self.pair));
        out.push_str(&format!("  trades:            {}\n", self.trade_count));
        out.push_str(&format!(
            "  cumulative return: {:+.4}%\n",
            self.cumulative_return_frac * 100.0
        ));
        out.push_str(&format!(
            "  win rate:          {:.2}%\n",
            self.win_rate * 100.0
        ));
        out.push_str(&format!(
            "  max drawdown:      {:.4}%\n",
            self.max_drawdown_frac * 100.0
        ));
        out.push_str(&format!(
            "  ignored entries:   {}\n",
            self.ignored_entry_signals
        ));
        if !self.trades.is_empty() {
            out.push_str("  trades:\n");
            for t in &self.trades {
                out.push_str(&format!(
                    "    {} {} -> {} entry {} exit {} return {:+.4}% ({})\n",
                    t.direction,
                    t.entry_time.format("%Y-%m-%dT%H:%M:%SZ"),
                    t.exit_time.format("%Y-%m-%dT%H:%M:%SZ"),
                    t.entry_price,
                    t.exit_price,
                    t.return_frac * 100.0,
                    t.exit_reason
                ));
            }
        }
        out
    }

    /// Equity curve as `timestamp,equity` CSV.
    pub fn equity_csv(&self) -> String {
        let mut out = String::from("timestamp,equity\n");
        for (t, e) in &self.equity_curve {
            out.push_str(&format!("{},{}\n", t.format("%Y-%m-%dT%H:%M:%SZ"), e));
        }
        out
    }

    pub fn write_equity_csv<W: Write>(&self, writer: &mut W) -> Result<(), BacktestError> {
        writer.write_all(self.equity_csv().as_bytes())?;
        Ok(())
    }
}
