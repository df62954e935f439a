use super::TimeSeriesRecord;
use crate::error::{Error, Result};

/// Peak deviation following one load change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventDeviation {
    /// Time of the first record carrying the new load.
    pub time: f64,
    /// Largest `|v_out - v_ref|` in volts until the next load change or the end.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Mean `|v_ref - v_out| / |v_ref|` over the final 10% of the horizon.
    pub steady_state_error: f64,
    /// First time after the last load change from which the output stays
    /// inside the band until the end; `None` when it never settles.
    pub settling_time: Option<f64>,
    /// Largest `|v_out - v_ref|` over the whole run.
    pub max_deviation: f64,
    pub events: Vec<EventDeviation>,
    pub mode_switches: usize,
}

impl Metrics {
    pub fn settled(&self) -> bool {
        self.settling_time.is_some()
    }
}

fn in_band(r: &TimeSeriesRecord, band: f64) -> bool {
    (r.v_out - r.v_ref).abs() <= band * r.v_ref.abs()
}

/// Summarizes a closed-loop run. Load changes are detected from the `r` column.
pub fn metrics(series: &[TimeSeriesRecord], band: f64) -> Result<Metrics> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::invalid("metrics need a non-empty series")),
    };
    if !(band > 0.0 && band < 1.0) {
        return Err(Error::invalid(format!("band {band} outside (0, 1)")));
    }

    let tail_start = first.t + 0.9 * (last.t - first.t);
    let tail: Vec<f64> = series
        .iter()
        .filter(|r| r.t >= tail_start)
        .map(|r| (r.v_ref - r.v_out).abs() / r.v_ref.abs())
        .collect();
    let steady_state_error = tail.iter().sum::<f64>() / tail.len() as f64;

    let changes: Vec<usize> = series
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].r != w[0].r)
        .map(|(i, _)| i + 1)
        .collect();

    let deviation = |rows: &[TimeSeriesRecord]| {
        rows.iter()
            .map(|r| (r.v_out - r.v_ref).abs())
            .fold(0.0, f64::max)
    };
    let events = changes
        .iter()
        .enumerate()
        .map(|(n, &start)| {
            let end = changes.get(n + 1).copied().unwrap_or(series.len());
            EventDeviation {
                time: series[start].t,
                max_deviation: deviation(&series[start..end]),
            }
        })
        .collect();

    let from = changes.last().copied().unwrap_or(0);
    let settling_time = match series[from..].iter().rposition(|r| !in_band(r, band)) {
        None => Some(series[from].t),
        Some(i) => series.get(from + i + 1).map(|r| r.t),
    };

    let mode_switches = series.windows(2).filter(|w| w[0].mode != w[1].mode).count();

    Ok(Metrics {
        steady_state_error,
        settling_time,
        max_deviation: deviation(series),
        events,
        mode_switches,
    })
}
