use std::fmt::Write as _;

use crate::error::{domain, Error, Result};

/// One point of a smoothed learning curve. `episode` is the 0-based index of
/// the last episode in the averaging window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub smoothed: f64,
    pub normalized: f64,
}

/// Trailing moving average over `window` episodes, then min-max normalized
/// to `[0, 1]` over the smoothed series. Only full windows are emitted, so
/// the output has `raw.len() - window + 1` points. A constant smoothed
/// series normalizes to all zeros.
pub fn postprocess_curve(raw: &[f64], window: usize) -> Result<Vec<CurvePoint>> {
    if window == 0 {
        return Err(domain("moving-average window must be >= 1"));
    }
    if raw.len() < window {
        return Err(domain(format!(
            "series has {} episodes, shorter than the window of {window}",
            raw.len()
        )));
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(domain(format!("episode {i} has non-finite reward {}", raw[i])));
    }

    let mut prefix = Vec::with_capacity(raw.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in raw {
        acc += v;
        prefix.push(acc);
    }
    let w = window as f64;
    let smoothed: Vec<f64> = (window..=raw.len()).map(|end| (prefix[end] - prefix[end - window]) / w).collect();

    let lo = smoothed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = smoothed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    Ok(smoothed
        .into_iter()
        .enumerate()
        .map(|(k, s)| CurvePoint {
            episode: k + window - 1,
            smoothed: s,
            normalized: if range > 0.0 { ((s - lo) / range).clamp(0.0, 1.0) } else { 0.0 },
        })
        .collect())
}

/// CSV with header `episode,reward_sum`, 0-based episodes.
pub fn raw_curve_csv(raw: &[f64]) -> String {
    let mut out = String::with_capacity(raw.len() * 24 + 20);
    out.push_str("episode,reward_sum\n");
    for (i, v) in raw.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

/// Parses [`raw_curve_csv`] output. Episodes must run 0, 1, 2, ...
pub fn parse_raw_curve(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("episode,reward_sum") => {}
        other => return Err(Error::Parse(format!("expected header episode,reward_sum, got {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Parse(format!("bad curve row {line:?}"));
            let (ep, v) = line.split_once(',').ok_or_else(bad)?;
            if ep.trim().parse::<usize>().map_err(|_| bad())? != i {
                return Err(Error::Parse(format!("curve row {line:?} out of order, expected episode {i}")));
            }
            v.trim().parse::<f64>().map_err(|_| bad())
        })
        .collect()
}

/// CSV with header `episode,smoothed,normalized`.
pub fn smoothed_curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::with_capacity(points.len() * 48 + 32);
    out.push_str("episode,smoothed,normalized\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.episode, p.smoothed, p.normalized);
    }
    out
}
