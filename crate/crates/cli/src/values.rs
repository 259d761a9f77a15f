//! Parsers for list- and range-valued flags.

use std::ops::RangeInclusive;

/// `x`, `x1,x2,...` or `start:stop:count` (inclusive linear spacing).
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl std::str::FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        let values = if let Some((start, rest)) = s.split_once(':') {
            let (stop, count) = rest
                .split_once(':')
                .ok_or_else(|| format!("expected start:stop:count, got {s:?}"))?;
            let (start, stop) = (num(start)?, num(stop)?);
            let count: usize = count.trim().parse().map_err(|_| format!("bad point count in {s:?}"))?;
            match count {
                0 => return Err(format!("{s:?} has zero points")),
                1 => vec![start],
                _ => (0..count).map(|k| start + (stop - start) * k as f64 / (count - 1) as f64).collect(),
            }
        } else {
            s.split(',').map(num).collect::<Result<_, _>>()?
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(format!("non-finite value {v}"));
        }
        Ok(NumList(values))
    }
}

/// `a..b` or `a..=b` (both inclusive) or a single count `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRange(pub RangeInclusive<usize>);

impl std::str::FromStr for CountRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let count = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not a count: {t:?}"));
        let (lo, hi) = match s.split_once("..") {
            Some((lo, hi)) => (count(lo)?, count(hi.strip_prefix('=').unwrap_or(hi))?),
            None => {
                let v = count(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        Ok(CountRange(lo..=hi))
    }
}

/// `lo..hi` with `0 < lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval(pub f64, pub f64);

impl std::str::FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}"));
        let (lo, hi) = (num(lo)?, num(hi)?);
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(format!("interval must satisfy 0 < lo < hi, got {s:?}"));
        }
        Ok(Interval(lo, hi))
    }
}
