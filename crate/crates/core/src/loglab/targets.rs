use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{normalize_query, Error, Month, Result};

use super::MonthlyVolumeTable;

/// Default minimum annual volume for a query to produce targets (about five
/// searches a month).
pub const DEFAULT_K_THRESHOLD: u64 = 60;

/// Regression target: the seasonality `V_qm` of a query in a month.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalityTarget {
    pub query: String,
    pub month: Month,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetOptions {
    pub k_threshold: u64,
    /// Fraction of retained queries kept after thresholding.
    pub sample_fraction: f64,
    pub sample_seed: u64,
}

impl Default for TargetOptions {
    fn default() -> Self {
        Self {
            k_threshold: DEFAULT_K_THRESHOLD,
            sample_fraction: 1.0,
            sample_seed: 0,
        }
    }
}

pub fn seasonality_targets(
    table: &MonthlyVolumeTable,
    k_threshold: u64,
) -> Result<Vec<SeasonalityTarget>> {
    seasonality_targets_with(
        table,
        &TargetOptions {
            k_threshold,
            ..TargetOptions::default()
        },
    )
}

/// Emits twelve targets per query whose annual volume reaches the threshold,
/// zero-traffic months included. Output is ordered by query, then month.
pub fn seasonality_targets_with(
    table: &MonthlyVolumeTable,
    opts: &TargetOptions,
) -> Result<Vec<SeasonalityTarget>> {
    if opts.k_threshold == 0 {
        return Err(Error::InvalidConfig("k_threshold must be >= 1".into()));
    }
    if !(opts.sample_fraction > 0.0 && opts.sample_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "sample_fraction must be in (0, 1], got {}",
            opts.sample_fraction
        )));
    }
    let totals = table.month_totals();
    if let Some(idx) = totals.iter().position(|&t| t == 0) {
        return Err(Error::ZeroMonthTotal(Month::from_index(idx)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.sample_seed);
    let mut out = Vec::new();
    for (query, row) in table.rows() {
        if row.iter().sum::<u64>() < opts.k_threshold {
            continue;
        }
        if opts.sample_fraction < 1.0 && rng.random::<f64>() >= opts.sample_fraction {
            continue;
        }
        let shares: Vec<f64> = row
            .iter()
            .zip(totals)
            .map(|(&t_qm, &t_m)| t_qm as f64 / t_m as f64)
            .collect();
        let denom: f64 = shares.iter().sum();
        for (idx, share) in shares.iter().enumerate() {
            out.push(SeasonalityTarget {
                query: query.to_owned(),
                month: Month::from_index(idx)?,
                value: share / denom,
            });
        }
    }
    Ok(out)
}

pub fn write_targets<W: Write>(mut w: W, targets: &[SeasonalityTarget]) -> Result<()> {
    for t in targets {
        writeln!(w, "{}\t{}\t{:.9}", t.query, t.month, t.value)?;
    }
    Ok(())
}

pub fn read_targets<R: BufRead>(r: R) -> Result<Vec<SeasonalityTarget>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(i + 1, "expected query<TAB>month<TAB>value"));
        }
        let query = normalize_query(fields[0]);
        if query.is_empty() {
            return Err(Error::parse(i + 1, "empty query"));
        }
        let month: Month = fields[1]
            .parse()
            .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad value {:?}", fields[2])))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::parse(i + 1, format!("value {value} outside [0, 1]")));
        }
        out.push(SeasonalityTarget {
            query,
            month,
            value,
        });
    }
    Ok(out)
}
