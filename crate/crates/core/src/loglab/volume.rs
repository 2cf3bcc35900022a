use std::collections::{BTreeMap, BTreeSet};

use crate::{Error, Month, Result};

use super::LogEvent;

/// Monthly traffic per query (`t_qm`) and overall monthly traffic (`t_m`).
///
/// Month totals cover all ingested traffic, including queries that are later
/// dropped by thresholding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonthlyVolumeTable {
    cells: BTreeMap<String, [u64; 12]>,
    month_totals: [u64; 12],
    years: BTreeSet<i32>,
}

impl MonthlyVolumeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `count` to both the query cell and the month total.
    pub fn add(&mut self, query: &str, month: Month, count: u64) {
        self.cells.entry(query.to_owned()).or_insert([0; 12])[month.index()] += count;
        self.month_totals[month.index()] += count;
    }

    /// Adds traffic to the month total only (queries not tracked per cell).
    pub fn add_background(&mut self, month: Month, count: u64) {
        self.month_totals[month.index()] += count;
    }

    pub fn add_event(&mut self, ev: &LogEvent) {
        self.add(&ev.query, ev.month_key.month, ev.count);
        self.years.insert(ev.month_key.year);
    }

    pub fn mark_year(&mut self, year: i32) {
        self.years.insert(year);
    }

    pub(crate) fn add_table(&mut self, other: &MonthlyVolumeTable) {
        for (q, row) in &other.cells {
            let dst = self.cells.entry(q.clone()).or_insert([0; 12]);
            for (d, s) in dst.iter_mut().zip(row) {
                *d += s;
            }
        }
        for (d, s) in self.month_totals.iter_mut().zip(&other.month_totals) {
            *d += s;
        }
        self.years.extend(&other.years);
    }

    pub fn count(&self, query: &str, month: Month) -> u64 {
        self.cells.get(query).map_or(0, |row| row[month.index()])
    }

    pub fn row(&self, query: &str) -> Option<&[u64; 12]> {
        self.cells.get(query)
    }

    pub fn month_total(&self, month: Month) -> u64 {
        self.month_totals[month.index()]
    }

    pub fn month_totals(&self) -> &[u64; 12] {
        &self.month_totals
    }

    pub fn query_total(&self, query: &str) -> u64 {
        self.cells.get(query).map_or(0, |row| row.iter().sum())
    }

    /// Queries with their monthly counts, in lexicographic order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &[u64; 12])> {
        self.cells.iter().map(|(q, r)| (q.as_str(), r))
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.years.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = self.clone();
        out.cells
            .values_mut()
            .flat_map(|r| r.iter_mut())
            .for_each(|c| *c *= factor);
        out.month_totals.iter_mut().for_each(|c| *c *= factor);
        out
    }
}

/// Sums tables year-disjointly by calendar month.
pub fn merge_years(tables: &[MonthlyVolumeTable]) -> Result<MonthlyVolumeTable> {
    if tables.is_empty() {
        return Err(Error::Empty("table list"));
    }
    let mut seen = BTreeSet::new();
    let mut overlapping = BTreeSet::new();
    for t in tables {
        for y in &t.years {
            if !seen.insert(*y) {
                overlapping.insert(*y);
            }
        }
    }
    if !overlapping.is_empty() {
        return Err(Error::OverlappingYears(overlapping.into_iter().collect()));
    }
    let mut merged = MonthlyVolumeTable::default();
    for t in tables {
        merged.add_table(t);
    }
    Ok(merged)
}
