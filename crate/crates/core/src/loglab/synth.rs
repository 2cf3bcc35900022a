//! Deterministic synthetic query logs with planted seasonality.

use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{normalize_query, Error, Month, Result};

use super::{LogEvent, MonthKey};

const NOUNS: &[&str] = &[
    "hats",
    "gloves",
    "decorations",
    "costume",
    "lights",
    "gift",
    "cards",
    "flowers",
    "candy",
    "sweater",
    "boots",
    "jacket",
    "shorts",
    "sandals",
    "grill",
    "pool",
    "backpack",
    "notebook",
    "pumpkin",
    "tree",
    "wreath",
    "basket",
    "eggs",
    "chocolate",
    "mattress",
    "pillow",
    "blanket",
    "lamp",
    "chair",
    "table",
    "shoes",
    "socks",
    "scarf",
    "mug",
    "speaker",
    "headphones",
    "charger",
    "towel",
    "rug",
    "curtains",
    "plates",
    "tent",
    "cooler",
    "umbrella",
    "bike",
    "toys",
    "games",
    "books",
    "candles",
    "frame",
];

const MODIFIERS: &[&str] = &[
    "red", "blue", "black", "white", "kids", "mens", "womens", "large", "small", "cheap",
    "outdoor", "indoor", "wooden", "cotton", "leather", "plastic", "led", "mini", "wireless",
    "organic", "vintage", "portable",
];

/// Share of a seasonal query's annual traffic kept inside the three months
/// around its peak, before noise.
const PEAK_WINDOW_SHARE: f64 = 0.8;
const MIN_WINDOW_SHARE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_queries: usize,
    pub seasonal_fraction: f64,
    /// Seasonal token → peak month.
    pub seasonal_tokens: BTreeMap<String, u8>,
    /// Relative multiplicative jitter applied to each monthly weight.
    pub noise: f64,
    pub seed: u64,
    pub start_year: i32,
    pub years: u32,
    pub min_volume: u64,
    pub max_volume: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let seasonal_tokens = [
            ("winter", 1),
            ("valentines", 2),
            ("spring", 3),
            ("easter", 4),
            ("memorial", 5),
            ("fathers", 6),
            ("summer", 7),
            ("school", 8),
            ("labor", 9),
            ("halloween", 10),
            ("thanksgiving", 11),
            ("christmas", 12),
        ]
        .into_iter()
        .map(|(t, m)| (t.to_owned(), m))
        .collect();
        Self {
            n_queries: 1000,
            seasonal_fraction: 0.5,
            seasonal_tokens,
            noise: 0.2,
            seed: 7,
            start_year: 2022,
            years: 1,
            min_volume: 80,
            max_volume: 5000,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_queries == 0 {
            return bad("n_queries must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.seasonal_fraction) {
            return bad(format!(
                "seasonal_fraction {} outside [0, 1]",
                self.seasonal_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        if self.seasonal_fraction > 0.0 && self.seasonal_tokens.is_empty() {
            return bad("seasonal_fraction > 0 needs at least one seasonal token".into());
        }
        for (tok, m) in &self.seasonal_tokens {
            Month::new(*m)?;
            if normalize_query(tok) != *tok || tok.contains(' ') {
                return bad(format!(
                    "seasonal token {tok:?} must be one normalized word"
                ));
            }
        }
        if self.min_volume == 0 || self.max_volume < self.min_volume {
            return bad("need 1 <= min_volume <= max_volume".into());
        }
        if self.years == 0 {
            return bad("years must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthQuery {
    pub text: String,
    /// Planted peak month, `None` for non-seasonal queries.
    pub peak: Option<Month>,
    pub annual_volume: u64,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub queries: Vec<SynthQuery>,
    pub events: Vec<LogEvent>,
}

impl SynthCorpus {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&ev.to_line());
            out.push('\n');
        }
        out
    }

    pub fn events_for_year(&self, year: i32) -> impl Iterator<Item = &LogEvent> {
        self.events.iter().filter(move |e| e.month_key.year == year)
    }
}

/// Event stream for `spec` in the TSV log format.
pub fn synth_logs(spec: &SynthSpec) -> Result<String> {
    Ok(synth_corpus(spec)?.to_tsv())
}

pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tokens: Vec<(&str, Month)> = spec
        .seasonal_tokens
        .iter()
        .map(|(t, m)| (t.as_str(), Month::new(*m).unwrap()))
        .collect();
    let reserved: HashSet<&str> = tokens.iter().map(|(t, _)| *t).collect();
    let nouns: Vec<&str> = NOUNS
        .iter()
        .copied()
        .filter(|w| !reserved.contains(w))
        .collect();
    let mods: Vec<&str> = MODIFIERS
        .iter()
        .copied()
        .filter(|w| !reserved.contains(w))
        .collect();

    let n_seasonal = (spec.n_queries as f64 * spec.seasonal_fraction).round() as usize;
    let mut seen = HashSet::new();
    let mut queries = Vec::with_capacity(spec.n_queries);
    // Consecutive duplicate draws before the vocabulary counts as exhausted.
    const MAX_MISSES: usize = 10_000;
    let mut misses = 0;
    while queries.len() < spec.n_queries {
        if misses > MAX_MISSES {
            return Err(Error::InvalidConfig(format!(
                "could only generate {} distinct queries out of {}",
                queries.len(),
                spec.n_queries
            )));
        }
        let i = queries.len();
        let (text, peak) = if i < n_seasonal {
            let (tok, month) = tokens[i % tokens.len()];
            let noun = nouns.choose(&mut rng).unwrap();
            let text = if rng.random_bool(0.5) {
                format!("{tok} {noun}")
            } else {
                format!("{} {tok} {noun}", mods.choose(&mut rng).unwrap())
            };
            (text, Some(month))
        } else {
            let noun = nouns.choose(&mut rng).unwrap();
            let text = match rng.random_range(0..3) {
                0 => noun.to_string(),
                1 => format!("{} {noun}", mods.choose(&mut rng).unwrap()),
                _ => {
                    let a = mods.choose(&mut rng).unwrap();
                    let b = mods.choose(&mut rng).unwrap();
                    format!("{a} {b} {noun}")
                }
            };
            (text, None)
        };
        if !seen.insert(text.clone()) {
            misses += 1;
            continue;
        }
        misses = 0;
        let (lo, hi) = ((spec.min_volume as f64).ln(), (spec.max_volume as f64).ln());
        let annual_volume = (lo + rng.random::<f64>() * (hi - lo)).exp().round() as u64;
        queries.push(SynthQuery {
            text,
            peak,
            annual_volume: annual_volume.max(spec.min_volume),
        });
    }

    let mut events = Vec::new();
    for y in 0..spec.years {
        let year = spec.start_year + y as i32;
        let mut counts: Vec<[u64; 12]> = Vec::with_capacity(queries.len());
        for q in &queries {
            let weights = monthly_weights(q.peak, spec.noise, &mut rng);
            counts.push(weights.map(|w| (w * q.annual_volume as f64).round() as u64));
        }
        for month in Month::all() {
            for (q, row) in queries.iter().zip(&counts) {
                let c = row[month.index()];
                if c > 0 {
                    events.push(LogEvent {
                        query: q.text.clone(),
                        month_key: MonthKey { year, month },
                        count: c,
                    });
                }
            }
        }
    }
    Ok(SynthCorpus { queries, events })
}

fn monthly_weights(peak: Option<Month>, noise: f64, rng: &mut impl Rng) -> [f64; 12] {
    let mut w = [1.0 / 12.0; 12];
    if let Some(p) = peak {
        let off = (1.0 - PEAK_WINDOW_SHARE) / 9.0;
        w = [off; 12];
        w[p.index()] = 0.5;
        w[p.offset(-1).index()] = (PEAK_WINDOW_SHARE - 0.5) / 2.0;
        w[p.offset(1).index()] = (PEAK_WINDOW_SHARE - 0.5) / 2.0;
    }
    for x in w.iter_mut() {
        *x *= 1.0 + noise * rng.random_range(-1.0..1.0);
    }
    if let Some(p) = peak {
        let window: Vec<usize> = [-1, 0, 1].iter().map(|d| p.offset(*d).index()).collect();
        let inside: f64 = window.iter().map(|i| w[*i]).sum();
        let total: f64 = w.iter().sum();
        if inside / total < MIN_WINDOW_SHARE {
            // Shrink off-season weights until the window holds MIN_WINDOW_SHARE.
            let outside = total - inside;
            let scale = inside * (1.0 - MIN_WINDOW_SHARE) / (MIN_WINDOW_SHARE * outside);
            for (i, x) in w.iter_mut().enumerate() {
                if !window.contains(&i) {
                    *x *= scale;
                }
            }
        }
    }
    let total: f64 = w.iter().sum();
    w.map(|x| x / total)
}
