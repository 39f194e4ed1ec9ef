//! Right-censored lifetime data: validation, ordering and CSV ingestion.
//!
//! A [`CensoredSample`] holds the observed pairs `(Z_i, δ_i)` with
//! `Z_i = min(T_i, C_i)` and `δ_i = I(T_i ≤ C_i)`, sorted ascending by time.
//! Ties are broken deaths-first: among equal times, observed failures precede
//! censorings. Equality is exact `f64` equality.

use std::cmp::Ordering;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("input contains no records")]
    EmptyInput,
    #[error("record {0} has a negative time")]
    NegativeTime(usize),
    #[error("record {0} has a non-finite time")]
    NonFiniteTime(usize),
    #[error("no uncensored observation present")]
    AllCensored,
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse {column} value {value:?}")]
    Parse {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// One observed lifetime: the time `Z = min(T, C)` and `event = (T ≤ C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
}

impl Observation {
    pub fn new(time: f64, event: bool) -> Self {
        Self { time, event }
    }
}

/// Ordering convention for tied observation times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Failures before censorings at equal times.
    DeathsFirst,
}

impl TieRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            TieRule::DeathsFirst => "deaths_first",
        }
    }
}

fn deaths_first(a: &Observation, b: &Observation) -> Ordering {
    a.time
        .total_cmp(&b.time)
        .then_with(|| b.event.cmp(&a.event))
}

/// Validated, ordered right-censored sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSample {
    observations: Vec<Observation>,
    tie_rule: TieRule,
}

impl CensoredSample {
    /// Builds a sample from `(time, event)` pairs.
    pub fn from_records(records: &[(f64, bool)]) -> Result<Self, SampleError> {
        Self::from_observations(records.iter().map(|&(t, e)| Observation::new(t, e)).collect())
    }

    pub fn from_observations(observations: Vec<Observation>) -> Result<Self, SampleError> {
        let sample = Self::diagnostic(observations)?;
        if !sample.observations.iter().any(|o| o.event) {
            return Err(SampleError::AllCensored);
        }
        Ok(sample)
    }

    /// Same as [`from_observations`](Self::from_observations) but skips the
    /// all-censored check. Estimators reject such samples with their own error;
    /// this path exists for descriptive diagnostics only.
    pub fn diagnostic(mut observations: Vec<Observation>) -> Result<Self, SampleError> {
        if observations.is_empty() {
            return Err(SampleError::EmptyInput);
        }
        for (i, o) in observations.iter().enumerate() {
            if !o.time.is_finite() {
                return Err(SampleError::NonFiniteTime(i));
            }
            if o.time < 0.0 {
                return Err(SampleError::NegativeTime(i));
            }
        }
        // -0.0 and 0.0 must compare as a tie under total_cmp.
        for o in observations.iter_mut() {
            if o.time == 0.0 {
                o.time = 0.0;
            }
        }
        observations.sort_by(deaths_first);
        Ok(Self {
            observations,
            tie_rule: TieRule::DeathsFirst,
        })
    }

    /// Reads a headed CSV with `time` and `event` columns. Extra columns are ignored;
    /// `event` accepts `0`/`1` or `true`/`false`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, SampleError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| SampleError::Csv(e.to_string()))?.clone();
        let col = |name: &'static str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or(SampleError::MissingColumn(name))
        };
        let time_col = col("time")?;
        let event_col = col("event")?;

        let mut observations = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| SampleError::Csv(e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let raw_time = record.get(time_col).unwrap_or("");
            let time: f64 = raw_time.parse().map_err(|_| SampleError::Parse {
                line,
                column: "time",
                value: raw_time.to_string(),
            })?;
            let raw_event = record.get(event_col).unwrap_or("");
            let event = parse_event(raw_event).ok_or_else(|| SampleError::Parse {
                line,
                column: "event",
                value: raw_event.to_string(),
            })?;
            observations.push(Observation::new(time, event));
        }
        Self::from_observations(observations)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, SampleError> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| SampleError::Csv(e.to_string()))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn tie_rule(&self) -> TieRule {
        self.tie_rule
    }

    /// Fraction of censored observations.
    pub fn censoring_rate(&self) -> f64 {
        let censored = self.observations.iter().filter(|o| !o.event).count();
        censored as f64 / self.observations.len() as f64
    }

    /// Largest observed time `Z_{n:n}`.
    pub fn last_time(&self) -> f64 {
        self.observations.last().map(|o| o.time).unwrap_or(0.0)
    }

    /// Largest uncensored time `Z_{M_n:n}`, if any.
    pub fn last_event_time(&self) -> Option<f64> {
        self.observations.iter().rev().find(|o| o.event).map(|o| o.time)
    }

    pub fn event_count(&self) -> usize {
        self.observations.iter().filter(|o| o.event).count()
    }

    /// Returns a copy with every time multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SampleError> {
        Self::from_observations(
            self.observations
                .iter()
                .map(|o| Observation::new(o.time * factor, o.event))
                .collect(),
        )
    }
}

fn parse_event(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}
