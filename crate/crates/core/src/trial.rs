//! Trial records and the line-oriented trial file format.
//!
//! A trial file holds one JSON object per line with the fields in the order
//! `session_id, trial_index, first_eval, second_eval, r1, r2, covariates`.
//! Real values are written with 9 significant digits. The same bytes are
//! produced by the simulator, the session store and the service export.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<u8>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "sig9_opt"
    )]
    pub response_time_ms: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "sig9_opt"
    )]
    pub difficulty: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub session_id: String,
    pub trial_index: u64,
    pub first_eval: String,
    pub second_eval: String,
    #[serde(serialize_with = "sig9")]
    pub r1: f64,
    #[serde(serialize_with = "sig9")]
    pub r2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Covariates>,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<()> {
        if self.session_id.is_empty() {
            return Err(Error::validation("session_id", "must not be empty"));
        }
        if self.first_eval.is_empty() {
            return Err(Error::validation("first_eval", "must not be empty"));
        }
        if self.second_eval.is_empty() {
            return Err(Error::validation("second_eval", "must not be empty"));
        }
        if self.first_eval == self.second_eval {
            return Err(Error::validation(
                "second_eval",
                format!("must differ from first_eval ({})", self.first_eval),
            ));
        }
        for (field, v) in [("r1", self.r1), ("r2", self.r2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(field, format!("{v} is outside [0, 1]")));
            }
        }
        if let Some(cov) = &self.covariates {
            if let Some(a) = cov.accuracy {
                if a > 1 {
                    return Err(Error::validation("covariates.accuracy", "must be 0 or 1"));
                }
            }
            if let Some(rt) = cov.response_time_ms {
                if !(rt > 0.0 && rt.is_finite()) {
                    return Err(Error::validation(
                        "covariates.response_time_ms",
                        format!("{rt} is not a positive duration"),
                    ));
                }
            }
            if let Some(d) = cov.difficulty {
                if !d.is_finite() {
                    return Err(Error::validation("covariates.difficulty", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// The record exactly as it reads back from a trial file.
    pub fn canonical(&self) -> TrialRecord {
        let mut out = self.clone();
        out.r1 = round_sig9(out.r1);
        out.r2 = round_sig9(out.r2);
        if let Some(cov) = out.covariates.as_mut() {
            cov.response_time_ms = cov.response_time_ms.map(round_sig9);
            cov.difficulty = cov.difficulty.map(round_sig9);
        }
        out
    }

    /// One line of the trial file, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trial records always serialize")
    }
}

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn sig9<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*v))
}

fn sig9_opt<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&round_sig9(*v)),
        None => s.serialize_none(),
    }
}

pub fn write_trials<W: Write>(mut out: W, trials: &[TrialRecord]) -> Result<()> {
    for t in trials {
        out.write_all(t.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn trials_to_string(trials: &[TrialRecord]) -> String {
    let mut s = String::new();
    for t in trials {
        s.push_str(&t.to_line());
        s.push('\n');
    }
    s
}

/// Reads complete lines only: a trailing fragment without a newline (a
/// write still in progress) is ignored. Blank lines are skipped.
pub fn read_trials<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    let mut reader = input;
    let mut line = String::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if !line.ends_with('\n') {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let record: TrialRecord = serde_json::from_str(text).map_err(|source| Error::Parse {
            line: line_no,
            source,
        })?;
        record.validate().map_err(|e| match e {
            Error::Validation { field, reason } => Error::Validation {
                field,
                reason: format!("{reason} (line {line_no})"),
            },
            other => other,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_trials_file(path: impl AsRef<std::path::Path>) -> Result<Vec<TrialRecord>> {
    let file = std::fs::File::open(path)?;
    read_trials(std::io::BufReader::new(file))
}
