//! Parsers for the textual sweep parameters shared by flags and config files.

use std::collections::BTreeMap;
use std::str::FromStr;

use binoisy::ConstellationKind;

use crate::error::SpecError;

/// Largest number of points a single range may expand to.
pub const MAX_RANGE_POINTS: usize = 10_000;

/// Keys accepted in config files; each mirrors the flag of the same name.
pub const CONFIG_KEYS: [&str; 16] = [
    "mode",
    "constellation",
    "snr",
    "evm",
    "m",
    "n",
    "seed",
    "loss",
    "decoder",
    "channels",
    "noise-draws",
    "output",
    "format",
    "nats",
    "allow-partial",
    "timing",
];

fn number(key: &'static str, text: &str) -> Result<f64, SpecError> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    if lower.contains("nan") {
        return Err(SpecError::value(key, format!("`{t}` is not a number")));
    }
    f64::from_str(t).map_err(|_| SpecError::value(key, format!("`{t}` is not a number")))
}

/// `start:stop:step` (inclusive of `stop`), `start:stop` with unit step, or a
/// single value.
fn range(key: &'static str, text: &str) -> Result<Vec<f64>, SpecError> {
    let parts: Vec<&str> = text.split(':').collect();
    let (start, stop, step) = match parts.as_slice() {
        [v] => return Ok(vec![number(key, v)?]),
        [a, b] => (number(key, a)?, number(key, b)?, 1.0),
        [a, b, s] => (number(key, a)?, number(key, b)?, number(key, s)?),
        _ => return Err(SpecError::value(key, format!("`{text}` is not start:stop[:step]"))),
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(SpecError::value(key, "range bounds and step must be finite"));
    }
    if !(step > 0.0) {
        return Err(SpecError::value(key, format!("step must be positive, got {step}")));
    }
    if stop < start {
        return Err(SpecError::value(key, format!("empty range {start}:{stop}")));
    }
    // Tolerate rounding in (stop − start)/step so that 0:30:0.1 ends at 30.
    let count = ((stop - start) / step + 1e-9).floor() + 1.0;
    if count > MAX_RANGE_POINTS as f64 {
        return Err(SpecError::value(key, format!("range has more than {MAX_RANGE_POINTS} points")));
    }
    Ok((0..count as usize).map(|k| start + k as f64 * step).collect())
}

/// SNR grid in dB: `start:stop:step`, `start:stop` or a single value.
pub fn parse_snr_range(text: &str) -> Result<Vec<f64>, SpecError> {
    let values = range("snr", text.trim())?;
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(SpecError::value("snr", format!("SNR must be finite, got {v}")));
    }
    Ok(values)
}

/// Comma-separated EVM values in dB; each item is a number, `-inf` (ideal
/// hardware) or a `start:stop:step` range.
pub fn parse_evm_list(text: &str) -> Result<Vec<f64>, SpecError> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(SpecError::value("evm", "empty list item"));
        }
        let values = if item.contains(':') { range("evm", item)? } else { vec![number("evm", item)?] };
        for v in values {
            if v == f64::INFINITY {
                return Err(SpecError::value("evm", "EVM of +inf dB is not meaningful"));
            }
            out.push(v);
            if out.len() > MAX_RANGE_POINTS {
                return Err(SpecError::value("evm", format!("more than {MAX_RANGE_POINTS} values")));
            }
        }
    }
    Ok(out)
}

/// One constellation name (`qpsk`, `16-QAM`, `gaussian`, ...). Custom
/// alphabets have no textual form and are rejected.
pub fn parse_constellation(text: &str) -> Result<ConstellationKind, SpecError> {
    let kind = ConstellationKind::from_str(text).map_err(|e| SpecError::value("constellation", e.to_string()))?;
    if kind == ConstellationKind::Custom {
        return Err(SpecError::value("constellation", "custom alphabets are only available through the library"));
    }
    Ok(kind)
}

/// Comma-separated constellation names, in the given order.
pub fn parse_constellation_list(text: &str) -> Result<Vec<ConstellationKind>, SpecError> {
    text.split(',').map(parse_constellation).collect()
}

pub fn parse_bool(key: &'static str, text: &str) -> Result<bool, SpecError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(SpecError::value(key, format!("`{other}` is not a boolean"))),
    }
}

/// Flat `key = value` settings read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses config text: one `key = value` per line, `#` starts a comment,
/// keys are the long flag names (case-insensitive, `_` or `-`).
pub fn parse_config(text: &str) -> Result<ConfigFile, SpecError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(SpecError::Config { line, reason: format!("expected key = value, got `{content}`") });
        };
        let key = key.trim().to_ascii_lowercase().replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(SpecError::Config { line, reason: format!("unknown key `{key}`") });
        }
        let value = value.trim();
        if value.is_empty() {
            return Err(SpecError::Config { line, reason: format!("`{key}` has no value") });
        }
        if entries.insert(key.clone(), value.to_string()).is_some() {
            return Err(SpecError::Config { line, reason: format!("`{key}` given twice") });
        }
    }
    Ok(ConfigFile { entries })
}
