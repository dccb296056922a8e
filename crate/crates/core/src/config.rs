//! Flat `key = value` configuration files.
//!
//! ```text
//! # two servers, three messages
//! N = 2
//! M = 3
//! L = 8
//! mu = 1, 2
//! sigma2 = 4, 1
//! r_min = 1/3
//! family = gamma      # optional, one value or one per server
//! tau = 1/2, 1/2      # optional traffic ratio for the capacity report
//! ```
//!
//! Numbers are integers, decimals (`0.52`, `1e-3`) or fractions (`4/7`) and
//! are read exactly. Lists are separated by commas or whitespace and may be
//! wrapped in brackets.

use std::collections::HashMap;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::error::{Error, Result};
use crate::model::{ServerStats, SystemConfig};
use crate::sim::Family;

/// Reads an exact rational from `4/7`, `-3`, `0.52` or `2.5e-1`.
pub fn parse_rational(text: &str) -> std::result::Result<BigRational, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = t.split_once('/') {
        let n = parse_rational(num)?;
        let d = parse_rational(den)?;
        if d.is_zero() {
            return Err(format!("zero denominator in `{t}`"));
        }
        return Ok(n / d);
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = t[i + 1..]
                .parse()
                .map_err(|_| format!("bad exponent in `{t}`"))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part
            .chars()
            .chain(frac_part.chars())
            .all(|c| c.is_ascii_digit())
    {
        return Err(format!("`{t}` is not a number"));
    }
    let all: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .expect("digits only");
    let ten = BigRational::from_integer(BigInt::from(10));
    let scale = exponent - frac_part.len() as i32;
    let factor = if scale >= 0 {
        Pow::pow(&ten, scale as u32)
    } else {
        BigRational::one() / Pow::pow(&ten, (-scale) as u32)
    };
    let value = BigRational::from_integer(all) * factor;
    Ok(if negative { -value } else { value })
}

/// A parsed configuration file.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub system: SystemConfig<BigRational>,
    /// Per-server delay family; `None` picks gamma or deterministic from the variance.
    pub families: Option<Vec<Family>>,
    pub tau: Option<Vec<BigRational>>,
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn split_list(value: &str) -> Vec<&str> {
    value
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn numbers(entry: &Entry, field: &str) -> Result<Vec<BigRational>> {
    let items = split_list(&entry.value);
    if items.is_empty() {
        return Err(parse_err(entry.line, field, "empty list"));
    }
    items
        .into_iter()
        .map(|s| parse_rational(s).map_err(|m| parse_err(entry.line, field, m)))
        .collect()
}

fn integer(entry: &Entry, field: &str) -> Result<u64> {
    entry.value.trim().parse().map_err(|_| {
        parse_err(
            entry.line,
            field,
            format!("expected a positive integer, got `{}`", entry.value.trim()),
        )
    })
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<String, Entry> = HashMap::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(parse_err(line, content, "expected `key = value`"));
            };
            let key = key.trim();
            let canonical = match key {
                "N" | "num_servers" => "N",
                "M" | "num_messages" => "M",
                "L" | "message_size" => "L",
                "mu" => "mu",
                "sigma2" => "sigma2",
                "r_min" | "rmin" => "r_min",
                "family" => "family",
                "tau" => "tau",
                other => return Err(parse_err(line, other, "unknown field")),
            };
            if entries.contains_key(canonical) {
                return Err(parse_err(line, canonical, "field given twice"));
            }
            entries.insert(
                canonical.to_string(),
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        let missing = |field: &str| parse_err(last_line, field, "missing field");
        let get = |field: &str| entries.get(field).ok_or_else(|| missing(field));

        let n_entry = get("N")?;
        let n = integer(n_entry, "N")? as usize;
        let m_entry = get("M")?;
        let m = integer(m_entry, "M")? as usize;
        if !(2..=3).contains(&m) {
            return Err(parse_err(
                m_entry.line,
                "M",
                Error::UnsupportedMessages(m).to_string(),
            ));
        }
        let l_entry = get("L")?;
        let l = integer(l_entry, "L")?;
        let mu_entry = get("mu")?;
        let mu = numbers(mu_entry, "mu")?;
        let var_entry = get("sigma2")?;
        let var = numbers(var_entry, "sigma2")?;
        for (entry, field, len) in [(mu_entry, "mu", mu.len()), (var_entry, "sigma2", var.len())] {
            if len != n {
                return Err(parse_err(
                    entry.line,
                    field,
                    format!("expected {n} values, got {len}"),
                ));
            }
        }
        let r_entry = get("r_min")?;
        let r = numbers(r_entry, "r_min")?;
        if r.len() != 1 {
            return Err(parse_err(r_entry.line, "r_min", "expected a single value"));
        }
        let servers = mu
            .into_iter()
            .zip(var)
            .map(|(a, b)| {
                ServerStats::new(a, b)
                    .map_err(|e| parse_err(mu_entry.line, "mu/sigma2", e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let system = match SystemConfig::new(m, l, servers, r[0].clone()) {
            Ok(s) => s,
            Err(e @ Error::RateOutOfRange { .. }) => return Err(e),
            Err(e) => return Err(parse_err(n_entry.line, "N/M/L", e.to_string())),
        };

        let families = match entries.get("family") {
            None => None,
            Some(entry) => {
                let list = split_list(&entry.value)
                    .into_iter()
                    .map(|s| {
                        s.parse::<Family>()
                            .map_err(|e| parse_err(entry.line, "family", e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                match list.len() {
                    1 => Some(vec![list[0]; n]),
                    k if k == n => Some(list),
                    k => {
                        return Err(parse_err(
                            entry.line,
                            "family",
                            format!("expected 1 or {n} values, got {k}"),
                        ))
                    }
                }
            }
        };
        let tau = match entries.get("tau") {
            None => None,
            Some(entry) => {
                let t = numbers(entry, "tau")?;
                if t.len() != n {
                    return Err(parse_err(
                        entry.line,
                        "tau",
                        format!("expected {n} values, got {}", t.len()),
                    ));
                }
                Some(t)
            }
        };
        Ok(Self {
            system,
            families,
            tau,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
