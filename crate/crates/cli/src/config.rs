//! Experiment configuration: one JSON object whose values are decimal strings, overridden
//! by command-line flags of the same names.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use binq4_core::forms::{BinaryForm, QuaternaryForm};
use binq4_core::svariety::level_for;

use crate::parse::{parse_binary, parse_gram2, parse_gram2_json};
use crate::CliError;

/// Recognized keys with their help text.
pub const KEYS: &[(&str, &str)] = &[
    ("q", "binary form as \"a,b,c\""),
    ("gram2", "doubled Gram matrix of Q as four comma-separated rows joined by ';'"),
    ("gram2_file", "JSON file holding the 4x4 doubled Gram matrix"),
    ("p", "odd prime for X(n), S(n) and fibers; neighbor prime for genus"),
    ("n", "level, or \"auto\" for the delta rule"),
    ("p1", "first splitting prime for thm13"),
    ("p2", "second splitting prime for thm13"),
    ("neighbor_prime", "prime for the neighbor closure in thm13 (default: least odd prime not dividing det2)"),
    ("delta", "delta of the level rule and the X(n) target ratio"),
    ("epsilon", "epsilon of the X(n) target ratio"),
    ("short_delta", "fibers with B2 <= D^short_delta are bucketed as short"),
    ("removal_threshold", "fibers with nu >= removal_threshold are tagged removed"),
    ("node_budget", "node budget of the S(n) walker"),
    ("brute_budget", "evaluation budget of the brute-force curve counter"),
    ("class_budget", "maximum number of classes in a neighbor closure"),
    ("max_four_d", "thm13 family scan bound on fourD (omit to skip the scan)"),
    ("curve", "polynomial in x and y, e.g. \"x^2 - 2*y^2 - 1\""),
    ("bx", "box bound on |x|"),
    ("by", "box bound on |y|"),
    ("ell", "auxiliary prime of the determinant method, or \"auto\""),
    ("method", "curve counter: detmethod, bruteforce or both"),
    ("degree_cap", "cap on the auxiliary degree of the determinant method"),
    ("fiber_curves", "true to count the fiber curve at z2 = z3 = z4 = 0 for each fiber"),
    ("list", "true to include full point or representation lists"),
    ("format", "json or tsv (tsv only for sn)"),
    ("out", "output file (default: standard output)"),
    ("seed", "random seed for the suite"),
    ("scale", "suite size: full or quick"),
];

/// Merged configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl Config {
    /// Parse a JSON document; every value must be a string.
    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        let obj = v.as_object().ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
        let mut values = BTreeMap::new();
        for (k, v) in obj {
            if !known(k) {
                return Err(CliError::Config(format!("unknown config key \"{k}\"")));
            }
            let s = v.as_str().ok_or_else(|| CliError::Config(format!("config key \"{k}\" must be a string")))?;
            values.insert(k.clone(), s.to_string());
        }
        Ok(Config { values })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown config key \"{key}\"")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s.trim().parse().map(Some).map_err(|_| CliError::Config(format!("invalid value \"{s}\" for {key}"))),
        }
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.parsed(key)
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.parsed(key)?.ok_or_else(|| CliError::Config(format!("missing required key {key}")))
    }

    /// Positive integer value.
    pub fn positive(&self, key: &str, default: u64) -> Result<u64, CliError> {
        let v = self.or(key, default)?;
        if v == 0 {
            return Err(CliError::Config(format!("{key} must be positive")));
        }
        Ok(v)
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(s) => Err(CliError::Config(format!("invalid value \"{s}\" for {key}: expected true or false"))),
        }
    }

    pub fn binary_form(&self) -> Result<BinaryForm, CliError> {
        parse_binary(self.get("q").ok_or_else(|| CliError::Config("missing required key q".into()))?)
    }

    /// `gram2`, then `gram2_file`, else the sum of four squares.
    pub fn quaternary_form(&self) -> Result<QuaternaryForm, CliError> {
        match (self.get("gram2"), self.get("gram2_file")) {
            (Some(_), Some(_)) => Err(CliError::Config("give only one of gram2 and gram2_file".into())),
            (Some(s), None) => parse_gram2(s),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
                parse_gram2_json(&text)
            }
            (None, None) => Ok(QuaternaryForm::sum_of_four_squares()),
        }
    }

    pub fn delta(&self) -> Result<f64, CliError> {
        self.fraction("delta", 0.1)
    }

    pub fn fraction(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v: f64 = self.or(key, default)?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Config(format!("{key} must be a nonnegative number")));
        }
        Ok(v)
    }

    /// Explicit level or the delta rule on `fourD`.
    pub fn level(&self, four_d: i64, p: u64) -> Result<u32, CliError> {
        match self.get("n") {
            None | Some("auto") => Ok(level_for(four_d, p, self.delta()?)),
            Some(_) => {
                let n: u32 = self.required("n")?;
                if n == 0 {
                    return Err(CliError::Config("n must be positive".into()));
                }
                Ok(n)
            }
        }
    }
}
