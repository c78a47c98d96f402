//! Text formats for binary forms, doubled Gram matrices and planar curves.

use binq4_core::exactmath::{BiPoly, IntMatrix};
use binq4_core::forms::{BinaryForm, QuaternaryForm};
use num_bigint::BigInt;

use crate::CliError;

fn ints(s: &str, what: &str) -> Result<Vec<i64>, CliError> {
    s.split(',').map(|t| t.trim().parse::<i64>().map_err(|_| CliError::Config(format!("invalid integer \"{}\" in {what}", t.trim())))).collect()
}

/// `"a,b,c"`.
pub fn parse_binary(s: &str) -> Result<BinaryForm, CliError> {
    let v = ints(s, "q")?;
    if v.len() != 3 {
        return Err(CliError::Config(format!("q needs three coefficients, got {}", v.len())));
    }
    BinaryForm::new(v[0], v[1], v[2]).map_err(|e| CliError::Config(format!("q: {e}")))
}

fn gram_from_rows(rows: Vec<Vec<i64>>) -> Result<QuaternaryForm, CliError> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(CliError::Config("gram2 must be 4x4".into()));
    }
    QuaternaryForm::from_gram2(&IntMatrix::from_rows(&rows)).map_err(|e| CliError::Config(format!("gram2: {e}")))
}

/// Four comma-separated rows joined by `;`.
pub fn parse_gram2(s: &str) -> Result<QuaternaryForm, CliError> {
    gram_from_rows(s.split(';').map(|r| ints(r, "gram2")).collect::<Result<_, _>>()?)
}

/// A JSON 4x4 array whose entries are integers or decimal strings.
pub fn parse_gram2_json(text: &str) -> Result<QuaternaryForm, CliError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("gram2_file is not valid JSON: {e}")))?;
    let bad = || CliError::Config("gram2_file must hold a 4x4 array of integers".into());
    let rows = v.as_array().ok_or_else(bad)?;
    let rows: Vec<Vec<i64>> = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|e| match e {
                    serde_json::Value::String(s) => s.trim().parse().map_err(|_| bad()),
                    other => other.as_i64().ok_or_else(bad),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    gram_from_rows(rows)
}

/// A polynomial in `x` and `y` with integer coefficients: a sum of terms such as
/// `-3*x^2*y`, `x y^4` or `7`.
pub fn parse_curve(s: &str) -> Result<BiPoly, CliError> {
    let err = |m: String| CliError::Config(format!("curve: {m}"));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(err("empty polynomial".into()));
    }
    let mut terms: Vec<(usize, usize, BigInt)> = Vec::new();
    let mut rest = compact.as_str();
    while !rest.is_empty() {
        let mut sign = 1;
        if let Some(r) = rest.strip_prefix('+') {
            rest = r;
        } else if let Some(r) = rest.strip_prefix('-') {
            sign = -1;
            rest = r;
        }
        let end = rest.find(['+', '-']).unwrap_or(rest.len());
        let term = &rest[..end];
        rest = &rest[end..];
        if term.is_empty() {
            return Err(err("empty term".into()));
        }
        let (mut coeff, mut i, mut j) = (BigInt::from(sign), 0usize, 0usize);
        for factor in term.split('*') {
            let (base, exp) = match factor.split_once('^') {
                Some((b, e)) => (b, e.parse::<usize>().map_err(|_| err(format!("invalid exponent in \"{factor}\"")))?),
                None => (factor, 1),
            };
            match base {
                "x" => i += exp,
                "y" => j += exp,
                _ => {
                    let c: BigInt = base.parse().map_err(|_| err(format!("invalid factor \"{factor}\"")))?;
                    coeff *= num_traits::pow(c, exp);
                }
            }
        }
        terms.push((i, j, coeff));
    }
    Ok(BiPoly::from_terms(&terms))
}

/// Canonical text of a curve polynomial, highest total degree first.
pub fn format_curve(f: &BiPoly) -> String {
    let mut terms: Vec<(usize, usize, BigInt)> = f.terms().map(|(i, j, c)| (i, j, c.clone())).collect();
    if terms.is_empty() {
        return "0".into();
    }
    terms.sort_by(|a, b| (b.0 + b.1, b.0).cmp(&(a.0 + a.1, a.0)));
    let mut out = String::new();
    for (k, (i, j, c)) in terms.iter().enumerate() {
        let neg = c < &BigInt::from(0);
        let mag = if neg { -c } else { c.clone() };
        out.push_str(match (k, neg) {
            (0, true) => "-",
            (0, false) => "",
            (_, true) => " - ",
            (_, false) => " + ",
        });
        let mut factors = Vec::new();
        if mag != BigInt::from(1) || (*i == 0 && *j == 0) {
            factors.push(mag.to_string());
        }
        for (var, e) in [("x", *i), ("y", *j)] {
            match e {
                0 => {}
                1 => factors.push(var.to_string()),
                _ => factors.push(format!("{var}^{e}")),
            }
        }
        out.push_str(&factors.join("*"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_and_gram() {
        let q = parse_binary("1, 0, 1").unwrap();
        assert_eq!(q.four_d(), 4);
        assert!(parse_binary("1,0").is_err());
        assert!(parse_binary("1,5,1").is_err());
        let id = parse_gram2("2,0,0,0;0,2,0,0;0,0,2,0;0,0,0,2").unwrap();
        assert_eq!(id, QuaternaryForm::sum_of_four_squares());
        assert!(parse_gram2("1,0,0,0;0,2,0,0;0,0,2,0;0,0,0,2").is_err());
        assert!(parse_gram2("2,0,0;0,2,0").is_err());
        let j = parse_gram2_json(r#"[["2","0","0","0"],[0,2,0,0],[0,0,2,0],[0,0,0,18]]"#).unwrap();
        assert_eq!(j, QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap());
        assert!(parse_gram2_json("[1]").is_err());
    }

    #[test]
    fn curves() {
        let f = parse_curve("x^2 - 2*y^2 - 1").unwrap();
        assert_eq!(f, BiPoly::from_terms(&[(2, 0, 1), (0, 2, -2), (0, 0, -1)]));
        assert_eq!(format_curve(&f), "x^2 - 2*y^2 - 1");
        assert_eq!(parse_curve("-3*x^2*y + 4*2").unwrap(), BiPoly::from_terms(&[(2, 1, -3), (0, 0, 8)]));
        assert_eq!(parse_curve("x*x*y").unwrap(), BiPoly::from_terms(&[(2, 1, 1)]));
        assert!(parse_curve("x + z").is_err());
        assert!(parse_curve("x +- y").is_err());
        assert!(parse_curve("").is_err());
        assert_eq!(format_curve(&BiPoly::zero()), "0");
    }

    proptest! {
        #[test]
        fn format_parse_roundtrip(terms in proptest::collection::vec((0usize..4, 0usize..4, -50i64..=50), 0..6)) {
            let f = BiPoly::from_terms(&terms);
            prop_assert_eq!(parse_curve(&format_curve(&f)).unwrap(), f);
        }
    }
}
