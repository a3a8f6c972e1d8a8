//! JSON system descriptors.
//!
//! ```json
//! {"type": "cfs", "fixed_points": [0, 1], "ratios": [["1/2", "1/4"], ["1/3"]],
//!  "probabilities": "uniform", "mode": "rational"}
//! {"type": "four_corner", "gamma": [[0.8, 0.1], [0.1, 0.8]],
//!  "lambda": [[0.45, 0.09], [0.09, 0.45]], "probabilities": "natural"}
//! ```
//!
//! Numbers may be JSON numbers, decimal strings or `"num/den"` strings. In
//! rational mode every value is read exactly from its decimal text.

use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{CfsError, Result};
use crate::fourcorner::FourCornerSystem;
use crate::symbolic::Word;
use crate::system::{rat_to_f64, CfsSystem, NumberMode, ProbVector, Rational};

/// A probability specification before it is resolved against a system.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbChoice {
    Uniform,
    /// Only meaningful for four-corner systems.
    Natural,
    Explicit(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Descriptor {
    Cfs {
        system: CfsSystem,
        probabilities: Option<ProbChoice>,
    },
    FourCorner {
        system: FourCornerSystem,
        probabilities: Option<ProbChoice>,
    },
}

/// Exact value of `"a/b"`, a decimal such as `"-0.125"` or `"3e-2"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || CfsError::Parse(format!("not a number: {text:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(CfsError::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int}{frac}");
    let mut value = Rational::from_integer(BigInt::from_str(if all.is_empty() { "0" } else { &all }).map_err(|_| bad())?);
    let shift = exp - frac.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    let mut scale = Rational::one();
    for _ in 0..shift.unsigned_abs() {
        scale *= &ten;
    }
    if shift >= 0 {
        value *= scale;
    } else {
        value /= scale;
    }
    Ok(if neg { -value } else { value })
}

pub fn parse_float(text: &str) -> Result<f64> {
    if text.contains('/') {
        return Ok(rat_to_f64(&parse_rational(text)?));
    }
    text.trim()
        .parse::<f64>()
        .map_err(|_| CfsError::Parse(format!("not a number: {text:?}")))
}

fn number_text(v: &Value, what: &str) -> Result<String> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        other => Err(CfsError::Parse(format!("{what}: expected a number, got {other}"))),
    }
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| CfsError::Parse(format!("missing field {key:?}")))
}

fn list<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| CfsError::Parse(format!("{what}: expected an array")))
}

fn texts(v: &Value, what: &str) -> Result<Vec<String>> {
    list(v, what)?.iter().map(|x| number_text(x, what)).collect()
}

fn nested_texts(v: &Value, what: &str) -> Result<Vec<Vec<String>>> {
    list(v, what)?.iter().map(|row| texts(row, what)).collect()
}

fn prob_spec(v: Option<&Value>) -> Result<Option<ProbChoice>> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s == "uniform" => Ok(Some(ProbChoice::Uniform)),
        Some(Value::String(s)) if s == "natural" => Ok(Some(ProbChoice::Natural)),
        Some(Value::String(s)) => Err(CfsError::Parse(format!("unknown probabilities {s:?}"))),
        Some(v @ Value::Array(items)) => {
            if items.iter().all(|x| x.is_array()) {
                Ok(Some(ProbChoice::Explicit(nested_texts(v, "probabilities")?)))
            } else {
                Ok(Some(ProbChoice::Explicit(vec![texts(v, "probabilities")?])))
            }
        }
        Some(other) => Err(CfsError::Parse(format!("probabilities: unexpected {other}"))),
    }
}

fn matrix2(v: &Value, what: &str) -> Result<[[f64; 2]; 2]> {
    let rows = nested_texts(v, what)?;
    if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
        return Err(CfsError::Parse(format!("{what}: expected a 2x2 array")));
    }
    Ok([
        [parse_float(&rows[0][0])?, parse_float(&rows[0][1])?],
        [parse_float(&rows[1][0])?, parse_float(&rows[1][1])?],
    ])
}

pub fn parse_descriptor(text: &str) -> Result<Descriptor> {
    let v: Value = serde_json::from_str(text)?;
    let kind = field(&v, "type")?
        .as_str()
        .ok_or_else(|| CfsError::Parse("\"type\" must be a string".into()))?;
    match kind {
        "cfs" => {
            let mode: NumberMode = match v.get("mode") {
                None | Some(Value::Null) => NumberMode::Float,
                Some(m) => serde_json::from_value(m.clone())
                    .map_err(|_| CfsError::Parse(format!("mode must be \"float\" or \"rational\", got {m}")))?,
            };
            let t = texts(field(&v, "fixed_points")?, "fixed_points")?;
            let r = nested_texts(field(&v, "ratios")?, "ratios")?;
            let system = match mode {
                NumberMode::Float => CfsSystem::new(
                    t.iter().map(|x| parse_float(x)).collect::<Result<_>>()?,
                    r.iter()
                        .map(|g| g.iter().map(|x| parse_float(x)).collect())
                        .collect::<Result<_>>()?,
                )?,
                NumberMode::Rational => CfsSystem::new_rational(
                    t.iter().map(|x| parse_rational(x)).collect::<Result<_>>()?,
                    r.iter()
                        .map(|g| g.iter().map(|x| parse_rational(x)).collect())
                        .collect::<Result<_>>()?,
                )?,
            };
            Ok(Descriptor::Cfs {
                system,
                probabilities: prob_spec(v.get("probabilities"))?,
            })
        }
        "four_corner" => Ok(Descriptor::FourCorner {
            system: FourCornerSystem::new(matrix2(field(&v, "gamma")?, "gamma")?, matrix2(field(&v, "lambda")?, "lambda")?),
            probabilities: prob_spec(v.get("probabilities"))?,
        }),
        other => Err(CfsError::Parse(format!("unknown system type {other:?}"))),
    }
}

/// `"uniform"`, `"natural"` or a JSON array given on the command line.
pub fn parse_prob_arg(text: &str) -> Result<ProbChoice> {
    match text.trim() {
        "uniform" => Ok(ProbChoice::Uniform),
        "natural" => Ok(ProbChoice::Natural),
        t => prob_spec(Some(&serde_json::from_str(t)?))?
            .ok_or_else(|| CfsError::Parse("empty probability argument".into())),
    }
}

pub fn load_descriptor(path: &Path) -> Result<Descriptor> {
    parse_descriptor(&std::fs::read_to_string(path)?)
}

/// Probability vector for a CFS system; `None` means uniform.
pub fn resolve_p(sys: &CfsSystem, choice: Option<&ProbChoice>) -> Result<ProbVector> {
    match choice {
        None | Some(ProbChoice::Uniform) => Ok(ProbVector::uniform(sys)),
        Some(ProbChoice::Natural) => Err(CfsError::InvalidProbabilities(
            "\"natural\" applies to four-corner systems only".into(),
        )),
        Some(ProbChoice::Explicit(rows)) => match sys.mode() {
            NumberMode::Float => ProbVector::new(
                sys,
                rows.iter()
                    .map(|g| g.iter().map(|x| parse_float(x)).collect())
                    .collect::<Result<_>>()?,
            ),
            NumberMode::Rational => ProbVector::new_rational(
                sys,
                rows.iter()
                    .map(|g| g.iter().map(|x| parse_rational(x)).collect())
                    .collect::<Result<_>>()?,
            ),
        },
    }
}

/// Four weights from an explicit choice, given flat or as `[[p1,p2],[p3,p4]]`.
pub fn explicit_p4(rows: &[Vec<String>]) -> Result<[f64; 4]> {
    let flat: Vec<f64> = rows.iter().flatten().map(|x| parse_float(x)).collect::<Result<_>>()?;
    flat.try_into()
        .map_err(|v: Vec<f64>| CfsError::InvalidProbabilities(format!("expected 4 weights, got {}", v.len())))
}

fn rat_text(r: &Rational) -> Value {
    if r.is_integer() {
        Value::String(r.numer().to_string())
    } else {
        Value::String(format!("{}/{}", r.numer(), r.denom()))
    }
}

/// Descriptor JSON for a system; reading it back gives an equal system.
pub fn cfs_to_json(sys: &CfsSystem, p: Option<&ProbVector>) -> Value {
    let mut v = match sys.exact_params() {
        Some(e) => json!({
            "type": "cfs",
            "mode": "rational",
            "fixed_points": e.fixed_points.iter().map(rat_text).collect::<Vec<_>>(),
            "ratios": e.ratios.iter().map(|g| g.iter().map(rat_text).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }),
        None => json!({
            "type": "cfs",
            "mode": "float",
            "fixed_points": sys.fixed_points(),
            "ratios": sys.ratios(),
        }),
    };
    if let Some(p) = p {
        v["probabilities"] = match p.exact_weights() {
            Some(w) => json!(w.iter().map(|g| g.iter().map(rat_text).collect::<Vec<_>>()).collect::<Vec<_>>()),
            None => json!(p.weights()),
        };
    }
    v
}

pub fn four_corner_to_json(sys: &FourCornerSystem) -> Value {
    json!({"type": "four_corner", "gamma": sys.gamma, "lambda": sys.lambda})
}

/// A word given as a JSON array of 1-based `[group, member]` pairs.
pub fn parse_word(text: &str) -> Result<Word> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_rational("0.3").unwrap(), q(3, 10));
        assert_eq!(parse_rational("-0.125").unwrap(), q(-1, 8));
        assert_eq!(parse_rational("25e-2").unwrap(), q(1, 4));
        assert_eq!(parse_rational("2").unwrap(), q(2, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!((parse_float("1/3").unwrap() - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn cfs_round_trip() {
        let text = r#"{"type":"cfs","fixed_points":[0,1],"ratios":[["1/2",0.25],["1/3"]],
                       "probabilities":[["1/2","1/4"],["1/4"]],"mode":"rational"}"#;
        let Descriptor::Cfs { system, probabilities } = parse_descriptor(text).unwrap() else {
            panic!("wrong type")
        };
        assert_eq!(system.exact_params().unwrap().ratios[0][1], q(1, 4));
        let p = resolve_p(&system, probabilities.as_ref()).unwrap();
        let back = cfs_to_json(&system, Some(&p));
        let Descriptor::Cfs { system: s2, probabilities: p2 } = parse_descriptor(&back.to_string()).unwrap() else {
            panic!("wrong type")
        };
        assert_eq!(system, s2);
        assert_eq!(resolve_p(&s2, p2.as_ref()).unwrap(), p);

        let float = CfsSystem::new(vec![0.0, 1.0], vec![vec![0.3, 0.2], vec![0.25]]).unwrap();
        let Descriptor::Cfs { system, .. } = parse_descriptor(&cfs_to_json(&float, None).to_string()).unwrap() else {
            panic!("wrong type")
        };
        assert_eq!(system, float);
    }

    #[test]
    fn four_corner_parsing() {
        let text = r#"{"type":"four_corner","gamma":[[0.8,0.1],[0.1,0.8]],"lambda":[[0.45,0.09],[0.09,0.45]],"probabilities":"natural"}"#;
        let d = parse_descriptor(text).unwrap();
        let Descriptor::FourCorner { system, probabilities } = d else { panic!() };
        assert_eq!(system.gamma[0][1], 0.1);
        assert_eq!(probabilities, Some(ProbChoice::Natural));
        let back = parse_descriptor(&four_corner_to_json(&system).to_string()).unwrap();
        assert!(matches!(back, Descriptor::FourCorner { system: s, .. } if s == system));
        assert_eq!(explicit_p4(&[vec!["0.25".into(); 4]]).unwrap(), [0.25; 4]);
        assert_eq!(parse_prob_arg("natural").unwrap(), ProbChoice::Natural);
        assert_eq!(
            parse_prob_arg("[[0.5, \"1/4\"], [0.25]]").unwrap(),
            ProbChoice::Explicit(vec![vec!["0.5".into(), "1/4".into()], vec!["0.25".into()]])
        );
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_descriptor("{"), Err(CfsError::Json(_))));
        assert!(matches!(parse_descriptor(r#"{"type":"other"}"#), Err(CfsError::Parse(_))));
        assert!(matches!(
            parse_descriptor(r#"{"type":"cfs","fixed_points":[0,0],"ratios":[[0.5],[0.5]]}"#),
            Err(CfsError::InvalidSystem(_))
        ));
        assert!(matches!(parse_descriptor(r#"{"type":"cfs","ratios":[[0.5]]}"#), Err(CfsError::Parse(_))));
    }

    #[test]
    fn word_parsing() {
        let w = parse_word("[[1,2],[2,1]]").unwrap();
        assert_eq!(w.to_string(), Word::from(vec![(0, 1), (1, 0)]).to_string());
        assert!(parse_word("[[0,1]]").is_err());
    }
}
