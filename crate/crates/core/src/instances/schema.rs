//! Serializable instance descriptions.
//!
//! JSON form: `{"family": "...", "params": {...}, "seed": N}`. The short
//! form `family:key=value,key=value` maps onto the same structure; a `seed`
//! key sets the top-level seed, comma-separated numbers become arrays and
//! `;` may separate keys (`segment:c=1,0;d=0,1`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use super::generators::{
    failure_instance, gen_ellipsoid, gen_max_quadratics, gen_quadratic_factor, gen_simplex,
    gen_unit_ball_start, EllipsoidInstance,
};
use crate::error::{RescaleError, Result};
use crate::linalg::{Matrix, SpdMatrix, Vector};
use crate::minimizers::Quadratic;
use crate::oracles::{FiniteSetOracle, MaxQuadSubdiff};

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    })
}

fn int_list<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<i32>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(i32),
        Many(Vec<i32>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    })
}

fn default_exponents() -> Vec<i32> {
    vec![0, 1, 2, 3, 4]
}

fn default_d() -> f64 {
    0.1
}

fn default_n() -> usize {
    5
}

fn default_m() -> usize {
    4
}

fn default_condition() -> f64 {
    100.0
}

/// Source of the factor `R` of a quadratic: `"random"` or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorSource {
    Explicit(Vec<Vec<f64>>),
    Named(String),
}

impl Default for FactorSource {
    fn default() -> Self {
        FactorSource::Named("random".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// Six points in `R^5` near a facet of a simplex around `0`.
    Simplex { eps: f64 },
    /// The set `A B - c`, `A = diag(10^e)`.
    Ellipsoid {
        #[serde(default = "default_exponents", deserialize_with = "int_list")]
        exponents: Vec<i32>,
        #[serde(default = "default_d")]
        d: f64,
    },
    /// The planar ellipsoid instance on which Shor updating cycles.
    FailureR2 {},
    /// Maximum of `m` random strictly convex quadratics on `R^n`.
    #[serde(alias = "maxquad")]
    MaxQuadratics {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_m")]
        m: usize,
    },
    /// The unit ball of `R^n` with a random unit `g0` and `H0`.
    UnitBall {
        #[serde(default = "default_n")]
        n: usize,
    },
    /// The segment `[c, d]`.
    Segment {
        #[serde(deserialize_with = "one_or_many")]
        c: Vec<f64>,
        #[serde(deserialize_with = "one_or_many")]
        d: Vec<f64>,
    },
    /// An explicit finite set.
    Points { points: Vec<Vec<f64>> },
    /// `1/2 |R x|^2`, `R` random with the given condition number of `R^T R`
    /// or given explicitly.
    #[serde(alias = "quad")]
    Quadratic {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_condition")]
        condition: f64,
        #[serde(default, rename = "r", alias = "R")]
        factor: FactorSource,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Simplex { .. } => "simplex",
            Family::Ellipsoid { .. } => "ellipsoid",
            Family::FailureR2 {} => "failure-r2",
            Family::MaxQuadratics { .. } => "max-quadratics",
            Family::UnitBall { .. } => "unit-ball",
            Family::Segment { .. } => "segment",
            Family::Points { .. } => "points",
            Family::Quadratic { .. } => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

/// A generated instance.
#[derive(Debug, Clone)]
pub enum Instance {
    Points(FiniteSetOracle),
    Ellipsoid(EllipsoidInstance),
    MaxQuadratics(MaxQuadSubdiff),
    UnitBall { g0: Vector, h0: SpdMatrix },
    Segment { c: Vector, d: Vector },
    Quadratic(Quadratic),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Points(_) => "points",
            Instance::Ellipsoid(_) => "ellipsoid",
            Instance::MaxQuadratics(_) => "max-quadratics",
            Instance::UnitBall { .. } => "unit-ball",
            Instance::Segment { .. } => "segment",
            Instance::Quadratic(_) => "quadratic",
        }
    }
}

fn invalid(msg: impl Into<String>) -> RescaleError {
    RescaleError::InvalidInstance(msg.into())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be > 0, got {x}")))
    }
}

fn at_least_one(name: &str, x: usize) -> Result<()> {
    if x >= 1 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be >= 1")))
    }
}

impl InstanceSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Simplex { eps } => positive("eps", *eps),
            Family::Ellipsoid { exponents, d } => {
                if exponents.is_empty() {
                    return Err(invalid("exponents must be non-empty"));
                }
                if exponents.iter().any(|e| e.abs() > 300) {
                    return Err(invalid("exponents must lie in [-300, 300]"));
                }
                positive("d", *d)
            }
            Family::FailureR2 {} => Ok(()),
            Family::MaxQuadratics { n, m } => {
                at_least_one("n", *n)?;
                at_least_one("m", *m)
            }
            Family::UnitBall { n } => at_least_one("n", *n),
            Family::Segment { c, d } => {
                at_least_one("dimension", c.len())?;
                if c.len() != d.len() {
                    return Err(invalid(format!(
                        "segment endpoints differ in length: {} vs {}",
                        c.len(),
                        d.len()
                    )));
                }
                if c.iter().chain(d).any(|x| !x.is_finite()) {
                    return Err(invalid("segment endpoints must be finite"));
                }
                Ok(())
            }
            Family::Points { points } => {
                let n = points.first().map_or(0, Vec::len);
                at_least_one("dimension", n)?;
                if points.iter().any(|p| p.len() != n) {
                    return Err(invalid("points differ in length"));
                }
                Ok(())
            }
            Family::Quadratic { n, condition, factor } => match factor {
                FactorSource::Named(name) if name == "random" => {
                    at_least_one("n", *n)?;
                    if !(*condition >= 1.0) || !condition.is_finite() {
                        return Err(invalid(format!("condition must be >= 1, got {condition}")));
                    }
                    Ok(())
                }
                FactorSource::Named(name) => Err(invalid(format!("unknown factor {name:?}"))),
                FactorSource::Explicit(rows) => {
                    let k = rows.len();
                    at_least_one("dimension", k)?;
                    if rows.iter().any(|r| r.len() != k) {
                        return Err(invalid("factor must be square"));
                    }
                    Ok(())
                }
            },
        }
    }

    /// Generates the instance.
    pub fn build(&self) -> Result<Instance> {
        self.validate()?;
        Ok(match &self.family {
            Family::Simplex { eps } => Instance::Points(gen_simplex(*eps)?),
            Family::Ellipsoid { exponents, d } => {
                Instance::Ellipsoid(gen_ellipsoid(exponents, *d, self.seed)?)
            }
            Family::FailureR2 {} => Instance::Ellipsoid(failure_instance()),
            Family::MaxQuadratics { n, m } => {
                Instance::MaxQuadratics(gen_max_quadratics(*n, *m, self.seed)?)
            }
            Family::UnitBall { n } => {
                let (g0, h0) = gen_unit_ball_start(*n, self.seed)?;
                Instance::UnitBall { g0, h0 }
            }
            Family::Segment { c, d } => Instance::Segment {
                c: Vector::from_row_slice(c),
                d: Vector::from_row_slice(d),
            },
            Family::Points { points } => Instance::Points(FiniteSetOracle::new(
                points.iter().map(|p| Vector::from_row_slice(p)).collect(),
            )?),
            Family::Quadratic { n, condition, factor } => {
                let r = match factor {
                    FactorSource::Explicit(rows) => {
                        let k = rows.len();
                        Matrix::from_row_iterator(k, k, rows.iter().flatten().copied())
                    }
                    FactorSource::Named(_) => gen_quadratic_factor(*n, *condition, self.seed)?,
                };
                Instance::Quadratic(Quadratic::new(r)?)
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Parses the short form `family[:key=value,...]`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let (family, rest) = match s.split_once(':') {
            Some((f, r)) => (f.trim(), r),
            None => (s.trim(), ""),
        };
        if family.is_empty() {
            return Err(invalid("missing family name"));
        }
        let mut pairs: Vec<(String, Vec<String>)> = Vec::new();
        for token in rest.split([',', ';']).map(str::trim).filter(|t| !t.is_empty()) {
            match token.split_once('=') {
                Some((k, v)) => pairs.push((k.trim().to_string(), vec![v.trim().to_string()])),
                None => match pairs.last_mut() {
                    Some((_, values)) => values.push(token.to_string()),
                    None => return Err(invalid(format!("expected key=value, got {token:?}"))),
                },
            }
        }
        let mut params = Map::new();
        let mut seed = 0;
        for (key, values) in pairs {
            if key == "seed" {
                seed = values[0]
                    .parse()
                    .map_err(|_| invalid(format!("seed must be an unsigned integer, got {:?}", values[0])))?;
                if values.len() > 1 {
                    return Err(invalid("seed takes one value"));
                }
                continue;
            }
            let mut parsed: Vec<Value> = values.iter().map(|v| scalar(v)).collect();
            let value = if parsed.len() == 1 {
                parsed.pop().unwrap()
            } else {
                Value::Array(parsed)
            };
            if params.insert(key.clone(), value).is_some() {
                return Err(invalid(format!("duplicate key {key:?}")));
            }
        }
        let mut obj = Map::new();
        obj.insert("family".into(), Value::String(family.to_string()));
        obj.insert("params".into(), Value::Object(params));
        obj.insert("seed".into(), Value::from(seed));
        let spec: Self = serde_json::from_value(Value::Object(obj))
            .map_err(|e| invalid(format!("{family}: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn scalar(token: &str) -> Value {
    if let Ok(i) = token.parse::<i64>() {
        return Value::from(i);
    }
    match token.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::String(token.to_string()),
    }
}

impl FromStr for InstanceSpec {
    type Err = RescaleError;

    /// JSON when the input starts with `{`, the short form otherwise.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim_start().starts_with('{') {
            Self::from_json(s)
        } else {
            Self::parse_short(s)
        }
    }
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match serde_json::to_string(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => Err(fmt::Error),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_forms() {
        let s = InstanceSpec::parse_short("simplex:eps=1e-3").unwrap();
        assert_eq!(s.family, Family::Simplex { eps: 1e-3 });
        let s = InstanceSpec::parse_short("segment:c=1,0;d=0,1").unwrap();
        assert_eq!(
            s.family,
            Family::Segment {
                c: vec![1.0, 0.0],
                d: vec![0.0, 1.0]
            }
        );
        let s = InstanceSpec::parse_short("maxquad:n=5,m=4,seed=7").unwrap();
        assert_eq!(s.family, Family::MaxQuadratics { n: 5, m: 4 });
        assert_eq!(s.seed, 7);
        let s = InstanceSpec::parse_short("quad:R=random,seed=3").unwrap();
        assert!(matches!(s.family, Family::Quadratic { n: 5, .. }));
        let s = InstanceSpec::parse_short("ellipsoid:exponents=0,1,2,3,4,5,6,7,8,9,d=0.1").unwrap();
        assert!(matches!(&s.family, Family::Ellipsoid { exponents, .. } if exponents.len() == 10));
        assert_eq!(InstanceSpec::parse_short("failure-r2").unwrap().family, Family::FailureR2 {});
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            "simplex:eps=0",
            "simplex",
            "simplex:eps=1,foo=2",
            "nope:x=1",
            "ellipsoid:d=-1",
            "max-quadratics:m=0",
            "segment:c=1,0;d=1",
            "quad:R=weird",
            ":eps=1",
            "simplex:1",
        ] {
            assert!(InstanceSpec::parse_short(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn json_form() {
        let s: InstanceSpec = r#"{"family":"ellipsoid","params":{"exponents":[0,1],"d":1.0},"seed":4}"#
            .parse()
            .unwrap();
        assert_eq!(s.seed, 4);
        let json = s.to_json().unwrap();
        assert_eq!(InstanceSpec::from_json(&json).unwrap(), s);
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["family"], "ellipsoid");
        assert_eq!(v["params"]["d"], 1.0);
    }

    #[test]
    fn builds_every_family() {
        for short in [
            "simplex:eps=0.1",
            "ellipsoid:d=1",
            "failure-r2",
            "max-quadratics:n=3,m=2",
            "unit-ball:n=4",
            "segment:c=1,0;d=0,1",
            "quadratic:n=3,condition=10",
        ] {
            let spec = InstanceSpec::parse_short(short).unwrap();
            assert_eq!(spec.build().unwrap().kind(), spec.family.name().replace("failure-r2", "ellipsoid").replace("simplex", "points"));
        }
        let points = InstanceSpec::new(
            Family::Points {
                points: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
            0,
        );
        assert!(matches!(points.build().unwrap(), Instance::Points(_)));
    }
}
