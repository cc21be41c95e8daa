//! Scenario files: JSON with every float written as a decimal string (no
//! locale drift) and complex numbers as [re, im] pairs. Unknown fields are
//! rejected so typos surface as schema errors, not silent defaults.

use kpzmp::series::TruncationParams;
use kpzmp::Complex64;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// A finite f64 carried as a decimal string in the file. Plain JSON numbers
/// are accepted on input; output always re-emits the shortest decimal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dec(pub f64);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}", self.0))
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> de::Visitor<'de> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a decimal string like \"0.25\"")
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<f64, E> {
                s.trim().parse().map_err(|_| E::custom(format!("bad decimal '{s}'")))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
        }
        let v = d.deserialize_any(V)?;
        if !v.is_finite() {
            return Err(de::Error::custom("numeric fields must be finite"));
        }
        Ok(Dec(v))
    }
}

/// Complex number as an [re, im] pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cplx(pub Dec, pub Dec);

impl Cplx {
    pub fn c64(&self) -> Complex64 {
        Complex64::new(self.0 .0, self.1 .0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    TasepProb,
    KpzProb,
    ChiEval,
    EqualTime,
    Convergence,
    Verify,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        let s = match self {
            Kind::TasepProb => "tasep_prob",
            Kind::KpzProb => "kpz_prob",
            Kind::ChiEval => "chi_eval",
            Kind::EqualTime => "equal_time",
            Kind::Convergence => "convergence",
            Kind::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// Initial condition: lattice particles, narrow wedges, or a sampled
/// compactly supported profile as (x, value) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    Particles(Vec<i64>),
    Wedges(Vec<(Dec, Dec)>),
    Sampled(Vec<(Dec, Dec)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasepQ {
    pub k: usize,
    pub t: Dec,
    pub a: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpzQ {
    pub alpha: Dec,
    pub tau: Dec,
    pub beta: Dec,
}

/// Query list; the variant must match the scenario kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySpec {
    Tasep(Vec<TasepQ>),
    Kpz(Vec<KpzQ>),
    /// (position, threshold) pairs, every event at time 1.
    EqualTime(Vec<(Dec, Dec)>),
    /// (eta, xi) evaluation points for the characteristic function.
    Chi(Vec<(Cplx, Cplx)>),
}

/// Optional overrides of the series truncation; unset fields keep the
/// defaults recommended for the query size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_total_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ray_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_radius: Option<Dec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_r: Option<Dec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Dec>,
}

impl TruncationSpec {
    pub fn apply(&self, mut tp: TruncationParams) -> TruncationParams {
        if let Some(n) = self.n_total_max {
            tp.n_total_max = n;
        }
        if let Some(c) = self.circle_order {
            tp.circle_order = c;
        }
        if let Some(r) = self.ray_order {
            tp.ray_order = r;
        }
        if let Some(Dec(r)) = self.z_radius {
            tp.z_radius = r;
        }
        if let Some(z) = self.z_order {
            tp.z_order = z;
        }
        if let Some(Dec(r)) = self.truncation_r {
            tp.kpz_truncation_r = r;
        }
        if let Some(Dec(t)) = self.tolerance {
            tp.truncation_tolerance = Some(t);
        }
        tp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<QuerySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSpec>,
    /// Decreasing discretization steps for convergence runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<Dec>>,
    /// Monte Carlo sample count for convergence runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, String> {
        serde_json::from_str(text).map_err(|e| format!("scenario schema: {e}"))
    }

    #[allow(dead_code)] // round-trip counterpart of parse; exercised by tests
    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_emit_round_trips() {
        let text = r#"{
            "id": "demo",
            "kind": "kpz_prob",
            "initial": {"wedges": [["0", "0"], ["-1", "0.5"]]},
            "queries": {"kpz": [{"alpha": "0", "tau": "1", "beta": "0.25"}]},
            "truncation": {"n_total_max": 2, "tolerance": "0.05"},
            "seed": 7
        }"#;
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.kind, Kind::KpzProb);
        let again = Scenario::parse(&s.emit()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn plain_numbers_are_accepted_strings_are_canonical() {
        let s = Scenario::parse(
            r#"{"id":"x","kind":"chi_eval",
                "initial":{"wedges":[[0, 0]]},
                "queries":{"chi":[[["1","0.3"],["-1","-0.2"]]]}}"#,
        )
        .unwrap();
        match s.queries.as_ref().unwrap() {
            QuerySpec::Chi(pts) => {
                assert_eq!(pts[0].0.c64(), Complex64::new(1.0, 0.3));
                assert_eq!(pts[0].1.c64(), Complex64::new(-1.0, -0.2));
            }
            _ => panic!("wrong query variant"),
        }
        let again = Scenario::parse(&s.emit()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn unknown_fields_and_bad_numbers_are_rejected() {
        assert!(Scenario::parse(r#"{"id":"x","kind":"verify","bogus":1}"#).is_err());
        assert!(Scenario::parse(
            r#"{"id":"x","kind":"chi_eval","queries":{"chi":[[["inf","0"],["-1","0"]]]}}"#
        )
        .is_err());
        assert!(Scenario::parse(r#"{"id":"x","kind":"nope"}"#).is_err());
    }
}
