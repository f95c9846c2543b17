//! JSON input formats.
//!
//! ```text
//! group     {"type":"heisenberg","n":1}
//!           {"type":"step2","n1":2,"n2":1,"bracket":[[[0],[2]],[[-2],[0]]]}
//! norm      {"norm":"koranyi"} | {"norm":"lee-naor"}
//!           {"norm":"pmax","p":2,"a":1.0}   (p may be "inf")
//!           {"norm":"hs","r":0.1}
//! measure   {"points":[[x,y,z],...],"weights":[w,...]}
//! curve     {"knots":[{"t":0.0,"measure":{...}},...]}
//! isometry  {"translate":[x,y,z],"linear":[[...],...]}   (both optional)
//! points    [[x,y,z],...]
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::GeodesicCurve;
use crate::group::{GroupPoint, GroupSpec};
use crate::norms::{NormKind, NormSpec};
use crate::rigidity::{IsometryInput, IsometrySpec};
use crate::wasserstein::DiscreteMeasure;

pub const GROUP_FORMAT: u32 = 1;
pub const NORM_FORMAT: u32 = 1;
pub const MEASURE_FORMAT: u32 = 1;
pub const CURVE_FORMAT: u32 = 1;
pub const ISOMETRY_FORMAT: u32 = 1;
pub const REPORT_FORMAT: u32 = 1;

/// `group/1 norm/1 ...`, embedded in the CLI version string.
pub fn format_versions() -> String {
    format!(
        "group/{GROUP_FORMAT} norm/{NORM_FORMAT} measure/{MEASURE_FORMAT} curve/{CURVE_FORMAT} isometry/{ISOMETRY_FORMAT} report/{REPORT_FORMAT}"
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GroupInput {
    Heisenberg { n: usize },
    Step2 { n1: usize, n2: usize, bracket: Vec<Vec<Vec<f64>>> },
}

impl GroupInput {
    pub fn build(&self) -> Result<GroupSpec> {
        match self {
            GroupInput::Heisenberg { n } => GroupSpec::heisenberg(*n),
            GroupInput::Step2 { n1, n2, bracket } => GroupSpec::step2(*n1, *n2, bracket),
        }
    }

    pub fn from_spec(g: &GroupSpec) -> Self {
        match g.kind() {
            crate::group::GroupKind::Heisenberg { n } => GroupInput::Heisenberg { n: *n },
            crate::group::GroupKind::Step2 { n1, n2, bracket } => GroupInput::Step2 {
                n1: *n1,
                n2: *n2,
                bracket: (0..*n1)
                    .map(|a| (0..*n1).map(|b| (0..*n2).map(|k| bracket[(a * n1 + b) * n2 + k]).collect()).collect())
                    .collect(),
            },
        }
    }
}

/// `p` as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(InfName),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfName {
    #[serde(rename = "inf", alias = "infinity", alias = "Infinity")]
    Inf,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Named(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", deny_unknown_fields)]
pub enum NormInput {
    #[serde(rename = "koranyi")]
    Koranyi,
    #[serde(rename = "lee-naor")]
    LeeNaor,
    #[serde(rename = "pmax")]
    PMax { p: Exponent, a: f64 },
    #[serde(rename = "hs")]
    HebischSikora { r: f64 },
}

impl NormInput {
    pub fn kind(&self) -> NormKind {
        match self {
            NormInput::Koranyi => NormKind::Koranyi,
            NormInput::LeeNaor => NormKind::LeeNaor,
            NormInput::PMax { p, a } => NormKind::PMax { p: p.value(), a: *a },
            NormInput::HebischSikora { r } => NormKind::HebischSikora { r: *r },
        }
    }

    pub fn build(&self, group: GroupSpec) -> Result<NormSpec> {
        NormSpec::new(self.kind(), group)
    }
}

fn parse<T: DeserializeOwned>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn parse_group(text: &str) -> Result<GroupSpec> {
    parse::<GroupInput>("group", text)?.build()
}

pub fn parse_norm(text: &str, group: GroupSpec) -> Result<NormSpec> {
    parse::<NormInput>("norm", text)?.build(group)
}

/// Measures are validated while parsing; invariant violations surface as
/// parse errors naming the violated condition.
pub fn parse_measure(text: &str) -> Result<DiscreteMeasure> {
    parse("measure", text)
}

pub fn parse_curve(text: &str) -> Result<GeodesicCurve> {
    parse("curve", text)
}

pub fn parse_points(text: &str) -> Result<Vec<GroupPoint>> {
    Ok(parse::<Vec<Vec<f64>>>("points", text)?.into_iter().map(GroupPoint::new).collect())
}

pub fn parse_isometry(text: &str, norm: &NormSpec) -> Result<IsometrySpec> {
    IsometrySpec::from_input(norm, &parse::<IsometryInput>("isometry", text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups() {
        let g = parse_group(r#"{"type":"heisenberg","n":1}"#).unwrap();
        assert_eq!(g.dim(), 3);
        let s = parse_group(r#"{"type":"step2","n1":2,"n2":1,"bracket":[[[0],[2]],[[-2],[0]]]}"#).unwrap();
        assert_eq!(s.weights(), &[1, 1, 2]);
        assert_eq!(GroupInput::from_spec(&s).build().unwrap(), s);
        let err = parse_group(r#"{"type":"step2","n1":2,"n2":1,"bracket":[[[0],[1]],[[0],[0]]]}"#).unwrap_err();
        assert!(err.to_string().contains("skew"), "{err}");
        let err = parse_group(r#"{"type":"step2","n1":2,"n2":1,"bracket":[[[0],[0]],[[0],[0]]]}"#).unwrap_err();
        assert!(err.to_string().contains("degenera"), "{err}");
        assert!(matches!(parse_group(r#"{"type":"heis"}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_group("not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn norms() {
        let g = GroupSpec::heisenberg(1).unwrap();
        assert_eq!(parse_norm(r#"{"norm":"koranyi"}"#, g.clone()).unwrap().kind(), NormKind::Koranyi);
        assert_eq!(parse_norm(r#"{"norm":"lee-naor"}"#, g.clone()).unwrap().kind(), NormKind::LeeNaor);
        assert_eq!(
            parse_norm(r#"{"norm":"pmax","p":2,"a":1.0}"#, g.clone()).unwrap().kind(),
            NormKind::PMax { p: 2.0, a: 1.0 }
        );
        assert_eq!(
            parse_norm(r#"{"norm":"pmax","p":"inf","a":0.5}"#, g.clone()).unwrap().kind(),
            NormKind::PMax { p: f64::INFINITY, a: 0.5 }
        );
        assert_eq!(
            parse_norm(r#"{"norm":"hs","r":0.1}"#, g.clone()).unwrap().kind(),
            NormKind::HebischSikora { r: 0.1 }
        );
        assert!(matches!(parse_norm(r#"{"norm":"hs","r":-1}"#, g.clone()), Err(Error::InvalidParameter(_))));
        assert!(matches!(parse_norm(r#"{"norm":"euclid"}"#, g), Err(Error::Parse(_))));
    }

    #[test]
    fn measures_curves_isometries() {
        let m = parse_measure(r#"{"points":[[0,0,0]],"weights":[1]}"#).unwrap();
        assert!(m.is_dirac());
        assert!(parse_measure(r#"{"points":[[0,0,0]],"weights":[0]}"#).is_err());
        let c = parse_curve(
            r#"{"knots":[{"t":0,"measure":{"points":[[0,0,0]],"weights":[1]}},{"t":1,"measure":{"points":[[1,0,0]],"weights":[1]}}]}"#,
        )
        .unwrap();
        assert_eq!(c.domain(), (0.0, 1.0));
        assert!(parse_curve(r#"{"knots":[{"t":1,"measure":{"points":[[0,0,0]],"weights":[1]}},{"t":0,"measure":{"points":[[1,0,0]],"weights":[1]}}]}"#).is_err());
        let k = NormSpec::koranyi(GroupSpec::heisenberg(1).unwrap()).unwrap();
        let id = parse_isometry("{}", &k).unwrap();
        assert_eq!(id, IsometrySpec::identity(k.group()));
        let t = parse_isometry(r#"{"translate":[0,0,1]}"#, &k).unwrap();
        assert_eq!(t.apply(&GroupPoint::from([1.0, 0.0, 0.0])).unwrap(), GroupPoint::from([1.0, 0.0, 1.0]));
        assert!(parse_isometry(r#"{"linear":[[2,0,0],[0,2,0],[0,0,4]]}"#, &k).is_err());
        assert_eq!(parse_points("[[1,2,3],[4,5,6]]").unwrap().len(), 2);
        assert!(format_versions().contains("measure/1"));
    }
}
