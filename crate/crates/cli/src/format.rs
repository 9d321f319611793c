//! JSON documents read and written by the command-line tool.
//!
//! Every document is an object with a `"kind"` field. Real numbers are
//! decimal strings (`"0.1"`, `"-inf"`, `"+inf"`) so that a write/read cycle
//! reproduces every `f64` bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayD, IxDyn};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use sklar_core::{
    CheckerboardCopula, Error, ExtReal, Grid, IndexUniverse, Label, Marginal, MarginalKind,
    ProjectiveFamily, TensorMeasure,
};

use crate::CliError;

/// A finite `f64` written as a decimal string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dec(pub f64);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match f64::from_str(s.trim()) {
            Ok(v) if v.is_finite() => Ok(Dec(v)),
            _ => Err(de::Error::custom(format!("expected a finite decimal string, got {s:?}"))),
        }
    }
}

/// An extended real written as a decimal string or `"-inf"` / `"+inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pt(pub ExtReal);

impl Serialize for Pt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Pt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ExtReal::from_str(&s).map(Pt).map_err(de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Marginal,
    MarginalSet,
    TensorMeasure,
    CheckerboardCopula,
    FamilySpec,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Marginal => "marginal",
            Kind::MarginalSet => "marginal_set",
            Kind::TensorMeasure => "tensor_measure",
            Kind::CheckerboardCopula => "checkerboard_copula",
            Kind::FamilySpec => "family_spec",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalType {
    Atomic,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalBody {
    #[serde(rename = "type")]
    pub ty: MarginalType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(Pt, Dec)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(Dec, Dec)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalDoc {
    pub kind: Kind,
    #[serde(rename = "type")]
    pub ty: MarginalType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(Pt, Dec)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(Dec, Dec)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSetDoc {
    pub kind: Kind,
    pub marginals: BTreeMap<Label, MarginalBody>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorBody {
    pub labels: Vec<Label>,
    pub axes: Vec<Vec<Pt>>,
    /// Row-major cell masses.
    pub mass: Vec<Dec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDoc {
    pub kind: Kind,
    pub labels: Vec<Label>,
    pub axes: Vec<Vec<Pt>>,
    pub mass: Vec<Dec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaBody {
    pub labels: Vec<Label>,
    pub order: usize,
    pub mass: Vec<Dec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaDoc {
    pub kind: Kind,
    pub labels: Vec<Label>,
    pub order: usize,
    pub mass: Vec<Dec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Independence,
    Comonotone,
    FromCopula,
    FromJoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniverseDoc {
    Finite(Vec<Label>),
    Countable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub kind: Kind,
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub universe: Option<UniverseDoc>,
    /// Checkerboard order for the built-in copula rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Number of leading labels whose subsets `validate` checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copula: Option<CopulaBody>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<TensorBody>,
}

/// A parsed document, before conversion to library values.
#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Marginal(MarginalDoc),
    MarginalSet(MarginalSetDoc),
    Tensor(TensorDoc),
    Copula(CopulaDoc),
    Family(FamilyDoc),
}

#[derive(Deserialize)]
struct KindProbe {
    kind: Kind,
}

fn parse_error(e: serde_json::Error) -> CliError {
    CliError::Parse(format!("{e}"))
}

impl Document {
    pub fn kind(&self) -> Kind {
        match self {
            Document::Marginal(_) => Kind::Marginal,
            Document::MarginalSet(_) => Kind::MarginalSet,
            Document::Tensor(_) => Kind::TensorMeasure,
            Document::Copula(_) => Kind::CheckerboardCopula,
            Document::Family(_) => Kind::FamilySpec,
        }
    }

    /// Parse JSON text. Errors carry the line and column reported by the parser.
    pub fn parse(text: &str) -> Result<Document, CliError> {
        let probe: KindProbe = serde_json::from_str(text).map_err(parse_error)?;
        Ok(match probe.kind {
            Kind::Marginal => Document::Marginal(serde_json::from_str(text).map_err(parse_error)?),
            Kind::MarginalSet => {
                Document::MarginalSet(serde_json::from_str(text).map_err(parse_error)?)
            }
            Kind::TensorMeasure => Document::Tensor(serde_json::from_str(text).map_err(parse_error)?),
            Kind::CheckerboardCopula => {
                Document::Copula(serde_json::from_str(text).map_err(parse_error)?)
            }
            Kind::FamilySpec => Document::Family(serde_json::from_str(text).map_err(parse_error)?),
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = match self {
            Document::Marginal(d) => serde_json::to_string_pretty(d),
            Document::MarginalSet(d) => serde_json::to_string_pretty(d),
            Document::Tensor(d) => serde_json::to_string_pretty(d),
            Document::Copula(d) => serde_json::to_string_pretty(d),
            Document::Family(d) => serde_json::to_string_pretty(d),
        }
        .expect("documents serialize");
        s.push('\n');
        s
    }
}

// Library values -> documents.

pub fn marginal_body(m: &Marginal) -> MarginalBody {
    match m.kind() {
        MarginalKind::Atomic => MarginalBody {
            ty: MarginalType::Atomic,
            atoms: Some(m.atoms().expect("atomic").iter().map(|&(x, p)| (Pt(x), Dec(p))).collect()),
            knots: None,
        },
        MarginalKind::Continuous => MarginalBody {
            ty: MarginalType::Continuous,
            atoms: None,
            knots: Some(m.knots().expect("continuous").iter().map(|&(x, f)| (Dec(x), Dec(f))).collect()),
        },
    }
}

pub fn marginal_doc(m: &Marginal) -> Document {
    let b = marginal_body(m);
    Document::Marginal(MarginalDoc {
        kind: Kind::Marginal,
        ty: b.ty,
        atoms: b.atoms,
        knots: b.knots,
    })
}

pub fn marginal_set_doc(ms: &BTreeMap<Label, Marginal>) -> Document {
    Document::MarginalSet(MarginalSetDoc {
        kind: Kind::MarginalSet,
        marginals: ms.iter().map(|(&l, m)| (l, marginal_body(m))).collect(),
    })
}

pub fn tensor_body(t: &TensorMeasure) -> TensorBody {
    TensorBody {
        labels: t.labels().to_vec(),
        axes: t.grid().axes().iter().map(|a| a.iter().map(|&x| Pt(x)).collect()).collect(),
        mass: t.mass().iter().map(|&m| Dec(m)).collect(),
    }
}

pub fn tensor_doc(t: &TensorMeasure) -> Document {
    let b = tensor_body(t);
    Document::Tensor(TensorDoc {
        kind: Kind::TensorMeasure,
        labels: b.labels,
        axes: b.axes,
        mass: b.mass,
    })
}

pub fn copula_body(c: &CheckerboardCopula) -> CopulaBody {
    CopulaBody {
        labels: c.labels().to_vec(),
        order: c.order(),
        mass: c.mass().iter().map(|&m| Dec(m)).collect(),
    }
}

pub fn copula_doc(c: &CheckerboardCopula) -> Document {
    let b = copula_body(c);
    Document::Copula(CopulaDoc {
        kind: Kind::CheckerboardCopula,
        labels: b.labels,
        order: b.order,
        mass: b.mass,
    })
}

// Documents -> library values. Failures here are validation failures.

fn validation(e: Error) -> CliError {
    CliError::Validation(e.to_string())
}

pub fn marginal_from(b: &MarginalBody) -> Result<Marginal, CliError> {
    match (b.ty, &b.atoms, &b.knots) {
        (MarginalType::Atomic, Some(atoms), None) => {
            Marginal::atomic(atoms.iter().map(|&(x, p)| (x.0, p.0)).collect()).map_err(validation)
        }
        (MarginalType::Continuous, None, Some(knots)) => {
            Marginal::continuous(knots.iter().map(|&(x, f)| (x.0, f.0)).collect()).map_err(validation)
        }
        (MarginalType::Atomic, _, _) => Err(CliError::Validation(
            "an atomic marginal needs \"atoms\" and no \"knots\"".into(),
        )),
        (MarginalType::Continuous, _, _) => Err(CliError::Validation(
            "a continuous marginal needs \"knots\" and no \"atoms\"".into(),
        )),
    }
}

fn array_from(shape: &[usize], mass: &[Dec]) -> Result<ArrayD<f64>, CliError> {
    let cells: usize = shape.iter().product();
    if cells != mass.len() {
        return Err(CliError::Validation(format!(
            "shape {shape:?} has {cells} cells but {} masses were given",
            mass.len()
        )));
    }
    Ok(ArrayD::from_shape_vec(IxDyn(shape), mass.iter().map(|m| m.0).collect())
        .expect("length checked"))
}

pub fn tensor_from(b: &TensorBody) -> Result<TensorMeasure, CliError> {
    let axes: Vec<Vec<ExtReal>> = b.axes.iter().map(|a| a.iter().map(|p| p.0).collect()).collect();
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mass = array_from(&shape, &b.mass)?;
    let grid = Grid::new(axes).map_err(validation)?;
    TensorMeasure::new(b.labels.clone(), grid, mass).map_err(validation)
}

/// Shape-checked copula; the copula invariants are left to the caller.
pub fn copula_from(b: &CopulaBody) -> Result<CheckerboardCopula, CliError> {
    let shape = vec![b.order; b.labels.len()];
    let mass = array_from(&shape, &b.mass)?;
    CheckerboardCopula::from_mass(b.labels.clone(), mass).map_err(validation)
}

/// Like [`copula_from`], but the copula must also pass validation.
pub fn valid_copula_from(b: &CopulaBody) -> Result<CheckerboardCopula, CliError> {
    let c = copula_from(b)?;
    let report = c.validate();
    if !report.passed() {
        return Err(CliError::Validation(report.to_string()));
    }
    Ok(c)
}

impl TensorDoc {
    pub fn body(&self) -> TensorBody {
        TensorBody {
            labels: self.labels.clone(),
            axes: self.axes.clone(),
            mass: self.mass.clone(),
        }
    }
}

impl CopulaDoc {
    pub fn body(&self) -> CopulaBody {
        CopulaBody {
            labels: self.labels.clone(),
            order: self.order,
            mass: self.mass.clone(),
        }
    }
}

impl MarginalDoc {
    pub fn body(&self) -> MarginalBody {
        MarginalBody {
            ty: self.ty,
            atoms: self.atoms.clone(),
            knots: self.knots.clone(),
        }
    }
}

impl FamilyDoc {
    pub fn universe(&self) -> Result<IndexUniverse, CliError> {
        let derived = match (self.rule, &self.joint, &self.copula) {
            (Rule::FromJoint, Some(j), _) => Some(j.labels.clone()),
            (Rule::FromCopula, _, Some(c)) => Some(c.labels.clone()),
            _ => None,
        };
        match (&self.universe, derived) {
            (Some(UniverseDoc::Countable), None) => Ok(IndexUniverse::Countable),
            (Some(UniverseDoc::Finite(l)), None) => IndexUniverse::finite(l.clone()).map_err(validation),
            (None, Some(l)) => IndexUniverse::finite(l).map_err(validation),
            (Some(u), Some(l)) => {
                let mut sorted = l.clone();
                sorted.sort_unstable();
                if *u == UniverseDoc::Finite(sorted) {
                    IndexUniverse::finite(l).map_err(validation)
                } else {
                    Err(CliError::Compatibility(format!(
                        "universe {u:?} differs from the labels {l:?} of the embedded measure"
                    )))
                }
            }
            (None, None) => Err(CliError::Validation(format!(
                "rule {:?} needs an explicit universe",
                self.rule
            ))),
        }
    }

    /// Build the family described by this document.
    pub fn build(&self) -> Result<ProjectiveFamily, CliError> {
        let universe = self.universe()?;
        let order = || {
            self.order
                .filter(|&n| n >= 1)
                .ok_or_else(|| CliError::Validation(format!("rule {:?} needs \"order\" >= 1", self.rule)))
        };
        let only = |field: &str, present: bool| {
            if present {
                Err(CliError::Validation(format!("rule {:?} does not take \"{field}\"", self.rule)))
            } else {
                Ok(())
            }
        };
        match self.rule {
            Rule::Independence | Rule::Comonotone => {
                only("copula", self.copula.is_some())?;
                only("joint", self.joint.is_some())?;
                let n = order()?;
                Ok(if self.rule == Rule::Independence {
                    ProjectiveFamily::independence(universe, n)
                } else {
                    ProjectiveFamily::comonotone(universe, n)
                })
            }
            Rule::FromCopula => {
                only("joint", self.joint.is_some())?;
                let body = self
                    .copula
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("rule from_copula needs \"copula\"".into()))?;
                Ok(ProjectiveFamily::from_copula(valid_copula_from(body)?))
            }
            Rule::FromJoint => {
                only("copula", self.copula.is_some())?;
                let body = self
                    .joint
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("rule from_joint needs \"joint\"".into()))?;
                Ok(ProjectiveFamily::from_joint(tensor_from(body)?))
            }
        }
    }
}
