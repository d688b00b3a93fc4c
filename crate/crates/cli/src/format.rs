//! The on-disk formats: problem descriptions, transfer results, and
//! comparison certificates. Everything is JSON with a leading `format: 1`
//! key; scalars are strings ("3", "-1/2", or a residue for prime fields) so
//! no precision is ever lost, and output field order is fixed so files are
//! byte-stable across runs.

use serde::{Deserialize, Serialize};

use htt_core::field::{is_prime, GfP, Rational};
use htt_core::Degree;
use htt_core::Field;

pub const FORMAT_VERSION: u32 = 1;

/// Coefficient field selection: `"rational"` or `{"prime": p}`.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(untagged)]
pub enum FieldSpec {
    Named(String),
    Prime { prime: u64 },
}

impl FieldSpec {
    pub fn rational() -> Self {
        FieldSpec::Named("rational".into())
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            FieldSpec::Named(s) if s == "rational" => Ok(()),
            FieldSpec::Named(s) => Err(format!("unknown field '{s}' (use \"rational\" or {{\"prime\": p}})")),
            FieldSpec::Prime { prime } => {
                if is_prime(*prime) {
                    Ok(())
                } else {
                    Err(format!("{prime} is not prime"))
                }
            }
        }
    }
}

/// Parsing and printing of field scalars for one concrete field.
pub trait ScalarCodec: Field {
    fn parse_scalar(s: &str, spec: &FieldSpec) -> Result<Self, String>;
    fn render_scalar(&self) -> String;
}

impl ScalarCodec for Rational {
    fn parse_scalar(s: &str, _spec: &FieldSpec) -> Result<Self, String> {
        s.trim().parse::<Rational>().map_err(|e| format!("bad rational '{s}': {e}"))
    }

    fn render_scalar(&self) -> String {
        self.to_string()
    }
}

impl ScalarCodec for GfP {
    fn parse_scalar(s: &str, spec: &FieldSpec) -> Result<Self, String> {
        let FieldSpec::Prime { prime } = spec else {
            return Err("residue scalar without a prime field".into());
        };
        let v: i64 = s.trim().parse().map_err(|e| format!("bad residue '{s}': {e}"))?;
        Ok(GfP::new(v, *prime))
    }

    fn render_scalar(&self) -> String {
        self.to_string()
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    #[default]
    Homological,
    Cohomological,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
#[serde(untagged)]
pub enum CooperadChoice {
    Builtin(String),
    File { file: String },
}

impl Default for CooperadChoice {
    fn default() -> Self {
        CooperadChoice::Builtin("ainf".into())
    }
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct BasisElem {
    pub name: String,
    pub degree: Degree,
}

/// One column of a linear map: `on` goes to the combination `value`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct MapEntry {
    pub on: String,
    pub value: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ProductEntry {
    pub left: String,
    pub right: String,
    pub value: Vec<(String, String)>,
}

/// An arity-n operation value on one basis word.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct OperationEntry {
    pub arity: usize,
    pub on: Vec<String>,
    pub value: Vec<(String, String)>,
}

/// An explicit transfer problem: a second complex, the chain map, and
/// (optionally) which side carries the structure. Without this section the
/// problem is the classical pipeline between the complex and its homology.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TargetSection {
    pub basis: Vec<BasisElem>,
    #[serde(default)]
    pub differential: Vec<MapEntry>,
    #[serde(default)]
    pub product: Vec<ProductEntry>,
    #[serde(default)]
    pub operations: Vec<OperationEntry>,
    #[serde(default)]
    pub unit: Option<String>,
    /// The chain map from the main complex into this one.
    pub map: Vec<MapEntry>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ProblemFile {
    pub format: u32,
    pub field: FieldSpec,
    #[serde(default)]
    pub grading: Grading,
    #[serde(default)]
    pub max_arity: Option<usize>,
    #[serde(default)]
    pub window: Option<(Degree, Degree)>,
    #[serde(default)]
    pub cooperad: CooperadChoice,
    pub basis: Vec<BasisElem>,
    #[serde(default)]
    pub differential: Vec<MapEntry>,
    #[serde(default)]
    pub product: Vec<ProductEntry>,
    #[serde(default)]
    pub operations: Vec<OperationEntry>,
    #[serde(default)]
    pub unit: Option<String>,
    #[serde(default)]
    pub target: Option<TargetSection>,
}

/// One term entry of an arity family: the slice word `(label; word)` maps
/// to `target` with coefficient `scalar`.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TermEntry {
    pub arity: usize,
    pub label: usize,
    pub word: Vec<String>,
    pub target: String,
    pub scalar: String,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct VerificationSummary {
    pub pass: bool,
    pub max_arity: usize,
    pub lines: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ResultFile {
    pub format: u32,
    pub field: FieldSpec,
    pub direction: String,
    pub max_arity: usize,
    /// Basis of the complex carrying the transferred structure.
    pub structure_basis: Vec<BasisElem>,
    /// Basis of the other complex.
    pub other_basis: Vec<BasisElem>,
    pub structure: Vec<TermEntry>,
    pub morphism: Vec<TermEntry>,
    pub verification: VerificationSummary,
    pub trace: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ComparisonFile {
    pub format: u32,
    pub field: FieldSpec,
    pub direction: String,
    pub max_arity: usize,
    pub iso: Vec<TermEntry>,
    pub homotopy: Vec<TermEntry>,
    pub checks: Vec<String>,
    pub pass: bool,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &str) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&str>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match out {
        Some(path) => {
            std::fs::write(path, text + "\n").map_err(|e| format!("cannot write {path}: {e}"))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
