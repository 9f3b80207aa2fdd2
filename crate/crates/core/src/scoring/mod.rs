//! Performance-prediction algorithms.
//!
//! Every scorer is a pure function of recorded model outputs (plus an explicit
//! seed where sampling is involved). Direct estimators return an accuracy or an
//! error rate in `[0, 1]`; surrogate scorers return a scalar meant only for
//! ranking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod agreement;
pub mod assignment;
pub mod confidence;
pub mod dispersion;
pub mod energy;
pub mod invariance;
pub mod matrix_norm;
pub mod softmax;
pub mod transport;

pub use agreement::{fit_agreement_line, score_agreement, AgreementFit};
pub use confidence::{score_atc, score_doc, ConfidenceFn};
pub use dispersion::score_dispersion;
pub use energy::score_mde;
pub use invariance::{score_ni, NiMode};
pub use matrix_norm::{score_mano, score_nuclear_norm};
pub use softmax::{softmax, Probabilities};
pub use transport::{score_cot, score_cott, CotOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("validation labels are required")]
    MissingLabels,
    #[error("class count mismatch: val has {val}, test has {test}")]
    ClassMismatch { val: usize, test: usize },
    #[error("no augmented logits recorded; run the extractor with --k-augs >= 2 to produce test_aug_logits")]
    MissingAugLogits,
    #[error("no test features recorded; run the extractor with feature dumping enabled")]
    MissingFeatures,
    #[error("arity error: {0}")]
    Arity(String),
    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    Numerical { rows: usize, cols: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ATC")]
    Atc,
    #[serde(rename = "NuclearNorm")]
    NuclearNorm,
    #[serde(rename = "DoC")]
    Doc,
    #[serde(rename = "NI")]
    Ni,
    #[serde(rename = "MaNo")]
    MaNo,
    #[serde(rename = "Dispersion")]
    Dispersion,
    #[serde(rename = "MDE")]
    Mde,
    #[serde(rename = "Agreement")]
    Agreement,
    #[serde(rename = "COT")]
    Cot,
    #[serde(rename = "COTT")]
    Cott,
}

impl Method {
    /// Leaderboard column order.
    pub const ALL: [Method; 10] = [
        Method::Atc,
        Method::NuclearNorm,
        Method::Doc,
        Method::Ni,
        Method::MaNo,
        Method::Dispersion,
        Method::Mde,
        Method::Agreement,
        Method::Cot,
        Method::Cott,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Atc => "ATC",
            Method::NuclearNorm => "NuclearNorm",
            Method::Doc => "DoC",
            Method::Ni => "NI",
            Method::MaNo => "MaNo",
            Method::Dispersion => "Dispersion",
            Method::Mde => "MDE",
            Method::Agreement => "Agreement",
            Method::Cot => "COT",
            Method::Cott => "COTT",
        }
    }

    /// Short header used in rendered leaderboards.
    pub fn column_label(self) -> &'static str {
        match self {
            Method::NuclearNorm => "Nu. Norm",
            Method::Doc => "DOC",
            other => other.name(),
        }
    }

    pub fn kind(self) -> ScoreKind {
        match self {
            Method::Atc | Method::Doc | Method::Agreement => ScoreKind::DirectAccuracy,
            Method::Cot | Method::Cott => ScoreKind::DirectError,
            _ => ScoreKind::SurrogateScore,
        }
    }

    pub fn sign_convention(self) -> SignConvention {
        match self {
            Method::Cot | Method::Cott | Method::Mde => SignConvention::LowerIsBetter,
            _ => SignConvention::HigherIsBetter,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let m = match s.trim().to_ascii_lowercase().as_str() {
            "atc" => Method::Atc,
            "doc" => Method::Doc,
            "nuclear" | "nuclearnorm" | "nuclear_norm" | "nunorm" => Method::NuclearNorm,
            "ni" => Method::Ni,
            "mano" => Method::MaNo,
            "dispersion" => Method::Dispersion,
            "mde" => Method::Mde,
            "agreement" => Method::Agreement,
            "cot" => Method::Cot,
            "cott" => Method::Cott,
            _ => return Err(format!("unknown method {s:?}")),
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreKind {
    DirectAccuracy,
    DirectError,
    SurrogateScore,
}

impl ScoreKind {
    pub fn is_direct(self) -> bool {
        !matches!(self, ScoreKind::SurrogateScore)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignConvention {
    HigherIsBetter,
    LowerIsBetter,
}

/// Non-fatal conditions attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreFlag {
    DegenerateThreshold,
    DegenerateClusters,
    ClippedAgreement,
    MaNoSimplified,
}

impl ScoreFlag {
    pub fn name(self) -> &'static str {
        match self {
            ScoreFlag::DegenerateThreshold => "degenerate-threshold",
            ScoreFlag::DegenerateClusters => "degenerate-clusters",
            ScoreFlag::ClippedAgreement => "clipped-agreement",
            ScoreFlag::MaNoSimplified => "mano-simplified",
        }
    }
}

impl FromStr for ScoreFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            ScoreFlag::DegenerateThreshold,
            ScoreFlag::DegenerateClusters,
            ScoreFlag::ClippedAgreement,
            ScoreFlag::MaNoSimplified,
        ]
        .into_iter()
        .find(|f| f.name() == s)
        .ok_or_else(|| format!("unknown flag {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method: Method,
    pub model_id: String,
    pub value: f64,
    pub kind: ScoreKind,
    pub sign_convention: SignConvention,
    #[serde(default)]
    pub flags: Vec<ScoreFlag>,
}

impl ScoreReport {
    pub fn new(method: Method, model_id: impl Into<String>, value: f64) -> Self {
        Self {
            method,
            model_id: model_id.into(),
            value,
            kind: method.kind(),
            sign_convention: method.sign_convention(),
            flags: Vec::new(),
        }
    }

    pub fn with_flag(mut self, flag: ScoreFlag) -> Self {
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
        self
    }

    /// Value on the axis compared against ground-truth accuracy: direct error
    /// estimates become predicted accuracies, everything else is left raw.
    pub fn accuracy_axis(&self) -> f64 {
        match self.kind {
            ScoreKind::DirectError => 1.0 - self.value,
            _ => self.value,
        }
    }

    /// Predicted accuracy for direct estimators.
    pub fn predicted_accuracy(&self) -> Option<f64> {
        self.kind.is_direct().then(|| self.accuracy_axis())
    }
}

/// Hyperparameters shared by all scorers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub atc_confidence: ConfidenceFn,
    pub mano_p: u32,
    pub mde_temperature: f64,
    pub agreement_eps: f64,
    pub cot_max_points: usize,
    pub ni_mode: NiMode,
    pub seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            atc_confidence: ConfidenceFn::MaxConfidence,
            mano_p: 4,
            mde_temperature: 1.0,
            agreement_eps: 1e-4,
            cot_max_points: 2000,
            ni_mode: NiMode::Pairwise,
            seed: 0,
        }
    }
}

pub(crate) fn require_labels(set: &crate::tensor_io::PredictionSet) -> Result<&[usize], ScoreError> {
    set.labels().ok_or(ScoreError::MissingLabels)
}

pub(crate) fn check_classes(
    val: &crate::tensor_io::PredictionSet,
    test: &crate::tensor_io::PredictionSet,
) -> Result<(), ScoreError> {
    if val.classes() != test.classes() {
        return Err(ScoreError::ClassMismatch {
            val: val.classes(),
            test: test.classes(),
        });
    }
    Ok(())
}
