//! Synthetic model families with known ground truth.
//!
//! Labels are drawn once per split and shared by every model. For each model
//! and sample the predicted class equals the true class with the model's
//! target accuracy, otherwise a uniformly chosen wrong class. Logits are
//! `margin · onehot(predicted) + N(0, σ²)` per coordinate, divided by the
//! temperature. Test features are Gaussian clusters centred on
//! `margin · onehot(true)`, and each augmented view re-draws the logits after
//! flipping the predicted class with probability `aug_flip_prob`.
//!
//! Two optional switches make confidence informative:
//! * `wrong_margin` gives misclassified samples their own (usually small)
//!   margin, so confidence tracks correctness; view flips are then scaled by
//!   the sample's normalized uncertainty `(1 − conf) / (1 − 1/C)`.
//! * `shared_difficulty` draws one uniform difficulty per sample, shared by all
//!   models, and marks a model correct when the difficulty is below its target
//!   accuracy. Marginal accuracies are unchanged but errors become nested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor_io::{
    assemble_prediction_set, ModelRecord, PredictionSet, TensorError, TensorF32, TensorI64,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_models: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub num_classes: usize,
    pub accuracy_val: Vec<f64>,
    pub accuracy_test: Vec<f64>,
    pub margin: f64,
    pub noise_sigma: f64,
    pub temperature: f64,
    pub k_augs: usize,
    pub aug_flip_prob: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrong_margin: Option<f64>,
    #[serde(default)]
    pub shared_difficulty: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Invalid(msg));
        if self.n_models == 0 || self.n_val == 0 || self.n_test == 0 {
            return bad("n_models, n_val and n_test must be positive".into());
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be >= 2, got {}", self.num_classes));
        }
        for (name, v) in [("accuracy_val", &self.accuracy_val), ("accuracy_test", &self.accuracy_test)] {
            if v.len() != self.n_models {
                return bad(format!("{name} has {} entries, expected {}", v.len(), self.n_models));
            }
            if let Some(a) = v.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                return bad(format!("{name} entry {a} outside (0, 1)"));
            }
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be > 0, got {}", self.margin));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if self.k_augs == 1 {
            return bad("k_augs must be 0 or at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.aug_flip_prob) {
            return bad(format!("aug_flip_prob {} outside [0, 1]", self.aug_flip_prob));
        }
        if let Some(w) = self.wrong_margin {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("wrong_margin must be >= 0, got {w}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthFamily {
    pub records: Vec<ModelRecord>,
    /// Argmax accuracy of each model on its test split.
    pub test_accuracies: Vec<f64>,
}

/// Logit margin at which a noise-free one-hot logit vector has max softmax `conf`.
pub fn margin_for_confidence(conf: f64, classes: usize) -> f64 {
    (conf * (classes as f64 - 1.0) / (1.0 - conf)).ln()
}

fn confidence_for_margin(margin: f64, classes: usize) -> f64 {
    1.0 / (1.0 + (classes as f64 - 1.0) * (-margin).exp())
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

fn wrong_class(rng: &mut ChaCha8Rng, truth: usize, classes: usize) -> usize {
    let k = rng.random_range(0..classes - 1);
    if k >= truth {
        k + 1
    } else {
        k
    }
}

struct LogitParams {
    classes: usize,
    noise: Option<Normal<f64>>,
    temperature: f64,
}

impl LogitParams {
    fn new(classes: usize, noise_sigma: f64, temperature: f64) -> Self {
        Self {
            classes,
            noise: (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("finite sigma")),
            temperature,
        }
    }

    fn push(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f32>, predicted: usize, margin: f64) {
        for c in 0..self.classes {
            let mut v = if c == predicted { margin } else { 0.0 };
            if let Some(noise) = &self.noise {
                v += noise.sample(rng);
            }
            out.push((v / self.temperature) as f32);
        }
    }
}

/// Per-sample prediction plan for one model on one split.
struct SamplePlan {
    predicted: usize,
    margin: f64,
}

fn plan_split(
    rng: &mut ChaCha8Rng,
    labels: &[usize],
    difficulty: Option<&[f64]>,
    accuracy: f64,
    margin: f64,
    wrong_margin: Option<f64>,
    classes: usize,
) -> Vec<SamplePlan> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &truth)| {
            let u = match difficulty {
                Some(d) => d[i],
                None => rng.random::<f64>(),
            };
            if u < accuracy {
                SamplePlan {
                    predicted: truth,
                    margin,
                }
            } else {
                SamplePlan {
                    predicted: wrong_class(rng, truth, classes),
                    margin: wrong_margin.unwrap_or(margin),
                }
            }
        })
        .collect()
}

fn draw_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

fn accuracy_of(set: &PredictionSet) -> f64 {
    set.accuracy().expect("synthetic sets carry labels")
}

/// Generates a model family; identical specs give bit-identical families.
pub fn generate_family(spec: &SynthSpec) -> Result<SynthFamily, SynthError> {
    spec.validate()?;
    let classes = spec.num_classes;
    let val_labels = draw_labels(&mut stream(spec.seed, 1), spec.n_val, classes);
    let test_labels = draw_labels(&mut stream(spec.seed, 2), spec.n_test, classes);
    let (val_difficulty, test_difficulty) = if spec.shared_difficulty {
        let mut r = stream(spec.seed, 3);
        let v: Vec<f64> = (0..spec.n_val).map(|_| r.random()).collect();
        let mut r = stream(spec.seed, 4);
        let t: Vec<f64> = (0..spec.n_test).map(|_| r.random()).collect();
        (Some(v), Some(t))
    } else {
        (None, None)
    };
    let params = LogitParams::new(classes, spec.noise_sigma, spec.temperature);
    let feature_noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).unwrap());

    let mut records = Vec::with_capacity(spec.n_models);
    let mut test_accuracies = Vec::with_capacity(spec.n_models);
    for j in 0..spec.n_models {
        let tag = 100 + 4 * j as u64;

        let mut rng = stream(spec.seed, tag);
        let plan = plan_split(
            &mut rng,
            &val_labels,
            val_difficulty.as_deref(),
            spec.accuracy_val[j],
            spec.margin,
            spec.wrong_margin,
            classes,
        );
        let mut logits = Vec::with_capacity(spec.n_val * classes);
        for p in &plan {
            params.push(&mut rng, &mut logits, p.predicted, p.margin);
        }
        let val = assemble_prediction_set(
            TensorF32::new(vec![spec.n_val, classes], logits)?,
            None,
            Some(TensorI64::from_labels(&val_labels)?),
            None,
        )?;

        let mut rng = stream(spec.seed, tag + 1);
        let plan = plan_split(
            &mut rng,
            &test_labels,
            test_difficulty.as_deref(),
            spec.accuracy_test[j],
            spec.margin,
            spec.wrong_margin,
            classes,
        );
        let mut logits = Vec::with_capacity(spec.n_test * classes);
        for p in &plan {
            params.push(&mut rng, &mut logits, p.predicted, p.margin);
        }

        let mut rng = stream(spec.seed, tag + 2);
        let mut features = Vec::with_capacity(spec.n_test * classes);
        for &truth in &test_labels {
            for c in 0..classes {
                let mut v = if c == truth { spec.margin } else { 0.0 };
                if let Some(noise) = &feature_noise {
                    v += noise.sample(&mut rng);
                }
                features.push(v as f32);
            }
        }

        let aug = if spec.k_augs >= 2 {
            let mut rng = stream(spec.seed, tag + 3);
            let mut aug = Vec::with_capacity(spec.k_augs * spec.n_test * classes);
            for _ in 0..spec.k_augs {
                for p in &plan {
                    let flip = match spec.wrong_margin {
                        None => spec.aug_flip_prob,
                        Some(_) => {
                            let conf = confidence_for_margin(p.margin / spec.temperature, classes);
                            spec.aug_flip_prob * (1.0 - conf) / (1.0 - 1.0 / classes as f64)
                        }
                    };
                    let view = if rng.random::<f64>() < flip {
                        wrong_class(&mut rng, p.predicted, classes)
                    } else {
                        p.predicted
                    };
                    params.push(&mut rng, &mut aug, view, p.margin);
                }
            }
            Some(TensorF32::new(vec![spec.k_augs, spec.n_test, classes], aug)?)
        } else {
            None
        };

        let test = assemble_prediction_set(
            TensorF32::new(vec![spec.n_test, classes], logits)?,
            Some(TensorF32::new(vec![spec.n_test, classes], features)?),
            Some(TensorI64::from_labels(&test_labels)?),
            aug,
        )?;
        test_accuracies.push(accuracy_of(&test));
        records.push(ModelRecord::new(format!("model-{j:03}"), val, test, Some("synthetic".into()))?);
    }
    Ok(SynthFamily {
        records,
        test_accuracies,
    })
}

/// Accuracy and confidence of one subgroup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupProfile {
    pub accuracy: f64,
    pub confidence: f64,
}

/// Models that are calibrated on a majority group and confidently wrong on a minority group.
#[derive(Debug, Clone)]
pub struct SubpopulationCase {
    /// Per-model majority-group accuracy, equal to its confidence there.
    pub majority_accuracies: Vec<f64>,
    pub minority: GroupProfile,
    /// Share of the minority group in the validation split.
    pub val_minority_share: f64,
    /// Test split drawn from the majority group only.
    pub majority_test: SynthFamily,
    /// Test split drawn from the minority group only.
    pub minority_test: SynthFamily,
    /// Test split with both groups in equal proportion.
    pub balanced_test: SynthFamily,
}

fn group_split(
    rng: &mut ChaCha8Rng,
    n: usize,
    minority_share: f64,
    majority: GroupProfile,
    minority: GroupProfile,
    classes: usize,
) -> Result<PredictionSet, SynthError> {
    let params = LogitParams::new(classes, 0.0, 1.0);
    let n_minority = (n as f64 * minority_share).round() as usize;
    let mut labels = Vec::with_capacity(n);
    let mut logits = Vec::with_capacity(n * classes);
    for group in [(n - n_minority, majority), (n_minority, minority)] {
        let (count, profile) = group;
        let n_correct = (count as f64 * profile.accuracy).round() as usize;
        let margin = margin_for_confidence(profile.confidence, classes);
        for i in 0..count {
            let truth = rng.random_range(0..classes);
            let predicted = if i < n_correct {
                truth
            } else {
                wrong_class(rng, truth, classes)
            };
            labels.push(truth);
            params.push(rng, &mut logits, predicted, margin);
        }
    }
    Ok(assemble_prediction_set(
        TensorF32::new(vec![n, classes], logits)?,
        None,
        Some(TensorI64::from_labels(&labels)?),
        None,
    )?)
}

/// Two-group family demonstrating over-confidence on a minority subpopulation.
///
/// Five binary classifiers are calibrated on the majority group (confidence
/// equals accuracy, 0.86 to 0.94) but reach only 20% accuracy on the minority
/// group while reporting 95% confidence. Validation holds 5% minority samples.
pub fn generate_subpopulation_case(seed: u64) -> Result<SubpopulationCase, SynthError> {
    const CLASSES: usize = 2;
    const N_VAL: usize = 4000;
    const N_TEST: usize = 4000;
    const VAL_MINORITY_SHARE: f64 = 0.05;
    let minority = GroupProfile {
        accuracy: 0.2,
        confidence: 0.95,
    };
    let majority_accs = [0.86, 0.88, 0.90, 0.92, 0.94];

    let mut families: [Vec<ModelRecord>; 3] = Default::default();
    let mut truths: [Vec<f64>; 3] = Default::default();
    for (j, &acc) in majority_accs.iter().enumerate() {
        let majority = GroupProfile {
            accuracy: acc,
            confidence: acc,
        };
        let mut rng = stream(seed, 1000 + j as u64);
        let val = group_split(&mut rng, N_VAL, VAL_MINORITY_SHARE, majority, minority, CLASSES)?;
        for (k, share) in [0.0, 1.0, 0.5].into_iter().enumerate() {
            let test = group_split(&mut rng, N_TEST, share, majority, minority, CLASSES)?;
            truths[k].push(accuracy_of(&test));
            families[k].push(ModelRecord::new(
                format!("model-{j:03}"),
                val.clone(),
                test,
                Some("synthetic".into()),
            )?);
        }
    }
    let [maj, min, bal] = families;
    let [t_maj, t_min, t_bal] = truths;
    Ok(SubpopulationCase {
        majority_accuracies: majority_accs.to_vec(),
        minority,
        val_minority_share: VAL_MINORITY_SHARE,
        majority_test: SynthFamily {
            records: maj,
            test_accuracies: t_maj,
        },
        minority_test: SynthFamily {
            records: min,
            test_accuracies: t_min,
        },
        balanced_test: SynthFamily {
            records: bal,
            test_accuracies: t_bal,
        },
    })
}
