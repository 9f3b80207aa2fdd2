//! Row-wise softmax in f64.

use crate::tensor_io::TensorF32;

/// Row-major `[n × C]` probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    n: usize,
    classes: usize,
    data: Vec<f64>,
}

impl Probabilities {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let classes = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == classes), "ragged rows");
        Self {
            n: rows.len(),
            classes,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.classes)
    }

    /// Max probability of each row.
    pub fn max_confidence(&self) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Writes the softmax of `logits` into `out`.
pub fn softmax_row(logits: &[f32], out: &mut [f64]) {
    let max = logits
        .iter()
        .map(|&v| v as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l as f64 - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Softmax of every row of a `[n × C]` logit tensor.
pub fn softmax(logits: &TensorF32) -> Probabilities {
    let n = logits.dims()[0];
    let classes = logits.row_len();
    let mut data = vec![0.0; n * classes];
    for (i, out) in data.chunks_exact_mut(classes).enumerate() {
        softmax_row(logits.row(i), out);
    }
    Probabilities { n, classes, data }
}

/// Softmax of a subset of rows, in the given order.
pub fn softmax_rows(logits: &TensorF32, indices: &[usize]) -> Probabilities {
    let classes = logits.row_len();
    let mut data = vec![0.0; indices.len() * classes];
    for (out, &i) in data.chunks_exact_mut(classes).zip(indices) {
        softmax_row(logits.row(i), out);
    }
    Probabilities {
        n: indices.len(),
        classes,
        data,
    }
}

/// `log Σ exp(x)` with max subtraction.
pub fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}
