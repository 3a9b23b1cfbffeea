use crate::error::{Error, Result};

/// `O[h][p]` counts of (human, predicted) label pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl ConfusionMatrix {
    pub fn from_labels(human: &[usize], predicted: &[usize], num_labels: usize) -> Result<Self> {
        if human.len() != predicted.len() {
            return Err(Error::data(format!(
                "rating lists differ in length ({} vs {})",
                human.len(),
                predicted.len()
            )));
        }
        if human.is_empty() {
            return Err(Error::data("confusion matrix needs at least one rating pair"));
        }
        let mut counts = vec![vec![0u64; num_labels]; num_labels];
        for (&h, &p) in human.iter().zip(predicted) {
            if h >= num_labels || p >= num_labels {
                return Err(Error::data(format!(
                    "label out of range: ({h}, {p}) with {num_labels} labels"
                )));
            }
            counts[h][p] += 1;
        }
        Ok(Self {
            counts,
            n: human.len() as u64,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn get(&self, human: usize, predicted: usize) -> u64 {
        self.counts[human][predicted]
    }

    pub fn transpose(&self) -> Self {
        let k = self.num_labels();
        let mut counts = vec![vec![0u64; k]; k];
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                counts[j][i] = c;
            }
        }
        Self { counts, n: self.n }
    }

    /// Quadratic weighted kappa of this table.
    ///
    /// With `w = (i-j)^2` (the `(K-1)^2` normaliser cancels) the observed and
    /// expected disagreements are integers: `A = Σ w·O` and `B = Σ w·row·col`,
    /// so `κ = 1 - n·A / B` is evaluated with a single rounding.
    pub fn quadratic_weighted_kappa(&self) -> f64 {
        let k = self.num_labels();
        let rows: Vec<u128> = self
            .counts
            .iter()
            .map(|r| r.iter().map(|&c| c as u128).sum())
            .collect();
        let cols: Vec<u128> = (0..k)
            .map(|j| self.counts.iter().map(|r| r[j] as u128).sum())
            .collect();
        let mut observed: u128 = 0;
        let mut expected: u128 = 0;
        for i in 0..k {
            for j in 0..k {
                let w = (i.abs_diff(j) * i.abs_diff(j)) as u128;
                observed += w * self.counts[i][j] as u128;
                expected += w * rows[i] * cols[j];
            }
        }
        if expected == 0 {
            // all mass on one label for both raters
            return 1.0;
        }
        1.0 - (self.n as u128 * observed) as f64 / expected as f64
    }
}

/// Quadratic weighted kappa between human and predicted ratings over labels `0..num_labels`.
///
/// Labels that never occur still participate through zero marginals, so the
/// result depends on `num_labels` only through the range check.
pub fn qwk(human: &[usize], predicted: &[usize], num_labels: usize) -> Result<f64> {
    if num_labels < 2 {
        return Err(Error::data(format!("qwk needs at least 2 labels, got {num_labels}")));
    }
    if human.len() != predicted.len() {
        return Err(Error::data(format!(
            "rating lists differ in length ({} vs {})",
            human.len(),
            predicted.len()
        )));
    }
    if human.len() < 2 {
        return Err(Error::data("qwk needs at least 2 rating pairs"));
    }
    Ok(ConfusionMatrix::from_labels(human, predicted, num_labels)?.quadratic_weighted_kappa())
}
