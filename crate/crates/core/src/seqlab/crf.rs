//! Linear-chain CRF over per-line emission scores.
//!
//! The score of a label sequence `y` of length `L` is
//!
//! ```text
//! start[y0] + Σ_l emissions[l][y_l] + Σ_l transitions[y_l][y_{l+1}] + end[y_{L-1}]
//! ```
//!
//! All quantities are computed in log space with log-sum-exp stabilization.

use super::SeqlabError;
use ndarray::{Array1, Array2, ArrayView2, Axis};

#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    /// `transitions[[i, j]]` scores label `i` followed by label `j`.
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

impl CrfParams {
    pub fn zeros(n_labels: usize) -> Self {
        Self {
            transitions: Array2::zeros((n_labels, n_labels)),
            start: Array1::zeros(n_labels),
            end: Array1::zeros(n_labels),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.start.len()
    }

    fn check(&self, emissions: ArrayView2<f64>) -> Result<(), SeqlabError> {
        let k = self.n_labels();
        if self.transitions.dim() != (k, k) || self.end.len() != k {
            return Err(SeqlabError::Shape("inconsistent CRF parameter shapes".into()));
        }
        if emissions.nrows() == 0 {
            return Err(SeqlabError::EmptySequence);
        }
        if emissions.ncols() != k {
            return Err(SeqlabError::Shape(format!(
                "emissions have {} columns, CRF has {k} labels",
                emissions.ncols()
            )));
        }
        Ok(())
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Score of one label sequence.
pub fn sequence_score(
    emissions: ArrayView2<f64>,
    crf: &CrfParams,
    labels: &[usize],
) -> Result<f64, SeqlabError> {
    crf.check(emissions)?;
    check_labels(labels, emissions.nrows(), crf.n_labels())?;
    let last = labels.len() - 1;
    let mut score = crf.start[labels[0]] + crf.end[labels[last]];
    for (l, &y) in labels.iter().enumerate() {
        score += emissions[[l, y]];
        if l < last {
            score += crf.transitions[[y, labels[l + 1]]];
        }
    }
    Ok(score)
}

fn check_labels(labels: &[usize], len: usize, k: usize) -> Result<(), SeqlabError> {
    if labels.len() != len {
        return Err(SeqlabError::Shape(format!(
            "{} labels for {len} positions",
            labels.len()
        )));
    }
    if let Some((position, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= k) {
        return Err(SeqlabError::LabelOutOfRange { position, label, k });
    }
    Ok(())
}

/// Forward (alpha) and backward (beta) log-potentials of one instance.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    /// `alpha[[l, j]]`: log-sum of scores of prefixes ending in `j` at `l`,
    /// including `start` and emissions up to `l`.
    pub alpha: Array2<f64>,
    /// `beta[[l, j]]`: log-sum of scores of suffixes after `l` given `j` at `l`,
    /// including `end`.
    pub beta: Array2<f64>,
    pub log_z: f64,
}

fn forward(emissions: ArrayView2<f64>, crf: &CrfParams) -> Array2<f64> {
    let (len, k) = emissions.dim();
    let mut alpha = Array2::zeros((len, k));
    alpha.row_mut(0).assign(&(&crf.start + &emissions.row(0)));
    for l in 1..len {
        for j in 0..k {
            let prev = alpha.row(l - 1);
            let col = crf.transitions.column(j);
            alpha[[l, j]] =
                log_sum_exp(prev.iter().zip(col.iter()).map(|(a, t)| a + t)) + emissions[[l, j]];
        }
    }
    alpha
}

pub fn forward_backward(
    emissions: ArrayView2<f64>,
    crf: &CrfParams,
) -> Result<ForwardBackward, SeqlabError> {
    crf.check(emissions)?;
    let (len, k) = emissions.dim();
    let alpha = forward(emissions, crf);
    let mut beta = Array2::zeros((len, k));
    beta.row_mut(len - 1).assign(&crf.end);
    for l in (0..len - 1).rev() {
        for i in 0..k {
            let next = beta.row(l + 1);
            let e = emissions.row(l + 1);
            let row = crf.transitions.row(i);
            beta[[l, i]] = log_sum_exp(
                (0..k).map(|j| row[j] + e[j] + next[j]).collect::<Vec<_>>(),
            );
        }
    }
    let last = alpha.row(len - 1);
    let log_z = log_sum_exp(last.iter().zip(crf.end.iter()).map(|(a, e)| a + e));
    Ok(ForwardBackward { alpha, beta, log_z })
}

impl ForwardBackward {
    /// Per-position label marginals, L × K.
    pub fn marginals(&self) -> Array2<f64> {
        (&self.alpha + &self.beta).mapv(|v| (v - self.log_z).exp())
    }

    /// Expected transition counts summed over positions, K × K.
    pub fn expected_transitions(&self, emissions: ArrayView2<f64>, crf: &CrfParams) -> Array2<f64> {
        let (len, k) = emissions.dim();
        let mut out = Array2::zeros((k, k));
        for l in 0..len.saturating_sub(1) {
            for i in 0..k {
                for j in 0..k {
                    out[[i, j]] += (self.alpha[[l, i]]
                        + crf.transitions[[i, j]]
                        + emissions[[l + 1, j]]
                        + self.beta[[l + 1, j]]
                        - self.log_z)
                        .exp();
                }
            }
        }
        out
    }
}

/// log Σ_y exp(score(y)) over all K^L label sequences.
pub fn crf_log_partition(emissions: ArrayView2<f64>, crf: &CrfParams) -> Result<f64, SeqlabError> {
    crf.check(emissions)?;
    let alpha = forward(emissions, crf);
    let last = alpha.row(alpha.nrows() - 1);
    Ok(log_sum_exp(
        last.iter().zip(crf.end.iter()).map(|(a, e)| a + e),
    ))
}

fn first_argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Highest-scoring label sequence and its score.
///
/// Among several maximizers the lexicographically smallest sequence is
/// returned: best suffix scores are computed right to left, then labels are
/// chosen left to right taking the lowest index on every tie.
pub fn crf_viterbi(
    emissions: ArrayView2<f64>,
    crf: &CrfParams,
) -> Result<(Vec<usize>, f64), SeqlabError> {
    crf.check(emissions)?;
    let (len, k) = emissions.dim();
    // suffix[[l, j]]: best score of positions l.. given label j at l, incl. end
    let mut suffix = Array2::zeros((len, k));
    suffix.row_mut(len - 1).assign(&(&emissions.row(len - 1) + &crf.end));
    for l in (0..len - 1).rev() {
        for j in 0..k {
            let row = crf.transitions.row(j);
            let next = suffix.row(l + 1);
            let (_, best) = first_argmax((0..k).map(|n| row[n] + next[n]));
            suffix[[l, j]] = emissions[[l, j]] + best;
        }
    }
    let (y0, score) = first_argmax((0..k).map(|j| crf.start[j] + suffix[[0, j]]));
    let mut labels = Vec::with_capacity(len);
    labels.push(y0);
    for l in 1..len {
        let prev = labels[l - 1];
        let row = crf.transitions.row(prev);
        let (y, _) = first_argmax((0..k).map(|j| row[j] + suffix[[l, j]]));
        labels.push(y);
    }
    Ok((labels, score))
}

/// Per-position argmax, lowest index on ties.
pub fn argmax_decode(emissions: ArrayView2<f64>) -> Vec<usize> {
    emissions
        .axis_iter(Axis(0))
        .map(|row| first_argmax(row.iter().copied()).0)
        .collect()
}

/// Negative log-likelihood of `gold` and its gradients.
#[derive(Debug, Clone)]
pub struct CrfLoss {
    pub loss: f64,
    pub d_emissions: Array2<f64>,
    pub grads: CrfParams,
    pub marginals: Array2<f64>,
}

pub fn crf_nll_and_grad(
    emissions: ArrayView2<f64>,
    crf: &CrfParams,
    gold: &[usize],
) -> Result<CrfLoss, SeqlabError> {
    crf.check(emissions)?;
    check_labels(gold, emissions.nrows(), crf.n_labels())?;
    let fb = forward_backward(emissions, crf)?;
    let gold_score = sequence_score(emissions, crf, gold)?;
    let marginals = fb.marginals();
    let len = gold.len();

    let mut d_emissions = marginals.clone();
    for (l, &y) in gold.iter().enumerate() {
        d_emissions[[l, y]] -= 1.0;
    }
    let mut transitions = fb.expected_transitions(emissions, crf);
    for w in gold.windows(2) {
        transitions[[w[0], w[1]]] -= 1.0;
    }
    let mut start = marginals.row(0).to_owned();
    start[gold[0]] -= 1.0;
    let mut end = marginals.row(len - 1).to_owned();
    end[gold[len - 1]] -= 1.0;

    Ok(CrfLoss {
        loss: fb.log_z - gold_score,
        d_emissions,
        grads: CrfParams {
            transitions,
            start,
            end,
        },
        marginals,
    })
}
