//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls the code under test to compute a reference.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use zoneseg::seqlab::lstm::LstmCache;
use zoneseg::seqlab::model::{forward_pass, ModelConfig, ModelParams, Weights};
use zoneseg::seqlab::{
    crf_nll_and_grad, lstm_cell_backward, lstm_cell_forward, sequence_loss_and_grad, CrfParams,
    LstmWeights,
};

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-4;
/// Denominator floor so gradients that are zero up to rounding compare absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub struct CrfInstance {
    pub emissions: Array2<f64>,
    pub crf: CrfParams,
}

/// Random CRF with L in 1..=5 and K in 1..=4. With `integer` the scores are
/// small integers so that ties between label sequences are common.
pub fn random_crf(rng: &mut ChaCha8Rng, integer: bool) -> CrfInstance {
    let len = rng.random_range(1..=5);
    let k = rng.random_range(1..=4);
    let draw = |rng: &mut ChaCha8Rng| {
        if integer {
            f64::from(rng.random_range(-2..=2))
        } else {
            rng.random_range(-3.0..3.0)
        }
    };
    let emissions = Array2::from_shape_simple_fn((len, k), || draw(rng));
    let transitions = Array2::from_shape_simple_fn((k, k), || draw(rng));
    let start = Array1::from_shape_simple_fn(k, || draw(rng));
    let end = Array1::from_shape_simple_fn(k, || draw(rng));
    CrfInstance {
        emissions,
        crf: CrfParams {
            transitions,
            start,
            end,
        },
    }
}

/// Every label sequence of length `len` over `k` labels, in lexicographic order.
pub fn all_sequences(len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn brute_score(inst: &CrfInstance, y: &[usize]) -> f64 {
    let mut s = inst.crf.start[y[0]] + inst.crf.end[y[y.len() - 1]];
    for (l, &label) in y.iter().enumerate() {
        s += inst.emissions[[l, label]];
    }
    for w in y.windows(2) {
        s += inst.crf.transitions[[w[0], w[1]]];
    }
    s
}

/// log Σ exp(score) by explicit enumeration, shifted by the max for stability.
pub fn brute_log_z(inst: &CrfInstance) -> f64 {
    let (len, k) = inst.emissions.dim();
    let scores: Vec<f64> = all_sequences(len, k).iter().map(|y| brute_score(inst, y)).collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// The lexicographically smallest maximizer and its score.
pub fn brute_argmax(inst: &CrfInstance) -> (Vec<usize>, f64) {
    let (len, k) = inst.emissions.dim();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for y in all_sequences(len, k) {
        let s = brute_score(inst, &y);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((y, s));
        }
    }
    best.expect("at least one sequence")
}

/// Position marginals by enumeration.
pub fn brute_marginals(inst: &CrfInstance) -> Array2<f64> {
    let (len, k) = inst.emissions.dim();
    let log_z = brute_log_z(inst);
    let mut m = Array2::zeros((len, k));
    for y in all_sequences(len, k) {
        let p = (brute_score(inst, &y) - log_z).exp();
        for (l, &label) in y.iter().enumerate() {
            m[[l, label]] += p;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FdResult {
    pub max_rel_error: f64,
    pub checked: usize,
}

impl FdResult {
    pub fn merge(self, other: FdResult) -> FdResult {
        FdResult {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            checked: self.checked + other.checked,
        }
    }

    pub fn passes(&self) -> bool {
        self.checked > 0 && self.max_rel_error < FD_REL_TOL
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Central differences of `f` over every coordinate of `x`.
pub fn fd_slice(x: &mut [f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> FdResult {
    assert_eq!(x.len(), analytic.len());
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = f(x);
        x[i] = orig - FD_STEP;
        let down = f(x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_error(analytic[i], numeric));
    }
    FdResult {
        max_rel_error: worst,
        checked: x.len(),
    }
}

/// Central differences over every tensor of `w`.
pub fn fd_weights(w: &Weights, analytic: &Weights, loss: impl Fn(&Weights) -> f64) -> FdResult {
    let grads: Vec<Vec<f64>> = analytic.tensors().into_iter().map(|(_, _, d)| d.to_vec()).collect();
    let mut probe = w.clone();
    let mut total = FdResult::default();
    for (t, g) in grads.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let orig = probe.tensors_mut()[t][i];
            probe.tensors_mut()[t][i] = orig + FD_STEP;
            let up = loss(&probe);
            probe.tensors_mut()[t][i] = orig - FD_STEP;
            let down = loss(&probe);
            probe.tensors_mut()[t][i] = orig;
            worst = worst.max(rel_error(g[i], (up - down) / (2.0 * FD_STEP)));
        }
        total = total.merge(FdResult {
            max_rel_error: worst,
            checked: g.len(),
        });
    }
    total
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0))
}

fn uniform1(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0))
}

/// LSTM cell: loss = r_h·h + r_c·c for random r; checks weights, x, h_prev, c_prev.
pub fn check_lstm_cell(rng: &mut ChaCha8Rng) -> FdResult {
    let d = rng.random_range(1..=4);
    let h = rng.random_range(1..=4);
    let w = LstmWeights {
        w_input: uniform(rng, (4 * h, d)),
        w_recurrent: uniform(rng, (4 * h, h)),
        bias: uniform1(rng, 4 * h),
    };
    let x = uniform1(rng, d);
    let h0 = uniform1(rng, h);
    let c0 = uniform1(rng, h);
    let rh = uniform1(rng, h);
    let rc = uniform1(rng, h);

    let loss = |w: &LstmWeights, x: &Array1<f64>, h0: &Array1<f64>, c0: &Array1<f64>| {
        let (hn, cn, _) = lstm_cell_forward(w, x.view(), h0.view(), c0.view()).unwrap();
        hn.dot(&rh) + cn.dot(&rc)
    };
    let (_, _, cache): (_, _, LstmCache) =
        lstm_cell_forward(&w, x.view(), h0.view(), c0.view()).unwrap();
    let mut g = LstmWeights::zeros(d, h);
    let inputs = lstm_cell_backward(&w, &cache, rh.view(), rc.view(), &mut g);

    let mut res = FdResult::default();
    {
        let mut probe = w.clone();
        let wi = g.w_input.as_slice().unwrap().to_vec();
        let mut buf = probe.w_input.as_slice().unwrap().to_vec();
        res = res.merge(fd_slice(&mut buf, &wi, |v| {
            probe.w_input.as_slice_mut().unwrap().copy_from_slice(v);
            loss(&probe, &x, &h0, &c0)
        }));
    }
    {
        let mut probe = w.clone();
        let wr = g.w_recurrent.as_slice().unwrap().to_vec();
        let mut buf = probe.w_recurrent.as_slice().unwrap().to_vec();
        res = res.merge(fd_slice(&mut buf, &wr, |v| {
            probe.w_recurrent.as_slice_mut().unwrap().copy_from_slice(v);
            loss(&probe, &x, &h0, &c0)
        }));
    }
    {
        let mut probe = w.clone();
        let b = g.bias.to_vec();
        let mut buf = probe.bias.to_vec();
        res = res.merge(fd_slice(&mut buf, &b, |v| {
            probe.bias.as_slice_mut().unwrap().copy_from_slice(v);
            loss(&probe, &x, &h0, &c0)
        }));
    }
    let mut xb = x.to_vec();
    res = res.merge(fd_slice(&mut xb, &inputs.dx.to_vec(), |v| {
        loss(&w, &Array1::from(v.to_vec()), &h0, &c0)
    }));
    let mut hb = h0.to_vec();
    res = res.merge(fd_slice(&mut hb, &inputs.dh_prev.to_vec(), |v| {
        loss(&w, &x, &Array1::from(v.to_vec()), &c0)
    }));
    let mut cb = c0.to_vec();
    res = res.merge(fd_slice(&mut cb, &inputs.dc_prev.to_vec(), |v| {
        loss(&w, &x, &h0, &Array1::from(v.to_vec()))
    }));
    res
}

/// CRF NLL with respect to emissions and all CRF tensors.
pub fn check_crf_nll(rng: &mut ChaCha8Rng) -> FdResult {
    let inst = random_crf(rng, false);
    let (len, k) = inst.emissions.dim();
    let gold: Vec<usize> = (0..len).map(|_| rng.random_range(0..k)).collect();
    // Oracle loss: enumeration, not the forward algorithm.
    let nll = |e: &Array2<f64>, crf: &CrfParams| {
        let i = CrfInstance {
            emissions: e.clone(),
            crf: crf.clone(),
        };
        brute_log_z(&i) - brute_score(&i, &gold)
    };
    let out = crf_nll_and_grad(inst.emissions.view(), &inst.crf, &gold).unwrap();
    let mut res = FdResult::default();

    let mut buf = inst.emissions.as_slice().unwrap().to_vec();
    res = res.merge(fd_slice(&mut buf, out.d_emissions.as_slice().unwrap(), |v| {
        nll(&Array2::from_shape_vec((len, k), v.to_vec()).unwrap(), &inst.crf)
    }));
    let mut buf = inst.crf.transitions.as_slice().unwrap().to_vec();
    res = res.merge(fd_slice(&mut buf, out.grads.transitions.as_slice().unwrap(), |v| {
        let mut c = inst.crf.clone();
        c.transitions = Array2::from_shape_vec((k, k), v.to_vec()).unwrap();
        nll(&inst.emissions, &c)
    }));
    let mut buf = inst.crf.start.to_vec();
    res = res.merge(fd_slice(&mut buf, &out.grads.start.to_vec(), |v| {
        let mut c = inst.crf.clone();
        c.start = Array1::from(v.to_vec());
        nll(&inst.emissions, &c)
    }));
    let mut buf = inst.crf.end.to_vec();
    res = res.merge(fd_slice(&mut buf, &out.grads.end.to_vec(), |v| {
        let mut c = inst.crf.clone();
        c.end = Array1::from(v.to_vec());
        nll(&inst.emissions, &c)
    }));
    res
}

/// Whole model (BiLSTM, projection, CRF) with a fixed dropout mask.
pub fn check_full_model(rng: &mut ChaCha8Rng) -> FdResult {
    let cfg = ModelConfig {
        input_dim: rng.random_range(1..=3),
        hidden: rng.random_range(1..=3),
        n_labels: rng.random_range(2..=3),
        dropout_rate: 0.25,
        use_crf: true,
    };
    let len = rng.random_range(1..=4);
    let mut params = ModelParams::init(cfg, rng).unwrap();
    for t in params.weights.tensors_mut().into_iter().skip(8) {
        for v in t.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let inputs = uniform(rng, (len, cfg.input_dim));
    let gold: Vec<usize> = (0..len).map(|_| rng.random_range(0..cfg.n_labels)).collect();
    let mask = Array2::from_shape_simple_fn((len, 2 * cfg.hidden), || {
        if rng.random_bool(0.75) {
            1.0 / 0.75
        } else {
            0.0
        }
    });

    let (_, grads) = sequence_loss_and_grad(&params, inputs.view(), &gold, Some(mask.clone())).unwrap();
    // Oracle loss: model forward pass, then CRF NLL by enumeration.
    let loss = |w: &Weights| {
        let p = ModelParams::new(cfg, w.clone()).unwrap();
        let e = forward_pass(&p, inputs.view(), Some(mask.clone())).unwrap().emissions;
        let i = CrfInstance {
            emissions: e,
            crf: w.crf.clone(),
        };
        brute_log_z(&i) - brute_score(&i, &gold)
    };
    fd_weights(&params.weights, &grads, loss)
}
