//! Single-layer LSTM with stacked gate weights.
//!
//! Gate blocks are stacked in the order input, forget, candidate, output:
//! rows `[0, H)` of every weight tensor belong to the input gate, `[H, 2H)` to
//! the forget gate and so on.

use super::SeqlabError;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// 4H × D
    pub w_input: Array2<f64>,
    /// 4H × H
    pub w_recurrent: Array2<f64>,
    /// 4H
    pub bias: Array1<f64>,
}

impl LstmWeights {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w_input: Array2::zeros((4 * hidden, input_dim)),
            w_recurrent: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.bias.len() / 4
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.ncols()
    }

    fn check(&self, x: usize, h: usize, c: usize) -> Result<(), SeqlabError> {
        let hid = self.hidden();
        if self.w_input.nrows() != 4 * hid || self.w_recurrent.dim() != (4 * hid, hid) {
            return Err(SeqlabError::Shape("inconsistent LSTM weight shapes".into()));
        }
        if x != self.input_dim() || h != hid || c != hid {
            return Err(SeqlabError::Shape(format!(
                "LSTM cell expects x:{} h:{hid} c:{hid}, got x:{x} h:{h} c:{c}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Values saved by the forward step for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    /// Gate activations after their nonlinearity: i, f, g, o stacked.
    pub gates: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
}

/// Gradients flowing out of one cell step into its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellInputGrads {
    pub dx: Array1<f64>,
    pub dh_prev: Array1<f64>,
    pub dc_prev: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One step given the already projected input `W_in · x`.
fn step(
    w: &LstmWeights,
    x: ArrayView1<f64>,
    input_proj: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> (Array1<f64>, LstmCache) {
    let hid = w.hidden();
    let mut gates = w.w_recurrent.dot(&h_prev);
    gates += &input_proj;
    gates += &w.bias;
    for (k, z) in gates.iter_mut().enumerate() {
        *z = if (2 * hid..3 * hid).contains(&k) {
            z.tanh()
        } else {
            sigmoid(*z)
        };
    }
    let (i, f, g, o) = (
        gates.slice(s![..hid]),
        gates.slice(s![hid..2 * hid]),
        gates.slice(s![2 * hid..3 * hid]),
        gates.slice(s![3 * hid..]),
    );
    let c = &f * &c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let cache = LstmCache {
        x: x.to_owned(),
        h_prev: h_prev.to_owned(),
        c_prev: c_prev.to_owned(),
        gates,
        c,
        tanh_c,
    };
    (h, cache)
}

/// Standard LSTM recurrence for one time step.
pub fn lstm_cell_forward(
    w: &LstmWeights,
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>, LstmCache), SeqlabError> {
    w.check(x.len(), h_prev.len(), c_prev.len())?;
    let proj = w.w_input.dot(&x);
    let (h, cache) = step(w, x, proj.view(), h_prev, c_prev);
    let c = cache.c.clone();
    Ok((h, c, cache))
}

/// Pre-activation gradient `dL/dz` of one step, plus `dh_prev` and `dc_prev`.
fn step_backward(
    w: &LstmWeights,
    recurrent_t: ArrayView2<f64>,
    cache: &LstmCache,
    dh: ArrayView1<f64>,
    dc: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let hid = w.hidden();
    let g = &cache.gates;
    let (i, f, gg, o) = (
        g.slice(s![..hid]),
        g.slice(s![hid..2 * hid]),
        g.slice(s![2 * hid..3 * hid]),
        g.slice(s![3 * hid..]),
    );
    let mut dc_total = dc.to_owned();
    Zip::from(&mut dc_total)
        .and(&dh)
        .and(&o)
        .and(&cache.tanh_c)
        .for_each(|d, &dh, &o, &tc| *d += dh * o * (1.0 - tc * tc));

    let mut dz = Array1::zeros(4 * hid);
    for k in 0..hid {
        let dct = dc_total[k];
        let di = dct * gg[k];
        let df = dct * cache.c_prev[k];
        let dg = dct * i[k];
        let d_o = dh[k] * cache.tanh_c[k];
        dz[k] = di * i[k] * (1.0 - i[k]);
        dz[hid + k] = df * f[k] * (1.0 - f[k]);
        dz[2 * hid + k] = dg * (1.0 - gg[k] * gg[k]);
        dz[3 * hid + k] = d_o * o[k] * (1.0 - o[k]);
    }
    let dc_prev = &dc_total * &f;
    let dh_prev = recurrent_t.dot(&dz);
    (dz, dh_prev, dc_prev)
}

/// Backpropagate one step, accumulating weight gradients into `grads`.
pub fn lstm_cell_backward(
    w: &LstmWeights,
    cache: &LstmCache,
    dh: ArrayView1<f64>,
    dc: ArrayView1<f64>,
    grads: &mut LstmWeights,
) -> CellInputGrads {
    let recurrent_t = w.w_recurrent.t().as_standard_layout().into_owned();
    let (dz, dh_prev, dc_prev) = step_backward(w, recurrent_t.view(), cache, dh, dc);
    let dz_col = dz.view().insert_axis(Axis(1));
    grads
        .w_input
        .scaled_add(1.0, &dz_col.dot(&cache.x.view().insert_axis(Axis(0))));
    grads
        .w_recurrent
        .scaled_add(1.0, &dz_col.dot(&cache.h_prev.view().insert_axis(Axis(0))));
    grads.bias += &dz;
    CellInputGrads {
        dx: w.w_input.t().dot(&dz),
        dh_prev,
        dc_prev,
    }
}

/// Hidden states of one direction over a whole sequence.
#[derive(Debug, Clone)]
pub struct DirectionPass {
    /// L × H, indexed by sequence position regardless of direction.
    pub hidden: Array2<f64>,
    /// Per position.
    pub caches: Vec<LstmCache>,
    pub reverse: bool,
}

/// Run the recurrence over `inputs` (L × D), right to left when `reverse`.
pub fn run_direction(w: &LstmWeights, inputs: ArrayView2<f64>, reverse: bool) -> DirectionPass {
    let (len, hid) = (inputs.nrows(), w.hidden());
    let proj = inputs.dot(&w.w_input.t());
    let mut hidden = Array2::zeros((len, hid));
    let mut caches: Vec<Option<LstmCache>> = vec![None; len];
    let mut h = Array1::zeros(hid);
    let mut c = Array1::zeros(hid);
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    };
    for t in order {
        let (h_new, cache) = step(w, inputs.row(t), proj.row(t), h.view(), c.view());
        c = cache.c.clone();
        hidden.row_mut(t).assign(&h_new);
        h = h_new;
        caches[t] = Some(cache);
    }
    DirectionPass {
        hidden,
        caches: caches.into_iter().map(|c| c.expect("every step visited")).collect(),
        reverse,
    }
}

/// Backpropagation through time for one direction given `dL/dh` per
/// position (L × H). Accumulates into `grads`.
pub fn backward_direction(
    w: &LstmWeights,
    pass: &DirectionPass,
    inputs: ArrayView2<f64>,
    d_hidden: ArrayView2<f64>,
    grads: &mut LstmWeights,
) {
    let (len, hid) = (pass.hidden.nrows(), w.hidden());
    let mut dz_all = Array2::zeros((len, 4 * hid));
    let mut h_prev_all = Array2::zeros((len, hid));
    let mut dh_next = Array1::zeros(hid);
    let mut dc_next = Array1::zeros(hid);
    // Contiguous copy: a strided transposed mat-vec dominates otherwise.
    let recurrent_t = w.w_recurrent.t().as_standard_layout().into_owned();
    let order: Box<dyn Iterator<Item = usize>> = if pass.reverse {
        Box::new(0..len)
    } else {
        Box::new((0..len).rev())
    };
    for t in order {
        let cache = &pass.caches[t];
        let dh = &d_hidden.row(t) + &dh_next;
        let (dz, dh_prev, dc_prev) =
            step_backward(w, recurrent_t.view(), cache, dh.view(), dc_next.view());
        dz_all.row_mut(t).assign(&dz);
        h_prev_all.row_mut(t).assign(&cache.h_prev);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    grads.w_input += &dz_all.t().dot(&inputs);
    grads.w_recurrent += &dz_all.t().dot(&h_prev_all);
    grads.bias += &dz_all.sum_axis(Axis(0));
}
