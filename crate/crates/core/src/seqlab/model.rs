use super::crf::{argmax_decode, crf_nll_and_grad, crf_viterbi, CrfParams};
use super::lstm::{backward_direction, run_direction, DirectionPass, LstmWeights};
use super::SeqlabError;
use ndarray::{s, concatenate, Array1, Array2, ArrayView2, Axis};
use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.25;

/// Per-line label scores, L × K.
pub type EmissionMatrix = Array2<f64>;

/// Shape and decoding configuration; frozen for the lifetime of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub n_labels: usize,
    pub dropout_rate: f64,
    /// Decode with Viterbi; when false, per-line argmax and CRF tensors stay at zero.
    pub use_crf: bool,
}

impl ModelConfig {
    pub fn new(input_dim: usize, n_labels: usize) -> Self {
        Self {
            input_dim,
            hidden: DEFAULT_HIDDEN,
            n_labels,
            dropout_rate: DEFAULT_DROPOUT,
            use_crf: true,
        }
    }
}

/// Every trainable tensor. Also used for gradients and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub forward: LstmWeights,
    pub backward: LstmWeights,
    /// 2H × K
    pub proj_weight: Array2<f64>,
    /// K
    pub proj_bias: Array1<f64>,
    pub crf: CrfParams,
}

/// Fixed serialization and iteration order of the tensors.
pub const TENSOR_NAMES: [&str; 11] = [
    "lstm.forward.w_input",
    "lstm.forward.w_recurrent",
    "lstm.forward.bias",
    "lstm.backward.w_input",
    "lstm.backward.w_recurrent",
    "lstm.backward.bias",
    "projection.weight",
    "projection.bias",
    "crf.transitions",
    "crf.start",
    "crf.end",
];

impl Weights {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            forward: LstmWeights::zeros(cfg.input_dim, cfg.hidden),
            backward: LstmWeights::zeros(cfg.input_dim, cfg.hidden),
            proj_weight: Array2::zeros((2 * cfg.hidden, cfg.n_labels)),
            proj_bias: Array1::zeros(cfg.n_labels),
            crf: CrfParams::zeros(cfg.n_labels),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            forward: LstmWeights::zeros(self.forward.input_dim(), self.forward.hidden()),
            backward: LstmWeights::zeros(self.backward.input_dim(), self.backward.hidden()),
            proj_weight: Array2::zeros(self.proj_weight.raw_dim()),
            proj_bias: Array1::zeros(self.proj_bias.raw_dim()),
            crf: CrfParams::zeros(self.crf.n_labels()),
        }
    }

    /// `(name, shape, values)` in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        fn t<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> (Vec<usize>, &[f64]) {
            (a.shape().to_vec(), a.as_slice().expect("standard layout"))
        }
        let parts = [
            t(&self.forward.w_input),
            t(&self.forward.w_recurrent),
            t(&self.forward.bias),
            t(&self.backward.w_input),
            t(&self.backward.w_recurrent),
            t(&self.backward.bias),
            t(&self.proj_weight),
            t(&self.proj_bias),
            t(&self.crf.transitions),
            t(&self.crf.start),
            t(&self.crf.end),
        ];
        TENSOR_NAMES
            .iter()
            .zip(parts)
            .map(|(&n, (shape, data))| (n, shape, data))
            .collect()
    }

    /// Mutable views in [`TENSOR_NAMES`] order.
    pub fn tensors_mut(&mut self) -> [&mut [f64]; 11] {
        fn m<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        [
            m(&mut self.forward.w_input),
            m(&mut self.forward.w_recurrent),
            m(&mut self.forward.bias),
            m(&mut self.backward.w_input),
            m(&mut self.backward.w_recurrent),
            m(&mut self.backward.bias),
            m(&mut self.proj_weight),
            m(&mut self.proj_bias),
            m(&mut self.crf.transitions),
            m(&mut self.crf.start),
            m(&mut self.crf.end),
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, d)| d.iter().all(|x| x.is_finite()))
    }

    fn check(&self, cfg: &ModelConfig) -> Result<(), SeqlabError> {
        let expected = Weights::zeros(cfg);
        for ((name, a, _), (_, b, _)) in self.tensors().iter().zip(expected.tensors()) {
            if *a != b {
                return Err(SeqlabError::Shape(format!(
                    "{name}: shape {a:?}, expected {b:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Trainable BiLSTM + CRF labeler.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    pub weights: Weights,
}

impl ModelParams {
    pub fn new(config: ModelConfig, weights: Weights) -> Result<Self, SeqlabError> {
        if config.input_dim == 0 || config.hidden == 0 || config.n_labels == 0 {
            return Err(SeqlabError::Shape("model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&config.dropout_rate) {
            return Err(SeqlabError::Config(format!(
                "dropout rate {} outside [0, 1)",
                config.dropout_rate
            )));
        }
        weights.check(&config)?;
        if !weights.all_finite() {
            return Err(SeqlabError::NonFinite);
        }
        Ok(Self { config, weights })
    }

    /// LSTM and projection weights uniform in ±1/√hidden, forget-gate bias 1,
    /// CRF tensors zero.
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Self, SeqlabError> {
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let mut w = Weights::zeros(&config);
        {
            let t = w.tensors_mut();
            for slice in t.into_iter().take(8) {
                for x in slice.iter_mut() {
                    *x = rng.random_range(-bound..=bound);
                }
            }
        }
        let h = config.hidden;
        w.forward.bias.slice_mut(s![h..2 * h]).fill(1.0);
        w.backward.bias.slice_mut(s![h..2 * h]).fill(1.0);
        Self::new(config, w)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_inputs(&self, inputs: ArrayView2<f64>) -> Result<(), SeqlabError> {
        if inputs.nrows() == 0 {
            return Err(SeqlabError::EmptySequence);
        }
        if inputs.ncols() != self.config.input_dim {
            return Err(SeqlabError::DimMismatch {
                expected: self.config.input_dim,
                found: inputs.ncols(),
            });
        }
        Ok(())
    }
}

/// Inverted-dropout mask: entries are 0 or 1/(1 − rate).
pub fn dropout_mask(rng: &mut impl Rng, rows: usize, cols: usize, rate: f64) -> Array2<f64> {
    if rate <= 0.0 {
        return Array2::ones((rows, cols));
    }
    let keep = Bernoulli::new(1.0 - rate).expect("rate in [0, 1)");
    let scale = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || {
        if keep.sample(rng) {
            scale
        } else {
            0.0
        }
    })
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub emissions: EmissionMatrix,
    forward: DirectionPass,
    backward: DirectionPass,
    /// Concatenated states after dropout, L × 2H.
    features: Array2<f64>,
    mask: Option<Array2<f64>>,
}

/// Forward pass with an explicit dropout mask (L × 2H) or none.
pub fn forward_pass(
    params: &ModelParams,
    inputs: ArrayView2<f64>,
    mask: Option<Array2<f64>>,
) -> Result<ForwardPass, SeqlabError> {
    params.check_inputs(inputs)?;
    let w = &params.weights;
    let fwd = run_direction(&w.forward, inputs, false);
    let bwd = run_direction(&w.backward, inputs, true);
    let mut features = concatenate(Axis(1), &[fwd.hidden.view(), bwd.hidden.view()])
        .expect("equal row counts");
    if let Some(m) = &mask {
        if m.dim() != features.dim() {
            return Err(SeqlabError::Shape(format!(
                "dropout mask {:?}, expected {:?}",
                m.dim(),
                features.dim()
            )));
        }
        features *= m;
    }
    let emissions = features.dot(&w.proj_weight) + &w.proj_bias;
    Ok(ForwardPass {
        emissions,
        forward: fwd,
        backward: bwd,
        features,
        mask,
    })
}

/// Gradients of the BiLSTM and projection given `dL/d emissions`.
/// CRF entries of the result are zero.
pub fn backward_pass(
    params: &ModelParams,
    inputs: ArrayView2<f64>,
    pass: &ForwardPass,
    d_emissions: ArrayView2<f64>,
) -> Weights {
    let w = &params.weights;
    let h = params.config.hidden;
    let mut grads = w.zeros_like();
    grads.proj_weight = pass.features.t().dot(&d_emissions);
    grads.proj_bias = d_emissions.sum_axis(Axis(0));
    let mut d_features = d_emissions.dot(&w.proj_weight.t());
    if let Some(m) = &pass.mask {
        d_features *= m;
    }
    backward_direction(
        &w.forward,
        &pass.forward,
        inputs,
        d_features.slice(s![.., ..h]),
        &mut grads.forward,
    );
    backward_direction(
        &w.backward,
        &pass.backward,
        inputs,
        d_features.slice(s![.., h..]),
        &mut grads.backward,
    );
    grads
}

/// Emission scores for a sequence of line embeddings. Dropout is applied to
/// the concatenated states only when `train_mode`.
pub fn bilstm_forward(
    params: &ModelParams,
    inputs: ArrayView2<f64>,
    train_mode: bool,
    rng: &mut impl Rng,
) -> Result<EmissionMatrix, SeqlabError> {
    let mask = train_mode.then(|| {
        dropout_mask(
            rng,
            inputs.nrows(),
            2 * params.config.hidden,
            params.config.dropout_rate,
        )
    });
    Ok(forward_pass(params, inputs, mask)?.emissions)
}

/// CRF negative log-likelihood of `gold` and the gradient of every tensor.
pub fn sequence_loss_and_grad(
    params: &ModelParams,
    inputs: ArrayView2<f64>,
    gold: &[usize],
    mask: Option<Array2<f64>>,
) -> Result<(f64, Weights), SeqlabError> {
    let pass = forward_pass(params, inputs, mask)?;
    let crf_out = crf_nll_and_grad(pass.emissions.view(), &params.weights.crf, gold)?;
    let mut grads = backward_pass(params, inputs, &pass, crf_out.d_emissions.view());
    if params.config.use_crf {
        grads.crf = crf_out.grads;
    }
    Ok((crf_out.loss, grads))
}

/// Label indices for one email; inference is dropout-free.
pub fn predict(params: &ModelParams, inputs: ArrayView2<f64>) -> Result<Vec<usize>, SeqlabError> {
    let emissions = forward_pass(params, inputs, None)?.emissions;
    if params.config.use_crf {
        Ok(crf_viterbi(emissions.view(), &params.weights.crf)?.0)
    } else {
        Ok(argmax_decode(emissions.view()))
    }
}

/// Stack line embeddings into an L × D matrix.
pub fn stack_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Array2<f64>, SeqlabError> {
    let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    let mut out = Array2::zeros((rows.len(), dim));
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(SeqlabError::DimMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        out.row_mut(i).assign(&ndarray::ArrayView1::from(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(use_crf: bool) -> ModelParams {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden: 4,
            n_labels: 5,
            dropout_rate: 0.25,
            use_crf,
        };
        ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap()
    }

    fn inputs(len: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((len, 3), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn init_scheme() {
        let p = small(true);
        let bound = 0.5;
        let w = &p.weights;
        assert!(w.forward.w_input.iter().all(|x| x.abs() <= bound));
        assert!(w.proj_weight.iter().all(|x| x.abs() <= bound));
        assert!(w.forward.bias.slice(s![4..8]).iter().all(|&x| x == 1.0));
        assert!(w.backward.bias.slice(s![4..8]).iter().all(|&x| x == 1.0));
        assert!(w.crf.transitions.iter().all(|&x| x == 0.0));
        assert!(w.crf.start.iter().chain(w.crf.end.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn default_config() {
        let c = ModelConfig::new(16, 15);
        assert_eq!(c.hidden, 64);
        assert_eq!(c.dropout_rate, 0.25);
        assert!(c.use_crf);
    }

    #[test]
    fn single_line_emissions() {
        let p = small(true);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = bilstm_forward(&p, inputs(1, 1).view(), false, &mut rng).unwrap();
        assert_eq!(e.dim(), (1, 5));
    }

    #[test]
    fn inference_is_deterministic() {
        let p = small(true);
        let x = inputs(6, 2);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = bilstm_forward(&p, x.view(), false, &mut r1).unwrap();
        let b = bilstm_forward(&p, x.view(), false, &mut r2).unwrap();
        assert_eq!(a, b);
        assert_eq!(predict(&p, x.view()).unwrap(), predict(&p, x.view()).unwrap());
        assert_eq!(predict(&p, x.view()).unwrap().len(), 6);
    }

    #[test]
    fn train_mode_applies_dropout() {
        let p = small(true);
        let x = inputs(6, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = bilstm_forward(&p, x.view(), false, &mut rng).unwrap();
        let b = bilstm_forward(&p, x.view(), true, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn dropout_mask_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = dropout_mask(&mut rng, 200, 50, 0.25);
        let kept = m.iter().filter(|&&v| v != 0.0).count() as f64 / m.len() as f64;
        assert!((kept - 0.75).abs() < 0.02, "{kept}");
        assert!(m.iter().all(|&v| v == 0.0 || (v - 4.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn wrong_input_dim() {
        let p = small(true);
        let x = Array2::zeros((2, 4));
        assert!(matches!(
            predict(&p, x.view()),
            Err(SeqlabError::DimMismatch { expected: 3, found: 4 })
        ));
    }

    #[test]
    fn argmax_decoding_without_crf() {
        let p = small(false);
        let x = inputs(5, 3);
        let e = forward_pass(&p, x.view(), None).unwrap().emissions;
        assert_eq!(predict(&p, x.view()).unwrap(), argmax_decode(e.view()));
    }

    #[test]
    fn frozen_crf_gets_no_gradient() {
        let p = small(false);
        let (_, g) = sequence_loss_and_grad(&p, inputs(4, 9).view(), &[0, 1, 2, 3], None).unwrap();
        assert!(g.crf.transitions.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stack_rows_checks_dims() {
        assert!(stack_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        let m = stack_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1).to_vec(), vec![3.0, 4.0]);
    }
}
