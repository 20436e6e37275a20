//! Stacked LSTM with a linear / batch-norm / ReLU / linear head.
//!
//! Shapes are time-major: a batch of `B` windows of length `T` is stored as a
//! `(T*B) x width` matrix whose rows `t*B .. (t+1)*B` hold step `t`. Gate
//! pre-activations are laid out `[input, forget, cell, output]`, each
//! `hidden_width` columns wide.
//!
//! Dropout sits between consecutive LSTM layers and masks every element of
//! the lower layer's output sequence. The last layer feeds the head directly.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetworkConfig;
use crate::error::{Error, Result};

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Gradients (or any per-parameter quantity) shaped like the network parameters.
pub type ParamGrads = Vec<Array2<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    config: NetworkConfig,
    /// Per layer `w_ih (4H x in)`, `w_hh (4H x H)`, `b (1 x 4H)`; then the head
    /// `w1 (H x H)`, `b1`, `bn_gamma`, `bn_beta` (each `1 x H`), `w2 (1 x H)`, `b2 (1 x 1)`.
    params: Vec<Array2<f64>>,
    bn_running_mean: Vec<f64>,
    bn_running_var: Vec<f64>,
    mode: Mode,
}

/// Inverted-dropout multipliers (`0` or `1/(1-p)`) for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// Masks on the output sequence of every layer except the last, `(T*B) x H`.
    pub between: Vec<Array2<f64>>,
}

impl DropoutMasks {
    /// All-ones masks (dropout disabled).
    pub fn identity(config: &NetworkConfig, batch: usize) -> Self {
        let (t, h) = (config.input_window, config.hidden_width);
        Self {
            between: (1..config.num_lstm_layers).map(|_| Array2::ones((t * batch, h))).collect(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(config: &NetworkConfig, batch: usize, rng: &mut R) -> Self {
        let p = config.dropout_rate;
        let mut masks = Self::identity(config, batch);
        if p > 0.0 {
            let keep = 1.0 / (1.0 - p);
            for m in &mut masks.between {
                m.iter_mut().for_each(|v| *v = if rng.random::<f64>() < p { 0.0 } else { keep });
            }
        }
        masks
    }
}

#[derive(Debug, Clone)]
struct LayerTape {
    /// Layer input after dropout, `(T*B) x in`.
    x: Array2<f64>,
    /// Gate activations, `(T*B) x 4H`.
    acts: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
}

#[derive(Debug, Clone)]
struct HeadTape {
    a: Array2<f64>,
    x_hat: Array2<f64>,
    v: Array2<f64>,
    r: Array2<f64>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

/// Intermediate state of a train-mode forward pass, consumed by backward.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    layers: Vec<LayerTape>,
    head: HeadTape,
    masks: DropoutMasks,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub outputs: Vec<f64>,
    /// Present only for train-mode passes.
    pub tape: Option<Tape>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn xavier<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound))
}

impl LstmNetwork {
    /// Xavier-uniform weights, zero biases except forget-gate biases of 1.
    pub fn new<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_width;
        let mut params = Vec::new();
        for l in 0..config.num_lstm_layers {
            let input = if l == 0 { 1 } else { h };
            params.push(xavier(4 * h, input, input, h, rng));
            params.push(xavier(4 * h, h, h, h, rng));
            let mut b = Array2::zeros((1, 4 * h));
            b.slice_mut(s![.., h..2 * h]).fill(1.0);
            params.push(b);
        }
        params.push(xavier(h, h, h, h, rng));
        params.push(Array2::zeros((1, h)));
        params.push(Array2::ones((1, h)));
        params.push(Array2::zeros((1, h)));
        params.push(xavier(1, h, h, 1, rng));
        params.push(Array2::zeros((1, 1)));
        Ok(Self {
            config,
            params,
            bn_running_mean: vec![0.0; h],
            bn_running_var: vec![1.0; h],
            mode: Mode::Train,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn bn_running_stats(&self) -> (&[f64], &[f64]) {
        (&self.bn_running_mean, &self.bn_running_var)
    }

    /// Human-readable name of each parameter tensor, in storage order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.config.num_lstm_layers {
            names.push(format!("lstm{l}.w_ih"));
            names.push(format!("lstm{l}.w_hh"));
            names.push(format!("lstm{l}.bias"));
        }
        for n in ["head.w1", "head.b1", "head.bn_gamma", "head.bn_beta", "head.w2", "head.b2"] {
            names.push(n.to_string());
        }
        names
    }

    /// Checks parameter shapes and statistics lengths against the config.
    pub fn validate_layout(&self) -> Result<()> {
        self.config.validate()?;
        let h = self.config.hidden_width;
        let mut shapes = Vec::new();
        for l in 0..self.config.num_lstm_layers {
            shapes.push((4 * h, if l == 0 { 1 } else { h }));
            shapes.push((4 * h, h));
            shapes.push((1, 4 * h));
        }
        shapes.extend([(h, h), (1, h), (1, h), (1, h), (1, h), (1, 1)]);
        let actual: Vec<_> = self.params.iter().map(|p| p.dim()).collect();
        if actual != shapes || self.bn_running_mean.len() != h || self.bn_running_var.len() != h {
            return Err(Error::invalid("network parameters do not match the configured layout"));
        }
        if !self.is_finite() {
            return Err(Error::invalid("network parameters contain non-finite values"));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    fn head_index(&self) -> usize {
        3 * self.config.num_lstm_layers
    }

    fn check_windows(&self, windows: &ArrayView2<f64>) -> Result<()> {
        if windows.ncols() != self.config.input_window {
            return Err(Error::invalid(format!(
                "window length {} does not match the network input window {}",
                windows.ncols(),
                self.config.input_window
            )));
        }
        if windows.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if windows.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("window contains non-finite values"));
        }
        Ok(())
    }

    /// Eval-mode output for one window. Never mutates the network.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        let view = ArrayView2::from_shape((1, window.len()), window)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.predict_batch(view)?[0])
    }

    /// Eval-mode outputs for a `B x T` batch of windows.
    pub fn predict_batch(&self, windows: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_windows(&windows)?;
        let masks = DropoutMasks::identity(&self.config, windows.nrows());
        Ok(self.run(windows, &masks, false).0)
    }

    /// Forward pass honouring the mode flag. Train mode draws dropout masks
    /// from `rng`, normalizes with batch statistics and records a tape; eval
    /// mode is identical to [`LstmNetwork::predict_batch`].
    pub fn forward<R: Rng + ?Sized>(&self, windows: ArrayView2<f64>, rng: &mut R) -> Result<ForwardPass> {
        match self.mode {
            Mode::Eval => Ok(ForwardPass {
                outputs: self.predict_batch(windows)?,
                tape: None,
            }),
            Mode::Train => {
                let masks = DropoutMasks::draw(&self.config, windows.nrows(), rng);
                self.forward_with_masks(windows, masks)
            }
        }
    }

    /// Train-mode forward pass with caller-supplied dropout masks.
    pub fn forward_with_masks(&self, windows: ArrayView2<f64>, masks: DropoutMasks) -> Result<ForwardPass> {
        self.check_windows(&windows)?;
        let b = windows.nrows();
        if b < 2 {
            return Err(Error::invalid("train-mode batch norm needs at least 2 windows per batch"));
        }
        let (t, h) = (self.config.input_window, self.config.hidden_width);
        if masks.between.len() + 1 != self.config.num_lstm_layers
            || masks.between.iter().any(|m| m.dim() != (t * b, h))
        {
            return Err(Error::invalid("dropout masks do not match the batch shape"));
        }
        let (outputs, tape) = self.run(windows, &masks, true);
        let (layers, head) = tape.expect("train pass records a tape");
        Ok(ForwardPass {
            outputs,
            tape: Some(Tape { batch: b, layers, head, masks }),
        })
    }

    #[allow(clippy::type_complexity)]
    fn run(&self, windows: ArrayView2<f64>, masks: &DropoutMasks, train: bool) -> (Vec<f64>, Option<(Vec<LayerTape>, HeadTape)>) {
        let b = windows.nrows();
        let t_len = self.config.input_window;
        let h = self.config.hidden_width;

        // time-major input column
        let mut x = Array2::zeros((t_len * b, 1));
        for t in 0..t_len {
            for i in 0..b {
                x[[t * b + i, 0]] = windows[[i, t]];
            }
        }

        let mut layers = Vec::with_capacity(self.config.num_lstm_layers);
        for l in 0..self.config.num_lstm_layers {
            let tape = self.layer_forward(l, x, b);
            x = if l + 1 < self.config.num_lstm_layers {
                &tape.h * &masks.between[l]
            } else {
                Array2::zeros((0, 0))
            };
            layers.push(tape);
        }

        let last = layers.last().expect("at least one layer");
        let a = last.h.slice(s![(t_len - 1) * b.., ..]).to_owned();

        let k = self.head_index();
        let (w1, b1, gamma, beta, w2, b2) = (
            &self.params[k],
            &self.params[k + 1],
            &self.params[k + 2],
            &self.params[k + 3],
            &self.params[k + 4],
            &self.params[k + 5],
        );
        let u = a.dot(&w1.t()) + b1;
        let (mean, var): (Vec<f64>, Vec<f64>) = if train {
            let m = u.mean_axis(Axis(0)).expect("non-empty batch");
            let v = u.var_axis(Axis(0), 0.0);
            (m.to_vec(), v.to_vec())
        } else {
            (self.bn_running_mean.clone(), self.bn_running_var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut x_hat = u;
        for mut row in x_hat.rows_mut() {
            for j in 0..h {
                row[j] = (row[j] - mean[j]) * inv_std[j];
            }
        }
        let v = &x_hat * gamma + beta;
        let r = v.mapv(|z| z.max(0.0));
        let y = r.dot(&w2.t()) + b2;
        let outputs = y.column(0).to_vec();

        let tape = train.then(|| {
            (
                layers,
                HeadTape {
                    a,
                    x_hat,
                    v,
                    r,
                    inv_std,
                    batch_mean: mean,
                    batch_var: var,
                },
            )
        });
        (outputs, tape)
    }

    fn layer_forward(&self, l: usize, x: Array2<f64>, b: usize) -> LayerTape {
        let h = self.config.hidden_width;
        let t_len = self.config.input_window;
        let (w_ih, w_hh, bias) = (&self.params[3 * l], &self.params[3 * l + 1], &self.params[3 * l + 2]);

        // input contributions for every step in one product
        let mut acts = Array2::<f64>::zeros((t_len * b, 4 * h));
        acts.rows_mut().into_iter().for_each(|mut r| r.assign(&bias.row(0)));
        general_mat_mul(1.0, &x, &w_ih.t(), 1.0, &mut acts);
        let mut c = Array2::<f64>::zeros((t_len * b, h));
        let mut tanh_c = Array2::<f64>::zeros((t_len * b, h));
        let mut hs = Array2::<f64>::zeros((t_len * b, h));
        let g4 = 4 * h;

        for t in 0..t_len {
            if t > 0 {
                let prev = hs.slice(s![(t - 1) * b..t * b, ..]);
                let mut z = acts.slice_mut(s![t * b..(t + 1) * b, ..]);
                general_mat_mul(1.0, &prev, &w_hh.t(), 1.0, &mut z);
            }
            let acts_s = acts.as_slice_mut().expect("contiguous");
            let c_s = c.as_slice_mut().expect("contiguous");
            let tc_s = tanh_c.as_slice_mut().expect("contiguous");
            let h_s = hs.as_slice_mut().expect("contiguous");
            for row in t * b..(t + 1) * b {
                let z = &mut acts_s[row * g4..(row + 1) * g4];
                for v in &mut z[..2 * h] {
                    *v = sigmoid(*v);
                }
                for v in &mut z[2 * h..3 * h] {
                    *v = v.tanh();
                }
                for v in &mut z[3 * h..] {
                    *v = sigmoid(*v);
                }
                let (ig, rest) = z.split_at(h);
                let (fg, rest) = rest.split_at(h);
                let (gg, og) = rest.split_at(h);
                let (c_head, c_tail) = c_s.split_at_mut(row * h);
                let c_row = &mut c_tail[..h];
                let c_prev = if t > 0 { Some(&c_head[(row - b) * h..(row - b + 1) * h]) } else { None };
                let tc_row = &mut tc_s[row * h..(row + 1) * h];
                let h_row = &mut h_s[row * h..(row + 1) * h];
                for j in 0..h {
                    let cp = c_prev.map_or(0.0, |p| p[j]);
                    let cv = fg[j] * cp + ig[j] * gg[j];
                    let tc = cv.tanh();
                    c_row[j] = cv;
                    tc_row[j] = tc;
                    h_row[j] = og[j] * tc;
                }
            }
        }
        LayerTape { x, acts, c, tanh_c, h: hs }
    }

    /// Updates batch-norm running statistics (momentum 0.1, unbiased batch
    /// variance) from a train-mode pass.
    pub fn commit_batch_stats(&mut self, pass: &ForwardPass) {
        let Some(tape) = &pass.tape else { return };
        let m = self.config.bn_momentum;
        let n = tape.batch as f64;
        for j in 0..self.config.hidden_width {
            self.bn_running_mean[j] = (1.0 - m) * self.bn_running_mean[j] + m * tape.head.batch_mean[j];
            let unbiased = tape.head.batch_var[j] * n / (n - 1.0);
            self.bn_running_var[j] = (1.0 - m) * self.bn_running_var[j] + m * unbiased;
        }
    }

    /// Exact gradients of `sum_i upstream[i] * output[i]` with respect to
    /// every parameter, through the recorded dropout masks and batch statistics.
    pub fn backward(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<ParamGrads> {
        let tape = pass
            .tape
            .as_ref()
            .ok_or_else(|| Error::invalid("backward needs a recorded train-mode forward pass"))?;
        let b = tape.batch;
        if upstream.len() != b {
            return Err(Error::invalid(format!(
                "upstream gradient has {} entries for a batch of {b}",
                upstream.len()
            )));
        }
        let h = self.config.hidden_width;
        let t_len = self.config.input_window;
        let nl = self.config.num_lstm_layers;
        let k = self.head_index();
        let mut grads: ParamGrads = self.params.iter().map(|p| Array2::zeros(p.dim())).collect();

        // head
        let head = &tape.head;
        let dy = Array2::from_shape_vec((b, 1), upstream.to_vec()).expect("shape");
        grads[k + 4] = dy.t().dot(&head.r);
        grads[k + 5] = Array2::from_elem((1, 1), upstream.iter().sum());
        let dr = dy.dot(&self.params[k + 4]);
        let dv = &dr * &head.v.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        grads[k + 2] = (&dv * &head.x_hat).sum_axis(Axis(0)).insert_axis(Axis(0));
        grads[k + 3] = dv.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dx_hat = &dv * &self.params[k + 2];
        let sum_dx = dx_hat.sum_axis(Axis(0));
        let sum_dx_xhat = (&dx_hat * &head.x_hat).sum_axis(Axis(0));
        let n = b as f64;
        let mut du = Array2::zeros((b, h));
        for i in 0..b {
            for j in 0..h {
                du[[i, j]] = head.inv_std[j] / n
                    * (n * dx_hat[[i, j]] - sum_dx[j] - head.x_hat[[i, j]] * sum_dx_xhat[j]);
            }
        }
        grads[k] = du.t().dot(&head.a);
        grads[k + 1] = du.sum_axis(Axis(0)).insert_axis(Axis(0));
        let da = du.dot(&self.params[k]);

        // gradient flowing into each layer's output sequence
        let mut dh_seq = Array2::zeros((t_len * b, h));
        dh_seq.slice_mut(s![(t_len - 1) * b.., ..]).assign(&da);
        for l in (0..nl).rev() {
            let dx = self.layer_backward(l, &tape.layers[l], &dh_seq, b, &mut grads);
            if l > 0 {
                dh_seq = &dx * &tape.masks.between[l - 1];
            }
        }
        Ok(grads)
    }

    /// Backpropagates through one layer, accumulating its parameter
    /// gradients, and returns the gradient with respect to the layer input.
    fn layer_backward(&self, l: usize, tape: &LayerTape, dh_seq: &Array2<f64>, b: usize, grads: &mut ParamGrads) -> Array2<f64> {
        let h = self.config.hidden_width;
        let t_len = self.config.input_window;
        let g4 = 4 * h;
        let w_hh = &self.params[3 * l + 1];
        let mut dz = Array2::<f64>::zeros((t_len * b, g4));
        let mut dh_next = Array2::<f64>::zeros((b, h));
        let mut dc_next = vec![0.0; b * h];
        let acts = tape.acts.as_slice().expect("contiguous");
        let c = tape.c.as_slice().expect("contiguous");
        let tanh_c = tape.tanh_c.as_slice().expect("contiguous");
        let dh_in = dh_seq.as_slice().expect("contiguous");

        for t in (0..t_len).rev() {
            {
                let dz_s = dz.as_slice_mut().expect("contiguous");
                let dhn = dh_next.as_slice().expect("contiguous");
                for i in 0..b {
                    let row = t * b + i;
                    let z = &acts[row * g4..(row + 1) * g4];
                    let d = &mut dz_s[row * g4..(row + 1) * g4];
                    for j in 0..h {
                        let (ig, fg, gg, og) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
                        let tc = tanh_c[row * h + j];
                        let dh = dh_in[row * h + j] + dhn[i * h + j];
                        let d_o = dh * tc;
                        let dc = dh * og * (1.0 - tc * tc) + dc_next[i * h + j];
                        let c_prev = if t > 0 { c[(row - b) * h + j] } else { 0.0 };
                        dc_next[i * h + j] = dc * fg;
                        d[j] = dc * gg * ig * (1.0 - ig);
                        d[h + j] = dc * c_prev * fg * (1.0 - fg);
                        d[2 * h + j] = dc * ig * (1.0 - gg * gg);
                        d[3 * h + j] = d_o * og * (1.0 - og);
                    }
                }
            }
            if t > 0 {
                let dz_t = dz.slice(s![t * b..(t + 1) * b, ..]);
                general_mat_mul(1.0, &dz_t, w_hh, 0.0, &mut dh_next);
            }
        }

        grads[3 * l] = dz.t().dot(&tape.x);
        if t_len > 1 {
            let dz_tail = dz.slice(s![b.., ..]);
            let h_prev = tape.h.slice(s![..(t_len - 1) * b, ..]);
            grads[3 * l + 1] = dz_tail.t().dot(&h_prev);
        }
        grads[3 * l + 2] = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        dz.dot(&self.params[3 * l])
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn small_config(layers: usize, width: usize, window: usize, dropout: f64) -> NetworkConfig {
        NetworkConfig {
            num_lstm_layers: layers,
            hidden_width: width,
            dropout_rate: dropout,
            input_window: window,
            ..NetworkConfig::default()
        }
    }

    fn batch(b: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((b, t), || rng.random_range(-2.0..2.0))
    }

    #[test]
    fn eval_is_deterministic_and_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = LstmNetwork::new(small_config(2, 6, 12, 0.2), &mut rng).unwrap();
        net.set_mode(Mode::Eval);
        let before = net.clone();
        let w = batch(1, 12, 2);
        let a = net.predict(w.row(0).as_slice().unwrap()).unwrap();
        let b = net.predict(w.row(0).as_slice().unwrap()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let pass = net.forward(w.view(), &mut rng).unwrap();
        assert!(pass.tape.is_none());
        assert_eq!(pass.outputs[0].to_bits(), a.to_bits());
        assert_eq!(net, before);
    }

    #[test]
    fn zero_final_layer_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = LstmNetwork::new(small_config(1, 5, 8, 0.0), &mut rng).unwrap();
        let k = net.head_index();
        net.params_mut()[k + 4].fill(0.0);
        net.params_mut()[k + 5].fill(0.0);
        let out = net.predict_batch(batch(7, 8, 4).view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = LstmNetwork::new(small_config(2, 4, 6, 0.1), &mut rng).unwrap();
        assert_eq!(net.predict_batch(batch(9, 6, 6).view()).unwrap().len(), 9);
        assert!(net.predict(&[0.0; 6]).unwrap().is_finite());
        let pass = net.forward(batch(4, 6, 7).view(), &mut rng).unwrap();
        assert_eq!(pass.outputs.len(), 4);
    }

    #[test]
    fn input_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = LstmNetwork::new(small_config(1, 4, 6, 0.0), &mut rng).unwrap();
        assert!(net.predict(&[0.0; 5]).is_err());
        assert!(net.predict(&[0.0, 0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
        assert!(net.forward(batch(1, 6, 1).view(), &mut rng).is_err());
    }

    #[test]
    fn backward_requires_train_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = LstmNetwork::new(small_config(1, 4, 6, 0.0), &mut rng).unwrap();
        net.set_mode(Mode::Eval);
        let pass = net.forward(batch(3, 6, 1).view(), &mut rng).unwrap();
        assert!(net.backward(&pass, &[1.0; 3]).is_err());
        net.set_mode(Mode::Train);
        let pass = net.forward(batch(3, 6, 1).view(), &mut rng).unwrap();
        assert!(net.backward(&pass, &[1.0; 2]).is_err());
        assert!(net.backward(&pass, &[1.0; 3]).is_ok());
    }

    fn loss(net: &LstmNetwork, x: &Array2<f64>, masks: &DropoutMasks, up: &[f64]) -> f64 {
        let pass = net.forward_with_masks(x.view(), masks.clone()).unwrap();
        pass.outputs.iter().zip(up).map(|(o, u)| o * u).sum()
    }

    /// Per-tensor relative error `|analytic - fd| / max(|analytic|, |fd|)` in L2 norm.
    fn gradient_check(layers: usize, width: usize, window: usize, dropout: f64, seed: u64) -> Vec<(String, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = small_config(layers, width, window, dropout);
        let mut net = LstmNetwork::new(cfg.clone(), &mut rng).unwrap();
        // move biases off their initial values so every path is exercised
        for p in net.params_mut() {
            p.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
        }
        let x = batch(4, window, seed + 100);
        let masks = DropoutMasks::draw(&cfg, 4, &mut rng);
        let up: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pass = net.forward_with_masks(x.view(), masks.clone()).unwrap();
        let grads = net.backward(&pass, &up).unwrap();
        let names = net.param_names();
        let step = 1e-4;
        let mut out = Vec::new();
        for (pi, g) in grads.iter().enumerate() {
            let mut fd = Array2::zeros(g.dim());
            for idx in 0..g.len() {
                let (r, c) = (idx / g.ncols(), idx % g.ncols());
                let orig = net.params()[pi][[r, c]];
                net.params_mut()[pi][[r, c]] = orig + step;
                let lp = loss(&net, &x, &masks, &up);
                net.params_mut()[pi][[r, c]] = orig - step;
                let lm = loss(&net, &x, &masks, &up);
                net.params_mut()[pi][[r, c]] = orig;
                fd[[r, c]] = (lp - lm) / (2.0 * step);
            }
            let diff = (g - &fd).mapv(|v| v * v).sum().sqrt();
            let scale = g.mapv(|v| v * v).sum().sqrt().max(fd.mapv(|v| v * v).sum().sqrt());
            // tensors with no influence (the pre-batch-norm bias) have exactly
            // zero analytic gradient; compare those in absolute terms
            let rel = if scale < 1e-7 { diff } else { diff / scale };
            out.push((names[pi].clone(), rel));
        }
        out
    }

    #[test]
    fn gradients_match_finite_differences_two_layers_with_dropout() {
        for seed in 0..3 {
            for (name, rel) in gradient_check(2, 5, 7, 0.3, seed) {
                assert!(rel < 1e-3, "seed {seed} {name}: {rel}");
            }
        }
    }

    #[test]
    fn dropped_feature_has_zero_gradient() {
        let cfg = small_config(2, 6, 5, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let net = LstmNetwork::new(cfg.clone(), &mut rng).unwrap();
        let mut masks = DropoutMasks::draw(&cfg, 3, &mut rng);
        // feature 2 of the first layer dropped at every step of every sample
        masks.between[0].column_mut(2).fill(0.0);
        let pass = net.forward_with_masks(batch(3, 5, 22).view(), masks).unwrap();
        let g = net.backward(&pass, &[1.0, -0.5, 0.25]).unwrap();
        // second layer input weights for that feature
        assert!(g[3].column(2).iter().all(|&v| v == 0.0));
        assert!(g[3].column(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = LstmNetwork::new(small_config(2, 4, 6, 0.2), &mut rng).unwrap();
        let pass = net.forward(batch(3, 6, 12).view(), &mut rng).unwrap();
        let g1 = net.backward(&pass, &[0.3, -1.0, 0.7]).unwrap();
        let g2 = net.backward(&pass, &[0.6, -2.0, 1.4]).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(2.0 * x, *y);
            }
        }
    }

    #[test]
    fn batch_norm_eval_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut net = LstmNetwork::new(small_config(1, 4, 5, 0.0), &mut rng).unwrap();
        for _ in 0..3 {
            let pass = net.forward(batch(6, 5, rng.random()).view(), &mut rng).unwrap();
            net.commit_batch_stats(&pass);
        }
        let (mean, var) = net.bn_running_stats();
        let k = net.head_index();
        let gamma = net.params()[k + 2].clone();
        let beta = net.params()[k + 3].clone();
        // BN(u) = scale*u + shift; check midpoint property on random probes
        for _ in 0..20 {
            let j = rng.random_range(0..4);
            let u1: f64 = rng.random_range(-3.0..3.0);
            let u2: f64 = rng.random_range(-3.0..3.0);
            let bn = |u: f64| (u - mean[j]) / (var[j] + BN_EPS).sqrt() * gamma[[0, j]] + beta[[0, j]];
            assert!((bn(0.5 * (u1 + u2)) - 0.5 * (bn(u1) + bn(u2))).abs() < 1e-12);
        }
        assert!(var.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn running_stats_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut net = LstmNetwork::new(small_config(1, 3, 4, 0.0), &mut rng).unwrap();
        let pass = net.forward(batch(5, 4, 1).view(), &mut rng).unwrap();
        let tape = pass.tape.as_ref().unwrap();
        let expect_mean: Vec<f64> = tape.head.batch_mean.iter().map(|m| 0.1 * m).collect();
        net.commit_batch_stats(&pass);
        for (a, b) in net.bn_running_stats().0.iter().zip(&expect_mean) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
