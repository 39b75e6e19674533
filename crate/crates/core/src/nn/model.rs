use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::xavier_uniform;
use crate::error::{Error, Result};

/// Dense tanh stack over a fixed-length vector, linear scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FfnnConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
}

impl FfnnConfig {
    /// Every (layers, width) combination searched by default.
    pub fn search_grid(input_dim: usize) -> Vec<FfnnConfig> {
        let mut out = Vec::new();
        for hidden_layers in [2, 4, 8] {
            for width in [200, 400, 800] {
                out.push(FfnnConfig {
                    input_dim,
                    hidden_layers,
                    width,
                });
            }
        }
        out
    }
}

/// `layers` valid 1-D convolutions (ReLU), global max over time, then
/// `layers` dense ReLU layers and a linear scalar output. Convolution channels
/// and dense widths are both `width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvPoolConfig {
    pub input_channels: usize,
    pub layers: usize,
    pub width: usize,
    pub kernel: usize,
}

impl ConvPoolConfig {
    pub fn search_grid(input_channels: usize) -> Vec<ConvPoolConfig> {
        let mut out = Vec::new();
        for layers in [2, 3] {
            for width in [200, 400] {
                for kernel in [4, 8] {
                    out.push(ConvPoolConfig {
                        input_channels,
                        layers,
                        width,
                        kernel,
                    });
                }
            }
        }
        out
    }

    /// Shortest input that leaves at least one step after the convolution stack.
    pub fn min_input_len(&self) -> usize {
        self.layers * (self.kernel - 1) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case")]
pub enum Architecture {
    Ffnn(FfnnConfig),
    ConvPool(ConvPoolConfig),
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Ffnn(_) => "ffnn",
            Architecture::ConvPool(_) => "convpool",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Architecture::Ffnn(c) => c.input_dim > 0 && c.hidden_layers > 0 && c.width > 0,
            Architecture::ConvPool(c) => c.input_channels > 0 && c.layers > 0 && c.width > 0 && c.kernel > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid architecture {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct DenseLayout {
    input: usize,
    output: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct ConvLayout {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    w: usize,
    b: usize,
}

impl ConvLayout {
    fn row(&self) -> usize {
        self.kernel * self.in_ch
    }
}

#[derive(Debug, Clone)]
struct Layout {
    convs: Vec<ConvLayout>,
    hidden: Vec<DenseLayout>,
    out: DenseLayout,
    n_params: usize,
}

impl Layout {
    fn new(arch: &Architecture) -> Self {
        let mut off = 0;
        let mut dense = |input: usize, output: usize| {
            let l = DenseLayout {
                input,
                output,
                w: off,
                b: off + input * output,
            };
            off += input * output + output;
            l
        };
        match *arch {
            Architecture::Ffnn(c) => {
                let mut hidden = Vec::new();
                let mut d = c.input_dim;
                for _ in 0..c.hidden_layers {
                    hidden.push(dense(d, c.width));
                    d = c.width;
                }
                let out = dense(d, 1);
                Layout {
                    convs: vec![],
                    hidden,
                    out,
                    n_params: off,
                }
            }
            Architecture::ConvPool(c) => {
                let mut convs = Vec::new();
                let mut ch = c.input_channels;
                let mut coff = 0;
                for _ in 0..c.layers {
                    convs.push(ConvLayout {
                        in_ch: ch,
                        out_ch: c.width,
                        kernel: c.kernel,
                        w: coff,
                        b: coff + c.width * c.kernel * ch,
                    });
                    coff += c.width * c.kernel * ch + c.width;
                    ch = c.width;
                }
                let mut off = coff;
                let mut dense = |input: usize, output: usize| {
                    let l = DenseLayout {
                        input,
                        output,
                        w: off,
                        b: off + input * output,
                    };
                    off += input * output + output;
                    l
                };
                let hidden: Vec<_> = (0..c.layers).map(|_| dense(c.width, c.width)).collect();
                let out = dense(c.width, 1);
                Layout {
                    convs,
                    hidden,
                    out,
                    n_params: off,
                }
            }
        }
    }
}

/// One model input: a fixed-length vector, or a `T x C` row-major sequence of
/// which only the first `len` frames are valid (the rest is padding).
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Vector(&'a [f64]),
    Sequence { frames: &'a [f64], len: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub input: Input<'a>,
    pub target: f64,
}

/// Zero-padded minibatch of sequences with their valid lengths.
#[derive(Debug, Clone)]
pub struct PaddedBatch {
    pub data: Vec<f64>,
    pub lengths: Vec<usize>,
    pub max_len: usize,
    pub channels: usize,
}

impl PaddedBatch {
    /// Pads every sequence with zero frames to the longest one.
    pub fn pad(seqs: &[&[f64]], channels: usize) -> Self {
        let lengths: Vec<usize> = seqs.iter().map(|s| s.len() / channels).collect();
        let max_len = lengths.iter().copied().max().unwrap_or(0);
        let mut data = vec![0.0; seqs.len() * max_len * channels];
        for (i, s) in seqs.iter().enumerate() {
            let base = i * max_len * channels;
            data[base..base + s.len()].copy_from_slice(s);
        }
        PaddedBatch {
            data,
            lengths,
            max_len,
            channels,
        }
    }

    pub fn input(&self, i: usize) -> Input<'_> {
        let stride = self.max_len * self.channels;
        Input::Sequence {
            frames: &self.data[i * stride..(i + 1) * stride],
            len: self.lengths[i],
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

struct Trace {
    /// Input to each conv layer followed by the last conv output, each `T_l x C_l`.
    conv_io: Vec<Vec<f64>>,
    conv_lens: Vec<usize>,
    /// Argmax time step per pooled channel.
    pool_arg: Vec<usize>,
    /// Input to each dense layer (hidden layers then output layer).
    dense_in: Vec<Vec<f64>>,
    output: f64,
}

/// Network weights in one flat vector plus the architecture that indexes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    params: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Model {
    /// Xavier-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(&arch);
        let mut params = vec![0.0; layout.n_params];
        for c in &layout.convs {
            let w = xavier_uniform(c.kernel * c.in_ch, c.kernel * c.out_ch, c.out_ch * c.row(), rng);
            params[c.w..c.w + w.len()].copy_from_slice(&w);
        }
        for d in layout.hidden.iter().chain(std::iter::once(&layout.out)) {
            let w = xavier_uniform(d.input, d.output, d.input * d.output, rng);
            params[d.w..d.w + w.len()].copy_from_slice(&w);
        }
        Ok(Model { arch, params })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let n = Layout::new(&arch).n_params;
        if params.len() != n {
            return Err(Error::Shape(format!("{} parameters supplied, architecture needs {n}", params.len())));
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        Ok(Model { arch, params })
    }

    pub fn n_params(arch: &Architecture) -> usize {
        Layout::new(arch).n_params
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.arch)
    }

    fn hidden_act(&self, z: f64) -> f64 {
        match self.arch {
            Architecture::Ffnn(_) => z.tanh(),
            Architecture::ConvPool(_) => z.max(0.0),
        }
    }

    /// Derivative of the hidden activation expressed through its output `a`.
    fn hidden_act_grad(&self, a: f64) -> f64 {
        match self.arch {
            Architecture::Ffnn(_) => 1.0 - a * a,
            Architecture::ConvPool(_) => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn dense_forward(&self, l: &DenseLayout, x: &[f64], act: bool) -> Vec<f64> {
        let p = &self.params;
        (0..l.output)
            .map(|o| {
                let z = p[l.b + o] + dot(&p[l.w + o * l.input..l.w + (o + 1) * l.input], x);
                if act {
                    self.hidden_act(z)
                } else {
                    z
                }
            })
            .collect()
    }

    fn trace(&self, input: Input<'_>) -> Result<Trace> {
        let layout = self.layout();
        let p = &self.params;
        let mut conv_io = Vec::new();
        let mut conv_lens = Vec::new();
        let mut pool_arg = Vec::new();
        let features: Vec<f64> = match (self.arch, input) {
            (Architecture::Ffnn(c), Input::Vector(x)) => {
                if x.len() != c.input_dim {
                    return Err(Error::Shape(format!("input has {} values, model expects {}", x.len(), c.input_dim)));
                }
                x.to_vec()
            }
            (Architecture::ConvPool(c), Input::Sequence { frames, len }) => {
                if frames.len() < len * c.input_channels {
                    return Err(Error::Shape(format!(
                        "sequence holds {} values, valid length {len} x {} channels needs more",
                        frames.len(),
                        c.input_channels
                    )));
                }
                if len < c.min_input_len() {
                    return Err(Error::TooShort(format!(
                        "{len} frames, the convolution stack needs at least {}",
                        c.min_input_len()
                    )));
                }
                let mut cur = frames[..len * c.input_channels].to_vec();
                let mut t_prev = len;
                for l in &layout.convs {
                    let t_out = t_prev - l.kernel + 1;
                    let row = l.row();
                    let mut out = vec![0.0; t_out * l.out_ch];
                    for t in 0..t_out {
                        let window = &cur[t * l.in_ch..t * l.in_ch + row];
                        for o in 0..l.out_ch {
                            let z = p[l.b + o] + dot(&p[l.w + o * row..l.w + (o + 1) * row], window);
                            out[t * l.out_ch + o] = z.max(0.0);
                        }
                    }
                    conv_lens.push(t_prev);
                    conv_io.push(cur);
                    cur = out;
                    t_prev = t_out;
                }
                conv_lens.push(t_prev);
                let ch = c.width;
                let mut pooled = vec![f64::NEG_INFINITY; ch];
                pool_arg = vec![0; ch];
                for t in 0..t_prev {
                    for o in 0..ch {
                        let v = cur[t * ch + o];
                        // strict comparison keeps the earliest maximum
                        if v > pooled[o] {
                            pooled[o] = v;
                            pool_arg[o] = t;
                        }
                    }
                }
                conv_io.push(cur);
                pooled
            }
            (arch, _) => {
                return Err(Error::Shape(format!("input kind does not match {} model", arch.name())));
            }
        };

        let mut dense_in = Vec::with_capacity(layout.hidden.len() + 1);
        let mut x = features;
        for l in &layout.hidden {
            let y = self.dense_forward(l, &x, true);
            dense_in.push(x);
            x = y;
        }
        let output = self.dense_forward(&layout.out, &x, false)[0];
        dense_in.push(x);
        Ok(Trace {
            conv_io,
            conv_lens,
            pool_arg,
            dense_in,
            output,
        })
    }

    pub fn predict(&self, input: Input<'_>) -> Result<f64> {
        Ok(self.trace(input)?.output)
    }

    /// Adds `dl_dy * d(output)/d(params)` into `grad`; returns the prediction.
    pub fn accumulate_gradient(&self, input: Input<'_>, dl_dy: f64, grad: &mut [f64]) -> Result<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let tr = self.trace(input)?;
        let layout = self.layout();
        let p = &self.params;

        // output layer
        let mut delta = vec![dl_dy];
        let mut layers: Vec<&DenseLayout> = layout.hidden.iter().collect();
        layers.push(&layout.out);
        let mut d_input = Vec::new();
        for (li, l) in layers.iter().enumerate().rev() {
            let x = &tr.dense_in[li];
            let mut dx = vec![0.0; l.input];
            for (o, &g) in delta.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad[l.b + o] += g;
                axpy(g, x, &mut grad[l.w + o * l.input..l.w + (o + 1) * l.input]);
                axpy(g, &p[l.w + o * l.input..l.w + (o + 1) * l.input], &mut dx);
            }
            if li > 0 {
                // x is the activated output of hidden layer li-1
                for (d, &a) in dx.iter_mut().zip(x) {
                    *d *= self.hidden_act_grad(a);
                }
            }
            delta = dx;
            if li == 0 {
                d_input = std::mem::take(&mut delta);
            }
        }

        if layout.convs.is_empty() {
            return Ok(tr.output);
        }

        // un-pool: route each channel's gradient to its argmax step
        let last = layout.convs.len();
        let t_last = tr.conv_lens[last];
        let ch = layout.convs[last - 1].out_ch;
        let mut d_act = vec![0.0; t_last * ch];
        for o in 0..ch {
            d_act[tr.pool_arg[o] * ch + o] = d_input[o];
        }

        for li in (0..last).rev() {
            let l = &layout.convs[li];
            let out = &tr.conv_io[li + 1];
            let inp = &tr.conv_io[li];
            let t_out = tr.conv_lens[li + 1];
            let row = l.row();
            let need_dx = li > 0;
            let mut d_in = if need_dx { vec![0.0; tr.conv_lens[li] * l.in_ch] } else { Vec::new() };
            for t in 0..t_out {
                for o in 0..l.out_ch {
                    let idx = t * l.out_ch + o;
                    if out[idx] <= 0.0 {
                        continue;
                    }
                    let g = d_act[idx];
                    if g == 0.0 {
                        continue;
                    }
                    grad[l.b + o] += g;
                    let window = &inp[t * l.in_ch..t * l.in_ch + row];
                    axpy(g, window, &mut grad[l.w + o * row..l.w + (o + 1) * row]);
                    if need_dx {
                        axpy(
                            g,
                            &p[l.w + o * row..l.w + (o + 1) * row],
                            &mut d_in[t * l.in_ch..t * l.in_ch + row],
                        );
                    }
                }
            }
            d_act = d_in;
        }
        Ok(tr.output)
    }

    /// Mean squared error over the batch and its exact gradient.
    ///
    /// Work is split into fixed chunks of 8 examples, each summed in order and
    /// then combined in chunk order, so results do not depend on thread count.
    pub fn mse_and_gradient(&self, batch: &[Example<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let scale = 2.0 / batch.len() as f64;
        let n = self.params.len();
        let partials: Vec<Result<(f64, Vec<f64>)>> = batch
            .par_chunks(8)
            .map(|chunk| {
                let mut g = vec![0.0; n];
                let mut sq = 0.0;
                for ex in chunk {
                    let y = self.predict(ex.input)?;
                    let r = y - ex.target;
                    sq += r * r;
                    self.accumulate_gradient(ex.input, scale * r, &mut g)?;
                }
                Ok((sq, g))
            })
            .collect();
        let mut grad = vec![0.0; n];
        let mut sq = 0.0;
        for part in partials {
            let (s, g) = part?;
            sq += s;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        Ok((sq / batch.len() as f64, grad))
    }

    pub fn mse(&self, batch: &[Example<'_>]) -> Result<f64> {
        let preds = self.predict_many(&batch.iter().map(|e| e.input).collect::<Vec<_>>())?;
        Ok(preds
            .iter()
            .zip(batch)
            .map(|(p, e)| (p - e.target).powi(2))
            .sum::<f64>()
            / batch.len() as f64)
    }

    pub fn predict_many(&self, inputs: &[Input<'_>]) -> Result<Vec<f64>> {
        inputs.par_iter().map(|x| self.predict(*x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv_model(seed: u64) -> Model {
        let arch = Architecture::ConvPool(ConvPoolConfig {
            input_channels: 3,
            layers: 1,
            width: 4,
            kernel: 1,
        });
        Model::init(arch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn parameter_counts() {
        let f = Architecture::Ffnn(FfnnConfig {
            input_dim: 88,
            hidden_layers: 2,
            width: 200,
        });
        assert_eq!(Model::n_params(&f), 88 * 200 + 200 + 200 * 200 + 200 + 200 + 1);
        let c = Architecture::ConvPool(ConvPoolConfig {
            input_channels: 40,
            layers: 2,
            width: 8,
            kernel: 4,
        });
        let conv = 8 * 4 * 40 + 8 + 8 * 4 * 8 + 8;
        let dense = 2 * (8 * 8 + 8) + 8 + 1;
        assert_eq!(Model::n_params(&c), conv + dense);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let arch = Architecture::ConvPool(ConvPoolConfig {
            input_channels: 40,
            layers: 2,
            width: 8,
            kernel: 4,
        });
        let m = Model::from_params(arch, vec![0.0; Model::n_params(&arch)]).unwrap();
        let x: Vec<f64> = (0..40 * 20).map(|i| (i as f64).sin()).collect();
        assert_eq!(m.predict(Input::Sequence { frames: &x, len: 20 }).unwrap(), 0.0);
        let arch = Architecture::Ffnn(FfnnConfig {
            input_dim: 5,
            hidden_layers: 3,
            width: 7,
        });
        let m = Model::from_params(arch, vec![0.0; Model::n_params(&arch)]).unwrap();
        assert_eq!(m.predict(Input::Vector(&[1.0, -2.0, 3.0, 0.5, 9.0])).unwrap(), 0.0);
    }

    #[test]
    fn kernel_one_pool_is_permutation_invariant() {
        let m = conv_model(5);
        let frames = [0.3, -1.2, 0.8, 1.5, 0.1, -0.4, -0.7, 0.9, 2.0];
        let y = m.predict(Input::Sequence { frames: &frames, len: 3 }).unwrap();
        // brute force over all 3! frame orders
        for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let permuted: Vec<f64> = perm.iter().flat_map(|&t| frames[t * 3..t * 3 + 3].to_vec()).collect();
            let yp = m.predict(Input::Sequence { frames: &permuted, len: 3 }).unwrap();
            assert_eq!(y.to_bits(), yp.to_bits());
        }
    }

    #[test]
    fn too_short_input() {
        let arch = Architecture::ConvPool(ConvPoolConfig {
            input_channels: 2,
            layers: 2,
            width: 3,
            kernel: 4,
        });
        let m = Model::init(arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let x = vec![0.5; 2 * 6];
        assert!(matches!(
            m.predict(Input::Sequence { frames: &x, len: 6 }),
            Err(Error::TooShort(_))
        ));
        let x = vec![0.5; 2 * 7];
        assert!(m.predict(Input::Sequence { frames: &x, len: 7 }).is_ok());
    }

    #[test]
    fn input_kind_mismatch() {
        let m = conv_model(1);
        assert!(matches!(m.predict(Input::Vector(&[1.0, 2.0, 3.0])), Err(Error::Shape(_))));
    }

    #[test]
    fn padding_batch_preserves_outputs() {
        let m = conv_model(2);
        let a: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let b: Vec<f64> = (0..21).map(|i| (i as f64 * 0.3).sin()).collect();
        let batch = PaddedBatch::pad(&[&a, &b], 3);
        assert_eq!(batch.max_len, 7);
        let ya = m.predict(Input::Sequence { frames: &a, len: 4 }).unwrap();
        assert_eq!(m.predict(batch.input(0)).unwrap().to_bits(), ya.to_bits());
    }

    #[test]
    fn perfect_predictions_have_zero_gradient() {
        let arch = Architecture::Ffnn(FfnnConfig {
            input_dim: 3,
            hidden_layers: 2,
            width: 5,
        });
        let m = Model::init(arch, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let xs = [[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]];
        let batch: Vec<Example> = xs
            .iter()
            .map(|x| Example {
                input: Input::Vector(x),
                target: m.predict(Input::Vector(x)).unwrap(),
            })
            .collect();
        let (loss, g) = m.mse_and_gradient(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let arch = Architecture::Ffnn(FfnnConfig {
            input_dim: 3,
            hidden_layers: 2,
            width: 5,
        });
        let m = Model::init(arch, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let xs = [[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0], [0.0, 0.0, 1.0]];
        let batch: Vec<Example> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| Example {
                input: Input::Vector(x),
                target: i as f64 - 1.0,
            })
            .collect();
        let doubled: Vec<Example> = batch.iter().chain(batch.iter()).copied().collect();
        let (l1, g1) = m.mse_and_gradient(&batch).unwrap();
        let (l2, g2) = m.mse_and_gradient(&doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    /// Central differences of the batch MSE, one parameter at a time.
    fn numeric_gradient(m: &Model, batch: &[Example], h: f64) -> Vec<f64> {
        let mut probe = m.clone();
        (0..m.params.len())
            .map(|i| {
                let orig = probe.params[i];
                probe.params[i] = orig + h;
                let up = probe.mse(batch).unwrap();
                probe.params[i] = orig - h;
                let down = probe.mse(batch).unwrap();
                probe.params[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn max_relative_error(a: &[f64], n: &[f64]) -> f64 {
        a.iter()
            .zip(n)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn convpool_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let arch = Architecture::ConvPool(ConvPoolConfig {
            input_channels: 5,
            layers: 2,
            width: 8,
            kernel: 4,
        });
        let m = Model::init(arch, &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..3).map(|_| random_rows(&mut rng, 5 * 12)).collect();
        let batch: Vec<Example> = xs
            .iter()
            .map(|x| Example {
                input: Input::Sequence { frames: x, len: 12 },
                target: 0.5,
            })
            .collect();
        let (_, g) = m.mse_and_gradient(&batch).unwrap();
        let err = max_relative_error(&g, &numeric_gradient(&m, &batch, 1e-4));
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn ffnn_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let arch = Architecture::Ffnn(FfnnConfig {
            input_dim: 6,
            hidden_layers: 3,
            width: 7,
        });
        let m = Model::init(arch, &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..4).map(|_| random_rows(&mut rng, 6)).collect();
        let batch: Vec<Example> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| Example {
                input: Input::Vector(x),
                target: i as f64 * 0.3 - 0.4,
            })
            .collect();
        let (_, g) = m.mse_and_gradient(&batch).unwrap();
        let err = max_relative_error(&g, &numeric_gradient(&m, &batch, 1e-4));
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn trailing_padding_is_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let arch = Architecture::ConvPool(ConvPoolConfig {
            input_channels: 4,
            layers: 2,
            width: 6,
            kernel: 3,
        });
        let m = Model::init(arch, &mut rng).unwrap();
        let x = random_rows(&mut rng, 4 * 15);
        let y = m.predict(Input::Sequence { frames: &x, len: 15 }).unwrap();
        for pad in [0, 10, 100] {
            let mut padded = x.clone();
            padded.resize(x.len() + pad * 4, 0.0);
            let yp = m.predict(Input::Sequence { frames: &padded, len: 15 }).unwrap();
            assert_eq!(y.to_bits(), yp.to_bits(), "pad {pad}");
        }
    }

    #[test]
    fn small_steps_do_not_increase_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let arch = Architecture::Ffnn(FfnnConfig {
            input_dim: 4,
            hidden_layers: 2,
            width: 10,
        });
        let mut m = Model::init(arch, &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..32).map(|_| random_rows(&mut rng, 4)).collect();
        let batch: Vec<Example> = xs
            .iter()
            .map(|x| Example {
                input: Input::Vector(x),
                target: x[0] * 0.5 + x[2].sin(),
            })
            .collect();
        let mut prev = m.mse(&batch).unwrap();
        for _ in 0..5 {
            let (_, g) = m.mse_and_gradient(&batch).unwrap();
            for (p, gi) in m.params.iter_mut().zip(&g) {
                *p -= 1e-5 * gi;
            }
            let cur = m.mse(&batch).unwrap();
            assert!(cur <= prev, "{cur} > {prev}");
            prev = cur;
        }
    }
}
