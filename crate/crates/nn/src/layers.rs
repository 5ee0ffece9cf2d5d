use rand::Rng;

use crate::error::{NnError, Result};
use crate::init;
use crate::tensor::{Scalar, Tensor};

/// Negative-side slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::LeakyRelu => 2,
            Activation::Sigmoid => 3,
            Activation::Tanh => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu,
            3 => Activation::Sigmoid,
            4 => Activation::Tanh,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(F::zero()),
            Activation::LeakyRelu => {
                if x > F::zero() {
                    x
                } else {
                    x * F::of(LEAKY_SLOPE)
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    pub fn derivative<F: Scalar>(self, x: F, y: F) -> F {
        match self {
            Activation::Identity => F::one(),
            Activation::Relu => {
                if x > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Activation::LeakyRelu => {
                if x > F::zero() {
                    F::one()
                } else {
                    F::of(LEAKY_SLOPE)
                }
            }
            Activation::Sigmoid => y * (F::one() - y),
            Activation::Tanh => F::one() - y * y,
        }
    }

    /// Whether the activation has a derivative discontinuity at zero.
    pub fn has_kink(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu)
    }
}

#[inline]
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Tag used in checkpoint layer tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Deconv,
    Dense,
    Activation,
    Flatten,
    Reshape,
    Gru,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Conv => 1,
            LayerKind::Deconv => 2,
            LayerKind::Dense => 3,
            LayerKind::Activation => 4,
            LayerKind::Flatten => 5,
            LayerKind::Reshape => 6,
            LayerKind::Gru => 7,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            1 => LayerKind::Conv,
            2 => LayerKind::Deconv,
            3 => LayerKind::Dense,
            4 => LayerKind::Activation,
            5 => LayerKind::Flatten,
            6 => LayerKind::Reshape,
            7 => LayerKind::Gru,
            _ => return None,
        })
    }
}

/// Hyper-parameters of one layer. Shapes exclude the batch axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// Zero-padded 2-D convolution, output `floor((in + 2p - k) / s) + 1`.
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: [usize; 2],
        stride: usize,
        padding: [usize; 2],
    },
    /// Transposed convolution with an explicit output size so that it can
    /// mirror a strided convolution exactly.
    Deconv {
        in_ch: usize,
        out_ch: usize,
        kernel: [usize; 2],
        stride: usize,
        padding: [usize; 2],
        out_hw: [usize; 2],
    },
    Dense {
        input: usize,
        output: usize,
    },
    Activation(Activation),
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
}

impl LayerSpec {
    /// Convolution with `k / 2` zero padding: "same" output at stride 1,
    /// floor-divided output for strided layers.
    pub fn conv(in_ch: usize, out_ch: usize, k: usize, stride: usize) -> Self {
        LayerSpec::Conv {
            in_ch,
            out_ch,
            kernel: [k, k],
            stride,
            padding: [k / 2, k / 2],
        }
    }

    /// Transposed convolution that maps back onto `out_hw`, the input size of
    /// the matching [`LayerSpec::conv`].
    pub fn deconv(in_ch: usize, out_ch: usize, k: usize, stride: usize, out_hw: [usize; 2]) -> Self {
        LayerSpec::Deconv {
            in_ch,
            out_ch,
            kernel: [k, k],
            stride,
            padding: [k / 2, k / 2],
            out_hw,
        }
    }

    pub fn dense(input: usize, output: usize) -> Self {
        LayerSpec::Dense { input, output }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv { .. } => LayerKind::Conv,
            LayerSpec::Deconv { .. } => LayerKind::Deconv,
            LayerSpec::Dense { .. } => LayerKind::Dense,
            LayerSpec::Activation(_) => LayerKind::Activation,
            LayerSpec::Flatten => LayerKind::Flatten,
            LayerSpec::Reshape { .. } => LayerKind::Reshape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::InvalidSpec(m.to_string()));
        match self {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                ..
            }
            | LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                stride,
                ..
            } => {
                if *stride < 1 {
                    return bad("stride must be >= 1");
                }
                if kernel[0] < 1 || kernel[1] < 1 {
                    return bad("kernel dimensions must be >= 1");
                }
                if *in_ch < 1 || *out_ch < 1 {
                    return bad("channel counts must be >= 1");
                }
                Ok(())
            }
            LayerSpec::Dense { input, output } => {
                if *input < 1 || *output < 1 {
                    return bad("dense sizes must be >= 1");
                }
                Ok(())
            }
            LayerSpec::Reshape { shape } => {
                if shape.is_empty() || shape.len() > 3 || shape.contains(&0) {
                    return bad("reshape target must have 1 to 3 non-zero axes");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        let mismatch = |expected: String| NnError::ShapeMismatch {
            context: format!("{:?} layer input", self.kind()),
            expected,
            got: input.to_vec(),
        };
        match self {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                if input.len() != 3 || input[0] != *in_ch {
                    return Err(mismatch(format!("[{in_ch}, H, W]")));
                }
                let mut out = vec![*out_ch];
                for a in 0..2 {
                    let padded = input[1 + a] + 2 * padding[a];
                    if padded < kernel[a] {
                        return Err(mismatch(format!("spatial axis {} >= kernel {}", a, kernel[a])));
                    }
                    out.push((padded - kernel[a]) / stride + 1);
                }
                Ok(out)
            }
            LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                out_hw,
            } => {
                if input.len() != 3 || input[0] != *in_ch {
                    return Err(mismatch(format!("[{in_ch}, H, W]")));
                }
                for a in 0..2 {
                    let base = ((input[1 + a] - 1) * stride + kernel[a]) as isize - 2 * padding[a] as isize;
                    let o = out_hw[a] as isize;
                    if o < base || o > base + *stride as isize - 1 || o < 1 {
                        return Err(NnError::InvalidSpec(format!(
                            "deconv output axis {a} = {} not reachable from input {} (valid {}..={})",
                            out_hw[a],
                            input[1 + a],
                            base,
                            base + *stride as isize - 1
                        )));
                    }
                }
                Ok(vec![*out_ch, out_hw[0], out_hw[1]])
            }
            LayerSpec::Dense { input: i, output } => {
                if input.len() != 1 || input[0] != *i {
                    return Err(mismatch(format!("[{i}]")));
                }
                Ok(vec![*output])
            }
            LayerSpec::Activation(_) => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                let n: usize = input.iter().product();
                if n != shape.iter().product::<usize>() {
                    return Err(mismatch(format!("{} elements", shape.iter().product::<usize>())));
                }
                Ok(shape.clone())
            }
        }
    }
}

/// Per-layer intermediate kept by the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub enum Cache<F> {
    Input(Tensor<F>),
    InputOutput(Tensor<F>, Tensor<F>),
    Shape(Vec<usize>),
}

/// A layer instance: hyper-parameters plus parameter and gradient tensors.
#[derive(Clone, Debug)]
pub struct Layer<F = f32> {
    spec: LayerSpec,
    params: Vec<Tensor<F>>,
    grads: Vec<Tensor<F>>,
}

impl<F: Scalar> Layer<F> {
    pub fn new<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = match &spec {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => {
                let fan_in = in_ch * kernel[0] * kernel[1];
                vec![
                    init::kaiming_uniform(&[*out_ch, *in_ch, kernel[0], kernel[1]], fan_in, rng),
                    Tensor::zeros(&[*out_ch]),
                ]
            }
            LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                stride,
                ..
            } => {
                let fan_in = (in_ch * kernel[0] * kernel[1] / (stride * stride)).max(1);
                vec![
                    init::kaiming_uniform(&[*in_ch, *out_ch, kernel[0], kernel[1]], fan_in, rng),
                    Tensor::zeros(&[*out_ch]),
                ]
            }
            LayerSpec::Dense { input, output } => vec![
                init::kaiming_uniform(&[*output, *input], *input, rng),
                Tensor::zeros(&[*output]),
            ],
            _ => vec![],
        };
        let grads = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self { spec, params, grads })
    }

    /// Builds a layer around existing parameters (checkpoint restore).
    pub fn with_params(spec: LayerSpec, params: Vec<Tensor<F>>) -> Result<Self> {
        spec.validate()?;
        let expected: Vec<Vec<usize>> = match &spec {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => vec![vec![*out_ch, *in_ch, kernel[0], kernel[1]], vec![*out_ch]],
            LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => vec![vec![*in_ch, *out_ch, kernel[0], kernel[1]], vec![*out_ch]],
            LayerSpec::Dense { input, output } => vec![vec![*output, *input], vec![*output]],
            _ => vec![],
        };
        if expected.len() != params.len() {
            return Err(NnError::Checkpoint(format!(
                "{:?} layer expects {} parameter tensors, found {}",
                spec.kind(),
                expected.len(),
                params.len()
            )));
        }
        for (p, e) in params.iter().zip(&expected) {
            p.expect_shape(e, "layer parameter")?;
        }
        let grads = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self { spec, params, grads })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.params
    }

    pub fn grads(&self) -> &[Tensor<F>] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.grads
    }

    pub fn params_and_grads(&mut self) -> (&mut [Tensor<F>], &[Tensor<F>]) {
        (&mut self.params, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.fill(F::zero());
        }
    }

    pub fn cast<G: Scalar>(&self) -> Layer<G> {
        Layer {
            spec: self.spec.clone(),
            params: self.params.iter().map(|p| p.cast()).collect(),
            grads: self.grads.iter().map(|p| p.cast()).collect(),
        }
    }

    /// Forward pass over a batched input; returns the output and the cache
    /// needed by [`Layer::backward`].
    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Cache<F>)> {
        let per_sample = self.spec.output_shape(&x.shape()[1..])?;
        let n = x.batch();
        let mut out_shape = vec![n];
        out_shape.extend_from_slice(&per_sample);
        match &self.spec {
            LayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
            } => {
                let y = conv_forward(
                    x,
                    &self.params[0],
                    &self.params[1],
                    ConvGeom::new(*in_ch, *out_ch, *kernel, *stride, *padding, x.shape(), &per_sample),
                );
                Ok((y, Cache::Input(x.clone())))
            }
            LayerSpec::Deconv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                ..
            } => {
                let y = deconv_forward(
                    x,
                    &self.params[0],
                    &self.params[1],
                    ConvGeom::new(*in_ch, *out_ch, *kernel, *stride, *padding, x.shape(), &per_sample),
                );
                Ok((y, Cache::Input(x.clone())))
            }
            LayerSpec::Dense { input, output } => {
                let w = self.params[0].data();
                let b = self.params[1].data();
                let mut y = Tensor::zeros(&out_shape);
                for s in 0..n {
                    let xs = x.row(s);
                    let ys = y.row_mut(s);
                    for o in 0..*output {
                        let wr = &w[o * input..(o + 1) * input];
                        let mut acc = b[o];
                        for (wi, xi) in wr.iter().zip(xs) {
                            acc += *wi * *xi;
                        }
                        ys[o] = acc;
                    }
                }
                Ok((y, Cache::Input(x.clone())))
            }
            LayerSpec::Activation(a) => {
                let y = Tensor::new(&out_shape, x.data().iter().map(|v| a.apply(*v)).collect())?;
                Ok((y.clone(), Cache::InputOutput(x.clone(), y)))
            }
            LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                Ok((x.clone().reshape(&out_shape)?, Cache::Shape(x.shape().to_vec())))
            }
        }
    }

    /// Backward pass: accumulates parameter gradients and returns the input
    /// gradient.
    pub fn backward(&mut self, cache: &Cache<F>, grad_out: &Tensor<F>) -> Result<Tensor<F>> {
        match (&self.spec, cache) {
            (
                LayerSpec::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    padding,
                },
                Cache::Input(x),
            ) => {
                let geom = ConvGeom::new(*in_ch, *out_ch, *kernel, *stride, *padding, x.shape(), &grad_out.shape()[1..]);
                let (gw, gb) = split_two(&mut self.grads);
                Ok(conv_backward(x, &self.params[0], grad_out, gw, gb, geom))
            }
            (
                LayerSpec::Deconv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    padding,
                    ..
                },
                Cache::Input(x),
            ) => {
                let geom = ConvGeom::new(*in_ch, *out_ch, *kernel, *stride, *padding, x.shape(), &grad_out.shape()[1..]);
                let (gw, gb) = split_two(&mut self.grads);
                Ok(deconv_backward(x, &self.params[0], grad_out, gw, gb, geom))
            }
            (LayerSpec::Dense { input, output }, Cache::Input(x)) => {
                let n = x.batch();
                grad_out.expect_shape(&[n, *output], "dense backward")?;
                let w = self.params[0].data();
                let mut gx = Tensor::zeros(x.shape());
                let (gw, gb) = split_two(&mut self.grads);
                let gw = gw.data_mut();
                let gb = gb.data_mut();
                for s in 0..n {
                    let xs = x.row(s);
                    let gs = grad_out.row(s);
                    let gxs = gx.row_mut(s);
                    for o in 0..*output {
                        let g = gs[o];
                        gb[o] += g;
                        if g == F::zero() {
                            continue;
                        }
                        let wr = &w[o * input..(o + 1) * input];
                        let gwr = &mut gw[o * input..(o + 1) * input];
                        for i in 0..*input {
                            gwr[i] += g * xs[i];
                            gxs[i] += g * wr[i];
                        }
                    }
                }
                Ok(gx)
            }
            (LayerSpec::Activation(a), Cache::InputOutput(x, y)) => {
                grad_out.expect_shape(y.shape(), "activation backward")?;
                let data = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .zip(grad_out.data())
                    .map(|((xv, yv), g)| *g * a.derivative(*xv, *yv))
                    .collect();
                Tensor::new(x.shape(), data)
            }
            (LayerSpec::Flatten | LayerSpec::Reshape { .. }, Cache::Shape(shape)) => grad_out.clone().reshape(shape),
            _ => Err(NnError::InvalidSpec("cache does not belong to this layer".into())),
        }
    }
}

fn split_two<F>(v: &mut [Tensor<F>]) -> (&mut Tensor<F>, &mut Tensor<F>) {
    let (a, b) = v.split_at_mut(1);
    (&mut a[0], &mut b[0])
}

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    n: usize,
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: isize,
    pw: isize,
    /// Spatial size of the "small" side for conv (output) or deconv (input)
    /// is implied by the explicit fields below.
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn new(
        cin: usize,
        cout: usize,
        kernel: [usize; 2],
        stride: usize,
        padding: [usize; 2],
        in_shape: &[usize],
        out_sample: &[usize],
    ) -> Self {
        Self {
            n: in_shape[0],
            cin,
            cout,
            kh: kernel[0],
            kw: kernel[1],
            stride,
            ph: padding[0] as isize,
            pw: padding[1] as isize,
            in_h: in_shape[2],
            in_w: in_shape[3],
            out_h: out_sample[1],
            out_w: out_sample[2],
        }
    }
}

/// Range of `a` in `0..len_a` such that `a * s + k - p` lies in `0..len_b`.
#[inline]
fn valid_range(len_a: usize, len_b: usize, s: usize, k: usize, p: isize) -> (usize, usize) {
    let off = k as isize - p;
    let s_i = s as isize;
    // a * s + off >= 0  =>  a >= ceil(-off / s)
    let lo = if off >= 0 { 0 } else { ((-off) + s_i - 1) / s_i };
    // a * s + off <= len_b - 1  =>  a <= floor((len_b - 1 - off) / s)
    let top = len_b as isize - 1 - off;
    if top < 0 {
        return (0, 0);
    }
    let hi = (top / s_i + 1).min(len_a as isize);
    if hi <= lo {
        (0, 0)
    } else {
        (lo as usize, hi as usize)
    }
}

fn conv_forward<F: Scalar>(x: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>, g: ConvGeom) -> Tensor<F> {
    let mut y = Tensor::zeros(&[g.n, g.cout, g.out_h, g.out_w]);
    let xd = x.data();
    let wd = w.data();
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    let yd = y.data_mut();
    for n in 0..g.n {
        for co in 0..g.cout {
            let yp = &mut yd[(n * g.cout + co) * plane_out..(n * g.cout + co + 1) * plane_out];
            yp.iter_mut().for_each(|v| *v = b[co]);
            for ci in 0..g.cin {
                let xp = &xd[(n * g.cin + ci) * plane_in..(n * g.cin + ci + 1) * plane_in];
                for ky in 0..g.kh {
                    let (oy0, oy1) = valid_range(g.out_h, g.in_h, g.stride, ky, g.ph);
                    for kx in 0..g.kw {
                        let wv = wd[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                        let (ox0, ox1) = valid_range(g.out_w, g.in_w, g.stride, kx, g.pw);
                        for oy in oy0..oy1 {
                            let iy = (oy * g.stride + ky) as isize - g.ph;
                            let xrow = &xp[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                            let yrow = &mut yp[oy * g.out_w..(oy + 1) * g.out_w];
                            for ox in ox0..ox1 {
                                let ix = ((ox * g.stride + kx) as isize - g.pw) as usize;
                                yrow[ox] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

fn conv_backward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    gy: &Tensor<F>,
    gw: &mut Tensor<F>,
    gb: &mut Tensor<F>,
    g: ConvGeom,
) -> Tensor<F> {
    let mut gx = Tensor::zeros(x.shape());
    let xd = x.data();
    let wd = w.data();
    let gyd = gy.data();
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    let gxd = gx.data_mut();
    let gwd = gw.data_mut();
    let gbd = gb.data_mut();
    for n in 0..g.n {
        for co in 0..g.cout {
            let gp = &gyd[(n * g.cout + co) * plane_out..(n * g.cout + co + 1) * plane_out];
            gbd[co] += gp.iter().copied().sum::<F>();
            for ci in 0..g.cin {
                let base = (n * g.cin + ci) * plane_in;
                for ky in 0..g.kh {
                    let (oy0, oy1) = valid_range(g.out_h, g.in_h, g.stride, ky, g.ph);
                    for kx in 0..g.kw {
                        let widx = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
                        let wv = wd[widx];
                        let (ox0, ox1) = valid_range(g.out_w, g.in_w, g.stride, kx, g.pw);
                        let mut acc = F::zero();
                        for oy in oy0..oy1 {
                            let iy = ((oy * g.stride + ky) as isize - g.ph) as usize;
                            let grow = &gp[oy * g.out_w..(oy + 1) * g.out_w];
                            let roff = base + iy * g.in_w;
                            for ox in ox0..ox1 {
                                let ix = ((ox * g.stride + kx) as isize - g.pw) as usize;
                                let gv = grow[ox];
                                acc += gv * xd[roff + ix];
                                gxd[roff + ix] += gv * wv;
                            }
                        }
                        gwd[widx] += acc;
                    }
                }
            }
        }
    }
    gx
}

fn deconv_forward<F: Scalar>(x: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>, g: ConvGeom) -> Tensor<F> {
    let mut y = Tensor::zeros(&[g.n, g.cout, g.out_h, g.out_w]);
    let xd = x.data();
    let wd = w.data();
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    let yd = y.data_mut();
    for n in 0..g.n {
        for co in 0..g.cout {
            let yp = &mut yd[(n * g.cout + co) * plane_out..(n * g.cout + co + 1) * plane_out];
            yp.iter_mut().for_each(|v| *v = b[co]);
            for ci in 0..g.cin {
                let xp = &xd[(n * g.cin + ci) * plane_in..(n * g.cin + ci + 1) * plane_in];
                for ky in 0..g.kh {
                    let (iy0, iy1) = valid_range(g.in_h, g.out_h, g.stride, ky, g.ph);
                    for kx in 0..g.kw {
                        let wv = wd[((ci * g.cout + co) * g.kh + ky) * g.kw + kx];
                        let (ix0, ix1) = valid_range(g.in_w, g.out_w, g.stride, kx, g.pw);
                        for iy in iy0..iy1 {
                            let oy = ((iy * g.stride + ky) as isize - g.ph) as usize;
                            let xrow = &xp[iy * g.in_w..(iy + 1) * g.in_w];
                            let yrow = &mut yp[oy * g.out_w..(oy + 1) * g.out_w];
                            for ix in ix0..ix1 {
                                let ox = ((ix * g.stride + kx) as isize - g.pw) as usize;
                                yrow[ox] += wv * xrow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

fn deconv_backward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    gy: &Tensor<F>,
    gw: &mut Tensor<F>,
    gb: &mut Tensor<F>,
    g: ConvGeom,
) -> Tensor<F> {
    let mut gx = Tensor::zeros(x.shape());
    let xd = x.data();
    let wd = w.data();
    let gyd = gy.data();
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    let gxd = gx.data_mut();
    let gwd = gw.data_mut();
    let gbd = gb.data_mut();
    for n in 0..g.n {
        for co in 0..g.cout {
            let gp = &gyd[(n * g.cout + co) * plane_out..(n * g.cout + co + 1) * plane_out];
            gbd[co] += gp.iter().copied().sum::<F>();
            for ci in 0..g.cin {
                let base = (n * g.cin + ci) * plane_in;
                for ky in 0..g.kh {
                    let (iy0, iy1) = valid_range(g.in_h, g.out_h, g.stride, ky, g.ph);
                    for kx in 0..g.kw {
                        let widx = ((ci * g.cout + co) * g.kh + ky) * g.kw + kx;
                        let wv = wd[widx];
                        let (ix0, ix1) = valid_range(g.in_w, g.out_w, g.stride, kx, g.pw);
                        let mut acc = F::zero();
                        for iy in iy0..iy1 {
                            let oy = ((iy * g.stride + ky) as isize - g.ph) as usize;
                            let grow = &gp[oy * g.out_w..(oy + 1) * g.out_w];
                            let roff = base + iy * g.in_w;
                            for ix in ix0..ix1 {
                                let ox = ((ix * g.stride + kx) as isize - g.pw) as usize;
                                let gv = grow[ox];
                                acc += gv * xd[roff + ix];
                                gxd[roff + ix] += gv * wv;
                            }
                        }
                        gwd[widx] += acc;
                    }
                }
            }
        }
    }
    gx
}
