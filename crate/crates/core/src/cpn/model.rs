//! Recurrent collision predictor.
//!
//! The input (latent mean, or a raw frame through a small conv encoder for
//! the end-to-end variant) and the partial state are embedded, concatenated
//! and mapped to the initial hidden state of a GRU. Each step consumes an
//! embedded action and emits one collision logit.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thinnav_nn::adam::ParamGroup;
use thinnav_nn::{Activation, Checkpoint, Gru, GruTrace, LayerSpec, Network, Scalar, Tensor, Trace};

use crate::error::{invalid, Error, Result};
use crate::render::DepthFrame;

pub const STATE_DIM: usize = 6;
pub const ACTION_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpnVariant {
    /// Consumes the latent mean of a frozen VAE.
    Modular,
    /// Consumes the raw depth frame.
    EndToEnd,
}

impl CpnVariant {
    pub fn name(self) -> &'static str {
        match self {
            CpnVariant::Modular => "modular",
            CpnVariant::EndToEnd => "end-to-end",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "modular" => Ok(CpnVariant::Modular),
            "end-to-end" => Ok(CpnVariant::EndToEnd),
            _ => Err(invalid(format!("unknown cpn variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpnConfig {
    pub variant: CpnVariant,
    /// Latent size `J` (modular).
    pub latent: usize,
    /// Frame size (end-to-end).
    pub height: usize,
    pub width: usize,
    /// Horizon `T`.
    pub horizon: usize,
    /// GRU hidden size.
    pub hidden: usize,
    pub input_embed: usize,
    pub state_embed: usize,
    pub action_embed: usize,
    /// Stride-2 conv channels of the end-to-end image encoder.
    pub conv_channels: Vec<usize>,
}

impl Default for CpnConfig {
    fn default() -> Self {
        Self {
            variant: CpnVariant::Modular,
            latent: 32,
            height: 60,
            width: 80,
            horizon: 10,
            hidden: 32,
            input_embed: 64,
            state_embed: 16,
            action_embed: 16,
            conv_channels: vec![8, 16, 32],
        }
    }
}

impl CpnConfig {
    pub fn end_to_end() -> Self {
        Self {
            variant: CpnVariant::EndToEnd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.hidden == 0 || self.input_embed == 0 || self.state_embed == 0 || self.action_embed == 0 {
            return Err(invalid("cpn sizes and horizon must be >= 1"));
        }
        match self.variant {
            CpnVariant::Modular if self.latent == 0 => Err(invalid("modular cpn needs latent >= 1")),
            CpnVariant::EndToEnd if self.conv_channels.is_empty() || self.height == 0 || self.width == 0 => {
                Err(invalid("end-to-end cpn needs a frame size and conv layers"))
            }
            _ => Ok(()),
        }
    }

    /// Shape of one input sample.
    pub fn input_shape(&self) -> Vec<usize> {
        match self.variant {
            CpnVariant::Modular => vec![self.latent],
            CpnVariant::EndToEnd => vec![1, self.height, self.width],
        }
    }

    fn input_specs(&self) -> Vec<LayerSpec> {
        let leaky = LayerSpec::Activation(Activation::LeakyRelu);
        match self.variant {
            CpnVariant::Modular => vec![LayerSpec::dense(self.latent, self.input_embed), leaky],
            CpnVariant::EndToEnd => {
                let mut specs = Vec::new();
                let (mut h, mut w, mut cin) = (self.height, self.width, 1);
                for &c in &self.conv_channels {
                    specs.push(LayerSpec::conv(cin, c, 3, 2));
                    specs.push(leaky.clone());
                    h = (h - 1) / 2 + 1;
                    w = (w - 1) / 2 + 1;
                    cin = c;
                }
                specs.push(LayerSpec::Flatten);
                specs.push(LayerSpec::dense(cin * h * w, self.input_embed));
                specs.push(leaky);
                specs
            }
        }
    }
}

/// Traces of one training forward pass.
pub struct CpnTrace<F> {
    input: Trace<F>,
    state: Trace<F>,
    init: Trace<F>,
    action: Trace<F>,
    gru: GruTrace<F>,
    head: Trace<F>,
    batch: usize,
}

#[derive(Clone, Debug)]
pub struct Cpn<F = f32> {
    pub config: CpnConfig,
    pub input_net: Network<F>,
    pub state_net: Network<F>,
    pub init_net: Network<F>,
    pub action_net: Network<F>,
    pub gru: Gru<F>,
    pub head: Network<F>,
}

fn concat_cols<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    let n = a.batch();
    let (ca, cb) = (a.row_len(), b.row_len());
    let mut d = Vec::with_capacity(n * (ca + cb));
    for i in 0..n {
        d.extend_from_slice(a.row(i));
        d.extend_from_slice(b.row(i));
    }
    Ok(Tensor::new(&[n, ca + cb], d)?)
}

fn split_cols<F: Scalar>(t: &Tensor<F>, ca: usize) -> Result<(Tensor<F>, Tensor<F>)> {
    let n = t.batch();
    let cb = t.row_len() - ca;
    let (mut a, mut b) = (Vec::with_capacity(n * ca), Vec::with_capacity(n * cb));
    for i in 0..n {
        a.extend_from_slice(&t.row(i)[..ca]);
        b.extend_from_slice(&t.row(i)[ca..]);
    }
    Ok((Tensor::new(&[n, ca], a)?, Tensor::new(&[n, cb], b)?))
}

fn split_rows<F: Scalar>(t: &Tensor<F>, parts: usize) -> Result<Vec<Tensor<F>>> {
    let rows = t.batch() / parts;
    let c = t.row_len();
    t.data()
        .chunks(rows * c)
        .map(|d| Ok(Tensor::new(&[rows, c], d.to_vec())?))
        .collect()
}

fn stack_rows<F: Scalar>(ts: &[Tensor<F>]) -> Result<Tensor<F>> {
    let c = ts[0].row_len();
    let rows: usize = ts.iter().map(|t| t.batch()).sum();
    Ok(Tensor::new(&[rows, c], ts.iter().flat_map(|t| t.data().iter().copied()).collect())?)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `-log(sigmoid(z))`, stable for large `|z|`.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl<F: Scalar> Cpn<F> {
    pub fn new<R: Rng + ?Sized>(config: CpnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let input_net = Network::new(&c.input_shape(), &c.input_specs(), rng)?;
        let state_net = Network::new(
            &[STATE_DIM],
            &[LayerSpec::dense(STATE_DIM, c.state_embed), LayerSpec::Activation(Activation::LeakyRelu)],
            rng,
        )?;
        let init_net = Network::new(
            &[c.input_embed + c.state_embed],
            &[LayerSpec::dense(c.input_embed + c.state_embed, c.hidden), LayerSpec::Activation(Activation::Tanh)],
            rng,
        )?;
        let action_net = Network::new(
            &[ACTION_DIM],
            &[LayerSpec::dense(ACTION_DIM, c.action_embed), LayerSpec::Activation(Activation::LeakyRelu)],
            rng,
        )?;
        let gru = Gru::new(c.action_embed, c.hidden, rng)?;
        let head = Network::new(&[c.hidden], &[LayerSpec::dense(c.hidden, 1)], rng)?;
        Ok(Self {
            config,
            input_net,
            state_net,
            init_net,
            action_net,
            gru,
            head,
        })
    }

    pub fn cast<G: Scalar>(&self) -> Cpn<G> {
        Cpn {
            config: self.config.clone(),
            input_net: self.input_net.cast(),
            state_net: self.state_net.cast(),
            init_net: self.init_net.cast(),
            action_net: self.action_net.cast(),
            gru: self.gru.cast(),
            head: self.head.cast(),
        }
    }

    pub fn zero_grad(&mut self) {
        self.input_net.zero_grad();
        self.state_net.zero_grad();
        self.init_net.zero_grad();
        self.action_net.zero_grad();
        self.gru.zero_grad();
        self.head.zero_grad();
    }

    /// Parameter groups in a fixed order, for the optimiser and gradient checks.
    pub fn params_and_grads(&mut self) -> Vec<ParamGroup<'_, F>> {
        vec![
            self.input_net.params_and_grads(),
            self.state_net.params_and_grads(),
            self.init_net.params_and_grads(),
            self.action_net.params_and_grads(),
            self.gru.params_and_grads(),
            self.head.params_and_grads(),
        ]
    }

    fn check_batch(&self, input: &Tensor<F>, states: &Tensor<F>, actions: &[Tensor<F>]) -> Result<usize> {
        let b = input.batch();
        let mut want = vec![b];
        want.extend(self.config.input_shape());
        if input.shape() != want.as_slice() {
            return Err(invalid(format!("cpn input {:?}, expected {:?}", input.shape(), want)));
        }
        if states.shape() != [b, STATE_DIM] {
            return Err(invalid(format!("cpn states {:?}, expected [{b}, {STATE_DIM}]", states.shape())));
        }
        if actions.len() != self.config.horizon || actions.iter().any(|a| a.shape() != [b, ACTION_DIM]) {
            return Err(invalid(format!("cpn needs {} action tensors of [{b}, {ACTION_DIM}]", self.config.horizon)));
        }
        Ok(b)
    }

    /// Logits `[T * B]`, step-major (`t * B + b`), with the traces needed for
    /// [`Cpn::backward`].
    pub fn forward(
        &self,
        input: &Tensor<F>,
        states: &Tensor<F>,
        actions: &[Tensor<F>],
    ) -> Result<(Vec<F>, CpnTrace<F>)> {
        let b = self.check_batch(input, states, actions)?;
        let (e_in, t_in) = self.input_net.forward_traced(input)?;
        let (e_s, t_s) = self.state_net.forward_traced(states)?;
        let (h0, t_init) = self.init_net.forward_traced(&concat_cols(&e_in, &e_s)?)?;
        let (e_a, t_a) = self.action_net.forward_traced(&stack_rows(actions)?)?;
        let xs = split_rows(&e_a, actions.len())?;
        let (hs, t_gru) = self.gru.forward_seq(&h0, &xs)?;
        let (logits, t_head) = self.head.forward_traced(&stack_rows(&hs)?)?;
        Ok((
            logits.into_data(),
            CpnTrace {
                input: t_in,
                state: t_s,
                init: t_init,
                action: t_a,
                gru: t_gru,
                head: t_head,
                batch: b,
            },
        ))
    }

    /// Closest pre-activation to a kink over the feed-forward parts of a
    /// traced pass; finite differences are only meaningful when this is not
    /// tiny.
    pub fn min_kink_distance(&self, trace: &CpnTrace<F>) -> f64 {
        [
            self.input_net.min_kink_distance(&trace.input),
            self.state_net.min_kink_distance(&trace.state),
            self.init_net.min_kink_distance(&trace.init),
            self.action_net.min_kink_distance(&trace.action),
            self.head.min_kink_distance(&trace.head),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// Accumulates parameter gradients from `dlogits` (same layout as the
    /// logits of [`Cpn::forward`]).
    pub fn backward(&mut self, trace: &CpnTrace<F>, dlogits: &[F]) -> Result<()> {
        let b = trace.batch;
        let t = self.config.horizon;
        let d_head = Tensor::new(&[t * b, 1], dlogits.to_vec())?;
        let d_hs = self.head.backward_traced(&trace.head, &d_head)?;
        let d_hs = split_rows(&d_hs, t)?;
        let (d_h0, d_xs) = self.gru.backward_seq(&trace.gru, &d_hs)?;
        self.action_net.backward_traced(&trace.action, &stack_rows(&d_xs)?)?;
        let d_cat = self.init_net.backward_traced(&trace.init, &d_h0)?;
        let (d_in, d_s) = split_cols(&d_cat, self.config.input_embed)?;
        self.input_net.backward_traced(&trace.input, &d_in)?;
        self.state_net.backward_traced(&trace.state, &d_s)?;
        Ok(())
    }

    /// Collision probabilities for one input, every state in `states` and
    /// every sequence in `seqs`. The input embedding is computed once and each
    /// state's hidden initialisation once. Result is indexed
    /// `[state][sequence][step]`.
    pub fn predict_shared(
        &self,
        input: &Tensor<F>,
        states: &[[f32; STATE_DIM]],
        seqs: &[Vec<[f32; ACTION_DIM]>],
    ) -> Result<Vec<Vec<Vec<f32>>>> {
        let t = self.config.horizon;
        let mut want = vec![1];
        want.extend(self.config.input_shape());
        if input.shape() != want.as_slice() {
            return Err(invalid(format!("cpn input {:?}, expected {:?}", input.shape(), want)));
        }
        if let Some(s) = seqs.iter().find(|s| s.len() != t) {
            return Err(invalid(format!("action sequence of length {} for T = {t}", s.len())));
        }
        if states.is_empty() || seqs.is_empty() {
            return Ok(vec![Vec::new(); states.len()]);
        }
        let (ns, nm) = (states.len(), seqs.len());
        let e_in = self.input_net.infer(input)?;
        let st = Tensor::new(&[ns, STATE_DIM], states.iter().flatten().map(|v| F::of(*v as f64)).collect())?;
        let e_s = self.state_net.infer(&st)?;
        let e_in_rep = Tensor::new(&[ns, e_in.row_len()], (0..ns).flat_map(|_| e_in.row(0).iter().copied()).collect())?;
        let h0 = self.init_net.infer(&concat_cols(&e_in_rep, &e_s)?)?;
        let h0_rep = Tensor::new(
            &[ns * nm, h0.row_len()],
            (0..ns).flat_map(|s| (0..nm).flat_map(|_| h0.row(s).iter().copied()).collect::<Vec<_>>()).collect(),
        )?;
        // Embed each distinct action once: rows `step * nm + m`.
        let acts = Tensor::new(
            &[t * nm, ACTION_DIM],
            (0..t).flat_map(|k| seqs.iter().flat_map(move |s| s[k].iter().map(|v| F::of(*v as f64)))).collect(),
        )?;
        let e_a = self.action_net.infer(&acts)?;
        let ea = e_a.row_len();
        let xs: Vec<Tensor<F>> = (0..t)
            .map(|k| {
                let d = (0..ns).flat_map(|_| (0..nm).flat_map(|m| e_a.row(k * nm + m).iter().copied())).collect();
                Tensor::new(&[ns * nm, ea], d)
            })
            .collect::<std::result::Result<_, _>>()?;
        let hs = self.gru.infer_seq(&h0_rep, &xs)?;
        let logits = self.head.infer(&stack_rows(&hs)?)?;
        let rows = ns * nm;
        Ok((0..ns)
            .map(|s| {
                (0..nm)
                    .map(|m| (0..t).map(|k| sigmoid(logits[k * rows + s * nm + m].as_f64()) as f32).collect())
                    .collect()
            })
            .collect())
    }
}

impl Cpn<f32> {
    /// Input tensor of batch 1 from a latent mean.
    pub fn latent_input(&self, mu: &[f32]) -> Result<Tensor<f32>> {
        if self.config.variant != CpnVariant::Modular || mu.len() != self.config.latent {
            return Err(invalid(format!("latent of length {} for a {} cpn", mu.len(), self.config.variant.name())));
        }
        Ok(Tensor::new(&[1, mu.len()], mu.to_vec())?)
    }

    /// Input tensor of batch 1 from a depth frame.
    pub fn frame_input(&self, frame: &DepthFrame) -> Result<Tensor<f32>> {
        if self.config.variant != CpnVariant::EndToEnd {
            return Err(invalid("frame input given to a modular cpn"));
        }
        let want = (self.config.height, self.config.width);
        if frame.dims() != want {
            return Err(Error::Resolution { expected: want, got: frame.dims() });
        }
        Ok(Tensor::new(&[1, 1, want.0, want.1], frame.x().to_vec())?)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let mut ck = Checkpoint::new();
        ck.set_meta("kind", "cpn");
        ck.set_meta("variant", c.variant.name());
        ck.set_meta("latent", c.latent);
        ck.set_meta("height", c.height);
        ck.set_meta("width", c.width);
        ck.set_meta("horizon", c.horizon);
        ck.set_meta("hidden", c.hidden);
        ck.set_meta("input_embed", c.input_embed);
        ck.set_meta("state_embed", c.state_embed);
        ck.set_meta("action_embed", c.action_embed);
        ck.set_meta("conv_channels", c.conv_channels.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        ck.blocks.push(self.input_net.to_block("input"));
        ck.blocks.push(self.state_net.to_block("state"));
        ck.blocks.push(self.init_net.to_block("init"));
        ck.blocks.push(self.action_net.to_block("action"));
        ck.blocks.push(thinnav_nn::Block {
            name: "gru".into(),
            input_shape: vec![c.action_embed],
            layers: vec![self.gru.to_record()],
        });
        ck.blocks.push(self.head.to_block("head"));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta_str("kind")? != "cpn" {
            return Err(Error::Format("checkpoint is not a cpn".into()));
        }
        let channels = ck.meta_str("conv_channels")?;
        let conv_channels = if channels.is_empty() {
            Vec::new()
        } else {
            channels
                .split(',')
                .map(|s| s.parse().map_err(|_| Error::Format(format!("bad channel entry {s:?}"))))
                .collect::<Result<_>>()?
        };
        let config = CpnConfig {
            variant: CpnVariant::parse(ck.meta_str("variant")?)?,
            latent: ck.meta_parse("latent")?,
            height: ck.meta_parse("height")?,
            width: ck.meta_parse("width")?,
            horizon: ck.meta_parse("horizon")?,
            hidden: ck.meta_parse("hidden")?,
            input_embed: ck.meta_parse("input_embed")?,
            state_embed: ck.meta_parse("state_embed")?,
            action_embed: ck.meta_parse("action_embed")?,
            conv_channels,
        };
        config.validate()?;
        let gru_block = ck.block("gru")?;
        let gru = match gru_block.layers.as_slice() {
            [r] => Gru::from_record(r)?,
            _ => return Err(Error::Format("gru block must hold one record".into())),
        };
        Ok(Self {
            config,
            input_net: Network::from_block(ck.block("input")?)?,
            state_net: Network::from_block(ck.block("state")?)?,
            init_net: Network::from_block(ck.block("init")?)?,
            action_net: Network::from_block(ck.block("action")?)?,
            gru,
            head: Network::from_block(ck.block("head")?)?,
        })
    }
}

/// Mean positively-weighted binary cross-entropy over logits and labels in the
/// same layout. Returns the loss and, if requested, `dL/dlogit`.
pub fn weighted_bce<F: Scalar>(logits: &[F], labels: &[u8], pos_weight: f64, grad: bool) -> (f64, Vec<F>) {
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut g = if grad { Vec::with_capacity(logits.len()) } else { Vec::new() };
    for (z, y) in logits.iter().zip(labels) {
        let z = z.as_f64();
        let p = sigmoid(z);
        if *y != 0 {
            loss += pos_weight * softplus_neg(z);
            if grad {
                g.push(F::of(pos_weight * (p - 1.0) / n));
            }
        } else {
            loss += softplus_neg(-z);
            if grad {
                g.push(F::of(p / n));
            }
        }
    }
    (loss / n, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seqs(n: usize, t: usize) -> Vec<Vec<[f32; 4]>> {
        (0..n).map(|i| vec![[1.0, 0.0, 0.1 * i as f32, 0.2 * i as f32 - 0.3]; t]).collect()
    }

    #[test]
    fn untrained_scores_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cpn: Cpn = Cpn::new(CpnConfig::default(), &mut rng).unwrap();
        let x = cpn.latent_input(&[0.3; 32]).unwrap();
        let s = cpn.predict_shared(&x, &[[0.0; 6], [0.5, 0.0, 0.0, 0.1, 0.0, 0.0]], &seqs(4, 10)).unwrap();
        assert_eq!((s.len(), s[0].len(), s[0][0].len()), (2, 4, 10));
        assert!(s.iter().flatten().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn shared_prediction_matches_training_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cpn: Cpn = Cpn::new(CpnConfig::default(), &mut rng).unwrap();
        let mu: Vec<f32> = (0..32).map(|i| (i as f32 * 0.37).sin()).collect();
        let state = [0.4f32, -0.1, 0.05, 0.2, 0.01, -0.02];
        let sq = seqs(3, 10);
        let shared = cpn.predict_shared(&cpn.latent_input(&mu).unwrap(), &[state], &sq).unwrap();
        let input = Tensor::new(&[3, 32], [mu.clone(), mu.clone(), mu].concat()).unwrap();
        let states = Tensor::new(&[3, 6], state.repeat(3)).unwrap();
        let actions: Vec<Tensor<f32>> =
            (0..10).map(|k| Tensor::new(&[3, 4], sq.iter().flat_map(|s| s[k]).collect()).unwrap()).collect();
        let (logits, _) = cpn.forward(&input, &states, &actions).unwrap();
        for m in 0..3 {
            for k in 0..10 {
                let p = sigmoid(logits[k * 3 + m] as f64) as f32;
                assert!((p - shared[0][m][k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn order_of_sequences_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cpn: Cpn = Cpn::new(CpnConfig::default(), &mut rng).unwrap();
        let x = cpn.latent_input(&[0.1; 32]).unwrap();
        let sq = seqs(5, 10);
        let mut rev = sq.clone();
        rev.reverse();
        let a = cpn.predict_shared(&x, &[[0.0; 6]], &sq).unwrap();
        let b = cpn.predict_shared(&x, &[[0.0; 6]], &rev).unwrap();
        for m in 0..5 {
            assert_eq!(a[0][m], b[0][4 - m]);
        }
    }

    #[test]
    fn checkpoint_roundtrip_both_variants() {
        for cfg in [CpnConfig::default(), CpnConfig::end_to_end()] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let cpn: Cpn = Cpn::new(cfg, &mut rng).unwrap();
            let bytes = cpn.to_checkpoint().to_bytes();
            let back = Cpn::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
            assert_eq!(back.config, cpn.config);
            assert_eq!(back.to_checkpoint().to_bytes(), bytes);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cpn: Cpn = Cpn::new(CpnConfig::default(), &mut rng).unwrap();
        assert!(cpn.latent_input(&[0.0; 31]).is_err());
        let x = cpn.latent_input(&[0.0; 32]).unwrap();
        assert!(cpn.predict_shared(&x, &[[0.0; 6]], &seqs(2, 9)).is_err());
        assert!(cpn.frame_input(&DepthFrame::invalid(60, 80)).is_err());
    }

    #[test]
    fn bce_matches_direct_formula() {
        let (l, g) = weighted_bce(&[0.0f64, 2.0], &[1, 0], 3.0, true);
        let want = (3.0 * 2f64.ln() + (1.0 + 2f64.exp()).ln()) / 2.0;
        assert!((l - want).abs() < 1e-12);
        assert!((g[0] - 3.0 * (0.5 - 1.0) / 2.0).abs() < 1e-12);
        assert!((g[1] - sigmoid(2.0) / 2.0).abs() < 1e-12);
    }
}
