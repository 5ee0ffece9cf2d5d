//! Convolutional encoder producing `(mu, logvar)` and the mirrored
//! deconvolutional decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thinnav_nn::latent::clamp_logvar;
use thinnav_nn::{Activation, Checkpoint, LayerSpec, Network, Scalar, Tensor, LOGVAR_CLAMP};

use super::loss::{beta_norm, SemanticWeights};
use crate::error::{invalid, Error, Result};
use crate::render::DepthFrame;

/// Which reconstruction weighting the model trains with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VaeMode {
    /// Instance pixels weighted by [`SemanticWeights`].
    Semantic,
    /// Every valid pixel weighted 1.
    Vanilla,
}

impl VaeMode {
    pub fn name(self) -> &'static str {
        match self {
            VaeMode::Semantic => "semantic",
            VaeMode::Vanilla => "vanilla",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "semantic" => Ok(VaeMode::Semantic),
            "vanilla" => Ok(VaeMode::Vanilla),
            _ => Err(invalid(format!("unknown vae mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub height: usize,
    pub width: usize,
    /// Latent dimension.
    pub latent: usize,
    pub beta: f64,
    pub semantic: SemanticWeights,
    pub mode: VaeMode,
    /// Channels of the stride-2 3x3 encoder convolutions.
    pub channels: Vec<usize>,
    /// Width of the dense layer on either side of the latent code.
    pub hidden: usize,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl VaeConfig {
    /// 60x80 frames, 32-dimensional latent.
    pub fn desk() -> Self {
        Self {
            height: 60,
            width: 80,
            latent: 32,
            beta: 1.0,
            semantic: SemanticWeights::scaled_to(60, 80),
            mode: VaeMode::Semantic,
            channels: vec![8, 16, 32, 64],
            hidden: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 || !(self.beta > 0.0) || self.channels.is_empty() || self.hidden == 0 {
            return Err(invalid("vae config needs latent >= 1, beta > 0, at least one conv layer"));
        }
        self.semantic.validate()?;
        let (h, w) = self.bottleneck_hw();
        if h == 0 || w == 0 {
            return Err(invalid("image too small for the encoder depth"));
        }
        Ok(())
    }

    pub fn beta_norm(&self) -> f64 {
        beta_norm(self.beta, self.latent, self.height, self.width)
    }

    /// Spatial sizes after each encoder convolution, input first.
    pub fn spatial_sizes(&self) -> Vec<(usize, usize)> {
        let mut s = vec![(self.height, self.width)];
        for _ in &self.channels {
            let (h, w) = *s.last().unwrap();
            // 3x3, stride 2, padding 1.
            s.push(((h + 2 - 3) / 2 + 1, (w + 2 - 3) / 2 + 1));
        }
        s
    }

    pub fn bottleneck_hw(&self) -> (usize, usize) {
        *self.spatial_sizes().last().unwrap()
    }

    fn flat(&self) -> usize {
        let (h, w) = self.bottleneck_hw();
        h * w * self.channels.last().unwrap()
    }

    pub fn encoder_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut cin = 1;
        for &c in &self.channels {
            specs.push(LayerSpec::conv(cin, c, 3, 2));
            specs.push(LayerSpec::Activation(Activation::LeakyRelu));
            cin = c;
        }
        specs.push(LayerSpec::Flatten);
        specs.push(LayerSpec::dense(self.flat(), self.hidden));
        specs.push(LayerSpec::Activation(Activation::LeakyRelu));
        specs.push(LayerSpec::dense(self.hidden, 2 * self.latent));
        specs
    }

    pub fn decoder_specs(&self) -> Vec<LayerSpec> {
        let sizes = self.spatial_sizes();
        let (bh, bw) = self.bottleneck_hw();
        let cl = *self.channels.last().unwrap();
        let mut specs = vec![
            LayerSpec::dense(self.latent, self.hidden),
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::dense(self.hidden, self.flat()),
            LayerSpec::Activation(Activation::LeakyRelu),
            LayerSpec::Reshape { shape: vec![cl, bh, bw] },
        ];
        let n = self.channels.len();
        for i in (0..n).rev() {
            let cin = self.channels[i];
            let cout = if i == 0 { 1 } else { self.channels[i - 1] };
            let (oh, ow) = sizes[i];
            specs.push(LayerSpec::deconv(cin, cout, 3, 2, [oh, ow]));
            specs.push(LayerSpec::Activation(if i == 0 {
                Activation::Sigmoid
            } else {
                Activation::LeakyRelu
            }));
        }
        specs
    }
}

/// Encoder output for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub mu: Vec<f32>,
    pub logvar: Vec<f32>,
}

impl LatentCode {
    pub fn sigma(&self) -> Vec<f32> {
        self.logvar.iter().map(|lv| (clamp_logvar(*lv) * 0.5).exp()).collect()
    }
}

pub struct Vae {
    pub config: VaeConfig,
    pub encoder: Network<f32>,
    pub decoder: Network<f32>,
}

impl Vae {
    pub fn new<R: Rng + ?Sized>(config: VaeConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let encoder = Network::new(&[1, config.height, config.width], &config.encoder_specs(), rng)?;
        let decoder = Network::new(&[config.latent], &config.decoder_specs(), rng)?;
        if decoder.output_shape() != [1, config.height, config.width] {
            return Err(invalid(format!("decoder output {:?} does not mirror the input", decoder.output_shape())));
        }
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }

    pub fn check_frame(&self, f: &DepthFrame) -> Result<()> {
        let want = (self.config.height, self.config.width);
        if f.dims() != want {
            return Err(Error::Resolution {
                expected: want,
                got: f.dims(),
            });
        }
        Ok(())
    }

    /// `[N, 1, H, W]` input tensor; invalid pixels are already 0.
    pub fn input_tensor(&self, frames: &[&DepthFrame]) -> Result<Tensor<f32>> {
        let mut data = Vec::with_capacity(frames.len() * self.config.height * self.config.width);
        for f in frames {
            self.check_frame(f)?;
            data.extend_from_slice(f.x());
        }
        Ok(Tensor::new(&[frames.len(), 1, self.config.height, self.config.width], data)?)
    }

    pub fn encode_batch(&self, frames: &[&DepthFrame]) -> Result<Vec<LatentCode>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let out = self.encoder.infer(&self.input_tensor(frames)?)?;
        let j = self.config.latent;
        Ok((0..frames.len())
            .map(|n| {
                let row = out.row(n);
                LatentCode {
                    mu: row[..j].to_vec(),
                    logvar: row[j..].to_vec(),
                }
            })
            .collect())
    }

    pub fn encode(&self, frame: &DepthFrame) -> Result<LatentCode> {
        Ok(self.encode_batch(&[frame])?.remove(0))
    }

    pub fn decode_batch(&self, zs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        let j = self.config.latent;
        if let Some(z) = zs.iter().find(|z| z.len() != j) {
            return Err(invalid(format!("latent of length {} for J = {j}", z.len())));
        }
        if zs.is_empty() {
            return Ok(Vec::new());
        }
        let t = Tensor::new(&[zs.len(), j], zs.concat())?;
        let out = self.decoder.infer(&t)?;
        Ok((0..zs.len()).map(|n| out.row(n).to_vec()).collect())
    }

    pub fn decode(&self, z: &[f32]) -> Result<Vec<f32>> {
        Ok(self.decode_batch(&[z.to_vec()])?.remove(0))
    }

    /// `decode(encode(frame).mu)`.
    pub fn reconstruct(&self, frame: &DepthFrame) -> Result<Vec<f32>> {
        self.decode(&self.encode(frame)?.mu)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let mut ck = Checkpoint::new();
        ck.set_meta("kind", "vae");
        ck.set_meta("height", c.height);
        ck.set_meta("width", c.width);
        ck.set_meta("latent", c.latent);
        ck.set_meta("beta", c.beta);
        ck.set_meta("w_const", c.semantic.w_const);
        ck.set_meta("nu_min", c.semantic.nu_min);
        ck.set_meta("p_min", c.semantic.p_min);
        ck.set_meta("mode", c.mode.name());
        ck.set_meta("channels", c.channels.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        ck.set_meta("hidden", c.hidden);
        ck.blocks.push(self.encoder.to_block("encoder"));
        ck.blocks.push(self.decoder.to_block("decoder"));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.meta_str("kind")? != "vae" {
            return Err(Error::Format("checkpoint is not a vae".into()));
        }
        let channels = ck
            .meta_str("channels")?
            .split(',')
            .map(|s| s.parse::<usize>().map_err(|_| Error::Format(format!("bad channel list entry {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let config = VaeConfig {
            height: ck.meta_parse("height")?,
            width: ck.meta_parse("width")?,
            latent: ck.meta_parse("latent")?,
            beta: ck.meta_parse("beta")?,
            semantic: SemanticWeights {
                w_const: ck.meta_parse("w_const")?,
                nu_min: ck.meta_parse("nu_min")?,
                p_min: ck.meta_parse("p_min")?,
            },
            mode: VaeMode::parse(ck.meta_str("mode")?)?,
            channels,
            hidden: ck.meta_parse("hidden")?,
        };
        config.validate()?;
        let encoder = Network::from_block(ck.block("encoder")?)?;
        let decoder = Network::from_block(ck.block("decoder")?)?;
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }
}

/// One training batch in precision `F`.
pub struct VaeBatch<F> {
    /// `[N, 1, H, W]` inputs (also the reconstruction targets).
    pub x: Tensor<F>,
    /// Validity, `N * H * W`.
    pub val: Vec<u8>,
    /// Per-pixel loss weights, `N * H * W`.
    pub weight: Vec<F>,
    /// Standard-normal noise for the reparameterization, `N * J`.
    pub eps: Vec<F>,
}

/// Batch-mean loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Forward pass of `L = mean_n(recon_n + beta_norm * KL_n)`; when `backward`
/// is set, parameter gradients are accumulated into both networks.
/// The KL term uses the clamped log-variance, matching the sampler.
pub fn vae_loss<F: Scalar>(
    encoder: &mut Network<F>,
    decoder: &mut Network<F>,
    batch: &VaeBatch<F>,
    latent: usize,
    beta_norm: f64,
    backward: bool,
) -> Result<LossParts> {
    let n = batch.x.batch();
    let j = latent;
    let (enc_out, enc_tr) = encoder.forward_traced(&batch.x)?;
    if enc_out.shape() != [n, 2 * j] {
        return Err(invalid(format!("encoder output {:?}, expected [{n}, {}]", enc_out.shape(), 2 * j)));
    }
    let half = F::of(0.5);
    let mut z = Vec::with_capacity(n * j);
    let mut kl = 0.0;
    for s in 0..n {
        let row = enc_out.row(s);
        for k in 0..j {
            let (mu, lv) = (row[k], clamp_logvar(row[j + k]));
            z.push(mu + (lv * half).exp() * batch.eps[s * j + k]);
            let (m, l) = (mu.as_f64(), lv.as_f64());
            kl += -0.5 * (1.0 + l - m * m - l.exp());
        }
    }
    let z = Tensor::new(&[n, j], z)?;
    let (xr, dec_tr) = decoder.forward_traced(&z)?;
    let mut recon = 0.0;
    let mut dxr = Tensor::zeros(xr.shape());
    let inv_n = F::of(1.0 / n as f64);
    let two = F::of(2.0);
    for i in 0..xr.len() {
        if batch.val[i] != 0 {
            let d = xr[i] - batch.x[i];
            recon += (d * d * batch.weight[i]).as_f64();
            dxr[i] = two * d * batch.weight[i] * inv_n;
        }
    }
    let parts = LossParts {
        total: (recon + beta_norm * kl) / n as f64,
        recon: recon / n as f64,
        kl: kl / n as f64,
    };
    if !backward {
        return Ok(parts);
    }
    let dz = decoder.backward_traced(&dec_tr, &dxr)?;
    let mut denc = Tensor::zeros(enc_out.shape());
    let bn = F::of(beta_norm) * inv_n;
    for s in 0..n {
        let row = enc_out.row(s);
        for k in 0..j {
            let (mu, lv_raw) = (row[k], row[j + k]);
            let g = dz[s * j + k];
            let inside = lv_raw.abs().as_f64() <= LOGVAR_CLAMP;
            let lv = clamp_logvar(lv_raw);
            denc[s * 2 * j + k] = g + bn * mu;
            denc[s * 2 * j + j + k] = if inside {
                g * half * (lv * half).exp() * batch.eps[s * j + k] + bn * half * (lv.exp() - F::one())
            } else {
                F::zero()
            };
        }
    }
    encoder.backward_traced(&enc_tr, &denc)?;
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn desk_shapes_mirror() {
        let c = VaeConfig::desk();
        assert_eq!(c.spatial_sizes(), vec![(60, 80), (30, 40), (15, 20), (8, 10), (4, 5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vae = Vae::new(c, &mut rng).unwrap();
        let f = DepthFrame::invalid(60, 80);
        let code = vae.encode(&f).unwrap();
        assert_eq!(code.mu.len(), 32);
        assert!(code.mu.iter().chain(&code.logvar).all(|v| v.is_finite()));
        let r = vae.reconstruct(&f).unwrap();
        assert_eq!(r.len(), 4800);
        assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn wrong_resolution_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vae = Vae::new(VaeConfig::desk(), &mut rng).unwrap();
        assert!(matches!(vae.encode(&DepthFrame::invalid(30, 40)), Err(Error::Resolution { .. })));
        assert!(vae.decode(&[0.0; 5]).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = VaeConfig::desk();
        c.mode = VaeMode::Vanilla;
        let vae = Vae::new(c, &mut rng).unwrap();
        let bytes = vae.to_checkpoint().to_bytes();
        let back = Vae::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back.config, vae.config);
        assert_eq!(back.to_checkpoint().to_bytes(), bytes);
    }
}
