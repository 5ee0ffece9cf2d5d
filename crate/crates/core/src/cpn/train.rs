//! Training and evaluation of collision predictors.

use std::io::Write;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thinnav_nn::{Adam, AdamConfig, Tensor};

use super::model::{sigmoid, weighted_bce, Cpn, CpnConfig, CpnVariant, ACTION_DIM, STATE_DIM};
use crate::dataset::{FrameDatapoint, LatentDatapoint};
use crate::error::{invalid, Error, Result};
use crate::vae::split_indices;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpnTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub val_fraction: f64,
    /// Upper bound on the positive-class weight `negatives / positives`.
    pub pos_weight_cap: f64,
}

impl Default for CpnTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            val_fraction: 0.2,
            pos_weight_cap: 10.0,
        }
    }
}

impl CpnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) || !(0.0..1.0).contains(&self.val_fraction) {
            return Err(invalid("cpn training needs epochs, batch size >= 1, lr > 0, val fraction in [0, 1)"));
        }
        if !(self.pos_weight_cap >= 1.0) {
            return Err(invalid("pos_weight_cap must be >= 1"));
        }
        Ok(())
    }
}

/// Training samples for either variant.
#[derive(Clone, Copy)]
pub enum CpnData<'a> {
    Latent(&'a [LatentDatapoint]),
    Frames(&'a [FrameDatapoint]),
}

impl CpnData<'_> {
    pub fn len(&self) -> usize {
        match self {
            CpnData::Latent(s) => s.len(),
            CpnData::Frames(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn variant(&self) -> CpnVariant {
        match self {
            CpnData::Latent(_) => CpnVariant::Modular,
            CpnData::Frames(_) => CpnVariant::EndToEnd,
        }
    }

    fn labels(&self, i: usize) -> &[u8] {
        match self {
            CpnData::Latent(s) => &s[i].labels,
            CpnData::Frames(s) => &s[i].labels,
        }
    }

    fn state(&self, i: usize) -> &[f32; STATE_DIM] {
        match self {
            CpnData::Latent(s) => &s[i].state,
            CpnData::Frames(s) => &s[i].state,
        }
    }

    fn actions(&self, i: usize) -> &[[f32; ACTION_DIM]] {
        match self {
            CpnData::Latent(s) => &s[i].actions,
            CpnData::Frames(s) => &s[i].actions,
        }
    }

    /// Input, state and per-step action tensors, plus step-major labels.
    fn batch(&self, cfg: &CpnConfig, idx: &[usize]) -> Result<(Tensor<f32>, Tensor<f32>, Vec<Tensor<f32>>, Vec<u8>)> {
        let b = idx.len();
        let t = cfg.horizon;
        let mut shape = vec![b];
        shape.extend(cfg.input_shape());
        let input = match self {
            CpnData::Latent(s) => Tensor::new(&shape, idx.iter().flat_map(|&i| s[i].input.iter().copied()).collect())?,
            CpnData::Frames(s) => Tensor::new(&shape, idx.iter().flat_map(|&i| s[i].input.x().iter().copied()).collect())?,
        };
        let states = Tensor::new(&[b, STATE_DIM], idx.iter().flat_map(|&i| *self.state(i)).collect())?;
        let actions = (0..t)
            .map(|k| Tensor::new(&[b, ACTION_DIM], idx.iter().flat_map(|&i| self.actions(i)[k]).collect()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let labels = (0..t).flat_map(|k| idx.iter().map(move |&i| self.labels(i)[k])).collect();
        Ok((input, states, actions, labels))
    }
}

/// Per-epoch metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpnEpochLog {
    pub epoch: usize,
    pub train_bce: f64,
    pub val: CpnMetrics,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CpnMetrics {
    pub bce: f64,
    /// Area under the ROC curve over all steps.
    pub auc: f64,
    /// Per-step accuracy at probability 0.5.
    pub acc: f64,
}

/// ROC AUC via the rank statistic; tied scores share their average rank.
/// Returns 0.5 when one class is absent.
pub fn auc(scores: &[f32], labels: &[u8]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] != 0 {
                rank_sum += avg;
            }
        }
        i = j + 1;
    }
    let pos = labels.iter().filter(|l| **l != 0).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return 0.5;
    }
    (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg)
}

/// `negatives / positives` over every label, capped.
pub fn positive_weight(data: CpnData<'_>, idx: &[usize], cap: f64) -> f64 {
    let (mut pos, mut neg) = (0usize, 0usize);
    for &i in idx {
        for l in data.labels(i) {
            if *l != 0 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    if pos == 0 {
        return 1.0;
    }
    (neg as f64 / pos as f64).clamp(1.0, cap)
}

/// Probabilities for samples `idx`, sample-major (`i * T + step`).
pub fn predict_samples(cpn: &Cpn, data: CpnData<'_>, idx: &[usize]) -> Result<Vec<f32>> {
    let t = cpn.config.horizon;
    let mut out = vec![0.0; idx.len() * t];
    for (c, chunk) in idx.chunks(64).enumerate() {
        let (input, states, actions, _) = data.batch(&cpn.config, chunk)?;
        let (logits, _) = cpn.forward(&input, &states, &actions)?;
        let b = chunk.len();
        for k in 0..t {
            for i in 0..b {
                out[(c * 64 + i) * t + k] = sigmoid(logits[k * b + i] as f64) as f32;
            }
        }
    }
    Ok(out)
}

/// Unweighted BCE, AUC and accuracy over samples `idx`.
pub fn evaluate_cpn(cpn: &Cpn, data: CpnData<'_>, idx: &[usize]) -> Result<CpnMetrics> {
    if idx.is_empty() {
        return Ok(CpnMetrics::default());
    }
    let probs = predict_samples(cpn, data, idx)?;
    let labels: Vec<u8> = idx.iter().flat_map(|&i| data.labels(i).iter().copied()).collect();
    let eps = 1e-7;
    let bce = probs
        .iter()
        .zip(&labels)
        .map(|(p, y)| {
            let p = (*p as f64).clamp(eps, 1.0 - eps);
            if *y != 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / probs.len() as f64;
    let acc = probs.iter().zip(&labels).filter(|(p, y)| (**p >= 0.5) == (**y != 0)).count() as f64 / probs.len() as f64;
    Ok(CpnMetrics {
        bce,
        auc: auc(&probs, &labels),
        acc,
    })
}

fn check_data(data: CpnData<'_>, cfg: &CpnConfig) -> Result<()> {
    if data.is_empty() {
        return Err(invalid("empty collision dataset"));
    }
    if data.variant() != cfg.variant {
        return Err(invalid(format!(
            "{} cpn cannot train on {} samples",
            cfg.variant.name(),
            data.variant().name()
        )));
    }
    for i in 0..data.len() {
        if data.actions(i).len() != cfg.horizon || data.labels(i).len() != cfg.horizon {
            return Err(invalid(format!("sample {i} does not have T = {} steps", cfg.horizon)));
        }
    }
    match data {
        CpnData::Latent(s) if s.iter().any(|d| d.input.len() != cfg.latent) => {
            Err(invalid(format!("latent size differs from J = {}", cfg.latent)))
        }
        CpnData::Frames(s) => {
            let want = (cfg.height, cfg.width);
            match s.iter().find(|d| d.input.dims() != want) {
                Some(d) => Err(Error::Resolution { expected: want, got: d.input.dims() }),
                None => Ok(()),
            }
        }
        _ => Ok(()),
    }
}

/// Trains a fresh predictor; the same data, configs and seed give bitwise
/// identical weights.
pub fn train_cpn(
    data: CpnData<'_>,
    cfg: &CpnConfig,
    tc: &CpnTrainConfig,
    seed: u64,
) -> Result<(Cpn, Vec<CpnEpochLog>)> {
    tc.validate()?;
    cfg.validate()?;
    check_data(data, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cpn: Cpn = Cpn::new(cfg.clone(), &mut rng)?;
    let (mut train_idx, val_idx) = split_indices(data.len(), tc.val_fraction, seed ^ 0xc0_11);
    let pos_weight = positive_weight(data, &train_idx, tc.pos_weight_cap);
    let mut adam = Adam::new(AdamConfig::with_lr(tc.lr));
    let mut log = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(tc.batch_size) {
            let (input, states, actions, labels) = data.batch(cfg, chunk)?;
            cpn.zero_grad();
            let (logits, trace) = cpn.forward(&input, &states, &actions)?;
            let (loss, dlogits) = weighted_bce(&logits, &labels, pos_weight, true);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("training bce {loss}"),
                });
            }
            cpn.backward(&trace, &dlogits)?;
            adam.step(cpn.params_and_grads()).map_err(|e| Error::Diverged {
                epoch,
                detail: e.to_string(),
            })?;
            total += loss * chunk.len() as f64;
        }
        let train_bce = total / train_idx.len().max(1) as f64;
        let val = evaluate_cpn(&cpn, data, &val_idx)?;
        info!(
            "cpn[{}] epoch {epoch}: bce {train_bce:.4} val bce {:.4} auc {:.3} acc {:.3}",
            cfg.variant.name(),
            val.bce,
            val.auc,
            val.acc
        );
        log.push(CpnEpochLog { epoch, train_bce, val });
    }
    Ok((cpn, log))
}

pub fn write_metrics_csv(log: &[CpnEpochLog], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,bce,auc,acc")?;
    for e in log {
        writeln!(f, "{},{},{},{}", e.epoch, e.train_bce, e.val.auc, e.val.acc)?;
    }
    f.flush()?;
    Ok(())
}
