//! Single-layer gated recurrent unit with back-propagation through time.
//!
//! Gate layout in the stacked weight matrices is `[update, reset, candidate]`:
//!
//! ```text
//! z  = sigmoid(W_z x + b_z + U_z h + c_z)
//! r  = sigmoid(W_r x + b_r + U_r h + c_r)
//! n  = tanh(W_n x + b_n + r * (U_n h + c_n))
//! h' = (1 - z) * n + z * h
//! ```

use rand::Rng;

use crate::error::{NnError, Result};
use crate::init;
use crate::layers::sigmoid;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Gru<F = f32> {
    input: usize,
    hidden: usize,
    /// `w_ih [3H, I]`, `w_hh [3H, H]`, `b_ih [3H]`, `b_hh [3H]`.
    params: Vec<Tensor<F>>,
    grads: Vec<Tensor<F>>,
}

#[derive(Clone, Debug)]
struct StepCache<F> {
    x: Tensor<F>,
    h: Tensor<F>,
    z: Vec<F>,
    r: Vec<F>,
    n: Vec<F>,
    hn: Vec<F>,
}

/// Per-step intermediates of one unrolled sequence.
#[derive(Clone, Debug)]
pub struct GruTrace<F> {
    steps: Vec<StepCache<F>>,
}

impl<F: Scalar> Gru<F> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(NnError::InvalidSpec("gru sizes must be >= 1".into()));
        }
        let b = 1.0 / (hidden as f64).sqrt();
        let params = vec![
            init::uniform(&[3 * hidden, input], b, rng),
            init::uniform(&[3 * hidden, hidden], b, rng),
            init::uniform(&[3 * hidden], b, rng),
            init::uniform(&[3 * hidden], b, rng),
        ];
        let grads = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            input,
            hidden,
            params,
            grads,
        })
    }

    pub fn with_params(input: usize, hidden: usize, params: Vec<Tensor<F>>) -> Result<Self> {
        let shapes = [vec![3 * hidden, input], vec![3 * hidden, hidden], vec![3 * hidden], vec![3 * hidden]];
        if params.len() != 4 {
            return Err(NnError::Checkpoint(format!("gru expects 4 tensors, found {}", params.len())));
        }
        for (p, s) in params.iter().zip(&shapes) {
            p.expect_shape(s, "gru parameter")?;
        }
        let grads = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Ok(Self {
            input,
            hidden,
            params,
            grads,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
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

    pub fn params_and_grads(&mut self) -> Vec<(&mut Tensor<F>, &Tensor<F>)> {
        self.params.iter_mut().zip(self.grads.iter()).collect()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(F::zero()));
    }

    pub fn cast<G: Scalar>(&self) -> Gru<G> {
        Gru {
            input: self.input,
            hidden: self.hidden,
            params: self.params.iter().map(|p| p.cast()).collect(),
            grads: self.grads.iter().map(|p| p.cast()).collect(),
        }
    }

    fn check(&self, h: &Tensor<F>, x: &Tensor<F>) -> Result<usize> {
        let n = h.batch();
        h.expect_shape(&[n, self.hidden], "gru hidden state")?;
        x.expect_shape(&[n, self.input], "gru step input")?;
        Ok(n)
    }

    fn step(&self, h: &Tensor<F>, x: &Tensor<F>) -> Result<(Tensor<F>, StepCache<F>)> {
        let n = self.check(h, x)?;
        let hs = self.hidden;
        let (wih, whh, bih, bhh) = (
            self.params[0].data(),
            self.params[1].data(),
            self.params[2].data(),
            self.params[3].data(),
        );
        let mut out = Tensor::zeros(&[n, hs]);
        let mut z = vec![F::zero(); n * hs];
        let mut r = vec![F::zero(); n * hs];
        let mut nn = vec![F::zero(); n * hs];
        let mut hn = vec![F::zero(); n * hs];
        let mut gi = vec![F::zero(); 3 * hs];
        let mut gh = vec![F::zero(); 3 * hs];
        for s in 0..n {
            let xs = x.row(s);
            let hv = h.row(s);
            for g in 0..3 * hs {
                let wr = &wih[g * self.input..(g + 1) * self.input];
                let mut a = bih[g];
                for (w, v) in wr.iter().zip(xs) {
                    a += *w * *v;
                }
                gi[g] = a;
                let ur = &whh[g * hs..(g + 1) * hs];
                let mut b = bhh[g];
                for (w, v) in ur.iter().zip(hv) {
                    b += *w * *v;
                }
                gh[g] = b;
            }
            let o = out.row_mut(s);
            for j in 0..hs {
                let zj = sigmoid(gi[j] + gh[j]);
                let rj = sigmoid(gi[hs + j] + gh[hs + j]);
                let hnj = gh[2 * hs + j];
                let nj = (gi[2 * hs + j] + rj * hnj).tanh();
                o[j] = (F::one() - zj) * nj + zj * hv[j];
                z[s * hs + j] = zj;
                r[s * hs + j] = rj;
                nn[s * hs + j] = nj;
                hn[s * hs + j] = hnj;
            }
        }
        Ok((
            out,
            StepCache {
                x: x.clone(),
                h: h.clone(),
                z,
                r,
                n: nn,
                hn,
            },
        ))
    }

    /// Unrolls the cell over `xs` from `h0`; returns every hidden state
    /// (`hs[t]` is the state after consuming `xs[t]`).
    pub fn forward_seq(&self, h0: &Tensor<F>, xs: &[Tensor<F>]) -> Result<(Vec<Tensor<F>>, GruTrace<F>)> {
        let mut h = h0.clone();
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (nh, c) = self.step(&h, x)?;
            steps.push(c);
            hs.push(nh.clone());
            h = nh;
        }
        Ok((hs, GruTrace { steps }))
    }

    pub fn infer_seq(&self, h0: &Tensor<F>, xs: &[Tensor<F>]) -> Result<Vec<Tensor<F>>> {
        Ok(self.forward_seq(h0, xs)?.0)
    }

    /// Back-propagation through time. `dhs[t]` is the loss gradient with
    /// respect to `hs[t]`. Returns the gradients for `h0` and each input.
    pub fn backward_seq(&mut self, trace: &GruTrace<F>, dhs: &[Tensor<F>]) -> Result<(Tensor<F>, Vec<Tensor<F>>)> {
        if dhs.len() != trace.steps.len() {
            return Err(NnError::DimensionMismatch(format!(
                "gru backward got {} step gradients for {} steps",
                dhs.len(),
                trace.steps.len()
            )));
        }
        let hs = self.hidden;
        let inp = self.input;
        let Some(first) = trace.steps.first() else {
            return Err(NnError::BackwardBeforeForward);
        };
        let n = first.h.batch();
        let mut carry = Tensor::<F>::zeros(&[n, hs]);
        let mut dxs = vec![Tensor::zeros(&[n, inp]); trace.steps.len()];
        let wih = self.params[0].data().to_vec();
        let whh = self.params[1].data().to_vec();
        let mut dgi = vec![F::zero(); 3 * hs];
        let mut dgh = vec![F::zero(); 3 * hs];
        for t in (0..trace.steps.len()).rev() {
            let c = &trace.steps[t];
            dhs[t].expect_shape(&[n, hs], "gru step gradient")?;
            let mut dprev = Tensor::zeros(&[n, hs]);
            for s in 0..n {
                let hv = c.h.row(s);
                let xv = c.x.row(s);
                for j in 0..hs {
                    let k = s * hs + j;
                    let dh = dhs[t].row(s)[j] + carry.row(s)[j];
                    let (z, r, nv, hn) = (c.z[k], c.r[k], c.n[k], c.hn[k]);
                    let dn = dh * (F::one() - z);
                    let dz = dh * (hv[j] - nv);
                    dprev.row_mut(s)[j] = dh * z;
                    let dan = dn * (F::one() - nv * nv);
                    let dr = dan * hn;
                    let daz = dz * z * (F::one() - z);
                    let dar = dr * r * (F::one() - r);
                    dgi[j] = daz;
                    dgi[hs + j] = dar;
                    dgi[2 * hs + j] = dan;
                    dgh[j] = daz;
                    dgh[hs + j] = dar;
                    dgh[2 * hs + j] = dan * r;
                }
                let (g_wih, rest) = self.grads.split_at_mut(1);
                let (g_whh, rest) = rest.split_at_mut(1);
                let (g_bih, g_bhh) = rest.split_at_mut(1);
                let g_wih = g_wih[0].data_mut();
                let g_whh = g_whh[0].data_mut();
                let g_bih = g_bih[0].data_mut();
                let g_bhh = g_bhh[0].data_mut();
                let dx = dxs[t].row_mut(s);
                let dp = dprev.row_mut(s);
                for g in 0..3 * hs {
                    let a = dgi[g];
                    g_bih[g] += a;
                    if a != F::zero() {
                        let wr = &wih[g * inp..(g + 1) * inp];
                        let gw = &mut g_wih[g * inp..(g + 1) * inp];
                        for i in 0..inp {
                            gw[i] += a * xv[i];
                            dx[i] += a * wr[i];
                        }
                    }
                    let b = dgh[g];
                    g_bhh[g] += b;
                    if b != F::zero() {
                        let ur = &whh[g * hs..(g + 1) * hs];
                        let gu = &mut g_whh[g * hs..(g + 1) * hs];
                        for i in 0..hs {
                            gu[i] += b * hv[i];
                            dp[i] += b * ur[i];
                        }
                    }
                }
            }
            carry = dprev;
        }
        Ok((carry, dxs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_update_gate_bias_tracks_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gru = Gru::<f64>::new(2, 3, &mut rng).unwrap();
        let h0 = Tensor::zeros(&[4, 3]);
        let xs: Vec<_> = (0..5).map(|_| init::uniform(&[4, 2], 1.0, &mut rng)).collect();
        let (hs, _) = gru.forward_seq(&h0, &xs).unwrap();
        assert_eq!(hs.len(), 5);
        for h in hs {
            assert!(h.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gru = Gru::<f32>::new(2, 4, &mut rng).unwrap();
        let h0 = init::uniform(&[3, 4], 0.5, &mut rng);
        let xs: Vec<_> = (0..4).map(|_| init::uniform(&[3, 2], 1.0, &mut rng)).collect();
        let full = gru.infer_seq(&h0, &xs).unwrap();
        let h1 = Tensor::new(&[1, 4], h0.row(1).to_vec()).unwrap();
        let xs1: Vec<_> = xs.iter().map(|x| Tensor::new(&[1, 2], x.row(1).to_vec()).unwrap()).collect();
        let single = gru.infer_seq(&h1, &xs1).unwrap();
        assert_eq!(full[3].row(1), single[3].row(0));
    }
}
