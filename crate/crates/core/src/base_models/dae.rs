use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codec::{Reader, Writer};
use crate::dataset::RatingMatrix;
use crate::error::{LocaError, Result};

/// Clamp applied inside the cross-entropy logarithms.
pub const LOG_EPS: f64 = 1e-10;

/// Optimizer and regularization settings for DAE training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub l2: f64,
    pub init_std: f64,
    /// Input corruption rate, in `[0, 1)`.
    pub dropout: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 512,
            max_epochs: 200,
            patience: 50,
            l2: 0.001,
            init_std: 0.01,
            dropout: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(LocaError::Config(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l2 >= 0.0 && self.init_std >= 0.0) {
            return bad("l2 and init_std must be nonnegative");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2) && self.adam_eps > 0.0) {
            return bad("adam_beta1/beta2 must lie in [0, 1) and adam_eps be positive");
        }
        Ok(())
    }
}

/// One-hidden-layer denoising autoencoder: tanh hidden layer, sigmoid output,
/// untied encoder/decoder weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DaeModel {
    n_items: usize,
    hidden: usize,
    /// `n × d`, row-major.
    pub w_enc: Vec<f64>,
    pub b_enc: Vec<f64>,
    /// `d × n`, row-major.
    pub w_dec: Vec<f64>,
    pub b_dec: Vec<f64>,
    pub dropout: f64,
    pub seed: u64,
}

/// Gradient of the weighted objective, laid out like [`DaeModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct DaeGradient {
    pub w_enc: Vec<f64>,
    pub b_enc: Vec<f64>,
    pub w_dec: Vec<f64>,
    pub b_dec: Vec<f64>,
}

impl DaeGradient {
    fn zeros(n: usize, d: usize) -> Self {
        DaeGradient {
            w_enc: vec![0.0; n * d],
            b_enc: vec![0.0; d],
            w_dec: vec![0.0; d * n],
            b_dec: vec![0.0; n],
        }
    }

    /// Concatenation in [`DaeModel::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w_enc[..], &self.b_enc, &self.w_dec, &self.b_dec].concat()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl DaeModel {
    /// All-zero network.
    pub fn zeros(n_items: usize, hidden: usize) -> Self {
        DaeModel {
            n_items,
            hidden,
            w_enc: vec![0.0; n_items * hidden],
            b_enc: vec![0.0; hidden],
            w_dec: vec![0.0; hidden * n_items],
            b_dec: vec![0.0; n_items],
            dropout: 0.0,
            seed: 0,
        }
    }

    /// Parameters drawn from `N(0, init_std²)`.
    pub fn random(n_items: usize, hidden: usize, init_std: f64, rng: &mut impl Rng) -> Result<Self> {
        let normal = Normal::new(0.0, init_std).map_err(|e| LocaError::Config(format!("init_std: {e}")))?;
        let mut model = Self::zeros(n_items, hidden);
        for block in [&mut model.w_enc, &mut model.b_enc, &mut model.w_dec, &mut model.b_dec] {
            block.iter_mut().for_each(|p| *p = normal.sample(rng));
        }
        Ok(model)
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn n_parameters(&self) -> usize {
        2 * self.n_items * self.hidden + self.hidden + self.n_items
    }

    /// Flat copy of every parameter: `w_enc, b_enc, w_dec, b_dec`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w_enc[..], &self.b_enc, &self.w_dec, &self.b_dec].concat()
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_parameters() {
            return Err(LocaError::DimensionMismatch {
                expected: self.n_parameters(),
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        for block in [&mut self.w_enc, &mut self.b_enc, &mut self.w_dec, &mut self.b_dec] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn hidden_sparse(&self, input: &[(usize, f64)]) -> Vec<f64> {
        let d = self.hidden;
        let mut a = self.b_enc.clone();
        for &(i, v) in input {
            let w = &self.w_enc[i * d..(i + 1) * d];
            a.iter_mut().zip(w).for_each(|(a, w)| *a += v * w);
        }
        a.iter_mut().for_each(|x| *x = x.tanh());
        a
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let n = self.n_items;
        let mut z = self.b_dec.clone();
        for (k, &hk) in h.iter().enumerate() {
            if hk == 0.0 {
                continue;
            }
            let w = &self.w_dec[k * n..(k + 1) * n];
            z.iter_mut().zip(w).for_each(|(z, w)| *z += hk * w);
        }
        z
    }

    /// Hidden activation for a user's positive items.
    pub fn hidden(&self, row: &[usize]) -> Vec<f64> {
        let input: Vec<(usize, f64)> = row.iter().map(|&i| (i, 1.0)).collect();
        self.hidden_sparse(&input)
    }

    /// Reconstruction scores in `(0, 1)` with dropout disabled.
    pub fn score(&self, row: &[usize]) -> Vec<f64> {
        let h = self.hidden(row);
        self.logits(&h).into_iter().map(sigmoid).collect()
    }

    /// Dense variant of [`DaeModel::score`].
    pub fn score_dense(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_items {
            return Err(LocaError::DimensionMismatch {
                expected: self.n_items,
                actual: r.len(),
            });
        }
        let input: Vec<(usize, f64)> = r
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i, x))
            .collect();
        let h = self.hidden_sparse(&input);
        Ok(self.logits(&h).into_iter().map(sigmoid).collect())
    }

    fn frobenius(&self) -> f64 {
        self.w_enc.iter().chain(&self.w_dec).map(|w| w * w).sum()
    }

    /// Weighted cross-entropy plus `reg_scale · l2 · (‖W_enc‖² + ‖W_dec‖²)`,
    /// with optional gradient.
    fn evaluate(
        &self,
        inputs: &[Vec<(usize, f64)>],
        targets: &[&[usize]],
        weights: &[f64],
        l2: f64,
        reg_scale: f64,
        mut grad: Option<&mut DaeGradient>,
    ) -> f64 {
        let n = self.n_items;
        let d = self.hidden;
        let mut loss = 0.0;
        let mut target = vec![false; n];
        let mut dz = vec![0.0; n];
        for ((input, row), &t) in inputs.iter().zip(targets).zip(weights) {
            if t == 0.0 {
                continue;
            }
            row.iter().for_each(|&i| target[i] = true);
            let h = self.hidden_sparse(input);
            let z = self.logits(&h);
            let mut user_loss = 0.0;
            for i in 0..n {
                let (p, q) = (sigmoid(z[i]), sigmoid(-z[i]));
                if target[i] {
                    user_loss -= p.max(LOG_EPS).ln();
                    dz[i] = if p > LOG_EPS { -q } else { 0.0 };
                } else {
                    user_loss -= q.max(LOG_EPS).ln();
                    dz[i] = if q > LOG_EPS { p } else { 0.0 };
                }
                dz[i] *= t;
            }
            loss += t * user_loss;
            row.iter().for_each(|&i| target[i] = false);

            let Some(g) = grad.as_deref_mut() else { continue };
            g.b_dec.iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
            let mut da = vec![0.0; d];
            for k in 0..d {
                let w = &self.w_dec[k * n..(k + 1) * n];
                let gw = &mut g.w_dec[k * n..(k + 1) * n];
                let mut dh = 0.0;
                for i in 0..n {
                    gw[i] += h[k] * dz[i];
                    dh += w[i] * dz[i];
                }
                da[k] = dh * (1.0 - h[k] * h[k]);
            }
            g.b_enc.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
            for &(i, v) in input {
                let gw = &mut g.w_enc[i * d..(i + 1) * d];
                gw.iter_mut().zip(&da).for_each(|(g, d)| *g += v * d);
            }
        }
        let reg = reg_scale * l2;
        if let Some(g) = grad {
            g.w_enc
                .iter_mut()
                .zip(&self.w_enc)
                .for_each(|(g, w)| *g += 2.0 * reg * w);
            g.w_dec
                .iter_mut()
                .zip(&self.w_dec)
                .for_each(|(g, w)| *g += 2.0 * reg * w);
        }
        loss + reg * self.frobenius()
    }

    fn clean_inputs(rows: &[&[usize]]) -> Vec<Vec<(usize, f64)>> {
        rows.iter().map(|r| r.iter().map(|&i| (i, 1.0)).collect()).collect()
    }

    /// Uncorrupted weighted objective `Σ_u t_u·CE(r_u, r̂_u) + l2·Ω`.
    pub fn objective(&self, rows: &[&[usize]], weights: &[f64], l2: f64) -> f64 {
        self.evaluate(&Self::clean_inputs(rows), rows, weights, l2, 1.0, None)
    }

    /// Objective and its analytic gradient, dropout disabled.
    pub fn objective_and_gradient(&self, rows: &[&[usize]], weights: &[f64], l2: f64) -> (f64, DaeGradient) {
        let mut g = DaeGradient::zeros(self.n_items, self.hidden);
        let loss = self.evaluate(&Self::clean_inputs(rows), rows, weights, l2, 1.0, Some(&mut g));
        (loss, g)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u64(self.n_items as u64);
        w.u64(self.hidden as u64);
        w.f64(self.dropout);
        w.u64(self.seed);
        w.f64s(&self.w_enc);
        w.f64s(&self.b_enc);
        w.f64s(&self.w_dec);
        w.f64s(&self.b_dec);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.u64()? as usize;
        let d = r.u64()? as usize;
        let dropout = r.f64()?;
        let seed = r.u64()?;
        Ok(DaeModel {
            n_items: n,
            hidden: d,
            w_enc: r.f64s(n * d)?,
            b_enc: r.f64s(d)?,
            w_dec: r.f64s(d * n)?,
            b_dec: r.f64s(n)?,
            dropout,
            seed,
        })
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(size: usize) -> Self {
        Adam {
            m: vec![0.0; size],
            v: vec![0.0; size],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.adam_beta1.powi(self.step);
        let bc2 = 1.0 - cfg.adam_beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.adam_beta1 * *m + (1.0 - cfg.adam_beta1) * g;
            *v = cfg.adam_beta2 * *v + (1.0 - cfg.adam_beta2) * g * g;
            *p -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.adam_eps);
        }
    }
}

/// Trains a DAE on the users with positive weight. See [`train_dae_traced`].
pub fn train_dae(
    train: &RatingMatrix,
    row_weights: &[f64],
    hidden: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<DaeModel> {
    train_dae_traced(train, row_weights, hidden, config, seed).map(|(model, _)| model)
}

/// Trains a DAE with Adam on mini-batches of users with `t_u > 0` and also
/// returns the per-epoch training objective.
///
/// A single ChaCha stream seeded by `seed` drives initialization, the
/// per-epoch shuffle and the dropout masks, in that order. Inputs are
/// corrupted with inverted dropout. Training stops after `max_epochs` or once
/// `patience` consecutive epochs fail to improve the objective.
pub fn train_dae_traced(
    train: &RatingMatrix,
    row_weights: &[f64],
    hidden: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<(DaeModel, Vec<f64>)> {
    config.validate()?;
    let m = train.n_users();
    let n = train.n_items();
    if row_weights.len() != m {
        return Err(LocaError::DimensionMismatch {
            expected: m,
            actual: row_weights.len(),
        });
    }
    if hidden == 0 {
        return Err(LocaError::Config("DAE hidden dimension must be at least 1".into()));
    }
    if row_weights.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(LocaError::Config("row weights must be finite and nonnegative".into()));
    }
    let mut active: Vec<usize> = (0..m).filter(|&u| row_weights[u] > 0.0).collect();
    if active.is_empty() {
        return Err(LocaError::Config("all row weights are zero".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = DaeModel::random(n, hidden, config.init_std, &mut rng)?;
    model.dropout = config.dropout;
    model.seed = seed;

    let keep = 1.0 - config.dropout;
    let mut adam = Adam::new(model.n_parameters());
    let mut params = model.parameters();
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        active.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in active.chunks(config.batch_size) {
            let targets: Vec<&[usize]> = batch.iter().map(|&u| train.row(u)).collect();
            let weights: Vec<f64> = batch.iter().map(|&u| row_weights[u]).collect();
            let inputs: Vec<Vec<(usize, f64)>> = targets
                .iter()
                .map(|row| {
                    if config.dropout == 0.0 {
                        return row.iter().map(|&i| (i, 1.0)).collect();
                    }
                    row.iter()
                        .filter(|_| rng.random::<f64>() < keep)
                        .map(|&i| (i, 1.0 / keep))
                        .collect()
                })
                .collect();
            let reg_scale = batch.len() as f64 / active.len() as f64;
            let mut grad = DaeGradient::zeros(n, hidden);
            let loss = model.evaluate(&inputs, &targets, &weights, config.l2, reg_scale, Some(&mut grad));
            if !loss.is_finite() {
                return Err(LocaError::Training {
                    epoch,
                    message: format!("non-finite loss {loss}"),
                });
            }
            epoch_loss += loss;
            adam.update(&mut params, &grad.flatten(), config);
            model.set_parameters(&params)?;
        }
        history.push(epoch_loss);
        log::trace!("dae epoch {epoch}: loss {epoch_loss:.6}");
        if epoch_loss < best {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok((model, history))
}
