//! Joint optimisation of the pointer and label losses with Adam, global
//! gradient-norm clipping, step-wise learning-rate decay and dev-LAS model
//! selection.

use std::fmt;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph, ParamStore, Var};
use crate::decoding;
use crate::encoding::{decode, AugmentedDependencyTree};
use crate::evaluation::{bracket_f1, las_uas, EvalConfig};
use crate::model::{Forward, Model, ModelConfig, Pretrained, Vocabulary};
use crate::{Error, Result};

mod config;

pub use config::parse_config;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub decay_rate: f64,
    /// Optimizer steps between learning-rate decays.
    pub decay_steps: u64,
    pub clip: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many evaluations without a dev-LAS improvement.
    pub patience: usize,
    /// Beam width used when parsing the dev set.
    pub eval_beam: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
            decay_rate: 0.75,
            decay_steps: 5000,
            clip: 5.0,
            batch_size: 32,
            epochs: 100,
            patience: 20,
            eval_beam: 1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Argument(what.to_string()));
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.learning_rate) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !positive(self.epsilon) || !positive(self.clip) {
            return bad("epsilon and clip must be positive");
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad("decay_rate must lie in (0, 1]");
        }
        if self.decay_steps == 0 || self.batch_size == 0 || self.eval_beam == 0 {
            return bad("decay_steps, batch_size and eval_beam must be positive");
        }
        Ok(())
    }
}

fn gold_label_ids(model: &Model, dep: &AugmentedDependencyTree) -> Result<Vec<usize>> {
    dep.labels()
        .iter()
        .map(|l| {
            model
                .vocab()
                .labels
                .get(&l.to_string())
                .ok_or_else(|| Error::Argument(format!("label {l} is not in the inventory")))
        })
        .collect()
}

/// `L_arc`: summed cross-entropy of each word's pointer distribution
/// against its gold head.
pub fn arc_loss(model: &Model, g: &mut Graph, fwd: &Forward, heads: &[usize]) -> Result<Var> {
    let scores = model.attention_scores(g, fwd)?;
    g.cross_entropy_rows(scores, heads)
}

/// `L_label`: summed cross-entropy of the label distribution at each gold
/// arc.
pub fn label_loss(
    model: &Model,
    g: &mut Graph,
    fwd: &Forward,
    heads: &[usize],
    labels: &[usize],
) -> Result<Var> {
    let scores = model.label_scores(g, fwd, heads)?;
    g.cross_entropy_rows(scores, labels)
}

/// Loss nodes for one sentence.
#[derive(Clone, Copy, Debug)]
pub struct SentenceLoss {
    pub arc: Var,
    pub label: Var,
    pub total: Var,
}

/// `L_arc + L_label` for one gold tree.
pub fn joint_loss(model: &Model, g: &mut Graph, dep: &AugmentedDependencyTree) -> Result<SentenceLoss> {
    let labels = gold_label_ids(model, dep)?;
    let fwd = model.forward(g, dep.tokens())?;
    let arc = arc_loss(model, g, &fwd, dep.heads())?;
    let label = label_loss(model, g, &fwd, dep.heads(), &labels)?;
    let total = g.add(arc, label)?;
    Ok(SentenceLoss { arc, label, total })
}

/// Adam with bias correction. Moments are kept for every parameter.
#[derive(Clone, Debug)]
pub struct Adam {
    config: TrainConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(params: &ParamStore, config: &TrainConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Adam {
            config: config.clone(),
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Rate for the next update: `lr * decay^floor(steps / decay_steps)`.
    pub fn learning_rate(&self) -> f64 {
        let c = &self.config;
        c.learning_rate * c.decay_rate.powi((self.step / c.decay_steps) as i32)
    }

    /// Clip `grads` to the configured global norm, then update `params`.
    /// Returns the norm before clipping.
    pub fn update(&mut self, params: &mut ParamStore, grads: &mut Gradients) -> Result<f64> {
        let norm = clip_gradients(grads, self.config.clip);
        if !norm.is_finite() {
            return Err(Error::Numeric(format!("gradient norm is {norm}")));
        }
        let lr = self.learning_rate();
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let correct1 = 1.0 - c.beta1.powi(t);
        let correct2 = 1.0 - c.beta2.powi(t);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            let grad = grads.get(id);
            let data = params.get_mut(id).data_mut();
            for k in 0..data.len() {
                let g = grad.map_or(0.0, |g| g[k]);
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
                let m_hat = m[k] / correct1;
                let v_hat = v[k] / correct2;
                data[k] -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(norm)
    }
}

/// Rescale `grads` so their global norm is at most `max_norm`. Returns
/// the original norm.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Losses of one batch, summed over sentences.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchLoss {
    pub arc: f64,
    pub label: f64,
}

/// One optimisation step on the summed joint loss of `batch`.
pub fn joint_step(
    model: &mut Model,
    adam: &mut Adam,
    batch: &[&AugmentedDependencyTree],
    seed: u64,
) -> Result<BatchLoss> {
    let (loss, mut grads) = {
        let mut g = Graph::new(model.params(), true, seed);
        let mut arc = Vec::new();
        let mut label = Vec::new();
        let mut totals = Vec::new();
        for dep in batch {
            let l = joint_loss(model, &mut g, dep)?;
            arc.push(g.scalar(l.arc));
            label.push(g.scalar(l.label));
            totals.push(l.total);
        }
        let stacked = g.concat(&totals);
        let total = g.sum(stacked);
        let loss = BatchLoss {
            arc: arc.iter().sum(),
            label: label.iter().sum(),
        };
        if !g.scalar(total).is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {}", g.scalar(total))));
        }
        (loss, g.backward(total)?)
    };
    adam.update(model.params_mut(), &mut grads)?;
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean per-sentence losses over the epoch.
    pub arc_loss: f64,
    pub label_loss: f64,
    pub learning_rate: f64,
    pub dev_las: f64,
    pub dev_uas: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Index into `epochs` of the selected model.
    pub best: Option<usize>,
}

impl TrainReport {
    pub fn best_epoch(&self) -> Option<&EpochReport> {
        self.best.map(|i| &self.epochs[i])
    }
}

impl fmt::Display for EpochReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {:4}  arc {:.4}  label {:.4}  lr {:.6}  dev LAS {:.2}  UAS {:.2}  F1 {:.2}",
            self.epoch,
            self.arc_loss,
            self.label_loss,
            self.learning_rate,
            self.dev_las,
            self.dev_uas,
            self.dev_f1
        )
    }
}

/// Dev-set scores: `(LAS, UAS, F1)`.
pub fn evaluate(model: &Model, dev: &[AugmentedDependencyTree], beam: usize) -> Result<(f64, f64, f64)> {
    let mut pred_deps = Vec::with_capacity(dev.len());
    let mut pred_trees = Vec::with_capacity(dev.len());
    let mut gold_trees = Vec::with_capacity(dev.len());
    for dep in dev {
        let parsed = decoding::beam_parse(model, dep.tokens(), beam)?;
        pred_trees.push(decode(&parsed)?);
        pred_deps.push(parsed);
        gold_trees.push(decode(dep)?);
    }
    let (las, uas) = las_uas(dev, &pred_deps)?;
    let report = bracket_f1(&gold_trees, &pred_trees, &EvalConfig::default())?;
    Ok((las, uas, report.f1))
}

/// Length-bucketed batches in a seeded random order.
fn batches(corpus: &[AugmentedDependencyTree], size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| corpus[i].len());
    let mut out: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    out.shuffle(rng);
    out
}

/// Train a fresh model and return the one with the best dev LAS.
///
/// Evaluation runs after every epoch; training stops after
/// `patience` evaluations without a strict LAS improvement.
pub fn train(
    corpus: &[AugmentedDependencyTree],
    dev: &[AugmentedDependencyTree],
    model_config: &ModelConfig,
    config: &TrainConfig,
    pretrained: Option<&Pretrained>,
) -> Result<(Model, TrainReport)> {
    if corpus.is_empty() || dev.is_empty() {
        return Err(Error::Argument("training and dev corpora must be non-empty".into()));
    }
    config.validate()?;
    let extra = pretrained
        .into_iter()
        .flat_map(|p| p.vectors.iter().map(|(w, _)| w.clone()));
    let vocab = Vocabulary::build(corpus, extra);
    let mut model = Model::new(model_config.clone(), vocab, config.seed)?;
    if let Some(p) = pretrained {
        let hits = model.init_pretrained(p)?;
        info!("initialised {hits} word vectors from pretrained embeddings");
    }
    let mut adam = Adam::new(model.params(), config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        let learning_rate = adam.learning_rate();
        let mut sums = BatchLoss::default();
        for batch in batches(corpus, config.batch_size, &mut rng) {
            let refs: Vec<&AugmentedDependencyTree> = batch.iter().map(|&i| &corpus[i]).collect();
            let loss = joint_step(&mut model, &mut adam, &refs, rng.gen())?;
            sums.arc += loss.arc;
            sums.label += loss.label;
        }
        let (dev_las, dev_uas, dev_f1) = evaluate(&model, dev, config.eval_beam)?;
        let entry = EpochReport {
            epoch,
            arc_loss: sums.arc / corpus.len() as f64,
            label_loss: sums.label / corpus.len() as f64,
            learning_rate,
            dev_las,
            dev_uas,
            dev_f1,
        };
        info!("{entry}");
        report.epochs.push(entry);

        if best.as_ref().is_none_or(|(las, _)| dev_las > *las) {
            best = Some((dev_las, model.params().clone()));
            report.best = Some(report.epochs.len() - 1);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                info!("no dev LAS improvement for {stale} evaluations, stopping");
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok((model, report))
}
