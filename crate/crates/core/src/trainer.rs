//! Training the adapter with `erm + lambda * cfl`.
//!
//! The supervised term is softmax cross-entropy over labelled source
//! batches. The alignment term is the mean CFL over every unordered pair of
//! training-visible domain batches (sources and unlabelled targets), computed
//! on the embeddings. Gradients are exact and derived by hand.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DomainRole, LabeledDataset};
use crate::ecf::{dot, BankParams, EcfVector, FeatureMatrix, FrequencyBank, Standardizer};
use crate::error::{Error, Result};
use crate::loss::{cfl_distance, distance_matrix, ShiftReport};
use crate::model::{forward, AdapterModel, ModelDims};

/// Mean softmax cross-entropy of `logits` (one row per sample).
pub fn erm_loss(logits: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    Ok(cross_entropy(logits, labels)?.0)
}

/// Cross-entropy and its gradient with respect to the logits.
fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} logit rows but {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("cross-entropy of an empty batch"));
    }
    let classes = logits.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for ((row, mut g), &y) in logits.rows().into_iter().zip(grad.rows_mut()).zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[y];
        for (gj, &v) in g.iter_mut().zip(row.iter()) {
            *gj = (v - log_z).exp() / n;
        }
        g[y] -= 1.0 / n;
    }
    Ok((total / n, grad))
}

/// Value of the alignment term for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflTerm {
    pub value: f64,
    /// Set when fewer than two domains were supplied; `value` is then 0.
    pub single_domain: bool,
}

/// Mean CFL over all unordered pairs of domain embeddings.
pub fn cfl_step_loss(embeddings: &[FeatureMatrix], bank: &FrequencyBank) -> Result<CflTerm> {
    Ok(cfl_with_grad(embeddings, bank, false)?.0)
}

struct PhaseTable {
    ecf: EcfVector,
    cos: Array2<f64>,
    sin: Array2<f64>,
}

fn phase_table(z: &FeatureMatrix, bank: &FrequencyBank) -> Result<PhaseTable> {
    if z.is_empty() {
        return Err(Error::invalid("empty embedding batch"));
    }
    if z.ncols() != bank.dim() {
        return Err(Error::invalid(format!(
            "embedding dimension {} does not match bank dimension {}",
            z.ncols(),
            bank.dim()
        )));
    }
    let (n, k) = (z.nrows(), bank.len());
    let mut cos = Array2::zeros((n, k));
    let mut sin = Array2::zeros((n, k));
    let mut re = Vec::with_capacity(k);
    let mut im = Vec::with_capacity(k);
    // same per-frequency row-order summation as `ecf_eval`
    for (j, w) in bank.freqs().rows().into_iter().enumerate() {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, row) in z.values().rows().into_iter().enumerate() {
            let (sp, cp) = dot(w, row).sin_cos();
            cos[[i, j]] = cp;
            sin[[i, j]] = sp;
            c += cp;
            s += sp;
        }
        re.push(c / n as f64);
        im.push(s / n as f64);
    }
    Ok(PhaseTable {
        ecf: EcfVector {
            re,
            im,
            n_samples: n,
        },
        cos,
        sin,
    })
}

fn cfl_with_grad(
    embeddings: &[FeatureMatrix],
    bank: &FrequencyBank,
    want_grad: bool,
) -> Result<(CflTerm, Vec<Array2<f64>>)> {
    if embeddings.len() < 2 {
        for z in embeddings {
            phase_table(z, bank)?;
        }
        let grads = embeddings
            .iter()
            .map(|z| Array2::zeros((z.nrows(), z.ncols())))
            .collect();
        return Ok((
            CflTerm {
                value: 0.0,
                single_domain: true,
            },
            grads,
        ));
    }
    let tables = embeddings
        .iter()
        .map(|z| phase_table(z, bank))
        .collect::<Result<Vec<_>>>()?;
    let m = tables.len();
    let pairs = (m * (m - 1) / 2) as f64;
    let mut sum = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            sum += cfl_distance(&tables[a].ecf, &tables[b].ecf)?;
        }
    }
    let term = CflTerm {
        value: sum / pairs,
        single_domain: false,
    };
    if !want_grad {
        return Ok((term, Vec::new()));
    }
    let k = bank.len();
    let coef = 2.0 / (pairs * k as f64);
    let mut grads = Vec::with_capacity(m);
    for (a, ta) in tables.iter().enumerate() {
        // dL/d re_a[k] and dL/d im_a[k]
        let mut g_re = vec![0.0; k];
        let mut g_im = vec![0.0; k];
        for (b, tb) in tables.iter().enumerate() {
            if a == b {
                continue;
            }
            for j in 0..k {
                g_re[j] += coef * (ta.ecf.re[j] - tb.ecf.re[j]);
                g_im[j] += coef * (ta.ecf.im[j] - tb.ecf.im[j]);
            }
        }
        let n = ta.ecf.n_samples as f64;
        // d re / d theta = -sin / n, d im / d theta = cos / n
        let mut d_phase = Array2::zeros((ta.cos.nrows(), k));
        for ((i, j), v) in d_phase.indexed_iter_mut() {
            *v = (g_im[j] * ta.cos[[i, j]] - g_re[j] * ta.sin[[i, j]]) / n;
        }
        grads.push(d_phase.dot(&bank.freqs()));
    }
    Ok((term, grads))
}

/// A labelled batch from one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

/// Loss components and the gradient of `total` with respect to the flat
/// model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub total: f64,
    pub erm: f64,
    pub cfl: CflTerm,
    pub grad: Vec<f64>,
}

/// `erm + lambda * cfl` over one step's batches, with its exact gradient.
///
/// `erm` is the mean cross-entropy over the concatenated labelled batches.
/// `cfl` pairs up every batch, labelled and unlabelled.
pub fn total_loss(
    model: &AdapterModel,
    labeled: &[LabeledBatch],
    unlabeled: &[FeatureMatrix],
    bank: &FrequencyBank,
    lambda: f64,
) -> Result<LossEval> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if labeled.is_empty() {
        return Err(Error::invalid("at least one labelled batch is required"));
    }
    for b in labeled {
        if b.features.nrows() != b.labels.len() {
            return Err(Error::invalid("labelled batch has mismatched label count"));
        }
    }
    let caches = labeled
        .iter()
        .map(|b| &b.features)
        .chain(unlabeled)
        .map(|x| model.forward_cached(x))
        .collect::<Result<Vec<_>>>()?;
    let n_lab = labeled.len();

    let logits = ndarray::concatenate(
        Axis(0),
        &caches[..n_lab]
            .iter()
            .map(|c| c.logits.view())
            .collect::<Vec<_>>(),
    )
    .map_err(|e| Error::invalid(e.to_string()))?;
    let labels: Vec<usize> = labeled
        .iter()
        .flat_map(|b| b.labels.iter().copied())
        .collect();
    let (erm, d_logits) = cross_entropy(&logits, &labels)?;

    let embeddings = caches
        .iter()
        .zip(labeled.iter().map(|b| &b.features).chain(unlabeled))
        .map(|(c, x)| FeatureMatrix::new(c.embeddings().clone(), x.domain_id()))
        .collect::<Result<Vec<_>>>()?;
    let (cfl, d_embed) = cfl_with_grad(&embeddings, bank, lambda > 0.0)?;

    let mut grad = vec![0.0; model.param_count()];
    let mut row = 0;
    for (i, cache) in caches.iter().enumerate() {
        let dl = if i < n_lab {
            let n = cache.logits.nrows();
            let slice = d_logits.slice(ndarray::s![row..row + n, ..]).to_owned();
            row += n;
            Some(slice)
        } else {
            None
        };
        let de = if lambda > 0.0 {
            Some(&d_embed[i] * lambda)
        } else {
            None
        };
        if dl.is_some() || de.is_some() {
            model.backward(cache, dl.as_ref(), de.as_ref(), &mut grad);
        }
    }
    Ok(LossEval {
        total: erm + lambda * cfl.value,
        erm,
        cfl,
        grad,
    })
}

/// Hyper-parameters for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_per_domain: usize,
    /// Bank used for the alignment term and for the epoch reports. Its
    /// dimension is the embedding width.
    pub bank: BankParams,
    pub seed: u64,
    /// Draw a fresh bank (seeded from `bank.seed` and the step index) for
    /// every optimisation step. Reports always use the base bank.
    pub resample_bank_each_step: bool,
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            lambda: 0.1,
            epochs: 50,
            batch_per_domain: 32,
            bank: BankParams {
                scale: DEFAULT_EMBED_BANK_SCALE,
                ..BankParams::default()
            },
            seed: 0,
            resample_bank_each_step: false,
            hidden: vec![64],
            embed_dim: 32,
        }
    }
}

/// Default frequency scale for the embedding bank. Freshly initialised
/// 32-wide embeddings have a spread of several units, so a unit scale puts
/// nearly every frequency where the ECF has already decayed to noise.
pub const DEFAULT_EMBED_BANK_SCALE: f64 = 0.3;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_per_domain < 2 {
            return Err(Error::invalid("batch_per_domain must be at least 2"));
        }
        if self.embed_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        Ok(())
    }
}

/// Losses and domain distances at the end of one epoch. Epoch 0 describes
/// the initial model evaluated on all training data; later epochs carry the
/// mean of the per-step losses.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub erm: f64,
    pub cfl: f64,
    pub total: f64,
    pub report: ShiftReport,
}

#[derive(Serialize, Deserialize)]
struct HistoryLine {
    epoch: usize,
    erm: f64,
    cfl: f64,
    total: f64,
    matrix: Vec<Vec<f64>>,
}

impl EpochRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&HistoryLine {
            epoch: self.epoch,
            erm: self.erm,
            cfl: self.cfl,
            total: self.total,
            matrix: self.report.matrix.clone(),
        })?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The model after the last epoch.
    pub model: AdapterModel,
    pub history: Vec<EpochRecord>,
    pub steps: usize,
    pub bank: FrequencyBank,
}

impl TrainOutcome {
    pub fn initial_report(&self) -> &ShiftReport {
        &self.history[0].report
    }

    pub fn final_report(&self) -> &ShiftReport {
        &self.history.last().expect("history is never empty").report
    }

    pub fn write_history(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for rec in &self.history {
            writeln!(f, "{}", rec.to_json_line()?)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Optimisation steps per epoch: enough batches to cover the smallest
/// training-visible domain once.
pub fn steps_per_epoch(min_domain_size: usize, batch_per_domain: usize) -> usize {
    min_domain_size.div_ceil(batch_per_domain)
}

/// Embeds every domain of `dataset` and returns the pairwise distances.
pub fn embedding_report(
    model: &AdapterModel,
    dataset: &LabeledDataset,
    bank: &FrequencyBank,
) -> Result<ShiftReport> {
    let embeds = dataset
        .domains()
        .iter()
        .map(|d| forward(model, &d.features).map(|(e, _)| e))
        .collect::<Result<Vec<_>>>()?;
    distance_matrix(&embeds, bank)
}

/// Trains with plain SGD and returns the last-epoch model.
///
/// Inputs are standardised with pooled source statistics (stored in the
/// model). Each epoch reshuffles every source and target domain and runs
/// [`steps_per_epoch`] steps of `batch_per_domain` rows per domain, drawn
/// without replacement. All randomness derives from `config.seed`.
pub fn train(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let sources: Vec<_> = dataset.by_role(DomainRole::Source).collect();
    if sources.is_empty() {
        return Err(Error::invalid("training needs at least one source domain"));
    }
    if dataset.domains().iter().any(|d| d.is_empty()) {
        return Err(Error::invalid("every domain must contain samples"));
    }
    let targets: Vec<_> = dataset.by_role(DomainRole::Target).collect();

    let dims = ModelDims {
        input: dataset.dim(),
        hidden: config.hidden.clone(),
        embed: config.embed_dim,
        classes: dataset.classes().max(1),
    };
    let mut model = AdapterModel::init(&dims, config.seed)?;
    let source_refs: Vec<_> = sources.iter().map(|d| &d.features).collect();
    model.input = Standardizer::fit_pooled(&source_refs)?;
    let bank = config.bank.sample(config.embed_dim)?;

    let full_labeled: Vec<LabeledBatch> = sources
        .iter()
        .map(|d| LabeledBatch {
            features: d.features.clone(),
            labels: d.labels.clone(),
        })
        .collect();
    let full_unlabeled: Vec<FeatureMatrix> = targets.iter().map(|d| d.features.clone()).collect();

    let report_at = |model: &AdapterModel| -> Result<ShiftReport> {
        if dataset.domains().len() >= 2 {
            embedding_report(model, dataset, &bank)
        } else {
            Ok(ShiftReport {
                domain_ids: dataset.domain_ids().iter().map(|s| s.to_string()).collect(),
                matrix: vec![vec![0.0; dataset.domains().len()]; dataset.domains().len()],
                bank_meta: *bank.params(),
            })
        }
    };

    let init = total_loss(&model, &full_labeled, &full_unlabeled, &bank, config.lambda)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        erm: init.erm,
        cfl: init.cfl.value,
        total: init.total,
        report: report_at(&model)?,
    }];

    let visible: Vec<_> = sources.iter().chain(&targets).copied().collect();
    let min_size = visible.iter().map(|d| d.len()).min().expect("non-empty");
    let steps = steps_per_epoch(min_size, config.batch_per_domain);
    let b = config.batch_per_domain;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut orders: Vec<Vec<usize>> = visible.iter().map(|d| (0..d.len()).collect()).collect();
    let mut global_step: u64 = 0;

    for epoch in 1..=config.epochs {
        for order in &mut orders {
            order.shuffle(&mut rng);
        }
        let (mut erm_sum, mut cfl_sum, mut total_sum) = (0.0, 0.0, 0.0);
        for s in 0..steps {
            let mut labeled = Vec::with_capacity(sources.len());
            let mut unlabeled = Vec::with_capacity(targets.len());
            for (d, order) in visible.iter().zip(&orders) {
                let end = ((s + 1) * b).min(order.len());
                let idx = &order[s * b..end];
                let features = d.features.select_rows(idx);
                if d.role == DomainRole::Source {
                    let labels = idx.iter().map(|&i| d.labels[i]).collect();
                    labeled.push(LabeledBatch { features, labels });
                } else {
                    unlabeled.push(features);
                }
            }
            let step_bank = if config.resample_bank_each_step {
                BankParams {
                    seed: config.bank.seed.wrapping_add(global_step + 1),
                    ..config.bank
                }
                .sample(config.embed_dim)?
            } else {
                bank.clone()
            };
            let eval = total_loss(&model, &labeled, &unlabeled, &step_bank, config.lambda)?;
            model.sgd_step(&eval.grad, config.lr)?;
            if model.params().iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "training diverged at epoch {epoch}, step {s}"
                )));
            }
            erm_sum += eval.erm;
            cfl_sum += eval.cfl.value;
            total_sum += eval.total;
            global_step += 1;
        }
        let n = steps as f64;
        history.push(EpochRecord {
            epoch,
            erm: erm_sum / n,
            cfl: cfl_sum / n,
            total: total_sum / n,
            report: report_at(&model)?,
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        steps: global_step as usize,
        bank,
    })
}

/// Index of the largest logit, ties resolved toward the lower class.
pub fn argmax_row(row: ndarray::ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Classification accuracy of `model` on each listed domain.
pub fn evaluate(
    model: &AdapterModel,
    dataset: &LabeledDataset,
    domain_ids: &[&str],
) -> Result<Vec<(String, f64)>> {
    if dataset.dim() != model.input_dim() {
        return Err(Error::invalid(format!(
            "dataset dimension {} does not match model input {}",
            dataset.dim(),
            model.input_dim()
        )));
    }
    domain_ids
        .iter()
        .map(|id| {
            let d = dataset
                .domain(id)
                .ok_or_else(|| Error::invalid(format!("unknown domain {id}")))?;
            if d.is_empty() {
                return Err(Error::invalid(format!("domain {id} is empty")));
            }
            let (_, logits) = forward(model, &d.features)?;
            let correct = logits
                .rows()
                .into_iter()
                .zip(&d.labels)
                .filter(|(row, &y)| argmax_row(row.view()) == y)
                .count();
            Ok((id.to_string(), correct as f64 / d.len() as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecf::{sample_frequency_bank, Scheme};
    use crate::loss::cfl_between;
    use ndarray::array;

    #[test]
    fn uniform_logits_give_log_classes() {
        let logits = Array2::zeros((3, 4));
        let l = erm_loss(&logits, &[0, 1, 3]).unwrap();
        assert!((l - 4.0_f64.ln()).abs() < 1e-15);
        assert!((l - 1.3862943611).abs() < 1e-10);
    }

    #[test]
    fn confident_logits_give_tiny_loss() {
        let logits = array![[100.0, 0.0], [0.0, 100.0]];
        let l = erm_loss(&logits, &[0, 1]).unwrap();
        assert!(l < 1e-40, "{l}");
        assert!(l >= 0.0);
    }

    #[test]
    fn hand_evaluated_cross_entropy() {
        // -log softmax: ln(e^1 + e^2) - logit[label]
        let l0 = erm_loss(&array![[1.0, 2.0]], &[0]).unwrap();
        assert!((l0 - 1.3132616875).abs() < 1e-10, "{l0}");
        let l1 = erm_loss(&array![[1.0, 2.0]], &[1]).unwrap();
        assert!((l1 - 0.3132616875).abs() < 1e-10, "{l1}");
    }

    #[test]
    fn cross_entropy_errors() {
        assert!(erm_loss(&array![[1.0, 2.0]], &[2]).is_err());
        assert!(erm_loss(&array![[1.0, 2.0]], &[0, 1]).is_err());
    }

    fn blob(n: usize, d: usize, shift: f64, seed: u64, id: &str) -> FeatureMatrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let v = Array2::from_shape_simple_fn((n, d), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let mut v = v;
        v.column_mut(0).mapv_inplace(|x| x + shift);
        FeatureMatrix::new(v, id).unwrap()
    }

    #[test]
    fn step_cfl_is_mean_of_pairs() {
        let bank = sample_frequency_bank(3, 16, 1.0, 2, Scheme::Gaussian).unwrap();
        let a = blob(20, 3, 0.0, 1, "a");
        let b = blob(25, 3, 1.0, 2, "b");
        let c = blob(30, 3, -0.5, 3, "c");
        let p = cfl_between(&a, &b, &bank).unwrap();
        let q = cfl_between(&a, &c, &bank).unwrap();
        let r = cfl_between(&b, &c, &bank).unwrap();
        let t = cfl_step_loss(&[a.clone(), b, c], &bank).unwrap();
        assert_eq!(t.value, (p + q + r) / 3.0);
        assert!(!t.single_domain);
        assert_eq!(
            cfl_step_loss(&[a.clone(), a.clone()], &bank).unwrap().value,
            0.0
        );
        let one = cfl_step_loss(&[a], &bank).unwrap();
        assert!(one.single_domain);
        assert_eq!(one.value, 0.0);
    }

    #[test]
    fn step_cfl_grows_with_shift() {
        let bank = sample_frequency_bank(2, 64, 1.0, 0, Scheme::Gaussian).unwrap();
        let same = [
            blob(512, 2, 0.0, 1, "a"),
            blob(512, 2, 0.0, 2, "b"),
            blob(512, 2, 0.0, 3, "c"),
        ];
        let shifted = [
            blob(512, 2, 0.0, 1, "a"),
            blob(512, 2, 0.0, 2, "b"),
            blob(512, 2, 3.0, 3, "c"),
        ];
        let lo = cfl_step_loss(&same, &bank).unwrap().value;
        let hi = cfl_step_loss(&shifted, &bank).unwrap().value;
        assert!(lo < hi, "{lo} vs {hi}");
    }

    fn tiny_setup() -> (
        AdapterModel,
        Vec<LabeledBatch>,
        Vec<FeatureMatrix>,
        FrequencyBank,
    ) {
        let dims = ModelDims {
            input: 3,
            hidden: vec![4],
            embed: 2,
            classes: 2,
        };
        let model = AdapterModel::init(&dims, 5).unwrap();
        let xa = blob(6, 3, 0.0, 10, "a");
        let xb = blob(6, 3, 1.5, 11, "b");
        let labeled = vec![LabeledBatch {
            features: xa,
            labels: vec![0, 1, 0, 1, 1, 0],
        }];
        let bank = sample_frequency_bank(2, 8, 1.0, 3, Scheme::Gaussian).unwrap();
        (model, labeled, vec![xb], bank)
    }

    #[test]
    fn zero_lambda_reduces_to_erm() {
        let (model, labeled, unlabeled, bank) = tiny_setup();
        let e = total_loss(&model, &labeled, &unlabeled, &bank, 0.0).unwrap();
        let (_, logits) = forward(&model, &labeled[0].features).unwrap();
        assert_eq!(e.total, erm_loss(&logits, &labeled[0].labels).unwrap());
        let erm_only = total_loss(&model, &labeled, &[], &bank, 0.0).unwrap();
        assert_eq!(e.grad, erm_only.grad);
        assert!(e.cfl.value > 0.0);
    }

    #[test]
    fn identical_domains_have_no_alignment_cost() {
        let (model, labeled, _, bank) = tiny_setup();
        let same = vec![labeled[0].features.clone()];
        let e = total_loss(&model, &labeled, &same, &bank, 0.7).unwrap();
        assert_eq!(e.cfl.value, 0.0);
        assert_eq!(e.total, e.erm);
    }

    #[test]
    fn total_loss_rejects_bad_inputs() {
        let (model, labeled, unlabeled, bank) = tiny_setup();
        assert!(total_loss(&model, &labeled, &unlabeled, &bank, -0.1).is_err());
        assert!(total_loss(&model, &[], &unlabeled, &bank, 0.1).is_err());
        let wrong_bank = sample_frequency_bank(3, 8, 1.0, 3, Scheme::Gaussian).unwrap();
        assert!(total_loss(&model, &labeled, &unlabeled, &wrong_bank, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.lr, 0.001);
        assert_eq!(ok.lambda, 0.1);
        for bad in [
            TrainConfig {
                epochs: 0,
                ..ok.clone()
            },
            TrainConfig {
                lr: 0.0,
                ..ok.clone()
            },
            TrainConfig {
                lambda: -1.0,
                ..ok.clone()
            },
            TrainConfig {
                batch_per_domain: 1,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_row(array![1.0, 1.0, 0.5].view()), 0);
        assert_eq!(argmax_row(array![0.0, 2.0, 2.0].view()), 1);
    }

    #[test]
    fn steps_round_up() {
        assert_eq!(steps_per_epoch(600, 32), 19);
        assert_eq!(steps_per_epoch(64, 32), 2);
        assert_eq!(steps_per_epoch(1, 32), 1);
    }
}
