//! Frequency banks and the empirical characteristic function.
//!
//! The ECF of a sample `x_1..x_n` at frequency `w` is the average of
//! `exp(i w·x_k)`. Complex values are carried as separate real and
//! imaginary vectors.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x d` block of feature vectors drawn from one domain.
///
/// A matrix may hold zero rows (an empty batch), but never zero columns and
/// never a non-finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    domain_id: String,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, domain_id: impl Into<String>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::invalid(
                "feature matrix must have at least one column",
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / values.ncols(), pos % values.ncols());
            return Err(Error::invalid(format!(
                "non-finite feature value at row {r}, column {c}"
            )));
        }
        Ok(Self {
            values,
            domain_id: domain_id.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], domain_id: impl Into<String>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!(
                "row {bad} has length {}, expected {d}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(values, domain_id)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(Axis(0), indices),
            domain_id: self.domain_id.clone(),
        }
    }

    pub fn with_domain(mut self, domain_id: impl Into<String>) -> Self {
        self.domain_id = domain_id.into();
        self
    }
}

/// How the frequency vectors of a bank are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Every entry i.i.d. `N(0, scale^2)`.
    Gaussian,
    /// `directions` random unit vectors, each swept from 0 to `scale`
    /// in `K / directions` equal steps.
    RadialSweep { directions: usize },
}

/// Everything needed to regenerate a [`FrequencyBank`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankParams {
    pub seed: u64,
    pub scale: f64,
    pub scheme: Scheme,
    #[serde(rename = "K")]
    pub k: usize,
}

impl Default for BankParams {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 1.0,
            scheme: Scheme::Gaussian,
            k: 64,
        }
    }
}

impl BankParams {
    pub fn sample(&self, dim: usize) -> Result<FrequencyBank> {
        sample_frequency_bank(dim, self.k, self.scale, self.seed, self.scheme)
    }
}

/// A `K x d` matrix of frequency vectors together with the parameters that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBank {
    freqs: Array2<f64>,
    params: BankParams,
}

impl FrequencyBank {
    /// Wraps an explicit frequency matrix. The stored parameters describe
    /// the layout only; such a bank cannot be regenerated from its seed.
    pub fn from_matrix(freqs: Array2<f64>, params: BankParams) -> Result<Self> {
        if freqs.nrows() == 0 || freqs.ncols() == 0 {
            return Err(Error::invalid("frequency bank must be non-empty"));
        }
        if freqs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frequency bank contains non-finite values"));
        }
        let params = BankParams {
            k: freqs.nrows(),
            ..params
        };
        Ok(Self { freqs, params })
    }

    pub fn len(&self) -> usize {
        self.freqs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.freqs.ncols()
    }

    pub fn freqs(&self) -> ArrayView2<'_, f64> {
        self.freqs.view()
    }

    pub fn params(&self) -> &BankParams {
        &self.params
    }
}

/// Draws a frequency bank.
///
/// Randomness comes from `ChaCha20Rng::seed_from_u64(seed)`; normal deviates
/// use `rand_distr::StandardNormal`. Entries are drawn in row-major order, so
/// the same arguments always give the same bank.
pub fn sample_frequency_bank(
    dim: usize,
    k: usize,
    scale: f64,
    seed: u64,
    scheme: Scheme,
) -> Result<FrequencyBank> {
    if dim == 0 {
        return Err(Error::invalid("bank dimension must be positive"));
    }
    if k == 0 {
        return Err(Error::invalid("bank size K must be positive"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "bank scale must be positive, got {scale}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let freqs = match scheme {
        Scheme::Gaussian => {
            Array2::from_shape_simple_fn((k, dim), || scale * rng.sample::<f64, _>(StandardNormal))
        }
        Scheme::RadialSweep { directions } => {
            if directions == 0 || !k.is_multiple_of(directions) {
                return Err(Error::invalid(format!(
                    "radial sweep needs K divisible by the direction count ({k} / {directions})"
                )));
            }
            let steps = k / directions;
            if steps < 2 {
                return Err(Error::invalid(
                    "radial sweep needs at least 2 steps per direction",
                ));
            }
            let mut freqs = Array2::zeros((k, dim));
            for m in 0..directions {
                let u = unit_direction(&mut rng, dim);
                for i in 0..steps {
                    let t = scale * i as f64 / (steps - 1) as f64;
                    let mut row = freqs.row_mut(m * steps + i);
                    for (dst, &uj) in row.iter_mut().zip(&u) {
                        *dst = t * uj;
                    }
                }
            }
            freqs
        }
    };
    Ok(FrequencyBank {
        freqs,
        params: BankParams {
            seed,
            scale,
            scheme,
            k,
        },
    })
}

fn unit_direction(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// ECF values at each frequency of a bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcfVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub n_samples: usize,
}

impl EcfVector {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    /// `|phi(w_k)|` for each frequency.
    pub fn modulus(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r.hypot(*i))
            .collect()
    }
}

/// Evaluates the empirical characteristic function of `features` at every
/// frequency of `bank`.
///
/// Samples are summed in row order for each frequency, so results are
/// bit-reproducible.
pub fn ecf_eval(features: &FeatureMatrix, bank: &FrequencyBank) -> Result<EcfVector> {
    if features.is_empty() {
        return Err(Error::invalid(
            "cannot evaluate the ECF of an empty feature matrix",
        ));
    }
    if features.ncols() != bank.dim() {
        return Err(Error::invalid(format!(
            "feature dimension {} does not match bank dimension {}",
            features.ncols(),
            bank.dim()
        )));
    }
    let x = features.values();
    let n = x.nrows() as f64;
    let mut re = Vec::with_capacity(bank.len());
    let mut im = Vec::with_capacity(bank.len());
    for w in bank.freqs().rows() {
        let (mut c, mut s) = (0.0, 0.0);
        for row in x.rows() {
            let phase = dot(w, row);
            c += phase.cos();
            s += phase.sin();
        }
        re.push(c / n);
        im.push(s / n);
    }
    Ok(EcfVector {
        re,
        im,
        n_samples: x.nrows(),
    })
}

#[inline]
pub(crate) fn dot(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Per-column location and divisor used to z-score features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, replaced by 1 for constant columns.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(features: &FeatureMatrix) -> Result<Self> {
        Self::fit_pooled(&[features])
    }

    /// Statistics of the row-wise concatenation of several matrices.
    pub fn fit_pooled(parts: &[&FeatureMatrix]) -> Result<Self> {
        let first = parts
            .iter()
            .find(|p| !p.is_empty())
            .ok_or_else(|| Error::invalid("cannot fit statistics on empty features"))?;
        let d = first.ncols();
        if let Some(bad) = parts.iter().find(|p| p.ncols() != d) {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {d}",
                bad.ncols()
            )));
        }
        let n: usize = parts.iter().map(|p| p.nrows()).sum();
        let n = n as f64;
        // Shift by the first row so that constant columns come out exactly.
        let pivot = first.row(0).to_vec();
        let mut shift_sum = vec![0.0; d];
        for p in parts {
            for row in p.values().rows() {
                for (j, v) in row.iter().enumerate() {
                    shift_sum[j] += v - pivot[j];
                }
            }
        }
        let mean: Vec<f64> = (0..d).map(|j| pivot[j] + shift_sum[j] / n).collect();
        let mut sq = vec![0.0; d];
        for p in parts {
            for row in p.values().rows() {
                for (j, v) in row.iter().enumerate() {
                    let c = v - mean[j];
                    sq[j] += c * c;
                }
            }
        }
        let std = sq
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        if features.ncols() != self.dim() {
            return Err(Error::invalid(format!(
                "standardizer dimension {} does not match features {}",
                self.dim(),
                features.ncols()
            )));
        }
        let mut values = features.values().to_owned();
        for mut row in values.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        FeatureMatrix::new(values, features.domain_id())
    }
}

/// Z-scores `features` column-wise with `stats`, or with statistics computed
/// from `features` itself when none are given. Returns the statistics used.
pub fn standardize(
    features: &FeatureMatrix,
    stats: Option<&Standardizer>,
) -> Result<(FeatureMatrix, Standardizer)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => Standardizer::fit(features)?,
    };
    let out = stats.apply(features)?;
    Ok((out, stats))
}
