//! Characteristic-function loss (CFL) and pairwise domain distances.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ecf::{ecf_eval, BankParams, EcfVector, FeatureMatrix, FrequencyBank};
use crate::error::{Error, Result};

/// Mean squared modulus of the difference of two ECFs over the bank
/// frequencies: `(1/K) sum_k |phi_a(w_k) - phi_b(w_k)|^2`.
///
/// Each ECF value lies in the unit disk, so the result is in `[0, 4]`.
pub fn cfl_distance(a: &EcfVector, b: &EcfVector) -> Result<f64> {
    if a.re.len() != b.re.len() || a.im.len() != a.re.len() || b.im.len() != b.re.len() {
        return Err(Error::invalid(format!(
            "ECF length mismatch: {} vs {}",
            a.re.len(),
            b.re.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("ECF vectors are empty"));
    }
    let sum: f64 = (0..a.len())
        .map(|k| {
            let dr = a.re[k] - b.re[k];
            let di = a.im[k] - b.im[k];
            dr * dr + di * di
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// CFL between two feature sets evaluated on a shared bank.
pub fn cfl_between(a: &FeatureMatrix, b: &FeatureMatrix, bank: &FrequencyBank) -> Result<f64> {
    cfl_distance(&ecf_eval(a, bank)?, &ecf_eval(b, bank)?)
}

/// Symmetric matrix of pairwise CFL distances between domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    #[serde(rename = "domains")]
    pub domain_ids: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    #[serde(rename = "bank")]
    pub bank_meta: BankParams,
}

impl ShiftReport {
    pub fn len(&self) -> usize {
        self.domain_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain_ids.is_empty()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.domain_ids.iter().position(|d| d == a)?;
        let j = self.domain_ids.iter().position(|d| d == b)?;
        Some(self.matrix[i][j])
    }

    /// Upper-triangle entries `(i, j, distance)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.matrix[i][j])))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Fixed-width table with three decimals.
    pub fn to_table(&self) -> String {
        let width = self
            .domain_ids
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(7);
        let mut out = format!("{:width$}", "");
        for id in &self.domain_ids {
            out.push_str(&format!(" {id:>width$}"));
        }
        out.push('\n');
        for (i, id) in self.domain_ids.iter().enumerate() {
            out.push_str(&format!("{id:width$}"));
            for j in 0..self.len() {
                if i == j {
                    out.push_str(&format!(" {:>width$}", "--"));
                } else {
                    out.push_str(&format!(" {:>width$.3}", self.matrix[i][j]));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise CFL distances between `datasets`, labelled by their domain ids.
/// Each dataset's ECF is evaluated once.
pub fn distance_matrix(datasets: &[FeatureMatrix], bank: &FrequencyBank) -> Result<ShiftReport> {
    if datasets.len() < 2 {
        return Err(Error::invalid(format!(
            "distance matrix needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let ecfs = datasets
        .iter()
        .map(|d| ecf_eval(d, bank))
        .collect::<Result<Vec<_>>>()?;
    let n = ecfs.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = cfl_distance(&ecfs[i], &ecfs[j])?;
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    Ok(ShiftReport {
        domain_ids: datasets.iter().map(|d| d.domain_id().to_string()).collect(),
        matrix,
        bank_meta: *bank.params(),
    })
}
