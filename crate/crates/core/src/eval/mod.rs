//! Bernoulli-mixture data, model probability tables, KL divergence and AIC.
//!
//! Tables are indexed by visible bitstrings: bit `υ` of the index set means
//! `z_υ = −1`, matching [`crate::spin_ops::visible_assignment`].

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::noise::NoiseConfig;
use crate::rbm::{rbm_distribution_exact, RbmParameters};
use crate::spectral::{eig_hermitian, EigenSystem};
use crate::spin_ops::{HamiltonianTerms, QbmModel};
use crate::thermal::{gibbs_weights, QuenchSystem};
use crate::{Error, Result};

#[cfg(test)]
mod tests;

/// Largest visible register for which full tables are built.
pub const MAX_TABLE_VISIBLE: usize = 12;
/// Floor applied to model probabilities inside the KL logarithm.
pub const KL_FLOOR: f64 = 1e-12;
/// Tolerance on table normalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Final-metric sample budget.
pub const FINAL_SAMPLE_BUDGET: usize = 1024;

/// Equal-weight mixture of product Bernoulli distributions around centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliMixture {
    pub n_visible: usize,
    /// Mode centers as bitstrings.
    pub centers: Vec<usize>,
    /// Probability that a bit agrees with its mode center.
    pub fidelities: Vec<f64>,
}

impl BernoulliMixture {
    pub fn new(n_visible: usize, centers: Vec<usize>, fidelities: Vec<f64>) -> Result<Self> {
        let mix = Self { n_visible, centers, fidelities };
        mix.validate()?;
        Ok(mix)
    }

    /// `m` modes with uniformly random centers and common fidelity `p`.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, m: usize, p: f64, rng: &mut R) -> Result<Self> {
        check_visible(n_visible)?;
        let centers = (0..m).map(|_| rng.gen_range(0..1usize << n_visible)).collect();
        Self::new(n_visible, centers, vec![p; m])
    }

    pub fn validate(&self) -> Result<()> {
        check_visible(self.n_visible)?;
        if self.centers.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one mode".into()));
        }
        if self.centers.len() != self.fidelities.len() {
            return Err(Error::DimensionMismatch {
                expected: self.centers.len(),
                got: self.fidelities.len(),
            });
        }
        if let Some(c) = self.centers.iter().find(|c| **c >> self.n_visible != 0) {
            return Err(Error::InvalidArgument(format!("center {c} has more than {} bits", self.n_visible)));
        }
        if let Some(p) = self.fidelities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("fidelity {p} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.centers.len()
    }

    pub fn probability(&self, config: usize) -> f64 {
        let n = self.n_visible as i32;
        let total: f64 = self
            .centers
            .iter()
            .zip(&self.fidelities)
            .map(|(&c, &p)| {
                let d = (config ^ c).count_ones() as i32;
                p.powi(n - d) * (1.0 - p).powi(d)
            })
            .sum();
        total / self.modes() as f64
    }

    pub fn table(&self) -> Vec<f64> {
        (0..1usize << self.n_visible).map(|k| self.probability(k)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        (0..count)
            .map(|_| {
                let mode = rng.gen_range(0..self.modes());
                let (c, p) = (self.centers[mode], self.fidelities[mode]);
                (0..self.n_visible).fold(c, |x, bit| {
                    if rng.gen::<f64>() < 1.0 - p {
                        x ^ (1 << bit)
                    } else {
                        x
                    }
                })
            })
            .collect()
    }

    /// `E[z_υ]` per visible site.
    pub fn means(&self) -> Vec<f64> {
        visible_means(&self.table(), self.n_visible)
    }
}

fn check_visible(n_visible: usize) -> Result<()> {
    if n_visible == 0 || n_visible > MAX_TABLE_VISIBLE {
        return Err(Error::InvalidArgument(format!(
            "{n_visible} visible units is outside 1..={MAX_TABLE_VISIBLE}"
        )));
    }
    Ok(())
}

pub fn mixture_probability(mix: &BernoulliMixture, config: usize) -> f64 {
    mix.probability(config)
}

pub fn sample_mixture<R: Rng + ?Sized>(mix: &BernoulliMixture, count: usize, rng: &mut R) -> Vec<usize> {
    mix.sample(count, rng)
}

/// `E[z_υ]` of a table.
pub fn visible_means(table: &[f64], n_visible: usize) -> Vec<f64> {
    (0..n_visible)
        .map(|v| {
            table
                .iter()
                .enumerate()
                .map(|(k, p)| if (k >> v) & 1 == 1 { -p } else { *p })
                .sum()
        })
        .collect()
}

/// Empirical frequencies of a list of bitstrings.
pub fn empirical_table(samples: &[usize], n_visible: usize) -> Result<Vec<f64>> {
    check_visible(n_visible)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut table = vec![0.0; 1 << n_visible];
    for &s in samples {
        *table
            .get_mut(s)
            .ok_or_else(|| Error::InvalidArgument(format!("sample {s} exceeds {n_visible} bits")))? += 1.0;
    }
    let n = samples.len() as f64;
    table.iter_mut().for_each(|p| *p /= n);
    Ok(table)
}

/// Draw `budget` outcomes from `table` and return their frequencies.
pub fn resample_table<R: Rng + ?Sized>(table: &[f64], budget: usize, rng: &mut R) -> Result<Vec<f64>> {
    if budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    let dist = WeightedIndex::new(table)
        .map_err(|e| Error::InvalidArgument(format!("cannot sample table: {e}")))?;
    let mut counts = vec![0.0; table.len()];
    for _ in 0..budget {
        counts[dist.sample(rng)] += 1.0;
    }
    counts.iter_mut().for_each(|c| *c /= budget as f64);
    Ok(counts)
}

/// Check a table sums to one.
pub fn check_normalized(table: &[f64]) -> Result<()> {
    let sum: f64 = table.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || table.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Unnormalized(sum));
    }
    Ok(())
}

/// Visible marginal of `e^{−βH}/Z` given the eigensystem of a QBM block
/// whose visible sites are the lowest `n_visible` qubits.
pub fn visible_marginal(eigsys: &EigenSystem, beta: f64, n_visible: usize) -> Vec<f64> {
    let (weights, _) = gibbs_weights(eigsys.eigenvalues(), beta);
    let mask = (1usize << n_visible) - 1;
    let mut table = vec![0.0; 1 << n_visible];
    for (k, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        for (i, amp) in eigsys.vector(k).iter().enumerate() {
            table[i & mask] += w * amp.norm_sqr();
        }
    }
    let sum: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= sum);
    table
}

/// Exact `p_β(z_v) = tr(Π_{z_v} e^{−βH_QBM}) / tr(e^{−βH_QBM})`; any
/// thermometer in `model` is ignored.
pub fn qbm_distribution_exact(model: &QbmModel, beta: f64) -> Result<Vec<f64>> {
    check_visible(model.layout.n_visible)?;
    let qbm = model.qbm_only();
    let h = HamiltonianTerms::from_model(&qbm)?.qbm.to_dense();
    let eigsys = eig_hermitian(&h)?;
    Ok(visible_marginal(&eigsys, beta, model.layout.n_visible))
}

/// Where a model table comes from.
#[derive(Clone, Copy, Debug)]
pub enum ModelSource<'a> {
    /// Exact Gibbs state of the QBM block at inverse temperature `beta`.
    Exact { model: &'a QbmModel, beta: f64 },
    /// Born probabilities of the quenched state averaged over `times`.
    Quench { system: &'a QuenchSystem, times: &'a [f64], noise: Option<&'a NoiseConfig> },
    Rbm(&'a RbmParameters),
}

/// Probability table of a model, multinomially resampled when a budget is
/// given.
pub fn model_distribution<R: Rng + ?Sized>(
    source: ModelSource<'_>,
    sample_budget: Option<usize>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if sample_budget == Some(0) {
        return Err(Error::InvalidArgument("sample budget must be positive".into()));
    }
    let table = match source {
        ModelSource::Exact { model, beta } => qbm_distribution_exact(model, beta)?,
        ModelSource::Quench { system, times, noise } => {
            check_visible(system.layout().n_visible)?;
            system.visible_distribution(times, noise, rng)?
        }
        ModelSource::Rbm(params) => rbm_distribution_exact(params)?,
    };
    match sample_budget {
        Some(budget) => resample_table(&table, budget, rng),
        None => Ok(table),
    }
}

/// KL divergence in nats and whether the floor on the model side was hit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlValue {
    pub nats: f64,
    pub floored: bool,
}

/// `Σ p ln(p / q)` with `0 ln 0 = 0` and `q` floored at [`KL_FLOOR`].
pub fn kl_divergence(p_data: &[f64], p_model: &[f64]) -> Result<KlValue> {
    if p_data.len() != p_model.len() {
        return Err(Error::DimensionMismatch { expected: p_data.len(), got: p_model.len() });
    }
    check_normalized(p_data)?;
    check_normalized(p_model)?;
    let mut nats = 0.0;
    let mut floored = false;
    for (&p, &q) in p_data.iter().zip(p_model) {
        if p == 0.0 {
            continue;
        }
        let q = if q < KL_FLOOR {
            floored = true;
            KL_FLOOR
        } else {
            q
        };
        nats += p * (p / q).ln();
    }
    Ok(KlValue { nats, floored })
}

/// Cross-entropy `−Σ p_data ln p_model`; infinite where the model
/// assigns zero probability to observed data.
pub fn negative_log_likelihood(p_data: &[f64], p_model: &[f64]) -> Result<f64> {
    if p_data.len() != p_model.len() {
        return Err(Error::DimensionMismatch { expected: p_data.len(), got: p_model.len() });
    }
    Ok(p_data
        .iter()
        .zip(p_model)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| -p * q.ln())
        .sum())
}

/// `2(|θ| + L)`.
pub fn aic(loss: f64, trainable_count: usize) -> f64 {
    2.0 * (trainable_count as f64 + loss)
}

/// Trainable-parameter count of an RBM with a full bipartite weight matrix.
pub fn rbm_trainable_count(n_visible: usize, n_hidden: usize) -> usize {
    n_visible + n_hidden + n_visible * n_hidden
}

/// Metrics for one model table against the data table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub kl: f64,
    pub kl_floored: bool,
    /// Negative log-likelihood of the data under the model table.
    pub loss: f64,
    pub aic: f64,
    pub trainable_count: usize,
    /// `None` for exact tables.
    pub sample_count: Option<usize>,
}

impl MetricReport {
    pub fn evaluate(
        p_data: &[f64],
        p_model: &[f64],
        trainable_count: usize,
        sample_count: Option<usize>,
    ) -> Result<Self> {
        let kl = kl_divergence(p_data, p_model)?;
        // Floor the likelihood the same way so AIC stays finite.
        let floored: Vec<f64> = p_model.iter().map(|q| q.max(KL_FLOOR)).collect();
        let loss = negative_log_likelihood(p_data, &floored)?;
        Ok(Self {
            kl: kl.nats,
            kl_floored: kl.floored,
            loss,
            aic: aic(loss, trainable_count),
            trainable_count,
            sample_count,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Bitstring label: character `υ` is `+` or `-` for `z_υ`.
pub fn bitstring(config: usize, n_visible: usize) -> String {
    (0..n_visible).map(|v| if (config >> v) & 1 == 1 { '-' } else { '+' }).collect()
}

pub fn parse_bitstring(s: &str) -> Result<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (v, c)| match c {
        '+' => Ok(acc),
        '-' => Ok(acc | (1 << v)),
        _ => Err(Error::InvalidArgument(format!("bad bitstring {s:?}"))),
    })
}

#[derive(Serialize, Deserialize)]
struct TableRow {
    bitstring: String,
    probability: f64,
}

/// Write a table as `bitstring,probability` rows.
pub fn write_table_csv(path: &Path, table: &[f64]) -> Result<()> {
    let n_visible = table.len().trailing_zeros() as usize;
    if table.len() != 1 << n_visible {
        return Err(Error::InvalidArgument(format!("table length {} is not a power of two", table.len())));
    }
    let mut w = csv::Writer::from_path(path)?;
    for (k, &probability) in table.iter().enumerate() {
        w.serialize(TableRow { bitstring: bitstring(k, n_visible), probability })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<TableRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    let n_visible = rows.first().map(|r| r.bitstring.len()).unwrap_or(0);
    let mut table = vec![f64::NAN; 1 << n_visible];
    for row in rows {
        let k = parse_bitstring(&row.bitstring)?;
        *table.get_mut(k).ok_or_else(|| Error::InvalidArgument(row.bitstring.clone()))? = row.probability;
    }
    if table.iter().any(|p| p.is_nan()) {
        return Err(Error::InvalidArgument("table file is missing rows".into()));
    }
    Ok(table)
}
