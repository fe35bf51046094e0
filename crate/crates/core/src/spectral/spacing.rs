use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EigenSystem;
use crate::{Error, Result};

/// Below this many levels a fit is still attempted but logged as unreliable.
pub const MIN_LEVELS_FOR_FIT: usize = 50;

/// Share of zero spacings above which dropping them is reported.
const ZERO_SPACING_WARN_FRACTION: f64 = 1e-3;

/// Consecutive level spacings divided by their median.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingSample {
    pub spacings: Vec<f64>,
    /// The median raw spacing.
    pub normalization: f64,
    pub n_levels: usize,
}

impl SpacingSample {
    pub fn len(&self) -> usize {
        self.spacings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spacings.is_empty()
    }

    pub fn zero_count(&self) -> usize {
        self.spacings.iter().filter(|s| **s == 0.0).count()
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn level_spacings(eigsys: &EigenSystem) -> Result<SpacingSample> {
    level_spacings_from_values(eigsys.eigenvalues())
}

/// Spacings of an arbitrary list of levels (sorted internally).
pub fn level_spacings_from_values(levels: &[f64]) -> Result<SpacingSample> {
    if levels.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} eigenvalues give no spacings",
            levels.len()
        )));
    }
    if levels.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("non-finite eigenvalue".into()));
    }
    if levels.len() < MIN_LEVELS_FOR_FIT {
        log::warn!("only {} levels; spacing statistics will be noisy", levels.len());
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let raw: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let mut by_size = raw.clone();
    by_size.sort_by(f64::total_cmp);
    let normalization = median(&by_size);
    if normalization <= 0.0 {
        return Err(Error::DegenerateSample("median spacing is zero".into()));
    }
    Ok(SpacingSample {
        spacings: raw.iter().map(|s| s / normalization).collect(),
        normalization,
        n_levels: levels.len(),
    })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho = {rho} outside [0, 1]")));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("spacing {s} is negative")));
    }
    Ok(())
}

/// Berry–Robnik density at unit mean spacing, with regular fraction `rho`.
pub fn berry_robnik_pdf(s: f64, rho: f64) -> Result<f64> {
    check_s(s)?;
    check_rho(rho)?;
    Ok(pdf_unchecked(s, rho))
}

fn pdf_unchecked(s: f64, rho: f64) -> f64 {
    let q = 1.0 - rho;
    let gauss = (-0.25 * PI * q * q * s * s).exp();
    (-rho * s).exp()
        * (rho * rho * libm::erfc(0.5 * PI.sqrt() * q * s) + (2.0 * rho * q + 0.5 * PI * q.powi(3) * s) * gauss)
}

/// Cumulative distribution of [`berry_robnik_pdf`].
pub fn berry_robnik_cdf(s: f64, rho: f64) -> Result<f64> {
    check_s(s)?;
    check_rho(rho)?;
    Ok(cdf_unchecked(s, rho))
}

fn cdf_unchecked(s: f64, rho: f64) -> f64 {
    let q = 1.0 - rho;
    1.0 - rho * (-rho * s).exp() * libm::erfc(0.5 * PI.sqrt() * q * s)
        - q * (-rho * s - 0.25 * PI * q * q * s * s).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerryRobnikFit {
    pub rho: f64,
    /// Kolmogorov–Smirnov distance between the rescaled sample and the fit.
    pub ks_statistic: f64,
    pub log_likelihood: f64,
    pub n_spacings: usize,
    pub dropped_zeros: usize,
}

const FIT_TOLERANCE: f64 = 1e-4;
const GRID_POINTS: usize = 101;

fn log_likelihood(s: &[f64], rho: f64) -> f64 {
    s.iter().map(|&x| pdf_unchecked(x, rho).ln()).sum()
}

/// Maximum-likelihood `rho` on spacings rescaled to unit mean.
pub fn fit_berry_robnik(sample: &SpacingSample) -> Result<BerryRobnikFit> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty spacing sample".into()));
    }
    let positive: Vec<f64> = sample.spacings.iter().copied().filter(|s| *s > 0.0).collect();
    let dropped = sample.len() - positive.len();
    if positive.is_empty() {
        return Err(Error::DegenerateSample("all spacings are zero".into()));
    }
    if dropped as f64 > ZERO_SPACING_WARN_FRACTION * sample.len() as f64 {
        log::warn!("dropped {dropped} zero spacings out of {}", sample.len());
    }
    // Zeros still count toward the mean so the rescaling matches the full sample.
    let mean = sample.spacings.iter().sum::<f64>() / sample.len() as f64;
    let s: Vec<f64> = positive.iter().map(|x| x / mean).collect();

    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..GRID_POINTS {
        let rho = k as f64 / (GRID_POINTS - 1) as f64;
        let ll = log_likelihood(&s, rho);
        if ll > best.1 {
            best = (rho, ll);
        }
    }
    let step = 1.0 / (GRID_POINTS - 1) as f64;
    let (mut a, mut b) = ((best.0 - step).max(0.0), (best.0 + step).min(1.0));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (log_likelihood(&s, c), log_likelihood(&s, d));
    while b - a > FIT_TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = log_likelihood(&s, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = log_likelihood(&s, d);
        }
    }
    let mut rho = 0.5 * (a + b);
    let mut ll = log_likelihood(&s, rho);
    // The bracket endpoints can beat the interior when the optimum sits on a bound.
    for edge in [0.0, 1.0] {
        let l = log_likelihood(&s, edge);
        if l > ll {
            rho = edge;
            ll = l;
        }
    }
    let rho = rho.clamp(0.0, 1.0);

    let mut sorted = s.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ks = sorted.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf_unchecked(x, rho);
        acc.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    });

    Ok(BerryRobnikFit {
        rho,
        ks_statistic: ks,
        log_likelihood: ll,
        n_spacings: s.len(),
        dropped_zeros: dropped,
    })
}

/// JSON sidecar written next to a spacing histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingSidecar {
    pub rho: f64,
    pub n_levels: usize,
    pub normalization: f64,
}

/// Write a median-normalized histogram with the fitted density to `csv_path`
/// (columns `s, empirical_density, fitted_density`) and the sidecar to
/// `csv_path` with a `.json` extension.
pub fn write_spacing_report(
    csv_path: &Path,
    sample: &SpacingSample,
    fit: &BerryRobnikFit,
    bins: usize,
    s_max: f64,
) -> Result<()> {
    if bins == 0 || !(s_max > 0.0) {
        return Err(Error::InvalidArgument("histogram needs bins > 0 and s_max > 0".into()));
    }
    let width = s_max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &sample.spacings {
        let k = (s / width) as usize;
        if k < bins {
            counts[k] += 1;
        }
    }
    // Density of median-normalized spacings: s_mean = s * (median / mean).
    let scale = 1.0 / (sample.spacings.iter().sum::<f64>() / sample.len() as f64);
    let total = sample.len() as f64;
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(["s", "empirical_density", "fitted_density"])?;
    for (k, &count) in counts.iter().enumerate() {
        let s = (k as f64 + 0.5) * width;
        let empirical = count as f64 / (total * width);
        let fitted = scale * pdf_unchecked(s * scale, fit.rho);
        w.write_record([s.to_string(), empirical.to_string(), fitted.to_string()])?;
    }
    w.flush()?;
    let sidecar = SpacingSidecar {
        rho: fit.rho,
        n_levels: sample.n_levels,
        normalization: sample.normalization,
    };
    std::fs::write(csv_path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}
