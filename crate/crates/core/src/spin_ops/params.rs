use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layout::{Edge, Family, ModelSpec, SystemLayout};
use crate::{Error, Result};

/// Field, bias and coupling values for the QBM, thermometer and interaction
/// blocks. Only the QBM biases and QBM couplings are trainable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QbmParameters {
    /// Transverse field per site (all `n` sites).
    pub gamma: Vec<f64>,
    /// Longitudinal bias per site (all `n` sites).
    pub bias: Vec<f64>,
    /// One value per `ModelSpec::qbm_edges` entry.
    pub weights: Vec<f64>,
    /// One value per `ModelSpec::thermometer_edges` entry.
    pub thermometer_weights: Vec<f64>,
    /// One value per `ModelSpec::interaction_edges` entry.
    pub interaction: Vec<f64>,
}

impl QbmParameters {
    pub fn zeros(layout: &SystemLayout, spec: &ModelSpec) -> Self {
        Self {
            gamma: vec![0.0; layout.n()],
            bias: vec![0.0; layout.n()],
            weights: vec![0.0; spec.qbm_edges.len()],
            thermometer_weights: vec![0.0; spec.thermometer_edges.len()],
            interaction: vec![0.0; spec.interaction_edges.len()],
        }
    }

    pub fn validate(&self, layout: &SystemLayout, spec: &ModelSpec) -> Result<()> {
        let check = |what: &str, got: usize, want: usize| {
            if got != want {
                Err(Error::ParameterMismatch(format!("{what}: {got} values for {want} slots")))
            } else {
                Ok(())
            }
        };
        check("gamma", self.gamma.len(), layout.n())?;
        check("bias", self.bias.len(), layout.n())?;
        check("weights", self.weights.len(), spec.qbm_edges.len())?;
        check(
            "thermometer weights",
            self.thermometer_weights.len(),
            spec.thermometer_edges.len(),
        )?;
        check("interaction", self.interaction.len(), spec.interaction_edges.len())?;
        let all_finite = self
            .gamma
            .iter()
            .chain(&self.bias)
            .chain(&self.weights)
            .chain(&self.thermometer_weights)
            .chain(&self.interaction)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::ParameterMismatch("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Trainable vector: QBM biases followed by QBM couplings.
    pub fn trainable(&self, layout: &SystemLayout) -> Vec<f64> {
        let mut theta = self.bias[..layout.n_qbm()].to_vec();
        theta.extend_from_slice(&self.weights);
        theta
    }

    pub fn set_trainable(&mut self, layout: &SystemLayout, theta: &[f64]) -> Result<()> {
        let nq = layout.n_qbm();
        if theta.len() != nq + self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: nq + self.weights.len(),
                got: theta.len(),
            });
        }
        self.bias[..nq].copy_from_slice(&theta[..nq]);
        self.weights.copy_from_slice(&theta[nq..]);
        Ok(())
    }

    /// Frozen (untrainable) values: thermometer fields/biases/couplings,
    /// all transverse fields and the interaction block.
    pub fn frozen(&self, layout: &SystemLayout) -> Vec<f64> {
        let mut out = self.gamma.clone();
        out.extend_from_slice(&self.bias[layout.n_qbm()..]);
        out.extend_from_slice(&self.thermometer_weights);
        out.extend_from_slice(&self.interaction);
        out
    }

    pub fn qbm_only(&self, layout: &SystemLayout) -> Self {
        let nq = layout.n_qbm();
        Self {
            gamma: self.gamma[..nq].to_vec(),
            bias: self.bias[..nq].to_vec(),
            weights: self.weights.clone(),
            thermometer_weights: Vec::new(),
            interaction: Vec::new(),
        }
    }

    /// Root mean square of the interaction couplings.
    pub fn interaction_rms(&self) -> f64 {
        if self.interaction.is_empty() {
            return 0.0;
        }
        (self.interaction.iter().map(|w| w * w).sum::<f64>() / self.interaction.len() as f64)
            .sqrt()
    }
}

/// Initial-value distributions. Variances are variances, not standard
/// deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub gamma_mean: f64,
    pub gamma_variance: f64,
    pub bias_variance: f64,
    pub weight_variance: f64,
    pub interaction_variance: f64,
    /// Data-mean probabilities are clipped to `[clip, 1 - clip]`.
    pub probability_clip: f64,
    /// Multiplies the visible-bias logit; `-1` orients the initial
    /// marginals for a positive inverse temperature.
    pub visible_bias_sign: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            gamma_mean: 1.0,
            gamma_variance: 2.5e-5,
            bias_variance: 2.5e-5,
            weight_variance: 1e-4,
            interaction_variance: 1.0,
            probability_clip: 1e-3,
            visible_bias_sign: 1.0,
        }
    }
}

/// `ln(p / (1 - p))` with `p = (mean + 1) / 2` clipped away from 0 and 1.
pub fn visible_bias_logit(mean: f64, clip: f64) -> f64 {
    let p = ((mean + 1.0) / 2.0).clamp(clip, 1.0 - clip);
    (p / (1.0 - p)).ln()
}

fn normal(mean: f64, variance: f64) -> Normal<f64> {
    Normal::new(mean, variance.sqrt()).expect("variance is finite and non-negative")
}

/// Draw initial parameters. Thermometer and interaction values drawn here are
/// never touched again by training.
///
/// Draw order is fixed: fields, hidden biases, thermometer biases, QBM
/// couplings, thermometer couplings, interaction couplings.
pub fn init_parameters<R: Rng + ?Sized>(
    layout: &SystemLayout,
    spec: &ModelSpec,
    data_means: &[f64],
    config: &InitConfig,
    rng: &mut R,
) -> Result<QbmParameters> {
    if data_means.len() != layout.n_visible {
        return Err(Error::DimensionMismatch { expected: layout.n_visible, got: data_means.len() });
    }
    spec.validate(layout)?;
    let mut params = QbmParameters::zeros(layout, spec);

    let gamma = normal(config.gamma_mean, config.gamma_variance);
    for g in params.gamma.iter_mut() {
        *g = gamma.sample(rng);
    }
    for (b, &m) in params.bias.iter_mut().zip(data_means) {
        *b = config.visible_bias_sign * visible_bias_logit(m, config.probability_clip);
    }
    let bias = normal(0.0, config.bias_variance);
    for b in params.bias[layout.n_visible..].iter_mut() {
        *b = bias.sample(rng);
    }
    let weight = normal(0.0, config.weight_variance);
    for w in params.weights.iter_mut().chain(params.thermometer_weights.iter_mut()) {
        *w = weight.sample(rng);
    }
    let interaction = normal(0.0, config.interaction_variance);
    for w in params.interaction.iter_mut() {
        *w = interaction.sample(rng);
    }
    Ok(params)
}

/// Layout, family/edges and values bundled together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QbmModel {
    pub layout: SystemLayout,
    pub spec: ModelSpec,
    pub params: QbmParameters,
}

impl QbmModel {
    pub fn new(layout: SystemLayout, spec: ModelSpec, params: QbmParameters) -> Result<Self> {
        layout.validate()?;
        spec.validate(&layout)?;
        params.validate(&layout, &spec)?;
        Ok(Self { layout, spec, params })
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    /// The QBM block alone (no thermometer, no interaction).
    pub fn qbm_only(&self) -> Self {
        Self {
            layout: self.layout.qbm_only(),
            spec: self.spec.qbm_only(),
            params: self.params.qbm_only(&self.layout),
        }
    }

    pub fn trainable(&self) -> Vec<f64> {
        self.params.trainable(&self.layout)
    }

    pub fn set_trainable(&mut self, theta: &[f64]) -> Result<()> {
        self.params.set_trainable(&self.layout, theta)
    }

    pub fn trainable_count(&self) -> usize {
        self.spec.trainable_count(&self.layout)
    }

    pub fn to_document(&self, seed: Option<u64>) -> ModelDocument {
        let mut weights = BTreeMap::new();
        for (e, w) in self.spec.qbm_edges.iter().zip(&self.params.weights) {
            weights.insert(e.key(), *w);
        }
        for (e, w) in self.spec.thermometer_edges.iter().zip(&self.params.thermometer_weights) {
            weights.insert(e.key(), *w);
        }
        let interaction = self
            .spec
            .interaction_edges
            .iter()
            .zip(&self.params.interaction)
            .map(|(e, w)| (e.key(), *w))
            .collect();
        let mut edges: Vec<Edge> =
            self.spec.qbm_edges.iter().chain(&self.spec.thermometer_edges).copied().collect();
        edges.sort();
        ModelDocument {
            layout: self.layout,
            family: self.spec.family,
            edges,
            gamma: self.params.gamma.clone(),
            bias: self.params.bias.clone(),
            weights,
            interaction,
            seed,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let layout = doc.layout;
        layout.validate()?;
        let mut edge_keys: Vec<Edge> =
            doc.weights.keys().map(|k| Edge::parse_key(k)).collect::<Result<_>>()?;
        edge_keys.sort();
        let mut declared = doc.edges.clone();
        declared.sort();
        if edge_keys != declared {
            return Err(Error::ParameterMismatch("weight keys do not match the edge list".into()));
        }
        let therm = layout.thermometer_sites();
        let (thermometer_edges, qbm_edges): (Vec<Edge>, Vec<Edge>) =
            declared.into_iter().partition(|e| therm.contains(&e.0));
        let mut interaction_edges: Vec<Edge> =
            doc.interaction.keys().map(|k| Edge::parse_key(k)).collect::<Result<_>>()?;
        interaction_edges.sort();
        let lookup = |map: &BTreeMap<String, f64>, edges: &[Edge]| -> Vec<f64> {
            edges.iter().map(|e| map[&e.key()]).collect()
        };
        let params = QbmParameters {
            gamma: doc.gamma.clone(),
            bias: doc.bias.clone(),
            weights: lookup(&doc.weights, &qbm_edges),
            thermometer_weights: lookup(&doc.weights, &thermometer_edges),
            interaction: lookup(&doc.interaction, &interaction_edges),
        };
        let spec = ModelSpec { family: doc.family, qbm_edges, thermometer_edges, interaction_edges };
        Self::new(layout, spec, params)
    }
}

/// On-disk model/parameter document (see `schema/model.schema.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub layout: SystemLayout,
    pub family: Family,
    /// QBM and thermometer couplings (interaction edges are keyed separately).
    pub edges: Vec<Edge>,
    pub gamma: Vec<f64>,
    pub bias: Vec<f64>,
    /// Edge key `"a-b"` to coupling value.
    pub weights: BTreeMap<String, f64>,
    pub interaction: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}
