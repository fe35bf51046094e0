use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense simulation cap on the total register size.
pub const MAX_QUBITS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Visible,
    Hidden,
    Thermometer,
}

/// Partition of the register into visible, hidden and thermometer sites.
///
/// Sites are ordered visible first, then hidden, then thermometer; site `k`
/// is bit `k` of a basis-state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemLayout {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub n_thermometer: usize,
}

impl SystemLayout {
    pub fn new(n_visible: usize, n_hidden: usize, n_thermometer: usize) -> Result<Self> {
        let layout = Self { n_visible, n_hidden, n_thermometer };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_visible == 0 {
            return Err(Error::InvalidArgument("at least one visible unit is required".into()));
        }
        if self.n() > MAX_QUBITS {
            return Err(Error::TooManyQubits { n: self.n(), max: MAX_QUBITS });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_visible + self.n_hidden + self.n_thermometer
    }

    pub fn n_qbm(&self) -> usize {
        self.n_visible + self.n_hidden
    }

    pub fn dim(&self) -> usize {
        1 << self.n()
    }

    pub fn has_thermometer(&self) -> bool {
        self.n_thermometer > 0
    }

    pub fn visible_sites(&self) -> Range<usize> {
        0..self.n_visible
    }

    pub fn hidden_sites(&self) -> Range<usize> {
        self.n_visible..self.n_qbm()
    }

    pub fn qbm_sites(&self) -> Range<usize> {
        0..self.n_qbm()
    }

    pub fn thermometer_sites(&self) -> Range<usize> {
        self.n_qbm()..self.n()
    }

    /// Thermometer sites playing the visible role inside the thermometer block.
    pub fn thermometer_visible_sites(&self) -> Range<usize> {
        let start = self.n_qbm();
        start..start + self.n_thermometer.div_ceil(2)
    }

    pub fn thermometer_hidden_sites(&self) -> Range<usize> {
        self.thermometer_visible_sites().end..self.n()
    }

    pub fn role(&self, site: usize) -> Result<Role> {
        if site < self.n_visible {
            Ok(Role::Visible)
        } else if site < self.n_qbm() {
            Ok(Role::Hidden)
        } else if site < self.n() {
            Ok(Role::Thermometer)
        } else {
            Err(Error::SiteOutOfRange { site, n: self.n() })
        }
    }

    /// The same machine without its thermometer.
    pub fn qbm_only(&self) -> Self {
        Self { n_thermometer: 0, ..*self }
    }

    /// Mask selecting visible bits of a basis index.
    pub fn visible_mask(&self) -> usize {
        (1 << self.n_visible) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SemiRestrictedTransverseIsing,
    RestrictedTransverseIsing,
    RestrictedXx,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::SemiRestrictedTransverseIsing,
        Family::RestrictedTransverseIsing,
        Family::RestrictedXx,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::SemiRestrictedTransverseIsing => "semi-restricted-transverse-ising",
            Family::RestrictedTransverseIsing => "restricted-transverse-ising",
            Family::RestrictedXx => "restricted-xx",
        }
    }

    pub fn allows_visible_visible(&self) -> bool {
        matches!(self, Family::SemiRestrictedTransverseIsing)
    }

    /// Couplings carry a tied `σ^xσ^x` term alongside `σ^zσ^z`.
    pub fn has_xx_coupling(&self) -> bool {
        matches!(self, Family::RestrictedXx)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family `{s}`")))
    }
}

/// An undirected coupling between two sites, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Edge(a, b)),
            std::cmp::Ordering::Greater => Ok(Edge(b, a)),
            std::cmp::Ordering::Equal => {
                Err(Error::InvalidArgument(format!("self-coupling on site {a}")))
            }
        }
    }

    pub fn key(&self) -> String {
        format!("{}-{}", self.0, self.1)
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("malformed edge key `{key}`"));
        let (a, b) = key.split_once('-').ok_or_else(bad)?;
        Edge::new(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)
    }
}

/// Interaction-block sizing: how many visible and thermometer sites couple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionShape {
    pub visible: usize,
    pub thermometer: usize,
}

impl Default for InteractionShape {
    fn default() -> Self {
        Self { visible: 2, thermometer: 2 }
    }
}

/// Hamiltonian family plus the edge sets of the QBM, thermometer and
/// QBM–thermometer interaction blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub qbm_edges: Vec<Edge>,
    pub thermometer_edges: Vec<Edge>,
    pub interaction_edges: Vec<Edge>,
}

impl ModelSpec {
    /// Fully connected edges allowed by `family`, with the default
    /// interaction block.
    pub fn standard(layout: &SystemLayout, family: Family) -> Self {
        Self::with_interaction(layout, family, InteractionShape::default())
    }

    pub fn with_interaction(layout: &SystemLayout, family: Family, shape: InteractionShape) -> Self {
        let block = |visible: Range<usize>, hidden: Range<usize>| {
            let mut edges = Vec::new();
            for v in visible.clone() {
                if family.allows_visible_visible() {
                    for u in v + 1..visible.end {
                        edges.push(Edge(v, u));
                    }
                }
                for h in hidden.clone() {
                    edges.push(Edge(v, h));
                }
            }
            edges.sort();
            edges
        };
        let qbm_edges = block(layout.visible_sites(), layout.hidden_sites());
        let thermometer_edges =
            block(layout.thermometer_visible_sites(), layout.thermometer_hidden_sites());

        let nv = shape.visible.min(layout.n_visible);
        let nt = shape.thermometer.min(layout.n_thermometer);
        let mut interaction_edges = Vec::new();
        for v in 0..nv {
            for a in layout.thermometer_sites().take(nt) {
                interaction_edges.push(Edge(v, a));
            }
        }
        Self { family, qbm_edges, thermometer_edges, interaction_edges }
    }

    pub fn qbm_only(&self) -> Self {
        Self {
            family: self.family,
            qbm_edges: self.qbm_edges.clone(),
            thermometer_edges: Vec::new(),
            interaction_edges: Vec::new(),
        }
    }

    pub fn validate(&self, layout: &SystemLayout) -> Result<()> {
        let n = layout.n();
        let check_range = |e: &Edge| {
            if e.0 >= e.1 {
                return Err(Error::InvalidArgument(format!("edge {e:?} is not ordered")));
            }
            if e.1 >= n {
                return Err(Error::SiteOutOfRange { site: e.1, n });
            }
            Ok(())
        };
        let bad = |e: &Edge| Error::InvalidEdge(e.0, e.1, self.family);

        for e in &self.qbm_edges {
            check_range(e)?;
            let (ra, rb) = (layout.role(e.0)?, layout.role(e.1)?);
            let ok = match (ra, rb) {
                (Role::Visible, Role::Hidden) => true,
                (Role::Visible, Role::Visible) => self.family.allows_visible_visible(),
                _ => false,
            };
            if !ok {
                return Err(bad(e));
            }
        }
        let tv = layout.thermometer_visible_sites();
        let th = layout.thermometer_hidden_sites();
        for e in &self.thermometer_edges {
            check_range(e)?;
            let ok = if tv.contains(&e.0) && th.contains(&e.1) {
                true
            } else {
                tv.contains(&e.0) && tv.contains(&e.1) && self.family.allows_visible_visible()
            };
            if !ok {
                return Err(bad(e));
            }
        }
        for e in &self.interaction_edges {
            check_range(e)?;
            if layout.role(e.0)? != Role::Visible || layout.role(e.1)? != Role::Thermometer {
                return Err(bad(e));
            }
        }
        let mut all: Vec<Edge> = self
            .qbm_edges
            .iter()
            .chain(&self.thermometer_edges)
            .chain(&self.interaction_edges)
            .copied()
            .collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate edge".into()));
        }
        Ok(())
    }

    /// Number of trainable parameters: QBM biases plus QBM couplings.
    pub fn trainable_count(&self, layout: &SystemLayout) -> usize {
        layout.n_qbm() + self.qbm_edges.len()
    }
}
