//! Network description: clusters, activity models and sampling plans.
//!
//! Every vector in the crate (sampling probabilities, active counts, energy
//! weights) is index-aligned with the cluster order of a [`NetworkConfig`].
//! Sensors are numbered contiguously: the first `n_1` indices belong to the
//! first cluster, the next `n_2` to the second, and so on.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-cluster activity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Activity {
    /// Exactly `k` sensors of the cluster are active.
    Fixed { k: usize },
    /// Each sensor is active independently with probability `p`.
    Random { p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityKind {
    Fixed,
    Random,
}

impl ActivityKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivityKind::Fixed => "fixed",
            ActivityKind::Random => "random",
        }
    }
}

impl Activity {
    pub fn kind(&self) -> ActivityKind {
        match self {
            Activity::Fixed { .. } => ActivityKind::Fixed,
            Activity::Random { .. } => ActivityKind::Random,
        }
    }
}

/// One sensor cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub id: u32,
    /// Number of sensors in the cluster.
    pub n: usize,
    /// Energy weight in `(0, 1]`; scales the cluster's sampling probability.
    pub beta: f64,
    pub activity: Activity,
}

impl ClusterSpec {
    pub fn fixed(id: u32, n: usize, k: usize, beta: f64) -> Self {
        ClusterSpec {
            id,
            n,
            beta,
            activity: Activity::Fixed { k },
        }
    }

    pub fn random(id: u32, n: usize, p: f64, beta: f64) -> Self {
        ClusterSpec {
            id,
            n,
            beta,
            activity: Activity::Random { p },
        }
    }

    /// Active count for the fixed model, `None` for the random model.
    pub fn k(&self) -> Option<usize> {
        match self.activity {
            Activity::Fixed { k } => Some(k),
            Activity::Random { .. } => None,
        }
    }

    /// Activity probability for the random model, `None` for the fixed model.
    pub fn p(&self) -> Option<f64> {
        match self.activity {
            Activity::Random { p } => Some(p),
            Activity::Fixed { .. } => None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    clusters: Vec<ClusterSpec>,
}

/// A validated network. Construct with [`NetworkConfig::new`] or by
/// deserializing; both paths enforce every invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct NetworkConfig {
    clusters: Vec<ClusterSpec>,
    #[serde(skip)]
    kind: Option<ActivityKind>,
    #[serde(skip)]
    offsets: Vec<usize>,
    #[serde(skip)]
    total_k: Option<usize>,
}

impl TryFrom<RawConfig> for NetworkConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        validate_config(raw.clusters)
    }
}

/// Checks every cluster invariant and caches the network totals.
pub fn validate_config(clusters: Vec<ClusterSpec>) -> Result<NetworkConfig> {
    let first = clusters.first().ok_or(Error::EmptyNetwork)?;
    let kind = first.activity.kind();
    let mut ids = HashSet::with_capacity(clusters.len());
    for (i, c) in clusters.iter().enumerate() {
        if c.activity.kind() != kind {
            return Err(Error::MixedActivityKinds);
        }
        if c.n == 0 {
            return Err(Error::BadSize(i));
        }
        if !(c.beta > 0.0 && c.beta <= 1.0) {
            return Err(Error::BadBeta(i));
        }
        match c.activity {
            Activity::Fixed { k } if k > c.n => return Err(Error::BadCount(i)),
            Activity::Random { p } if !(0.0..=1.0).contains(&p) => {
                return Err(Error::BadProbability(i))
            }
            _ => {}
        }
        if !ids.insert(c.id) {
            return Err(Error::DuplicateId(c.id));
        }
    }

    let mut offsets = Vec::with_capacity(clusters.len() + 1);
    let mut acc = 0usize;
    offsets.push(0);
    for c in &clusters {
        acc += c.n;
        offsets.push(acc);
    }
    let total_k = match kind {
        ActivityKind::Fixed => Some(clusters.iter().filter_map(ClusterSpec::k).sum()),
        ActivityKind::Random => None,
    };
    Ok(NetworkConfig {
        clusters,
        kind: Some(kind),
        offsets,
        total_k,
    })
}

impl NetworkConfig {
    pub fn new(clusters: Vec<ClusterSpec>) -> Result<Self> {
        validate_config(clusters)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn clusters(&self) -> &[ClusterSpec] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn kind(&self) -> ActivityKind {
        self.kind.expect("validated config has a kind")
    }

    /// Total sensor count `n = Σ n_i`.
    pub fn total_sensors(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Total active count `k = Σ k_i` (fixed model only).
    pub fn total_active(&self) -> Option<usize> {
        self.total_k
    }

    /// Sensor indices belonging to cluster `i` (by position, not id).
    pub fn sensor_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Position of the cluster containing `sensor`.
    pub fn cluster_index_of(&self, sensor: usize) -> usize {
        self.offsets.partition_point(|&o| o <= sensor) - 1
    }

    pub fn betas(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.beta).collect()
    }

    pub(crate) fn expect_kind(&self, expected: ActivityKind) -> Result<()> {
        if self.kind() == expected {
            Ok(())
        } else {
            Err(Error::WrongActivityKind {
                expected: expected.name(),
            })
        }
    }

    /// `(n_i, k_i)` pairs; errors for the random model.
    pub(crate) fn fixed_counts(&self) -> Result<Vec<(usize, usize)>> {
        self.expect_kind(ActivityKind::Fixed)?;
        Ok(self
            .clusters
            .iter()
            .map(|c| (c.n, c.k().unwrap_or(0)))
            .collect())
    }

    /// `(n_i, p_i)` pairs; errors for the fixed model.
    pub(crate) fn random_params(&self) -> Result<Vec<(usize, f64)>> {
        self.expect_kind(ActivityKind::Random)?;
        Ok(self
            .clusters
            .iter()
            .map(|c| (c.n, c.p().unwrap_or(0.0)))
            .collect())
    }
}

/// How a sampling plan was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum PlanOrigin {
    Derived,
    Manual,
    BaseScaled { base_q: f64 },
}

/// Per-cluster sampling probabilities `q_i`, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    q: Vec<f64>,
    origin: PlanOrigin,
    warnings: Vec<String>,
}

impl SamplingPlan {
    /// Explicit per-cluster probabilities.
    pub fn manual(cfg: &NetworkConfig, q: Vec<f64>) -> Result<Self> {
        if q.len() != cfg.len() {
            return Err(Error::PlanMismatch {
                expected: cfg.len(),
                got: q.len(),
            });
        }
        for (index, &qi) in q.iter().enumerate() {
            if !(0.0..1.0).contains(&qi) {
                return Err(Error::BadPlan { index, q: qi });
            }
        }
        Ok(SamplingPlan {
            q,
            origin: PlanOrigin::Manual,
            warnings: Vec::new(),
        })
    }

    /// `q_i = β_i · base_q` for every cluster.
    pub fn base_scaled(cfg: &NetworkConfig, base_q: f64) -> Result<Self> {
        if !(base_q >= 0.0 && base_q.is_finite()) {
            return Err(Error::OutOfRange {
                name: "base q",
                range: "[0, inf)",
                value: base_q,
            });
        }
        let q: Vec<f64> = cfg.clusters().iter().map(|c| c.beta * base_q).collect();
        if q.iter().any(|&qi| qi >= 1.0) {
            return Err(Error::PlanOutOfRange { base_q });
        }
        Ok(SamplingPlan {
            q,
            origin: PlanOrigin::BaseScaled { base_q },
            warnings: Vec::new(),
        })
    }

    pub(crate) fn derived(q: Vec<f64>, warnings: Vec<String>) -> Self {
        SamplingPlan {
            q,
            origin: PlanOrigin::Derived,
            warnings,
        }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn origin(&self) -> PlanOrigin {
        self.origin
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Base probability for beta-scaled plans.
    pub fn base_q(&self) -> Option<f64> {
        match self.origin {
            PlanOrigin::BaseScaled { base_q } => Some(base_q),
            _ => None,
        }
    }

    /// Verifies the plan is index-aligned with `cfg` and every `q_i < 1`.
    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.q.len() != cfg.len() {
            return Err(Error::PlanMismatch {
                expected: cfg.len(),
                got: self.q.len(),
            });
        }
        for (i, &qi) in self.q.iter().enumerate() {
            if qi >= 1.0 {
                return Err(Error::DegenerateQ(i));
            }
            if !(qi >= 0.0) {
                return Err(Error::BadPlan { index: i, q: qi });
            }
        }
        Ok(())
    }
}

/// How far a fixed-model cluster sits from `k_i = n_i^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeEntry {
    pub id: u32,
    pub n: usize,
    pub k: usize,
    /// `k_i / n_i^α`
    pub ratio: f64,
}

/// Advisory sparsity report; never rejects a valid fixed-model config.
pub fn sparsity_regime_check(cfg: &NetworkConfig, alpha: f64) -> Result<Vec<RegimeEntry>> {
    cfg.expect_kind(ActivityKind::Fixed)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            name: "alpha",
            range: "(0, 1)",
            value: alpha,
        });
    }
    Ok(cfg
        .clusters()
        .iter()
        .map(|c| {
            let k = c.k().unwrap_or(0);
            RegimeEntry {
                id: c.id,
                n: c.n,
                k,
                ratio: k as f64 / (c.n as f64).powf(alpha),
            }
        })
        .collect())
}
