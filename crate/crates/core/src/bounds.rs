//! Union and exponential upper bounds on the COMP error probability, and
//! their inversion into a probe count.
//!
//! Products such as `∏ (1 − q_r)^{k_r}` are evaluated in log space
//! (`exp(Σ k_r ln(1 − q_r))`) so that populations in the tens of thousands
//! do not underflow. Bounds are not capped at 1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ActivityKind, NetworkConfig, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    UnionFixed,
    ExpFixed,
    UnionRandom,
    ExpRandom,
}

/// Union bound or its exponential relaxation, independent of activity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundFamily {
    Union,
    Exp,
}

impl BoundKind {
    pub fn select(family: BoundFamily, activity: ActivityKind) -> Self {
        match (family, activity) {
            (BoundFamily::Union, ActivityKind::Fixed) => BoundKind::UnionFixed,
            (BoundFamily::Exp, ActivityKind::Fixed) => BoundKind::ExpFixed,
            (BoundFamily::Union, ActivityKind::Random) => BoundKind::UnionRandom,
            (BoundFamily::Exp, ActivityKind::Random) => BoundKind::ExpRandom,
        }
    }

    pub fn family(self) -> BoundFamily {
        match self {
            BoundKind::UnionFixed | BoundKind::UnionRandom => BoundFamily::Union,
            BoundKind::ExpFixed | BoundKind::ExpRandom => BoundFamily::Exp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub kind: BoundKind,
}

/// Probability that a probe selects none of the active sensors (fixed model):
/// `∏_r (1 − q_r)^{k_r}`.
pub fn alpha(plan: &SamplingPlan, cfg: &NetworkConfig) -> Result<f64> {
    let counts = cfg.fixed_counts()?;
    plan.check(cfg)?;
    let log: f64 = plan
        .q()
        .iter()
        .zip(&counts)
        .map(|(&q, &(_, k))| if k == 0 { 0.0 } else { k as f64 * (-q).ln_1p() })
        .sum();
    Ok(log.exp())
}

/// Probability that every sensor is inactive or unselected (random model):
/// `∏_k (1 − p_k q_k)^{n_k}`.
pub fn gamma(plan: &SamplingPlan, cfg: &NetworkConfig) -> Result<f64> {
    let params = cfg.random_params()?;
    plan.check(cfg)?;
    let log: f64 = plan
        .q()
        .iter()
        .zip(&params)
        .map(|(&q, &(n, p))| n as f64 * (-p * q).ln_1p())
        .sum();
    Ok(log.exp())
}

/// `(1 − x)^T` computed as `exp(T ln(1 − x))`.
fn pow_complement(x: f64, probes: u64) -> f64 {
    if probes == 0 {
        1.0
    } else {
        (probes as f64 * (-x).ln_1p()).exp()
    }
}

/// Per-cluster `(inactive mass, per-probe clearing probability)` of the
/// union bound. Each inactive sensor of cluster `j` escapes shadowing in a
/// single probe with the given probability.
fn union_terms(plan: &SamplingPlan, cfg: &NetworkConfig) -> Result<Vec<(f64, f64)>> {
    match cfg.kind() {
        ActivityKind::Fixed => {
            let a = alpha(plan, cfg)?;
            Ok(cfg
                .fixed_counts()?
                .into_iter()
                .zip(plan.q())
                .map(|((n, k), &q)| ((n - k) as f64, q * a))
                .collect())
        }
        ActivityKind::Random => {
            let g = gamma(plan, cfg)?;
            Ok(cfg
                .random_params()?
                .into_iter()
                .zip(plan.q())
                .map(|((n, p), &q)| (n as f64 * (1.0 - p), q * g / (1.0 - p * q)))
                .collect())
        }
    }
}

/// Same shape for the exponential relaxation: the term for cluster `j` is
/// `mass_j · exp(−T · rate_j)`.
fn exp_terms(plan: &SamplingPlan, cfg: &NetworkConfig) -> Result<Vec<(f64, f64)>> {
    plan.check(cfg)?;
    let base_q = plan.base_q().ok_or(Error::OriginMismatch)?;
    let mass = crate::design::activity_mass(cfg);
    let damping = (-base_q * mass).exp();
    Ok(cfg
        .clusters()
        .iter()
        .map(|c| {
            let inactive = match c.activity {
                crate::model::Activity::Fixed { k } => (c.n - k) as f64,
                crate::model::Activity::Random { p } => c.n as f64 * (1.0 - p),
            };
            (inactive, base_q * c.beta * damping)
        })
        .collect())
}

/// `f(q) = Σ_j (n_j − k_j)(1 − q_j α)^T`.
pub fn union_bound_fixed(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    probes: u64,
) -> Result<BoundValue> {
    cfg.expect_kind(ActivityKind::Fixed)?;
    let value = union_terms(plan, cfg)?
        .into_iter()
        .map(|(mass, rate)| mass * pow_complement(rate, probes))
        .sum();
    Ok(BoundValue {
        value,
        kind: BoundKind::UnionFixed,
    })
}

/// `Σ_j n_j (1 − p_j)(1 − q_j γ / (1 − p_j q_j))^T`.
pub fn union_bound_random(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    probes: u64,
) -> Result<BoundValue> {
    cfg.expect_kind(ActivityKind::Random)?;
    let value = union_terms(plan, cfg)?
        .into_iter()
        .map(|(mass, rate)| mass * pow_complement(rate, probes))
        .sum();
    Ok(BoundValue {
        value,
        kind: BoundKind::UnionRandom,
    })
}

/// `Σ_j (n_j − k_j) exp(−T q β_j e^{−q Σ_r β_r k_r})` for a beta-scaled plan.
pub fn exp_bound_fixed(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    probes: u64,
) -> Result<BoundValue> {
    cfg.expect_kind(ActivityKind::Fixed)?;
    let value = exp_terms(plan, cfg)?
        .into_iter()
        .map(|(mass, rate)| mass * (-(probes as f64) * rate).exp())
        .sum();
    Ok(BoundValue {
        value,
        kind: BoundKind::ExpFixed,
    })
}

/// `Σ_j n_j (1 − p_j) exp(−T q β_j e^{−q Σ_k n_k p_k β_k})` for a beta-scaled plan.
pub fn exp_bound_random(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    probes: u64,
) -> Result<BoundValue> {
    cfg.expect_kind(ActivityKind::Random)?;
    let value = exp_terms(plan, cfg)?
        .into_iter()
        .map(|(mass, rate)| mass * (-(probes as f64) * rate).exp())
        .sum();
    Ok(BoundValue {
        value,
        kind: BoundKind::ExpRandom,
    })
}

pub fn evaluate(
    kind: BoundKind,
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    probes: u64,
) -> Result<BoundValue> {
    match kind {
        BoundKind::UnionFixed => union_bound_fixed(plan, cfg, probes),
        BoundKind::ExpFixed => exp_bound_fixed(plan, cfg, probes),
        BoundKind::UnionRandom => union_bound_random(plan, cfg, probes),
        BoundKind::ExpRandom => exp_bound_random(plan, cfg, probes),
    }
}

/// Smallest `T ≥ 1` with `bound(T) ≤ epsilon`, by doubling then bisection.
pub fn min_probes_from_bound(
    kind: BoundKind,
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    epsilon: f64,
) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            range: "(0, 1]",
            value: epsilon,
        });
    }
    let terms = match kind.family() {
        BoundFamily::Union => {
            // Validates the activity kind as a side effect.
            evaluate(kind, plan, cfg, 0)?;
            union_terms(plan, cfg)?
        }
        BoundFamily::Exp => {
            evaluate(kind, plan, cfg, 0)?;
            exp_terms(plan, cfg)?
        }
    };
    if terms
        .iter()
        .any(|&(mass, rate)| mass > 0.0 && !(rate > 0.0))
    {
        return Err(Error::NonDecaying);
    }
    let at = |t: u64| evaluate(kind, plan, cfg, t).map(|b| b.value);

    if at(1)? <= epsilon {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while at(hi)? > epsilon {
        lo = hi;
        hi = hi.checked_mul(2).ok_or(Error::NonDecaying)?;
    }
    // Invariant: bound(lo) > epsilon >= bound(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
