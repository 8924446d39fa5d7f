//! Sampling design: the beta-weighted optimal probabilities for both
//! activity models, the stationarity constraints they are measured against,
//! and per-sensor energy accounting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Activity, ActivityKind, NetworkConfig, SamplingPlan};

/// Value every derived `q_i ≥ 1` is clamped to.
pub const Q_CLAMP: f64 = 1.0 - 1.0 / (1u64 << 20) as f64;

/// Left-hand side of a constraint that should equal 1 at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintResidual {
    pub value: f64,
    pub residual: f64,
}

impl ConstraintResidual {
    fn from_value(value: f64) -> Self {
        ConstraintResidual {
            value,
            residual: (value - 1.0).abs(),
        }
    }
}

/// Expected transmissions per sensor over a probing session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub probes: u64,
    /// `q_i · T` for each cluster.
    pub transmissions: Vec<f64>,
    /// `ratios[i][j] = q_i / q_j`; `NaN` when `q_j = 0`.
    pub ratios: Vec<Vec<f64>>,
}

/// Weighted activity mass `Σ β_r k_r` (fixed) or `Σ β_r n_r p_r` (random).
/// The derived plan is `q_i = β_i / mass`, i.e. a base probability of `1 / mass`.
pub fn activity_mass(cfg: &NetworkConfig) -> f64 {
    cfg.clusters()
        .iter()
        .map(|c| match c.activity {
            Activity::Fixed { k } => c.beta * k as f64,
            Activity::Random { p } => c.beta * c.n as f64 * p,
        })
        .sum()
}

/// Base probability `q*` of the derived plan, so that `q_i* = β_i · q*`.
pub fn optimal_base_q(cfg: &NetworkConfig) -> Result<f64> {
    let mass = activity_mass(cfg);
    if mass > 0.0 {
        Ok(1.0 / mass)
    } else {
        Err(Error::NoActivity)
    }
}

fn derive(cfg: &NetworkConfig) -> Result<SamplingPlan> {
    let mass = activity_mass(cfg);
    if !(mass > 0.0) {
        return Err(Error::NoActivity);
    }
    let mut warnings = Vec::new();
    let q = cfg
        .clusters()
        .iter()
        .map(|c| {
            let qi = c.beta / mass;
            if qi >= 1.0 {
                warnings.push(format!(
                    "cluster {}: derived q = {qi} is not below 1; clamped to {Q_CLAMP} (network is outside the sparse regime)",
                    c.id
                ));
                Q_CLAMP
            } else {
                qi
            }
        })
        .collect();
    Ok(SamplingPlan::derived(q, warnings))
}

/// `q_i = β_i / (β_1 k_1 + … + β_M k_M)`.
pub fn optimal_q_fixed(cfg: &NetworkConfig) -> Result<SamplingPlan> {
    cfg.expect_kind(ActivityKind::Fixed)?;
    derive(cfg)
}

/// `q_i = β_i / (β_1 n_1 p_1 + … + β_M n_M p_M)`.
pub fn optimal_q_random(cfg: &NetworkConfig) -> Result<SamplingPlan> {
    cfg.expect_kind(ActivityKind::Random)?;
    derive(cfg)
}

/// Dispatches on the network's activity model.
pub fn optimal_q(cfg: &NetworkConfig) -> Result<SamplingPlan> {
    match cfg.kind() {
        ActivityKind::Fixed => optimal_q_fixed(cfg),
        ActivityKind::Random => optimal_q_random(cfg),
    }
}

/// The derived plan expressed as a beta-scaled plan. Fails where the
/// derived plan would need clamping.
pub fn optimal_base_scaled(cfg: &NetworkConfig) -> Result<SamplingPlan> {
    SamplingPlan::base_scaled(cfg, optimal_base_q(cfg)?)
}

/// `Σ_i k_i q_i / (1 − q_i)`.
pub fn constraint_residual_fixed(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
) -> Result<ConstraintResidual> {
    let counts = cfg.fixed_counts()?;
    plan.check(cfg)?;
    let value = plan
        .q()
        .iter()
        .zip(&counts)
        .map(|(&q, &(_, k))| k as f64 * q / (1.0 - q))
        .sum();
    Ok(ConstraintResidual::from_value(value))
}

/// `Σ_i n_i p_i q_i`.
pub fn constraint_residual_random(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
) -> Result<ConstraintResidual> {
    let params = cfg.random_params()?;
    plan.check(cfg)?;
    let value = plan
        .q()
        .iter()
        .zip(&params)
        .map(|(&q, &(n, p))| n as f64 * p * q)
        .sum();
    Ok(ConstraintResidual::from_value(value))
}

pub fn constraint_residual(plan: &SamplingPlan, cfg: &NetworkConfig) -> Result<ConstraintResidual> {
    match cfg.kind() {
        ActivityKind::Fixed => constraint_residual_fixed(plan, cfg),
        ActivityKind::Random => constraint_residual_random(plan, cfg),
    }
}

pub fn energy_report(plan: &SamplingPlan, probes: u64) -> Result<EnergyReport> {
    if probes == 0 {
        return Err(Error::BadProbeCount);
    }
    let q = plan.q();
    let transmissions = q.iter().map(|&qi| qi * probes as f64).collect();
    let ratios = q
        .iter()
        .map(|&qi| {
            q.iter()
                .map(|&qj| if qj > 0.0 { qi / qj } else { f64::NAN })
                .collect()
        })
        .collect();
    Ok(EnergyReport {
        probes,
        transmissions,
        ratios,
    })
}
