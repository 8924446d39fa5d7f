//! Browser bindings: each export takes a network config as JSON and returns
//! JSON text for the demo page to plot.

use gtaccess::bounds::{self, BoundFamily, BoundKind};
use gtaccess::design;
use gtaccess::montecarlo::MonteCarlo;
use gtaccess::{NetworkConfig, SamplingPlan};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest probe count or trial count the page may request.
const MAX_PROBES: u64 = 5000;
const MAX_TRIALS: u64 = 20_000;

#[derive(Serialize)]
struct DesignOut {
    q: Vec<f64>,
    base_q: f64,
    residual: f64,
    transmissions: Vec<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct BoundsOut {
    probes: Vec<u64>,
    union: Vec<f64>,
    exp: Vec<f64>,
}

#[derive(Serialize)]
struct CurvePoint {
    probes: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    union: f64,
}

fn config(json: &str) -> Result<NetworkConfig, String> {
    NetworkConfig::from_json(json).map_err(|e| e.to_string())
}

fn plan_for(cfg: &NetworkConfig, base_q: f64) -> Result<SamplingPlan, String> {
    if base_q > 0.0 {
        SamplingPlan::base_scaled(cfg, base_q)
    } else {
        design::optimal_base_scaled(cfg)
    }
    .map_err(|e| e.to_string())
}

fn grid(t_max: u64, step: u64) -> Result<Vec<u64>, String> {
    if step == 0 || t_max == 0 || t_max > MAX_PROBES {
        return Err(format!("need 0 < step and 0 < T max <= {MAX_PROBES}"));
    }
    Ok((step..=t_max).step_by(step as usize).collect())
}

fn to_json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Derived plan, its constraint residual and transmissions over `probes`.
pub fn design_json(config_json: &str, probes: u64) -> Result<String, String> {
    let cfg = config(config_json)?;
    let plan = design::optimal_q(&cfg).map_err(|e| e.to_string())?;
    let residual = design::constraint_residual(&plan, &cfg).map_err(|e| e.to_string())?;
    let energy = design::energy_report(&plan, probes.max(1)).map_err(|e| e.to_string())?;
    to_json(&DesignOut {
        q: plan.q().to_vec(),
        base_q: design::optimal_base_q(&cfg).map_err(|e| e.to_string())?,
        residual: residual.residual,
        transmissions: energy.transmissions,
        warnings: plan.warnings().to_vec(),
    })
}

/// Union and exponential bounds against probe count. `base_q <= 0` means
/// the derived optimum.
pub fn bounds_json(
    config_json: &str,
    base_q: f64,
    t_max: u64,
    step: u64,
) -> Result<String, String> {
    let cfg = config(config_json)?;
    let plan = plan_for(&cfg, base_q)?;
    let probes = grid(t_max, step)?;
    let eval = |family| -> Result<Vec<f64>, String> {
        let kind = BoundKind::select(family, cfg.kind());
        probes
            .iter()
            .map(|&t| {
                bounds::evaluate(kind, &plan, &cfg, t)
                    .map(|b| b.value)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    to_json(&BoundsOut {
        union: eval(BoundFamily::Union)?,
        exp: eval(BoundFamily::Exp)?,
        probes,
    })
}

/// Monte-Carlo success probability against probe count, single-threaded.
pub fn success_json(
    config_json: &str,
    base_q: f64,
    t_max: u64,
    step: u64,
    trials: u64,
    seed: u64,
) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be in 1..={MAX_TRIALS}"));
    }
    let cfg = config(config_json)?;
    let plan = plan_for(&cfg, base_q)?;
    let probes = grid(t_max, step)?;
    let mc = MonteCarlo::new(trials, seed).map_err(|e| e.to_string())?;
    let sweep = mc
        .sweep_probes(&cfg, &plan, &probes)
        .map_err(|e| e.to_string())?;
    let union_kind = BoundKind::select(BoundFamily::Union, cfg.kind());
    let points = sweep
        .points
        .iter()
        .map(|p| {
            Ok(CurvePoint {
                probes: p.probes,
                p_hat: p.estimate.p_hat,
                ci_low: p.estimate.ci_low,
                ci_high: p.estimate.ci_high,
                union: bounds::evaluate(union_kind, &plan, &cfg, p.probes)
                    .map_err(|e| e.to_string())?
                    .value,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&points)
}

#[wasm_bindgen]
pub fn design(config_json: &str, probes: u32) -> Result<String, JsError> {
    design_json(config_json, probes.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn bound_curves(
    config_json: &str,
    base_q: f64,
    t_max: u32,
    step: u32,
) -> Result<String, JsError> {
    bounds_json(config_json, base_q, t_max.into(), step.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn success_curve(
    config_json: &str,
    base_q: f64,
    t_max: u32,
    step: u32,
    trials: u32,
    seed: u32,
) -> Result<String, JsError> {
    success_json(
        config_json,
        base_q,
        t_max.into(),
        step.into(),
        trials.into(),
        seed.into(),
    )
    .map_err(|e| JsError::new(&e))
}
