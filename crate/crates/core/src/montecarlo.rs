//! Seeded Monte-Carlo harness.
//!
//! Trial `i` of an estimate at probe count `T` draws its randomness from a
//! seed derived from `(master_seed, T, i)` alone, so results do not depend
//! on how trials are scheduled across worker threads.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::design::optimal_base_q;
use crate::engine::{comp_decode, generate_matrix, sample_activity, simulate_probes};
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, SamplingPlan};

/// Documented default master seed.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

const TAG_ESTIMATE: u64 = 0x6573_7469_6d61_7465;
const TAG_ACTIVITY: u64 = 0x6163_7469_7669_7479;
const TAG_MATRIX: u64 = 0x6d61_7472_6978;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: `hash(master, tag, index)`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuccessEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub successes: u64,
}

impl SuccessEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let (lo, hi) = wilson_interval(successes, trials, Z_95);
        let p_hat = successes as f64 / trials as f64;
        SuccessEstimate {
            p_hat,
            ci_low: lo.min(p_hat),
            ci_high: hi.max(p_hat),
            trials,
            successes,
        }
    }

    /// Binomial standard error of `p_hat`.
    pub fn standard_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

fn trial_unchecked(cfg: &NetworkConfig, plan: &SamplingPlan, probes: usize, seed: u64) -> bool {
    let activity = sample_activity(cfg, derive_seed(seed, TAG_ACTIVITY, 0));
    let matrix = generate_matrix(cfg, plan, probes, derive_seed(seed, TAG_MATRIX, 0))
        .expect("plan checked by caller");
    let y = simulate_probes(&matrix, &activity).expect("activity drawn from the same config");
    let decoded = comp_decode(&matrix, &y).expect("results vector has matrix width");
    decoded.estimated_active == activity.active()
}

/// One end-to-end discovery round: sample activity, draw the matrix, probe,
/// decode. Success means the COMP estimate equals the true active set.
pub fn run_trial(
    cfg: &NetworkConfig,
    plan: &SamplingPlan,
    probes: usize,
    trial_seed: u64,
) -> Result<bool> {
    plan.check(cfg)?;
    Ok(trial_unchecked(cfg, plan, probes, trial_seed))
}

/// Result of a probe-count search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ProbeSearch {
    Reached {
        probes: u64,
        estimate: SuccessEstimate,
    },
    NotReached {
        cap: u64,
    },
}

impl ProbeSearch {
    pub fn probes(&self) -> Option<u64> {
        match self {
            ProbeSearch::Reached { probes, .. } => Some(*probes),
            ProbeSearch::NotReached { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbePoint {
    pub probes: u64,
    pub estimate: SuccessEstimate,
}

/// Success probability against probe count for one plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSweep {
    pub points: Vec<ProbePoint>,
    pub plan: SamplingPlan,
    pub seed: u64,
}

pub const PROBE_SWEEP_HEADER: &str = "T,trials,successes,p_hat,ci_low,ci_high";
pub const Q_SWEEP_HEADER: &str = "base_q,q_values,target,min_T,reached";

#[derive(Serialize, Deserialize)]
struct ProbeRow {
    #[serde(rename = "T")]
    probes: u64,
    trials: u64,
    successes: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
}

#[derive(Serialize, Deserialize)]
struct QRow {
    base_q: f64,
    /// Per-cluster probabilities joined by `;`.
    q_values: String,
    target: f64,
    #[serde(rename = "min_T")]
    min_probes: Option<u64>,
    reached: bool,
}

fn write_csv<R: Serialize>(header: &str, rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header.split(','))
        .expect("writing to memory cannot fail");
    for row in rows {
        w.serialize(row).expect("writing to memory cannot fail");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is ASCII")
}

fn read_csv<R: serde::de::DeserializeOwned>(text: &str, header: &str) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let found = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if found.iter().collect::<Vec<_>>().join(",") != header {
        return Err(Error::Parse(format!("expected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

impl ProbeSweep {
    pub fn to_csv(&self) -> String {
        write_csv(
            PROBE_SWEEP_HEADER,
            self.points.iter().map(|p| ProbeRow {
                probes: p.probes,
                trials: p.estimate.trials,
                successes: p.estimate.successes,
                p_hat: p.estimate.p_hat,
                ci_low: p.estimate.ci_low,
                ci_high: p.estimate.ci_high,
            }),
        )
    }
}

/// Parses the probe-sweep CSV back into points.
pub fn parse_probe_csv(text: &str) -> Result<Vec<ProbePoint>> {
    Ok(read_csv::<ProbeRow>(text, PROBE_SWEEP_HEADER)?
        .into_iter()
        .map(|r| ProbePoint {
            probes: r.probes,
            estimate: SuccessEstimate {
                p_hat: r.p_hat,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                trials: r.trials,
                successes: r.successes,
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QPoint {
    pub base_q: f64,
    pub q: Vec<f64>,
    pub target: f64,
    pub min_probes: Option<u64>,
}

/// Minimum probe count against base sampling probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QSweep {
    pub points: Vec<QPoint>,
    /// Derived optimal base probability, when the config admits one.
    pub optimal_base_q: Option<f64>,
    /// Grid index closest to `optimal_base_q`.
    pub nearest_optimal: Option<usize>,
    pub seed: u64,
}

impl QSweep {
    pub fn to_csv(&self) -> String {
        write_csv(
            Q_SWEEP_HEADER,
            self.points.iter().map(|p| QRow {
                base_q: p.base_q,
                q_values: p.q.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
                target: p.target,
                min_probes: p.min_probes,
                reached: p.min_probes.is_some(),
            }),
        )
    }

    /// Smallest reached probe count over the sweep.
    pub fn best(&self) -> Option<(usize, u64)> {
        self.points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.min_probes.map(|t| (i, t)))
            .min_by_key(|&(_, t)| t)
    }
}

pub fn parse_q_csv(text: &str) -> Result<Vec<QPoint>> {
    read_csv::<QRow>(text, Q_SWEEP_HEADER)?
        .into_iter()
        .map(|r| {
            let q = r
                .q_values
                .split(';')
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if r.reached != r.min_probes.is_some() {
                return Err(Error::Parse(
                    "min_T must be present exactly when reached".into(),
                ));
            }
            Ok(QPoint {
                base_q: r.base_q,
                q,
                target: r.target,
                min_probes: r.min_probes,
            })
        })
        .collect()
}

/// Checks a grid is non-empty and strictly increasing.
pub fn check_grid<T: PartialOrd + Copy>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::BadGrid("grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::BadGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Experiment runner holding the trial budget, master seed and worker pool.
pub struct MonteCarlo {
    trials: u64,
    master_seed: u64,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for MonteCarlo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonteCarlo")
            .field("trials", &self.trials)
            .field("master_seed", &self.master_seed)
            .finish()
    }
}

impl MonteCarlo {
    /// Single-threaded runner.
    pub fn new(trials: u64, master_seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::OutOfRange {
                name: "trials",
                range: "[1, inf)",
                value: 0.0,
            });
        }
        Ok(MonteCarlo {
            trials,
            master_seed,
            #[cfg(feature = "parallel")]
            pool: None,
        })
    }

    /// Runs trials on `workers` threads. Output does not depend on the
    /// worker count. Without the `parallel` feature this is a no-op.
    pub fn with_workers(self, workers: usize) -> Result<Self> {
        #[cfg(feature = "parallel")]
        {
            let mut this = self;
            this.pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .map_err(|e| Error::Io(std::io::Error::other(e)))?,
                )
            } else {
                None
            };
            Ok(this)
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Ok(self)
        }
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    fn count_successes(
        &self,
        cfg: &NetworkConfig,
        plan: &SamplingPlan,
        probes: usize,
        master: u64,
    ) -> u64 {
        let tag = TAG_ESTIMATE ^ (probes as u64).rotate_left(32);
        let one = |i: u64| trial_unchecked(cfg, plan, probes, derive_seed(master, tag, i));
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool
                .install(|| (0..self.trials).into_par_iter().filter(|&i| one(i)).count() as u64);
        }
        (0..self.trials).filter(|&i| one(i)).count() as u64
    }

    /// Success probability at `probes` probes over the configured trials.
    pub fn estimate_success(
        &self,
        cfg: &NetworkConfig,
        plan: &SamplingPlan,
        probes: u64,
    ) -> Result<SuccessEstimate> {
        plan.check(cfg)?;
        let successes = self.count_successes(cfg, plan, probes as usize, self.master_seed);
        Ok(SuccessEstimate::from_counts(successes, self.trials))
    }

    /// Smallest `T ≤ t_cap` whose estimated success probability reaches
    /// `target`, by doubling from 1 then bisection. Each probed `T` uses its
    /// own seed stream.
    pub fn min_probes_for_target(
        &self,
        cfg: &NetworkConfig,
        plan: &SamplingPlan,
        target: f64,
        t_cap: u64,
    ) -> Result<ProbeSearch> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::OutOfRange {
                name: "target",
                range: "(0, 1)",
                value: target,
            });
        }
        if t_cap == 0 {
            return Err(Error::BadProbeCount);
        }
        plan.check(cfg)?;
        let cache: RefCell<HashMap<u64, SuccessEstimate>> = RefCell::default();
        let estimate = |t: u64| -> SuccessEstimate {
            *cache.borrow_mut().entry(t).or_insert_with(|| {
                SuccessEstimate::from_counts(
                    self.count_successes(cfg, plan, t as usize, self.master_seed),
                    self.trials,
                )
            })
        };
        let passes = |t: u64| estimate(t).p_hat >= target;

        let mut lo = 0u64;
        let mut hi = 1u64;
        loop {
            if passes(hi) {
                break;
            }
            if hi >= t_cap {
                return Ok(ProbeSearch::NotReached { cap: t_cap });
            }
            lo = hi;
            hi = (hi * 2).min(t_cap);
        }
        // lo fails (or is 0), hi passes.
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if passes(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(ProbeSearch::Reached {
            probes: hi,
            estimate: estimate(hi),
        })
    }

    pub fn sweep_probes(
        &self,
        cfg: &NetworkConfig,
        plan: &SamplingPlan,
        grid: &[u64],
    ) -> Result<ProbeSweep> {
        check_grid(grid)?;
        let points = grid
            .iter()
            .map(|&t| {
                Ok(ProbePoint {
                    probes: t,
                    estimate: self.estimate_success(cfg, plan, t)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ProbeSweep {
            points,
            plan: plan.clone(),
            seed: self.master_seed,
        })
    }

    /// For each base probability builds the beta-scaled plan and searches its
    /// minimum probe count. Every point reuses the master seed.
    pub fn sweep_q(
        &self,
        cfg: &NetworkConfig,
        base_grid: &[f64],
        target: f64,
        t_cap: u64,
    ) -> Result<QSweep> {
        check_grid(base_grid)?;
        let plans = base_grid
            .iter()
            .map(|&b| SamplingPlan::base_scaled(cfg, b))
            .collect::<Result<Vec<_>>>()?;
        let mut points = Vec::with_capacity(plans.len());
        for (plan, &base_q) in plans.iter().zip(base_grid) {
            let search = self.min_probes_for_target(cfg, plan, target, t_cap)?;
            points.push(QPoint {
                base_q,
                q: plan.q().to_vec(),
                target,
                min_probes: search.probes(),
            });
        }
        let optimal = optimal_base_q(cfg).ok();
        let nearest_optimal = optimal.and_then(|q_star| {
            base_grid
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - q_star).abs().total_cmp(&(b.1 - q_star).abs()))
                .map(|(i, _)| i)
        });
        Ok(QSweep {
            points,
            optimal_base_q: optimal,
            nearest_optimal,
            seed: self.master_seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::optimal_q;
    use crate::model::ClusterSpec;

    fn fixed_pair() -> NetworkConfig {
        NetworkConfig::new(vec![
            ClusterSpec::fixed(1, 300, 3, 1.0),
            ClusterSpec::fixed(2, 200, 2, 0.5),
        ])
        .unwrap()
    }

    fn small_fixed() -> NetworkConfig {
        NetworkConfig::new(vec![
            ClusterSpec::fixed(1, 40, 2, 1.0),
            ClusterSpec::fixed(2, 30, 1, 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn seeds_differ_by_every_component() {
        let a = derive_seed(1, 2, 3);
        assert_eq!(a, derive_seed(1, 2, 3));
        assert_ne!(a, derive_seed(0, 2, 3));
        assert_ne!(a, derive_seed(1, 0, 3));
        assert_ne!(a, derive_seed(1, 2, 0));
        assert_ne!(derive_seed(0, 0, 1), derive_seed(0, 1, 0));
    }

    #[test]
    fn wilson_reference_values() {
        // 1 of 1: centre (1 + z²/2)/(1 + z²), half-width (z²/2)/(1 + z²).
        let z = Z_95;
        let (lo, hi) = wilson_interval(1, 1, z);
        let z2 = z * z;
        assert!((lo - 1.0 / (1.0 + z2)).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
        let e = SuccessEstimate::from_counts(1, 1);
        assert_eq!(e.p_hat, 1.0);
        assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);

        // 0 of 10: lower end pinned at 0.
        let (lo, hi) = wilson_interval(0, 10, z);
        assert_eq!(lo, 0.0);
        assert!((hi - z2 / (10.0 + z2)).abs() < 1e-12);

        // 50 of 100, textbook value ≈ (0.4038, 0.5962).
        let (lo, hi) = wilson_interval(50, 100, z);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn trial_edge_cases() {
        let cfg = fixed_pair();
        let plan = optimal_q(&cfg).unwrap();
        for seed in 0..20 {
            assert!(!run_trial(&cfg, &plan, 0, seed).unwrap());
        }
        let busy = NetworkConfig::new(vec![
            ClusterSpec::fixed(1, 5, 5, 1.0),
            ClusterSpec::fixed(2, 3, 3, 0.5),
        ])
        .unwrap();
        let plan = SamplingPlan::manual(&busy, vec![0.3, 0.1]).unwrap();
        for (t, seed) in [(0, 1), (1, 2), (17, 3), (130, 4)] {
            assert!(run_trial(&busy, &plan, t, seed).unwrap());
        }
    }

    #[test]
    fn estimate_is_independent_of_workers() {
        let cfg = small_fixed();
        let plan = optimal_q(&cfg).unwrap();
        let serial = MonteCarlo::new(500, 7).unwrap();
        let parallel = MonteCarlo::new(500, 7).unwrap().with_workers(3).unwrap();
        for t in [5, 20, 40] {
            assert_eq!(
                serial.estimate_success(&cfg, &plan, t).unwrap(),
                parallel.estimate_success(&cfg, &plan, t).unwrap()
            );
        }
    }

    #[test]
    fn single_trial_estimate() {
        let busy = NetworkConfig::new(vec![ClusterSpec::fixed(1, 4, 4, 1.0)]).unwrap();
        let plan = SamplingPlan::manual(&busy, vec![0.5]).unwrap();
        let e = MonteCarlo::new(1, 0)
            .unwrap()
            .estimate_success(&busy, &plan, 3)
            .unwrap();
        assert_eq!((e.successes, e.trials, e.p_hat), (1, 1, 1.0));
        let (lo, hi) = wilson_interval(1, 1, Z_95);
        assert_eq!((e.ci_low, e.ci_high), (lo, hi));
    }

    #[test]
    fn min_probes_trivial_outcomes() {
        let busy = NetworkConfig::new(vec![ClusterSpec::fixed(1, 4, 4, 1.0)]).unwrap();
        let plan = SamplingPlan::manual(&busy, vec![0.5]).unwrap();
        let mc = MonteCarlo::new(50, 1).unwrap();
        assert_eq!(
            mc.min_probes_for_target(&busy, &plan, 0.5, 64)
                .unwrap()
                .probes(),
            Some(1)
        );

        let cfg = small_fixed();
        let zero = SamplingPlan::manual(&cfg, vec![0.0, 0.0]).unwrap();
        assert_eq!(
            mc.min_probes_for_target(&cfg, &zero, 0.5, 256).unwrap(),
            ProbeSearch::NotReached { cap: 256 }
        );
        assert!(mc.min_probes_for_target(&cfg, &zero, 1.0, 256).is_err());
    }

    #[test]
    fn min_probes_is_the_first_passing_point_on_its_path() {
        let cfg = small_fixed();
        let plan = optimal_q(&cfg).unwrap();
        let mc = MonteCarlo::new(400, 3).unwrap();
        let t = mc
            .min_probes_for_target(&cfg, &plan, 0.8, 1024)
            .unwrap()
            .probes()
            .unwrap();
        assert!(mc.estimate_success(&cfg, &plan, t).unwrap().p_hat >= 0.8);
        assert!(mc.estimate_success(&cfg, &plan, t - 1).unwrap().p_hat < 0.8);
    }

    #[test]
    fn sweep_csv_round_trip() {
        let cfg = small_fixed();
        let plan = optimal_q(&cfg).unwrap();
        let mc = MonteCarlo::new(200, 9).unwrap();
        let sweep = mc.sweep_probes(&cfg, &plan, &[0, 10, 30]).unwrap();
        assert_eq!(sweep.points[0].estimate.p_hat, 0.0);
        let csv = sweep.to_csv();
        assert!(csv.starts_with("T,trials,successes,p_hat,ci_low,ci_high\n"));
        assert_eq!(parse_probe_csv(&csv).unwrap(), sweep.points);

        let qs = mc.sweep_q(&cfg, &[0.05, 0.35, 0.6], 0.7, 512).unwrap();
        let csv = qs.to_csv();
        assert_eq!(parse_q_csv(&csv).unwrap(), qs.points);
        assert_eq!(qs.nearest_optimal, Some(1));

        assert!(mc.sweep_probes(&cfg, &plan, &[]).is_err());
        assert!(mc.sweep_probes(&cfg, &plan, &[10, 10]).is_err());
        assert!(matches!(
            mc.sweep_q(&cfg, &[0.5, 1.5], 0.7, 64),
            Err(Error::PlanOutOfRange { .. })
        ));
    }

    #[test]
    fn single_point_q_sweep_matches_direct_search() {
        let cfg = small_fixed();
        let mc = MonteCarlo::new(300, 5).unwrap();
        let q_star = optimal_base_q(&cfg).unwrap();
        let sweep = mc.sweep_q(&cfg, &[q_star], 0.8, 1024).unwrap();
        let plan = SamplingPlan::base_scaled(&cfg, q_star).unwrap();
        let direct = mc.min_probes_for_target(&cfg, &plan, 0.8, 1024).unwrap();
        assert_eq!(sweep.points[0].min_probes, direct.probes());
        assert_eq!(sweep.nearest_optimal, Some(0));
    }
}
