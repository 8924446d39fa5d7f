//! Bernoulli test matrices, activity sampling, the noiseless OR channel and
//! the COMP decoder.
//!
//! Matrix rows are bit-packed, 64 probes per word, least significant bit
//! first. Padding bits past the last probe are always zero.

use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::alpha;
use crate::error::{Error, Result};
use crate::model::{Activity, NetworkConfig, SamplingPlan};

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

fn tail_mask(bits: usize) -> u64 {
    match bits % WORD {
        0 => !0,
        r => (1u64 << r) - 1,
    }
}

/// Fixed-point threshold `floor(q · 2^64)`; a uniform 64-bit draw below it
/// has probability `q`.
fn threshold(q: f64) -> u64 {
    if q <= 0.0 {
        0
    } else if q >= 1.0 {
        u64::MAX
    } else {
        // Exact: q < 1 has at most 53 significant bits.
        (q * 18_446_744_073_709_551_616.0) as u64
    }
}

/// 64 independent Bernoulli draws packed into one word.
///
/// Each lane compares a lazily generated uniform against the threshold one
/// bit at a time, most significant first, so all 64 lanes share each random
/// word. Stops once every lane is decided or the threshold has no set bits
/// left (undecided lanes then compare `>=` and resolve to 0).
fn bernoulli_word<R: RngCore>(rng: &mut R, thresh: u64) -> u64 {
    if thresh == 0 {
        return 0;
    }
    let mut ones = 0u64;
    let mut undecided = !0u64;
    for bit in (0..64).rev() {
        let q_bit = if thresh >> bit & 1 == 1 { !0u64 } else { 0 };
        let r = rng.next_u64();
        ones |= undecided & !r & q_bit;
        undecided &= !(r ^ q_bit);
        let rest = thresh & ((1u64 << bit) - 1);
        if undecided == 0 || rest == 0 {
            break;
        }
    }
    ones
}

/// Fixed-length bit-packed vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Bits::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let mut out = Bits::zeros(text.len());
        for (i, ch) in text.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => out.set(i, true),
                other => return Err(Error::Parse(format!("unexpected bit character {other:?}"))),
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn truncated(&self, len: usize) -> Bits {
        let len = len.min(self.len);
        let mut words = self.words[..words_for(len)].to_vec();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Bits { len, words }
    }

    /// Complement within `len` bits.
    fn complement(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = out.last_mut() {
            *last &= tail_mask(self.len);
        }
        out
    }
}

impl std::fmt::Display for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            f.write_char(if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// `n × T` binary test schedule. Row `i` is the signature of sensor `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtMatrix {
    n: usize,
    probes: usize,
    stride: usize,
    data: Vec<u64>,
    cluster_ids: Vec<u32>,
    offsets: Vec<usize>,
}

impl GtMatrix {
    /// Matrix with explicit rows, all sensors in a single cluster with id 0.
    pub fn from_rows(rows: &[Bits]) -> Result<Self> {
        let probes = rows.first().map_or(0, Bits::len);
        let stride = words_for(probes);
        let mut data = Vec::with_capacity(rows.len() * stride);
        for row in rows {
            if row.len() != probes {
                return Err(Error::LengthMismatch {
                    expected: probes,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row.words());
        }
        Ok(GtMatrix {
            n: rows.len(),
            probes,
            stride,
            data,
            cluster_ids: vec![0],
            offsets: vec![0, rows.len()],
        })
    }

    pub fn sensors(&self) -> usize {
        self.n
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    fn row_words(&self, i: usize) -> &[u64] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }

    pub fn row(&self, i: usize) -> Bits {
        Bits {
            len: self.probes,
            words: self.row_words(i).to_vec(),
        }
    }

    pub fn get(&self, sensor: usize, probe: usize) -> bool {
        assert!(probe < self.probes);
        self.row_words(sensor)[probe / WORD] >> (probe % WORD) & 1 == 1
    }

    /// Id of the cluster that sensor `i` belongs to.
    pub fn cluster_of(&self, i: usize) -> u32 {
        assert!(i < self.n, "sensor {i} out of range {}", self.n);
        self.cluster_ids[self.offsets.partition_point(|&o| o <= i) - 1]
    }

    /// Number of ones in the rows of the given sensor range.
    pub fn count_ones(&self, sensors: std::ops::Range<usize>) -> usize {
        self.data[sensors.start * self.stride..sensors.end * self.stride]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// The first `probes` columns.
    pub fn truncated(&self, probes: usize) -> GtMatrix {
        let probes = probes.min(self.probes);
        let stride = words_for(probes);
        let mask = tail_mask(probes);
        let mut data = Vec::with_capacity(self.n * stride);
        for i in 0..self.n {
            let row = &self.row_words(i)[..stride];
            data.extend_from_slice(row);
            if let Some(last) = data.last_mut().filter(|_| stride > 0) {
                *last &= mask;
            }
        }
        GtMatrix {
            n: self.n,
            probes,
            stride,
            data,
            cluster_ids: self.cluster_ids.clone(),
            offsets: self.offsets.clone(),
        }
    }

    /// Text dump: header `n T`, then one line of `0`/`1` characters per row.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.n * (self.probes + 1) + 16);
        let _ = writeln!(out, "{} {}", self.n, self.probes);
        for i in 0..self.n {
            let _ = writeln!(out, "{}", self.row(i));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
        let [n, probes] = dims[..] else {
            return Err(Error::Parse(format!(
                "header must be `n T`, got {header:?}"
            )));
        };
        let rows = lines.map(Bits::parse).collect::<Result<Vec<_>>>()?;
        if rows.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != probes) {
            return Err(Error::LengthMismatch {
                expected: probes,
                got: bad.len(),
            });
        }
        let mut m = GtMatrix::from_rows(&rows)?;
        m.probes = probes;
        m.stride = words_for(probes);
        if n == 0 {
            m.data.clear();
        }
        Ok(m)
    }
}

/// Ground-truth active sensors, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActivitySet {
    n: usize,
    active: Vec<usize>,
}

impl ActivitySet {
    pub fn new(n: usize, mut active: Vec<usize>) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&index) = active.last().filter(|&&i| i >= n) {
            return Err(Error::BadSensor { index, n });
        }
        Ok(ActivitySet { n, active })
    }

    pub fn sensors(&self) -> usize {
        self.n
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.binary_search(&i).is_ok()
    }

    /// Sensors not in the set, ascending.
    pub fn inactive(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| !self.contains(i))
    }
}

/// Outcome of each probe: `1` iff some active sensor transmitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultsVector {
    pub y: Bits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeResult {
    pub estimated_active: Vec<usize>,
    pub negative_probe_count: usize,
}

/// Draws every matrix bit independently, Bernoulli with the sampling
/// probability of the sensor's cluster. Identical inputs give identical
/// matrices.
pub fn generate_matrix(
    cfg: &NetworkConfig,
    plan: &SamplingPlan,
    probes: usize,
    seed: u64,
) -> Result<GtMatrix> {
    plan.check(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.total_sensors();
    let stride = words_for(probes);
    let mask = tail_mask(probes);
    let mut data = vec![0u64; n * stride];
    let mut offsets = Vec::with_capacity(cfg.len() + 1);
    for (ci, &q) in plan.q().iter().enumerate() {
        let range = cfg.sensor_range(ci);
        offsets.push(range.start);
        let thresh = threshold(q);
        if stride == 0 {
            continue;
        }
        for row in data[range.start * stride..range.end * stride].chunks_exact_mut(stride) {
            for w in row.iter_mut() {
                *w = bernoulli_word(&mut rng, thresh);
            }
            row[stride - 1] &= mask;
        }
    }
    offsets.push(n);
    Ok(GtMatrix {
        n,
        probes,
        stride,
        data,
        cluster_ids: cfg.clusters().iter().map(|c| c.id).collect(),
        offsets,
    })
}

/// Fixed model: a uniform `k_i`-subset of each cluster (partial
/// Fisher–Yates). Random model: each sensor independently with `p_i`.
pub fn sample_activity(cfg: &NetworkConfig, seed: u64) -> ActivitySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut active = Vec::new();
    for (ci, c) in cfg.clusters().iter().enumerate() {
        let range = cfg.sensor_range(ci);
        match c.activity {
            Activity::Fixed { k } => {
                let start = active.len();
                let mut pool: Vec<usize> = range.collect();
                for i in 0..k {
                    let j = rng.gen_range(i..pool.len());
                    pool.swap(i, j);
                }
                active.extend_from_slice(&pool[..k]);
                active[start..].sort_unstable();
            }
            Activity::Random { p } => {
                let thresh = threshold(p);
                let mut base = range.start;
                while base < range.end {
                    let lanes = (range.end - base).min(WORD);
                    let mut word = bernoulli_word(&mut rng, thresh) & tail_mask(lanes);
                    while word != 0 {
                        active.push(base + word.trailing_zeros() as usize);
                        word &= word - 1;
                    }
                    base += lanes;
                }
            }
        }
    }
    ActivitySet {
        n: cfg.total_sensors(),
        active,
    }
}

/// Noiseless OR channel: `y_t` is the OR of the active rows at probe `t`.
pub fn simulate_probes(matrix: &GtMatrix, activity: &ActivitySet) -> Result<ResultsVector> {
    let mut y = Bits::zeros(matrix.probes);
    for &i in activity.active() {
        if i >= matrix.n {
            return Err(Error::BadSensor {
                index: i,
                n: matrix.n,
            });
        }
        for (acc, w) in y.words.iter_mut().zip(matrix.row_words(i)) {
            *acc |= w;
        }
    }
    Ok(ResultsVector { y })
}

/// COMP: every participant of a negative probe is inactive, everyone else
/// is declared active (including sensors that were never probed).
pub fn comp_decode(matrix: &GtMatrix, y: &ResultsVector) -> Result<DecodeResult> {
    if y.y.len() != matrix.probes {
        return Err(Error::LengthMismatch {
            expected: matrix.probes,
            got: y.y.len(),
        });
    }
    let negative = y.y.complement();
    let negative_probe_count = negative.iter().map(|w| w.count_ones() as usize).sum();
    let estimated_active = (0..matrix.n)
        .filter(|&i| {
            matrix
                .row_words(i)
                .iter()
                .zip(&negative)
                .all(|(r, neg)| r & neg == 0)
        })
        .collect();
    Ok(DecodeResult {
        estimated_active,
        negative_probe_count,
    })
}

/// `true` when the sensor takes part in no negative probe.
pub fn is_shadowed(matrix: &GtMatrix, y: &ResultsVector, sensor: usize) -> bool {
    let negative = y.y.complement();
    matrix
        .row_words(sensor)
        .iter()
        .zip(&negative)
        .all(|(r, neg)| r & neg == 0)
}

/// Probability that an inactive sensor of cluster position `cluster` is
/// shadowed after `probes` probes: `(1 − q_j α)^T`.
pub fn shadow_probability_fixed(
    plan: &SamplingPlan,
    cfg: &NetworkConfig,
    cluster: usize,
    probes: u64,
) -> Result<f64> {
    let a = alpha(plan, cfg)?;
    let q = *plan.q().get(cluster).ok_or(Error::LengthMismatch {
        expected: cfg.len(),
        got: cluster,
    })?;
    Ok(if probes == 0 {
        1.0
    } else {
        (probes as f64 * (-q * a).ln_1p()).exp()
    })
}
