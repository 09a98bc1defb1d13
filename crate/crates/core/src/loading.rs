//! Single-atom loading statistics in the collisional-blockade regime.
//!
//! Each trap that reaches the capture threshold holds one atom with
//! probability `p` per experimental run, independently of the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::TrapReport;
use crate::scalar::Scalar;

/// Trials per independent random stream. Fixed so that results do not depend
/// on how many worker threads run the chunks.
const TRIALS_PER_STREAM: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingModel {
    /// Occupation probability of an above-threshold trap.
    pub p_single: f64,
    /// Optional per-trap probabilities, indexed like the report's traps.
    #[serde(default)]
    pub per_trap_p: Option<Vec<f64>>,
    /// Minimum trap power that captures an atom, watts.
    pub threshold_power_per_trap_w: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for LoadingModel {
    fn default() -> Self {
        Self {
            p_single: 0.5,
            per_trap_p: None,
            threshold_power_per_trap_w: 4e-3,
            trials: 100_000,
            seed: 1,
        }
    }
}

impl LoadingModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p_single) {
            return Err(Error::Config(format!("p_single must lie in [0, 1], got {}", self.p_single)));
        }
        if let Some(ps) = &self.per_trap_p {
            if let Some(bad) = ps.iter().find(|&&p| !ok(p)) {
                return Err(Error::Config(format!("per-trap probability {bad} outside [0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.threshold_power_per_trap_w >= 0.0) {
            return Err(Error::Config("threshold power must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub trials: usize,
    pub seed: u64,
    /// Occupation probability used for each trap (0 below threshold).
    pub probabilities: Vec<f64>,
    /// Fraction of trials in which each trap held an atom.
    pub per_trap_frequency: Vec<f64>,
    /// Fraction of trials with every trap occupied; `None` without traps.
    pub joint_all_occupied: Option<f64>,
    pub mean_atom_number: f64,
    /// Fraction of trials with exactly k atoms, k = 0..=traps.
    pub atom_number_distribution: Vec<f64>,
}

impl OccupancyStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let mut out = format!("trials: {}  seed: {}\n", self.trials, self.seed);
        out.push_str("trap  p_used  occupancy\n");
        for (i, (p, f)) in self.probabilities.iter().zip(&self.per_trap_frequency).enumerate() {
            out.push_str(&format!("{i:>4}  {p:>6.3}  {f:>9.5}\n"));
        }
        match self.joint_all_occupied {
            Some(j) => out.push_str(&format!("all occupied: {j:.5}\n")),
            None => out.push_str("all occupied: n/a (no traps)\n"),
        }
        out.push_str(&format!("mean atom number: {:.5}\n", self.mean_atom_number));
        out
    }
}

#[derive(Clone)]
struct Tally {
    per_trap: Vec<u64>,
    joint: u64,
    atoms: u64,
    histogram: Vec<u64>,
}

impl Tally {
    fn new(traps: usize) -> Self {
        Self {
            per_trap: vec![0; traps],
            joint: 0,
            atoms: 0,
            histogram: vec![0; traps + 1],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.per_trap.iter_mut().zip(other.per_trap) {
            *a += b;
        }
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.joint += other.joint;
        self.atoms += other.atoms;
        self
    }
}

/// Monte Carlo occupancy of the traps in `report`.
///
/// Trials are split into fixed-size chunks, each drawing from its own ChaCha
/// stream of the seeded generator, so the result is reproducible for a seed
/// regardless of parallelism.
pub fn load_sim<T: Scalar>(report: &TrapReport<T>, loading: &LoadingModel) -> Result<OccupancyStats> {
    loading.validate()?;
    if let Some(ps) = &loading.per_trap_p {
        if ps.len() != report.traps.len() {
            return Err(Error::Config(format!(
                "per_trap_p has {} entries but the report has {} traps",
                ps.len(),
                report.traps.len()
            )));
        }
    }
    let probabilities: Vec<f64> = report
        .traps
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if !t.above_threshold {
                0.0
            } else {
                loading
                    .per_trap_p
                    .as_ref()
                    .map_or(loading.p_single, |ps| ps[i])
            }
        })
        .collect();
    let traps = probabilities.len();
    let chunks = loading.trials.div_ceil(TRIALS_PER_STREAM);

    let tally = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(loading.seed);
            rng.set_stream(chunk as u64);
            let start = chunk * TRIALS_PER_STREAM;
            let count = TRIALS_PER_STREAM.min(loading.trials - start);
            let mut t = Tally::new(traps);
            for _ in 0..count {
                let mut occupied = 0usize;
                for (i, &p) in probabilities.iter().enumerate() {
                    let u: f64 = rng.random();
                    if u < p {
                        t.per_trap[i] += 1;
                        occupied += 1;
                    }
                }
                if occupied == traps {
                    t.joint += 1;
                }
                t.atoms += occupied as u64;
                t.histogram[occupied] += 1;
            }
            t
        })
        .reduce(|| Tally::new(traps), Tally::merge);

    let n = loading.trials as f64;
    Ok(OccupancyStats {
        trials: loading.trials,
        seed: loading.seed,
        per_trap_frequency: tally.per_trap.iter().map(|&c| c as f64 / n).collect(),
        joint_all_occupied: (traps > 0).then(|| tally.joint as f64 / n),
        mean_atom_number: tally.atoms as f64 / n,
        atom_number_distribution: tally.histogram.iter().map(|&c| c as f64 / n).collect(),
        probabilities,
    })
}
