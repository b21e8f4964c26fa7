//! Seeded synthetic data: a birth–death population with scheduled rate and
//! noise changes, and a constant-regulation gene panel where half of the genes
//! keep switching their expression rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::flow_const_reg;
use crate::series::{GroundTruth, TimeGrid, TimeSeriesData};

/// `value` on `[from, until)`; `until = None` extends to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub from: f64,
    pub until: Option<f64>,
    pub value: f64,
}

/// Contiguous piecewise-constant schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub pieces: Vec<Piece>,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Self {
            pieces: vec![Piece {
                from: 0.0,
                until: None,
                value,
            }],
        }
    }

    /// `before` on `[0, at)` and `after` from `at` on.
    pub fn step(before: f64, at: f64, after: f64) -> Self {
        Self {
            pieces: vec![
                Piece {
                    from: 0.0,
                    until: Some(at),
                    value: before,
                },
                Piece {
                    from: at,
                    until: None,
                    value: after,
                },
            ],
        }
    }

    /// Checks that the pieces are contiguous and cover `[start, end]`.
    pub fn validate(&self, start: f64, end: f64, name: &str) -> Result<()> {
        let first = self
            .pieces
            .first()
            .ok_or_else(|| Error::InvalidConfig(format!("schedule {name} is empty")))?;
        if first.from > start {
            return Err(Error::InvalidConfig(format!(
                "schedule {name} starts at {} after {start}",
                first.from
            )));
        }
        for p in &self.pieces {
            if !p.value.is_finite() || !p.from.is_finite() || p.until.is_some_and(|u| !(u > p.from)) {
                return Err(Error::InvalidConfig(format!("schedule {name} has a bad piece {p:?}")));
            }
        }
        for pair in self.pieces.windows(2) {
            match pair[0].until {
                Some(u) if u == pair[1].from => {}
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "schedule {name} has a gap or overlap at {:?} / {}",
                        pair[0].until, pair[1].from
                    )))
                }
            }
        }
        let last = self.pieces.last().expect("non-empty");
        if last.until.is_some_and(|u| u < end) {
            return Err(Error::InvalidConfig(format!(
                "schedule {name} ends at {:?} before {end}",
                last.until
            )));
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.until.is_none_or(|u| t < u))
            .or(self.pieces.last())
            .map(|p| p.value)
            .unwrap_or(0.0)
    }

    /// Interior change points, in order.
    pub fn change_points(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.from).collect()
    }

    /// Exact integral over `[a, b]`, `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut knots = vec![a];
        knots.extend(self.change_points().into_iter().filter(|&c| c > a && c < b));
        knots.push(b);
        knots
            .windows(2)
            .map(|w| self.value_at(0.5 * (w[0] + w[1])) * (w[1] - w[0]))
            .sum()
    }
}

fn merged_knots(schedules: &[&Schedule], a: f64, b: f64) -> Vec<f64> {
    let mut knots = vec![a, b];
    for s in schedules {
        knots.extend(s.change_points().into_iter().filter(|&c| c > a && c < b));
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirthDeathScenario {
    pub n0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub replicates: usize,
    pub k_birth: Schedule,
    pub k_death: Schedule,
    /// Standard deviation of the measurement noise.
    pub k_noise: Schedule,
    pub seed: u64,
}

impl Default for BirthDeathScenario {
    fn default() -> Self {
        Self {
            n0: 100.0,
            t_end: 20.0,
            dt: 0.25,
            replicates: 100,
            k_birth: Schedule::step(0.05, 5.0, 0.15),
            k_death: Schedule::step(0.05, 15.0, 0.5),
            k_noise: Schedule::step(1.0, 10.0, 5.0),
            seed: 42,
        }
    }
}

impl BirthDeathScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.n0 > 0.0) || !self.n0.is_finite() {
            return Err(Error::InvalidConfig(format!("n0 must be positive, got {}", self.n0)));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need dt > 0 and t_end > 0, got dt={} t_end={}",
                self.dt, self.t_end
            )));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        self.k_birth.validate(0.0, self.t_end, "k_birth")?;
        self.k_death.validate(0.0, self.t_end, "k_death")?;
        self.k_noise.validate(0.0, self.t_end, "k_noise")?;
        if self.k_noise.pieces.iter().any(|p| p.value < 0.0) {
            return Err(Error::InvalidConfig("k_noise must be >= 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let n = (self.t_end / self.dt).round() as usize + 1;
        TimeGrid::uniform(0.0, self.dt, n)
    }

    /// Exact population at time `t`.
    pub fn population(&self, t: f64) -> f64 {
        let log_growth: f64 = merged_knots(&[&self.k_birth, &self.k_death], 0.0, t)
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (self.k_birth.value_at(mid) - self.k_death.value_at(mid)) * (w[1] - w[0])
            })
            .sum();
        self.n0 * log_growth.exp()
    }
}

/// Ground truth and Gaussian replicates drawn around it.
pub fn simulate_birth_death(scenario: &BirthDeathScenario) -> Result<(GroundTruth, TimeSeriesData)> {
    scenario.validate()?;
    let grid = scenario.grid()?;
    let truth: Vec<f64> = grid.times().iter().map(|&t| scenario.population(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut samples = Vec::with_capacity(grid.len());
    for (&t, &mean) in grid.times().iter().zip(&truth) {
        let normal = Normal::new(mean, scenario.k_noise.value_at(t))
            .map_err(|e| Error::InvalidConfig(format!("noise at t={t}: {e}")))?;
        samples.push((0..scenario.replicates).map(|_| normal.sample(&mut rng)).collect());
    }
    Ok((
        GroundTruth::new(grid.clone(), truth)?,
        TimeSeriesData::new("birth-death", grid, samples)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneLabel {
    Dynamic,
    Static,
}

impl GeneLabel {
    pub fn name(self) -> &'static str {
        match self {
            GeneLabel::Dynamic => "dynamic",
            GeneLabel::Static => "static",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenePanelScenario {
    pub n_genes: usize,
    pub times: Vec<f64>,
    pub replicates: usize,
    /// Noise standard deviation as a fraction of each gene's baseline level.
    pub noise_cv: f64,
    pub dynamic_fraction: f64,
    /// Baseline expression levels are log-uniform in this range.
    pub level_range: (f64, f64),
    pub k_deg_range: (f64, f64),
    /// Dynamic genes switch their expression rate back and forth; the ratio
    /// of the high to the low rate is drawn from this range.
    pub fold_change_range: (f64, f64),
    /// Time between switches of a dynamic gene, drawn per gene.
    pub switch_interval_range: (f64, f64),
    pub seed: u64,
}

impl Default for GenePanelScenario {
    fn default() -> Self {
        Self {
            n_genes: 200,
            times: (0..14).map(|i| 2.0 * i as f64).collect(),
            replicates: 2,
            noise_cv: 0.1,
            dynamic_fraction: 0.5,
            level_range: (10.0, 1000.0),
            k_deg_range: (0.2, 0.6),
            fold_change_range: (2.5, 4.0),
            switch_interval_range: (4.0, 8.0),
            seed: 42,
        }
    }
}

impl GenePanelScenario {
    pub fn validate(&self) -> Result<()> {
        TimeGrid::new(self.times.clone()).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.n_genes == 0 || self.replicates == 0 {
            return Err(Error::InvalidConfig("need at least one gene and one replicate".into()));
        }
        if !(self.noise_cv >= 0.0) || !(0.0..=1.0).contains(&self.dynamic_fraction) {
            return Err(Error::InvalidConfig(
                "noise_cv must be >= 0 and dynamic_fraction in [0, 1]".into(),
            ));
        }
        let ordered = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !ordered(self.level_range)
            || !ordered(self.k_deg_range)
            || !ordered(self.fold_change_range)
            || !ordered(self.switch_interval_range)
        {
            return Err(Error::InvalidConfig("ranges must be positive and ordered".into()));
        }
        Ok(())
    }

    fn is_dynamic(&self, index: usize) -> bool {
        let before = (index as f64 * self.dynamic_fraction).floor();
        let after = ((index + 1) as f64 * self.dynamic_fraction).floor();
        after > before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneSeries {
    pub label: GeneLabel,
    pub truth: GroundTruth,
    pub data: TimeSeriesData,
    pub k_exp: Schedule,
    pub k_deg: f64,
}

/// Independent, reproducible sub-seed for series `index` (SplitMix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exact piecewise solution of `dX/dt = k_exp(t) - k_deg X`.
pub fn const_reg_truth(x0: f64, k_exp: &Schedule, k_deg: f64, t0: f64, times: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut x) = (t0, x0);
    for &target in times {
        for w in merged_knots(&[k_exp], t, target).windows(2) {
            x = flow_const_reg(x, k_exp.value_at(0.5 * (w[0] + w[1])), k_deg, w[1] - w[0])?;
        }
        t = target;
        out.push(x);
    }
    Ok(out)
}

pub fn simulate_gene_panel(scenario: &GenePanelScenario) -> Result<Vec<GeneSeries>> {
    scenario.validate()?;
    let grid = TimeGrid::new(scenario.times.clone())?;
    let (t0, t1) = (grid.get(0), grid.get(grid.len() - 1));
    (0..scenario.n_genes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, i as u64));
            let (lo, hi) = scenario.level_range;
            let level = rng.random_range(lo.ln()..=hi.ln()).exp();
            let k_deg = rng.random_range(scenario.k_deg_range.0..=scenario.k_deg_range.1);
            let base = level * k_deg;
            let label = if scenario.is_dynamic(i) {
                GeneLabel::Dynamic
            } else {
                GeneLabel::Static
            };
            let k_exp = match label {
                GeneLabel::Static => Schedule::constant(base),
                GeneLabel::Dynamic => {
                    // Square-wave switching between base*sqrt(fold) and base/sqrt(fold).
                    let (lo, hi) = scenario.switch_interval_range;
                    let half_period = rng.random_range(lo..=hi);
                    let fold = rng.random_range(scenario.fold_change_range.0..=scenario.fold_change_range.1);
                    let mut high = rng.random_bool(0.5);
                    let mut from = t0.min(0.0);
                    let mut until = t0 + rng.random_range(0.0..half_period);
                    let mut pieces = Vec::new();
                    while until < t1 {
                        let value = base * if high { fold.sqrt() } else { 1.0 / fold.sqrt() };
                        pieces.push(Piece {
                            from,
                            until: Some(until),
                            value,
                        });
                        high = !high;
                        from = until;
                        until += half_period;
                    }
                    pieces.push(Piece {
                        from,
                        until: None,
                        value: base * if high { fold.sqrt() } else { 1.0 / fold.sqrt() },
                    });
                    Schedule { pieces }
                }
            };
            let truth = const_reg_truth(level, &k_exp, k_deg, t0, grid.times())?;
            let sd = scenario.noise_cv * level;
            let samples = truth
                .iter()
                .map(|&mean| {
                    let normal = Normal::new(mean, sd).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                    Ok((0..scenario.replicates).map(|_| normal.sample(&mut rng)).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            Ok(GeneSeries {
                label,
                truth: GroundTruth::new(grid.clone(), truth)?,
                data: TimeSeriesData::new(format!("gene{i:05}"), grid.clone(), samples)?,
                k_exp,
                k_deg,
            })
        })
        .collect()
}
