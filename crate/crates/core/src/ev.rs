//! EV population sampling and battery dynamics.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::station::PileKind;

/// SOC operating policy shared by every EV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocPolicy {
    /// SOC required before departure.
    pub soc_need: f64,
    /// Hard lower SOC bound.
    pub soc_min: f64,
    /// Hard upper SOC bound.
    pub soc_max: f64,
    /// Urgency threshold used by the preference model.
    pub soc_th: f64,
}

impl SocPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.soc_min < self.soc_th && self.soc_th < self.soc_need && self.soc_need <= self.soc_max)
        {
            return Err(CoreError::Config(format!(
                "SOC policy must satisfy min < th < need <= max, got min={} th={} need={} max={}",
                self.soc_min, self.soc_th, self.soc_need, self.soc_max
            )));
        }
        Ok(())
    }
}

impl Default for SocPolicy {
    fn default() -> Self {
        Self {
            soc_need: 0.8,
            soc_min: 0.2,
            soc_max: 0.9,
            soc_th: 0.5,
        }
    }
}

/// One arriving EV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvProfile {
    pub ev_id: u32,
    /// Arrival hour t_a.
    pub t_arrive: u8,
    /// Departure hour t_d.
    pub t_depart: u8,
    /// Arrival state of charge.
    pub soc_arrive: f64,
    /// Normalized distance to station 0.
    pub d_norm_0: f64,
    /// Normalized distance to station 1 (= 1 - d_norm_0).
    pub d_norm_1: f64,
    /// Normalized velocity.
    pub v_norm: f64,
    /// Pile class the EV requires.
    pub pile_kind: PileKind,
}

impl EvProfile {
    pub fn validate(&self) -> Result<()> {
        if !(7 <= self.t_arrive && self.t_arrive <= 11) {
            return Err(CoreError::Config(format!(
                "EV {}: arrival hour {} outside 7-11",
                self.ev_id, self.t_arrive
            )));
        }
        if !(17 <= self.t_depart && self.t_depart <= 21) {
            return Err(CoreError::Config(format!(
                "EV {}: departure hour {} outside 17-21",
                self.ev_id, self.t_depart
            )));
        }
        if self.t_arrive >= self.t_depart {
            return Err(CoreError::Config(format!(
                "EV {}: arrival {} not before departure {}",
                self.ev_id, self.t_arrive, self.t_depart
            )));
        }
        if !(0.2 <= self.soc_arrive && self.soc_arrive <= 0.6) {
            return Err(CoreError::Config(format!(
                "EV {}: arrival SOC {} outside 0.2-0.6",
                self.ev_id, self.soc_arrive
            )));
        }
        if !(0.0 < self.d_norm_0 && self.d_norm_0 < 1.0) {
            return Err(CoreError::Config(format!(
                "EV {}: normalized distance {} outside (0,1)",
                self.ev_id, self.d_norm_0
            )));
        }
        if (self.d_norm_0 + self.d_norm_1 - 1.0).abs() > 1e-12 {
            return Err(CoreError::Config(format!(
                "EV {}: normalized distances sum to {}",
                self.ev_id,
                self.d_norm_0 + self.d_norm_1
            )));
        }
        if !(self.v_norm > 0.0) {
            return Err(CoreError::Config(format!(
                "EV {}: normalized velocity {} must be positive",
                self.ev_id, self.v_norm
            )));
        }
        Ok(())
    }

    /// Normalized distance to the given station.
    pub fn d_norm(&self, station: crate::station::StationId) -> f64 {
        if station.0 == 0 {
            self.d_norm_0
        } else {
            self.d_norm_1
        }
    }
}

/// A bounded normal distribution for one commuting-behaviour field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldDistribution {
    pub mean: f64,
    pub stddev: f64,
    pub low: f64,
    pub high: f64,
}

impl FieldDistribution {
    pub fn new(mean: f64, stddev: f64, low: f64, high: f64) -> Self {
        Self {
            mean,
            stddev,
            low,
            high,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.stddev > 0.0) {
            return Err(CoreError::Config(format!(
                "{name}: stddev {} must be positive",
                self.stddev
            )));
        }
        if !(self.low < self.high) {
            return Err(CoreError::Config(format!(
                "{name}: bounds [{}, {}] are empty",
                self.low, self.high
            )));
        }
        Ok(())
    }

    /// Draws until the sample lands inside `[low, high]` for closed bounds or
    /// `(low, high)` for open ones, preserving the in-bounds shape.
    fn sample_bounded(&self, rng: &mut ChaCha8Rng, open: bool) -> f64 {
        let normal = Normal::new(self.mean, self.stddev).expect("validated stddev");
        loop {
            let x = normal.sample(rng);
            let inside = if open {
                self.low < x && x < self.high
            } else {
                self.low <= x && x <= self.high
            };
            if inside {
                return x;
            }
        }
    }
}

/// Commuting behaviour distributions for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommuteDistributions {
    pub t_arrive: FieldDistribution,
    pub t_depart: FieldDistribution,
    pub soc_arrive: FieldDistribution,
    pub d_norm_0: FieldDistribution,
}

impl CommuteDistributions {
    pub fn validate(&self) -> Result<()> {
        self.t_arrive.validate("t_arrive")?;
        self.t_depart.validate("t_depart")?;
        self.soc_arrive.validate("soc_arrive")?;
        self.d_norm_0.validate("d_norm_0")?;
        Ok(())
    }
}

impl Default for CommuteDistributions {
    fn default() -> Self {
        Self {
            t_arrive: FieldDistribution::new(9.0, 1.0, 7.0, 11.0),
            t_depart: FieldDistribution::new(19.0, 1.0, 17.0, 21.0),
            soc_arrive: FieldDistribution::new(0.4, 0.1, 0.2, 0.6),
            d_norm_0: FieldDistribution::new(0.5, 0.3, 0.0, 1.0),
        }
    }
}

/// Samples a population of `count` EVs.
///
/// Arrival and departure hours are rounded to whole hours after the bounded
/// draw. Pile-kind demand is proportional to the aggregate FC:NC pile ratio:
/// `round(count * fc_fraction)` EVs require fast charging, with the
/// assignment shuffled by the seeded generator. The fixed normalized
/// velocity is 1.0.
pub fn sample_population(
    count: u32,
    distributions: &CommuteDistributions,
    fc_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EvProfile>> {
    if count == 0 {
        return Err(CoreError::Config("population count must be positive".into()));
    }
    distributions.validate()?;
    if !(0.0..=1.0).contains(&fc_fraction) {
        return Err(CoreError::Config(format!(
            "fc_fraction {fc_fraction} outside [0,1]"
        )));
    }

    let fc_demand = (count as f64 * fc_fraction).round() as u32;
    let mut kinds: Vec<PileKind> = Vec::with_capacity(count as usize);
    kinds.extend(std::iter::repeat(PileKind::Fc).take(fc_demand as usize));
    kinds.extend(std::iter::repeat(PileKind::Nc).take((count - fc_demand) as usize));
    kinds.shuffle(rng);

    let mut evs = Vec::with_capacity(count as usize);
    for ev_id in 0..count {
        let t_arrive = distributions.t_arrive.sample_bounded(rng, false).round() as u8;
        let t_depart = distributions.t_depart.sample_bounded(rng, false).round() as u8;
        let soc_arrive = distributions.soc_arrive.sample_bounded(rng, false);
        let d_norm_0 = distributions.d_norm_0.sample_bounded(rng, true);
        evs.push(EvProfile {
            ev_id,
            t_arrive,
            t_depart,
            soc_arrive,
            d_norm_0,
            d_norm_1: 1.0 - d_norm_0,
            v_norm: 1.0,
            pile_kind: kinds[ev_id as usize],
        });
    }
    Ok(evs)
}

/// Integrates SOC over one step, clipping power so SOC stays inside the
/// policy band. Returns the new SOC and the power actually applied.
pub fn step_soc(
    soc: f64,
    power: f64,
    dt: f64,
    capacity: f64,
    policy: &SocPolicy,
) -> (f64, f64) {
    debug_assert!(capacity > 0.0 && dt > 0.0);
    let max_power = (policy.soc_max - soc) * capacity / dt;
    let min_power = (policy.soc_min - soc) * capacity / dt;
    let applied = power.clamp(min_power, max_power);
    let new_soc = soc + applied * dt / capacity;
    (new_soc, applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, streams};

    fn rng50() -> ChaCha8Rng {
        seeded_rng(50, streams::POPULATION, 0)
    }

    #[test]
    fn population_of_six_is_valid() {
        let evs =
            sample_population(6, &CommuteDistributions::default(), 7.0 / 12.0, &mut rng50())
                .unwrap();
        assert_eq!(evs.len(), 6);
        for ev in &evs {
            ev.validate().unwrap();
        }
    }

    #[test]
    fn degenerate_arrival_spread_collapses_to_nine() {
        let mut dists = CommuteDistributions::default();
        dists.t_arrive.stddev = 1e-12;
        let evs = sample_population(64, &dists, 0.5, &mut rng50()).unwrap();
        assert!(evs.iter().all(|ev| ev.t_arrive == 9));
    }

    /// Mean of the truncated normal by Simpson quadrature; the sampling path
    /// never sees this.
    fn truncated_normal_mean(mean: f64, stddev: f64, low: f64, high: f64) -> f64 {
        let pdf = |x: f64| {
            let z = (x - mean) / stddev;
            (-0.5 * z * z).exp()
        };
        let n = 2000;
        let h = (high - low) / n as f64;
        let mut mass = 0.0;
        let mut first_moment = 0.0;
        for i in 0..=n {
            let x = low + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            mass += w * pdf(x);
            first_moment += w * x * pdf(x);
        }
        first_moment / mass
    }

    #[test]
    fn soc_sample_mean_matches_quadrature_oracle() {
        let oracle = truncated_normal_mean(0.4, 0.1, 0.2, 0.6);
        assert!((oracle - 0.4).abs() < 1e-9, "symmetric truncation keeps the mean");
        let evs =
            sample_population(1000, &CommuteDistributions::default(), 0.5, &mut rng50()).unwrap();
        let mean = evs.iter().map(|ev| ev.soc_arrive).sum::<f64>() / evs.len() as f64;
        assert!(
            (mean - oracle).abs() < 0.01,
            "sample mean {mean} vs oracle {oracle}"
        );
    }

    #[test]
    fn zero_stddev_is_a_config_error() {
        let mut dists = CommuteDistributions::default();
        dists.soc_arrive.stddev = 0.0;
        let err = sample_population(4, &dists, 0.5, &mut rng50()).unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }

    #[test]
    fn identical_seeds_identical_populations() {
        let dists = CommuteDistributions::default();
        let a = sample_population(32, &dists, 0.6, &mut rng50()).unwrap();
        let b = sample_population(32, &dists, 0.6, &mut rng50()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pile_kind_demand_is_proportional() {
        let dists = CommuteDistributions::default();
        let evs = sample_population(12, &dists, 7.0 / 12.0, &mut rng50()).unwrap();
        let fc = evs.iter().filter(|ev| ev.pile_kind == PileKind::Fc).count();
        assert_eq!(fc, 7);
    }

    #[test]
    fn step_soc_plain_charge() {
        let policy = SocPolicy::default();
        let (soc, applied) = step_soc(0.4, 6.0, 1.0, 24.0, &policy);
        assert!((soc - 0.65).abs() < 1e-15);
        assert_eq!(applied, 6.0);
    }

    #[test]
    fn step_soc_clips_at_upper_bound() {
        let policy = SocPolicy::default();
        let (soc, applied) = step_soc(0.9, 6.0, 1.0, 24.0, &policy);
        assert_eq!(soc, 0.9);
        assert_eq!(applied, 0.0);
    }

    #[test]
    fn step_soc_clips_at_lower_bound() {
        let policy = SocPolicy::default();
        let (soc, applied) = step_soc(0.2, -6.0, 1.0, 24.0, &policy);
        assert_eq!(soc, 0.2);
        assert_eq!(applied, 0.0);
    }

    #[test]
    fn soc_policy_ordering_enforced() {
        let bad = SocPolicy {
            soc_need: 0.4,
            soc_min: 0.2,
            soc_max: 0.9,
            soc_th: 0.5,
        };
        assert!(bad.validate().is_err());
        assert!(SocPolicy::default().validate().is_ok());
    }
}
