//! Action-to-power mapping, charge emergency, and the step reward.

use crate::error::{CoreError, Result};

/// Maps an action fraction in [-1, 1] onto the pile's power range.
pub fn action_to_power(action: f64, p_max: f64, p_min: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&action) {
        return Err(CoreError::Domain(format!(
            "action {action} outside [-1, 1]"
        )));
    }
    Ok((action + 1.0) / 2.0 * (p_max - p_min) + p_min)
}

/// Minimum average power needed to reach `soc_need` before departure, kW.
///
/// At a zero staying time the remaining deficit is due within one step, so
/// the division is skipped and the full energy gap is returned.
pub fn emergency(soc: f64, soc_need: f64, capacity: f64, t_stay: f64) -> f64 {
    if soc >= soc_need {
        return 0.0;
    }
    let energy_gap = (soc_need - soc) * capacity;
    if t_stay > 0.0 {
        energy_gap / t_stay
    } else {
        energy_gap
    }
}

/// Total charging power of a station, kW.
pub fn station_power_total(applied_powers: &[f64]) -> f64 {
    applied_powers.iter().sum()
}

/// One EV's power draw and the price it pays this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvCharge {
    pub power_kw: f64,
    pub price: f64,
}

/// Per-station cost and punishment plus the combined scalar reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    /// Charging cost per station, CNY (positive = money spent).
    pub station_cost: [f64; 2],
    /// Cap-violation term per station: `p_max - p_total` when exceeded, else 0.
    pub punishment: [f64; 2],
    /// Punishment scaling factor A.
    pub scale_a: f64,
    /// Negated cost plus scaled punishment.
    pub total: f64,
}

impl RewardBreakdown {
    pub fn zero(scale_a: f64) -> Self {
        Self {
            station_cost: [0.0; 2],
            punishment: [0.0; 2],
            scale_a,
            total: 0.0,
        }
    }
}

/// Computes the step reward.
///
/// Cost enters negated so that maximizing the reward minimizes the
/// accumulated charging cost; the punishment term is negative exactly when a
/// station's total power exceeds its cap.
pub fn step_reward(
    charges: &[Vec<EvCharge>; 2],
    power_totals: [f64; 2],
    p_max_stations: [f64; 2],
    scale_a: f64,
    dt: f64,
) -> RewardBreakdown {
    debug_assert!(dt > 0.0);
    let mut station_cost = [0.0; 2];
    let mut punishment = [0.0; 2];
    for z in 0..2 {
        station_cost[z] = charges[z]
            .iter()
            .map(|c| c.power_kw * c.price * dt)
            .sum::<f64>();
        if power_totals[z] > p_max_stations[z] {
            punishment[z] = p_max_stations[z] - power_totals[z];
        }
    }
    let total = -(station_cost[0] + station_cost[1]) + scale_a * (punishment[0] + punishment[1]);
    RewardBreakdown {
        station_cost,
        punishment,
        scale_a,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_boundaries_map_to_power_limits() {
        assert_eq!(action_to_power(1.0, 30.0, -30.0).unwrap(), 30.0);
        assert_eq!(action_to_power(-1.0, 30.0, -30.0).unwrap(), -30.0);
        assert_eq!(action_to_power(0.0, 6.0, -6.0).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_action_rejected() {
        assert!(action_to_power(1.5, 6.0, -6.0).is_err());
        assert!(action_to_power(-1.0001, 6.0, -6.0).is_err());
    }

    #[test]
    fn emergency_hand_value() {
        assert!((emergency(0.4, 0.8, 24.0, 4.0) - 2.4).abs() < 1e-12);
    }

    #[test]
    fn emergency_vanishes_at_or_above_need() {
        assert_eq!(emergency(0.8, 0.8, 24.0, 4.0), 0.0);
        assert_eq!(emergency(0.9, 0.8, 24.0, 4.0), 0.0);
    }

    #[test]
    fn emergency_one_step_deadline() {
        assert!((emergency(0.4, 0.8, 24.0, 0.0) - 9.6).abs() < 1e-12);
    }

    #[test]
    fn power_total_sums() {
        assert_eq!(station_power_total(&[6.0, 30.0, -6.0]), 30.0);
        assert_eq!(station_power_total(&[]), 0.0);
        assert_eq!(station_power_total(&[6.0; 5]), 30.0);
    }

    #[test]
    fn punishment_on_violation_only() {
        let charges = [vec![], vec![]];
        let r = step_reward(&charges, [36.0, 20.0], [30.0, 30.0], 10.0, 1.0);
        assert_eq!(r.punishment[0], -6.0);
        assert_eq!(r.punishment[1], 0.0);
    }

    #[test]
    fn single_ev_cost_hand_value() {
        let charges = [
            vec![EvCharge {
                power_kw: 6.0,
                price: 0.3946,
            }],
            vec![],
        ];
        let r = step_reward(&charges, [6.0, 0.0], [30.0, 30.0], 10.0, 1.0);
        assert!((r.total - (-2.3676)).abs() < 1e-10, "total {}", r.total);
        assert_eq!(r.punishment, [0.0, 0.0]);
    }
}
