//! Probabilistic EV-user station selection.
//!
//! An arriving EV scores each station with a linear attractiveness function
//! (pile count, live price, normalized distance/SOC composite), divides by
//! closeness (average charging time plus travel time) to get a utility, and
//! picks station 0 with probability `u0 / (u0 + u1)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::ev::{EvProfile, SocPolicy};
use crate::station::{PileKind, StationId};

/// Utility floor keeping selection probabilities well defined when a score
/// is non-positive.
pub const UTILITY_FLOOR: f64 = 1e-6;

/// Margin the smaller attractiveness is lifted to when any score is
/// non-positive; see [`positivity_shift`].
pub const ATT_SHIFT_MARGIN: f64 = 0.1;

/// Weights of the attractiveness function plus the average charging time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceWeights {
    /// Weight on pile count.
    pub w0: f64,
    /// Weight on price.
    pub w1: f64,
    /// Weight on the distance/SOC composite.
    pub w2: f64,
    /// Average EV charging time, hours.
    pub t_c: f64,
}

impl PreferenceWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.w0 >= 0.0 && self.w1 >= 0.0 && self.w2 >= 0.0) {
            return Err(CoreError::Config(format!(
                "preference weights ({}, {}, {}) must be non-negative",
                self.w0, self.w1, self.w2
            )));
        }
        if !(self.t_c > 0.0) {
            return Err(CoreError::Config(format!(
                "average charging time {} must be positive",
                self.t_c
            )));
        }
        Ok(())
    }
}

impl Default for PreferenceWeights {
    fn default() -> Self {
        Self {
            w0: 0.25,
            w1: 3.8,
            w2: 0.7,
            t_c: 1.0,
        }
    }
}

/// Inputs the attractiveness score reads for one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractionInputs {
    /// Station pile count N_z.
    pub n_piles: u32,
    /// Live price at the arrival hour, CNY/kWh.
    pub price_at_arrival: f64,
    /// Normalized distance to the station.
    pub d_norm: f64,
    /// EV arrival SOC.
    pub soc_arrive: f64,
    /// Urgency threshold.
    pub soc_th: f64,
}

/// Normalizes two physical distances onto (0, 1) so they sum to one.
pub fn normalize_distance(d0: f64, d1: f64) -> Result<(f64, f64)> {
    if !(d0 > 0.0 && d1 > 0.0) {
        return Err(CoreError::Domain(format!(
            "distances ({d0}, {d1}) must be positive"
        )));
    }
    let total = d0 + d1;
    Ok((d0 / total, d1 / total))
}

/// Linear attractiveness score; may be negative.
pub fn attractiveness(inputs: &AttractionInputs, w: &PreferenceWeights) -> f64 {
    w.w0 * inputs.n_piles as f64
        - w.w1 * inputs.price_at_arrival
        - w.w2 * (inputs.d_norm + inputs.soc_th - inputs.soc_arrive)
}

/// Travel time from normalized distance and normalized velocity.
pub fn travel_time(d_norm: f64, v_norm: f64) -> Result<f64> {
    if !(v_norm > 0.0) {
        return Err(CoreError::Domain(format!(
            "normalized velocity {v_norm} must be positive"
        )));
    }
    Ok(d_norm / v_norm)
}

/// Utility: attractiveness over closeness, floored at [`UTILITY_FLOOR`].
pub fn utility(att: f64, t_c: f64, t_travel: f64) -> f64 {
    debug_assert!(t_c + t_travel > 0.0);
    (att / (t_c + t_travel)).max(UTILITY_FLOOR)
}

/// Selection probabilities from two positive utilities.
pub fn selection_probability(u0: f64, u1: f64) -> (f64, f64) {
    debug_assert!(u0 > 0.0 && u1 > 0.0);
    let total = u0 + u1;
    (u0 / total, u1 / total)
}

/// Lifts both scores so the smaller sits at [`ATT_SHIFT_MARGIN`] whenever
/// either is non-positive, keeping their gap intact.
///
/// At tariff scale the linear scores are frequently negative for both
/// stations; flooring the utilities alone would erase the gap and collapse
/// every choice to a coin flip. The shift keeps the ratio model responsive
/// (ordering and differences preserved) while leaving already-positive score
/// pairs untouched.
pub fn positivity_shift(att0: f64, att1: f64) -> (f64, f64) {
    let min = att0.min(att1);
    if min <= 0.0 {
        (att0 - min + ATT_SHIFT_MARGIN, att1 - min + ATT_SHIFT_MARGIN)
    } else {
        (att0, att1)
    }
}

/// What an arriving EV can see of one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationView {
    pub station_id: StationId,
    /// Static pile count N_z.
    pub n_piles: u32,
    /// Posted price at this hour (base tariff or competitive offer).
    pub live_price: f64,
    /// Free NC piles right now.
    pub free_nc: u32,
    /// Free FC piles right now.
    pub free_fc: u32,
}

impl StationView {
    fn has_free(&self, kind: PileKind) -> bool {
        match kind {
            PileKind::Nc => self.free_nc > 0,
            PileKind::Fc => self.free_fc > 0,
        }
    }
}

/// Analytic probability that the EV picks station 0 given both views.
pub fn selection_chain(
    ev: &EvProfile,
    views: &[StationView; 2],
    w: &PreferenceWeights,
    policy: &SocPolicy,
) -> (f64, f64) {
    let score = |view: &StationView| {
        attractiveness(
            &AttractionInputs {
                n_piles: view.n_piles,
                price_at_arrival: view.live_price,
                d_norm: ev.d_norm(view.station_id),
                soc_arrive: ev.soc_arrive,
                soc_th: policy.soc_th,
            },
            w,
        )
    };
    let (att0, att1) = positivity_shift(score(&views[0]), score(&views[1]));
    let u0 = utility(
        att0,
        w.t_c,
        travel_time(ev.d_norm_0, ev.v_norm).expect("validated velocity"),
    );
    let u1 = utility(
        att1,
        w.t_c,
        travel_time(ev.d_norm_1, ev.v_norm).expect("validated velocity"),
    );
    selection_probability(u0, u1)
}

/// Samples the station choice; falls back to the other station when the
/// chosen one has no free pile of the EV's kind, and returns `None` when
/// both are full (the EV is rejected).
pub fn choose_station(
    ev: &EvProfile,
    views: &[StationView; 2],
    w: &PreferenceWeights,
    policy: &SocPolicy,
    rng: &mut ChaCha8Rng,
) -> Option<StationId> {
    let (pr0, _) = selection_chain(ev, views, w, policy);
    let preferred = if rng.gen::<f64>() < pr0 {
        StationId(0)
    } else {
        StationId(1)
    };
    if views[preferred.index()].has_free(ev.pile_kind) {
        Some(preferred)
    } else if views[preferred.other().index()].has_free(ev.pile_kind) {
        Some(preferred.other())
    } else {
        None
    }
}
