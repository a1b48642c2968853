//! The dual-station charging environment: one episode is one simulated day.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::ev::{step_soc, EvProfile, SocPolicy};
use crate::preference::{choose_station, PreferenceWeights, StationView};
use crate::pricing::{competitive_price, PriceAdjustment, PriceLedger, PriceOffer};
use crate::station::{PileKind, PileSpec, StationConfig, StationId};

use super::reward::{action_to_power, emergency, step_reward, EvCharge, RewardBreakdown};
use super::state::{AgentLayout, JointState, PileState, StationState};

/// Hours in one episode.
pub const EPISODE_HOURS: u8 = 24;

/// Static description of the physical world an episode runs in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub stations: [StationConfig; 2],
    pub nc_spec: PileSpec,
    pub fc_spec: PileSpec,
    pub soc_policy: SocPolicy,
    pub weights: PreferenceWeights,
    pub adjustment: PriceAdjustment,
    /// Punishment scaling factor A.
    pub scale_a: f64,
    /// Whether competitive price scheduling is active.
    pub pricing_enabled: bool,
    /// Step length, hours.
    pub dt: f64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        for station in &self.stations {
            station.validate()?;
        }
        if self.stations[0].station_id == self.stations[1].station_id {
            return Err(CoreError::Config("stations must have distinct ids".into()));
        }
        self.nc_spec.validate()?;
        self.fc_spec.validate()?;
        if self.nc_spec.kind != PileKind::Nc || self.fc_spec.kind != PileKind::Fc {
            return Err(CoreError::Config("pile specs assigned to wrong kinds".into()));
        }
        self.soc_policy.validate()?;
        self.weights.validate()?;
        self.adjustment
            .validate(&self.stations[0].tariff, &self.stations[1].tariff)?;
        if !(self.scale_a >= 0.0) {
            return Err(CoreError::Config(format!(
                "punishment scale {} must be non-negative",
                self.scale_a
            )));
        }
        if !(self.dt > 0.0) {
            return Err(CoreError::Config(format!(
                "step length {} must be positive",
                self.dt
            )));
        }
        Ok(())
    }

    /// Fraction of piles that are fast-charging, across both stations.
    pub fn fc_fraction(&self) -> f64 {
        let fc: u32 = self.stations.iter().map(|s| s.fc_count).sum();
        let total: u32 = self.stations.iter().map(|s| s.pile_count()).sum();
        fc as f64 / total as f64
    }

    fn base_price(&self, station: StationId, hour: u8) -> f64 {
        self.stations[station.index()].tariff.price_at(hour)
    }
}

/// One pile and whatever EV is attached to it.
#[derive(Debug, Clone, PartialEq)]
struct Pile {
    spec: PileSpec,
    occupant: Option<usize>,
    soc: f64,
    /// Price the attached EV pays this hour, CNY/kWh.
    effective_price: f64,
}

impl Pile {
    fn new(spec: PileSpec) -> Self {
        Self {
            spec,
            occupant: None,
            soc: 0.0,
            effective_price: 0.0,
        }
    }
}

/// One applied charge, kept for the episode audit trail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeRecord {
    pub step: u8,
    pub ev_id: u32,
    pub station: StationId,
    pub power_kw: f64,
    pub price: f64,
}

/// One per-step trace row for CSV export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub hour: u8,
    pub occupancy: [u32; 2],
    pub prices: [f64; 2],
    pub power_totals: [f64; 2],
    pub station_cost: [f64; 2],
    pub punishment: [f64; 2],
    pub reward_total: f64,
}

/// The charging MDP over one day.
#[derive(Debug, Clone)]
pub struct Env {
    config: WorldConfig,
    population: Vec<EvProfile>,
    layout: AgentLayout,
    piles: Vec<Pile>,
    ledger: PriceLedger,
    offers: PriceOffer,
    clock: u8,
    done: bool,
    assignments: Vec<Option<StationId>>,
    rejected: Vec<u32>,
    charge_records: Vec<ChargeRecord>,
    trace: Vec<TraceRow>,
    rng: ChaCha8Rng,
}

impl Env {
    /// Builds the world and resolves hour 0 (prices posted, no arrivals yet).
    pub fn new(config: WorldConfig, population: Vec<EvProfile>, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        for ev in &population {
            ev.validate()?;
        }
        let mut piles = Vec::new();
        for station in &config.stations {
            for spec in station.pile_specs(&config.nc_spec, &config.fc_spec) {
                piles.push(Pile::new(spec));
            }
        }
        let layout = AgentLayout {
            piles_per_station: [
                config.stations[0].pile_count() as usize,
                config.stations[1].pile_count() as usize,
            ],
        };
        let assignments = vec![None; population.len()];
        let mut env = Self {
            offers: PriceOffer {
                offer0: config.base_price(StationId(0), 0),
                offer1: config.base_price(StationId(1), 0),
                discounted_station: None,
            },
            config,
            population,
            layout,
            piles,
            ledger: PriceLedger::new(),
            clock: 0,
            done: false,
            assignments,
            rejected: Vec::new(),
            charge_records: Vec::new(),
            trace: Vec::new(),
            rng,
        };
        env.resolve_hour(0)?;
        Ok(env)
    }

    pub fn agent_count(&self) -> usize {
        self.piles.len()
    }

    pub fn agent_mask(&self) -> Vec<bool> {
        self.piles.iter().map(|p| p.occupant.is_some()).collect()
    }

    pub fn clock(&self) -> u8 {
        self.clock
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn ledger(&self) -> &PriceLedger {
        &self.ledger
    }

    pub fn rejected(&self) -> &[u32] {
        &self.rejected
    }

    pub fn charge_records(&self) -> &[ChargeRecord] {
        &self.charge_records
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn population(&self) -> &[EvProfile] {
        &self.population
    }

    /// EVs currently attached per station.
    pub fn occupancy(&self) -> [u32; 2] {
        let mut counts = [0u32; 2];
        for (i, pile) in self.piles.iter().enumerate() {
            if pile.occupant.is_some() {
                counts[self.layout.locate(i).0.index()] += 1;
            }
        }
        counts
    }

    /// Final (n0, n1) arrival counts over the whole episode.
    pub fn arrival_counts(&self) -> [u32; 2] {
        let mut counts = [0u32; 2];
        for assignment in self.assignments.iter().flatten() {
            counts[assignment.index()] += 1;
        }
        counts
    }

    /// SOC of the pile an EV sits on, if attached.
    pub fn soc_of(&self, ev_id: u32) -> Option<f64> {
        self.piles
            .iter()
            .find(|p| p.occupant == Some(ev_id as usize))
            .map(|p| p.soc)
    }

    /// Current joint state snapshot.
    pub fn joint_state(&self) -> JointState {
        let hour = self.clock;
        let piles = self
            .piles
            .iter()
            .map(|pile| match pile.occupant {
                Some(ev_idx) => {
                    let ev = &self.population[ev_idx];
                    PileState {
                        soc: pile.soc,
                        p_max: pile.spec.p_max,
                        p_min: pile.spec.p_min,
                        t_stay: (ev.t_depart as f64 - hour as f64).max(0.0),
                        occupied: true,
                    }
                }
                None => PileState::vacant(),
            })
            .collect();
        let stations = [self.station_state(StationId(0)), self.station_state(StationId(1))];
        JointState {
            layout: self.layout,
            piles,
            stations,
        }
    }

    fn station_state(&self, station: StationId) -> StationState {
        let mut eme_total = 0.0;
        for (i, pile) in self.piles.iter().enumerate() {
            if self.layout.locate(i).0 != station {
                continue;
            }
            if let Some(ev_idx) = pile.occupant {
                let ev = &self.population[ev_idx];
                let t_stay = (ev.t_depart as f64 - self.clock as f64).max(0.0);
                eme_total += emergency(
                    pile.soc,
                    self.config.soc_policy.soc_need,
                    pile.spec.battery_capacity,
                    t_stay,
                );
            }
        }
        StationState {
            t_cur: self.clock as f64,
            price: self.offers.offer(station),
            emergency_total: eme_total,
        }
    }

    /// Applies one joint action, advances the clock one hour, and resolves
    /// departures, price posting, arrivals, and reclaims for the new hour.
    pub fn step(&mut self, actions: &[f64]) -> Result<(JointState, RewardBreakdown, bool)> {
        if self.done {
            return Err(CoreError::Contract("episode already finished".into()));
        }
        if actions.len() != self.piles.len() {
            return Err(CoreError::Contract(format!(
                "expected {} actions, got {}",
                self.piles.len(),
                actions.len()
            )));
        }

        let hour = self.clock;
        let mut charges: [Vec<EvCharge>; 2] = [Vec::new(), Vec::new()];
        let mut power_totals = [0.0; 2];
        for (i, pile) in self.piles.iter_mut().enumerate() {
            let Some(ev_idx) = pile.occupant else {
                continue;
            };
            let station = self.layout.locate(i).0;
            let requested = action_to_power(actions[i], pile.spec.p_max, pile.spec.p_min)?;
            let (new_soc, applied) = step_soc(
                pile.soc,
                requested,
                self.config.dt,
                pile.spec.battery_capacity,
                &self.config.soc_policy,
            );
            pile.soc = new_soc;
            charges[station.index()].push(EvCharge {
                power_kw: applied,
                price: pile.effective_price,
            });
            power_totals[station.index()] += applied;
            self.charge_records.push(ChargeRecord {
                step: hour,
                ev_id: self.population[ev_idx].ev_id,
                station,
                power_kw: applied,
                price: pile.effective_price,
            });
        }

        let reward = step_reward(
            &charges,
            power_totals,
            [
                self.config.stations[0].p_max_station,
                self.config.stations[1].p_max_station,
            ],
            self.config.scale_a,
            self.config.dt,
        );
        self.trace.push(TraceRow {
            hour,
            occupancy: self.occupancy(),
            prices: [self.offers.offer0, self.offers.offer1],
            power_totals,
            station_cost: reward.station_cost,
            punishment: reward.punishment,
            reward_total: reward.total,
        });

        self.clock = hour + 1;
        if self.clock >= EPISODE_HOURS {
            self.done = true;
            // Final departures so the terminal state is empty.
            for pile in &mut self.piles {
                pile.occupant = None;
            }
        } else {
            self.resolve_hour(self.clock)?;
        }
        Ok((self.joint_state(), reward, self.done))
    }

    /// Departures, competitive posting, arrivals, and reclaims for `hour`.
    fn resolve_hour(&mut self, hour: u8) -> Result<()> {
        // Departures: an EV occupies its pile over [t_arrive, t_depart).
        for pile in &mut self.piles {
            if let Some(ev_idx) = pile.occupant {
                if self.population[ev_idx].t_depart <= hour {
                    pile.occupant = None;
                }
            }
        }

        let [n0, n1] = self.occupancy();
        let base0 = self.config.base_price(StationId(0), hour);
        let base1 = self.config.base_price(StationId(1), hour);
        self.offers = if self.config.pricing_enabled {
            competitive_price(n0, n1, base0, base1, &self.config.adjustment)
        } else {
            PriceOffer {
                offer0: base0,
                offer1: base1,
                discounted_station: None,
            }
        };

        // Continuing occupants pay this hour's base price unless reclaimed below.
        for (i, pile) in self.piles.iter_mut().enumerate() {
            if pile.occupant.is_some() {
                let station = self.layout.locate(i).0;
                pile.effective_price = self.config.base_price(station, hour);
            }
        }

        // Arrivals pick a station at the posted offers.
        let arrivals: Vec<usize> = (0..self.population.len())
            .filter(|&idx| self.population[idx].t_arrive == hour)
            .collect();
        for ev_idx in arrivals {
            let views = self.station_views();
            let ev = self.population[ev_idx];
            match choose_station(
                &ev,
                &views,
                &self.config.weights,
                &self.config.soc_policy,
                &mut self.rng,
            ) {
                Some(station) => {
                    self.attach(ev_idx, station)?;
                    self.assignments[ev_idx] = Some(station);
                    if self.config.pricing_enabled
                        && self.offers.discounted_station == Some(station)
                    {
                        let discount = self.offers.discount(&self.config.adjustment);
                        self.ledger.record_attraction(
                            ev.ev_id,
                            station,
                            discount,
                            self.config.base_price(station, hour),
                            hour,
                        )?;
                    }
                }
                None => self.rejected.push(ev.ev_id),
            }
        }

        // Reclaims: EVs discounted last hour pay back this hour.
        for station in [StationId(0), StationId(1)] {
            let reclaim_prices = self.ledger.reclaim_step(station, hour);
            if reclaim_prices.is_empty() {
                continue;
            }
            for (i, pile) in self.piles.iter_mut().enumerate() {
                if self.layout.locate(i).0 != station {
                    continue;
                }
                if let Some(ev_idx) = pile.occupant {
                    if let Some(&price) = reclaim_prices.get(&self.population[ev_idx].ev_id) {
                        pile.effective_price = price;
                    }
                }
            }
        }
        Ok(())
    }

    fn station_views(&self) -> [StationView; 2] {
        let mut free_nc = [0u32; 2];
        let mut free_fc = [0u32; 2];
        for (i, pile) in self.piles.iter().enumerate() {
            if pile.occupant.is_none() {
                let z = self.layout.locate(i).0.index();
                match pile.spec.kind {
                    PileKind::Nc => free_nc[z] += 1,
                    PileKind::Fc => free_fc[z] += 1,
                }
            }
        }
        [0usize, 1usize].map(|z| StationView {
            station_id: StationId(z as u8),
            n_piles: self.config.stations[z].pile_count(),
            live_price: self.offers.offer(StationId(z as u8)),
            free_nc: free_nc[z],
            free_fc: free_fc[z],
        })
    }

    /// Attaches the EV to the lowest-index free pile of its kind.
    fn attach(&mut self, ev_idx: usize, station: StationId) -> Result<()> {
        let ev = self.population[ev_idx];
        let offer = self.offers.offer(station);
        for (i, pile) in self.piles.iter_mut().enumerate() {
            if self.layout.locate(i).0 == station
                && pile.spec.kind == ev.pile_kind
                && pile.occupant.is_none()
            {
                pile.occupant = Some(ev_idx);
                pile.soc = ev.soc_arrive;
                pile.effective_price = offer;
                return Ok(());
            }
        }
        Err(CoreError::Contract(format!(
            "no free {:?} pile at station {} for EV {}",
            ev.pile_kind, station.0, ev.ev_id
        )))
    }

    /// Per-step trace as CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(
            "hour,occupancy0,occupancy1,price0,price1,p_total0,p_total1,cost0,cost1,punish0,punish1,reward_total\n",
        );
        for row in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.hour,
                row.occupancy[0],
                row.occupancy[1],
                row.prices[0],
                row.prices[1],
                row.power_totals[0],
                row.power_totals[1],
                row.station_cost[0],
                row.station_cost[1],
                row.punishment[0],
                row.punishment[1],
                row.reward_total
            ));
        }
        out
    }
}
