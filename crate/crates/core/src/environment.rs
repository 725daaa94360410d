//! Episodic gridworld: one flight of the drone over the sampling grid.
//!
//! A flight visits `episode_length` locations (16 by default). The first
//! observation is taken at the start cell during [`Environment::reset`] and
//! earns no reward, since no action led to it. Each of the remaining
//! `episode_length - 1` actions moves the drone (or keeps it in place),
//! takes one observation at the new cell, assimilates it, and pays a reward
//! computed from the updated posterior.
//!
//! Random draws happen in a fixed order: on reset the true flux, the start
//! cell, the prior ensemble, the observation noise and the filter
//! perturbations; on each step the observation noise, then the filter
//! perturbations.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::enkf::{assimilate, EnkfConfig, ForwardModel, LinearResponse, Observation};
use crate::error::{config, domain, Error, Result};
use crate::plume::{unit_excess, PlumeConfig, Point3};
use crate::prior::{EnsembleStats, FluxEnsemble, LognormalParams};
use crate::scoring::{crps_ensemble, fit_clamped, step_reward, RewardKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Flight altitude of every observation, m.
    pub measurement_z: f64,
    /// Wind, stability, source and grid spacing (`plume.cell_size`).
    pub plume: PlumeConfig,
    pub prior: LognormalParams,
    pub enkf: EnkfConfig,
    pub ensemble_size: usize,
    /// Standard deviation of one location-averaged observation, ppm.
    pub noise_sd: f64,
    /// Observations per flight.
    pub episode_length: usize,
    /// True fluxes are drawn uniformly from `[min, max]`.
    pub flux_range: [f64; 2],
    pub samples_per_location: usize,
    pub battery_minutes: f64,
    pub sampling_hz: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            grid_nx: 10,
            grid_ny: 10,
            measurement_z: 10.0,
            plume: PlumeConfig::default(),
            prior: LognormalParams::default(),
            enkf: EnkfConfig::default(),
            ensemble_size: 100,
            // 30 ppm sensor error averaged over 12 samples.
            noise_sd: 30.0 / 12f64.sqrt(),
            episode_length: 16,
            flux_range: [200.0, 300.0],
            samples_per_location: 12,
            battery_minutes: 32.0,
            sampling_hz: 0.1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.plume.validate()?;
        self.prior.validate()?;
        self.enkf.validate()?;
        if self.grid_nx == 0 || self.grid_ny == 0 {
            return Err(config("grid dimensions must be positive"));
        }
        if self.ensemble_size < 2 {
            return Err(config("ensemble_size must be >= 2"));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(config(format!("noise_sd must be > 0, got {}", self.noise_sd)));
        }
        if self.episode_length < 2 {
            return Err(config("episode_length must be >= 2"));
        }
        if self.samples_per_location == 0 {
            return Err(config("samples_per_location must be >= 1"));
        }
        let budget = self.battery_minutes * 60.0 * self.sampling_hz / self.samples_per_location as f64;
        if (budget - self.episode_length as f64).abs() > 1e-9 {
            return Err(config(format!(
                "episode_length {} does not match the battery budget {} min x {} Hz / {} samples = {budget}",
                self.episode_length, self.battery_minutes, self.sampling_hz, self.samples_per_location
            )));
        }
        let [lo, hi] = self.flux_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(config(format!("flux_range must satisfy 0 < min < max, got [{lo}, {hi}]")));
        }
        if !(self.measurement_z >= 0.0 && self.measurement_z.is_finite()) {
            return Err(config(format!("measurement_z must be >= 0, got {}", self.measurement_z)));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> f64 {
        self.plume.cell_size
    }

    pub fn in_grid(&self, cx: i64, cy: i64) -> bool {
        cx >= 0 && cy >= 0 && (cx as usize) < self.grid_nx && (cy as usize) < self.grid_ny
    }

    pub fn is_edge(&self, cx: usize, cy: usize) -> bool {
        cx == 0 || cy == 0 || cx + 1 == self.grid_nx || cy + 1 == self.grid_ny
    }

    /// Edge cells in row-major order (`cy` outer, `cx` inner).
    pub fn edge_cells(&self) -> Vec<(usize, usize)> {
        (0..self.grid_ny)
            .flat_map(|cy| (0..self.grid_nx).map(move |cx| (cx, cy)))
            .filter(|&(cx, cy)| self.is_edge(cx, cy))
            .collect()
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point3 {
        let s = self.cell_size();
        Point3::new((cx as f64 + 0.5) * s, (cy as f64 + 0.5) * s, self.measurement_z)
    }

    /// Plume response at the centre of a cell.
    pub fn cell_response(&self, cx: usize, cy: usize) -> LinearResponse {
        LinearResponse {
            background: self.plume.background_ppm,
            per_unit_flux: unit_excess(self.cell_center(cx, cy), &self.plume),
        }
    }

    /// Cell whose centre has the highest plume concentration (first in
    /// row-major order on ties).
    pub fn max_concentration_cell(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_value = f64::NEG_INFINITY;
        for cy in 0..self.grid_ny {
            for cx in 0..self.grid_nx {
                let v = unit_excess(self.cell_center(cx, cy), &self.plume);
                if v > best_value {
                    best_value = v;
                    best = (cx, cy);
                }
            }
        }
        best
    }
}

/// RL state: cell indices and time step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub cx: usize,
    pub cy: usize,
    pub t: usize,
}

impl AgentState {
    pub fn cell(&self) -> (usize, usize) {
        (self.cx, self.cy)
    }

    pub fn is_terminal(&self, episode_length: usize) -> bool {
        self.t + 1 >= episode_length
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::PlusX, Action::MinusX, Action::PlusY, Action::MinusY, Action::Stay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::PlusX => (1, 0),
            Action::MinusX => (-1, 0),
            Action::PlusY => (0, 1),
            Action::MinusY => (0, -1),
            Action::Stay => (0, 0),
        }
    }

    /// Action that moves from `from` to the adjacent-or-equal cell `to`.
    pub fn between(from: (usize, usize), to: (usize, usize)) -> Option<Action> {
        let d = (to.0 as i64 - from.0 as i64, to.1 as i64 - from.1 as i64);
        Self::ALL.into_iter().find(|a| a.delta() == d)
    }
}

/// Small set of actions, stored as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    /// Moves that stay on an `nx × ny` grid, plus `Stay`.
    pub fn for_cell(cx: usize, cy: usize, nx: usize, ny: usize) -> Self {
        let mut mask = 1 << Action::Stay.index();
        if cx + 1 < nx {
            mask |= 1 << Action::PlusX.index();
        }
        if cx > 0 {
            mask |= 1 << Action::MinusX.index();
        }
        if cy + 1 < ny {
            mask |= 1 << Action::PlusY.index();
        }
        if cy > 0 {
            mask |= 1 << Action::MinusY.index();
        }
        Self(mask)
    }

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

pub fn legal_actions(s: &AgentState, cfg: &ScenarioConfig) -> Result<ActionSet> {
    if s.is_terminal(cfg.episode_length) {
        return Err(Error::Contract(format!("no actions in terminal state {s:?}")));
    }
    Ok(ActionSet::for_cell(s.cx, s.cy, cfg.grid_nx, cfg.grid_ny))
}

/// Observation at a cell given a standard-normal noise draw `z`.
pub fn observation_with_noise(
    cfg: &ScenarioConfig,
    cell: (usize, usize),
    t: usize,
    true_flux: f64,
    z: f64,
) -> Observation {
    let mean = cfg.cell_response(cell.0, cell.1).predict(true_flux);
    Observation {
        value: mean + cfg.noise_sd * z,
        noise_sd: cfg.noise_sd,
        location: cfg.cell_center(cell.0, cell.1),
        time_step: t,
    }
}

/// Location-averaged synthetic observation: plume value plus `Normal(0, noise_sd)`.
pub fn observe<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    cell: (usize, usize),
    t: usize,
    true_flux: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !cfg.in_grid(cell.0 as i64, cell.1 as i64) {
        return Err(domain(format!("cell {cell:?} is off the grid")));
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(observation_with_noise(cfg, cell, t, true_flux, z))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub params: LognormalParams,
    pub stats: EnsembleStats,
}

impl PosteriorSummary {
    pub fn of(ensemble: &FluxEnsemble) -> Self {
        Self { params: fit_clamped(ensemble), stats: ensemble.stats() }
    }
}

/// Trace of one flight. Serialized as one JSON object per line, with fields
/// in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub reward_kind: RewardKind,
    pub true_flux: f64,
    pub start_cell: (usize, usize),
    pub path: Vec<AgentState>,
    pub observations: Vec<Observation>,
    pub rewards: Vec<f64>,
    pub final_posterior: Option<PosteriorSummary>,
    pub final_crps: Option<f64>,
}

impl EpisodeRecord {
    pub fn is_complete(&self) -> bool {
        self.final_crps.is_some()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.path.iter().map(AgentState::cell)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResetOptions {
    pub true_flux: Option<f64>,
    pub start: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: AgentState,
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Debug)]
struct Episode {
    state: AgentState,
    ensemble: FluxEnsemble,
    record: EpisodeRecord,
}

/// Single-flight environment. Cheap to clone; run one per worker.
#[derive(Clone, Debug)]
pub struct Environment {
    scenario: ScenarioConfig,
    reward_kind: RewardKind,
    responses: Vec<LinearResponse>,
    edge_cells: Vec<(usize, usize)>,
    episode: Option<Episode>,
}

impl Environment {
    pub fn new(scenario: ScenarioConfig, reward_kind: RewardKind) -> Result<Self> {
        scenario.validate()?;
        let responses = (0..scenario.grid_ny)
            .flat_map(|cy| (0..scenario.grid_nx).map(move |cx| (cx, cy)))
            .map(|(cx, cy)| scenario.cell_response(cx, cy))
            .collect();
        let edge_cells = scenario.edge_cells();
        Ok(Self { scenario, reward_kind, responses, edge_cells, episode: None })
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    fn response(&self, cell: (usize, usize)) -> &LinearResponse {
        &self.responses[cell.1 * self.scenario.grid_nx + cell.0]
    }

    fn observe_cell<R: Rng + ?Sized>(&self, cell: (usize, usize), t: usize, truth: f64, rng: &mut R) -> Observation {
        let z: f64 = StandardNormal.sample(rng);
        Observation {
            value: self.response(cell).predict(truth) + self.scenario.noise_sd * z,
            noise_sd: self.scenario.noise_sd,
            location: self.scenario.cell_center(cell.0, cell.1),
            time_step: t,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, opts: &ResetOptions, rng: &mut R) -> Result<AgentState> {
        let sc = &self.scenario;
        let true_flux = match opts.true_flux {
            Some(f) if f > 0.0 && f.is_finite() => f,
            Some(f) => return Err(domain(format!("true flux must be > 0, got {f}"))),
            None => {
                let [lo, hi] = sc.flux_range;
                rng.random_range(lo..=hi)
            }
        };
        let start = match opts.start {
            Some((cx, cy)) if sc.in_grid(cx as i64, cy as i64) => (cx, cy),
            Some(cell) => return Err(domain(format!("start cell {cell:?} is off the grid"))),
            None => self.edge_cells[rng.random_range(0..self.edge_cells.len())],
        };
        let prior = FluxEnsemble::sample_prior(&sc.prior, sc.ensemble_size, rng)?;
        let state = AgentState { cx: start.0, cy: start.1, t: 0 };
        let obs = self.observe_cell(start, 0, true_flux, rng);
        let ensemble = assimilate(&prior, &obs, self.response(start), &self.scenario.enkf, rng)?;

        let record = EpisodeRecord {
            reward_kind: self.reward_kind,
            true_flux,
            start_cell: start,
            path: vec![state],
            observations: vec![obs],
            rewards: Vec::with_capacity(self.scenario.episode_length - 1),
            final_posterior: None,
            final_crps: None,
        };
        self.episode = Some(Episode { state, ensemble, record });
        Ok(state)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: Action, rng: &mut R) -> Result<StepOutcome> {
        let episode = self
            .episode
            .take()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        match self.advance(episode, action, rng) {
            Ok((episode, outcome)) => {
                self.episode = Some(episode);
                Ok(outcome)
            }
            Err(failed) => {
                let (episode, err) = *failed;
                self.episode = Some(episode);
                Err(err)
            }
        }
    }

    fn advance<R: Rng + ?Sized>(
        &self,
        mut ep: Episode,
        action: Action,
        rng: &mut R,
    ) -> std::result::Result<(Episode, StepOutcome), Box<(Episode, Error)>> {
        let legal = match legal_actions(&ep.state, &self.scenario) {
            Ok(l) => l,
            Err(e) => return Err(Box::new((ep, e))),
        };
        if !legal.contains(action) {
            let err = Error::Contract(format!("action {action:?} is illegal in state {:?}", ep.state));
            return Err(Box::new((ep, err)));
        }
        let (dx, dy) = action.delta();
        let next = AgentState {
            cx: (ep.state.cx as i64 + dx) as usize,
            cy: (ep.state.cy as i64 + dy) as usize,
            t: ep.state.t + 1,
        };
        let truth = ep.record.true_flux;
        let obs = self.observe_cell(next.cell(), next.t, truth, rng);
        let ensemble = match assimilate(&ep.ensemble, &obs, self.response(next.cell()), &self.scenario.enkf, rng) {
            Ok(e) => e,
            Err(e) => return Err(Box::new((ep, e))),
        };
        let reward = match step_reward(self.reward_kind, &ensemble, &self.scenario.prior, truth) {
            Ok(r) => r,
            Err(e) => return Err(Box::new((ep, e))),
        };
        let done = next.is_terminal(self.scenario.episode_length);
        ep.state = next;
        ep.ensemble = ensemble;
        ep.record.path.push(next);
        ep.record.observations.push(obs);
        ep.record.rewards.push(reward);
        if done {
            ep.record.final_posterior = Some(PosteriorSummary::of(&ep.ensemble));
            ep.record.final_crps = Some(crps_ensemble(&ep.ensemble, truth));
        }
        Ok((ep, StepOutcome { state: next, reward, done }))
    }

    pub fn state(&self) -> Option<AgentState> {
        self.episode.as_ref().map(|e| e.state)
    }

    pub fn ensemble(&self) -> Option<&FluxEnsemble> {
        self.episode.as_ref().map(|e| &e.ensemble)
    }

    pub fn record(&self) -> Option<&EpisodeRecord> {
        self.episode.as_ref().map(|e| &e.record)
    }

    pub fn take_record(&mut self) -> Option<EpisodeRecord> {
        self.episode.take().map(|e| e.record)
    }
}
