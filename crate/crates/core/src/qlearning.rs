//! Tabular Q-learning over `(cx, cy, t)` states and five actions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Action, ActionSet, AgentState, EpisodeRecord, Environment, ResetOptions, ScenarioConfig};
use crate::error::{config, Error, Result};
use crate::rng::seeded;
use crate::scoring::RewardKind;

pub const N_ACTIONS: usize = 5;

/// Dense action values and visit counts over `nx × ny × nt` states.
///
/// Values are stored row-major over `(cx, cy, t, action)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    nx: usize,
    ny: usize,
    nt: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn zeros(nx: usize, ny: usize, nt: usize) -> Self {
        let len = nx * ny * nt * N_ACTIONS;
        Self { nx, ny, nt, values: vec![0.0; len], visits: vec![0; len] }
    }

    pub fn for_scenario(sc: &ScenarioConfig) -> Self {
        Self::zeros(sc.grid_nx, sc.grid_ny, sc.episode_length)
    }

    pub fn from_parts(shape: [usize; 4], values: Vec<f64>, visits: Vec<u64>) -> Result<Self> {
        let [nx, ny, nt, na] = shape;
        if na != N_ACTIONS {
            return Err(Error::Parse(format!("q-table must have {N_ACTIONS} actions, got {na}")));
        }
        let len = nx * ny * nt * na;
        if values.len() != len || visits.len() != len {
            return Err(Error::Parse(format!(
                "q-table shape {shape:?} needs {len} entries, got {} values and {} visit counts",
                values.len(),
                visits.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("q-table contains non-finite values".into()));
        }
        Ok(Self { nx, ny, nt, values, visits })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.nx, self.ny, self.nt, N_ACTIONS]
    }

    pub fn matches(&self, sc: &ScenarioConfig) -> bool {
        self.shape() == [sc.grid_nx, sc.grid_ny, sc.episode_length, N_ACTIONS]
    }

    fn index(&self, s: &AgentState, a: Action) -> usize {
        ((s.cx * self.ny + s.cy) * self.nt + s.t) * N_ACTIONS + a.index()
    }

    pub fn value(&self, s: &AgentState, a: Action) -> f64 {
        self.values[self.index(s, a)]
    }

    pub fn visits(&self, s: &AgentState, a: Action) -> u64 {
        self.visits[self.index(s, a)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn legal(&self, s: &AgentState) -> ActionSet {
        ActionSet::for_cell(s.cx, s.cy, self.nx, self.ny)
    }

    pub fn is_terminal(&self, s: &AgentState) -> bool {
        s.is_terminal(self.nt)
    }

    /// Highest value over the legal actions of `s`.
    pub fn max_legal(&self, s: &AgentState) -> f64 {
        self.legal(s).iter().map(|a| self.value(s, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Legal actions sharing the highest value.
    pub fn greedy_set(&self, s: &AgentState, legal: ActionSet) -> Vec<Action> {
        let best = legal.iter().map(|a| self.value(s, a)).fold(f64::NEG_INFINITY, f64::max);
        legal.iter().filter(|a| self.value(s, *a) == best).collect()
    }
}

/// Epsilon-greedy choice among `legal`; greedy ties are broken uniformly.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    s: &AgentState,
    epsilon: f64,
    legal: ActionSet,
    rng: &mut R,
) -> Action {
    if rng.random::<f64>() < epsilon {
        let k = rng.random_range(0..legal.len());
        return legal.iter().nth(k).expect("k < legal.len()");
    }
    let ties = q.greedy_set(s, legal);
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// One Q-learning backup:
/// `q(s,a) += α (r + γ · max_{a' legal} q(s',a') · [not done] − q(s,a))`.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    s: &AgentState,
    a: Action,
    reward: f64,
    next: &AgentState,
    done: bool,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    if !q.legal(s).contains(a) {
        return Err(Error::Contract(format!("action {a:?} is illegal in state {s:?}")));
    }
    let bootstrap = if done { 0.0 } else { gamma * q.max_legal(next) };
    let i = q.index(s, a);
    q.values[i] += alpha * (reward + bootstrap - q.values[i]);
    q.visits[i] += 1;
    Ok(())
}

/// How epsilon moves from `eps_max` to `eps_min` over training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EpsilonSchedule {
    /// Linear decay over the first `decay_fraction` of episodes, then constant.
    Linear { decay_fraction: f64 },
    /// Geometric decay reaching `eps_min` after `decay_fraction` of episodes.
    Exponential { decay_fraction: f64 },
    /// `eps_max` throughout.
    Constant,
}

impl EpsilonSchedule {
    pub fn epsilon(&self, episode: usize, total: usize, eps_max: f64, eps_min: f64) -> f64 {
        let horizon = |fraction: f64| (fraction * total as f64).max(1.0);
        match *self {
            EpsilonSchedule::Constant => eps_max,
            EpsilonSchedule::Linear { decay_fraction } => {
                let h = horizon(decay_fraction);
                let progress = (episode as f64 / h).min(1.0);
                eps_max - (eps_max - eps_min) * progress
            }
            EpsilonSchedule::Exponential { decay_fraction } => {
                let h = horizon(decay_fraction);
                let progress = (episode as f64 / h).min(1.0);
                eps_max * (eps_min / eps_max).powf(progress)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub eps_max: f64,
    pub eps_min: f64,
    pub schedule: EpsilonSchedule,
    pub reward_kind: RewardKind,
    pub seed: u64,
    /// Call the checkpoint hook every this many episodes.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1_500_000,
            alpha: 0.1,
            gamma: 1.0,
            eps_max: 1.0,
            eps_min: 0.01,
            schedule: EpsilonSchedule::Linear { decay_fraction: 0.9 },
            reward_kind: RewardKind::NegCrps,
            seed: 0,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(config(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps_max && self.eps_max <= 1.0) {
            return Err(config(format!(
                "need 0 <= eps_min <= eps_max <= 1, got {} and {}",
                self.eps_min, self.eps_max
            )));
        }
        match self.schedule {
            EpsilonSchedule::Linear { decay_fraction } | EpsilonSchedule::Exponential { decay_fraction }
                if !(decay_fraction > 0.0 && decay_fraction <= 1.0) =>
            {
                return Err(config(format!("decay_fraction must be in (0, 1], got {decay_fraction}")));
            }
            EpsilonSchedule::Exponential { .. } if self.eps_min <= 0.0 => {
                return Err(config("exponential epsilon decay needs eps_min > 0"));
            }
            _ => {}
        }
        if self.checkpoint_every == Some(0) {
            return Err(config("checkpoint_every must be >= 1"));
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        self.schedule.epsilon(episode, self.episodes, self.eps_max, self.eps_min)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub table: QTable,
    /// Sum of rewards per episode, in training order.
    pub curve: Vec<f64>,
}

pub fn train(cfg: &TrainConfig, scenario: &ScenarioConfig) -> Result<TrainOutcome> {
    train_with_checkpoints(cfg, scenario, |_, _| Ok(()))
}

/// Trains from a zero table. `checkpoint(episodes_done, table)` runs every
/// `cfg.checkpoint_every` episodes.
pub fn train_with_checkpoints<F>(cfg: &TrainConfig, scenario: &ScenarioConfig, mut checkpoint: F) -> Result<TrainOutcome>
where
    F: FnMut(usize, &QTable) -> Result<()>,
{
    cfg.validate()?;
    let mut env = Environment::new(scenario.clone(), cfg.reward_kind)?;
    let mut table = QTable::for_scenario(scenario);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut rng = seeded(cfg.seed);
    let reset = ResetOptions::default();

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let mut s = env.reset(&reset, &mut rng)?;
        let mut total = 0.0;
        loop {
            let legal = table.legal(&s);
            let a = select_action(&table, &s, epsilon, legal, &mut rng);
            let out = env.step(a, &mut rng)?;
            q_update(&mut table, &s, a, out.reward, &out.state, out.done, cfg.alpha, cfg.gamma)?;
            total += out.reward;
            s = out.state;
            if out.done {
                break;
            }
        }
        curve.push(total);
        if let Some(every) = cfg.checkpoint_every {
            if (episode + 1) % every == 0 {
                checkpoint(episode + 1, &table)?;
            }
        }
    }
    Ok(TrainOutcome { table, curve })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Greedy with respect to a trained table.
    Greedy(QTable),
    /// Predetermined route; the first cell is the start.
    FixedPath(Vec<(usize, usize)>),
}

impl Policy {
    pub fn validate(&self, sc: &ScenarioConfig) -> Result<()> {
        match self {
            Policy::Greedy(q) if !q.matches(sc) => Err(config(format!(
                "q-table shape {:?} does not match the scenario ({}, {}, {}, {N_ACTIONS})",
                q.shape(),
                sc.grid_nx,
                sc.grid_ny,
                sc.episode_length
            ))),
            Policy::Greedy(_) => Ok(()),
            Policy::FixedPath(cells) => {
                if cells.len() != sc.episode_length {
                    return Err(config(format!(
                        "fixed path has {} cells, the flight takes {}",
                        cells.len(),
                        sc.episode_length
                    )));
                }
                if let Some(c) = cells.iter().find(|c| !sc.in_grid(c.0 as i64, c.1 as i64)) {
                    return Err(config(format!("fixed path cell {c:?} is off the grid")));
                }
                if let Some(w) = cells.windows(2).find(|w| Action::between(w[0], w[1]).is_none()) {
                    return Err(config(format!(
                        "fixed path cells {:?} and {:?} are not adjacent",
                        w[0], w[1]
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn start_cell(&self) -> Option<(usize, usize)> {
        match self {
            Policy::FixedPath(cells) => cells.first().copied(),
            Policy::Greedy(_) => None,
        }
    }
}

/// Flies one episode with epsilon = 0 (or along the fixed path) in `env`.
pub fn rollout<R: Rng + ?Sized>(
    policy: &Policy,
    env: &mut Environment,
    opts: &ResetOptions,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    policy.validate(env.scenario())?;
    let mut opts = *opts;
    if let Some(path_start) = policy.start_cell() {
        match opts.start {
            Some(s) if s != path_start => {
                return Err(config(format!(
                    "start {s:?} conflicts with the fixed path, which starts at {path_start:?}"
                )));
            }
            _ => opts.start = Some(path_start),
        }
    }
    let mut s = env.reset(&opts, rng)?;
    loop {
        let a = match policy {
            Policy::Greedy(q) => select_action(q, &s, 0.0, q.legal(&s), rng),
            Policy::FixedPath(cells) => {
                Action::between(s.cell(), cells[s.t + 1]).expect("validated adjacency")
            }
        };
        let out = env.step(a, rng)?;
        s = out.state;
        if out.done {
            break;
        }
    }
    Ok(env.take_record().expect("episode just finished"))
}

pub fn greedy_rollout<R: Rng + ?Sized>(
    policy: &Policy,
    scenario: &ScenarioConfig,
    reward_kind: RewardKind,
    opts: &ResetOptions,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let mut env = Environment::new(scenario.clone(), reward_kind)?;
    rollout(policy, &mut env, opts, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn st(cx: usize, cy: usize, t: usize) -> AgentState {
        AgentState { cx, cy, t }
    }

    fn set(q: &mut QTable, s: &AgentState, a: Action, v: f64) {
        let i = q.index(s, a);
        q.values[i] = v;
    }

    #[test]
    fn uniform_when_epsilon_is_one() {
        let q = QTable::zeros(10, 10, 16);
        let s = st(0, 0, 0);
        let legal = q.legal(&s);
        let mut rng = seeded(1);
        let n = 100_000;
        let mut counts = [0usize; N_ACTIONS];
        for _ in 0..n {
            counts[select_action(&q, &s, 1.0, legal, &mut rng).index()] += 1;
        }
        let p = 1.0 / 3.0;
        let tol = 3.0 * (n as f64 * p * (1.0 - p)).sqrt();
        for a in Action::ALL {
            let c = counts[a.index()] as f64;
            if legal.contains(a) {
                assert!((c - n as f64 * p).abs() < tol, "{a:?}: {c}");
            } else {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn greedy_picks_unique_maximum() {
        let mut q = QTable::zeros(10, 10, 16);
        let s = st(4, 4, 2);
        set(&mut q, &s, Action::MinusY, 1.0);
        let mut rng = seeded(2);
        for _ in 0..1000 {
            assert_eq!(select_action(&q, &s, 0.0, q.legal(&s), &mut rng), Action::MinusY);
        }
    }

    #[test]
    fn greedy_ties_split_evenly() {
        let mut q = QTable::zeros(10, 10, 16);
        let s = st(4, 4, 2);
        for a in Action::ALL {
            set(&mut q, &s, a, -1.0);
        }
        set(&mut q, &s, Action::PlusX, 0.5);
        set(&mut q, &s, Action::Stay, 0.5);
        let mut rng = seeded(3);
        let n = 10_000;
        let plus_x = (0..n)
            .filter(|_| select_action(&q, &s, 0.0, q.legal(&s), &mut rng) == Action::PlusX)
            .count();
        let sd = (n as f64 * 0.25).sqrt();
        assert!((plus_x as f64 - n as f64 / 2.0).abs() < 4.0 * sd, "{plus_x}");
    }

    #[test]
    fn terminal_update_arithmetic() {
        let mut q = QTable::zeros(10, 10, 16);
        let (s, next) = (st(1, 1, 14), st(1, 1, 15));
        q_update(&mut q, &s, Action::Stay, -1.0, &next, true, 0.1, 1.0).unwrap();
        assert_relative_eq!(q.value(&s, Action::Stay), -0.1, epsilon = 1e-15);
        assert_eq!(q.visits(&s, Action::Stay), 1);
    }

    #[test]
    fn repeated_terminal_update_converges_geometrically() {
        let mut q = QTable::zeros(10, 10, 16);
        let (s, next) = (st(1, 1, 14), st(1, 1, 15));
        let (q0, r) = (0.0, -2.0);
        for n in 1..=50 {
            q_update(&mut q, &s, Action::Stay, r, &next, true, 0.1, 1.0).unwrap();
            let expected = (q0 - r) * 0.9f64.powi(n);
            assert_relative_eq!(q.value(&s, Action::Stay) - r, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn illegal_update_is_rejected() {
        let mut q = QTable::zeros(10, 10, 16);
        let s = st(0, 0, 0);
        assert!(q_update(&mut q, &s, Action::MinusX, 1.0, &s, false, 0.1, 1.0).is_err());
    }

    #[test]
    fn two_state_chain_matches_bellman_values() {
        // A 2x1 grid with 3 time steps: at t = 0 in cell 0, PlusX pays 1 and
        // Stay pays 0; at t = 1 in cell 1, Stay pays 2 and MinusX pays 5.
        // Bellman (γ = 1): q(1,1,MinusX) = 5, q(1,1,Stay) = 2,
        // q(0,0,PlusX) = 1 + 5 = 6.
        let mut q = QTable::zeros(2, 1, 3);
        let s0 = st(0, 0, 0);
        let s1 = st(1, 0, 1);
        for _ in 0..2_000 {
            q_update(&mut q, &s1, Action::MinusX, 5.0, &st(0, 0, 2), true, 0.1, 1.0).unwrap();
            q_update(&mut q, &s1, Action::Stay, 2.0, &st(1, 0, 2), true, 0.1, 1.0).unwrap();
            q_update(&mut q, &s0, Action::PlusX, 1.0, &s1, false, 0.1, 1.0).unwrap();
        }
        assert!((q.value(&s1, Action::MinusX) - 5.0).abs() < 1e-3);
        assert!((q.value(&s1, Action::Stay) - 2.0).abs() < 1e-3);
        assert!((q.value(&s0, Action::PlusX) - 6.0).abs() < 1e-3);
    }

    #[test]
    fn epsilon_schedules() {
        let lin = EpsilonSchedule::Linear { decay_fraction: 0.9 };
        assert_eq!(lin.epsilon(0, 1000, 1.0, 0.01), 1.0);
        assert_relative_eq!(lin.epsilon(450, 1000, 1.0, 0.01), 0.505, epsilon = 1e-12);
        assert_relative_eq!(lin.epsilon(900, 1000, 1.0, 0.01), 0.01, epsilon = 1e-12);
        assert_relative_eq!(lin.epsilon(999, 1000, 1.0, 0.01), 0.01, epsilon = 1e-12);
        let exp = EpsilonSchedule::Exponential { decay_fraction: 0.5 };
        assert_relative_eq!(exp.epsilon(250, 1000, 1.0, 0.01), 0.1, epsilon = 1e-12);
        assert_relative_eq!(exp.epsilon(700, 1000, 1.0, 0.01), 0.01, epsilon = 1e-12);
        assert_eq!(EpsilonSchedule::Constant.epsilon(10, 1000, 0.3, 0.01), 0.3);
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { alpha: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { eps_min: 0.5, eps_max: 0.2, ..TrainConfig::default() }.validate().is_err());
        let exp = TrainConfig {
            eps_min: 0.0,
            schedule: EpsilonSchedule::Exponential { decay_fraction: 0.5 },
            ..TrainConfig::default()
        };
        assert!(exp.validate().is_err());
    }

    fn smoke_config(episodes: usize, seed: u64) -> TrainConfig {
        TrainConfig { episodes, seed, ..TrainConfig::default() }
    }

    #[test]
    fn smoke_training_run() {
        let sc = ScenarioConfig::default();
        let mut checkpoints = Vec::new();
        let cfg = TrainConfig { checkpoint_every: Some(250), ..smoke_config(1000, 1) };
        let out = train_with_checkpoints(&cfg, &sc, |ep, _| {
            checkpoints.push(ep);
            Ok(())
        })
        .unwrap();
        assert_eq!(out.curve.len(), 1000);
        assert!(out.table.values().iter().all(|v| v.is_finite()));
        assert_eq!(checkpoints, vec![250, 500, 750, 1000]);
        // NegCrps rewards are never positive, so neither is any value.
        assert!(out.table.values().iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn illegal_pairs_are_never_touched() {
        let sc = ScenarioConfig::default();
        let out = train(&smoke_config(2000, 2), &sc).unwrap();
        let q = &out.table;
        for cx in 0..10 {
            for cy in 0..10 {
                for t in 0..16 {
                    let s = st(cx, cy, t);
                    for a in Action::ALL {
                        if !q.legal(&s).contains(a) || t == 15 {
                            assert_eq!(q.value(&s, a), 0.0);
                            assert_eq!(q.visits(&s, a), 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let sc = ScenarioConfig::default();
        let a = train(&smoke_config(300, 7), &sc).unwrap();
        let b = train(&smoke_config(300, 7), &sc).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn fixed_path_rollout_follows_path() {
        let sc = ScenarioConfig::default();
        let cells: Vec<(usize, usize)> = (0..10).map(|x| (x, 6)).chain((4..10).rev().map(|x| (x, 5))).collect();
        let policy = Policy::FixedPath(cells.clone());
        let rec = greedy_rollout(&policy, &sc, RewardKind::NegCrps, &ResetOptions::default(), &mut seeded(4))
            .unwrap();
        assert_eq!(rec.cells().collect::<Vec<_>>(), cells);
        assert!(rec.is_complete());
    }

    #[test]
    fn fixed_path_validation() {
        let sc = ScenarioConfig::default();
        let mut cells: Vec<(usize, usize)> = (0..10).map(|x| (x, 6)).chain((4..10).rev().map(|x| (x, 5))).collect();
        cells[3] = (3, 8);
        let err = Policy::FixedPath(cells).validate(&sc).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(Policy::FixedPath(vec![(0, 0); 15]).validate(&sc).is_err());
        assert!(Policy::Greedy(QTable::zeros(9, 10, 16)).validate(&sc).is_err());
    }
}
