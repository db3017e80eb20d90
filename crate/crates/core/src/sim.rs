//! Epoch-driven simulation.
//!
//! One epoch is one re-allocation period. Each epoch, in order: sessions that
//! ended leave, new boxes arrive, every active box re-requests (candidate
//! selection, then measurement), the policy solves the joint batch, the plan
//! is applied, and per-client outcomes are recorded. All randomness is keyed
//! off the configured seed by label, so a run is a pure function of
//! (scenario, config).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBoxClient, ClientId, GainEntry, OriginServer, ServerId};
use crate::rng::{derive_seed, stream};
use crate::scalar::{max_of, Scalar};
use crate::scheduler::{
    apply_plan, measure_baseline, measure_gains, release, solve_exact_with_cap, solve_greedy,
    AllocationLedger, AllocationPlan, Assignment, Capacities, PathOracle, RequestBatch, ServerPool,
    DEFAULT_EXACT_CAP,
};
use crate::topology::{
    candidate_subset, sample_client, NetModel, NetModelParams, Scenario, DEFAULT_K_CANDIDATES,
    DEFAULT_LOAD_THRESHOLD,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    BassExact,
    BassGreedy,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::BassExact, Policy::BassGreedy, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::BassExact => "bass_exact",
            Policy::BassGreedy => "bass_greedy",
            Policy::Random => "random",
        }
    }

    /// Whether the policy may leave a client on its direct path by choice.
    pub fn allows_unassignment(self) -> bool {
        !matches!(self, Policy::Random)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown policy `{s}`; expected one of bass_exact, bass_greedy, random"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub epochs: u64,
    /// Wall-clock length of one epoch, used only for labelling records.
    pub epoch_minutes: f64,
    /// Expected new boxes per epoch (Poisson).
    pub arrival_rate: f64,
    /// Mean session length in epochs (geometric, at least 1).
    pub session_epochs_mean: f64,
    pub policy: Policy,
    pub k_candidates: usize,
    pub load_threshold: f64,
    pub reserve_mbps: f64,
    pub seed: u64,
    /// Redraw path noise every epoch instead of keeping it fixed per path.
    pub remeasure_noise: bool,
    /// Flag clients whose achieved rate falls below this after allocation.
    pub realloc_throughput_floor_mbps: Option<f64>,
    pub exact_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            epochs: 48,
            epoch_minutes: 30.0,
            arrival_rate: 2.0,
            session_epochs_mean: 8.0,
            policy: Policy::BassGreedy,
            k_candidates: DEFAULT_K_CANDIDATES,
            load_threshold: DEFAULT_LOAD_THRESHOLD,
            reserve_mbps: 50.0,
            seed: 0,
            remeasure_noise: false,
            realloc_throughput_floor_mbps: None,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("sim config: {what}")));
        if !(self.epoch_minutes.is_finite() && self.epoch_minutes > 0.0) {
            return bad("epoch_minutes must be positive");
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate >= 0.0) {
            return bad("arrival_rate must be non-negative");
        }
        if !(self.session_epochs_mean.is_finite() && self.session_epochs_mean >= 1.0) {
            return bad("session_epochs_mean must be at least 1");
        }
        if self.k_candidates == 0 {
            return bad("k_candidates must be positive");
        }
        if !(0.0..=1.0).contains(&self.load_threshold) {
            return bad("load_threshold must be within [0, 1]");
        }
        if !(self.reserve_mbps.is_finite() && self.reserve_mbps >= 0.0) {
            return bad("reserve_mbps must be non-negative");
        }
        if let Some(floor) = self.realloc_throughput_floor_mbps {
            if !(floor.is_finite() && floor >= 0.0) {
                return bad("realloc_throughput_floor_mbps must be non-negative");
            }
        }
        Ok(())
    }
}

/// A box currently in session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveClient<S = f64> {
    pub client: BBoxClient<S>,
    pub arrived_epoch: u64,
    /// First epoch in which the box is gone.
    pub departs_epoch: u64,
}

/// What one client got in one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientOutcome<S = f64> {
    pub client_id: ClientId,
    pub server_id: Option<ServerId>,
    pub candidates: usize,
    pub b_baseline_mbps: S,
    pub b_achieved_mbps: S,
    pub gain_mbps: S,
    /// Best rate among the direct path and every candidate whose demand fit
    /// its server's capacity before this round's plan.
    pub b_best_mbps: S,
    /// γ = achieved / best; `None` without candidates or when best is zero.
    pub gamma: Option<S>,
    /// The chosen option is one of the best-rate options.
    pub best_hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord<S = f64> {
    pub epoch: u64,
    pub minute: f64,
    pub policy: Policy,
    pub plan: AllocationPlan<S>,
    pub clients: Vec<ClientOutcome<S>>,
    /// Load rate after the plan was applied.
    pub server_load_rates: Vec<(ServerId, f64)>,
    pub arrivals: usize,
    pub departures: usize,
    /// Clients below the configured throughput floor.
    pub low_throughput: Vec<ClientId>,
}

/// Hit rate: achieved / best.
pub fn hit_rate<S: Scalar>(b_achieved: S, b_best: S) -> Result<S> {
    if b_best <= S::zero() {
        return Err(Error::NoCandidate);
    }
    if b_achieved < S::zero() || b_achieved > b_best {
        return Err(Error::Validation(format!(
            "achieved {b_achieved:?} outside [0, {b_best:?}]"
        )));
    }
    Ok(b_achieved / b_best)
}

/// Baseline policy: each client, in id order, tries its candidates in a
/// uniformly shuffled order and takes the first that fits `remaining - reserve`,
/// regardless of gain.
pub fn random_policy<S: Scalar>(
    batch: &RequestBatch<S>,
    capacities: &Capacities<S>,
    reserve_mbps: &S,
    seed: u64,
) -> AllocationPlan<S> {
    let mut rng = stream(seed, &["random_policy"]);
    let mut loads: BTreeMap<&ServerId, S> = BTreeMap::new();
    let mut assignments = BTreeMap::new();
    for request in batch.requests() {
        let mut order: Vec<&GainEntry<S>> = request.candidates.iter().collect();
        order.sort_by(|a, b| a.server_id.cmp(&b.server_id));
        order.shuffle(&mut rng);
        for e in order {
            let Some(r) = capacities.get(&e.server_id) else {
                continue;
            };
            let load =
                loads.get(&e.server_id).cloned().unwrap_or_else(S::zero) + e.b_via_mbps.clone();
            if load <= r.clone() - reserve_mbps.clone() {
                loads.insert(&e.server_id, load);
                assignments.insert(request.client_id.clone(), Assignment::from_entry(e));
                break;
            }
        }
    }
    AllocationPlan::from_assignments(assignments)
}

pub struct SimState<S = f64, O = NetModel> {
    /// Next epoch to run.
    pub epoch: u64,
    pub pool: ServerPool<S>,
    pub ledger: AllocationLedger<S>,
    pub clients: BTreeMap<ClientId, ActiveClient<S>>,
    pub origins: Vec<OriginServer>,
    pub net_params: NetModelParams,
    pub oracle: O,
}

fn session_epochs(config: &SimConfig, client: &ClientId) -> u64 {
    let p = 1.0 / config.session_epochs_mean;
    let mut rng = stream(config.seed, &["session", client.as_str()]);
    let extra = Geometric::new(p).expect("validated mean").sample(&mut rng);
    extra.saturating_add(1)
}

impl<S: Scalar> SimState<S, NetModel> {
    pub fn new(scenario: &Scenario, config: &SimConfig) -> Result<Self> {
        let oracle = NetModel::new(
            scenario.net_params.clone(),
            scenario.seed,
            config.remeasure_noise,
        );
        SimState::with_oracle(scenario, config, oracle)
    }
}

impl<S: Scalar, O: PathOracle<S>> SimState<S, O> {
    /// Starts from the scenario: every scenario client is active at epoch 0.
    pub fn with_oracle(scenario: &Scenario, config: &SimConfig, oracle: O) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        let pool = ServerPool::new(
            scenario
                .agg_servers
                .iter()
                .map(|s| s.cast())
                .collect::<Result<Vec<_>>>()?,
        )?;
        let clients = scenario
            .clients
            .iter()
            .map(|c| {
                Ok((
                    c.id.clone(),
                    ActiveClient {
                        client: c.cast()?,
                        arrived_epoch: 0,
                        departs_epoch: session_epochs(config, &c.id),
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(SimState {
            epoch: 0,
            pool,
            ledger: AllocationLedger::new(),
            clients,
            origins: scenario.origins.clone(),
            net_params: scenario.net_params.clone(),
            oracle,
        })
    }

    /// Total minus remaining equals the demand held by assigned clients, per server.
    pub fn capacity_conserved(&self) -> bool {
        let loads = self.ledger.server_loads();
        self.pool.iter().all(|s| {
            let used = s.total_capacity_mbps.clone() - s.remaining_capacity_mbps.clone();
            let held = loads.get(&s.id).cloned().unwrap_or_else(S::zero);
            used.same_quantity(&held)
        })
    }
}

/// Advances the simulation by one epoch.
///
/// Panics if a produced plan is infeasible or capacity bookkeeping drifts;
/// both indicate a bug, not bad input.
pub fn run_epoch<S: Scalar, O: PathOracle<S>>(
    state: &mut SimState<S, O>,
    config: &SimConfig,
) -> Result<EpochRecord<S>> {
    let t = state.epoch;
    let t_label = t.to_string();

    // 1. Departures.
    let leaving: Vec<ClientId> = state
        .clients
        .iter()
        .filter(|(_, a)| a.departs_epoch <= t)
        .map(|(id, _)| id.clone())
        .collect();
    for id in &leaving {
        state.clients.remove(id);
        if state.ledger.get(id).is_some() {
            release(id, &mut state.pool, &mut state.ledger)?;
        }
    }

    // 2. Arrivals.
    let mut arrivals = 0;
    if config.arrival_rate > 0.0 {
        let mut rng = stream(config.seed, &["arrivals", &t_label]);
        let count = Poisson::new(config.arrival_rate)
            .expect("validated rate")
            .sample(&mut rng) as u64;
        for k in 0..count {
            let id: ClientId = format!("a{t:06}-{k:03}").into();
            let client = sample_client(id.clone(), &state.origins, &state.net_params, &mut rng);
            state.clients.insert(
                id.clone(),
                ActiveClient {
                    client: client.cast()?,
                    arrived_epoch: t,
                    departs_epoch: t.saturating_add(session_epochs(config, &id)),
                },
            );
            arrivals += 1;
        }
    }

    // 3. Re-allocation round: everyone gives back capacity and re-requests.
    let holding: Vec<ClientId> = state.ledger.clients().cloned().collect();
    for id in &holding {
        release(id, &mut state.pool, &mut state.ledger)?;
    }
    state.oracle.begin_epoch(t);
    let mut per_client = Vec::new();
    let mut baselines = BTreeMap::new();
    let mut candidate_counts = BTreeMap::new();
    for (id, active) in &state.clients {
        let client = &active.client;
        let picked = candidate_subset(
            client,
            state.pool.iter(),
            config.k_candidates,
            config.load_threshold,
        );
        candidate_counts.insert(id.clone(), picked.len());
        if picked.is_empty() {
            baselines.insert(
                id.clone(),
                measure_baseline(client, &state.origins, &state.oracle)?,
            );
            continue;
        }
        let servers = picked
            .iter()
            .map(|s| state.pool.get(s).expect("picked from pool"));
        let entries = measure_gains(client, servers, &state.origins, &state.oracle)?;
        baselines.insert(id.clone(), entries[0].b_baseline_mbps.clone());
        per_client.push(entries);
    }
    let batch = RequestBatch::new(t, per_client)?;

    // 4. Solve.
    let capacities = state.pool.capacities();
    let reserve = S::from_mbps(config.reserve_mbps)
        .ok_or_else(|| Error::Validation("reserve_mbps not representable".into()))?;
    let plan = match config.policy {
        Policy::BassGreedy => solve_greedy(&batch, &capacities, &reserve),
        Policy::BassExact => solve_exact_with_cap(&batch, &capacities, &reserve, config.exact_cap)?,
        Policy::Random => random_policy(
            &batch,
            &capacities,
            &reserve,
            derive_seed(config.seed, &["random", &t_label]),
        ),
    };
    if let Err(e) = plan.verify(&batch, &capacities, &reserve) {
        panic!(
            "epoch {t}: {} produced an infeasible plan: {e}",
            config.policy
        );
    }

    // 5. Apply.
    if let Err(e) = apply_plan(&plan, &mut state.pool, &mut state.ledger, &reserve) {
        panic!("epoch {t}: verified plan failed to apply: {e}");
    }
    assert!(
        state.capacity_conserved(),
        "epoch {t}: capacity bookkeeping drifted"
    );

    // 6. Record.
    let mut outcomes = Vec::with_capacity(state.clients.len());
    let mut low_throughput = Vec::new();
    for id in state.clients.keys() {
        let baseline = baselines[id].clone();
        let request = batch
            .requests()
            .binary_search_by(|r| r.client_id.cmp(id))
            .ok()
            .map(|i| &batch.requests()[i]);
        let best = request
            .into_iter()
            .flat_map(|r| r.candidates.iter())
            .filter(|e| {
                capacities
                    .get(&e.server_id)
                    .is_some_and(|r| e.b_via_mbps <= r.clone() - reserve.clone())
            })
            .fold(baseline.clone(), |b, e| max_of(b, e.b_via_mbps.clone()));
        let assignment = plan.assignments.get(id);
        let achieved = assignment.map_or_else(|| baseline.clone(), |a| a.demand_mbps.clone());
        let gamma = if candidate_counts[id] > 0 {
            match hit_rate(achieved.clone(), best.clone()) {
                Ok(g) => Some(g),
                Err(Error::NoCandidate) => None,
                Err(e) => panic!("epoch {t}: client {id}: {e}"),
            }
        } else {
            None
        };
        if let Some(floor) = config.realloc_throughput_floor_mbps {
            if achieved.as_f64() < floor {
                low_throughput.push(id.clone());
            }
        }
        outcomes.push(ClientOutcome {
            client_id: id.clone(),
            server_id: assignment.map(|a| a.server_id.clone()),
            candidates: candidate_counts[id],
            gain_mbps: achieved.clone() - baseline.clone(),
            best_hit: achieved == best,
            b_baseline_mbps: baseline,
            b_achieved_mbps: achieved,
            b_best_mbps: best,
            gamma,
        });
    }
    let server_load_rates = state
        .pool
        .iter()
        .map(|s| {
            (
                s.id.clone(),
                s.load_rate().map(|r| r.as_f64()).unwrap_or(f64::NAN),
            )
        })
        .collect();

    debug!(
        "epoch {t}: {} active, {} assigned, objective {:?}",
        state.clients.len(),
        plan.assignments.len(),
        plan.objective_mbps
    );
    state.epoch += 1;
    Ok(EpochRecord {
        epoch: t,
        minute: t as f64 * config.epoch_minutes,
        policy: config.policy,
        plan,
        clients: outcomes,
        server_load_rates,
        arrivals,
        departures: leaving.len(),
        low_throughput,
    })
}

/// Runs `config.epochs` epochs from the scenario's initial state.
pub fn run_simulation<S: Scalar>(
    scenario: &Scenario,
    config: &SimConfig,
) -> Result<Vec<EpochRecord<S>>> {
    let mut state = SimState::<S>::new(scenario, config)?;
    (0..config.epochs)
        .map(|_| run_epoch(&mut state, config))
        .collect()
}

/// Same, with a caller-supplied measurement source.
pub fn run_simulation_with<S: Scalar, O: PathOracle<S>>(
    scenario: &Scenario,
    config: &SimConfig,
    oracle: O,
) -> Result<Vec<EpochRecord<S>>> {
    let mut state = SimState::with_oracle(scenario, config, oracle)?;
    (0..config.epochs)
        .map(|_| run_epoch(&mut state, config))
        .collect()
}
