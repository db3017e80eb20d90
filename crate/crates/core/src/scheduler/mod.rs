//! Matching B-boxes to aggregation servers.
//!
//! A scheduling round collects every requesting client's candidate list
//! ([`RequestBatch`]) and picks at most one server per client so that the
//! summed gain is maximal while each server's assigned demand stays within
//! `remaining - reserve`. A client may always stay on its direct path, which
//! contributes zero gain.

mod exact;
mod greedy;
mod ledger;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    aggregated_path_bandwidth, baseline_bandwidth, AggregationServer, BBoxClient, ClientId,
    EdgeLink, GainEntry, OriginServer, ServerId,
};
use crate::scalar::{min_of, sum_of, Scalar};

pub use exact::{solve_exact, solve_exact_with_cap, DEFAULT_EXACT_CAP};
pub use greedy::solve_greedy;
pub use ledger::{apply_plan, release, AllocationLedger, ServerPool};

/// Remaining capacity per server.
pub type Capacities<S> = BTreeMap<ServerId, S>;

/// Source of path bandwidth measurements.
pub trait PathOracle<S> {
    /// Called once per scheduling round before any measurement.
    fn begin_epoch(&mut self, _epoch: u64) {}

    fn link_to_server(
        &self,
        client: &BBoxClient<S>,
        link: &EdgeLink<S>,
        server: &AggregationServer<S>,
    ) -> S;

    fn link_to_origin(
        &self,
        client: &BBoxClient<S>,
        link: &EdgeLink<S>,
        origin: &OriginServer,
    ) -> S;

    fn server_to_origin(&self, server: &AggregationServer<S>, origin: &OriginServer) -> S;
}

fn find_origin<'a, S>(
    client: &BBoxClient<S>,
    origins: &'a [OriginServer],
) -> Result<&'a OriginServer> {
    origins
        .iter()
        .find(|o| o.id == client.origin_id)
        .ok_or_else(|| Error::UnknownReference {
            entity: "client",
            id: client.id.to_string(),
            target: "origin",
            reference: client.origin_id.to_string(),
        })
}

/// Baseline: the best single link, each capped by its own path to the origin.
pub fn measure_baseline<S: Scalar, O: PathOracle<S> + ?Sized>(
    client: &BBoxClient<S>,
    origins: &[OriginServer],
    oracle: &O,
) -> Result<S> {
    let origin = find_origin(client, origins)?;
    let direct: Vec<S> = client
        .links
        .iter()
        .map(|l| {
            min_of(
                l.uplink_mbps.clone(),
                oracle.link_to_origin(client, l, origin),
            )
        })
        .collect();
    baseline_bandwidth(&direct)
}

/// Measures every candidate and returns the entries sorted by gain
/// descending, ties by server id.
pub fn measure_gains<'a, S: Scalar, O: PathOracle<S> + ?Sized>(
    client: &BBoxClient<S>,
    candidates: impl IntoIterator<Item = &'a AggregationServer<S>>,
    origins: &[OriginServer],
    oracle: &O,
) -> Result<Vec<GainEntry<S>>> {
    let origin = find_origin(client, origins)?;
    let baseline = measure_baseline(client, origins, oracle)?;
    let mut entries = Vec::new();
    for server in candidates {
        let subflows: Vec<S> = client
            .links
            .iter()
            .map(|l| {
                min_of(
                    l.uplink_mbps.clone(),
                    oracle.link_to_server(client, l, server),
                )
            })
            .collect();
        let b_client_server = sum_of(&subflows);
        let b_server_origin = oracle.server_to_origin(server, origin);
        let entry = GainEntry::new(
            client.id.clone(),
            server.id.clone(),
            b_client_server,
            b_server_origin.clone(),
            baseline.clone(),
        )?;
        debug_assert!(entry.b_via_mbps == aggregated_path_bandwidth(&subflows, b_server_origin)?);
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(Error::Empty("measure_gains candidates"));
    }
    sort_by_gain(&mut entries);
    Ok(entries)
}

fn sort_by_gain<S: Scalar>(entries: &mut [GainEntry<S>]) {
    entries.sort_by(|a, b| {
        b.gain_mbps
            .partial_cmp(&a.gain_mbps)
            .expect("gains are finite")
            .then_with(|| a.server_id.cmp(&b.server_id))
    });
}

/// One client's candidates, best gain first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientRequest<S = f64> {
    pub client_id: ClientId,
    pub candidates: Vec<GainEntry<S>>,
}

/// All requests of scheduling round `epoch`, ordered by client id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestBatch<S = f64> {
    pub epoch: u64,
    requests: Vec<ClientRequest<S>>,
}

impl<S: Scalar> RequestBatch<S> {
    /// Groups per-client candidate lists. Empty lists are dropped; each list
    /// must belong to a single client and name each server at most once.
    pub fn new(epoch: u64, per_client: Vec<Vec<GainEntry<S>>>) -> Result<Self> {
        let mut requests = Vec::with_capacity(per_client.len());
        let mut seen = BTreeSet::new();
        for mut list in per_client {
            let Some(first) = list.first() else { continue };
            let client_id = first.client_id.clone();
            if !seen.insert(client_id.clone()) {
                return Err(Error::DuplicateId {
                    entity: "client",
                    id: client_id.to_string(),
                });
            }
            let mut servers = BTreeSet::new();
            for e in &list {
                if e.client_id != client_id {
                    return Err(Error::Validation(format!(
                        "candidate list for `{client_id}` contains an entry for `{}`",
                        e.client_id
                    )));
                }
                if !servers.insert(&e.server_id) {
                    return Err(Error::DuplicateId {
                        entity: "candidate server",
                        id: e.server_id.to_string(),
                    });
                }
                if !e.is_consistent() || !e.gain_mbps.is_finite_value() {
                    return Err(Error::Validation(format!(
                        "inconsistent gain entry for ({client_id}, {})",
                        e.server_id
                    )));
                }
            }
            sort_by_gain(&mut list);
            requests.push(ClientRequest {
                client_id,
                candidates: list,
            });
        }
        requests.sort_by(|a, b| a.client_id.cmp(&b.client_id));
        Ok(RequestBatch { epoch, requests })
    }

    pub fn requests(&self) -> &[ClientRequest<S>] {
        &self.requests
    }

    /// Number of requesting clients.
    pub fn n(&self) -> usize {
        self.requests.len()
    }

    /// Number of distinct servers referenced.
    pub fn m(&self) -> usize {
        self.requests
            .iter()
            .flat_map(|r| r.candidates.iter().map(|e| &e.server_id))
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn entry(&self, client: &ClientId, server: &ServerId) -> Option<&GainEntry<S>> {
        let idx = self
            .requests
            .binary_search_by(|r| r.client_id.cmp(client))
            .ok()?;
        self.requests[idx]
            .candidates
            .iter()
            .find(|e| &e.server_id == server)
    }
}

/// A chosen (client, server) pair and what it costs and yields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment<S = f64> {
    pub server_id: ServerId,
    /// Via bandwidth, the capacity consumed on the server.
    pub demand_mbps: S,
    pub gain_mbps: S,
}

impl<S: Scalar> Assignment<S> {
    pub(crate) fn from_entry(e: &GainEntry<S>) -> Self {
        Assignment {
            server_id: e.server_id.clone(),
            demand_mbps: e.b_via_mbps.clone(),
            gain_mbps: e.gain_mbps.clone(),
        }
    }
}

/// A = {client → server}; absent clients stay on their direct path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan<S = f64> {
    pub assignments: BTreeMap<ClientId, Assignment<S>>,
    /// Summed gain of the assignments, in client id order.
    pub objective_mbps: S,
}

impl<S: Scalar> Default for AllocationPlan<S> {
    fn default() -> Self {
        AllocationPlan {
            assignments: BTreeMap::new(),
            objective_mbps: S::zero(),
        }
    }
}

impl<S: Scalar> AllocationPlan<S> {
    pub(crate) fn from_assignments(assignments: BTreeMap<ClientId, Assignment<S>>) -> Self {
        let objective_mbps = sum_of(assignments.values().map(|a| &a.gain_mbps));
        AllocationPlan {
            assignments,
            objective_mbps,
        }
    }

    pub fn server_of(&self, client: &ClientId) -> Option<&ServerId> {
        self.assignments.get(client).map(|a| &a.server_id)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Assigned demand per server, summed in client id order.
    pub fn server_loads(&self) -> BTreeMap<ServerId, S> {
        server_loads(&self.assignments)
    }

    /// Checks the plan against the batch it was solved from: every pair is a
    /// batch candidate with matching demand and gain, the objective is the
    /// recomputed sum, and no server exceeds `remaining - reserve`.
    pub fn verify(
        &self,
        batch: &RequestBatch<S>,
        capacities: &Capacities<S>,
        reserve: &S,
    ) -> Result<()> {
        for (client, a) in &self.assignments {
            let e = batch.entry(client, &a.server_id).ok_or_else(|| {
                Error::Conflict(format!(
                    "({client}, {}) is not a candidate pair",
                    a.server_id
                ))
            })?;
            if e.b_via_mbps != a.demand_mbps || e.gain_mbps != a.gain_mbps {
                return Err(Error::Conflict(format!(
                    "({client}, {}) disagrees with its gain entry",
                    a.server_id
                )));
            }
        }
        let objective = sum_of(self.assignments.values().map(|a| &a.gain_mbps));
        if objective != self.objective_mbps {
            return Err(Error::Conflict(format!(
                "objective {:?} does not match recomputed {:?}",
                self.objective_mbps, objective
            )));
        }
        check_loads(&self.server_loads(), capacities, reserve)
    }
}

pub(crate) fn server_loads<S: Scalar>(
    assignments: &BTreeMap<ClientId, Assignment<S>>,
) -> BTreeMap<ServerId, S> {
    let mut loads: BTreeMap<ServerId, S> = BTreeMap::new();
    for a in assignments.values() {
        let slot = loads.entry(a.server_id.clone()).or_insert_with(S::zero);
        *slot = slot.clone() + a.demand_mbps.clone();
    }
    loads
}

/// summed demand ≤ remaining − reserve for every loaded server.
pub(crate) fn check_loads<S: Scalar>(
    loads: &BTreeMap<ServerId, S>,
    capacities: &Capacities<S>,
    reserve: &S,
) -> Result<()> {
    for (server, load) in loads {
        let r = capacities
            .get(server)
            .ok_or_else(|| Error::Conflict(format!("unknown server `{server}`")))?;
        if *load > r.clone() - reserve.clone() {
            return Err(Error::Conflict(format!(
                "server `{server}` load {load:?} exceeds remaining {r:?} minus reserve {reserve:?}"
            )));
        }
    }
    Ok(())
}
