use std::collections::BTreeMap;

use super::{AllocationPlan, Assignment, Capacities, RequestBatch};
use crate::model::{ClientId, GainEntry, ServerId};
use crate::scalar::Scalar;

/// Global descending-gain greedy matching.
///
/// Walks every (client, server) candidate by gain descending, ties by client
/// id then server id, and takes a pair when the client is still unassigned,
/// the gain is positive and the demand fits `remaining - reserve`.
pub fn solve_greedy<S: Scalar>(
    batch: &RequestBatch<S>,
    capacities: &Capacities<S>,
    reserve_mbps: &S,
) -> AllocationPlan<S> {
    let mut pairs: Vec<&GainEntry<S>> = batch
        .requests()
        .iter()
        .flat_map(|r| r.candidates.iter())
        .filter(|e| e.gain_mbps > S::zero())
        .collect();
    pairs.sort_by(|a, b| {
        b.gain_mbps
            .partial_cmp(&a.gain_mbps)
            .expect("gains are finite")
            .then_with(|| a.client_id.cmp(&b.client_id))
            .then_with(|| a.server_id.cmp(&b.server_id))
    });

    let mut assignments: BTreeMap<ClientId, Assignment<S>> = BTreeMap::new();
    let mut per_server: BTreeMap<&ServerId, BTreeMap<&ClientId, &S>> = BTreeMap::new();
    for e in pairs {
        if assignments.contains_key(&e.client_id) {
            continue;
        }
        let Some(remaining) = capacities.get(&e.server_id) else {
            continue;
        };
        let limit = remaining.clone() - reserve_mbps.clone();
        let on_server = per_server.entry(&e.server_id).or_default();
        // Sum in client id order so the check agrees with plan verification.
        let mut load = S::zero();
        let mut placed = false;
        for (client, demand) in on_server.iter() {
            if !placed && e.client_id < **client {
                load = load + e.b_via_mbps.clone();
                placed = true;
            }
            load = load + (*demand).clone();
        }
        if !placed {
            load = load + e.b_via_mbps.clone();
        }
        if load > limit {
            continue;
        }
        on_server.insert(&e.client_id, &e.b_via_mbps);
        assignments.insert(e.client_id.clone(), Assignment::from_entry(e));
    }
    AllocationPlan::from_assignments(assignments)
}
