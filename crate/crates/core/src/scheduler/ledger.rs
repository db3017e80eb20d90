//! Capacity bookkeeping: applying plans to servers and returning capacity
//! when clients leave.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_loads, AllocationPlan, Assignment, Capacities};
use crate::error::{Error, Result};
use crate::model::{AggregationServer, ClientId, ServerId};
use crate::scalar::{min_of, Scalar};

/// The set of aggregation servers, keyed by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerPool<S = f64> {
    servers: BTreeMap<ServerId, AggregationServer<S>>,
}

impl<S: Scalar> ServerPool<S> {
    pub fn new(servers: impl IntoIterator<Item = AggregationServer<S>>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in servers {
            s.validate()?;
            if let Some(dup) = map.insert(s.id.clone(), s) {
                return Err(Error::DuplicateId {
                    entity: "agg_server",
                    id: dup.id.to_string(),
                });
            }
        }
        Ok(ServerPool { servers: map })
    }

    pub fn get(&self, id: &ServerId) -> Option<&AggregationServer<S>> {
        self.servers.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AggregationServer<S>> {
        self.servers.values()
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    /// Current remaining capacity of every server.
    pub fn capacities(&self) -> Capacities<S> {
        self.servers
            .iter()
            .map(|(id, s)| (id.clone(), s.remaining_capacity_mbps.clone()))
            .collect()
    }
}

/// Assignments currently holding capacity, by client.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AllocationLedger<S = f64> {
    active: BTreeMap<ClientId, Assignment<S>>,
}

impl<S: Scalar> AllocationLedger<S> {
    pub fn new() -> Self {
        AllocationLedger {
            active: BTreeMap::new(),
        }
    }

    pub fn get(&self, client: &ClientId) -> Option<&Assignment<S>> {
        self.active.get(client)
    }

    pub fn clients(&self) -> impl Iterator<Item = &ClientId> {
        self.active.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClientId, &Assignment<S>)> {
        self.active.iter()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Held demand per server, summed in client id order.
    pub fn server_loads(&self) -> BTreeMap<ServerId, S> {
        super::server_loads(&self.active)
    }
}

/// Deducts each assignment's demand from its server's remaining capacity.
///
/// All-or-nothing: a plan that names an unknown server, re-assigns a client
/// that already holds capacity, or pushes any server past `remaining - reserve`
/// is rejected without touching the pool.
pub fn apply_plan<S: Scalar>(
    plan: &AllocationPlan<S>,
    pool: &mut ServerPool<S>,
    ledger: &mut AllocationLedger<S>,
    reserve_mbps: &S,
) -> Result<()> {
    if let Some(client) = plan
        .assignments
        .keys()
        .find(|c| ledger.active.contains_key(*c))
    {
        return Err(Error::Conflict(format!(
            "client `{client}` already holds an allocation"
        )));
    }
    let loads = plan.server_loads();
    check_loads(&loads, &pool.capacities(), reserve_mbps)?;
    for (server, load) in loads {
        let s = pool.servers.get_mut(&server).expect("checked above");
        s.remaining_capacity_mbps = s.remaining_capacity_mbps.clone() - load;
    }
    for (client, a) in &plan.assignments {
        ledger.active.insert(client.clone(), a.clone());
    }
    Ok(())
}

/// Returns a client's held demand to its server, never beyond its total.
pub fn release<S: Scalar>(
    client: &ClientId,
    pool: &mut ServerPool<S>,
    ledger: &mut AllocationLedger<S>,
) -> Result<Assignment<S>> {
    let server_id = &ledger
        .active
        .get(client)
        .ok_or_else(|| Error::NotAllocated(client.to_string()))?
        .server_id;
    let s = pool
        .servers
        .get_mut(server_id)
        .ok_or_else(|| Error::Conflict(format!("unknown server `{server_id}`")))?;
    let a = ledger.active.remove(client).expect("present");
    s.remaining_capacity_mbps = min_of(
        s.remaining_capacity_mbps.clone() + a.demand_mbps.clone(),
        s.total_capacity_mbps.clone(),
    );
    Ok(a)
}
