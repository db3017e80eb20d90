use std::collections::BTreeMap;

use super::{AllocationPlan, Assignment, Capacities, RequestBatch};
use crate::error::{Error, Result};
use crate::model::GainEntry;
use crate::scalar::Scalar;

/// Largest batch the exhaustive solver accepts by default.
pub const DEFAULT_EXACT_CAP: usize = 12;

/// Optimal plan by exhaustive search over every client's options
/// (unassigned, or one of its candidates), with the default size cap.
///
/// Among plans with equal objective the lexicographically smallest
/// assignment vector wins, comparing clients in id order and treating
/// "unassigned" as smaller than any server id.
pub fn solve_exact<S: Scalar>(
    batch: &RequestBatch<S>,
    capacities: &Capacities<S>,
    reserve_mbps: &S,
) -> Result<AllocationPlan<S>> {
    solve_exact_with_cap(batch, capacities, reserve_mbps, DEFAULT_EXACT_CAP)
}

pub fn solve_exact_with_cap<S: Scalar>(
    batch: &RequestBatch<S>,
    capacities: &Capacities<S>,
    reserve_mbps: &S,
    cap: usize,
) -> Result<AllocationPlan<S>> {
    if batch.n() > cap {
        return Err(Error::ExactCapExceeded {
            clients: batch.n(),
            cap,
        });
    }

    let servers: Vec<_> = capacities.keys().collect();
    let limits: Vec<S> = capacities
        .values()
        .map(|r| r.clone() - reserve_mbps.clone())
        .collect();

    // Options per client in lexicographic order. Non-positive gains are never
    // part of a lexicographically smallest optimum: dropping them keeps the
    // objective and frees capacity.
    let options: Vec<Vec<(usize, &GainEntry<S>)>> = batch
        .requests()
        .iter()
        .map(|r| {
            let mut opts: Vec<_> = r
                .candidates
                .iter()
                .filter(|e| e.gain_mbps > S::zero())
                .filter_map(|e| {
                    servers
                        .binary_search(&&e.server_id)
                        .ok()
                        .map(|idx| (idx, e))
                })
                .collect();
            opts.sort_by(|a, b| a.1.server_id.cmp(&b.1.server_id));
            opts
        })
        .collect();

    // Optimistic completion value from client i onwards.
    let mut bound = vec![S::zero(); options.len() + 1];
    for i in (0..options.len()).rev() {
        let best_gain = options[i]
            .iter()
            .map(|(_, e)| e.gain_mbps.clone())
            .fold(S::zero(), |a, g| if g > a { g } else { a });
        bound[i] = bound[i + 1].clone() + best_gain;
    }

    let mut search = Search {
        options: &options,
        limits: &limits,
        bound: &bound,
        loads: vec![S::zero(); servers.len()],
        choice: vec![None; options.len()],
        best: S::zero(),
        best_choice: vec![None; options.len()],
    };
    search.visit(0, S::zero());

    let assignments: BTreeMap<_, _> = batch
        .requests()
        .iter()
        .zip(options.iter().zip(&search.best_choice))
        .filter_map(|(r, (opts, c))| {
            c.map(|k| (r.client_id.clone(), Assignment::from_entry(opts[k].1)))
        })
        .collect();
    Ok(AllocationPlan::from_assignments(assignments))
}

struct Search<'a, S> {
    options: &'a [Vec<(usize, &'a GainEntry<S>)>],
    limits: &'a [S],
    bound: &'a [S],
    loads: Vec<S>,
    choice: Vec<Option<usize>>,
    best: S,
    best_choice: Vec<Option<usize>>,
}

impl<S: Scalar> Search<'_, S> {
    fn visit(&mut self, i: usize, objective: S) {
        if i == self.options.len() {
            if objective > self.best {
                self.best = objective;
                self.best_choice.clone_from(&self.choice);
            }
            return;
        }
        if objective.clone() + self.bound[i].clone() <= self.best {
            return;
        }

        // Unassigned first: it is the lexicographically smallest option.
        self.visit(i + 1, objective.clone());

        for k in 0..self.options[i].len() {
            let (server, entry) = self.options[i][k];
            let load = self.loads[server].clone() + entry.b_via_mbps.clone();
            if load > self.limits[server] {
                continue;
            }
            let previous = std::mem::replace(&mut self.loads[server], load);
            self.choice[i] = Some(k);
            self.visit(i + 1, objective.clone() + entry.gain_mbps.clone());
            self.choice[i] = None;
            self.loads[server] = previous;
        }
    }
}
