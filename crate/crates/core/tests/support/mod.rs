//! Test-only helpers: an independent brute-force optimum and seeded batch
//! generators.
#![allow(dead_code)]

use std::collections::BTreeMap;

use bass_core::model::{ClientId, GainEntry, ServerId};
use bass_core::scheduler::{Capacities, RequestBatch};
use bass_core::{BigRational, Scalar};
use num_bigint::BigInt;
use rand::Rng;

/// Enumerates every assignment vector with a mixed-radix counter (digit 0 is
/// "unassigned", digit k is the k-th candidate), keeps the feasible ones and
/// returns the best total gain. Shares nothing with the crate's solvers.
pub fn brute_force_optimum<S: Scalar>(
    batch: &RequestBatch<S>,
    capacities: &Capacities<S>,
    reserve: &S,
) -> S {
    let lists: Vec<&Vec<GainEntry<S>>> = batch.requests().iter().map(|r| &r.candidates).collect();
    let radix: Vec<usize> = lists.iter().map(|l| l.len() + 1).collect();
    let mut digits = vec![0usize; lists.len()];
    let mut best = S::zero();
    loop {
        let mut used: BTreeMap<&ServerId, S> = BTreeMap::new();
        let mut total = S::zero();
        for (list, &d) in lists.iter().zip(&digits) {
            if d > 0 {
                let e = &list[d - 1];
                let u = used.entry(&e.server_id).or_insert_with(S::zero);
                *u = u.clone() + e.b_via_mbps.clone();
                total = total + e.gain_mbps.clone();
            }
        }
        let feasible = used.iter().all(|(s, load)| match capacities.get(*s) {
            Some(r) => *load <= r.clone() - reserve.clone(),
            None => false,
        });
        if feasible && total > best {
            best = total;
        }
        // Increment the counter.
        let mut i = 0;
        loop {
            if i == digits.len() {
                return best;
            }
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

pub fn half(n: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(2))
}

#[derive(Clone, Debug)]
pub struct Instance<S> {
    pub batch: RequestBatch<S>,
    pub capacities: Capacities<S>,
    pub reserve: S,
}

/// A random instance with `1..=max_n` clients over `1..=max_m` servers,
/// bandwidths on a half-Mbit/s grid. `to_scalar` maps half-units to `S`.
pub fn random_instance<S: Scalar, R: Rng>(
    rng: &mut R,
    max_n: usize,
    max_m: usize,
    to_scalar: impl Fn(i64) -> S,
) -> Instance<S> {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let servers: Vec<ServerId> = (0..m).map(|j| format!("s{j}").into()).collect();
    let mut per_client = Vec::new();
    for i in 0..n {
        let client: ClientId = format!("c{i:02}").into();
        let k = rng.random_range(1..=m);
        let mut picks: Vec<usize> = (0..m).collect();
        for j in 0..k {
            let swap = rng.random_range(j..m);
            picks.swap(j, swap);
        }
        let baseline = rng.random_range(0..=12);
        let list = picks[..k]
            .iter()
            .map(|&j| {
                GainEntry::new(
                    client.clone(),
                    servers[j].clone(),
                    to_scalar(rng.random_range(0..=24)),
                    to_scalar(rng.random_range(0..=24)),
                    to_scalar(baseline),
                )
                .unwrap()
            })
            .collect();
        per_client.push(list);
    }
    let capacities = servers
        .iter()
        .map(|s| (s.clone(), to_scalar(rng.random_range(0..=40))))
        .collect();
    Instance {
        batch: RequestBatch::new(0, per_client).unwrap(),
        capacities,
        reserve: to_scalar(rng.random_range(0..=6)),
    }
}
