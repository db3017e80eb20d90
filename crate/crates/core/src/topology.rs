//! Scenario construction: placement, the synthetic path-bandwidth model,
//! candidate server selection and scenario files.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AggregationServer, BBoxClient, ClientId, EdgeLink, GeoPoint, LinkKind, OriginId, OriginServer,
    ServerId,
};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;
use crate::scheduler::PathOracle;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Target share of Wi-Fi uplinks below 1 Mbit/s in the default workload.
pub const WIFI_SUB_MBPS_TARGET: f64 = 0.6;

/// Standard normal quantile at [`WIFI_SUB_MBPS_TARGET`].
const PROBIT_WIFI_TARGET: f64 = 0.253_347_103_135_799_7;

pub const DEFAULT_K_CANDIDATES: usize = 3;
pub const DEFAULT_LOAD_THRESHOLD: f64 = 0.1;

/// Parameters of the synthetic network model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetModelParams {
    /// Path bandwidth at zero distance before noise.
    pub base_path_mbps: f64,
    /// Decay factor: bandwidth is divided by `1 + km * decay / 1000`.
    pub distance_decay_per_1000km: f64,
    /// Standard deviation of the log-space multiplicative noise.
    pub noise_sigma: f64,
    pub wifi_lognormal_mu: f64,
    pub wifi_lognormal_sigma: f64,
    /// Cellular uplinks are uniform in `[low, high]`.
    pub cellular_uplink_mbps_range: [f64; 2],
    pub wifi_links_per_client: usize,
    pub cellular_links_per_client: usize,
    /// Total capacity of generated aggregation servers.
    pub server_capacity_mbps: f64,
}

impl Default for NetModelParams {
    fn default() -> Self {
        let wifi_sigma = 1.2;
        NetModelParams {
            base_path_mbps: 40.0,
            distance_decay_per_1000km: 1.0,
            noise_sigma: 0.3,
            // P(X < 1) = Phi(-mu / sigma) = WIFI_SUB_MBPS_TARGET
            wifi_lognormal_mu: -wifi_sigma * PROBIT_WIFI_TARGET,
            wifi_lognormal_sigma: wifi_sigma,
            cellular_uplink_mbps_range: [1.0, 8.0],
            wifi_links_per_client: 2,
            cellular_links_per_client: 1,
            server_capacity_mbps: 80.0,
        }
    }
}

impl NetModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::invalid("net_params", "", field, reason))
        };
        if !(self.base_path_mbps.is_finite() && self.base_path_mbps > 0.0) {
            return bad("base_path_mbps", "must be positive and finite");
        }
        if !(self.distance_decay_per_1000km.is_finite() && self.distance_decay_per_1000km >= 0.0) {
            return bad(
                "distance_decay_per_1000km",
                "must be non-negative and finite",
            );
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma", "must be non-negative and finite");
        }
        if !self.wifi_lognormal_mu.is_finite() {
            return bad("wifi_lognormal_mu", "must be finite");
        }
        if !(self.wifi_lognormal_sigma.is_finite() && self.wifi_lognormal_sigma >= 0.0) {
            return bad("wifi_lognormal_sigma", "must be non-negative and finite");
        }
        let [low, high] = self.cellular_uplink_mbps_range;
        if !(low.is_finite() && high.is_finite() && low >= 0.0 && low <= high) {
            return bad(
                "cellular_uplink_mbps_range",
                "must satisfy 0 <= low <= high, both finite",
            );
        }
        if self.wifi_links_per_client + self.cellular_links_per_client == 0 {
            return bad("wifi_links_per_client", "clients need at least one link");
        }
        if !(self.server_capacity_mbps.is_finite() && self.server_capacity_mbps > 0.0) {
            return bad("server_capacity_mbps", "must be positive and finite");
        }
        Ok(())
    }
}

/// Great-circle distance (haversine).
pub fn geo_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Directed path bandwidth between two points.
///
/// `base / (1 + km * decay / 1000)` scaled by a lognormal factor with median 1
/// that depends only on `(seed, tag)`.
pub fn path_bandwidth(
    src: GeoPoint,
    dst: GeoPoint,
    params: &NetModelParams,
    seed: u64,
    tag: (&str, &str),
) -> f64 {
    let km = geo_distance_km(src, dst);
    let clean = params.base_path_mbps / (1.0 + km * params.distance_decay_per_1000km / 1000.0);
    if params.noise_sigma == 0.0 {
        return clean;
    }
    let z: f64 = stream(seed, &["path", tag.0, tag.1]).sample(StandardNormal);
    clean * (params.noise_sigma * z).exp()
}

/// All entities of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub clients: Vec<BBoxClient>,
    pub agg_servers: Vec<AggregationServer>,
    pub origins: Vec<OriginServer>,
    pub net_params: NetModelParams,
    pub seed: u64,
}

fn check_unique<'a>(entity: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                entity,
                id: id.to_owned(),
            });
        }
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.origins.is_empty() {
            return Err(Error::Validation(
                "scenario needs at least one origin".into(),
            ));
        }
        if self.agg_servers.is_empty() {
            return Err(Error::Validation(
                "scenario needs at least one aggregation server".into(),
            ));
        }
        self.net_params.validate()?;
        check_unique("client", self.clients.iter().map(|c| c.id.as_str()))?;
        check_unique("agg_server", self.agg_servers.iter().map(|s| s.id.as_str()))?;
        check_unique("origin", self.origins.iter().map(|o| o.id.as_str()))?;
        for o in &self.origins {
            o.location.validate("origin", o.id.as_str())?;
        }
        for s in &self.agg_servers {
            s.validate()?;
        }
        let origin_ids: BTreeSet<_> = self.origins.iter().map(|o| &o.id).collect();
        for c in &self.clients {
            c.validate()?;
            check_unique("link", c.links.iter().map(|l| l.id.as_str()))?;
            if !origin_ids.contains(&c.origin_id) {
                return Err(Error::UnknownReference {
                    entity: "client",
                    id: c.id.to_string(),
                    target: "origin",
                    reference: c.origin_id.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn origin(&self, id: &OriginId) -> Option<&OriginServer> {
        self.origins.iter().find(|o| &o.id == id)
    }
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(scenario).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::Json {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|source| Error::Json {
        path: "<scenario>".into(),
        source,
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn random_point<R: Rng>(rng: &mut R) -> GeoPoint {
    // Area-uniform over the inhabited latitude band.
    let (lo, hi) = ((-60f64).to_radians().sin(), 70f64.to_radians().sin());
    let z: f64 = rng.random_range(lo..hi);
    let lon: f64 = rng.random_range(-180.0..180.0);
    GeoPoint {
        latitude: z.asin().to_degrees(),
        longitude: lon,
    }
}

/// One Wi-Fi uplink draw from the configured lognormal.
pub fn sample_wifi_uplink<R: Rng>(params: &NetModelParams, rng: &mut R) -> f64 {
    LogNormal::new(params.wifi_lognormal_mu, params.wifi_lognormal_sigma)
        .expect("validated lognormal parameters")
        .sample(rng)
}

pub fn sample_cellular_uplink<R: Rng>(params: &NetModelParams, rng: &mut R) -> f64 {
    let [low, high] = params.cellular_uplink_mbps_range;
    if low == high {
        low
    } else {
        rng.random_range(low..=high)
    }
}

/// Draws a client at a random location with a random origin.
pub fn sample_client<R: Rng>(
    id: ClientId,
    origins: &[OriginServer],
    params: &NetModelParams,
    rng: &mut R,
) -> BBoxClient {
    let location = random_point(rng);
    let mut links =
        Vec::with_capacity(params.wifi_links_per_client + params.cellular_links_per_client);
    for i in 0..params.wifi_links_per_client {
        links.push(EdgeLink {
            id: format!("w{i}").into(),
            kind: LinkKind::Wifi,
            uplink_mbps: sample_wifi_uplink(params, rng),
        });
    }
    for i in 0..params.cellular_links_per_client {
        links.push(EdgeLink {
            id: format!("g{i}").into(),
            kind: LinkKind::Cellular,
            uplink_mbps: sample_cellular_uplink(params, rng),
        });
    }
    let origin = &origins[rng.random_range(0..origins.len())];
    BBoxClient {
        id,
        location,
        links,
        origin_id: origin.id.clone(),
    }
}

/// Builds a scenario with `n_clients` boxes, `m_servers` idle aggregation
/// servers and `k_origins` origins. A pure function of its arguments.
pub fn generate_scenario(
    n_clients: usize,
    m_servers: usize,
    k_origins: usize,
    params: &NetModelParams,
    seed: u64,
) -> Result<Scenario> {
    for (name, v) in [
        ("n_clients", n_clients),
        ("m_servers", m_servers),
        ("k_origins", k_origins),
    ] {
        if v == 0 {
            return Err(Error::Validation(format!("{name} must be at least 1")));
        }
    }
    params.validate()?;

    let origins: Vec<_> = (0..k_origins)
        .map(|i| {
            let mut rng = stream(seed, &["origin", &i.to_string()]);
            OriginServer {
                id: format!("o{i:03}").into(),
                location: random_point(&mut rng),
            }
        })
        .collect();
    let agg_servers = (0..m_servers)
        .map(|j| {
            let mut rng = stream(seed, &["server", &j.to_string()]);
            AggregationServer::idle(
                format!("s{j:03}"),
                random_point(&mut rng),
                params.server_capacity_mbps,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let clients = (0..n_clients)
        .map(|i| {
            let mut rng = stream(seed, &["client", &i.to_string()]);
            sample_client(format!("c{i:04}").into(), &origins, params, &mut rng)
        })
        .collect();

    let scenario = Scenario {
        clients,
        agg_servers,
        origins,
        net_params: params.clone(),
        seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Nearest `k` servers whose load rate is at least `load_threshold`,
/// ascending by distance, ties by server id. May return fewer than `k`.
pub fn candidate_subset<'a, S: Scalar, C>(
    client: &BBoxClient<C>,
    servers: impl IntoIterator<Item = &'a AggregationServer<S>>,
    k: usize,
    load_threshold: f64,
) -> Vec<ServerId> {
    let threshold = S::from_mbps(load_threshold);
    let mut eligible: Vec<(f64, &ServerId)> = servers
        .into_iter()
        .filter(|s| match (s.load_rate(), &threshold) {
            (Ok(r), Some(t)) => r >= *t,
            _ => false,
        })
        .map(|s| (geo_distance_km(client.location, s.location), &s.id))
        .collect();
    eligible.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    eligible
        .into_iter()
        .take(k)
        .map(|(_, id)| id.clone())
        .collect()
}

/// [`PathOracle`] backed by [`path_bandwidth`].
///
/// With `remeasure` set, [`PathOracle::begin_epoch`] rekeys the noise so every
/// epoch sees a fresh draw; otherwise measurements are fixed per path.
#[derive(Clone, Debug)]
pub struct NetModel {
    pub params: NetModelParams,
    pub seed: u64,
    pub remeasure: bool,
    epoch_seed: u64,
}

impl NetModel {
    pub fn new(params: NetModelParams, seed: u64, remeasure: bool) -> Self {
        NetModel {
            params,
            seed,
            remeasure,
            epoch_seed: seed,
        }
    }

    fn measure<S: Scalar>(&self, src: GeoPoint, dst: GeoPoint, a: &str, b: &str) -> S {
        let v = path_bandwidth(src, dst, &self.params, self.epoch_seed, (a, b));
        S::from_mbps(v).expect("path bandwidth is finite")
    }
}

impl<S: Scalar> PathOracle<S> for NetModel {
    fn begin_epoch(&mut self, epoch: u64) {
        self.epoch_seed = if self.remeasure {
            derive_seed(self.seed, &["epoch", &epoch.to_string()])
        } else {
            self.seed
        };
    }

    fn link_to_server(
        &self,
        client: &BBoxClient<S>,
        link: &EdgeLink<S>,
        server: &AggregationServer<S>,
    ) -> S {
        let tag = format!("{}/{}", client.id, link.id);
        self.measure(client.location, server.location, &tag, server.id.as_str())
    }

    fn link_to_origin(
        &self,
        client: &BBoxClient<S>,
        link: &EdgeLink<S>,
        origin: &OriginServer,
    ) -> S {
        let tag = format!("{}/{}", client.id, link.id);
        self.measure(client.location, origin.location, &tag, origin.id.as_str())
    }

    fn server_to_origin(&self, server: &AggregationServer<S>, origin: &OriginServer) -> S {
        self.measure(
            server.location,
            origin.location,
            server.id.as_str(),
            origin.id.as_str(),
        )
    }
}
