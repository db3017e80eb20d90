//! Domain types and the closed-form bandwidth algebra.
//!
//! A broadcaster's proxy box ([`BBoxClient`]) splits its upload over several
//! edge links. Routed through an aggregation server the subflows recombine,
//! so the end-to-end rate is the smaller of the summed subflow rates and the
//! server's own path to the origin. Without aggregation only one link can be
//! used, so the baseline is the best single link.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{max_of, min_of, Scalar};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

id_type!(
    /// Identifies a B-box client.
    ClientId
);
id_type!(
    /// Identifies an aggregation server.
    ServerId
);
id_type!(
    /// Identifies an origin (ingest) server.
    OriginId
);
id_type!(LinkId);

/// A point on the globe, in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub latitude: f64,
    pub longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        let p = GeoPoint {
            latitude,
            longitude,
        };
        p.validate("point", "")?;
        Ok(p)
    }

    pub(crate) fn validate(&self, entity: &'static str, id: &str) -> Result<()> {
        if !(self.latitude.is_finite() && (-90.0..=90.0).contains(&self.latitude)) {
            return Err(Error::invalid(
                entity,
                id,
                "location.latitude",
                format!("must be within [-90, 90], got {}", self.latitude),
            ));
        }
        if !(self.longitude.is_finite() && (-180.0..=180.0).contains(&self.longitude)) {
            return Err(Error::invalid(
                entity,
                id,
                "location.longitude",
                format!("must be within [-180, 180], got {}", self.longitude),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Wifi,
    Cellular,
}

/// One wireless uplink of a broadcaster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeLink<S = f64> {
    pub id: LinkId,
    pub kind: LinkKind,
    pub uplink_mbps: S,
}

/// A broadcaster's multi-interface proxy box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBoxClient<S = f64> {
    pub id: ClientId,
    pub location: GeoPoint,
    pub links: Vec<EdgeLink<S>>,
    pub origin_id: OriginId,
}

/// A multipath-capable relay in the cloud.
///
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationServer<S = f64> {
    pub id: ServerId,
    pub location: GeoPoint,
    pub total_capacity_mbps: S,
    pub remaining_capacity_mbps: S,
}

/// The streaming platform's ingest server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginServer {
    pub id: OriginId,
    pub location: GeoPoint,
}

fn check_bandwidth<S: Scalar>(
    entity: &'static str,
    id: &str,
    field: &'static str,
    value: &S,
) -> Result<()> {
    if !value.is_finite_value() {
        return Err(Error::invalid(entity, id, field, "must be finite"));
    }
    if *value < S::zero() {
        return Err(Error::invalid(
            entity,
            id,
            field,
            format!("must be non-negative, got {value:?}"),
        ));
    }
    Ok(())
}

fn cast<S: Scalar>(entity: &'static str, id: &str, field: &'static str, v: f64) -> Result<S> {
    S::from_mbps(v).ok_or_else(|| Error::invalid(entity, id, field, "not representable"))
}

impl<S: Scalar> EdgeLink<S> {
    pub fn new(id: impl Into<LinkId>, kind: LinkKind, uplink_mbps: S) -> Result<Self> {
        let link = EdgeLink {
            id: id.into(),
            kind,
            uplink_mbps,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        check_bandwidth("link", self.id.as_str(), "uplink_mbps", &self.uplink_mbps)
    }
}

impl<S: Scalar> BBoxClient<S> {
    pub fn validate(&self) -> Result<()> {
        self.location.validate("client", self.id.as_str())?;
        if self.links.is_empty() {
            return Err(Error::invalid(
                "client",
                self.id.as_str(),
                "links",
                "must contain at least one link",
            ));
        }
        for link in &self.links {
            check_bandwidth(
                "client",
                self.id.as_str(),
                "links.uplink_mbps",
                &link.uplink_mbps,
            )?;
        }
        Ok(())
    }
}

impl BBoxClient<f64> {
    /// Re-express every bandwidth in another scalar type.
    pub fn cast<S: Scalar>(&self) -> Result<BBoxClient<S>> {
        let links = self
            .links
            .iter()
            .map(|l| {
                Ok(EdgeLink {
                    id: l.id.clone(),
                    kind: l.kind,
                    uplink_mbps: cast(
                        "client",
                        self.id.as_str(),
                        "links.uplink_mbps",
                        l.uplink_mbps,
                    )?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(BBoxClient {
            id: self.id.clone(),
            location: self.location,
            links,
            origin_id: self.origin_id.clone(),
        })
    }
}

impl<S: Scalar> AggregationServer<S> {
    /// An idle server: R = T.
    pub fn idle(id: impl Into<ServerId>, location: GeoPoint, capacity_mbps: S) -> Result<Self> {
        let server = AggregationServer {
            id: id.into(),
            location,
            total_capacity_mbps: capacity_mbps.clone(),
            remaining_capacity_mbps: capacity_mbps,
        };
        server.validate()?;
        Ok(server)
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        self.location.validate("agg_server", id)?;
        check_bandwidth(
            "agg_server",
            id,
            "total_capacity_mbps",
            &self.total_capacity_mbps,
        )?;
        if self.total_capacity_mbps <= S::zero() {
            return Err(Error::invalid(
                "agg_server",
                id,
                "total_capacity_mbps",
                "must be positive",
            ));
        }
        check_bandwidth(
            "agg_server",
            id,
            "remaining_capacity_mbps",
            &self.remaining_capacity_mbps,
        )?;
        if self.remaining_capacity_mbps > self.total_capacity_mbps {
            return Err(Error::invalid(
                "agg_server",
                id,
                "remaining_capacity_mbps",
                "exceeds total_capacity_mbps",
            ));
        }
        Ok(())
    }

    /// Remaining over total capacity.
    pub fn load_rate(&self) -> Result<S> {
        load_rate(
            self.remaining_capacity_mbps.clone(),
            self.total_capacity_mbps.clone(),
        )
    }
}

impl AggregationServer<f64> {
    pub fn cast<S: Scalar>(&self) -> Result<AggregationServer<S>> {
        let id = self.id.as_str();
        Ok(AggregationServer {
            id: self.id.clone(),
            location: self.location,
            total_capacity_mbps: cast(
                "agg_server",
                id,
                "total_capacity_mbps",
                self.total_capacity_mbps,
            )?,
            remaining_capacity_mbps: cast(
                "agg_server",
                id,
                "remaining_capacity_mbps",
                self.remaining_capacity_mbps,
            )?,
        })
    }
}

/// One (client, server) candidate with its measured and derived bandwidths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEntry<S = f64> {
    pub client_id: ClientId,
    pub server_id: ServerId,
    /// Aggregated uplink from the box to the server.
    pub b_client_server_mbps: S,
    /// Server to origin.
    pub b_server_origin_mbps: S,
    /// End to end via the server. Also the capacity the client
    /// consumes on the server when assigned.
    pub b_via_mbps: S,
    /// Best single link straight to the origin.
    pub b_baseline_mbps: S,
    /// Via minus baseline. Negative when the detour loses.
    pub gain_mbps: S,
}

impl<S: Scalar> GainEntry<S> {
    /// Derives the via bandwidth and gain from the three measured values.
    pub fn new(
        client_id: ClientId,
        server_id: ServerId,
        b_client_server_mbps: S,
        b_server_origin_mbps: S,
        b_baseline_mbps: S,
    ) -> Result<Self> {
        for (field, v) in [
            ("b_client_server_mbps", &b_client_server_mbps),
            ("b_server_origin_mbps", &b_server_origin_mbps),
            ("b_baseline_mbps", &b_baseline_mbps),
        ] {
            check_bandwidth("gain_entry", client_id.as_str(), field, v)?;
        }
        let b_via_mbps = min_of(b_client_server_mbps.clone(), b_server_origin_mbps.clone());
        let gain_mbps = bandwidth_gain(b_via_mbps.clone(), b_baseline_mbps.clone())?;
        Ok(GainEntry {
            client_id,
            server_id,
            b_client_server_mbps,
            b_server_origin_mbps,
            b_via_mbps,
            b_baseline_mbps,
            gain_mbps,
        })
    }

    /// True when the derived fields match a recomputation from the raw ones.
    pub fn is_consistent(&self) -> bool {
        let via = min_of(
            self.b_client_server_mbps.clone(),
            self.b_server_origin_mbps.clone(),
        );
        let gain = via.clone() - self.b_baseline_mbps.clone();
        via == self.b_via_mbps && gain == self.gain_mbps
    }
}

fn check_input<S: Scalar>(what: &str, v: &S) -> Result<()> {
    if !v.is_finite_value() {
        return Err(Error::Validation(format!("{what} must be finite")));
    }
    if *v < S::zero() {
        return Err(Error::Validation(format!(
            "{what} must be non-negative, got {v:?}"
        )));
    }
    Ok(())
}

/// End-to-end rate through an aggregation server: min(Σ subflows, server→origin).
pub fn aggregated_path_bandwidth<S: Scalar>(
    subflow_mbps: &[S],
    server_to_origin_mbps: S,
) -> Result<S> {
    check_input("server_to_origin_mbps", &server_to_origin_mbps)?;
    let mut total = S::zero();
    for v in subflow_mbps {
        check_input("subflow_mbps", v)?;
        total = total + v.clone();
    }
    Ok(min_of(total, server_to_origin_mbps))
}

/// Rate with only one edge network usable: the best of the direct link rates.
pub fn baseline_bandwidth<S: Scalar>(direct_link_mbps: &[S]) -> Result<S> {
    let (first, rest) = direct_link_mbps
        .split_first()
        .ok_or(Error::Empty("baseline_bandwidth"))?;
    check_input("direct_link_mbps", first)?;
    rest.iter().try_fold(first.clone(), |best, v| {
        check_input("direct_link_mbps", v)?;
        Ok(max_of(best, v.clone()))
    })
}

pub fn bandwidth_gain<S: Scalar>(b_via_mbps: S, b_baseline_mbps: S) -> Result<S> {
    check_input("b_via_mbps", &b_via_mbps)?;
    check_input("b_baseline_mbps", &b_baseline_mbps)?;
    Ok(b_via_mbps - b_baseline_mbps)
}

/// remaining / total. Zero means fully loaded, one means idle.
pub fn load_rate<S: Scalar>(remaining_mbps: S, total_mbps: S) -> Result<S> {
    if !total_mbps.is_finite_value() || total_mbps <= S::zero() {
        return Err(Error::Validation(format!(
            "total capacity must be positive, got {total_mbps:?}"
        )));
    }
    check_input("remaining_mbps", &remaining_mbps)?;
    if remaining_mbps > total_mbps {
        return Err(Error::Validation(format!(
            "remaining capacity {remaining_mbps:?} exceeds total {total_mbps:?}"
        )));
    }
    Ok(remaining_mbps / total_mbps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::exact;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn aggregated_examples() {
        assert_eq!(aggregated_path_bandwidth(&[4.0, 4.0], 50.0).unwrap(), 8.0);
        assert_eq!(aggregated_path_bandwidth(&[10.0, 10.0], 8.0).unwrap(), 8.0);
        assert_eq!(aggregated_path_bandwidth::<f64>(&[], 100.0).unwrap(), 0.0);
    }

    #[test]
    fn aggregated_rejects_bad_input() {
        assert!(aggregated_path_bandwidth(&[-1.0], 5.0).is_err());
        assert!(aggregated_path_bandwidth(&[f64::NAN], 5.0).is_err());
        assert!(aggregated_path_bandwidth(&[1.0], f64::INFINITY).is_err());
        assert!(aggregated_path_bandwidth(&[1.0], -2.0).is_err());
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(baseline_bandwidth(&[3.0, 5.0, 1.0]).unwrap(), 5.0);
        assert_eq!(baseline_bandwidth(&[7.0]).unwrap(), 7.0);
        assert_eq!(baseline_bandwidth(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            baseline_bandwidth::<f64>(&[]),
            Err(Error::Empty(_))
        ));
        assert!(baseline_bandwidth(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(bandwidth_gain(8.0, 3.0).unwrap(), 5.0);
        assert_eq!(bandwidth_gain(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(bandwidth_gain(4.0, 6.0).unwrap(), -2.0);
        assert!(bandwidth_gain(-1.0, 0.0).is_err());
    }

    #[test]
    fn load_rate_examples() {
        assert_eq!(load_rate(5.0, 10.0).unwrap(), 0.5);
        assert_eq!(load_rate(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(load_rate(10.0, 10.0).unwrap(), 1.0);
        assert!(load_rate(1.0, 0.0).is_err());
        assert!(load_rate(1.0, -3.0).is_err());
        assert!(load_rate(11.0, 10.0).is_err());
    }

    #[test]
    fn load_rate_exact() {
        let r = load_rate(exact(1), exact(3)).unwrap();
        assert_eq!(r, BigRational::new(1.into(), 3.into()));
    }

    #[test]
    fn geo_point_ranges() {
        assert!(GeoPoint::new(90.0, 180.0).is_ok());
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.1).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn server_and_client_validation() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        assert!(AggregationServer::idle("s", p, 0.0).is_err());
        let mut s = AggregationServer::idle("s", p, 10.0).unwrap();
        s.remaining_capacity_mbps = 11.0;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("remaining_capacity_mbps"), "{err}");

        let c = BBoxClient::<f64> {
            id: "c1".into(),
            location: p,
            links: vec![],
            origin_id: "o".into(),
        };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("c1") && err.contains("links"), "{err}");
        assert!(EdgeLink::new("l", LinkKind::Wifi, -0.5).is_err());
    }

    #[test]
    fn gain_entry_negative_gain() {
        let e = GainEntry::new("c".into(), "s".into(), 4.0, 50.0, 6.0).unwrap();
        assert_eq!(e.b_via_mbps, 4.0);
        assert_eq!(e.gain_mbps, -2.0);
        assert!(e.is_consistent());
    }

    proptest! {
        #[test]
        fn aggregated_is_min_of_sum_and_origin(
            xs in prop::collection::vec(0.0f64..100.0, 0..6),
            y in 0.0f64..200.0,
        ) {
            let sum: f64 = xs.iter().fold(0.0, |a, v| a + v);
            let v = aggregated_path_bandwidth(&xs, y).unwrap();
            prop_assert!(v <= sum && v <= y);
            prop_assert!(v == sum || v == y);
        }

        #[test]
        fn aggregated_is_monotone(
            xs in prop::collection::vec(0i64..50, 1..5),
            y in 0i64..200,
            idx in 0usize..5,
            bump in 0i64..20,
        ) {
            let base: Vec<_> = xs.iter().map(|&x| exact(x)).collect();
            let mut raised = base.clone();
            let i = idx % raised.len();
            raised[i] = raised[i].clone() + exact(bump);
            let a = aggregated_path_bandwidth(&base, exact(y)).unwrap();
            let b = aggregated_path_bandwidth(&raised, exact(y)).unwrap();
            let c = aggregated_path_bandwidth(&base, exact(y + bump)).unwrap();
            prop_assert!(b >= a);
            prop_assert!(c >= a);
        }

        #[test]
        fn baseline_is_member(xs in prop::collection::vec(0.0f64..100.0, 1..8)) {
            let b = baseline_bandwidth(&xs).unwrap();
            prop_assert!(xs.contains(&b));
            prop_assert!(xs.iter().all(|&x| x <= b));
        }

        #[test]
        fn gain_entry_recomputes(
            bcs in 0.0f64..100.0, bso in 0.0f64..100.0, base in 0.0f64..100.0,
        ) {
            let e = GainEntry::new("c".into(), "s".into(), bcs, bso, base).unwrap();
            prop_assert!(e.is_consistent());
            prop_assert_eq!(e.b_via_mbps, bcs.min(bso));
            prop_assert_eq!(e.gain_mbps, bcs.min(bso) - base);
        }

        #[test]
        fn load_rate_in_unit_interval(total in 0.001f64..1e6, frac in 0.0f64..=1.0) {
            let remaining = (total * frac).min(total);
            let r = load_rate(remaining, total).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
