//! End-to-end evaluation of one network configuration, plus the feasibility
//! queries built on it.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::keyrate::{
    background_yield, decoy_bounds, gains, secure_key_rate, transmittance, ChannelObservables,
    DecoyBounds, DetectorParams, KeyRateResult, ProtocolParams,
};
use crate::odn::{olt_power_at, quantum_link_loss, Catalog, NetworkScheme, PathPoint};
use crate::raman::{total_srs, RamanBudget, RamanParams};

/// Everything needed to evaluate a scheme besides the scheme itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub catalog: Catalog,
    pub raman: RamanParams,
    pub protocol: ProtocolParams,
    pub detector: DetectorParams,
}

impl Model {
    /// Reference catalog, calibrated Raman coefficients and default
    /// protocol/detector parameters.
    pub fn reference() -> Self {
        let catalog = Catalog::default();
        let raman = RamanParams::reference(&catalog).expect("reference catalog is valid");
        Model {
            catalog,
            raman,
            protocol: ProtocolParams::default(),
            detector: DetectorParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub link_loss_db: f64,
    pub olt_feeder_entry_dbm: f64,
    pub olt_drop_entry_dbm: f64,
    pub raman: RamanBudget,
    pub eta: f64,
    pub observables: ChannelObservables,
    pub bounds: DecoyBounds,
    pub key: KeyRateResult,
}

pub fn evaluate(scheme: &NetworkScheme, model: &Model) -> Result<PointResult> {
    let cat = &model.catalog;
    let link_loss_db = quantum_link_loss(scheme, cat)?;
    let raman = total_srs(scheme, cat, &model.raman, &model.detector)?;
    let eta = transmittance(link_loss_db, &model.detector);
    let y_0 = background_yield(raman.per_gate_probability, &model.detector);
    let observables = gains(eta, y_0, &model.protocol);
    let bounds = decoy_bounds(&observables, &model.protocol);
    let key = secure_key_rate(&observables, &bounds, &model.protocol);
    Ok(PointResult {
        link_loss_db,
        olt_feeder_entry_dbm: olt_power_at(scheme, cat, PathPoint::FeederEntry)?,
        olt_drop_entry_dbm: olt_power_at(scheme, cat, PathPoint::DropEntry)?,
        raman,
        eta,
        observables,
        bounds,
        key,
    })
}

/// Upper end of the distance search.
pub const MAX_SEARCH_KM: f64 = 200.0;
/// Bisection resolution.
pub const DISTANCE_RESOLUTION_KM: f64 = 0.01;

/// Longest feeder for which `template` stays feasible. Scans in 1 km steps
/// for the first infeasible length and bisects the bracket; returns 0 when
/// already infeasible at 0 km and [`MAX_SEARCH_KM`] when never infeasible.
pub fn max_feeder_distance(template: &NetworkScheme, model: &Model) -> Result<f64> {
    let feasible_at = |km: f64| -> Result<bool> {
        let mut s = template.clone();
        s.feeder_km = km;
        Ok(evaluate(&s, model)?.key.feasible)
    };
    if !feasible_at(0.0)? {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = None;
    let mut km = 1.0;
    while km <= MAX_SEARCH_KM {
        if feasible_at(km)? {
            lo = km;
        } else {
            hi = Some(km);
            break;
        }
        km += 1.0;
    }
    let Some(mut hi) = hi else {
        return Ok(MAX_SEARCH_KM);
    };
    while hi - lo > DISTANCE_RESOLUTION_KM {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub const CAPACITY_SPLITS: [u32; 5] = [4, 8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub users: u32,
    pub link_loss_db: f64,
    pub e_mu: f64,
    pub r_bps: f64,
    pub feasible: bool,
}

/// Key rate per user for each splitter ratio at the template's geometry.
/// For dual-splitter templates both splitters take the ratio.
pub fn capacity_table(
    template: &NetworkScheme,
    model: &Model,
    splits: &[u32],
) -> Result<Vec<CapacityRow>> {
    splits
        .iter()
        .map(|&n| {
            let mut s = template.clone();
            s.classical_split = n;
            if s.quantum_split.is_some() {
                s.quantum_split = Some(n);
            }
            let r = evaluate(&s, model)?;
            Ok(CapacityRow {
                users: n,
                link_loss_db: r.link_loss_db,
                e_mu: r.observables.e_mu,
                r_bps: r.key.r_bps,
                feasible: r.key.feasible,
            })
        })
        .collect()
}
