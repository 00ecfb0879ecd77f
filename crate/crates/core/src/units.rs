//! Decibel and attenuation conversions. Powers are carried in linear mW
//! internally; dB and dBm only appear at the edges.

use std::f64::consts::LN_10;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// Linear transmittance of a loss given in dB: `10^(-x/10)`.
pub fn db_to_linear(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Inverse of [`db_to_linear`].
pub fn linear_to_db(ratio: f64) -> f64 {
    -10.0 * ratio.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Converts a fiber attenuation in dB/km into the natural (1/km) coefficient
/// used by exponential propagation, so that `exp(-a' L) == 10^(-a L / 10)`.
pub fn att_to_natural(db_per_km: f64) -> f64 {
    db_per_km * LN_10 / 10.0
}
