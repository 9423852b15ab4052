//! Power unit conversions.

/// Lowest value reported for a power in dBm; used in place of minus infinity.
pub const DBM_FLOOR: f64 = -300.0;

pub fn watts_to_dbm(watts: f64) -> f64 {
    if watts <= 0.0 {
        return DBM_FLOOR;
    }
    (10.0 * (watts / 1e-3).log10()).max(DBM_FLOOR)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
