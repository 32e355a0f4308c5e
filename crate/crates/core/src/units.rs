//! Physical constants and unit helpers.
//!
//! Everything inside the crate is SI: lengths in metres, frequencies in
//! hertz, times in seconds. The helpers below exist so that call sites can
//! read like the quantities they describe (`um(20.0)`, `nm(300.0)`).

/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, J s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;

pub fn nm(value: f64) -> f64 {
    value * 1e-9
}

pub fn um(value: f64) -> f64 {
    value * 1e-6
}

pub fn to_nm(metres: f64) -> f64 {
    metres * 1e9
}

pub fn to_um(metres: f64) -> f64 {
    metres * 1e6
}

pub fn mhz(value: f64) -> f64 {
    value * 1e6
}

pub fn ghz(value: f64) -> f64 {
    value * 1e9
}

pub fn us(value: f64) -> f64 {
    value * 1e-6
}

pub fn ff(value: f64) -> f64 {
    value * 1e-15
}
