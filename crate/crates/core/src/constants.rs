//! CODATA 2018 constants in SI units, plus the Rb-87 species defaults.

pub const HBAR: f64 = 1.054_571_817e-34;
pub const H: f64 = 2.0 * std::f64::consts::PI * HBAR;
pub const AMU: f64 = 1.660_539_066_60e-27;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const MU0: f64 = 1.256_637_062_12e-6;
pub const KB: f64 = 1.380_649e-23;
pub const C_LIGHT: f64 = 299_792_458.0;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

pub const RB87_MASS: f64 = 86.909_180_527 * AMU;
pub const RB87_SCATTERING_LENGTH: f64 = 98.98 * BOHR_RADIUS;
/// Landé factor of the F = 1 and F = 2 ground hyperfine levels (magnitude).
pub const RB87_GF: f64 = 0.5;
