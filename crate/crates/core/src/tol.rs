//! Floating-point comparison rules shared by every module.
//!
//! Costs are sums of many nonnegative terms and swap deltas are differences of
//! such sums, so comparisons are relative with a small absolute floor.

pub const REL_TOL: f64 = 1e-9;
pub const ABS_FLOOR: f64 = 1e-12;

/// Tolerance to use around a value of magnitude `scale`.
#[inline]
pub fn tolerance(scale: f64) -> f64 {
    (REL_TOL * scale.abs()).max(ABS_FLOOR)
}

#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= tolerance(a.abs().max(b.abs()))
}

/// `a <= b` up to the shared tolerance.
#[inline]
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + tolerance(a.abs().max(b.abs()))
}
