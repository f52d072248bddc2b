//! Angle helpers shared by labelling, losses and dead reckoning.

use std::f64::consts::{PI, TAU};

/// Reduce an angle to the half-open interval (-π, π].
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    // rem_euclid maps exact multiples of 2π to 0 and π stays π, so the
    // interval is already half-open on the left.
    a
}

/// Shortest signed rotation taking `from` to `to`, in (-π, π].
pub fn diff(to: f64, from: f64) -> f64 {
    wrap(to - from)
}

/// Interpolate between two headings along the shorter arc.
pub fn lerp(from: f64, to: f64, frac: f64) -> f64 {
    wrap(from + frac * diff(to, from))
}
