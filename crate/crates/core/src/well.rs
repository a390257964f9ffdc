//! The double-well bulk density `F(m) = (m² - 1)²/4` and its derivatives.

#[inline]
pub fn potential(m: f64) -> f64 {
    let t = m * m - 1.0;
    0.25 * t * t
}

#[inline]
pub fn potential_prime(m: f64) -> f64 {
    m * m * m - m
}

#[inline]
pub fn potential_second(m: f64) -> f64 {
    3.0 * m * m - 1.0
}
