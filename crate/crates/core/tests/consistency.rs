//! Cross-module consistency: the classification's worst decay exponent over
//! the caustic set reproduces the sharp sup-norm rate, and the scans feeding
//! it agree with each other.

use dkg_core::critical::{caustic_scan, classify, DEFAULT_TAU_COS, DEFAULT_TAU_DEGEN};
use dkg_core::dispersion::Frequency;
use dkg_core::ratio::Ratio;

const PI: f64 = std::f64::consts::PI;

/// Classifies every caustic-scan point plus the all-cosines-zero point and
/// returns the smallest decay exponent found.
fn min_exponent_over_caustics(d: usize, grid_n: usize) -> Ratio {
    let mut points: Vec<Frequency> =
        caustic_scan(d, grid_n).into_iter().map(|p| Frequency::new(p.xi)).collect();
    points.push(Frequency::new(vec![PI / 2.0; d]));
    let mut min: Option<Ratio> = None;
    for xi in &points {
        let report = classify(xi, DEFAULT_TAU_COS, DEFAULT_TAU_DEGEN).unwrap();
        let e = report.decay_exponent;
        min = Some(match min {
            None => e,
            Some(m) if e.to_f64() < m.to_f64() => e,
            Some(m) => m,
        });
    }
    min.expect("caustic scan found points")
}

#[test]
fn worst_caustic_exponent_matches_sharp_rate_d2() {
    assert_eq!(min_exponent_over_caustics(2, 64), Ratio::new(3, 4));
}

#[test]
fn worst_caustic_exponent_matches_sharp_rate_d3() {
    assert_eq!(min_exponent_over_caustics(3, 32), Ratio::new(7, 6));
}
