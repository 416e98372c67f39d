//! The converged τ' profile of the `+` state against the 1/g expansion of S'.

use dwell::asymptotic::s_prime_series;
use dwell::{BetaPyramid, ModelParams, SolveOptions, State, WeightedGrid};

#[test]
fn tau_prime_follows_the_series_away_from_the_origin() {
    let p = BetaPyramid::default();
    for g in [6.0f64, 8.0] {
        let wg = WeightedGrid::build(ModelParams::new(g, State::Plus).unwrap(), 64).unwrap();
        let t = dwell::tau_iter::solve(&wg, &SolveOptions::fixed(25)).unwrap();
        let grid = t.profile.grid().clone();
        let mut checked = 0;
        for (&x, &tp) in grid.points().iter().zip(t.profile.values()) {
            if !(1.0..=2.0).contains(&x) {
                continue;
            }
            let first = s_prime_series(&p, x, 1, g).unwrap();
            let third = s_prime_series(&p, x, 3, g).unwrap();
            // Next term is O(g⁻⁴) relative to the leading one.
            assert!(
                (tp - third).abs() < 0.03 * tp,
                "g={g} x={x}: τ'={tp} series={third}"
            );
            assert!((tp - third).abs() < (tp - first).abs(), "g={g} x={x}");
            checked += 1;
        }
        assert!(checked > 10);
    }
}

#[test]
fn tau_prime_vanishes_at_the_origin_unlike_the_series() {
    let g = 8.0f64;
    let wg = WeightedGrid::build(ModelParams::new(g, State::Plus).unwrap(), 64).unwrap();
    let t = dwell::tau_iter::solve(&wg, &SolveOptions::fixed(5)).unwrap();
    assert_eq!(t.profile.grid().points()[0], 0.0);
    assert!(t.profile.values()[0].abs() < 1e-12);
    let s = s_prime_series(&BetaPyramid::default(), 0.0, 1, g).unwrap();
    assert!((s - 0.75 / g).abs() < 1e-15);
}
