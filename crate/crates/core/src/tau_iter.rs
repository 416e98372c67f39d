//! τ-iteration for the log-correction of the wavefunction, `ψ = φ e^{−τ}`.
//!
//! Starting from `ℰ₀ = 0`, `τ'₀ = 0`, step `n` computes
//!
//! ```text
//! ℰ_n   = ℰ₁ + ⟨½ τ'²_{n−1}⟩
//! τ'_n  = 2 φ⁻²(x) ∫₀ˣ φ² [w − ℰ_n + ½ τ'²_{n−1}] dy
//! ```
//!
//! where `⟨·⟩` is the φ²-weighted mean and `ℰ₁ = ⟨w⟩`. The bracket has zero
//! weighted mean by construction of `ℰ_n`, so the forward integral equals
//! minus the backward one; the forward form is used below `x = 1` and the
//! backward form above (see [`WeightedGrid::hybrid_ratio`]). The energy is
//! `E = g − ℰ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::State;
use crate::quad::{SampledFunction, WeightedGrid};
use crate::scalar::Real;

pub const DEFAULT_ITERS: usize = 5;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration aborts once `|ℰ_n| > DIVERGENCE_FACTOR · (|g| + 1)`.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tau,
    F,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Tau => "tau",
            Scheme::F => "f",
        }
    }
}

/// Per-step perturbation energies of one iteration run.
#[derive(Clone, Debug)]
pub struct IterationTrace<T> {
    pub scheme: Scheme,
    pub g: T,
    pub state: State,
    /// `ℰ_1, ℰ_2, ...`
    pub energies: Vec<T>,
    /// Final `τ'_n` for the τ scheme, final `f_n` for the f scheme.
    pub profile: SampledFunction<T>,
    /// `g − ℰ_last`.
    pub e_final: T,
}

impl<T: Real> IterationTrace<T> {
    pub(crate) fn new(
        scheme: Scheme,
        wg: &WeightedGrid<T>,
        energies: Vec<T>,
        profile: SampledFunction<T>,
    ) -> Self {
        let g = wg.params().g();
        let last = *energies.last().expect("trace holds at least one energy");
        Self {
            scheme,
            g,
            state: wg.params().state(),
            energies,
            profile,
            e_final: g - last,
        }
    }

    pub fn steps(&self) -> usize {
        self.energies.len()
    }

    pub fn last_energy(&self) -> T {
        *self.energies.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions<T> {
    pub n_iters: usize,
    /// Stop early once `|ℰ_n − ℰ_{n−1}| < tol`. Zero runs all `n_iters` steps.
    pub tol: T,
}

impl<T: Real> Default for SolveOptions<T> {
    fn default() -> Self {
        Self {
            n_iters: DEFAULT_ITERS,
            tol: T::lit(DEFAULT_TOL),
        }
    }
}

impl<T: Real> SolveOptions<T> {
    /// Exactly `n_iters` steps, no early exit.
    pub fn fixed(n_iters: usize) -> Self {
        Self {
            n_iters,
            tol: T::zero(),
        }
    }
}

pub fn divergence_limit<T: Real>(g: T) -> T {
    T::lit(DIVERGENCE_FACTOR) * (g.abs() + T::one())
}

pub(crate) fn guard<T: Real>(g: T, step: usize, energy: T) -> Result<()> {
    let limit = divergence_limit(g);
    if !energy.is_finite() || energy.abs() > limit {
        return Err(Error::Diverged {
            step,
            energy: energy.as_f64(),
            limit: limit.as_f64(),
        });
    }
    Ok(())
}

/// `ℰ₁ = ⟨w⟩`.
pub fn first_energy<T: Real>(wg: &WeightedGrid<T>) -> T {
    wg.weighted_mean(wg.perturbation())
}

/// `ℰ_n = ℰ₁ + ⟨½ τ'²_{n−1}⟩`.
pub fn energy_step<T: Real>(wg: &WeightedGrid<T>, e1: T, prev: &SampledFunction<T>) -> Result<T> {
    if !wg.same_grid(prev) {
        return Err(Error::GridMismatch);
    }
    let half_sq: Vec<T> = prev.values().iter().map(|&t| T::half() * t * t).collect();
    Ok(e1 + wg.weighted_mean(&half_sq))
}

/// `τ'_n` from `τ'_{n−1}` and `ℰ_n`, one hybrid sweep.
pub fn tau_prime_step<T: Real>(
    wg: &WeightedGrid<T>,
    prev: &SampledFunction<T>,
    e_n: T,
) -> Result<SampledFunction<T>> {
    if !wg.same_grid(prev) {
        return Err(Error::GridMismatch);
    }
    let integrand: Vec<T> = wg
        .perturbation()
        .iter()
        .zip(prev.values())
        .map(|(&w, &t)| w - e_n + T::half() * t * t)
        .collect();
    let values = wg
        .hybrid_ratio(&integrand)
        .into_iter()
        .map(|r| T::two() * r)
        .collect();
    SampledFunction::new(wg.grid().clone(), values)
}

/// Runs the τ-iteration from the zero initial state.
pub fn solve<T: Real>(wg: &WeightedGrid<T>, opts: &SolveOptions<T>) -> Result<IterationTrace<T>> {
    if opts.n_iters == 0 {
        return Err(Error::NoIterations);
    }
    let g = wg.params().g();
    let e1 = first_energy(wg);
    guard(g, 1, e1)?;
    let zero = SampledFunction::constant(wg.grid().clone(), T::zero());
    let mut tau_prime = tau_prime_step(wg, &zero, e1)?;
    let mut energies = vec![e1];

    for step in 2..=opts.n_iters {
        let e_n = energy_step(wg, e1, &tau_prime)?;
        guard(g, step, e_n)?;
        let delta = (e_n - energies[energies.len() - 1]).abs();
        energies.push(e_n);
        tau_prime = tau_prime_step(wg, &tau_prime, e_n)?;
        if delta < opts.tol {
            break;
        }
    }
    Ok(IterationTrace::new(Scheme::Tau, wg, energies, tau_prime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_abs_diff_eq;

    fn wg(g: f64, state: State, panels: usize) -> WeightedGrid<f64> {
        WeightedGrid::build(ModelParams::new(g, state).unwrap(), panels).unwrap()
    }

    #[test]
    fn first_energies() {
        assert_abs_diff_eq!(
            first_energy(&wg(3.0, State::Even, 64)),
            0.4757,
            epsilon = 5e-5
        );
        assert_abs_diff_eq!(
            first_energy(&wg(7.0, State::Plus, 64)),
            0.27461,
            epsilon = 5e-6
        );
        assert_abs_diff_eq!(
            first_energy(&wg(0.05, State::Even, 64)),
            -0.0341,
            epsilon = 5e-5
        );
        assert_abs_diff_eq!(
            first_energy(&wg(1.0, State::Even, 64)),
            0.4135,
            epsilon = 5e-5
        );
        assert_abs_diff_eq!(
            first_energy(&wg(6.0, State::Plus, 64)),
            0.27989,
            epsilon = 5e-6
        );
    }

    #[test]
    fn zero_correction_reproduces_first_step() {
        let w = wg(2.0, State::Even, 32);
        let e1 = first_energy(&w);
        let zero = SampledFunction::constant(w.grid().clone(), 0.0);
        let a = tau_prime_step(&w, &zero, e1).unwrap();
        let b = tau_prime_step(&w, &zero, e1).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(energy_step(&w, e1, &zero).unwrap(), e1);
    }

    #[test]
    fn second_energies() {
        let w = wg(1.0, State::Even, 64);
        let t = solve(&w, &SolveOptions::fixed(2)).unwrap();
        assert_abs_diff_eq!(t.energies[1], 0.4310, epsilon = 5e-5);
        let w = wg(3.0, State::Plus, 64);
        let t = solve(&w, &SolveOptions::fixed(2)).unwrap();
        assert_abs_diff_eq!(t.energies[1], 0.3257, epsilon = 5e-5);
    }

    #[test]
    fn five_steps_at_g6() {
        let t = solve(&wg(6.0, State::Even, 64), &SolveOptions::fixed(5)).unwrap();
        let expected = [0.29204, 0.29399, 0.29420, 0.29422, 0.29422];
        for (got, want) in t.energies.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 5e-6);
        }
        assert_abs_diff_eq!(t.e_final, 5.70578, epsilon = 5e-6);
        assert_eq!(t.e_final, 6.0 - t.energies[4]);
    }

    #[test]
    fn tau_prime_vanishes_at_origin() {
        for &(g, state) in &[(0.05, State::Even), (2.0, State::Even), (4.0, State::Plus)] {
            let w = wg(g, state, 32);
            let e1 = first_energy(&w);
            let mut tp = SampledFunction::constant(w.grid().clone(), 0.0);
            let mut e = e1;
            for _ in 0..5 {
                tp = tau_prime_step(&w, &tp, e).unwrap();
                assert_eq!(tp.values()[0], 0.0);
                e = energy_step(&w, e1, &tp).unwrap();
            }
        }
    }

    #[test]
    fn forward_and_backward_agree_at_one() {
        let w = wg(2.0, State::Even, 64);
        let e1 = first_energy(&w);
        let zero = SampledFunction::constant(w.grid().clone(), 0.0);
        let tp1 = tau_prime_step(&w, &zero, e1).unwrap();
        let e2 = energy_step(&w, e1, &tp1).unwrap();
        let integrand: Vec<f64> = w
            .perturbation()
            .iter()
            .zip(tp1.values())
            .map(|(&wv, &t)| wv - e2 + 0.5 * t * t)
            .collect();
        let one = w.grid().points().iter().position(|&x| x == 1.0).unwrap();
        let fwd = w.head_ratio(&integrand)[one];
        let bwd = -w.tail_ratio(&integrand)[one];
        assert!((fwd - bwd).abs() < 1e-8, "{fwd} vs {bwd}");
    }

    #[test]
    fn even_and_plus_identical_at_g1() {
        let a = solve(&wg(1.0, State::Even, 64), &SolveOptions::fixed(5)).unwrap();
        let b = solve(&wg(1.0, State::Plus, 64), &SolveOptions::fixed(5)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.energies), bits(&b.energies));
        assert_eq!(bits(a.profile.values()), bits(b.profile.values()));
        assert_abs_diff_eq!(a.last_energy(), 0.4311, epsilon = 5e-5);
        assert_abs_diff_eq!(a.e_final, 0.5689, epsilon = 5e-5);
    }

    #[test]
    fn energies_never_drop_below_first() {
        for &g in &[0.05, 0.3, 1.0, 3.0, 8.0] {
            for state in [State::Even, State::Plus] {
                let t = solve(&wg(g, state, 32), &SolveOptions::fixed(6)).unwrap();
                assert!(t.energies[1..].iter().all(|&e| e >= t.energies[0]), "g={g}");
            }
        }
    }

    #[test]
    fn refinement_changes_fifth_energy_little() {
        for &g in &[1.0, 3.0, 8.0] {
            let a = solve(&wg(g, State::Even, 64), &SolveOptions::fixed(5)).unwrap();
            let b = solve(&wg(g, State::Even, 128), &SolveOptions::fixed(5)).unwrap();
            assert!((a.last_energy() - b.last_energy()).abs() < 1e-6, "g={g}");
        }
    }

    #[test]
    fn even_state_lies_below_plus_state() {
        for &g in &[1.5, 3.0, 6.0, 8.0] {
            let ev = solve(&wg(g, State::Even, 64), &SolveOptions::fixed(5)).unwrap();
            let plus = solve(&wg(g, State::Plus, 64), &SolveOptions::fixed(5)).unwrap();
            assert!(ev.e_final < plus.e_final, "g={g}");
        }
    }

    #[test]
    fn early_exit_on_tolerance() {
        let w = wg(8.0, State::Plus, 64);
        let t = solve(
            &w,
            &SolveOptions {
                n_iters: 50,
                tol: 1e-12,
            },
        )
        .unwrap();
        assert!(t.steps() < 50);
        let n = t.steps();
        assert!((t.energies[n - 1] - t.energies[n - 2]).abs() < 1e-12);
    }

    #[test]
    fn one_sweep_per_step() {
        let w = wg(3.0, State::Even, 32);
        solve(&w, &SolveOptions::fixed(5)).unwrap();
        assert_eq!(w.sweeps(), 5);
    }

    #[test]
    fn zero_iterations_rejected() {
        let w = wg(3.0, State::Even, 32);
        assert_eq!(
            solve(&w, &SolveOptions::fixed(0)).unwrap_err(),
            Error::NoIterations
        );
    }

    #[test]
    fn guard_trips_on_runaway_energy() {
        assert!(guard(1.0, 3, 25.0).is_err());
        assert!(guard(1.0, 3, f64::NAN).is_err());
        assert!(guard(1.0, 3, 0.4).is_ok());
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = wg(3.0, State::Even, 32);
        let b = wg(3.0, State::Even, 32);
        let foreign = SampledFunction::constant(b.grid().clone(), 0.0);
        assert_eq!(
            tau_prime_step(&a, &foreign, 0.1).unwrap_err(),
            Error::GridMismatch
        );
    }

    #[test]
    fn runs_in_single_precision() {
        let w = WeightedGrid::build(ModelParams::new(6.0f32, State::Even).unwrap(), 32).unwrap();
        let t = solve(&w, &SolveOptions::fixed(5)).unwrap();
        assert!(
            (t.last_energy() - 0.29422).abs() < 1e-3,
            "{}",
            t.last_energy()
        );
    }
}
