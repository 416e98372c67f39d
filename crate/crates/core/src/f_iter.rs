//! f-iteration, `ψ = φ f`, kept for comparison with the τ scheme.
//!
//! ```text
//! ℰ_n   = ∫ φ² f_{n−1} w / ∫ φ² f_{n−1}
//! f_n(x) = 1 − 2 ∫ₓ^∞ φ⁻²(y) dy ∫_y^∞ φ²(z) (w − ℰ_n) f_{n−1}(z) dz
//! ```
//!
//! Each step is two backward sweeps: the weighted inner tail followed by a
//! plain outer tail. Nothing forces `f_n > 0`; at small `g` the profile
//! changes sign and the run stops with an [`Instability`] report.

use crate::error::{Error, Instability, InstabilityKind, Result};
use crate::quad::{SampledFunction, WeightedGrid};
use crate::scalar::Real;
use crate::tau_iter::{divergence_limit, IterationTrace, Scheme};

/// `f_n` together with the energy `ℰ_n` used to build it.
#[derive(Clone, Debug)]
pub struct FState<T> {
    pub step: usize,
    pub f: SampledFunction<T>,
    pub energy: T,
}

impl<T: Real> FState<T> {
    /// `f₀ ≡ 1`, no energy yet.
    pub fn initial(wg: &WeightedGrid<T>) -> Self {
        Self {
            step: 0,
            f: SampledFunction::constant(wg.grid().clone(), T::one()),
            energy: T::zero(),
        }
    }
}

fn unstable<T>(step: usize, kind: InstabilityKind) -> Result<T> {
    Err(Error::Unstable(Instability { step, kind }))
}

/// `ℰ_n` from `f_{n−1}`. A non-positive norm is reported as an instability
/// of step `prev.step + 1`.
pub fn f_energy<T: Real>(wg: &WeightedGrid<T>, prev: &FState<T>) -> Result<T> {
    if !wg.same_grid(&prev.f) {
        return Err(Error::GridMismatch);
    }
    let step = prev.step + 1;
    let f = prev.f.values();
    let den = wg.weighted_mean(f);
    if !(den > T::zero()) {
        return unstable(
            step,
            InstabilityKind::NonPositiveNorm {
                denominator: den.as_f64(),
            },
        );
    }
    let fw: Vec<T> = f
        .iter()
        .zip(wg.perturbation())
        .map(|(&a, &b)| a * b)
        .collect();
    let energy = wg.weighted_mean(&fw) / den;
    let limit = divergence_limit(wg.params().g());
    if !energy.is_finite() || energy.abs() > limit {
        return unstable(
            step,
            InstabilityKind::Diverged {
                energy: energy.as_f64(),
                limit: limit.as_f64(),
            },
        );
    }
    Ok(energy)
}

/// `1 − 2 ∫ₓ^∞ φ⁻² ∫_y^∞ φ² (w − e) f` for arbitrary samples of `w`.
pub(crate) fn f_update<T: Real>(wg: &WeightedGrid<T>, w: &[T], e: T, f_prev: &[T]) -> Vec<T> {
    let inner: Vec<T> = w.iter().zip(f_prev).map(|(&w, &f)| (w - e) * f).collect();
    let ratio = wg.tail_ratio(&inner);
    wg.tail_integral(&ratio)
        .into_iter()
        .map(|v| T::one() - T::two() * v)
        .collect()
}

/// One f-step. Errors with [`Error::Unstable`] when `f_n` is non-finite or
/// not strictly positive somewhere on the grid.
pub fn f_step<T: Real>(wg: &WeightedGrid<T>, prev: &FState<T>) -> Result<FState<T>> {
    let energy = f_energy(wg, prev)?;
    let step = prev.step + 1;
    let values = f_update(wg, wg.perturbation(), energy, prev.f.values());
    check_profile(wg, step, &values)?;
    Ok(FState {
        step,
        f: SampledFunction::new(wg.grid().clone(), values)?,
        energy,
    })
}

fn check_profile<T: Real>(wg: &WeightedGrid<T>, step: usize, values: &[T]) -> Result<()> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return unstable(step, InstabilityKind::NonFinite { index });
    }
    let (index, &value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("grid is never empty");
    if value <= T::zero() {
        let x = wg.grid().points()[index].as_f64();
        return unstable(
            step,
            InstabilityKind::NegativeProfile {
                index,
                x,
                value: value.as_f64(),
            },
        );
    }
    Ok(())
}

/// Outcome of an f-iteration run.
#[derive(Clone, Debug)]
pub struct FRun<T> {
    /// Energies of the steps that completed; the profile is the last
    /// accepted `f_n` (or `f₀` if step 1 already failed).
    pub trace: IterationTrace<T>,
    /// `min_x f_n` per completed step.
    pub min_profile: Vec<T>,
    pub instability: Option<Instability>,
}

impl<T: Real> FRun<T> {
    pub fn is_stable(&self) -> bool {
        self.instability.is_none()
    }
}

/// Runs up to `n_iters` f-steps from `f₀ ≡ 1`, stopping at the first
/// instability. Only configuration errors are returned as `Err`.
///
/// When step `n` produces a sign change its energy `ℰ_n` is still recorded,
/// since it was computed from the valid `f_{n−1}`.
pub fn solve<T: Real>(wg: &WeightedGrid<T>, n_iters: usize) -> Result<FRun<T>> {
    if n_iters == 0 {
        return Err(Error::NoIterations);
    }
    let mut state = FState::initial(wg);
    let mut energies = Vec::with_capacity(n_iters);
    let mut min_profile = Vec::with_capacity(n_iters);
    let mut instability = None;

    for _ in 0..n_iters {
        let energy = match f_energy(wg, &state) {
            Ok(e) => e,
            Err(Error::Unstable(report)) => {
                instability = Some(report);
                break;
            }
            Err(e) => return Err(e),
        };
        energies.push(energy);
        match f_step(wg, &state) {
            Ok(next) => {
                min_profile.push(next.f.min());
                state = next;
            }
            Err(Error::Unstable(report)) => {
                instability = Some(report);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    if energies.is_empty() {
        // Step 1 cannot fail on the norm (f₀ ≡ 1) but may still diverge.
        let report = instability.expect("empty run implies an instability");
        if let InstabilityKind::Diverged { energy, limit } = report.kind {
            return Err(Error::Diverged {
                step: report.step,
                energy,
                limit,
            });
        }
        unreachable!("step 1 can only fail by divergence before producing an energy");
    }
    let trace = IterationTrace::new(Scheme::F, wg, energies, state.f);
    Ok(FRun {
        trace,
        min_profile,
        instability,
    })
}
