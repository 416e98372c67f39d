//! Finite-difference reference eigensolver for `H = −½ d²/dx² + V`.
//!
//! Only the even sector is needed, so the problem is solved on `[0, L]` with
//! `ψ'(0) = 0` and `ψ(L) = 0`. Vertices sit at `x_i = i h`, `h = L/n`,
//! `i = 0..n−1`; the ghost value `ψ_{−1} = ψ_1` enforces the Neumann
//! condition. The resulting matrix is made symmetric by rescaling `ψ_0` with
//! `√½`. The lowest eigenvalue is bracketed by Sturm counts, refined by
//! bisection, and the O(h²) error is removed by Richardson extrapolation over
//! `n` and `2n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::potential;
use crate::scalar::Real;

/// Smallest accepted `n_points`.
pub const MIN_POINTS: usize = 2000;
pub const DEFAULT_POINTS: usize = 4000;
/// `V(L) ≥ BOUNDARY_FACTOR · g` at the outer wall.
pub const BOUNDARY_FACTOR: f64 = 50.0;
/// Never truncate inside this half-width.
pub const MIN_HALF_WIDTH: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleConfig<T> {
    pub half_width: T,
    pub n_points: usize,
    pub parity: Parity,
}

/// Half-width where `V = BOUNDARY_FACTOR · g`.
fn wall<T: Real>(g: T) -> T {
    (T::one() + (T::two() * T::lit(BOUNDARY_FACTOR) / g).sqrt()).sqrt()
}

impl<T: Real> OracleConfig<T> {
    /// Default domain and resolution for coupling `g`.
    pub fn for_coupling(g: T) -> Self {
        Self {
            half_width: wall(g).max(T::lit(MIN_HALF_WIDTH)),
            n_points: DEFAULT_POINTS,
            parity: Parity::Even,
        }
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    pub fn validate(&self, g: T) -> Result<()> {
        if !(g > T::zero()) || !g.is_finite() {
            return Err(Error::NonPositiveCoupling(g.as_f64()));
        }
        if self.n_points < MIN_POINTS {
            return Err(Error::OracleConfig(format!(
                "n_points must be at least {MIN_POINTS}, got {}",
                self.n_points
            )));
        }
        let need = T::lit(BOUNDARY_FACTOR) * g;
        // Tolerate the last-bit rounding of `wall` itself.
        if !(potential(self.half_width, g) >= need * (T::one() - T::lit(1e-12))) {
            return Err(Error::OracleConfig(format!(
                "half-width {} too small: V(L) must reach {} g",
                self.half_width, BOUNDARY_FACTOR
            )));
        }
        Ok(())
    }
}

/// Symmetric tridiagonal matrix, `diag[i]` and `off[i] = A[i][i+1]`.
#[derive(Clone, Debug)]
pub struct Tridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: T) -> usize {
        let tiny = T::min_positive_value().sqrt();
        let mut count = 0;
        let mut d = T::one();
        for i in 0..self.diag.len() {
            let coupling = if i == 0 {
                T::zero()
            } else {
                self.off[i - 1] * self.off[i - 1] / d
            };
            d = self.diag[i] - lambda - coupling;
            if d == T::zero() {
                d = -tiny;
            }
            if d < T::zero() {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (T, T) {
        let n = self.diag.len();
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let left = if i > 0 {
                self.off[i - 1].abs()
            } else {
                T::zero()
            };
            let right = if i + 1 < n {
                self.off[i].abs()
            } else {
                T::zero()
            };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Lowest eigenvalue by bisection on the Sturm count.
    pub fn lowest_eigenvalue(&self) -> T {
        let (mut lo, mut hi) = self.gershgorin();
        loop {
            let mid = T::half() * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Solves `(A − shift) x = rhs` by the Thomas algorithm.
    fn solve_shifted(&self, shift: T, rhs: &[T]) -> Option<Vec<T>> {
        let n = self.diag.len();
        let mut c = vec![T::zero(); n];
        let mut x = rhs.to_vec();
        let mut pivot = self.diag[0] - shift;
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - shift - self.off[i - 1] * c[i - 1];
                x[i] = x[i] - self.off[i - 1] * x[i - 1];
            }
            if pivot == T::zero() || !pivot.is_finite() {
                return None;
            }
            if i + 1 < n {
                c[i] = self.off[i] / pivot;
            }
            x[i] /= pivot;
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - c[i] * x[i + 1];
        }
        Some(x)
    }

    /// Unit eigenvector for an eigenvalue estimate by inverse iteration.
    pub fn eigenvector(&self, lambda: T) -> Result<Vec<T>> {
        let n = self.diag.len();
        let scale = self.gershgorin().1.abs().max(T::one());
        let shift = lambda - scale * T::epsilon() * T::lit(64.0);
        let mut v = vec![T::one() / T::from_usize(n).sqrt(); n];
        for _ in 0..8 {
            let next = self
                .solve_shifted(shift, &v)
                .ok_or_else(|| Error::OracleConfig("singular shifted matrix".into()))?;
            let norm = next
                .iter()
                .map(|&a| a * a)
                .fold(T::zero(), |a, b| a + b)
                .sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::OracleConfig("inverse iteration failed".into()));
            }
            let next: Vec<T> = next.into_iter().map(|a| a / norm).collect();
            let change = next
                .iter()
                .zip(&v)
                .map(|(&a, &b)| (a - b).abs())
                .fold(T::zero(), |a, b| a.max(b));
            v = next;
            if change < T::lit(1e-10).max(T::epsilon() * T::lit(100.0)) {
                return Ok(v);
            }
        }
        Err(Error::OracleConfig(
            "inverse iteration did not converge".into(),
        ))
    }
}

/// Even-sector matrix on `n` vertices of `[0, L)`.
pub fn even_matrix<T: Real>(g: T, half_width: T, n: usize) -> Tridiagonal<T> {
    let h = half_width / T::from_usize(n);
    let k = T::one() / (h * h);
    let diag = (0..n)
        .map(|i| k + potential(T::from_usize(i) * h, g))
        .collect();
    let mut off = vec![-T::half() * k; n - 1];
    if n > 1 {
        off[0] = -T::FRAC_1_SQRT_2() * k;
    }
    Tridiagonal { diag, off }
}

/// Lowest even eigenvalue on a single grid, no extrapolation.
pub fn raw_energy<T: Real>(g: T, cfg: &OracleConfig<T>) -> Result<T> {
    cfg.validate(g)?;
    Ok(even_matrix(g, cfg.half_width, cfg.n_points).lowest_eigenvalue())
}

/// Ground-state energy, Richardson-extrapolated over `n` and `2n`.
pub fn ground_energy<T: Real>(g: T, cfg: &OracleConfig<T>) -> Result<T> {
    cfg.validate(g)?;
    let coarse = even_matrix(g, cfg.half_width, cfg.n_points).lowest_eigenvalue();
    let fine = even_matrix(g, cfg.half_width, 2 * cfg.n_points).lowest_eigenvalue();
    Ok((T::lit(4.0) * fine - coarse) / T::lit(3.0))
}

/// Ground state `(E, ψ)` on the single grid `cfg`, with `ψ` sampled at
/// `x_i = i L / n` and normalised so that `Σ ψ_i² h = 1` over `[0, L]`.
pub fn ground_state<T: Real>(g: T, cfg: &OracleConfig<T>) -> Result<(T, Vec<T>)> {
    cfg.validate(g)?;
    let m = even_matrix(g, cfg.half_width, cfg.n_points);
    let e = m.lowest_eigenvalue();
    let mut v = m.eigenvector(e)?;
    // Undo the √½ rescaling of ψ_0 and fix the sign.
    v[0] *= T::SQRT_2();
    let h = cfg.half_width / T::from_usize(cfg.n_points);
    let norm = (v
        .iter()
        .skip(1)
        .map(|&a| a * a)
        .fold(T::half() * v[0] * v[0], |a, b| a + b)
        * h)
        .sqrt();
    let sign = if v[0] < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    Ok((e, v.into_iter().map(|a| sign * a / norm).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn energy(g: f64) -> f64 {
        ground_energy(g, &OracleConfig::for_coupling(g)).unwrap()
    }

    #[test]
    fn harmonic_oscillator() {
        // V = ½x² has E₀ = ½; use the same machinery with a quadratic well.
        let l = 12.0;
        let n = 4000;
        let h = l / n as f64;
        let k = 1.0 / (h * h);
        let mut m = even_matrix(1.0, l, n);
        for (i, d) in m.diag.iter_mut().enumerate() {
            let x = i as f64 * h;
            *d = k + 0.5 * x * x;
        }
        assert_abs_diff_eq!(m.lowest_eigenvalue(), 0.5, epsilon = 1e-5);
    }

    #[test]
    fn sturm_count_against_dense_characteristic() {
        // 2×2 block [[a, b], [b, c]] has eigenvalues (a+c)/2 ± sqrt(((a−c)/2)² + b²).
        let t = Tridiagonal {
            diag: vec![2.0, 5.0],
            off: vec![1.5],
        };
        let mid = 3.5;
        let r = (1.5f64 * 1.5 + 1.5 * 1.5).sqrt();
        assert_eq!(t.count_below(mid - r - 1e-9), 0);
        assert_eq!(t.count_below(mid - r + 1e-9), 1);
        assert_eq!(t.count_below(mid + r + 1e-9), 2);
        assert_abs_diff_eq!(t.lowest_eigenvalue(), mid - r, epsilon = 1e-14);
    }

    #[test]
    fn table_couplings() {
        assert_abs_diff_eq!(energy(1.0), 0.5689, epsilon = 1e-3);
        assert_abs_diff_eq!(energy(8.0), 7.72734, epsilon = 1e-4);
    }

    #[test]
    fn extrapolation_is_grid_converged() {
        for g in [0.05f64, 1.0, 3.0, 8.0] {
            let cfg = OracleConfig::for_coupling(g);
            let a = ground_energy(g, &cfg).unwrap();
            let b = ground_energy(g, &cfg.with_points(2 * cfg.n_points)).unwrap();
            assert!((a - b).abs() < 1e-6, "g={g}: {a} vs {b}");
        }
    }

    #[test]
    fn below_trial_energy() {
        for g in [0.3, 1.0, 2.0, 5.0, 9.0] {
            assert!(energy(g) < g);
        }
    }

    #[test]
    fn ground_state_is_nodeless_and_normalised() {
        let g = 3.0;
        let cfg = OracleConfig::for_coupling(g);
        let (e, psi) = ground_state(g, &cfg).unwrap();
        assert_abs_diff_eq!(e, raw_energy(g, &cfg).unwrap(), epsilon = 0.0);
        assert!(psi.iter().all(|&p| p > -1e-12));
        let h = cfg.half_width / cfg.n_points as f64;
        let norm: f64 = 0.5 * psi[0] * psi[0] + psi[1..].iter().map(|p| p * p).sum::<f64>();
        assert_abs_diff_eq!(norm * h, 1.0, epsilon = 1e-12);
        // Peak sits just inside the well minimum at moderate coupling.
        let peak = (0..psi.len())
            .max_by(|&a, &b| psi[a].partial_cmp(&psi[b]).unwrap())
            .unwrap();
        assert!((0.7..1.0).contains(&(peak as f64 * h)));
    }

    #[test]
    fn config_validation() {
        let good = OracleConfig::for_coupling(2.0);
        assert!(good.validate(2.0).is_ok());
        assert!(matches!(
            good.with_points(100).validate(2.0),
            Err(Error::OracleConfig(_))
        ));
        let narrow = OracleConfig {
            half_width: 1.2,
            ..good
        };
        assert!(matches!(narrow.validate(2.0), Err(Error::OracleConfig(_))));
        assert!(matches!(
            good.validate(-1.0),
            Err(Error::NonPositiveCoupling(_))
        ));
        for g in [0.01, 0.05, 1.0, 9.0, 50.0] {
            let c = OracleConfig::for_coupling(g);
            assert!(potential(c.half_width, g) >= BOUNDARY_FACTOR * g * (1.0 - 1e-12));
        }
    }

    #[test]
    fn single_precision_builds() {
        let cfg = OracleConfig::<f32>::for_coupling(2.0);
        let e = raw_energy(2.0f32, &cfg).unwrap();
        assert!((e - 1.4).abs() < 0.3);
    }
}
