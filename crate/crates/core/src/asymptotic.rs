//! Exact 1/g expansion of the "+" state.
//!
//! The logarithmic derivative is expanded as
//! `S' = g S₀' + S₁' + Σ_{m≥1} S'_{m+1} g^{−m}` with
//!
//! ```text
//! S'_{m+1}(x) = ξ² / 2^{4m} · Σ_{l=0}^{2m−1} β_l(m) ξ^l,      ξ = 2/(1+x)
//! ```
//!
//! The integer coefficients `β_l(m)` form a pyramid built row by row, and the
//! energy coefficients are `ε₁ = 1/4`, `ε_{m+1} = β₀(m+1) / 2^{4m+2}`. All
//! of this is done in exact big-integer arithmetic; floats only appear when
//! a partial sum or `S'` is evaluated.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rows generated by [`BetaPyramid::default`].
pub const DEFAULT_ROWS: usize = 45;

/// One pyramid row, `l = 0..2m−1`, split as `β = β⁰ + Δβ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BetaRow {
    pub m: usize,
    pub beta: Vec<BigInt>,
    pub beta0: Vec<BigInt>,
    pub delta: Vec<BigInt>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BetaPyramid {
    rows: Vec<BetaRow>,
}

impl Default for BetaPyramid {
    fn default() -> Self {
        Self::generate(DEFAULT_ROWS)
    }
}

impl BetaPyramid {
    /// Row 1 only: `β(1) = [1, 1]`.
    pub fn seed() -> Self {
        let one = vec![BigInt::one(), BigInt::one()];
        let row = BetaRow {
            m: 1,
            beta: one.clone(),
            beta0: one,
            delta: vec![BigInt::zero(); 2],
        };
        Self { rows: vec![row] }
    }

    /// Rows `1..=rows` (at least row 1).
    pub fn generate(rows: usize) -> Self {
        extend_pyramid(Self::seed(), rows)
    }

    /// Highest row index `m` available.
    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[BetaRow] {
        &self.rows
    }

    pub fn row(&self, m: usize) -> Option<&BetaRow> {
        m.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    fn beta(&self, m: usize) -> &[BigInt] {
        &self.rows[m - 1].beta
    }

    fn require(&self, m: usize) -> Result<&BetaRow> {
        self.row(m).ok_or(Error::InsufficientTerms {
            need: m,
            have: self.depth(),
        })
    }

    /// Appends row `m + 1` from rows `1..=m`.
    fn push_next(&mut self) {
        let m = self.depth();
        let top = self.beta(m);
        let width = 2 * m + 2;

        // β⁰_L = Σ_{l ≥ max(0, L−2)} β_l(m)(l+4): suffix sums over l.
        let direct: Vec<BigInt> = top
            .iter()
            .enumerate()
            .map(|(l, b)| b * BigInt::from(l + 4))
            .collect();

        // Δβ_L = Σ_{l ≥ max(1, L−2)} c_l with
        // c_l = Σ_{n=1}^{m−1} Σ_i 2 β_i(n) β_{l−i−1}(m−n).
        let mut cross = vec![BigInt::zero(); 2 * m];
        for (l, c) in cross.iter_mut().enumerate().skip(1) {
            for n in 1..m {
                let (a, b) = (self.beta(n), self.beta(m - n));
                let lo = l.saturating_sub(2 * (m - n));
                let hi = (2 * n - 1).min(l - 1);
                for i in lo..=hi {
                    *c += &a[i] * &b[l - i - 1];
                }
            }
            *c *= 2;
        }

        let suffix = |v: &[BigInt]| {
            let mut out = vec![BigInt::zero(); v.len() + 1];
            for l in (0..v.len()).rev() {
                out[l] = &out[l + 1] + &v[l];
            }
            out
        };
        let direct_tail = suffix(&direct);
        let cross_tail = suffix(&cross);

        let mut beta0 = Vec::with_capacity(width);
        let mut delta = Vec::with_capacity(width);
        for big_l in 0..width {
            let lo = big_l.saturating_sub(2);
            beta0.push(direct_tail[lo].clone());
            delta.push(cross_tail[lo.max(1)].clone());
        }
        let beta = beta0.iter().zip(&delta).map(|(a, b)| a + b).collect();
        self.rows.push(BetaRow {
            m: m + 1,
            beta,
            beta0,
            delta,
        });
    }

    /// Rows as decimal strings, `l` ascending.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row {
            m: usize,
            beta: Vec<String>,
            beta0: Vec<String>,
            delta: Vec<String>,
        }
        let strs = |v: &[BigInt]| v.iter().map(BigInt::to_string).collect();
        let rows: Vec<Row> = self
            .rows
            .iter()
            .map(|r| Row {
                m: r.m,
                beta: strs(&r.beta),
                beta0: strs(&r.beta0),
                delta: strs(&r.delta),
            })
            .collect();
        serde_json::json!({ "rows": rows })
    }
}

/// Extends `p` through row `target_m`. Rows already present are kept.
pub fn extend_pyramid(mut p: BetaPyramid, target_m: usize) -> BetaPyramid {
    while p.depth() < target_m {
        p.push_next();
    }
    p
}

/// `ε_m` as an exact dyadic rational.
pub fn epsilon(p: &BetaPyramid, m: usize) -> Result<BigRational> {
    match m {
        0 => Err(Error::InsufficientTerms { need: 1, have: 0 }),
        1 => Ok(BigRational::new(BigInt::one(), BigInt::from(4))),
        _ => {
            let row = p.require(m)?;
            let den = BigInt::one() << (4 * (m - 1) + 2);
            Ok(BigRational::new(row.beta[0].clone(), den))
        }
    }
}

/// Nearest `f64` to an exact rational.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn to_real<T: Real>(q: &BigRational) -> T {
    T::lit(rational_to_f64(q))
}

/// `ε₁, ε₂, ...` up to the pyramid depth.
#[derive(Clone, Debug)]
pub struct EpsilonSeries {
    terms: Vec<BigRational>,
}

impl EpsilonSeries {
    pub fn from_pyramid(p: &BetaPyramid) -> Self {
        let terms = (1..=p.depth())
            .map(|m| epsilon(p, m).expect("row exists"))
            .collect();
        Self { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `ε_m`, 1-based.
    pub fn term(&self, m: usize) -> Option<&BigRational> {
        m.checked_sub(1).and_then(|i| self.terms.get(i))
    }

    pub fn terms(&self) -> &[BigRational] {
        &self.terms
    }

    fn require(&self, n: usize) -> Result<()> {
        if n + 1 > self.len() {
            return Err(Error::InsufficientTerms {
                need: n + 1,
                have: self.len(),
            });
        }
        Ok(())
    }
}

/// `ℰ₊^N = Σ_{m=0}^{N} ε_{m+1} / g^m`.
pub fn partial_sum<T: Real>(eps: &EpsilonSeries, g: T, n: usize) -> Result<T> {
    eps.require(n)?;
    Ok(partial_sums(eps, g).swap_remove(n))
}

/// `ℰ₊^N` for every `N` the series supports.
pub fn partial_sums<T: Real>(eps: &EpsilonSeries, g: T) -> Vec<T> {
    let inv = T::one() / g;
    let mut pow = T::one();
    let mut acc = T::zero();
    eps.terms
        .iter()
        .map(|q| {
            acc += to_real::<T>(q) * pow;
            pow *= inv;
            acc
        })
        .collect()
}

pub fn partial_sum_exact(eps: &EpsilonSeries, g: &BigRational, n: usize) -> Result<BigRational> {
    eps.require(n)?;
    let mut pow = BigRational::one();
    let mut acc = BigRational::zero();
    for q in &eps.terms[..=n] {
        acc += q * &pow;
        pow /= g;
    }
    Ok(acc)
}

/// How the stationary window of the partial sums is delimited.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PlateauCriterion {
    /// `|ℰ₊^N − ℰ₊^{N−1}| < delta`.
    Increment(f64),
    /// `ℰ₊^N` agrees with the optimal partial sum when both are rounded to
    /// this many decimals.
    Digits(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlateauReport<T> {
    pub criterion: PlateauCriterion,
    /// `N` with the smallest increment (optimal truncation).
    pub n_star: usize,
    pub min_increment: T,
    /// `ℰ₊^{N*}`.
    pub value: T,
    /// Inclusive `[N_min, N_max]`, `None` if the criterion admits no `N`.
    pub window: Option<(usize, usize)>,
}

impl<T> PlateauReport<T> {
    pub fn n_min(&self) -> Option<usize> {
        self.window.map(|w| w.0)
    }

    pub fn n_max(&self) -> Option<usize> {
        self.window.map(|w| w.1)
    }
}

/// Decimals resolvable when the series is only meaningful up to
/// `e^{−4g/3}`: `⌊4g / (3 ln 10)⌋ + 1`.
pub fn resolvable_digits(g: f64) -> u32 {
    (4.0 * g / (3.0 * std::f64::consts::LN_10)).floor().max(0.0) as u32 + 1
}

/// Smallest increment of the partial sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Truncation<T> {
    /// `N` minimising `|ℰ₊^N − ℰ₊^{N−1}|`.
    pub n_star: usize,
    pub min_increment: T,
    /// `ℰ₊^{N*}`.
    pub value: T,
}

fn short(eps: &EpsilonSeries) -> Error {
    Error::InsufficientTerms {
        need: eps.len() + 1,
        have: eps.len(),
    }
}

fn truncation_of<T: Real>(eps: &EpsilonSeries, sums: &[T]) -> Result<Truncation<T>> {
    let last = sums
        .len()
        .checked_sub(1)
        .filter(|&l| l >= 2)
        .ok_or(Error::InsufficientTerms {
            need: 3,
            have: sums.len(),
        })?;
    let inc = |n: usize| (sums[n] - sums[n - 1]).abs();
    let n_star = (1..=last)
        .min_by(|&a, &b| inc(a).partial_cmp(&inc(b)).unwrap())
        .expect("non-empty range");
    if n_star == last {
        return Err(short(eps));
    }
    Ok(Truncation {
        n_star,
        min_increment: inc(n_star),
        value: sums[n_star],
    })
}

/// Optimal truncation point of the series at coupling `g`. Fails with
/// [`Error::InsufficientTerms`] when the smallest increment is the last one
/// generated, since the turning point could then lie beyond it.
pub fn optimal_truncation<T: Real>(eps: &EpsilonSeries, g: T) -> Result<Truncation<T>> {
    truncation_of(eps, &partial_sums(eps, g))
}

/// Optimal truncation and stationary window of `ℰ₊^N` at coupling `g`.
///
/// Fails with [`Error::InsufficientTerms`] if the smallest increment or the
/// window sits at the end of the generated series.
pub fn plateau<T: Real>(
    eps: &EpsilonSeries,
    g: T,
    criterion: PlateauCriterion,
) -> Result<PlateauReport<T>> {
    let owned = partial_sums(eps, g);
    let sums: &[T] = &owned;
    let Truncation {
        n_star,
        min_increment,
        value,
    } = truncation_of(eps, sums)?;
    let last = sums.len() - 1;
    let inc = |n: usize| (sums[n] - sums[n - 1]).abs();

    let accept: Box<dyn Fn(usize) -> bool> = match criterion {
        PlateauCriterion::Increment(delta) => {
            let delta = T::lit(delta);
            Box::new(move |n| n >= 1 && inc(n) < delta)
        }
        PlateauCriterion::Digits(d) => {
            let scale = T::lit(10f64.powi(d as i32));
            let target = (sums[n_star] * scale).round();
            Box::new(move |n| (sums[n] * scale).round() == target)
        }
    };
    let window = if accept(n_star) {
        let mut lo = n_star;
        while lo > 0 && accept(lo - 1) {
            lo -= 1;
        }
        let mut hi = n_star;
        while hi < last && accept(hi + 1) {
            hi += 1;
        }
        if hi == last {
            return Err(short(eps));
        }
        Some((lo, hi))
    } else {
        None
    };

    Ok(PlateauReport {
        criterion,
        n_star,
        min_increment,
        value,
        window,
    })
}

/// `|ε_{N+1} / g^N|` for `N = 0..len`.
pub fn term_magnitudes<T: Real>(eps: &EpsilonSeries, g: T) -> Vec<T> {
    let inv = T::one() / g;
    let mut pow = T::one();
    eps.terms
        .iter()
        .map(|q| {
            let t = to_real::<T>(&q.abs()) * pow;
            pow *= inv;
            t
        })
        .collect()
}

fn xi<T: Real>(x: T) -> T {
    T::two() / (T::one() + x)
}

fn dyadic<T: Real>(b: &BigInt, shift: usize) -> T {
    T::lit(b.to_f64().unwrap_or(f64::NAN)) / T::two().powi(shift as i32)
}

/// `S'_{m+1}(x)` for `m ≥ 1`.
pub fn s_prime<T: Real>(p: &BetaPyramid, m: usize, x: T) -> Result<T> {
    let row = p.require(m)?;
    let z = xi(x);
    let poly = row
        .beta
        .iter()
        .rev()
        .fold(T::zero(), |acc, b| acc * z + dyadic::<T>(b, 4 * m));
    Ok(z * z * poly)
}

/// `S''_{m+1}(x)`, differentiated in ξ with `dξ/dx = −ξ²/2`.
pub fn s_double_prime<T: Real>(p: &BetaPyramid, m: usize, x: T) -> Result<T> {
    let row = p.require(m)?;
    let z = xi(x);
    let poly = row
        .beta
        .iter()
        .enumerate()
        .rev()
        .fold(T::zero(), |acc, (l, b)| {
            acc * z + dyadic::<T>(b, 4 * m + 1) * T::from_usize(l + 2)
        });
    Ok(-z * z * z * poly)
}

/// `Σ_{m=1}^{order} S'_{m+1}(x) / g^m`.
pub fn s_prime_series<T: Real>(p: &BetaPyramid, x: T, order: usize, g: T) -> Result<T> {
    let mut acc = T::zero();
    let mut pow = T::one();
    for m in 1..=order {
        pow /= g;
        acc += s_prime(p, m, x)? * pow;
    }
    Ok(acc)
}

/// Residual of the order-`g^{−m}` equation at `x`:
///
/// ```text
/// m = 0:  S₀' S₂' + u − ε₁
/// m ≥ 1:  S₀' S'_{m+2} − ½ S''_{m+1} + S₁' S'_{m+1} − ε_{m+1}
///         + ½ Σ_{n=1}^{m−1} S'_{n+1} S'_{m+1−n}
/// ```
///
/// with `S₀' = x² − 1`, `S₁' = 1/(1+x)`, `u = 1/(1+x)²`. Needs rows
/// through `m + 1`.
pub fn recurrence_residual<T: Real>(p: &BetaPyramid, m: usize, x: T) -> Result<T> {
    let eps = |k: usize| epsilon(p, k).map(|q| to_real::<T>(&q));
    let s0p = x * x - T::one();
    let s1p = T::one() / (T::one() + x);
    if m == 0 {
        return Ok(s0p * s_prime(p, 1, x)? + s1p * s1p - eps(1)?);
    }
    let mut conv = T::zero();
    for n in 1..m {
        conv += s_prime(p, n, x)? * s_prime(p, m - n, x)?;
    }
    Ok(
        s0p * s_prime(p, m + 1, x)? - T::half() * s_double_prime(p, m, x)?
            + s1p * s_prime(p, m, x)?
            - eps(m + 1)?
            + T::half() * conv,
    )
}
