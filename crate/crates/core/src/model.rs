//! Closed-form pieces of the double-well problem on the half-line `x >= 0`.
//!
//! `V(x) = g²(x² − 1)²/2`. Two trial functions are provided:
//!
//! * `φ₊ = e^{−g S₀(x)} · 2/(1+x)`, an exact eigenfunction of `T + V + u` with
//!   eigenvalue `g`, where `u = 1/(1+x)²`;
//! * `φ_ev`, the even combination of `φ₊` and its mirror `φ₋`, which obeys
//!   `ψ'(0) = 0` and is an eigenfunction of `T + V + w_ev` with eigenvalue `g`.
//!
//! Everything is evaluated with `log φ²` alongside `φ`, since `φ²` spans
//! hundreds of orders of magnitude for large `g`. Callers reflect negative
//! coordinates to `|x|` before calling in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Grid;
use crate::scalar::Real;

/// Which trial state the downstream solvers work with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum State {
    /// Lowest even eigenstate, trial function `φ_ev`, perturbation `w_ev`.
    Even,
    /// Auxiliary "+" state built from `φ₊` alone, perturbation `u`.
    Plus,
}

impl State {
    pub fn label(self) -> &'static str {
        match self {
            State::Even => "ev",
            State::Plus => "plus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T> {
    g: T,
    state: State,
}

impl<T: Real> ModelParams<T> {
    pub fn new(g: T, state: State) -> Result<Self> {
        if !(g.is_finite() && g > T::zero()) {
            return Err(Error::NonPositiveCoupling(g.as_f64()));
        }
        Ok(Self { g, state })
    }

    #[inline]
    pub fn g(&self) -> T {
        self.g
    }

    #[inline]
    pub fn state(&self) -> State {
        self.state
    }

    /// Trial function, its log-square and the perturbation potential at `x`.
    pub fn trial(&self, x: T) -> TrialEval<T> {
        match self.state {
            State::Even => phi_ev(x, self.g),
            State::Plus => phi_plus(x, self.g),
        }
    }

    #[inline]
    pub fn log_phi_sq(&self, x: T) -> T {
        match self.state {
            State::Even => log_phi_ev_sq(x, self.g),
            State::Plus => log_phi_plus_sq(x, self.g),
        }
    }

    /// Perturbation potential: `w_ev` for the even state, `u` for "+".
    #[inline]
    pub fn perturbation(&self, x: T) -> T {
        match self.state {
            State::Even => w_ev(x, self.g),
            State::Plus => u(x),
        }
    }
}

/// Trial-function sample at one coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialEval<T> {
    pub log_phi_sq: T,
    pub phi: T,
    /// Perturbation potential paired with this trial function.
    pub w: T,
}

impl<T: Real> TrialEval<T> {
    fn from_log(log_phi_sq: T, w: T) -> Self {
        Self {
            log_phi_sq,
            phi: (T::half() * log_phi_sq).exp(),
            w,
        }
    }
}

pub fn potential<T: Real>(x: T, g: T) -> T {
    let s = x * x - T::one();
    T::half() * g * g * s * s
}

/// `S₀(x) = (x−1)²(x+2)/3`, with `S₀' = x² − 1`.
pub fn s0<T: Real>(x: T) -> T {
    debug_assert!(x >= T::zero(), "s0 is defined on x >= 0");
    let d = x - T::one();
    d * d * (x + T::two()) / T::lit(3.0)
}

#[inline]
pub fn s0_prime<T: Real>(x: T) -> T {
    x * x - T::one()
}

/// `u(x) = 1/(1+x)²`.
pub fn u<T: Real>(x: T) -> T {
    let d = T::one() + x;
    T::one() / (d * d)
}

/// `(g−1)/(g+1)`, the weight of `φ₋` in the even trial function.
#[inline]
pub fn mixing<T: Real>(g: T) -> T {
    (g - T::one()) / (g + T::one())
}

/// Tunnelling factor `e^{−4g/3}`.
#[inline]
pub fn tunnel_factor<T: Real>(g: T) -> T {
    (-T::lit(4.0) * g / T::lit(3.0)).exp()
}

fn log_phi_plus_sq<T: Real>(x: T, g: T) -> T {
    -T::two() * g * s0(x) + T::two() * (T::two() / (T::one() + x)).ln()
}

/// `e^{2g S₀(x) − 4g/3}`, which lies in `(0, 1]` on `[0, 1]`.
fn mirror_ratio<T: Real>(x: T, g: T) -> T {
    (T::two() * g * s0(x) - T::lit(4.0) * g / T::lit(3.0)).exp()
}

fn log_phi_ev_sq<T: Real>(x: T, g: T) -> T {
    let c = mixing(g);
    let base = log_phi_plus_sq(x, g);
    if x < T::one() {
        base + T::two() * (c * mirror_ratio(x, g)).ln_1p()
    } else {
        base + T::two() * (c * tunnel_factor(g)).ln_1p()
    }
}

pub fn phi_plus<T: Real>(x: T, g: T) -> TrialEval<T> {
    TrialEval::from_log(log_phi_plus_sq(x, g), u(x))
}

/// `φ₋(x) = e^{−4g/3} e^{g S₀(x)} · 2/(1+x)`; only used on `[0, 1]`.
pub fn phi_minus<T: Real>(x: T, g: T) -> T {
    let expo = g * s0(x) - T::lit(4.0) * g / T::lit(3.0);
    expo.exp() * T::two() / (T::one() + x)
}

/// Even trial function. At `x = 1` the right branch is used; both branches
/// agree there.
pub fn phi_ev<T: Real>(x: T, g: T) -> TrialEval<T> {
    TrialEval::from_log(log_phi_ev_sq(x, g), w_ev(x, g))
}

/// `ĝ_ev(x)` on `[0, 1)`, zero for `x >= 1`.
pub fn g_hat_ev<T: Real>(x: T, g: T) -> T {
    if x >= T::one() {
        return T::zero();
    }
    g_hat_left(x, g)
}

fn g_hat_left<T: Real>(x: T, g: T) -> T {
    let e = mirror_ratio(x, g);
    let gm = g - T::one();
    T::two() * g * gm * e / ((g + T::one()) + gm * e)
}

pub fn w_ev<T: Real>(x: T, g: T) -> T {
    u(x) + g_hat_ev(x, g)
}

/// Size of the discontinuity of `w_ev` at `x = 1`, `w_ev(1⁻) − w_ev(1⁺)`.
pub fn w_ev_jump<T: Real>(g: T) -> T {
    g_hat_left(T::one(), g)
}

/// One violated sample in a [`ConditionReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation<T> {
    pub index: usize,
    pub x: T,
    pub w: T,
}

/// Result of sampling `w` against `w > 0`, `w' < 0` and `w(∞) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport<T> {
    pub g: T,
    pub state: State,
    pub positive: bool,
    pub decreasing: bool,
    pub decays: bool,
    pub first_negative: Option<Violation<T>>,
    pub first_increase: Option<Violation<T>>,
    pub min_w: T,
    pub tail_w: T,
    /// `w(1⁻) − w(1⁺)`; zero for the "+" state.
    pub jump_at_one: T,
}

impl<T> ConditionReport<T> {
    pub fn all_pass(&self) -> bool {
        self.positive && self.decreasing && self.decays
    }
}

/// Relative size `|w(x_max)| / max|w|` below which the tail counts as decayed.
pub const DECAY_THRESHOLD: f64 = 0.1;

/// Samples the perturbation potential on `grid` and checks the three
/// convergence hypotheses of the f-iteration. Monotonicity is checked on
/// `[0, 1)` and `[1, x_max]` separately so the jump at `x = 1` is not
/// reported as an increase.
pub fn check_trial_conditions<T: Real>(
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> ConditionReport<T> {
    let xs = grid.points();
    let ws: Vec<T> = xs.iter().map(|&x| params.perturbation(x)).collect();

    let first_negative = ws.iter().position(|&w| w <= T::zero()).map(|i| Violation {
        index: i,
        x: xs[i],
        w: ws[i],
    });

    let mut first_increase = None;
    for i in 1..xs.len() {
        let same_piece = (xs[i - 1] < T::one()) == (xs[i] < T::one());
        if same_piece && ws[i] >= ws[i - 1] {
            first_increase = Some(Violation {
                index: i,
                x: xs[i],
                w: ws[i],
            });
            break;
        }
    }

    let min_w = ws.iter().copied().fold(T::infinity(), T::min);
    let max_abs = ws.iter().fold(T::zero(), |m, w| m.max(w.abs()));
    let tail_w = *ws.last().expect("grid is never empty");
    let decays = tail_w.abs() <= T::lit(DECAY_THRESHOLD) * max_abs;

    let jump_at_one = match params.state() {
        State::Even => w_ev_jump(params.g()),
        State::Plus => T::zero(),
    };

    ConditionReport {
        g: params.g(),
        state: params.state(),
        positive: first_negative.is_none(),
        decreasing: first_increase.is_none(),
        decays,
        first_negative,
        first_increase,
        min_w,
        tail_w,
        jump_at_one,
    }
}
