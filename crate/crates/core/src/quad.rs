//! Grids and φ²-weighted quadrature on `[0, x_max]`.
//!
//! The half-line is cut at `x_max`, where the log-weight has fallen by
//! [`DEFAULT_LOG_WINDOW`] below its value at the origin. Each panel carries a
//! Gauss–Legendre rule plus its spectral partial-integration matrix, so
//! cumulative integrals are available at every node with the same accuracy
//! as full-panel sums. A grid point list contains the panel end points
//! (`0`, the split point `1`, `x_max`, ...) and the interior Gauss nodes;
//! integrands are only ever sampled at the Gauss nodes.
//!
//! Cumulative integrals are always formed as ratios
//! `φ⁻²(x) ∫ φ²(y) f(y) dy`, propagated panel by panel with factors
//! `e^{L(y) − L(x)}`, `L = log φ²`, so nothing overflows however far the weight
//! falls.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{s0, ModelParams};
use crate::scalar::Real;

pub const MIN_PANELS: usize = 16;
pub const DEFAULT_PANELS: usize = 64;
pub const DEFAULT_ORDER: usize = 16;
/// Log-weight drop at which the half-line is truncated (`e^{-70} ≈ 4e-31`).
pub const DEFAULT_LOG_WINDOW: f64 = 70.0;
const MIN_ORDER: usize = 2;
const MAX_ORDER: usize = 64;
/// One unit of `x` counts as much as this many units of log-weight change
/// when panels are placed.
const LOG_SCALE: f64 = 3.0;

/// Gauss–Legendre rule on `[-1, 1]` with the partial-integration matrix
/// `partial[i][j] = ∫_{-1}^{t_i} ℓ_j(s) ds` (`ℓ_j` the Lagrange basis on the
/// nodes).
#[derive(Clone, Debug)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    partial: Vec<Vec<T>>,
}

/// `(P_n(t), P_n'(t))`.
fn legendre<T: Real>(n: usize, t: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = t;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 1..n {
        let kf = T::from_usize(k);
        let p2 = ((T::two() * kf + T::one()) * t * p1 - kf * p0) / (kf + T::one());
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize(n);
    let dp = nf * (t * p1 - p0) / (t * t - T::one());
    (p1, dp)
}

/// `P_0(t), ..., P_{n}(t)`.
fn legendre_table<T: Real>(n: usize, t: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    if n >= 1 {
        out.push(t);
    }
    for k in 1..n {
        let kf = T::from_usize(k);
        let next = ((T::two() * kf + T::one()) * t * out[k] - kf * out[k - 1]) / (kf + T::one());
        out.push(next);
    }
    out
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(order: usize) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidOrder {
                got: order,
                min: MIN_ORDER,
                max: MAX_ORDER,
            });
        }
        let q = order;
        let qf = T::from_usize(q);
        let mut nodes = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        for i in (1..=q).rev() {
            let guess = (T::PI() * (T::from_usize(i) - T::lit(0.25)) / (qf + T::half())).cos();
            let mut t = guess;
            for _ in 0..100 {
                let (p, dp) = legendre(q, t);
                let step = p / dp;
                t -= step;
                if step.abs() <= T::epsilon() * T::lit(4.0) {
                    break;
                }
            }
            let (_, dp) = legendre(q, t);
            nodes.push(t);
            weights.push(T::two() / ((T::one() - t * t) * dp * dp));
        }

        // Expand each Lagrange basis polynomial in Legendre polynomials
        // (exact under the rule itself), then integrate termwise using
        // ∫_{-1}^t P_k = (P_{k+1} − P_{k−1})/(2k+1).
        let tables: Vec<Vec<T>> = nodes.iter().map(|&t| legendre_table(q, t)).collect();
        let mut partial = vec![vec![T::zero(); q]; q];
        for (i, row) in partial.iter_mut().enumerate() {
            let p = &tables[i];
            let integrals: Vec<T> = (0..q)
                .map(|k| {
                    if k == 0 {
                        nodes[i] + T::one()
                    } else {
                        (p[k + 1] - p[k - 1]) / T::from_usize(2 * k + 1)
                    }
                })
                .collect();
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for k in 0..q {
                    let c = weights[j] * tables[j][k] * T::from_usize(2 * k + 1) / T::two();
                    acc += c * integrals[k];
                }
                *cell = acc;
            }
        }
        Ok(Self {
            nodes,
            weights,
            partial,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn partial(&self) -> &[Vec<T>] {
        &self.partial
    }

    pub fn integrate(&self, a: T, b: T, f: impl Fn(T) -> T) -> T {
        let half = (b - a) * T::half();
        let mid = (a + b) * T::half();
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&t, &w)| acc + w * f(mid + half * t))
            * half
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridOptions<T> {
    pub n_panels: usize,
    pub order: usize,
    /// Interior panel boundary separating the two smooth pieces. `1` for
    /// every production grid; other values exist to test the split.
    pub split: T,
    pub log_window: T,
}

impl<T: Real> Default for GridOptions<T> {
    fn default() -> Self {
        Self {
            n_panels: DEFAULT_PANELS,
            order: DEFAULT_ORDER,
            split: T::one(),
            log_window: T::lit(DEFAULT_LOG_WINDOW),
        }
    }
}

/// Composite Gauss–Legendre grid on `[0, x_max]`.
#[derive(Clone, Debug)]
pub struct Grid<T> {
    points: Vec<T>,
    bounds: Vec<T>,
    rule: GaussLegendre<T>,
    split: T,
}

impl<T: Real> Grid<T> {
    /// Builds a grid from explicit panel boundaries (strictly increasing,
    /// starting at 0).
    pub fn from_bounds(bounds: Vec<T>, order: usize, split: T) -> Result<Self> {
        if bounds.len() < 2 || bounds[0] != T::zero() {
            return Err(Error::InvalidGrid("panel bounds must start at 0".into()));
        }
        if bounds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(
                "panel bounds must increase strictly".into(),
            ));
        }
        let rule = GaussLegendre::new(order)?;
        let mut points = Vec::with_capacity((bounds.len() - 1) * (order + 1) + 1);
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            points.push(a);
            let half = (b - a) * T::half();
            let mid = (a + b) * T::half();
            points.extend(rule.nodes().iter().map(|&t| mid + half * t));
        }
        points.push(*bounds.last().unwrap());
        Ok(Self {
            points,
            bounds,
            rule,
            split,
        })
    }

    /// Every grid point in increasing order: panel end points and Gauss nodes.
    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn panel_bounds(&self) -> &[T] {
        &self.bounds
    }

    pub fn panel_count(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn rule(&self) -> &GaussLegendre<T> {
        &self.rule
    }

    pub fn x_max(&self) -> T {
        *self.bounds.last().unwrap()
    }

    pub fn split(&self) -> T {
        self.split
    }

    /// Whether `x = 1` is exactly a grid point.
    pub fn contains_one(&self) -> bool {
        self.bounds.iter().any(|&b| b == T::one())
    }

    #[inline]
    pub fn endpoint_index(&self, panel: usize) -> usize {
        panel * (self.order() + 1)
    }

    #[inline]
    pub fn node_index(&self, panel: usize, j: usize) -> usize {
        panel * (self.order() + 1) + 1 + j
    }

    #[inline]
    pub fn is_node(&self, index: usize) -> bool {
        !index.is_multiple_of(self.order() + 1)
    }

    /// Indices of the Gauss nodes (the points integrands are sampled at).
    pub fn node_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.is_node(i))
    }

    /// Panel containing `x` (clamped to the grid).
    pub fn panel_of(&self, x: T) -> usize {
        let n = self.panel_count();
        let idx = self.bounds.partition_point(|&b| b <= x);
        idx.saturating_sub(1).min(n - 1)
    }
}

/// `∫₀ˣ |t² − 1| dt`, the accumulated log-weight slope of `φ₊²` per unit `g`.
fn slope_area<T: Real>(x: T) -> T {
    let three = T::lit(3.0);
    if x <= T::one() {
        x - x * x * x / three
    } else {
        T::two() / three + (x * x * x / three - x + T::two() / three)
    }
}

/// Inverts a monotone increasing function on `[lo, hi]` by bisection.
fn invert_monotone<T: Real>(f: impl Fn(T) -> T, target: T, mut lo: T, mut hi: T) -> T {
    for _ in 0..200 {
        let mid = (lo + hi) * T::half();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::half()
}

/// Smallest `x > 1` with `2g S₀(x) >= log_window + 2g S₀(0)`.
pub fn truncation_point<T: Real>(g: T, log_window: T) -> T {
    let target = log_window + T::two() * g * s0(T::zero());
    let f = |x: T| T::two() * g * s0(x);
    let mut hi = T::two();
    while f(hi) < target {
        hi *= T::two();
    }
    invert_monotone(f, target, T::one(), hi)
}

/// Grid with default order, split at `x = 1` and the default truncation.
pub fn build_grid<T: Real>(params: &ModelParams<T>, n_panels: usize) -> Result<Grid<T>> {
    build_grid_with(
        params,
        &GridOptions {
            n_panels,
            ..GridOptions::default()
        },
    )
}

/// Panels on `[0, split]` and `[split, x_max]`, half of them on each side.
/// Boundaries equidistribute `x + 2g ∫|t²−1|dt / LOG_SCALE`, so every panel
/// spans a bounded change in both `x` and the log-weight: panels bunch
/// where `φ²` varies fastest (near the origin and in the far tail for large
/// `g`) and stay evenly spaced where it is flat.
pub fn build_grid_with<T: Real>(params: &ModelParams<T>, opts: &GridOptions<T>) -> Result<Grid<T>> {
    if opts.n_panels < MIN_PANELS {
        return Err(Error::TooFewPanels {
            got: opts.n_panels,
            min: MIN_PANELS,
        });
    }
    let g = params.g();
    let x_max = truncation_point(g, opts.log_window);
    let split = opts.split;
    if !(split > T::zero() && split < x_max) {
        return Err(Error::InvalidGrid(
            "split point must lie inside (0, x_max)".into(),
        ));
    }
    let scale = T::two() * g / T::lit(LOG_SCALE);
    let monitor = |x: T| x + scale * slope_area(x);

    let n_left = opts.n_panels / 2;
    let n_right = opts.n_panels - n_left;
    let mut bounds = Vec::with_capacity(opts.n_panels + 1);
    let push_side = |lo: T, hi: T, n: usize, bounds: &mut Vec<T>| {
        let (m_lo, m_hi) = (monitor(lo), monitor(hi));
        for k in 0..n {
            if k == 0 {
                bounds.push(lo);
                continue;
            }
            let target = m_lo + (m_hi - m_lo) * T::from_usize(k) / T::from_usize(n);
            bounds.push(invert_monotone(monitor, target, lo, hi));
        }
    };
    push_side(T::zero(), split, n_left, &mut bounds);
    push_side(split, x_max, n_right, &mut bounds);
    bounds.push(x_max);
    Grid::from_bounds(bounds, opts.order, split)
}

/// Values on every point of a grid, evaluated off-grid by local cubic
/// interpolation within a panel. Outside `[0, x_max]` the end values are
/// returned.
#[derive(Clone, Debug)]
pub struct SampledFunction<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> SampledFunction<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Cubic Lagrange interpolation through the four nearest points of the
    /// panel containing `x`.
    pub fn eval(&self, x: T) -> T {
        let pts = self.grid.points();
        if x <= pts[0] {
            return self.values[0];
        }
        if x >= pts[pts.len() - 1] {
            return self.values[pts.len() - 1];
        }
        let panel = self.grid.panel_of(x);
        let start = self.grid.endpoint_index(panel);
        let end = start + self.grid.order() + 1;
        let pos = pts[start..=end].partition_point(|&p| p <= x) + start;
        let lo = pos.saturating_sub(2).max(start).min(end.saturating_sub(3));
        let idx = lo..lo + 4;
        let mut acc = T::zero();
        for i in idx.clone() {
            let mut l = T::one();
            for j in idx.clone() {
                if j != i {
                    l = l * (x - pts[j]) / (pts[i] - pts[j]);
                }
            }
            acc += l * self.values[i];
        }
        acc
    }
}

/// A grid paired with the trial-function weight `φ²` of one model.
///
/// All sweep methods take samples at every grid point (only the Gauss-node
/// entries are read) and return one value per grid point.
#[derive(Debug)]
pub struct WeightedGrid<T> {
    params: ModelParams<T>,
    grid: Arc<Grid<T>>,
    log_w: Vec<T>,
    w: Vec<T>,
    offset: T,
    quad_w: Vec<T>,
    total: T,
    sweeps: AtomicUsize,
}

impl<T: Real> Clone for WeightedGrid<T> {
    fn clone(&self) -> Self {
        Self {
            params: self.params,
            grid: Arc::clone(&self.grid),
            log_w: self.log_w.clone(),
            w: self.w.clone(),
            offset: self.offset,
            quad_w: self.quad_w.clone(),
            total: self.total,
            sweeps: AtomicUsize::new(self.sweeps.load(Ordering::Relaxed)),
        }
    }
}

impl<T: Real> WeightedGrid<T> {
    pub fn new(params: ModelParams<T>, grid: Arc<Grid<T>>) -> Self {
        Self::with_offset(params, grid, T::zero())
    }

    /// Convenience: default grid options with `n_panels` panels.
    pub fn build(params: ModelParams<T>, n_panels: usize) -> Result<Self> {
        Ok(Self::new(params, Arc::new(build_grid(&params, n_panels)?)))
    }

    /// Same model with `φ²` scaled by `e^{offset}`. Every ratio computed
    /// here is independent of the offset.
    pub fn with_log_offset(&self, offset: T) -> Self {
        Self::with_offset(self.params, Arc::clone(&self.grid), self.offset + offset)
    }

    fn with_offset(params: ModelParams<T>, grid: Arc<Grid<T>>, offset: T) -> Self {
        let pts = grid.points();
        let log_w: Vec<T> = pts.iter().map(|&x| params.log_phi_sq(x) + offset).collect();
        let w: Vec<T> = pts.iter().map(|&x| params.perturbation(x)).collect();
        let l_max = log_w.iter().copied().fold(T::neg_infinity(), T::max);
        let rule = grid.rule();
        let mut quad_w = vec![T::zero(); pts.len()];
        for p in 0..grid.panel_count() {
            let half = (grid.panel_bounds()[p + 1] - grid.panel_bounds()[p]) * T::half();
            for (j, &wj) in rule.weights().iter().enumerate() {
                let i = grid.node_index(p, j);
                quad_w[i] = half * wj * (log_w[i] - l_max).exp();
            }
        }
        let total = quad_w.iter().fold(T::zero(), |a, &b| a + b);
        Self {
            params,
            grid,
            log_w,
            w,
            offset,
            quad_w,
            total,
            sweeps: AtomicUsize::new(0),
        }
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    /// `log φ²` at every grid point.
    pub fn log_weight(&self) -> &[T] {
        &self.log_w
    }

    /// Perturbation potential at every grid point.
    pub fn perturbation(&self) -> &[T] {
        &self.w
    }

    /// Number of cumulative sweeps performed so far.
    pub fn sweeps(&self) -> usize {
        self.sweeps.load(Ordering::Relaxed)
    }

    fn count_sweep(&self) {
        self.sweeps.fetch_add(1, Ordering::Relaxed);
    }

    pub fn same_grid(&self, f: &SampledFunction<T>) -> bool {
        Arc::ptr_eq(&self.grid, f.grid())
    }

    /// `∫ φ² f / ∫ φ²` over `[0, x_max]`.
    pub fn weighted_mean(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.grid.len());
        let num = self
            .grid
            .node_indices()
            .fold(T::zero(), |acc, i| acc + self.quad_w[i] * values[i]);
        num / self.total
    }

    pub fn weighted_mean_fn(&self, f: impl Fn(T) -> T) -> T {
        let pts = self.grid.points();
        let num = self
            .grid
            .node_indices()
            .fold(T::zero(), |acc, i| acc + self.quad_w[i] * f(pts[i]));
        num / self.total
    }

    /// `φ⁻²(x) ∫₀ˣ φ² f` at every grid point.
    pub fn head_ratio(&self, values: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.grid.len()];
        self.head_sweep(values, &mut out, 0..self.grid.panel_count());
        self.count_sweep();
        out
    }

    /// `φ⁻²(x) ∫ₓ^∞ φ² f` at every grid point.
    pub fn tail_ratio(&self, values: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.grid.len()];
        self.tail_sweep(values, &mut out, 0..self.grid.panel_count());
        self.count_sweep();
        out
    }

    /// `φ⁻²(x) ∫₀ˣ φ² f` for `x < 1` and `−φ⁻²(x) ∫ₓ^∞ φ² f` for `x >= 1`.
    ///
    /// The two agree whenever `∫₀^∞ φ² f = 0`. The forward form is exact at
    /// the origin; the backward form stays bounded in the tail where `φ⁻²`
    /// explodes. Counts as one sweep: each half of the grid is visited once.
    pub fn hybrid_ratio(&self, values: &[T]) -> Vec<T> {
        let n = self.grid.panel_count();
        let bounds = self.grid.panel_bounds();
        let one = T::one();
        // Panels touching [0, 1) and [1, x_max] respectively.
        let head_end = bounds[1..]
            .iter()
            .position(|&b| b >= one)
            .map_or(n, |k| k + 1);
        let tail_start = bounds[..n].iter().rposition(|&a| a <= one).unwrap_or(0);

        let mut head = vec![T::zero(); self.grid.len()];
        let mut tail = vec![T::zero(); self.grid.len()];
        self.head_sweep(values, &mut head, 0..head_end);
        self.tail_sweep(values, &mut tail, tail_start..n);
        self.count_sweep();

        self.grid
            .points()
            .iter()
            .enumerate()
            .map(|(i, &x)| if x < one { head[i] } else { -tail[i] })
            .collect()
    }

    /// Plain `∫ₓ^{x_max} f` at every grid point.
    pub fn tail_integral(&self, values: &[T]) -> Vec<T> {
        let grid = &self.grid;
        let rule = grid.rule();
        let q = grid.order();
        let mut out = vec![T::zero(); grid.len()];
        let mut acc = T::zero();
        for p in (0..grid.panel_count()).rev() {
            let half = (grid.panel_bounds()[p + 1] - grid.panel_bounds()[p]) * T::half();
            let h: Vec<T> = (0..q).map(|j| values[grid.node_index(p, j)]).collect();
            let full = dot(rule.weights(), &h) * half;
            for (j, row) in rule.partial().iter().enumerate() {
                out[grid.node_index(p, j)] = acc + full - dot(row, &h) * half;
            }
            acc += full;
            out[grid.endpoint_index(p)] = acc;
        }
        self.count_sweep();
        out
    }

    /// `φ⁻²(x) ∫ₓ^∞ φ²(y) f(y) dy` for a callable `f` at an arbitrary `x`
    /// inside the grid.
    pub fn tail_ratio_integral(&self, f: impl Fn(T) -> T, x: T) -> T {
        let grid = &self.grid;
        let p = grid.panel_of(x);
        let n = grid.panel_count();
        let pts = grid.points();
        let mut samples = vec![T::zero(); grid.len()];
        for i in grid.endpoint_index(p + 1)..grid.len() {
            if grid.is_node(i) {
                samples[i] = f(pts[i]);
            }
        }
        let mut out = vec![T::zero(); grid.len()];
        self.tail_sweep(&samples, &mut out, (p + 1)..n);
        self.count_sweep();

        let b = grid.panel_bounds()[p + 1];
        let r_b = out[grid.endpoint_index(p + 1)];
        let l_x = self.params.log_phi_sq(x) + self.offset;
        let l_b = self.log_w[grid.endpoint_index(p + 1)];
        let local = grid.rule().integrate(x, b, |y| {
            ((self.params.log_phi_sq(y) + self.offset) - l_x).exp() * f(y)
        });
        (l_b - l_x).exp() * r_b + local
    }

    /// `φ⁻²(x) ∫₀ˣ φ²(y) f(y) dy` for a callable `f` at an arbitrary `x`.
    pub fn head_ratio_integral(&self, f: impl Fn(T) -> T, x: T) -> T {
        let grid = &self.grid;
        let p = grid.panel_of(x);
        let pts = grid.points();
        let mut samples = vec![T::zero(); grid.len()];
        for i in 0..grid.endpoint_index(p) {
            if grid.is_node(i) {
                samples[i] = f(pts[i]);
            }
        }
        let mut out = vec![T::zero(); grid.len()];
        self.head_sweep(&samples, &mut out, 0..p);
        self.count_sweep();

        let a = grid.panel_bounds()[p];
        let r_a = out[grid.endpoint_index(p)];
        let l_x = self.params.log_phi_sq(x) + self.offset;
        let l_a = self.log_w[grid.endpoint_index(p)];
        let local = grid.rule().integrate(a, x, |y| {
            ((self.params.log_phi_sq(y) + self.offset) - l_x).exp() * f(y)
        });
        (l_a - l_x).exp() * r_a + local
    }

    /// Forward ratio sweep over `panels`, which must start at panel 0.
    fn head_sweep(&self, values: &[T], out: &mut [T], panels: Range<usize>) {
        debug_assert!(panels.is_empty() || panels.start == 0);
        let grid = &self.grid;
        let rule = grid.rule();
        let q = grid.order();
        let l = &self.log_w;
        let mut r_a = T::zero();
        let mut h = vec![T::zero(); q];
        for p in panels {
            let ia = grid.endpoint_index(p);
            let ib = grid.endpoint_index(p + 1);
            let l_ref = l[ia..=ib].iter().copied().fold(T::neg_infinity(), T::max);
            let half = (grid.panel_bounds()[p + 1] - grid.panel_bounds()[p]) * T::half();
            for (j, hj) in h.iter_mut().enumerate() {
                let i = ia + 1 + j;
                *hj = (l[i] - l_ref).exp() * values[i];
            }
            out[ia] = r_a;
            for (j, row) in rule.partial().iter().enumerate() {
                let i = ia + 1 + j;
                out[i] = (l[ia] - l[i]).exp() * r_a + (l_ref - l[i]).exp() * dot(row, &h) * half;
            }
            let full = dot(rule.weights(), &h) * half;
            r_a = (l[ia] - l[ib]).exp() * r_a + (l_ref - l[ib]).exp() * full;
            out[ib] = r_a;
        }
    }

    /// Backward ratio sweep over `panels`, which must end at the last panel.
    fn tail_sweep(&self, values: &[T], out: &mut [T], panels: Range<usize>) {
        debug_assert!(panels.is_empty() || panels.end == self.grid.panel_count());
        let grid = &self.grid;
        let rule = grid.rule();
        let q = grid.order();
        let l = &self.log_w;
        let mut r_b = T::zero();
        let mut h = vec![T::zero(); q];
        for p in panels.rev() {
            let ia = grid.endpoint_index(p);
            let ib = grid.endpoint_index(p + 1);
            let l_ref = l[ia..=ib].iter().copied().fold(T::neg_infinity(), T::max);
            let half = (grid.panel_bounds()[p + 1] - grid.panel_bounds()[p]) * T::half();
            for (j, hj) in h.iter_mut().enumerate() {
                let i = ia + 1 + j;
                *hj = (l[i] - l_ref).exp() * values[i];
            }
            out[ib] = r_b;
            let full = dot(rule.weights(), &h) * half;
            for (j, row) in rule.partial().iter().enumerate() {
                let i = ia + 1 + j;
                let rest = full - dot(row, &h) * half;
                out[i] = (l[ib] - l[i]).exp() * r_b + (l_ref - l[i]).exp() * rest;
            }
            r_b = (l[ib] - l[ia]).exp() * r_b + (l_ref - l[ia]).exp() * full;
            out[ia] = r_b;
        }
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{s0, w_ev, State};
    use approx::assert_relative_eq;

    fn params(g: f64, state: State) -> ModelParams<f64> {
        ModelParams::new(g, state).unwrap()
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::<f64>::new(8).unwrap();
        for k in 0..16 {
            let exact = if k % 2 == 0 {
                2.0 / (k as f64 + 1.0)
            } else {
                0.0
            };
            let got = rule.integrate(-1.0, 1.0, |x| x.powi(k));
            assert!((got - exact).abs() < 1e-14, "k={k}: {got}");
        }
        assert_relative_eq!(
            rule.weights().iter().sum::<f64>(),
            2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn partial_matrix_integrates_polynomials_to_each_node() {
        let rule = GaussLegendre::<f64>::new(12).unwrap();
        for k in 0..12 {
            let vals: Vec<f64> = rule.nodes().iter().map(|t| t.powi(k)).collect();
            for (i, row) in rule.partial().iter().enumerate() {
                let t = rule.nodes()[i];
                let exact = (t.powi(k + 1) - (-1.0f64).powi(k + 1)) / (k as f64 + 1.0);
                let got: f64 = row.iter().zip(&vals).map(|(a, b)| a * b).sum();
                assert!((got - exact).abs() < 1e-13, "k={k}, i={i}");
            }
        }
    }

    #[test]
    fn single_precision_rule_works() {
        let rule = GaussLegendre::<f32>::new(10).unwrap();
        let got = rule.integrate(0.0, 1.0, |x| x.exp());
        assert!((got - (1.0f32.exp() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn order_out_of_range_rejected() {
        assert!(GaussLegendre::<f64>::new(1).is_err());
        assert!(GaussLegendre::<f64>::new(65).is_err());
    }

    #[test]
    fn grid_shape_and_truncation() {
        let p = params(1.0, State::Even);
        let grid = build_grid(&p, 64).unwrap();
        assert!(grid.contains_one());
        assert!(grid.points().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(grid.points()[0], 0.0);
        assert_eq!(grid.len(), 64 * 17 + 1);
        // 2 S0(x_max) = 70 + 4/3 for g = 1, solved independently.
        let target = 70.0 + 4.0 / 3.0;
        let (mut lo, mut hi) = (1.0f64, 20.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * s0(mid) < target {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert_relative_eq!(grid.x_max(), lo, max_relative = 1e-12);
        let g8 = build_grid(&params(8.0, State::Even), 64).unwrap();
        assert!(g8.x_max() < grid.x_max());
    }

    #[test]
    fn too_few_panels_rejected() {
        let p = params(1.0, State::Even);
        assert_eq!(
            build_grid(&p, 8).unwrap_err(),
            Error::TooFewPanels { got: 8, min: 16 }
        );
    }

    #[test]
    fn panels_span_bounded_log_weight() {
        for &g in &[0.05, 1.0, 9.0, 40.0] {
            let p = params(g, State::Plus);
            let grid = build_grid(&p, 64).unwrap();
            for w in grid.panel_bounds().windows(2) {
                let dl = (p.log_phi_sq(w[1]) - p.log_phi_sq(w[0])).abs();
                assert!(dl < 6.0, "g={g}: panel {:?} spans {dl}", w);
            }
        }
    }

    #[test]
    fn sampled_function_interpolates_cubics_exactly() {
        let p = params(2.0, State::Even);
        let grid = Arc::new(build_grid(&p, 16).unwrap());
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let s = SampledFunction::from_fn(grid.clone(), f).unwrap();
        for i in 0..300 {
            let x = i as f64 * grid.x_max() / 299.0;
            assert!((s.eval(x) - f(x)).abs() < 1e-10, "x={x}");
        }
        assert_eq!(s.eval(-1.0), f(0.0));
        assert_eq!(s.eval(1e3), *s.values().last().unwrap());
    }

    #[test]
    fn sampled_function_rejects_bad_values() {
        let p = params(2.0, State::Even);
        let grid = Arc::new(build_grid(&p, 16).unwrap());
        let mut v = vec![0.0; grid.len()];
        assert!(SampledFunction::new(grid.clone(), v[1..].to_vec()).is_err());
        v[5] = f64::NAN;
        assert_eq!(
            SampledFunction::new(grid, v).unwrap_err(),
            Error::NonFiniteSample { index: 5 }
        );
    }

    #[test]
    fn weighted_mean_of_constant() {
        for &g in &[0.1, 1.0, 8.0] {
            let wg = WeightedGrid::build(params(g, State::Even), 32).unwrap();
            let c = vec![3.25; wg.grid().len()];
            assert_relative_eq!(wg.weighted_mean(&c), 3.25, max_relative = 1e-14);
        }
    }

    #[test]
    fn weighted_mean_ignores_weight_normalisation() {
        let wg = WeightedGrid::build(params(3.0, State::Even), 64).unwrap();
        let base = wg.weighted_mean(wg.perturbation());
        for &off in &[-300.0, -17.5, 0.3, 250.0] {
            let shifted = wg.with_log_offset(off);
            assert_relative_eq!(
                shifted.weighted_mean(shifted.perturbation()),
                base,
                max_relative = 1e-13
            );
            let t = shifted.tail_ratio_integral(|y| w_ev(y, 3.0), 1.7);
            assert_relative_eq!(
                t,
                wg.tail_ratio_integral(|y| w_ev(y, 3.0), 1.7),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn weighted_mean_converges_under_refinement() {
        for &g in &[1.0, 8.0] {
            let coarse = WeightedGrid::build(params(g, State::Even), 64).unwrap();
            let fine = WeightedGrid::build(params(g, State::Even), 128).unwrap();
            let a = coarse.weighted_mean(coarse.perturbation());
            let b = fine.weighted_mean(fine.perturbation());
            assert!((a - b).abs() < 1e-8, "g={g}: {a} vs {b}");
        }
    }

    #[test]
    fn split_off_one_degrades_even_integrals() {
        let p = params(3.0, State::Even);
        let good = WeightedGrid::new(p, Arc::new(build_grid(&p, 32).unwrap()));
        let fine = WeightedGrid::build(p, 256).unwrap();
        let reference = fine.weighted_mean(fine.perturbation());
        let opts = GridOptions {
            n_panels: 32,
            split: 0.9537,
            ..GridOptions::default()
        };
        let bad_grid = build_grid_with(&p, &opts).unwrap();
        assert!(!bad_grid.contains_one());
        let bad = WeightedGrid::new(p, Arc::new(bad_grid));
        let good_err = (good.weighted_mean(good.perturbation()) - reference).abs();
        let bad_err = (bad.weighted_mean(bad.perturbation()) - reference).abs();
        assert!(good_err < 1e-10, "{good_err:e}");
        assert!(
            bad_err > 1e3 * good_err.max(1e-14),
            "{bad_err:e} vs {good_err:e}"
        );
    }

    #[test]
    fn tail_ratio_of_zero_is_zero() {
        let wg = WeightedGrid::build(params(2.0, State::Even), 32).unwrap();
        assert_eq!(wg.tail_ratio_integral(|_| 0.0, 1.3), 0.0);
    }

    /// Brute-force trapezoid sum of `∫ₓ^{x_max} e^{L(y) − L(x)} dy`.
    fn brute_tail(p: &ModelParams<f64>, x: f64, x_max: f64, n: usize) -> f64 {
        let lx = p.log_phi_sq(x);
        let h = (x_max - x) / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let y = x + k as f64 * h;
            let c = if k == 0 || k == n { 0.5 } else { 1.0 };
            s += c * (p.log_phi_sq(y) - lx).exp();
        }
        s * h
    }

    #[test]
    fn tail_ratio_matches_brute_force() {
        for &(g, x) in &[(1.0, 3.5), (1.0, 0.4), (6.0, 2.2), (0.3, 6.0)] {
            let p = params(g, State::Even);
            let wg = WeightedGrid::build(p, 64).unwrap();
            let got = wg.tail_ratio_integral(|_| 1.0, x);
            let oracle = brute_tail(&p, x, wg.grid().x_max(), 400_000);
            assert!(
                ((got - oracle) / oracle).abs() < 1e-8,
                "g={g} x={x}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn node_sweeps_agree_with_callable_forms() {
        let p = params(2.0, State::Even);
        let wg = WeightedGrid::build(p, 64).unwrap();
        let f = |y: f64| (y * 1.3).sin() + w_ev(y, 2.0);
        let vals: Vec<f64> = wg.grid().points().iter().map(|&x| f(x)).collect();
        let tail = wg.tail_ratio(&vals);
        let head = wg.head_ratio(&vals);
        for &i in &[17usize, 300, 555, 901] {
            let x = wg.grid().points()[i];
            assert_relative_eq!(
                tail[i],
                wg.tail_ratio_integral(f, x),
                max_relative = 1e-11,
                epsilon = 1e-14
            );
            assert_relative_eq!(
                head[i],
                wg.head_ratio_integral(f, x),
                max_relative = 1e-11,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn forward_and_backward_forms_agree_for_centred_integrand() {
        for &g in &[1.0, 2.0, 7.0] {
            let p = params(g, State::Even);
            let wg = WeightedGrid::build(p, 64).unwrap();
            let e1 = wg.weighted_mean(wg.perturbation());
            let f = |y: f64| w_ev(y, g) - e1;
            for &x in &[0.3, 0.8, 1.0, 1.4, 2.0] {
                let fwd = wg.head_ratio_integral(f, x);
                let bwd = wg.tail_ratio_integral(f, x);
                assert!((fwd + bwd).abs() < 1e-8, "g={g} x={x}: {fwd} vs {bwd}");
            }
        }
    }

    #[test]
    fn plain_tail_integral() {
        let p = params(1.0, State::Plus);
        let wg = WeightedGrid::build(p, 32).unwrap();
        let vals: Vec<f64> = wg.grid().points().iter().map(|&x| x * x).collect();
        let out = wg.tail_integral(&vals);
        let xm = wg.grid().x_max();
        for (i, &x) in wg.grid().points().iter().enumerate() {
            assert_relative_eq!(out[i], (xm.powi(3) - x.powi(3)) / 3.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn sweep_counter_counts() {
        let wg = WeightedGrid::build(params(1.0, State::Plus), 16).unwrap();
        let v = vec![1.0; wg.grid().len()];
        assert_eq!(wg.sweeps(), 0);
        wg.hybrid_ratio(&v);
        assert_eq!(wg.sweeps(), 1);
        wg.tail_ratio(&v);
        wg.tail_integral(&v);
        assert_eq!(wg.sweeps(), 3);
    }
}
