//! Reproduction of the four benchmark tables in double precision, each row
//! carrying the finite-difference reference energy and its deviation.

use serde::Serialize;

use crate::asymptotic::{
    optimal_truncation, plateau, resolvable_digits, EpsilonSeries, PlateauCriterion,
};
use crate::error::{Error, Instability, Result};
use crate::f_iter;
use crate::model::{ModelParams, State};
use crate::oracle::{ground_energy, OracleConfig};
use crate::quad::WeightedGrid;
use crate::tau_iter::{self, Scheme, SolveOptions};

pub const TAU_STEPS: usize = 5;
pub const F_STEPS: usize = 3;
/// A plateau exists when the smallest partial-sum increment is below this.
pub const PLATEAU_GATE: f64 = 1e-4;

pub const TABLE1_TAU: [f64; 9] = [0.05, 0.1, 0.3, 0.5, 1.0, 3.0, 6.0, 7.0, 8.0];
pub const TABLE1_F: [f64; 6] = [0.5, 1.0, 3.0, 6.0, 7.0, 8.0];
pub const TABLE2_TAU: [f64; 5] = [1.0, 3.0, 6.0, 7.0, 8.0];
pub const TABLE2_F: [f64; 5] = TABLE2_TAU;
pub const TABLE3: [f64; 18] = [
    0.05, 0.1, 0.3, 0.5, 0.7, 1.0, 1.5, 1.7, 2.0, 2.2, 2.5, 2.7, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0,
];
pub const TABLE4: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];

#[derive(Clone, Debug, Serialize)]
pub struct IterationRow {
    pub g: f64,
    pub state: State,
    pub scheme: Scheme,
    pub energies: Vec<f64>,
    /// `g − ℰ_last`; reported for τ rows only.
    pub e_final: Option<f64>,
    pub oracle: f64,
    pub deviation: Option<f64>,
    pub instability: Option<Instability>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRow {
    pub g: f64,
    pub energy: f64,
    pub e: f64,
    pub oracle: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesRow {
    pub g: f64,
    pub energy: f64,
    pub e: f64,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub n_star: usize,
    pub series: Option<f64>,
    pub tunnel: f64,
    /// `|ℰ₊ − ℰ₊^N|` when a plateau exists.
    pub gap: Option<f64>,
    pub oracle: f64,
    pub deviation: f64,
}

fn grid(g: f64, state: State, n_panels: usize) -> Result<WeightedGrid<f64>> {
    WeightedGrid::build(ModelParams::new(g, state)?, n_panels)
}

pub fn oracle_energy(g: f64) -> Result<f64> {
    ground_energy(g, &OracleConfig::for_coupling(g))
}

pub fn tau_row(g: f64, state: State, n_panels: usize) -> Result<IterationRow> {
    let wg = grid(g, state, n_panels)?;
    let t = tau_iter::solve(&wg, &SolveOptions::fixed(TAU_STEPS))?;
    let oracle = oracle_energy(g)?;
    Ok(IterationRow {
        g,
        state,
        scheme: Scheme::Tau,
        energies: t.energies,
        e_final: Some(t.e_final),
        oracle,
        deviation: Some((t.e_final - oracle).abs()),
        instability: None,
    })
}

pub fn f_row(g: f64, state: State, n_panels: usize) -> Result<IterationRow> {
    let wg = grid(g, state, n_panels)?;
    let run = f_iter::solve(&wg, F_STEPS)?;
    Ok(IterationRow {
        g,
        state,
        scheme: Scheme::F,
        energies: run.trace.energies,
        e_final: None,
        oracle: oracle_energy(g)?,
        deviation: None,
        instability: run.instability,
    })
}

/// τ rows interleaved with f rows for the couplings that have them, sorted
/// by `g` with τ first.
pub fn iteration_table(
    state: State,
    tau: &[f64],
    f: &[f64],
    n_panels: usize,
) -> Result<Vec<IterationRow>> {
    let mut rows = Vec::new();
    let mut gs: Vec<f64> = tau.iter().chain(f).copied().collect();
    gs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gs.dedup();
    for g in gs {
        if tau.contains(&g) {
            rows.push(tau_row(g, state, n_panels)?);
        }
        if f.contains(&g) {
            rows.push(f_row(g, state, n_panels)?);
        }
    }
    Ok(rows)
}

pub fn table1(n_panels: usize) -> Result<Vec<IterationRow>> {
    iteration_table(State::Even, &TABLE1_TAU, &TABLE1_F, n_panels)
}

pub fn table2(n_panels: usize) -> Result<Vec<IterationRow>> {
    iteration_table(State::Plus, &TABLE2_TAU, &TABLE2_F, n_panels)
}

pub fn energy_row(g: f64, n_panels: usize) -> Result<EnergyRow> {
    let r = tau_row(g, State::Even, n_panels)?;
    let e = r.e_final.expect("τ row");
    Ok(EnergyRow {
        g,
        energy: g - e,
        e,
        oracle: r.oracle,
        deviation: (e - r.oracle).abs(),
    })
}

pub fn table3(n_panels: usize) -> Result<Vec<EnergyRow>> {
    TABLE3.iter().map(|&g| energy_row(g, n_panels)).collect()
}

pub fn series_row(g: f64, eps: &EpsilonSeries, n_panels: usize) -> Result<SeriesRow> {
    let r = tau_row(g, State::Plus, n_panels)?;
    let energy = *r.energies.last().expect("five steps");
    let gate = optimal_truncation(eps, g)?;
    let (window, series) = if gate.min_increment < PLATEAU_GATE {
        let p = plateau(eps, g, PlateauCriterion::Digits(resolvable_digits(g)))?;
        (p.window, Some(p.value))
    } else {
        (None, None)
    };
    let e = g - energy;
    Ok(SeriesRow {
        g,
        energy,
        e,
        n_min: window.map(|w| w.0),
        n_max: window.map(|w| w.1),
        n_star: gate.n_star,
        series,
        tunnel: (-4.0 * g / 3.0).exp(),
        gap: series.map(|s| (energy - s).abs()),
        oracle: r.oracle,
        deviation: (e - r.oracle).abs(),
    })
}

pub fn table4(eps: &EpsilonSeries, n_panels: usize) -> Result<Vec<SeriesRow>> {
    TABLE4
        .iter()
        .map(|&g| series_row(g, eps, n_panels))
        .collect()
}

/// Fails if `g` is not a positive finite coupling.
pub fn check_coupling(g: f64) -> Result<()> {
    if g > 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveCoupling(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::BetaPyramid;
    use crate::quad::DEFAULT_PANELS;

    #[test]
    fn rows_are_sorted_with_tau_first() {
        let rows = iteration_table(State::Even, &[3.0, 1.0], &[1.0], 32).unwrap();
        let keys: Vec<(f64, Scheme)> = rows.iter().map(|r| (r.g, r.scheme)).collect();
        assert_eq!(
            keys,
            vec![(1.0, Scheme::Tau), (1.0, Scheme::F), (3.0, Scheme::Tau)]
        );
        assert_eq!(rows[0].energies.len(), TAU_STEPS);
        assert_eq!(rows[1].energies.len(), F_STEPS);
        assert!(rows[1].e_final.is_none());
    }

    #[test]
    fn series_rows_show_dashes_below_six() {
        let eps = EpsilonSeries::from_pyramid(&BetaPyramid::default());
        let low = series_row(5.0, &eps, DEFAULT_PANELS).unwrap();
        assert!(low.series.is_none() && low.n_min.is_none());
        let high = series_row(7.0, &eps, DEFAULT_PANELS).unwrap();
        assert!(high.series.is_some() && high.gap.unwrap() < 1e-3);
    }

    #[test]
    fn coupling_check() {
        assert!(check_coupling(0.2).is_ok());
        assert!(check_coupling(0.0).is_err());
        assert!(check_coupling(f64::NAN).is_err());
    }
}
