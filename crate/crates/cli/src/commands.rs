//! Subcommand implementations. Each returns a [`Report`]; only the caller
//! decides where it goes.

use dwell::asymptotic::{
    self, partial_sums, plateau, resolvable_digits, term_magnitudes, BetaPyramid, EpsilonSeries,
    PlateauCriterion,
};
use dwell::model::check_trial_conditions;
use dwell::oracle::{ground_energy, raw_energy, OracleConfig};
use dwell::quad::build_grid;
use dwell::tables::{self, EnergyRow, IterationRow, SeriesRow};
use dwell::{f_iter, tau_iter, Error, ModelParams, SolveOptions, State, WeightedGrid64};
use serde_json::{json, Value};

use crate::report::{cell, num, opt_cell, opt_int, opt_num, Report, Table};

/// Runs `f` for every coupling on its own thread, keeping input order.
fn par_map<R: Send>(
    gs: &[f64],
    f: impl Fn(f64) -> Result<R, Error> + Sync,
) -> Result<Vec<R>, Error> {
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = gs.iter().map(|&g| s.spawn(move || f(g))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn state_label(s: State) -> &'static str {
    s.label()
}

fn energy_header(prefix: &[&str], steps: usize, suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=steps).map(|n| format!("e{n}")))
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}

fn padded(energies: &[f64], steps: usize) -> Vec<String> {
    (0..steps)
        .map(|i| opt_cell(energies.get(i).copied()))
        .collect()
}

pub fn solve(gs: &[f64], state: State, iters: usize, panels: usize) -> Result<Report, Error> {
    let traces = par_map(gs, |g| {
        let wg = WeightedGrid64::build(ModelParams::new(g, state)?, panels)?;
        tau_iter::solve(&wg, &SolveOptions::fixed(iters))
    })?;
    let mut t = Table::with_header(
        "tau-iteration",
        energy_header(&["g", "state"], iters, &["e_final"]),
    );
    let mut results = Vec::new();
    for tr in &traces {
        let mut row = vec![cell(tr.g), state_label(state).into()];
        row.extend(padded(&tr.energies, iters));
        row.push(cell(tr.e_final));
        t.push(row);
        results.push(json!({
            "g": num(tr.g),
            "state": state_label(state),
            "scheme": "tau",
            "energies": tr.energies.iter().map(|&e| num(e)).collect::<Vec<_>>(),
            "e_final": num(tr.e_final),
        }));
    }
    Ok(Report {
        tables: vec![t],
        json: json!({ "command": "solve", "results": results }),
        unstable: false,
    })
}

pub fn fsolve(gs: &[f64], state: State, iters: usize, panels: usize) -> Result<Report, Error> {
    let runs = par_map(gs, |g| {
        let wg = WeightedGrid64::build(ModelParams::new(g, state)?, panels)?;
        f_iter::solve(&wg, iters)
    })?;
    let mut t = Table::with_header(
        "f-iteration",
        energy_header(
            &["g", "state"],
            iters,
            &["e_final", "min_f", "unstable_step", "instability"],
        ),
    );
    let mut results = Vec::new();
    let mut unstable = false;
    for run in &runs {
        let tr = &run.trace;
        let min_f = run.min_profile.iter().copied().reduce(f64::min);
        let (step, kind) = match &run.instability {
            Some(i) => (Some(i.step), i.kind.to_string()),
            None => (None, String::new()),
        };
        unstable |= run.instability.is_some();
        let mut row = vec![cell(tr.g), state_label(state).into()];
        row.extend(padded(&tr.energies, iters));
        row.extend([cell(tr.e_final), opt_cell(min_f), opt_int(step), kind]);
        t.push(row);
        results.push(json!({
            "g": num(tr.g),
            "state": state_label(state),
            "scheme": "f",
            "energies": tr.energies.iter().map(|&e| num(e)).collect::<Vec<_>>(),
            "e_final": num(tr.e_final),
            "min_f": opt_num(min_f),
            "instability": run.instability.as_ref().map(|i| {
                let mut v = serde_json::to_value(&i.kind).expect("serialisable");
                v["step"] = json!(i.step);
                round_numbers(v)
            }),
        }));
    }
    Ok(Report {
        tables: vec![t],
        json: json!({ "command": "fsolve", "results": results }),
        unstable,
    })
}

fn round_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap()),
        Value::Object(m) => {
            Value::Object(m.into_iter().map(|(k, v)| (k, round_numbers(v))).collect())
        }
        other => other,
    }
}

pub enum Criterion {
    Delta(f64),
    Digits(u32),
    Auto,
}

pub fn asym(gs: &[f64], terms: usize, criterion: &Criterion) -> Result<Report, Error> {
    let eps = EpsilonSeries::from_pyramid(&BetaPyramid::generate(terms));
    let mut sums_t = Table::new(
        "partial sums",
        &["g", "n", "partial_sum", "increment", "term"],
    );
    let mut plat_t = Table::new(
        "plateau",
        &[
            "g",
            "criterion",
            "n_star",
            "n_min",
            "n_max",
            "value",
            "min_increment",
        ],
    );
    let mut results = Vec::new();
    for &g in gs {
        let crit = match *criterion {
            Criterion::Delta(d) => PlateauCriterion::Increment(d),
            Criterion::Digits(d) => PlateauCriterion::Digits(d),
            Criterion::Auto => PlateauCriterion::Digits(resolvable_digits(g)),
        };
        let sums = partial_sums(&eps, g);
        let terms_mag = term_magnitudes(&eps, g);
        for (n, s) in sums.iter().enumerate() {
            let inc = if n == 0 {
                None
            } else {
                Some((s - sums[n - 1]).abs())
            };
            sums_t.push(vec![
                cell(g),
                n.to_string(),
                cell(*s),
                opt_cell(inc),
                cell(terms_mag[n]),
            ]);
        }
        let p = plateau(&eps, g, crit)?;
        let label = match crit {
            PlateauCriterion::Increment(d) => format!("increment<{}", cell(d)),
            PlateauCriterion::Digits(d) => format!("digits={d}"),
        };
        plat_t.push(vec![
            cell(g),
            label.clone(),
            p.n_star.to_string(),
            opt_int(p.n_min()),
            opt_int(p.n_max()),
            cell(p.value),
            cell(p.min_increment),
        ]);
        results.push(json!({
            "g": num(g),
            "partial_sums": sums.iter().map(|&s| num(s)).collect::<Vec<_>>(),
            "plateau": {
                "criterion": label,
                "n_star": p.n_star,
                "n_min": p.n_min(),
                "n_max": p.n_max(),
                "value": num(p.value),
                "min_increment": num(p.min_increment),
            },
        }));
    }
    Ok(Report {
        tables: vec![sums_t, plat_t],
        json: json!({ "command": "asym", "terms": terms, "results": results }),
        unstable: false,
    })
}

pub fn pyramid(rows: usize) -> Result<Report, Error> {
    let p = BetaPyramid::generate(rows);
    let width = 2 * rows;
    let mut header = vec!["m".to_string(), "part".to_string()];
    header.extend((0..width).rev().map(|l| format!("l{l}")));
    let mut t = Table::with_header("pyramid", header);
    let mut e = Table::new("energies", &["m", "epsilon", "value"]);
    let mut json_rows = Vec::new();
    for r in p.rows() {
        for (part, v) in [("beta0", &r.beta0), ("delta", &r.delta), ("beta", &r.beta)] {
            if r.m == 1 && part != "beta" {
                continue;
            }
            let mut row = vec![r.m.to_string(), part.to_string()];
            row.extend(
                (0..width)
                    .rev()
                    .map(|l| v.get(l).map(|b| b.to_string()).unwrap_or_default()),
            );
            t.push(row);
        }
        let q = asymptotic::epsilon(&p, r.m)?;
        let value = asymptotic::rational_to_f64(&q);
        e.push(vec![r.m.to_string(), q.to_string(), cell(value)]);
        json_rows.push(json!({
            "m": r.m,
            "beta0": strs(&r.beta0),
            "delta": strs(&r.delta),
            "beta": strs(&r.beta),
            "epsilon": q.to_string(),
        }));
    }
    Ok(Report {
        tables: vec![t, e],
        json: json!({ "command": "pyramid", "rows": json_rows }),
        unstable: false,
    })
}

fn strs<T: ToString>(v: &[T]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn iteration_rows(title: &str, rows: &[IterationRow]) -> (Table, Value) {
    let mut t = Table::with_header(
        title,
        energy_header(
            &["g", "scheme"],
            tables::TAU_STEPS,
            &["e_final", "oracle", "deviation"],
        ),
    );
    let mut js = Vec::new();
    for r in rows {
        let mut row = vec![cell(r.g), r.scheme.label().into()];
        row.extend(padded(&r.energies, tables::TAU_STEPS));
        row.extend([opt_cell(r.e_final), cell(r.oracle), opt_cell(r.deviation)]);
        t.push(row);
        js.push(json!({
            "g": num(r.g),
            "state": r.state.label(),
            "scheme": r.scheme.label(),
            "energies": r.energies.iter().map(|&e| num(e)).collect::<Vec<_>>(),
            "e_final": opt_num(r.e_final),
            "oracle": num(r.oracle),
            "deviation": opt_num(r.deviation),
        }));
    }
    (t, Value::Array(js))
}

fn energy_rows(rows: &[EnergyRow]) -> (Table, Value) {
    let mut t = Table::new("table 3", &["g", "energy", "e", "oracle", "deviation"]);
    let mut js = Vec::new();
    for r in rows {
        t.push(vec![
            cell(r.g),
            cell(r.energy),
            cell(r.e),
            cell(r.oracle),
            cell(r.deviation),
        ]);
        js.push(json!({
            "g": num(r.g), "energy": num(r.energy), "e": num(r.e),
            "oracle": num(r.oracle), "deviation": num(r.deviation),
        }));
    }
    (t, Value::Array(js))
}

fn series_rows(rows: &[SeriesRow]) -> (Table, Value) {
    let mut t = Table::new(
        "table 4",
        &[
            "g",
            "energy",
            "e",
            "n_min",
            "n_max",
            "series",
            "tunnel",
            "gap",
            "oracle",
            "deviation",
        ],
    );
    let mut js = Vec::new();
    for r in rows {
        t.push(vec![
            cell(r.g),
            cell(r.energy),
            cell(r.e),
            opt_int(r.n_min),
            opt_int(r.n_max),
            opt_cell(r.series),
            cell(r.tunnel),
            opt_cell(r.gap),
            cell(r.oracle),
            cell(r.deviation),
        ]);
        js.push(json!({
            "g": num(r.g), "energy": num(r.energy), "e": num(r.e),
            "n_min": r.n_min, "n_max": r.n_max, "series": opt_num(r.series),
            "tunnel": num(r.tunnel), "gap": opt_num(r.gap),
            "oracle": num(r.oracle), "deviation": num(r.deviation),
        }));
    }
    (t, Value::Array(js))
}

pub fn tables(which: &[u8], panels: usize) -> Result<Report, Error> {
    let mut out = Vec::new();
    let mut js = Vec::new();
    for &k in which {
        let (t, v) = match k {
            1 => iteration_rows("table 1", &tables::table1(panels)?),
            2 => iteration_rows("table 2", &tables::table2(panels)?),
            3 => energy_rows(&tables::table3(panels)?),
            4 => {
                let eps = EpsilonSeries::from_pyramid(&BetaPyramid::default());
                series_rows(&tables::table4(&eps, panels)?)
            }
            _ => unreachable!("validated by the parser"),
        };
        out.push(t);
        js.push(json!({ "table": k, "rows": v }));
    }
    Ok(Report {
        tables: out,
        json: json!({ "command": "tables", "tables": js }),
        unstable: false,
    })
}

pub fn oracle(gs: &[f64], points: Option<usize>) -> Result<Report, Error> {
    let rows = par_map(gs, |g| {
        let mut cfg = OracleConfig::for_coupling(g);
        if let Some(n) = points {
            cfg = cfg.with_points(n);
        }
        Ok((g, cfg, ground_energy(g, &cfg)?, raw_energy(g, &cfg)?))
    })?;
    let mut t = Table::new(
        "oracle",
        &["g", "half_width", "n_points", "energy", "raw_energy"],
    );
    let mut js = Vec::new();
    for (g, cfg, e, raw) in rows {
        t.push(vec![
            cell(g),
            cell(cfg.half_width),
            cfg.n_points.to_string(),
            cell(e),
            cell(raw),
        ]);
        js.push(json!({
            "g": num(g), "half_width": num(cfg.half_width), "n_points": cfg.n_points,
            "energy": num(e), "raw_energy": num(raw),
        }));
    }
    Ok(Report {
        tables: vec![t],
        json: json!({ "command": "oracle", "results": js }),
        unstable: false,
    })
}

pub fn check(gs: &[f64], state: State, panels: usize) -> Result<Report, Error> {
    let mut t = Table::new(
        "trial conditions",
        &[
            "g",
            "state",
            "positive",
            "decreasing",
            "decays",
            "min_w",
            "tail_w",
            "first_negative_x",
            "first_increase_x",
            "jump_at_one",
        ],
    );
    let mut js = Vec::new();
    for &g in gs {
        let params = ModelParams::new(g, state)?;
        let r = check_trial_conditions(&params, &build_grid(&params, panels)?);
        let neg = r.first_negative.map(|v| v.x);
        let inc = r.first_increase.map(|v| v.x);
        t.push(vec![
            cell(g),
            state.label().into(),
            r.positive.to_string(),
            r.decreasing.to_string(),
            r.decays.to_string(),
            cell(r.min_w),
            cell(r.tail_w),
            opt_cell(neg),
            opt_cell(inc),
            cell(r.jump_at_one),
        ]);
        js.push(json!({
            "g": num(g), "state": state.label(),
            "positive": r.positive, "decreasing": r.decreasing, "decays": r.decays,
            "all_pass": r.all_pass(),
            "min_w": num(r.min_w), "tail_w": num(r.tail_w),
            "first_negative_x": opt_num(neg), "first_increase_x": opt_num(inc),
            "jump_at_one": num(r.jump_at_one),
        }));
    }
    Ok(Report {
        tables: vec![t],
        json: json!({ "command": "check", "results": js }),
        unstable: false,
    })
}
