//! CSV, JSON and plot-script writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pesim_core::experiments::EpsConvergence;
use pesim_core::functionals::DiagnosticsRecord;
use pesim_core::State;
use serde::Serialize;

use crate::CliError;

pub const TIMESERIES_HEADER: &str = "t,mass_u,mass_v,F,D,E1,D1,E2,D2,y,min_u,min_v,max_u,max_v,h1_u,h1_v";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn timeseries_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let row = [
            num(r.t),
            num(r.mass_u),
            num(r.mass_v),
            num(r.f),
            num(r.d),
            opt(r.e1),
            opt(r.d1),
            num(r.e2),
            num(r.d2),
            num(r.y),
            num(r.min_u),
            num(r.min_v),
            num(r.max_u),
            num(r.max_v),
            num(r.h1_u),
            num(r.h1_v),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn profile_csv(state: &State) -> String {
    let grid = state.grid();
    let mut out = String::from("x,u,v\n");
    for (i, (u, v)) in state.u.values().iter().zip(state.v.values()).enumerate() {
        let _ = writeln!(out, "{},{},{}", num(grid.center(i)), num(*u), num(*v));
    }
    out
}

pub fn eps_csv(conv: &EpsConvergence) -> String {
    let mut out = String::from("eps,eps_next,l2_u,l2_v\n");
    for (i, (du, dv)) in conv.distances_u.iter().zip(&conv.distances_v).enumerate() {
        let _ = writeln!(out, "{},{},{},{}", num(conv.eps[i]), num(conv.eps[i + 1]), num(*du), num(*dv));
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write(path, &(text + "\n"))
}

/// Writes `snapshots/snap_NNNNN.csv` per sample plus an index of sample
/// times.
pub fn write_snapshots(dir: &Path, samples: &[State]) -> Result<(), CliError> {
    let snap_dir = dir.join("snapshots");
    let mut index = String::from("index,t,file\n");
    for (k, s) in samples.iter().enumerate() {
        let name = format!("snap_{k:05}.csv");
        write(&snap_dir.join(&name), &profile_csv(s))?;
        let _ = writeln!(index, "{k},{},{name}", num(s.t));
    }
    write(&snap_dir.join("index.csv"), &index)
}

fn last_snapshot(dir: &Path) -> Option<String> {
    let mut names: Vec<String> = fs::read_dir(dir.join("snapshots"))
        .ok()?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("snap_") && n.ends_with(".csv"))
        .collect();
    names.sort();
    names.pop().map(|n| format!("snapshots/{n}"))
}

/// Builds a matplotlib script for whatever outputs exist in `dir`.
///
/// Returns `None` when there is nothing to plot.
pub fn plot_script(dir: &Path) -> Option<String> {
    let has = |name: &str| dir.join(name).is_file();
    let timeseries = has("timeseries.csv");
    let summary = has("summary.json");
    let snapshot = last_snapshot(dir);
    let eps = has("eps_convergence.csv");
    if !timeseries && snapshot.is_none() && !eps {
        return None;
    }

    let mut s = String::from(
        "#!/usr/bin/env python3\n\
         # Generated by pe-sim plot; reads outputs next to this script.\n\
         import csv\n\
         import json\n\
         import os\n\n\
         import matplotlib\n\
         matplotlib.use(\"Agg\")\n\
         import matplotlib.pyplot as plt\n\n\
         HERE = os.path.dirname(os.path.abspath(__file__))\n\n\n\
         def load(name):\n\
         \x20   with open(os.path.join(HERE, name), newline=\"\") as fh:\n\
         \x20       rows = list(csv.DictReader(fh))\n\
         \x20   cols = {}\n\
         \x20   for key in rows[0] if rows else []:\n\
         \x20       cols[key] = [float(r[key]) if r[key] != \"\" else float(\"nan\") for r in rows]\n\
         \x20   return cols\n\n\n\
         def save(fig, name):\n\
         \x20   fig.tight_layout()\n\
         \x20   fig.savefig(os.path.join(HERE, name), dpi=120)\n\
         \x20   plt.close(fig)\n\n\n",
    );

    if timeseries {
        s.push_str(
            "ts = load(\"timeseries.csv\")\n\
             fig, ax = plt.subplots()\n\
             ax.plot(ts[\"t\"], ts[\"mass_u\"], label=\"mass u\")\n\
             ax.plot(ts[\"t\"], ts[\"mass_v\"], label=\"mass v\")\n\
             ax.plot(ts[\"t\"], [a + b for a, b in zip(ts[\"mass_u\"], ts[\"mass_v\"])], label=\"mass u + v\")\n\
             ax.set_xlabel(\"t\")\n\
             ax.legend()\n\
             save(fig, \"mass.png\")\n\n\
             fig, ax = plt.subplots()\n\
             for key in (\"E1\", \"E2\"):\n\
             \x20   pts = [(t, e) for t, e in zip(ts[\"t\"], ts[key]) if e == e and e > 0]\n\
             \x20   if pts:\n\
             \x20       ax.semilogy([p[0] for p in pts], [p[1] for p in pts], label=key)\n\
             ax.set_xlabel(\"t\")\n\
             ax.legend()\n\
             save(fig, \"entropies.png\")\n\n",
        );
        if summary {
            s.push_str(
                "with open(os.path.join(HERE, \"summary.json\")) as fh:\n\
                 \x20   u_star = json.load(fh)[\"u_star\"]\n\
                 dev = [max(hi - u_star, u_star - lo) for lo, hi in zip(ts[\"min_u\"], ts[\"max_u\"])]\n\
                 fig, ax = plt.subplots()\n\
                 ax.semilogy(ts[\"t\"], [max(d, 1e-300) for d in dev])\n\
                 ax.set_xlabel(\"t\")\n\
                 ax.set_ylabel(\"sup |u - u*|\")\n\
                 save(fig, \"sup_distance.png\")\n\n",
            );
        }
    }
    if let Some(snap) = &snapshot {
        let _ = write!(
            s,
            "prof = load(\"{snap}\")\n\
             fig, ax = plt.subplots()\n\
             ax.plot(prof[\"x\"], prof[\"u\"], label=\"u\")\n\
             ax.plot(prof[\"x\"], prof[\"v\"], label=\"v\")\n\
             ax.set_xlabel(\"x\")\n\
             ax.legend()\n\
             save(fig, \"final_profile.png\")\n\n"
        );
    }
    if eps {
        s.push_str(
            "tab = load(\"eps_convergence.csv\")\n\
             fig, ax = plt.subplots()\n\
             ax.loglog(tab[\"eps\"], tab[\"l2_u\"], \"o-\", label=\"u\")\n\
             ax.loglog(tab[\"eps\"], tab[\"l2_v\"], \"s-\", label=\"v\")\n\
             ax.set_xlabel(\"eps\")\n\
             ax.set_ylabel(\"L2 distance to next eps\")\n\
             ax.legend()\n\
             save(fig, \"eps_convergence.png\")\n",
        );
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn missing_entropy_is_empty() {
        let r = DiagnosticsRecord {
            t: 0.0,
            mass_u: 1.0,
            mass_v: 1.0,
            f: 0.0,
            d: 0.0,
            e1: None,
            d1: None,
            e2: 0.0,
            d2: 0.0,
            y: 0.0,
            min_u: 1.0,
            min_v: 1.0,
            max_u: 1.0,
            max_v: 1.0,
            h1_u: 0.0,
            h1_v: 0.0,
        };
        let csv = timeseries_csv(&[r]);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 16);
        assert_eq!((row[5], row[6]), ("", ""));
    }
}
