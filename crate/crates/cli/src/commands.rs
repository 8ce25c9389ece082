//! The five subcommands. Each builds its tables, then writes them through an
//! [`OutputWriter`] so that a failure leaves no partial files behind.

use std::path::PathBuf;

use lambda_ob::atom::{absorption_factor, optical_coherence, steady_state, susceptibility};
use lambda_ob::domain::{map_domain, BistabilityMap, Chain, Region};
use lambda_ob::feedback::find_all_solutions;
use lambda_ob::sweep::{loop_area, run_sweep, Pass, SweepTrace};
use lambda_ob::{
    DriveParams, FeedbackError, InputPoint, Medium, Mode, ModelError, OperatingPoint, Stability,
    TwoLevelMedium,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, OutputWriter, Table};

/// Files written by a command and a short human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn feedback_error(e: FeedbackError) -> CliError {
    match e {
        FeedbackError::InvalidInput(m) => CliError::Validation(m),
        other => numerical(other),
    }
}

fn write_all(cfg: &RunConfig, tables: &[(&str, Table)], summary: String) -> Result<Outcome, CliError> {
    let mut w = OutputWriter::new(&cfg.output_dir, cfg.format)?;
    for (stem, t) in tables {
        w.write(stem, t, cfg)?;
    }
    Ok(Outcome {
        files: w.finish(),
        summary,
    })
}

/// Stationary density matrix, susceptibilities and absorption factors at
/// the configured Rabi frequencies. Quantities of an undriven mode are NaN.
pub fn steady_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let atom = cfg.atom();
    let k = cfg.constants.constants();
    let drive = DriveParams::new(cfg.steady.omega1, cfg.steady.omega2);
    drive.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let rho = steady_state(&atom, &drive).map_err(numerical)?;
    let mut t = Table::new(
        format!(
            "stationary state at omega1 = {}, omega2 = {}; min eigenvalue {}",
            cfg.steady.omega1,
            cfg.steady.omega2,
            crate::output::fmt_num(rho.min_eigenvalue())
        ),
        &["quantity", "re", "im"],
    );
    for i in 0..3 {
        for j in 0..3 {
            let v = rho.get(i, j);
            t.push(vec![Cell::Text(format!("rho_{}{}", i + 1, j + 1)), v.re.into(), v.im.into()]);
        }
    }
    let mut etas = Vec::new();
    for mode in Mode::BOTH {
        let n = mode.index() + 1;
        let coh = optical_coherence(&rho, mode);
        t.push(vec![Cell::Text(format!("coherence_{n}")), coh.re.into(), coh.im.into()]);
        match susceptibility(&rho, &drive, &k, mode) {
            Ok(chi) => {
                t.push(vec![Cell::Text(format!("chi_{n}")), chi.re.into(), chi.im.into()]);
                let a = absorption_factor(chi, &k).map_err(numerical)?;
                etas.push((n, a.eta, a.gain));
            }
            Err(ModelError::ZeroDrive(_)) => {
                t.push(vec![Cell::Text(format!("chi_{n}")), f64::NAN.into(), f64::NAN.into()]);
                etas.push((n, f64::NAN, false));
            }
            Err(e) => return Err(numerical(e)),
        }
    }
    for (n, eta, gain) in etas {
        t.push(vec![Cell::Text(format!("eta_{n}")), eta.into(), 0.0.into()]);
        t.push(vec![Cell::Text(format!("gain_{n}")), f64::from(u8::from(gain)).into(), 0.0.into()]);
    }
    Ok(t)
}

pub fn cmd_steady(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let t = steady_table(cfg)?;
    let summary = t.title.clone();
    write_all(cfg, &[("steady", t)], summary)
}

fn stability_str(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
    }
}

pub fn point_table(roots: &[OperatingPoint], i0: [f64; 2]) -> Table {
    let mut t = Table::new(
        format!("operating points at I1_0 = {}, I2_0 = {}", i0[0], i0[1]),
        &[
            "root", "I1_in", "I2_in", "eta1", "eta2", "I1_out", "I2_out", "residual", "norm",
            "stability", "marginal", "iteration_radius", "gain",
        ],
    );
    for (k, r) in roots.iter().enumerate() {
        t.push(vec![
            k.into(),
            r.i_in[0].into(),
            r.i_in[1].into(),
            r.eta[0].into(),
            r.eta[1].into(),
            r.i_out[0].into(),
            r.i_out[1].into(),
            r.residual.into(),
            r.norm().into(),
            stability_str(r.stability()).into(),
            r.analysis.marginal.into(),
            r.analysis.iteration_spectral_radius.into(),
            r.gain.into(),
        ]);
    }
    t
}

pub fn cmd_point(cfg: &RunConfig, i1: f64, i2: f64) -> Result<Outcome, CliError> {
    let inp = InputPoint::new(i1, i2);
    inp.validate().map_err(feedback_error)?;
    let roots = find_all_solutions(&cfg.medium(), &inp, &cfg.cavity(), &cfg.solver).map_err(feedback_error)?;
    let summary = format!(
        "{} operating point(s): {}",
        roots.len(),
        roots.iter().map(|r| stability_str(r.stability())).collect::<Vec<_>>().join(", ")
    );
    write_all(cfg, &[("point", point_table(&roots, inp.i0))], summary)
}

pub fn map_table(map: &BistabilityMap, title: &str) -> Table {
    let mut t = Table::new(
        title,
        &["i", "j", "I1_0", "I2_0", "solution_count", "stable_count", "region", "min_eta", "max_eta"],
    );
    for c in &map.cells {
        t.push(vec![
            c.i.into(),
            c.j.into(),
            c.i0[0].into(),
            c.i0[1].into(),
            c.solution_count.into(),
            c.stable_count.into(),
            c.region.as_str().into(),
            c.min_eta.into(),
            c.max_eta.into(),
        ]);
    }
    t
}

pub fn boundary_table(chains: &[Chain], title: &str) -> Table {
    let mut t = Table::new(title, &["chain_id", "vertex_index", "I1_0", "I2_0"]);
    for (id, c) in chains.iter().enumerate() {
        for (k, v) in c.vertices.iter().enumerate() {
            t.push(vec![id.into(), k.into(), v[0].into(), v[1].into()]);
        }
    }
    t
}

fn map_summary(label: &str, map: &BistabilityMap) -> String {
    let counts: Vec<String> = [Region::Absorbing, Region::Bistable, Region::Transparent, Region::Failed]
        .iter()
        .map(|r| format!("{} {}", r.as_str(), map.count(*r)))
        .collect();
    format!("{label}: {}; {} boundary chain(s)", counts.join(", "), map.boundary.len())
}

fn compute_map<M: Medium + ?Sized>(cfg: &RunConfig, medium: &M) -> Result<BistabilityMap, CliError> {
    map_domain(
        &cfg.grid.spec(),
        &cfg.cavity(),
        medium,
        &cfg.solver,
        &cfg.thresholds.regions(),
        cfg.threads,
    )
    .map_err(|e| CliError::Validation(e.to_string()))
}

pub fn cmd_map(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let map = compute_map(cfg, &cfg.medium())?;
    let summary = map_summary("map", &map);
    write_all(
        cfg,
        &[
            ("map", map_table(&map, "bistability map")),
            ("boundary", boundary_table(&map.boundary, "bistability boundary chains")),
        ],
        summary,
    )
}

pub fn trace_table(trace: &SweepTrace) -> Table {
    let mut t = Table::new(
        format!("{} pass", pass_name(trace.pass)),
        &["t", "I1_0", "I2_0", "I1_in", "I2_in", "eta1", "eta2", "I1_out", "I2_out", "converged"],
    );
    for s in &trace.samples {
        t.push(vec![
            s.t.into(),
            s.i0[0].into(),
            s.i0[1].into(),
            s.i_in[0].into(),
            s.i_in[1].into(),
            s.eta[0].into(),
            s.eta[1].into(),
            s.i_out[0].into(),
            s.i_out[1].into(),
            s.converged.into(),
        ]);
    }
    t
}

pub fn jumps_table(trace: &SweepTrace) -> Table {
    let mut t = Table::new(
        format!("jumps of the {} pass", pass_name(trace.pass)),
        &["t", "output_index", "before", "after"],
    );
    for j in &trace.jumps {
        t.push(vec![j.t.into(), (j.output + 1).into(), j.before.into(), j.after.into()]);
    }
    t
}

fn pass_name(p: Pass) -> &'static str {
    match p {
        Pass::Forward => "forward",
        Pass::Backward => "backward",
    }
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let traces = run_sweep(
        &cfg.sweep.spec(),
        &cfg.cavity(),
        &cfg.medium(),
        &cfg.solver,
        cfg.thresholds.jump_threshold,
    )
    .map_err(|e| CliError::Validation(e.to_string()))?;
    let mut tables = Vec::new();
    let mut summary = Vec::new();
    for tr in &traces {
        let name = pass_name(tr.pass);
        let bad = tr.samples.iter().filter(|s| !s.converged).count();
        summary.push(format!("{name}: {} jump(s), {bad} unconverged sample(s)", tr.jumps.len()));
        tables.push((format!("trace_{name}"), trace_table(tr)));
        tables.push((format!("jumps_{name}"), jumps_table(tr)));
    }
    if let [f, b] = traces.as_slice() {
        let mut t = Table::new("loop areas between forward and backward passes", &["output_index", "loop_area"]);
        for j in 0..2 {
            let a = loop_area(f, b, j).map_err(numerical)?;
            summary.push(format!("loop area I{}_out: {}", j + 1, crate::output::fmt_num(a)));
            t.push(vec![(j + 1).into(), a.into()]);
        }
        tables.push(("loops".to_string(), t));
    }
    let named: Vec<(&str, Table)> = tables.iter().map(|(n, t)| (n.as_str(), t.clone())).collect();
    write_all(cfg, &named, summary.join("; "))
}

/// Exact against closed-form coherences over the configured Rabi-frequency
/// grid. Entries at a pole of the closed forms are NaN.
pub fn approx_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let (exact, approx) = cfg.approx_media();
    let atom = &exact.atom;
    let mut t = Table::new(
        format!(
            "exact vs two-level coherences at eps1 = {}, eps2 = {}; delta = eps1",
            cfg.approx.eps1, cfg.approx.eps2
        ),
        &[
            "omega1", "omega2", "delta", "im_coh1_exact", "im_coh1_approx", "im_coh2_exact",
            "im_coh2_approx", "rel_dev1", "rel_dev2", "identity_dev",
        ],
    );
    let (g21, g23) = (atom.gamma_2to1(), atom.gamma_2to3());
    for &o2 in &cfg.approx.omegas(1) {
        for &o1 in &cfg.approx.omegas(0) {
            let drive = DriveParams::new(o1, o2);
            let rho = steady_state(atom, &drive).map_err(numerical)?;
            let ex = [
                optical_coherence(&rho, Mode::One).im,
                optical_coherence(&rho, Mode::Two).im,
            ];
            let ap = closed_forms(&approx, &drive);
            let rel = |j: usize| ((ap[j] - ex[j]) / ex[j]).abs();
            let identity = (ap[1] / (ap[0] * g21 * o1 / (g23 * o2)) - 1.0).abs();
            t.push(vec![
                o1.into(),
                o2.into(),
                atom.delta1().into(),
                ex[0].into(),
                ap[0].into(),
                ex[1].into(),
                ap[1].into(),
                rel(0).into(),
                rel(1).into(),
                identity.into(),
            ]);
        }
    }
    Ok(t)
}

fn closed_forms(m: &TwoLevelMedium, drive: &DriveParams) -> [f64; 2] {
    match m.coherences(drive) {
        Ok(v) => v,
        Err(_) => [f64::NAN; 2],
    }
}

pub fn cmd_approx(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let table = approx_table(cfg)?;
    let worst = table
        .rows
        .iter()
        .filter_map(|r| match r[7] {
            Cell::Num(v) if v.is_finite() => Some(v),
            _ => None,
        })
        .fold(0.0, f64::max);
    let mut summary = vec![format!(
        "{} regime point(s); largest relative deviation of the closed form for coherence 1: {}",
        table.rows.len(),
        crate::output::fmt_num(worst)
    )];
    let mut tables = vec![("approx_table", table)];
    if cfg.approx.maps {
        let (exact, approx) = cfg.approx_media();
        let me = compute_map(cfg, &exact)?;
        let ma = compute_map(cfg, &approx)?;
        summary.push(map_summary("exact map", &me));
        summary.push(map_summary("two-level map", &ma));
        tables.push(("map_exact", map_table(&me, "bistability map, exact medium")));
        tables.push(("boundary_exact", boundary_table(&me.boundary, "boundary chains, exact medium")));
        tables.push(("map_approx", map_table(&ma, "bistability map, two-level closed forms")));
        tables.push(("boundary_approx", boundary_table(&ma.boundary, "boundary chains, two-level closed forms")));
    }
    write_all(cfg, &tables, summary.join("; "))
}
