//! Scenario orchestration: cell-solve -> tensors -> macro/micro runs ->
//! comparison, with structured outputs per run.

use crate::cell::{build_cell, ReferenceCell};
use crate::config::{canonical_json, GridSpec, InitialSpec, RunConfig, Scenario};
use crate::corrector::{assemble_tensors, EffectiveTensors};
use crate::domain::{Domain, FaceBc};
use crate::energy::{check_assumption_f, BulkFreeEnergy};
use crate::error::{Error, Result};
use crate::output::{FieldLayout, OutputWriter};
use crate::perforated::{build_perforated_domain, compare_micro_macro, PerforatedGrid};
use crate::stepper::{energy_total, step_ch, ChState, StepperConfig};
use crate::upscaled::{step_macro, UpscaledSystem};
use crate::wetting::{effective_contact_angle, upscaled_g0_channel, upscaled_g_tilde_const};
use std::path::Path;

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub threads: usize,
    /// write corrector fields in the cell scenario (cell-solve vs tensors)
    pub write_fields: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 1,
            write_fields: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub scenario: String,
    pub files: Vec<String>,
    pub summary: Vec<String>,
}

pub fn run(config: &RunConfig, out_dir: &Path, opts: RunOptions) -> Result<RunReport> {
    config.validate()?;
    let canonical = canonical_json(config);
    let mut out = OutputWriter::new(out_dir, &canonical)?;
    let mut summary = Vec::new();
    match config.scenario {
        Scenario::CheckF => run_check_f(config, &mut summary)?,
        Scenario::Cell => run_cell(config, &mut out, &mut summary, opts.write_fields)?,
        Scenario::Homogeneous => run_homogeneous(config, &mut out, &mut summary)?,
        Scenario::Upscaled => run_upscaled(config, &mut out, &mut summary)?,
        Scenario::Micro => run_micro(config, &mut out, &mut summary)?,
        Scenario::Compare => run_compare(config, &mut out, &mut summary, opts.threads)?,
        Scenario::Channel => run_channel(config, &mut out, &mut summary)?,
        Scenario::ContactAngle => run_contact_angle(config, &mut out, &mut summary)?,
    }
    out.write_manifest(&[
        ("t", "simulation time"),
        ("mass", "theta1-weighted total mass (pore mass for micro runs)"),
        ("energy", "discrete free energy int F(phi) + (lambda^2/2)|grad phi|^2"),
        ("phi_min/phi_max", "order-parameter range over the (pore) grid"),
        ("eps", "cell size ratio of a micro run"),
        ("l2/max", "norms of cell-averaged micro minus macro field"),
    ])?;
    Ok(RunReport {
        scenario: config.scenario.name().to_string(),
        files: out.produced(),
        summary,
    })
}

fn run_check_f(config: &RunConfig, summary: &mut Vec<String>) -> Result<()> {
    let e = config.energy.as_ref().unwrap();
    let (a1, a2) = (e.alpha1.unwrap(), e.alpha2.unwrap());
    let ok = check_assumption_f(a1, a2)?;
    let p = a1 + a2;
    let lhs = 25.0 * p * p - 20.0 * (a1 * a1 + a2 * a2 + 3.0 * a1 * a2);
    let rhs = p * p / 4.0;
    summary.push(format!(
        "Assumption F: {} (alpha1={a1}, alpha2={a2}, lhs={lhs}, rhs={rhs})",
        if ok { "satisfied" } else { "violated" }
    ));
    Ok(())
}

fn run_cell(
    config: &RunConfig,
    out: &mut OutputWriter,
    summary: &mut Vec<String>,
    write_fields: bool,
) -> Result<()> {
    let cell = build_cell(config.geometry.as_ref().unwrap())?;
    let cs = config.cell.as_ref().unwrap();
    let (tensors, xi_v, units) =
        assemble_tensors(&cell, cs.lambda, cs.mobility, cs.tol, config.mv_variant)?;

    out.write_with_header("cell_bitmap.txt", &cell.bitmap_text(), "pore mask (1 = pore)")?;
    out.write_with_header(
        "wall_classes.txt",
        &cell.class_map_text()?,
        "wall-class map (0 = pore)",
    )?;
    if write_fields {
        for k in 0..cell.d {
            let layout = FieldLayout::Cell { d: cell.d, n: cell.n };
            out.write_field(
                &format!("xi_v_{}.txt", k + 1),
                layout,
                &xi_v.fields[k],
                "corrector xi_v",
            )?;
            let layout = FieldLayout::Cell { d: cell.d, n: cell.n };
            out.write_field(
                &format!("chi_a_{}.txt", k + 1),
                layout,
                &units.chi_a[k],
                "xi_w unit (r-independent part)",
            )?;
            let layout = FieldLayout::Cell { d: cell.d, n: cell.n };
            out.write_field(
                &format!("chi_b_{}.txt", k + 1),
                layout,
                &units.chi_b[k],
                "xi_w unit (r coefficient)",
            )?;
        }
    }
    out.write_raw("tensors.json", &tensors.to_json_string(), "effective tensors")?;
    let report = tensor_report(&cell, &tensors, &xi_v.residuals);
    out.write_with_header("tensor_report.txt", &report, "tensor report")?;
    for line in report.lines() {
        summary.push(line.to_string());
    }
    Ok(())
}

fn tensor_report(cell: &ReferenceCell, t: &EffectiveTensors, residuals: &[f64]) -> String {
    let mut s = String::new();
    s.push_str(&format!("porosity theta1 = {:?}\n", t.theta1));
    if let Ok(fr) = cell.wall_fractions() {
        s.push_str(&format!("wall fractions = {fr:?}\n"));
    }
    let fmt = |m: &crate::linalg::SmallMat| {
        m.rows()
            .iter()
            .map(|r| format!("  {r:?}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    s.push_str(&format!("D =\n{}\n", fmt(&t.d_tensor)));
    s.push_str(&format!("M_v ({:?}) =\n{}\n", t.mv_variant, fmt(&t.m_v)));
    s.push_str(&format!("M_w_a =\n{}\n", fmt(&t.m_w_a)));
    s.push_str(&format!("M_w_b =\n{}\n", fmt(&t.m_w_b)));
    s.push_str(&format!(
        "lambda = {:?}, mobility = {:?}, corrector residuals = {residuals:?}\n",
        t.lambda, t.mobility
    ));
    s
}

/// Times at which monitors/snapshots are taken: 0, every cadence, final.
fn sample_steps(steps: u64, cadence: u64) -> Vec<u64> {
    let mut v = vec![0];
    if cadence > 0 {
        let mut s = cadence;
        while s < steps {
            v.push(s);
            s += cadence;
        }
    }
    if *v.last().unwrap() != steps {
        v.push(steps);
    }
    v
}

struct TimeLoopOutput {
    rows: Vec<Vec<f64>>,
    snapshots: Vec<(f64, Vec<f64>)>,
}

fn time_loop(
    state: &mut ChState,
    domain: &Domain,
    energy: &BulkFreeEnergy,
    cfg: &StepperConfig,
    steps: u64,
    cadence: u64,
    theta1: f64,
    mut advance: impl FnMut(&mut ChState) -> Result<()>,
) -> Result<TimeLoopOutput> {
    let samples = sample_steps(steps, cadence);
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let record = |state: &ChState, rows: &mut Vec<Vec<f64>>, snaps: &mut Vec<(f64, Vec<f64>)>| {
        let mass = theta1 * domain.integrate(&state.phi);
        let e = energy_total(&state.phi, energy, cfg.lambda, domain);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in domain.pore_cells() {
            lo = lo.min(state.phi[i]);
            hi = hi.max(state.phi[i]);
        }
        rows.push(vec![state.t, mass, e, lo, hi]);
        snaps.push((state.t, state.phi.clone()));
    };
    record(state, &mut rows, &mut snapshots);
    let mut next = 1;
    for step in 1..=steps {
        advance(state)?;
        if next < samples.len() && samples[next] == step {
            record(state, &mut rows, &mut snapshots);
            next += 1;
        }
    }
    Ok(TimeLoopOutput { rows, snapshots })
}

fn write_run_outputs(
    out: &mut OutputWriter,
    domain: &Domain,
    loop_out: &TimeLoopOutput,
    config: &RunConfig,
    summary: &mut Vec<String>,
) -> Result<()> {
    out.write_series(
        "series.csv",
        &["t", "mass", "energy", "phi_min", "phi_max"],
        &loop_out.rows,
        "time series of monitors",
    )?;
    if config.output.snapshots {
        for (idx, (t, phi)) in loop_out.snapshots.iter().enumerate() {
            let mut dims = [1usize; 3];
            for a in 0..domain.d {
                dims[a] = domain.shape.extent(a);
            }
            out.write_field(
                &format!("phi_{idx:05}.txt"),
                FieldLayout::Box { d: domain.d, dims },
                phi,
                &format!("phi at t={t:?}"),
            )?;
            if config.output.vtk {
                out.write_vtk(
                    &format!("phi_{idx:05}.vtk"),
                    domain,
                    "phi",
                    phi,
                    &format!("phi at t={t:?}"),
                )?;
            }
        }
    }
    let first = loop_out.rows.first().unwrap();
    let last = loop_out.rows.last().unwrap();
    summary.push(format!(
        "steps={} t_final={:?} mass drift={:.3e} energy {:?} -> {:?}",
        config.stepper.as_ref().map(|s| s.steps).unwrap_or(0),
        last[0],
        (last[1] - first[1]).abs() / first[1].abs().max(1.0),
        first[2],
        last[2]
    ));
    summary.push(format!("phi range [{:?}, {:?}]", last[3], last[4]));
    Ok(())
}

fn run_homogeneous(
    config: &RunConfig,
    out: &mut OutputWriter,
    summary: &mut Vec<String>,
) -> Result<()> {
    let domain = config.grid.as_ref().unwrap().build_domain()?;
    let energy = config.energy.as_ref().unwrap().build()?;
    let sp = config.stepper.as_ref().unwrap();
    let cfg = sp.build(&energy);
    let phi0 = config.initial.as_ref().unwrap().build(&domain, config.seed);
    let mut state = ChState::new(phi0, &domain);
    let loop_out = time_loop(
        &mut state,
        &domain,
        &energy,
        &cfg,
        sp.steps,
        config.output.cadence,
        1.0,
        |s| step_ch(s, &domain, &energy, &cfg),
    )?;
    write_run_outputs(out, &domain, &loop_out, config, summary)
}

fn load_tensors(path: &str) -> Result<EffectiveTensors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!(
            "cannot read tensor file `{path}`: {e}; run `porous-ch cell-solve` first"
        ))
    })?;
    EffectiveTensors::from_json_str(&text)
}

fn run_upscaled(
    config: &RunConfig,
    out: &mut OutputWriter,
    summary: &mut Vec<String>,
) -> Result<()> {
    let domain = config.grid.as_ref().unwrap().build_domain()?;
    let energy = config.energy.as_ref().unwrap().build()?;
    let sp = config.stepper.as_ref().unwrap();
    let cfg = sp.build(&energy);
    let tensors = load_tensors(config.tensor_file.as_ref().unwrap())?;
    let mut sys = UpscaledSystem::new(&tensors, &energy);
    if config.use_g_tilde {
        let cell = build_cell(config.geometry.as_ref().unwrap())?;
        let g = upscaled_g_tilde_const(
            &cell,
            config.wetting.as_ref().unwrap(),
            config.normalize_g_tilde,
        )?;
        summary.push(format!("g_tilde = {g:?} (sign {:?})", config.g_tilde_sign));
        sys = sys.with_g_tilde(vec![g; domain.shape.len()], config.g_tilde_sign.value());
    }
    let phi0 = config.initial.as_ref().unwrap().build(&domain, config.seed);
    let mut state = ChState::new(phi0, &domain);
    let theta1 = tensors.theta1;
    let loop_out = time_loop(
        &mut state,
        &domain,
        &energy,
        &cfg,
        sp.steps,
        config.output.cadence,
        theta1,
        |s| step_macro(s, &domain, &sys, &cfg),
    )?;
    summary.push(format!("tensors: theta1={:?}", theta1));
    write_run_outputs(out, &domain, &loop_out, config, summary)
}

fn micro_grid_from_config(config: &RunConfig) -> Result<(PerforatedGrid, ReferenceCell)> {
    let cell = build_cell(config.geometry.as_ref().unwrap())?;
    let grid_spec = config.grid.as_ref().unwrap();
    let eps = config.epsilon.unwrap();
    let mut grid = build_perforated_domain(
        &cell,
        eps,
        &grid_spec.lengths,
        grid_spec.bc.faces(),
    )?;
    apply_micro_wetting(config, &mut grid)?;
    Ok((grid, cell))
}

fn apply_micro_wetting(config: &RunConfig, grid: &mut PerforatedGrid) -> Result<()> {
    if let Some(w) = &config.wetting {
        w.validate()?;
        if grid.domain.iface.is_empty() {
            return Ok(());
        }
        let n_classes = grid.domain.iface.iter().map(|f| f.class).max().unwrap() as usize;
        if w.a.len() < n_classes {
            return Err(Error::Config(format!(
                "wetting: {} coefficients for {} wall classes",
                w.a.len(),
                n_classes
            )));
        }
        let a = w.a.clone();
        let data = grid.wetting_data(w.gamma, w.cahn, |class, _x| a[class as usize - 1]);
        grid.domain.set_interface_neumann(data)?;
    }
    Ok(())
}

fn run_micro(config: &RunConfig, out: &mut OutputWriter, summary: &mut Vec<String>) -> Result<()> {
    let (grid, _cell) = micro_grid_from_config(config)?;
    let energy = config.energy.as_ref().unwrap().build()?;
    let sp = config.stepper.as_ref().unwrap();
    let cfg = sp.build(&energy);
    let phi0 = config.initial.as_ref().unwrap().build(&grid.domain, config.seed);
    let mut state = ChState::new(phi0, &grid.domain);
    summary.push(format!(
        "perforated grid: {} cells, porosity {:?}, {} interface faces",
        grid.domain.shape.len(),
        grid.porosity(),
        grid.domain.iface.len()
    ));
    let domain = grid.domain.clone();
    let loop_out = time_loop(
        &mut state,
        &domain,
        &energy,
        &cfg,
        sp.steps,
        config.output.cadence,
        1.0,
        |s| step_ch(s, &domain, &energy, &cfg),
    )?;
    write_run_outputs(out, &domain, &loop_out, config, summary)
}

fn run_channel(config: &RunConfig, out: &mut OutputWriter, summary: &mut Vec<String>) -> Result<()> {
    let wetting = config.wetting.as_ref().unwrap();
    let pattern = config.channel_pattern().unwrap();
    let inflow = config.channel.as_ref().unwrap().inflow;
    let g0 = upscaled_g0_channel(&pattern, wetting)?;
    summary.push(format!("upscaled wall datum g0 = {g0:?}"));
    match effective_contact_angle(g0, wetting.gamma, wetting.cahn) {
        Ok(c) => summary.push(format!(
            "a_eff = {:?}, A = {:?}, cos(theta_e) = {:?}, theta_e = {:?} rad ({:?} deg)",
            c.a_eff,
            c.a_param,
            c.cos_theta,
            c.theta,
            c.theta.to_degrees()
        )),
        Err(e) => summary.push(format!("effective contact angle: {e}")),
    }

    let grid_spec = config.grid.as_ref().unwrap();
    let domain = channel_domain(grid_spec, g0, inflow)?;
    let energy = config.energy.as_ref().unwrap().build()?;
    let sp = config.stepper.as_ref().unwrap();
    let cfg = sp.build(&energy);
    let phi0 = config.initial.as_ref().unwrap().build(&domain, config.seed);
    let mut state = ChState::new(phi0, &domain);
    let loop_out = time_loop(
        &mut state,
        &domain,
        &energy,
        &cfg,
        sp.steps,
        config.output.cadence,
        1.0,
        |s| step_ch(s, &domain, &energy, &cfg),
    )?;
    write_run_outputs(out, &domain, &loop_out, config, summary)
}

/// Channel boundary layout: inflow on the left face, zero flux on the right,
/// the upscaled wall datum on every transverse wall.
pub fn channel_domain(grid_spec: &GridSpec, g0: f64, inflow: f64) -> Result<Domain> {
    let d = grid_spec.lengths.len();
    let mut bc = [[FaceBc::NoFlux; 2]; 3];
    bc[0][0] = FaceBc::Inflow { flux: inflow };
    bc[0][1] = FaceBc::ZeroFlux;
    for axis in 1..d {
        bc[axis][0] = FaceBc::Wall { g: g0 };
        bc[axis][1] = FaceBc::Wall { g: g0 };
    }
    let sizes = grid_spec
        .sizes
        .as_ref()
        .ok_or_else(|| Error::Config("grid: sizes are required for the channel scenario".into()))?;
    Domain::new(d, sizes, &grid_spec.lengths, bc, None)
}

fn run_contact_angle(
    config: &RunConfig,
    out: &mut OutputWriter,
    summary: &mut Vec<String>,
) -> Result<()> {
    let wetting = config.wetting.as_ref().unwrap();
    let g0 = match config.contact.as_ref().and_then(|c| c.g0) {
        Some(g0) => g0,
        None => {
            let cell = build_cell(config.geometry.as_ref().unwrap())?;
            upscaled_g_tilde_const(&cell, wetting, config.normalize_g_tilde)?
        }
    };
    let c = effective_contact_angle(g0, wetting.gamma, wetting.cahn)?;
    let report = format!(
        "g0 = {:?}\na_eff = {:?}\nA = {:?}\ncos(theta_e) = {:?}\ntheta_e = {:?} rad = {:?} deg\n",
        g0,
        c.a_eff,
        c.a_param,
        c.cos_theta,
        c.theta,
        c.theta.to_degrees()
    );
    out.write_with_header("contact_angle.txt", &report, "effective contact angle")?;
    for line in report.lines() {
        summary.push(line.to_string());
    }
    Ok(())
}

struct MicroJobResult {
    eps: f64,
    snapshots: Vec<(f64, Vec<f64>)>,
    diag_first: f64,
    diag_last: f64,
    grid: PerforatedGrid,
}

fn run_compare(
    config: &RunConfig,
    out: &mut OutputWriter,
    summary: &mut Vec<String>,
    threads: usize,
) -> Result<()> {
    let cmp = config.compare.as_ref().unwrap();
    if matches!(config.initial, Some(InitialSpec::Noise { .. })) {
        return Err(Error::Config(
            "compare: the initial datum must be grid-independent (not noise)".into(),
        ));
    }
    let cell = build_cell(config.geometry.as_ref().unwrap())?;
    let energy = config.energy.as_ref().unwrap().build()?;
    let sp = config.stepper.as_ref().unwrap();
    let macro_cfg = sp.build(&energy);
    let tol = config.cell.as_ref().map(|c| c.tol).unwrap_or(1e-10);
    if let Some(cs) = &config.cell {
        if (cs.lambda - sp.lambda).abs() > 1e-12 || (cs.mobility - sp.mobility).abs() > 1e-12 {
            return Err(Error::Config(
                "compare: cell (lambda, mobility) must match the stepper section".into(),
            ));
        }
    }
    let (tensors, _xi_v, _units) =
        assemble_tensors(&cell, sp.lambda, sp.mobility, tol, config.mv_variant)?;
    out.write_raw("tensors.json", &tensors.to_json_string(), "effective tensors")?;

    // macroscopic (upscaled) reference trajectory
    let macro_domain = config.grid.as_ref().unwrap().build_domain()?;
    let sys = UpscaledSystem::new(&tensors, &energy);
    let phi0 = config.initial.as_ref().unwrap().build(&macro_domain, config.seed);
    let mut macro_state = ChState::new(phi0, &macro_domain);
    let macro_loop = time_loop(
        &mut macro_state,
        &macro_domain,
        &energy,
        &macro_cfg,
        sp.steps,
        config.output.cadence,
        tensors.theta1,
        |s| step_macro(s, &macro_domain, &sys, &macro_cfg),
    )?;
    out.write_series(
        "macro_series.csv",
        &["t", "mass", "energy", "phi_min", "phi_max"],
        &macro_loop.rows,
        "macro (upscaled) monitors",
    )?;

    // micro runs per epsilon
    let micro_cfg = StepperConfig {
        dt: macro_cfg.dt / cmp.micro_substeps as f64,
        scheme: cmp.micro_scheme.unwrap_or(macro_cfg.scheme),
        ..macro_cfg
    };
    let micro_steps = sp.steps * cmp.micro_substeps;
    let micro_cadence = config.output.cadence * cmp.micro_substeps;
    let job = |eps: f64| -> Result<MicroJobResult> {
        let grid_spec = config.grid.as_ref().unwrap();
        let mut grid = build_perforated_domain(&cell, eps, &grid_spec.lengths, grid_spec.bc.faces())?;
        apply_micro_wetting(config, &mut grid)?;
        let phi0 = config.initial.as_ref().unwrap().build(&grid.domain, config.seed);
        let mut state = ChState::new(phi0, &grid.domain);
        let diag_first = mean(&grid.local_equilibrium_diagnostic(&state.phi, &energy, micro_cfg.lambda)?);
        let domain = grid.domain.clone();
        let loop_out = time_loop(
            &mut state,
            &domain,
            &energy,
            &micro_cfg,
            micro_steps,
            micro_cadence,
            1.0,
            |s| step_ch(s, &domain, &energy, &micro_cfg),
        )?;
        let diag_last =
            mean(&grid.local_equilibrium_diagnostic(&state.phi, &energy, micro_cfg.lambda)?);
        Ok(MicroJobResult {
            eps,
            snapshots: loop_out.snapshots,
            diag_first,
            diag_last,
            grid,
        })
    };

    let results: Vec<MicroJobResult> = if threads > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = cmp
                .epsilons
                .iter()
                .map(|&eps| scope.spawn(move || job(eps)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("micro job panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        cmp.epsilons.iter().map(|&eps| job(eps)).collect::<Result<Vec<_>>>()?
    };

    let mut rows = Vec::new();
    let mut diag_rows = Vec::new();
    let mut final_l2 = Vec::new();
    for r in &results {
        let points = compare_micro_macro(&r.snapshots, &r.grid, &macro_loop.snapshots, &macro_domain)?;
        for p in &points {
            rows.push(vec![r.eps, p.time, p.l2, p.max]);
        }
        let last = points.last().unwrap();
        final_l2.push((r.eps, last.l2));
        diag_rows.push(vec![r.eps, 0.0, r.diag_first]);
        diag_rows.push(vec![r.eps, last.time, r.diag_last]);
        summary.push(format!(
            "eps={:?}: final L2={:?} max={:?}, mu cell-deviation {:?} -> {:?}",
            r.eps, last.l2, last.max, r.diag_first, r.diag_last
        ));
    }
    out.write_series(
        "compare.csv",
        &["eps", "t", "l2", "max"],
        &rows,
        "micro-vs-macro errors at matched times",
    )?;
    out.write_series(
        "diagnostics.csv",
        &["eps", "t", "mean_cell_mu_std"],
        &diag_rows,
        "local-equilibrium diagnostic (mean per-cell std of mu)",
    )?;
    let monotone = final_l2.windows(2).all(|w| w[1].1 <= w[0].1);
    summary.push(format!(
        "final L2 errors {:?} ({})",
        final_l2,
        if monotone {
            "monotone in eps"
        } else {
            "NOT monotone in eps"
        }
    ));
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
