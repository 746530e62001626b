//! Dispatch of a resolved [`RunSpec`] to the numerical modules.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use qswitch_core::dressed::{
    effective_coupling, estimate_coupling, quality_factor, quiescent_population, resonant_gate_detuning, Branch,
    DressedError,
};
use qswitch_core::dynamics::{evolve, step_count, stride_for, DynamicsError, Trajectory};
use qswitch_core::protocol::{
    one_quantum_basis, prepare_state, pulse_metrics, run_switch_protocol_sampled, run_transient_map, saturation_scan,
    PrepKind, ProtocolError, TransientMap, PEAK_WINDOW,
};
use qswitch_core::spectra::{eigen_sweep, find_anticrossing, linspace, SpectraError};
use qswitch_core::{validate_params, BareLabel, Detunings};
use thiserror::Error;

use crate::config::{Command, ConfigError, RunSpec, TMax};
use crate::format::{csv_float, Cell, CsvWriter};

/// Device outcoupling time usually quoted for the nominal NV-centre design.
pub const QUOTED_OUTCOUPLING_TIME: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 4,
        }
    }
}

impl From<DynamicsError> for RunError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::StepTooLarge { .. } | DynamicsError::InvalidSchedule(_) => {
                RunError::Config(ConfigError::Invalid(e.to_string()))
            }
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<DressedError> for RunError {
    fn from(e: DressedError) -> Self {
        RunError::Config(ConfigError::Invalid(e.to_string()))
    }
}

impl From<ProtocolError> for RunError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Dynamics(d) => d.into(),
            ProtocolError::Dressed(d) => d.into(),
            ProtocolError::NoOscillation { .. } | ProtocolError::WindowTooShort { .. } => {
                RunError::Numerical(e.to_string())
            }
            _ => RunError::Config(ConfigError::Invalid(e.to_string())),
        }
    }
}

impl From<SpectraError> for RunError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::EmptyGrid | SpectraError::UnorderedGrid(_) | SpectraError::Basis(_) => {
                RunError::Config(ConfigError::Invalid(e.to_string()))
            }
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

/// Files and report lines of a finished run.
#[derive(Debug, Default, Clone)]
pub struct RunOutput {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    /// Human-readable results, printed and copied into the manifest.
    pub summary: Vec<String>,
    /// Parameter warnings and integrator diagnostics.
    pub diagnostics: Vec<String>,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

/// Run the computation; nothing touches the file system.
pub fn execute(spec: &RunSpec) -> Result<RunOutput, RunError> {
    let diag = validate_params(&spec.params);
    if !diag.is_valid() {
        return Err(ConfigError::Invalid(diag.violations.join("; ")).into());
    }
    let mut out = RunOutput::default();
    out.diagnostics.extend(diag.warnings.iter().map(|w| format!("warning: {w}")));
    match spec.command {
        Command::Spectra => spectra(spec, &mut out)?,
        Command::Transient => transient(spec, &mut out)?,
        Command::Switch => switch(spec, &mut out)?,
        Command::Quiescent => quiescent(spec, &mut out)?,
        Command::Estimate => estimate(spec, &mut out)?,
        Command::Validate => validate(spec, &mut out)?,
    }
    Ok(out)
}

fn grid(spec: &RunSpec) -> Vec<f64> {
    linspace(spec.grid_start, spec.grid_end, spec.grid_points)
}

fn spectra(spec: &RunSpec, out: &mut RunOutput) -> Result<(), RunError> {
    let p = &spec.params;
    let table = eigen_sweep(p, spec.delta_c, &grid(spec), spec.n_max)?;
    let mut csv = CsvWriter::new(&["delta_q".into(), "manifold".into(), "branch".into(), "energy".into()]);
    for (k, dq) in table.delta_q_grid.iter().enumerate() {
        for level in &table.levels[k] {
            csv.row(&[Cell::F(*dq), Cell::U(level.manifold as usize), Cell::U(level.branch), Cell::F(level.energy)]);
        }
    }
    out.files.push(("spectra.csv".into(), csv.finish()));

    for d in &table.diagnostics {
        out.diagnostics.push(format!("grid point {} manifold {}: {}", d.grid_index, d.manifold, d.message));
    }
    let j = effective_coupling(p).ok();
    for (name, branch) in [("upper", Branch::Plus), ("lower", Branch::Minus)] {
        let Some(centre) = resonant_gate_detuning(p, spec.delta_c, branch) else { continue };
        let half = 0.5 * p.rabi_c;
        match find_anticrossing(&table, 1, (centre - half, centre + half)) {
            Ok(x) => {
                let mut line = format!(
                    "{name} anticrossing: delta_q = {}, gap = {} ({:?})",
                    csv_float(x.location),
                    csv_float(x.gap),
                    x.kind
                );
                if let (Some(j), Branch::Plus) = (j, branch) {
                    line.push_str(&format!(", 2J = {}", csv_float(2.0 * j)));
                }
                out.summary.push(line);
            }
            Err(e) => out.diagnostics.push(format!("{name} anticrossing: {e}")),
        }
    }
    Ok(())
}

fn transient(spec: &RunSpec, out: &mut RunOutput) -> Result<(), RunError> {
    let p = &spec.params;
    let grid = grid(spec);
    let (map, t_max) = match spec.t_max {
        TMax::Auto => {
            let scan = saturation_scan(p, spec.delta_c, &grid, spec.scan_limit, spec.dt)?;
            if !scan.plateau_found {
                out.diagnostics.push(format!(
                    "no saturation plateau before scan_limit = {}; using the full span",
                    csv_float(spec.scan_limit)
                ));
            }
            out.summary.push(format!("saturation time t_max = {}", csv_float(scan.t_max)));
            (scan.map, scan.t_max)
        }
        TMax::Fixed(t) => (run_transient_map(p, spec.delta_c, &grid, t, spec.dt)?, t),
    };
    transient_peaks(spec, &map, t_max, out);

    let kept: Vec<usize> = (0..map.times.len()).filter(|&i| map.times[i] <= t_max * (1.0 + 1e-12)).collect();
    let stride = (kept.len() / spec.samples).max(1);
    let mut rows: Vec<usize> = kept.iter().copied().step_by(stride).collect();
    if rows.last() != kept.last() {
        rows.extend(kept.last());
    }
    let mut csv = CsvWriter::new(&["delta_q".into(), "t".into(), "state".into(), "population".into()]);
    for (g, dq) in map.delta_q_grid.iter().enumerate() {
        for &i in &rows {
            for (label, surface) in &map.surfaces {
                csv.row(&[Cell::F(*dq), Cell::F(map.times[i]), Cell::S(&label.name()), Cell::F(surface[g][i])]);
            }
        }
    }
    out.files.push(("transient.csv".into(), csv.finish()));
    Ok(())
}

fn transient_peaks(spec: &RunSpec, map: &TransientMap, t_max: f64, out: &mut RunOutput) {
    let p = &spec.params;
    let half = PEAK_WINDOW * p.rabi_c;
    for (name, centre) in [("upper", -p.delta() + p.rabi_c), ("lower", -p.delta() - p.rabi_c)] {
        if let Some(peak) = map.peak(&BareLabel::WAVEGUIDE_PHOTON, centre, half, t_max) {
            out.summary.push(format!(
                "{name} waveguide peak: {} at delta_q = {}, t = {}",
                csv_float(peak.value),
                csv_float(peak.delta_q),
                csv_float(peak.time)
            ));
        }
    }
    if let Some(max) = map.max(&BareLabel::GATE_ATOM) {
        out.summary.push(format!("max gate-atom population: {}", csv_float(max)));
    }
}

/// Integrator diagnostics shared by the time-domain commands.
fn trajectory_diagnostics(traj: &Trajectory, out: &mut RunOutput) {
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n0 = traj.mean_quanta.first().copied().unwrap_or(0.0);
    let drift = traj.mean_quanta.iter().fold(0.0f64, |m, n| m.max((n - n0).abs()));
    let min_eig = traj.min_eigenvalue.iter().copied().fold(f64::INFINITY, f64::min);
    out.diagnostics.push(format!("dt = {}, steps = {}", csv_float(traj.dt), traj.steps));
    out.diagnostics.push(format!("max |tr rho - 1| = {:e}", max(&traj.trace_error)));
    out.diagnostics.push(format!("max |rho - rho^+| = {:e}", max(&traj.herm_error)));
    out.diagnostics.push(format!("min eigenvalue = {min_eig:e}"));
    out.diagnostics.push(format!("max quanta drift = {drift:e}"));
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let labels = traj.basis.labels();
    let mut header = vec!["t".to_string()];
    header.extend(labels.iter().map(|l| format!("pop_{}", l.name())));
    header.extend(["trace_err", "herm_err", "min_eig", "mean_quanta"].map(String::from));
    let mut csv = CsvWriter::new(&header);
    for k in 0..traj.len() {
        let mut cells = vec![Cell::F(traj.times[k])];
        cells.extend(traj.populations[k].iter().map(|&x| Cell::F(x)));
        cells.extend([
            Cell::F(traj.trace_error[k]),
            Cell::F(traj.herm_error[k]),
            Cell::F(traj.min_eigenvalue[k]),
            Cell::F(traj.mean_quanta[k]),
        ]);
        csv.row(&cells);
    }
    csv.finish()
}

fn switch(spec: &RunSpec, out: &mut RunOutput) -> Result<(), RunError> {
    let schedule = spec.switch_schedule()?;
    let rec = run_switch_protocol_sampled(&spec.params, &schedule, spec.dt, spec.samples)?;
    let levels = rec.eigenvalue_track.first().map_or(0, Vec::len);
    let mut header: Vec<String> = ["t", "delta_q", "rho_WW", "intensity"].map(String::from).to_vec();
    header.extend((1..=levels).map(|i| format!("eig_{i}")));
    let mut csv = CsvWriter::new(&header);
    for k in 0..rec.times.len() {
        let mut cells = vec![Cell::F(rec.times[k]), Cell::F(rec.delta_q[k]), Cell::F(rec.rho_ww[k]), Cell::F(rec.intensity[k])];
        cells.extend(rec.eigenvalue_track[k].iter().map(|&e| Cell::F(e)));
        csv.row(&cells);
    }
    out.files.push(("pulse.csv".into(), csv.finish()));
    out.files.push(("trajectory.csv".into(), trajectory_csv(&rec.trajectory)));

    let m = pulse_metrics(&rec);
    let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), csv_float);
    out.summary.push(format!("final rho_WW = {}", csv_float(rec.rho_ww.last().copied().unwrap_or(0.0))));
    out.summary.push(format!("emitted = {}, integral of intensity = {}", csv_float(m.emitted), csv_float(m.integral)));
    out.summary.push(format!(
        "peak intensity {} at t = {}, fwhm = {}",
        csv_float(m.peak_intensity),
        csv_float(m.peak_time),
        opt(m.fwhm)
    ));
    out.summary.push(format!(
        "rise width = {}, fall width = {}, rise/fall = {}",
        opt(m.rise_width),
        opt(m.fall_width),
        opt(m.width_ratio)
    ));
    out.summary.push(format!("loss before the resonance window = {}", opt(m.quiescent_loss)));
    trajectory_diagnostics(&rec.trajectory, out);
    Ok(())
}

fn quiescent(spec: &RunSpec, out: &mut RunOutput) -> Result<(), RunError> {
    let p = &spec.params;
    let schedule = spec.quiescent_schedule()?;
    let basis = one_quantum_basis();
    let rho0 = prepare_state(PrepKind::DressedPlus, p, &Detunings::new(spec.delta_c, 0.0), &basis)?;
    let stride = stride_for(step_count(spec.quiescent_time, spec.dt), spec.samples);
    let traj = evolve(&rho0, p, &schedule, spec.dt, stride)?;

    let g1 = basis.index_of(&BareLabel::CAVITY_PHOTON).expect("one-quantum basis");
    let e0 = basis.index_of(&BareLabel::CAVITY_ATOM).expect("one-quantum basis");
    let w = basis.index_of(&BareLabel::WAVEGUIDE_PHOTON).expect("one-quantum basis");
    let mut csv =
        CsvWriter::new(&["t".into(), "cavity_excitation".into(), "rho_WW".into(), "closed_form_survival".into()]);
    for k in 0..traj.len() {
        let pops = &traj.populations[k];
        csv.row(&[
            Cell::F(traj.times[k]),
            Cell::F(pops[g1] + pops[e0]),
            Cell::F(pops[w]),
            Cell::F(quiescent_population(p, traj.times[k])),
        ]);
    }
    out.files.push(("quiescent.csv".into(), csv.finish()));
    out.files.push(("trajectory.csv".into(), trajectory_csv(&traj)));

    // survival ⟨+|ρ(T)|+⟩ = tr(ρ0 ρ(T)) for the pure initial state
    let survival = (rho0.matrix().transpose().component_mul(traj.final_state.matrix())).sum().re;
    let closed = quiescent_population(p, spec.quiescent_time);
    out.summary.push(format!(
        "survival at t = {}: closed form {:.4}, simulated {:.4} (difference {:.1e})",
        csv_float(spec.quiescent_time),
        closed,
        survival,
        survival - closed
    ));
    trajectory_diagnostics(&traj, out);
    Ok(())
}

fn estimate(spec: &RunSpec, out: &mut RunOutput) -> Result<(), RunError> {
    let p = &spec.params;
    let rabi = estimate_coupling(spec.dipole_moment, spec.transition_frequency, spec.mode_volume)?;
    let q_c = quality_factor(p.omega_c, p.kappa_cq)?;
    let q_q = quality_factor(p.omega_q, p.kappa_qw)?;
    let j = effective_coupling(p)?;
    let rows = [
        ("rabi_estimate", rabi),
        ("quality_cavity", q_c),
        ("quality_gate", q_q),
        ("effective_coupling", j),
        ("outcoupling_time", 1.0 / j),
        ("quoted_outcoupling_time", QUOTED_OUTCOUPLING_TIME),
    ];
    let mut csv = CsvWriter::new(&["quantity".into(), "value".into()]);
    for (name, v) in rows {
        csv.row(&[Cell::S(name), Cell::F(v)]);
    }
    out.files.push(("estimate.csv".into(), csv.finish()));
    out.summary.push(format!("coupling Omega = {} Hz", csv_float(rabi)));
    out.summary.push(format!("Q_c = omega_c / kappa_cq = {}", csv_float(q_c)));
    out.summary.push(format!("Q_q = omega_q / kappa_qw = {}", csv_float(q_q)));
    out.summary.push(format!(
        "outcoupling time 1/J = {} s (quoted design value {} s; 1/J uses J = kappa_cq rabi_q / (sqrt 2 delta))",
        csv_float(1.0 / j),
        csv_float(QUOTED_OUTCOUPLING_TIME)
    ));
    Ok(())
}

fn validate(spec: &RunSpec, out: &mut RunOutput) -> Result<(), RunError> {
    let p = &spec.params;
    out.summary.push("parameters valid".into());
    match effective_coupling(p) {
        Ok(j) => out.summary.push(format!("effective coupling J = {}", csv_float(j))),
        Err(e) => out.diagnostics.push(format!("effective coupling: {e}")),
    }
    for (name, branch) in [("upper", Branch::Plus), ("lower", Branch::Minus)] {
        if let Some(dq) = resonant_gate_detuning(p, spec.delta_c, branch) {
            out.summary.push(format!("{name} switching resonance at delta_q = {}", csv_float(dq)));
        }
    }
    out.summary.push(format!("time step dt = {}", csv_float(spec.dt)));
    Ok(())
}

/// Manifest text: `#` result lines followed by the resolved spec.
pub fn manifest(spec: &RunSpec, output: &RunOutput, wall: Duration) -> String {
    let mut text = format!("# qswitch {}\n", env!("CARGO_PKG_VERSION"));
    text.push_str(&format!("# wall_time_s = {:.3}\n", wall.as_secs_f64()));
    for line in &output.summary {
        text.push_str(&format!("# result: {line}\n"));
    }
    for line in &output.diagnostics {
        text.push_str(&format!("# diagnostic: {line}\n"));
    }
    for (name, _) in &output.files {
        text.push_str(&format!("# file: {name}\n"));
    }
    text.push_str(&spec.to_config_text());
    text
}

pub fn write_outputs(dir: &Path, spec: &RunSpec, output: &RunOutput, wall: Duration) -> Result<(), RunError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, contents) in &output.files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest(spec, output, wall)).map_err(io_err(&path))
}
