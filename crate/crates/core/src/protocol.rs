//! Experiment orchestration: state preparation, the fixed-detuning transient
//! map, the adiabatic Q-switch sweep and pulse/frequency metrics.
//!
//! The pump is idealised as state preparation and the reset as a fresh run;
//! neither is simulated dynamically.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::dressed::{dressed_state, effective_coupling, resonant_gate_detuning, Branch, DressedError};
use crate::dynamics::{
    evolve, population, population_rate, step_count, stride_for, DensityMatrix, DynamicsError, Profile,
    SweepSchedule, Trajectory,
};
use crate::hilbert::{build_basis, BareLabel, BasisIndex, HilbertError};
use crate::model::{Detunings, SystemParams};
use crate::spectra::point_eigenvalues;

/// Stored samples per transient-map trajectory.
pub const TRANSIENT_SAMPLES: usize = 2000;
/// Stored samples for a switch run; dense enough for a trapezoid integral of
/// the pulse to match the emitted probability to 1e-6.
pub const PULSE_SAMPLES: usize = 20_000;
/// Labels recorded in a transient map: the four displayed states and the
/// gate-atom excitation.
pub const TRANSIENT_LABELS: [BareLabel; 5] = [
    BareLabel::CAVITY_PHOTON,
    BareLabel::CAVITY_ATOM,
    BareLabel::GATE_PHOTON,
    BareLabel::WAVEGUIDE_PHOTON,
    BareLabel::GATE_ATOM,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Dressed(#[from] DressedError),
    #[error(transparent)]
    Basis(#[from] HilbertError),
    #[error("{kind:?} state needs {label} in the basis")]
    KindBasisMismatch { kind: PrepKind, label: BareLabel },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no oscillation: spectral peak {peak:e} is below 5x the median floor {floor:e}")]
    NoOscillation { peak: f64, floor: f64 },
    #[error("window holds {periods:.1} periods of the dominant frequency; at least 10 are needed")]
    WindowTooShort { periods: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepKind {
    /// `|g_c 1_c g_q 0_q 0_W⟩`.
    BarePhoton,
    /// `|+_c g_q 0_q 0_W⟩` at the given Δ_c; the state reached by pumping at ω_c + Ω_c.
    DressedPlus,
    /// Global ground state.
    Ground,
}

pub fn prepare_state(
    kind: PrepKind,
    params: &SystemParams,
    det: &Detunings,
    basis: &Arc<BasisIndex>,
) -> Result<DensityMatrix, ProtocolError> {
    let one = Complex64::new(1.0, 0.0);
    let amplitudes = match kind {
        PrepKind::BarePhoton => vec![(BareLabel::CAVITY_PHOTON, one)],
        PrepKind::Ground => vec![(BareLabel::GROUND, one)],
        PrepKind::DressedPlus => {
            let d = dressed_state(params.rabi_c, det.delta_c, Branch::Plus)?;
            vec![(BareLabel::CAVITY_PHOTON, d.amplitude_g1), (BareLabel::CAVITY_ATOM, d.amplitude_e0)]
        }
    };
    for (label, _) in &amplitudes {
        if !basis.contains(label) {
            return Err(ProtocolError::KindBasisMismatch { kind, label: *label });
        }
    }
    Ok(DensityMatrix::pure(basis.clone(), &amplitudes)?)
}

/// The five-state single-excitation basis all protocol runs live in.
pub fn one_quantum_basis() -> Arc<BasisIndex> {
    build_basis(1, Some(1)).expect("n_max = 1 is a valid truncation")
}

#[derive(Debug, Clone)]
pub struct TransientMap {
    pub delta_q_grid: Vec<f64>,
    pub times: Vec<f64>,
    /// One surface per entry of [`TRANSIENT_LABELS`], indexed `[grid][time]`.
    pub surfaces: Vec<(BareLabel, Vec<Vec<f64>>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePeak {
    pub value: f64,
    pub delta_q: f64,
    pub time: f64,
}

impl TransientMap {
    pub fn surface(&self, label: &BareLabel) -> Option<&Vec<Vec<f64>>> {
        self.surfaces.iter().find(|(l, _)| l == label).map(|(_, s)| s)
    }

    /// Largest value of one surface over `|Δ_q − centre| ≤ half_width` and `t ≤ t_max`.
    pub fn peak(&self, label: &BareLabel, centre: f64, half_width: f64, t_max: f64) -> Option<SurfacePeak> {
        let surface = self.surface(label)?;
        let mut best: Option<SurfacePeak> = None;
        for (g, row) in surface.iter().enumerate() {
            let dq = self.delta_q_grid[g];
            if (dq - centre).abs() > half_width {
                continue;
            }
            for (k, &value) in row.iter().enumerate() {
                if self.times[k] > t_max * (1.0 + 1e-12) {
                    break;
                }
                if best.is_none_or(|b| value > b.value) {
                    best = Some(SurfacePeak { value, delta_q: dq, time: self.times[k] });
                }
            }
        }
        best
    }

    /// Largest value of one surface anywhere.
    pub fn max(&self, label: &BareLabel) -> Option<f64> {
        self.surface(label).map(|s| s.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// One bare-photon trajectory per grid point at fixed Δ_q, run in parallel.
pub fn run_transient_map(
    params: &SystemParams,
    delta_c: f64,
    delta_q_grid: &[f64],
    t_max: f64,
    dt: f64,
) -> Result<TransientMap, ProtocolError> {
    let (lo, hi) = (-params.delta() - 2.0 * params.rabi_c, -params.delta() + 2.0 * params.rabi_c);
    let (gmin, gmax) = delta_q_grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if delta_q_grid.is_empty() || gmin > lo || gmax < hi {
        return Err(ProtocolError::Config(format!("transient grid must span [{lo}, {hi}]")));
    }
    if !(t_max > 0.0) {
        return Err(ProtocolError::Config(format!("t_max must be positive, got {t_max}")));
    }
    let basis = one_quantum_basis();
    let rho0 = prepare_state(PrepKind::BarePhoton, params, &Detunings::new(delta_c, 0.0), &basis)?;
    let stride = stride_for(step_count(t_max, dt), TRANSIENT_SAMPLES);

    let runs: Vec<Result<Trajectory, DynamicsError>> = delta_q_grid
        .par_iter()
        .map(|&dq| {
            let schedule = SweepSchedule::constant(delta_c, dq, t_max)?;
            evolve(&rho0, params, &schedule, dt, stride)
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let times = runs[0].times.clone();
    let mut surfaces = Vec::with_capacity(TRANSIENT_LABELS.len());
    for label in TRANSIENT_LABELS {
        let rows = runs.iter().map(|r| population(r, &label)).collect::<Result<Vec<_>, _>>()?;
        surfaces.push((label, rows));
    }
    Ok(TransientMap { delta_q_grid: delta_q_grid.to_vec(), times, surfaces })
}

/// Half-width of the peak search windows around the nominal resonances, in
/// units of Ω_c.
pub const PEAK_WINDOW: f64 = 0.5;
/// A plateau in the waveguide peak starts when its growth rate, averaged
/// over one population beat `π/Ω_c`, falls below this fraction of the largest
/// rate seen so far, and ends when it recovers.
pub const PLATEAU_FRACTION: f64 = 0.1;
/// Rates are ignored until the peak exceeds this fraction of its value at
/// the end of the scan, so start-up wiggles do not count as a plateau.
pub const ONSET_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SaturationScan {
    /// End of the first plateau of the upper-resonance waveguide peak, or the
    /// scan limit if no plateau completes.
    pub t_max: f64,
    pub plateau_found: bool,
    pub times: Vec<f64>,
    /// Waveguide peak near `−δ + Ω_c` versus time.
    pub upper_peak: Vec<f64>,
    /// Waveguide peak near `−δ − Ω_c` versus time.
    pub lower_peak: Vec<f64>,
    pub map: TransientMap,
}

impl SaturationScan {
    pub fn upper_at_t_max(&self) -> f64 {
        value_at(&self.times, &self.upper_peak, self.t_max)
    }

    pub fn lower_at_t_max(&self) -> f64 {
        value_at(&self.times, &self.lower_peak, self.t_max)
    }
}

fn value_at(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.iter().rposition(|&x| x <= t * (1.0 + 1e-12)).unwrap_or(0);
    values[k]
}

/// Waveguide peak near each nominal resonance as a function of the time span.
///
/// The waveguide population only grows, so the peaks climb in steps, one per
/// exchange cycle between cavity and gate. The saturated span is taken as the
/// end of the first plateau of the upper peak.
pub fn saturation_scan(
    params: &SystemParams,
    delta_c: f64,
    delta_q_grid: &[f64],
    t_limit: f64,
    dt: f64,
) -> Result<SaturationScan, ProtocolError> {
    let map = run_transient_map(params, delta_c, delta_q_grid, t_limit, dt)?;
    let half = PEAK_WINDOW * params.rabi_c;
    let series = |centre: f64| -> Vec<f64> {
        let surface = map.surface(&BareLabel::WAVEGUIDE_PHOTON).expect("waveguide surface is always recorded");
        (0..map.times.len())
            .map(|k| {
                map.delta_q_grid
                    .iter()
                    .zip(surface)
                    .filter(|(dq, _)| (**dq - centre).abs() <= half)
                    .map(|(_, row)| row[k])
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let upper_peak = series(-params.delta() + params.rabi_c);
    let lower_peak = series(-params.delta() - params.rabi_c);
    let (t_max, plateau_found) = match plateau_end(&map.times, &upper_peak, PI / params.rabi_c, PLATEAU_FRACTION) {
        Some(t) => (t, true),
        None => (t_limit, false),
    };
    Ok(SaturationScan { t_max, plateau_found, times: map.times.clone(), upper_peak, lower_peak, map })
}

/// Rates are averaged over `span` so the fast population beat inside each
/// step does not split it.
pub fn plateau_end(times: &[f64], values: &[f64], span: f64, fraction: f64) -> Option<f64> {
    let onset = ONSET_FRACTION * values.last().copied().unwrap_or(0.0);
    let mut fastest = 0.0f64;
    let mut on_plateau = false;
    let mut ahead = 0;
    for k in 0..values.len() {
        while ahead < values.len() && times[ahead] < times[k] + span {
            ahead += 1;
        }
        if ahead == values.len() {
            break;
        }
        if values[k] < onset {
            continue;
        }
        let rate = (values[ahead] - values[k]) / (times[ahead] - times[k]);
        fastest = fastest.max(rate);
        if fastest <= 0.0 {
            continue;
        }
        if !on_plateau && rate < fraction * fastest {
            on_plateau = true;
        } else if on_plateau && rate >= fraction * fastest {
            return Some(times[k]);
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct PulseRecord {
    pub params: SystemParams,
    pub trajectory: Trajectory,
    pub times: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub rho_ww: Vec<f64>,
    /// `dρ_WW/dt` from the master equation at each sample.
    pub intensity: Vec<f64>,
    /// Ascending one-quantum eigenvalues of H at each sample's Δ_q.
    pub eigenvalue_track: Vec<Vec<f64>>,
    /// Trapezoid integral of the intensity over the run.
    pub integral: f64,
    pub peak_time: f64,
}

/// Gate detuning at which the stored cavity excitation is handed to the gate.
pub fn switching_resonance(params: &SystemParams, delta_c: f64) -> Result<f64, ProtocolError> {
    resonant_gate_detuning(params, delta_c, Branch::Plus)
        .ok_or_else(|| ProtocolError::Config("gate branch never meets the upper cavity level".into()))
}

fn check_sweep(params: &SystemParams, schedule: &SweepSchedule) -> Result<(), ProtocolError> {
    let ramps: Vec<f64> = schedule
        .segments()
        .iter()
        .filter(|s| s.profile == Profile::Linear && s.delta_q_end != s.delta_q_start)
        .map(|s| s.delta_q_end - s.delta_q_start)
        .collect();
    if ramps.is_empty() {
        return Err(ProtocolError::Config("schedule has no detuning ramp".into()));
    }
    if !(ramps.iter().all(|&d| d > 0.0) || ramps.iter().all(|&d| d < 0.0)) {
        return Err(ProtocolError::Config("detuning sweep is not monotonic".into()));
    }
    let resonance = switching_resonance(params, schedule.delta_c())?;
    let (lo, hi) = schedule.delta_q_range();
    if !(lo < resonance && resonance < hi) {
        return Err(ProtocolError::Config(format!(
            "sweep [{lo}, {hi}] does not cross the switching resonance at {resonance}"
        )));
    }
    Ok(())
}

/// Adiabatic Q-switch: start in `|+_c⟩`, sweep Δ_q through the switching
/// resonance and record the waveguide pulse.
pub fn run_switch_protocol(
    params: &SystemParams,
    schedule: &SweepSchedule,
    dt: f64,
) -> Result<PulseRecord, ProtocolError> {
    run_switch_protocol_sampled(params, schedule, dt, PULSE_SAMPLES)
}

pub fn run_switch_protocol_sampled(
    params: &SystemParams,
    schedule: &SweepSchedule,
    dt: f64,
    samples: usize,
) -> Result<PulseRecord, ProtocolError> {
    check_sweep(params, schedule)?;
    let basis = one_quantum_basis();
    let rho0 = prepare_state(PrepKind::DressedPlus, params, &Detunings::new(schedule.delta_c(), 0.0), &basis)?;
    let stride = stride_for(step_count(schedule.total_duration(), dt), samples);
    let trajectory = evolve(&rho0, params, schedule, dt, stride)?;

    let rho_ww = population(&trajectory, &BareLabel::WAVEGUIDE_PHOTON)?;
    let intensity = population_rate(&trajectory, &BareLabel::WAVEGUIDE_PHOTON)?;
    let eigenvalue_track: Vec<Vec<f64>> = trajectory
        .delta_q
        .par_iter()
        .map(|&dq| {
            point_eigenvalues(params, &Detunings::new(schedule.delta_c(), dq), &basis)
                .unwrap_or_else(|| vec![f64::NAN; basis.dim()])
        })
        .collect();
    let times = trajectory.times.clone();
    let integral = trapezoid(&times, &intensity);
    let peak = intensity
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > intensity[best] { k } else { best });
    Ok(PulseRecord {
        params: *params,
        delta_q: trajectory.delta_q.clone(),
        peak_time: times[peak],
        times,
        rho_ww,
        intensity,
        eigenvalue_track,
        integral,
        trajectory,
    })
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseMetrics {
    pub integral: f64,
    /// `ρ_WW(T) − ρ_WW(0)`.
    pub emitted: f64,
    pub peak_time: f64,
    pub peak_intensity: f64,
    /// `None` when the pulse has no resolvable half-maximum crossings.
    pub fwhm: Option<f64>,
    pub rise_width: Option<f64>,
    pub fall_width: Option<f64>,
    /// `rise_width / fall_width`.
    pub width_ratio: Option<f64>,
    /// First time Δ_q is within 5𝒥 of `−δ + Ω_c`.
    pub window_entry_time: Option<f64>,
    /// ρ_WW accumulated before `window_entry_time`.
    pub quiescent_loss: Option<f64>,
}

pub fn pulse_metrics(record: &PulseRecord) -> PulseMetrics {
    let t = &record.times;
    let y = &record.intensity;
    let emitted = record.rho_ww.last().copied().unwrap_or(0.0) - record.rho_ww.first().copied().unwrap_or(0.0);
    let peak = y.iter().enumerate().fold(0, |best, (k, &v)| if v > y[best] { k } else { best });
    let peak_intensity = y.get(peak).copied().unwrap_or(0.0);

    let (mut rise_width, mut fall_width) = (None, None);
    if peak_intensity > 0.0 {
        let half = 0.5 * peak_intensity;
        let crossing = |a: usize, b: usize| t[a] + (t[b] - t[a]) * (half - y[a]) / (y[b] - y[a]);
        if let Some(k) = (0..peak).rev().find(|&k| y[k] < half) {
            rise_width = Some(t[peak] - crossing(k, k + 1));
        }
        if let Some(k) = (peak + 1..y.len()).find(|&k| y[k] < half) {
            fall_width = Some(crossing(k - 1, k) - t[peak]);
        }
    }
    let fwhm = rise_width.zip(fall_width).map(|(r, f)| r + f);
    let width_ratio = rise_width.zip(fall_width).map(|(r, f)| r / f);

    let window_entry = effective_coupling(&record.params).ok().and_then(|j| {
        let centre = -record.params.delta() + record.params.rabi_c;
        record.delta_q.iter().position(|dq| (dq - centre).abs() <= 5.0 * j)
    });
    PulseMetrics {
        integral: record.integral,
        emitted,
        peak_time: if peak_intensity > 0.0 { record.peak_time } else { f64::NAN },
        peak_intensity,
        fwhm,
        rise_width,
        fall_width,
        width_ratio,
        window_entry_time: window_entry.map(|k| t[k]),
        quiescent_loss: window_entry.map(|k| record.rho_ww[k] - record.rho_ww[0]),
    }
}

/// Dominant angular frequency of a uniformly sampled series inside `window`.
///
/// Hann-windowed, zero-padded FFT of the mean-subtracted samples with a
/// parabolic fit to the log-magnitude around the strongest bin. A population
/// `sin²(Ωt)` oscillates at `2Ω`; the caller halves the result to compare with
/// an amplitude frequency.
pub fn extract_oscillation_frequency(times: &[f64], series: &[f64], window: (f64, f64)) -> Result<f64, ProtocolError> {
    let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= window.0 && times[k] <= window.1).collect();
    if idx.len() < 8 {
        return Err(ProtocolError::WindowTooShort { periods: 0.0 });
    }
    let n = idx.len();
    let h = (times[idx[n - 1]] - times[idx[0]]) / (n - 1) as f64;
    let mean = idx.iter().map(|&k| series[k]).sum::<f64>() / n as f64;
    let spread = idx.iter().map(|&k| (series[k] - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return Err(ProtocolError::NoOscillation { peak: spread, floor: 0.0 });
    }
    let padded = (8 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    for (j, &k) in idx.iter().enumerate() {
        let hann = 0.5 - 0.5 * (2.0 * PI * j as f64 / (n - 1) as f64).cos();
        buf[j] = Complex64::new((series[k] - mean) * hann, 0.0);
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mags: Vec<f64> = buf[..padded / 2].iter().map(|z| z.norm()).collect();

    // skip the DC lobe of the Hann window (one raw bin = padded/n padded bins)
    let start = 2 * padded / n;
    let (peak_bin, peak) = mags
        .iter()
        .enumerate()
        .skip(start)
        .fold((start, 0.0f64), |b, (k, &m)| if m > b.1 { (k, m) } else { b });
    let mut sorted: Vec<f64> = mags[start..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
    if !(peak > 0.0) || peak < 5.0 * floor || peak_bin + 1 >= mags.len() {
        return Err(ProtocolError::NoOscillation { peak, floor });
    }
    let (a, b, c) = (mags[peak_bin - 1].ln(), peak.ln(), mags[peak_bin + 1].ln());
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let freq = (peak_bin as f64 + offset) / (padded as f64 * h);
    let periods = freq * (times[idx[n - 1]] - times[idx[0]]);
    if periods < 10.0 {
        return Err(ProtocolError::WindowTooShort { periods });
    }
    Ok(2.0 * PI * freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Segment;
    use crate::hilbert::build_basis;

    #[test]
    fn prepared_states() {
        let p = SystemParams::fig5();
        let basis = one_quantum_basis();
        let det = Detunings::default();
        let plus = prepare_state(PrepKind::DressedPlus, &p, &det, &basis).unwrap();
        assert!((plus.population(&BareLabel::CAVITY_PHOTON).unwrap() - 0.5).abs() < 1e-15);
        assert!((plus.population(&BareLabel::CAVITY_ATOM).unwrap() - 0.5).abs() < 1e-15);
        let g1 = basis.index_of(&BareLabel::CAVITY_PHOTON).unwrap();
        let e0 = basis.index_of(&BareLabel::CAVITY_ATOM).unwrap();
        assert!((plus.matrix()[(g1, e0)].re - 0.5).abs() < 1e-15);

        let bare = prepare_state(PrepKind::BarePhoton, &p, &det, &basis).unwrap();
        assert_eq!(bare.populations().iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(bare.population(&BareLabel::CAVITY_PHOTON).unwrap(), 1.0);

        assert!(matches!(
            prepare_state(PrepKind::Ground, &p, &det, &basis),
            Err(ProtocolError::KindBasisMismatch { kind: PrepKind::Ground, .. })
        ));
        let full = build_basis(1, None).unwrap();
        let ground = prepare_state(PrepKind::Ground, &p, &det, &full).unwrap();
        assert_eq!(ground.population(&BareLabel::GROUND).unwrap(), 1.0);
        for rho in [&plus, &bare, &ground] {
            assert!(rho.trace_error() < 1e-15 && rho.hermiticity_error() == 0.0 && rho.min_eigenvalue() > -1e-15);
        }
    }

    #[test]
    fn detuned_dressed_plus_is_the_upper_eigenvector() {
        let p = SystemParams::fig5();
        let det = Detunings::new(0.7, 0.0);
        let rho = prepare_state(PrepKind::DressedPlus, &p, &det, &one_quantum_basis()).unwrap();
        let d = dressed_state(p.rabi_c, 0.7, Branch::Plus).unwrap();
        assert!((rho.population(&BareLabel::CAVITY_ATOM).unwrap() - d.amplitude_e0.norm_sqr()).abs() < 1e-15);
        assert!(rho.population(&BareLabel::CAVITY_ATOM).unwrap() > 0.5);
    }

    #[test]
    fn frequency_of_sin_squared() {
        let omega = 0.8;
        let times: Vec<f64> = (0..4000).map(|k| k as f64 * 0.05).collect();
        let series: Vec<f64> = times.iter().map(|t| (omega * t).sin().powi(2)).collect();
        let w = extract_oscillation_frequency(&times, &series, (0.0, 200.0)).unwrap();
        assert!((w - 2.0 * omega).abs() < 1e-3 * omega, "{w}");
    }

    #[test]
    fn frequency_diagnostics() {
        let times: Vec<f64> = (0..1000).map(|k| k as f64 * 0.1).collect();
        let flat = vec![0.3; times.len()];
        assert!(matches!(
            extract_oscillation_frequency(&times, &flat, (0.0, 100.0)),
            Err(ProtocolError::NoOscillation { .. })
        ));
        let slow: Vec<f64> = times.iter().map(|t| (0.2 * t).sin()).collect();
        assert!(matches!(
            extract_oscillation_frequency(&times, &slow, (0.0, 100.0)),
            Err(ProtocolError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn plateau_detection() {
        let times: Vec<f64> = (0..300).map(f64::from).collect();
        // two smooth steps centred at 50 and 200
        let values: Vec<f64> =
            times.iter().map(|t| 0.2 / (1.0 + (-(t - 50.0) / 5.0).exp()) + 0.1 / (1.0 + (-(t - 200.0) / 5.0).exp())).collect();
        let end = plateau_end(&times, &values, 2.0, PLATEAU_FRACTION).unwrap();
        assert!(end > 150.0 && end < 200.0, "{end}");
        assert_eq!(plateau_end(&times, &vec![0.0; 300], 2.0, PLATEAU_FRACTION), None);
    }

    #[test]
    fn sweep_checks() {
        let p = SystemParams::fig5();
        let miss = SweepSchedule::new(0.0, vec![Segment::ramp(10.0, -2.5, -2.2)]).unwrap();
        assert!(matches!(run_switch_protocol(&p, &miss, 0.01), Err(ProtocolError::Config(_))));
        let hold = SweepSchedule::constant(0.0, -2.7, 10.0).unwrap();
        assert!(matches!(run_switch_protocol(&p, &hold, 0.01), Err(ProtocolError::Config(_))));
        let back_and_forth =
            SweepSchedule::new(0.0, vec![Segment::ramp(10.0, -3.2, -2.2), Segment::ramp(10.0, -2.2, -3.2)]).unwrap();
        assert!(matches!(run_switch_protocol(&p, &back_and_forth, 0.01), Err(ProtocolError::Config(_))));
    }

    #[test]
    fn transient_grid_must_cover_both_resonances() {
        let p = SystemParams::fig3();
        assert!(matches!(run_transient_map(&p, 0.0, &[-2.5, -2.0, -1.5], 1.0, 0.0125), Err(ProtocolError::Config(_))));
    }

    #[test]
    fn metrics_of_silent_record() {
        let p = SystemParams::fig5();
        let basis = one_quantum_basis();
        let rho = prepare_state(PrepKind::DressedPlus, &p, &Detunings::default(), &basis).unwrap();
        let schedule = SweepSchedule::constant(0.0, -4.0, 1.0).unwrap();
        let trajectory = evolve(&rho, &p, &schedule, 0.01, 10).unwrap();
        let n = trajectory.len();
        let record = PulseRecord {
            params: p,
            times: trajectory.times.clone(),
            delta_q: trajectory.delta_q.clone(),
            rho_ww: vec![0.0; n],
            intensity: vec![0.0; n],
            eigenvalue_track: vec![Vec::new(); n],
            integral: 0.0,
            peak_time: 0.0,
            trajectory,
        };
        let m = pulse_metrics(&record);
        assert_eq!(m.integral, 0.0);
        assert_eq!(m.emitted, 0.0);
        assert!(m.fwhm.is_none() && m.width_ratio.is_none());
        assert!(m.peak_time.is_nan());
        assert!(m.quiescent_loss.is_none());
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let t = [0.0, 1.0, 3.0];
        assert_eq!(trapezoid(&t, &[1.0, 2.0, 4.0]), 7.5);
    }
}
