//! Exact-diagonalisation sweeps over the gate detuning and anti-crossing search.
//!
//! The Hamiltonian conserves total quanta, so each grid point is diagonalised
//! one manifold block at a time; every eigenvector then has a sharp quanta
//! number and inter-manifold crossings never mix. Branch labels follow each
//! curve by eigenvector overlap with the previous grid point.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::hilbert::{build_basis, BasisIndex, HilbertError};
use crate::linalg::symmetric_eigen;
use crate::model::{build_hamiltonian, Detunings, SystemParams};

/// Default number of detuning samples per sweep.
pub const DEFAULT_GRID_POINTS: usize = 801;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("detuning grid is empty")]
    EmptyGrid,
    #[error("detuning grid must be strictly increasing (index {0})")]
    UnorderedGrid(usize),
    #[error(transparent)]
    Basis(#[from] HilbertError),
    #[error("manifold {0} is not present in the table")]
    MissingManifold(u32),
    #[error("window [{lo}, {hi}] holds fewer than three grid points")]
    WindowTooNarrow { lo: f64, hi: f64 },
    #[error("no local gap minimum inside [{lo}, {hi}] for manifold {manifold}")]
    NotFound { manifold: u32, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub energy: f64,
    /// Total-quanta number of the eigenvector.
    pub manifold: u32,
    /// Index of the adiabatic curve within its manifold.
    pub branch: usize,
    /// `⟨v|N̂|v⟩`; equal to `manifold` up to rounding.
    pub quanta_expectation: f64,
    /// `⟨v|N̂²⟩ − ⟨v|N̂⟩²`.
    pub quanta_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointDiagnostic {
    pub grid_index: usize,
    pub manifold: u32,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SpectrumTable {
    pub delta_c: f64,
    pub delta_q_grid: Vec<f64>,
    /// Per grid point, all levels sorted by ascending energy.
    pub levels: Vec<Vec<Level>>,
    /// Sum of the diagonal of H per grid point.
    pub traces: Vec<f64>,
    pub diagnostics: Vec<PointDiagnostic>,
}

impl SpectrumTable {
    pub fn eigenvalues(&self, point: usize) -> Vec<f64> {
        self.levels[point].iter().map(|l| l.energy).collect()
    }

    pub fn manifold_levels(&self, point: usize, manifold: u32) -> impl Iterator<Item = &Level> {
        self.levels[point].iter().filter(move |l| l.manifold == manifold)
    }

    pub fn manifolds(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self.levels.iter().flatten().map(|l| l.manifold).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// Energy of one branch across the grid (`NaN` where diagonalisation failed).
    pub fn curve(&self, manifold: u32, branch: usize) -> Vec<f64> {
        self.levels
            .iter()
            .map(|pt| {
                pt.iter()
                    .find(|l| l.manifold == manifold && l.branch == branch)
                    .map_or(f64::NAN, |l| l.energy)
            })
            .collect()
    }
}

/// Eigenpairs for one manifold block at one grid point.
struct BlockSolution {
    manifold: u32,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn manifold_blocks(basis: &BasisIndex) -> Vec<(u32, Vec<usize>)> {
    let mut blocks: Vec<(u32, Vec<usize>)> = Vec::new();
    for (i, l) in basis.labels().iter().enumerate() {
        let n = l.total_quanta();
        match blocks.iter_mut().find(|(m, _)| *m == n) {
            Some((_, idx)) => idx.push(i),
            None => blocks.push((n, vec![i])),
        }
    }
    blocks.sort_by_key(|(m, _)| *m);
    blocks
}

fn diagonalize_point(
    params: &SystemParams,
    det: &Detunings,
    basis: &Arc<BasisIndex>,
    blocks: &[(u32, Vec<usize>)],
) -> (f64, Vec<Result<BlockSolution, u32>>) {
    let h = build_hamiltonian(params, det, basis);
    let trace = h.trace().re;
    let solutions = blocks
        .iter()
        .map(|(manifold, idx)| {
            let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h.get(idx[r], idx[c]).re);
            symmetric_eigen(block)
                .map(|(energies, vectors)| BlockSolution { manifold: *manifold, energies, vectors })
                .ok_or(*manifold)
        })
        .collect();
    (trace, solutions)
}

/// Ascending eigenvalues of H on `basis` at one detuning.
pub fn point_eigenvalues(params: &SystemParams, det: &Detunings, basis: &Arc<BasisIndex>) -> Option<Vec<f64>> {
    let blocks = manifold_blocks(basis);
    let (_, solutions) = diagonalize_point(params, det, basis, &blocks);
    let mut values = Vec::with_capacity(basis.dim());
    for s in solutions {
        values.extend(s.ok()?.energies);
    }
    values.sort_by(f64::total_cmp);
    Some(values)
}

/// Full-space sweep with photon truncation `n_max`.
pub fn eigen_sweep(params: &SystemParams, delta_c: f64, grid: &[f64], n_max: u32) -> Result<SpectrumTable, SpectraError> {
    let basis = build_basis(n_max, None)?;
    eigen_sweep_on(params, delta_c, grid, &basis)
}

/// Sweep on an arbitrary (possibly quanta-filtered) basis. Grid points are
/// diagonalised in parallel; the result is ordered by grid index.
pub fn eigen_sweep_on(
    params: &SystemParams,
    delta_c: f64,
    grid: &[f64],
    basis: &Arc<BasisIndex>,
) -> Result<SpectrumTable, SpectraError> {
    if grid.is_empty() {
        return Err(SpectraError::EmptyGrid);
    }
    if let Some(k) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(SpectraError::UnorderedGrid(k + 1));
    }
    let blocks = manifold_blocks(basis);
    let solved: Vec<(f64, Vec<Result<BlockSolution, u32>>)> = grid
        .par_iter()
        .map(|&dq| diagonalize_point(params, &Detunings::new(delta_c, dq), basis, &blocks))
        .collect();

    let mut diagnostics = Vec::new();
    let mut traces = Vec::with_capacity(grid.len());
    let mut levels = Vec::with_capacity(grid.len());
    // previous eigenvectors and their branch ids, per manifold block
    let mut previous: Vec<Option<(DMatrix<f64>, Vec<usize>)>> = vec![None; blocks.len()];

    for (k, (trace, solutions)) in solved.into_iter().enumerate() {
        traces.push(trace);
        let mut point = Vec::with_capacity(basis.dim());
        for (b, solution) in solutions.into_iter().enumerate() {
            let sol = match solution {
                Ok(sol) => sol,
                Err(manifold) => {
                    diagnostics.push(PointDiagnostic {
                        grid_index: k,
                        manifold,
                        message: "eigensolver did not converge".into(),
                    });
                    continue;
                }
            };
            let block_quanta: Vec<f64> =
                blocks[b].1.iter().map(|&i| f64::from(basis.labels()[i].total_quanta())).collect();
            let branches = match &previous[b] {
                None => (0..sol.energies.len()).collect(),
                Some((prev_vecs, prev_ids)) => follow_branches(prev_vecs, prev_ids, &sol.vectors),
            };
            for (col, &energy) in sol.energies.iter().enumerate() {
                let v = sol.vectors.column(col);
                let norm2: f64 = v.iter().map(|x| x * x).sum();
                let mean = v.iter().zip(&block_quanta).map(|(x, n)| x * x * n).sum::<f64>() / norm2;
                let second = v.iter().zip(&block_quanta).map(|(x, n)| x * x * n * n).sum::<f64>() / norm2;
                point.push(Level {
                    energy,
                    manifold: sol.manifold,
                    branch: branches[col],
                    quanta_expectation: mean,
                    quanta_variance: second - mean * mean,
                });
            }
            previous[b] = Some((sol.vectors, branches));
        }
        point.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        levels.push(point);
    }

    Ok(SpectrumTable { delta_c, delta_q_grid: grid.to_vec(), levels, traces, diagnostics })
}

/// Greedy assignment of the new eigenvectors to the previous branches by
/// largest squared overlap.
fn follow_branches(prev: &DMatrix<f64>, prev_ids: &[usize], current: &DMatrix<f64>) -> Vec<usize> {
    let n = current.ncols();
    let overlaps = prev.transpose() * current;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for p in 0..n {
        for c in 0..n {
            let o = overlaps[(p, c)];
            pairs.push((o * o, p, c));
        }
    }
    // ties broken by index so the assignment is deterministic
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, p, c) in pairs {
        if assigned[c] == usize::MAX && !used[p] {
            assigned[c] = prev_ids[p];
            used[p] = true;
        }
    }
    assigned
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    /// Finite gap between adiabatic curves.
    Avoided,
    /// The two curves pass through each other; the reported gap is zero.
    True,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntiCrossing {
    pub manifold: u32,
    /// Δ_q at the minimum gap.
    pub location: f64,
    pub gap: f64,
    /// Branch ids of the lower and upper curve at the minimum.
    pub branch_pair: (usize, usize),
    pub kind: CrossingKind,
}

/// Locate the minimum adjacent-level gap of `manifold` within `window`.
///
/// The grid minimum is refined with a parabola through the squared gap at the
/// three nearest points (a two-level avoided crossing has an exactly quadratic
/// squared gap). If the two branches swap order across the minimum the
/// crossing is reported as [`CrossingKind::True`] with zero gap.
pub fn find_anticrossing(table: &SpectrumTable, manifold: u32, window: (f64, f64)) -> Result<AntiCrossing, SpectraError> {
    let (lo, hi) = window;
    if !table.manifolds().contains(&manifold) {
        return Err(SpectraError::MissingManifold(manifold));
    }
    let idx: Vec<usize> = (0..table.delta_q_grid.len())
        .filter(|&k| (lo..=hi).contains(&table.delta_q_grid[k]))
        .collect();
    if idx.len() < 3 {
        return Err(SpectraError::WindowTooNarrow { lo, hi });
    }

    let mut best: Option<(usize, f64, usize, usize)> = None;
    for &k in &idx {
        let levels: Vec<&Level> = table.manifold_levels(k, manifold).collect();
        for pair in levels.windows(2) {
            let gap = pair[1].energy - pair[0].energy;
            if best.is_none_or(|(_, g, _, _)| gap < g) {
                best = Some((k, gap, pair[0].branch, pair[1].branch));
            }
        }
    }
    let (k, _, lower, upper) = best.ok_or(SpectraError::NotFound { manifold, lo, hi })?;
    if k == idx[0] || k == *idx.last().unwrap() {
        return Err(SpectraError::NotFound { manifold, lo, hi });
    }

    let lower_curve = table.curve(manifold, lower);
    let upper_curve = table.curve(manifold, upper);
    let diff = |i: usize| upper_curve[i] - lower_curve[i];
    let x = &table.delta_q_grid;
    let (d_prev, d_mid, d_next) = (diff(k - 1), diff(k), diff(k + 1));

    if d_prev < 0.0 || d_next < 0.0 {
        // the branches exchange order: interpolate the zero of the difference
        let (a, b) = if d_prev < 0.0 { (k - 1, k) } else { (k, k + 1) };
        let (da, db) = (diff(a), diff(b));
        let location = x[a] + (x[b] - x[a]) * da / (da - db);
        return Ok(AntiCrossing { manifold, location, gap: 0.0, branch_pair: (lower, upper), kind: CrossingKind::True });
    }

    let (location, gap2) = parabola_vertex(
        (x[k - 1], d_prev * d_prev),
        (x[k], d_mid * d_mid),
        (x[k + 1], d_next * d_next),
    )
    .filter(|&(loc, g2)| loc >= x[k - 1] && loc <= x[k + 1] && g2 >= 0.0)
    .unwrap_or((x[k], d_mid * d_mid));
    Ok(AntiCrossing {
        manifold,
        location,
        gap: gap2.sqrt(),
        branch_pair: (lower, upper),
        kind: CrossingKind::Avoided,
    })
}

/// Vertex of the parabola through three points, if it opens upwards.
fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a > 0.0) {
        return None;
    }
    let b = d01 - a * (x0 + x1);
    let xv = -b / (2.0 * a);
    let yv = y1 + d01 * (xv - x1) + a * (xv - x0) * (xv - x1);
    Some((xv, yv))
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points).map(|i| if i == points - 1 { end } else { start + step * i as f64 }).collect()
        }
    }
}

/// Close-up window around the one-quantum switching resonances,
/// `[−δ − 3Ω_c, −δ + 3Ω_c]`.
pub fn default_window(params: &SystemParams) -> (f64, f64) {
    let centre = -params.delta();
    (centre - 3.0 * params.rabi_c, centre + 3.0 * params.rabi_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::{effective_coupling, gate_resonance_energies};

    fn fig2_inset() -> SpectrumTable {
        let p = SystemParams::fig2();
        let (lo, hi) = default_window(&p);
        eigen_sweep(&p, 0.0, &linspace(lo, hi, DEFAULT_GRID_POINTS), 2).unwrap()
    }

    #[test]
    fn grid_validation() {
        let p = SystemParams::fig2();
        assert_eq!(eigen_sweep(&p, 0.0, &[], 1).unwrap_err(), SpectraError::EmptyGrid);
        assert_eq!(eigen_sweep(&p, 0.0, &[0.0, 0.0], 1).unwrap_err(), SpectraError::UnorderedGrid(1));
        assert!(matches!(eigen_sweep(&p, 0.0, &[0.0], 0), Err(SpectraError::Basis(_))));
    }

    #[test]
    fn table_shape_and_ordering() {
        let t = fig2_inset();
        assert!(t.diagnostics.is_empty());
        for (k, pt) in t.levels.iter().enumerate() {
            assert_eq!(pt.len(), 108);
            assert!(pt.windows(2).all(|w| w[0].energy <= w[1].energy));
            let sum: f64 = pt.iter().map(|l| l.energy).sum();
            assert!((sum - t.traces[k]).abs() <= 1e-9 * t.traces[k].abs());
            for l in pt {
                assert!((l.quanta_expectation - f64::from(l.manifold)).abs() < 1e-6);
                assert!(l.quanta_variance.abs() < 1e-10);
            }
        }
        assert_eq!(t.manifolds(), (0..=8).collect::<Vec<_>>());
    }

    #[test]
    fn ground_level_is_flat_zero() {
        let t = fig2_inset();
        for k in 0..t.delta_q_grid.len() {
            let ground: Vec<&Level> = t.manifold_levels(k, 0).collect();
            assert_eq!(ground.len(), 1);
            assert_eq!(ground[0].energy, 0.0);
        }
    }

    #[test]
    fn branches_are_continuous() {
        let t = fig2_inset();
        let h = t.delta_q_grid[1] - t.delta_q_grid[0];
        for m in [1, 2] {
            let count = t.manifold_levels(0, m).count();
            for b in 0..count {
                let curve = t.curve(m, b);
                for w in curve.windows(2) {
                    assert!((w[1] - w[0]).abs() <= h * (1.0 + 1e-9), "manifold {m} branch {b}");
                }
            }
        }
    }

    #[test]
    fn far_from_resonance_matches_dressed_energies() {
        let p = SystemParams::fig2();
        let basis = build_basis(1, Some(1)).unwrap();
        for dq in [-1.2, 0.3] {
            let ev = point_eigenvalues(&p, &Detunings::new(0.0, dq), &basis).unwrap();
            let mut analytic: Vec<f64> = gate_resonance_energies(&p, &Detunings::new(0.0, dq))
                .as_array()
                .iter()
                .map(|e| e + p.omega_c)
                .collect();
            analytic.push(0.0); // waveguide photon
            analytic.sort_by(f64::total_cmp);
            let tol = p.kappa_cq * p.kappa_cq / p.delta();
            for (a, n) in analytic.iter().zip(&ev) {
                assert!((a - n).abs() < tol, "{dq}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn fig2_anticrossings_have_finite_gaps() {
        let p = SystemParams::fig2();
        let t = fig2_inset();
        let j = effective_coupling(&p).unwrap();
        let up = -p.delta() + p.rabi_c;
        let hi = find_anticrossing(&t, 1, (up - 0.5 * p.rabi_c, up + 0.5 * p.rabi_c)).unwrap();
        assert_eq!(hi.kind, CrossingKind::Avoided);
        assert!((hi.gap - 2.0 * j).abs() < 0.15 * 2.0 * j, "{hi:?}");
        let down = -p.delta() - p.rabi_c;
        let lo = find_anticrossing(&t, 1, (down - 0.5 * p.rabi_c, down + 0.5 * p.rabi_c)).unwrap();
        assert_eq!(lo.kind, CrossingKind::Avoided);
        assert!(lo.gap > 0.5 * j && lo.gap < 4.0 * j, "{lo:?}");
    }

    #[test]
    fn decoupled_cavities_cross() {
        let p = SystemParams { kappa_cq: 0.0, ..SystemParams::fig2() };
        let (lo, hi) = default_window(&p);
        let t = eigen_sweep(&p, 0.0, &linspace(lo, hi, 401), 1).unwrap();
        let up = -p.delta() + p.rabi_c;
        let x = find_anticrossing(&t, 1, (up - 0.5 * p.rabi_c, up + 0.5 * p.rabi_c)).unwrap();
        assert_eq!(x.kind, CrossingKind::True);
        assert!(x.gap < 1e-12);
    }

    #[test]
    fn window_errors() {
        let t = fig2_inset();
        assert!(matches!(find_anticrossing(&t, 1, (5.0, 6.0)), Err(SpectraError::WindowTooNarrow { .. })));
        assert_eq!(find_anticrossing(&t, 42, (-1.0, 0.0)).unwrap_err(), SpectraError::MissingManifold(42));
        // a monotone stretch of the spectrum has its minimum on the edge
        let edge = find_anticrossing(&t, 1, (-0.8, -0.75));
        assert!(matches!(edge, Err(SpectraError::NotFound { .. })), "{edge:?}");
    }

    #[test]
    fn cavity_gate_relabelling_mirrors_spectrum() {
        let p = SystemParams::fig2();
        let swapped = SystemParams {
            omega_c: p.omega_q,
            omega_q: p.omega_c,
            rabi_c: p.rabi_q,
            rabi_q: p.rabi_c,
            ..p
        };
        let basis = build_basis(2, None).unwrap();
        let det = Detunings::new(0.02, -0.47);
        let a = point_eigenvalues(&p, &det, &basis).unwrap();
        let b = point_eigenvalues(&swapped, &Detunings::new(det.delta_q, det.delta_c), &basis).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-1.0, 1.0, 5);
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(linspace(3.0, 4.0, 1), vec![3.0]);
    }
}
