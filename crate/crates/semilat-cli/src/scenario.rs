//! From a parsed [`Scenario`](crate::config::Scenario) to solved towers:
//! constructs the module objects, executes the requested mode, and exposes a
//! uniform table view whether the run was solved in one piece or stitched
//! from a restart.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use semilat_core::lattice::{
    make_lattice, make_switching, LatticeSpec, Profile, SwitchingFunction, SwitchingShape,
};
use semilat_core::perturb::{
    correct_data, restart, solve_tower_resumed, solve_tower_with_data,
    solve_tower_with_options, CouplingConfig, SolutionTower, SolveOptions, TowerSnapshot,
};
use semilat_core::twopoint::{thermal_data, vacuum_data, CauchyData2pt};
use semilat_core::{Error as CoreError, Strategy};

use crate::config::{ModeSpec, ProfileSpec, Scenario, StateSpec};
use crate::{CliError, Result};

/// Module objects constructed from a scenario, ready to solve.
pub struct Built {
    /// Validated grid with snapped switching window.
    pub spec: LatticeSpec,
    /// Switching function implied by the mode.
    pub chi: SwitchingFunction,
    /// Coupling configuration.
    pub config: CouplingConfig,
    /// Initial classical field.
    pub sigma: Vec<f64>,
    /// Initial classical momentum.
    pub pi: Vec<f64>,
    /// Initial two-point data.
    pub data: CauchyData2pt,
    /// Requested mode.
    pub mode: ModeSpec,
    /// Diagnostic-stream warnings raised during construction.
    pub warnings: Vec<String>,
}

/// Builds every module object for `scn`, mapping constructor rejections to
/// validation failures (exit 3).
pub fn build(scn: &Scenario) -> Result<Built> {
    let l = &scn.lattice;
    let spec = make_lattice(l.n_x, l.l, l.dt, l.n_t, l.t_i, l.t_on, l.t_f)?;

    let shape = match scn.mode {
        ModeSpec::Switched => SwitchingShape::Bump,
        ModeSpec::AlwaysOnCorrected => SwitchingShape::ConstantOne,
        // The coupling rises over the snapped window and is then held on, so
        // the run can be cut and continued in the fully coupled regime.
        ModeSpec::Restart(_) => SwitchingShape::Plateau { t_rise: spec.t_f },
    };
    let chi = make_switching(&spec, shape)?;

    let p = &scn.physics;
    let config = CouplingConfig {
        lambda: p.lambda,
        order: p.order,
        classical_mass: p.classical_mass,
        quantum_mass: p.quantum_mass,
        beta1: p.beta1,
        beta2: p.beta2,
        beta3: p.beta3,
        scale: p.ell,
    };
    config.validate()?;

    let sigma = profile(&scn.classical.sigma).sample(&spec)?;
    let pi = profile(&scn.classical.pi).sample(&spec)?;

    // Warnings are collected before state construction so they reach the
    // diagnostic stream even when the state itself fails validation.
    let mut warnings = Vec::new();
    if spec.dt == spec.dx() {
        warnings.push(
            "stability: dt = dx is the marginal step of the explicit scheme; \
             dispersion errors accumulate fastest here"
                .to_string(),
        );
    }
    if p.lambda.abs() >= 1.0 {
        warnings.push(format!(
            "coupling: |lambda| = {} is outside the perturbative regime; \
             truncation-order residuals will not be small",
            p.lambda.abs()
        ));
    }

    let data = match &scn.state {
        StateSpec::Vacuum => vacuum_data(&spec, p.quantum_mass)?,
        StateSpec::Thermal(t) => thermal_data(&spec, p.quantum_mass, *t)?,
        StateSpec::File(path) => load_state_csv(path, &spec)?,
    };

    Ok(Built { spec, chi, config, sigma, pi, data, mode: scn.mode.clone(), warnings })
}

fn profile(p: &ProfileSpec) -> Profile {
    match *p {
        ProfileSpec::Zero => Profile::Zero,
        ProfileSpec::Gaussian { center, width, amplitude } => {
            Profile::Gaussian { center, width, amplitude }
        }
        ProfileSpec::Cosine { mode, amplitude } => Profile::Cosine { mode, amplitude },
    }
}

/// A solved run: either one tower or two towers stitched at a restart cut.
// One value of this type exists per run; the size spread between variants
// (one tower vs two) has no storage cost worth boxing for.
#[allow(clippy::large_enum_variant)]
pub enum Executed {
    /// Single uninterrupted solve.
    Single(SolutionTower),
    /// Run cut at `cut` (global slice) and resumed from reconstructed data.
    Stitched {
        /// Segment covering global slices `0..=cut`.
        first: SolutionTower,
        /// Segment covering global slices `cut..` (local slice 0 is the cut).
        second: SolutionTower,
        /// Global index of the cut slice.
        cut: usize,
    },
}

/// Executes the scenario's mode; `stride` is the snapshot/sample stride.
pub fn execute(built: &Built, stride: usize, strategy: Strategy) -> Result<Executed> {
    let options = SolveOptions { snapshot_stride: stride };
    match built.mode {
        ModeSpec::Switched => {
            let tower = solve_tower_with_options(
                &built.spec,
                &built.chi,
                &built.config,
                &built.sigma,
                &built.pi,
                &built.data,
                options,
                strategy,
            )?;
            Ok(Executed::Single(tower))
        }
        ModeSpec::AlwaysOnCorrected => {
            // The reference family needs no explicit per-order corrections:
            // they vanish identically, so only order 0 carries data.
            let tower_data =
                correct_data(&built.data, &[], built.config.lambda, built.config.order)?;
            let tower = solve_tower_with_data(
                &built.spec,
                &built.chi,
                &built.config,
                &built.sigma,
                &built.pi,
                &tower_data,
                options,
                strategy,
            )?;
            Ok(Executed::Single(tower))
        }
        ModeSpec::Restart(t_restart) => {
            let cut = cut_slice(&built.spec, t_restart)?;
            let (first, second) = solve_split(built, cut, options, strategy)?;
            Ok(Executed::Stitched { first, second, cut })
        }
    }
}

/// Solves the scenario in one piece regardless of mode (the comparison run
/// for restart equivalence).
pub fn execute_unsplit(built: &Built, stride: usize, strategy: Strategy) -> Result<SolutionTower> {
    let options = SolveOptions { snapshot_stride: stride };
    Ok(solve_tower_with_options(
        &built.spec,
        &built.chi,
        &built.config,
        &built.sigma,
        &built.pi,
        &built.data,
        options,
        strategy,
    )?)
}

/// Snaps the restart time to the grid and validates that both segments are
/// nonempty.
pub fn cut_slice(spec: &LatticeSpec, t_restart: f64) -> Result<usize> {
    if !t_restart.is_finite() {
        return Err(CliError::Validation(format!(
            "restart time must be finite, got {t_restart}"
        )));
    }
    let idx = ((t_restart - spec.t_i) / spec.dt).round();
    if idx < 1.0 || idx > (spec.n_t - 1) as f64 {
        return Err(CliError::Validation(format!(
            "restart time {t_restart} snaps to slice {idx}, outside the open grid \
             interval (needs a nonempty run on both sides)"
        )));
    }
    Ok(idx as usize)
}

fn solve_split(
    built: &Built,
    cut: usize,
    options: SolveOptions,
    strategy: Strategy,
) -> Result<(SolutionTower, SolutionTower)> {
    let spec = &built.spec;
    // Segment grids reuse the global step; the switching values are sliced
    // from the full-run function so both paths see identical coefficients.
    let seg = |a: usize, b: usize| -> Result<(LatticeSpec, SwitchingFunction)> {
        let t_a = spec.time(a);
        let s = make_lattice(
            spec.n_x,
            spec.circumference,
            spec.dt,
            b - a,
            t_a,
            t_a + spec.dt,
            spec.time(b),
        )?;
        let chi = SwitchingFunction::from_values(&s, built.chi.values[a..=b].to_vec())?;
        Ok((s, chi))
    };

    let (spec_a, chi_a) = seg(0, cut)?;
    let first = solve_tower_with_options(
        &spec_a,
        &chi_a,
        &built.config,
        &built.sigma,
        &built.pi,
        &built.data,
        options,
        strategy,
    )?;
    let carried = restart(&first, built.config.lambda, cut)?;

    let (spec_b, chi_b) = seg(cut, spec.n_t)?;
    let second =
        solve_tower_resumed(&spec_b, &chi_b, &built.config, &carried, options, strategy)?;
    Ok((first, second))
}

impl Executed {
    /// Number of computed orders (truncation order + 1).
    pub fn n_orders(&self) -> usize {
        match self {
            Executed::Single(t) => t.n_orders(),
            Executed::Stitched { first, .. } => first.n_orders(),
        }
    }

    /// Total number of global slices.
    pub fn n_slices(&self) -> usize {
        match self {
            Executed::Single(t) => t.spec().n_slices(),
            Executed::Stitched { first, second, .. } => {
                first.spec().n_slices() + second.spec().n_slices() - 1
            }
        }
    }

    /// ψₖ values on global slice `n`.
    pub fn psi_row(&self, k: usize, n: usize) -> &[f64] {
        match self {
            Executed::Single(t) => t.psi_k(k).u_slice(n),
            Executed::Stitched { first, second, cut } => {
                if n <= *cut {
                    first.psi_k(k).u_slice(n)
                } else {
                    second.psi_k(k).u_slice(n - cut)
                }
            }
        }
    }

    /// Renormalized-observable order-k values on global slice `n`.
    pub fn phi2_row(&self, k: usize, n: usize) -> Vec<f64> {
        match self {
            Executed::Single(t) => t.phi2_k(k).row(n).to_vec(),
            Executed::Stitched { first, second, cut } => {
                if n <= *cut {
                    first.phi2_k(k).row(n).to_vec()
                } else {
                    second.phi2_k(k).row(n - cut).to_vec()
                }
            }
        }
    }

    /// Recorded snapshots as (global slice, snapshot) pairs. For a stitched
    /// run the stride grid restarts at the cut; the duplicate cut slice held
    /// by both segments is reported once.
    pub fn snapshots(&self) -> Vec<(usize, &TowerSnapshot)> {
        match self {
            Executed::Single(t) => {
                t.snapshots().iter().map(|s| (s.slice(), s)).collect()
            }
            Executed::Stitched { first, second, cut } => {
                let mut out: Vec<(usize, &TowerSnapshot)> =
                    first.snapshots().iter().map(|s| (s.slice(), s)).collect();
                for s in second.snapshots() {
                    if s.slice() > 0 {
                        out.push((cut + s.slice(), s));
                    }
                }
                out
            }
        }
    }

    /// Per-step drift of the order-0 commutation structure, over the whole
    /// global grid.
    pub fn ccr_drift(&self) -> Vec<f64> {
        match self {
            Executed::Single(t) => t.diagnostics().ccr_drift.clone(),
            Executed::Stitched { first, second, .. } => {
                let mut d = first.diagnostics().ccr_drift.clone();
                d.extend_from_slice(&second.diagnostics().ccr_drift[1..]);
                d
            }
        }
    }

    /// Per-order maxima of the mixed-block antisymmetry defect.
    pub fn order_antisym(&self) -> Vec<f64> {
        match self {
            Executed::Single(t) => t.diagnostics().order_antisym.clone(),
            Executed::Stitched { first, second, .. } => first
                .diagnostics()
                .order_antisym
                .iter()
                .zip(&second.diagnostics().order_antisym)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    /// Largest `|Im diag Gₖ|` across the run.
    pub fn max_imag_diag(&self) -> f64 {
        match self {
            Executed::Single(t) => t.diagnostics().max_imag_diag,
            Executed::Stitched { first, second, .. } => {
                first.diagnostics().max_imag_diag.max(second.diagnostics().max_imag_diag)
            }
        }
    }

    /// Largest `|ψₖ|` across the run.
    pub fn max_abs_psi(&self) -> f64 {
        match self {
            Executed::Single(t) => t.diagnostics().max_psi,
            Executed::Stitched { first, second, .. } => {
                first.diagnostics().max_psi.max(second.diagnostics().max_psi)
            }
        }
    }

    /// The towers backing this run (one or two).
    pub fn towers(&self) -> Vec<&SolutionTower> {
        match self {
            Executed::Single(t) => vec![t],
            Executed::Stitched { first, second, .. } => vec![first, second],
        }
    }
}

/// Loads explicit two-point blocks from a CSV file with header
/// `block,x,y,re,im`; `block` names one of phiphi, pipi, phipi, piphi and
/// `x`, `y` are site indices. Every entry of every block must appear exactly
/// once; the real blocks must come with zero imaginary part.
pub fn load_state_csv(path: &Path, spec: &LatticeSpec) -> Result<CauchyData2pt> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Validation(format!("state file {}: {e}", path.display()))
    })?;
    let n = spec.n_x;
    let mut phiphi = ndarray_zeros(n);
    let mut pipi = ndarray_zeros(n);
    let mut phipi = ndarray_zeros_c(n);
    let mut piphi = ndarray_zeros_c(n);
    let mut seen = vec![[false; 4]; n * n];

    let bad = |line: usize, msg: &str| -> CliError {
        CliError::Validation(format!("state file {} line {line}: {msg}", path.display()))
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "block,x,y,re,im" => {}
        _ => return Err(bad(1, "expected header `block,x,y,re,im`")),
    }
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad(i + 1, "expected 5 comma-separated columns"));
        }
        let block = match cols[0] {
            "phiphi" => 0,
            "pipi" => 1,
            "phipi" => 2,
            "piphi" => 3,
            other => return Err(bad(i + 1, &format!("unknown block `{other}`"))),
        };
        let x: usize =
            cols[1].parse().map_err(|_| bad(i + 1, "x must be a site index"))?;
        let y: usize =
            cols[2].parse().map_err(|_| bad(i + 1, "y must be a site index"))?;
        if x >= n || y >= n {
            return Err(bad(i + 1, &format!("site index out of range (n_x = {n})")));
        }
        let re: f64 = cols[3].parse().map_err(|_| bad(i + 1, "re must be a number"))?;
        let im: f64 = cols[4].parse().map_err(|_| bad(i + 1, "im must be a number"))?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(bad(i + 1, "entries must be finite"));
        }
        if seen[x * n + y][block] {
            return Err(bad(i + 1, "duplicate entry"));
        }
        seen[x * n + y][block] = true;
        match block {
            0 | 1 => {
                if im != 0.0 {
                    return Err(bad(i + 1, "phiphi/pipi blocks must have im = 0"));
                }
                if block == 0 {
                    phiphi[(x, y)] = re;
                } else {
                    pipi[(x, y)] = re;
                }
            }
            2 => phipi[(x, y)] = Complex64::new(re, im),
            _ => piphi[(x, y)] = Complex64::new(re, im),
        }
    }
    if let Some(flat) = seen.iter().position(|s| s.iter().any(|&b| !b)) {
        let (x, y) = (flat / n, flat % n);
        return Err(CliError::Validation(format!(
            "state file {}: missing entries at site pair ({x}, {y})",
            path.display()
        )));
    }
    CauchyData2pt::new(spec.dx(), phiphi, pipi, phipi, piphi).map_err(CoreError::into)
}

fn ndarray_zeros(n: usize) -> ndarray::Array2<f64> {
    ndarray::Array2::zeros((n, n))
}

fn ndarray_zeros_c(n: usize) -> ndarray::Array2<Complex64> {
    ndarray::Array2::zeros((n, n))
}
