//! The versioned run report: config echo (including grid-snapped switching
//! times), invariant diagnostics, per-order residual norms, coupling-scaling
//! fits, restart equivalence, and wall-clock timings.

use std::collections::BTreeMap;

use serde::Serialize;

use semilat_core::perturb;
use semilat_core::perturb::{
    classical_residual_truncated, quantum_residual_truncated, ResidualSweep, SolutionTower,
};

use crate::config::Scenario;
use crate::scenario::{Built, Executed};
use crate::Result;

/// Maximum tolerated drift of the order-0 commutation structure.
pub const CCR_THRESHOLD: f64 = 1e-8;
/// Half-width of the accepted window around the expected residual slope.
pub const SLOPE_WINDOW: f64 = 0.3;
/// Residuals below this are treated as identically zero when fitting slopes.
pub const DEGENERATE_RESIDUAL: f64 = 1e-13;
/// Tolerated per-order table difference between a stitched and an unsplit
/// run (the reconstruction is exact, so this is a roundoff allowance).
pub const RESTART_TOLERANCE: f64 = 1e-12;

/// Built-in coupling grid for the residual scaling sweep.
pub fn lambda_grid() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

/// Top-level report written to `report.json` (run) or standard output
/// (verify).
#[derive(Debug, Serialize)]
pub struct RunReport {
    /// Schema version of this document.
    pub schema_version: u32,
    /// Which command produced the report.
    pub command: String,
    /// Echo of every input parameter, with snapped values where snapping
    /// occurred.
    pub config: ConfigEcho,
    /// Warnings that were also sent to the diagnostic stream.
    pub warnings: Vec<String>,
    /// All computed diagnostics.
    pub diagnostics: Diagnostics,
    /// Wall-clock timings per phase, milliseconds.
    pub timings_ms: BTreeMap<String, f64>,
}

/// Input echo.
#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    /// Grid block with requested and snapped window times.
    pub lattice: LatticeEcho,
    /// Physics block verbatim.
    pub physics: PhysicsEcho,
    /// State block, rendered in config syntax.
    pub state: String,
    /// Classical-data block, rendered in config syntax.
    pub classical_data: ClassicalEcho,
    /// Mode block, rendered in config syntax.
    pub mode: String,
    /// Output block when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputEcho>,
}

/// Grid echo.
#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
pub struct LatticeEcho {
    /// Number of spatial sites.
    pub n_x: usize,
    /// Circumference.
    pub L: f64,
    /// Time step.
    pub dt: f64,
    /// Spatial step implied by `L / n_x`.
    pub dx: f64,
    /// Number of time steps.
    pub n_t: usize,
    /// Initial time.
    pub t_i: f64,
    /// Switch-on time as requested.
    pub t_on_requested: f64,
    /// Switch-on time snapped to the grid.
    pub t_on: f64,
    /// Switch-off time as requested.
    pub t_f_requested: f64,
    /// Switch-off time snapped to the grid.
    pub t_f: f64,
}

/// Physics echo.
#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
pub struct PhysicsEcho {
    /// Coupling strength.
    pub lambda: f64,
    /// Truncation order.
    pub n: usize,
    /// Classical mass.
    pub M: f64,
    /// Quantum mass.
    pub m: f64,
    /// Counterterm coefficients.
    pub beta1: f64,
    /// Counterterm coefficient on χψ.
    pub beta2: f64,
    /// Curvature counterterm coefficient.
    pub beta3: f64,
    /// Expansion length scale.
    pub ell: f64,
}

/// Classical-data echo.
#[derive(Debug, Serialize)]
pub struct ClassicalEcho {
    /// Field profile in config syntax.
    pub sigma: String,
    /// Momentum profile in config syntax.
    pub pi: String,
}

/// Output echo.
#[derive(Debug, Serialize)]
pub struct OutputEcho {
    /// Destination directory.
    pub directory: String,
    /// Requested artifact families.
    pub formats: Vec<String>,
    /// Sample stride for the two-point CSV.
    pub sample_stride: usize,
}

/// All diagnostics; optional members are present exactly when enabled.
#[derive(Debug, Serialize)]
pub struct Diagnostics {
    /// Explicit-scheme step ratio.
    pub stability: Stability,
    /// Order-0 commutation-structure drift.
    pub ccr_drift: CcrDrift,
    /// Per-order maxima of the mixed-block antisymmetry defect.
    pub order_antisymmetry_max: Vec<f64>,
    /// Largest `|Im diag Gₖ|` seen.
    pub max_imag_diag: f64,
    /// Largest `|ψₖ|` seen.
    pub max_abs_psi: f64,
    /// Residual norms of both equation towers at the scenario coupling.
    pub residual_norms: ResidualNorms,
    /// Coupling-scaling fit (verify only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_fit: Option<LambdaFit>,
    /// Restart equivalence (verify with a restart mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart_equivalence: Option<RestartEquivalence>,
    /// Conjunction of every individual pass flag.
    pub pass: bool,
}

/// Step-ratio stability facts.
#[derive(Debug, Serialize)]
pub struct Stability {
    /// Time step.
    pub dt: f64,
    /// Space step.
    pub dx: f64,
    /// `dt / dx`; 1 is the marginal explicit step.
    pub ratio: f64,
    /// Whether the run sits exactly on the marginal step.
    pub marginal: bool,
}

/// Drift of the order-0 commutation structure.
#[derive(Debug, Serialize)]
pub struct CcrDrift {
    /// Drift at every recorded step.
    pub per_step: Vec<f64>,
    /// Maximum over the run.
    pub max: f64,
    /// Threshold the maximum is held against.
    pub threshold: f64,
    /// `max < threshold`.
    pub pass: bool,
}

/// Residual norms at the scenario coupling, one entry per truncation order.
#[derive(Debug, Serialize)]
pub struct ResidualNorms {
    /// Coupling the norms were evaluated at.
    pub lambda: f64,
    /// Classical-equation residual, max over slices, per truncation order.
    pub classical: Vec<f64>,
    /// Two-point-equation residual, max over recorded snapshots, per
    /// truncation order. Evaluating it needs consecutive snapshots, so it is
    /// enabled exactly when the run sampled every slice (stride 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantum: Option<Vec<f64>>,
}

/// Residual scaling against the coupling over the built-in grid.
#[derive(Debug, Serialize)]
pub struct LambdaFit {
    /// Couplings swept.
    pub grid: Vec<f64>,
    /// Fits of the classical-equation residual per truncation order.
    pub classical: Vec<OrderFit>,
    /// Fits of the two-point-equation residual per truncation order.
    pub quantum: Vec<OrderFit>,
    /// Accepted window for the top-order slope.
    pub expected_slope_window: [f64; 2],
    /// True when the residuals are identically zero and no slope exists.
    pub degenerate: bool,
    /// Top-order slopes of both towers inside the window (or degenerate).
    pub pass: bool,
}

/// One truncation order of the scaling sweep.
#[derive(Debug, Serialize)]
pub struct OrderFit {
    /// Truncation order.
    pub order: usize,
    /// Fitted log–log slope; absent when the sweep is degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    /// Residual norm at each grid coupling.
    pub residuals: Vec<f64>,
}

/// Split-versus-unsplit comparison for restart runs.
#[derive(Debug, Serialize)]
pub struct RestartEquivalence {
    /// Requested restart time.
    pub t_restart: f64,
    /// Global slice the run was cut at.
    pub cut_slice: usize,
    /// Per-order max |split − unsplit| over the classical tables.
    pub max_abs_diff_psi: Vec<f64>,
    /// Per-order max |split − unsplit| over the observable tables.
    pub max_abs_diff_phi2: Vec<f64>,
    /// Allowance for the comparison.
    pub tolerance: f64,
    /// Every difference within tolerance.
    pub pass: bool,
}

/// Builds the config echo from the scenario and the validated grid.
pub fn config_echo(scn: &Scenario, built: &Built) -> ConfigEcho {
    ConfigEcho {
        lattice: LatticeEcho {
            n_x: built.spec.n_x,
            L: built.spec.circumference,
            dt: built.spec.dt,
            dx: built.spec.dx(),
            n_t: built.spec.n_t,
            t_i: built.spec.t_i,
            t_on_requested: scn.lattice.t_on,
            t_on: built.spec.t_on,
            t_f_requested: scn.lattice.t_f,
            t_f: built.spec.t_f,
        },
        physics: PhysicsEcho {
            lambda: scn.physics.lambda,
            n: scn.physics.order,
            M: scn.physics.classical_mass,
            m: scn.physics.quantum_mass,
            beta1: scn.physics.beta1,
            beta2: scn.physics.beta2,
            beta3: scn.physics.beta3,
            ell: scn.physics.ell,
        },
        state: scn.state.to_string(),
        classical_data: ClassicalEcho {
            sigma: scn.classical.sigma.to_string(),
            pi: scn.classical.pi.to_string(),
        },
        mode: scn.mode.to_string(),
        output: scn.output.as_ref().map(|o| OutputEcho {
            directory: o.directory.display().to_string(),
            formats: o
                .formats
                .iter()
                .map(|f| match f {
                    crate::config::Format::Csv => "csv".to_string(),
                    crate::config::Format::Json => "json".to_string(),
                })
                .collect(),
            sample_stride: o.sample_stride,
        }),
    }
}

/// True when every tower recorded at least one pair of adjacent snapshot
/// slices (what the two-point residual evaluation requires).
fn snapshots_support_quantum_residuals(executed: &Executed) -> bool {
    executed.towers().iter().all(|t| {
        t.snapshots()
            .windows(2)
            .any(|w| w[1].slice() == w[0].slice() + 1)
    })
}

/// Diagnostics computed on every run (no sweep, no equivalence check).
pub fn base_diagnostics(built: &Built, executed: &Executed) -> Result<Diagnostics> {
    let drift = executed.ccr_drift();
    let max = drift.iter().cloned().fold(0.0f64, f64::max);
    let lambda = built.config.lambda;
    let n_orders = executed.n_orders();

    let mut classical = vec![0.0f64; n_orders];
    for tower in executed.towers() {
        for (k, c) in classical.iter_mut().enumerate() {
            let per_slice = classical_residual_truncated(tower, lambda, k)?;
            *c = c.max(per_slice.into_iter().fold(0.0f64, f64::max));
        }
    }
    let quantum = if snapshots_support_quantum_residuals(executed) {
        let mut q_norms = vec![0.0f64; n_orders];
        for tower in executed.towers() {
            for (k, q) in q_norms.iter_mut().enumerate() {
                let per_snap = quantum_residual_truncated(tower, lambda, k)?;
                *q = q.max(per_snap.into_iter().fold(0.0f64, |m, (_, r)| m.max(r)));
            }
        }
        Some(q_norms)
    } else {
        None
    };

    let marginal = built.spec.dt == built.spec.dx();
    Ok(Diagnostics {
        stability: Stability {
            dt: built.spec.dt,
            dx: built.spec.dx(),
            ratio: built.spec.dt / built.spec.dx(),
            marginal,
        },
        ccr_drift: CcrDrift {
            max,
            per_step: drift,
            threshold: CCR_THRESHOLD,
            pass: max < CCR_THRESHOLD,
        },
        order_antisymmetry_max: executed.order_antisym(),
        max_imag_diag: executed.max_imag_diag(),
        max_abs_psi: executed.max_abs_psi(),
        residual_norms: ResidualNorms { lambda, classical, quantum },
        lambda_fit: None,
        restart_equivalence: None,
        pass: max < CCR_THRESHOLD,
    })
}

/// Runs the coupling-scaling sweep on an unsplit tower over the built-in
/// grid, fitting every truncation order up to the tower's own.
pub fn lambda_fit(tower: &SolutionTower) -> Result<LambdaFit> {
    let grid = lambda_grid();
    let top = tower.config().order;
    let mut classical = Vec::with_capacity(top + 1);
    let mut quantum = Vec::with_capacity(top + 1);
    let mut degenerate = false;

    for k in 0..=top {
        let c = sweep_or_degenerate(tower, &grid, k, true)?;
        degenerate |= c.slope.is_none();
        classical.push(c);
        let q = sweep_or_degenerate(tower, &grid, k, false)?;
        degenerate |= q.slope.is_none();
        quantum.push(q);
    }

    let expected = (top + 1) as f64;
    let window = [expected - SLOPE_WINDOW, expected + SLOPE_WINDOW];
    let in_window = |f: &OrderFit| match f.slope {
        Some(s) => s >= window[0] && s <= window[1],
        None => true, // identically zero residual satisfies any scaling claim
    };
    let pass = in_window(&classical[top]) && in_window(&quantum[top]);
    Ok(LambdaFit {
        grid,
        classical,
        quantum,
        expected_slope_window: window,
        degenerate,
        pass,
    })
}

fn sweep_or_degenerate(
    tower: &SolutionTower,
    grid: &[f64],
    order: usize,
    classical: bool,
) -> Result<OrderFit> {
    let residuals: Vec<f64> = if classical {
        grid.iter()
            .map(|&l| {
                classical_residual_truncated(tower, l, order)
                    .map(|v| v.into_iter().fold(0.0f64, f64::max))
            })
            .collect::<std::result::Result<_, _>>()?
    } else {
        grid.iter()
            .map(|&l| {
                quantum_residual_truncated(tower, l, order)
                    .map(|v| v.into_iter().fold(0.0f64, |m, (_, r)| m.max(r)))
            })
            .collect::<std::result::Result<_, _>>()?
    };
    if residuals.iter().all(|&r| r < DEGENERATE_RESIDUAL) {
        return Ok(OrderFit { order, slope: None, residuals });
    }
    let sweep: ResidualSweep = if classical {
        perturb::classical_residual_sweep_truncated(tower, grid, order)?
    } else {
        perturb::quantum_residual_sweep_truncated(tower, grid, order)?
    };
    Ok(OrderFit { order, slope: Some(sweep.slope), residuals })
}

/// Compares a stitched restart run against its unsplit twin table by table.
pub fn restart_equivalence(
    t_restart: f64,
    cut: usize,
    split: &Executed,
    unsplit: &SolutionTower,
) -> RestartEquivalence {
    let n_orders = split.n_orders();
    let n_slices = split.n_slices();
    let mut dpsi = vec![0.0f64; n_orders];
    let mut dphi2 = vec![0.0f64; n_orders];
    for k in 0..n_orders {
        for n in 0..n_slices {
            let a = split.psi_row(k, n);
            let b = unsplit.psi_k(k).u_slice(n);
            for (va, vb) in a.iter().zip(b) {
                dpsi[k] = dpsi[k].max((va - vb).abs());
            }
            let pa = split.phi2_row(k, n);
            let pb = unsplit.phi2_k(k).row(n);
            for (va, vb) in pa.iter().zip(pb.iter()) {
                dphi2[k] = dphi2[k].max((va - vb).abs());
            }
        }
    }
    let worst = dpsi
        .iter()
        .chain(dphi2.iter())
        .cloned()
        .fold(0.0f64, f64::max);
    RestartEquivalence {
        t_restart,
        cut_slice: cut,
        max_abs_diff_psi: dpsi,
        max_abs_diff_phi2: dphi2,
        tolerance: RESTART_TOLERANCE,
        pass: worst <= RESTART_TOLERANCE,
    }
}

/// Recomputes the headline pass flag from the members that carry one.
pub fn overall_pass(d: &Diagnostics) -> bool {
    d.ccr_drift.pass
        && d.lambda_fit.as_ref().is_none_or(|f| f.pass)
        && d.restart_equivalence.as_ref().is_none_or(|r| r.pass)
}
