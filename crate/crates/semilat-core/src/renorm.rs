//! The renormalized squared-field observable and the reference (subtraction) tower.
//!
//! The bare equal-time diagonal of the two-point tower diverges in the continuum
//! limit; the finite observable subtracts the diagonal of a reference family built
//! from the stationary discrete vacuum and adds local counterterms:
//!
//! - order 0: `q₀ = diag(G₀ − H₀) + β₁·m²`,
//! - order k ≥ 1: `qₖ = diag(Gₖ − Hₖ) + β₂·χ·ψₖ₋₁`.
//!
//! The scalar-curvature counterterm `β₃·R` is identically zero on the flat cylinder
//! and therefore does not appear; the coefficient is still carried in
//! [`CouplingConfig`] for interface parity with the 4d expansion. The finite
//! renormalization freedom (shifts of the β's) only relabels the observable; see
//! [`ambiguity_shift`].
//!
//! [`subtraction_tower`] recomputes the reference tower for given classical
//! coefficient histories with exactly the same stepping routine the joint solver
//! uses, so the two agree bitwise — a sequenced pipeline (classical tower first,
//! reference tower second) is equivalent to the interleaved solve.

use crate::engine::{self, BlockState, SpatialOp};
use crate::green::FieldHistory;
use crate::lattice::{LatticeSpec, SwitchingFunction};
use crate::perturb::{CouplingConfig, SolutionTower, SolveOptions, MAX_ORDER};
use crate::twopoint;
use crate::{Error, Result, Strategy};
use ndarray::Array2;

/// One order-k row of the renormalized observable from the diagonal rows of the two
/// towers; `psi_prev` is the order k − 1 classical row (required for k ≥ 1).
pub(crate) fn phi2_row(
    config: &CouplingConfig,
    k: usize,
    g_diag_row: &[f64],
    h_diag_row: &[f64],
    chi: f64,
    psi_prev: Option<&[f64]>,
    out: &mut [f64],
) {
    let m2 = config.quantum_mass * config.quantum_mass;
    match k {
        0 => {
            for x in 0..out.len() {
                out[x] = g_diag_row[x] - h_diag_row[x] + config.beta1 * m2;
            }
        }
        _ => {
            let p = psi_prev.expect("orders ≥ 1 need the previous classical row");
            for x in 0..out.len() {
                out[x] = g_diag_row[x] - h_diag_row[x] + config.beta2 * chi * p[x];
            }
        }
    }
}

/// Per-order coefficient fields of the renormalized squared-field observable,
/// each of shape `(n_slices, n_x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phi2Field {
    orders: Vec<Array2<f64>>,
}

impl Phi2Field {
    /// Number of orders.
    pub fn n_orders(&self) -> usize {
        self.orders.len()
    }

    /// All coefficient tables, order 0 first.
    pub fn orders(&self) -> &[Array2<f64>] {
        &self.orders
    }

    /// The order-`k` coefficient table.
    pub fn order_k(&self, k: usize) -> &Array2<f64> {
        &self.orders[k]
    }

    /// Truncated sum `Σ λᵏ qₖ` at coupling `lambda`.
    pub fn assemble(&self, lambda: f64) -> Array2<f64> {
        let mut acc = Array2::<f64>::zeros(self.orders[0].dim());
        for t in self.orders.iter().rev() {
            acc.zip_mut_with(t, |a, &b| *a = *a * lambda + b);
        }
        acc
    }
}

/// The reference (subtraction) tower recomputed standalone: per-slice equal-time
/// diagonals of every order, plus strided full-block snapshots.
#[derive(Debug, Clone)]
pub struct SubtractionTower {
    mass: f64,
    diag: Vec<Array2<f64>>,
    snapshots: Vec<SubtractionSnapshot>,
}

/// Full blocks of the reference tower at one recorded slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtractionSnapshot {
    slice: usize,
    orders: Vec<BlockState<f64>>,
}

impl SubtractionSnapshot {
    /// Slice index this snapshot was taken at.
    pub fn slice(&self) -> usize {
        self.slice
    }

    /// Equal-time diagonal of the order-`k` position block.
    pub fn diag_k(&self, k: usize) -> Vec<f64> {
        self.orders[k].uu.diag().to_vec()
    }
}

impl SubtractionTower {
    /// Reference-family mass.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number of orders.
    pub fn n_orders(&self) -> usize {
        self.diag.len()
    }

    /// Per-slice equal-time diagonal of the order-`k` reference coefficient.
    pub fn diag_k(&self, k: usize) -> &Array2<f64> {
        &self.diag[k]
    }

    /// All diagonal tables.
    pub fn diag_tables(&self) -> &[Array2<f64>] {
        &self.diag
    }

    /// Strided full-block snapshots.
    pub fn snapshots(&self) -> &[SubtractionSnapshot] {
        &self.snapshots
    }
}

/// Recomputes the reference tower of mass `m` up to `order` for the given classical
/// coefficient histories (ψ₀..ψ_{order−1} feed the coefficient slices `vₗ = 2χψₗ`).
///
/// This walks the identical kick–drift–kick lockstep the joint solver walks for its
/// interleaved reference tower — same routine, same operation order — so for
/// identical classical histories the diagonal tables agree bitwise with
/// [`SolutionTower::h_diag_tables`].
pub fn subtraction_tower(
    spec: &LatticeSpec,
    chi: &SwitchingFunction,
    psi: &[FieldHistory],
    m: f64,
    order: usize,
    options: SolveOptions,
    strategy: Strategy,
) -> Result<SubtractionTower> {
    if order > MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "truncation order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    if psi.len() < order {
        return Err(Error::ShapeMismatch(format!(
            "need {order} classical histories for order {order}, got {}",
            psi.len()
        )));
    }
    if chi.values.len() != spec.n_slices() {
        return Err(Error::ShapeMismatch(format!(
            "switching function has {} slices, lattice has {}",
            chi.values.len(),
            spec.n_slices()
        )));
    }
    if options.snapshot_stride == 0 {
        return Err(Error::InvalidParameter("snapshot stride must be ≥ 1".into()));
    }
    let n_x = spec.n_x;
    let n_slices = spec.n_slices();
    for (l, h) in psi.iter().enumerate().take(order) {
        if h.u.dim() != (n_slices, n_x) {
            return Err(Error::ShapeMismatch(format!(
                "classical history {l} has shape {:?}, lattice wants ({n_slices}, {n_x})",
                h.u.dim()
            )));
        }
    }

    let n_orders = order + 1;
    let op = SpatialOp::new(n_x, spec.dx(), m);
    let vac = twopoint::vacuum_data(spec, m)?;
    let mut tower: Vec<BlockState<f64>> =
        (0..n_orders).map(|_| BlockState::zero(n_x)).collect();
    tower[0].uu = vac.g_phiphi.clone();
    tower[0].pp = vac.g_pipi.clone();

    let mut diag: Vec<Array2<f64>> =
        (0..n_orders).map(|_| Array2::zeros((n_slices, n_x))).collect();
    let mut snapshots = Vec::new();
    let mut scratch = Array2::<f64>::zeros((n_x, n_x));
    let mut vs_n: Vec<Vec<f64>> = vec![vec![0.0; n_x]; order];
    let mut vs_np1 = vs_n.clone();

    let record = |s: usize, tower: &[BlockState<f64>], diag: &mut [Array2<f64>]| {
        for k in 0..n_orders {
            for x in 0..n_x {
                diag[k][[s, x]] = tower[k].uu[[x, x]];
            }
        }
    };
    record(0, &tower, &mut diag);
    snapshots.push(SubtractionSnapshot { slice: 0, orders: tower.clone() });

    for n in 0..spec.n_t {
        let s = n + 1;
        let (chi_n, chi_np1) = (chi.at(n), chi.at(s));
        for l in 0..order {
            for x in 0..n_x {
                vs_n[l][x] = 2.0 * chi_n * psi[l].u[[n, x]];
                vs_np1[l][x] = 2.0 * chi_np1 * psi[l].u[[s, x]];
            }
        }
        engine::tower_step(strategy, &op, spec.dt, &vs_n, &vs_np1, &mut tower, 1, &mut scratch);
        record(s, &tower, &mut diag);
        if s % options.snapshot_stride == 0 || s == spec.n_t {
            snapshots.push(SubtractionSnapshot { slice: s, orders: tower.clone() });
        }
    }
    Ok(SubtractionTower { mass: m, diag, snapshots })
}

/// Assembles the renormalized observable from a solved tower and a standalone
/// reference tower.
///
/// When `sub` was computed from the tower's own classical histories this reproduces
/// the observable the joint solve recorded ([`SolutionTower::phi2_tables`]) bitwise.
pub fn phi_squared(tower: &SolutionTower, sub: &SubtractionTower) -> Result<Phi2Field> {
    let config = tower.config();
    if sub.n_orders() != tower.n_orders() {
        return Err(Error::ShapeMismatch(format!(
            "reference tower has {} orders, solution has {}",
            sub.n_orders(),
            tower.n_orders()
        )));
    }
    if sub.mass() != config.quantum_mass {
        return Err(Error::Validation(format!(
            "reference mass {} does not match the configured quantum mass {}",
            sub.mass(),
            config.quantum_mass
        )));
    }
    let dims = tower.g_diag_k(0).dim();
    let (n_slices, n_x) = dims;
    if sub.diag_k(0).dim() != dims {
        return Err(Error::ShapeMismatch(format!(
            "reference diagonals have shape {:?}, solution has {dims:?}",
            sub.diag_k(0).dim()
        )));
    }
    let mut orders = Vec::with_capacity(tower.n_orders());
    let mut row = vec![0.0; n_x];
    for k in 0..tower.n_orders() {
        let mut table = Array2::<f64>::zeros(dims);
        for s in 0..n_slices {
            let g_row = tower.g_diag_k(k).row(s);
            let h_row = sub.diag_k(k).row(s);
            let prev = if k >= 1 { Some(tower.psi_k(k - 1).u.row(s)) } else { None };
            phi2_row(
                config,
                k,
                g_row.as_slice().expect("standard layout"),
                h_row.as_slice().expect("standard layout"),
                tower.chi().at(s),
                prev.as_ref().map(|r| r.as_slice().expect("standard layout")),
                &mut row,
            );
            for x in 0..n_x {
                table[[s, x]] = row[x];
            }
        }
        orders.push(table);
    }
    Ok(Phi2Field { orders })
}

/// The recorded observable of a solved tower as a [`Phi2Field`].
pub fn phi_squared_recorded(tower: &SolutionTower) -> Phi2Field {
    Phi2Field { orders: tower.phi2_tables().to_vec() }
}

/// Relabels the observable under a shift `(δβ₁, δβ₂, δβ₃)` of the counterterm
/// coefficients: order 0 gains `δβ₁·m²`, each order k ≥ 1 gains `δβ₂·χ·ψₖ₋₁`, and the
/// curvature shift is inert on the flat cylinder.
///
/// This is the output-level relabeling only. The shifted coefficients also change the
/// classical sources, which feeds back into orders ≥ 2 dynamically; reproducing that
/// requires re-solving with the shifted configuration. Orders 0 and 1 are unaffected
/// by the feedback, so for them the relabeling and a re-solve agree to roundoff.
pub fn ambiguity_shift(
    phi2: &Phi2Field,
    config: &CouplingConfig,
    chi: &SwitchingFunction,
    psi: &[FieldHistory],
    delta_beta1: f64,
    delta_beta2: f64,
    delta_beta3: f64,
) -> Result<Phi2Field> {
    for (name, v) in
        [("δβ₁", delta_beta1), ("δβ₂", delta_beta2), ("δβ₃", delta_beta3)]
    {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
        }
    }
    let n_orders = phi2.n_orders();
    if psi.len() + 1 < n_orders {
        return Err(Error::ShapeMismatch(format!(
            "need {} classical histories for {} orders, got {}",
            n_orders - 1,
            n_orders,
            psi.len()
        )));
    }
    let (n_slices, n_x) = phi2.order_k(0).dim();
    if chi.values.len() != n_slices {
        return Err(Error::ShapeMismatch(format!(
            "switching function has {} slices, observable has {n_slices}",
            chi.values.len()
        )));
    }
    let _ = delta_beta3; // R ≡ 0 on the flat cylinder.
    let m2 = config.quantum_mass * config.quantum_mass;
    let mut orders = Vec::with_capacity(n_orders);
    for k in 0..n_orders {
        let mut table = phi2.order_k(k).clone();
        if k == 0 {
            table.mapv_inplace(|v| v + delta_beta1 * m2);
        } else {
            for s in 0..n_slices {
                let chi_s = chi.at(s);
                for x in 0..n_x {
                    table[[s, x]] += delta_beta2 * chi_s * psi[k - 1].u[[s, x]];
                }
            }
        }
        orders.push(table);
    }
    Ok(Phi2Field { orders })
}
