//! Causal fundamental solutions of `(□ − μ² − V(t,x))u = j` on the discrete cylinder,
//! normalized so that a unit source at grid point `(n', y)` means `j = −δ_{nn'}δ_{xy}/(dt·dx)`.
//!
//! * the retarded kernel `E⁺(n, x; n', y)` vanishes for `n ≤ n'`;
//! * the advanced kernel `E⁻(n, x; n', y) = E⁺(n', y; n, x)` vanishes for `n ≥ n'`;
//! * their difference `E = E⁻ − E⁺` is the antisymmetric propagator whose equal-time
//!   normal derivative is `−δ_{xy}/dx`.
//!
//! Kernels are built by explicit Verlet evolution of delta impulses, one independent
//! column per source site, and stored slab-by-slab per source slice. Perturbative
//! (Born) towers reuse the same stepping with lower orders feeding the source terms.

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::engine::{FieldState, SpatialOp};
use crate::lattice::{GridFunction, LatticeSpec};
use crate::{Error, Result, Strategy};

/// Positions larger than this trip the blow-up guard during kernel evolution.
const BLOWUP_LIMIT: f64 = 1e12;

/// Propagation direction / combination a kernel represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Support strictly after the source slice.
    Retarded,
    /// Support strictly before the source slice.
    Advanced,
    /// Antisymmetric difference advanced − retarded.
    Commutator,
}

/// A sampled two-point kernel `K(n, x; n', y)` stored per source slice: for each
/// `n'` in `source_slices`, a `(n_slices × n_x × n_x)` slab indexed `[n, x, y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenKernel {
    kind: KernelKind,
    mass: f64,
    n_x: usize,
    n_slices: usize,
    dt: f64,
    dx: f64,
    source_slices: Vec<usize>,
    slabs: Vec<Array3<f64>>,
}

impl GreenKernel {
    /// Which causal combination this kernel stores.
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Mass parameter `μ` the kernel was built with.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number of spatial sites.
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// Number of time slices.
    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    /// Time step of the underlying grid.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Site spacing of the underlying grid.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Source slices the kernel holds columns for (sorted ascending).
    pub fn source_slices(&self) -> &[usize] {
        &self.source_slices
    }

    /// True when every slice of the grid is a source slice.
    pub fn is_complete(&self) -> bool {
        self.source_slices.len() == self.n_slices
            && self.source_slices.iter().enumerate().all(|(i, &s)| i == s)
    }

    fn source_index(&self, n_src: usize) -> Result<usize> {
        self.source_slices
            .binary_search(&n_src)
            .map_err(|_| Error::InvalidParameter(format!("slice {n_src} is not a source slice of this kernel")))
    }

    /// The matrix `K(n, ·; n', ·)` with response site along rows, source site along columns.
    pub fn matrix(&self, n: usize, n_src: usize) -> Result<ArrayView2<'_, f64>> {
        if n >= self.n_slices {
            return Err(Error::InvalidParameter(format!(
                "slice index {n} out of range (have {})",
                self.n_slices
            )));
        }
        let s = self.source_index(n_src)?;
        Ok(self.slabs[s].index_axis(Axis(0), n))
    }

    /// One kernel value `K(n, x; n', y)`.
    pub fn value(&self, n: usize, x: usize, n_src: usize, y: usize) -> Result<f64> {
        if n >= self.n_slices || x >= self.n_x || y >= self.n_x {
            return Err(Error::InvalidParameter(format!(
                "kernel index ({n}, {x}; {n_src}, {y}) out of range"
            )));
        }
        let s = self.source_index(n_src)?;
        Ok(self.slabs[s][[n, x, y]])
    }

    fn same_grid(&self, other: &GreenKernel) -> bool {
        self.n_x == other.n_x
            && self.n_slices == other.n_slices
            && self.dt == other.dt
            && self.dx == other.dx
    }
}

fn check_mass(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidParameter(format!("mass must be finite and ≥ 0, got {mu}")));
    }
    Ok(())
}

fn normalize_sources(spec: &LatticeSpec, sources: &[usize]) -> Result<Vec<usize>> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter("at least one source slice is required".into()));
    }
    let mut s: Vec<usize> = sources.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&bad) = s.iter().find(|&&n| n >= spec.n_slices()) {
        return Err(Error::InvalidParameter(format!(
            "source slice {bad} out of range (grid has {} slices)",
            spec.n_slices()
        )));
    }
    Ok(s)
}

/// Evolves the per-order response to a unit delta impulse at `(s, y)`, forward
/// (retarded) or backward (advanced, via the exact inverse of the forward step).
/// Returns one `(n_slices × n_x)` position history per order.
#[allow(clippy::too_many_arguments)]
fn response_column(
    spec: &LatticeSpec,
    op: &SpatialOp,
    v: Option<&GridFunction>,
    w_tower: &[&GridFunction],
    n_orders: usize,
    s: usize,
    y: usize,
    forward: bool,
) -> Result<Vec<Array2<f64>>> {
    let n_x = spec.n_x;
    let n_slices = spec.n_slices();
    let mut states: Vec<FieldState<f64>> = (0..n_orders).map(|_| FieldState::zero(n_x)).collect();
    let sign = if forward { 1.0 } else { -1.0 };
    states[0].p[y] = sign / spec.dx();
    let h = sign * spec.dt;
    let h2 = 0.5 * h;
    let mut cols: Vec<Array2<f64>> = (0..n_orders).map(|_| Array2::zeros((n_slices, n_x))).collect();
    let mut src_buf: Vec<Vec<f64>> = (0..n_orders).map(|_| vec![0.0; n_x]).collect();

    // Source of order k at slice n: sum over lower orders against the potential tower.
    let fill_sources = |buf: &mut [Vec<f64>], states: &[FieldState<f64>], n: usize| {
        for k in 1..n_orders {
            buf[k].fill(0.0);
            for (l, w) in w_tower.iter().enumerate().take(k) {
                let w = w.slice(n);
                let u = &states[k - 1 - l].u;
                for x in 0..n_x {
                    buf[k][x] += w[x] * u[x];
                }
            }
        }
    };
    let kick_all = |states: &mut [FieldState<f64>], buf: &[Vec<f64>], n: usize, h2: f64| {
        let vslice = v.map(|g| g.slice(n));
        for (k, st) in states.iter_mut().enumerate() {
            let src = if k == 0 { None } else { Some(&buf[k][..]) };
            st.kick(op, h2, vslice, src);
        }
    };

    let guard = |states: &[FieldState<f64>]| -> Result<()> {
        if states.iter().any(|st| !st.max_abs().is_finite() || st.max_abs() > BLOWUP_LIMIT) {
            return Err(Error::Blowup("kernel evolution exceeded the blow-up limit".into()));
        }
        Ok(())
    };

    if forward {
        for n in s..n_slices - 1 {
            fill_sources(&mut src_buf, &states, n);
            kick_all(&mut states, &src_buf, n, h2);
            for st in &mut states {
                st.drift(h);
            }
            fill_sources(&mut src_buf, &states, n + 1);
            kick_all(&mut states, &src_buf, n + 1, h2);
            for (k, st) in states.iter().enumerate() {
                let mut row = cols[k].row_mut(n + 1);
                for x in 0..n_x {
                    row[x] = st.u[x];
                }
            }
            if (n - s) % 64 == 63 {
                guard(&states)?;
            }
        }
    } else {
        for n in (1..=s).rev() {
            fill_sources(&mut src_buf, &states, n);
            kick_all(&mut states, &src_buf, n, h2);
            for st in &mut states {
                st.drift(h);
            }
            fill_sources(&mut src_buf, &states, n - 1);
            kick_all(&mut states, &src_buf, n - 1, h2);
            for (k, st) in states.iter().enumerate() {
                let mut row = cols[k].row_mut(n - 1);
                for x in 0..n_x {
                    row[x] = st.u[x];
                }
            }
            if (s - n) % 64 == 63 {
                guard(&states)?;
            }
        }
    }
    guard(&states)?;
    Ok(cols)
}

/// Shared builder: per-order causal kernels for the given source slices.
#[allow(clippy::too_many_arguments)]
fn build_causal(
    spec: &LatticeSpec,
    mu: f64,
    v: Option<&GridFunction>,
    w_tower: &[GridFunction],
    n_orders: usize,
    sources: &[usize],
    forward: bool,
    strategy: Strategy,
) -> Result<Vec<GreenKernel>> {
    check_mass(mu)?;
    if let Some(g) = v {
        g.check_shape(spec)?;
    }
    for w in w_tower {
        w.check_shape(spec)?;
    }
    if n_orders == 0 || n_orders > 17 {
        return Err(Error::InvalidParameter(format!(
            "number of orders must be in 1..=17, got {n_orders}"
        )));
    }
    let sources = normalize_sources(spec, sources)?;
    let n_x = spec.n_x;
    let n_slices = spec.n_slices();
    let op = SpatialOp::new(n_x, spec.dx(), mu);
    let w_refs: Vec<&GridFunction> = w_tower.iter().collect();

    let mut slabs: Vec<Vec<Array3<f64>>> = (0..n_orders).map(|_| Vec::new()).collect();
    for &s in &sources {
        let mut items: Vec<Result<Vec<Array2<f64>>>> = (0..n_x).map(|_| Ok(Vec::new())).collect();
        strategy.for_each_mut(&mut items, |y, slot| {
            *slot = response_column(spec, &op, v, &w_refs, n_orders, s, y, forward);
        });
        let mut per_order: Vec<Array3<f64>> =
            (0..n_orders).map(|_| Array3::zeros((n_slices, n_x, n_x))).collect();
        for (y, item) in items.into_iter().enumerate() {
            let cols = item?;
            for (k, col) in cols.iter().enumerate() {
                for n in 0..n_slices {
                    for x in 0..n_x {
                        per_order[k][[n, x, y]] = col[[n, x]];
                    }
                }
            }
        }
        for (k, slab) in per_order.into_iter().enumerate() {
            slabs[k].push(slab);
        }
    }

    let kind = if forward { KernelKind::Retarded } else { KernelKind::Advanced };
    Ok(slabs
        .into_iter()
        .map(|slabs| GreenKernel {
            kind,
            mass: mu,
            n_x,
            n_slices,
            dt: spec.dt,
            dx: spec.dx(),
            source_slices: sources.clone(),
            slabs,
        })
        .collect())
}

/// Builds the retarded kernel of `□ − μ² − V` for the given source slices.
pub fn build_retarded(
    spec: &LatticeSpec,
    mu: f64,
    v: Option<&GridFunction>,
    sources: &[usize],
    strategy: Strategy,
) -> Result<GreenKernel> {
    build_causal(spec, mu, v, &[], 1, sources, true, strategy).map(|mut v| v.pop().expect("one order"))
}

/// Builds the retarded kernel with every slice as a source slice.
pub fn build_retarded_complete(
    spec: &LatticeSpec,
    mu: f64,
    v: Option<&GridFunction>,
    strategy: Strategy,
) -> Result<GreenKernel> {
    let all: Vec<usize> = (0..spec.n_slices()).collect();
    let bytes = (spec.n_slices() * spec.n_slices()) as u128 * (spec.n_x * spec.n_x) as u128 * 8;
    if bytes > 2 << 30 {
        return Err(Error::InvalidParameter(format!(
            "complete kernel would need {bytes} bytes; build selected source slices instead"
        )));
    }
    build_retarded(spec, mu, v, &all, strategy)
}

/// Builds the advanced kernel of `□ − μ² − V` directly, by stepping the exact inverse
/// of the forward update backward from each source slice.
pub fn build_advanced(
    spec: &LatticeSpec,
    mu: f64,
    v: Option<&GridFunction>,
    sources: &[usize],
    strategy: Strategy,
) -> Result<GreenKernel> {
    build_causal(spec, mu, v, &[], 1, sources, false, strategy).map(|mut v| v.pop().expect("one order"))
}

/// Produces the opposite-direction kernel by transposing a complete kernel:
/// `E⁻(n, x; n', y) = E⁺(n', y; n, x)`. The data movement is exact (bitwise), and the
/// operation is an involution. Requires a complete retarded or advanced kernel.
pub fn advanced_from_retarded(kernel: &GreenKernel) -> Result<GreenKernel> {
    let kind = match kernel.kind {
        KernelKind::Retarded => KernelKind::Advanced,
        KernelKind::Advanced => KernelKind::Retarded,
        KernelKind::Commutator => {
            return Err(Error::InvalidParameter(
                "transposition needs a retarded or advanced kernel, not a commutator".into(),
            ))
        }
    };
    if !kernel.is_complete() {
        return Err(Error::InvalidParameter(
            "transposition needs a kernel with every slice as a source slice".into(),
        ));
    }
    let (n_slices, n_x) = (kernel.n_slices, kernel.n_x);
    let mut slabs: Vec<Array3<f64>> = (0..n_slices).map(|_| Array3::zeros((n_slices, n_x, n_x))).collect();
    for (s, slab) in slabs.iter_mut().enumerate() {
        for n in 0..n_slices {
            for x in 0..n_x {
                for y in 0..n_x {
                    slab[[n, x, y]] = kernel.slabs[n][[s, y, x]];
                }
            }
        }
    }
    Ok(GreenKernel {
        kind,
        mass: kernel.mass,
        n_x,
        n_slices,
        dt: kernel.dt,
        dx: kernel.dx,
        source_slices: kernel.source_slices.clone(),
        slabs,
    })
}

/// Combines matching retarded and advanced kernels into the antisymmetric
/// commutator kernel `E = E⁻ − E⁺`.
pub fn commutator_kernel(ret: &GreenKernel, adv: &GreenKernel) -> Result<GreenKernel> {
    if ret.kind != KernelKind::Retarded || adv.kind != KernelKind::Advanced {
        return Err(Error::InvalidParameter(
            "commutator needs a retarded first argument and an advanced second argument".into(),
        ));
    }
    if !ret.same_grid(adv) || ret.mass != adv.mass || ret.source_slices != adv.source_slices {
        return Err(Error::ShapeMismatch(
            "retarded and advanced kernels must share grid, mass, and source slices".into(),
        ));
    }
    let slabs = ret
        .slabs
        .iter()
        .zip(&adv.slabs)
        .map(|(r, a)| a - r)
        .collect();
    Ok(GreenKernel {
        kind: KernelKind::Commutator,
        mass: ret.mass,
        n_x: ret.n_x,
        n_slices: ret.n_slices,
        dt: ret.dt,
        dx: ret.dx,
        source_slices: ret.source_slices.clone(),
        slabs,
    })
}

/// Per-order retarded and advanced kernels of a perturbatively expanded potential.
#[derive(Debug, Clone, PartialEq)]
pub struct BornTower {
    /// Order-`k` retarded kernels, `k = 0..=n`.
    pub retarded: Vec<GreenKernel>,
    /// Order-`k` advanced kernels, `k = 0..=n`.
    pub advanced: Vec<GreenKernel>,
}

/// Born expansion for a static perturbing potential `w`: with total potential `λ·w`,
/// order 0 is the free kernel and order `k ≥ 1` solves `(□ − μ²)E_k = w·E_{k−1}`.
pub fn born_series(
    spec: &LatticeSpec,
    mu: f64,
    w: &[f64],
    n: usize,
    sources: &[usize],
    strategy: Strategy,
) -> Result<BornTower> {
    let w = GridFunction::from_static(spec, w)?;
    born_series_tower(spec, mu, std::slice::from_ref(&w), n, sources, strategy)
}

/// Born expansion for a potential that is itself a power series: with total potential
/// `Σ_j λ^{j+1}·w_tower[j]`, order `k ≥ 1` solves `(□ − μ²)E_k = Σ_j w_j·E_{k−1−j}`.
pub fn born_series_tower(
    spec: &LatticeSpec,
    mu: f64,
    w_tower: &[GridFunction],
    n: usize,
    sources: &[usize],
    strategy: Strategy,
) -> Result<BornTower> {
    if w_tower.is_empty() {
        return Err(Error::InvalidParameter("the potential tower must not be empty".into()));
    }
    let retarded = build_causal(spec, mu, None, w_tower, n + 1, sources, true, strategy)?;
    let advanced = build_causal(spec, mu, None, w_tower, n + 1, sources, false, strategy)?;
    Ok(BornTower { retarded, advanced })
}

/// Position and momentum histories of one evolved real field, slice-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    /// Positions `u(n, x)`.
    pub u: Array2<f64>,
    /// Momenta `p(n, x)`; momenta are exactly the centered time differences of `u`.
    pub p: Array2<f64>,
}

impl FieldHistory {
    /// Positions on slice `n`.
    pub fn u_slice(&self, n: usize) -> &[f64] {
        self.u.row(n).to_slice().expect("standard layout")
    }

    /// Momenta on slice `n`.
    pub fn p_slice(&self, n: usize) -> &[f64] {
        self.p.row(n).to_slice().expect("standard layout")
    }
}

/// Solves the linear initial value problem `(□ − M²)u = j` with data `u(0) = ς`,
/// `∂ₜu(0) = ϖ` by Verlet stepping, recording every slice.
pub fn classical_solve(
    spec: &LatticeSpec,
    big_m: f64,
    j: &GridFunction,
    sigma: &[f64],
    pi: &[f64],
) -> Result<FieldHistory> {
    check_mass(big_m)?;
    j.check_shape(spec)?;
    let n_x = spec.n_x;
    if sigma.len() != n_x || pi.len() != n_x {
        return Err(Error::ShapeMismatch(format!(
            "initial data must have length {n_x}, got {} and {}",
            sigma.len(),
            pi.len()
        )));
    }
    let n_slices = spec.n_slices();
    let op = SpatialOp::new(n_x, spec.dx(), big_m);
    let mut st = FieldState::<f64>::zero(n_x);
    st.u.copy_from_slice(sigma);
    st.p.copy_from_slice(pi);
    let mut u = Array2::zeros((n_slices, n_x));
    let mut p = Array2::zeros((n_slices, n_x));
    u.row_mut(0).as_slice_mut().expect("layout").copy_from_slice(&st.u);
    p.row_mut(0).as_slice_mut().expect("layout").copy_from_slice(&st.p);
    let h2 = 0.5 * spec.dt;
    for n in 0..n_slices - 1 {
        // Rearranging (□ − M²)u = j gives ∂ₜ²u = (∂ₓ² − M²)u − j, which is the kick
        // convention with source j.
        st.kick(&op, h2, None, Some(j.slice(n)));
        st.drift(spec.dt);
        st.kick(&op, h2, None, Some(j.slice(n + 1)));
        u.row_mut(n + 1).as_slice_mut().expect("layout").copy_from_slice(&st.u);
        p.row_mut(n + 1).as_slice_mut().expect("layout").copy_from_slice(&st.p);
        if n % 64 == 63 && (!st.max_abs().is_finite() || st.max_abs() > BLOWUP_LIMIT) {
            return Err(Error::Blowup(format!("classical solution exceeded the blow-up limit at slice {n}")));
        }
    }
    if !st.max_abs().is_finite() || st.max_abs() > BLOWUP_LIMIT {
        return Err(Error::Blowup("classical solution exceeded the blow-up limit".into()));
    }
    Ok(FieldHistory { u, p })
}

/// Position-row blocks of the transfer map from the initial surface: the solution of
/// the source-free equation with data `(ς, ϖ)` at slice 0 is `u(n) = A(n)ς + B(n)ϖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePropagator {
    n_x: usize,
    dt: f64,
    dx: f64,
    a: Vec<Array2<f64>>,
    b: Vec<Array2<f64>>,
}

impl SurfacePropagator {
    /// Builds `A(n)`, `B(n)` by evolving the `2·n_x` basis columns of the data surface.
    pub fn build(
        spec: &LatticeSpec,
        mu: f64,
        v: Option<&GridFunction>,
        strategy: Strategy,
    ) -> Result<Self> {
        check_mass(mu)?;
        if let Some(g) = v {
            g.check_shape(spec)?;
        }
        let n_x = spec.n_x;
        let n_slices = spec.n_slices();
        let op = SpatialOp::new(n_x, spec.dx(), mu);
        let h2 = 0.5 * spec.dt;
        let mut items: Vec<Result<Array2<f64>>> = (0..2 * n_x).map(|_| Ok(Array2::zeros((0, 0)))).collect();
        strategy.for_each_mut(&mut items, |c, slot| {
            let mut st = FieldState::<f64>::zero(n_x);
            if c < n_x {
                st.u[c] = 1.0;
            } else {
                st.p[c - n_x] = 1.0;
            }
            let mut rec = Array2::zeros((n_slices, n_x));
            rec.row_mut(0).as_slice_mut().expect("layout").copy_from_slice(&st.u);
            let mut failed = false;
            for n in 0..n_slices - 1 {
                st.kick(&op, h2, v.map(|g| g.slice(n)), None);
                st.drift(spec.dt);
                st.kick(&op, h2, v.map(|g| g.slice(n + 1)), None);
                rec.row_mut(n + 1).as_slice_mut().expect("layout").copy_from_slice(&st.u);
                if n % 64 == 63 && (!st.max_abs().is_finite() || st.max_abs() > BLOWUP_LIMIT) {
                    failed = true;
                    break;
                }
            }
            *slot = if failed || !st.max_abs().is_finite() || st.max_abs() > BLOWUP_LIMIT {
                Err(Error::Blowup("basis evolution exceeded the blow-up limit".into()))
            } else {
                Ok(rec)
            };
        });
        let mut a: Vec<Array2<f64>> = (0..n_slices).map(|_| Array2::zeros((n_x, n_x))).collect();
        let mut b = a.clone();
        for (c, item) in items.into_iter().enumerate() {
            let rec = item?;
            let target = if c < n_x { &mut a } else { &mut b };
            let col = c % n_x;
            for n in 0..n_slices {
                for x in 0..n_x {
                    target[n][[x, col]] = rec[[n, x]];
                }
            }
        }
        Ok(SurfacePropagator { n_x, dt: spec.dt, dx: spec.dx(), a, b })
    }

    /// Recovers `A(n)`, `B(n)` from a retarded kernel with source slices 0 and 1:
    /// `B(n) = dx·E⁺(n; 0)` and, for `n ≥ 1`,
    /// `A(n) = [B(n)·(I + (dt²/2)·A⁰) − dx·E⁺(n; 1)] / dt`, where `A⁰` is the spatial
    /// operator (including the slice-0 potential). At `n = 0`, `A = I`, `B = 0`.
    pub fn from_kernel(
        spec: &LatticeSpec,
        kernel: &GreenKernel,
        v: Option<&GridFunction>,
    ) -> Result<Self> {
        if kernel.kind != KernelKind::Retarded {
            return Err(Error::InvalidParameter("surface extraction needs a retarded kernel".into()));
        }
        if kernel.n_x != spec.n_x || kernel.n_slices != spec.n_slices() {
            return Err(Error::ShapeMismatch("kernel grid does not match the lattice".into()));
        }
        if let Some(g) = v {
            g.check_shape(spec)?;
        }
        let s0 = kernel.source_index(0)?;
        let s1 = kernel.source_index(1)?;
        let n_x = spec.n_x;
        let n_slices = spec.n_slices();
        let dx = spec.dx();
        let h = spec.dt;
        let inv_dx2 = 1.0 / (dx * dx);
        let msq = kernel.mass * kernel.mass;
        let v0 = v.map(|g| g.slice(0).to_vec());
        let mut a: Vec<Array2<f64>> = Vec::with_capacity(n_slices);
        let mut b: Vec<Array2<f64>> = Vec::with_capacity(n_slices);
        a.push(Array2::eye(n_x));
        b.push(Array2::zeros((n_x, n_x)));
        for n in 1..n_slices {
            let e0 = kernel.slabs[s0].index_axis(Axis(0), n);
            let e1 = kernel.slabs[s1].index_axis(Axis(0), n);
            let bn = e0.map(|v| v * dx);
            let mut an = Array2::zeros((n_x, n_x));
            for x in 0..n_x {
                for yy in 0..n_x {
                    let ym = if yy == 0 { n_x - 1 } else { yy - 1 };
                    let yp = if yy + 1 == n_x { 0 } else { yy + 1 };
                    let vy = v0.as_ref().map_or(0.0, |v| v[yy]);
                    let op_term = (bn[[x, ym]] + bn[[x, yp]] - 2.0 * bn[[x, yy]]) * inv_dx2
                        - (msq + vy) * bn[[x, yy]];
                    let c = bn[[x, yy]] + 0.5 * h * h * op_term;
                    an[[x, yy]] = (c - dx * e1[[x, yy]]) / h;
                }
            }
            a.push(an);
            b.push(bn);
        }
        Ok(SurfacePropagator { n_x, dt: spec.dt, dx, a, b })
    }

    /// Position response to unit position data: matrix `A(n)`.
    pub fn a(&self, n: usize) -> &Array2<f64> {
        &self.a[n]
    }

    /// Position response to unit momentum data: matrix `B(n)`.
    pub fn b(&self, n: usize) -> &Array2<f64> {
        &self.b[n]
    }

    /// Number of slices covered.
    pub fn n_slices(&self) -> usize {
        self.a.len()
    }

    /// Number of spatial sites.
    pub fn n_x(&self) -> usize {
        self.n_x
    }
}
