//! Shared explicit integrator: velocity-Verlet (kick–drift–kick) for
//! `∂ₜ²u = (∂ₓ² − μ² − V(t,x))u − J(t,x)` on the periodic circle, for real field
//! columns and for complex two-point blocks evolved in either tensor argument.
//!
//! The kick–drift–kick composition is algebraically identical to the 3-term leapfrog
//! `u^{n+1} = 2u^n − u^{n−1} + dt²(A^n u^n − J^n)` with momentum
//! `p^n = (u^{n+1} − u^{n−1})/(2 dt)`, so momenta ARE centered time differences and the
//! map is exactly symplectic slice by slice for any time-dependent potential.
//!
//! Every routine here writes each output entry exactly once from read-only inputs, so
//! row-parallel execution is bitwise identical to sequential execution.

use ndarray::Array2;

use crate::{Strategy, C64};

/// Element type of a field or block: real for classical solves and kernels, complex
/// for two-point blocks.
pub(crate) trait Scalar:
    Copy
    + Send
    + Sync
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + std::ops::AddAssign
{
    /// Additive identity.
    const ZERO: Self;
}

impl Scalar for f64 {
    const ZERO: f64 = 0.0;
}

impl Scalar for C64 {
    const ZERO: C64 = C64::new(0.0, 0.0);
}

/// The free spatial operator `A₀ = ∂ₓ² − μ²` of the stepped equation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SpatialOp {
    pub n_x: usize,
    pub inv_dx2: f64,
    pub msq: f64,
}

impl SpatialOp {
    pub(crate) fn new(n_x: usize, dx: f64, mass: f64) -> Self {
        SpatialOp { n_x, inv_dx2: 1.0 / (dx * dx), msq: mass * mass }
    }

    /// `out[j] = (u[j−1] − 2u[j] + u[j+1])/dx² − (μ² + V[j])·u[j]` (periodic).
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn apply<T: Scalar>(&self, u: &[T], v: Option<&[f64]>, out: &mut [T]) {
        let n = self.n_x;
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let vj = v.map_or(0.0, |v| v[j]);
            out[j] = (u[jm] - u[j] * 2.0 + u[jp]) * self.inv_dx2 - u[j] * (self.msq + vj);
        }
    }
}

/// Position/momentum pair of one evolved column.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FieldState<T: Scalar> {
    pub u: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Scalar> FieldState<T> {
    pub(crate) fn zero(n_x: usize) -> Self {
        FieldState { u: vec![T::ZERO; n_x], p: vec![T::ZERO; n_x] }
    }

    /// Half-kick: `p += h2·(A u − J)`.
    pub(crate) fn kick(&mut self, op: &SpatialOp, h2: f64, v: Option<&[f64]>, source: Option<&[T]>) {
        let n = op.n_x;
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let vj = v.map_or(0.0, |v| v[j]);
            let mut f =
                (self.u[jm] - self.u[j] * 2.0 + self.u[jp]) * op.inv_dx2 - self.u[j] * (op.msq + vj);
            if let Some(s) = source {
                f = f - s[j];
            }
            self.p[j] += f * h2;
        }
    }

    /// Drift: `u += h·p`.
    pub(crate) fn drift(&mut self, h: f64) {
        for j in 0..self.u.len() {
            self.u[j] += self.p[j] * h;
        }
    }

    /// Largest absolute magnitude over positions (blow-up guard).
    pub(crate) fn max_abs(&self) -> f64
    where
        T: Magnitude,
    {
        self.u.iter().fold(0.0f64, |m, v| m.max(v.magnitude()))
    }
}

/// Absolute-value hook for the blow-up guard.
pub(crate) trait Magnitude {
    fn magnitude(&self) -> f64;
}

impl Magnitude for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Magnitude for C64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// The four equal-time blocks of a two-point state, first tensor argument along rows.
///
/// `uu = ⟨φφ⟩`, `up = ⟨φπ⟩`, `pu = ⟨πφ⟩`, `pp = ⟨ππ⟩`. Under the one-step map `M`
/// acting on each argument the super-matrix `[[uu, up], [pu, pp]]` maps to `M S Mᵀ`;
/// the routines below realize that as row-argument operations followed by
/// column-argument operations.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockState<T: Scalar> {
    pub uu: Array2<T>,
    pub up: Array2<T>,
    pub pu: Array2<T>,
    pub pp: Array2<T>,
}

impl<T: Scalar> BlockState<T> {
    pub(crate) fn zero(n_x: usize) -> Self {
        let z = || Array2::from_elem((n_x, n_x), T::ZERO);
        BlockState { uu: z(), up: z(), pu: z(), pp: z() }
    }
}

/// `dst += h·src`, entrywise, row-parallel.
pub(crate) fn axpy<T: Scalar>(strategy: Strategy, h: f64, src: &Array2<T>, dst: &mut Array2<T>) {
    let n = src.ncols();
    let s = src.as_slice().expect("standard layout");
    let mut rows: Vec<&mut [T]> = dst.as_slice_mut().expect("standard layout").chunks_mut(n).collect();
    strategy.for_each_mut(&mut rows, |i, row| {
        let srow = &s[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += srow[j] * h;
        }
    });
}

/// Row-argument half-kick of a block: `dst += h2·(A_x·src − extra)` where `A_x` applies
/// the spatial stencil and the potential `v` over the FIRST index.
pub(crate) fn x_kick<T: Scalar>(
    strategy: Strategy,
    op: &SpatialOp,
    h2: f64,
    v: Option<&[f64]>,
    src: &Array2<T>,
    extra: Option<&Array2<T>>,
    dst: &mut Array2<T>,
) {
    let n = op.n_x;
    let s = src.as_slice().expect("standard layout");
    let e = extra.map(|e| e.as_slice().expect("standard layout"));
    let mut rows: Vec<&mut [T]> = dst.as_slice_mut().expect("standard layout").chunks_mut(n).collect();
    strategy.for_each_mut(&mut rows, |i, row| {
        let im = if i == 0 { n - 1 } else { i - 1 };
        let ip = if i + 1 == n { 0 } else { i + 1 };
        let vi = v.map_or(0.0, |v| v[i]);
        let (rm, r0, rp) = (&s[im * n..im * n + n], &s[i * n..i * n + n], &s[ip * n..ip * n + n]);
        for j in 0..n {
            let mut f = (rm[j] - r0[j] * 2.0 + rp[j]) * op.inv_dx2 - r0[j] * (op.msq + vi);
            if let Some(e) = e {
                f = f - e[i * n + j];
            }
            row[j] += f * h2;
        }
    });
}

/// Column-argument half-kick of a block: `dst += h2·(src·A_yᵀ − extra)` where `A_y`
/// applies the stencil and the potential over the SECOND index.
pub(crate) fn y_kick<T: Scalar>(
    strategy: Strategy,
    op: &SpatialOp,
    h2: f64,
    v: Option<&[f64]>,
    src: &Array2<T>,
    extra: Option<&Array2<T>>,
    dst: &mut Array2<T>,
) {
    let n = op.n_x;
    let s = src.as_slice().expect("standard layout");
    let e = extra.map(|e| e.as_slice().expect("standard layout"));
    let mut rows: Vec<&mut [T]> = dst.as_slice_mut().expect("standard layout").chunks_mut(n).collect();
    strategy.for_each_mut(&mut rows, |i, row| {
        let r0 = &s[i * n..i * n + n];
        for j in 0..n {
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let vj = v.map_or(0.0, |v| v[j]);
            let mut f = (r0[jm] - r0[j] * 2.0 + r0[jp]) * op.inv_dx2 - r0[j] * (op.msq + vj);
            if let Some(e) = e {
                f = f - e[i * n + j];
            }
            row[j] += f * h2;
        }
    });
}

/// Advances one block state a full step `t_n → t_{n+1}` with potentials `v_n`, `v_np1`
/// over both tensor arguments (no sources). The composite is row-argument kick–drift–kick
/// followed by column-argument kick–drift–kick, i.e. `S ← (M S) Mᵀ`.
pub(crate) fn block_full_step(
    strategy: Strategy,
    op: &SpatialOp,
    dt: f64,
    v_n: Option<&[f64]>,
    v_np1: Option<&[f64]>,
    s: &mut BlockState<C64>,
) {
    let h2 = 0.5 * dt;
    // Row argument.
    x_kick(strategy, op, h2, v_n, &s.uu, None, &mut s.pu);
    x_kick(strategy, op, h2, v_n, &s.up, None, &mut s.pp);
    axpy(strategy, dt, &s.pu, &mut s.uu);
    axpy(strategy, dt, &s.pp, &mut s.up);
    x_kick(strategy, op, h2, v_np1, &s.uu, None, &mut s.pu);
    x_kick(strategy, op, h2, v_np1, &s.up, None, &mut s.pp);
    // Column argument.
    y_kick(strategy, op, h2, v_n, &s.uu, None, &mut s.up);
    y_kick(strategy, op, h2, v_n, &s.pu, None, &mut s.pp);
    axpy(strategy, dt, &s.up, &mut s.uu);
    axpy(strategy, dt, &s.pp, &mut s.pu);
    y_kick(strategy, op, h2, v_np1, &s.uu, None, &mut s.up);
    y_kick(strategy, op, h2, v_np1, &s.pu, None, &mut s.pp);
}

/// Accumulates the interaction source of order `k`, `Σ_l vs[l] ∘ pick(tower[k−1−l])`,
/// into `out`. The coefficient slice `vs[l]` scales the block over the first index
/// when `by_row` is true and over the second otherwise. Returns `false` — with `out`
/// left untouched — when every contributing coefficient slice is identically zero, so
/// callers can skip the subtraction and keep exact zeros exact.
fn order_source<T: Scalar>(
    strategy: Strategy,
    vs: &[Vec<f64>],
    lower: &[BlockState<T>],
    k: usize,
    by_row: bool,
    pick: impl Fn(&BlockState<T>) -> &Array2<T>,
    out: &mut Array2<T>,
) -> bool {
    let n = out.ncols();
    let terms: Vec<(&[f64], &[T])> = (0..k.min(vs.len()))
        .filter(|&l| vs[l].iter().any(|&c| c != 0.0))
        .map(|l| {
            (vs[l].as_slice(), pick(&lower[k - 1 - l]).as_slice().expect("standard layout"))
        })
        .collect();
    if terms.is_empty() {
        return false;
    }
    let mut rows: Vec<&mut [T]> =
        out.as_slice_mut().expect("standard layout").chunks_mut(n).collect();
    strategy.for_each_mut(&mut rows, |i, row| {
        for x in row.iter_mut() {
            *x = T::ZERO;
        }
        for (v, m) in &terms {
            let mrow = &m[i * n..i * n + n];
            if by_row {
                let vi = v[i];
                if vi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    row[j] += mrow[j] * vi;
                }
            } else {
                for j in 0..n {
                    let vj = v[j];
                    if vj != 0.0 {
                        row[j] += mrow[j] * vj;
                    }
                }
            }
        }
    });
    true
}

/// Advances a tower of block states one full step `t_n → t_{n+1}` in per-order
/// lockstep. Order `k` is sourced by the lower orders through the coefficient slices
/// `vs[l]` (the slice multiplying order `k − 1 − l` in the order-`k` equation),
/// evaluated at the step's start (`vs_n`) and end (`vs_np1`) to match the half-kick
/// structure. Each half-kick phase runs over ALL orders before the next phase starts,
/// so sources always read position-type blocks at a consistent stage; kicks write only
/// momentum-type blocks, which no source reads, hence order within a phase is
/// immaterial. Orders below `k_start` are held exactly fixed (a pinned reference
/// block) while still feeding sources.
#[allow(clippy::too_many_arguments)]
pub(crate) fn tower_step<T: Scalar>(
    strategy: Strategy,
    op: &SpatialOp,
    dt: f64,
    vs_n: &[Vec<f64>],
    vs_np1: &[Vec<f64>],
    tower: &mut [BlockState<T>],
    k_start: usize,
    scratch: &mut Array2<T>,
) {
    let h2 = 0.5 * dt;
    // Row argument: kick at t_n, drift, kick at t_{n+1}.
    for pass in 0..2 {
        let vs = if pass == 0 { vs_n } else { vs_np1 };
        for k in k_start..tower.len() {
            let (lower, upper) = tower.split_at_mut(k);
            let blk = &mut upper[0];
            if order_source(strategy, vs, lower, k, true, |b| &b.uu, scratch) {
                x_kick(strategy, op, h2, None, &blk.uu, Some(&*scratch), &mut blk.pu);
            } else {
                x_kick(strategy, op, h2, None, &blk.uu, None, &mut blk.pu);
            }
            if order_source(strategy, vs, lower, k, true, |b| &b.up, scratch) {
                x_kick(strategy, op, h2, None, &blk.up, Some(&*scratch), &mut blk.pp);
            } else {
                x_kick(strategy, op, h2, None, &blk.up, None, &mut blk.pp);
            }
        }
        if pass == 0 {
            for blk in tower[k_start..].iter_mut() {
                axpy(strategy, dt, &blk.pu, &mut blk.uu);
                axpy(strategy, dt, &blk.pp, &mut blk.up);
            }
        }
    }
    // Column argument.
    for pass in 0..2 {
        let vs = if pass == 0 { vs_n } else { vs_np1 };
        for k in k_start..tower.len() {
            let (lower, upper) = tower.split_at_mut(k);
            let blk = &mut upper[0];
            if order_source(strategy, vs, lower, k, false, |b| &b.uu, scratch) {
                y_kick(strategy, op, h2, None, &blk.uu, Some(&*scratch), &mut blk.up);
            } else {
                y_kick(strategy, op, h2, None, &blk.uu, None, &mut blk.up);
            }
            if order_source(strategy, vs, lower, k, false, |b| &b.pu, scratch) {
                y_kick(strategy, op, h2, None, &blk.pu, Some(&*scratch), &mut blk.pp);
            } else {
                y_kick(strategy, op, h2, None, &blk.pu, None, &mut blk.pp);
            }
        }
        if pass == 0 {
            for blk in tower[k_start..].iter_mut() {
                axpy(strategy, dt, &blk.up, &mut blk.uu);
                axpy(strategy, dt, &blk.pp, &mut blk.pu);
            }
        }
    }
}

/// Maximum entry magnitude of a block diagonal (blow-up guard).
pub(crate) fn diag_max_abs(b: &Array2<C64>) -> f64 {
    b.diag().iter().fold(0.0f64, |m, v| m.max(v.norm()))
}

/// Squared lattice wavenumber of Fourier mode `j`: `k̂² = (4/dx²)·sin²(πj/n_x)`,
/// the exact eigenvalue of minus the periodic 3-point Laplacian.
pub(crate) fn khat2(j: usize, n_x: usize, dx: f64) -> f64 {
    let s = (std::f64::consts::PI * j as f64 / n_x as f64).sin();
    4.0 * s * s / (dx * dx)
}

/// Per-step rotation angle of the Verlet map for a mode of squared frequency `Ω²`:
/// `cos θ = 1 − dt²Ω²/2`. Requires `dt·Ω < 2` (stability).
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn step_angle(dt: f64, omega2: f64) -> f64 {
    (1.0 - 0.5 * dt * dt * omega2).acos()
}

/// Effective mode frequency of the Verlet map: `Ω̄ = Ω·√(1 − dt²Ω²/4)`, satisfying
/// `sin θ = dt·Ω̄` with `θ` the per-step angle.
pub(crate) fn omega_bar(dt: f64, omega2: f64) -> f64 {
    (omega2 * (1.0 - 0.25 * dt * dt * omega2)).sqrt()
}
