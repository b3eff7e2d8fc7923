//! Discretized (1+1)-dimensional cylinder: a periodic spatial circle of `n_x` sites and
//! circumference `L`, foliated by `n_t + 1` equally spaced time slices.
//!
//! Conventions used throughout the crate:
//!
//! * `dx = L / n_x`, sites at `x_j = j·dx`, periodic index arithmetic;
//! * slice `n` sits at `t_n = t_i + n·dt`, `n = 0..=n_t`;
//! * the wave operator is `□ = −∂ₜ² + ∂ₓ²` discretized with centered second
//!   differences (3-point periodic Laplacian in space, leapfrog in time);
//! * a switching window `(t_on, t_f)` marks where time-dependent couplings may be
//!   nonzero; both ends are snapped to grid times at construction.

use ndarray::Array2;

use crate::{Error, Result};

/// Geometry of the discrete cylinder plus the switching window, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    /// Number of spatial sites (≥ 4).
    pub n_x: usize,
    /// Circumference of the spatial circle.
    pub circumference: f64,
    /// Time step.
    pub dt: f64,
    /// Number of time steps; the grid holds `n_t + 1` slices.
    pub n_t: usize,
    /// Time of the initial slice.
    pub t_i: f64,
    /// Switch-on time (snapped to the grid).
    pub t_on: f64,
    /// Switch-off time (snapped to the grid).
    pub t_f: f64,
    /// Grid index of `t_on`.
    pub i_on: usize,
    /// Grid index of `t_f`.
    pub i_f: usize,
    /// Signed distance the requested `t_on` moved during snapping.
    pub snap_shift_on: f64,
    /// Signed distance the requested `t_f` moved during snapping.
    pub snap_shift_f: f64,
}

/// Builds a validated [`LatticeSpec`], snapping `t_on` and `t_f` to grid times.
///
/// Errors when `n_x < 4`, any length/step is nonpositive, `dt > dx` (explicit-scheme
/// stability bound for the massless operator), the window ordering
/// `t_i < t_on < t_f ≤ t_i + n_t·dt` fails, or snapping collapses the window.
// `!(x > 0.0)` rather than `x <= 0.0`: the negation also rejects NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn make_lattice(
    n_x: usize,
    circumference: f64,
    dt: f64,
    n_t: usize,
    t_i: f64,
    t_on: f64,
    t_f: f64,
) -> Result<LatticeSpec> {
    if n_x < 4 {
        return Err(Error::InvalidParameter(format!("n_x = {n_x}, need at least 4 sites")));
    }
    if !(circumference > 0.0) {
        return Err(Error::InvalidParameter(format!("circumference = {circumference}, need > 0")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}, need > 0")));
    }
    if n_t == 0 {
        return Err(Error::InvalidParameter("n_t = 0, need at least one step".into()));
    }
    let dx = circumference / n_x as f64;
    if dt > dx {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} exceeds dx = {dx}: explicit stepping is unstable"
        )));
    }
    let t_end = t_i + n_t as f64 * dt;
    if !(t_i < t_on && t_on < t_f) {
        return Err(Error::InvalidParameter(format!(
            "switching window must satisfy t_i < t_on < t_f, got t_i = {t_i}, t_on = {t_on}, t_f = {t_f}"
        )));
    }
    if t_f > t_end + 1e-9 * dt {
        return Err(Error::InvalidParameter(format!(
            "t_f = {t_f} lies beyond the final slice t = {t_end}"
        )));
    }
    let snap = |t: f64| -> (usize, f64) {
        let idx = ((t - t_i) / dt).round();
        let idx = idx.clamp(0.0, n_t as f64) as usize;
        let snapped = t_i + idx as f64 * dt;
        (idx, snapped - t)
    };
    let (i_on, snap_shift_on) = snap(t_on);
    let (i_f, snap_shift_f) = snap(t_f);
    if i_on == 0 {
        return Err(Error::InvalidParameter(format!(
            "t_on = {t_on} snapped onto the initial slice; the window must open after t_i"
        )));
    }
    if i_on >= i_f {
        return Err(Error::InvalidParameter(format!(
            "switching window collapsed after snapping: i_on = {i_on}, i_f = {i_f}"
        )));
    }
    Ok(LatticeSpec {
        n_x,
        circumference,
        dt,
        n_t,
        t_i,
        t_on: t_i + i_on as f64 * dt,
        t_f: t_i + i_f as f64 * dt,
        i_on,
        i_f,
        snap_shift_on,
        snap_shift_f,
    })
}

impl LatticeSpec {
    /// Spatial lattice spacing `L / n_x`.
    pub fn dx(&self) -> f64 {
        self.circumference / self.n_x as f64
    }

    /// Number of time slices (`n_t + 1`).
    pub fn n_slices(&self) -> usize {
        self.n_t + 1
    }

    /// Time of slice `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t_i + n as f64 * self.dt
    }

    /// Position of site `j`.
    pub fn site(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    /// Periodic wrap of a (possibly out-of-range) site index.
    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n_x as isize) as usize
    }

    /// Shortest periodic distance between two positions on the circle.
    pub fn circle_distance(&self, a: f64, b: f64) -> f64 {
        let l = self.circumference;
        let d = (a - b).rem_euclid(l);
        d.min(l - d)
    }
}

/// How a lattice run is classified against the explicit-scheme stability bound
/// `dt·Ω_max < 2`, where `Ω_max² = m² + 4/dx²` is the largest squared mode frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    /// Comfortably inside the bound.
    Stable,
    /// Within 5% of the bound (or `dt = dx` exactly): expect slowly growing artifacts.
    Marginal,
    /// At or beyond the bound: the scheme diverges.
    Unstable,
}

/// Stability diagnostic for the mass `m` on this lattice.
#[derive(Debug, Clone, Copy)]
pub struct StabilityReport {
    /// `dt·Ω_max / 2`; values ≥ 1 are unstable.
    pub courant: f64,
    /// Classification of `courant`.
    pub class: StabilityClass,
}

/// Evaluates the stability bound `dt·√(m² + 4/dx²) < 2` for mass `m`.
pub fn stability(spec: &LatticeSpec, mass: f64) -> StabilityReport {
    let dx = spec.dx();
    let omega_max = (mass * mass + 4.0 / (dx * dx)).sqrt();
    let courant = 0.5 * spec.dt * omega_max;
    let class = if courant >= 1.0 {
        StabilityClass::Unstable
    } else if courant > 0.95 || spec.dt == dx {
        StabilityClass::Marginal
    } else {
        StabilityClass::Stable
    };
    StabilityReport { courant, class }
}

/// Shape of the switching factor χ(t), sampled on the time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchingShape {
    /// Smooth compact bump on the open window `(t_on, t_f)`, peak value 1 at the window
    /// midpoint, identically zero outside (exact zeros, not merely small values).
    Bump,
    /// Smooth rise from 0 on `(t_on, t_rise)`, identically 1 for `t ≥ t_rise`.
    /// Used to continue a run with the coupling held on.
    Plateau {
        /// Time at which the rise completes (snapped to the grid).
        t_rise: f64,
    },
    /// χ ≡ 1 on every slice.
    ConstantOne,
    /// χ ≡ 0 on every slice.
    Zero,
    /// Values supplied directly via [`SwitchingFunction::from_values`] rather than
    /// sampled from a named profile (used e.g. to hand a run's tail to a restart).
    Custom,
}

/// The switching factor sampled per time slice, together with its generating shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingFunction {
    /// χ at each of the `n_t + 1` slices.
    pub values: Vec<f64>,
    /// Shape this function was generated from.
    pub shape: SwitchingShape,
}

impl SwitchingFunction {
    /// χ at slice `n`.
    pub fn at(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// Wraps explicitly supplied per-slice values (one per slice of `spec`).
    pub fn from_values(spec: &LatticeSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_slices() {
            return Err(Error::ShapeMismatch(format!(
                "switching values: expected {} slices, got {}",
                spec.n_slices(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "switching values must be finite, got {bad}"
            )));
        }
        Ok(SwitchingFunction { values, shape: SwitchingShape::Custom })
    }
}

/// Samples a switching function of the requested shape on the grid of `spec`.
///
/// The bump profile is `exp(1 − 1/(1 − s²))` with `s` the window coordinate mapped to
/// `(−1, 1)`: all derivatives of the continuum parent vanish at the window ends, the
/// sampled values are exactly zero outside the open window, and the peak value 1 is
/// attained at the window midpoint whenever that midpoint is a grid time.
pub fn make_switching(spec: &LatticeSpec, shape: SwitchingShape) -> Result<SwitchingFunction> {
    let n = spec.n_slices();
    let mut values = vec![0.0; n];
    match shape {
        SwitchingShape::Bump => {
            let (a, b) = (spec.i_on, spec.i_f);
            for (i, v) in values.iter_mut().enumerate() {
                if i > a && i < b {
                    let s = 2.0 * (i - a) as f64 / (b - a) as f64 - 1.0;
                    *v = (1.0 - 1.0 / (1.0 - s * s)).exp();
                }
            }
        }
        SwitchingShape::Plateau { t_rise } => {
            let idx = ((t_rise - spec.t_i) / spec.dt).round();
            if !(idx.is_finite() && idx >= 0.0 && idx <= spec.n_t as f64) {
                return Err(Error::InvalidParameter(format!(
                    "t_rise = {t_rise} does not snap into the grid"
                )));
            }
            let i_rise = idx as usize;
            if i_rise <= spec.i_on {
                return Err(Error::InvalidParameter(format!(
                    "t_rise = {t_rise} must lie after t_on = {}",
                    spec.t_on
                )));
            }
            for (i, v) in values.iter_mut().enumerate() {
                if i >= i_rise {
                    *v = 1.0;
                } else if i > spec.i_on {
                    let u = (i - spec.i_on) as f64 / (i_rise - spec.i_on) as f64;
                    // Smooth partition of unity: exactly 0 at u = 0 and 1 at u = 1.
                    let e = (-1.0 / u).exp();
                    let e1 = (-1.0 / (1.0 - u)).exp();
                    *v = e / (e + e1);
                }
            }
        }
        SwitchingShape::ConstantOne => values.fill(1.0),
        SwitchingShape::Zero => {}
        SwitchingShape::Custom => {
            return Err(Error::InvalidParameter(
                "custom switching values must be supplied via SwitchingFunction::from_values"
                    .into(),
            ));
        }
    }
    Ok(SwitchingFunction { values, shape })
}

/// Named initial-data profile on the spatial circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// Identically zero.
    Zero,
    /// `amplitude · exp(−d(x, center)² / (2·width²))` with the periodic distance `d`.
    Gaussian {
        /// Center position on the circle.
        center: f64,
        /// Gaussian width (> 0).
        width: f64,
        /// Peak amplitude.
        amplitude: f64,
    },
    /// `amplitude · cos(2π·mode·x / L)`.
    Cosine {
        /// Integer mode number on the circle.
        mode: i64,
        /// Amplitude.
        amplitude: f64,
    },
}

impl Profile {
    /// Samples the profile at the `n_x` sites of `spec`.
    // `!(x > 0.0)` rather than `x <= 0.0`: the negation also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn sample(&self, spec: &LatticeSpec) -> Result<Vec<f64>> {
        let mut out = vec![0.0; spec.n_x];
        match *self {
            Profile::Zero => {}
            Profile::Gaussian { center, width, amplitude } => {
                if !(width > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian width = {width}, need > 0"
                    )));
                }
                for (j, v) in out.iter_mut().enumerate() {
                    let d = spec.circle_distance(spec.site(j), center);
                    *v = amplitude * (-d * d / (2.0 * width * width)).exp();
                }
            }
            Profile::Cosine { mode, amplitude } => {
                let k = 2.0 * std::f64::consts::PI * mode as f64 / spec.circumference;
                for (j, v) in out.iter_mut().enumerate() {
                    *v = amplitude * (k * spec.site(j)).cos();
                }
            }
        }
        Ok(out)
    }
}

/// One spatial slice of a field history.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    /// Values at the `n_x` sites.
    pub values: Vec<f64>,
    /// Index of the time slice these values live on.
    pub time_index: usize,
}

/// Applies the centered discretization of `(□ − μ² − V)u` at the middle of three
/// consecutive slices, with `□ = −∂ₜ² + ∂ₓ²` and periodic space.
///
/// `v_mid` is the potential on the middle slice; pass an empty slice for `V ≡ 0`.
/// Errors when slice lengths disagree with `spec.n_x`.
pub fn dalembert(
    spec: &LatticeSpec,
    u_prev: &[f64],
    u_mid: &[f64],
    u_next: &[f64],
    mu: f64,
    v_mid: &[f64],
) -> Result<Vec<f64>> {
    let n = spec.n_x;
    if u_prev.len() != n || u_mid.len() != n || u_next.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "field slices must have length {n}, got {}, {}, {}",
            u_prev.len(),
            u_mid.len(),
            u_next.len()
        )));
    }
    if !v_mid.is_empty() && v_mid.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "potential slice must have length {n} (or 0 for none), got {}",
            v_mid.len()
        )));
    }
    let dt2 = spec.dt * spec.dt;
    let dx2 = spec.dx() * spec.dx();
    let msq = mu * mu;
    let mut out = vec![0.0; n];
    for j in 0..n {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let ddt = (u_next[j] - 2.0 * u_mid[j] + u_prev[j]) / dt2;
        let ddx = (u_mid[jp] - 2.0 * u_mid[j] + u_mid[jm]) / dx2;
        let v = if v_mid.is_empty() { 0.0 } else { v_mid[j] };
        out[j] = -ddt + ddx - (msq + v) * u_mid[j];
    }
    Ok(out)
}

/// A real function sampled on every slice and site of the grid, used for
/// time-dependent potentials and source histories. Row `n` is slice `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Array2<f64>,
}

impl GridFunction {
    /// All-zero history.
    pub fn zeros(spec: &LatticeSpec) -> Self {
        GridFunction { values: Array2::zeros((spec.n_slices(), spec.n_x)) }
    }

    /// Repeats one spatial profile on every slice.
    pub fn from_static(spec: &LatticeSpec, profile: &[f64]) -> Result<Self> {
        if profile.len() != spec.n_x {
            return Err(Error::ShapeMismatch(format!(
                "static profile must have length {}, got {}",
                spec.n_x,
                profile.len()
            )));
        }
        let mut values = Array2::zeros((spec.n_slices(), spec.n_x));
        for mut row in values.rows_mut() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = profile[j];
            }
        }
        Ok(GridFunction { values })
    }

    /// Samples `f(t_n, x_j)` on every slice and site.
    pub fn from_fn(spec: &LatticeSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Array2::zeros((spec.n_slices(), spec.n_x));
        for n in 0..spec.n_slices() {
            let t = spec.time(n);
            for j in 0..spec.n_x {
                values[[n, j]] = f(t, spec.site(j));
            }
        }
        GridFunction { values }
    }

    /// Wraps explicit per-slice values; shape must be `(n_t + 1) × n_x`.
    pub fn from_values(spec: &LatticeSpec, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (spec.n_slices(), spec.n_x) {
            return Err(Error::ShapeMismatch(format!(
                "grid function must be {} × {}, got {} × {}",
                spec.n_slices(),
                spec.n_x,
                values.dim().0,
                values.dim().1
            )));
        }
        Ok(GridFunction { values })
    }

    /// The values on slice `n`.
    pub fn slice(&self, n: usize) -> &[f64] {
        self.values.row(n).to_slice().expect("standard layout")
    }

    /// Number of slices (rows).
    pub fn n_slices(&self) -> usize {
        self.values.nrows()
    }

    /// Full value table, slice-major.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Checks that the shape matches `spec`.
    pub fn check_shape(&self, spec: &LatticeSpec) -> Result<()> {
        if self.values.dim() != (spec.n_slices(), spec.n_x) {
            return Err(Error::ShapeMismatch(format!(
                "grid function shape {:?} does not match lattice ({} slices × {} sites)",
                self.values.dim(),
                spec.n_slices(),
                spec.n_x
            )));
        }
        Ok(())
    }
}
