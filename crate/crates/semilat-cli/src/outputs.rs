//! Artifact writers: long-format CSV tables and JSON documents.
//!
//! Every writer is deterministic byte-for-byte for identical inputs: floats
//! are rendered with the shortest round-tripping scientific notation, row
//! order is fixed, and JSON field order follows struct declaration order.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use semilat_core::lattice::LatticeSpec;
use semilat_hadamard::{short_distance_expansion, HadamardCoeffs, Rat};

use crate::report::RunReport;
use crate::scenario::Executed;
use crate::Result;

/// Shortest round-tripping scientific rendering of a float.
fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

/// Exact rational rendered as `p` or `p/q`.
fn fmt_rat(r: &Rat) -> String {
    format!("{r}")
}

/// Classical-field table: one row per (order, time, site), header
/// `t,x,k,value`.
///
/// The value column is the λ-scaled contribution of order `k` (the raw order
/// coefficient times `λᵏ`), so summing the column over `k` at fixed `(t, x)`
/// assembles the physical field. With the coupling off, every `k ≥ 1` row is
/// exactly zero.
pub fn psi_csv(run: &Executed, spec: &LatticeSpec, lambda: f64) -> String {
    let dx = spec.dx();
    let mut out = String::from("t,x,k,value\n");
    for k in 0..run.n_orders() {
        let weight = lambda.powi(k as i32);
        for n in 0..run.n_slices() {
            let t = spec.time(n);
            let row = run.psi_row(k, n);
            for (i, v) in row.iter().enumerate() {
                out.push_str(&fmt_f(t));
                out.push(',');
                out.push_str(&fmt_f(i as f64 * dx));
                out.push(',');
                out.push_str(&k.to_string());
                out.push(',');
                out.push_str(&fmt_f(weight * *v));
                out.push('\n');
            }
        }
    }
    out
}

/// Renormalized-observable table, same schema and λ-scaling as [`psi_csv`].
pub fn phi2_csv(run: &Executed, spec: &LatticeSpec, lambda: f64) -> String {
    let dx = spec.dx();
    let mut out = String::from("t,x,k,value\n");
    for k in 0..run.n_orders() {
        let weight = lambda.powi(k as i32);
        for n in 0..run.n_slices() {
            let t = spec.time(n);
            let row = run.phi2_row(k, n);
            for (i, v) in row.iter().enumerate() {
                out.push_str(&fmt_f(t));
                out.push(',');
                out.push_str(&fmt_f(i as f64 * dx));
                out.push(',');
                out.push_str(&k.to_string());
                out.push(',');
                out.push_str(&fmt_f(weight * *v));
                out.push('\n');
            }
        }
    }
    out
}

/// Equal-time two-point table over the sampled slices: one row per
/// (order, slice, site pair), header `t,x,y,k,re,im`, λ-scaled like
/// [`psi_csv`].
///
/// The equal-time φφ block is real by construction, so the imaginary column
/// is exactly zero; it is kept so the schema matches unequal-time exports.
pub fn g_equal_time_csv(run: &Executed, spec: &LatticeSpec, lambda: f64) -> String {
    let dx = spec.dx();
    let mut out = String::from("t,x,y,k,re,im\n");
    let snaps = run.snapshots();
    for k in 0..run.n_orders() {
        let weight = lambda.powi(k as i32);
        for (slice, snap) in &snaps {
            let t = spec.time(*slice);
            let g = snap.g_data(k);
            let n_x = g.n_x();
            for i in 0..n_x {
                for j in 0..n_x {
                    out.push_str(&fmt_f(t));
                    out.push(',');
                    out.push_str(&fmt_f(i as f64 * dx));
                    out.push(',');
                    out.push_str(&fmt_f(j as f64 * dx));
                    out.push(',');
                    out.push_str(&k.to_string());
                    out.push(',');
                    out.push_str(&fmt_f(weight * g.g_phiphi[(i, j)]));
                    out.push(',');
                    out.push_str(&fmt_f(0.0));
                    out.push('\n');
                }
            }
        }
    }
    out
}

/// Pretty-printed report JSON with a trailing newline.
pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `content` to `directory/name`, creating the directory if needed.
pub fn write_artifact(directory: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(directory)?;
    let path = directory.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

/// JSON document for the exact coefficient table.
#[derive(Debug, Serialize)]
pub struct HadamardTableDoc {
    /// Schema version of this document.
    pub schema_version: u32,
    /// Mass the table was built at.
    pub mass: f64,
    /// Reference length of the logarithm.
    pub scale: f64,
    /// Largest σ-order tabulated.
    pub sigma_orders: usize,
    /// Largest λ-order tabulated.
    pub lambda_orders: usize,
    /// Largest Taylor rank tabulated.
    pub rank_max: usize,
    /// Numeric value of the logarithmic symbol `ln(m²ℓ²/2)`.
    pub log_symbol: f64,
    /// Background polynomial layers; layer `j` multiplies `λ^(j+1)`.
    pub background: Vec<BackgroundLayer>,
    /// Expansion coefficients of the constant-mass kernel at the reference
    /// length, for cross-checking the table numerically.
    pub golden_expansion: GoldenExpansion,
    /// The nonzero table entries.
    pub rows: Vec<TableRowDoc>,
}

/// One λ-layer of the background polynomial.
#[derive(Debug, Serialize)]
pub struct BackgroundLayer {
    /// Input layer index `j` (the layer multiplies `λ^(j+1)`).
    pub layer: usize,
    /// Monomial terms with exact rational coefficients.
    pub terms: Vec<BackgroundTerm>,
}

/// One monomial of a background layer.
#[derive(Debug, Serialize)]
pub struct BackgroundTerm {
    /// Exponents of the four coordinates (time first).
    pub exponents: [u8; 4],
    /// Exact coefficient, `p` or `p/q`.
    pub coeff: String,
}

/// Reference-kernel expansion values.
#[derive(Debug, Serialize)]
pub struct GoldenExpansion {
    /// Coefficient of `1/σ`.
    pub inv_sigma: f64,
    /// Log coefficient at σ-order 0.
    pub log_sigma_0: f64,
    /// Constant at σ-order 0.
    pub const_0: f64,
    /// Log coefficient at σ-order 1.
    pub log_sigma_1: f64,
    /// Constant at σ-order 1.
    pub const_1: f64,
}

/// One nonzero coefficient of the table, exact and numeric.
#[derive(Debug, Serialize)]
pub struct TableRowDoc {
    /// `"v"` (logarithmic layer) or `"w"` (regular layer).
    pub family: String,
    /// σ-order of the entry.
    pub sigma_order: usize,
    /// λ-order of the entry.
    pub lambda_order: usize,
    /// Monomial exponents of the Taylor direction (time first).
    pub exponents: [u8; 4],
    /// Exact rational part.
    pub rational: String,
    /// Exact coefficient of the Euler constant.
    pub gamma: String,
    /// Exact coefficient of the logarithmic symbol.
    pub log: String,
    /// Numeric value at this table's `log_symbol`.
    pub value: f64,
}

/// Flattens an exact coefficient table into its JSON document.
pub fn hadamard_table_doc(coeffs: &HadamardCoeffs) -> Result<HadamardTableDoc> {
    let golden = short_distance_expansion(
        coeffs.mass(),
        coeffs.scale(),
        coeffs.sigma_orders().min(1),
    )?;
    let log_symbol = coeffs.log_symbol();
    let background = coeffs
        .background()
        .iter()
        .enumerate()
        .map(|(layer, poly)| BackgroundLayer {
            layer,
            terms: poly
                .iter()
                .map(|(mono, coeff)| BackgroundTerm {
                    exponents: mono.0,
                    coeff: fmt_rat(coeff),
                })
                .collect(),
        })
        .collect();
    let rows = coeffs
        .rows()
        .into_iter()
        .map(|r| TableRowDoc {
            family: r.family.to_string(),
            sigma_order: r.sigma_order,
            lambda_order: r.lambda_order,
            exponents: r.exponents,
            rational: fmt_rat(r.entry.rational_part()),
            gamma: fmt_rat(r.entry.gamma_part()),
            log: fmt_rat(r.entry.log_part()),
            value: r.entry.eval(log_symbol),
        })
        .collect();
    Ok(HadamardTableDoc {
        schema_version: 1,
        mass: coeffs.mass(),
        scale: coeffs.scale(),
        sigma_orders: coeffs.sigma_orders(),
        lambda_orders: coeffs.lambda_orders(),
        rank_max: coeffs.rank_max(),
        log_symbol,
        background,
        golden_expansion: GoldenExpansion {
            inv_sigma: golden.inv_sigma,
            log_sigma_0: golden.log_sigma_0,
            const_0: golden.const_0,
            log_sigma_1: golden.log_sigma_1,
            const_1: golden.const_1,
        },
        rows,
    })
}

/// Pretty-printed table JSON with a trailing newline.
pub fn hadamard_table_json(doc: &HadamardTableDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("table serializes");
    s.push('\n');
    s
}
