//! Transport recursions for the coincidence-limit Taylor tables.
//!
//! With the flat-metric conventions of [`crate::poly`] (base point at the
//! origin, separation vector `ξ`, signature `(−,+,+,+)`) and squared mass
//! `M²(ξ) = m² + Σⱼ 2λ^{j+1} ψⱼ(ξ)`, the logarithmic and regular layers of the
//! short-distance expansion are determined order by order in σ by
//!
//! ```text
//! (1 + ξ·∂) v₀ = M²/2,
//! (n+2 + ξ·∂) vₙ₊₁ = −(□ − M²) vₙ / (2(n+1)),
//! (n+1)(n+2 + ξ·∂) wₙ₊₁ = −(2n+3 + ξ·∂) vₙ₊₁ − (□ − M²) wₙ / 2,
//! ```
//!
//! all of which invert degree by degree: a homogeneous degree-p piece just
//! picks up the divisor `shift + p`. The regular layer needs one seed choice;
//! here
//!
//! ```text
//! w₀ = v₀ · [ ln(M²ℓ²/2) + 2γ − 1 ]
//! ```
//!
//! (the λ-expanded logarithm of the local squared mass), which reproduces the
//! constant-mass kernel exactly through σ¹ and gives every `wₙ` the same
//! ℓ-dependence: the coefficient of the log symbol inside `wₙ` equals `vₙ`
//! entry by entry, so a change of reference length shifts `w` by a pinned
//! multiple of `v` and nothing else.
//!
//! Truncation bookkeeping: reported Taylor ranks go up to `P`, and the wave
//! operator lowers degree by two per σ-order, so the order-n working
//! polynomial keeps ranks up to `P + 2(N−n)`. Terms above that budget can
//! never fold back into the reported window — multiplication by `M²` only
//! raises degree — so the budget truncation is exact, not approximate.

use crate::poly::{Mono, Poly};
use crate::scalar::{factorial, rat, rat_from_f64, HadScalar, Rat};
use crate::{Error, Result};
use num::{One, Zero};

/// Largest supported σ-order, λ-order, and Taylor rank.
pub const MAX_TABLE_ORDER: usize = 12;

/// One λ-order of the background: a real multivariate polynomial in the four
/// flat coordinates, stored with exact (f64-sourced) coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiPoly {
    terms: Vec<(Mono, Rat)>,
}

impl PsiPoly {
    /// The zero background.
    pub fn zero() -> Self {
        PsiPoly { terms: Vec::new() }
    }

    /// A constant background with value `c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::from_terms(&[([0, 0, 0, 0], c)])
    }

    /// Builds a background from `(exponents, coefficient)` pairs; exponents
    /// index the four flat coordinates (time first).
    pub fn from_terms(terms: &[([usize; 4], f64)]) -> Result<Self> {
        let mut acc: Vec<(Mono, Rat)> = Vec::new();
        for &(expo, c) in terms {
            if !c.is_finite() {
                return Err(Error::InvalidParameter(
                    "background coefficients must be finite".into(),
                ));
            }
            let mut e = [0u8; 4];
            for a in 0..4 {
                if expo[a] > u8::MAX as usize {
                    return Err(Error::InvalidParameter(
                        "background exponent out of range".into(),
                    ));
                }
                e[a] = expo[a] as u8;
            }
            let mono = Mono(e);
            let r = rat_from_f64(c).expect("finite coefficient");
            match acc.iter_mut().find(|(m, _)| *m == mono) {
                Some((_, existing)) => *existing += r,
                None => acc.push((mono, r)),
            }
        }
        acc.retain(|(_, r)| !r.is_zero());
        acc.sort_by_key(|(m, _)| *m);
        Ok(PsiPoly { terms: acc })
    }

    /// Total degree of the polynomial (0 when identically zero).
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(m, _)| m.degree()).max().unwrap_or(0)
    }

    /// The exact coefficient of one monomial (zero when absent).
    pub fn coeff(&self, mono: Mono) -> Rat {
        self.terms
            .iter()
            .find(|(m, _)| *m == mono)
            .map(|(_, r)| r.clone())
            .unwrap_or_else(Rat::zero)
    }

    /// Iterates the stored terms in monomial order.
    pub fn iter(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter().map(|(m, r)| (m, r))
    }
}

/// One entry of the flattened coefficient table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableRow {
    /// Which layer the entry belongs to: `"v"` (logarithmic) or `"w"` (regular).
    pub family: &'static str,
    /// σ-order `n` of the entry.
    pub sigma_order: usize,
    /// λ-order `k` of the entry.
    pub lambda_order: usize,
    /// Monomial exponents of the Taylor direction (time coordinate first).
    pub exponents: [u8; 4],
    /// The exact coefficient of `λᵏ ξ^exponents` in `vₙ` or `wₙ`.
    pub entry: HadScalar,
}

/// Coincidence-limit Taylor tables of the expansion layers `vₙ`, `wₙ`.
///
/// Entries are exact elements of `ℚ + ℚγ + ℚL` with `L = ln(m²ℓ²/2)`; the
/// stored reference length only enters when an entry is evaluated numerically
/// via [`HadScalar::eval`] at [`HadamardCoeffs::log_symbol`].
#[derive(Clone, Debug, PartialEq)]
pub struct HadamardCoeffs {
    mass: f64,
    scale: f64,
    sigma_orders: usize,
    lambda_orders: usize,
    rank_max: usize,
    background: Vec<PsiPoly>,
    v: Vec<Poly>,
    w: Vec<Poly>,
}

impl HadamardCoeffs {
    /// The constant mass `m`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// The reference length `ℓ`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Largest tabulated σ-order `N` (orders `0..=N` are present).
    pub fn sigma_orders(&self) -> usize {
        self.sigma_orders
    }

    /// Largest tabulated λ-order `K`.
    pub fn lambda_orders(&self) -> usize {
        self.lambda_orders
    }

    /// Largest tabulated Taylor rank `P`.
    pub fn rank_max(&self) -> usize {
        self.rank_max
    }

    /// The background tower the table was built from.
    pub fn background(&self) -> &[PsiPoly] {
        &self.background
    }

    /// Numeric value of the logarithmic symbol, `ln(m²ℓ²/2)`.
    pub fn log_symbol(&self) -> f64 {
        (self.mass * self.mass * self.scale * self.scale / 2.0).ln()
    }

    fn poly<'a>(&self, family: &'a [Poly], n: usize) -> Option<&'a Poly> {
        family.get(n)
    }

    fn monomial(
        &self,
        family: &[Poly],
        n: usize,
        k: usize,
        exponents: [u8; 4],
    ) -> Option<HadScalar> {
        if k > self.lambda_orders || Mono(exponents).degree() > self.rank_max {
            return None;
        }
        self.poly(family, n).map(|p| p.coeff(Mono(exponents), k))
    }

    /// Monomial coefficient of `λᵏ ξ^exponents` in `vₙ`; `None` outside the table.
    pub fn v_monomial(&self, n: usize, k: usize, exponents: [u8; 4]) -> Option<HadScalar> {
        self.monomial(&self.v, n, k, exponents)
    }

    /// Monomial coefficient of `λᵏ ξ^exponents` in `wₙ`; `None` outside the table.
    pub fn w_monomial(&self, n: usize, k: usize, exponents: [u8; 4]) -> Option<HadScalar> {
        self.monomial(&self.w, n, k, exponents)
    }

    /// Scalar (rank-0) entry of `vₙ` at λ-order `k`.
    pub fn v_coincidence(&self, n: usize, k: usize) -> Option<HadScalar> {
        self.v_monomial(n, k, [0, 0, 0, 0])
    }

    /// Scalar (rank-0) entry of `wₙ` at λ-order `k`.
    pub fn w_coincidence(&self, n: usize, k: usize) -> Option<HadScalar> {
        self.w_monomial(n, k, [0, 0, 0, 0])
    }

    fn tensor(
        &self,
        family: &[Poly],
        n: usize,
        k: usize,
        indices: &[usize],
    ) -> Option<HadScalar> {
        if indices.len() > self.rank_max || indices.iter().any(|&a| a > 3) {
            return None;
        }
        let mut e = [0u8; 4];
        for &a in indices {
            e[a] += 1;
        }
        let coeff = self.monomial(family, n, k, e)?;
        let mut mult = Rat::one();
        for a in 0..4 {
            mult *= factorial(e[a] as usize);
        }
        Some(coeff.scale(&mult))
    }

    /// Totally symmetric Taylor-tensor component of `vₙ` for the given index
    /// list (e.g. `&[]` scalar, `&[a]` vector, `&[a, b]` 2-tensor).
    pub fn v_tensor(&self, n: usize, k: usize, indices: &[usize]) -> Option<HadScalar> {
        self.tensor(&self.v, n, k, indices)
    }

    /// Totally symmetric Taylor-tensor component of `wₙ`.
    pub fn w_tensor(&self, n: usize, k: usize, indices: &[usize]) -> Option<HadScalar> {
        self.tensor(&self.w, n, k, indices)
    }

    /// Flattens the table into deterministic row order: family (`v` then `w`),
    /// σ-order, monomial, λ-order. Zero entries are omitted.
    pub fn rows(&self) -> Vec<TableRow> {
        let mut out = Vec::new();
        let mut push_family = |family: &'static str, polys: &[Poly]| {
            for (n, poly) in polys.iter().enumerate() {
                for (mono, series) in poly.iter() {
                    for k in 0..series.len() {
                        let entry = series.get(k);
                        if entry.is_zero() {
                            continue;
                        }
                        out.push(TableRow {
                            family,
                            sigma_order: n,
                            lambda_order: k,
                            exponents: mono.0,
                            entry: entry.clone(),
                        });
                    }
                }
            }
        };
        push_family("v", &self.v);
        push_family("w", &self.w);
        out
    }
}

/// Builds the exact coincidence-limit tables for σ-orders `0..=sigma_orders`,
/// λ-orders `0..=lambda_orders`, and Taylor ranks `0..=rank_max`.
///
/// `psi[j]` is the λ-order-`j` layer of the background (entering the squared
/// mass as `2λ^{j+1}ψⱼ`); layers beyond `lambda_orders − 1` cannot influence
/// any tabulated entry and are ignored. Every layer must have polynomial
/// degree at most `rank_max`, otherwise the Taylor closure of the table is
/// violated and an error is returned.
pub fn recursion_coeffs(
    mass: f64,
    psi: &[PsiPoly],
    sigma_orders: usize,
    lambda_orders: usize,
    rank_max: usize,
    scale: f64,
) -> Result<HadamardCoeffs> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidParameter("mass must be positive".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(
            "reference length must be positive".into(),
        ));
    }
    if sigma_orders > MAX_TABLE_ORDER || lambda_orders > MAX_TABLE_ORDER
        || rank_max > MAX_TABLE_ORDER
    {
        return Err(Error::InvalidParameter(format!(
            "table orders are limited to {MAX_TABLE_ORDER}"
        )));
    }
    for (j, layer) in psi.iter().enumerate() {
        if layer.degree() > rank_max {
            return Err(Error::Validation(format!(
                "rank closure violated: background layer {j} has degree {} but the table \
                 stores Taylor ranks only up to {rank_max}, so required ψ derivatives exceed \
                 the stored data",
                layer.degree()
            )));
        }
    }

    let k_len = lambda_orders + 1;
    let budget0 = rank_max + 2 * sigma_orders;
    let m_exact = rat_from_f64(mass).expect("finite mass");
    let m2_exact = &m_exact * &m_exact;

    // M²(ξ, λ) = m² + Σⱼ 2 λ^{j+1} ψⱼ(ξ).
    let mut m2 = Poly::zero(k_len);
    m2.add_term(Mono::unit(), 0, &HadScalar::from_rat(m2_exact.clone()));
    for (j, layer) in psi.iter().enumerate() {
        let k = j + 1;
        if k > lambda_orders {
            break;
        }
        for (mono, c) in layer.iter() {
            m2.add_term(*mono, k, &HadScalar::from_rat(c * rat(2, 1)));
        }
    }

    // Logarithmic layer: (1 + ξ·∂) v₀ = M²/2, then transport down in σ.
    let v0 = m2
        .scale(&rat(1, 2))
        .truncated(budget0)
        .scale_per_degree(|p| rat(1, 1 + p as i64));

    // Regular layer seed: w₀ = v₀·[ln(M²ℓ²/2) + 2γ − 1], with the logarithm
    // expanded as L + ln(1 + (M² − m²)/m²) in powers of λ.
    let log_series = {
        let mut u = m2.clone();
        u.add_term(Mono::unit(), 0, &HadScalar::from_rat(-m2_exact.clone()));
        let u = u.scale(&m2_exact.recip());
        let mut acc = Poly::zero(k_len);
        acc.add_term(
            Mono::unit(),
            0,
            &HadScalar::new(rat(-1, 1), rat(2, 1), rat(1, 1)),
        );
        let mut u_pow = u.clone();
        for j in 1..=lambda_orders {
            let coeff = if j % 2 == 1 {
                rat(1, j as i64)
            } else {
                rat(-1, j as i64)
            };
            acc = acc.add(&u_pow.scale(&coeff));
            if j < lambda_orders {
                u_pow = u_pow.mul_capped(&u, budget0);
            }
        }
        acc
    };
    let w0 = v0.mul_capped(&log_series, budget0);

    let mut v = vec![v0];
    let mut w = vec![w0];
    for n in 0..sigma_orders {
        let budget = rank_max + 2 * (sigma_orders - n - 1);
        let ni = n as i64;
        let wave_v = v[n].box_op().sub(&m2.mul_capped(&v[n], budget));
        let vn1 = wave_v
            .scale(&rat(-1, 2 * (ni + 1)))
            .scale_per_degree(|p| rat(1, ni + 2 + p as i64))
            .truncated(budget);
        let wave_w = w[n].box_op().sub(&m2.mul_capped(&w[n], budget));
        let wn1 = vn1
            .scale_per_degree(|p| rat(-(2 * ni + 3 + p as i64), 1))
            .add(&wave_w.scale(&rat(-1, 2)))
            .scale(&rat(1, ni + 1))
            .scale_per_degree(|p| rat(1, ni + 2 + p as i64))
            .truncated(budget);
        v.push(vn1);
        w.push(wn1);
    }

    Ok(HadamardCoeffs {
        mass,
        scale,
        sigma_orders,
        lambda_orders,
        rank_max,
        background: psi.to_vec(),
        v: v.iter().map(|p| p.truncated(rank_max)).collect(),
        w: w.iter().map(|p| p.truncated(rank_max)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::golden_coincidence;

    fn zero() -> HadScalar {
        HadScalar::zero()
    }

    #[test]
    fn vanishing_background_reproduces_the_golden_expansion_exactly() {
        let mass = 1.3_f64;
        let table = recursion_coeffs(mass, &[], 1, 2, 2, 0.9).unwrap();
        let m_exact = rat_from_f64(mass).unwrap();
        let golden = golden_coincidence(&(&m_exact * &m_exact));

        assert_eq!(table.v_coincidence(0, 0).unwrap(), golden.v0);
        assert_eq!(table.v_coincidence(1, 0).unwrap(), golden.v1);
        assert_eq!(table.w_coincidence(0, 0).unwrap(), golden.w0);
        assert_eq!(table.w_coincidence(1, 0).unwrap(), golden.w1);

        // No background: every λ ≥ 1 and every rank ≥ 1 entry vanishes.
        for n in 0..=1 {
            for k in 1..=2 {
                assert_eq!(table.v_coincidence(n, k).unwrap(), zero());
                assert_eq!(table.w_coincidence(n, k).unwrap(), zero());
            }
            for a in 0..4 {
                assert_eq!(table.v_tensor(n, 0, &[a]).unwrap(), zero());
                assert_eq!(table.w_tensor(n, 0, &[a]).unwrap(), zero());
            }
        }
    }

    #[test]
    fn constant_background_enters_as_an_exact_mass_shift() {
        let mass = 0.8_f64;
        let c = 0.37_f64;
        let table =
            recursion_coeffs(mass, &[PsiPoly::constant(c).unwrap()], 1, 1, 1, 1.1).unwrap();
        let c_exact = rat_from_f64(c).unwrap();

        // v₀ = M²/2 ⟹ its λ¹ scalar entry is exactly ψ₀.
        assert_eq!(
            table.v_coincidence(0, 1).unwrap(),
            HadScalar::from_rat(c_exact.clone())
        );
        // w₀ = v₀(L + 2γ − 1 + u − …) ⟹ λ¹ scalar entry is c·(L + 2γ).
        assert_eq!(
            table.w_coincidence(0, 1).unwrap(),
            HadScalar::new(Rat::zero(), &c_exact * rat(2, 1), c_exact.clone())
        );
    }

    #[test]
    fn spatial_and_timelike_gradients_feed_the_wave_operator_with_opposite_signs() {
        let mass = 1.0_f64;
        let g = 0.5_f64;
        let g2 = {
            let r = rat_from_f64(g).unwrap();
            &r * &r
        };

        // ψ₀ = g·ξ¹ (spatial): v₂ scalar at λ² is −g²/48.
        let spatial = recursion_coeffs(
            mass,
            &[PsiPoly::from_terms(&[([0, 1, 0, 0], g)]).unwrap()],
            2,
            2,
            2,
            1.0,
        )
        .unwrap();
        assert_eq!(
            spatial.v_coincidence(2, 2).unwrap(),
            HadScalar::from_rat(&g2 * rat(-1, 48))
        );

        // ψ₀ = g·ξ⁰ (timelike): the wave operator flips the sign: +g²/48.
        let timelike = recursion_coeffs(
            mass,
            &[PsiPoly::from_terms(&[([1, 0, 0, 0], g)]).unwrap()],
            2,
            2,
            2,
            1.0,
        )
        .unwrap();
        assert_eq!(
            timelike.v_coincidence(2, 2).unwrap(),
            HadScalar::from_rat(&g2 * rat(1, 48))
        );

        // Intermediate σ-orders agree with the hand-computed transport:
        // v₁ vector entry along the gradient is m²g/4 at λ¹, and the rank-2
        // tensor component is g²/4 at λ² (same for both signatures).
        for (table, dir) in [(&spatial, 1usize), (&timelike, 0usize)] {
            assert_eq!(
                table.v_tensor(1, 1, &[dir]).unwrap(),
                HadScalar::from_rat(rat_from_f64(g).unwrap() * rat(1, 4))
            );
            assert_eq!(
                table.v_tensor(1, 2, &[dir, dir]).unwrap(),
                HadScalar::from_rat(&g2 * rat(1, 4))
            );
        }
    }

    #[test]
    fn w_layers_carry_v_in_their_log_and_gamma_parts() {
        // The seed puts (L + 2γ)·v₀ into w₀ and the transport preserves the
        // pattern: for every table entry, log-part(w) = rat-part(v) and
        // γ-part(w) = 2·rat-part(v). This is the exact form of the statement
        // that a scale change shifts w by a pinned multiple of v.
        let psi = [
            PsiPoly::from_terms(&[([0, 0, 0, 0], 0.4), ([0, 1, 0, 0], -0.25)]).unwrap(),
            PsiPoly::from_terms(&[([1, 0, 0, 0], 0.35), ([0, 0, 2, 0], 0.15)]).unwrap(),
        ];
        let table = recursion_coeffs(0.9, &psi, 2, 3, 2, 1.4).unwrap();
        let mut checked = 0usize;
        for n in 0..=2 {
            for k in 0..=3 {
                for expo in all_exponents(2) {
                    let v = table.v_monomial(n, k, expo).unwrap();
                    let w = table.w_monomial(n, k, expo).unwrap();
                    assert!(v.is_rational(), "v entry must be pure rational");
                    assert_eq!(w.log_part(), v.rational_part());
                    assert_eq!(&(w.gamma_part() * rat(1, 2)), v.rational_part());
                    if !v.is_zero() {
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 10, "too few nonzero entries exercised: {checked}");
    }

    #[test]
    fn higher_background_layers_cannot_reach_lower_lambda_orders() {
        let base = [
            PsiPoly::constant(0.3).unwrap(),
            PsiPoly::from_terms(&[([0, 1, 0, 0], 0.2)]).unwrap(),
            PsiPoly::constant(-0.1).unwrap(),
        ];
        let mut bumped = base.to_vec();
        bumped[2] = PsiPoly::from_terms(&[([0, 0, 0, 0], 0.6), ([0, 0, 1, 1], 1.0)]).unwrap();

        let a = recursion_coeffs(1.1, &base, 2, 3, 2, 0.7).unwrap();
        let b = recursion_coeffs(1.1, &bumped, 2, 3, 2, 0.7).unwrap();

        // ψ₂ enters at λ³: all entries with k ≤ 2 are bitwise identical…
        for n in 0..=2 {
            for k in 0..=2 {
                for expo in all_exponents(2) {
                    assert_eq!(
                        a.v_monomial(n, k, expo).unwrap(),
                        b.v_monomial(n, k, expo).unwrap()
                    );
                    assert_eq!(
                        a.w_monomial(n, k, expo).unwrap(),
                        b.w_monomial(n, k, expo).unwrap()
                    );
                }
            }
        }
        // …and the λ³ layer does change.
        assert_ne!(
            a.v_coincidence(0, 3).unwrap(),
            b.v_coincidence(0, 3).unwrap()
        );

        // A layer that can only enter beyond the λ-truncation changes nothing.
        let mut extended = base.to_vec();
        extended.push(PsiPoly::constant(9.0).unwrap());
        let c = recursion_coeffs(1.1, &extended, 2, 3, 2, 0.7).unwrap();
        assert_eq!(a.rows(), c.rows());
    }

    #[test]
    fn rank_closure_rejects_backgrounds_beyond_the_stored_rank() {
        let steep = PsiPoly::from_terms(&[([0, 3, 0, 0], 1.0)]).unwrap();
        let err = recursion_coeffs(1.0, &[steep], 1, 1, 2, 1.0).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("rank closure"), "unexpected message: {msg}");
    }

    #[test]
    fn argument_guards_and_table_bounds() {
        assert!(recursion_coeffs(0.0, &[], 1, 1, 1, 1.0).is_err());
        assert!(recursion_coeffs(1.0, &[], 1, 1, 1, -1.0).is_err());
        assert!(recursion_coeffs(1.0, &[], MAX_TABLE_ORDER + 1, 1, 1, 1.0).is_err());

        let table = recursion_coeffs(1.0, &[], 1, 1, 1, 1.0).unwrap();
        assert!(table.v_coincidence(2, 0).is_none()); // σ-order beyond N
        assert!(table.v_coincidence(0, 2).is_none()); // λ-order beyond K
        assert!(table.v_monomial(0, 0, [2, 0, 0, 0]).is_none()); // rank beyond P
        assert!(table.v_tensor(0, 0, &[4]).is_none()); // bad coordinate index
        assert_eq!(table.log_symbol(), (0.5_f64).ln());
    }

    #[test]
    fn tensor_components_are_symmetric_and_carry_multiplicities() {
        let psi = [PsiPoly::from_terms(&[([0, 1, 1, 0], 0.7)]).unwrap()];
        let table = recursion_coeffs(1.0, &psi, 1, 1, 2, 1.0).unwrap();
        // v₀ rank-2 entry: (2λ·0.7·ξ¹ξ²/2)/(1+2) = λ·(7/30)·ξ¹ξ².
        let t12 = table.v_tensor(0, 1, &[1, 2]).unwrap();
        let t21 = table.v_tensor(0, 1, &[2, 1]).unwrap();
        assert_eq!(t12, t21);
        assert_eq!(t12, HadScalar::from_rat(rat_from_f64(0.7).unwrap() / rat(3, 1)));
        // Repeated-index component picks up the exponent factorial: the
        // monomial (ξ¹)² with coefficient c has tensor component 2c.
        let psi_sq = [PsiPoly::from_terms(&[([0, 2, 0, 0], 0.5)]).unwrap()];
        let sq = recursion_coeffs(1.0, &psi_sq, 0, 1, 2, 1.0).unwrap();
        let mono = sq.v_monomial(0, 1, [0, 2, 0, 0]).unwrap();
        let tens = sq.v_tensor(0, 1, &[1, 1]).unwrap();
        assert_eq!(tens, mono.scale(&rat(2, 1)));
    }

    fn all_exponents(max_rank: usize) -> Vec<[u8; 4]> {
        let mut out = Vec::new();
        for e0 in 0..=max_rank as u8 {
            for e1 in 0..=max_rank as u8 {
                for e2 in 0..=max_rank as u8 {
                    for e3 in 0..=max_rank as u8 {
                        let e = [e0, e1, e2, e3];
                        if Mono(e).degree() <= max_rank {
                            out.push(e);
                        }
                    }
                }
            }
        }
        out
    }
}
