//! λ-graded polynomials in the four flat coordinates.
//!
//! The transport recursions act on bi-scalar Taylor expansions around the base
//! point. In flat coordinates with separation vector `ξ = y − x`, a symmetric
//! rank-p Taylor tensor is the same thing as a homogeneous degree-p polynomial
//! in `ξ⁰..ξ³`, so the carriers here are ordinary polynomials whose
//! coefficients are λ-series of exact scalars ([`Series`]). Three operations
//! drive everything:
//!
//! * multiplication (truncated at a degree cap, since the recursions only ever
//!   need ranks up to a per-order budget);
//! * the wave operator `□ = η^{ab}∂ₐ∂_b` with signature `(−,+,+,+)`, which
//!   lowers degree by two;
//! * the degree-counting operator `ξ·∂`, which multiplies each homogeneous
//!   piece by its degree — the recursions invert `(shift + ξ·∂)` by dividing
//!   each degree-p piece by `shift + p` ([`Poly::scale_per_degree`]).

use crate::scalar::{HadScalar, Rat};
use num::Zero;
use std::collections::BTreeMap;

/// Monomial in the four coordinates, stored as an exponent vector.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Mono(pub [u8; 4]);

impl Mono {
    /// The constant monomial `1`.
    pub fn unit() -> Self {
        Mono([0; 4])
    }

    /// Total degree (tensor rank of the corresponding Taylor coefficient).
    pub fn degree(self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Product of two monomials (exponents add).
    pub fn times(self, other: Mono) -> Mono {
        let mut e = [0u8; 4];
        for a in 0..4 {
            e[a] = self.0[a]
                .checked_add(other.0[a])
                .expect("monomial exponent overflow");
        }
        Mono(e)
    }
}

/// Metric signs `η^{aa}` of the flat metric, signature `(−,+,+,+)`.
const METRIC_SIGN: [i64; 4] = [-1, 1, 1, 1];

/// λ-series of exact scalars with a fixed truncation length.
///
/// Index `k` holds the coefficient of `λᵏ`; all series in one computation
/// share the same length `K+1` and products truncate at that length.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Series {
    c: Vec<HadScalar>,
}

impl Series {
    /// The zero series of length `len`.
    pub fn zero(len: usize) -> Self {
        Series {
            c: vec![HadScalar::zero(); len],
        }
    }

    /// Number of stored λ-orders (`K+1`).
    pub fn len(&self) -> usize {
        self.c.len()
    }

    /// True when no λ-orders are stored.
    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// The coefficient of `λᵏ`.
    pub fn get(&self, k: usize) -> &HadScalar {
        &self.c[k]
    }

    /// Adds `s` to the coefficient of `λᵏ`.
    pub fn add_at(&mut self, k: usize, s: &HadScalar) {
        self.c[k] = self.c[k].add(s);
    }

    /// True when every coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(HadScalar::is_zero)
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Series) -> Series {
        assert_eq!(self.len(), other.len(), "mismatched λ truncation");
        Series {
            c: self
                .c
                .iter()
                .zip(&other.c)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Series) -> Series {
        assert_eq!(self.len(), other.len(), "mismatched λ truncation");
        Series {
            c: self
                .c
                .iter()
                .zip(&other.c)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// Entrywise rational multiple.
    pub fn scale(&self, r: &Rat) -> Series {
        Series {
            c: self.c.iter().map(|a| a.scale(r)).collect(),
        }
    }

    /// Cauchy product truncated to the common length.
    pub fn mul(&self, other: &Series) -> Series {
        assert_eq!(self.len(), other.len(), "mismatched λ truncation");
        let mut out = Series::zero(self.len());
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.c.iter().enumerate() {
                if i + j >= out.len() {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                let p = a.mul(b);
                out.c[i + j] = out.c[i + j].add(&p);
            }
        }
        out
    }
}

/// Polynomial in `ξ⁰..ξ³` with λ-series coefficients.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly {
    k_len: usize,
    terms: BTreeMap<Mono, Series>,
}

impl Poly {
    /// The zero polynomial carrying `k_len` λ-orders.
    pub fn zero(k_len: usize) -> Self {
        Poly {
            k_len,
            terms: BTreeMap::new(),
        }
    }

    /// Number of stored λ-orders (`K+1`).
    pub fn k_len(&self) -> usize {
        self.k_len
    }

    /// Adds `s·λᵏ·ξ^mono` to the polynomial.
    pub fn add_term(&mut self, mono: Mono, k: usize, s: &HadScalar) {
        assert!(k < self.k_len, "λ-order beyond truncation");
        if s.is_zero() {
            return;
        }
        let len = self.k_len;
        self.terms
            .entry(mono)
            .or_insert_with(|| Series::zero(len))
            .add_at(k, s);
    }

    /// The exact coefficient of `λᵏ·ξ^mono` (zero when absent).
    pub fn coeff(&self, mono: Mono, k: usize) -> HadScalar {
        match self.terms.get(&mono) {
            Some(s) if k < s.len() => s.get(k).clone(),
            _ => HadScalar::zero(),
        }
    }

    /// The λ-series attached to one monomial, if present.
    pub fn series(&self, mono: Mono) -> Option<&Series> {
        self.terms.get(&mono)
    }

    /// Iterates terms in lexicographic monomial order.
    pub fn iter(&self) -> impl Iterator<Item = (&Mono, &Series)> {
        self.terms.iter()
    }

    /// Largest total degree with a nonzero coefficient (0 for the zero polynomial).
    pub fn max_degree(&self) -> usize {
        self.terms
            .iter()
            .filter(|(_, s)| !s.is_zero())
            .map(|(m, _)| m.degree())
            .max()
            .unwrap_or(0)
    }

    /// True when every stored coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.terms.values().all(Series::is_zero)
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.k_len, other.k_len, "mismatched λ truncation");
        let mut out = self.clone();
        for (m, s) in &other.terms {
            match out.terms.get_mut(m) {
                Some(t) => *t = t.add(s),
                None => {
                    out.terms.insert(*m, s.clone());
                }
            }
        }
        out.prune();
        out
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(&Rat::from_integer((-1).into())))
    }

    /// Entrywise rational multiple.
    pub fn scale(&self, r: &Rat) -> Poly {
        if r.is_zero() {
            return Poly::zero(self.k_len);
        }
        Poly {
            k_len: self.k_len,
            terms: self
                .terms
                .iter()
                .map(|(m, s)| (*m, s.scale(r)))
                .collect(),
        }
    }

    /// Product, discarding all monomials of degree above `cap`.
    pub fn mul_capped(&self, other: &Poly, cap: usize) -> Poly {
        assert_eq!(self.k_len, other.k_len, "mismatched λ truncation");
        let mut out = Poly::zero(self.k_len);
        for (ma, sa) in &self.terms {
            if sa.is_zero() {
                continue;
            }
            for (mb, sb) in &other.terms {
                if ma.degree() + mb.degree() > cap || sb.is_zero() {
                    continue;
                }
                let m = ma.times(*mb);
                let prod = sa.mul(sb);
                match out.terms.get_mut(&m) {
                    Some(t) => *t = t.add(&prod),
                    None => {
                        out.terms.insert(m, prod);
                    }
                }
            }
        }
        out.prune();
        out
    }

    /// The wave operator `□ = −∂₀² + ∂₁² + ∂₂² + ∂₃²` (degree drops by two).
    pub fn box_op(&self) -> Poly {
        let mut out = Poly::zero(self.k_len);
        for (m, s) in &self.terms {
            if s.is_zero() {
                continue;
            }
            for a in 0..4 {
                let e = m.0[a] as i64;
                if e < 2 {
                    continue;
                }
                let mut lower = *m;
                lower.0[a] -= 2;
                let factor = Rat::from_integer((METRIC_SIGN[a] * e * (e - 1)).into());
                let contrib = s.scale(&factor);
                match out.terms.get_mut(&lower) {
                    Some(t) => *t = t.add(&contrib),
                    None => {
                        out.terms.insert(lower, contrib);
                    }
                }
            }
        }
        out.prune();
        out
    }

    /// Multiplies each homogeneous degree-p piece by `f(p)`.
    ///
    /// Inverting the transport operator `(shift + ξ·∂)` on a polynomial is
    /// exactly this with `f(p) = 1/(shift + p)`.
    pub fn scale_per_degree(&self, f: impl Fn(usize) -> Rat) -> Poly {
        Poly {
            k_len: self.k_len,
            terms: self
                .terms
                .iter()
                .map(|(m, s)| (*m, s.scale(&f(m.degree()))))
                .collect(),
        }
    }

    /// Discards all monomials of degree above `cap`.
    pub fn truncated(&self, cap: usize) -> Poly {
        Poly {
            k_len: self.k_len,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= cap)
                .map(|(m, s)| (*m, s.clone()))
                .collect(),
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, s| !s.is_zero());
    }
}
