//! An algebra of oscillatory polynomials, closed under +, ×, and ∫.
//!
//! Every coefficient of the uniformly accurate schemes in this crate is a
//! single or nested time integral of products of periodic-profile powers.
//! Those integrands all live in the algebra of finite sums
//!
//!   p(t) = Σ c · t^j · e^{i k t / ε},   c ∈ ℂ, j ∈ ℕ, k ∈ ℤ,
//!
//! which is closed under addition, multiplication, and antidifferentiation:
//! a k = 0 term integrates to a higher-degree polynomial term, and a k ≠ 0
//! term integrates by parts j times, staying inside the algebra. Computing
//! scheme coefficients here keeps them exact (up to round-off) uniformly in
//! ε — no floating quadrature appears in any hot path.
//!
//! Canonical form: terms are sorted by (mode k, degree j) with at most one
//! term per (j, k) pair; after arithmetic, coefficients below
//! 1e-15 × (largest coefficient magnitude) are pruned to keep term counts
//! bounded under repeated products.

use num_complex::Complex64;

use crate::error::OscError;

/// Pruning threshold relative to the largest term magnitude.
const PRUNE_REL: f64 = 1e-15;

/// One term c·t^j·e^{ikt/ε} of an oscillatory polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coeff: Complex64,
    pow: u32,
    mode: i32,
}

/// A finite sum Σ c·t^j·e^{ikt/ε} in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct OscPoly {
    epsilon: f64,
    terms: Vec<Term>,
}

impl OscPoly {
    /// The zero polynomial.
    pub fn zero(epsilon: f64) -> Self {
        Self {
            epsilon,
            terms: Vec::new(),
        }
    }

    /// The constant polynomial c.
    pub fn constant(epsilon: f64, c: f64) -> Self {
        Self::from_terms(epsilon, vec![(Complex64::new(c, 0.0), 0, 0)])
    }

    /// Build from raw (coefficient, degree, mode) triples and canonicalize.
    pub fn from_terms(epsilon: f64, raw: Vec<(Complex64, u32, i32)>) -> Self {
        let terms = raw
            .into_iter()
            .map(|(coeff, pow, mode)| Term { coeff, pow, mode })
            .collect();
        let mut p = Self { epsilon, terms };
        p.canonicalize();
        p
    }

    /// The oscillation parameter ε the modes are measured against.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of retained terms (after canonicalization).
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// View of the terms as (coefficient, degree, mode) triples.
    pub fn terms(&self) -> impl Iterator<Item = (Complex64, u32, i32)> + '_ {
        self.terms.iter().map(|t| (t.coeff, t.pow, t.mode))
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by_key(|t| (t.mode, t.pow));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.mode == t.mode && last.pow == t.pow => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        let max_mag = merged
            .iter()
            .map(|t| t.coeff.norm())
            .fold(0.0_f64, f64::max);
        let cut = PRUNE_REL * max_mag;
        merged.retain(|t| t.coeff.norm() > cut);
        self.terms = merged;
    }

    fn check_compatible(&self, other: &Self) -> Result<(), OscError> {
        // Modes are integers against a fixed ε; mixing distinct ε values
        // would silently change frequencies.
        if self.terms.is_empty() || other.terms.is_empty() {
            return Ok(());
        }
        let rel = (self.epsilon - other.epsilon).abs() / self.epsilon.max(other.epsilon);
        if rel > 1e-14 {
            return Err(OscError::EpsilonMismatch {
                left: self.epsilon,
                right: other.epsilon,
            });
        }
        Ok(())
    }

    /// Sum of two polynomials over the same ε.
    pub fn add(&self, other: &Self) -> Result<Self, OscError> {
        self.check_compatible(other)?;
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        let mut p = Self {
            epsilon: if self.terms.is_empty() {
                other.epsilon
            } else {
                self.epsilon
            },
            terms,
        };
        p.canonicalize();
        Ok(p)
    }

    /// Product of two polynomials: degrees add, modes add.
    pub fn mul(&self, other: &Self) -> Result<Self, OscError> {
        self.check_compatible(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    pow: a.pow + b.pow,
                    mode: a.mode + b.mode,
                });
            }
        }
        let mut p = Self {
            epsilon: if self.terms.is_empty() {
                other.epsilon
            } else {
                self.epsilon
            },
            terms,
        };
        p.canonicalize();
        Ok(p)
    }

    /// The polynomial scaled by a complex factor.
    pub fn scale(&self, a: Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff * a,
                ..*t
            })
            .collect();
        let mut p = Self {
            epsilon: self.epsilon,
            terms,
        };
        p.canonicalize();
        p
    }

    /// An antiderivative P (P′ = p, constant of integration not normalized).
    ///
    /// k = 0 terms raise the degree: c·t^j ↦ c·t^{j+1}/(j+1).
    /// k ≠ 0 terms integrate by parts j times with φ = ik/ε:
    /// ∫ t^j e^{φt} dt = (t^j/φ) e^{φt} − (j/φ) ∫ t^{j-1} e^{φt} dt.
    pub fn antiderivative(&self) -> Self {
        let mut out: Vec<Term> = Vec::new();
        for t in &self.terms {
            if t.mode == 0 {
                out.push(Term {
                    coeff: t.coeff / (t.pow + 1) as f64,
                    pow: t.pow + 1,
                    mode: 0,
                });
            } else {
                let phi = Complex64::new(0.0, t.mode as f64 / self.epsilon);
                // Repeated by-parts: Σ_{m=0..j} (−1)^m (j!/(j−m)!) / φ^{m+1} · t^{j−m} e^{φt}
                let mut factor = t.coeff / phi;
                let mut deg = t.pow;
                loop {
                    out.push(Term {
                        coeff: factor,
                        pow: deg,
                        mode: t.mode,
                    });
                    if deg == 0 {
                        break;
                    }
                    factor = -factor * deg as f64 / phi;
                    deg -= 1;
                }
            }
        }
        let mut p = Self {
            epsilon: self.epsilon,
            terms: out,
        };
        p.canonicalize();
        p
    }

    /// The antiderivative F with F(0) = 0, i.e. F(t) = ∫₀^t p(s) ds.
    ///
    /// This is the building block nested integrals are made of: the result
    /// is again in the algebra (the −P(0) adjustment is a constant term).
    pub fn integral_from_zero(&self) -> Self {
        let anti = self.antiderivative();
        let at_zero = anti.eval(0.0);
        let correction = Self::from_terms(self.epsilon, vec![(-at_zero, 0, 0)]);
        anti.add(&correction)
            .expect("same-ε addition cannot fail")
    }

    /// Pointwise evaluation p(t) ∈ ℂ.
    pub fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::default();
        for term in &self.terms {
            let osc = if term.mode == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, term.mode as f64 * t / self.epsilon)
            };
            acc += term.coeff * t.powi(term.pow as i32) * osc;
        }
        acc
    }

    /// Pointwise evaluation of a real-valued pipeline, checking that the
    /// imaginary part is round-off (≤ 1e-12 relative).
    pub fn eval_real(&self, t: f64) -> f64 {
        let v = self.eval(t);
        debug_assert!(
            v.im.abs() <= 1e-12 * (1.0 + v.re.abs()),
            "real-input pipeline produced imaginary part {} (real {})",
            v.im,
            v.re
        );
        v.re
    }

    /// ∫_a^b p(t) dt = P(b) − P(a).
    pub fn definite_integral(&self, a: f64, b: f64) -> Complex64 {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    /// Re-express the polynomial in local time τ = t − t0 (exact):
    /// c·t^j·e^{ikt/ε} = Σ_m c·binom(j,m)·t0^{j−m}·e^{ikt0/ε} · τ^m·e^{ikτ/ε}.
    ///
    /// Keeping per-step computations in local time avoids the catastrophic
    /// cancellation of evaluating large-t antiderivative differences.
    pub fn shift_origin(&self, t0: f64) -> Self {
        let mut out: Vec<Term> = Vec::new();
        for t in &self.terms {
            let phase = if t.mode == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, t.mode as f64 * t0 / self.epsilon)
            };
            let mut binom = 1.0_f64;
            for m in 0..=t.pow {
                // binom = C(j, m), updated incrementally.
                let c = t.coeff * phase * binom * t0.powi((t.pow - m) as i32);
                out.push(Term {
                    coeff: c,
                    pow: m,
                    mode: t.mode,
                });
                if m < t.pow {
                    binom = binom * (t.pow - m) as f64 / (m + 1) as f64;
                }
            }
        }
        let mut p = Self {
            epsilon: self.epsilon,
            terms: out,
        };
        p.canonicalize();
        p
    }
}

/// Nested simplex integral of a sequence of algebra elements:
///
///   ∫_{t_n}^{t_n+Δt} p₁(s₁) ∫_{t_n}^{s₁} p₂(s₂) … ∫_{t_n}^{s_{k-1}} p_k(s_k) ds_k … ds₁,
///
/// computed by repeated antidifferentiation from the innermost factor
/// outward. Each stage stays in the algebra, so the result is exact in the
/// truncated Fourier representation. For k = 1 this is the plain definite
/// integral.
pub fn nested_integral(seq: &[OscPoly], t_n: f64, dt: f64) -> Result<Complex64, OscError> {
    let Some((last, rest)) = seq.split_last() else {
        return Err(OscError::EmptySequence);
    };
    if !(dt.is_finite() && dt > 0.0) {
        return Err(OscError::InvalidStep(dt));
    }
    // Work in local time τ = s − t_n so every stage integrates from 0.
    let mut acc = last.shift_origin(t_n).integral_from_zero();
    for p in rest.iter().rev() {
        acc = p.shift_origin(t_n).mul(&acc)?.integral_from_zero();
    }
    Ok(acc.eval(dt))
}
