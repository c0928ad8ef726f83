//! Truncated q-expansions over Q(zeta_l) and the explicit series zoo: s_{a/l},
//! s2_{a/l}, their sum of squares, Fricke involutes, E2 differences, the
//! weight-2 Eisenstein span with its rank guard, and a numerical theta oracle.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{cusp_count, divisors, euler_phi, gcd, ramanujan_trace, sigma1};
use crate::field::{CycNum, Rat, Scalar};
use crate::linalg::Subspace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QseriesError {
    #[error("eisenstein span at level {level} has rank {got}, classical dimension {want}")]
    RankDeficit { level: u32, got: usize, want: usize },
    #[error("theta sum did not reach tolerance {tol:e} within {budget} terms")]
    NoConverge { tol: f64, budget: usize },
}

/// Truncated power series in q with coefficients in Q(zeta_level).
/// coeffs[0] is the constant term; length is the precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QExpansion {
    pub level: u32,
    pub coeffs: Vec<CycNum>,
}

impl QExpansion {
    pub fn zero(level: u32, prec: usize) -> Self {
        QExpansion { level, coeffs: vec![CycNum::zero(level); prec] }
    }

    pub fn constant(level: u32, prec: usize, c: CycNum) -> Self {
        let mut f = Self::zero(level, prec);
        f.coeffs[0] = c;
        f
    }

    pub fn prec(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, n: usize) -> &CycNum {
        &self.coeffs[n]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| Scalar::is_zero(c))
    }

    /// Coefficientwise inclusion into the field of a multiple level.
    pub fn lift_level(&self, big: u32) -> QExpansion {
        QExpansion { level: big, coeffs: self.coeffs.iter().map(|c| c.lift_to(big)).collect() }
    }

    /// Degeneracy map q -> q^t, truncated to the same precision.
    pub fn expand_exponent(&self, t: usize) -> QExpansion {
        assert!(t >= 1);
        let n = self.prec();
        let mut out = Self::zero(self.level, n);
        for d in (0..n).step_by(t) {
            out.coeffs[d] = self.coeffs[d / t].clone();
        }
        out
    }

    /// Numerical value at a complex q, by Horner on embedded coefficients.
    pub fn eval_q(&self, q: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * q + c.embed();
        }
        acc
    }
}

fn check_tags(f: &QExpansion, g: &QExpansion) {
    assert_eq!(f.level, g.level, "level tag mismatch");
    assert_eq!(f.prec(), g.prec(), "precision mismatch");
}

pub fn qx_add(f: &QExpansion, g: &QExpansion) -> QExpansion {
    check_tags(f, g);
    QExpansion {
        level: f.level,
        coeffs: f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| a.add(b)).collect(),
    }
}

pub fn qx_sub(f: &QExpansion, g: &QExpansion) -> QExpansion {
    check_tags(f, g);
    QExpansion {
        level: f.level,
        coeffs: f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| a.sub(b)).collect(),
    }
}

pub fn qx_scale(f: &QExpansion, c: &CycNum) -> QExpansion {
    QExpansion { level: f.level, coeffs: f.coeffs.iter().map(|a| a.mul(c)).collect() }
}

/// Truncated Cauchy product.
pub fn qx_mul(f: &QExpansion, g: &QExpansion) -> QExpansion {
    check_tags(f, g);
    let n = f.prec();
    let mut out = QExpansion::zero(f.level, n);
    for (i, a) in f.coeffs.iter().enumerate() {
        if Scalar::is_zero(a) {
            continue;
        }
        for (j, b) in g.coeffs.iter().take(n - i).enumerate() {
            if Scalar::is_zero(b) {
                continue;
            }
            out.coeffs[i + j] = out.coeffs[i + j].add(&a.mul(b));
        }
    }
    out
}

// ------------------------------------------------------------ explicit series

fn nonzero_residue(a: i64, l: u32) -> i64 {
    let a = a.rem_euclid(l as i64);
    assert!(a != 0, "index must be nonzero mod the level");
    a
}

/// s_{a/l}: constant (w^a+1)/(2(w^a-1)), then -sum_{k|d}(w^{ka} - w^{-ka}) at q^d.
pub fn s_series(a: i64, l: u32, prec: usize) -> QExpansion {
    let a = nonzero_residue(a, l);
    let w = CycNum::root_pow(l, a);
    let two = CycNum::from_i64(l, 2);
    let den = (w.clone() - CycNum::one(l)) * two;
    let c0 = (w + CycNum::one(l)).mul(&den.inv().expect("w^a != 1"));
    let mut f = QExpansion::constant(l, prec, c0);
    for d in 1..prec {
        let mut acc = CycNum::zero(l);
        for k in divisors(d as u64) {
            let k = k as i64;
            acc = acc + CycNum::root_pow(l, k * a) - CycNum::root_pow(l, -k * a);
        }
        f.coeffs[d] = acc.neg();
    }
    f
}

/// s2_{a/l}: constant -w^a/(w^a-1)^2 - 1/12, then -sum_{k|d} k(w^{ka}+w^{-ka}-2).
/// The sign of the algebraic constant is forced by the exact identities
/// s^2 + s2 = closed form and the triple relation; see the oracle checks.
pub fn s2_series(a: i64, l: u32, prec: usize) -> QExpansion {
    let a = nonzero_residue(a, l);
    let w = CycNum::root_pow(l, a);
    let dd = w.clone() - CycNum::one(l);
    let c0 = w.mul(&(dd.clone() * dd).inv().expect("w^a != 1")).neg()
        - CycNum::from_rat(l, &Rat::from_frac(1, 12));
    let mut f = QExpansion::constant(l, prec, c0);
    for d in 1..prec {
        let mut acc = CycNum::zero(l);
        for k in divisors(d as u64) {
            let ki = k as i64;
            let t = CycNum::root_pow(l, ki * a) + CycNum::root_pow(l, -ki * a)
                - CycNum::from_i64(l, 2);
            acc = acc + t.mul(&CycNum::from_i64(l, ki));
        }
        f.coeffs[d] = acc.neg();
    }
    f
}

/// s^2 + s2 in closed form: constant 1/6, then -2 sum_{k|d} (d/k)(w^{ak}+w^{-ak}).
pub fn s_sq_plus_s2_series(a: i64, l: u32, prec: usize) -> QExpansion {
    let a = nonzero_residue(a, l);
    let c0 = CycNum::from_rat(l, &Rat::from_frac(1, 6));
    let mut f = QExpansion::constant(l, prec, c0);
    for d in 1..prec {
        let mut acc = CycNum::zero(l);
        for k in divisors(d as u64) {
            let ki = k as i64;
            let t = CycNum::root_pow(l, ki * a) + CycNum::root_pow(l, -ki * a);
            acc = acc + t.mul(&CycNum::from_i64(l, (d as i64) / ki));
        }
        f.coeffs[d] = acc.mul(&CycNum::from_i64(l, -2));
    }
    f
}

/// Fricke involute: zero for a = 0; else constant a/l - 1/2 and the indicator
/// tail -sum_{k|d}([k = a mod l] - [k = -a mod l]).
pub fn tilde_s_series(a: i64, l: u32, prec: usize) -> QExpansion {
    let a = a.rem_euclid(l as i64);
    if a == 0 {
        return QExpansion::zero(l, prec);
    }
    let c0 = CycNum::from_rat(l, &Rat::from_frac(a, l as i64))
        - CycNum::from_rat(l, &Rat::from_frac(1, 2));
    let mut f = QExpansion::constant(l, prec, c0);
    let li = l as i64;
    for d in 1..prec {
        let mut acc = 0i64;
        for k in divisors(d as u64) {
            let k = k as i64;
            if (k - a) % li == 0 {
                acc -= 1;
            }
            if (k + a) % li == 0 {
                acc += 1;
            }
        }
        f.coeffs[d] = CycNum::from_i64(l, acc);
    }
    f
}

/// E2 = 1 - 24 sum sigma_1(n) q^n, a level-1 (quasimodular) series.
pub fn e2_series(prec: usize) -> QExpansion {
    let mut f = QExpansion::constant(1, prec, CycNum::one(1));
    for d in 1..prec {
        f.coeffs[d] = CycNum::from_i64(1, -24 * sigma1(d as u64) as i64);
    }
    f
}

/// The weight-2 holomorphic differences E2(tau) - t E2(t tau) for t | l, t > 1.
pub fn e2_level_family(l: u32, prec: usize) -> Vec<QExpansion> {
    let e2 = e2_series(prec).lift_level(l);
    divisors(l as u64)
        .into_iter()
        .filter(|&t| t > 1)
        .map(|t| {
            let dil = qx_scale(&e2.expand_exponent(t as usize), &CycNum::from_i64(l, t as i64));
            qx_sub(&e2, &dil)
        })
        .collect()
}

// --------------------------------------------------------------- Eisenstein

/// Truncated span of the weight-2 Eisenstein space at level l, together with
/// the constants direction (the generating series are Eisenstein only up to
/// additive constants, so the span always carries the constant series 1).
#[derive(Clone, Debug)]
pub struct EisBasis {
    pub level: u32,
    pub prec: usize,
    span: Subspace<CycNum>,
}

impl EisBasis {
    /// Dimension of genuine forms modulo the constants direction.
    pub fn rank(&self) -> usize {
        self.span.dim() - 1
    }

    pub fn rows(&self) -> &[Vec<CycNum>] {
        self.span.basis()
    }

    /// Rebuild from echelon rows (e.g. a cache); the rank guard re-runs.
    pub fn from_rows(l: u32, prec: usize, rows: Vec<Vec<CycNum>>) -> Result<Self, QseriesError> {
        let span = Subspace::from_rows(prec, rows);
        let got = span.dim() - 1;
        let want = cusp_count(l) - 1;
        if got != want {
            return Err(QseriesError::RankDeficit { level: l, got, want });
        }
        Ok(EisBasis { level: l, prec, span })
    }
}

/// Exponents of chi(x) with respect to zeta_m, for m a multiple of the order.
fn char_exp_in(chi: &crate::arith::DirichletChar, x: u64, m: u64) -> Option<u64> {
    let t = chi.exp_at(x)?;
    Some(t * m / chi.value_order % m)
}

/// Rational rows spanning the same space as the Galois orbits of the
/// two-character Eisenstein series with both characters nontrivial primitive,
/// cond(chi) * cond(psi) * t dividing l: the j-th twisted trace of
/// sum_{k|n} psi(k) k chi(n/k), lifted by q -> q^t.
fn character_pair_rows(l: u32, prec: usize) -> Vec<Vec<CycNum>> {
    let mut rows = Vec::new();
    let lu = l as u64;
    for u in divisors(lu) {
        if u < 3 {
            continue;
        }
        for v in divisors(lu) {
            if v < 3 || lu % (u * v) != 0 {
                continue;
            }
            let chis: Vec<_> = crate::arith::characters_mod(u)
                .into_iter()
                .filter(|c| c.conductor() == u)
                .collect();
            let psis: Vec<_> = crate::arith::characters_mod(v)
                .into_iter()
                .filter(|c| c.conductor() == v)
                .collect();
            for chi in &chis {
                for psi in &psis {
                    if chi.is_even() != psi.is_even() {
                        continue;
                    }
                    let m = {
                        let (a, b) = (chi.order(), psi.order());
                        a / gcd(a as i64, b as i64) as u64 * b
                    };
                    for j in 0..euler_phi(m) {
                        let mut row = vec![CycNum::zero(l); prec];
                        for n in 1..prec as u64 {
                            let mut acc = 0i64;
                            for k in divisors(n) {
                                let (Some(ep), Some(ec)) =
                                    (char_exp_in(psi, k, m), char_exp_in(chi, n / k, m))
                                else {
                                    continue;
                                };
                                acc += k as i64 * ramanujan_trace(m, (j + ep + ec) % m);
                            }
                            row[n as usize] = CycNum::from_i64(l, acc);
                        }
                        for t in divisors(lu / (u * v)) {
                            let qe = QExpansion { level: l, coeffs: row.clone() }
                                .expand_exponent(t as usize);
                            rows.push(qe.coeffs);
                        }
                    }
                }
            }
        }
    }
    rows
}

/// Assemble the Eisenstein span at level l: the constant 1, the s2 and
/// s^2+s2 families at all divisor levels with their degeneracy lifts, the E2
/// differences, and the character-pair rows. Fails loudly if the rank misses
/// the classical dimension (cusp count minus one).
pub fn eisenstein_basis(l: u32, prec: usize) -> Result<EisBasis, QseriesError> {
    assert!(prec >= crate::arith::sturm_bound(l), "precision below the Sturm bound");
    let mut rows: Vec<Vec<CycNum>> = Vec::new();
    rows.push(QExpansion::constant(l, prec, CycNum::one(l)).coeffs);
    for lp in divisors(l as u64) {
        let lp = lp as u32;
        if lp < 3 {
            continue;
        }
        for t in divisors((l / lp) as u64) {
            let t = t as usize;
            // the series are even in a, so half the range spans the same space
            for a in 1..=(lp as i64) / 2 {
                for f in [s2_series(a, lp, prec), s_sq_plus_s2_series(a, lp, prec)] {
                    rows.push(f.lift_level(l).expand_exponent(t).coeffs);
                }
            }
        }
    }
    for f in e2_level_family(l, prec) {
        rows.push(f.coeffs);
    }
    rows.extend(character_pair_rows(l, prec));
    EisBasis::from_rows(l, prec, rows)
}

/// Residual of f after sweeping out the Eisenstein span (constants included);
/// the zero vector exactly when f is Eisenstein up to a constant, to precision.
pub fn reduce_mod_eis(f: &QExpansion, basis: &EisBasis) -> Vec<CycNum> {
    assert_eq!(f.level, basis.level, "level tag mismatch");
    assert_eq!(f.prec(), basis.prec, "precision mismatch");
    basis.span.reduce(&f.coeffs)
}

// -------------------------------------------------------------------- theta

/// (1/2 pi i) d/dz log theta(z, tau) via the triple product: cot(pi z)/(2i)
/// plus the geometric tails, truncated once a term drops below tol.
pub fn theta_numeric(
    z: f64,
    tau: Complex64,
    tol: f64,
    budget: usize,
) -> Result<Complex64, QseriesError> {
    assert!(tau.im > 0.0, "tau must lie in the upper half plane");
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = Complex64::from_polar(1.0, two_pi * z);
    let q = (Complex64::new(0.0, two_pi) * tau).exp();
    let one = Complex64::new(1.0, 0.0);
    let mut acc = (w + one) / ((w - one) * 2.0);
    let mut qn = one;
    for _ in 0..budget {
        qn *= q;
        let term = qn / w / (one - qn / w) - qn * w / (one - qn * w);
        acc += term;
        if term.norm() < tol {
            return Ok(acc);
        }
    }
    Err(QseriesError::NoConverge { tol, budget })
}
