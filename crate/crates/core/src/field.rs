//! Exact scalars: arbitrary-precision rationals and the cyclotomic fields Q(zeta_l),
//! plus a complex embedding used only for numerical cross-checks.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::arith::{divisors, euler_phi, gcd};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("cyclotomic level mismatch: {0} vs {1}")]
    LevelMismatch(u32, u32),
    #[error("division by zero")]
    DivisionByZero,
}

/// Scalars a quotient-space or q-series computation can run over.
///
/// Methods take an instance receiver so that context (the cyclotomic level)
/// travels with the value; `zero_like`/`of_i64` build new scalars in the same field.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn of_i64(&self, n: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// None exactly when self is zero.
    fn inv(&self) -> Option<Self>;
}

// ---------------------------------------------------------------- rationals

/// Arbitrary-precision rational, always in lowest terms with positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

impl Rat {
    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_big(n: BigInt, d: BigInt) -> Self {
        assert!(!d.is_zero(), "zero denominator");
        Rat(BigRational::new(n, d))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn abs(&self) -> Self {
        Rat(self.0.abs())
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat(BigRational::from(BigInt::from(n)))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for Rat {
    type Err = num::rational::ParseRatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Rat(BigRational::from_str(s)?))
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|e| D::Error::custom(format!("bad rational {s:?}: {e}")))
    }
}

macro_rules! rat_ops {
    ($($trait:ident $fn:ident)*) => {$(
        impl $trait for Rat {
            type Output = Rat;
            fn $fn(self, rhs: Rat) -> Rat {
                Rat(self.0.$fn(rhs.0))
            }
        }
        impl $trait<&Rat> for Rat {
            type Output = Rat;
            fn $fn(self, rhs: &Rat) -> Rat {
                Rat(self.0.$fn(&rhs.0))
            }
        }
    )*};
}
rat_ops!(Add add Sub sub Mul mul Div div);

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Scalar for Rat {
    fn zero_like(&self) -> Self {
        Rat::zero()
    }
    fn one_like(&self) -> Self {
        Rat::one()
    }
    fn of_i64(&self, n: i64) -> Self {
        Rat::from(n)
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn add(&self, other: &Self) -> Self {
        Rat(&self.0 + &other.0)
    }
    fn sub(&self, other: &Self) -> Self {
        Rat(&self.0 - &other.0)
    }
    fn mul(&self, other: &Self) -> Self {
        Rat(&self.0 * &other.0)
    }
    fn neg(&self) -> Self {
        Rat(-&self.0)
    }
    fn inv(&self) -> Option<Self> {
        if self.0.is_zero() {
            None
        } else {
            Some(Rat(self.0.recip()))
        }
    }
}

// ----------------------------------------------------- cyclotomic polynomial

fn poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Exact division of a by monic b; panics on a nonzero remainder.
fn poly_div_exact(mut a: Vec<BigInt>, b: &[BigInt]) -> Vec<BigInt> {
    let db = b.len() - 1;
    assert!(b[db].is_one(), "divisor not monic");
    assert!(a.len() > db);
    let dq = a.len() - 1 - db;
    let mut q = vec![BigInt::zero(); dq + 1];
    for k in (0..=dq).rev() {
        let c = std::mem::take(&mut a[k + db]);
        if c.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(db) {
            a[k + j] -= &c * bj;
        }
        q[k] = c;
    }
    assert!(a.iter().all(|c| c.is_zero()), "inexact polynomial division");
    q
}

fn cyclo_cache() -> &'static Mutex<HashMap<u32, Arc<Vec<BigInt>>>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Vec<BigInt>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cyclo(l: u32) -> Arc<Vec<BigInt>> {
    assert!(l >= 1);
    if let Some(p) = cyclo_cache().lock().unwrap().get(&l) {
        return p.clone();
    }
    // x^l - 1 divided by the product of all lower-level factors.
    // The lock is not held here: recursion repopulates the cache bottom-up.
    let mut num = vec![BigInt::zero(); l as usize + 1];
    num[0] = -BigInt::one();
    num[l as usize] = BigInt::one();
    let mut p = num;
    for d in divisors(l as u64) {
        if (d as u32) < l {
            p = poly_div_exact(p, &cyclo(d as u32));
        }
    }
    assert_eq!(p.len() as u64, euler_phi(l as u64) + 1);
    let arc = Arc::new(p);
    cyclo_cache().lock().unwrap().insert(l, arc.clone());
    arc
}

/// Ascending coefficients of the l-th cyclotomic polynomial, monic of degree phi(l).
pub fn cyclotomic_polynomial(l: u32) -> Vec<BigInt> {
    cyclo(l).as_ref().clone()
}

// ---------------------------------------------------------------- cyclotomics

/// Element of Q(zeta_l) in the power basis 1, z, ..., z^{phi(l)-1}.
///
/// Stored as one integer vector over a common positive denominator with the
/// overall content reduced, so equality is plain component comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycNum {
    level: u32,
    num: Vec<BigInt>,
    den: BigInt,
}

/// Reduce an (ascending) coefficient vector modulo the monic polynomial `m`.
fn reduce_mod(acc: &mut Vec<BigInt>, m: &[BigInt]) {
    let d = m.len() - 1;
    for k in (d..acc.len()).rev() {
        let c = std::mem::take(&mut acc[k]);
        if c.is_zero() {
            continue;
        }
        for (j, mj) in m.iter().enumerate().take(d) {
            acc[k - d + j] -= &c * mj;
        }
    }
    acc.truncate(d);
    acc.resize(d, BigInt::zero());
}

impl CycNum {
    fn phi(&self) -> usize {
        self.num.len()
    }

    fn normalize(mut self) -> Self {
        debug_assert!(self.den.is_positive());
        let mut g = self.den.clone();
        for c in &self.num {
            if g.is_one() {
                break;
            }
            g = g.gcd(c);
        }
        if !g.is_one() {
            for c in &mut self.num {
                *c /= &g;
            }
            self.den /= &g;
        }
        self
    }

    pub fn zero(level: u32) -> Self {
        let phi = euler_phi(level as u64) as usize;
        CycNum { level, num: vec![BigInt::zero(); phi], den: BigInt::one() }
    }

    pub fn one(level: u32) -> Self {
        let mut x = Self::zero(level);
        x.num[0] = BigInt::one();
        x
    }

    pub fn from_i64(level: u32, n: i64) -> Self {
        let mut x = Self::zero(level);
        x.num[0] = BigInt::from(n);
        x
    }

    pub fn from_rat(level: u32, r: &Rat) -> Self {
        let mut x = Self::zero(level);
        x.num[0] = r.numer().clone();
        x.den = r.denom().clone();
        x
    }

    /// The primitive root zeta_l itself.
    pub fn root(level: u32) -> Self {
        Self::root_pow(level, 1)
    }

    /// zeta_l^a for any integer a (reduced mod l).
    pub fn root_pow(level: u32, a: i64) -> Self {
        let l = level as i64;
        let a = a.rem_euclid(l) as usize;
        let phi = euler_phi(level as u64) as usize;
        let mut acc = vec![BigInt::zero(); (a + 1).max(phi)];
        acc[a] = BigInt::one();
        reduce_mod(&mut acc, &cyclo(level));
        CycNum { level, num: acc, den: BigInt::one() }
    }

    pub fn from_coords(level: u32, coords: &[Rat]) -> Self {
        let phi = euler_phi(level as u64) as usize;
        assert_eq!(coords.len(), phi, "expected {phi} coordinates at level {level}");
        let mut den = BigInt::one();
        for c in coords {
            den = den.lcm(c.denom());
        }
        let num = coords.iter().map(|c| c.numer() * (&den / c.denom())).collect();
        CycNum { level, num, den }.normalize()
    }

    pub fn coords(&self) -> Vec<Rat> {
        self.num.iter().map(|n| Rat::from_big(n.clone(), self.den.clone())).collect()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    fn check_level(&self, other: &Self) -> Result<(), FieldError> {
        if self.level == other.level {
            Ok(())
        } else {
            Err(FieldError::LevelMismatch(self.level, other.level))
        }
    }

    fn add_impl(&self, other: &Self) -> Self {
        let den = self.den.lcm(&other.den);
        let (fa, fb) = (&den / &self.den, &den / &other.den);
        let num = self
            .num
            .iter()
            .zip(&other.num)
            .map(|(a, b)| a * &fa + b * &fb)
            .collect();
        CycNum { level: self.level, num, den }.normalize()
    }

    fn mul_impl(&self, other: &Self) -> Self {
        if self.num.iter().all(|c| c.is_zero()) || other.num.iter().all(|c| c.is_zero()) {
            return Self::zero(self.level);
        }
        let mut acc = poly_mul(&self.num, &other.num);
        acc.resize(acc.len().max(self.phi()), BigInt::zero());
        reduce_mod(&mut acc, &cyclo(self.level));
        CycNum { level: self.level, num: acc, den: &self.den * &other.den }.normalize()
    }

    fn neg_impl(&self) -> Self {
        CycNum {
            level: self.level,
            num: self.num.iter().map(|c| -c).collect(),
            den: self.den.clone(),
        }
    }

    fn inv_impl(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            return None;
        }
        // extended Euclid over Q[x] against the (irreducible) cyclotomic polynomial
        let modulus: Vec<BigRational> =
            cyclo(self.level).iter().map(|c| BigRational::from(c.clone())).collect();
        let a: Vec<BigRational> =
            self.num.iter().map(|c| BigRational::from(c.clone())).collect();
        let trim = |mut p: Vec<BigRational>| -> Vec<BigRational> {
            while p.last().map_or(false, |c| c.is_zero()) {
                p.pop();
            }
            p
        };
        let mut r0 = trim(modulus);
        let mut r1 = trim(a);
        let mut t0: Vec<BigRational> = vec![];
        let mut t1: Vec<BigRational> = vec![BigRational::one()];
        while r1.len() > 1 {
            // divide r0 by r1, replacing (r0, r1) by (r1, remainder)
            let mut rem = r0.clone();
            let mut q = vec![BigRational::zero(); rem.len().saturating_sub(r1.len()) + 1];
            let lead = r1.last().unwrap().clone();
            for k in (0..q.len()).rev() {
                if rem.len() < r1.len() + k {
                    continue;
                }
                let c = &rem[k + r1.len() - 1] / &lead;
                if c.is_zero() {
                    continue;
                }
                for (j, rj) in r1.iter().enumerate() {
                    let v = &c * rj;
                    rem[k + j] -= v;
                }
                q[k] = c;
            }
            let rem = trim(rem);
            // t2 = t0 - q * t1
            let mut t2 = t0.clone();
            t2.resize(t2.len().max(q.len() + t1.len() - 1), BigRational::zero());
            for (i, qi) in q.iter().enumerate() {
                if qi.is_zero() {
                    continue;
                }
                for (j, tj) in t1.iter().enumerate() {
                    let v = qi * tj;
                    t2[i + j] -= v;
                }
            }
            r0 = std::mem::replace(&mut r1, rem);
            t0 = std::mem::replace(&mut t1, trim(t2));
        }
        assert!(!r1.is_empty(), "cyclotomic polynomial must be coprime to a nonzero element");
        let g = r1[0].clone();
        let mut coords: Vec<Rat> = t1
            .iter()
            .map(|c| Rat(c / &g * BigRational::from(self.den.clone())))
            .collect();
        coords.resize(self.phi(), Rat::zero());
        Some(Self::from_coords(self.level, &coords))
    }

    /// Galois action zeta -> zeta^k; requires gcd(k, level) = 1.
    pub fn galois(&self, k: i64) -> Self {
        let l = self.level as i64;
        let k = k.rem_euclid(l);
        assert_eq!(gcd(k, l), 1, "galois exponent must be a unit mod the level");
        let mut acc = vec![BigInt::zero(); self.level as usize];
        for (i, c) in self.num.iter().enumerate() {
            acc[(i as i64 * k).rem_euclid(l) as usize] += c;
        }
        reduce_mod(&mut acc, &cyclo(self.level));
        CycNum { level: self.level, num: acc, den: self.den.clone() }.normalize()
    }

    /// Canonical inclusion Q(zeta_l) -> Q(zeta_L) for l | L, via zeta_l = zeta_L^{L/l}.
    pub fn lift_to(&self, big: u32) -> Self {
        assert_eq!(big % self.level, 0, "target level must be a multiple");
        let t = (big / self.level) as usize;
        let phi = euler_phi(big as u64) as usize;
        let mut acc = vec![BigInt::zero(); ((self.phi() - 1) * t + 1).max(phi)];
        for (i, c) in self.num.iter().enumerate() {
            acc[i * t] = c.clone();
        }
        reduce_mod(&mut acc, &cyclo(big));
        CycNum { level: big, num: acc, den: self.den.clone() }.normalize()
    }

    /// Numerical image under zeta -> e^{2 pi i / l}, accurate to machine precision.
    pub fn embed(&self) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / self.level as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.num.iter().rev() {
            acc = acc * z + Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0);
        }
        acc / self.den.to_f64().unwrap_or(f64::NAN)
    }

    /// The rational value if this element lies in Q, else None.
    pub fn as_rat(&self) -> Option<Rat> {
        if self.num[1..].iter().all(|c| c.is_zero()) {
            Some(Rat::from_big(self.num[0].clone(), self.den.clone()))
        } else {
            None
        }
    }
}

impl fmt::Display for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.num.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*z")?,
                _ => write!(f, "{c}*z^{i}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        if !self.den.is_one() {
            write!(f, " / {}", self.den)?;
        }
        Ok(())
    }
}

macro_rules! cyc_ops {
    ($($trait:ident $fn:ident $impl:ident)*) => {$(
        impl $trait for CycNum {
            type Output = CycNum;
            fn $fn(self, rhs: CycNum) -> CycNum {
                self.check_level(&rhs).unwrap();
                self.$impl(&rhs)
            }
        }
        impl $trait<&CycNum> for CycNum {
            type Output = CycNum;
            fn $fn(self, rhs: &CycNum) -> CycNum {
                self.check_level(rhs).unwrap();
                self.$impl(rhs)
            }
        }
    )*};
}
cyc_ops!(Add add add_impl Mul mul mul_impl);

impl Sub for CycNum {
    type Output = CycNum;
    fn sub(self, rhs: CycNum) -> CycNum {
        self.check_level(&rhs).unwrap();
        self.add_impl(&rhs.neg_impl())
    }
}

impl Sub<&CycNum> for CycNum {
    type Output = CycNum;
    fn sub(self, rhs: &CycNum) -> CycNum {
        self.check_level(rhs).unwrap();
        self.add_impl(&rhs.neg_impl())
    }
}

impl Neg for CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        self.neg_impl()
    }
}

impl Scalar for CycNum {
    fn zero_like(&self) -> Self {
        CycNum::zero(self.level)
    }
    fn one_like(&self) -> Self {
        CycNum::one(self.level)
    }
    fn of_i64(&self, n: i64) -> Self {
        CycNum::from_i64(self.level, n)
    }
    fn is_zero(&self) -> bool {
        self.num.iter().all(|c| c.is_zero())
    }
    fn add(&self, other: &Self) -> Self {
        self.check_level(other).unwrap();
        self.add_impl(other)
    }
    fn sub(&self, other: &Self) -> Self {
        self.check_level(other).unwrap();
        self.add_impl(&other.neg_impl())
    }
    fn mul(&self, other: &Self) -> Self {
        self.check_level(other).unwrap();
        self.mul_impl(other)
    }
    fn neg(&self) -> Self {
        self.neg_impl()
    }
    fn inv(&self) -> Option<Self> {
        self.inv_impl()
    }
}

/// Product in Q(zeta_l), failing cleanly on a level mismatch.
pub fn cyc_mul(x: &CycNum, y: &CycNum) -> Result<CycNum, FieldError> {
    x.check_level(y)?;
    Ok(x.mul_impl(y))
}

/// Multiplicative inverse in Q(zeta_l).
pub fn cyc_inv(x: &CycNum) -> Result<CycNum, FieldError> {
    x.inv_impl().ok_or(FieldError::DivisionByZero)
}

/// Complex image of x under zeta -> e^{2 pi i / l}. Computed in f64, so `digits`
/// is honored only up to machine precision (about 14 significant digits).
pub fn cyc_embed(x: &CycNum, digits: u32) -> Complex64 {
    let _ = digits;
    x.embed()
}

#[derive(Serialize, Deserialize)]
struct CycNumRepr {
    level: u32,
    coords: Vec<String>,
}

impl Serialize for CycNum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let repr = CycNumRepr {
            level: self.level,
            coords: self.coords().iter().map(|c| c.to_string()).collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CycNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = CycNumRepr::deserialize(d)?;
        let phi = euler_phi(repr.level as u64) as usize;
        if repr.coords.len() != phi {
            return Err(D::Error::custom(format!(
                "level {} wants {} coords, got {}",
                repr.level,
                phi,
                repr.coords.len()
            )));
        }
        let coords = repr
            .coords
            .iter()
            .map(|s| s.parse::<Rat>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| D::Error::custom(format!("bad coordinate: {e}")))?;
        Ok(CycNum::from_coords(repr.level, &coords))
    }
}
