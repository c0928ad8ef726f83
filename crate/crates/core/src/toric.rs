//! The geometric side: products of the s-series modulo the Eisenstein span,
//! lattice fans and their Hecke action through superlattices, the winding
//! comparison series, and the rank-zero dimension comparator.

use std::collections::HashMap;

use num::{BigInt, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{gcd, is_prime};
use crate::field::{CycNum, Rat, Scalar};
use crate::hecke::{hecke_matrix, hecke_span, merel_matrices};
use crate::linalg::{charpoly, poly_eval_mat, Subspace};
use crate::manin::{build_space, DualVec, ManinSpace, SpaceKind};
use crate::qseries::{
    eisenstein_basis, qx_mul, reduce_mod_eis, s_series, tilde_s_series, EisBasis, QExpansion,
    QseriesError,
};

#[derive(Debug, Error)]
pub enum ToricError {
    #[error(transparent)]
    Series(#[from] QseriesError),
    #[error("invalid fan: {0}")]
    InvalidFan(String),
    #[error("no admissible prime yields a Hecke-stable complement at level {level}")]
    EisPartFailed { level: u32 },
    #[error("hecke span did not stabilize at level {level} within budget {budget}")]
    SpanNotStabilized { level: u32, budget: u64 },
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
}

/// A weight-2 form known only through its residual after sweeping out the
/// Eisenstein span; residuals are canonical, so equality of classes is
/// equality of fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModEisClass {
    pub level: u32,
    pub prec: usize,
    pub residual: Vec<CycNum>,
}

impl ModEisClass {
    pub fn zero(level: u32, prec: usize) -> Self {
        ModEisClass { level, prec, residual: vec![CycNum::zero(level); prec] }
    }

    pub fn is_zero(&self) -> bool {
        self.residual.iter().all(|c| Scalar::is_zero(c))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.level, self.prec), (other.level, other.prec), "class tag mismatch");
        ModEisClass {
            level: self.level,
            prec: self.prec,
            residual: self.residual.iter().zip(&other.residual).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn scale_int(&self, k: i64) -> Self {
        let f = CycNum::from_i64(self.level, k);
        ModEisClass {
            level: self.level,
            prec: self.prec,
            residual: self.residual.iter().map(|c| c.mul(&f)).collect(),
        }
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        let f = CycNum::from_rat(self.level, r);
        ModEisClass {
            level: self.level,
            prec: self.prec,
            residual: self.residual.iter().map(|c| c.mul(&f)).collect(),
        }
    }
}

// ---------------------------------------------------------------------- fans

/// A complete fan with a degree value at each ray's minimal lattice point.
/// The ray list is stored closed: rays[0] is repeated at the end, and the
/// degrees repeat with it.
#[derive(Clone, Debug, PartialEq)]
pub struct FanData {
    pub level: u32,
    pub rays: Vec<(i64, i64)>,
    pub degrees: Vec<Rat>,
}

impl FanData {
    pub fn new(level: u32, rays: Vec<(i64, i64)>, degrees: Vec<Rat>) -> Result<Self, ToricError> {
        if rays.len() != degrees.len() {
            return Err(ToricError::InvalidFan("ray and degree counts differ".into()));
        }
        if rays.len() < 4 {
            return Err(ToricError::InvalidFan("a complete fan needs at least three rays".into()));
        }
        if rays.first() != rays.last() || degrees.first() != degrees.last() {
            return Err(ToricError::InvalidFan("fan is not closed".into()));
        }
        for &(x, y) in &rays {
            if (x, y) == (0, 0) || gcd(x, y) != 1 {
                return Err(ToricError::InvalidFan(format!("ray ({x},{y}) is not primitive")));
            }
        }
        for w in rays.windows(2) {
            let cross = w[0].0 * w[1].1 - w[0].1 * w[1].0;
            if cross <= 0 {
                return Err(ToricError::InvalidFan(format!(
                    "rays {:?} -> {:?} do not turn left",
                    w[0], w[1]
                )));
            }
        }
        for d in &degrees {
            if deg_index(d, level).is_none() {
                return Err(ToricError::InvalidFan(format!(
                    "degree {d} has denominator not dividing {level}"
                )));
            }
        }
        Ok(FanData { level, rays, degrees })
    }
}

/// The s-series index of a degree value: a with alpha = a/l mod 1, or None
/// if alpha's denominator does not divide l.
fn deg_index(alpha: &Rat, l: u32) -> Option<i64> {
    let v = alpha.clone() * Rat::from(l as i64);
    if v.denom() != &BigInt::from(1) {
        return None;
    }
    Some(v.numer().to_i64().expect("degree index fits i64").rem_euclid(l as i64))
}

/// A rank-2 lattice between Z^2 and (1/p)Z^2, given by a basis.
pub type LatticeBasis = [(Rat, Rat); 2];

/// The p+1 index-p superlattices of Z^2: row-style bases (1/p, j/p),(0,1)
/// for j = 0..p-1 and (1,0),(0,1/p).
pub fn superlattices(p: i64) -> Vec<LatticeBasis> {
    assert!(p > 1 && is_prime(p as u64), "index must be prime");
    let mut out: Vec<LatticeBasis> = (0..p)
        .map(|j| [(Rat::from_frac(1, p), Rat::from_frac(j, p)), (Rat::from(0), Rat::from(1))])
        .collect();
    out.push([(Rat::from(1), Rat::from(0)), (Rat::from(0), Rat::from_frac(1, p))]);
    out
}

/// Quadrant k is the cone spanned by R^k e1, R^k e2 with R the quarter turn
/// (so k = 0 is the closed first quadrant). Returns the lattice points on the
/// bounded hull boundary of the quadrant's points, ordered by angle from the
/// R^k e1 side; consecutive pairs are bases of the lattice.
pub fn hull_rays(basis: &LatticeBasis, quadrant: u8) -> Vec<(Rat, Rat)> {
    assert!(quadrant < 4);
    // common denominator, then work in the integer lattice d*S
    let mut den = 1i64;
    for (x, y) in basis {
        for r in [x, y] {
            let d = r.denom().to_i64().expect("basis denominator fits i64");
            den = den / gcd(den, d) * d;
        }
    }
    let scale = |r: &Rat| {
        let v = r.clone() * Rat::from(den);
        v.numer().to_i64().expect("scaled basis entry fits i64")
    };
    let mut b = [(scale(&basis[0].0), scale(&basis[0].1)), (scale(&basis[1].0), scale(&basis[1].1))];
    // rotate the lattice into the first quadrant's frame: R^{-1}(x,y) = (y,-x)
    for _ in 0..quadrant {
        b = [(b[0].1, -b[0].0), (b[1].1, -b[1].0)];
    }
    let det = (b[0].0 * b[1].1 - b[0].1 * b[1].0).abs();
    assert!(det > 0, "degenerate basis");
    // det*Z^2 lies inside the scaled lattice, so minimal points live in [0,det]^2
    let w = 2 * det + 2;
    let mut pts: Vec<(i64, i64)> = Vec::new();
    for i in -w..=w {
        for j in -w..=w {
            let x = i * b[0].0 + j * b[1].0;
            let y = i * b[0].1 + j * b[1].1;
            if x >= 0 && y >= 0 && (x, y) != (0, 0) && x <= det && y <= det {
                pts.push((x, y));
            }
        }
    }
    pts.sort();
    pts.dedup();
    let minimal: Vec<(i64, i64)> = pts
        .iter()
        .filter(|&&p| !pts.iter().any(|&q| q != p && q.0 <= p.0 && q.1 <= p.1))
        .copied()
        .collect();
    let mut ordered = minimal;
    // angle sort: a before b iff cross(a,b) > 0 (no ties among minimal points)
    ordered.sort_by(|a, b| (a.1 * b.0).cmp(&(a.0 * b.1)));
    ordered
        .into_iter()
        .map(|(mut x, mut y)| {
            // undo the frame rotation: R(x,y) = (-y,x)
            for _ in 0..quadrant {
                (x, y) = (-y, x);
            }
            (Rat::from_frac(x, den), Rat::from_frac(y, den))
        })
        .collect()
}

// -------------------------------------------------------------------- engine

/// Shared context for everything that reduces modulo the Eisenstein span of a
/// fixed level and precision: the echelonized span and the residuals of all
/// folded products s_a s_b, 1 <= a <= b <= (l-1)/2 (the rest follow by sign).
pub struct ToricEngine {
    level: u32,
    prec: usize,
    eis: EisBasis,
    pairs: Vec<(i64, i64)>,
    residuals: Vec<Vec<CycNum>>,
    pidx: HashMap<(i64, i64), usize>,
}

impl ToricEngine {
    pub fn new(l: u32, prec: usize) -> Result<Self, ToricError> {
        let eis = eisenstein_basis(l, prec)?;
        Ok(Self::with_eis(l, prec, eis))
    }

    fn with_eis(l: u32, prec: usize, eis: EisBasis) -> Self {
        let half = ((l - 1) / 2) as i64;
        let s: Vec<QExpansion> = (1..=half).map(|a| s_series(a, l, prec)).collect();
        let pairs: Vec<(i64, i64)> =
            (1..=half).flat_map(|a| (a..=half).map(move |b| (a, b))).collect();
        let residuals: Vec<Vec<CycNum>> = pairs
            .par_iter()
            .map(|&(a, b)| {
                reduce_mod_eis(&qx_mul(&s[(a - 1) as usize], &s[(b - 1) as usize]), &eis)
            })
            .collect();
        let pidx = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        ToricEngine { level: l, prec, eis, pairs, residuals, pidx }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    pub fn eis(&self) -> &EisBasis {
        &self.eis
    }

    pub fn reduce(&self, f: &QExpansion) -> ModEisClass {
        ModEisClass { level: self.level, prec: self.prec, residual: reduce_mod_eis(f, &self.eis) }
    }

    /// Residual of s_{a/l} s_{b/l}, zero when a or b vanishes mod l (that
    /// includes a = l/2 at even l, where the series itself vanishes).
    pub fn mu(&self, a: i64, b: i64) -> ModEisClass {
        let l = self.level as i64;
        let half = (l - 1) / 2;
        let (mut a, mut b) = (a.rem_euclid(l), b.rem_euclid(l));
        if a == 0 || b == 0 || 2 * a == l || 2 * b == l {
            return ModEisClass::zero(self.level, self.prec);
        }
        let mut sign = 1i64;
        if a > half {
            a = l - a;
            sign = -sign;
        }
        if b > half {
            b = l - b;
            sign = -sign;
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        let res = &self.residuals[self.pidx[&key]];
        let cls = ModEisClass { level: self.level, prec: self.prec, residual: res.clone() };
        if sign == 1 {
            cls
        } else {
            cls.scale_int(-1)
        }
    }

    /// mu extended linearly to a vector in the minus-quotient coordinates.
    pub fn mu_of_class(&self, space: &ManinSpace, ambient: &[Rat]) -> ModEisClass {
        assert!(
            matches!(space.kind, SpaceKind::MMinus | SpaceKind::SMinus),
            "mu lives on the minus quotient"
        );
        assert_eq!(space.level, self.level);
        assert_eq!(ambient.len(), space.ambient_dim());
        let mut acc = ModEisClass::zero(self.level, self.prec);
        for (j, c) in ambient.iter().enumerate() {
            if Scalar::is_zero(c) {
                continue;
            }
            let sym = space.basis_symbol(j);
            acc = acc.add(&self.mu(sym.u as i64, sym.v as i64).scale_rat(c));
        }
        acc
    }

    /// Residual of the Fricke-involute product: tilde_s_m tilde_s_n mod E(l).
    pub fn wl_mu(&self, m: i64, n: i64) -> ModEisClass {
        let l = self.level as i64;
        let (m, n) = (m.rem_euclid(l), n.rem_euclid(l));
        if m == 0 || n == 0 {
            return ModEisClass::zero(self.level, self.prec);
        }
        let f = qx_mul(
            &tilde_s_series(m, self.level, self.prec),
            &tilde_s_series(n, self.level, self.prec),
        );
        self.reduce(&f)
    }

    /// Residual of sum s_{alpha_i} s_{alpha_{i+1}} over the fan's adjacent ray
    /// pairs, skipping pairs where either degree value is integral.
    pub fn fan_form(&self, fd: &FanData) -> ModEisClass {
        assert_eq!(fd.level, self.level, "fan level mismatch");
        let mut acc = ModEisClass::zero(self.level, self.prec);
        for i in 0..fd.rays.len() - 1 {
            let a = deg_index(&fd.degrees[i], self.level).expect("validated fan");
            let b = deg_index(&fd.degrees[i + 1], self.level).expect("validated fan");
            if a != 0 && b != 0 {
                acc = acc.add(&self.mu(a, b));
            }
        }
        acc
    }

    /// The complete fan of a superlattice: hull rays of all four quadrants,
    /// with degree p*deg at each minimal point, deg(x,y) = (|x|m + |y|n)/l.
    pub fn lattice_fan(&self, basis: &LatticeBasis, p: i64, m: i64, n: i64) -> FanData {
        let mut ring: Vec<(Rat, Rat)> = Vec::new();
        for k in 0..4u8 {
            for pt in hull_rays(basis, k) {
                if ring.last() != Some(&pt) {
                    ring.push(pt);
                }
            }
        }
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        let l = self.level as i64;
        let first = ring[0].clone();
        let mut rays = Vec::new();
        let mut degrees = Vec::new();
        for pt in ring.iter().chain(std::iter::once(&first)) {
            let den = {
                let dx = pt.0.denom().to_i64().unwrap();
                let dy = pt.1.denom().to_i64().unwrap();
                dx / gcd(dx, dy) * dy
            };
            let xi = (pt.0.clone() * Rat::from(den)).numer().to_i64().unwrap();
            let yi = (pt.1.clone() * Rat::from(den)).numer().to_i64().unwrap();
            let g = gcd(xi, yi);
            rays.push((xi / g, yi / g));
            let weighted = pt.0.abs() * Rat::from(m) + pt.1.abs() * Rat::from(n);
            degrees.push(Rat::from_frac(p, l) * weighted);
        }
        FanData::new(self.level, rays, degrees).expect("hull fans satisfy the invariants")
    }

    /// Both Hecke routes for the class of (m,n): through the symbol quotient
    /// and through raw Merel products, plus the superlattice-fan cross-check
    /// (which carries the factor 4 of the square fan).
    pub fn hecke_toric_check(&self, minus: &ManinSpace, m: i64, n: i64, p: i64) -> HeckeToric {
        assert!(matches!(minus.kind, SpaceKind::MMinus));
        assert_eq!(minus.level, self.level);
        assert!(is_prime(p as u64) && self.level % (p as u32) != 0, "need a good prime");
        let mut coords = vec![Rat::zero(); minus.ambient_dim()];
        let mut product_route = ModEisClass::zero(self.level, self.prec);
        for mm in merel_matrices(p as u64) {
            let (x, y) = (mm.a * m + mm.c * n, mm.b * m + mm.d * n);
            let cls = minus.class_of(x, y);
            for (o, c) in coords.iter_mut().zip(&cls) {
                *o = o.clone() + c.clone();
            }
            product_route = product_route.add(&self.mu(x, y));
        }
        let symbol_route = self.mu_of_class(minus, &coords);
        let mut lattice_route = ModEisClass::zero(self.level, self.prec);
        for basis in superlattices(p) {
            let fd = self.lattice_fan(&basis, p, m, n);
            lattice_route = lattice_route.add(&self.fan_form(&fd));
        }
        let pass =
            symbol_route == product_route && lattice_route == product_route.scale_int(4);
        HeckeToric { pass, symbol_route, product_route, lattice_route }
    }

    /// Dimension of the span of all products s_a s_b modulo the Eisenstein
    /// space (rank of the folded residual matrix over the cyclotomic field).
    pub fn toric_dim(&self) -> usize {
        Subspace::from_rows(self.prec, self.residuals.clone()).dim()
    }

    /// Dimension of the span of the unit-averaged products
    /// sum_{k in (Z/l)^*} s_{ka} s_{kb} modulo the Eisenstein space.
    pub fn gamma0_products_dim(&self) -> usize {
        let l = self.level as i64;
        let rows: Vec<Vec<CycNum>> = self
            .pairs
            .par_iter()
            .map(|&(a, b)| {
                let mut acc = ModEisClass::zero(self.level, self.prec);
                for k in 1..l {
                    if gcd(k, l) == 1 {
                        acc = acc.add(&self.mu(k * a, k * b));
                    }
                }
                acc.residual
            })
            .collect();
        Subspace::from_rows(self.prec, rows).dim()
    }

    pub fn to_cache(&self) -> EngineCache {
        EngineCache {
            level: self.level,
            prec: self.prec,
            version: crate::CODE_VERSION,
            eis_rows: self.eis.rows().to_vec(),
            pairs: self.pairs.clone(),
            residuals: self.residuals.clone(),
        }
    }

    pub fn from_cache(c: EngineCache) -> Result<Self, ToricError> {
        if c.version != crate::CODE_VERSION {
            return Err(ToricError::CacheMismatch(format!(
                "cache version {} vs code version {}",
                c.version,
                crate::CODE_VERSION
            )));
        }
        let half = ((c.level - 1) / 2) as i64;
        let expected: Vec<(i64, i64)> =
            (1..=half).flat_map(|a| (a..=half).map(move |b| (a, b))).collect();
        if c.pairs != expected {
            return Err(ToricError::CacheMismatch("pair enumeration differs".into()));
        }
        if c.residuals.len() != c.pairs.len()
            || c.residuals
                .iter()
                .any(|r| r.len() != c.prec || r.iter().any(|x| x.level() != c.level))
        {
            return Err(ToricError::CacheMismatch("residual shape differs".into()));
        }
        let eis = EisBasis::from_rows(c.level, c.prec, c.eis_rows)?;
        let pidx = c.pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Ok(ToricEngine {
            level: c.level,
            prec: c.prec,
            eis,
            pairs: c.pairs,
            residuals: c.residuals,
            pidx,
        })
    }
}

#[derive(Clone, Debug)]
pub struct HeckeToric {
    pub pass: bool,
    pub symbol_route: ModEisClass,
    pub product_route: ModEisClass,
    pub lattice_route: ModEisClass,
}

/// Everything the expensive part of an engine needs, in serializable form;
/// keyed by level, precision and code version.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineCache {
    pub level: u32,
    pub prec: usize,
    pub version: u32,
    pub eis_rows: Vec<Vec<CycNum>>,
    pub pairs: Vec<(i64, i64)>,
    pub residuals: Vec<Vec<CycNum>>,
}

// ----------------------------------------------------------- winding series

/// rho(phi): q^n coefficient -sum over the index-n Merel matrices of
/// phi((c,d)); the constant term is zero.
pub fn rho_series(phi: &DualVec, prec: usize) -> QExpansion {
    let l = phi.level;
    let mut f = QExpansion::zero(l, prec);
    for n in 1..prec {
        let mut acc = Rat::zero();
        for mm in merel_matrices(n as u64) {
            acc = acc + phi.eval(mm.c, mm.d);
        }
        f.coeffs[n] = CycNum::from_rat(l, &acc.neg());
    }
    f
}

fn conv_rat(f: &[Rat], g: &[Rat], prec: usize) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); prec];
    for (i, a) in f.iter().enumerate() {
        if Scalar::is_zero(a) {
            continue;
        }
        for (j, b) in g.iter().take(prec - i).enumerate() {
            if Scalar::is_zero(b) {
                continue;
            }
            out[i + j] = out[i + j].clone() + a.clone() * b.clone();
        }
    }
    out
}

/// rho1(phi): (1/12) sum_{a,b mod l} (phi(a,a-b) - phi(a,a+b)) tilde_s_a tilde_s_b.
/// Terms with a = 0 or b = 0 vanish with tilde_s_0.
pub fn rho1_series(phi: &DualVec, prec: usize) -> QExpansion {
    let l = phi.level;
    let li = l as i64;
    let twelfth = Rat::from_frac(1, 12);
    let mut coef = vec![vec![Rat::zero(); l as usize]; l as usize];
    for a in 1..li {
        for b in 1..li {
            let c = (phi.eval(a, a - b) - phi.eval(a, a + b)) * twelfth.clone();
            let (x, y) = if a <= b { (a as usize, b as usize) } else { (b as usize, a as usize) };
            coef[x][y] = coef[x][y].clone() + c;
        }
    }
    let tilde: Vec<Vec<Rat>> = (0..li)
        .map(|a| {
            tilde_s_series(a, l, prec)
                .coeffs
                .iter()
                .map(|c| c.as_rat().expect("tilde series is rational"))
                .collect()
        })
        .collect();
    let mut acc = vec![Rat::zero(); prec];
    for a in 1..l as usize {
        for b in a..l as usize {
            if Scalar::is_zero(&coef[a][b]) {
                continue;
            }
            let prod = conv_rat(&tilde[a], &tilde[b], prec);
            for (o, p) in acc.iter_mut().zip(&prod) {
                *o = o.clone() + coef[a][b].clone() * p.clone();
            }
        }
    }
    QExpansion { level: l, coeffs: acc.iter().map(|r| CycNum::from_rat(l, r)).collect() }
}

/// The explicit Eisenstein gap between rho1 and rho, up to its (uncomputed)
/// constant: q^n coefficient
/// -(2/3) sum_{k|n} (n/k) phi(k,0) - (2/3l) sum_{k|n} k sum_b phi(k,b).
pub fn discrepancy_series(phi: &DualVec, prec: usize) -> QExpansion {
    let l = phi.level;
    let li = l as i64;
    let row: Vec<Rat> = (0..li).map(|r| phi.eval(r, 0)).collect();
    let tot: Vec<Rat> = (0..li)
        .map(|r| {
            let mut acc = Rat::zero();
            for b in 0..li {
                acc = acc + phi.eval(r, b);
            }
            acc
        })
        .collect();
    let c1 = Rat::from_frac(-2, 3);
    let c2 = Rat::from_frac(-2, 3 * li);
    let mut f = QExpansion::zero(l, prec);
    for n in 1..prec {
        let mut acc = Rat::zero();
        for k in crate::arith::divisors(n as u64) {
            let k = k as i64;
            let r = (k % li) as usize;
            acc = acc
                + c1.clone() * Rat::from(n as i64 / k) * row[r].clone()
                + c2.clone() * Rat::from(k) * tot[r].clone();
        }
        f.coeffs[n] = CycNum::from_rat(l, &acc);
    }
    f
}

// ------------------------------------------------------- rank-zero pipeline

/// Hecke-stable complement of the cuspidal part inside the plus quotient,
/// cut out by g(T_p) with g the characteristic polynomial of T_p on S+.
pub struct EisPart {
    pub prime: i64,
    pub space: Subspace<Rat>,
}

/// The Eisenstein T_p eigenvalues have absolute value at least p-1, while
/// cuspidal ones stay below 2 sqrt(p); for p >= 7 the two cannot meet, so
/// g(T_p) kills S+ and is invertible on the complement. The direct-sum check
/// makes the construction self-validating; failures fall through to the next
/// admissible prime.
pub fn eis_part(mplus: &ManinSpace, splus: &ManinSpace) -> Result<EisPart, ToricError> {
    assert!(matches!(mplus.kind, SpaceKind::MPlus));
    assert!(matches!(splus.kind, SpaceKind::SPlus));
    assert_eq!(mplus.level, splus.level);
    let l = mplus.level;
    let dim_m = mplus.ambient_dim();
    let cusp = splus.sub().expect("cuspidal kind").clone();
    let mut attempts = 0;
    for p in 7..200i64 {
        if !is_prime(p as u64) || l % (p as u32) == 0 || (p - 1) * (p - 1) <= 4 * p {
            continue;
        }
        attempts += 1;
        if attempts > 6 {
            break;
        }
        let space = if splus.dim() == 0 {
            let rows = (0..dim_m)
                .map(|i| {
                    let mut r = vec![Rat::zero(); dim_m];
                    r[i] = Rat::one();
                    r
                })
                .collect();
            Subspace::from_rows(dim_m, rows)
        } else {
            let g = charpoly(&hecke_matrix(p as u64, splus).mat);
            let gm = poly_eval_mat(&g, &hecke_matrix(p as u64, mplus).mat);
            Subspace::from_rows(dim_m, gm.transpose().to_rows())
        };
        if cusp.intersect(&space).dim() == 0 && cusp.sum(&space).dim() == dim_m {
            return Ok(EisPart { prime: p, space });
        }
    }
    Err(ToricError::EisPartFailed { level: l })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankZeroReport {
    pub level: u32,
    #[serde(rename = "toricDim")]
    pub toric_dim: usize,
    #[serde(rename = "windingDim")]
    pub winding_dim: usize,
    pub agree: bool,
    pub prec: usize,
    pub budget: u64,
    pub eis_prime: i64,
    pub span_reached: u64,
}

/// Both dimensions of the main comparison: the toric span modulo Eisenstein
/// and the winding Hecke module's image in M+/EisPart.
pub fn rank_zero_with(engine: &ToricEngine, budget: u64) -> Result<RankZeroReport, ToricError> {
    let l = engine.level();
    let mplus = build_space(l, SpaceKind::MPlus);
    let splus = build_space(l, SpaceKind::SPlus);
    let ep = eis_part(&mplus, &splus)?;
    let sp = hecke_span(&mplus, &mplus.winding(), budget);
    if !sp.stabilized {
        return Err(ToricError::SpanNotStabilized { level: l, budget });
    }
    let winding_dim = sp.span.sum(&ep.space).dim() - ep.space.dim();
    let toric_dim = engine.toric_dim();
    Ok(RankZeroReport {
        level: l,
        toric_dim,
        winding_dim,
        agree: toric_dim == winding_dim,
        prec: engine.prec(),
        budget,
        eis_prime: ep.prime,
        span_reached: sp.reached,
    })
}

pub fn rank_zero_dims(l: u32, prec: usize, budget: u64) -> Result<RankZeroReport, ToricError> {
    rank_zero_with(&ToricEngine::new(l, prec)?, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::default_prec;
    use crate::manin::dual_basis;

    fn engine(l: u32) -> ToricEngine {
        ToricEngine::new(l, default_prec(l)).unwrap()
    }

    #[test]
    fn mu_conventions() {
        let eng = engine(11);
        assert!(eng.mu(3, 0).is_zero());
        assert!(eng.mu(0, 5).is_zero());
        assert_eq!(eng.mu(2, 7), eng.mu(7, 2));
        for a in 1..11 {
            for b in 1..11 {
                let s = eng.mu(a, b).add(&eng.mu(11 - a, b));
                assert!(s.is_zero(), "antisym {a} {b}");
            }
        }
        // three-term well-definedness on all nonzero triples
        for a in 1..11i64 {
            for b in 1..11i64 {
                let c = (-(a + b)).rem_euclid(11);
                if c == 0 {
                    continue;
                }
                let t = eng.mu(a, b).add(&eng.mu(b, c)).add(&eng.mu(c, a));
                assert!(t.is_zero(), "triple ({a},{b},{c})");
            }
        }
    }

    #[test]
    fn mu_even_level_midpoint() {
        let eng = engine(8);
        assert!(eng.mu(4, 3).is_zero(), "s at 1/2 vanishes identically");
        assert!(!eng.mu(1, 3).is_zero() || eng.toric_dim() == 0);
    }

    #[test]
    fn wl_mu_matches_mu_in_rank() {
        let eng = engine(11);
        assert!(eng.wl_mu(0, 4).is_zero());
        assert!(eng.wl_mu(3, 0).is_zero());
        let s = eng.wl_mu(2, 5).add(&eng.wl_mu(9, 5));
        assert!(s.is_zero());

        let mut mu_rows = Vec::new();
        let mut wl_rows = Vec::new();
        for a in 1..=5i64 {
            for b in a..=5 {
                mu_rows.push(eng.mu(a, b).residual);
                wl_rows.push(eng.wl_mu(a, b).residual);
            }
        }
        let n = eng.prec();
        let rk_mu = Subspace::from_rows(n, mu_rows).dim();
        let rk_wl = Subspace::from_rows(n, wl_rows).dim();
        assert_eq!(rk_mu, rk_wl);
        assert_eq!(rk_mu, eng.toric_dim());
    }

    #[test]
    fn superlattice_enumeration() {
        assert_eq!(superlattices(2).len(), 3);
        assert_eq!(superlattices(3).len(), 4);
        let five = superlattices(5);
        assert_eq!(five.len(), 6);
        // pairwise distinct as subgroups: compare the images in (Z/5)^2 of the
        // 5-scaled lattices
        let fingerprints: Vec<std::collections::BTreeSet<(i64, i64)>> = five
            .iter()
            .map(|basis| {
                let sc = |r: &Rat| (r.clone() * Rat::from(5)).numer().to_i64().unwrap();
                let b = [(sc(&basis[0].0), sc(&basis[0].1)), (sc(&basis[1].0), sc(&basis[1].1))];
                let mut set = std::collections::BTreeSet::new();
                for i in 0..5 {
                    for j in 0..5 {
                        set.insert((
                            (i * b[0].0 + j * b[1].0).rem_euclid(5),
                            (i * b[0].1 + j * b[1].1).rem_euclid(5),
                        ));
                    }
                }
                set
            })
            .collect();
        for i in 0..6 {
            for j in i + 1..6 {
                assert_ne!(fingerprints[i], fingerprints[j], "lattices {i} {j}");
            }
        }
    }

    #[test]
    fn hulls() {
        let z2: LatticeBasis = [(Rat::from(1), Rat::from(0)), (Rat::from(0), Rat::from(1))];
        assert_eq!(
            hull_rays(&z2, 0),
            vec![(Rat::from(1), Rat::from(0)), (Rat::from(0), Rat::from(1))]
        );
        assert_eq!(
            hull_rays(&z2, 1),
            vec![(Rat::from(0), Rat::from(1)), (Rat::from(-1), Rat::from(0))]
        );

        let tall: LatticeBasis = [(Rat::from(1), Rat::from(0)), (Rat::from(0), Rat::from_frac(1, 2))];
        assert_eq!(
            hull_rays(&tall, 0),
            vec![(Rat::from(1), Rat::from(0)), (Rat::from(0), Rat::from_frac(1, 2))]
        );

        let diag: LatticeBasis =
            [(Rat::from_frac(1, 2), Rat::from_frac(1, 2)), (Rat::from(1), Rat::from(0))];
        let h = hull_rays(&diag, 0);
        assert!(h.contains(&(Rat::from_frac(1, 2), Rat::from_frac(1, 2))));
        // consecutive pairs are bases: determinant +-1/2
        for w in h.windows(2) {
            let det = w[0].0.clone() * w[1].1.clone() - w[0].1.clone() * w[1].0.clone();
            assert_eq!(det.abs(), Rat::from_frac(1, 2), "{w:?}");
        }
    }

    #[test]
    fn hulls_reproduce_merel() {
        for p in [2i64, 3, 5] {
            let mut found: Vec<(i64, i64, i64, i64)> = Vec::new();
            for basis in superlattices(p) {
                let h = hull_rays(&basis, 0);
                for w in h.windows(2) {
                    let sc = |r: &Rat| (r.clone() * Rat::from(p)).numer().to_i64().unwrap();
                    found.push((sc(&w[0].0), sc(&w[1].0), sc(&w[0].1), sc(&w[1].1)));
                }
            }
            found.sort();
            let mut want: Vec<(i64, i64, i64, i64)> =
                merel_matrices(p as u64).iter().map(|m| (m.a, m.b, m.c, m.d)).collect();
            want.sort();
            assert_eq!(found, want, "p = {p}");
        }
    }

    #[test]
    fn fan_forms() {
        let eng = engine(11);
        let l = 11i64;
        let sq = |m: i64, n: i64| {
            FanData::new(
                11,
                vec![(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)],
                vec![
                    Rat::from_frac(m, l),
                    Rat::from_frac(n, l),
                    Rat::from_frac(m, l),
                    Rat::from_frac(n, l),
                    Rat::from_frac(m, l),
                ],
            )
            .unwrap()
        };
        let f = eng.fan_form(&sq(2, 3));
        assert_eq!(f, eng.mu(2, 3).scale_int(4));

        // integral degrees contribute nothing
        let trivial = FanData::new(
            11,
            vec![(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)],
            vec![Rat::from(1), Rat::from(2), Rat::from(1), Rat::from(2), Rat::from(1)],
        )
        .unwrap();
        assert!(eng.fan_form(&trivial).is_zero());

        // subdividing the first-quadrant cone with the interpolated degree
        let sub = FanData::new(
            11,
            vec![(1, 0), (1, 1), (0, 1), (-1, 0), (0, -1), (1, 0)],
            vec![
                Rat::from_frac(2, l),
                Rat::from_frac(5, l),
                Rat::from_frac(3, l),
                Rat::from_frac(2, l),
                Rat::from_frac(3, l),
                Rat::from_frac(2, l),
            ],
        )
        .unwrap();
        assert_eq!(eng.fan_form(&sub), f);

        assert!(FanData::new(11, vec![(1, 0), (0, 1)], vec![Rat::from(0); 2]).is_err());
        assert!(FanData::new(
            11,
            vec![(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)],
            vec![Rat::from_frac(1, 3); 5],
        )
        .is_err());
    }

    #[test]
    fn hecke_toric_small() {
        let eng = engine(11);
        let minus = build_space(11, SpaceKind::MMinus);
        // (1,1) itself lands in the Eisenstein span: s_1 s_2 does at level 11
        assert!(eng.mu(1, 2).is_zero());
        assert!(!eng.mu(1, 3).is_zero());
        let mut hit = false;
        for m in 0..11 {
            for n in 0..11 {
                let o = eng.hecke_toric_check(&minus, m, n, 2);
                assert!(o.pass, "({m},{n})");
                hit |= !o.product_route.is_zero();
            }
        }
        assert!(hit, "T_2 cannot kill the whole toric span");

        let eng7 = engine(7);
        let minus7 = build_space(7, SpaceKind::MMinus);
        for m in 0..7 {
            for n in 0..7 {
                let o = eng7.hecke_toric_check(&minus7, m, n, 2);
                assert!(o.pass && o.product_route.is_zero(), "({m},{n})");
            }
        }
    }

    #[test]
    fn winding_series_examples() {
        let mplus = build_space(7, SpaceKind::MPlus);
        let duals = dual_basis(&mplus);
        let n = 12;
        for phi in &duals {
            let r = rho_series(phi, n);
            assert!(Scalar::is_zero(r.coeff(0)));
            let q1 = CycNum::from_rat(7, &phi.eval(0, 1).neg());
            assert_eq!(r.coeff(1), &q1);
            let q2 = phi.eval(0, 2) + phi.eval(1, 2) + phi.eval(0, 1) + phi.eval(0, 1);
            assert_eq!(r.coeff(2), &CycNum::from_rat(7, &q2.neg()));

            let d = discrepancy_series(phi, n);
            let mut b1 = Rat::zero();
            for b in 0..7 {
                b1 = b1 + phi.eval(1, b);
            }
            let want = Rat::from_frac(-2, 3) * phi.eval(1, 0) + Rat::from_frac(-2, 21) * b1;
            assert_eq!(d.coeff(1), &CycNum::from_rat(7, &want));
        }
    }

    #[test]
    fn rho1_minus_rho_is_discrepancy_plus_constant() {
        for l in [5u32, 7] {
            let mplus = build_space(l, SpaceKind::MPlus);
            for phi in dual_basis(&mplus) {
                let n = 16;
                let r1 = rho1_series(&phi, n);
                let r = rho_series(&phi, n);
                let d = discrepancy_series(&phi, n);
                for i in 1..n {
                    let lhs = r1.coeff(i).sub(r.coeff(i));
                    assert_eq!(&lhs, d.coeff(i), "level {l} q^{i}");
                }
            }
        }
    }

    #[test]
    fn discrepancy_is_eisenstein() {
        let eng = engine(11);
        let mplus = build_space(11, SpaceKind::MPlus);
        for phi in dual_basis(&mplus) {
            let d = discrepancy_series(&phi, eng.prec());
            assert!(eng.reduce(&d).is_zero());
        }
    }

    #[test]
    fn eis_part_split() {
        for l in [11u32, 13, 14] {
            let mplus = build_space(l, SpaceKind::MPlus);
            let splus = build_space(l, SpaceKind::SPlus);
            let ep = eis_part(&mplus, &splus).unwrap();
            assert_eq!(ep.prime, if l == 14 { 11 } else { 7 });
            assert_eq!(ep.space.dim() + splus.dim(), mplus.ambient_dim(), "level {l}");
        }
        // genus zero: the complement is everything
        let mplus = build_space(7, SpaceKind::MPlus);
        let splus = build_space(7, SpaceKind::SPlus);
        let ep = eis_part(&mplus, &splus).unwrap();
        assert_eq!(ep.space.dim(), mplus.ambient_dim());
    }

    #[test]
    fn rank_zero_small_levels() {
        let r7 = rank_zero_dims(7, default_prec(7), 24).unwrap();
        assert_eq!((r7.toric_dim, r7.winding_dim), (0, 0));
        assert!(r7.agree);

        let r11 = rank_zero_dims(11, default_prec(11), 32).unwrap();
        assert_eq!((r11.toric_dim, r11.winding_dim), (1, 1));
        assert!(r11.agree);

        let tiny = rank_zero_dims(11, default_prec(11), 3);
        assert!(matches!(tiny, Err(ToricError::SpanNotStabilized { .. })));
    }

    #[test]
    fn minus_image_coincides_with_cuspidal_image() {
        for l in [11u32, 13, 14] {
            let eng = engine(l);
            let minus = build_space(l, SpaceKind::MMinus);
            let sminus = build_space(l, SpaceKind::SMinus);
            let full: Vec<Vec<CycNum>> = (0..minus.ambient_dim())
                .map(|j| {
                    let s = minus.basis_symbol(j);
                    eng.mu(s.u as i64, s.v as i64).residual
                })
                .collect();
            let cusp: Vec<Vec<CycNum>> = sminus
                .sub()
                .unwrap()
                .basis()
                .iter()
                .map(|v| eng.mu_of_class(&minus, v).residual)
                .collect();
            let n = eng.prec();
            let rk_full = Subspace::from_rows(n, full).dim();
            let rk_cusp = Subspace::from_rows(n, cusp).dim();
            assert_eq!(rk_full, rk_cusp, "level {l}");
        }
    }

    #[test]
    fn gamma0_dims() {
        assert_eq!(engine(7).gamma0_products_dim(), 0);
        let eng = engine(11);
        let g = eng.gamma0_products_dim();
        assert_eq!(g, 1);
        assert!(g <= eng.toric_dim());
    }

    #[test]
    fn cache_roundtrip() {
        let eng = engine(11);
        let js = serde_json::to_string(&eng.to_cache()).unwrap();
        let back: EngineCache = serde_json::from_str(&js).unwrap();
        let eng2 = ToricEngine::from_cache(back).unwrap();
        assert_eq!(eng2.toric_dim(), eng.toric_dim());
        assert_eq!(eng2.mu(2, 7), eng.mu(2, 7));

        let mut stale = eng.to_cache();
        stale.version += 1;
        assert!(matches!(
            ToricEngine::from_cache(stale),
            Err(ToricError::CacheMismatch(_))
        ));
    }
}
