//! Symbol spaces for the level-l congruence quotient: the full space M, its
//! plus/minus symmetrizations, the cuspidal kernels S, S+, S-, boundary and
//! cusp bookkeeping, dual functionals, and the pi maps back into the space.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::gcd;
use crate::field::{Rat, Scalar};
use crate::linalg::{kernel_basis, rref_in_place, Subspace};

/// Coset symbol (u,v) mod l, canonical under (u,v) ~ (-u,-v).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Symbol {
    pub u: u32,
    pub v: u32,
}

/// Canonical representative: the lexicographically smaller of (u,v), (-u,-v) in [0,l).
pub fn canon(l: u32, u: i64, v: i64) -> Symbol {
    let l = l as i64;
    let (u, v) = (u.rem_euclid(l), v.rem_euclid(l));
    let (nu, nv) = ((-u).rem_euclid(l), (-v).rem_euclid(l));
    if (u, v) <= (nu, nv) {
        Symbol { u: u as u32, v: v as u32 }
    } else {
        Symbol { u: nu as u32, v: nv as u32 }
    }
}

pub fn is_coset(l: u32, u: i64, v: i64) -> bool {
    let l = l as i64;
    gcd(gcd(u, v), l) == 1
}

pub fn sigma(l: u32, x: Symbol) -> Symbol {
    canon(l, x.v as i64, -(x.u as i64))
}

pub fn tau(l: u32, x: Symbol) -> Symbol {
    canon(l, x.v as i64, -(x.u as i64) - x.v as i64)
}

pub fn iota(l: u32, x: Symbol) -> Symbol {
    canon(l, -(x.u as i64), x.v as i64)
}

/// One canonical symbol per coset, sorted.
pub fn enumerate_cosets(l: u32) -> Vec<Symbol> {
    assert!(l > 1, "level must exceed 1");
    let mut out = Vec::new();
    for u in 0..l {
        for v in 0..l {
            if !is_coset(l, u as i64, v as i64) {
                continue;
            }
            let c = canon(l, u as i64, v as i64);
            if (c.u, c.v) == (u, v) {
                out.push(c);
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    #[serde(rename = "M")]
    M,
    #[serde(rename = "M+")]
    MPlus,
    #[serde(rename = "M-")]
    MMinus,
    #[serde(rename = "S")]
    S,
    #[serde(rename = "S+")]
    SPlus,
    #[serde(rename = "S-")]
    SMinus,
}

impl SpaceKind {
    pub fn is_cuspidal(self) -> bool {
        matches!(self, SpaceKind::S | SpaceKind::SPlus | SpaceKind::SMinus)
    }

    /// The ambient quotient kind: cuspidal kinds sit inside their M-kind.
    pub fn parent(self) -> SpaceKind {
        match self {
            SpaceKind::S => SpaceKind::M,
            SpaceKind::SPlus => SpaceKind::MPlus,
            SpaceKind::SMinus => SpaceKind::MMinus,
            k => k,
        }
    }

    /// +1 / -1 for symmetrized kinds, None for the full space.
    pub fn sign(self) -> Option<i64> {
        match self.parent() {
            SpaceKind::MPlus => Some(1),
            SpaceKind::MMinus => Some(-1),
            _ => None,
        }
    }

    pub const ALL: [SpaceKind; 6] = [
        SpaceKind::M,
        SpaceKind::MPlus,
        SpaceKind::MMinus,
        SpaceKind::S,
        SpaceKind::SPlus,
        SpaceKind::SMinus,
    ];
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceKind::M => "M",
            SpaceKind::MPlus => "M+",
            SpaceKind::MMinus => "M-",
            SpaceKind::S => "S",
            SpaceKind::SPlus => "S+",
            SpaceKind::SMinus => "S-",
        };
        f.write_str(s)
    }
}

impl FromStr for SpaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "M" => Ok(SpaceKind::M),
            "M+" => Ok(SpaceKind::MPlus),
            "M-" => Ok(SpaceKind::MMinus),
            "S" => Ok(SpaceKind::S),
            "S+" => Ok(SpaceKind::SPlus),
            "S-" => Ok(SpaceKind::SMinus),
            _ => Err(format!("unknown space kind {s:?} (want M, M+, M-, S, S+ or S-)")),
        }
    }
}

// ------------------------------------------------------------------- cusps

/// Cusp classes of the level-l curve, found by classifying the endpoints of
/// every symbol path under the standard equivalence.
#[derive(Clone, Debug)]
pub struct Cusps {
    pub level: u32,
    reps: Vec<(i64, i64)>,
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - (a.div_euclid(b)) * y)
    }
}

fn norm_fraction(p: i64, q: i64) -> (i64, i64) {
    let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
    if q == 0 {
        return (1, 0);
    }
    let g = gcd(p, q);
    (p / g, q / g)
}

/// The two cusps of the path attached to a symbol, as reduced fractions
/// (numerator, denominator), with (1,0) for the infinite cusp.
pub fn endpoints(l: u32, x: Symbol) -> ((i64, i64), (i64, i64)) {
    let l = l as i64;
    let vv = if x.v == 0 { l } else { x.v as i64 };
    let mut uu = x.u as i64;
    while gcd(uu, vv) != 1 {
        uu += l;
    }
    // a*vv - b*uu = 1; the lifted matrix has rows (a,b) and (uu,vv)
    let (g, s, t) = ext_gcd(uu, vv);
    debug_assert_eq!(g, 1);
    let (a, b) = (t, -s);
    (norm_fraction(b, vv), norm_fraction(a, uu))
}

/// (a,c) ~ (a',c') iff for some sign s: c' = s c mod l and a' = s a mod gcd(c,l).
fn cusp_eq(l: u32, x: (i64, i64), y: (i64, i64)) -> bool {
    let l = l as i64;
    let (a, c) = x;
    let (a2, c2) = y;
    for s in [1i64, -1] {
        if (c2 - s * c).rem_euclid(l) != 0 {
            continue;
        }
        let g = gcd(c.rem_euclid(l), l);
        let g = if g == 0 { l } else { g };
        if (a2 - s * a).rem_euclid(g) == 0 {
            return true;
        }
    }
    false
}

impl Cusps {
    pub fn build(l: u32, symbols: &[Symbol]) -> Cusps {
        let mut reps: Vec<(i64, i64)> = Vec::new();
        for &x in symbols {
            let (g0, gi) = endpoints(l, x);
            for c in [g0, gi] {
                if !reps.iter().any(|&r| cusp_eq(l, r, c)) {
                    reps.push(c);
                }
            }
        }
        Cusps { level: l, reps }
    }

    pub fn count(&self) -> usize {
        self.reps.len()
    }

    pub fn reps(&self) -> &[(i64, i64)] {
        &self.reps
    }

    pub fn classify(&self, c: (i64, i64)) -> usize {
        self.reps
            .iter()
            .position(|&r| cusp_eq(self.level, r, c))
            .expect("every cusp is equivalent to a listed representative")
    }
}

// ------------------------------------------------------------------ spaces

/// A quotient of the formal span of coset symbols by the two- and three-term
/// relations (plus the sign relation for symmetrized kinds), together with the
/// boundary map and, for cuspidal kinds, the kernel subspace.
///
/// Coordinates handed out by `class_of` always live in the ambient quotient
/// (the parent M-kind); cuspidal kinds additionally know their subspace basis.
#[derive(Clone, Debug)]
pub struct ManinSpace {
    pub level: u32,
    pub kind: SpaceKind,
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
    basis_syms: Vec<usize>,
    proj: Vec<Vec<Rat>>,
    brows: Vec<Vec<Rat>>,
    cusps: Cusps,
    sub: Option<Subspace<Rat>>,
}

pub fn build_space(l: u32, kind: SpaceKind) -> ManinSpace {
    let symbols = enumerate_cosets(l);
    let n = symbols.len();
    let index: HashMap<Symbol, usize> = symbols.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let sign = kind.sign();

    let mut rel: Vec<Vec<Rat>> = Vec::with_capacity(3 * n);
    for &x in &symbols {
        let mut r = vec![Rat::zero(); n];
        for i in [index[&x], index[&sigma(l, x)]] {
            r[i] = r[i].clone() + Rat::one();
        }
        rel.push(r);

        let mut r = vec![Rat::zero(); n];
        let t = tau(l, x);
        for i in [index[&x], index[&t], index[&tau(l, t)]] {
            r[i] = r[i].clone() + Rat::one();
        }
        rel.push(r);

        if let Some(s) = sign {
            let mut r = vec![Rat::zero(); n];
            r[index[&x]] = r[index[&x]].clone() + Rat::one();
            let i = index[&iota(l, x)];
            r[i] = r[i].clone() - Rat::from(s);
            rel.push(r);
        }
    }

    let mut ech = rel;
    let pivots = rref_in_place(&mut ech);
    let pivrow: HashMap<usize, usize> = pivots.iter().enumerate().map(|(r, &c)| (c, r)).collect();
    let basis_syms: Vec<usize> = (0..n).filter(|j| !pivrow.contains_key(j)).collect();
    let qdim = basis_syms.len();

    let mut proj: Vec<Vec<Rat>> = Vec::with_capacity(n);
    for j in 0..n {
        if let Some(&r) = pivrow.get(&j) {
            proj.push(basis_syms.iter().map(|&f| ech[r][f].neg()).collect());
        } else {
            let k = basis_syms.iter().position(|&f| f == j).unwrap();
            let mut v = vec![Rat::zero(); qdim];
            v[k] = Rat::one();
            proj.push(v);
        }
    }

    let cusps = Cusps::build(l, &symbols);
    let nc = cusps.count();
    let delta = |x: Symbol| -> Vec<Rat> {
        let (g0, gi) = endpoints(l, x);
        let mut v = vec![Rat::zero(); nc];
        let i = cusps.classify(gi);
        v[i] = v[i].clone() + Rat::one();
        let i = cusps.classify(g0);
        v[i] = v[i].clone() - Rat::one();
        v
    };
    // the boundary respects the sign relation only after symmetrizing with iota
    let brows: Vec<Vec<Rat>> = basis_syms
        .iter()
        .map(|&j| {
            let f = symbols[j];
            match sign {
                None => delta(f),
                Some(s) => {
                    let b1 = delta(f);
                    let b2 = delta(iota(l, f));
                    let half = Rat::from_frac(1, 2);
                    b1.iter()
                        .zip(&b2)
                        .map(|(p, q)| (p.clone() + q.clone() * Rat::from(s)) * half.clone())
                        .collect()
                }
            }
        })
        .collect();

    let sub = kind.is_cuspidal().then(|| {
        let rows: Vec<Vec<Rat>> =
            (0..nc).map(|c| (0..qdim).map(|j| brows[j][c].clone()).collect()).collect();
        Subspace::from_rows(qdim, kernel_basis(&rows, qdim, &Rat::one()))
    });

    ManinSpace { level: l, kind, symbols, index, basis_syms, proj, brows, cusps, sub }
}

impl ManinSpace {
    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Dimension of the ambient quotient (the parent M-kind).
    pub fn ambient_dim(&self) -> usize {
        self.basis_syms.len()
    }

    /// Dimension of the space itself (the kernel for cuspidal kinds).
    pub fn dim(&self) -> usize {
        match &self.sub {
            Some(s) => s.dim(),
            None => self.ambient_dim(),
        }
    }

    /// The symbol whose class is the j-th ambient basis vector.
    pub fn basis_symbol(&self, j: usize) -> Symbol {
        self.symbols[self.basis_syms[j]]
    }

    /// Ambient coordinates of the class of (u,v); degenerate pairs map to zero.
    pub fn class_of(&self, u: i64, v: i64) -> Vec<Rat> {
        if !is_coset(self.level, u, v) {
            return vec![Rat::zero(); self.ambient_dim()];
        }
        self.proj[self.index[&canon(self.level, u, v)]].clone()
    }

    /// The class of the path from 0 to the infinite cusp: the symbol (0,1).
    pub fn winding(&self) -> Vec<Rat> {
        self.class_of(0, 1)
    }

    pub fn cusps(&self) -> &Cusps {
        &self.cusps
    }

    /// Boundary of an ambient vector, as multiplicities over cusp classes.
    /// For symmetrized kinds this is the iota-symmetrized boundary.
    pub fn boundary(&self, ambient: &[Rat]) -> Vec<Rat> {
        assert_eq!(ambient.len(), self.ambient_dim());
        let mut out = vec![Rat::zero(); self.cusps.count()];
        for (c, row) in ambient.iter().zip(&self.brows) {
            if c.is_zero() {
                continue;
            }
            for (o, b) in out.iter_mut().zip(row) {
                *o = o.clone() + c.clone() * b.clone();
            }
        }
        out
    }

    /// The subspace basis inside the ambient quotient, for cuspidal kinds.
    pub fn sub(&self) -> Option<&Subspace<Rat>> {
        self.sub.as_ref()
    }

    /// Express an ambient vector in the cuspidal basis; None if outside.
    /// For non-cuspidal kinds this is the identity.
    pub fn to_self_coords(&self, ambient: &[Rat]) -> Option<Vec<Rat>> {
        match &self.sub {
            Some(s) => s.coords_of(ambient),
            None => Some(ambient.to_vec()),
        }
    }

    /// Ambient coordinates of a vector given in the space's own basis.
    pub fn to_ambient(&self, own: &[Rat]) -> Vec<Rat> {
        match &self.sub {
            Some(s) => {
                assert_eq!(own.len(), s.dim());
                let mut out = vec![Rat::zero(); self.ambient_dim()];
                for (c, row) in own.iter().zip(s.basis()) {
                    for (o, b) in out.iter_mut().zip(row) {
                        *o = o.clone() + c.clone() * b.clone();
                    }
                }
                out
            }
            None => own.to_vec(),
        }
    }

    /// Image of an ambient vector under the involution (u,v) -> (-u,v).
    pub fn apply_iota(&self, ambient: &[Rat]) -> Vec<Rat> {
        assert_eq!(ambient.len(), self.ambient_dim());
        let mut out = vec![Rat::zero(); self.ambient_dim()];
        for (j, c) in ambient.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let f = iota(self.level, self.basis_symbol(j));
            for (o, b) in out.iter_mut().zip(&self.proj[self.index[&f]]) {
                *o = o.clone() + c.clone() * b.clone();
            }
        }
        out
    }

    /// The projector (1 + iota)/2; only meaningful on the full space M.
    pub fn sym_plus(&self, ambient: &[Rat]) -> Vec<Rat> {
        let half = Rat::from_frac(1, 2);
        let i = self.apply_iota(ambient);
        ambient.iter().zip(i).map(|(a, b)| (a.clone() + b) * half.clone()).collect()
    }

    /// The projector (1 - iota)/2.
    pub fn sym_minus(&self, ambient: &[Rat]) -> Vec<Rat> {
        let half = Rat::from_frac(1, 2);
        let i = self.apply_iota(ambient);
        ambient.iter().zip(i).map(|(a, b)| (a.clone() - b) * half.clone()).collect()
    }
}

// ------------------------------------------------------------------- duals

/// A functional on coset symbols satisfying the two- and three-term dual
/// constraints; values extend by zero to degenerate pairs.
#[derive(Clone, Debug)]
pub struct DualVec {
    pub level: u32,
    values: HashMap<Symbol, Rat>,
}

impl DualVec {
    pub fn zero(level: u32) -> Self {
        DualVec { level, values: HashMap::new() }
    }

    pub fn from_values(level: u32, symbols: &[Symbol], vals: &[Rat]) -> Self {
        assert_eq!(symbols.len(), vals.len());
        let values = symbols.iter().copied().zip(vals.iter().cloned()).collect();
        DualVec { level, values }
    }

    /// lambda at (u,v); zero on degenerate pairs by convention.
    pub fn eval(&self, u: i64, v: i64) -> Rat {
        if !is_coset(self.level, u, v) {
            return Rat::zero();
        }
        self.values.get(&canon(self.level, u, v)).cloned().unwrap_or_else(Rat::zero)
    }

    /// The iota-symmetrized value (lambda(u,v) + lambda(-u,v)) / 2.
    pub fn eval_plus(&self, u: i64, v: i64) -> Rat {
        (self.eval(u, v) + self.eval(-u, v)) * Rat::from_frac(1, 2)
    }

    /// Pullback along iota: the functional x -> lambda(iota x).
    pub fn twist_iota(&self) -> DualVec {
        let l = self.level;
        let values = self
            .values
            .iter()
            .map(|(&x, v)| (iota(l, x), v.clone()))
            .collect();
        DualVec { level: l, values }
    }

    /// Both dual constraints, checked exhaustively.
    pub fn satisfies_constraints(&self, symbols: &[Symbol]) -> bool {
        let l = self.level;
        symbols.iter().all(|&x| {
            let two = self.eval_sym(x) + self.eval_sym(sigma(l, x));
            let t = tau(l, x);
            let three = self.eval_sym(x) + self.eval_sym(t) + self.eval_sym(tau(l, t));
            two.is_zero() && three.is_zero()
        })
    }

    fn eval_sym(&self, x: Symbol) -> Rat {
        self.eval(x.u as i64, x.v as i64)
    }
}

/// The pairing of a functional with a symbol: just lambda at that symbol.
pub fn pairing(phi: &DualVec, u: i64, v: i64) -> Rat {
    phi.eval(u, v)
}

/// Basis of the dual constraint space of an M or M+ space.
pub fn dual_basis(space: &ManinSpace) -> Vec<DualVec> {
    assert!(
        matches!(space.kind, SpaceKind::M | SpaceKind::MPlus),
        "duals are built on M or M+"
    );
    let l = space.level;
    let syms = &space.symbols;
    let n = syms.len();
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(3 * n);
    for &x in syms {
        let mut r = vec![Rat::zero(); n];
        for i in [space.index[&x], space.index[&sigma(l, x)]] {
            r[i] = r[i].clone() + Rat::one();
        }
        rows.push(r);

        let mut r = vec![Rat::zero(); n];
        let t = tau(l, x);
        for i in [space.index[&x], space.index[&t], space.index[&tau(l, t)]] {
            r[i] = r[i].clone() + Rat::one();
        }
        rows.push(r);

        if space.kind == SpaceKind::MPlus {
            let mut r = vec![Rat::zero(); n];
            r[space.index[&x]] = r[space.index[&x]].clone() + Rat::one();
            let i = space.index[&iota(l, x)];
            r[i] = r[i].clone() - Rat::one();
            rows.push(r);
        }
    }
    kernel_basis(&rows, n, &Rat::one())
        .into_iter()
        .map(|v| DualVec::from_values(l, syms, &v))
        .collect()
}

// ------------------------------------------------------------------ pi maps

/// pi of a functional on M: (1/6) sum over cosets x of
/// (lambda_{x tau} - lambda_{x tau^2}) times the class of x. Lands in S.
pub fn pi_full(space: &ManinSpace, phi: &DualVec) -> Vec<Rat> {
    pi_full_impl(space, phi, false)
}

/// Same map written with the sigma-tau-sigma twist in the first term;
/// provably equal to `pi_full`.
pub fn pi_full_alt(space: &ManinSpace, phi: &DualVec) -> Vec<Rat> {
    pi_full_impl(space, phi, true)
}

fn pi_full_impl(space: &ManinSpace, phi: &DualVec, alt: bool) -> Vec<Rat> {
    assert_eq!(space.kind, SpaceKind::M, "pi acts on functionals of the full space");
    assert!(
        phi.satisfies_constraints(&space.symbols),
        "functional violates the dual constraints"
    );
    let l = space.level;
    let sixth = Rat::from_frac(1, 6);
    let mut out = vec![Rat::zero(); space.ambient_dim()];
    for &x in &space.symbols {
        let first = if alt {
            phi.eval_sym(sigma(l, tau(l, sigma(l, x))))
        } else {
            phi.eval_sym(tau(l, x))
        };
        let t = tau(l, tau(l, x));
        let w = (first - phi.eval_sym(t)) * sixth.clone();
        if w.is_zero() {
            continue;
        }
        for (o, b) in out.iter_mut().zip(&space.proj[space.index[&x]]) {
            *o = o.clone() + w.clone() * b.clone();
        }
    }
    out
}

/// pi of a functional on M+ straight into the minus space:
/// (1/12) sum over a,b mod l of (phi_+(a,a-b) - phi_+(a,a+b)) times the
/// minus-class of (a,b). Returns ambient M- coordinates; the image lies in S-.
pub fn pi_map(minus: &ManinSpace, phi: &DualVec) -> Vec<Rat> {
    assert_eq!(minus.kind.parent(), SpaceKind::MMinus, "pi_map lands in the minus space");
    assert_eq!(minus.level, phi.level);
    let l = minus.level as i64;
    let twelfth = Rat::from_frac(1, 12);
    let mut out = vec![Rat::zero(); minus.ambient_dim()];
    for a in 0..l {
        for b in 0..l {
            let w = (phi.eval_plus(a, a - b) - phi.eval_plus(a, a + b)) * twelfth.clone();
            if w.is_zero() {
                continue;
            }
            let cls = minus.class_of(a, b);
            for (o, c) in out.iter_mut().zip(&cls) {
                *o = o.clone() + w.clone() * c.clone();
            }
        }
    }
    out
}
