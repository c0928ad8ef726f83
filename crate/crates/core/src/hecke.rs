//! The n-th Hecke operator on symbol spaces, realized by Merel's finite list
//! of integer matrices, plus span growth for Hecke modules.

use std::collections::BTreeMap;

use crate::arith::sturm_bound;
use crate::field::{Rat, Scalar};
use crate::linalg::{axpy, Mat, Subspace};
use crate::manin::{canon, is_coset, DualVec, ManinSpace, Symbol};

/// Integer matrix (a b; c d) with ad - bc = n, a > b >= 0, d > c >= 0.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MerelMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

/// The complete list for index n, ordered by (a, b, c).
pub fn merel_matrices(n: u64) -> Vec<MerelMatrix> {
    assert!(n >= 1, "operator index must be positive");
    let n = n as i64;
    let mut out = Vec::new();
    for a in 1..=n {
        for b in 0..a {
            let mut c = 0;
            while (a - b) * c < n {
                if (n + b * c) % a == 0 {
                    let d = (n + b * c) / a;
                    if d > c {
                        out.push(MerelMatrix { a, b, c, d });
                    }
                }
                c += 1;
            }
        }
    }
    out
}

/// Formal sum of the images of (u,v) under the index-n matrices, as canonical
/// symbols with multiplicities; degenerate images are omitted (which only
/// happens when gcd(n, l) > 1).
pub fn hecke_symbol(n: u64, x: Symbol, l: u32) -> Vec<(Symbol, i64)> {
    let (u, v) = (x.u as i64, x.v as i64);
    let mut acc: BTreeMap<Symbol, i64> = BTreeMap::new();
    for m in merel_matrices(n) {
        let (iu, iv) = (m.a * u + m.c * v, m.b * u + m.d * v);
        if is_coset(l, iu, iv) {
            *acc.entry(canon(l, iu, iv)).or_insert(0) += 1;
        }
    }
    acc.into_iter().collect()
}

/// Image of an ambient vector under the index-n operator, staying in ambient
/// coordinates. Degenerate images drop out through the zero class.
pub fn apply_hecke(space: &ManinSpace, n: u64, v: &[Rat]) -> Vec<Rat> {
    assert_eq!(v.len(), space.ambient_dim());
    let mats = merel_matrices(n);
    let mut out = vec![Rat::zero(); space.ambient_dim()];
    for (j, c) in v.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let f = space.basis_symbol(j);
        let (u, w) = (f.u as i64, f.v as i64);
        for m in &mats {
            let img = space.class_of(m.a * u + m.c * w, m.b * u + m.d * w);
            axpy(&mut out, c, &img);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct HeckeOp {
    pub n: u64,
    pub level: u32,
    pub mat: Mat<Rat>,
}

/// Matrix of the index-n operator in the space's own basis. For cuspidal kinds
/// the ambient action is restricted to the kernel subspace.
pub fn hecke_matrix(n: u64, space: &ManinSpace) -> HeckeOp {
    let dim = space.dim();
    let mut mat = Mat::zero(dim, dim, &Rat::zero());
    match space.sub() {
        None => {
            for j in 0..dim {
                let mut e = vec![Rat::zero(); dim];
                e[j] = Rat::one();
                for (i, x) in apply_hecke(space, n, &e).into_iter().enumerate() {
                    *mat.at_mut(i, j) = x;
                }
            }
        }
        Some(sub) => {
            for (j, row) in sub.basis().iter().enumerate() {
                let img = apply_hecke(space, n, row);
                let coords = space
                    .to_self_coords(&img)
                    .expect("the operator preserves the cuspidal subspace");
                for (i, x) in coords.into_iter().enumerate() {
                    *mat.at_mut(i, j) = x;
                }
            }
        }
    }
    HeckeOp { n, level: space.level, mat }
}

/// Pullback of a functional along the index-n operator: x -> sum of lambda at
/// the images of x.
pub fn hecke_dual(n: u64, phi: &DualVec, symbols: &[Symbol]) -> DualVec {
    let l = phi.level;
    let vals: Vec<Rat> = symbols
        .iter()
        .map(|&x| {
            let mut acc = Rat::zero();
            for (s, m) in hecke_symbol(n, x, l) {
                acc = acc + phi.eval(s.u as i64, s.v as i64) * Rat::from(m);
            }
            acc
        })
        .collect();
    DualVec::from_values(l, symbols, &vals)
}

#[derive(Clone, Debug)]
pub struct HeckeSpan {
    pub span: Subspace<Rat>,
    /// False when the budget ran out before the growth went quiet.
    pub stabilized: bool,
    pub reached: u64,
}

/// Span of the operator translates of a seed vector, in ambient coordinates.
/// Growth stops once the dimension is unchanged for 5 consecutive indices and
/// the Sturm depth has been passed.
pub fn hecke_span(space: &ManinSpace, seed: &[Rat], budget: u64) -> HeckeSpan {
    let sturm = sturm_bound(space.level) as u64;
    let ambient = space.ambient_dim();
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    let mut span = Subspace::zero(ambient);
    let mut quiet = 0u64;
    for n in 1..=budget {
        let v = apply_hecke(space, n, seed);
        if span.contains(&v) {
            quiet += 1;
        } else {
            rows.push(v);
            span = Subspace::from_rows(ambient, rows.clone());
            quiet = 0;
        }
        if quiet >= 5 && n >= sturm {
            return HeckeSpan { span, stabilized: true, reached: n };
        }
    }
    HeckeSpan { span, stabilized: false, reached: budget }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manin::{build_space, dual_basis, SpaceKind};

    #[test]
    fn merel_lists() {
        assert_eq!(merel_matrices(1), vec![MerelMatrix { a: 1, b: 0, c: 0, d: 1 }]);
        let m2 = merel_matrices(2);
        assert_eq!(
            m2,
            vec![
                MerelMatrix { a: 1, b: 0, c: 0, d: 2 },
                MerelMatrix { a: 1, b: 0, c: 1, d: 2 },
                MerelMatrix { a: 2, b: 0, c: 0, d: 1 },
                MerelMatrix { a: 2, b: 1, c: 0, d: 1 },
            ]
        );
        assert_eq!(merel_matrices(3).len(), 7);
        for n in 1..=20u64 {
            for m in merel_matrices(n) {
                assert_eq!((m.a * m.d - m.b * m.c) as u64, n);
                assert!(m.a > m.b && m.b >= 0);
                assert!(m.d > m.c && m.c >= 0);
            }
        }
    }

    #[test]
    fn symbol_action() {
        let x = canon(5, 0, 1);
        let sum = hecke_symbol(2, x, 5);
        assert_eq!(
            sum,
            vec![(canon(5, 0, 1), 2), (canon(5, 0, 2), 1), (canon(5, 1, 2), 1)]
        );

        // two of the four images have gcd 2 with the level and drop out
        let sum = hecke_symbol(2, canon(6, 1, 1), 6);
        assert_eq!(sum, vec![(canon(6, 1, 2), 1), (canon(6, 2, 1), 1)]);

        for &x in &crate::manin::enumerate_cosets(7) {
            assert_eq!(hecke_symbol(1, x, 7), vec![(x, 1)]);
        }
    }

    #[test]
    fn identity_operator() {
        for kind in SpaceKind::ALL {
            let sp = build_space(7, kind);
            let op = hecke_matrix(1, &sp);
            assert_eq!(op.mat, Mat::identity(sp.dim(), &Rat::one()), "T_1 on {kind}");
        }
    }

    #[test]
    fn eigenvalue_on_splus_11() {
        let sp = build_space(11, SpaceKind::SPlus);
        assert_eq!(sp.dim(), 1);
        let op = hecke_matrix(2, &sp);
        assert_eq!(*op.mat.at(0, 0), Rat::from(-2));
    }

    #[test]
    fn multiplicativity() {
        for l in [7u32, 11] {
            let m = build_space(l, SpaceKind::M);
            let t = |n: u64| hecke_matrix(n, &m).mat;
            let (t2, t3) = (t(2), t(3));
            assert_eq!(t2.matmul(&t3), t(6));
            assert_eq!(t3.matmul(&t2), t(6));
            assert_eq!(t2.matmul(&t(5)), t(10));
            assert_eq!(t3.matmul(&t(4)), t(12));
        }
    }

    #[test]
    fn dual_action_preserves_constraints() {
        for l in [7u32, 11, 13] {
            let m = build_space(l, SpaceKind::M);
            let duals = dual_basis(&m);
            for n in 1..=12u64 {
                for phi in &duals {
                    let psi = hecke_dual(n, phi, m.symbols());
                    assert!(psi.satisfies_constraints(m.symbols()), "T_{n} dual at {l}");
                }
            }
        }
    }

    #[test]
    fn iota_commutes_when_coprime() {
        let l = 7;
        let m = build_space(l, SpaceKind::M);
        for n in [2u64, 3, 5, 11] {
            for j in 0..m.ambient_dim() {
                let mut e = vec![Rat::zero(); m.ambient_dim()];
                e[j] = Rat::one();
                let a = m.apply_iota(&apply_hecke(&m, n, &e));
                let b = apply_hecke(&m, n, &m.apply_iota(&e));
                assert_eq!(a, b, "iota and T_{n}");
            }
        }
    }

    #[test]
    fn cuspidal_preservation() {
        // includes indices sharing a factor with the level
        for l in [14u32, 15] {
            for kind in [SpaceKind::S, SpaceKind::SPlus, SpaceKind::SMinus] {
                let sp = build_space(l, kind);
                for n in 1..=10u64 {
                    for row in sp.sub().unwrap().basis() {
                        let img = apply_hecke(&sp, n, row);
                        assert!(
                            sp.to_self_coords(&img).is_some(),
                            "T_{n} leaves {kind} at {l}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn span_growth() {
        let m5 = build_space(5, SpaceKind::M);
        let zero = vec![Rat::zero(); m5.ambient_dim()];
        let hs = hecke_span(&m5, &zero, 40);
        assert!(hs.stabilized && hs.span.dim() == 0);

        let hs = hecke_span(&m5, &m5.winding(), 40);
        assert!(hs.stabilized);
        assert!(hs.span.dim() <= 3);

        // level 11: the winding translates inside M+ meet the cusp forms fully
        let mp = build_space(11, SpaceKind::MPlus);
        let sp = build_space(11, SpaceKind::SPlus);
        let hs = hecke_span(&mp, &mp.winding(), 60);
        assert!(hs.stabilized);
        let meet = hs.span.intersect(sp.sub().unwrap());
        assert_eq!(meet.dim(), 1);

        // budget too small to go quiet
        let hs = hecke_span(&mp, &mp.winding(), 3);
        assert!(!hs.stabilized && hs.reached == 3);
    }
}
