//! Small number-theory utilities shared across the crate.

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            if d != n / d {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}

pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn euler_phi(n: u64) -> u64 {
    let mut out = n;
    for (p, _) in factorize(n) {
        out = out / p * (p - 1);
    }
    out
}

pub fn moebius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        return 0;
    }
    if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn is_prime(n: u64) -> bool {
    n > 1 && factorize(n).len() == 1 && factorize(n)[0].1 == 1
}

/// Index of the principal congruence structure driving the Sturm bound:
/// l^2 * prod_{p | l} (1 - 1/p^2).
pub fn level_index(l: u32) -> u64 {
    let l = l as u64;
    let mut num = l * l;
    for (p, _) in factorize(l) {
        num = num / (p * p) * (p * p - 1);
    }
    num
}

/// Weight-2 Sturm bound: agreement of q-expansions up to this depth forces equality.
pub fn sturm_bound(l: u32) -> usize {
    (level_index(l) as usize).div_ceil(6)
}

/// Default working precision: Sturm bound plus margin.
pub fn default_prec(l: u32) -> usize {
    sturm_bound(l) + 2
}

/// Number of canonical symbols (u,v) mod +-1: half the primitive pairs, except tiny levels.
pub fn symbol_count(l: u32) -> u64 {
    match l {
        0 | 1 => 1,
        2 => 3,
        _ => level_index(l) / 2,
    }
}

/// Cusp count of the level-l curve; closed form with the small-level exceptions.
pub fn cusp_count(l: u32) -> usize {
    match l {
        0 => 0,
        1 => 1,
        2 => 2,
        3 => 2,
        4 => 3,
        _ => {
            let l = l as u64;
            let s: u64 = divisors(l).iter().map(|&d| euler_phi(d) * euler_phi(l / d)).sum();
            (s / 2) as usize
        }
    }
}

pub fn sigma1(n: u64) -> u64 {
    divisors(n).iter().sum()
}

// ---- unit group of Z/m and Dirichlet characters (rational trace rows only) ----

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

fn primitive_root_mod_pk(p: u64, k: u32) -> u64 {
    // find a generator mod p, then fix it up so it also generates mod p^2 (then all p^k)
    let order = p - 1;
    let fac = factorize(order);
    let mut g = 2;
    loop {
        if fac.iter().all(|&(q, _)| pow_mod(g, order / q, p) != 1) {
            break;
        }
        g += 1;
    }
    if k == 1 {
        return g;
    }
    let p2 = p * p;
    if pow_mod(g, p - 1, p2) == 1 {
        g += p;
    }
    g
}

/// Generators with orders for (Z/m)^*, CRT-composed so each generator is 1 mod the other factors.
pub fn unit_group_gens(m: u64) -> Vec<(u64, u64)> {
    if m <= 2 {
        return vec![];
    }
    let fac = factorize(m);
    let mut gens = Vec::new();
    for &(p, k) in &fac {
        let pk = p.pow(k);
        let rest = m / pk;
        // lift x mod pk to y = x mod pk, y = 1 mod rest
        let lift = |x: u64| -> u64 {
            if rest == 1 {
                return x % m;
            }
            // y = 1 + rest * t with rest*t = x-1 mod pk
            let inv = (1..pk).find(|&t| rest % pk * t % pk == 1).unwrap();
            let t = (x % pk + pk - 1) % pk * inv % pk;
            (1 + rest * t) % m
        };
        if p == 2 {
            if k == 1 {
                continue;
            }
            gens.push((lift(pk - 1), 2)); // -1
            if k >= 3 {
                gens.push((lift(5 % pk), pk / 4));
            }
        } else {
            let g = primitive_root_mod_pk(p, k) % pk;
            gens.push((lift(g), pk / p * (p - 1)));
        }
    }
    gens
}

/// A Dirichlet character mod `modulus`, with values stored as exponents of a fixed root
/// of unity of order `value_order` (None at non-units).
#[derive(Clone, Debug)]
pub struct DirichletChar {
    pub modulus: u64,
    pub value_order: u64,
    exps: Vec<Option<u64>>, // exps[x] = t with chi(x) = zeta_{value_order}^t
}

impl DirichletChar {
    pub fn exp_at(&self, x: u64) -> Option<u64> {
        self.exps[(x % self.modulus) as usize]
    }

    pub fn is_trivial(&self) -> bool {
        self.exps.iter().all(|e| matches!(e, None | Some(0)))
    }

    pub fn is_even(&self) -> bool {
        self.exp_at(self.modulus - 1) == Some(0)
    }

    /// Smallest f | modulus with chi trivial on units congruent to 1 mod f.
    pub fn conductor(&self) -> u64 {
        'outer: for f in divisors(self.modulus) {
            for x in 1..self.modulus {
                if x % f == 1 % f && gcd(x as i64, self.modulus as i64) == 1 && self.exp_at(x) != Some(0)
                {
                    continue 'outer;
                }
            }
            return f;
        }
        self.modulus
    }

    pub fn order(&self) -> u64 {
        let mut g = self.value_order;
        for e in self.exps.iter().flatten() {
            g = gcd(g as i64, *e as i64) as u64;
            if g == 1 {
                break;
            }
        }
        self.value_order / g
    }
}

/// All characters mod m, enumerated by exponent tuples over the unit-group generators.
pub fn characters_mod(m: u64) -> Vec<DirichletChar> {
    let gens = unit_group_gens(m);
    let value_order = gens.iter().fold(1u64, |a, &(_, o)| a / gcd(a as i64, o as i64) as u64 * o);
    // discrete logs: walk the whole group once
    let ngens = gens.len();
    let mut dlog: Vec<Option<Vec<u64>>> = vec![None; m as usize];
    let mut tuple = vec![0u64; ngens];
    loop {
        let mut x = 1u64;
        for (i, &(g, _)) in gens.iter().enumerate() {
            x = x * pow_mod(g, tuple[i], m) % m;
        }
        dlog[x as usize] = Some(tuple.clone());
        let mut i = 0;
        loop {
            if i == ngens {
                break;
            }
            tuple[i] += 1;
            if tuple[i] < gens[i].1 {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
        if i == ngens {
            break;
        }
    }
    if m == 1 {
        dlog = vec![None];
    }
    let mut out = Vec::new();
    let mut etuple = vec![0u64; ngens];
    loop {
        let mut exps = vec![None; m as usize];
        for x in 0..m {
            if let Some(ds) = &dlog[x as usize] {
                let mut t = 0u64;
                for i in 0..ngens {
                    t = (t + etuple[i] * ds[i] % gens[i].1 * (value_order / gens[i].1)) % value_order;
                }
                exps[x as usize] = Some(t);
            }
        }
        if m == 1 {
            exps = vec![Some(0)];
        }
        out.push(DirichletChar { modulus: m, value_order, exps });
        let mut i = 0;
        loop {
            if i == ngens {
                break;
            }
            etuple[i] += 1;
            if etuple[i] < gens[i].1 {
                break;
            }
            etuple[i] = 0;
            i += 1;
        }
        if i == ngens {
            break;
        }
    }
    out
}

/// Trace of zeta_m^r from the m-th cyclotomic field down to Q (Ramanujan sum at 1):
/// mu(m/g) * phi(m) / phi(m/g), g = gcd(r, m).
pub fn ramanujan_trace(m: u64, r: u64) -> i64 {
    let g = gcd((r % m) as i64, m as i64) as u64;
    let n = m / g;
    moebius(n) * (euler_phi(m) / euler_phi(n)) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(euler_phi(12), 4);
        assert_eq!(moebius(6), 1);
        assert_eq!(moebius(12), 0);
        assert_eq!(moebius(30), -1);
        assert_eq!(sigma1(4), 7);
    }

    #[test]
    fn level_constants() {
        assert_eq!(level_index(5), 24);
        assert_eq!(level_index(11), 120);
        assert_eq!(level_index(25), 600);
        assert_eq!(default_prec(5), 6);
        assert_eq!(default_prec(11), 22);
        assert_eq!(default_prec(25), 102);
        assert_eq!(symbol_count(2), 3);
        assert_eq!(symbol_count(3), 4);
        assert_eq!(symbol_count(5), 12);
        assert_eq!(symbol_count(25), 300);
    }

    #[test]
    fn cusp_counts() {
        let want = [
            (2, 2),
            (3, 2),
            (4, 3),
            (5, 4),
            (6, 4),
            (7, 6),
            (8, 6),
            (9, 8),
            (10, 8),
            (11, 10),
            (12, 10),
            (13, 12),
            (14, 12),
            (15, 16),
            (16, 14),
            (17, 16),
            (25, 28),
        ];
        for (l, c) in want {
            assert_eq!(cusp_count(l), c, "level {l}");
        }
    }

    #[test]
    fn unit_groups() {
        for m in [3u64, 4, 5, 7, 8, 9, 12, 15, 16, 24, 25] {
            let gens = unit_group_gens(m);
            let ord: u64 = gens.iter().map(|&(_, o)| o).product();
            assert_eq!(ord, euler_phi(m), "group order mod {m}");
            for &(g, o) in &gens {
                assert_eq!(pow_mod(g, o, m), 1);
                for (q, _) in factorize(o) {
                    assert_ne!(pow_mod(g, o / q, m), 1, "order of {g} mod {m} not {o}");
                }
            }
        }
    }

    #[test]
    fn characters() {
        for m in [3u64, 4, 5, 8, 9, 12, 25] {
            let chars = characters_mod(m);
            assert_eq!(chars.len() as u64, euler_phi(m), "char count mod {m}");
            let prim: Vec<_> = chars.iter().filter(|c| c.conductor() == m).collect();
            // primitive character counts: sum over chars of [conductor == m]
            let prim_count: u64 = divisors(m)
                .iter()
                .map(|&f| moebius(m / f) * euler_phi(f) as i64)
                .sum::<i64>() as u64;
            assert_eq!(prim.len() as u64, prim_count, "primitive count mod {m}");
        }
        // multiplicativity spot check mod 5
        let chars = characters_mod(5);
        for ch in &chars {
            for a in 1..5u64 {
                for b in 1..5u64 {
                    let s = (ch.exp_at(a).unwrap() + ch.exp_at(b).unwrap()) % ch.value_order;
                    assert_eq!(ch.exp_at(a * b % 5).unwrap(), s);
                }
            }
        }
    }

    #[test]
    fn traces() {
        assert_eq!(ramanujan_trace(1, 0), 1);
        assert_eq!(ramanujan_trace(4, 1), 0); // tr(i) = 0
        assert_eq!(ramanujan_trace(4, 2), -2); // tr(-1) over Q(i)
        assert_eq!(ramanujan_trace(3, 1), -1);
        assert_eq!(ramanujan_trace(5, 0), 4);
        assert_eq!(ramanujan_trace(5, 1), -1);
    }
}
