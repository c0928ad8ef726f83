//! Dense exact linear algebra over any `Scalar` field: reduced echelon forms,
//! kernels, span arithmetic, characteristic polynomials.

use crate::field::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn zero(rows: usize, cols: usize, like: &S) -> Self {
        Mat { rows, cols, data: vec![like.zero_like(); rows * cols] }
    }

    pub fn identity(n: usize, like: &S) -> Self {
        let mut m = Self::zero(n, n, like);
        for i in 0..n {
            *m.at_mut(i, i) = like.one_like();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c));
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn at(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut S {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let like = match self.data.first() {
            Some(s) => s.zero_like(),
            None => return Mat { rows: self.cols, cols: self.rows, data: vec![] },
        };
        let mut m = Self::zero(self.cols, self.rows, &like);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *m.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let like = self.data.first().or(other.data.first()).expect("empty product");
        let mut out = Self::zero(self.rows, other.cols, like);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = a.mul(other.at(k, j));
                    *out.at_mut(i, j) = out.at(i, j).add(&t);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = v[0].zero_like();
                for j in 0..self.cols {
                    if !self.at(i, j).is_zero() {
                        acc = acc.add(&self.at(i, j).mul(&v[j]));
                    }
                }
                acc
            })
            .collect()
    }

    pub fn add_mat(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.add(b)).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: &S) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.mul(s)).collect(),
        }
    }

    pub fn trace(&self) -> S {
        assert_eq!(self.rows, self.cols);
        let mut acc = self.data.first().map(|s| s.zero_like()).expect("empty trace");
        for i in 0..self.rows {
            acc = acc.add(self.at(i, i));
        }
        acc
    }
}

/// dst += f * src, skipping zero work.
pub fn axpy<S: Scalar>(dst: &mut [S], f: &S, src: &[S]) {
    if f.is_zero() {
        return;
    }
    for (d, s) in dst.iter_mut().zip(src) {
        if !s.is_zero() {
            *d = d.add(&f.mul(s));
        }
    }
}

/// In-place reduced row echelon form; returns the pivot columns in order.
/// The result is the canonical RREF, so equal row spans give equal outputs.
pub fn rref_in_place<S: Scalar>(rows: &mut Vec<Vec<S>>) -> Vec<usize> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].inv().expect("nonzero pivot");
        for x in rows[r][c..].iter_mut() {
            *x = x.mul(&inv);
        }
        for i in 0..rows.len() {
            if i == r || rows[i][c].is_zero() {
                continue;
            }
            let f = rows[i][c].clone();
            for j in c..ncols {
                let t = f.mul(&rows[r][j]);
                rows[i][j] = rows[i][j].sub(&t);
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    pivots
}

/// Basis of the right null space of the matrix given by `rows` (each of length
/// `ncols`); `like` fixes the scalar field when `rows` is empty.
pub fn kernel_basis<S: Scalar>(rows: &[Vec<S>], ncols: usize, like: &S) -> Vec<Vec<S>> {
    let mut ech: Vec<Vec<S>> = rows.to_vec();
    let pivots = rref_in_place(&mut ech);
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; ncols];
        for &p in &pivots {
            v[p] = true;
        }
        v
    };
    let mut out = Vec::new();
    for f in 0..ncols {
        if is_pivot[f] {
            continue;
        }
        let mut v = vec![like.zero_like(); ncols];
        v[f] = like.one_like();
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = ech[r][f].neg();
        }
        out.push(v);
    }
    out
}

/// Row span in canonical reduced echelon form.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<S> {
    pub ambient: usize,
    rows: Vec<Vec<S>>,
    pivots: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpanDims {
    pub dim_a: usize,
    pub dim_b: usize,
    pub dim_sum: usize,
    pub dim_meet: usize,
}

impl<S: Scalar> Subspace<S> {
    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, rows: vec![], pivots: vec![] }
    }

    pub fn from_rows(ambient: usize, rows: Vec<Vec<S>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == ambient));
        let mut ech = rows;
        let pivots = rref_in_place(&mut ech);
        ech.truncate(pivots.len());
        Subspace { ambient, rows: ech, pivots }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> &[Vec<S>] {
        &self.rows
    }

    /// Residual of v after sweeping out the basis; zero iff v lies in the span.
    pub fn reduce(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.ambient);
        let mut v = v.to_vec();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v[p].is_zero() {
                continue;
            }
            let f = v[p].clone();
            for j in p..self.ambient {
                let t = f.mul(&row[j]);
                v[j] = v[j].sub(&t);
            }
        }
        v
    }

    pub fn contains(&self, v: &[S]) -> bool {
        self.reduce(v).iter().all(|x| x.is_zero())
    }

    /// Coordinates of v in the echelon basis, or None if v is outside the span.
    pub fn coords_of(&self, v: &[S]) -> Option<Vec<S>> {
        assert_eq!(v.len(), self.ambient);
        let coords: Vec<S> = self.pivots.iter().map(|&p| v[p].clone()).collect();
        let mut check = v.to_vec();
        for (c, row) in coords.iter().zip(&self.rows) {
            if c.is_zero() {
                continue;
            }
            for j in 0..self.ambient {
                let t = c.mul(&row[j]);
                check[j] = check[j].sub(&t);
            }
        }
        check.iter().all(|x| x.is_zero()).then_some(coords)
    }

    pub fn sum(&self, other: &Self) -> Self {
        assert_eq!(self.ambient, other.ambient, "ambient mismatch");
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Self::from_rows(self.ambient, rows)
    }

    /// Zassenhaus: echelonize [a|a] and [b|0]; rows with zero left half carry
    /// the intersection in their right half.
    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.ambient, other.ambient, "ambient mismatch");
        let n = self.ambient;
        let Some(like) = self
            .rows
            .first()
            .and_then(|r| r.first())
            .or(other.rows.first().and_then(|r| r.first()))
        else {
            return Self::zero(n);
        };
        let mut big: Vec<Vec<S>> = Vec::new();
        for r in &self.rows {
            let mut row = r.clone();
            row.extend(r.iter().cloned());
            big.push(row);
        }
        for r in &other.rows {
            let mut row = r.clone();
            row.extend(std::iter::repeat(like.zero_like()).take(n));
            big.push(row);
        }
        rref_in_place(&mut big);
        let meet: Vec<Vec<S>> = big
            .iter()
            .filter(|row| row[..n].iter().all(|x| x.is_zero()))
            .map(|row| row[n..].to_vec())
            .collect();
        Self::from_rows(n, meet)
    }

    pub fn span_dims(&self, other: &Self) -> SpanDims {
        let dim_sum = self.sum(other).dim();
        SpanDims {
            dim_a: self.dim(),
            dim_b: other.dim(),
            dim_sum,
            dim_meet: self.dim() + other.dim() - dim_sum,
        }
    }
}

/// Monic characteristic polynomial, ascending coefficients, length n+1.
pub fn charpoly<S: Scalar>(m: &Mat<S>) -> Vec<S> {
    assert_eq!(m.rows, m.cols, "charpoly of a non-square matrix");
    let n = m.rows;
    let like = if n > 0 { m.at(0, 0).zero_like() } else { panic!("empty charpoly") };
    let mut c = vec![like.zero_like(); n + 1];
    c[n] = like.one_like();
    let mut mk = Mat::zero(n, n, &like);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I ; c_{n-k} = -tr(A M_k) / k
        let mut t = m.matmul(&mk);
        for i in 0..n {
            *t.at_mut(i, i) = t.at(i, i).add(&c[n - k + 1]);
        }
        mk = t;
        let am = m.matmul(&mk);
        let kinv = like.of_i64(k as i64).inv().expect("field of characteristic zero");
        c[n - k] = am.trace().mul(&kinv).neg();
    }
    c
}

/// Evaluate an ascending-coefficient polynomial at a square matrix (Horner).
pub fn poly_eval_mat<S: Scalar>(poly: &[S], m: &Mat<S>) -> Mat<S> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let like = m.at(0, 0).zero_like();
    let mut acc = Mat::zero(n, n, &like);
    for p in poly.iter().rev() {
        acc = acc.matmul(m);
        for i in 0..n {
            *acc.at_mut(i, i) = acc.at(i, i).add(p);
        }
    }
    acc
}
