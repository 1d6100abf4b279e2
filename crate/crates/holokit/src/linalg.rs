//! Small dense helpers for points of `C^n`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type Point = Vec<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize) -> Point {
    vec![C64::default(); n]
}

pub fn unit(n: usize, i: usize) -> Point {
    let mut e = zeros(n);
    e[i] = c(1.0, 0.0);
    e
}

pub fn real_point(xs: &[f64]) -> Point {
    xs.iter().map(|&x| c(x, 0.0)).collect()
}

/// Hermitian product `Σ a_i conj(b_i)`.
pub fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn add(a: &[C64], b: &[C64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[C64], b: &[C64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[C64], s: C64) -> Point {
    a.iter().map(|x| x * s).collect()
}

pub fn scale_re(a: &[C64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

/// `a + t b`.
pub fn axpy(a: &[C64], t: f64, b: &[C64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y * t).collect()
}

pub fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(a: &[C64]) -> Point {
    let r = norm(a);
    scale_re(a, 1.0 / r)
}

/// `(x_1, y_1, ..., x_n, y_n)`.
pub fn to_real(a: &[C64]) -> Vec<f64> {
    a.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn from_real(x: &[f64]) -> Point {
    x.chunks(2).map(|p| c(p[0], p[1])).collect()
}

pub fn cmat(rows: &[Vec<C64>]) -> DMatrix<C64> {
    let n = rows.len();
    let m = rows.first().map(Vec::len).unwrap_or(0);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn rows_of(m: &DMatrix<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matvec(a: &[Vec<C64>], x: &[C64]) -> Point {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn inverse(a: &[Vec<C64>]) -> Option<Vec<Vec<C64>>> {
    cmat(a).try_inverse().map(|m| rows_of(&m))
}

pub fn det(a: &[Vec<C64>]) -> C64 {
    cmat(a).determinant()
}

/// Solves a real linear system, `None` when singular.
pub fn solve_real(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    a.lu().solve(&b)
}

/// Unitary matrix whose last row is `conj`-free `v/|v|`, i.e. `(U w)_n = Σ v_i w_i / |v|`.
///
/// Remaining rows complete an orthonormal basis by Gram-Schmidt on the
/// standard basis.
pub fn unitary_with_last_row(v: &[C64]) -> Vec<Vec<C64>> {
    let n = v.len();
    let r = norm(v);
    let last: Point = v.iter().map(|x| x / r).collect();
    // Rows u_k must be orthonormal under Σ u_i conj(w_i).
    let mut rows: Vec<Point> = vec![last];
    for k in 0..n {
        if rows.len() == n {
            break;
        }
        let mut cand = unit(n, k);
        for r in &rows {
            let p = hdot(&cand, r);
            cand = sub(&cand, &scale(r, p));
        }
        let nn = norm(&cand);
        if nn > 1e-8 {
            rows.push(scale_re(&cand, 1.0 / nn));
        }
    }
    let last = rows.remove(0);
    rows.push(last);
    rows
}

pub fn conj_transpose(a: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = a.len();
    let m = a.first().map(Vec::len).unwrap_or(0);
    (0..m).map(|j| (0..n).map(|i| a[i][j].conj()).collect()).collect()
}
