//! Polynomials in `z` and `z̄` with exact differentiation and substitution.
//!
//! A [`Poly`] is a finite sum `Σ c_{αβ} z^α z̄^β` with complex coefficients.
//! [`RealPoly`] adds the reality constraint `c_{βα} = conj(c_{αβ})`, which is
//! what a defining function needs. Holomorphic polynomial maps are stored as
//! [`PolyMap`] and can be substituted into either kind of polynomial.

use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Exponent pair `(α, β)` of `z^α z̄^β`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub z: Vec<u32>,
    pub zbar: Vec<u32>,
}

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial { z: vec![0; n], zbar: vec![0; n] }
    }

    pub fn new(z: Vec<u32>, zbar: Vec<u32>) -> Self {
        assert_eq!(z.len(), zbar.len(), "multi-index lengths differ");
        Monomial { z, zbar }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn degree(&self) -> u32 {
        self.z.iter().sum::<u32>() + self.zbar.iter().sum::<u32>()
    }

    pub fn conj(&self) -> Self {
        Monomial { z: self.zbar.clone(), zbar: self.z.clone() }
    }

    /// Pure `z^α` or pure `z̄^β` of positive degree.
    pub fn is_harmonic(&self) -> bool {
        self.degree() > 0 && (self.z.iter().all(|&a| a == 0) || self.zbar.iter().all(|&b| b == 0))
    }

    pub fn is_holomorphic(&self) -> bool {
        self.zbar.iter().all(|&b| b == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            z: self.z.iter().zip(&other.z).map(|(a, b)| a + b).collect(),
            zbar: self.zbar.iter().zip(&other.zbar).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for i in 0..self.n() {
            if self.z[i] > 0 {
                acc *= z[i].powu(self.z[i]);
            }
            if self.zbar[i] > 0 {
                acc *= z[i].conj().powu(self.zbar[i]);
            }
        }
        acc
    }
}

/// Complex-coefficient polynomial in `(z, z̄)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<Monomial, C64>,
}

const DROP: f64 = 1e-300;

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut p = Poly::zero(n);
        p.add_term(Monomial::one(n), c);
        p
    }

    pub fn z(n: usize, i: usize) -> Self {
        let mut m = Monomial::one(n);
        m.z[i] = 1;
        let mut p = Poly::zero(n);
        p.add_term(m, C64::new(1.0, 0.0));
        p
    }

    pub fn zbar(n: usize, i: usize) -> Self {
        Poly::z(n, i).conj()
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Monomial, C64)>) -> Self {
        let mut p = Poly::zero(n);
        for (m, c) in terms {
            assert_eq!(m.n(), n, "monomial dimension mismatch");
            p.add_term(m, c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> C64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, m: Monomial, c: C64) {
        let e = self.terms.entry(m).or_default();
        *e += c;
        if e.norm() <= DROP {
            self.terms.retain(|_, v| v.norm() > DROP);
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_holomorphic(&self) -> bool {
        self.terms.keys().all(Monomial::is_holomorphic)
    }

    /// Drops coefficients with modulus at most `tol`.
    pub fn pruned(&self, tol: f64) -> Poly {
        Poly {
            n: self.n,
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    pub fn conj(&self) -> Poly {
        Poly { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.conj(), c.conj())).collect() }
    }

    pub fn scale(&self, s: C64) -> Poly {
        let mut out = Poly::zero(self.n);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        self.mul_truncated(other, u32::MAX)
    }

    /// Product keeping only monomials of total degree `<= max_deg`.
    pub fn mul_truncated(&self, other: &Poly, max_deg: u32) -> Poly {
        assert_eq!(self.n, other.n);
        let mut acc: BTreeMap<Monomial, C64> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            for (mb, cb) in &other.terms {
                if da + mb.degree() > max_deg {
                    continue;
                }
                *acc.entry(ma.mul(mb)).or_default() += ca * cb;
            }
        }
        acc.retain(|_, c| c.norm() > DROP);
        Poly { n: self.n, terms: acc }
    }

    pub fn pow_truncated(&self, k: u32, max_deg: u32) -> Poly {
        let mut out = Poly::constant(self.n, C64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.mul_truncated(self, max_deg);
        }
        out
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.n);
        self.terms.iter().map(|(m, c)| c * m.eval(z)).sum()
    }

    /// `∂/∂z_i`.
    pub fn d_z(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (m, c) in &self.terms {
            if m.z[i] > 0 {
                let mut m2 = m.clone();
                m2.z[i] -= 1;
                out.add_term(m2, c * m.z[i] as f64);
            }
        }
        out
    }

    /// `∂/∂z̄_i`.
    pub fn d_zbar(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (m, c) in &self.terms {
            if m.zbar[i] > 0 {
                let mut m2 = m.clone();
                m2.zbar[i] -= 1;
                out.add_term(m2, c * m.zbar[i] as f64);
            }
        }
        out
    }

    pub fn homogeneous_part(&self, deg: u32) -> Poly {
        self.filter(|m| m.degree() == deg)
    }

    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> Poly {
        Poly {
            n: self.n,
            terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    /// Substitutes `z_i → a_i(w, w̄)` and `z̄_i → b_i(w, w̄)`, keeping degree `<= max_deg`.
    pub fn substitute(&self, a: &[Poly], b: &[Poly], max_deg: u32) -> Poly {
        assert_eq!(a.len(), self.n);
        assert_eq!(b.len(), self.n);
        let m = a.first().map(Poly::n).unwrap_or(0);
        let mut pa: Vec<Vec<Poly>> = vec![vec![Poly::constant(m, C64::new(1.0, 0.0))]; self.n];
        let mut pb = pa.clone();
        let mut out = Poly::zero(m);
        for (mono, c) in &self.terms {
            let mut t = Poly::constant(m, *c);
            for i in 0..self.n {
                while pa[i].len() <= mono.z[i] as usize {
                    let next = pa[i].last().unwrap().mul_truncated(&a[i], max_deg);
                    pa[i].push(next);
                }
                while pb[i].len() <= mono.zbar[i] as usize {
                    let next = pb[i].last().unwrap().mul_truncated(&b[i], max_deg);
                    pb[i].push(next);
                }
                if mono.z[i] > 0 {
                    t = t.mul_truncated(&pa[i][mono.z[i] as usize], max_deg);
                }
                if mono.zbar[i] > 0 {
                    t = t.mul_truncated(&pb[i][mono.zbar[i] as usize], max_deg);
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// `p(ψ(w), conj ψ(w))` for a holomorphic map `ψ`.
    pub fn compose(&self, psi: &PolyMap) -> Poly {
        self.compose_truncated(psi, u32::MAX)
    }

    pub fn compose_truncated(&self, psi: &PolyMap, max_deg: u32) -> Poly {
        let conj: Vec<Poly> = psi.comps.iter().map(Poly::conj).collect();
        self.substitute(&psi.comps, &conj, max_deg)
    }
}

/// Real-valued polynomial in `(z, z̄)`: the defining-function representation.
#[derive(Clone, Debug, PartialEq)]
pub struct RealPoly {
    inner: Poly,
}

impl RealPoly {
    /// Validates reality: every `(c, α, β)` has a partner `(conj c, β, α)`.
    pub fn new(p: Poly, tol: f64) -> Result<Self> {
        for (m, c) in p.terms() {
            let partner = p.coeff(&m.conj());
            let scale = 1.0f64.max(c.norm());
            if (partner - c.conj()).norm() > tol * scale {
                return Err(Error::NonReal { z: m.z.clone(), zbar: m.zbar.clone() });
            }
        }
        Ok(RealPoly { inner: p.realified() })
    }

    /// Projects onto real polynomials by averaging each term with its conjugate partner.
    pub fn from_poly_projected(p: &Poly) -> Self {
        RealPoly { inner: p.realified() }
    }

    pub fn poly(&self) -> &Poly {
        &self.inner
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn degree(&self) -> u32 {
        self.inner.degree()
    }

    pub fn eval(&self, z: &[C64]) -> f64 {
        self.inner.eval(z).re
    }

    /// `(∂ρ/∂z_1, ..., ∂ρ/∂z_n)` at `z`.
    pub fn gradient(&self, z: &[C64]) -> Vec<C64> {
        (0..self.n()).map(|i| self.inner.d_z(i).eval(z)).collect()
    }

    pub fn add(&self, other: &RealPoly) -> RealPoly {
        RealPoly { inner: self.inner.add(&other.inner) }
    }

    pub fn scale(&self, s: f64) -> RealPoly {
        RealPoly { inner: self.inner.scale(C64::new(s, 0.0)) }
    }

    pub fn compose(&self, psi: &PolyMap) -> RealPoly {
        RealPoly { inner: self.inner.compose(psi).realified().pruned(1e-15 * self.inner.max_abs_coeff().max(1.0)) }
    }

    pub fn compose_truncated(&self, psi: &PolyMap, max_deg: u32) -> RealPoly {
        RealPoly { inner: self.inner.compose_truncated(psi, max_deg).realified() }
    }

    /// `ρ(s_1 w_1, ..., s_n w_n)`, computed coefficientwise without pruning.
    pub fn dilate(&self, s: &[C64]) -> RealPoly {
        let terms = self.inner.terms().map(|(m, c)| {
            let mut f = *c;
            for i in 0..s.len() {
                f *= s[i].powu(m.z[i]) * s[i].conj().powu(m.zbar[i]);
            }
            (m.clone(), f)
        });
        RealPoly { inner: Poly::from_terms(self.n(), terms) }
    }

    pub fn compiled(&self) -> CompiledPoly {
        CompiledPoly::new(self)
    }

    /// Largest `|Im ρ(z)|` over a set of points.
    pub fn imaginary_defect(&self, pts: &[Vec<C64>]) -> f64 {
        pts.iter().map(|z| self.inner.eval(z).im.abs()).fold(0.0, f64::max)
    }
}

impl Poly {
    fn realified(&self) -> Poly {
        let mut out = Poly::zero(self.n);
        for (m, c) in &self.terms {
            let partner = self.coeff(&m.conj());
            out.add_term(m.clone(), (c + partner.conj()) * 0.5);
        }
        out
    }
}

/// Holomorphic polynomial map `C^m → C^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap {
    pub comps: Vec<Poly>,
}

impl PolyMap {
    pub fn new(comps: Vec<Poly>) -> Self {
        debug_assert!(comps.iter().all(Poly::is_holomorphic));
        PolyMap { comps }
    }

    pub fn identity(n: usize) -> Self {
        PolyMap { comps: (0..n).map(|i| Poly::z(n, i)).collect() }
    }

    /// `w ↦ A w + b`.
    pub fn affine(a: &[Vec<C64>], b: &[C64]) -> Self {
        let n = b.len();
        let m = a.first().map(Vec::len).unwrap_or(0);
        let comps = (0..n)
            .map(|i| {
                let mut p = Poly::constant(m, b[i]);
                for j in 0..m {
                    if a[i][j] != C64::default() {
                        p = p.add(&Poly::z(m, j).scale(a[i][j]));
                    }
                }
                p
            })
            .collect();
        PolyMap { comps }
    }

    pub fn dim_out(&self) -> usize {
        self.comps.len()
    }

    pub fn dim_in(&self) -> usize {
        self.comps.first().map(Poly::n).unwrap_or(0)
    }

    pub fn eval(&self, w: &[C64]) -> Vec<C64> {
        self.comps.iter().map(|p| p.eval(w)).collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap) -> PolyMap {
        let zero: Vec<Poly> = (0..inner.dim_out()).map(|_| Poly::zero(inner.dim_in())).collect();
        PolyMap {
            comps: self
                .comps
                .iter()
                .map(|p| p.substitute(&inner.comps, &zero, u32::MAX).pruned(1e-300))
                .collect(),
        }
    }

    /// Complex Jacobian `∂ψ_i/∂w_j` at `w`.
    pub fn jacobian(&self, w: &[C64]) -> Vec<Vec<C64>> {
        self.comps.iter().map(|p| (0..self.dim_in()).map(|j| p.d_z(j).eval(w)).collect()).collect()
    }

    pub fn degree(&self) -> u32 {
        self.comps.iter().map(Poly::degree).max().unwrap_or(0)
    }
}

/// Flattened real polynomial for fast repeated evaluation.
///
/// Conjugate term pairs are merged, so only `Re` of half the terms is summed.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    n: usize,
    max_pow: usize,
    coeffs: Vec<C64>,
    exps: Vec<u32>,
}

impl CompiledPoly {
    pub fn new(p: &RealPoly) -> Self {
        let n = p.n();
        let mut coeffs = Vec::new();
        let mut exps = Vec::new();
        let mut max_pow = 0;
        for (m, c) in p.poly().terms() {
            let cm = m.conj();
            let weight = match m.cmp(&cm) {
                std::cmp::Ordering::Less => 2.0,
                std::cmp::Ordering::Equal => 1.0,
                std::cmp::Ordering::Greater => continue,
            };
            coeffs.push(c * weight);
            for i in 0..n {
                exps.push(m.z[i]);
                exps.push(m.zbar[i]);
                max_pow = max_pow.max(m.z[i] as usize).max(m.zbar[i] as usize);
            }
        }
        CompiledPoly { n, max_pow, coeffs, exps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, z: &[C64], scratch: &mut Vec<C64>) -> f64 {
        let stride = self.max_pow + 1;
        scratch.clear();
        scratch.resize(2 * self.n * stride, C64::new(1.0, 0.0));
        for i in 0..self.n {
            let zc = z[i].conj();
            for k in 1..stride {
                scratch[2 * i * stride + k] = scratch[2 * i * stride + k - 1] * z[i];
                scratch[(2 * i + 1) * stride + k] = scratch[(2 * i + 1) * stride + k - 1] * zc;
            }
        }
        let mut acc = 0.0;
        for (t, c) in self.coeffs.iter().enumerate() {
            let e = &self.exps[2 * self.n * t..2 * self.n * (t + 1)];
            let mut v = *c;
            for i in 0..self.n {
                v *= scratch[2 * i * stride + e[2 * i] as usize] * scratch[(2 * i + 1) * stride + e[2 * i + 1] as usize];
            }
            acc += v.re;
        }
        acc
    }

    pub fn eval_once(&self, z: &[C64]) -> f64 {
        let mut s = Vec::new();
        self.eval(z, &mut s)
    }

    /// Coefficients of the real polynomial `t ↦ ρ(z + t u)`, `t ∈ R`, lowest degree first.
    pub fn restrict_line(&self, z: &[C64], u: &[C64]) -> Vec<f64> {
        let stride = self.max_pow + 1;
        let pows = |a: C64, b: C64| -> Vec<Vec<C64>> {
            let mut out = vec![vec![C64::new(1.0, 0.0)]];
            for k in 1..stride {
                let prev = &out[k - 1];
                let mut next = vec![C64::default(); k + 1];
                for (j, p) in prev.iter().enumerate() {
                    next[j] += p * a;
                    next[j + 1] += p * b;
                }
                out.push(next);
            }
            out
        };
        let pz: Vec<_> = (0..self.n).map(|i| pows(z[i], u[i])).collect();
        let pzb: Vec<_> = (0..self.n).map(|i| pows(z[i].conj(), u[i].conj())).collect();
        let mut result: Vec<f64> = vec![0.0];
        for (t, c) in self.coeffs.iter().enumerate() {
            let e = &self.exps[2 * self.n * t..2 * self.n * (t + 1)];
            let mut acc = vec![*c];
            for i in 0..self.n {
                for f in [&pz[i][e[2 * i] as usize], &pzb[i][e[2 * i + 1] as usize]] {
                    if f.len() == 1 {
                        for a in acc.iter_mut() {
                            *a *= f[0];
                        }
                        continue;
                    }
                    let mut next = vec![C64::default(); acc.len() + f.len() - 1];
                    for (j, a) in acc.iter().enumerate() {
                        for (k, b) in f.iter().enumerate() {
                            next[j + k] += a * b;
                        }
                    }
                    acc = next;
                }
            }
            if result.len() < acc.len() {
                result.resize(acc.len(), 0.0);
            }
            for (j, a) in acc.iter().enumerate() {
                result[j] += a.re;
            }
        }
        result
    }
}

/// Horner evaluation of a real univariate polynomial, lowest degree first.
pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ball(n: usize) -> RealPoly {
        let mut p = Poly::constant(n, c(-1.0, 0.0));
        for i in 0..n {
            p = p.add(&Poly::z(n, i).mul(&Poly::zbar(n, i)));
        }
        RealPoly::new(p, 1e-14).unwrap()
    }

    #[test]
    fn eval_ball() {
        let b = ball(2);
        assert_eq!(b.eval(&[c(0.0, 0.0), c(0.0, 0.0)]), -1.0);
        assert!((b.eval(&[c(0.6, 0.0), c(0.0, 0.8)])).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_real() {
        let p = Poly::z(1, 0);
        assert!(matches!(RealPoly::new(p, 1e-12), Err(Error::NonReal { .. })));
    }

    #[test]
    fn compiled_matches_direct() {
        let n = 2;
        let p = Poly::z(n, 0).mul(&Poly::z(n, 0)).scale(c(0.3, -0.2));
        let p = p.add(&p.conj()).add(&ball(2).poly().mul(&Poly::z(n, 1).mul(&Poly::zbar(n, 1))));
        let r = RealPoly::new(p, 1e-14).unwrap();
        let cp = r.compiled();
        let z = [c(0.3, -0.7), c(1.1, 0.4)];
        assert!((cp.eval_once(&z) - r.eval(&z)).abs() < 1e-13);
    }

    #[test]
    fn line_restriction_matches_eval() {
        let b = ball(2);
        let cp = b.compiled();
        let z = [c(0.1, 0.2), c(-0.3, 0.0)];
        let u = [c(0.5, -0.5), c(0.2, 0.7)];
        let coeffs = cp.restrict_line(&z, &u);
        for t in [0.0, 0.3, -1.2, 2.0] {
            let p: Vec<C64> = z.iter().zip(&u).map(|(a, b)| a + b * t).collect();
            assert!((horner(&coeffs, t) - b.eval(&p)).abs() < 1e-13);
        }
    }

    #[test]
    fn wirtinger_of_modulus_squared() {
        let b = ball(2);
        let g = b.gradient(&[c(0.5, 0.25), c(0.0, -1.0)]);
        assert!((g[0] - c(0.5, -0.25)).norm() < 1e-15);
        assert!((g[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_with_translation() {
        // |z|^2 - 1 at z = w + 1 is |w|^2 + 2 Re w.
        let psi = PolyMap::affine(&[vec![c(1.0, 0.0)]], &[c(1.0, 0.0)]);
        let r = ball(1).compose(&psi);
        let w = [c(0.2, 0.3)];
        assert!((r.eval(&w) - (w[0].norm_sqr() + 2.0 * w[0].re)).abs() < 1e-14);
        assert_eq!(r.poly().coeff(&Monomial::one(1)), c(0.0, 0.0));
    }

    #[test]
    fn map_composition() {
        let n = 2;
        let f = PolyMap::new(vec![Poly::z(n, 0), Poly::z(n, 1).add(&Poly::z(n, 0).mul(&Poly::z(n, 0)))]);
        let g = PolyMap::new(vec![Poly::z(n, 0), Poly::z(n, 1).sub(&Poly::z(n, 0).mul(&Poly::z(n, 0)))]);
        let id = f.compose(&g);
        let w = [c(0.3, 0.1), c(-0.2, 0.5)];
        let v = id.eval(&w);
        assert!((v[0] - w[0]).norm() < 1e-15 && (v[1] - w[1]).norm() < 1e-15);
    }
}
