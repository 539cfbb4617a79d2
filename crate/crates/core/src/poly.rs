//! Sparse commutative polynomials with complex coefficients.

use num_complex::Complex64;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

pub type C64 = Complex64;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, C64::new(1.0, 0.0))
    }

    pub fn monomial(exps: Vec<u32>, c: C64) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> C64 {
        self.terms.get(exps).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: C64) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c == C64::new(0.0, 0.0) {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == C64::new(0.0, 0.0) {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: C64) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            p.add_term(e.clone(), v * c);
        }
        p
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                p.add_term(f, v * e[i] as f64);
            }
        }
        p
    }

    pub fn eval(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (e, v) in &self.terms {
            let mut m = *v;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    m *= xi.powu(k);
                }
            }
            acc += m;
        }
        acc
    }

    /// Sum of absolute values of the evaluated terms; the natural scale for cancellation checks.
    pub fn eval_scale(&self, x: &[C64]) -> f64 {
        let mut acc = 0.0;
        for (e, v) in &self.terms {
            let mut m = v.norm();
            for (xi, &k) in x.iter().zip(e) {
                m *= xi.norm().powi(k as i32);
            }
            acc += m;
        }
        acc
    }

    pub fn prune(&self, tol: f64) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            let re = if v.re.abs() > tol { v.re } else { 0.0 };
            let im = if v.im.abs() > tol { v.im } else { 0.0 };
            p.add_term(e.clone(), C64::new(re, im));
        }
        p
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn conj_coeffs(&self) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            p.add_term(e.clone(), v.conj());
        }
        p
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Relabels variables: variable `i` of `self` becomes variable `map[i]` of a polynomial in `nvars` variables.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Poly {
        let mut p = Poly::zero(nvars);
        for (e, v) in &self.terms {
            let mut f = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                f[map[i]] += k;
            }
            p.add_term(f, *v);
        }
        p
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut r = Poly::constant(self.nvars, C64::new(1.0, 0.0));
        for _ in 0..k {
            r = &r * self;
        }
        r
    }

    /// Substitutes a polynomial for every variable (all substitutes share one variable count).
    pub fn compose(&self, subs: &[Poly]) -> Poly {
        let nv = subs.first().map(|s| s.nvars).unwrap_or(0);
        let mut out = Poly::zero(nv);
        for (e, v) in &self.terms {
            let mut m = Poly::constant(nv, *v);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = &m * &subs[i].pow(k);
                }
            }
            out = &out + &m;
        }
        out
    }

    /// Max coefficient distance, the metric used by symbolic equality checks.
    pub fn distance(&self, other: &Poly) -> f64 {
        (self - other).max_abs_coeff()
    }

    pub fn format(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (e, v) in &self.terms {
            let mut mono = Vec::new();
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => mono.push(names[i].clone()),
                    _ => mono.push(format!("{}^{}", names[i], k)),
                }
            }
            let c = fmt_c64(*v);
            if mono.is_empty() {
                parts.push(c);
            } else {
                parts.push(format!("{}*{}", c, mono.join("*")));
            }
        }
        parts.join(" + ")
    }
}

pub fn fmt_c64(v: C64) -> String {
    if v.im == 0.0 {
        format!("{}", v.re)
    } else if v.re == 0.0 {
        format!("{}i", v.im)
    } else {
        format!("({}{:+}i)", v.re, v.im)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, v) in &rhs.terms {
            p.add_term(e.clone(), *v);
        }
        p
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, v) in &rhs.terms {
            p.add_term(e.clone(), -*v);
        }
        p
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (a, x) in &self.terms {
            for (b, y) in &rhs.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(i, j)| i + j).collect();
                p.add_term(e, x * y);
            }
        }
        p
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

macro_rules! owned_ops {
    ($tr:ident, $f:ident) => {
        impl $tr for Poly {
            type Output = Poly;
            fn $f(self, rhs: Poly) -> Poly {
                (&self).$f(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_and_eval() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = &(&x * &x) * &y;
        let d = p.derivative(0);
        let v = d.eval(&[C64::new(3.0, 0.0), C64::new(2.0, 0.0)]);
        assert_eq!(v, C64::new(12.0, 0.0));
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Poly::var(1, 0);
        assert!((&x - &x).is_zero());
    }
}
