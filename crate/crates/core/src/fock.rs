//! Truncated Fock spaces, Wick-ordered operators, the quantum resonance algebras, the
//! irreducible representation on polynomials, coherent states and the coherent transform.

use crate::error::{Error, Result};
use crate::lattice::{PrimeSystem, ResonancePair};
use crate::numerics::{integrate, null_space, trapezoid_line};
use crate::poly::{Poly, C64};
use crate::tolerances::NULL_REL;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use std::collections::HashMap;
use std::ops::Range;

/// Ladder normalization. `Sqrt2`: ẑ = (q + ħ∂)/√2, [ẑ, ẑ*] = ħ. `Part1`: η = x + ħ′∂, [η, η*] = 2ħ′.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Convention {
    Sqrt2,
    Part1,
}

impl Convention {
    pub fn tag(self) -> &'static str {
        match self {
            Convention::Sqrt2 => "sqrt2",
            Convention::Part1 => "part1",
        }
    }

    /// κ in [a, a*] = κ.
    pub fn kappa(self, hbar: f64) -> f64 {
        match self {
            Convention::Sqrt2 => hbar,
            Convention::Part1 => 2.0 * hbar,
        }
    }
}

/// States |m⟩ with n∘m ≤ cutoff, ordered by level then lexicographically.
#[derive(Clone, Debug)]
pub struct FockBasis {
    weights: PrimeSystem,
    cutoff: u64,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    levels: Vec<Range<usize>>,
}

impl FockBasis {
    pub fn new(weights: &PrimeSystem, cutoff: u64) -> Self {
        let w: Vec<u64> = weights.weights().iter().map(|&v| v as u64).collect();
        let mut levels = Vec::new();
        let mut states = Vec::new();
        for level in 0..=cutoff {
            let start = states.len();
            let mut cur = vec![0u32; w.len()];
            collect_level(&w, level, 0, &mut cur, &mut states);
            states[start..].sort();
            levels.push(start..states.len());
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        FockBasis { weights: weights.clone(), cutoff, states, index, levels }
    }

    pub fn weights(&self) -> &PrimeSystem {
        &self.weights
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn index_of(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn level_range(&self, level: u64) -> Range<usize> {
        self.levels.get(level as usize).cloned().unwrap_or(0..0)
    }

    pub fn level_of(&self, i: usize) -> u64 {
        self.states[i].iter().zip(self.weights.weights()).map(|(&m, &w)| m as u64 * w as u64).sum()
    }
}

fn collect_level(w: &[u64], rest: u64, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == w.len() {
        if rest % w[pos] == 0 {
            cur[pos] = (rest / w[pos]) as u32;
            out.push(cur.clone());
        }
        return;
    }
    for k in 0..=rest / w[pos] {
        cur[pos] = k as u32;
        collect_level(w, rest - k * w[pos], pos + 1, cur, out);
    }
}

/// Matrix of an operator on a truncated Fock basis. `raise` bounds the level increase, so
/// columns at level ≤ cutoff − raise are free of truncation error.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub mat: DMatrix<C64>,
    pub hbar: f64,
    pub convention: Convention,
    pub raise: u64,
}

impl FockOperator {
    fn compatible(&self, o: &FockOperator) -> Result<()> {
        if self.convention != o.convention {
            return Err(Error::ConventionMismatch(self.convention.tag(), o.convention.tag()));
        }
        if self.hbar != o.hbar {
            return Err(Error::InvalidInput(format!("ħ mismatch {} vs {}", self.hbar, o.hbar)));
        }
        Ok(())
    }

    pub fn identity(dim: usize, hbar: f64, convention: Convention) -> Self {
        FockOperator { mat: DMatrix::identity(dim, dim), hbar, convention, raise: 0 }
    }

    pub fn mul(&self, o: &FockOperator) -> Result<FockOperator> {
        self.compatible(o)?;
        Ok(FockOperator { mat: &self.mat * &o.mat, raise: self.raise + o.raise, ..*self.shell() })
    }

    pub fn add(&self, o: &FockOperator) -> Result<FockOperator> {
        self.compatible(o)?;
        Ok(FockOperator { mat: &self.mat + &o.mat, raise: self.raise.max(o.raise), ..*self.shell() })
    }

    pub fn sub(&self, o: &FockOperator) -> Result<FockOperator> {
        self.compatible(o)?;
        Ok(FockOperator { mat: &self.mat - &o.mat, raise: self.raise.max(o.raise), ..*self.shell() })
    }

    pub fn scale(&self, c: C64) -> FockOperator {
        FockOperator { mat: &self.mat * c, ..*self.shell() }.with_raise(self.raise)
    }

    pub fn commutator(&self, o: &FockOperator) -> Result<FockOperator> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator { mat: self.mat.adjoint(), ..*self.shell() }.with_raise(self.raise)
    }

    fn shell(&self) -> Box<FockOperator> {
        Box::new(FockOperator { mat: DMatrix::zeros(0, 0), hbar: self.hbar, convention: self.convention, raise: 0 })
    }

    fn with_raise(mut self, r: u64) -> Self {
        self.raise = r;
        self
    }

    pub fn safe_columns(&self, basis: &FockBasis) -> Range<usize> {
        if self.raise > basis.cutoff() {
            return 0..0;
        }
        0..basis.level_range(basis.cutoff() - self.raise).end
    }

    /// Max entry over the truncation-free columns.
    pub fn safe_max(&self, basis: &FockBasis) -> f64 {
        let cols = self.safe_columns(basis);
        self.mat.columns(cols.start, cols.len()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn block(&self, basis: &FockBasis, level: u64) -> DMatrix<C64> {
        let r = basis.level_range(level);
        self.mat.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }
}

/// ĝ_k|m⟩ = amp·|target⟩ with [a, a*] = κ, or `None` if ĝ_k annihilates |m⟩.
pub fn apply_monomial(k: &ResonancePair, m: &[u32], kap: f64) -> Option<(Vec<u32>, f64)> {
    let mut amp = 1.0;
    let mut target = m.to_vec();
    for l in 0..m.len() {
        let kp = k.plus[l] as u32;
        let km = k.minus[l] as u32;
        if m[l] < kp {
            return None;
        }
        for t in 0..kp {
            amp *= (kap * (m[l] - t) as f64).sqrt();
        }
        let mid = m[l] - kp;
        for t in 1..=km {
            amp *= (kap * (mid + t) as f64).sqrt();
        }
        target[l] = mid + km;
    }
    Some((target, amp))
}

/// ĝ_k = (ẑ*)^{k₋} ẑ^{k₊} in Wick order.
pub fn build_operator(k: &ResonancePair, basis: &FockBasis, hbar: f64, convention: Convention) -> Result<FockOperator> {
    let w = basis.weights();
    if k.plus.len() != w.modes() {
        return Err(Error::InvalidInput("mode count mismatch".into()));
    }
    let up = w.dot(&k.minus)?;
    let down = w.dot(&k.plus)?;
    if up.max(down) as u64 > basis.cutoff() {
        return Err(Error::Cutoff(format!(
            "operator moves {} quanta, cutoff is {}",
            up.max(down),
            basis.cutoff()
        )));
    }
    let kap = convention.kappa(hbar);
    let dim = basis.dim();
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for (col, m) in basis.states().iter().enumerate() {
        if let Some((target, amp)) = apply_monomial(k, m, kap) {
            if let Some(row) = basis.index_of(&target) {
                mat[(row, col)] = C64::new(amp, 0.0);
            }
        }
    }
    let raise = (up - down).max(0) as u64;
    Ok(FockOperator { mat, hbar, convention, raise })
}

/// Diagonal operator f(ħm₁·s, …) for a polynomial in the number operators 𝒜_l = s·ħ m_l.
pub fn diagonal_poly(p: &Poly, basis: &FockBasis, hbar: f64, convention: Convention, number_scale: f64) -> FockOperator {
    let dim = basis.dim();
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for (i, m) in basis.states().iter().enumerate() {
        let x: Vec<C64> = m.iter().map(|&v| C64::new(number_scale * hbar * v as f64, 0.0)).collect();
        mat[(i, i)] = p.eval(&x);
    }
    FockOperator { mat, hbar, convention, raise: 0 }
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedResidual {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantumReport {
    pub n: [i64; 2],
    pub hbar: f64,
    /// ρ and f as polynomials in (𝒜₁, 𝒜₂), coefficient lists [[e1, e2, value], …].
    pub rho: Vec<(u32, u32, f64)>,
    pub f: Vec<(u32, u32, f64)>,
    pub f_degree: u32,
    pub residuals: Vec<NamedResidual>,
}

impl QuantumReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.value).fold(0.0, f64::max)
    }
}

/// ρ(𝒜₁,𝒜₂) = Π_{t<n₂}(𝒜₁ − tħ)·Π_{t=1..n₁}(𝒜₂ + tħ).
pub fn rho_poly(n1: i64, n2: i64, hbar: f64) -> Poly {
    let mut r = Poly::constant(2, C64::new(1.0, 0.0));
    for t in 0..n2 {
        r = &r * &(&Poly::var(2, 0) - &Poly::constant(2, C64::new(t as f64 * hbar, 0.0)));
    }
    for t in 1..=n1 {
        r = &r * &(&Poly::var(2, 1) + &Poly::constant(2, C64::new(t as f64 * hbar, 0.0)));
    }
    r
}

/// f = ρ(𝒜₁ + ħn₂, 𝒜₂ − ħn₁) − ρ(𝒜₁, 𝒜₂).
pub fn f_poly(n1: i64, n2: i64, hbar: f64) -> Poly {
    let rho = rho_poly(n1, n2, hbar);
    let shifted = rho.compose(&[
        &Poly::var(2, 0) + &Poly::constant(2, C64::new(hbar * n2 as f64, 0.0)),
        &Poly::var(2, 1) - &Poly::constant(2, C64::new(hbar * n1 as f64, 0.0)),
    ]);
    (&shifted - &rho).prune(1e-14)
}

fn poly_table(p: &Poly) -> Vec<(u32, u32, f64)> {
    p.terms().map(|(e, c)| (e[0], e[1], c.re)).collect()
}

fn rel_residual(diff: &FockOperator, scale: &[&FockOperator], basis: &FockBasis) -> f64 {
    let s = scale.iter().map(|o| o.safe_max(basis)).fold(1.0, f64::max);
    diff.safe_max(basis) / s
}

/// Builds ρ and f and checks the two-frequency quantum relations on Fock blocks.
pub fn quantum_structure_2freq(n1: i64, n2: i64, hbar: f64, cutoff: u64) -> Result<QuantumReport> {
    let w = PrimeSystem::new(vec![n1, n2])?;
    let basis = FockBasis::new(&w, cutoff);
    let cv = Convention::Sqrt2;
    let ga = build_operator(&ResonancePair::new(vec![n2, 0], vec![0, n1])?, &basis, hbar, cv)?;
    let gs = ga.adjoint();
    let a1 = build_operator(&ResonancePair::primitive(2, 0), &basis, hbar, cv)?;
    let a2 = build_operator(&ResonancePair::primitive(2, 1), &basis, hbar, cv)?;
    let rho = rho_poly(n1, n2, hbar);
    let f = f_poly(n1, n2, hbar);
    let rho_op = diagonal_poly(&rho, &basis, hbar, cv, 1.0);
    let f_op = diagonal_poly(&f, &basis, hbar, cv, 1.0);
    let c0 = a1.scale(C64::new(n1 as f64, 0.0)).add(&a2.scale(C64::new(n2 as f64, 0.0)))?;
    let k = |x: f64| C64::new(x, 0.0);

    let mut residuals = Vec::new();
    let mut push = |name: &str, v: f64| residuals.push(NamedResidual { name: name.into(), value: v });
    let d = ga.commutator(&a1)?.sub(&ga.scale(k(hbar * n2 as f64)))?;
    push("[Aa,A1] - hbar n2 Aa", rel_residual(&d, &[&ga], &basis));
    let d = ga.commutator(&a2)?.add(&ga.scale(k(hbar * n1 as f64)))?;
    push("[Aa,A2] + hbar n1 Aa", rel_residual(&d, &[&ga], &basis));
    push("[A1,A2]", rel_residual(&a1.commutator(&a2)?, &[&a1, &a2], &basis));
    let d = ga.commutator(&gs)?.sub(&f_op)?;
    push("[Aa,Aa*] - f", rel_residual(&d, &[&f_op], &basis));
    let d = gs.mul(&ga)?.sub(&rho_op)?;
    push("C1", rel_residual(&d, &[&rho_op], &basis));
    for (name, g) in [("C0,Aa", &ga), ("C0,Aa*", &gs), ("C0,A1", &a1), ("C0,A2", &a2)] {
        push(name, rel_residual(&c0.commutator(g)?, &[&c0], &basis));
    }
    Ok(QuantumReport {
        n: [n1, n2],
        hbar,
        rho: poly_table(&rho),
        f_degree: f.total_degree(),
        f: poly_table(&f),
        residuals,
    })
}

/// Self-adjoint generators 𝐀₁..𝐀₄ of the 1:2 algebra on a (1,2) Fock basis, Part I ladders.
pub fn resonance12_generators(basis: &FockBasis, hp: f64) -> Result<[FockOperator; 4]> {
    if basis.weights().weights() != [1, 2] {
        return Err(Error::InvalidInput("the 1:2 generators need weights (1,2)".into()));
    }
    let cv = Convention::Part1;
    let nn1 = build_operator(&ResonancePair::primitive(2, 0), basis, hp, cv)?;
    let nn2 = build_operator(&ResonancePair::primitive(2, 1), basis, hp, cv)?;
    // ζ*η² and its adjoint η*²ζ
    let low = build_operator(&ResonancePair::new(vec![2, 0], vec![0, 1])?, basis, hp, cv)?;
    let high = low.adjoint();
    let r = |x: f64| C64::new(x, 0.0);
    let a1 = nn1.scale(r(0.25));
    let a2 = nn1.sub(&nn2.scale(r(4.0)))?.scale(r(1.0 / 12.0));
    let a3 = low.add(&high)?.scale(r(0.125));
    let a4 = low.sub(&high)?.scale(C64::new(0.0, -0.125));
    Ok([a1, a2, a3, a4])
}

fn comm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

fn maxabs(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Residuals of the 1:2 commutation relations and Casimir values on one irreducible block.
pub fn relations_12(a: &[DMatrix<C64>; 4], hp: f64, level: u64) -> Vec<NamedResidual> {
    let d = a[0].nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let ih = C64::new(0.0, hp);
    let r = |x: f64| C64::new(x, 0.0);
    let scale = a.iter().map(maxabs).fold(1.0, f64::max);
    let mut out = Vec::new();
    let mut push = |name: &str, m: DMatrix<C64>, s: f64| out.push(NamedResidual { name: name.into(), value: maxabs(&m) / s });
    push("[A1,A2]", comm(&a[0], &a[1]), scale * scale);
    push("[A1,A3]", comm(&a[0], &a[2]) + &a[3] * ih, scale * scale);
    push("[A1,A4]", comm(&a[0], &a[3]) - &a[2] * ih, scale * scale);
    push("[A2,A3]", comm(&a[1], &a[2]) + &a[3] * ih, scale * scale);
    push("[A2,A4]", comm(&a[1], &a[3]) - &a[2] * ih, scale * scale);
    let rhs = (&a[0] * &a[1] - &a[0] * r(hp / 4.0) + &a[1] * r(hp / 4.0)) * (ih * -3.0);
    push("[A3,A4]", comm(&a[2], &a[3]) - rhs, scale * scale);
    push("C1", &a[0] - &a[1] - &id * r(level as f64 * hp / 3.0), scale);
    let a1sq = &a[0] * &a[0];
    let c2 = &a1sq * &a[1] * r(3.0) - &a1sq * &a[0] + &a[2] * &a[2] + &a[3] * &a[3] - &a1sq * r(1.5 * hp)
        + &a[0] * &a[1] * r(1.5 * hp)
        + &a[1] * r(0.75 * hp * hp)
        + &a[0] * r(0.25 * hp * hp);
    push("C2", c2, scale * scale * scale);
    out
}

pub fn level_parity(n: u64) -> (usize, u32) {
    ((n / 2) as usize, if n % 2 == 0 { 1 } else { 3 })
}

/// Matrices of Ǎ₁..Ǎ₄ on the monomials w^j = z̄^j, j = 0..⌊n/2⌋; column j is the image of w^j.
pub fn irreducible_rep(n: u64, hp: f64) -> [DMatrix<C64>; 4] {
    let (big, eps) = level_parity(n);
    let eps = eps as f64;
    let d = big + 1;
    let mut a = [
        DMatrix::<C64>::zeros(d, d),
        DMatrix::<C64>::zeros(d, d),
        DMatrix::<C64>::zeros(d, d),
        DMatrix::<C64>::zeros(d, d),
    ];
    for j in 0..d {
        let jf = j as f64;
        let diag = ((eps - 1.0) / 4.0 + jf) * hp;
        a[0][(j, j)] = C64::new(diag, 0.0);
        a[1][(j, j)] = C64::new(diag - n as f64 * hp / 3.0, 0.0);
        if j > 0 {
            let lo = hp * hp * (jf * (jf - 1.0) + eps * jf / 2.0);
            a[2][(j - 1, j)] = C64::new(lo, 0.0);
            a[3][(j - 1, j)] = C64::new(0.0, -lo);
        }
        if j < big {
            let up = hp / 2.0 * (big - j) as f64;
            a[2][(j + 1, j)] = C64::new(up, 0.0);
            a[3][(j + 1, j)] = C64::new(0.0, up);
        }
    }
    a
}

/// Gaussian rational a + bi.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRational {
    fn zero() -> Self {
        GaussRational { re: BigRational::zero(), im: BigRational::zero() }
    }
    fn real(r: BigRational) -> Self {
        GaussRational { re: r, im: BigRational::zero() }
    }
    fn imag(r: BigRational) -> Self {
        GaussRational { re: BigRational::zero(), im: r }
    }
    fn add(&self, o: &Self) -> Self {
        GaussRational { re: &self.re + &o.re, im: &self.im + &o.im }
    }
    fn sub(&self, o: &Self) -> Self {
        GaussRational { re: &self.re - &o.re, im: &self.im - &o.im }
    }
    fn mul(&self, o: &Self) -> Self {
        GaussRational { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

type QMat = Vec<Vec<GaussRational>>;

fn qmul(a: &QMat, b: &QMat) -> QMat {
    let d = a.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..d).fold(GaussRational::zero(), |acc, k| acc.add(&a[i][k].mul(&b[k][j]))))
                .collect()
        })
        .collect()
}

fn qlin(terms: &[(&QMat, GaussRational)]) -> QMat {
    let d = terms[0].0.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| terms.iter().fold(GaussRational::zero(), |acc, (m, c)| acc.add(&m[i][j].mul(c))))
                .collect()
        })
        .collect()
}

fn qcomm(a: &QMat, b: &QMat) -> QMat {
    let ab = qmul(a, b);
    let ba = qmul(b, a);
    ab.iter().zip(&ba).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.sub(q)).collect()).collect()
}

/// Exact check of the 1:2 relations and Casimirs for rational ħ′. Returns the names of failing
/// relations (empty when all hold exactly).
pub fn irreducible_rep_exact(n: u64, hp: &BigRational) -> Vec<String> {
    let (big, eps) = level_parity(n);
    let d = big + 1;
    let q = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let mut a: Vec<QMat> = (0..4).map(|_| vec![vec![GaussRational::zero(); d]; d]).collect();
    for j in 0..d {
        let jj = j as i64;
        let diag = (q(eps as i64 - 1, 4) + q(jj, 1)) * hp;
        a[0][j][j] = GaussRational::real(diag.clone());
        a[1][j][j] = GaussRational::real(diag - q(n as i64, 3) * hp);
        if j > 0 {
            let lo = hp * hp * (q(jj * (jj - 1), 1) + q(eps as i64 * jj, 2));
            a[2][j - 1][j] = GaussRational::real(lo.clone());
            a[3][j - 1][j] = GaussRational::imag(-lo);
        }
        if j < big {
            let up = hp * q(big as i64 - jj, 2);
            a[2][j + 1][j] = GaussRational::real(up.clone());
            a[3][j + 1][j] = GaussRational::imag(up);
        }
    }
    let one = GaussRational::real(BigRational::one());
    let r = |x: BigRational| GaussRational::real(x);
    let ih = GaussRational::imag(hp.clone());
    let neg_ih = GaussRational::imag(-hp.clone());
    let mut id = vec![vec![GaussRational::zero(); d]; d];
    for (i, row) in id.iter_mut().enumerate() {
        row[i] = one.clone();
    }
    let zero_check = |m: &QMat| m.iter().all(|row| row.iter().all(GaussRational::is_zero));
    let mut failing = Vec::new();
    let mut check = |name: &str, m: QMat| {
        if !zero_check(&m) {
            failing.push(name.to_string());
        }
    };
    check("[A1,A2]", qcomm(&a[0], &a[1]));
    check("[A1,A3]", qlin(&[(&qcomm(&a[0], &a[2]), one.clone()), (&a[3], ih.clone())]));
    check("[A1,A4]", qlin(&[(&qcomm(&a[0], &a[3]), one.clone()), (&a[2], neg_ih.clone())]));
    check("[A2,A3]", qlin(&[(&qcomm(&a[1], &a[2]), one.clone()), (&a[3], ih.clone())]));
    check("[A2,A4]", qlin(&[(&qcomm(&a[1], &a[3]), one.clone()), (&a[2], neg_ih.clone())]));
    let a12 = qmul(&a[0], &a[1]);
    let three_ih = GaussRational::imag(q(3, 1) * hp);
    let quarter = r(hp * q(1, 4));
    let rhs_part = qlin(&[(&a12, one.clone()), (&a[0], quarter.clone().mul(&r(q(-1, 1)))), (&a[1], quarter)]);
    check("[A3,A4]", qlin(&[(&qcomm(&a[2], &a[3]), one.clone()), (&rhs_part, three_ih)]));
    check("C1", qlin(&[(&a[0], one.clone()), (&a[1], r(q(-1, 1))), (&id, r(-(q(n as i64, 3) * hp)))]));
    let a1sq = qmul(&a[0], &a[0]);
    let a1sq2 = qmul(&a1sq, &a[1]);
    let a1cube = qmul(&a1sq, &a[0]);
    let a3sq = qmul(&a[2], &a[2]);
    let a4sq = qmul(&a[3], &a[3]);
    check(
        "C2",
        qlin(&[
            (&a1sq2, r(q(3, 1))),
            (&a1cube, r(q(-1, 1))),
            (&a3sq, one.clone()),
            (&a4sq, one.clone()),
            (&a1sq, r(-(q(3, 2) * hp))),
            (&a12, r(q(3, 2) * hp)),
            (&a[1], r(q(3, 4) * hp * hp)),
            (&a[0], r(q(1, 4) * hp * hp)),
        ]),
    );
    failing
}

fn double_factorial_odd(k: i64) -> f64 {
    let mut p = 1.0;
    let mut v = k;
    while v > 1 {
        p *= v as f64;
        v -= 2;
    }
    p
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Reproducing kernel K and the radial weight L of the level-n model space.
#[derive(Clone, Debug, Serialize)]
pub struct HypergeometricKernel {
    pub n: u64,
    pub hbar_prime: f64,
    pub big_n: usize,
    pub eps: u32,
    /// Coefficients of K in powers of s/ħ′.
    pub coeffs: Vec<f64>,
    /// μ_j = π∫ s^j L(s) ds by quadrature.
    pub moments: Vec<f64>,
    /// Same moments from the closed-form Beta integrals.
    pub moments_exact: Vec<f64>,
    /// ∫ L(s) ds / ħ′ before normalization is applied (should be 1 after).
    pub l_norm: f64,
    #[serde(skip)]
    l_scale: f64,
}

impl HypergeometricKernel {
    pub fn k(&self, s: f64) -> f64 {
        let u = s / self.hbar_prime;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn k_prime(&self, s: f64) -> f64 {
        let u = s / self.hbar_prime;
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * u + j as f64 * c;
        }
        acc / self.hbar_prime
    }

    pub fn k_second(&self, s: f64) -> f64 {
        let u = s / self.hbar_prime;
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * u + (j * (j - 1)) as f64 * c;
        }
        acc / (self.hbar_prime * self.hbar_prime)
    }

    /// Kummer parameters (a, b) of the weight: L(u) ∝ U(a, b, u/2), u = s/ħ′.
    pub fn kummer_ab(&self) -> (f64, f64) {
        (self.big_n as f64 + 2.0, 2.0 - self.eps as f64 / 2.0)
    }

    /// Unnormalized U(a,b,x) = ∫₀^∞ e^{−xt} t^{a−1}(1+t)^{b−a−1} dt via t = e^y, restricted to the
    /// window where the log-integrand is within 45 of its maximum.
    fn kummer_u(&self, x: f64) -> f64 {
        let (a, b) = self.kummer_ab();
        let phi = |y: f64| -x * y.exp() + a * y + (b - a - 1.0) * y.exp().ln_1p();
        let mut y = 0.0;
        let mut top = phi(0.0);
        for k in -200..=400 {
            let yy = 0.5 * k as f64;
            let v = phi(yy);
            if v > top {
                top = v;
                y = yy;
            }
        }
        let mut lo = y;
        while phi(lo) > top - 45.0 && lo > -400.0 {
            lo -= 0.5;
        }
        let mut hi = y;
        while phi(hi) > top - 45.0 && hi < 400.0 {
            hi += 0.5;
        }
        let g = |t: f64| (phi(t) - top).exp();
        trapezoid_line(g, lo, hi, 1e-12).map(|v| v * top.exp()).unwrap_or(f64::NAN)
    }

    /// Normalized weight L as a function of u = s/ħ′, so ∫₀^∞ L du = 1.
    pub fn l_of_u(&self, u: f64) -> f64 {
        self.kummer_u(u / 2.0) / self.l_scale
    }

    /// Residual of 2uL'' − (u + ε − 4)L' − (N+2)L = 0 by central differences.
    pub fn l_ode_residual(&self, u: f64) -> f64 {
        let h = 1e-3 * u.max(0.1);
        let (lm, l0, lp) = (self.l_of_u(u - h), self.l_of_u(u), self.l_of_u(u + h));
        let d1 = (lp - lm) / (2.0 * h);
        let d2 = (lp - 2.0 * l0 + lm) / (h * h);
        let r = 2.0 * u * d2 - (u + self.eps as f64 - 4.0) * d1 - (self.big_n as f64 + 2.0) * l0;
        r / l0.abs().max(1e-300)
    }
}

fn u_moment_raw(kernel: &HypergeometricKernel, j: usize) -> Result<f64> {
    // ∫ u^j U(u/2) du with u = e^v
    let g = |v: f64| {
        let u = v.exp();
        u.powi(j as i32 + 1) * kernel.kummer_u(u / 2.0)
    };
    trapezoid_line(g, -90.0, 50.0, 1e-11)
}

pub fn kernel_and_moments(n: u64, hp: f64) -> Result<HypergeometricKernel> {
    if hp <= 0.0 {
        return Err(Error::InvalidInput("ħ′ must be positive".into()));
    }
    let (big, eps) = level_parity(n);
    let coeffs: Vec<f64> = (0..=big)
        .map(|j| factorial(big) / (factorial(j) * double_factorial_odd(2 * j as i64 - 2 + eps as i64) * factorial(big - j)))
        .collect();
    let mut kern = HypergeometricKernel {
        n,
        hbar_prime: hp,
        big_n: big,
        eps,
        coeffs,
        moments: vec![],
        moments_exact: vec![],
        l_norm: 0.0,
        l_scale: 1.0,
    };
    let z = u_moment_raw(&kern, 0)?;
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Quadrature(format!("weight normalization {z}")));
    }
    kern.l_scale = z;
    let pi = std::f64::consts::PI;
    let mut moments = Vec::new();
    for j in 0..=big {
        let m = u_moment_raw(&kern, j)? / z;
        moments.push(pi * hp.powi(j as i32 + 1) * m);
    }
    let (a, b) = kern.kummer_ab();
    let beta = |p: f64, q: f64| (ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp();
    let raw = |j: usize| factorial(j) * 2f64.powi(j as i32 + 1) * beta(a - j as f64 - 1.0, j as f64 + 2.0 - b);
    let r0 = raw(0);
    kern.moments_exact = (0..=big).map(|j| pi * hp.powi(j as i32 + 1) * raw(j) / r0).collect();
    kern.l_norm = integrate(|t| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = t / (1.0 - t);
        kern.l_of_u(u) / ((1.0 - t) * (1.0 - t))
    }, 0.0, 1.0, 1e-12, 1e-10)?;
    kern.moments = moments;
    Ok(kern)
}

/// Ground vector of the level-n Fock block: 𝐀₁,𝐀₂ eigenvector annihilated by 𝐀₃ + i𝐀₄.
pub fn vacuum(n: u64, gens: &[FockOperator; 4], basis: &FockBasis) -> Result<Vec<C64>> {
    let hp = gens[0].hbar;
    let blocks: Vec<DMatrix<C64>> = gens.iter().map(|g| g.block(basis, n)).collect();
    let d = blocks[0].nrows();
    let rep = irreducible_rep(n, hp);
    let a1 = rep[0][(0, 0)];
    let a2 = rep[1][(0, 0)];
    let id = DMatrix::<C64>::identity(d, d);
    let b = &blocks[2] + &blocks[3] * C64::i();
    let mut stack = DMatrix::<C64>::zeros(3 * d, d);
    stack.view_mut((0, 0), (d, d)).copy_from(&(&blocks[0] - &id * a1));
    stack.view_mut((d, 0), (d, d)).copy_from(&(&blocks[1] - &id * a2));
    stack.view_mut((2 * d, 0), (d, d)).copy_from(&b);
    let scale = blocks.iter().map(maxabs).fold(hp, f64::max);
    let ns = null_space(&stack, NULL_REL, scale);
    if ns.ncols() != 1 {
        return Err(Error::NullSpace { expected: 1, found: ns.ncols(), context: format!("vacuum at level {n}") });
    }
    let mut v: Vec<C64> = ns.column(0).iter().cloned().collect();
    let pivot = v.iter().find(|c| c.norm() > 1e-12).cloned().unwrap_or(C64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c = *c * phase / norm;
    }
    Ok(v)
}

/// Coherent states of one level block.
#[derive(Clone, Debug)]
pub struct CoherentFamily {
    pub n: u64,
    pub hp: f64,
    /// B†^j|0⟩, j = 0..⌊n/2⌋.
    pub ladder: Vec<Vec<C64>>,
    /// κ_j with |z⟩ = Σ κ_j (z/ħ′)^j B†^j|0⟩.
    pub kappa: Vec<f64>,
}

impl CoherentFamily {
    pub fn state(&self, z: C64) -> Vec<C64> {
        let d = self.ladder[0].len();
        let mut out = vec![C64::new(0.0, 0.0); d];
        let w = z / self.hp;
        let mut p = C64::new(1.0, 0.0);
        for (j, v) in self.ladder.iter().enumerate() {
            let c = p * self.kappa[j];
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
            p *= w;
        }
        out
    }
}

pub fn vacuum_and_coherent(n: u64, gens: &[FockOperator; 4], basis: &FockBasis) -> Result<(Vec<C64>, CoherentFamily)> {
    let hp = gens[0].hbar;
    let vac = vacuum(n, gens, basis)?;
    let bdag = &gens[2].block(basis, n) - &gens[3].block(basis, n) * C64::i();
    let (big, eps) = level_parity(n);
    let coeffs: Vec<f64> = (0..=big)
        .map(|j| factorial(big) / (factorial(j) * double_factorial_odd(2 * j as i64 - 2 + eps as i64) * factorial(big - j)))
        .collect();
    let mut ladder = vec![vac.clone()];
    for _ in 0..big {
        let last = nalgebra::DVector::from_vec(ladder.last().unwrap().clone());
        ladder.push((&bdag * last).iter().cloned().collect());
    }
    let kappa = (0..=big)
        .map(|j| coeffs[j] * factorial(big - j) / (factorial(big) * hp.powi(j as i32)))
        .collect();
    Ok((vac, CoherentFamily { n, hp, ladder, kappa }))
}

/// Intertwiner T from the polynomial model onto the level-n Fock block.
#[derive(Clone, Debug)]
pub struct CoherentTransform {
    pub t: DMatrix<C64>,
    pub intertwining_residual: f64,
    pub rank: usize,
    /// max_j |‖T w^j‖² − μ_j/(πħ′)| / (μ_j/(πħ′)), moments by quadrature.
    pub gram_deviation: f64,
    /// max_j relative distance between T w^j and the coherent-integral column.
    pub coherent_deviation: f64,
}

pub fn coherent_transform(n: u64, gens: &[FockOperator; 4], basis: &FockBasis, kernel: &HypergeometricKernel) -> Result<CoherentTransform> {
    let hp = gens[0].hbar;
    let rep = irreducible_rep(n, hp);
    let blocks: Vec<DMatrix<C64>> = gens.iter().map(|g| g.block(basis, n)).collect();
    let d = rep[0].nrows();
    if blocks[0].nrows() != d {
        return Err(Error::Structural(format!("level {n} block has dimension {}, model has {d}", blocks[0].nrows())));
    }
    // vec(A T − T Ǎ) = (I ⊗ A − Ǎᵀ ⊗ I) vec(T)
    let id = DMatrix::<C64>::identity(d, d);
    let mut sys = DMatrix::<C64>::zeros(4 * d * d, d * d);
    for j in 0..4 {
        let m = id.kronecker(&blocks[j]) - rep[j].transpose().kronecker(&id);
        sys.view_mut((j * d * d, 0), (d * d, d * d)).copy_from(&m);
    }
    let scale = blocks.iter().chain(&rep).map(maxabs).fold(hp, f64::max);
    let ns = null_space(&sys, NULL_REL, scale);
    if ns.ncols() != 1 {
        return Err(Error::NullSpace { expected: 1, found: ns.ncols(), context: format!("intertwiner at level {n}") });
    }
    let mut t = DMatrix::<C64>::from_column_slice(d, d, ns.column(0).as_slice());
    let (vac, fam) = vacuum_and_coherent(n, gens, basis)?;
    let col0: C64 = t.column(0).iter().zip(&vac).map(|(a, b)| b.conj() * a).sum();
    t /= col0;
    let mut resid: f64 = 0.0;
    for j in 0..4 {
        resid = resid.max(maxabs(&(&blocks[j] * &t - &t * &rep[j])));
    }
    let rank = t.clone().svd(false, false).rank(1e-10 * maxabs(&t));
    let pi = std::f64::consts::PI;
    let mut gram_dev: f64 = 0.0;
    let mut coh_dev: f64 = 0.0;
    for j in 0..d {
        let col = t.column(j);
        let norm2: f64 = col.iter().map(|c| c.norm_sqr()).sum();
        let target = kernel.moments[j] / (pi * hp);
        gram_dev = gram_dev.max((norm2 - target).abs() / target);
        let c = kernel.moments[j] / (pi * hp) * fam.kappa[j] / hp.powi(j as i32);
        let diff: f64 = col.iter().zip(&fam.ladder[j]).map(|(a, b)| (a - b * c).norm_sqr()).sum::<f64>().sqrt();
        coh_dev = coh_dev.max(diff / norm2.sqrt());
    }
    Ok(CoherentTransform { t, intertwining_residual: resid, rank, gram_deviation: gram_dev, coherent_deviation: coh_dev })
}

/// Max |⟨z|z⟩ − K(|z|²)| / K(|z|²) over the given points.
pub fn reproducing_defect(fam: &CoherentFamily, kernel: &HypergeometricKernel, points: &[C64]) -> f64 {
    points
        .iter()
        .map(|&z| {
            let v = fam.state(z);
            let nn: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            let k = kernel.k(z.norm_sqr());
            (nn - k).abs() / k
        })
        .fold(0.0, f64::max)
}

/// (1/2πħ′)∫|z⟩⟨z| dμ by radial quadrature; returns max deviation from the block identity.
pub fn projection_defect(fam: &CoherentFamily, kernel: &HypergeometricKernel) -> f64 {
    let d = fam.ladder[0].len();
    let mut p = DMatrix::<C64>::zeros(d, d);
    let hp = fam.hp;
    for (j, v) in fam.ladder.iter().enumerate() {
        // angular integration leaves κ_j² ħ′^{-2j} (1/ħ′) ∫ s^j L ds
        let radial = kernel.moments[j] / (std::f64::consts::PI * hp);
        let w = fam.kappa[j] * fam.kappa[j] / hp.powi(2 * j as i32) * radial;
        for a in 0..d {
            for b in 0..d {
                p[(a, b)] += v[a] * v[b].conj() * w;
            }
        }
    }
    maxabs(&(p - DMatrix::<C64>::identity(d, d)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KahlerIntegrals {
    pub omega: f64,
    pub measure: f64,
}

/// (1/2πħ′)∫ω = ∫₀^∞ (sK′/K)′ ds and (1/2πħ′)∫dm = ∫₀^∞ K(ħ′u)L(u) du, both with dz̄dz = 2dxdy.
pub fn kahler_identities(kernel: &HypergeometricKernel) -> Result<KahlerIntegrals> {
    let hp = kernel.hbar_prime;
    let omega = integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = hp * t / (1.0 - t);
            let (k, k1, k2) = (kernel.k(s), kernel.k_prime(s), kernel.k_second(s));
            let dens = (k1 + s * k2) / k - s * k1 * k1 / (k * k);
            dens * hp / ((1.0 - t) * (1.0 - t))
        },
        0.0,
        1.0,
        1e-12,
        1e-11,
    )?;
    let measure = integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let u = t / (1.0 - t);
            kernel.k(hp * u) * kernel.l_of_u(u) / ((1.0 - t) * (1.0 - t))
        },
        0.0,
        1.0,
        1e-12,
        1e-10,
    )?;
    Ok(KahlerIntegrals { omega, measure })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w12() -> PrimeSystem {
        PrimeSystem::new(vec![1, 2]).unwrap()
    }

    #[test]
    fn basis_level_dimensions() {
        let b = FockBasis::new(&w12(), 12);
        for level in 0..=12 {
            assert_eq!(b.level_range(level).len(), level as usize / 2 + 1);
        }
        // level 5: m1 = 1 + 2j, m2 = 2 − j
        let r = b.level_range(5);
        assert_eq!(b.states()[r.start], vec![1, 2]);
        assert_eq!(b.states()[r.start + 2], vec![5, 0]);
    }

    #[test]
    fn number_operator_diagonal() {
        let b = FockBasis::new(&w12(), 6);
        let op = build_operator(&ResonancePair::primitive(2, 0), &b, 0.3, Convention::Sqrt2).unwrap();
        for (i, m) in b.states().iter().enumerate() {
            assert!((op.mat[(i, i)].re - 0.3 * m[0] as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn convention_mismatch_rejected() {
        let b = FockBasis::new(&w12(), 4);
        let a = build_operator(&ResonancePair::primitive(2, 0), &b, 1.0, Convention::Sqrt2).unwrap();
        let c = build_operator(&ResonancePair::primitive(2, 0), &b, 1.0, Convention::Part1).unwrap();
        assert!(matches!(a.mul(&c), Err(Error::ConventionMismatch(_, _))));
    }

    #[test]
    fn cutoff_too_small() {
        let b = FockBasis::new(&w12(), 2);
        let k = ResonancePair::new(vec![4, 0], vec![0, 2]).unwrap();
        assert!(matches!(build_operator(&k, &b, 1.0, Convention::Sqrt2), Err(Error::Cutoff(_))));
    }

    #[test]
    fn f_polynomials() {
        let f = f_poly(1, 1, 0.7);
        let mut expect = Poly::zero(2);
        expect.add_term(vec![0, 1], C64::new(0.7, 0.0));
        expect.add_term(vec![1, 0], C64::new(-0.7, 0.0));
        assert!(f.distance(&expect) < 1e-14);
        assert_eq!(f_poly(1, 2, 0.5).total_degree(), 2);
        assert_eq!(f_poly(2, 3, 0.5).total_degree(), 4);
    }

    #[test]
    fn quantum_relations_hold() {
        for (n1, n2) in [(1, 1), (1, 2), (2, 3)] {
            let r = quantum_structure_2freq(n1, n2, 0.37, 14).unwrap();
            assert!(r.max_residual() < 1e-12, "{:?}", r.residuals);
        }
    }

    #[test]
    fn resonance12_fock_relations() {
        let b = FockBasis::new(&w12(), 12);
        let g = resonance12_generators(&b, 1.0).unwrap();
        for g in &g {
            assert!(maxabs(&(&g.mat - g.mat.adjoint())) < 1e-15);
        }
        for level in 0..=12 {
            let blocks: [DMatrix<C64>; 4] = std::array::from_fn(|j| g[j].block(&b, level));
            for r in relations_12(&blocks, 1.0, level) {
                assert!(r.value < 1e-12, "level {level} {}: {}", r.name, r.value);
            }
        }
    }

    #[test]
    fn irreducible_examples() {
        let a = irreducible_rep(7, 0.5);
        for j in 0..4 {
            assert!((a[0][(j, j)].re - (0.5 * 0.5 + 0.5 * j as f64)).abs() < 1e-15);
        }
        let a = irreducible_rep(0, 1.0);
        assert_eq!(a[2][(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(a[3][(0, 0)], C64::new(0.0, 0.0));
        for n in 0..=12 {
            let a = irreducible_rep(n, 0.8);
            for r in relations_12(&a, 0.8, n) {
                assert!(r.value < 1e-13, "n={n} {}: {}", r.name, r.value);
            }
        }
    }

    #[test]
    fn irreducible_exact() {
        let hp = BigRational::new(3.into(), 7.into());
        for n in 0..=9 {
            assert!(irreducible_rep_exact(n, &hp).is_empty(), "n={n}");
        }
    }

    #[test]
    fn kernel_basics() {
        for n in [0u64, 1] {
            let k = kernel_and_moments(n, 1.0).unwrap();
            assert_eq!(k.coeffs, vec![1.0]);
        }
        let k = kernel_and_moments(6, 0.7).unwrap();
        assert_eq!(k.k(0.0), 1.0);
        assert!((k.moments[0] - std::f64::consts::PI * 0.7).abs() < 1e-9);
        assert!((k.l_norm - 1.0).abs() < 1e-9);
        for (a, b) in k.moments.iter().zip(&k.moments_exact) {
            assert!((a - b).abs() / b < 1e-9, "{a} {b}");
        }
        // K solves 2ħ′sK″ + (s + εħ′)K′ − ⌊n/2⌋K = 0
        for s in [0.0, 0.3, 1.7, 5.0] {
            let r = 2.0 * 0.7 * s * k.k_second(s) + (s + 0.7) * k.k_prime(s) - 3.0 * k.k(s);
            assert!(r.abs() < 1e-10 * k.k(s).max(1.0));
        }
        for u in [0.5, 2.0, 7.0] {
            assert!(k.l_ode_residual(u).abs() < 1e-4, "{}", k.l_ode_residual(u));
        }
    }

    #[test]
    fn coherent_states_and_transform() {
        let b = FockBasis::new(&w12(), 9);
        let hp = 1.0;
        let g = resonance12_generators(&b, hp).unwrap();
        for n in [0u64, 3, 6, 9] {
            let kern = kernel_and_moments(n, hp).unwrap();
            let (vac, fam) = vacuum_and_coherent(n, &g, &b).unwrap();
            let nn: f64 = vac.iter().map(|c| c.norm_sqr()).sum();
            assert!((nn - 1.0).abs() < 1e-12);
            let z0 = fam.state(C64::new(0.0, 0.0));
            assert!(z0.iter().zip(&vac).all(|(a, b)| (a - b).norm() < 1e-15));
            let pts = [C64::new(0.3, 0.4), C64::new(-1.2, 0.7), C64::new(2.0, -2.5)];
            assert!(reproducing_defect(&fam, &kern, &pts) < 1e-12);
            assert!(projection_defect(&fam, &kern) < 1e-8);
            let t = coherent_transform(n, &g, &b, &kern).unwrap();
            assert!(t.intertwining_residual < 1e-10);
            assert_eq!(t.rank, n as usize / 2 + 1);
            assert!(t.gram_deviation < 1e-8);
            assert!(t.coherent_deviation < 1e-8);
        }
    }

    #[test]
    fn kahler_values() {
        for (n, hp) in [(0u64, 1.0), (4, 1.0), (5, 1.0), (8, 0.3)] {
            let k = kernel_and_moments(n, hp).unwrap();
            let v = kahler_identities(&k).unwrap();
            let big = (n / 2) as f64;
            assert!((v.omega - big).abs() < 1e-6, "{n}: {v:?}");
            assert!((v.measure - big - 1.0).abs() < 1e-6, "{n}: {v:?}");
        }
    }
}
