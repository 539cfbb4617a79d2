//! Operator averaging on Wick-ordered polynomials and its classical counterpart.
//!
//! A term with key `(k₊, k₋)` stands for ĝ_k = (ẑ*)^{k₋} ẑ^{k₊}, whose symbol is z^{k₊} z̄^{k₋}.
//! Coefficients are Laurent polynomials in ħ.

use crate::error::{Error, Result};
use crate::fock::{apply_monomial, build_operator, Convention, FockBasis, FockOperator};
use nalgebra::DMatrix;
use crate::lattice::{expand_in_minimal, PrimeSystem, ResonancePair};
use crate::numerics::loglog_slope;
use crate::poisson::{GeneratorId, PoissonStructure, Signature};
use crate::poly::{Poly, C64};
use crate::tolerances::SYMBOLIC_ZERO;
use serde::Serialize;
use std::collections::BTreeMap;

const PRUNE: f64 = 1e-15;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Σ c_p ħ^p over integer p.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Laurent(BTreeMap<i32, C64>);

impl Laurent {
    pub fn constant(v: C64) -> Self {
        Self::monomial(0, v)
    }

    pub fn monomial(p: i32, v: C64) -> Self {
        let mut l = Laurent::default();
        l.add_term(p, v);
        l
    }

    pub fn add_term(&mut self, p: i32, v: C64) {
        let e = self.0.entry(p).or_insert(c(0.0));
        *e += v;
        if e.norm() <= PRUNE {
            self.0.remove(&p);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.0.iter().map(|(p, v)| (*p, *v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeff(&self, p: i32) -> C64 {
        self.0.get(&p).copied().unwrap_or(c(0.0))
    }

    pub fn min_power(&self) -> Option<i32> {
        self.0.keys().next().copied()
    }

    pub fn scale(&self, v: C64) -> Laurent {
        let mut out = Laurent::default();
        for (p, x) in self.terms() {
            out.add_term(p, x * v);
        }
        out
    }

    pub fn shift(&self, by: i32) -> Laurent {
        Laurent(self.0.iter().map(|(p, v)| (p + by, *v)).collect())
    }

    pub fn mul(&self, o: &Laurent) -> Laurent {
        let mut out = Laurent::default();
        for (p, x) in self.terms() {
            for (q, y) in o.terms() {
                out.add_term(p + q, x * y);
            }
        }
        out
    }

    pub fn conj(&self) -> Laurent {
        Laurent(self.0.iter().map(|(p, v)| (*p, v.conj())).collect())
    }

    pub fn eval(&self, hbar: f64) -> C64 {
        self.terms().map(|(p, v)| v * hbar.powi(p)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn format(&self) -> String {
        let parts: Vec<String> = self
            .terms()
            .map(|(p, v)| match p {
                0 => crate::poly::fmt_c64(v),
                1 => format!("{}*hbar", crate::poly::fmt_c64(v)),
                _ => format!("{}*hbar^{}", crate::poly::fmt_c64(v), p),
            })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

pub type WickKey = (Vec<u32>, Vec<u32>);

/// Finite sum Σ c_k(ħ) ĝ_k kept in Wick normal order.
#[derive(Clone, Debug, PartialEq)]
pub struct WickPolynomial {
    modes: usize,
    convention: Convention,
    terms: BTreeMap<WickKey, Laurent>,
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

impl WickPolynomial {
    pub fn zero(modes: usize, convention: Convention) -> Self {
        WickPolynomial { modes, convention, terms: BTreeMap::new() }
    }

    pub fn identity(modes: usize, convention: Convention) -> Self {
        Self::monomial(vec![0; modes], vec![0; modes], Laurent::constant(c(1.0)), convention)
    }

    pub fn monomial(plus: Vec<u32>, minus: Vec<u32>, coeff: Laurent, convention: Convention) -> Self {
        let mut w = Self::zero(plus.len(), convention);
        w.add_term(plus, minus, coeff);
        w
    }

    /// ẑ_l.
    pub fn annihilator(modes: usize, l: usize, convention: Convention) -> Self {
        let mut e = vec![0; modes];
        e[l] = 1;
        Self::monomial(e, vec![0; modes], Laurent::constant(c(1.0)), convention)
    }

    /// ẑ*_l.
    pub fn creator(modes: usize, l: usize, convention: Convention) -> Self {
        let mut e = vec![0; modes];
        e[l] = 1;
        Self::monomial(vec![0; modes], e, Laurent::constant(c(1.0)), convention)
    }

    /// Ĥ₀ = Σ n_l ẑ*_l ẑ_l.
    pub fn harmonic(n: &PrimeSystem, convention: Convention) -> Self {
        let m = n.modes();
        let mut w = Self::zero(m, convention);
        for (l, &nl) in n.weights().iter().enumerate() {
            let mut e = vec![0; m];
            e[l] = 1;
            w.add_term(e.clone(), e, Laurent::constant(c(nl as f64)));
        }
        w
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn terms(&self) -> impl Iterator<Item = (&WickKey, &Laurent)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, plus: &[u32], minus: &[u32]) -> Laurent {
        self.terms.get(&(plus.to_vec(), minus.to_vec())).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, plus: Vec<u32>, minus: Vec<u32>, coeff: Laurent) {
        let e = self.terms.entry((plus, minus)).or_default();
        for (p, v) in coeff.terms() {
            e.add_term(p, v);
        }
        self.terms.retain(|_, v| !v.is_zero());
    }

    fn check(&self, o: &WickPolynomial) -> Result<()> {
        if self.convention != o.convention {
            return Err(Error::ConventionMismatch(self.convention.tag(), o.convention.tag()));
        }
        if self.modes != o.modes {
            return Err(Error::InvalidInput(format!("mode count {} vs {}", self.modes, o.modes)));
        }
        Ok(())
    }

    pub fn add(&self, o: &WickPolynomial) -> Result<WickPolynomial> {
        self.check(o)?;
        let mut out = self.clone();
        for ((p, m), v) in o.terms() {
            out.add_term(p.clone(), m.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, o: &WickPolynomial) -> Result<WickPolynomial> {
        self.add(&o.scale(c(-1.0)))
    }

    pub fn scale(&self, v: C64) -> WickPolynomial {
        self.map_coeffs(|l| l.scale(v))
    }

    pub fn scale_laurent(&self, v: &Laurent) -> WickPolynomial {
        self.map_coeffs(|l| l.mul(v))
    }

    fn map_coeffs<F: Fn(&Laurent) -> Laurent>(&self, f: F) -> WickPolynomial {
        let mut out = Self::zero(self.modes, self.convention);
        for ((p, m), v) in self.terms() {
            out.add_term(p.clone(), m.clone(), f(v));
        }
        out
    }

    fn filter<F: Fn(&WickKey) -> bool>(&self, keep: F) -> WickPolynomial {
        let mut out = Self::zero(self.modes, self.convention);
        for (k, v) in self.terms() {
            if keep(k) {
                out.add_term(k.0.clone(), k.1.clone(), v.clone());
            }
        }
        out
    }

    /// Hermitian adjoint.
    pub fn adjoint(&self) -> WickPolynomial {
        let mut out = Self::zero(self.modes, self.convention);
        for ((p, m), v) in self.terms() {
            out.add_term(m.clone(), p.clone(), v.conj());
        }
        out
    }

    /// Largest coefficient over all ħ powers.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|v| v.max_abs()).fold(0.0, f64::max)
    }

    /// ħ-degree range of the coefficients.
    pub fn min_hbar_power(&self) -> Option<i32> {
        self.terms.values().filter_map(|v| v.min_power()).min()
    }

    /// Coefficient of ħ^p as a polynomial in z₁..z_M, z̄₁..z̄_M.
    pub fn symbol_at(&self, p: i32) -> Poly {
        let m = self.modes;
        let mut out = Poly::zero(2 * m);
        for ((kp, km), v) in self.terms() {
            let mut e = kp.clone();
            e.extend_from_slice(km);
            out.add_term(e, v.coeff(p));
        }
        out
    }

    /// Classical symbol (ħ⁰ part).
    pub fn symbol(&self) -> Poly {
        self.symbol_at(0)
    }

    pub fn format(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for ((p, m), v) in self.terms() {
            let mut ops = Vec::new();
            for (l, &e) in m.iter().enumerate() {
                if e > 0 {
                    ops.push(if e == 1 { format!("z{}*", l + 1) } else { format!("z{}*^{}", l + 1, e) });
                }
            }
            for (l, &e) in p.iter().enumerate() {
                if e > 0 {
                    ops.push(if e == 1 { format!("z{}", l + 1) } else { format!("z{}^{}", l + 1, e) });
                }
            }
            let op = if ops.is_empty() { "1".to_string() } else { ops.join(" ") };
            parts.push(format!("({}) {}", v.format(), op));
        }
        parts.join(" + ")
    }
}

/// PQ, reordered to Wick form with [ẑ_l, ẑ*_l] = κ.
pub fn wick_product(p: &WickPolynomial, q: &WickPolynomial) -> Result<WickPolynomial> {
    p.check(q)?;
    let kfac = p.convention.kappa(1.0);
    let m = p.modes;
    let mut out = WickPolynomial::zero(m, p.convention);
    for ((ap, am), av) in p.terms() {
        for ((bp, bm), bv) in q.terms() {
            let base = av.mul(bv);
            // ẑ^{a₊} (ẑ*)^{b₋} = Σ_r C(a₊,r) C(b₋,r) r! κ^r (ẑ*)^{b₋−r} ẑ^{a₊−r}, per mode
            let mut partial: Vec<(Vec<u32>, Vec<u32>, f64, i32)> = vec![(vec![0; m], vec![0; m], 1.0, 0)];
            for l in 0..m {
                let top = ap[l].min(bm[l]);
                let mut next = Vec::with_capacity(partial.len() * (top as usize + 1));
                for (pp, mm, w, h) in &partial {
                    for r in 0..=top {
                        let f = binom(ap[l], r) * binom(bm[l], r) * factorial(r) * kfac.powi(r as i32);
                        let mut pp = pp.clone();
                        let mut mm = mm.clone();
                        pp[l] = ap[l] + bp[l] - r;
                        mm[l] = am[l] + bm[l] - r;
                        next.push((pp, mm, w * f, h + r as i32));
                    }
                }
                partial = next;
            }
            for (pp, mm, w, h) in partial {
                out.add_term(pp, mm, base.shift(h).scale(c(w)));
            }
        }
    }
    Ok(out)
}

pub fn wick_commutator(p: &WickPolynomial, q: &WickPolynomial) -> Result<WickPolynomial> {
    wick_product(p, q)?.sub(&wick_product(q, p)?)
}

/// Product of symbols (the ħ → 0 product).
pub fn symbol_product(p: &WickPolynomial, q: &WickPolynomial) -> Result<WickPolynomial> {
    p.check(q)?;
    let mut out = WickPolynomial::zero(p.modes, p.convention);
    for ((ap, am), av) in p.terms() {
        for ((bp, bm), bv) in q.terms() {
            let pp = ap.iter().zip(bp).map(|(a, b)| a + b).collect();
            let mm = am.iter().zip(bm).map(|(a, b)| a + b).collect();
            out.add_term(pp, mm, av.mul(bv));
        }
    }
    Ok(out)
}

/// Canonical bracket on polynomials in (z, z̄) with {z_l, z̄_l} = i.
pub fn canonical_bracket_z(f: &Poly, g: &Poly) -> Poly {
    let m = f.nvars() / 2;
    let mut out = Poly::zero(f.nvars());
    for l in 0..m {
        let a = &f.derivative(l) * &g.derivative(m + l);
        let b = &f.derivative(m + l) * &g.derivative(l);
        out = &out + &(&a - &b);
    }
    out.scale(C64::new(0.0, 1.0))
}

/// ω∘(k₊ − k₋).
pub fn detuning(n: &PrimeSystem, key: &WickKey) -> i64 {
    n.weights().iter().zip(key.0.iter().zip(&key.1)).map(|(w, (p, m))| w * (*p as i64 - *m as i64)).sum()
}

/// Projection onto the resonance set.
pub fn project(n: &PrimeSystem, w: &WickPolynomial) -> WickPolynomial {
    w.filter(|k| detuning(n, k) == 0)
}

/// Solution of i[Ĥ₀, f̂] = R − Π(R): returns (f̂, Π(R)).
pub fn solve_homological(n: &PrimeSystem, r: &WickPolynomial) -> Result<(WickPolynomial, WickPolynomial)> {
    if n.modes() != r.modes() {
        return Err(Error::InvalidInput("mode count mismatch".into()));
    }
    let kfac = r.convention().kappa(1.0);
    let mut f = WickPolynomial::zero(r.modes(), r.convention());
    for (key, v) in r.terms() {
        let d = detuning(n, key);
        if d != 0 {
            // [Ĥ₀, ĝ_k] = −κ d ĝ_k
            let lam = C64::new(0.0, -kfac * d as f64);
            f.add_term(key.0.clone(), key.1.clone(), v.shift(-1).scale(lam.inv()));
        }
    }
    Ok((f, project(n, r)))
}

/// Wick polynomial in generator form: one polynomial in the resonance generators and ħ.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorForm {
    pub names: Vec<String>,
    pub poly: String,
    #[serde(skip)]
    pub value: Poly,
}

#[derive(Clone, Debug)]
pub struct NormalForm {
    pub weights: PrimeSystem,
    pub orders: Vec<WickPolynomial>,
    pub generator_form: Vec<GeneratorForm>,
}

#[derive(Clone, Debug)]
pub struct AveragingResult {
    pub normal_form: NormalForm,
    pub f0: WickPolynomial,
    pub f1: WickPolynomial,
    pub h2: WickPolynomial,
    /// Max coefficients of i[Ĥ₀, f̂ⱼ] − (Ĥⱼ − H̄ⱼ), j = 0, 1.
    pub homological_residuals: [f64; 2],
    /// Max coefficients of [Ĥ₀, H̄ⱼ].
    pub commutant_residuals: [f64; 2],
}

fn homological_residual(h0: &WickPolynomial, f: &WickPolynomial, r: &WickPolynomial, rbar: &WickPolynomial) -> Result<f64> {
    let lhs = wick_commutator(h0, f)?.scale(C64::new(0.0, 1.0));
    Ok(lhs.sub(&r.sub(rbar)?)?.max_abs())
}

/// Averaging of Ĥ₀ + εĤ₁ + ε²V̂₂ to second order.
pub fn average_to_order2(n: &PrimeSystem, h1: &WickPolynomial, v2: Option<&WickPolynomial>) -> Result<AveragingResult> {
    let cv = h1.convention();
    let h0 = WickPolynomial::harmonic(n, cv);
    let (f0, h1bar) = solve_homological(n, h1)?;
    let mut h2 = wick_commutator(&f0, &h1.add(&h1bar)?)?.scale(C64::new(0.0, 0.5));
    if let Some(v) = v2 {
        h2 = h2.add(v)?;
    }
    let (f1, h2bar) = solve_homological(n, &h2)?;
    let homological_residuals =
        [homological_residual(&h0, &f0, h1, &h1bar)?, homological_residual(&h0, &f1, &h2, &h2bar)?];
    let commutant_residuals = [wick_commutator(&h0, &h1bar)?.max_abs(), wick_commutator(&h0, &h2bar)?.max_abs()];
    let ps = PoissonStructure::new(n, Signature::Compact)?;
    let generator_form = vec![generator_form(&ps, &h1bar)?, generator_form(&ps, &h2bar)?];
    Ok(AveragingResult {
        normal_form: NormalForm { weights: n.clone(), orders: vec![h1bar, h2bar], generator_form },
        f0,
        f1,
        h2,
        homological_residuals,
        commutant_residuals,
    })
}

/// Resonant symbol z^{k₊} z̄^{k₋} as a generator monomial.
fn resonant_monomial(ps: &PoissonStructure, plus: &[u32], minus: &[u32]) -> Result<Vec<u32>> {
    let k = ResonancePair::new(plus.iter().map(|&v| v as i64).collect(), minus.iter().map(|&v| v as i64).collect())?;
    let ex = expand_in_minimal(&k, &ps.basis)?;
    let mut e = vec![0u32; ps.nvars()];
    for (l, &p) in ex.primitive.iter().enumerate() {
        e[ps.index_of(&GeneratorId::Primitive(l)).expect("primitive generator")] += p as u32;
    }
    for (i, &mu) in ex.mu.iter().enumerate() {
        if mu > 0 {
            let id = GeneratorId::Lattice(ps.basis.gammas[i].clone());
            e[ps.index_of(&id).expect("lattice generator")] += mu;
        }
    }
    Ok(e)
}

/// Symbol of a resonant Wick polynomial over the generators; the last variable is ħ.
pub fn generator_form(ps: &PoissonStructure, w: &WickPolynomial) -> Result<GeneratorForm> {
    let nv = ps.nvars() + 1;
    let mut value = Poly::zero(nv);
    for ((p, m), v) in w.terms() {
        let mut e = resonant_monomial(ps, p, m)?;
        e.push(0);
        for (pw, x) in v.terms() {
            if pw < 0 {
                return Err(Error::Structural("negative power of ħ in a normal form".into()));
            }
            e[nv - 1] = pw as u32;
            value.add_term(e.clone(), x);
        }
    }
    let mut names = ps.names();
    names.push("hbar".into());
    Ok(GeneratorForm { poly: value.format(&names), names, value })
}

/// Matrix of a Wick polynomial on a truncated Fock basis at a numeric ħ.
pub fn to_fock(w: &WickPolynomial, basis: &FockBasis, hbar: f64) -> Result<FockOperator> {
    let mut out: Option<FockOperator> = None;
    for ((p, m), v) in w.terms() {
        let k = ResonancePair::new(p.iter().map(|&x| x as i64).collect(), m.iter().map(|&x| x as i64).collect())?;
        let g = build_operator(&k, basis, hbar, w.convention())?.scale(v.eval(hbar));
        out = Some(match out {
            None => g,
            Some(acc) => acc.add(&g)?,
        });
    }
    Ok(out.unwrap_or_else(|| {
        FockOperator { raise: 0, ..FockOperator::identity(basis.dim(), hbar, w.convention()).scale(c(0.0)) }
    }))
}

/// Block of a level-preserving Wick polynomial on level `level` of `basis`.
pub fn to_fock_level_block(w: &WickPolynomial, basis: &FockBasis, level: u64, hbar: f64) -> Result<DMatrix<C64>> {
    let n = basis.weights();
    if w.terms().any(|(k, _)| detuning(n, k) != 0) {
        return Err(Error::InvalidInput("Wick polynomial does not preserve the level".into()));
    }
    let r = basis.level_range(level);
    let kap = w.convention().kappa(hbar);
    let mut mat = DMatrix::<C64>::zeros(r.len(), r.len());
    for ((p, m), v) in w.terms() {
        let k = ResonancePair::new(p.iter().map(|&x| x as i64).collect(), m.iter().map(|&x| x as i64).collect())?;
        let cv = v.eval(hbar);
        for (col, st) in basis.states()[r.clone()].iter().enumerate() {
            if let Some((target, amp)) = apply_monomial(&k, st, kap) {
                let row = basis.index_of(&target).expect("level-preserving image") - r.start;
                mat[(row, col)] += cv * amp;
            }
        }
    }
    Ok(mat)
}

/// Truncation-free max entry of (Ĥ₀+εĤ₁+ε²V̂₂)Û − Û(Ĥ₀+εH̄₁+ε²H̄₂) with Û = I − iεf̂₀ − ε²(if̂₁ + f̂₀²/2).
pub fn conjugation_residual(
    n: &PrimeSystem,
    res: &AveragingResult,
    h1: &WickPolynomial,
    v2: Option<&WickPolynomial>,
    eps: f64,
    hbar: f64,
    cutoff: u64,
) -> Result<f64> {
    let cv = h1.convention();
    let basis = FockBasis::new(n, cutoff);
    let h0 = to_fock(&WickPolynomial::harmonic(n, cv), &basis, hbar)?;
    let h1m = to_fock(h1, &basis, hbar)?;
    let f0 = to_fock(&res.f0, &basis, hbar)?;
    let f1 = to_fock(&res.f1, &basis, hbar)?;
    let hb1 = to_fock(&res.normal_form.orders[0], &basis, hbar)?;
    let hb2 = to_fock(&res.normal_form.orders[1], &basis, hbar)?;
    let id = FockOperator::identity(basis.dim(), hbar, cv);
    let i = C64::new(0.0, 1.0);
    let e = c(eps);
    let u = id
        .sub(&f0.scale(i * e))?
        .sub(&f1.scale(i).add(&f0.mul(&f0)?.scale(c(0.5)))?.scale(e * e))?;
    let mut lhs_h = h0.add(&h1m.scale(e))?;
    if let Some(v) = v2 {
        lhs_h = lhs_h.add(&to_fock(v, &basis, hbar)?.scale(e * e))?;
    }
    let rhs_h = h0.add(&hb1.scale(e))?.add(&hb2.scale(e * e))?;
    let r = lhs_h.mul(&u)?.sub(&u.mul(&rhs_h)?)?;
    if r.safe_columns(&basis).is_empty() {
        return Err(Error::Cutoff(format!("cutoff {cutoff} leaves no truncation-free columns")));
    }
    Ok(r.safe_max(&basis))
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    pub eps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
}

pub fn conjugation_slope(
    n: &PrimeSystem,
    res: &AveragingResult,
    h1: &WickPolynomial,
    v2: Option<&WickPolynomial>,
    eps: &[f64],
    hbar: f64,
    cutoff: u64,
) -> Result<SlopeReport> {
    let residuals = eps
        .iter()
        .map(|&e| conjugation_residual(n, res, h1, v2, e, hbar, cutoff))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SlopeReport { eps: eps.to_vec(), slope: loglog_slope(eps, &residuals), residuals })
}

/// Wick form of a real polynomial in positions x_l = (ẑ_l + ẑ*_l)/√(2n_l) and momenta
/// p_l = i√(n_l/2)(ẑ*_l − ẑ_l), so that Ĥ₀ = Σ n_l ẑ*_l ẑ_l = Σ ½(p_l² + n_l² x_l²) − const.
/// Mixed monomials are ordered with all positions to the left of all momenta.
pub fn from_phase_space(n: &PrimeSystem, p: &Poly) -> Result<WickPolynomial> {
    let m = n.modes();
    if p.nvars() != 2 * m {
        return Err(Error::InvalidInput(format!("expected {} phase-space variables, got {}", 2 * m, p.nvars())));
    }
    let cv = Convention::Sqrt2;
    // unscaled ẑ + ẑ* and ẑ* − ẑ; the √ factors are applied once per monomial
    let mut vars = Vec::with_capacity(2 * m);
    for l in 0..m {
        vars.push(WickPolynomial::annihilator(m, l, cv).add(&WickPolynomial::creator(m, l, cv))?);
    }
    for l in 0..m {
        vars.push(WickPolynomial::creator(m, l, cv).sub(&WickPolynomial::annihilator(m, l, cv))?);
    }
    let w = n.weights();
    let mut out = WickPolynomial::zero(m, cv);
    for (e, v) in p.terms() {
        // squared scale Π (n_l/2)^{k_p} / (2n_l)^{k_x}, times i^{Σk_p}
        let mut sq = 1.0;
        let mut kp = 0;
        for l in 0..m {
            sq /= (2.0 * w[l] as f64).powi(e[l] as i32);
            sq *= (w[l] as f64 / 2.0).powi(e[m + l] as i32);
            kp += e[m + l];
        }
        let phase = [c(1.0), C64::new(0.0, 1.0), c(-1.0), C64::new(0.0, -1.0)][kp as usize % 4];
        let mut term = WickPolynomial::identity(m, cv).scale(*v * phase * sq.sqrt());
        for (i, &k) in e.iter().enumerate() {
            for _ in 0..k {
                term = wick_product(&term, &vars[i])?;
            }
        }
        out = out.add(&term)?;
    }
    Ok(out)
}

/// Parses a polynomial in x_l (aliases `x`, `y`, `q<l>`, `x<l>`) and `p<l>`; returns 2M variables.
pub fn parse_phase_polynomial(s: &str, modes: usize) -> Result<Poly> {
    let mut names: Vec<(String, usize)> = Vec::new();
    for l in 0..modes {
        names.push((format!("q{}", l + 1), l));
        names.push((format!("x{}", l + 1), l));
        names.push((format!("p{}", l + 1), modes + l));
    }
    if modes >= 1 {
        names.push(("x".into(), 0));
    }
    if modes >= 2 {
        names.push(("y".into(), 1));
    }
    let names: Vec<(String, Poly)> = names.into_iter().map(|(n, i)| (n, Poly::var(2 * modes, i))).collect();
    parse_polynomial(s, &names, 2 * modes)
}

/// Parses `+ - * / ^ ( )` expressions over named polynomials in `nvars` variables.
/// Names may carry a bracketed suffix such as `A[2,-1]`.
pub fn parse_polynomial(s: &str, names: &[(String, Poly)], nvars: usize) -> Result<Poly> {
    let mut p = PolyParser { src: s.as_bytes(), pos: 0, names, nvars };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Parse(format!("unexpected input at byte {} of {s:?}", p.pos)));
    }
    Ok(out)
}

struct PolyParser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a [(String, Poly)],
    nvars: usize,
}

impl PolyParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                -&self.term()?
            }
            Some(b'+') => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        while let Some(ch) = self.peek() {
            match ch {
                b'+' => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                b'-' => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.power()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.power()?;
                    if d.total_degree() != 0 || d.is_zero() {
                        return Err(Error::Parse("division only by nonzero numbers".into()));
                    }
                    acc = acc.scale(d.coeff(&vec![0; self.nvars]).inv());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let k: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::Parse("exponent must be a nonnegative integer".into()))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
                    self.pos += 1;
                    if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
                        self.pos += 1;
                    }
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                let txt = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let v: f64 = txt.parse().map_err(|_| Error::Parse(format!("bad number {txt:?}")))?;
                Ok(Poly::constant(self.nvars, c(v)))
            }
            Some(ch) if ch.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                if self.src.get(self.pos) == Some(&b'[') {
                    while self.pos < self.src.len() && self.src[self.pos] != b']' {
                        self.pos += 1;
                    }
                    self.pos = (self.pos + 1).min(self.src.len());
                }
                let name: String = std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap_or("")
                    .chars()
                    .filter(|ch| !ch.is_whitespace())
                    .collect();
                self.names
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, p)| p.clone())
                    .ok_or_else(|| Error::Parse(format!("unknown variable {name:?}")))
            }
            other => Err(Error::Parse(format!(
                "unexpected {:?} at byte {}",
                other.map(|b| b as char),
                self.pos
            ))),
        }
    }
}

/// Averages of the 1:1 oscillator, in X, Y, Z, W.
pub const XYZW: [&str; 4] = ["X", "Y", "Z", "W"];

/// Average over the flow of Ĥ₀ = ½|q|² + ½|p|² of a polynomial in q₁, q₂, p₁, p₂, as a polynomial
/// in X = ½(q₁²+p₁²), Y = ½(q₂²+p₂²), Z = ½(q₁q₂+p₁p₂), W = ½(p₁q₂−q₁p₂), at most linear in W.
pub fn average_11(p: &Poly) -> Result<Poly> {
    let n = PrimeSystem::new(vec![1, 1])?;
    let w = from_phase_space(&n, p)?;
    let avg = project(&n, &w);
    // z₁z̄₂ = Z + iW
    let mut out = Poly::zero(4);
    let x = Poly::var(4, 0);
    let y = Poly::var(4, 1);
    let zw = &Poly::var(4, 2) + &Poly::var(4, 3).scale(C64::new(0.0, 1.0));
    let zwb = &Poly::var(4, 2) - &Poly::var(4, 3).scale(C64::new(0.0, 1.0));
    for ((kp, km), v) in avg.terms() {
        let e1 = kp[0].min(km[0]);
        let e2 = kp[1].min(km[1]);
        let mut term = &x.pow(e1) * &y.pow(e2);
        let s = kp[0] - e1;
        let t = km[0] - e1;
        term = &term * &(&zw.pow(s) * &zwb.pow(t));
        out = &out + &term.scale(v.coeff(0));
    }
    // W² = XY − Z² on the constraint surface
    let c1 = &(&x * &y) - &Poly::var(4, 2).pow(2);
    let mut reduced = Poly::zero(4);
    for (e, v) in out.terms() {
        let mut base = e.clone();
        base[3] %= 2;
        reduced = &reduced + &(&Poly::monomial(base, *v) * &c1.pow(e[3] / 2));
    }
    Ok(reduced.prune(SYMBOLIC_ZERO))
}

/// Fourth derivatives ∂⁴V/∂q₁⁴, ∂⁴V/∂q₂⁴, ∂⁴V/∂q₁²∂q₂², ∂⁴V/∂q₁³∂q₂, ∂⁴V/∂q₁∂q₂³ at the origin.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QuarticDerivatives {
    pub d40: f64,
    pub d04: f64,
    pub d22: f64,
    pub d31: f64,
    pub d13: f64,
}

impl QuarticDerivatives {
    /// V₄(q) = Σ_{|α|=4} ∂^αV(0) q^α / α!.
    pub fn potential(&self) -> Poly {
        let q = |a: u32, b: u32, v: f64| Poly::monomial(vec![a, b, 0, 0], c(v));
        let mut p = q(4, 0, self.d40 / 24.0);
        for t in [q(0, 4, self.d04 / 24.0), q(2, 2, self.d22 / 4.0), q(3, 1, self.d31 / 6.0), q(1, 3, self.d13 / 6.0)] {
            p = &p + &t;
        }
        p
    }
}

/// f = αX² + βY² + γZ² + ½γXY + δXZ + ρYZ over (X, Y, Z).
pub fn classical_average_quartic(d: &QuarticDerivatives) -> Poly {
    let alpha = d.d40 / 16.0;
    let beta = d.d04 / 16.0;
    let gamma = d.d22 / 4.0;
    let delta = d.d31 / 4.0;
    let rho = d.d13 / 4.0;
    let mut f = Poly::zero(3);
    for (e, v) in [
        ([2, 0, 0], alpha),
        ([0, 2, 0], beta),
        ([0, 0, 2], gamma),
        ([1, 1, 0], 0.5 * gamma),
        ([1, 0, 1], delta),
        ([0, 1, 1], rho),
    ] {
        f.add_term(e.to_vec(), c(v));
    }
    f
}

/// (1/2π)∫₀^{2π} F(q cos t + p sin t, p cos t − q sin t) dt on an equispaced grid.
pub fn time_average_11(p: &Poly, q: [f64; 2], mom: [f64; 2], points: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..points {
        let t = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
        let (s, co) = t.sin_cos();
        let x = [
            c(q[0] * co + mom[0] * s),
            c(q[1] * co + mom[1] * s),
            c(mom[0] * co - q[0] * s),
            c(mom[1] * co - q[1] * s),
        ];
        acc += p.eval(&x).re;
    }
    acc / points as f64
}

/// X, Y, Z, W at a phase-space point.
pub fn xyzw(q: [f64; 2], p: [f64; 2]) -> [C64; 4] {
    [
        c(0.5 * (q[0] * q[0] + p[0] * p[0])),
        c(0.5 * (q[1] * q[1] + p[1] * p[1])),
        c(0.5 * (q[0] * q[1] + p[0] * p[1])),
        c(0.5 * (p[0] * q[1] - q[0] * p[1])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::resonance12_generators;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn n12() -> PrimeSystem {
        PrimeSystem::new(vec![1, 2]).unwrap()
    }

    fn random_wick(rng: &mut ChaCha8Rng, modes: usize, terms: usize, deg: u32) -> WickPolynomial {
        let mut w = WickPolynomial::zero(modes, Convention::Sqrt2);
        for _ in 0..terms {
            let p: Vec<u32> = (0..modes).map(|_| rng.random_range(0..=deg)).collect();
            let m: Vec<u32> = (0..modes).map(|_| rng.random_range(0..=deg)).collect();
            let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            w.add_term(p, m, Laurent::constant(v));
        }
        w
    }

    #[test]
    fn defining_commutator() {
        let a = WickPolynomial::annihilator(1, 0, Convention::Sqrt2);
        let ad = WickPolynomial::creator(1, 0, Convention::Sqrt2);
        let cm = wick_commutator(&a, &ad).unwrap();
        assert_eq!(cm.len(), 1);
        assert!((cm.coeff(&[0], &[0]).coeff(1) - c(1.0)).norm() < 1e-15);
        let a2 = WickPolynomial::annihilator(1, 0, Convention::Part1);
        assert!(matches!(wick_product(&a, &a2), Err(Error::ConventionMismatch(..))));
    }

    #[test]
    fn harmonic_commutator_is_diagonal() {
        let n = n12();
        let h0 = WickPolynomial::harmonic(&n, Convention::Sqrt2);
        let g = WickPolynomial::monomial(vec![0, 1], vec![2, 0], Laurent::constant(c(1.0)), Convention::Sqrt2);
        assert!(wick_commutator(&h0, &g).unwrap().max_abs() < 1e-15);
        let g = WickPolynomial::monomial(vec![2, 1], vec![1, 0], Laurent::constant(c(1.0)), Convention::Sqrt2);
        let cm = wick_commutator(&h0, &g).unwrap();
        let d = detuning(&n, &(vec![2, 1], vec![1, 0])) as f64;
        assert!(cm.sub(&g.scale_laurent(&Laurent::monomial(1, c(-d)))).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn product_matches_fock_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = n12();
        let basis = FockBasis::new(&n, 16);
        for _ in 0..20 {
            let p = random_wick(&mut rng, 2, 3, 2);
            let q = random_wick(&mut rng, 2, 3, 2);
            let hbar = 0.7;
            let pq = to_fock(&wick_product(&p, &q).unwrap(), &basis, hbar).unwrap();
            let pm = to_fock(&p, &basis, hbar).unwrap();
            let qm = to_fock(&q, &basis, hbar).unwrap();
            let prod = pm.mul(&qm).unwrap();
            let diff = prod.sub(&pq).unwrap();
            assert!(diff.safe_max(&basis) < 1e-10 * (1.0 + prod.safe_max(&basis)));
        }
    }

    #[test]
    fn commutator_classical_limit_is_poisson_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_wick(&mut rng, 2, 3, 2);
            let q = random_wick(&mut rng, 2, 3, 2);
            let cm = wick_commutator(&p, &q).unwrap();
            assert!(cm.min_hbar_power().is_none_or(|k| k >= 1));
            let lim = cm.symbol_at(1).scale(C64::new(0.0, 1.0));
            let pb = canonical_bracket_z(&p.symbol(), &q.symbol());
            assert!(lim.distance(&pb) < 1e-12);
        }
    }

    #[test]
    fn homological_12_cubic() {
        let n = n12();
        let h1 = from_phase_space(&n, &parse_phase_polynomial("x^2*y", 2).unwrap()).unwrap();
        let res = average_to_order2(&n, &h1, None).unwrap();
        assert!(res.homological_residuals.iter().all(|&r| r < SYMBOLIC_ZERO));
        assert!(res.commutant_residuals.iter().all(|&r| r < SYMBOLIC_ZERO));
        let hb = &res.normal_form.orders[0];
        // ¼(ẑ₁² ẑ₂* + ẑ₁*² ẑ₂) is 𝐀₃/√2 when ħ′ = ħ
        assert_eq!(hb.len(), 2);
        assert!((hb.coeff(&[2, 0], &[0, 1]).coeff(0) - c(0.25)).norm() < 1e-15);
        let hp = 0.3;
        let basis = FockBasis::new(&n, 12);
        let gens = resonance12_generators(&basis, hp).unwrap();
        let lhs = to_fock(hb, &basis, hp).unwrap();
        // same ħ, different ladder normalization: compare matrices
        let rhs = gens[2].scale(c(std::f64::consts::FRAC_1_SQRT_2));
        let diff = FockOperator { mat: &lhs.mat - &rhs.mat, ..lhs.clone() };
        assert!(diff.safe_max(&basis) < 1e-13);
    }

    #[test]
    fn conjugation_residual_cubic_slope() {
        let n = n12();
        let h1 = from_phase_space(&n, &parse_phase_polynomial("x^2*y", 2).unwrap()).unwrap();
        let res = average_to_order2(&n, &h1, None).unwrap();
        let rep = conjugation_slope(&n, &res, &h1, None, &[1e-1, 1e-2, 1e-3], 1e-3, 24).unwrap();
        assert!((rep.slope - 3.0).abs() < 0.2, "{rep:?}");
    }

    #[test]
    fn odd_perturbations_average_to_zero_at_11() {
        let n = PrimeSystem::new(vec![1, 1]).unwrap();
        for s in ["x^3", "x^2*y", "q1*q2^2 + 0.3*y^3", "p1*q2^2"] {
            let h1 = from_phase_space(&n, &parse_phase_polynomial(s, 2).unwrap()).unwrap();
            let (_, hb) = solve_homological(&n, &h1).unwrap();
            assert!(hb.is_empty(), "{s}");
        }
    }

    #[test]
    fn resonant_input_is_its_own_average() {
        let n = n12();
        let h1 = WickPolynomial::monomial(vec![2, 0], vec![0, 1], Laurent::constant(c(0.5)), Convention::Sqrt2);
        let h1 = h1.add(&h1.adjoint()).unwrap();
        let (f0, hb) = solve_homological(&n, &h1).unwrap();
        assert!(f0.is_empty());
        assert_eq!(hb, h1);
        let zero = WickPolynomial::zero(2, Convention::Sqrt2);
        let res = average_to_order2(&n, &zero, None).unwrap();
        assert!(res.normal_form.orders.iter().all(|w| w.is_empty()));
        assert!(res.f0.is_empty() && res.f1.is_empty());
    }

    #[test]
    fn classical_homological_from_symbols() {
        let n = n12();
        let h1 = from_phase_space(&n, &parse_phase_polynomial("x^2*y + 0.3*x*y^2 + p1*y", 2).unwrap()).unwrap();
        let (f0, hb) = solve_homological(&n, &h1).unwrap();
        let h0 = WickPolynomial::harmonic(&n, Convention::Sqrt2).symbol();
        // ħf̂₀ has the classical solution as its symbol
        let f_cl = f0.symbol_at(-1);
        let lhs = canonical_bracket_z(&h0, &f_cl);
        let rhs = &h1.symbol() - &hb.symbol();
        assert!(lhs.distance(&rhs) < 1e-13);
    }

    #[test]
    fn quartic_table() {
        let cases = [
            ("q1^4", "1.5*X^2"),
            ("q2^4", "1.5*Y^2"),
            ("q1*q2^3", "1.5*Y*Z"),
            ("q1^3*q2", "1.5*X*Z"),
            ("q1^2*q2^2", "0.5*X*Y + Z^2"),
        ];
        let names: Vec<String> = XYZW.iter().map(|s| s.to_string()).collect();
        for (mono, want) in cases {
            let avg = average_11(&parse_phase_polynomial(mono, 2).unwrap()).unwrap();
            let mut w = Poly::zero(4);
            for part in want.split(" + ") {
                let mut f = part.split('*');
                let coef: f64 = f.next().unwrap().parse().unwrap_or(1.0);
                let mut e = vec![0u32; 4];
                let vars: Vec<&str> = if part.starts_with(|ch: char| ch.is_ascii_digit()) {
                    f.collect()
                } else {
                    part.split('*').collect()
                };
                for v in vars {
                    let (nm, k) = v.split_once('^').map(|(a, b)| (a, b.parse().unwrap())).unwrap_or((v, 1));
                    e[names.iter().position(|s| s == nm).unwrap()] += k;
                }
                w.add_term(e, c(coef));
            }
            assert!(avg.distance(&w) < 1e-14, "{mono}: {}", avg.format(&names));
        }
    }

    #[test]
    fn quartic_formula_matches_projection_and_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let d = QuarticDerivatives {
                d40: rng.random_range(-2.0..2.0),
                d04: rng.random_range(-2.0..2.0),
                d22: rng.random_range(-2.0..2.0),
                d31: rng.random_range(-2.0..2.0),
                d13: rng.random_range(-2.0..2.0),
            };
            let v = d.potential();
            let f = classical_average_quartic(&d);
            let avg = average_11(&v).unwrap();
            let f4 = f.remap(4, &[0, 1, 2]);
            assert!(avg.distance(&f4) < 1e-14);
            for _ in 0..4 {
                let q = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let num = time_average_11(&v, q, p, 64);
                let sym = f4.eval(&xyzw(q, p)).re;
                assert!((num - sym).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quartic_second_order_slope() {
        let n = n12();
        let h1 = from_phase_space(&n, &parse_phase_polynomial("x^2*y", 2).unwrap()).unwrap();
        let v2 = from_phase_space(&n, &parse_phase_polynomial("0.125*x^4", 2).unwrap()).unwrap();
        let res = average_to_order2(&n, &h1, Some(&v2)).unwrap();
        assert!(res.homological_residuals.iter().all(|&r| r < SYMBOLIC_ZERO));
        let rep = conjugation_slope(&n, &res, &h1, Some(&v2), &[1e-1, 1e-2, 1e-3], 1e-3, 24).unwrap();
        assert!((rep.slope - 3.0).abs() < 0.2, "{rep:?}");
        assert!(res.normal_form.generator_form[1].value.len() > 0);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(parse_phase_polynomial("x^2*", 2).is_err());
        assert!(parse_phase_polynomial("w", 2).is_err());
        assert!(parse_phase_polynomial("(x+y", 2).is_err());
        let p = parse_phase_polynomial("-(x + 2*y)^2 / 4 + 1e-1*p2", 2).unwrap();
        assert!((p.coeff(&[0, 1, 0, 0]) - c(0.0)).norm() < 1e-15);
        assert!((p.coeff(&[1, 1, 0, 0]) - c(-1.0)).norm() < 1e-15);
        assert!((p.coeff(&[0, 0, 0, 1]) - c(0.1)).norm() < 1e-15);
    }

    fn classical(rng: &mut ChaCha8Rng) -> WickPolynomial {
        random_wick(rng, 2, 4, 2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projection_is_idempotent(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = n12();
            let w = random_wick(&mut rng, 2, 6, 3);
            let p = project(&n, &w);
            prop_assert_eq!(project(&n, &p), p);
        }

        #[test]
        fn product_anomaly_identity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = n12();
            let f = classical(&mut rng);
            let g = classical(&mut rng);
            let lhs = project(&n, &symbol_product(&f, &g).unwrap())
                .sub(&symbol_product(&project(&n, &f), &project(&n, &g)).unwrap()).unwrap();
            let off_f = f.sub(&project(&n, &f)).unwrap();
            let off_g = g.sub(&project(&n, &g)).unwrap();
            let cross = project(&n, &symbol_product(&off_f, &off_g).unwrap());
            prop_assert!(lhs.sub(&cross).unwrap().max_abs() < 1e-13);
        }

        #[test]
        fn averaged_terms_commute_with_h0(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = n12();
            let h1 = random_wick(&mut rng, 2, 5, 2);
            let h1 = h1.add(&h1.adjoint()).unwrap();
            let res = average_to_order2(&n, &h1, None).unwrap();
            prop_assert!(res.commutant_residuals.iter().all(|&r| r < SYMBOLIC_ZERO));
            prop_assert!(res.homological_residuals.iter().all(|&r| r < 1e-11));
        }

        #[test]
        fn product_is_associative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_wick(&mut rng, 2, 2, 2);
            let b = random_wick(&mut rng, 2, 2, 2);
            let cc = random_wick(&mut rng, 2, 2, 2);
            let l = wick_product(&wick_product(&a, &b).unwrap(), &cc).unwrap();
            let r = wick_product(&a, &wick_product(&b, &cc).unwrap()).unwrap();
            prop_assert!(l.sub(&r).unwrap().max_abs() < 1e-11);
        }
    }
}
