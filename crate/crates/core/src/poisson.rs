//! Classical resonance Poisson algebra: generator table, constraint rewriting, Casimirs,
//! phase-space realization, Jacobi checks and triple brackets.

use crate::error::{Error, Result};
use crate::lattice::{
    self, anomaly, enumerate_minimal_elements, expand_in_minimal, lattice_bracket, MinimalBasis, PrimeSystem,
    ResonancePair,
};
use crate::numerics::{dopri5, OdeOptions};
use crate::poly::{Poly, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::HashMap;

/// Compact: the usual oscillator, {z, z̄} = i. Split: the inverted oscillator with real
/// light-cone coordinates u = (q+p)/√2, v = (q−p)/√2 and {u, v} = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Signature {
    Compact,
    Split,
}

impl Signature {
    pub fn unit(self) -> C64 {
        match self {
            Signature::Compact => C64::i(),
            Signature::Split => C64::new(1.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum GeneratorId {
    Primitive(usize),
    Lattice(Vec<i64>),
}

impl GeneratorId {
    pub fn conj(&self) -> GeneratorId {
        match self {
            GeneratorId::Primitive(l) => GeneratorId::Primitive(*l),
            GeneratorId::Lattice(g) => GeneratorId::Lattice(lattice::neg(g)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            GeneratorId::Primitive(l) => format!("A{}", l + 1),
            GeneratorId::Lattice(g) => {
                let s: Vec<String> = g.iter().map(|v| v.to_string()).collect();
                format!("A[{}]", s.join(","))
            }
        }
    }

    /// Exponents (k₊, k₋) of the realizing monomial z^{k₊} z̄^{k₋}.
    pub fn pair(&self, m: usize) -> ResonancePair {
        match self {
            GeneratorId::Primitive(l) => ResonancePair::primitive(m, *l),
            GeneratorId::Lattice(g) => ResonancePair::from_clean(g),
        }
    }

    /// Degree in the phase-space coordinates.
    pub fn degree(&self) -> u32 {
        match self {
            GeneratorId::Primitive(_) => 2,
            GeneratorId::Lattice(g) => g.iter().map(|v| v.unsigned_abs() as u32).sum(),
        }
    }
}

/// Polynomial bracket table over the generators 𝒜_{I_1..I_M} followed by 𝒜_γ, γ ∈ Γ_n.
#[derive(Clone, Debug)]
pub struct PoissonStructure {
    pub n: PrimeSystem,
    pub basis: MinimalBasis,
    pub signature: Signature,
    ids: Vec<GeneratorId>,
    table: Vec<Vec<Poly>>,
    rewrites: HashMap<(usize, usize), Vec<u32>>,
    pub constraints: Vec<Poly>,
    pub casimirs: Vec<Poly>,
}

pub fn build_classical_algebra(n: &PrimeSystem) -> Result<PoissonStructure> {
    PoissonStructure::new(n, Signature::Compact)
}

impl PoissonStructure {
    pub fn new(n: &PrimeSystem, signature: Signature) -> Result<Self> {
        let basis = enumerate_minimal_elements(n)?;
        let m = n.modes();
        let mut ids: Vec<GeneratorId> = (0..m).map(GeneratorId::Primitive).collect();
        ids.extend(basis.gammas.iter().cloned().map(GeneratorId::Lattice));
        let nv = ids.len();
        let c = signature.unit();
        let mut table = vec![vec![Poly::zero(nv); nv]; nv];
        let mut rewrites = HashMap::new();

        for (gi, g) in basis.gammas.iter().enumerate() {
            let a = m + gi;
            for j in 0..m {
                if g[j] != 0 {
                    let mut e = vec![0u32; nv];
                    e[a] = 1;
                    let p = Poly::monomial(e, c * g[j] as f64);
                    table[j][a] = -&p;
                    table[a][j] = p;
                }
            }
        }
        for (ai, alpha) in basis.gammas.iter().enumerate() {
            for (bi, beta) in basis.gammas.iter().enumerate().skip(ai + 1) {
                let s = anomaly(alpha, beta);
                let br = lattice_bracket(alpha, beta);
                let pa = ResonancePair::from_clean(alpha);
                let pb = ResonancePair::from_clean(beta);
                let exp = expand_in_minimal(&pa.add(&pb), &basis)?;
                let mut mono = vec![0u32; nv];
                for l in 0..m {
                    mono[l] = s[l] as u32;
                }
                for (k, &mu) in exp.mu.iter().enumerate() {
                    mono[m + k] = mu;
                }
                let mut p = Poly::zero(nv);
                for l in 0..m {
                    if br[l] != 0 {
                        let mut e = mono.clone();
                        e[l] -= 1;
                        p.add_term(e, c * br[l] as f64);
                    }
                }
                table[m + bi][m + ai] = -&p;
                table[m + ai][m + bi] = p;
                if s.iter().any(|&v| v != 0) {
                    rewrites.insert((m + ai, m + bi), mono);
                }
            }
        }

        let mut constraints = Vec::new();
        let mut keys: Vec<_> = rewrites.keys().cloned().collect();
        keys.sort();
        for (a, b) in keys {
            let mut e = vec![0u32; nv];
            e[a] += 1;
            e[b] += 1;
            let mut p = Poly::monomial(e, C64::new(1.0, 0.0));
            p.add_term(rewrites[&(a, b)].clone(), C64::new(-1.0, 0.0));
            constraints.push(p);
        }

        let mut c0 = Poly::zero(nv);
        for (l, &w) in n.weights().iter().enumerate() {
            c0.add_term(unit_exp(nv, l), C64::new(w as f64, 0.0));
        }
        let mut casimirs = vec![c0];
        if m == 2 {
            let ia = m + basis.index_of(&[n.weights()[1], -n.weights()[0]]).expect("α in Γ");
            let ib = m + basis.index_of(&[-n.weights()[1], n.weights()[0]]).expect("−α in Γ");
            let mut e = vec![0u32; nv];
            e[ia] = 1;
            e[ib] = 1;
            let mut c1 = Poly::monomial(e, C64::new(1.0, 0.0));
            let mut r = vec![0u32; nv];
            r[0] = n.weights()[1] as u32;
            r[1] = n.weights()[0] as u32;
            c1.add_term(r, C64::new(-1.0, 0.0));
            casimirs.push(c1);
        }

        Ok(PoissonStructure { n: n.clone(), basis, signature, ids, table, rewrites, constraints, casimirs })
    }

    pub fn modes(&self) -> usize {
        self.n.modes()
    }

    pub fn nvars(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[GeneratorId] {
        &self.ids
    }

    pub fn names(&self) -> Vec<String> {
        self.ids.iter().map(GeneratorId::name).collect()
    }

    pub fn index_of(&self, id: &GeneratorId) -> Option<usize> {
        match id {
            GeneratorId::Primitive(l) if *l < self.modes() => Some(*l),
            GeneratorId::Primitive(_) => None,
            GeneratorId::Lattice(g) => self.basis.index_of(g).map(|i| i + self.modes()),
        }
    }

    pub fn generator(&self, id: &GeneratorId) -> Result<Poly> {
        let i = self
            .index_of(id)
            .ok_or_else(|| Error::InvalidInput(format!("{} is not a generator", id.name())))?;
        Ok(Poly::var(self.nvars(), i))
    }

    pub fn var(&self, i: usize) -> Poly {
        Poly::var(self.nvars(), i)
    }

    /// {𝒜_a, 𝒜_b} as stored.
    pub fn entry(&self, a: usize, b: usize) -> &Poly {
        &self.table[a][b]
    }

    /// Applies 𝒜_α𝒜_β → 𝒜_I^{α∘̇β}Π𝒜_γ^μ to every monomial containing a pair with nonzero anomaly.
    pub fn reduce(&self, p: &Poly) -> Poly {
        let m = self.modes();
        let nv = self.nvars();
        let mut out = Poly::zero(nv);
        for (e, c) in p.terms() {
            let mut e = e.clone();
            'outer: loop {
                for a in m..nv {
                    if e[a] == 0 {
                        continue;
                    }
                    for b in a + 1..nv {
                        if e[b] == 0 {
                            continue;
                        }
                        if let Some(r) = self.rewrites.get(&(a, b)) {
                            e[a] -= 1;
                            e[b] -= 1;
                            for (x, y) in e.iter_mut().zip(r) {
                                *x += y;
                            }
                            continue 'outer;
                        }
                    }
                }
                break;
            }
            out.add_term(e, *c);
        }
        out
    }

    /// Leibniz extension of the table, reduced to canonical form.
    pub fn poisson_bracket(&self, f: &Poly, g: &Poly) -> Poly {
        let nv = self.nvars();
        let df: Vec<Poly> = (0..nv).map(|i| f.derivative(i)).collect();
        let dg: Vec<Poly> = (0..nv).map(|i| g.derivative(i)).collect();
        let mut acc = Poly::zero(nv);
        for a in 0..nv {
            if df[a].is_zero() {
                continue;
            }
            for b in 0..nv {
                if dg[b].is_zero() || self.table[a][b].is_zero() {
                    continue;
                }
                acc = acc + &(&df[a] * &dg[b]) * &self.table[a][b];
            }
        }
        self.reduce(&acc)
    }

    /// Conjugate polynomial: conjugated coefficients, 𝒜_γ ↦ 𝒜_{−γ}.
    pub fn conj(&self, p: &Poly) -> Poly {
        let m = self.modes();
        let map: Vec<usize> = (0..self.nvars())
            .map(|i| if i < m { i } else { m + self.basis.negation_index(i - m) })
            .collect();
        p.conj_coeffs().remap(self.nvars(), &map)
    }

    /// Generator values from paired coordinates (x, y): (z, z̄) for Compact, (u, v) for Split.
    pub fn realize_xy(&self, x: &[C64], y: &[C64]) -> Vec<C64> {
        self.ids
            .iter()
            .map(|id| {
                let k = id.pair(self.modes());
                let mut v = C64::new(1.0, 0.0);
                for l in 0..self.modes() {
                    v *= x[l].powu(k.plus[l] as u32) * y[l].powu(k.minus[l] as u32);
                }
                v
            })
            .collect()
    }

    /// Realization 𝒜_k ↦ z^{k₊}z̄^{k₋}.
    pub fn realize(&self, z: &[C64]) -> Vec<C64> {
        let zb: Vec<C64> = z.iter().map(|v| v.conj()).collect();
        self.realize_xy(z, &zb)
    }

    /// Random paired coordinates of unit scale for the signature.
    pub fn random_xy(&self, rng: &mut ChaCha8Rng) -> (Vec<C64>, Vec<C64>) {
        let m = self.modes();
        match self.signature {
            Signature::Compact => {
                let z: Vec<C64> = (0..m).map(|_| random_disk(rng)).collect();
                let zb = z.iter().map(|v| v.conj()).collect();
                (z, zb)
            }
            Signature::Split => {
                let u = (0..m).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
                let v = (0..m).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
                (u, v)
            }
        }
    }

    pub fn random_surface_point(&self, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let (x, y) = self.random_xy(rng);
        self.realize_xy(&x, &y)
    }

    /// Generator values off the constraint surface: real primitives and conjugate lattice pairs.
    pub fn random_free_point(&self, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let m = self.modes();
        let mut v = vec![C64::new(0.0, 0.0); self.nvars()];
        for x in v.iter_mut().take(m) {
            *x = C64::new(rng.random_range(-1.0..1.0), 0.0);
        }
        for i in 0..self.basis.gammas.len() {
            let j = self.basis.negation_index(i);
            if j < i {
                continue;
            }
            match self.signature {
                Signature::Compact => {
                    let w = random_disk(rng);
                    v[m + i] = w;
                    v[m + j] = w.conj();
                }
                Signature::Split => {
                    v[m + i] = C64::new(rng.random_range(-1.0..1.0), 0.0);
                    v[m + j] = C64::new(rng.random_range(-1.0..1.0), 0.0);
                }
            }
        }
        v
    }

    pub fn constraint_residual(&self, v: &[C64]) -> f64 {
        let scale = v.iter().map(|x| x.norm()).fold(1.0, f64::max);
        self.constraints.iter().map(|c| c.eval(v).norm() / c.eval_scale(v).max(scale)).fold(0.0, f64::max)
    }

    /// Realizing monomial of a generator in the 2M paired coordinates.
    pub fn phase_monomial(&self, i: usize) -> Poly {
        let m = self.modes();
        let k = self.ids[i].pair(m);
        let mut e = vec![0u32; 2 * m];
        for l in 0..m {
            e[l] = k.plus[l] as u32;
            e[m + l] = k.minus[l] as u32;
        }
        Poly::monomial(e, C64::new(1.0, 0.0))
    }

    /// Canonical bracket on R^{2M}: c Σ (∂_x F ∂_y G − ∂_y F ∂_x G).
    pub fn canonical_bracket(&self, f: &Poly, g: &Poly) -> Poly {
        let m = self.modes();
        let c = self.signature.unit();
        let mut acc = Poly::zero(2 * m);
        for l in 0..m {
            acc = acc + &f.derivative(l) * &g.derivative(m + l);
            acc = acc - &f.derivative(m + l) * &g.derivative(l);
        }
        acc.scale(c)
    }

    /// Max relative mismatch between the table and canonical brackets of realized monomials.
    pub fn canonical_check(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nv = self.nvars();
        let mono: Vec<Poly> = (0..nv).map(|i| self.phase_monomial(i)).collect();
        let mut canon = vec![vec![Poly::zero(2 * self.modes()); nv]; nv];
        for a in 0..nv {
            for b in 0..nv {
                canon[a][b] = self.canonical_bracket(&mono[a], &mono[b]);
            }
        }
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (x, y) = self.random_xy(&mut rng);
            let xy: Vec<C64> = x.iter().chain(&y).cloned().collect();
            let v = self.realize_xy(&x, &y);
            for a in 0..nv {
                for b in 0..nv {
                    let lhs = canon[a][b].eval(&xy);
                    let rhs = self.table[a][b].eval(&v);
                    let scale = canon[a][b].eval_scale(&xy).max(1.0);
                    worst = worst.max((lhs - rhs).norm() / scale);
                }
            }
        }
        worst
    }

    fn table_gradients(&self) -> Vec<Vec<Vec<Poly>>> {
        let nv = self.nvars();
        (0..nv)
            .map(|a| (0..nv).map(|b| (0..nv).map(|d| self.table[a][b].derivative(d)).collect()).collect())
            .collect()
    }

    fn jacobi_at(&self, grads: &[Vec<Vec<Poly>>], v: &[C64]) -> f64 {
        let nv = self.nvars();
        let t: Vec<Vec<C64>> = (0..nv).map(|a| (0..nv).map(|b| self.table[a][b].eval(v)).collect()).collect();
        let mut dt = vec![vec![vec![C64::new(0.0, 0.0); nv]; nv]; nv];
        for a in 0..nv {
            for b in a + 1..nv {
                for d in 0..nv {
                    let g = &grads[a][b][d];
                    if !g.is_zero() {
                        let val = g.eval(v);
                        dt[a][b][d] = val;
                        dt[b][a][d] = -val;
                    }
                }
            }
        }
        let mut worst: f64 = 0.0;
        for a in 0..nv {
            for b in a + 1..nv {
                for c in b + 1..nv {
                    let mut j = C64::new(0.0, 0.0);
                    for d in 0..nv {
                        j += dt[a][b][d] * t[d][c] + dt[b][c][d] * t[d][a] + dt[c][a][d] * t[d][b];
                    }
                    worst = worst.max(j.norm());
                }
            }
        }
        worst
    }

    /// Cyclic-sum Jacobi residual on the constraint surface and, for M = 2, off it.
    pub fn verify_jacobi(&self, samples: usize, seed: u64) -> JacobiReport {
        let grads = self.table_gradients();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut on: f64 = 0.0;
        let mut constraint: f64 = 0.0;
        for _ in 0..samples.max(1) {
            let v = self.random_surface_point(&mut rng);
            constraint = constraint.max(self.constraint_residual(&v));
            on = on.max(self.jacobi_at(&grads, &v));
        }
        let off = (self.modes() == 2).then(|| {
            (0..samples.max(1))
                .map(|_| {
                    let v = self.random_free_point(&mut rng);
                    self.jacobi_at(&grads, &v)
                })
                .fold(0.0, f64::max)
        });
        JacobiReport { samples, seed, on_surface: on, off_surface: off, constraint_residual: constraint }
    }

    /// Max |{C, 𝒜}| coefficient over all Casimirs and generators after reduction.
    pub fn casimir_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.casimirs {
            for i in 0..self.nvars() {
                worst = worst.max(self.poisson_bracket(c, &self.var(i)).max_abs_coeff());
            }
        }
        worst
    }

    /// The 1:1 and 1:2 style real coordinates X = 𝒜₁, Y = 𝒜₂, Z + iW = 2^{1−|α|/2}𝒜_α with α = (n₂,−n₁).
    pub fn real_coordinates(&self) -> Result<[Poly; 4]> {
        if self.modes() != 2 || self.signature != Signature::Compact {
            return Err(Error::InvalidInput("real coordinates need a compact two-mode structure".into()));
        }
        let w = self.n.weights();
        let alpha = vec![w[1], -w[0]];
        let a = self.generator(&GeneratorId::Lattice(alpha.clone()))?;
        let ab = self.generator(&GeneratorId::Lattice(lattice::neg(&alpha)))?;
        let deg = (w[0] + w[1]) as f64;
        let s = 2f64.powf(1.0 - deg / 2.0);
        let z = (&a + &ab).scale(C64::new(s / 2.0, 0.0));
        let wv = (&a - &ab).scale(C64::new(0.0, -s / 2.0));
        Ok([self.var(0), self.var(1), z, wv])
    }

    fn poly_degrees(&self, p: &Poly) -> Vec<u32> {
        let mut ds: Vec<u32> = p
            .terms()
            .map(|(e, _)| e.iter().zip(&self.ids).map(|(k, id)| k * id.degree()).sum())
            .collect();
        ds.sort();
        ds.dedup();
        ds
    }

    /// Expresses `target` as a polynomial in the given observables on the constraint surface.
    /// Returns `None` if no polynomial of matching phase-space degree fits.
    pub fn express_in(&self, target: &Poly, obs: &[Poly], seed: u64) -> Option<Poly> {
        let k = obs.len();
        if target.is_zero() {
            return Some(Poly::zero(k));
        }
        let obs_deg: Vec<u32> = obs.iter().map(|o| *self.poly_degrees(o).last().unwrap_or(&0)).collect();
        let mut cands: Vec<Vec<u32>> = Vec::new();
        for d in self.poly_degrees(target) {
            let mut cur = vec![0u32; k];
            weighted_compositions(&obs_deg, d, 0, &mut cur, &mut cands);
        }
        if cands.is_empty() {
            return None;
        }
        let rows = 3 * cands.len() + 12;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::<C64>::zeros(rows, cands.len());
        let mut rhs = DVector::<C64>::zeros(rows);
        for r in 0..rows {
            let v = self.random_surface_point(&mut rng);
            let ov: Vec<C64> = obs.iter().map(|o| o.eval(&v)).collect();
            for (c, e) in cands.iter().enumerate() {
                a[(r, c)] = e.iter().zip(&ov).map(|(&p, x)| x.powu(p)).product();
            }
            rhs[r] = target.eval(&v);
        }
        let svd = a.clone().svd(true, true);
        let sol = svd.solve(&rhs, 1e-12).ok()?;
        let resid = (&a * &sol - &rhs).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let scale = rhs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if resid > 1e-9 * scale.max(1.0) {
            return None;
        }
        let mut out = Poly::zero(k);
        let cmax = sol.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (e, c) in cands.into_iter().zip(sol.iter()) {
            if c.norm() > 1e-10 * cmax.max(1.0) {
                out.add_term(e, snap(*c));
            }
        }
        Some(out)
    }

    /// {{F,G},E} for F, G, E in L₀, after checking {L₀, L₁} ⊂ polynomials in L₀.
    pub fn triple_bracket(
        &self,
        l0: &[(String, Poly)],
        l1: &[(String, Poly)],
        seed: u64,
    ) -> Result<Vec<TripleEntry>> {
        let obs: Vec<Poly> = l0.iter().map(|(_, p)| p.clone()).collect();
        for (fname, f) in l0 {
            for (gname, g) in l1 {
                let br = self.poisson_bracket(f, g);
                if self.express_in(&br, &obs, seed).is_none() {
                    return Err(Error::Closure(fname.clone(), gname.clone()));
                }
            }
        }
        let mut out = Vec::new();
        for (i, (fname, f)) in l0.iter().enumerate() {
            for (j, (gname, g)) in l0.iter().enumerate() {
                let fg = self.poisson_bracket(f, g);
                for (k, (ename, e)) in l0.iter().enumerate() {
                    let t = self.poisson_bracket(&fg, e);
                    let value = self
                        .express_in(&t, &obs, seed)
                        .ok_or_else(|| Error::Closure(format!("{{{fname},{gname}}}"), ename.clone()))?;
                    out.push(TripleEntry { f: i, g: j, e: k, value });
                }
            }
        }
        Ok(out)
    }

    /// Hamiltonian vector field d𝒜_d/dt = Σ_a ∂_a f {𝒜_a, 𝒜_d} at generator values v.
    pub fn flow_field(&self, grad_f: &[Poly], v: &[C64]) -> Vec<C64> {
        let nv = self.nvars();
        let g: Vec<C64> = grad_f.iter().map(|p| p.eval(v)).collect();
        (0..nv)
            .map(|d| {
                (0..nv)
                    .filter(|&a| g[a].norm() > 0.0)
                    .map(|a| g[a] * self.table[a][d].eval(v))
                    .sum()
            })
            .collect()
    }

    /// Integrates the flow of `f` from `v0` and returns generator values at `times`.
    pub fn integrate_flow(&self, f: &Poly, v0: &[C64], times: &[f64], opts: OdeOptions) -> Result<Vec<Vec<C64>>> {
        let nv = self.nvars();
        let grad: Vec<Poly> = (0..nv).map(|i| f.derivative(i)).collect();
        let y0: Vec<f64> = v0.iter().flat_map(|c| [c.re, c.im]).collect();
        let sol = dopri5(
            |_, y, dy| {
                let v: Vec<C64> = y.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
                for (i, w) in self.flow_field(&grad, &v).into_iter().enumerate() {
                    dy[2 * i] = w.re;
                    dy[2 * i + 1] = w.im;
                }
            },
            &y0,
            times,
            opts,
        )?;
        Ok(sol.into_iter().map(|y| y.chunks(2).map(|c| C64::new(c[0], c[1])).collect()).collect())
    }

    /// Largest constraint residual along the flow of `f` started on the surface.
    pub fn flow_constraint_drift(&self, f: &Poly, v0: &[C64], t: f64, steps: usize) -> Result<f64> {
        let times: Vec<f64> = (0..=steps).map(|i| t * i as f64 / steps as f64).collect();
        let traj = self.integrate_flow(f, v0, &times, OdeOptions::default())?;
        Ok(traj.iter().map(|v| self.constraint_residual(v)).fold(0.0, f64::max))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JacobiReport {
    pub samples: usize,
    pub seed: u64,
    pub on_surface: f64,
    pub off_surface: Option<f64>,
    pub constraint_residual: f64,
}

impl JacobiReport {
    pub fn max_residual(&self) -> f64 {
        self.on_surface.max(self.off_surface.unwrap_or(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct TripleEntry {
    pub f: usize,
    pub g: usize,
    pub e: usize,
    pub value: Poly,
}

fn unit_exp(nv: usize, i: usize) -> Vec<u32> {
    let mut e = vec![0u32; nv];
    e[i] = 1;
    e
}

fn random_disk(rng: &mut ChaCha8Rng) -> C64 {
    loop {
        let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if z.norm_sqr() <= 1.0 {
            return z;
        }
    }
}

/// Rounds components that sit within 1e−10 of a multiple of 1/48.
fn snap(c: C64) -> C64 {
    let r = |x: f64| {
        let q = (x * 48.0).round() / 48.0;
        if (x - q).abs() < 1e-10 {
            q
        } else {
            x
        }
    };
    C64::new(r(c.re), r(c.im))
}

fn weighted_compositions(w: &[u32], rest: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos == w.len() {
        if rest == 0 {
            out.push(cur.clone());
        }
        return;
    }
    if w[pos] == 0 {
        cur[pos] = 0;
        weighted_compositions(w, rest, pos + 1, cur, out);
        return;
    }
    for k in 0..=rest / w[pos] {
        cur[pos] = k;
        weighted_compositions(w, rest - k * w[pos], pos + 1, cur, out);
    }
    cur[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(v: &[i64]) -> PrimeSystem {
        PrimeSystem::new(v.to_vec()).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn bracket_12_matches_closed_form() {
        let s = build_classical_algebra(&ps(&[1, 2])).unwrap();
        let a = s.generator(&GeneratorId::Lattice(vec![2, -1])).unwrap();
        let ab = s.generator(&GeneratorId::Lattice(vec![-2, 1])).unwrap();
        let br = s.poisson_bracket(&a, &ab);
        // i(n₂²𝒜₂ − n₁²𝒜₁)𝒜₁^{n₂−1}𝒜₂^{n₁−1} with (n₁,n₂) = (1,2)
        let x = s.var(0);
        let y = s.var(1);
        let expect = (&(&x * &y).scale(c(4.0)) - &(&x * &x)).scale(C64::i());
        assert!(br.distance(&expect) < 1e-14);
    }

    #[test]
    fn primitive_brackets() {
        let s = build_classical_algebra(&ps(&[2, 3])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(s.entry(i, j).is_zero());
            }
        }
        for (gi, g) in s.basis.gammas.iter().enumerate() {
            for j in 0..2 {
                let e = s.poisson_bracket(&s.var(2 + gi), &s.var(j));
                let expect = s.var(2 + gi).scale(C64::i() * g[j] as f64);
                assert!(e.distance(&expect) < 1e-15);
            }
        }
    }

    #[test]
    fn realization_example() {
        let s = build_classical_algebra(&ps(&[1, 2])).unwrap();
        let v = s.realize(&[c(1.0), c(1.0)]);
        for x in &v {
            assert!((x - c(1.0)).norm() < 1e-15);
        }
        assert!(s.constraint_residual(&v) < 1e-15);
        let z = [C64::new(0.3, -0.2), C64::new(-0.5, 0.4)];
        let v = s.realize(&z);
        let h0 = z[0].norm_sqr() + 2.0 * z[1].norm_sqr();
        assert!((s.casimirs[0].eval(&v) - c(h0)).norm() < 1e-15);
        assert!(s.casimirs[1].eval(&v).norm() < 1e-15);
        assert!(s.realize(&[c(0.0), c(0.0)]).iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn casimirs_central() {
        for n in [vec![1, 1], vec![1, 2], vec![2, 3], vec![1, 2, 3]] {
            let s = build_classical_algebra(&ps(&n)).unwrap();
            assert_eq!(s.casimir_defect(), 0.0, "{n:?}");
        }
    }

    #[test]
    fn real_coordinate_brackets() {
        let s = build_classical_algebra(&ps(&[1, 1])).unwrap();
        let [x, _y, z, w] = s.real_coordinates().unwrap();
        assert!(s.poisson_bracket(&x, &z).distance(&w) < 1e-15);

        let s = build_classical_algebra(&ps(&[1, 2])).unwrap();
        let [x, y, z, w] = s.real_coordinates().unwrap();
        let zw = s.poisson_bracket(&z, &w);
        let expect = &(&x * &x).scale(c(0.25)) - &(&x * &y);
        assert!(zw.distance(&expect) < 1e-14, "{zw:?}");
    }

    #[test]
    fn triple_brackets_11_and_12() {
        for (n, expect) in [
            (vec![1, 1], vec![(vec![1, 0, 0], -0.5), (vec![0, 1, 0], 0.5)]),
            (vec![1, 2], vec![(vec![1, 1, 0], 2.0), (vec![2, 0, 0], -0.5)]),
        ] {
            let s = build_classical_algebra(&ps(&n)).unwrap();
            let [x, y, z, w] = s.real_coordinates().unwrap();
            let l0 = vec![("X".to_string(), x), ("Y".to_string(), y), ("Z".to_string(), z)];
            let l1 = vec![("W".to_string(), w)];
            let t = s.triple_bracket(&l0, &l1, 7).unwrap();
            let xzz = t.iter().find(|e| (e.f, e.g, e.e) == (0, 2, 2)).unwrap();
            let mut p = Poly::zero(3);
            for (e, v) in expect {
                p.add_term(e, c(v));
            }
            assert!(xzz.value.distance(&p) < 1e-9, "{n:?}: {:?}", xzz.value);
            assert!(t.iter().filter(|e| (e.f, e.g) == (0, 1)).all(|e| e.value.is_zero()));
        }
    }

    #[test]
    fn split_signature_su11() {
        let s = PoissonStructure::new(&ps(&[1, 1]), Signature::Split).unwrap();
        let a = s.generator(&GeneratorId::Lattice(vec![1, -1])).unwrap();
        let ab = s.generator(&GeneratorId::Lattice(vec![-1, 1])).unwrap();
        let b1 = (&a + &ab).scale(c(0.5));
        let b2 = (&a - &ab).scale(c(0.5));
        let b3 = (&s.var(0) - &s.var(1)).scale(c(0.5));
        assert!(s.poisson_bracket(&b1, &b2).distance(&b3) < 1e-15);
        assert!(s.poisson_bracket(&b2, &b3).distance(&b1) < 1e-15);
        assert!(s.poisson_bracket(&b3, &b1).distance(&(-&b2)) < 1e-15);
        assert!(s.canonical_check(20, 3) < 1e-12);
    }

    #[test]
    fn su2_sign_pattern() {
        let s = build_classical_algebra(&ps(&[1, 1])).unwrap();
        let a = s.generator(&GeneratorId::Lattice(vec![1, -1])).unwrap();
        let ab = s.generator(&GeneratorId::Lattice(vec![-1, 1])).unwrap();
        let b1 = (&a + &ab).scale(c(0.5));
        let b2 = (&a - &ab).scale(C64::new(0.0, -0.5));
        let b3 = (&s.var(0) - &s.var(1)).scale(c(0.5));
        assert!(s.poisson_bracket(&b1, &b2).distance(&b3) < 1e-15);
        assert!(s.poisson_bracket(&b2, &b3).distance(&b1) < 1e-15);
        assert!(s.poisson_bracket(&b3, &b1).distance(&b2) < 1e-15);
    }

    #[test]
    fn flow_preserves_constraints() {
        let s = build_classical_algebra(&ps(&[1, 2])).unwrap();
        let [_, _, z, _] = s.real_coordinates().unwrap();
        let v0 = s.realize(&[C64::new(0.4, 0.1), C64::new(-0.2, 0.5)]);
        assert!(s.flow_constraint_drift(&z, &v0, 1.0, 10).unwrap() < 1e-8);
    }
}
