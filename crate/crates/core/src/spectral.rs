//! Near-bottom spectrum of −(ħ²/2)Δ + ½x² + 2y² + x²y + γx⁴: a brute-force Schrödinger
//! solver, the model operator on 𝓗_n, the two-term asymptotics, EBK quantization on the
//! symplectic leaf, and block-wise long-time evolution.

use crate::error::{Error, Result};
use crate::fock::{irreducible_rep, level_parity, resonance12_generators, FockBasis};
use crate::lattice::PrimeSystem;
use crate::numerics::{bisect, hermitian_eigen, integrate, unitary_propagator};
use crate::poly::C64;
use crate::tolerances::{EIGEN_IMAG, ORACLE_SHIFT};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Oracle,
    Model,
    Ebk,
    Asymptotic,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Model => "model",
            Method::Ebk => "ebk",
            Method::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralEntry {
    pub method: Method,
    pub n: Option<u64>,
    pub k: Option<usize>,
    pub index: usize,
    pub hbar: f64,
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SpectralTable {
    pub entries: Vec<SpectralEntry>,
    pub meta: Vec<(String, String)>,
}

impl SpectralTable {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}

/// −(ħ²/2)Δ + ½x² + 2y² + a·x²y + γx⁴ with a = `cubic`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SchrodingerProblem {
    pub hbar: f64,
    pub gamma: f64,
    pub cubic: f64,
    /// Starting basis cutoff L: states with m₁ + 2m₂ ≤ L.
    pub cutoff: u32,
    /// Largest cutoff tried before giving up.
    pub max_cutoff: u32,
}

impl SchrodingerProblem {
    pub fn standard(hbar: f64, gamma: f64) -> Self {
        SchrodingerProblem { hbar, gamma, cubic: 1.0, cutoff: 24, max_cutoff: 160 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hbar <= 0.0 || !self.hbar.is_finite() {
            return Err(Error::InvalidInput(format!("ħ must be positive, got {}", self.hbar)));
        }
        if self.gamma < self.cubic * self.cubic / 8.0 {
            return Err(Error::InvalidInput(format!(
                "γ = {} below the confinement bound {}",
                self.gamma,
                self.cubic * self.cubic / 8.0
            )));
        }
        Ok(())
    }
}

/// Lowest eigenpairs of the oracle at one cutoff. Eigenvectors are columns over `states`.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub cutoff: u32,
    pub states: Vec<(u32, u32)>,
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Position matrix √(ħ/2ω)(a + a*) on |0..dim).
fn position_1d(dim: usize, hbar: f64, omega: f64) -> DMatrix<f64> {
    let s = (hbar / (2.0 * omega)).sqrt();
    let mut x = DMatrix::<f64>::zeros(dim, dim);
    for m in 1..dim {
        let v = s * (m as f64).sqrt();
        x[(m - 1, m)] = v;
        x[(m, m - 1)] = v;
    }
    x
}

fn solve_at(p: &SchrodingerProblem, cutoff: u32, count: usize) -> Result<OracleSolution> {
    let l = cutoff as usize;
    let pad = 5;
    let x = position_1d(l + pad, p.hbar, 1.0);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let y = position_1d(l / 2 + pad, p.hbar, 2.0);
    let mut states = Vec::new();
    for m2 in 0..=(l / 2) {
        for m1 in 0..=(l - 2 * m2) {
            states.push((m1 as u32, m2 as u32));
        }
    }
    let mut values: Vec<(f64, Vec<f64>)> = Vec::new();
    for parity in 0..2u32 {
        let idx: Vec<usize> = (0..states.len()).filter(|&i| states[i].0 % 2 == parity).collect();
        let d = idx.len();
        let mut h = DMatrix::<f64>::zeros(d, d);
        for (a, &i) in idx.iter().enumerate() {
            let (m1, m2) = states[i];
            for (b, &j) in idx.iter().enumerate() {
                let (k1, k2) = states[j];
                let (m1, m2, k1, k2) = (m1 as usize, m2 as usize, k1 as usize, k2 as usize);
                let mut v = 0.0;
                if m1 == k1 && m2 == k2 {
                    v += p.hbar * (m1 as f64 + 0.5) + 2.0 * p.hbar * (m2 as f64 + 0.5);
                }
                if m1.abs_diff(k1) <= 2 && m2.abs_diff(k2) == 1 {
                    v += p.cubic * x2[(m1, k1)] * y[(m2, k2)];
                }
                if m2 == k2 && m1.abs_diff(k1) <= 4 {
                    v += p.gamma * x4[(m1, k1)];
                }
                h[(a, b)] = v;
            }
        }
        let eig = h.symmetric_eigen();
        for c in 0..d {
            let mut full = vec![0.0; states.len()];
            for (a, &i) in idx.iter().enumerate() {
                full[i] = eig.eigenvectors[(a, c)];
            }
            values.push((eig.eigenvalues[c], full));
        }
    }
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    values.truncate(count);
    if values.len() < count {
        return Err(Error::Cutoff(format!("cutoff {cutoff} holds fewer than {count} states")));
    }
    let mut vectors = DMatrix::<f64>::zeros(states.len(), count);
    for (c, (_, v)) in values.iter().enumerate() {
        for (r, x) in v.iter().enumerate() {
            vectors[(r, c)] = *x;
        }
    }
    Ok(OracleSolution { cutoff, states, values: values.iter().map(|v| v.0).collect(), vectors })
}

/// Lowest `count` eigenpairs, with the cutoff raised in steps of 8 until every eigenvalue moves
/// by less than `ORACLE_SHIFT·ħ`.
pub fn schrodinger_solve(p: &SchrodingerProblem, count: usize) -> Result<OracleSolution> {
    p.validate()?;
    let mut prev = solve_at(p, p.cutoff, count)?;
    let mut l = p.cutoff;
    while l + 8 <= p.max_cutoff {
        l += 8;
        let cur = solve_at(p, l, count)?;
        let shift = prev.values.iter().zip(&cur.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if shift < ORACLE_SHIFT * p.hbar {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Convergence(format!(
        "oracle not converged at cutoff {l}: last eigenvalues {:?}",
        prev.values
    )))
}

pub fn schrodinger_eigen(p: &SchrodingerProblem, count: usize) -> Result<SpectralTable> {
    let sol = schrodinger_solve(p, count)?;
    let entries = sol
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| SpectralEntry { method: Method::Oracle, n: None, k: None, index: i, hbar: p.hbar, value: v, residual: 0.0 })
        .collect();
    Ok(SpectralTable {
        entries,
        meta: vec![
            ("gamma".into(), p.gamma.to_string()),
            ("cubic".into(), p.cubic.to_string()),
            ("cutoff".into(), sol.cutoff.to_string()),
        ],
    })
}

/// Number of sublevels ⌊n/2⌋ + 1 in cluster n.
pub fn cluster_size(n: u64) -> usize {
    (n / 2) as usize + 1
}

/// Splits ascending eigenvalues into consecutive clusters n = 0, 1, …; returns (n, k, value).
/// The split is accepted only if every value lies nearest to a two-term prediction of its own
/// cluster among all clusters up to max_n + 1.
pub fn label_clusters(values: &[f64], max_n: u64, hbar: f64) -> Result<Vec<(u64, usize, f64)>> {
    let mut preds = Vec::new();
    for n in 0..=max_n + 1 {
        for nu in model_operator_spectrum(n, 1.0)? {
            preds.push((n, near_bottom_asymptotics(n, nu, hbar)));
        }
    }
    let mut out = Vec::new();
    let mut pos = 0;
    for n in 0..=max_n {
        let s = cluster_size(n);
        if pos + s > values.len() {
            return Err(Error::InvalidInput(format!("need {} eigenvalues for clusters ≤ {max_n}", pos + s)));
        }
        for k in 0..s {
            let v = values[pos + k];
            let near = preds.iter().min_by(|a, b| (a.1 - v).abs().partial_cmp(&(b.1 - v).abs()).unwrap()).unwrap();
            if near.0 != n {
                return Err(Error::Structural(format!(
                    "eigenvalue {v} sits in cluster {n} but is nearest to cluster {}",
                    near.0
                )));
            }
            out.push((n, k, v));
        }
        pos += s;
    }
    Ok(out)
}

/// Total number of eigenvalues in clusters 0..=max_n.
pub fn cluster_count(max_n: u64) -> usize {
    (0..=max_n).map(cluster_size).sum()
}

/// Matrix of (1/√2)Ǎ₃ on the monomials z̄^j of 𝓗_n: the model operator
/// (1/√2)(ħ′²z̄∂̄² − (ħ′/2)(z̄² − ε_nħ′)∂̄ + (ħ′⌊n/2⌋/2)z̄).
pub fn model_operator(n: u64, hp: f64) -> DMatrix<f64> {
    irreducible_rep(n, hp)[2].map(|v| v.re / SQRT_2)
}

/// Eigenvalues ν_{n,0} ≤ … ≤ ν_{n,⌊n/2⌋} of the non-symmetric model matrix, checked real and ± symmetric.
pub fn model_operator_spectrum(n: u64, hp: f64) -> Result<Vec<f64>> {
    let m = model_operator(n, hp);
    let scale = m.iter().map(|v| v.abs()).fold(1e-300, f64::max);
    let ev = m.complex_eigenvalues();
    let mut vals = Vec::with_capacity(ev.len());
    for v in ev.iter() {
        if v.im.abs() > EIGEN_IMAG * scale.max(1.0) {
            return Err(Error::NonReal(format!("ν = {v} at n = {n}")));
        }
        vals.push(v.re);
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sym = vals.iter().zip(vals.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    if sym > EIGEN_IMAG * scale.max(1.0) {
        return Err(Error::Structural(format!("model spectrum at n = {n} not symmetric: {vals:?}")));
    }
    Ok(vals)
}

/// Eigenpairs of the model operator as a table.
pub fn model_table(n: u64, hp: f64) -> Result<SpectralTable> {
    let vals = model_operator_spectrum(n, hp)?;
    Ok(SpectralTable {
        entries: vals
            .iter()
            .enumerate()
            .map(|(k, &v)| SpectralEntry { method: Method::Model, n: Some(n), k: Some(k), index: k, hbar: hp, value: v, residual: 0.0 })
            .collect(),
        meta: vec![("hbar_prime".into(), hp.to_string())],
    })
}

/// Symmetrized tridiagonal form with off-diagonals √(a_j b_j); eigenvalues ascending.
pub fn model_symmetric_oracle(n: u64, hp: f64) -> Vec<f64> {
    let m = model_operator(n, hp);
    let d = m.nrows();
    let mut s = DMatrix::<f64>::zeros(d, d);
    for j in 1..d {
        let v = (m[(j - 1, j)] * m[(j, j - 1)]).sqrt();
        s[(j - 1, j)] = v;
        s[(j, j - 1)] = v;
    }
    let mut vals: Vec<f64> = s.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Eigenvalues of (1/√2)𝐀₃ on level n of the (1,2) Fock space.
pub fn model_fock_oracle(n: u64, hp: f64) -> Result<Vec<f64>> {
    let (vals, _) = fock_block_eigen(n, hp)?;
    Ok(vals)
}

/// Eigenpairs of (1/√2)𝐀₃ on the Fock level-n block, ordered as the basis level range.
pub fn fock_block_eigen(n: u64, hp: f64) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let block = fock_a3_block(n, hp)?;
    Ok(hermitian_eigen(&block))
}

fn fock_a3_block(n: u64, hp: f64) -> Result<DMatrix<C64>> {
    let basis = FockBasis::new(&PrimeSystem::new(vec![1, 2])?, n + 2);
    let gens = resonance12_generators(&basis, hp)?;
    Ok(gens[2].block(&basis, n) / C64::new(SQRT_2, 0.0))
}

/// λ ≈ ħ(n + 3/2) + ħ^{3/2}ν.
pub fn near_bottom_asymptotics(n: u64, nu: f64, hbar: f64) -> f64 {
    hbar * (n as f64 + 1.5) + hbar.powf(1.5) * nu
}

/// λ ≈ ħ(n + 3/2) + ħ^{3/N}ν in the N-th microzone, ν computed at ħ′ = ħ^{1−2/N}.
pub fn microzone_asymptotics(n: u64, nu: f64, hbar: f64, zone: u32) -> f64 {
    hbar * (n as f64 + 1.5) + hbar.powf(3.0 / zone as f64) * nu
}

pub fn microzone_hbar_prime(hbar: f64, zone: u32) -> f64 {
    hbar.powf(1.0 - 2.0 / zone as f64)
}

/// Leaf {𝒞₁ = c₁, 𝒞₂ = 0} of the classical 1:2 algebra, coordinates (𝒜₁, φ) with
/// 𝒜₃ + i𝒜₄ = r(𝒜₁)e^{iφ}, r² = 𝒜₁²(3c₁ − 2𝒜₁).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Leaf {
    pub c1: f64,
}

impl Leaf {
    pub fn a1_max(&self) -> f64 {
        1.5 * self.c1
    }

    pub fn radius(&self, a1: f64) -> f64 {
        (a1 * a1 * (3.0 * self.c1 - 2.0 * a1)).max(0.0).sqrt()
    }

    /// max 𝒜₃ on the leaf, reached at 𝒜₁ = c₁.
    pub fn a3_max(&self) -> f64 {
        self.c1.powf(1.5)
    }

    /// ∫ ω₀ over {𝒜₃ ≥ ν}.
    pub fn area_above(&self, nu: f64) -> Result<f64> {
        let f = |a: f64| {
            let r = self.radius(a);
            if r <= 0.0 {
                return if nu <= 0.0 { 2.0 * PI } else { 0.0 };
            }
            2.0 * (nu / r).clamp(-1.0, 1.0).acos()
        };
        // the integrand has square-root kinks where r = |ν|; split there
        let mut cuts = vec![0.0, self.a1_max()];
        if nu.abs() < self.a3_max() && nu != 0.0 {
            for (lo, hi) in [(0.0, self.c1), (self.c1, self.a1_max())] {
                let g = |a: f64| self.radius(a) - nu.abs();
                if let Ok(x) = bisect(g, lo, hi, 1e-15 * self.c1.max(1.0)) {
                    cuts.push(x);
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut total = 0.0;
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                total += integrate(f, w[0], w[1], 1e-13 * self.c1, 1e-12)?;
            }
        }
        Ok(total)
    }

    pub fn total_area(&self) -> f64 {
        2.0 * PI * self.a1_max()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EbkLadder {
    pub n: u64,
    pub hbar_prime: f64,
    /// Leaf area over 2πħ′.
    pub area_units: f64,
    /// Quantized model-operator values (𝒜₃ level over √2), descending.
    pub nu: Vec<f64>,
}

/// Levels ν with Area(𝒜₃ ≥ √2ν)/(2πħ′) = k + ½, on the leaf 𝒞₁ = nħ′/3.
pub fn ebk_quantization(n: u64, hp: f64) -> Result<EbkLadder> {
    let leaf = Leaf { c1: n as f64 * hp / 3.0 };
    let unit = 2.0 * PI * hp;
    let area_units = leaf.total_area() / unit;
    let top = leaf.a3_max();
    let mut nu = Vec::new();
    let mut k = 0;
    while (k as f64 + 0.5) < area_units {
        let target = (k as f64 + 0.5) * unit;
        let g = |v: f64| leaf.area_above(v).unwrap_or(f64::NAN) - target;
        let v = bisect(g, -top, top, 1e-14 * top.max(1e-300))?;
        nu.push(v / SQRT_2);
        k += 1;
    }
    Ok(EbkLadder { n, hbar_prime: hp, area_units, nu })
}

#[derive(Clone, Debug, Serialize)]
pub struct EbkComparison {
    pub n: u64,
    pub ebk: Vec<f64>,
    pub model: Vec<f64>,
    /// max_k |ν_ebk − ν_model| over the spread of the model spectrum, levels paired from the top.
    pub max_relative_deviation: f64,
}

pub fn ebk_vs_model(n: u64) -> Result<EbkComparison> {
    let hp = 1.0 / n.max(1) as f64;
    let ladder = ebk_quantization(n, hp)?;
    let mut model = model_operator_spectrum(n, hp)?;
    model.reverse();
    let spread = model.first().copied().unwrap_or(0.0) - model.last().copied().unwrap_or(0.0);
    let dev = ladder.nu.iter().zip(&model).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(EbkComparison {
        n,
        ebk: ladder.nu,
        model,
        max_relative_deviation: if spread > 0.0 { dev / spread } else { dev },
    })
}

/// Per-level evolution (−i∂_τ + (1/√2)𝐀₃)χ_n = 0 at ħ′ = 1 on the (1,2) Fock space, recombined with
/// the phases e^{−i(n+3/2)τ/√ħ}.
#[derive(Clone, Debug)]
pub struct BlockEvolution {
    pub basis: FockBasis,
    blocks: Vec<DMatrix<C64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionSample {
    pub tau: f64,
    pub block_norms: Vec<f64>,
    #[serde(skip)]
    pub state: Vec<C64>,
}

impl BlockEvolution {
    pub fn new(max_level: u64) -> Result<Self> {
        let basis = FockBasis::new(&PrimeSystem::new(vec![1, 2])?, max_level + 2);
        let gens = resonance12_generators(&basis, 1.0)?;
        let blocks = (0..=max_level).map(|n| gens[2].block(&basis, n) / C64::new(SQRT_2, 0.0)).collect();
        Ok(BlockEvolution { basis, blocks })
    }

    pub fn levels(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    pub fn block(&self, n: u64) -> &DMatrix<C64> {
        &self.blocks[n as usize]
    }

    /// χ^τ on levels 0..=max from χ⁰ given on the same levels; `hbar` enters only through the
    /// fast phases. `None` omits them.
    pub fn evolve(&self, chi0: &[C64], tau: f64, hbar: Option<f64>) -> Result<Vec<C64>> {
        let end = self.basis.level_range(self.levels()).end;
        if chi0.len() != end {
            return Err(Error::InvalidInput(format!("initial data has {} entries, expected {end}", chi0.len())));
        }
        let mut out = vec![C64::new(0.0, 0.0); end];
        for n in 0..=self.levels() {
            let r = self.basis.level_range(n);
            let u = unitary_propagator(&self.blocks[n as usize], tau);
            let v = nalgebra::DVector::from_column_slice(&chi0[r.clone()]);
            let w = u * v;
            let ph = hbar.map(|h| C64::from_polar(1.0, -(n as f64 + 1.5) * tau / h.sqrt())).unwrap_or(C64::new(1.0, 0.0));
            for (i, x) in r.zip(w.iter()) {
                out[i] = x * ph;
            }
        }
        Ok(out)
    }

    pub fn block_norms(&self, chi: &[C64]) -> Vec<f64> {
        (0..=self.levels())
            .map(|n| chi[self.basis.level_range(n)].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    pub fn run(&self, chi0: &[C64], taus: &[f64], hbar: Option<f64>) -> Result<Vec<EvolutionSample>> {
        taus.iter()
            .map(|&tau| {
                let state = self.evolve(chi0, tau, hbar)?;
                Ok(EvolutionSample { tau, block_norms: self.block_norms(&state), state })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterPoint {
    pub n: u64,
    pub k: usize,
    pub hbar: f64,
    pub oracle: f64,
    pub asymptotic: f64,
    /// (λ − ħ(n+3/2))/ħ^{3/2}.
    pub reduced: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub gamma: f64,
    pub hbars: Vec<f64>,
    pub points: Vec<ClusterPoint>,
    /// max |λ − asymptotic|/ħ² per ħ.
    pub remainder_constant: Vec<f64>,
    /// sup_{n,k}|r(ħ₂) − r(ħ₃)| / sup_{n,k}|r(ħ₁) − r(ħ₂)| for consecutive triples.
    pub difference_ratio: Vec<f64>,
    /// The same ratio taken level by level, worst case.
    pub worst_level_ratio: Vec<f64>,
}

/// Oracle clusters n ≤ max_n against ħ(n+3/2) + ħ^{3/2}ν_{n,k}; the ħ values are solved concurrently.
pub fn cluster_scaling(hbars: &[f64], gamma: f64, max_n: u64) -> Result<ScalingReport> {
    let count = cluster_count(max_n);
    let sols: Vec<Result<OracleSolution>> = std::thread::scope(|sc| {
        let handles: Vec<_> = hbars
            .iter()
            .map(|&h| sc.spawn(move || schrodinger_solve(&SchrodingerProblem::standard(h, gamma), count)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("oracle worker panicked")).collect()
    });
    let nus: Vec<Vec<f64>> = (0..=max_n).map(|n| model_operator_spectrum(n, 1.0)).collect::<Result<_>>()?;
    let mut points = Vec::new();
    let mut remainder_constant = Vec::new();
    for (&h, sol) in hbars.iter().zip(sols) {
        let sol = sol?;
        let mut cmax: f64 = 0.0;
        for (n, k, lam) in label_clusters(&sol.values, max_n, h)? {
            let nu = nus[n as usize][k];
            let asym = near_bottom_asymptotics(n, nu, h);
            cmax = cmax.max((lam - asym).abs() / (h * h));
            points.push(ClusterPoint {
                n,
                k,
                hbar: h,
                oracle: lam,
                asymptotic: asym,
                reduced: (lam - h * (n as f64 + 1.5)) / h.powf(1.5),
                nu,
            });
        }
        remainder_constant.push(cmax);
    }
    let per = count;
    let mut difference_ratio = Vec::new();
    let mut worst_level_ratio = Vec::new();
    for t in 0..hbars.len().saturating_sub(2) {
        let (mut worst, mut sup01, mut sup12): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for i in 0..per {
            let r0 = points[t * per + i].reduced;
            let r1 = points[(t + 1) * per + i].reduced;
            let r2 = points[(t + 2) * per + i].reduced;
            let d01 = (r0 - r1).abs();
            let d12 = (r1 - r2).abs();
            sup01 = sup01.max(d01);
            sup12 = sup12.max(d12);
            if d01 > 1e-12 {
                worst = worst.max(d12 / d01);
            }
        }
        difference_ratio.push(sup12 / sup01);
        worst_level_ratio.push(worst);
    }
    Ok(ScalingReport { gamma, hbars: hbars.to_vec(), points, remainder_constant, difference_ratio, worst_level_ratio })
}

/// Overlap |⟨P_nψ, v⟩|/‖ψ‖ between an oracle eigenvector and a Fock eigenvector of level n.
pub fn level_overlap(sol: &OracleSolution, col: usize, n: u64, v: &[C64]) -> Result<f64> {
    let basis = FockBasis::new(&PrimeSystem::new(vec![1, 2])?, n);
    let r = basis.level_range(n);
    let norm: f64 = sol.vectors.column(col).iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut acc = C64::new(0.0, 0.0);
    for (i, st) in basis.states()[r].iter().enumerate() {
        let key = (st[0], st[1]);
        if let Some(j) = sol.states.iter().position(|s| *s == key) {
            acc += v[i].conj() * sol.vectors[(j, col)];
        }
    }
    Ok(acc.norm() / norm)
}

/// Degeneracy check helper: ⌊n/2⌋ + 1 and the parity index ε of level n.
pub fn level_shape(n: u64) -> (usize, u32) {
    let (big, eps) = level_parity(n);
    (big + 1, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_remainder_is_order_hbar_squared() {
        let r = cluster_scaling(&[0.2, 0.1, 0.05], 0.125, 4).unwrap();
        assert!(r.remainder_constant[2] <= 3.0 * r.remainder_constant[0]);
        let q = r.difference_ratio[0];
        assert!(q > 0.5f64.sqrt() / 2.0 && q < 2.0 * 0.5f64.sqrt(), "{q}");
    }

    #[test]
    fn oracle_eigenvectors_align_with_model_states() {
        let h = 0.05;
        let sol = schrodinger_solve(&SchrodingerProblem::standard(h, 0.125), cluster_count(4)).unwrap();
        let labels = label_clusters(&sol.values, 4, h).unwrap();
        for (col, (n, k, _)) in labels.iter().enumerate() {
            let (_, vecs) = fock_block_eigen(*n, 1.0).unwrap();
            let v: Vec<C64> = vecs.column(*k).iter().copied().collect();
            let ov = level_overlap(&sol, col, *n, &v).unwrap();
            assert!(ov >= 1.0 - 2.0 * h.sqrt(), "({n},{k}) overlap {ov}");
        }
    }

    #[test]
    fn harmonic_oracle_is_exact() {
        let p = SchrodingerProblem { hbar: 0.1, gamma: 0.0, cubic: 0.0, cutoff: 16, max_cutoff: 40 };
        let sol = schrodinger_solve(&p, 9).unwrap();
        let mut want = Vec::new();
        for n in 0..5u64 {
            for _ in 0..cluster_size(n) {
                want.push(0.1 * (n as f64 + 1.5));
            }
        }
        for (a, b) in sol.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn confinement_guard() {
        let p = SchrodingerProblem::standard(0.1, 0.1);
        assert!(matches!(schrodinger_solve(&p, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ground_state_near_bottom() {
        let sol = schrodinger_solve(&SchrodingerProblem::standard(0.1, 0.125), 1).unwrap();
        assert!((sol.values[0] - 0.15).abs() < 0.1 * 0.1);
    }

    #[test]
    fn model_anchors() {
        assert_eq!(model_operator_spectrum(0, 1.0).unwrap(), vec![0.0]);
        assert_eq!(model_operator_spectrum(1, 1.0).unwrap(), vec![0.0]);
        let v = model_operator_spectrum(2, 1.0).unwrap();
        let want = 1.0 / (2.0 * SQRT_2);
        assert!((v[0] + want).abs() < 1e-12 && (v[1] - want).abs() < 1e-12);
        let v = model_operator_spectrum(4, 1.0).unwrap();
        for (a, b) in v.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn model_matches_oracles() {
        for n in 0..=12 {
            let v = model_operator_spectrum(n, 1.0).unwrap();
            let s = model_symmetric_oracle(n, 1.0);
            let f = model_fock_oracle(n, 1.0).unwrap();
            for ((a, b), c) in v.iter().zip(&s).zip(&f) {
                assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn composed_asymptotics_n2() {
        let v = model_operator_spectrum(2, 1.0).unwrap();
        let lam = near_bottom_asymptotics(2, v[1], 0.04);
        assert!((lam - (0.14 + 0.0028284271247461905)).abs() < 1e-12);
    }

    #[test]
    fn leaf_area_counts_levels() {
        for n in [10u64, 20, 40] {
            let l = ebk_quantization(n, 1.0 / n as f64).unwrap();
            assert!((l.area_units - (n / 2) as f64).abs() <= 0.5 + 1e-12);
            let top = l.nu.first().unwrap();
            let bot = l.nu.last().unwrap();
            assert!((top + bot).abs() < 1e-9 * top.abs());
        }
    }

    #[test]
    fn ebk_converges_to_model() {
        let a = ebk_vs_model(20).unwrap().max_relative_deviation;
        let b = ebk_vs_model(40).unwrap().max_relative_deviation;
        assert!(b < a && b < 0.05, "{a} {b}");
    }

    #[test]
    fn evolution_conserves_block_norms_and_phases() {
        let ev = BlockEvolution::new(8).unwrap();
        let end = ev.basis.level_range(8).end;
        let chi0: Vec<C64> = (0..end).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos())).collect();
        let n0 = ev.block_norms(&chi0);
        let same = ev.evolve(&chi0, 0.0, None).unwrap();
        assert!(same.iter().zip(&chi0).all(|(a, b)| (a - b).norm() < 1e-13));
        for s in ev.run(&chi0, &[1.0, 37.5, 100.0], Some(0.01)).unwrap() {
            for (a, b) in s.block_norms.iter().zip(&n0) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // eigenphases of the level-6 propagator are e^{−iν τ}
        let tau = 2.3;
        let u = unitary_propagator(ev.block(6), tau);
        let (vals, vecs) = hermitian_eigen(ev.block(6));
        let ph: Vec<f64> = vals
            .iter()
            .enumerate()
            .map(|(k, nu)| {
                let v = vecs.column(k);
                (v.dotc(&(&u * v)) - C64::from_polar(1.0, -nu * tau)).norm()
            })
            .collect();
        assert!(ph.iter().all(|&d| d < 1e-12));
        let model = model_operator_spectrum(6, 1.0).unwrap();
        for (a, b) in vals.iter().zip(&model) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
