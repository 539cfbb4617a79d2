//! Integer combinatorics of resonance: frequency decomposition, minimal resonance elements,
//! lattice bracket and anomaly.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};

/// Nonzero exact rational frequencies, each tagged by a symbolic unit. Distinct units are
/// incommensurable.
#[derive(Clone, Debug)]
pub struct FrequencySystem {
    entries: Vec<(BigRational, String)>,
}

impl FrequencySystem {
    pub fn new(entries: Vec<(BigRational, String)>) -> Result<Self> {
        for (i, (v, _)) in entries.iter().enumerate() {
            if v.is_zero() {
                return Err(Error::ZeroFrequency(i));
            }
        }
        Ok(FrequencySystem { entries })
    }

    /// Parses `"2/3:a, 1:a, 5:b"`. A missing unit defaults to `a`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (val, unit) = match tok.split_once(':') {
                Some((v, u)) => (v.trim(), u.trim().to_string()),
                None => (tok, "a".to_string()),
            };
            entries.push((parse_rational(val)?, unit));
        }
        if entries.is_empty() {
            return Err(Error::Parse("empty frequency list".into()));
        }
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(BigRational, String)] {
        &self.entries
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let err = || Error::Parse(format!("bad rational '{s}'"));
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| err())?;
        let b: BigInt = b.trim().parse().map_err(|_| err())?;
        if b.is_zero() {
            return Err(err());
        }
        Ok(BigRational::new(a, b))
    } else if let Some((ip, fp)) = s.split_once('.') {
        let digits = fp.trim().len() as u32;
        let num: BigInt = format!("{}{}", ip.trim(), fp.trim()).parse().map_err(|_| err())?;
        Ok(BigRational::new(num, BigInt::from(10u32).pow(digits)))
    } else {
        let a: BigInt = s.trim().parse().map_err(|_| err())?;
        Ok(BigRational::from_integer(a))
    }
}

/// Coprime positive integer weights n with gcd 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct PrimeSystem(Vec<i64>);

impl PrimeSystem {
    pub fn new(n: Vec<i64>) -> Result<Self> {
        if n.is_empty() || n.iter().any(|&v| v < 1) {
            return Err(Error::NotPrime(format!("{n:?} must be positive")));
        }
        let g = n.iter().fold(0i64, |g, &v| g.gcd(&v));
        if g != 1 {
            return Err(Error::NotPrime(format!("{n:?} has gcd {g}")));
        }
        Ok(PrimeSystem(n))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let v: std::result::Result<Vec<i64>, _> = s.split(',').map(|t| t.trim().parse::<i64>()).collect();
        Self::new(v.map_err(|_| Error::Parse(format!("bad weight list '{s}'")))?)
    }

    pub fn weights(&self) -> &[i64] {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    /// n∘α with overflow checking.
    pub fn dot(&self, a: &[i64]) -> Result<i64> {
        let mut acc = 0i64;
        for (x, y) in self.0.iter().zip(a) {
            acc = x
                .checked_mul(*y)
                .and_then(|p| acc.checked_add(p))
                .ok_or(Error::Overflow("n∘α"))?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Component {
    #[serde(serialize_with = "ser_rational")]
    pub characteristic: BigRational,
    pub unit: String,
    pub n: PrimeSystem,
    pub indices: Vec<usize>,
    #[serde(skip_serializing_if = "all_positive")]
    pub signs: Vec<i8>,
}

fn all_positive(s: &[i8]) -> bool {
    s.iter().all(|&v| v > 0)
}

fn ser_rational<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub components: Vec<Component>,
    pub resonant: bool,
}

/// Splits a frequency system into commensurable components ω = α₀·n with n prime.
/// Negative frequencies are carried by `signs`; n holds magnitudes.
pub fn decompose_frequency_system(fs: &FrequencySystem) -> Decomposition {
    let mut by_unit: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (i, (_, u)) in fs.entries.iter().enumerate() {
        if !by_unit.contains_key(u.as_str()) {
            order.push(u);
        }
        by_unit.entry(u).or_default().push(i);
    }
    let mut components = Vec::new();
    for u in order {
        let idx = &by_unit[u];
        let vals: Vec<BigRational> = idx.iter().map(|&i| fs.entries[i].0.abs()).collect();
        let den_lcm = vals.iter().fold(BigInt::one(), |l, v| l.lcm(v.denom()));
        let ints: Vec<BigInt> = vals.iter().map(|v| (v * BigRational::from_integer(den_lcm.clone())).to_integer()).collect();
        let g = ints.iter().fold(BigInt::zero(), |g, v| g.gcd(v));
        let characteristic = BigRational::new(g.clone(), den_lcm);
        let n: Vec<i64> = ints.iter().map(|v| (v / &g).to_i64().expect("weight fits in i64")).collect();
        let signs = idx.iter().map(|&i| if fs.entries[i].0.is_negative() { -1 } else { 1 }).collect();
        components.push(Component {
            characteristic,
            unit: u.to_string(),
            n: PrimeSystem::new(n).expect("gcd normalized"),
            indices: idx.clone(),
            signs,
        });
    }
    let resonant = components.iter().any(|c| c.indices.len() > 1);
    Decomposition { components, resonant }
}

pub fn plus_part(a: &[i64]) -> Vec<i64> {
    a.iter().map(|&v| v.max(0)).collect()
}

pub fn minus_part(a: &[i64]) -> Vec<i64> {
    a.iter().map(|&v| (-v).max(0)).collect()
}

/// [α,β] = α₊β₋ − α₋β₊ componentwise.
pub fn lattice_bracket(a: &[i64], b: &[i64]) -> Vec<i64> {
    let (ap, am, bp, bm) = (plus_part(a), minus_part(a), plus_part(b), minus_part(b));
    (0..a.len()).map(|l| ap[l] * bm[l] - am[l] * bp[l]).collect()
}

/// Anomaly α∘̇β = min(α₊+β₊, α₋+β₋) componentwise.
pub fn anomaly(a: &[i64], b: &[i64]) -> Vec<i64> {
    let (ap, am, bp, bm) = (plus_part(a), minus_part(a), plus_part(b), minus_part(b));
    (0..a.len()).map(|l| (ap[l] + bp[l]).min(am[l] + bm[l])).collect()
}

pub fn add(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn neg(a: &[i64]) -> Vec<i64> {
    a.iter().map(|x| -x).collect()
}

/// `g ⊑ a`: same sign pattern where g is nonzero and |g_l| ≤ |a_l|. For clean vectors this is
/// the componentwise order of pair forms.
pub fn conformal_le(g: &[i64], a: &[i64]) -> bool {
    g.iter().zip(a).all(|(&x, &y)| x == 0 || (x.signum() == y.signum() && x.abs() <= y.abs()))
}

/// Pair form (k₊, k₋) of a resonance element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ResonancePair {
    pub plus: Vec<i64>,
    pub minus: Vec<i64>,
}

impl ResonancePair {
    pub fn new(plus: Vec<i64>, minus: Vec<i64>) -> Result<Self> {
        if plus.len() != minus.len() || plus.iter().chain(&minus).any(|&v| v < 0) {
            return Err(Error::InvalidInput("pair form needs nonnegative vectors of equal length".into()));
        }
        Ok(ResonancePair { plus, minus })
    }

    pub fn from_clean(a: &[i64]) -> Self {
        ResonancePair { plus: plus_part(a), minus: minus_part(a) }
    }

    pub fn primitive(m: usize, l: usize) -> Self {
        let mut e = vec![0; m];
        e[l] = 1;
        ResonancePair { plus: e.clone(), minus: e }
    }

    pub fn clean(&self) -> Vec<i64> {
        sub(&self.plus, &self.minus)
    }

    pub fn is_clean(&self) -> bool {
        self.plus.iter().zip(&self.minus).all(|(a, b)| a * b == 0)
    }

    pub fn solves(&self, n: &PrimeSystem) -> Result<bool> {
        Ok(n.dot(&self.clean())? == 0)
    }

    pub fn add(&self, o: &ResonancePair) -> ResonancePair {
        ResonancePair { plus: add(&self.plus, &o.plus), minus: add(&self.minus, &o.minus) }
    }
}

/// Γ_n sorted by vector entries, closed under negation, plus the primitives I_l.
#[derive(Clone, Debug, Serialize)]
pub struct MinimalBasis {
    #[serde(skip)]
    pub n: PrimeSystem,
    pub gammas: Vec<Vec<i64>>,
    pub primitives: Vec<Vec<i64>>,
}

impl MinimalBasis {
    pub fn index_of(&self, g: &[i64]) -> Option<usize> {
        self.gammas.binary_search_by(|x| x.as_slice().cmp(g)).ok()
    }

    pub fn negation_index(&self, i: usize) -> usize {
        self.index_of(&neg(&self.gammas[i])).expect("closed under negation")
    }
}

/// All nonzero clean solutions of n∘α = 0 in the box |α_l| ≤ Σn.
pub fn clean_solutions_in_box(n: &PrimeSystem) -> Result<Vec<Vec<i64>>> {
    let m = n.modes();
    let s = n.sum();
    let w = n.weights();
    s.checked_mul(m as i64)
        .and_then(|v| v.checked_mul(*w.iter().max().unwrap()))
        .ok_or(Error::Overflow("enumeration box"))?;
    let mut out = Vec::new();
    if m < 2 {
        return Ok(out);
    }
    let mut cur = vec![-s; m - 1];
    loop {
        let partial: i64 = cur.iter().zip(w).map(|(a, b)| a * b).sum();
        if partial % w[m - 1] == 0 {
            let last = -partial / w[m - 1];
            if last.abs() <= s {
                let mut v = cur.clone();
                v.push(last);
                if v.iter().any(|&x| x != 0) {
                    out.push(v);
                }
            }
        }
        let mut i = 0;
        loop {
            if i == m - 1 {
                return Ok(out);
            }
            if cur[i] < s {
                cur[i] += 1;
                break;
            }
            cur[i] = -s;
            i += 1;
        }
    }
}

/// Minimal resonance elements by full box enumeration and sum-of-two filtering.
pub fn enumerate_minimal_elements(n: &PrimeSystem) -> Result<MinimalBasis> {
    let mut sols = clean_solutions_in_box(n)?;
    sols.sort_by_key(|v| (v.iter().map(|x| x.abs()).sum::<i64>(), v.clone()));
    let mut minimal: Vec<Vec<i64>> = Vec::new();
    for a in &sols {
        // a = g + (a − g) with both conformal nonzero solutions iff some smaller minimal g ⊑ a.
        if !minimal.iter().any(|g| g != a && conformal_le(g, a)) {
            minimal.push(a.clone());
        }
    }
    minimal.sort();
    let m = n.modes();
    let primitives = (0..m)
        .map(|l| {
            let mut e = vec![0; m];
            e[l] = 1;
            e
        })
        .collect();
    Ok(MinimalBasis { n: n.clone(), gammas: minimal, primitives })
}

/// Coefficients of a resonance element over Γ_n together with its primitive exponent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Expansion {
    pub mu: Vec<u32>,
    pub primitive: Vec<i64>,
}

/// Writes k = Σ μ_γ γ + Σ e_l I_l. The primitive exponent is min(k₊, k₋); the clean remainder is
/// decomposed into sign-compatible elements of Γ_n, returning the lexicographically smallest μ.
pub fn expand_in_minimal(k: &ResonancePair, basis: &MinimalBasis) -> Result<Expansion> {
    if !k.solves(&basis.n)? {
        return Err(Error::Structural(format!("{k:?} does not solve the resonance equation")));
    }
    let primitive: Vec<i64> = k.plus.iter().zip(&k.minus).map(|(a, b)| *a.min(b)).collect();
    let target = k.clean();
    let cands: Vec<usize> = (0..basis.gammas.len()).filter(|&i| conformal_le(&basis.gammas[i], &target)).collect();
    let mut mu = vec![0u32; basis.gammas.len()];
    let mut dead = HashSet::new();
    if dfs(&cands, 0, &target, basis, &mut mu, &mut dead) {
        Ok(Expansion { mu, primitive })
    } else {
        Err(Error::Structural(format!("no expansion of {target:?} over Γ_n")))
    }
}

fn dfs(
    cands: &[usize],
    pos: usize,
    rest: &[i64],
    basis: &MinimalBasis,
    mu: &mut [u32],
    dead: &mut HashSet<(usize, Vec<i64>)>,
) -> bool {
    if rest.iter().all(|&v| v == 0) {
        return true;
    }
    if pos == cands.len() || dead.contains(&(pos, rest.to_vec())) {
        return false;
    }
    let g = &basis.gammas[cands[pos]];
    let mut r = rest.to_vec();
    let mut count = 0u32;
    loop {
        mu[cands[pos]] = count;
        if dfs(cands, pos + 1, &r, basis, mu, dead) {
            return true;
        }
        if !conformal_le(g, &r) {
            break;
        }
        r = sub(&r, g);
        count += 1;
    }
    mu[cands[pos]] = 0;
    dead.insert((pos, rest.to_vec()));
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(s: &str) -> FrequencySystem {
        FrequencySystem::parse(s).unwrap()
    }

    #[test]
    fn decompose_single_unit() {
        let d = decompose_frequency_system(&fs("3:a,6:a"));
        assert_eq!(d.components.len(), 1);
        assert_eq!(d.components[0].n.weights(), &[1, 2]);
        assert_eq!(d.components[0].characteristic, BigRational::from_integer(3.into()));
        assert!(d.resonant);
    }

    #[test]
    fn decompose_two_units() {
        let d = decompose_frequency_system(&fs("1:a,2:a,1:b"));
        assert_eq!(d.components.len(), 2);
        assert_eq!(d.components[0].indices, vec![0, 1]);
        assert_eq!(d.components[1].indices, vec![2]);
        assert_eq!(d.components[1].n.weights(), &[1]);
        assert!(d.resonant);
    }

    #[test]
    fn decompose_fractional_characteristic() {
        let d = decompose_frequency_system(&fs("2/3:a,1:a,5:a"));
        let c = &d.components[0];
        assert_eq!(c.characteristic.to_string(), "1/3");
        assert_eq!(c.n.weights(), &[2, 3, 15]);
        // re-multiplication reproduces the input
        for (j, &i) in c.indices.iter().enumerate() {
            let back = &c.characteristic * BigRational::from_integer(c.n.weights()[j].into());
            assert_eq!(back, fs("2/3:a,1:a,5:a").entries()[i].0);
        }
    }

    #[test]
    fn zero_frequency_rejected() {
        assert!(matches!(FrequencySystem::parse("1:a,0:a"), Err(Error::ZeroFrequency(1))));
    }

    #[test]
    fn non_resonant_single_frequencies() {
        let d = decompose_frequency_system(&fs("1:a,1:b"));
        assert!(!d.resonant);
    }

    #[test]
    fn minimal_elements_small_cases() {
        let b = enumerate_minimal_elements(&PrimeSystem::new(vec![1, 2]).unwrap()).unwrap();
        assert_eq!(b.gammas, vec![vec![-2, 1], vec![2, -1]]);
        let b = enumerate_minimal_elements(&PrimeSystem::new(vec![1, 1]).unwrap()).unwrap();
        assert_eq!(b.gammas, vec![vec![-1, 1], vec![1, -1]]);
        let b = enumerate_minimal_elements(&PrimeSystem::new(vec![1, 1, 1]).unwrap()).unwrap();
        let mut expect = vec![
            vec![1, -1, 0],
            vec![-1, 1, 0],
            vec![1, 0, -1],
            vec![-1, 0, 1],
            vec![0, 1, -1],
            vec![0, -1, 1],
        ];
        expect.sort();
        assert_eq!(b.gammas, expect);
    }

    #[test]
    fn bracket_example() {
        assert_eq!(lattice_bracket(&[2, -1], &[-2, 1]), vec![4, -1]);
        assert_eq!(lattice_bracket(&[2, -1], &[2, -1]), vec![0, 0]);
    }

    #[test]
    fn bracket_against_primitive_gives_coefficient() {
        // pair-form bracket of clean α with I_j is α_j e_j
        let a = [3i64, -2, 5];
        for j in 0..3 {
            let ij = ResonancePair::primitive(3, j);
            let k = ResonancePair::from_clean(&a);
            let br: Vec<i64> = (0..3).map(|l| k.plus[l] * ij.minus[l] - k.minus[l] * ij.plus[l]).collect();
            let mut expect = vec![0; 3];
            expect[j] = a[j];
            assert_eq!(br, expect);
        }
    }

    #[test]
    fn expansion_examples() {
        let n = PrimeSystem::new(vec![1, 2]).unwrap();
        let b = enumerate_minimal_elements(&n).unwrap();
        let ia = b.index_of(&[2, -1]).unwrap();
        let e = expand_in_minimal(&ResonancePair::from_clean(&[2, -1]), &b).unwrap();
        assert_eq!(e.mu[ia], 1);
        let e = expand_in_minimal(&ResonancePair::from_clean(&[4, -2]), &b).unwrap();
        assert_eq!(e.mu[ia], 2);
        assert_eq!(e.primitive, vec![0, 0]);

        let n = PrimeSystem::new(vec![1, 1]).unwrap();
        let b = enumerate_minimal_elements(&n).unwrap();
        let a = [1i64, -1];
        let sum = ResonancePair::from_clean(&a).add(&ResonancePair::from_clean(&neg(&a)));
        let e = expand_in_minimal(&sum, &b).unwrap();
        assert!(e.mu.iter().all(|&m| m == 0));
        assert_eq!(e.primitive, anomaly(&a, &neg(&a)));
        assert_eq!(e.primitive, vec![1, 1]);
    }

    #[test]
    fn expansion_rejects_non_solution() {
        let n = PrimeSystem::new(vec![1, 2]).unwrap();
        let b = enumerate_minimal_elements(&n).unwrap();
        assert!(expand_in_minimal(&ResonancePair::from_clean(&[1, 0]), &b).is_err());
    }

    use proptest::prelude::*;

    fn mul(a: &[i64], b: &[i64]) -> Vec<i64> {
        a.iter().zip(b).map(|(x, y)| x * y).collect()
    }

    fn triple(m: usize) -> impl Strategy<Value = (Vec<i64>, Vec<i64>, Vec<i64>)> {
        let v = || proptest::collection::vec(-6i64..=6, m);
        (v(), v(), v())
    }

    proptest! {
        #[test]
        fn cyclic_bracket_identity((a, b, c) in (2usize..5).prop_flat_map(triple)) {
            let s = add(&add(&mul(&lattice_bracket(&a, &b), &c), &mul(&lattice_bracket(&b, &c), &a)), &mul(&lattice_bracket(&c, &a), &b));
            prop_assert!(s.iter().all(|&x| x == 0));
        }

        #[test]
        fn bracket_anomaly_identity((a, b, c) in (2usize..5).prop_flat_map(triple)) {
            let lhs = lattice_bracket(&add(&a, &b), &c);
            let rhs = add(&add(&lattice_bracket(&a, &c), &lattice_bracket(&b, &c)), &mul(&anomaly(&a, &b), &c));
            prop_assert_eq!(lhs, rhs);
            let ab = add(&a, &b);
            prop_assert_eq!(anomaly(&a, &b), sub(&add(&plus_part(&a), &plus_part(&b)), &plus_part(&ab)));
            prop_assert_eq!(anomaly(&a, &b), sub(&add(&minus_part(&a), &minus_part(&b)), &minus_part(&ab)));
        }

        #[test]
        fn anomaly_cocycle((a, b, c) in (2usize..5).prop_flat_map(triple)) {
            let lhs = add(&anomaly(&a, &b), &anomaly(&add(&a, &b), &c));
            let rhs = add(&anomaly(&a, &add(&b, &c)), &anomaly(&b, &c));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn minimal_set_matches_brute_force(w in proptest::collection::vec(1i64..=4, 2..=3)) {
            let n = match PrimeSystem::new(w) {
                Ok(n) => n,
                Err(_) => return Ok(()),
            };
            let basis = enumerate_minimal_elements(&n).unwrap();
            let sols = clean_solutions_in_box(&n).unwrap();
            let m = n.modes() as i64;
            prop_assert!(basis.gammas.len() as i64 <= 2 * m * n.sum());
            for g in &sols {
                prop_assert_eq!(n.dot(g).unwrap(), 0);
                let pg = ResonancePair::from_clean(g);
                prop_assert!(pg.is_clean());
                let split = sols.iter().any(|x| {
                    let y = sub(g, x);
                    y.iter().any(|&v| v != 0) && sols.contains(&y) && ResonancePair::from_clean(x).add(&ResonancePair::from_clean(&y)) == pg
                });
                prop_assert_eq!(basis.index_of(g).is_some(), !split, "{:?}", g);
            }
        }
    }
}
