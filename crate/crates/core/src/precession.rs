//! Resonance precession: flows d𝒜/dt = {f, 𝒜} on symplectic leaves, the reduced (a, b, W)
//! systems of the 1:1 and 1:2 resonances, Heisenberg evolution of level blocks, and the
//! catalog of special systems (inverted oscillator, magneto-atom, anisotropic oscillator in a field).

use crate::averaging::{to_fock_level_block, WickPolynomial};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::lattice::PrimeSystem;
use crate::numerics::{bisect, dopri5, hermitian_eigen, integrate, unitary_propagator, OdeOptions};
use crate::poisson::{GeneratorId, PoissonStructure, Signature};
use crate::poly::{Poly, C64};
use crate::tolerances::{DRIFT_REL, SURFACE_REL};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// A Hamiltonian on a resonance algebra together with a starting point on the constraint surface.
#[derive(Clone, Debug)]
pub struct PrecessionSystem {
    pub structure: PoissonStructure,
    pub f: Poly,
    pub initial: Vec<C64>,
}

impl PrecessionSystem {
    pub fn new(structure: PoissonStructure, f: Poly, initial: Vec<C64>) -> Result<Self> {
        if f.nvars() != structure.nvars() || initial.len() != structure.nvars() {
            return Err(Error::InvalidInput(format!(
                "expected {} generator values, got f over {} and {} initial values",
                structure.nvars(),
                f.nvars(),
                initial.len()
            )));
        }
        let r = structure.constraint_residual(&initial);
        if r > SURFACE_REL {
            return Err(Error::InvalidInput(format!("initial point off the constraint surface by {r:e}")));
        }
        if structure.casimirs.iter().any(|c| !c.eval(&initial).norm().is_finite()) {
            return Err(Error::InvalidInput("non-finite Casimir value".into()));
        }
        Ok(PrecessionSystem { structure, f, initial })
    }

    /// Starts from the realization of the phase point z.
    pub fn from_phase_point(structure: PoissonStructure, f: Poly, z: &[C64]) -> Result<Self> {
        let v = structure.realize(z);
        Self::new(structure, f, v)
    }

    /// Bound |𝒜_k| ≤ Π (C₀/n_l)^{(k₊+k₋)_l/2} on a compact leaf.
    pub fn leaf_bounds(&self) -> Option<Vec<f64>> {
        if self.structure.signature != Signature::Compact {
            return None;
        }
        let c0 = self.structure.casimirs[0].eval(&self.initial).re;
        let m = self.structure.modes();
        let w = self.structure.n.weights();
        Some(
            self.structure
                .ids()
                .iter()
                .map(|id| {
                    let k = id.pair(m);
                    (0..m)
                        .map(|l| (c0.max(0.0) / w[l] as f64).powf((k.plus[l] + k.minus[l]) as f64 / 2.0))
                        .product()
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<Vec<C64>>,
    /// Largest relative change of each Casimir along the run.
    pub casimir_drift: Vec<f64>,
    pub energy_drift: f64,
    pub constraint_residual: f64,
    /// max(|𝒜_k|/bound_k) − 1, clipped at 0; `None` off compact leaves.
    pub leaf_box_excess: Option<f64>,
}

impl Trajectory {
    pub fn max_drift(&self) -> f64 {
        self.casimir_drift.iter().copied().fold(self.energy_drift, f64::max)
    }

    /// Casimir residuals C(t) − C(0) at every sample, one column per Casimir.
    pub fn casimir_residuals(&self, ps: &PoissonStructure) -> Vec<Vec<f64>> {
        let c0: Vec<C64> = ps.casimirs.iter().map(|c| c.eval(&self.values[0])).collect();
        self.values
            .iter()
            .map(|v| ps.casimirs.iter().zip(&c0).map(|(c, v0)| (c.eval(v) - v0).norm()).collect())
            .collect()
    }
}

/// Integrates d𝒜/dt = {f, 𝒜} on `steps + 1` equispaced samples of [0, t_max] and refuses the run
/// when a Casimir or the energy drifts by more than `tol` relative to its scale.
pub fn integrate_precession(
    sys: &PrecessionSystem,
    t_max: f64,
    steps: usize,
    opts: OdeOptions,
    tol: f64,
) -> Result<Trajectory> {
    if !(t_max > 0.0) || steps == 0 {
        return Err(Error::InvalidInput("need t_max > 0 and at least one step".into()));
    }
    let ps = &sys.structure;
    let times: Vec<f64> = (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect();
    let values = ps.integrate_flow(&sys.f, &sys.initial, &times, opts)?;
    let v0 = &sys.initial;
    let drift = |p: &Poly| {
        let p0 = p.eval(v0);
        let scale = p.eval_scale(v0).max(1.0);
        values.iter().map(|v| (p.eval(v) - p0).norm() / scale).fold(0.0, f64::max)
    };
    let casimir_drift: Vec<f64> = ps.casimirs.iter().map(drift).collect();
    let energy_drift = drift(&sys.f);
    let constraint_residual = values.iter().map(|v| ps.constraint_residual(v)).fold(0.0, f64::max);
    let leaf_box_excess = sys.leaf_bounds().map(|b| {
        values
            .iter()
            .flat_map(|v| v.iter().zip(&b).map(|(x, bd)| x.norm() / bd.max(1e-300) - 1.0))
            .fold(0.0, f64::max)
    });
    let traj = Trajectory { names: ps.names(), times, values, casimir_drift, energy_drift, constraint_residual, leaf_box_excess };
    if traj.max_drift() > tol {
        return Err(Error::Drift(format!(
            "Casimir drift {:?}, energy drift {:e} over t ∈ [0, {t_max}] exceed {tol:e}",
            traj.casimir_drift, traj.energy_drift
        )));
    }
    Ok(traj)
}

/// Default drift tolerance of [`integrate_precession`].
pub const DEFAULT_DRIFT: f64 = DRIFT_REL;

/// Named polynomials accepted in Hamiltonian strings: generator names, plus X, Y, Z, W on compact
/// two-mode structures. Positional names A<M+1>, A<M+2>, … continue the primitives with the real
/// basis ½(𝒜_γ + 𝒜_{−γ}), (1/2i)(𝒜_γ − 𝒜_{−γ}) over γ ∈ Γ_n whose first nonzero entry is positive.
pub fn generator_names(ps: &PoissonStructure) -> Vec<(String, Poly)> {
    let mut out: Vec<(String, Poly)> = ps.names().into_iter().enumerate().map(|(i, n)| (n, ps.var(i))).collect();
    let mut k = ps.modes();
    for (i, id) in ps.ids().iter().enumerate() {
        let GeneratorId::Lattice(g) = id else { continue };
        if g.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
            continue;
        }
        let Some(j) = ps.index_of(&id.conj()) else { continue };
        let (a, b) = (ps.var(i), ps.var(j));
        out.push((format!("A{}", k + 1), (&a + &b).scale(re(0.5))));
        out.push((format!("A{}", k + 2), (&a - &b).scale(C64::new(0.0, -0.5))));
        k += 2;
    }
    if let Ok(xyzw) = ps.real_coordinates() {
        for (n, p) in ["X", "Y", "Z", "W"].iter().zip(xyzw) {
            out.push((n.to_string(), p));
        }
    }
    out
}

pub fn parse_hamiltonian(ps: &PoissonStructure, s: &str) -> Result<Poly> {
    crate::averaging::parse_polynomial(s, &generator_names(ps), ps.nvars())
}

/// A stationary point of the flow on the leaf through the starting point.
#[derive(Clone, Debug, Serialize)]
pub struct LeafPoint {
    pub value: f64,
    #[serde(skip)]
    pub generators: Vec<C64>,
    pub z: Vec<(f64, f64)>,
    /// Norm of the Hamiltonian vector field at the point.
    pub field_residual: f64,
}

/// Minimum and maximum of f on the compact leaf Σ n_l|z_l|² = c0, found by projected gradient
/// descent from several random starts.
pub fn leaf_extrema(ps: &PoissonStructure, f: &Poly, c0: f64, starts: usize, seed: u64) -> Result<[LeafPoint; 2]> {
    if ps.signature != Signature::Compact || !(c0 > 0.0) {
        return Err(Error::InvalidInput("leaf extrema need a compact leaf with C₀ > 0".into()));
    }
    let m = ps.modes();
    let w: Vec<f64> = ps.n.weights().iter().map(|&x| x as f64).collect();
    let subs: Vec<Poly> = (0..ps.nvars()).map(|i| ps.phase_monomial(i)).collect();
    let fz = f.compose(&subs);
    let dz: Vec<Poly> = (0..m).map(|l| fz.derivative(l)).collect();
    let dzb: Vec<Poly> = (0..m).map(|l| fz.derivative(m + l)).collect();
    let grad_f: Vec<Poly> = (0..ps.nvars()).map(|i| f.derivative(i)).collect();
    let point = |x: &[f64]| -> Vec<C64> {
        let z: Vec<C64> = (0..m).map(|l| C64::new(x[2 * l], x[2 * l + 1])).collect();
        let mut full = z.clone();
        full.extend(z.iter().map(|v| v.conj()));
        full
    };
    let value = |x: &[f64]| fz.eval(&point(x)).re;
    // real gradient in (Re z, Im z), projected on the tangent space of the ellipsoid
    let tangent_grad = |x: &[f64]| -> Vec<f64> {
        let p = point(x);
        let mut g = vec![0.0; 2 * m];
        for l in 0..m {
            let a = dz[l].eval(&p);
            let b = dzb[l].eval(&p);
            g[2 * l] = (a + b).re;
            g[2 * l + 1] = (C64::i() * (a - b)).re;
        }
        let nrm: Vec<f64> = (0..2 * m).map(|i| 2.0 * w[i / 2] * x[i]).collect();
        let nn: f64 = nrm.iter().map(|v| v * v).sum();
        let gn: f64 = g.iter().zip(&nrm).map(|(a, b)| a * b).sum();
        g.iter().zip(&nrm).map(|(a, b)| a - gn / nn * b).collect()
    };
    let retract = |x: &mut Vec<f64>| {
        let s: f64 = (0..2 * m).map(|i| w[i / 2] * x[i] * x[i]).sum();
        let k = (c0 / s).sqrt();
        x.iter_mut().for_each(|v| *v *= k);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: [Option<(f64, Vec<f64>)>; 2] = [None, None];
    for _ in 0..starts.max(1) {
        let mut x0: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        retract(&mut x0);
        for (slot, sign) in [(0usize, -1.0), (1usize, 1.0)] {
            let mut x = x0.clone();
            let mut step = 0.1 * c0.sqrt();
            for _ in 0..20_000 {
                let g = tangent_grad(&x);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn < 1e-13 * c0.max(1.0).powf(1.5) {
                    break;
                }
                let f0 = sign * value(&x);
                let mut accepted = false;
                while step > 1e-16 {
                    let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + sign * step * b / gn).collect();
                    retract(&mut y);
                    if sign * value(&y) > f0 {
                        x = y;
                        step *= 1.5;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            let v = value(&x);
            let better = match &best[slot] {
                None => true,
                Some((bv, _)) => sign * v > sign * bv,
            };
            if better {
                best[slot] = Some((v, x));
            }
        }
    }
    let make = |(v, x): (f64, Vec<f64>)| {
        let p = point(&x);
        let gens = ps.realize(&p[..m]);
        let field = ps.flow_field(&grad_f, &gens);
        let field_residual = field.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        LeafPoint { value: v, generators: gens, z: (0..m).map(|l| (x[2 * l], x[2 * l + 1])).collect(), field_residual }
    };
    let [lo, hi] = best;
    Ok([make(lo.expect("at least one start")), make(hi.expect("at least one start"))])
}

/// Point (a, b, W) of a reduced system with its physical time t and the time τ of (5.20)-type
/// linear flows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedState {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub t: f64,
    pub tau: f64,
}

/// f = A a² + B ab + C b² + D a + E b + F.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticAB {
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticAB {
    pub fn value(&self, a: f64, b: f64) -> f64 {
        self.aa * a * a + self.ab * a * b + self.bb * b * b + self.a * a + self.b * b + self.c
    }

    pub fn grad(&self, a: f64, b: f64) -> [f64; 2] {
        [2.0 * self.aa * a + self.ab * b + self.a, self.ab * a + 2.0 * self.bb * b + self.b]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitKind {
    /// (a, b) fixed by the linear flow; W and τ move uniformly.
    Frozen,
    /// Fixed point of the full (a, b, W) system.
    Stationary,
    /// Periodic linear orbit inside the disk a² + b² < C₀².
    Rotating,
    /// Orbit bouncing between two roots of C₀² − a² − b², where W changes sign.
    Librating,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reduced11Solution {
    pub kind: OrbitKind,
    /// Period in t; `None` for frozen and stationary orbits.
    pub period: Option<f64>,
    /// τ-interval between turning points, for librating orbits.
    pub turning: Option<(f64, f64)>,
    /// Number of W = 0 crossings inside the sampled period.
    pub turning_points: usize,
    pub states: Vec<ReducedState>,
}

/// The 1:1 reduced system a = X − Y, b = 2Z with a² + b² + 4W² = C₀² and f quadratic in (a, b).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Reduced11 {
    pub f: QuadraticAB,
    pub c0: f64,
}

fn linear_kernels(lambda: f64, tau: f64) -> (f64, f64, f64) {
    let x = lambda * tau * tau;
    if x.abs() < 1e-3 {
        let ch = 1.0 + x / 2.0 + x * x / 24.0 + x.powi(3) / 720.0 + x.powi(4) / 40320.0 + x.powi(5) / 3628800.0;
        let sh = tau
            * (1.0 + x / 6.0 + x * x / 120.0 + x.powi(3) / 5040.0 + x.powi(4) / 362880.0 + x.powi(5) / 39916800.0);
        let g2 = tau
            * tau
            * (0.5 + x / 24.0 + x * x / 720.0 + x.powi(3) / 40320.0 + x.powi(4) / 3628800.0 + x.powi(5) / 479001600.0);
        (ch, sh, g2)
    } else if lambda > 0.0 {
        let r = lambda.sqrt();
        let ch = (r * tau).cosh();
        (ch, (r * tau).sinh() / r, (ch - 1.0) / lambda)
    } else {
        let r = (-lambda).sqrt();
        let ch = (r * tau).cos();
        (ch, (r * tau).sin() / r, (ch - 1.0) / lambda)
    }
}

impl Reduced11 {
    /// Substitutes X = ½(C₀+a), Y = ½(C₀−a), Z = ½b into f(X, Y, Z) (a W-free polynomial in
    /// X, Y, Z or X, Y, Z, W).
    pub fn from_xyz(f: &Poly, c0: f64) -> Result<Self> {
        let nv = f.nvars();
        if nv != 3 && nv != 4 {
            return Err(Error::InvalidInput("expected a polynomial in X, Y, Z (and W)".into()));
        }
        if nv == 4 && f.terms().any(|(e, _)| e[3] > 0) {
            return Err(Error::InvalidInput("f must not depend on W".into()));
        }
        let a = Poly::var(2, 0);
        let b = Poly::var(2, 1);
        let half = |p: &Poly| p.scale(re(0.5));
        let k = Poly::constant(2, re(c0 / 2.0));
        let mut subs = vec![&k + &half(&a), &k - &half(&a), half(&b)];
        if nv == 4 {
            subs.push(Poly::zero(2));
        }
        let g = f.compose(&subs);
        if g.total_degree() > 2 {
            return Err(Error::InvalidInput(format!("f has degree {} in (a, b), need ≤ 2", g.total_degree())));
        }
        if g.terms().any(|(_, v)| v.im.abs() > 1e-12 * v.norm().max(1.0)) {
            return Err(Error::InvalidInput("f must be real".into()));
        }
        let cf = |e: [u32; 2]| g.coeff(&e).re;
        Ok(Reduced11 {
            f: QuadraticAB { aa: cf([2, 0]), ab: cf([1, 1]), bb: cf([0, 2]), a: cf([1, 0]), b: cf([0, 1]), c: cf([0, 0]) },
            c0,
        })
    }

    /// M of d(a,b)/dτ = M(a,b) + v; M² = λ I.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let q = &self.f;
        [[q.ab, 2.0 * q.bb], [-2.0 * q.aa, -q.ab]]
    }

    pub fn offset(&self) -> [f64; 2] {
        [self.f.b, -self.f.a]
    }

    pub fn lambda(&self) -> f64 {
        self.f.ab * self.f.ab - 4.0 * self.f.aa * self.f.bb
    }

    fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        let m = self.matrix();
        [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
    }

    /// Closed-form (a, b)(τ) from (a, b)(0).
    pub fn ab_at(&self, x0: [f64; 2], tau: f64) -> [f64; 2] {
        let (ch, sh, g2) = linear_kernels(self.lambda(), tau);
        let mx = self.apply(x0);
        let v = self.offset();
        let mv = self.apply(v);
        [
            ch * x0[0] + sh * mx[0] + sh * v[0] + g2 * mv[0],
            ch * x0[1] + sh * mx[1] + sh * v[1] + g2 * mv[1],
        ]
    }

    /// (a, b)(τ+s) − (a, b)(τ) from (a, b)(τ), without cancellation for small s.
    fn increment(&self, x: [f64; 2], s: f64) -> [f64; 2] {
        let lambda = self.lambda();
        let (_, sh, g2) = linear_kernels(lambda, s);
        let mx = self.apply(x);
        let v = self.offset();
        let mv = self.apply(v);
        [
            lambda * g2 * x[0] + sh * (mx[0] + v[0]) + g2 * mv[0],
            lambda * g2 * x[1] + sh * (mx[1] + v[1]) + g2 * mv[1],
        ]
    }

    fn disk(&self, x: [f64; 2]) -> f64 {
        self.c0 * self.c0 - x[0] * x[0] - x[1] * x[1]
    }

    /// W from a² + b² + 4W² = C₀² for a state with the given (a, b).
    pub fn w_residual(&self, s: &ReducedState) -> f64 {
        (s.a * s.a + s.b * s.b + 4.0 * s.w * s.w - self.c0 * self.c0).abs()
    }

    /// (da, db, dW)/dt = (−4W f_b, 4W f_a, a f_b − b f_a).
    pub fn field(&self, a: f64, b: f64, w: f64) -> [f64; 3] {
        let [fa, fb] = self.f.grad(a, b);
        [-4.0 * w * fb, 4.0 * w * fa, a * fb - b * fa]
    }

    /// Closed-form solution sampled at `samples + 1` points over one period in t (over t ∈ [0, 1]
    /// for frozen and stationary orbits).
    pub fn solve(&self, a0: f64, b0: f64, w0: f64, samples: usize) -> Result<Reduced11Solution> {
        let c0 = self.c0;
        let init = ReducedState { a: a0, b: b0, w: w0, t: 0.0, tau: 0.0 };
        if self.w_residual(&init) > 1e-10 * c0.max(1.0).powi(2) {
            return Err(Error::InvalidInput(format!("(a, b, W) off the leaf: |a²+b²+4W²−C₀²| = {:e}", self.w_residual(&init))));
        }
        let samples = samples.max(2);
        let x0 = [a0, b0];
        let v = self.offset();
        let mx = self.apply(x0);
        let vel = [mx[0] + v[0], mx[1] + v[1]];
        let speed = vel[0].hypot(vel[1]);
        let scale = c0.max(1.0);
        if speed <= 1e-14 * scale * (1.0 + self.matrix().iter().flatten().map(|x| x.abs()).sum::<f64>()) {
            let states = (0..=samples)
                .map(|j| {
                    let t = j as f64 / samples as f64;
                    ReducedState { a: a0, b: b0, w: w0, t, tau: -4.0 * w0 * t }
                })
                .collect();
            return Ok(Reduced11Solution { kind: OrbitKind::Frozen, period: None, turning: None, turning_points: 0, states });
        }
        let ddisk = -2.0 * (a0 * vel[0] + b0 * vel[1]);
        let on_edge = w0.abs() <= 1e-12 * scale;
        if on_edge && ddisk.abs() <= 1e-12 * scale * speed {
            let states = (0..=samples)
                .map(|j| ReducedState { a: a0, b: b0, w: 0.0, t: j as f64 / samples as f64, tau: 0.0 })
                .collect();
            return Ok(Reduced11Solution { kind: OrbitKind::Stationary, period: None, turning: None, turning_points: 0, states });
        }
        // dτ/dt = −4W: τ runs forward when W < 0
        let s = if on_edge { ddisk.signum() } else { -w0.signum() };
        let lambda = self.lambda();
        let norm_m = self.matrix().iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let mut h = 2e-3 * c0 / (norm_m * c0 + v[0].hypot(v[1]));
        let trig_period = if lambda < 0.0 { Some(2.0 * PI / (-lambda).sqrt()) } else { None };
        if let Some(p) = trig_period {
            h = h.min(p / 2000.0);
        }
        let disk_at = |tau: f64| self.disk(self.ab_at(x0, tau));
        let find_root = |dir: f64| -> Result<Option<f64>> {
            let limit = trig_period.map(|p| (p / h).ceil() as usize + 1).unwrap_or(2_000_000);
            let mut prev = 0.0;
            for i in 1..=limit {
                let tau = dir * h * i as f64;
                if disk_at(tau) <= 0.0 {
                    let r = bisect(disk_at, prev, tau, 1e-15 * (1.0 + tau.abs()))?;
                    return Ok(Some(r));
                }
                prev = tau;
            }
            if trig_period.is_some() {
                Ok(None)
            } else {
                Err(Error::Convergence("linear orbit approaches an equilibrium inside the disk".into()))
            }
        };
        let ahead = find_root(s)?;
        let half_sqrt = |tau: f64| 0.5 * disk_at(tau).max(0.0).sqrt();
        match ahead {
            None => {
                let p = trig_period.expect("rotating orbits are trigonometric");
                let inv = |tau: f64| {
                    let d = disk_at(tau);
                    if d > 0.0 {
                        0.5 / d.sqrt()
                    } else {
                        0.0
                    }
                };
                let mut states = vec![init];
                let mut t = 0.0;
                for j in 1..=samples {
                    let ta = s * p * (j - 1) as f64 / samples as f64;
                    let tb = s * p * j as f64 / samples as f64;
                    t += integrate(inv, ta.min(tb), ta.max(tb), 1e-15, 1e-13)?;
                    let [a, b] = self.ab_at(x0, tb);
                    states.push(ReducedState { a, b, w: -s * half_sqrt(tb), t, tau: tb });
                }
                Ok(Reduced11Solution { kind: OrbitKind::Rotating, period: Some(t), turning: None, turning_points: 0, states })
            }
            Some(r1) => {
                let r2 = if on_edge { 0.0 } else { find_root(-s)?.ok_or_else(|| Error::Convergence("missing second turning point".into()))? };
                let (lo, hi) = (r1.min(r2), r1.max(r2));
                let c = 0.5 * (lo + hi);
                let hw = 0.5 * (hi - lo);
                let tau_of = |phi: f64| c - hw * phi.cos();
                let theta0 = ((c - 0.0) / hw).clamp(-1.0, 1.0).acos();
                let phi0 = if s > 0.0 { theta0 } else { 2.0 * PI - theta0 };
                let x_lo = self.ab_at(x0, lo);
                let x_hi = self.ab_at(x0, hi);
                // C₀² − |x|² measured from the nearer root, where it vanishes
                let disk_phi = |phi: f64| {
                    let (base, ds) = if phi.cos() >= 0.0 {
                        (x_lo, 2.0 * hw * (phi / 2.0).sin().powi(2))
                    } else {
                        (x_hi, -2.0 * hw * (phi / 2.0).cos().powi(2))
                    };
                    let d = self.increment(base, ds);
                    -2.0 * (base[0] * d[0] + base[1] * d[1]) - d[0] * d[0] - d[1] * d[1]
                };
                let dt = |phi: f64| {
                    let d = disk_phi(phi);
                    if d > 0.0 {
                        hw * phi.sin().abs() / (2.0 * d.sqrt())
                    } else {
                        0.0
                    }
                };
                let mut states = vec![init];
                let mut t = 0.0;
                let mut crossings = 0;
                for j in 1..=samples {
                    let pa = phi0 + 2.0 * PI * (j - 1) as f64 / samples as f64;
                    let pb = phi0 + 2.0 * PI * j as f64 / samples as f64;
                    let mut cuts = vec![pa];
                    let mut k = (pa / PI).floor() + 1.0;
                    while k * PI < pb {
                        if k * PI > pa + 1e-15 {
                            cuts.push(k * PI);
                            crossings += 1;
                        }
                        k += 1.0;
                    }
                    cuts.push(pb);
                    for win in cuts.windows(2) {
                        t += integrate(dt, win[0], win[1], 1e-15, 1e-13)?;
                    }
                    let tau = tau_of(pb);
                    let [a, b] = self.ab_at(x0, tau);
                    let sn = pb.sin();
                    let w = if sn.abs() < 1e-15 { 0.0 } else { -sn.signum() * 0.5 * disk_phi(pb).max(0.0).sqrt() };
                    states.push(ReducedState { a, b, w, t, tau });
                }
                Ok(Reduced11Solution {
                    kind: OrbitKind::Librating,
                    period: Some(t),
                    turning: Some((lo, hi)),
                    turning_points: crossings,
                    states,
                })
            }
        }
    }

    /// Direct integration of (da, db, dW, dτ)/dt at the given times.
    pub fn integrate(&self, a0: f64, b0: f64, w0: f64, times: &[f64], opts: OdeOptions) -> Result<Vec<ReducedState>> {
        let sol = dopri5(
            |_, y, dy| {
                let f = self.field(y[0], y[1], y[2]);
                dy[..3].copy_from_slice(&f);
                dy[3] = -4.0 * y[2];
            },
            &[a0, b0, w0, 0.0],
            times,
            opts,
        )?;
        Ok(sol
            .into_iter()
            .zip(times)
            .map(|(y, &t)| ReducedState { a: y[0], b: y[1], w: y[2], t, tau: y[3] })
            .collect())
    }

    /// Sup-norm distance in (a, b, W, τ) between the closed form and direct integration.
    pub fn compare(&self, sol: &Reduced11Solution, opts: OdeOptions) -> Result<f64> {
        let s0 = sol.states[0];
        let times: Vec<f64> = sol.states.iter().map(|s| s.t).collect();
        let num = self.integrate(s0.a, s0.b, s0.w, &times, opts)?;
        Ok(sol
            .states
            .iter()
            .zip(&num)
            .map(|(x, y)| (x.a - y.a).abs().max((x.b - y.b).abs()).max((x.w - y.w).abs()).max((x.tau - y.tau).abs()))
            .fold(0.0, f64::max))
    }
}

/// a = X − Y, b = 2Z and W as polynomials on the 1:1 structure.
pub fn reduced_11_coordinates(ps: &PoissonStructure) -> Result<[Poly; 3]> {
    if ps.n.weights() != [1, 1] {
        return Err(Error::InvalidInput("reduced 1:1 coordinates need weights (1,1)".into()));
    }
    let [x, y, z, w] = ps.real_coordinates()?;
    Ok([&x - &y, z.scale(re(2.0)), w])
}

/// a = X − 2Y, b = Z and W as polynomials on the 1:2 structure.
pub fn reduced_12_coordinates(ps: &PoissonStructure) -> Result<[Poly; 3]> {
    if ps.n.weights() != [1, 2] {
        return Err(Error::InvalidInput("reduced 1:2 coordinates need weights (1,2)".into()));
    }
    let [x, y, z, w] = ps.real_coordinates()?;
    Ok([&x - &y.scale(re(2.0)), z, w])
}

/// The 1:2 reduced system with f(X, Y, Z), X = ½(C₀+a), Y = ¼(C₀−a), b = Z.
#[derive(Clone, Debug)]
pub struct Reduced12 {
    pub f: Poly,
    pub c0: f64,
    grad: [Poly; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct Reduced12Trajectory {
    pub states: Vec<ReducedState>,
    /// Largest |C₁(t) − C₁(0)| relative to max(1, |C₁| scale).
    pub c1_drift: f64,
    pub energy_drift: f64,
}

impl Reduced12 {
    pub fn new(f: Poly, c0: f64) -> Result<Self> {
        if f.nvars() != 3 {
            return Err(Error::InvalidInput("expected a polynomial in X, Y, Z".into()));
        }
        let grad = [f.derivative(0), f.derivative(1), f.derivative(2)];
        Ok(Reduced12 { f, c0, grad })
    }

    /// C₀ and (a, b, W) of a phase point (q, p) of ½(q₁²+p₁²) + (q₂²+p₂²).
    pub fn phase_point(q: [f64; 2], p: [f64; 2]) -> (f64, [f64; 3]) {
        let x = 0.5 * (q[0] * q[0] + p[0] * p[0]);
        let y = 0.5 * (q[1] * q[1] + p[1] * p[1]);
        let z = 0.25 * (q[0] * q[0] * q[1] + 2.0 * q[0] * p[0] * p[1] - q[1] * p[0] * p[0]);
        let w = 0.25 * (p[0] * p[0] * p[1] + 2.0 * q[0] * q[1] * p[0] - q[0] * q[0] * p[1]);
        (x + 2.0 * y, [x - 2.0 * y, z, w])
    }

    fn xyz(&self, a: f64, b: f64) -> [f64; 3] {
        [0.5 * (self.c0 + a), 0.25 * (self.c0 - a), b]
    }

    pub fn c1(&self, a: f64, b: f64, w: f64) -> f64 {
        let [x, y, z] = self.xyz(a, b);
        0.5 * x * x * y - z * z - w * w
    }

    pub fn energy(&self, a: f64, b: f64) -> f64 {
        let v: Vec<C64> = self.xyz(a, b).iter().map(|&x| re(x)).collect();
        self.f.eval(&v).re
    }

    /// (da, db, dW)/dt = (−4W f_b, 4W f_a, −4b f_a + (¼X² − XY) f_b).
    pub fn field(&self, a: f64, b: f64, w: f64) -> [f64; 3] {
        let [x, y, z] = self.xyz(a, b);
        let v = [re(x), re(y), re(z)];
        let g: Vec<f64> = self.grad.iter().map(|p| p.eval(&v).re).collect();
        let fa = 0.5 * g[0] - 0.25 * g[1];
        let fb = g[2];
        [-4.0 * w * fb, 4.0 * w * fa, -4.0 * b * fa + (0.25 * x * x - x * y) * fb]
    }

    pub fn integrate(&self, init: [f64; 3], times: &[f64], opts: OdeOptions) -> Result<Reduced12Trajectory> {
        let sol = dopri5(
            |_, y, dy| {
                let f = self.field(y[0], y[1], y[2]);
                dy[..3].copy_from_slice(&f);
                dy[3] = -4.0 * y[2];
            },
            &[init[0], init[1], init[2], 0.0],
            times,
            opts,
        )?;
        let states: Vec<ReducedState> = sol
            .into_iter()
            .zip(times)
            .map(|(y, &t)| ReducedState { a: y[0], b: y[1], w: y[2], t, tau: y[3] })
            .collect();
        let [x, y, z] = self.xyz(init[0], init[1]);
        let c1_scale = (0.5 * x * x * y.abs() + z * z + init[2] * init[2]).max(1.0);
        let c10 = self.c1(init[0], init[1], init[2]);
        let e0 = self.energy(init[0], init[1]);
        let v0: Vec<C64> = [x, y, z].iter().map(|&t| re(t)).collect();
        let e_scale = self.f.eval_scale(&v0).max(1.0);
        let c1_drift = states.iter().map(|s| (self.c1(s.a, s.b, s.w) - c10).abs() / c1_scale).fold(0.0, f64::max);
        let energy_drift = states.iter().map(|s| (self.energy(s.a, s.b) - e0).abs() / e_scale).fold(0.0, f64::max);
        Ok(Reduced12Trajectory { states, c1_drift, energy_drift })
    }
}

/// 𝒜̂(t) = e^{itf̂/ħ′} 𝒜̂ e^{−itf̂/ħ′} for each operator and time.
pub fn heisenberg_evolution(ops: &[DMatrix<C64>], f: &DMatrix<C64>, hp: f64, times: &[f64]) -> Vec<Vec<DMatrix<C64>>> {
    times
        .iter()
        .map(|&t| {
            let u = unitary_propagator(f, t / hp);
            let ud = u.adjoint();
            ops.iter().map(|a| &ud * a * &u).collect()
        })
        .collect()
}

fn sorted_spectrum(a: &DMatrix<C64>) -> Vec<C64> {
    let mut ev: Vec<C64> = a.clone().schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default();
    ev.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));
    ev
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HeisenbergInvariants {
    /// Largest eigenvalue change relative to the operator scale.
    pub spectrum_drift: f64,
    pub trace_drift: f64,
}

pub fn heisenberg_invariants(ops: &[DMatrix<C64>], traj: &[Vec<DMatrix<C64>>]) -> HeisenbergInvariants {
    let mut spectrum_drift: f64 = 0.0;
    let mut trace_drift: f64 = 0.0;
    for (i, a) in ops.iter().enumerate() {
        let scale = a.iter().map(|c| c.norm()).fold(1e-300, f64::max) * a.nrows() as f64;
        let s0 = sorted_spectrum(a);
        let tr0 = a.trace();
        for step in traj {
            let s = sorted_spectrum(&step[i]);
            let d = s0.iter().zip(&s).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            spectrum_drift = spectrum_drift.max(d / scale);
            trace_drift = trace_drift.max((step[i].trace() - tr0).norm() / scale);
        }
    }
    HeisenbergInvariants { spectrum_drift, trace_drift }
}

/// Expectations of a level-preserving observable in a Glauber coherent state |z⟩ under f̂, next to
/// the classical values of its symbol along the flow of the symbol of f̂.
#[derive(Clone, Debug, Serialize)]
pub struct CoherentComparison {
    pub hbar: f64,
    pub times: Vec<f64>,
    pub quantum: Vec<f64>,
    pub classical: Vec<f64>,
    pub max_error: f64,
}

pub fn coherent_precession(
    n: &PrimeSystem,
    f: &WickPolynomial,
    obs: &WickPolynomial,
    z: &[C64],
    hbar: f64,
    times: &[f64],
) -> Result<CoherentComparison> {
    let m = n.modes();
    if z.len() != m || f.modes() != m || obs.modes() != m {
        return Err(Error::InvalidInput("mode count mismatch".into()));
    }
    let w = n.weights();
    let mean: f64 = z.iter().zip(w).map(|(v, &k)| k as f64 * v.norm_sqr() / hbar).sum();
    let var: f64 = z.iter().zip(w).map(|(v, &k)| (k * k) as f64 * v.norm_sqr() / hbar).sum();
    let top = (mean + 14.0 * var.sqrt() + 20.0).ceil() as u64;
    let basis = FockBasis::new(n, top);
    // log amplitude of ⟨m|z⟩ = Π e^{−|z|²/2ħ} (z/√ħ)^m / √m!
    let log_norm: f64 = z.iter().map(|v| -v.norm_sqr() / (2.0 * hbar)).sum();
    let amp = |st: &[u32]| -> C64 {
        let mut lg = log_norm;
        let mut ph = 0.0;
        for (l, &k) in st.iter().enumerate() {
            let r = z[l].norm();
            if k > 0 {
                if r == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                lg += k as f64 * (r / hbar.sqrt()).ln() - 0.5 * ln_factorial(k);
                ph += k as f64 * z[l].arg();
            }
        }
        C64::from_polar(lg.exp(), ph)
    };
    let mut quantum = vec![0.0; times.len()];
    let mut mass = 0.0;
    for level in 0..=top {
        let r = basis.level_range(level);
        if r.is_empty() {
            continue;
        }
        let psi0: Vec<C64> = basis.states()[r.clone()].iter().map(|s| amp(s)).collect();
        let p: f64 = psi0.iter().map(|c| c.norm_sqr()).sum();
        mass += p;
        if p < 1e-18 {
            continue;
        }
        let fb = to_fock_level_block(f, &basis, level, hbar)?;
        let ob = to_fock_level_block(obs, &basis, level, hbar)?;
        let (vals, vecs) = hermitian_eigen(&fb);
        let coef = vecs.adjoint() * nalgebra::DVector::from_vec(psi0);
        let obs_eig = vecs.adjoint() * &ob * &vecs;
        for (i, &t) in times.iter().enumerate() {
            let c = nalgebra::DVector::from_iterator(
                coef.len(),
                coef.iter().zip(&vals).map(|(c, &l)| c * C64::from_polar(1.0, -l * t / hbar)),
            );
            quantum[i] += (c.adjoint() * &obs_eig * &c)[(0, 0)].re;
        }
    }
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Cutoff(format!("coherent state mass {mass} below 1 at level cutoff {top}")));
    }
    // classical flow dz/dt = −i ∂f/∂z̄ of the symbol
    let fs = f.symbol_at(0);
    let os = obs.symbol_at(0);
    let dzb: Vec<Poly> = (0..m).map(|l| fs.derivative(m + l)).collect();
    let full = |y: &[f64]| -> Vec<C64> {
        let zz: Vec<C64> = (0..m).map(|l| C64::new(y[2 * l], y[2 * l + 1])).collect();
        let mut v = zz.clone();
        v.extend(zz.iter().map(|c| c.conj()));
        v
    };
    let y0: Vec<f64> = z.iter().flat_map(|c| [c.re, c.im]).collect();
    let sol = dopri5(
        |_, y, dy| {
            let v = full(y);
            for l in 0..m {
                let d = -C64::i() * dzb[l].eval(&v);
                dy[2 * l] = d.re;
                dy[2 * l + 1] = d.im;
            }
        },
        &y0,
        times,
        OdeOptions::default(),
    )?;
    let classical: Vec<f64> = sol.iter().map(|y| os.eval(&full(y)).re).collect();
    let max_error = quantum.iter().zip(&classical).map(|(q, c)| (q - c).abs()).fold(0.0, f64::max);
    Ok(CoherentComparison { hbar, times: times.to_vec(), quantum, classical, max_error })
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Exact square root of a nonnegative rational, if it is a rational square.
pub fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let (n, d) = (r.numer(), r.denom());
    let sn = n.sqrt();
    let sd = d.sqrt();
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

/// Magneto-atom data: (ω_L/ω₀)² = s²/(k²−s²), (k+s)/(k−s) = l/m, d₀ = l+m−1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagnetoAtomSpec {
    pub ratio_sq: String,
    pub s: String,
    pub k: String,
    pub l: i64,
    pub m: i64,
    pub d0: i64,
}

/// `None` when (ω_L/ω₀)² does not give commensurable k, s.
pub fn magneto_atom(ratio_sq: &BigRational) -> Result<Option<MagnetoAtomSpec>> {
    if ratio_sq.is_negative() {
        return Err(Error::InvalidInput("(ω_L/ω₀)² must be nonnegative".into()));
    }
    let q = ratio_sq / (BigRational::one() + ratio_sq);
    let Some(sk) = rational_sqrt(&q) else { return Ok(None) };
    let s = sk.numer().clone();
    let k = sk.denom().clone();
    let lm = BigRational::new(&k + &s, &k - &s);
    let to_i64 = |x: &BigInt| -> Result<i64> { i64::try_from(x).map_err(|_| Error::Overflow("magneto resonance pair")) };
    let l = to_i64(lm.numer())?;
    let m = to_i64(lm.denom())?;
    Ok(Some(MagnetoAtomSpec { ratio_sq: ratio_sq.to_string(), s: s.to_string(), k: k.to_string(), l, m, d0: l + m - 1 }))
}

/// Effective frequencies ω± of ½|p|² + ½(ω₁²q₁² + ω₂²q₂²) + (q₁p₂ − q₂p₁).
pub fn anisotropic_frequencies(w1_sq: f64, w2_sq: f64) -> (f64, f64) {
    let s = w1_sq + w2_sq;
    let root = ((w1_sq - w2_sq).powi(2) + 8.0 * s).sqrt();
    ((0.5 * (s + 2.0 + root)).sqrt(), (0.5 * (s + 2.0 - root)).max(0.0).sqrt())
}

/// Exact resonance ω₊/ω₋ = l/m for rational ω₁², ω₂²; `None` if irrational or unstable.
pub fn anisotropic_resonance(w1_sq: &BigRational, w2_sq: &BigRational) -> Option<(i64, i64)> {
    let two = BigRational::from_integer(BigInt::from(2));
    let eight = BigRational::from_integer(BigInt::from(8));
    let s = w1_sq + w2_sq;
    let diff = w1_sq - w2_sq;
    let disc = &diff * &diff + &eight * &s;
    let root = rational_sqrt(&disc)?;
    let plus = (&s + &two + &root) / &two;
    let minus = (&s + &two - &root) / &two;
    if !minus.is_positive() {
        return None;
    }
    let ratio = rational_sqrt(&(plus / minus))?;
    Some((i64::try_from(ratio.numer()).ok()?, i64::try_from(ratio.denom()).ok()?))
}

#[derive(Clone, Debug)]
pub enum SpecialSystem {
    Inverted(PrimeSystem),
    Magneto { ratio_sq: BigRational },
    Anisotropic { w1_sq: BigRational, w2_sq: BigRational },
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraDescriptor {
    pub kind: String,
    pub resonant: bool,
    pub weights: Option<Vec<i64>>,
    pub degree: Option<i64>,
    pub frequencies: Option<(f64, f64)>,
    /// (name, realization) pairs.
    pub generators: Vec<(String, String)>,
    /// (f, g, {f, g}) over the generator names.
    pub brackets: Vec<(String, String, String)>,
    pub casimirs: Vec<String>,
    pub magneto: Option<MagnetoAtomSpec>,
}

/// (f, g, {f, g}) for every generator pair f before g in table order.
pub fn bracket_rows(ps: &PoissonStructure) -> Vec<(String, String, String)> {
    let names = ps.names();
    let mut out = Vec::new();
    for i in 0..ps.nvars() {
        for j in i + 1..ps.nvars() {
            let e = ps.entry(i, j);
            let s = if e.is_zero() { "0".to_string() } else { e.format(&names) };
            out.push((names[i].clone(), names[j].clone(), s));
        }
    }
    out
}

fn realization_rows(ps: &PoissonStructure, vars: [&str; 2]) -> Vec<(String, String)> {
    let m = ps.modes();
    ps.ids()
        .iter()
        .map(|id| {
            let k = id.pair(m);
            let mut parts = Vec::new();
            for l in 0..m {
                for (e, v) in [(k.plus[l], vars[0]), (k.minus[l], vars[1])] {
                    match e {
                        0 => {}
                        1 => parts.push(format!("{v}{}", l + 1)),
                        _ => parts.push(format!("{v}{}^{e}", l + 1)),
                    }
                }
            }
            (id.name(), if parts.is_empty() { "1".into() } else { parts.join("*") })
        })
        .collect()
}

fn casimir_rows(ps: &PoissonStructure) -> Vec<String> {
    let names = ps.names();
    ps.casimirs.iter().map(|c| c.format(&names)).collect()
}

pub fn classify_special_system(spec: &SpecialSystem) -> Result<AlgebraDescriptor> {
    match spec {
        SpecialSystem::Inverted(n) => {
            let ps = PoissonStructure::new(n, Signature::Split)?;
            let mut generators = realization_rows(&ps, ["u", "v"]);
            let mut brackets = bracket_rows(&ps);
            if n.weights() == [1, 1] {
                let (b, names) = su11_basis(&ps)?;
                for (i, nm) in names.iter().enumerate() {
                    generators.push((nm.clone(), ["(A[1,-1] + A[-1,1])/2", "(A[1,-1] - A[-1,1])/2", "(A1 - A2)/2"][i].into()));
                }
                let all = ps.names();
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let br = ps.poisson_bracket(&b[i], &b[j]);
                    let label = (0..3)
                        .find_map(|k| {
                            if br.distance(&b[k]) < 1e-14 {
                                Some(names[k].clone())
                            } else if br.distance(&(-&b[k])) < 1e-14 {
                                Some(format!("-{}", names[k]))
                            } else {
                                None
                            }
                        })
                        .unwrap_or_else(|| br.format(&all));
                    brackets.push((names[i].clone(), names[j].clone(), label));
                }
            }
            Ok(AlgebraDescriptor {
                kind: "inverted".into(),
                resonant: true,
                weights: Some(n.weights().to_vec()),
                degree: Some(n.sum() - 1),
                frequencies: None,
                generators,
                brackets,
                casimirs: casimir_rows(&ps),
                magneto: None,
            })
        }
        SpecialSystem::Magneto { ratio_sq } => {
            let Some(spec) = magneto_atom(ratio_sq)? else {
                return Ok(AlgebraDescriptor {
                    kind: "magneto".into(),
                    resonant: false,
                    weights: None,
                    degree: None,
                    frequencies: None,
                    generators: vec![],
                    brackets: vec![],
                    casimirs: vec![],
                    magneto: None,
                });
            };
            let n = PrimeSystem::new(vec![spec.l, spec.m])?;
            let ps = PoissonStructure::new(&n, Signature::Compact)?;
            Ok(AlgebraDescriptor {
                kind: "magneto".into(),
                resonant: true,
                weights: Some(vec![spec.l, spec.m]),
                degree: Some(spec.d0),
                frequencies: None,
                generators: realization_rows(&ps, ["z+", "zb-"])
                    .into_iter()
                    .map(|(a, b)| (a, b.replace("z+1", "z+").replace("z+2", "z-").replace("zb-1", "zb+").replace("zb-2", "zb-")))
                    .collect(),
                brackets: bracket_rows(&ps),
                casimirs: casimir_rows(&ps),
                magneto: Some(spec),
            })
        }
        SpecialSystem::Anisotropic { w1_sq, w2_sq } => {
            let f = |r: &BigRational| r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN) / r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
            let freqs = anisotropic_frequencies(f(w1_sq), f(w2_sq));
            let res = anisotropic_resonance(w1_sq, w2_sq);
            let (generators, brackets, casimirs, weights, degree) = match res {
                Some((l, m)) => {
                    let n = PrimeSystem::new(vec![l, m])?;
                    let ps = PoissonStructure::new(&n, Signature::Compact)?;
                    (realization_rows(&ps, ["z", "zb"]), bracket_rows(&ps), casimir_rows(&ps), Some(vec![l, m]), Some(l + m - 1))
                }
                None => (vec![], vec![], vec![], None, None),
            };
            Ok(AlgebraDescriptor {
                kind: "anisotropic".into(),
                resonant: res.is_some(),
                weights,
                degree,
                frequencies: Some(freqs),
                generators,
                brackets,
                casimirs,
                magneto: None,
            })
        }
    }
}

/// b₁ = ½(𝒜_α + 𝒜_{−α}), b₂ = ½(𝒜_α − 𝒜_{−α}), b₃ = ½(𝒜₁ − 𝒜₂) on the split 1:1 structure.
pub fn su11_basis(ps: &PoissonStructure) -> Result<([Poly; 3], Vec<String>)> {
    if ps.signature != Signature::Split || ps.n.weights() != [1, 1] {
        return Err(Error::InvalidInput("su(1,1) basis needs the split 1:1 structure".into()));
    }
    let a = ps.generator(&GeneratorId::Lattice(vec![1, -1]))?;
    let ab = ps.generator(&GeneratorId::Lattice(vec![-1, 1]))?;
    let b1 = (&a + &ab).scale(re(0.5));
    let b2 = (&a - &ab).scale(re(0.5));
    let b3 = (&ps.var(0) - &ps.var(1)).scale(re(0.5));
    Ok(([b1, b2, b3], vec!["b1".into(), "b2".into(), "b3".into()]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{relations_12, resonance12_generators, Convention, FockBasis};
    use crate::averaging::Laurent;
    use crate::lattice::parse_rational;
    use proptest::prelude::*;

    fn ps(w: &[i64]) -> PoissonStructure {
        PoissonStructure::new(&PrimeSystem::new(w.to_vec()).unwrap(), Signature::Compact).unwrap()
    }

    fn z2(a: (f64, f64), b: (f64, f64)) -> Vec<C64> {
        vec![C64::new(a.0, a.1), C64::new(b.0, b.1)]
    }

    #[test]
    fn casimir_hamiltonian_is_stationary() {
        let s = ps(&[1, 2]);
        let f = s.casimirs[0].clone();
        let sys = PrecessionSystem::from_phase_point(s, f, &z2((0.4, 0.2), (-0.3, 0.5))).unwrap();
        let tr = integrate_precession(&sys, 10.0, 10, OdeOptions::default(), DEFAULT_DRIFT).unwrap();
        for v in &tr.values {
            let d = v.iter().zip(&sys.initial).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(d < 1e-14);
        }
    }

    #[test]
    fn primitive_hamiltonian_rotates_lattice_generator() {
        let s = ps(&[1, 2]);
        let f = parse_hamiltonian(&s, "A1").unwrap();
        let ia = s.index_of(&GeneratorId::Lattice(vec![2, -1])).unwrap();
        let sys = PrecessionSystem::from_phase_point(s, f, &z2((0.7, -0.1), (0.2, 0.4))).unwrap();
        let tr = integrate_precession(&sys, 20.0, 40, OdeOptions::default(), DEFAULT_DRIFT).unwrap();
        let a0 = sys.initial[ia];
        for (t, v) in tr.times.iter().zip(&tr.values) {
            let want = a0 * C64::from_polar(1.0, -2.0 * t);
            assert!((v[ia] - want).norm() < 1e-10 * a0.norm(), "t={t}");
        }
    }

    #[test]
    fn drift_over_hundred_units() {
        for (w, f) in [(vec![1, 1], "Z + 0.3*X^2 - 0.2*X*Y + 0.1*W*Z"), (vec![1, 2], "X*Z + 0.5*Y^2 + W"), (vec![2, 3], "A1*A2 + A[3,-2] + A[-3,2]")] {
            let s = ps(&w);
            let f = parse_hamiltonian(&s, f).unwrap();
            let sys = PrecessionSystem::from_phase_point(s, f, &z2((0.6, 0.1), (-0.2, 0.5))).unwrap();
            let tr = integrate_precession(&sys, 100.0, 200, OdeOptions::default(), DEFAULT_DRIFT).unwrap();
            assert!(tr.max_drift() < DRIFT_REL, "{w:?}: {:?}", tr.casimir_drift);
            assert!(tr.constraint_residual < 1e-8);
            assert!(tr.leaf_box_excess.unwrap() < 1e-8);
        }
    }

    #[test]
    fn drift_refusal_reports() {
        let s = ps(&[1, 2]);
        let f = parse_hamiltonian(&s, "X*Z").unwrap();
        let sys = PrecessionSystem::from_phase_point(s, f, &z2((0.6, 0.1), (-0.2, 0.5))).unwrap();
        let loose = OdeOptions { rtol: 1e-3, atol: 1e-3, ..OdeOptions::default() };
        assert!(matches!(integrate_precession(&sys, 100.0, 50, loose, 1e-14), Err(Error::Drift(_))));
    }

    #[test]
    fn positional_generator_names() {
        let s = ps(&[1, 2]);
        let re3 = parse_hamiltonian(&s, "A3").unwrap();
        let want = parse_hamiltonian(&s, "0.5*A[2,-1] + 0.5*A[-2,1]").unwrap();
        assert!(re3.distance(&want) == 0.0);
        let z = parse_hamiltonian(&s, "Z").unwrap();
        let w = parse_hamiltonian(&s, "W").unwrap();
        let im4 = parse_hamiltonian(&s, "A4").unwrap();
        // Z + iW = 2^{−1/2}𝒜_α for α = (2, −1)
        assert!(re3.scale(re(std::f64::consts::FRAC_1_SQRT_2)).distance(&z) < 1e-15);
        assert!(im4.scale(re(std::f64::consts::FRAC_1_SQRT_2)).distance(&w) < 1e-15);
        assert!(parse_hamiltonian(&s, "A5").is_err());
    }

    #[test]
    fn off_surface_start_rejected() {
        let s = ps(&[1, 2]);
        let f = s.var(0);
        let mut v = s.realize(&z2((0.6, 0.1), (-0.2, 0.5)));
        v[2] += C64::new(0.1, 0.0);
        assert!(PrecessionSystem::new(s, f, v).is_err());
    }

    #[test]
    fn leaf_extrema_of_shear() {
        let s = ps(&[1, 1]);
        let f = parse_hamiltonian(&s, "Z").unwrap();
        let [lo, hi] = leaf_extrema(&s, &f, 2.0, 4, 7).unwrap();
        assert!((lo.value + 1.0).abs() < 1e-10 && (hi.value - 1.0).abs() < 1e-10, "{lo:?} {hi:?}");
        assert!(lo.field_residual < 1e-6 && hi.field_residual < 1e-6);
        let s = ps(&[1, 2]);
        let f = parse_hamiltonian(&s, "Z + 0.2*X").unwrap();
        let [lo, hi] = leaf_extrema(&s, &f, 1.0, 6, 1).unwrap();
        assert!(lo.value < hi.value);
        assert!(lo.field_residual < 1e-6 && hi.field_residual < 1e-6, "{lo:?} {hi:?}");
    }

    fn state_on_leaf(c0: f64, a: f64, b: f64, sign: f64) -> (f64, f64, f64) {
        (a, b, sign * 0.5 * (c0 * c0 - a * a - b * b).sqrt())
    }

    #[test]
    fn reduced_11_constant_is_frozen() {
        let r = Reduced11 { f: QuadraticAB { aa: 0.0, ab: 0.0, bb: 0.0, a: 0.0, b: 0.0, c: 3.0 }, c0: 1.0 };
        let (a, b, w) = state_on_leaf(1.0, 0.3, 0.4, 1.0);
        let sol = r.solve(a, b, w, 8).unwrap();
        assert_eq!(sol.kind, OrbitKind::Frozen);
        for s in &sol.states {
            assert_eq!((s.a, s.b), (a, b));
            assert!((s.tau + 4.0 * w * s.t).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_11_circular_period() {
        // f = a² + b²: M = [[0, 2], [−2, 0]], eigenvalues ±2i
        let r = Reduced11 { f: QuadraticAB { aa: 1.0, ab: 0.0, bb: 1.0, a: 0.0, b: 0.0, c: 0.0 }, c0: 1.0 };
        assert_eq!(r.lambda(), -4.0);
        let (a, b, w) = state_on_leaf(1.0, 0.3, -0.2, -1.0);
        let sol = r.solve(a, b, w, 32).unwrap();
        assert_eq!(sol.kind, OrbitKind::Rotating);
        let tau_period = 2.0 * PI / 2.0;
        assert!((sol.period.unwrap() - tau_period / (4.0 * w.abs())).abs() < 1e-12);
        let last = sol.states.last().unwrap();
        assert!((last.a - a).abs() < 1e-12 && (last.b - b).abs() < 1e-12);
        assert!(r.compare(&sol, OdeOptions::default()).unwrap() < 1e-8);
    }

    #[test]
    fn reduced_11_librating_matches_integration() {
        let cases = [
            (QuadraticAB { aa: 1.0, ab: 0.0, bb: 0.0, a: 0.0, b: 0.0, c: 0.0 }, (0.3, 0.1, 1.0)),
            (QuadraticAB { aa: 0.2, ab: 0.5, bb: -0.3, a: 0.1, b: -0.4, c: 0.0 }, (0.2, -0.5, -1.0)),
            (QuadraticAB { aa: -0.7, ab: 0.1, bb: 0.9, a: 0.0, b: 0.3, c: 1.0 }, (-0.6, 0.2, 1.0)),
            (QuadraticAB { aa: 0.0, ab: 0.0, bb: 0.0, a: 1.0, b: 0.5, c: 0.0 }, (0.1, 0.1, -1.0)),
        ];
        for (q, (a, b, sg)) in cases {
            let r = Reduced11 { f: q, c0: 1.3 };
            let (a, b, w) = state_on_leaf(1.3, a, b, sg);
            let sol = r.solve(a, b, w, 48).unwrap();
            let err = r.compare(&sol, OdeOptions::default()).unwrap();
            assert!(err < 1e-8, "{q:?}: {:?} err {err:e}", sol.kind);
            let e0 = q.value(a, b);
            for s in &sol.states {
                assert!(r.w_residual(s) < 1e-12);
                assert!((q.value(s.a, s.b) - e0).abs() < 1e-12);
            }
            let last = sol.states.last().unwrap();
            assert!((last.a - a).abs() < 1e-9 && (last.w - w).abs() < 1e-9, "period closes for {q:?}");
        }
    }

    #[test]
    fn reduced_11_from_edge() {
        let r = Reduced11 { f: QuadraticAB { aa: 0.0, ab: 1.0, bb: 0.0, a: 0.0, b: 0.2, c: 0.0 }, c0: 1.0 };
        let sol = r.solve(0.6, 0.8, 0.0, 40).unwrap();
        assert_eq!(sol.kind, OrbitKind::Librating);
        assert!(r.compare(&sol, OdeOptions::default()).unwrap() < 1e-8);
        // f = a² + b² on the rim: the τ orbit is the rim itself
        let r = Reduced11 { f: QuadraticAB { aa: 1.0, ab: 0.0, bb: 1.0, a: 0.0, b: 0.0, c: 0.0 }, c0: 1.0 };
        assert_eq!(r.solve(0.6, 0.8, 0.0, 4).unwrap().kind, OrbitKind::Stationary);
        assert!(r.field(0.6, 0.8, 0.0).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn reduced_11_from_averaged_quartic() {
        let f = crate::averaging::classical_average_quartic(&crate::averaging::QuarticDerivatives {
            d40: 1.0,
            d04: -0.5,
            d22: 0.7,
            d31: 0.2,
            d13: 0.0,
        });
        let r = Reduced11::from_xyz(&f, 1.0).unwrap();
        let (a, b, w) = state_on_leaf(1.0, 0.2, 0.3, 1.0);
        let sol = r.solve(a, b, w, 32).unwrap();
        assert!(r.compare(&sol, OdeOptions::default()).unwrap() < 1e-8);
        let cubic = Poly::var(3, 0).pow(3);
        assert!(Reduced11::from_xyz(&cubic, 1.0).is_err());
    }

    fn surface_points(s: &PoissonStructure, k: usize) -> Vec<Vec<C64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..k).map(|_| s.random_surface_point(&mut rng)).collect()
    }

    fn agree(s: &PoissonStructure, lhs: &Poly, rhs: &Poly) -> bool {
        surface_points(s, 10).iter().all(|v| (lhs.eval(v) - rhs.eval(v)).norm() < 1e-12)
    }

    #[test]
    fn reduced_11_brackets() {
        let s = ps(&[1, 1]);
        let [a, b, w] = reduced_11_coordinates(&s).unwrap();
        let k = |x: f64, p: &Poly| p.scale(re(x));
        assert!(agree(&s, &s.poisson_bracket(&a, &b), &k(4.0, &w)));
        assert!(agree(&s, &s.poisson_bracket(&a, &w), &k(-1.0, &b)));
        assert!(agree(&s, &s.poisson_bracket(&b, &w), &a));
        // {{f, τ}, a} = −4b with {f, τ} = −4W
        assert!(agree(&s, &s.poisson_bracket(&k(-4.0, &w), &a), &k(-4.0, &b)));
        assert!(agree(&s, &s.poisson_bracket(&s.poisson_bracket(&a, &b), &b), &k(-4.0, &a)));
        let c0 = &s.var(0) + &s.var(1);
        let leaf = &(&(&a * &a) + &(&b * &b)) + &k(4.0, &(&w * &w));
        assert!(agree(&s, &leaf, &(&c0 * &c0)));
    }

    #[test]
    fn reduced_12_brackets_and_flow() {
        let s = ps(&[1, 2]);
        let [a, b, w] = reduced_12_coordinates(&s).unwrap();
        let [x, y, _, _] = s.real_coordinates().unwrap();
        let k = |c: f64, p: &Poly| p.scale(re(c));
        assert!(agree(&s, &s.poisson_bracket(&a, &b), &k(4.0, &w)));
        assert!(agree(&s, &s.poisson_bracket(&a, &w), &k(-4.0, &b)));
        assert!(agree(&s, &s.poisson_bracket(&b, &w), &(&k(0.25, &(&x * &x)) - &(&x * &y))));

        let f3 = crate::averaging::parse_polynomial(
            "X*Z + 0.5*Y^2 - 0.3*Z",
            &[("X".into(), Poly::var(3, 0)), ("Y".into(), Poly::var(3, 1)), ("Z".into(), Poly::var(3, 2))],
            3,
        )
        .unwrap();
        let q = [0.6, -0.3];
        let p = [0.2, 0.5];
        let (c0, init) = Reduced12::phase_point(q, p);
        let red = Reduced12::new(f3.clone(), c0).unwrap();
        assert!(red.c1(init[0], init[1], init[2]).abs() < 1e-15);
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.5).collect();
        let tr = red.integrate(init, &times, OdeOptions::default()).unwrap();
        assert!(tr.c1_drift < DRIFT_REL && tr.energy_drift < DRIFT_REL, "{} {}", tr.c1_drift, tr.energy_drift);

        // same Hamiltonian on the full structure
        let z = [C64::new(q[0], p[0]) * std::f64::consts::FRAC_1_SQRT_2, C64::new(q[1], p[1]) * std::f64::consts::FRAC_1_SQRT_2];
        let xyzw = s.real_coordinates().unwrap();
        let ff = f3.compose(&xyzw[..3]);
        let v0 = s.realize(&z);
        assert!((a.eval(&v0).re - init[0]).abs() < 1e-14 && (w.eval(&v0).re - init[2]).abs() < 1e-14);
        let full = s.integrate_flow(&ff, &v0, &times[..21], OdeOptions::default()).unwrap();
        for (st, v) in tr.states.iter().zip(&full) {
            let d = (a.eval(v).re - st.a).abs().max((b.eval(v).re - st.b).abs()).max((w.eval(v).re - st.w).abs());
            assert!(d < 1e-9, "t={}: {d:e}", st.t);
        }
    }

    #[test]
    fn heisenberg_blocks_keep_spectra_and_relations() {
        let hp = 0.7;
        let level = 9;
        let basis = FockBasis::new(&PrimeSystem::new(vec![1, 2]).unwrap(), level);
        let g = resonance12_generators(&basis, hp).unwrap();
        let blocks: Vec<DMatrix<C64>> = g.iter().map(|o| o.block(&basis, level)).collect();
        let f = &blocks[2] + &(&blocks[0] * &blocks[3]) * re(0.3);
        let f = (&f + &f.adjoint()) * re(0.5);
        let times = [0.0, 0.5, 1.7, 4.0];
        let traj = heisenberg_evolution(&blocks, &f, hp, &times);
        let inv = heisenberg_invariants(&blocks, &traj);
        assert!(inv.spectrum_drift < 1e-12 && inv.trace_drift < 1e-12, "{inv:?}");
        for step in &traj {
            let a: [DMatrix<C64>; 4] = std::array::from_fn(|j| step[j].clone());
            for r in relations_12(&a, hp, level) {
                assert!(r.value < 1e-12, "{}: {}", r.name, r.value);
            }
        }
        // a Casimir block is a multiple of the identity
        let c = &blocks[0] - &blocks[1];
        let traj = heisenberg_evolution(&blocks, &c, hp, &times);
        for step in &traj {
            for (x, y) in step.iter().zip(&blocks) {
                assert!((x - y).iter().all(|v| v.norm() < 1e-12));
            }
        }
    }

    #[test]
    fn coherent_expectations_approach_classical_flow() {
        let n = PrimeSystem::new(vec![1, 2]).unwrap();
        let cv = Convention::Sqrt2;
        let one = Laurent::constant(re(1.0));
        let g = WickPolynomial::monomial(vec![2, 0], vec![0, 1], one.clone(), cv);
        let f = g.add(&g.adjoint()).unwrap();
        let obs = WickPolynomial::monomial(vec![1, 0], vec![1, 0], one, cv);
        let z = [C64::new(0.45, 0.2), C64::new(0.3, -0.35)];
        let hs = [0.02, 0.01, 0.005];
        let times = [0.0, 0.25, 0.5, 0.75, 1.0];
        let errs: Vec<f64> =
            hs.iter().map(|&h| coherent_precession(&n, &f, &obs, &z, h, &times).unwrap().max_error).collect();
        let slope = crate::numerics::loglog_slope(&hs, &errs);
        assert!((slope - 1.0).abs() < 0.2, "errors {errs:?} slope {slope}");
    }

    #[test]
    fn magneto_table() {
        for (r, d0) in [("1/8", 2), ("1/3", 3), ("1/24", 4), ("9/16", 4), ("4/5", 5)] {
            let spec = magneto_atom(&parse_rational(r).unwrap()).unwrap().unwrap();
            assert_eq!(spec.d0, d0, "{r}: {spec:?}");
        }
        let spec = magneto_atom(&parse_rational("1/8").unwrap()).unwrap().unwrap();
        assert_eq!((spec.s.as_str(), spec.k.as_str(), spec.l, spec.m), ("1", "3", 2, 1));
        assert!(magneto_atom(&parse_rational("1/2").unwrap()).unwrap().is_none());
        let iso = magneto_atom(&parse_rational("0").unwrap()).unwrap().unwrap();
        assert_eq!((iso.l, iso.m, iso.d0), (1, 1, 1));
        let d = classify_special_system(&SpecialSystem::Magneto { ratio_sq: parse_rational("1/8").unwrap() }).unwrap();
        assert!(d.resonant && d.degree == Some(2));
        let nr = classify_special_system(&SpecialSystem::Magneto { ratio_sq: parse_rational("2").unwrap() }).unwrap();
        assert!(!nr.resonant);
    }

    fn hamilton_frequencies(w1: f64, w2: f64) -> Vec<f64> {
        // Hessian in (q1, q2, p1, p2) and J = [[0, I], [−I, 0]]
        let h = nalgebra::Matrix4::new(
            w1, 0.0, 0.0, 1.0, //
            0.0, w2, -1.0, 0.0, //
            0.0, -1.0, 1.0, 0.0, //
            1.0, 0.0, 0.0, 1.0,
        );
        let j = nalgebra::Matrix4::new(
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, -1.0, 0.0, 0.0,
        );
        let mut f: Vec<f64> = (j * h).complex_eigenvalues().iter().map(|c| c.im.abs()).collect();
        f.sort_by(|a, b| b.partial_cmp(a).unwrap());
        f.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        f
    }

    #[test]
    fn anisotropic_frequencies_match_linearization() {
        let (p, m) = anisotropic_frequencies(9.0, 9.0);
        assert!((p - 4.0).abs() < 1e-14 && (m - 2.0).abs() < 1e-14);
        for (w1, w2) in [(3.0, 5.0), (0.3, 0.2), (7.5, 2.25)] {
            let (p, m) = anisotropic_frequencies(w1, w2);
            let o = hamilton_frequencies(w1, w2);
            assert!((o[0] - p).abs() < 1e-10 && (o[1] - m).abs() < 1e-10, "{w1} {w2}: {o:?} vs {p} {m}");
        }
        assert_eq!(anisotropic_resonance(&parse_rational("4").unwrap(), &parse_rational("4").unwrap()), Some((3, 1)));
        assert_eq!(anisotropic_resonance(&parse_rational("3").unwrap(), &parse_rational("5").unwrap()), None);
        // ω₋ = 0 at ω₁ = 1
        assert_eq!(anisotropic_resonance(&parse_rational("1").unwrap(), &parse_rational("4").unwrap()), None);
    }

    #[test]
    fn inverted_descriptor_sign() {
        let d = classify_special_system(&SpecialSystem::Inverted(PrimeSystem::new(vec![1, 1]).unwrap())).unwrap();
        let find = |x: &str, y: &str| d.brackets.iter().find(|r| r.0 == x && r.1 == y).unwrap().2.clone();
        assert_eq!(find("b1", "b2"), "b3");
        assert_eq!(find("b2", "b3"), "b1");
        assert_eq!(find("b3", "b1"), "-b2");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn closed_form_conserves_energy_and_leaf(
            aa in -1.0f64..1.0, ab in -1.0f64..1.0, bb in -1.0f64..1.0,
            la in -1.0f64..1.0, lb in -1.0f64..1.0,
            a0 in -0.6f64..0.6, b0 in -0.6f64..0.6, tau in -3.0f64..3.0,
        ) {
            let r = Reduced11 { f: QuadraticAB { aa, ab, bb, a: la, b: lb, c: 0.0 }, c0: 1.0 };
            let [a, b] = r.ab_at([a0, b0], tau);
            prop_assert!((r.f.value(a, b) - r.f.value(a0, b0)).abs() < 1e-9 * (1.0 + a.abs() + b.abs()).powi(2));
            // group law of the linear flow
            let mid = r.ab_at([a0, b0], tau / 2.0);
            let two = r.ab_at(mid, tau / 2.0);
            prop_assert!((two[0] - a).abs() + (two[1] - b).abs() < 1e-9 * (1.0 + a.abs() + b.abs()));
        }

        #[test]
        fn magneto_roundtrip(s in 0u32..40, extra in 1u32..40) {
            let k = s + extra;
            let r = BigRational::new(BigInt::from(s * s), BigInt::from(k * k - s * s));
            let spec = magneto_atom(&r).unwrap().unwrap();
            let g = num_integer::gcd(k + s, k - s);
            prop_assert_eq!(spec.l, ((k + s) / g) as i64);
            prop_assert_eq!(spec.m, ((k - s) / g) as i64);
            prop_assert_eq!(spec.d0, spec.l + spec.m - 1);
        }
    }
}
