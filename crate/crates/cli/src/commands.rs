use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resonance_core::acceptance::{run_acceptance, AcceptanceOptions};
use resonance_core::averaging::{average_to_order2, from_phase_space, parse_phase_polynomial, xyzw};
use resonance_core::fock::{
    coherent_transform, irreducible_rep, kahler_identities, kernel_and_moments, relations_12, reproducing_defect,
    resonance12_generators, vacuum_and_coherent, FockBasis,
};
use resonance_core::io::{write_atomic, ResidualSummary, RunConfig};
use resonance_core::lattice::{decompose_frequency_system, enumerate_minimal_elements, parse_rational, FrequencySystem};
use resonance_core::numerics::OdeOptions;
use resonance_core::poisson::{PoissonStructure, Signature};
use resonance_core::precession::{
    bracket_rows, classify_special_system, integrate_precession, parse_hamiltonian, OrbitKind, PrecessionSystem, Reduced11,
    SpecialSystem,
};
use resonance_core::spectral::{
    cluster_count, ebk_vs_model, label_clusters, model_symmetric_oracle, model_table, near_bottom_asymptotics, schrodinger_eigen,
    BlockEvolution, Method, SchrodingerProblem, SpectralEntry,
};
use resonance_core::tolerances::{BRACKET_ABS, DRIFT_REL, KAHLER_ABS, QUADRATURE_REL, RELATION_REL, SYMBOLIC_ZERO};
use resonance_core::{Poly, PrimeSystem, C64};
use serde::Serialize;
use serde_json::{json, Value};

/// Bad command-line values that clap cannot see.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Header and rows of the CSV form.
#[derive(Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct Outcome {
    pub payload: Value,
    pub residuals: ResidualSummary,
    pub provenance: Vec<String>,
    pub table: Table,
}

fn outcome(payload: Value, residuals: ResidualSummary, provenance: &[&str], table: Table) -> anyhow::Result<Outcome> {
    Ok(Outcome { payload, residuals, provenance: provenance.iter().map(|s| s.to_string()).collect(), table })
}

/// Residual checks as a table, for subcommands without a natural one.
fn residual_table(r: &ResidualSummary) -> Table {
    let mut t = Table::new(&["check", "value", "tolerance", "passed"]);
    for c in &r.checks {
        t.push(vec![c.name.clone(), fmt(c.value), fmt(c.tolerance), c.passed.to_string()]);
    }
    t
}

pub fn to_csv(t: &Table) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn weights(s: &str) -> anyhow::Result<PrimeSystem> {
    Ok(PrimeSystem::parse(s)?)
}

fn floats(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad number '{t}' in '{s}'"))))
        .collect()
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive, got {v}")))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct DecomposeArgs {
    /// Frequencies as value[:unit], e.g. "3,6" or "2/3:a, 1:a, 5:b".
    #[arg(long)]
    pub freqs: String,
}

pub fn decompose(a: &DecomposeArgs, _: &RunConfig) -> anyhow::Result<Outcome> {
    let d = decompose_frequency_system(&FrequencySystem::parse(&a.freqs)?);
    let mut r = ResidualSummary::new();
    for c in &d.components {
        r.flag(format!("component {} prime", c.unit), c.n.weights().iter().fold(0i64, |g, &v| gcd(g, v)) == 1);
    }
    let mut t = Table::new(&["unit", "characteristic", "n", "indices"]);
    for c in &d.components {
        t.push(vec![c.unit.clone(), c.characteristic.to_string(), join(c.n.weights()), join(&c.indices)]);
    }
    outcome(serde_json::to_value(&d)?, r, &["lattice::decompose_frequency_system"], t)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Args, Debug, Serialize)]
pub struct WeightsArgs {
    /// Prime system, e.g. 1,2.
    #[arg(long)]
    pub n: String,
}

pub fn hilbert_basis(a: &WeightsArgs, _: &RunConfig) -> anyhow::Result<Outcome> {
    let n = weights(&a.n)?;
    let b = enumerate_minimal_elements(&n)?;
    let mut r = ResidualSummary::new();
    let worst = b.gammas.iter().map(|g| n.dot(g).map(|v| v.abs())).collect::<Result<Vec<_>, _>>()?.into_iter().max().unwrap_or(0);
    r.check("max |n.gamma|", worst as f64, 0.0);
    r.flag("closed under negation", b.gammas.iter().all(|g| b.index_of(&g.iter().map(|v| -v).collect::<Vec<_>>()).is_some()));
    let mut t = Table::new(&["kind", "vector"]);
    for g in &b.gammas {
        t.push(vec!["gamma".into(), join(g)]);
    }
    for p in &b.primitives {
        t.push(vec!["primitive".into(), join(p)]);
    }
    outcome(serde_json::to_value(&b)?, r, &["lattice::enumerate_minimal_elements"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct BracketsArgs {
    #[arg(long)]
    pub n: String,
    /// Split signature (inverted oscillators) instead of the compact one.
    #[arg(long)]
    pub split: bool,
}

fn structure(n: &str, split: bool) -> anyhow::Result<PoissonStructure> {
    let sig = if split { Signature::Split } else { Signature::Compact };
    Ok(PoissonStructure::new(&weights(n)?, sig)?)
}

fn poly_terms(p: &Poly) -> Vec<Value> {
    p.terms().map(|(e, c)| json!({"exponents": e, "re": c.re, "im": c.im})).collect()
}

pub fn brackets(a: &BracketsArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let ps = structure(&a.n, a.split)?;
    let names = ps.names();
    let mut rows = Vec::new();
    let mut t = Table::new(&["f", "g", "bracket"]);
    for (i, (f, g, s)) in bracket_rows(&ps).into_iter().enumerate() {
        let (fi, gi) = (names.iter().position(|x| *x == f).unwrap_or(i), names.iter().position(|x| *x == g).unwrap_or(i));
        rows.push(json!({"f": f, "g": g, "bracket": s, "terms": poly_terms(ps.entry(fi, gi))}));
        t.push(vec![f, g, s]);
    }
    let fmt_all = |v: &[Poly]| v.iter().map(|p| p.format(&names)).collect::<Vec<_>>();
    let mut r = ResidualSummary::new();
    r.check("Casimir defect", ps.casimir_defect(), cfg.tolerance(SYMBOLIC_ZERO));
    let payload = json!({
        "n": ps.n.weights(),
        "signature": ps.signature,
        "generators": names,
        "brackets": rows,
        "constraints": fmt_all(&ps.constraints),
        "casimirs": fmt_all(&ps.casimirs),
    });
    outcome(payload, r, &["poisson::PoissonStructure::new", "poisson::PoissonStructure::casimir_defect"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct JacobiArgs {
    #[arg(long)]
    pub n: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub split: bool,
}

pub fn verify_jacobi(a: &JacobiArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let ps = structure(&a.n, a.split)?;
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let rep = ps.verify_jacobi(a.samples, cfg.seed);
    let mut r = ResidualSummary::new();
    r.check("max Jacobi residual", rep.max_residual(), cfg.tolerance(BRACKET_ABS));
    let payload = json!({"max_residual": rep.max_residual(), "report": rep});
    let t = residual_table(&r);
    outcome(payload, r, &["poisson::PoissonStructure::verify_jacobi"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct RepresentArgs {
    #[arg(long, default_value_t = 6)]
    pub n_level: u64,
    #[arg(long, default_value_t = 1.0)]
    pub hbar_prime: f64,
    /// Any of relations, casimirs, kernel.
    #[arg(long, default_value = "relations,casimirs,kernel")]
    pub check: String,
    /// Random points for the reproducing-kernel check.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

pub fn represent(a: &RepresentArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let hp = positive("hbar-prime", a.hbar_prime)?;
    let checks: Vec<&str> = a.check.split(',').map(str::trim).collect();
    if let Some(bad) = checks.iter().find(|c| !["relations", "casimirs", "kernel"].contains(c)) {
        return Err(usage(format!("unknown check '{bad}'")));
    }
    let n = a.n_level;
    let basis = FockBasis::new(&PrimeSystem::new(vec![1, 2])?, n);
    let gens = resonance12_generators(&basis, hp)?;
    let blocks: [_; 4] = std::array::from_fn(|j| gens[j].block(&basis, n));
    let fock = relations_12(&blocks, hp, n);
    let model = relations_12(&irreducible_rep(n, hp), hp, n);
    let mut r = ResidualSummary::new();
    let mut payload = serde_json::Map::new();
    payload.insert("n_level".into(), json!(n));
    payload.insert("hbar_prime".into(), json!(hp));
    payload.insert("dimension".into(), json!(blocks[0].nrows()));
    let is_casimir = |name: &str| name.starts_with('C');
    for (want, label) in [(false, "relations"), (true, "casimirs")] {
        if !checks.contains(&label) {
            continue;
        }
        let mut rows = Vec::new();
        for (f, m) in fock.iter().zip(&model).filter(|(f, _)| is_casimir(&f.name) == want) {
            r.check(format!("fock {}", f.name), f.value, cfg.tolerance(RELATION_REL));
            r.check(format!("model {}", m.name), m.value, cfg.tolerance(RELATION_REL));
            rows.push(json!({"name": f.name, "fock": f.value, "model": m.value}));
        }
        payload.insert(label.into(), Value::Array(rows));
    }
    if checks.contains(&"casimirs") {
        let d = blocks[0].nrows();
        let c1 = (0..d).map(|i| (blocks[0][(i, i)] - blocks[1][(i, i)]).re).sum::<f64>() / d as f64;
        payload.insert("casimir_values".into(), json!({"C1": c1, "C1_expected": n as f64 * hp / 3.0, "C2_expected": 0.0}));
    }
    if checks.contains(&"kernel") {
        let kern = kernel_and_moments(n, hp)?;
        let (_, fam) = vacuum_and_coherent(n, &gens, &basis)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pts: Vec<C64> = (0..a.points).map(|_| C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let rd = reproducing_defect(&fam, &kern, &pts);
        let tr = coherent_transform(n, &gens, &basis, &kern)?;
        let k = kahler_identities(&kern)?;
        let big = (n / 2) as f64;
        r.check("reproducing kernel", rd, cfg.tolerance(QUADRATURE_REL));
        r.check("intertwining", tr.intertwining_residual, cfg.tolerance(RELATION_REL));
        r.check("Kahler omega", (k.omega - big).abs(), cfg.tolerance(KAHLER_ABS));
        r.check("Kahler measure", (k.measure - big - 1.0).abs(), cfg.tolerance(KAHLER_ABS));
        payload.insert(
            "kernel".into(),
            json!({
                "coefficients": kern.coeffs,
                "reproducing_defect": rd,
                "intertwining_residual": tr.intertwining_residual,
                "rank": tr.rank,
                "gram_deviation": tr.gram_deviation,
                "kahler": {"omega": k.omega, "measure": k.measure},
            }),
        );
    }
    let t = residual_table(&r);
    outcome(
        Value::Object(payload),
        r,
        &["fock::resonance12_generators", "fock::irreducible_rep", "fock::relations_12", "fock::kernel_and_moments", "fock::coherent_transform", "fock::kahler_identities"],
        t,
    )
}

#[derive(Args, Debug, Serialize)]
pub struct AverageArgs {
    #[arg(long)]
    pub n: String,
    /// H1 as a polynomial in x, y (or q1, q2, ...) and p1, p2, ...
    #[arg(long)]
    pub perturbation: String,
    /// Optional second-order potential V2.
    #[arg(long)]
    pub quartic: Option<String>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: u8,
}

pub fn average(a: &AverageArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let n = weights(&a.n)?;
    let m = n.modes();
    let h1 = from_phase_space(&n, &parse_phase_polynomial(&a.perturbation, m)?)?;
    let v2 = a.quartic.as_deref().map(|s| parse_phase_polynomial(s, m).and_then(|p| from_phase_space(&n, &p))).transpose()?;
    let res = average_to_order2(&n, &h1, v2.as_ref())?;
    let order = a.order as usize;
    let mut r = ResidualSummary::new();
    for j in 0..order {
        r.check(format!("homological order {}", j + 1), res.homological_residuals[j], cfg.tolerance(SYMBOLIC_ZERO));
        r.check(format!("commutant order {}", j + 1), res.commutant_residuals[j], cfg.tolerance(SYMBOLIC_ZERO));
    }
    let mut t = Table::new(&["order", "wick", "generators"]);
    let mut orders = Vec::new();
    for (j, (w, g)) in res.normal_form.orders.iter().zip(&res.normal_form.generator_form).take(order).enumerate() {
        t.push(vec![(j + 1).to_string(), w.format(), g.poly.clone()]);
        orders.push(json!({"order": j + 1, "wick": w.format(), "generator_form": g}));
    }
    let mut payload = json!({"n": n.weights(), "convention": res.f0.convention().tag(), "orders": orders, "f0": res.f0.format()});
    if order == 2 {
        payload["f1"] = json!(res.f1.format());
        payload["h2"] = json!(res.h2.format());
    }
    outcome(payload, r, &["averaging::from_phase_space", "averaging::average_to_order2"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 0.125)]
    pub gamma: f64,
    /// Comma-separated ħ values.
    #[arg(long, default_value = "0.1")]
    pub hbar: String,
    /// Number of lowest eigenvalues per ħ.
    #[arg(long, default_value_t = 12)]
    pub levels: usize,
    /// Coefficient of x²y.
    #[arg(long, default_value_t = 1.0)]
    pub cubic: f64,
}

const SPECTRUM_COLUMNS: [&str; 6] = ["method", "n", "k", "hbar", "value", "residual"];

fn entry_row(e: &SpectralEntry) -> Vec<String> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    vec![e.method.tag().into(), opt(e.n.map(|v| v.to_string())), opt(e.k.map(|v| v.to_string())), e.hbar.to_string(), format!("{:.15e}", e.value), fmt(e.residual)]
}

pub fn spectrum(a: &SpectrumArgs, _: &RunConfig) -> anyhow::Result<Outcome> {
    if a.levels == 0 {
        return Err(usage("--levels must be at least 1"));
    }
    let mut t = Table::new(&SPECTRUM_COLUMNS);
    let mut r = ResidualSummary::new();
    let mut runs = Vec::new();
    for h in floats(&a.hbar)? {
        let p = SchrodingerProblem { cubic: a.cubic, ..SchrodingerProblem::standard(positive("hbar", h)?, a.gamma) };
        p.validate()?;
        let mut table = schrodinger_eigen(&p, a.levels)?;
        r.check(format!("eigenvalue count at hbar={h}"), (table.entries.len() as f64 - a.levels as f64).abs(), 0.0);
        let max_n = (0..).take_while(|&n| cluster_count(n) <= a.levels).last();
        let mut labels = Value::Null;
        if let Some(max_n) = max_n.filter(|_| a.cubic == 1.0) {
            match label_clusters(&table.values(), max_n, h) {
                Ok(lab) => {
                    let mut extra = Vec::new();
                    for (i, (n, k, v)) in lab.into_iter().enumerate() {
                        table.entries[i].n = Some(n);
                        table.entries[i].k = Some(k);
                        let nu = resonance_core::spectral::model_operator_spectrum(n, 1.0)?[k];
                        let asym = near_bottom_asymptotics(n, nu, h);
                        extra.push(SpectralEntry { method: Method::Asymptotic, n: Some(n), k: Some(k), index: i, hbar: h, value: asym, residual: (v - asym).abs() });
                    }
                    table.entries.extend(extra);
                    labels = json!({"clusters": max_n + 1});
                }
                Err(e) => labels = json!({"unavailable": e.to_string()}),
            }
        }
        for e in &table.entries {
            t.push(entry_row(e));
        }
        runs.push(json!({"hbar": h, "entries": table.entries, "meta": table.meta, "labels": labels}));
    }
    outcome(json!({"gamma": a.gamma, "cubic": a.cubic, "runs": runs}), r, &["spectral::schrodinger_eigen", "spectral::label_clusters", "spectral::near_bottom_asymptotics"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 6)]
    pub n_level: u64,
    #[arg(long, default_value_t = 1.0)]
    pub hbar_prime: f64,
}

pub fn model_spectrum(a: &ModelArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let hp = positive("hbar-prime", a.hbar_prime)?;
    let table = model_table(a.n_level, hp)?;
    let oracle = model_symmetric_oracle(a.n_level, hp);
    let dev = table.values().iter().zip(&oracle).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mut r = ResidualSummary::new();
    r.check("symmetric oracle", dev, cfg.tolerance(RELATION_REL));
    let mut t = Table::new(&SPECTRUM_COLUMNS);
    for e in &table.entries {
        t.push(entry_row(e));
    }
    outcome(json!({"n_level": a.n_level, "hbar_prime": hp, "entries": table.entries}), r, &["spectral::model_table", "spectral::model_symmetric_oracle"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct EbkArgs {
    #[arg(long, default_value_t = 40)]
    pub n_level: u64,
}

pub fn ebk(a: &EbkArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let c = ebk_vs_model(a.n_level)?;
    let hp = 1.0 / a.n_level.max(1) as f64;
    let mut r = ResidualSummary::new();
    r.check("max relative deviation", c.max_relative_deviation, cfg.tolerance(0.05));
    let mut t = Table::new(&SPECTRUM_COLUMNS);
    for (k, (e, m)) in c.ebk.iter().zip(&c.model).enumerate() {
        t.push(vec!["ebk".into(), a.n_level.to_string(), k.to_string(), hp.to_string(), format!("{e:.15e}"), fmt((e - m).abs())]);
        t.push(vec!["model".into(), a.n_level.to_string(), k.to_string(), hp.to_string(), format!("{m:.15e}"), fmt(0.0)]);
    }
    outcome(json!({"hbar_prime": hp, "comparison": c}), r, &["spectral::ebk_quantization", "spectral::ebk_vs_model"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct EvolveArgs {
    #[arg(long, default_value_t = 50.0)]
    pub tau_max: f64,
    /// Inclusive level range lo..hi carrying the initial data.
    #[arg(long, default_value = "0..8")]
    pub blocks: String,
    #[arg(long, default_value_t = 11)]
    pub samples: usize,
    /// ħ for the fast phases; omitted phases when absent.
    #[arg(long)]
    pub hbar: Option<f64>,
}

pub fn evolve(a: &EvolveArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let (lo, hi) = a
        .blocks
        .split_once("..")
        .and_then(|(l, h)| Some((l.trim().parse::<u64>().ok()?, h.trim().parse::<u64>().ok()?)))
        .filter(|(l, h)| l <= h)
        .ok_or_else(|| usage(format!("--blocks expects lo..hi, got '{}'", a.blocks)))?;
    if a.samples < 2 || !(a.tau_max > 0.0) {
        return Err(usage("need --samples >= 2 and --tau-max > 0"));
    }
    let ev = BlockEvolution::new(hi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let end = ev.basis.level_range(hi).end;
    let start = ev.basis.level_range(lo).start;
    let mut chi0: Vec<C64> = (0..end).map(|i| if i >= start { C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) } else { C64::new(0.0, 0.0) }).collect();
    let norm = chi0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    chi0.iter_mut().for_each(|c| *c /= norm);
    let taus: Vec<f64> = (0..a.samples).map(|i| a.tau_max * i as f64 / (a.samples - 1) as f64).collect();
    let samples = ev.run(&chi0, &taus, a.hbar)?;
    let n0 = ev.block_norms(&chi0);
    let drift = samples.iter().flat_map(|s| s.block_norms.iter().zip(&n0).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
    let mut r = ResidualSummary::new();
    r.check("block norm drift", drift, cfg.tolerance(RELATION_REL));
    let mut header = vec!["tau".to_string()];
    header.extend((0..=hi).map(|n| format!("norm_{n}")));
    let mut t = Table { header, rows: Vec::new() };
    for s in &samples {
        let mut row = vec![s.tau.to_string()];
        row.extend(s.block_norms.iter().map(|v| format!("{v:.15e}")));
        t.push(row);
    }
    outcome(json!({"levels": [lo, hi], "samples": samples}), r, &["spectral::BlockEvolution::run"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct PrecessArgs {
    #[arg(long)]
    pub n: String,
    /// Hamiltonian in generator names (A1, A2, A[2,-1] or positional A3, ...) or X, Y, Z, W.
    #[arg(long)]
    pub f: String,
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Positions q_l of the starting phase point; z_l = (q_l + i p_l)/√2.
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    /// Trajectory CSV: t, generator columns, Casimir residual columns.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn phase_point(q: &Option<String>, p: &Option<String>, m: usize) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let q = match q {
        Some(s) => floats(s)?,
        None => (0..m).map(|l| 0.6 / (l + 1) as f64).collect(),
    };
    let p = match p {
        Some(s) => floats(s)?,
        None => vec![0.3; m],
    };
    if q.len() != m || p.len() != m {
        return Err(usage(format!("expected {m} values for --q and --p")));
    }
    Ok((q, p))
}

pub fn precess(a: &PrecessArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let ps = structure(&a.n, false)?;
    let m = ps.modes();
    let f = parse_hamiltonian(&ps, &a.f)?;
    let (q, p) = phase_point(&a.q, &a.p, m)?;
    let z: Vec<C64> = q.iter().zip(&p).map(|(x, y)| C64::new(*x, *y) / std::f64::consts::SQRT_2).collect();
    let sys = PrecessionSystem::from_phase_point(ps, f, &z)?;
    let tr = integrate_precession(&sys, positive("t-max", a.t_max)?, a.steps.max(1), OdeOptions::default(), f64::INFINITY)?;
    let mut r = ResidualSummary::new();
    let tol = cfg.tolerance(DRIFT_REL);
    for (i, d) in tr.casimir_drift.iter().enumerate() {
        r.check(format!("C{i} drift"), *d, tol);
    }
    r.check("energy drift", tr.energy_drift, tol);
    r.check("constraint residual", tr.constraint_residual, tol);
    if let Some(x) = tr.leaf_box_excess {
        r.check("leaf box excess", x, tol);
    }
    let mut header = vec!["t".to_string()];
    for n in &tr.names {
        header.push(format!("{n}_re"));
        header.push(format!("{n}_im"));
    }
    header.extend((0..sys.structure.casimirs.len()).map(|i| format!("C{i}_residual")));
    let mut t = Table { header, rows: Vec::new() };
    for ((time, v), c) in tr.times.iter().zip(&tr.values).zip(tr.casimir_residuals(&sys.structure)) {
        let mut row = vec![time.to_string()];
        for x in v {
            row.push(format!("{:.15e}", x.re));
            row.push(format!("{:.15e}", x.im));
        }
        row.extend(c.iter().map(|x| fmt(*x)));
        t.push(row);
    }
    if let Some(path) = &a.csv {
        write_atomic(path, to_csv(&t)?.as_bytes())?;
    }
    let last: Vec<[f64; 2]> = tr.values.last().map(|v| v.iter().map(|c| [c.re, c.im]).collect()).unwrap_or_default();
    outcome(json!({"n": sys.structure.n.weights(), "f": a.f, "q": q, "p": p, "trajectory": tr, "final": last}), r, &["precession::PrecessionSystem::from_phase_point", "precession::integrate_precession"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct Reduce11Args {
    /// α, β, γ, δ, ρ of f = αX² + βY² + γZ² + ½γXY + δXZ + ρYZ.
    #[arg(long, allow_hyphen_values = true)]
    pub potential_quartics: String,
    /// Starting phase point q1,q2,p1,p2.
    #[arg(long, allow_hyphen_values = true, default_value = "0.6,-0.2,0.1,0.5")]
    pub initial: String,
    #[arg(long, default_value_t = 48)]
    pub samples: usize,
}

pub fn reduce11(a: &Reduce11Args, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let c = floats(&a.potential_quartics)?;
    let init = floats(&a.initial)?;
    if c.len() != 5 || init.len() != 4 {
        return Err(usage("--potential-quartics needs 5 values and --initial needs 4"));
    }
    let mono = |e: [u32; 3], v: f64| Poly::monomial(e.to_vec(), C64::new(v, 0.0));
    let f = [
        mono([2, 0, 0], c[0]),
        mono([0, 2, 0], c[1]),
        mono([0, 0, 2], c[2]),
        mono([1, 1, 0], 0.5 * c[2]),
        mono([1, 0, 1], c[3]),
        mono([0, 1, 1], c[4]),
    ]
    .iter()
    .fold(Poly::zero(3), |acc, t| &acc + t);
    let v = xyzw([init[0], init[1]], [init[2], init[3]]);
    let (x, y, z, w) = (v[0].re, v[1].re, v[2].re, v[3].re);
    let c0 = x + y;
    let red = Reduced11::from_xyz(&f, c0)?;
    let sol = red.solve(x - y, 2.0 * z, w, a.samples.max(2))?;
    let err = red.compare(&sol, OdeOptions::default())?;
    let mut r = ResidualSummary::new();
    r.check("closed form vs integration", err, cfg.tolerance(1e-8));
    r.check("leaf residual", sol.states.iter().map(|s| red.w_residual(s)).fold(0.0, f64::max), cfg.tolerance(1e-10));
    let mut t = Table::new(&["t", "tau", "a", "b", "W"]);
    for s in &sol.states {
        t.push([s.t, s.tau, s.a, s.b, s.w].iter().map(|v| format!("{v:.15e}")).collect());
    }
    let kind = match sol.kind {
        OrbitKind::Frozen => "frozen",
        OrbitKind::Stationary => "stationary",
        OrbitKind::Rotating => "rotating",
        OrbitKind::Librating => "librating",
    };
    let payload = json!({
        "c0": c0,
        "f": f.format(&["X".into(), "Y".into(), "Z".into()]),
        "quadratic": red.f,
        "kind": kind,
        "solution": sol,
        "closed_form_error": err,
    });
    outcome(payload, r, &["precession::Reduced11::from_xyz", "precession::Reduced11::solve", "precession::Reduced11::compare"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct MagnetoArgs {
    /// (ω_L/ω₀)², e.g. 1/8.
    #[arg(long)]
    pub ratio_sq: String,
}

pub fn magneto(a: &MagnetoArgs, _: &RunConfig) -> anyhow::Result<Outcome> {
    let ratio_sq = parse_rational(&a.ratio_sq)?;
    let d = classify_special_system(&SpecialSystem::Magneto { ratio_sq })?;
    let mut r = ResidualSummary::new();
    if let Some(m) = &d.magneto {
        r.flag("d0 = l + m - 1", m.d0 == m.l + m.m - 1);
    } else {
        r.flag("non-resonant", !d.resonant);
    }
    let t = residual_table(&r);
    outcome(serde_json::to_value(&d)?, r, &["precession::magneto_atom", "precession::classify_special_system"], t)
}

#[derive(Args, Debug, Serialize)]
pub struct AcceptArgs {
    /// Comma-separated subset such as A2,A5.
    #[arg(long)]
    pub only: Option<String>,
    /// Shift added to the model spectrum before A2 (negative control).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub tamper_nu: f64,
}

pub fn accept(a: &AcceptArgs, cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let opts = AcceptanceOptions {
        profile: cfg.profile.parse()?,
        seed: cfg.seed,
        tamper_nu: a.tamper_nu,
        only: a.only.as_deref().map(|s| s.split(',').map(|x| x.trim().to_string()).collect()).unwrap_or_default(),
    };
    let rep = run_acceptance(&opts)?;
    eprint!("{}", rep.table());
    let mut r = ResidualSummary::new();
    let mut t = Table::new(&["id", "title", "passed", "detail"]);
    for row in &rep.rows {
        r.flag(&row.id, row.passed);
        t.push(vec![row.id.clone(), row.title.clone(), row.passed.to_string(), row.detail.clone()]);
    }
    let rows: Vec<Value> = rep.rows.iter().map(|row| json!({"id": row.id, "title": row.title, "passed": row.passed, "detail": row.detail})).collect();
    outcome(json!({"profile": rep.profile, "rows": rows, "all_passed": rep.all_passed()}), r, &["acceptance::run_acceptance"], t)
}
