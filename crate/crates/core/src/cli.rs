//! Command implementations behind the `vvsym` binary: symmetry reports,
//! reduction, sampling runs with KL curves, exact marginals and generators.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::autograph::{build_variable_graph, build_vv_graph, variable_symmetries, SearchConfig};
use crate::error::{Error, Result};
use crate::model::{exact_marginals, write_model, ExactOptions, GraphicalModel, Marginals};
use crate::reduction::{is_non_equicardinal, nec_symmetries, ReducedModel};
use crate::samplers::{
    orbital_generators, prepare, run_chain, Algorithm, ChainConfig, ChainOutput, OrbitStrategy, Snapshot, Symmetries,
    DEFAULT_GROUP_CAP,
};
use crate::symmetry::{
    classify_taxonomy, embed_variable_symmetry, Taxonomy, TaxonomyLabel, VvPermutation, VvSet, DEFAULT_RENAMING_CAP,
    DEFAULT_TAXONOMY_GROUP_CAP,
};

/// `%g`-style formatting with 6 significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Smoothing added to estimated marginals before taking logs.
pub const KL_EPSILON: f64 = 1e-6;

/// `Σ_{var,val} P*(v) log(P*(v) / P̂(v))` with `P̂` smoothed as
/// `(P̂ + ε) / (1 + ε|D|)`.
pub fn kl_divergence(truth: &Marginals, estimate: &Marginals) -> f64 {
    let mut kl = 0.0;
    for (t, e) in truth.iter().zip(estimate) {
        let norm = 1.0 + KL_EPSILON * e.len() as f64;
        for (&p, &q) in t.iter().zip(e) {
            if p > 0.0 {
                kl += p * (p / ((q + KL_EPSILON) / norm)).ln();
            }
        }
    }
    kl.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    Variable,
    Vv,
    Nec,
}

impl std::str::FromStr for SymmetryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variable" => Ok(SymmetryKind::Variable),
            "vv" => Ok(SymmetryKind::Vv),
            "nec" => Ok(SymmetryKind::Nec),
            _ => Err(Error::Config(format!("unknown symmetry kind '{s}'"))),
        }
    }
}

fn taxonomy_lines(out: &mut String, result: Result<Taxonomy>, model: &GraphicalModel) {
    let describe = |l: &TaxonomyLabel| match l {
        TaxonomyLabel::SrvCount(r) => format!("srv_count ({})", r.describe(model)),
        other => other.name().to_string(),
    };
    match result {
        Ok(t) => {
            let _ = writeln!(out, "taxonomy: {}", describe(&t.group));
            for (k, l) in t.generators.iter().enumerate() {
                let _ = writeln!(out, "  generator {}: {}", k + 1, describe(l));
            }
        }
        Err(e) => {
            let _ = writeln!(out, "taxonomy: unavailable ({e})");
        }
    }
}

fn order_line(out: &mut String, gens: &crate::permgroup::GeneratorSet) {
    match gens.order(DEFAULT_GROUP_CAP) {
        Ok(n) => {
            let _ = writeln!(out, "order: {n}");
        }
        Err(_) => {
            let _ = writeln!(out, "order: > {DEFAULT_GROUP_CAP}");
        }
    }
}

/// Human-readable report: generators in cycle notation, group order,
/// taxonomy labels and timing.
pub fn cmd_symmetries(model: &GraphicalModel, kind: SymmetryKind, cfg: SearchConfig) -> Result<String> {
    let start = Instant::now();
    let mut out = String::new();
    match kind {
        SymmetryKind::Variable if !model.is_boolean() => {
            let gens = orbital_generators(model, cfg)?;
            let set = VvSet::of(model);
            let phis: Vec<VvPermutation> = gens
                .generators()
                .iter()
                .map(|p| VvPermutation::new(set.clone(), p.clone()))
                .collect();
            let _ = writeln!(out, "kind: variable (binarized)");
            let _ = writeln!(out, "generators: {}", phis.len());
            for phi in &phis {
                let _ = writeln!(out, "{}", phi.to_cycle_string(model));
            }
            order_line(&mut out, &gens);
            taxonomy_lines(
                &mut out,
                classify_taxonomy(&phis, model, DEFAULT_RENAMING_CAP, DEFAULT_TAXONOMY_GROUP_CAP),
                model,
            );
        }
        SymmetryKind::Variable => {
            let gens = variable_symmetries(model, cfg)?;
            let _ = writeln!(out, "kind: variable");
            let _ = writeln!(out, "generators: {}", gens.generators().len());
            for g in gens.generators() {
                let _ = writeln!(out, "{}", g.to_cycle_string(|i| model.variables[i].name.clone()));
            }
            order_line(&mut out, &gens);
            let embedded = gens
                .generators()
                .iter()
                .map(|t| embed_variable_symmetry(t, model))
                .collect::<Result<Vec<_>>>()?;
            taxonomy_lines(
                &mut out,
                classify_taxonomy(&embedded, model, DEFAULT_RENAMING_CAP, DEFAULT_TAXONOMY_GROUP_CAP),
                model,
            );
        }
        SymmetryKind::Vv => {
            let gens = crate::autograph::vv_symmetries(model, cfg)?;
            let set = VvSet::of(model);
            let phis: Vec<VvPermutation> = gens
                .generators()
                .iter()
                .map(|p| VvPermutation::new(set.clone(), p.clone()))
                .collect();
            let _ = writeln!(out, "kind: vv");
            let _ = writeln!(out, "generators: {}", phis.len());
            for phi in &phis {
                let _ = writeln!(out, "{}", phi.to_cycle_string(model));
            }
            order_line(&mut out, &gens);
            taxonomy_lines(
                &mut out,
                classify_taxonomy(&phis, model, DEFAULT_RENAMING_CAP, DEFAULT_TAXONOMY_GROUP_CAP),
                model,
            );
        }
        SymmetryKind::Nec => {
            let nec = nec_symmetries(model, cfg)?;
            let _ = writeln!(out, "kind: nec");
            write_classes(&mut out, model, &nec.reduced);
            let red = &nec.reduced;
            let set = VvSet::of(&red.model);
            let _ = writeln!(out, "generators: {}", nec.group.generators().len());
            for p in nec.group.generators() {
                let _ = writeln!(
                    out,
                    "{}",
                    p.to_cycle_string(|i| {
                        let (var, r) = set.pair(i);
                        format!("{}.{}", model.variables[var].name, red.value_maps[var][r])
                    })
                );
            }
            order_line(&mut out, &nec.group);
            if is_non_equicardinal(&nec, model) {
                let _ = writeln!(out, "taxonomy: non_equicardinal");
            } else {
                let phis: Vec<VvPermutation> = nec.generators().into_iter().map(|t| t.reduced_vv).collect();
                taxonomy_lines(
                    &mut out,
                    classify_taxonomy(&phis, &red.model, DEFAULT_RENAMING_CAP, DEFAULT_TAXONOMY_GROUP_CAP),
                    &red.model,
                );
            }
        }
    }
    let _ = writeln!(out, "time_ms: {}", fmt_g(start.elapsed().as_secs_f64() * 1e3));
    Ok(out)
}

/// DIMACS-like dump of the graph the given pipeline searches.
pub fn cmd_dump_graph(model: &GraphicalModel, kind: SymmetryKind) -> Result<String> {
    Ok(match kind {
        SymmetryKind::Variable => build_variable_graph(model)?.to_dimacs(),
        SymmetryKind::Vv => build_vv_graph(model).to_dimacs(),
        SymmetryKind::Nec => {
            crate::autograph::build_vv_graph_with(model, crate::autograph::FeatureColoring::Distinct).to_dimacs()
        }
    })
}

fn write_classes(out: &mut String, model: &GraphicalModel, reduced: &ReducedModel) {
    for (i, v) in model.variables.iter().enumerate() {
        let _ = writeln!(out, "var {} classes {}", v.name, reduced.classes.describe(i));
    }
}

/// Reduced model text and the per-variable class listing.
pub fn cmd_reduce(model: &GraphicalModel, cfg: SearchConfig) -> Result<(String, String)> {
    let nec = nec_symmetries(model, cfg)?;
    let mut classes = String::new();
    write_classes(&mut classes, model, &nec.reduced);
    Ok((write_model(&nec.reduced.model), classes))
}

/// `var,value,probability` rows.
pub fn cmd_exact(model: &GraphicalModel, opts: ExactOptions) -> Result<String> {
    let marginals = exact_marginals(model, opts)?;
    let mut out = String::from("var,value,probability\n");
    for (v, m) in model.variables.iter().zip(&marginals) {
        for (value, p) in m.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", v.name, value, fmt_g(*p));
        }
    }
    Ok(out)
}

/// Snapshot CSV with header `step,wall_ms,var,value,estimate`.
pub fn snapshots_csv(model: &GraphicalModel, snapshots: &[Snapshot]) -> String {
    let mut out = String::from("step,wall_ms,var,value,estimate\n");
    for s in snapshots {
        let wall = fmt_g(s.wall_ms);
        for (v, m) in model.variables.iter().zip(&s.marginals) {
            for (value, p) in m.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", s.step, wall, v.name, value, fmt_g(*p));
            }
        }
    }
    out
}

pub fn cmd_sample(model: &GraphicalModel, cfg: &ChainConfig, search: SearchConfig) -> Result<String> {
    let syms = prepare(model, cfg.algorithm, search, DEFAULT_GROUP_CAP)?;
    let out = run_chain(model, &syms, cfg)?;
    Ok(snapshots_csv(model, &out.snapshots))
}

/// Reference marginals for KL curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truth {
    /// Exact enumeration, hard features at the chain's hard weight.
    Exact,
    /// Marginals of a Gibbs run of this many steps.
    LongGibbs(u64),
}

impl std::str::FromStr for Truth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Truth::Exact);
        }
        s.strip_prefix("long-gibbs:")
            .and_then(|n| n.parse().ok())
            .filter(|&n: &u64| n > 0)
            .map(Truth::LongGibbs)
            .ok_or_else(|| Error::Config(format!("unknown truth '{s}' (exact | long-gibbs:<steps>)")))
    }
}

/// Seed of the long reference Gibbs run.
pub const TRUTH_SEED: u64 = 0x5eed;

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub algorithms: Vec<Algorithm>,
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub snapshot_every: u64,
    pub truth: Truth,
    pub orbit_strategy: OrbitStrategy,
    /// Largest state orbit enumerated under the exact strategy.
    pub orbit_cap: usize,
    pub hard_weight: f64,
    pub burn_in: u64,
    pub timing: bool,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(algorithms: Vec<Algorithm>, steps: u64, seeds: Vec<u64>) -> Self {
        Self {
            algorithms,
            steps,
            seeds,
            snapshot_every: (steps / 100).max(1),
            truth: Truth::Exact,
            orbit_strategy: OrbitStrategy::default(),
            orbit_cap: crate::permgroup::DEFAULT_ORBIT_CAP,
            hard_weight: crate::model::DEFAULT_HARD_WEIGHT,
            burn_in: 0,
            timing: true,
            out_dir: None,
        }
    }

    fn chain_config(&self, algorithm: Algorithm, seed: u64) -> ChainConfig {
        ChainConfig {
            algorithm,
            steps: self.steps,
            seed,
            orbit_strategy: self.orbit_strategy,
            burn_in: self.burn_in,
            hard_weight: self.hard_weight,
            snapshot_every: self.snapshot_every,
            orbit_cap: self.orbit_cap,
            timing: self.timing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms given".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        self.chain_config(self.algorithms[0], 0).validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub step: u64,
    pub wall_ms: f64,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub truth: Marginals,
    pub rows: Vec<KlRow>,
    /// Wall-clock milliseconds spent computing each algorithm's symmetries.
    pub symmetry_ms: Vec<(Algorithm, f64)>,
}

impl RunReport {
    /// First snapshot step with KL at or below `threshold`.
    pub fn steps_to(&self, algorithm: Algorithm, seed: u64, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.seed == seed && r.kl <= threshold)
            .map(|r| r.step)
    }

    /// Median over seeds of [`Self::steps_to`], runs that never reach the
    /// threshold counting as infinite (`None`).
    pub fn median_steps_to(&self, algorithm: Algorithm, seeds: &[u64], threshold: f64) -> Option<u64> {
        let mut v: Vec<u64> = seeds
            .iter()
            .map(|&s| self.steps_to(algorithm, s, threshold).unwrap_or(u64::MAX))
            .collect();
        v.sort_unstable();
        let m = v[v.len() / 2];
        (m != u64::MAX).then_some(m)
    }

    pub fn kl_csv(&self) -> String {
        let mut out = String::from("algo,seed,step,wall_ms,kl\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.algorithm,
                r.seed,
                r.step,
                fmt_g(r.wall_ms),
                fmt_g(r.kl)
            );
        }
        out
    }
}

fn reference_marginals(model: &GraphicalModel, spec: &ExperimentSpec) -> Result<Marginals> {
    match spec.truth {
        Truth::Exact => exact_marginals(model, ExactOptions::soft(spec.hard_weight)),
        Truth::LongGibbs(steps) => {
            let mut cfg = ChainConfig::new(Algorithm::Gibbs, steps, TRUTH_SEED);
            cfg.hard_weight = spec.hard_weight;
            let out = run_chain(model, &Symmetries::None, &cfg)?;
            Ok(out.snapshots.last().expect("one snapshot").marginals.clone())
        }
    }
}

/// Runs every (algorithm, seed) pair in parallel and computes KL curves.
/// With an output directory, writes `<algo>_seed<seed>.csv` per run and
/// `kl.csv`.
pub fn cmd_run(model: &GraphicalModel, spec: &ExperimentSpec, search: SearchConfig) -> Result<RunReport> {
    spec.validate()?;
    let truth = reference_marginals(model, spec)?;
    let mut prepared = Vec::with_capacity(spec.algorithms.len());
    let mut symmetry_ms = Vec::new();
    for &a in &spec.algorithms {
        let start = Instant::now();
        prepared.push((a, prepare(model, a, search, DEFAULT_GROUP_CAP)?));
        symmetry_ms.push((a, start.elapsed().as_secs_f64() * 1e3));
    }
    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|k| spec.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let outputs: Vec<(Algorithm, u64, ChainOutput)> = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let (a, syms) = &prepared[k];
            run_chain(model, syms, &spec.chain_config(*a, seed)).map(|o| (*a, seed, o))
        })
        .collect::<Result<_>>()?;
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir)?;
        for (a, seed, out) in &outputs {
            fs::write(
                dir.join(format!("{a}_seed{seed}.csv")),
                snapshots_csv(model, &out.snapshots),
            )?;
        }
    }
    let rows = outputs
        .iter()
        .flat_map(|(a, seed, out)| {
            out.snapshots.iter().map(|s| KlRow {
                algorithm: *a,
                seed: *seed,
                step: s.step,
                wall_ms: s.wall_ms,
                kl: kl_divergence(&truth, &s.marginals),
            })
        })
        .collect();
    let report = RunReport {
        truth,
        rows,
        symmetry_ms,
    };
    if let Some(dir) = &spec.out_dir {
        fs::write(dir.join("kl.csv"), report.kl_csv())?;
    }
    Ok(report)
}

pub fn cmd_binarize(model: &GraphicalModel) -> String {
    write_model(&crate::domains::binarize(model).model)
}

pub fn read_model(path: &Path) -> Result<GraphicalModel> {
    let text = fs::read_to_string(path)?;
    let model = crate::model::parse_model(&text)?;
    model.validate()?;
    Ok(model)
}

/// Writes to `path`, or returns the text for stdout.
pub fn emit(text: &str, path: Option<&Path>) -> Result<Option<String>> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
            Ok(None)
        }
        None => Ok(Some(text.to_string())),
    }
}
