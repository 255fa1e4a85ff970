//! Random-scan Gibbs sampling and orbital samplers that follow each Gibbs
//! step with a move inside the current state's symmetry orbit.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograph::{variable_symmetries, vv_symmetries, SearchConfig};
use crate::domains::{binarize, BinaryEncoding};
use crate::error::{Error, Result};
use crate::model::{GraphicalModel, Marginals, State, StateSpace, DEFAULT_HARD_WEIGHT};
use crate::permgroup::{orbit_by_bfs, GeneratorSet, Permutation, PraSampler, DEFAULT_ORBIT_CAP};
use crate::reduction::{nec_symmetries, ReducedModel};
use crate::symmetry::{embed_variable_symmetry, is_vv_symmetry, state_orbits, VvPermutation, VvSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Gibbs,
    Orbital,
    VvOrbital,
    NecOrbital,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Gibbs,
        Algorithm::Orbital,
        Algorithm::VvOrbital,
        Algorithm::NecOrbital,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gibbs => "gibbs",
            Algorithm::Orbital => "orbital",
            Algorithm::VvOrbital => "vv-orbital",
            Algorithm::NecOrbital => "nec-orbital",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// How the orbital move draws a symmetric state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrbitStrategy {
    /// Uniform element of the enumerated group, or of the state's orbit
    /// found by breadth-first search; product replacement for a step whose
    /// orbit exceeds the cap.
    #[default]
    ExactBfs,
    /// Product replacement for every step.
    Pra,
}

impl FromStr for OrbitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-bfs" => Ok(OrbitStrategy::ExactBfs),
            "pra" => Ok(OrbitStrategy::Pra),
            _ => Err(Error::Config(format!("unknown orbit strategy '{s}'"))),
        }
    }
}

/// Largest group enumerated up front for exact uniform draws.
pub const DEFAULT_GROUP_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub algorithm: Algorithm,
    pub steps: u64,
    pub seed: u64,
    pub orbit_strategy: OrbitStrategy,
    /// Steps run before tallies start.
    pub burn_in: u64,
    /// Log weight of a satisfied hard feature.
    pub hard_weight: f64,
    pub snapshot_every: u64,
    pub orbit_cap: usize,
    /// Record wall-clock time in snapshots (otherwise 0).
    pub timing: bool,
}

impl ChainConfig {
    pub fn new(algorithm: Algorithm, steps: u64, seed: u64) -> Self {
        Self {
            algorithm,
            steps,
            seed,
            orbit_strategy: OrbitStrategy::default(),
            burn_in: 0,
            hard_weight: DEFAULT_HARD_WEIGHT,
            snapshot_every: steps.max(1),
            orbit_cap: DEFAULT_ORBIT_CAP,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        if self.burn_in >= self.steps {
            return Err(Error::Config("burn-in must be shorter than the run".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        if !self.hard_weight.is_finite() {
            return Err(Error::Config("hard weight must be finite".into()));
        }
        Ok(())
    }
}

/// A symmetry group acting on the VV set of some model.
#[derive(Debug, Clone)]
pub struct OrbitGroup {
    set: VvSet,
    gens: GeneratorSet,
    elements: Option<Vec<Permutation>>,
}

impl OrbitGroup {
    /// Enumerates the group when it has at most `group_cap` elements.
    pub fn new(set: VvSet, gens: GeneratorSet, group_cap: usize) -> Self {
        let elements = gens.closure(group_cap).ok();
        Self { set, gens, elements }
    }

    pub fn trivial(set: VvSet) -> Self {
        let gens = GeneratorSet::trivial(set.len());
        Self::new(set, gens, 1)
    }

    pub fn set(&self) -> &VvSet {
        &self.set
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    pub fn is_trivial(&self) -> bool {
        self.gens.is_trivial()
    }

    pub fn order(&self) -> Option<usize> {
        self.elements.as_ref().map(Vec::len)
    }

    pub fn vv_generators(&self) -> Vec<VvPermutation> {
        self.gens
            .generators()
            .iter()
            .map(|p| VvPermutation::new(self.set.clone(), p.clone()))
            .collect()
    }

    fn apply(&self, p: &Permutation, state: &[usize], out: &mut [usize]) {
        for (var, &value) in state.iter().enumerate() {
            let (j, w) = self.set.pair(p.apply(self.set.index(var, value)));
            out[j] = w;
        }
    }

    /// Sorted orbit of `state`.
    pub fn state_orbit(&self, state: &[usize], cap: usize) -> Result<Vec<State>> {
        orbit_by_bfs(state.to_vec(), cap, |s: &State, out: &mut Vec<State>| {
            for g in self.gens.generators() {
                let mut t = vec![0; s.len()];
                self.apply(g, s, &mut t);
                out.push(t);
            }
        })
    }
}

/// Symmetries a chain uses, prepared once per model and algorithm.
#[derive(Debug, Clone)]
pub enum Symmetries {
    None,
    Orbit(OrbitGroup),
    Nec { reduced: ReducedModel, group: OrbitGroup },
}

/// Variable symmetries as VV permutations. Models with non-Boolean
/// variables are binarized first (one Boolean per value plus hard
/// exactly-one clauses) and the variable symmetries of the binarized model
/// are read back as VV permutations; any that do not map value groups onto
/// value groups are dropped.
pub fn orbital_generators(model: &GraphicalModel, cfg: SearchConfig) -> Result<GeneratorSet> {
    let set = VvSet::of(model);
    let mut out = GeneratorSet::trivial(set.len());
    if model.is_boolean() {
        for theta in variable_symmetries(model, cfg)?.generators() {
            out.push(embed_variable_symmetry(theta, model)?.into_permutation())?;
        }
        return Ok(out);
    }
    let bin = binarize(model);
    let mut owner = vec![(usize::MAX, 0usize); bin.model.num_vars()];
    for (var, enc) in bin.encoding.iter().enumerate() {
        match enc {
            BinaryEncoding::Same(b) => owner[*b] = (var, usize::MAX),
            BinaryEncoding::OneHot(bits) => {
                for (v, &b) in bits.iter().enumerate() {
                    owner[b] = (var, v);
                }
            }
        }
    }
    'gens: for theta in variable_symmetries(&bin.model, cfg)?.generators() {
        let mut image = vec![0; set.len()];
        for (var, enc) in bin.encoding.iter().enumerate() {
            match enc {
                BinaryEncoding::Same(b) => {
                    let (j, tag) = owner[theta.apply(*b)];
                    if tag != usize::MAX {
                        continue 'gens;
                    }
                    for v in 0..2 {
                        image[set.index(var, v)] = set.index(j, v);
                    }
                }
                BinaryEncoding::OneHot(bits) => {
                    let (j, _) = owner[theta.apply(bits[0])];
                    for (v, &b) in bits.iter().enumerate() {
                        let (jj, w) = owner[theta.apply(b)];
                        if jj != j || w == usize::MAX || set.card(j) != bits.len() {
                            continue 'gens;
                        }
                        image[set.index(var, v)] = set.index(j, w);
                    }
                }
            }
        }
        let Ok(perm) = Permutation::from_vec(image) else {
            continue;
        };
        let phi = VvPermutation::new(set.clone(), perm);
        if phi.is_valid() && is_vv_symmetry(&phi, model)? {
            out.push(phi.into_permutation())?;
        }
    }
    Ok(out)
}

/// Computes the symmetries `algorithm` needs.
pub fn prepare(
    model: &GraphicalModel,
    algorithm: Algorithm,
    cfg: SearchConfig,
    group_cap: usize,
) -> Result<Symmetries> {
    let set = VvSet::of(model);
    Ok(match algorithm {
        Algorithm::Gibbs => Symmetries::None,
        Algorithm::Orbital => Symmetries::Orbit(OrbitGroup::new(set, orbital_generators(model, cfg)?, group_cap)),
        Algorithm::VvOrbital => Symmetries::Orbit(OrbitGroup::new(set, vv_symmetries(model, cfg)?, group_cap)),
        Algorithm::NecOrbital => {
            let nec = nec_symmetries(model, cfg)?;
            let group = OrbitGroup::new(VvSet::of(&nec.reduced.model), nec.group, group_cap);
            Symmetries::Nec {
                reduced: nec.reduced,
                group,
            }
        }
    })
}

/// Full conditionals of single variables.
#[derive(Debug, Clone)]
pub struct Gibbs<'m> {
    model: &'m GraphicalModel,
    var_features: Vec<Vec<usize>>,
    hard_weight: f64,
}

impl<'m> Gibbs<'m> {
    pub fn new(model: &'m GraphicalModel, hard_weight: f64) -> Self {
        Self {
            model,
            var_features: model.var_features(),
            hard_weight,
        }
    }

    /// `P(X_var = v | rest)` for every value `v`.
    pub fn conditional(&self, state: &mut [usize], var: usize) -> Vec<f64> {
        let old = state[var];
        let card = self.model.variables[var].cardinality;
        let mut lw = Vec::with_capacity(card);
        for v in 0..card {
            state[var] = v;
            lw.push(
                self.var_features[var]
                    .iter()
                    .map(|&j| &self.model.features[j])
                    .filter(|f| f.evaluate(self.model.kind, state))
                    .map(|f| f.weight.value(self.hard_weight))
                    .sum::<f64>(),
            );
        }
        state[var] = old;
        let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = lw.iter().map(|&x| (x - max).exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        p
    }

    /// Resamples one uniformly chosen variable from its full conditional.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut [usize], rng: &mut R) {
        if state.is_empty() {
            return;
        }
        let var = rng.gen_range(0..state.len());
        let p = self.conditional(state, var);
        let mut r = rng.gen::<f64>();
        let mut value = p.len() - 1;
        for (v, &pv) in p.iter().enumerate() {
            if r < pv {
                value = v;
                break;
            }
            r -= pv;
        }
        state[var] = value;
    }
}

pub fn gibbs_step<R: Rng + ?Sized>(model: &GraphicalModel, state: &mut [usize], rng: &mut R, hard_weight: f64) {
    Gibbs::new(model, hard_weight).step(state, rng);
}

/// Per-chain source of orbit moves.
#[derive(Debug, Clone, Default)]
pub struct OrbitMover {
    strategy: OrbitStrategy,
    pra: Option<PraSampler>,
    /// Steps that used product replacement under the exact strategy.
    pub pra_fallbacks: u64,
    /// Set once a state orbit exceeds the cap; later steps skip enumeration.
    overflowed: bool,
}

impl OrbitMover {
    pub fn new<R: Rng + ?Sized>(group: &OrbitGroup, strategy: OrbitStrategy, rng: &mut R) -> Self {
        let pra =
            (strategy == OrbitStrategy::Pra && !group.is_trivial()).then(|| PraSampler::new(group.generators(), rng));
        Self {
            strategy,
            pra,
            pra_fallbacks: 0,
            overflowed: false,
        }
    }

    fn pra_element<R: Rng + ?Sized>(&mut self, group: &OrbitGroup, rng: &mut R) -> Permutation {
        self.pra
            .get_or_insert_with(|| PraSampler::new(group.generators(), rng))
            .next(rng)
    }

    /// Replaces `state` with a draw from its orbit. Trivial groups consume no
    /// randomness. Under the exact strategy, once some state orbit exceeds
    /// `cap` the rest of the chain draws group elements by product replacement.
    pub fn apply<R: Rng + ?Sized>(&mut self, group: &OrbitGroup, state: &mut [usize], rng: &mut R, cap: usize) {
        if group.is_trivial() {
            return;
        }
        let mut out = vec![0; state.len()];
        match (self.strategy, &group.elements) {
            (OrbitStrategy::Pra, _) => {
                let g = self.pra_element(group, rng);
                group.apply(&g, state, &mut out);
            }
            (OrbitStrategy::ExactBfs, Some(elements)) => {
                let g = &elements[rng.gen_range(0..elements.len())];
                group.apply(g, state, &mut out);
            }
            (OrbitStrategy::ExactBfs, None) => {
                let orbit = if self.overflowed {
                    None
                } else {
                    group.state_orbit(state, cap).ok()
                };
                match orbit {
                    Some(orbit) => {
                        let k = if orbit.len() == 1 {
                            0
                        } else {
                            rng.gen_range(0..orbit.len())
                        };
                        out.copy_from_slice(&orbit[k]);
                    }
                    None => {
                        self.overflowed = true;
                        self.pra_fallbacks += 1;
                        let g = self.pra_element(group, rng);
                        group.apply(&g, state, &mut out);
                    }
                }
            }
        }
        state.copy_from_slice(&out);
    }
}

/// Gibbs step followed by a move to a (near-)uniform member of the state's
/// orbit.
pub fn orbital_step<R: Rng + ?Sized>(
    gibbs: &Gibbs<'_>,
    group: &OrbitGroup,
    mover: &mut OrbitMover,
    state: &mut [usize],
    rng: &mut R,
    orbit_cap: usize,
) {
    gibbs.step(state, rng);
    let before = gibbs.model.log_weight_with(state, gibbs.hard_weight);
    mover.apply(group, state, rng, orbit_cap);
    debug_assert!((gibbs.model.log_weight_with(state, gibbs.hard_weight) - before).abs() < 1e-9);
}

/// The Metropolis–Hastings part of an NEC step, in reduced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MhOutcome {
    pub current: State,
    pub proposed: State,
    /// `min(1, c(u'') / c(u'))`.
    pub acceptance: f64,
    pub accepted: bool,
}

fn reduced_suborbit(reduced: &ReducedModel, u: &[usize]) -> f64 {
    u.iter()
        .enumerate()
        .map(|(i, &r)| reduced.classes.classes(i)[r].len() as f64)
        .product()
}

/// Proposes `u''` from the reduced orbit of `u'` and accepts with
/// probability `min(1, c(u'')/c(u'))`.
pub fn nec_mh_move<R: Rng + ?Sized>(
    reduced: &ReducedModel,
    group: &OrbitGroup,
    mover: &mut OrbitMover,
    current: &[usize],
    rng: &mut R,
    orbit_cap: usize,
) -> MhOutcome {
    let mut proposed = current.to_vec();
    mover.apply(group, &mut proposed, rng, orbit_cap);
    let acceptance = (reduced_suborbit(reduced, &proposed) / reduced_suborbit(reduced, current)).min(1.0);
    let accepted = acceptance >= 1.0 || rng.gen::<f64>() < acceptance;
    MhOutcome {
        current: current.to_vec(),
        proposed,
        acceptance,
        accepted,
    }
}

/// Gibbs step, MH move between representatives, then a uniform member of
/// the winning representative's suborbit.
#[allow(clippy::too_many_arguments)]
pub fn nec_orbital_step<R: Rng + ?Sized>(
    gibbs: &Gibbs<'_>,
    reduced: &ReducedModel,
    group: &OrbitGroup,
    mover: &mut OrbitMover,
    state: &mut [usize],
    rng: &mut R,
    orbit_cap: usize,
) -> MhOutcome {
    gibbs.step(state, rng);
    let before = gibbs.model.log_weight_with(state, gibbs.hard_weight);
    let u = reduced.reduce_state(state);
    let outcome = nec_mh_move(reduced, group, mover, &u, rng, orbit_cap);
    let winner = if outcome.accepted {
        &outcome.proposed
    } else {
        &outcome.current
    };
    for (i, &r) in winner.iter().enumerate() {
        let class = &reduced.classes.classes(i)[r];
        state[i] = if class.len() == 1 {
            class[0]
        } else {
            class[rng.gen_range(0..class.len())]
        };
    }
    debug_assert!((gibbs.model.log_weight_with(state, gibbs.hard_weight) - before).abs() < 1e-9);
    outcome
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub wall_ms: f64,
    pub marginals: Marginals,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainStats {
    pub proposals: u64,
    pub accepted: u64,
    pub pra_fallbacks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
    pub stats: ChainStats,
}

fn check_symmetries(algorithm: Algorithm, syms: &Symmetries) -> Result<()> {
    let ok = matches!(
        (algorithm, syms),
        (Algorithm::Gibbs, _)
            | (Algorithm::Orbital | Algorithm::VvOrbital, Symmetries::Orbit(_))
            | (Algorithm::NecOrbital, Symmetries::Nec { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{algorithm} needs matching symmetries")))
    }
}

/// Runs one chain from the all-zero state, emitting marginal estimates
/// every `snapshot_every` steps and after the last step.
pub fn run_chain(model: &GraphicalModel, syms: &Symmetries, cfg: &ChainConfig) -> Result<ChainOutput> {
    cfg.validate()?;
    check_symmetries(cfg.algorithm, syms)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gibbs = Gibbs::new(model, cfg.hard_weight);
    let mut state = vec![0; model.num_vars()];
    let mut mover = match (cfg.algorithm, syms) {
        (Algorithm::Gibbs, _) | (_, Symmetries::None) => OrbitMover::default(),
        (_, Symmetries::Orbit(g)) | (_, Symmetries::Nec { group: g, .. }) => {
            OrbitMover::new(g, cfg.orbit_strategy, &mut rng)
        }
    };
    let mut tallies: Vec<Vec<u64>> = model.variables.iter().map(|v| vec![0; v.cardinality]).collect();
    let mut stats = ChainStats::default();
    let mut snapshots = Vec::new();
    for step in 1..=cfg.steps {
        match (cfg.algorithm, syms) {
            (Algorithm::Orbital | Algorithm::VvOrbital, Symmetries::Orbit(g)) => {
                orbital_step(&gibbs, g, &mut mover, &mut state, &mut rng, cfg.orbit_cap)
            }
            (Algorithm::NecOrbital, Symmetries::Nec { reduced, group }) => {
                let out = nec_orbital_step(&gibbs, reduced, group, &mut mover, &mut state, &mut rng, cfg.orbit_cap);
                if out.proposed != out.current {
                    stats.proposals += 1;
                    stats.accepted += u64::from(out.accepted);
                }
            }
            _ => gibbs.step(&mut state, &mut rng),
        }
        if step <= cfg.burn_in {
            continue;
        }
        for (t, &v) in tallies.iter_mut().zip(&state) {
            t[v] += 1;
        }
        if step % cfg.snapshot_every == 0 || step == cfg.steps {
            let n = (step - cfg.burn_in) as f64;
            snapshots.push(Snapshot {
                step,
                wall_ms: if cfg.timing {
                    start.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                },
                marginals: tallies
                    .iter()
                    .map(|t| t.iter().map(|&c| c as f64 / n).collect())
                    .collect(),
            });
        }
    }
    stats.pra_fallbacks = mover.pra_fallbacks;
    Ok(ChainOutput {
        snapshots,
        final_state: state,
        stats,
    })
}

/// Largest state space for [`explicit_kernel`].
pub const KERNEL_STATE_CAP: u128 = 4096;

/// Row-sparse transition matrix over the states of a [`StateSpace`].
#[derive(Debug, Clone)]
pub struct Kernel {
    pub space: StateSpace,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Kernel {
    /// `‖P·K − P‖_∞`.
    pub fn fixed_point_residual(&self, p: &[f64]) -> f64 {
        let mut pk = vec![0.0; p.len()];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, k) in row {
                pk[t] += p[s] * k;
            }
        }
        pk.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, k)| k).sum()).collect()
    }

    /// Dense entry `K[s][t]`.
    pub fn entry(&self, s: usize, t: usize) -> f64 {
        self.rows[s].iter().filter(|&&(u, _)| u == t).map(|&(_, k)| k).sum()
    }
}

fn merge_row(row: &mut Vec<(usize, f64)>) {
    row.sort_by_key(|&(t, _)| t);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for &(t, k) in row.iter() {
        match out.last_mut() {
            Some((u, acc)) if *u == t => *acc += k,
            _ => out.push((t, k)),
        }
    }
    *row = out;
}

/// Exact one-step transition matrix of the sampler (Gibbs step followed by
/// the ideal orbit move: uniform over the state orbit, or for NEC the MH
/// move with a uniform proposal over the reduced orbit and uniform suborbit
/// sampling).
pub fn explicit_kernel(model: &GraphicalModel, syms: &Symmetries, hard_weight: f64) -> Result<Kernel> {
    let space = StateSpace::of(model, KERNEL_STATE_CAP)?;
    let n = space.size();
    let gibbs = Gibbs::new(model, hard_weight);
    let nv = model.num_vars();

    let mut gibbs_rows = Vec::with_capacity(n);
    let mut state = vec![0; nv];
    for idx in 0..n {
        space.decode_into(idx, &mut state);
        let mut row = Vec::new();
        for var in 0..nv {
            let p = gibbs.conditional(&mut state, var);
            let old = state[var];
            for (v, &pv) in p.iter().enumerate() {
                state[var] = v;
                row.push((space.encode(&state), pv / nv as f64));
            }
            state[var] = old;
        }
        if nv == 0 {
            row.push((idx, 1.0));
        }
        merge_row(&mut row);
        gibbs_rows.push(row);
    }

    let orbit_rows: Option<Vec<Vec<(usize, f64)>>> = match syms {
        Symmetries::None => None,
        Symmetries::Orbit(group) => {
            let orbits = state_orbits(&group.vv_generators(), &space)?;
            let mut rows = vec![Vec::new(); n];
            for o in &orbits {
                let w = 1.0 / o.len() as f64;
                let row: Vec<(usize, f64)> = o.iter().map(|&t| (t, w)).collect();
                for &s in o {
                    rows[s] = row.clone();
                }
            }
            Some(rows)
        }
        Symmetries::Nec { reduced, group } => {
            let red_space = StateSpace::new(reduced.model.cardinalities(), KERNEL_STATE_CAP)?;
            let red_orbits = state_orbits(&group.vv_generators(), &red_space)?;
            let mut orbit_of = vec![0; red_space.size()];
            for (k, o) in red_orbits.iter().enumerate() {
                for &u in o {
                    orbit_of[u] = k;
                }
            }
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); red_space.size()];
            let mut c = vec![0.0; red_space.size()];
            for idx in 0..n {
                space.decode_into(idx, &mut state);
                let u = red_space.encode(&reduced.reduce_state(&state));
                members[u].push(idx);
            }
            for (u, m) in members.iter().enumerate() {
                c[u] = m.len() as f64;
            }
            let mut move_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(red_space.size());
            for u in 0..red_space.size() {
                let orbit = &red_orbits[orbit_of[u]];
                let q = 1.0 / orbit.len() as f64;
                let mut row = Vec::new();
                let mut stay = 0.0;
                for &v in orbit {
                    let a = (c[v] / c[u]).min(1.0);
                    for &t in &members[v] {
                        row.push((t, q * a / c[v]));
                    }
                    stay += q * (1.0 - a);
                }
                for &t in &members[u] {
                    row.push((t, stay / c[u]));
                }
                merge_row(&mut row);
                move_rows.push(row);
            }
            let mut rows = Vec::with_capacity(n);
            for idx in 0..n {
                space.decode_into(idx, &mut state);
                let u = red_space.encode(&reduced.reduce_state(&state));
                rows.push(move_rows[u].clone());
            }
            Some(rows)
        }
    };

    let rows = match orbit_rows {
        None => gibbs_rows,
        Some(orbit_rows) => gibbs_rows
            .iter()
            .map(|g| {
                let mut row = Vec::new();
                for &(mid, p) in g {
                    row.extend(orbit_rows[mid].iter().map(|&(t, q)| (t, p * q)));
                }
                merge_row(&mut row);
                row
            })
            .collect(),
    };
    Ok(Kernel { space, rows })
}
