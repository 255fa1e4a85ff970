//! Variable-value permutations acting on states and models, symmetry checks
//! and a brute-force taxonomy classifier for small domains.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{exact_distribution, ExactOptions, GraphicalModel, Literal, State, StateSpace, VarId};
use crate::permgroup::{orbit_by_bfs, GeneratorSet, Permutation};

/// Dense encoding of the VV set: pair `(i, v)` has index `offset_i + v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VvSet {
    offsets: Vec<usize>,
    cards: Vec<usize>,
}

impl VvSet {
    pub fn new(cards: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(cards.len() + 1);
        let mut acc = 0;
        for &c in &cards {
            offsets.push(acc);
            acc += c;
        }
        offsets.push(acc);
        Self { offsets, cards }
    }

    pub fn of(model: &GraphicalModel) -> Self {
        Self::new(model.cardinalities())
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn card(&self, var: VarId) -> usize {
        self.cards[var]
    }

    #[inline]
    pub fn index(&self, var: VarId, value: usize) -> usize {
        self.offsets[var] + value
    }

    #[inline]
    pub fn pair(&self, index: usize) -> (VarId, usize) {
        let var = self.offsets.partition_point(|&o| o <= index) - 1;
        (var, index - self.offsets[var])
    }

    /// `name.value` label used in cycle notation.
    pub fn label(&self, model: &GraphicalModel, index: usize) -> String {
        let (var, value) = self.pair(index);
        format!("{}.{}", model.variables[var].name, value)
    }
}

/// A bijection on the VV set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VvPermutation {
    set: VvSet,
    perm: Permutation,
}

impl VvPermutation {
    pub fn new(set: VvSet, perm: Permutation) -> Self {
        assert_eq!(set.len(), perm.len(), "permutation does not match the VV set");
        Self { set, perm }
    }

    pub fn identity(set: VvSet) -> Self {
        let perm = Permutation::identity(set.len());
        Self { set, perm }
    }

    /// Builds `φ` from an explicit map `(var, value) -> (var, value)`.
    pub fn from_pairs(set: VvSet, map: impl Fn(VarId, usize) -> (VarId, usize)) -> Result<Self> {
        let mut image = Vec::with_capacity(set.len());
        for idx in 0..set.len() {
            let (var, value) = set.pair(idx);
            let (j, w) = map(var, value);
            if j >= set.num_vars() || w >= set.card(j) {
                return Err(Error::InvalidPermutation(format!(
                    "({var},{value}) maps outside the VV set"
                )));
            }
            image.push(set.index(j, w));
        }
        let perm = Permutation::from_vec(image)?;
        Ok(Self { set, perm })
    }

    pub fn set(&self) -> &VvSet {
        &self.set
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn into_permutation(self) -> Permutation {
        self.perm
    }

    #[inline]
    pub fn apply_pair(&self, var: VarId, value: usize) -> (VarId, usize) {
        self.set.pair(self.perm.apply(self.set.index(var, value)))
    }

    /// Induced variable map, if every variable's values land on a single
    /// variable and that map is a bijection.
    pub fn var_image(&self) -> Option<Vec<VarId>> {
        let n = self.set.num_vars();
        let mut image = Vec::with_capacity(n);
        let mut hit = vec![false; n];
        for var in 0..n {
            let (j, _) = self.apply_pair(var, 0);
            if (1..self.set.card(var)).any(|v| self.apply_pair(var, v).0 != j) || hit[j] {
                return None;
            }
            hit[j] = true;
            image.push(j);
        }
        Some(image)
    }

    pub fn is_valid(&self) -> bool {
        self.var_image().is_some()
    }

    pub fn inverse(&self) -> Self {
        Self {
            set: self.set.clone(),
            perm: self.perm.inverse(),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            set: self.set.clone(),
            perm: self.perm.compose(&other.perm)?,
        })
    }

    pub fn apply_to_state(&self, state: &[usize]) -> Result<State> {
        if !self.is_valid() {
            return Err(Error::InvalidPermutation(
                "values of one variable map to several variables".into(),
            ));
        }
        let mut out = vec![0; state.len()];
        self.apply_to_state_into(state, &mut out);
        Ok(out)
    }

    /// Unchecked state action; `self` must be valid.
    #[inline]
    pub fn apply_to_state_into(&self, state: &[usize], out: &mut [usize]) {
        for (var, &value) in state.iter().enumerate() {
            let (j, w) = self.apply_pair(var, value);
            out[j] = w;
        }
    }

    pub fn to_cycle_string(&self, model: &GraphicalModel) -> String {
        self.perm.to_cycle_string(|i| self.set.label(model, i))
    }
}

pub fn is_valid_vv(phi: &VvPermutation) -> bool {
    phi.is_valid()
}

pub fn apply_vv_to_state(phi: &VvPermutation, state: &[usize]) -> Result<State> {
    phi.apply_to_state(state)
}

/// Rewrites every literal through `φ` and returns the canonical form.
pub fn apply_vv_to_model(phi: &VvPermutation, model: &GraphicalModel) -> Result<GraphicalModel> {
    if !phi.is_valid() {
        return Err(Error::InvalidPermutation(
            "values of one variable map to several variables".into(),
        ));
    }
    if phi.set() != &VvSet::of(model) {
        return Err(Error::SizeMismatch(phi.set().len(), VvSet::of(model).len()));
    }
    let mut out = GraphicalModel::new(model.kind);
    out.variables = model.variables.clone();
    for f in &model.features {
        let lits = f
            .literals
            .iter()
            .map(|l| {
                let (var, value) = phi.apply_pair(l.var, l.value);
                Literal {
                    var,
                    value,
                    positive: l.positive,
                }
            })
            .collect();
        out.add_feature(lits, f.weight);
    }
    Ok(out.canonical())
}

pub fn is_vv_symmetry(phi: &VvPermutation, model: &GraphicalModel) -> Result<bool> {
    Ok(apply_vv_to_model(phi, model)?.canonically_equal(model))
}

/// `φ(X_i, v) = (θ(X_i), v)`.
pub fn embed_variable_symmetry(theta: &Permutation, model: &GraphicalModel) -> Result<VvPermutation> {
    if theta.len() != model.num_vars() {
        return Err(Error::SizeMismatch(theta.len(), model.num_vars()));
    }
    for var in 0..model.num_vars() {
        let j = theta.apply(var);
        if model.variables[var].cardinality != model.variables[j].cardinality {
            return Err(Error::DomainMismatch(format!(
                "'{}' and '{}' have different cardinalities",
                model.variables[var].name, model.variables[j].name
            )));
        }
    }
    VvPermutation::from_pairs(VvSet::of(model), |var, v| (theta.apply(var), v))
}

/// `true` iff `φ` maps every pair `(i, v)` to some `(j, v)`: the structural
/// form of a count symmetry over the full state space, where variables with
/// equal cardinality form one domain class.
pub fn preserves_values(phi: &VvPermutation) -> bool {
    (0..phi.set().len()).all(|idx| phi.set().pair(idx).1 == phi.set().pair(phi.permutation().apply(idx)).1)
}

/// For every state `s`, each cardinality class and value `v`, the number of
/// class variables taking `v` agrees between `s` and `φ(s)`.
pub fn is_count_symmetry(phi: &VvPermutation, model: &GraphicalModel, cap: u128) -> Result<bool> {
    let space = StateSpace::of(model, cap)?;
    let cards = model.cardinalities();
    let mut classes: Vec<usize> = cards.clone();
    classes.sort_unstable();
    classes.dedup();
    let class_of: Vec<usize> = cards.iter().map(|c| classes.binary_search(c).unwrap()).collect();
    let max_card = classes.last().copied().unwrap_or(0);
    let mut image = vec![0; model.num_vars()];
    let mut before = vec![0i64; classes.len() * max_card];
    for state in space.states() {
        phi.apply_to_state(&state)?;
        phi.apply_to_state_into(&state, &mut image);
        before.iter_mut().for_each(|c| *c = 0);
        for var in 0..state.len() {
            before[class_of[var] * max_card + state[var]] += 1;
            before[class_of[var] * max_card + image[var]] -= 1;
        }
        if before.iter().any(|&c| c != 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-variable value bijection; `maps[i][v]` is the new name of value `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Renaming {
    pub maps: Vec<Vec<usize>>,
}

impl Renaming {
    pub fn identity(cards: &[usize]) -> Self {
        Self {
            maps: cards.iter().map(|&c| (0..c).collect()).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.maps.iter().all(|m| m.iter().enumerate().all(|(v, &w)| v == w))
    }

    /// `ρ ∘ φ ∘ ρ⁻¹`: `φ` expressed over the renamed values.
    pub fn conjugate(&self, phi: &VvPermutation) -> VvPermutation {
        let inv: Vec<Vec<usize>> = self
            .maps
            .iter()
            .map(|m| {
                let mut inv = vec![0; m.len()];
                for (v, &w) in m.iter().enumerate() {
                    inv[w] = v;
                }
                inv
            })
            .collect();
        VvPermutation::from_pairs(phi.set().clone(), |var, w| {
            let (j, u) = phi.apply_pair(var, inv[var][w]);
            (j, self.maps[j][u])
        })
        .expect("conjugate of a bijection is a bijection")
    }

    /// Lists the renamed values, e.g. `b.0->1 b.1->0`.
    pub fn describe(&self, model: &GraphicalModel) -> String {
        let mut parts = Vec::new();
        for (var, m) in self.maps.iter().enumerate() {
            for (v, &w) in m.iter().enumerate() {
                if v != w {
                    parts.push(format!("{}.{}->{}", model.variables[var].name, v, w));
                }
            }
        }
        if parts.is_empty() {
            "identity".into()
        } else {
            parts.join(" ")
        }
    }
}

/// Default bound on the number of candidate renamings.
pub const DEFAULT_RENAMING_CAP: u128 = 1_000_000;

/// Default bound on group elements enumerated by the classifier.
pub const DEFAULT_TAXONOMY_GROUP_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaxonomyLabel {
    Count,
    SrvCount(Renaming),
    UrvCount,
    EquicardinalNoncount,
    NonEquicardinal,
}

impl TaxonomyLabel {
    pub fn name(&self) -> &'static str {
        match self {
            TaxonomyLabel::Count => "count",
            TaxonomyLabel::SrvCount(_) => "srv_count",
            TaxonomyLabel::UrvCount => "urv_count",
            TaxonomyLabel::EquicardinalNoncount => "equicardinal_noncount",
            TaxonomyLabel::NonEquicardinal => "non_equicardinal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub generators: Vec<TaxonomyLabel>,
    pub group: TaxonomyLabel,
}

fn permutations_of(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Every per-variable renaming, lexicographic with the last variable
/// varying fastest.
pub fn renamings(cards: &[usize], cap: u128) -> Result<Vec<Renaming>> {
    let size = cards.iter().try_fold(1u128, |acc, &c| {
        let f = (1..=c as u128).product::<u128>();
        acc.checked_mul(f).filter(|&s| s <= cap)
    });
    let Some(size) = size else {
        let total = cards
            .iter()
            .map(|&c| (1..=c as u128).product::<u128>())
            .fold(1u128, |a, f| a.saturating_mul(f));
        return Err(Error::RenamingSpaceTooLarge { size: total, cap });
    };
    let per_var: Vec<Vec<Vec<usize>>> = cards.iter().map(|&c| permutations_of(c)).collect();
    let mut out = Vec::with_capacity(size as usize);
    let mut digits = vec![0usize; cards.len()];
    loop {
        out.push(Renaming {
            maps: digits.iter().enumerate().map(|(i, &d)| per_var[i][d].clone()).collect(),
        });
        let mut pos = cards.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < per_var[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn first_count_renaming<'r>(phis: &[VvPermutation], candidates: &'r [Renaming]) -> Option<&'r Renaming> {
    candidates
        .iter()
        .find(|r| phis.iter().all(|p| preserves_values(&r.conjugate(p))))
}

/// Classifies a group of equicardinal VV symmetries.
///
/// Per generator: `count`, `srv_count` with the first renaming that makes it
/// a count symmetry, or `equicardinal_noncount`. For the group: `count` if
/// every generator is a count symmetry; `srv_count` if one renaming works
/// for all generators; `urv_count` if the elements that are count symmetries
/// under some renaming generate a subgroup with the same state orbits;
/// otherwise `equicardinal_noncount`.
pub fn classify_taxonomy(
    gens: &[VvPermutation],
    model: &GraphicalModel,
    renaming_cap: u128,
    group_cap: usize,
) -> Result<Taxonomy> {
    let set = VvSet::of(model);
    let cards = model.cardinalities();
    if gens.iter().any(|g| g.set() != &set) {
        return Err(Error::SizeMismatch(
            gens.first().map_or(0, |g| g.set().len()),
            set.len(),
        ));
    }
    for g in gens {
        if !g.is_valid() {
            return Err(Error::InvalidPermutation(g.to_cycle_string(model)));
        }
    }
    if gens.iter().all(preserves_values) {
        return Ok(Taxonomy {
            generators: vec![TaxonomyLabel::Count; gens.len()],
            group: TaxonomyLabel::Count,
        });
    }
    let candidates = renamings(&cards, renaming_cap)?;
    let per_gen: Vec<TaxonomyLabel> = gens
        .iter()
        .map(|g| {
            if preserves_values(g) {
                TaxonomyLabel::Count
            } else {
                match first_count_renaming(std::slice::from_ref(g), &candidates) {
                    Some(r) => TaxonomyLabel::SrvCount(r.clone()),
                    None => TaxonomyLabel::EquicardinalNoncount,
                }
            }
        })
        .collect();

    let group = if let Some(r) = first_count_renaming(gens, &candidates) {
        TaxonomyLabel::SrvCount(r.clone())
    } else {
        let full = GeneratorSet::new(set.len(), gens.iter().map(|g| g.permutation().clone()).collect())?;
        let mut sub = GeneratorSet::trivial(set.len());
        for p in full.closure(group_cap)? {
            let phi = VvPermutation::new(set.clone(), p);
            if first_count_renaming(std::slice::from_ref(&phi), &candidates).is_some() {
                sub.push(phi.into_permutation())?;
            }
        }
        let sub_gens: Vec<VvPermutation> = sub
            .generators()
            .iter()
            .map(|p| VvPermutation::new(set.clone(), p.clone()))
            .collect();
        let space = StateSpace::new(cards.clone(), crate::model::DEFAULT_STATE_CAP)?;
        if state_orbits(gens, &space)? == state_orbits(&sub_gens, &space)? {
            TaxonomyLabel::UrvCount
        } else {
            TaxonomyLabel::EquicardinalNoncount
        }
    };
    Ok(Taxonomy {
        generators: per_gen,
        group,
    })
}

/// Orbit of `state` under the group generated by `gens`, sorted.
pub fn state_orbit(gens: &[VvPermutation], state: &[usize], cap: usize) -> Result<Vec<State>> {
    for g in gens {
        if !g.is_valid() {
            return Err(Error::InvalidPermutation("invalid VV permutation".into()));
        }
    }
    orbit_by_bfs(state.to_vec(), cap, |s: &State, out: &mut Vec<State>| {
        for g in gens {
            let mut t = vec![0; s.len()];
            g.apply_to_state_into(s, &mut t);
            out.push(t);
        }
    })
}

/// Partition of all states of `space` into orbits, as state indices. Each
/// orbit is sorted and orbits are ordered by their smallest member.
pub fn state_orbits(gens: &[VvPermutation], space: &StateSpace) -> Result<Vec<Vec<usize>>> {
    for g in gens {
        if !g.is_valid() {
            return Err(Error::InvalidPermutation("invalid VV permutation".into()));
        }
    }
    let n = space.size();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut state = vec![0; space.cards().len()];
    let mut image = vec![0; space.cards().len()];
    for idx in 0..n {
        space.decode_into(idx, &mut state);
        for g in gens {
            g.apply_to_state_into(&state, &mut image);
            let (a, b) = (find(&mut parent, idx), find(&mut parent, space.encode(&image)));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for idx in 0..n {
        let r = find(&mut parent, idx);
        groups.entry(r).or_default().push(idx);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|o| o[0]);
    Ok(out)
}

/// States grouped by exact probability (buckets of width 1e-12), as state
/// indices; classes sorted internally and by smallest member.
pub fn equal_probability_partition(model: &GraphicalModel, opts: ExactOptions) -> Result<Vec<Vec<usize>>> {
    let dist = exact_distribution(model, opts)?;
    let mut order: Vec<usize> = (0..dist.probs.len()).collect();
    order.sort_by(|&a, &b| dist.probs[a].total_cmp(&dist.probs[b]).then(a.cmp(&b)));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for idx in order {
        let p = dist.probs[idx];
        match classes.last_mut() {
            Some(c) if p - last < 1e-12 => c.push(idx),
            _ => classes.push(vec![idx]),
        }
        last = p;
    }
    for c in &mut classes {
        c.sort_unstable();
    }
    classes.sort_by_key(|c| c[0]);
    Ok(classes)
}
