//! Value-swap symmetries, reduced models over representative values, and
//! non-equicardinal (NEC) symmetries composed from both.

use rand::Rng;

use crate::autograph::{vv_symmetries, vv_symmetries_with, FeatureColoring, SearchConfig};
use crate::error::{Error, Result};
use crate::model::{
    exact_distribution, ExactOptions, FeatureKind, GraphicalModel, Literal, State, StateSpace, VarId, Weight,
};
use crate::permgroup::GeneratorSet;
use crate::symmetry::{is_vv_symmetry, state_orbits, VvPermutation, VvSet};

/// Per-variable partition of the domain into interchangeable values. The
/// representative of a class is its smallest value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueClasses {
    classes: Vec<Vec<Vec<usize>>>,
    class_of: Vec<Vec<usize>>,
}

impl ValueClasses {
    /// Builds classes from explicit partitions; each must cover `0..card`.
    pub fn new(mut classes: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let mut class_of = Vec::with_capacity(classes.len());
        for (var, parts) in classes.iter_mut().enumerate() {
            for c in parts.iter_mut() {
                c.sort_unstable();
            }
            parts.retain(|c| !c.is_empty());
            parts.sort();
            let card: usize = parts.iter().map(Vec::len).sum();
            let mut of = vec![usize::MAX; card];
            for (k, c) in parts.iter().enumerate() {
                for &v in c {
                    if v >= card || of[v] != usize::MAX {
                        return Err(Error::InvalidModel(format!(
                            "value classes of variable {var} do not partition its domain"
                        )));
                    }
                    of[v] = k;
                }
            }
            class_of.push(of);
        }
        Ok(Self { classes, class_of })
    }

    pub fn singletons(cards: &[usize]) -> Self {
        Self::new(cards.iter().map(|&c| (0..c).map(|v| vec![v]).collect()).collect()).expect("singletons partition")
    }

    pub fn num_vars(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self, var: VarId) -> &[Vec<usize>] {
        &self.classes[var]
    }

    /// Index of the class holding `value`; also its value in the reduced
    /// domain.
    #[inline]
    pub fn class_index(&self, var: VarId, value: usize) -> usize {
        self.class_of[var][value]
    }

    #[inline]
    pub fn class_of(&self, var: VarId, value: usize) -> &[usize] {
        &self.classes[var][self.class_of[var][value]]
    }

    #[inline]
    pub fn rep(&self, var: VarId, value: usize) -> usize {
        self.class_of(var, value)[0]
    }

    pub fn is_rep(&self, var: VarId, value: usize) -> bool {
        self.rep(var, value) == value
    }

    pub fn is_trivial(&self) -> bool {
        self.classes.iter().all(|p| p.iter().all(|c| c.len() == 1))
    }

    /// `[[0],[1,2]]`
    pub fn describe(&self, var: VarId) -> String {
        let parts: Vec<String> = self.classes[var]
            .iter()
            .map(|c| {
                let vs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                format!("[{}]", vs.join(","))
            })
            .collect();
        format!("[{}]", parts.join(","))
    }
}

/// Swap of two values of one variable, identity elsewhere.
pub fn value_swap(set: &VvSet, var: VarId, v: usize, w: usize) -> VvPermutation {
    VvPermutation::from_pairs(set.clone(), |i, x| {
        if i != var {
            (i, x)
        } else if x == v {
            (i, w)
        } else if x == w {
            (i, v)
        } else {
            (i, x)
        }
    })
    .expect("a swap is a bijection")
}

/// Value classes from the VV graph with one color per feature, each class
/// confirmed by checking every member's swap with the class representative
/// directly on the model.
pub fn value_swap_classes(model: &GraphicalModel, cfg: SearchConfig) -> Result<ValueClasses> {
    let set = VvSet::of(model);
    let gens = vv_symmetries_with(model, FeatureColoring::Distinct, cfg)?;
    let mut classes = Vec::with_capacity(model.num_vars());
    let orbits = gens.orbits();
    let mut orbit_of = vec![0; set.len()];
    for (k, o) in orbits.iter().enumerate() {
        for &x in o {
            orbit_of[x] = k;
        }
    }
    for var in 0..model.num_vars() {
        let mut parts: Vec<Vec<usize>> = Vec::new();
        for v in 0..set.card(var) {
            let candidate = parts.iter_mut().find(|c| {
                orbit_of[set.index(var, c[0])] == orbit_of[set.index(var, v)]
                    && is_vv_symmetry(&value_swap(&set, var, c[0], v), model).unwrap_or(false)
            });
            match candidate {
                Some(c) => c.push(v),
                None => parts.push(vec![v]),
            }
        }
        classes.push(parts);
    }
    ValueClasses::new(classes)
}

/// Model over one value per class, with the original representatives of
/// each reduced value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub model: GraphicalModel,
    pub classes: ValueClasses,
    /// `value_maps[i][r]` is the original representative of reduced value `r`.
    pub value_maps: Vec<Vec<usize>>,
    /// Log weight of features that are constant on representative states;
    /// affects only the normalizer.
    pub log_constant: f64,
}

impl ReducedModel {
    /// Reduced coordinates of `state`.
    pub fn reduce_state(&self, state: &[usize]) -> State {
        state
            .iter()
            .enumerate()
            .map(|(i, &v)| self.classes.class_index(i, v))
            .collect()
    }

    /// Original representative state of reduced state `u`.
    pub fn expand_state(&self, u: &[usize]) -> State {
        u.iter().enumerate().map(|(i, &r)| self.value_maps[i][r]).collect()
    }
}

/// Rewrites every literal on a non-representative value as false: it
/// drops out of a clause and falsifies a conjunction, while its negation
/// becomes true, satisfying a clause and dropping out of a conjunction.
/// Features that become constant are removed; satisfied soft ones add their
/// weight to `log_constant`.
pub fn reduce_model(model: &GraphicalModel, classes: &ValueClasses) -> Result<ReducedModel> {
    if classes.num_vars() != model.num_vars() {
        return Err(Error::SizeMismatch(classes.num_vars(), model.num_vars()));
    }
    let mut out = GraphicalModel::new(model.kind);
    let mut value_maps = Vec::with_capacity(model.num_vars());
    for (i, var) in model.variables.iter().enumerate() {
        let reps: Vec<usize> = classes.classes(i).iter().map(|c| c[0]).collect();
        if reps.iter().map(|&r| classes.class_of(i, r).len()).sum::<usize>() != var.cardinality {
            return Err(Error::InvalidModel(format!(
                "value classes of '{}' do not cover its domain",
                var.name
            )));
        }
        out.add_variable(var.name.clone(), reps.len());
        value_maps.push(reps);
    }
    let mut log_constant = 0.0;
    for f in &model.features {
        let mut lits = Vec::with_capacity(f.literals.len());
        // Some(true/false) once the feature is decided by a constant literal
        let mut decided = None;
        for l in &f.literals {
            if classes.is_rep(l.var, l.value) {
                lits.push(Literal {
                    value: classes.class_index(l.var, l.value),
                    ..*l
                });
                continue;
            }
            match (model.kind, l.positive) {
                (FeatureKind::Clausal, true) | (FeatureKind::Conjunctive, false) => {}
                (FeatureKind::Clausal, false) => decided = Some(true),
                (FeatureKind::Conjunctive, true) => decided = Some(false),
            }
        }
        let value = match decided {
            Some(v) => Some(v),
            None if lits.is_empty() => Some(model.kind == FeatureKind::Conjunctive),
            None => None,
        };
        match (value, f.weight) {
            (None, w) => out.add_feature(lits, w),
            (Some(true), Weight::Soft(w)) => log_constant += w,
            (Some(true), Weight::Hard) => {}
            (Some(false), Weight::Soft(_)) => {}
            (Some(false), Weight::Hard) => return Err(Error::Infeasible),
        }
    }
    Ok(ReducedModel {
        model: out,
        classes: classes.clone(),
        value_maps,
        log_constant,
    })
}

/// `P_{G^R}(u) / P_G(u)` over representative states `u`, checked constant
/// within 1e-9 (relative).
pub fn k_ratio(model: &GraphicalModel, reduced: &ReducedModel, opts: ExactOptions) -> Result<f64> {
    let full = exact_distribution(model, opts)?;
    let red = exact_distribution(&reduced.model, opts)?;
    let mut k: Option<f64> = None;
    for u in red.space.states() {
        let s = reduced.expand_state(&u);
        let (pr, pg) = (red.probability(&u), full.probability(&s));
        if pr == 0.0 && pg == 0.0 {
            continue;
        }
        if pr == 0.0 || pg == 0.0 {
            return Err(Error::RatioNotConstant(format!(
                "state {s:?} has probability {pg} originally and {pr} reduced"
            )));
        }
        let r = pr / pg;
        match k {
            None => k = Some(r),
            Some(k0) if (r - k0).abs() > 1e-9 * k0.max(1.0) => {
                return Err(Error::RatioNotConstant(format!("ratio {r} at {s:?}, {k0} before")));
            }
            _ => {}
        }
    }
    k.ok_or(Error::Infeasible)
}

/// Each value replaced by its class representative.
pub fn rep_state(state: &[usize], classes: &ValueClasses) -> State {
    state.iter().enumerate().map(|(i, &v)| classes.rep(i, v)).collect()
}

/// `c(s)`: number of states sharing `rep(s)`.
pub fn suborbit_size(state: &[usize], classes: &ValueClasses) -> u128 {
    state
        .iter()
        .enumerate()
        .map(|(i, &v)| classes.class_of(i, v).len() as u128)
        .product()
}

/// `c^i(s)`: size of the class of `s[i]`.
pub fn per_variable_suborbit(state: &[usize], var: VarId, classes: &ValueClasses) -> usize {
    classes.class_of(var, state[var]).len()
}

/// A VV symmetry of the reduced model, acting on original states through
/// representatives and value swaps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NecSymmetry {
    pub reduced_vv: VvPermutation,
}

/// `τ(s)`: maps `rep(s)` through the reduced symmetry, then gives each
/// variable the class member chosen by `pick(var, class)`.
pub fn apply_nec_with(
    tau: &NecSymmetry,
    reduced: &ReducedModel,
    state: &[usize],
    mut pick: impl FnMut(VarId, &[usize]) -> usize,
) -> Result<State> {
    let u = reduced.reduce_state(state);
    let image = tau.reduced_vv.apply_to_state(&u)?;
    Ok(image
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let class = &reduced.classes.classes(i)[r];
            let v = pick(i, class);
            debug_assert!(class.contains(&v));
            v
        })
        .collect())
}

/// `τ(s)` with each value drawn uniformly from its class.
pub fn apply_nec<R: Rng + ?Sized>(
    tau: &NecSymmetry,
    reduced: &ReducedModel,
    state: &[usize],
    rng: &mut R,
) -> Result<State> {
    apply_nec_with(tau, reduced, state, |_, class| {
        if class.len() == 1 {
            class[0]
        } else {
            class[rng.gen_range(0..class.len())]
        }
    })
}

/// Output of the two-pass NEC pipeline.
#[derive(Debug, Clone)]
pub struct NecGroup {
    pub reduced: ReducedModel,
    /// VV symmetries of the reduced model.
    pub group: GeneratorSet,
}

impl NecGroup {
    pub fn generators(&self) -> Vec<NecSymmetry> {
        let set = VvSet::of(&self.reduced.model);
        self.group
            .generators()
            .iter()
            .map(|p| NecSymmetry {
                reduced_vv: VvPermutation::new(set.clone(), p.clone()),
            })
            .collect()
    }

    /// Partition of the original states (as indices of `space`) into NEC
    /// orbits: suborbits of representatives in one reduced orbit.
    pub fn state_orbits(&self, space: &StateSpace) -> Result<Vec<Vec<usize>>> {
        let red_space = StateSpace::new(self.reduced.model.cardinalities(), space.size() as u128)?;
        let gens: Vec<VvPermutation> = self.generators().into_iter().map(|t| t.reduced_vv).collect();
        let red_orbits = state_orbits(&gens, &red_space)?;
        let mut orbit_of = vec![0; red_space.size()];
        for (k, o) in red_orbits.iter().enumerate() {
            for &u in o {
                orbit_of[u] = k;
            }
        }
        let mut out = vec![Vec::new(); red_orbits.len()];
        let mut state = vec![0; space.cards().len()];
        for idx in 0..space.size() {
            space.decode_into(idx, &mut state);
            let u = self.reduced.reduce_state(&state);
            out[orbit_of[red_space.encode(&u)]].push(idx);
        }
        out.sort_by_key(|o| o[0]);
        Ok(out)
    }
}

/// Pass 1: value classes; reduction; pass 2: VV symmetries of the reduced
/// model with weight-class colors.
pub fn nec_symmetries(model: &GraphicalModel, cfg: SearchConfig) -> Result<NecGroup> {
    let classes = value_swap_classes(model, cfg)?;
    let reduced = reduce_model(model, &classes)?;
    let group = vv_symmetries(&reduced.model, cfg)?;
    Ok(NecGroup { reduced, group })
}

/// `true` if some generator maps a variable onto one with a different
/// original cardinality.
pub fn is_non_equicardinal(nec: &NecGroup, model: &GraphicalModel) -> bool {
    nec.generators().iter().any(|t| {
        t.reduced_vv.var_image().is_some_and(|img| {
            img.iter()
                .enumerate()
                .any(|(i, &j)| model.variables[i].cardinality != model.variables[j].cardinality)
        })
    })
}
