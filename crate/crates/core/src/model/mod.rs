//! Discrete graphical models built from weighted clausal or conjunctive
//! features, plus exact enumeration oracles for small state spaces.

mod exact;
mod text;

pub use exact::{
    exact_distribution, exact_marginals, Distribution, ExactOptions, HardMode, Marginals, StateSpace, DEFAULT_STATE_CAP,
};
pub use text::{parse_model, write_model};

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub type VarId = usize;

/// Log-space weight substituted for hard features when sampling.
pub const DEFAULT_HARD_WEIGHT: f64 = 30.0;

/// Weights closer than this are treated as equal (same graph color, same
/// canonical feature).
pub const WEIGHT_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub cardinality: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: VarId,
    pub value: usize,
    /// `true` means `X = value`, `false` means `X != value`.
    pub positive: bool,
}

impl Literal {
    pub fn eq(var: VarId, value: usize) -> Self {
        Self {
            var,
            value,
            positive: true,
        }
    }

    pub fn ne(var: VarId, value: usize) -> Self {
        Self {
            var,
            value,
            positive: false,
        }
    }

    #[inline]
    pub fn holds(&self, values: &[usize]) -> bool {
        (values[self.var] == self.value) == self.positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Soft(f64),
    Hard,
}

impl Weight {
    pub fn key(&self) -> WeightKey {
        match *self {
            Weight::Soft(w) => WeightKey::Soft((w / WEIGHT_RESOLUTION).round() as i64),
            Weight::Hard => WeightKey::Hard,
        }
    }

    /// Log-space contribution of a satisfied feature.
    #[inline]
    pub fn value(&self, hard_weight: f64) -> f64 {
        match *self {
            Weight::Soft(w) => w,
            Weight::Hard => hard_weight,
        }
    }

    pub fn is_hard(&self) -> bool {
        matches!(self, Weight::Hard)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Soft(w) => write!(f, "{w}"),
            Weight::Hard => f.write_str("HARD"),
        }
    }
}

/// Weight rounded to [`WEIGHT_RESOLUTION`]; the equality used for colors and
/// canonical forms. Soft weights order before `Hard`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WeightKey {
    Soft(i64),
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Clausal,
    Conjunctive,
}

impl FeatureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Clausal => "clausal",
            FeatureKind::Conjunctive => "conjunctive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub literals: Vec<Literal>,
    pub weight: Weight,
}

impl Feature {
    pub fn new(mut literals: Vec<Literal>, weight: Weight) -> Self {
        literals.sort();
        literals.dedup();
        Self { literals, weight }
    }

    /// Clausal features are disjunctions, conjunctive ones conjunctions.
    #[inline]
    pub fn evaluate(&self, kind: FeatureKind, values: &[usize]) -> bool {
        match kind {
            FeatureKind::Clausal => self.literals.iter().any(|l| l.holds(values)),
            FeatureKind::Conjunctive => self.literals.iter().all(|l| l.holds(values)),
        }
    }

    pub fn variables(&self) -> Vec<VarId> {
        let mut vars: Vec<VarId> = self.literals.iter().map(|l| l.var).collect();
        vars.dedup();
        vars
    }
}

/// Semantic content of a feature: either a constant, or for each variable it
/// mentions the set of values under which its literals on that variable hold
/// (disjunction of the per-variable sets for clauses, conjunction otherwise).
/// Every per-variable set is a non-empty proper subset of the domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Support {
    Const(bool),
    Vars(Vec<(VarId, Vec<usize>)>),
}

/// A complete assignment, indexed by variable id.
pub type State = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalModel {
    pub variables: Vec<Variable>,
    pub features: Vec<Feature>,
    pub kind: FeatureKind,
}

impl GraphicalModel {
    pub fn new(kind: FeatureKind) -> Self {
        Self {
            variables: Vec::new(),
            features: Vec::new(),
            kind,
        }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, cardinality: usize) -> VarId {
        let id = self.variables.len();
        self.variables.push(Variable {
            id,
            name: name.into(),
            cardinality,
        });
        id
    }

    pub fn add_feature(&mut self, literals: Vec<Literal>, weight: Weight) {
        self.features.push(Feature::new(literals, weight));
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn is_boolean(&self) -> bool {
        self.variables.iter().all(|v| v.cardinality == 2)
    }

    pub fn has_hard_features(&self) -> bool {
        self.features.iter().any(|f| f.weight.is_hard())
    }

    /// Checks structural invariants: cardinalities, literal ranges and
    /// unique names.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidModel(format!(
                    "variable '{}' has id {} at position {i}",
                    v.name, v.id
                )));
            }
            if v.cardinality < 2 {
                return Err(Error::InvalidModel(format!(
                    "variable '{}' has cardinality {} (< 2)",
                    v.name, v.cardinality
                )));
            }
            if self.variables[..i].iter().any(|o| o.name == v.name) {
                return Err(Error::InvalidModel(format!("duplicate variable '{}'", v.name)));
            }
        }
        for (j, f) in self.features.iter().enumerate() {
            if let Weight::Soft(w) = f.weight {
                if !w.is_finite() {
                    return Err(Error::InvalidModel(format!("feature {j} has weight {w}")));
                }
            }
            for l in &f.literals {
                let var = self
                    .variables
                    .get(l.var)
                    .ok_or_else(|| Error::InvalidModel(format!("feature {j} references variable {}", l.var)))?;
                if l.value >= var.cardinality {
                    return Err(Error::InvalidModel(format!(
                        "feature {j}: value {} out of range for '{}'",
                        l.value, var.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate_feature(&self, feature: &Feature, state: &[usize]) -> bool {
        feature.evaluate(self.kind, state)
    }

    /// Σ_j w_j [f_j(s)], hard features counting [`DEFAULT_HARD_WEIGHT`].
    pub fn log_weight(&self, state: &[usize]) -> f64 {
        self.log_weight_with(state, DEFAULT_HARD_WEIGHT)
    }

    pub fn log_weight_with(&self, state: &[usize], hard_weight: f64) -> f64 {
        self.features
            .iter()
            .filter(|f| f.evaluate(self.kind, state))
            .map(|f| f.weight.value(hard_weight))
            .sum()
    }

    /// `true` if no hard feature is violated.
    pub fn satisfies_hard(&self, state: &[usize]) -> bool {
        self.features
            .iter()
            .filter(|f| f.weight.is_hard())
            .all(|f| f.evaluate(self.kind, state))
    }

    pub fn is_valid_state(&self, state: &[usize]) -> bool {
        state.len() == self.variables.len() && state.iter().zip(&self.variables).all(|(&v, var)| v < var.cardinality)
    }

    pub fn support(&self, feature: &Feature) -> Support {
        let mut vars: Vec<(VarId, Vec<bool>)> = Vec::new();
        for l in &feature.literals {
            let card = self.variables[l.var].cardinality;
            let lit_set: Vec<bool> = (0..card).map(|v| (v == l.value) == l.positive).collect();
            match vars.iter_mut().find(|(var, _)| *var == l.var) {
                Some((_, set)) => {
                    for (s, x) in set.iter_mut().zip(lit_set) {
                        *s = match self.kind {
                            FeatureKind::Clausal => *s || x,
                            FeatureKind::Conjunctive => *s && x,
                        };
                    }
                }
                None => vars.push((l.var, lit_set)),
            }
        }
        let mut out = Vec::with_capacity(vars.len());
        for (var, set) in vars {
            let members: Vec<usize> = (0..set.len()).filter(|&v| set[v]).collect();
            let full = members.len() == set.len();
            let empty = members.is_empty();
            match self.kind {
                FeatureKind::Clausal if full => return Support::Const(true),
                FeatureKind::Conjunctive if empty => return Support::Const(false),
                _ => {}
            }
            if !empty && !full {
                out.push((var, members));
            }
        }
        if out.is_empty() {
            return Support::Const(self.kind == FeatureKind::Conjunctive);
        }
        out.sort();
        Support::Vars(out)
    }

    /// Literal list expressing `support` in this model's kind.
    fn literals_for_support(&self, support: &[(VarId, Vec<usize>)]) -> Vec<Literal> {
        let mut lits = Vec::new();
        for (var, members) in support {
            match self.kind {
                FeatureKind::Clausal => lits.extend(members.iter().map(|&v| Literal::eq(*var, v))),
                FeatureKind::Conjunctive if members.len() == 1 => lits.push(Literal::eq(*var, members[0])),
                FeatureKind::Conjunctive => {
                    let card = self.variables[*var].cardinality;
                    lits.extend((0..card).filter(|v| !members.contains(v)).map(|v| Literal::ne(*var, v)))
                }
            }
        }
        lits.sort();
        lits
    }

    /// Shortest literal list that is never satisfied in this model's kind.
    fn contradiction(&self) -> Vec<Literal> {
        match self.kind {
            FeatureKind::Clausal => Vec::new(),
            FeatureKind::Conjunctive => vec![Literal::ne(0, 0), Literal::eq(0, 0)],
        }
    }

    /// Canonical form: every feature rewritten from its [`Support`] (so
    /// equivalent literal spellings coincide), constant-true and soft
    /// constant-false features dropped, features sorted by weight key then
    /// literal list. Unsatisfiable hard features are kept as a fixed
    /// contradiction (the empty clause, or `x≠0 ∧ x=0`).
    pub fn canonical(&self) -> GraphicalModel {
        let mut features: Vec<Feature> = Vec::with_capacity(self.features.len());
        for f in &self.features {
            match self.support(f) {
                Support::Const(true) => {}
                Support::Const(false) => {
                    if f.weight.is_hard() {
                        features.push(Feature {
                            literals: self.contradiction(),
                            weight: Weight::Hard,
                        });
                    }
                }
                Support::Vars(sup) => features.push(Feature {
                    literals: self.literals_for_support(&sup),
                    weight: f.weight,
                }),
            }
        }
        features.sort_by(|a, b| {
            a.weight
                .key()
                .cmp(&b.weight.key())
                .then_with(|| a.literals.cmp(&b.literals))
        });
        GraphicalModel {
            variables: self.variables.clone(),
            features,
            kind: self.kind,
        }
    }

    /// Equality of canonical forms: same kind, same domains and the same
    /// multiset of (rounded weight, canonical feature).
    pub fn canonically_equal(&self, other: &GraphicalModel) -> bool {
        if self.kind != other.kind || self.cardinalities() != other.cardinalities() {
            return false;
        }
        let a = self.canonical();
        let b = other.canonical();
        a.features.len() == b.features.len()
            && a.features
                .iter()
                .zip(&b.features)
                .all(|(x, y)| x.weight.key() == y.weight.key() && x.literals.cmp(&y.literals) == Ordering::Equal)
    }

    /// Clausal model over the same variables defining the same distribution
    /// (up to a constant). Conjunctive features become negated clauses with
    /// negated weight; a hard conjunction becomes one hard unit clause per
    /// literal.
    pub fn to_clausal(&self) -> GraphicalModel {
        if self.kind == FeatureKind::Clausal {
            return self.clone();
        }
        let mut out = GraphicalModel {
            variables: self.variables.clone(),
            features: Vec::new(),
            kind: FeatureKind::Clausal,
        };
        for f in &self.features {
            let negated: Vec<Literal> = f
                .literals
                .iter()
                .map(|l| Literal {
                    positive: !l.positive,
                    ..*l
                })
                .collect();
            match f.weight {
                Weight::Soft(w) => out.add_feature(negated, Weight::Soft(-w)),
                Weight::Hard => {
                    for l in &f.literals {
                        out.add_feature(vec![*l], Weight::Hard);
                    }
                }
            }
        }
        out
    }

    /// Per-variable list of feature indices touching that variable.
    pub fn var_features(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.variables.len()];
        for (j, f) in self.features.iter().enumerate() {
            for var in f.variables() {
                idx[var].push(j);
            }
        }
        idx
    }

    pub fn literal_label(&self, l: &Literal) -> String {
        format!(
            "{}{}={}",
            if l.positive { "" } else { "!" },
            self.variables[l.var].name,
            l.value
        )
    }
}
