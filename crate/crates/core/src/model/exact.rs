//! Brute-force enumeration oracles.

use super::{GraphicalModel, VarId};
use crate::error::{Error, Result};

/// Default cap on the number of enumerated states.
pub const DEFAULT_STATE_CAP: u128 = 1 << 20;

/// Per-variable marginal probabilities, indexed `[var][value]`.
pub type Marginals = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HardMode {
    /// States violating a hard feature get probability zero.
    Infinite,
    /// Hard features count as soft features of the given log weight.
    Soft(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub hard: HardMode,
    pub cap: u128,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            hard: HardMode::Infinite,
            cap: DEFAULT_STATE_CAP,
        }
    }
}

impl ExactOptions {
    pub fn soft(hard_weight: f64) -> Self {
        Self {
            hard: HardMode::Soft(hard_weight),
            ..Self::default()
        }
    }
}

/// Mixed-radix indexing of the joint state space; the last variable varies
/// fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl StateSpace {
    pub fn new(cards: Vec<usize>, cap: u128) -> Result<Self> {
        let states = cards.iter().map(|&c| c as u128).product::<u128>();
        if states > cap {
            return Err(Error::StateSpaceTooLarge { states, cap });
        }
        let mut strides = vec![1usize; cards.len()];
        for i in (0..cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * cards[i + 1];
        }
        Ok(Self {
            cards,
            strides,
            size: states as usize,
        })
    }

    pub fn of(model: &GraphicalModel, cap: u128) -> Result<Self> {
        Self::new(model.cardinalities(), cap)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn encode(&self, state: &[usize]) -> usize {
        state.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.cards.len()];
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = index / s;
            index %= s;
        }
        out
    }

    pub fn decode_into(&self, mut index: usize, out: &mut [usize]) {
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = index / s;
            index %= s;
        }
    }

    pub fn states(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size).map(|i| self.decode(i))
    }
}

/// Exact joint distribution over an enumerated state space.
#[derive(Debug, Clone)]
pub struct Distribution {
    pub space: StateSpace,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn probability(&self, state: &[usize]) -> f64 {
        self.probs[self.space.encode(state)]
    }

    pub fn marginals(&self) -> Marginals {
        let mut out: Marginals = self.space.cards().iter().map(|&c| vec![0.0; c]).collect();
        let mut buf = vec![0; self.space.cards().len()];
        for (i, &p) in self.probs.iter().enumerate() {
            self.space.decode_into(i, &mut buf);
            for (var, &v) in buf.iter().enumerate() {
                out[var][v] += p;
            }
        }
        out
    }
}

/// Normalizes log weights, `None` marking states of probability zero.
fn normalize(log_weights: &[Option<f64>]) -> Result<Vec<f64>> {
    let max = log_weights.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Infeasible);
    }
    let unnorm: Vec<f64> = log_weights
        .iter()
        .map(|lw| lw.map_or(0.0, |w| (w - max).exp()))
        .collect();
    let z: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|w| w / z).collect())
}

fn state_log_weight(model: &GraphicalModel, features: &[usize], state: &[usize], hard: HardMode) -> Option<f64> {
    let mut total = 0.0;
    for &j in features {
        let f = &model.features[j];
        let sat = f.evaluate(model.kind, state);
        match (hard, f.weight.is_hard(), sat) {
            (HardMode::Infinite, true, false) => return None,
            (HardMode::Infinite, true, true) => {}
            (HardMode::Soft(h), _, true) => total += f.weight.value(h),
            (HardMode::Infinite, false, true) => total += f.weight.value(0.0),
            (_, _, false) => {}
        }
    }
    Some(total)
}

/// P(s) = exp(log_weight(s)) / Z for every state, by enumeration.
pub fn exact_distribution(model: &GraphicalModel, opts: ExactOptions) -> Result<Distribution> {
    let space = StateSpace::of(model, opts.cap)?;
    let all: Vec<usize> = (0..model.features.len()).collect();
    let mut buf = vec![0; model.num_vars()];
    let lw: Vec<Option<f64>> = (0..space.size())
        .map(|i| {
            space.decode_into(i, &mut buf);
            state_log_weight(model, &all, &buf, opts.hard)
        })
        .collect();
    let probs = normalize(&lw)?;
    Ok(Distribution { space, probs })
}

/// Variables grouped into connected components of the feature hypergraph.
pub(crate) fn components(model: &GraphicalModel) -> Vec<(Vec<VarId>, Vec<usize>)> {
    let n = model.num_vars();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for f in &model.features {
        let vars = f.variables();
        for w in vars.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut comps: Vec<(Vec<VarId>, Vec<usize>)> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if root_slot[r] == usize::MAX {
            root_slot[r] = comps.len();
            comps.push((Vec::new(), Vec::new()));
        }
        comps[root_slot[r]].0.push(v);
    }
    for (j, f) in model.features.iter().enumerate() {
        if let Some(l) = f.literals.first() {
            let r = find(&mut parent, l.var);
            comps[root_slot[r]].1.push(j);
        }
    }
    comps
}

/// Exact per-variable marginals. The model is split into independent
/// components and each is enumerated separately, so the cap applies to the
/// largest component rather than the whole joint space.
pub fn exact_marginals(model: &GraphicalModel, opts: ExactOptions) -> Result<Marginals> {
    let mut out: Marginals = model.variables.iter().map(|v| vec![0.0; v.cardinality]).collect();
    let mut full = vec![0usize; model.num_vars()];
    for (vars, feats) in components(model) {
        let cards: Vec<usize> = vars.iter().map(|&v| model.variables[v].cardinality).collect();
        let space = StateSpace::new(cards, opts.cap)?;
        let mut local = vec![0; vars.len()];
        let mut lw = Vec::with_capacity(space.size());
        for i in 0..space.size() {
            space.decode_into(i, &mut local);
            for (k, &v) in vars.iter().enumerate() {
                full[v] = local[k];
            }
            lw.push(state_log_weight(model, &feats, &full, opts.hard));
        }
        let probs = normalize(&lw)?;
        for (i, p) in probs.into_iter().enumerate() {
            space.decode_into(i, &mut local);
            for (k, &v) in vars.iter().enumerate() {
                out[v][local[k]] += p;
            }
        }
    }
    Ok(out)
}
