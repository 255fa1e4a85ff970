//! Colored graphs built from a model, whose automorphisms are model
//! symmetries.
//!
//! * [`build_variable_graph`]: one node per Boolean literal and per feature;
//!   automorphisms are variable permutations.
//! * [`build_vv_graph`]: one node per variable-value pair, one exactly-one
//!   node per variable and one node per feature; automorphisms are valid VV
//!   permutations.

mod engine;

pub use engine::{
    automorphism_generators, automorphism_generators_with, color_refinement, SearchConfig, StableColoring,
    DEFAULT_NODE_BUDGET,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{GraphicalModel, Support, VarId, WeightKey};
use crate::permgroup::{GeneratorSet, Permutation};
use crate::symmetry::{VvPermutation, VvSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Literal { var: VarId, value: usize },
    VvPair { var: VarId, value: usize },
    Feature(usize),
    Mutex(VarId),
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredGraph {
    adjacency: Vec<Vec<usize>>,
    colors: Vec<usize>,
    kinds: Vec<NodeKind>,
}

impl ColoredGraph {
    fn with_nodes(colors: Vec<usize>, kinds: Vec<NodeKind>) -> Self {
        let n = colors.len();
        Self {
            adjacency: vec![Vec::new(); n],
            colors: densify(&colors),
            kinds,
        }
    }

    /// Graph of [`NodeKind::Plain`] nodes. Colors are renumbered densely in
    /// order of first use of each value's rank.
    pub fn from_edges(colors: Vec<usize>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = colors.len();
        let mut g = Self::with_nodes(colors, vec![NodeKind::Plain; n]);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidModel(format!("edge ({u},{v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidModel(format!("self-loop at {u}")));
            }
            g.add_edge(u, v);
        }
        g.finish();
        Ok(g)
    }

    fn add_edge(&mut self, u: usize, v: usize) {
        debug_assert_ne!(u, v);
        self.adjacency[u].push(v);
        self.adjacency[v].push(u);
    }

    fn finish(&mut self) {
        for adj in &mut self.adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.colors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, adj)| adj.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// `true` if `p` preserves colors and maps edges onto edges.
    pub fn is_automorphism(&self, p: &Permutation) -> bool {
        p.len() == self.n_nodes()
            && (0..self.n_nodes()).all(|v| self.colors[p.apply(v)] == self.colors[v])
            && self.edges().all(|(u, v)| self.has_edge(p.apply(u), p.apply(v)))
    }

    /// DIMACS-style dump: `p edge n m`, one `n <node> <color>` line per node
    /// (1-based) and one `e <u> <v>` line per edge.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p edge {} {}", self.n_nodes(), self.n_edges());
        for (v, (c, k)) in self.colors.iter().zip(&self.kinds).enumerate() {
            let _ = writeln!(out, "c node {} {:?}", v + 1, k);
            let _ = writeln!(out, "n {} {}", v + 1, c);
        }
        for (u, v) in self.edges() {
            let _ = writeln!(out, "e {} {}", u + 1, v + 1);
        }
        out
    }
}

fn densify(colors: &[usize]) -> Vec<usize> {
    let mut distinct: Vec<usize> = colors.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    colors
        .iter()
        .map(|c| distinct.binary_search(c).expect("present"))
        .collect()
}

/// How feature nodes are colored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureColoring {
    /// Features share a color iff their rounded weights agree.
    ByWeight,
    /// Every feature gets its own color; only value permutations within a
    /// variable survive.
    Distinct,
}

const VV_COLOR: usize = 0;
const MUTEX_COLOR: usize = 1;
const LIT0_COLOR: usize = 0;
const LIT1_COLOR: usize = 1;
const FIRST_FEATURE_COLOR: usize = 2;

fn feature_colors(model: &GraphicalModel, coloring: FeatureColoring) -> Vec<usize> {
    match coloring {
        FeatureColoring::Distinct => (0..model.features.len()).map(|j| FIRST_FEATURE_COLOR + j).collect(),
        FeatureColoring::ByWeight => {
            let mut keys: Vec<WeightKey> = model.features.iter().map(|f| f.weight.key()).collect();
            keys.sort_unstable();
            keys.dedup();
            model
                .features
                .iter()
                .map(|f| FIRST_FEATURE_COLOR + keys.binary_search(&f.weight.key()).unwrap())
                .collect()
        }
    }
}

/// Literal graph over Boolean variables: node `2i + v` is `X_i = v`,
/// followed by one node per feature.
pub fn build_variable_graph(model: &GraphicalModel) -> Result<ColoredGraph> {
    if let Some(v) = model.variables.iter().find(|v| v.cardinality != 2) {
        return Err(Error::NonBooleanVariable(v.name.clone()));
    }
    let n = model.num_vars();
    let mut colors = Vec::with_capacity(2 * n + model.features.len());
    let mut kinds = Vec::with_capacity(colors.capacity());
    for var in 0..n {
        for value in 0..2 {
            colors.push(if value == 0 { LIT0_COLOR } else { LIT1_COLOR });
            kinds.push(NodeKind::Literal { var, value });
        }
    }
    for (j, c) in feature_colors(model, FeatureColoring::ByWeight).into_iter().enumerate() {
        colors.push(c);
        kinds.push(NodeKind::Feature(j));
    }
    let mut g = ColoredGraph::with_nodes(colors, kinds);
    for var in 0..n {
        g.add_edge(2 * var, 2 * var + 1);
    }
    for (j, f) in model.features.iter().enumerate() {
        if let Support::Vars(sup) = model.support(f) {
            for (var, values) in sup {
                for v in values {
                    g.add_edge(2 * n + j, 2 * var + v);
                }
            }
        }
    }
    g.finish();
    Ok(g)
}

/// VV graph: nodes `0..|VV|` are the pairs in [`VvSet`] order, then one
/// exactly-one node per variable, then one node per feature. A feature node
/// is adjacent to the pairs under which its literals on each variable hold,
/// so `X != v` connects to every value of `X` except `v`.
pub fn build_vv_graph(model: &GraphicalModel) -> ColoredGraph {
    build_vv_graph_with(model, FeatureColoring::ByWeight)
}

pub fn build_vv_graph_with(model: &GraphicalModel, coloring: FeatureColoring) -> ColoredGraph {
    let set = VvSet::of(model);
    let n_vv = set.len();
    let n = model.num_vars();
    let mut colors = Vec::with_capacity(n_vv + n + model.features.len());
    let mut kinds = Vec::with_capacity(colors.capacity());
    for idx in 0..n_vv {
        let (var, value) = set.pair(idx);
        colors.push(VV_COLOR);
        kinds.push(NodeKind::VvPair { var, value });
    }
    for var in 0..n {
        colors.push(MUTEX_COLOR);
        kinds.push(NodeKind::Mutex(var));
    }
    for (j, c) in feature_colors(model, coloring).into_iter().enumerate() {
        colors.push(c);
        kinds.push(NodeKind::Feature(j));
    }
    let mut g = ColoredGraph::with_nodes(colors, kinds);
    for var in 0..n {
        for value in 0..set.card(var) {
            g.add_edge(n_vv + var, set.index(var, value));
        }
    }
    for (j, f) in model.features.iter().enumerate() {
        if let Support::Vars(sup) = model.support(f) {
            for (var, values) in sup {
                for v in values {
                    g.add_edge(n_vv + n + j, set.index(var, v));
                }
            }
        }
    }
    g.finish();
    g
}

/// Restricts an automorphism of `build_vv_graph(model)` to the VV pairs.
pub fn lift_to_vv(node_perm: &Permutation, g: &ColoredGraph, model: &GraphicalModel) -> Result<VvPermutation> {
    let set = VvSet::of(model);
    let n_vv = set.len();
    if node_perm.len() != g.n_nodes() || g.n_nodes() < n_vv {
        return Err(Error::InvalidLift("permutation does not match the graph".into()));
    }
    let mut map = Vec::with_capacity(n_vv);
    for idx in 0..n_vv {
        let img = node_perm.apply(idx);
        match (g.kinds()[idx], g.kinds()[img]) {
            (NodeKind::VvPair { .. }, NodeKind::VvPair { .. }) => map.push(img),
            (a, b) => {
                return Err(Error::InvalidLift(format!("{a:?} maps to {b:?}")));
            }
        }
    }
    let perm =
        Permutation::from_vec(map).map_err(|e| Error::InvalidLift(format!("restriction is not a bijection: {e}")))?;
    let phi = VvPermutation::new(set, perm);
    if !phi.is_valid() {
        return Err(Error::InvalidLift(
            "values of one variable map to several variables".into(),
        ));
    }
    Ok(phi)
}

/// Reads the variable permutation off an automorphism of
/// `build_variable_graph`.
pub fn lift_to_variable(node_perm: &Permutation, n_vars: usize) -> Result<Permutation> {
    let mut map = Vec::with_capacity(n_vars);
    for var in 0..n_vars {
        let one = node_perm.apply(2 * var + 1);
        let zero = node_perm.apply(2 * var);
        if one >= 2 * n_vars || one % 2 != 1 || zero != one - 1 {
            return Err(Error::InvalidLift(format!(
                "literals of variable {var} do not map to a variable's literals"
            )));
        }
        map.push(one / 2);
    }
    Permutation::from_vec(map).map_err(|e| Error::InvalidLift(e.to_string()))
}

/// Variable symmetries of a Boolean model, as a group on variable ids.
pub fn variable_symmetries(model: &GraphicalModel, cfg: SearchConfig) -> Result<GeneratorSet> {
    let g = build_variable_graph(model)?;
    let gens = automorphism_generators_with(&g, cfg)?;
    let mut out = GeneratorSet::trivial(model.num_vars());
    for p in gens.generators() {
        out.push(lift_to_variable(p, model.num_vars())?)?;
    }
    Ok(out)
}

/// VV symmetries of a model, as a group on VV indices.
pub fn vv_symmetries(model: &GraphicalModel, cfg: SearchConfig) -> Result<GeneratorSet> {
    vv_symmetries_with(model, FeatureColoring::ByWeight, cfg)
}

pub fn vv_symmetries_with(
    model: &GraphicalModel,
    coloring: FeatureColoring,
    cfg: SearchConfig,
) -> Result<GeneratorSet> {
    let g = build_vv_graph_with(model, coloring);
    let gens = automorphism_generators_with(&g, cfg)?;
    let mut out = GeneratorSet::trivial(VvSet::of(model).len());
    for p in gens.generators() {
        out.push(lift_to_vv(p, &g, model)?.into_permutation())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{toy_g1, toy_g2, toy_g3_nec};
    use crate::model::{FeatureKind, Literal, Weight};
    use crate::symmetry::is_vv_symmetry;

    #[test]
    fn variable_graph_of_g1() {
        let g = build_variable_graph(&toy_g1(0.2, 0.9)).unwrap();
        assert_eq!(g.n_nodes(), 6);
        let intra = g.edges().filter(|&(u, v)| u / 2 == v / 2 && v < 4).count();
        assert_eq!(intra, 2);
        assert_eq!(g.n_edges(), 6);
    }

    #[test]
    fn variable_graph_single_var() {
        let mut m = GraphicalModel::new(FeatureKind::Clausal);
        m.add_variable("x", 2);
        let g = build_variable_graph(&m).unwrap();
        assert_eq!((g.n_nodes(), g.n_edges()), (2, 1));
        m.add_variable("y", 3);
        assert!(matches!(build_variable_graph(&m), Err(Error::NonBooleanVariable(_))));
    }

    #[test]
    fn equal_unit_clauses_swap() {
        let mut m = GraphicalModel::new(FeatureKind::Clausal);
        m.add_variable("a", 2);
        m.add_variable("b", 2);
        m.add_feature(vec![Literal::eq(0, 1)], Weight::Soft(1.0));
        m.add_feature(vec![Literal::eq(1, 1)], Weight::Soft(1.0));
        let gens = variable_symmetries(&m, SearchConfig::default()).unwrap();
        let swap = Permutation::from_vec(vec![1, 0]).unwrap();
        assert!(gens.closure(10).unwrap().contains(&swap));
    }

    #[test]
    fn vv_graph_sizes() {
        let g1 = build_vv_graph(&toy_g1(0.2, 0.9));
        assert_eq!(g1.n_nodes(), 4 + 2 + 2);
        let g3 = build_vv_graph(&toy_g3_nec(0.5));
        assert_eq!(g3.n_nodes(), 5 + 2 + 2);
        assert!(g3.colors()[..5].iter().all(|&c| c == VV_COLOR));
        assert!(g3.colors()[5..7].iter().all(|&c| c == MUTEX_COLOR));
        assert_eq!(g3.colors()[7], g3.colors()[8]);
    }

    #[test]
    fn single_boolean_value_swap() {
        let mut m = GraphicalModel::new(FeatureKind::Clausal);
        m.add_variable("x", 2);
        let gens = vv_symmetries(&m, SearchConfig::default()).unwrap();
        assert_eq!(gens.order(10).unwrap(), 2);
    }

    #[test]
    fn g2_group_contains_phi() {
        let m = toy_g2(1.0, 0.3);
        let gens = vv_symmetries(&m, SearchConfig::default()).unwrap();
        let elements = gens.closure(100).unwrap();
        assert_eq!(elements.len(), 4);
        // φ(X1,0)=(X2,1), φ(X1,1)=(X2,0) and back; VV order x1.0 x1.1 x2.0 x2.1
        let phi = Permutation::from_vec(vec![3, 2, 1, 0]).unwrap();
        assert!(elements.contains(&phi));
    }

    #[test]
    fn g1_lift_is_crosswise_swap() {
        let m = toy_g1(0.2, 0.9);
        let g = build_vv_graph(&m);
        let gens = automorphism_generators(&g).unwrap();
        assert_eq!(gens.order(100).unwrap(), 2);
        let phi = lift_to_vv(&gens.generators()[0], &g, &m).unwrap();
        assert_eq!(phi.permutation().as_slice(), &[3, 2, 1, 0]);
        assert!(is_vv_symmetry(&phi, &m).unwrap());
        let id = lift_to_vv(&Permutation::identity(g.n_nodes()), &g, &m).unwrap();
        assert!(id.permutation().is_identity());
    }

    #[test]
    fn lift_rejects_vv_to_feature() {
        let m = toy_g1(0.2, 0.9);
        let g = build_vv_graph(&m);
        let bad = Permutation::from_cycles(g.n_nodes(), &[&[0, 6]]).unwrap();
        assert!(matches!(lift_to_vv(&bad, &g, &m), Err(Error::InvalidLift(_))));
    }

    #[test]
    fn dimacs_dump() {
        let g = build_vv_graph(&toy_g1(0.2, 0.9));
        let d = g.to_dimacs();
        assert!(d.starts_with("p edge 8 "));
        assert_eq!(d.lines().filter(|l| l.starts_with("e ")).count(), g.n_edges());
    }
}
