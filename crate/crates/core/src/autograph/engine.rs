//! Color refinement and an individualization-refinement search for
//! automorphism group generators.
//!
//! The search walks the leftmost path of the refinement tree, then for every
//! level (deepest first) tries to map the individualized vertex to each other
//! vertex of its target cell. A candidate already in the same orbit under the
//! generators found so far is skipped; otherwise its subtree is searched for
//! a leaf equivalent to the first leaf. One automorphism per orbit
//! representative and level is enough to generate the whole group.

use super::ColoredGraph;
use crate::error::{Error, Result};
use crate::permgroup::{GeneratorSet, Permutation};

/// Default limit on visited search-tree nodes.
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub node_budget: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Fixpoint of color refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableColoring {
    pub colors: Vec<usize>,
    pub round_count: usize,
}

impl StableColoring {
    pub fn num_colors(&self) -> usize {
        self.colors.iter().max().map_or(0, |&m| m + 1)
    }
}

pub fn color_refinement(g: &ColoredGraph) -> StableColoring {
    let mut cells = g.colors().to_vec();
    let (_, round_count) = refine(g, &mut cells);
    StableColoring {
        colors: cells,
        round_count,
    }
}

/// Refines `cells` in place to the coarsest equitable partition finer than
/// it. Cell ids stay dense and ordered by (old cell, sorted neighbor cells),
/// which depends only on the partition, never on vertex labels. Returns the
/// number of cells and the number of rounds that split something.
fn refine(g: &ColoredGraph, cells: &mut [usize]) -> (usize, usize) {
    let n = cells.len();
    let mut n_cells = cells.iter().max().map_or(0, |&m| m + 1);
    let mut rounds = 0;
    let mut keys: Vec<(usize, Vec<usize>, usize)> = Vec::with_capacity(n);
    loop {
        keys.clear();
        for v in 0..n {
            let mut nb: Vec<usize> = g.neighbors(v).iter().map(|&u| cells[u]).collect();
            nb.sort_unstable();
            keys.push((cells[v], nb, v));
        }
        keys.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let mut next = 0usize;
        for k in 0..n {
            if k > 0 && (keys[k].0 != keys[k - 1].0 || keys[k].1 != keys[k - 1].1) {
                next += 1;
            }
            cells[keys[k].2] = next;
        }
        let new_cells = if n == 0 { 0 } else { next + 1 };
        if new_cells == n_cells {
            return (n_cells, rounds);
        }
        n_cells = new_cells;
        rounds += 1;
    }
}

fn individualize(cells: &[usize], v: usize) -> Vec<usize> {
    let c = cells[v];
    cells
        .iter()
        .enumerate()
        .map(|(u, &cu)| if cu > c || (cu == c && u != v) { cu + 1 } else { cu })
        .collect()
}

fn cell_sizes(cells: &[usize], n_cells: usize) -> Vec<usize> {
    let mut sizes = vec![0; n_cells];
    for &c in cells {
        sizes[c] += 1;
    }
    sizes
}

/// Members of the smallest non-singleton cell (lowest cell id on ties),
/// sorted by vertex id.
fn target_cell(cells: &[usize], sizes: &[usize]) -> Option<Vec<usize>> {
    let target = sizes
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1)
        .min_by_key(|(c, &s)| (s, *c))?
        .0;
    Some(
        cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == target)
            .map(|(v, _)| v)
            .collect(),
    )
}

struct Level {
    cells: Vec<usize>,
    sizes: Vec<usize>,
    target: Vec<usize>,
}

struct Search<'g> {
    g: &'g ColoredGraph,
    budget: u64,
    visited: u64,
    path: Vec<Level>,
    /// Vertex at each position of the first discrete partition.
    first_leaf: Vec<usize>,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::SearchBudgetExceeded(self.budget));
        }
        Ok(())
    }

    /// Searches the subtree rooted at `cells` (at `depth`) for a leaf whose
    /// correspondence with the first leaf is an automorphism.
    fn explore(&mut self, cells: Vec<usize>, n_cells: usize, depth: usize) -> Result<Option<Permutation>> {
        self.tick()?;
        let sizes = cell_sizes(&cells, n_cells);
        let n = cells.len();
        if depth == self.path.len() {
            if n_cells != n {
                return Ok(None);
            }
            let mut map = vec![0; n];
            for (v, &pos) in cells.iter().enumerate() {
                map[self.first_leaf[pos]] = v;
            }
            let perm = Permutation::from_vec(map).expect("discrete partitions give bijections");
            return Ok(self.g.is_automorphism(&perm).then_some(perm));
        }
        if sizes != self.path[depth].sizes {
            return Ok(None);
        }
        let target = target_cell(&cells, &sizes).expect("non-discrete partition has a target");
        for u in target {
            let mut child = individualize(&cells, u);
            let (k, _) = refine(self.g, &mut child);
            if let Some(p) = self.explore(child, k, depth + 1)? {
                return Ok(Some(p));
            }
        }
        Ok(None)
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

pub fn automorphism_generators(g: &ColoredGraph) -> Result<GeneratorSet> {
    automorphism_generators_with(g, SearchConfig::default())
}

/// Generators of the group of color-preserving automorphisms of `g`.
pub fn automorphism_generators_with(g: &ColoredGraph, cfg: SearchConfig) -> Result<GeneratorSet> {
    let n = g.n_nodes();
    let mut search = Search {
        g,
        budget: cfg.node_budget,
        visited: 0,
        path: Vec::new(),
        first_leaf: Vec::new(),
    };

    let mut cells = g.colors().to_vec();
    let (mut n_cells, _) = refine(g, &mut cells);
    loop {
        search.tick()?;
        let sizes = cell_sizes(&cells, n_cells);
        let Some(target) = target_cell(&cells, &sizes) else {
            break;
        };
        let mut child = individualize(&cells, target[0]);
        let (k, _) = refine(g, &mut child);
        search.path.push(Level { cells, sizes, target });
        cells = child;
        n_cells = k;
    }
    search.first_leaf = vec![0; n];
    for (v, &pos) in cells.iter().enumerate() {
        search.first_leaf[pos] = v;
    }

    let mut gens = GeneratorSet::trivial(n);
    let mut orbits = UnionFind((0..n).collect());
    for depth in (0..search.path.len()).rev() {
        let first = search.path[depth].target[0];
        let candidates = search.path[depth].target[1..].to_vec();
        for v in candidates {
            if orbits.find(v) == orbits.find(first) {
                continue;
            }
            let mut child = individualize(&search.path[depth].cells, v);
            let (k, _) = refine(g, &mut child);
            if let Some(perm) = search.explore(child, k, depth + 1)? {
                for x in 0..n {
                    orbits.union(x, perm.apply(x));
                }
                gens.push(perm)?;
            }
        }
    }
    Ok(gens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograph::NodeKind;

    fn graph(colors: &[usize], edges: &[(usize, usize)]) -> ColoredGraph {
        ColoredGraph::from_edges(colors.to_vec(), edges).unwrap()
    }

    #[test]
    fn edgeless_graph_unchanged() {
        let g = graph(&[0, 0, 1, 0], &[]);
        let s = color_refinement(&g);
        assert_eq!(s.colors, vec![0, 0, 1, 0]);
        assert_eq!(s.round_count, 0);
    }

    #[test]
    fn path_middle_separates() {
        let g = graph(&[0, 0, 0], &[(0, 1), (1, 2)]);
        let s = color_refinement(&g);
        assert_eq!(s.colors[0], s.colors[2]);
        assert_ne!(s.colors[0], s.colors[1]);
        assert_eq!(s.num_colors(), 2);
    }

    #[test]
    fn triangle_groups() {
        let uniform = graph(&[0, 0, 0], &[(0, 1), (1, 2), (0, 2)]);
        let gens = automorphism_generators(&uniform).unwrap();
        assert_eq!(gens.order(100).unwrap(), 6);
        let marked = graph(&[0, 0, 1], &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(automorphism_generators(&marked).unwrap().order(100).unwrap(), 2);
    }

    #[test]
    fn cycle_and_cube() {
        let c6: Vec<(usize, usize)> = (0..6).map(|i| (i, (i + 1) % 6)).collect();
        let g = graph(&[0; 6], &c6);
        assert_eq!(automorphism_generators(&g).unwrap().order(10_000).unwrap(), 12);

        let mut cube = Vec::new();
        for v in 0..8usize {
            for b in 0..3 {
                let u = v ^ (1 << b);
                if v < u {
                    cube.push((v, u));
                }
            }
        }
        let g = graph(&[0; 8], &cube);
        assert_eq!(automorphism_generators(&g).unwrap().order(10_000).unwrap(), 48);
    }

    #[test]
    fn petersen_graph() {
        let mut e = Vec::new();
        for i in 0..5 {
            e.push((i, (i + 1) % 5));
            e.push((i, i + 5));
            e.push((i + 5, (i + 2) % 5 + 5));
        }
        let g = graph(&[0; 10], &e);
        assert_eq!(automorphism_generators(&g).unwrap().order(10_000).unwrap(), 120);
    }

    #[test]
    fn budget_exceeded_is_an_error() {
        let g = graph(&[0; 6], &[]);
        let err = automorphism_generators_with(&g, SearchConfig { node_budget: 3 }).unwrap_err();
        assert!(matches!(err, Error::SearchBudgetExceeded(3)));
    }

    #[test]
    fn generators_are_automorphisms() {
        let g = graph(&[0, 0, 0, 0, 1, 1], &[(0, 4), (1, 4), (2, 5), (3, 5), (4, 5)]);
        let gens = automorphism_generators(&g).unwrap();
        assert_eq!(gens.order(1000).unwrap(), 8);
        for p in gens.generators() {
            assert!(g.is_automorphism(p));
        }
        assert!(g.kinds().iter().all(|k| *k == NodeKind::Plain));
    }
}
