//! Permutations of `0..n`, groups given by generators, orbits and random
//! group elements via product replacement.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Default cap on BFS-enumerated orbits and group closures.
pub const DEFAULT_ORBIT_CAP: usize = 100_000;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    map: Vec<usize>,
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("()");
        }
        for cycle in self.cycles() {
            write!(f, "(")?;
            for (k, x) in cycle.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &x in &map {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return Err(Error::NotABijection(format!("{map:?}")));
            }
        }
        Ok(Self { map })
    }

    /// Builds a permutation from disjoint cycles; unlisted points are fixed.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut map: Vec<usize> = (0..n).collect();
        for c in cycles {
            for (k, &x) in c.iter().enumerate() {
                if x >= n {
                    return Err(Error::NotABijection(format!("point {x} outside 0..{n}")));
                }
                map[x] = c[(k + 1) % c.len()];
            }
        }
        Self::from_vec(map)
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch(self.len(), other.len()));
        }
        Ok(self.compose_unchecked(other))
    }

    pub(crate) fn compose_unchecked(&self, other: &Permutation) -> Permutation {
        Permutation {
            map: other.map.iter().map(|&x| self.map[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &x) in self.map.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { map: inv }
    }

    /// Non-trivial cycles, each starting at its smallest point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.map.len()];
        let mut out = Vec::new();
        for start in 0..self.map.len() {
            if seen[start] || self.map[start] == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut x = self.map[start];
            while x != start {
                seen[x] = true;
                cycle.push(x);
                x = self.map[x];
            }
            out.push(cycle);
        }
        out
    }

    /// Cycle notation with custom point labels, e.g. `(a.0 b.1)(a.1 b.0)`.
    pub fn to_cycle_string(&self, label: impl Fn(usize) -> String) -> String {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return "()".into();
        }
        cycles
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|&x| label(x)).collect();
                format!("({})", inner.join(" "))
            })
            .collect()
    }
}

/// A permutation group given by generators. The identity is never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    ground_size: usize,
    generators: Vec<Permutation>,
}

impl GeneratorSet {
    pub fn trivial(ground_size: usize) -> Self {
        Self {
            ground_size,
            generators: Vec::new(),
        }
    }

    pub fn new(ground_size: usize, generators: Vec<Permutation>) -> Result<Self> {
        let mut set = Self::trivial(ground_size);
        for g in generators {
            set.push(g)?;
        }
        Ok(set)
    }

    /// Adds a generator; identities and duplicates are dropped.
    pub fn push(&mut self, g: Permutation) -> Result<()> {
        if g.len() != self.ground_size {
            return Err(Error::SizeMismatch(self.ground_size, g.len()));
        }
        if !g.is_identity() && !self.generators.contains(&g) {
            self.generators.push(g);
        }
        Ok(())
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.is_empty()
    }

    /// Sorted orbit of `x`, by breadth-first closure under the generators.
    pub fn orbit_of_point(&self, x: usize, cap: usize) -> Result<Vec<usize>> {
        orbit_by_bfs(x, cap, |p, out| out.extend(self.generators.iter().map(|g| g.apply(*p))))
    }

    /// Partition of the ground set into orbits, each sorted, ordered by
    /// smallest element.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let n = self.ground_size;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for g in &self.generators {
            for x in 0..n {
                let (a, b) = (find(&mut parent, x), find(&mut parent, g.apply(x)));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            let r = find(&mut parent, x);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(x);
        }
        out
    }

    /// All group elements (identity first), by BFS over products with
    /// generators.
    pub fn closure(&self, cap: usize) -> Result<Vec<Permutation>> {
        let id = Permutation::identity(self.ground_size);
        let mut seen: HashSet<Permutation> = HashSet::new();
        seen.insert(id.clone());
        let mut elements = vec![id];
        let mut head = 0;
        while head < elements.len() {
            let e = elements[head].clone();
            head += 1;
            for g in &self.generators {
                let next = g.compose_unchecked(&e);
                if !seen.contains(&next) {
                    if elements.len() >= cap {
                        return Err(Error::GroupCapExceeded(cap));
                    }
                    seen.insert(next.clone());
                    elements.push(next);
                }
            }
        }
        Ok(elements)
    }

    pub fn order(&self, cap: usize) -> Result<usize> {
        self.closure(cap).map(|c| c.len())
    }
}

/// Generic BFS orbit enumeration; `step` pushes the images of a point.
pub(crate) fn orbit_by_bfs<T, F>(start: T, cap: usize, mut step: F) -> Result<Vec<T>>
where
    T: Clone + Eq + std::hash::Hash + Ord,
    F: FnMut(&T, &mut Vec<T>),
{
    let mut seen: HashSet<T> = HashSet::new();
    seen.insert(start.clone());
    let mut queue = VecDeque::from([start]);
    let mut out = Vec::new();
    let mut images = Vec::new();
    while let Some(p) = queue.pop_front() {
        images.clear();
        step(&p, &mut images);
        for img in images.drain(..) {
            if !seen.contains(&img) {
                if seen.len() >= cap {
                    return Err(Error::OrbitCapExceeded(cap));
                }
                seen.insert(img.clone());
                queue.push_back(img);
            }
        }
        out.push(p);
    }
    out.sort();
    Ok(out)
}

/// Exactly uniform element of the orbit of `x`.
pub fn uniform_orbit_element<R: Rng + ?Sized>(gens: &GeneratorSet, x: usize, cap: usize, rng: &mut R) -> Result<usize> {
    let orbit = gens.orbit_of_point(x, cap)?;
    Ok(if orbit.len() == 1 {
        orbit[0]
    } else {
        orbit[rng.gen_range(0..orbit.len())]
    })
}

/// Product replacement ("rattle" variant with an accumulator) for
/// approximately uniform random group elements.
#[derive(Debug, Clone)]
pub struct PraSampler {
    slots: Vec<Permutation>,
    accumulator: Permutation,
    trivial: bool,
}

impl PraSampler {
    pub const MIN_SLOTS: usize = 10;
    pub const BURN_IN: usize = 60;

    pub fn new<R: Rng + ?Sized>(gens: &GeneratorSet, rng: &mut R) -> Self {
        let id = Permutation::identity(gens.ground_size());
        if gens.is_trivial() {
            return Self {
                slots: Vec::new(),
                accumulator: id,
                trivial: true,
            };
        }
        let r = Self::MIN_SLOTS.max(2 * gens.generators().len());
        let slots = (0..r)
            .map(|i| gens.generators()[i % gens.generators().len()].clone())
            .collect();
        let mut sampler = Self {
            slots,
            accumulator: id,
            trivial: false,
        };
        for _ in 0..Self::BURN_IN {
            sampler.step(rng);
        }
        sampler
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let r = self.slots.len();
        let i = rng.gen_range(0..r);
        let mut j = rng.gen_range(0..r - 1);
        if j >= i {
            j += 1;
        }
        let other = if rng.gen::<bool>() {
            self.slots[j].clone()
        } else {
            self.slots[j].inverse()
        };
        self.slots[i] = if rng.gen::<bool>() {
            self.slots[i].compose_unchecked(&other)
        } else {
            other.compose_unchecked(&self.slots[i])
        };
        self.accumulator = self.accumulator.compose_unchecked(&self.slots[i]);
    }

    /// Next random group element; the identity for the trivial group.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Permutation {
        if !self.trivial {
            self.step(rng);
        }
        self.accumulator.clone()
    }

    pub fn slots(&self) -> &[Permutation] {
        &self.slots
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn compose_examples() {
        let id = Permutation::identity(3);
        let q = p(&[2, 0, 1]);
        assert_eq!(id.compose(&q).unwrap(), q);
        let swap = p(&[1, 0]);
        assert!(swap.compose(&swap).unwrap().is_identity());
        let c = p(&[1, 2, 0]);
        assert_eq!(c.compose(&c).unwrap(), p(&[2, 0, 1]));
        assert!(matches!(c.compose(&swap), Err(Error::SizeMismatch(3, 2))));
    }

    #[test]
    fn invert_examples() {
        assert!(Permutation::identity(4).inverse().is_identity());
        assert_eq!(p(&[1, 0]).inverse(), p(&[1, 0]));
        let c = p(&[1, 2, 0]);
        assert_eq!(c.inverse(), p(&[2, 0, 1]));
        assert!(c.compose(&c.inverse()).unwrap().is_identity());
    }

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::from_vec(vec![0, 0]).is_err());
        assert!(Permutation::from_vec(vec![0, 2]).is_err());
    }

    #[test]
    fn cycle_notation() {
        let g = Permutation::from_cycles(4, &[&[0, 3], &[1, 2]]).unwrap();
        assert_eq!(g.to_cycle_string(|x| format!("v{x}")), "(v0 v3)(v1 v2)");
        assert_eq!(Permutation::identity(2).to_cycle_string(|x| x.to_string()), "()");
    }

    #[test]
    fn orbit_examples() {
        let none = GeneratorSet::trivial(6);
        assert_eq!(none.orbit_of_point(5, 10).unwrap(), vec![5]);
        let swap = GeneratorSet::new(2, vec![p(&[1, 0])]).unwrap();
        assert_eq!(swap.orbit_of_point(0, 10).unwrap(), vec![0, 1]);
        let cyc = GeneratorSet::new(3, vec![p(&[1, 2, 0])]).unwrap();
        assert_eq!(cyc.orbit_of_point(2, 10).unwrap(), vec![0, 1, 2]);
        assert!(matches!(cyc.orbit_of_point(0, 2), Err(Error::OrbitCapExceeded(2))));
    }

    #[test]
    fn closure_of_s3() {
        let gens = GeneratorSet::new(3, vec![p(&[1, 0, 2]), p(&[1, 2, 0])]).unwrap();
        assert_eq!(gens.order(100).unwrap(), 6);
        assert!(gens.order(5).is_err());
        assert_eq!(GeneratorSet::trivial(4).order(10).unwrap(), 1);
    }

    #[test]
    fn pra_trivial_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = PraSampler::new(&GeneratorSet::trivial(3), &mut rng);
        for _ in 0..10 {
            assert!(s.next(&mut rng).is_identity());
        }
    }

    #[test]
    fn pra_uniform_on_s2() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gens = GeneratorSet::new(2, vec![p(&[1, 0])]).unwrap();
        let mut s = PraSampler::new(&gens, &mut rng);
        let n = 10_000;
        let ids = (0..n).filter(|_| s.next(&mut rng).is_identity()).count();
        let freq = ids as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.05, "identity frequency {freq}");
    }

    #[test]
    fn pra_roughly_uniform_on_s4() {
        // chi-square over the 24 elements of S4
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gens = GeneratorSet::new(4, vec![p(&[1, 0, 2, 3]), p(&[1, 2, 3, 0])]).unwrap();
        let elements = gens.closure(100).unwrap();
        let mut s = PraSampler::new(&gens, &mut rng);
        let n = 24_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(s.next(&mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = n as f64 / 24.0;
        let chi2: f64 = elements
            .iter()
            .map(|e| {
                let c = *counts.get(e).unwrap_or(&0) as f64;
                (c - expected).powi(2) / expected
            })
            .sum();
        // 23 degrees of freedom; 0.999 quantile ≈ 49.7
        assert!(chi2 < 49.7, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_orbit_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cyc = GeneratorSet::new(4, vec![p(&[1, 2, 0, 3])]).unwrap();
        assert_eq!(uniform_orbit_element(&cyc, 3, 10, &mut rng).unwrap(), 3);
        let n = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[uniform_orbit_element(&cyc, 0, 10, &mut rng).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02);
        }
        let swap = GeneratorSet::new(2, vec![p(&[1, 0])]).unwrap();
        for _ in 0..20 {
            assert!(uniform_orbit_element(&swap, 1, 10, &mut rng).unwrap() < 2);
        }
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_vec(v).unwrap())
    }

    fn arb_gens() -> impl Strategy<Value = GeneratorSet> {
        (2usize..7).prop_flat_map(|n| {
            prop::collection::vec(arb_perm(n), 0..3).prop_map(move |gs| GeneratorSet::new(n, gs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn orbits_invariant_under_generators(gens in arb_gens()) {
            let n = gens.ground_size();
            for x in 0..n {
                let orb = gens.orbit_of_point(x, 1000).unwrap();
                for g in gens.generators() {
                    prop_assert_eq!(gens.orbit_of_point(g.apply(x), 1000).unwrap(), orb.clone());
                }
            }
            let parts = gens.orbits();
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for part in &parts {
                prop_assert_eq!(gens.orbit_of_point(part[0], 1000).unwrap(), part.clone());
            }
        }

        #[test]
        fn pra_draws_are_group_members(gens in arb_gens(), seed in any::<u64>()) {
            let elements: HashSet<Permutation> = gens.closure(10_000).unwrap().into_iter().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = PraSampler::new(&gens, &mut rng);
            for slot in s.slots() {
                prop_assert!(elements.contains(slot));
            }
            for _ in 0..50 {
                let g = s.next(&mut rng);
                prop_assert!(elements.contains(&g));
                for x in 0..gens.ground_size() {
                    prop_assert!(gens.orbit_of_point(x, 1000).unwrap().contains(&g.apply(x)));
                }
            }
        }

        #[test]
        fn compose_with_inverse_is_identity(g in (1usize..9).prop_flat_map(arb_perm)) {
            prop_assert!(g.compose(&g.inverse()).unwrap().is_identity());
            prop_assert!(g.inverse().compose(&g).unwrap().is_identity());
        }
    }
}
