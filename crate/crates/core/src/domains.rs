//! Benchmark and toy model generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{FeatureKind, GraphicalModel, Literal, Weight};

/// `w1: a ∨ ¬b`, `w2: ¬a ∨ b` over Boolean `a`, `b`.
pub fn toy_g1(w1: f64, w2: f64) -> GraphicalModel {
    let mut m = GraphicalModel::new(FeatureKind::Clausal);
    let a = m.add_variable("a", 2);
    let b = m.add_variable("b", 2);
    m.add_feature(vec![Literal::eq(a, 1), Literal::ne(b, 1)], Weight::Soft(w1));
    m.add_feature(vec![Literal::ne(a, 1), Literal::eq(b, 1)], Weight::Soft(w2));
    m
}

/// Conjunctive `f_00, f_01, f_10, f_11` over Boolean `X1`, `X2` with
/// weights `ws, wd, wd, ws`.
pub fn toy_g2(ws: f64, wd: f64) -> GraphicalModel {
    let mut m = GraphicalModel::new(FeatureKind::Conjunctive);
    let x1 = m.add_variable("X1", 2);
    let x2 = m.add_variable("X2", 2);
    for (v1, v2, w) in [(0, 0, ws), (0, 1, wd), (1, 0, wd), (1, 1, ws)] {
        m.add_feature(vec![Literal::eq(x1, v1), Literal::eq(x2, v2)], Weight::Soft(w));
    }
    m
}

/// `w: a=1` and `w: b=1 ∨ b=2` with `|D_a| = 2`, `|D_b| = 3`.
pub fn toy_g3_nec(w: f64) -> GraphicalModel {
    let mut m = GraphicalModel::new(FeatureKind::Clausal);
    let a = m.add_variable("a", 2);
    let b = m.add_variable("b", 3);
    m.add_feature(vec![Literal::eq(a, 1)], Weight::Soft(w));
    m.add_feature(vec![Literal::eq(b, 1), Literal::eq(b, 2)], Weight::Soft(w));
    m
}

/// `w: a ⊕ b` as the conjunctions `a=0 ∧ b=1` and `a=1 ∧ b=0`.
pub fn xor_model(w: f64) -> GraphicalModel {
    let mut m = GraphicalModel::new(FeatureKind::Conjunctive);
    let a = m.add_variable("a", 2);
    let b = m.add_variable("b", 2);
    m.add_feature(vec![Literal::eq(a, 0), Literal::eq(b, 1)], Weight::Soft(w));
    m.add_feature(vec![Literal::eq(a, 1), Literal::eq(b, 0)], Weight::Soft(w));
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingSpec {
    pub n_people: usize,
    pub w_male: f64,
    pub w_female: f64,
    pub rename_prob: f64,
    pub seed: u64,
}

/// Ring of implications `x_i → x_{i+1}` with alternating weights, each
/// variable's meaning flipped with probability `rename_prob`.
pub fn gen_ring(spec: &RingSpec) -> Result<GraphicalModel> {
    if spec.n_people < 4 || !spec.n_people.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "ring needs an even number of people >= 4, got {}",
            spec.n_people
        )));
    }
    let weights: Vec<f64> = (0..spec.n_people)
        .map(|i| if i % 2 == 0 { spec.w_male } else { spec.w_female })
        .collect();
    gen_ring_with_weights(&weights, spec.rename_prob, spec.seed)
}

/// Ring with an explicit weight per implication `x_i → x_{i+1}`.
pub fn gen_ring_with_weights(weights: &[f64], rename_prob: f64, seed: u64) -> Result<GraphicalModel> {
    let n = weights.len();
    if n < 2 {
        return Err(Error::Config("ring needs at least two variables".into()));
    }
    if !(0.0..=1.0).contains(&rename_prob) {
        return Err(Error::Config(format!("rename probability {rename_prob} not in [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flipped: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < rename_prob).collect();
    let mut m = GraphicalModel::new(FeatureKind::Clausal);
    for i in 0..n {
        m.add_variable(format!("x{}", i + 1), 2);
    }
    let bit = |i: usize, positive: bool| Literal {
        var: i,
        value: if flipped[i] { 0 } else { 1 },
        positive,
    };
    for (i, &w) in weights.iter().enumerate() {
        let j = (i + 1) % n;
        m.add_feature(vec![bit(i, false), bit(j, true)], Weight::Soft(w));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumSpec {
    pub n_students: usize,
    /// Number of courses `N(a)` per area.
    pub areas: Vec<usize>,
    /// Weight of failing, per student.
    pub fail_weights: Vec<f64>,
    pub completion_weight: f64,
}

/// Seriousness levels students are drawn from.
pub const FAIL_WEIGHT_LEVELS: [f64; 2] = [0.5, 1.0];

impl CurriculumSpec {
    /// Fail weights drawn uniformly from [`FAIL_WEIGHT_LEVELS`].
    pub fn new(n_students: usize, areas: Vec<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fail_weights = (0..n_students)
            .map(|_| FAIL_WEIGHT_LEVELS[rng.gen_range(0..FAIL_WEIGHT_LEVELS.len())])
            .collect();
        Self {
            n_students,
            areas,
            fail_weights,
            completion_weight: 1.0,
        }
    }
}

/// Per student `s` and area `a`, `p{s}_{a}` (0 = failed, `c` = passed
/// course `c`); per unordered area pair, Boolean `c{s}_{a}_{a'}` with hard
/// clauses making it equivalent to passing both areas.
pub fn gen_curriculum(spec: &CurriculumSpec) -> Result<GraphicalModel> {
    if spec.areas.len() < 2 {
        return Err(Error::Config("curriculum needs at least two areas".into()));
    }
    if spec.areas.contains(&0) {
        return Err(Error::Config("every area needs at least one course".into()));
    }
    if spec.fail_weights.len() != spec.n_students {
        return Err(Error::Config(format!(
            "{} fail weights for {} students",
            spec.fail_weights.len(),
            spec.n_students
        )));
    }
    let mut m = GraphicalModel::new(FeatureKind::Clausal);
    for s in 0..spec.n_students {
        let p: Vec<usize> = spec
            .areas
            .iter()
            .enumerate()
            .map(|(a, &n)| m.add_variable(format!("p{}_{}", s + 1, a + 1), n + 1))
            .collect();
        for (a, &pa) in p.iter().enumerate() {
            m.add_feature(vec![Literal::eq(pa, 0)], Weight::Soft(spec.fail_weights[s]));
            for (b, &pb) in p.iter().enumerate().skip(a + 1) {
                let c = m.add_variable(format!("c{}_{}_{}", s + 1, a + 1, b + 1), 2);
                m.add_feature(vec![Literal::ne(c, 1), Literal::ne(pa, 0)], Weight::Hard);
                m.add_feature(vec![Literal::ne(c, 1), Literal::ne(pb, 0)], Weight::Hard);
                m.add_feature(
                    vec![Literal::eq(c, 1), Literal::eq(pa, 0), Literal::eq(pb, 0)],
                    Weight::Hard,
                );
                m.add_feature(vec![Literal::eq(c, 1)], Weight::Soft(spec.completion_weight));
            }
        }
    }
    Ok(m)
}

/// Where an original variable lives in a binarized model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinaryEncoding {
    /// Boolean variable kept as is.
    Same(usize),
    /// One Boolean per value, indexed by value.
    OneHot(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binarized {
    pub model: GraphicalModel,
    pub encoding: Vec<BinaryEncoding>,
}

impl Binarized {
    pub fn encode(&self, state: &[usize]) -> Vec<usize> {
        let mut out = vec![0; self.model.num_vars()];
        for (var, enc) in self.encoding.iter().enumerate() {
            match enc {
                BinaryEncoding::Same(b) => out[*b] = state[var],
                BinaryEncoding::OneHot(bits) => out[bits[state[var]]] = 1,
            }
        }
        out
    }

    /// `None` unless every one-hot group has exactly one bit set.
    pub fn decode(&self, bits: &[usize]) -> Option<Vec<usize>> {
        self.encoding
            .iter()
            .map(|enc| match enc {
                BinaryEncoding::Same(b) => Some(bits[*b]),
                BinaryEncoding::OneHot(group) => {
                    let mut on = group.iter().enumerate().filter(|(_, &b)| bits[b] == 1);
                    let first = on.next()?.0;
                    on.next().is_none().then_some(first)
                }
            })
            .collect()
    }
}

/// Boolean rewrite: variables with more than two values become one Boolean
/// per value plus hard exactly-one clauses; Boolean variables are kept.
/// Conjunctive models are first rewritten as clauses.
pub fn binarize(model: &GraphicalModel) -> Binarized {
    let src = model.to_clausal();
    let mut out = GraphicalModel::new(FeatureKind::Clausal);
    let mut encoding = Vec::with_capacity(src.num_vars());
    for var in &src.variables {
        if var.cardinality == 2 {
            encoding.push(BinaryEncoding::Same(out.add_variable(var.name.clone(), 2)));
        } else {
            let bits: Vec<usize> = (0..var.cardinality)
                .map(|v| out.add_variable(format!("{}[{}]", var.name, v), 2))
                .collect();
            out.add_feature(bits.iter().map(|&b| Literal::eq(b, 1)).collect(), Weight::Hard);
            for (i, &x) in bits.iter().enumerate() {
                for &y in &bits[i + 1..] {
                    out.add_feature(vec![Literal::ne(x, 1), Literal::ne(y, 1)], Weight::Hard);
                }
            }
            encoding.push(BinaryEncoding::OneHot(bits));
        }
    }
    for f in &src.features {
        let lits = f
            .literals
            .iter()
            .map(|l| match &encoding[l.var] {
                BinaryEncoding::Same(b) => Literal { var: *b, ..*l },
                BinaryEncoding::OneHot(bits) => Literal {
                    var: bits[l.value],
                    value: 1,
                    positive: l.positive,
                },
            })
            .collect();
        out.add_feature(lits, f.weight);
    }
    Binarized { model: out, encoding }
}
