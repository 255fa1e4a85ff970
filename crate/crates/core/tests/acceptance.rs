//! Acceptance criteria, one PASS/FAIL line each.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vvsym::autograph::{automorphism_generators, variable_symmetries, vv_symmetries, ColoredGraph, SearchConfig};
use vvsym::cli::{cmd_run, ExperimentSpec, RunReport};
use vvsym::domains::{
    gen_curriculum, gen_ring, gen_ring_with_weights, toy_g1, toy_g2, toy_g3_nec, xor_model, CurriculumSpec, RingSpec,
};
use vvsym::model::{exact_distribution, ExactOptions, GraphicalModel, StateSpace, DEFAULT_HARD_WEIGHT};
use vvsym::permgroup::GeneratorSet;
use vvsym::reduction::{k_ratio, nec_symmetries};
use vvsym::samplers::{
    explicit_kernel, nec_mh_move, nec_orbital_step, orbital_generators, prepare, Algorithm, Gibbs, OrbitMover,
    OrbitStrategy, Symmetries, DEFAULT_GROUP_CAP,
};
use vvsym::symmetry::{
    classify_taxonomy, embed_variable_symmetry, state_orbits, TaxonomyLabel, VvPermutation, VvSet,
    DEFAULT_RENAMING_CAP, DEFAULT_TAXONOMY_GROUP_CAP,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn ln(x: f64) -> f64 {
    x.ln()
}

fn suite() -> Vec<(&'static str, GraphicalModel)> {
    let ring = |n| {
        gen_ring(&RingSpec {
            n_people: n,
            w_male: ln(2.0),
            w_female: ln(3.0),
            rename_prob: 0.0,
            seed: 0,
        })
        .unwrap()
    };
    vec![
        ("toy_g1", toy_g1(ln(2.0), ln(3.0))),
        ("toy_g2", toy_g2(ln(2.0), ln(3.0))),
        ("toy_g3_nec", toy_g3_nec(ln(2.0))),
        ("ring4", ring(4)),
        ("ring8", ring(8)),
        (
            "curriculum2",
            gen_curriculum(&CurriculumSpec::new(2, vec![2, 3], 0)).unwrap(),
        ),
    ]
}

fn vv_perms(model: &GraphicalModel, gens: &GeneratorSet) -> Vec<VvPermutation> {
    let set = VvSet::of(model);
    gens.generators()
        .iter()
        .map(|p| VvPermutation::new(set.clone(), p.clone()))
        .collect()
}

/// Every element of every group preserves the exact joint probability.
fn criterion_1() -> Outcome {
    let cfg = SearchConfig::default();
    let mut checked = 0usize;
    for (name, m) in suite() {
        let dist = exact_distribution(&m, ExactOptions::default()).map_err(|e| e.to_string())?;
        let space = StateSpace::of(&m, 1 << 16).map_err(|e| e.to_string())?;
        let variable = if m.is_boolean() {
            let g = variable_symmetries(&m, cfg).map_err(|e| e.to_string())?;
            g.generators()
                .iter()
                .map(|t| embed_variable_symmetry(t, &m))
                .collect::<vvsym::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?
        } else {
            vv_perms(&m, &orbital_generators(&m, cfg).map_err(|e| e.to_string())?)
        };
        let vv = vv_perms(&m, &vv_symmetries(&m, cfg).map_err(|e| e.to_string())?);
        for (kind, gens) in [("variable", variable), ("vv", vv)] {
            let group = GeneratorSet::new(
                VvSet::of(&m).len(),
                gens.iter().map(|g| g.permutation().clone()).collect(),
            )
            .map_err(|e| e.to_string())?;
            let set = VvSet::of(&m);
            for p in group.closure(DEFAULT_GROUP_CAP).map_err(|e| e.to_string())? {
                let phi = VvPermutation::new(set.clone(), p);
                for s in space.states() {
                    let t = phi.apply_to_state(&s).map_err(|e| e.to_string())?;
                    let (ps, pt) = (dist.probability(&s), dist.probability(&t));
                    if (ps - pt).abs() > 1e-12 {
                        return Err(format!("{name} {kind}: P({s:?})={ps} but P({t:?})={pt}"));
                    }
                    checked += 1;
                }
            }
        }
        let nec = nec_symmetries(&m, cfg).map_err(|e| e.to_string())?;
        for orbit in nec.state_orbits(&space).map_err(|e| e.to_string())? {
            let p0 = dist.probs[orbit[0]];
            for &s in &orbit {
                if (dist.probs[s] - p0).abs() > 1e-12 {
                    return Err(format!("{name} nec: orbit {orbit:?} not equiprobable"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} state images checked"))
}

fn criterion_2() -> Outcome {
    let m = toy_g1(ln(2.0), ln(3.0));
    let cfg = SearchConfig::default();
    let var = variable_symmetries(&m, cfg).map_err(|e| e.to_string())?;
    let var_order = var.order(DEFAULT_GROUP_CAP).map_err(|e| e.to_string())?;
    let vv = vv_perms(&m, &vv_symmetries(&m, cfg).map_err(|e| e.to_string())?);
    let space = StateSpace::of(&m, 16).unwrap();
    let orbits = state_orbits(&vv, &space).map_err(|e| e.to_string())?;
    let target = vec![space.encode(&[0, 0]), space.encode(&[1, 1])];
    check(
        var_order == 1 && orbits.contains(&target),
        format!("variable group order 1; vv orbits {orbits:?}"),
        format!("variable order {var_order}; vv orbits {orbits:?}"),
    )
}

fn criterion_3() -> Outcome {
    let m = toy_g3_nec(ln(2.0));
    let nec = nec_symmetries(&m, SearchConfig::default()).map_err(|e| e.to_string())?;
    let space = StateSpace::of(&m, 16).unwrap();
    let got: BTreeSet<BTreeSet<Vec<usize>>> = nec
        .state_orbits(&space)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|o| o.into_iter().map(|s| space.decode(s)).collect())
        .collect();
    let want: BTreeSet<BTreeSet<Vec<usize>>> = [
        vec![vec![0, 0]],
        vec![vec![1, 0], vec![0, 1], vec![0, 2]],
        vec![vec![1, 1], vec![1, 2]],
    ]
    .into_iter()
    .map(|o| o.into_iter().collect())
    .collect();
    check(got == want, format!("{got:?}"), format!("got {got:?}"))
}

fn criterion_4() -> Outcome {
    let m = toy_g3_nec(ln(2.0));
    let nec = nec_symmetries(&m, SearchConfig::default()).map_err(|e| e.to_string())?;
    let k = k_ratio(&m, &nec.reduced, ExactOptions::default()).map_err(|e| e.to_string())?;
    // partition functions by direct enumeration
    let z = |model: &GraphicalModel| -> f64 {
        StateSpace::of(model, 64)
            .unwrap()
            .states()
            .map(|s| model.log_weight(&s).exp())
            .sum()
    };
    let oracle = z(&m) / z(&nec.reduced.model);
    check(
        (k - 5.0 / 3.0).abs() < 1e-9 && (oracle - 5.0 / 3.0).abs() < 1e-9,
        format!("k = {k}, enumerated Z ratio = {oracle}"),
        format!("k = {k}, enumerated Z ratio = {oracle}"),
    )
}

fn criterion_5() -> Outcome {
    let m = toy_g3_nec(ln(2.0));
    let syms =
        prepare(&m, Algorithm::NecOrbital, SearchConfig::default(), DEFAULT_GROUP_CAP).map_err(|e| e.to_string())?;
    let Symmetries::Nec { reduced, group } = &syms else {
        return Err("no nec symmetries".into());
    };
    let n = 10_000;
    let gibbs = Gibbs::new(&m, DEFAULT_HARD_WEIGHT);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mover = OrbitMover::new(group, OrbitStrategy::ExactBfs, &mut rng);
    let mut state = vec![0, 0];
    let (mut expected, mut accepted) = (0.0, 0usize);
    for _ in 0..n {
        let o = nec_orbital_step(&gibbs, reduced, group, &mut mover, &mut state, &mut rng, 100);
        expected += o.acceptance;
        accepted += usize::from(o.accepted);
    }
    let chain_gap = (accepted as f64 - expected).abs() / n as f64;
    // proposals out of the reduced state (a=0, b=1), where c(u')=2
    let (mut hits, mut acc) = (0usize, 0usize);
    let mut bad_ratio = false;
    for _ in 0..n {
        let o = nec_mh_move(reduced, group, &mut mover, &[0, 1], &mut rng, 100);
        if o.proposed == [1, 0] {
            bad_ratio |= o.acceptance != 0.5;
            hits += 1;
            acc += usize::from(o.accepted);
        } else {
            bad_ratio |= o.acceptance != 1.0 || !o.accepted;
        }
    }
    let rate = acc as f64 / hits as f64;
    check(
        chain_gap <= 0.02 && (rate - 0.5).abs() <= 0.02 && !bad_ratio,
        format!("chain |accepted - Σmin(1,c''/c')|/n = {chain_gap:.4}; c''/c' = 1/2 branch rate {rate:.4} over {hits}"),
        format!("chain gap {chain_gap:.4}, branch rate {rate:.4} over {hits}, ratio mismatch {bad_ratio}"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, m) in suite() {
        let p = exact_distribution(&m, ExactOptions::soft(DEFAULT_HARD_WEIGHT)).map_err(|e| e.to_string())?;
        for a in Algorithm::ALL {
            let syms = prepare(&m, a, SearchConfig::default(), DEFAULT_GROUP_CAP).map_err(|e| e.to_string())?;
            let k = explicit_kernel(&m, &syms, DEFAULT_HARD_WEIGHT).map_err(|e| e.to_string())?;
            let r = k.fixed_point_residual(&p.probs);
            if r.is_nan() || r >= 1e-10 {
                return Err(format!("{a} on {name}: residual {r:e}"));
            }
            worst = worst.max(r);
        }
    }
    Ok(format!("max residual {worst:e}"))
}

const KL_THRESHOLD: f64 = 0.01;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn fmt_steps(s: Option<u64>) -> String {
    s.map_or("inf".into(), |s| s.to_string())
}

fn medians(report: &RunReport, algos: &[Algorithm]) -> Vec<Option<u64>> {
    algos
        .iter()
        .map(|&a| report.median_steps_to(a, &SEEDS, KL_THRESHOLD))
        .collect()
}

fn strictly_fewer(a: Option<u64>, b: Option<u64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    }
}

const RING_STEPS: u64 = 100_000;
const RING_SNAPSHOT: u64 = 50;
const CURRICULUM_STEPS: u64 = 1_000_000;
const CURRICULUM_SNAPSHOT: u64 = 1_000;
const CURRICULUM_HARD_WEIGHT: f64 = 3.0;
const CURRICULUM_ORBIT_CAP: usize = 1_000;

fn renamed_ring() -> GraphicalModel {
    gen_ring(&RingSpec {
        n_people: 16,
        w_male: ln(2.0),
        w_female: ln(3.0),
        rename_prob: 0.3,
        seed: 7,
    })
    .unwrap()
}

fn criterion_7() -> Outcome {
    let algos = [Algorithm::VvOrbital, Algorithm::Orbital, Algorithm::Gibbs];
    let mut spec = ExperimentSpec::new(algos.to_vec(), RING_STEPS, SEEDS.to_vec());
    spec.snapshot_every = RING_SNAPSHOT;
    spec.timing = false;
    let ring = cmd_run(&renamed_ring(), &spec, SearchConfig::default()).map_err(|e| e.to_string())?;
    let r = medians(&ring, &algos);

    let algos_c = [Algorithm::NecOrbital, Algorithm::Orbital, Algorithm::Gibbs];
    let curriculum = gen_curriculum(&CurriculumSpec::new(4, vec![2, 3, 4], 0)).unwrap();
    let mut spec = ExperimentSpec::new(algos_c.to_vec(), CURRICULUM_STEPS, SEEDS.to_vec());
    spec.snapshot_every = CURRICULUM_SNAPSHOT;
    spec.hard_weight = CURRICULUM_HARD_WEIGHT;
    spec.orbit_cap = CURRICULUM_ORBIT_CAP;
    spec.timing = false;
    let cur = cmd_run(&curriculum, &spec, SearchConfig::default()).map_err(|e| e.to_string())?;
    let c = medians(&cur, &algos_c);

    let detail = format!(
        "ring: vv-orbital {} orbital {} gibbs {}; curriculum: nec-orbital {} orbital {} gibbs {}",
        fmt_steps(r[0]),
        fmt_steps(r[1]),
        fmt_steps(r[2]),
        fmt_steps(c[0]),
        fmt_steps(c[1]),
        fmt_steps(c[2]),
    );
    let ok = strictly_fewer(r[0], r[1])
        && strictly_fewer(r[0], r[2])
        && strictly_fewer(c[0], c[1])
        && strictly_fewer(c[0], c[2]);
    check(ok, detail.clone(), detail)
}

fn criterion_8() -> Outcome {
    let weights: Vec<f64> = (0..16).map(|i| 0.2 + 0.1 * i as f64).collect();
    let m = gen_ring_with_weights(&weights, 0.0, 3).map_err(|e| e.to_string())?;
    let vv = vv_symmetries(&m, SearchConfig::default()).map_err(|e| e.to_string())?;
    let algos = [Algorithm::VvOrbital, Algorithm::Gibbs];
    let mut spec = ExperimentSpec::new(algos.to_vec(), RING_STEPS, SEEDS.to_vec());
    spec.snapshot_every = RING_SNAPSHOT;
    spec.timing = false;
    let report = cmd_run(&m, &spec, SearchConfig::default()).map_err(|e| e.to_string())?;
    let r = medians(&report, &algos);
    let detail = format!(
        "vv group order {}; vv-orbital {} gibbs {}",
        vv.order(DEFAULT_GROUP_CAP).unwrap_or(0),
        fmt_steps(r[0]),
        fmt_steps(r[1])
    );
    let ok = match (r[0], r[1]) {
        (Some(v), Some(g)) => (v as f64 - g as f64).abs() <= 0.1 * g as f64,
        _ => false,
    };
    check(ok, detail.clone(), detail)
}

/// Color-preserving automorphisms by backtracking over all bijections.
fn brute_force_automorphisms(g: &ColoredGraph) -> BTreeSet<Vec<usize>> {
    fn extend(g: &ColoredGraph, image: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut BTreeSet<Vec<usize>>) {
        let v = image.len();
        if v == g.n_nodes() {
            out.insert(image.clone());
            return;
        }
        for w in 0..g.n_nodes() {
            if used[w] || g.colors()[v] != g.colors()[w] {
                continue;
            }
            if (0..v).any(|u| g.has_edge(u, v) != g.has_edge(image[u], w)) {
                continue;
            }
            image.push(w);
            used[w] = true;
            extend(g, image, used, out);
            used[w] = false;
            image.pop();
        }
    }
    let mut out = BTreeSet::new();
    extend(g, &mut Vec::new(), &mut vec![false; g.n_nodes()], &mut out);
    out
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut nontrivial = 0;
    for trial in 0..200 {
        let n = rng.gen_range(1..=9);
        let n_colors = rng.gen_range(1..=3);
        let density = rng.gen_range(0.1..0.9);
        let colors: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_colors)).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    edges.push((u, v));
                }
            }
        }
        let g = ColoredGraph::from_edges(colors, &edges).map_err(|e| e.to_string())?;
        let gens = automorphism_generators(&g).map_err(|e| e.to_string())?;
        let closure: BTreeSet<Vec<usize>> = gens
            .closure(400_000)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| p.as_slice().to_vec())
            .collect();
        let brute = brute_force_automorphisms(&g);
        if closure != brute {
            return Err(format!(
                "graph {trial} (n={n}): engine group order {} vs brute force {}",
                closure.len(),
                brute.len()
            ));
        }
        nontrivial += usize::from(brute.len() > 1);
    }
    Ok(format!("200 graphs agree, {nontrivial} with nontrivial groups"))
}

fn group_label(m: &GraphicalModel) -> Result<TaxonomyLabel, String> {
    let gens = vv_perms(
        m,
        &vv_symmetries(m, SearchConfig::default()).map_err(|e| e.to_string())?,
    );
    classify_taxonomy(&gens, m, DEFAULT_RENAMING_CAP, DEFAULT_TAXONOMY_GROUP_CAP)
        .map(|t| t.group)
        .map_err(|e| e.to_string())
}

fn criterion_10() -> Outcome {
    let g1 = toy_g1(ln(2.0), ln(3.0));
    let l1 = group_label(&g1)?;
    let lx = group_label(&xor_model(ln(2.0)))?;
    // equal weights on the four conjunctions
    let l2 = group_label(&toy_g2(ln(2.0), ln(2.0)))?;
    let witness = match &l1 {
        TaxonomyLabel::SrvCount(r) => r.describe(&g1),
        _ => String::new(),
    };
    let detail = format!(
        "toy_g1 {} ({witness}); xor {}; toy_g2 {}",
        l1.name(),
        lx.name(),
        l2.name()
    );
    let ok = witness == "b.0->1 b.1->0" && lx == TaxonomyLabel::UrvCount && l2 == TaxonomyLabel::EquicardinalNoncount;
    check(ok, detail.clone(), detail)
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("1 symmetry soundness", criterion_1),
        ("2 non-count detection", criterion_2),
        ("3 nec orbits", criterion_3),
        ("4 reduction ratio", criterion_4),
        ("5 mh acceptance", criterion_5),
        ("6 stationarity", criterion_6),
        ("7 convergence ordering", criterion_7),
        ("8 no-symmetry overhead", criterion_8),
        ("9 automorphism engine", criterion_9),
        ("10 taxonomy", criterion_10),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed.push(name);
                format!("FAIL criterion {name}: {detail} [{secs:.1}s]")
            }
        };
        // bypasses output capture
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
