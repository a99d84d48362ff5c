//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use numinv_core::choice::{log_optimal, recover_probability, FullSimplex, RelOracle};
use numinv_core::counterexamples::counterexample_suite;
use numinv_core::decomposition::{
    decompose, h_to_measure, measure_to_h, pair_to_measure, perturbation_convergence, verify_pair,
    OptionalMeasure,
};
use numinv_core::market::{
    consumption_optimality, optimal_consumption, random_time_check, Market, StreamGrid,
};

use numinv_core::mc::{
    doob_identity_check, exp_law_check, min_time_market_check, simulate, Generator, PathEnsemble,
    SimConfig,
};
use numinv_core::tree::{EventTree, RandomTime};
use numinv_core::{rel, FiniteSpace, Outcome};

const SEED: u64 = 20_240_601;
const MC_PATHS: usize = 100_000;
const MC_DT: f64 = 1e-3;
const MC_STEPS: usize = 20_000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn counterexamples() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut flips = true;
    for p in [0.1, 0.3, 0.5] {
        let s = counterexample_suite(p).unwrap();
        let nt = s.family("non_transitive").unwrap().case("f", "h").unwrap();
        worst = worst.max((nt.actual - (1.0 - p) / (2.0 * p)).abs());
        let inc = s.family("incomparable").unwrap();
        worst = worst.max((inc.case("f", "g").unwrap().actual - (1.0 - p).powi(2)).abs());
        worst = worst.max((inc.case("g", "f").unwrap().actual - p * p).abs());
        worst = worst.max(s.max_error());
        flips &= s
            .family("addition")
            .and_then(|f| f.case("one_plus_g", "one_plus_f"))
            .is_some_and(|c| c.actual < 0.0);
    }
    verdict(
        worst <= 1e-12 && flips,
        format!("max error {worst:.2e}, sign flip for p <= 1/2: {flips}"),
    )
}

fn random_space(rng: &mut ChaCha8Rng) -> FiniteSpace {
    let n = rng.random_range(2..=10);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    FiniteSpace::from_weights(w.iter().map(|x| x / s).collect()).unwrap()
}

fn full_simplex() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut gap, mut cert): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for _ in 0..50 {
        let space = random_space(&mut rng);
        let mu: Vec<f64> = (0..space.len())
            .map(|_| rng.random_range(0.1..10.0))
            .collect();
        let s = FullSimplex::new(mu.clone()).unwrap();
        let opt = log_optimal(&space, &s.polytope()).unwrap();
        for ((x, w), m) in opt.outcome.values().iter().zip(space.weights()).zip(&mu) {
            gap = gap.max((x - w / m).abs());
        }
        for v in s.polytope().vertices() {
            let v = Outcome::new(v.clone()).unwrap();
            cert = cert.max(rel(&space, &v, &opt.outcome).unwrap().value());
        }
    }
    verdict(
        gap <= 1e-8 && cert <= 1e-9,
        format!("max |f - w/mu| {gap:.2e}, max vertex rel {cert:.2e}"),
    )
}

fn recovery() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let space = random_space(&mut rng);
        let truth = space.weights().to_vec();
        let oracle = RelOracle { space };
        match recover_probability(&oracle, truth.len(), SEED + k) {
            Ok(r) => {
                for (a, b) in r.weights.iter().zip(&truth) {
                    worst = worst.max((a - b).abs());
                }
            }
            Err(e) => return verdict(false, format!("oracle {k}: {e}")),
        }
    }
    verdict(worst <= 1e-8, format!("max abs error {worst:.2e}"))
}

/// 200 random trees, each with a full-support measure and a sparse one.
struct TreeCase {
    tree: EventTree,
    full: OptionalMeasure,
    sparse: OptionalMeasure,
}

fn random_trees() -> Vec<TreeCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    (0..200)
        .map(|_| {
            let depth = rng.random_range(1..=5);
            let tree = EventTree::random(&mut rng, depth, 3);
            let full = OptionalMeasure::random(&tree, &mut rng, 1.0);
            let density = rng.random_range(0.1..1.0);
            let sparse = OptionalMeasure::random(&tree, &mut rng, density);
            TreeCase { tree, full, sparse }
        })
        .collect()
}

fn canonical_pairs(suite: &[TreeCase]) -> Verdict {
    let (mut worst, mut drift, mut round_trip): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut all = true;
    for case in suite {
        let tree = &case.tree;
        for q in [&case.full, &case.sparse] {
            let h = measure_to_h(tree, q).unwrap();
            let pair = decompose(tree, &h).unwrap();
            let rep = verify_pair(tree, &h, &pair.l, &pair.k).unwrap();
            all &= rep.passed;
            worst = worst.max(rep.worst());
            drift = drift.max(rep.martingale_drift);
            for (a, b) in pair_to_measure(tree, &pair).iter().zip(q.masses()) {
                round_trip = round_trip.max((a - b).abs());
            }
            for (a, b) in h_to_measure(tree, &h).iter().zip(q.masses()) {
                round_trip = round_trip.max((a - b).abs());
            }
        }
    }
    verdict(
        all && drift < 1e-10 && round_trip <= 1e-12,
        format!("worst invariant {worst:.2e}, drift {drift:.2e}, round trip {round_trip:.2e}"),
    )
}

fn worst_gap(tree: &EventTree, q: &OptionalMeasure) -> (bool, f64) {
    let h = measure_to_h(tree, q).unwrap();
    let t = perturbation_convergence(tree, &h, &[1e-2, 1e-3, 1e-4]).unwrap();
    (t.monotone, t.rows.last().unwrap().k_gap)
}

/// Gaps shrink like `eps / L` at the least alive node, so sparse measures with
/// nearly dead nodes converge slowly; their gap is reported but not judged.
fn perturbation(suite: &[TreeCase]) -> Verdict {
    let mut monotone = true;
    let (mut last, mut sparse_last): (f64, f64) = (0.0, 0.0);
    for case in suite {
        let (m, g) = worst_gap(&case.tree, &case.full);
        monotone &= m;
        last = last.max(g);
        let (m, g) = worst_gap(&case.tree, &case.sparse);
        monotone &= m;
        sparse_last = sparse_last.max(g);
    }
    verdict(
        monotone && last < 1e-3,
        format!(
            "monotone: {monotone}, worst gap at 1e-4: {last:.2e} (sparse measures {sparse_last:.2e})"
        ),
    )
}

/// Random markets whose tree branches somewhere, so non-stopping times exist.
fn random_markets() -> Vec<(Market, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut out = Vec::new();
    while out.len() < 20 {
        let m = Market::random(&mut rng, 4, 3);
        let t = m.tree();
        if (0..t.len()).any(|i| t.children(i).len() > 1) {
            let child = ChaCha8Rng::seed_from_u64(rng.random());
            out.push((m, child));
        }
    }
    out
}

fn consumption(markets: &mut [(Market, ChaCha8Rng)]) -> Verdict {
    let grid = StreamGrid {
        cap: 9_900,
        random_streams: 100,
        ..StreamGrid::default()
    };
    let mut worst = f64::NEG_INFINITY;
    let mut most = 0;
    for (k, (m, rng)) in markets.iter_mut().enumerate() {
        let q = OptionalMeasure::random(m.tree(), rng, 0.5);
        let opt = optimal_consumption(m, &q, 1.0).unwrap();
        let r = consumption_optimality(m, &opt, &grid, SEED + k as u64, 1e-9).unwrap();
        worst = worst.max(r.worst_rel).max(r.self_rel.abs());
        most = most.max(r.streams_tested);
    }
    verdict(
        worst <= 1e-9 && most <= 10_000,
        format!("max rel {worst:.2e}, at most {most} streams per market"),
    )
}

fn random_times(markets: &mut [(Market, ChaCha8Rng)]) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for (k, (m, rng)) in markets.iter_mut().enumerate() {
        let tree = m.tree();
        let mut made = 0;
        while made < 5 {
            let times: Vec<usize> = tree
                .leaves()
                .iter()
                .map(|_| rng.random_range(0..=tree.depth()))
                .collect();
            let t = RandomTime::new(tree, times).unwrap();
            if t.is_stopping_time(tree) {
                continue;
            }
            let r = random_time_check(m, &t, 0, SEED + k as u64, 1e-9).unwrap();
            worst = worst.max(r.worst_ratio);
            made += 1;
            count += 1;
        }
    }
    verdict(
        worst <= 1.0 + 1e-9,
        format!(
            "{count} non-stopping times, max E[X_T / X_hat_T] - 1 = {:.2e}",
            worst - 1.0
        ),
    )
}

fn ensemble(generator: Generator, fractions: Vec<f64>, seed: u64) -> PathEnsemble {
    let mut c = SimConfig::new(generator, MC_PATHS, MC_STEPS, MC_DT, seed);
    c.fractions = fractions;
    simulate(&c).unwrap()
}

fn doob(gbm: &PathEnsemble) -> Verdict {
    let t = doob_identity_check(gbm, &[2.0, 4.0, 8.0], 0.02).unwrap();
    let cells: Vec<String> = t
        .rows
        .iter()
        .map(|r| format!("P[L* > {}] = {:.4}", r.gamma, r.empirical))
        .collect();
    verdict(t.passed, cells.join(", "))
}

fn exp_law(gbm: &PathEnsemble, bessel: &PathEnsemble) -> Verdict {
    let a = exp_law_check(gbm, 0.03).unwrap();
    let b = exp_law_check(bessel, 0.03).unwrap();
    verdict(
        a.passed && b.passed,
        format!(
            "gbm mean {:.4} ks {:.4}; bessel mean {:.4} ks {:.4}; bound {:.4}",
            a.mean.mean, a.ks, b.mean.mean, b.ks, a.ks_bound
        ),
    )
}

fn downturn(bessel: &PathEnsemble) -> Verdict {
    let t = min_time_market_check(bessel, 0.02).unwrap();
    let cash = t.rows.iter().find(|r| r.fraction == 0.0).unwrap();
    let cash_exact = cash.mean.mean == 1.0;
    let mixed: Vec<String> = t
        .rows
        .iter()
        .filter(|r| r.fraction > 0.0 && r.fraction < 1.0)
        .map(|r| format!("{:.4}", r.mean.mean))
        .collect();
    verdict(
        t.passed && cash_exact,
        format!(
            "E[S_T / S_0] = {:.4}, cash {}, mixed [{}]",
            t.buy_and_hold.mean,
            cash.mean.mean,
            mixed.join(", ")
        ),
    )
}

fn report(id: usize, name: &str, started: Instant, o: &Verdict) -> bool {
    println!(
        "{} criterion {id:>2} {name:<28} {:>7.2}s  {}",
        if o.passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        o.detail
    );
    o.passed
}

fn main() -> ExitCode {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "counterexamples", t, &counterexamples());
    let t = Instant::now();
    ok &= report(2, "full-simplex optimum", t, &full_simplex());
    let t = Instant::now();
    ok &= report(3, "probability recovery", t, &recovery());
    let suite = random_trees();
    let t = Instant::now();
    ok &= report(4, "canonical pair invariants", t, &canonical_pairs(&suite));
    let t = Instant::now();
    ok &= report(5, "perturbation convergence", t, &perturbation(&suite));
    let mut markets = random_markets();
    let t = Instant::now();
    ok &= report(6, "consumption optimality", t, &consumption(&mut markets));
    let t = Instant::now();
    ok &= report(7, "random-time sampling", t, &random_times(&mut markets));
    let t = Instant::now();
    let gbm = ensemble(Generator::GbmMartingale { sigma: 1.0 }, Vec::new(), SEED);
    ok &= report(8, "doob maximal identity", t, &doob(&gbm));
    let t = Instant::now();
    let bessel = ensemble(
        Generator::InverseBessel3,
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
        SEED + 1,
    );
    ok &= report(9, "exponential law", t, &exp_law(&gbm, &bessel));
    let t = Instant::now();
    ok &= report(10, "market downturn", t, &downturn(&bessel));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
