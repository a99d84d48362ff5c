//! Scenario-driven batch runs with machine-readable reports.

mod report;
mod scenario;

pub use report::{Cell, CheckRecord, Report, Status, Table};
pub use scenario::{CheckKind, CheckSpec, McSpec, Module, Scenario, SCENARIO_VERSION};

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::choice::{
    log_optimal, recover_probability, simplex_classify, FullSimplex, Polytope, RelOracle,
};
use crate::counterexamples::{counterexample_suite, insurance_for_addition_pair};
use crate::decomposition::{
    decompose, h_to_measure, measure_to_h, pair_to_measure, perturbation_convergence, validate_h,
    verify_pair, OptionalMeasure,
};
use crate::error::{Error, Result};
use crate::market::{
    consumption_optimality, numeraire_portfolio, optimal_consumption, random_time_check, Market,
};
use crate::mc::{
    doob_identity_check, exp_law_check, min_time_market_check, simulate, PathEnsemble,
};
use crate::preference::{insurance_level, prefers, rel};
use crate::space::{FiniteSpace, Outcome};
use crate::tree::{dual_optional_projection, EventTree, NodeProcess, RandomTime};

/// Run-time flags.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Restrict to checks of one module.
    pub module: Option<Module>,
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Multiplies every tolerance.
    pub tol_scale: f64,
    /// Evaluate checks concurrently.
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            module: None,
            seed: None,
            tol_scale: 1.0,
            parallel: false,
        }
    }
}

/// Inputs resolved from a scenario.
struct Context {
    space: Option<FiniteSpace>,
    outcomes: BTreeMap<String, Outcome>,
    polytopes: BTreeMap<String, Polytope>,
    simplices: BTreeMap<String, FullSimplex>,
    tree: Option<EventTree>,
    h: Option<NodeProcess>,
    measure: Option<OptionalMeasure>,
    time: Option<RandomTime>,
    market: Option<Market>,
    ensembles: BTreeMap<String, PathEnsemble>,
}

impl Context {
    fn build(s: &Scenario, selected: &[&CheckSpec], seed: u64) -> Result<Self> {
        let outcomes = s
            .outcomes
            .iter()
            .map(|(k, v)| {
                let o = Outcome::new(v.clone())
                    .map_err(|e| Error::Scenario(format!("outcome {k:?}: {e}")))?;
                Ok((k.clone(), o))
            })
            .collect::<Result<_>>()?;
        let tree = s.tree.as_ref().map(|t| t.build()).transpose()?;
        let (mut h, mut measure, mut time) = (None, None, None);
        if let Some(t) = &tree {
            if let Some(q) = &s.optional_measure {
                let q = OptionalMeasure::new(t, q.clone())?;
                h = Some(measure_to_h(t, &q)?);
                measure = Some(q);
            } else if let Some(v) = &s.h {
                let hp = NodeProcess::new(t, v.clone())?;
                validate_h(t, &hp)?;
                measure = Some(OptionalMeasure::new(t, h_to_measure(t, &hp))?);
                h = Some(hp);
            } else if let Some(times) = &s.random_time {
                let rt = RandomTime::new(t, times.clone())?;
                let hp = dual_optional_projection(t, &rt)?;
                measure = Some(OptionalMeasure::new(t, h_to_measure(t, &hp))?);
                h = Some(hp);
                time = Some(rt);
            }
        }
        let market = match (&s.market, &tree) {
            (Some(m), Some(t)) => Some(m.build(t)?),
            _ => None,
        };
        let mut ensembles = BTreeMap::new();
        for c in selected {
            if let Some(name) = c.kind.ensemble() {
                if !ensembles.contains_key(name) {
                    let cfg = s.mc[name].config(seed)?;
                    ensembles.insert(name.to_string(), simulate(&cfg)?);
                }
            }
        }
        Ok(Context {
            space: s.space.clone(),
            outcomes,
            polytopes: s.polytopes.clone(),
            simplices: s.simplices.clone(),
            tree,
            h,
            measure,
            time,
            market,
            ensembles,
        })
    }

    fn space(&self) -> &FiniteSpace {
        self.space.as_ref().expect("validated")
    }

    fn outcome(&self, name: &str) -> &Outcome {
        &self.outcomes[name]
    }

    fn tree(&self) -> &EventTree {
        self.tree.as_ref().expect("validated")
    }

    fn h(&self) -> &NodeProcess {
        self.h.as_ref().expect("validated")
    }

    fn market(&self) -> &Market {
        self.market.as_ref().expect("validated")
    }
}

/// Result of evaluating one check.
struct Evaluation {
    passed: bool,
    slack: Option<f64>,
    values: Value,
    table: Option<Table>,
}

impl Evaluation {
    fn new(passed: bool, slack: Option<f64>, values: impl Serialize) -> Result<Self> {
        Ok(Evaluation {
            passed,
            slack: slack.filter(|s| s.is_finite()),
            values: serde_json::to_value(values)?,
            table: None,
        })
    }

    fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }
}

fn deviation(actual: f64, expected: f64) -> f64 {
    if actual == expected {
        0.0
    } else {
        (actual - expected).abs()
    }
}

fn evaluate(ctx: &Context, kind: &CheckKind, seed: u64, scale: f64) -> Result<Evaluation> {
    use CheckKind::*;
    match kind {
        Counterexamples { ps, tol } => {
            let tol = tol * scale;
            let mut table = Table::new(&[
                "p",
                "family",
                "numerator",
                "denominator",
                "expected",
                "actual",
            ]);
            let mut worst = 0.0f64;
            let mut flips = true;
            let mut insurance = Vec::new();
            for &p in ps {
                let suite = counterexample_suite(p)?;
                worst = worst.max(suite.max_error());
                for fam in &suite.families {
                    for c in &fam.cases {
                        table.push(vec![
                            p.into(),
                            fam.name.as_str().into(),
                            c.numerator.as_str().into(),
                            c.denominator.as_str().into(),
                            c.expected.into(),
                            c.actual.into(),
                        ]);
                    }
                }
                if let Some(add) = suite.family("addition") {
                    let flip = add
                        .case("one_plus_g", "one_plus_f")
                        .expect("present")
                        .actual;
                    flips &= flip < 0.0;
                    let (n, value) = insurance_for_addition_pair(p)?;
                    insurance.push(json!({"p": p, "level": n, "insured_rel": value}));
                }
            }
            let values =
                json!({"max_error": worst, "addition_flips": flips, "insurance": insurance});
            Ok(
                Evaluation::new(worst <= tol && flips, Some(tol - worst), values)?
                    .with_table(table),
            )
        }
        Rel {
            f,
            g,
            expected,
            tol,
        } => {
            let v = rel(ctx.space(), ctx.outcome(f), ctx.outcome(g))?.value();
            let values = json!({"rel": v, "expected": expected});
            match expected {
                Some(e) => {
                    let tol = tol * scale;
                    let d = deviation(v, *e);
                    Evaluation::new(d <= tol, Some(tol - d), values)
                }
                None => Evaluation::new(true, None, values),
            }
        }
        Preference { f, g, expected } => {
            let p = prefers(ctx.space(), ctx.outcome(f), ctx.outcome(g))?;
            Evaluation::new(
                p == *expected,
                None,
                json!({"preference": p, "expected": expected}),
            )
        }
        Insurance { f, g, expected } => {
            let n = insurance_level(ctx.space(), ctx.outcome(f), ctx.outcome(g))?;
            let ok = expected.is_none_or(|e| e == n);
            Evaluation::new(ok, None, json!({"level": n, "expected": expected}))
        }
        LogOptimal {
            polytope,
            expected,
            tol,
        } => {
            let opt = log_optimal(ctx.space(), &ctx.polytopes[polytope])?;
            let cert_slack = crate::choice::optimizer::CERT_TOL * scale - opt.certificate;
            let (passed, slack) = match expected {
                Some(e) => {
                    if e.len() != opt.outcome.len() {
                        return Err(Error::Dimension {
                            expected: opt.outcome.len(),
                            got: e.len(),
                        });
                    }
                    let tol = tol * scale;
                    let d = opt
                        .outcome
                        .values()
                        .iter()
                        .zip(e)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    (d <= tol && cert_slack >= 0.0, (tol - d).min(cert_slack))
                }
                None => (cert_slack >= 0.0, cert_slack),
            };
            Evaluation::new(passed, Some(slack), &opt)
        }
        SimplexClass {
            simplex,
            outcome,
            expected,
        } => {
            let pos = simplex_classify(ctx.space(), &ctx.simplices[simplex], ctx.outcome(outcome))?;
            Evaluation::new(pos.class == *expected, None, &pos)
        }
        Recover { tol } => {
            let space = ctx.space();
            let oracle = RelOracle {
                space: space.clone(),
            };
            let rec = recover_probability(&oracle, space.len(), seed)?;
            let err = rec
                .weights
                .iter()
                .zip(space.weights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let tol = tol * scale;
            Evaluation::new(
                err <= tol,
                Some(tol - err),
                json!({"recovery": rec, "max_abs_error": err}),
            )
        }
        VerifyPair { tol } => {
            let tree = ctx.tree();
            let h = ctx.h();
            let pair = decompose(tree, h)?;
            let rep = verify_pair(tree, h, &pair.l, &pair.k)?;
            let q = ctx.measure.as_ref().expect("validated");
            let round_trip = pair_to_measure(tree, &pair)
                .iter()
                .zip(q.masses())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let tol = tol * scale;
            let rt_tol = 1e-12 * scale;
            let worst = rep.worst();
            let mut table = Table::new(&["node", "time", "prob", "h", "l", "k", "dk"]);
            for i in 0..tree.len() {
                table.push(vec![
                    (i as f64).into(),
                    (tree.time(i) as f64).into(),
                    tree.prob(i).into(),
                    h[i].into(),
                    pair.l[i].into(),
                    pair.k[i].into(),
                    pair.dk[i].into(),
                ]);
            }
            Ok(Evaluation::new(
                rep.passed && worst <= tol && round_trip <= rt_tol,
                Some((tol - worst).min(rt_tol - round_trip)),
                json!({"report": rep, "measure_round_trip_error": round_trip}),
            )?
            .with_table(table))
        }
        Perturbation { eps, tol } => {
            let t = perturbation_convergence(ctx.tree(), ctx.h(), eps)?;
            let tol = tol * scale;
            let last = t.rows.last().map_or(0.0, |r| r.k_gap);
            let mut table = Table::new(&["eps", "k_gap", "l_gap"]);
            for r in &t.rows {
                table.push(vec![r.eps.into(), r.k_gap.into(), r.l_gap.into()]);
            }
            Ok(Evaluation::new(t.monotone && last <= tol, Some(tol - last), &t)?.with_table(table))
        }
        Numeraire { tol } => {
            let m = ctx.market();
            let l = match &ctx.h {
                Some(h) => decompose(m.tree(), h)?.l,
                None => NodeProcess::constant(m.tree(), 1.0),
            };
            let np = numeraire_portfolio(m, &l)?;
            let tol = tol * scale;
            let mut table = Table::new(&["node", "l", "wealth", "fractions"]);
            for i in 0..m.tree().len() {
                let f: Vec<String> = np.fractions[i].iter().map(|x| format!("{x}")).collect();
                table.push(vec![
                    (i as f64).into(),
                    l[i].into(),
                    np.wealth[i].into(),
                    f.join(" ").into(),
                ]);
            }
            Ok(Evaluation::new(
                np.certificate <= tol,
                Some(tol - np.certificate),
                json!({"certificate": np.certificate}),
            )?
            .with_table(table))
        }
        ConsumptionOptimality { grid, x, tol } => {
            let m = ctx.market();
            let q = ctx.measure.as_ref().expect("validated");
            let opt = optimal_consumption(m, q, *x)?;
            let tol = tol * scale;
            let rep = consumption_optimality(m, &opt, grid, seed, tol)?;
            let worst = rep.worst_rel.max(rep.self_rel.abs());
            Evaluation::new(rep.passed, Some(tol - worst), &rep)
        }
        RandomTimeSampling { strategies, tol } => {
            let time = ctx.time.as_ref().expect("validated");
            let tol = tol * scale;
            let rep = random_time_check(ctx.market(), time, *strategies, seed, tol)?;
            Evaluation::new(rep.passed, Some(1.0 + tol - rep.worst_ratio), &rep)
        }
        TerminalMean {
            ensemble,
            expected,
            below,
        } => {
            let m = ctx.ensembles[ensemble].terminal_mean();
            let band = 3.0 * m.se * scale;
            let (passed, slack) = if *below {
                let s = expected - (m.mean + band);
                (s > 0.0, s)
            } else {
                let s = band - (m.mean - expected).abs();
                (s >= 0.0, s)
            };
            Evaluation::new(
                passed,
                Some(slack),
                json!({"estimate": m, "expected": expected, "below": below}),
            )
        }
        Doob {
            ensemble,
            gammas,
            tol,
        } => {
            let t = doob_identity_check(&ctx.ensembles[ensemble], gammas, tol * scale)?;
            let mut table = Table::new(&["gamma", "empirical", "target", "se"]);
            for r in &t.rows {
                table.push(vec![
                    r.gamma.into(),
                    r.empirical.into(),
                    r.target.into(),
                    r.se.into(),
                ]);
            }
            let slack = t.tolerance - t.worst_deviation();
            Ok(Evaluation::new(t.passed, Some(slack), &t)?.with_table(table))
        }
        ExpLaw { ensemble, mean_tol } => {
            let r = exp_law_check(&ctx.ensembles[ensemble], mean_tol * scale)?;
            let slack = (r.mean_tolerance - (r.mean.mean - 1.0).abs()).min(r.ks_bound - r.ks);
            Evaluation::new(r.passed, Some(slack), &r)
        }
        MinTime { ensemble, tol } => {
            let t = min_time_market_check(&ctx.ensembles[ensemble], tol * scale)?;
            let mut table = Table::new(&["fraction", "mean", "se", "bound"]);
            let mut slack = t.tolerance - (t.buy_and_hold.mean - t.target).abs();
            for r in &t.rows {
                table.push(vec![
                    r.fraction.into(),
                    r.mean.mean.into(),
                    r.mean.se.into(),
                    r.bound.into(),
                ]);
                slack = slack.min(r.bound - r.mean.mean);
            }
            Ok(Evaluation::new(t.passed, Some(slack), &t)?.with_table(table))
        }
    }
}

fn record(name: String, kind: &CheckKind, outcome: Result<Evaluation>) -> CheckRecord {
    let base = |status, slack, message, values, table| CheckRecord {
        name: name.clone(),
        kind: kind.name().to_string(),
        module: kind.module().as_str().to_string(),
        status,
        worst_slack: slack,
        message,
        values,
        table,
    };
    match outcome {
        Ok(e) => base(
            if e.passed { Status::Pass } else { Status::Fail },
            e.slack,
            None,
            e.values,
            e.table,
        ),
        Err(err) => base(
            Status::Error,
            None,
            Some(err.to_string()),
            Value::Null,
            None,
        ),
    }
}

/// Runs the selected checks of a scenario in declared order.
pub fn run(s: &Scenario, opts: &RunOptions) -> Result<Report> {
    s.validate()?;
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        return Err(Error::Parameter(format!(
            "tolerance scale {}",
            opts.tol_scale
        )));
    }
    let names = s.check_names()?;
    let selected: Vec<(usize, &CheckSpec)> = s
        .checks
        .iter()
        .enumerate()
        .filter(|(_, c)| opts.module.is_none_or(|m| c.kind.module() == m))
        .collect();
    if selected.is_empty() {
        return Err(Error::Scenario(match opts.module {
            Some(m) => format!("scenario has no {} checks", m.as_str()),
            None => "scenario has no checks".into(),
        }));
    }
    let seed = opts.seed.or(s.seed).unwrap_or(0);
    let specs: Vec<&CheckSpec> = selected.iter().map(|(_, c)| *c).collect();
    let ctx = Context::build(s, &specs, seed)?;
    let eval = |i: usize, c: &CheckSpec| {
        evaluate(&ctx, &c.kind, seed.wrapping_add(i as u64), opts.tol_scale)
    };
    let outcomes: Vec<Result<Evaluation>> = if opts.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = selected
                .iter()
                .map(|&(i, c)| {
                    let eval = &eval;
                    scope.spawn(move || eval(i, c))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("check panicked"))
                .collect()
        })
    } else {
        selected.iter().map(|&(i, c)| eval(i, c)).collect()
    };
    let checks: Vec<CheckRecord> = selected
        .iter()
        .zip(outcomes)
        .map(|(&(i, c), o)| record(names[i].clone(), &c.kind, o))
        .collect();
    Ok(Report {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_version: s.version,
        seed,
        tol_scale: opts.tol_scale,
        passed: checks.iter().all(|c| c.status == Status::Pass),
        checks,
    })
}

/// Loads and runs a scenario file.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<Report> {
    run(&Scenario::from_file(path)?, opts)
}
