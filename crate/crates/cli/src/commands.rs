use anyhow::{bail, Context, Result};
use datasale_core::equilibrium::best_response_set;
use datasale_core::market::Segment;
use datasale_core::mechanisms::{
    firm_optimal, joint_profit_maximize_over, lemma1_classify, pareto_improving,
};
use datasale_core::optin::{prop4_construct, tfne_check, MechanismRule, PriceRule, TfneCandidate};
use datasale_core::oracle::{
    brute_mechanism_search, brute_solve, DiscreteMarket, MechanismFamily, SearchConstraint,
};
use datasale_core::welfare::{accounting_residual, compare};
use datasale_core::{
    no_sharing_price_set, solve, ConsumerDistribution, IntervalSet, MarketOutcome, MarketParams,
    Mechanism, PriceSelection,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{num, Csv, Output};
use crate::scenario::{
    Loaded, MechanismKind, MechanismSpec, Model, Scenario, SelectionSpec, SCHEMA_VERSION,
};
use crate::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MechanismChoice {
    None,
    Full,
    #[value(alias = "firm_optimal")]
    FirmOptimal,
    Pareto,
    /// The scenario's own mechanism.
    Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    #[value(alias = "firm_optimal")]
    FirmOptimal,
    Pareto,
    Joint,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SearchFamily {
    Empty,
    Single,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SearchConstraintArg {
    None,
    ConsumerPareto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OptinRule {
    FeasibleOptimum,
    LeftHalf,
    ShareAll,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    V,
    T,
    Transfer,
    /// Fixed uniform price for A.
    Price,
    LeftMass,
}

/// A report plus, when verification failed, the reason.
pub type Dispatched = (Output, Option<String>);

pub fn dispatch(cmd: &Command, loaded: &Loaded, model: &Model) -> Result<Dispatched> {
    let s = &loaded.scenario;
    match cmd {
        Command::Equilibrium => Ok((equilibrium(s, model)?, None)),
        Command::Compare {
            baseline,
            candidate,
        } => Ok((compare_cmd(s, model, *baseline, *candidate)?, None)),
        Command::Lemma1 { theta, p_a } => Ok((lemma1(s, model, *theta, *p_a)?, None)),
        Command::Optimize {
            target,
            p_a,
            feasible,
            family,
            endpoints,
            constraint,
        } => Ok((
            optimize(
                s,
                model,
                *target,
                *p_a,
                feasible.as_deref(),
                *family,
                *endpoints,
                *constraint,
            )?,
            None,
        )),
        Command::Optin {
            construct,
            p_a,
            c_star,
            rule,
        } => optin(s, model, *construct, *p_a, c_star.as_deref(), *rule),
        Command::Sweep {
            param,
            from,
            to,
            points,
        } => Ok((sweep(loaded, *param, *from, *to, *points)?, None)),
        Command::Validate { scenarios } => validate(s, model, *scenarios),
    }
}

pub fn parse_intervals(text: &str) -> Result<IntervalSet> {
    let pairs = text
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (lo, hi) = p
                .split_once(':')
                .with_context(|| format!("interval {p:?} is not of the form lo:hi"))?;
            Ok((lo.trim().parse::<f64>()?, hi.trim().parse::<f64>()?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalSet::from_pairs(pairs)?)
}

fn max_no_sharing_price(model: &Model) -> Result<f64> {
    no_sharing_price_set(&model.dist, &model.params)
        .max_price()
        .context("no optimal no-sharing price")
}

#[derive(Serialize)]
struct EquilibriumResult {
    uniform_price: f64,
    profit_a: f64,
    profit_b: f64,
    joint_profit: f64,
    consumer_welfare: f64,
    gross_surplus: f64,
    transfer: f64,
    shared: IntervalSet,
    is_equilibrium: bool,
    best_responses: Vec<f64>,
    segments: Vec<Segment>,
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}

fn equilibrium(s: &Scenario, model: &Model) -> Result<Output> {
    let o = solve(
        &model.mechanism,
        &model.dist,
        &model.params,
        model.selection,
    )?;
    let set = best_response_set(&model.mechanism.shared, &model.dist, &model.params);
    let best_responses = if set.degenerate {
        Vec::new()
    } else {
        set.prices()
    };
    let r = EquilibriumResult {
        uniform_price: o.uniform_price,
        profit_a: o.profit_a(),
        profit_b: o.profit_b(),
        joint_profit: o.joint_profit(),
        consumer_welfare: o.consumer_welfare,
        gross_surplus: o.gross_surplus(),
        transfer: o.transfer(),
        shared: o.mechanism.shared.clone(),
        is_equilibrium: o.is_equilibrium,
        best_responses,
        segments: o.segments.clone(),
    };
    let best = if set.degenerate {
        "any price (no residual demand)".to_string()
    } else {
        joined(&r.best_responses)
    };
    Ok(Output::new("equilibrium", s, &r)
        .row("shared", r.shared.to_string())
        .row("transfer", num(r.transfer))
        .row("p_A", num(r.uniform_price))
        .row("profit_A", num(r.profit_a))
        .row("profit_B", num(r.profit_b))
        .row("joint_profit", num(r.joint_profit))
        .row("CW", num(r.consumer_welfare))
        .row("is_equilibrium", r.is_equilibrium.to_string())
        .row("best_responses", best))
}

fn choose(choice: MechanismChoice, model: &Model) -> Result<Mechanism> {
    let kind = match choice {
        MechanismChoice::Scenario => return Ok(model.mechanism.clone()),
        MechanismChoice::None => MechanismKind::None,
        MechanismChoice::Full => MechanismKind::Full,
        MechanismChoice::FirmOptimal => MechanismKind::FirmOptimal,
        MechanismChoice::Pareto => MechanismKind::Pareto,
    };
    let spec = MechanismSpec {
        kind,
        ..MechanismSpec::default()
    };
    spec.build(&model.dist, &model.params)
        .map_err(|e| anyhow::anyhow!(e.message))
}

#[derive(Serialize)]
struct Side {
    mechanism: Mechanism,
    uniform_price: f64,
    profit_a: f64,
    profit_b: f64,
    consumer_welfare: f64,
}

impl From<&MarketOutcome> for Side {
    fn from(o: &MarketOutcome) -> Self {
        Self {
            mechanism: o.mechanism.clone(),
            uniform_price: o.uniform_price,
            profit_a: o.profit_a(),
            profit_b: o.profit_b(),
            consumer_welfare: o.consumer_welfare,
        }
    }
}

#[derive(Serialize)]
struct CompareResult {
    baseline: Side,
    candidate: Side,
    report: datasale_core::welfare::ComparisonReport,
}

fn compare_cmd(
    s: &Scenario,
    model: &Model,
    baseline: MechanismChoice,
    candidate: MechanismChoice,
) -> Result<Output> {
    let solve_for = |m: &Mechanism| solve(m, &model.dist, &model.params, model.selection);
    let b = solve_for(&choose(baseline, model)?)?;
    let c = solve_for(&choose(candidate, model)?)?;
    let rep = compare(&b, &c, &model.dist, &model.params)?;
    let out = Output::new(
        "compare",
        s,
        &CompareResult {
            baseline: (&b).into(),
            candidate: (&c).into(),
            report: rep.clone(),
        },
    );
    Ok(out
        .row(
            "baseline",
            format!("{} r={}", b.mechanism.shared, num(b.transfer())),
        )
        .row(
            "candidate",
            format!("{} r={}", c.mechanism.shared, num(c.transfer())),
        )
        .row("delta_profit_A", num(rep.delta_profit_a))
        .row("delta_profit_B", num(rep.delta_profit_b))
        .row("delta_joint_profit", num(rep.delta_joint_profit))
        .row("delta_CW", num(rep.delta_consumer_welfare))
        .row("is_IR", rep.is_ir.to_string())
        .row(
            "IR_for_some_transfer",
            rep.ir_feasible_for_some_transfer.to_string(),
        )
        .row("is_pareto_improving", rep.is_pareto_improving.to_string())
        .row("strictly_better", rep.strictly_better_set.to_string())
        .row("worse", rep.worse_set.to_string()))
}

fn lemma1(s: &Scenario, model: &Model, theta: f64, p_a: Option<f64>) -> Result<Output> {
    let p_a = match p_a {
        Some(p) => p,
        None => max_no_sharing_price(model)?,
    };
    let r = lemma1_classify(theta, p_a, &model.params)?;
    Ok(Output::new("lemma1", s, &r)
        .row("theta", num(theta))
        .row("p_A", num(p_a))
        .row("case", format!("{:?}", r.case))
        .row("delta_profit_A", num(r.delta_profit_a))
        .row("delta_profit_B", num(r.delta_profit_b))
        .row("delta_consumer", num(r.delta_consumer))
        .row("delta_gross_surplus", num(r.delta_gross_surplus))
        .row("joint_gain_positive", r.joint_gain_positive.to_string()))
}

#[derive(Serialize)]
struct OptimizeResult {
    target: &'static str,
    mechanism: Mechanism,
    uniform_price: f64,
    joint_profit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition_satisfied: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transfer_range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluated: Option<usize>,
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    s: &Scenario,
    model: &Model,
    target: Target,
    p_a: Option<f64>,
    feasible: Option<&str>,
    family: SearchFamily,
    endpoints: usize,
    constraint: SearchConstraintArg,
) -> Result<Output> {
    let (d, p) = (&model.dist, &model.params);
    let r = match target {
        Target::FirmOptimal => {
            let f = firm_optimal(d, p);
            let o = solve(&f.mechanism, d, p, PriceSelection::MaxPrice)?;
            OptimizeResult {
                target: "firm_optimal",
                mechanism: f.mechanism,
                uniform_price: o.uniform_price,
                joint_profit: o.joint_profit(),
                condition_satisfied: Some(f.condition_satisfied),
                transfer_range: None,
                evaluated: None,
            }
        }
        Target::Pareto => {
            let p_a = match p_a {
                Some(x) => x,
                None => max_no_sharing_price(model)?,
            };
            let m = pareto_improving(p_a, d, p)?;
            let o = solve(&m.mechanism, d, p, PriceSelection::specified(p_a)?)?;
            OptimizeResult {
                target: "pareto",
                mechanism: m.mechanism,
                uniform_price: m.uniform_price,
                joint_profit: o.joint_profit(),
                condition_satisfied: None,
                transfer_range: Some(m.transfer_range),
                evaluated: None,
            }
        }
        Target::Joint => {
            let c = match feasible {
                Some(text) => parse_intervals(text)?,
                None => IntervalSet::full(),
            };
            let j = joint_profit_maximize_over(&c, d, p)?;
            OptimizeResult {
                target: "joint",
                mechanism: j.mechanism,
                uniform_price: j.uniform_price,
                joint_profit: j.joint_profit,
                condition_satisfied: None,
                transfer_range: None,
                evaluated: None,
            }
        }
        Target::Search => {
            let dm = DiscreteMarket::new(d, model.oracle.n, model.oracle.delta * p.t(), p)?;
            let fam = match family {
                SearchFamily::Empty => MechanismFamily::Empty,
                SearchFamily::Single => MechanismFamily::SingleInterval { endpoints },
                SearchFamily::Two => MechanismFamily::TwoInterval { endpoints },
            };
            let con = match constraint {
                SearchConstraintArg::None => SearchConstraint::None,
                SearchConstraintArg::ConsumerPareto => SearchConstraint::ConsumerParetoImproving,
            };
            let r = brute_mechanism_search(&dm, p, fam, con)?;
            OptimizeResult {
                target: "search",
                mechanism: r.mechanism,
                uniform_price: r.outcome.uniform_price,
                joint_profit: r.joint_profit,
                condition_satisfied: None,
                transfer_range: None,
                evaluated: Some(r.evaluated),
            }
        }
    };
    let mut out = Output::new("optimize", s, &r)
        .row("target", r.target)
        .row("shared", r.mechanism.shared.to_string())
        .row("transfer", num(r.mechanism.transfer))
        .row("p_A", num(r.uniform_price))
        .row("joint_profit", num(r.joint_profit));
    if let Some(c) = r.condition_satisfied {
        out = out.row("sufficient_condition", c.to_string());
    }
    if let Some((lo, hi)) = r.transfer_range {
        out = out.row("transfer_range", format!("[{}, {}]", num(lo), num(hi)));
    }
    if let Some(n) = r.evaluated {
        out = out.row("evaluated", n.to_string());
    }
    Ok(out)
}

fn optin(
    s: &Scenario,
    model: &Model,
    construct: bool,
    p_a: Option<f64>,
    c_star: Option<&str>,
    rule: OptinRule,
) -> Result<Dispatched> {
    let (d, p) = (&model.dist, &model.params);
    let cand = if construct {
        let p_a = match p_a {
            Some(x) => x,
            None => max_no_sharing_price(model)?,
        };
        match prop4_construct(p_a, d, p) {
            Ok(c) => c,
            Err(e @ datasale_core::Error::NotTfne(_)) => {
                return Err(crate::VerificationFailed(e.to_string()).into());
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        let Some(text) = c_star else {
            bail!("either --construct or --c-star is required");
        };
        TfneCandidate {
            c_star: parse_intervals(text)?,
            mechanism_rule: match rule {
                OptinRule::FeasibleOptimum => MechanismRule::FeasibleOptimum,
                OptinRule::LeftHalf => MechanismRule::ShareFeasibleLeftHalf,
                OptinRule::ShareAll => MechanismRule::ShareAll,
                OptinRule::None => MechanismRule::NoSharing,
            },
            price_rule: PriceRule::BestResponse(model.selection),
        }
    };
    let rep = tfne_check(&cand, d, p, model.grid)?;
    #[derive(Serialize)]
    struct OptinResult<'a> {
        candidate: &'a TfneCandidate,
        report: &'a datasale_core::optin::TfneReport,
    }
    let mut out = Output::new(
        "optin",
        s,
        &OptinResult {
            candidate: &cand,
            report: &rep,
        },
    )
    .row("C*", cand.c_star.to_string())
    .row("rule", format!("{:?}", cand.mechanism_rule))
    .row("shared", rep.mechanism.shared.to_string())
    .row("transfer", num(rep.mechanism.transfer))
    .row("p_A", num(rep.uniform_price))
    .row("bullet1", rep.bullet1_ok.to_string())
    .row("bullet2", rep.bullet2_ok.to_string())
    .row("bullet3", rep.bullet3_ok.to_string())
    .row("bullet4", rep.bullet4_ok.to_string())
    .row("tfne", rep.passes().to_string())
    .row("violations", rep.violations.len().to_string());
    if !rep.violations.is_empty() {
        out = out.with_records(Csv {
            header: [
                "schema_version",
                "theta",
                "bullet",
                "utility_in",
                "utility_out",
            ]
            .map(String::from)
            .into(),
            rows: rep
                .violations
                .iter()
                .map(|v| {
                    vec![
                        SCHEMA_VERSION.to_string(),
                        num(v.theta),
                        v.bullet.to_string(),
                        num(v.utility_in),
                        num(v.utility_out),
                    ]
                })
                .collect(),
        });
    }
    Ok((out, None))
}

pub const SWEEP_HEADER: [&str; 9] = [
    "schema_version",
    "parameter",
    "value",
    "uniform_price",
    "profit_a",
    "profit_b",
    "joint_profit",
    "consumer_welfare",
    "is_equilibrium",
];

#[derive(Serialize)]
struct SweepPoint {
    value: f64,
    uniform_price: f64,
    profit_a: f64,
    profit_b: f64,
    joint_profit: f64,
    consumer_welfare: f64,
    is_equilibrium: bool,
}

fn sweep(loaded: &Loaded, param: SweepParam, from: f64, to: f64, points: usize) -> Result<Output> {
    if points < 2 || !from.is_finite() || !to.is_finite() {
        bail!("a sweep needs at least two points and finite bounds");
    }
    let values: Vec<f64> = (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect();
    let results: Vec<Result<SweepPoint>> = values
        .par_iter()
        .map(|&x| {
            let mut s = loaded.scenario.clone();
            match param {
                SweepParam::V => s.market.v = x,
                SweepParam::T => s.market.t = x,
                SweepParam::Transfer => s.mechanism.transfer = Some(x),
                SweepParam::Price => s.solver.price_selection = SelectionSpec::Price(x),
                SweepParam::LeftMass => s.distribution.left_mass = Some(x),
            }
            let model = s
                .build()
                .map_err(|e| anyhow::anyhow!("at {param:?} = {x}: {}", e.message))?;
            let o = solve(
                &model.mechanism,
                &model.dist,
                &model.params,
                model.selection,
            )?;
            Ok(SweepPoint {
                value: x,
                uniform_price: o.uniform_price,
                profit_a: o.profit_a(),
                profit_b: o.profit_b(),
                joint_profit: o.joint_profit(),
                consumer_welfare: o.consumer_welfare,
                is_equilibrium: o.is_equilibrium,
            })
        })
        .collect();
    let points: Vec<SweepPoint> = results.into_iter().collect::<Result<_>>()?;
    let name = serde_json::to_value(param)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let records = Csv {
        header: SWEEP_HEADER.map(String::from).into(),
        rows: points
            .iter()
            .map(|p| {
                vec![
                    SCHEMA_VERSION.to_string(),
                    name.clone(),
                    num(p.value),
                    num(p.uniform_price),
                    num(p.profit_a),
                    num(p.profit_b),
                    num(p.joint_profit),
                    num(p.consumer_welfare),
                    p.is_equilibrium.to_string(),
                ]
            })
            .collect(),
    };
    Ok(Output::new("sweep", &loaded.scenario, &points).with_records(records))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: impl Into<String>, gap: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        gap,
        tolerance,
        pass: gap <= tolerance,
    }
}

/// Fixed so that `validate` is reproducible run to run.
const VALIDATION_SEED: u64 = 0x0da7_a5a1e;

fn oracle_gap(
    m: &Mechanism,
    d: &ConsumerDistribution,
    p: &MarketParams,
    n: usize,
    delta: f64,
) -> Result<f64> {
    let exact = solve(m, d, p, PriceSelection::MaxPrice)?;
    let dm = DiscreteMarket::new(d, n, delta * p.t(), p)?;
    let b = brute_solve(m, &dm, p);
    Ok((b.profit_a() - exact.profit_a())
        .abs()
        .max((b.profit_b() - exact.profit_b()).abs()))
}

fn random_scenario(rng: &mut ChaCha8Rng) -> (ConsumerDistribution, MarketParams, Mechanism) {
    let inner = rng.random_range(1..=4);
    let mut nodes = vec![0.0];
    let mut xs: Vec<f64> = (0..inner).map(|_| rng.random_range(0.02..0.98)).collect();
    xs.sort_by(f64::total_cmp);
    for x in xs {
        if x - nodes.last().unwrap() > 0.01 && 1.0 - x > 0.01 {
            nodes.push(x);
        }
    }
    nodes.push(1.0);
    let dens = nodes.iter().map(|_| rng.random_range(0.2..2.0)).collect();
    let dist =
        ConsumerDistribution::piecewise_linear_normalized(nodes, dens).expect("positive densities");
    let t = rng.random_range(0.5..=2.0);
    let params = MarketParams::new(t * rng.random_range(2.0001..=5.0), t).expect("v > 2t");
    let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    let shared = IntervalSet::single(f64::min(a, b), f64::max(a, b)).expect("ordered");
    (dist, params, Mechanism::new(shared, 0.0))
}

fn validate(s: &Scenario, model: &Model, scenarios: usize) -> Result<Dispatched> {
    let (n, delta, tol) = (model.oracle.n, model.oracle.delta, model.oracle.tolerance);
    let mut checks = vec![check(
        "scenario mechanism",
        oracle_gap(&model.mechanism, &model.dist, &model.params, n, delta)?,
        tol,
    )];

    let u = ConsumerDistribution::uniform();
    let reference = MarketParams::new(3.0, 1.0)?;
    let left = Mechanism::new(IntervalSet::single(0.0, 0.5)?, 0.0);
    for (name, m, pa, pb) in [
        (
            "reference no sharing",
            Mechanism::no_sharing(),
            0.125,
            0.5625,
        ),
        (
            "reference full sharing",
            Mechanism::full_sharing(0.0),
            0.25,
            0.25,
        ),
        ("reference left half", left, 0.25, 1.375),
    ] {
        let exact = solve(&m, &u, &reference, PriceSelection::MaxPrice)?;
        let closed = (exact.profit_a() - pa)
            .abs()
            .max((exact.profit_b() - pb).abs());
        checks.push(check(format!("{name} closed form"), closed, 1e-9));
        checks.push(check(
            format!("{name} oracle"),
            oracle_gap(&m, &u, &reference, n, delta)?,
            tol,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
    let cases: Vec<_> = (0..scenarios).map(|_| random_scenario(&mut rng)).collect();
    let gaps: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|(d, p, m)| -> Result<(f64, f64)> {
            let acc = accounting_residual(&solve(m, d, p, PriceSelection::MaxPrice)?).abs();
            Ok((oracle_gap(m, d, p, n, delta)?, acc))
        })
        .collect::<Result<_>>()?;
    if !gaps.is_empty() {
        let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
        let acc = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
        checks.push(check(
            format!("{scenarios} random scenarios oracle"),
            worst,
            tol,
        ));
        checks.push(check(
            format!("{scenarios} random scenarios accounting"),
            acc,
            1e-9,
        ));
    }

    let failed: Vec<&CheckResult> = checks.iter().filter(|c| !c.pass).collect();
    let verdict = (!failed.is_empty()).then(|| {
        failed
            .iter()
            .map(|c| format!("{} gap {:e} > {:e}", c.name, c.gap, c.tolerance))
            .collect::<Vec<_>>()
            .join("; ")
    });
    let records = Csv {
        header: ["schema_version", "check", "gap", "tolerance", "pass"]
            .map(String::from)
            .into(),
        rows: checks
            .iter()
            .map(|c| {
                vec![
                    SCHEMA_VERSION.to_string(),
                    c.name.clone(),
                    format!("{:.3e}", c.gap),
                    format!("{:e}", c.tolerance),
                    c.pass.to_string(),
                ]
            })
            .collect(),
    };
    let out = Output::new("validate", s, &checks)
        .row("oracle cells", n.to_string())
        .row("oracle price step", format!("{} t", num(delta)))
        .row(
            "passed",
            format!("{} of {}", checks.len() - failed.len(), checks.len()),
        )
        .with_records(records);
    Ok((out, verdict))
}
