use std::process::ExitCode;

use datasale_core::mechanisms::{lemma1_classify, pareto_improving};
use datasale_core::optin::{prop4_construct, tfne_check, MechanismRule, PriceRule, TfneCandidate};
use datasale_core::oracle::{
    brute_mechanism_search, brute_solve, direct_effect, DiscreteMarket, MechanismFamily,
    SearchConstraint,
};
use datasale_core::welfare::{accounting_residual, compare};
use datasale_core::{
    solve, ConsumerDistribution, IntervalSet, MarketParams, Mechanism, PriceSelection,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure(
        (got - want).abs() <= tol,
        format!("{name} = {got}, expected {want} ± {tol:e}"),
    )
}

fn example() -> (ConsumerDistribution, MarketParams) {
    (
        ConsumerDistribution::uniform(),
        MarketParams::new(3.0, 1.0).unwrap(),
    )
}

fn unwrap<T, E: std::fmt::Debug>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| format!("{e:?}"))
}

fn no_sharing_example() -> Check {
    let (u, p) = example();
    let o = unwrap(solve(
        &Mechanism::no_sharing(),
        &u,
        &p,
        PriceSelection::MaxPrice,
    ))?;
    close("p_A", o.uniform_price, 0.5, 1e-9)?;
    close("profit A", o.profit_a(), 0.125, 1e-9)?;
    close("profit B", o.profit_b(), 0.5625, 1e-9)?;
    close("CW", o.consumer_welfare, 2.0, 1e-9)?;
    let dm = unwrap(DiscreteMarket::new(&u, 2000, 1e-3, &p))?;
    let b = brute_solve(&Mechanism::no_sharing(), &dm, &p);
    close("oracle p_A", b.uniform_price, 0.5, 2e-3)?;
    close("oracle profit A", b.profit_a(), 0.125, 2e-3)?;
    close("oracle profit B", b.profit_b(), 0.5625, 2e-3)?;
    close("oracle CW", b.consumer_welfare, 2.0, 2e-3)?;
    Ok(format!(
        "p_A={} pi_A={} pi_B={} CW={} (oracle pi_B={:.5})",
        o.uniform_price,
        o.profit_a(),
        o.profit_b(),
        o.consumer_welfare,
        b.profit_b()
    ))
}

fn full_sharing_example() -> Check {
    let (u, p) = example();
    let none = unwrap(solve(
        &Mechanism::no_sharing(),
        &u,
        &p,
        PriceSelection::MaxPrice,
    ))?;
    let full = unwrap(solve(
        &Mechanism::full_sharing(0.0),
        &u,
        &p,
        PriceSelection::MaxPrice,
    ))?;
    close("profit A", full.profit_a(), 0.25, 1e-9)?;
    close("profit B", full.profit_b(), 0.25, 1e-9)?;
    close("joint", full.joint_profit(), 0.5, 1e-9)?;
    ensure(
        full.joint_profit() < 11.0 / 16.0,
        "full sharing joint profit not below 11/16",
    )?;
    let rep = unwrap(compare(&none, &full, &u, &p))?;
    ensure(
        !rep.ir_feasible_for_some_transfer,
        "an IR transfer was reported",
    )?;
    for i in 0..=400 {
        let r = -2.0 + i as f64 * 0.01;
        let rep = unwrap(compare(&none, &full.with_transfer(r), &u, &p))?;
        ensure(!rep.is_ir, format!("IR at r = {r}"))?;
    }
    Ok(format!(
        "pi_A=pi_B={} joint={} < 11/16, is_IR=false for all r",
        full.profit_a(),
        full.joint_profit()
    ))
}

fn left_half_example() -> Check {
    let (u, p) = example();
    let m = Mechanism::new(unwrap(IntervalSet::single(0.0, 0.5))?, 0.0);
    let o = unwrap(solve(&m, &u, &p, PriceSelection::MaxPrice))?;
    close("p_A", o.uniform_price, 2.5, 1e-9)?;
    close("profit A", o.profit_a(), 0.25, 1e-9)?;
    close("profit B", o.profit_b(), 1.375, 1e-9)?;
    let dm = unwrap(DiscreteMarket::new(&u, 2000, 1e-3, &p))?;
    let family = MechanismFamily::SingleInterval { endpoints: 40 };
    let best = unwrap(brute_mechanism_search(
        &dm,
        &p,
        family,
        SearchConstraint::None,
    ))?;
    ensure(
        best.joint_profit <= 1.625 + 1e-3,
        format!(
            "search found {} > 1.625 + 1e-3 at {}",
            best.joint_profit, best.mechanism.shared
        ),
    )?;
    Ok(format!(
        "pi_A={} pi_B={}; best of {} single intervals: {} with joint {:.5}",
        o.profit_a(),
        o.profit_b(),
        best.evaluated,
        best.mechanism.shared,
        best.joint_profit
    ))
}

fn direct_effect_threshold() -> Check {
    let (u, p) = example();
    let joint = |x: f64| -> Result<f64, String> {
        let r = unwrap(lemma1_classify(x, 0.5, &p))?;
        Ok(r.delta_profit_a + r.delta_profit_b)
    };
    ensure(joint(0.375)? == 0.0, "joint delta at 3/8 is not zero")?;
    ensure(
        !unwrap(lemma1_classify(0.375, 0.5, &p))?.joint_gain_positive,
        "3/8 flagged positive",
    )?;
    for k in 1..=1000 {
        let e = k as f64 * 1e-4;
        if 0.375 - e >= 0.25 {
            ensure(
                joint(0.375 - e)? > 0.0,
                format!("non-positive at {}", 0.375 - e),
            )?;
        }
        if 0.375 + e < 0.5 {
            ensure(
                joint(0.375 + e)? < 0.0,
                format!("non-negative at {}", 0.375 + e),
            )?;
        }
    }
    let n = 2000;
    let dm = unwrap(DiscreteMarket::new(&u, n, 1e-3, &p))?;
    let cells: Vec<f64> = dm
        .locations()
        .iter()
        .copied()
        .filter(|&x| (0.25..0.5).contains(&x))
        .collect();
    let gain = |x: f64| {
        let e = direct_effect(x, 0.5, &dm, &p);
        e.delta_profit_a + e.delta_profit_b
    };
    let flip = cells
        .windows(2)
        .find(|w| gain(w[0]) > 0.0 && gain(w[1]) <= 0.0)
        .map(|w| w[1])
        .ok_or("oracle joint delta never changes sign")?;
    ensure(
        cells.iter().all(|&x| (x < flip) == (gain(x) > 0.0)),
        "oracle joint delta changes sign more than once",
    )?;
    ensure(
        (flip - 0.375).abs() <= 1.0 / n as f64,
        format!("oracle sign change at {flip}"),
    )?;
    Ok(format!(
        "closed form flips at 0.375; oracle flips at cell {flip} (cell width {})",
        1.0 / n as f64
    ))
}

fn pareto_mechanism() -> Check {
    let (u, p) = example();
    let m = unwrap(pareto_improving(0.5, &u, &p))?;
    ensure(
        m.mechanism.shared == unwrap(IntervalSet::single(0.25, 0.375))?,
        format!("M_B = {}", m.mechanism.shared),
    )?;
    // B's loss and A's gain on the shared band by midpoint quadrature
    let k = 100_000;
    let h = 0.125 / k as f64;
    let (mut loss, mut gain) = (0.0, 0.0);
    for i in 0..k {
        let x = 0.25 + (i as f64 + 0.5) * h;
        loss += (0.5 + (2.0 * x - 1.0)) * h;
        gain += (1.0 - 2.0 * x) * h;
    }
    let (lo, hi) = m.transfer_range;
    close("r_min", lo, loss, 1e-9)?;
    close("r_max", hi, gain, 1e-9)?;
    close("r_min", lo, 1.0 / 64.0, 1e-12)?;
    close("r_max", hi, 3.0 / 64.0, 1e-12)?;
    let base = unwrap(solve(
        &Mechanism::no_sharing(),
        &u,
        &p,
        PriceSelection::MaxPrice,
    ))?;
    let cand = unwrap(solve(&m.mechanism, &u, &p, PriceSelection::MaxPrice))?;
    let rep = unwrap(compare(&base, &cand, &u, &p))?;
    ensure(rep.is_pareto_improving, "not Pareto improving")?;
    ensure(
        rep.worse_set.measure() == 0.0,
        format!("worse set {}", rep.worse_set),
    )?;
    ensure(
        unwrap(IntervalSet::single(0.251, 0.374))?.is_subset_of(&rep.strictly_better_set, 0.0),
        format!("strictly better set {}", rep.strictly_better_set),
    )?;
    Ok(format!(
        "M_B={} r in [{lo}, {hi}], strictly better {}",
        m.mechanism.shared, rep.strictly_better_set
    ))
}

fn tfne_candidates() -> Check {
    let (u, p) = example();
    let star = unwrap(prop4_construct(0.5, &u, &p))?;
    let star_rep = unwrap(tfne_check(&star, &u, &p, 1e-3))?;
    ensure(
        star_rep.passes(),
        format!("opt-in candidate fails: {:?}", star_rep.violations.first()),
    )?;
    ensure(
        star.c_star == unwrap(IntervalSet::single(0.25, 0.375))?,
        format!("C* = {}", star.c_star),
    )?;
    let half = TfneCandidate {
        c_star: unwrap(IntervalSet::single(0.0, 0.5))?,
        mechanism_rule: MechanismRule::ShareFeasibleLeftHalf,
        price_rule: PriceRule::default(),
    };
    let half_rep = unwrap(tfne_check(&half, &u, &p, 1e-3))?;
    ensure(
        half_rep.passes(),
        format!(
            "left-half candidate fails: {:?}",
            half_rep.violations.first()
        ),
    )?;

    let base = unwrap(solve(
        &Mechanism::no_sharing(),
        &u,
        &p,
        PriceSelection::MaxPrice,
    ))?;
    let at = |m: &Mechanism, q: f64| solve(m, &u, &p, PriceSelection::Specified(q));
    let star_out = unwrap(at(&star_rep.mechanism, star_rep.uniform_price))?;
    let half_out = unwrap(at(&half_rep.mechanism, half_rep.uniform_price))?;
    let star_cmp = unwrap(compare(&base, &star_out, &u, &p))?;
    let half_cmp = unwrap(compare(&base, &half_out, &u, &p))?;
    ensure(
        star_cmp.is_pareto_improving,
        "opt-in equilibrium is not Pareto improving",
    )?;
    ensure(
        !half_cmp.is_pareto_improving,
        "left-half equilibrium reported Pareto improving",
    )?;
    Ok(format!(
        "C*={} passes, C*={} passes; Pareto improving: {} vs {} (consumers losing: measure {})",
        star.c_star,
        half.c_star,
        star_cmp.is_pareto_improving,
        half_cmp.is_pareto_improving,
        half_cmp.worse_set.measure()
    ))
}

fn concentrated_distribution() -> Check {
    let p = MarketParams::new(3.0, 1.0).unwrap();
    let d = unwrap(ConsumerDistribution::smoothed_step(0.25, 0.95, 0.01))?;
    let dm = unwrap(DiscreteMarket::new(&d, 4000, 1e-3, &p))?;
    let none = brute_solve(&Mechanism::no_sharing(), &dm, &p);
    let full = brute_solve(&Mechanism::full_sharing(0.0), &dm, &p);
    ensure(
        full.joint_profit() > none.joint_profit(),
        format!(
            "full {} <= none {}",
            full.joint_profit(),
            none.joint_profit()
        ),
    )?;
    Ok(format!(
        "oracle joint profit: full sharing {:.5} > no sharing {:.5}",
        full.joint_profit(),
        none.joint_profit()
    ))
}

fn random_scenario(rng: &mut ChaCha8Rng) -> (ConsumerDistribution, MarketParams, Mechanism) {
    let nodes_count = rng.random_range(3..=6);
    let mut inner: Vec<f64> = (0..nodes_count - 2)
        .map(|_| rng.random_range(0.02..0.98))
        .collect();
    inner.sort_by(f64::total_cmp);
    let mut nodes = vec![0.0];
    for x in inner {
        if x - nodes.last().unwrap() > 0.01 {
            nodes.push(x);
        }
    }
    if 1.0 - nodes.last().unwrap() < 0.01 {
        nodes.pop();
    }
    nodes.push(1.0);
    let densities = nodes.iter().map(|_| rng.random_range(0.2..2.0)).collect();
    let dist = ConsumerDistribution::piecewise_linear_normalized(nodes, densities).unwrap();
    let t = rng.random_range(0.5..=2.0);
    let v = t * rng.random_range(2.0001..=5.0);
    let params = MarketParams::new(v, t).unwrap();
    let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    let shared = IntervalSet::single(f64::min(a, b), f64::max(a, b)).unwrap();
    (
        dist,
        params,
        Mechanism::new(shared, rng.random_range(-0.5..0.5)),
    )
}

fn random_scenarios() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let (d, p, m) = random_scenario(&mut rng);
        let exact = unwrap(solve(&m, &d, &p, PriceSelection::MaxPrice))?;
        let dm = unwrap(DiscreteMarket::new(&d, 2000, 1e-3 * p.t(), &p))?;
        let b = brute_solve(&m, &dm, &p);
        for (name, x, y) in [
            ("profit A", b.profit_a(), exact.profit_a()),
            ("profit B", b.profit_b(), exact.profit_b()),
        ] {
            worst = worst.max((x - y).abs());
            ensure(
                (x - y).abs() <= 3e-3,
                format!("scenario {k}: oracle {name} {x} vs {y}"),
            )?;
        }
        let residual = accounting_residual(&exact);
        ensure(
            residual.abs() <= 1e-9,
            format!("scenario {k}: accounting residual {residual:e}"),
        )?;
        let shifted = unwrap(solve(
            &m.with_transfer(m.transfer + 0.37),
            &d,
            &p,
            PriceSelection::MaxPrice,
        ))?;
        ensure(
            shifted.joint_profit() == exact.joint_profit(),
            format!("scenario {k}: joint profit moved with the transfer"),
        )?;
    }
    Ok(format!("50 scenarios, worst oracle profit gap {worst:.2e}"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("no-sharing equilibrium", no_sharing_example),
        ("full sharing is not IR", full_sharing_example),
        ("left-half sharing is firm optimal", left_half_example),
        ("direct-effect midpoint threshold", direct_effect_threshold),
        ("Pareto-improving mechanism", pareto_mechanism),
        ("opt-in equilibria", tfne_candidates),
        (
            "full sharing pays under concentrated demand",
            concentrated_distribution,
        ),
        ("oracle agreement and accounting", random_scenarios),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
