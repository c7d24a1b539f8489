mod common;

use common::*;
use iterjump::model::limit_boundary_s_star;
use iterjump::oracle::merton_european_series;
use iterjump::*;
use rand::prelude::*;

fn row8() -> (ModelParams, OptionSpec) {
    let jump = JumpDistribution::double_exponential(0.6, 25.0, 25.0).unwrap();
    (ModelParams::new(0.05, 0.2, 3.0, jump).unwrap(), OptionSpec::american_put(100.0, 0.25).unwrap())
}

#[test]
fn implicit_runs_follow_the_convergence_theory() {
    let mut rng = StdRng::seed_from_u64(20);
    let mut tested = 0;
    while tested < 12 {
        let Some(d) = random_draw(&mut rng, 1.0) else { continue };
        let c = theory_checks(&d).unwrap();
        if d.option.is_american() {
            assert!(c.min_increment >= -1e-10, "{d:?}: {c:?}");
        }
        assert!(c.max_value <= 100.0 + 1e-10, "{d:?}: {c:?}");
        assert!(c.min_obstacle_gap >= -1e-12, "{d:?}: {c:?}");
        assert!(c.contraction_excess <= 1e-9, "{d:?}: {c:?}");
        assert!(c.rate_excess <= 1e-9, "{d:?}: {c:?}");
        tested += 1;
    }
}

#[test]
fn psor_steps_solve_the_complementarity_problem() {
    let mut rng = StdRng::seed_from_u64(21);
    let mut tested = 0;
    while tested < 8 {
        let Some(d) = random_draw(&mut rng, 1.0) else { continue };
        let res = psor_residual(&d, 1.0).unwrap();
        assert!(res <= 1e-8, "{d:?}: residual {res}");
        tested += 1;
    }
}

#[test]
fn no_jumps_matches_an_independent_lattice() {
    let jump = JumpDistribution::gaussian(-0.2, 0.2).unwrap();
    for (american, l, t) in [(true, 64, 0.25), (false, 32, 1.0), (true, 128, 0.5)] {
        let m = ModelParams::new(0.04, 0.3, 0.0, jump).unwrap();
        let style = if american { ExerciseStyle::American } else { ExerciseStyle::European };
        let opt = OptionSpec::new(style, Payoff::Put { strike: 100.0 }, t, None).unwrap();
        let grid = build_grid(&GridSpec::new(l), &opt, &jump).unwrap();
        let cfg = EngineConfig { theta: 1.0, solver: SolverKind::BrennanSchwartz, ..EngineConfig::default() };
        let res = iterate_to_fixed_point(&m, &opt, &grid, &cfg, &[100.0]).unwrap();
        assert!(res.report.iterations <= 2);
        let reference = reference_put_lattice(0.04, 0.3, 100.0, american, &grid);
        for (a, b) in res.surface.slice(0).iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn first_iterate_dominates_payoff() {
    let (m, opt) = row8();
    let grid = build_grid(&GridSpec::new(64), &opt, &m.jump).unwrap();
    let pricer = Pricer::new(&m, &opt, &grid, &EngineConfig::default()).unwrap();
    let (u1, _) = pricer.backward_sweep(&pricer.initial_surface()).unwrap();
    for slice in &u1.slices {
        for (u, g) in slice.iter().zip(&grid.payoff) {
            assert!(u >= &(g - 1e-12));
        }
    }
}

#[test]
fn limit_boundary_near_maturity() {
    let (m, opt) = row8();
    let s_star = limit_boundary_s_star(&m, 100.0).unwrap();
    let grid = build_grid(&GridSpec::new(64), &opt, &m.jump).unwrap();
    let res = iterate_to_fixed_point(&m, &opt, &grid, &EngineConfig::default(), &[100.0]).unwrap();
    let last = res.boundary[grid.time_steps() - 1];
    assert!((last.ln() - s_star.ln()).abs() <= 2.0 * grid.dx, "{last} vs {s_star}");
    // Boundaries of later iterates sit below earlier ones.
    let cfg = EngineConfig { keep_iterates: true, theta: 1.0, ..EngineConfig::default() };
    let res = iterate_to_fixed_point(&m, &opt, &grid, &cfg, &[]).unwrap();
    let curves: Vec<Vec<f64>> = res.iterates[1..]
        .iter()
        .map(|s| extract_free_boundary(s, &grid, 100.0, 1e-4))
        .collect();
    for w in curves.windows(2) {
        for (a, b) in w[1].iter().zip(&w[0]) {
            assert!(a <= &(b + 1e-9));
        }
    }
}

#[test]
fn merton_contracts_match_published_and_series_values() {
    let jump = JumpDistribution::gaussian(-0.9, 0.45).unwrap();
    let m = ModelParams::new(0.05, 0.15, 0.1, jump).unwrap();
    let spec = GridSpec::new(128).with_bounds(70f64.ln(), 140f64.ln());
    let am = OptionSpec::american_put(100.0, 0.25).unwrap();
    let grid = build_grid(&spec, &am, &jump).unwrap();
    let res = iterate_to_fixed_point(&m, &am, &grid, &EngineConfig::default(), &[90.0, 100.0, 110.0]).unwrap();
    for ((_, v), p) in res.prices.iter().zip([10.004, 3.242, 1.420]) {
        assert!((v - p).abs() <= 0.005, "{v} vs {p}");
    }
    let eu = OptionSpec::new(ExerciseStyle::European, Payoff::Call { strike: 100.0 }, 0.25, None).unwrap();
    let grid = build_grid(&spec, &eu, &jump).unwrap();
    let res = iterate_to_fixed_point(&m, &eu, &grid, &EngineConfig::default(), &[90.0, 100.0, 110.0]).unwrap();
    for &(s, v) in &res.prices {
        let series = merton_european_series(&m, &eu, s).unwrap().price;
        assert!((v - series).abs() <= 0.01, "{v} vs {series}");
    }
}

#[test]
fn implicit_and_crank_nicolson_approach_each_other() {
    let (m, opt) = row8();
    let gap = |l: usize| {
        let grid = build_grid(&GridSpec::new(l), &opt, &m.jump).unwrap();
        let cn = iterate_to_fixed_point(&m, &opt, &grid, &EngineConfig::default(), &[100.0]).unwrap();
        let imp = EngineConfig { theta: 1.0, ..EngineConfig::default() };
        let imp = iterate_to_fixed_point(&m, &opt, &grid, &imp, &[100.0]).unwrap();
        (cn.prices[0].1 - imp.prices[0].1).abs()
    };
    let (coarse, fine) = (gap(64), gap(256));
    assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
}

#[test]
fn psor_and_brennan_schwartz_agree() {
    let (m, opt) = row8();
    let grid = build_grid(&GridSpec::new(64), &opt, &m.jump).unwrap();
    let a = iterate_to_fixed_point(&m, &opt, &grid, &EngineConfig::default(), &[90.0, 100.0]).unwrap();
    let cfg = EngineConfig { solver: SolverKind::BrennanSchwartz, ..EngineConfig::default() };
    let b = iterate_to_fixed_point(&m, &opt, &grid, &cfg, &[90.0, 100.0]).unwrap();
    assert!(a.surface.sup_distance(&b.surface) < 1e-6);
}
