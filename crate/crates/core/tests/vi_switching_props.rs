use inexact_opt::geometry::{FeasibleSet, ProductSetup, ProxGeometry, ProxSetup};
use inexact_opt::linalg::norm2;
use inexact_opt::oracle::{Constraint, Objective, ProblemSpec};
use inexact_opt::reference::{game_value, LinearProgram};
use inexact_opt::switching::{dual_certificate, run_switching, stopping_horizon, SwitchConfig, SwitchVariant};
use inexact_opt::vi::{
    check_averaged_inequality, model_from_vi, run_mirror_prox, saddle_gap, vi_gap_certificate, MirrorProxConfig,
    SaddleProblem,
};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn payoff() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..5, 2usize..5).prop_flat_map(|(m, n)| prop::collection::vec(prop::collection::vec(0.0..1.0f64, n), m))
}

fn on_simplex(p: &[f64]) -> bool {
    p.iter().all(|v| *v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

fn check_game(a: &[Vec<f64>], setup: &dyn ProxGeometry, swap_divergence: bool, seed: u64) -> Result<(), TestCaseError> {
    let game = SaddleProblem::matrix_game(a.to_vec()).unwrap();
    let vi = game.to_vi().unwrap();
    let model = model_from_vi(vi.clone());
    let epsilon = 1e-2;
    let mut config = MirrorProxConfig::new(epsilon, 1.0, 0.0);
    config.swap_divergence = swap_divergence;
    let report = run_mirror_prox(&model, setup, &config).unwrap();
    prop_assert!(report.s_n >= report.max_divergence / epsilon * (1.0 - 1e-12));

    let (u, v) = game.split(&report.y_tilde);
    prop_assert!(on_simplex(u) && on_simplex(v));
    let gap = saddle_gap(&game, u, v).unwrap();
    prop_assert!(gap >= -TOL);
    prop_assert!(gap <= report.saddle_bound(0.0) + TOL);

    let cert = vi_gap_certificate(&vi, &report.y_tilde).unwrap();
    prop_assert!(cert.exact);
    prop_assert!((cert.value - gap).abs() < TOL);

    let (value, _) = game_value(a).unwrap();
    prop_assert!((game.value(u, v) - value).abs() <= gap + TOL);

    let excess = check_averaged_inequality(&model, setup, &report, 64, seed).unwrap();
    prop_assert!(excess <= TOL);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mirror_prox_solves_matrix_games_with_entropy(a in payoff(), seed in any::<u64>()) {
        let game = SaddleProblem::matrix_game(a.clone()).unwrap();
        let setup = game.to_vi().unwrap().default_setup().unwrap();
        check_game(&a, &setup, true, seed)?;
    }

    #[test]
    fn mirror_prox_solves_matrix_games_with_euclidean_prox(a in payoff(), seed in any::<u64>()) {
        let blocks = vec![
            ProxSetup::euclidean(FeasibleSet::simplex(a.len())).unwrap(),
            ProxSetup::euclidean(FeasibleSet::simplex(a[0].len())).unwrap(),
        ];
        check_game(&a, &ProductSetup::new(blocks).unwrap(), false, seed)?;
    }

    #[test]
    fn switching_meets_its_guarantees(
        n in 2usize..4,
        raw_c in prop::collection::vec(-1.0..1.0f64, 3),
        raw_a in prop::collection::vec(-1.0..1.0f64, 3),
        offset in 0.05..0.5f64,
    ) {
        let c = raw_c[..n].to_vec();
        let a = raw_a[..n].to_vec();
        prop_assume!(norm2(&c) > 0.1 && norm2(&a) > 0.1);
        let set = FeasibleSet::cube(n, -1.0, 1.0);

        let mut lp = LinearProgram::new(c.clone());
        lp.le(a.clone(), offset);
        lp.restrict_to(&set).unwrap();
        let (f_star, x_star) = lp.solve_by_vertices().unwrap();

        let spec = ProblemSpec::new(Objective::MaxAffine { a: vec![c.clone()], b: vec![0.0] }, set.clone())
            .unwrap()
            .with_constraint(Constraint::Affine { a: a.clone(), b: -offset })
            .unwrap()
            .with_reference(f_star, Some(x_star))
            .unwrap();
        let setup = ProxSetup::euclidean(set).unwrap();
        let epsilon = 0.1;
        let theta0_sq = 0.5 * n as f64 * 4.0;
        let config = SwitchConfig::new(epsilon, theta0_sq, SwitchVariant::Adaptive, norm2(&a));
        let report = run_switching(&spec, &setup, &config).unwrap();

        prop_assert_eq!(report.iterations(), report.trace.len());
        prop_assert_eq!(report.productive, report.trace.iter().filter(|s| s.productive).count());
        prop_assert!(report.productive > 0);
        let last = report.trace.last().unwrap();
        prop_assert!(report.stationary || last.stop_lhs >= last.stop_rhs);
        let horizon = stopping_horizon(epsilon, theta0_sq, norm2(&c));
        prop_assert!(report.iterations() as u64 <= horizon);

        prop_assert!(spec.constraint_value(&report.x_hat) <= epsilon * norm2(&a) + TOL);
        prop_assert!(spec.value(&report.x_hat) - f_star <= epsilon + TOL);
        let cert = dual_certificate(&spec, &report).unwrap();
        prop_assert!(cert.lambda_hat.iter().all(|l| *l >= 0.0));
        prop_assert!(cert.dual_value <= f_star + TOL);
        prop_assert!(cert.gap >= -cert.infeasibility_credit - TOL);
        prop_assert!(cert.gap <= epsilon + TOL);
    }
}

/// With negative entropy, the as-written order `V(y, x⁺)` in the acceptance test can stop
/// with a gap well above `ε`; the order `V(x⁺, y)` restores the bound.
#[test]
fn divergence_order_matters_for_entropy() {
    let a = vec![
        vec![0.0377820525572119, 0.18849260976215376],
        vec![0.7405474950182845, 0.08498744906711286],
    ];
    let game = SaddleProblem::matrix_game(a.clone()).unwrap();
    let vi = game.to_vi().unwrap();
    let setup = vi.default_setup().unwrap();
    let gap_for = |swap: bool| {
        let mut config = MirrorProxConfig::new(1e-2, 1.0, 0.0);
        config.swap_divergence = swap;
        let report = run_mirror_prox(&model_from_vi(vi.clone()), &setup, &config).unwrap();
        let (u, v) = game.split(&report.y_tilde);
        let best_col = (0..2).map(|j| u[0] * a[0][j] + u[1] * a[1][j]).fold(f64::MIN, f64::max);
        let best_row = (0..2).map(|i| a[i][0] * v[0] + a[i][1] * v[1]).fold(f64::MAX, f64::min);
        assert!((best_col - best_row - saddle_gap(&game, u, v).unwrap()).abs() < 1e-12);
        best_col - best_row
    };
    assert!(gap_for(false) > 0.028);
    assert!(gap_for(true) < 1e-2);
}
