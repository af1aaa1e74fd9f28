use mtem_core::analysis::{empirical_moment_sup, interpolant_gap, GapStudy, MomentStudy};
use mtem_core::builtins::{derive_example2, example2, RadiusConstruction};
use mtem_core::{Scheme, SdeProblem, TruncationPolicy};

fn wide() -> TruncationPolicy {
    TruncationPolicy::new("h = 1e9", 1.0, |_| 1e9)
}

fn moment_study(scheme: Scheme, levels: Vec<u32>, replicates: usize) -> MomentStudy {
    MomentStudy {
        scheme,
        t_end: 1.0,
        levels,
        finest_level: 10,
        p: 4.0,
        p_bar: 4.0,
        replicates,
        seed: 12,
    }
}

#[test]
fn frozen_dynamics_moments_equal_initial_state() {
    let frozen = SdeProblem::new("frozen", 1, 1, vec![-1.5], |_, o| o[0] = 0.0, |_, o| o[0] = 0.0, |_| 1.0).unwrap();
    let table = empirical_moment_sup(&frozen, Some(&wide()), &moment_study(Scheme::Mtem, vec![2, 5], 100)).unwrap();
    for row in &table.rows {
        assert_eq!(row.max_mean_moment, 1.5f64.powi(4));
        assert_eq!(row.mean_sup_moment.mean, 1.5f64.powi(4));
    }
}

#[test]
fn example2_moments_are_step_uniform() {
    let b = example2(0.9, 1.0, RadiusConstruction::SqrtClosedForm, &derive_example2(6.0, 1e3, 10_000)).unwrap();
    let study = moment_study(Scheme::Mtem, (4..=10).collect(), 4000);
    let table = empirical_moment_sup(&b.problem, Some(&b.policy), &study).unwrap();
    assert_eq!(table.total_diverged(), 0);
    assert!(table.rows.iter().all(|r| r.max_mean_moment.is_finite() && r.mean_sup_moment.mean.is_finite()));
    // Δ = 1/16 overshoots the cubic drift (moment about 4x the rest), so
    // uniformity is checked from Δ = 1/32 on
    let mut fine = table.clone();
    fine.rows.retain(|r| r.level >= 5);
    assert!(fine.pointwise_spread() < 2.0, "{table:?}");
    assert!(fine.sup_spread() < 2.0, "{table:?}");
    // independent numpy Euler run at Δ = 2^-12, 4000 paths: 2.14 and 18.4
    let last = table.rows.last().unwrap();
    assert!((last.max_mean_moment - 2.0).abs() < 0.3, "{last:?}");
    assert!((last.mean_sup_moment.mean - 18.4).abs() < 3.0, "{last:?}");
}

fn gap_study(levels: Vec<u32>, finest: u32, p: f64, replicates: usize) -> GapStudy {
    GapStudy {
        t_end: 1.0,
        levels,
        finest_level: finest,
        p,
        replicates,
        seed: 21,
    }
}

#[test]
fn constant_drift_gap_is_half_a_step() {
    let c = -0.75;
    let problem = SdeProblem::new("drift", 1, 1, vec![0.0], move |_, o| o[0] = c, |_, o| o[0] = 0.0, |_| 1.0).unwrap();
    let gaps = interpolant_gap(&problem, &wide(), &gap_study(vec![2, 4, 6], 8, 3.0, 100)).unwrap();
    for row in &gaps.rows {
        let expect = (c.abs() * row.delta / 2.0).powi(3);
        assert!((row.fixed_time.mean - expect).abs() <= 1e-12 * expect, "{row:?}");
        assert_eq!(row.fixed_time.se, 0.0);
    }
}

#[test]
fn pure_noise_sup_gap_decreases() {
    let problem = SdeProblem::new("noise", 1, 1, vec![0.0], |_, o| o[0] = 0.0, |_, o| o[0] = 1.0, |_| 1.0).unwrap();
    let gaps = interpolant_gap(&problem, &wide(), &gap_study((2..=8).collect(), 12, 2.0, 400)).unwrap();
    for pair in gaps.rows.windows(2) {
        assert!(pair[1].sup.mean < pair[0].sup.mean, "{:?}", gaps.rows);
    }
}

#[test]
fn example2_gap_rates() {
    let b = example2(0.9, 1.0, RadiusConstruction::SqrtClosedForm, &derive_example2(6.0, 1e3, 10_000)).unwrap();
    let gaps = interpolant_gap(&b.problem, &b.policy, &gap_study((4..=9).collect(), 12, 4.0, 1000)).unwrap();
    let fixed = gaps.fit_fixed_time().unwrap();
    assert!((fixed.slope - 0.5).abs() <= 0.15, "{fixed:?}");
    let sup = gaps.fit_sup().unwrap();
    assert!((sup.slope - sup.theoretical_slope).abs() <= 0.2, "{sup:?}");
}
