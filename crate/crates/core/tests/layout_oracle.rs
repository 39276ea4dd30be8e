//! Cross-checks the branch-and-bound layout solver against the exhaustive
//! direction-enumeration reference on seeded random problems.

use cvtg_core::layout::{
    solve_layout, solve_layout_exhaustive, verify_layout, LayoutError, LayoutProblem,
};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> LayoutProblem {
    let targets = (0..n).map(|_| (unit(rng), unit(rng))).collect();
    // Keep the joint area under ~60% of the canvas so most draws are
    // feasible but separation still binds often.
    let a_min = 0.02 + 0.6 * unit(rng) / n as f64;
    let r_min = 0.5 + unit(rng);
    let r_max = r_min + 0.5 + 4.0 * unit(rng);
    LayoutProblem::new(targets, a_min, r_min, r_max)
}

#[test]
fn branch_and_bound_matches_enumeration_on_seeded_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1A70);
    let mut solved = 0usize;
    let mut infeasible = 0usize;
    for case in 0..100 {
        let n = 1 + (case % 3);
        let problem = random_problem(&mut rng, n);
        let fast = solve_layout(&problem);
        let reference = solve_layout_exhaustive(&problem);
        match (fast, reference) {
            (Ok(fast), Ok(reference)) => {
                assert!(
                    (fast.objective - reference.objective).abs() <= 1e-6,
                    "case {case}: solver {} vs oracle {} on {problem:?}",
                    fast.objective,
                    reference.objective
                );
                let violations = verify_layout(&fast, &problem);
                assert!(violations.is_empty(), "case {case}: {violations:?}");
                solved += 1;
            }
            (Err(LayoutError::Infeasible { .. }), Err(LayoutError::Infeasible { .. })) => {
                infeasible += 1;
            }
            (fast, reference) => panic!(
                "case {case}: solver and oracle disagree: {fast:?} vs {reference:?} on {problem:?}"
            ),
        }
    }
    // The draw ranges are chosen to make most cases feasible.
    assert!(solved >= 70, "only {solved} solved, {infeasible} infeasible");
}

#[test]
fn interior_targets_with_room_cost_nothing() {
    // With a_min = 0.04 and aspect 1..6 the smallest feasible box is
    // 0.2 x 0.2; any target at least 0.1 from every border fits centered.
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    for _ in 0..25 {
        let target = (0.12 + 0.76 * unit(&mut rng), 0.12 + 0.76 * unit(&mut rng));
        let problem = LayoutProblem::new(vec![target], 0.04, 1.0, 6.0);
        let solution = solve_layout(&problem).unwrap();
        assert!(
            solution.objective.abs() < 1e-7,
            "target {target:?} cost {}",
            solution.objective
        );
    }
}

#[test]
fn coincident_pair_fixture_objective() {
    let problem = LayoutProblem::new(vec![(0.5, 0.5), (0.5, 0.5)], 0.04, 1.0, 1.0);
    let solution = solve_layout(&problem).unwrap();
    assert!((solution.objective - 0.2).abs() <= 1e-6);
    let reference = solve_layout_exhaustive(&problem).unwrap();
    assert!((reference.objective - 0.2).abs() <= 1e-6);
}

#[test]
fn five_box_problems_solve_and_verify() {
    // Beyond the oracle's reach, the solution must still verify.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed5);
    for case in 0..5 {
        let targets: Vec<(f64, f64)> = (0..5).map(|_| (unit(&mut rng), unit(&mut rng))).collect();
        let problem = LayoutProblem::with_default_geometry(targets);
        let solution = solve_layout(&problem).unwrap();
        let violations = verify_layout(&solution, &problem);
        assert!(violations.is_empty(), "case {case}: {violations:?}");
        assert_eq!(solution.separation.len(), 10);
    }
}
