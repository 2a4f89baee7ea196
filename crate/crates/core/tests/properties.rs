//! Property tests for the crate-wide invariants.

use proptest::prelude::*;

use react_core::encoding::{
    crossover_single_point, decode_continuous_dim, decode_discrete_dim, mutate, random_genome,
    DimSpec, Genome, GenomeSpec,
};
use react_core::env::{Env, GridSpec, Position, ReachSpec, TerminalKind};
use react_core::metrics::{
    local_fitness, one_way_distance_points, score, DemoPool, FitnessMode, PoolEntry,
};
use react_core::policy::{dedupe, Step, Trajectory};

fn bits_strategy(len: usize) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(any::<bool>(), len)
}

fn cell_positions(max_len: usize) -> impl Strategy<Value = Vec<Position>> {
    proptest::collection::vec((1i64..=9, 1i64..=9), 1..=max_len).prop_map(|cells| {
        cells
            .into_iter()
            .map(|(r, c)| Position::new2(r as f64, c as f64))
            .collect()
    })
}

fn grid_traj(positions: Vec<Position>, probs: Vec<f64>, ret: f64) -> Trajectory {
    let steps = probs
        .into_iter()
        .map(|p| Step {
            state: positions[0],
            action: 0,
            action_prob: p,
            reward: 0.0,
        })
        .collect();
    Trajectory {
        steps,
        ret,
        kind: TerminalKind::Timeout,
        raw_positions: positions.clone(),
        positions: dedupe(&positions),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn discrete_decode_stays_in_range(bits in bits_strategy(6), min in -5i64..5, span in 0i64..40) {
        let max = min + span;
        let v = decode_discrete_dim(&bits, min, max);
        prop_assert!(v >= min && v <= max);
    }

    #[test]
    fn continuous_decode_stays_in_range(bits in bits_strategy(9), min in -2.0f64..2.0, span in 0.0f64..4.0) {
        let max = min + span;
        let v = decode_continuous_dim(&bits, min, max);
        prop_assert!(v >= min - 1e-12 && v <= max + 1e-12);
    }

    #[test]
    fn genetic_operators_preserve_length(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let spec = GenomeSpec::new(vec![DimSpec::discrete(1, 9); 2], 6).unwrap();
        let a = random_genome(&spec, &mut rng);
        let b = random_genome(&spec, &mut rng);
        let m = mutate(&a, &mut rng);
        prop_assert_eq!(m.len(), a.len());
        prop_assert_eq!(a.hamming(&m), 1);
        let (c1, c2) = crossover_single_point(&a, &b, &mut rng).unwrap();
        prop_assert_eq!(c1.len(), a.len());
        prop_assert_eq!(c2.len(), a.len());
        for i in 0..a.len() {
            let mut parents = [a.bits()[i], b.bits()[i]];
            let mut children = [c1.bits()[i], c2.bits()[i]];
            parents.sort();
            children.sort();
            prop_assert_eq!(parents, children);
        }
    }

    #[test]
    fn genome_serialization_round_trips(bits in bits_strategy(18)) {
        let genome = Genome::from_bits(bits);
        let text = genome.to_string();
        prop_assert_eq!(Genome::parse(&text).unwrap(), genome);
    }

    #[test]
    fn dedupe_never_leaves_consecutive_duplicates(cells in cell_positions(30)) {
        let out = dedupe(&cells);
        prop_assert!(!out.is_empty());
        prop_assert!(out.windows(2).all(|w| w[0] != w[1]));
        // order-preserving subsequence
        let mut idx = 0;
        for p in &cells {
            if idx < out.len() && out[idx] == *p {
                idx += 1;
            }
        }
        prop_assert_eq!(idx, out.len());
    }

    #[test]
    fn reach_positions_never_leave_bounds(
        start in proptest::collection::vec(-0.25f64..=0.25, 3),
        actions in proptest::collection::vec(0usize..7, 1..60),
    ) {
        let spec = ReachSpec::cube();
        let mut pos = Position::from_slice(&start);
        for (i, &action) in actions.iter().enumerate() {
            let out = spec.step(&pos, action, i + 1);
            prop_assert!(spec.in_bounds(&out.next));
            pos = out.next;
        }
    }

    #[test]
    fn grid_steps_are_deterministic_and_costed(r in 1i64..=9, c in 1i64..=9, action in 0usize..4) {
        let grid = GridSpec::holey11();
        if !grid.is_valid_start((r, c)) {
            return Ok(());
        }
        let pos = Position::new2(r as f64, c as f64);
        let a = grid.step(&pos, action, 1);
        let b = grid.step(&pos, action, 1);
        prop_assert_eq!(a, b);
        prop_assert!(a.reward <= grid.step_cost + grid.goal_reward);
    }

    #[test]
    fn fitness_components_stay_in_bounds(
        cells in cell_positions(20),
        probs in proptest::collection::vec(0.001f64..=1.0, 1..8),
        pool_data in proptest::collection::vec((cell_positions(15), 0.001f64..=1.0, 0.001f64..=1.0), 0..5),
        ret in -100.0f64..50.0,
    ) {
        let env = Env::Grid(GridSpec::flat11());
        let traj = grid_traj(cells, probs, ret);
        let mut pool = DemoPool::new();
        for (id, (positions, d_local, certainty)) in pool_data.into_iter().enumerate() {
            pool.insert(id as u64, PoolEntry {
                trajectory: grid_traj(positions, vec![0.5], 0.0),
                d_local,
                certainty,
            });
        }
        let b = score(&traj, None, &pool, FitnessMode::Joint, &env).unwrap();
        prop_assert!(b.d_local > 0.0 && b.d_local <= 1.0);
        prop_assert!(b.certainty > 0.0 && b.certainty <= 1.0);
        prop_assert!(b.d_global >= 0.0 && b.d_global <= 1.0);
        prop_assert!(b.f_local >= 0.0 && b.f_local <= std::f64::consts::SQRT_2);
        prop_assert_eq!(b.total, b.d_global + b.f_local);
    }

    #[test]
    fn one_way_distance_is_a_symmetric_premetric(
        a in cell_positions(15),
        b in cell_positions(15),
    ) {
        let ab = one_way_distance_points(&a, &b).unwrap();
        let ba = one_way_distance_points(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(one_way_distance_points(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn local_fitness_min_never_exceeds_any_member_distance(
        dl in 0.001f64..=1.0,
        c in 0.001f64..=1.0,
        members in proptest::collection::vec((0.001f64..=1.0, 0.001f64..=1.0), 1..6),
    ) {
        let mut pool = DemoPool::new();
        for (id, (d_local, certainty)) in members.iter().enumerate() {
            pool.insert(id as u64, PoolEntry {
                trajectory: grid_traj(vec![Position::new2(1.0, 1.0)], vec![0.5], 0.0),
                d_local: *d_local,
                certainty: *certainty,
            });
        }
        let f = local_fitness(dl, c, None, &pool);
        for (d_local, certainty) in &members {
            let dist = ((dl - d_local).powi(2) + (c - certainty).powi(2)).sqrt();
            prop_assert!(f <= dist + 1e-15);
        }
    }
}
