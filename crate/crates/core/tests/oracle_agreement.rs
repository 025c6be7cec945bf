use podplan_core::decompose::decompose_instance;
use podplan_core::flow::plan_integrated;
use podplan_core::hierarchical::{plan_hierarchical, HierarchicalOptions};
use podplan_core::model::{CostConfig, TimeGrid};
use podplan_core::oracle::{audit, brute_force_schedule, Reachability};
use podplan_core::synth::gen_tiny_instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_costs(seed: u64, stations: usize) -> CostConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let fleet = [0.0, 1.0, 13.7][rng.gen_range(0..3)];
    let mv = [0.0, 0.03, 0.05][rng.gen_range(0..3)];
    let parks: Vec<f64> = (0..stations).map(|_| rng.gen_range(0..=8) as f64 / 100.0).collect();
    CostConfig::from_currency(fleet, mv, &parks).unwrap()
}

#[test]
fn integrated_matches_discretized_oracle_and_bounds_continuous() {
    for seed in 0..100 {
        let dt = [30, 60][seed as usize % 2];
        let inst = gen_tiny_instance(seed, dt, 10);
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(dt, inst.horizon_s).unwrap();
        let costs = random_costs(seed, inst.station_count());
        let plan = plan_integrated(&inst, &grid, &costs).unwrap();
        let (disc, witness) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Discretized).unwrap();
        assert_eq!(plan.objective, disc, "seed {seed}");
        assert!(audit(&witness, &inst, &routes, &grid, &costs, disc).is_clean(), "seed {seed}");
        let report = audit(&plan.itineraries, &inst, &routes, &grid, &costs, plan.objective);
        assert!(report.is_clean(), "seed {seed}: {:?}", report.violations);
        let (cont, _) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Continuous).unwrap();
        assert!(cont <= plan.objective, "seed {seed}");
    }
}

#[test]
fn hierarchical_outputs_pass_audit_on_tiny_instances() {
    for seed in 0..100 {
        let inst = gen_tiny_instance(seed + 1000, 60, 10);
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, inst.horizon_s).unwrap();
        let costs = random_costs(seed, inst.station_count());
        let plan = plan_hierarchical(&inst, &grid, &costs, &HierarchicalOptions::default()).unwrap();
        let report = audit(&plan.itineraries, &inst, &routes, &grid, &costs, plan.objective);
        assert!(report.is_clean(), "seed {seed}: {:?}", report.violations);
        // hierarchical never beats the exact continuous-reachability optimum
        let (cont, _) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Continuous).unwrap();
        assert!(cont <= plan.objective, "seed {seed}");
    }
}

mod properties {
    use super::*;
    use podplan_core::flow::solve_min_cost_circulation;
    use podplan_core::tsn::build_integrated_network;
    use podplan_core::synth::{gen_instance, SynthParams};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn halving_the_step_never_raises_the_objective(seed in 0u64..10_000, runs in 1usize..7) {
            let mut p = SynthParams::new(seed, 4, runs, 7200);
            p.area_m = 1500.0;
            p.stops_max = 4;
            let inst = gen_instance(&p).unwrap();
            let costs = random_costs(seed, inst.station_count());
            let coarse = plan_integrated(&inst, &TimeGrid::for_instance(&inst, 60).unwrap(), &costs).unwrap();
            let fine = plan_integrated(&inst, &TimeGrid::for_instance(&inst, 30).unwrap(), &costs).unwrap();
            prop_assert!(fine.objective <= coarse.objective);
        }

        #[test]
        fn raising_one_arc_cost_never_lowers_the_objective(seed in 0u64..10_000, pick in any::<prop::sample::Index>(), bump in 1i64..5_000_000) {
            let inst = gen_tiny_instance(seed, 60, 10);
            let routes = decompose_instance(&inst);
            let grid = TimeGrid::new(60, inst.horizon_s).unwrap();
            let costs = random_costs(seed, inst.station_count());
            let net = build_integrated_network(&inst, &routes, &grid, &costs).unwrap();
            let base = solve_min_cost_circulation(&net).unwrap().objective;
            let mut bumped = net.clone();
            let i = pick.index(bumped.arcs.len());
            bumped.arcs[i].cost += bump;
            prop_assert!(solve_min_cost_circulation(&bumped).unwrap().objective >= base);
        }
    }
}
