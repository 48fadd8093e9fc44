use std::collections::BTreeSet;

use proptest::prelude::*;
use topofield::model::*;
use topofield::sampler::*;

#[test]
fn volume_fractions_are_uniform_within_three_sigma() {
    let dom = DesignDomain::with_size(32, 16);
    let cat = enumerate_bc_scenarios();
    let mut rng = sample_rng(2024, 0);
    let n = 10_000;
    let mut counts = [0usize; 11];
    let mut angles = [0usize; 7];
    let mut scenarios = BTreeSet::new();
    for _ in 0..n {
        let spec = sample_problem(&mut rng, &cat, &dom).unwrap();
        let k = VF_GRID.iter().position(|&v| v == spec.vf_target).unwrap();
        counts[k] += 1;
        angles[spec.load_angle_step as usize] += 1;
        scenarios.insert(spec.scenario.id);
        let a = spec.load_angle();
        assert!((0..7).any(|k| (a - k as f64 * std::f64::consts::PI / 6.0).abs() < 1e-15));
    }
    let p = 1.0 / 11.0;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "count {c}");
    }
    assert!(angles.iter().all(|&c| c > 0));
    assert_eq!(scenarios.len(), 42);
}

#[test]
fn fixed_seed_reproduces_the_first_hundred_draws() {
    let dom = DesignDomain::with_size(20, 10);
    let cat = enumerate_bc_scenarios();
    let draw = |seed| {
        let mut rng = sample_rng(seed, 5);
        (0..100)
            .map(|_| sample_problem(&mut rng, &cat, &dom).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(99), draw(99));
    assert_ne!(draw(99), draw(100));
}

#[test]
fn forty_two_scenarios_hold_out_exactly_four() {
    let samples: Vec<(u64, usize)> = (0..840).map(|i| (i, (i % 42) as usize)).collect();
    let (plan, labels) = plan_splits(&samples, 3).unwrap();
    assert_eq!(plan.test_scenarios.len(), 4);
    assert_eq!(labels.len(), 840);
    let mut train_val_scenarios = BTreeSet::new();
    for &(id, sc) in &samples {
        match labels[&id] {
            SplitLabel::Test => assert!(plan.test_scenarios.contains(&sc)),
            _ => {
                train_val_scenarios.insert(sc);
            }
        }
    }
    assert!(plan.test_scenarios.iter().all(|s| !train_val_scenarios.contains(s)));
    assert_eq!(train_val_scenarios.len(), 38);
}

#[test]
fn thousand_remaining_samples_split_eight_hundred_to_two_hundred() {
    // whichever four of five scenarios are held out, 1000 samples remain
    let samples: Vec<(u64, usize)> = (0..5000).map(|i| (i, (i / 1000) as usize)).collect();
    let (_, labels) = plan_splits(&samples, 8).unwrap();
    let count = |l| labels.values().filter(|&&x| x == l).count();
    assert_eq!(count(SplitLabel::Test), 4000);
    assert_eq!(count(SplitLabel::Train), 800);
    assert_eq!(count(SplitLabel::Val), 200);
}

#[test]
fn duplicate_ids_are_rejected() {
    let mut samples: Vec<(u64, usize)> = (0..20).map(|i| (i, i as usize % 6)).collect();
    samples.push((3, 1));
    assert_eq!(plan_splits(&samples, 0).unwrap_err(), SamplerError::DuplicateId(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn labels_are_exhaustive_and_order_independent(
        scen in prop::collection::vec(0usize..42, 20..300),
        seed in any::<u64>(),
        rot in 0usize..300,
    ) {
        let samples: Vec<(u64, usize)> = scen.iter().enumerate().map(|(i, &s)| (i as u64 * 3 + 1, s)).collect();
        let distinct: BTreeSet<usize> = scen.iter().copied().collect();
        prop_assume!(distinct.len() >= 5);
        let (plan, labels) = plan_splits(&samples, seed).unwrap();
        let mut rotated = samples.clone();
        rotated.rotate_left(rot % samples.len());
        let (plan2, labels2) = plan_splits(&rotated, seed).unwrap();
        prop_assert_eq!(&plan, &plan2);
        prop_assert_eq!(&labels, &labels2);
        prop_assert_eq!(labels.len(), samples.len());
        let rest = samples.iter().filter(|s| !plan.test_scenarios.contains(&s.1)).count();
        let train = labels.values().filter(|&&l| l == SplitLabel::Train).count();
        prop_assert!((train as f64 - 0.8 * rest as f64).abs() <= 1.0);
        for &(id, sc) in &samples {
            prop_assert_eq!(labels[&id] == SplitLabel::Test, plan.test_scenarios.contains(&sc));
        }
    }

    #[test]
    fn sampled_specs_round_trip_through_json(seed in any::<u64>(), stream in 0u64..1000) {
        let dom = DesignDomain::with_size(16, 8);
        let cat = enumerate_bc_scenarios();
        let spec = sample_problem(&mut sample_rng(seed, stream), &cat, &dom).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ProblemSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn drawn_loads_always_do_work() {
    let dom = DesignDomain::with_size(16, 8);
    let cat = enumerate_bc_scenarios();
    let mut rng = sample_rng(3, 0);
    for _ in 0..5_000 {
        let spec = sample_problem(&mut rng, &cat, &dom).unwrap();
        spec.validate(&dom).unwrap();
        assert!(!spec.load_is_resisted_only_by_supports(&dom));
    }
}

#[test]
fn load_along_a_roller_direction_is_rejected() {
    let dom = DesignDomain::with_size(16, 8);
    // left edge holds ux only; the bottom edge holds uy
    let scenario = enumerate_bc_scenarios()
        .into_iter()
        .find(|s| {
            s.constraints
                == [
                    Constraint::new(NodeRegion::Edge { edge: Edge::Left }, Fixity::Ux),
                    Constraint::new(NodeRegion::Edge { edge: Edge::Bottom }, Fixity::Uy),
                ]
        })
        .unwrap();
    let mid_left = dom.node_index(0, dom.nely / 2);
    assert!(matches!(
        ProblemSpec::new(0.4, scenario.clone(), mid_left, 0, &dom),
        Err(ModelError::InvalidProblem(_))
    ));
    assert!(matches!(
        ProblemSpec::new(0.4, scenario.clone(), mid_left, 6, &dom),
        Err(ModelError::InvalidProblem(_))
    ));
    for step in 1..6 {
        ProblemSpec::new(0.4, scenario.clone(), mid_left, step, &dom).unwrap();
    }
}

#[test]
fn axis_loads_have_exact_components() {
    let dom = DesignDomain::with_size(16, 8);
    let scenario = enumerate_bc_scenarios().swap_remove(0);
    let node = dom.node_index(dom.nelx, 0);
    let comps = |k| ProblemSpec::new(0.4, scenario.clone(), node, k, &dom).unwrap().load_components();
    assert_eq!(comps(0), (1.0, 0.0));
    assert_eq!(comps(3), (0.0, 1.0));
    assert_eq!(comps(6), (-1.0, 0.0));
    for k in 0..7 {
        let (fx, fy) = comps(k);
        let a = k as f64 * std::f64::consts::PI / 6.0;
        assert!((fx - a.cos()).abs() < 1e-15 && (fy - a.sin()).abs() < 1e-15);
    }
}
