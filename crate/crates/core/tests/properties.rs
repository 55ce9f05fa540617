use proptest::prelude::*;

use sat2mapf::formula::{brute_force_sat, Assignment, Clause, Formula, Literal};
use sat2mapf::reduction::{build, count_leftward_dag_moves, d_star, Variant};
use sat2mapf::validator::{check_lemma1, validate, MotionMode};
use sat2mapf::witness::{extract_assignment_general, extract_assignment_monotone, synth_feasible_monotone, synth_optimal_plan};

fn formula() -> impl Strategy<Value = Formula> {
    (1u32..=4).prop_flat_map(|n| {
        let literal = (1..=n, any::<bool>()).prop_map(|(v, p)| Literal::new(v, p));
        let clause = prop::collection::vec(literal, 1..=3).prop_map(|lits| Clause::new(lits).unwrap());
        prop::collection::vec(clause, 1..=5).prop_map(move |cs| Formula::new(n, cs).unwrap())
    })
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Monotone), Just(Variant::General)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn reduction_shape(f in formula(), v in variant()) {
        let (inst, layout) = build(&f, v);
        prop_assert_eq!(inst.map().height(), 3);
        let blockers = if v == Variant::General { f.occurring_vars().len() } else { 0 };
        prop_assert_eq!(inst.num_agents(), f.num_literals() + f.num_clauses() + blockers);
        prop_assert_eq!(count_leftward_dag_moves(&inst).unwrap(), 0);
        prop_assert_eq!(layout.check_instance(&inst).unwrap(), f);
    }

    #[test]
    fn satisfying_assignments_give_optimal_plans(f in formula(), v in variant()) {
        let (inst, layout) = build(&f, v);
        let dstar = d_star(&inst).unwrap();
        match brute_force_sat(&f).unwrap() {
            Some(a) => {
                let plan = synth_optimal_plan(&inst, &layout, &a).unwrap();
                let mode = if v == Variant::Monotone { MotionMode::Monotone } else { MotionMode::Sequential };
                let r = validate(&inst, &plan, mode).unwrap();
                prop_assert!(r.feasible);
                prop_assert_eq!(r.cost, dstar);
                prop_assert!(check_lemma1(&inst, &layout, &plan).unwrap());
                let back = match v {
                    Variant::Monotone => extract_assignment_monotone(&inst, &layout, &plan),
                    Variant::General => extract_assignment_general(&inst, &layout, &plan),
                }
                .unwrap();
                prop_assert!(f.eval(&back).unwrap());
            }
            None => {
                let bad = Assignment::all(f.num_vars(), true);
                prop_assert!(synth_optimal_plan(&inst, &layout, &bad).is_err());
            }
        }
    }

    #[test]
    fn fallback_plan_is_monotone(f in formula()) {
        let (inst, layout) = build(&f, Variant::Monotone);
        let plan = synth_feasible_monotone(&inst, &layout).unwrap();
        let r = validate(&inst, &plan, MotionMode::Monotone).unwrap();
        prop_assert!(r.feasible && r.is_monotone);
        prop_assert!(r.cost >= d_star(&inst).unwrap());
    }
}
