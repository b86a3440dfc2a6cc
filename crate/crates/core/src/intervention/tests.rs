use super::*;
use crate::graph::NodeId;
use crate::io::fixtures::{job_market, prisoners_dilemma, stackelberg};
use crate::model::{expected_utilities, induced_joint, CausalGame, DecisionRule, PolicyProfile, TabularCpd, EPS_PROB};

fn edge(a: &str, b: &str) -> MechEdge {
    (NodeId::parse(a), NodeId::parse(b))
}

fn do_d1_g(g: &CausalGame) -> PrimitiveIntervention {
    PrimitiveIntervention::do_value(g, "D1", "g").unwrap()
}

#[test]
fn hard_fix_of_the_worker_cuts_only_the_firm_dependency() {
    let g = job_market();
    let report = side_effects(&g, &do_d1_g(&g)).unwrap();
    assert_eq!(report.removed, vec![edge("PI_D1", "PI_D2")]);
    assert!(report.added.is_empty());
    assert_eq!(report.predicted_removed, vec![edge("PI_D1", "PI_D2")]);
    assert!(report.prediction_holds());

    let after = apply_primitive(&g, &do_d1_g(&g)).unwrap().game;
    assert!(after.parents("D1").is_empty());
    assert!(reachability_paths_empty(&after, "PI_D1", "PI_D2"));
}

fn reachability_paths_empty(g: &CausalGame, a: &str, b: &str) -> bool {
    crate::graph::reachability_paths(g, &NodeId::parse(a), &NodeId::parse(b))
        .unwrap()
        .is_empty()
}

#[test]
fn parameter_fix_has_no_side_effects() {
    let g = job_market();
    let fix = PrimitiveIntervention::fix_param(TabularCpd::delta("T", 2, vec![], vec![], 0));
    assert!(side_effects(&g, &fix).unwrap().is_empty());
    assert!(incentive_invariant(&g, std::slice::from_ref(&fix)).unwrap());
    let after = apply_primitive(&g, &fix).unwrap().game;
    assert_eq!(after.entry("T").unwrap().cpd.as_ref().unwrap().row(0), &[1.0, 0.0]);
    assert!(side_effects(
        &g,
        &Primitive::FixObject {
            target: "T".into(),
            parents: vec![],
            cpd: g.entry("T").unwrap().cpd.clone(),
        }
        .into()
    )
    .unwrap()
    .is_empty());
}

#[test]
fn hiding_the_signal_is_not_incentive_invariant() {
    let g = job_market();
    let del = remove_edge(&g, "D1", "D2", None).unwrap();
    let report = side_effects(&g, &del).unwrap();
    assert!(report.removed.contains(&edge("PI_D1", "PI_D2")));
    assert!(!incentive_invariant(&g, &[del]).unwrap());
}

#[test]
fn removing_an_edge_mixes_the_parent_out_under_its_marginal() {
    let g = job_market();
    let del = remove_edge(&g, "T", "U2", None).unwrap();
    let after = apply_primitive(&g, &del).unwrap().game;
    let u2 = after.entry("U2").unwrap().cpd.clone().unwrap();
    assert_eq!(u2.parents(), &["D2".to_string()]);
    // Domain -2 -1 0 3. Given j: 3 or -2 with P(T) = 1/2 each; given nj: -1 or 0.
    let j = u2.row(0);
    let nj = u2.row(1);
    assert!((j[0] - 0.5).abs() < 1e-12 && (j[3] - 0.5).abs() < 1e-12);
    assert!((nj[1] - 0.5).abs() < 1e-12 && (nj[2] - 0.5).abs() < 1e-12);
}

#[test]
fn removing_an_edge_can_condition_on_a_profile() {
    let g = job_market();
    // Worker plays g iff hard; firm always hires. Then T is D1 exactly, and
    // given D2 = j the temperament is still uniform.
    let d1 = DecisionRule::pure("D1", 2, vec!["T".into()], vec![2], &[0, 1]);
    let d2 = DecisionRule::pure("D2", 2, vec!["D1".into()], vec![2], &[0, 0]);
    let p = PolicyProfile::new().with("D1", d1).with("D2", d2);
    let del = remove_edge(&g, "T", "U1", Some(&p)).unwrap();
    let after = apply_primitive(&g, &del).unwrap().game;
    let u1 = after.entry("U1").unwrap().cpd.clone().unwrap();
    // Context (D1 = g, D2 = j): only hard workers go, so U1 = 4 surely.
    let row = u1.row(u1.row_index(&[0, 0]));
    assert!((row[4] - 1.0).abs() < 1e-12);
}

#[test]
fn minimum_sets() {
    let pi = |d: &str| NodeId::rule(d);
    let g = job_market();
    let s = minimum_intervention_set(&g, &pi("D1"), &pi("D2")).unwrap();
    assert_eq!(s.into_iter().collect::<Vec<_>>(), vec!["D1".to_string()]);
    let s = minimum_intervention_set(&stackelberg(), &pi("D1"), &pi("D2")).unwrap();
    assert_eq!(s.into_iter().collect::<Vec<_>>(), vec!["D1".to_string()]);
    let after = apply_primitive(&g, &do_d1_g(&g)).unwrap().game;
    assert!(matches!(
        minimum_intervention_set(&after, &pi("D1"), &pi("D2")),
        Err(crate::Error::DependencyAbsent { .. })
    ));
}

#[test]
fn fix_and_unfix_round_trip() {
    let g = job_market();
    let applied = apply_primitive(&g, &do_d1_g(&g)).unwrap();
    let back = apply_primitive(&applied.game, &unfix(&applied.record).unwrap())
        .unwrap()
        .game;
    assert!(back.structurally_eq(&g, EPS_PROB));
    assert!(matches!(invert(&do_d1_g(&g)), Err(crate::Error::NoJournal)));
}

#[test]
fn identity_inverts_to_itself() {
    let g = job_market();
    let id: PrimitiveIntervention = Primitive::FixObject {
        target: "U2".into(),
        parents: g.parents("U2").to_vec(),
        cpd: g.entry("U2").unwrap().cpd.clone(),
    }
    .into();
    let a = apply_primitive(&g, &id).unwrap();
    assert!(a.game.structurally_eq(&g, 0.0));
    assert_eq!(invert(&a.record).unwrap(), id);
}

#[test]
fn edge_round_trip_on_a_chance_target() {
    let g = job_market();
    let add = apply_primitive(&g, &add_edge(&g, "D1", "U2").unwrap()).unwrap().game;
    assert_eq!(add.parents("U2"), &["T", "D2", "D1"]);
    let back = apply_primitive(&add, &remove_edge(&add, "D1", "U2", None).unwrap())
        .unwrap()
        .game;
    assert!(back.structurally_eq(&g, EPS_PROB));
    assert!(matches!(add_edge(&g, "D2", "T"), Err(crate::Error::Cycle(_))));
}

#[test]
fn hard_fixes_do_not_commute() {
    let g = job_market();
    let a = PrimitiveIntervention::do_value(&g, "T", "h").unwrap();
    let b = PrimitiveIntervention::do_value(&g, "T", "l").unwrap();
    let ab = apply_all(&g, &[a.clone(), b.clone()]).unwrap().0;
    let ba = apply_all(&g, &[b, a]).unwrap().0;
    assert!(!ab.structurally_eq(&ba, EPS_PROB));
}

#[test]
fn removal_integrates_out_and_inverts() {
    let g = job_market();
    let rm: PrimitiveIntervention = Primitive::RemoveVariable {
        target: "T".into(),
        replacements: vec![],
    }
    .into();
    let a = apply_primitive(&g, &rm).unwrap();
    assert_eq!(a.game.parents("U1"), &["D1", "D2"]);
    let u1 = a.game.entry("U1").unwrap().cpd.clone().unwrap();
    // (g, j): 4 or 3 with probability 1/2 each.
    let row = u1.row(u1.row_index(&[0, 0]));
    assert!((row[3] - 0.5).abs() < 1e-12 && (row[4] - 0.5).abs() < 1e-12);
    let back = apply_primitive(&a.game, &invert(&a.record).unwrap()).unwrap().game;
    assert!(back.structurally_eq(&g, EPS_PROB));
    assert_eq!(back.names().collect::<Vec<_>>(), g.names().collect::<Vec<_>>());
}

#[test]
fn removing_a_free_decision_with_dependent_children_needs_tables() {
    let g = job_market();
    let rm: PrimitiveIntervention = Primitive::RemoveVariable {
        target: "D2".into(),
        replacements: vec![],
    }
    .into();
    assert!(matches!(
        apply_primitive(&g, &rm),
        Err(crate::Error::NeedsReplacement { .. })
    ));
}

#[test]
fn trivial_decomposition_matches_the_direct_fix() {
    let g = job_market();
    for p in [
        PrimitiveIntervention::do_value(&g, "T", "h").unwrap(),
        do_d1_g(&g),
        remove_edge(&g, "T", "U2", None).unwrap(),
    ] {
        let direct = apply_primitive(&g, &p).unwrap().game;
        let parts = trivial_decomposition(&g, &p).unwrap();
        let split = apply_all(&g, &parts).unwrap().0;
        assert!(direct.structurally_eq(&split, 0.0), "{p}");
        let d1 = DecisionRule::pure(
            "D1",
            2,
            direct.parents("D1").to_vec(),
            direct.parent_cards("D1"),
            &vec![0; direct.parent_cards("D1").iter().product()],
        );
        let d2 = DecisionRule::pure("D2", 2, vec!["D1".into()], vec![2], &[0, 1]);
        let prof = PolicyProfile::new().with("D1", d1).with("D2", d2);
        let ja = induced_joint(&direct, &prof).unwrap();
        let jb = induced_joint(&split, &prof).unwrap();
        assert_eq!(ja.iter().count(), jb.iter().count());
        for (k, v) in ja.iter() {
            assert!((jb.prob(k) - v).abs() < 1e-12);
        }
    }
}

fn reward(g: &CausalGame, u: &str) -> PrimitiveIntervention {
    // Mutual cooperation pays 0 instead of -1.
    let mut cpd = g.entry(u).unwrap().cpd.clone().unwrap();
    let zero = g.value_index(u, "0").unwrap();
    let row = cpd.row_mut(0);
    row.iter_mut().for_each(|p| *p = 0.0);
    row[zero] = 1.0;
    PrimitiveIntervention::fix_param(cpd)
}

fn rewards(g: &CausalGame) -> Vec<LabelledIntervention> {
    vec![
        LabelledIntervention::new("r1", reward(g, "U1")),
        LabelledIntervention::new("r2", reward(g, "U2")),
    ]
}

#[test]
fn rewards_visible_to_one_prisoner_decompose_both_ways() {
    let g = prisoners_dilemma();
    let is = rewards(&g);
    let vis = VisibilityMap::new().with(2, Vec::<String>::new());

    let d = decompose(&g, &is, &vis, &DecomposeOptions::default()).unwrap();
    assert_eq!(d.stages.len(), 2);
    assert!(d.stages[0].steps.is_empty());
    assert_eq!(d.stages[0].agents, vec![2]);
    assert_eq!(d.stages[1].agents, vec![1]);
    assert_eq!(d.stages[1].steps.len(), 2);

    let d = decompose(
        &g,
        &is,
        &vis,
        &DecomposeOptions {
            order: Some(vec![1, 2]),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(d.stages.len(), 2);
    assert_eq!(d.stages[0].agents, vec![1]);
    assert_eq!(d.stages[0].steps.len(), 2);
    assert_eq!(d.stages[1].agents, vec![2]);
    assert!(d.stages[1].steps.iter().all(|s| s.inverse));
    for (j, s) in d.stages.iter().enumerate() {
        let after = game_after(&g, &d, j).unwrap();
        for &a in &s.agents {
            assert!(after.structurally_eq(&visible_game(&g, &is, &vis, a).unwrap(), EPS_PROB));
        }
    }
    // After the undo the payoffs are the original ones.
    let last = game_after(&g, &d, 1).unwrap();
    let p = PolicyProfile::new()
        .with("D1", DecisionRule::pure("D1", 2, vec![], vec![], &[0]))
        .with("D2", DecisionRule::pure("D2", 2, vec![], vec![], &[0]));
    assert_eq!(expected_utilities(&last, &p).unwrap(), vec![-1.0, -1.0]);
}

#[test]
fn shared_visibility_is_a_single_stage() {
    let g = prisoners_dilemma();
    let is = rewards(&g);
    let d = decompose(&g, &is, &VisibilityMap::new(), &DecomposeOptions::default()).unwrap();
    assert_eq!(d.stages.len(), 1);
    assert_eq!(d.stages[0].agents, vec![1, 2]);
    assert_eq!(d.stages[0].steps.len(), 2);
}

#[test]
fn per_agent_construction_keeps_an_empty_first_group() {
    let g = prisoners_dilemma();
    let is = rewards(&g);
    let vis = VisibilityMap::new().with(1, ["r1"]).with(2, ["r2"]);
    let d = decompose(
        &g,
        &is,
        &vis,
        &DecomposeOptions {
            per_agent: true,
            order: None,
        },
    )
    .unwrap();
    assert_eq!(d.stages.len(), 3);
    assert!(d.stages[0].agents.is_empty());
    for (j, s) in d.stages.iter().enumerate() {
        let after = game_after(&g, &d, j).unwrap();
        for &a in &s.agents {
            assert!(after.structurally_eq(&visible_game(&g, &is, &vis, a).unwrap(), EPS_PROB));
        }
    }
}

#[test]
fn unknown_labels_are_rejected() {
    let g = prisoners_dilemma();
    let vis = VisibilityMap::new().with(1, ["nope"]);
    assert!(decompose(&g, &rewards(&g), &vis, &DecomposeOptions::default()).is_err());
    let vis = VisibilityMap::new().with(3, ["r1"]);
    assert!(decompose(&g, &rewards(&g), &vis, &DecomposeOptions::default()).is_err());
}

#[test]
fn committing_a_rule_and_releasing_it() {
    let g = stackelberg();
    let rule = DecisionRule::new(TabularCpd::new("D1", 2, vec![], vec![], vec![vec![0.5, 0.5]]).unwrap());
    let a = apply_primitive(&g, &PrimitiveIntervention::commit(rule)).unwrap();
    assert_eq!(a.game.free_decisions(), vec!["D2"]);
    let back = apply_primitive(&a.game, &invert(&a.record).unwrap()).unwrap().game;
    assert!(back.structurally_eq(&g, 0.0));
    let released = apply_primitive(&a.game, &PrimitiveIntervention::release("D1"))
        .unwrap()
        .game;
    assert!(released.structurally_eq(&g, 0.0));
}

#[test]
fn adding_a_variable_and_removing_it_again() {
    let g = job_market();
    let weather = crate::model::Variable::chance("W", crate::model::Domain::labels(["sun", "rain"]));
    let add: PrimitiveIntervention = Primitive::AddVariable {
        variable: weather,
        parents: vec![],
        cpd: Some(TabularCpd::new("W", 2, vec![], vec![], vec![vec![0.3, 0.7]]).unwrap()),
        rationality: crate::model::Rationality::BestResponse,
        children: vec![
            ChildUpdate {
                child: "U2".into(),
                table: None,
            },
            ChildUpdate {
                child: "D2".into(),
                table: None,
            },
        ],
        position: None,
    }
    .into();
    let a = apply_primitive(&g, &add).unwrap();
    assert_eq!(a.game.parents("D2"), &["D1", "W"]);
    let back = apply_primitive(&a.game, &invert(&a.record).unwrap()).unwrap().game;
    assert!(back.structurally_eq(&g, EPS_PROB));
}
