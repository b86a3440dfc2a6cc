use super::*;
use crate::intervention::{DecomposeOptions, LabelledIntervention, PrimitiveIntervention, VisibilityMap};
use crate::io::fixtures::{job_market, prisoners_dilemma, stackelberg};
use crate::model::{CausalGame, DecisionRule};

fn job(game: CausalGame, query: &str) -> QueryJob {
    QueryJob::new(game, parse_query(query).unwrap())
}

fn commit_b(g: &CausalGame) -> LabelledIntervention {
    let b = g.value_index("D1", "B").unwrap();
    LabelledIntervention::new(
        "commit",
        PrimitiveIntervention::commit(DecisionRule::pure("D1", 2, vec![], vec![], &[b])),
    )
}

fn real(r: &QueryResult) -> f64 {
    match r.verdict {
        Verdict::Real(v) => v,
        ref v => panic!("{v:?}"),
    }
}

#[test]
fn revealed_commitment_pays_three() {
    let g = stackelberg();
    let vis = VisibilityMap::new().with(1, Vec::<String>::new()).with(2, ["commit"]);
    let j = job(g.clone(), "sampled: E[1]").with_interventions(vec![commit_b(&g)], vis);
    let r = evaluate_query(&j).unwrap();
    assert_eq!(real(&r), 3.0);
    assert_eq!(r.decomposition.stages.len(), 2);
    assert_eq!(r.decomposition.stages[0].agents, vec![1]);
    assert!(r.decomposition.stages[0].steps.is_empty());
    assert_eq!(r.decomposition.stages[1].agents, vec![2]);
    // Agent 1's chosen rule is overridden by the commitment.
    assert_eq!(r.leaves[0].stages[1].overridden, vec![1]);
    assert_eq!(r.leaves[0].stages[1].pending, vec![2]);
    let classes = classify_visibility(&j).unwrap();
    assert_eq!(classes[&1], VisibilityClass::PostPolicy);
    assert_eq!(classes[&2], VisibilityClass::PrePolicy);
}

#[test]
fn private_commitment_is_applied_after_both_choose() {
    let g = stackelberg();
    let vis = VisibilityMap::new()
        .with(1, Vec::<String>::new())
        .with(2, Vec::<String>::new());
    let j = job(g.clone(), "forall ne: E[1]").with_interventions(vec![commit_b(&g)], vis);
    let r = evaluate_query(&j).unwrap();
    let d = &r.decomposition;
    assert_eq!(d.stages.len(), 2);
    assert_eq!(d.stages[0].agents, vec![1, 2]);
    assert!(d.stages[1].agents.is_empty());
    // The follower still plays L against the committed B.
    assert_eq!(r.verdict, Verdict::Values(vec![1.0]));
    let d2 = &r.leaves[0].profile.get("D2").unwrap();
    assert_eq!(d2.actions().unwrap(), vec![0]);
    let classes = classify_visibility(&j).unwrap();
    assert_eq!(classes[&2], VisibilityClass::PostPolicy);
}

fn rewards(g: &CausalGame) -> Vec<LabelledIntervention> {
    ["U1", "U2"]
        .iter()
        .map(|u| {
            let mut cpd = g.entry(u).unwrap().cpd.clone().unwrap();
            let zero = g.value_index(u, "0").unwrap();
            let row = cpd.row_mut(0);
            row.iter_mut().for_each(|p| *p = 0.0);
            row[zero] = 1.0;
            LabelledIntervention::new(format!("reward_{u}"), PrimitiveIntervention::fix_param(cpd))
        })
        .collect()
}

fn alice_sees(g: &CausalGame) -> VisibilityMap {
    let labels: Vec<String> = rewards(g).into_iter().map(|i| i.label).collect();
    VisibilityMap::new().with(1, labels).with(2, Vec::<String>::new())
}

#[test]
fn partially_visible_rewards_both_implementations() {
    let g = prisoners_dilemma();
    for order in [None, Some(vec![1, 2])] {
        let options = DecomposeOptions {
            per_agent: false,
            order: order.clone(),
        };
        let mixed = job(g.clone(), "sampled [mix-ties]: E[total]")
            .with_interventions(rewards(&g), alice_sees(&g))
            .with_options(options.clone());
        let r = evaluate_query(&mixed).unwrap();
        assert!((real(&r) + 4.5).abs() < 1e-9, "{order:?}");
        let all = job(g.clone(), "forall ne: E[total]")
            .with_interventions(rewards(&g), alice_sees(&g))
            .with_options(options);
        let r = evaluate_query(&all).unwrap();
        assert_eq!(r.verdict, Verdict::Values(vec![-5.0, -4.0]), "{order:?}");
        let classes = classify_visibility(&all).unwrap();
        assert_eq!(classes[&1], VisibilityClass::PrePolicy);
        let bob = if order.is_some() {
            VisibilityClass::Interleaved
        } else {
            VisibilityClass::PostPolicy
        };
        assert_eq!(classes[&2], bob);
    }
}

#[test]
fn quantifiers_over_leaves() {
    let g = prisoners_dilemma();
    let run = |q: &str| {
        evaluate_query(&job(g.clone(), q).with_interventions(rewards(&g), alice_sees(&g)))
            .unwrap()
            .verdict
    };
    assert_eq!(run("forall ne: E[total] <= -4"), Verdict::Bool(true));
    assert_eq!(run("forall ne: E[total] = -4"), Verdict::Bool(false));
    assert_eq!(run("exists ne: E[total] = -4"), Verdict::Bool(true));
    assert_eq!(run("exists ne: P(D1=C) = 1 and P(D2=D) = 1"), Verdict::Bool(true));
    assert_eq!(
        run("forall ne: E[1] = -4.9 within 0.2 or E[1] = -2"),
        Verdict::Bool(true)
    );
}

#[test]
fn sampling_is_stable_and_agrees_with_unique_outcomes() {
    let g = prisoners_dilemma();
    let values: Vec<f64> = (0..16)
        .map(|seed| {
            let j = job(g.clone(), "sampled: E[total]")
                .with_interventions(rewards(&g), alice_sees(&g))
                .with_seed(seed);
            let a = evaluate_query(&j).unwrap();
            assert_eq!(a, evaluate_query(&j).unwrap());
            real(&a)
        })
        .collect();
    assert!(values.iter().all(|v| *v == -5.0 || *v == -4.0));
    assert!(values.contains(&-5.0) && values.contains(&-4.0));

    let s = stackelberg();
    let vis = VisibilityMap::new().with(1, Vec::<String>::new()).with(2, ["commit"]);
    let sampled =
        evaluate_query(&job(s.clone(), "sampled: E[1]").with_interventions(vec![commit_b(&s)], vis.clone())).unwrap();
    let all = evaluate_query(&job(s.clone(), "forall ne: E[1]").with_interventions(vec![commit_b(&s)], vis)).unwrap();
    assert_eq!(all.verdict, Verdict::Values(vec![real(&sampled)]));
}

#[test]
fn fully_visible_is_intervene_then_solve() {
    let g = job_market();
    let fix = PrimitiveIntervention::do_value(&g, "T", "h").unwrap();
    let j = job(g.clone(), "forall ne: P(D2=j)")
        .with_interventions(vec![LabelledIntervention::new("h", fix.clone())], VisibilityMap::new());
    let r = evaluate_query(&j).unwrap();
    assert_eq!(r.verdict, Verdict::Values(vec![1.0]));
    assert!(r.leaves.len() >= 3);
    assert!(classify_visibility(&j)
        .unwrap()
        .values()
        .all(|c| *c == VisibilityClass::PrePolicy));
}

#[test]
fn environment_spec() {
    let g = job_market();
    let fix = PrimitiveIntervention::do_value(&g, "T", "h").unwrap();
    let event = [("D2", "j")];
    let c = check_spec_env(&g, &[fix], &event, SpecDirection::Increase, false).unwrap();
    assert!(c.holds);
    assert_eq!(c.after, (1.0, 1.0));
    let identity = check_spec_env(&g, &[], &event, SpecDirection::Increase, false).unwrap();
    assert!(identity.holds);
    let stochastic = check_spec_env(&g, &[], &event, SpecDirection::Increase, true).unwrap();
    assert!(!stochastic.holds);
    assert!((stochastic.after.0 - 17.0 / 20.0).abs() < 1e-9);
    assert!((stochastic.before.1 - 1.0).abs() < 1e-9);
}

#[test]
fn bad_references_are_query_errors() {
    let g = job_market();
    for q in ["sampled: P(X=a) > 0", "sampled: P(T=zz) > 0", "sampled: E[3] > 0"] {
        assert!(
            matches!(evaluate_query(&job(g.clone(), q)), Err(crate::Error::Query(_))),
            "{q}"
        );
    }
    let rm = LabelledIntervention::new(
        "rm",
        crate::intervention::Primitive::RemoveVariable {
            target: "T".into(),
            replacements: vec![],
        },
    );
    let j = job(g, "sampled: P(T=h) > 0").with_interventions(vec![rm], VisibilityMap::new());
    assert!(matches!(evaluate_query(&j), Err(crate::Error::Query(_))));
}
