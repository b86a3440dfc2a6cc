//! Best responses, Nash equilibria and optimal commitment.

mod behavioral;
mod commitment;
pub(crate) mod polytope;
mod pure;

pub use behavioral::{behavioral_nash_small, BehavioralFamily, FamilyBlock, MAX_AGENTS, MAX_CONTEXTS};
pub use commitment::{committed, optimal_commitment, CommitMode, Commitment};
pub(crate) use pure::draw;
pub use pure::{
    best_responses, best_responses_eps, pure_nash, pure_nash_eps, sample_rational_outcome, verify_rational_outcome,
    RationalOutcomeSet, SolveMode, EPS_EQ,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::fixtures;
    use crate::model::{expected_utility, DecisionRule, PolicyProfile, TabularCpd};

    fn labels(game: &crate::model::CausalGame, p: &PolicyProfile) -> Vec<String> {
        p.iter()
            .map(|(d, r)| {
                let dom = &game.variable(d).unwrap().domain;
                let acts: Vec<&str> = r.actions().unwrap().iter().map(|a| dom.label(*a)).collect();
                format!("{d}:{}", acts.join("/"))
            })
            .collect()
    }

    #[test]
    fn prisoners_dilemma_has_mutual_defection_only() {
        let g = fixtures::prisoners_dilemma();
        let ne = pure_nash(&g).unwrap();
        assert_eq!(ne.len(), 1);
        assert_eq!(labels(&g, &ne.outcomes[0]), ["D1:D", "D2:D"]);
        assert_eq!(ne.payoffs[0], vec![-2.0, -2.0]);
    }

    #[test]
    fn best_response_to_defection_is_defection() {
        let g = fixtures::prisoners_dilemma();
        let bob_d = PolicyProfile::new().with("D2", DecisionRule::pure("D2", 2, vec![], vec![], &[1]));
        let br = best_responses(&g, 1, &bob_d).unwrap();
        assert_eq!(br.len(), 1);
        assert_eq!(labels(&g, &br[0]), ["D1:D"]);
    }

    #[test]
    fn stackelberg_unique_equilibrium() {
        let g = fixtures::stackelberg();
        let ne = pure_nash(&g).unwrap();
        assert_eq!(ne.len(), 1);
        assert_eq!(labels(&g, &ne.outcomes[0]), ["D1:T", "D2:L"]);
        assert_eq!(ne.payoffs[0][0], 2.0);
    }

    #[test]
    fn effortville_three_pure_equilibria() {
        let g = fixtures::effortville();
        let ne = pure_nash(&g).unwrap();
        let mut pays: Vec<(f64, f64)> = ne.payoffs.iter().map(|p| (p[0], p[1])).collect();
        pays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pays, vec![(4.0, 3.0), (5.0, 3.0), (5.0, 3.0)]);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let g = fixtures::effortville();
        let a = sample_rational_outcome(&g, 7).unwrap();
        let b = sample_rational_outcome(&g, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn behavioral_families_contain_pure_equilibria() {
        let g = fixtures::effortville();
        let fams = behavioral_nash_small(&g).unwrap();
        for p in pure_nash(&g).unwrap().outcomes {
            assert!(fams.iter().any(|f| f.contains(&p, 1e-9)));
        }
        for f in &fams {
            eprintln!("{:?}", f.intervals());
        }
    }

    #[test]
    fn behavioral_size_limits() {
        let g = crate::model::GameBuilder::new(1)
            .decision("D", 1, &["a", "b", "c"], &[])
            .utility("U", 1, &[0.0], &["D"])
            .utility_fn("U", |_| 0.0)
            .build()
            .unwrap();
        assert!(matches!(
            behavioral_nash_small(&g),
            Err(crate::Error::UnsupportedSize(_))
        ));
    }

    #[test]
    fn stackelberg_commitment() {
        let g = fixtures::stackelberg();
        let exact = optimal_commitment(&g, 1, CommitMode::Exact).unwrap();
        assert!((exact.leader_payoff - 11.0 / 3.0).abs() < 1e-9);
        assert!((exact.rule.row(0)[0] - 2.0 / 3.0).abs() < 1e-9);
        let grid = optimal_commitment(&g, 1, CommitMode::Grid { step: 1e-3 }).unwrap();
        assert!((grid.leader_payoff - 11.0 / 3.0).abs() < 1e-3);
        // Half-half commitment: follower plays R, leader gets 3.5.
        let half = DecisionRule::new(TabularCpd::new("D1", 2, vec![], vec![], vec![vec![0.5, 0.5]]).unwrap());
        let c = committed(&g, "D1", half);
        let ne = pure_nash(&c).unwrap();
        assert_eq!(ne.len(), 1);
        assert_eq!(labels(&c, &ne.outcomes[0]), ["D2:R"]);
        assert!((expected_utility(&c, &ne.outcomes[0], 1).unwrap() - 3.5).abs() < 1e-12);
    }
}
