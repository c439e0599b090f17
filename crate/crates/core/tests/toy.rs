use std::collections::{BTreeMap, HashSet};

use hyperopinion::model::Regime;
use hyperopinion::toy::{
    canonical_class, enumerate_absorbing, family_of, structure_key, toy_params, Archetype, Family,
    ToyState,
};
use hyperopinion::Execution;

#[test]
fn absorbing_sets_match_brute_force_and_nest() {
    let lin = enumerate_absorbing(Regime::Linear, 0.5, Execution::Parallel);
    let non = enumerate_absorbing(Regime::Nonlinear, 0.5, Execution::Parallel);
    let (pl, pn) = (
        toy_params(Regime::Linear, 0.5),
        toy_params(Regime::Nonlinear, 0.5),
    );
    let mut brute_lin = Vec::new();
    let mut brute_non = Vec::new();
    for code in 0..ToyState::SPACE {
        let t = ToyState::from_code(code);
        let s = t.to_sim_state();
        if s.is_absorbing(&pl) {
            brute_lin.push(t);
        }
        if s.is_absorbing(&pn) {
            brute_non.push(t);
        }
    }
    assert_eq!(lin.absorbing, brute_lin);
    assert_eq!(non.absorbing, brute_non);
    assert_eq!(lin.absorbing.len(), 2052);
    let non_set: HashSet<_> = non.absorbing.iter().collect();
    assert!(lin.absorbing.iter().all(|t| non_set.contains(t)));
    assert!(non.absorbing.len() > lin.absorbing.len());
}

#[test]
fn classes_partition_the_absorbing_set() {
    let e = enumerate_absorbing(Regime::Nonlinear, 0.5, Execution::Serial);
    let total: usize = e.classes.iter().map(|c| c.raw_count).sum();
    assert_eq!(total, e.absorbing.len());
    let keys: HashSet<_> = e.classes.iter().map(|c| c.key).collect();
    assert_eq!(keys.len(), e.classes.len());
    let reps: HashSet<_> = e.classes.iter().map(|c| c.representative).collect();
    assert_eq!(reps.len(), e.classes.len());
    let mut by_key: BTreeMap<_, usize> = BTreeMap::new();
    for &t in &e.absorbing {
        *by_key.entry(canonical_class(t)).or_default() += 1;
    }
    for c in &e.classes {
        assert_eq!(by_key[&c.key], c.raw_count);
        assert_eq!(canonical_class(c.representative), c.key);
        assert_eq!(family_of(c.representative), c.family);
    }
    let fam_total: usize = e.families.iter().map(|f| f.raw_count).sum();
    assert_eq!(fam_total, e.absorbing.len());
}

#[test]
fn orbits_are_closed_under_the_symmetry_group() {
    for code in (0..ToyState::SPACE).step_by(997) {
        let t = ToyState::from_code(code);
        let key = canonical_class(t);
        for u in t.orbit() {
            assert_eq!(canonical_class(u), key);
            assert_eq!(structure_key(u), structure_key(t));
            assert!(u.orbit().contains(&t));
        }
        assert_eq!(t.swap_opinions().swap_opinions(), t);
        assert_eq!(t.swap_workplaces().swap_workplaces(), t);
        assert_eq!(t.swap_households().swap_households(), t);
    }
}

#[test]
fn drawings_are_absorbing_and_classified_as_themselves() {
    let p = toy_params(Regime::Nonlinear, 0.5);
    for f in Archetype::ALL {
        let t = f.drawing();
        assert!(t.to_sim_state().is_absorbing(&p), "{f:?}");
        assert_eq!(family_of(t), Family::Listed(f));
        let back = ToyState::from_sim_state(&t.to_sim_state()).unwrap();
        assert_eq!(back, t);
    }
    let lin = toy_params(Regime::Linear, 0.5);
    assert!(Archetype::A.drawing().to_sim_state().is_absorbing(&lin));
    assert!(Archetype::B.drawing().to_sim_state().is_absorbing(&lin));
    assert!(!Archetype::E.drawing().to_sim_state().is_absorbing(&lin));
}
