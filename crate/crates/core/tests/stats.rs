use std::collections::VecDeque;

use hyperopinion::model::{ModelParams, Opinion, SimState};
use hyperopinion::seed::rng_from_seed;
use hyperopinion::stats::{
    components, first_passage, homophily_index, share_bin, size_bin, snapshot, Layer,
};
use proptest::prelude::*;

/// Breadth-first component sizes over explicit adjacency.
fn bfs_components(hs: usize, wps: &[usize]) -> Vec<usize> {
    let n = wps.len();
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for v in 0..n {
                if !seen[v] && (v / hs == u / hs || wps[v] == wps[u]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

fn arb_state() -> impl Strategy<Value = SimState> {
    (1usize..8, 1usize..9).prop_flat_map(|(households, num_w)| {
        let n = households * 5;
        (
            prop::collection::vec(
                prop::bool::ANY.prop_map(|b| if b { Opinion::A } else { Opinion::B }),
                n,
            ),
            prop::collection::vec(0..num_w, n),
        )
            .prop_map(move |(ops, wps)| SimState::from_assignment(5, num_w, ops, wps).unwrap())
    })
}

proptest! {
    #[test]
    fn histogram_totals(s in arb_state(), moves in 0u32..50, flips in 0u32..50) {
        let r = snapshot(&s, 3, moves, flips);
        prop_assert!(r.check_totals(s.n(), s.num_workplaces()).is_ok());
        prop_assert_eq!(r.d_hh.iter().sum::<u32>() as usize, s.num_households());
        prop_assert_eq!(r.d_wp.iter().sum::<u32>() as usize, s.num_workplaces());
        prop_assert_eq!(r.s_wp.iter().sum::<u32>() as usize, s.num_workplaces());
        prop_assert_eq!(r.n_a as usize, s.num_a());
        prop_assert_eq!((r.m_wp, r.n_ch), (moves, flips));
        let round = hyperopinion::StatRecord::from_values(r.t, 5, &r.values()).unwrap();
        prop_assert_eq!(round, r);
    }

    #[test]
    fn components_match_bfs(s in arb_state()) {
        let wps: Vec<usize> = (0..s.n()).map(|v| s.workplace_of(v)).collect();
        prop_assert_eq!(components(&s), bfs_components(5, &wps));
    }

    #[test]
    fn homophily_in_unit_interval(s in arb_state()) {
        for layer in [Layer::Households, Layer::Workplaces] {
            let h = homophily_index(&s, layer);
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }

    #[test]
    fn share_bins_cover_the_unit_interval(size in 1usize..40, frac in 0.0f64..=1.0) {
        let a = (frac * size as f64).round() as usize;
        let bin = share_bin(a, size);
        prop_assert!(bin < 10);
        let share = a as f64 / size as f64;
        if a > 0 {
            prop_assert!(share > bin as f64 / 10.0 - 1e-12 && share <= (bin + 1) as f64 / 10.0 + 1e-12);
        }
    }
}

#[test]
fn bins_at_edges() {
    assert_eq!(share_bin(0, 5), 0);
    assert_eq!(share_bin(1, 10), 0);
    assert_eq!(share_bin(2, 10), 1);
    assert_eq!(share_bin(5, 5), 9);
    assert_eq!(size_bin(1), 0);
    assert_eq!(size_bin(14), 13);
    assert_eq!(size_bin(40), 13);
}

#[test]
fn passage_is_strict() {
    assert_eq!(first_passage(&[0.1, 0.4, 0.41], 0.4), Some(2));
    assert_eq!(first_passage(&[0.5], 0.4), Some(0));
    assert_eq!(first_passage(&[0.4, 0.4], 0.4), None);
}

#[test]
fn balanced_standard_state_is_one_component_or_more() {
    let p = ModelParams::linear(200, 0.5, 0.5);
    let s = SimState::random(&p, 100, &mut rng_from_seed(1)).unwrap();
    let sizes = components(&s);
    assert_eq!(sizes.iter().sum::<usize>(), 200);
}
