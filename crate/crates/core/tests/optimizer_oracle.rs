mod common;

use std::collections::HashSet;
use std::time::Instant;

use common::*;
use coopnet_core::accounting::{check_conservation, flow_tnv, ConservationMode, GoodsFlow, Outcome};
use coopnet_core::demo::{both_via_first_shipper, build_shipping_demo, ShippingParams};
use coopnet_core::goods::{money, CompanyId, GoodId};
use coopnet_core::model::NetworkGame;
use coopnet_core::optimizer::*;

/// Every flow from a plain cartesian product over shipment and sale
/// quantities, filtered by the accounting conservation check. Only goods the
/// sender can produce are tried: anything else can never leave a company.
fn naive_valid_flows(game: &NetworkGame, bound: u64, sale_cap: u64) -> Option<HashSet<GoodsFlow>> {
    let mut slots: Vec<(CompanyId, Option<CompanyId>, GoodId, u64)> = Vec::new();
    for from in &game.companies {
        for g in &from.producible {
            for to in &game.companies {
                if to.id != from.id {
                    slots.push((from.id.clone(), Some(to.id.clone()), g.clone(), bound));
                }
            }
            slots.push((from.id.clone(), None, g.clone(), sale_cap));
        }
    }
    let size = slots.iter().try_fold(1u64, |acc, s| acc.checked_mul(s.3 + 1))?;
    if size > 100_000 {
        return None;
    }
    let arc = std::sync::Arc::new(game.clone());
    let mut valid = HashSet::new();
    let mut x = vec![0u64; slots.len()];
    loop {
        let mut flow = GoodsFlow::new();
        for (s, &n) in slots.iter().zip(&x) {
            if n > 0 {
                match &s.1 {
                    Some(to) => flow.ship(&s.0, to, &s.2, n),
                    None => flow.sell(&s.0, &s.2, n),
                }
            }
        }
        let o = Outcome::empty(arc.clone());
        let o = Outcome { goods: flow, ..o };
        if check_conservation(&o, ConservationMode::Disposal).is_empty() {
            valid.insert(o.goods);
        }
        let mut k = x.len();
        loop {
            if k == 0 {
                return Some(valid);
            }
            k -= 1;
            if x[k] < slots[k].3 {
                x[k] += 1;
                break;
            }
            x[k] = 0;
        }
    }
}

#[test]
fn enumerator_matches_cartesian_oracle() {
    let mut rng = rng(7);
    let mut checked = 0;
    let mut sizes = Vec::new();
    let sale_cap = 6;
    while checked < 80 {
        let game = random_game(&mut rng, 3, 3);
        if game.companies.len() < 2 {
            continue;
        }
        let bound = 1 + (checked % 2) as u64;
        let Some(expected) = naive_valid_flows(&game, bound, sale_cap) else {
            continue;
        };
        let got: Vec<GoodsFlow> = enumerate_goods_flows(&game, &SearchBounds::new(bound).unwrap())
            .unwrap()
            .collect();
        for f in &got {
            assert!(f.external_sales().values().all(|b| b.iter().all(|(_, c)| c <= sale_cap)));
        }
        let got_set: HashSet<GoodsFlow> = got.iter().cloned().collect();
        assert_eq!(got_set.len(), got.len(), "duplicates in stream");
        assert_eq!(got_set, expected, "game {game:#?}");
        checked += 1;
        sizes.push(expected.len());
    }
    let nontrivial = sizes.iter().filter(|&&n| n > 3).count();
    assert!(nontrivial >= 25, "valid flow counts: {sizes:?}");
}

#[test]
fn demo_stream_contains_known_flows() {
    let doc = build_shipping_demo(&ShippingParams::standard()).unwrap();
    let bounds = SearchBounds::new(1).unwrap();
    let flows: Vec<GoodsFlow> = enumerate_goods_flows(&doc.game, &bounds).unwrap().collect();
    assert_eq!(flows[0], GoodsFlow::new());
    let baseline = doc.baseline.unwrap().goods;
    assert!(flows.contains(&baseline));
    assert!(flows.contains(&both_via_first_shipper()));
    for f in &flows {
        let o = Outcome { goods: f.clone(), ..Outcome::empty(doc.game.clone()) };
        assert!(check_conservation(&o, ConservationMode::Disposal).is_empty());
    }
}

#[test]
fn brute_force_on_demo() {
    let doc = build_shipping_demo(&ShippingParams::standard()).unwrap();
    let bounds = SearchBounds::new(2).unwrap();
    let best = brute_force_max_tnv(&doc.game, &bounds).unwrap();
    assert_eq!(best.tnv, money(16));
    assert_eq!(best.flow, both_via_first_shipper());

    let restricted = bounds.clone().with_candidate_edges([
        (CompanyId::new("s1"), CompanyId::new("c1")),
        (CompanyId::new("s2"), CompanyId::new("c2")),
    ]);
    let best = brute_force_max_tnv(&doc.game, &restricted).unwrap();
    assert_eq!(best.tnv, money(14));
    assert_eq!(best.flow, doc.baseline.as_ref().unwrap().goods);
}

#[test]
fn all_zero_benefit_prefers_doing_nothing() {
    let mut rng = rng(99);
    for _ in 0..20 {
        let mut game = random_searchable_game(&mut rng, 3, 3, 1, 20_000);
        for c in &mut game.companies {
            c.benefit.prices.clear();
            c.endowment = Default::default();
        }
        let best = brute_force_max_tnv(&game, &SearchBounds::new(1).unwrap()).unwrap();
        assert_eq!(best.flow, GoodsFlow::new());
        assert_eq!(best.tnv, money(0));
    }
}

#[test]
fn greedy_on_demo() {
    let doc = build_shipping_demo(&ShippingParams::standard()).unwrap();
    let bounds = SearchBounds::new(2).unwrap();
    let start = doc.baseline.as_ref().unwrap().goods.clone();
    let r = greedy_improve(&doc.game, &start, &bounds, 100).unwrap();
    assert_eq!(r.tnv, money(16));
    assert_eq!(r.flow, both_via_first_shipper());

    let again = greedy_improve(&doc.game, &r.flow, &bounds, 100).unwrap();
    assert_eq!(again.flow, r.flow);
    assert_eq!(again.iterations, 0);

    let frozen = greedy_improve(&doc.game, &start, &bounds, 0).unwrap();
    assert_eq!(frozen.flow, start);
    assert_eq!(frozen.tnv, money(14));
}

#[test]
fn equal_shipper_costs_leave_nothing_to_gain() {
    let params = ShippingParams::from_array([10, 12, 3, 3, 6, 8].map(money));
    let doc = build_shipping_demo(&params).unwrap();
    let baseline = doc.baseline.unwrap();
    assert_eq!(coopnet_core::tnv(&baseline).unwrap(), money(16));
    let best = brute_force_max_tnv(&doc.game, &SearchBounds::new(2).unwrap()).unwrap();
    assert_eq!(best.tnv, money(16));
}

#[test]
fn greedy_never_beats_brute_force() {
    let mut rng = rng(2024);
    for n in 0..60 {
        let bound = 1 + n % 2;
        let game = random_searchable_game(&mut rng, 4, 4, bound, 5_000);
        let bounds = SearchBounds::new(bound).unwrap();
        let best = brute_force_max_tnv(&game, &bounds).unwrap();
        let start = random_valid_flow(&mut rng, &game, bound);
        let start_tnv = flow_tnv(&game, &start).unwrap();
        let greedy = greedy_improve(&game, &start, &bounds, 50).unwrap();
        assert!(greedy.tnv >= start_tnv);
        assert!(greedy.tnv <= best.tnv);
        assert!(check_conservation(
            &Outcome { goods: greedy.flow.clone(), ..Outcome::empty(std::sync::Arc::new(game.clone())) },
            ConservationMode::Disposal
        )
        .is_empty());
    }
}

#[test]
fn parallel_search_is_deterministic() {
    let mut rng = rng(5);
    for n in 0..25 {
        let bound = 1 + n % 2;
        let game = random_searchable_game(&mut rng, 4, 3, bound, 5_000);
        let bounds = SearchBounds::new(bound).unwrap();
        let seq = brute_force_max_tnv(&game, &bounds).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let par = pool.install(|| brute_force_max_tnv_parallel(&game, &bounds)).unwrap();
            assert_eq!(par, seq);
        }
    }
}

#[test]
fn search_space_size_counts_candidates() {
    let doc = build_shipping_demo(&ShippingParams::standard()).unwrap();
    // Each shipper splits ≤ 2 services over 3 buyers + sink: C(6,2) = 15.
    // Each cargo owner splits ≤ 1 delivery over 4 destinations: 5.
    let size = search_space_size(&doc.game, &SearchBounds::new(2).unwrap());
    assert_eq!(size, 15 * 15 * 5 * 5);
    let t = Instant::now();
    let n = enumerate_goods_flows(&doc.game, &SearchBounds::new(2).unwrap()).unwrap().count();
    assert!(n as u128 <= size);
    assert!(t.elapsed().as_secs() < 5);
}
