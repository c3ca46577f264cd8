use std::collections::BTreeMap;

use coopnet_core::accounting::{payoff, payoffs, tnv, ConservationMode, GoodsFlow, Outcome};
use coopnet_core::demo::{both_via_first_shipper, build_shipping_demo, ShippingParams};
use coopnet_core::goods::{money, ratio, CompanyId, Money};
use coopnet_core::rebalancer::*;
use coopnet_core::{budget_identity_gap, check_conservation};

fn id(s: &str) -> CompanyId {
    CompanyId::new(s)
}

fn demo() -> Outcome {
    build_shipping_demo(&ShippingParams::standard()).unwrap().baseline.unwrap()
}

fn weights(pairs: &[(&str, Money)]) -> WeightVector {
    WeightVector::new(pairs.iter().map(|(c, w)| (id(c), w.clone())).collect()).unwrap()
}

#[test]
fn uniform_split_of_the_demo_gain() {
    let base = demo();
    let improved = both_via_first_shipper();
    let w = WeightVector::uniform(&base.game).unwrap();
    let value = pareto_rebalance(&base, &improved, &w, ConservationMode::Disposal).unwrap();
    let after = Outcome::new(base.game.clone(), improved, value.clone()).unwrap();

    let expected: BTreeMap<CompanyId, Money> = [
        (id("c1"), ratio(9, 2)),
        (id("c2"), ratio(9, 2)),
        (id("s1"), ratio(7, 2)),
        (id("s2"), ratio(7, 2)),
    ]
    .into();
    assert_eq!(payoffs(&after).unwrap(), expected);
    assert_eq!(tnv(&after).unwrap(), money(16));
    assert_eq!(budget_identity_gap(&after).unwrap(), money(0));

    // Hub settlement through c1.
    assert_eq!(value.len(), 3);
    assert_eq!(value.amount(&id("c1"), &id("s1")), ratio(19, 2));
    assert_eq!(value.amount(&id("c1"), &id("s2")), ratio(7, 2));
    assert_eq!(value.amount(&id("c2"), &id("c1")), ratio(15, 2));
    // s2 ships nothing yet is paid.
    assert!(after.goods.shipment(&id("s2"), &id("c2")).is_zero());
    assert_eq!(payoff(&after, &id("s2")).unwrap(), ratio(7, 2));
}

#[test]
fn weighted_split() {
    let base = demo();
    let w = weights(&[("c1", ratio(1, 2)), ("c2", ratio(1, 6)), ("s1", ratio(1, 6)), ("s2", ratio(1, 6))]);
    let targets = pareto_targets(&base, &money(2), &w).unwrap();
    assert_eq!(targets[&id("c1")], money(5));
    assert_eq!(targets[&id("c2")], ratio(13, 3));
    assert_eq!(targets[&id("s1")], ratio(10, 3));
    assert_eq!(targets[&id("s2")], ratio(10, 3));

    let value = pareto_rebalance(&base, &both_via_first_shipper(), &w, ConservationMode::Disposal).unwrap();
    let after = Outcome::new(base.game.clone(), both_via_first_shipper(), value).unwrap();
    assert_eq!(payoffs(&after).unwrap(), targets);
}

#[test]
fn no_gain_is_refused() {
    let base = demo();
    let w = WeightVector::uniform(&base.game).unwrap();
    let err = pareto_rebalance(&base, &base.goods, &w, ConservationMode::Disposal).unwrap_err();
    assert_eq!(err, RebalanceError::NoSurplus { delta: money(0) });
    let err = pareto_rebalance(&base, &GoodsFlow::new(), &w, ConservationMode::Disposal).unwrap_err();
    assert!(matches!(err, RebalanceError::NoSurplus { .. }));
}

#[test]
fn bad_inputs_are_refused() {
    let base = demo();
    let partial = weights(&[("c1", ratio(1, 2)), ("c2", ratio(1, 2))]);
    assert!(matches!(
        pareto_rebalance(&base, &both_via_first_shipper(), &partial, ConservationMode::Disposal),
        Err(RebalanceError::BadWeights(_))
    ));

    let mut broken = both_via_first_shipper();
    broken.ship(&id("s1"), &id("c1"), &"svc1".into(), 1);
    let w = WeightVector::uniform(&base.game).unwrap();
    assert!(matches!(
        pareto_rebalance(&base, &broken, &w, ConservationMode::Disposal),
        Err(RebalanceError::InvalidImproved(_))
    ));
}

#[test]
fn targets_must_add_up() {
    let base = demo();
    let mut targets: BTreeMap<CompanyId, Money> =
        base.game.companies.iter().map(|c| (c.id.clone(), money(4))).collect();
    let value = realize_payoffs(&base.game, &both_via_first_shipper(), &targets).unwrap();
    let even = Outcome::new(base.game.clone(), both_via_first_shipper(), value).unwrap();
    assert_eq!(payoffs(&even).unwrap(), targets);
    targets.insert(id("c1"), money(5));
    assert_eq!(
        realize_payoffs(&base.game, &both_via_first_shipper(), &targets),
        Err(RebalanceError::TargetSumMismatch { sum: money(17), tnv: money(16) })
    );
    targets.remove(&id("s2"));
    assert_eq!(
        realize_payoffs(&base.game, &both_via_first_shipper(), &targets),
        Err(RebalanceError::TargetCoverage)
    );
}

#[test]
fn realized_payoffs_hit_arbitrary_targets() {
    let base = demo();
    let flow = both_via_first_shipper();
    let targets: BTreeMap<CompanyId, Money> = [
        (id("c1"), money(-3)),
        (id("c2"), ratio(21, 2)),
        (id("s1"), money(0)),
        (id("s2"), ratio(17, 2)),
    ]
    .into();
    let value = realize_payoffs(&base.game, &flow, &targets).unwrap();
    assert!(value.len() <= 3);
    let after = Outcome::new(base.game.clone(), flow, value).unwrap();
    assert_eq!(payoffs(&after).unwrap(), targets);
}

#[test]
fn collapse_shipper_into_its_customer() {
    let base = demo();
    let merged = collapse_nodes(&base, &id("c1"), &id("s1")).unwrap();
    assert_eq!(merged.merged_id, id("c1+s1"));
    assert_eq!(merged.provenance, (id("c1"), id("s1")));
    let o = &merged.outcome;
    assert_eq!(o.game.companies.len(), 3);
    assert_eq!(payoff(o, &merged.merged_id).unwrap(), money(7));
    assert_eq!(tnv(o).unwrap(), money(14));
    assert_eq!(budget_identity_gap(o).unwrap(), money(0));
    assert!(check_conservation(o, ConservationMode::Disposal).is_empty());
    // s2 can make two services but ships one, so only the merged node is exact.
    let exact = check_conservation(o, ConservationMode::Exact);
    assert!(exact.iter().all(|v| v.company != merged.merged_id));
}

#[test]
fn collapse_two_cargo_owners() {
    let base = demo();
    let merged = collapse_nodes(&base, &id("c1"), &id("c2")).unwrap();
    let o = &merged.outcome;
    assert_eq!(payoff(o, &merged.merged_id).unwrap(), money(8));
    assert_eq!(tnv(o).unwrap(), money(14));
    assert_eq!(payoff(o, &id("s1")).unwrap(), money(3));
    assert_eq!(payoff(o, &id("s2")).unwrap(), money(3));
    assert_eq!(o.value.amount(&merged.merged_id, &id("s1")), money(6));
    assert_eq!(o.value.amount(&merged.merged_id, &id("s2")), money(8));
}

#[test]
fn collapse_rejects_bad_pairs() {
    let base = demo();
    assert_eq!(
        collapse_nodes(&base, &id("c1"), &id("c1")).unwrap_err(),
        RebalanceError::IdenticalNodes(id("c1"))
    );
    assert_eq!(
        collapse_nodes(&base, &id("c1"), &id("zz")).unwrap_err(),
        RebalanceError::UnknownCompany(id("zz"))
    );
}
