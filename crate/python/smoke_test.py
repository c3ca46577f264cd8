"""Smoke test for the coopnet Python module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python python/smoke_test.py` (or `pytest python/`).
"""

from fractions import Fraction

import coopnet


def test_demo_baseline():
    scn = coopnet.Scenario.shipping_demo()
    assert scn.company_ids() == ["c1", "c2", "s1", "s2"]
    base = scn.baseline
    assert base.payoffs() == {"c1": 4, "c2": 4, "s1": 3, "s2": 3}
    assert base.tnv() == 14
    assert base.identity_gap() == 0
    assert base.violations() == []
    assert len(base.violations("exact")) == 2


def test_search_and_rebalance():
    scn = coopnet.Scenario.shipping_demo()
    best = scn.brute_force(bound=2)
    assert best.tnv == 16
    assert best.flow.shipments() == {("s1", "c1"): {"svc1": 1}, ("s1", "c2"): {"svc1": 1}}
    assert scn.greedy(max_iters=10).tnv == 16

    after = scn.rebalance(best.flow)
    assert after.payoffs() == {
        "c1": Fraction(9, 2),
        "c2": Fraction(9, 2),
        "s1": Fraction(7, 2),
        "s2": Fraction(7, 2),
    }
    assert after.identity_gap() == 0

    weighted = scn.rebalance(best.flow, {"c1": Fraction(1, 2), "c2": "1/6", "s1": "1/6", "s2": "1/6"})
    assert weighted.payoff("c2") == Fraction(13, 3)

    try:
        scn.rebalance(scn.baseline.goods)
    except coopnet.CoopnetError as e:
        assert "does not raise" in str(e)
    else:
        raise AssertionError("rebalancing onto the baseline should fail")


def test_collapse_and_round_trip():
    scn = coopnet.Scenario.shipping_demo()
    merged, merged_id = scn.baseline.collapse("c1", "s1")
    assert merged_id == "c1+s1"
    assert merged.payoff(merged_id) == 7
    assert merged.tnv() == 14

    text = scn.dumps()
    assert coopnet.Scenario.loads(text).dumps() == text
    report = scn.baseline.report("structured")
    assert coopnet.Scenario.loads(report).metadata["report.tnv"] == "14"


def test_custom_flow_and_params():
    scn = coopnet.Scenario.shipping_demo((10, 12, 3, 5, 6, 8))
    flow = coopnet.GoodsFlow(
        shipments={("s1", "c1"): {"svc1": 1}, ("s1", "c2"): {"svc1": 1}},
        sales={"c1": {"deliv1": 1}, "c2": {"deliv2": 1}},
    )
    out = scn.outcome(flow, {("c1", "s1"): 6, ("c2", "s1"): Fraction(15, 2)})
    assert out.tnv() == 16
    assert out.payoff("s1") == Fraction(15, 2)
    try:
        coopnet.Scenario.shipping_demo((10, 12, 3, 5, 2, 8))
    except coopnet.CoopnetError:
        pass
    else:
        raise AssertionError("price gate should reject v11 < p_s1")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
