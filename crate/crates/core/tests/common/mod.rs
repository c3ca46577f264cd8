#![allow(dead_code)]

//! Seeded generators for small random games and outcomes.

use std::sync::Arc;

use coopnet_core::accounting::{GoodsFlow, Outcome, ValueFlow};
use coopnet_core::goods::{CompanyId, GoodId, GoodVector, Money};
use coopnet_core::model::{BenefitSpec, CompanySpec, CostSpec, GoodType, NetworkGame, Recipe, Transformation};
use coopnet_core::optimizer::{enumerate_goods_flows, search_space_size, SearchBounds};
use coopnet_core::validate_game;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gv(items: &[(&str, u64)]) -> GoodVector {
    items.iter().map(|&(g, c)| (g, c)).collect()
}

pub fn random_money(rng: &mut Rng8, max: i64) -> Money {
    Money::new(rng.gen_range(0..=max).into(), rng.gen_range(1..=3i64).into())
}

fn random_bundle(rng: &mut Rng8, goods: &[GoodId], max_kinds: usize, max_count: u64) -> GoodVector {
    let kinds = rng.gen_range(0..=max_kinds.min(goods.len()));
    goods
        .choose_multiple(rng, kinds)
        .map(|g| (g.clone(), rng.gen_range(1..=max_count)))
        .collect()
}

/// A well-formed game with 1..=`max_companies` companies and
/// 1..=`max_goods` good types.
pub fn random_game(rng: &mut Rng8, max_companies: usize, max_goods: usize) -> NetworkGame {
    let n_goods = rng.gen_range(1..=max_goods);
    let goods: Vec<GoodId> = (0..n_goods).map(|k| GoodId::new(format!("g{k}"))).collect();
    let n = rng.gen_range(1..=max_companies);
    let mut companies = Vec::new();
    for i in 0..n {
        let mut c = CompanySpec::new(format!("f{i}"), format!("firm {i}"));
        let own = rng.gen_range(0..=2usize.min(n_goods));
        c.producible = goods.choose_multiple(rng, own).cloned().collect();
        let producible: Vec<GoodId> = c.producible.iter().cloned().collect();

        let mut recipes = Vec::new();
        if !producible.is_empty() {
            for priority in 0..rng.gen_range(0..=2i64) {
                let inputs = random_bundle(rng, &goods, 2, 2);
                let out_good = producible.choose(rng).unwrap().clone();
                let outputs: GoodVector = [(out_good, rng.gen_range(1..=2))].into_iter().collect();
                let max_uses = if inputs.is_zero() || rng.gen_bool(0.6) {
                    Some(rng.gen_range(1..=2))
                } else {
                    None
                };
                recipes.push(Recipe::new(inputs, outputs, max_uses, priority).unwrap());
            }
        }
        c.transformation = Transformation::new(recipes, rng.gen_bool(0.3));
        if rng.gen_bool(0.4) {
            c.endowment = random_bundle(rng, &goods, 2, 2);
        }

        let mut benefit = BenefitSpec::default();
        for g in &producible {
            if rng.gen_bool(0.7) {
                let cap = rng.gen_bool(0.5).then(|| rng.gen_range(1..=2));
                benefit = benefit.with_price(g.clone(), random_money(rng, 20), cap);
            }
        }
        c.benefit = benefit;

        let mut cost = CostSpec::default();
        for g in &goods {
            if rng.gen_bool(0.3) {
                cost = cost.with_input_rate(g.clone(), random_money(rng, 6));
            }
            if rng.gen_bool(0.3) {
                cost = cost.with_output_rate(g.clone(), random_money(rng, 6));
            }
        }
        if rng.gen_bool(0.3) {
            cost = cost.with_fixed(random_money(rng, 5));
        }
        c.cost = cost;
        companies.push(c);
    }
    let goods = goods.into_iter().map(|g| GoodType::new(g.clone(), g.to_string())).collect();
    let game = NetworkGame::new(goods, companies);
    assert_eq!(validate_game(&game), vec![]);
    game
}

/// A random game whose bounded search space has at most `limit` candidates.
pub fn random_searchable_game(rng: &mut Rng8, max_companies: usize, max_goods: usize, bound: u64, limit: u128) -> NetworkGame {
    loop {
        let game = random_game(rng, max_companies, max_goods);
        if search_space_size(&game, &SearchBounds::new(bound).unwrap()) <= limit {
            return game;
        }
    }
}

/// Random side payments among the game's companies.
pub fn random_value_flow(rng: &mut Rng8, game: &NetworkGame, max_transfers: usize) -> ValueFlow {
    let ids: Vec<CompanyId> = game.companies.iter().map(|c| c.id.clone()).collect();
    let mut value = ValueFlow::new();
    if ids.len() < 2 {
        return value;
    }
    for _ in 0..rng.gen_range(0..=max_transfers) {
        let pair: Vec<&CompanyId> = ids.choose_multiple(rng, 2).collect();
        let amount = random_money(rng, 30) + Money::new(1.into(), 7.into());
        value.pay(pair[0].clone(), pair[1].clone(), amount).unwrap();
    }
    value
}

/// A random goods flow that need not conserve goods. External sales stay
/// within each seller's producible set so external benefit is defined.
pub fn random_goods_flow(rng: &mut Rng8, game: &NetworkGame, bound: u64) -> GoodsFlow {
    let goods: Vec<GoodId> = game.goods.iter().map(|g| g.id.clone()).collect();
    let mut flow = GoodsFlow::new();
    for from in &game.companies {
        for to in &game.companies {
            if from.id != to.id && rng.gen_bool(0.4) {
                let bundle = random_bundle(rng, &goods, 2, bound);
                flow.set_shipment(from.id.clone(), to.id.clone(), bundle);
            }
        }
        let producible: Vec<GoodId> = from.producible.iter().cloned().collect();
        if !producible.is_empty() && rng.gen_bool(0.6) {
            flow.set_sales(from.id.clone(), random_bundle(rng, &producible, 2, bound));
        }
    }
    flow
}

/// A uniformly chosen conservation-valid flow from the bounded stream.
pub fn random_valid_flow(rng: &mut Rng8, game: &NetworkGame, bound: u64) -> GoodsFlow {
    let flows: Vec<GoodsFlow> = enumerate_goods_flows(game, &SearchBounds::new(bound).unwrap())
        .unwrap()
        .collect();
    flows.choose(rng).unwrap().clone()
}

pub fn outcome(game: &NetworkGame, goods: GoodsFlow, value: ValueFlow) -> Outcome {
    Outcome::new(Arc::new(game.clone()), goods, value).unwrap()
}
