//! Side-payment constructions.
//!
//! Any goods flow with a larger total network value can be paired with a
//! value flow under which every company is strictly better off than in the
//! baseline: give each company its old payoff plus a positive share of the
//! surplus, then settle the differences through a single hub company.
//!
//! [`collapse_nodes`] merges two companies into one while preserving total
//! network value and their combined payoff.

#![allow(clippy::result_large_err)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::accounting::{
    self, external_balances, flow_tnv, goods_flow_violations, node_flows, AccountingError,
    ConservationMode, GoodsFlow, Outcome, ValueFlow, Violation,
};
use crate::goods::{CompanyId, GoodId, GoodVector, Money};
use crate::model::{
    BenefitSpec, CompanySpec, CostSpec, GoodType, NetworkGame, PriceTerm, Recipe, Transformation,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RebalanceError {
    #[error("improved flow does not raise total network value (change {delta})")]
    NoSurplus { delta: Money },
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("payoff targets sum to {sum} but total network value is {tnv}")]
    TargetSumMismatch { sum: Money, tnv: Money },
    #[error("targets must name every company exactly once")]
    TargetCoverage,
    #[error("baseline violates conservation ({} companies)", .0.len())]
    InvalidBaseline(Vec<Violation>),
    #[error("improved flow violates conservation ({} companies)", .0.len())]
    InvalidImproved(Vec<Violation>),
    #[error("unknown company `{0}`")]
    UnknownCompany(CompanyId),
    #[error("cannot collapse `{0}` with itself")]
    IdenticalNodes(CompanyId),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
}

/// Positive shares summing to one, one per company.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    weights: BTreeMap<CompanyId, Money>,
}

impl WeightVector {
    pub fn new(weights: BTreeMap<CompanyId, Money>) -> Result<Self, RebalanceError> {
        if weights.is_empty() {
            return Err(RebalanceError::BadWeights("no weights".into()));
        }
        if let Some((id, w)) = weights.iter().find(|(_, w)| !w.is_positive()) {
            return Err(RebalanceError::BadWeights(format!("weight of `{id}` is {w}, must be > 0")));
        }
        let sum = weights.values().fold(Money::zero(), |acc, w| acc + w);
        if !sum.is_one() {
            return Err(RebalanceError::BadWeights(format!("weights sum to {sum}, must be 1")));
        }
        Ok(Self { weights })
    }

    /// Equal shares for every company of `game`.
    pub fn uniform(game: &NetworkGame) -> Result<Self, RebalanceError> {
        let n = game.companies.len();
        if n == 0 {
            return Err(RebalanceError::BadWeights("game has no companies".into()));
        }
        let share = Money::new(1.into(), n.into());
        Self::new(game.companies.iter().map(|c| (c.id.clone(), share.clone())).collect())
    }

    pub fn get(&self, company: &CompanyId) -> Option<&Money> {
        self.weights.get(company)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CompanyId, &Money)> {
        self.weights.iter()
    }

    fn covers(&self, game: &NetworkGame) -> bool {
        self.weights.len() == game.companies.len()
            && game.companies.iter().all(|c| self.weights.contains_key(&c.id))
    }
}

/// Value flow under which `improved_flow` gives every company its baseline
/// payoff plus its weighted share of the TNV gain.
pub fn pareto_rebalance(
    baseline: &Outcome,
    improved_flow: &GoodsFlow,
    weights: &WeightVector,
    mode: ConservationMode,
) -> Result<ValueFlow, RebalanceError> {
    let game = &baseline.game;
    let violations = accounting::check_conservation(baseline, mode);
    if !violations.is_empty() {
        return Err(RebalanceError::InvalidBaseline(violations));
    }
    let violations = goods_flow_violations(game, improved_flow, mode);
    if !violations.is_empty() {
        return Err(RebalanceError::InvalidImproved(violations));
    }
    if !weights.covers(game) {
        return Err(RebalanceError::BadWeights("weights must name every company exactly once".into()));
    }
    let delta = flow_tnv(game, improved_flow)? - accounting::tnv(baseline)?;
    if !delta.is_positive() {
        return Err(RebalanceError::NoSurplus { delta });
    }
    let targets = pareto_targets(baseline, &delta, weights)?;
    realize_payoffs(game, improved_flow, &targets)
}

/// `Πᵢ¹ + wᵢ·Δ` for each company.
pub fn pareto_targets(
    baseline: &Outcome,
    delta: &Money,
    weights: &WeightVector,
) -> Result<BTreeMap<CompanyId, Money>, RebalanceError> {
    let before = accounting::payoffs(baseline)?;
    before
        .into_iter()
        .map(|(id, p)| {
            let w = weights
                .get(&id)
                .ok_or_else(|| RebalanceError::BadWeights(format!("no weight for `{id}`")))?;
            Ok((id, p + w * delta))
        })
        .collect()
}

/// Hub settlement: the company with the smallest id exchanges one net
/// transfer with every other company so each lands exactly on its target.
/// The hub itself lands on its target because payoffs sum to TNV.
pub fn realize_payoffs(
    game: &NetworkGame,
    flow: &GoodsFlow,
    targets: &BTreeMap<CompanyId, Money>,
) -> Result<ValueFlow, RebalanceError> {
    if targets.len() != game.companies.len() || game.companies.iter().any(|c| !targets.contains_key(&c.id)) {
        return Err(RebalanceError::TargetCoverage);
    }
    let tnv = flow_tnv(game, flow)?;
    let sum = targets.values().fold(Money::zero(), |acc, t| acc + t);
    if sum != tnv {
        return Err(RebalanceError::TargetSumMismatch { sum, tnv });
    }

    let balances = external_balances(game, flow)?;
    let hub = game
        .sorted_company_ids()
        .into_iter()
        .next()
        .ok_or(RebalanceError::TargetCoverage)?;
    let mut value = ValueFlow::new();
    for (spec, base) in game.companies.iter().zip(balances) {
        if spec.id == hub {
            continue;
        }
        let diff = &targets[&spec.id] - base;
        if diff.is_positive() {
            value.pay(hub.clone(), spec.id.clone(), diff)?;
        } else if diff.is_negative() {
            value.pay(spec.id.clone(), hub.clone(), -diff)?;
        }
    }
    Ok(value)
}

/// An outcome over a game in which two companies were merged into one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollapsedOutcome {
    pub outcome: Outcome,
    pub merged_id: CompanyId,
    pub provenance: (CompanyId, CompanyId),
}

fn fresh_company_id(game: &NetworkGame, base: String) -> CompanyId {
    let mut id = CompanyId::new(base);
    while game.company(&id).is_some() {
        id = CompanyId::new(format!("{id}'"));
    }
    id
}

fn fresh_good_id(game: &NetworkGame, base: String) -> GoodId {
    let mut id = GoodId::new(base);
    while game.has_good(&id) {
        id = GoodId::new(format!("{id}'"));
    }
    id
}

fn price_contribution(term: Option<&PriceTerm>, count: u64) -> Money {
    term.map_or_else(Money::zero, |t| {
        let paid = t.cap.map_or(count, |cap| count.min(cap));
        &t.unit_price * Money::from_integer(paid.into())
    })
}

/// Merge companies `a` and `b` into a single company `m`.
///
/// Goods and value exchanged between `a` and `b` become internal to `m` and
/// disappear from the graph; every other edge is re-pointed to `m`. The merged
/// company is fitted to this outcome:
/// * producible set is the union and endowment the sum;
/// * its transformation turns its reduced inflow into its reduced outflow;
/// * a good sold by only one of the pair keeps that company's price, a good
///   sold by both gets the average price that reproduces the two revenues;
/// * the pair's combined external cost is charged through a synthetic
///   endowment good with a matching input rate, so it survives even when all
///   of the pair's activity was internal.
pub fn collapse_nodes(outcome: &Outcome, a: &CompanyId, b: &CompanyId) -> Result<CollapsedOutcome, RebalanceError> {
    if a == b {
        return Err(RebalanceError::IdenticalNodes(a.clone()));
    }
    let game = &outcome.game;
    let (ia, spec_a) = lookup(game, a)?;
    let (ib, spec_b) = lookup(game, b)?;

    let merged = fresh_company_id(game, format!("{a}+{b}"));
    let rename = |id: &CompanyId| if id == a || id == b { merged.clone() } else { id.clone() };

    let mut goods = GoodsFlow::new();
    for ((from, to), bundle) in outcome.goods.internal() {
        let (from, to) = (rename(from), rename(to));
        if from != to {
            for (g, n) in bundle.iter() {
                goods.ship(&from, &to, g, n);
            }
        }
    }
    for (company, bundle) in outcome.goods.external_sales() {
        let company = rename(company);
        for (g, n) in bundle.iter() {
            goods.sell(&company, g, n);
        }
    }
    let mut value = ValueFlow::new();
    for ((payer, payee), amount) in outcome.value.transfers() {
        let (payer, payee) = (rename(payer), rename(payee));
        if payer != payee {
            value.pay(payer, payee, amount.clone())?;
        }
    }

    let (in_a, out_a) = node_flows(outcome, a)?;
    let (in_b, out_b) = node_flows(outcome, b)?;
    let internal_cost = accounting::external_cost(spec_a, &in_a, &out_a) + accounting::external_cost(spec_b, &in_b, &out_b);

    let mut goods_registry = game.goods.clone();
    let mut spec = CompanySpec::new(merged.clone(), format!("{} + {}", spec_a.name, spec_b.name));
    spec.producible = spec_a.producible.union(&spec_b.producible).cloned().collect();
    spec.endowment = &spec_a.endowment + &spec_b.endowment;
    if !internal_cost.is_zero() {
        let token = fresh_good_id(game, format!("{merged}.internal-cost"));
        goods_registry.push(GoodType::new(token.clone(), format!("internal cost of {merged}")));
        spec.endowment.add_to(&token, 1);
        spec.cost = CostSpec::default().with_input_rate(token, internal_cost);
    }
    spec.benefit = merged_benefit(spec_a, spec_b, &outcome.goods.sales(a), &outcome.goods.sales(b))?;

    let mut companies: Vec<CompanySpec> = Vec::with_capacity(game.companies.len() - 1);
    let keep_at = ia.min(ib);
    for (n, c) in game.companies.iter().enumerate() {
        if n == keep_at {
            companies.push(spec.clone());
        } else if n != ia && n != ib {
            companies.push(c.clone());
        }
    }
    let mut reduced = NetworkGame::new(goods_registry, companies);

    // Fit the transformation to the reduced flows.
    let (in_m, out_m) = accounting::all_node_flows(&reduced, &goods)
        .swap_remove(keep_at);
    let recipes = if out_m.is_zero() {
        Vec::new()
    } else {
        vec![Recipe::new(in_m, out_m, Some(1), 0).expect("nonzero output with bounded uses")]
    };
    reduced.companies[keep_at].transformation = Transformation::new(recipes, false);

    let outcome = Outcome::new(Arc::new(reduced), goods, value)?;
    Ok(CollapsedOutcome {
        outcome,
        merged_id: merged,
        provenance: (a.clone(), b.clone()),
    })
}

fn lookup<'g>(game: &'g NetworkGame, id: &CompanyId) -> Result<(usize, &'g CompanySpec), RebalanceError> {
    game.company_index(id)
        .map(|n| (n, &game.companies[n]))
        .ok_or_else(|| RebalanceError::UnknownCompany(id.clone()))
}

fn merged_benefit(
    spec_a: &CompanySpec,
    spec_b: &CompanySpec,
    sold_a: &GoodVector,
    sold_b: &GoodVector,
) -> Result<BenefitSpec, AccountingError> {
    // Reject sales outside either company's producible set up front.
    accounting::external_benefit(spec_a, sold_a)?;
    accounting::external_benefit(spec_b, sold_b)?;

    let priced: BTreeSet<&GoodId> = spec_a.benefit.prices.keys().chain(spec_b.benefit.prices.keys()).collect();
    let mut benefit = BenefitSpec::default();
    for g in priced {
        let (term_a, term_b) = (spec_a.benefit.prices.get(g), spec_b.benefit.prices.get(g));
        let (na, nb) = (sold_a.get(g), sold_b.get(g));
        let term = match (na > 0, nb > 0) {
            (true, true) => {
                let revenue = price_contribution(term_a, na) + price_contribution(term_b, nb);
                Some(PriceTerm {
                    unit_price: revenue / Money::from_integer((na + nb).into()),
                    cap: None,
                })
            }
            (true, false) => term_a.cloned(),
            (false, true) => term_b.cloned(),
            (false, false) => term_a.or(term_b).cloned(),
        };
        let Some(term) = term else { continue };
        benefit.prices.insert(g.clone(), term);
    }
    Ok(benefit)
}
