//! Outcome evaluation: node flows, goods conservation, payoffs, total network
//! value and the budget identity `Σ payoff = TNV`.
//!
//! Convention: the recipient of goods pays. A value entry `(payer, payee)`
//! raises the payee's payoff and lowers the payer's by the same amount, so
//! internal transfers cancel in the sum of payoffs and only the external
//! benefit and cost edges survive.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::goods::{CompanyId, GoodId, GoodVector, Money};
use crate::model::{CompanySpec, NetworkGame};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccountingError {
    #[error("unknown company `{0}`")]
    UnknownCompany(CompanyId),
    #[error("unknown good type `{0}`")]
    UnknownGood(GoodId),
    #[error("edge from `{0}` to itself")]
    SelfEdge(CompanyId),
    #[error("transfer from `{payer}` to `{payee}` must be positive, got {amount}")]
    NonPositiveTransfer {
        payer: CompanyId,
        payee: CompanyId,
        amount: Money,
    },
    #[error("{company} cannot sell `{good}` externally: not producible")]
    Domain { company: CompanyId, good: GoodId },
}

pub type Pair = (CompanyId, CompanyId);

/// Goods on company→company edges and company→sink edges. Zero vectors are
/// not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GoodsFlow {
    internal: BTreeMap<Pair, GoodVector>,
    external_sales: BTreeMap<CompanyId, GoodVector>,
}

impl GoodsFlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn internal(&self) -> &BTreeMap<Pair, GoodVector> {
        &self.internal
    }

    pub fn external_sales(&self) -> &BTreeMap<CompanyId, GoodVector> {
        &self.external_sales
    }

    pub fn shipment(&self, from: &CompanyId, to: &CompanyId) -> GoodVector {
        self.internal
            .get(&(from.clone(), to.clone()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn sales(&self, company: &CompanyId) -> GoodVector {
        self.external_sales.get(company).cloned().unwrap_or_default()
    }

    pub fn set_shipment(&mut self, from: CompanyId, to: CompanyId, bundle: GoodVector) {
        if bundle.is_zero() {
            self.internal.remove(&(from, to));
        } else {
            self.internal.insert((from, to), bundle);
        }
    }

    pub fn ship(&mut self, from: &CompanyId, to: &CompanyId, good: &GoodId, count: u64) {
        let mut bundle = self.shipment(from, to);
        bundle.add_to(good, count);
        self.set_shipment(from.clone(), to.clone(), bundle);
    }

    pub fn set_sales(&mut self, company: CompanyId, bundle: GoodVector) {
        if bundle.is_zero() {
            self.external_sales.remove(&company);
        } else {
            self.external_sales.insert(company, bundle);
        }
    }

    pub fn sell(&mut self, company: &CompanyId, good: &GoodId, count: u64) {
        let mut bundle = self.sales(company);
        bundle.add_to(good, count);
        self.set_sales(company.clone(), bundle);
    }

    pub fn is_empty(&self) -> bool {
        self.internal.is_empty() && self.external_sales.is_empty()
    }
}

/// Side payments between companies: `(payer, payee) → amount > 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueFlow {
    transfers: BTreeMap<Pair, Money>,
}

impl ValueFlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn transfers(&self) -> &BTreeMap<Pair, Money> {
        &self.transfers
    }

    pub fn amount(&self, payer: &CompanyId, payee: &CompanyId) -> Money {
        self.transfers
            .get(&(payer.clone(), payee.clone()))
            .cloned()
            .unwrap_or_else(Money::zero)
    }

    /// Adds `amount` to the `(payer, payee)` entry. Zero is a no-op.
    pub fn pay(
        &mut self,
        payer: CompanyId,
        payee: CompanyId,
        amount: Money,
    ) -> Result<(), AccountingError> {
        if payer == payee {
            return Err(AccountingError::SelfEdge(payer));
        }
        if amount.is_negative() {
            return Err(AccountingError::NonPositiveTransfer {
                payer,
                payee,
                amount,
            });
        }
        if amount.is_zero() {
            return Ok(());
        }
        *self
            .transfers
            .entry((payer, payee))
            .or_insert_with(Money::zero) += amount;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transfers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty()
    }

    /// Net value received by `company`: inbound minus outbound transfers.
    pub fn net_received(&self, company: &CompanyId) -> Money {
        let mut net = Money::zero();
        for ((payer, payee), amount) in &self.transfers {
            if payee == company {
                net += amount;
            }
            if payer == company {
                net -= amount;
            }
        }
        net
    }
}

/// A game together with its goods flow and value flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub game: Arc<NetworkGame>,
    pub goods: GoodsFlow,
    pub value: ValueFlow,
}

impl Outcome {
    /// Builds an outcome after checking that every edge names known
    /// companies and registered goods.
    pub fn new(
        game: Arc<NetworkGame>,
        goods: GoodsFlow,
        value: ValueFlow,
    ) -> Result<Self, AccountingError> {
        check_references(&game, &goods, &value)?;
        Ok(Self { game, goods, value })
    }

    /// Outcome with no goods moving and no payments.
    pub fn empty(game: Arc<NetworkGame>) -> Self {
        Self {
            game,
            goods: GoodsFlow::new(),
            value: ValueFlow::new(),
        }
    }
}

fn check_references(
    game: &NetworkGame,
    goods: &GoodsFlow,
    value: &ValueFlow,
) -> Result<(), AccountingError> {
    let known = |id: &CompanyId| {
        game.company(id)
            .map(|_| ())
            .ok_or_else(|| AccountingError::UnknownCompany(id.clone()))
    };
    let registered = |v: &GoodVector| match v.support().find(|g| !game.has_good(g)) {
        Some(g) => Err(AccountingError::UnknownGood(g.clone())),
        None => Ok(()),
    };
    for ((from, to), bundle) in goods.internal() {
        known(from)?;
        known(to)?;
        if from == to {
            return Err(AccountingError::SelfEdge(from.clone()));
        }
        registered(bundle)?;
    }
    for (company, bundle) in goods.external_sales() {
        known(company)?;
        registered(bundle)?;
    }
    for (payer, payee) in value.transfers().keys() {
        known(payer)?;
        known(payee)?;
    }
    Ok(())
}

/// How outgoing goods must relate to the transformation of incoming goods.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ConservationMode {
    /// `g_out ≤ t(g_in)`: surplus output may be discarded.
    #[default]
    Disposal,
    /// `g_out = t(g_in)`.
    Exact,
}

impl fmt::Display for ConservationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConservationMode::Disposal => f.write_str("disposal"),
            ConservationMode::Exact => f.write_str("exact"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub good: GoodId,
    pub shipped: u64,
    pub produced: u64,
}

/// A company whose outgoing goods do not match its transformation output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub company: CompanyId,
    pub mode: ConservationMode,
    pub mismatches: Vec<Mismatch>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: conservation ({}) violated:", self.company, self.mode)?;
        for m in &self.mismatches {
            write!(f, " {} shipped {} produced {}", m.good, m.shipped, m.produced)?;
        }
        Ok(())
    }
}

/// `(g_in, g_out)` for every company, in game order.
pub fn all_node_flows(game: &NetworkGame, goods: &GoodsFlow) -> Vec<(GoodVector, GoodVector)> {
    let mut flows: Vec<(GoodVector, GoodVector)> = game
        .companies
        .iter()
        .map(|c| (c.endowment.clone(), goods.sales(&c.id)))
        .collect();
    for ((from, to), bundle) in goods.internal() {
        if let Some(i) = game.company_index(from) {
            flows[i].1 += bundle;
        }
        if let Some(j) = game.company_index(to) {
            flows[j].0 += bundle;
        }
    }
    flows
}

/// `g_in = endowment + Σ inbound shipments`, `g_out = Σ outbound shipments +
/// external sales`.
pub fn node_flows(
    outcome: &Outcome,
    company: &CompanyId,
) -> Result<(GoodVector, GoodVector), AccountingError> {
    let spec = outcome
        .game
        .company(company)
        .ok_or_else(|| AccountingError::UnknownCompany(company.clone()))?;
    let mut g_in = spec.endowment.clone();
    let mut g_out = outcome.goods.sales(company);
    for ((from, to), bundle) in outcome.goods.internal() {
        if to == company {
            g_in += bundle;
        }
        if from == company {
            g_out += bundle;
        }
    }
    Ok((g_in, g_out))
}

fn node_violation(
    spec: &CompanySpec,
    g_in: &GoodVector,
    g_out: &GoodVector,
    mode: ConservationMode,
) -> Option<Violation> {
    let produced = spec.transform(g_in);
    let mut goods: Vec<&GoodId> = g_out.support().collect();
    if mode == ConservationMode::Exact {
        goods.extend(produced.support());
        goods.sort();
        goods.dedup();
    }
    let mismatches: Vec<Mismatch> = goods
        .into_iter()
        .filter_map(|g| {
            let shipped = g_out.get(g);
            let made = produced.get(g);
            let bad = match mode {
                ConservationMode::Disposal => shipped > made,
                ConservationMode::Exact => shipped != made,
            };
            bad.then(|| Mismatch {
                good: g.clone(),
                shipped,
                produced: made,
            })
        })
        .collect();
    (!mismatches.is_empty()).then(|| Violation {
        company: spec.id.clone(),
        mode,
        mismatches,
    })
}

/// Conservation check on a bare goods flow.
pub fn goods_flow_violations(
    game: &NetworkGame,
    goods: &GoodsFlow,
    mode: ConservationMode,
) -> Vec<Violation> {
    let flows = all_node_flows(game, goods);
    game.companies
        .iter()
        .zip(&flows)
        .filter_map(|(spec, (g_in, g_out))| node_violation(spec, g_in, g_out, mode))
        .collect()
}

/// True when no company violates conservation. Short-circuits.
pub fn conserves(game: &NetworkGame, goods: &GoodsFlow, mode: ConservationMode) -> bool {
    let flows = all_node_flows(game, goods);
    game.companies
        .iter()
        .zip(&flows)
        .all(|(spec, (g_in, g_out))| node_violation(spec, g_in, g_out, mode).is_none())
}

/// One violation per company whose outflow is not covered by its
/// transformation of the inflow.
pub fn check_conservation(outcome: &Outcome, mode: ConservationMode) -> Vec<Violation> {
    goods_flow_violations(&outcome.game, &outcome.goods, mode)
}

/// Value received from the sink for selling `sold`. Every sold good must be
/// producible by the company.
pub fn external_benefit(company: &CompanySpec, sold: &GoodVector) -> Result<Money, AccountingError> {
    if let Some(g) = sold.support().find(|g| !company.producible.contains(*g)) {
        return Err(AccountingError::Domain {
            company: company.id.clone(),
            good: g.clone(),
        });
    }
    Ok(company.benefit.value(sold))
}

/// Cost charged on the source edge for the node's actual flows.
pub fn external_cost(company: &CompanySpec, g_in: &GoodVector, g_out: &GoodVector) -> Money {
    company.cost.value(g_in, g_out)
}

/// External benefit minus external cost of every company, in game order.
pub fn external_balances(game: &NetworkGame, goods: &GoodsFlow) -> Result<Vec<Money>, AccountingError> {
    let flows = all_node_flows(game, goods);
    game.companies
        .iter()
        .zip(&flows)
        .map(|(spec, (g_in, g_out))| {
            let benefit = external_benefit(spec, &goods.sales(&spec.id))?;
            Ok(benefit - external_cost(spec, g_in, g_out))
        })
        .collect()
}

/// `Πᵢ = received + benefit − paid − cost`.
pub fn payoff(outcome: &Outcome, company: &CompanyId) -> Result<Money, AccountingError> {
    let spec = outcome
        .game
        .company(company)
        .ok_or_else(|| AccountingError::UnknownCompany(company.clone()))?;
    let (g_in, g_out) = node_flows(outcome, company)?;
    let benefit = external_benefit(spec, &outcome.goods.sales(company))?;
    let cost = external_cost(spec, &g_in, &g_out);
    Ok(outcome.value.net_received(company) + benefit - cost)
}

/// Payoffs keyed by company id.
pub fn payoffs(outcome: &Outcome) -> Result<BTreeMap<CompanyId, Money>, AccountingError> {
    outcome
        .game
        .companies
        .iter()
        .map(|c| Ok((c.id.clone(), payoff(outcome, &c.id)?)))
        .collect()
}

/// Total network value of a goods flow: `Σ benefit − Σ cost`.
pub fn flow_tnv(game: &NetworkGame, goods: &GoodsFlow) -> Result<Money, AccountingError> {
    Ok(external_balances(game, goods)?
        .into_iter()
        .fold(Money::zero(), |acc, x| acc + x))
}

pub fn tnv(outcome: &Outcome) -> Result<Money, AccountingError> {
    flow_tnv(&outcome.game, &outcome.goods)
}

/// `Σ Πᵢ − TNV`; zero for every outcome.
pub fn budget_identity_gap(outcome: &Outcome) -> Result<Money, AccountingError> {
    let total = payoffs(outcome)?
        .into_values()
        .fold(Money::zero(), |acc, x| acc + x);
    Ok(total - tnv(outcome)?)
}
