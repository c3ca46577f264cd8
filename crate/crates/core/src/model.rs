//! Companies, their transformation technology, and the external benefit and
//! cost schedules that price goods entering and leaving the network.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::goods::{CompanyId, GoodId, GoodVector, Money};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown good type `{0}`")]
    UnknownGoodType(GoodId),
    #[error("unknown company `{0}`")]
    UnknownCompany(CompanyId),
    #[error("recipe produces nothing")]
    EmptyRecipeOutput,
    #[error("recipe with no inputs must have a bounded number of uses")]
    UnboundedFreeRecipe,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodType {
    pub id: GoodId,
    pub name: String,
}

impl GoodType {
    pub fn new(id: impl Into<GoodId>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
        }
    }
}

/// One production rule: consume `inputs`, emit `outputs`, at most
/// `max_uses` times (`None` is unbounded).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recipe {
    inputs: GoodVector,
    outputs: GoodVector,
    max_uses: Option<u64>,
    priority: i64,
}

impl Recipe {
    pub fn new(
        inputs: GoodVector,
        outputs: GoodVector,
        max_uses: Option<u64>,
        priority: i64,
    ) -> Result<Self, ModelError> {
        if outputs.is_zero() {
            return Err(ModelError::EmptyRecipeOutput);
        }
        // A free recipe without a use limit would produce infinitely many goods.
        if inputs.is_zero() && max_uses.is_none() {
            return Err(ModelError::UnboundedFreeRecipe);
        }
        Ok(Self {
            inputs,
            outputs,
            max_uses,
            priority,
        })
    }

    pub fn inputs(&self) -> &GoodVector {
        &self.inputs
    }

    pub fn outputs(&self) -> &GoodVector {
        &self.outputs
    }

    pub fn max_uses(&self) -> Option<u64> {
        self.max_uses
    }

    pub fn priority(&self) -> i64 {
        self.priority
    }

    /// How many times the recipe can fire on `available`.
    fn applicable_uses(&self, available: &GoodVector) -> u64 {
        let by_inputs = self
            .inputs
            .iter()
            .map(|(g, need)| available.get(g) / need)
            .min();
        match (by_inputs, self.max_uses) {
            (Some(n), Some(cap)) => n.min(cap),
            (Some(n), None) => n,
            (None, Some(cap)) => cap,
            (None, None) => unreachable!("rejected by Recipe::new"),
        }
    }
}

/// A company's transformation function, as a greedy priority-ordered recipe
/// list plus an optional passthrough of unconsumed producible goods.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transformation {
    recipes: Vec<Recipe>,
    passthrough: bool,
}

impl Transformation {
    pub fn new(mut recipes: Vec<Recipe>, passthrough: bool) -> Self {
        recipes.sort_by_key(Recipe::priority);
        Self {
            recipes,
            passthrough,
        }
    }

    /// Recipes in ascending priority.
    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn passthrough(&self) -> bool {
        self.passthrough
    }

    /// Evaluates the transformation. Output goods outside `producible` are
    /// dropped, as are unconsumed inputs of non-producible types.
    pub fn apply(&self, producible: &BTreeSet<GoodId>, g_in: &GoodVector) -> GoodVector {
        let mut remaining = g_in.clone();
        let mut output = GoodVector::new();
        for recipe in &self.recipes {
            let uses = recipe.applicable_uses(&remaining);
            if uses == 0 {
                continue;
            }
            for (g, need) in recipe.inputs.iter() {
                remaining.take(g, need * uses);
            }
            for (g, made) in recipe.outputs.iter() {
                if producible.contains(g) {
                    output.add_to(g, made * uses);
                }
            }
        }
        if self.passthrough {
            for (g, left) in remaining.iter() {
                if producible.contains(g) {
                    output.add_to(g, left);
                }
            }
        }
        output
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceTerm {
    pub unit_price: Money,
    /// Units beyond the cap earn nothing. `None` is unbounded.
    pub cap: Option<u64>,
}

/// Linear external benefit with per-good caps.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BenefitSpec {
    pub prices: BTreeMap<GoodId, PriceTerm>,
}

impl BenefitSpec {
    pub fn with_price(mut self, good: impl Into<GoodId>, unit_price: Money, cap: Option<u64>) -> Self {
        self.prices
            .insert(good.into(), PriceTerm { unit_price, cap });
        self
    }

    /// `Σ unit_price · min(count, cap)`; unpriced goods earn nothing.
    pub fn value(&self, sold: &GoodVector) -> Money {
        let mut total = Money::zero();
        for (g, count) in sold.iter() {
            if let Some(term) = self.prices.get(g) {
                let paid = term.cap.map_or(count, |cap| count.min(cap));
                total += &term.unit_price * Money::from_integer(paid.into());
            }
        }
        total
    }

    pub fn scaled(&self, factor: &Money) -> BenefitSpec {
        BenefitSpec {
            prices: self
                .prices
                .iter()
                .map(|(g, t)| {
                    let term = PriceTerm {
                        unit_price: &t.unit_price * factor,
                        cap: t.cap,
                    };
                    (g.clone(), term)
                })
                .collect(),
        }
    }
}

/// Linear input/output rates plus a fixed charge levied when anything is
/// emitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostSpec {
    pub per_input: BTreeMap<GoodId, Money>,
    pub per_output: BTreeMap<GoodId, Money>,
    pub fixed: Money,
}

impl Default for CostSpec {
    fn default() -> Self {
        Self {
            per_input: BTreeMap::new(),
            per_output: BTreeMap::new(),
            fixed: Money::zero(),
        }
    }
}

impl CostSpec {
    pub fn with_input_rate(mut self, good: impl Into<GoodId>, rate: Money) -> Self {
        self.per_input.insert(good.into(), rate);
        self
    }

    pub fn with_output_rate(mut self, good: impl Into<GoodId>, rate: Money) -> Self {
        self.per_output.insert(good.into(), rate);
        self
    }

    pub fn with_fixed(mut self, fixed: Money) -> Self {
        self.fixed = fixed;
        self
    }

    pub fn value(&self, g_in: &GoodVector, g_out: &GoodVector) -> Money {
        fn linear(rates: &BTreeMap<GoodId, Money>, v: &GoodVector) -> Money {
            v.iter()
                .filter_map(|(g, c)| rates.get(g).map(|r| r * Money::from_integer(c.into())))
                .fold(Money::zero(), |acc, x| acc + x)
        }
        let mut total = linear(&self.per_input, g_in) + linear(&self.per_output, g_out);
        if !g_out.is_zero() {
            total += &self.fixed;
        }
        total
    }

    pub fn scaled(&self, factor: &Money) -> CostSpec {
        let scale = |m: &BTreeMap<GoodId, Money>| {
            m.iter()
                .map(|(g, r)| (g.clone(), r * factor))
                .collect::<BTreeMap<_, _>>()
        };
        CostSpec {
            per_input: scale(&self.per_input),
            per_output: scale(&self.per_output),
            fixed: &self.fixed * factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompanySpec {
    pub id: CompanyId,
    pub name: String,
    pub producible: BTreeSet<GoodId>,
    pub transformation: Transformation,
    pub benefit: BenefitSpec,
    pub cost: CostSpec,
    /// Goods obtained for free from outside the network.
    pub endowment: GoodVector,
}

impl CompanySpec {
    pub fn new(id: impl Into<CompanyId>, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            producible: BTreeSet::new(),
            transformation: Transformation::default(),
            benefit: BenefitSpec::default(),
            cost: CostSpec::default(),
            endowment: GoodVector::new(),
        }
    }

    /// The transformation function on an input vector. Does not check the
    /// registry; see [`NetworkGame::apply_transformation`].
    pub fn transform(&self, g_in: &GoodVector) -> GoodVector {
        self.transformation.apply(&self.producible, g_in)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NetworkGame {
    pub goods: Vec<GoodType>,
    pub companies: Vec<CompanySpec>,
}

impl NetworkGame {
    pub fn new(goods: Vec<GoodType>, companies: Vec<CompanySpec>) -> Self {
        Self { goods, companies }
    }

    pub fn company(&self, id: &CompanyId) -> Option<&CompanySpec> {
        self.companies.iter().find(|c| &c.id == id)
    }

    pub fn company_index(&self, id: &CompanyId) -> Option<usize> {
        self.companies.iter().position(|c| &c.id == id)
    }

    pub fn has_good(&self, id: &GoodId) -> bool {
        self.goods.iter().any(|g| &g.id == id)
    }

    /// Company ids in ascending order.
    pub fn sorted_company_ids(&self) -> Vec<CompanyId> {
        let mut ids: Vec<_> = self.companies.iter().map(|c| c.id.clone()).collect();
        ids.sort();
        ids
    }

    /// Good ids in ascending order.
    pub fn sorted_good_ids(&self) -> Vec<GoodId> {
        let mut ids: Vec<_> = self.goods.iter().map(|g| g.id.clone()).collect();
        ids.sort();
        ids
    }

    pub fn check_vector(&self, v: &GoodVector) -> Result<(), ModelError> {
        match v.support().find(|g| !self.has_good(g)) {
            Some(g) => Err(ModelError::UnknownGoodType(g.clone())),
            None => Ok(()),
        }
    }

    /// `tᵢ(g_in)` for the named company, after checking `g_in` against the
    /// good registry.
    pub fn apply_transformation(
        &self,
        company: &CompanyId,
        g_in: &GoodVector,
    ) -> Result<GoodVector, ModelError> {
        let spec = self
            .company(company)
            .ok_or_else(|| ModelError::UnknownCompany(company.clone()))?;
        self.check_vector(g_in)?;
        Ok(spec.transform(g_in))
    }

    /// Same game with every price, rate and fixed charge multiplied by `factor`.
    pub fn scaled(&self, factor: &Money) -> NetworkGame {
        let mut out = self.clone();
        for c in &mut out.companies {
            c.benefit = c.benefit.scaled(factor);
            c.cost = c.cost.scaled(factor);
        }
        out
    }
}

/// A broken structural rule in a game description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Defect {
    NoCompanies,
    DuplicateGoodId(GoodId),
    DuplicateCompanyId(CompanyId),
    /// A company refers to a good that is not registered.
    UnknownGood {
        company: CompanyId,
        good: GoodId,
        field: &'static str,
    },
    /// A recipe emits a good the company cannot produce.
    ProducibleViolation {
        company: CompanyId,
        priority: i64,
        good: GoodId,
    },
    /// A price is attached to a good outside the producible set.
    BenefitOutsideProducible { company: CompanyId, good: GoodId },
    DuplicatePriority { company: CompanyId, priority: i64 },
    NegativeAmount {
        company: CompanyId,
        field: &'static str,
    },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::NoCompanies => write!(f, "game has no companies"),
            Defect::DuplicateGoodId(g) => write!(f, "duplicate good id `{g}`"),
            Defect::DuplicateCompanyId(c) => write!(f, "duplicate company id `{c}`"),
            Defect::UnknownGood {
                company,
                good,
                field,
            } => write!(f, "{company}: {field} references unknown good `{good}`"),
            Defect::ProducibleViolation {
                company,
                priority,
                good,
            } => write!(
                f,
                "{company}: recipe {priority} outputs `{good}` which is not producible"
            ),
            Defect::BenefitOutsideProducible { company, good } => {
                write!(f, "{company}: benefit prices non-producible good `{good}`")
            }
            Defect::DuplicatePriority { company, priority } => {
                write!(f, "{company}: recipe priority {priority} used twice")
            }
            Defect::NegativeAmount { company, field } => {
                write!(f, "{company}: negative amount in {field}")
            }
        }
    }
}

/// Lists every structural defect; an empty list means the game is well formed.
pub fn validate_game(game: &NetworkGame) -> Vec<Defect> {
    let mut defects = Vec::new();
    if game.companies.is_empty() {
        defects.push(Defect::NoCompanies);
    }

    let mut seen_goods = BTreeSet::new();
    for g in &game.goods {
        if !seen_goods.insert(&g.id) {
            defects.push(Defect::DuplicateGoodId(g.id.clone()));
        }
    }
    let mut seen_companies = BTreeSet::new();
    for c in &game.companies {
        if !seen_companies.insert(&c.id) {
            defects.push(Defect::DuplicateCompanyId(c.id.clone()));
        }
    }

    for c in &game.companies {
        let mut unknown = |good: &GoodId, field: &'static str| {
            if !seen_goods.contains(good) {
                defects.push(Defect::UnknownGood {
                    company: c.id.clone(),
                    good: good.clone(),
                    field,
                });
            }
        };
        c.producible.iter().for_each(|g| unknown(g, "producible"));
        c.endowment.support().for_each(|g| unknown(g, "endowment"));
        for r in c.transformation.recipes() {
            r.inputs().support().for_each(|g| unknown(g, "recipe inputs"));
            r.outputs().support().for_each(|g| unknown(g, "recipe outputs"));
        }
        c.benefit.prices.keys().for_each(|g| unknown(g, "benefit"));
        c.cost.per_input.keys().for_each(|g| unknown(g, "cost.per_input"));
        c.cost.per_output.keys().for_each(|g| unknown(g, "cost.per_output"));

        let mut priorities = BTreeSet::new();
        for r in c.transformation.recipes() {
            if !priorities.insert(r.priority()) {
                defects.push(Defect::DuplicatePriority {
                    company: c.id.clone(),
                    priority: r.priority(),
                });
            }
            for g in r.outputs().support() {
                if !c.producible.contains(g) {
                    defects.push(Defect::ProducibleViolation {
                        company: c.id.clone(),
                        priority: r.priority(),
                        good: g.clone(),
                    });
                }
            }
        }

        for (g, term) in &c.benefit.prices {
            if !c.producible.contains(g) {
                defects.push(Defect::BenefitOutsideProducible {
                    company: c.id.clone(),
                    good: g.clone(),
                });
            }
            if term.unit_price.is_negative() {
                defects.push(Defect::NegativeAmount {
                    company: c.id.clone(),
                    field: "benefit",
                });
            }
        }
        let negative_rate = |m: &BTreeMap<GoodId, Money>| m.values().any(Signed::is_negative);
        if negative_rate(&c.cost.per_input) {
            defects.push(Defect::NegativeAmount {
                company: c.id.clone(),
                field: "cost.per_input",
            });
        }
        if negative_rate(&c.cost.per_output) {
            defects.push(Defect::NegativeAmount {
                company: c.id.clone(),
                field: "cost.per_output",
            });
        }
        if c.cost.fixed.is_negative() {
            defects.push(Defect::NegativeAmount {
                company: c.id.clone(),
                field: "cost.fixed",
            });
        }
    }
    defects
}
