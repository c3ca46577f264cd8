//! Scenario documents: the JSON file format for games, baseline outcomes and
//! candidate goods flows.
//!
//! Money is written as an exact literal, `"p/q"` or an integer; the writer
//! always emits strings. Good quantities are nonnegative integers. Unknown
//! keys are rejected everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::accounting::{GoodsFlow, Outcome, ValueFlow};
use crate::goods::{parse_money, CompanyId, GoodId, GoodVector, Money};
use crate::model::{
    validate_game, BenefitSpec, CompanySpec, CostSpec, GoodType, NetworkGame, PriceTerm, Recipe,
    Transformation,
};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Semantic(String),
    #[error("unsupported scenario version `{0}` (expected `{FORMAT_VERSION}`)")]
    Version(String),
}

/// A game plus optional baseline outcome and candidate improved goods flow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioDocument {
    pub version: String,
    pub game: Arc<NetworkGame>,
    pub baseline: Option<Outcome>,
    pub improved: Option<GoodsFlow>,
    pub metadata: BTreeMap<String, String>,
}

impl ScenarioDocument {
    pub fn new(game: NetworkGame) -> Self {
        Self {
            version: FORMAT_VERSION.to_owned(),
            game: Arc::new(game),
            baseline: None,
            improved: None,
            metadata: BTreeMap::new(),
        }
    }
}

/// Exact money on the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
struct MoneyLit(Money);

impl Serialize for MoneyLit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for MoneyLit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MoneyVisitor;

        impl Visitor<'_> for MoneyVisitor {
            type Value = MoneyLit;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a \"p/q\" rational string")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<MoneyLit, E> {
                parse_money(v)
                    .map(MoneyLit)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<MoneyLit, E> {
                Ok(MoneyLit(Money::from_integer(v.into())))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<MoneyLit, E> {
                Ok(MoneyLit(Money::from_integer(v.into())))
            }
        }

        d.deserialize_any(MoneyVisitor)
    }
}

type Bundle = BTreeMap<GoodId, u64>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentDto {
    version: String,
    goods: Vec<GoodDto>,
    companies: Vec<CompanyDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline: Option<OutcomeDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    improved: Option<GoodsFlowDto>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoodDto {
    id: GoodId,
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompanyDto {
    id: CompanyId,
    name: String,
    #[serde(default)]
    producible: Vec<GoodId>,
    #[serde(default)]
    endowment: Bundle,
    #[serde(default)]
    recipes: Vec<RecipeDto>,
    #[serde(default)]
    passthrough: bool,
    #[serde(default)]
    benefit: BTreeMap<GoodId, PriceDto>,
    #[serde(default)]
    cost: CostDto,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecipeDto {
    #[serde(default)]
    inputs: Bundle,
    outputs: Bundle,
    /// `null` or absent means unbounded.
    #[serde(default)]
    max_uses: Option<u64>,
    priority: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriceDto {
    price: MoneyLit,
    #[serde(default)]
    cap: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostDto {
    #[serde(default)]
    per_input: BTreeMap<GoodId, MoneyLit>,
    #[serde(default)]
    per_output: BTreeMap<GoodId, MoneyLit>,
    #[serde(default = "zero_money")]
    fixed: MoneyLit,
}

impl Default for CostDto {
    fn default() -> Self {
        Self {
            per_input: BTreeMap::new(),
            per_output: BTreeMap::new(),
            fixed: zero_money(),
        }
    }
}

fn zero_money() -> MoneyLit {
    MoneyLit(Money::from_integer(0.into()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeDto {
    goods: GoodsFlowDto,
    #[serde(default)]
    value: Vec<TransferDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoodsFlowDto {
    #[serde(default)]
    internal: Vec<ShipmentDto>,
    #[serde(default)]
    external_sales: BTreeMap<CompanyId, Bundle>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShipmentDto {
    from: CompanyId,
    to: CompanyId,
    bundle: Bundle,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransferDto {
    payer: CompanyId,
    payee: CompanyId,
    amount: MoneyLit,
}

fn bundle_to_vector(b: Bundle) -> GoodVector {
    b.into_iter().collect()
}

fn vector_to_bundle(v: &GoodVector) -> Bundle {
    v.iter().map(|(g, c)| (g.clone(), c)).collect()
}

fn parse_json<'a, T: Deserialize<'a>>(bytes: &'a [u8]) -> Result<T, ScenarioError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| ScenarioError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

fn semantic(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Semantic(msg.into())
}

/// Parse and resolve a scenario document.
pub fn load_scenario(bytes: &[u8]) -> Result<ScenarioDocument, ScenarioError> {
    #[derive(Deserialize)]
    struct Probe {
        version: Option<String>,
    }
    let probe: Probe = parse_json(bytes)?;
    if let Some(v) = probe.version {
        if v != FORMAT_VERSION {
            return Err(ScenarioError::Version(v));
        }
    }
    let dto: DocumentDto = parse_json(bytes)?;
    from_dto(dto)
}

fn from_dto(dto: DocumentDto) -> Result<ScenarioDocument, ScenarioError> {
    let goods = dto
        .goods
        .into_iter()
        .map(|g| GoodType { id: g.id, name: g.name })
        .collect();
    let mut companies = Vec::new();
    for c in dto.companies {
        let mut recipes = Vec::new();
        for (n, r) in c.recipes.into_iter().enumerate() {
            let recipe = Recipe::new(
                bundle_to_vector(r.inputs),
                bundle_to_vector(r.outputs),
                r.max_uses,
                r.priority,
            )
            .map_err(|e| semantic(format!("company `{}` recipe #{n}: {e}", c.id)))?;
            recipes.push(recipe);
        }
        let benefit = BenefitSpec {
            prices: c
                .benefit
                .into_iter()
                .map(|(g, p)| {
                    let term = PriceTerm {
                        unit_price: p.price.0,
                        cap: p.cap,
                    };
                    (g, term)
                })
                .collect(),
        };
        let cost = CostSpec {
            per_input: c.cost.per_input.into_iter().map(|(g, m)| (g, m.0)).collect(),
            per_output: c.cost.per_output.into_iter().map(|(g, m)| (g, m.0)).collect(),
            fixed: c.cost.fixed.0,
        };
        let producible: BTreeSet<GoodId> = c.producible.iter().cloned().collect();
        if producible.len() != c.producible.len() {
            return Err(semantic(format!("company `{}`: duplicate producible good", c.id)));
        }
        companies.push(CompanySpec {
            id: c.id,
            name: c.name,
            producible,
            transformation: Transformation::new(recipes, c.passthrough),
            benefit,
            cost,
            endowment: bundle_to_vector(c.endowment),
        });
    }
    let game = NetworkGame::new(goods, companies);
    let defects = validate_game(&game);
    if !defects.is_empty() {
        let list: Vec<String> = defects.iter().map(ToString::to_string).collect();
        return Err(semantic(list.join("; ")));
    }
    let game = Arc::new(game);

    let baseline = match dto.baseline {
        Some(o) => {
            let goods = resolve_goods_flow(&game, o.goods)?;
            let mut value = ValueFlow::new();
            for t in o.value {
                if value.transfers().contains_key(&(t.payer.clone(), t.payee.clone())) {
                    return Err(semantic(format!("duplicate transfer {} -> {}", t.payer, t.payee)));
                }
                if t.amount.0 <= Money::from_integer(0.into()) {
                    return Err(semantic(format!(
                        "transfer {} -> {} must be positive, got {}",
                        t.payer, t.payee, t.amount.0
                    )));
                }
                value
                    .pay(t.payer, t.payee, t.amount.0)
                    .map_err(|e| semantic(e.to_string()))?;
            }
            Some(Outcome::new(game.clone(), goods, value).map_err(|e| semantic(e.to_string()))?)
        }
        None => None,
    };
    let improved = dto
        .improved
        .map(|f| resolve_goods_flow(&game, f))
        .transpose()?;

    Ok(ScenarioDocument {
        version: dto.version,
        game,
        baseline,
        improved,
        metadata: dto.metadata,
    })
}

fn resolve_goods_flow(game: &NetworkGame, dto: GoodsFlowDto) -> Result<GoodsFlow, ScenarioError> {
    let mut flow = GoodsFlow::new();
    for s in dto.internal {
        if flow.internal().contains_key(&(s.from.clone(), s.to.clone())) {
            return Err(semantic(format!("duplicate shipment {} -> {}", s.from, s.to)));
        }
        flow.set_shipment(s.from, s.to, bundle_to_vector(s.bundle));
    }
    for (company, bundle) in dto.external_sales {
        let bundle = bundle_to_vector(bundle);
        if let Some(spec) = game.company(&company) {
            if let Some(g) = bundle.support().find(|g| !spec.producible.contains(*g)) {
                return Err(semantic(format!("{company} sells `{g}` externally but cannot produce it")));
            }
        }
        flow.set_sales(company, bundle);
    }
    Outcome::new(Arc::new(game.clone()), flow.clone(), ValueFlow::new())
        .map_err(|e| semantic(e.to_string()))?;
    Ok(flow)
}

/// Parse a standalone goods-flow block (`{internal, external_sales}`) against
/// an existing game.
pub fn load_goods_flow(bytes: &[u8], game: &NetworkGame) -> Result<GoodsFlow, ScenarioError> {
    let dto: GoodsFlowDto = parse_json(bytes)?;
    resolve_goods_flow(game, dto)
}

fn goods_flow_dto(flow: &GoodsFlow) -> GoodsFlowDto {
    GoodsFlowDto {
        internal: flow
            .internal()
            .iter()
            .map(|((from, to), b)| ShipmentDto {
                from: from.clone(),
                to: to.clone(),
                bundle: vector_to_bundle(b),
            })
            .collect(),
        external_sales: flow
            .external_sales()
            .iter()
            .map(|(c, b)| (c.clone(), vector_to_bundle(b)))
            .collect(),
    }
}

fn to_dto(doc: &ScenarioDocument) -> DocumentDto {
    let game = &doc.game;
    DocumentDto {
        version: doc.version.clone(),
        goods: game
            .goods
            .iter()
            .map(|g| GoodDto {
                id: g.id.clone(),
                name: g.name.clone(),
            })
            .collect(),
        companies: game
            .companies
            .iter()
            .map(|c| CompanyDto {
                id: c.id.clone(),
                name: c.name.clone(),
                producible: c.producible.iter().cloned().collect(),
                endowment: vector_to_bundle(&c.endowment),
                recipes: c
                    .transformation
                    .recipes()
                    .iter()
                    .map(|r| RecipeDto {
                        inputs: vector_to_bundle(r.inputs()),
                        outputs: vector_to_bundle(r.outputs()),
                        max_uses: r.max_uses(),
                        priority: r.priority(),
                    })
                    .collect(),
                passthrough: c.transformation.passthrough(),
                benefit: c
                    .benefit
                    .prices
                    .iter()
                    .map(|(g, t)| {
                        let price = PriceDto {
                            price: MoneyLit(t.unit_price.clone()),
                            cap: t.cap,
                        };
                        (g.clone(), price)
                    })
                    .collect(),
                cost: CostDto {
                    per_input: c.cost.per_input.iter().map(|(g, m)| (g.clone(), MoneyLit(m.clone()))).collect(),
                    per_output: c.cost.per_output.iter().map(|(g, m)| (g.clone(), MoneyLit(m.clone()))).collect(),
                    fixed: MoneyLit(c.cost.fixed.clone()),
                },
            })
            .collect(),
        baseline: doc.baseline.as_ref().map(|o| OutcomeDto {
            goods: goods_flow_dto(&o.goods),
            value: o
                .value
                .transfers()
                .iter()
                .map(|((payer, payee), amount)| TransferDto {
                    payer: payer.clone(),
                    payee: payee.clone(),
                    amount: MoneyLit(amount.clone()),
                })
                .collect(),
        }),
        improved: doc.improved.as_ref().map(goods_flow_dto),
        metadata: doc.metadata.clone(),
    }
}

/// Canonical pretty-printed JSON, newline terminated.
pub fn render_document(doc: &ScenarioDocument) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&to_dto(doc)).expect("scenario DTOs always serialize");
    out.push(b'\n');
    out
}

/// Canonical JSON for a bare goods-flow block.
pub fn render_goods_flow(flow: &GoodsFlow) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&goods_flow_dto(flow)).expect("goods flow DTO always serializes");
    out.push(b'\n');
    out
}
