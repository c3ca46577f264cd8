//! Two cargo owners, two shippers.
//!
//! Each cargo owner `cᵢ` holds one unit of raw cargo `rawᵢ` and earns `p_cᵢ`
//! for delivering it. Delivery needs one unit of shipping service from either
//! shipper; shipper `sᵢ` makes up to two units of its own service `svcᵢ` at
//! `p_sᵢ` each. In the baseline `sᵢ` ships `cᵢ`'s cargo for `vᵢᵢ`.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::accounting::{GoodsFlow, Outcome, ValueFlow};
use crate::goods::{CompanyId, GoodId, GoodVector, Money};
use crate::model::{BenefitSpec, CompanySpec, CostSpec, GoodType, NetworkGame, Recipe, Transformation};
use crate::scenario::ScenarioDocument;

/// Units of service each shipper can provide.
pub const SHIPPER_CAPACITY: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shipping price {0} violates p_s < v < p_c")]
pub struct ConstraintViolation(pub String);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShippingParams {
    pub p_c1: Money,
    pub p_c2: Money,
    pub p_s1: Money,
    pub p_s2: Money,
    pub v11: Money,
    pub v22: Money,
}

impl ShippingParams {
    pub fn from_array(p: [Money; 6]) -> Self {
        let [p_c1, p_c2, p_s1, p_s2, v11, v22] = p;
        Self {
            p_c1,
            p_c2,
            p_s1,
            p_s2,
            v11,
            v22,
        }
    }

    /// `(10, 12, 3, 5, 6, 8)`.
    pub fn standard() -> Self {
        Self::from_array([10, 12, 3, 5, 6, 8].map(|n| Money::from_integer(n.into())))
    }

    pub fn to_vec(&self) -> Vec<Money> {
        vec![
            self.p_c1.clone(),
            self.p_c2.clone(),
            self.p_s1.clone(),
            self.p_s2.clone(),
            self.v11.clone(),
            self.v22.clone(),
        ]
    }
}

fn bundle(good: &str, n: u64) -> GoodVector {
    [(good, n)].into_iter().collect()
}

pub fn build_shipping_demo(params: &ShippingParams) -> Result<ScenarioDocument, ConstraintViolation> {
    let lanes = [
        (1, &params.p_c1, &params.p_s1, &params.v11),
        (2, &params.p_c2, &params.p_s2, &params.v22),
    ];
    for (i, p_c, p_s, v) in lanes {
        if !(p_s < v && v < p_c) {
            return Err(ConstraintViolation(format!("v{i}{i} = {v} with p_s{i} = {p_s}, p_c{i} = {p_c}")));
        }
    }

    let mut goods = Vec::new();
    for i in 1..=2 {
        goods.push(GoodType::new(format!("raw{i}"), format!("cargo of c{i}")));
    }
    for i in 1..=2 {
        goods.push(GoodType::new(format!("svc{i}"), format!("shipping service of s{i}")));
    }
    for i in 1..=2 {
        goods.push(GoodType::new(format!("deliv{i}"), format!("delivered cargo of c{i}")));
    }

    let mut companies = Vec::new();
    for (i, p_c) in [(1, &params.p_c1), (2, &params.p_c2)] {
        let raw = format!("raw{i}");
        let deliv = format!("deliv{i}");
        let recipes = (1..=2)
            .map(|k| {
                let inputs: GoodVector = [(raw.as_str(), 1), (format!("svc{k}").as_str(), 1)].into_iter().collect();
                Recipe::new(inputs, bundle(&deliv, 1), None, k).expect("delivery recipe is well formed")
            })
            .collect();
        let mut c = CompanySpec::new(format!("c{i}"), format!("cargo owner {i}"));
        c.producible = [GoodId::new(deliv.as_str())].into();
        c.endowment = bundle(&raw, 1);
        c.transformation = Transformation::new(recipes, false);
        c.benefit = BenefitSpec::default().with_price(deliv.as_str(), p_c.clone(), Some(1));
        companies.push(c);
    }
    for (i, p_s) in [(1, &params.p_s1), (2, &params.p_s2)] {
        let svc = format!("svc{i}");
        let mut s = CompanySpec::new(format!("s{i}"), format!("shipper {i}"));
        s.producible = [GoodId::new(svc.as_str())].into();
        s.transformation = Transformation::new(
            vec![Recipe::new(GoodVector::new(), bundle(&svc, 1), Some(SHIPPER_CAPACITY), 1)
                .expect("service recipe is well formed")],
            false,
        );
        s.cost = CostSpec::default().with_output_rate(svc.as_str(), p_s.clone());
        companies.push(s);
    }
    let game = Arc::new(NetworkGame::new(goods, companies));

    let mut flow = GoodsFlow::new();
    let mut value = ValueFlow::new();
    for (i, v) in [(1, &params.v11), (2, &params.v22)] {
        let (c, s) = (CompanyId::new(format!("c{i}")), CompanyId::new(format!("s{i}")));
        flow.ship(&s, &c, &GoodId::new(format!("svc{i}")), 1);
        flow.sell(&c, &GoodId::new(format!("deliv{i}")), 1);
        value.pay(c, s, v.clone()).expect("price gate guarantees a positive fee");
    }
    let baseline = Outcome::new(game.clone(), flow, value).expect("demo references resolve");

    let params_text = params.to_vec().iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    Ok(ScenarioDocument {
        version: crate::scenario::FORMAT_VERSION.to_owned(),
        game,
        baseline: Some(baseline),
        improved: None,
        metadata: BTreeMap::from([
            ("scenario".to_owned(), "shipping".to_owned()),
            ("params".to_owned(), params_text),
        ]),
    })
}

/// Both cargo owners ship with `s1`; `s2` idles.
pub fn both_via_first_shipper() -> GoodsFlow {
    let s1 = CompanyId::new("s1");
    let mut flow = GoodsFlow::new();
    for i in 1..=2 {
        let c = CompanyId::new(format!("c{i}"));
        flow.ship(&s1, &c, &GoodId::new("svc1"), 1);
        flow.sell(&c, &GoodId::new(format!("deliv{i}")), 1);
    }
    flow
}
