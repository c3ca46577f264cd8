//! Business network games: companies exchanging goods over a flow graph,
//! payoffs and total network value in exact rationals, search for
//! value-maximizing goods flows, and side-payment constructions that turn any
//! gain in total value into a strict gain for every company.

pub mod accounting;
pub mod cli;
pub mod demo;
pub mod goods;
pub mod model;
pub mod optimizer;
pub mod rebalancer;
pub mod report;
pub mod scenario;

pub use accounting::{
    budget_identity_gap, check_conservation, external_benefit, external_cost, node_flows, payoff,
    payoffs, tnv, AccountingError, ConservationMode, GoodsFlow, Outcome, ValueFlow, Violation,
};
pub use cli::run_cli;
pub use demo::{build_shipping_demo, ShippingParams};
pub use goods::{CompanyId, GoodId, GoodVector, Money};
pub use model::{
    validate_game, BenefitSpec, CompanySpec, CostSpec, Defect, GoodType, ModelError, NetworkGame,
    Recipe, Transformation,
};
pub use optimizer::{
    brute_force_max_tnv, brute_force_max_tnv_parallel, enumerate_goods_flows, greedy_improve,
    search_space_size,
    OptimizerError, SearchBounds, SearchResult,
};
pub use rebalancer::{
    collapse_nodes, pareto_rebalance, realize_payoffs, CollapsedOutcome, RebalanceError,
    WeightVector,
};
pub use report::{render_report, Report, ReportFormat};
pub use scenario::{load_scenario, render_document, ScenarioDocument, ScenarioError};
