//! Search for goods flows that maximize total network value.
//!
//! A goods flow is encoded as a vector of integer decision variables, one per
//! (source company, destination, good) where the destination is another
//! company or the sink and the good is producible by the source. Variables are
//! ordered canonically: sources by id, destinations by id with the sink last,
//! goods by id. The enumerator walks assignments in lexicographic order of that
//! vector, pruning any assignment whose total outflow of a good exceeds the
//! most the source could ever produce under the bound.

use std::collections::BTreeSet;

use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::accounting::{conserves, flow_tnv, goods_flow_violations, AccountingError, ConservationMode, GoodsFlow, Pair, Violation};
use crate::goods::{CompanyId, GoodId, GoodVector, Money};
use crate::model::{validate_game, CompanySpec, Defect, NetworkGame};

/// Input boxes larger than this fall back to a coarser production bound.
const BOX_LIMIT: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizerError {
    #[error("invalid game: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidGame(Vec<Defect>),
    #[error("start flow violates conservation: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidStartFlow(Vec<Violation>),
    #[error("max_units_per_edge must be at least 1")]
    BadBounds,
    #[error("no goods flow satisfies conservation within the bounds")]
    NoFeasibleFlow,
    #[error(transparent)]
    Accounting(#[from] AccountingError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchBounds {
    max_units_per_edge: u64,
    candidate_edges: Option<BTreeSet<Pair>>,
    mode: ConservationMode,
}

impl SearchBounds {
    pub fn new(max_units_per_edge: u64) -> Result<Self, OptimizerError> {
        if max_units_per_edge == 0 {
            return Err(OptimizerError::BadBounds);
        }
        Ok(Self {
            max_units_per_edge,
            candidate_edges: None,
            mode: ConservationMode::Disposal,
        })
    }

    /// Restrict company→company shipments to these ordered pairs.
    pub fn with_candidate_edges(mut self, edges: impl IntoIterator<Item = Pair>) -> Self {
        self.candidate_edges = Some(edges.into_iter().collect());
        self
    }

    pub fn with_mode(mut self, mode: ConservationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn max_units_per_edge(&self) -> u64 {
        self.max_units_per_edge
    }

    pub fn mode(&self) -> ConservationMode {
        self.mode
    }

    fn allows(&self, from: &CompanyId, to: &CompanyId) -> bool {
        self.candidate_edges
            .as_ref()
            .is_none_or(|edges| edges.contains(&(from.clone(), to.clone())))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub flow: GoodsFlow,
    pub tnv: Money,
    /// Number of goods flows whose value was evaluated.
    pub visited: u64,
    /// Improving moves applied (always 0 for exhaustive search).
    pub iterations: u64,
}

#[derive(Clone, Debug)]
struct Var {
    from: CompanyId,
    /// `None` is the sink.
    to: Option<CompanyId>,
    good: GoodId,
    cap: u64,
    /// Index into the per-(company, good) production bound table.
    slot: usize,
}

/// The decision-variable layout shared by the enumerator and the improver.
#[derive(Clone, Debug)]
struct Layout {
    vars: Vec<Var>,
    slot_bound: Vec<u64>,
}

impl Layout {
    fn new(game: &NetworkGame, bounds: &SearchBounds) -> Self {
        let k = bounds.max_units_per_edge;
        let mut companies: Vec<&CompanySpec> = game.companies.iter().collect();
        companies.sort_by(|a, b| a.id.cmp(&b.id));

        let mut vars = Vec::new();
        let mut slot_bound = Vec::new();
        for src in &companies {
            let cap_by_good: Vec<(GoodId, u64)> = src
                .producible
                .iter()
                .map(|g| (g.clone(), production_bound(game, src, g, bounds)))
                .filter(|&(_, u)| u > 0)
                .collect();
            let first_slot = slot_bound.len();
            slot_bound.extend(cap_by_good.iter().map(|&(_, u)| u));

            let dests = companies
                .iter()
                .filter(|dst| dst.id != src.id && bounds.allows(&src.id, &dst.id))
                .map(|dst| Some(dst.id.clone()))
                .chain(std::iter::once(None));
            for to in dests {
                for (n, (good, u)) in cap_by_good.iter().enumerate() {
                    let cap = if to.is_some() { k.min(*u) } else { *u };
                    vars.push(Var {
                        from: src.id.clone(),
                        to: to.clone(),
                        good: good.clone(),
                        cap,
                        slot: first_slot + n,
                    });
                }
            }
        }
        Self { vars, slot_bound }
    }

    fn flow(&self, values: &[u64]) -> GoodsFlow {
        let mut flow = GoodsFlow::new();
        for (var, &v) in self.vars.iter().zip(values) {
            if v == 0 {
                continue;
            }
            match &var.to {
                Some(to) => flow.ship(&var.from, to, &var.good, v),
                None => flow.sell(&var.from, &var.good, v),
            }
        }
        flow
    }

    fn read(&self, flow: &GoodsFlow, var: &Var) -> u64 {
        match &var.to {
            Some(to) => flow.shipment(&var.from, to).get(&var.good),
            None => flow.sales(&var.from).get(&var.good),
        }
    }

    fn write(&self, flow: &mut GoodsFlow, var: &Var, value: u64) {
        match &var.to {
            Some(to) => {
                let mut bundle = flow.shipment(&var.from, to);
                bundle.set(var.good.clone(), value);
                flow.set_shipment(var.from.clone(), to.clone(), bundle);
            }
            None => {
                let mut bundle = flow.sales(&var.from);
                bundle.set(var.good.clone(), value);
                flow.set_sales(var.from.clone(), bundle);
            }
        }
    }
}

/// Largest amount of `good` that `company` can emit when every permitted
/// inbound edge carries at most the per-edge bound.
fn production_bound(game: &NetworkGame, company: &CompanySpec, good: &GoodId, bounds: &SearchBounds) -> u64 {
    let k = bounds.max_units_per_edge;
    // Maximal inflow per good: one full edge from every permitted supplier.
    let mut inflow_max: Vec<(GoodId, u64)> = Vec::new();
    for g in game.sorted_good_ids() {
        let suppliers = game
            .companies
            .iter()
            .filter(|s| s.id != company.id && s.producible.contains(&g) && bounds.allows(&s.id, &company.id))
            .count() as u64;
        if suppliers > 0 {
            inflow_max.push((g, suppliers * k));
        }
    }

    let box_size = inflow_max
        .iter()
        .try_fold(1u64, |acc, (_, m)| acc.checked_mul(m + 1));
    match box_size {
        Some(size) if size <= BOX_LIMIT => {
            // The transformation need not be monotone, so scan the whole box.
            let mut best = 0;
            let mut x = vec![0u64; inflow_max.len()];
            loop {
                let mut g_in = company.endowment.clone();
                for ((g, _), &n) in inflow_max.iter().zip(&x) {
                    g_in.add_to(g, n);
                }
                best = best.max(company.transform(&g_in).get(good));
                let mut pos = x.len();
                loop {
                    if pos == 0 {
                        return best;
                    }
                    pos -= 1;
                    if x[pos] < inflow_max[pos].1 {
                        x[pos] += 1;
                        break;
                    }
                    x[pos] = 0;
                }
            }
        }
        _ => {
            let mut ceiling = company.endowment.clone();
            for (g, m) in &inflow_max {
                ceiling.add_to(g, *m);
            }
            coarse_production_bound(company, &ceiling, good)
        }
    }
}

/// Sum over recipes of the most each could fire on `ceiling`, plus any
/// passthrough. Valid even when the transformation is not monotone.
fn coarse_production_bound(company: &CompanySpec, ceiling: &GoodVector, good: &GoodId) -> u64 {
    let t = &company.transformation;
    let mut total: u64 = t
        .recipes()
        .iter()
        .map(|r| {
            let by_inputs = r.inputs().iter().map(|(g, need)| ceiling.get(g) / need).min();
            let uses = match (by_inputs, r.max_uses()) {
                (Some(n), Some(cap)) => n.min(cap),
                (Some(n), None) => n,
                (None, cap) => cap.unwrap_or(0),
            };
            uses.saturating_mul(r.outputs().get(good))
        })
        .fold(0u64, u64::saturating_add);
    if t.passthrough() {
        total = total.saturating_add(ceiling.get(good));
    }
    total
}

/// Lexicographic stream of every conservation-valid goods flow within the
/// bounds. The empty flow comes first whenever it is valid.
pub struct GoodsFlowEnumerator<'a> {
    game: &'a NetworkGame,
    layout: Layout,
    mode: ConservationMode,
    values: Vec<u64>,
    used: Vec<u64>,
    /// Variables below this index are held fixed.
    fixed: usize,
    started: bool,
    done: bool,
}

impl<'a> GoodsFlowEnumerator<'a> {
    fn with_layout(game: &'a NetworkGame, layout: Layout, mode: ConservationMode) -> Self {
        let values = vec![0; layout.vars.len()];
        let used = vec![0; layout.slot_bound.len()];
        Self {
            game,
            layout,
            mode,
            values,
            used,
            fixed: 0,
            started: false,
            done: false,
        }
    }

    /// Pin the first variable to `value`; the stream then covers exactly the
    /// flows of the full stream that carry that value.
    fn pinned_first(mut self, value: u64) -> Self {
        if let Some(var) = self.layout.vars.first() {
            self.values[0] = value;
            self.used[var.slot] = value;
            self.fixed = 1;
        }
        self
    }

    fn advance(&mut self) -> bool {
        let vars = &self.layout.vars;
        for k in (self.fixed..vars.len()).rev() {
            let slot = vars[k].slot;
            if self.values[k] < vars[k].cap && self.used[slot] < self.layout.slot_bound[slot] {
                self.values[k] += 1;
                self.used[slot] += 1;
                return true;
            }
            self.used[slot] -= self.values[k];
            self.values[k] = 0;
        }
        false
    }
}

impl Iterator for GoodsFlowEnumerator<'_> {
    type Item = GoodsFlow;

    fn next(&mut self) -> Option<GoodsFlow> {
        loop {
            if self.done {
                return None;
            }
            if self.started {
                if !self.advance() {
                    self.done = true;
                    return None;
                }
            } else {
                self.started = true;
            }
            let flow = self.layout.flow(&self.values);
            if conserves(self.game, &flow, self.mode) {
                return Some(flow);
            }
        }
    }
}

fn ensure_valid(game: &NetworkGame) -> Result<(), OptimizerError> {
    let defects = validate_game(game);
    if defects.is_empty() {
        Ok(())
    } else {
        Err(OptimizerError::InvalidGame(defects))
    }
}

/// Every conservation-valid goods flow within `bounds`, in canonical order.
pub fn enumerate_goods_flows<'a>(
    game: &'a NetworkGame,
    bounds: &SearchBounds,
) -> Result<GoodsFlowEnumerator<'a>, OptimizerError> {
    ensure_valid(game)?;
    Ok(GoodsFlowEnumerator::with_layout(game, Layout::new(game, bounds), bounds.mode))
}

/// Number of candidate assignments the enumerator walks before the
/// conservation filter. Saturates at `u128::MAX`.
pub fn search_space_size(game: &NetworkGame, bounds: &SearchBounds) -> u128 {
    let layout = Layout::new(game, bounds);
    let mut total: u128 = 1;
    for (slot, &bound) in layout.slot_bound.iter().enumerate() {
        // ways[s] = assignments of this slot's variables summing to s
        let mut ways = vec![0u128; bound as usize + 1];
        ways[0] = 1;
        for var in layout.vars.iter().filter(|v| v.slot == slot) {
            let mut next = vec![0u128; ways.len()];
            for (s, &w) in ways.iter().enumerate().filter(|(_, w)| **w > 0) {
                for x in 0..=var.cap as usize {
                    if s + x < next.len() {
                        next[s + x] = next[s + x].saturating_add(w);
                    }
                }
            }
            ways = next;
        }
        let count = ways.iter().fold(0u128, |a, &w| a.saturating_add(w));
        total = total.saturating_mul(count);
    }
    total
}

/// Keeps the first strictly better flow; later ties lose.
fn fold_best(
    game: &NetworkGame,
    flows: impl Iterator<Item = GoodsFlow>,
) -> Result<Option<SearchResult>, OptimizerError> {
    let mut best: Option<SearchResult> = None;
    let mut visited = 0;
    for flow in flows {
        visited += 1;
        let value = flow_tnv(game, &flow)?;
        if best.as_ref().is_none_or(|b| value > b.tnv) {
            best = Some(SearchResult {
                flow,
                tnv: value,
                visited: 0,
                iterations: 0,
            });
        }
    }
    Ok(best.map(|mut b| {
        b.visited = visited;
        b
    }))
}

/// Exhaustive search: the TNV-maximizing flow, ties going to the earliest in
/// enumeration order.
pub fn brute_force_max_tnv(game: &NetworkGame, bounds: &SearchBounds) -> Result<SearchResult, OptimizerError> {
    let flows = enumerate_goods_flows(game, bounds)?;
    fold_best(game, flows)?.ok_or(OptimizerError::NoFeasibleFlow)
}

/// [`brute_force_max_tnv`] with the stream split on the first variable across
/// the rayon pool. Returns the same result as the sequential search.
pub fn brute_force_max_tnv_parallel(
    game: &NetworkGame,
    bounds: &SearchBounds,
) -> Result<SearchResult, OptimizerError> {
    ensure_valid(game)?;
    let layout = Layout::new(game, bounds);
    let Some(first) = layout.vars.first() else {
        return brute_force_max_tnv(game, bounds);
    };
    let parts: Vec<Option<SearchResult>> = (0..=first.cap)
        .into_par_iter()
        .map(|v| {
            let part = GoodsFlowEnumerator::with_layout(game, layout.clone(), bounds.mode).pinned_first(v);
            fold_best(game, part)
        })
        .collect::<Result<_, _>>()?;

    // Parts arrive in enumeration order, so a strict comparison keeps the
    // earliest maximum.
    let visited: u64 = parts.iter().flatten().map(|p| p.visited).sum();
    let mut best: Option<SearchResult> = None;
    for part in parts.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| part.tnv > b.tnv) {
            best = Some(part);
        }
    }
    best.map(|mut b| {
        b.visited = visited;
        b
    })
    .ok_or(OptimizerError::NoFeasibleFlow)
}

#[derive(Clone, Copy, Debug)]
enum Move {
    Up(usize),
    Down(usize),
    /// Shift one unit from the first variable to the second.
    Shift(usize, usize),
}

/// Hill climbing from `start`. Each iteration applies the best move among
/// single-variable ±1 changes and one-unit shifts between two variables,
/// taking only strict TNV improvements; earlier moves win ties.
pub fn greedy_improve(
    game: &NetworkGame,
    start: &GoodsFlow,
    bounds: &SearchBounds,
    max_iters: u64,
) -> Result<SearchResult, OptimizerError> {
    ensure_valid(game)?;
    let violations = goods_flow_violations(game, start, bounds.mode);
    if !violations.is_empty() {
        return Err(OptimizerError::InvalidStartFlow(violations));
    }
    let layout = Layout::new(game, bounds);
    let n = layout.vars.len();
    let mut values: Vec<u64> = layout.vars.iter().map(|v| layout.read(start, v)).collect();
    let mut current = start.clone();
    let mut current_tnv = flow_tnv(game, &current)?;
    let mut visited = 1;
    let mut iterations = 0;

    let moves: Vec<Move> = (0..n)
        .flat_map(|k| [Move::Up(k), Move::Down(k)])
        .chain((0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| Move::Shift(a, b))))
        .collect();

    while iterations < max_iters {
        let mut best: Option<(Money, GoodsFlow, Vec<u64>)> = None;
        for &mv in &moves {
            let mut next = values.clone();
            let ok = match mv {
                Move::Up(k) => bump_up(&layout, &mut next, k),
                Move::Down(k) => bump_down(&mut next, k),
                Move::Shift(a, b) => bump_down(&mut next, a) && bump_up(&layout, &mut next, b),
            };
            if !ok {
                continue;
            }
            let mut candidate = current.clone();
            for (k, var) in layout.vars.iter().enumerate() {
                if next[k] != values[k] {
                    layout.write(&mut candidate, var, next[k]);
                }
            }
            if !conserves(game, &candidate, bounds.mode) {
                continue;
            }
            visited += 1;
            let value = flow_tnv(game, &candidate)?;
            let threshold = best.as_ref().map_or(&current_tnv, |b| &b.0);
            if value > *threshold {
                best = Some((value, candidate, next));
            }
        }
        match best {
            Some((value, flow, next)) => {
                current_tnv = value;
                current = flow;
                values = next;
                iterations += 1;
            }
            None => break,
        }
    }
    Ok(SearchResult {
        flow: current,
        tnv: current_tnv,
        visited,
        iterations,
    })
}

fn bump_up(layout: &Layout, values: &mut [u64], k: usize) -> bool {
    if values[k] >= layout.vars[k].cap {
        return false;
    }
    values[k] += 1;
    true
}

fn bump_down(values: &mut [u64], k: usize) -> bool {
    if values[k].is_zero() {
        return false;
    }
    values[k] -= 1;
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goods::money;
    use crate::model::{GoodType, Recipe, Transformation};

    fn gv(items: &[(&str, u64)]) -> GoodVector {
        items.iter().map(|&(g, c)| (g, c)).collect()
    }

    #[test]
    fn lone_company_yields_only_the_empty_flow() {
        let game = NetworkGame::new(vec![GoodType::new("a", "")], vec![CompanySpec::new("x", "")]);
        let flows: Vec<_> = enumerate_goods_flows(&game, &SearchBounds::new(2).unwrap())
            .unwrap()
            .collect();
        assert_eq!(flows, vec![GoodsFlow::new()]);
    }

    #[test]
    fn zero_bound_rejected() {
        assert_eq!(SearchBounds::new(0), Err(OptimizerError::BadBounds));
    }

    #[test]
    fn non_monotone_transformation_bound() {
        // More input can mean less y: a+b→x outranks a→y.
        let mut c = CompanySpec::new("c", "");
        c.producible = ["x", "y"].iter().map(|&g| GoodId::new(g)).collect();
        c.endowment = gv(&[("a", 1)]);
        c.transformation = Transformation::new(
            vec![
                Recipe::new(gv(&[("a", 1), ("b", 1)]), gv(&[("x", 1)]), None, 1).unwrap(),
                Recipe::new(gv(&[("a", 1)]), gv(&[("y", 1)]), None, 2).unwrap(),
            ],
            false,
        );
        let mut supplier = CompanySpec::new("b-maker", "");
        supplier.producible = [GoodId::new("b")].into();
        supplier.transformation =
            Transformation::new(vec![Recipe::new(GoodVector::new(), gv(&[("b", 1)]), Some(1), 1).unwrap()], false);
        let game = NetworkGame::new(
            ["a", "b", "x", "y"].iter().map(|&g| GoodType::new(g, "")).collect(),
            vec![c.clone(), supplier],
        );
        let bounds = SearchBounds::new(1).unwrap();
        assert_eq!(production_bound(&game, &c, &"x".into(), &bounds), 1);
        assert_eq!(production_bound(&game, &c, &"y".into(), &bounds), 1);
        assert_eq!(coarse_production_bound(&c, &gv(&[("a", 1), ("b", 1)]), &"y".into()), 1);
    }

    #[test]
    fn greedy_with_zero_iterations_returns_start() {
        let mut s = CompanySpec::new("s", "");
        s.producible = [GoodId::new("a")].into();
        s.transformation =
            Transformation::new(vec![Recipe::new(GoodVector::new(), gv(&[("a", 1)]), Some(1), 1).unwrap()], false);
        s.benefit = s.benefit.with_price("a", money(5), None);
        let game = NetworkGame::new(vec![GoodType::new("a", "")], vec![s]);
        let bounds = SearchBounds::new(1).unwrap();
        let r = greedy_improve(&game, &GoodsFlow::new(), &bounds, 0).unwrap();
        assert_eq!(r.flow, GoodsFlow::new());
        assert_eq!(r.iterations, 0);

        let r = greedy_improve(&game, &GoodsFlow::new(), &bounds, 10).unwrap();
        assert_eq!(r.tnv, money(5));
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn invalid_start_rejected() {
        let game = NetworkGame::new(vec![GoodType::new("a", "")], vec![CompanySpec::new("x", "")]);
        let mut start = GoodsFlow::new();
        start.sell(&"x".into(), &"a".into(), 1);
        let err = greedy_improve(&game, &start, &SearchBounds::new(1).unwrap(), 5).unwrap_err();
        assert!(matches!(err, OptimizerError::InvalidStartFlow(v) if v.len() == 1));
    }
}
