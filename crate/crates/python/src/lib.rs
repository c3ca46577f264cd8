//! Python bindings for `coopnet-core`.
//!
//! Money crosses the boundary as `fractions.Fraction`. Money arguments accept
//! anything whose `str()` is an integer or `p/q` (int, Fraction, str).

use std::collections::BTreeMap;
use std::sync::Arc;

use coopnet_core::accounting::{self, ConservationMode, GoodsFlow, Outcome, ValueFlow};
use coopnet_core::demo::{build_shipping_demo, ShippingParams};
use coopnet_core::goods::{parse_money, CompanyId, GoodVector, Money};
use coopnet_core::optimizer::{brute_force_max_tnv_parallel, greedy_improve, SearchBounds, SearchResult};
use coopnet_core::rebalancer::{collapse_nodes, pareto_rebalance, WeightVector};
use coopnet_core::report::{render_report, ReportFormat};
use coopnet_core::scenario::{load_scenario, render_document, ScenarioDocument};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

pyo3::create_exception!(coopnet, CoopnetError, pyo3::exceptions::PyException);

fn err(e: impl ToString) -> PyErr {
    CoopnetError::new_err(e.to_string())
}

fn to_fraction<'py>(py: Python<'py>, m: &Money) -> PyResult<Bound<'py, PyAny>> {
    let fraction = py.import("fractions")?.getattr("Fraction")?;
    fraction.call1((m.to_string(),))
}

fn from_py_money(obj: &Bound<'_, PyAny>) -> PyResult<Money> {
    let text = obj.str()?.to_string();
    parse_money(&text).ok_or_else(|| PyValueError::new_err(format!("not a rational amount: {text:?}")))
}

fn parse_mode(mode: &str) -> PyResult<ConservationMode> {
    match mode {
        "disposal" => Ok(ConservationMode::Disposal),
        "exact" => Ok(ConservationMode::Exact),
        other => Err(PyValueError::new_err(format!("conservation must be 'disposal' or 'exact', got {other:?}"))),
    }
}

fn bundle_dict<'py>(py: Python<'py>, v: &GoodVector) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (g, n) in v.iter() {
        d.set_item(g.as_str(), n)?;
    }
    Ok(d)
}

fn bundle_from_dict(d: &Bound<'_, PyDict>) -> PyResult<GoodVector> {
    let mut v = GoodVector::new();
    for (k, n) in d.iter() {
        v.add_to(&k.extract::<String>()?.into(), n.extract::<u64>()?);
    }
    Ok(v)
}

/// A goods flow: internal shipments and external sales.
#[pyclass(name = "GoodsFlow", module = "coopnet", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyGoodsFlow {
    inner: GoodsFlow,
}

#[pymethods]
impl PyGoodsFlow {
    /// `shipments` maps `(from, to)` to `{good: count}`; `sales` maps a
    /// company to `{good: count}`.
    #[new]
    #[pyo3(signature = (shipments=None, sales=None))]
    fn new(shipments: Option<&Bound<'_, PyDict>>, sales: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = GoodsFlow::new();
        if let Some(s) = shipments {
            for (key, bundle) in s.iter() {
                let (from, to): (String, String) = key.extract()?;
                inner.set_shipment(from.into(), to.into(), bundle_from_dict(bundle.cast()?)?);
            }
        }
        if let Some(s) = sales {
            for (company, bundle) in s.iter() {
                inner.set_sales(company.extract::<String>()?.into(), bundle_from_dict(bundle.cast()?)?);
            }
        }
        Ok(Self { inner })
    }

    fn shipments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for ((from, to), bundle) in self.inner.internal() {
            d.set_item((from.as_str(), to.as_str()), bundle_dict(py, bundle)?)?;
        }
        Ok(d)
    }

    fn sales<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (company, bundle) in self.inner.external_sales() {
            d.set_item(company.as_str(), bundle_dict(py, bundle)?)?;
        }
        Ok(d)
    }

    fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    fn __repr__(&self) -> String {
        let mut parts: Vec<String> = self
            .inner
            .internal()
            .iter()
            .map(|((a, b), v)| format!("{a}->{b} [{v}]"))
            .collect();
        parts.extend(self.inner.external_sales().iter().map(|(c, v)| format!("{c}->sink [{v}]")));
        format!("GoodsFlow({})", parts.join(", "))
    }
}

/// A goods flow and a value flow over a game.
#[pyclass(name = "Outcome", module = "coopnet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOutcome {
    inner: Outcome,
}

#[pymethods]
impl PyOutcome {
    #[getter]
    fn goods(&self) -> PyGoodsFlow {
        PyGoodsFlow { inner: self.inner.goods.clone() }
    }

    /// `{(payer, payee): Fraction}`.
    fn transfers<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for ((payer, payee), m) in self.inner.value.transfers() {
            d.set_item((payer.as_str(), payee.as_str()), to_fraction(py, m)?)?;
        }
        Ok(d)
    }

    fn company_ids(&self) -> Vec<String> {
        self.inner.game.companies.iter().map(|c| c.id.to_string()).collect()
    }

    fn payoff<'py>(&self, py: Python<'py>, company: &str) -> PyResult<Bound<'py, PyAny>> {
        let p = accounting::payoff(&self.inner, &CompanyId::new(company)).map_err(err)?;
        to_fraction(py, &p)
    }

    fn payoffs<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (id, p) in accounting::payoffs(&self.inner).map_err(err)? {
            d.set_item(id.as_str(), to_fraction(py, &p)?)?;
        }
        Ok(d)
    }

    fn tnv<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_fraction(py, &accounting::tnv(&self.inner).map_err(err)?)
    }

    fn identity_gap<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_fraction(py, &accounting::budget_identity_gap(&self.inner).map_err(err)?)
    }

    #[pyo3(signature = (conservation="disposal"))]
    fn violations(&self, conservation: &str) -> PyResult<Vec<String>> {
        let mode = parse_mode(conservation)?;
        Ok(accounting::check_conservation(&self.inner, mode)
            .iter()
            .map(ToString::to_string)
            .collect())
    }

    /// Text table or structured scenario document.
    #[pyo3(signature = (format="text", conservation="disposal"))]
    fn report(&self, format: &str, conservation: &str) -> PyResult<String> {
        let format = match format {
            "text" => ReportFormat::Text,
            "structured" => ReportFormat::Structured,
            other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
        };
        let bytes = render_report(&self.inner, format, parse_mode(conservation)?);
        String::from_utf8(bytes).map_err(err)
    }

    /// Merge two companies; returns `(outcome, merged_id)`.
    fn collapse(&self, a: &str, b: &str) -> PyResult<(PyOutcome, String)> {
        let c = collapse_nodes(&self.inner, &CompanyId::new(a), &CompanyId::new(b)).map_err(err)?;
        Ok((PyOutcome { inner: c.outcome }, c.merged_id.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Outcome(companies={}, shipments={}, transfers={})",
            self.inner.game.companies.len(),
            self.inner.goods.internal().len(),
            self.inner.value.len()
        )
    }
}

/// Result of a goods-flow search.
#[pyclass(name = "SearchResult", module = "coopnet", frozen, get_all)]
struct PySearchResult {
    flow: PyGoodsFlow,
    tnv: Py<PyAny>,
    visited: u64,
    iterations: u64,
}

impl PySearchResult {
    fn wrap(py: Python<'_>, r: SearchResult) -> PyResult<Self> {
        Ok(Self {
            tnv: to_fraction(py, &r.tnv)?.unbind(),
            flow: PyGoodsFlow { inner: r.flow },
            visited: r.visited,
            iterations: r.iterations,
        })
    }
}

#[pymethods]
impl PySearchResult {
    fn __repr__(&self, py: Python<'_>) -> PyResult<String> {
        Ok(format!(
            "SearchResult(tnv={}, visited={}, iterations={})",
            self.tnv.bind(py).str()?,
            self.visited,
            self.iterations
        ))
    }
}

/// A game with an optional baseline outcome and improved goods flow.
#[pyclass(name = "Scenario", module = "coopnet", frozen)]
struct PyScenario {
    doc: ScenarioDocument,
}

impl PyScenario {
    fn baseline_outcome(&self) -> PyResult<&Outcome> {
        self.doc.baseline.as_ref().ok_or_else(|| err("scenario has no baseline"))
    }

    fn bounds(&self, bound: u64, conservation: &str) -> PyResult<SearchBounds> {
        Ok(SearchBounds::new(bound).map_err(err)?.with_mode(parse_mode(conservation)?))
    }
}

#[pymethods]
impl PyScenario {
    /// Parse a scenario document.
    #[staticmethod]
    fn loads(text: &str) -> PyResult<Self> {
        Ok(Self { doc: load_scenario(text.as_bytes()).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(err)?;
        Ok(Self { doc: load_scenario(&bytes).map_err(err)? })
    }

    /// The two-cargo-owner, two-shipper example.
    /// `params` is `(p_c1, p_c2, p_s1, p_s2, v11, v22)`.
    #[staticmethod]
    #[pyo3(signature = (params=None))]
    fn shipping_demo(params: Option<&Bound<'_, PyTuple>>) -> PyResult<Self> {
        let params = match params {
            None => ShippingParams::standard(),
            Some(t) => {
                let values: Vec<Money> = t.iter().map(|x| from_py_money(&x)).collect::<PyResult<_>>()?;
                let arr: [Money; 6] = values
                    .try_into()
                    .map_err(|_| PyValueError::new_err("params needs six values"))?;
                ShippingParams::from_array(arr)
            }
        };
        Ok(Self { doc: build_shipping_demo(&params).map_err(err)? })
    }

    fn dumps(&self) -> PyResult<String> {
        String::from_utf8(render_document(&self.doc)).map_err(err)
    }

    fn company_ids(&self) -> Vec<String> {
        self.doc.game.companies.iter().map(|c| c.id.to_string()).collect()
    }

    fn good_ids(&self) -> Vec<String> {
        self.doc.game.goods.iter().map(|g| g.id.to_string()).collect()
    }

    #[getter]
    fn baseline(&self) -> Option<PyOutcome> {
        self.doc.baseline.clone().map(|inner| PyOutcome { inner })
    }

    #[getter]
    fn improved(&self) -> Option<PyGoodsFlow> {
        self.doc.improved.clone().map(|inner| PyGoodsFlow { inner })
    }

    #[getter]
    fn metadata(&self) -> BTreeMap<String, String> {
        self.doc.metadata.clone()
    }

    /// Game problems found by validation, as strings.
    fn defects(&self) -> Vec<String> {
        coopnet_core::validate_game(&self.doc.game).iter().map(ToString::to_string).collect()
    }

    /// An outcome of this game with no value transfers unless given.
    #[pyo3(signature = (goods, transfers=None))]
    fn outcome(&self, goods: &PyGoodsFlow, transfers: Option<&Bound<'_, PyDict>>) -> PyResult<PyOutcome> {
        let mut value = ValueFlow::new();
        if let Some(t) = transfers {
            for (key, amount) in t.iter() {
                let (payer, payee): (String, String) = key.extract()?;
                value.pay(payer.into(), payee.into(), from_py_money(&amount)?).map_err(err)?;
            }
        }
        let inner = Outcome::new(self.doc.game.clone(), goods.inner.clone(), value).map_err(err)?;
        Ok(PyOutcome { inner })
    }

    /// Exhaustive search for the TNV-maximizing flow.
    #[pyo3(signature = (bound=2, conservation="disposal"))]
    fn brute_force(&self, py: Python<'_>, bound: u64, conservation: &str) -> PyResult<PySearchResult> {
        let bounds = self.bounds(bound, conservation)?;
        let game = self.doc.game.clone();
        let r = py.detach(move || brute_force_max_tnv_parallel(&game, &bounds)).map_err(err)?;
        PySearchResult::wrap(py, r)
    }

    /// Local search from `start`, or from the baseline goods flow.
    #[pyo3(signature = (start=None, bound=2, max_iters=1000, conservation="disposal"))]
    fn greedy(
        &self,
        py: Python<'_>,
        start: Option<&PyGoodsFlow>,
        bound: u64,
        max_iters: u64,
        conservation: &str,
    ) -> PyResult<PySearchResult> {
        let bounds = self.bounds(bound, conservation)?;
        let start = match start {
            Some(f) => f.inner.clone(),
            None => self.baseline_outcome()?.goods.clone(),
        };
        let game = self.doc.game.clone();
        let r = py.detach(move || greedy_improve(&game, &start, &bounds, max_iters)).map_err(err)?;
        PySearchResult::wrap(py, r)
    }

    /// Side payments that make `improved` better for every company than the
    /// baseline. `weights` maps company id to share (default uniform).
    #[pyo3(signature = (improved, weights=None, conservation="disposal"))]
    fn rebalance(
        &self,
        improved: &PyGoodsFlow,
        weights: Option<&Bound<'_, PyDict>>,
        conservation: &str,
    ) -> PyResult<PyOutcome> {
        let baseline = self.baseline_outcome()?;
        let weights = match weights {
            None => WeightVector::uniform(&self.doc.game).map_err(err)?,
            Some(d) => {
                let mut map = BTreeMap::new();
                for (k, w) in d.iter() {
                    let id: String = k.extract()?;
                    if self.doc.game.company(&CompanyId::new(id.as_str())).is_none() {
                        return Err(PyKeyError::new_err(id));
                    }
                    map.insert(CompanyId::new(id), from_py_money(&w)?);
                }
                WeightVector::new(map).map_err(err)?
            }
        };
        let value = pareto_rebalance(baseline, &improved.inner, &weights, parse_mode(conservation)?).map_err(err)?;
        let inner = Outcome::new(Arc::clone(&self.doc.game), improved.inner.clone(), value).map_err(err)?;
        Ok(PyOutcome { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(companies={}, goods={})",
            self.doc.game.companies.len(),
            self.doc.game.goods.len()
        )
    }
}

#[pymodule]
pub fn coopnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyOutcome>()?;
    m.add_class::<PyGoodsFlow>()?;
    m.add_class::<PySearchResult>()?;
    m.add("CoopnetError", m.py().get_type::<CoopnetError>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conservation_names() {
        assert_eq!(parse_mode("disposal").unwrap(), ConservationMode::Disposal);
        assert_eq!(parse_mode("exact").unwrap(), ConservationMode::Exact);
        assert!(parse_mode("Exact").is_err());
    }
}
