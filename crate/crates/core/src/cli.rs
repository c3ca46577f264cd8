//! The `coopnet` command line.
//!
//! Exit codes: 0 success, 1 domain failure (violations, no surplus, price
//! gate), 2 usage, I/O or parse errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::Zero;

use crate::accounting::{self, ConservationMode, GoodsFlow, Outcome};
use crate::demo::{build_shipping_demo, ShippingParams};
use crate::goods::{parse_money, CompanyId, Money};
use crate::model::validate_game;
use crate::optimizer::{brute_force_max_tnv_parallel, greedy_improve, SearchBounds};
use crate::rebalancer::{pareto_rebalance, RebalanceError, WeightVector};
use crate::report::{render_report, Report, ReportFormat};
use crate::scenario::{load_goods_flow, load_scenario, render_document, ScenarioDocument};

#[derive(Parser, Debug)]
#[command(name = "coopnet", version, about = "Business network game solver")]
struct Cli {
    /// Output format for reports.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Goods conservation rule.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Disposal)]
    conservation: ModeArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Text,
    Structured,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Disposal,
    Exact,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Brute,
    Greedy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the game and the baseline's goods conservation.
    Validate { file: PathBuf },
    /// Report payoffs, TNV and the budget identity for the baseline.
    Evaluate { file: PathBuf },
    /// Search for a TNV-maximizing goods flow.
    Optimize {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        bound: u64,
        #[arg(long, value_enum, default_value_t = Method::Brute)]
        method: Method,
        #[arg(long, default_value_t = 1000)]
        max_iters: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pay every company a share of the TNV gain of an improved goods flow.
    Rebalance {
        file: PathBuf,
        /// Goods-flow block or scenario file; defaults to the scenario's own
        /// `improved` block.
        #[arg(long)]
        improved: Option<PathBuf>,
        /// Comma-separated `id=p/q` shares summing to 1; uniform by default.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in scenario.
    Demo {
        #[command(subcommand)]
        which: DemoKind,
    },
}

#[derive(Subcommand, Debug)]
enum DemoKind {
    /// Two cargo owners and two shippers.
    Shipping {
        /// p_c1,p_c2,p_s1,p_s2,v11,v22
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Exit 1.
    Domain(String),
    /// Exit 2.
    Usage(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Usage(m) => m,
        }
    }
}

struct Ctx<'a> {
    format: ReportFormat,
    mode: ConservationMode,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn emit(&mut self, bytes: &[u8]) -> Result<(), Failure> {
        self.out
            .write_all(bytes)
            .map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
    }
}

/// Run the command line with `args` (including the program name) and return
/// the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut ctx = Ctx {
        format: match cli.format {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Structured => ReportFormat::Structured,
        },
        mode: match cli.conservation {
            ModeArg::Disposal => ConservationMode::Disposal,
            ModeArg::Exact => ConservationMode::Exact,
        },
        out,
    };
    let result = match cli.command {
        Command::Validate { file } => validate(&mut ctx, &file),
        Command::Evaluate { file } => evaluate(&mut ctx, &file),
        Command::Optimize {
            file,
            bound,
            method,
            max_iters,
            out,
        } => optimize(&mut ctx, &file, bound, method, max_iters, out.as_deref()),
        Command::Rebalance {
            file,
            improved,
            weights,
            out,
        } => rebalance(&mut ctx, &file, improved.as_deref(), weights.as_deref(), out.as_deref()),
        Command::Demo {
            which: DemoKind::Shipping { params, out },
        } => demo_shipping(&mut ctx, params.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "coopnet: {}", f.message());
            f.code()
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ScenarioDocument, Failure> {
    load_scenario(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn baseline_or_empty(doc: &ScenarioDocument) -> Outcome {
    doc.baseline
        .clone()
        .unwrap_or_else(|| Outcome::empty(doc.game.clone()))
}

fn validate(ctx: &mut Ctx, file: &Path) -> Result<(), Failure> {
    let doc = load(file)?;
    // load_scenario already rejects defective games; re-check for the summary.
    let defects = validate_game(&doc.game);
    let violations = doc
        .baseline
        .as_ref()
        .map(|o| accounting::check_conservation(o, ctx.mode))
        .unwrap_or_default();
    let mut text = String::new();
    for d in &defects {
        text.push_str(&format!("defect: {d}\n"));
    }
    for v in &violations {
        text.push_str(&format!("violation: {v}\n"));
    }
    if defects.is_empty() && violations.is_empty() {
        text.push_str(&format!(
            "ok: {} companies, {} goods, baseline {}\n",
            doc.game.companies.len(),
            doc.game.goods.len(),
            if doc.baseline.is_some() { "conserves goods" } else { "absent" },
        ));
    }
    ctx.emit(text.as_bytes())?;
    let count = defects.len() + violations.len();
    if count > 0 {
        return Err(Failure::Domain(format!("{count} problem(s) found")));
    }
    Ok(())
}

fn evaluate(ctx: &mut Ctx, file: &Path) -> Result<(), Failure> {
    let doc = load(file)?;
    let outcome = baseline_or_empty(&doc);
    ctx.emit(&render_report(&outcome, ctx.format, ctx.mode))?;
    let report = Report::build(&outcome, ctx.mode);
    if !report.violations.is_empty() {
        return Err(Failure::Domain(format!("{} violation(s) found", report.violations.len())));
    }
    Ok(())
}

fn describe_flow(flow: &GoodsFlow) -> String {
    let mut text = String::new();
    for ((from, to), bundle) in flow.internal() {
        text.push_str(&format!("  {from} -> {to}: {bundle}\n"));
    }
    for (company, bundle) in flow.external_sales() {
        text.push_str(&format!("  {company} -> sink: {bundle}\n"));
    }
    if flow.is_empty() {
        text.push_str("  (no goods move)\n");
    }
    text
}

fn optimize(
    ctx: &mut Ctx,
    file: &Path,
    bound: u64,
    method: Method,
    max_iters: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let doc = load(file)?;
    let bounds = SearchBounds::new(bound)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .with_mode(ctx.mode);
    let (label, result) = match method {
        Method::Brute => ("brute", brute_force_max_tnv_parallel(&doc.game, &bounds)),
        Method::Greedy => {
            let start = doc.baseline.as_ref().map(|o| o.goods.clone()).unwrap_or_default();
            ("greedy", greedy_improve(&doc.game, &start, &bounds, max_iters))
        }
    };
    let result = result.map_err(|e| Failure::Domain(e.to_string()))?;

    let mut updated = doc.clone();
    updated.improved = Some(result.flow.clone());
    updated.metadata.insert("optimize.method".into(), label.into());
    updated.metadata.insert("optimize.bound".into(), bound.to_string());
    updated.metadata.insert("optimize.tnv".into(), result.tnv.to_string());
    if let Some(path) = out {
        write_file(path, &render_document(&updated))?;
    }

    match ctx.format {
        ReportFormat::Structured => ctx.emit(&render_document(&updated)),
        ReportFormat::Text => {
            let mut text = format!(
                "best TNV = {} ({label}, bound {bound}, {} flows evaluated, {} moves)\n",
                result.tnv, result.visited, result.iterations
            );
            if let Some(base) = &doc.baseline {
                let before = accounting::tnv(base).map_err(|e| Failure::Domain(e.to_string()))?;
                text.push_str(&format!("baseline TNV = {before}, gain = {}\n", &result.tnv - &before));
            }
            text.push_str(&describe_flow(&result.flow));
            ctx.emit(text.as_bytes())
        }
    }
}

fn parse_weights(text: &str) -> Result<WeightVector, Failure> {
    let mut weights = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (id, w) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("weight `{item}` is not id=p/q")))?;
        let w = parse_money(w).ok_or_else(|| Failure::Usage(format!("weight `{item}` is not a rational")))?;
        if weights.insert(CompanyId::new(id.trim()), w).is_some() {
            return Err(Failure::Usage(format!("weight for `{id}` given twice")));
        }
    }
    WeightVector::new(weights).map_err(|e| Failure::Usage(e.to_string()))
}

fn load_improved(path: &Path, doc: &ScenarioDocument) -> Result<GoodsFlow, Failure> {
    let bytes = read(path)?;
    let is_document = serde_json::from_slice::<serde_json::Value>(&bytes)
        .map(|v| v.get("version").is_some())
        .unwrap_or(false);
    if is_document {
        let other = load(path)?;
        if other.game != doc.game {
            return Err(Failure::Usage(format!("{}: describes a different game", path.display())));
        }
        other
            .improved
            .or_else(|| other.baseline.map(|o| o.goods))
            .ok_or_else(|| Failure::Usage(format!("{}: no goods flow found", path.display())))
    } else {
        load_goods_flow(&bytes, &doc.game).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }
}

fn rebalance(
    ctx: &mut Ctx,
    file: &Path,
    improved: Option<&Path>,
    weights: Option<&str>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let doc = load(file)?;
    let baseline = doc
        .baseline
        .clone()
        .ok_or_else(|| Failure::Usage(format!("{}: scenario has no baseline", file.display())))?;
    let improved_flow = match improved {
        Some(path) => load_improved(path, &doc)?,
        None => doc
            .improved
            .clone()
            .ok_or_else(|| Failure::Usage("no --improved flow and the scenario has no `improved` block".into()))?,
    };
    let weights = match weights {
        Some(text) => parse_weights(text)?,
        None => WeightVector::uniform(&doc.game).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let value = pareto_rebalance(&baseline, &improved_flow, &weights, ctx.mode).map_err(|e| match e {
        RebalanceError::BadWeights(_) => Failure::Usage(e.to_string()),
        _ => Failure::Domain(e.to_string()),
    })?;
    let after = Outcome::new(doc.game.clone(), improved_flow, value).map_err(|e| Failure::Domain(e.to_string()))?;

    let before_tnv = accounting::tnv(&baseline).map_err(|e| Failure::Domain(e.to_string()))?;
    let mut updated = ScenarioDocument {
        version: doc.version.clone(),
        game: Arc::clone(&doc.game),
        baseline: Some(after.clone()),
        improved: None,
        metadata: doc.metadata.clone(),
    };
    updated.metadata.insert("rebalance.previous_tnv".into(), before_tnv.to_string());
    if let Some(path) = out {
        write_file(path, &render_document(&updated))?;
    }

    match ctx.format {
        ReportFormat::Structured => ctx.emit(&render_report(&after, ReportFormat::Structured, ctx.mode)),
        ReportFormat::Text => {
            let before = accounting::payoffs(&baseline).map_err(|e| Failure::Domain(e.to_string()))?;
            let now = accounting::payoffs(&after).map_err(|e| Failure::Domain(e.to_string()))?;
            let mut rows = vec![["company".to_owned(), "before".to_owned(), "after".to_owned(), "gain".to_owned()]];
            for (id, b) in &before {
                let a = &now[id];
                rows.push([id.to_string(), b.to_string(), a.to_string(), (a - b).to_string()]);
            }
            let mut width = [0usize; 4];
            for r in &rows {
                for (w, c) in width.iter_mut().zip(r) {
                    *w = (*w).max(c.len());
                }
            }
            let mut text = String::new();
            for r in &rows {
                text.push_str(&format!(
                    "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}\n",
                    r[0],
                    r[1],
                    r[2],
                    r[3],
                    w0 = width[0],
                    w1 = width[1],
                    w2 = width[2],
                    w3 = width[3]
                ));
            }
            text.push_str("transfers:\n");
            for ((payer, payee), amount) in after.value.transfers() {
                text.push_str(&format!("  {payer} pays {payee} {amount}\n"));
            }
            let gap = accounting::budget_identity_gap(&after).unwrap_or_else(|_| Money::zero());
            let tnv = accounting::tnv(&after).map_err(|e| Failure::Domain(e.to_string()))?;
            text.push_str(&format!("TNV = {tnv} (was {before_tnv}), identity gap = {gap}\n"));
            ctx.emit(text.as_bytes())
        }
    }
}

fn demo_shipping(ctx: &mut Ctx, params: Option<&str>, out: Option<&Path>) -> Result<(), Failure> {
    let params = match params {
        None => ShippingParams::standard(),
        Some(text) => {
            let values: Vec<Money> = text
                .split(',')
                .map(|s| parse_money(s).ok_or_else(|| Failure::Usage(format!("bad parameter `{s}`"))))
                .collect::<Result<_, _>>()?;
            let values: [Money; 6] = values
                .try_into()
                .map_err(|_| Failure::Usage("--params needs six values: p_c1,p_c2,p_s1,p_s2,v11,v22".into()))?;
            ShippingParams::from_array(values)
        }
    };
    let doc = build_shipping_demo(&params).map_err(|e| Failure::Domain(e.to_string()))?;
    let bytes = render_document(&doc);
    match out {
        Some(path) => {
            write_file(path, &bytes)?;
            if let (ReportFormat::Text, Some(base)) = (ctx.format, &doc.baseline) {
                ctx.emit(&render_report(base, ReportFormat::Text, ctx.mode))?;
            }
            Ok(())
        }
        None => ctx.emit(&bytes),
    }
}
