//! Human-readable and structured outcome reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::accounting::{self, ConservationMode, Outcome};
use crate::goods::{CompanyId, GoodVector, Money};
use crate::scenario::{render_document, ScenarioDocument, FORMAT_VERSION};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ReportFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportRow {
    pub company: CompanyId,
    /// `None` when the payoff is undefined (a sale outside the producible set).
    pub payoff: Option<Money>,
    pub g_in: GoodVector,
    pub g_out: GoodVector,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    /// Sorted by company id.
    pub rows: Vec<ReportRow>,
    pub tnv: Option<Money>,
    pub identity_gap: Option<Money>,
    pub violations: Vec<String>,
}

impl Report {
    pub fn build(outcome: &Outcome, mode: ConservationMode) -> Self {
        let mut violations: Vec<String> = accounting::check_conservation(outcome, mode)
            .iter()
            .map(ToString::to_string)
            .collect();
        let mut rows = Vec::new();
        for id in outcome.game.sorted_company_ids() {
            let (g_in, g_out) = accounting::node_flows(outcome, &id).expect("id comes from the game");
            let payoff = match accounting::payoff(outcome, &id) {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(e.to_string());
                    None
                }
            };
            rows.push(ReportRow {
                company: id,
                payoff,
                g_in,
                g_out,
            });
        }
        Self {
            rows,
            tnv: accounting::tnv(outcome).ok(),
            identity_gap: accounting::budget_identity_gap(outcome).ok(),
            violations,
        }
    }

    pub fn to_text(&self) -> String {
        fn show(m: &Option<Money>) -> String {
            m.as_ref().map_or_else(|| "undefined".to_owned(), ToString::to_string)
        }
        let header = ["company", "payoff", "in", "out"];
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| [r.company.to_string(), show(&r.payoff), r.g_in.to_string(), r.g_out.to_string()])
            .collect();
        let mut width = header.map(str::len);
        for row in &cells {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }

        let mut out = String::new();
        let line = |out: &mut String, row: [&str; 4]| {
            let text = format!(
                "{:<w0$}  {:>w1$}  {:<w2$}  {}",
                row[0],
                row[1],
                row[2],
                row[3],
                w0 = width[0],
                w1 = width[1],
                w2 = width[2],
            );
            out.push_str(text.trim_end());
            out.push('\n');
        };
        line(&mut out, header);
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
        }
        if !self.violations.is_empty() {
            out.push_str("violations:\n");
            for v in &self.violations {
                let _ = writeln!(out, "  {v}");
            }
        }
        let _ = writeln!(out, "TNV = {}, identity gap = {}", show(&self.tnv), show(&self.identity_gap));
        out
    }

    /// Report figures as document metadata entries.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let show = |v: &Option<Money>| v.as_ref().map_or_else(|| "undefined".to_owned(), ToString::to_string);
        m.insert("report.tnv".to_owned(), show(&self.tnv));
        m.insert("report.identity_gap".to_owned(), show(&self.identity_gap));
        m.insert("report.violations".to_owned(), self.violations.len().to_string());
        for r in &self.rows {
            m.insert(format!("report.payoff.{}", r.company), show(&r.payoff));
        }
        m
    }
}

/// Render an outcome. The structured form is a scenario document holding the
/// outcome as its baseline, with the report figures in its metadata, so it
/// loads back as a scenario.
pub fn render_report(outcome: &Outcome, format: ReportFormat, mode: ConservationMode) -> Vec<u8> {
    let report = Report::build(outcome, mode);
    match format {
        ReportFormat::Text => report.to_text().into_bytes(),
        ReportFormat::Structured => {
            let doc = ScenarioDocument {
                version: FORMAT_VERSION.to_owned(),
                game: outcome.game.clone(),
                baseline: Some(outcome.clone()),
                improved: None,
                metadata: report.metadata(),
            };
            render_document(&doc)
        }
    }
}
