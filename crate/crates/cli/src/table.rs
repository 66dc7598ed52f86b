//! Markdown results tables in the published layout: one row per
//! dataset/strategy pair, one column per schedule.

use ff_core::data::DatasetName;

use crate::config::StrategyArg;

/// What one grid cell renders as.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Accuracy(f64),
    /// Chance-level accuracy with collapsed goodness.
    NoLearning,
    Failed,
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Accuracy(a) => format!("{:.0}%", a * 100.0),
            Cell::NoLearning => "-".to_string(),
            Cell::Failed => "err".to_string(),
            Cell::Missing => String::new(),
        }
    }
}

pub fn dataset_heading(d: DatasetName) -> &'static str {
    match d {
        DatasetName::Mnist => "MNIST",
        DatasetName::FashionMnist => "Fashion-MNIST",
    }
}

pub fn strategy_heading(s: StrategyArg) -> &'static str {
    match s {
        StrategyArg::WrongLabel => "Wrong label",
        StrategyArg::Masks => "Masks",
    }
}

/// Renders the table; `cells[row][col]` follows the row and column
/// orders given.
pub fn render(
    rows: &[(DatasetName, StrategyArg)],
    columns: &[String],
    cells: &[Vec<Cell>],
) -> String {
    let mut out = String::new();
    out.push_str("| Dataset | Negative data |");
    for c in columns {
        out.push_str(&format!(" {c} |"));
    }
    out.push('\n');
    out.push_str("| --- | --- |");
    for _ in columns {
        out.push_str(" --- |");
    }
    out.push('\n');
    for (r, (dataset, strategy)) in rows.iter().enumerate() {
        out.push_str(&format!(
            "| {} | {} |",
            dataset_heading(*dataset),
            strategy_heading(*strategy)
        ));
        for c in 0..columns.len() {
            let cell = cells
                .get(r)
                .and_then(|row| row.get(c))
                .unwrap_or(&Cell::Missing);
            out.push_str(&format!(" {} |", cell.render()));
        }
        out.push('\n');
    }
    out
}
