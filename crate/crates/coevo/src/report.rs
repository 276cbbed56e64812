//! Result tables: a small rectangular model with per-column decimal
//! formatting, rendered to CSV (canonical) or markdown (presentation).
//! Layout convention for benchmark summaries: problem sizes as rows,
//! method combinations as columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled row of numeric cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub values: Vec<f64>,
}

/// A rectangular numeric table. `headers` and `decimals` cover the value
/// columns; `label_header` names the leading label column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub caption: String,
    pub label_header: String,
    pub headers: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Decimal places per value column.
    pub decimals: Vec<u8>,
}

/// Output syntax for [`render_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl ReportTable {
    pub fn new(
        caption: impl Into<String>,
        label_header: impl Into<String>,
        headers: Vec<String>,
        decimals: Vec<u8>,
    ) -> Self {
        ReportTable {
            caption: caption.into(),
            label_header: label_header.into(),
            headers,
            rows: Vec::new(),
            decimals,
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, values: Vec<f64>) {
        self.rows.push(ReportRow {
            label: label.into(),
            values,
        });
    }

    pub fn validate(&self) -> Result<()> {
        if self.decimals.len() != self.headers.len() {
            return Err(Error::Table(format!(
                "{} headers but {} decimal specs",
                self.headers.len(),
                self.decimals.len()
            )));
        }
        for row in &self.rows {
            if row.values.len() != self.headers.len() {
                return Err(Error::Table(format!(
                    "row {:?} has {} cells, table has {} columns",
                    row.label,
                    row.values.len(),
                    self.headers.len()
                )));
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Table(format!("row {:?} has a non-finite cell", row.label)));
            }
        }
        Ok(())
    }

    fn cell(&self, column: usize, value: f64) -> String {
        format!("{value:.prec$}", prec = self.decimals[column] as usize)
    }
}

/// Render a validated table. Deterministic text; CSV carries the caption
/// as a leading `#` comment so tables round-trip through [`parse_table`].
pub fn render_table(table: &ReportTable, format: TableFormat) -> Result<String> {
    table.validate()?;
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            if !table.caption.is_empty() {
                out.push_str(&format!("# {}\n", table.caption));
            }
            out.push_str(&table.label_header);
            for h in &table.headers {
                out.push(',');
                out.push_str(h);
            }
            out.push('\n');
            for row in &table.rows {
                out.push_str(&row.label);
                for (i, &v) in row.values.iter().enumerate() {
                    out.push(',');
                    out.push_str(&table.cell(i, v));
                }
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            if !table.caption.is_empty() {
                out.push_str(&format!("**{}**\n\n", table.caption));
            }
            out.push_str(&format!("| {} |", table.label_header));
            for h in &table.headers {
                out.push_str(&format!(" {h} |"));
            }
            out.push('\n');
            out.push_str("| ---");
            for _ in &table.headers {
                out.push_str(" | ---");
            }
            out.push_str(" |\n");
            for row in &table.rows {
                out.push_str(&format!("| {} |", row.label));
                for (i, &v) in row.values.iter().enumerate() {
                    out.push_str(&format!(" {} |", table.cell(i, v)));
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Parse the CSV form back into a table. Per-column decimals are inferred
/// from the first data row (0 when a cell has no fractional part), so
/// parse -> render reproduces the rendered text exactly.
pub fn parse_table(text: &str) -> Result<ReportTable> {
    let mut caption = String::new();
    let mut lines = text.lines().enumerate().peekable();
    if let Some((_, first)) = lines.peek() {
        if let Some(rest) = first.strip_prefix('#') {
            caption = rest.trim().to_string();
            lines.next();
        }
    }
    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| table_parse_err(1, "empty table text"))?;
    let mut header_cells = header.split(',');
    let label_header = header_cells
        .next()
        .unwrap_or_default()
        .trim()
        .to_string();
    let headers: Vec<String> = header_cells.map(|h| h.trim().to_string()).collect();
    if headers.is_empty() {
        return Err(table_parse_err(header_idx + 1, "header row needs at least one value column"));
    }

    let mut rows = Vec::new();
    let mut decimals: Option<Vec<u8>> = None;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let label = cells.next().unwrap_or_default().trim().to_string();
        let raw: Vec<&str> = cells.map(str::trim).collect();
        if raw.len() != headers.len() {
            return Err(table_parse_err(
                idx + 1,
                format!("row has {} cells, header has {}", raw.len(), headers.len()),
            ));
        }
        let values = raw
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| table_parse_err(idx + 1, format!("bad number {c:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if decimals.is_none() {
            decimals = Some(
                raw.iter()
                    .map(|c| c.split_once('.').map_or(0, |(_, frac)| frac.len() as u8))
                    .collect(),
            );
        }
        rows.push(ReportRow { label, values });
    }
    let table = ReportTable {
        caption,
        label_header,
        headers: headers.clone(),
        rows,
        decimals: decimals.unwrap_or_else(|| vec![3; headers.len()]),
    };
    table.validate()?;
    Ok(table)
}

fn table_parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        file: "<table>".to_string(),
        line,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective_table() -> ReportTable {
        let mut table = ReportTable::new(
            "Orienteering objective values under different heuristic-instance combinations",
            "n",
            vec!["evolved pair".to_string(), "baseline pair".to_string()],
            vec![3, 3],
        );
        table.push_row("400", vec![17.773, 18.662]);
        table.push_row("1000", vec![20.061, 21.205]);
        table
    }

    #[test]
    fn three_decimal_cells_match_the_expected_strings() {
        let csv = render_table(&objective_table(), TableFormat::Csv).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[1], "n,evolved pair,baseline pair");
        assert_eq!(rows[2], "400,17.773,18.662");
        assert_eq!(rows[3], "1000,20.061,21.205");

        let mut gaps = ReportTable::new(
            "Relative gap comparison",
            "n",
            vec!["evolved".to_string(), "mid".to_string(), "baseline".to_string()],
            vec![3, 3, 3],
        );
        gaps.push_row("20", vec![0.080, 0.525, 0.729]);
        let csv = render_table(&gaps, TableFormat::Csv).unwrap();
        assert!(csv.lines().any(|l| l == "20,0.080,0.525,0.729"));
    }

    #[test]
    fn markdown_puts_sizes_on_rows_and_methods_on_columns() {
        let md = render_table(&objective_table(), TableFormat::Markdown).unwrap();
        let expected = "**Orienteering objective values under different heuristic-instance combinations**\n\n| n | evolved pair | baseline pair |\n| --- | --- | --- |\n| 400 | 17.773 | 18.662 |\n| 1000 | 20.061 | 21.205 |\n";
        assert_eq!(md, expected);
    }

    #[test]
    fn ragged_rows_are_a_shape_error() {
        let mut table = objective_table();
        table.rows[1].values.pop();
        assert!(matches!(
            render_table(&table, TableFormat::Csv),
            Err(Error::Table(_))
        ));
        let mut table = objective_table();
        table.decimals.pop();
        assert!(matches!(
            render_table(&table, TableFormat::Markdown),
            Err(Error::Table(_))
        ));
    }

    #[test]
    fn empty_rows_render_header_only() {
        let mut table = objective_table();
        table.rows.clear();
        let csv = render_table(&table, TableFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        let md = render_table(&table, TableFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 4);
    }

    #[test]
    fn csv_round_trips_through_parse() {
        let rendered = render_table(&objective_table(), TableFormat::Csv).unwrap();
        let parsed = parse_table(&rendered).unwrap();
        assert_eq!(parsed.caption, objective_table().caption);
        assert_eq!(parsed.decimals, vec![3, 3]);
        let rerendered = render_table(&parsed, TableFormat::Csv).unwrap();
        assert_eq!(rerendered, rendered);
    }

    #[test]
    fn varied_decimals_round_trip_too() {
        let mut table = ReportTable::new("c", "size", vec!["a".into(), "b".into()], vec![0, 2]);
        table.push_row("10", vec![3.0, 0.125]);
        let rendered = render_table(&table, TableFormat::Csv).unwrap();
        assert!(rendered.contains("10,3,0.12"));
        let rerendered = render_table(&parse_table(&rendered).unwrap(), TableFormat::Csv).unwrap();
        assert_eq!(rerendered, rendered);
    }

    #[test]
    fn parse_rejects_ragged_and_non_numeric_input() {
        assert!(matches!(
            parse_table("n,a\n1,2,3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_table("n,a\n1,many\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_table("").is_err());
    }
}
