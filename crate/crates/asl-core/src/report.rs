//! Aggregation of run logs across seeds: per-group mean/stddev summaries and
//! dependency-free SVG line charts.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::runlog::fmt_sig9;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no input tables")]
    NoInputs,
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("column mismatch: expected {expected:?}, got {got:?} in {path}")]
    SchemaMismatch { expected: Vec<String>, got: Vec<String>, path: String },
    #[error("column {column} holds non-numeric value {value:?}")]
    NotNumeric { column: String, value: String },
    #[error("table has no rows")]
    Empty,
}

/// A parsed CSV: header plus string cells, one Vec per row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path) -> Result<Table, ReportError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| ReportError::Io { path: display.clone(), msg: e.to_string() })?;
    parse_table(&text).map_err(|msg| ReportError::Parse { path: display, msg })
}

pub fn parse_table(text: &str) -> Result<Table, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_owned)
        .collect();
    if columns.is_empty() {
        return Err("empty header".into());
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != columns.len() {
            return Err(format!(
                "row has {} cells, header has {}",
                record.len(),
                columns.len()
            ));
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(Table { columns, rows })
}

/// Columns that identify a group rather than a measurement.
const KEY_COLUMNS: [&str; 5] = ["suite", "perturbation", "algorithm", "epoch", "iteration"];

struct Layout {
    key_idx: Vec<usize>,
    value_idx: Vec<usize>,
}

fn classify(columns: &[String]) -> Layout {
    let mut key_idx = Vec::new();
    let mut value_idx = Vec::new();
    for (i, name) in columns.iter().enumerate() {
        if KEY_COLUMNS.contains(&name.as_str()) {
            key_idx.push(i);
        } else if name != "seed" {
            value_idx.push(i);
        }
    }
    Layout { key_idx, value_idx }
}

fn sample_stddev(values: &[f64], mean: f64) -> f64 {
    if values.len() <= 1 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Merges tables with identical headers and reduces each key group
/// (suite/perturbation/algorithm/epoch/iteration columns, whichever exist)
/// to its replicate count plus per-column mean and sample stddev. The seed
/// column only marks replicates and is dropped. Groups keep first-appearance
/// order, so the output is deterministic in the input order.
pub fn summarize(tables: &[Table]) -> Result<Table, ReportError> {
    let first = tables.first().ok_or(ReportError::NoInputs)?;
    for t in &tables[1..] {
        if t.columns != first.columns {
            return Err(ReportError::SchemaMismatch {
                expected: first.columns.clone(),
                got: t.columns.clone(),
                path: "<input>".into(),
            });
        }
    }
    if tables.iter().all(|t| t.rows.is_empty()) {
        return Err(ReportError::Empty);
    }
    let layout = classify(&first.columns);

    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, Vec<Vec<f64>>> = HashMap::new();
    for table in tables {
        for row in &table.rows {
            let key: Vec<String> =
                layout.key_idx.iter().map(|&i| row[i].clone()).collect();
            let mut values = Vec::with_capacity(layout.value_idx.len());
            for &i in &layout.value_idx {
                let v: f64 = row[i].parse().map_err(|_| ReportError::NotNumeric {
                    column: first.columns[i].clone(),
                    value: row[i].clone(),
                })?;
                values.push(v);
            }
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(values);
        }
    }

    let mut columns: Vec<String> =
        layout.key_idx.iter().map(|&i| first.columns[i].clone()).collect();
    columns.push("n".into());
    for &i in &layout.value_idx {
        columns.push(format!("{}_mean", first.columns[i]));
        columns.push(format!("{}_stddev", first.columns[i]));
    }

    let mut rows = Vec::with_capacity(order.len());
    for key in &order {
        let samples = &groups[key];
        let n = samples.len();
        let mut row = key.clone();
        row.push(n.to_string());
        for (j, _) in layout.value_idx.iter().enumerate() {
            let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let mean = column.iter().sum::<f64>() / n as f64;
            row.push(fmt_sig9(mean));
            row.push(fmt_sig9(sample_stddev(&column, mean)));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

pub fn table_to_csv_string(table: &Table) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        writer.write_record(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flushed")).expect("utf-8")
}

const CHART_W: f64 = 640.0;
const CHART_H: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A palette that stays readable on white; cycles when a chart has more
/// series than entries.
const PALETTE: [&str; 6] =
    ["#1b6ca8", "#c23b22", "#2e8540", "#8e44ad", "#b8860b", "#37474f"];

/// Renders a summary table straight to SVG line charts, one per `_mean`
/// column, stacked vertically. The x axis is the epoch or iteration column
/// when the table has one, otherwise the within-series row index; the
/// remaining key columns label the series. Pure string assembly so builds
/// never pull in a plotting stack.
pub fn summary_to_svg(table: &Table) -> Result<String, ReportError> {
    if table.rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let x_col = table
        .columns
        .iter()
        .position(|c| c == "epoch" || c == "iteration");
    let mean_cols: Vec<usize> = table
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.ends_with("_mean"))
        .map(|(i, _)| i)
        .collect();
    if mean_cols.is_empty() {
        return Err(ReportError::NotNumeric {
            column: "<any>_mean".into(),
            value: "<missing>".into(),
        });
    }
    let label_cols: Vec<usize> = table
        .columns
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            KEY_COLUMNS.contains(&c.as_str()) && Some(*i) != x_col
        })
        .map(|(i, _)| i)
        .collect();

    let series_label = |row: &[String]| -> String {
        if label_cols.is_empty() {
            "all".to_string()
        } else {
            label_cols
                .iter()
                .map(|&i| row[i].as_str())
                .collect::<Vec<_>>()
                .join("/")
        }
    };

    let total_h = CHART_H * mean_cols.len() as f64;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {CHART_W} {total_h}\">"
    );
    let _ = write!(svg, "<rect width=\"{CHART_W}\" height=\"{total_h}\" fill=\"white\"/>");

    for (chart_i, &mc) in mean_cols.iter().enumerate() {
        let top = chart_i as f64 * CHART_H;
        let metric = &table.columns[mc];

        let mut series_order: Vec<String> = Vec::new();
        let mut series: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
        for row in &table.rows {
            let label = series_label(row);
            let y: f64 = row[mc].parse().map_err(|_| ReportError::NotNumeric {
                column: metric.clone(),
                value: row[mc].clone(),
            })?;
            let entry = series
                .entry(label.clone())
                .or_insert_with(|| {
                    series_order.push(label);
                    Vec::new()
                });
            let x = match x_col {
                Some(xi) => row[xi].parse().map_err(|_| ReportError::NotNumeric {
                    column: table.columns[xi].clone(),
                    value: row[xi].clone(),
                })?,
                None => entry.len() as f64,
            };
            entry.push((x, y));
        }

        let all: Vec<(f64, f64)> =
            series_order.iter().flat_map(|l| series[l].iter().copied()).collect();
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &all {
            x_min = x_min.min(*x);
            x_max = x_max.max(*x);
            y_min = y_min.min(*y);
            y_max = y_max.max(*y);
        }
        if x_max - x_min < 1e-12 {
            x_max = x_min + 1.0;
        }
        if y_max - y_min < 1e-12 {
            y_max = y_min + 1.0;
        }
        let px = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (CHART_W - 2.0 * MARGIN);
        let py = |y: f64| {
            top + CHART_H - MARGIN
                - (y - y_min) / (y_max - y_min) * (CHART_H - 2.0 * MARGIN)
        };

        let _ = write!(
            svg,
            "<g><text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
            MARGIN,
            top + 20.0,
            xml_escape(metric)
        );
        let _ = write!(
            svg,
            "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>\
             <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#333\"/>",
            m = MARGIN,
            r = CHART_W - MARGIN,
            t = top + MARGIN,
            b = top + CHART_H - MARGIN
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>",
            4.0,
            top + CHART_H - MARGIN,
            xml_escape(&fmt_sig9(y_min)),
            4.0,
            top + MARGIN,
            xml_escape(&fmt_sig9(y_max)),
        );

        for (si, label) in series_order.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let mut points = series[label].clone();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> =
                points.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
            if points.len() == 1 {
                let (x, y) = points[0];
                let _ = write!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                    px(x),
                    py(y)
                );
            } else {
                let _ = write!(
                    svg,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
                     points=\"{}\"/>",
                    path.join(" ")
                );
            }
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
                 fill=\"{color}\">{}</text>",
                CHART_W - MARGIN + 4.0,
                top + MARGIN + 14.0 * si as f64,
                xml_escape(label)
            );
        }
        svg.push_str("</g>");
    }
    svg.push_str("</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv_text: &str) -> Table {
        parse_table(csv_text).unwrap()
    }

    #[test]
    fn single_input_keeps_values_with_zero_stddev() {
        let t = table("suite,perturbation,seed,tsr\nchain,none,3,0.75\n");
        let s = summarize(&[t]).unwrap();
        assert_eq!(s.columns, vec!["suite", "perturbation", "n", "tsr_mean", "tsr_stddev"]);
        assert_eq!(
            s.rows,
            vec![vec![
                "chain".to_string(),
                "none".to_string(),
                "1".to_string(),
                fmt_sig9(0.75),
                fmt_sig9(0.0),
            ]]
        );
    }

    #[test]
    fn two_seeds_aggregate_to_known_mean_and_stddev() {
        let t = table(
            "suite,perturbation,seed,tsr\nchain,relabel,1,0.4\nchain,relabel,2,0.6\n",
        );
        let s = summarize(&[t]).unwrap();
        assert_eq!(s.rows.len(), 1);
        let mean: f64 = s.rows[0][3].parse().unwrap();
        let sd: f64 = s.rows[0][4].parse().unwrap();
        assert!((mean - 0.5).abs() < 1e-12);
        assert!((sd - 0.141_421_356_2).abs() < 1e-9);
        assert_eq!(s.rows[0][2], "2");
    }

    #[test]
    fn groups_follow_first_appearance_across_files() {
        let a = table("algorithm,seed,loss\nsft,1,2.0\nasl,1,4.0\n");
        let b = table("algorithm,seed,loss\nasl,2,6.0\nsft,2,0.0\n");
        let s = summarize(&[a, b]).unwrap();
        assert_eq!(s.rows[0][0], "sft");
        assert_eq!(s.rows[1][0], "asl");
        let sft_mean: f64 = s.rows[0][2].parse().unwrap();
        let asl_mean: f64 = s.rows[1][2].parse().unwrap();
        assert!((sft_mean - 1.0).abs() < 1e-12);
        assert!((asl_mean - 5.0).abs() < 1e-12);
    }

    #[test]
    fn epoch_column_is_a_group_key_not_a_measurement() {
        let a = table("epoch,seed,loss\n0,1,1.0\n1,1,0.5\n");
        let b = table("epoch,seed,loss\n0,2,3.0\n1,2,1.5\n");
        let s = summarize(&[a, b]).unwrap();
        assert_eq!(s.columns, vec!["epoch", "n", "loss_mean", "loss_stddev"]);
        assert_eq!(s.rows.len(), 2);
        let e0: f64 = s.rows[0][2].parse().unwrap();
        let e1: f64 = s.rows[1][2].parse().unwrap();
        assert!((e0 - 2.0).abs() < 1e-12);
        assert!((e1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schema_mismatch_and_bad_cells_are_rejected() {
        let a = table("suite,seed,tsr\nchain,1,0.5\n");
        let b = table("suite,seed,ssr\nchain,1,0.5\n");
        assert!(matches!(
            summarize(&[a.clone(), b]),
            Err(ReportError::SchemaMismatch { .. })
        ));
        let c = table("suite,seed,tsr\nchain,1,high\n");
        assert!(matches!(summarize(&[c]), Err(ReportError::NotNumeric { .. })));
        assert!(matches!(summarize(&[]), Err(ReportError::NoInputs)));
    }

    #[test]
    fn summary_round_trips_through_csv() {
        let t = table("suite,perturbation,seed,tsr\nchain,none,3,0.75\n");
        let s = summarize(&[t]).unwrap();
        let text = table_to_csv_string(&s);
        assert_eq!(parse_table(&text).unwrap(), s);
    }

    #[test]
    fn svg_covers_every_mean_column_and_series() {
        let t = table(
            "algorithm,iteration,seed,reward\n\
             digirl,0,1,0.1\ndigirl,1,1,0.4\ndigirl_see,0,1,0.2\ndigirl_see,1,1,0.6\n",
        );
        let s = summarize(&[t]).unwrap();
        let svg = summary_to_svg(&s).unwrap();
        assert!(svg.starts_with("<svg "));
        assert!(svg.ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("reward_mean"));
        assert!(svg.contains("digirl_see"));
    }

    #[test]
    fn svg_escapes_markup_in_labels() {
        let t = table("suite,seed,tsr\n<a&b>,1,0.5\n");
        let s = summarize(&[t]).unwrap();
        let svg = summary_to_svg(&s).unwrap();
        assert!(svg.contains("&lt;a&amp;b&gt;"));
        assert!(!svg.contains("<a&b>"));
    }
}
