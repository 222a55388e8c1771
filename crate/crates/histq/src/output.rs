//! Rendering of result sets as JSON, CSV or a plain-text table.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use histq_core::{ComplexMatrix, C64};

use crate::run::{format_number, history_text, pattern_text, round12, Cell, Payload, QueryResult, ResultSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Json,
    Csv,
}

fn num(x: f64) -> Value {
    json!(round12(x))
}

fn complex(z: C64) -> Value {
    json!([round12(z.re), round12(z.im)])
}

pub fn matrix_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| Value::Array((0..m.cols()).map(|j| complex(m[(i, j)])).collect()))
            .collect(),
    )
}

fn pattern_json(entries: &[(String, String)]) -> Value {
    Value::Object(entries.iter().map(|(t, l)| (t.clone(), json!(l))).collect())
}

fn payload_json(p: &Payload, obj: &mut Map<String, Value>) {
    match p {
        Payload::Consistency {
            verdict,
            histories,
            max_diagonal,
            max_off_diagonal,
            worst_pair,
            tolerance,
            gram,
        } => {
            obj.insert("verdict".into(), json!(verdict.as_str()));
            obj.insert("max_off_diagonal".into(), num(*max_off_diagonal));
            obj.insert("max_diagonal".into(), num(*max_diagonal));
            obj.insert("tolerance".into(), num(*tolerance));
            obj.insert(
                "worst_pair".into(),
                worst_pair.as_ref().map_or(Value::Null, |(a, b)| json!([a, b])),
            );
            obj.insert("histories".into(), json!(histories));
            obj.insert("gram".into(), matrix_json(gram));
        }
        Payload::Probabilities {
            times,
            rows,
            total,
            normative,
        } => {
            obj.insert("times".into(), json!(times));
            obj.insert(
                "rows".into(),
                rows.iter()
                    .map(|(h, p)| json!({ "history": h, "probability": num(*p) }))
                    .collect(),
            );
            obj.insert("total".into(), num(*total));
            obj.insert("normative".into(), json!(normative));
        }
        Payload::Conditional { rows } => {
            obj.insert(
                "rows".into(),
                rows.iter()
                    .map(|r| {
                        json!({
                            "target": pattern_json(&r.target),
                            "given": pattern_json(&r.given),
                            "probability": r.probability.map_or(Value::Null, num),
                        })
                    })
                    .collect(),
            );
        }
        Payload::Povm {
            elements,
            completeness_defect,
        } => {
            obj.insert(
                "elements".into(),
                elements
                    .iter()
                    .map(|(k, q)| json!({ "outcome": k, "matrix": matrix_json(q) }))
                    .collect(),
            );
            obj.insert("completeness_defect".into(), num(*completeness_defect));
        }
        Payload::Inference { outcomes } => {
            obj.insert(
                "outcomes".into(),
                outcomes
                    .iter()
                    .map(|r| {
                        let prior = r.prior_distribution.as_ref().map_or(Value::Null, |d| {
                            d.iter()
                                .map(|(l, p)| json!({ "property": l, "probability": num(*p) }))
                                .collect()
                        });
                        json!({
                            "outcome": r.outcome,
                            "probability": num(r.outcome_probability),
                            "certain": r.certain,
                            "eigenvalues": r.eigenvalues.iter().map(|v| num(*v)).collect::<Vec<_>>(),
                            "prior": prior,
                            "q": matrix_json(&r.q),
                        })
                    })
                    .collect(),
            );
        }
        Payload::Noncontextuality { probes, report } => {
            obj.insert("passed".into(), json!(report.passed));
            obj.insert("max_difference".into(), num(report.max_difference()));
            obj.insert("threshold".into(), num(report.threshold));
            obj.insert("values".into(), report.values.iter().map(|v| num(*v)).collect());
            obj.insert(
                "probes".into(),
                probes
                    .iter()
                    .zip(&report.probes)
                    .map(|(name, p)| {
                        let v = |xs: &[f64]| xs.iter().map(|x| num(*x)).collect::<Vec<_>>();
                        json!({
                            "probe": name,
                            "first": v(&p.first),
                            "second": v(&p.second),
                            "born": v(&p.born),
                            "max_difference": num(p.max_difference),
                        })
                    })
                    .collect(),
            );
        }
    }
}

pub fn result_json(r: &QueryResult) -> Value {
    let mut obj = Map::new();
    obj.insert("query_id".into(), json!(r.id));
    obj.insert("kind".into(), json!(r.kind));
    obj.insert("line".into(), json!(r.line));
    match &r.outcome {
        Ok(p) => {
            obj.insert("status".into(), json!("ok"));
            payload_json(p, &mut obj);
        }
        Err(e) => {
            obj.insert("status".into(), json!("error"));
            obj.insert("error".into(), json!(e));
        }
    }
    Value::Object(obj)
}

pub fn to_json_value(rs: &ResultSet) -> Value {
    json!({
        "scenario": rs.origin,
        "results": rs.results.iter().map(result_json).collect::<Vec<_>>(),
    })
}

pub fn to_json(rs: &ResultSet) -> String {
    let mut s = serde_json::to_string_pretty(&to_json_value(rs)).expect("values are serializable");
    s.push('\n');
    s
}

/// Long format: one row per scalar fact.
pub fn to_csv(rs: &ResultSet) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row = |w: &mut csv::Writer<Vec<u8>>, fields: [&str; 6]| w.write_record(fields).expect("writing to memory");
    row(&mut w, ["query_id", "kind", "field", "label", "value", "imag"]);
    for r in &rs.results {
        match &r.outcome {
            Ok(p) => {
                for rec in p.records() {
                    let (value, imag) = match &rec.value {
                        Cell::Num(x) => (format_number(*x), String::new()),
                        Cell::Complex(z) => (format_number(z.re), format_number(z.im)),
                        Cell::Bool(b) => (b.to_string(), String::new()),
                        Cell::Text(t) => (t.clone(), String::new()),
                        Cell::Undefined => ("undefined".into(), String::new()),
                    };
                    row(&mut w, [&r.id, r.kind, rec.field, &rec.label, &value, &imag]);
                }
            }
            Err(e) => row(&mut w, [&r.id, r.kind, "error", "", e, ""]),
        }
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is UTF-8")
}

#[derive(Debug, Clone, Copy)]
pub struct Style {
    pub color: bool,
    pub timing: bool,
}

impl Style {
    fn paint(&self, code: &str, s: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }

    pub fn bold(&self, s: &str) -> String {
        self.paint("1", s)
    }

    pub fn good(&self, s: &str) -> String {
        self.paint("32", s)
    }

    pub fn bad(&self, s: &str) -> String {
        self.paint("31", s)
    }
}

pub fn complex_text(z: C64) -> String {
    let (re, im) = (round12(z.re), round12(z.im));
    match (re == 0.0, im == 0.0) {
        (_, true) => format_number(re),
        (true, false) => format!("{}i", format_number(im)),
        (false, false) => {
            let sign = if im < 0.0 { '-' } else { '+' };
            format!("{}{sign}{}i", format_number(re), format_number(im.abs()))
        }
    }
}

fn matrix_text(out: &mut String, m: &ComplexMatrix, indent: &str) {
    let cells: Vec<Vec<String>> = (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| complex_text(m[(i, j)])).collect())
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "{indent}[ {} ]", line.join("  "));
    }
}

fn aligned(out: &mut String, rows: &[(String, String)]) {
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    for (k, v) in rows {
        let pad = width - k.chars().count();
        let _ = writeln!(out, "  {k}{}  {v}", " ".repeat(pad));
    }
}

fn payload_text(out: &mut String, p: &Payload, style: &Style) {
    match p {
        Payload::Consistency {
            verdict,
            histories,
            max_diagonal,
            max_off_diagonal,
            worst_pair,
            tolerance,
            ..
        } => {
            let v = if verdict.is_consistent() {
                style.good(verdict.as_str())
            } else {
                style.bad(verdict.as_str())
            };
            let mut rows = vec![
                ("verdict".to_string(), v),
                ("histories".into(), histories.len().to_string()),
                ("max off-diagonal".into(), format_number(*max_off_diagonal)),
                ("max diagonal".into(), format_number(*max_diagonal)),
                ("tolerance".into(), format_number(*tolerance)),
            ];
            if let Some((a, b)) = worst_pair {
                rows.push(("worst pair".into(), format!("{a}  /  {b}")));
            }
            aligned(out, &rows);
        }
        Payload::Probabilities {
            times,
            rows,
            total,
            normative,
        } => {
            let mut lines: Vec<(String, String)> = rows
                .iter()
                .map(|(h, p)| (history_text(times, h), format_number(*p)))
                .collect();
            lines.push(("total".into(), format_number(*total)));
            aligned(out, &lines);
            if !normative {
                let _ = writeln!(
                    out,
                    "  {}",
                    style.bad("family is inconsistent: these numbers are not probabilities")
                );
            }
        }
        Payload::Conditional { rows } => {
            let lines: Vec<(String, String)> = rows
                .iter()
                .map(|r| {
                    (
                        format!("Pr({} | {})", pattern_text(&r.target), pattern_text(&r.given)),
                        r.probability.map_or("undefined".into(), format_number),
                    )
                })
                .collect();
            aligned(out, &lines);
        }
        Payload::Povm {
            elements,
            completeness_defect,
        } => {
            for (k, q) in elements {
                let _ = writeln!(out, "  Q[{k}]");
                matrix_text(out, q, "    ");
            }
            let _ = writeln!(out, "  completeness defect  {}", format_number(*completeness_defect));
        }
        Payload::Inference { outcomes } => {
            for r in outcomes {
                let _ = writeln!(
                    out,
                    "  outcome {}  Pr = {}{}",
                    r.outcome,
                    format_number(r.outcome_probability),
                    if r.certain { "  (certain)" } else { "" }
                );
                let lines: Vec<(String, String)> = r
                    .inference_pdi
                    .labels()
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let prior = r
                            .prior_distribution
                            .as_ref()
                            .map_or("undefined".into(), |d| format_number(d[i].1));
                        (
                            format!("  {l} (eigenvalue {})", format_number(r.eigenvalues[i])),
                            format!("Pr(prior | outcome) = {prior}"),
                        )
                    })
                    .collect();
                aligned(out, &lines);
            }
        }
        Payload::Noncontextuality { probes, report } => {
            let verdict = if report.passed {
                style.good("PASS")
            } else {
                style.bad("FAIL")
            };
            let values: Vec<String> = report.values.iter().map(|v| format_number(*v)).collect();
            let mut lines = vec![
                ("verdict".to_string(), verdict),
                ("eigenvalues".into(), values.join(", ")),
                ("max difference".into(), format_number(report.max_difference())),
            ];
            for (name, p) in probes.iter().zip(&report.probes) {
                let f: Vec<String> = p.first.iter().map(|x| format_number(*x)).collect();
                let s: Vec<String> = p.second.iter().map(|x| format_number(*x)).collect();
                lines.push((
                    format!("probe {name}"),
                    format!("({}) vs ({})", f.join(", "), s.join(", ")),
                ));
            }
            aligned(out, &lines);
        }
    }
}

pub fn to_table(rs: &ResultSet, style: &Style) -> String {
    let mut out = String::new();
    if rs.results.is_empty() {
        let _ = writeln!(out, "{}: no queries", rs.origin);
    }
    for r in &rs.results {
        let mut head = format!("{} {} (line {})", r.id, r.kind, r.line);
        if style.timing {
            let _ = write!(head, "  {:.3} ms", r.elapsed.as_secs_f64() * 1e3);
        }
        let _ = writeln!(out, "{}", style.bold(&head));
        match &r.outcome {
            Ok(p) => payload_text(&mut out, p, style),
            Err(e) => {
                let _ = writeln!(out, "  {} {e}", style.bad("error:"));
            }
        }
    }
    out
}

pub fn render(rs: &ResultSet, format: Format, style: &Style) -> String {
    match format {
        Format::Table => to_table(rs, style),
        Format::Json => to_json(rs),
        Format::Csv => to_csv(rs),
    }
}
