//! Query execution.

use std::time::{Duration, Instant};

use histq_core::histories::{
    assign_probabilities, assign_probabilities_unchecked, check_consistency, conditional_probability, marginalize,
    EventPattern, HistoryError, HistoryFamily, ProbabilityTable, Verdict,
};
use histq_core::measurement::{
    derive_povm, inference_family, noncontextuality_check, InferenceResult, NoncontextualityReport,
};
use histq_core::{ComplexMatrix, Tolerances, C64};

use crate::dsl::{QueryKind, Scenario};

#[derive(Debug, Clone)]
pub struct ConditionalRow {
    pub target: Vec<(String, String)>,
    pub given: Vec<(String, String)>,
    /// `None` when the conditioning event has zero probability.
    pub probability: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Consistency {
        verdict: Verdict,
        histories: Vec<String>,
        max_diagonal: f64,
        max_off_diagonal: f64,
        worst_pair: Option<(String, String)>,
        tolerance: f64,
        gram: ComplexMatrix,
    },
    Probabilities {
        times: Vec<String>,
        rows: Vec<(Vec<String>, f64)>,
        total: f64,
        normative: bool,
    },
    Conditional {
        rows: Vec<ConditionalRow>,
    },
    Povm {
        elements: Vec<(String, ComplexMatrix)>,
        completeness_defect: f64,
    },
    Inference {
        outcomes: Vec<InferenceResult>,
    },
    Noncontextuality {
        probes: Vec<String>,
        report: NoncontextualityReport,
    },
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub id: String,
    pub kind: &'static str,
    pub line: usize,
    pub outcome: Result<Payload, String>,
    /// Wall-clock time; never part of machine-readable output.
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct ResultSet {
    pub origin: String,
    pub results: Vec<QueryResult>,
}

impl ResultSet {
    pub fn has_errors(&self) -> bool {
        self.results.iter().any(|r| r.outcome.is_err())
    }

    pub fn get(&self, id: &str) -> Option<&QueryResult> {
        self.results.iter().find(|r| r.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}

/// One scalar fact extracted from a payload. Used for CSV output and for
/// checking expected values.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Complex(C64),
    Bool(bool),
    Text(String),
    Undefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub field: &'static str,
    pub label: String,
    pub value: Cell,
}

fn rec(field: &'static str, label: impl Into<String>, value: Cell) -> Record {
    Record {
        field,
        label: label.into(),
        value,
    }
}

pub fn pattern_text(entries: &[(String, String)]) -> String {
    entries
        .iter()
        .map(|(t, l)| format!("{t}={l}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn history_text(times: &[String], labels: &[String]) -> String {
    times
        .iter()
        .zip(labels)
        .map(|(t, l)| format!("{t}={l}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Rounds to 12 significant digits and flushes values below 1e-14 to zero.
pub fn round12(x: f64) -> f64 {
    if x.abs() < 1e-14 {
        return 0.0;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn format_number(x: f64) -> String {
    format!("{}", round12(x))
}

fn matrix_records(out: &mut Vec<Record>, field: &'static str, name: &str, m: &ComplexMatrix) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.push(rec(
                field,
                format!("{name}[{},{}]", i + 1, j + 1),
                Cell::Complex(m[(i, j)]),
            ));
        }
    }
}

impl Payload {
    pub fn records(&self) -> Vec<Record> {
        let mut out = Vec::new();
        match self {
            Payload::Consistency {
                verdict,
                max_diagonal,
                max_off_diagonal,
                worst_pair,
                tolerance,
                ..
            } => {
                out.push(rec("verdict", "", Cell::Text(verdict.as_str().into())));
                out.push(rec("max_off_diagonal", "", Cell::Num(*max_off_diagonal)));
                out.push(rec("max_diagonal", "", Cell::Num(*max_diagonal)));
                out.push(rec("tolerance", "", Cell::Num(*tolerance)));
                if let Some((a, b)) = worst_pair {
                    out.push(rec("worst_pair", "", Cell::Text(format!("{a} | {b}"))));
                }
            }
            Payload::Probabilities {
                times,
                rows,
                total,
                normative,
            } => {
                for (labels, p) in rows {
                    out.push(rec("probability", history_text(times, labels), Cell::Num(*p)));
                }
                out.push(rec("total", "", Cell::Num(*total)));
                out.push(rec("normative", "", Cell::Bool(*normative)));
            }
            Payload::Conditional { rows } => {
                for r in rows {
                    let label = format!("{} | {}", pattern_text(&r.target), pattern_text(&r.given));
                    out.push(rec(
                        "conditional",
                        label,
                        r.probability.map_or(Cell::Undefined, Cell::Num),
                    ));
                }
            }
            Payload::Povm {
                elements,
                completeness_defect,
            } => {
                for (k, q) in elements {
                    matrix_records(&mut out, "povm", k, q);
                }
                out.push(rec("completeness_defect", "", Cell::Num(*completeness_defect)));
            }
            Payload::Inference { outcomes } => {
                for r in outcomes {
                    out.push(rec(
                        "outcome_probability",
                        r.outcome.clone(),
                        Cell::Num(r.outcome_probability),
                    ));
                    out.push(rec("certain", r.outcome.clone(), Cell::Bool(r.certain)));
                    for (l, v) in r.inference_pdi.labels().iter().zip(&r.eigenvalues) {
                        out.push(rec("eigenvalue", l.clone(), Cell::Num(*v)));
                    }
                    for (i, l) in r.inference_pdi.labels().iter().enumerate() {
                        let p = r
                            .prior_distribution
                            .as_ref()
                            .map_or(Cell::Undefined, |d| Cell::Num(d[i].1));
                        out.push(rec("prior", format!("{l} | {}", r.outcome), p));
                    }
                    matrix_records(&mut out, "q", &r.outcome, &r.q);
                }
            }
            Payload::Noncontextuality { probes, report } => {
                out.push(rec("passed", "", Cell::Bool(report.passed)));
                out.push(rec("max_difference", "", Cell::Num(report.max_difference())));
                for (name, p) in probes.iter().zip(&report.probes) {
                    for (g, v) in report.values.iter().enumerate() {
                        let label = format!("{name} {}", format_number(*v));
                        out.push(rec("first", label.clone(), Cell::Num(p.first[g])));
                        out.push(rec("second", label.clone(), Cell::Num(p.second[g])));
                        out.push(rec("born", label, Cell::Num(p.born[g])));
                    }
                }
            }
        }
        out
    }
}

fn table_for(fam: &HistoryFamily, tol: &Tolerances) -> Result<ProbabilityTable, String> {
    assign_probabilities(fam, tol).map_err(|e| match e {
        HistoryError::Inconsistent(r) => format!(
            "family is inconsistent (max off-diagonal {:e}); probabilities are undefined",
            r.max_off_diagonal
        ),
        other => other.to_string(),
    })
}

fn expand(
    table: &ProbabilityTable,
    entries: &[(String, Option<String>)],
) -> Result<Vec<Vec<(String, String)>>, String> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (time, label) in entries {
        let labels = match label {
            Some(l) => vec![l.clone()],
            None => table
                .labels_at(time)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|l| l.to_string())
                .collect(),
        };
        combos = combos
            .into_iter()
            .flat_map(|c| {
                labels.iter().map(move |l| {
                    let mut c = c.clone();
                    c.push((time.clone(), l.clone()));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

fn to_pattern(entries: &[(String, String)]) -> EventPattern {
    entries
        .iter()
        .fold(EventPattern::any(), |p, (t, l)| p.at(t.clone(), l.as_str()))
}

fn execute(s: &Scenario, kind: &QueryKind, tol: &Tolerances) -> Result<Payload, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    Ok(match kind {
        QueryKind::Consistency { family } => {
            let fam = &s.families[family];
            let r = check_consistency(fam, tol.consistency).map_err(|e| err(&e))?;
            let names: Vec<String> = r.labels.iter().map(|l| l.to_string()).collect();
            Payload::Consistency {
                verdict: r.verdict,
                worst_pair: r.worst_pair.map(|(a, b)| (names[a].clone(), names[b].clone())),
                histories: names,
                max_diagonal: r.max_diagonal,
                max_off_diagonal: r.max_off_diagonal,
                tolerance: r.tolerance,
                gram: r.gram,
            }
        }
        QueryKind::Probabilities {
            family,
            keep,
            unchecked,
        } => {
            let fam = &s.families[family];
            let mut table = if *unchecked {
                assign_probabilities_unchecked(fam, tol).map_err(|e| err(&e))?
            } else {
                table_for(fam, tol)?
            };
            if !keep.is_empty() {
                let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
                table = marginalize(&table, &keep).map_err(|e| err(&e))?;
            }
            Payload::Probabilities {
                total: table.total(),
                normative: table.normative,
                rows: table
                    .entries
                    .iter()
                    .map(|(l, p)| (l.0.iter().map(|e| e.to_string()).collect(), *p))
                    .collect(),
                times: table.times,
            }
        }
        QueryKind::Conditional { family, given, target } => {
            let fam = &s.families[family];
            let table = table_for(fam, tol)?;
            let target: Vec<(String, Option<String>)> = if target.is_empty() {
                fam.slot_times()
                    .iter()
                    .filter(|t| !given.iter().any(|(g, _)| g == *t))
                    .map(|t| (t.clone(), None))
                    .collect()
            } else {
                target.clone()
            };
            let mut rows = Vec::new();
            for g in expand(&table, given)? {
                let gp = to_pattern(&g);
                for t in expand(&table, &target)? {
                    let probability = match conditional_probability(&table, &gp, &to_pattern(&t), tol.numeric) {
                        Ok(p) => Some(p),
                        Err(HistoryError::ZeroConditioningEvent(_)) => None,
                        Err(e) => return Err(e.to_string()),
                    };
                    rows.push(ConditionalRow {
                        target: t,
                        given: g.clone(),
                        probability,
                    });
                }
            }
            Payload::Conditional { rows }
        }
        QueryKind::Povm { model } => {
            let m = &s.models[model];
            let povm = derive_povm(m, tol).map_err(|e| err(&e))?;
            let elements: Vec<(String, ComplexMatrix)> = povm.iter().map(|(l, q)| (l.to_string(), q.clone())).collect();
            let sum = ComplexMatrix::sum(elements.iter().map(|(_, q)| q))
                .expect("a POVM has elements")
                .map_err(|e| err(&e))?;
            Payload::Povm {
                completeness_defect: sum.identity_defect().map_err(|e| err(&e))?,
                elements,
            }
        }
        QueryKind::Inference { model, initial } => {
            let inf = inference_family(&s.models[model], initial, tol).map_err(|e| err(&e))?;
            Payload::Inference { outcomes: inf.results }
        }
        QueryKind::Noncontextuality {
            first,
            second,
            observable,
            probes,
            groups,
        } => {
            let kets: Vec<_> = probes.iter().map(|(_, k)| k.clone()).collect();
            let report = noncontextuality_check(&s.models[first], &s.models[second], observable, &kets, groups, tol)
                .map_err(|e| err(&e))?;
            Payload::Noncontextuality {
                probes: probes.iter().map(|(n, _)| n.clone()).collect(),
                report,
            }
        }
    })
}

/// Runs every query in order. A failing query is recorded and the rest
/// still run.
pub fn run_scenario(s: &Scenario, tol: &Tolerances) -> ResultSet {
    let results = s
        .queries
        .iter()
        .map(|q| {
            let start = Instant::now();
            let outcome = execute(s, &q.kind, tol);
            QueryResult {
                id: q.id.clone(),
                kind: q.kind.name(),
                line: q.span.line,
                outcome,
                elapsed: start.elapsed(),
            }
        })
        .collect();
    ResultSet {
        origin: s.origin.clone(),
        results,
    }
}
