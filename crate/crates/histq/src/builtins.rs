//! Built-in scenarios and the values they are expected to reproduce.

use histq_core::Tolerances;

use crate::dsl::{parse_scenario, DslError};
use crate::run::{run_scenario, Cell, ResultSet};

/// Absolute tolerance for every embedded expectation.
pub const EXPECTATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Num(f64),
    Complex(f64, f64),
    /// Strictly greater than the given value.
    Above(f64),
    Bool(bool),
    Text(&'static str),
    Undefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub query: &'static str,
    pub field: &'static str,
    pub label: String,
    pub value: Expected,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub name: &'static str,
    pub summary: &'static str,
    pub file: &'static str,
    pub source: &'static str,
    pub expectations: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown example `{name}`; valid names: {}", NAMES.join(", "))]
pub struct UnknownExample {
    pub name: String,
}

pub const NAMES: [&str; 9] = [
    "spin-z",
    "spin-x-prep",
    "mz-open",
    "mz-closed",
    "trine",
    "weak",
    "contextuality",
    "epr-z",
    "epr-x",
];

fn e(query: &'static str, field: &'static str, label: &str, value: Expected) -> Expectation {
    Expectation {
        query,
        field,
        label: label.to_string(),
        value,
    }
}

use Expected::*;

fn consistent(query: &'static str) -> Expectation {
    e(query, "verdict", "", Text("consistent"))
}

fn spin_z() -> Vec<Expectation> {
    let (a2, b2) = (0.36, 0.64);
    vec![
        consistent("consistent"),
        e("joint", "probability", "t1=z+, t2=M+", Num(a2)),
        e("joint", "probability", "t1=z+, t2=M-", Num(0.0)),
        e("joint", "probability", "t1=z-, t2=M+", Num(0.0)),
        e("joint", "probability", "t1=z-, t2=M-", Num(b2)),
        e("outcomes", "probability", "t2=M+", Num(a2)),
        e("outcomes", "probability", "t2=M-", Num(b2)),
        e("inferred", "conditional", "t1=z+ | t2=M+", Num(1.0)),
        e("inferred", "conditional", "t1=z- | t2=M+", Num(0.0)),
        e("inferred", "conditional", "t1=z+ | t2=M-", Num(0.0)),
        e("inferred", "conditional", "t1=z- | t2=M-", Num(1.0)),
        e("reveals", "outcome_probability", "M+", Num(a2)),
        e("reveals", "certain", "M+", Bool(true)),
        e("reveals", "prior", "xi_1_M+ | M+", Num(1.0)),
    ]
}

fn spin_x_prep() -> Vec<Expectation> {
    vec![
        consistent("consistent"),
        e("joint", "probability", "t1=x+, t2=M+", Num(0.5)),
        e("joint", "probability", "t1=x+, t2=M-", Num(0.5)),
        e("joint", "probability", "t1=x-, t2=M+", Num(0.0)),
        e("joint", "probability", "t1=x-, t2=M-", Num(0.0)),
        e("inferred", "conditional", "t1=x+ | t2=M+", Num(1.0)),
        e("inferred", "conditional", "t1=x+ | t2=M-", Num(1.0)),
        e("inferred", "conditional", "t1=x- | t2=M+", Num(0.0)),
        e("inferred", "conditional", "t1=x- | t2=M-", Num(0.0)),
        consistent("ordered"),
        e("prepared", "probability", "t1=x+", Num(1.0)),
        e("later", "conditional", "t2=z+ | t3=M+", Num(1.0)),
        e("later", "conditional", "t2=z- | t3=M-", Num(1.0)),
        e("swapped", "verdict", "", Text("inconsistent")),
        e("swapped", "max_off_diagonal", "", Above(0.1)),
        e("swapped", "max_off_diagonal", "", Num(0.125)),
    ]
}

fn mz_open() -> Vec<Expectation> {
    vec![
        consistent("consistent"),
        e("detectors", "probability", "t2=D+", Num(0.5)),
        e("detectors", "probability", "t2=D-", Num(0.5)),
        e("which_arm", "conditional", "t1=z+ | t2=D+", Num(1.0)),
        e("which_arm", "conditional", "t1=z- | t2=D-", Num(1.0)),
        consistent("late"),
        e("late_arm", "conditional", "t2=z+ | t3=D+", Num(1.0)),
        e("late_arm", "conditional", "t2=z- | t3=D-", Num(1.0)),
    ]
}

fn mz_closed() -> Vec<Expectation> {
    vec![
        consistent("consistent"),
        e("which_phase", "conditional", "t1=x+ | t2=D+", Num(1.0)),
        e("which_phase", "conditional", "t1=x- | t2=D+", Num(0.0)),
        e("which_phase", "conditional", "t1=x- | t2=D-", Undefined),
        e("arms", "verdict", "", Text("inconsistent")),
        e("arms", "max_off_diagonal", "", Num(0.25)),
        e("backwards", "povm", "D+[1,1]", Complex(0.5, 0.0)),
        e("backwards", "povm", "D+[1,2]", Complex(0.5, 0.0)),
        e("backwards", "povm", "D-[1,2]", Complex(-0.5, 0.0)),
        e("backwards", "povm", "D-[2,2]", Complex(0.5, 0.0)),
    ]
}

fn trine() -> Vec<Expectation> {
    let third = 1.0 / 3.0;
    let r = 3f64.sqrt() / 6.0;
    // (2/3)[u^k] in the z basis
    let povm = [
        ("1", [(third, 0.0), (third, 0.0), (third, 0.0), (third, 0.0)]),
        ("2", [(third, 0.0), (-1.0 / 6.0, -r), (-1.0 / 6.0, r), (third, 0.0)]),
        ("3", [(third, 0.0), (-1.0 / 6.0, r), (-1.0 / 6.0, -r), (third, 0.0)]),
    ];
    let mut out = Vec::new();
    for (k, entries) in povm {
        for (idx, (re, im)) in entries.into_iter().enumerate() {
            let label = format!("{k}[{},{}]", idx / 2 + 1, idx % 2 + 1);
            out.push(e("elements", "povm", &label, Complex(re, im)));
        }
    }
    out.extend([
        e("elements", "completeness_defect", "", Num(0.0)),
        consistent("consistent"),
        // Tr([u1] (2/3)[u^k]) = 2/3, 1/6, 1/6
        e("marginals", "probability", "t2=1", Num(2.0 / 3.0)),
        e("marginals", "probability", "t2=2", Num(1.0 / 6.0)),
        e("marginals", "probability", "t2=3", Num(1.0 / 6.0)),
        e("prior", "conditional", "t1=u1 | t2=1", Num(1.0)),
        e("prior", "conditional", "t1=not u1 | t2=1", Num(0.0)),
        e("prior", "conditional", "t1=u2 | t2=2", Num(1.0)),
        e("prior", "conditional", "t1=u3 | t2=3", Num(1.0)),
        e("orthogonal", "probability", "t2=1", Num(0.0)),
        e("orthogonal", "probability", "t2=2", Num(0.5)),
        e("orthogonal", "probability", "t2=3", Num(0.5)),
        e("reveals", "certain", "1", Bool(true)),
        e("reveals", "certain", "2", Bool(true)),
        e("reveals", "certain", "3", Bool(true)),
    ]);
    out
}

fn weak() -> Vec<Expectation> {
    let eps = 0.1;
    let (strong, weak) = ((1.0 - eps) / 2.0, eps / 2.0);
    let mut out = vec![
        e("elements", "povm", "E0[1,1]", Complex(strong, 0.0)),
        e("elements", "povm", "E0[1,2]", Complex(-strong, 0.0)),
        e("elements", "povm", "E0[2,1]", Complex(-strong, 0.0)),
        e("elements", "povm", "E0[2,2]", Complex(strong, 0.0)),
        e("elements", "povm", "F0[1,1]", Complex(strong, 0.0)),
        e("elements", "povm", "F0[1,2]", Complex(strong, 0.0)),
        e("elements", "povm", "F0[2,1]", Complex(strong, 0.0)),
        e("elements", "povm", "F0[2,2]", Complex(strong, 0.0)),
    ];
    for (k, diag) in [
        ("E1", (weak, 0.0)),
        ("E2", (0.0, weak)),
        ("F1", (weak, 0.0)),
        ("F2", (0.0, weak)),
    ] {
        out.push(e("elements", "povm", &format!("{k}[1,1]"), Complex(diag.0, 0.0)));
        out.push(e("elements", "povm", &format!("{k}[1,2]"), Complex(0.0, 0.0)));
        out.push(e("elements", "povm", &format!("{k}[2,1]"), Complex(0.0, 0.0)));
        out.push(e("elements", "povm", &format!("{k}[2,2]"), Complex(diag.1, 0.0)));
    }
    out.push(e("elements", "completeness_defect", "", Num(0.0)));
    // psi0 = 0.6|A> + 0.8|B>
    for (k, p) in [
        ("E0", 0.9 * 0.02),
        ("F0", 0.9 * 0.98),
        ("E1", 0.05 * 0.36),
        ("E2", 0.05 * 0.64),
        ("F1", 0.05 * 0.36),
        ("F2", 0.05 * 0.64),
    ] {
        out.push(e("reveals", "outcome_probability", k, Num(p)));
        out.push(e("reveals", "certain", k, Bool(true)));
    }
    out
}

fn contextuality() -> Vec<Expectation> {
    vec![
        e("same_a", "passed", "", Bool(true)),
        e("same_a", "max_difference", "", Num(0.0)),
        e("same_a", "first", "e1 1", Num(1.0)),
        e("same_a", "second", "e1 1", Num(1.0)),
        e("same_a", "first", "p1 -1", Num(2.0 / 3.0)),
        e("same_a", "second", "p1 -1", Num(2.0 / 3.0)),
        e("same_a", "first", "p3 1", Num(0.36)),
        e("same_a", "second", "p3 1", Num(0.36)),
    ]
}

fn epr_z() -> Vec<Expectation> {
    vec![
        consistent("consistent"),
        e("outcomes", "probability", "t2=M+", Num(0.5)),
        e("outcomes", "probability", "t2=M-", Num(0.5)),
        e("a_plus", "conditional", "t1=z+_a | t2=M+", Num(1.0)),
        e("b_plus", "conditional", "t1=z-_b | t2=M+", Num(1.0)),
        e("a_minus", "conditional", "t1=z-_a | t2=M-", Num(1.0)),
        e("b_minus", "conditional", "t1=z+_b | t2=M-", Num(1.0)),
    ]
}

fn epr_x() -> Vec<Expectation> {
    vec![
        consistent("consistent"),
        e("outcomes", "probability", "t2=M+", Num(0.5)),
        e("outcomes", "probability", "t2=M-", Num(0.5)),
        e("opposite", "conditional", "t1=x+_a&x-_b | t2=M+", Num(0.5)),
        e("opposite", "conditional", "t1=x+_a&x-_b | t2=M-", Num(0.5)),
        e("opposite", "conditional", "t1=x-_a&x+_b | t2=M+", Num(0.5)),
        e("opposite", "conditional", "t1=x-_a&x+_b | t2=M-", Num(0.5)),
        e("opposite", "conditional", "t1=x+_a&x+_b | t2=M+", Num(0.0)),
        e("opposite", "conditional", "t1=x-_a&x-_b | t2=M-", Num(0.0)),
    ]
}

pub fn registry() -> Vec<Example> {
    macro_rules! example {
        ($name:literal, $file:literal, $summary:literal, $exp:expr) => {
            Example {
                name: $name,
                summary: $summary,
                file: $file,
                source: include_str!(concat!("../examples/", $file)),
                expectations: $exp,
            }
        };
    }
    vec![
        example!(
            "spin-z",
            "spin-z.hqs",
            "Stern-Gerlach S_z measurement reveals the prior S_z",
            spin_z()
        ),
        example!(
            "spin-x-prep",
            "spin-x-prep.hqs",
            "x+ preparation, S_z measurement, time ordering",
            spin_x_prep()
        ),
        example!(
            "mz-open",
            "mz-open.hqs",
            "Mach-Zehnder without second beamsplitter: which arm",
            mz_open()
        ),
        example!(
            "mz-closed",
            "mz-closed.hqs",
            "Mach-Zehnder with second beamsplitter: which phase",
            mz_closed()
        ),
        example!(
            "trine",
            "trine.hqs",
            "three-outcome spin-half POVM from an isometry",
            trine()
        ),
        example!(
            "weak",
            "weak.hqs",
            "weak probe measurement followed by strong measurements",
            weak()
        ),
        example!(
            "contextuality",
            "contextuality.hqs",
            "A measured with B or with C gives the same A statistics",
            contextuality()
        ),
        example!("epr-z", "epr-z.hqs", "EPR-Bohm singlet, z-basis properties", epr_z()),
        example!("epr-x", "epr-x.hqs", "EPR-Bohm singlet, x-basis properties", epr_x()),
    ]
}

pub fn find(name: &str) -> Result<Example, UnknownExample> {
    registry()
        .into_iter()
        .find(|x| x.name == name)
        .ok_or_else(|| UnknownExample { name: name.to_string() })
}

#[derive(Debug, Clone)]
pub struct Check {
    pub expectation: Expectation,
    pub actual: Option<Cell>,
    pub passed: bool,
}

fn matches(expected: &Expected, actual: &Cell) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= EXPECTATION_TOL;
    match (expected, actual) {
        (Num(x), Cell::Num(y)) => close(*x, *y),
        (Complex(re, im), Cell::Complex(z)) => close(*re, z.re) && close(*im, z.im),
        (Above(x), Cell::Num(y)) => y > x,
        (Bool(x), Cell::Bool(y)) => x == y,
        (Text(x), Cell::Text(y)) => x == y,
        (Undefined, Cell::Undefined) => true,
        _ => false,
    }
}

/// Compares a result set against the example's expectations.
pub fn check(example: &Example, results: &ResultSet) -> Vec<Check> {
    example
        .expectations
        .iter()
        .map(|x| {
            let actual = results
                .get(x.query)
                .and_then(|r| r.outcome.as_ref().ok())
                .and_then(|p| {
                    p.records()
                        .into_iter()
                        .find(|r| r.field == x.field && r.label == x.label)
                })
                .map(|r| r.value);
            let passed = actual.as_ref().is_some_and(|a| matches(&x.value, a));
            Check {
                expectation: x.clone(),
                actual,
                passed,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExampleRun {
    pub example: Example,
    pub results: ResultSet,
    pub checks: Vec<Check>,
}

impl ExampleRun {
    pub fn passed(&self) -> bool {
        !self.results.has_errors() && self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_example(example: Example, tol: &Tolerances) -> Result<ExampleRun, DslError> {
    let scenario = parse_scenario(example.source, example.file, tol)?;
    let results = run_scenario(&scenario, tol);
    let checks = check(&example, &results);
    Ok(ExampleRun {
        example,
        results,
        checks,
    })
}
