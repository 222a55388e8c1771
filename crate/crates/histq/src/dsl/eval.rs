//! Resolution of a parsed program into validated engine objects.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use histq_core::histories::{
    default_time_labels, Event, EventLabel, EventOperator, History, HistoryFamily, InitialState, Layout, TimeGrid,
};
use histq_core::measurement::{
    kraus_model, luders_model, projective_model, CoarseGroup, KrausSet, MeasurementModel, REMAINDER,
};
use histq_core::objects::{Isometry, Observable, Pdi, Projector};
use histq_core::{ComplexMatrix, Ket, Tolerances, C64};

use super::ast::*;
use super::error::DslError;
use super::lexer::Span;

/// Largest dimension a declared space may have.
pub const MAX_DIM: usize = 1024;

#[derive(Debug, Clone)]
pub struct NamedKet {
    pub space: String,
    pub ket: Ket,
}

#[derive(Debug, Clone)]
pub struct NamedOperator {
    pub space: String,
    pub matrix: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct NamedIsometry {
    pub from: String,
    pub to: String,
    pub isometry: Isometry,
}

#[derive(Debug, Clone)]
pub enum QueryKind {
    Consistency {
        family: String,
    },
    Probabilities {
        family: String,
        keep: Vec<String>,
        unchecked: bool,
    },
    /// Entries without a label enumerate every label at that time.
    Conditional {
        family: String,
        given: Vec<(String, Option<String>)>,
        target: Vec<(String, Option<String>)>,
    },
    Povm {
        model: String,
    },
    Inference {
        model: String,
        initial: InitialState,
    },
    Noncontextuality {
        first: String,
        second: String,
        observable: Observable,
        probes: Vec<(String, Ket)>,
        groups: Vec<CoarseGroup>,
    },
}

impl QueryKind {
    pub fn name(&self) -> &'static str {
        match self {
            QueryKind::Consistency { .. } => "consistency",
            QueryKind::Probabilities { .. } => "probabilities",
            QueryKind::Conditional { .. } => "conditional",
            QueryKind::Povm { .. } => "povm",
            QueryKind::Inference { .. } => "inference",
            QueryKind::Noncontextuality { .. } => "noncontextuality",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Query {
    pub id: String,
    pub kind: QueryKind,
    pub span: Span,
}

/// A fully resolved scenario: every name refers to a validated object.
#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub origin: String,
    pub spaces: BTreeMap<String, Layout>,
    pub scalars: BTreeMap<String, C64>,
    pub kets: BTreeMap<String, NamedKet>,
    pub operators: BTreeMap<String, NamedOperator>,
    pub isometries: BTreeMap<String, NamedIsometry>,
    pub models: BTreeMap<String, MeasurementModel>,
    pub families: BTreeMap<String, HistoryFamily>,
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone)]
enum Value {
    Scalar(C64),
    Ket(Ket),
    Matrix(ComplexMatrix),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Ket(_) => "ket",
            Value::Matrix(_) => "operator",
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::Scalar(z) => z.re.is_finite() && z.im.is_finite(),
            Value::Ket(k) => k.amplitudes().iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            Value::Matrix(m) => m.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }
}

fn invalid(span: Span, e: impl std::fmt::Display) -> DslError {
    DslError::validation(span, e.to_string())
}

fn unresolved(id: &Ident, kind: &'static str) -> DslError {
    DslError::Resolution {
        symbol: id.name.clone(),
        kind,
        span: id.span,
    }
}

fn column_ket(m: &ComplexMatrix) -> Option<Ket> {
    (m.cols() == 1).then(|| m.column(0))
}

struct Evaluator<'a> {
    s: Scenario,
    tol: &'a Tolerances,
}

impl Evaluator<'_> {
    fn taken(&self, name: &str) -> bool {
        self.s.scalars.contains_key(name)
            || self.s.kets.contains_key(name)
            || self.s.operators.contains_key(name)
            || self.s.isometries.contains_key(name)
    }

    fn declare(&self, id: &Ident) -> Result<(), DslError> {
        if RESERVED.contains(&id.name.as_str()) {
            return Err(invalid(id.span, format!("`{}` is reserved", id.name)));
        }
        if self.taken(&id.name) {
            return Err(invalid(id.span, format!("`{}` is already defined", id.name)));
        }
        Ok(())
    }

    fn space(&self, id: &Ident) -> Result<&Layout, DslError> {
        self.s.spaces.get(&id.name).ok_or_else(|| unresolved(id, "space"))
    }

    fn ket(&self, id: &Ident) -> Result<&NamedKet, DslError> {
        self.s.kets.get(&id.name).ok_or_else(|| {
            if self.taken(&id.name) {
                invalid(id.span, format!("`{}` is not a ket", id.name))
            } else {
                unresolved(id, "ket")
            }
        })
    }

    fn model(&self, id: &Ident) -> Result<&MeasurementModel, DslError> {
        self.s.models.get(&id.name).ok_or_else(|| unresolved(id, "model"))
    }

    fn eval(&self, e: &Expr) -> Result<Value, DslError> {
        let v = self.eval_inner(e)?;
        if !v.is_finite() {
            return Err(invalid(e.span(), "expression is not finite"));
        }
        Ok(v)
    }

    fn eval_inner(&self, e: &Expr) -> Result<Value, DslError> {
        use Value::*;
        let span = e.span();
        Ok(match e {
            Expr::Number(x, _) => Scalar(C64::new(*x, 0.0)),
            Expr::Imag(_) => Scalar(C64::new(0.0, 1.0)),
            Expr::Pi(_) => Scalar(C64::new(PI, 0.0)),
            Expr::Omega(_) => Scalar(C64::new(-0.5, 3f64.sqrt() / 2.0)),
            Expr::Var(id) => {
                let n = &id.name;
                if let Some(z) = self.s.scalars.get(n) {
                    Scalar(*z)
                } else if let Some(k) = self.s.kets.get(n) {
                    Ket(k.ket.clone())
                } else if let Some(o) = self.s.operators.get(n) {
                    Matrix(o.matrix.clone())
                } else if let Some(j) = self.s.isometries.get(n) {
                    Matrix(j.isometry.matrix().clone())
                } else {
                    return Err(unresolved(id, "name"));
                }
            }
            Expr::Sqrt(inner, _) => match self.eval(inner)? {
                Scalar(z) if z.im == 0.0 && z.re >= 0.0 => Scalar(C64::new(z.re.sqrt(), 0.0)),
                Scalar(z) if z.im == 0.0 => Scalar(C64::new(0.0, (-z.re).sqrt())),
                Scalar(z) => Scalar(z.sqrt()),
                other => return Err(invalid(span, format!("sqrt expects a scalar, got {}", other.kind()))),
            },
            Expr::Identity(id) => Matrix(ComplexMatrix::identity(self.space(id)?.dim())),
            Expr::Neg(inner, _) => match self.eval(inner)? {
                Scalar(z) => Scalar(-z),
                Ket(k) => Ket(k.scale(C64::new(-1.0, 0.0))),
                Matrix(m) => Matrix(m.scale_real(-1.0)),
            },
            Expr::Dagger(inner, _) => match self.eval(inner)? {
                Scalar(z) => Scalar(z.conj()),
                Ket(k) => Matrix(ComplexMatrix::from_column(&k).adjoint()),
                Matrix(m) => Matrix(m.adjoint()),
            },
            Expr::Binary(op, a, b, _) => self.binary(*op, self.eval(a)?, self.eval(b)?, span)?,
            Expr::List(items, _) => {
                let vals = items.iter().map(|x| self.eval(x)).collect::<Result<Vec<_>, _>>()?;
                if vals.iter().all(|v| matches!(v, Scalar(_))) {
                    let amps = vals
                        .into_iter()
                        .map(|v| match v {
                            Scalar(z) => z,
                            _ => unreachable!(),
                        })
                        .collect();
                    Ket(histq_core::Ket::new(amps).map_err(|e| invalid(span, e))?)
                } else if vals.iter().all(|v| matches!(v, Ket(_))) {
                    let rows = vals
                        .into_iter()
                        .map(|v| match v {
                            Ket(k) => k.amplitudes().to_vec(),
                            _ => unreachable!(),
                        })
                        .collect();
                    Matrix(ComplexMatrix::from_rows(rows).map_err(|e| invalid(span, e))?)
                } else {
                    return Err(invalid(span, "list entries must be all scalars or all rows"));
                }
            }
            Expr::Proj(inner, _) => match self.eval(inner)? {
                Scalar(z) => Ket(histq_core::Ket::new(vec![z]).map_err(|e| invalid(span, e))?),
                Ket(k) => {
                    let k = k
                        .normalized()
                        .ok_or_else(|| invalid(span, "cannot project onto the zero vector"))?;
                    Matrix(k.projector())
                }
                Matrix(_) => return Err(invalid(span, "`[...]` expects a ket or scalar entries")),
            },
            Expr::Dyad(a, b) => Matrix(ComplexMatrix::dyad(&self.ket(a)?.ket, &self.ket(b)?.ket)),
        })
    }

    fn binary(&self, op: BinOp, a: Value, b: Value, span: Span) -> Result<Value, DslError> {
        use Value::*;
        let err =
            |a: &Value, b: &Value, what: &str| invalid(span, format!("cannot {what} {} and {}", a.kind(), b.kind()));
        let shape = |e: histq_core::LinalgError| invalid(span, e);
        Ok(match op {
            BinOp::Add | BinOp::Sub => {
                let sub = op == BinOp::Sub;
                match (&a, &b) {
                    (Scalar(x), Scalar(y)) => Scalar(if sub { x - y } else { x + y }),
                    (Ket(x), Ket(y)) => Ket(if sub { x.try_sub(y) } else { x.try_add(y) }.map_err(shape)?),
                    (Matrix(x), Matrix(y)) => Matrix(if sub { x.try_sub(y) } else { x.try_add(y) }.map_err(shape)?),
                    _ => return Err(err(&a, &b, if sub { "subtract" } else { "add" })),
                }
            }
            BinOp::Mul => match (&a, &b) {
                (Scalar(x), Scalar(y)) => Scalar(x * y),
                (Scalar(x), Ket(k)) | (Ket(k), Scalar(x)) => Ket(k.scale(*x)),
                (Scalar(x), Matrix(m)) | (Matrix(m), Scalar(x)) => Matrix(m.scale(*x)),
                (Matrix(x), Matrix(y)) => Matrix(x.try_mul(y).map_err(shape)?),
                (Matrix(m), Ket(k)) => Ket(m.try_apply(k).map_err(shape)?),
                (Ket(k), Matrix(m)) => Matrix(ComplexMatrix::from_column(k).try_mul(m).map_err(shape)?),
                _ => return Err(err(&a, &b, "multiply")),
            },
            BinOp::Div => match (&a, &b) {
                (_, Scalar(y)) if y.norm() == 0.0 => return Err(invalid(span, "division by zero")),
                (Scalar(x), Scalar(y)) => Scalar(x / y),
                (Ket(k), Scalar(y)) => Ket(k.scale(C64::new(1.0, 0.0) / y)),
                (Matrix(m), Scalar(y)) => Matrix(m.scale(C64::new(1.0, 0.0) / y)),
                _ => return Err(err(&a, &b, "divide")),
            },
            BinOp::Tensor => match (&a, &b) {
                (Ket(x), Ket(y)) => Ket(x.kron(y)),
                (Matrix(x), Matrix(y)) => Matrix(x.kron(y)),
                (Ket(x), Matrix(y)) => Matrix(ComplexMatrix::from_column(x).kron(y)),
                (Matrix(x), Ket(y)) => Matrix(x.kron(&ComplexMatrix::from_column(y))),
                _ => return Err(err(&a, &b, "tensor")),
            },
        })
    }

    fn eval_ket(&self, e: &Expr) -> Result<Ket, DslError> {
        match self.eval(e)? {
            Value::Ket(k) => Ok(k),
            Value::Matrix(m) => column_ket(&m).ok_or_else(|| invalid(e.span(), "expected a ket, got an operator")),
            Value::Scalar(_) => Err(invalid(e.span(), "expected a ket, got a scalar")),
        }
    }

    fn eval_matrix(&self, e: &Expr) -> Result<ComplexMatrix, DslError> {
        match self.eval(e)? {
            Value::Matrix(m) => Ok(m),
            other => Err(invalid(
                e.span(),
                format!("expected an operator, got a {}", other.kind()),
            )),
        }
    }

    fn eval_real(&self, e: &Expr) -> Result<f64, DslError> {
        match self.eval(e)? {
            Value::Scalar(z) if z.im.abs() <= self.tol.numeric => Ok(z.re),
            _ => Err(invalid(e.span(), "expected a real number")),
        }
    }

    /// `(label, operator)` pairs of a pointer block or event set.
    fn items(&self, items: &[Item]) -> Result<Vec<(String, ComplexMatrix, Span)>, DslError> {
        let mut out: Vec<(String, ComplexMatrix, Span)> = Vec::new();
        for it in items {
            let (label, m, span) = match it {
                Item::Named(id) => {
                    let m = if let Some(k) = self.s.kets.get(&id.name) {
                        let k = k
                            .ket
                            .normalized()
                            .ok_or_else(|| invalid(id.span, "cannot project onto the zero vector"))?;
                        k.projector()
                    } else if let Some(o) = self.s.operators.get(&id.name) {
                        o.matrix.clone()
                    } else {
                        return Err(unresolved(id, "ket or operator"));
                    };
                    (id.name.clone(), m, id.span)
                }
                Item::Labeled(l, e) => (l.text.clone(), self.eval_matrix(e)?, l.span),
            };
            if out.iter().any(|(l, ..)| *l == label) {
                return Err(invalid(span, format!("label `{label}` appears twice")));
            }
            out.push((label, m, span));
        }
        Ok(out)
    }

    fn projector(&self, m: ComplexMatrix, span: Span) -> Result<Projector, DslError> {
        Projector::new(m, self.tol.derived()).map_err(|e| invalid(span, e))
    }

    /// `&` in a label separates atoms, so `z+_a&z-_b` matches the pattern `z+_a`.
    fn event(&self, label: &str, m: ComplexMatrix, span: Span) -> Result<Event, DslError> {
        Ok(Event {
            label: EventLabel::from(label),
            operator: EventOperator::Full(self.projector(m, span)?),
        })
    }

    fn layout_of_initial(&self, init: &Initial, dim: usize) -> Layout {
        let name = match init {
            Initial::State(Expr::Var(id)) => Some(&id.name),
            Initial::State(Expr::Proj(inner, _)) => match inner.as_ref() {
                Expr::Var(id) => Some(&id.name),
                _ => None,
            },
            Initial::Ensemble(members, _) => match members.first().map(|(_, k)| k) {
                Some(Expr::Var(id)) => Some(&id.name),
                _ => None,
            },
            _ => None,
        };
        name.and_then(|n| self.s.kets.get(n))
            .and_then(|k| self.s.spaces.get(&k.space))
            .filter(|l| l.dim() == dim)
            .cloned()
            .unwrap_or_else(|| Layout::simple(dim))
    }

    fn initial(&self, init: &Initial) -> Result<InitialState, DslError> {
        let state = match init {
            // `[psi]` names the state by its projector
            Initial::State(Expr::Proj(inner, _)) => InitialState::Pure(self.eval_ket(inner)?),
            Initial::State(e) => InitialState::Pure(self.eval_ket(e)?),
            Initial::Ensemble(members, _) => InitialState::Ensemble(
                members
                    .iter()
                    .map(|(p, k)| Ok((self.eval_real(p)?, self.eval_ket(k)?)))
                    .collect::<Result<_, DslError>>()?,
            ),
        };
        let span = match init {
            Initial::State(e) => e.span(),
            Initial::Ensemble(_, s) => *s,
        };
        state.validate(self.tol.derived()).map_err(|e| invalid(span, e))?;
        Ok(state)
    }

    fn statement(&mut self, st: &Stmt) -> Result<(), DslError> {
        let span = st.span();
        match st {
            Stmt::Space { name, def, .. } => {
                if self.s.spaces.contains_key(&name.name) {
                    return Err(invalid(name.span, format!("space `{}` is already defined", name.name)));
                }
                let layout = match def {
                    SpaceDef::Dim(d) => Layout::simple(*d),
                    SpaceDef::Product(fs) => {
                        let mut dims = Vec::new();
                        for f in fs {
                            dims.extend_from_slice(self.space(f)?.factors());
                        }
                        Layout::product(dims)
                    }
                };
                if layout.dim() > MAX_DIM {
                    return Err(invalid(
                        span,
                        format!("dimension {} exceeds the limit {MAX_DIM}", layout.dim()),
                    ));
                }
                self.s.spaces.insert(name.name.clone(), layout);
            }
            Stmt::Let { name, value, .. } => {
                self.declare(name)?;
                match self.eval(value)? {
                    Value::Scalar(z) => {
                        self.s.scalars.insert(name.name.clone(), z);
                    }
                    other => {
                        return Err(invalid(
                            value.span(),
                            format!("`let` binds scalars, got a {}", other.kind()),
                        ))
                    }
                }
            }
            Stmt::Ket { name, space, value, .. } => {
                self.declare(name)?;
                let dim = self.space(space)?.dim();
                let ket = self.eval_ket(value)?;
                if ket.dim() != dim {
                    return Err(invalid(
                        span,
                        format!(
                            "dimension mismatch: ket has {} amplitudes, space `{}` has dimension {dim}",
                            ket.dim(),
                            space.name
                        ),
                    ));
                }
                self.s.kets.insert(
                    name.name.clone(),
                    NamedKet {
                        space: space.name.clone(),
                        ket,
                    },
                );
            }
            Stmt::Operator { name, space, value, .. } => {
                self.declare(name)?;
                let dim = self.space(space)?.dim();
                let matrix = self.eval_matrix(value)?;
                if matrix.shape() != (dim, dim) {
                    return Err(invalid(
                        span,
                        format!(
                            "dimension mismatch: operator is {}x{}, space `{}` has dimension {dim}",
                            matrix.rows(),
                            matrix.cols(),
                            space.name
                        ),
                    ));
                }
                self.s.operators.insert(
                    name.name.clone(),
                    NamedOperator {
                        space: space.name.clone(),
                        matrix,
                    },
                );
            }
            Stmt::Isometry {
                name, from, to, value, ..
            } => {
                self.declare(name)?;
                let (ds, dt) = (self.space(from)?.dim(), self.space(to)?.dim());
                let m = self.eval_matrix(value)?;
                if m.shape() != (dt, ds) {
                    return Err(invalid(
                        span,
                        format!(
                            "dimension mismatch: matrix is {}x{}, expected {dt}x{ds}",
                            m.rows(),
                            m.cols()
                        ),
                    ));
                }
                let isometry = Isometry::new(m, self.tol.derived()).map_err(|e| invalid(span, e))?;
                self.s.isometries.insert(
                    name.name.clone(),
                    NamedIsometry {
                        from: from.name.clone(),
                        to: to.name.clone(),
                        isometry,
                    },
                );
            }
            Stmt::Model { name, def, .. } => {
                if self.s.models.contains_key(&name.name) {
                    return Err(invalid(name.span, format!("model `{}` is already defined", name.name)));
                }
                let model = self.model_def(def, span)?;
                self.s.models.insert(name.name.clone(), model);
            }
            Stmt::Family {
                name,
                initial,
                slots,
                via,
                ..
            } => {
                if self.s.families.contains_key(&name.name) {
                    return Err(invalid(name.span, format!("family `{}` is already defined", name.name)));
                }
                let fam = self.family(initial, slots, via, span)?;
                self.s.families.insert(name.name.clone(), fam);
            }
            Stmt::Query { id, def, .. } => {
                let id = match id {
                    Some(id) => id.name.clone(),
                    None => format!("q{}", self.s.queries.len() + 1),
                };
                if self.s.queries.iter().any(|q| q.id == id) {
                    return Err(invalid(span, format!("query id `{id}` is used twice")));
                }
                let kind = self.query(def)?;
                self.s.queries.push(Query { id, kind, span });
            }
        }
        Ok(())
    }

    fn pointer(&self, items: &[Item]) -> Result<Vec<(String, ComplexMatrix)>, DslError> {
        let items = self.items(items)?;
        if let Some((_, _, span)) = items.iter().find(|(l, ..)| l == REMAINDER) {
            return Err(invalid(
                *span,
                format!("pointer label `{REMAINDER}` is reserved for the remainder"),
            ));
        }
        Ok(items.into_iter().map(|(l, m, _)| (l, m)).collect())
    }

    fn calibration(&self, cal: &[(Label, Ident)]) -> Result<Vec<(String, Ket)>, DslError> {
        cal.iter()
            .map(|(l, k)| Ok((l.text.clone(), self.ket(k)?.ket.clone())))
            .collect()
    }

    fn records(&self, records: &[Ident]) -> Result<Vec<Ket>, DslError> {
        records.iter().map(|r| Ok(self.ket(r)?.ket.clone())).collect()
    }

    fn model_def(&self, def: &ModelDef, span: Span) -> Result<MeasurementModel, DslError> {
        let tol = self.tol;
        let fail = |e: histq_core::measurement::MeasurementError| invalid(span, e);
        match def {
            ModelDef::Projective { pairs, pointer } => {
                let pairs = pairs
                    .iter()
                    .map(|(s, phi)| Ok((self.ket(s)?.ket.clone(), self.ket(phi)?.ket.clone())))
                    .collect::<Result<Vec<_>, DslError>>()?;
                projective_model(&pairs, self.pointer(pointer)?, tol).map_err(fail)
            }
            ModelDef::Isometry {
                isometry,
                pointer,
                calibrate,
            } => {
                let j = self
                    .s
                    .isometries
                    .get(&isometry.name)
                    .ok_or_else(|| unresolved(isometry, "isometry"))?;
                let system = self.s.spaces[&j.from].clone();
                let apparatus = self.s.spaces[&j.to].clone();
                let model = MeasurementModel::new(j.isometry.clone(), system, apparatus, self.pointer(pointer)?, tol)
                    .map_err(fail)?;
                Ok(model.with_calibration(self.calibration(calibrate)?))
            }
            ModelDef::Unitary {
                unitary,
                system,
                ready,
                pointer,
                calibrate,
            } => {
                let t = self
                    .s
                    .operators
                    .get(&unitary.name)
                    .ok_or_else(|| unresolved(unitary, "operator"))?;
                let system = self.space(system)?.clone();
                let ready = self.ket(ready)?.ket.clone();
                let model = MeasurementModel::from_unitary(&t.matrix, ready, system, self.pointer(pointer)?, tol)
                    .map_err(fail)?;
                Ok(model.with_calibration(self.calibration(calibrate)?))
            }
            ModelDef::Kraus {
                system,
                operators,
                records,
            } => {
                let dim = self.space(system)?.dim();
                let (labels, ops): (Vec<String>, Vec<ComplexMatrix>) =
                    self.items(operators)?.into_iter().map(|(l, m, _)| (l, m)).unzip();
                if ops.iter().any(|m| m.shape() != (dim, dim)) {
                    return Err(invalid(
                        span,
                        format!("Kraus operators must act on a space of dimension {dim}"),
                    ));
                }
                let set = KrausSet::new(labels, ops, tol.derived()).map_err(fail)?;
                kraus_model(set, &self.records(records)?, tol).map_err(fail)
            }
            ModelDef::Luders {
                system,
                projectors,
                records,
            } => {
                let dim = self.space(system)?.dim();
                let (labels, ops): (Vec<String>, Vec<ComplexMatrix>) =
                    self.items(projectors)?.into_iter().map(|(l, m, _)| (l, m)).unzip();
                if ops.iter().any(|m| m.shape() != (dim, dim)) {
                    return Err(invalid(
                        span,
                        format!("projectors must act on a space of dimension {dim}"),
                    ));
                }
                let pdi = Pdi::new(labels, ops, tol.numeric).map_err(|e| invalid(span, e))?;
                luders_model(&pdi, &self.records(records)?, tol).map_err(fail)
            }
        }
    }

    fn event_set(&self, set: &EventSet) -> Result<Vec<(String, ComplexMatrix)>, DslError> {
        match set {
            EventSet::Items(items, _) => Ok(self.items(items)?.into_iter().map(|(l, m, _)| (l, m)).collect()),
            EventSet::Outcomes(m) => Ok(self
                .model(m)?
                .pointer()
                .iter()
                .filter(|(l, p)| *l != REMAINDER || p.rank() > 0)
                .map(|(l, p)| (l.to_string(), p.matrix().clone()))
                .collect()),
        }
    }

    fn family(&self, initial: &Initial, slots: &[Slot], via: &[Expr], span: Span) -> Result<HistoryFamily, DslError> {
        let state = self.initial(initial)?;
        // Each segment lists its alternatives; an alternative fills one or two times.
        let mut segments: Vec<Vec<Vec<Event>>> = Vec::new();
        let mut default_steps: Vec<Option<&Ident>> = Vec::new();
        for slot in slots {
            match slot {
                Slot::Product(sets) => {
                    let mut alts: Vec<(String, ComplexMatrix)> = Vec::new();
                    for (i, set) in sets.iter().enumerate() {
                        let events = self.event_set(set)?;
                        alts = if i == 0 {
                            events
                        } else {
                            alts.iter()
                                .flat_map(|(la, ma)| {
                                    events.iter().map(move |(lb, mb)| (format!("{la}&{lb}"), ma.kron(mb)))
                                })
                                .collect()
                        };
                    }
                    let alts = alts
                        .into_iter()
                        .map(|(l, m)| Ok(vec![self.event(&l, m, span)?]))
                        .collect::<Result<Vec<_>, DslError>>()?;
                    segments.push(alts);
                    default_steps.push(match sets.as_slice() {
                        [EventSet::Outcomes(m)] => Some(m),
                        _ => None,
                    });
                }
                Slot::Linked { model, branches } => {
                    let m = self.model(model)?;
                    let mut alts = Vec::new();
                    for (k, set) in branches {
                        let pk = m.pointer().get(&k.text).ok_or_else(|| {
                            invalid(k.span, format!("`{}` is not an outcome of `{}`", k.text, model.name))
                        })?;
                        for (l, x) in self.event_set(set)? {
                            alts.push(vec![
                                self.event(&l, x, span)?,
                                self.event(&k.text, pk.matrix().clone(), span)?,
                            ]);
                        }
                    }
                    segments.push(alts);
                    default_steps.push(None);
                    default_steps.push(Some(model));
                }
            }
        }
        let times = default_steps.len();

        let mut layouts = vec![self.layout_of_initial(initial, state.dim())];
        let mut props = Vec::with_capacity(times);
        if !via.is_empty() && via.len() != times {
            return Err(invalid(
                span,
                format!("`via` lists {} steps, the family has {times}", via.len()),
            ));
        }
        for i in 0..times {
            let prev = layouts[i].clone();
            let (iso, layout) = match via.get(i) {
                Some(e) => self.step(e, &prev)?,
                None => match default_steps[i] {
                    Some(m) => {
                        let m = self.model(m)?;
                        (m.isometry().clone(), m.measurement_layout().clone())
                    }
                    None => (Isometry::identity(prev.dim()), prev.clone()),
                },
            };
            if iso.source_dim() != prev.dim() {
                return Err(invalid(
                    span,
                    format!(
                        "step {} maps from dimension {}, the state has dimension {}",
                        i + 1,
                        iso.source_dim(),
                        prev.dim()
                    ),
                ));
            }
            props.push(iso);
            layouts.push(layout);
        }
        let grid = TimeGrid::new(default_time_labels(times + 1), layouts, props).map_err(|e| invalid(span, e))?;

        let mut histories: Vec<Vec<Event>> = vec![Vec::new()];
        for seg in &segments {
            let mut next = Vec::with_capacity(histories.len() * seg.len());
            for h in &histories {
                for alt in seg {
                    let mut h2 = h.clone();
                    h2.extend(alt.iter().cloned());
                    next.push(h2);
                }
            }
            histories = next;
            if histories.len() > 100_000 {
                return Err(invalid(span, "family has too many histories"));
            }
        }
        HistoryFamily::new(state, grid, histories.into_iter().map(History::new).collect(), self.tol)
            .map_err(|e| invalid(span, e))
    }

    fn step(&self, e: &Expr, prev: &Layout) -> Result<(Isometry, Layout), DslError> {
        let span = e.span();
        if let Expr::Var(id) = e {
            if let Some(m) = self.s.models.get(&id.name) {
                return Ok((m.isometry().clone(), m.measurement_layout().clone()));
            }
            if let Some(j) = self.s.isometries.get(&id.name) {
                return Ok((j.isometry.clone(), self.s.spaces[&j.to].clone()));
            }
            if let Some(o) = self.s.operators.get(&id.name) {
                let iso = Isometry::new(o.matrix.clone(), self.tol.derived()).map_err(|e| invalid(span, e))?;
                return Ok((iso, self.s.spaces[&o.space].clone()));
            }
        }
        if let Expr::Identity(id) = e {
            let l = self.space(id)?.clone();
            return Ok((Isometry::identity(l.dim()), l));
        }
        let m = self.eval_matrix(e)?;
        let layout = if m.rows() == prev.dim() {
            prev.clone()
        } else {
            Layout::simple(m.rows())
        };
        let iso = Isometry::new(m, self.tol.derived()).map_err(|e| invalid(span, e))?;
        Ok((iso, layout))
    }

    fn pattern(
        &self,
        fam: &HistoryFamily,
        entries: &[PatternEntry],
    ) -> Result<Vec<(String, Option<String>)>, DslError> {
        entries
            .iter()
            .map(|p| {
                if !fam.slot_times().contains(&p.time.name) {
                    return Err(DslError::Resolution {
                        symbol: p.time.name.clone(),
                        kind: "time",
                        span: p.time.span,
                    });
                }
                Ok((p.time.name.clone(), p.label.as_ref().map(|l| l.text.clone())))
            })
            .collect()
    }

    fn query(&self, def: &QueryDef) -> Result<QueryKind, DslError> {
        let family = |id: &Ident| self.s.families.get(&id.name).ok_or_else(|| unresolved(id, "family"));
        Ok(match def {
            QueryDef::Consistency { family: f } => {
                family(f)?;
                QueryKind::Consistency { family: f.name.clone() }
            }
            QueryDef::Probabilities {
                family: f,
                keep,
                unchecked,
            } => {
                let fam = family(f)?;
                for t in keep {
                    if !fam.slot_times().contains(&t.name) {
                        return Err(unresolved(t, "time"));
                    }
                }
                QueryKind::Probabilities {
                    family: f.name.clone(),
                    keep: keep.iter().map(|t| t.name.clone()).collect(),
                    unchecked: *unchecked,
                }
            }
            QueryDef::Conditional {
                family: f,
                given,
                target,
            } => {
                let fam = family(f)?;
                QueryKind::Conditional {
                    family: f.name.clone(),
                    given: self.pattern(fam, given)?,
                    target: self.pattern(fam, target)?,
                }
            }
            QueryDef::Povm { model } => {
                self.model(model)?;
                QueryKind::Povm {
                    model: model.name.clone(),
                }
            }
            QueryDef::Inference { model, initial } => {
                let m = self.model(model)?;
                let state = self.initial(initial)?;
                if state.dim() != m.system_dim() {
                    return Err(invalid(
                        model.span,
                        format!(
                            "initial state has dimension {}, model expects {}",
                            state.dim(),
                            m.system_dim()
                        ),
                    ));
                }
                QueryKind::Inference {
                    model: model.name.clone(),
                    initial: state,
                }
            }
            QueryDef::Noncontextuality {
                first,
                second,
                observable,
                probes,
                groups,
            } => {
                self.model(first)?;
                self.model(second)?;
                let a = self
                    .s
                    .operators
                    .get(&observable.name)
                    .ok_or_else(|| unresolved(observable, "operator"))?;
                let observable =
                    Observable::new(a.matrix.clone(), self.tol).map_err(|e| invalid(observable.span, e))?;
                let probes = probes
                    .iter()
                    .map(|p| Ok((p.name.clone(), self.ket(p)?.ket.clone())))
                    .collect::<Result<Vec<_>, DslError>>()?;
                let groups = groups
                    .iter()
                    .map(|g| {
                        Ok(CoarseGroup::new(
                            self.eval_real(&g.value)?,
                            g.patterns.iter().map(|l| l.text.clone()).collect(),
                        ))
                    })
                    .collect::<Result<Vec<_>, DslError>>()?;
                QueryKind::Noncontextuality {
                    first: first.name.clone(),
                    second: second.name.clone(),
                    observable,
                    probes,
                    groups,
                }
            }
        })
    }
}

/// Resolves and validates every statement in order. References must point
/// to earlier statements.
pub fn resolve(program: &Program, origin: &str, tol: &Tolerances) -> Result<Scenario, DslError> {
    let mut ev = Evaluator {
        s: Scenario {
            origin: origin.to_string(),
            ..Scenario::default()
        },
        tol,
    };
    for st in &program.statements {
        ev.statement(st)?;
    }
    Ok(ev.s)
}
