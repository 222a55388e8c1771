//! Syntax tree and canonical printer. Printing then re-parsing yields an
//! equal tree; spans are ignored by equality.

use std::fmt::{self, Display, Formatter, Write};

use super::lexer::{is_ident_continue, is_ident_start, Span};

/// Words that cannot name objects because expressions give them a meaning.
pub const RESERVED: &[&str] = &["i", "pi", "omega", "sqrt", "I"];

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Display for Ident {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Outcome or event label: printed bare when it lexes as an identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub text: String,
    pub span: Span,
}

fn is_plain(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(is_ident_start) && cs.all(is_ident_continue)
}

impl Display for Label {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if is_plain(&self.text) {
            f.write_str(&self.text)
        } else {
            f.write_char('"')?;
            for c in self.text.chars() {
                if c == '"' || c == '\\' {
                    f.write_char('\\')?;
                }
                f.write_char(c)?;
            }
            f.write_char('"')
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Tensor,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Tensor => 3,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Tensor => "(x)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64, Span),
    Imag(Span),
    Pi(Span),
    Omega(Span),
    Var(Ident),
    Sqrt(Box<Expr>, Span),
    /// `I(S)`
    Identity(Ident),
    Neg(Box<Expr>, Span),
    Binary(BinOp, Box<Expr>, Box<Expr>, Span),
    Dagger(Box<Expr>, Span),
    /// `[a, b, ...]` with at least two entries, or a list of lists
    List(Vec<Expr>, Span),
    /// `[e]`: projector onto a ket, or a one-dimensional ket from a scalar
    Proj(Box<Expr>, Span),
    /// `|a><b|`
    Dyad(Ident, Ident),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Number(_, s)
            | Expr::Imag(s)
            | Expr::Pi(s)
            | Expr::Omega(s)
            | Expr::Sqrt(_, s)
            | Expr::Neg(_, s)
            | Expr::Binary(_, _, _, s)
            | Expr::Dagger(_, s)
            | Expr::List(_, s)
            | Expr::Proj(_, s) => *s,
            Expr::Var(id) | Expr::Identity(id) | Expr::Dyad(id, _) => id.span,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(..) => 4,
            _ => 5,
        }
    }
}

fn write_operand(f: &mut Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(x, _) => write!(f, "{x}"),
            Expr::Imag(_) => f.write_str("i"),
            Expr::Pi(_) => f.write_str("pi"),
            Expr::Omega(_) => f.write_str("omega"),
            Expr::Var(id) => write!(f, "{id}"),
            // `(x)` alone would lex as the tensor operator
            Expr::Sqrt(e, _) => write!(f, "sqrt( {e} )"),
            Expr::Identity(id) => write!(f, "I( {id} )"),
            Expr::Neg(e, _) => {
                f.write_str("-")?;
                write_operand(f, e, 4)
            }
            Expr::Binary(op, a, b, _) => {
                let p = op.precedence();
                write_operand(f, a, p)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, b, p + 1)
            }
            Expr::Dagger(e, _) => {
                write_operand(f, e, 5)?;
                f.write_str("^dag")
            }
            Expr::List(items, _) => {
                f.write_str("[")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str("]")
            }
            Expr::Proj(e, _) if matches!(**e, Expr::List(..)) => write!(f, "[( {e} )]"),
            Expr::Proj(e, _) => write!(f, "[{e}]"),
            Expr::Dyad(a, b) => write!(f, "|{a}><{b}|"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceDef {
    Dim(usize),
    Product(Vec<Ident>),
}

/// Member of an event set or pointer block.
#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    /// Named ket (projector onto it) or named operator, labelled by its name.
    Named(Ident),
    Labeled(Label, Expr),
}

impl Display for Item {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Item::Named(id) => write!(f, "{id}"),
            Item::Labeled(l, e) => write!(f, "{l}: {e}"),
        }
    }
}

fn write_list<T: Display>(f: &mut Formatter<'_>, open: &str, items: &[T], close: &str) -> fmt::Result {
    f.write_str(open)?;
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{it}")?;
    }
    f.write_str(close)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventSet {
    Items(Vec<Item>, Span),
    /// Every pointer position of a model.
    Outcomes(Ident),
}

impl Display for EventSet {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            EventSet::Items(items, _) => write_list(f, "{", items, "}"),
            EventSet::Outcomes(m) => write!(f, "outcomes( {m} )"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    /// Tensor product of event sets; a single set is the common case.
    Product(Vec<EventSet>),
    /// Intermediate sets tied to each pointer outcome of a model; occupies
    /// two times.
    Linked {
        model: Ident,
        branches: Vec<(Label, EventSet)>,
    },
}

impl Display for Slot {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Product(sets) => {
                for (i, s) in sets.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" (x) ")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            Slot::Linked { model, branches } => {
                write!(f, "linked( {model} ) {{")?;
                for (i, (l, s)) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, " {l}: {s}")?;
                }
                f.write_str(" }")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    State(Expr),
    Ensemble(Vec<(Expr, Expr)>, Span),
}

impl Display for Initial {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Initial::State(e) => write!(f, "{e}"),
            Initial::Ensemble(members, _) => {
                f.write_str("ensemble {")?;
                for (i, (p, k)) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, " {p}: {k}")?;
                }
                f.write_str(" }")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelDef {
    /// `projective { s -> phi, ... } pointer { ... }`
    Projective {
        pairs: Vec<(Ident, Ident)>,
        pointer: Vec<Item>,
    },
    /// `isometry J pointer { ... } [calibrate { label: ket, ... }]`
    Isometry {
        isometry: Ident,
        pointer: Vec<Item>,
        calibrate: Vec<(Label, Ident)>,
    },
    /// `unitary T on S ready r pointer { ... } [calibrate { ... }]`
    Unitary {
        unitary: Ident,
        system: Ident,
        ready: Ident,
        pointer: Vec<Item>,
        calibrate: Vec<(Label, Ident)>,
    },
    /// `kraus on S { label: K, ... } records (r1, ...)`
    Kraus {
        system: Ident,
        operators: Vec<Item>,
        records: Vec<Ident>,
    },
    /// `luders on S { label: P, ... } records (r1, ...)`
    Luders {
        system: Ident,
        projectors: Vec<Item>,
        records: Vec<Ident>,
    },
}

fn write_calibrate(f: &mut Formatter<'_>, cal: &[(Label, Ident)]) -> fmt::Result {
    if cal.is_empty() {
        return Ok(());
    }
    f.write_str(" calibrate {")?;
    for (i, (l, k)) in cal.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, " {l}: {k}")?;
    }
    f.write_str(" }")
}

impl Display for ModelDef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            ModelDef::Projective { pairs, pointer } => {
                f.write_str("projective {")?;
                for (i, (s, phi)) in pairs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, " {s} -> {phi}")?;
                }
                f.write_str(" } pointer ")?;
                write_list(f, "{ ", pointer, " }")
            }
            ModelDef::Isometry {
                isometry,
                pointer,
                calibrate,
            } => {
                write!(f, "isometry {isometry} pointer ")?;
                write_list(f, "{ ", pointer, " }")?;
                write_calibrate(f, calibrate)
            }
            ModelDef::Unitary {
                unitary,
                system,
                ready,
                pointer,
                calibrate,
            } => {
                write!(f, "unitary {unitary} on {system} ready {ready} pointer ")?;
                write_list(f, "{ ", pointer, " }")?;
                write_calibrate(f, calibrate)
            }
            ModelDef::Kraus {
                system,
                operators,
                records,
            } => {
                write!(f, "kraus on {system} ")?;
                write_list(f, "{ ", operators, " }")?;
                write_list(f, " records ( ", records, " )")
            }
            ModelDef::Luders {
                system,
                projectors,
                records,
            } => {
                write!(f, "luders on {system} ")?;
                write_list(f, "{ ", projectors, " }")?;
                write_list(f, " records ( ", records, " )")
            }
        }
    }
}

/// `time [= label]`; a missing label enumerates every label at that time.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternEntry {
    pub time: Ident,
    pub label: Option<Label>,
}

impl Display for PatternEntry {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.label {
            Some(l) => write!(f, "{} = {l}", self.time),
            None => write!(f, "{}", self.time),
        }
    }
}

/// Coarse-graining of pointer labels onto one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub value: Expr,
    pub patterns: Vec<Label>,
}

impl Display for GroupSpec {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.value)?;
        match self.patterns.as_slice() {
            [one] => write!(f, "{one}"),
            many => write_list(f, "( ", many, " )"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryDef {
    Consistency {
        family: Ident,
    },
    Probabilities {
        family: Ident,
        keep: Vec<Ident>,
        unchecked: bool,
    },
    Conditional {
        family: Ident,
        given: Vec<PatternEntry>,
        target: Vec<PatternEntry>,
    },
    Povm {
        model: Ident,
    },
    Inference {
        model: Ident,
        initial: Initial,
    },
    Noncontextuality {
        first: Ident,
        second: Ident,
        observable: Ident,
        probes: Vec<Ident>,
        groups: Vec<GroupSpec>,
    },
}

impl QueryDef {
    pub fn kind(&self) -> &'static str {
        match self {
            QueryDef::Consistency { .. } => "consistency",
            QueryDef::Probabilities { .. } => "probabilities",
            QueryDef::Conditional { .. } => "conditional",
            QueryDef::Povm { .. } => "povm",
            QueryDef::Inference { .. } => "inference",
            QueryDef::Noncontextuality { .. } => "noncontextuality",
        }
    }
}

impl Display for QueryDef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())?;
        match self {
            QueryDef::Consistency { family } => write!(f, " {family}"),
            QueryDef::Probabilities {
                family,
                keep,
                unchecked,
            } => {
                write!(f, " {family}")?;
                if !keep.is_empty() {
                    write_list(f, " keep ( ", keep, " )")?;
                }
                if *unchecked {
                    f.write_str(" unchecked")?;
                }
                Ok(())
            }
            QueryDef::Conditional { family, given, target } => {
                write!(f, " {family}")?;
                write_list(f, " given ", given, "")?;
                if !target.is_empty() {
                    write_list(f, " target ", target, "")?;
                }
                Ok(())
            }
            QueryDef::Povm { model } => write!(f, " {model}"),
            QueryDef::Inference { model, initial } => write!(f, " {model} from {initial}"),
            QueryDef::Noncontextuality {
                first,
                second,
                observable,
                probes,
                groups,
            } => {
                write!(f, " ( {first}, {second} ) observable {observable}")?;
                write_list(f, " probes ( ", probes, " )")?;
                write_list(f, " groups { ", groups, " }")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Space {
        name: Ident,
        def: SpaceDef,
        span: Span,
    },
    Let {
        name: Ident,
        value: Expr,
        span: Span,
    },
    Ket {
        name: Ident,
        space: Ident,
        value: Expr,
        span: Span,
    },
    Operator {
        name: Ident,
        space: Ident,
        value: Expr,
        span: Span,
    },
    Isometry {
        name: Ident,
        from: Ident,
        to: Ident,
        value: Expr,
        span: Span,
    },
    Model {
        name: Ident,
        def: ModelDef,
        span: Span,
    },
    Family {
        name: Ident,
        initial: Initial,
        slots: Vec<Slot>,
        via: Vec<Expr>,
        span: Span,
    },
    Query {
        id: Option<Ident>,
        def: QueryDef,
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Space { span, .. }
            | Stmt::Let { span, .. }
            | Stmt::Ket { span, .. }
            | Stmt::Operator { span, .. }
            | Stmt::Isometry { span, .. }
            | Stmt::Model { span, .. }
            | Stmt::Family { span, .. }
            | Stmt::Query { span, .. } => *span,
        }
    }
}

impl Display for Stmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Space { name, def, .. } => match def {
                SpaceDef::Dim(d) => write!(f, "space {name} dim {d};"),
                SpaceDef::Product(fs) => {
                    write!(f, "space {name} = ")?;
                    for (i, s) in fs.iter().enumerate() {
                        if i > 0 {
                            f.write_str(" (x) ")?;
                        }
                        write!(f, "{s}")?;
                    }
                    f.write_str(";")
                }
            },
            Stmt::Let { name, value, .. } => write!(f, "let {name} = {value};"),
            Stmt::Ket { name, space, value, .. } => write!(f, "ket {name} in {space} = {value};"),
            Stmt::Operator { name, space, value, .. } => write!(f, "operator {name} on {space} = {value};"),
            Stmt::Isometry {
                name, from, to, value, ..
            } => write!(f, "isometry {name} from {from} to {to} = {value};"),
            Stmt::Model { name, def, .. } => write!(f, "model {name} = {def};"),
            Stmt::Family {
                name,
                initial,
                slots,
                via,
                ..
            } => {
                write!(f, "family {name} = {initial}")?;
                for s in slots {
                    write!(f, " (.) {s}")?;
                }
                if !via.is_empty() {
                    write_list(f, " via ( ", via, " )")?;
                }
                f.write_str(";")
            }
            Stmt::Query { id, def, .. } => match id {
                Some(id) => write!(f, "query {id}: {def};"),
                None => write!(f, "query {def};"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub statements: Vec<Stmt>,
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
