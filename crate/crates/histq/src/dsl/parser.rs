use super::ast::*;
use super::error::ParseError;
use super::lexer::{tokenize, Span, Tok, Token};

const MAX_DEPTH: usize = 64;
const STATEMENT_START: &[&str] = &[
    "space", "let", "ket", "operator", "isometry", "model", "family", "query",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

fn quoted(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| format!("`{w}`")).collect()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<String>) -> ParseError {
        ParseError::new(self.span(), expected, self.peek().describe())
    }

    fn check(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.check(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if self.check(&t) {
            Ok(self.advance().span)
        } else {
            Err(self.error(vec![format!("`{}`", t.symbol())]))
        }
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.at_word(w) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<Span> {
        if self.at_word(w) {
            Ok(self.advance().span)
        } else {
            Err(self.error(quoted(&[w])))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.advance().span;
                Ok(Ident { name, span })
            }
            _ => Err(self.error(vec!["identifier".into()])),
        }
    }

    fn label(&mut self) -> PResult<Label> {
        match self.peek().clone() {
            Tok::Ident(text) | Tok::Str(text) => {
                let span = self.advance().span;
                Ok(Label { text, span })
            }
            _ => Err(self.error(vec!["identifier".into(), "string".into()])),
        }
    }

    /// `open item (, item)* close`
    fn delimited<T>(
        &mut self,
        open: Tok,
        close: Tok,
        mut item: impl FnMut(&mut Self) -> PResult<T>,
    ) -> PResult<Vec<T>> {
        self.expect(open)?;
        let mut out = vec![item(self)?];
        while self.eat(&Tok::Comma) {
            out.push(item(self)?);
        }
        if self.check(&close) {
            self.advance();
            Ok(out)
        } else {
            Err(self.error(vec!["`,`".into(), format!("`{}`", close.symbol())]))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::new(
                self.span(),
                vec![format!("at most {MAX_DEPTH} levels of nesting")],
                "deeper nesting".into(),
            ));
        }
        Ok(())
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            let span = self.advance().span;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs), span);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.tensor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            let span = self.advance().span;
            let rhs = self.tensor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn tensor(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while self.check(&Tok::Tensor) {
            let span = self.advance().span;
            let rhs = self.unary()?;
            lhs = Expr::Binary(BinOp::Tensor, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.check(&Tok::Minus) {
            let span = self.advance().span;
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner), span));
        }
        let mut e = self.primary()?;
        while self.check(&Tok::Dagger) {
            let span = self.advance().span;
            e = Expr::Dagger(Box::new(e), span);
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(x) => {
                self.advance();
                Ok(Expr::Number(x, span))
            }
            Tok::Ident(name) => {
                let id = self.ident()?;
                match name.as_str() {
                    "i" => Ok(Expr::Imag(span)),
                    "pi" => Ok(Expr::Pi(span)),
                    "omega" => Ok(Expr::Omega(span)),
                    "sqrt" => {
                        self.expect(Tok::LParen)?;
                        let e = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Sqrt(Box::new(e), span))
                    }
                    "I" => {
                        self.expect(Tok::LParen)?;
                        let s = self.ident()?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Identity(s))
                    }
                    _ => Ok(Expr::Var(id)),
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                // `[[a, b]]` is a one-row matrix, `[([a, b])]` the projector onto a literal ket
                let mut bare_list = false;
                let mut items = self.delimited(Tok::LBracket, Tok::RBracket, |p| {
                    bare_list = p.check(&Tok::LBracket);
                    p.expr()
                })?;
                if items.len() == 1 && !(bare_list && matches!(items[0], Expr::List(..))) {
                    Ok(Expr::Proj(Box::new(items.remove(0)), span))
                } else {
                    Ok(Expr::List(items, span))
                }
            }
            Tok::Bar => {
                self.advance();
                let a = self.ident()?;
                self.expect(Tok::KetBra)?;
                let b = self.ident()?;
                self.expect(Tok::Bar)?;
                Ok(Expr::Dyad(a, b))
            }
            _ => Err(self.error(vec![
                "number".into(),
                "identifier".into(),
                "`(`".into(),
                "`[`".into(),
                "`|`".into(),
                "`-`".into(),
            ])),
        }
    }

    fn item(&mut self) -> PResult<Item> {
        match self.peek().clone() {
            Tok::Str(_) => {
                let l = self.label()?;
                self.expect(Tok::Colon)?;
                Ok(Item::Labeled(l, self.expr()?))
            }
            Tok::Ident(_) if self.peek_at(1) == &Tok::Colon => {
                let l = self.label()?;
                self.advance();
                Ok(Item::Labeled(l, self.expr()?))
            }
            Tok::Ident(_) => Ok(Item::Named(self.ident()?)),
            _ => Err(self.error(vec!["identifier".into(), "string".into()])),
        }
    }

    fn items(&mut self) -> PResult<Vec<Item>> {
        self.delimited(Tok::LBrace, Tok::RBrace, Self::item)
    }

    fn event_set(&mut self) -> PResult<EventSet> {
        if self.at_word("outcomes") && self.peek_at(1) == &Tok::LParen {
            self.advance();
            self.advance();
            let m = self.ident()?;
            self.expect(Tok::RParen)?;
            return Ok(EventSet::Outcomes(m));
        }
        if !self.check(&Tok::LBrace) {
            return Err(self.error(vec!["`{`".into(), "`outcomes`".into()]));
        }
        let span = self.span();
        Ok(EventSet::Items(self.items()?, span))
    }

    fn slot(&mut self) -> PResult<Slot> {
        if self.at_word("linked") && self.peek_at(1) == &Tok::LParen {
            self.advance();
            self.advance();
            let model = self.ident()?;
            self.expect(Tok::RParen)?;
            let branches = self.delimited(Tok::LBrace, Tok::RBrace, |p| {
                let l = p.label()?;
                p.expect(Tok::Colon)?;
                Ok((l, p.event_set()?))
            })?;
            return Ok(Slot::Linked { model, branches });
        }
        let mut sets = vec![self.event_set()?];
        while self.eat(&Tok::Tensor) {
            sets.push(self.event_set()?);
        }
        Ok(Slot::Product(sets))
    }

    fn initial(&mut self) -> PResult<Initial> {
        if self.at_word("ensemble") && self.peek_at(1) == &Tok::LBrace {
            let span = self.advance().span;
            let members = self.delimited(Tok::LBrace, Tok::RBrace, |p| {
                let w = p.expr()?;
                p.expect(Tok::Colon)?;
                Ok((w, p.expr()?))
            })?;
            return Ok(Initial::Ensemble(members, span));
        }
        Ok(Initial::State(self.expr()?))
    }

    fn calibrate(&mut self) -> PResult<Vec<(Label, Ident)>> {
        if !self.eat_word("calibrate") {
            return Ok(Vec::new());
        }
        self.delimited(Tok::LBrace, Tok::RBrace, |p| {
            let l = p.label()?;
            p.expect(Tok::Colon)?;
            Ok((l, p.ident()?))
        })
    }

    fn records(&mut self) -> PResult<Vec<Ident>> {
        self.expect_word("records")?;
        self.delimited(Tok::LParen, Tok::RParen, Self::ident)
    }

    fn model_def(&mut self) -> PResult<ModelDef> {
        let kinds = ["projective", "isometry", "unitary", "kraus", "luders"];
        let Tok::Ident(word) = self.peek().clone() else {
            return Err(self.error(quoted(&kinds)));
        };
        match word.as_str() {
            "projective" => {
                self.advance();
                let pairs = self.delimited(Tok::LBrace, Tok::RBrace, |p| {
                    let s = p.ident()?;
                    p.expect(Tok::Arrow)?;
                    Ok((s, p.ident()?))
                })?;
                self.expect_word("pointer")?;
                let pointer = self.items()?;
                Ok(ModelDef::Projective { pairs, pointer })
            }
            "isometry" => {
                self.advance();
                let isometry = self.ident()?;
                self.expect_word("pointer")?;
                let pointer = self.items()?;
                let calibrate = self.calibrate()?;
                Ok(ModelDef::Isometry {
                    isometry,
                    pointer,
                    calibrate,
                })
            }
            "unitary" => {
                self.advance();
                let unitary = self.ident()?;
                self.expect_word("on")?;
                let system = self.ident()?;
                self.expect_word("ready")?;
                let ready = self.ident()?;
                self.expect_word("pointer")?;
                let pointer = self.items()?;
                let calibrate = self.calibrate()?;
                Ok(ModelDef::Unitary {
                    unitary,
                    system,
                    ready,
                    pointer,
                    calibrate,
                })
            }
            "kraus" | "luders" => {
                self.advance();
                self.expect_word("on")?;
                let system = self.ident()?;
                let ops = self.items()?;
                let records = self.records()?;
                Ok(if word == "kraus" {
                    ModelDef::Kraus {
                        system,
                        operators: ops,
                        records,
                    }
                } else {
                    ModelDef::Luders {
                        system,
                        projectors: ops,
                        records,
                    }
                })
            }
            _ => Err(self.error(quoted(&kinds))),
        }
    }

    fn pattern(&mut self) -> PResult<Vec<PatternEntry>> {
        let mut out = Vec::new();
        loop {
            let time = self.ident()?;
            let label = if self.eat(&Tok::Eq) { Some(self.label()?) } else { None };
            out.push(PatternEntry { time, label });
            if !self.eat(&Tok::Comma) {
                return Ok(out);
            }
        }
    }

    fn group(&mut self) -> PResult<GroupSpec> {
        let value = self.expr()?;
        self.expect(Tok::Colon)?;
        let patterns = if self.check(&Tok::LParen) {
            self.delimited(Tok::LParen, Tok::RParen, Self::label)?
        } else {
            vec![self.label()?]
        };
        Ok(GroupSpec { value, patterns })
    }

    fn query_def(&mut self) -> PResult<QueryDef> {
        let kinds = [
            "consistency",
            "probabilities",
            "conditional",
            "povm",
            "inference",
            "noncontextuality",
        ];
        let Tok::Ident(word) = self.peek().clone() else {
            return Err(self.error(quoted(&kinds)));
        };
        match word.as_str() {
            "consistency" => {
                self.advance();
                Ok(QueryDef::Consistency { family: self.ident()? })
            }
            "probabilities" => {
                self.advance();
                let family = self.ident()?;
                let keep = if self.eat_word("keep") {
                    self.delimited(Tok::LParen, Tok::RParen, Self::ident)?
                } else {
                    Vec::new()
                };
                let unchecked = self.eat_word("unchecked");
                Ok(QueryDef::Probabilities {
                    family,
                    keep,
                    unchecked,
                })
            }
            "conditional" => {
                self.advance();
                let family = self.ident()?;
                self.expect_word("given")?;
                let given = self.pattern()?;
                let target = if self.eat_word("target") {
                    self.pattern()?
                } else {
                    Vec::new()
                };
                Ok(QueryDef::Conditional { family, given, target })
            }
            "povm" => {
                self.advance();
                Ok(QueryDef::Povm { model: self.ident()? })
            }
            "inference" => {
                self.advance();
                let model = self.ident()?;
                self.expect_word("from")?;
                Ok(QueryDef::Inference {
                    model,
                    initial: self.initial()?,
                })
            }
            "noncontextuality" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let first = self.ident()?;
                self.expect(Tok::Comma)?;
                let second = self.ident()?;
                self.expect(Tok::RParen)?;
                self.expect_word("observable")?;
                let observable = self.ident()?;
                self.expect_word("probes")?;
                let probes = self.delimited(Tok::LParen, Tok::RParen, Self::ident)?;
                self.expect_word("groups")?;
                let groups = self.delimited(Tok::LBrace, Tok::RBrace, Self::group)?;
                Ok(QueryDef::Noncontextuality {
                    first,
                    second,
                    observable,
                    probes,
                    groups,
                })
            }
            _ => Err(self.error(quoted(&kinds))),
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let Tok::Ident(word) = self.peek().clone() else {
            return Err(self.error(quoted(STATEMENT_START)));
        };
        let stmt = match word.as_str() {
            "space" => {
                self.advance();
                let name = self.ident()?;
                let def = if self.eat_word("dim") {
                    match *self.peek() {
                        Tok::Number(x) if x >= 1.0 && x.fract() == 0.0 && x <= 1e9 => {
                            self.advance();
                            SpaceDef::Dim(x as usize)
                        }
                        _ => return Err(self.error(vec!["positive integer".into()])),
                    }
                } else if self.eat(&Tok::Eq) {
                    let mut fs = vec![self.ident()?];
                    while self.eat(&Tok::Tensor) {
                        fs.push(self.ident()?);
                    }
                    SpaceDef::Product(fs)
                } else {
                    return Err(self.error(vec!["`dim`".into(), "`=`".into()]));
                };
                Stmt::Space { name, def, span }
            }
            "let" => {
                self.advance();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                Stmt::Let {
                    name,
                    value: self.expr()?,
                    span,
                }
            }
            "ket" | "operator" => {
                self.advance();
                let name = self.ident()?;
                self.expect_word(if word == "ket" { "in" } else { "on" })?;
                let space = self.ident()?;
                self.expect(Tok::Eq)?;
                let value = self.expr()?;
                if word == "ket" {
                    Stmt::Ket {
                        name,
                        space,
                        value,
                        span,
                    }
                } else {
                    Stmt::Operator {
                        name,
                        space,
                        value,
                        span,
                    }
                }
            }
            "isometry" => {
                self.advance();
                let name = self.ident()?;
                self.expect_word("from")?;
                let from = self.ident()?;
                self.expect_word("to")?;
                let to = self.ident()?;
                self.expect(Tok::Eq)?;
                Stmt::Isometry {
                    name,
                    from,
                    to,
                    value: self.expr()?,
                    span,
                }
            }
            "model" => {
                self.advance();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                Stmt::Model {
                    name,
                    def: self.model_def()?,
                    span,
                }
            }
            "family" => {
                self.advance();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                let initial = self.initial()?;
                let mut slots = Vec::new();
                if !self.check(&Tok::Odot) {
                    return Err(self.error(vec!["`(.)`".into()]));
                }
                while self.eat(&Tok::Odot) {
                    slots.push(self.slot()?);
                }
                let via = if self.eat_word("via") {
                    self.delimited(Tok::LParen, Tok::RParen, Self::expr)?
                } else {
                    Vec::new()
                };
                Stmt::Family {
                    name,
                    initial,
                    slots,
                    via,
                    span,
                }
            }
            "query" => {
                self.advance();
                let id = if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Colon {
                    let id = self.ident()?;
                    self.advance();
                    Some(id)
                } else {
                    None
                };
                Stmt::Query {
                    id,
                    def: self.query_def()?,
                    span,
                }
            }
            _ => return Err(self.error(quoted(STATEMENT_START))),
        };
        if !self.check(&Tok::Semi) {
            return Err(self.error(vec!["`;`".into()]));
        }
        self.advance();
        Ok(stmt)
    }
}

/// Parses a scenario document into its syntax tree.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let mut statements = Vec::new();
    while !p.check(&Tok::Eof) {
        statements.push(p.statement()?);
    }
    Ok(Program { statements })
}

/// Parses a single expression; used by tests and tooling.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let e = p.expr()?;
    if !p.check(&Tok::Eof) {
        return Err(p.error(vec!["end of input".into()]));
    }
    Ok(e)
}
