//! The diagram description language: lexer, recursive-descent parser,
//! abstract syntax and a canonical printer.
//!
//! Statements end with `;`; blocks use braces.  Complex literals are
//! written `a`, `a+bi`, `a-bi` or `bi`; matrices are bracketed rows of
//! complex literals; algebra elements are bracketed lists of per-block
//! matrices.  Arrow references are bare identifiers or quoted strings
//! (quoting is needed for generated names like "0->1").

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum DslError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("name error: {0}")]
    Name(String),
}

pub type Complex = (f64, f64);
pub type Matrix = Vec<Vec<Complex>>;
/// One matrix per block of the target algebra.
pub type ElementLit = Vec<Matrix>;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Discrete(usize),
    Pushout,
    Coequalizer,
    Endo,
    FreeMonoid(usize),
    Chain {
        len: usize,
        stabilized_from: Option<usize>,
    },
    Group {
        elements: Vec<String>,
        unit: String,
        table: Vec<(String, String, String)>,
    },
    Category {
        objects: Vec<String>,
        arrows: Vec<(String, String, String)>,
        compose: Vec<(String, String, String)>,
        twoarrows: Vec<(String, String, String)>,
        vcompose: Vec<(String, String, String)>,
        strict2: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrExpr {
    Std(usize),
    Ident(String),
    FromHom(String),
    FromExpectation(String, String),
    Module {
        mults: Vec<usize>,
        acts: Vec<ActEntry>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: ElementLit,
}

/// An `act e[b,r,c] = [...]` line: the module operator of a source matrix
/// unit, one multiplicity matrix per target block.
#[derive(Debug, Clone, PartialEq)]
pub struct ActEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub name: String,
    /// `(label, blocks)` of the cone vertex; absent for endo-transformations.
    pub vertex: Option<(String, Vec<usize>)>,
    pub gammas: Vec<(String, CorrExpr)>,
    pub vees: Vec<(String, Matrix)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Shape(ShapeSpec),
    Algebra {
        name: String,
        blocks: Vec<usize>,
    },
    Hom {
        name: String,
        src: String,
        dst: String,
        entries: Vec<HomEntry>,
    },
    Expectation {
        name: String,
        src: String,
        dst: String,
        entries: Vec<HomEntry>,
    },
    Corr {
        name: String,
        on: Option<String>,
        src: String,
        dst: String,
        expr: CorrExpr,
    },
    Mult {
        g: String,
        h: String,
        matrix: Matrix,
    },
    TwoArrowIso {
        name: String,
        matrix: Matrix,
    },
    Cone(ConeBlock),
    Transformation(ConeBlock),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DslDocument {
    pub stmts: Vec<Stmt>,
}

// ---------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Punct(&'static str),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn tokens(mut self) -> Result<Vec<Token>, DslError> {
        let mut out = Vec::new();
        loop {
            // Skip whitespace and comments.
            loop {
                match self.peek() {
                    Some(c) if c.is_ascii_whitespace() => {
                        self.bump();
                    }
                    Some(b'#') => {
                        while let Some(c) = self.peek() {
                            if c == b'\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    Some(b'/') if self.peek2() == Some(b'/') => {
                        while let Some(c) = self.peek() {
                            if c == b'\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else { break };
            let tok = match c {
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == b'_' || c == b'\'' {
                            s.push(self.bump().unwrap() as char);
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                b'"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some(b'"') => break,
                            Some(c) => s.push(c as char),
                            None => {
                                return Err(DslError::Parse {
                                    line,
                                    col,
                                    msg: "unterminated string".into(),
                                })
                            }
                        }
                    }
                    Tok::Str(s)
                }
                b'0'..=b'9' | b'.' => {
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_ascii_digit() || c == b'.' {
                            s.push(self.bump().unwrap() as char);
                        } else if (c == b'e' || c == b'E')
                            && s.chars().last().is_some_and(|l| l.is_ascii_digit())
                        {
                            s.push(self.bump().unwrap() as char);
                            if let Some(sign @ (b'+' | b'-')) = self.peek() {
                                s.push(sign as char);
                                self.bump();
                            }
                        } else {
                            break;
                        }
                    }
                    let v: f64 = s.parse().map_err(|_| DslError::Parse {
                        line,
                        col,
                        msg: format!("bad number literal {s}"),
                    })?;
                    Tok::Num(v)
                }
                b'-' if self.peek2() == Some(b'>') => {
                    self.bump();
                    self.bump();
                    Tok::Punct("->")
                }
                b'=' if self.peek2() == Some(b'>') => {
                    self.bump();
                    self.bump();
                    Tok::Punct("=>")
                }
                _ => {
                    let c = self.bump().unwrap();
                    let p = match c {
                        b';' => ";",
                        b':' => ":",
                        b',' => ",",
                        b'(' => "(",
                        b')' => ")",
                        b'[' => "[",
                        b']' => "]",
                        b'{' => "{",
                        b'}' => "}",
                        b'=' => "=",
                        b'+' => "+",
                        b'-' => "-",
                        b'*' => "*",
                        b'.' => ".",
                        _ => {
                            return Err(DslError::Parse {
                                line,
                                col,
                                msg: format!("unexpected character {:?}", c as char),
                            })
                        }
                    };
                    Tok::Punct(p)
                }
            };
            out.push(Token { tok, line, col });
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------
// Parser

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or_else(|| {
                self.toks
                    .last()
                    .map(|t| (t.line, t.col + 1))
                    .unwrap_or((1, 1))
            });
        Err(DslError::Parse {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> Result<(), DslError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            other => self.err(format!("expected {p:?}, found {other:?}")),
        }
    }

    fn try_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other:?}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            other => self.err(format!("expected {kw:?}, found {other:?}")),
        }
    }

    fn try_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn usize_lit(&mut self) -> Result<usize, DslError> {
        match self.peek() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && *v >= 0.0 => {
                let v = *v as usize;
                self.pos += 1;
                Ok(v)
            }
            other => self.err(format!("expected a nonnegative integer, found {other:?}")),
        }
    }

    /// Arrow or element reference: identifier, quoted string or integer.
    fn name_ref(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(Tok::Num(v)) if v.fract() == 0.0 && *v >= 0.0 => {
                let s = format!("{}", *v as usize);
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected a name, found {other:?}")),
        }
    }

    fn complex(&mut self) -> Result<Complex, DslError> {
        let sign = if self.try_punct("-") { -1.0 } else { 1.0 };
        let first = match self.next() {
            Some(Tok::Num(v)) => sign * v,
            other => return self.err(format!("expected a number, found {other:?}")),
        };
        // `<num> i` is a pure imaginary literal.
        if self.try_keyword("i") {
            return Ok((0.0, first));
        }
        if self.try_punct("+") {
            let im = match self.next() {
                Some(Tok::Num(v)) => v,
                other => return self.err(format!("expected a number, found {other:?}")),
            };
            self.keyword("i")?;
            return Ok((first, im));
        }
        if matches!(self.peek(), Some(Tok::Punct("-"))) {
            // Only consume when followed by `<num> i` (imaginary part).
            if let (Some(Tok::Num(v)), Some(Tok::Ident(s))) = (
                self.toks.get(self.pos + 1).map(|t| &t.tok),
                self.toks.get(self.pos + 2).map(|t| &t.tok),
            ) {
                if s == "i" {
                    let v = *v;
                    self.pos += 3;
                    return Ok((first, -v));
                }
            }
        }
        Ok((first, 0.0))
    }

    fn matrix(&mut self) -> Result<Matrix, DslError> {
        self.eat_punct("[")?;
        let mut rows = Vec::new();
        if self.try_punct("]") {
            return Ok(rows);
        }
        loop {
            self.eat_punct("[")?;
            let mut row = Vec::new();
            if !self.try_punct("]") {
                loop {
                    row.push(self.complex()?);
                    if self.try_punct("]") {
                        break;
                    }
                    self.eat_punct(",")?;
                }
            }
            rows.push(row);
            if self.try_punct("]") {
                break;
            }
            self.eat_punct(",")?;
        }
        Ok(rows)
    }

    fn element(&mut self) -> Result<ElementLit, DslError> {
        self.eat_punct("[")?;
        let mut mats = Vec::new();
        if self.try_punct("]") {
            return Ok(mats);
        }
        loop {
            mats.push(self.matrix()?);
            if self.try_punct("]") {
                break;
            }
            self.eat_punct(",")?;
        }
        Ok(mats)
    }

    fn int_list(&mut self) -> Result<Vec<usize>, DslError> {
        self.eat_punct("[")?;
        let mut out = Vec::new();
        if self.try_punct("]") {
            return Ok(out);
        }
        loop {
            out.push(self.usize_lit()?);
            if self.try_punct("]") {
                break;
            }
            self.eat_punct(",")?;
        }
        Ok(out)
    }

    fn unit_index(&mut self) -> Result<(usize, usize, usize), DslError> {
        self.keyword("e")?;
        self.eat_punct("[")?;
        let b = self.usize_lit()?;
        self.eat_punct(",")?;
        let r = self.usize_lit()?;
        self.eat_punct(",")?;
        let c = self.usize_lit()?;
        self.eat_punct("]")?;
        Ok((b, r, c))
    }

    fn hom_entries(&mut self) -> Result<Vec<HomEntry>, DslError> {
        self.eat_punct("{")?;
        let mut entries = Vec::new();
        while !self.try_punct("}") {
            let (block, row, col) = self.unit_index()?;
            self.eat_punct("=")?;
            let value = self.element()?;
            self.eat_punct(";")?;
            entries.push(HomEntry {
                block,
                row,
                col,
                value,
            });
        }
        Ok(entries)
    }

    fn corr_expr(&mut self) -> Result<CorrExpr, DslError> {
        if self.try_keyword("std") {
            self.eat_punct("(")?;
            let n = self.usize_lit()?;
            self.eat_punct(")")?;
            return Ok(CorrExpr::Std(n));
        }
        if self.try_keyword("ident") {
            self.eat_punct("(")?;
            let a = self.ident()?;
            self.eat_punct(")")?;
            return Ok(CorrExpr::Ident(a));
        }
        if self.try_keyword("from_hom") {
            self.eat_punct("(")?;
            let h = self.ident()?;
            self.eat_punct(")")?;
            return Ok(CorrExpr::FromHom(h));
        }
        if self.try_keyword("from_expectation") {
            self.eat_punct("(")?;
            let incl = self.ident()?;
            self.eat_punct(",")?;
            let exp = self.ident()?;
            self.eat_punct(")")?;
            return Ok(CorrExpr::FromExpectation(incl, exp));
        }
        if self.try_keyword("module") {
            self.eat_punct("{")?;
            self.keyword("mults")?;
            self.eat_punct("=")?;
            let mults = self.int_list()?;
            self.eat_punct(";")?;
            let mut acts = Vec::new();
            while !self.try_punct("}") {
                self.keyword("act")?;
                let (block, row, col) = self.unit_index()?;
                self.eat_punct("=")?;
                let value = self.element()?;
                self.eat_punct(";")?;
                acts.push(ActEntry {
                    block,
                    row,
                    col,
                    value,
                });
            }
            return Ok(CorrExpr::Module { mults, acts });
        }
        self.err("expected a correspondence expression")
    }

    fn shape_spec(&mut self) -> Result<ShapeSpec, DslError> {
        if self.try_keyword("discrete") {
            self.eat_punct("(")?;
            let n = self.usize_lit()?;
            self.eat_punct(")")?;
            return Ok(ShapeSpec::Discrete(n));
        }
        if self.try_keyword("pushout") {
            return Ok(ShapeSpec::Pushout);
        }
        if self.try_keyword("coequalizer") {
            return Ok(ShapeSpec::Coequalizer);
        }
        if self.try_keyword("endo") {
            return Ok(ShapeSpec::Endo);
        }
        if self.try_keyword("free_monoid") {
            self.eat_punct("(")?;
            let k = self.usize_lit()?;
            self.eat_punct(")")?;
            return Ok(ShapeSpec::FreeMonoid(k));
        }
        if self.try_keyword("chain") {
            self.eat_punct("(")?;
            let len = self.usize_lit()?;
            let stabilized_from = if self.try_punct(",") {
                self.keyword("stabilized_from")?;
                self.eat_punct("=")?;
                Some(self.usize_lit()?)
            } else {
                None
            };
            self.eat_punct(")")?;
            return Ok(ShapeSpec::Chain {
                len,
                stabilized_from,
            });
        }
        if self.try_keyword("group") {
            self.eat_punct("{")?;
            self.keyword("elements")?;
            let mut elements = Vec::new();
            while !matches!(self.peek(), Some(Tok::Punct(";"))) {
                elements.push(self.ident()?);
            }
            self.eat_punct(";")?;
            self.keyword("unit")?;
            let unit = self.ident()?;
            self.eat_punct(";")?;
            self.keyword("table")?;
            self.eat_punct(":")?;
            let mut table = Vec::new();
            while !self.try_punct("}") {
                let a = self.ident()?;
                self.eat_punct("*")?;
                let b = self.ident()?;
                self.eat_punct("=")?;
                let c = self.ident()?;
                self.eat_punct(";")?;
                table.push((a, b, c));
            }
            return Ok(ShapeSpec::Group {
                elements,
                unit,
                table,
            });
        }
        let strict2 = if self.try_keyword("two_category") {
            true
        } else if self.try_keyword("category") {
            false
        } else {
            return self.err("expected a shape specification");
        };
        self.eat_punct("{")?;
        self.keyword("objects")?;
        let mut objects = Vec::new();
        while !matches!(self.peek(), Some(Tok::Punct(";"))) {
            objects.push(self.ident()?);
        }
        self.eat_punct(";")?;
        self.keyword("arrows")?;
        let mut arrows = Vec::new();
        while !matches!(self.peek(), Some(Tok::Punct(";"))) {
            let name = self.ident()?;
            self.eat_punct(":")?;
            let src = self.ident()?;
            self.eat_punct("->")?;
            let dst = self.ident()?;
            if !matches!(self.peek(), Some(Tok::Punct(";"))) {
                self.eat_punct(",")?;
            }
            arrows.push((name, src, dst));
        }
        self.eat_punct(";")?;
        let mut compose = Vec::new();
        if self.try_keyword("compose") {
            self.eat_punct(":")?;
            while matches!(self.peek(), Some(Tok::Ident(_))) {
                let g = self.ident()?;
                self.keyword("o")?;
                let h = self.ident()?;
                self.eat_punct("=")?;
                let gh = self.ident()?;
                self.eat_punct(";")?;
                compose.push((g, h, gh));
            }
        }
        let mut twoarrows = Vec::new();
        let mut vcompose = Vec::new();
        if strict2 {
            self.keyword("twoarrows")?;
            while !matches!(self.peek(), Some(Tok::Punct(";"))) {
                let name = self.ident()?;
                self.eat_punct(":")?;
                let src = self.ident()?;
                self.eat_punct("=>")?;
                let dst = self.ident()?;
                if !matches!(self.peek(), Some(Tok::Punct(";"))) {
                    self.eat_punct(",")?;
                }
                twoarrows.push((name, src, dst));
            }
            self.eat_punct(";")?;
            if self.try_keyword("vcompose") {
                self.eat_punct(":")?;
                while matches!(self.peek(), Some(Tok::Ident(_))) {
                    let b = self.ident()?;
                    self.eat_punct(".")?;
                    let a = self.ident()?;
                    self.eat_punct("=")?;
                    let c = self.ident()?;
                    self.eat_punct(";")?;
                    vcompose.push((b, a, c));
                }
            }
        }
        self.eat_punct("}")?;
        Ok(ShapeSpec::Category {
            objects,
            arrows,
            compose,
            twoarrows,
            vcompose,
            strict2,
        })
    }

    fn cone_block(&mut self, with_vertex: bool) -> Result<ConeBlock, DslError> {
        let name = self.ident()?;
        self.eat_punct("{")?;
        let mut vertex = None;
        let mut gammas = Vec::new();
        let mut vees = Vec::new();
        while !self.try_punct("}") {
            if self.try_keyword("algebra") {
                if !with_vertex {
                    return self.err("transformations have no vertex algebra");
                }
                let label = self.ident()?;
                self.eat_punct("=")?;
                self.keyword("blocks")?;
                let blocks = self.int_list()?;
                self.eat_punct(";")?;
                vertex = Some((label, blocks));
            } else if self.try_keyword("gamma") {
                self.keyword("at")?;
                let object = self.name_ref()?;
                self.eat_punct("=")?;
                let expr = self.corr_expr()?;
                self.eat_punct(";")?;
                gammas.push((object, expr));
            } else if self.try_keyword("vee") {
                self.keyword("on")?;
                let arrow = self.name_ref()?;
                self.eat_punct("=")?;
                let m = self.matrix()?;
                self.eat_punct(";")?;
                vees.push((arrow, m));
            } else {
                return self.err("expected algebra, gamma or vee");
            }
        }
        Ok(ConeBlock {
            name,
            vertex,
            gammas,
            vees,
        })
    }

    fn stmt(&mut self) -> Result<Stmt, DslError> {
        if self.try_keyword("shape") {
            let spec = self.shape_spec()?;
            self.eat_punct(";")?;
            return Ok(Stmt::Shape(spec));
        }
        if self.try_keyword("algebra") {
            let name = self.ident()?;
            self.eat_punct("=")?;
            self.keyword("blocks")?;
            let blocks = self.int_list()?;
            self.eat_punct(";")?;
            return Ok(Stmt::Algebra { name, blocks });
        }
        if self.try_keyword("hom") || matches!(self.peek(), Some(Tok::Ident(s)) if s == "expectation")
        {
            let is_hom = matches!(&self.toks[self.pos - 1].tok, Tok::Ident(s) if s == "hom");
            if !is_hom {
                self.keyword("expectation")?;
            }
            let name = self.ident()?;
            self.eat_punct(":")?;
            let src = self.ident()?;
            self.eat_punct("->")?;
            let dst = self.ident()?;
            let entries = self.hom_entries()?;
            return Ok(if is_hom {
                Stmt::Hom {
                    name,
                    src,
                    dst,
                    entries,
                }
            } else {
                Stmt::Expectation {
                    name,
                    src,
                    dst,
                    entries,
                }
            });
        }
        if self.try_keyword("corr") {
            let name = self.ident()?;
            let on = if self.try_keyword("on") {
                Some(self.name_ref()?)
            } else {
                None
            };
            self.eat_punct(":")?;
            let src = self.ident()?;
            self.eat_punct("->")?;
            let dst = self.ident()?;
            self.eat_punct("=")?;
            let expr = self.corr_expr()?;
            self.eat_punct(";")?;
            return Ok(Stmt::Corr {
                name,
                on,
                src,
                dst,
                expr,
            });
        }
        if self.try_keyword("mult") {
            self.eat_punct("(")?;
            let g = self.name_ref()?;
            self.eat_punct(",")?;
            let h = self.name_ref()?;
            self.eat_punct(")")?;
            self.eat_punct("=")?;
            let matrix = self.matrix()?;
            self.eat_punct(";")?;
            return Ok(Stmt::Mult { g, h, matrix });
        }
        if self.try_keyword("viso") {
            let name = self.name_ref()?;
            self.eat_punct("=")?;
            let matrix = self.matrix()?;
            self.eat_punct(";")?;
            return Ok(Stmt::TwoArrowIso { name, matrix });
        }
        if self.try_keyword("cone") {
            return Ok(Stmt::Cone(self.cone_block(true)?));
        }
        if self.try_keyword("transformation") {
            return Ok(Stmt::Transformation(self.cone_block(false)?));
        }
        self.err("expected a statement")
    }
}

/// Parse a document; errors carry line and column.
pub fn parse_document(text: &str) -> Result<DslDocument, DslError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let mut stmts = Vec::new();
    while p.peek().is_some() {
        stmts.push(p.stmt()?);
    }
    let doc = DslDocument { stmts };
    check_unique_names(&doc)?;
    Ok(doc)
}

/// Every declared identifier must be unique within its namespace.
fn check_unique_names(doc: &DslDocument) -> Result<(), DslError> {
    let mut seen = std::collections::BTreeSet::new();
    for s in &doc.stmts {
        let key = match s {
            Stmt::Algebra { name, .. } => Some(("algebra", name.clone())),
            Stmt::Hom { name, .. } => Some(("hom", name.clone())),
            Stmt::Expectation { name, .. } => Some(("hom", name.clone())),
            Stmt::Corr { name, .. } => Some(("corr", name.clone())),
            Stmt::Cone(c) => Some(("cone", c.name.clone())),
            Stmt::Transformation(c) => Some(("cone", c.name.clone())),
            _ => None,
        };
        if let Some(k) = key {
            if !seen.insert(k.clone()) {
                return Err(DslError::Name(format!(
                    "duplicate {} name {}",
                    k.0, k.1
                )));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Printer

fn fmt_complex(z: &Complex) -> String {
    let (re, im) = *z;
    if im == 0.0 {
        format!("{re}")
    } else if re == 0.0 {
        format!("{im}i")
    } else if im < 0.0 {
        format!("{re}-{}i", -im)
    } else {
        format!("{re}+{im}i")
    }
}

fn fmt_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|r| {
            format!(
                "[{}]",
                r.iter().map(fmt_complex).collect::<Vec<_>>().join(", ")
            )
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_element(e: &ElementLit) -> String {
    format!(
        "[{}]",
        e.iter().map(fmt_matrix).collect::<Vec<_>>().join(", ")
    )
}

fn fmt_name_ref(s: &str) -> String {
    let simple = !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if simple {
        s.to_string()
    } else {
        format!("\"{s}\"")
    }
}

fn fmt_ints(v: &[usize]) -> String {
    format!(
        "[{}]",
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
    )
}

fn fmt_corr_expr(e: &CorrExpr) -> String {
    match e {
        CorrExpr::Std(n) => format!("std({n})"),
        CorrExpr::Ident(a) => format!("ident({a})"),
        CorrExpr::FromHom(h) => format!("from_hom({h})"),
        CorrExpr::FromExpectation(i, x) => format!("from_expectation({i}, {x})"),
        CorrExpr::Module { mults, acts } => {
            let mut s = format!("module {{ mults = {};", fmt_ints(mults));
            for a in acts {
                s.push_str(&format!(
                    " act e[{},{},{}] = {};",
                    a.block,
                    a.row,
                    a.col,
                    fmt_element(&a.value)
                ));
            }
            s.push_str(" }");
            s
        }
    }
}

impl fmt::Display for DslDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stmts {
            match s {
                Stmt::Shape(spec) => writeln!(f, "shape {};", fmt_shape(spec))?,
                Stmt::Algebra { name, blocks } => {
                    writeln!(f, "algebra {name} = blocks {};", fmt_ints(blocks))?
                }
                Stmt::Hom {
                    name,
                    src,
                    dst,
                    entries,
                } => {
                    writeln!(f, "hom {name} : {src} -> {dst} {{")?;
                    for e in entries {
                        writeln!(
                            f,
                            "  e[{},{},{}] = {};",
                            e.block,
                            e.row,
                            e.col,
                            fmt_element(&e.value)
                        )?;
                    }
                    writeln!(f, "}}")?;
                }
                Stmt::Expectation {
                    name,
                    src,
                    dst,
                    entries,
                } => {
                    writeln!(f, "expectation {name} : {src} -> {dst} {{")?;
                    for e in entries {
                        writeln!(
                            f,
                            "  e[{},{},{}] = {};",
                            e.block,
                            e.row,
                            e.col,
                            fmt_element(&e.value)
                        )?;
                    }
                    writeln!(f, "}}")?;
                }
                Stmt::Corr {
                    name,
                    on,
                    src,
                    dst,
                    expr,
                } => {
                    let on_s = on
                        .as_ref()
                        .map(|a| format!(" on {}", fmt_name_ref(a)))
                        .unwrap_or_default();
                    writeln!(
                        f,
                        "corr {name}{on_s} : {src} -> {dst} = {};",
                        fmt_corr_expr(expr)
                    )?;
                }
                Stmt::Mult { g, h, matrix } => writeln!(
                    f,
                    "mult ({}, {}) = {};",
                    fmt_name_ref(g),
                    fmt_name_ref(h),
                    fmt_matrix(matrix)
                )?,
                Stmt::TwoArrowIso { name, matrix } => writeln!(
                    f,
                    "viso {} = {};",
                    fmt_name_ref(name),
                    fmt_matrix(matrix)
                )?,
                Stmt::Cone(c) => fmt_cone(f, "cone", c)?,
                Stmt::Transformation(c) => fmt_cone(f, "transformation", c)?,
            }
        }
        Ok(())
    }
}

fn fmt_cone(f: &mut fmt::Formatter<'_>, kw: &str, c: &ConeBlock) -> fmt::Result {
    writeln!(f, "{kw} {} {{", c.name)?;
    if let Some((label, blocks)) = &c.vertex {
        writeln!(f, "  algebra {label} = blocks {};", fmt_ints(blocks))?;
    }
    for (obj, expr) in &c.gammas {
        writeln!(f, "  gamma at {} = {};", fmt_name_ref(obj), fmt_corr_expr(expr))?;
    }
    for (arrow, m) in &c.vees {
        writeln!(f, "  vee on {} = {};", fmt_name_ref(arrow), fmt_matrix(m))?;
    }
    writeln!(f, "}}")
}

fn fmt_shape(spec: &ShapeSpec) -> String {
    match spec {
        ShapeSpec::Discrete(n) => format!("discrete({n})"),
        ShapeSpec::Pushout => "pushout".into(),
        ShapeSpec::Coequalizer => "coequalizer".into(),
        ShapeSpec::Endo => "endo".into(),
        ShapeSpec::FreeMonoid(k) => format!("free_monoid({k})"),
        ShapeSpec::Chain {
            len,
            stabilized_from,
        } => match stabilized_from {
            Some(s) => format!("chain({len}, stabilized_from = {s})"),
            None => format!("chain({len})"),
        },
        ShapeSpec::Group {
            elements,
            unit,
            table,
        } => {
            let mut s = format!("group {{ elements {};", elements.join(" "));
            s.push_str(&format!(" unit {unit}; table:"));
            for (a, b, c) in table {
                s.push_str(&format!(" {a} * {b} = {c};"));
            }
            s.push_str(" }");
            s
        }
        ShapeSpec::Category {
            objects,
            arrows,
            compose,
            twoarrows,
            vcompose,
            strict2,
        } => {
            let kw = if *strict2 { "two_category" } else { "category" };
            let mut s = format!("{kw} {{ objects {};", objects.join(" "));
            s.push_str(" arrows ");
            s.push_str(
                &arrows
                    .iter()
                    .map(|(n, a, b)| format!("{n} : {a} -> {b}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            s.push(';');
            if !compose.is_empty() {
                s.push_str(" compose:");
                for (g, h, gh) in compose {
                    s.push_str(&format!(" {g} o {h} = {gh};"));
                }
            }
            if *strict2 {
                s.push_str(" twoarrows ");
                s.push_str(
                    &twoarrows
                        .iter()
                        .map(|(n, a, b)| format!("{n} : {a} => {b}"))
                        .collect::<Vec<_>>()
                        .join(", "),
                );
                s.push(';');
                if !vcompose.is_empty() {
                    s.push_str(" vcompose:");
                    for (b, a, c) in vcompose {
                        s.push_str(&format!(" {b} . {a} = {c};"));
                    }
                }
            }
            s.push_str(" }");
            s
        }
    }
}
