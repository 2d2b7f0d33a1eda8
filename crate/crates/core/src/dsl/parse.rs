use super::{BinOp, Expression, Node, ParseDiagnostic, UnOp, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
    text: String,
}

fn diag(offset: usize, token: &str, message: impl Into<String>) -> ParseDiagnostic {
    ParseDiagnostic {
        offset,
        token: token.to_string(),
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            i += 1;
            out.push(Token {
                tok,
                offset: start,
                text: src[start..i].to_string(),
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    return Err(diag(start, &src[start..j], "malformed exponent in number"));
                }
            }
            let text = &src[start..i];
            let value: f64 = text
                .parse()
                .map_err(|_| diag(start, text, "malformed number"))?;
            if !value.is_finite() {
                return Err(diag(start, text, "number literal is not finite"));
            }
            out.push(Token {
                tok: Tok::Num(value),
                offset: start,
                text: text.to_string(),
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            out.push(Token {
                tok: Tok::Ident(text.to_string()),
                offset: start,
                text: text.to_string(),
            });
            continue;
        }
        let ch = src[start..].chars().next().unwrap_or('?');
        return Err(diag(start, &ch.to_string(), format!("unexpected character `{ch}`")));
    }
    out.push(Token {
        tok: Tok::End,
        offset: src.len(),
        text: "<end>".into(),
    });
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseDiagnostic {
        let t = self.peek();
        diag(t.offset, &t.text, message)
    }

    fn expr(&mut self) -> Result<Node, ParseDiagnostic> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseDiagnostic> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseDiagnostic> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Node::Unary(UnOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseDiagnostic> {
        let base = self.primary()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.peek().clone();
        let exponent = self.exponent()?;
        match exponent.constant_value() {
            Some(p) if p.is_finite() => Ok(Node::Pow(Box::new(base), p)),
            Some(_) => Err(diag(at.offset, &at.text, "exponent is not finite")),
            None => Err(diag(at.offset, &at.text, "exponent must be a constant")),
        }
    }

    fn exponent(&mut self) -> Result<Node, ParseDiagnostic> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.exponent()?;
            return Ok(Node::Unary(UnOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn primary(&mut self) -> Result<Node, ParseDiagnostic> {
        let tok = self.peek().clone();
        match &tok.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(*v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.error_here("expected `)` to close `(`"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(op) = UnOp::function(name) {
                    return self.call(op, &tok);
                }
                if name == "pi" {
                    return Ok(Node::Const(std::f64::consts::PI));
                }
                self.variable(name, &tok).map(Node::Var)
            }
            Tok::End => Err(self.error_here("unexpected end of input")),
            Tok::RParen => Err(self.error_here("unbalanced `)`")),
            _ => Err(self.error_here(format!("unexpected token `{}`", tok.text))),
        }
    }

    fn call(&mut self, op: UnOp, name: &Token) -> Result<Node, ParseDiagnostic> {
        if self.peek().tok != Tok::LParen {
            return Err(self.error_here(format!("expected `(` after `{}`", op.name())));
        }
        self.bump();
        if self.peek().tok == Tok::RParen {
            return Err(diag(
                name.offset,
                &name.text,
                format!("`{}` expects 1 argument, found 0", op.name()),
            ));
        }
        let mut args = vec![self.expr()?];
        while self.peek().tok == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        if self.peek().tok != Tok::RParen {
            return Err(self.error_here(format!("expected `)` to close `{}(`", op.name())));
        }
        self.bump();
        if args.len() != 1 {
            return Err(diag(
                name.offset,
                &name.text,
                format!("`{}` expects 1 argument, found {}", op.name(), args.len()),
            ));
        }
        Ok(Node::Unary(op, Box::new(args.pop().expect("one argument"))))
    }

    fn variable(&self, name: &str, tok: &Token) -> Result<Var, ParseDiagnostic> {
        if name == "t" {
            return Ok(Var::T);
        }
        let unknown = || diag(tok.offset, &tok.text, format!("unknown identifier `{name}`"));
        let (head, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
            return Err(unknown());
        }
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if index > self.dim {
            return Err(diag(
                tok.offset,
                &tok.text,
                format!("index {index} exceeds dimension {}", self.dim),
            ));
        }
        match head {
            "x" => Ok(Var::X(index)),
            "v" => Ok(Var::V(index)),
            _ => Err(unknown()),
        }
    }
}

/// Parses `source` as an expression over `t, x1..x{dim}, v1..v{dim}`.
pub fn parse(source: &str, dim: usize) -> Result<Expression, ParseDiagnostic> {
    if dim == 0 {
        return Err(diag(0, "", "dimension must be positive"));
    }
    let toks = lex(source)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        dim,
    };
    let root = p.expr()?;
    match p.peek().tok {
        Tok::End => {}
        Tok::RParen => return Err(p.error_here("unbalanced `)`")),
        _ => return Err(p.error_here(format!("unexpected token `{}`", p.peek().text))),
    }
    Ok(Expression { root, dim })
}
