use super::{BinOp, Expr, Func, ParseError, Var, FIELD_VARS};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| ParseError::Number { offset: start, text: text.to_string() })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or(c);
                    return Err(ParseError::Syntax {
                        offset: start,
                        found: format!("`{ch}`"),
                        expected: expected_operand(),
                    });
                }
            };
            i += c.len_utf8();
            out.push((start, tok));
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

fn expected_operand() -> Vec<String> {
    vec!["number".into(), "identifier".into(), "`(`".into(), "`-`".into()]
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: &'a [Var],
}

/// Parse with the default variable set `{x, y, t, theta}`.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    parse_with(src, FIELD_VARS)
}

/// Parse, accepting only the listed variables.
pub fn parse_with(src: &str, vars: &[Var]) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, vars };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected(&["operator", "end of input"])),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected(&["`(`"]));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                match Var::from_name(&name) {
                    Some(v) if self.vars.contains(&v) => Ok(Expr::Var(v)),
                    _ => Err(ParseError::UnknownIdentifier { offset, name }),
                }
            }
            _ => Err(self.unexpected(&["number", "identifier", "`(`", "`-`"])),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["operator", "`)`"]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse("1 + 2 * 3 ^ 2").unwrap();
        assert_eq!(e.as_const(), Some(19.0));
        let e = parse("-2^2").unwrap();
        assert_eq!(e.as_const(), Some(-4.0));
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.as_const(), Some(512.0));
        let e = parse("8 / 4 / 2").unwrap();
        assert_eq!(e.as_const(), Some(1.0));
        let e = parse("2^-1").unwrap();
        assert_eq!(e.as_const(), Some(0.5));
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse("x+2*y").unwrap(), parse("  x +\t2 *  y ").unwrap());
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(parse("1.5e-3").unwrap().as_const(), Some(1.5e-3));
        assert_eq!(parse("2E2").unwrap().as_const(), Some(200.0));
    }

    #[test]
    fn syntax_error_offsets() {
        match parse("x + * y") {
            Err(ParseError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 4);
                assert!(expected.iter().any(|e| e == "number"));
            }
            other => panic!("{other:?}"),
        }
        match parse("sin(x") {
            Err(ParseError::Syntax { offset, expected, .. }) => {
                assert_eq!(offset, 5);
                assert!(expected.iter().any(|e| e == "`)`"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("2 x"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x $ y"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            parse("x + z"),
            Err(ParseError::UnknownIdentifier { offset: 4, name: "z".into() })
        );
        assert!(matches!(parse("s"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(parse_with("s * 2", &[Var::S]).is_ok());
        assert!(matches!(parse_with("x", &[Var::Theta]), Err(ParseError::UnknownIdentifier { .. })));
    }

    #[test]
    fn function_requires_parens() {
        assert!(matches!(parse("sin x"), Err(ParseError::Syntax { offset: 4, .. })));
    }
}
