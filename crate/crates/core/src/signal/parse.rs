//! Recursive-descent parser for the signal grammar:
//!
//! ```text
//! vector := "[" expr ("," expr)* "]"
//! expr   := term (("+" | "-") term)*
//! term   := factor ("*" factor)*
//! factor := "-" factor | primary ("^" uint)*
//! primary:= number | "t" | ("sin" | "cos" | "exp") "(" expr ")" | "(" expr ")"
//! ```
//!
//! Errors carry the byte offset where parsing stopped and the tokens that
//! would have been accepted there.

use crate::error::{Error, Result};

use super::{SignalExpr, VectorSignal};

/// Parse a bracketed vector and check its arity against `n`.
pub fn parse_signal(text: &str, n: usize) -> Result<VectorSignal> {
    let sig = parse_vector(text)?;
    if sig.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sig.dim(),
        });
    }
    Ok(sig)
}

/// Parse a bracketed vector of any arity.
pub fn parse_vector(text: &str) -> Result<VectorSignal> {
    let mut p = Parser::new(text);
    let sig = p.vector()?;
    p.end_of_input()?;
    Ok(sig)
}

/// Parse a single scalar expression spanning the whole input.
pub fn parse_expr(text: &str) -> Result<SignalExpr> {
    let mut p = Parser::new(text);
    let e = p.expr()?;
    p.end_of_input()?;
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
        }
    }

    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            expected: expected.to_string(),
        })
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, byte: u8) -> bool {
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end_of_input(&mut self) -> Result<()> {
        if self.peek().is_some() {
            self.fail("end of input")
        } else {
            Ok(())
        }
    }

    fn vector(&mut self) -> Result<VectorSignal> {
        if !self.eat(b'[') {
            return self.fail("'['");
        }
        let mut components = vec![self.expr()?];
        loop {
            if self.eat(b',') {
                components.push(self.expr()?);
            } else if self.eat(b']') {
                return Ok(VectorSignal::new(components));
            } else {
                return self.fail("',' or ']'");
            }
        }
    }

    fn expr(&mut self) -> Result<SignalExpr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = SignalExpr::add(lhs, self.term()?);
            } else if self.eat(b'-') {
                lhs = SignalExpr::add(lhs, SignalExpr::neg(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<SignalExpr> {
        let mut lhs = self.factor()?;
        while self.eat(b'*') {
            lhs = SignalExpr::mul(lhs, self.factor()?);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<SignalExpr> {
        if self.eat(b'-') {
            return Ok(SignalExpr::neg(self.factor()?));
        }
        let mut e = self.primary()?;
        while self.eat(b'^') {
            e = SignalExpr::pow(e, self.uint()?);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<SignalExpr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.fail("')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_alphabetic) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match name {
                    "t" => Ok(SignalExpr::Time),
                    "sin" | "cos" | "exp" => {
                        if !self.eat(b'(') {
                            return self.fail("'('");
                        }
                        let inner = self.expr()?;
                        if !self.eat(b')') {
                            return self.fail("')'");
                        }
                        Ok(match name {
                            "sin" => SignalExpr::sin(inner),
                            "cos" => SignalExpr::cos(inner),
                            _ => SignalExpr::exp(inner),
                        })
                    }
                    _ => {
                        self.pos = start;
                        self.fail("number, 't', 'sin', 'cos', 'exp', '(' or '-'")
                    }
                }
            }
            _ => self.fail("number, 't', 'sin', 'cos', 'exp', '(' or '-'"),
        }
    }

    fn number(&mut self) -> Result<SignalExpr> {
        self.skip_ws();
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            if !self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                return self.fail("digit after decimal point");
            }
            while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                self.pos += 1;
            }
        }
        // Exponent suffix, only when it is actually followed by digits, so
        // that a stray identifier after a number is left for the caller.
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mut probe = self.pos + 1;
            if matches!(self.src.get(probe), Some(b'+' | b'-')) {
                probe += 1;
            }
            if self.src.get(probe).is_some_and(u8::is_ascii_digit) {
                self.pos = probe;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(SignalExpr::Const(v)),
            _ => {
                self.pos = start;
                self.fail("finite number")
            }
        }
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.fail("unsigned integer exponent");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<u32>() {
            Ok(k) => Ok(k),
            Err(_) => {
                self.pos = start;
                self.fail("unsigned integer exponent in range")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_round_trip() {
        let sig = parse_signal("[t, 1]", 2).unwrap();
        assert_eq!(sig.to_string(), "[t, 1]");
        let sig = parse_signal("[sin(t), cos(t)]", 2).unwrap();
        assert_eq!(sig.to_string(), "[sin(t), cos(t)]");
    }

    #[test]
    fn whitespace_is_insignificant() {
        let a = parse_vector("[ t^2  +  1 , exp( -t ) ]").unwrap();
        let b = parse_vector("[t^2+1,exp(-t)]").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precedence_power_binds_tightest() {
        let e = parse_expr("-t^2").unwrap();
        assert_eq!(e.eval(3.0), -9.0);
        let e = parse_expr("(1 - t)^2").unwrap();
        assert_eq!(e.eval(3.0), 4.0);
        let e = parse_expr("2 * t + 1").unwrap();
        assert_eq!(e.eval(3.0), 7.0);
        let e = parse_expr("t^2^3").unwrap();
        assert_eq!(e.eval(2.0), 64.0);
    }

    #[test]
    fn scientific_notation_constants() {
        let e = parse_expr("2.5e-1 * t").unwrap();
        assert_eq!(e.eval(4.0), 1.0);
        let e = parse_expr("1E2").unwrap();
        assert_eq!(e.eval(0.0), 100.0);
    }

    #[test]
    fn error_offsets() {
        for (text, offset) in [
            ("[t^", 3),
            ("", 0),
            ("[", 1),
            ("[t", 2),
            ("[t )", 3),
            ("[sin t]", 5),
            ("[t + ]", 5),
            ("[foo(t)]", 1),
        ] {
            match parse_vector(text) {
                Err(crate::error::Error::Parse { offset: got, .. }) => {
                    assert_eq!(got, offset, "wrong offset for {text:?}")
                }
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn error_reports_expected_tokens() {
        let err = parse_vector("[t^").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unsigned integer"), "message was {msg}");
        let err = parse_vector("[%]").unwrap_err();
        assert!(err.to_string().contains("'sin'"));
    }

    #[test]
    fn trailing_garbage_rejected() {
        let err = parse_vector("[t] extra").unwrap_err();
        match err {
            crate::error::Error::Parse { offset, expected } => {
                assert_eq!(offset, 4);
                assert_eq!(expected, "end of input");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
