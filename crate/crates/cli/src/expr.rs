//! Arithmetic in one variable `m`, for synthetic level sequences such as
//! `2^-m` or `1/(m+1)`.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    M,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.msg, self.pos)
    }
}

impl std::error::Error for ParseError {}

impl Expr {
    pub fn eval(&self, m: f64) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::M => m,
            Expr::Neg(e) => -e.eval(m),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(m), b.eval(m));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let mut p = Parser { src: s.as_bytes(), pos: 0 };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }
}

// sum   := prod (('+' | '-') prod)*
// prod  := unary (('*' | '/') unary)*
// unary := '-' unary | power
// power := atom ('^' unary)?
// atom  := number | 'm' | '(' sum ')'
struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ParseError {
        ParseError { pos: self.pos, msg: msg.to_string() }
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

    fn eat(&mut self, c: u8) -> bool {
        let hit = self.peek() == Some(c);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.prod()?;
        loop {
            let op = if self.eat(b'+') {
                Op::Add
            } else if self.eat(b'-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.prod()?));
        }
    }

    fn prod(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                Op::Mul
            } else if self.eat(b'/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(b'm') => {
                self.pos += 1;
                Ok(Expr::M)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.error("expected a number, 'm' or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit() || *c == b'.') {
            self.pos += 1;
        }
        // exponent part, e.g. 1e-3
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse().map(Expr::Num).map_err(|_| ParseError { pos: start, msg: format!("bad number {text:?}") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, m: f64) -> f64 {
        s.parse::<Expr>().unwrap().eval(m)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1/m", 4.0), 0.25);
        assert_eq!(ev("2^-m", 3.0), 0.125);
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0), 9.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("-m^2", 3.0), -9.0);
        assert_eq!(ev("8 / 2 / 2", 0.0), 2.0);
        assert_eq!(ev("10 - 3 - 2", 0.0), 5.0);
        assert_eq!(ev("1e-3 * m", 2.0), 0.002);
        assert_eq!(ev("0.3", 9.0), 0.3);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!("1 +".parse::<Expr>().unwrap_err().pos, 3);
        assert_eq!("(m".parse::<Expr>().unwrap_err().msg, "expected ')'");
        assert!("m m".parse::<Expr>().is_err());
        assert!("x".parse::<Expr>().is_err());
        assert!("".parse::<Expr>().is_err());
    }

    proptest! {
        #[test]
        fn numbers_round_trip(x in 0.0f64..1e6) {
            prop_assert_eq!(ev(&format!("{x:e}"), 0.0), x);
        }

        #[test]
        fn linear_forms(a in -100i32..100, b in -100i32..100, m in 1u32..50) {
            let s = format!("{a} * m + ({b})");
            prop_assert_eq!(ev(&s, m as f64), (a * m as i32 + b) as f64);
        }
    }
}
