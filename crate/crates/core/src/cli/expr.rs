//! Arithmetic expressions in `x` and `y`: numbers, `+ - * / ^`, unary minus,
//! parentheses and `exp(...)`.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at column {}", self.message, self.position + 1)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { chars: text.chars().collect(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err(format!("unexpected '{}'", p.chars[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => {
                let e = b.eval(x, y);
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    a.eval(x, y).powi(e as i32)
                } else {
                    a.eval(x, y).powf(e)
                }
            }
            Expr::Exp(a) => a.eval(x, y).exp(),
        }
    }

    /// The value when the expression does not mention `x` or `y`.
    pub fn constant(&self) -> Option<f64> {
        match self {
            Expr::X | Expr::Y => None,
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) | Expr::Exp(a) => a.constant().map(|_| self.eval(0.0, 0.0)),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.constant().and(b.constant()).map(|_| self.eval(0.0, 0.0))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err(&self, message: String) -> ExprError {
        ExprError { position: self.pos, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression".into())),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'".into()));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                match word.as_str() {
                    "x" => Ok(Expr::X),
                    "y" => Ok(Expr::Y),
                    "exp" => {
                        if !self.eat('(') {
                            return Err(self.err("expected '(' after exp".into()));
                        }
                        let e = self.expr()?;
                        if !self.eat(')') {
                            return Err(self.err("expected ')'".into()));
                        }
                        Ok(Expr::Exp(Box::new(e)))
                    }
                    _ => Err(ExprError { position: start, message: format!("unknown name '{word}' (allowed: x, y, exp)") }),
                }
            }
            Some(c) => Err(self.err(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let n = self.chars.len();
        while self.pos < n && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < n && (self.chars[self.pos] == 'e' || self.chars[self.pos] == 'E') {
            let mut k = self.pos + 1;
            if k < n && (self.chars[k] == '+' || self.chars[k] == '-') {
                k += 1;
            }
            if k < n && self.chars[k].is_ascii_digit() {
                self.pos = k;
                while self.pos < n && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError { position: start, message: format!("invalid number '{text}'") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("(x + y) / 2", 1.0, 3.0), 2.0);
        assert_eq!(ev("1e-3 * 2", 0.0, 0.0), 0.002);
        assert_eq!(ev("8 - 2 - 1", 0.0, 0.0), 5.0);
        assert!((ev("-exp(-20*((x-0.5)^2 + (y-0.5)^2))", 0.5, 0.5) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants() {
        assert_eq!(Expr::parse("-2 * 0.5").unwrap().constant(), Some(-1.0));
        assert_eq!(Expr::parse("x - x").unwrap().constant(), None);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("sin(x)").unwrap_err().message.contains("sin"));
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x y").is_err());
        assert!(Expr::parse("").is_err());
    }
}
