//! Expression trees over chart coordinates with exact differentiation.

use std::fmt;

use crate::error::EvalError;

/// Elementary functions understood by the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// A real-valued expression in the coordinates `Var(0) .. Var(dim-1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(k: usize) -> Self {
        Expr::Var(k)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    // Smart constructors fold constants and the additive/multiplicative units so
    // that derivative trees stay small. They never reorder floating-point work on
    // non-constant subtrees.

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (Some(0.0), _) => Expr::neg(b),
            (_, Some(0.0)) => a,
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return Expr::Const(0.0);
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            _ if b.is_one() => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return Expr::Const(1.0);
        }
        if b.is_one() {
            return a;
        }
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        Expr::Call(f, Box::new(a))
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(k) => Some(*k),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn depends_on(&self, k: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(j) => *j == k,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(k),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.depends_on(k) || b.depends_on(k),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => *x.get(*k).ok_or(EvalError::MissingCoordinate(*k))?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x)?;
                match integer_exponent(b) {
                    Some(n) => {
                        if base == 0.0 && n < 0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        base.powi(n)
                    }
                    None => {
                        if base <= 0.0 {
                            return Err(EvalError::NonPositiveBase {
                                op: "^",
                                value: base,
                            });
                        }
                        base.powf(b.eval(x)?)
                    }
                }
            }
            Expr::Call(f, a) => {
                let u = a.eval(x)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(EvalError::NonPositiveBase {
                                op: "log",
                                value: u,
                            });
                        }
                        u.ln()
                    }
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(EvalError::NonPositiveBase {
                                op: "sqrt",
                                value: u,
                            });
                        }
                        u.sqrt()
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Symbolic partial derivative with respect to coordinate `k`.
    pub fn diff(&self, k: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(j) => Expr::Const(if *j == k { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(k)),
            Expr::Add(a, b) => Expr::add(a.diff(k), b.diff(k)),
            Expr::Sub(a, b) => Expr::sub(a.diff(k), b.diff(k)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(k), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(k)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = Expr::sub(
                    Expr::mul(a.diff(k), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff(k)),
                );
                Expr::div(num, Expr::pow((**b).clone(), Expr::Const(2.0)))
            }
            Expr::Pow(a, b) => {
                if !b.depends_on(k) {
                    // Exponent constant in x_k: n a^(n-1) a'
                    let da = a.diff(k);
                    if da.is_zero() {
                        return Expr::Const(0.0);
                    }
                    let lowered = match b.as_const() {
                        Some(n) => Expr::pow((**a).clone(), Expr::Const(n - 1.0)),
                        None => {
                            Expr::pow((**a).clone(), Expr::sub((**b).clone(), Expr::Const(1.0)))
                        }
                    };
                    Expr::mul(Expr::mul((**b).clone(), lowered), da)
                } else {
                    // a^b (b' log a + b a'/a)
                    let term = Expr::add(
                        Expr::mul(b.diff(k), Expr::call(Func::Log, (**a).clone())),
                        Expr::div(Expr::mul((**b).clone(), a.diff(k)), (**a).clone()),
                    );
                    Expr::mul(self.clone(), term)
                }
            }
            Expr::Call(f, a) => {
                let da = a.diff(k);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let u = (**a).clone();
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => Expr::div(Expr::Const(1.0), u),
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, u)),
                    Func::Sqrt => Expr::div(Expr::Const(0.5), self.clone()),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Render with the given coordinate names.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }
}

fn integer_exponent(b: &Expr) -> Option<i32> {
    let c = b.as_const()?;
    if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
        Some(c as i32)
    } else {
        None
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &Expr, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            match e {
                Expr::Const(c) if *c >= 0.0 => write!(f, "{c}"),
                Expr::Var(_) | Expr::Call(..) => self.write(e, f),
                _ => {
                    write!(f, "(")?;
                    self.write(e, f)?;
                    write!(f, ")")
                }
            }
        };
        match e {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(k) => match self.names.get(*k) {
                Some(name) => write!(f, "{name}"),
                None => write!(f, "#{k}"),
            },
            Expr::Neg(a) => {
                write!(f, "-")?;
                sub(a, f)
            }
            Expr::Add(a, b) => {
                self.write(a, f)?;
                write!(f, " + ")?;
                sub(b, f)
            }
            Expr::Sub(a, b) => {
                self.write(a, f)?;
                write!(f, " - ")?;
                sub(b, f)
            }
            Expr::Mul(a, b) => {
                sub(a, f)?;
                write!(f, "*")?;
                sub(b, f)
            }
            Expr::Div(a, b) => {
                sub(a, f)?;
                write!(f, "/")?;
                sub(b, f)
            }
            Expr::Pow(a, b) => {
                sub(a, f)?;
                write!(f, "^")?;
                sub(b, f)
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(k: usize) -> Expr {
        Expr::var(k)
    }

    #[test]
    fn polynomial_eval() {
        let e = Expr::mul(x(0), x(1));
        assert_eq!(e.eval(&[2.0, 3.0, 0.0, 0.0]).unwrap(), 6.0);
    }

    #[test]
    fn square_derivative() {
        let e = Expr::pow(x(0), Expr::Const(2.0));
        assert_eq!(e.diff(0).eval(&[3.0]).unwrap(), 6.0);
        assert_eq!(e.diff(1).eval(&[3.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn integer_powers_accept_negative_base() {
        let e = Expr::pow(x(0), Expr::Const(3.0));
        assert_eq!(e.eval(&[-2.0]).unwrap(), -8.0);
        assert_eq!(e.diff(0).eval(&[-2.0]).unwrap(), 12.0);
    }

    #[test]
    fn rejects_log_of_non_positive() {
        let e = Expr::call(Func::Log, x(0));
        assert!(matches!(
            e.eval(&[0.0]),
            Err(EvalError::NonPositiveBase { .. })
        ));
        assert!(matches!(
            e.eval(&[-1.0]),
            Err(EvalError::NonPositiveBase { .. })
        ));
        let p = Expr::pow(x(0), Expr::Const(0.5));
        assert!(p.eval(&[-1.0]).is_err());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let e = Expr::div(Expr::Const(1.0), x(0));
        assert_eq!(e.eval(&[0.0]), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn variable_exponent_derivative() {
        // d/dx x^x = x^x (log x + 1)
        let e = Expr::pow(x(0), x(0));
        let v: f64 = 1.7;
        let expected = v.powf(v) * (v.ln() + 1.0);
        assert!((e.diff(0).eval(&[v]).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn chain_rule_through_functions() {
        let e = Expr::call(
            Func::Sqrt,
            Expr::call(Func::Exp, Expr::mul(Expr::Const(2.0), x(0))),
        );
        // sqrt(exp(2x)) = exp(x)
        let v: f64 = 0.4;
        assert!((e.diff(0).eval(&[v]).unwrap() - v.exp()).abs() < 1e-14);
        let c = Expr::call(Func::Cos, x(0));
        assert!((c.diff(0).eval(&[v]).unwrap() + v.sin()).abs() < 1e-15);
    }

    #[test]
    fn constant_folding_keeps_trees_small() {
        let e = Expr::add(Expr::mul(Expr::Const(0.0), x(0)), Expr::Const(2.0));
        assert_eq!(e, Expr::Const(2.0));
        assert_eq!(Expr::Const(5.0).diff(0), Expr::Const(0.0));
    }

    #[test]
    fn display_roundtrips_through_names() {
        let names: Vec<String> = ["x1", "x2", "s", "t"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let e = Expr::mul(x(0), Expr::call(Func::Exp, x(3)));
        assert_eq!(e.display_with(&names).to_string(), "x1*exp(t)");
    }
}
