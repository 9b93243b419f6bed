//! Smooth scalar and vector fields on a coordinate chart.
//!
//! A [`ScalarField`] is backed either by an [`Expr`] (exact derivatives by
//! symbolic differentiation) or by an opaque evaluation rule (central finite
//! differences). Chart coordinates are ordered `(x1 .. x{m}, s, t)`.

mod expr;
mod jet;
mod parse;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use expr::{Expr, ExprDisplay, Func};
pub use jet::Jet;
pub use parse::{parse_expr, Symbols};

use crate::error::{EvalError, ParseError};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A point of a coordinate chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, EvalError> {
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(EvalError::NonFiniteCoordinate(k));
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `self + h v`.
    pub fn displaced(&self, v: &[f64], h: f64) -> Point {
        Point(self.0.iter().zip(v).map(|(x, d)| x + h * d).collect())
    }

    /// The leading `m` coordinates (the base-manifold projection).
    pub fn base(&self, m: usize) -> &[f64] {
        &self.0[..m]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Axis-aligned coordinate box on which fields are certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners must have equal dimension");
        DomainBox { lo, hi }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        DomainBox::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn check(&self, x: &[f64]) -> Result<(), EvalError> {
        for (k, (v, (lo, hi))) in x.iter().zip(self.lo.iter().zip(&self.hi)).enumerate() {
            if v < lo || v > hi {
                return Err(EvalError::OutsideDomain {
                    coord: k,
                    value: *v,
                });
            }
        }
        Ok(())
    }

    /// Box shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> DomainBox {
        DomainBox::new(
            self.lo.iter().map(|v| v + margin).collect(),
            self.hi.iter().map(|v| v - margin).collect(),
        )
    }
}

/// How partial derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    Exact,
    FiniteDifference { step: f64 },
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Backing {
    Expr { expr: Expr, grad: Arc<Vec<Expr>> },
    Opaque(Arc<EvalFn>),
}

/// A smooth real function on a `dim`-dimensional chart.
#[derive(Clone)]
pub struct ScalarField {
    backing: Backing,
    mode: DerivativeMode,
    dim: usize,
    domain: Option<Arc<DomainBox>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ScalarField");
        match &self.backing {
            Backing::Expr { expr, .. } => d.field("expr", expr),
            Backing::Opaque(_) => d.field("expr", &"<opaque>"),
        };
        d.field("mode", &self.mode).field("dim", &self.dim).finish()
    }
}

impl ScalarField {
    /// Expression-backed field with exact derivatives.
    pub fn from_expr(expr: Expr, dim: usize) -> Result<Self, EvalError> {
        if let Some(k) = expr.max_var() {
            if k >= dim {
                return Err(EvalError::MissingCoordinate(k));
            }
        }
        let grad = (0..dim).map(|k| expr.diff(k)).collect();
        Ok(ScalarField {
            backing: Backing::Expr {
                expr,
                grad: Arc::new(grad),
            },
            mode: DerivativeMode::Exact,
            dim,
            domain: None,
        })
    }

    pub fn constant(c: f64, dim: usize) -> Self {
        Self::from_expr(Expr::Const(c), dim).expect("constants reference no coordinates")
    }

    pub fn parse(src: &str, symbols: &Symbols) -> Result<Self, ParseError> {
        let expr = parse_expr(src, symbols)?;
        Ok(Self::from_expr(expr, symbols.len()).expect("parser only emits known symbols"))
    }

    /// Opaque field differentiated by central differences with step `h`.
    pub fn opaque<F>(dim: usize, step: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            backing: Backing::Opaque(Arc::new(f)),
            mode: DerivativeMode::FiniteDifference { step },
            dim,
            domain: None,
        }
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Result<Self, EvalError> {
        if let (Backing::Opaque(_), DerivativeMode::Exact) = (&self.backing, mode) {
            return Err(EvalError::ExactModeUnavailable);
        }
        self.mode = mode;
        Ok(self)
    }

    /// The same function, hidden behind an opaque rule so that every
    /// derivative goes through finite differences.
    pub fn to_opaque(&self, step: f64) -> ScalarField {
        let inner = self.clone();
        let mut out = ScalarField::opaque(self.dim, step, move |x| {
            inner.raw_eval(x).unwrap_or(f64::NAN)
        });
        out.domain = self.domain.clone();
        out
    }

    pub fn with_domain(mut self, domain: Arc<DomainBox>) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == DerivativeMode::Exact
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.backing {
            Backing::Expr { expr, .. } => Some(expr),
            Backing::Opaque(_) => None,
        }
    }

    /// Constant value, when the backing expression references no coordinates.
    pub fn as_constant(&self) -> Option<f64> {
        self.expr().and_then(Expr::as_const)
    }

    /// True when the field provably does not depend on coordinate `k`.
    /// Opaque fields are never assumed independent.
    pub fn independent_of(&self, k: usize) -> bool {
        self.expr().map(|e| !e.depends_on(k)).unwrap_or(false)
    }

    /// `½ log f`, keeping the backing kind and derivative mode.
    pub fn half_log(&self) -> ScalarField {
        match &self.backing {
            Backing::Expr { expr, .. } => {
                let e = Expr::mul(Expr::Const(0.5), Expr::call(Func::Log, expr.clone()));
                let mut out = ScalarField::from_expr(e, self.dim).expect("same coordinates");
                out.mode = self.mode;
                out.domain = self.domain.clone();
                out
            }
            Backing::Opaque(f) => {
                let f = f.clone();
                let mut out = ScalarField::opaque(self.dim, self.step_or_default(), move |x| {
                    let v = f(x);
                    if v > 0.0 {
                        0.5 * v.ln()
                    } else {
                        f64::NAN
                    }
                });
                out.domain = self.domain.clone();
                out
            }
        }
    }

    fn step_or_default(&self) -> f64 {
        match self.mode {
            DerivativeMode::FiniteDifference { step } => step,
            DerivativeMode::Exact => DEFAULT_FD_STEP,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn raw_eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let v = match &self.backing {
            Backing::Expr { expr, .. } => expr.eval(x)?,
            Backing::Opaque(f) => f(x),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        if let Some(d) = &self.domain {
            d.check(x)?;
        }
        self.raw_eval(x)
    }

    pub fn partial(&self, x: &[f64], k: usize) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        if k >= self.dim {
            return Err(EvalError::MissingCoordinate(k));
        }
        if let Some(d) = &self.domain {
            d.check(x)?;
        }
        match (&self.backing, self.mode) {
            (Backing::Expr { grad, .. }, DerivativeMode::Exact) => {
                let v = grad[k].eval(x)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(EvalError::NonFinite)
                }
            }
            (_, DerivativeMode::FiniteDifference { step }) => self.central_difference(x, k, step),
            (Backing::Opaque(_), DerivativeMode::Exact) => Err(EvalError::ExactModeUnavailable),
        }
    }

    fn central_difference(&self, x: &[f64], k: usize, h: f64) -> Result<f64, EvalError> {
        let mut fwd = x.to_vec();
        let mut bwd = x.to_vec();
        fwd[k] += h;
        bwd[k] -= h;
        if let Some(d) = &self.domain {
            if !d.contains(&fwd) || !d.contains(&bwd) {
                return Err(EvalError::BoundaryProximity { coord: k, step: h });
            }
        }
        Ok((self.raw_eval(&fwd)? - self.raw_eval(&bwd)?) / (2.0 * h))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        (0..self.dim).map(|k| self.partial(x, k)).collect()
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet, EvalError> {
        Ok(Jet::new(self.eval(x)?, self.gradient(x)?))
    }

    /// `Σ_k v^k ∂_k f` at `x`.
    pub fn directional(&self, x: &[f64], v: &[f64]) -> Result<f64, EvalError> {
        if v.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let mut acc = 0.0;
        for (k, c) in v.iter().enumerate() {
            if *c != 0.0 {
                acc += c * self.partial(x, k)?;
            }
        }
        Ok(acc)
    }
}

/// A vector field given by its coordinate components.
#[derive(Debug, Clone)]
pub struct VectorFieldSpec {
    components: Vec<ScalarField>,
}

impl VectorFieldSpec {
    pub fn new(components: Vec<ScalarField>) -> Result<Self, EvalError> {
        let n = components.len();
        if let Some(bad) = components.iter().find(|c| c.dim() != n) {
            return Err(EvalError::DimensionMismatch {
                expected: n,
                got: bad.dim(),
            });
        }
        Ok(VectorFieldSpec { components })
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    pub fn jets(&self, x: &[f64]) -> Result<Vec<Jet>, EvalError> {
        self.components.iter().map(|c| c.jet(x)).collect()
    }

    /// Apply the vector field as a derivation to `f`.
    pub fn apply(&self, f: &ScalarField, x: &[f64]) -> Result<f64, EvalError> {
        f.directional(x, &self.eval(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart2() -> Symbols {
        Symbols::chart(2)
    }

    fn field(src: &str) -> ScalarField {
        ScalarField::parse(src, &chart2()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(field("x1*x2").eval(&[2.0, 3.0, 0.0, 0.0]).unwrap(), 6.0);
        assert_eq!(
            ScalarField::constant(1.0, 4)
                .eval(&[9.0, -2.0, 1.0, 0.0])
                .unwrap(),
            1.0
        );
        // e^{1/2} to 31 significant digits
        let reference = 1.648_721_270_700_128_f64;
        let v = field("exp(t)").eval(&[0.0, 0.0, 0.0, 0.5]).unwrap();
        assert!((v - reference).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn partial_examples() {
        assert_eq!(
            field("x1^2").partial(&[3.0, 0.0, 0.0, 0.0], 0).unwrap(),
            6.0
        );
        for k in 0..4 {
            assert_eq!(field("2.5").partial(&[0.1, 0.2, 0.3, 0.4], k).unwrap(), 0.0);
        }
        let fd = field("sin(x1)")
            .with_mode(DerivativeMode::FiniteDifference { step: 1e-5 })
            .unwrap();
        let v = fd.partial(&[0.3, 0.0, 0.0, 0.0], 0).unwrap();
        assert!((v - 0.3f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn directional_examples() {
        let f = field("x1*t");
        let p = [2.0, 0.0, 0.0, 3.0];
        assert_eq!(f.directional(&p, &[1.0, 0.0, 0.0, 1.0]).unwrap(), 5.0);
        assert_eq!(f.directional(&p, &[0.0; 4]).unwrap(), 0.0);
        assert_eq!(
            f.directional(&p, &[0.0, 0.0, 0.0, 1.0]).unwrap(),
            f.partial(&p, 3).unwrap()
        );
    }

    #[test]
    fn domain_violations() {
        let d = Arc::new(DomainBox::cube(4, 1.0));
        let f = field("x1").with_domain(d);
        assert!(matches!(
            f.eval(&[2.0, 0.0, 0.0, 0.0]),
            Err(EvalError::OutsideDomain { coord: 0, .. })
        ));
        let fd = f
            .with_mode(DerivativeMode::FiniteDifference { step: 1e-3 })
            .unwrap();
        assert!(matches!(
            fd.partial(&[0.9999, 0.0, 0.0, 0.0], 0),
            Err(EvalError::BoundaryProximity { coord: 0, .. })
        ));
        assert!(fd.partial(&[0.5, 0.0, 0.0, 0.0], 0).is_ok());
    }

    #[test]
    fn non_finite_and_dimension_errors() {
        let f = field("1/(x1 - 1)");
        assert!(f.eval(&[1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(matches!(
            f.eval(&[1.0, 0.0]),
            Err(EvalError::DimensionMismatch {
                expected: 4,
                got: 2
            })
        ));
        let opaque = ScalarField::opaque(4, 1e-5, |_| f64::INFINITY);
        assert_eq!(opaque.eval(&[0.0; 4]), Err(EvalError::NonFinite));
        assert!(opaque.with_mode(DerivativeMode::Exact).is_err());
    }

    #[test]
    fn opaque_fields_use_central_differences() {
        let f = ScalarField::opaque(4, 1e-5, |x| x[0] * x[0] * x[3]);
        let g = f.gradient(&[1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[3] - 1.0).abs() < 1e-8);
        assert!(g[1].abs() < 1e-12);
    }

    #[test]
    fn half_log_matches_quotient() {
        let sigma = field("exp(t + x1^2)");
        let phi = sigma.half_log();
        let p = [0.3, 0.1, -0.2, 0.4];
        let expected = 0.5 * sigma.partial(&p, 0).unwrap() / sigma.eval(&p).unwrap();
        assert!((phi.partial(&p, 0).unwrap() - expected).abs() < 1e-14);
        let phi_fd = sigma.to_opaque(1e-5).half_log();
        assert!((phi_fd.partial(&p, 0).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn vector_field_applies_as_derivation() {
        let v =
            VectorFieldSpec::new(vec![field("1"), field("0"), field("0"), field("x1")]).unwrap();
        let f = field("x1*t");
        // V(f) = t + x1 * x1
        let p = [2.0, 0.0, 0.0, 3.0];
        assert_eq!(v.apply(&f, &p).unwrap(), 3.0 + 4.0);
        assert!(VectorFieldSpec::new(vec![field("1")]).is_err());
    }
}
