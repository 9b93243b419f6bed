//! Compatible Lorentzian metrics in the adapted frame.
//!
//! A metric is parameterized by `(σ, α, β, γ^i)`:
//!
//! ```text
//! g(Ê_i, Ê_j) = σ g_ij     g(Ê_i, p_o) = 0        g(p_o, p_o) = 0
//! g(p_o, q_o) = σα/2       g(q_o, Ê_i) = σ γ^k g_ki / 2
//! g(q_o, q_o) = σβ/2
//! ```

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, EvalError, ParseError, Result};
use crate::fields::{Jet, Point, ScalarField, Symbols};
use crate::kahler_base::KahlerBase;

/// Parameter fields on the `(m + 2)`-dimensional chart.
#[derive(Debug, Clone)]
pub struct MetricParams {
    pub sigma: ScalarField,
    pub alpha: ScalarField,
    pub beta: ScalarField,
    pub gamma: Vec<ScalarField>,
}

/// Parameter values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamValues {
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
}

/// Parameter jets at one point, gradients over chart coordinates.
#[derive(Debug, Clone)]
pub struct ParamJets {
    pub sigma: Jet,
    pub alpha: Jet,
    pub beta: Jet,
    pub gamma: Vec<Jet>,
}

impl ParamJets {
    pub fn values(&self) -> ParamValues {
        ParamValues {
            sigma: self.sigma.value,
            alpha: self.alpha.value,
            beta: self.beta.value,
            gamma: self.gamma.iter().map(|j| j.value).collect(),
        }
    }
}

impl MetricParams {
    pub fn new(
        sigma: ScalarField,
        alpha: ScalarField,
        beta: ScalarField,
        gamma: Vec<ScalarField>,
    ) -> Result<Self> {
        let n = gamma.len() + 2;
        if gamma.is_empty() || !gamma.len().is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!(
                "gamma needs an even, non-zero number of components, got {}",
                gamma.len()
            )));
        }
        if let Some(f) = [&sigma, &alpha, &beta]
            .into_iter()
            .chain(&gamma)
            .find(|f| f.dim() != n)
        {
            return Err(EvalError::DimensionMismatch {
                expected: n,
                got: f.dim(),
            }
            .into());
        }
        Ok(MetricParams {
            sigma,
            alpha,
            beta,
            gamma,
        })
    }

    /// Parse expressions over the chart coordinates `x1 .. x{m}, s, t`.
    pub fn parse(sigma: &str, alpha: &str, beta: &str, gamma: &[&str]) -> Result<Self, ParseError> {
        let sym = Symbols::chart(gamma.len());
        let f = |src: &str| ScalarField::parse(src, &sym);
        let gamma = gamma.iter().map(|g| f(g)).collect::<Result<Vec<_>, _>>()?;
        Ok(MetricParams::new(f(sigma)?, f(alpha)?, f(beta)?, gamma)
            .expect("parsed over a consistent chart"))
    }

    /// Constant parameters.
    pub fn constant(sigma: f64, alpha: f64, beta: f64, gamma: &[f64]) -> Result<Self> {
        let n = gamma.len() + 2;
        MetricParams::new(
            ScalarField::constant(sigma, n),
            ScalarField::constant(alpha, n),
            ScalarField::constant(beta, n),
            gamma.iter().map(|g| ScalarField::constant(*g, n)).collect(),
        )
    }

    pub fn base_dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn chart_dim(&self) -> usize {
        self.gamma.len() + 2
    }

    /// Same parameters with `σ` replaced by the constant 1.
    pub fn with_unit_sigma(&self) -> Self {
        MetricParams {
            sigma: ScalarField::constant(1.0, self.chart_dim()),
            ..self.clone()
        }
    }

    /// Same parameters with every field differentiated by central
    /// differences with step `h`.
    pub fn to_finite_differences(&self, h: f64) -> Self {
        MetricParams {
            sigma: self.sigma.to_opaque(h),
            alpha: self.alpha.to_opaque(h),
            beta: self.beta.to_opaque(h),
            gamma: self.gamma.iter().map(|g| g.to_opaque(h)).collect(),
        }
    }

    pub fn is_exact(&self) -> bool {
        [&self.sigma, &self.alpha, &self.beta]
            .into_iter()
            .chain(&self.gamma)
            .all(ScalarField::is_exact)
    }

    fn check_values(v: &ParamValues) -> Result<()> {
        if v.sigma <= 0.0 {
            return Err(Error::SigmaNotPositive(v.sigma));
        }
        if v.alpha == 0.0 {
            return Err(Error::AlphaZero);
        }
        Ok(())
    }

    /// Values at `x`, checking `σ > 0` and `α ≠ 0`.
    pub fn values(&self, x: &[f64]) -> Result<ParamValues> {
        let ev = |name: &str, f: &ScalarField| f.eval(x).map_err(|e| Error::at(name, e));
        let v = ParamValues {
            sigma: ev("sigma", &self.sigma)?,
            alpha: ev("alpha", &self.alpha)?,
            beta: ev("beta", &self.beta)?,
            gamma: self
                .gamma
                .iter()
                .map(|g| ev("gamma", g))
                .collect::<Result<_>>()?,
        };
        Self::check_values(&v)?;
        Ok(v)
    }

    /// Jets at `x`, checking `σ > 0` and `α ≠ 0`.
    pub fn jets(&self, x: &[f64]) -> Result<ParamJets> {
        let jet = |name: &str, f: &ScalarField| f.jet(x).map_err(|e| Error::at(name, e));
        let j = ParamJets {
            sigma: jet("sigma", &self.sigma)?,
            alpha: jet("alpha", &self.alpha)?,
            beta: jet("beta", &self.beta)?,
            gamma: self
                .gamma
                .iter()
                .map(|g| jet("gamma", g))
                .collect::<Result<_>>()?,
        };
        Self::check_values(&j.values())?;
        Ok(j)
    }
}

/// The metric in the adapted frame at one point, with its inverse and the
/// ingredients it was built from.
#[derive(Debug, Clone)]
pub struct MetricAt {
    /// `g[(A, B)] = g(X_A, X_B)`.
    pub g: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub base_g: DMatrix<f64>,
    pub base_g_inv: DMatrix<f64>,
}

impl MetricAt {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `γ^m γ^k g_mk`.
    pub fn gamma_norm(&self) -> f64 {
        quad(&self.gamma, &self.base_g)
    }

    /// `γ^k g_ik`.
    pub fn gamma_lowered(&self) -> Vec<f64> {
        lower(&self.gamma, &self.base_g)
    }

    /// Number of positive and negative eigenvalues.
    pub fn signature(&self) -> (usize, usize) {
        let eig = SymmetricEigen::new(self.g.clone());
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let eps = 1e-12 * scale.max(1.0);
        let pos = eig.eigenvalues.iter().filter(|v| **v > eps).count();
        let neg = eig.eigenvalues.iter().filter(|v| **v < -eps).count();
        (pos, neg)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.g.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `g(u, v)` for frame-component vectors.
    pub fn pair(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                acc += u[a] * self.g[(a, b)] * v[b];
            }
        }
        acc
    }
}

pub(crate) fn quad(v: &[f64], g: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for (i, vi) in v.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            acc += vi * vj * g[(i, j)];
        }
    }
    acc
}

pub(crate) fn lower(v: &[f64], g: &DMatrix<f64>) -> Vec<f64> {
    (0..v.len())
        .map(|i| v.iter().enumerate().map(|(k, vk)| vk * g[(i, k)]).sum())
        .collect()
}

/// Build the frame matrix from parameter values and the base metric.
pub fn assemble_values(values: &ParamValues, base_g: &DMatrix<f64>) -> Result<MetricAt> {
    MetricParams::check_values(values)?;
    let m = values.gamma.len();
    if base_g.nrows() != m {
        return Err(EvalError::DimensionMismatch {
            expected: base_g.nrows(),
            got: m,
        }
        .into());
    }
    let n = m + 2;
    let (p, q) = (m, m + 1);
    let s = values.sigma;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = s * base_g[(i, j)];
        }
    }
    g[(p, q)] = s * values.alpha / 2.0;
    g[(q, p)] = g[(p, q)];
    for (i, h) in lower(&values.gamma, base_g).into_iter().enumerate() {
        g[(q, i)] = s * h / 2.0;
        g[(i, q)] = g[(q, i)];
    }
    g[(q, q)] = s * values.beta / 2.0;
    let inverse = g
        .clone()
        .lu()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularMetric)?;
    let base_g_inv = base_g
        .clone()
        .try_inverse()
        .ok_or(Error::MetricNotPositive)?;
    Ok(MetricAt {
        g,
        inverse,
        sigma: values.sigma,
        alpha: values.alpha,
        beta: values.beta,
        gamma: values.gamma.clone(),
        base_g: base_g.clone(),
        base_g_inv,
    })
}

fn check_dims(params: &MetricParams, base: &KahlerBase, p: &Point) -> Result<()> {
    if params.base_dim() != base.dim() {
        return Err(Error::InvalidDimension(format!(
            "parameters describe a base of dimension {}, base has dimension {}",
            params.base_dim(),
            base.dim()
        )));
    }
    if p.dim() != params.chart_dim() {
        return Err(EvalError::DimensionMismatch {
            expected: params.chart_dim(),
            got: p.dim(),
        }
        .into());
    }
    Ok(())
}

/// Assemble the metric at `p`.
pub fn assemble(params: &MetricParams, base: &KahlerBase, p: &Point) -> Result<MetricAt> {
    check_dims(params, base, p)?;
    let values = params.values(p.coords())?;
    let data = base.base_data(p.base(base.dim()))?;
    assemble_values(&values, &data.g)
}

/// Transversal field `q = a q_o + b p_o + c^i Ê_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransversalParams {
    pub a: f64,
    pub b: f64,
    pub c: Vec<f64>,
}

impl TransversalParams {
    /// Frame components of `q` in the order `(Ê_1 .. Ê_m, p_o, q_o)`.
    pub fn frame_components(&self) -> Vec<f64> {
        let mut v = self.c.clone();
        v.push(self.b);
        v.push(self.a);
        v
    }
}

/// `(a, b, c)` ↦ `(α, β, γ)` for the given `σ` and base metric.
pub fn params_from_transversal(
    t: &TransversalParams,
    sigma: f64,
    base_g: &DMatrix<f64>,
) -> Result<ParamValues> {
    if t.a == 0.0 {
        return Err(Error::TransversalDegenerate);
    }
    if sigma <= 0.0 {
        return Err(Error::SigmaNotPositive(sigma));
    }
    let a2 = t.a * t.a;
    Ok(ParamValues {
        sigma,
        alpha: 2.0 / (t.a * sigma),
        beta: (2.0 / sigma) * (-2.0 * t.b / a2 + sigma * quad(&t.c, base_g) / a2),
        gamma: t.c.iter().map(|c| -2.0 * c / t.a).collect(),
    })
}

/// `(α, β, γ)` ↦ `(a, b, c)`.
pub fn transversal_from_params(
    values: &ParamValues,
    base_g: &DMatrix<f64>,
) -> Result<TransversalParams> {
    let ParamValues {
        sigma,
        alpha,
        beta,
        ref gamma,
    } = *values;
    if alpha == 0.0 {
        return Err(Error::AlphaZero);
    }
    if sigma <= 0.0 {
        return Err(Error::SigmaNotPositive(sigma));
    }
    let a2s = alpha * alpha * sigma;
    Ok(TransversalParams {
        a: 2.0 / (alpha * sigma),
        b: -beta / a2s + quad(gamma, base_g) / (2.0 * a2s),
        c: gamma.iter().map(|g| -g / (alpha * sigma)).collect(),
    })
}

/// Residuals of `g(q, q) = 0`, `g(p_o, q) = 1`, `g(Ê_i, q) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NullityResiduals {
    pub null: f64,
    pub normalization: f64,
    pub orthogonality: f64,
}

impl NullityResiduals {
    pub fn max(&self) -> f64 {
        self.null.max(self.normalization).max(self.orthogonality)
    }
}

/// Evaluate the three defining conditions of `q` against an assembled metric.
pub fn nullity_of(metric: &MetricAt, t: &TransversalParams) -> NullityResiduals {
    let n = metric.dim();
    let m = n - 2;
    let q = t.frame_components();
    let unit = |a: usize| {
        let mut v = vec![0.0; n];
        v[a] = 1.0;
        v
    };
    NullityResiduals {
        null: metric.pair(&q, &q).abs(),
        normalization: (metric.pair(&unit(m), &q) - 1.0).abs(),
        orthogonality: (0..m)
            .map(|i| metric.pair(&unit(i), &q).abs())
            .fold(0.0, f64::max),
    }
}

/// Reconstruct `q` from the parameters at `p` and report the residuals.
pub fn nullity_checks(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<NullityResiduals> {
    let metric = assemble(params, base, p)?;
    let values = params.values(p.coords())?;
    let t = transversal_from_params(&values, &metric.base_g)?;
    Ok(nullity_of(&metric, &t))
}
