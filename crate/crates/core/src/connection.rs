//! Closed-form Christoffel symbols in the adapted frame.
//!
//! `∇_{X_A} X_B = Γ[(A, B, C)] X_C`. Three independent routes are provided:
//! the table for `σ ≡ 1` ([`christoffel_sigma1`]), its conformal rescaling
//! ([`conformal_transform`]), and the general table ([`christoffel`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::adapted_frame::{lift_frame, FrameAt, FrameLabel};
use crate::error::{Error, Result};
use crate::fields::{Point, ScalarField};
use crate::kahler_base::{BaseFrameData, KahlerBase};
use crate::metric::{lower, quad, MetricParams, ParamValues};
use crate::tensor::Tensor3;

/// Which computation produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TablePath {
    Sigma1,
    Theorem,
    Conformal,
    Oracle,
}

impl TablePath {
    pub fn name(self) -> &'static str {
        match self {
            TablePath::Sigma1 => "sigma1",
            TablePath::Theorem => "theorem",
            TablePath::Conformal => "conformal",
            TablePath::Oracle => "oracle",
        }
    }
}

impl fmt::Display for TablePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TablePath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma1" => Ok(TablePath::Sigma1),
            "theorem" => Ok(TablePath::Theorem),
            "conformal" => Ok(TablePath::Conformal),
            "oracle" => Ok(TablePath::Oracle),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// One entry of a serialized table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChristoffelRecord {
    pub a: FrameLabel,
    pub b: FrameLabel,
    pub c: FrameLabel,
    pub value: f64,
    pub path: TablePath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTable {
    pub m: usize,
    pub values: Tensor3,
    pub path: TablePath,
}

impl ChristoffelTable {
    pub fn dim(&self) -> usize {
        self.m + 2
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[(a, b, c)]
    }

    pub fn entry(&self, a: FrameLabel, b: FrameLabel, c: FrameLabel) -> f64 {
        let m = self.m;
        self.values[(a.index(m), b.index(m), c.index(m))]
    }

    /// Dense records in row-major label order.
    pub fn records(&self) -> Vec<ChristoffelRecord> {
        let m = self.m;
        self.values
            .iter()
            .map(|((a, b, c), value)| ChristoffelRecord {
                a: FrameLabel::from_index(a, m),
                b: FrameLabel::from_index(b, m),
                c: FrameLabel::from_index(c, m),
                value,
                path: self.path,
            })
            .collect()
    }

    /// Largest entrywise deviation and its indices.
    pub fn max_deviation(&self, other: &ChristoffelTable) -> (f64, (usize, usize, usize)) {
        self.values.max_abs_diff(&other.values)
    }

    /// `max |Γ_AB^C - Γ_BA^C - C_AB^C|`.
    pub fn torsion_residual(&self, brackets: &Tensor3) -> (f64, (usize, usize, usize)) {
        let n = self.dim();
        let mut worst = (0.0, (0, 0, 0));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let r = (self.get(a, b, c) - self.get(b, a, c) - brackets[(a, b, c)]).abs();
                    if r > worst.0 || r.is_nan() {
                        worst = (r, (a, b, c));
                    }
                }
            }
        }
        worst
    }

    pub fn apply_fault(&mut self, fault: &Fault) {
        let m = self.m;
        let idx = (fault.a.index(m), fault.b.index(m), fault.c.index(m));
        self.values[idx] = -self.values[idx];
    }
}

/// Sign flip of a single table entry, for exercising the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub a: FrameLabel,
    pub b: FrameLabel,
    pub c: FrameLabel,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.a, self.b, self.c)
    }
}

impl FromStr for Fault {
    type Err = Error;
    /// `"E1,E2,q"` flips `Γ_{E1 E2}^q`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidLabel(s.to_string()));
        }
        Ok(Fault {
            a: parts[0].parse()?,
            b: parts[1].parse()?,
            c: parts[2].parse()?,
        })
    }
}

/// Everything the closed forms consume at one point: base tensors, parameter
/// values, and frame derivatives of the parameters.
#[derive(Debug, Clone)]
pub struct LocalData {
    pub m: usize,
    pub frame: FrameAt,
    pub base: BaseFrameData,
    pub values: ParamValues,
    /// `d_sigma[A] = X_A(σ)`; likewise for `α`, `β`.
    pub d_sigma: Vec<f64>,
    pub d_alpha: Vec<f64>,
    pub d_beta: Vec<f64>,
    /// `d_gamma[A][k] = X_A(γ^k)`.
    pub d_gamma: Vec<Vec<f64>>,
    /// `h[i] = γ^k g_ik`.
    pub h: Vec<f64>,
    /// `dh[(i, j)] = Ê_i(γ^k g_jk)`.
    pub dh: DMatrix<f64>,
    /// `γ^m γ^k g_mk`.
    pub gamma_norm: f64,
    pub s: Tensor3,
}

impl LocalData {
    pub fn new(params: &MetricParams, base: &KahlerBase, p: &Point) -> Result<Self> {
        let m = base.dim();
        if params.base_dim() != m {
            return Err(Error::InvalidDimension(format!(
                "parameters describe a base of dimension {}, base has dimension {}",
                params.base_dim(),
                m
            )));
        }
        let n = m + 2;
        let frame = lift_frame(base, p)?;
        let data = base.base_data(p.base(m))?;
        let jets = params.jets(p.coords())?;
        let values = jets.values();
        let rows: Vec<Vec<f64>> = (0..n).map(|a| frame.row(a)).collect();
        let along =
            |j: &crate::fields::Jet| -> Vec<f64> { rows.iter().map(|r| j.along(r)).collect() };
        let d_sigma = along(&jets.sigma);
        let d_alpha = along(&jets.alpha);
        let d_beta = along(&jets.beta);
        let d_gamma: Vec<Vec<f64>> = (0..n)
            .map(|a| jets.gamma.iter().map(|j| j.along(&rows[a])).collect())
            .collect();
        let h = lower(&values.gamma, &data.g);
        // Ê_i(γ^k g_jk) = Ê_i(γ^k) g_jk + γ^k E_i(g_jk)
        let dh = DMatrix::from_fn(m, m, |i, j| {
            (0..m)
                .map(|k| d_gamma[i][k] * data.g[(j, k)] + values.gamma[k] * data.dg[(i, j, k)])
                .sum()
        });
        let gamma_norm = quad(&values.gamma, &data.g);
        let s = s_values(&values.gamma, &data);
        Ok(LocalData {
            m,
            frame,
            base: data,
            values,
            d_sigma,
            d_alpha,
            d_beta,
            d_gamma,
            h,
            dh,
            gamma_norm,
            s,
        })
    }
}

/// `S_{ij|k}` at a point, with the data needed to check its symmetry law.
#[derive(Debug, Clone, PartialEq)]
pub struct STensorAt {
    pub values: Tensor3,
    omega: DMatrix<f64>,
    gamma_lowered: Vec<f64>,
}

impl STensorAt {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i, j, k)]
    }

    /// `S_{ij|k} - S_{ji|k}`.
    pub fn antisymmetric_part(&self, i: usize, j: usize, k: usize) -> f64 {
        self.get(i, j, k) - self.get(j, i, k)
    }

    /// `max |S_{ij|k} - S_{ji|k} + ½ ω_ij γ^l g_lk|`. Only the last term of
    /// `S` is antisymmetric in `(i, j)`.
    pub fn symmetry_residual(&self) -> f64 {
        let m = self.values.dim();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let r = self.antisymmetric_part(i, j, k)
                        + 0.5 * self.omega[(i, j)] * self.gamma_lowered[k];
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }
}

fn s_values(gamma: &[f64], d: &BaseFrameData) -> Tensor3 {
    let m = d.dim;
    let (om, g) = (&d.omega, &d.g);
    Tensor3::from_fn(m, |i, j, k| {
        (0..m)
            .map(|l| {
                gamma[l] / 4.0
                    * (om[(i, k)] * g[(l, j)] + om[(j, k)] * g[(l, i)] - om[(i, j)] * g[(l, k)])
            })
            .sum()
    })
}

pub fn s_tensor(params: &MetricParams, base: &KahlerBase, p: &Point) -> Result<STensorAt> {
    if params.base_dim() != base.dim() {
        return Err(Error::InvalidDimension(
            "parameters and base disagree".into(),
        ));
    }
    let values = params.values(p.coords())?;
    let d = base.base_data(p.base(base.dim()))?;
    Ok(STensorAt {
        values: s_values(&values.gamma, &d),
        gamma_lowered: lower(&values.gamma, &d.g),
        omega: d.omega,
    })
}

/// Table for a metric with `σ ≡ 1`. Fails when `σ` or its derivatives at
/// `p` differ from those of the constant 1.
pub fn christoffel_sigma1(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<ChristoffelTable> {
    let ld = LocalData::new(params, base, p)?;
    let derivative = ld.d_sigma.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if (ld.values.sigma - 1.0).abs() > 1e-12 || derivative > 1e-12 {
        return Err(Error::SigmaNotUnit {
            value: ld.values.sigma,
            derivative,
        });
    }
    Ok(ChristoffelTable {
        m: ld.m,
        values: sigma1_values(&ld),
        path: TablePath::Sigma1,
    })
}

fn sigma1_values(ld: &LocalData) -> Tensor3 {
    let m = ld.m;
    let (p, q) = (m, m + 1);
    let d = &ld.base;
    let (g, gi, om, c, nab) = (&d.g, &d.g_inv, &d.omega, &d.c, &d.levi_civita_lower);
    let ParamValues {
        alpha: a,
        beta: b,
        ref gamma,
        ..
    } = ld.values;
    let (da, db, dgam) = (&ld.d_alpha, &ld.d_beta, &ld.d_gamma);
    let gg = ld.gamma_norm;
    let (h, dh, s) = (&ld.h, &ld.dh, &ld.s);
    // p_o(γ^t) g_it and q_o(γ^t) g_it
    let pg = lower(&dgam[p], g);
    let qg = lower(&dgam[q], g);
    let sum = |f: &dyn Fn(usize) -> f64| (0..m).map(f).sum::<f64>();

    let mut t = Tensor3::zeros(m + 2);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                t[(i, j, k)] = sum(&|l| gi[(k, l)] * (nab[(i, j, l)] + s[(i, j, l)]))
                    + gamma[k] * om[(i, j)] / 4.0;
            }
            t[(i, j, p)] = dh[(i, j)] / (2.0 * a) + dh[(j, i)] / (2.0 * a)
                - gg * om[(i, j)] / (4.0 * a)
                - sum(&|l| gamma[l] * (nab[(i, j, l)] + s[(i, j, l)])) / a
                + sum(&|l| c[(i, j, l)] * h[l]) / (2.0 * a);
            t[(i, j, q)] = -om[(i, j)] / 2.0;
        }
    }
    for i in 0..m {
        for k in 0..m {
            let ip_k = a * sum(&|l| gi[(k, l)] * om[(i, l)]) / 4.0;
            t[(i, p, k)] = ip_k;
            t[(p, i, k)] = ip_k;

            let iq_k = sum(&|l| gi[(k, l)] * dh[(i, l)]) / 4.0
                - sum(&|l| gi[(k, l)] * dh[(l, i)]) / 4.0
                - sum(&|r| sum(&|tt| sum(&|l| gamma[l] * c[(i, r, tt)] * g[(tt, l)] * gi[(k, r)])))
                    / 4.0
                + b * sum(&|l| gi[(k, l)] * om[(i, l)]) / 4.0
                - gamma[k] * da[i] / (4.0 * a)
                + gamma[k] * pg[i] / (4.0 * a);
            t[(i, q, k)] = iq_k;
            t[(q, i, k)] = iq_k;
        }
        let ip_p = da[i] / (2.0 * a) + pg[i] / (2.0 * a) - sum(&|l| gamma[l] * om[(i, l)]) / 4.0;
        t[(i, p, p)] = ip_p;
        t[(p, i, p)] = ip_p;

        let iq_p = db[i] / (2.0 * a) + gg * da[i] / (4.0 * a * a)
            - gg * pg[i] / (4.0 * a * a)
            - b * da[i] / (2.0 * a * a)
            + b * pg[i] / (2.0 * a * a)
            - sum(&|l| gamma[l] * dh[(i, l)]) / (4.0 * a)
            + sum(&|l| gamma[l] * dh[(l, i)]) / (4.0 * a)
            + sum(&|l| sum(&|tt| sum(&|r| gamma[l] * gamma[tt] * g[(tt, r)] * c[(i, l, r)])))
                / (4.0 * a)
            - sum(&|l| gamma[l] * om[(i, l)]) * b / (4.0 * a);
        t[(i, q, p)] = iq_p;
        t[(q, i, p)] = iq_p;

        let iq_q = da[i] / (2.0 * a) - pg[i] / (2.0 * a);
        t[(i, q, q)] = iq_q;
        t[(q, i, q)] = iq_q;
    }
    t[(p, p, p)] = da[p] / a;
    for k in 0..m {
        let pq_k = dgam[p][k] / 4.0 - sum(&|l| gi[(k, l)] * da[l]) / 4.0;
        t[(p, q, k)] = pq_k;
        t[(q, p, k)] = pq_k;
        t[(q, q, k)] = sum(&|l| gi[(k, l)] * qg[l]) / 2.0
            - sum(&|l| gi[(k, l)] * db[l]) / 4.0
            - gamma[k] * da[q] / (2.0 * a)
            + gamma[k] * db[p] / (4.0 * a);
    }
    let pq_p = db[p] / (2.0 * a) - sum(&|l| gamma[l] * pg[l]) / (4.0 * a)
        + sum(&|l| gamma[l] * da[l]) / (4.0 * a);
    t[(p, q, p)] = pq_p;
    t[(q, p, p)] = pq_p;
    t[(q, q, p)] = db[q] / (2.0 * a) + gg * da[q] / (2.0 * a * a)
        - gg * db[p] / (4.0 * a * a)
        - b * da[q] / (a * a)
        + b * db[p] / (2.0 * a * a)
        - sum(&|l| gamma[l] * qg[l]) / (2.0 * a)
        + sum(&|l| gamma[l] * db[l]) / (4.0 * a);
    t[(q, q, q)] = da[q] / a - db[p] / (2.0 * a);
    t
}

/// Components `(grad φ)^A` of the gradient of `φ` in the adapted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientComponents {
    pub components: Vec<f64>,
}

impl GradientComponents {
    pub fn get(&self, a: FrameLabel) -> f64 {
        let m = self.components.len() - 2;
        self.components[a.index(m)]
    }
}

/// Gradient for the metric with the same `(α, β, γ)` and `σ ≡ 1`.
fn unit_gradient(ld: &LocalData, dphi: &[f64]) -> Vec<f64> {
    let m = ld.m;
    let (p, q) = (m, m + 1);
    let a = ld.values.alpha;
    let b = ld.values.beta;
    let gamma = &ld.values.gamma;
    let gi = &ld.base.g_inv;
    let mut out = vec![0.0; m + 2];
    for i in 0..m {
        out[i] = (0..m).map(|k| gi[(i, k)] * dphi[k]).sum::<f64>() - gamma[i] * dphi[p] / a;
    }
    out[p] = 2.0 / a * dphi[q] + (ld.gamma_norm - 2.0 * b) * dphi[p] / (a * a)
        - (0..m).map(|k| gamma[k] * dphi[k]).sum::<f64>() / a;
    out[q] = 2.0 / a * dphi[p];
    out
}

fn frame_derivatives(ld: &LocalData, phi: &ScalarField, p: &Point) -> Result<Vec<f64>> {
    let jet = phi.jet(p.coords()).map_err(|e| Error::at("phi", e))?;
    Ok((0..ld.m + 2).map(|a| jet.along(&ld.frame.row(a))).collect())
}

/// Gradient of `φ` with respect to the metric given by `params`.
pub fn grad_components(
    phi: &ScalarField,
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<GradientComponents> {
    let ld = LocalData::new(params, base, p)?;
    let dphi = frame_derivatives(&ld, phi, p)?;
    let sigma = ld.values.sigma;
    Ok(GradientComponents {
        components: unit_gradient(&ld, &dphi)
            .into_iter()
            .map(|v| v / sigma)
            .collect(),
    })
}

/// Table of `e^{2φ} g` from the table of `g`:
/// `D_X Y = ∇_X Y + X(φ) Y + Y(φ) X - g(X, Y) grad φ`.
pub fn conformal_transform(
    table: &ChristoffelTable,
    phi: &ScalarField,
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<ChristoffelTable> {
    let ld = LocalData::new(params, base, p)?;
    let m = ld.m;
    let n = m + 2;
    let dphi = frame_derivatives(&ld, phi, p)?;
    // The product g(X, Y) grad φ does not change under constant rescaling
    // of g, so the σ ≡ 1 coefficients are used throughout.
    let grad = unit_gradient(&ld, &dphi);
    let unit = crate::metric::assemble_values(
        &ParamValues {
            sigma: 1.0,
            ..ld.values.clone()
        },
        &ld.base.g,
    )?;
    let mut values = table.values.clone();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut add = -unit.g[(a, b)] * grad[c];
                if b == c {
                    add += dphi[a];
                }
                if a == c {
                    add += dphi[b];
                }
                values[(a, b, c)] += add;
            }
        }
    }
    Ok(ChristoffelTable {
        m,
        values,
        path: TablePath::Conformal,
    })
}

/// The σ ≡ 1 table rescaled by `φ = ½ log σ`.
pub fn christoffel_conformal(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<ChristoffelTable> {
    let unit = params.with_unit_sigma();
    let table = christoffel_sigma1(&unit, base, p)?;
    params.values(p.coords())?;
    conformal_transform(&table, &params.sigma.half_log(), &unit, base, p)
}

/// Which reading of the general closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transcription {
    /// `Γ_ij^p` carries `c_ij^l γ^k g_lk / (2α)` and `Γ_iq^p` carries
    /// `-γ^m ω_im β / (4α)`. This is the Levi-Civita connection.
    #[default]
    Corrected,
    /// Drops the bracket term from `Γ_ij^p` and uses `+γ^m ω_im β / (4α)` in
    /// `Γ_iq^p`. Differs from the Levi-Civita connection whenever the base
    /// frame does not commute, or `β γ^m ω_im ≠ 0`.
    AsPrinted,
}

/// General table, any `σ > 0`.
pub fn christoffel(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<ChristoffelTable> {
    christoffel_with(params, base, p, Transcription::Corrected)
}

pub fn christoffel_with(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    variant: Transcription,
) -> Result<ChristoffelTable> {
    let ld = LocalData::new(params, base, p)?;
    Ok(ChristoffelTable {
        m: ld.m,
        values: theorem_values(&ld, variant),
        path: TablePath::Theorem,
    })
}

fn theorem_values(ld: &LocalData, variant: Transcription) -> Tensor3 {
    let (bracket_term, beta_omega_sign) = match variant {
        Transcription::Corrected => (1.0, -1.0),
        Transcription::AsPrinted => (0.0, 1.0),
    };
    let m = ld.m;
    let (p, q) = (m, m + 1);
    let d = &ld.base;
    let (g, gi, om, c, nab) = (&d.g, &d.g_inv, &d.omega, &d.c, &d.levi_civita_lower);
    let ParamValues {
        sigma: sg,
        alpha: a,
        beta: b,
        ref gamma,
    } = ld.values;
    let (ds, da, db, dgam) = (&ld.d_sigma, &ld.d_alpha, &ld.d_beta, &ld.d_gamma);
    let gg = ld.gamma_norm;
    let (h, dh, s) = (&ld.h, &ld.dh, &ld.s);
    let pg = lower(&dgam[p], g);
    let qg = lower(&dgam[q], g);
    let sum = |f: &dyn Fn(usize) -> f64| (0..m).map(f).sum::<f64>();
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };

    // g^{mk} Ê_k(σ) - (γ^m/α) p_o(σ)
    let v_sigma: Vec<f64> = (0..m)
        .map(|k| sum(&|l| gi[(k, l)] * ds[l]) - gamma[k] * ds[p] / a)
        .collect();
    // (2/α) q_o(σ) + α⁻² (γγg - 2β) p_o(σ) - (γ^m/α) Ê_m(σ)
    let w_sigma =
        2.0 / a * ds[q] + (gg - 2.0 * b) * ds[p] / (a * a) - sum(&|l| gamma[l] * ds[l]) / a;

    let mut t = Tensor3::zeros(m + 2);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                t[(i, j, k)] = sum(&|l| gi[(k, l)] * nab[(i, j, l)])
                    + sum(&|l| gi[(k, l)] * s[(i, j, l)])
                    + gamma[k] * om[(i, j)] / 4.0
                    + ds[i] * delta(j, k) / (2.0 * sg)
                    + ds[j] * delta(i, k) / (2.0 * sg)
                    - g[(i, j)] * v_sigma[k] / (2.0 * sg);
            }
            t[(i, j, p)] = dh[(i, j)] / (2.0 * a) + dh[(j, i)] / (2.0 * a)
                - gg * om[(i, j)] / (4.0 * a)
                - sum(&|l| gamma[l] * nab[(i, j, l)]) / a
                - sum(&|l| gamma[l] * s[(i, j, l)]) / a
                - g[(i, j)] * w_sigma / (2.0 * sg)
                + bracket_term * sum(&|l| c[(i, j, l)] * h[l]) / (2.0 * a);
            t[(i, j, q)] = -om[(i, j)] / 2.0 - g[(i, j)] * ds[p] / (a * sg);
        }
    }
    for i in 0..m {
        for k in 0..m {
            let ip_k =
                a * sum(&|l| gi[(k, l)] * om[(i, l)]) / 4.0 + ds[p] * delta(i, k) / (2.0 * sg);
            t[(i, p, k)] = ip_k;
            t[(p, i, k)] = ip_k;

            let iq_k = sum(&|l| gi[(k, l)] * dh[(i, l)]) / 4.0
                - sum(&|l| gi[(k, l)] * dh[(l, i)]) / 4.0
                - sum(&|r| sum(&|tt| sum(&|l| gamma[l] * c[(i, r, tt)] * g[(tt, l)] * gi[(k, r)])))
                    / 4.0
                + sum(&|l| gi[(k, l)] * om[(i, l)]) * b / 4.0
                - gamma[k] * da[i] / (4.0 * a)
                + gamma[k] * pg[i] / (4.0 * a)
                + ds[q] * delta(i, k) / (2.0 * sg)
                - h[i] * v_sigma[k] / (4.0 * sg);
            t[(i, q, k)] = iq_k;
            t[(q, i, k)] = iq_k;
        }
        let ip_p = da[i] / (2.0 * a) + pg[i] / (2.0 * a) - sum(&|l| gamma[l] * om[(i, l)]) / 4.0
            + ds[i] / (2.0 * sg);
        t[(i, p, p)] = ip_p;
        t[(p, i, p)] = ip_p;

        let iq_p = db[i] / (2.0 * a) + gg * da[i] / (4.0 * a * a)
            - gg * pg[i] / (4.0 * a * a)
            - b * da[i] / (2.0 * a * a)
            + b * pg[i] / (2.0 * a * a)
            - sum(&|l| gamma[l] * dh[(i, l)]) / (4.0 * a)
            + sum(&|l| gamma[l] * dh[(l, i)]) / (4.0 * a)
            + sum(&|l| sum(&|tt| sum(&|r| gamma[l] * gamma[tt] * g[(tt, r)] * c[(i, l, r)])))
                / (4.0 * a)
            + beta_omega_sign * sum(&|l| gamma[l] * om[(i, l)]) * b / (4.0 * a)
            - h[i] * w_sigma / (4.0 * sg);
        t[(i, q, p)] = iq_p;
        t[(q, i, p)] = iq_p;

        let iq_q = da[i] / (2.0 * a) - pg[i] / (2.0 * a) + ds[i] / (2.0 * sg)
            - h[i] * ds[p] / (2.0 * a * sg);
        t[(i, q, q)] = iq_q;
        t[(q, i, q)] = iq_q;
    }
    t[(p, p, p)] = da[p] / a + ds[p] / sg;
    for k in 0..m {
        let pq_k =
            dgam[p][k] / 4.0 - sum(&|l| gi[(k, l)] * da[l]) / 4.0 - a * v_sigma[k] / (4.0 * sg);
        t[(p, q, k)] = pq_k;
        t[(q, p, k)] = pq_k;
        t[(q, q, k)] = sum(&|l| gi[(k, l)] * qg[l]) / 2.0
            - sum(&|l| gi[(k, l)] * db[l]) / 4.0
            - gamma[k] * da[q] / (2.0 * a)
            + gamma[k] * db[p] / (4.0 * a)
            - b * v_sigma[k] / (4.0 * sg);
    }
    let pq_p = db[p] / (2.0 * a) - sum(&|l| gamma[l] * pg[l]) / (4.0 * a)
        + sum(&|l| gamma[l] * da[l]) / (4.0 * a)
        + ds[q] / (2.0 * sg)
        - (ds[q] + (gg - 2.0 * b) * ds[p] / (2.0 * a) - sum(&|l| gamma[l] * ds[l]) / 2.0)
            / (2.0 * sg);
    t[(p, q, p)] = pq_p;
    t[(q, p, p)] = pq_p;
    t[(q, q, p)] = db[q] / (2.0 * a) + gg * da[q] / (2.0 * a * a)
        - gg * db[p] / (4.0 * a * a)
        - b * da[q] / (a * a)
        + b * db[p] / (2.0 * a * a)
        - sum(&|l| gamma[l] * qg[l]) / (2.0 * a)
        + sum(&|l| gamma[l] * db[l]) / (4.0 * a)
        - b / (2.0 * sg)
            * (ds[q] / a + (gg - 2.0 * b) * ds[p] / (2.0 * a * a)
                - sum(&|l| gamma[l] * ds[l]) / (2.0 * a));
    t[(q, q, q)] = da[q] / a - db[p] / (2.0 * a) + ds[q] / sg - b * ds[p] / (2.0 * a * sg);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapted_frame::FrameLabel::{E, P, Q};
    use crate::metric::assemble;
    use crate::scenarios::Scenario;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    const P0: [f64; 4] = [0.3, -0.2, 0.1, 0.5];

    #[test]
    fn d0_sigma1_entries() {
        let sc = Scenario::d0();
        let t = christoffel_sigma1(&sc.params, &sc.base, &pt(&P0)).unwrap();
        assert_eq!(t.path, TablePath::Sigma1);
        assert_eq!(t.entry(E(0), E(1), Q), -0.5);
        assert_eq!(t.entry(E(0), P, E(1)), 0.25);
        assert_eq!(t.entry(P, P, P), 0.0);
    }

    #[test]
    fn d0_theorem_entries_and_zero_blocks() {
        let sc = Scenario::d0();
        let t = christoffel(&sc.params, &sc.base, &pt(&P0)).unwrap();
        assert_eq!(t.entry(E(0), E(1), Q), -0.5);
        assert_eq!(t.entry(E(0), P, E(1)), 0.25);
        assert_eq!(t.entry(P, P, P), 0.0);
        let rich = Scenario::rich();
        let t = christoffel(&rich.params, &rich.base, &pt(&P0)).unwrap();
        for i in 0..2 {
            assert_eq!(t.entry(E(i), P, Q), 0.0);
            assert_eq!(t.entry(P, E(i), Q), 0.0);
            assert_eq!(t.entry(P, P, E(i)), 0.0);
        }
        assert_eq!(t.entry(P, P, Q), 0.0);
        assert_eq!(t.entry(P, Q, Q), 0.0);
        assert_eq!(t.entry(Q, P, Q), 0.0);
    }

    #[test]
    fn sigma_exp_t_scales_ij_q_block() {
        let sc = Scenario::sigma_exp_t();
        let t = christoffel(&sc.params, &sc.base, &pt(&P0)).unwrap();
        assert!((t.entry(E(0), E(0), Q) + 1.0).abs() < 1e-14);
        assert!((t.entry(P, P, P) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma1_rejects_varying_sigma() {
        let sc = Scenario::sigma_exp_t();
        assert!(matches!(
            christoffel_sigma1(&sc.params, &sc.base, &pt(&[0.0; 4])),
            Err(Error::SigmaNotUnit { .. })
        ));
    }

    #[test]
    fn s_tensor_examples() {
        let base = KahlerBase::flat(2).unwrap();
        let zero = MetricParams::constant(1.0, 1.0, 0.0, &[0.0, 0.0]).unwrap();
        let s = s_tensor(&zero, &base, &pt(&P0)).unwrap();
        assert_eq!(s.values.max_abs(), 0.0);
        let g1 = MetricParams::constant(1.0, 1.0, 0.0, &[1.0, 0.0]).unwrap();
        let s = s_tensor(&g1, &base, &pt(&P0)).unwrap();
        assert_eq!(s.get(0, 0, 1), 0.5);
        assert!(s.symmetry_residual() < 1e-15);
    }

    #[test]
    fn s_tensor_antisymmetric_part() {
        let sc = Scenario::rich();
        let s = s_tensor(&sc.params, &sc.base, &pt(&P0)).unwrap();
        assert!(s.symmetry_residual() < 1e-15);
        assert!(s.antisymmetric_part(0, 1, 0).abs() > 1e-3);
    }

    #[test]
    fn gradient_examples() {
        let sc = Scenario::d0();
        let sym = crate::fields::Symbols::chart(2);
        let phi = ScalarField::parse("t", &sym).unwrap();
        let g = grad_components(&phi, &sc.params, &sc.base, &pt(&P0)).unwrap();
        assert_eq!(g.components, vec![0.0, 0.0, 0.0, 2.0]);
        let c = ScalarField::constant(3.0, 4);
        let g = grad_components(&c, &sc.params, &sc.base, &pt(&P0)).unwrap();
        assert!(g.components.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_defining_property() {
        let sc = Scenario::rich();
        let p = pt(&P0);
        let sym = crate::fields::Symbols::chart(2);
        let phi = ScalarField::parse("x1 + s", &sym).unwrap();
        let grad = grad_components(&phi, &sc.params, &sc.base, &p).unwrap();
        let g = assemble(&sc.params, &sc.base, &p).unwrap();
        let frame = lift_frame(&sc.base, &p).unwrap();
        for a in 0..4 {
            let mut e = vec![0.0; 4];
            e[a] = 1.0;
            let lhs = g.pair(&grad.components, &e);
            let rhs = phi.directional(p.coords(), &frame.row(a)).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "{a}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn conformal_identity_and_cancellation() {
        let sc = Scenario::rich();
        let p = pt(&P0);
        let unit = sc.params.with_unit_sigma();
        let t = christoffel_sigma1(&unit, &sc.base, &p).unwrap();
        let zero = ScalarField::constant(0.0, 4);
        let same = conformal_transform(&t, &zero, &unit, &sc.base, &p).unwrap();
        assert_eq!(same.values, t.values);

        let phi = ScalarField::parse("0.3*x1*t + s", &crate::fields::Symbols::chart(2)).unwrap();
        let out = conformal_transform(&t, &phi, &unit, &sc.base, &p).unwrap();
        assert!((out.entry(P, Q, Q) - t.entry(P, Q, Q)).abs() < 1e-15);
        assert!((out.entry(E(0), P, Q) - t.entry(E(0), P, Q)).abs() < 1e-15);
        // Γ_pp^p gains 2 p(φ)
        let dphi = 0.3 * 0.3;
        assert!((out.entry(P, P, P) - t.entry(P, P, P) - 2.0 * dphi).abs() < 1e-14);
    }

    #[test]
    fn three_paths_agree() {
        for sc in [Scenario::rich(), Scenario::flat4()] {
            let n = sc.params.chart_dim();
            let p = pt(&(0..n).map(|i| 0.2 - 0.05 * i as f64).collect::<Vec<_>>());
            let t = christoffel(&sc.params, &sc.base, &p).unwrap();
            let c = christoffel_conformal(&sc.params, &sc.base, &p).unwrap();
            assert!(t.max_deviation(&c).0 < 1e-12, "{}", sc.name);
        }
    }

    #[test]
    fn as_printed_differs_only_where_expected() {
        let p = pt(&P0);
        let d0 = Scenario::gamma_x1();
        let a = christoffel_with(&d0.params, &d0.base, &p, Transcription::AsPrinted).unwrap();
        let b = christoffel(&d0.params, &d0.base, &p).unwrap();
        assert_eq!(a.values, b.values);

        let w = Scenario::warped();
        let a = christoffel_with(&w.params, &w.base, &p, Transcription::AsPrinted).unwrap();
        let b = christoffel(&w.params, &w.base, &p).unwrap();
        let brackets = crate::adapted_frame::bracket_table(&w.base, &p).unwrap();
        assert!(a.torsion_residual(&brackets.structure).0 > 1e-2);
        assert!(b.torsion_residual(&brackets.structure).0 < 1e-14);
        for ((x, y, z), v) in a.values.iter() {
            if (v - b.get(x, y, z)).abs() > 0.0 {
                let (lx, lz) = (FrameLabel::from_index(x, 2), FrameLabel::from_index(z, 2));
                assert_eq!(lz, P, "unexpected entry {x} {y} {z}");
                assert!(matches!(lx, E(_) | Q));
            }
        }
    }

    #[test]
    fn fault_parsing_and_application() {
        let f: Fault = "E1,E2,q".parse().unwrap();
        assert_eq!(
            f,
            Fault {
                a: E(0),
                b: E(1),
                c: Q
            }
        );
        assert_eq!(f.to_string(), "E1,E2,q");
        assert!("E1,E2".parse::<Fault>().is_err());
        assert!("E1,x,q".parse::<Fault>().is_err());
        let sc = Scenario::d0();
        let mut t = christoffel(&sc.params, &sc.base, &pt(&P0)).unwrap();
        t.apply_fault(&f);
        assert_eq!(t.entry(E(0), E(1), Q), 0.5);
    }

    #[test]
    fn records_are_dense_and_labelled() {
        let sc = Scenario::d0();
        let t = christoffel(&sc.params, &sc.base, &pt(&P0)).unwrap();
        let r = t.records();
        assert_eq!(r.len(), 64);
        assert_eq!(r[0].a, E(0));
        assert_eq!(r[63].c, Q);
        assert!(r.iter().all(|x| x.path == TablePath::Theorem));
        assert_eq!("oracle".parse::<TablePath>().unwrap(), TablePath::Oracle);
    }
}
