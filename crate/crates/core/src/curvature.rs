//! Riemann and Ricci tensors in the adapted frame, plus a coordinate-frame
//! computation used as an independent check.
//!
//! Conventions: `R(X_A, X_B) X_C = R[(A, B, C, D)] X_D` with
//!
//! ```text
//! R_ABC^D = X_A(Γ_BC^D) - X_B(Γ_AC^D) + Γ_BC^E Γ_AE^D - Γ_AC^E Γ_BE^D - C_AB^E Γ_EC^D
//! ```
//!
//! and `Ric_BC = R_DBC^D`.

use nalgebra::DMatrix;

use crate::adapted_frame::{bracket_table, coordinate_brackets, frame_row_jets, lift_frame};
use crate::connection::christoffel;
use crate::error::Result;
use crate::fields::Point;
use crate::kahler_base::KahlerBase;
use crate::metric::{assemble, MetricAt, MetricParams};
use crate::oracle::{christoffel_oracle, KoszulContext, OracleDerivative};
use crate::tensor::{Tensor3, Tensor4};

/// Default step for differentiating Christoffel symbols.
pub const DEFAULT_CURVATURE_STEP: f64 = 1e-3;

/// Which connection table feeds the curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureSource {
    /// Closed-form table with the analytic bracket table.
    Theorem,
    /// Koszul oracle with coordinate brackets. Works for any potential,
    /// including ones inconsistent with the Kahler form.
    Oracle(OracleDerivative),
}

/// Step and extrapolation for derivatives of `Γ` along the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    pub source: CurvatureSource,
    pub step: f64,
    pub richardson: bool,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            source: CurvatureSource::Theorem,
            step: DEFAULT_CURVATURE_STEP,
            richardson: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RiemannAt {
    pub m: usize,
    /// `R_ABC^D`.
    pub up: Tensor4,
    /// `R_ABCD = R_ABC^E G_ED`.
    pub lowered: Tensor4,
    pub metric: MetricAt,
}

/// Residuals of the classical identities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RiemannSymmetries {
    /// `R_ABC^D + R_BAC^D`.
    pub first_pair: f64,
    /// `R_ABCD + R_ABDC`.
    pub last_pair: f64,
    /// `R_ABCD - R_CDAB`.
    pub pair_exchange: f64,
    /// `R_ABC^D + R_BCA^D + R_CAB^D`.
    pub bianchi: f64,
}

impl RiemannSymmetries {
    pub fn max(&self) -> f64 {
        self.first_pair
            .max(self.last_pair)
            .max(self.pair_exchange)
            .max(self.bianchi)
    }
}

impl RiemannAt {
    pub fn dim(&self) -> usize {
        self.m + 2
    }

    pub fn symmetries(&self) -> RiemannSymmetries {
        let n = self.dim();
        let (r, l) = (&self.up, &self.lowered);
        let mut s = RiemannSymmetries::default();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s.first_pair = s.first_pair.max((r[(a, b, c, d)] + r[(b, a, c, d)]).abs());
                        s.last_pair = s.last_pair.max((l[(a, b, c, d)] + l[(a, b, d, c)]).abs());
                        s.pair_exchange = s
                            .pair_exchange
                            .max((l[(a, b, c, d)] - l[(c, d, a, b)]).abs());
                        s.bianchi = s
                            .bianchi
                            .max((r[(a, b, c, d)] + r[(b, c, a, d)] + r[(c, a, b, d)]).abs());
                    }
                }
            }
        }
        s
    }

    /// Lowered tensor expressed in chart coordinates.
    pub fn to_coordinates(&self, frame_inverse: &DMatrix<f64>) -> Tensor4 {
        transform4(&self.lowered, frame_inverse)
    }
}

/// `out_μνσκ = W_μ^A W_ν^B W_σ^C W_κ^D t_ABCD`, one index at a time.
fn transform4(t: &Tensor4, w: &DMatrix<f64>) -> Tensor4 {
    let n = t.dim();
    let mut cur = t.clone();
    for slot in 0..4 {
        let mut next = Tensor4::zeros(n);
        for (idx, _) in t.iter() {
            let mut acc = 0.0;
            for k in 0..n {
                let mut src = [idx.0, idx.1, idx.2, idx.3];
                let mu = src[slot];
                src[slot] = k;
                acc += w[(mu, k)] * cur[(src[0], src[1], src[2], src[3])];
            }
            next[idx] = acc;
        }
        cur = next;
    }
    cur
}

fn table_and_brackets(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    source: CurvatureSource,
) -> Result<(Tensor3, Tensor3)> {
    match source {
        CurvatureSource::Theorem => {
            let t = christoffel(params, base, p)?;
            let b = bracket_table(base, p)?;
            Ok((t.values, b.structure))
        }
        CurvatureSource::Oracle(derivative) => {
            let ctx = KoszulContext::new(base.clone(), params.clone(), derivative)?;
            let t = christoffel_oracle(&ctx, p)?;
            let frame = lift_frame(base, p)?;
            let b = coordinate_brackets(&frame, &frame_row_jets(base, p)?);
            Ok((t.values, b))
        }
    }
}

fn table_only(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    source: CurvatureSource,
) -> Result<Tensor3> {
    match source {
        CurvatureSource::Theorem => Ok(christoffel(params, base, p)?.values),
        CurvatureSource::Oracle(derivative) => {
            let ctx = KoszulContext::new(base.clone(), params.clone(), derivative)?;
            Ok(christoffel_oracle(&ctx, p)?.values)
        }
    }
}

/// Central difference of `f` along `dir` at `p`, optionally extrapolated.
fn directional<T, F>(p: &Point, dir: &[f64], h: f64, richardson: bool, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> Result<T>,
    T: AsRef<[f64]>,
{
    let diff = |step: f64| -> Result<Vec<f64>> {
        let fwd = f(&p.displaced(dir, step))?;
        let bwd = f(&p.displaced(dir, -step))?;
        Ok(fwd
            .as_ref()
            .iter()
            .zip(bwd.as_ref())
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect())
    };
    let d1 = diff(h)?;
    if !richardson {
        return Ok(d1);
    }
    let d2 = diff(2.0 * h)?;
    Ok(d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| (4.0 * a - b) / 3.0)
        .collect())
}

struct Flat3(Tensor3);

impl AsRef<[f64]> for Flat3 {
    fn as_ref(&self) -> &[f64] {
        self.0.as_slice()
    }
}

pub fn riemann(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    options: &CurvatureOptions,
) -> Result<RiemannAt> {
    let m = base.dim();
    let n = m + 2;
    let (gamma, brackets) = table_and_brackets(params, base, p, options.source)?;
    let frame = lift_frame(base, p)?;
    // dgamma[A] = X_A(Γ) flattened in (B, C, D) order
    let dgamma: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            directional(p, &frame.row(a), options.step, options.richardson, |x| {
                table_only(params, base, x, options.source).map(Flat3)
            })
        })
        .collect::<Result<_>>()?;
    let dg = |a: usize, b: usize, c: usize, d: usize| dgamma[a][(b * n + c) * n + d];

    let mut up = Tensor4::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dg(a, b, c, d) - dg(b, a, c, d);
                    for e in 0..n {
                        v += gamma[(b, c, e)] * gamma[(a, e, d)]
                            - gamma[(a, c, e)] * gamma[(b, e, d)]
                            - brackets[(a, b, e)] * gamma[(e, c, d)];
                    }
                    up[(a, b, c, d)] = v;
                }
            }
        }
    }
    let metric = assemble(params, base, p)?;
    let mut lowered = Tensor4::zeros(n);
    for (idx, _) in up.iter() {
        let (a, b, c, d) = idx;
        lowered[idx] = (0..n).map(|e| up[(a, b, c, e)] * metric.g[(e, d)]).sum();
    }
    Ok(RiemannAt {
        m,
        up,
        lowered,
        metric,
    })
}

#[derive(Debug, Clone)]
pub struct RicciAt {
    /// `Ric_BC = R_DBC^D`.
    pub values: DMatrix<f64>,
    /// `max |Ric_BC - Ric_CB|`.
    pub symmetry_residual: f64,
    /// `G^{BC} Ric_BC`.
    pub scalar: f64,
}

pub fn ricci(riemann: &RiemannAt, metric: &MetricAt) -> RicciAt {
    let n = riemann.dim();
    let values = DMatrix::from_fn(n, n, |b, c| (0..n).map(|d| riemann.up[(d, b, c, d)]).sum());
    let symmetry_residual = (&values - values.transpose()).amax();
    let scalar = (0..n)
        .flat_map(|b| (0..n).map(move |c| (b, c)))
        .map(|(b, c)| metric.inverse[(b, c)] * values[(b, c)])
        .sum();
    RicciAt {
        values,
        symmetry_residual,
        scalar,
    }
}

/// Curvature computed in chart coordinates from the coordinate metric, by
/// two nested central differences.
#[derive(Debug, Clone)]
pub struct CoordinateCurvature {
    /// `g_μν` at the point.
    pub metric: DMatrix<f64>,
    /// `R(∂_μ, ∂_ν, ∂_σ, ∂_κ)` in the same convention as [`RiemannAt::lowered`].
    pub lowered: Tensor4,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
}

/// `g_μν = W_μ^A G_AB W_ν^B` with `∂_μ = W_μ^A X_A`.
pub fn coordinate_metric(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
) -> Result<DMatrix<f64>> {
    let frame = lift_frame(base, p)?;
    let g = assemble(params, base, p)?;
    let w = frame.inverse();
    Ok(w * &g.g * w.transpose())
}

/// `Γ[(μ, ν, ρ)]` with `∇_{∂_μ} ∂_ν = Γ[(μ, ν, ρ)] ∂_ρ`.
fn coordinate_christoffel(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    h: f64,
) -> Result<Tensor3> {
    let n = p.dim();
    let g = coordinate_metric(params, base, p)?;
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(crate::error::Error::SingularMetric)?;
    // dg[k][(μ, ν)] = ∂_k g_μν
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            directional(p, &e, h, true, |x| {
                coordinate_metric(params, base, x).map(|m| m.as_slice().to_vec())
            })
            .map(|v| DMatrix::from_column_slice(n, n, &v))
        })
        .collect::<Result<_>>()?;
    Ok(Tensor3::from_fn(n, |mu, nu, rho| {
        0.5 * (0..n)
            .map(|k| g_inv[(rho, k)] * (dg[mu][(k, nu)] + dg[nu][(k, mu)] - dg[k][(mu, nu)]))
            .sum::<f64>()
    }))
}

pub fn coordinate_curvature(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    step: f64,
) -> Result<CoordinateCurvature> {
    let n = p.dim();
    let metric = coordinate_metric(params, base, p)?;
    let g_inv = metric
        .clone()
        .try_inverse()
        .ok_or(crate::error::Error::SingularMetric)?;
    let gamma = coordinate_christoffel(params, base, p, step)?;
    let dgamma: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            directional(p, &e, step, true, |x| {
                coordinate_christoffel(params, base, x, step).map(Flat3)
            })
        })
        .collect::<Result<_>>()?;
    let dg = |k: usize, a: usize, b: usize, c: usize| dgamma[k][(a * n + b) * n + c];

    let mut up = Tensor4::zeros(n);
    for mu in 0..n {
        for nu in 0..n {
            for s in 0..n {
                for r in 0..n {
                    let mut v = dg(mu, nu, s, r) - dg(nu, mu, s, r);
                    for l in 0..n {
                        v += gamma[(nu, s, l)] * gamma[(mu, l, r)]
                            - gamma[(mu, s, l)] * gamma[(nu, l, r)];
                    }
                    up[(mu, nu, s, r)] = v;
                }
            }
        }
    }
    let mut lowered = Tensor4::zeros(n);
    for (idx, _) in up.iter() {
        let (a, b, c, d) = idx;
        lowered[idx] = (0..n).map(|e| up[(a, b, c, e)] * metric[(e, d)]).sum();
    }
    let ricci = DMatrix::from_fn(n, n, |b, c| (0..n).map(|d| up[(d, b, c, d)]).sum());
    let scalar = (0..n)
        .flat_map(|b| (0..n).map(move |c| (b, c)))
        .map(|(b, c)| g_inv[(b, c)] * ricci[(b, c)])
        .sum();
    Ok(CoordinateCurvature {
        metric,
        lowered,
        ricci,
        scalar,
    })
}

/// Frame-computed curvature compared with the coordinate computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureComparison {
    /// `max |R_frame - R_coordinate|` over lowered coordinate components.
    pub riemann: f64,
    pub scalar_frame: f64,
    pub scalar_coordinate: f64,
}

impl CurvatureComparison {
    pub fn scalar(&self) -> f64 {
        (self.scalar_frame - self.scalar_coordinate).abs()
    }
}

pub fn compare_with_coordinates(
    params: &MetricParams,
    base: &KahlerBase,
    p: &Point,
    options: &CurvatureOptions,
    coordinate_step: f64,
) -> Result<CurvatureComparison> {
    let r = riemann(params, base, p, options)?;
    let ric = ricci(&r, &r.metric);
    let frame = lift_frame(base, p)?;
    let transported = r.to_coordinates(frame.inverse());
    let coord = coordinate_curvature(params, base, p, coordinate_step)?;
    let (riemann, _) = transported.max_abs_diff(&coord.lowered);
    Ok(CurvatureComparison {
        riemann,
        scalar_frame: ric.scalar,
        scalar_coordinate: coord.scalar,
    })
}
