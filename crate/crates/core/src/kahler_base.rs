//! Local model of the Kähler base `(N, J, g_o)` in a chosen frame `(E_i)`.
//!
//! All frame-level quantities (`g_ij`, `J_i^j`, `ω_ij`, the structure
//! functions `c_ij^k` and the Levi-Civita connection `∇°`) are produced by
//! [`KahlerBase::base_data`]. The connection is obtained from Koszul's formula
//! in the frame, so users only supply the frame, the metric, `J`, and a local
//! potential `A` with `dA = ω_o`.

use nalgebra::DMatrix;

use crate::error::{Error, EvalError, Result};
use crate::fields::{DerivativeMode, Expr, Func, Jet, ScalarField, Symbols, VectorFieldSpec};
use crate::tensor::Tensor3;

/// Which builtin constructor produced a base (informational).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseFamily {
    Flat,
    Conformal,
    Warped,
    Custom,
}

impl BaseFamily {
    pub fn name(self) -> &'static str {
        match self {
            BaseFamily::Flat => "flat",
            BaseFamily::Conformal => "conformal",
            BaseFamily::Warped => "warped",
            BaseFamily::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct KahlerBase {
    dim: usize,
    family: BaseFamily,
    /// `frame[i]` holds the coordinate components `E_i^μ`.
    frame: Vec<VectorFieldSpec>,
    /// Frame components `g_ij = g_o(E_i, E_j)`.
    metric: Vec<Vec<ScalarField>>,
    /// `J E_i = J_i^j E_j`.
    complex: Vec<Vec<ScalarField>>,
    /// Coordinate components `A_μ` of a 1-form with `dA = ω_o`.
    potential: Vec<ScalarField>,
}

/// Frame-level tensors of the base at one point.
#[derive(Debug, Clone)]
pub struct BaseFrameData {
    pub dim: usize,
    /// Row `i` holds `E_i^μ`.
    pub frame: DMatrix<f64>,
    /// Inverse of `frame`: `∂_μ = frame_inv[(μ, i)] E_i`.
    pub frame_inv: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `ω_ij = g_o(J E_i, E_j)`.
    pub omega: DMatrix<f64>,
    /// `J_i^j`.
    pub complex: DMatrix<f64>,
    /// `[E_i, E_j] = c[(i, j, k)] E_k`.
    pub c: Tensor3,
    /// `dg[(i, j, k)] = E_i(g_jk)`.
    pub dg: Tensor3,
    /// `g_o(∇°_{E_i} E_j, E_k)`.
    pub levi_civita_lower: Tensor3,
    /// `∇°_{E_i} E_j = levi_civita[(i, j, k)] E_k`.
    pub levi_civita: Tensor3,
    /// `A_μ` at the point.
    pub potential: Vec<f64>,
}

/// Residuals of the structural identities a Kähler base must satisfy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaseInvariants {
    pub metric_symmetry: f64,
    pub complex_square: f64,
    pub j_invariance: f64,
    pub omega_antisymmetry: f64,
    pub potential: f64,
    pub levi_civita_metricity: f64,
    pub levi_civita_torsion: f64,
    pub kahler_closedness: f64,
}

impl BaseInvariants {
    pub fn max(&self) -> f64 {
        [
            self.metric_symmetry,
            self.complex_square,
            self.j_invariance,
            self.omega_antisymmetry,
            self.potential,
            self.levi_civita_metricity,
            self.levi_civita_torsion,
            self.kahler_closedness,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn base_field(e: Expr, m: usize) -> ScalarField {
    ScalarField::from_expr(e, m).expect("builtin expressions use base coordinates only")
}

fn standard_complex(m: usize) -> Vec<Vec<ScalarField>> {
    let mut j = vec![vec![ScalarField::constant(0.0, m); m]; m];
    for a in (0..m).step_by(2) {
        j[a][a + 1] = ScalarField::constant(1.0, m);
        j[a + 1][a] = ScalarField::constant(-1.0, m);
    }
    j
}

fn check_even(m: usize) -> Result<()> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::InvalidDimension(format!(
            "base dimension must be even and at least 2, got {m}"
        )));
    }
    Ok(())
}

impl KahlerBase {
    /// Flat `ℂ^{m/2}` in the coordinate frame with the standard complex
    /// structure and potential `A = Σ_a x_{2a-1} dx_{2a}`.
    pub fn flat(m: usize) -> Result<Self> {
        check_even(m)?;
        let frame = (0..m)
            .map(|i| {
                VectorFieldSpec::new(
                    (0..m)
                        .map(|mu| ScalarField::constant(if i == mu { 1.0 } else { 0.0 }, m))
                        .collect(),
                )
                .expect("square frame")
            })
            .collect();
        let metric = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| ScalarField::constant(if i == j { 1.0 } else { 0.0 }, m))
                    .collect()
            })
            .collect();
        let potential = (0..m)
            .map(|mu| {
                if mu % 2 == 1 {
                    base_field(Expr::var(mu - 1), m)
                } else {
                    ScalarField::constant(0.0, m)
                }
            })
            .collect();
        Ok(KahlerBase {
            dim: m,
            family: BaseFamily::Flat,
            frame,
            metric,
            complex: standard_complex(m),
            potential,
        })
    }

    /// Conformally flat surface `g = e^{2u} δ` in the coordinate frame. The
    /// potential must satisfy `∂_1 A_2 - ∂_2 A_1 = e^{2u}`; it is not derived
    /// here (no symbolic integration), but [`KahlerBase::verify_potential`]
    /// detects an inconsistent choice.
    pub fn conformal(u: Expr, potential: [Expr; 2]) -> Result<Self> {
        let m = 2;
        if u.max_var().is_some_and(|k| k >= m) {
            return Err(Error::InvalidDimension(
                "conformal factor may only depend on x1, x2".into(),
            ));
        }
        let scale = Expr::call(Func::Exp, Expr::mul(Expr::Const(2.0), u));
        let metric = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            base_field(scale.clone(), m)
                        } else {
                            ScalarField::constant(0.0, m)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut base = KahlerBase::flat(2)?;
        base.family = BaseFamily::Conformal;
        base.metric = metric;
        base.potential = potential
            .into_iter()
            .map(|e| ScalarField::from_expr(e, m))
            .collect::<std::result::Result<_, _>>()?;
        Ok(base)
    }

    /// Flat-looking frame `E_1 = ∂_1`, `E_2 = e^{k x1} ∂_2`, orthonormal by
    /// declaration. The induced metric is hyperbolic with curvature `-k²`, the
    /// structure functions are `c_12^2 = k`, and the potential is
    /// `A = -e^{-k x1}/k dx2`.
    pub fn warped(k: f64) -> Result<Self> {
        if k == 0.0 || !k.is_finite() {
            return Err(Error::InvalidDimension(
                "warp rate must be finite and non-zero".into(),
            ));
        }
        let m = 2;
        let x1 = Expr::var(0);
        let mut base = KahlerBase::flat(2)?;
        base.family = BaseFamily::Warped;
        base.frame[1] = VectorFieldSpec::new(vec![
            ScalarField::constant(0.0, m),
            base_field(
                Expr::call(Func::Exp, Expr::mul(Expr::Const(k), x1.clone())),
                m,
            ),
        ])?;
        base.potential = vec![
            ScalarField::constant(0.0, m),
            base_field(
                Expr::mul(
                    Expr::Const(-1.0 / k),
                    Expr::call(Func::Exp, Expr::mul(Expr::Const(-k), x1)),
                ),
                m,
            ),
        ];
        Ok(base)
    }

    /// Fully user-specified base. `frame[i][μ] = E_i^μ`, `metric[i][j] = g_ij`,
    /// `complex[i][j] = J_i^j`, `potential[μ] = A_μ`, all over base coordinates.
    pub fn custom(
        frame: Vec<Vec<ScalarField>>,
        metric: Vec<Vec<ScalarField>>,
        complex: Vec<Vec<ScalarField>>,
        potential: Vec<ScalarField>,
    ) -> Result<Self> {
        let m = frame.len();
        check_even(m)?;
        let square = |rows: &Vec<Vec<ScalarField>>, what: &str| -> Result<()> {
            if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                return Err(Error::InvalidDimension(format!("{what} must be {m}x{m}")));
            }
            if rows.iter().flatten().any(|f| f.dim() != m) {
                return Err(Error::InvalidDimension(format!(
                    "{what} entries must be functions of the {m} base coordinates"
                )));
            }
            Ok(())
        };
        square(&frame, "frame")?;
        square(&metric, "metric")?;
        square(&complex, "J")?;
        if potential.len() != m || potential.iter().any(|f| f.dim() != m) {
            return Err(Error::InvalidDimension(format!(
                "potential must have {m} components"
            )));
        }
        let frame = frame
            .into_iter()
            .map(VectorFieldSpec::new)
            .collect::<std::result::Result<_, _>>()?;
        Ok(KahlerBase {
            dim: m,
            family: BaseFamily::Custom,
            frame,
            metric,
            complex,
            potential,
        })
    }

    /// Parse a custom base from expression strings over `x1 .. x{m}`.
    pub fn parse_custom(
        frame: &[Vec<String>],
        metric: &[Vec<String>],
        complex: &[Vec<String>],
        potential: &[String],
    ) -> std::result::Result<Self, CustomBaseError> {
        let m = frame.len();
        let symbols = Symbols::base(m);
        let grid = |rows: &[Vec<String>], what: &'static str| {
            rows.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, src)| {
                            ScalarField::parse(src, &symbols).map_err(|e| CustomBaseError::Parse {
                                key: format!("{what}[{i}][{j}]"),
                                source: e,
                            })
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()
                })
                .collect::<std::result::Result<Vec<_>, _>>()
        };
        let potential = potential
            .iter()
            .enumerate()
            .map(|(i, src)| {
                ScalarField::parse(src, &symbols).map_err(|e| CustomBaseError::Parse {
                    key: format!("potential[{i}]"),
                    source: e,
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        KahlerBase::custom(
            grid(frame, "frame")?,
            grid(metric, "metric")?,
            grid(complex, "J")?,
            potential,
        )
        .map_err(CustomBaseError::Invalid)
    }

    /// Replace the potential without any consistency check. Used to build
    /// deliberately inconsistent configurations in tests.
    pub fn with_potential(mut self, potential: Vec<ScalarField>) -> Result<Self> {
        if potential.len() != self.dim || potential.iter().any(|f| f.dim() != self.dim) {
            return Err(Error::InvalidDimension(
                "potential has the wrong shape".into(),
            ));
        }
        self.potential = potential;
        Ok(self)
    }

    /// Same base with every field hidden behind an opaque rule, so all
    /// derivatives are central differences with step `h`.
    pub fn to_finite_differences(&self, h: f64) -> Self {
        let conv = |f: &ScalarField| f.to_opaque(h);
        KahlerBase {
            dim: self.dim,
            family: self.family,
            frame: self
                .frame
                .iter()
                .map(|v| {
                    VectorFieldSpec::new(v.components().iter().map(conv).collect())
                        .expect("same shape")
                })
                .collect(),
            metric: self
                .metric
                .iter()
                .map(|r| r.iter().map(conv).collect())
                .collect(),
            complex: self
                .complex
                .iter()
                .map(|r| r.iter().map(conv).collect())
                .collect(),
            potential: self.potential.iter().map(conv).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> BaseFamily {
        self.family
    }

    pub fn potential(&self) -> &[ScalarField] {
        &self.potential
    }

    /// True when every field has exact derivatives.
    pub fn is_exact(&self) -> bool {
        self.frame
            .iter()
            .flat_map(|v| v.components())
            .chain(self.metric.iter().flatten())
            .chain(self.complex.iter().flatten())
            .chain(&self.potential)
            .all(|f| f.mode() == DerivativeMode::Exact)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            }
            .into());
        }
        Ok(())
    }

    /// Jets of the frame components: `[i][μ]` is the jet of `E_i^μ`.
    pub fn frame_jets(&self, x: &[f64]) -> Result<Vec<Vec<Jet>>> {
        self.check_point(x)?;
        self.frame
            .iter()
            .map(|v| v.jets(x).map_err(|e| Error::at("base frame", e)))
            .collect()
    }

    /// Jets of the potential components `A_μ`.
    pub fn potential_jets(&self, x: &[f64]) -> Result<Vec<Jet>> {
        self.check_point(x)?;
        self.potential
            .iter()
            .map(|f| f.jet(x).map_err(|e| Error::at("potential", e)))
            .collect()
    }

    /// Jets of `g_ij`, symmetrised.
    pub fn metric_jets(&self, x: &[f64]) -> Result<Vec<Vec<Jet>>> {
        self.check_point(x)?;
        let m = self.dim;
        let mut g_jets: Vec<Vec<Jet>> = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                row.push(
                    self.metric[i][j]
                        .jet(x)
                        .map_err(|e| Error::at("base metric", e))?,
                );
            }
            g_jets.push(row);
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let avg = (&g_jets[i][j] + &g_jets[j][i]).scale(0.5);
                g_jets[i][j] = avg.clone();
                g_jets[j][i] = avg;
            }
        }
        Ok(g_jets)
    }

    /// Frame components `E_i^μ` at `x`.
    pub fn frame_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let mut e = DMatrix::zeros(self.dim, self.dim);
        for (i, v) in self.frame.iter().enumerate() {
            for (mu, c) in v.components().iter().enumerate() {
                e[(i, mu)] = c.eval(x).map_err(|err| Error::at("base frame", err))?;
            }
        }
        Ok(e)
    }

    /// Frame-level tensors of the base at `x`.
    pub fn base_data(&self, x: &[f64]) -> Result<BaseFrameData> {
        let m = self.dim;
        let frame_jets = self.frame_jets(x)?;
        let frame = DMatrix::from_fn(m, m, |i, mu| frame_jets[i][mu].value);
        let rows: Vec<Vec<f64>> = frame_jets
            .iter()
            .map(|r| r.iter().map(|j| j.value).collect())
            .collect();
        let frame_inv = frame.clone().try_inverse().ok_or(Error::SingularFrame)?;
        if !frame_inv.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularFrame);
        }

        let g_jets = self.metric_jets(x)?;
        let g = DMatrix::from_fn(m, m, |i, j| g_jets[i][j].value);
        if g.clone().cholesky().is_none() {
            return Err(Error::MetricNotPositive);
        }
        let g_inv = g.clone().try_inverse().ok_or(Error::MetricNotPositive)?;

        let mut complex = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                complex[(i, j)] = self.complex[i][j].eval(x).map_err(|e| Error::at("J", e))?;
            }
        }
        // ω_ij = g_o(J E_i, E_j) = J_i^k g_kj
        let omega = &complex * &g;

        // Structure functions from the coordinate Lie bracket.
        let mut c = Tensor3::zeros(m);
        for i in 0..m {
            for j in 0..m {
                let bracket: Vec<f64> = (0..m)
                    .map(|nu| frame_jets[j][nu].along(&rows[i]) - frame_jets[i][nu].along(&rows[j]))
                    .collect();
                for k in 0..m {
                    c[(i, j, k)] = (0..m).map(|nu| bracket[nu] * frame_inv[(nu, k)]).sum();
                }
            }
        }

        let dg = Tensor3::from_fn(m, |i, j, k| g_jets[j][k].along(&rows[i]));

        // Koszul's formula on (N, g_o) in the frame (E_i).
        let cg = |a: usize, b: usize, d: usize| -> f64 {
            // g_o([E_a, E_b], E_d)
            (0..m).map(|l| c[(a, b, l)] * g[(l, d)]).sum()
        };
        let levi_civita_lower = Tensor3::from_fn(m, |i, j, k| {
            0.5 * (dg[(i, j, k)] + dg[(j, i, k)] - dg[(k, i, j)] - cg(i, k, j) - cg(j, k, i)
                + cg(i, j, k))
        });
        let levi_civita = Tensor3::from_fn(m, |i, j, k| {
            (0..m)
                .map(|l| levi_civita_lower[(i, j, l)] * g_inv[(l, k)])
                .sum()
        });

        let potential = self
            .potential
            .iter()
            .map(|f| f.eval(x).map_err(|e| Error::at("potential", e)))
            .collect::<Result<Vec<_>>>()?;

        Ok(BaseFrameData {
            dim: m,
            frame,
            frame_inv,
            g,
            g_inv,
            omega,
            complex,
            c,
            dg,
            levi_civita_lower,
            levi_civita,
            potential,
        })
    }

    /// Coordinate components `ω_μν` of the Kähler form at `x`.
    pub fn omega_coordinates(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let data = self.base_data(x)?;
        // ∂_μ = W_μ^i E_i, so ω_μν = W_μ^i ω_ij W_ν^j.
        Ok(&data.frame_inv * &data.omega * data.frame_inv.transpose())
    }

    /// Largest deviation `|(dA)_μν - ω_μν|` over the sample points.
    pub fn verify_potential(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for x in samples {
            let omega = self.omega_coordinates(x)?;
            let a = self.potential_jets(x)?;
            for mu in 0..m {
                for nu in (mu + 1)..m {
                    let da = a[nu].grad[mu] - a[mu].grad[nu];
                    worst = worst.max((da - omega[(mu, nu)]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Evaluate every structural identity of the base on the samples.
    /// `step` is the finite-difference step used for `dω`.
    pub fn invariants(&self, samples: &[Vec<f64>], step: f64) -> Result<BaseInvariants> {
        let m = self.dim;
        let mut out = BaseInvariants {
            potential: self.verify_potential(samples)?,
            ..Default::default()
        };
        for x in samples {
            let d = self.base_data(x)?;
            for i in 0..m {
                for j in 0..m {
                    let raw_ij = self.metric[i][j].eval(x)?;
                    let raw_ji = self.metric[j][i].eval(x)?;
                    out.metric_symmetry = out.metric_symmetry.max((raw_ij - raw_ji).abs());
                    let jj: f64 = (0..m).map(|k| d.complex[(i, k)] * d.complex[(k, j)]).sum();
                    let delta = if i == j { 1.0 } else { 0.0 };
                    out.complex_square = out.complex_square.max((jj + delta).abs());
                    // g_o(JE_i, JE_j) = J_i^k J_j^l g_kl
                    let gjj: f64 = (0..m)
                        .flat_map(|k| (0..m).map(move |l| (k, l)))
                        .map(|(k, l)| d.complex[(i, k)] * d.complex[(j, l)] * d.g[(k, l)])
                        .sum();
                    out.j_invariance = out.j_invariance.max((gjj - d.g[(i, j)]).abs());
                    out.omega_antisymmetry = out
                        .omega_antisymmetry
                        .max((d.omega[(i, j)] + d.omega[(j, i)]).abs());
                    for k in 0..m {
                        let rhs: f64 = (0..m)
                            .map(|l| {
                                d.levi_civita[(i, j, l)] * d.g[(l, k)]
                                    + d.levi_civita[(i, k, l)] * d.g[(j, l)]
                            })
                            .sum();
                        out.levi_civita_metricity =
                            out.levi_civita_metricity.max((d.dg[(i, j, k)] - rhs).abs());
                        let torsion =
                            d.levi_civita[(i, j, k)] - d.levi_civita[(j, i, k)] - d.c[(i, j, k)];
                        out.levi_civita_torsion = out.levi_civita_torsion.max(torsion.abs());
                    }
                }
            }
            if m >= 4 {
                out.kahler_closedness = out.kahler_closedness.max(self.closedness_at(x, step)?);
            }
        }
        Ok(out)
    }

    /// Largest coordinate component of `dω` at `x` (central differences).
    fn closedness_at(&self, x: &[f64], h: f64) -> Result<f64> {
        let m = self.dim;
        let mut derivs = Vec::with_capacity(m);
        for l in 0..m {
            let mut fwd = x.to_vec();
            let mut bwd = x.to_vec();
            fwd[l] += h;
            bwd[l] -= h;
            derivs
                .push((self.omega_coordinates(&fwd)? - self.omega_coordinates(&bwd)?) / (2.0 * h));
        }
        let mut worst: f64 = 0.0;
        for l in 0..m {
            for mu in (l + 1)..m {
                for nu in (mu + 1)..m {
                    let v = derivs[l][(mu, nu)] + derivs[mu][(nu, l)] + derivs[nu][(l, mu)];
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CustomBaseError {
    #[error("{key}: {source}")]
    Parse {
        key: String,
        #[source]
        source: crate::error::ParseError,
    },
    #[error(transparent)]
    Invalid(Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flat_base_data() {
        let base = KahlerBase::flat(2).unwrap();
        let d = base.base_data(&[0.3, -0.2]).unwrap();
        assert_eq!(d.c.max_abs(), 0.0);
        assert_eq!(d.levi_civita.max_abs(), 0.0);
        assert_eq!(d.omega[(0, 1)], 1.0);
        assert_eq!(d.omega[(1, 0)], -1.0);
        assert_eq!(d.potential, vec![0.0, 0.3]);
    }

    #[test]
    fn warped_frame_structure_functions() {
        let base = KahlerBase::warped(1.0).unwrap();
        let d = base.base_data(&[0.4, 0.1]).unwrap();
        assert!(approx(d.c[(0, 1, 1)], 1.0, 1e-14));
        assert!(approx(d.c[(0, 1, 0)], 0.0, 1e-14));
        assert!(approx(d.c[(1, 0, 1)], -1.0, 1e-14));
        // hyperbolic plane in an orthonormal frame: ∇_{E2}E2 = E1·(-c_12^2)... check Koszul
        // g(∇_{E2}E2, E1) = -g([E2,E1],E2) = c_12^2 = 1
        assert!(approx(d.levi_civita_lower[(1, 1, 0)], 1.0, 1e-14));
        assert!(approx(d.levi_civita_lower[(1, 0, 1)], -1.0, 1e-14));
    }

    /// Independent Koszul evaluation on the base using coordinate Christoffel
    /// symbols from central differences of the coordinate metric.
    fn coordinate_levi_civita(base: &KahlerBase, x: &[f64], h: f64) -> Tensor3 {
        let m = base.dim();
        let coord_metric = |y: &[f64]| {
            let d = base.base_data(y).unwrap();
            &d.frame_inv * &d.g * d.frame_inv.transpose()
        };
        let gmat = coord_metric(x);
        let ginv = gmat.clone().try_inverse().unwrap();
        let dmetric: Vec<DMatrix<f64>> = (0..m)
            .map(|l| {
                let mut f = x.to_vec();
                let mut b = x.to_vec();
                f[l] += h;
                b[l] -= h;
                (coord_metric(&f) - coord_metric(&b)) / (2.0 * h)
            })
            .collect();
        // Γ^ρ_μν
        let christ = Tensor3::from_fn(m, |mu, nu, rho| {
            (0..m)
                .map(|l| {
                    0.5 * ginv[(rho, l)]
                        * (dmetric[mu][(l, nu)] + dmetric[nu][(l, mu)] - dmetric[l][(mu, nu)])
                })
                .sum()
        });
        // ∇_{E_i} E_j = E_i^μ (∂_μ E_j^ρ + Γ^ρ_μν E_j^ν) ∂_ρ, then expand over E_k.
        let d = base.base_data(x).unwrap();
        let jets = base.frame_jets(x).unwrap();
        Tensor3::from_fn(m, |i, j, k| {
            (0..m)
                .map(|rho| {
                    let deriv: f64 = (0..m)
                        .map(|mu| d.frame[(i, mu)] * jets[j][rho].grad[mu])
                        .sum();
                    let conn: f64 = (0..m)
                        .flat_map(|mu| (0..m).map(move |nu| (mu, nu)))
                        .map(|(mu, nu)| d.frame[(i, mu)] * christ[(mu, nu, rho)] * d.frame[(j, nu)])
                        .sum();
                    (deriv + conn) * d.frame_inv[(rho, k)]
                })
                .sum()
        })
    }

    #[test]
    fn conformal_base_connection_matches_coordinate_route() {
        let u = crate::fields::parse_expr("0.5*log(1 + x1^2 + x2^2)", &Symbols::base(2)).unwrap();
        let a2 = crate::fields::parse_expr("x1 + x1^3/3 + x1*x2^2", &Symbols::base(2)).unwrap();
        let base = KahlerBase::conformal(u, [Expr::Const(0.0), a2]).unwrap();
        for x in [[0.3, -0.2], [-0.4, 0.25], [0.1, 0.45]] {
            let d = base.base_data(&x).unwrap();
            let oracle = coordinate_levi_civita(&base, &x, 1e-5);
            let (dev, _) = d.levi_civita.max_abs_diff(&oracle);
            assert!(dev < 1e-8, "deviation {dev}");
        }
        let inv = base
            .invariants(&[vec![0.3, -0.2], vec![0.1, 0.4]], 1e-4)
            .unwrap();
        assert!(inv.max() < 1e-11, "{inv:?}");
    }

    #[test]
    fn warped_connection_matches_coordinate_route() {
        let base = KahlerBase::warped(0.7).unwrap();
        let x = [0.2, -0.3];
        let (dev, _) = base
            .base_data(&x)
            .unwrap()
            .levi_civita
            .max_abs_diff(&coordinate_levi_civita(&base, &x, 1e-5));
        assert!(dev < 1e-8);
    }

    #[test]
    fn potential_residuals() {
        let samples = vec![vec![0.3, -0.2], vec![-0.1, 0.4]];
        let flat = KahlerBase::flat(2).unwrap();
        assert_eq!(flat.verify_potential(&samples).unwrap(), 0.0);

        let zero = flat
            .clone()
            .with_potential(vec![ScalarField::constant(0.0, 2); 2])
            .unwrap();
        assert_eq!(zero.verify_potential(&samples).unwrap(), 1.0);

        // A + d(x1 x2) has the same exterior derivative.
        let sym = Symbols::base(2);
        let gauge = flat
            .with_potential(vec![
                ScalarField::parse("x2", &sym).unwrap(),
                ScalarField::parse("x1 + x1", &sym).unwrap(),
            ])
            .unwrap();
        assert_eq!(gauge.verify_potential(&samples).unwrap(), 0.0);
    }

    #[test]
    fn higher_dimensional_rotating_frame() {
        let sym = Symbols::base(4);
        let s = |src: &str| src.to_string();
        let frame = vec![
            vec![s("cos(x3)"), s("sin(x3)"), s("0"), s("0")],
            vec![s("-sin(x3)"), s("cos(x3)"), s("0"), s("0")],
            vec![s("0"), s("0"), s("1"), s("0")],
            vec![s("0"), s("0"), s("0"), s("1")],
        ];
        let id: Vec<Vec<String>> = (0..4)
            .map(|i| (0..4).map(|j| s(if i == j { "1" } else { "0" })).collect())
            .collect();
        let j = vec![
            vec![s("0"), s("1"), s("0"), s("0")],
            vec![s("-1"), s("0"), s("0"), s("0")],
            vec![s("0"), s("0"), s("0"), s("1")],
            vec![s("0"), s("0"), s("-1"), s("0")],
        ];
        let pot = vec![s("0"), s("x1"), s("0"), s("x3")];
        let base = KahlerBase::parse_custom(&frame, &id, &j, &pot).unwrap();
        let _ = sym;
        let samples = vec![vec![0.1, 0.2, 0.3, -0.4], vec![-0.3, 0.1, 0.7, 0.2]];
        let inv = base.invariants(&samples, 1e-4).unwrap();
        assert!(inv.max() < 1e-9, "{inv:?}");
        let d = base.base_data(&samples[0]).unwrap();
        assert!(d.c.max_abs() > 0.5);
        let x = &samples[0];
        let (dev, _) = d
            .levi_civita
            .max_abs_diff(&coordinate_levi_civita(&base, x, 1e-5));
        assert!(dev < 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(KahlerBase::flat(3).is_err());
        assert!(KahlerBase::flat(0).is_err());
        let sym = Symbols::base(2);
        let f = |src: &str| ScalarField::parse(src, &sym).unwrap();
        let singular = KahlerBase::custom(
            vec![vec![f("1"), f("0")], vec![f("1"), f("0")]],
            vec![vec![f("1"), f("0")], vec![f("0"), f("1")]],
            vec![vec![f("0"), f("1")], vec![f("-1"), f("0")]],
            vec![f("0"), f("x1")],
        )
        .unwrap();
        assert_eq!(
            singular.base_data(&[0.0, 0.0]).unwrap_err(),
            Error::SingularFrame
        );
        let indefinite = KahlerBase::custom(
            vec![vec![f("1"), f("0")], vec![f("0"), f("1")]],
            vec![vec![f("1"), f("0")], vec![f("0"), f("-1")]],
            vec![vec![f("0"), f("1")], vec![f("-1"), f("0")]],
            vec![f("0"), f("x1")],
        )
        .unwrap();
        assert_eq!(
            indefinite.base_data(&[0.0, 0.0]).unwrap_err(),
            Error::MetricNotPositive
        );
    }
}
