//! Adapted frame `(Ê_1 .. Ê_{n-2}, p_o, q_o)` on the chart of `M`.
//!
//! Coordinates are `(x, s, t)`. The fiber generators are realized as
//! `p_o = ∂_t` and `q_o = ∂_s`, and the lift of a base field is
//! `Ê_i = E_i - A(E_i) ∂_s`, so that `θ_o = ds + A` annihilates every `Ê_i`
//! and `[Ê_i, Ê_j] = c_ij^k Ê_k - ω_ij q_o`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, EvalError, Result};
use crate::fields::{Jet, Point};
use crate::kahler_base::KahlerBase;
use crate::metric::MetricAt;
use crate::tensor::Tensor3;

/// Frame label: `E1 .. E{m}`, `p`, `q`. Indices follow the same order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameLabel {
    /// Zero-based lift index.
    E(usize),
    P,
    Q,
}

impl FrameLabel {
    pub fn index(self, m: usize) -> usize {
        match self {
            FrameLabel::E(i) => i,
            FrameLabel::P => m,
            FrameLabel::Q => m + 1,
        }
    }

    pub fn from_index(idx: usize, m: usize) -> Self {
        match idx {
            i if i < m => FrameLabel::E(i),
            i if i == m => FrameLabel::P,
            i if i == m + 1 => FrameLabel::Q,
            _ => panic!("frame index {idx} out of range for base dimension {m}"),
        }
    }

    /// All labels of an `(m + 2)`-dimensional adapted frame in index order.
    pub fn all(m: usize) -> Vec<FrameLabel> {
        (0..m + 2).map(|i| FrameLabel::from_index(i, m)).collect()
    }
}

impl fmt::Display for FrameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameLabel::E(i) => write!(f, "E{}", i + 1),
            FrameLabel::P => write!(f, "p"),
            FrameLabel::Q => write!(f, "q"),
        }
    }
}

impl FromStr for FrameLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p" => Ok(FrameLabel::P),
            "q" => Ok(FrameLabel::Q),
            other => other
                .strip_prefix('E')
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|i| *i >= 1)
                .map(|i| FrameLabel::E(i - 1))
                .ok_or_else(|| Error::InvalidLabel(other.to_string())),
        }
    }
}

impl Serialize for FrameLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Index of the `s` coordinate (fiber of `q_o`) in an `(m + 2)`-chart.
pub fn s_coord(m: usize) -> usize {
    m
}

/// Index of the `t` coordinate (fiber of `p_o`) in an `(m + 2)`-chart.
pub fn t_coord(m: usize) -> usize {
    m + 1
}

/// Adapted frame at a point: row `A` holds the coordinate components of `X_A`.
#[derive(Debug, Clone)]
pub struct FrameAt {
    m: usize,
    rows: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl FrameAt {
    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m + 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// `∂_μ = inverse[(μ, A)] X_A`.
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn row(&self, a: usize) -> Vec<f64> {
        self.rows.row(a).iter().copied().collect()
    }

    pub fn det(&self) -> f64 {
        self.rows.determinant()
    }
}

/// Lift the base frame to the adapted frame at `p`.
pub fn lift_frame(base: &KahlerBase, p: &Point) -> Result<FrameAt> {
    let m = base.dim();
    let n = m + 2;
    check_chart(base, p)?;
    let x = p.base(m);
    let e = base.frame_matrix(x)?;
    let a: Vec<f64> = base
        .potential()
        .iter()
        .map(|f| f.eval(x).map_err(|err| Error::at("potential", err)))
        .collect::<Result<_>>()?;
    let mut rows = DMatrix::zeros(n, n);
    for i in 0..m {
        let mut a_of_e = 0.0;
        for mu in 0..m {
            rows[(i, mu)] = e[(i, mu)];
            a_of_e += a[mu] * e[(i, mu)];
        }
        rows[(i, s_coord(m))] = -a_of_e;
    }
    rows[(m, t_coord(m))] = 1.0;
    rows[(m + 1, s_coord(m))] = 1.0;
    let inverse = rows.clone().try_inverse().ok_or(Error::SingularFrame)?;
    if !inverse.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularFrame);
    }
    Ok(FrameAt { m, rows, inverse })
}

fn check_chart(base: &KahlerBase, p: &Point) -> Result<()> {
    let n = base.dim() + 2;
    if p.dim() != n {
        return Err(EvalError::DimensionMismatch {
            expected: n,
            got: p.dim(),
        }
        .into());
    }
    Ok(())
}

/// Jets of the frame rows: `[A][μ]` is the jet (over all `n` chart
/// coordinates) of the `μ`-component of `X_A`.
pub fn frame_row_jets(base: &KahlerBase, p: &Point) -> Result<Vec<Vec<Jet>>> {
    let m = base.dim();
    let n = m + 2;
    check_chart(base, p)?;
    let x = p.base(m);
    let e = base.frame_jets(x)?;
    let a = base.potential_jets(x)?;
    let mut rows = vec![vec![Jet::constant(0.0, n); n]; n];
    for i in 0..m {
        let mut a_of_e = Jet::constant(0.0, m);
        for mu in 0..m {
            rows[i][mu] = e[i][mu].embed(n);
            a_of_e = &a_of_e + &(&a[mu] * &e[i][mu]);
        }
        rows[i][s_coord(m)] = (-&a_of_e).embed(n);
    }
    rows[m][t_coord(m)] = Jet::constant(1.0, n);
    rows[m + 1][s_coord(m)] = Jet::constant(1.0, n);
    Ok(rows)
}

/// Structure functions `[X_A, X_B] = C_AB^C X_C` of the adapted frame.
#[derive(Debug, Clone)]
pub struct BracketTable {
    pub m: usize,
    /// Table built from `c_ij^k` and `-ω_ij`.
    pub structure: Tensor3,
    /// Table recomputed from coordinate derivatives of the frame rows.
    pub coordinate: Tensor3,
    /// Largest entrywise deviation between the two.
    pub deviation: f64,
}

impl BracketTable {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.structure[(a, b, c)]
    }

    /// Fail when the two routes disagree by more than `tol`, which happens
    /// exactly when the potential does not satisfy `dA = ω_o`.
    pub fn require_consistent(self, tol: f64) -> Result<Self> {
        if self.deviation > tol {
            return Err(Error::InconsistentPotential(self.deviation));
        }
        Ok(self)
    }
}

/// Analytic bracket table at `p`, with the coordinate recomputation and the
/// deviation between the two.
pub fn bracket_table(base: &KahlerBase, p: &Point) -> Result<BracketTable> {
    let m = base.dim();
    let n = m + 2;
    let d = base.base_data(p.base(m))?;
    let mut structure = Tensor3::zeros(n);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                structure[(i, j, k)] = d.c[(i, j, k)];
            }
            structure[(i, j, m + 1)] = -d.omega[(i, j)];
        }
    }
    let frame = lift_frame(base, p)?;
    let jets = frame_row_jets(base, p)?;
    let coordinate = coordinate_brackets(&frame, &jets);
    let (deviation, _) = structure.max_abs_diff(&coordinate);
    Ok(BracketTable {
        m,
        structure,
        coordinate,
        deviation,
    })
}

/// `[X_A, X_B]^ν = X_A(X_B^ν) - X_B(X_A^ν)`, expanded back over the frame.
pub fn coordinate_brackets(frame: &FrameAt, jets: &[Vec<Jet>]) -> Tensor3 {
    let n = frame.dim();
    let rows: Vec<Vec<f64>> = (0..n).map(|a| frame.row(a)).collect();
    let mut out = Tensor3::zeros(n);
    for a in 0..n {
        for b in 0..n {
            let bracket: Vec<f64> = (0..n)
                .map(|nu| jets[b][nu].along(&rows[a]) - jets[a][nu].along(&rows[b]))
                .collect();
            for c in 0..n {
                out[(a, b, c)] = (0..n)
                    .map(|nu| bracket[nu] * frame.inverse()[(nu, c)])
                    .sum();
            }
        }
    }
    out
}

/// Dual coframe at a point: row `A` holds the coordinate components of the
/// 1-form dual to `X_A`.
#[derive(Debug, Clone)]
pub struct CoframeAt {
    pub forms: DMatrix<f64>,
}

impl CoframeAt {
    /// `pairing[(A, B)] = θ^A(X_B)`.
    pub fn pairing(&self, frame: &FrameAt) -> DMatrix<f64> {
        &self.forms * frame.matrix().transpose()
    }
}

/// Build the dual coframe as metric duals of explicit vector fields:
///
/// ```text
/// Ê^i   = g(σ⁻¹ (g^{ik} Ê_k - (γ^i/α) p_o), ·)
/// p_o^* = g(σ⁻¹ ((2/α) q_o + α⁻² (γ^m γ^k g_mk - 2β) p_o - (γ^m/α) Ê_m), ·)
/// q_o^* = g(σ⁻¹ (2/α) p_o, ·)
/// ```
pub fn dual_coframe(metric: &MetricAt, frame: &FrameAt) -> Result<CoframeAt> {
    let m = frame.base_dim();
    let n = m + 2;
    let (p, q) = (m, m + 1);
    let alpha = metric.alpha;
    if alpha == 0.0 {
        return Err(Error::AlphaZero);
    }
    let sigma = metric.sigma;
    let gamma = &metric.gamma;
    let g_inv = &metric.base_g_inv;
    let gg = metric.gamma_norm();

    // vectors[(A, B)]: frame components of the vector dual to θ^A
    let mut vectors = DMatrix::zeros(n, n);
    for i in 0..m {
        for k in 0..m {
            vectors[(i, k)] = g_inv[(i, k)] / sigma;
        }
        vectors[(i, p)] = -gamma[i] / (alpha * sigma);
    }
    vectors[(p, q)] = 2.0 / (alpha * sigma);
    vectors[(p, p)] = (gg - 2.0 * metric.beta) / (alpha * alpha * sigma);
    for k in 0..m {
        vectors[(p, k)] = -gamma[k] / (alpha * sigma);
    }
    vectors[(q, p)] = 2.0 / (alpha * sigma);

    // θ^A(X_C) = v^A_B G_BC, then ∂_μ = inverse[(μ, C)] X_C
    let on_frame = &vectors * &metric.g;
    let forms = on_frame * frame.inverse().transpose();
    Ok(CoframeAt { forms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kahler_base::KahlerBase;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn labels_roundtrip() {
        for (i, l) in FrameLabel::all(4).into_iter().enumerate() {
            assert_eq!(l.index(4), i);
            assert_eq!(l.to_string().parse::<FrameLabel>().unwrap(), l);
        }
        assert_eq!(FrameLabel::all(2)[2].to_string(), "p");
        assert!("E0".parse::<FrameLabel>().is_err());
        assert!("r".parse::<FrameLabel>().is_err());
    }

    #[test]
    fn lift_on_flat_base() {
        let base = KahlerBase::flat(2).unwrap();
        let f = lift_frame(&base, &pt(&[0.3, -0.2, 0.1, 0.5])).unwrap();
        assert_eq!(f.row(0), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.row(1), vec![0.0, 1.0, -0.3, 0.0]);
        assert_eq!(f.row(2), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.row(3), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_potential_extends_by_zeros() {
        let base = KahlerBase::warped(1.0)
            .unwrap()
            .with_potential(vec![crate::fields::ScalarField::constant(0.0, 2); 2])
            .unwrap();
        let f = lift_frame(&base, &pt(&[0.2, 0.1, 0.0, 0.0])).unwrap();
        assert_eq!(f.row(1), vec![0.0, 0.2f64.exp(), 0.0, 0.0]);
        assert_eq!(f.row(0), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn frame_determinant_equals_base_determinant() {
        let base = KahlerBase::warped(0.8).unwrap();
        let p = pt(&[0.25, -0.1, 0.3, 0.2]);
        let f = lift_frame(&base, &p).unwrap();
        let e = base.frame_matrix(p.base(2)).unwrap();
        // the (s,t) block of the lifted frame is a swap, contributing -1
        assert!((f.det() + e.determinant()).abs() < 1e-14);
    }

    #[test]
    fn flat_brackets() {
        let base = KahlerBase::flat(2).unwrap();
        let t = bracket_table(&base, &pt(&[0.3, -0.2, 0.1, 0.5])).unwrap();
        assert_eq!(t.get(0, 1, 3), -1.0);
        assert_eq!(t.get(1, 0, 3), 1.0);
        for c in 0..3 {
            assert_eq!(t.get(0, 1, c), 0.0);
        }
        for a in 0..4 {
            for c in 0..4 {
                assert_eq!(t.get(a, 2, c), 0.0);
                assert_eq!(t.get(2, a, c), 0.0);
            }
        }
        assert!(t.deviation < 1e-15);
    }

    #[test]
    fn warped_brackets() {
        let base = KahlerBase::warped(1.0).unwrap();
        let t = bracket_table(&base, &pt(&[0.2, 0.1, -0.3, 0.4])).unwrap();
        assert!((t.get(0, 1, 1) - 1.0).abs() < 1e-14);
        assert!((t.get(0, 1, 3) + 1.0).abs() < 1e-14);
        assert!(t.deviation < 1e-13);
    }

    #[test]
    fn inconsistent_potential_is_detected() {
        let base = KahlerBase::flat(2)
            .unwrap()
            .with_potential(vec![crate::fields::ScalarField::constant(0.0, 2); 2])
            .unwrap();
        let t = bracket_table(&base, &pt(&[0.0; 4])).unwrap();
        assert!((t.deviation - 1.0).abs() < 1e-15);
        assert!(matches!(
            t.require_consistent(1e-7),
            Err(Error::InconsistentPotential(_))
        ));
    }
}
