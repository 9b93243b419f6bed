//! Ground truth from Koszul's formula and the verification suite.
//!
//! The oracle never reads the closed-form tables. It differentiates the
//! assembled metric entries `G_BC` along the frame, recomputes brackets from
//! coordinate derivatives of the frame rows, evaluates
//!
//! ```text
//! 2 g(∇_A X_B, X_C) = X_A G_BC + X_B G_AC - X_C G_AB
//!                   - g([A,C],B) - g([B,C],A) + g([A,B],C)
//! ```
//!
//! and expands over the dual coframe.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::adapted_frame::{
    bracket_table, coordinate_brackets, dual_coframe, frame_row_jets, lift_frame, s_coord, FrameAt,
    FrameLabel,
};
use crate::connection::{
    christoffel, christoffel_conformal, ChristoffelTable, Fault, LocalData, TablePath,
};
use crate::error::{Error, Result};
use crate::fields::{Jet, Point, DEFAULT_FD_STEP};
use crate::kahler_base::KahlerBase;
use crate::metric::{assemble, MetricAt, MetricParams};
use crate::tensor::Tensor3;

/// How the oracle differentiates metric entries along frame fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OracleDerivative {
    /// Forward-mode derivatives of the field jets.
    Jet,
    /// Central differences of the full metric assembly at `p ± h X_A(p)`,
    /// optionally Richardson-extrapolated with `2h`.
    Displacement { step: f64, richardson: bool },
}

impl Default for OracleDerivative {
    fn default() -> Self {
        OracleDerivative::Displacement {
            step: DEFAULT_FD_STEP,
            richardson: false,
        }
    }
}

/// Inputs shared by every oracle evaluation.
#[derive(Debug, Clone)]
pub struct KoszulContext {
    pub base: KahlerBase,
    pub params: MetricParams,
    pub derivative: OracleDerivative,
    /// Sign flip injected into the closed-form table under test.
    pub fault: Option<Fault>,
}

impl KoszulContext {
    pub fn new(
        base: KahlerBase,
        params: MetricParams,
        derivative: OracleDerivative,
    ) -> Result<Self> {
        if params.base_dim() != base.dim() {
            return Err(Error::InvalidDimension(format!(
                "parameters describe a base of dimension {}, base has dimension {}",
                params.base_dim(),
                base.dim()
            )));
        }
        Ok(KoszulContext {
            base,
            params,
            derivative,
            fault: None,
        })
    }

    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn dim(&self) -> usize {
        self.base.dim() + 2
    }

    fn metric(&self, p: &Point) -> Result<MetricAt> {
        assemble(&self.params, &self.base, p)
    }

    /// `dg[(A, B, C)] = X_A(G_BC)` at `p`.
    pub fn metric_derivatives(&self, p: &Point, frame: &FrameAt) -> Result<Tensor3> {
        match self.derivative {
            OracleDerivative::Jet => self.metric_derivatives_jet(p, frame),
            OracleDerivative::Displacement { step, richardson } => {
                let d1 = self.metric_derivatives_fd(p, frame, step)?;
                if !richardson {
                    return Ok(d1);
                }
                let d2 = self.metric_derivatives_fd(p, frame, 2.0 * step)?;
                let n = self.dim();
                Ok(Tensor3::from_fn(n, |a, b, c| {
                    (4.0 * d1[(a, b, c)] - d2[(a, b, c)]) / 3.0
                }))
            }
        }
    }

    fn metric_derivatives_fd(&self, p: &Point, frame: &FrameAt, h: f64) -> Result<Tensor3> {
        let n = self.dim();
        let mut out = Tensor3::zeros(n);
        for a in 0..n {
            let row = frame.row(a);
            let fwd = self.metric(&p.displaced(&row, h))?;
            let bwd = self.metric(&p.displaced(&row, -h))?;
            for b in 0..n {
                for c in 0..n {
                    out[(a, b, c)] = (fwd.g[(b, c)] - bwd.g[(b, c)]) / (2.0 * h);
                }
            }
        }
        Ok(out)
    }

    fn metric_derivatives_jet(&self, p: &Point, frame: &FrameAt) -> Result<Tensor3> {
        let m = self.base_dim();
        let n = m + 2;
        let (pp, qq) = (m, m + 1);
        let params = self.params.jets(p.coords())?;
        let g: Vec<Vec<Jet>> = self
            .base
            .metric_jets(p.base(m))?
            .into_iter()
            .map(|r| r.into_iter().map(|j| j.embed(n)).collect())
            .collect();
        let zero = Jet::constant(0.0, n);
        let mut big = vec![vec![zero.clone(); n]; n];
        for i in 0..m {
            for j in 0..m {
                big[i][j] = &params.sigma * &g[i][j];
            }
            let mut h = zero.clone();
            for k in 0..m {
                h = &h + &(&params.gamma[k] * &g[k][i]);
            }
            big[qq][i] = (&params.sigma * &h).scale(0.5);
            big[i][qq] = big[qq][i].clone();
        }
        big[pp][qq] = (&params.sigma * &params.alpha).scale(0.5);
        big[qq][pp] = big[pp][qq].clone();
        big[qq][qq] = (&params.sigma * &params.beta).scale(0.5);
        let rows: Vec<Vec<f64>> = (0..n).map(|a| frame.row(a)).collect();
        Ok(Tensor3::from_fn(n, |a, b, c| big[b][c].along(&rows[a])))
    }
}

/// Everything the oracle computes at a point.
#[derive(Debug, Clone)]
pub struct OracleAt {
    pub frame: FrameAt,
    pub metric: MetricAt,
    /// `X_A(G_BC)`.
    pub metric_derivatives: Tensor3,
    /// Coordinate brackets `[X_A, X_B] = C_AB^C X_C`.
    pub brackets: Tensor3,
    /// `g(∇_A X_B, X_C)`.
    pub koszul: Tensor3,
}

impl OracleAt {
    pub fn new(ctx: &KoszulContext, p: &Point) -> Result<Self> {
        let n = ctx.dim();
        let frame = lift_frame(&ctx.base, p)?;
        let metric = ctx.metric(p)?;
        let dg = ctx.metric_derivatives(p, &frame)?;
        let jets = frame_row_jets(&ctx.base, p)?;
        let brackets = coordinate_brackets(&frame, &jets);
        let gm = &metric.g;
        // g([X_A, X_B], X_C)
        let cg = |a: usize, b: usize, c: usize| -> f64 {
            (0..n).map(|d| brackets[(a, b, d)] * gm[(d, c)]).sum()
        };
        let koszul = Tensor3::from_fn(n, |a, b, c| {
            0.5 * (dg[(a, b, c)] + dg[(b, a, c)] - dg[(c, a, b)] - cg(a, c, b) - cg(b, c, a)
                + cg(a, b, c))
        });
        Ok(OracleAt {
            frame,
            metric,
            metric_derivatives: dg,
            brackets,
            koszul,
        })
    }

    /// Expand `∇_A X_B` over the frame from the values `g(∇_A X_B, X_C)`:
    ///
    /// ```text
    /// Γ^m = σ⁻¹ (g^{mk} K_k - (γ^m/α) K_p)
    /// Γ^p = σ⁻¹ ((2/α) K_q + α⁻² (γγg - 2β) K_p - (γ^m/α) K_m)
    /// Γ^q = σ⁻¹ (2/α) K_p
    /// ```
    pub fn christoffel(&self) -> ChristoffelTable {
        let mt = &self.metric;
        let n = mt.dim();
        let m = n - 2;
        let (p, q) = (m, m + 1);
        let (sg, a, b) = (mt.sigma, mt.alpha, mt.beta);
        let gamma = &mt.gamma;
        let gg = mt.gamma_norm();
        let gi = &mt.base_g_inv;
        let mut values = Tensor3::zeros(n);
        for x in 0..n {
            for y in 0..n {
                let k = |c: usize| self.koszul[(x, y, c)];
                let kg: f64 = (0..m).map(|l| gamma[l] * k(l)).sum();
                for mm in 0..m {
                    let lifted: f64 = (0..m).map(|l| gi[(mm, l)] * k(l)).sum();
                    values[(x, y, mm)] = (lifted - gamma[mm] * k(p) / a) / sg;
                }
                values[(x, y, p)] =
                    (2.0 / a * k(q) + (gg - 2.0 * b) * k(p) / (a * a) - kg / a) / sg;
                values[(x, y, q)] = 2.0 / a * k(p) / sg;
            }
        }
        ChristoffelTable {
            m,
            values,
            path: TablePath::Oracle,
        }
    }
}

/// `g(∇_{X_A} X_B, X_C)` at `p`.
pub fn koszul(
    ctx: &KoszulContext,
    a: FrameLabel,
    b: FrameLabel,
    c: FrameLabel,
    p: &Point,
) -> Result<f64> {
    let m = ctx.base_dim();
    let o = OracleAt::new(ctx, p)?;
    Ok(o.koszul[(a.index(m), b.index(m), c.index(m))])
}

/// Christoffel symbols reconstructed from Koszul values.
pub fn christoffel_oracle(ctx: &KoszulContext, p: &Point) -> Result<ChristoffelTable> {
    Ok(OracleAt::new(ctx, p)?.christoffel())
}

/// A named verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Torsion,
    Metricity,
    OracleEquivalence,
    ConformalPath,
    Brackets,
    GeodesicNull,
    Shearfree,
    CoframeDuality,
    Signature,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::Torsion,
        Check::Metricity,
        Check::OracleEquivalence,
        Check::ConformalPath,
        Check::Brackets,
        Check::GeodesicNull,
        Check::Shearfree,
        Check::CoframeDuality,
        Check::Signature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Torsion => "torsion",
            Check::Metricity => "metricity",
            Check::OracleEquivalence => "oracle-equivalence",
            Check::ConformalPath => "conformal-path",
            Check::Brackets => "brackets",
            Check::GeodesicNull => "geodesic-null",
            Check::Shearfree => "shearfree",
            Check::CoframeDuality => "coframe-duality",
            Check::Signature => "signature",
        }
    }

    /// Parse a comma-separated list; `all` expands to every check.
    pub fn parse_list(s: &str) -> Result<Vec<Check>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Check::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

impl Serialize for Check {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Per-check tolerances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub torsion: f64,
    pub metricity: f64,
    pub oracle_equivalence: f64,
    pub conformal_path: f64,
    pub brackets: f64,
    pub geodesic_null: f64,
    pub shearfree: f64,
    pub coframe_duality: f64,
    pub signature: f64,
}

impl Tolerances {
    /// Defaults for expression-backed fields with exact derivatives.
    pub fn exact() -> Self {
        Tolerances {
            torsion: 1e-9,
            metricity: 1e-9,
            oracle_equivalence: 1e-9,
            conformal_path: 1e-9,
            brackets: 1e-10,
            geodesic_null: 1e-9,
            shearfree: 1e-9,
            coframe_duality: 1e-10,
            signature: 0.0,
        }
    }

    /// Defaults when derivatives come from central differences.
    pub fn finite_difference() -> Self {
        Tolerances {
            metricity: 1e-6,
            oracle_equivalence: 1e-6,
            conformal_path: 1e-6,
            brackets: 1e-7,
            geodesic_null: 1e-6,
            shearfree: 1e-6,
            ..Tolerances::exact()
        }
    }

    pub fn get(&self, check: Check) -> f64 {
        match check {
            Check::Torsion => self.torsion,
            Check::Metricity => self.metricity,
            Check::OracleEquivalence => self.oracle_equivalence,
            Check::ConformalPath => self.conformal_path,
            Check::Brackets => self.brackets,
            Check::GeodesicNull => self.geodesic_null,
            Check::Shearfree => self.shearfree,
            Check::CoframeDuality => self.coframe_duality,
            Check::Signature => self.signature,
        }
    }

    pub fn set(&mut self, check: Check, value: f64) {
        let slot = match check {
            Check::Torsion => &mut self.torsion,
            Check::Metricity => &mut self.metricity,
            Check::OracleEquivalence => &mut self.oracle_equivalence,
            Check::ConformalPath => &mut self.conformal_path,
            Check::Brackets => &mut self.brackets,
            Check::GeodesicNull => &mut self.geodesic_null,
            Check::Shearfree => &mut self.shearfree,
            Check::CoframeDuality => &mut self.coframe_duality,
            Check::Signature => &mut self.signature,
        };
        *slot = value;
    }
}

/// Outcome of one check over all sample points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    /// Largest residual over points and index tuples.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Index of the sample point with the largest residual.
    pub point: usize,
    /// Labels of the worst index tuple, e.g. `E1,q,p`.
    pub worst: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct VerificationReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn get(&self, check: Check) -> Option<&CheckOutcome> {
        self.outcomes.iter().find(|o| o.check == check)
    }

    /// Combine two reports over disjoint point sets. `offset` shifts the
    /// point indices of `other`.
    pub fn merge(mut self, other: VerificationReport, offset: usize) -> Self {
        for o in other.outcomes {
            match self.outcomes.iter_mut().find(|x| x.check == o.check) {
                Some(x) => {
                    if o.residual > x.residual || (o.residual.is_nan() && !x.residual.is_nan()) {
                        x.residual = o.residual;
                        x.point = o.point + offset;
                        x.worst = o.worst;
                    }
                    x.tolerance = x.tolerance.max(o.tolerance);
                    x.pass = x.pass && o.pass;
                }
                None => self.outcomes.push(CheckOutcome {
                    point: o.point + offset,
                    ..o
                }),
            }
        }
        self
    }
}

/// Residual of one check at one point, with the worst index tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResidual {
    pub check: Check,
    pub residual: f64,
    pub worst: String,
}

fn labels(m: usize, idx: &[usize]) -> String {
    idx.iter()
        .map(|i| FrameLabel::from_index(*i, m).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

struct Worst {
    value: f64,
    idx: Vec<usize>,
    seen: bool,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: 0.0,
            idx: Vec::new(),
            seen: false,
        }
    }

    fn offer(&mut self, value: f64, idx: &[usize]) {
        let v = value.abs();
        if !self.seen || v > self.value || (v.is_nan() && !self.value.is_nan()) {
            self.value = v;
            self.idx = idx.to_vec();
            self.seen = true;
        }
    }
}

/// Closed-form table under test, with the context's fault applied.
pub fn subject_table(ctx: &KoszulContext, p: &Point) -> Result<ChristoffelTable> {
    let mut t = christoffel(&ctx.params, &ctx.base, p)?;
    if let Some(f) = &ctx.fault {
        t.apply_fault(f);
    }
    Ok(t)
}

/// Evaluate `checks` at a single point.
pub fn check_point(ctx: &KoszulContext, checks: &[Check], p: &Point) -> Result<Vec<PointResidual>> {
    let m = ctx.base_dim();
    let n = m + 2;
    let (pp, qq) = (m, m + 1);
    let oracle = OracleAt::new(ctx, p)?;
    let oracle_table = oracle.christoffel();
    let table = subject_table(ctx, p)?;
    let ld = LocalData::new(&ctx.params, &ctx.base, p)?;
    let gm = &oracle.metric.g;
    let dg = &oracle.metric_derivatives;

    let mut out = Vec::with_capacity(checks.len());
    for &check in checks {
        let mut w = Worst::new();
        match check {
            Check::Torsion => {
                let analytic = bracket_table(&ctx.base, p)?;
                let (r, (a, b, c)) = table.torsion_residual(&analytic.structure);
                w.offer(r, &[a, b, c]);
            }
            Check::Metricity => {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let rhs: f64 = (0..n)
                                .map(|d| {
                                    table.get(a, b, d) * gm[(d, c)]
                                        + table.get(a, c, d) * gm[(b, d)]
                                })
                                .sum();
                            w.offer(dg[(a, b, c)] - rhs, &[a, b, c]);
                        }
                    }
                }
            }
            Check::OracleEquivalence => {
                let (r, (a, b, c)) = table.max_deviation(&oracle_table);
                w.offer(r, &[a, b, c]);
            }
            Check::ConformalPath => {
                let conformal = christoffel_conformal(&ctx.params, &ctx.base, p)?;
                let (r, (a, b, c)) = table.max_deviation(&conformal);
                w.offer(r, &[a, b, c]);
            }
            Check::Brackets => {
                let t = bracket_table(&ctx.base, p)?;
                let (r, (a, b, c)) = t.structure.max_abs_diff(&t.coordinate);
                w.offer(r, &[a, b, c]);
            }
            Check::GeodesicNull => {
                let rate = ld.d_alpha[pp] / ld.values.alpha + ld.d_sigma[pp] / ld.values.sigma;
                for t in [&table, &oracle_table] {
                    for c in 0..n {
                        let expected = if c == pp { rate } else { 0.0 };
                        w.offer(t.get(pp, pp, c) - expected, &[pp, pp, c]);
                    }
                }
            }
            Check::Shearfree => {
                let rate = ld.d_sigma[pp] / ld.values.sigma;
                let screen: Vec<usize> = (0..=m).collect();
                for &x in &screen {
                    for &y in &screen {
                        let conformal = rate * gm[(x, y)];
                        w.offer(dg[(pp, x, y)] - conformal, &[x, y]);
                        let lie: f64 = (0..n)
                            .map(|d| {
                                table.get(x, pp, d) * gm[(d, y)] + table.get(y, pp, d) * gm[(x, d)]
                            })
                            .sum();
                        w.offer(lie - conformal, &[x, y]);
                    }
                }
            }
            Check::CoframeDuality => {
                let co = dual_coframe(&oracle.metric, &oracle.frame)?;
                let pairing = co.pairing(&oracle.frame);
                for a in 0..n {
                    for b in 0..n {
                        let id = if a == b { 1.0 } else { 0.0 };
                        w.offer(pairing[(a, b)] - id, &[a, b]);
                    }
                }
                // q_o^* = ds + A
                for mu in 0..n {
                    let expected = if mu < m {
                        ld.base.potential[mu]
                    } else if mu == s_coord(m) {
                        1.0
                    } else {
                        0.0
                    };
                    w.offer(co.forms[(qq, mu)] - expected, &[qq]);
                }
            }
            Check::Signature => {
                let (pos, neg) = oracle.metric.signature();
                let off = (pos as f64 - (n - 1) as f64).abs() + (neg as f64 - 1.0).abs();
                w.offer(off, &[]);
            }
        }
        out.push(PointResidual {
            check,
            residual: w.value,
            worst: labels(m, &w.idx),
        });
    }
    Ok(out)
}

/// Run `checks` over `points` in parallel. The report is independent of
/// scheduling: ties go to the lowest point index.
pub fn verify(
    ctx: &KoszulContext,
    checks: &[Check],
    points: &[Point],
    tolerances: &Tolerances,
) -> Result<VerificationReport> {
    let per_point: Vec<Vec<PointResidual>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            check_point(ctx, checks, p).map_err(|e| Error::PointFailure {
                point: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let outcomes = checks
        .iter()
        .enumerate()
        .map(|(ci, &check)| {
            let tolerance = tolerances.get(check);
            let mut best: Option<(usize, &PointResidual)> = None;
            for (pi, rs) in per_point.iter().enumerate() {
                let r = &rs[ci];
                let better = match best {
                    None => true,
                    Some((_, b)) => {
                        r.residual > b.residual || (r.residual.is_nan() && !b.residual.is_nan())
                    }
                };
                if better {
                    best = Some((pi, r));
                }
            }
            let (point, residual, worst) = best
                .map(|(pi, r)| (pi, r.residual, r.worst.clone()))
                .unwrap_or((0, 0.0, String::new()));
            CheckOutcome {
                check,
                residual,
                tolerance,
                pass: residual <= tolerance,
                point,
                worst,
            }
        })
        .collect();
    Ok(VerificationReport { outcomes })
}
