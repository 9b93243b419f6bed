//! Named base/parameter combinations used by the test sweeps and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::{parse_expr, DomainBox, Point, Symbols};
use crate::kahler_base::KahlerBase;
use crate::metric::MetricParams;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub base: KahlerBase,
    pub params: MetricParams,
    /// Sampling box on the full chart `(x, s, t)`.
    pub domain: DomainBox,
}

fn params(sigma: &str, alpha: &str, beta: &str, gamma: &[&str]) -> MetricParams {
    MetricParams::parse(sigma, alpha, beta, gamma).expect("builtin expressions parse")
}

impl Scenario {
    pub fn new(name: &str, base: KahlerBase, params: MetricParams, half_width: f64) -> Self {
        let n = params.chart_dim();
        Scenario {
            name: name.to_string(),
            base,
            params,
            domain: DomainBox::cube(n, half_width),
        }
    }

    /// Flat base of dimension 2 with `σ = 1, α = 1, β = 0, γ = 0`.
    pub fn d0() -> Self {
        Scenario::new(
            "d0",
            KahlerBase::flat(2).expect("valid dimension"),
            params("1", "1", "0", &["0", "0"]),
            1.0,
        )
    }

    /// D0 with `σ = e^t`.
    pub fn sigma_exp_t() -> Self {
        Scenario::new(
            "sigma-exp-t",
            KahlerBase::flat(2).expect("valid dimension"),
            params("exp(t)", "1", "0", &["0", "0"]),
            1.0,
        )
    }

    /// D0 with `γ¹ = x1`.
    pub fn gamma_x1() -> Self {
        Scenario::new(
            "gamma-x1",
            KahlerBase::flat(2).expect("valid dimension"),
            params("1", "1", "0", &["x1", "0"]),
            1.0,
        )
    }

    /// Warped frame (non-zero structure functions) with varying `β`, `γ`.
    pub fn warped() -> Self {
        Scenario::new(
            "warped",
            KahlerBase::warped(0.7).expect("valid rate"),
            params("1", "1", "0.2*x1", &["0.5", "0.3*x2"]),
            1.0,
        )
    }

    /// Conformally flat base `e^{2u} δ` with `u = ½ log(1 + x1² + x2²)`.
    pub fn conformal() -> Self {
        let sym = Symbols::base(2);
        let e = |s: &str| parse_expr(s, &sym).expect("builtin expressions parse");
        let base = KahlerBase::conformal(
            e("0.5*log(1 + x1^2 + x2^2)"),
            [e("0"), e("x1 + x1^3/3 + x1*x2^2")],
        )
        .expect("valid conformal base");
        Scenario::new("conformal", base, params("1", "1", "0", &["0", "0"]), 1.0)
    }

    /// Every parameter varies in every direction, on a warped base.
    pub fn rich() -> Self {
        Scenario::new(
            "rich",
            KahlerBase::warped(0.5).expect("valid rate"),
            params(
                "exp(0.3*t + 0.2*x1 - 0.1*s)",
                "1.5 + 0.3*sin(x2 + s)",
                "0.4*x1*t - 0.2 + 0.1*s^2",
                &["0.3*cos(t) + 0.2*x2", "0.5*x1*s - 0.1*t"],
            ),
            1.0,
        )
    }

    /// Flat base of dimension 4 with varying parameters.
    pub fn flat4() -> Self {
        Scenario::new(
            "flat4",
            KahlerBase::flat(4).expect("valid dimension"),
            params(
                "exp(0.2*x3 + 0.1*t)",
                "1 + 0.2*x4*s",
                "0.3*x2 - 0.1*t",
                &["0.2*x1", "0.1*s", "0.3", "-0.2*x3*t"],
            ),
            1.0,
        )
    }

    /// The five scenarios of the equivalence sweeps.
    pub fn sweep() -> Vec<Scenario> {
        vec![
            Scenario::d0(),
            Scenario::sigma_exp_t(),
            Scenario::gamma_x1(),
            Scenario::warped(),
            Scenario::conformal(),
        ]
    }

    pub fn by_name(name: &str) -> Option<Scenario> {
        match name {
            "d0" => Some(Scenario::d0()),
            "sigma-exp-t" => Some(Scenario::sigma_exp_t()),
            "gamma-x1" => Some(Scenario::gamma_x1()),
            "warped" => Some(Scenario::warped()),
            "conformal" => Some(Scenario::conformal()),
            "rich" => Some(Scenario::rich()),
            "flat4" => Some(Scenario::flat4()),
            _ => None,
        }
    }

    pub fn names() -> &'static [&'static str] {
        &[
            "d0",
            "sigma-exp-t",
            "gamma-x1",
            "warped",
            "conformal",
            "rich",
            "flat4",
        ]
    }

    /// Same scenario with every field hidden behind central differences.
    pub fn to_finite_differences(&self, h: f64) -> Self {
        Scenario {
            name: format!("{}-fd", self.name),
            base: self.base.to_finite_differences(h),
            params: self.params.to_finite_differences(h),
            domain: self.domain.clone(),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.base.is_exact() && self.params.is_exact()
    }

    /// `count` seeded points inside the sampling box, kept `margin` away
    /// from its faces.
    pub fn sample(&self, count: usize, seed: u64, margin: f64) -> Vec<Point> {
        sample_points(&self.domain.shrink(margin), count, seed)
    }

    /// Largest `|dA - ω|` over the given base points.
    pub fn potential_residual(&self, samples: &[Vec<f64>]) -> Result<f64> {
        self.base.verify_potential(samples)
    }
}

/// Uniform points in `domain` from a ChaCha8 stream.
pub fn sample_points(domain: &DomainBox, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coords = domain
                .lo
                .iter()
                .zip(&domain.hi)
                .map(|(lo, hi)| {
                    if lo < hi {
                        rng.gen_range(*lo..*hi)
                    } else {
                        *lo
                    }
                })
                .collect();
            Point::new(coords).expect("box corners are finite")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in Scenario::names() {
            let sc = Scenario::by_name(n).unwrap();
            assert_eq!(&sc.name, n);
            assert!(sc.is_exact());
            assert_eq!(sc.domain.dim(), sc.params.chart_dim());
        }
        assert!(Scenario::by_name("nope").is_none());
    }

    #[test]
    fn potentials_match_kahler_form() {
        let samples = vec![vec![0.2, -0.3], vec![-0.7, 0.5], vec![0.0, 0.9]];
        for sc in Scenario::sweep().into_iter().chain([Scenario::rich()]) {
            assert!(
                sc.potential_residual(&samples).unwrap() < 1e-12,
                "{}",
                sc.name
            );
        }
    }

    #[test]
    fn sampling_is_seeded_and_inside() {
        let sc = Scenario::rich();
        let a = sc.sample(10, 7, 0.1);
        assert_eq!(a, sc.sample(10, 7, 0.1));
        assert_ne!(a, sc.sample(10, 8, 0.1));
        let inner = sc.domain.shrink(0.1);
        assert!(a.iter().all(|p| inner.contains(p.coords())));
    }

    #[test]
    fn fd_conversion() {
        let sc = Scenario::warped().to_finite_differences(1e-5);
        assert_eq!(sc.name, "warped-fd");
        assert!(!sc.is_exact());
    }
}
