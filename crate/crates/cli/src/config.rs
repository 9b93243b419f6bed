//! Scenario configuration files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use optconn::connection::{Fault, TablePath};
use optconn::fields::{parse_expr, DomainBox, Point, ScalarField, Symbols, DEFAULT_FD_STEP};
use optconn::kahler_base::{CustomBaseError, KahlerBase};
use optconn::metric::MetricParams;
use optconn::oracle::{Check, Tolerances};
use optconn::scenarios::sample_points;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Used when no configuration file is given.
pub const DEFAULT_CONFIG: &str = r#"
name = "d0"

[base]
family = "flat"
dim = 2

[params]
sigma = "1"
alpha = "1"
beta = "0"
gamma = ["0", "0"]
"#;

const DEFAULT_POINTS: usize = 20;
const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("[{section}] {key}: {reason}")]
    Invalid {
        section: &'static str,
        key: String,
        reason: String,
    },
}

fn invalid(section: &'static str, key: impl Into<String>, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        section,
        key: key.into(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub name: Option<String>,
    pub base: RawBase,
    pub params: RawParams,
    #[serde(default)]
    pub points: RawPoints,
    pub checks: Option<Vec<String>>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub mode: Option<String>,
    pub fd_step: Option<f64>,
    pub richardson: Option<bool>,
    pub table: Option<String>,
    pub fault: Option<String>,
    #[serde(default)]
    pub curvature: RawCurvature,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBase {
    pub family: String,
    pub dim: usize,
    /// Warp rate of the `warped` family.
    pub rate: Option<f64>,
    /// Log conformal factor of the `conformal` family.
    pub u: Option<String>,
    pub frame: Option<Vec<Vec<String>>>,
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(rename = "J")]
    pub complex: Option<Vec<Vec<String>>>,
    pub potential: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub sigma: String,
    pub alpha: String,
    pub beta: String,
    pub gamma: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPoints {
    #[serde(default)]
    pub explicit: Vec<Vec<f64>>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub half_width: Option<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCurvature {
    #[serde(default)]
    pub enabled: bool,
    pub step: Option<f64>,
    #[serde(default)]
    pub coordinate_check: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub path: Option<PathBuf>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSpec {
    pub step: f64,
    pub coordinate_check: bool,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub family: String,
    pub dim: usize,
    pub base: KahlerBase,
    pub params: MetricParams,
    pub expressions: RawParams,
    pub points: Vec<Point>,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub tolerances: Tolerances,
    pub mode: Mode,
    pub fd_step: f64,
    pub richardson: bool,
    pub table: Option<TablePath>,
    pub fault: Option<Fault>,
    pub curvature: Option<CurvatureSpec>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl ScenarioConfig {
    pub fn chart_dim(&self) -> usize {
        self.dim + 2
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub checks: Option<String>,
    pub points: Vec<String>,
    pub table: Option<String>,
    pub fd_step: Option<f64>,
    pub tolerances: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub fault: Option<String>,
    pub mode: Option<String>,
    pub count: Option<usize>,
    pub curvature: bool,
}

pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    Ok(toml::from_str(text)?)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    validate(parse_raw(text)?)
}

fn parse_csv(src: &str) -> Result<Vec<f64>, String> {
    src.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| format!("'{}': {e}", v.trim()))
        })
        .collect()
}

impl RawConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(c) = &o.checks {
            self.checks = Some(c.split(',').map(|s| s.trim().to_string()).collect());
        }
        if !o.points.is_empty() {
            self.points.explicit = o
                .points
                .iter()
                .map(|p| parse_csv(p).map_err(|e| invalid("cli", "--point", e)))
                .collect::<Result<_, _>>()?;
            self.points.count = Some(0);
        }
        if let Some(n) = o.count {
            self.points.count = Some(n);
        }
        if let Some(t) = &o.table {
            self.table = Some(t.clone());
        }
        if let Some(h) = o.fd_step {
            self.fd_step = Some(h);
        }
        if let Some(spec) = &o.tolerances {
            for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| {
                    invalid(
                        "cli",
                        "--tolerance",
                        format!("expected check=value, got '{item}'"),
                    )
                })?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|e| invalid("cli", "--tolerance", format!("'{}': {e}", v.trim())))?;
                self.tolerances.insert(k.trim().to_string(), v);
            }
        }
        if let Some(s) = o.seed {
            self.points.seed = Some(s);
        }
        if let Some(p) = &o.output {
            self.output.path = Some(p.clone());
        }
        if let Some(f) = &o.format {
            self.output.format = Some(f.clone());
        }
        if let Some(f) = &o.fault {
            self.fault = Some(f.clone());
        }
        if let Some(m) = &o.mode {
            self.mode = Some(m.clone());
        }
        if o.curvature {
            self.curvature.enabled = true;
        }
        Ok(())
    }
}

fn field(
    src: &str,
    sym: &Symbols,
    section: &'static str,
    key: String,
) -> Result<ScalarField, ConfigError> {
    ScalarField::parse(src, sym).map_err(|e| invalid(section, key, e))
}

fn build_base(raw: &RawBase) -> Result<KahlerBase, ConfigError> {
    let m = raw.dim;
    if m < 2 || !m.is_multiple_of(2) {
        return Err(invalid(
            "base",
            "dim",
            format!("dim must be even and at least 2, got {m}"),
        ));
    }
    let sym = Symbols::base(m);
    let potential = |required: bool| -> Result<Option<Vec<ScalarField>>, ConfigError> {
        let Some(list) = &raw.potential else {
            return if required {
                Err(invalid("base", "potential", "required for this family"))
            } else {
                Ok(None)
            };
        };
        if list.len() != m {
            return Err(invalid(
                "base",
                "potential",
                format!("expected {m} entries, got {}", list.len()),
            ));
        }
        list.iter()
            .enumerate()
            .map(|(i, s)| field(s, &sym, "base", format!("potential[{i}]")))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    };
    let base = match raw.family.as_str() {
        "flat" => {
            let base = KahlerBase::flat(m).map_err(|e| invalid("base", "dim", e))?;
            match potential(false)? {
                Some(a) => base
                    .with_potential(a)
                    .map_err(|e| invalid("base", "potential", e))?,
                None => base,
            }
        }
        "warped" => {
            if m != 2 {
                return Err(invalid("base", "dim", "the warped family has dim = 2"));
            }
            let rate = raw
                .rate
                .ok_or_else(|| invalid("base", "rate", "required for the warped family"))?;
            KahlerBase::warped(rate).map_err(|e| invalid("base", "rate", e))?
        }
        "conformal" => {
            if m != 2 {
                return Err(invalid("base", "dim", "the conformal family has dim = 2"));
            }
            let u = raw
                .u
                .as_deref()
                .ok_or_else(|| invalid("base", "u", "required for the conformal family"))?;
            let u = parse_expr(u, &sym).map_err(|e| invalid("base", "u", e))?;
            let a = raw
                .potential
                .as_ref()
                .ok_or_else(|| invalid("base", "potential", "required for this family"))?;
            if a.len() != 2 {
                return Err(invalid(
                    "base",
                    "potential",
                    format!("expected 2 entries, got {}", a.len()),
                ));
            }
            let a0 = parse_expr(&a[0], &sym).map_err(|e| invalid("base", "potential[0]", e))?;
            let a1 = parse_expr(&a[1], &sym).map_err(|e| invalid("base", "potential[1]", e))?;
            KahlerBase::conformal(u, [a0, a1]).map_err(|e| invalid("base", "u", e))?
        }
        "custom" => {
            let need = |v: &Option<Vec<Vec<String>>>, key: &'static str| {
                v.clone()
                    .ok_or_else(|| invalid("base", key, "required for the custom family"))
            };
            let frame = need(&raw.frame, "frame")?;
            let metric = need(&raw.metric, "metric")?;
            let complex = need(&raw.complex, "J")?;
            let pot = raw
                .potential
                .clone()
                .ok_or_else(|| invalid("base", "potential", "required for this family"))?;
            if frame.len() != m {
                return Err(invalid(
                    "base",
                    "frame",
                    format!("expected {m} rows, got {}", frame.len()),
                ));
            }
            KahlerBase::parse_custom(&frame, &metric, &complex, &pot).map_err(|e| match e {
                CustomBaseError::Parse { key, source } => invalid("base", key, source),
                CustomBaseError::Invalid(e) => invalid("base", "family", e),
            })?
        }
        other => {
            return Err(invalid(
                "base",
                "family",
                format!("unknown family '{other}' (flat, warped, conformal, custom)"),
            ))
        }
    };
    Ok(base)
}

fn build_params(raw: &RawParams, m: usize) -> Result<MetricParams, ConfigError> {
    if raw.gamma.len() != m {
        return Err(invalid(
            "params",
            "gamma",
            format!("expected {m} components, got {}", raw.gamma.len()),
        ));
    }
    let sym = Symbols::chart(m);
    let gamma = raw
        .gamma
        .iter()
        .enumerate()
        .map(|(i, s)| field(s, &sym, "params", format!("gamma[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    MetricParams::new(
        field(&raw.sigma, &sym, "params", "sigma".into())?,
        field(&raw.alpha, &sym, "params", "alpha".into())?,
        field(&raw.beta, &sym, "params", "beta".into())?,
        gamma,
    )
    .map_err(|e| invalid("params", "gamma", e))
}

fn build_points(raw: &RawPoints, n: usize) -> Result<(Vec<Point>, u64), ConfigError> {
    let seed = raw.seed.unwrap_or(0);
    let mut points = Vec::new();
    for (i, c) in raw.explicit.iter().enumerate() {
        if c.len() != n {
            return Err(invalid(
                "points",
                format!("explicit[{i}]"),
                format!("expected {n} coordinates, got {}", c.len()),
            ));
        }
        points.push(
            Point::new(c.clone()).map_err(|e| invalid("points", format!("explicit[{i}]"), e))?,
        );
    }
    let default_count = if raw.explicit.is_empty() {
        DEFAULT_POINTS
    } else {
        0
    };
    let count = raw.count.unwrap_or(default_count);
    if count > 0 {
        let domain = match (&raw.lo, &raw.hi) {
            (Some(lo), Some(hi)) => {
                if lo.len() != n || hi.len() != n {
                    return Err(invalid(
                        "points",
                        "lo",
                        format!("box corners need {n} coordinates"),
                    ));
                }
                if lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(invalid("points", "lo", "lower corner exceeds upper corner"));
                }
                DomainBox::new(lo.clone(), hi.clone())
            }
            (None, None) => DomainBox::cube(n, raw.half_width.unwrap_or(1.0)),
            _ => return Err(invalid("points", "lo", "lo and hi must be given together")),
        };
        let margin = raw.margin.unwrap_or(DEFAULT_MARGIN);
        points.extend(sample_points(&domain.shrink(margin), count, seed));
    }
    if points.is_empty() {
        return Err(invalid("points", "count", "no evaluation points"));
    }
    Ok((points, seed))
}

fn parse_mode(s: Option<&str>) -> Result<Mode, ConfigError> {
    match s.unwrap_or("exact") {
        "exact" => Ok(Mode::Exact),
        "fd" => Ok(Mode::Fd),
        other => Err(invalid(
            "config",
            "mode",
            format!("expected exact or fd, got '{other}'"),
        )),
    }
}

fn parse_format(raw: &RawOutput) -> Result<Format, ConfigError> {
    let by_ext = raw
        .path
        .as_ref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e == "json");
    match raw.format.as_deref() {
        None if by_ext => Ok(Format::Json),
        None | Some("text") => Ok(Format::Text),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(invalid(
            "output",
            "format",
            format!("expected text or json, got '{other}'"),
        )),
    }
}

/// Build and check a configuration.
pub fn validate(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let mut base = build_base(&raw.base)?;
    let m = base.dim();
    let mut params = build_params(&raw.params, m)?;
    let (points, seed) = build_points(&raw.points, m + 2)?;

    for (i, p) in points.iter().enumerate() {
        if let Err(e) = params.values(p.coords()) {
            let key = match e {
                optconn::Error::SigmaNotPositive(_) => "sigma",
                optconn::Error::AlphaZero => "alpha",
                _ => "expressions",
            };
            return Err(invalid("params", key, format!("{e} at point {i} ({p})")));
        }
    }

    let mode = parse_mode(raw.mode.as_deref())?;
    let fd_step = raw.fd_step.unwrap_or(DEFAULT_FD_STEP);
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(invalid(
            "config",
            "fd_step",
            format!("must be positive, got {fd_step}"),
        ));
    }
    if mode == Mode::Fd {
        base = base.to_finite_differences(fd_step);
        params = params.to_finite_differences(fd_step);
    }

    let checks = match &raw.checks {
        None => Check::ALL.to_vec(),
        Some(list) => {
            Check::parse_list(&list.join(",")).map_err(|e| invalid("config", "checks", e))?
        }
    };
    let mut tolerances = match mode {
        Mode::Exact => Tolerances::exact(),
        Mode::Fd => Tolerances::finite_difference(),
    };
    for (k, v) in &raw.tolerances {
        let check: Check = k.parse().map_err(|e| invalid("tolerances", k.clone(), e))?;
        if v.is_nan() || *v < 0.0 {
            return Err(invalid(
                "tolerances",
                k.clone(),
                format!("must be non-negative, got {v}"),
            ));
        }
        tolerances.set(check, *v);
    }

    let table = raw
        .table
        .as_deref()
        .map(|t| {
            t.parse::<TablePath>()
                .map_err(|e| invalid("config", "table", e))
        })
        .transpose()?;
    let fault = raw
        .fault
        .as_deref()
        .map(|f| {
            f.parse::<Fault>()
                .map_err(|e| invalid("config", "fault", e))
        })
        .transpose()?;
    let curvature = raw.curvature.enabled.then(|| CurvatureSpec {
        step: raw
            .curvature
            .step
            .unwrap_or(optconn::curvature::DEFAULT_CURVATURE_STEP),
        coordinate_check: raw.curvature.coordinate_check,
    });
    let format = parse_format(&raw.output)?;

    Ok(ScenarioConfig {
        name: raw.name.unwrap_or_else(|| "scenario".into()),
        family: raw.base.family.clone(),
        dim: m,
        base,
        params,
        expressions: raw.params,
        points,
        seed,
        checks,
        tolerances,
        mode,
        fd_step,
        richardson: raw.richardson.unwrap_or(false),
        table,
        fault,
        curvature,
        output: raw.output.path,
        format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_d0() {
        let c = parse_config(DEFAULT_CONFIG).unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.chart_dim(), 4);
        assert_eq!(c.points.len(), DEFAULT_POINTS);
        assert_eq!(c.checks.len(), 9);
        assert_eq!(c.mode, Mode::Exact);
        assert_eq!(c.format, Format::Text);
    }

    #[test]
    fn odd_dimension_is_rejected() {
        let text = DEFAULT_CONFIG.replace("dim = 2", "dim = 3");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("dim must be even"), "{err}");
    }

    #[test]
    fn malformed_expression_names_key() {
        let text = DEFAULT_CONFIG.replace(r#"alpha = "1""#, r#"alpha = "x1 +""#);
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().starts_with("[params] alpha:"), "{err}");
        let text = DEFAULT_CONFIG.replace(r#"["0", "0"]"#, r#"["0", "sin("]"#);
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("gamma[1]"), "{err}");
    }

    #[test]
    fn nonpositive_sigma_is_rejected() {
        let text = DEFAULT_CONFIG.replace(r#"sigma = "1""#, r#"sigma = "t""#);
        let err = parse_config(&text).unwrap_err();
        assert!(
            err.to_string()
                .starts_with("[params] sigma: conformal factor sigma = -"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_syntax_errors() {
        let text = format!("{DEFAULT_CONFIG}\nbogus = 1\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut raw = parse_raw(DEFAULT_CONFIG).unwrap();
        raw.apply(&Overrides {
            checks: Some("torsion,metricity".into()),
            points: vec!["0.3,-0.2,0.1,0.5".into()],
            tolerances: Some("torsion=1e-3".into()),
            fault: Some("E1,E2,q".into()),
            table: Some("oracle".into()),
            ..Default::default()
        })
        .unwrap();
        let c = validate(raw).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.checks, vec![Check::Torsion, Check::Metricity]);
        assert_eq!(c.tolerances.get(Check::Torsion), 1e-3);
        assert_eq!(c.table, Some(TablePath::Oracle));
        assert!(c.fault.is_some());
    }

    #[test]
    fn bad_point_and_tolerance() {
        let mut raw = parse_raw(DEFAULT_CONFIG).unwrap();
        raw.apply(&Overrides {
            points: vec!["0.3,-0.2,0.1".into()],
            ..Default::default()
        })
        .unwrap();
        let err = validate(raw).unwrap_err();
        assert!(err.to_string().contains("expected 4 coordinates"), "{err}");

        let mut raw = parse_raw(DEFAULT_CONFIG).unwrap();
        let err = raw
            .apply(&Overrides {
                tolerances: Some("torsion".into()),
                ..Default::default()
            })
            .unwrap_err();
        assert!(err.to_string().contains("--tolerance"));
        let mut raw = parse_raw(DEFAULT_CONFIG).unwrap();
        raw.tolerances.insert("nope".into(), 1.0);
        assert!(validate(raw)
            .unwrap_err()
            .to_string()
            .starts_with("[tolerances] nope"));
    }

    #[test]
    fn families() {
        let warped =
            DEFAULT_CONFIG.replace(r#"family = "flat""#, "family = \"warped\"\nrate = 0.7");
        assert_eq!(parse_config(&warped).unwrap().family, "warped");
        let missing = DEFAULT_CONFIG.replace(r#"family = "flat""#, r#"family = "warped""#);
        assert!(parse_config(&missing)
            .unwrap_err()
            .to_string()
            .contains("rate"));
        let conformal = DEFAULT_CONFIG.replace(
            r#"family = "flat""#,
            "family = \"conformal\"\nu = \"0.1*x1\"\npotential = [\"0\", \"exp(0.2*x1)/0.2\"]",
        );
        assert!(parse_config(&conformal).is_ok());
        let unknown = DEFAULT_CONFIG.replace(r#"family = "flat""#, r#"family = "sphere""#);
        assert!(parse_config(&unknown)
            .unwrap_err()
            .to_string()
            .contains("unknown family"));
    }

    #[test]
    fn fd_mode_converts_fields() {
        let text = format!("mode = \"fd\"\nfd_step = 1e-4\n{DEFAULT_CONFIG}");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.mode, Mode::Fd);
        assert!(!c.params.is_exact());
        assert_eq!(c.tolerances.get(Check::Metricity), 1e-6);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = parse_config(DEFAULT_CONFIG).unwrap();
        let b = parse_config(DEFAULT_CONFIG).unwrap();
        assert_eq!(a.points, b.points);
        let mut raw = parse_raw(DEFAULT_CONFIG).unwrap();
        raw.points.seed = Some(9);
        assert_ne!(validate(raw).unwrap().points, a.points);
    }
}
