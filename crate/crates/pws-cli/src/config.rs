//! Line-oriented run configuration: `section.key = value`.

use std::fmt;
use std::path::{Path, PathBuf};

use field_expr::ScalarField;
use pws::loops::Thm3Kind;
use pws::{PwsSystem, Visibility, Window};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error("{0}")]
    Io(String),
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Portrait,
    Thm1,
    Thm2,
    Thm3,
    Thm4,
    Thm5,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Portrait => "portrait",
            ScenarioKind::Thm1 => "thm1",
            ScenarioKind::Thm2 => "thm2",
            ScenarioKind::Thm3 => "thm3",
            ScenarioKind::Thm4 => "thm4",
            ScenarioKind::Thm5 => "thm5",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One half-plane: `g`, or `g = phi·x^m`. `f` and `phi` default to `"1"`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SideConfig {
    pub f: Option<String>,
    pub g: Option<String>,
    pub phi: Option<String>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub ell: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub visibility: Option<Visibility>,
    pub loop_kind: Option<Thm3Kind>,
    /// Canonical loop parameters `a`, `k1`, `k2`.
    pub a: f64,
    pub k1: f64,
    pub k2: f64,
    pub lambda_plus: Option<Vec<f64>>,
    pub lambda_minus: Option<Vec<f64>>,
    pub trials: usize,
    pub seed: u64,
    pub starts: Vec<(f64, f64)>,
    pub t_span: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Portrait,
            ell: None,
            delta: None,
            alpha: None,
            tol: None,
            visibility: None,
            loop_kind: None,
            a: 1.0,
            k1: 1.0,
            k2: -1.0,
            lambda_plus: None,
            lambda_minus: None,
            trials: 0,
            seed: 0,
            starts: Vec::new(),
            t_span: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub portrait: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), portrait: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub upper: SideConfig,
    pub lower: SideConfig,
    pub window: Window,
    pub scenario: ScenarioConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// The system spelled out by the `upper`/`lower` sections.
    pub fn system(&self) -> pws::Result<PwsSystem> {
        let p = |s: &str| ScalarField::parse(s).map_err(|e| pws::PwsError::Invalid(format!("`{s}`: {e}")));
        let (fu, fl) = (self.upper.f.as_deref().unwrap_or("1"), self.lower.f.as_deref().unwrap_or("1"));
        let normal = |s: &SideConfig| s.m.is_some();
        if normal(&self.upper) || normal(&self.lower) {
            // a side given by g alone enters as φ = g, m = 0
            let part = |s: &SideConfig| -> (String, usize) {
                match (&s.phi, s.m, &s.g) {
                    (phi, Some(m), _) => (phi.clone().unwrap_or_else(|| "1".to_string()), m),
                    (_, _, Some(g)) => (g.clone(), 0),
                    _ => ("1".to_string(), 0),
                }
            };
            let ((pu, mu), (pl, ml)) = (part(&self.upper), part(&self.lower));
            PwsSystem::from_normal_form(p(fu)?, p(&pu)?, mu, p(fl)?, p(&pl)?, ml, self.window)
        } else {
            let g = |s: &SideConfig| s.g.clone().unwrap_or_else(|| "1".to_string());
            PwsSystem::from_sources(fu, &g(&self.upper), fl, &g(&self.lower), self.window)
        }
    }

    pub fn m_plus(&self) -> Option<usize> {
        self.upper.m
    }

    pub fn m_minus(&self) -> Option<usize> {
        self.lower.m
    }
}

fn unquote(v: &str, line: usize) -> Result<String, ConfigError> {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        Ok(v[1..v.len() - 1].to_string())
    } else {
        Err(ConfigError::Parse { line, msg: format!("expected a quoted expression, got `{v}`") })
    }
}

fn number(v: &str, line: usize) -> Result<f64, ConfigError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::Parse { line, msg: format!("expected a number, got `{}`", v.trim()) })
}

fn numbers(v: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| number(s, line)).collect()
}

fn integer(field: &str, v: &str) -> Result<i64, ConfigError> {
    v.trim().parse::<i64>().map_err(|_| invalid(field, format!("expected an integer, got `{}`", v.trim())))
}

fn count(field: &str, v: &str) -> Result<usize, ConfigError> {
    let n = integer(field, v)?;
    usize::try_from(n).map_err(|_| invalid(field, format!("must be a nonnegative integer, got {n}")))
}

fn boolean(v: &str, line: usize) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(ConfigError::Parse { line, msg: format!("expected true or false, got `{other}`") }),
    }
}

fn check_expr(field: &str, src: &str) -> Result<(), ConfigError> {
    ScalarField::parse(src).map(|_| ()).map_err(|e| invalid(field, e.to_string()))
}

fn strip_comment(raw: &str) -> &str {
    let mut quoted = false;
    for (i, c) in raw.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &raw[..i],
            _ => {}
        }
    }
    raw
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut upper = SideConfig::default();
    let mut lower = SideConfig::default();
    let mut sc = ScenarioConfig::default();
    let mut out = OutputConfig::default();
    let mut window = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, msg: format!("expected `section.key = value`, got `{body}`") })?;
        let key = key.trim();
        let value = value.trim();
        let (section, name) =
            key.split_once('.').ok_or_else(|| ConfigError::Parse { line, msg: format!("key `{key}` has no section") })?;
        match section {
            "upper" | "lower" => {
                let side = if section == "upper" { &mut upper } else { &mut lower };
                match name {
                    "f" | "g" | "phi" => {
                        let s = unquote(value, line)?;
                        check_expr(key, &s)?;
                        match name {
                            "f" => side.f = Some(s),
                            "g" => side.g = Some(s),
                            _ => side.phi = Some(s),
                        }
                    }
                    "m" => side.m = Some(count(key, value)?),
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
            }
            "scenario" => match name {
                "kind" => {
                    sc.kind = match value.trim_matches('"') {
                        "portrait" => ScenarioKind::Portrait,
                        "thm1" => ScenarioKind::Thm1,
                        "thm2" => ScenarioKind::Thm2,
                        "thm3" => ScenarioKind::Thm3,
                        "thm4" => ScenarioKind::Thm4,
                        "thm5" => ScenarioKind::Thm5,
                        other => return Err(invalid(key, format!("unknown scenario `{other}`"))),
                    }
                }
                "ell" => sc.ell = Some(count(key, value)?),
                "delta" => sc.delta = Some(number(value, line)?),
                "alpha" => sc.alpha = Some(number(value, line)?),
                "tol" => sc.tol = Some(number(value, line)?),
                "visibility" => {
                    let v = value.trim_matches('"');
                    let mut cs = v.chars();
                    sc.visibility = match (cs.next(), cs.next()) {
                        (Some(c), None) => Visibility::from_letter(c),
                        _ => None,
                    };
                    if sc.visibility.is_none() {
                        return Err(invalid(key, format!("expected one of V, I, L, R, got `{v}`")));
                    }
                }
                "loop" => {
                    sc.loop_kind = Some(match value.trim_matches('"') {
                        "cro" => Thm3Kind::Cro,
                        "cri" => Thm3Kind::Cri,
                        other => return Err(invalid(key, format!("expected cro or cri, got `{other}`"))),
                    })
                }
                "a" => sc.a = number(value, line)?,
                "k1" => sc.k1 = number(value, line)?,
                "k2" => sc.k2 = number(value, line)?,
                "lambda_plus" => sc.lambda_plus = Some(numbers(value, line)?),
                "lambda_minus" => sc.lambda_minus = Some(numbers(value, line)?),
                "trials" => sc.trials = count(key, value)?,
                "seed" => sc.seed = count(key, value)? as u64,
                "t_span" => sc.t_span = number(value, line)?,
                "window" => {
                    let w = numbers(value, line)?;
                    if w.len() != 4 {
                        return Err(invalid(key, "expected x_lo, x_hi, y_lo, y_hi"));
                    }
                    window = Some(Window::new(w[0], w[1], w[2], w[3]).map_err(|e| invalid(key, e.to_string()))?);
                }
                "start" => {
                    let p = numbers(value, line)?;
                    if p.len() != 2 {
                        return Err(invalid(key, "expected x, y"));
                    }
                    sc.starts.push((p[0], p[1]));
                }
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
            "output" => match name {
                "dir" => out.dir = PathBuf::from(value.trim_matches('"')),
                "portrait" => out.portrait = boolean(value, line)?,
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
    }
    let window = match window {
        Some(w) => w,
        None => Window::new(-1.0, 1.0, -1.0, 1.0).expect("default window"),
    };
    let cfg = RunConfig { upper, lower, window, scenario: sc, output: out };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    for (name, s) in [("upper", &cfg.upper), ("lower", &cfg.lower)] {
        if s.g.is_some() && s.phi.is_some() {
            return Err(invalid(&format!("{name}.g"), "give either g or phi with m, not both"));
        }
        if s.g.is_some() && s.m.is_some() {
            return Err(invalid(&format!("{name}.m"), "m belongs to the phi form, not to g"));
        }
        if s.phi.is_some() && s.m.is_none() {
            return Err(invalid(&format!("{name}.m"), "phi needs m"));
        }
    }
    let sc = &cfg.scenario;
    let need_m = |side: &str, m: Option<usize>| m.ok_or_else(|| invalid(&format!("{side}.m"), "required by this scenario"));
    if let Some(t) = sc.tol {
        if !(t > 0.0 && t < 1e-2) {
            return Err(invalid("scenario.tol", format!("must lie in (0, 1e-2), got {t}")));
        }
    }
    if let Some(d) = sc.delta {
        if !(d > 0.0) {
            return Err(invalid("scenario.delta", "must be positive"));
        }
    }
    if let Some(a) = sc.alpha {
        if !(a > 0.0) {
            return Err(invalid("scenario.alpha", "must be positive"));
        }
    }
    if !(sc.t_span > 0.0) {
        return Err(invalid("scenario.t_span", "must be positive"));
    }
    match sc.kind {
        ScenarioKind::Portrait => {}
        ScenarioKind::Thm1 => {
            let total = need_m("upper", cfg.upper.m)? + need_m("lower", cfg.lower.m)?;
            if total == 0 {
                return Err(invalid("upper.m", "need m⁺ + m⁻ ≥ 1"));
            }
            match (&sc.lambda_plus, &sc.lambda_minus, sc.ell) {
                (Some(lp), Some(lm), _) => {
                    if lp.len() != cfg.upper.m.unwrap() {
                        return Err(invalid("scenario.lambda_plus", format!("needs {} entries", cfg.upper.m.unwrap())));
                    }
                    if lm.len() != cfg.lower.m.unwrap() {
                        return Err(invalid("scenario.lambda_minus", format!("needs {} entries", cfg.lower.m.unwrap())));
                    }
                }
                (None, None, Some(ell)) if ell >= 1 && ell <= total => {}
                (None, None, Some(ell)) => {
                    return Err(invalid("scenario.ell", format!("{ell} outside 1..={total}")));
                }
                (None, None, None) if sc.trials > 0 => {}
                _ => return Err(invalid("scenario.ell", "give ell, both lambda vectors, or trials")),
            }
        }
        ScenarioKind::Thm2 => {
            let m = need_m("upper", cfg.upper.m)?;
            let vis = sc.visibility.ok_or_else(|| invalid("scenario.visibility", "required by thm2"))?;
            let odd = matches!(vis, Visibility::V | Visibility::I);
            if m == 0 || (m % 2 == 1) != odd {
                return Err(invalid("scenario.visibility", format!("{} does not fit m⁺ = {m}", vis.letter())));
            }
            let ell = sc.ell.ok_or_else(|| invalid("scenario.ell", "required by thm2"))?;
            if ell == 0 {
                return Err(invalid("scenario.ell", "must be at least 1"));
            }
        }
        ScenarioKind::Thm3 | ScenarioKind::Thm4 | ScenarioKind::Thm5 => {
            let (mp, mm) = (need_m("upper", cfg.upper.m)?, need_m("lower", cfg.lower.m)?);
            for (side, m) in [("upper", mp), ("lower", mm)] {
                if m % 2 == 0 {
                    return Err(invalid(&format!("{side}.m"), format!("must be odd, got {m}")));
                }
            }
            if sc.ell.is_none() {
                return Err(invalid("scenario.ell", format!("required by {}", sc.kind)));
            }
            if sc.kind == ScenarioKind::Thm3 && sc.loop_kind.is_none() {
                return Err(invalid("scenario.loop", "required by thm3 (cro or cri)"));
            }
            if !(sc.a > 0.0 && sc.k1 > 0.0 && sc.k2 < 0.0) {
                return Err(invalid("scenario.a", "need a > 0, k1 > 0, k2 < 0"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("# x\n\nupper.g = \"x\" # tail\nlower.g = \"1\"\n").unwrap();
        assert_eq!(c.upper.g.as_deref(), Some("x"));
        assert_eq!(c.scenario.kind, ScenarioKind::Portrait);
    }

    #[test]
    fn unquoted_expression_is_a_parse_error() {
        let e = parse_config("upper.g = x\n").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn bad_expression_names_the_field() {
        let e = parse_config("lower.f = \"1 +\"\n").unwrap_err();
        assert!(e.to_string().contains("lower.f"), "{e}");
    }

    #[test]
    fn mixed_sides_build_a_normal_form() {
        let c = parse_config("upper.phi = \"2\"\nupper.m = 3\nlower.g = \"-1\"\n").unwrap();
        let s = c.system().unwrap();
        assert_eq!(s.upper.g.eval(0.5, 0.0).unwrap(), 2.0 * 0.125);
        assert_eq!(s.lower.g.eval(0.5, 0.0).unwrap(), -1.0);
    }
}
