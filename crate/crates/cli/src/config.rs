//! The `key = value` configuration format.
//!
//! ```text
//! # comment
//! [design]
//! arms = 3
//! shape = obf            # obf | pocock | custom
//! boundaries = inf, inf, 1   # per-stage multipliers, custom shape only
//!
//! [endpoint]
//! type = binary          # binary | normal
//! p_control = 0.12
//! rd_relevant = 0.05
//! rd_uninteresting = 0.01
//!
//! [calibration]
//! alpha = 0.025
//! power = 0.9
//!
//! [effects]
//! null = 0, 0, 0
//! lfc = theta_prime, theta_zero, theta_zero
//! ```
//!
//! A key inside `[section]` is addressed as `section.key`; a dotted key may
//! also appear before any section header. Effect lists accept numbers and
//! the names `theta_prime` and `theta_zero`.

use std::collections::BTreeMap;

use dtl_core::{binary_to_normal, BinaryEndpointSpec, BoundaryShape, CalibrationConfig, EffectConfig, NormalEffectSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: `{key}` is already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },

    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),

    #[error("invalid value for `{field}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
}

impl ConfigError {
    fn invalid(field: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Endpoint as written in the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EndpointInput {
    Binary(BinaryEndpointSpec),
    Normal(NormalEffectSpec),
}

impl EndpointInput {
    pub fn normal(&self) -> NormalEffectSpec {
        match self {
            EndpointInput::Binary(b) => binary_to_normal(b).expect("validated at parse time"),
            EndpointInput::Normal(n) => *n,
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignInputs {
    pub arms: usize,
    pub shape: BoundaryShape,
    /// Fixed per-stage size; the sample-size search is skipped when set.
    pub n_per_stage: Option<u32>,
    pub endpoint: EndpointInput,
    pub calibration: CalibrationConfig,
    pub effects: BTreeMap<String, EffectConfig>,
}

const KNOWN: &[&str] = &[
    "design.arms",
    "design.shape",
    "design.boundaries",
    "design.n_per_stage",
    "endpoint.type",
    "endpoint.p_control",
    "endpoint.rd_relevant",
    "endpoint.rd_uninteresting",
    "endpoint.theta_prime",
    "endpoint.theta_zero",
    "endpoint.sigma_sq",
    "calibration.alpha",
    "calibration.power",
    "calibration.omega",
    "calibration.seed",
    "calibration.max_n",
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?;
                let name = name.trim();
                if !matches!(name, "design" | "endpoint" | "calibration" | "effects") {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown section `[{name}]`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key or value".into(),
                });
            }
            let full = match &section {
                Some(s) => format!("{s}.{key}"),
                None => key.to_string(),
            };
            let is_effect = full
                .strip_prefix("effects.")
                .is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'));
            if !is_effect && !KNOWN.contains(&full.as_str()) {
                return Err(ConfigError::UnknownKey { line, key: full });
            }
            if let Some((first, _)) = map.get(&full) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: full,
                    first: *first,
                });
            }
            map.insert(full, (line, value.to_string()));
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::invalid(key, Some(line), format!("`{v}` is not a valid number"))),
        }
    }
}

fn parse_real(v: &str) -> Option<f64> {
    match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
        s => s.parse().ok().filter(|x: &f64| x.is_finite()),
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<DesignInputs, ConfigError> {
    let e = Entries::parse(text)?;

    let mut missing = Vec::new();
    for key in ["design.arms", "design.shape", "endpoint.type", "calibration.alpha", "calibration.power"] {
        if e.raw(key).is_none() {
            missing.push(key.to_string());
        }
    }
    let endpoint_keys: &[&str] = match e.raw("endpoint.type").map(|(_, v)| v) {
        Some("binary") => &["endpoint.p_control", "endpoint.rd_relevant", "endpoint.rd_uninteresting"],
        Some("normal") => &["endpoint.theta_prime", "endpoint.theta_zero", "endpoint.sigma_sq"],
        _ => &[],
    };
    missing.extend(endpoint_keys.iter().filter(|k| e.raw(k).is_none()).map(|k| k.to_string()));
    if !missing.is_empty() {
        return Err(ConfigError::Missing(missing));
    }

    let line_of = |key: &str| e.raw(key).map(|(l, _)| l);
    let arms: usize = e.number("design.arms")?.expect("checked above");
    if arms == 0 || arms > dtl_core::events::MAX_ARMS {
        return Err(ConfigError::invalid(
            "design.arms",
            line_of("design.arms"),
            format!("must lie in 1..={}", dtl_core::events::MAX_ARMS),
        ));
    }

    let shape = match e.raw("design.shape").expect("checked above") {
        (_, "obf") => BoundaryShape::ObrienFleming,
        (_, "pocock") => BoundaryShape::Pocock,
        (line, "custom") => {
            let (bl, list) = e.raw("design.boundaries").ok_or_else(|| {
                ConfigError::invalid("design.boundaries", Some(line), "required when design.shape = custom")
            })?;
            let m: Option<Vec<f64>> = list.split(',').map(|t| parse_real(t.trim())).collect();
            let m = m.ok_or_else(|| ConfigError::invalid("design.boundaries", Some(bl), "expected numbers or inf"))?;
            if m.len() != arms {
                return Err(ConfigError::invalid(
                    "design.boundaries",
                    Some(bl),
                    format!("{} values for {arms} stages", m.len()),
                ));
            }
            let shape = BoundaryShape::Custom(m);
            shape
                .multipliers(arms)
                .map_err(|err| ConfigError::invalid("design.boundaries", Some(bl), err.to_string()))?;
            shape
        }
        (line, other) => {
            return Err(ConfigError::invalid(
                "design.shape",
                Some(line),
                format!("`{other}` is not one of obf, pocock, custom"),
            ))
        }
    };
    if !matches!(shape, BoundaryShape::Custom(_)) {
        if let Some(l) = line_of("design.boundaries") {
            return Err(ConfigError::invalid("design.boundaries", Some(l), "only used with design.shape = custom"));
        }
    }

    let n_per_stage: Option<u32> = e.number("design.n_per_stage")?;
    if n_per_stage == Some(0) {
        return Err(ConfigError::invalid("design.n_per_stage", line_of("design.n_per_stage"), "must be at least 1"));
    }

    let real = |key: &str| -> Result<f64, ConfigError> {
        let (line, v) = e.raw(key).expect("checked above");
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ConfigError::invalid(key, Some(line), format!("`{v}` is not a finite number")))
    };
    let endpoint = match e.raw("endpoint.type").expect("checked above") {
        (_, "binary") => {
            let spec = BinaryEndpointSpec {
                p_control: real("endpoint.p_control")?,
                rd_relevant: real("endpoint.rd_relevant")?,
                rd_uninteresting: real("endpoint.rd_uninteresting")?,
            };
            if !(spec.p_control > 0.0 && spec.p_control < 1.0) {
                return Err(ConfigError::invalid("endpoint.p_control", line_of("endpoint.p_control"), "must lie in (0, 1)"));
            }
            if !(spec.rd_uninteresting > 0.0) {
                return Err(ConfigError::invalid(
                    "endpoint.rd_uninteresting",
                    line_of("endpoint.rd_uninteresting"),
                    "must be positive",
                ));
            }
            if !(spec.rd_relevant > spec.rd_uninteresting && spec.rd_relevant < spec.p_control) {
                return Err(ConfigError::invalid(
                    "endpoint.rd_relevant",
                    line_of("endpoint.rd_relevant"),
                    "must lie between rd_uninteresting and p_control",
                ));
            }
            EndpointInput::Binary(spec)
        }
        (_, "normal") => {
            let spec = NormalEffectSpec {
                theta_prime: real("endpoint.theta_prime")?,
                theta_zero: real("endpoint.theta_zero")?,
                sigma_sq: real("endpoint.sigma_sq")?,
            };
            if !(spec.theta_zero > 0.0) {
                return Err(ConfigError::invalid("endpoint.theta_zero", line_of("endpoint.theta_zero"), "must be positive"));
            }
            if !(spec.theta_prime > spec.theta_zero) {
                return Err(ConfigError::invalid(
                    "endpoint.theta_prime",
                    line_of("endpoint.theta_prime"),
                    "must exceed theta_zero",
                ));
            }
            if !(spec.sigma_sq > 0.0) {
                return Err(ConfigError::invalid("endpoint.sigma_sq", line_of("endpoint.sigma_sq"), "must be positive"));
            }
            EndpointInput::Normal(spec)
        }
        (line, other) => {
            return Err(ConfigError::invalid(
                "endpoint.type",
                Some(line),
                format!("`{other}` is not one of binary, normal"),
            ))
        }
    };

    let mut calibration = CalibrationConfig {
        alpha: real("calibration.alpha")?,
        power_target: real("calibration.power")?,
        ..CalibrationConfig::default()
    };
    if let Some(w) = e.number("calibration.omega")? {
        calibration.omega = w;
    }
    if let Some(s) = e.number("calibration.seed")? {
        calibration.seed = s;
    }
    if let Some(m) = e.number("calibration.max_n")? {
        calibration.max_n = m;
    }
    check_calibration(&calibration, &|k| line_of(k))?;

    let normal = endpoint.normal();
    let mut effects = BTreeMap::new();
    for (key, (line, list)) in e.0.iter().filter(|(k, _)| k.starts_with("effects.")) {
        let name = &key["effects.".len()..];
        let deltas: Option<Vec<f64>> = list
            .split(',')
            .map(|t| match t.trim() {
                "theta_prime" => Some(normal.theta_prime),
                "theta_zero" => Some(normal.theta_zero),
                "-theta_prime" => Some(-normal.theta_prime),
                "-theta_zero" => Some(-normal.theta_zero),
                v => v.parse::<f64>().ok().filter(|x| x.is_finite()),
            })
            .collect();
        let deltas = deltas.ok_or_else(|| {
            ConfigError::invalid(key, Some(*line), "expected finite numbers, theta_prime or theta_zero")
        })?;
        if deltas.len() != arms {
            return Err(ConfigError::invalid(key, Some(*line), format!("{} effects for {arms} arms", deltas.len())));
        }
        effects.insert(name.to_string(), EffectConfig::new(deltas));
    }

    Ok(DesignInputs {
        arms,
        shape,
        n_per_stage,
        endpoint,
        calibration,
        effects,
    })
}

/// Range checks naming the offending setting. `line` locates a key in the
/// source file when there is one.
pub fn check_calibration(cfg: &CalibrationConfig, line: &dyn Fn(&str) -> Option<usize>) -> Result<(), ConfigError> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(ConfigError::invalid("calibration.alpha", line("calibration.alpha"), format!("{} is not in (0, 1)", cfg.alpha)));
    }
    if !(cfg.power_target > 0.0 && cfg.power_target < 1.0) {
        return Err(ConfigError::invalid(
            "calibration.power",
            line("calibration.power"),
            format!("{} is not in (0, 1)", cfg.power_target),
        ));
    }
    if !(cfg.omega > 0.0 && cfg.omega < cfg.alpha) {
        return Err(ConfigError::invalid(
            "calibration.omega",
            line("calibration.omega"),
            format!("{} is not in (0, alpha)", cfg.omega),
        ));
    }
    if cfg.max_n == 0 {
        return Err(ConfigError::invalid("calibration.max_n", line("calibration.max_n"), "must be at least 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLED: &str = include_str!("../poptarts.cfg");

    #[test]
    fn bundled_config_describes_the_three_arm_trial() {
        let c = parse_config(BUNDLED).unwrap();
        assert_eq!(c.arms, 3);
        assert_eq!(c.shape, BoundaryShape::ObrienFleming);
        assert_eq!(c.calibration.alpha, 0.025);
        assert_eq!(c.calibration.power_target, 0.9);
        assert_eq!(c.calibration.omega, 1e-5);
        let n = c.endpoint.normal();
        assert!((n.theta_prime - 0.594).abs() < 1e-3);
        assert!((n.theta_zero - 0.098).abs() < 1e-3);
        assert!((n.sigma_sq - 9.47).abs() < 1e-2);
        assert_eq!(c.effects.len(), 3);
        assert_eq!(c.effects["lfc"].deltas, vec![n.theta_prime, n.theta_zero, n.theta_zero]);
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config("").unwrap_err();
        let ConfigError::Missing(keys) = &err else { panic!("{err}") };
        assert_eq!(keys, &["design.arms", "design.shape", "endpoint.type", "calibration.alpha", "calibration.power"]);
        assert!(err.to_string().contains("design.arms"));
    }

    #[test]
    fn out_of_range_alpha_names_the_field() {
        let text = BUNDLED.replace("alpha = 0.025", "alpha = 1.5");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { field, line: Some(_), .. } if field == "calibration.alpha"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = parse_config("[design]\narms = 3\ncolour = blue\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 3,
                key: "design.colour".into()
            }
        );
        assert!(matches!(parse_config("[design]\narms = 3\narms = 4\n"), Err(ConfigError::Duplicate { line: 3, first: 2, .. })));
        assert!(matches!(parse_config("[oops]\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("design.arms 3\n"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn custom_shapes_and_dotted_keys() {
        let text = "design.arms = 3\ndesign.shape = custom\ndesign.boundaries = inf, inf, 1\n\
                    endpoint.type = normal\nendpoint.theta_prime = 0.5\nendpoint.theta_zero = 0.1\nendpoint.sigma_sq = 4\n\
                    calibration.alpha = 0.025\ncalibration.power = 0.9\neffects.mixed = 0.2, -theta_prime, theta_zero\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.shape, BoundaryShape::Custom(vec![f64::INFINITY, f64::INFINITY, 1.0]));
        assert_eq!(c.effects["mixed"].deltas, vec![0.2, -0.5, 0.1]);

        let bad = text.replace("inf, inf, 1", "1, inf");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Invalid { field, .. }) if field == "design.boundaries"));
        let bad = text.replace("inf, inf, 1", "1, 1, inf");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Invalid { field, .. }) if field == "design.boundaries"));
    }

    #[test]
    fn endpoint_values_are_checked() {
        let text = BUNDLED.replace("rd_relevant = 0.05", "rd_relevant = 0.2");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid { field, .. }) if field == "endpoint.rd_relevant"));
        let text = BUNDLED.replace("lfc = theta_prime, theta_zero, theta_zero", "lfc = 1, 2");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid { field, .. }) if field == "effects.lfc"));
    }
}
