//! Flat `key = value` experiment configuration with strict, line-numbered validation.

use std::collections::BTreeMap;
use std::fmt;

use euler_lab::presets::PRESETS;
use euler_lab::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum System {
    Euler2d,
    CouetteLinear,
    PassiveScalar,
    Clm,
    DeGregorio,
    Selfsim,
    LemmaCheck,
    Ipm,
}

impl System {
    pub const ALL: [System; 8] = [
        System::Euler2d,
        System::CouetteLinear,
        System::PassiveScalar,
        System::Clm,
        System::DeGregorio,
        System::Selfsim,
        System::LemmaCheck,
        System::Ipm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::Euler2d => "euler2d",
            System::CouetteLinear => "couette_linear",
            System::PassiveScalar => "passive_scalar",
            System::Clm => "clm",
            System::DeGregorio => "degregorio",
            System::Selfsim => "selfsim",
            System::LemmaCheck => "lemma_check",
            System::Ipm => "ipm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sys| sys.name() == s)
    }

    fn schema(self) -> &'static [Key] {
        use Kind::*;
        match self {
            System::Euler2d => {
                const {
                    &[
                        Key::new("nx", Int, Some("128")),
                        Key::new("ny", Int, None),
                        Key::new("cfl", Float, Some("0.4")),
                        Key::required("t_end", Float),
                        Key::new("diag_every", Int, Some("10")),
                        Key::new("casimirs", IntList, Some("2,4")),
                        Key::new("dt_max", Float, Some("inf")),
                        Key::new("init", Preset, Some("taylor_green")),
                        Key::new("markers", Int, Some("0")),
                        Key::new(
                            "interpolation",
                            Choice(&["auto", "spectral", "lagrange6", "bilinear"]),
                            Some("auto"),
                        ),
                        Key::new("snapshot", Bool, Some("true")),
                    ]
                }
            }
            System::CouetteLinear => {
                const {
                    &[
                        Key::required("t_end", Float),
                        Key::new("dt_out", Float, Some("1")),
                        Key::new("modes", Modes, Some("")),
                        Key::new("init", Preset, Some("couette")),
                        Key::new("fit_t0", Float, Some("10")),
                        Key::new("fit_t1", Float, Some("100")),
                        Key::new("twist_markers", Int, Some("0")),
                        Key::new("twist_eps", Float, Some("0")),
                        Key::new("twist_t_end", Float, None),
                        Key::new("twist_dt", Float, Some("0.01")),
                        Key::new("twist_every", Float, Some("1")),
                        Key::new("twist_ymin", Float, Some("0.5")),
                        Key::new("twist_ymax", Float, Some("5.5")),
                    ]
                }
            }
            System::PassiveScalar => {
                const {
                    &[
                        Key::new("nx", Int, Some("8")),
                        Key::new("ny", Int, Some("512")),
                        Key::new("cfl", Float, Some("0.4")),
                        Key::required("t_end", Float),
                        Key::new("sample_every", Float, Some("1")),
                        Key::new("velocity", Choice(&["shear", "uniform"]), Some("shear")),
                        Key::new("velocity_amp", Float, Some("1")),
                        Key::new("init", Preset, Some("cos_x")),
                        Key::new("ramp_halfwidth", Float, Some("1")),
                        Key::new("fit_t0", Float, Some("10")),
                        Key::new("fit_t1", Float, None),
                    ]
                }
            }
            System::Clm | System::DeGregorio => {
                const {
                    &[
                        Key::new("n", Int, Some("1024")),
                        Key::new("cfl", Float, Some("0.05")),
                        Key::required("t_end", Float),
                        Key::new("omega_cap", Float, Some("1000")),
                        Key::new("tail_tol", Float, Some("1e-8")),
                        Key::new("max_n", Int, Some("0")),
                        Key::new("init", Preset, Some("clm_cosine")),
                        Key::new("oracle_times", FloatList, Some("")),
                        Key::new("oracle_level", Float, Some("100")),
                        Key::new("rescale_taus", FloatList, Some("")),
                        Key::new("rescale_extent", Float, Some("10")),
                        Key::new("rescale_points", Int, Some("201")),
                    ]
                }
            }
            System::Selfsim => {
                const {
                    &[
                        Key::new("n", Int, Some("128")),
                        Key::new("scale", Float, Some("1")),
                        Key::new("lambda0", Float, Some("1.05")),
                        Key::new(
                            "guess",
                            Choice(&["perturbed_profile", "odd_gaussian"]),
                            Some("perturbed_profile"),
                        ),
                        Key::new("perturbation", Float, Some("0.05")),
                        Key::new("slope", Float, Some("-4")),
                        Key::new("tol", Float, Some("1e-10")),
                        Key::new("max_iters", Int, Some("30")),
                        Key::new("c_floor", Float, Some("0.5")),
                    ]
                }
            }
            System::LemmaCheck => {
                const {
                    &[
                        Key::new("u_coeffs", FloatList, Some("0,1,-1")),
                        Key::new("g_coeffs", FloatList, Some("1")),
                        Key::new("n_weight", Float, Some("8")),
                        Key::new("delta", Float, Some("0.1")),
                    ]
                }
            }
            System::Ipm => {
                const {
                    &[
                        Key::new("nx", Int, Some("128")),
                        Key::new("ny", Int, None),
                        Key::new("cfl", Float, Some("0.4")),
                        Key::required("t_end", Float),
                        Key::new("diag_every", Int, Some("10")),
                        Key::new("casimirs", IntList, Some("2,4")),
                        Key::new("dt_max", Float, Some("0.1")),
                        Key::new("tail_tol", Float, Some("1e-6")),
                        Key::new("stop_when_under_resolved", Bool, Some("true")),
                        Key::new("init", Preset, Some("heavy_over_light")),
                        Key::new("snapshot", Bool, Some("true")),
                    ]
                }
            }
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Int,
    Float,
    Bool,
    Text,
    Preset,
    IntList,
    FloatList,
    /// `kx:eta0:amp` triples separated by `;`.
    Modes,
    Choice(&'static [&'static str]),
}

#[derive(Debug)]
struct Key {
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    required: bool,
}

impl Key {
    const fn new(name: &'static str, kind: Kind, default: Option<&'static str>) -> Self {
        Self {
            name,
            kind,
            default,
            required: false,
        }
    }

    const fn required(name: &'static str, kind: Kind) -> Self {
        Self {
            name,
            kind,
            default: None,
            required: true,
        }
    }
}

const COMMON: &[Key] = &[
    Key::new("seed", Kind::Int, Some("0")),
    Key::new("output_dir", Kind::Text, Some("output")),
];

/// Validated experiment description. Values are kept as text and were type-checked
/// during parsing.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub system: System,
    pub seed: u64,
    pub output_dir: String,
    /// Effective settings (explicit values and filled-in defaults) by key.
    pub values: BTreeMap<String, String>,
    /// Parameters of the initial-condition preset given as `init.<name> = value`.
    pub init_params: BTreeMap<String, f64>,
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn check_kind(kind: Kind, value: &str) -> std::result::Result<(), String> {
    let bad = |what: &str| Err(format!("expected {what}, got `{value}`"));
    match kind {
        Kind::Int => value
            .parse::<u64>()
            .map(|_| ())
            .or_else(|_| bad("a nonnegative integer")),
        Kind::Float => value
            .parse::<f64>()
            .map(|_| ())
            .or_else(|_| bad("a number")),
        Kind::Bool => match value {
            "true" | "false" => Ok(()),
            _ => bad("true or false"),
        },
        Kind::Text => Ok(()),
        Kind::Preset => {
            if PRESETS.iter().any(|p| p.name == value) {
                Ok(())
            } else {
                bad("a preset name")
            }
        }
        Kind::IntList => split_list(value).iter().try_for_each(|v| {
            v.parse::<u32>()
                .map(|_| ())
                .or_else(|_| bad("a comma-separated list of integers"))
        }),
        Kind::FloatList => split_list(value).iter().try_for_each(|v| {
            v.parse::<f64>()
                .map(|_| ())
                .or_else(|_| bad("a comma-separated list of numbers"))
        }),
        Kind::Modes => value
            .split(';')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .try_for_each(|m| {
                let parts: Vec<&str> = m.split(':').collect();
                if parts.len() == 3 && parts.iter().all(|p| p.trim().parse::<f64>().is_ok()) {
                    Ok(())
                } else {
                    bad("`kx:eta0:amp` triples separated by `;`")
                }
            }),
        Kind::Choice(options) => {
            if options.contains(&value) {
                Ok(())
            } else {
                Err(format!(
                    "expected one of {}, got `{value}`",
                    options.join(", ")
                ))
            }
        }
    }
}

fn split_list(value: &str) -> Vec<&str> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a configuration. Lines are `key = value`; `#` starts a comment. Unknown,
/// duplicate, missing and ill-typed keys are rejected with the offending line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            config_error(line, format!("expected `key = value`, got `{content}`"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(config_error(line, "empty key"));
        }
        if let Some((_, first)) = entries.get(key) {
            return Err(config_error(
                line,
                format!("duplicate key `{key}` (first set on line {first})"),
            ));
        }
        entries.insert(key.to_string(), (value.to_string(), line));
    }
    let (system_name, system_line) = entries
        .get("system")
        .cloned()
        .ok_or_else(|| config_error(0, "missing key `system`"))?;
    let system = System::parse(&system_name).ok_or_else(|| {
        let names: Vec<&str> = System::ALL.iter().map(|s| s.name()).collect();
        config_error(
            system_line,
            format!(
                "unknown system `{system_name}` (expected one of {})",
                names.join(", ")
            ),
        )
    })?;
    let schema = system.schema();
    let find = |k: &str| COMMON.iter().chain(schema).find(|key| key.name == k);

    let init_name = entries
        .get("init")
        .map(|(v, _)| v.clone())
        .or_else(|| find("init").and_then(|k| k.default.map(str::to_string)));
    let mut init_params = BTreeMap::new();
    for (key, (value, line)) in &entries {
        if key == "system" {
            continue;
        }
        if let Some(param) = key.strip_prefix("init.") {
            let Some(preset) = init_name
                .as_deref()
                .and_then(|n| PRESETS.iter().find(|p| p.name == n))
            else {
                return Err(config_error(
                    *line,
                    format!(
                        "unknown key `{key}`: system {system} takes no initial-condition preset"
                    ),
                ));
            };
            if !preset.params.iter().any(|(p, _)| *p == param) {
                return Err(config_error(
                    *line,
                    format!(
                        "unknown key `{key}`: preset {} has no parameter `{param}`",
                        preset.name
                    ),
                ));
            }
            let v = value.parse::<f64>().map_err(|_| {
                config_error(*line, format!("`{key}`: expected a number, got `{value}`"))
            })?;
            init_params.insert(param.to_string(), v);
            continue;
        }
        let def = find(key).ok_or_else(|| {
            config_error(*line, format!("unknown key `{key}` for system {system}"))
        })?;
        check_kind(def.kind, value).map_err(|m| config_error(*line, format!("`{key}`: {m}")))?;
    }
    for key in COMMON.iter().chain(schema) {
        if key.required && !entries.contains_key(key.name) {
            return Err(config_error(
                0,
                format!("missing key `{}` for system {system}", key.name),
            ));
        }
    }
    let mut values = BTreeMap::new();
    values.insert("system".to_string(), system.name().to_string());
    for key in COMMON.iter().chain(schema) {
        if let Some((v, _)) = entries.get(key.name) {
            values.insert(key.name.to_string(), v.clone());
        } else if let Some(d) = key.default {
            values.insert(key.name.to_string(), d.to_string());
        }
    }
    for (k, v) in &init_params {
        values.insert(format!("init.{k}"), v.to_string());
    }
    let seed = values["seed"].parse().expect("validated");
    let output_dir = values["output_dir"].clone();
    Ok(ExperimentConfig {
        system,
        seed,
        output_dir,
        values,
        init_params,
    })
}

impl ExperimentConfig {
    pub fn has(&self, key: &str) -> bool {
        self.values.get(key).is_some_and(|v| !v.is_empty())
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key `{key}` is not part of the {} schema", self.system))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated number")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated integer")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.raw(key) == "true"
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        split_list(self.raw(key))
            .iter()
            .map(|v| v.parse().expect("validated list"))
            .collect()
    }

    /// `(kx, eta0, amp)` triples of a validated mode list.
    pub fn modes(&self, key: &str) -> Vec<[f64; 3]> {
        self.raw(key)
            .split(';')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| {
                let v: Vec<f64> = m
                    .split(':')
                    .map(|p| p.trim().parse().expect("validated mode"))
                    .collect();
                [v[0], v[1], v[2]]
            })
            .collect()
    }

    pub fn u32_list(&self, key: &str) -> Vec<u32> {
        split_list(self.raw(key))
            .iter()
            .map(|v| v.parse().expect("validated list"))
            .collect()
    }

    /// Effective configuration as `key = value` lines in key order.
    pub fn echo(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
