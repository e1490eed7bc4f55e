//! TOML parameter files and the shipped presets.
//!
//! Every numeric key carries its unit in the name. Frequencies may be given
//! either as angular frequencies (`*_rad_per_s`) or ordinary ones (`*_hz`,
//! multiplied by 2π on ingestion); exactly one spelling per quantity.
//!
//! ```toml
//! [mirror]
//! mass_kg = 15e-12
//! omega_m_hz = 2.75e5          # or omega_m_rad_per_s
//! quality_factor = 1e5         # or gamma_m_rad_per_s / gamma_m_hz
//! temperature_k = 1e-3
//!
//! [cavity]
//! length_m = 0.025
//! kappa_rad_per_s = 5e7        # or kappa_hz
//! wavelength_m = 1064e-9       # optional, default 1064 nm
//! power_w = 4e-3
//! detuning_over_kappa = 4.0    # or detuning_rad_per_s / detuning_hz
//!
//! [collapse]
//! gamma = "adler"              # "adler", "grw", or gamma_m3_per_s = ...
//! r_c_m = 1e-7                 # optional, default 1e-7
//! shape = "cube"               # "cube" (edge_m), "cuboid" (a_m, b_m, c_m), "sphere" (radius_m)
//! edge_m = 1e-6
//! # alternatively: lambda_per_m2_s = ... or big_lambda_rad_per_s = ...
//!
//! [sweep]                      # optional default sweep
//! param = "mass_kg"
//! start = 15e-12
//! stop = 150e-12
//! n = 10
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    derive, BodyShape, CavityParams, CollapseInput, CouplingSource, MirrorParams, RawParams,
    SystemParams, GAMMA_ADLER, GAMMA_GRW, R_C_DEFAULT, WAVELENGTH_DEFAULT,
};
use crate::spectrum::SweepParam;

/// Environment variable naming an extra directory searched for `<name>.toml`
/// before the built-in presets.
pub const PRESET_DIR_ENV: &str = "CSLOPT_PRESET_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub provenance: Option<String>,
    pub mirror: MirrorConfig,
    pub cavity: CavityConfig,
    pub collapse: CollapseConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorConfig {
    pub mass_kg: f64,
    pub omega_m_hz: Option<f64>,
    pub omega_m_rad_per_s: Option<f64>,
    pub quality_factor: Option<f64>,
    pub gamma_m_hz: Option<f64>,
    pub gamma_m_rad_per_s: Option<f64>,
    pub temperature_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub length_m: f64,
    pub kappa_hz: Option<f64>,
    pub kappa_rad_per_s: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub power_w: f64,
    pub detuning_over_kappa: Option<f64>,
    pub detuning_hz: Option<f64>,
    pub detuning_rad_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseConfig {
    pub gamma: Option<String>,
    pub gamma_m3_per_s: Option<f64>,
    pub r_c_m: Option<f64>,
    pub shape: Option<String>,
    pub edge_m: Option<f64>,
    pub a_m: Option<f64>,
    pub b_m: Option<f64>,
    pub c_m: Option<f64>,
    pub radius_m: Option<f64>,
    pub lambda_per_m2_s: Option<f64>,
    pub big_lambda_rad_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub n: Option<usize>,
}

impl SweepConfig {
    pub fn resolve(&self) -> Result<(SweepParam, Vec<f64>)> {
        let param = SweepParam::parse(&self.param)?;
        let values = match (&self.values, self.start, self.stop, self.n) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => linspace(a, b, n),
            _ => {
                return Err(Error::Config(
                    "sweep needs either `values` or all of `start`, `stop`, `n`".into(),
                ))
            }
        };
        Ok((param, values))
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// Picks the single provided spelling of a quantity.
fn one_of(name: &str, options: &[(&str, Option<f64>, f64)]) -> Result<f64> {
    let given: Vec<_> = options.iter().filter(|(_, v, _)| v.is_some()).collect();
    match given.as_slice() {
        [(_, Some(v), factor)] => Ok(v * factor),
        [] => {
            let keys: Vec<&str> = options.iter().map(|(k, _, _)| *k).collect();
            Err(Error::Config(format!("{name}: one of {keys:?} is required")))
        }
        many => {
            let keys: Vec<&str> = many.iter().map(|(k, _, _)| *k).collect();
            Err(Error::Config(format!("{name}: conflicting keys {keys:?}")))
        }
    }
}

/// Collapse strength by model name, `adler` or `grw`, m³/s.
pub fn gamma_by_name(name: &str) -> Result<f64> {
    match name.to_ascii_lowercase().as_str() {
        "adler" => Ok(GAMMA_ADLER),
        "grw" => Ok(GAMMA_GRW),
        other => Err(Error::Config(format!(
            "collapse.gamma: unknown name `{other}` (expected \"adler\" or \"grw\")"
        ))),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_raw(&self) -> Result<RawParams> {
        let m = &self.mirror;
        let omega_m = one_of(
            "mirror.omega_m",
            &[
                ("omega_m_hz", m.omega_m_hz, 2.0 * PI),
                ("omega_m_rad_per_s", m.omega_m_rad_per_s, 1.0),
            ],
        )?;
        let gamma_m = one_of(
            "mirror.gamma_m",
            &[
                ("quality_factor", m.quality_factor.map(|q| 1.0 / q), omega_m),
                ("gamma_m_hz", m.gamma_m_hz, 2.0 * PI),
                ("gamma_m_rad_per_s", m.gamma_m_rad_per_s, 1.0),
            ],
        )?;
        let c = &self.cavity;
        let kappa = one_of(
            "cavity.kappa",
            &[
                ("kappa_hz", c.kappa_hz, 2.0 * PI),
                ("kappa_rad_per_s", c.kappa_rad_per_s, 1.0),
            ],
        )?;
        let detuning = one_of(
            "cavity.detuning",
            &[
                ("detuning_over_kappa", c.detuning_over_kappa, kappa),
                ("detuning_hz", c.detuning_hz, 2.0 * PI),
                ("detuning_rad_per_s", c.detuning_rad_per_s, 1.0),
            ],
        )?;

        let k = &self.collapse;
        let gamma_csl = match (&k.gamma, k.gamma_m3_per_s) {
            (Some(name), None) => gamma_by_name(name)?,
            (None, Some(v)) => v,
            (None, None) => {
                return Err(Error::Config(
                    "collapse: one of `gamma` or `gamma_m3_per_s` is required".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "collapse: `gamma` and `gamma_m3_per_s` conflict".into(),
                ))
            }
        };
        let coupling = self.coupling()?;
        Ok(RawParams {
            mirror: MirrorParams {
                mass: m.mass_kg,
                omega_m,
                gamma_m,
                temperature: m.temperature_k,
            },
            cavity: CavityParams {
                length: c.length_m,
                kappa,
                wavelength: c.wavelength_m.unwrap_or(WAVELENGTH_DEFAULT),
                power: c.power_w,
                detuning,
            },
            collapse: CollapseInput {
                gamma_csl,
                r_c: k.r_c_m.unwrap_or(R_C_DEFAULT),
                coupling,
            },
        })
    }

    fn coupling(&self) -> Result<CouplingSource> {
        let k = &self.collapse;
        let mut sources = Vec::new();
        if let Some(shape) = &k.shape {
            let need = |key: &str, v: Option<f64>| {
                v.ok_or_else(|| Error::Config(format!("collapse.shape = \"{shape}\" needs `{key}`")))
            };
            let body = match shape.as_str() {
                "sphere" => BodyShape::Sphere {
                    radius: need("radius_m", k.radius_m)?,
                },
                "cube" => {
                    let e = need("edge_m", k.edge_m)?;
                    BodyShape::Cuboid { a: e, b: e, c: e }
                }
                "cuboid" => BodyShape::Cuboid {
                    a: need("a_m", k.a_m)?,
                    b: need("b_m", k.b_m)?,
                    c: need("c_m", k.c_m)?,
                },
                other => {
                    return Err(Error::Config(format!(
                        "collapse.shape: unknown `{other}` (expected sphere, cube, cuboid)"
                    )))
                }
            };
            sources.push(CouplingSource::Body(body));
        }
        if let Some(v) = k.lambda_per_m2_s {
            sources.push(CouplingSource::LambdaRate(v));
        }
        if let Some(v) = k.big_lambda_rad_per_s {
            sources.push(CouplingSource::Lambda(v));
        }
        match sources.as_slice() {
            [one] => Ok(*one),
            [] => Err(Error::Config(
                "collapse: give `shape`, `lambda_per_m2_s` or `big_lambda_rad_per_s`".into(),
            )),
            _ => Err(Error::Config(
                "collapse: `shape`, `lambda_per_m2_s` and `big_lambda_rad_per_s` are mutually exclusive".into(),
            )),
        }
    }

    pub fn to_params(&self) -> Result<SystemParams> {
        derive(&self.to_raw()?)
    }
}

/// Applies `section.key=value` overrides to a TOML document. Values are parsed
/// as TOML (`1e-3`, `"grw"`, `[1, 2]`); `section.key=` removes the key, which
/// allows switching between alternative spellings.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for o in overrides {
        let (path, value) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` must look like section.key=value")))?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        let (last, parents) = keys.split_last().expect("split yields at least one item");
        let mut table = &mut doc;
        for k in parents {
            table = table
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{o}`: `{k}` is not a table")))?;
        }
        let value = value.trim();
        if value.is_empty() {
            table.remove(*last);
            continue;
        }
        let parsed: toml::Table = format!("v = {value}")
            .parse()
            .or_else(|_| format!("v = \"{value}\"").parse())
            .map_err(|e: toml::de::Error| Error::Config(format!("override `{o}`: {e}")))?;
        table.insert(last.to_string(), parsed["v"].clone());
    }
    toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

const BUILTIN: &[Preset] = &[
    Preset {
        name: "fig2a_15ng",
        text: include_str!("../presets/fig2a_15ng.toml"),
    },
    Preset {
        name: "fig2a_150ng",
        text: include_str!("../presets/fig2a_150ng.toml"),
    },
    Preset {
        name: "fig2a_15ng_alt",
        text: include_str!("../presets/fig2a_15ng_alt.toml"),
    },
    Preset {
        name: "fig2b",
        text: include_str!("../presets/fig2b.toml"),
    },
    Preset {
        name: "grw",
        text: include_str!("../presets/grw.toml"),
    },
    Preset {
        name: "adler",
        text: include_str!("../presets/adler.toml"),
    },
];

pub fn builtin_presets() -> &'static [Preset] {
    BUILTIN
}

/// Preset text by name: `$CSLOPT_PRESET_DIR/<name>.toml` if present, else the
/// built-in copy.
pub fn preset_text(name: &str) -> Result<String> {
    if let Some(dir) = std::env::var_os(PRESET_DIR_ENV) {
        let path = PathBuf::from(dir).join(format!("{name}.toml"));
        if path.is_file() {
            return Ok(std::fs::read_to_string(path)?);
        }
    }
    BUILTIN
        .iter()
        .find(|p| p.name == name)
        .map(|p| p.text.to_string())
        .ok_or_else(|| {
            let names: Vec<&str> = BUILTIN.iter().map(|p| p.name).collect();
            Error::Config(format!("unknown preset `{name}`; available: {names:?}"))
        })
}

/// Where parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSource {
    Preset(String),
    File(PathBuf),
}

/// Loads, overrides and parses a parameter source.
pub fn load(source: &ParamSource, overrides: &[String]) -> Result<ConfigFile> {
    let text = match source {
        ParamSource::Preset(name) => preset_text(name)?,
        ParamSource::File(path) => read(path)?,
    };
    let text = if overrides.is_empty() {
        text
    } else {
        apply_overrides(&text, overrides)?
    };
    ConfigFile::parse(&text)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Parameters of a built-in preset.
pub fn preset_params(name: &str) -> Result<SystemParams> {
    load(&ParamSource::Preset(name.to_string()), &[])?.to_params()
}
