//! `cslopt`: batch front end for csl-optomech.
//!
//! Exit codes: 0 ok, 2 validation/config error, 3 accuracy or padding gate,
//! 4 unstable parameters (or a diverged simulation), 5 tolerance failure.

mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use csl_optomech::config::{builtin_presets, gamma_by_name, load, preset_text, ConfigFile, ParamSource};
use csl_optomech::geometry::{
    lambda_cuboid, lambda_sphere, lambda_sphere_exact, lambda_voxel_convolution, lambda_voxel_direct,
    read_voxel_grid, LambdaResult, VoxelGrid,
};
use csl_optomech::langevin::{
    compare_psd, simulate, welch_psd, BurnInMode, Scheme, SimConfig, WelchConfig,
};
use csl_optomech::model::{stability_check, SystemParams, R_C_DEFAULT};
use csl_optomech::spectrum::{
    area_quadrature_config, area_ratio, output_area_ratio, spectrum_grid, sweep, GridSpec,
    NoiseModel, Observable, SpectrumKind, SweepParam,
};
use csl_optomech::{Error, Result};

use output::{write_gnuplot, write_metadata, write_text};

#[derive(Parser)]
#[command(name = "cslopt", version, about = "Collapse-model noise spectra of a driven optomechanical cavity")]
struct Cli {
    /// Cap on worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collapse coupling λ (m⁻²·s⁻¹) of a body, and Λ (rad/s) given ω_m.
    Lambda(LambdaArgs),
    /// Displacement or output-quadrature noise spectrum on a frequency grid.
    Spectrum(SpectrumArgs),
    /// Area ratio I = ∫S(Λ)dω / ∫S(0)dω.
    AreaRatio(AreaRatioArgs),
    /// Area ratio or peak value over a list of parameter values.
    Sweep(SweepArgs),
    /// Langevin simulation of the fluctuations, optionally checked against
    /// the analytic spectrum.
    Simulate(SimulateArgs),
    /// List or print the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

#[derive(Args)]
struct ParamArgs {
    /// Built-in preset name; `$CSLOPT_PRESET_DIR/<name>.toml` takes precedence.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML parameter file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a key, `section.key=value`, in the key's own unit
    /// (e.g. `cavity.power_w=2e-3`). Repeatable; an empty value removes the key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ParamArgs {
    fn source(&self) -> ParamSource {
        match (&self.preset, &self.config) {
            (Some(name), _) => ParamSource::Preset(name.clone()),
            (None, Some(path)) => ParamSource::File(path.clone()),
            (None, None) => unreachable!("clap requires one source"),
        }
    }

    fn load(&self) -> Result<ConfigFile> {
        load(&self.source(), &self.set)
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "preset": self.preset,
            "config": self.config,
            "overrides": self.set,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseModelArg {
    FullCoth,
    ClassicalMarkov,
}

impl From<NoiseModelArg> for NoiseModel {
    fn from(m: NoiseModelArg) -> Self {
        match m {
            NoiseModelArg::FullCoth => NoiseModel::FullCoth,
            NoiseModelArg::ClassicalMarkov => NoiseModel::ClassicalMarkov,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaMethodArg {
    /// Closed form (sphere or cuboid); default for shapes.
    Closed,
    /// Exact smeared-gradient integral (sphere only).
    Exact,
    /// Direct pair sum on a voxel grid; default for voxel files.
    Direct,
    /// FFT convolution on a voxel grid.
    Convolution,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("body").required(true))]
struct LambdaArgs {
    /// Homogeneous sphere: `R=<radius m> m=<mass kg>`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE", group = "body")]
    sphere: Option<Vec<String>>,
    /// Homogeneous cube: `a=<edge m> m=<mass kg>`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE", group = "body")]
    cube: Option<Vec<String>>,
    /// Homogeneous cuboid: `a=<m> b=<m> c=<m> m=<mass kg>`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE", group = "body")]
    cuboid: Option<Vec<String>>,
    /// Density grid in the `voxelgrid 1` text format (densities in kg/m³).
    #[arg(long, value_name = "FILE", group = "body")]
    voxel: Option<PathBuf>,
    /// Collapse strength: `adler`, `grw`, or a value in m³/s.
    #[arg(long, default_value = "adler")]
    gamma: String,
    /// Correlation length r_C, m.
    #[arg(long = "r-c", default_value_t = R_C_DEFAULT, value_name = "M")]
    r_c: f64,
    #[arg(long, value_enum)]
    method: Option<LambdaMethodArg>,
    /// Voxel spacing, m, when a shape is rasterized for the grid methods
    /// (default r_C/8).
    #[arg(long, value_name = "M")]
    spacing: Option<f64>,
    /// Mechanical angular frequency ω_m, rad/s; adds Λ = λħ/(mω_m) to the output.
    #[arg(long = "omega-m", value_name = "RAD_PER_S")]
    omega_m: Option<f64>,
    /// Also write the result row as CSV.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Lowest grid frequency, rad/s (default −3ω_m). With --log-symmetric:
    /// smallest |ω| (default ω_m/100).
    #[arg(long = "omega-min", value_name = "RAD_PER_S", allow_hyphen_values = true)]
    omega_min: Option<f64>,
    /// Highest grid frequency, rad/s (default 3ω_m); largest |ω| with --log-symmetric.
    #[arg(long = "omega-max", value_name = "RAD_PER_S", allow_hyphen_values = true)]
    omega_max: Option<f64>,
    /// Number of grid points (points per side with --log-symmetric).
    #[arg(long = "n-points", default_value_t = 6001)]
    n_points: usize,
    /// Log-spaced |ω| mirrored to negative frequencies.
    #[arg(long = "log-symmetric")]
    log_symmetric: bool,
    /// Add ω = 0 to a log-symmetric grid.
    #[arg(long = "include-zero", requires = "log_symmetric")]
    include_zero: bool,
}

impl GridArgs {
    fn spec(&self, omega_m: f64) -> GridSpec {
        if self.log_symmetric {
            GridSpec::LogSymmetric {
                min_abs: self.omega_min.unwrap_or(omega_m / 100.0),
                max_abs: self.omega_max.unwrap_or(3.0 * omega_m),
                n_per_side: self.n_points,
                include_zero: self.include_zero,
            }
        } else {
            GridSpec::Linear {
                min: self.omega_min.unwrap_or(-3.0 * omega_m),
                max: self.omega_max.unwrap_or(3.0 * omega_m),
                n: self.n_points,
            }
        }
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Set Λ = 0, leaving every other input unchanged.
    #[arg(long = "no-csl")]
    no_csl: bool,
    /// Output-light quadrature spectrum S_yout (shot-noise units) instead of S(ω).
    #[arg(long = "output-field")]
    output_field: bool,
    /// Thermal noise model of the displacement spectrum.
    #[arg(long = "noise-model", value_enum, default_value = "full-coth")]
    noise_model: NoiseModelArg,
    /// Evaluate even if the linearized dynamics are unstable.
    #[arg(long)]
    force: bool,
    /// CSV output (`omega_rad_per_s,value`; m²·s for S, dimensionless for
    /// S_yout); a `.meta.json` sidecar is written next to it. Default: stdout.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Also write a gnuplot script plotting the CSV (requires -o).
    #[arg(long, requires = "output")]
    gnuplot: bool,
}

#[derive(Args)]
struct AreaRatioArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Mirror mass, kg; λ is re-derived from the body for this mass.
    #[arg(long, value_name = "KG")]
    mass: Option<f64>,
    /// Set Λ = 0 (I = 1).
    #[arg(long = "no-csl")]
    no_csl: bool,
    /// Ratio of the S_yout − 1 areas instead of the displacement areas.
    #[arg(long = "output-field")]
    output_field: bool,
    #[arg(long = "noise-model", value_enum, default_value = "full-coth")]
    noise_model: NoiseModelArg,
    /// Target relative accuracy of the quadrature, dimensionless.
    #[arg(long = "rel-tol", default_value_t = 1e-9)]
    rel_tol: f64,
    /// CSV output (`I,abs_area_csl_m2,abs_area_thermal_m2,quadrature_rel_err`).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObservableArg {
    AreaRatio,
    PeakValue,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Swept input: mass_kg (kg), Lambda_rad_per_s (rad/s), gamma_csl (m³/s),
    /// detuning_over_kappa (1), detuning_rad_per_s (rad/s), temperature_k (K),
    /// power_w (W). Unit-free short names (mass, Lambda, ...) are accepted.
    /// Default: the config's [sweep] table.
    #[arg(long)]
    param: Option<String>,
    /// Comma-separated values in the parameter's unit; an empty list gives an
    /// empty table.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["start", "stop", "n"])]
    values: Option<String>,
    /// First value of an evenly spaced range, in the parameter's unit.
    #[arg(long, requires_all = ["stop", "n"], allow_hyphen_values = true)]
    start: Option<f64>,
    /// Last value of the range, in the parameter's unit.
    #[arg(long, requires_all = ["start", "n"], allow_hyphen_values = true)]
    stop: Option<f64>,
    /// Number of range values (count).
    #[arg(long, requires_all = ["start", "stop"])]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "area-ratio")]
    observable: ObservableArg,
    #[arg(long = "noise-model", value_enum, default_value = "full-coth")]
    noise_model: NoiseModelArg,
    /// Emit CSV (`param_value,Lambda_rad_per_s,area_ratio,peak_value,err`;
    /// peak_value in m²·s). Default: stdout.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Also write a gnuplot script plotting the CSV (requires -o).
    #[arg(long, requires = "output")]
    gnuplot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Heun,
    Euler,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Set Λ = 0 and switch the collapse noise off.
    #[arg(long = "no-csl")]
    no_csl: bool,
    /// Number of independent realizations (count).
    #[arg(long = "n-realizations", default_value_t = 200)]
    n_realizations: usize,
    /// Recorded duration per realization, s (default: enough samples for
    /// three half-overlapping Welch segments).
    #[arg(long, value_name = "S")]
    duration: Option<f64>,
    /// Master seed (integer); realization r, channel c draws from ChaCha8 stream (r << 3) | c.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Integration step, s (default: 0.09/max|eigenvalue|; must stay below 0.1/max|eigenvalue|).
    #[arg(long, value_name = "S")]
    dt: Option<f64>,
    /// Keep every N-th integration step, count (default: 16 samples per mechanical period).
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long, value_enum, default_value = "heun")]
    scheme: SchemeArg,
    /// Step through the burn-in instead of sampling its exact end state.
    #[arg(long = "integrate-burn-in")]
    integrate_burn_in: bool,
    /// Compare the Welch PSD of δq with the analytic classical-Markov spectrum.
    #[arg(long)]
    validate: bool,
    /// Maximum median relative deviation accepted by --validate, dimensionless.
    #[arg(long, default_value_t = 0.10)]
    tol: f64,
    /// Welch segment length, samples.
    #[arg(long = "segment-len", default_value_t = 1024)]
    segment_len: usize,
    /// Lower edge of the validation band, rad/s (default ω_m/2).
    #[arg(long = "band-lo", value_name = "RAD_PER_S")]
    band_lo: Option<f64>,
    /// Upper edge of the validation band, rad/s (default 2ω_m).
    #[arg(long = "band-hi", value_name = "RAD_PER_S")]
    band_hi: Option<f64>,
    /// Welch PSD CSV (`omega_rad_per_s,value`, m²·s) with a `.meta.json` sidecar.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Trace CSV of one realization (`t_s,dq_m,dp_kgms,dx,dy`).
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Realization written by --trace.
    #[arg(long = "trace-realization", default_value_t = 0)]
    trace_realization: usize,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Accuracy(_) | Error::Padding(_) | Error::Quadrature(_) => 3,
            Error::Unstable { .. } | Error::Divergence { .. } => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Lambda(a) => cmd_lambda(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::AreaRatio(a) => cmd_area_ratio(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Presets { action } => cmd_presets(&action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_kv(list: &[String], allowed: &[&str]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in list {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{item}`")))?;
        if !allowed.contains(&k) {
            return Err(Error::Config(format!("unknown key `{k}`; expected {allowed:?}")));
        }
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Config(format!("`{k}`: not a number: `{v}`")))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

fn need(map: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    map.get(key)
        .copied()
        .ok_or_else(|| Error::Config(format!("missing `{key}=...`")))
}

fn parse_gamma(text: &str) -> Result<f64> {
    text.parse::<f64>().or_else(|_| gamma_by_name(text))
}

enum Body {
    Sphere { radius: f64, mass: f64 },
    Cuboid { edges: [f64; 3], mass: f64 },
    Grid(VoxelGrid),
}

fn cmd_lambda(a: &LambdaArgs) -> CmdResult {
    let gamma = parse_gamma(&a.gamma)?;
    let body = if let Some(kv) = &a.sphere {
        let kv = parse_kv(kv, &["R", "m"])?;
        Body::Sphere {
            radius: need(&kv, "R")?,
            mass: need(&kv, "m")?,
        }
    } else if let Some(kv) = &a.cube {
        let kv = parse_kv(kv, &["a", "m"])?;
        let e = need(&kv, "a")?;
        Body::Cuboid {
            edges: [e; 3],
            mass: need(&kv, "m")?,
        }
    } else if let Some(kv) = &a.cuboid {
        let kv = parse_kv(kv, &["a", "b", "c", "m"])?;
        Body::Cuboid {
            edges: [need(&kv, "a")?, need(&kv, "b")?, need(&kv, "c")?],
            mass: need(&kv, "m")?,
        }
    } else if let Some(path) = &a.voxel {
        Body::Grid(read_voxel_grid(path)?)
    } else {
        unreachable!("clap requires a body")
    };

    let spacing = a.spacing.unwrap_or(a.r_c / 8.0);
    let raster = |body: &Body| -> Result<VoxelGrid> {
        match body {
            Body::Sphere { radius, mass } => VoxelGrid::sphere(*radius, *mass, spacing, 2, 4),
            Body::Cuboid { edges, mass } => VoxelGrid::cuboid(*edges, *mass, spacing, 2),
            Body::Grid(g) => Ok(g.clone()),
        }
    };
    let mass = match &body {
        Body::Sphere { mass, .. } | Body::Cuboid { mass, .. } => *mass,
        Body::Grid(g) => g.total_mass(),
    };
    let method = a.method.unwrap_or(match body {
        Body::Grid(_) => LambdaMethodArg::Direct,
        _ => LambdaMethodArg::Closed,
    });
    let result: LambdaResult = match (method, &body) {
        (LambdaMethodArg::Closed, Body::Sphere { radius, mass }) => {
            lambda_sphere(*radius, *mass, gamma, a.r_c)?
        }
        (LambdaMethodArg::Closed, Body::Cuboid { edges, mass }) => {
            lambda_cuboid(edges[0], edges[1], edges[2], *mass, gamma, a.r_c)?
        }
        (LambdaMethodArg::Exact, Body::Sphere { radius, mass }) => {
            lambda_sphere_exact(*radius, *mass, gamma, a.r_c)?
        }
        (LambdaMethodArg::Closed | LambdaMethodArg::Exact, _) => {
            return Err(Error::Config(
                "closed-form methods need --sphere/--cube/--cuboid (exact: sphere only)".into(),
            )
            .into())
        }
        (LambdaMethodArg::Direct, b) => lambda_voxel_direct(&raster(b)?, gamma, a.r_c)?,
        (LambdaMethodArg::Convolution, b) => lambda_voxel_convolution(&raster(b)?, gamma, a.r_c)?,
    };

    let hbar = csl_optomech::model::PhysicalConstants::CODATA.hbar;
    let big_lambda = a.omega_m.map(|w| result.lambda_rate * hbar / (mass * w));
    let csv = format!(
        "method,mass_kg,lambda_per_m2_s,est_rel_error,Lambda_rad_per_s\n{},{:e},{:e},{:e},{}\n",
        result.method.as_str(),
        mass,
        result.lambda_rate,
        result.est_rel_error,
        big_lambda.map(|v| format!("{v:e}")).unwrap_or_default()
    );
    print!("{csv}");
    if let Some(path) = &a.output {
        write_text(path, &csv)?;
    }
    Ok(())
}

fn params_with_csl(params: &ParamArgs, no_csl: bool) -> Result<SystemParams> {
    let p = params.load()?.to_params()?;
    Ok(if no_csl { p.without_collapse() } else { p })
}

fn params_metadata(p: &SystemParams) -> serde_json::Value {
    json!({
        "params_fingerprint": p.fingerprint(),
        "base_fingerprint": p.base_fingerprint(),
        "raw": p.raw(),
        "Lambda_rad_per_s": p.collapse().big_lambda,
        "lambda_per_m2_s": p.collapse().lambda_rate,
        "alpha_s": p.derived().alpha_s,
    })
}

fn cmd_spectrum(a: &SpectrumArgs) -> CmdResult {
    let p = params_with_csl(&a.params, a.no_csl)?;
    let report = stability_check(&p);
    if !report.stable {
        if a.force {
            eprintln!(
                "warning: unstable parameters (max real part {:e} s^-1); evaluating anyway",
                report.max_real_part
            );
        } else {
            return Err(Error::Unstable {
                max_real_part: report.max_real_part,
            }
            .into());
        }
    }
    let kind = if a.output_field {
        SpectrumKind::OutputQuadrature
    } else {
        match a.noise_model {
            NoiseModelArg::FullCoth => SpectrumKind::DisplacementFull,
            NoiseModelArg::ClassicalMarkov => SpectrumKind::DisplacementClassicalMarkov,
        }
    };
    let grid = a.grid.spec(p.mirror().omega_m);
    let s = spectrum_grid(&p, &grid, kind)?;
    match &a.output {
        None => print!("{}", s.to_csv()),
        Some(path) => {
            s.write_csv(path)?;
            let mut meta = params_metadata(&p);
            meta["command"] = json!("spectrum");
            meta["source"] = a.params.describe();
            meta["kind"] = json!(kind.as_str());
            meta["no_csl"] = json!(a.no_csl);
            meta["forced"] = json!(a.force && !report.stable);
            meta["grid"] = json!(grid);
            write_metadata(path, &meta)?;
            if a.gnuplot {
                let ylabel = if a.output_field { "S_yout (shot-noise units)" } else { "S (m^2 s)" };
                write_gnuplot(path, "omega (rad/s)", ylabel, 2, !a.output_field)?;
            }
        }
    }
    Ok(())
}

fn cmd_area_ratio(a: &AreaRatioArgs) -> CmdResult {
    let mut p = params_with_csl(&a.params, false)?;
    if let Some(m) = a.mass {
        p = SweepParam::MassKg.apply(&p, m)?;
    }
    if a.no_csl {
        p = p.without_collapse();
    }
    let mut cfg = area_quadrature_config();
    cfg.rel_tol = a.rel_tol;
    let r = if a.output_field {
        output_area_ratio(&p, &cfg)?
    } else {
        area_ratio(&p, a.noise_model.into(), &cfg)?
    };
    let csv = format!(
        "I,abs_area_csl_m2,abs_area_thermal_m2,quadrature_rel_err\n{:e},{:e},{:e},{:e}\n",
        r.i, r.abs_area_csl, r.abs_area_thermal, r.quadrature_rel_err
    );
    print!("{csv}");
    if let Some(path) = &a.output {
        write_text(path, &csv)?;
        let mut meta = params_metadata(&p);
        meta["command"] = json!("area-ratio");
        meta["source"] = a.params.describe();
        meta["output_field"] = json!(a.output_field);
        meta["noise_model"] = json!(NoiseModel::from(a.noise_model).as_str());
        meta["result"] = json!(r);
        write_metadata(path, &meta)?;
    }
    Ok(())
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("--values: not a number: `{s}`")))
        })
        .collect()
}

fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    let cfg = a.params.load()?;
    let p = cfg.to_params()?;
    let explicit = match (&a.values, a.start, a.stop, a.n) {
        (Some(v), ..) => Some(parse_values(v)?),
        (None, Some(lo), Some(hi), Some(n)) => Some(csl_optomech::config::linspace(lo, hi, n)),
        _ => None,
    };
    let default = cfg.sweep.as_ref().map(|s| s.resolve()).transpose()?;
    let param = match (&a.param, &default) {
        (Some(name), _) => SweepParam::parse(name)?,
        (None, Some((param, _))) => *param,
        (None, None) => {
            return Err(Error::Config("no --param given and the config has no [sweep] table".into()).into())
        }
    };
    let values = match (explicit, default) {
        (Some(v), _) => v,
        (None, Some((default_param, v))) if default_param == param => v,
        _ => {
            return Err(Error::Config(format!(
                "no values for `{}`: give --values or --start/--stop/--n",
                param.as_str()
            ))
            .into())
        }
    };
    let observable = match a.observable {
        ObservableArg::AreaRatio => Observable::AreaRatio,
        ObservableArg::PeakValue => Observable::PeakValue,
    };
    let table = sweep(
        &p,
        param,
        &values,
        observable,
        a.noise_model.into(),
        &area_quadrature_config(),
    );
    for row in table.rows.iter().filter(|r| r.err.is_some()) {
        eprintln!(
            "warning: {} = {:e}: {}",
            param.as_str(),
            row.param_value,
            row.err.as_deref().unwrap_or_default()
        );
    }
    match &a.output {
        None => print!("{}", table.to_csv()),
        Some(path) => {
            table.write_csv(path)?;
            let mut meta = params_metadata(&p);
            meta["command"] = json!("sweep");
            meta["source"] = a.params.describe();
            meta["param"] = json!(param.as_str());
            meta["noise_model"] = json!(NoiseModel::from(a.noise_model).as_str());
            write_metadata(path, &meta)?;
            if a.gnuplot {
                let col = match observable {
                    Observable::AreaRatio => 3,
                    Observable::PeakValue => 4,
                };
                write_gnuplot(path, param.as_str(), "observable", col, false)?;
            }
        }
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let p = params_with_csl(&a.params, a.no_csl)?;
    let mut cfg = SimConfig::for_params(&p, 0.0, a.n_realizations, a.seed);
    if let Some(dt) = a.dt {
        let period = 2.0 * std::f64::consts::PI / p.mirror().omega_m;
        cfg.dt = dt;
        cfg.thin = ((period / 16.0) / dt).round().max(1.0) as usize;
    }
    if let Some(thin) = a.thin {
        cfg.thin = thin;
    }
    cfg.scheme = match a.scheme {
        SchemeArg::Heun => Scheme::StochasticHeun,
        SchemeArg::Euler => Scheme::EulerMaruyama,
    };
    if a.integrate_burn_in {
        cfg.burn_in_mode = BurnInMode::Integrate;
    }
    cfg.noise.csl = !a.no_csl;
    cfg.duration = a
        .duration
        .unwrap_or((2 * a.segment_len - 1) as f64 * cfg.sample_interval());
    let ens = simulate(&p, &cfg)?;

    let (mean, se) = csl_optomech::numeric::mean_and_standard_error(&ens.dq_mean_squares());
    eprintln!(
        "{} realizations x {} samples, dt = {:e} s: <dq^2> = {mean:e} ± {se:e} m^2",
        ens.traces.len(),
        cfg.n_samples(),
        cfg.dt
    );
    if let Some(path) = &a.trace {
        ens.write_trace_csv(a.trace_realization, 1, path)?;
    }

    let need_psd = a.validate || a.output.is_some();
    let mut report = None;
    if need_psd {
        let welch = WelchConfig {
            segment_len: a.segment_len,
            overlap: 0.5,
        };
        let measured = welch_psd(&ens, &welch)?;
        if a.validate {
            let analytic = spectrum_grid(
                &p,
                &GridSpec::Explicit(measured.omegas.clone()),
                SpectrumKind::DisplacementClassicalMarkov,
            )?;
            let wm = p.mirror().omega_m;
            let band = (a.band_lo.unwrap_or(0.5 * wm), a.band_hi.unwrap_or(2.0 * wm));
            let r = compare_psd(&measured, &analytic, band, a.tol)?;
            eprintln!(
                "validation over [{:e}, {:e}] rad/s ({} bins): median rel dev {:.4}, max {:.4}, tol {} -> {}",
                band.0,
                band.1,
                r.n_points,
                r.median_rel_dev,
                r.max_rel_dev,
                a.tol,
                if r.pass { "pass" } else { "FAIL" }
            );
            report = Some(r);
        }
        if let Some(path) = &a.output {
            measured.write_csv(path)?;
            let mut meta = params_metadata(&p);
            meta["command"] = json!("simulate");
            meta["source"] = a.params.describe();
            meta["no_csl"] = json!(a.no_csl);
            meta["sim_config"] = json!(cfg);
            meta["config_fingerprint"] = json!(ens.config_fingerprint);
            meta["seed"] = json!(ens.seed);
            meta["stream_layout"] = json!(ens.stream_layout);
            meta["mean_dq2_m2"] = json!([mean, se]);
            meta["validation"] = json!(report);
            write_metadata(path, &meta)?;
        }
    }
    match report {
        Some(r) if !r.pass => Err(Failure {
            code: 5,
            message: format!(
                "median relative deviation {:.4} exceeds tolerance {}",
                r.median_rel_dev, a.tol
            ),
        }),
        _ => Ok(()),
    }
}

fn cmd_presets(action: &PresetAction) -> CmdResult {
    match action {
        PresetAction::List => {
            for p in builtin_presets() {
                let desc = ConfigFile::parse(p.text)
                    .ok()
                    .and_then(|c| c.description)
                    .unwrap_or_default();
                println!("{:<16} {desc}", p.name);
            }
        }
        PresetAction::Show { name } => print!("{}", preset_text(name)?),
    }
    Ok(())
}
