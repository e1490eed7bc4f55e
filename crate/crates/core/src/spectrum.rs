//! Frequency-domain observables: the displacement noise spectrum, its
//! on-resonance limit, the output-quadrature spectrum, and the area ratio
//! used to quantify the collapse contribution.
//!
//! Convention: `S(ω)` is two-sided and even, with `∫ S dω/2π = ⟨δq²⟩`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stability_check, SystemParams};
use crate::quadrature::{integrate_half_line, QuadratureConfig};

/// How the thermal bath enters the numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Quantum bath, `γ_m ω coth(βω)`, with the collapse term `|ω|Λ`.
    FullCoth,
    /// White-noise limit used by the time-domain simulator: thermal term
    /// `2γ_m k_B T/ħ` and collapse term `ω_m Λ` (force spectrum `ħ²λ`).
    ClassicalMarkov,
}

impl NoiseModel {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseModel::FullCoth => "full_coth",
            NoiseModel::ClassicalMarkov => "classical_markov",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    DisplacementFull,
    DisplacementClassicalMarkov,
    OutputQuadrature,
}

impl SpectrumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumKind::DisplacementFull => "displacement_full",
            SpectrumKind::DisplacementClassicalMarkov => "displacement_classical_markov",
            SpectrumKind::OutputQuadrature => "output_quadrature",
        }
    }
}

/// `ω·coth(βω)`, even in ω and finite at ω = 0.
pub fn omega_coth(omega: f64, beta: f64) -> f64 {
    let x = beta * omega;
    if x.abs() < 1e-4 {
        let x2 = x * x;
        (1.0 + x2 / 3.0 - x2 * x2 / 45.0) / beta
    } else if x.abs() > 40.0 {
        omega.abs()
    } else {
        omega / x.tanh()
    }
}

/// Parameter combinations reused at every frequency.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    hbar: f64,
    mass: f64,
    omega_m: f64,
    gamma_m: f64,
    kappa: f64,
    delta: f64,
    beta: f64,
    thermal_white: f64,
    big_lambda: f64,
    /// 2 α_s² ħ² κ χ²
    rp_numerator: f64,
    /// 2 α_s² Δ ħ χ²
    spring: f64,
    /// α_s² χ²
    a2chi2: f64,
}

impl Coefficients {
    fn new(p: &SystemParams) -> Self {
        let k = p.constants();
        let m = p.mirror();
        let c = p.cavity();
        let d = p.derived();
        let a2chi2 = d.alpha_s * d.alpha_s * d.chi * d.chi;
        Coefficients {
            hbar: k.hbar,
            mass: m.mass,
            omega_m: m.omega_m,
            gamma_m: m.gamma_m,
            kappa: c.kappa,
            delta: c.detuning,
            beta: d.beta,
            thermal_white: 2.0 * m.gamma_m * k.k_b * m.temperature / k.hbar,
            big_lambda: p.collapse().big_lambda,
            rp_numerator: 2.0 * a2chi2 * k.hbar * k.hbar * c.kappa,
            spring: 2.0 * a2chi2 * c.detuning * k.hbar,
            a2chi2,
        }
    }

    fn bath(&self, omega: f64, model: NoiseModel) -> f64 {
        match model {
            NoiseModel::FullCoth => {
                self.gamma_m * omega_coth(omega, self.beta) + omega.abs() * self.big_lambda
            }
            NoiseModel::ClassicalMarkov => self.thermal_white + self.omega_m * self.big_lambda,
        }
    }

    fn displacement(&self, omega: f64, model: NoiseModel) -> Result<f64> {
        if !omega.is_finite() {
            return Err(Error::Spectrum {
                omega,
                reason: "frequency must be finite".into(),
            });
        }
        let (k, d, w) = (self.kappa, self.delta, omega);
        let w2 = w * w;
        let cav_mod2 = (d * d + k * k - w2).powi(2) + 4.0 * k * k * w2;
        let numerator = self.rp_numerator * (d * d + k * k + w2)
            + self.hbar * self.mass * cav_mod2 * self.bath(w, model);

        // (ω−ω_m)(ω+ω_m) keeps precision on the narrow mechanical resonance
        let mech = Complex64::new((w - self.omega_m) * (w + self.omega_m), -self.gamma_m * w);
        let cav = Complex64::new(d * d + k * k - w2, 2.0 * k * w);
        let den = (Complex64::new(self.spring, 0.0) + self.mass * mech * cav).norm_sqr();
        if den == 0.0 || !den.is_finite() || !numerator.is_finite() {
            return Err(Error::Spectrum {
                omega,
                reason: format!("denominator {den:e} (parameters on an instability?)"),
            });
        }
        Ok(numerator / den)
    }

    /// Output-quadrature transfer factor `8κ α_s²χ²(κ²+ω²)/|Δ²+(κ−iω)²|²`.
    fn output_transfer(&self, omega: f64) -> f64 {
        let (k, d, w) = (self.kappa, self.delta, omega);
        let c = Complex64::new(d * d + k * k - w * w, -2.0 * k * w);
        8.0 * k * self.a2chi2 * (k * k + w * w) / c.norm_sqr()
    }
}

/// Displacement noise spectrum `S(ω)` in m²·s.
pub fn dns_point(p: &SystemParams, omega: f64, model: NoiseModel) -> Result<f64> {
    Coefficients::new(p).displacement(omega, model)
}

/// On-resonance, zero-temperature, uncoupled value `ħ(γ_m+Λ)/(m ω_m γ_m²)`.
pub fn dns_peak_limit(p: &SystemParams) -> f64 {
    let m = p.mirror();
    p.constants().hbar * (m.gamma_m + p.collapse().big_lambda)
        / (m.mass * m.omega_m * m.gamma_m * m.gamma_m)
}

/// Output y-quadrature spectrum, shot-noise normalized:
/// `1 + 8κ α_s²χ²(κ²+ω²)/|Δ²+(κ−iω)²|² · S(ω)`.
///
/// Only the displacement-imprinted term is kept; cross terms between shot
/// noise and radiation-pressure back-action are not included.
pub fn dns_output(p: &SystemParams, omega: f64) -> Result<f64> {
    let c = Coefficients::new(p);
    Ok(1.0 + c.output_transfer(omega) * c.displacement(omega, NoiseModel::FullCoth)?)
}

fn ensure_stable(p: &SystemParams) -> Result<()> {
    let r = stability_check(p);
    if r.stable {
        Ok(())
    } else {
        Err(Error::Unstable {
            max_real_part: r.max_real_part,
        })
    }
}

/// Breakpoints `c ± w·4^k` around every drift pole `(−w ± ic)` and around
/// `ω_m` and `sqrt(Δ²+κ²)`, with the mapped tail starting well past them.
fn feature_breakpoints(p: &SystemParams) -> Vec<f64> {
    let m = p.mirror();
    let c = p.cavity();
    let mut features: Vec<(f64, f64)> = stability_check(p)
        .eigenvalues
        .iter()
        .filter(|z| z.im >= 0.0)
        .map(|z| (z.im, z.re.abs()))
        .collect();
    features.push((m.omega_m, 0.5 * m.gamma_m));
    features.push(((c.detuning.powi(2) + c.kappa.powi(2)).sqrt(), c.kappa));

    let mut pts = Vec::new();
    let mut far: f64 = 0.0;
    for (centre, width) in features {
        let width = width.max(1e-12 * centre.max(1.0));
        pts.push(centre);
        let mut s = width;
        for _ in 0..16 {
            pts.push(centre + s);
            if centre - s > 0.0 {
                pts.push(centre - s);
            }
            s *= 4.0;
            if s > 4.0 * centre.max(width) {
                break;
            }
        }
        far = far.max(centre + s);
    }
    pts.push(4.0 * far);
    pts.retain(|v| v.is_finite() && *v > 0.0);
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaRatioResult {
    #[serde(rename = "I")]
    pub i: f64,
    /// `∫ S dω` with collapse, m².
    pub abs_area_csl: f64,
    /// Same integral at Λ = 0, m².
    pub abs_area_thermal: f64,
    pub quadrature_rel_err: f64,
}

/// Target accuracy of a reported area ratio.
pub const AREA_RATIO_TARGET_REL_ERR: f64 = 1e-6;

/// Default quadrature settings for area ratios.
pub fn area_quadrature_config() -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-9,
        abs_tol: 0.0,
        max_intervals: 20_000,
    }
}

/// Integrates two spectra on shared panels over (−∞, ∞) and returns the
/// ratio of the first to the second.
fn area_pair(
    p: &SystemParams,
    cfg: &QuadratureConfig,
    f: impl Fn(f64) -> Result<[f64; 2]>,
) -> Result<AreaRatioResult> {
    let r = integrate_half_line(f, &feature_breakpoints(p), cfg)?;
    let err = r.rel_error(0).hypot(r.rel_error(1));
    if err > AREA_RATIO_TARGET_REL_ERR {
        return Err(Error::Quadrature(format!(
            "relative error {err:e} above target {AREA_RATIO_TARGET_REL_ERR:e}"
        )));
    }
    let (with, without) = (2.0 * r.value[0], 2.0 * r.value[1]);
    Ok(AreaRatioResult {
        i: with / without,
        abs_area_csl: with,
        abs_area_thermal: without,
        quadrature_rel_err: err,
    })
}

/// `I = ∫S dω / ∫S_{Λ=0} dω`. Both integrals share every panel, so Λ = 0
/// gives exactly 1.
pub fn area_ratio(
    p: &SystemParams,
    model: NoiseModel,
    cfg: &QuadratureConfig,
) -> Result<AreaRatioResult> {
    ensure_stable(p)?;
    let on = Coefficients::new(p);
    let off = Coefficients::new(&p.without_collapse());
    area_pair(p, cfg, |w| {
        Ok([on.displacement(w, model)?, off.displacement(w, model)?])
    })
}

/// Same ratio for the excess output spectrum `S_yout − 1`.
pub fn output_area_ratio(p: &SystemParams, cfg: &QuadratureConfig) -> Result<AreaRatioResult> {
    ensure_stable(p)?;
    let on = Coefficients::new(p);
    let off = Coefficients::new(&p.without_collapse());
    area_pair(p, cfg, |w| {
        let t = on.output_transfer(w);
        Ok([
            t * on.displacement(w, NoiseModel::FullCoth)?,
            t * off.displacement(w, NoiseModel::FullCoth)?,
        ])
    })
}

/// Frequency grid description, rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// `n` equally spaced points from `min` to `max` inclusive.
    Linear { min: f64, max: f64, n: usize },
    /// `n_per_side` log-spaced magnitudes in `[min_abs, max_abs]`, mirrored
    /// to negative frequencies, optionally with ω = 0 in the middle.
    LogSymmetric {
        min_abs: f64,
        max_abs: f64,
        n_per_side: usize,
        include_zero: bool,
    },
    Explicit(Vec<f64>),
}

impl GridSpec {
    pub fn omegas(&self) -> Result<Vec<f64>> {
        let bad = |r: &str| Error::validation("grid", r);
        let w = match self {
            GridSpec::Linear { min, max, n } => {
                if *n < 2 || !(min.is_finite() && max.is_finite()) || max <= min {
                    return Err(bad("linear grid needs n >= 2 and finite min < max"));
                }
                let step = (max - min) / (*n - 1) as f64;
                (0..*n)
                    .map(|i| if i == n - 1 { *max } else { min + i as f64 * step })
                    .collect()
            }
            GridSpec::LogSymmetric {
                min_abs,
                max_abs,
                n_per_side,
                include_zero,
            } => {
                if *n_per_side < 1 || !(*min_abs > 0.0) || !max_abs.is_finite() || max_abs < min_abs {
                    return Err(bad("log grid needs n_per_side >= 1 and 0 < min_abs <= max_abs"));
                }
                let n = *n_per_side;
                let (l0, l1) = (min_abs.ln(), max_abs.ln());
                let side: Vec<f64> = (0..n)
                    .map(|i| {
                        if n == 1 {
                            *min_abs
                        } else {
                            (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
                        }
                    })
                    .collect();
                let mut w: Vec<f64> = side.iter().rev().map(|v| -v).collect();
                if *include_zero {
                    w.push(0.0);
                }
                w.extend(side);
                w
            }
            GridSpec::Explicit(v) => v.clone(),
        };
        if w.is_empty() {
            return Err(bad("grid is empty"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(bad("grid values must be finite"));
        }
        if w.windows(2).any(|p| p[1] <= p[0]) {
            return Err(bad("grid must be strictly increasing"));
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub params_fingerprint: String,
}

/// Evaluates the requested spectrum at every grid point.
pub fn spectrum_grid(p: &SystemParams, grid: &GridSpec, kind: SpectrumKind) -> Result<Spectrum> {
    let omegas = grid.omegas()?;
    let c = Coefficients::new(p);
    let values = omegas
        .par_iter()
        .map(|&w| match kind {
            SpectrumKind::DisplacementFull => c.displacement(w, NoiseModel::FullCoth),
            SpectrumKind::DisplacementClassicalMarkov => {
                c.displacement(w, NoiseModel::ClassicalMarkov)
            }
            SpectrumKind::OutputQuadrature => {
                Ok(1.0 + c.output_transfer(w) * c.displacement(w, NoiseModel::FullCoth)?)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Spectrum {
        omegas,
        values,
        kind,
        params_fingerprint: p.fingerprint(),
    })
}

impl Spectrum {
    /// Index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega_rad_per_s,value\n");
        for (w, v) in self.omegas.iter().zip(&self.values) {
            let _ = writeln!(s, "{w:e},{v:e}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Location and height of the global maximum of `S(ω)` over ω ≥ 0, from a
/// golden-section search around each resonance.
pub fn peak_value(p: &SystemParams, model: NoiseModel) -> Result<(f64, f64)> {
    let c = Coefficients::new(p);
    let f = |w: f64| c.displacement(w, model);
    let mut best = (0.0, f(0.0)?);
    for z in stability_check(p).eigenvalues.iter().filter(|z| z.im > 0.0) {
        let width = z.re.abs().max(1e-12 * z.im);
        let mut lo = (z.im - 8.0 * width).max(0.0);
        let hi = z.im + 8.0 * width;
        // keep the bracket off the removable point at the origin
        if lo == 0.0 {
            lo = 1e-9 * hi;
        }
        let (w, v) = golden_max(&f, lo, hi, 200)?;
        if v > best.1 {
            best = (w, v);
        }
    }
    Ok(best)
}

fn golden_max(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..iters {
        if (b - a) <= 1e-15 * b.abs() {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Raw inputs a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    MassKg,
    /// Λ in rad/s, set directly.
    LambdaRadPerS,
    GammaCsl,
    DetuningOverKappa,
    DetuningRadPerS,
    TemperatureK,
    PowerW,
}

impl SweepParam {
    pub const ALL: [SweepParam; 7] = [
        SweepParam::MassKg,
        SweepParam::LambdaRadPerS,
        SweepParam::GammaCsl,
        SweepParam::DetuningOverKappa,
        SweepParam::DetuningRadPerS,
        SweepParam::TemperatureK,
        SweepParam::PowerW,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::MassKg => "mass_kg",
            SweepParam::LambdaRadPerS => "Lambda_rad_per_s",
            SweepParam::GammaCsl => "gamma_csl",
            SweepParam::DetuningOverKappa => "detuning_over_kappa",
            SweepParam::DetuningRadPerS => "detuning_rad_per_s",
            SweepParam::TemperatureK => "temperature_k",
            SweepParam::PowerW => "power_w",
        }
    }

    /// Name without the unit suffix (`Lambda`, `mass`, ...), matched
    /// case-sensitively so `Lambda` is never confused with λ.
    pub fn short_name(self) -> &'static str {
        match self {
            SweepParam::MassKg => "mass",
            SweepParam::LambdaRadPerS => "Lambda",
            SweepParam::GammaCsl => "gamma",
            SweepParam::DetuningOverKappa => "detuning_over_kappa",
            SweepParam::DetuningRadPerS => "detuning",
            SweepParam::TemperatureK => "temperature",
            SweepParam::PowerW => "power",
        }
    }

    pub fn parse(name: &str) -> Result<SweepParam> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(name) || p.short_name() == name)
            .ok_or_else(|| {
                let names: Vec<&str> = SweepParam::ALL.iter().map(|p| p.as_str()).collect();
                Error::validation("sweep.param", format!("unknown `{name}`; expected one of {names:?}"))
            })
    }

    /// Parameters with this input set to `value`. Sweeping the mass keeps a
    /// body-derived λ consistent with the new mass.
    pub fn apply(self, p: &SystemParams, value: f64) -> Result<SystemParams> {
        use crate::model::CouplingSource;
        p.rederive(|r| match self {
            SweepParam::MassKg => r.mirror.mass = value,
            SweepParam::LambdaRadPerS => r.collapse.coupling = CouplingSource::Lambda(value),
            SweepParam::GammaCsl => r.collapse.gamma_csl = value,
            SweepParam::DetuningOverKappa => r.cavity.detuning = value * r.cavity.kappa,
            SweepParam::DetuningRadPerS => r.cavity.detuning = value,
            SweepParam::TemperatureK => r.mirror.temperature = value,
            SweepParam::PowerW => r.cavity.power = value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    AreaRatio,
    PeakValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub big_lambda: f64,
    pub area_ratio: Option<f64>,
    pub peak_value: Option<f64>,
    pub err: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub observable: Observable,
    pub rows: Vec<SweepRow>,
}

/// One row per value; a failing row records its error instead of aborting.
pub fn sweep(
    p: &SystemParams,
    param: SweepParam,
    values: &[f64],
    observable: Observable,
    model: NoiseModel,
    cfg: &QuadratureConfig,
) -> SweepTable {
    let rows = values
        .par_iter()
        .map(|&v| {
            let mut row = SweepRow {
                param_value: v,
                big_lambda: f64::NAN,
                area_ratio: None,
                peak_value: None,
                err: None,
            };
            let result = param.apply(p, v).and_then(|q| {
                row.big_lambda = q.collapse().big_lambda;
                match observable {
                    Observable::AreaRatio => {
                        row.area_ratio = Some(area_ratio(&q, model, cfg)?.i);
                    }
                    Observable::PeakValue => {
                        ensure_stable(&q)?;
                        row.peak_value = Some(peak_value(&q, model)?.1);
                    }
                }
                Ok(())
            });
            if let Err(e) = result {
                row.err = Some(e.to_string());
            }
            row
        })
        .collect();
    SweepTable {
        param,
        observable,
        rows,
    }
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("param_value,Lambda_rad_per_s,area_ratio,peak_value,err\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            let err = r
                .err
                .as_deref()
                .map(|e| format!("\"{}\"", e.replace('"', "'")))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{:e},{:e},{},{},{}",
                r.param_value,
                r.big_lambda,
                opt(r.area_ratio),
                opt(r.peak_value),
                err
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::{fig2a, fig2a_raw};
    use crate::model::{derive, CouplingSource};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn uncoupled(big_lambda: f64, temperature: f64) -> SystemParams {
        let mut raw = fig2a_raw(15e-12);
        raw.cavity.power = 0.0;
        raw.mirror.temperature = temperature;
        raw.collapse.coupling = CouplingSource::Lambda(big_lambda);
        derive(&raw).unwrap()
    }

    #[test]
    fn omega_coth_branches_are_continuous() {
        let beta = 2.0;
        for x in [1e-4, 40.0] {
            let w = x / beta;
            let below = omega_coth(w * (1.0 - 1e-12), beta);
            let above = omega_coth(w * (1.0 + 1e-12), beta);
            assert!(rel(below, above) < 1e-11, "x={x}: {below} {above}");
        }
        assert_eq!(omega_coth(0.0, beta), 1.0 / beta);
        assert_eq!(omega_coth(-3.0, beta), omega_coth(3.0, beta));
    }

    #[test]
    fn uncoupled_resonance_value() {
        let p = uncoupled(0.0, 1e-3);
        let m = p.mirror();
        let b = p.derived().beta;
        let expected = p.constants().hbar / ((b * m.omega_m).tanh() * m.mass * m.gamma_m * m.omega_m);
        let s = dns_point(&p, m.omega_m, NoiseModel::FullCoth).unwrap();
        assert!(rel(s, expected) < 1e-12);
    }

    #[test]
    fn peak_limit_matches_cold_uncoupled_resonance() {
        for lam in [0.0, 3.0, 1e3] {
            let p = uncoupled(lam, 1e-9);
            let s = dns_point(&p, p.mirror().omega_m, NoiseModel::FullCoth).unwrap();
            assert!(rel(s, dns_peak_limit(&p)) < 1e-9);
        }
        let p = uncoupled(0.0, 1.0);
        let m = p.mirror();
        assert!(rel(dns_peak_limit(&p), p.constants().hbar / (m.mass * m.omega_m * m.gamma_m)) < 1e-15);
    }

    #[test]
    fn even_in_frequency() {
        let p = fig2a(15e-12);
        for w in [0.3, 1e3, 1.7e6, 1.7230e6, 2e8, 1e10] {
            for model in [NoiseModel::FullCoth, NoiseModel::ClassicalMarkov] {
                let a = dns_point(&p, w, model).unwrap();
                let b = dns_point(&p, -w, model).unwrap();
                assert!(rel(a, b) < 1e-12);
            }
            assert!(rel(dns_output(&p, w).unwrap(), dns_output(&p, -w).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn zero_frequency_is_finite() {
        let p = fig2a(15e-12);
        let s = dns_point(&p, 0.0, NoiseModel::FullCoth).unwrap();
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn non_finite_frequency_rejected() {
        let p = fig2a(15e-12);
        assert!(matches!(
            dns_point(&p, f64::NAN, NoiseModel::FullCoth),
            Err(Error::Spectrum { .. })
        ));
    }

    #[test]
    fn noise_models_agree_near_resonance_when_hot() {
        // k_B T / ħ ω_m ≈ 76 at 1 mK
        let p = fig2a(15e-12);
        let w = p.mirror().omega_m;
        let a = dns_point(&p, w, NoiseModel::FullCoth).unwrap();
        let b = dns_point(&p, w, NoiseModel::ClassicalMarkov).unwrap();
        assert!(rel(a, b) < 0.01);
    }

    #[test]
    fn undriven_output_is_shot_noise() {
        let p = uncoupled(10.0, 1e-3);
        for w in [0.0, 1e5, 1.7e6, 1e9] {
            assert_eq!(dns_output(&p, w).unwrap(), 1.0);
        }
    }

    #[test]
    fn area_ratio_without_collapse_is_one() {
        let p = fig2a(15e-12).without_collapse();
        let r = area_ratio(&p, NoiseModel::FullCoth, &area_quadrature_config()).unwrap();
        assert_eq!(r.i, 1.0);
    }

    #[test]
    fn area_ratio_cold_uncoupled() {
        let gamma = fig2a(15e-12).mirror().gamma_m;
        let p = uncoupled(gamma, 1e-9);
        let r = area_ratio(&p, NoiseModel::FullCoth, &area_quadrature_config()).unwrap();
        assert!((r.i - 2.0).abs() < 1e-6, "{}", r.i);
    }

    #[test]
    fn classical_area_is_the_variance() {
        // uncoupled classical oscillator: ∫S dω/2π = k_B T/(m ω_m²)
        let p = uncoupled(0.0, 1e-3);
        let r = area_ratio(&p, NoiseModel::ClassicalMarkov, &area_quadrature_config()).unwrap();
        let m = p.mirror();
        let var = p.constants().k_b * m.temperature / (m.mass * m.omega_m * m.omega_m);
        assert!(rel(r.abs_area_thermal / (2.0 * std::f64::consts::PI), var) < 1e-7);
    }

    #[test]
    fn fig2a_area_ratio_in_expected_range() {
        let p = fig2a(15e-12);
        let r = area_ratio(&p, NoiseModel::ClassicalMarkov, &area_quadrature_config()).unwrap();
        // white-noise reading: 1 + Λ ω_m ħ /(2 γ_m k_B T) on the mechanical line
        assert!(r.i > 25.0 && r.i < 35.0, "{}", r.i);
        assert!(r.quadrature_rel_err < 1e-6);
    }

    #[test]
    fn unstable_area_ratio_is_refused() {
        let mut raw = fig2a_raw(15e-12);
        raw.cavity.detuning = -raw.cavity.kappa;
        raw.cavity.power = 1.0;
        let p = derive(&raw).unwrap();
        assert!(matches!(
            area_ratio(&p, NoiseModel::FullCoth, &area_quadrature_config()),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn grids_validate() {
        assert!(GridSpec::Explicit(vec![1.0, 1.0]).omegas().is_err());
        assert!(GridSpec::Explicit(vec![]).omegas().is_err());
        assert!(GridSpec::Linear { min: 1.0, max: 0.0, n: 3 }.omegas().is_err());
        let w = GridSpec::LogSymmetric {
            min_abs: 1.0,
            max_abs: 100.0,
            n_per_side: 3,
            include_zero: true,
        }
        .omegas()
        .unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w[3], 0.0);
        assert!(rel(w[6], 100.0) < 1e-15 && rel(-w[0], 100.0) < 1e-15);
    }

    #[test]
    fn grid_matches_pointwise_bit_exactly() {
        let p = fig2a(15e-12);
        let grid = GridSpec::Linear { min: -2e6, max: 2e6, n: 1001 };
        for kind in [
            SpectrumKind::DisplacementFull,
            SpectrumKind::DisplacementClassicalMarkov,
            SpectrumKind::OutputQuadrature,
        ] {
            let s = spectrum_grid(&p, &grid, kind).unwrap();
            for (w, v) in s.omegas.iter().zip(&s.values) {
                let direct = match kind {
                    SpectrumKind::DisplacementFull => dns_point(&p, *w, NoiseModel::FullCoth),
                    SpectrumKind::DisplacementClassicalMarkov => {
                        dns_point(&p, *w, NoiseModel::ClassicalMarkov)
                    }
                    SpectrumKind::OutputQuadrature => dns_output(&p, *w),
                }
                .unwrap();
                assert_eq!(v.to_bits(), direct.to_bits());
            }
        }
    }

    #[test]
    fn three_point_symmetric_grid() {
        let p = fig2a(15e-12);
        let s = spectrum_grid(&p, &GridSpec::Explicit(vec![-1.72e6, 0.0, 1.72e6]), SpectrumKind::DisplacementFull)
            .unwrap();
        assert!(rel(s.values[0], s.values[2]) < 1e-12);
        assert!(s.values[1].is_finite());
    }

    #[test]
    fn peak_sits_on_the_shifted_mechanical_line() {
        let p = fig2a(15e-12);
        let (w, v) = peak_value(&p, NoiseModel::FullCoth).unwrap();
        assert!(rel(w, 1.72303e6) < 1e-5, "{w}");
        let off = peak_value(&p.without_collapse(), NoiseModel::FullCoth).unwrap();
        assert!(v > off.1);
        assert!((w - off.0).abs() < 1e-3 * p.mirror().gamma_m.max(1.0) + 1.0);
    }

    #[test]
    fn sweep_rows_and_errors() {
        let p = fig2a(15e-12);
        let cfg = area_quadrature_config();
        let empty = sweep(&p, SweepParam::MassKg, &[], Observable::AreaRatio, NoiseModel::FullCoth, &cfg);
        assert!(empty.rows.is_empty());
        assert_eq!(empty.to_csv(), "param_value,Lambda_rad_per_s,area_ratio,peak_value,err\n");
        let t = sweep(
            &p,
            SweepParam::MassKg,
            &[15e-12, -1.0, 30e-12],
            Observable::AreaRatio,
            NoiseModel::FullCoth,
            &cfg,
        );
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows[1].err.is_some() && t.rows[1].area_ratio.is_none());
        assert!(t.rows[2].area_ratio.unwrap() > t.rows[0].area_ratio.unwrap());
        assert!(t.rows[2].big_lambda > t.rows[0].big_lambda);
    }

    #[test]
    fn sweep_param_names_round_trip() {
        for p in SweepParam::ALL {
            assert_eq!(SweepParam::parse(p.as_str()).unwrap(), p);
        }
        assert!(SweepParam::parse("colour").is_err());
        assert_eq!(SweepParam::parse("Lambda").unwrap(), SweepParam::LambdaRadPerS);
        assert_eq!(SweepParam::parse("mass").unwrap(), SweepParam::MassKg);
        assert!(SweepParam::parse("lambda").is_err());
    }
}
