//! Physical parameters of the driven optomechanical cavity and the quantities
//! derived from them.
//!
//! All frequency-like quantities are angular (rad/s) inside this crate.
//! Conversion from ordinary frequencies happens only when a configuration is
//! ingested (see [`crate::config`]).

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::geometry;

/// Fundamental constants (CODATA 2018). Not user-editable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Atomic mass unit, kg. Reference mass of the collapse coupling.
    pub amu: f64,
    /// Speed of light, m/s.
    pub c: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: 1.054_571_817e-34,
        k_b: 1.380_649e-23,
        amu: 1.660_539_066_60e-27,
        c: 299_792_458.0,
    };
}

/// Collapse strength proposed by Ghirardi, Pearle and Rimini, m³/s.
pub const GAMMA_GRW: f64 = 1e-36;
/// Collapse strength proposed by Adler, m³/s.
pub const GAMMA_ADLER: f64 = 1e-28;
/// Standard collapse correlation length, m.
pub const R_C_DEFAULT: f64 = 1e-7;
/// Default pump wavelength (Nd:YAG), m.
pub const WAVELENGTH_DEFAULT: f64 = 1064e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorParams {
    /// kg
    pub mass: f64,
    /// rad/s
    pub omega_m: f64,
    /// Energy damping rate, rad/s.
    pub gamma_m: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

impl MirrorParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("mirror.mass", self.mass)?;
        ensure_positive("mirror.omega_m", self.omega_m)?;
        ensure_positive("mirror.gamma_m", self.gamma_m)?;
        ensure_positive("mirror.temperature", self.temperature)?;
        if self.omega_m / self.gamma_m < 1.0 {
            return Err(Error::validation(
                "mirror.gamma_m",
                format!(
                    "quality factor omega_m/gamma_m = {} < 1 (overdamped)",
                    self.omega_m / self.gamma_m
                ),
            ));
        }
        Ok(())
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// m
    pub length: f64,
    /// Field decay rate, rad/s.
    pub kappa: f64,
    /// Pump wavelength, m.
    pub wavelength: f64,
    /// Input power, W. Zero means an undriven cavity.
    pub power: f64,
    /// Cavity-pump detuning, rad/s.
    pub detuning: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("cavity.length", self.length)?;
        ensure_positive("cavity.kappa", self.kappa)?;
        ensure_positive("cavity.wavelength", self.wavelength)?;
        ensure_non_negative("cavity.power", self.power)?;
        ensure_finite("cavity.detuning", self.detuning)?;
        Ok(())
    }
}

/// Rigid homogeneous body used to evaluate the collapse rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BodyShape {
    Sphere { radius: f64 },
    Cuboid { a: f64, b: f64, c: f64 },
}

/// Where the collapse coupling comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CouplingSource {
    /// λ computed from a homogeneous body of the mirror's mass.
    Body(BodyShape),
    /// λ given directly, m⁻²·s⁻¹.
    LambdaRate(f64),
    /// Λ given directly, rad/s.
    Lambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseInput {
    /// Collapse strength γ, m³/s.
    pub gamma_csl: f64,
    /// Correlation length, m.
    pub r_c: f64,
    pub coupling: CouplingSource,
}

impl CollapseInput {
    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("collapse.gamma_csl", self.gamma_csl)?;
        ensure_positive("collapse.r_c", self.r_c)?;
        match self.coupling {
            CouplingSource::Body(BodyShape::Sphere { radius }) => {
                ensure_positive("collapse.radius", radius)
            }
            CouplingSource::Body(BodyShape::Cuboid { a, b, c }) => {
                ensure_positive("collapse.a", a)?;
                ensure_positive("collapse.b", b)?;
                ensure_positive("collapse.c", c)
            }
            CouplingSource::LambdaRate(v) => ensure_non_negative("collapse.lambda_rate", v),
            CouplingSource::Lambda(v) => ensure_non_negative("collapse.big_lambda", v),
        }
    }
}

/// Raw user inputs, before derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub mirror: MirrorParams,
    pub cavity: CavityParams,
    pub collapse: CollapseInput,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseParams {
    pub gamma_csl: f64,
    pub r_c: f64,
    /// λ, m⁻²·s⁻¹.
    pub lambda_rate: f64,
    /// Λ = λħ/(m ω_m), rad/s.
    pub big_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    /// Pump angular frequency 2πc/λ_opt, rad/s. Also used as the cavity
    /// resonance when forming χ since |Δ| is negligible next to it.
    pub omega_0: f64,
    /// Optomechanical coupling χ = ω_c/L, rad/(s·m).
    pub chi: f64,
    /// Pump coupling ℰ = sqrt(2κP/ħω_0), s⁻¹.
    pub e_pump: f64,
    /// Steady intracavity amplitude ℰ/sqrt(κ²+Δ²), real and non-negative.
    pub alpha_s: f64,
    /// β = ħ/(2 k_B T), s/rad.
    pub beta: f64,
}

/// Immutable, fully derived parameter set. Construct with [`derive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    constants: PhysicalConstants,
    raw: RawParams,
    collapse: CollapseParams,
    derived: Derived,
}

/// Validates raw inputs and computes every derived quantity.
pub fn derive(raw: &RawParams) -> Result<SystemParams> {
    raw.mirror.validate()?;
    raw.cavity.validate()?;
    raw.collapse.validate()?;
    let k = PhysicalConstants::CODATA;
    let m = raw.mirror;
    let cav = raw.cavity;

    let omega_0 = 2.0 * PI * k.c / cav.wavelength;
    let chi = omega_0 / cav.length;
    let e_pump = (2.0 * cav.kappa * cav.power / (k.hbar * omega_0)).sqrt();
    let alpha_s = e_pump / (cav.kappa * cav.kappa + cav.detuning * cav.detuning).sqrt();
    let beta = k.hbar / (2.0 * k.k_b * m.temperature);

    let c = raw.collapse;
    let lambda_rate = match c.coupling {
        CouplingSource::Body(BodyShape::Sphere { radius }) => {
            geometry::lambda_sphere(radius, m.mass, c.gamma_csl, c.r_c)?.lambda_rate
        }
        CouplingSource::Body(BodyShape::Cuboid { a, b, c: cc }) => {
            geometry::lambda_cuboid(a, b, cc, m.mass, c.gamma_csl, c.r_c)?.lambda_rate
        }
        CouplingSource::LambdaRate(v) => v,
        CouplingSource::Lambda(big) => big * m.mass * m.omega_m / k.hbar,
    };
    let big_lambda = match c.coupling {
        CouplingSource::Lambda(big) => big,
        _ => lambda_rate * k.hbar / (m.mass * m.omega_m),
    };

    Ok(SystemParams {
        constants: k,
        raw: *raw,
        collapse: CollapseParams {
            gamma_csl: c.gamma_csl,
            r_c: c.r_c,
            lambda_rate,
            big_lambda,
        },
        derived: Derived {
            omega_0,
            chi,
            e_pump,
            alpha_s,
            beta,
        },
    })
}

impl SystemParams {
    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }
    pub fn raw(&self) -> &RawParams {
        &self.raw
    }
    pub fn mirror(&self) -> &MirrorParams {
        &self.raw.mirror
    }
    pub fn cavity(&self) -> &CavityParams {
        &self.raw.cavity
    }
    pub fn collapse(&self) -> &CollapseParams {
        &self.collapse
    }
    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    /// Re-derives after editing a copy of the raw inputs.
    pub fn rederive(&self, edit: impl FnOnce(&mut RawParams)) -> Result<SystemParams> {
        let mut raw = self.raw;
        edit(&mut raw);
        derive(&raw)
    }

    /// Same parameters with the collapse contribution removed (Λ = 0).
    pub fn without_collapse(&self) -> SystemParams {
        self.with_big_lambda(0.0)
            .expect("zeroing the collapse coupling keeps inputs valid")
    }

    pub fn with_big_lambda(&self, big_lambda: f64) -> Result<SystemParams> {
        self.rederive(|r| r.collapse.coupling = CouplingSource::Lambda(big_lambda))
    }

    /// Length scale sqrt(ħ/(m ω_m)) used to make the mechanical fluctuations
    /// dimensionless.
    pub fn position_scale(&self) -> f64 {
        (self.constants.hbar / (self.mirror().mass * self.mirror().omega_m)).sqrt()
    }

    /// Hex digest of every input and derived value (bit patterns).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self.base_words().iter().chain(self.collapse_words().iter()) {
            h.update(v.to_le_bytes());
        }
        hex16(&h.finalize())
    }

    /// Digest of everything except the collapse inputs, so paired runs with
    /// and without collapse share it.
    pub fn base_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self.base_words() {
            h.update(v.to_le_bytes());
        }
        hex16(&h.finalize())
    }

    fn base_words(&self) -> Vec<u64> {
        let m = self.mirror();
        let c = self.cavity();
        let d = self.derived;
        [
            m.mass,
            m.omega_m,
            m.gamma_m,
            m.temperature,
            c.length,
            c.kappa,
            c.wavelength,
            c.power,
            c.detuning,
            d.omega_0,
            d.chi,
            d.e_pump,
            d.alpha_s,
            d.beta,
        ]
        .iter()
        .map(|v| v.to_bits())
        .collect()
    }

    fn collapse_words(&self) -> Vec<u64> {
        let c = self.collapse;
        [c.gamma_csl, c.r_c, c.lambda_rate, c.big_lambda]
            .iter()
            .map(|v| v.to_bits())
            .collect()
    }
}

fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Time-domain drift of the linearized fluctuations `(δq, δp, δx, δy)` in
/// SI units:
///
/// ```text
/// d δq = δp/m
/// d δp = -m ω_m² δq - γ_m δp + ħ χ α_s δx
/// d δx = -κ δx + Δ δy
/// d δy = -κ δy - Δ δx + 2 α_s χ δq
/// ```
pub fn drift_matrix(p: &SystemParams) -> Matrix4<f64> {
    let m = p.mirror();
    let c = p.cavity();
    let d = p.derived();
    let hbar = p.constants().hbar;
    Matrix4::new(
        0.0, 1.0 / m.mass, 0.0, 0.0,
        -m.mass * m.omega_m * m.omega_m, -m.gamma_m, hbar * d.chi * d.alpha_s, 0.0,
        0.0, 0.0, -c.kappa, c.detuning,
        2.0 * d.alpha_s * d.chi, 0.0, -c.detuning, -c.kappa,
    )
}

/// Same dynamics in the dimensionless coordinates
/// `(δq/q_s, δp/(m ω_m q_s), δx, δy)` with `q_s` = [`SystemParams::position_scale`].
/// Similar to [`drift_matrix`] (same spectrum) but well conditioned.
pub fn scaled_drift_matrix(p: &SystemParams) -> Matrix4<f64> {
    let m = p.mirror();
    let c = p.cavity();
    let d = p.derived();
    let g = d.chi * d.alpha_s * p.position_scale();
    Matrix4::new(
        0.0, m.omega_m, 0.0, 0.0,
        -m.omega_m, -m.gamma_m, g, 0.0,
        0.0, 0.0, -c.kappa, c.detuning,
        2.0 * g, 0.0, -c.detuning, -c.kappa,
    )
}

/// Diagonal factors mapping scaled coordinates back to SI.
pub fn state_scales(p: &SystemParams) -> Vector4<f64> {
    let qs = p.position_scale();
    Vector4::new(qs, p.mirror().mass * p.mirror().omega_m * qs, 1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Eigenvalues of the drift matrix, s⁻¹.
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub stable: bool,
}

impl StabilityReport {
    /// Largest eigenvalue modulus, s⁻¹.
    pub fn max_rate(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Eigenvalue test of the linearized drift; stable iff every eigenvalue has
/// strictly negative real part.
pub fn stability_check(p: &SystemParams) -> StabilityReport {
    let a = scaled_drift_matrix(p);
    let mut eigenvalues: Vec<Complex64> = a
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let max_real_part = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    StabilityReport {
        stable: max_real_part < 0.0,
        max_real_part,
        eigenvalues,
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn zero_gamma_gives_zero_lambda() {
        let mut raw = fig2a_raw(15e-12);
        raw.collapse.gamma_csl = 0.0;
        let p = derive(&raw).unwrap();
        assert_eq!(p.collapse().big_lambda, 0.0);
        assert_eq!(p.collapse().lambda_rate, 0.0);
    }

    #[test]
    fn chi_for_default_wavelength_and_25mm_cavity() {
        let p = fig2a(15e-12);
        // (2π · 299792458 / 1064e-9) / 0.025 = 7.0814e16
        let expected = 2.0 * PI * 299_792_458.0 / 1064e-9 / 0.025;
        assert!((p.derived().chi - expected).abs() / expected < 1e-15);
        assert!((p.derived().chi - 7.0814e16).abs() / 7.0814e16 < 1e-4);
    }

    #[test]
    fn pump_coupling_plug_in() {
        let p = fig2a(15e-12);
        // sqrt(2 κ P / ħ ω0) with κ = 5e7, P = 4 mW, ω0 = 2πc/1064 nm,
        // evaluated independently: 1.463735e12 s^-1
        assert!((p.derived().e_pump - 1.463735e12).abs() / 1.463735e12 < 1e-5);
        let a = p.derived().e_pump / (5e7f64.powi(2) + 2e8f64.powi(2)).sqrt();
        assert_eq!(p.derived().alpha_s, a);
    }

    #[test]
    fn derive_is_pure() {
        let raw = fig2a_raw(15e-12);
        let a = derive(&raw).unwrap();
        let b = derive(&raw).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let again = a.rederive(|_| {}).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn named_validation_errors() {
        let mut raw = fig2a_raw(15e-12);
        raw.mirror.gamma_m = 0.0;
        match derive(&raw) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "mirror.gamma_m"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let mut raw = fig2a_raw(15e-12);
        raw.mirror.gamma_m = 2.0 * raw.mirror.omega_m;
        assert!(matches!(derive(&raw), Err(Error::Validation { .. })));
        let mut raw = fig2a_raw(15e-12);
        raw.cavity.length = -1.0;
        match derive(&raw) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "cavity.length"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn alpha_s_decreases_with_detuning() {
        let raw = fig2a_raw(15e-12);
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let delta = k as f64 * 2.5e7;
            let p = derive(&RawParams {
                cavity: CavityParams {
                    detuning: -delta,
                    ..raw.cavity
                },
                ..raw
            })
            .unwrap();
            assert!(p.derived().alpha_s < last);
            last = p.derived().alpha_s;
        }
    }

    #[test]
    fn undriven_cavity_is_stable() {
        let mut raw = fig2a_raw(15e-12);
        raw.cavity.power = 0.0;
        let p = derive(&raw).unwrap();
        assert_eq!(p.derived().alpha_s, 0.0);
        let r = stability_check(&p);
        assert!(r.stable);
        // decoupled: mechanical poles -γ/2 ± i..., cavity poles -κ ± iΔ
        let gamma = raw.mirror.gamma_m;
        let mech = r.eigenvalues.iter().filter(|z| (z.re + gamma / 2.0).abs() < 1e-6 * gamma);
        assert_eq!(mech.count(), 2);
        let cav = r.eigenvalues.iter().filter(|z| (z.re + 5e7).abs() < 1.0);
        assert_eq!(cav.count(), 2);
    }

    #[test]
    fn fig2a_presets_are_stable() {
        for mass in [15e-12, 150e-12] {
            assert!(stability_check(&fig2a(mass)).stable);
        }
    }

    #[test]
    fn blue_detuned_strong_drive_is_unstable() {
        let mut raw = fig2a_raw(15e-12);
        raw.cavity.detuning = -raw.cavity.kappa;
        raw.cavity.power = 1.0;
        let r = stability_check(&derive(&raw).unwrap());
        assert!(!r.stable, "{r:?}");
    }

    #[test]
    fn scaled_and_si_drift_are_similar() {
        let p = fig2a(15e-12);
        let s = state_scales(&p);
        let si = drift_matrix(&p);
        let scaled = scaled_drift_matrix(&p);
        for i in 0..4 {
            for j in 0..4 {
                let back = scaled[(i, j)] * s[i] / s[j];
                let tol = 1e-12 * si[(i, j)].abs().max(1e-300);
                assert!((back - si[(i, j)]).abs() <= tol, "{i},{j}: {back} vs {}", si[(i, j)]);
            }
        }
    }

    #[test]
    fn paired_fingerprints_differ_only_in_collapse() {
        let p = fig2a(15e-12);
        let off = p.without_collapse();
        assert_eq!(p.base_fingerprint(), off.base_fingerprint());
        assert_ne!(p.fingerprint(), off.fingerprint());
        assert_eq!(off.collapse().big_lambda, 0.0);
    }
}
