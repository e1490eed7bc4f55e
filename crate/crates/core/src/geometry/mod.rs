//! Collapse rate λ of a rigid body from its mass density.
//!
//! λ = γ/(3 m₀²) Σ_k ∬ G(r−r′) ∂_kϱ(r) ∂_kϱ(r′) dr dr′ with
//! G(r) = exp(−|r|²/4r_C²)/(2√π r_C)³, a normalized Gaussian of variance
//! 2r_C² per axis. The factor 1/3 is the isotropic average that reduces the
//! three-dimensional collapse noise to the single coordinate driven by the
//! cavity.

mod io;
mod voxel;

use std::f64::consts::PI;

use crate::error::{ensure_non_negative, ensure_positive, Result};
use crate::model::PhysicalConstants;

pub use io::{read_voxel_grid, write_voxel_grid, parse_voxel_grid, format_voxel_grid};
pub use voxel::{lambda_voxel_convolution, lambda_voxel_direct, VoxelGrid};

/// Kernel support is cut at this many correlation lengths in every path.
pub const KERNEL_CUTOFF_RC: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMethod {
    ClosedFormSphere,
    ClosedFormCuboid,
    VoxelDirect,
    VoxelConvolution,
}

impl LambdaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaMethod::ClosedFormSphere => "closed_form_sphere",
            LambdaMethod::ClosedFormCuboid => "closed_form_cuboid",
            LambdaMethod::VoxelDirect => "voxel_direct",
            LambdaMethod::VoxelConvolution => "voxel_convolution",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaResult {
    /// m⁻²·s⁻¹
    pub lambda_rate: f64,
    pub method: LambdaMethod,
    pub est_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MassDistribution {
    Sphere { radius: f64, mass: f64 },
    Cuboid { a: f64, b: f64, c: f64, mass: f64 },
    Voxel(VoxelGrid),
}

impl MassDistribution {
    pub fn total_mass(&self) -> f64 {
        match self {
            MassDistribution::Sphere { mass, .. } | MassDistribution::Cuboid { mass, .. } => *mass,
            MassDistribution::Voxel(g) => g.total_mass(),
        }
    }

    /// Closed forms for the analytic shapes, the direct sum for grids.
    pub fn lambda(&self, gamma_csl: f64, r_c: f64) -> Result<LambdaResult> {
        match self {
            MassDistribution::Sphere { radius, mass } => {
                lambda_sphere(*radius, *mass, gamma_csl, r_c)
            }
            MassDistribution::Cuboid { a, b, c, mass } => {
                lambda_cuboid(*a, *b, *c, *mass, gamma_csl, r_c)
            }
            MassDistribution::Voxel(g) => lambda_voxel_direct(g, gamma_csl, r_c),
        }
    }
}

fn m0() -> f64 {
    PhysicalConstants::CODATA.amu
}

/// Homogeneous sphere, large-radius closed form
/// `λ ≈ 3γm²(1−e^{−R²/r_C²}) / (8π^{3/2} m₀² r_C R⁴)`.
///
/// This form is the R ≫ r_C asymptote; it overestimates the exact integral by
/// a factor ≈ 1 + 2r_C²/R² and is off by ~6× at R = r_C. The deviation from
/// [`lambda_sphere_exact`] is reported as `est_rel_error`.
pub fn lambda_sphere(radius: f64, mass: f64, gamma_csl: f64, r_c: f64) -> Result<LambdaResult> {
    ensure_positive("radius", radius)?;
    ensure_positive("mass", mass)?;
    ensure_non_negative("gamma_csl", gamma_csl)?;
    ensure_positive("r_c", r_c)?;
    let x2 = (radius / r_c).powi(2);
    let lambda_rate = 3.0 * gamma_csl * mass * mass * (-(-x2).exp_m1())
        / (8.0 * PI.powf(1.5) * m0() * m0() * r_c * radius.powi(4));
    let exact = sphere_form_factor(radius / r_c) * point_mass_lambda(mass, gamma_csl, r_c);
    let est_rel_error = if exact > 0.0 {
        (lambda_rate / exact - 1.0).abs()
    } else {
        0.0
    };
    Ok(LambdaResult {
        lambda_rate,
        method: LambdaMethod::ClosedFormSphere,
        est_rel_error,
    })
}

/// Homogeneous sphere, exact value of the Gaussian-smeared gradient integral:
/// `λ_point · (6/x⁴)[1 − 2/x² + (1 + 2/x²)e^{−x²}]`, `x = R/r_C`.
pub fn lambda_sphere_exact(
    radius: f64,
    mass: f64,
    gamma_csl: f64,
    r_c: f64,
) -> Result<LambdaResult> {
    ensure_positive("radius", radius)?;
    ensure_positive("mass", mass)?;
    ensure_non_negative("gamma_csl", gamma_csl)?;
    ensure_positive("r_c", r_c)?;
    Ok(LambdaResult {
        lambda_rate: sphere_form_factor(radius / r_c) * point_mass_lambda(mass, gamma_csl, r_c),
        method: LambdaMethod::ClosedFormSphere,
        est_rel_error: 1e-14,
    })
}

/// λ of a point mass, `γm²/(16π^{3/2} m₀² r_C⁵)`.
fn point_mass_lambda(mass: f64, gamma_csl: f64, r_c: f64) -> f64 {
    gamma_csl * mass * mass / (16.0 * PI.powf(1.5) * m0() * m0() * r_c.powi(5))
}

/// Ratio of the sphere's λ to the point-mass value; 1 at x → 0.
fn sphere_form_factor(x: f64) -> f64 {
    let u = x * x;
    if u < 0.1 {
        1.0 - u / 2.0 + 3.0 * u * u / 20.0 - u.powi(3) / 30.0 + u.powi(4) / 168.0
            - u.powi(5) / 1120.0
            + u.powi(6) / 8640.0
    } else {
        6.0 / (u * u) * (1.0 - 2.0 / u + (1.0 + 2.0 / u) * (-u).exp())
    }
}

/// Homogeneous cuboid with edges `a × b × c`.
///
/// The gradient of a uniform box is a set of face sheets and the kernel
/// factorizes per axis, so the integral reduces to
/// `γϱ²/(3m₀²) [F(a)I(b)I(c) + F(b)I(a)I(c) + F(c)I(a)I(b)]`, with
/// `F(s) = 2(g(0) − g(s))` the face-face term along the normal and
/// `I(s) = ∬_{[0,s]²} g(u−u′) = s·erf(s/2r_C) − 4r_C²(g(0) − g(s))` the
/// in-plane overlap, `g` the 1-D marginal of the kernel.
pub fn lambda_cuboid(
    a: f64,
    b: f64,
    c: f64,
    mass: f64,
    gamma_csl: f64,
    r_c: f64,
) -> Result<LambdaResult> {
    ensure_positive("a", a)?;
    ensure_positive("b", b)?;
    ensure_positive("c", c)?;
    ensure_positive("mass", mass)?;
    ensure_non_negative("gamma_csl", gamma_csl)?;
    ensure_positive("r_c", r_c)?;
    let rho = mass / (a * b * c);
    let g0 = 1.0 / (2.0 * PI.sqrt() * r_c);
    // g(0) − g(s) without cancellation for s ≪ r_C
    let dg = |s: f64| -g0 * (-(s * s) / (4.0 * r_c * r_c)).exp_m1();
    let face = |s: f64| 2.0 * dg(s);
    let overlap = |s: f64| s * libm::erf(s / (2.0 * r_c)) - 4.0 * r_c * r_c * dg(s);
    let sum = face(a) * overlap(b) * overlap(c)
        + face(b) * overlap(a) * overlap(c)
        + face(c) * overlap(a) * overlap(b);
    Ok(LambdaResult {
        lambda_rate: gamma_csl * rho * rho * sum / (3.0 * m0() * m0()),
        method: LambdaMethod::ClosedFormCuboid,
        est_rel_error: 1e-12,
    })
}
