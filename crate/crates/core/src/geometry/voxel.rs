use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{m0, LambdaMethod, LambdaResult, KERNEL_CUTOFF_RC};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::numeric::pairwise_sum;

/// Empty layers required on every face. Gradients use one-sided stencils on
/// the outermost layer, so two empty layers make them vanish there and the
/// central differences of the inner layers capture the full boundary.
pub const MIN_PADDING_LAYERS: usize = 2;

/// Regular grid of mass densities (kg/m³), row-major with z fastest:
/// `index = (ix * ny + iy) * nz + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
    densities: Vec<f64>,
    declared_mass: Option<f64>,
}

impl VoxelGrid {
    pub fn new(
        dims: [usize; 3],
        spacing: f64,
        origin: [f64; 3],
        densities: Vec<f64>,
        declared_mass: Option<f64>,
    ) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::validation("dims", "every dimension must be >= 1"));
        }
        let n = dims[0] * dims[1] * dims[2];
        if densities.len() != n {
            return Err(Error::validation(
                "densities",
                format!("expected {n} values, got {}", densities.len()),
            ));
        }
        ensure_positive("spacing", spacing)?;
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("origin", "must be finite"));
        }
        if let Some(bad) = densities.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(
                "densities",
                format!("densities must be finite and >= 0, found {bad}"),
            ));
        }
        let grid = VoxelGrid {
            dims,
            spacing,
            origin,
            densities,
            declared_mass,
        };
        let total = grid.total_mass();
        if total <= 0.0 {
            return Err(Error::validation("densities", "total mass must be > 0"));
        }
        if let Some(m) = declared_mass {
            ensure_positive("declared_mass", m)?;
            if ((total - m) / m).abs() > 1e-12 {
                return Err(Error::validation(
                    "declared_mass",
                    format!("grid mass {total:e} kg differs from declared {m:e} kg"),
                ));
            }
        }
        Ok(grid)
    }

    /// Homogeneous sphere centred in the grid. Boundary cells get their
    /// occupied volume fraction from `subsamples³` sub-cell points; densities
    /// are then scaled so the grid mass equals `mass`.
    pub fn sphere(
        radius: f64,
        mass: f64,
        spacing: f64,
        padding_layers: usize,
        subsamples: usize,
    ) -> Result<Self> {
        ensure_positive("radius", radius)?;
        let n = (2.0 * radius / spacing).ceil() as usize + 2 * padding_layers;
        let half = 0.5 * spacing * 3f64.sqrt();
        let s = subsamples.max(1);
        Self::rasterize([n; 3], spacing, mass, |c| {
            let d = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            if d + half <= radius {
                return 1.0;
            }
            if d - half >= radius {
                return 0.0;
            }
            let mut inside = 0usize;
            for i in 0..s {
                for j in 0..s {
                    for k in 0..s {
                        let off = |t: usize| ((t as f64 + 0.5) / s as f64 - 0.5) * spacing;
                        let p = [c[0] + off(i), c[1] + off(j), c[2] + off(k)];
                        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= radius * radius {
                            inside += 1;
                        }
                    }
                }
            }
            inside as f64 / (s * s * s) as f64
        })
    }

    /// Homogeneous cuboid centred in the grid; boundary fractions are exact.
    pub fn cuboid(
        edges: [f64; 3],
        mass: f64,
        spacing: f64,
        padding_layers: usize,
    ) -> Result<Self> {
        for (name, e) in ["a", "b", "c"].iter().zip(edges) {
            ensure_positive(name, e)?;
        }
        let dims = edges.map(|e| (e / spacing).ceil() as usize + 2 * padding_layers);
        Self::rasterize(dims, spacing, mass, |c| {
            (0..3)
                .map(|k| {
                    let lo = (c[k] - 0.5 * spacing).max(-0.5 * edges[k]);
                    let hi = (c[k] + 0.5 * spacing).min(0.5 * edges[k]);
                    ((hi - lo) / spacing).max(0.0)
                })
                .product()
        })
    }

    /// Fills occupancy fractions for cell centres expressed relative to the
    /// grid centre, then normalizes to `mass`.
    fn rasterize(
        dims: [usize; 3],
        spacing: f64,
        mass: f64,
        occupancy: impl Fn([f64; 3]) -> f64 + Sync,
    ) -> Result<Self> {
        ensure_positive("mass", mass)?;
        ensure_positive("spacing", spacing)?;
        let [nx, ny, nz] = dims;
        let centre = |i: usize, n: usize| (i as f64 + 0.5 - 0.5 * n as f64) * spacing;
        let mut frac = vec![0.0; nx * ny * nz];
        frac.par_chunks_mut(ny * nz).enumerate().for_each(|(ix, plane)| {
            for iy in 0..ny {
                for iz in 0..nz {
                    plane[iy * nz + iz] =
                        occupancy([centre(ix, nx), centre(iy, ny), centre(iz, nz)]);
                }
            }
        });
        let volume = pairwise_sum(&frac) * spacing.powi(3);
        if volume <= 0.0 {
            return Err(Error::validation("spacing", "body smaller than a single cell"));
        }
        let rho = mass / volume;
        let densities: Vec<f64> = frac.iter().map(|f| f * rho).collect();
        let origin = [
            -0.5 * nx as f64 * spacing,
            -0.5 * ny as f64 * spacing,
            -0.5 * nz as f64 * spacing,
        ];
        // mass may differ from the declared value by a few ulps after scaling
        let mut grid = VoxelGrid::new(dims, spacing, origin, densities, None)?;
        grid.declared_mass = Some(mass);
        Ok(grid)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }
    pub fn declared_mass(&self) -> Option<f64> {
        self.declared_mass
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.densities) * self.spacing.powi(3)
    }

    #[inline]
    fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    pub fn density(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.densities[self.idx(ix, iy, iz)]
    }

    pub fn with_origin(&self, origin: [f64; 3]) -> VoxelGrid {
        VoxelGrid {
            origin,
            ..self.clone()
        }
    }

    /// Every density multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<VoxelGrid> {
        ensure_positive("factor", factor)?;
        Ok(VoxelGrid {
            densities: self.densities.iter().map(|d| d * factor).collect(),
            declared_mass: self.declared_mass.map(|m| m * factor),
            ..self.clone()
        })
    }

    /// Quarter turn about `axis` (0 = x, 1 = y, 2 = z).
    pub fn rotated_quarter_turn(&self, axis: usize) -> VoxelGrid {
        assert!(axis < 3, "axis must be 0, 1 or 2");
        // the two axes in the rotation plane
        let (u, v) = match axis {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        let mut dims = self.dims;
        dims.swap(u, v);
        let mut out = vec![0.0; self.densities.len()];
        for ix in 0..self.dims[0] {
            for iy in 0..self.dims[1] {
                for iz in 0..self.dims[2] {
                    let old = [ix, iy, iz];
                    // (u, v) -> (n_v - 1 - v, u)
                    let mut new = old;
                    new[u] = self.dims[v] - 1 - old[v];
                    new[v] = old[u];
                    out[(new[0] * dims[1] + new[1]) * dims[2] + new[2]] =
                        self.densities[self.idx(ix, iy, iz)];
                }
            }
        }
        VoxelGrid {
            dims,
            densities: out,
            ..self.clone()
        }
    }

    fn check_for_lambda(&self, r_c: f64) -> Result<()> {
        ensure_positive("r_c", r_c)?;
        if self.spacing > r_c / 4.0 {
            return Err(Error::Accuracy(format!(
                "voxel spacing {:e} m exceeds r_C/4 = {:e} m",
                self.spacing,
                r_c / 4.0
            )));
        }
        let p = MIN_PADDING_LAYERS;
        if self.dims.iter().any(|&n| n < 2 * p + 1) {
            return Err(Error::Padding(format!(
                "grid {:?} cannot hold {p} empty layers on every face",
                self.dims
            )));
        }
        let [nx, ny, nz] = self.dims;
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    let edge = ix < p
                        || iy < p
                        || iz < p
                        || ix >= nx - p
                        || iy >= ny - p
                        || iz >= nz - p;
                    if edge && self.density(ix, iy, iz) != 0.0 {
                        return Err(Error::Padding(format!(
                            "mass at cell ({ix}, {iy}, {iz}) lies within {p} layers of the grid boundary"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Density gradient at a cell: central differences inside, one-sided on
    /// the outermost layer.
    fn gradient(&self, c: [usize; 3]) -> [f64; 3] {
        let h = self.spacing;
        let mut g = [0.0; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let n = self.dims[k];
            if n == 1 {
                continue;
            }
            let at = |i: usize| {
                let mut p = c;
                p[k] = i;
                self.density(p[0], p[1], p[2])
            };
            let i = c[k];
            *gk = if i == 0 {
                (at(1) - at(0)) / h
            } else if i == n - 1 {
                (at(n - 1) - at(n - 2)) / h
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
        g
    }

    fn sparse_gradient(&self) -> Vec<GradEntry> {
        let [nx, ny, nz] = self.dims;
        (0..nx)
            .into_par_iter()
            .flat_map_iter(|ix| {
                let mut row = Vec::new();
                for iy in 0..ny {
                    for iz in 0..nz {
                        let g = self.gradient([ix, iy, iz]);
                        if g.iter().any(|v| *v != 0.0) {
                            row.push(GradEntry {
                                pos: [ix as i32, iy as i32, iz as i32],
                                g,
                            });
                        }
                    }
                }
                row
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct GradEntry {
    pos: [i32; 3],
    g: [f64; 3],
}

/// Sampled Gaussian kernel, factorized per axis and truncated on a sphere.
struct Kernel {
    axis: Vec<f64>,
    cut2: f64,
    norm: f64,
}

impl Kernel {
    fn new(spacing: f64, r_c: f64) -> Self {
        let cut = KERNEL_CUTOFF_RC * r_c / spacing;
        let n = cut.floor() as usize;
        let axis = (0..=n)
            .map(|i| (-((i as f64 * spacing).powi(2)) / (4.0 * r_c * r_c)).exp())
            .collect();
        Kernel {
            axis,
            cut2: cut * cut,
            norm: 1.0 / (2.0 * PI.sqrt() * r_c).powi(3),
        }
    }

    fn reach(&self) -> i32 {
        self.axis.len() as i32 - 1
    }

    /// Unnormalized kernel at an integer cell offset.
    #[inline]
    fn at(&self, d: [i32; 3]) -> f64 {
        let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
        if r2 > self.cut2 {
            return 0.0;
        }
        self.axis[d[0].unsigned_abs() as usize]
            * self.axis[d[1].unsigned_abs() as usize]
            * self.axis[d[2].unsigned_abs() as usize]
    }
}

fn prefactor(gamma_csl: f64, spacing: f64, kernel: &Kernel) -> f64 {
    gamma_csl / (3.0 * m0() * m0()) * spacing.powi(6) * kernel.norm
}

fn voxel_error_estimate(spacing: f64, r_c: f64) -> f64 {
    // leading central-difference error on a Gaussian-smoothed surface term
    (spacing / r_c).powi(2) / 3.0
}

/// Direct double sum over every pair of cells carrying a density gradient.
///
/// Cells are grouped in blocks so only pairs inside the kernel support are
/// visited; each unordered block pair is processed once. Partial sums are
/// collected per block in a fixed order, so the result does not depend on
/// the number of worker threads.
pub fn lambda_voxel_direct(grid: &VoxelGrid, gamma_csl: f64, r_c: f64) -> Result<LambdaResult> {
    ensure_non_negative("gamma_csl", gamma_csl)?;
    grid.check_for_lambda(r_c)?;
    let kernel = Kernel::new(grid.spacing, r_c);
    let entries = grid.sparse_gradient();

    let block = (kernel.reach() / 4).max(1);
    let mut blocks: BTreeMap<[i32; 3], Vec<GradEntry>> = BTreeMap::new();
    for e in &entries {
        blocks
            .entry(e.pos.map(|p| p.div_euclid(block)))
            .or_default()
            .push(*e);
    }
    let keys: Vec<[i32; 3]> = blocks.keys().copied().collect();
    let span = (kernel.reach() + block - 1) / block + 1;

    let partials: Vec<f64> = keys
        .par_iter()
        .map(|ka| {
            let a = &blocks[ka];
            let mut acc = 0.0;
            for dx in -span..=span {
                for dy in -span..=span {
                    for dz in -span..=span {
                        let kb = [ka[0] + dx, ka[1] + dy, ka[2] + dz];
                        if kb < *ka {
                            continue;
                        }
                        let gap = |d: i32| (d.abs() - 1).max(0) * block + (d != 0) as i32;
                        let g2 =
                            (gap(dx).pow(2) + gap(dy).pow(2) + gap(dz).pow(2)) as f64;
                        if g2 > kernel.cut2 {
                            continue;
                        }
                        let Some(b) = blocks.get(&kb) else { continue };
                        let weight = if kb == *ka { 1.0 } else { 2.0 };
                        acc += weight * block_pair_sum(a, b, &kernel);
                    }
                }
            }
            acc
        })
        .collect();

    let lambda_rate = prefactor(gamma_csl, grid.spacing, &kernel) * pairwise_sum(&partials);
    Ok(LambdaResult {
        lambda_rate,
        method: LambdaMethod::VoxelDirect,
        est_rel_error: voxel_error_estimate(grid.spacing, r_c),
    })
}

fn block_pair_sum(a: &[GradEntry], b: &[GradEntry], kernel: &Kernel) -> f64 {
    let mut acc = 0.0;
    for ea in a {
        for eb in b {
            let d = [
                eb.pos[0] - ea.pos[0],
                eb.pos[1] - ea.pos[1],
                eb.pos[2] - ea.pos[2],
            ];
            let w = kernel.at(d);
            if w != 0.0 {
                acc += w * (ea.g[0] * eb.g[0] + ea.g[1] * eb.g[1] + ea.g[2] * eb.g[2]);
            }
        }
    }
    acc
}

/// Same integral as [`lambda_voxel_direct`], evaluated as
/// `Σ_k ⟨∂_kϱ, G ⋆ ∂_kϱ⟩` through zero-padded FFTs. Memory grows with the
/// padded grid volume, so this path suits grids up to a few million cells.
pub fn lambda_voxel_convolution(
    grid: &VoxelGrid,
    gamma_csl: f64,
    r_c: f64,
) -> Result<LambdaResult> {
    ensure_non_negative("gamma_csl", gamma_csl)?;
    grid.check_for_lambda(r_c)?;
    let kernel = Kernel::new(grid.spacing, r_c);
    let reach = kernel.reach() as usize;
    // linear (not circular) correlation needs at least n + reach points
    let m = grid.dims.map(|n| fast_len(n + reach));
    let total = m[0] * m[1] * m[2];
    const MAX_CELLS: usize = 1 << 26;
    if total > MAX_CELLS {
        return Err(Error::validation(
            "grid",
            format!("padded FFT volume {m:?} too large for the convolution path; use the direct path"),
        ));
    }
    let mut fft = Fft3::new(m);
    let at = |x: usize, y: usize, z: usize| (x * m[1] + y) * m[2] + z;

    let mut kbuf = vec![Complex64::new(0.0, 0.0); total];
    let r = reach as i32;
    for dx in -r..=r {
        for dy in -r..=r {
            for dz in -r..=r {
                let w = kernel.at([dx, dy, dz]);
                if w != 0.0 {
                    let wrap = |d: i32, n: usize| d.rem_euclid(n as i32) as usize;
                    kbuf[at(wrap(dx, m[0]), wrap(dy, m[1]), wrap(dz, m[2]))].re = w;
                }
            }
        }
    }
    fft.forward(&mut kbuf);
    let khat: Vec<f64> = kbuf.iter().map(|c| c.re).collect();
    drop(kbuf);

    let entries = grid.sparse_gradient();
    let mut axis_sums = [0.0; 3];
    for (k, sum) in axis_sums.iter_mut().enumerate() {
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for e in &entries {
            let p = e.pos.map(|v| v as usize);
            buf[at(p[0], p[1], p[2])].re = e.g[k];
        }
        fft.forward(&mut buf);
        let terms: Vec<f64> = buf
            .iter()
            .zip(&khat)
            .map(|(c, kh)| kh * c.norm_sqr())
            .collect();
        *sum = pairwise_sum(&terms) / total as f64;
    }

    let lambda_rate =
        prefactor(gamma_csl, grid.spacing, &kernel) * (axis_sums[0] + axis_sums[1] + axis_sums[2]);
    Ok(LambdaResult {
        lambda_rate,
        method: LambdaMethod::VoxelConvolution,
        est_rel_error: voxel_error_estimate(grid.spacing, r_c),
    })
}

/// Smallest length ≥ n whose only prime factors are 2, 3 and 5.
fn fast_len(n: usize) -> usize {
    (n..)
        .find(|&v| {
            let mut x = v;
            for p in [2, 3, 5] {
                while x % p == 0 {
                    x /= p;
                }
            }
            x == 1
        })
        .expect("unbounded search")
}

/// In-place 3-D forward FFT over a row-major (z fastest) buffer.
struct Fft3 {
    dims: [usize; 3],
    plans: [std::sync::Arc<dyn rustfft::Fft<f64>>; 3],
}

impl Fft3 {
    fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let plans = dims.map(|n| planner.plan_fft_forward(n));
        Fft3 { dims, plans }
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        let [nx, ny, nz] = self.dims;
        // z lines are contiguous
        self.plans[2].process(buf);
        let mut line = vec![Complex64::new(0.0, 0.0); ny.max(nx)];
        for ix in 0..nx {
            for iz in 0..nz {
                for iy in 0..ny {
                    line[iy] = buf[(ix * ny + iy) * nz + iz];
                }
                self.plans[1].process(&mut line[..ny]);
                for iy in 0..ny {
                    buf[(ix * ny + iy) * nz + iz] = line[iy];
                }
            }
        }
        for iy in 0..ny {
            for iz in 0..nz {
                for ix in 0..nx {
                    line[ix] = buf[(ix * ny + iy) * nz + iz];
                }
                self.plans[0].process(&mut line[..nx]);
                for ix in 0..nx {
                    buf[(ix * ny + iy) * nz + iz] = line[ix];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lambda_cuboid, lambda_sphere_exact};

    const RC: f64 = 1e-7;
    const GAMMA: f64 = 1e-28;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn small_sphere() -> VoxelGrid {
        VoxelGrid::sphere(1.5 * RC, 1e-15, RC / 4.0, 3, 4).unwrap()
    }

    #[test]
    fn rasterized_mass_matches_declared() {
        let g = small_sphere();
        assert!(rel(g.total_mass(), 1e-15) < 1e-12);
        let c = VoxelGrid::cuboid([3.0 * RC, 2.0 * RC, 1.1 * RC], 2e-15, RC / 4.0, 2).unwrap();
        assert!(rel(c.total_mass(), 2e-15) < 1e-12);
    }

    #[test]
    fn declared_mass_mismatch_rejected() {
        let g = small_sphere();
        let r = VoxelGrid::new(g.dims, g.spacing, g.origin, g.densities.clone(), Some(2e-15));
        assert!(matches!(r, Err(Error::Validation { .. })));
    }

    #[test]
    fn direct_and_convolution_agree() {
        for g in [
            small_sphere(),
            VoxelGrid::cuboid([3.0 * RC, 2.0 * RC, 1.3 * RC], 2e-15, RC / 4.0, 2).unwrap(),
        ] {
            let d = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
            let c = lambda_voxel_convolution(&g, GAMMA, RC).unwrap().lambda_rate;
            assert!(rel(c, d) < 1e-10, "direct {d:e} conv {c:e}");
        }
    }

    #[test]
    fn accuracy_gate() {
        let g = VoxelGrid::sphere(2.0 * RC, 1e-15, RC / 3.0, 3, 2).unwrap();
        assert!(matches!(lambda_voxel_direct(&g, GAMMA, RC), Err(Error::Accuracy(_))));
        assert!(matches!(lambda_voxel_convolution(&g, GAMMA, RC), Err(Error::Accuracy(_))));
    }

    #[test]
    fn mass_touching_boundary_is_a_padding_error() {
        let g = VoxelGrid::cuboid([2.0 * RC; 3], 1e-15, RC / 4.0, 1).unwrap();
        assert!(matches!(lambda_voxel_direct(&g, GAMMA, RC), Err(Error::Padding(_))));
        let full = VoxelGrid::new([8, 8, 8], RC / 4.0, [0.0; 3], vec![1.0; 512], None).unwrap();
        assert!(matches!(lambda_voxel_convolution(&full, GAMMA, RC), Err(Error::Padding(_))));
    }

    #[test]
    fn zero_gamma() {
        let g = small_sphere();
        assert_eq!(lambda_voxel_direct(&g, 0.0, RC).unwrap().lambda_rate, 0.0);
        assert_eq!(lambda_voxel_convolution(&g, 0.0, RC).unwrap().lambda_rate, 0.0);
    }

    #[test]
    fn origin_is_irrelevant() {
        let g = small_sphere();
        let a = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
        let b = lambda_voxel_direct(&g.with_origin([3e-3, -1.0, 7.5e-9]), GAMMA, RC)
            .unwrap()
            .lambda_rate;
        assert_eq!(a, b);
    }

    #[test]
    fn shifting_content_inside_the_grid() {
        let g = VoxelGrid::cuboid([2.0 * RC, 1.5 * RC, RC], 1e-15, RC / 4.0, 4).unwrap();
        let [nx, ny, nz] = g.dims;
        let mut shifted = vec![0.0; g.densities.len()];
        for ix in 0..nx - 1 {
            for iy in 0..ny - 2 {
                for iz in 0..nz - 2 {
                    shifted[((ix + 1) * ny + iy + 2) * nz + iz + 2] = g.density(ix, iy, iz);
                }
            }
        }
        let s = VoxelGrid::new(g.dims, g.spacing, g.origin, shifted, None).unwrap();
        let a = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
        let b = lambda_voxel_direct(&s, GAMMA, RC).unwrap().lambda_rate;
        assert!(rel(a, b) < 1e-13);
    }

    #[test]
    fn quarter_turns_leave_lambda_unchanged() {
        let g = VoxelGrid::cuboid([3.0 * RC, 2.0 * RC, 1.2 * RC], 1e-15, RC / 4.0, 2).unwrap();
        let base = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
        for axis in 0..3 {
            let r = g.rotated_quarter_turn(axis);
            assert_ne!(r.dims, g.dims);
            assert!(rel(r.total_mass(), g.total_mass()) < 1e-14);
            let l = lambda_voxel_direct(&r, GAMMA, RC).unwrap().lambda_rate;
            assert!(rel(l, base) < 1e-12, "axis {axis}: {l:e} vs {base:e}");
        }
    }

    #[test]
    fn doubling_density_quadruples_lambda() {
        let g = small_sphere();
        let a = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
        let b = lambda_voxel_direct(&g.scaled(2.0).unwrap(), GAMMA, RC).unwrap().lambda_rate;
        assert_eq!(b, 4.0 * a);
    }

    #[test]
    fn voxel_cuboid_matches_closed_form() {
        let edges = [2.0 * RC, 1.5 * RC, RC];
        let g = VoxelGrid::cuboid(edges, 1e-15, RC / 8.0, 2).unwrap();
        let v = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
        let c = lambda_cuboid(edges[0], edges[1], edges[2], 1e-15, GAMMA, RC)
            .unwrap()
            .lambda_rate;
        assert!(rel(v, c) < 0.02, "voxel {v:e} closed {c:e}");
    }

    #[test]
    fn voxel_sphere_matches_exact_form() {
        let g = VoxelGrid::sphere(RC, 1e-15, RC / 8.0, 2, 6).unwrap();
        let v = lambda_voxel_direct(&g, GAMMA, RC).unwrap().lambda_rate;
        let e = lambda_sphere_exact(RC, 1e-15, GAMMA, RC).unwrap().lambda_rate;
        assert!(rel(v, e) < 0.02, "voxel {v:e} exact {e:e}");
    }

    #[test]
    fn fast_len_is_smooth() {
        assert_eq!(fast_len(7), 8);
        assert_eq!(fast_len(61), 64);
        assert_eq!(fast_len(77), 80);
    }
}
