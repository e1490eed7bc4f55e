//! Time-domain Monte-Carlo of the linearized fluctuations with thermal,
//! collapse and cavity-input white noises.
//!
//! Integration runs in the dimensionless coordinates of
//! [`scaled_drift_matrix`]; traces are stored in SI units.
//!
//! The input-field noises are unit-intensity real white noises on both
//! quadratures. This is a classical-equivalent model: it reproduces the
//! symmetrized spectrum, not operator ordering effects.

mod welch;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix4, SMatrix, SVector, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::model::{scaled_drift_matrix, stability_check, state_scales, SystemParams};

pub use welch::{compare_psd, welch_psd, ComparisonReport, WelchConfig};

/// Largest allowed `dt · max|eigenvalue|`.
pub const DT_GATE: f64 = 0.1;
/// Burn-in must cover at least this many mechanical damping times `1/γ_m`.
pub const BURN_IN_DAMPING_TIMES: f64 = 5.0;
/// Any scaled state component beyond this aborts the realization.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Noise channel indices; each (realization, channel) pair has its own stream.
pub const CHANNEL_THERMAL: u64 = 0;
pub const CHANNEL_CSL: u64 = 1;
pub const CHANNEL_X_IN: u64 = 2;
pub const CHANNEL_Y_IN: u64 = 3;
/// Stream used to sample the state at the end of an exact burn-in.
pub const CHANNEL_BURN_IN: u64 = 4;

/// Fluctuation state in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationState {
    /// m
    pub dq: f64,
    /// kg·m/s
    pub dp: f64,
    pub dx: f64,
    pub dy: f64,
}

impl FluctuationState {
    fn to_array(self) -> [f64; 4] {
        [self.dq, self.dp, self.dx, self.dy]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    StochasticHeun,
}

/// How the initial transient is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnInMode {
    /// Sample the state after `burn_in` seconds from the exact Gaussian
    /// transition of the linear SDE.
    Exact,
    /// Step through the burn-in with the chosen scheme (costly at high Q).
    Integrate,
}

/// Which noise sources are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSwitches {
    pub thermal: bool,
    pub csl: bool,
    pub input: bool,
}

impl NoiseSwitches {
    pub const ALL: NoiseSwitches = NoiseSwitches {
        thermal: true,
        csl: true,
        input: true,
    };
    pub const NONE: NoiseSwitches = NoiseSwitches {
        thermal: false,
        csl: false,
        input: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Recorded duration after burn-in, s.
    pub duration: f64,
    pub n_realizations: usize,
    pub seed: u64,
    /// s
    pub burn_in: f64,
    pub scheme: Scheme,
    pub burn_in_mode: BurnInMode,
    /// Keep every `thin`-th step.
    pub thin: usize,
    pub noise: NoiseSwitches,
    /// Deterministic start. When set, the burn-in may be shorter than the
    /// stationarity gate so transients can be studied.
    pub initial_state: Option<FluctuationState>,
}

impl SimConfig {
    /// Settings sized for the given parameters: `dt` at 90% of the gate,
    /// 16 samples per mechanical period, the minimum stationary burn-in.
    pub fn for_params(p: &SystemParams, duration: f64, n_realizations: usize, seed: u64) -> Self {
        let rate = stability_check(p).max_rate();
        let dt = 0.9 * DT_GATE / rate;
        let period = 2.0 * std::f64::consts::PI / p.mirror().omega_m;
        let thin = ((period / 16.0) / dt).round().max(1.0) as usize;
        SimConfig {
            dt,
            duration,
            n_realizations,
            seed,
            burn_in: BURN_IN_DAMPING_TIMES / p.mirror().gamma_m,
            scheme: Scheme::StochasticHeun,
            burn_in_mode: BurnInMode::Exact,
            thin,
            noise: NoiseSwitches::ALL,
            initial_state: None,
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.dt * self.thin as f64
    }

    /// Number of recorded samples per realization (the first is t = 0).
    pub fn n_samples(&self) -> usize {
        (self.duration / self.sample_interval()).floor() as usize + 1
    }

    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        ensure_positive("sim.dt", self.dt)?;
        ensure_non_negative("sim.duration", self.duration)?;
        ensure_non_negative("sim.burn_in", self.burn_in)?;
        if self.n_realizations == 0 {
            return Err(Error::validation("sim.n_realizations", "must be >= 1"));
        }
        if self.thin == 0 {
            return Err(Error::validation("sim.thin", "must be >= 1"));
        }
        let report = stability_check(p);
        if !report.stable {
            return Err(Error::Unstable {
                max_real_part: report.max_real_part,
            });
        }
        let product = self.dt * report.max_rate();
        if product >= DT_GATE {
            return Err(Error::validation(
                "sim.dt",
                format!(
                    "dt * max|eigenvalue| = {product:.3} must be < {DT_GATE} (dt <= {:e} s)",
                    DT_GATE / report.max_rate()
                ),
            ));
        }
        let min_burn = BURN_IN_DAMPING_TIMES / p.mirror().gamma_m;
        if self.initial_state.is_none() && self.burn_in < min_burn {
            return Err(Error::validation(
                "sim.burn_in",
                format!("must be >= 5/gamma_m = {min_burn:e} s"),
            ));
        }
        if self.burn_in_mode == BurnInMode::Integrate {
            let steps = self.burn_in / self.dt;
            if steps > 1e8 {
                return Err(Error::validation(
                    "sim.burn_in_mode",
                    format!("integrated burn-in needs {steps:e} steps; use the exact mode"),
                ));
            }
        }
        Ok(())
    }

    /// Digest of every setting together with the parameter fingerprint.
    pub fn fingerprint(&self, p: &SystemParams) -> String {
        let mut h = Sha256::new();
        h.update(p.fingerprint().as_bytes());
        h.update(format!("{self:?}").as_bytes());
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Scaled drift matrix and per-channel noise amplitudes
/// `[thermal → δp, collapse → δp, input → δx, input → δy]`.
///
/// SI forms: thermal force `sqrt(2 m γ_m k_B T)`, collapse force `ħ sqrt(λ)`,
/// input `sqrt(2κ)` on each quadrature.
pub fn drift_and_noise(p: &SystemParams) -> (Matrix4<f64>, [f64; 4]) {
    let k = p.constants();
    let m = p.mirror();
    let kappa = p.cavity().kappa;
    let thermal = (2.0 * m.gamma_m * k.k_b * m.temperature / (k.hbar * m.omega_m)).sqrt();
    let csl = p.collapse().big_lambda.sqrt();
    let input = (2.0 * kappa).sqrt();
    (scaled_drift_matrix(p), [thermal, csl, input, input])
}

/// One realization: samples in SI, row `i` at time `i · sample_interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub realization: usize,
    pub samples: Vec<FluctuationState>,
}

impl Trace {
    pub fn dq(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.dq).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEnsemble {
    pub traces: Vec<Trace>,
    pub sample_interval: f64,
    pub seed: u64,
    /// Stream id of channel `c` in realization `r` is `(r << 3) | c`.
    pub stream_layout: &'static str,
    pub config_fingerprint: String,
    pub params_fingerprint: String,
}

fn stream_id(realization: usize, channel: u64) -> u64 {
    ((realization as u64) << 3) | channel
}

fn rng_for(seed: u64, realization: usize, channel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(realization, channel));
    rng
}

/// Stationary covariance `Σ` solving `AΣ + ΣAᵀ + D = 0`.
fn lyapunov(a: &Matrix4<f64>, d: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let mut k = SMatrix::<f64, 16, 16>::zeros();
    // vec(AΣ + ΣAᵀ) = (I⊗A + A⊗I) vec(Σ), column-major
    for i in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                k[(i + 4 * j, l + 4 * j)] += a[(i, l)];
                k[(i + 4 * j, i + 4 * l)] += a[(j, l)];
            }
        }
    }
    let rhs = SVector::<f64, 16>::from_iterator(d.iter().map(|v| -v));
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::validation("drift", "Lyapunov equation is singular"))?;
    let s = Matrix4::from_iterator(x.iter().copied());
    Ok(0.5 * (s + s.transpose()))
}

/// Factor `L` with `L Lᵀ = Q` for a symmetric positive semi-definite `Q`;
/// tiny negative eigenvalues from round-off are clamped.
fn psd_factor(q: &Matrix4<f64>) -> Matrix4<f64> {
    let e = SymmetricEigen::new(*q);
    let mut l = e.eigenvectors;
    for j in 0..4 {
        let s = e.eigenvalues[j].max(0.0).sqrt();
        for i in 0..4 {
            l[(i, j)] *= s;
        }
    }
    l
}

/// Exact transition over `t`: `u(t) = Φ u(0) + L z`, `z ~ N(0, I)`.
struct Transition {
    phi: Matrix4<f64>,
    factor: Matrix4<f64>,
}

impl Transition {
    fn new(a: &Matrix4<f64>, d: &Matrix4<f64>, t: f64) -> Result<Self> {
        let sigma = lyapunov(a, d)?;
        let phi = (a * t).exp();
        let q = sigma - phi * sigma * phi.transpose();
        Ok(Transition {
            phi,
            factor: psd_factor(&(0.5 * (q + q.transpose()))),
        })
    }
}

fn diffusion(amps: &[f64; 4], noise: NoiseSwitches) -> Matrix4<f64> {
    let on = |b: bool| if b { 1.0 } else { 0.0 };
    let p_var = on(noise.thermal) * amps[0].powi(2) + on(noise.csl) * amps[1].powi(2);
    Matrix4::from_diagonal(&Vector4::new(
        0.0,
        p_var,
        on(noise.input) * amps[2].powi(2),
        on(noise.input) * amps[3].powi(2),
    ))
}

struct Stepper {
    a: Matrix4<f64>,
    amps: [f64; 4],
    noise: NoiseSwitches,
    sqrt_dt: f64,
    dt: f64,
    scheme: Scheme,
    rngs: [ChaCha8Rng; 4],
}

impl Stepper {
    fn increment(&mut self) -> Vector4<f64> {
        let mut draw = |c: usize, on: bool| -> f64 {
            if on {
                self.rngs[c].sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        };
        let th = draw(0, self.noise.thermal);
        let cs = draw(1, self.noise.csl);
        let xi = draw(2, self.noise.input);
        let yi = draw(3, self.noise.input);
        self.sqrt_dt
            * Vector4::new(
                0.0,
                self.amps[0] * th + self.amps[1] * cs,
                self.amps[2] * xi,
                self.amps[3] * yi,
            )
    }

    fn step(&mut self, u: &Vector4<f64>) -> Vector4<f64> {
        let dw = self.increment();
        let f0 = self.a * u;
        match self.scheme {
            Scheme::EulerMaruyama => u + f0 * self.dt + dw,
            Scheme::StochasticHeun => {
                // additive noise: the corrector only averages the drift
                let pred = u + f0 * self.dt + dw;
                u + 0.5 * (f0 + self.a * pred) * self.dt + dw
            }
        }
    }
}

/// Runs every realization; results are independent of the thread count.
pub fn simulate(p: &SystemParams, cfg: &SimConfig) -> Result<TraceEnsemble> {
    cfg.validate(p)?;
    let (a, amps) = drift_and_noise(p);
    let scales = state_scales(p);
    let burn = match cfg.burn_in_mode {
        BurnInMode::Exact => Some(Transition::new(&a, &diffusion(&amps, cfg.noise), cfg.burn_in)?),
        BurnInMode::Integrate => None,
    };
    let start = cfg
        .initial_state
        .map(|s| Vector4::from(s.to_array()).component_div(&scales))
        .unwrap_or_else(Vector4::zeros);
    let n_samples = cfg.n_samples();

    let traces = (0..cfg.n_realizations)
        .into_par_iter()
        .map(|r| {
            let mut stepper = Stepper {
                a,
                amps,
                noise: cfg.noise,
                sqrt_dt: cfg.dt.sqrt(),
                dt: cfg.dt,
                scheme: cfg.scheme,
                rngs: [0, 1, 2, 3].map(|c| rng_for(cfg.seed, r, c)),
            };
            let check = |u: &Vector4<f64>, step: usize| -> Result<()> {
                if u.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD) {
                    Ok(())
                } else {
                    Err(Error::Divergence { realization: r, step })
                }
            };
            let mut u = match &burn {
                Some(t) => {
                    let mut rng = rng_for(cfg.seed, r, CHANNEL_BURN_IN);
                    let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                    t.phi * start + t.factor * z
                }
                None => {
                    let mut u = start;
                    let steps = (cfg.burn_in / cfg.dt).round() as usize;
                    for s in 0..steps {
                        u = stepper.step(&u);
                        check(&u, s)?;
                    }
                    u
                }
            };
            let mut samples = Vec::with_capacity(n_samples);
            let to_si = |u: &Vector4<f64>| {
                let v = u.component_mul(&scales);
                FluctuationState {
                    dq: v[0],
                    dp: v[1],
                    dx: v[2],
                    dy: v[3],
                }
            };
            samples.push(to_si(&u));
            let mut step = 0;
            for _ in 1..n_samples {
                for _ in 0..cfg.thin {
                    u = stepper.step(&u);
                    check(&u, step)?;
                    step += 1;
                }
                samples.push(to_si(&u));
            }
            Ok(Trace {
                realization: r,
                samples,
            })
        })
        .collect::<Result<Vec<Trace>>>()?;

    Ok(TraceEnsemble {
        traces,
        sample_interval: cfg.sample_interval(),
        seed: cfg.seed,
        stream_layout: "(realization << 3) | channel; channels thermal=0 csl=1 x_in=2 y_in=3 burn_in=4",
        config_fingerprint: cfg.fingerprint(p),
        params_fingerprint: p.fingerprint(),
    })
}

/// Stationary covariance of the SI state `(δq, δp, δx, δy)` for the active
/// noise sources.
pub fn stationary_covariance(p: &SystemParams, noise: NoiseSwitches) -> Result<Matrix4<f64>> {
    let (a, amps) = drift_and_noise(p);
    let s = lyapunov(&a, &diffusion(&amps, noise))?;
    let sc = state_scales(p);
    Ok(Matrix4::from_fn(|i, j| s[(i, j)] * sc[i] * sc[j]))
}

impl TraceEnsemble {
    /// Per-realization time averages of `δq²`, m².
    pub fn dq_mean_squares(&self) -> Vec<f64> {
        self.traces
            .iter()
            .map(|t| {
                let sq: Vec<f64> = t.samples.iter().map(|s| s.dq * s.dq).collect();
                crate::numeric::pairwise_sum(&sq) / sq.len() as f64
            })
            .collect()
    }

    /// Trace CSV of one realization: `t_s,dq_m,dp_kgms,dx,dy`.
    pub fn trace_csv(&self, realization: usize, thin: usize) -> Result<String> {
        let t = self.traces.get(realization).ok_or_else(|| {
            Error::validation("realization", format!("only {} realizations", self.traces.len()))
        })?;
        let thin = thin.max(1);
        let mut s = String::from("t_s,dq_m,dp_kgms,dx,dy\n");
        for (i, x) in t.samples.iter().enumerate().step_by(thin) {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e}",
                i as f64 * self.sample_interval,
                x.dq,
                x.dp,
                x.dx,
                x.dy
            );
        }
        Ok(s)
    }

    pub fn write_trace_csv(&self, realization: usize, thin: usize, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.trace_csv(realization, thin)?)?;
        Ok(())
    }
}
