//! Adaptive 21-point Gauss–Kronrod quadrature for vector-valued integrands.
//!
//! All components share the same subintervals, so several spectra over the
//! same poles can be integrated in one pass. Error estimates use the
//! QUADPACK rescaling of `|K21 − G10|`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the number of subintervals kept.
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub abs_error: [f64; N],
    pub evaluations: usize,
    pub intervals: usize,
}

impl<const N: usize> QuadResult<N> {
    pub fn rel_error(&self, component: usize) -> f64 {
        let v = self.value[component].abs();
        if v == 0.0 {
            self.abs_error[component]
        } else {
            self.abs_error[component] / v
        }
    }
}

/// Where a panel lives: an ordinary interval, or `[0, 1]` in `t` standing
/// for `[ω_c/t]` over `[ω_c, ∞)`.
#[derive(Debug, Clone, Copy)]
enum Domain {
    Finite,
    Tail { start: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    domain: Domain,
    value: [f64; N],
    err: [f64; N],
    l1: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const N: usize> Eq for Panel<N> {}
impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Panel<N> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// One 21-point Kronrod rule on `[a, b]` with its embedded 10-point Gauss
/// estimate; returns `(K21, rescaled error, K21 of |f|)` per component.
pub fn gk21<const N: usize, F>(f: &F, a: f64, b: f64) -> Result<([f64; N], [f64; N], [f64; N])>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc.map(|v| v * WGK[10]);
    let mut gauss = [0.0; N];
    let mut abs = fc.map(|v| (v * WGK[10]).abs());
    let mut samples = [[[0.0; N]; 2]; 10];
    for j in 0..10 {
        let dx = h * XGK[j];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        for n in 0..N {
            kron[n] += WGK[j] * (f1[n] + f2[n]);
            abs[n] += WGK[j] * (f1[n].abs() + f2[n].abs());
            if j % 2 == 1 {
                gauss[n] += WG[j / 2] * (f1[n] + f2[n]);
            }
        }
        samples[j] = [f1, f2];
    }
    let mut err = [0.0; N];
    let mut l1 = [0.0; N];
    for n in 0..N {
        let mean = 0.5 * kron[n];
        let mut asc = WGK[10] * (fc[n] - mean).abs();
        for (j, s) in samples.iter().enumerate() {
            asc += WGK[j] * ((s[0][n] - mean).abs() + (s[1][n] - mean).abs());
        }
        let asc = asc * h.abs();
        let abs_n = abs[n] * h.abs();
        let mut e = ((kron[n] - gauss[n]) * h).abs();
        if asc != 0.0 && e != 0.0 {
            e = asc * (200.0 * e / asc).powf(1.5).min(1.0);
        }
        if abs_n > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * abs_n);
        }
        err[n] = e;
        l1[n] = abs_n;
        kron[n] *= h;
    }
    Ok((kron, err, l1))
}

fn evaluate_panel<const N: usize, F>(f: &F, a: f64, b: f64, domain: Domain) -> Result<Panel<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let (value, err, l1) = match domain {
        Domain::Finite => gk21(f, a, b)?,
        Domain::Tail { start } => {
            let g = |t: f64| -> Result<[f64; N]> {
                let w = start / t;
                Ok(f(w)?.map(|v| v * start / (t * t)))
            };
            gk21(&g, a, b)?
        }
    };
    Ok(Panel {
        a,
        b,
        domain,
        value,
        err,
        l1,
        priority: 0.0,
    })
}

/// Global adaptive bisection over an initial set of panels. The panel with the
/// largest error relative to its component's tolerance is split first.
fn adaptive<const N: usize, F>(
    f: &F,
    initial: Vec<(f64, f64, Domain)>,
    cfg: &QuadratureConfig,
) -> Result<QuadResult<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let mut panels: Vec<Panel<N>> = initial
        .into_iter()
        .map(|(a, b, d)| evaluate_panel(f, a, b, d))
        .collect::<Result<_>>()?;
    let mut evaluations = 21 * panels.len();

    let totals = |ps: &[Panel<N>]| {
        let mut v = [0.0; N];
        let mut e = [0.0; N];
        for p in ps {
            for n in 0..N {
                v[n] += p.value[n];
                e[n] += p.err[n];
            }
        }
        (v, e)
    };
    // ∫|f| over the initial panels bounds the attainable round-off level
    let mut l1 = [0.0; N];
    for p in &panels {
        for n in 0..N {
            l1[n] += p.l1[n];
        }
    }
    let tolerance = |v: &[f64; N]| {
        let mut t = [0.0; N];
        for n in 0..N {
            t[n] = cfg
                .abs_tol
                .max(cfg.rel_tol * v[n].abs())
                .max(100.0 * f64::EPSILON * l1[n]);
        }
        t
    };
    let score = |p: &Panel<N>, tol: &[f64; N]| {
        (0..N)
            .map(|n| {
                if tol[n] > 0.0 {
                    p.err[n] / tol[n]
                } else if p.err[n] > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    };

    let (mut value, mut err) = totals(&panels);
    let mut tol = tolerance(&value);
    for p in &mut panels {
        p.priority = score(p, &tol);
    }
    let mut heap: BinaryHeap<Panel<N>> = panels.into_iter().collect();

    loop {
        if (0..N).all(|n| err[n] <= tolerance(&value)[n]) {
            // re-add from scratch so running-sum drift does not leak out
            let all: Vec<Panel<N>> = heap.iter().copied().collect();
            let (v, e) = totals(&all);
            if (0..N).all(|n| e[n] <= tolerance(&v)[n]) {
                return Ok(QuadResult {
                    value: v,
                    abs_error: e,
                    evaluations,
                    intervals: heap.len(),
                });
            }
            (value, err) = (v, e);
            continue;
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Quadrature(format!(
                "{} subintervals used; estimated errors {err:?} on values {value:?}",
                heap.len()
            )));
        }
        // tolerances drift as the values converge; refresh the ordering now and then
        let fresh = tolerance(&value);
        if (0..N).any(|n| (fresh[n] - tol[n]).abs() > 0.5 * tol[n].abs()) {
            tol = fresh;
            heap = heap
                .into_iter()
                .map(|mut p| {
                    p.priority = score(&p, &tol);
                    p
                })
                .collect();
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature(format!(
                "interval [{:e}, {:e}] cannot be bisected further",
                worst.a, worst.b
            )));
        }
        for n in 0..N {
            value[n] -= worst.value[n];
            err[n] -= worst.err[n];
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let mut p = evaluate_panel(f, a, b, worst.domain)?;
            p.priority = score(&p, &tol);
            for n in 0..N {
                value[n] += p.value[n];
                err[n] += p.err[n];
            }
            heap.push(p);
        }
        evaluations += 42;
    }
}

/// `∫_a^b f` to the tolerances in `cfg`.
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("integration limits must be finite".into()));
    }
    adaptive(&f, vec![(a, b, Domain::Finite)], cfg)
}

/// `∫_0^∞ f` with initial panels split at `breakpoints` (positive, any order).
/// Everything beyond the largest breakpoint goes through `ω = ω_c/t`.
pub fn integrate_half_line<const N: usize, F>(
    f: F,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > 0.0)
        .collect();
    if pts.is_empty() {
        pts.push(1.0);
    }
    pts.push(0.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let cut = *pts.last().expect("non-empty");
    let mut initial: Vec<(f64, f64, Domain)> = pts
        .windows(2)
        .map(|w| (w[0], w[1], Domain::Finite))
        .collect();
    initial.push((0.0, 1.0, Domain::Tail { start: cut }));
    adaptive(&f, initial, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Result<[f64; 1]> {
        move |x| Ok([f(x)])
    }

    #[test]
    fn kronrod_rule_weights_sum_to_interval() {
        let (v, _, _) = gk21(&scalar(|_| 1.0), -1.0, 1.0).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-15);
        let gsum: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((gsum - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_exact_for_degree_31() {
        let (v, _, _) = gk21(&scalar(|x| x.powi(30) + x.powi(31)), 0.0, 1.0).unwrap();
        let exact = 1.0 / 31.0 + 1.0 / 32.0;
        assert!((v[0] - exact).abs() < 1e-14);
    }

    #[test]
    fn narrow_lorentzian_on_half_line() {
        // ∫_0^∞ dω / ((ω−ω0)² + g²) = (π/2 + atan(ω0/g)) / g
        let (w0, g) = (1.7e6, 28.0);
        let cfg = QuadratureConfig::default();
        let bps: Vec<f64> = [1.0, 4.0, 16.0, 64.0, 256.0]
            .iter()
            .flat_map(|m| [w0 - m * g, w0 + m * g])
            .chain([2.0 * w0])
            .collect();
        let r = integrate_half_line(scalar(|w| 1.0 / ((w - w0).powi(2) + g * g)), &bps, &cfg).unwrap();
        let exact = (PI / 2.0 + (w0 / g).atan()) / g;
        assert!((r.value[0] / exact - 1.0).abs() < 1e-9, "{}", r.value[0] / exact - 1.0);
        assert!(r.rel_error(0) < 1e-9);
    }

    #[test]
    fn mapped_tail_handles_power_law() {
        // ∫_0^∞ dx / (1 + x²)² = π/4
        let r = integrate_half_line(scalar(|x| 1.0 / (1.0 + x * x).powi(2)), &[1.0], &Default::default()).unwrap();
        assert!((r.value[0] - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn vector_components_share_panels() {
        let r = integrate(|x: f64| Ok([x.sin(), x.cos(), 1.0]), 0.0, PI, &Default::default()).unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-12);
        assert!(r.value[1].abs() < 1e-12);
        assert!((r.value[2] - PI).abs() < 1e-12);
    }

    #[test]
    fn integrand_errors_propagate() {
        let r = integrate(
            |x: f64| {
                if x > 0.5 {
                    Err(Error::Quadrature("boom".into()))
                } else {
                    Ok([x])
                }
            },
            0.0,
            1.0,
            &Default::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn interval_budget_is_enforced() {
        let cfg = QuadratureConfig {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_intervals: 4,
        };
        let r = integrate(scalar(|x: f64| x.abs().sqrt()), -1.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
