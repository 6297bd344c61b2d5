//! Stationary-regime analytics: the normalized Green function of Brownian
//! motion killed at the ends of (0, pi), harmonic-measure formulas for the
//! strip and the quarter disk, occupation integrals, and the desk-scale
//! occupation experiment comparing the spine with the conditioned motion.

use crate::montecarlo::{
    conditioned_occupation, par_blocks, spine_occupation, McError, McEstimate, RngSeed, BLOCK,
};
use crate::numerics::{integrate_line, ComplexValue, NumericsError};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StationaryError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
}

/// Green function of killed Brownian motion on (0, pi) in the conventional
/// normalization G(x, y) = (2/pi^2) y (pi - x) for y < x, symmetric.
///
/// Despite the common claim, this constant does NOT make G a probability
/// density: the displayed formula integrates to pi^2/6. The probability
/// normalization (total mass 1, constant 12/pi^4) is exposed separately as
/// `density`; that is the stationary law of the Fleming-Viot pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreenKernel;

/// Mass of the (2/pi^2)-normalized Green function: pi^2/6.
pub const GREEN_MASS: f64 = PI * PI / 6.0;

impl GreenKernel {
    pub fn green(&self, x: f64, y: f64) -> Result<f64, StationaryError> {
        if !(x > 0.0 && x < PI && y > 0.0 && y < PI) {
            return Err(StationaryError::Domain(format!(
                "green requires (x, y) in (0, pi)^2, got ({x}, {y})"
            )));
        }
        let (lo, hi) = if y < x { (y, x) } else { (x, y) };
        Ok(2.0 / (PI * PI) * lo * (PI - hi))
    }

    /// The Green function normalized to a probability density (mass 1):
    /// (12/pi^4) y (pi - x) for y < x, symmetric.
    pub fn density(&self, x: f64, y: f64) -> Result<f64, StationaryError> {
        Ok(self.green(x, y)? / GREEN_MASS)
    }

    /// Exact mass of the normalized density over the rectangle
    /// [a, b] x [c, d], handling the diagonal kink by closed-form inner
    /// integration and adaptive outer quadrature split at the kink abscissas.
    pub fn rect_mass(&self, a: f64, b: f64, c: f64, d: f64) -> Result<f64, StationaryError> {
        if !(0.0 <= a && a < b && b <= PI && 0.0 <= c && c < d && d <= PI) {
            return Err(StationaryError::Domain(format!(
                "rect_mass requires 0 <= a < b <= pi, 0 <= c < d <= pi, got [{a}, {b}] x [{c}, {d}]"
            )));
        }
        // Inner integral over y in [c, d] at fixed x, split at the diagonal.
        let inner = |x: f64| -> f64 {
            let mut s = 0.0;
            if x > c {
                let top = d.min(x);
                s += (PI - x) * (top * top - c * c) / 2.0;
            }
            if x < d {
                let m = c.max(x);
                s += x * (PI * (d - m) - (d * d - m * m) / 2.0);
            }
            s
        };
        let mut cuts = vec![a];
        for t in [c, d] {
            if t > a && t < b {
                cuts.push(t);
            }
        }
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let q = integrate_line(
                |z: ComplexValue| ComplexValue::new(inner(z.re), 0.0),
                ComplexValue::new(w[0], 0.0),
                ComplexValue::new(w[1], 0.0),
                1e-13,
            )?;
            total += q.value.re;
        }
        Ok(total * 2.0 / (PI * PI) / GREEN_MASS)
    }
}

/// Stationary occupation of (0, eps) by the conditioned motion:
/// the mass of (2/pi) sin^2 on (0, eps), i.e. (eps - sin(2 eps)/2) / pi.
pub fn occupation_conditioned(eps: f64) -> Result<f64, StationaryError> {
    if !(eps > 0.0 && eps <= PI) {
        return Err(StationaryError::Domain(format!(
            "eps must lie in (0, pi], got {eps}"
        )));
    }
    Ok((eps - (2.0 * eps).sin() / 2.0) / PI)
}

/// Geometry for a harmonic-measure evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum HarmonicMeasureSpec {
    /// D = { v : |Im v - a| < r, Re v < b }, base point c + ai on the
    /// centerline; the measured face is { Re v = b }.
    Strip { a: f64, r: f64, b: f64, c: f64 },
    /// Quarter disk { u, v > 0, u^2 + v^2 < pi^2 }, base point (x, y); the
    /// measured set is the circular arc.
    QuarterDisk { x: f64, y: f64 },
}

impl HarmonicMeasureSpec {
    pub fn validate(&self) -> Result<(), StationaryError> {
        match *self {
            HarmonicMeasureSpec::Strip { r, b, c, .. } => {
                if !(r > 0.0) {
                    return Err(StationaryError::Domain(format!("strip needs r > 0, got {r}")));
                }
                if !(c <= b) {
                    return Err(StationaryError::Domain(format!(
                        "strip needs c <= b, got c = {c}, b = {b}"
                    )));
                }
                Ok(())
            }
            HarmonicMeasureSpec::QuarterDisk { x, y } => {
                if !(x > 0.0 && y > 0.0 && x * x + y * y < PI * PI) {
                    return Err(StationaryError::Domain(format!(
                        "quarter disk needs x, y > 0 and x^2 + y^2 < pi^2, got ({x}, {y})"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Harmonic measure of the right face of the strip seen from the centerline
/// point c + ai: (4/pi) arctan(exp(-pi (b - c) / (2 r))).
pub fn hm_strip(spec: &HarmonicMeasureSpec) -> Result<f64, StationaryError> {
    spec.validate()?;
    match *spec {
        HarmonicMeasureSpec::Strip { r, b, c, .. } => {
            Ok(4.0 / PI * (-PI * (b - c) / (2.0 * r)).exp().atan())
        }
        HarmonicMeasureSpec::QuarterDisk { .. } => Err(StationaryError::Domain(
            "hm_strip requires strip geometry".into(),
        )),
    }
}

/// Upper bound (4/pi) arctan((x^2 + y^2)/pi^2) for the harmonic measure of
/// the arc of the quarter disk; exact when x = y.
pub fn hm_quarter_bound(x: f64, y: f64) -> Result<f64, StationaryError> {
    HarmonicMeasureSpec::QuarterDisk { x, y }.validate()?;
    Ok(4.0 / PI * ((x * x + y * y) / (PI * PI)).atan())
}

/// Lower bound p1 - p2 for the probability that the second coordinate of a
/// planar Brownian motion from (x, y) reaches 0 first, floored at 0:
/// (2/pi) arctan(x/y) - (4/pi) arctan((x^2 + y^2)/pi^2).
pub fn p_lower_bound(x: f64, y: f64) -> Result<f64, StationaryError> {
    if !(x > 0.0 && x < PI / 2.0 && y > 0.0 && y < PI / 2.0) {
        return Err(StationaryError::Domain(format!(
            "p_lower_bound requires x, y in (0, pi/2), got ({x}, {y})"
        )));
    }
    let p1 = 2.0 / PI * (x / y).atan();
    let p2 = 4.0 / PI * ((x * x + y * y) / (PI * PI)).atan();
    Ok((p1 - p2).max(0.0))
}

/// Lower bound for the stationary spine occupation of (0, eps):
/// the double integral of 2 (2/pi^2) x (pi - y) (1/pi) arctan(x/y) over
/// x in (0, eps), y in (x, sqrt(x)), evaluated without the unspecified
/// c1-constant simplification.
pub fn spine_occupation_lower_integral(eps: f64) -> Result<f64, StationaryError> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(StationaryError::Domain(format!(
            "eps must lie in (0, 0.5], got {eps}"
        )));
    }
    let inner = |x: f64| -> Result<f64, NumericsError> {
        let q = integrate_line(
            |z: ComplexValue| {
                let y = z.re;
                ComplexValue::new((PI - y) * (x / y).atan() / PI, 0.0)
            },
            ComplexValue::new(x, 0.0),
            ComplexValue::new(x.sqrt(), 0.0),
            1e-13,
        )?;
        Ok(4.0 / (PI * PI) * x * q.value.re)
    };
    // Inner failures surface as NaN and are caught by the outer
    // non-finiteness check.
    let outer = integrate_line(
        |z: ComplexValue| match inner(z.re) {
            Ok(v) => ComplexValue::new(v, 0.0),
            Err(_) => ComplexValue::new(f64::NAN, 0.0),
        },
        ComplexValue::new(0.0, 0.0),
        ComplexValue::new(eps, 0.0),
        1e-12,
    )?;
    if !outer.value.re.is_finite() {
        return Err(NumericsError::NonFinite("spine occupation lower integral".into()).into());
    }
    Ok(outer.value.re)
}

// ---------------------------------------------------------------------------
// Monte Carlo oracles for the harmonic-measure formulas (planar Brownian
// motion with the same bridge-corrected stepping as the interval simulator).

const BRIDGE_EXP_CUT: f64 = 40.0;

fn bridge_touch<R: Rng>(d0: f64, d1: f64, dt: f64, rng: &mut R) -> bool {
    let e = 2.0 * d0 * d1 / dt;
    e <= BRIDGE_EXP_CUT && rng.gen::<f64>() < (-e).exp()
}

fn pick<R: Rng>(hits: &[usize], rng: &mut R) -> usize {
    if hits.len() == 1 {
        hits[0]
    } else {
        hits[rng.gen_range(0..hits.len())]
    }
}

/// One planar Brownian run in the strip; true if it exits through the right
/// face Re v = b.
fn strip_run<R: Rng>(a: f64, r: f64, b: f64, c: f64, dt: f64, rng: &mut R) -> bool {
    let (mut u, mut v) = (c, a);
    let s = dt.sqrt();
    loop {
        let zu: f64 = rng.sample(StandardNormal);
        let zv: f64 = rng.sample(StandardNormal);
        let (nu, nv) = (u + zu * s, v + zv * s);
        let mut hits: Vec<usize> = Vec::new();
        // 0: right face (the measured set), 1: lower side, 2: upper side.
        if nu >= b || bridge_touch(b - u, b - nu, dt, rng) {
            hits.push(0);
        }
        if nv <= a - r || bridge_touch(v - (a - r), nv - (a - r), dt, rng) {
            hits.push(1);
        }
        if nv >= a + r || bridge_touch(a + r - v, a + r - nv, dt, rng) {
            hits.push(2);
        }
        if !hits.is_empty() {
            return pick(&hits, rng) == 0;
        }
        u = nu;
        v = nv;
    }
}

/// One planar Brownian run in the quarter disk; true if it exits through the
/// arc. The arc touch uses the radial bridge approximation.
fn quarter_run<R: Rng>(x: f64, y: f64, dt: f64, rng: &mut R) -> bool {
    let (mut u, mut v) = (x, y);
    let s = dt.sqrt();
    loop {
        let zu: f64 = rng.sample(StandardNormal);
        let zv: f64 = rng.sample(StandardNormal);
        let (nu, nv) = (u + zu * s, v + zv * s);
        let mut hits: Vec<usize> = Vec::new();
        // 0: arc (the measured set), 1: u = 0 side, 2: v = 0 side.
        let d0 = PI - (u * u + v * v).sqrt();
        let d1 = PI - (nu * nu + nv * nv).sqrt();
        if d1 <= 0.0 || bridge_touch(d0, d1, dt, rng) {
            hits.push(0);
        }
        if nu <= 0.0 || bridge_touch(u, nu, dt, rng) {
            hits.push(1);
        }
        if nv <= 0.0 || bridge_touch(v, nv, dt, rng) {
            hits.push(2);
        }
        if !hits.is_empty() {
            return pick(&hits, rng) == 0;
        }
        u = nu;
        v = nv;
    }
}

/// One planar Brownian run in the open quadrant; true if the second
/// coordinate reaches 0 first.
fn quadrant_run<R: Rng>(x: f64, y: f64, dt: f64, rng: &mut R) -> bool {
    let (mut u, mut v) = (x, y);
    let s = dt.sqrt();
    loop {
        let zu: f64 = rng.sample(StandardNormal);
        let zv: f64 = rng.sample(StandardNormal);
        let (nu, nv) = (u + zu * s, v + zv * s);
        let hit_u = nu <= 0.0 || bridge_touch(u, nu, dt, rng);
        let hit_v = nv <= 0.0 || bridge_touch(v, nv, dt, rng);
        match (hit_u, hit_v) {
            (false, false) => {
                u = nu;
                v = nv;
            }
            (true, false) => return false,
            (false, true) => return true,
            (true, true) => return rng.gen::<bool>(),
        }
    }
}

fn mc_fraction<F>(samples: u64, seed: RngSeed, lane: u64, run: F) -> Result<McEstimate, McError>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync,
{
    if samples == 0 {
        return Err(McError::InvalidParameter("samples must be > 0".into()));
    }
    let blocks = samples.div_ceil(BLOCK);
    let counts = par_blocks(blocks, |blk| {
        let lo = blk * BLOCK;
        let hi = (lo + BLOCK).min(samples);
        let mut rng = seed.replica(lane, blk).rng();
        let mut hits = 0u64;
        for _ in lo..hi {
            if run(&mut rng) {
                hits += 1;
            }
        }
        hits
    });
    let hits: u64 = counts.iter().sum();
    let p = hits as f64 / samples as f64;
    Ok(McEstimate {
        mean: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

pub fn mc_hm_strip(
    spec: &HarmonicMeasureSpec,
    dt: f64,
    samples: u64,
    seed: RngSeed,
) -> Result<McEstimate, StationaryError> {
    spec.validate()?;
    match *spec {
        HarmonicMeasureSpec::Strip { a, r, b, c } => {
            Ok(mc_fraction(samples, seed, 10, |rng| strip_run(a, r, b, c, dt, rng))?)
        }
        HarmonicMeasureSpec::QuarterDisk { .. } => Err(StationaryError::Domain(
            "mc_hm_strip requires strip geometry".into(),
        )),
    }
}

pub fn mc_hm_quarter(
    x: f64,
    y: f64,
    dt: f64,
    samples: u64,
    seed: RngSeed,
) -> Result<McEstimate, StationaryError> {
    HarmonicMeasureSpec::QuarterDisk { x, y }.validate()?;
    Ok(mc_fraction(samples, seed, 11, |rng| quarter_run(x, y, dt, rng))?)
}

pub fn mc_quadrant_exit(
    x: f64,
    y: f64,
    dt: f64,
    samples: u64,
    seed: RngSeed,
) -> Result<McEstimate, StationaryError> {
    if !(x > 0.0 && y > 0.0) {
        return Err(StationaryError::Domain(format!(
            "quadrant start must satisfy x, y > 0, got ({x}, {y})"
        )));
    }
    Ok(mc_fraction(samples, seed, 12, |rng| quadrant_run(x, y, dt, rng))?)
}

// ---------------------------------------------------------------------------
// Distribution-comparison statistics.

/// Two-sided Kolmogorov-Smirnov statistic against the uniform law on (0, pi).
pub fn ks_uniform(samples: &[f64]) -> Result<f64, StationaryError> {
    if samples.is_empty() {
        return Err(StationaryError::Domain("ks_uniform needs samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &y) in sorted.iter().enumerate() {
        let f = y / PI;
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    Ok(d)
}

/// Asymptotic KS critical value at significance alpha (Smirnov):
/// sqrt(-ln(alpha/2) / (2n)).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / (2.0 * n as f64)).sqrt()
}

/// Total-variation distance between a time-weighted bins x bins histogram of
/// pair positions (row-major over (x1, x2)) and the Green density, using the
/// exact per-cell Green mass.
pub fn green_tv_distance(histogram: &[f64], bins: usize) -> Result<f64, StationaryError> {
    if bins == 0 || histogram.len() != bins * bins {
        return Err(StationaryError::Domain(format!(
            "histogram length {} does not match bins = {bins}",
            histogram.len()
        )));
    }
    let total: f64 = histogram.iter().sum();
    if !(total > 0.0) {
        return Err(StationaryError::Domain("empty histogram".into()));
    }
    let g = GreenKernel;
    let w = PI / bins as f64;
    let mut tv = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let emp = histogram[i * bins + j] / total;
            let mass = g.rect_mass(
                i as f64 * w,
                (i + 1) as f64 * w,
                j as f64 * w,
                (j + 1) as f64 * w,
            )?;
            tv += (emp - mass).abs();
        }
    }
    Ok(tv / 2.0)
}

/// Chi-square statistic of samples against the density (2/pi) sin^2 on
/// equal-width bins; returns (statistic, degrees of freedom).
pub fn chi_square_sin2(samples: &[f64], bins: usize) -> Result<(f64, usize), StationaryError> {
    if bins < 2 || samples.is_empty() {
        return Err(StationaryError::Domain(
            "chi_square_sin2 needs samples and >= 2 bins".into(),
        ));
    }
    let mut counts = vec![0.0f64; bins];
    for &x in samples {
        if !(x > 0.0 && x < PI) {
            return Err(StationaryError::Domain(format!("sample {x} outside (0, pi)")));
        }
        counts[((x / PI * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let n = samples.len() as f64;
    let mut stat = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let lo = PI * i as f64 / bins as f64;
        let hi = PI * (i + 1) as f64 / bins as f64;
        let p = ((hi - lo) - ((2.0 * hi).sin() - (2.0 * lo).sin()) / 2.0) / PI;
        let e = n * p;
        stat += (c - e) * (c - e) / e;
    }
    Ok((stat, bins - 1))
}

/// Wilson-Hilferty approximation to the chi-square quantile at upper-tail
/// standard-normal score z (z = 2.3263 for the 1% level).
pub fn chi_square_critical(dof: usize, z: f64) -> f64 {
    let k = dof as f64;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

// ---------------------------------------------------------------------------
// Theorem 2.4 desk-scale experiment.

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OccupationRow {
    pub eps: f64,
    pub spine_emp: f64,
    pub spine_se: f64,
    pub cond_emp: f64,
    pub cond_se: f64,
    pub cond_analytic: f64,
    pub lower_integral: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupationReport {
    pub rows: Vec<OccupationRow>,
    pub horizon: f64,
    pub dt: f64,
    pub reps: u64,
    pub warmup_fraction: f64,
    pub branch_events: u64,
}

const THM24_WARMUP: f64 = 0.1;
const MIN_EVENTS_PER_RUN: u64 = 100;

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Compare the spine's occupation of (0, eps) with the conditioned motion's,
/// per replica, against the analytic conditioned value and the lower-bound
/// integral. Both processes start at the interval midpoint; the first 10%
/// of the horizon is discarded as warm-up.
pub fn thm24_experiment(
    eps_list: &[f64],
    horizon: f64,
    reps: u64,
    dt: f64,
    seed: RngSeed,
) -> Result<OccupationReport, StationaryError> {
    if eps_list.is_empty() {
        return Err(StationaryError::Domain("eps_list must be nonempty".into()));
    }
    for &eps in eps_list {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(StationaryError::Domain(format!(
                "each eps must lie in (0, 0.5], got {eps}"
            )));
        }
    }
    if reps < 2 {
        return Err(StationaryError::Domain("reps must be >= 2".into()));
    }
    let x0 = PI / 2.0;
    let spine_samples = par_blocks(reps, |rep| {
        spine_occupation(
            x0,
            x0,
            horizon,
            dt,
            eps_list,
            THM24_WARMUP,
            seed.replica(20, rep).rng(),
        )
    });
    let cond_samples = par_blocks(reps, |rep| {
        let mut rng = seed.replica(21, rep).rng();
        conditioned_occupation(x0, horizon, dt, eps_list, THM24_WARMUP, &mut rng)
    });

    let mut branch_events = 0u64;
    let mut spine_frac = vec![Vec::with_capacity(reps as usize); eps_list.len()];
    for s in spine_samples {
        let s = s?;
        if s.events < MIN_EVENTS_PER_RUN {
            return Err(McError::TooFewEvents {
                got: s.events,
                need: MIN_EVENTS_PER_RUN,
            }
            .into());
        }
        branch_events += s.events;
        for (i, &occ) in s.occupied.iter().enumerate() {
            spine_frac[i].push(occ / s.counted_time);
        }
    }
    let mut cond_frac = vec![Vec::with_capacity(reps as usize); eps_list.len()];
    for s in cond_samples {
        let s = s?;
        for (i, &occ) in s.occupied.iter().enumerate() {
            cond_frac[i].push(occ / s.counted_time);
        }
    }

    let mut rows = Vec::with_capacity(eps_list.len());
    for (i, &eps) in eps_list.iter().enumerate() {
        let (spine_emp, spine_se) = mean_se(&spine_frac[i]);
        let (cond_emp, cond_se) = mean_se(&cond_frac[i]);
        let cond_analytic = occupation_conditioned(eps)?;
        let lower_integral = spine_occupation_lower_integral(eps)?;
        rows.push(OccupationRow {
            eps,
            spine_emp,
            spine_se,
            cond_emp,
            cond_se,
            cond_analytic,
            lower_integral,
            significant: spine_emp - cond_analytic > 3.0 * spine_se,
        });
    }
    Ok(OccupationReport {
        rows,
        horizon,
        dt,
        reps,
        warmup_fraction: THM24_WARMUP,
        branch_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_center_and_symmetry() {
        let g = GreenKernel;
        assert!((g.green(PI / 2.0, PI / 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(g.green(1.0, 2.0).unwrap(), g.green(2.0, 1.0).unwrap());
        assert!((g.density(PI / 2.0, PI / 2.0).unwrap() - 3.0 / (PI * PI)).abs() < 1e-15);
        assert!(g.green(0.0, 1.0).is_err());
        assert!(g.green(1.0, PI).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        // The (2/pi^2)-normalized formula has mass pi^2/6; the density
        // variant has mass 1.
        let g = GreenKernel;
        let mass = g.rect_mass(0.0, PI, 0.0, PI).unwrap();
        assert!((mass - 1.0).abs() < 1e-10, "mass = {mass}");
        let q = integrate_line(
            |z: ComplexValue| {
                let x = z.re;
                // Inner integral of green(x, .) in closed form.
                let inner = (PI - x) * x * x / 2.0 + x * (PI * (PI - x) - (PI * PI - x * x) / 2.0);
                ComplexValue::new(2.0 / (PI * PI) * inner, 0.0)
            },
            ComplexValue::new(0.0, 0.0),
            ComplexValue::new(PI, 0.0),
            1e-13,
        )
        .unwrap();
        assert!((q.value.re - GREEN_MASS).abs() < 1e-10, "green mass = {}", q.value.re);
    }

    #[test]
    fn green_cell_masses_add_up() {
        let g = GreenKernel;
        let bins = 8;
        let w = PI / bins as f64;
        let mut total = 0.0;
        for i in 0..bins {
            for j in 0..bins {
                let m = g
                    .rect_mass(i as f64 * w, (i + 1) as f64 * w, j as f64 * w, (j + 1) as f64 * w)
                    .unwrap();
                assert!(m >= 0.0);
                total += m;
            }
        }
        assert!((total - 1.0).abs() < 1e-10, "total = {total}");
    }

    #[test]
    fn occupation_conditioned_values() {
        assert!((occupation_conditioned(PI).unwrap() - 1.0).abs() < 1e-15);
        // Quadrature oracle for the sin^2 mass on (0, 0.1).
        let q = integrate_line(
            |z: ComplexValue| {
                let x = z.re;
                ComplexValue::new(2.0 / PI * x.sin() * x.sin(), 0.0)
            },
            ComplexValue::new(0.0, 0.0),
            ComplexValue::new(0.1, 0.0),
            1e-14,
        )
        .unwrap();
        assert!((occupation_conditioned(0.1).unwrap() - q.value.re).abs() < 1e-12);
        // Cubic leading term at eps = 0.01: relative deviation eps^2 / 5.
        let eps = 0.01;
        let exact = occupation_conditioned(eps).unwrap();
        let cubic = 2.0 * eps.powi(3) / (3.0 * PI);
        assert!(((exact - cubic) / exact).abs() < 1e-4);
        assert!(occupation_conditioned(0.0).is_err());
    }

    #[test]
    fn hm_strip_limits_and_monotonicity() {
        let at = |b: f64, r: f64| {
            hm_strip(&HarmonicMeasureSpec::Strip { a: 0.0, r, b, c: 0.0 }).unwrap()
        };
        assert!((at(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(at(50.0, 1.0) < 1e-30);
        // Decreasing in b - c, increasing in r.
        assert!(at(1.0, 1.0) > at(2.0, 1.0));
        assert!(at(1.0, 2.0) > at(1.0, 1.0));
        for &(b, r) in &[(0.5, 0.3), (1.0, 1.0), (2.0, 0.7)] {
            let v = at(b, r);
            assert!(v > 0.0 && v < 1.0);
        }
        assert!(hm_strip(&HarmonicMeasureSpec::Strip { a: 0.0, r: -1.0, b: 1.0, c: 0.0 }).is_err());
        assert!(hm_strip(&HarmonicMeasureSpec::QuarterDisk { x: 0.1, y: 0.1 }).is_err());
    }

    #[test]
    fn hm_strip_matches_mc_at_paper_reduction() {
        // a = pi/4 shifted to the centerline at 0; the formula depends only
        // on b - c and r, so place a = 0 with the reduction's b - c and r.
        let spec = HarmonicMeasureSpec::Strip {
            a: 0.0,
            r: PI / 4.0,
            b: PI.ln(),
            c: (2.0_f64.sqrt() * 0.3).ln(),
        };
        let exact = hm_strip(&spec).unwrap();
        let mc = mc_hm_strip(&spec, 1e-4, 20_000, RngSeed::new(5, 0)).unwrap();
        assert!(
            (mc.mean - exact).abs() <= 3.0 * mc.std_error,
            "exact {exact} mc {mc:?}"
        );
    }

    #[test]
    fn hm_quarter_exact_on_diagonal() {
        let bound = hm_quarter_bound(0.5, 0.5).unwrap();
        let mc = mc_hm_quarter(0.5, 0.5, 1e-4, 20_000, RngSeed::new(6, 0)).unwrap();
        assert!(
            (mc.mean - bound).abs() <= 3.0 * mc.std_error,
            "bound {bound} mc {mc:?}"
        );
    }

    #[test]
    fn hm_quarter_is_upper_bound_off_diagonal() {
        let bound = hm_quarter_bound(0.2, 0.8).unwrap();
        let mc = mc_hm_quarter(0.2, 0.8, 1e-4, 20_000, RngSeed::new(7, 0)).unwrap();
        assert!(mc.mean <= bound + 3.0 * mc.std_error, "bound {bound} mc {mc:?}");
        assert!(hm_quarter_bound(1e-6, 1e-6).unwrap() < 1e-10);
        assert!(hm_quarter_bound(3.0, 3.0).is_err());
    }

    #[test]
    fn quadrant_exit_matches_arctan_law() {
        // Exact law: (2/pi) arctan(x/y).
        let exact = 2.0 / PI * (0.3f64 / 0.4).atan();
        let mc = mc_quadrant_exit(0.3, 0.4, 1e-4, 20_000, RngSeed::new(8, 0)).unwrap();
        assert!(
            (mc.mean - exact).abs() <= 3.0 * mc.std_error,
            "exact {exact} mc {mc:?}"
        );
        assert!(mc.mean >= p_lower_bound(0.3, 0.4).unwrap() - 3.0 * mc.std_error);
    }

    #[test]
    fn p_lower_bound_properties() {
        // p1 = 1/2 on the diagonal.
        let x = 0.3;
        let p1 = 2.0 / PI * (x / x as f64).atan();
        assert!((p1 - 0.5).abs() < 1e-15);
        assert!(p_lower_bound(x, x).unwrap() > 0.0);
        // Small x with y = sqrt(x): bound >= (1/pi) arctan(x/y).
        for &x in &[0.001f64, 0.01, 0.05] {
            let y = x.sqrt();
            let b = p_lower_bound(x, y).unwrap();
            assert!(b >= (x / y).atan() / PI, "x = {x}");
        }
        assert!(p_lower_bound(2.0, 0.1).is_err());
    }

    #[test]
    fn lower_integral_frozen_values() {
        // Oracle: adaptive quadrature of the displayed double integral.
        for &(eps, want) in &[
            (0.02, 2.118879851604132e-6),
            (0.05, 2.520006615139055e-5),
            (0.1, 1.540629470066112e-4),
            (0.2, 8.608506315141574e-4),
        ] {
            let got = spine_occupation_lower_integral(eps).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-8,
                "eps {eps}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn lower_integral_monotone_and_crossover() {
        let mut prev = 0.0;
        for &eps in &[0.02, 0.05, 0.1, 0.2, 0.3] {
            let v = spine_occupation_lower_integral(eps).unwrap();
            assert!(v > prev);
            prev = v;
        }
        // The lower bound beats the conditioned mass only for small eps:
        // above at 0.02, below by 0.05.
        assert!(
            spine_occupation_lower_integral(0.02).unwrap() > occupation_conditioned(0.02).unwrap()
        );
        assert!(
            spine_occupation_lower_integral(0.05).unwrap() < occupation_conditioned(0.05).unwrap()
        );
        assert!(spine_occupation_lower_integral(0.6).is_err());
    }

    #[test]
    fn ks_statistic_behaviour() {
        // Perfectly spread points have a tiny statistic; clustered ones fail.
        let n = 1000;
        let spread: Vec<f64> = (0..n).map(|i| PI * (i as f64 + 0.5) / n as f64).collect();
        let d = ks_uniform(&spread).unwrap();
        assert!(d < ks_critical(n, 0.01));
        let clustered = vec![0.3; n];
        assert!(ks_uniform(&clustered).unwrap() > ks_critical(n, 0.01));
        assert!((ks_critical(10_000, 0.01) - 1.628 / 100.0).abs() < 1e-3);
    }

    #[test]
    fn tv_distance_of_exact_histogram_is_small() {
        // Histogram filled with the exact cell masses has TV distance 0.
        let g = GreenKernel;
        let bins = 10;
        let w = PI / bins as f64;
        let mut hist = vec![0.0; bins * bins];
        for i in 0..bins {
            for j in 0..bins {
                hist[i * bins + j] = g
                    .rect_mass(i as f64 * w, (i + 1) as f64 * w, j as f64 * w, (j + 1) as f64 * w)
                    .unwrap();
            }
        }
        assert!(green_tv_distance(&hist, bins).unwrap() < 1e-12);
        // Uniform histogram is measurably off.
        let uniform = vec![1.0; bins * bins];
        assert!(green_tv_distance(&uniform, bins).unwrap() > 0.1);
    }

    #[test]
    fn chi_square_of_true_density_passes() {
        // Inverse-CDF samples of (2/pi) sin^2 via bisection on a fine grid.
        let n = 20_000;
        let cdf = |x: f64| (x - (2.0 * x).sin() / 2.0) / PI;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (0.0, PI);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let (stat, dof) = chi_square_sin2(&samples, 50).unwrap();
        assert!(stat < chi_square_critical(dof, 2.3263), "stat = {stat}");
        // Wilson-Hilferty sanity: 1% critical value for 49 dof is near 74.9.
        assert!((chi_square_critical(49, 2.3263) - 74.92).abs() < 0.5);
    }

    #[test]
    fn thm24_small_scale_runs() {
        let report =
            thm24_experiment(&[0.1, 0.3], 150.0, 2, 1e-3, RngSeed::new(9, 0)).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.spine_emp >= 0.0 && row.spine_emp <= 1.0);
            assert!(row.cond_emp >= 0.0 && row.cond_emp <= 1.0);
            assert!(row.lower_integral > 0.0);
        }
        // Conditioned occupation of (0, 0.3) should be in the right ballpark
        // even at this small scale.
        let r = &report.rows[1];
        assert!((r.cond_emp - r.cond_analytic).abs() < 0.5 * r.cond_analytic + 5.0 * r.cond_se);
    }

    #[test]
    fn thm24_rejects_bad_input() {
        assert!(thm24_experiment(&[], 100.0, 2, 1e-3, RngSeed::new(1, 0)).is_err());
        assert!(thm24_experiment(&[0.7], 100.0, 2, 1e-3, RngSeed::new(1, 0)).is_err());
        assert!(thm24_experiment(&[0.1], 100.0, 1, 1e-3, RngSeed::new(1, 0)).is_err());
        // Horizon too short for 100 branch events.
        assert!(matches!(
            thm24_experiment(&[0.1], 0.5, 2, 1e-3, RngSeed::new(1, 0)),
            Err(StationaryError::MonteCarlo(McError::TooFewEvents { .. }))
        ));
    }
}
