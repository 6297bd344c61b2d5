//! Simulation of the two-particle Fleming-Viot process driven by Brownian
//! motion in (0, pi): bridge-corrected stepping, branch events, spine
//! extraction, Monte Carlo estimators for h and the h-process drift, and
//! Brownian motion conditioned to stay in the interval (cot drift).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no completed spine interval in the run")]
    EmptySpine,
    #[error("empty path")]
    EmptyPath,
    #[error("no qualifying runs for the drift estimator")]
    NoQualifyingRuns,
    #[error("branch-event cap {0} exceeded; dt is likely too coarse for the horizon")]
    EventCap(u64),
    #[error("only {got} branch events at horizon (need >= {need}); widen the horizon")]
    TooFewEvents { got: u64, need: u64 },
}

/// Seed plus stream id; identical pairs reproduce sample paths bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derived seed for replica `i`, offset within a named lane so that
    /// different estimators never share streams.
    pub fn replica(&self, lane: u64, i: u64) -> Self {
        Self {
            seed: self.seed,
            stream: self
                .stream
                .wrapping_add(lane.wrapping_mul(0x9e37_79b9_7f4a_7c15))
                .wrapping_add(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Boundary {
    Lower,
    Upper,
}

/// Exponent above which a bridge touch probability (< e^{-40}) is ignored.
const BRIDGE_EXP_CUT: f64 = 40.0;

/// One Gaussian macro step with Brownian-bridge boundary-touch correction.
///
/// If the endpoint lands outside, the crossing is reported directly. If both
/// endpoints are interior, a within-step touch of each boundary is declared
/// with probability exp(-2 d0 d1 / dt), d0 and d1 the start and end distances
/// to that boundary.
pub fn step_with_exit<R: Rng>(x: f64, dt: f64, rng: &mut R) -> (f64, Option<Boundary>) {
    let z: f64 = rng.sample(StandardNormal);
    let x_new = x + z * dt.sqrt();
    if x_new <= 0.0 {
        return (x_new, Some(Boundary::Lower));
    }
    if x_new >= PI {
        return (x_new, Some(Boundary::Upper));
    }
    let e_lower = 2.0 * x * x_new / dt;
    let e_upper = 2.0 * (PI - x) * (PI - x_new) / dt;
    if e_lower > BRIDGE_EXP_CUT && e_upper > BRIDGE_EXP_CUT {
        return (x_new, None);
    }
    let p_lower = (-e_lower).exp();
    let p_upper = (-e_upper).exp();
    let u: f64 = rng.gen();
    if u < p_lower {
        (x_new, Some(Boundary::Lower))
    } else if u < p_lower + p_upper {
        (x_new, Some(Boundary::Upper))
    } else {
        (x_new, None)
    }
}

/// Outcome of racing the two particles to the first boundary hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairExit {
    /// 1-based index of the particle that exited first.
    pub loser: u8,
    /// Exit time, resolved to the macro grid.
    pub time: f64,
    pub survivor_position: f64,
}

const TIE_SUBSTEPS: u32 = 100;

/// Both particles were flagged as exiting within the same macro step:
/// re-run that step at dt/100 and let the first fine-step exit decide.
/// A still-tied outcome is broken uniformly at random.
fn resolve_tie<R: Rng>(x1: f64, x2: f64, dt: f64, rng: &mut R) -> (u8, f64) {
    let fine = dt / f64::from(TIE_SUBSTEPS);
    let (mut y1, mut y2) = (x1, x2);
    for _ in 0..TIE_SUBSTEPS {
        let (n1, e1) = step_with_exit(y1, fine, rng);
        let (n2, e2) = step_with_exit(y2, fine, rng);
        match (e1.is_some(), e2.is_some()) {
            (true, false) => return (1, n2),
            (false, true) => return (2, n1),
            (true, true) => break,
            (false, false) => {
                y1 = n1;
                y2 = n2;
            }
        }
    }
    if rng.gen::<bool>() {
        (1, y2.clamp(f64::MIN_POSITIVE, PI - f64::EPSILON))
    } else {
        (2, y1.clamp(f64::MIN_POSITIVE, PI - f64::EPSILON))
    }
}

/// Simulate two independent particles from (a, b) until the first boundary hit.
pub fn first_exit_pair<R: Rng>(a: f64, b: f64, dt: f64, rng: &mut R) -> PairExit {
    let (mut x1, mut x2) = (a, b);
    let mut steps: u64 = 0;
    loop {
        steps += 1;
        let (n1, e1) = step_with_exit(x1, dt, rng);
        let (n2, e2) = step_with_exit(x2, dt, rng);
        let time = steps as f64 * dt;
        match (e1.is_some(), e2.is_some()) {
            (false, false) => {
                x1 = n1;
                x2 = n2;
            }
            (true, false) => {
                return PairExit {
                    loser: 1,
                    time,
                    survivor_position: n2,
                }
            }
            (false, true) => {
                return PairExit {
                    loser: 2,
                    time,
                    survivor_position: n1,
                }
            }
            (true, true) => {
                let (loser, pos) = resolve_tie(x1, x2, dt, rng);
                return PairExit {
                    loser,
                    time,
                    survivor_position: pos,
                };
            }
        }
    }
}

/// Branch event: at T_k particle m_k survives at position Y_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchEvent {
    pub k: u64,
    pub time: f64,
    pub survivor: u8,
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSample {
    pub time: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone)]
pub struct FvRun {
    pub events: Vec<BranchEvent>,
    pub path: Vec<PathSample>,
    pub dt: f64,
    pub horizon: f64,
}

const EVENT_CAP: u64 = 50_000_000;

/// Incremental driver for the Fleming-Viot pair.
pub struct FlemingViot<R: Rng> {
    pub x1: f64,
    pub x2: f64,
    pub time: f64,
    dt: f64,
    rng: R,
    next_event: u64,
}

impl<R: Rng> FlemingViot<R> {
    pub fn new(a: f64, b: f64, dt: f64, rng: R) -> Result<Self, McError> {
        if !(a > 0.0 && a < PI && b > 0.0 && b < PI) {
            return Err(McError::InvalidParameter(format!(
                "start ({a}, {b}) must be interior to (0, pi)^2"
            )));
        }
        if !(dt > 0.0) {
            return Err(McError::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self {
            x1: a,
            x2: b,
            time: 0.0,
            dt,
            rng,
            next_event: 1,
        })
    }

    /// Advance one macro step. On a boundary hit both particles restart at
    /// the survivor's position and the branch event is returned.
    pub fn advance(&mut self) -> Result<Option<BranchEvent>, McError> {
        let (n1, e1) = step_with_exit(self.x1, self.dt, &mut self.rng);
        let (n2, e2) = step_with_exit(self.x2, self.dt, &mut self.rng);
        self.time += self.dt;
        let branch = match (e1.is_some(), e2.is_some()) {
            (false, false) => {
                self.x1 = n1;
                self.x2 = n2;
                None
            }
            (true, false) => Some((2u8, n2)),
            (false, true) => Some((1u8, n1)),
            (true, true) => {
                let (loser, pos) = resolve_tie(self.x1, self.x2, self.dt, &mut self.rng);
                Some((if loser == 1 { 2 } else { 1 }, pos))
            }
        };
        if let Some((survivor, position)) = branch {
            if self.next_event > EVENT_CAP {
                return Err(McError::EventCap(EVENT_CAP));
            }
            let event = BranchEvent {
                k: self.next_event,
                time: self.time,
                survivor,
                position,
            };
            self.next_event += 1;
            self.x1 = position;
            self.x2 = position;
            return Ok(Some(event));
        }
        Ok(None)
    }
}

/// Run the Fleming-Viot pair to `horizon`, recording every branch event and
/// the pair path at every `stride`-th macro step.
pub fn run_fv<R: Rng>(
    a: f64,
    b: f64,
    horizon: f64,
    dt: f64,
    stride: u64,
    rng: R,
) -> Result<FvRun, McError> {
    if !(horizon > 0.0) {
        return Err(McError::InvalidParameter(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    let stride = stride.max(1);
    let mut fv = FlemingViot::new(a, b, dt, rng)?;
    let mut events = Vec::new();
    let mut path = vec![PathSample {
        time: 0.0,
        x1: a,
        x2: b,
    }];
    let mut step: u64 = 0;
    while fv.time < horizon {
        if let Some(ev) = fv.advance()? {
            events.push(ev);
        }
        step += 1;
        if step % stride == 0 {
            path.push(PathSample {
                time: fv.time,
                x1: fv.x1,
                x2: fv.x2,
            });
        }
    }
    Ok(FvRun {
        events,
        path,
        dt,
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpineInterval {
    pub start: f64,
    pub end: f64,
    /// The particle whose path is the spine on [start, end).
    pub particle: u8,
}

/// The spine assembled from completed branch intervals; the final,
/// never-completed interval is excluded.
#[derive(Debug, Clone)]
pub struct SpinePath {
    pub intervals: Vec<SpineInterval>,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

/// On [T_{k-1}, T_k) the spine is the particle that survives at T_k.
pub fn extract_spine(run: &FvRun) -> Result<SpinePath, McError> {
    if run.events.is_empty() {
        return Err(McError::EmptySpine);
    }
    let mut intervals = Vec::with_capacity(run.events.len());
    let mut start = 0.0;
    for ev in &run.events {
        intervals.push(SpineInterval {
            start,
            end: ev.time,
            particle: ev.survivor,
        });
        start = ev.time;
    }
    let mut times = Vec::new();
    let mut positions = Vec::new();
    let mut iv = 0usize;
    for sample in &run.path {
        while iv < intervals.len() && sample.time >= intervals[iv].end {
            iv += 1;
        }
        if iv >= intervals.len() {
            break;
        }
        times.push(sample.time);
        positions.push(if intervals[iv].particle == 1 {
            sample.x1
        } else {
            sample.x2
        });
    }
    Ok(SpinePath {
        intervals,
        times,
        positions,
    })
}

/// Deterministic parallel map-reduce over replica blocks: results are summed
/// in block order, independent of the worker count.
pub(crate) fn par_blocks<T, F>(blocks: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..blocks).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

pub(crate) const BLOCK: u64 = 4096;

/// Monte Carlo estimate of h(a, b) = P(particle 2 exits first).
pub fn estimate_h_mc(a: f64, b: f64, samples: u64, dt: f64, seed: RngSeed) -> Result<McEstimate, McError> {
    if samples == 0 {
        return Err(McError::InvalidParameter("samples must be > 0".into()));
    }
    let blocks = samples.div_ceil(BLOCK);
    let counts = par_blocks(blocks, |blk| {
        let lo = blk * BLOCK;
        let hi = (lo + BLOCK).min(samples);
        let mut rng = seed.replica(1, blk).rng();
        let mut hits = 0u64;
        for _ in lo..hi {
            if first_exit_pair(a, b, dt, &mut rng).loser == 2 {
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

/// Drift estimate at (a, b): conditional mean of (W_1(dt_probe) - a)/dt_probe
/// over runs where particle 2 exits first. The half-probe column allows a
/// Richardson-style inspection of the O(dt_probe) bias; no extrapolation is
/// performed.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub mean_half_probe: f64,
    pub std_error_half_probe: f64,
    pub qualifying: u64,
    pub samples: u64,
}

pub fn estimate_drift_h(
    a: f64,
    b: f64,
    dt_probe: f64,
    samples: u64,
    seed: RngSeed,
) -> Result<DriftEstimate, McError> {
    if !(dt_probe > 0.0) {
        return Err(McError::InvalidParameter(format!(
            "dt_probe must be > 0, got {dt_probe}"
        )));
    }
    if samples == 0 {
        return Err(McError::InvalidParameter("samples must be > 0".into()));
    }
    let dt = dt_probe / 2.0;
    let blocks = samples.div_ceil(BLOCK);

    #[derive(Default)]
    struct Acc {
        n: u64,
        sum: f64,
        sum_sq: f64,
        sum_half: f64,
        sum_sq_half: f64,
    }

    let accs = par_blocks(blocks, |blk| {
        let lo = blk * BLOCK;
        let hi = (lo + BLOCK).min(samples);
        let mut rng = seed.replica(2, blk).rng();
        let mut acc = Acc::default();
        for _ in lo..hi {
            let (mut w1, mut w2) = (a, b);
            let mut probe_half = f64::NAN;
            let mut probe = f64::NAN;
            let mut decided: Option<u8> = None;
            let mut step: u64 = 0;
            loop {
                step += 1;
                match decided {
                    None => {
                        let (n1, e1) = step_with_exit(w1, dt, &mut rng);
                        let (n2, e2) = step_with_exit(w2, dt, &mut rng);
                        match (e1.is_some(), e2.is_some()) {
                            (false, false) => {
                                w1 = n1;
                                w2 = n2;
                            }
                            (true, false) => decided = Some(1),
                            (false, true) => {
                                decided = Some(2);
                                w1 = n1;
                            }
                            (true, true) => {
                                let (loser, pos) = resolve_tie(w1, w2, dt, &mut rng);
                                decided = Some(loser);
                                if loser == 2 {
                                    w1 = pos;
                                }
                            }
                        }
                    }
                    Some(2) => {
                        // Particle 2 already exited; keep W_1 moving as free
                        // Brownian motion until the probe time is reached.
                        let z: f64 = rng.sample(StandardNormal);
                        w1 += z * dt.sqrt();
                    }
                    Some(_) => break,
                }
                if step == 1 {
                    probe_half = w1;
                }
                if step == 2 {
                    probe = w1;
                    if decided == Some(2) {
                        break;
                    }
                }
                if step > 2 && decided.is_some() {
                    break;
                }
            }
            if decided == Some(2) {
                let d = (probe - a) / dt_probe;
                let dh = (probe_half - a) / (dt_probe / 2.0);
                acc.n += 1;
                acc.sum += d;
                acc.sum_sq += d * d;
                acc.sum_half += dh;
                acc.sum_sq_half += dh * dh;
            }
        }
        acc
    });

    let mut total = Acc::default();
    for a in accs {
        total.n += a.n;
        total.sum += a.sum;
        total.sum_sq += a.sum_sq;
        total.sum_half += a.sum_half;
        total.sum_sq_half += a.sum_sq_half;
    }
    if total.n == 0 {
        return Err(McError::NoQualifyingRuns);
    }
    let n = total.n as f64;
    let mean = total.sum / n;
    let var = (total.sum_sq / n - mean * mean).max(0.0);
    let mean_half = total.sum_half / n;
    let var_half = (total.sum_sq_half / n - mean_half * mean_half).max(0.0);
    Ok(DriftEstimate {
        mean,
        std_error: (var / n).sqrt(),
        mean_half_probe: mean_half,
        std_error_half_probe: (var_half / n).sqrt(),
        qualifying: total.n,
        samples,
    })
}

/// One Euler-Maruyama substep of dX = cot(X) dt + dW. Exposed so tests can
/// drive it with a fixed noise value.
pub fn conditioned_substep(x: f64, dt_local: f64, noise: f64) -> f64 {
    x + (x.cos() / x.sin()) * dt_local + noise * dt_local.sqrt()
}

/// One macro step of the conditioned Brownian motion. Near the boundary the
/// step is subdivided (dt_local = min(dt, (d/4)^2)) and any substep that
/// would exit, by endpoint or by bridge touch, is rejected and resampled.
pub fn conditioned_step<R: Rng>(x: f64, dt: f64, rng: &mut R) -> f64 {
    let mut x = x;
    let mut remaining = dt;
    while remaining > 0.0 {
        let d = x.min(PI - x);
        let dt_local = remaining.min((d / 4.0).powi(2)).max(remaining.min(1e-12));
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let cand = conditioned_substep(x, dt_local, z);
            if cand <= 0.0 || cand >= PI {
                continue;
            }
            let e_lower = 2.0 * x * cand / dt_local;
            let e_upper = 2.0 * (PI - x) * (PI - cand) / dt_local;
            if e_lower < BRIDGE_EXP_CUT || e_upper < BRIDGE_EXP_CUT {
                let u: f64 = rng.gen();
                if u < (-e_lower).exp() + (-e_upper).exp() {
                    continue;
                }
            }
            x = cand;
            break;
        }
        remaining -= dt_local;
    }
    x
}

/// Conditioned Brownian motion sampled at macro steps.
pub fn simulate_conditioned_bm<R: Rng>(
    x0: f64,
    horizon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), McError> {
    if !(x0 > 0.0 && x0 < PI) {
        return Err(McError::InvalidParameter(format!(
            "x0 = {x0} must be interior to (0, pi)"
        )));
    }
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(McError::InvalidParameter("horizon and dt must be > 0".into()));
    }
    let steps = (horizon / dt).ceil() as u64;
    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut xs = Vec::with_capacity(steps as usize + 1);
    let mut x = x0;
    times.push(0.0);
    xs.push(x);
    for s in 1..=steps {
        x = conditioned_step(x, dt, rng);
        times.push(s as f64 * dt);
        xs.push(x);
    }
    Ok((times, xs))
}

/// Time-weighted fraction of the sampled path spent in (0, eps), with
/// trapezoidal weighting of the indicator between consecutive samples.
pub fn occupation_fraction(times: &[f64], xs: &[f64], eps: f64) -> Result<f64, McError> {
    if times.len() != xs.len() || times.len() < 2 {
        return Err(McError::EmptyPath);
    }
    if !(eps > 0.0 && eps <= PI) {
        return Err(McError::InvalidParameter(format!(
            "eps = {eps} must lie in (0, pi]"
        )));
    }
    let ind = |x: f64| if x > 0.0 && x < eps { 1.0 } else { 0.0 };
    let mut occupied = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        occupied += 0.5 * (ind(xs[i - 1]) + ind(xs[i])) * dt;
    }
    let total = times[times.len() - 1] - times[0];
    Ok(occupied / total)
}

/// Streaming occupation of (0, eps) for the conditioned motion; the warm-up
/// prefix of the horizon is simulated but not counted.
pub fn conditioned_occupation<R: Rng>(
    x0: f64,
    horizon: f64,
    dt: f64,
    eps_list: &[f64],
    warmup_fraction: f64,
    rng: &mut R,
) -> Result<OccupationSample, McError> {
    if !(x0 > 0.0 && x0 < PI) {
        return Err(McError::InvalidParameter(format!("x0 = {x0} out of range")));
    }
    let warmup = horizon * warmup_fraction;
    let steps = (horizon / dt).ceil() as u64;
    let mut x = x0;
    let mut prev = x;
    let mut occupied = vec![0.0; eps_list.len()];
    let mut counted = 0.0;
    for s in 1..=steps {
        x = conditioned_step(x, dt, rng);
        let t = s as f64 * dt;
        if t > warmup {
            for (o, &eps) in occupied.iter_mut().zip(eps_list) {
                let i0 = if prev < eps { 1.0 } else { 0.0 };
                let i1 = if x < eps { 1.0 } else { 0.0 };
                *o += 0.5 * (i0 + i1) * dt;
            }
            counted += dt;
        }
        prev = x;
    }
    Ok(OccupationSample {
        occupied,
        counted_time: counted,
        events: 0,
    })
}

/// Occupied time per requested eps, plus the time base it was measured on.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationSample {
    pub occupied: Vec<f64>,
    pub counted_time: f64,
    pub events: u64,
}

/// Streaming spine occupation of (0, eps): occupation is buffered per branch
/// interval for both particles and credited to the survivor when the branch
/// resolves. Only intervals fully inside the counted window contribute; the
/// final incomplete interval is excluded.
pub fn spine_occupation<R: Rng>(
    a: f64,
    b: f64,
    horizon: f64,
    dt: f64,
    eps_list: &[f64],
    warmup_fraction: f64,
    rng: R,
) -> Result<OccupationSample, McError> {
    let mut fv = FlemingViot::new(a, b, dt, rng)?;
    let warmup = horizon * warmup_fraction;
    let m = eps_list.len();
    let mut buf1 = vec![0.0; m];
    let mut buf2 = vec![0.0; m];
    let mut interval_start = 0.0;
    let mut occupied = vec![0.0; m];
    let mut counted = 0.0;
    let mut events = 0u64;
    let (mut p1, mut p2) = (fv.x1, fv.x2);
    while fv.time < horizon {
        let branch = fv.advance()?;
        for i in 0..m {
            let eps = eps_list[i];
            let w1 = 0.5 * ((if p1 < eps { 1.0 } else { 0.0 }) + (if fv.x1 < eps { 1.0 } else { 0.0 }));
            let w2 = 0.5 * ((if p2 < eps { 1.0 } else { 0.0 }) + (if fv.x2 < eps { 1.0 } else { 0.0 }));
            buf1[i] += w1 * dt;
            buf2[i] += w2 * dt;
        }
        p1 = fv.x1;
        p2 = fv.x2;
        if let Some(ev) = branch {
            if interval_start >= warmup {
                let winner = if ev.survivor == 1 { &buf1 } else { &buf2 };
                for i in 0..m {
                    occupied[i] += winner[i];
                }
                counted += ev.time - interval_start;
                events += 1;
            }
            buf1.iter_mut().for_each(|v| *v = 0.0);
            buf2.iter_mut().for_each(|v| *v = 0.0);
            interval_start = ev.time;
        }
    }
    if counted <= 0.0 {
        return Err(McError::TooFewEvents { got: events, need: 1 });
    }
    Ok(OccupationSample {
        occupied,
        counted_time: counted,
        events,
    })
}

/// Time-weighted pair-position histogram and the branch positions of a
/// Fleming-Viot run, for stationarity checks.
#[derive(Debug, Clone)]
pub struct StationaritySample {
    /// bins x bins row-major counts of (x1, x2) occupation time.
    pub histogram: Vec<f64>,
    pub bins: usize,
    pub branch_positions: Vec<f64>,
    pub counted_time: f64,
    pub steps: u64,
}

pub fn fv_stationarity_sample<R: Rng>(
    a: f64,
    b: f64,
    horizon: f64,
    dt: f64,
    bins: usize,
    warmup_fraction: f64,
    rng: R,
) -> Result<StationaritySample, McError> {
    if bins == 0 {
        return Err(McError::InvalidParameter("bins must be > 0".into()));
    }
    let mut fv = FlemingViot::new(a, b, dt, rng)?;
    let warmup = horizon * warmup_fraction;
    let mut histogram = vec![0.0; bins * bins];
    let mut branch_positions = Vec::new();
    let mut counted = 0.0;
    let mut steps = 0u64;
    let scale = bins as f64 / PI;
    while fv.time < horizon {
        let branch = fv.advance()?;
        steps += 1;
        if fv.time > warmup {
            let i = ((fv.x1 * scale) as usize).min(bins - 1);
            let j = ((fv.x2 * scale) as usize).min(bins - 1);
            histogram[i * bins + j] += dt;
            counted += dt;
            if let Some(ev) = branch {
                branch_positions.push(ev.position);
            }
        }
    }
    Ok(StationaritySample {
        histogram,
        bins,
        branch_positions,
        counted_time: counted,
        steps,
    })
}
