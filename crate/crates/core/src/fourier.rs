//! Separation-of-variables series for the harmonic function h on (0,pi)^2
//! (zero on the vertical sides, one on the horizontal sides), its x-derivative,
//! and the drift gap cot(x) - h_x/h, all with certified truncation bounds.

use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FourierError {
    #[error("point ({x}, {y}) is not strictly interior to (0, pi)^2")]
    OutOfDomain { x: f64, y: f64 },
    #[error("series cannot certify tol {tol:e} at y = {y} within {terms} terms (tail bound {tail_bound:e}); use the conformal evaluation")]
    Precision {
        y: f64,
        tol: f64,
        terms: usize,
        tail_bound: f64,
    },
    #[error("h evaluates to {value:e} which is below 10x its tail bound {tail_bound:e}; division unreliable")]
    UnreliableDivision { value: f64, tail_bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A point strictly inside the open square (0, pi)^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquarePoint {
    x: f64,
    y: f64,
}

impl SquarePoint {
    pub fn new(x: f64, y: f64) -> Result<Self, FourierError> {
        if x.is_finite() && y.is_finite() && x > 0.0 && x < PI && y > 0.0 && y < PI {
            Ok(Self { x, y })
        } else {
            Err(FourierError::OutOfDomain { x, y })
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Distance to the nearest horizontal side, the decay rate of the series.
    pub fn horizontal_margin(&self) -> f64 {
        self.y.min(PI - self.y)
    }
}

/// A partial-sum evaluation with a certified bound on the truncated tail.
#[derive(Debug, Clone, Copy)]
pub struct SeriesEvaluation {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

/// One odd-index term of the separation-of-variables expansion, in the
/// textbook (numerically unstable) form. Used to validate the stable
/// evaluation path; `n` must be odd.
#[derive(Debug, Clone, Copy)]
pub struct SeriesTerm {
    pub n: u32,
    pub f_n: f64,
    pub g_n: f64,
    pub a_n: f64,
    pub gamma_k: f64,
}

impl SeriesTerm {
    pub fn new(n: u32, y: f64) -> Result<Self, FourierError> {
        if n % 2 == 0 {
            return Err(FourierError::InvalidParameter(format!(
                "series index must be odd, got {n}"
            )));
        }
        let nf = f64::from(n);
        Ok(Self {
            n,
            f_n: (nf * y).cosh() + (nf * (PI - y)).cosh(),
            g_n: (nf * y).sinh() + (nf * (PI - y)).sinh(),
            a_n: 4.0 / (PI * nf),
            gamma_k: 1.0 / (nf * PI).tanh(),
        })
    }

    /// F_n(y) - coth(n pi) G_n(y), assembled from the raw hyperbolics.
    pub fn coefficient(&self) -> f64 {
        self.f_n - self.gamma_k * self.g_n
    }
}

/// F_n(y) - coth(n pi) G_n(y) in cancellation-free form:
/// (e^{-ny} + e^{-n(pi-y)}) / (1 + e^{-n pi}).
pub fn series_coefficient(n: f64, y: f64) -> f64 {
    ((-n * y).exp() + (-n * (PI - y)).exp()) / (1.0 + (-n * PI).exp())
}

const TERM_CAP: usize = 10_000;

/// Tail bound for the series starting at odd index `n_next`, per-term bound
/// 8/(pi n) e^{-n m} for h (weight_by_n = true) or (8/pi) e^{-n m} for h_x.
fn tail_bound(n_next: f64, margin: f64, weight_by_n: bool) -> f64 {
    let geometric = (-n_next * margin).exp() / (1.0 - (-2.0 * margin).exp());
    if weight_by_n {
        8.0 / (PI * n_next) * geometric
    } else {
        8.0 / PI * geometric
    }
}

fn eval_series<F>(p: SquarePoint, tol: f64, weight_by_n: bool, angular: F) -> Result<SeriesEvaluation, FourierError>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(FourierError::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let margin = p.horizontal_margin();
    let mut sum = 0.0;
    let mut terms = 0usize;
    loop {
        let n = (2 * terms + 1) as f64;
        let coeff = series_coefficient(n, p.y);
        let weight = if weight_by_n { 1.0 / n } else { 1.0 };
        sum += 4.0 / PI * angular(n * p.x) * weight * coeff;
        terms += 1;
        let tail = tail_bound(n + 2.0, margin, weight_by_n);
        if tail <= tol {
            return Ok(SeriesEvaluation {
                value: sum,
                tail_bound: tail,
                terms_used: terms,
            });
        }
        if terms >= TERM_CAP {
            return Err(FourierError::Precision {
                y: p.y,
                tol,
                terms,
                tail_bound: tail,
            });
        }
    }
}

/// h(x, y) as the odd-index sine series, certified to `tol`.
pub fn eval_h(p: SquarePoint, tol: f64) -> Result<SeriesEvaluation, FourierError> {
    eval_series(p, tol, true, f64::sin)
}

/// h_x(x, y) as the odd-index cosine series, certified to `tol`.
pub fn eval_hx(p: SquarePoint, tol: f64) -> Result<SeriesEvaluation, FourierError> {
    eval_series(p, tol, false, f64::cos)
}

/// cot(x) - h_x(x,y)/h(x,y) with the tail bounds propagated into an overall
/// error at most `tol`.
pub fn drift_gap(p: SquarePoint, tol: f64) -> Result<f64, FourierError> {
    if !(tol > 0.0) {
        return Err(FourierError::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let mut component_tol = tol / 8.0;
    for _ in 0..4 {
        let h = eval_h(p, component_tol)?;
        let hx = eval_hx(p, component_tol)?;
        if h.value <= 10.0 * h.tail_bound {
            return Err(FourierError::UnreliableDivision {
                value: h.value,
                tail_bound: h.tail_bound,
            });
        }
        let ratio = hx.value / h.value;
        let denom = h.value - h.tail_bound;
        let propagated = (hx.tail_bound + ratio.abs() * h.tail_bound) / denom;
        if propagated <= tol {
            return Ok(1.0 / p.x.tan() - ratio);
        }
        component_tol /= 16.0;
    }
    Err(FourierError::Precision {
        y: p.y,
        tol,
        terms: TERM_CAP,
        tail_bound: f64::NAN,
    })
}

/// c_t = F_t(pi/4) - coth(t pi) G_t(pi/4), extended to real t > 0.
pub fn c_profile(t: f64) -> Result<f64, FourierError> {
    if !(t > 0.0) {
        return Err(FourierError::InvalidParameter(format!("c_profile requires t > 0, got {t}")));
    }
    Ok(series_coefficient(t, PI / 4.0))
}

/// Closed-form derivative of t -> c_t:
/// -(pi/4) sinh(pi t/4) (cosh(pi t/2) + 2) sech^2(pi t/2).
pub fn c_profile_deriv(t: f64) -> Result<f64, FourierError> {
    if !(t > 0.0) {
        return Err(FourierError::InvalidParameter(format!(
            "c_profile_deriv requires t > 0, got {t}"
        )));
    }
    let q = PI * t / 2.0;
    Ok(-(PI / 4.0) * (PI * t / 4.0).sinh() * (q.cosh() + 2.0) / q.cosh().powi(2))
}

/// Result of the drift-gap lattice scan over (0, pi/2)^2.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub min_gap: f64,
    pub min_point: (f64, f64),
    pub evaluated: usize,
    pub skipped: Vec<(f64, f64)>,
}

/// Evaluates drift_gap on the lattice (step*i, step*j) inside (0, pi/2)^2
/// and returns the minimum. Precision failures are recorded, not fatal.
pub fn verify_thm23(grid_step: f64, tol: f64) -> Result<GridReport, FourierError> {
    if !(grid_step > 0.0 && grid_step < PI / 4.0) {
        return Err(FourierError::InvalidParameter(format!(
            "grid_step must lie in (0, pi/4), got {grid_step}"
        )));
    }
    let max_index = (PI / 2.0 / grid_step).ceil() as usize;
    let mut lattice = Vec::new();
    for i in 1..max_index {
        let x = grid_step * i as f64;
        if x >= PI / 2.0 {
            break;
        }
        for j in 1..max_index {
            let y = grid_step * j as f64;
            if y >= PI / 2.0 {
                break;
            }
            lattice.push((x, y));
        }
    }
    let results: Vec<((f64, f64), Result<f64, FourierError>)> = lattice
        .into_par_iter()
        .map(|(x, y)| {
            let r = SquarePoint::new(x, y).and_then(|p| drift_gap(p, tol));
            ((x, y), r)
        })
        .collect();

    let mut min_gap = f64::INFINITY;
    let mut min_point = (f64::NAN, f64::NAN);
    let mut evaluated = 0usize;
    let mut skipped = Vec::new();
    for (pt, r) in results {
        match r {
            Ok(gap) => {
                evaluated += 1;
                if gap < min_gap {
                    min_gap = gap;
                    min_point = pt;
                }
            }
            Err(_) => skipped.push(pt),
        }
    }
    if evaluated == 0 {
        return Err(FourierError::InvalidParameter(
            "no lattice point could be evaluated".into(),
        ));
    }
    Ok(GridReport {
        min_gap,
        min_point,
        evaluated,
        skipped,
    })
}
