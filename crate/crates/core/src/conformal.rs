//! Closed-form evaluation of h and its derivatives through the
//! Schwarz-Christoffel chain: the disk maps onto (0,pi)^2 via
//! z -> c * integral_0^z dw/sqrt(1+w^4) + pi(1+i)/2, and h pulls back to an
//! explicit argument function on the disk.

use crate::fourier::SquarePoint;
use crate::numerics::{self, ComplexValue, NumericsError};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("point {z} is not strictly inside the unit disk")]
    OutsideDisk { z: ComplexValue },
    #[error("mapped point {z} is within 1e-12 of the square boundary")]
    NearBoundary { z: ComplexValue },
    #[error("half-plane coordinates t = {t}, alpha = {alpha} violate t > 1, |alpha| < pi/2")]
    BadHalfPlane { t: f64, alpha: f64 },
    #[error("psi Newton inversion failed from every seed for square point ({x}, {y}): {last}")]
    InversionFailed { x: f64, y: f64, last: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("internal consistency: {0}")]
    Inconsistent(String),
}

/// Margin keeping evaluation strictly inside the disk; the integrand's
/// branch points sit on |w| = 1.
pub const DISK_MARGIN: f64 = 1e-9;

/// A point strictly inside the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint {
    z: ComplexValue,
}

impl DiskPoint {
    pub fn new(z: ComplexValue) -> Result<Self, ConformalError> {
        if z.re.is_finite() && z.im.is_finite() && z.norm() <= 1.0 - DISK_MARGIN {
            Ok(Self { z })
        } else {
            Err(ConformalError::OutsideDisk { z })
        }
    }

    pub fn value(&self) -> ComplexValue {
        self.z
    }
}

/// Scale constant of the map, c = 4 pi^{3/2} Gamma(1/4)^{-2}.
#[derive(Debug, Clone, Copy)]
pub struct MapConstants {
    pub c: f64,
}

impl MapConstants {
    pub fn compute() -> Self {
        let c = 4.0 * PI.powf(1.5) / numerics::gamma_quarter().powi(2);
        Self { c }
    }

    /// Residual of the diagonal identity 2c * integral_0^1 dt/sqrt(1-t^4) = sqrt(2) pi.
    pub fn diagonal_residual(&self, tol: f64) -> Result<f64, ConformalError> {
        let half = numerics::lemniscate_half(tol)?;
        Ok(2.0 * self.c * half.value.re - std::f64::consts::SQRT_2 * PI)
    }
}

/// Coordinates w = t e^{i alpha} on {Re w > 0, |w| > 1}, the image of the
/// upper half disk under rho -> (i+rho)/(i-rho).
#[derive(Debug, Clone, Copy)]
pub struct HalfPlaneCoord {
    t: f64,
    alpha: f64,
}

impl HalfPlaneCoord {
    pub fn new(t: f64, alpha: f64) -> Result<Self, ConformalError> {
        if t.is_finite() && alpha.is_finite() && t > 1.0 && alpha.abs() < FRAC_PI_2 {
            Ok(Self { t, alpha })
        } else {
            Err(ConformalError::BadHalfPlane { t, alpha })
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn sqrt_one_plus_z4(z: ComplexValue) -> ComplexValue {
    // |z| < 1 keeps 1 + z^4 in the right half plane, so the principal
    // branch is continuous along any segment from 0.
    (Complex64::new(1.0, 0.0) + z.powi(4)).sqrt()
}

/// phi(z) = integral_0^z dw / sqrt(1 + w^4) along the straight segment.
pub fn phi(z: DiskPoint, tol: f64) -> Result<ComplexValue, ConformalError> {
    let r = numerics::integrate_line(
        |w| 1.0 / sqrt_one_plus_z4(w),
        Complex64::new(0.0, 0.0),
        z.value(),
        tol,
    )?;
    Ok(r.value)
}

/// phi'(z) = 1 / sqrt(1 + z^4).
pub fn phi_deriv(z: ComplexValue) -> ComplexValue {
    1.0 / sqrt_one_plus_z4(z)
}

fn square_center() -> ComplexValue {
    Complex64::new(FRAC_PI_2, FRAC_PI_2)
}

/// psi^{-1}(z) = c phi(z) + pi(1+i)/2, mapping the disk onto (0,pi)^2.
pub fn psi_inverse(z: DiskPoint, consts: &MapConstants, tol: f64) -> Result<ComplexValue, ConformalError> {
    let w = consts.c * phi(z, tol)? + square_center();
    let margin = w.re.min(PI - w.re).min(w.im).min(PI - w.im);
    if margin < 1e-12 {
        return Err(ConformalError::NearBoundary { z: w });
    }
    Ok(w)
}

/// Newton inversion of psi_inverse: the disk point mapping to `q`.
pub fn psi(q: SquarePoint, consts: &MapConstants, tol: f64) -> Result<DiskPoint, ConformalError> {
    let target = Complex64::new(q.x(), q.y());
    let objective = |z: ComplexValue| -> ComplexValue {
        let zc = clamp_to_disk(z);
        let integral = numerics::integrate_line(
            |w| 1.0 / sqrt_one_plus_z4(w),
            Complex64::new(0.0, 0.0),
            zc,
            tol * 1e-2,
        )
        .map(|r| r.value)
        .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        consts.c * integral + square_center() - target
    };
    let derivative = |z: ComplexValue| consts.c * phi_deriv(clamp_to_disk(z));

    // phi'(0) = 1 makes the linearization around the center accurate.
    let mut seeds = vec![(target - square_center()) / consts.c];
    for k in 0..8 {
        seeds.push(Complex64::from_polar(0.5, PI / 4.0 * k as f64));
    }

    let mut last_err = String::new();
    for seed in seeds {
        match numerics::newton_complex(&objective, &derivative, clamp_to_disk(seed), tol) {
            Ok(root) => {
                let root = clamp_to_disk(root);
                return DiskPoint::new(root);
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(ConformalError::InversionFailed {
        x: q.x(),
        y: q.y(),
        last: last_err,
    })
}

fn clamp_to_disk(z: ComplexValue) -> ComplexValue {
    let n = z.norm();
    let cap = 1.0 - DISK_MARGIN;
    if n > cap {
        z * (cap / n)
    } else {
        z
    }
}

/// u(z) = Re(-(i/pi) log((i+z^2)/(i-z^2)) + 1/2) = arg((i+z^2)/(i-z^2))/pi + 1/2.
///
/// The Moebius image lies in the right half plane, so the principal branch
/// of the logarithm is continuous on the disk.
pub fn u_disk(z: DiskPoint) -> f64 {
    let z2 = z.value() * z.value();
    let i = Complex64::new(0.0, 1.0);
    let m = (i + z2) / (i - z2);
    m.arg() / PI + 0.5
}

/// h(q) = u(psi(q)), the closed-form route to the harmonic function.
pub fn h_conformal(q: SquarePoint, consts: &MapConstants, tol: f64) -> Result<f64, ConformalError> {
    Ok(u_disk(psi(q, consts, tol)?))
}

/// (h_x, h_y) at the square point psi_inverse(z), from
/// h_x - i h_y = -(4/(c pi)) z / sqrt(1 + z^4).
pub fn grad_h_conformal(z: DiskPoint, consts: &MapConstants) -> (f64, f64) {
    let expr = -(4.0 / (consts.c * PI)) * z.value() / sqrt_one_plus_z4(z.value());
    (expr.re, -expr.im)
}

/// (h h_xy - h_x h_y) o psi^{-1} in the (t, alpha) coordinates:
/// (2/(c^2 pi^2)) ((alpha + pi/2) sin alpha + cos alpha) (t - 1/t).
pub fn mixed_identity(hp: HalfPlaneCoord, consts: &MapConstants) -> f64 {
    let g = (hp.alpha() + FRAC_PI_2) * hp.alpha().sin() + hp.alpha().cos();
    2.0 / (consts.c * consts.c * PI * PI) * g * (hp.t() - 1.0 / hp.t())
}

/// Pull a half-plane coordinate back to its square point through
/// w -> rho = i(w-1)/(w+1) -> z = -sqrt(rho) -> c phi(z) + pi(1+i)/2.
///
/// The sign of the square root picks the root in the lower-left quarter of
/// the disk, which is the image of the south-west quarter of the square.
pub fn square_point_from_halfplane(
    hp: HalfPlaneCoord,
    consts: &MapConstants,
    tol: f64,
) -> Result<SquarePoint, ConformalError> {
    let w = Complex64::from_polar(hp.t(), hp.alpha());
    let i = Complex64::new(0.0, 1.0);
    let rho = i * (w - 1.0) / (w + 1.0);
    let z = -rho.sqrt();
    let disk = DiskPoint::new(z)?;
    let q = psi_inverse(disk, consts, tol)?;
    SquarePoint::new(q.re, q.im).map_err(|_| ConformalError::NearBoundary {
        z: q,
    })
}

/// K(x) = h_x(x + i pi/2) sin x - h(x + i pi/2) cos x on the horizontal midline.
pub fn k_profile(x: f64, consts: &MapConstants, tol: f64) -> Result<f64, ConformalError> {
    if !(x > 0.0 && x < FRAC_PI_2) {
        return Err(ConformalError::Inconsistent(format!(
            "K is defined on (0, pi/2), got x = {x}"
        )));
    }
    let q = SquarePoint::new(x, FRAC_PI_2).map_err(|_| ConformalError::Inconsistent(
        format!("midline point ({x}, pi/2) rejected"),
    ))?;
    let z = psi(q, consts, tol)?;
    let h = u_disk(z);
    let (hx, _) = grad_h_conformal(z, consts);
    Ok(hx * x.sin() - h * x.cos())
}

/// Roots of p(t) = t^4 - (8/c^2) t^2 + 1.
#[derive(Debug, Clone, Copy)]
pub struct PolyRoots {
    pub t_sq_small: f64,
    pub t_sq_large: f64,
    /// The single root of p in (-1, 0).
    pub t0: f64,
}

pub fn p_poly_roots(consts: &MapConstants) -> Result<PolyRoots, ConformalError> {
    if !(consts.c < 2.0) {
        return Err(ConformalError::Inconsistent(format!(
            "expected c < 2, got c = {}",
            consts.c
        )));
    }
    let s = 4.0 / (consts.c * consts.c);
    let disc = s * s - 1.0;
    if disc <= 0.0 {
        return Err(ConformalError::Inconsistent(
            "discriminant of p(t) in t^2 is non-positive, contradicting c < 2".into(),
        ));
    }
    let t_sq_small = s - disc.sqrt();
    let t_sq_large = s + disc.sqrt();
    Ok(PolyRoots {
        t_sq_small,
        t_sq_large,
        t0: -t_sq_small.sqrt(),
    })
}

#[derive(Debug, Clone)]
pub struct Prop43Report {
    pub pass: bool,
    pub min_mixed: f64,
    pub max_monotonicity_violation: f64,
    pub grid_points: usize,
}

/// Proposition: y -> h_x/h is nondecreasing on (0, pi/2) for fixed x.
/// Checked through the sign of the mixed identity on a (t, alpha) grid and
/// by direct sampling of h_x/h along vertical lines.
pub fn verify_prop43(
    t_grid: usize,
    alpha_grid: usize,
    consts: &MapConstants,
    tol: f64,
) -> Result<Prop43Report, ConformalError> {
    let mut min_mixed = f64::INFINITY;
    let mut grid_points = 0usize;
    for i in 0..t_grid {
        let t = 1.0 + (49.0 * (i as f64 + 1.0)) / t_grid as f64;
        for j in 0..alpha_grid {
            let alpha = -FRAC_PI_2 + PI * (j as f64 + 0.5) / alpha_grid as f64;
            let m = mixed_identity(HalfPlaneCoord::new(t, alpha)?, consts);
            min_mixed = min_mixed.min(m);
            grid_points += 1;
        }
    }

    // Direct sampled monotonicity of y -> h_x/h at a few fixed x.
    let mut max_violation: f64 = 0.0;
    for &x in &[0.4, 0.8, 1.2] {
        let mut last = f64::NEG_INFINITY;
        for j in 1..12 {
            let y = FRAC_PI_2 * j as f64 / 12.0;
            let q = SquarePoint::new(x, y).map_err(|_| ConformalError::Inconsistent(
                format!("grid point ({x}, {y}) rejected"),
            ))?;
            let z = psi(q, consts, tol)?;
            let h = u_disk(z);
            let (hx, _) = grad_h_conformal(z, consts);
            let ratio = hx / h;
            if ratio < last {
                max_violation = max_violation.max(last - ratio);
            }
            last = ratio;
        }
    }

    Ok(Prop43Report {
        pass: min_mixed >= 0.0 && max_violation <= 1e-9,
        min_mixed,
        max_monotonicity_violation: max_violation,
        grid_points,
    })
}

#[derive(Debug, Clone)]
pub struct Prop44Report {
    pub pass: bool,
    pub max_k: f64,
    pub endpoint_left: f64,
    pub endpoint_right: f64,
    pub grid_points: usize,
}

/// Proposition: K < 0 on the open midline segment, with K -> 0 at both ends.
pub fn verify_prop44(grid_points: usize, consts: &MapConstants, tol: f64) -> Result<Prop44Report, ConformalError> {
    let lo = 0.01;
    let hi = FRAC_PI_2 - 0.01;
    let mut max_k = f64::NEG_INFINITY;
    for i in 0..grid_points {
        let x = lo + (hi - lo) * i as f64 / (grid_points - 1) as f64;
        max_k = max_k.max(k_profile(x, consts, tol)?);
    }
    let endpoint_left = k_profile(0.01, consts, tol)?;
    let endpoint_right = k_profile(FRAC_PI_2 - 1e-5, consts, tol)?;
    Ok(Prop44Report {
        pass: max_k < 0.0 && endpoint_left.abs() <= 1e-6 && endpoint_right.abs() <= 1e-6,
        max_k,
        endpoint_left,
        endpoint_right,
        grid_points,
    })
}
