//! Foundation numerics: arithmetic-geometric mean, Gamma(1/4) via the
//! lemniscate relation, adaptive Gauss-Kronrod quadrature along straight
//! complex segments, and complex Newton root finding.

use num_complex::Complex64;
use thiserror::Error;

/// Complex scalar used throughout the analytic modules.
pub type ComplexValue = Complex64;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: error estimate {error_estimate:e} > tol {tol:e} after {evaluations} evaluations")]
    QuadratureConvergence {
        error_estimate: f64,
        tol: f64,
        evaluations: usize,
    },
    #[error("Newton iteration did not converge: |f| = {residual:e} at z = {last_iterate} after {iterations} iterations")]
    NewtonConvergence {
        last_iterate: ComplexValue,
        residual: f64,
        iterations: usize,
    },
    #[error("non-finite value produced: {0}")]
    NonFinite(String),
}

/// Result of an adaptive line integral.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: ComplexValue,
    pub error_estimate: f64,
    pub evaluations: usize,
}

const AGM_MAX_ITER: usize = 64;

/// Common limit of the arithmetic/geometric mean iteration.
///
/// Stops when |a_n - b_n| <= tol * max(1, a_n).
pub fn agm(a: f64, b: f64, tol: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(NumericsError::Domain(format!(
            "agm requires positive inputs, got a = {a}, b = {b}"
        )));
    }
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!("agm requires tol > 0, got {tol}")));
    }
    let (mut a, mut b) = (a, b);
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= tol * a.max(1.0) {
            return Ok(0.5 * (a + b));
        }
        let next_a = 0.5 * (a + b);
        let next_b = (a * b).sqrt();
        a = next_a;
        b = next_b;
    }
    // Quadratic convergence makes 64 iterations unreachable for finite input.
    Ok(0.5 * (a + b))
}

/// Lemniscate constant over two: integral of 1/sqrt(1-t^4) over (0,1).
///
/// The endpoint singularity at t = 1 is removed by t = 1 - s^2, which
/// turns the integrand into the bounded 2/sqrt(4 - 6s^2 + 4s^4 - s^6).
pub fn lemniscate_half(tol: f64) -> Result<QuadratureResult, NumericsError> {
    integrate_line(
        |s| {
            let s2 = (s * s).re;
            let poly = 4.0 - 6.0 * s2 + 4.0 * s2 * s2 - s2 * s2 * s2;
            Complex64::new(2.0 / poly.sqrt(), 0.0)
        },
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        tol,
    )
}

/// Gamma(1/4) via Gauss' AGM: the lemniscate constant is
/// varpi = pi / agm(1, sqrt 2) and Gamma(1/4) = sqrt(2 varpi sqrt(2 pi)).
pub fn gamma_quarter() -> f64 {
    let m = agm(1.0, std::f64::consts::SQRT_2, 1e-15).expect("fixed positive inputs");
    let varpi = std::f64::consts::PI / m;
    (2.0 * varpi * (2.0 * std::f64::consts::PI).sqrt()).sqrt()
}

// Nodes and weights of the 7-point Gauss / 15-point Kronrod pair on [-1, 1],
// as in QUADPACK's qk15. Only nonnegative nodes are listed.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7K15 panel on the parameter interval [t0, t1] of the segment.
fn gk15_panel<F>(f: &F, z0: Complex64, dir: Complex64, t0: f64, t1: f64) -> (Complex64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let center = 0.5 * (t0 + t1);
    let half = 0.5 * (t1 - t0);
    let fc = f(z0 + dir * center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dt = half * XGK[j];
        let f1 = f(z0 + dir * (center - dt));
        let f2 = f(z0 + dir * (center + dt));
        kronrod += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = (kronrod - gauss).norm() * half;
    (value, err)
}

const MAX_PANELS: usize = 4096;

/// Adaptive quadrature of `f` along the straight segment from `z0` to `z1`.
///
/// Nested G7K15 pair per panel, recursive bisection, per-panel error
/// estimate |kronrod - gauss|; the sum of panel estimates is kept below
/// `tol` by always refining the worst panel.
pub fn integrate_line<F>(
    f: F,
    z0: ComplexValue,
    z1: ComplexValue,
    tol: f64,
) -> Result<QuadratureResult, NumericsError>
where
    F: Fn(ComplexValue) -> ComplexValue,
{
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!(
            "integrate_line requires tol > 0, got {tol}"
        )));
    }
    let dir = z1 - z0;
    if dir.norm() == 0.0 {
        return Ok(QuadratureResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            evaluations: 0,
        });
    }

    struct Panel {
        t0: f64,
        t1: f64,
        value: Complex64,
        err: f64,
    }

    let (v, e) = gk15_panel(&f, z0, dir, 0.0, 1.0);
    let mut panels = vec![Panel {
        t0: 0.0,
        t1: 1.0,
        value: v,
        err: e,
    }];
    let mut evaluations = 15usize;

    loop {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err * dir.norm() <= tol {
            let value: Complex64 = panels.iter().map(|p| p.value).sum::<Complex64>() * dir;
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(NumericsError::NonFinite(
                    "integrate_line produced a non-finite value".into(),
                ));
            }
            return Ok(QuadratureResult {
                value,
                error_estimate: total_err * dir.norm(),
                evaluations,
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(NumericsError::QuadratureConvergence {
                error_estimate: total_err * dir.norm(),
                tol,
                evaluations,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.total_cmp(&b.1.err))
            .map(|(i, _)| i)
            .expect("non-empty panel list");
        let Panel { t0, t1, .. } = panels[worst];
        let tm = 0.5 * (t0 + t1);
        let (v1, e1) = gk15_panel(&f, z0, dir, t0, tm);
        let (v2, e2) = gk15_panel(&f, z0, dir, tm, t1);
        evaluations += 30;
        panels[worst] = Panel {
            t0,
            t1: tm,
            value: v1,
            err: e1,
        };
        panels.push(Panel {
            t0: tm,
            t1,
            value: v2,
            err: e2,
        });
    }
}

const NEWTON_MAX_ITER: usize = 100;

/// Newton iteration for a root of an analytic `f`, stopping at |f(z)| <= tol.
pub fn newton_complex<F, G>(
    f: F,
    f_prime: G,
    z_init: ComplexValue,
    tol: f64,
) -> Result<ComplexValue, NumericsError>
where
    F: Fn(ComplexValue) -> ComplexValue,
    G: Fn(ComplexValue) -> ComplexValue,
{
    if !(tol > 0.0) {
        return Err(NumericsError::Domain(format!(
            "newton_complex requires tol > 0, got {tol}"
        )));
    }
    let mut z = z_init;
    for iter in 0..NEWTON_MAX_ITER {
        let fz = f(z);
        let res = fz.norm();
        if !res.is_finite() {
            return Err(NumericsError::NewtonConvergence {
                last_iterate: z,
                residual: res,
                iterations: iter,
            });
        }
        if res <= tol {
            return Ok(z);
        }
        let dz = fz / f_prime(z);
        if !dz.re.is_finite() || !dz.im.is_finite() {
            return Err(NumericsError::NewtonConvergence {
                last_iterate: z,
                residual: res,
                iterations: iter,
            });
        }
        z -= dz;
    }
    Err(NumericsError::NewtonConvergence {
        last_iterate: z,
        residual: f(z).norm(),
        iterations: NEWTON_MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    #[test]
    fn agm_fixed_points() {
        assert_eq!(agm(1.0, 1.0, 1e-15).unwrap(), 1.0);
        assert_eq!(agm(2.0, 2.0, 1e-15).unwrap(), 2.0);
    }

    #[test]
    fn agm_one_sqrt_two() {
        // Oracle: the AGM iteration itself at 1e-15, cross-checked against
        // pi / varpi with varpi from the lemniscate quadrature below.
        let m = agm(1.0, SQRT_2, 1e-15).unwrap();
        assert!((m - 1.1981402347355922).abs() < 1e-14);
        let varpi = 2.0 * lemniscate_half(1e-13).unwrap().value.re;
        assert!((m - PI / varpi).abs() < 1e-12);
    }

    #[test]
    fn agm_rejects_nonpositive() {
        assert!(agm(-1.0, 1.0, 1e-12).is_err());
        assert!(agm(1.0, 0.0, 1e-12).is_err());
        assert!(agm(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gamma_quarter_value() {
        // Independent oracle: 2 * integral_0^1 dt/sqrt(1-t^4) = varpi and
        // Gamma(1/4) = sqrt(2 varpi sqrt(2 pi)).
        let varpi = 2.0 * lemniscate_half(1e-13).unwrap().value.re;
        let oracle = (2.0 * varpi * (2.0 * PI).sqrt()).sqrt();
        let g = gamma_quarter();
        assert!((g - oracle).abs() < 1e-12);
        assert!((g - 3.6256099082219083).abs() < 1e-12);
    }

    #[test]
    fn gamma_quarter_scale_constant() {
        let c = 4.0 * PI.powf(1.5) / gamma_quarter().powi(2);
        assert!((c - 1.69443).abs() < 1e-5);
    }

    #[test]
    fn gamma_quarter_agm_consistency() {
        // Gamma(1/4)^2 * agm(1, sqrt 2) = 2 pi sqrt(2 pi).
        let lhs = gamma_quarter().powi(2) * agm(1.0, SQRT_2, 1e-15).unwrap();
        let rhs = 2.0 * PI * (2.0 * PI).sqrt();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn integrate_constant() {
        let r = integrate_line(
            |_| Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            1e-12,
        )
        .unwrap();
        assert!((r.value.re - 1.0).abs() < 1e-14);
        assert!(r.value.im.abs() < 1e-14);
    }

    #[test]
    fn integrate_lemniscate_endpoint() {
        let r = lemniscate_half(1e-12).unwrap();
        assert!((r.value.re - 1.3110287771460599).abs() < 1e-11);
        assert!(r.error_estimate <= 1e-12);
    }

    #[test]
    fn integrate_diagonal_ray() {
        // integral of 1/sqrt(1+w^4) along [0, r e^{i pi/4}] equals
        // e^{i pi/4} * integral_0^r dt/sqrt(1-t^4).
        let r = 0.5;
        let end = Complex64::from_polar(r, FRAC_PI_4);
        let lhs = integrate_line(
            |w| 1.0 / (Complex64::new(1.0, 0.0) + w.powi(4)).sqrt(),
            Complex64::new(0.0, 0.0),
            end,
            1e-12,
        )
        .unwrap()
        .value;
        let real_part = integrate_line(
            |t| 1.0 / (Complex64::new(1.0, 0.0) - t.powi(4)).sqrt(),
            Complex64::new(0.0, 0.0),
            Complex64::new(r, 0.0),
            1e-12,
        )
        .unwrap()
        .value;
        let rhs = Complex64::from_polar(1.0, FRAC_PI_4) * real_part;
        assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn integrate_exact_for_low_degree_polynomials() {
        // G7K15 integrates polynomials up to degree 22 exactly; spot-check a
        // few monomials on [0,1] against 1/(k+1).
        for k in 0..=10u32 {
            let r = integrate_line(
                |t| t.powu(k),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                1e-12,
            )
            .unwrap();
            assert!(
                (r.value.re - 1.0 / f64::from(k + 1)).abs() < 1e-14,
                "degree {k}"
            );
        }
    }

    #[test]
    fn integrate_rejects_bad_tol() {
        let r = integrate_line(
            |_| Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            -1.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn newton_linear_and_quadratic() {
        let root = newton_complex(|z| z, |_| Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.1), 1e-14)
            .unwrap();
        assert!(root.norm() < 1e-13);

        let root = newton_complex(
            |z| z * z - 1.0,
            |z| 2.0 * z,
            Complex64::new(0.9, 0.0),
            1e-14,
        )
        .unwrap();
        assert!((root - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn newton_divergence_reports_last_iterate() {
        // f(z) = z^2 + 1 from a real start oscillates on the real line and
        // never reaches a root; expect a convergence error.
        let r = newton_complex(
            |z| z * z + 1.0,
            |z| 2.0 * z,
            Complex64::new(1.0, 0.0),
            1e-14,
        );
        match r {
            Err(NumericsError::NewtonConvergence { .. }) => {}
            other => panic!("expected NewtonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn newton_inverts_phi_roundtrip() {
        // Invert w -> integral_0^w dz/sqrt(1+z^4) at w = 0.5i.
        let phi = |w: Complex64| {
            integrate_line(
                |z| 1.0 / (Complex64::new(1.0, 0.0) + z.powi(4)).sqrt(),
                Complex64::new(0.0, 0.0),
                w,
                1e-13,
            )
            .unwrap()
            .value
        };
        let target = phi(Complex64::new(0.0, 0.5));
        let root = newton_complex(
            |z| phi(z) - target,
            |z| 1.0 / (Complex64::new(1.0, 0.0) + z.powi(4)).sqrt(),
            Complex64::new(0.0, 0.4),
            1e-12,
        )
        .unwrap();
        assert!((root - Complex64::new(0.0, 0.5)).norm() < 1e-10);
    }
}
