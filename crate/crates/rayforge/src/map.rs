//! Entire map families: evaluation and analytic derivatives.
//!
//! Three families are supported: the exponential family `λ e^z`, the
//! cosine family `a e^z + b e^{-z}`, and a scaled version of the
//! Bergweiler–Fagella-type example map (see [`MapSpec::ScaledBf`]).
//! All arithmetic is in `f64`; non-finite results are reported as
//! [`EvalError::Overflow`] instead of being propagated as NaN/inf.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

/// Degree of the local Taylor model used at the two removable
/// singularities of the scaled example map.
const BF_TAYLOR_DEGREE: usize = 8;
/// Switch to the Taylor model inside this radius of a singular point.
const BF_TAYLOR_RADIUS: f64 = 1e-3;
/// Sampling radius for the discrete Cauchy integrals that produce the
/// Taylor coefficients.
const BF_SAMPLE_RADIUS: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MapError {
    #[error("parameter must be nonzero")]
    ZeroParameter,
    #[error("scale must satisfy alpha >= 1, got {0}")]
    ScaleOutOfRange(f64),
    #[error("parameter must be finite")]
    NonFiniteParameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    /// The result (or a required intermediate) does not fit in an f64.
    /// Consumers treat this as "escaped beyond any radius".
    #[error("evaluation overflowed f64 range")]
    Overflow,
}

pub type EvalResult = Result<Complex64, EvalError>;

/// An explicit entire map with parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum MapSpec {
    /// `z ↦ λ e^z`, `λ ≠ 0`.
    Exp { lambda: Complex64 },
    /// `z ↦ a e^z + b e^{-z}`, `a, b ≠ 0`.
    Cosine { a: Complex64, b: Complex64 },
    /// `z ↦ α f(z)` where `f` is the example map
    /// `f(z) = (12π²/(5π²−48)) · ( ((π²−8)z + 2π²)/(z(4z−π²)) · cos√z + 2/z )`,
    /// entire after removing the singularities at `z = 0` and `z = π²/4`;
    /// `α ≥ 1`.
    ScaledBf { alpha: f64 },
}

impl MapSpec {
    pub fn exp(lambda: Complex64) -> Result<Self, MapError> {
        let m = MapSpec::Exp { lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn cosine(a: Complex64, b: Complex64) -> Result<Self, MapError> {
        let m = MapSpec::Cosine { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn scaled_bf(alpha: f64) -> Result<Self, MapError> {
        let m = MapSpec::ScaledBf { alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        match *self {
            MapSpec::Exp { lambda } => {
                if !lambda.re.is_finite() || !lambda.im.is_finite() {
                    return Err(MapError::NonFiniteParameter);
                }
                if lambda.norm() == 0.0 {
                    return Err(MapError::ZeroParameter);
                }
            }
            MapSpec::Cosine { a, b } => {
                for p in [a, b] {
                    if !p.re.is_finite() || !p.im.is_finite() {
                        return Err(MapError::NonFiniteParameter);
                    }
                    if p.norm() == 0.0 {
                        return Err(MapError::ZeroParameter);
                    }
                }
            }
            MapSpec::ScaledBf { alpha } => {
                if !alpha.is_finite() {
                    return Err(MapError::NonFiniteParameter);
                }
                if alpha < 1.0 {
                    return Err(MapError::ScaleOutOfRange(alpha));
                }
            }
        }
        Ok(())
    }

    /// Evaluate `f(z)`.
    pub fn evaluate(&self, z: Complex64) -> EvalResult {
        let w = match *self {
            MapSpec::Exp { lambda } => lambda * z.exp(),
            MapSpec::Cosine { a, b } => a * z.exp() + b * (-z).exp(),
            MapSpec::ScaledBf { alpha } => Complex64::new(alpha, 0.0) * bf_eval(z),
        };
        finite_or_overflow(w)
    }

    /// Analytic derivative `f'(z)`.
    pub fn derivative(&self, z: Complex64) -> EvalResult {
        let w = match *self {
            // (λ e^z)' = λ e^z
            MapSpec::Exp { lambda } => lambda * z.exp(),
            MapSpec::Cosine { a, b } => a * z.exp() - b * (-z).exp(),
            MapSpec::ScaledBf { alpha } => Complex64::new(alpha, 0.0) * bf_derivative(z),
        };
        finite_or_overflow(w)
    }

    /// `f^n(z)` together with the chain-rule derivative `(f^n)'(z)`.
    pub fn iterate_with_derivative(&self, z: Complex64, n: usize) -> Result<(Complex64, Complex64), EvalError> {
        let mut w = z;
        let mut d = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            d *= self.derivative(w)?;
            w = self.evaluate(w)?;
            finite_or_overflow(d)?;
        }
        Ok((w, d))
    }

    /// `f^n(z)`.
    pub fn iterate(&self, z: Complex64, n: usize) -> EvalResult {
        let mut w = z;
        for _ in 0..n {
            w = self.evaluate(w)?;
        }
        Ok(w)
    }
}

fn finite_or_overflow(w: Complex64) -> EvalResult {
    if w.re.is_finite() && w.im.is_finite() {
        Ok(w)
    } else {
        Err(EvalError::Overflow)
    }
}

/// `cos √z`, entire in `z` (cos is even, so the sqrt branch cancels).
fn cos_sqrt(z: Complex64) -> Complex64 {
    z.sqrt().cos()
}

/// `d/dz cos √z = −sin(√z)/(2√z)`, also branch-independent.
fn cos_sqrt_deriv(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.norm() < 1e-8 {
        // sin(s)/s = 1 - s²/6 + ...
        let s2 = s * s;
        -(Complex64::new(1.0, 0.0) - s2 / 6.0 + s2 * s2 / 120.0) / 2.0
    } else {
        -s.sin() / (2.0 * s)
    }
}

fn bf_leading_constant() -> f64 {
    12.0 * PI * PI / (5.0 * PI * PI - 48.0)
}

/// Raw formula, valid away from z = 0 and z = π²/4.
fn bf_raw(z: Complex64) -> Complex64 {
    let pi2 = PI * PI;
    let num = (pi2 - 8.0) * z + 2.0 * pi2;
    let den = z * (4.0 * z - pi2);
    bf_leading_constant() * (num / den * cos_sqrt(z) + 2.0 / z)
}

/// Closed-form derivative of the raw formula.
fn bf_raw_derivative(z: Complex64) -> Complex64 {
    let pi2 = PI * PI;
    let num = (pi2 - 8.0) * z + 2.0 * pi2;
    let num_d = Complex64::new(pi2 - 8.0, 0.0);
    let den = z * (4.0 * z - pi2);
    let den_d = 8.0 * z - pi2;
    let g = num / den;
    let g_d = (num_d * den - num * den_d) / (den * den);
    bf_leading_constant() * (g_d * cos_sqrt(z) + g * cos_sqrt_deriv(z) - 2.0 / (z * z))
}

struct BfExpansion {
    center: f64,
    coeffs: [Complex64; BF_TAYLOR_DEGREE + 1],
}

impl BfExpansion {
    /// Taylor coefficients by a discrete Cauchy integral on a circle of
    /// radius [`BF_SAMPLE_RADIUS`] where the raw formula is well
    /// conditioned.
    fn compute(center: f64) -> Self {
        const N: usize = 64;
        let mut samples = [Complex64::new(0.0, 0.0); N];
        for (m, s) in samples.iter_mut().enumerate() {
            let ang = 2.0 * PI * m as f64 / N as f64;
            let z = Complex64::new(center, 0.0) + BF_SAMPLE_RADIUS * Complex64::new(ang.cos(), ang.sin());
            *s = bf_raw(z);
        }
        let mut coeffs = [Complex64::new(0.0, 0.0); BF_TAYLOR_DEGREE + 1];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, s) in samples.iter().enumerate() {
                let ang = -2.0 * PI * (k * m) as f64 / N as f64;
                acc += s * Complex64::new(ang.cos(), ang.sin());
            }
            *c = acc / (N as f64 * BF_SAMPLE_RADIUS.powi(k as i32));
        }
        BfExpansion { center, coeffs }
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        let dz = z - Complex64::new(self.center, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * dz + c;
        }
        acc
    }

    fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let dz = z - Complex64::new(self.center, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * dz + k as f64 * c;
        }
        acc
    }
}

fn bf_expansions() -> &'static (BfExpansion, BfExpansion) {
    static CELL: OnceLock<(BfExpansion, BfExpansion)> = OnceLock::new();
    CELL.get_or_init(|| {
        (
            BfExpansion::compute(0.0),
            BfExpansion::compute(PI * PI / 4.0),
        )
    })
}

fn bf_near_singularity(z: Complex64) -> Option<&'static BfExpansion> {
    let (at_zero, at_quarter) = bf_expansions();
    if (z - Complex64::new(0.0, 0.0)).norm() < BF_TAYLOR_RADIUS {
        Some(at_zero)
    } else if (z - Complex64::new(PI * PI / 4.0, 0.0)).norm() < BF_TAYLOR_RADIUS {
        Some(at_quarter)
    } else {
        None
    }
}

fn bf_eval(z: Complex64) -> Complex64 {
    match bf_near_singularity(z) {
        Some(exp) => exp.eval(z),
        None => bf_raw(z),
    }
}

fn bf_derivative(z: Complex64) -> Complex64 {
    match bf_near_singularity(z) {
        Some(exp) => exp.eval_derivative(z),
        None => bf_raw_derivative(z),
    }
}
