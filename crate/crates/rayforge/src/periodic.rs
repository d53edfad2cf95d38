//! Periodic point search by damped Newton iteration on `f^p(z) − z`,
//! multiplier computation, and cycle classification.

use crate::geometry::Rect;
use crate::map::MapSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Classification band around |μ| = 1.
pub const CLASS_EPS: f64 = 1e-6;
/// |μ| below this is reported superattracting.
pub const SUPERATTRACTING_EPS: f64 = 1e-12;
/// Largest root-of-unity order probed before giving up on "parabolic".
pub const PARABOLIC_MAX_ORDER: u32 = 64;
/// Residual each accepted record must satisfy.
pub const NEWTON_RESIDUAL_TOL: f64 = 1e-10;
/// Records closer than this are considered duplicates.
pub const DEDUP_DISTANCE: f64 = 1e-8;
/// Closure tolerance for cycle_multiplier input.
pub const CYCLE_CLOSURE_TOL: f64 = 1e-8;

const NEWTON_MAX_ITER: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Attracting,
    Superattracting,
    Repelling,
    Parabolic,
    IrrationallyIndifferent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPointRecord {
    pub point: Complex64,
    /// Minimal period (verified: no earlier return within tolerance).
    pub period: usize,
    /// (f^period)'(point).
    pub multiplier: Complex64,
    pub class: PointClass,
    /// |f^period(point) − point| at the reported point.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CycleError {
    #[error("input list does not close up under the map (residual {0})")]
    NotACycle(f64),
}

/// Classify a multiplier per the |μ| bands; near the unit circle the verdict
/// is Parabolic when μ is within [`CLASS_EPS`] of a root of unity of order
/// at most [`PARABOLIC_MAX_ORDER`], else irrationally indifferent.
pub fn classify(mu: Complex64) -> PointClass {
    let m = mu.norm();
    if m < SUPERATTRACTING_EPS {
        return PointClass::Superattracting;
    }
    if m < 1.0 - CLASS_EPS {
        return PointClass::Attracting;
    }
    if m > 1.0 + CLASS_EPS {
        return PointClass::Repelling;
    }
    for q in 1..=PARABOLIC_MAX_ORDER {
        for p in 0..q {
            if gcd(p, q) != 1 && !(p == 0 && q == 1) {
                continue;
            }
            let root = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * p as f64 / q as f64);
            if (mu - root).norm() < CLASS_EPS {
                return PointClass::Parabolic;
            }
        }
    }
    PointClass::IrrationallyIndifferent
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Multiplier of a numerically closed cycle: the product of `f'` over the
/// cycle points, which is `(f^n)'` at any of them by the chain rule.
pub fn cycle_multiplier(map: &MapSpec, cycle: &[Complex64]) -> Result<Complex64, CycleError> {
    assert!(!cycle.is_empty());
    let mut worst = 0.0f64;
    for i in 0..cycle.len() {
        let next = cycle[(i + 1) % cycle.len()];
        let image = map
            .evaluate(cycle[i])
            .map_err(|_| CycleError::NotACycle(f64::INFINITY))?;
        worst = worst.max((image - next).norm());
    }
    if worst >= CYCLE_CLOSURE_TOL {
        return Err(CycleError::NotACycle(worst));
    }
    let mut mu = Complex64::new(1.0, 0.0);
    for &z in cycle {
        mu *= map.derivative(z).map_err(|_| CycleError::NotACycle(worst))?;
    }
    Ok(mu)
}

/// One damped Newton run on `f^period(z) − z` from `seed`.
/// The step is halved (up to 6 times) whenever the residual increases,
/// and the iteration keeps polishing while the residual still improves.
fn newton_periodic(map: &MapSpec, period: usize, seed: Complex64) -> Option<Complex64> {
    let mut z = seed;
    let mut best_res = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let (fz, dz) = map.iterate_with_derivative(z, period).ok()?;
        let g = fz - z;
        let res = g.norm();
        if res >= best_res && res < 1e-13 * (1.0 + z.norm()) {
            break; // stagnated at the noise floor
        }
        best_res = best_res.min(res);
        let denom = dz - Complex64::new(1.0, 0.0);
        if denom.norm() < 1e-300 {
            return None;
        }
        let mut step = -g / denom;
        if !step.re.is_finite() || !step.im.is_finite() {
            return None;
        }
        let mut accepted = false;
        for _ in 0..6 {
            let cand = z + step;
            match map.iterate_with_derivative(cand, period) {
                Ok((fc, _)) if (fc - cand).norm() <= res || res < 1e-14 => {
                    z = cand;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !accepted {
            z += step;
        }
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
    }
    let (fz, _) = map.iterate_with_derivative(z, period).ok()?;
    ((fz - z).norm() < NEWTON_RESIDUAL_TOL).then_some(z)
}

/// Verify minimality: no intermediate iterate returns to the point.
fn minimal_period(map: &MapSpec, z: Complex64, period: usize) -> bool {
    let mut w = z;
    for _ in 1..period {
        w = match map.evaluate(w) {
            Ok(w) => w,
            Err(_) => return false,
        };
        if (w - z).norm() < DEDUP_DISTANCE {
            return false;
        }
    }
    true
}

fn record_for(map: &MapSpec, z: Complex64, period: usize) -> Option<PeriodicPointRecord> {
    let (fz, mu) = map.iterate_with_derivative(z, period).ok()?;
    let residual = (fz - z).norm();
    (residual < NEWTON_RESIDUAL_TOL).then(|| PeriodicPointRecord {
        point: z,
        period,
        multiplier: mu,
        class: classify(mu),
        residual,
    })
}

/// Newton search seeded on a `grid_density × grid_density` grid over
/// `search_box`. Roots that leave the box, fail the residual bound, or are
/// not of minimal period are dropped; survivors are deduplicated at
/// [`DEDUP_DISTANCE`] and returned sorted by (re, im). The result does not
/// depend on evaluation order, so the parallel and sequential paths agree.
pub fn find_periodic_points(
    map: &MapSpec,
    period: usize,
    search_box: Rect,
    grid_density: usize,
) -> Vec<PeriodicPointRecord> {
    assert!(period >= 1);
    assert!(!search_box.is_degenerate(), "search box must be non-degenerate");
    assert!(grid_density >= 1);

    let seeds: Vec<Complex64> = (0..grid_density * grid_density)
        .map(|i| {
            let gx = i % grid_density;
            let gy = i / grid_density;
            Complex64::new(
                search_box.re_min + (gx as f64 + 0.5) * search_box.width() / grid_density as f64,
                search_box.im_min + (gy as f64 + 0.5) * search_box.height() / grid_density as f64,
            )
        })
        .collect();

    let solve = |seed: &Complex64| -> Option<Complex64> {
        let root = newton_periodic(map, period, *seed)?;
        search_box.contains(root, 1e-9).then_some(root)
    };

    #[cfg(feature = "parallel")]
    let roots: Vec<Complex64> = seeds.par_iter().filter_map(solve).collect();
    #[cfg(not(feature = "parallel"))]
    let roots: Vec<Complex64> = seeds.iter().filter_map(solve).collect();

    dedup_and_classify(map, period, roots)
}

/// Sequential twin of [`find_periodic_points`], kept callable so the bench
/// suite can compare the two paths; both produce identical output.
pub fn find_periodic_points_serial(
    map: &MapSpec,
    period: usize,
    search_box: Rect,
    grid_density: usize,
) -> Vec<PeriodicPointRecord> {
    assert!(period >= 1);
    assert!(!search_box.is_degenerate(), "search box must be non-degenerate");
    assert!(grid_density >= 1);
    let roots: Vec<Complex64> = (0..grid_density * grid_density)
        .filter_map(|i| {
            let gx = i % grid_density;
            let gy = i / grid_density;
            let seed = Complex64::new(
                search_box.re_min + (gx as f64 + 0.5) * search_box.width() / grid_density as f64,
                search_box.im_min + (gy as f64 + 0.5) * search_box.height() / grid_density as f64,
            );
            let root = newton_periodic(map, period, seed)?;
            search_box.contains(root, 1e-9).then_some(root)
        })
        .collect();
    dedup_and_classify(map, period, roots)
}

fn dedup_and_classify(
    map: &MapSpec,
    period: usize,
    mut roots: Vec<Complex64>,
) -> Vec<PeriodicPointRecord> {
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let mut kept: Vec<Complex64> = Vec::new();
    for z in roots {
        if kept.iter().all(|k| (k - z).norm() >= DEDUP_DISTANCE) {
            kept.push(z);
        }
    }
    kept.into_iter()
        .filter(|&z| minimal_period(map, z, period))
        .filter_map(|z| record_for(map, z, period))
        .collect()
}
