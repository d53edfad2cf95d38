//! Forward orbits with sound escape certificates and cycle detection.

use crate::map::{EvalError, MapSpec};
use crate::periodic::{classify, PointClass};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Longest cycle period probed by the convergence detector.
pub const MAX_CYCLE_PERIOD: usize = 12;
/// Cauchy window: the trailing stretch that must be period-close for a
/// convergence verdict.
pub const CYCLE_WINDOW: usize = 20;
/// Tolerance on `|z_{i+p} − z_i|` for both landing and convergence.
pub const CYCLE_TOL: f64 = 1e-9;
/// Minimum run length that counts as an exact landing (the deviation is
/// re-amplified by a repelling multiplier, so long runs never happen).
const LANDING_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrbitVerdict {
    /// The orbit left the escape radius and the family's growth guarantee
    /// applies from `first_escape` on.
    Escaping { first_escape: usize },
    /// Asymptotic convergence to a (necessarily attracting or parabolic)
    /// cycle, detected by a Cauchy criterion on `f^p` subsequences.
    ConvergedToCycle { cycle: Vec<Complex64>, period: usize },
    /// The orbit hits a cycle exactly (within [`CYCLE_TOL`]); this is the
    /// only way to reach a repelling cycle.
    LandedOnCycle { cycle: Vec<Complex64>, landing_index: usize },
    /// Nothing could be certified. `left_radius` records whether the orbit
    /// exceeded the escape radius without a growth certificate (the only
    /// escape evidence available for the example family).
    Undecided { left_radius: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub samples: Vec<Complex64>,
    pub verdict: OrbitVerdict,
    pub max_iterations: usize,
    pub escape_radius: f64,
}

/// Re-part threshold beyond which the modulus of the next iterate is
/// guaranteed to exceed the escape radius, per family. `None` when the
/// family has no closed-form growth bound.
fn escape_certificate(map: &MapSpec, z: Complex64, radius: f64) -> bool {
    if radius <= 10.0 {
        return false;
    }
    match *map {
        // |λ e^z| = |λ| e^{Re z} > e·R once Re z > ln(R/|λ|) + 1
        MapSpec::Exp { lambda } => z.re > (radius / lambda.norm()).ln() + 1.0,
        // |a e^z + b e^{-z}| ≥ |a| e^{Re z} − |b| (and mirrored on the left)
        MapSpec::Cosine { a, b } => {
            z.re > (2.0 * radius / a.norm()).ln() + 1.0
                || -z.re > (2.0 * radius / b.norm()).ln() + 1.0
        }
        MapSpec::ScaledBf { .. } => false,
    }
}

fn has_growth_certificate(map: &MapSpec) -> bool {
    !matches!(map, MapSpec::ScaledBf { .. })
}

/// Smallest index from which every stored sample stays outside the radius.
fn first_escape_index(samples: &[Complex64], radius: f64) -> usize {
    let mut idx = samples.len();
    for (i, z) in samples.iter().enumerate().rev() {
        if z.norm() > radius {
            idx = i;
        } else {
            break;
        }
    }
    idx
}

struct CycleHit {
    period: usize,
    start: usize,
    run: usize,
    trailing: bool,
}

/// Scan for the minimal period `p` with a run of period-close samples.
/// Returns the earliest hit for the smallest period, plus whether the
/// closeness also holds over the trailing window.
fn detect_cycle(samples: &[Complex64]) -> Option<CycleHit> {
    let n = samples.len();
    for p in 1..=MAX_CYCLE_PERIOD {
        if n < p + LANDING_RUN {
            break;
        }
        let close = |i: usize| (samples[i + p] - samples[i]).norm() < CYCLE_TOL;
        let mut i = 0;
        while i + p < n {
            if close(i) {
                let mut run = 1;
                while i + run + p < n && close(i + run) {
                    run += 1;
                }
                if run >= LANDING_RUN {
                    let window = CYCLE_WINDOW.min(n - p);
                    let trailing = (n - p - window..n - p).all(close);
                    return Some(CycleHit { period: p, start: i, run, trailing });
                }
                i += run;
            } else {
                i += 1;
            }
        }
    }
    None
}

/// Iterate `map` from `z0`, recording the orbit and a verdict.
///
/// Determinism: the record is a pure function of the inputs.
pub fn orbit(map: &MapSpec, z0: Complex64, max_iter: usize, escape_radius: f64) -> OrbitRecord {
    assert!(max_iter >= 1, "max_iter must be >= 1");
    assert!(escape_radius > 0.0, "escape radius must be positive");

    let mut samples = Vec::with_capacity(max_iter.min(1 << 20) + 1);
    samples.push(z0);
    let mut overflowed = false;
    let mut certified = false;

    for _ in 0..max_iter {
        let last = *samples.last().unwrap();
        match map.evaluate(last) {
            Ok(z) => {
                samples.push(z);
                if escape_certificate(map, z, escape_radius) {
                    certified = true;
                    break;
                }
            }
            Err(EvalError::Overflow) => {
                // Overflow means Re-part blowup, which is the certificate
                // condition in the extreme for exp/cosine.
                overflowed = true;
                break;
            }
        }
    }

    let left_radius = samples.iter().any(|z| z.norm() > escape_radius);
    let verdict = if (certified || overflowed) && has_growth_certificate(map) {
        OrbitVerdict::Escaping { first_escape: first_escape_index(&samples, escape_radius) }
    } else if let Some(hit) = detect_cycle(&samples) {
        let cycle: Vec<Complex64> = samples[hit.start..hit.start + hit.period].to_vec();
        let class = crate::periodic::cycle_multiplier(map, &cycle)
            .ok()
            .map(classify);
        match class {
            Some(PointClass::Repelling) => OrbitVerdict::LandedOnCycle {
                cycle,
                landing_index: hit.start,
            },
            _ if hit.trailing && hit.start + hit.run + hit.period >= samples.len() => {
                // smooth approach: report the freshest samples as the cycle
                let tail = samples.len() - hit.period;
                OrbitVerdict::ConvergedToCycle {
                    cycle: samples[tail..].to_vec(),
                    period: hit.period,
                }
            }
            _ => OrbitVerdict::Undecided { left_radius },
        }
    } else {
        OrbitVerdict::Undecided { left_radius }
    };

    OrbitRecord { samples, verdict, max_iterations: max_iter, escape_radius }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn neg_exp_converges_to_lambert_fixed_point() {
        // Newton oracle on −e^z − z = 0 gives z = −W(1) = −0.567143...
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let rec = orbit(&m, c(-0.5, 0.0), 200, 50.0);
        match rec.verdict {
            OrbitVerdict::ConvergedToCycle { ref cycle, period } => {
                assert_eq!(period, 1);
                assert!((cycle[0] - c(-0.567_143_290_409_783_8, 0.0)).norm() < 1e-7);
            }
            ref v => panic!("expected convergence, got {v:?}"),
        }
    }

    #[test]
    fn unit_exp_escapes_from_origin() {
        // 0, 1, e, e^e, ... strictly increasing real orbit
        let m = MapSpec::exp(c(1.0, 0.0)).unwrap();
        let rec = orbit(&m, c(0.0, 0.0), 100, 50.0);
        match rec.verdict {
            OrbitVerdict::Escaping { first_escape } => {
                for z in &rec.samples[first_escape..] {
                    assert!(z.norm() > 50.0);
                }
            }
            ref v => panic!("expected escape, got {v:?}"),
        }
    }

    #[test]
    fn parabolic_exp_converges_slowly_to_one() {
        let lam = (-1.0f64).exp();
        let m = MapSpec::exp(c(lam, 0.0)).unwrap();
        let rec = orbit(&m, c(0.0, 0.0), 60_000, 50.0);
        match rec.verdict {
            OrbitVerdict::ConvergedToCycle { ref cycle, period } => {
                assert_eq!(period, 1);
                assert!((cycle[0] - c(1.0, 0.0)).norm() < 1e-3);
            }
            ref v => panic!("expected slow convergence, got {v:?}"),
        }
    }

    #[test]
    fn parabolic_needs_patience() {
        let lam = (-1.0f64).exp();
        let m = MapSpec::exp(c(lam, 0.0)).unwrap();
        let rec = orbit(&m, c(0.0, 0.0), 1_000, 50.0);
        assert!(matches!(rec.verdict, OrbitVerdict::Undecided { left_radius: false }));
    }

    #[test]
    fn exact_landing_on_repelling_fixed_point() {
        // cosine with a = b = −2πi/3: both critical values ±4πi/3 map in one
        // step onto the repelling fixed point 2πi/3 (multiplier 2π/√3)
        let a = c(0.0, -2.0 * std::f64::consts::PI / 3.0);
        let m = MapSpec::cosine(a, a).unwrap();
        let v = 2.0 * a;
        let rec = orbit(&m, v, 200, 50.0);
        match rec.verdict {
            OrbitVerdict::LandedOnCycle { ref cycle, landing_index } => {
                assert_eq!(landing_index, 1);
                assert!((cycle[0] - c(0.0, 2.0 * std::f64::consts::PI / 3.0)).norm() < 1e-9);
            }
            ref v => panic!("expected landing, got {v:?}"),
        }
    }

    #[test]
    fn scaled_bf_never_certifies_escape() {
        let m = MapSpec::scaled_bf(1.0).unwrap();
        // start far out on the real axis; whatever happens, no Escaping verdict
        let rec = orbit(&m, c(300.0, 40.0), 50, 20.0);
        assert!(!matches!(rec.verdict, OrbitVerdict::Escaping { .. }));
    }

    #[test]
    fn orbit_is_deterministic() {
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let a = orbit(&m, c(0.3, 0.7), 500, 40.0);
        let b = orbit(&m, c(0.3, 0.7), 500, 40.0);
        assert_eq!(a, b);
    }

    #[test]
    fn samples_follow_the_map() {
        let m = MapSpec::cosine(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let rec = orbit(&m, c(0.1, 0.2), 12, 1e6);
        for i in 0..rec.samples.len() - 1 {
            let f = m.evaluate(rec.samples[i]).unwrap();
            assert!((f - rec.samples[i + 1]).norm() <= 1e-12 * f.norm().max(1.0));
        }
    }
}
