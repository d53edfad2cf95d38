//! Legs (injective curves from a fixed point to ∞) and the leg map: the
//! pullback of a leg under the inverse branch fixing its anchor. Iterating
//! the pullback drives the leg toward the periodic ray landing at the
//! anchor; the fundamental domain eventually containing the tail is the
//! combinatorial fingerprint this module records.

use crate::map::MapSpec;
use crate::rays::{Curve, CurveError, CurveKind};
use crate::symbolic::{PartitionSpec, Symbol};
use num_complex::Complex64;
use thiserror::Error;

/// Anchor/fixed-point agreement required by the leg map.
const FIXED_POINT_TOL: f64 = 1e-10;
/// |f'(z0)| below this counts as a critical anchor.
const CRITICAL_TOL: f64 = 1e-8;
/// Nearest/second-nearest preimage separation demanded during continuation.
const AMBIGUITY_FACTOR: f64 = 3.0;
/// Parameter-step bisections before continuation gives up.
const MAX_BISECTIONS: usize = 20;
/// Tail extension grows sample moduli by this factor per step...
const TAIL_GROWTH: f64 = 4.481_689_070_338_064_6; // e^1.5
/// ...up to this modulus, so one pullback still reaches Re ≈ 300.
const TAIL_MAX_NORM: f64 = 1e130;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LegError {
    #[error("anchor is not a fixed point of the map")]
    NotAFixedPoint,
    #[error("anchor is a critical point; the leg map is undefined there")]
    CriticalFixedPoint,
    #[error("inverse-branch continuation stayed ambiguous after {MAX_BISECTIONS} bisections; the leg passes too near a critical value")]
    ContinuationAmbiguous,
    #[error("no closed-form preimages for this family")]
    UnsupportedFamily,
    #[error("evaluation overflowed")]
    Overflow,
    #[error("malformed leg: {0}")]
    Curve(#[from] CurveError),
}

/// One step of a leg-map iteration.
#[derive(Debug, Clone)]
pub struct PullbackStep {
    pub curve: Curve,
    /// Fundamental domain containing the far tail (None before the tail
    /// reaches a tract).
    pub tail_symbol: Option<Symbol>,
    /// Distance from the marked interior sample to the anchor fixed point.
    pub head_gap: f64,
}

/// A straight leg from `z0` to ∞ in the given direction, with
/// geometrically spaced samples from `inner` out to [`TAIL_MAX_NORM`].
pub fn straight_leg(z0: Complex64, direction: Complex64, inner: f64, ratio: f64) -> Curve {
    assert!(inner > 0.0 && ratio > 1.0);
    let dir = direction / direction.norm();
    let mut samples = vec![(0.0, z0)];
    let mut s = inner;
    while s <= TAIL_MAX_NORM {
        samples.push((s, z0 + s * dir));
        s *= ratio;
    }
    Curve::new(CurveKind::Leg, samples, Some(z0), None).expect("straight leg is valid")
}

/// The two preimage candidates of `w` nearest to `target`, over all closed
/// form inverse branches of the family.
fn nearest_preimages(
    map: &MapSpec,
    w: Complex64,
    target: Complex64,
) -> Result<(Complex64, Complex64), LegError> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut cands: Vec<Complex64> = Vec::with_capacity(6);
    match *map {
        MapSpec::Exp { lambda } => {
            let ratio = w / lambda;
            if ratio.norm() == 0.0 {
                return Err(LegError::Overflow);
            }
            let base = ratio.ln();
            let k = ((target.im - base.im) / tau).round();
            for dk in [-1.0, 0.0, 1.0] {
                cands.push(Complex64::new(base.re, base.im + tau * (k + dk)));
            }
        }
        MapSpec::Cosine { a, b } => {
            let (u1, u2) = crate::symbolic::cosine_exp_roots(a, b, w)
                .map_err(|_| LegError::Overflow)?;
            for u in [u1, u2] {
                if u.norm() == 0.0 {
                    continue;
                }
                let base = u.ln();
                let k = ((target.im - base.im) / tau).round();
                for dk in [-1.0, 0.0, 1.0] {
                    cands.push(Complex64::new(base.re, base.im + tau * (k + dk)));
                }
            }
        }
        MapSpec::ScaledBf { .. } => return Err(LegError::UnsupportedFamily),
    }
    cands.sort_by(|x, y| {
        let dx = (x - target).norm();
        let dy = (y - target).norm();
        dx.partial_cmp(&dy).unwrap()
    });
    match cands.len() {
        0 => Err(LegError::Overflow),
        1 => Ok((cands[0], cands[0])),
        _ => Ok((cands[0], cands[1])),
    }
}

/// Continue the pullback across one input segment, bisecting the parameter
/// step whenever the nearest and second-nearest candidates are within
/// [`AMBIGUITY_FACTOR`] of each other.
fn continue_segment(
    map: &MapSpec,
    seg_a: (f64, Complex64),
    seg_b: (f64, Complex64),
    guide: Complex64,
    depth: usize,
    out: &mut Vec<(f64, Complex64)>,
) -> Result<Complex64, LegError> {
    let (best, second) = nearest_preimages(map, seg_b.1, guide)?;
    let d_best = (best - guide).norm();
    let d_second = (second - guide).norm();
    if d_second < AMBIGUITY_FACTOR * d_best && d_second > 0.0 {
        if depth >= MAX_BISECTIONS {
            return Err(LegError::ContinuationAmbiguous);
        }
        let mid = ((seg_a.0 + seg_b.0) / 2.0, (seg_a.1 + seg_b.1) / 2.0);
        let zm = continue_segment(map, seg_a, mid, guide, depth + 1, out)?;
        return continue_segment(map, mid, seg_b, zm, depth + 1, out);
    }
    out.push((seg_b.0, best));
    Ok(best)
}

/// The leg map: the unique preimage leg anchored at the repelling fixed
/// point `z0`. The first interior sample is continued from the local
/// linearization `z0 + (γ(t₁) − z0)/μ`; later samples follow the preimage
/// nearest to the previous pulled-back point.
pub fn leg_pullback(map: &MapSpec, leg: &Curve, z0: Complex64) -> Result<Curve, LegError> {
    let fz = map.evaluate(z0).map_err(|_| LegError::NotAFixedPoint)?;
    if (fz - z0).norm() >= FIXED_POINT_TOL {
        return Err(LegError::NotAFixedPoint);
    }
    let mu = map.derivative(z0).map_err(|_| LegError::NotAFixedPoint)?;
    if mu.norm() <= CRITICAL_TOL {
        return Err(LegError::CriticalFixedPoint);
    }
    assert!(leg.kind == CurveKind::Leg, "leg_pullback expects a leg");
    assert!(leg.len() >= 2, "leg needs interior samples");

    let samples = &leg.samples;
    let mut out: Vec<(f64, Complex64)> = Vec::with_capacity(samples.len() + 8);
    out.push((samples[0].0, z0));
    // linearized guide for the first interior sample
    let guide = z0 + (samples[1].1 - z0) / mu;
    let mut prev = continue_segment(map, samples[0], samples[1], guide, 0, &mut out)?;
    for win in samples.windows(2).skip(1) {
        prev = continue_segment(map, win[0], win[1], prev, 0, &mut out)?;
    }
    Ok(Curve::new(CurveKind::Leg, out, Some(z0), None)?)
}

/// Append a horizontal geometric extension toward ∞ so that the next
/// pullback still produces a tail deep inside a tract. The extension keeps
/// Im fixed and pushes the modulus up to [`TAIL_MAX_NORM`] (whose preimage
/// has Re ≈ 300). `growth` is the per-sample modulus factor: the pullback
/// of the extension keeps Re-spacing ln(growth), so finer growth yields a
/// denser polyline near the fixed point after repeated pullbacks.
pub fn extend_tail(curve: &Curve, growth: f64) -> Curve {
    assert!(growth > 1.0);
    let (t_last, z_last) = curve.last();
    let side = if z_last.re >= 0.0 { 1.0 } else { -1.0 };
    let mut samples = curve.samples.clone();
    let mut norm = z_last.norm().max(10.0) * growth;
    let mut t = t_last;
    // the parameter step must stay above ulp(t) or the appended rows
    // collide and get dropped when the curve is rebuilt
    let t_step = (t_last * 1e-6).max(1.0);
    while norm <= TAIL_MAX_NORM {
        let re2 = norm * norm - z_last.im * z_last.im;
        if re2 > 0.0 {
            t += t_step;
            samples.push((t, Complex64::new(side * re2.sqrt(), z_last.im)));
        }
        norm *= growth;
    }
    Curve::new(curve.kind, samples, curve.anchor, curve.tail_symbol).expect("extension is valid")
}

/// Iterate the leg map `iterations` times, recording each pulled leg, the
/// fundamental domain holding its tail, and the head gap at a marked
/// interior sample (tracked exactly, outside the stored curve, so its decay
/// is visible below the curve-thinning resolution).
pub fn pullback_sequence(
    partition: &PartitionSpec,
    z0: Complex64,
    leg: &Curve,
    iterations: usize,
) -> Result<Vec<PullbackStep>, LegError> {
    let map = *partition.map();
    let mu = map.derivative(z0).map_err(|_| LegError::NotAFixedPoint)?;
    // marked interior sample, tracked as its offset from z0 so the gap
    // stays meaningful far below ulp(z0)
    let mut delta = leg.samples.get(1).map(|&(_, z)| z - z0).unwrap_or_default();

    let mut steps = Vec::with_capacity(iterations + 1);
    let mut current = leg.clone();
    steps.push(PullbackStep {
        tail_symbol: partition.symbol_of(current.last().1),
        head_gap: delta.norm(),
        curve: current.clone(),
    });
    for _ in 0..iterations {
        let extended = extend_tail(&current, TAIL_GROWTH);
        current = leg_pullback(&map, &extended, z0)?;
        if delta.norm() < 1e-10 {
            // exact to O(δ) relative error; keeps the geometric decay
            // visible instead of flooring at the resolution of z0 + δ
            delta /= mu;
        } else {
            let guide = z0 + delta / mu;
            let (best, _) = nearest_preimages(&map, z0 + delta, guide)?;
            delta = best - z0;
        }
        steps.push(PullbackStep {
            tail_symbol: partition.symbol_of(current.last().1),
            head_gap: delta.norm(),
            curve: current.clone(),
        });
    }
    Ok(steps)
}

/// Fundamental domain of the last sample (None while the tail has not yet
/// entered a tract).
pub fn tail_symbol(partition: &PartitionSpec, curve: &Curve) -> Option<Symbol> {
    partition.symbol_of(curve.last().1)
}

/// True when the recorded tail-symbol sequence is eventually periodic with
/// at least two full periods observed. A single recorded step counts as
/// trivially periodic when its tail has a symbol at all.
pub fn tail_symbols_eventually_periodic(symbols: &[Option<Symbol>]) -> bool {
    let n = symbols.len();
    if n == 1 {
        return symbols[0].is_some();
    }
    for p in 1..=n / 2 {
        for start in 0..n {
            if n - start < 2 * p {
                break;
            }
            if (start..n - p).all(|i| symbols[i] == symbols[i + p] && symbols[i].is_some()) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::MapSpec;
    use crate::symbolic::build_partition;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const FP: Complex64 = Complex64 { re: 1.533_913_319_793_574_5, im: 4.375_185_153_061_898 };

    fn neg_exp() -> MapSpec {
        MapSpec::exp(c(-1.0, 0.0)).unwrap()
    }

    #[test]
    fn real_axis_leg_pulls_back_into_real_axis() {
        // λ = 1/e has no critical points and fixes 1; the real inverse
        // branch keeps the real axis
        let m = MapSpec::exp(c((-1.0f64).exp(), 0.0)).unwrap();
        let leg = straight_leg(c(1.0, 0.0), c(1.0, 0.0), 1e-3, 1.2);
        let pulled = leg_pullback(&m, &leg, c(1.0, 0.0)).unwrap();
        assert_eq!(pulled.anchor, Some(c(1.0, 0.0)));
        for &(_, z) in &pulled.samples {
            assert!(z.im.abs() < 1e-9, "sample {z} left the real axis");
        }
    }

    #[test]
    fn first_interior_sample_follows_linearization() {
        let m = neg_exp();
        let t1 = 1e-6;
        let leg = straight_leg(FP, c(1.0, 0.0), t1, 1.3);
        let pulled = leg_pullback(&m, &leg, FP).unwrap();
        let mu = m.derivative(FP).unwrap();
        let expected = FP + (leg.samples[1].1 - FP) / mu;
        let got = pulled.samples[1].1;
        assert!(
            (got - expected).norm() < 1e-6 * (leg.samples[1].1 - FP).norm(),
            "{got} vs linearized {expected}"
        );
    }

    #[test]
    fn pullback_is_a_left_inverse_along_the_leg() {
        let m = neg_exp();
        let leg = straight_leg(FP, c(0.6, 0.8), 1e-4, 1.1);
        let pulled = leg_pullback(&m, &leg, FP).unwrap();
        let original = leg.points();
        let mut worst: f64 = 0.0;
        for &(_, z) in pulled.samples.iter().skip(1) {
            if let Ok(w) = m.evaluate(z) {
                // absolute tube tolerance is only meaningful at desk scale;
                // far samples drown 1e-9 in f64 roundoff of e^z
                if w.norm() <= 1e3 {
                    worst = worst.max(crate::geometry::dist_to_polyline(w, &original));
                }
            }
        }
        assert!(worst < 1e-9, "worst tube distance {worst}");
    }

    #[test]
    fn non_fixed_anchor_rejected() {
        let m = neg_exp();
        let leg = straight_leg(c(0.5, 0.5), c(1.0, 0.0), 1e-3, 1.5);
        assert_eq!(leg_pullback(&m, &leg, c(0.5, 0.5)), Err(LegError::NotAFixedPoint));
    }

    #[test]
    fn tail_symbols_become_constant() {
        let m = neg_exp();
        let p = build_partition(&m, 4.0).unwrap();
        let leg = straight_leg(FP, c(1.0, 0.0), 1e-4, 1.12);
        let steps = pullback_sequence(&p, FP, &leg, 12).unwrap();
        let syms: Vec<_> = steps.iter().map(|s| s.tail_symbol).collect();
        // period-1 instance of eventual periodicity: eventually constant
        let tail = &syms[3..];
        assert!(tail.iter().all(|&s| s == Some(1)), "symbols {syms:?}");
        assert!(tail_symbols_eventually_periodic(&syms));
    }

    #[test]
    fn head_gap_contracts_at_the_multiplier_rate() {
        let m = neg_exp();
        let p = build_partition(&m, 4.0).unwrap();
        let leg = straight_leg(FP, c(0.0, 1.0), 1e-4, 1.12);
        let steps = pullback_sequence(&p, FP, &leg, 10).unwrap();
        let mu = m.derivative(FP).unwrap().norm();
        for w in steps.windows(2).skip(2) {
            let r = w[1].head_gap / w[0].head_gap;
            assert!(w[1].head_gap < w[0].head_gap, "gap not decreasing");
            assert!((r - 1.0 / mu).abs() < 0.1 / mu, "ratio {r} vs 1/|mu| {}", 1.0 / mu);
        }
    }

    #[test]
    fn zero_iterations_returns_input_only() {
        let m = neg_exp();
        let p = build_partition(&m, 4.0).unwrap();
        let leg = straight_leg(FP, c(1.0, 0.0), 1e-3, 1.3);
        let steps = pullback_sequence(&p, FP, &leg, 0).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].curve.samples, leg.samples);
    }

    #[test]
    fn leg_through_cosine_critical_value_is_ambiguous() {
        // a = b = 1: critical values ±2 on the real axis; run a leg straight
        // through w = 2, where the two quadratic roots collide
        let m = MapSpec::cosine(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        // Newton oracle: repelling fixed point of 2cosh(z)
        let z0 = c(0.633_221_088_472_621_1, 1.305_440_655_070_530_4);
        let fz = m.evaluate(z0).unwrap();
        assert!((fz - z0).norm() < 1e-10, "oracle fixed point drifted: {fz}");
        let dir = (c(2.0, 0.0) - z0) / (c(2.0, 0.0) - z0).norm();
        let leg = straight_leg(z0, dir, 1e-3, 1.01);
        assert_eq!(leg_pullback(&m, &leg, z0), Err(LegError::ContinuationAmbiguous));
    }

    #[test]
    fn eventual_periodicity_detector() {
        let s = |v: &[i64]| v.iter().map(|&x| Some(x)).collect::<Vec<_>>();
        assert!(tail_symbols_eventually_periodic(&s(&[3, 1, 1, 1, 1])));
        assert!(tail_symbols_eventually_periodic(&s(&[2, 0, 1, 0, 1, 0, 1])));
        assert!(!tail_symbols_eventually_periodic(&s(&[1, 2, 3, 4, 5])));
        assert!(!tail_symbols_eventually_periodic(&[None, Some(1), None, Some(1)]));
    }
}
