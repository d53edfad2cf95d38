//! Periodic dynamic rays: inverse-branch pullback tracing, the functional
//! equation residual, landing-point extrapolation, and end-to-end landing
//! verification against independently found periodic points.

use crate::geometry::dist_to_polyline;
use crate::map::{EvalError, MapSpec};
use crate::periodic::{PeriodicPointRecord, PointClass};
use crate::symbolic::{BranchError, ExternalAddress, PartitionSpec, Symbol};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Re-part spacing between consecutive pullback anchors.
pub const ANCHOR_SPACING: f64 = 1.0;
/// Margin between the tract boundary and the innermost anchor.
const TRACT_MARGIN: f64 = 1.0;
/// Consecutive stored samples must differ by at least this much.
const MIN_SEPARATION: f64 = 1e-14;
/// Head extension stops once single pullbacks move less than this.
const HEAD_STOP: f64 = 1e-9;
/// Maximum extra head pullback levels below t = 1.
const HEAD_EXT_MAX: usize = 600;
/// Landing gap tolerance for repelling targets.
pub const LANDING_TOL_REPELLING: f64 = 1e-6;
/// Landing gap tolerance for parabolic targets (sub-geometric attraction).
pub const LANDING_TOL_PARABOLIC: f64 = 1e-3;
/// Functional-equation residual a verified ray must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-6;

const DEFAULT_TRACE_DEPTH: usize = 64;
const DEFAULT_SAMPLES_PER_LEVEL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    Leg,
    RayTail,
    Ray,
}

/// A sampled parametrized curve: a leg, a ray tail, or a full ray.
///
/// Samples are (t, z) with t strictly increasing and consecutive z at least
/// [`MIN_SEPARATION`] apart (builders thin numerically coincident points).
/// For rays the `anchor` is the t→0 landing candidate; for legs it is the
/// fixed point the leg hangs from and equals the first sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub samples: Vec<(f64, Complex64)>,
    pub anchor: Option<Complex64>,
    pub tail_symbol: Option<Symbol>,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CurveError {
    #[error("curve must contain at least one sample")]
    Empty,
    #[error("sample parameters must be strictly increasing and finite")]
    BadParameters,
    #[error("leg must start at its anchor")]
    AnchorMismatch,
}

impl Curve {
    /// Build a curve, sorting by t and dropping samples that repeat the
    /// previous kept point to within [`MIN_SEPARATION`].
    pub fn new(
        kind: CurveKind,
        mut samples: Vec<(f64, Complex64)>,
        anchor: Option<Complex64>,
        tail_symbol: Option<Symbol>,
    ) -> Result<Self, CurveError> {
        if samples.is_empty() {
            return Err(CurveError::Empty);
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite t"));
        let mut thinned: Vec<(f64, Complex64)> = Vec::with_capacity(samples.len());
        for (t, z) in samples {
            if !t.is_finite() || t < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
                return Err(CurveError::BadParameters);
            }
            match thinned.last() {
                Some(&(lt, lz)) => {
                    if t > lt && (z - lz).norm() > MIN_SEPARATION {
                        thinned.push((t, z));
                    }
                }
                None => thinned.push((t, z)),
            }
        }
        if kind == CurveKind::Leg {
            let a = anchor.ok_or(CurveError::AnchorMismatch)?;
            if (thinned[0].1 - a).norm() > 1e-12 {
                return Err(CurveError::AnchorMismatch);
            }
        }
        Ok(Curve { kind, samples: thinned, anchor, tail_symbol })
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.samples.iter().map(|&(_, z)| z).collect()
    }

    pub fn first(&self) -> (f64, Complex64) {
        self.samples[0]
    }

    pub fn last(&self) -> (f64, Complex64) {
        *self.samples.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RayError {
    #[error("address must be periodic (empty preperiod), got {0}")]
    NotPeriodic(String),
    #[error("depth {0} out of range (10..=900)")]
    DepthOutOfRange(usize),
    #[error("samples per level {0} out of range (1..=128)")]
    SamplesPerLevelOutOfRange(usize),
    #[error("pullback did not converge")]
    NotConverged,
    #[error("inverse branch failed: {0}")]
    Branch(#[from] BranchError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LandingError {
    #[error("head samples do not form a Cauchy sequence")]
    DivergentHead,
    #[error("inverse branch failed while pulling the head: {0}")]
    Branch(#[from] BranchError),
}

/// Trace the periodic ray with the given address by inverse-branch
/// pullback.
///
/// Anchors are placed in the fundamental domains of the address at
/// Re-offsets `c + j·h`; the chain `z_j = L_{s_j}(z_{j+1})` is solved by
/// back-substitution from the far anchor (the exact fixed point of the
/// level-relaxation this construction is usually written as). The head is
/// then extended below t = 1 by further single pullbacks, one level per
/// halving of t, and the landing candidate is stored as the curve anchor.
///
/// `samples_per_level` densifies the polyline to that many samples per
/// dyadic level: sub-chains at fractional level offsets are anchored on the
/// coarse polyline near the far end and back-substituted like the base
/// chain, so the anchor interpolation error contracts to nothing at the
/// head and every stored sample still satisfies `f(z(t)) = z(2t)` exactly.
pub fn trace_ray(
    partition: &PartitionSpec,
    address: &ExternalAddress,
    depth: usize,
    samples_per_level: usize,
) -> Result<Curve, RayError> {
    if !address.is_periodic() {
        return Err(RayError::NotPeriodic(address.to_string()));
    }
    if !(10..=900).contains(&depth) {
        return Err(RayError::DepthOutOfRange(depth));
    }
    if !(1..=128).contains(&samples_per_level) {
        return Err(RayError::SamplesPerLevelOutOfRange(samples_per_level));
    }
    let syms = address.period();
    let n = syms.len();
    let spl = samples_per_level;

    // base chain: far anchor mid-strip, then back-substitution; one level
    // per halving of t, extended below t = 1 until the head settles (the
    // stop compares same-phase iterates k vs k − n, since for period n ≥ 2
    // consecutive pullbacks alternate between the cycle points)
    let chain = |start_level: i64, mut z: Complex64| -> Result<Vec<(f64, Complex64)>, RayError> {
        let sub = |level: i64| (level as f64).exp2();
        let mut out = vec![(sub(start_level), z)];
        let mut level = start_level;
        while level > 0 {
            level -= 1;
            z = partition.inverse_branch(syms[level.rem_euclid(n as i64) as usize], z)?;
            out.push((sub(level), z));
        }
        let mut history = vec![z];
        for k in 1..=HEAD_EXT_MAX {
            level -= 1;
            z = partition.inverse_branch(syms[level.rem_euclid(n as i64) as usize], z)?;
            out.push((sub(level), z));
            history.push(z);
            if k >= n && (z - history[k - n]).norm() < HEAD_STOP {
                break;
            }
        }
        Ok(out)
    };

    let far_sym = syms[depth % n];
    let far_anchor = partition.anchor_point(far_sym, TRACT_MARGIN + depth as f64 * ANCHOR_SPACING);
    let mut base = chain(depth as i64, far_anchor)?;
    base.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut samples = base.clone();
    for r in 1..spl {
        // fractional-level far anchor interpolated on the base polyline;
        // its placement error contracts through the back-substitution
        let offset = r as f64 / spl as f64;
        let t_far = ((depth - 1) as f64 + offset).exp2();
        let anchor = interp_at(&base, t_far).expect("t_far inside the base range");
        let mut sub_chain = chain(depth as i64 - 1, anchor)?;
        // carry the fractional offset in the parameter labels
        for (t, _) in sub_chain.iter_mut() {
            *t *= offset.exp2();
        }
        samples.extend(sub_chain);
    }

    let mut curve = Curve::new(CurveKind::Ray, samples, None, None)?;
    curve.tail_symbol = partition.symbol_of(curve.last().1);
    if let Ok((est, _err)) = extrapolate_head(partition, address, curve.first().1) {
        curve.anchor = Some(est);
    }
    Ok(curve)
}

/// Linear interpolation of the polyline at parameter `t` (log-t weights),
/// assuming `samples` sorted by t and `t` within range.
fn interp_at(samples: &[(f64, Complex64)], t: f64) -> Option<Complex64> {
    let idx = samples.partition_point(|&(s, _)| s < t);
    if idx == 0 {
        return Some(samples[0].1);
    }
    if idx >= samples.len() {
        return None;
    }
    let (ta, za) = samples[idx - 1];
    let (tb, zb) = samples[idx];
    let w = ((t / ta).ln() / (tb / ta).ln()).clamp(0.0, 1.0);
    Some(za + (zb - za) * w)
}

/// Trace a ray with a preperiodic address: trace the periodic part, then
/// apply the preperiod's inverse branches samplewise (each application
/// halves t). The anchor is pulled through the same branches, giving the
/// landing candidate of the preperiodic ray.
pub fn trace_preperiodic_ray(
    partition: &PartitionSpec,
    address: &ExternalAddress,
    depth: usize,
    samples_per_level: usize,
) -> Result<Curve, RayError> {
    let periodic = ExternalAddress::periodic(address.period().to_vec()).expect("nonempty period");
    let mut curve = trace_ray(partition, &periodic, depth, samples_per_level)?;
    for &sym in address.preperiod().iter().rev() {
        let mut samples = Vec::with_capacity(curve.samples.len());
        for &(t, z) in &curve.samples {
            let w = partition.inverse_branch(sym, z)?;
            samples.push((t / 2.0, w));
        }
        let anchor = match curve.anchor {
            Some(a) => Some(partition.inverse_branch(sym, a)?),
            None => None,
        };
        curve = Curve::new(CurveKind::Ray, samples, anchor, None)?;
    }
    curve.tail_symbol = partition.symbol_of(curve.last().1);
    Ok(curve)
}

/// Max over admissible samples of the tube distance from `f^n(g(t))` to the
/// ray polyline. A sample is admissible when its image parameter `2^n t`
/// stays within the traced range, which is the set-wise invariance that the
/// defining functional equation implies.
pub fn functional_residual(map: &MapSpec, ray: &Curve, n: usize) -> f64 {
    let pts = ray.points();
    let t_max = ray.last().0;
    let scale = (n as f64).exp2();
    let mut worst: f64 = 0.0;
    for &(t, z) in &ray.samples {
        if t * scale > t_max * (1.0 + 1e-9) {
            continue;
        }
        match map.iterate(z, n) {
            Ok(w) => worst = worst.max(dist_to_polyline(w, &pts)),
            Err(EvalError::Overflow) => return f64::INFINITY,
        }
    }
    worst
}

/// Pull the head of the ray back under the period-n inverse branch until it
/// settles, then extrapolate the limit.
///
/// Repelling targets contract geometrically and get a multiplier-accelerated
/// geometric-series estimate. When the contraction ratio is within 1e-3 of
/// 1 the target is treated as parabolic: the head sequence converges like
/// c/k, so the estimate comes from an Aitken Δ² step on dyadically
/// subsampled iterates, with the error bound taken from the extrapolation
/// tail.
pub fn landing_point(
    partition: &PartitionSpec,
    address: &ExternalAddress,
    ray: &Curve,
) -> Result<(Complex64, f64), LandingError> {
    extrapolate_head(partition, address, ray.first().1)
}

fn period_inverse(
    partition: &PartitionSpec,
    syms: &[Symbol],
    z: Complex64,
) -> Result<Complex64, BranchError> {
    let mut w = z;
    for &s in syms.iter().rev() {
        w = partition.inverse_branch(s, w)?;
    }
    Ok(w)
}

fn extrapolate_head(
    partition: &PartitionSpec,
    address: &ExternalAddress,
    head: Complex64,
) -> Result<(Complex64, f64), LandingError> {
    const BURN_IN: usize = 24;
    const GEOMETRIC_MAX: usize = 100_000;
    const PARABOLIC_LOG2_ITER: u32 = 17; // 131072 pullbacks
    const PARABOLIC_BAND: f64 = 1e-3;

    let syms = address.period();
    let mut h = head;
    let mut d_prev: Option<Complex64> = None;
    let mut growth_streak = 0usize;

    // burn-in: settle the ratio and catch trivial/divergent heads early
    let mut ratio = Complex64::new(0.0, 0.0);
    for _ in 0..BURN_IN {
        let next = period_inverse(partition, syms, h)?;
        let d = next - h;
        if d.norm() == 0.0 {
            return Ok((next, 0.0));
        }
        if let Some(p) = d_prev {
            ratio = d / p;
            if d.norm() > p.norm() * (1.0 + 1e-9) {
                growth_streak += 1;
                if growth_streak >= 12 {
                    return Err(LandingError::DivergentHead);
                }
            } else {
                growth_streak = 0;
            }
        }
        d_prev = Some(d);
        h = next;
    }

    let parabolic = (ratio.norm() - 1.0).abs() <= PARABOLIC_BAND && ratio.norm() > 0.0;
    if parabolic {
        // snapshots at K/4, K/2, K; the subsampled sequence converges
        // geometrically with ratio 1/2, which Aitken Δ² removes.
        let total: usize = 1 << PARABOLIC_LOG2_ITER;
        let (mut s1, mut s2) = (h, h);
        for k in 1..=total {
            h = period_inverse(partition, syms, h)?;
            if k == total / 4 {
                s1 = h;
            } else if k == total / 2 {
                s2 = h;
            }
        }
        let s3 = h;
        let den = (s3 - s2) - (s2 - s1);
        let est = if den.norm() > 1e-300 {
            s3 - (s3 - s2) * (s3 - s2) / den
        } else {
            s3
        };
        let err = (est - s3).norm() + (s3 - s2).norm() * 0.5;
        return Ok((est, err));
    }

    // geometric contraction: iterate until the step is tiny, then sum the
    // remaining geometric series d·ρ/(1−ρ)
    let mut d = d_prev.expect("burn-in ran");
    for _ in 0..GEOMETRIC_MAX {
        if d.norm() < 1e-11 {
            break;
        }
        let next = period_inverse(partition, syms, h)?;
        let nd = next - h;
        if nd.norm() > d.norm() * (1.0 + 1e-9) {
            growth_streak += 1;
            if growth_streak >= 12 {
                return Err(LandingError::DivergentHead);
            }
        } else {
            growth_streak = 0;
        }
        if d.norm() > 0.0 {
            ratio = nd / d;
        }
        d = nd;
        h = next;
    }
    let rho = ratio;
    let (est, err) = if rho.norm() < 0.999 {
        let corr = d * rho / (Complex64::new(1.0, 0.0) - rho);
        (h + corr, (corr.norm() + d.norm()) * 2.0)
    } else {
        (h, d.norm() * 1e3)
    };
    Ok((est, err))
}

/// Result of a Theorem-1-style verification: the traced ray, its landing
/// estimate, and the matched periodic point.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingReport {
    pub address: ExternalAddress,
    pub landing_estimate: Complex64,
    pub matched: Option<PeriodicPointRecord>,
    pub gap: f64,
    pub functional_residual: f64,
    pub converged: bool,
}

/// Trace the ray of `address`, extrapolate its landing point, and match it
/// against the supplied periodic points. `converged` is true only when the
/// gap to the match is below the class tolerance, the matched class is
/// repelling or parabolic, and the functional residual is below
/// [`RESIDUAL_TOL`].
pub fn verify_landing(
    partition: &PartitionSpec,
    address: &ExternalAddress,
    periodic_points: &[PeriodicPointRecord],
) -> Result<LandingReport, RayError> {
    let ray = trace_ray(partition, address, DEFAULT_TRACE_DEPTH, DEFAULT_SAMPLES_PER_LEVEL)?;
    let n = address.period().len();
    let residual = functional_residual(partition.map(), &ray, n);
    let (estimate, landing_ok) = match landing_point(partition, address, &ray) {
        Ok((est, _err)) => (est, true),
        Err(_) => (ray.first().1, false),
    };
    let matched = periodic_points
        .iter()
        .min_by(|a, b| {
            let da = (a.point - estimate).norm();
            let db = (b.point - estimate).norm();
            da.partial_cmp(&db).unwrap()
        })
        .cloned();
    let gap = matched
        .as_ref()
        .map(|m| (m.point - estimate).norm())
        .unwrap_or(f64::INFINITY);
    let converged = landing_ok
        && matched.as_ref().is_some_and(|m| {
            let tol = match m.class {
                PointClass::Parabolic => LANDING_TOL_PARABOLIC,
                _ => LANDING_TOL_REPELLING,
            };
            gap < tol && matches!(m.class, PointClass::Repelling | PointClass::Parabolic)
        })
        && residual < RESIDUAL_TOL;
    Ok(LandingReport {
        address: address.clone(),
        landing_estimate: estimate,
        matched,
        gap,
        functional_residual: residual,
        converged,
    })
}

// ---------------------------------------------------------------------------
// external formats: ray CSV and LandingReport JSON

/// 17 significant digits: lossless f64 round-trip, bit-exact re-emission.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Emit the ray CSV (`t,re,im`, rows in increasing t). When the curve has a
/// landing anchor it is written first as the t = 0 row.
pub fn write_ray_csv(curve: &Curve) -> String {
    let mut out = String::from("t,re,im\n");
    let emit_anchor = match (curve.anchor, curve.samples.first()) {
        (Some(_), Some(&(t0, _))) => curve.kind == CurveKind::Ray && t0 > 0.0,
        _ => false,
    };
    if emit_anchor {
        let a = curve.anchor.unwrap();
        out.push_str(&format!(
            "{},{},{}\n",
            format_f64(0.0),
            format_f64(a.re),
            format_f64(a.im)
        ));
    }
    for &(t, z) in &curve.samples {
        out.push_str(&format!(
            "{},{},{}\n",
            format_f64(t),
            format_f64(z.re),
            format_f64(z.im)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("missing or malformed header (expected 't,re,im')")]
    Header,
    #[error("bad row {0}: {1}")]
    Row(usize, String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Parse a ray CSV back into a curve (all rows become samples; a t = 0 row
/// is kept as a sample so emission reproduces the input byte-for-byte).
pub fn parse_ray_csv(text: &str) -> Result<Curve, CsvError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,re,im") {
        return Err(CsvError::Header);
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut grab = || -> Result<f64, CsvError> {
            parts
                .next()
                .ok_or_else(|| CsvError::Row(i + 2, "missing field".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| CsvError::Row(i + 2, e.to_string()))
        };
        let t = grab()?;
        let re = grab()?;
        let im = grab()?;
        samples.push((t, Complex64::new(re, im)));
    }
    Ok(Curve::new(CurveKind::Ray, samples, None, None)?)
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(c: ComplexJson) -> Self {
        Complex64::new(c.re, c.im)
    }
}

#[derive(Serialize, Deserialize)]
struct MatchedJson {
    point: ComplexJson,
    period: usize,
    multiplier: ComplexJson,
    class: PointClass,
    residual: f64,
}

#[derive(Serialize, Deserialize)]
struct LandingReportJson {
    address: String,
    landing: ComplexJson,
    matched: Option<MatchedJson>,
    gap: f64,
    residual: f64,
    converged: bool,
}

impl LandingReport {
    /// JSON with the fixed key set {address, landing, matched, gap,
    /// residual, converged}; complex values serialize as {re, im}.
    pub fn to_json(&self) -> String {
        let dto = LandingReportJson {
            address: self.address.to_string(),
            landing: self.landing_estimate.into(),
            matched: self.matched.as_ref().map(|m| MatchedJson {
                point: m.point.into(),
                period: m.period,
                multiplier: m.multiplier.into(),
                class: m.class,
                residual: m.residual,
            }),
            gap: self.gap,
            residual: self.functional_residual,
            converged: self.converged,
        };
        serde_json::to_string_pretty(&dto).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let dto: LandingReportJson = serde_json::from_str(text)?;
        let address = ExternalAddress::parse(&dto.address).map_err(|e| {
            serde::de::Error::custom(format!("bad address: {e}"))
        })?;
        Ok(LandingReport {
            address,
            landing_estimate: dto.landing.into(),
            matched: dto.matched.map(|m| PeriodicPointRecord {
                point: m.point.into(),
                period: m.period,
                multiplier: m.multiplier.into(),
                class: m.class,
                residual: m.residual,
            }),
            gap: dto.gap,
            functional_residual: dto.residual,
            converged: dto.converged,
        })
    }
}
