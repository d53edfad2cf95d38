//! Certified bounds on the hyperbolic metric of planar domains, the
//! contraction certificate behind the leg-map estimates, horosphere
//! expansion at repelling fixed points, and geometric preimage spacing.
//!
//! The density of a hyperbolic domain U satisfies
//! `1/(2 dist(z, ∂U)) ≤ ρ_U(z) ≤ 2/dist(z, ∂U)`, the lower bound only when
//! U is simply connected. Certificates built on these bounds are one-sided:
//! an inconclusive bound (≥ 1) is not a violation.

use crate::map::MapSpec;
use crate::rays::Curve;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Punctures closer than this are rejected as coincident.
const PUNCTURE_SEPARATION: f64 = 1e-10;
/// Evaluation points this close to a boundary are "on" it.
const BOUNDARY_EPS: f64 = 1e-12;
/// Horosphere expansion margin on |f(z) − z0| > δ(1 + margin).
const HOROSPHERE_MARGIN: f64 = 1e-3;
/// Only preimage branches with |index| ≤ this can be nearest at desk scale
/// (coordinates with |Im z| < 128π).
const BRANCH_WINDOW: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HypError {
    #[error("point lies on (or within 1e-12 of) the domain boundary")]
    OnBoundary,
    #[error("need at least two distinct finite punctures")]
    BadPunctures,
    #[error("marked point must be one of the punctures")]
    MarkedPointNotPuncture,
    #[error("f(z) is not in the domain")]
    NotInPreimage,
    #[error("not a repelling fixed point")]
    NotRepelling,
    #[error("the requested value is omitted by the map")]
    OmittedValue,
    #[error("no closed-form preimages for this family")]
    UnsupportedFamily,
}

/// A finitely punctured plane: U = ℂ minus a finite set (∞ is implicitly a
/// puncture). Hyperbolic as soon as there are ≥ 2 finite punctures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    punctures: Vec<Complex64>,
    marked_fixed_point: Option<Complex64>,
}

impl DomainSpec {
    pub fn new(
        punctures: Vec<Complex64>,
        marked_fixed_point: Option<Complex64>,
    ) -> Result<Self, HypError> {
        if punctures.len() < 2 {
            return Err(HypError::BadPunctures);
        }
        for p in &punctures {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(HypError::BadPunctures);
            }
        }
        for (i, a) in punctures.iter().enumerate() {
            for b in &punctures[i + 1..] {
                if (a - b).norm() <= PUNCTURE_SEPARATION {
                    return Err(HypError::BadPunctures);
                }
            }
        }
        if let Some(z0) = marked_fixed_point {
            if !punctures.iter().any(|p| (p - z0).norm() <= PUNCTURE_SEPARATION) {
                return Err(HypError::MarkedPointNotPuncture);
            }
        }
        Ok(DomainSpec { punctures, marked_fixed_point })
    }

    pub fn punctures(&self) -> &[Complex64] {
        &self.punctures
    }

    pub fn marked_fixed_point(&self) -> Option<Complex64> {
        self.marked_fixed_point
    }

    /// Euclidean distance to the nearest finite puncture.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        self.punctures
            .iter()
            .map(|p| (z - p).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Region whose hyperbolic density we can bound (and, for the model
/// shapes, evaluate exactly).
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Finitely punctured plane: upper bound only (multiply connected).
    Punctured(DomainSpec),
    /// Round disk, simply connected.
    Disk { center: Complex64, radius: f64 },
    /// Half-plane {z : Re((z − boundary_point)·conj(inward)) > 0}.
    HalfPlane { boundary_point: Complex64, inward: Complex64 },
    /// Strip of the given width: points between two parallel lines.
    Strip { boundary_point: Complex64, inward: Complex64, width: f64 },
}

impl Region {
    fn boundary_distance(&self, z: Complex64) -> f64 {
        match self {
            Region::Punctured(d) => d.boundary_distance(z),
            Region::Disk { center, radius } => radius - (z - center).norm(),
            Region::HalfPlane { boundary_point, inward } => {
                let n = inward / inward.norm();
                ((z - boundary_point) * n.conj()).re
            }
            Region::Strip { boundary_point, inward, width } => {
                let n = inward / inward.norm();
                let d = ((z - boundary_point) * n.conj()).re;
                d.min(width - d)
            }
        }
    }

    fn simply_connected(&self) -> bool {
        !matches!(self, Region::Punctured(_))
    }

    /// Exact density of the model shapes (curvature −1 normalization:
    /// ρ_𝔻(0) = 2, ρ_{Re>0}(1) = 1). None for punctured planes.
    pub fn exact_density(&self, z: Complex64) -> Option<f64> {
        match self {
            Region::Disk { center, radius } => {
                let r = (z - center).norm();
                (r < *radius).then(|| 2.0 * radius / (radius * radius - r * r))
            }
            Region::HalfPlane { .. } => {
                let d = self.boundary_distance(z);
                (d > 0.0).then(|| 1.0 / d)
            }
            _ => None,
        }
    }
}

/// Two-sided bracket on a hyperbolic density. The lower bound is only
/// meaningful when the region is declared simply connected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityInterval {
    pub lower: f64,
    pub upper: f64,
    pub simply_connected_lower_valid: bool,
}

/// The standard distance estimates at `z`: upper = 2/dist always, lower =
/// 1/(2·dist) only for simply connected region specs (0 otherwise).
pub fn density_bounds(region: &Region, z: Complex64) -> Result<DensityInterval, HypError> {
    let d = region.boundary_distance(z);
    if d <= BOUNDARY_EPS {
        return Err(HypError::OnBoundary);
    }
    let sc = region.simply_connected();
    Ok(DensityInterval {
        lower: if sc { 1.0 / (2.0 * d) } else { 0.0 },
        upper: 2.0 / d,
        simply_connected_lower_valid: sc,
    })
}

fn segment_bracket(region: &Region, a: Complex64, b: Complex64) -> Result<(f64, f64), HypError> {
    // 3-point rule: minorize/majorize the boundary distance over the
    // segment by its values at the endpoints and midpoint
    let mid = (a + b) / 2.0;
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for p in [a, mid, b] {
        let d = region.boundary_distance(p);
        if d <= BOUNDARY_EPS {
            return Err(HypError::OnBoundary);
        }
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let len = (b - a).norm();
    let lower = if region.simply_connected() { len / (2.0 * dmax) } else { 0.0 };
    Ok((lower, len * 2.0 / dmin))
}

fn refine_segment(
    region: &Region,
    a: Complex64,
    b: Complex64,
    parent: (f64, f64),
    level: usize,
) -> Result<(f64, f64), HypError> {
    let mid = (a + b) / 2.0;
    let left = segment_bracket(region, a, mid)?;
    let right = segment_bracket(region, mid, b)?;
    let child = (left.0 + right.0, left.1 + right.1);
    let stable = (child.1 - parent.1).abs() <= 0.01 * child.1
        && (child.0 - parent.0).abs() <= 0.01 * child.0.max(1e-300);
    if level >= 12 || (level >= 5 && stable) {
        return Ok(child);
    }
    let l = refine_segment(region, a, mid, left, level + 1)?;
    let r = refine_segment(region, mid, b, right, level + 1)?;
    Ok((l.0 + r.0, l.1 + r.1))
}

/// Bracket the hyperbolic length of a polyline by adaptively refined
/// Riemann sums of the density bounds.
pub fn curve_length_bounds(region: &Region, polyline: &Curve) -> Result<(f64, f64), HypError> {
    let pts = polyline.points();
    if pts.len() < 2 {
        // degenerate polyline
        if let Some(&p) = pts.first() {
            if region.boundary_distance(p) <= BOUNDARY_EPS {
                return Err(HypError::OnBoundary);
            }
        }
        return Ok((0.0, 0.0));
    }
    let mut lo = 0.0;
    let mut hi = 0.0;
    for w in pts.windows(2) {
        let parent = segment_bracket(region, w[0], w[1])?;
        let (l, h) = refine_segment(region, w[0], w[1], parent, 1)?;
        lo += l;
        hi += h;
    }
    Ok((lo, hi))
}

/// η bound from a pair of boundary distances:
/// upper(ρ_U)/lower(ρ_V) = (2/d_U)·(2·d_V). A pure ratio of distances, so
/// invariant under simultaneous translation and scaling of the whole
/// configuration.
pub fn eta_bound_from_distances(dist_u: f64, dist_v: f64) -> f64 {
    4.0 * dist_v / dist_u
}

/// Outcome of a contraction certificate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCertificate {
    pub eta_bound: f64,
    pub certified: bool,
    /// Distance from z to ∂U (the punctures).
    pub dist_u: f64,
    /// Distance from z to the model of ∂V = ∂f⁻¹(U): the tract boundary
    /// and the nearby preimages of the punctures.
    pub dist_v: f64,
}

/// Radius of the tract model used by the certificate: large enough to
/// contain the punctures and the singular values.
pub fn certificate_tract_radius(map: &MapSpec, domain: &DomainSpec) -> f64 {
    let p_max = domain
        .punctures()
        .iter()
        .map(|p| p.norm())
        .fold(0.0, f64::max);
    let s_max = match *map {
        MapSpec::Exp { lambda } => lambda.norm(),
        MapSpec::Cosine { a, b } => a.norm() + b.norm(),
        MapSpec::ScaledBf { .. } => 0.0,
    };
    (2.0 * p_max).max(2.0 * s_max).max(10.0)
}

/// Certify `ρ_U(z) < η·ρ_V(z)` at `z ∈ V = f⁻¹(U)`:
/// `etaBound = (2/dist(z,∂U))·(2·dist(z,∂V))`, with ∂V modeled by the
/// tract boundary line and the preimages of the punctures within
/// [`BRANCH_WINDOW`] branches. Certified only when the caller vouches that
/// the tract component is simply connected, z lies in the tract, and the
/// bound is conclusive (< 1).
pub fn contraction_certificate(
    map: &MapSpec,
    domain: &DomainSpec,
    z: Complex64,
    tract_is_simply_connected: bool,
) -> Result<ContractionCertificate, HypError> {
    let fz = map.evaluate(z).map_err(|_| HypError::NotInPreimage)?;
    if domain.boundary_distance(fz) <= PUNCTURE_SEPARATION {
        return Err(HypError::NotInPreimage);
    }
    let dist_u = domain.boundary_distance(z);
    let radius = certificate_tract_radius(map, domain);

    let (tract_dist, in_tract) = match *map {
        MapSpec::Exp { lambda } => {
            let cut = (radius / lambda.norm()).ln();
            ((z.re - cut).abs(), z.re > cut)
        }
        MapSpec::Cosine { a, b } => {
            let right = (2.0 * radius / a.norm()).ln();
            let left = -(2.0 * radius / b.norm()).ln();
            let d = (z.re - right).abs().min((z.re - left).abs());
            (d, z.re > right || z.re < left)
        }
        MapSpec::ScaledBf { .. } => return Err(HypError::UnsupportedFamily),
    };

    let mut dist_v = tract_dist;
    for &p in domain.punctures() {
        if let Some(d) = nearest_preimage_distance(map, p, z) {
            dist_v = dist_v.min(d);
        }
    }

    let eta_bound = eta_bound_from_distances(dist_u, dist_v);
    Ok(ContractionCertificate {
        eta_bound,
        certified: tract_is_simply_connected && in_tract && eta_bound < 1.0,
        dist_u,
        dist_v,
    })
}

/// Distance from `z` to the nearest preimage of `w` within the branch
/// window, in closed form. None when `w` has no preimage (e.g. 0 for exp).
fn nearest_preimage_distance(map: &MapSpec, w: Complex64, z: Complex64) -> Option<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    let nearest_on_lattice = |base: Complex64| -> f64 {
        let k = ((z.im - base.im) / tau).round().clamp(-(BRANCH_WINDOW as f64), BRANCH_WINDOW as f64);
        (z - Complex64::new(base.re, base.im + tau * k)).norm()
    };
    match *map {
        MapSpec::Exp { lambda } => {
            let ratio = w / lambda;
            (ratio.norm() > 0.0).then(|| nearest_on_lattice(ratio.ln()))
        }
        MapSpec::Cosine { a, b } => {
            let (u1, u2) = crate::symbolic::cosine_exp_roots(a, b, w).ok()?;
            let mut d = f64::INFINITY;
            for u in [u1, u2] {
                if u.norm() > 0.0 {
                    d = d.min(nearest_on_lattice(u.ln()));
                }
            }
            d.is_finite().then_some(d)
        }
        MapSpec::ScaledBf { .. } => None,
    }
}

/// Sample-based check that `f` expands the round-disk model of the
/// horosphere `H_δ(z0)` at a repelling fixed point: every sampled point of
/// the circle |z − z0| = δ must map at least `δ(1 + margin)` away from z0.
/// Per the shrinking property of horospheres, the check is also run at δ/2
/// and δ/4 and all three must pass.
pub fn horosphere_check(
    map: &MapSpec,
    z0: Complex64,
    delta: f64,
    n_samples: usize,
) -> Result<bool, HypError> {
    let fz = map.evaluate(z0).map_err(|_| HypError::NotRepelling)?;
    if (fz - z0).norm() >= 1e-10 {
        return Err(HypError::NotRepelling);
    }
    let mu = map.derivative(z0).map_err(|_| HypError::NotRepelling)?;
    if mu.norm() <= 1.0 {
        return Err(HypError::NotRepelling);
    }
    if delta <= 0.0 || !delta.is_finite() || n_samples == 0 {
        return Err(HypError::NotRepelling);
    }
    let check_at = |d: f64| -> bool {
        (0..n_samples).all(|i| {
            let ang = 2.0 * std::f64::consts::PI * i as f64 / n_samples as f64;
            let z = z0 + d * Complex64::new(ang.cos(), ang.sin());
            match map.evaluate(z) {
                Ok(w) => (w - z0).norm() > d * (1.0 + HOROSPHERE_MARGIN),
                Err(_) => true, // overflow maps far beyond any horosphere
            }
        })
    };
    Ok(check_at(delta) && check_at(delta / 2.0) && check_at(delta / 4.0))
}

/// A sequence of preimages of `w` sorted by modulus, with the empirical
/// spacing constant K = max |w_{j+1}|/|w_j|.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageSequence {
    pub points: Vec<Complex64>,
    pub spacing_constant: f64,
    /// max_j |f(w_j) − w|, for callers that want to re-check.
    pub max_residual: f64,
}

/// Closed-form preimages `f(w_j) = w`: for exp the branches
/// `log(w/λ) + 2πij`, j = 1..count; for cosine the log branches of both
/// roots of the quadratic in e^z, merged by modulus.
pub fn preimage_sequence(
    map: &MapSpec,
    w: Complex64,
    count: usize,
) -> Result<PreimageSequence, HypError> {
    assert!(count >= 2, "need at least two preimages for a ratio");
    let tau = 2.0 * std::f64::consts::PI;
    let mut points: Vec<Complex64> = Vec::with_capacity(count);
    match *map {
        MapSpec::Exp { lambda } => {
            let ratio = w / lambda;
            if ratio.norm() == 0.0 {
                return Err(HypError::OmittedValue); // 0 is omitted by λe^z
            }
            // flush −0.0 so a real negative ratio gets Arg = +π, pinning
            // the branch ladder convention
            let ratio = Complex64::new(ratio.re + 0.0, ratio.im + 0.0);
            let base = ratio.ln();
            for j in 1..=count {
                points.push(Complex64::new(base.re, base.im + tau * j as f64));
            }
        }
        MapSpec::Cosine { a, b } => {
            let (u1, u2) = crate::symbolic::cosine_exp_roots(a, b, w)
                .map_err(|_| HypError::OmittedValue)?;
            for u in [u1, u2] {
                if u.norm() == 0.0 {
                    continue;
                }
                let base = u.ln();
                for j in 1..=count {
                    points.push(Complex64::new(base.re, base.im + tau * j as f64));
                }
            }
        }
        MapSpec::ScaledBf { .. } => return Err(HypError::UnsupportedFamily),
    }
    points.sort_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap());
    points.truncate(count);

    let mut max_residual: f64 = 0.0;
    for &p in &points {
        match map.evaluate(p) {
            Ok(v) => max_residual = max_residual.max((v - w).norm()),
            Err(_) => max_residual = f64::INFINITY,
        }
    }
    let spacing_constant = points
        .windows(2)
        .map(|p| p[1].norm() / p[0].norm())
        .fold(0.0, f64::max);
    Ok(PreimageSequence { points, spacing_constant, max_residual })
}
