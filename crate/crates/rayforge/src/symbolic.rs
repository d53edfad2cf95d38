//! Canonical tract/fundamental-domain partitions for the exponential and
//! cosine families, external addresses, and shift combinatorics.
//!
//! For `λ e^z` the tract is the half-plane `Re z > ln(R/|λ|)`; the cut
//! curve is the preimage of the ray `α = (−∞, −R]`, which is the family of
//! horizontal lines `Im z ≡ π − arg λ (mod 2π)`. Strip `k` is
//! `Im z − (π − arg λ) ∈ (2π(k−1), 2πk)`, so strip 0 straddles the
//! pulled-back positive real direction.
//!
//! For `a e^z + b e^{-z}` there are two tracts, `Re z > ln(2R/|a|)` and
//! `Re z < −ln(2R/|b|)`, each cut into strips of height 2π along the
//! asymptotic preimages of the same ray. A symbol is a single signed
//! integer: positive for the right tract, negative for the left, with the
//! strip index folded into the magnitude (see [`PartitionSpec::symbol_of`]).

use crate::map::{EvalError, MapSpec};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

pub type Symbol = i64;

const TAU: f64 = 2.0 * PI;
/// Points closer than this to a cut line get no symbol.
const CUT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PartitionError {
    #[error("no closed-form tracts for this family")]
    UnsupportedFamily,
    #[error("radius {0} does not contain the singular values")]
    RadiusTooSmall(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BranchError {
    #[error("the requested value has no preimage in this family")]
    NoPreimage,
    #[error("inverse branch overflowed")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tracts {
    /// cut = ln(R/|λ|); cuts at Im ≡ base (mod 2π), base = π − arg λ.
    Exp { cut: f64, base_im: f64 },
    /// right/left half-plane tracts with their own cut offsets.
    Cosine {
        right_cut: f64,
        right_base_im: f64,
        left_cut: f64,
        left_base_im: f64,
    },
}

/// A canonical partition: the map, the radius R of the disk D ⊃ P(f), and
/// the induced tract/strip geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    map: MapSpec,
    radius: f64,
    tracts: Tracts,
}

/// Fold a (side, strip) pair into one nonzero magnitude: strips
/// 0, 1, 2, ... map to 1, 3, 5, ... and −1, −2, ... map to 2, 4, ...
fn fold_strip(k: i64) -> i64 {
    if k >= 0 { 2 * k + 1 } else { -2 * k }
}

fn unfold_strip(mag: i64) -> i64 {
    debug_assert!(mag >= 1);
    if mag % 2 == 1 { (mag - 1) / 2 } else { -(mag / 2) }
}

/// Strip index of the vertical offset `y` relative to the cut lattice
/// `y ≡ 0 (mod 2π)`, or None when `y` is on a cut or so far out that the
/// index exceeds exact integer range.
fn strip_of(y: f64) -> Option<i64> {
    let idx = (y / TAU).floor();
    if idx.abs() > 9.0e15 {
        return None;
    }
    let nearest_cut = (y / TAU).round() * TAU;
    if (y - nearest_cut).abs() < CUT_EPS {
        return None;
    }
    Some(idx as i64 + 1)
}

/// Vertical center of strip `k` relative to the cut lattice.
fn strip_center(k: i64) -> f64 {
    TAU * k as f64 - PI
}

impl PartitionSpec {
    pub fn map(&self) -> &MapSpec {
        &self.map
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Re-part cutoff of the tract that contains symbol `s` (signed for the
    /// left cosine tract).
    pub fn tract_cut(&self, s: Symbol) -> f64 {
        match self.tracts {
            Tracts::Exp { cut, .. } => cut,
            Tracts::Cosine { right_cut, left_cut, .. } => {
                if s >= 0 { right_cut } else { -left_cut }
            }
        }
    }

    /// The fundamental-domain index containing `z`, or None when `z` lies
    /// outside every tract or within [`CUT_EPS`] of a cut line.
    pub fn symbol_of(&self, z: Complex64) -> Option<Symbol> {
        match self.tracts {
            Tracts::Exp { cut, base_im } => {
                if z.re - cut <= CUT_EPS {
                    return None;
                }
                strip_of(z.im - base_im)
            }
            Tracts::Cosine { right_cut, right_base_im, left_cut, left_base_im } => {
                if z.re - right_cut > CUT_EPS {
                    strip_of(z.im - right_base_im).map(fold_strip)
                } else if -left_cut - z.re > CUT_EPS {
                    strip_of(z.im - left_base_im).map(|k| -fold_strip(k))
                } else {
                    None
                }
            }
        }
    }

    /// A reference point well inside fundamental domain `s`, `offset` to the
    /// right of (into) the tract. Used to seed ray anchors.
    pub fn anchor_point(&self, s: Symbol, offset: f64) -> Complex64 {
        match self.tracts {
            Tracts::Exp { cut, base_im } => {
                Complex64::new(cut + offset, base_im + strip_center(s))
            }
            Tracts::Cosine { right_cut, right_base_im, left_cut, left_base_im } => {
                if s >= 0 {
                    let k = unfold_strip(s.max(1));
                    Complex64::new(right_cut + offset, right_base_im + strip_center(k))
                } else {
                    let k = unfold_strip(-s);
                    Complex64::new(-left_cut - offset, left_base_im + strip_center(k))
                }
            }
        }
    }

    /// The inverse branch `L_s`: the preimage of `w` lying in fundamental
    /// domain `s` (up to the tract cutoff; near the head of a ray the value
    /// continues the same branch of the logarithm).
    pub fn inverse_branch(&self, s: Symbol, w: Complex64) -> Result<Complex64, BranchError> {
        match (*self.map(), self.tracts) {
            (MapSpec::Exp { lambda }, Tracts::Exp { base_im, .. }) => {
                let ratio = w / lambda;
                if ratio.norm() == 0.0 {
                    return Err(BranchError::NoPreimage);
                }
                let target = base_im + strip_center(s);
                Ok(log_branch_towards(ratio, target))
            }
            (MapSpec::Cosine { a, b }, Tracts::Cosine { right_base_im, left_base_im, .. }) => {
                let (u_large, u_small) = cosine_exp_roots(a, b, w)?;
                if s >= 0 {
                    let k = unfold_strip(s.max(1));
                    let target = right_base_im + strip_center(k);
                    Ok(log_branch_towards(u_large, target))
                } else {
                    let k = unfold_strip(-s);
                    // in the left tract z = log u with Re z < 0; the cut
                    // offset of the left strips is expressed on Im z
                    let target = left_base_im + strip_center(k);
                    Ok(log_branch_towards(u_small, target))
                }
            }
            _ => Err(BranchError::NoPreimage),
        }
    }
}

/// log of `u` with the imaginary part shifted by a multiple of 2π to the
/// representative nearest `target_im`.
fn log_branch_towards(u: Complex64, target_im: f64) -> Complex64 {
    let principal = u.ln();
    let shift = ((target_im - principal.im) / TAU).round();
    Complex64::new(principal.re, principal.im + TAU * shift)
}

/// The two roots of `a u² − w u + b = 0` (u = e^z), ordered (larger
/// modulus, smaller modulus) — the right- and left-tract branches.
pub(crate) fn cosine_exp_roots(
    a: Complex64,
    b: Complex64,
    w: Complex64,
) -> Result<(Complex64, Complex64), BranchError> {
    let disc = (w * w - 4.0 * a * b).sqrt();
    // pick the sign that avoids cancellation
    let s = if (w.re * disc.re + w.im * disc.im) >= 0.0 { disc } else { -disc };
    let u1 = (w + s) / (2.0 * a);
    if u1.norm() == 0.0 {
        return Err(BranchError::NoPreimage);
    }
    let u2 = b / (a * u1);
    if u1.norm() >= u2.norm() {
        Ok((u1, u2))
    } else {
        Ok((u2, u1))
    }
}

/// Build the canonical partition for the given radius.
pub fn build_partition(map: &MapSpec, radius: f64) -> Result<PartitionSpec, PartitionError> {
    if radius <= 0.0 || !radius.is_finite() {
        return Err(PartitionError::RadiusTooSmall(radius));
    }
    let tracts = match *map {
        MapSpec::Exp { lambda } => {
            if lambda.norm() >= radius {
                return Err(PartitionError::RadiusTooSmall(radius));
            }
            Tracts::Exp {
                cut: (radius / lambda.norm()).ln(),
                base_im: PI - lambda.arg(),
            }
        }
        MapSpec::Cosine { a, b } => {
            if a.norm() + b.norm() >= radius {
                return Err(PartitionError::RadiusTooSmall(radius));
            }
            Tracts::Cosine {
                right_cut: (2.0 * radius / a.norm()).ln(),
                right_base_im: PI - a.arg(),
                left_cut: (2.0 * radius / b.norm()).ln(),
                left_base_im: b.arg() - PI,
            }
        }
        MapSpec::ScaledBf { .. } => return Err(PartitionError::UnsupportedFamily),
    };
    Ok(PartitionSpec { map: *map, radius, tracts })
}

/// An eventually periodic symbol sequence: `preperiod` then `period`
/// repeated forever. Normalized so the period is primitive and the
/// preperiod minimal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExternalAddress {
    preperiod: Vec<Symbol>,
    period: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AddressError {
    #[error("period must be nonempty")]
    EmptyPeriod,
    #[error("cannot parse address: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("orbit left the tracts at iterate {at}")]
pub struct AddressFailure {
    pub at: usize,
}

impl ExternalAddress {
    /// Normalize and build: the period is reduced to its primitive root and
    /// trailing preperiod symbols matching the rotated period are absorbed.
    pub fn new(preperiod: Vec<Symbol>, period: Vec<Symbol>) -> Result<Self, AddressError> {
        if period.is_empty() {
            return Err(AddressError::EmptyPeriod);
        }
        let mut period = primitive_root(period);
        let mut preperiod = preperiod;
        // p₁…p_m (k₁…k_n)^ω equals p₁…p_{m−1} (k_n k₁…k_{n−1})^ω iff p_m = k_n
        while let Some(&last) = preperiod.last() {
            if last == *period.last().unwrap() {
                preperiod.pop();
                let tail = period.pop().unwrap();
                period.insert(0, tail);
            } else {
                break;
            }
        }
        Ok(ExternalAddress { preperiod, period })
    }

    pub fn periodic(period: Vec<Symbol>) -> Result<Self, AddressError> {
        Self::new(Vec::new(), period)
    }

    pub fn preperiod(&self) -> &[Symbol] {
        &self.preperiod
    }

    pub fn period(&self) -> &[Symbol] {
        &self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.preperiod.is_empty()
    }

    /// Symbol at position `i` of the infinite sequence.
    pub fn symbol_at(&self, i: usize) -> Symbol {
        if i < self.preperiod.len() {
            self.preperiod[i]
        } else {
            self.period[(i - self.preperiod.len()) % self.period.len()]
        }
    }

    /// Drop the first symbol (σ): shortens the preperiod, or rotates the
    /// period when the preperiod is empty.
    pub fn shift(&self) -> ExternalAddress {
        if self.preperiod.is_empty() {
            let mut p = self.period.clone();
            let head = p.remove(0);
            p.push(head);
            ExternalAddress::new(Vec::new(), p).unwrap()
        } else {
            ExternalAddress::new(self.preperiod[1..].to_vec(), self.period.clone()).unwrap()
        }
    }

    /// Parse the text syntax `"[p1 p2 | k1 k2 k3]"`; empty preperiod is
    /// written `"[| 0]"`.
    pub fn parse(s: &str) -> Result<Self, AddressError> {
        let t = s.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| AddressError::Parse(format!("missing brackets in {s:?}")))?;
        let (pre, per) = inner
            .split_once('|')
            .ok_or_else(|| AddressError::Parse(format!("missing '|' in {s:?}")))?;
        let parse_symbols = |part: &str| -> Result<Vec<Symbol>, AddressError> {
            part.split_whitespace()
                .map(|w| {
                    w.parse::<Symbol>()
                        .map_err(|e| AddressError::Parse(format!("bad symbol {w:?}: {e}")))
                })
                .collect()
        };
        ExternalAddress::new(parse_symbols(pre)?, parse_symbols(per)?)
    }
}

impl fmt::Display for ExternalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Symbol]| {
            v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
        };
        if self.preperiod.is_empty() {
            write!(f, "[| {}]", join(&self.period))
        } else {
            write!(f, "[{} | {}]", join(&self.preperiod), join(&self.period))
        }
    }
}

/// The shortest word whose repetition produces `word`.
fn primitive_root(word: Vec<Symbol>) -> Vec<Symbol> {
    let n = word.len();
    for d in 1..=n {
        if n.is_multiple_of(d) && word.chunks(d).all(|c| c == &word[..d]) {
            return word[..d].to_vec();
        }
    }
    word
}

/// Symbols of `z, f(z), …, f^{depth−1}(z)`, or the index of the first
/// iterate that leaves the tracts (overflow counts as leaving).
pub fn address_of(
    partition: &PartitionSpec,
    z: Complex64,
    depth: usize,
) -> Result<Vec<Symbol>, AddressFailure> {
    assert!(depth >= 1);
    let mut out = Vec::with_capacity(depth);
    let mut w = z;
    for i in 0..depth {
        match partition.symbol_of(w) {
            Some(s) => out.push(s),
            None => return Err(AddressFailure { at: i }),
        }
        if i + 1 < depth {
            w = match partition.map().evaluate(w) {
                Ok(w) => w,
                Err(EvalError::Overflow) => return Err(AddressFailure { at: i + 1 }),
            };
        }
    }
    Ok(out)
}
