//! Mapping data for random integral mappings: the space transform `h`,
//! the monotone inner clock `r` with its induced measure, the half-open
//! interval `(a, b]`, and the integrability functionals the rest of the
//! calculus is built on.
//!
//! Space transforms and clocks form a closed registry of named shapes so
//! that composition and the closed-form catalog can identify them.
//! Arbitrary callables are quarantined in an `Opaque` kind that disables
//! the catalog and serialization.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CalcError, Result};
use crate::quad::{self, Improper, ImproperC, QuadTol};
use crate::special;

/// Monotone direction of a clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

/// Half-open interval `(lo, hi]` on the positive half-line; `hi` may be
/// `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(with = "crate::serde_ext::maybe_inf")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0) || !(hi > lo) || !lo.is_finite() {
            return Err(CalcError::invalid(
                "interval",
                format!("need 0 <= a < b, got a = {lo}, b = {hi}"),
            ));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn half_line() -> Self {
        Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.hi.is_infinite()
    }

    /// Containment in the open interior `(lo, hi)`.
    pub fn contains_interior(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }

    /// Containment in `(lo, hi]`.
    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t <= self.hi
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Named space transforms `h`, all continuous and of bounded variation on
/// compact subintervals of the positive half-line.
#[derive(Clone)]
pub enum SpaceTransform {
    /// h(t) = value
    Const { value: f64 },
    /// h(t) = t
    Linear,
    /// h(t) = t^alpha, alpha != 0
    Power { alpha: f64 },
    /// h(t) = e^{-t}
    ExpNeg,
    /// h(t) = factor * inner(t)
    Scaled {
        factor: f64,
        inner: Box<SpaceTransform>,
    },
    /// Quarantined arbitrary callable; disables catalog and serialization.
    Opaque { label: String, eval: RealFn },
}

impl fmt::Debug for SpaceTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceTransform::Const { value } => write!(f, "Const({value})"),
            SpaceTransform::Linear => write!(f, "Linear"),
            SpaceTransform::Power { alpha } => write!(f, "Power({alpha})"),
            SpaceTransform::ExpNeg => write!(f, "ExpNeg"),
            SpaceTransform::Scaled { factor, inner } => write!(f, "Scaled({factor}, {inner:?})"),
            SpaceTransform::Opaque { label, .. } => write!(f, "Opaque({label})"),
        }
    }
}

impl SpaceTransform {
    pub fn scaled(factor: f64, inner: SpaceTransform) -> SpaceTransform {
        SpaceTransform::Scaled {
            factor,
            inner: Box::new(inner),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SpaceTransform::Const { value } => *value,
            SpaceTransform::Linear => t,
            SpaceTransform::Power { alpha } => t.powf(*alpha),
            SpaceTransform::ExpNeg => (-t).exp(),
            SpaceTransform::Scaled { factor, inner } => factor * inner.eval(t),
            SpaceTransform::Opaque { eval, .. } => eval(t),
        }
    }

    pub fn is_opaque(&self) -> bool {
        match self {
            SpaceTransform::Opaque { .. } => true,
            SpaceTransform::Scaled { inner, .. } => inner.is_opaque(),
            _ => false,
        }
    }

    /// Returns `Some(c)` when the transform is the constant `c`.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            SpaceTransform::Const { value } => Some(*value),
            SpaceTransform::Scaled { factor, inner } => inner.as_const().map(|c| factor * c),
            _ => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            SpaceTransform::Const { value } => *value == 0.0,
            SpaceTransform::Scaled { factor, inner } => {
                *factor == 0.0 || inner.is_identically_zero()
            }
            _ => false,
        }
    }

    /// Constant sign on the positive half-line: +1, -1, or 0 for the zero
    /// transform; `None` for opaque.
    pub fn sign(&self) -> Option<f64> {
        match self {
            SpaceTransform::Const { value } => Some(if *value == 0.0 {
                0.0
            } else {
                value.signum()
            }),
            SpaceTransform::Linear | SpaceTransform::Power { .. } | SpaceTransform::ExpNeg => {
                Some(1.0)
            }
            SpaceTransform::Scaled { factor, inner } => {
                if *factor == 0.0 {
                    return Some(0.0);
                }
                inner.sign().map(|s| s * factor.signum())
            }
            SpaceTransform::Opaque { .. } => None,
        }
    }

    /// Whether |h| is increasing or decreasing in t (constant counts as
    /// neither). All named transforms are monotone on the positive axis.
    pub fn abs_monotonicity(&self) -> Option<Direction> {
        match self {
            SpaceTransform::Const { .. } => None,
            SpaceTransform::Linear => Some(Direction::Nondecreasing),
            SpaceTransform::Power { alpha } => Some(if *alpha > 0.0 {
                Direction::Nondecreasing
            } else {
                Direction::Nonincreasing
            }),
            SpaceTransform::ExpNeg => Some(Direction::Nonincreasing),
            SpaceTransform::Scaled { inner, .. } => inner.abs_monotonicity(),
            SpaceTransform::Opaque { .. } => None,
        }
    }

    /// Solutions of |h(t)| = level inside the open interval. Named
    /// transforms have |h| monotone, so there is at most one.
    pub fn solve_abs_level(&self, level: f64, iv: &Interval) -> Vec<f64> {
        if level <= 0.0 || !level.is_finite() {
            return Vec::new();
        }
        let root = match self {
            SpaceTransform::Const { .. } | SpaceTransform::Opaque { .. } => None,
            SpaceTransform::Linear => Some(level),
            SpaceTransform::Power { alpha } => Some(level.powf(1.0 / alpha)),
            SpaceTransform::ExpNeg => Some(-level.ln()),
            SpaceTransform::Scaled { factor, inner } => {
                if *factor == 0.0 {
                    None
                } else {
                    return inner.solve_abs_level(level / factor.abs(), iv);
                }
            }
        };
        root.into_iter()
            .filter(|t| t.is_finite() && iv.contains_interior(*t))
            .collect()
    }

    /// (inf, sup) of h over the open interval. Errors for opaque
    /// transforms.
    pub fn image(&self, iv: &Interval) -> Result<(f64, f64)> {
        if self.is_opaque() {
            return Err(CalcError::Unsupported(
                "image of an opaque space transform".into(),
            ));
        }
        let at_lo = self.eval(iv.lo);
        let at_hi = self.eval(iv.hi);
        Ok((at_lo.min(at_hi), at_lo.max(at_hi)))
    }
}

/// Named monotone time changes. Nondecreasing kinds accumulate mass
/// cdf-style; nonincreasing kinds are tail functions of their induced
/// measure.
#[derive(Clone)]
pub enum TimeChange {
    /// r(t) = t
    Linear,
    /// r(t) = t^beta, beta != 0 (beta < 0 is a tail-style clock)
    Power { beta: f64 },
    /// r(t) = 1 - e^{-t}
    OneMinusExpNeg,
    /// r(t) = -ln t (tail-style on (0, 1])
    NegLog,
    /// r(t) = e^{-t} (tail-style)
    ExpNegTail,
    /// r(t) = Γ(alpha; t) (tail-style)
    UpperGammaTail { alpha: f64 },
    /// Unit jump at `at`: r(t) = 1_{[at, ∞)}(t)
    Dirac { at: f64 },
    /// r(t) = factor * inner(t), factor > 0
    Scaled { factor: f64, inner: Box<TimeChange> },
    /// r(t) = anchor - inner(t); flips a tail-style clock into cdf style.
    Flipped { inner: Box<TimeChange>, anchor: f64 },
    /// Measure on (0, ∞) produced by composing mappings.
    Image(ImageMeasure),
}

impl fmt::Debug for TimeChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeChange::Linear => write!(f, "Linear"),
            TimeChange::Power { beta } => write!(f, "Power({beta})"),
            TimeChange::OneMinusExpNeg => write!(f, "OneMinusExpNeg"),
            TimeChange::NegLog => write!(f, "NegLog"),
            TimeChange::ExpNegTail => write!(f, "ExpNegTail"),
            TimeChange::UpperGammaTail { alpha } => write!(f, "UpperGammaTail({alpha})"),
            TimeChange::Dirac { at } => write!(f, "Dirac({at})"),
            TimeChange::Scaled { factor, inner } => write!(f, "Scaled({factor}, {inner:?})"),
            TimeChange::Flipped { inner, anchor } => write!(f, "Flipped({anchor} - {inner:?})"),
            TimeChange::Image(im) => write!(f, "Image({:?})", im.catalog_id),
        }
    }
}

/// A positive measure on the positive half-line given by its tail
/// function, with an optional closed-form density. Produced by map
/// composition.
#[derive(Clone)]
pub struct ImageMeasure {
    pub support: (f64, f64),
    /// w -> mass of (w, ∞)
    pub tail: RealFn,
    pub density: Option<RealFn>,
    pub total_mass: f64,
    pub catalog_id: Option<String>,
}

impl fmt::Debug for ImageMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageMeasure")
            .field("support", &self.support)
            .field("total_mass", &self.total_mass)
            .field("catalog_id", &self.catalog_id)
            .finish()
    }
}

impl TimeChange {
    pub fn scaled(factor: f64, inner: TimeChange) -> TimeChange {
        TimeChange::Scaled {
            factor,
            inner: Box::new(inner),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeChange::Linear => t,
            TimeChange::Power { beta } => t.powf(*beta),
            TimeChange::OneMinusExpNeg => -(-t).exp_m1(),
            TimeChange::NegLog => -t.ln(),
            TimeChange::ExpNegTail => (-t).exp(),
            TimeChange::UpperGammaTail { alpha } => {
                if t <= 0.0 {
                    if *alpha > 0.0 {
                        special::gamma(*alpha)
                    } else {
                        f64::INFINITY
                    }
                } else if t.is_infinite() {
                    0.0
                } else {
                    special::upper_incomplete_gamma(*alpha, t).unwrap_or(f64::NAN)
                }
            }
            TimeChange::Dirac { at } => {
                if t >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            TimeChange::Scaled { factor, inner } => factor * inner.eval(t),
            TimeChange::Flipped { inner, anchor } => anchor - inner.eval(t),
            TimeChange::Image(im) => im.total_mass - (im.tail)(t),
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            TimeChange::Linear
            | TimeChange::OneMinusExpNeg
            | TimeChange::Dirac { .. }
            | TimeChange::Image(_) => Direction::Nondecreasing,
            TimeChange::Power { beta } => {
                if *beta > 0.0 {
                    Direction::Nondecreasing
                } else {
                    Direction::Nonincreasing
                }
            }
            TimeChange::NegLog | TimeChange::ExpNegTail | TimeChange::UpperGammaTail { .. } => {
                Direction::Nonincreasing
            }
            TimeChange::Scaled { inner, .. } => inner.direction(),
            TimeChange::Flipped { inner, .. } => match inner.direction() {
                Direction::Nondecreasing => Direction::Nonincreasing,
                Direction::Nonincreasing => Direction::Nondecreasing,
            },
        }
    }

    /// |dr/dt| where the clock has a density; `None` for jump clocks and
    /// image measures without one.
    pub fn weight(&self, t: f64) -> Option<f64> {
        match self {
            TimeChange::Linear => Some(1.0),
            TimeChange::Power { beta } => Some(beta.abs() * t.powf(beta - 1.0)),
            TimeChange::OneMinusExpNeg => Some((-t).exp()),
            TimeChange::NegLog => Some(1.0 / t),
            TimeChange::ExpNegTail => Some((-t).exp()),
            TimeChange::UpperGammaTail { alpha } => Some(t.powf(alpha - 1.0) * (-t).exp()),
            TimeChange::Dirac { .. } => None,
            TimeChange::Scaled { factor, inner } => inner.weight(t).map(|w| factor * w),
            TimeChange::Flipped { inner, .. } => inner.weight(t),
            TimeChange::Image(im) => im.density.as_ref().map(|d| d(t)),
        }
    }

    /// Signed derivative r'(t), where it exists.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        let sign = match self.direction() {
            Direction::Nondecreasing => 1.0,
            Direction::Nonincreasing => -1.0,
        };
        self.weight(t).map(|w| sign * w)
    }

    /// The single atom of a jump clock, as `(position, mass)`.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self {
            TimeChange::Dirac { at } => Some((*at, 1.0)),
            TimeChange::Scaled { factor, inner } => {
                inner.atom().map(|(at, m)| (at, factor * m))
            }
            TimeChange::Flipped { inner, .. } => inner.atom(),
            _ => None,
        }
    }

    pub fn is_image(&self) -> bool {
        matches!(self, TimeChange::Image(_))
    }

    pub fn image_measure(&self) -> Option<&ImageMeasure> {
        match self {
            TimeChange::Image(im) => Some(im),
            _ => None,
        }
    }

    /// Total variation of r over `(a, b]`, i.e. the induced measure's mass.
    pub fn increment(&self, iv: &Interval) -> f64 {
        if let Some((at, mass)) = self.atom() {
            return if iv.contains(at) { mass.abs() } else { 0.0 };
        }
        let lo = self.eval(iv.lo);
        let hi = self.eval(iv.hi);
        (hi - lo).abs()
    }

    /// Structural validation against the interval it will be used on.
    pub fn validate(&self, iv: &Interval) -> Result<()> {
        match self {
            TimeChange::Power { beta } => {
                if *beta == 0.0 {
                    return Err(CalcError::invalid("clock", "power clock needs beta != 0"));
                }
            }
            TimeChange::Dirac { at } => {
                if !iv.contains_interior(*at) {
                    return Err(CalcError::invalid(
                        "clock",
                        format!("jump point {at} must lie strictly inside ({}, {})", iv.lo, iv.hi),
                    ));
                }
            }
            TimeChange::Scaled { factor, inner } => {
                if !(*factor > 0.0) {
                    return Err(CalcError::invalid("clock", "scale factor must be positive"));
                }
                inner.validate(iv)?;
            }
            TimeChange::Flipped { inner, anchor } => {
                if !anchor.is_finite() {
                    return Err(CalcError::invalid("clock", "flip anchor must be finite"));
                }
                inner.validate(iv)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// The measure induced by clock increments on the given interval.
    pub fn induced_measure(&self, iv: &Interval) -> RadialMeasure {
        if let Some(atom) = self.atom() {
            return RadialMeasure::Atoms(vec![atom]);
        }
        if let TimeChange::Image(im) = self {
            return match &im.density {
                Some(d) => RadialMeasure::Density {
                    support: im.support,
                    eval: d.clone(),
                },
                None => RadialMeasure::Tail {
                    support: im.support,
                    eval: im.tail.clone(),
                },
            };
        }
        let this = self.clone();
        RadialMeasure::Density {
            support: (iv.lo, iv.hi),
            eval: Arc::new(move |t| this.weight(t).unwrap_or(0.0)),
        }
    }

    /// Inverts the accumulated variation: smallest t in `(a, b]` with
    /// `|r(t) - r(a+)| >= mass`. Requires a finite increment over the
    /// interval. Used for inverse-CDF sampling of clock measures.
    pub fn invert_increment(&self, iv: &Interval, mass: f64) -> Result<f64> {
        let total = self.increment(iv);
        if !total.is_finite() {
            return Err(CalcError::Unsupported(
                "inverse sampling of an infinite-mass clock".into(),
            ));
        }
        if let Some((at, _)) = self.atom() {
            return Ok(at);
        }
        let target = mass.clamp(0.0, total);
        let base = self.eval(iv.lo);
        // Bisection on the monotone variation t -> |r(t) - r(a+)|.
        let mut lo = iv.lo;
        let mut hi = if iv.hi.is_finite() {
            iv.hi
        } else {
            let mut probe = iv.lo.max(1.0);
            while (self.eval(probe) - base).abs() < target && probe < 1e300 {
                probe *= 2.0;
            }
            probe
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (self.eval(mid) - base).abs() < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(hi)
    }
}

/// A positive measure on the positive half-line, in one of the three
/// representations the calculus produces.
#[derive(Clone)]
pub enum RadialMeasure {
    Atoms(Vec<(f64, f64)>),
    Density { support: (f64, f64), eval: RealFn },
    Tail { support: (f64, f64), eval: RealFn },
}

impl fmt::Debug for RadialMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialMeasure::Atoms(a) => write!(f, "Atoms({a:?})"),
            RadialMeasure::Density { support, .. } => write!(f, "Density(support {support:?})"),
            RadialMeasure::Tail { support, .. } => write!(f, "Tail(support {support:?})"),
        }
    }
}

impl RadialMeasure {
    /// Mass of `(w, ∞)`.
    pub fn tail_mass(&self, w: f64, tol: QuadTol) -> Result<f64> {
        match self {
            RadialMeasure::Atoms(atoms) => {
                Ok(atoms.iter().filter(|(x, _)| *x > w).map(|(_, m)| m).sum())
            }
            RadialMeasure::Density { support, eval } => {
                let lo = w.max(support.0);
                if lo >= support.1 {
                    return Ok(0.0);
                }
                let eval = eval.clone();
                Ok(quad::improper(move |t| eval(t), lo, support.1, tol)?.value_or_inf())
            }
            RadialMeasure::Tail { eval, .. } => Ok(eval(w)),
        }
    }

    pub fn total_mass(&self, tol: QuadTol) -> Result<f64> {
        match self {
            RadialMeasure::Atoms(atoms) => Ok(atoms.iter().map(|(_, m)| m).sum()),
            RadialMeasure::Density { support, .. } => self.tail_mass(support.0, tol),
            RadialMeasure::Tail { support, eval } => Ok(eval(support.0)),
        }
    }
}

/// Classification of a mapping: the trivial kinds and everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapClass {
    Zero,
    Identity,
    Generic,
}

/// The mapping data `(h, r, (a, b])`.
#[derive(Debug, Clone)]
pub struct IntegralMap {
    pub h: SpaceTransform,
    pub r: TimeChange,
    pub interval: Interval,
    /// Present on maps produced by composition: the constituent maps,
    /// outermost first. Enables nested-route evaluation.
    pub factors: Option<Vec<IntegralMap>>,
}

impl IntegralMap {
    pub fn new(h: SpaceTransform, r: TimeChange, interval: Interval) -> Result<Self> {
        r.validate(&interval)?;
        Ok(IntegralMap {
            h,
            r,
            interval,
            factors: None,
        })
    }

    /// The selfdecomposable (class L) map: h = e^{-t}, r = t on (0, ∞).
    pub fn class_l() -> Self {
        IntegralMap {
            h: SpaceTransform::ExpNeg,
            r: TimeChange::Linear,
            interval: Interval::half_line(),
            factors: None,
        }
    }

    /// The exponential-cdf map: h = t, r = 1 - e^{-t} on (0, ∞).
    pub fn upsilon() -> Self {
        IntegralMap {
            h: SpaceTransform::Linear,
            r: TimeChange::OneMinusExpNeg,
            interval: Interval::half_line(),
            factors: None,
        }
    }

    /// h = t, r = t^beta on (0, 1].
    pub fn u_beta(beta: f64) -> Result<Self> {
        IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Power { beta },
            Interval::unit(),
        )
    }

    /// The neutral map: h = 1, r = t on (0, 1].
    pub fn identity() -> Self {
        IntegralMap {
            h: SpaceTransform::Const { value: 1.0 },
            r: TimeChange::Linear,
            interval: Interval::unit(),
            factors: None,
        }
    }

    /// The trivial map sending every law to the point mass at zero.
    pub fn zero() -> Self {
        IntegralMap {
            h: SpaceTransform::Const { value: 0.0 },
            r: TimeChange::Linear,
            interval: Interval::unit(),
            factors: None,
        }
    }

    pub fn is_opaque(&self) -> bool {
        self.h.is_opaque()
    }

    /// Direction-normalized space transform: a nonincreasing clock runs the
    /// integrator backwards, which reflects the driving process, so the
    /// effective transform is `-h`.
    pub fn effective_space(&self) -> SpaceTransform {
        match self.r.direction() {
            Direction::Nondecreasing => self.h.clone(),
            Direction::Nonincreasing => SpaceTransform::scaled(-1.0, self.h.clone()),
        }
    }

    pub fn h_eff(&self, t: f64) -> f64 {
        match self.r.direction() {
            Direction::Nondecreasing => self.h.eval(t),
            Direction::Nonincreasing => -self.h.eval(t),
        }
    }

    /// Total mass of the clock measure over the interval.
    pub fn clock_increment(&self) -> f64 {
        self.r.increment(&self.interval)
    }

    /// ∫ f(t) ρ(dt) over `(a, b]` against the clock measure ρ = |dr|.
    pub fn stieltjes<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breakpoints: &[f64],
        tol: QuadTol,
    ) -> Result<Improper> {
        if let Some((at, mass)) = self.r.atom() {
            if self.interval.contains(at) {
                return Ok(Improper::Converged(quad::Quad {
                    value: f(at) * mass,
                    err: 0.0,
                }));
            }
            return Ok(Improper::Converged(quad::Quad {
                value: 0.0,
                err: 0.0,
            }));
        }
        let r = self.r.clone();
        // A clock weight this small cannot lift any integrand value of
        // interest above tolerance; skipping avoids evaluating expensive
        // integrands deep in the probed tail.
        let integrand = move |t: f64| match r.weight(t) {
            Some(w) if w.abs() < 1e-150 => 0.0,
            Some(w) => f(t) * w,
            None => f64::NAN,
        };
        quad::improper_with_breakpoints(
            integrand,
            self.interval.lo,
            self.interval.hi,
            breakpoints,
            tol,
        )
    }

    /// Complex Stieltjes integral against the clock measure.
    pub fn stieltjes_complex<F: Fn(f64) -> num_complex::Complex64 + Clone>(
        &self,
        f: F,
        breakpoints: &[f64],
        tol: QuadTol,
    ) -> Result<ImproperC> {
        if let Some((at, mass)) = self.r.atom() {
            let value = if self.interval.contains(at) {
                f(at) * mass
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            };
            return Ok(ImproperC::Converged { value, err: 0.0 });
        }
        let r = self.r.clone();
        let integrand = move |t: f64| {
            let w = r.weight(t).unwrap_or(f64::NAN);
            if w.abs() < 1e-150 {
                return num_complex::Complex64::new(0.0, 0.0);
            }
            f(t) * w
        };
        quad::improper_complex(
            integrand,
            self.interval.lo,
            self.interval.hi,
            breakpoints,
            tol,
        )
    }

    /// ∫ |h(t)|^p |dr(t)| over the interval; `+inf` when the divergence
    /// test fires. Divergence is an answer, not an error.
    pub fn p_functional(&self, p: f64, tol: QuadTol) -> Result<f64> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(CalcError::invalid("exponent", format!("need p in (0, 2], got {p}")));
        }
        if let Some(im) = self.r.image_measure() {
            let density = im.density.clone().ok_or_else(|| {
                CalcError::Unsupported("p-functional of an image clock without a density".into())
            })?;
            let h = self.h.clone();
            let out = quad::improper(
                move |w| h.eval(w).abs().powf(p) * density(w),
                self.interval.lo.max(im.support.0),
                self.interval.hi.min(im.support.1),
                tol,
            )?;
            return Ok(out.value_or_inf());
        }
        let h = self.h.clone();
        let out = self.stieltjes(move |t| h.eval(t).abs().powf(p), &[], tol)?;
        Ok(out.value_or_inf())
    }

    /// ∫ h_eff(t) ρ(dt); may diverge.
    pub fn signed_h_integral(&self, tol: QuadTol) -> Result<Improper> {
        let h = self.effective_space();
        self.stieltjes(move |t| h.eval(t), &[], tol)
    }

    /// ∫ h(t)^2 ρ(dt); may diverge.
    pub fn h_squared_integral(&self, tol: QuadTol) -> Result<Improper> {
        let h = self.h.clone();
        self.stieltjes(move |t| h.eval(t).powi(2), &[], tol)
    }

    /// Mass of `{t in (a, b] : h_eff(t) * x > v}` under the clock measure.
    /// Exact for named clocks: the boundary is located in closed form and
    /// the mass read off from clock increments.
    pub fn superlevel_clock_mass(&self, x: f64, v: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(if 0.0 > v { self.clock_increment() } else { 0.0 });
        }
        let h = self.effective_space();
        if h.sign().is_none() {
            return Err(CalcError::Unsupported(
                "superlevel sets of an opaque transform".into(),
            ));
        }
        let iv = self.interval;
        let cond = |t: f64| h.eval(t) * x > v;
        // |h| is monotone for named transforms, so the condition flips at
        // most once, at |h(t)| = |v/x|. Splitting at a non-flipping root is
        // harmless.
        let roots = self.h.solve_abs_level((v / x).abs(), &iv);
        let probe = |piece: &Interval| {
            if piece.hi.is_finite() {
                0.5 * (piece.lo + piece.hi)
            } else {
                piece.lo + 1.0
            }
        };
        match roots.first() {
            None => Ok(if cond(probe(&iv)) {
                self.clock_increment()
            } else {
                0.0
            }),
            Some(&t_star) => {
                let left = Interval {
                    lo: iv.lo,
                    hi: t_star,
                };
                let right = Interval {
                    lo: t_star,
                    hi: iv.hi,
                };
                let mut mass = 0.0;
                if cond(probe(&left)) {
                    mass += self.r.increment(&left);
                }
                if cond(probe(&right)) {
                    mass += self.r.increment(&right);
                }
                Ok(mass)
            }
        }
    }

    /// Zero map, identity map, or generic.
    pub fn classify(&self) -> MapClass {
        let increment = self.clock_increment();
        if self.h.is_identically_zero() || increment == 0.0 {
            return MapClass::Zero;
        }
        if let Some(c) = self.h.as_const() {
            if (c - 1.0).abs() < 1e-12 && (increment - 1.0).abs() < 1e-12 {
                return MapClass::Identity;
            }
        }
        if let Some((at, mass)) = self.r.atom() {
            if self.interval.contains_interior(at)
                && (mass - 1.0).abs() < 1e-12
                && (self.h.eval(at) - 1.0).abs() < 1e-12
            {
                return MapClass::Identity;
            }
        }
        MapClass::Generic
    }

    /// Converts a nonincreasing clock with finite left limit into the
    /// equivalent nondecreasing form. The returned flag records that the
    /// integrand law must be reflected.
    pub fn reverse_clock(&self) -> Result<ReversedMap> {
        if self.r.direction() != Direction::Nonincreasing {
            return Err(CalcError::invalid(
                "clock reversal",
                "clock is already nondecreasing",
            ));
        }
        let anchor = self.r.eval(self.interval.lo);
        if !anchor.is_finite() {
            return Err(CalcError::UnsupportedReversal);
        }
        let map = IntegralMap {
            h: self.h.clone(),
            r: TimeChange::Flipped {
                inner: Box::new(self.r.clone()),
                anchor,
            },
            interval: self.interval,
            factors: None,
        };
        Ok(ReversedMap {
            map,
            reflect_law: true,
        })
    }

    /// Structural equality of the mapping data (used by catalog matching).
    pub fn same_shape(&self, other: &IntegralMap) -> bool {
        fn st_eq(a: &SpaceTransform, b: &SpaceTransform) -> bool {
            match (a, b) {
                (SpaceTransform::Const { value: x }, SpaceTransform::Const { value: y }) => x == y,
                (SpaceTransform::Linear, SpaceTransform::Linear) => true,
                (SpaceTransform::Power { alpha: x }, SpaceTransform::Power { alpha: y }) => x == y,
                (SpaceTransform::ExpNeg, SpaceTransform::ExpNeg) => true,
                (
                    SpaceTransform::Scaled { factor: fx, inner: ix },
                    SpaceTransform::Scaled { factor: fy, inner: iy },
                ) => fx == fy && st_eq(ix, iy),
                _ => false,
            }
        }
        fn tc_eq(a: &TimeChange, b: &TimeChange) -> bool {
            match (a, b) {
                (TimeChange::Linear, TimeChange::Linear) => true,
                (TimeChange::Power { beta: x }, TimeChange::Power { beta: y }) => x == y,
                (TimeChange::OneMinusExpNeg, TimeChange::OneMinusExpNeg) => true,
                (TimeChange::NegLog, TimeChange::NegLog) => true,
                (TimeChange::ExpNegTail, TimeChange::ExpNegTail) => true,
                (
                    TimeChange::UpperGammaTail { alpha: x },
                    TimeChange::UpperGammaTail { alpha: y },
                ) => x == y,
                (TimeChange::Dirac { at: x }, TimeChange::Dirac { at: y }) => x == y,
                (
                    TimeChange::Scaled { factor: fx, inner: ix },
                    TimeChange::Scaled { factor: fy, inner: iy },
                ) => fx == fy && tc_eq(ix, iy),
                _ => false,
            }
        }
        st_eq(&self.h, &other.h)
            && tc_eq(&self.r, &other.r)
            && self.interval == other.interval
    }
}

/// Result of a clock reversal.
#[derive(Debug, Clone)]
pub struct ReversedMap {
    pub map: IntegralMap,
    /// The reversed form drives the reflected law.
    pub reflect_law: bool,
}

// --- serialization -------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SpaceTransformRepr {
    Const { value: f64 },
    Linear,
    Power { alpha: f64 },
    ExpNeg,
    Scaled { factor: f64, inner: Box<SpaceTransformRepr> },
}

impl TryFrom<&SpaceTransform> for SpaceTransformRepr {
    type Error = CalcError;
    fn try_from(h: &SpaceTransform) -> Result<Self> {
        Ok(match h {
            SpaceTransform::Const { value } => SpaceTransformRepr::Const { value: *value },
            SpaceTransform::Linear => SpaceTransformRepr::Linear,
            SpaceTransform::Power { alpha } => SpaceTransformRepr::Power { alpha: *alpha },
            SpaceTransform::ExpNeg => SpaceTransformRepr::ExpNeg,
            SpaceTransform::Scaled { factor, inner } => SpaceTransformRepr::Scaled {
                factor: *factor,
                inner: Box::new(SpaceTransformRepr::try_from(inner.as_ref())?),
            },
            SpaceTransform::Opaque { label, .. } => {
                return Err(CalcError::Unsupported(format!(
                    "opaque transform {label:?} cannot be serialized"
                )))
            }
        })
    }
}

impl From<SpaceTransformRepr> for SpaceTransform {
    fn from(r: SpaceTransformRepr) -> Self {
        match r {
            SpaceTransformRepr::Const { value } => SpaceTransform::Const { value },
            SpaceTransformRepr::Linear => SpaceTransform::Linear,
            SpaceTransformRepr::Power { alpha } => SpaceTransform::Power { alpha },
            SpaceTransformRepr::ExpNeg => SpaceTransform::ExpNeg,
            SpaceTransformRepr::Scaled { factor, inner } => SpaceTransform::Scaled {
                factor,
                inner: Box::new(SpaceTransform::from(*inner)),
            },
        }
    }
}

impl Serialize for SpaceTransform {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceTransformRepr::try_from(self)
            .map_err(serde::ser::Error::custom)?
            .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SpaceTransform {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(SpaceTransformRepr::deserialize(de)?.into())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TimeChangeRepr {
    Linear,
    Power { beta: f64 },
    OneMinusExpNeg,
    NegLog,
    ExpNegTail,
    UpperGammaTail { alpha: f64 },
    Dirac { at: f64 },
    Scaled { factor: f64, inner: Box<TimeChangeRepr> },
    Flipped { inner: Box<TimeChangeRepr>, anchor: f64 },
}

impl TryFrom<&TimeChange> for TimeChangeRepr {
    type Error = CalcError;
    fn try_from(r: &TimeChange) -> Result<Self> {
        Ok(match r {
            TimeChange::Linear => TimeChangeRepr::Linear,
            TimeChange::Power { beta } => TimeChangeRepr::Power { beta: *beta },
            TimeChange::OneMinusExpNeg => TimeChangeRepr::OneMinusExpNeg,
            TimeChange::NegLog => TimeChangeRepr::NegLog,
            TimeChange::ExpNegTail => TimeChangeRepr::ExpNegTail,
            TimeChange::UpperGammaTail { alpha } => {
                TimeChangeRepr::UpperGammaTail { alpha: *alpha }
            }
            TimeChange::Dirac { at } => TimeChangeRepr::Dirac { at: *at },
            TimeChange::Scaled { factor, inner } => TimeChangeRepr::Scaled {
                factor: *factor,
                inner: Box::new(TimeChangeRepr::try_from(inner.as_ref())?),
            },
            TimeChange::Flipped { inner, anchor } => TimeChangeRepr::Flipped {
                inner: Box::new(TimeChangeRepr::try_from(inner.as_ref())?),
                anchor: *anchor,
            },
            TimeChange::Image(_) => {
                return Err(CalcError::Unsupported(
                    "numeric image clocks cannot be serialized".into(),
                ))
            }
        })
    }
}

impl From<TimeChangeRepr> for TimeChange {
    fn from(r: TimeChangeRepr) -> Self {
        match r {
            TimeChangeRepr::Linear => TimeChange::Linear,
            TimeChangeRepr::Power { beta } => TimeChange::Power { beta },
            TimeChangeRepr::OneMinusExpNeg => TimeChange::OneMinusExpNeg,
            TimeChangeRepr::NegLog => TimeChange::NegLog,
            TimeChangeRepr::ExpNegTail => TimeChange::ExpNegTail,
            TimeChangeRepr::UpperGammaTail { alpha } => TimeChange::UpperGammaTail { alpha },
            TimeChangeRepr::Dirac { at } => TimeChange::Dirac { at },
            TimeChangeRepr::Scaled { factor, inner } => TimeChange::Scaled {
                factor,
                inner: Box::new(TimeChange::from(*inner)),
            },
            TimeChangeRepr::Flipped { inner, anchor } => TimeChange::Flipped {
                inner: Box::new(TimeChange::from(*inner)),
                anchor,
            },
        }
    }
}

impl Serialize for TimeChange {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        TimeChangeRepr::try_from(self)
            .map_err(serde::ser::Error::custom)?
            .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TimeChange {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(TimeChangeRepr::deserialize(de)?.into())
    }
}

#[derive(Serialize, Deserialize)]
struct IntegralMapRepr {
    h: SpaceTransform,
    r: TimeChange,
    a: f64,
    #[serde(with = "crate::serde_ext::maybe_inf")]
    b: f64,
}

impl Serialize for IntegralMap {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        IntegralMapRepr {
            h: self.h.clone(),
            r: self.r.clone(),
            a: self.interval.lo,
            b: self.interval.hi,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for IntegralMap {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = IntegralMapRepr::deserialize(de)?;
        let interval = Interval::new(repr.a, repr.b).map_err(serde::de::Error::custom)?;
        IntegralMap::new(repr.h, repr.r, interval).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn p_functional_exponential_clock() {
        // h = e^{-t}, r = t on (0, ∞), p = 1 -> ∫ e^{-t} dt = 1
        let m = IntegralMap::class_l();
        assert_abs_diff_eq!(m.p_functional(1.0, QuadTol::default()).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn p_functional_power_clock() {
        // h = t, r = t^beta on (0, 1] -> beta / (beta + p)
        for &(beta, p) in &[(0.5, 1.0), (1.0, 0.5), (2.0, 2.0)] {
            let m = IntegralMap::u_beta(beta).unwrap();
            assert_abs_diff_eq!(
                m.p_functional(p, QuadTol::default()).unwrap(),
                beta / (beta + p),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn p_functional_detects_divergence() {
        // h = t, r = t^{-beta} with beta > 2 on (0, 1]: infinite for p <= 2.
        let m = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Power { beta: -3.0 },
            Interval::unit(),
        )
        .unwrap();
        for &p in &[0.5, 1.0, 2.0] {
            assert!(m.p_functional(p, QuadTol::default()).unwrap().is_infinite());
        }
    }

    #[test]
    fn p_functional_neg_log_clock() {
        // h = s, r = -ln s on (0, 1]: ∫ s^p / s ds = 1/p, with an
        // integrable endpoint singularity for p < 1.
        let m = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::NegLog,
            Interval::unit(),
        )
        .unwrap();
        for &p in &[0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(
                m.p_functional(p, QuadTol::default()).unwrap(),
                1.0 / p,
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn classify_trivial_maps() {
        assert_eq!(IntegralMap::zero().classify(), MapClass::Zero);
        assert_eq!(IntegralMap::identity().classify(), MapClass::Identity);
        assert_eq!(IntegralMap::class_l().classify(), MapClass::Generic);
        // Jump clock at u with h(u) = 1 is also the identity.
        let m = IntegralMap::new(
            SpaceTransform::scaled(2.0, SpaceTransform::Linear),
            TimeChange::Dirac { at: 0.5 },
            Interval::unit(),
        )
        .unwrap();
        assert_eq!(m.classify(), MapClass::Identity);
    }

    #[test]
    fn dirac_outside_interior_rejected() {
        let err = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Dirac { at: 1.0 },
            Interval::unit(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn reverse_clock_linear_flip() {
        // r(t) = 1 - t on (0, 1] has r(0+) = 1; reversing yields r(t) = t.
        let m = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Flipped {
                inner: Box::new(TimeChange::Linear),
                anchor: 1.0,
            },
            Interval::unit(),
        )
        .unwrap();
        assert_eq!(m.r.direction(), Direction::Nonincreasing);
        let rev = m.reverse_clock().unwrap();
        assert!(rev.reflect_law);
        assert_eq!(rev.map.r.direction(), Direction::Nondecreasing);
        for t in [0.25, 0.5, 0.75] {
            assert_abs_diff_eq!(rev.map.r.eval(t), t, epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_clock_exp_tail() {
        // r(t) = e^{-t} on (0, ∞): reversed clock is 1 - e^{-t}.
        let m = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::ExpNegTail,
            Interval::half_line(),
        )
        .unwrap();
        let rev = m.reverse_clock().unwrap();
        for t in [0.3, 1.0, 4.0] {
            assert_abs_diff_eq!(rev.map.r.eval(t), 1.0 - (-t as f64).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_clock_infinite_left_limit_errors() {
        let m = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Power { beta: -2.0 },
            Interval::unit(),
        )
        .unwrap();
        assert!(matches!(
            m.reverse_clock(),
            Err(CalcError::UnsupportedReversal)
        ));
    }

    #[test]
    fn clock_increments_match_eval_differences() {
        let clocks: Vec<TimeChange> = vec![
            TimeChange::Linear,
            TimeChange::Power { beta: 2.0 },
            TimeChange::OneMinusExpNeg,
            TimeChange::NegLog,
            TimeChange::ExpNegTail,
            TimeChange::UpperGammaTail { alpha: 1.5 },
        ];
        for r in clocks {
            for (t1, t2) in [(0.2, 0.7), (0.5, 1.5), (1.0, 3.0)] {
                let iv = Interval::new(t1, t2).unwrap();
                let by_eval = (r.eval(t2) - r.eval(t1)).abs();
                let density = r.clone();
                let by_quad = quad::improper(
                    move |t| density.weight(t).unwrap(),
                    t1,
                    t2,
                    QuadTol::default(),
                )
                .unwrap()
                .value_or_inf();
                assert_abs_diff_eq!(by_eval, by_quad, epsilon = 1e-10);
                assert_abs_diff_eq!(r.increment(&iv), by_eval, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn superlevel_masses_are_exact() {
        // Remark-style tail: h = t, r = t^{-2} on (0, ∞):
        // mass{t : t x > v} = (x / v)^2 for v > 0.
        let m = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Power { beta: -2.0 },
            Interval::half_line(),
        )
        .unwrap();
        // Nonincreasing clock: effective transform is -t, so query -x.
        for (x, v) in [(1.0, 0.5), (2.0, 1.0), (1.5, 3.0)] {
            let mass = m.superlevel_clock_mass(-x, v).unwrap();
            assert_abs_diff_eq!(mass, (x / v) * (x / v), epsilon = 1e-10);
        }
    }

    #[test]
    fn invert_increment_round_trips() {
        let r = TimeChange::OneMinusExpNeg;
        let iv = Interval::half_line();
        for frac in [0.1, 0.5, 0.9] {
            let total = r.increment(&iv);
            let t = r.invert_increment(&iv, frac * total).unwrap();
            assert_abs_diff_eq!((r.eval(t) - r.eval(0.0)).abs(), frac * total, epsilon = 1e-9);
        }
    }

    #[test]
    fn map_json_round_trip() {
        let m = IntegralMap::class_l();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"exp_neg\""));
        assert!(json.contains("\"inf\""));
        let back: IntegralMap = serde_json::from_str(&json).unwrap();
        assert!(back.same_shape(&m));
    }

    #[test]
    fn opaque_transform_rejects_serialization() {
        let m = IntegralMap::new(
            SpaceTransform::Opaque {
                label: "custom".into(),
                eval: Arc::new(|t| t),
            },
            TimeChange::Linear,
            Interval::unit(),
        )
        .unwrap();
        assert!(serde_json::to_string(&m).is_err());
    }
}
