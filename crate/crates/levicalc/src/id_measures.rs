//! Infinitely divisible laws as shift / Gaussian-variance / jump-measure
//! triples, with their exponents and componentwise algebra.
//!
//! The jump measure carries several representations: finite atom lists,
//! piecewise closed-form densities, parametric families, sums, and lazy
//! pushforwards under an integral mapping. Every functional the calculus
//! needs (exponent term, ball mass test, tail moments, compensator
//! corrections) is available on each representation; atoms evaluate in
//! closed form, the rest by adaptive quadrature.
//!
//! The compensator ball is closed: atoms exactly at |x| = 1 are
//! compensated.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CalcError, Result};
use crate::kernels::IntegralMap;
use crate::quad::{self, ImproperC, QuadTol};
use crate::special;

/// Radius of the closed compensator ball.
pub const BALL_RADIUS: f64 = 1.0;

fn in_ball(x: f64) -> bool {
    x.abs() <= BALL_RADIUS
}

/// The integrand of the exponent formula at jump size `x`, in forms that
/// stay accurate as y x -> 0 (the naive cos(z) - 1 loses all precision
/// against x^{-2}-type densities).
fn lk_integrand(y: f64, x: f64) -> Complex64 {
    let z = y * x;
    let half = (0.5 * z).sin();
    let re = -2.0 * half * half;
    let im = if in_ball(x) {
        if z.abs() < 1e-3 {
            let z2 = z * z;
            z * z2 * (-1.0 / 6.0 + z2 * (1.0 / 120.0 - z2 / 5040.0))
        } else {
            z.sin() - z
        }
    } else {
        z.sin()
    };
    Complex64::new(re, im)
}

/// One jump atom: location and mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(x: f64, mass: f64) -> Self {
        Atom { x, mass }
    }
}

/// Closed-form density shapes, evaluated at |x|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityForm {
    Const { value: f64 },
    /// coeff * |x|^exponent
    Power { coeff: f64, exponent: f64 },
    /// coeff * e^{-rate |x|}
    ExpDecay { coeff: f64, rate: f64 },
    /// coeff * |x|^exponent * e^{-rate |x|}
    PowerExp { coeff: f64, exponent: f64, rate: f64 },
    /// coeff * |x|^exponent * (ln |x|)^log_exponent; pieces must satisfy
    /// |x| > 1
    PowerLog {
        coeff: f64,
        exponent: f64,
        log_exponent: f64,
    },
}

impl DensityForm {
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            DensityForm::Const { value } => *value,
            DensityForm::Power { coeff, exponent } => coeff * ax.powf(*exponent),
            DensityForm::ExpDecay { coeff, rate } => coeff * (-rate * ax).exp(),
            DensityForm::PowerExp {
                coeff,
                exponent,
                rate,
            } => coeff * ax.powf(*exponent) * (-rate * ax).exp(),
            DensityForm::PowerLog {
                coeff,
                exponent,
                log_exponent,
            } => coeff * ax.powf(*exponent) * ax.ln().powf(*log_exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            DensityForm::Const { value } => *value >= 0.0,
            DensityForm::Power { coeff, .. } => *coeff >= 0.0,
            DensityForm::ExpDecay { coeff, rate } => *coeff >= 0.0 && *rate > 0.0,
            DensityForm::PowerExp { coeff, rate, .. } => *coeff >= 0.0 && *rate > 0.0,
            DensityForm::PowerLog { coeff, .. } => *coeff >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(CalcError::invalid("density form", format!("{self:?}")))
        }
    }
}

/// Density on one interval excluding zero. Positive support means
/// `0 <= lo < hi`; negative support means `lo < hi <= 0` (with `lo`
/// possibly `-inf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    #[serde(with = "crate::serde_ext::maybe_inf")]
    pub lo: f64,
    #[serde(with = "crate::serde_ext::maybe_inf")]
    pub hi: f64,
    pub form: DensityForm,
}

impl DensityPiece {
    pub fn new(lo: f64, hi: f64, form: DensityForm) -> Result<Self> {
        if !(lo < hi) {
            return Err(CalcError::invalid("density piece", "need lo < hi"));
        }
        if lo < 0.0 && hi > 0.0 {
            return Err(CalcError::invalid(
                "density piece",
                "support must exclude zero",
            ));
        }
        if hi == f64::INFINITY && lo == f64::NEG_INFINITY {
            return Err(CalcError::invalid("density piece", "doubly infinite piece"));
        }
        form.validate()?;
        if let DensityForm::PowerLog { log_exponent, .. } = form {
            if log_exponent != 0.0 && lo.abs().min(hi.abs()) <= 1.0 {
                return Err(CalcError::invalid(
                    "density piece",
                    "log-form pieces must satisfy |x| > 1",
                ));
            }
        }
        Ok(DensityPiece { lo, hi, form })
    }

    fn is_positive_side(&self) -> bool {
        self.hi > 0.0
    }

    /// Mirrors a negative-support piece onto the positive axis.
    fn mirrored(&self) -> DensityPiece {
        DensityPiece {
            lo: -self.hi,
            hi: -self.lo,
            form: self.form,
        }
    }

    /// As a piece on the positive axis plus a sign flag.
    fn positive_view(&self) -> (DensityPiece, f64) {
        if self.is_positive_side() {
            (*self, 1.0)
        } else {
            (self.mirrored(), -1.0)
        }
    }
}

/// Parametric jump-measure families with closed-form exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parametric {
    /// Symmetric stable jump density coeff * |x|^{-index-1}, index in (0, 2).
    SymStable { index: f64, coeff: f64 },
    /// Gamma-subordinator density shape * x^{-1} e^{-rate x} on one side
    /// of the origin (`side` is +1 or -1, default +1).
    Gamma {
        shape: f64,
        rate: f64,
        #[serde(default = "default_side")]
        side: i8,
    },
}

fn default_side() -> i8 {
    1
}

impl Parametric {
    /// Scale of the stable exponent -scale * |y|^p induced by the density
    /// coeff |x|^{-p-1}: scale = coeff * pi / (Γ(p+1) sin(pi p / 2)).
    pub fn stable_scale(index: f64, coeff: f64) -> f64 {
        coeff * std::f64::consts::PI
            / (special::gamma(index + 1.0) * (std::f64::consts::FRAC_PI_2 * index).sin())
    }

    fn validate(&self) -> Result<()> {
        match self {
            Parametric::SymStable { index, coeff } => {
                if !(*index > 0.0 && *index < 2.0) {
                    return Err(CalcError::invalid(
                        "stable family",
                        format!("index must lie in (0, 2), got {index}"),
                    ));
                }
                if !(*coeff > 0.0) {
                    return Err(CalcError::invalid("stable family", "coeff must be positive"));
                }
            }
            Parametric::Gamma { shape, rate, side } => {
                if !(*shape > 0.0 && *rate > 0.0) {
                    return Err(CalcError::invalid(
                        "gamma family",
                        "shape and rate must be positive",
                    ));
                }
                if *side != 1 && *side != -1 {
                    return Err(CalcError::invalid("gamma family", "side must be +1 or -1"));
                }
            }
        }
        Ok(())
    }
}

/// The jump (spectral) measure of an infinitely divisible law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyMeasure {
    Atomic { atoms: Vec<Atom> },
    Density { pieces: Vec<DensityPiece> },
    Parametric { family: Parametric },
    Sum { parts: Vec<LevyMeasure> },
    /// Image of `base` under the mapping's effective space transform,
    /// weighted by its clock measure. Produced by triple transforms;
    /// functionals evaluate by nested quadrature (atoms in closed form).
    Pushforward {
        base: Box<LevyMeasure>,
        map: Box<IntegralMap>,
    },
}

impl LevyMeasure {
    pub fn empty() -> Self {
        LevyMeasure::Atomic { atoms: Vec::new() }
    }

    pub fn atoms(atoms: Vec<Atom>) -> Self {
        LevyMeasure::Atomic { atoms }
    }

    pub fn single_atom(x: f64, mass: f64) -> Self {
        LevyMeasure::Atomic {
            atoms: vec![Atom::new(x, mass)],
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            LevyMeasure::Atomic { atoms } => atoms.is_empty(),
            LevyMeasure::Sum { parts } => parts.iter().all(|p| p.is_empty()),
            LevyMeasure::Pushforward { base, .. } => base.is_empty(),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasure::Atomic { atoms } => {
                for a in atoms {
                    if a.x == 0.0 || !a.x.is_finite() {
                        return Err(CalcError::invalid(
                            "atom",
                            format!("location must be finite and nonzero, got {}", a.x),
                        ));
                    }
                    if !(a.mass > 0.0) || !a.mass.is_finite() {
                        return Err(CalcError::invalid(
                            "atom",
                            format!("mass must be positive and finite, got {}", a.mass),
                        ));
                    }
                }
                Ok(())
            }
            LevyMeasure::Density { pieces } => {
                for p in pieces {
                    DensityPiece::new(p.lo, p.hi, p.form)?;
                }
                let mass = self.ball_mass_test(QuadTol::coarse())?;
                if !mass.is_finite() {
                    return Err(CalcError::invalid(
                        "jump measure",
                        "min(1, x^2) integral diverges; not a valid jump measure",
                    ));
                }
                Ok(())
            }
            LevyMeasure::Parametric { family } => family.validate(),
            LevyMeasure::Sum { parts } => {
                for p in parts {
                    p.validate()?;
                }
                Ok(())
            }
            LevyMeasure::Pushforward { base, .. } => base.validate(),
        }
    }

    /// Structural symmetry check (sufficient, not necessary).
    pub fn is_symmetric(&self) -> bool {
        match self {
            LevyMeasure::Atomic { atoms } => {
                atoms.iter().all(|a| {
                    atoms
                        .iter()
                        .any(|b| (b.x + a.x).abs() < 1e-12 && (b.mass - a.mass).abs() < 1e-12)
                })
            }
            LevyMeasure::Density { pieces } => pieces.iter().all(|p| {
                let m = p.mirrored();
                pieces.iter().any(|q| {
                    (q.lo - m.lo).abs() < 1e-12 && (q.hi - m.hi).abs() < 1e-12 && q.form == m.form
                })
            }),
            LevyMeasure::Parametric { family } => {
                matches!(family, Parametric::SymStable { .. })
            }
            LevyMeasure::Sum { parts } => parts.iter().all(|p| p.is_symmetric()),
            LevyMeasure::Pushforward { base, .. } => base.is_symmetric(),
        }
    }

    pub fn stable_index(&self) -> Option<f64> {
        match self {
            LevyMeasure::Parametric {
                family: Parametric::SymStable { index, .. },
            } => Some(*index),
            _ => None,
        }
    }

    /// ∫ g(|x|) M(dx) over the annulus r_lo < |x| <= r_hi.
    pub fn symmetric_region<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        &self,
        g: F,
        r_lo: f64,
        r_hi: f64,
        tol: QuadTol,
    ) -> Result<f64> {
        self.symmetric_region_dyn(Arc::new(g), r_lo, r_hi, tol)
    }

    fn symmetric_region_dyn(
        &self,
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        r_lo: f64,
        r_hi: f64,
        tol: QuadTol,
    ) -> Result<f64> {
        if r_hi <= r_lo {
            return Ok(0.0);
        }
        match self {
            LevyMeasure::Atomic { atoms } => Ok(atoms
                .iter()
                .filter(|a| a.x.abs() > r_lo && a.x.abs() <= r_hi)
                .map(|a| a.mass * g(a.x.abs()))
                .sum()),
            LevyMeasure::Density { pieces } => {
                let mut total = 0.0;
                for p in pieces {
                    let (pp, _) = p.positive_view();
                    let lo = pp.lo.max(r_lo);
                    let hi = pp.hi.min(r_hi);
                    if hi <= lo {
                        continue;
                    }
                    let form = pp.form;
                    let gg = g.clone();
                    let out = quad::improper(move |x| gg(x) * form.eval(x), lo, hi, tol)?;
                    total += out.value_or_inf();
                    if !total.is_finite() {
                        return Ok(f64::INFINITY);
                    }
                }
                Ok(total)
            }
            LevyMeasure::Parametric { family } => match family {
                Parametric::SymStable { index, coeff } => {
                    let (p, c) = (*index, *coeff);
                    let gg = g.clone();
                    let out = quad::improper(
                        move |x: f64| 2.0 * c * gg(x) * x.powf(-p - 1.0),
                        r_lo,
                        r_hi,
                        tol,
                    )?;
                    Ok(out.value_or_inf())
                }
                Parametric::Gamma { shape, rate, .. } => {
                    let (c, lam) = (*shape, *rate);
                    let gg = g.clone();
                    let out = quad::improper(
                        move |x: f64| c * gg(x) * (-lam * x).exp() / x,
                        r_lo,
                        r_hi,
                        tol,
                    )?;
                    Ok(out.value_or_inf())
                }
            },
            LevyMeasure::Sum { parts } => {
                let mut total = 0.0;
                for part in parts {
                    total += part.symmetric_region_dyn(g.clone(), r_lo, r_hi, tol)?;
                    if !total.is_finite() {
                        return Ok(f64::INFINITY);
                    }
                }
                Ok(total)
            }
            LevyMeasure::Pushforward { base, map } => {
                let map = map.clone();
                let base = base.clone();
                let breaks = pushforward_breakpoints(&base, &map, &[r_lo, r_hi]);
                let inner_tol = tol.scaled(0.1);
                let h = map.effective_space();
                let g_outer = g.clone();
                let out = map.stieltjes(
                    move |t| {
                        let u = h.eval(t).abs();
                        if u == 0.0 {
                            return 0.0;
                        }
                        let gg = g_outer.clone();
                        let scaled: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
                            Arc::new(move |x| gg(u * x));
                        base.symmetric_region_dyn(scaled, r_lo / u, r_hi / u, inner_tol)
                            .unwrap_or(f64::NAN)
                    },
                    &breaks,
                    tol,
                )?;
                Ok(out.value_or_inf())
            }
        }
    }

    /// ∫ sign(x) g(|x|) M(dx) over the annulus r_lo < |x| <= r_hi.
    pub fn signed_region<F: Fn(f64) -> f64 + Send + Sync + 'static>(
        &self,
        g: F,
        r_lo: f64,
        r_hi: f64,
        tol: QuadTol,
    ) -> Result<f64> {
        self.signed_region_dyn(Arc::new(g), r_lo, r_hi, tol)
    }

    fn signed_region_dyn(
        &self,
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        r_lo: f64,
        r_hi: f64,
        tol: QuadTol,
    ) -> Result<f64> {
        if r_hi <= r_lo {
            return Ok(0.0);
        }
        match self {
            LevyMeasure::Atomic { atoms } => Ok(atoms
                .iter()
                .filter(|a| a.x.abs() > r_lo && a.x.abs() <= r_hi)
                .map(|a| a.mass * a.x.signum() * g(a.x.abs()))
                .sum()),
            LevyMeasure::Density { pieces } => {
                let mut total = 0.0;
                for p in pieces {
                    let (pp, sign) = p.positive_view();
                    let lo = pp.lo.max(r_lo);
                    let hi = pp.hi.min(r_hi);
                    if hi <= lo {
                        continue;
                    }
                    let form = pp.form;
                    let gg = g.clone();
                    let out = quad::improper(move |x| gg(x) * form.eval(x), lo, hi, tol)?;
                    total += sign * out.value_or_inf();
                }
                Ok(total)
            }
            LevyMeasure::Parametric { family } => match family {
                Parametric::SymStable { .. } => Ok(0.0),
                Parametric::Gamma { shape, rate, side } => {
                    let (c, lam, s) = (*shape, *rate, f64::from(*side));
                    let gg = g.clone();
                    let out = quad::improper(
                        move |x: f64| c * gg(x) * (-lam * x).exp() / x,
                        r_lo,
                        r_hi,
                        tol,
                    )?;
                    Ok(s * out.value_or_inf())
                }
            },
            LevyMeasure::Sum { parts } => {
                let mut total = 0.0;
                for part in parts {
                    total += part.signed_region_dyn(g.clone(), r_lo, r_hi, tol)?;
                }
                Ok(total)
            }
            LevyMeasure::Pushforward { base, map } => {
                let map = map.clone();
                let base = base.clone();
                let breaks = pushforward_breakpoints(&base, &map, &[r_lo, r_hi]);
                let inner_tol = tol.scaled(0.1);
                let h = map.effective_space();
                let g_outer = g.clone();
                let out = map.stieltjes(
                    move |t| {
                        let hv = h.eval(t);
                        let u = hv.abs();
                        if u == 0.0 {
                            return 0.0;
                        }
                        let gg = g_outer.clone();
                        let scaled: Arc<dyn Fn(f64) -> f64 + Send + Sync> =
                            Arc::new(move |x| gg(u * x));
                        let inner = base
                            .signed_region_dyn(scaled, r_lo / u, r_hi / u, inner_tol)
                            .unwrap_or(f64::NAN);
                        hv.signum() * inner
                    },
                    &breaks,
                    tol,
                )?;
                Ok(out.value_or_inf())
            }
        }
    }

    /// Mass of {x > v} (positive side) or {x < -v} (negative side), v > 0.
    pub fn one_sided_tail(&self, v: f64, positive_side: bool, tol: QuadTol) -> Result<f64> {
        if !(v > 0.0) {
            return Err(CalcError::invalid("tail threshold", "need v > 0"));
        }
        match self {
            LevyMeasure::Atomic { atoms } => Ok(atoms
                .iter()
                .filter(|a| if positive_side { a.x > v } else { a.x < -v })
                .map(|a| a.mass)
                .sum()),
            LevyMeasure::Density { pieces } => {
                let mut total = 0.0;
                for p in pieces {
                    if p.is_positive_side() != positive_side {
                        continue;
                    }
                    let (pp, _) = p.positive_view();
                    let lo = pp.lo.max(v);
                    if pp.hi <= lo {
                        continue;
                    }
                    let form = pp.form;
                    let out = quad::improper(move |x| form.eval(x), lo, pp.hi, tol)?;
                    total += out.value_or_inf();
                }
                Ok(total)
            }
            LevyMeasure::Parametric { family } => match family {
                Parametric::SymStable { index, coeff } => Ok(coeff * v.powf(-index) / index),
                Parametric::Gamma { shape, rate, side } => {
                    let wants = if positive_side { 1 } else { -1 };
                    if *side != wants {
                        Ok(0.0)
                    } else {
                        Ok(shape * special::exp_integral_e1(rate * v)?)
                    }
                }
            },
            LevyMeasure::Sum { parts } => {
                let mut total = 0.0;
                for part in parts {
                    total += part.one_sided_tail(v, positive_side, tol)?;
                }
                Ok(total)
            }
            LevyMeasure::Pushforward { base, map } => {
                // Atomic base: superlevel masses are exact clock increments.
                if let LevyMeasure::Atomic { atoms } = base.as_ref() {
                    let mut total = 0.0;
                    for a in atoms {
                        let x = if positive_side { a.x } else { -a.x };
                        total += a.mass * map.superlevel_clock_mass(x, v)?;
                    }
                    return Ok(total);
                }
                let map = map.clone();
                let base = base.clone();
                let h = map.effective_space();
                let inner_tol = tol.scaled(0.1);
                let out = map.stieltjes(
                    move |t| {
                        let hv = h.eval(t);
                        if hv == 0.0 {
                            return 0.0;
                        }
                        // {x : hv * x > v} resp. {x : hv * x < -v}
                        let side = if positive_side { hv > 0.0 } else { hv < 0.0 };
                        base.one_sided_tail(v / hv.abs(), side, inner_tol)
                            .unwrap_or(f64::NAN)
                    },
                    &[],
                    tol,
                )?;
                Ok(out.value_or_inf())
            }
        }
    }

    /// ∫ min(1, x^2) M(dx): the jump-measure admissibility test.
    /// `+inf` means the candidate is not a valid jump measure.
    pub fn ball_mass_test(&self, tol: QuadTol) -> Result<f64> {
        let quadratic = self.symmetric_region(|x| x * x, 0.0, BALL_RADIUS, tol)?;
        if !quadratic.is_finite() {
            return Ok(f64::INFINITY);
        }
        let tail = self.symmetric_region(|_| 1.0, BALL_RADIUS, f64::INFINITY, tol)?;
        Ok(quadratic + tail)
    }

    /// ∫_{|x| > 1} (ln |x|)^m M(dx).
    pub fn log_moment(&self, power: u32, tol: QuadTol) -> Result<f64> {
        self.symmetric_region(
            move |x| x.ln().powi(power as i32),
            BALL_RADIUS,
            f64::INFINITY,
            tol,
        )
    }

    /// ∫_{|x| > 1} |x|^q M(dx).
    pub fn abs_moment_outside(&self, q: f64, tol: QuadTol) -> Result<f64> {
        self.symmetric_region(move |x| x.powf(q), BALL_RADIUS, f64::INFINITY, tol)
    }

    /// ∫ x [1_B(u x) - 1_B(x)] M(dx): the shift correction picked up when
    /// jumps are dilated by u across the compensator ball.
    pub fn compensator_diff(&self, u: f64, tol: QuadTol) -> Result<f64> {
        let au = u.abs();
        if au == 0.0 || (au - 1.0).abs() < 1e-15 {
            // u = 0 pushes everything to the origin; u = ±1 moves nothing
            // across |x| = 1.
            return Ok(0.0);
        }
        // 1_B(ux) - 1_B(x) is -1 on 1/|u| < |x| <= 1 when |u| > 1, and +1
        // on 1 < |x| <= 1/|u| when |u| < 1.
        if au > 1.0 {
            Ok(-self.signed_region(|x| x, 1.0 / au, 1.0, tol)?)
        } else {
            self.signed_region(|x| x, 1.0, 1.0 / au, tol)
        }
    }

    /// The exponent's jump integral ∫ (e^{iyx} - 1 - iyx 1_B(x)) M(dx).
    pub fn exponent_term(&self, y: f64, tol: QuadTol) -> Result<Complex64> {
        match self {
            LevyMeasure::Atomic { atoms } => Ok(atoms
                .iter()
                .map(|a| lk_integrand(y, a.x) * a.mass)
                .sum()),
            LevyMeasure::Density { pieces } => {
                let mut total = Complex64::new(0.0, 0.0);
                for p in pieces {
                    total += density_piece_exponent(p, y, tol)?;
                }
                Ok(total)
            }
            LevyMeasure::Parametric { family } => match family {
                Parametric::SymStable { index, coeff } => {
                    let scale = Parametric::stable_scale(*index, *coeff);
                    Ok(Complex64::new(-scale * y.abs().powf(*index), 0.0))
                }
                Parametric::Gamma { shape, rate, side } => {
                    let yy = if *side == 1 { y } else { -y };
                    let c = *shape;
                    let lam = *rate;
                    // ∫_0^∞ (e^{iyx} - 1) c x^{-1} e^{-λx} dx = -c Log(1 - iy/λ)
                    let log_term = -c * (Complex64::new(1.0, -yy / lam)).ln();
                    // compensator over (0, 1]: -iy c ∫_0^1 e^{-λx} dx
                    let comp = Complex64::new(0.0, -yy * c * (1.0 - (-lam).exp()) / lam);
                    Ok(log_term + comp)
                }
            },
            LevyMeasure::Sum { parts } => {
                let mut total = Complex64::new(0.0, 0.0);
                for part in parts {
                    total += part.exponent_term(y, tol)?;
                }
                Ok(total)
            }
            LevyMeasure::Pushforward { base, map } => {
                pushforward_exponent_term(base, map, y, tol)
            }
        }
    }

    /// Flattens into sampleable jump components: explicit atoms plus
    /// parametric families. Density parts are binned into atoms; bins are
    /// sized so each holds at most `1/bins` of the piece's (truncated)
    /// mass, and jumps below `eps` are left to the small-jump handling of
    /// the simulator.
    pub fn jump_components(&self, eps: f64, bins: usize) -> Result<(Vec<Atom>, Vec<Parametric>)> {
        match self {
            LevyMeasure::Atomic { atoms } => Ok((atoms.clone(), Vec::new())),
            LevyMeasure::Parametric { family } => Ok((Vec::new(), vec![*family])),
            LevyMeasure::Sum { parts } => {
                let mut atoms = Vec::new();
                let mut families = Vec::new();
                for part in parts {
                    let (a, f) = part.jump_components(eps, bins)?;
                    atoms.extend(a);
                    families.extend(f);
                }
                Ok((atoms, families))
            }
            LevyMeasure::Density { pieces } => {
                let mut atoms = Vec::new();
                for p in pieces {
                    let (pp, sign) = p.positive_view();
                    let lo = pp.lo.max(eps);
                    // Truncate unbounded pieces where the remaining mass is
                    // negligible relative to the piece scale.
                    let hi = if pp.hi.is_finite() {
                        pp.hi
                    } else {
                        let mut hi = lo.max(1.0) * 2.0;
                        let form = pp.form;
                        while form.eval(hi) * hi > 1e-12 && hi < 1e9 {
                            hi *= 2.0;
                        }
                        hi
                    };
                    if hi <= lo {
                        continue;
                    }
                    let form = pp.form;
                    let edges: Vec<f64> = (0..=bins)
                        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
                        .collect();
                    for w in edges.windows(2) {
                        let mass =
                            quad::adaptive(|x| form.eval(x), w[0], w[1], QuadTol::coarse())?.value;
                        if mass <= 0.0 {
                            continue;
                        }
                        let first =
                            quad::adaptive(|x| x * form.eval(x), w[0], w[1], QuadTol::coarse())?
                                .value;
                        let center = (first / mass).clamp(w[0], w[1]);
                        atoms.push(Atom::new(sign * center, mass));
                    }
                }
                Ok((atoms, Vec::new()))
            }
            LevyMeasure::Pushforward { .. } => Err(CalcError::Unsupported(
                "sampling a pushforward jump measure; transform the base law instead".into(),
            )),
        }
    }

    /// Image of the measure under x -> ux (u != 0), in closed form where
    /// the representation allows.
    pub fn dilate(&self, u: f64) -> Result<LevyMeasure> {
        if u == 0.0 || !u.is_finite() {
            return Err(CalcError::invalid("dilation", "need finite u != 0"));
        }
        match self {
            LevyMeasure::Atomic { atoms } => Ok(LevyMeasure::Atomic {
                atoms: atoms.iter().map(|a| Atom::new(u * a.x, a.mass)).collect(),
            }),
            LevyMeasure::Density { pieces } => {
                let mut out = Vec::with_capacity(pieces.len());
                for p in pieces {
                    out.push(dilate_piece(p, u)?);
                }
                Ok(LevyMeasure::Density { pieces: out })
            }
            LevyMeasure::Parametric { family } => match family {
                Parametric::SymStable { index, coeff } => Ok(LevyMeasure::Parametric {
                    family: Parametric::SymStable {
                        index: *index,
                        coeff: coeff * u.abs().powf(*index),
                    },
                }),
                Parametric::Gamma { shape, rate, side } => Ok(LevyMeasure::Parametric {
                    family: Parametric::Gamma {
                        shape: *shape,
                        rate: rate / u.abs(),
                        side: if u > 0.0 { *side } else { -side },
                    },
                }),
            },
            LevyMeasure::Sum { parts } => Ok(LevyMeasure::Sum {
                parts: parts
                    .iter()
                    .map(|p| p.dilate(u))
                    .collect::<Result<Vec<_>>>()?,
            }),
            LevyMeasure::Pushforward { base, map } => {
                // Dilation folds into the mapping's space transform.
                let mut map = map.as_ref().clone();
                map.h = crate::kernels::SpaceTransform::scaled(u, map.h);
                Ok(LevyMeasure::Pushforward {
                    base: base.clone(),
                    map: Box::new(map),
                })
            }
        }
    }

    /// Merge for convolution. Same-representation operands merge natively;
    /// mixed representations fold into a sum (never an error).
    pub fn merge(&self, other: &LevyMeasure) -> LevyMeasure {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        match (self, other) {
            (LevyMeasure::Atomic { atoms: a }, LevyMeasure::Atomic { atoms: b }) => {
                let mut atoms = a.clone();
                for nb in b {
                    if let Some(existing) = atoms.iter_mut().find(|x| x.x == nb.x) {
                        existing.mass += nb.mass;
                    } else {
                        atoms.push(*nb);
                    }
                }
                LevyMeasure::Atomic { atoms }
            }
            (LevyMeasure::Density { pieces: a }, LevyMeasure::Density { pieces: b }) => {
                // Overlapping pieces are fine: evaluation sums pieces.
                let mut pieces = a.clone();
                pieces.extend_from_slice(b);
                LevyMeasure::Density { pieces }
            }
            (LevyMeasure::Sum { parts: a }, LevyMeasure::Sum { parts: b }) => {
                let mut parts = a.clone();
                parts.extend_from_slice(b);
                LevyMeasure::Sum { parts }
            }
            (LevyMeasure::Sum { parts }, other) => {
                let mut parts = parts.clone();
                parts.push(other.clone());
                LevyMeasure::Sum { parts }
            }
            (this, LevyMeasure::Sum { parts }) => {
                let mut out = vec![this.clone()];
                out.extend_from_slice(parts);
                LevyMeasure::Sum { parts: out }
            }
            (this, other) => LevyMeasure::Sum {
                parts: vec![this.clone(), other.clone()],
            },
        }
    }

    /// Scales total mass by c > 0 (convolution power).
    pub fn scale_mass(&self, c: f64) -> LevyMeasure {
        match self {
            LevyMeasure::Atomic { atoms } => LevyMeasure::Atomic {
                atoms: atoms.iter().map(|a| Atom::new(a.x, c * a.mass)).collect(),
            },
            LevyMeasure::Density { pieces } => LevyMeasure::Density {
                pieces: pieces
                    .iter()
                    .map(|p| DensityPiece {
                        form: scale_form(&p.form, c),
                        ..*p
                    })
                    .collect(),
            },
            LevyMeasure::Parametric { family } => match family {
                Parametric::SymStable { index, coeff } => LevyMeasure::Parametric {
                    family: Parametric::SymStable {
                        index: *index,
                        coeff: c * coeff,
                    },
                },
                Parametric::Gamma { shape, rate, side } => LevyMeasure::Parametric {
                    family: Parametric::Gamma {
                        shape: c * shape,
                        rate: *rate,
                        side: *side,
                    },
                },
            },
            LevyMeasure::Sum { parts } => LevyMeasure::Sum {
                parts: parts.iter().map(|p| p.scale_mass(c)).collect(),
            },
            LevyMeasure::Pushforward { base, map } => LevyMeasure::Pushforward {
                base: Box::new(base.scale_mass(c)),
                map: map.clone(),
            },
        }
    }
}

fn scale_form(form: &DensityForm, c: f64) -> DensityForm {
    match *form {
        DensityForm::Const { value } => DensityForm::Const { value: c * value },
        DensityForm::Power { coeff, exponent } => DensityForm::Power {
            coeff: c * coeff,
            exponent,
        },
        DensityForm::ExpDecay { coeff, rate } => DensityForm::ExpDecay {
            coeff: c * coeff,
            rate,
        },
        DensityForm::PowerExp {
            coeff,
            exponent,
            rate,
        } => DensityForm::PowerExp {
            coeff: c * coeff,
            exponent,
            rate,
        },
        DensityForm::PowerLog {
            coeff,
            exponent,
            log_exponent,
        } => DensityForm::PowerLog {
            coeff: c * coeff,
            exponent,
            log_exponent,
        },
    }
}

fn dilate_piece(p: &DensityPiece, u: f64) -> Result<DensityPiece> {
    let au = u.abs();
    // Image density at w is form(w/u) / |u|; the named forms below are
    // closed under that rescaling.
    let form = match p.form {
        DensityForm::Const { value } => DensityForm::Const { value: value / au },
        DensityForm::Power { coeff, exponent } => DensityForm::Power {
            coeff: coeff * au.powf(-exponent - 1.0),
            exponent,
        },
        DensityForm::ExpDecay { coeff, rate } => DensityForm::ExpDecay {
            coeff: coeff / au,
            rate: rate / au,
        },
        DensityForm::PowerExp {
            coeff,
            exponent,
            rate,
        } => DensityForm::PowerExp {
            coeff: coeff * au.powf(-exponent - 1.0),
            exponent,
            rate: rate / au,
        },
        DensityForm::PowerLog { .. } => {
            return Err(CalcError::Unsupported(
                "dilation of log-form densities".into(),
            ))
        }
    };
    let (mut lo, mut hi) = (u * p.lo, u * p.hi);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    DensityPiece::new(lo, hi, form)
}

/// Breakpoints in t where |h(t) x_i| crosses the given radii, for atomic
/// pushforward bases.
fn pushforward_breakpoints(base: &LevyMeasure, map: &IntegralMap, radii: &[f64]) -> Vec<f64> {
    let mut breaks = Vec::new();
    if let LevyMeasure::Atomic { atoms } = base {
        for a in atoms {
            for r in radii {
                if r.is_finite() && *r > 0.0 {
                    breaks.extend(map.h.solve_abs_level(r / a.x.abs(), &map.interval));
                }
            }
        }
    }
    breaks
}

fn pushforward_exponent_term(
    base: &LevyMeasure,
    map: &IntegralMap,
    y: f64,
    tol: QuadTol,
) -> Result<Complex64> {
    let h = map.effective_space();
    let breaks = pushforward_breakpoints(base, map, &[BALL_RADIUS]);
    // ∫ (e^{iy h x} - 1 - iy h x 1_B(h x)) M(dx), pointwise in t.
    let inner: Arc<dyn Fn(f64) -> Result<Complex64> + Send + Sync> = match base {
        LevyMeasure::Atomic { atoms } => {
            let atoms = atoms.clone();
            let h = h.clone();
            Arc::new(move |t: f64| {
                let hv = h.eval(t);
                Ok(atoms
                    .iter()
                    .map(|a| lk_integrand(y, hv * a.x) * a.mass)
                    .sum())
            })
        }
        other => {
            // Generic route: the base exponent at the scaled frequency plus
            // the compensator mismatch between balls |x| <= 1 and
            // |h x| <= 1.
            let base = other.clone();
            let h = h.clone();
            let inner_tol = tol.scaled(0.1);
            Arc::new(move |t: f64| {
                let hv = h.eval(t);
                if hv == 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let main = base.exponent_term(y * hv, inner_tol)?;
                let comp = base.compensator_diff(hv, inner_tol)?;
                Ok(main - Complex64::new(0.0, y * hv * comp))
            })
        }
    };
    let out = map.stieltjes_complex(
        move |t| inner(t).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
        &breaks,
        tol,
    )?;
    match out {
        ImproperC::Converged { value, .. } => Ok(value),
        ImproperC::Divergent => Err(CalcError::not_in_domain(
            "pushforward exponent integral diverges",
        )),
    }
}

/// Exponent contribution of one density piece, handled per decay shape.
fn density_piece_exponent(p: &DensityPiece, y: f64, tol: QuadTol) -> Result<Complex64> {
    let (pp, sign) = p.positive_view();
    // A negative-support piece mirrors onto the positive axis with y -> -y.
    let y_eff = if sign > 0.0 { y } else { -y };
    let form = pp.form;

    if pp.hi.is_finite() {
        return integrate_lk_piece(form, y_eff, pp.lo, pp.hi, tol);
    }

    match form {
        DensityForm::ExpDecay { coeff, rate } | DensityForm::PowerExp { coeff, rate, .. } => {
            // Exponential decay: truncate where the density is below噪 the
            // integrable floor.
            let cut = pp.lo.max(1.0) + (coeff.max(1.0).ln() + 45.0) / rate;
            integrate_lk_piece(form, y_eff, pp.lo, cut, tol)
        }
        DensityForm::Power { coeff, exponent } => {
            if y_eff == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            // Split at X with |y| X large: direct quadrature below, the
            // integration-by-parts series for ∫ e^{iyx} x^q dx above, and
            // the -1 term in closed form.
            let x_split = pp.lo.max(1.0).max(140.0 / y_eff.abs());
            let mut total = integrate_lk_piece(form, y_eff, pp.lo, x_split, tol)?;
            let q = exponent;
            let mass_tail = x_split.powf(q + 1.0) / (-q - 1.0);
            if !mass_tail.is_finite() || q >= -1.0 {
                return Err(CalcError::not_in_domain(
                    "power density tail is not integrable",
                ));
            }
            let (osc, _err) = oscillatory_power_tail(y_eff, q, x_split);
            total += coeff * (osc - Complex64::new(mass_tail, 0.0));
            Ok(total)
        }
        _ => {
            // No special handling: attempt direct quadrature and let the
            // error surface honestly if the oscillatory tail defeats it.
            integrate_lk_piece(form, y_eff, pp.lo, f64::INFINITY, tol)
        }
    }
}

fn integrate_lk_piece(
    form: DensityForm,
    y: f64,
    lo: f64,
    hi: f64,
    tol: QuadTol,
) -> Result<Complex64> {
    let breaks = [BALL_RADIUS];
    let out = quad::improper_complex(
        move |x| lk_integrand(y, x) * form.eval(x),
        lo,
        hi,
        &breaks,
        tol,
    )?;
    match out {
        ImproperC::Converged { value, .. } => Ok(value),
        ImproperC::Divergent => Err(CalcError::not_in_domain(
            "jump integral diverges; not a valid jump measure",
        )),
    }
}

/// ∫_X^∞ e^{iyx} x^q dx for q < -1, via the asymptotic integration-by-
/// parts series; the caller arranges |y| X large enough for the terms to
/// decay. Returns the value and a remainder bound.
fn oscillatory_power_tail(y: f64, q: f64, x_lo: f64) -> (Complex64, f64) {
    let ay = y.abs();
    let sigma = ay * x_lo;
    let i = Complex64::new(0.0, 1.0);
    let phase = Complex64::new(0.0, sigma).exp();
    // J(σ, q) = Σ_k i^{k+1} [Π_{j<k} (q - j)] e^{iσ} σ^{q-k} + remainder
    let mut coeff = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut remainder = f64::INFINITY;
    let mut ik = i;
    for k in 0..40u32 {
        let term = ik * coeff * phase * sigma.powf(q - k as f64);
        sum += term;
        let next_coeff_mag = coeff.norm() * (q - k as f64).abs();
        remainder = next_coeff_mag * sigma.powf(q - k as f64) / (k as f64 + 1.0 - q - 1.0).max(1.0);
        if remainder < 1e-16 * sum.norm().max(1e-300) {
            break;
        }
        coeff *= q - k as f64;
        ik *= i;
    }
    // ∫_X^∞ e^{iyx} x^q dx = |y|^{-(q+1)} J(σ, q), conjugated for y < 0.
    let scale = ay.powf(-(q + 1.0));
    let j = if y >= 0.0 { sum } else { sum.conj() };
    (scale * j, scale * remainder)
}

// --- the exponent as a first-class object ---------------------------------

type ExponentEval = Arc<dyn Fn(f64) -> Result<Complex64> + Send + Sync>;

/// A callable y -> Φ(y) with the metadata the calculus consults.
#[derive(Clone)]
pub struct ExponentFn {
    eval: ExponentEval,
    pub is_symmetric: bool,
    pub stable_index: Option<f64>,
}

impl fmt::Debug for ExponentFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentFn")
            .field("is_symmetric", &self.is_symmetric)
            .field("stable_index", &self.stable_index)
            .finish()
    }
}

impl ExponentFn {
    pub fn new(
        eval: impl Fn(f64) -> Result<Complex64> + Send + Sync + 'static,
        is_symmetric: bool,
        stable_index: Option<f64>,
    ) -> Self {
        ExponentFn {
            eval: Arc::new(eval),
            is_symmetric,
            stable_index,
        }
    }

    pub fn eval(&self, y: f64) -> Result<Complex64> {
        (self.eval)(y)
    }

    /// Pointwise sum (exponent of a convolution).
    pub fn add(&self, other: &ExponentFn) -> ExponentFn {
        let sym = self.is_symmetric && other.is_symmetric;
        let stable = match (self.stable_index, other.stable_index) {
            (Some(p), Some(q)) if p == q => Some(p),
            _ => None,
        };
        let a = self.clone();
        let b = other.clone();
        ExponentFn::new(move |y| Ok(a.eval(y)? + b.eval(y)?), sym, stable)
    }

    /// c·Φ (exponent of the c-th convolution power).
    pub fn scale(&self, c: f64) -> ExponentFn {
        let sym = self.is_symmetric;
        let stable = self.stable_index;
        let a = self.clone();
        ExponentFn::new(move |y| Ok(a.eval(y)? * c), sym, stable)
    }

    /// y -> Φ(-y): the exponent of the reflected law.
    pub fn reflected(&self) -> ExponentFn {
        let sym = self.is_symmetric;
        let stable = self.stable_index;
        let a = self.clone();
        ExponentFn::new(move |y| a.eval(-y), sym, stable)
    }

    /// Checks Φ(0) = 0, Hermitian symmetry, and Re Φ <= 0 on a grid.
    pub fn check_invariants(&self, grid: &[f64], tol: f64) -> Result<()> {
        let zero = self.eval(0.0)?;
        if zero.norm() > tol {
            return Err(CalcError::invalid(
                "exponent",
                format!("Φ(0) = {zero} is not 0"),
            ));
        }
        for &y in grid {
            let plus = self.eval(y)?;
            let minus = self.eval(-y)?;
            if (plus - minus.conj()).norm() > tol {
                return Err(CalcError::invalid(
                    "exponent",
                    format!("Hermitian symmetry fails at y = {y}"),
                ));
            }
            if plus.re > tol {
                return Err(CalcError::invalid(
                    "exponent",
                    format!("Re Φ({y}) = {} > 0", plus.re),
                ));
            }
        }
        Ok(())
    }
}

// --- triples ---------------------------------------------------------------

/// An infinitely divisible law, as its characteristic triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevyTriple {
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub gaussian_var: f64,
    #[serde(default = "LevyMeasure::empty")]
    pub levy: LevyMeasure,
}

impl LevyTriple {
    pub fn new(shift: f64, gaussian_var: f64, levy: LevyMeasure) -> Result<Self> {
        if !(gaussian_var >= 0.0) || !gaussian_var.is_finite() {
            return Err(CalcError::invalid(
                "gaussian variance",
                format!("must be a finite nonnegative number, got {gaussian_var}"),
            ));
        }
        if !shift.is_finite() {
            return Err(CalcError::invalid("shift", "must be finite"));
        }
        levy.validate()?;
        Ok(LevyTriple {
            shift,
            gaussian_var,
            levy,
        })
    }

    pub fn gaussian(var: f64) -> Self {
        LevyTriple {
            shift: 0.0,
            gaussian_var: var,
            levy: LevyMeasure::empty(),
        }
    }

    pub fn point_mass(shift: f64) -> Self {
        LevyTriple {
            shift,
            gaussian_var: 0.0,
            levy: LevyMeasure::empty(),
        }
    }

    pub fn compound_poisson(atoms: Vec<Atom>) -> Result<Self> {
        LevyTriple::new(0.0, 0.0, LevyMeasure::atoms(atoms))
    }

    pub fn is_degenerate_at_zero(&self) -> bool {
        self.shift == 0.0 && self.gaussian_var == 0.0 && self.levy.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.shift == 0.0 && self.levy.is_symmetric()
    }

    /// The exponent Φ(y) = iyz - R y²/2 + ∫(e^{iyx} - 1 - iyx 1_B) M(dx).
    pub fn exponent(&self, y: f64, tol: QuadTol) -> Result<Complex64> {
        let mut phi = Complex64::new(-0.5 * self.gaussian_var * y * y, self.shift * y);
        if !self.levy.is_empty() {
            phi += self.levy.exponent_term(y, tol)?;
        }
        Ok(phi)
    }

    pub fn exponent_fn(&self, tol: QuadTol) -> ExponentFn {
        let law = self.clone();
        let sym = self.is_symmetric();
        let stable = if self.shift == 0.0 && self.gaussian_var == 0.0 {
            self.levy.stable_index()
        } else if self.shift == 0.0 && self.levy.is_empty() && self.gaussian_var > 0.0 {
            Some(2.0)
        } else {
            None
        };
        ExponentFn::new(move |y| law.exponent(y, tol), sym, stable)
    }

    /// Componentwise sum: the triple of the convolution.
    pub fn convolve(&self, other: &LevyTriple) -> LevyTriple {
        LevyTriple {
            shift: self.shift + other.shift,
            gaussian_var: self.gaussian_var + other.gaussian_var,
            levy: self.levy.merge(&other.levy),
        }
    }

    /// All three components scaled by c > 0.
    pub fn convolution_power(&self, c: f64) -> Result<LevyTriple> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(CalcError::invalid(
                "convolution power",
                format!("need c > 0, got {c}"),
            ));
        }
        Ok(LevyTriple {
            shift: c * self.shift,
            gaussian_var: c * self.gaussian_var,
            levy: self.levy.scale_mass(c),
        })
    }

    /// Image of the law under x -> ux.
    pub fn dilate(&self, u: f64, tol: QuadTol) -> Result<LevyTriple> {
        if u == 0.0 || !u.is_finite() {
            return Err(CalcError::invalid("dilation", "need finite u != 0"));
        }
        let correction = if self.levy.is_empty() {
            0.0
        } else {
            self.levy.compensator_diff(u, tol)?
        };
        Ok(LevyTriple {
            shift: u * self.shift + u * correction,
            gaussian_var: u * u * self.gaussian_var,
            levy: if self.levy.is_empty() {
                LevyMeasure::empty()
            } else {
                self.levy.dilate(u)?
            },
        })
    }

    /// The law of the negated variable (dilation by -1).
    pub fn reflect(&self, tol: QuadTol) -> Result<LevyTriple> {
        self.dilate(-1.0, tol)
    }

    /// ∫_{|x|>1} ln|x| M(dx); `+inf` when the tail log-moment diverges.
    pub fn log_moment(&self, tol: QuadTol) -> Result<f64> {
        self.levy.log_moment(1, tol)
    }

    /// Whether ∫_{|x|>1} x² M(dx) is finite (second-moment criterion).
    pub fn has_second_moment(&self, tol: QuadTol) -> Result<bool> {
        Ok(self.levy.abs_moment_outside(2.0, tol)?.is_finite())
    }
}

/// Default frequency grid for exponent identity checks.
pub const DEFAULT_Y_GRID: [f64; 10] = [-5.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0, 5.0];

/// Largest pointwise exponent discrepancy between two exponents on a grid.
pub fn sup_exponent_distance(a: &ExponentFn, b: &ExponentFn, grid: &[f64]) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for &y in grid {
        let d = (a.eval(y)? - b.eval(y)?).norm();
        sup = sup.max(d);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tol() -> QuadTol {
        QuadTol::default()
    }

    #[test]
    fn gaussian_exponent() {
        let t = LevyTriple::gaussian(1.0);
        let phi = t.exponent(1.0, tol()).unwrap();
        assert_abs_diff_eq!(phi.re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn point_mass_exponent() {
        let t = LevyTriple::point_mass(2.0);
        let phi = t.exponent(1.0, tol()).unwrap();
        assert_abs_diff_eq!(phi.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.im, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn single_atom_exponent_at_pi() {
        // e^{iπ} - 1 - iπ = -2 - iπ (the atom sits on the ball boundary and
        // is compensated).
        let t = LevyTriple::compound_poisson(vec![Atom::new(1.0, 1.0)]).unwrap();
        let phi = t.exponent(std::f64::consts::PI, tol()).unwrap();
        assert_abs_diff_eq!(phi.re, -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phi.im, -std::f64::consts::PI, epsilon = 1e-14);
    }

    #[test]
    fn convolve_componentwise() {
        let a = LevyTriple::point_mass(1.0);
        let b = LevyTriple::point_mass(2.0);
        assert_abs_diff_eq!(a.convolve(&b).shift, 3.0);
        let g = LevyTriple::gaussian(1.0).convolve(&LevyTriple::gaussian(1.0));
        assert_abs_diff_eq!(g.gaussian_var, 2.0);
    }

    #[test]
    fn convolve_exponents_add() {
        let a = LevyTriple::new(0.3, 0.7, LevyMeasure::single_atom(1.5, 0.4)).unwrap();
        let b = LevyTriple::new(-0.2, 0.1, LevyMeasure::single_atom(-0.5, 1.1)).unwrap();
        let y = 0.7;
        let lhs = a.convolve(&b).exponent(y, tol()).unwrap();
        let rhs = a.exponent(y, tol()).unwrap() + b.exponent(y, tol()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn convolution_power_componentwise() {
        let t = LevyTriple::new(1.0, 2.0, LevyMeasure::single_atom(1.0, 3.0)).unwrap();
        let t2 = t.convolution_power(2.0).unwrap();
        assert_abs_diff_eq!(t2.shift, 2.0);
        assert_abs_diff_eq!(t2.gaussian_var, 4.0);
        match &t2.levy {
            LevyMeasure::Atomic { atoms } => assert_abs_diff_eq!(atoms[0].mass, 6.0),
            other => panic!("unexpected representation {other:?}"),
        }
        // Identity at c = 1 and the exponent scaling law.
        let y = 1.3;
        let lhs = t.convolution_power(1.7).unwrap().exponent(y, tol()).unwrap();
        let rhs = t.exponent(y, tol()).unwrap() * 1.7;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn dilate_gaussian_and_identity() {
        let t = LevyTriple::gaussian(1.0);
        let d = t.dilate(3.0, tol()).unwrap();
        assert_abs_diff_eq!(d.gaussian_var, 9.0);
        let same = t.dilate(1.0, tol()).unwrap();
        assert_abs_diff_eq!(same.gaussian_var, 1.0);
    }

    #[test]
    fn dilate_atom_shift_correction() {
        // Atom at 0.5 dilated by 4 lands at 2.0; the compensator mass that
        // leaves the ball contributes -2.0 to the shift.
        let t = LevyTriple::compound_poisson(vec![Atom::new(0.5, 1.0)]).unwrap();
        let d = t.dilate(4.0, tol()).unwrap();
        assert_abs_diff_eq!(d.shift, -2.0, epsilon = 1e-12);
        match &d.levy {
            LevyMeasure::Atomic { atoms } => assert_abs_diff_eq!(atoms[0].x, 2.0),
            other => panic!("unexpected representation {other:?}"),
        }
        // Exponent-level oracle: Φ_{T_u ν}(y) = Φ_ν(u y).
        for &y in &[0.3, 1.0, 2.5] {
            let lhs = d.exponent(y, tol()).unwrap();
            let rhs = t.exponent(4.0 * y, tol()).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "y = {y}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn reflect_matches_negated_frequency() {
        let t = LevyTriple::new(1.0, 0.5, LevyMeasure::single_atom(2.0, 0.3)).unwrap();
        let r = t.reflect(tol()).unwrap();
        assert_abs_diff_eq!(LevyTriple::point_mass(1.0).reflect(tol()).unwrap().shift, -1.0);
        let y = 2.0;
        let lhs = r.exponent(y, tol()).unwrap();
        let rhs = t.exponent(-y, tol()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
        // Symmetric laws are fixed by reflection.
        let s = LevyTriple::new(
            0.0,
            1.0,
            LevyMeasure::atoms(vec![Atom::new(1.0, 0.5), Atom::new(-1.0, 0.5)]),
        )
        .unwrap();
        let rs = s.reflect(tol()).unwrap();
        for &y in &[0.5, 1.5] {
            let a = s.exponent(y, tol()).unwrap();
            let b = rs.exponent(y, tol()).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn log_moment_values() {
        // Bounded support: finite.
        let bounded = LevyTriple::compound_poisson(vec![Atom::new(3.0, 1.0)]).unwrap();
        let lm = bounded.log_moment(tol()).unwrap();
        assert_abs_diff_eq!(lm, 3.0f64.ln(), epsilon = 1e-12);

        // Density x^{-2} on (1, ∞): ∫ ln x · x^{-2} dx = 1.
        let heavy = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Density {
                pieces: vec![DensityPiece::new(
                    1.0,
                    f64::INFINITY,
                    DensityForm::Power {
                        coeff: 1.0,
                        exponent: -2.0,
                    },
                )
                .unwrap()],
            },
        )
        .unwrap();
        assert_abs_diff_eq!(heavy.log_moment(tol()).unwrap(), 1.0, epsilon = 1e-7);
    }

    #[test]
    fn harmonic_density_is_not_a_levy_measure() {
        // x^{-1} on (1, ∞) fails the mass test before any moment question.
        let candidate = LevyMeasure::Density {
            pieces: vec![DensityPiece::new(
                1.0,
                f64::INFINITY,
                DensityForm::Power {
                    coeff: 1.0,
                    exponent: -1.0,
                },
            )
            .unwrap()],
        };
        assert!(candidate.validate().is_err());
    }

    #[test]
    fn infinite_log_moment_fixture() {
        // x^{-1} (ln x)^{-2} on (e, ∞) is a valid jump measure (mass 1)
        // whose log moment diverges.
        let levy = LevyMeasure::Density {
            pieces: vec![DensityPiece::new(
                std::f64::consts::E,
                f64::INFINITY,
                DensityForm::PowerLog {
                    coeff: 1.0,
                    exponent: -1.0,
                    log_exponent: -2.0,
                },
            )
            .unwrap()],
        };
        levy.validate().unwrap();
        let mass = levy.ball_mass_test(QuadTol::coarse()).unwrap();
        assert!((mass - 1.0).abs() < 1e-2, "mass {mass}");
        assert!(levy.log_moment(1, QuadTol::coarse()).unwrap().is_infinite());
    }

    #[test]
    fn stable_closed_form_matches_density_representation() {
        // Cauchy-type jumps: density |x|^{-2} on both sides has exponent
        // -π |y|; cross-checks the closed form, the bounded quadrature and
        // the oscillatory tail series.
        let parametric = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Parametric {
                family: Parametric::SymStable {
                    index: 1.0,
                    coeff: 1.0,
                },
            },
        )
        .unwrap();
        let density = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Density {
                pieces: vec![
                    DensityPiece::new(
                        0.0,
                        f64::INFINITY,
                        DensityForm::Power {
                            coeff: 1.0,
                            exponent: -2.0,
                        },
                    )
                    .unwrap(),
                    DensityPiece::new(
                        f64::NEG_INFINITY,
                        0.0,
                        DensityForm::Power {
                            coeff: 1.0,
                            exponent: -2.0,
                        },
                    )
                    .unwrap(),
                ],
            },
        )
        .unwrap();
        for &y in &[0.4, 1.0, 3.0] {
            let closed = parametric.exponent(y, tol()).unwrap();
            assert_abs_diff_eq!(closed.re, -std::f64::consts::PI * y, epsilon = 1e-12);
            let numeric = density.exponent(y, tol()).unwrap();
            assert!(
                (closed - numeric).norm() < 2e-6,
                "y = {y}: closed {closed} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn gamma_exponent_matches_quadrature() {
        let law = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Parametric {
                family: Parametric::Gamma {
                    shape: 1.3,
                    rate: 2.0,
                    side: 1,
                },
            },
        )
        .unwrap();
        for &y in &[0.5, 1.0, 2.0] {
            let closed = law.exponent(y, tol()).unwrap();
            let direct = quad::improper_complex(
                move |x: f64| lk_integrand(y, x) * 1.3 * (-2.0 * x).exp() / x,
                0.0,
                60.0,
                &[BALL_RADIUS],
                QuadTol::tight(),
            )
            .unwrap();
            match direct {
                ImproperC::Converged { value, .. } => {
                    assert!((closed - value).norm() < 1e-8, "y = {y}: {closed} vs {value}")
                }
                ImproperC::Divergent => panic!("unexpected divergence"),
            }
        }
    }

    #[test]
    fn pushforward_tail_is_uniform() {
        // Atom at x0 pushed along h = t with the uniform clock on (0, 1]
        // spreads uniformly on (0, x0]: tail(v) = 1 - v/x0.
        let map = IntegralMap::u_beta(1.0).unwrap();
        let x0 = 2.0;
        let pushed = LevyMeasure::Pushforward {
            base: Box::new(LevyMeasure::single_atom(x0, 1.0)),
            map: Box::new(map),
        };
        for &v in &[0.25, 0.5, 1.0, 1.5] {
            let tail = pushed.one_sided_tail(v, true, tol()).unwrap();
            assert_abs_diff_eq!(tail, 1.0 - v / x0, epsilon = 1e-12);
        }
        // Brute-force oracle for one point: grid count of {t: t x0 > v}.
        let v = 0.8;
        let n = 200_000;
        let count = (1..=n).filter(|i| (*i as f64 / n as f64) * x0 > v).count();
        let brute = count as f64 / n as f64;
        assert!((pushed.one_sided_tail(v, true, tol()).unwrap() - brute).abs() < 1e-4);
    }

    #[test]
    fn serde_round_trip() {
        let t = LevyTriple::new(
            0.5,
            1.0,
            LevyMeasure::Sum {
                parts: vec![
                    LevyMeasure::single_atom(1.0, 2.0),
                    LevyMeasure::Parametric {
                        family: Parametric::Gamma {
                            shape: 1.0,
                            rate: 1.0,
                            side: 1,
                        },
                    },
                ],
            },
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: LevyTriple = serde_json::from_str(&json).unwrap();
        assert_eq!(back.shift, t.shift);
        let y = 0.9;
        let a = t.exponent(y, tol()).unwrap();
        let b = back.exponent(y, tol()).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exponent_invariants_random_atomic(
            shift in -2.0f64..2.0,
            var in 0.0f64..2.0,
            locs in proptest::collection::vec(0.05f64..4.0, 1..4),
            signs in proptest::collection::vec(proptest::bool::ANY, 4),
            masses in proptest::collection::vec(0.05f64..2.0, 1..4),
        ) {
            let atoms: Vec<Atom> = locs
                .iter()
                .zip(masses.iter())
                .enumerate()
                .map(|(i, (&x, &m))| {
                    Atom::new(if signs[i % signs.len()] { x } else { -x }, m)
                })
                .collect();
            let t = LevyTriple::new(shift, var, LevyMeasure::atoms(atoms)).unwrap();
            let phi = t.exponent_fn(QuadTol::default());
            phi.check_invariants(&DEFAULT_Y_GRID, 1e-10).unwrap();
        }

        #[test]
        fn convolution_power_splits(
            c1 in 0.2f64..2.0,
            c2 in 0.2f64..2.0,
        ) {
            let t = LevyTriple::new(0.4, 0.6, LevyMeasure::single_atom(1.2, 0.7)).unwrap();
            let whole = t.convolution_power(c1 + c2).unwrap();
            let split = t
                .convolution_power(c1)
                .unwrap()
                .convolve(&t.convolution_power(c2).unwrap());
            let y = 0.8;
            let a = whole.exponent(y, QuadTol::default()).unwrap();
            let b = split.exponent(y, QuadTol::default()).unwrap();
            prop_assert!((a - b).norm() < 1e-11);
        }

        #[test]
        fn dilate_round_trip(u in 0.3f64..3.0) {
            let t = LevyTriple::new(0.2, 0.5, LevyMeasure::single_atom(0.8, 1.0)).unwrap();
            let round = t
                .dilate(u, QuadTol::default())
                .unwrap()
                .dilate(1.0 / u, QuadTol::default())
                .unwrap();
            for &y in &[0.5f64, 2.0] {
                let a = t.exponent(y, QuadTol::default()).unwrap();
                let b = round.exponent(y, QuadTol::default()).unwrap();
                prop_assert!((a - b).norm() < 1e-10);
            }
        }
    }
}
