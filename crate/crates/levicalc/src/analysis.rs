//! Fixed points of integral mappings, the role of stable laws,
//! factorization of ranges, and the named-class registry with its
//! executable membership predicates.

use serde::{Deserialize, Serialize};

use crate::compose;
use crate::error::{CalcError, Result};
use crate::id_measures::{
    sup_exponent_distance, ExponentFn, LevyMeasure, LevyTriple, Parametric,
};
use crate::kernels::IntegralMap;
use crate::quad::{self, QuadTol};
use crate::transform::{domain_check, transform_exponent};

/// A symmetric strictly stable law with exponent -scale |y|^index;
/// index = 2 is the Gaussian case.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StableLaw {
    pub index: f64,
    pub scale: f64,
}

impl StableLaw {
    pub fn new(index: f64, scale: f64) -> Result<Self> {
        if !(index > 0.0 && index <= 2.0) {
            return Err(CalcError::invalid(
                "stable law",
                format!("index must lie in (0, 2], got {index}"),
            ));
        }
        if !(scale > 0.0) {
            return Err(CalcError::invalid("stable law", "scale must be positive"));
        }
        Ok(StableLaw { index, scale })
    }

    pub fn exponent_fn(&self) -> ExponentFn {
        let (p, s) = (self.index, self.scale);
        ExponentFn::new(
            move |y| Ok(num_complex::Complex64::new(-s * y.abs().powf(p), 0.0)),
            true,
            Some(p),
        )
    }

    /// The characteristic triple of the law.
    pub fn as_triple(&self) -> LevyTriple {
        if self.index == 2.0 {
            LevyTriple::gaussian(2.0 * self.scale)
        } else {
            // Invert scale = coeff π / (Γ(p+1) sin(πp/2)).
            let coeff = self.scale
                * crate::special::gamma(self.index + 1.0)
                * (std::f64::consts::FRAC_PI_2 * self.index).sin()
                / std::f64::consts::PI;
            LevyTriple {
                shift: 0.0,
                gaussian_var: 0.0,
                levy: LevyMeasure::Parametric {
                    family: Parametric::SymStable {
                        index: self.index,
                        coeff,
                    },
                },
            }
        }
    }
}

/// The eigenvalue of a mapping on the p-stable cone: ∫|h|^p dρ.
/// `+inf` means the stable index p is not a fixed point.
pub fn fixed_point_constant(map: &IntegralMap, p: f64, tol: QuadTol) -> Result<f64> {
    map.p_functional(p, tol)
}

/// Fixed-point verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointReport {
    #[serde(with = "crate::serde_ext::maybe_inf")]
    pub constant: f64,
    pub sup_error: f64,
    pub pass: bool,
}

/// Checks that the mapping acts on a stable exponent as multiplication by
/// its fixed-point constant.
pub fn verify_fixed_point(
    map: &IntegralMap,
    law: &StableLaw,
    y_grid: &[f64],
    tol: QuadTol,
) -> Result<FixedPointReport> {
    let c = fixed_point_constant(map, law.index, tol)?;
    if !c.is_finite() {
        return Ok(FixedPointReport {
            constant: c,
            sup_error: f64::INFINITY,
            pass: false,
        });
    }
    let phi = law.exponent_fn();
    let transformed = transform_exponent(map, &phi, tol);
    let scaled = phi.scale(c);
    let sup_error = sup_exponent_distance(&transformed, &scaled, y_grid)?;
    Ok(FixedPointReport {
        constant: c,
        sup_error,
        pass: sup_error < 1e-8,
    })
}

/// One row of a preservation scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservationRow {
    pub p: f64,
    #[serde(with = "crate::serde_ext::maybe_inf")]
    pub constant: f64,
    pub finite: bool,
}

/// Stability-class preservation: the scan is positive iff every index in
/// the grid has a finite constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreservationReport {
    pub rows: Vec<PreservationRow>,
    pub preserved: bool,
}

pub fn class_preservation_scan(
    map: &IntegralMap,
    p_grid: &[f64],
    tol: QuadTol,
) -> Result<PreservationReport> {
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let c = fixed_point_constant(map, p, tol)?;
        rows.push(PreservationRow {
            p,
            constant: c,
            finite: c.is_finite(),
        });
    }
    let preserved = rows.iter().all(|r| r.finite);
    Ok(PreservationReport { rows, preserved })
}

/// Factorization verification report. A failed measure condition is a
/// negative report, not an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub images_ok: bool,
    pub measure_condition_ok: bool,
    pub identity_sup_error: Option<f64>,
    pub pass: bool,
}

/// Checks the factorization identity: with λ the prime-map image of ν,
/// the convolution of the mu-map image of λ with λ recovers the mu-map
/// image of ν. Also verifies the image-interval hypothesis and the
/// measure domination condition that the identity rests on.
pub fn check_factorization(
    mu_map: &IntegralMap,
    prime_map: &IntegralMap,
    law: &LevyTriple,
    y_grid: &[f64],
    tolerance: f64,
    tol: QuadTol,
) -> Result<FactorizationReport> {
    for (name, m) in [("mu", mu_map), ("prime", prime_map)] {
        let report = domain_check(m, law, QuadTol::coarse())?;
        if !report.admitted {
            return Err(CalcError::not_in_domain(format!(
                "law rejected by the {name} map"
            )));
        }
    }

    // Image hypothesis, compared on interval interiors with the endpoint
    // topology relaxed (a zero infimum is allowed).
    let zero_mu = mu_map.classify() == crate::kernels::MapClass::Zero;
    let zero_prime = prime_map.classify() == crate::kernels::MapClass::Zero;
    let images_ok = if zero_mu || zero_prime {
        zero_mu && zero_prime
    } else {
        let (a0, a1) = abs_image(mu_map)?;
        let (b0, b1) = abs_image(prime_map)?;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()));
        close(a0, b0)
            && close(a1, b1)
            && close(a0 * b0, a0)
            && close(a1 * b1, a1)
    };

    // Measure condition: the image of the product measure must equal the
    // tail difference and stay nonnegative.
    let measure_condition_ok = if zero_mu || zero_prime {
        zero_mu
    } else {
        let tail_mu = compose::image_tail(std::slice::from_ref(mu_map));
        let tail_prime = compose::image_tail(std::slice::from_ref(prime_map));
        let tail_pair = compose::image_tail(&[mu_map.clone(), prime_map.clone()]);
        let (lo, hi) = abs_image(mu_map)?;
        let lo = lo.max(1e-4);
        let hi = if hi.is_finite() { hi * 0.999 } else { 1e3 };
        let mut ok = true;
        let n = 9;
        for k in 0..n {
            let w = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            let diff = tail_mu(w) - tail_prime(w);
            let pair = tail_pair(w);
            if diff < -1e-9 || (diff - pair).abs() > 1e-6 * (1.0 + pair.abs()) {
                ok = false;
                break;
            }
        }
        ok
    };

    // The identity itself, at the exponent level.
    let inner_tol = tol.scaled(0.1);
    let phi = law.exponent_fn(inner_tol);
    let lambda = transform_exponent(prime_map, &phi, inner_tol);
    let lhs = transform_exponent(mu_map, &lambda, tol).add(&lambda);
    let rhs = transform_exponent(mu_map, &phi, tol);
    let identity_sup_error = sup_exponent_distance(&lhs, &rhs, y_grid)?;

    let pass = images_ok && measure_condition_ok && identity_sup_error <= tolerance;
    Ok(FactorizationReport {
        images_ok,
        measure_condition_ok,
        identity_sup_error: Some(identity_sup_error),
        pass,
    })
}

fn abs_image(map: &IntegralMap) -> Result<(f64, f64)> {
    let (lo, hi) = map.h.image(&map.interval)?;
    Ok((lo.abs().min(hi.abs()), lo.abs().max(hi.abs())))
}

/// w coth w, stable near zero.
fn w_coth_w(w: f64) -> f64 {
    if w.abs() < 1e-4 {
        1.0 + w * w / 3.0 - w.powi(4) / 45.0
    } else {
        w * w.cosh() / w.sinh()
    }
}

/// One row of the area-identity report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaReport {
    pub rows: Vec<AreaRow>,
    pub algebraic_sup_error: f64,
    pub integral_sup_error: f64,
    pub pass: bool,
}

/// The conditional area law: its characteristic function factors as
/// χ = φ ψ with φ(t) = tu/sinh(tu) and ψ(t) = exp(1 - tu coth(tu)), and
/// log φ is the selfdecomposable transform of log ψ:
/// log(tu / sinh(tu)) = ∫_0^∞ [1 - e^{-s} t u coth(e^{-s} t u)] ds.
pub fn stochastic_area_identity(u: f64, t_grid: &[f64], tol: QuadTol) -> Result<AreaReport> {
    if !(u > 0.0) {
        return Err(CalcError::invalid("area identity", "need u > 0"));
    }
    let mut algebraic_sup: f64 = 0.0;
    let mut integral_sup: f64 = 0.0;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let w = t * u;
        let chi = if w == 0.0 {
            1.0
        } else {
            w / w.sinh() * (-(w_coth_w(w) - 1.0)).exp()
        };
        let phi = if w == 0.0 { 1.0 } else { w / w.sinh() };
        let psi = (-(w_coth_w(w) - 1.0)).exp();
        algebraic_sup = algebraic_sup.max((chi - phi * psi).abs());

        let lhs = if w == 0.0 { 0.0 } else { (w / w.sinh()).ln() };
        let rhs = quad::improper(
            move |s| 1.0 - w_coth_w((-s).exp() * w),
            0.0,
            f64::INFINITY,
            tol,
        )?
        .value_or_inf();
        integral_sup = integral_sup.max((lhs - rhs).abs());
        rows.push(AreaRow { t, lhs, rhs });
    }
    Ok(AreaReport {
        rows,
        algebraic_sup_error: algebraic_sup,
        integral_sup_error: integral_sup,
        pass: integral_sup < 1e-6,
    })
}

/// Named classes: mapping ranges carry their defining map and are
/// decided constructively through its domain; moment classes carry an
/// executable tail-moment predicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassTag {
    /// Selfdecomposable laws: range of the exponential space map.
    SelfdecL,
    /// m-times selfdecomposable laws.
    IteratedL { m: u32 },
    /// Range of the unit power map with clock t^beta.
    UBeta { beta: f64 },
    /// Range of the Γ(0; w)-clock map.
    Thorin,
    /// Range of the exponential-cdf map.
    ExpCdfE,
    /// Finite tail log-moment.
    IdLog,
    /// Finite m-th power tail log-moment.
    IdLogPow { m: u32 },
    /// Finite |x|^{-beta} tail moment, -2 < beta < 0.
    IdBeta { beta: f64 },
    /// Finite second moment.
    Id2,
}

impl ClassTag {
    pub fn label(&self) -> String {
        match self {
            ClassTag::SelfdecL => "L".into(),
            ClassTag::IteratedL { m } => format!("L_{m}"),
            ClassTag::UBeta { beta } => format!("U_{beta}"),
            ClassTag::Thorin => "T".into(),
            ClassTag::ExpCdfE => "E".into(),
            ClassTag::IdLog => "ID_log".into(),
            ClassTag::IdLogPow { m } => format!("ID_log^{m}"),
            ClassTag::IdBeta { beta } => format!("ID_{beta}"),
            ClassTag::Id2 => "ID_2".into(),
        }
    }

    /// The defining map of a range class.
    pub fn defining_map(&self) -> Result<Option<IntegralMap>> {
        Ok(match self {
            ClassTag::SelfdecL => Some(IntegralMap::class_l()),
            ClassTag::IteratedL { m } => {
                let factors: Vec<IntegralMap> =
                    (0..*m).map(|_| IntegralMap::class_l()).collect();
                Some(compose::compose(&factors)?)
            }
            ClassTag::UBeta { beta } => Some(IntegralMap::u_beta(*beta)?),
            ClassTag::Thorin => Some(compose::compose(&[
                IntegralMap::class_l(),
                IntegralMap::upsilon(),
            ])?),
            ClassTag::ExpCdfE => Some(IntegralMap::upsilon()),
            _ => None,
        })
    }
}

/// Membership verdict. Range classes are decided constructively: the
/// report carries the defining map and whether the law is admitted by
/// its domain (so a member of the class can be built from it).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    pub tag: String,
    pub member: Option<bool>,
    #[serde(with = "crate::serde_ext::maybe_inf")]
    pub moment_value: f64,
    pub constructive_only: bool,
    pub domain_admits: Option<bool>,
}

pub fn class_membership(
    tag: &ClassTag,
    law: &LevyTriple,
    tol: QuadTol,
) -> Result<MembershipReport> {
    match tag {
        ClassTag::IdLog => {
            let v = law.levy.log_moment(1, tol)?;
            Ok(moment_report(tag, v))
        }
        ClassTag::IdLogPow { m } => {
            let v = law.levy.log_moment(*m, tol)?;
            Ok(moment_report(tag, v))
        }
        ClassTag::Id2 => {
            let v = law.levy.abs_moment_outside(2.0, tol)?;
            Ok(moment_report(tag, v))
        }
        ClassTag::IdBeta { beta } => {
            if !(*beta < 0.0 && *beta > -2.0) {
                return Err(CalcError::invalid(
                    "class tag",
                    "beta must lie in (-2, 0)",
                ));
            }
            if *beta <= -1.0 && !law.is_symmetric() {
                return Err(CalcError::Unsupported(
                    "the negative-moment class with beta <= -1 is only decided for \
                     symmetric laws"
                        .into(),
                ));
            }
            let v = law.levy.abs_moment_outside(-beta, tol)?;
            Ok(moment_report(tag, v))
        }
        range_class => {
            let map = range_class
                .defining_map()?
                .expect("range classes carry a defining map");
            let admits = match &map.factors {
                // Composed defining maps: check the innermost factor's
                // domain chainwise via the canonical constituents.
                Some(factors) => factors
                    .iter()
                    .rev()
                    .try_fold(true, |acc, m| -> Result<bool> {
                        Ok(acc && domain_check(m, law, QuadTol::coarse())?.admitted)
                    })?,
                None => domain_check(&map, law, QuadTol::coarse())?.admitted,
            };
            Ok(MembershipReport {
                tag: tag.label(),
                member: None,
                moment_value: f64::NAN,
                constructive_only: true,
                domain_admits: Some(admits),
            })
        }
    }
}

fn moment_report(tag: &ClassTag, value: f64) -> MembershipReport {
    MembershipReport {
        tag: tag.label(),
        member: Some(value.is_finite()),
        moment_value: value,
        constructive_only: false,
        domain_admits: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id_measures::{Atom, DensityForm, DensityPiece, DEFAULT_Y_GRID};
    use crate::kernels::{Interval, SpaceTransform, TimeChange};
    use approx::assert_abs_diff_eq;

    fn tol() -> QuadTol {
        QuadTol::default()
    }

    fn remark_map() -> IntegralMap {
        IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Power { beta: -3.0 },
            Interval::unit(),
        )
        .unwrap()
    }

    #[test]
    fn fixed_point_constants_closed_forms() {
        for &(beta, p) in &[(0.5, 1.0), (1.0, 1.0), (2.0, 0.5)] {
            let m = IntegralMap::u_beta(beta).unwrap();
            assert_abs_diff_eq!(
                fixed_point_constant(&m, p, tol()).unwrap(),
                beta / (beta + p),
                epsilon = 1e-8
            );
        }
        for &p in &[0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(
                fixed_point_constant(&IntegralMap::class_l(), p, tol()).unwrap(),
                1.0 / p,
                epsilon = 1e-8
            );
            assert!(fixed_point_constant(&remark_map(), p, tol())
                .unwrap()
                .is_infinite());
        }
    }

    #[test]
    fn stable_laws_are_fixed_points() {
        // Identity map: c = 1 for every stable law.
        for &p in &[0.5, 1.0, 2.0] {
            let law = StableLaw::new(p, 1.0).unwrap();
            let r = verify_fixed_point(&IntegralMap::identity(), &law, &DEFAULT_Y_GRID, tol())
                .unwrap();
            assert!(r.pass);
            assert_abs_diff_eq!(r.constant, 1.0, epsilon = 1e-10);
        }
        // Gaussian under h = t, r = t on (0, 1]: c = 1/3.
        let gauss = StableLaw::new(2.0, 0.5).unwrap();
        let r =
            verify_fixed_point(&IntegralMap::u_beta(1.0).unwrap(), &gauss, &DEFAULT_Y_GRID, tol())
                .unwrap();
        assert!(r.pass, "sup {}", r.sup_error);
        assert_abs_diff_eq!(r.constant, 1.0 / 3.0, epsilon = 1e-10);
        // Cauchy under the selfdecomposable map: c = 1.
        let cauchy = StableLaw::new(1.0, 1.0).unwrap();
        let r = verify_fixed_point(&IntegralMap::class_l(), &cauchy, &DEFAULT_Y_GRID, tol())
            .unwrap();
        assert!(r.pass, "sup {}", r.sup_error);
        assert_abs_diff_eq!(r.constant, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn stable_triples_round_trip_through_exponents() {
        for &p in &[0.6, 1.0, 1.7, 2.0] {
            let law = StableLaw::new(p, 0.8).unwrap();
            let triple = law.as_triple();
            let a = law.exponent_fn();
            let b = triple.exponent_fn(tol());
            assert!(sup_exponent_distance(&a, &b, &DEFAULT_Y_GRID).unwrap() < 1e-10);
        }
    }

    #[test]
    fn index_is_preserved_by_transforms() {
        let law = StableLaw::new(1.3, 1.0).unwrap();
        let t = transform_exponent(&IntegralMap::class_l(), &law.exponent_fn(), tol());
        assert_eq!(t.stable_index, Some(1.3));
        // And the transformed exponent is c times the original.
        let c = fixed_point_constant(&IntegralMap::class_l(), 1.3, tol()).unwrap();
        let d = sup_exponent_distance(&t, &law.exponent_fn().scale(c), &DEFAULT_Y_GRID).unwrap();
        assert!(d < 1e-8);
    }

    #[test]
    fn preservation_scan() {
        let grid = [0.25, 0.5, 1.0, 1.5, 2.0];
        assert!(class_preservation_scan(&IntegralMap::class_l(), &grid, tol())
            .unwrap()
            .preserved);
        assert!(class_preservation_scan(&IntegralMap::identity(), &grid, tol())
            .unwrap()
            .preserved);
        assert!(!class_preservation_scan(&remark_map(), &grid, tol())
            .unwrap()
            .preserved);
    }

    #[test]
    fn fixed_point_constant_is_multiplicative_under_composition() {
        let composed =
            compose::compose(&[IntegralMap::class_l(), IntegralMap::upsilon()]).unwrap();
        for &p in &[0.5, 1.0, 1.5] {
            let joint = fixed_point_constant(&composed, p, tol()).unwrap();
            let split = fixed_point_constant(&IntegralMap::class_l(), p, tol()).unwrap()
                * fixed_point_constant(&IntegralMap::upsilon(), p, tol()).unwrap();
            assert_abs_diff_eq!(joint, split, epsilon = 1e-8 * split.abs().max(1.0));
        }
    }

    #[test]
    fn selfdecomposable_factorization() {
        // mu = exponential space map, prime = unit-interval Lebesgue map.
        let mu = IntegralMap::class_l();
        let prime = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Linear,
            Interval::unit(),
        )
        .unwrap();
        let law = LevyTriple::new(
            0.2,
            0.3,
            LevyMeasure::atoms(vec![Atom::new(0.8, 0.6), Atom::new(-1.2, 0.4)]),
        )
        .unwrap();
        let report =
            check_factorization(&mu, &prime, &law, &DEFAULT_Y_GRID, 1e-6, tol()).unwrap();
        assert!(report.images_ok);
        assert!(report.measure_condition_ok);
        assert!(
            report.identity_sup_error.unwrap() < 1e-6,
            "sup {:?}",
            report.identity_sup_error
        );
        assert!(report.pass);
    }

    #[test]
    fn swapped_pair_fails_the_measure_condition() {
        // With the roles swapped the Lebesgue tail does not dominate.
        let mu = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Linear,
            Interval::unit(),
        )
        .unwrap();
        let prime = IntegralMap::class_l();
        let law = LevyTriple::new(0.0, 0.5, LevyMeasure::single_atom(0.5, 0.3)).unwrap();
        let report =
            check_factorization(&mu, &prime, &law, &DEFAULT_Y_GRID, 1e-6, tol()).unwrap();
        assert!(!report.measure_condition_ok);
        assert!(!report.pass);
    }

    #[test]
    fn trivial_factorization_of_zero_maps() {
        let report = check_factorization(
            &IntegralMap::zero(),
            &IntegralMap::zero(),
            &LevyTriple::gaussian(1.0),
            &DEFAULT_Y_GRID,
            1e-6,
            tol(),
        )
        .unwrap();
        assert!(report.pass);
        // Zero with identity violates the measure condition but still
        // produces a report rather than an error.
        let report = check_factorization(
            &IntegralMap::zero(),
            &IntegralMap::identity(),
            &LevyTriple::gaussian(1.0),
            &DEFAULT_Y_GRID,
            1e-6,
            tol(),
        )
        .unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn area_identity_values() {
        let report = stochastic_area_identity(1.0, &[1.0], tol()).unwrap();
        assert!(report.algebraic_sup_error < 1e-15);
        let row = &report.rows[0];
        assert_abs_diff_eq!(row.lhs, -(1.0f64.sinh()).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(row.lhs, -0.161_439_361_571_197_17, epsilon = 1e-12);
        assert!((row.lhs - row.rhs).abs() < 1e-7, "{row:?}");
    }

    #[test]
    fn area_identity_vanishes_at_zero() {
        let report = stochastic_area_identity(2.0, &[1e-9], tol()).unwrap();
        let row = &report.rows[0];
        assert!(row.lhs.abs() < 1e-12);
        assert!(row.rhs.abs() < 1e-8);
    }

    #[test]
    fn area_identity_over_grid() {
        let ts: Vec<f64> = (0..20).map(|i| 0.1 + 4.9 * i as f64 / 19.0).collect();
        for &u in &[0.5, 1.0, 2.0] {
            let report = stochastic_area_identity(u, &ts, tol()).unwrap();
            assert!(report.pass, "u = {u}: sup {}", report.integral_sup_error);
        }
    }

    #[test]
    fn moment_class_fixtures() {
        let t = tol();
        // Bounded jumps: in ID_log and every power, and in ID_2.
        let bounded = LevyTriple::compound_poisson(vec![Atom::new(2.0, 1.0)]).unwrap();
        for tag in [ClassTag::IdLog, ClassTag::IdLogPow { m: 3 }, ClassTag::Id2] {
            let r = class_membership(&tag, &bounded, t).unwrap();
            assert_eq!(r.member, Some(true), "{tag:?}");
        }

        // x^{-2} tail: ID_log with value 1, not ID_2.
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
        let r = class_membership(&ClassTag::IdLog, &heavy, t).unwrap();
        assert_eq!(r.member, Some(true));
        assert_abs_diff_eq!(r.moment_value, 1.0, epsilon = 1e-6);
        let r = class_membership(&ClassTag::Id2, &heavy, t).unwrap();
        assert_eq!(r.member, Some(false));

        // Gamma jumps: second moment c (1 + λ) e^{-λ} / λ² outside the ball.
        let gamma = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Parametric {
                family: Parametric::Gamma {
                    shape: 1.5,
                    rate: 2.0,
                    side: 1,
                },
            },
        )
        .unwrap();
        let r = class_membership(&ClassTag::Id2, &gamma, t).unwrap();
        assert_eq!(r.member, Some(true));
        let expected = 1.5 * (1.0 + 2.0) * (-2.0f64).exp() / 4.0;
        assert_abs_diff_eq!(r.moment_value, expected, epsilon = 1e-8);

        // Symmetric stable: log moment 2c/p², no second moment.
        let p = 1.2;
        let stable = StableLaw::new(p, 1.0).unwrap().as_triple();
        let r = class_membership(&ClassTag::IdLog, &stable, t).unwrap();
        let coeff = match &stable.levy {
            LevyMeasure::Parametric {
                family: Parametric::SymStable { coeff, .. },
            } => *coeff,
            _ => unreachable!(),
        };
        assert_abs_diff_eq!(r.moment_value, 2.0 * coeff / (p * p), epsilon = 1e-7);
        let r = class_membership(&ClassTag::Id2, &stable, t).unwrap();
        assert_eq!(r.member, Some(false));
        // Fractional-moment class: the order-q tail moment of a stable law
        // is finite iff q < p.
        let r = class_membership(&ClassTag::IdBeta { beta: -0.5 }, &stable, t).unwrap();
        assert_eq!(r.member, Some(true));
        let r = class_membership(&ClassTag::IdBeta { beta: -1.5 }, &stable, t).unwrap();
        assert_eq!(r.member, Some(false));

        // Log-divergent fixture is rejected by ID_log.
        let nolog = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Density {
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
            },
        )
        .unwrap();
        let r = class_membership(&ClassTag::IdLog, &nolog, QuadTol::coarse()).unwrap();
        assert_eq!(r.member, Some(false));
    }

    #[test]
    fn negative_moment_class_needs_symmetry_below_minus_one() {
        let asym = LevyTriple::compound_poisson(vec![Atom::new(2.0, 1.0)]).unwrap();
        assert!(matches!(
            class_membership(&ClassTag::IdBeta { beta: -1.5 }, &asym, tol()),
            Err(CalcError::Unsupported(_))
        ));
    }

    #[test]
    fn range_classes_answer_constructively() {
        let law = LevyTriple::compound_poisson(vec![Atom::new(1.0, 1.0)]).unwrap();
        for tag in [
            ClassTag::SelfdecL,
            ClassTag::Thorin,
            ClassTag::ExpCdfE,
            ClassTag::IteratedL { m: 2 },
        ] {
            let r = class_membership(&tag, &law, tol()).unwrap();
            assert!(r.constructive_only);
            assert_eq!(r.domain_admits, Some(true), "{tag:?}");
            assert!(r.member.is_none());
        }
    }
}
