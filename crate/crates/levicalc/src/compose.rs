//! Composition of integral mappings: iterated mappings collapse to a
//! single mapping whose clock is the image of the product clock measure
//! under the tensor product of the space transforms.
//!
//! A curated catalog recognizes factor patterns with closed-form image
//! measures; everything else gets a numeric tail function built by
//! nested quadrature. Finite clock measures can additionally be
//! validated by direct Monte Carlo sampling of the factor product.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CalcError, Result};
use crate::id_measures::{sup_exponent_distance, ExponentFn, LevyTriple};
use crate::kernels::{ImageMeasure, IntegralMap, Interval, SpaceTransform, TimeChange};
use crate::quad::{self, QuadTol};
use crate::special;
use crate::transform::transform_exponent;

/// One catalog instance: a recognized factor pattern with its closed-form
/// image measure.
#[derive(Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: String,
    pub validity: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub measure: ImageMeasure,
}

impl std::fmt::Debug for CatalogEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogEntry")
            .field("id", &self.id)
            .field("params", &self.params)
            .finish()
    }
}

/// Image measure of the selfdecomposable-map / exponential-cdf-map pair:
/// density e^{-w}/w on (0, ∞), tail Γ(0; w).
pub fn thorin_measure() -> ImageMeasure {
    ImageMeasure {
        support: (0.0, f64::INFINITY),
        tail: Arc::new(|w| {
            if w <= 0.0 {
                f64::INFINITY
            } else {
                special::exp_integral_e1(w).unwrap_or(f64::NAN)
            }
        }),
        density: Some(Arc::new(|w| (-w).exp() / w)),
        total_mass: f64::INFINITY,
        catalog_id: Some("thorin".to_string()),
    }
}

/// Image measure of the m-fold selfdecomposable map: density
/// (-ln w)^{m-1} / ((m-1)! w) on (0, 1), tail (-ln w)^m / m!.
pub fn iterated_selfdec_measure(m: u32) -> ImageMeasure {
    let mf = special::gamma(m as f64 + 1.0);
    let mf1 = special::gamma(m as f64);
    ImageMeasure {
        support: (0.0, 1.0),
        tail: Arc::new(move |w| {
            if w <= 0.0 {
                f64::INFINITY
            } else if w >= 1.0 {
                0.0
            } else {
                (-w.ln()).powi(m as i32) / mf
            }
        }),
        density: Some(Arc::new(move |w| {
            (-w.ln()).powi(m as i32 - 1) / (mf1 * w)
        })),
        total_mass: f64::INFINITY,
        catalog_id: Some("selfdec_iterated".to_string()),
    }
}

/// Image measure of the power-map pair with exponents (1/beta, 1/(2 beta))
/// on unit intervals: density 2 beta w^{beta-1} (1 - w^beta) on (0, 1],
/// cdf 2 w^beta - w^{2 beta}, tail (1 - w^beta)².
pub fn beta_halfpower_measure(beta: f64) -> ImageMeasure {
    ImageMeasure {
        support: (0.0, 1.0),
        tail: Arc::new(move |w| {
            if w <= 0.0 {
                1.0
            } else if w >= 1.0 {
                0.0
            } else {
                let b = 1.0 - w.powf(beta);
                b * b
            }
        }),
        density: Some(Arc::new(move |w| {
            2.0 * beta * w.powf(beta - 1.0) * (1.0 - w.powf(beta))
        })),
        total_mass: 1.0,
        catalog_id: Some("beta_halfpower".to_string()),
    }
}

/// Image measure of a unit-interval power map composed with the
/// selfdecomposable map: density (1 - w^beta)/w on (0, 1], tail
/// beta^{-1} w^beta - ln w - beta^{-1}.
pub fn power_selfdec_measure(beta: f64) -> ImageMeasure {
    ImageMeasure {
        support: (0.0, 1.0),
        tail: Arc::new(move |w| {
            if w <= 0.0 {
                f64::INFINITY
            } else if w >= 1.0 {
                0.0
            } else {
                w.powf(beta) / beta - w.ln() - 1.0 / beta
            }
        }),
        density: Some(Arc::new(move |w| (1.0 - w.powf(beta)) / w)),
        total_mass: f64::INFINITY,
        catalog_id: Some("power_selfdec".to_string()),
    }
}

/// Image measure of the incomplete-gamma-clock map composed with the
/// selfdecomposable map: density Γ(alpha; w)/w on (0, ∞), tail
/// ∫_w^∞ s^{-1} Γ(alpha; s) ds (numeric).
pub fn gamma_selfdec_measure(alpha: f64) -> ImageMeasure {
    let density: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |w| {
        special::upper_incomplete_gamma(alpha, w).unwrap_or(f64::NAN) / w
    });
    let d2 = density.clone();
    ImageMeasure {
        support: (0.0, f64::INFINITY),
        tail: Arc::new(move |w| {
            if w <= 0.0 {
                return f64::INFINITY;
            }
            quad::improper(|s| d2(s), w, f64::INFINITY, QuadTol::default())
                .map(|o| o.value_or_inf())
                .unwrap_or(f64::NAN)
        }),
        density: Some(density),
        total_mass: f64::INFINITY,
        catalog_id: Some("gamma_selfdec".to_string()),
    }
}

/// The canonical catalog instances.
pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            id: "thorin",
            description: "selfdecomposable map composed with the exponential-cdf map; \
                          clock tail Γ(0; w), density e^{-w}/w on (0, ∞)"
                .to_string(),
            validity: "laws with finite log moment",
            params: vec![],
            measure: thorin_measure(),
        },
        CatalogEntry {
            id: "selfdec_iterated",
            description: "m-fold composition of the selfdecomposable map; equivalent to \
                          the exponential space map with clock t^m/m!"
                .to_string(),
            validity: "laws with finite m-th log moment",
            params: vec![("m", 2.0)],
            measure: iterated_selfdec_measure(2),
        },
        CatalogEntry {
            id: "beta_halfpower",
            description: "power maps with exponents (1/b, 1/(2b)) on unit intervals; \
                          clock cdf 2w^b - w^{2b}, density 2b w^{b-1}(1 - w^b) on (0, 1]"
                .to_string(),
            validity: "all infinitely divisible laws (finite clock)",
            params: vec![("beta", 1.0)],
            measure: beta_halfpower_measure(1.0),
        },
        CatalogEntry {
            id: "power_selfdec",
            description: "unit power map composed with the selfdecomposable map; clock \
                          density (1 - w^b)/w on (0, 1], tail w^b/b - ln w - 1/b"
                .to_string(),
            validity: "laws with finite log moment",
            params: vec![("beta", 1.0)],
            measure: power_selfdec_measure(1.0),
        },
        CatalogEntry {
            id: "gamma_selfdec",
            description: "incomplete-gamma clock map composed with the selfdecomposable \
                          map; clock density Γ(a; w)/w on (0, ∞)"
                .to_string(),
            validity: "laws with finite log moment",
            params: vec![("alpha", 1.0)],
            measure: gamma_selfdec_measure(1.0),
        },
    ]
}

pub fn lookup(id: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.id == id)
}

/// Machine-readable registry of the catalog, shipped with the repository.
pub fn registry_json() -> serde_json::Value {
    json!(catalog()
        .iter()
        .map(|e| {
            json!({
                "id": e.id,
                "description": e.description,
                "validity": e.validity,
                "default_params": e.params.iter().map(|(k, v)| json!({"name": k, "value": v})).collect::<Vec<_>>(),
            })
        })
        .collect::<Vec<_>>())
}

/// The power exponent of a purely power-shaped space transform.
fn power_exponent(h: &SpaceTransform) -> Option<f64> {
    match h {
        SpaceTransform::Linear => Some(1.0),
        SpaceTransform::Power { alpha } => Some(*alpha),
        _ => None,
    }
}

fn is_lebesgue_clock(r: &TimeChange) -> bool {
    matches!(r, TimeChange::Linear) || matches!(r, TimeChange::Power { beta } if *beta == 1.0)
}

fn is_unit_power_map(m: &IntegralMap) -> Option<f64> {
    if is_lebesgue_clock(&m.r) && m.interval == Interval::unit() {
        power_exponent(&m.h)
    } else {
        None
    }
}

fn is_gamma_clock_map(m: &IntegralMap) -> Option<f64> {
    match (&m.h, &m.r) {
        (SpaceTransform::Linear, TimeChange::UpperGammaTail { alpha })
            if m.interval == Interval::half_line() =>
        {
            Some(*alpha)
        }
        _ => None,
    }
}

fn match_catalog(maps: &[IntegralMap]) -> Option<(CatalogEntry, ImageMeasure)> {
    let class_l = IntegralMap::class_l();
    let upsilon = IntegralMap::upsilon();

    if maps.len() >= 1 && maps.iter().all(|m| m.same_shape(&class_l)) {
        let m = maps.len() as u32;
        let measure = iterated_selfdec_measure(m);
        let mut entry = lookup("selfdec_iterated").expect("catalog entry");
        entry.params = vec![("m", m as f64)];
        entry.measure = measure.clone();
        return Some((entry, measure));
    }
    if maps.len() == 2 {
        let pair = (&maps[0], &maps[1]);
        let is = |m: &IntegralMap, probe: &IntegralMap| m.same_shape(probe);
        if (is(pair.0, &class_l) && is(pair.1, &upsilon))
            || (is(pair.0, &upsilon) && is(pair.1, &class_l))
        {
            let measure = thorin_measure();
            let entry = lookup("thorin").expect("catalog entry");
            return Some((entry, measure));
        }
        // Power pair with exponents (e, e/2) on unit intervals.
        if let (Some(e0), Some(e1)) = (is_unit_power_map(pair.0), is_unit_power_map(pair.1)) {
            let (big, small) = if e0 >= e1 { (e0, e1) } else { (e1, e0) };
            if (big - 2.0 * small).abs() < 1e-12 && big > 0.0 {
                let beta = 1.0 / big;
                let measure = beta_halfpower_measure(beta);
                let mut entry = lookup("beta_halfpower").expect("catalog entry");
                entry.params = vec![("beta", beta)];
                entry.measure = measure.clone();
                return Some((entry, measure));
            }
        }
        // Unit power map with the selfdecomposable map, either order.
        for (a, b) in [(pair.0, pair.1), (pair.1, pair.0)] {
            if let Some(e) = is_unit_power_map(a) {
                if is(b, &class_l) && e > 0.0 {
                    let beta = 1.0 / e;
                    let measure = power_selfdec_measure(beta);
                    let mut entry = lookup("power_selfdec").expect("catalog entry");
                    entry.params = vec![("beta", beta)];
                    entry.measure = measure.clone();
                    return Some((entry, measure));
                }
            }
            if let Some(alpha) = is_gamma_clock_map(a) {
                if is(b, &class_l) {
                    let measure = gamma_selfdec_measure(alpha);
                    let mut entry = lookup("gamma_selfdec").expect("catalog entry");
                    entry.params = vec![("alpha", alpha)];
                    entry.measure = measure.clone();
                    return Some((entry, measure));
                }
            }
        }
    }
    None
}

/// Numeric tail of the image of the factor clock product under the
/// product of |h| magnitudes: tail(w) = (⊗ρ){(t_1..t_m) : Π|h_i(t_i)| > w}.
pub fn image_tail(maps: &[IntegralMap]) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    numeric_image_tail(maps)
}

fn numeric_image_tail(maps: &[IntegralMap]) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    let first = maps[0].clone();
    if maps.len() == 1 {
        return Arc::new(move |w| {
            let sign = first.effective_space().sign().unwrap_or(1.0);
            first.superlevel_clock_mass(sign, w).unwrap_or(f64::NAN)
        });
    }
    let rest = numeric_image_tail(&maps[1..]);
    Arc::new(move |w| {
        let h = first.h.clone();
        let rest = rest.clone();
        first
            .stieltjes(
                move |t| {
                    let u = h.eval(t).abs();
                    if u == 0.0 {
                        0.0
                    } else {
                        rest(w / u)
                    }
                },
                &[],
                QuadTol::coarse(),
            )
            .map(|o| o.value_or_inf())
            .unwrap_or(f64::NAN)
    })
}

/// Collapses an ordered list of mappings (outermost first) into a single
/// mapping with the identity space transform on the image interval and
/// the image measure as its clock.
pub fn compose(maps: &[IntegralMap]) -> Result<IntegralMap> {
    if maps.is_empty() {
        return Err(CalcError::invalid("composition", "empty factor list"));
    }
    // Splice in factors of maps that are themselves compositions.
    let mut factors: Vec<IntegralMap> = Vec::new();
    for m in maps {
        if m.is_opaque() {
            return Err(CalcError::Unsupported(
                "composition of opaque space transforms".into(),
            ));
        }
        if m.r.is_image() {
            match &m.factors {
                Some(fs) => factors.extend(fs.iter().cloned()),
                None => {
                    return Err(CalcError::Unsupported(
                        "composition with an image clock lacking factors".into(),
                    ))
                }
            }
        } else {
            factors.push(m.clone());
        }
    }

    // Image interval of the |h| product and the overall sign.
    let mut sign = 1.0f64;
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    for m in &factors {
        let s = m
            .effective_space()
            .sign()
            .ok_or_else(|| CalcError::Unsupported("opaque transform in composition".into()))?;
        if s == 0.0 {
            return Err(CalcError::invalid(
                "composition",
                "a factor has an identically zero space transform",
            ));
        }
        sign *= s;
        let (ilo, ihi) = m.h.image(&m.interval)?;
        let (alo, ahi) = (ilo.abs().min(ihi.abs()), ilo.abs().max(ihi.abs()));
        if !(ahi > 0.0) {
            return Err(CalcError::invalid(
                "composition",
                "a factor image degenerates to zero",
            ));
        }
        lo *= alo;
        hi *= ahi;
    }
    if !(hi > lo) {
        return Err(CalcError::invalid(
            "composition",
            "the image of the space transforms is not a nondegenerate interval",
        ));
    }

    let matched = match_catalog(&factors);
    let measure = match &matched {
        Some((_, m)) => m.clone(),
        None => {
            let tail = numeric_image_tail(&factors);
            let total: f64 = factors.iter().map(|m| m.clock_increment()).product();
            ImageMeasure {
                support: (lo, hi),
                tail,
                density: None,
                total_mass: total,
                catalog_id: None,
            }
        }
    };

    let h = if sign > 0.0 {
        SpaceTransform::Linear
    } else {
        SpaceTransform::scaled(-1.0, SpaceTransform::Linear)
    };
    let interval = Interval::new(measure.support.0.max(lo * 0.0), hi.max(measure.support.1))
        .unwrap_or(Interval {
            lo,
            hi,
        });
    Ok(IntegralMap {
        h,
        r: TimeChange::Image(measure),
        interval,
        factors: Some(factors),
    })
}

/// Report of an equivalence or commutativity comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub agrees: bool,
    pub sup_discrepancy: f64,
    pub tolerance: f64,
}

/// Compares the transformed exponents of two mappings pointwise over the
/// test laws and the frequency grid.
pub fn equivalence_check(
    m1: &IntegralMap,
    m2: &IntegralMap,
    test_laws: &[LevyTriple],
    y_grid: &[f64],
    tolerance: f64,
    tol: QuadTol,
) -> Result<ComparisonReport> {
    let mut sup: f64 = 0.0;
    for law in test_laws {
        let phi = law.exponent_fn(tol);
        let t1 = transform_exponent(m1, &phi, tol);
        let t2 = transform_exponent(m2, &phi, tol);
        sup = sup.max(sup_exponent_distance(&t1, &t2, y_grid)?);
    }
    Ok(ComparisonReport {
        agrees: sup <= tolerance,
        sup_discrepancy: sup,
        tolerance,
    })
}

/// Applies the two mappings in both orders and compares the results.
pub fn commutativity_check(
    m1: &IntegralMap,
    m2: &IntegralMap,
    test_laws: &[LevyTriple],
    y_grid: &[f64],
    tolerance: f64,
    tol: QuadTol,
) -> Result<ComparisonReport> {
    let inner_tol = tol.scaled(0.1);
    let mut sup: f64 = 0.0;
    for law in test_laws {
        let phi = law.exponent_fn(inner_tol);
        let a = transform_exponent(m1, &transform_exponent(m2, &phi, inner_tol), tol);
        let b = transform_exponent(m2, &transform_exponent(m1, &phi, inner_tol), tol);
        sup = sup.max(sup_exponent_distance(&a, &b, y_grid)?);
    }
    Ok(ComparisonReport {
        agrees: sup <= tolerance,
        sup_discrepancy: sup,
        tolerance,
    })
}

/// Configuration of the Monte Carlo pushforward validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Per-factor upper truncation of the clock interval; required for
    /// factors with infinite clock mass.
    #[serde(default)]
    pub factor_windows: Vec<Option<f64>>,
    /// Restrict the closed-form comparison to this window of the image
    /// axis (conditional distribution); required when the image measure
    /// has infinite mass.
    #[serde(default)]
    pub image_window: Option<(f64, f64)>,
}

/// Kolmogorov-Smirnov comparison summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n_used: usize,
    pub window: Option<(f64, f64)>,
}

/// Samples of the factor product with the closed-form comparison when the
/// catalog recognizes the composition.
#[derive(Debug, Clone)]
pub struct PushforwardResult {
    pub image: ImageMeasure,
    pub closed_form: Option<String>,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub ks: Option<KsReport>,
}

/// KS distance between sorted samples and a cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let fx = cdf(x);
        sup = sup.max(((i as f64 + 1.0) / n - fx).abs());
        sup = sup.max((i as f64 / n - fx).abs());
    }
    sup
}

/// Draws samples of Π h_i(Z_i) with Z_i distributed as the normalized
/// clock measures, and compares against the catalog closed form.
pub fn image_density_mc(maps: &[IntegralMap], cfg: &McConfig) -> Result<PushforwardResult> {
    if maps.is_empty() {
        return Err(CalcError::invalid("sampling", "empty factor list"));
    }
    if cfg.n_samples == 0 {
        return Err(CalcError::invalid("sampling", "need at least one sample"));
    }

    // Truncated intervals and masses.
    let mut intervals = Vec::with_capacity(maps.len());
    let mut masses = Vec::with_capacity(maps.len());
    for (i, m) in maps.iter().enumerate() {
        let window = cfg.factor_windows.get(i).copied().flatten();
        let hi = window.unwrap_or(m.interval.hi).min(m.interval.hi);
        let iv = Interval::new(m.interval.lo, hi)?;
        let mass = m.r.increment(&iv);
        if !mass.is_finite() || mass <= 0.0 {
            return Err(CalcError::invalid(
                "sampling",
                format!(
                    "factor {i} has clock mass {mass}; declare a finite window for it"
                ),
            ));
        }
        intervals.push(iv);
        masses.push(mass);
    }

    let mut samples = Vec::with_capacity(cfg.n_samples);
    for k in 0..cfg.n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64 + 1);
        let mut w = 1.0f64;
        for ((m, iv), mass) in maps.iter().zip(&intervals).zip(&masses) {
            let u: f64 = rng.random();
            let t = m.r.invert_increment(iv, u * mass)?;
            w *= m.h.eval(t).abs();
        }
        samples.push(w);
    }
    samples.sort_by(f64::total_cmp);

    let matched = match_catalog(maps);
    let (image, closed_form) = match &matched {
        Some((entry, measure)) => (measure.clone(), Some(entry.id.to_string())),
        None => (
            ImageMeasure {
                support: (0.0, f64::INFINITY),
                tail: numeric_image_tail(maps),
                density: None,
                total_mass: masses.iter().product(),
                catalog_id: None,
            },
            None,
        ),
    };

    let ks = if matched.is_some() {
        let tail = image.tail.clone();
        match cfg.image_window {
            Some((w0, w1)) => {
                let t0 = tail(w0);
                let t1 = tail(w1);
                let denom = t0 - t1;
                if !(denom > 0.0) || !denom.is_finite() {
                    return Err(CalcError::invalid(
                        "sampling",
                        "image window has no finite positive mass",
                    ));
                }
                let windowed: Vec<f64> = samples
                    .iter()
                    .copied()
                    .filter(|x| *x > w0 && *x <= w1)
                    .collect();
                let stat = ks_statistic(&windowed, |x| (t0 - tail(x)) / denom);
                Some(KsReport {
                    statistic: stat,
                    n_used: windowed.len(),
                    window: Some((w0, w1)),
                })
            }
            None => {
                if !image.total_mass.is_finite() {
                    return Err(CalcError::invalid(
                        "sampling",
                        "image measure has infinite mass; declare an image window",
                    ));
                }
                let mass = image.total_mass;
                let stat = ks_statistic(&samples, |x| 1.0 - tail(x) / mass);
                Some(KsReport {
                    statistic: stat,
                    n_used: samples.len(),
                    window: None,
                })
            }
        }
    } else {
        None
    };

    Ok(PushforwardResult {
        image,
        closed_form,
        samples,
        seed: cfg.seed,
        ks,
    })
}

/// The two exponent-transform routes for a composed map: nested factor
/// application and single quadrature against the image clock.
pub fn nested_and_single_routes(
    composed: &IntegralMap,
    phi: &ExponentFn,
    tol: QuadTol,
) -> Result<(ExponentFn, ExponentFn)> {
    let factors = composed
        .factors
        .as_ref()
        .ok_or_else(|| CalcError::invalid("composition", "missing factor list"))?;
    let inner_tol = tol.scaled(0.1);
    let mut nested = phi.clone();
    for m in factors.iter().rev() {
        nested = transform_exponent(m, &nested, inner_tol);
    }
    let single = transform_exponent(composed, phi, tol);
    Ok((nested, single))
}
