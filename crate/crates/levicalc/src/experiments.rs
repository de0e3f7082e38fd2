//! The acceptance experiments: each criterion of the verification plan as
//! a runnable check with its tolerance pinned in code. The CLI `verify`
//! subcommand and the acceptance test suite both dispatch here.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_factorization, class_membership, fixed_point_constant, stochastic_area_identity,
    ClassTag, StableLaw,
};
use crate::compose::{compose, equivalence_check, nested_and_single_routes};
use crate::error::Result;
use crate::id_measures::{
    sup_exponent_distance, Atom, DensityForm, DensityPiece, LevyMeasure, LevyTriple, Parametric,
    DEFAULT_Y_GRID,
};
use crate::kernels::{IntegralMap, Interval, SpaceTransform, TimeChange};
use crate::montecarlo::{validate_map, PathConfig};
use crate::quad::QuadTol;
use crate::transform::{pushforward_measure, retrieval_limit_check, transform_exponent, transform_triple};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: u32,
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
}

impl CriterionReport {
    fn new(criterion: u32, name: &str) -> Self {
        CriterionReport {
            criterion,
            name: name.to_string(),
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.pass = false;
        }
        self.details.push(format!(
            "{} {}",
            if ok { "ok " } else { "FAIL" },
            detail
        ));
    }
}

/// Experiment selector read from a checked-in config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub criterion: u32,
}

pub const ALL_CRITERIA: [u32; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

pub fn run(criterion: u32) -> Result<CriterionReport> {
    match criterion {
        1 => criterion_01(),
        2 => criterion_02(),
        3 => criterion_03(),
        4 => criterion_04(),
        5 => criterion_05(),
        6 => criterion_06(),
        7 => criterion_07(),
        8 => criterion_08(),
        9 => criterion_09(),
        10 => criterion_10(),
        11 => criterion_11(),
        12 => criterion_12(),
        other => Err(crate::error::CalcError::invalid(
            "criterion",
            format!("no criterion {other}; valid range is 1..=12"),
        )),
    }
}

fn tol() -> QuadTol {
    QuadTol::default()
}

fn cp3() -> LevyTriple {
    LevyTriple::new(
        0.1,
        0.2,
        LevyMeasure::atoms(vec![
            Atom::new(0.5, 1.0),
            Atom::new(2.0, 0.7),
            Atom::new(-1.5, 0.5),
        ]),
    )
    .expect("valid fixture")
}

fn cauchy() -> LevyTriple {
    StableLaw::new(1.0, 1.0).expect("valid").as_triple()
}

fn gamma_law() -> LevyTriple {
    LevyTriple::new(
        0.0,
        0.0,
        LevyMeasure::Parametric {
            family: Parametric::Gamma {
                shape: 1.0,
                rate: 1.0,
                side: 1,
            },
        },
    )
    .expect("valid fixture")
}

fn density_law_bounded() -> LevyTriple {
    LevyTriple::new(
        0.0,
        0.1,
        LevyMeasure::Density {
            pieces: vec![DensityPiece::new(
                0.5,
                1.5,
                DensityForm::Const { value: 0.5 },
            )
            .expect("valid piece")],
        },
    )
    .expect("valid fixture")
}

fn density_law_power() -> LevyTriple {
    LevyTriple::new(
        0.0,
        0.0,
        LevyMeasure::Density {
            pieces: vec![DensityPiece::new(
                1.0,
                3.0,
                DensityForm::Power {
                    coeff: 1.0,
                    exponent: -2.0,
                },
            )
            .expect("valid piece")],
        },
    )
    .expect("valid fixture")
}

/// The (map, law) registry pairs exercised by the consistency criterion.
pub fn registry_pairs() -> Vec<(String, IntegralMap, LevyTriple)> {
    let m_identity = IntegralMap::identity();
    let m_u1 = IntegralMap::u_beta(1.0).expect("valid");
    let m_u2 = IntegralMap::u_beta(2.0).expect("valid");
    let m_class_l = IntegralMap::class_l();
    let m_upsilon = IntegralMap::upsilon();
    let m_sqrt = IntegralMap::new(
        SpaceTransform::Power { alpha: 0.5 },
        TimeChange::Linear,
        Interval::unit(),
    )
    .expect("valid");
    let m_jump = IntegralMap::new(
        SpaceTransform::scaled(2.0, SpaceTransform::Linear),
        TimeChange::Dirac { at: 0.5 },
        Interval::unit(),
    )
    .expect("valid");
    let m_scaled_clock = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::scaled(2.0, TimeChange::Linear),
        Interval::unit(),
    )
    .expect("valid");
    let m_neg_log = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::NegLog,
        Interval::unit(),
    )
    .expect("valid");
    let m_flipped = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::Flipped {
            inner: Box::new(TimeChange::Linear),
            anchor: 1.0,
        },
        Interval::unit(),
    )
    .expect("valid");

    let gaussian = LevyTriple::gaussian(1.0);
    let shift = LevyTriple::point_mass(2.0);
    let mixed = LevyTriple::new(1.0, 0.5, LevyMeasure::empty()).expect("valid");
    let atom_unit = LevyTriple::compound_poisson(vec![Atom::new(1.0, 1.0)]).expect("valid");
    let atom_inside = LevyTriple::compound_poisson(vec![Atom::new(0.5, 2.0)]).expect("valid");
    let atom_outside = LevyTriple::compound_poisson(vec![Atom::new(2.0, 0.7)]).expect("valid");
    let sym_atoms = LevyTriple::new(
        0.0,
        0.0,
        LevyMeasure::atoms(vec![Atom::new(1.2, 0.6), Atom::new(-1.2, 0.6)]),
    )
    .expect("valid");
    let stable_half = StableLaw::new(0.5, 0.8).expect("valid").as_triple();

    let mut pairs = Vec::new();
    let mut add = |name: &str, m: &IntegralMap, l: &LevyTriple| {
        pairs.push((name.to_string(), m.clone(), l.clone()));
    };
    add("identity/cp3", &m_identity, &cp3());
    add("u1/gaussian", &m_u1, &gaussian);
    add("u1/atom_unit", &m_u1, &atom_unit);
    add("u1/cp3", &m_u1, &cp3());
    add("u1/density_bounded", &m_u1, &density_law_bounded());
    add("u2/atom_inside", &m_u2, &atom_inside);
    add("u2/sym_atoms", &m_u2, &sym_atoms);
    add("u2/density_power", &m_u2, &density_law_power());
    add("class_l/gaussian", &m_class_l, &gaussian);
    add("class_l/cp3", &m_class_l, &cp3());
    add("class_l/cauchy", &m_class_l, &cauchy());
    add("class_l/gamma", &m_class_l, &gamma_law());
    add("upsilon/atom_outside", &m_upsilon, &atom_outside);
    add("upsilon/stable_half", &m_upsilon, &stable_half);
    add("sqrt/cp3", &m_sqrt, &cp3());
    add("jump_clock/cp3", &m_jump, &cp3());
    add("scaled_clock/atom_unit", &m_scaled_clock, &atom_unit);
    add("neg_log/cp3", &m_neg_log, &cp3());
    add("neg_log/gamma", &m_neg_log, &gamma_law());
    add("flipped/cp3", &m_flipped, &cp3());
    add("u1/shift", &m_u1, &shift);
    add("u1/mixed", &m_u1, &mixed);
    pairs
}

fn criterion_01() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        1,
        "triple/exponent consistency over 20+ registry pairs (1e-6)",
    );
    for (name, map, law) in registry_pairs() {
        let via_exponent = transform_exponent(&map, &law.exponent_fn(tol()), tol());
        let triple = transform_triple(&map, &law, tol())?;
        let via_triple = triple.exponent_fn(tol());
        let d = sup_exponent_distance(&via_exponent, &via_triple, &DEFAULT_Y_GRID)?;
        report.check(d < 1e-6, format!("{name}: sup |Δ| = {d:.3e}"));
    }
    Ok(report)
}

fn criterion_02() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(2, "Gaussian scaling R -> R/3 (1e-10)");
    let out = transform_triple(
        &IntegralMap::u_beta(1.0)?,
        &LevyTriple::gaussian(1.0),
        tol(),
    )?;
    let err = (out.gaussian_var - 1.0 / 3.0).abs();
    report.check(err < 1e-10, format!("|R' - 1/3| = {err:.3e}"));
    Ok(report)
}

fn criterion_03() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        3,
        "fixed-point constants beta/(beta+p) (1e-8) and the divergent power clock",
    );
    for &beta in &[0.5, 1.0, 2.0] {
        for &p in &[0.5, 1.0, 1.5, 2.0] {
            let c = fixed_point_constant(&IntegralMap::u_beta(beta)?, p, tol())?;
            let expected = beta / (beta + p);
            report.check(
                (c - expected).abs() < 1e-8,
                format!("beta={beta}, p={p}: c = {c:.12} vs {expected:.12}"),
            );
        }
    }
    let divergent = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::Power { beta: -3.0 },
        Interval::unit(),
    )?;
    for &p in &[0.5, 1.0, 1.5, 2.0] {
        let c = fixed_point_constant(&divergent, p, tol())?;
        report.check(c.is_infinite(), format!("beta=-3, p={p}: c = {c}"));
    }
    Ok(report)
}

fn criterion_04() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        4,
        "composition closed forms: nested vs image-clock quadrature (1e-6)",
    );
    let laws = [("gaussian", LevyTriple::gaussian(1.0)), ("cauchy", cauchy())];
    let mut cases: Vec<(String, Vec<IntegralMap>)> = vec![
        (
            "thorin".into(),
            vec![IntegralMap::class_l(), IntegralMap::upsilon()],
        ),
        (
            "selfdec m=2".into(),
            vec![IntegralMap::class_l(), IntegralMap::class_l()],
        ),
        (
            "power∘selfdec beta=1".into(),
            vec![IntegralMap::u_beta(1.0)?, IntegralMap::class_l()],
        ),
    ];
    for &beta in &[0.5, 1.0, 2.0] {
        cases.push((
            format!("halfpower beta={beta}"),
            vec![
                IntegralMap::new(
                    SpaceTransform::Power { alpha: 1.0 / beta },
                    TimeChange::Linear,
                    Interval::unit(),
                )?,
                IntegralMap::new(
                    SpaceTransform::Power {
                        alpha: 1.0 / (2.0 * beta),
                    },
                    TimeChange::Linear,
                    Interval::unit(),
                )?,
            ],
        ));
    }
    for (name, factors) in cases {
        let composed = compose(&factors)?;
        for (law_name, law) in &laws {
            let phi = law.exponent_fn(tol());
            let (nested, single) = nested_and_single_routes(&composed, &phi, tol())?;
            let d = sup_exponent_distance(&nested, &single, &DEFAULT_Y_GRID)?;
            report.check(d < 1e-6, format!("{name} on {law_name}: sup |Δ| = {d:.3e}"));
        }
    }
    Ok(report)
}

fn criterion_05() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(5, "equivalent mapping pairs (1e-6)");
    let neg_log = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::NegLog,
        Interval::unit(),
    )?;
    let symmetric_laws = vec![
        LevyTriple::gaussian(1.0),
        cauchy(),
        LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::atoms(vec![Atom::new(1.0, 0.5), Atom::new(-1.0, 0.5)]),
        )?,
    ];
    let r = equivalence_check(
        &IntegralMap::class_l(),
        &neg_log,
        &symmetric_laws,
        &DEFAULT_Y_GRID,
        1e-6,
        tol(),
    )?;
    report.check(
        r.agrees,
        format!("exp-map vs neg-log form: sup |Δ| = {:.3e}", r.sup_discrepancy),
    );

    for &beta in &[0.5, 2.0] {
        let power_form = IntegralMap::new(
            SpaceTransform::Power { alpha: 1.0 / beta },
            TimeChange::Linear,
            Interval::unit(),
        )?;
        let laws = vec![LevyTriple::gaussian(1.0), cauchy(), cp3()];
        let r = equivalence_check(
            &IntegralMap::u_beta(beta)?,
            &power_form,
            &laws,
            &DEFAULT_Y_GRID,
            1e-6,
            tol(),
        )?;
        report.check(
            r.agrees,
            format!(
                "power-clock vs power-space form (beta={beta}): sup |Δ| = {:.3e}",
                r.sup_discrepancy
            ),
        );
    }
    Ok(report)
}

fn criterion_06() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(6, "commutativity of the exp-map pair (1e-6)");
    let r = crate::compose::commutativity_check(
        &IntegralMap::class_l(),
        &IntegralMap::upsilon(),
        &[cp3()],
        &DEFAULT_Y_GRID,
        1e-6,
        tol(),
    )?;
    report.check(
        r.agrees,
        format!("both orders: sup |Δ| = {:.3e}", r.sup_discrepancy),
    );
    Ok(report)
}

fn criterion_07() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(7, "stochastic-area log identity (1e-6)");
    let ts: Vec<f64> = (0..20).map(|i| 0.1 + 4.9 * i as f64 / 19.0).collect();
    for &u in &[0.5, 1.0, 2.0] {
        let r = stochastic_area_identity(u, &ts, tol())?;
        report.check(
            r.pass,
            format!(
                "u = {u}: sup |Δ| = {:.3e}, algebraic {:.3e}",
                r.integral_sup_error, r.algebraic_sup_error
            ),
        );
    }
    Ok(report)
}

fn criterion_08() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(8, "selfdecomposable factorization identity (1e-6)");
    let prime = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::Linear,
        Interval::unit(),
    )?;
    let r = check_factorization(
        &IntegralMap::class_l(),
        &prime,
        &cp3(),
        &DEFAULT_Y_GRID,
        1e-6,
        tol(),
    )?;
    report.check(r.images_ok, "image-interval hypothesis".to_string());
    report.check(r.measure_condition_ok, "measure domination".to_string());
    report.check(
        r.identity_sup_error.unwrap_or(f64::INFINITY) < 1e-6,
        format!("identity: sup |Δ| = {:.3e}", r.identity_sup_error.unwrap()),
    );
    Ok(report)
}

fn criterion_09() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        9,
        "Monte Carlo validation at 2e4 paths (5 standard errors)",
    );
    let law = cp3();
    let cases: Vec<(&str, IntegralMap, PathConfig)> = vec![
        (
            "identity",
            IntegralMap::identity(),
            PathConfig::new(20_000, 50, 0.01, 1001)?,
        ),
        (
            "finite-clock",
            IntegralMap::u_beta(1.0)?,
            PathConfig::new(20_000, 400, 0.01, 1002)?,
        ),
        (
            "selfdecomposable (T=20)",
            IntegralMap::class_l(),
            PathConfig::new(20_000, 2_000, 0.01, 1003)?.with_truncation(20.0),
        ),
    ];
    for (name, map, cfg) in cases {
        let r = validate_map(&map, &law, &cfg, &DEFAULT_Y_GRID, 0.0, tol())?;
        report.check(
            r.pass,
            format!(
                "{name}: sup |Δ| = {:.4} vs {:.4}",
                r.sup_error, r.threshold
            ),
        );
    }
    Ok(report)
}

fn criterion_10() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        10,
        "equal pushforward tails with a failed jump-measure mass test",
    );
    let m = LevyMeasure::atoms(vec![Atom::new(1.0, 4.0)]);
    let n = LevyMeasure::atoms(vec![Atom::new(2.0, 1.0)]);
    let map = IntegralMap::new(
        SpaceTransform::Linear,
        TimeChange::Power { beta: -2.0 },
        Interval::half_line(),
    )?;
    let pm = pushforward_measure(&m, &map);
    let pn = pushforward_measure(&n, &map);
    for &v in &[0.5, 1.0, 2.0, 5.0] {
        let a = pm.one_sided_tail(v, false, tol())?;
        let b = pn.one_sided_tail(v, false, tol())?;
        let expected = 4.0 / (v * v);
        report.check(
            (a - expected).abs() < 1e-10 && (b - expected).abs() < 1e-10,
            format!("tail({v}) = {a:.12} / {b:.12} vs 4/v² = {expected:.12}"),
        );
    }
    let mass = pm.ball_mass_test(QuadTol::coarse())?;
    report.check(
        mass.is_infinite(),
        format!("mass test flags divergence: {mass}"),
    );
    Ok(report)
}

fn criterion_11() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        11,
        "retrieval limit: monotone error decay of order >= 0.9",
    );
    let c = 0.5;
    let xs: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|d| c + d).collect();
    let r = retrieval_limit_check(
        &IntegralMap::u_beta(1.0)?,
        &LevyTriple::gaussian(1.0),
        c,
        &xs,
        &DEFAULT_Y_GRID,
        tol(),
    )?;
    report.check(r.monotone_decreasing, format!("rows: {:?}", r.rows));
    report.check(
        r.fitted_order >= 0.9,
        format!("fitted order = {:.3}", r.fitted_order),
    );
    Ok(report)
}

fn criterion_12() -> Result<CriterionReport> {
    let mut report = CriterionReport::new(
        12,
        "moment-class predicates on curated fixtures (3 members, 3 non-members)",
    );
    let bounded = LevyTriple::compound_poisson(vec![Atom::new(2.0, 1.0)])?;
    let heavy = density_tail_law();
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
    )?;
    let stable = StableLaw::new(1.2, 1.0)?.as_triple();
    let nolog = no_log_moment_law();

    // (law, tag, expected member, analytic value when finite)
    let fixtures: Vec<(&str, &LevyTriple, ClassTag, bool, Option<f64>)> = vec![
        ("bounded atoms", &bounded, ClassTag::IdLog, true, Some(2.0f64.ln())),
        ("x^-2 tail", &heavy, ClassTag::IdLog, true, Some(1.0)),
        (
            "gamma jumps",
            &gamma,
            ClassTag::Id2,
            true,
            Some(1.5 * 3.0 * (-2.0f64).exp() / 4.0),
        ),
        ("x^-2 tail", &heavy, ClassTag::Id2, false, None),
        ("stable p=1.2", &stable, ClassTag::Id2, false, None),
        ("log-divergent", &nolog, ClassTag::IdLog, false, None),
    ];
    for (name, law, tag, expected, value) in fixtures {
        let r = class_membership(&tag, law, QuadTol::coarse())?;
        let verdict_ok = r.member == Some(expected);
        let value_ok = match value {
            Some(v) => (r.moment_value - v).abs() < 1e-6 * (1.0 + v.abs()),
            None => !r.moment_value.is_finite(),
        };
        report.check(
            verdict_ok && value_ok,
            format!(
                "{name} in {}: member = {:?}, value = {}",
                r.tag, r.member, r.moment_value
            ),
        );
    }
    Ok(report)
}

fn density_tail_law() -> LevyTriple {
    LevyTriple::new(
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
            .expect("valid piece")],
        },
    )
    .expect("valid fixture")
}

/// The fixture with a valid jump measure whose log moment diverges.
pub fn no_log_moment_law() -> LevyTriple {
    LevyTriple::new(
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
            .expect("valid piece")],
        },
    )
    .expect("valid fixture")
}
