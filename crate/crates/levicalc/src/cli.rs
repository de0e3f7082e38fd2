//! Command-line front end. Everything reads and writes JSON; the exit
//! code distinguishes input errors (2), domain rejections (3), and
//! numerical nonconvergence (4).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::analysis::{
    check_factorization, class_membership, stochastic_area_identity, ClassTag, StableLaw,
};
use crate::compose;
use crate::error::{CalcError, Result};
use crate::experiments;
use crate::id_measures::{LevyTriple, DEFAULT_Y_GRID};
use crate::kernels::{IntegralMap, Interval, SpaceTransform, TimeChange};
use crate::montecarlo::{pathwise_integral, validate_map, PathConfig};
use crate::quad::QuadTol;
use crate::transform::{domain_check, transform_triple};

#[derive(Parser)]
#[command(
    name = "levicalc",
    about = "Calculus on random integral mappings of infinitely divisible laws"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the exponent of a law on a frequency grid.
    Exponent {
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        y_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Apply a mapping to a law; rejected laws exit with code 3.
    Transform {
        #[arg(long)]
        law: PathBuf,
        /// Map file or registry alias.
        #[arg(long)]
        map: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Compose mappings (outermost first) into a single image-clock map.
    Compose {
        /// Map files or registry aliases; repeat the flag per factor.
        #[arg(long = "map", required = true)]
        maps: Vec<String>,
        /// CSV output of the clock tail table (w, tail_mass).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 33)]
        grid_points: usize,
    },
    /// Simulate the pathwise integral and compare against the analytic
    /// transform.
    Simulate {
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        map: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
        #[arg(long, default_value_t = 400)]
        resolution: usize,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long)]
        truncate: Option<f64>,
        #[arg(long)]
        y_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional CSV dump of the raw per-path samples.
        #[arg(long)]
        samples_csv: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Fixed-point constant of a mapping at a stable index.
    FixedPoint {
        #[arg(long)]
        map: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the factorization identity for a (map, prime map, law).
    Factorize {
        #[arg(long)]
        map: String,
        #[arg(long)]
        prime_map: String,
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Class membership of a law under a named class tag.
    ClassifyLaw {
        #[arg(long)]
        law: PathBuf,
        /// idlog | idlog:<m> | id2 | idbeta:<beta> | l | lm:<m> |
        /// ubeta:<beta> | thorin | e
        #[arg(long)]
        tag: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a mapping as zero, identity, or generic.
    ClassifyMap {
        #[arg(long)]
        map: String,
    },
    /// The closed-form clock catalog as a JSON registry.
    Catalog {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The stochastic-area log identity on a grid.
    Area {
        #[arg(long, default_value_t = 1.0)]
        u: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one acceptance experiment from a checked-in config file.
    Verify { config: PathBuf },
    /// Run a command described by a config file.
    Run { config: PathBuf },
}

/// A batch run description: one command with its inputs.
#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(default)]
    pub law: Option<String>,
    #[serde(default)]
    pub map: Option<String>,
    #[serde(default)]
    pub prime_map: Option<String>,
    #[serde(default)]
    pub maps: Option<Vec<String>>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub y_grid: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub truncate: Option<f64>,
    #[serde(default)]
    pub u: Option<f64>,
}

fn exit_code_for(err: &CalcError) -> i32 {
    match err {
        CalcError::NotInDomain { .. } => 3,
        CalcError::QuadratureNonConvergence { .. } | CalcError::NonFiniteIntegrand { .. } => 4,
        _ => 2,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CalcError::invalid(what, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CalcError::invalid(what, format!("{}: {e}", path.display())))
}

fn load_law(path: &Path) -> Result<LevyTriple> {
    let law: LevyTriple = read_json(path, "law file")?;
    LevyTriple::new(law.shift, law.gaussian_var, law.levy)
}

/// Map argument: a file path, or a registry alias.
fn resolve_map(spec: &str) -> Result<IntegralMap> {
    let path = Path::new(spec);
    if path.exists() {
        return read_json(path, "map file");
    }
    let lower = spec.to_ascii_lowercase();
    if let Some(beta) = lower.strip_prefix("ubeta:") {
        let beta: f64 = beta
            .parse()
            .map_err(|_| CalcError::invalid("map alias", format!("bad beta in {spec:?}")))?;
        return IntegralMap::u_beta(beta);
    }
    match lower.as_str() {
        "identity" => Ok(IntegralMap::identity()),
        "zero" => Ok(IntegralMap::zero()),
        "classl" | "class-l" | "class_l" | "selfdec" => Ok(IntegralMap::class_l()),
        "upsilon" | "thorin-half" | "expcdf" => Ok(IntegralMap::upsilon()),
        "neglog" => IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::NegLog,
            Interval::unit(),
        ),
        "remark7" => IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Power { beta: -3.0 },
            Interval::unit(),
        ),
        other => Err(CalcError::invalid(
            "map",
            format!("{other:?} is neither a file nor a known alias"),
        )),
    }
}

fn parse_y_grid(spec: &Option<String>) -> Result<Vec<f64>> {
    match spec {
        None => Ok(DEFAULT_Y_GRID.to_vec()),
        Some(s) => s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| CalcError::invalid("y-grid", format!("bad entry {p:?}")))
            })
            .collect(),
    }
}

fn quad_tol(tol: Option<f64>) -> QuadTol {
    match tol {
        Some(abs) => QuadTol::new(abs, abs * 10.0),
        None => QuadTol::default(),
    }
}

fn emit(value: &serde_json::Value, out: &Option<PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    if let Some(path) = out {
        fs::write(path, &text)
            .map_err(|e| CalcError::invalid("output file", format!("{}: {e}", path.display())))?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_exponent(
    law: &Path,
    y_grid: &Option<String>,
    out: &Option<PathBuf>,
    tol: Option<f64>,
) -> Result<i32> {
    let law = load_law(law)?;
    let grid = parse_y_grid(y_grid)?;
    let t = quad_tol(tol);
    let mut rows = Vec::new();
    for &y in &grid {
        let phi = law.exponent(y, t)?;
        rows.push(json!({"y": y, "re": phi.re, "im": phi.im}));
    }
    emit(&json!(rows), out)?;
    Ok(0)
}

fn cmd_transform(
    law: &Path,
    map: &str,
    out: &Option<PathBuf>,
    tol: Option<f64>,
) -> Result<i32> {
    let law = load_law(law)?;
    let map = resolve_map(map)?;
    let t = quad_tol(tol);
    let report = domain_check(&map, &law, QuadTol::coarse())?;
    if !report.admitted {
        let value = json!({"admitted": false, "domain_report": report});
        emit(&value, out)?;
        return Ok(3);
    }
    let transformed = transform_triple(&map, &law, t)?;
    let value = json!({
        "admitted": true,
        "domain_report": report,
        "law": transformed,
    });
    emit(&value, out)?;
    Ok(0)
}

fn cmd_compose(maps: &[String], out: &Option<PathBuf>, grid_points: usize) -> Result<i32> {
    let factors = maps
        .iter()
        .map(|s| resolve_map(s))
        .collect::<Result<Vec<_>>>()?;
    let composed = compose::compose(&factors)?;
    let image = composed.r.image_measure().expect("composition image");
    let (lo, hi) = image.support;
    let lo = lo.max(1e-6);
    let hi = if hi.is_finite() { hi } else { 50.0 };
    let n = grid_points.max(2);
    let mut tail_rows = Vec::with_capacity(n);
    for k in 0..n {
        let w = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
        tail_rows.push((w, (image.tail)(w)));
    }
    if let Some(path) = out {
        let mut csv = String::from("w,tail_mass\n");
        for (w, t) in &tail_rows {
            csv.push_str(&format!("{w},{t}\n"));
        }
        fs::write(path, csv)
            .map_err(|e| CalcError::invalid("output file", format!("{}: {e}", path.display())))?;
    }
    let value = json!({
        "catalog_id": image.catalog_id,
        "interval": {"a": composed.interval.lo, "b": if composed.interval.hi.is_finite() { json!(composed.interval.hi) } else { json!("inf") }},
        "total_mass": if image.total_mass.is_finite() { json!(image.total_mass) } else { json!("inf") },
        "tail": tail_rows.iter().map(|(w, t)| json!([w, t])).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    law: &Path,
    map: &str,
    seed: u64,
    paths: usize,
    resolution: usize,
    epsilon: f64,
    truncate: Option<f64>,
    y_grid: &Option<String>,
    out: &Option<PathBuf>,
    samples_csv: &Option<PathBuf>,
    tol: Option<f64>,
) -> Result<i32> {
    let law = load_law(law)?;
    let map = resolve_map(map)?;
    let grid = parse_y_grid(y_grid)?;
    let mut cfg = PathConfig::new(paths, resolution, epsilon, seed)?;
    if let Some(t) = truncate {
        cfg = cfg.with_truncation(t);
    }
    let report = validate_map(&map, &law, &cfg, &grid, 0.0, quad_tol(tol))?;
    if let Some(path) = samples_csv {
        let sample = pathwise_integral(&map, &law, &cfg)?;
        let mut csv = String::from("value\n");
        for v in &sample.values {
            csv.push_str(&format!("{v}\n"));
        }
        fs::write(path, csv)
            .map_err(|e| CalcError::invalid("output file", format!("{}: {e}", path.display())))?;
    }
    emit(&serde_json::to_value(&report).expect("serializable"), out)?;
    Ok(0)
}

fn cmd_fixed_point(map: &str, p: f64, tol: Option<f64>, out: &Option<PathBuf>) -> Result<i32> {
    let map = resolve_map(map)?;
    let t = quad_tol(tol);
    let c = crate::analysis::fixed_point_constant(&map, p, t)?;
    let verification = if c.is_finite() {
        let law = StableLaw::new(p, 1.0)?;
        let r = crate::analysis::verify_fixed_point(&map, &law, &DEFAULT_Y_GRID, t)?;
        Some(r)
    } else {
        None
    };
    let value = json!({
        "p": p,
        "constant": if c.is_finite() { json!(c) } else { json!("inf") },
        "is_fixed_point": c.is_finite(),
        "verification": verification,
    });
    emit(&value, out)?;
    Ok(0)
}

fn cmd_factorize(
    map: &str,
    prime_map: &str,
    law: &Path,
    tol: Option<f64>,
    out: &Option<PathBuf>,
) -> Result<i32> {
    let mu = resolve_map(map)?;
    let prime = resolve_map(prime_map)?;
    let law = load_law(law)?;
    let report = check_factorization(&mu, &prime, &law, &DEFAULT_Y_GRID, 1e-6, quad_tol(tol))?;
    emit(&serde_json::to_value(&report).expect("serializable"), out)?;
    Ok(0)
}

fn parse_tag(spec: &str) -> Result<ClassTag> {
    let lower = spec.to_ascii_lowercase();
    let parse_suffix = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| CalcError::invalid("class tag", format!("bad parameter in {spec:?}")))
    };
    if let Some(m) = lower.strip_prefix("idlog:") {
        return Ok(ClassTag::IdLogPow {
            m: parse_suffix(m)? as u32,
        });
    }
    if let Some(b) = lower.strip_prefix("idbeta:") {
        return Ok(ClassTag::IdBeta {
            beta: parse_suffix(b)?,
        });
    }
    if let Some(m) = lower.strip_prefix("lm:") {
        return Ok(ClassTag::IteratedL {
            m: parse_suffix(m)? as u32,
        });
    }
    if let Some(b) = lower.strip_prefix("ubeta:") {
        return Ok(ClassTag::UBeta {
            beta: parse_suffix(b)?,
        });
    }
    match lower.as_str() {
        "idlog" => Ok(ClassTag::IdLog),
        "id2" => Ok(ClassTag::Id2),
        "l" => Ok(ClassTag::SelfdecL),
        "thorin" | "t" => Ok(ClassTag::Thorin),
        "e" => Ok(ClassTag::ExpCdfE),
        other => Err(CalcError::invalid(
            "class tag",
            format!("unknown tag {other:?}"),
        )),
    }
}

fn cmd_classify_law(law: &Path, tag: &str, out: &Option<PathBuf>) -> Result<i32> {
    let law = load_law(law)?;
    let tag = parse_tag(tag)?;
    let report = class_membership(&tag, &law, QuadTol::coarse())?;
    emit(&serde_json::to_value(&report).expect("serializable"), out)?;
    Ok(0)
}

fn cmd_verify(config: &Path) -> Result<i32> {
    let cfg: experiments::ExperimentConfig = read_json(config, "experiment config")?;
    let report = experiments::run(cfg.criterion)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable")
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_run(config: &Path) -> Result<i32> {
    let cfg: RunConfig = read_json(config, "run config")?;
    let need = |field: &Option<String>, name: &'static str| -> Result<String> {
        field
            .clone()
            .ok_or_else(|| CalcError::invalid("run config", format!("missing field {name:?}")))
    };
    let out = cfg.out.clone().map(PathBuf::from);
    match cfg.command.as_str() {
        "exponent" => cmd_exponent(
            Path::new(&need(&cfg.law, "law")?),
            &cfg.y_grid,
            &out,
            cfg.tol,
        ),
        "transform" => cmd_transform(
            Path::new(&need(&cfg.law, "law")?),
            &need(&cfg.map, "map")?,
            &out,
            cfg.tol,
        ),
        "compose" => {
            let maps = cfg.maps.clone().ok_or_else(|| {
                CalcError::invalid("run config", "missing field \"maps\"")
            })?;
            cmd_compose(&maps, &out, 33)
        }
        "simulate" => cmd_simulate(
            Path::new(&need(&cfg.law, "law")?),
            &need(&cfg.map, "map")?,
            cfg.seed
                .ok_or_else(|| CalcError::invalid("run config", "missing field \"seed\""))?,
            cfg.paths.unwrap_or(20_000),
            cfg.resolution.unwrap_or(400),
            cfg.epsilon.unwrap_or(0.01),
            cfg.truncate,
            &cfg.y_grid,
            &out,
            &None,
            cfg.tol,
        ),
        "fixed-point" => cmd_fixed_point(
            &need(&cfg.map, "map")?,
            cfg.p
                .ok_or_else(|| CalcError::invalid("run config", "missing field \"p\""))?,
            cfg.tol,
            &out,
        ),
        "factorize" => cmd_factorize(
            &need(&cfg.map, "map")?,
            &need(&cfg.prime_map, "prime_map")?,
            Path::new(&need(&cfg.law, "law")?),
            cfg.tol,
            &out,
        ),
        "classify-law" => cmd_classify_law(
            Path::new(&need(&cfg.law, "law")?),
            &need(&cfg.tag, "tag")?,
            &out,
        ),
        "area" => {
            let ts: Vec<f64> = (0..20).map(|i| 0.1 + 4.9 * i as f64 / 19.0).collect();
            let report = stochastic_area_identity(cfg.u.unwrap_or(1.0), &ts, quad_tol(cfg.tol))?;
            emit(&serde_json::to_value(&report).expect("serializable"), &out)?;
            Ok(0)
        }
        other => Err(CalcError::invalid(
            "run config",
            format!("unknown command {other:?}"),
        )),
    }
}

/// Dispatches the parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Ok(threads) = std::env::var("LEVI_CALC_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let result = match &cli.command {
        Command::Exponent {
            law,
            y_grid,
            out,
            tol,
        } => cmd_exponent(law, y_grid, out, *tol),
        Command::Transform { law, map, out, tol } => cmd_transform(law, map, out, *tol),
        Command::Compose {
            maps,
            out,
            grid_points,
        } => cmd_compose(maps, out, *grid_points),
        Command::Simulate {
            law,
            map,
            seed,
            paths,
            resolution,
            epsilon,
            truncate,
            y_grid,
            out,
            samples_csv,
            tol,
        } => cmd_simulate(
            law,
            map,
            *seed,
            *paths,
            *resolution,
            *epsilon,
            *truncate,
            y_grid,
            out,
            samples_csv,
            *tol,
        ),
        Command::FixedPoint { map, p, tol, out } => cmd_fixed_point(map, *p, *tol, out),
        Command::Factorize {
            map,
            prime_map,
            law,
            tol,
            out,
        } => cmd_factorize(map, prime_map, law, *tol, out),
        Command::ClassifyLaw { law, tag, out } => cmd_classify_law(law, tag, out),
        Command::ClassifyMap { map } => match resolve_map(map) {
            Ok(m) => {
                println!("{}", json!({"class": m.classify()}));
                Ok(0)
            }
            Err(e) => Err(e),
        },
        Command::Catalog { out } => {
            let value = compose::registry_json();
            emit(&value, out).map(|_| 0)
        }
        Command::Area { u, out } => {
            let ts: Vec<f64> = (0..20).map(|i| 0.1 + 4.9 * i as f64 / 19.0).collect();
            match stochastic_area_identity(*u, &ts, QuadTol::default()) {
                Ok(report) => {
                    emit(&serde_json::to_value(&report).expect("serializable"), out).map(|_| 0)
                }
                Err(e) => Err(e),
            }
        }
        Command::Verify { config } => cmd_verify(config),
        Command::Run { config } => cmd_run(config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({"error": e.to_string()}));
            exit_code_for(&e)
        }
    }
}
