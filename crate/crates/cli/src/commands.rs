//! Implementations behind the CLI subcommands; the binary in main.rs only
//! parses arguments and maps errors to exit codes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use leafmatch::geometry::{occlude, Contour, Curve, OpenCurve};
use leafmatch::io::{read_curve, write_curve, AnyCurve};
use leafmatch::pipeline::{
    build_database_from_contours, load_database, query, save_database, LeafDatabase, QueryResult,
    RunConfig,
};
use leafmatch::eval::rank_metrics;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mask;
use crate::synth;

/// Occlusion range the paper's protocol uses; outside it --force is required.
pub const DEFAULT_OCCLUSION_RANGE: (f64, f64) = (0.20, 0.50);

fn read_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && (line == "id,species" || line == "file,species") {
            continue;
        }
        let (id, species) = line
            .split_once(',')
            .with_context(|| format!("{}:{}: expected \"id,species\"", path.display(), lineno + 1))?;
        let id = Path::new(id.trim())
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| id.trim().to_string());
        map.insert(id, species.trim().to_string());
    }
    if map.is_empty() {
        bail!("label file {} has no entries", path.display());
    }
    Ok(map)
}

fn curve_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("contour") | Some("pgm")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

pub fn cmd_build_db(
    input: &Path,
    labels_path: &Path,
    out: &Path,
    config_path: Option<&Path>,
) -> Result<()> {
    let config = load_config(config_path)?;
    let labels = read_labels(labels_path)?;
    let files = curve_files(input)?;
    if files.is_empty() {
        bail!("no contours found in {}", input.display());
    }

    let mut inputs: Vec<(String, Contour<f64>)> = Vec::new();
    let mut read_skips: Vec<(String, String)> = Vec::new();
    for path in &files {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let loaded = match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => mask::read_pgm(path)
                .and_then(|img| mask::trace_boundary(&img))
                .and_then(|pts| Contour::new(pts).map_err(|e| anyhow!(e))),
            _ => match read_curve(path) {
                Ok(AnyCurve::Closed(c)) => Ok(c),
                Ok(AnyCurve::Open(_)) => Err(anyhow!("open curve cannot enter the database")),
                Err(e) => Err(anyhow!(e)),
            },
        };
        match loaded {
            Ok(c) => inputs.push((id, c)),
            Err(e) => read_skips.push((path.display().to_string(), e.to_string())),
        }
    }

    let (db, skips) = build_database_from_contours(inputs, &labels, config)
        .map_err(|e| anyhow!("no contours ingested: {e}"))?;
    for (file, reason) in &read_skips {
        eprintln!("skipped {file}: {reason}");
    }
    for s in &skips {
        eprintln!("skipped {}: {}", s.file, s.reason);
    }
    save_database(&db, out)?;
    println!(
        "database written to {} ({} records, {} skipped)",
        out.display(),
        db.records.len(),
        skips.len() + read_skips.len()
    );
    Ok(())
}

pub fn cmd_occlude(
    input: &Path,
    fraction: f64,
    seed: u64,
    out: &Path,
    force: bool,
) -> Result<()> {
    if !force
        && !(DEFAULT_OCCLUSION_RANGE.0..=DEFAULT_OCCLUSION_RANGE.1).contains(&fraction)
        && fraction != 0.0
    {
        bail!(
            "fraction {fraction} outside [{}, {}]; pass --force to override",
            DEFAULT_OCCLUSION_RANGE.0,
            DEFAULT_OCCLUSION_RANGE.1
        );
    }
    let contour = match read_curve(input)? {
        AnyCurve::Closed(c) => c,
        AnyCurve::Open(_) => bail!("{} is already an open curve", input.display()),
    };
    let occluded = occlude(&contour, fraction, seed)?;
    write_curve(out, occluded.points(), false)?;
    println!(
        "occluded {:.1}% of {} -> {} ({} points)",
        fraction * 100.0,
        input.display(),
        out.display(),
        occluded.len()
    );
    Ok(())
}

fn query_to_json(db: &LeafDatabase, result: &QueryResult, source: &str) -> serde_json::Value {
    let species_of: BTreeMap<&str, &str> = db
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.species.as_str()))
        .collect();
    let finite = |v: f64| serde_json::Number::from_f64(v).map(serde_json::Value::Number);
    let ranked: Vec<serde_json::Value> = result
        .ranked
        .iter()
        .enumerate()
        .map(|(rank, c)| {
            serde_json::json!({
                "rank": rank + 1,
                "record_id": c.record_id,
                "species": species_of.get(c.record_id.as_str()).copied().unwrap_or(""),
                "mapping_cost": c.mapping.as_ref().and_then(|m| finite(m.cost)),
                "frechet": finite(c.frechet),
                "energy": c.energy.and_then(finite),
            })
        })
        .collect();
    serde_json::json!({
        "query": source,
        "best_id": result.best_id,
        "best_species": species_of.get(result.best_id.as_str()).copied().unwrap_or(""),
        "ranked": ranked,
        "timings_ms": result.stage_stats,
        "config": db.config,
    })
}

/// Read a query curve: open files are used as-is, closed files are treated
/// as unoccluded queries (the point sequence minus the closing edge).
pub fn read_query_curve(path: &Path) -> Result<OpenCurve<f64>> {
    Ok(match read_curve(path)? {
        AnyCurve::Open(c) => c,
        AnyCurve::Closed(c) => OpenCurve::new(c.into_points())?,
    })
}

pub fn cmd_query(db_dir: &Path, query_path: &Path, out: &Path) -> Result<()> {
    let db = load_database(db_dir)?;
    let curve = read_query_curve(query_path)?;
    let result = query(&db, &curve)?;
    let json = query_to_json(&db, &result, &query_path.display().to_string());
    fs::write(out, serde_json::to_string_pretty(&json)?)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("best match: {} -> {}", query_path.display(), result.best_id);
    Ok(())
}

pub struct EvaluateArgs<'a> {
    pub db_dir: &'a Path,
    pub queries_dir: &'a Path,
    pub truth_path: &'a Path,
    pub occlusion_lo: f64,
    pub occlusion_hi: f64,
    pub out: &'a Path,
    pub seed: Option<u64>,
}

pub fn cmd_evaluate(args: EvaluateArgs<'_>) -> Result<()> {
    if !(0.0..=0.95).contains(&args.occlusion_lo)
        || !(0.0..=0.95).contains(&args.occlusion_hi)
        || args.occlusion_lo > args.occlusion_hi
    {
        bail!(
            "bad occlusion range {}:{}",
            args.occlusion_lo,
            args.occlusion_hi
        );
    }
    let db = load_database(args.db_dir)?;
    let truth_by_id = read_labels(args.truth_path)?;
    let seed = args.seed.unwrap_or(db.config.seed);

    let files = curve_files(args.queries_dir)?;
    if files.is_empty() {
        bail!("no query contours in {}", args.queries_dir.display());
    }

    let mut results: Vec<QueryResult> = Vec::new();
    let mut truth: Vec<String> = Vec::new();
    let mut fractions: Vec<f64> = Vec::new();
    for (idx, path) in files.iter().enumerate() {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let label = truth_by_id
            .get(&id)
            .ok_or_else(|| anyhow!("query {id} missing from truth file"))?
            .clone();
        let contour = match read_curve(path)? {
            AnyCurve::Closed(c) => c,
            AnyCurve::Open(_) => bail!("{}: evaluation queries must be full contours", path.display()),
        };
        let query_seed = seed.wrapping_add(idx as u64);
        let fraction = if args.occlusion_lo == args.occlusion_hi {
            args.occlusion_lo
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(query_seed ^ 0x9e37_79b9);
            rng.gen_range(args.occlusion_lo..=args.occlusion_hi)
        };
        let occluded = occlude(&contour, fraction, query_seed)?;
        results.push(query(&db, &occluded)?);
        truth.push(label);
        fractions.push(fraction);
    }

    let table = rank_metrics(&results, &truth, &db, None)?;
    let mean_fraction = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let energy_overrides = results
        .iter()
        .filter(|r| {
            let frechet_best = r
                .ranked
                .iter()
                .min_by(|a, b| a.frechet.partial_cmp(&b.frechet).unwrap())
                .map(|c| c.record_id.clone());
            frechet_best.as_deref() != Some(r.best_id.as_str())
        })
        .count();

    let mut csv = String::new();
    writeln!(csv, "# leafmatch evaluate")?;
    writeln!(csv, "# config: {}", serde_json::to_string(&db.config)?)?;
    writeln!(
        csv,
        "# queries: {}, occlusion_range: {:.3}:{:.3}, seed: {}",
        files.len(),
        args.occlusion_lo,
        args.occlusion_hi,
        seed
    )?;
    writeln!(csv, "occlusion,rank,precision,recall")?;
    for row in &table.rows {
        writeln!(
            csv,
            "{:.3},{},{:.6},{:.6}",
            mean_fraction, row.rank, row.precision, row.recall
        )?;
    }
    writeln!(csv, "# rank1_accuracy,{:.6}", table.rank1_accuracy)?;
    writeln!(
        csv,
        "# energy_override_fraction,{:.6}",
        energy_overrides as f64 / results.len() as f64
    )?;
    fs::write(args.out, csv).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "evaluated {} queries: rank-1 accuracy {:.3}",
        results.len(),
        table.rank1_accuracy
    );
    Ok(())
}

pub fn cmd_gen_synthetic(classes: usize, per_class: usize, seed: u64, out: &Path) -> Result<()> {
    if classes == 0 || per_class == 0 {
        bail!("classes and per-class counts must be positive");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let corpus = synth::generate_corpus(classes, per_class, seed, 512);
    let mut labels = String::from("id,species\n");
    for (id, species, points) in &corpus {
        write_curve(&out.join(format!("{id}.contour")), points, true)?;
        writeln!(labels, "{id},{species}")?;
    }
    fs::write(out.join("labels.csv"), labels)?;
    println!(
        "wrote {} contours over {} classes to {}",
        corpus.len(),
        classes,
        out.display()
    );
    Ok(())
}
