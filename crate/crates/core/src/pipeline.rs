//! End-to-end retrieval: database construction, per-query candidate
//! generation (subgraph match -> section -> affine overlay -> Frechet),
//! pruning to the eta survivors, GNCCP energy re-ranking, and on-disk
//! persistence of databases.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{fit_affine, frechet_distance, overlay, AffineTransform};
use crate::dce::{extract_features, FeatureGraph};
use crate::energy::{build_bundle, BundleConfig, EnergyWeights};
use crate::error::{Error, Result};
use crate::geometry::{
    normalize, resample_uniform, savgol_points, Contour, Curve, OpenCurve, Point2,
};
use crate::gnccp::{gnccp_optimize, GnccpConfig};
use crate::io;
use crate::spline::{sample_spline, SplineConfig, SplineCurve};
use crate::subgraph::{extract_section, subgraph_match, MatchConfig, NodeMapping};

/// Minimum points a database contour must have at ingestion.
const MIN_CONTOUR_POINTS: usize = 8;

/// Every tunable of the pipeline; echoed into all outputs for
/// reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Beta-spline tension.
    pub tension: f64,
    /// Point count of spline-resampled curves.
    pub spline_points: usize,
    /// Point count at the energy stage.
    pub energy_points: usize,
    /// DCE vertex count.
    pub dce_k: usize,
    /// Unmapped-node penalty, fraction of the full curve length.
    pub lambda: f64,
    /// Nearest-neighbour rejection radius, fraction of the full curve length.
    pub nn_reject: f64,
    /// Survivor count of the Frechet pruning stage.
    pub eta: usize,
    /// Energy term weights.
    pub w_local: f64,
    pub w_global: f64,
    pub w_angular: f64,
    pub w_stringcut: f64,
    /// GNCCP controls.
    pub d_zeta: f64,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub line_search_tol: f64,
    /// Frechet-stage resampling resolution.
    pub frechet_points: usize,
    /// Savitzky-Golay smoothing window (shrunk to len/4 when needed).
    pub savgol_window: usize,
    /// Local curvature window at the energy stage.
    pub local_window: usize,
    /// Shape-context bins.
    pub sc_radial_bins: usize,
    pub sc_angular_bins: usize,
    /// StringCut neighbourhood size.
    pub stringcut_window: usize,
    /// StringCut on-the-line tolerance, fraction of curve length.
    pub on_line_tol: f64,
    /// Base seed for randomized commands (occlusion, synthesis).
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tension: 10.0,
            spline_points: 1000,
            energy_points: 100,
            dce_k: 20,
            lambda: 0.1,
            nn_reject: 0.1,
            eta: 5,
            w_local: 0.25,
            w_global: 0.25,
            w_angular: 0.25,
            w_stringcut: 0.25,
            d_zeta: 0.05,
            inner_tol: 1e-6,
            max_inner: 100,
            line_search_tol: 1e-8,
            frechet_points: 200,
            savgol_window: 9,
            local_window: 20,
            sc_radial_bins: 5,
            sc_angular_bins: 12,
            stringcut_window: 21,
            on_line_tol: 1e-6,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn spline_config(&self) -> Result<SplineConfig<f64>> {
        SplineConfig::new(self.tension, self.spline_points)
    }

    pub fn match_config(&self) -> MatchConfig<f64> {
        MatchConfig {
            lambda: self.lambda,
            nn_reject: self.nn_reject,
        }
    }

    pub fn bundle_config(&self) -> BundleConfig<f64> {
        BundleConfig {
            local_window: self.local_window,
            n_r: self.sc_radial_bins,
            n_theta: self.sc_angular_bins,
            stringcut_window: self.stringcut_window,
            on_line_tol: self.on_line_tol,
        }
    }

    pub fn energy_weights(&self) -> EnergyWeights<f64> {
        EnergyWeights {
            w_local: self.w_local,
            w_global: self.w_global,
            w_angular: self.w_angular,
            w_stringcut: self.w_stringcut,
        }
    }

    pub fn gnccp_config(&self) -> GnccpConfig<f64> {
        GnccpConfig {
            d_zeta: self.d_zeta,
            inner_tol: self.inner_tol,
            max_inner: self.max_inner,
            line_search_tol: self.line_search_tol,
        }
    }
}

/// One database entry: the normalized contour, its spline resampling and the
/// DCE feature graph derived from it.
#[derive(Debug, Clone)]
pub struct LeafRecord {
    pub id: String,
    pub species: String,
    pub contour: Contour<f64>,
    pub spline: Contour<f64>,
    pub features: FeatureGraph<f64>,
}

/// An immutable database plus the config snapshot it was built with.
#[derive(Debug, Clone)]
pub struct LeafDatabase {
    pub records: Vec<LeafRecord>,
    pub config: RunConfig,
}

/// A file the builder skipped, with the reason.
#[derive(Debug, Clone)]
pub struct BuildSkip {
    pub file: String,
    pub reason: String,
}

/// One database curve scored against a query. `energy` is present only for
/// the eta survivors that reached the GNCCP stage; records whose subgraph
/// match failed carry an infinite Frechet score and no section.
#[derive(Debug, Clone)]
pub struct CandidateMatch {
    pub record_id: String,
    pub section: Option<OpenCurve<f64>>,
    pub mapping: Option<NodeMapping<f64>>,
    pub affine: Option<AffineTransform<f64>>,
    pub frechet: f64,
    pub energy: Option<f64>,
}

/// Wall-clock milliseconds per query stage.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageStats {
    pub preprocess_ms: f64,
    pub subgraph_ms: f64,
    pub frechet_ms: f64,
    pub gnccp_ms: f64,
}

/// Full ranking (best first) for one query.
#[derive(Debug, Clone)]
pub struct QueryResult {
    pub ranked: Vec<CandidateMatch>,
    pub best_id: String,
    pub stage_stats: StageStats,
}

// ===== preprocessing =====

fn adaptive_savgol(points: &[Point2<f64>], closed: bool, window: usize) -> Vec<Point2<f64>> {
    let cap = (points.len() / 4) | 1;
    let w = window.min(cap) | 1;
    if w < 5 {
        return points.to_vec();
    }
    savgol_points(points, closed, w)
}

fn spline_resample_closed(contour: &Contour<f64>, cfg: &RunConfig) -> Result<Contour<f64>> {
    let smoothed = adaptive_savgol(contour.points(), true, cfg.savgol_window);
    let curve = SplineCurve::new(smoothed, cfg.spline_config()?, true)?;
    Contour::new(sample_spline(&curve, cfg.spline_points)?)
}

fn spline_resample_open(curve: &OpenCurve<f64>, cfg: &RunConfig) -> Result<OpenCurve<f64>> {
    let smoothed = adaptive_savgol(curve.points(), false, cfg.savgol_window);
    let spline = SplineCurve::new(smoothed, cfg.spline_config()?, false)?;
    OpenCurve::new(sample_spline(&spline, cfg.spline_points)?)
}

fn build_record(id: String, species: String, contour: Contour<f64>, cfg: &RunConfig) -> Result<LeafRecord> {
    if contour.len() < MIN_CONTOUR_POINTS {
        return Err(Error::DegenerateCurve(format!(
            "contour has {} points, needs {MIN_CONTOUR_POINTS}",
            contour.len()
        )));
    }
    let contour = normalize(&contour);
    let spline = spline_resample_closed(&contour, cfg)?;
    let features = extract_features(&spline, cfg.dce_k)?;
    Ok(LeafRecord {
        id,
        species,
        contour,
        spline,
        features,
    })
}

// ===== database construction =====

/// Build a database from contour files. Unreadable or degenerate files are
/// skipped and reported; duplicate ids and an empty result are errors.
/// Record ids are the file stems; labels map id -> species.
pub fn build_database(
    files: &[PathBuf],
    labels: &BTreeMap<String, String>,
    config: RunConfig,
) -> Result<(LeafDatabase, Vec<BuildSkip>)> {
    let mut inputs = Vec::new();
    let mut skips = Vec::new();
    for path in files {
        let file = path.display().to_string();
        let id = match path.file_stem() {
            Some(s) => s.to_string_lossy().into_owned(),
            None => {
                skips.push(BuildSkip {
                    file,
                    reason: "no file stem".into(),
                });
                continue;
            }
        };
        match io::read_curve(path) {
            Ok(io::AnyCurve::Closed(c)) => inputs.push((id, c)),
            Ok(io::AnyCurve::Open(_)) => skips.push(BuildSkip {
                file,
                reason: "open curve cannot enter the database".into(),
            }),
            Err(e) => skips.push(BuildSkip {
                file,
                reason: e.to_string(),
            }),
        }
    }
    let (db, mut more) = build_database_from_contours(inputs, labels, config)?;
    skips.append(&mut more);
    Ok((db, skips))
}

/// Build from already-parsed contours (e.g. traced from binary masks).
pub fn build_database_from_contours(
    inputs: Vec<(String, Contour<f64>)>,
    labels: &BTreeMap<String, String>,
    config: RunConfig,
) -> Result<(LeafDatabase, Vec<BuildSkip>)> {
    config.spline_config()?;
    config.energy_weights().validate()?;
    config.gnccp_config().validate()?;

    let outcomes: Vec<std::result::Result<LeafRecord, BuildSkip>> = inputs
        .into_par_iter()
        .map(|(id, contour)| {
            let skip = |reason: String| BuildSkip {
                file: id.clone(),
                reason,
            };
            let species = labels
                .get(&id)
                .cloned()
                .ok_or_else(|| skip(format!("no label for id {id}")))?;
            build_record(id.clone(), species, contour, &config).map_err(|e| skip(e.to_string()))
        })
        .collect();

    let mut records = Vec::new();
    let mut skips = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(s) => skips.push(s),
        }
    }
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert(r.id.clone()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no contours ingested ({} skipped)",
            skips.len()
        )));
    }
    Ok((LeafDatabase { records, config }, skips))
}

// ===== query =====

/// Ascending Frechet order, ties broken by lower subgraph mapping cost and
/// then database order; the first `eta` survive to the energy stage.
pub fn prune_candidates(candidates: &mut [CandidateMatch], eta: usize) -> usize {
    candidates.sort_by(|a, b| {
        let fa = (a.frechet, a.mapping.as_ref().map_or(f64::INFINITY, |m| m.cost));
        let fb = (b.frechet, b.mapping.as_ref().map_or(f64::INFINITY, |m| m.cost));
        fa.partial_cmp(&fb).unwrap_or(std::cmp::Ordering::Equal)
    });
    eta.min(candidates.len())
}

fn orient_arc(
    arc: &OpenCurve<f64>,
    full_len: usize,
    arc_start_idx: usize,
    matched_curve_indices: &[usize],
) -> OpenCurve<f64> {
    // reverse the arc when the matched nodes run against its direction
    let pos: Vec<usize> = matched_curve_indices
        .iter()
        .map(|&c| (c + full_len - arc_start_idx) % full_len)
        .collect();
    let mut inversions = 0usize;
    let mut pairs = 0usize;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            pairs += 1;
            if pos[i] > pos[j] {
                inversions += 1;
            }
        }
    }
    if pairs > 0 && inversions * 2 > pairs {
        let mut pts = arc.points().to_vec();
        pts.reverse();
        OpenCurve::new(pts).unwrap_or_else(|_| arc.clone())
    } else {
        arc.clone()
    }
}

fn unmatched(record_id: &str) -> CandidateMatch {
    CandidateMatch {
        record_id: record_id.to_string(),
        section: None,
        mapping: None,
        affine: None,
        frechet: f64::INFINITY,
        energy: None,
    }
}

fn candidate_for_record(
    record: &LeafRecord,
    query_curve: &OpenCurve<f64>,
    query_graph: &FeatureGraph<f64>,
    cfg: &RunConfig,
) -> CandidateMatch {
    let mcfg = cfg.match_config();
    let mapping = match subgraph_match(query_graph, &record.features, &mcfg) {
        Ok(m) => m,
        Err(_) => return unmatched(&record.id),
    };
    let matched: Vec<(usize, usize)> = mapping
        .pairs
        .iter()
        .filter_map(|&(a, m)| m.map(|b| (a, b)))
        .collect();
    if matched.len() < 2 {
        return unmatched(&record.id);
    }

    // affine from the node correspondences; 2-point similarity fallback for
    // degenerate sets
    let src: Vec<Point2<f64>> = matched.iter().map(|&(a, _)| query_graph.nodes[a].1).collect();
    let dst: Vec<Point2<f64>> = matched
        .iter()
        .map(|&(_, b)| record.features.nodes[b].1)
        .collect();
    let affine = fit_affine(&src, &dst).or_else(|_| {
        AffineTransform::similarity_from_pairs(
            src[0],
            *src.last().unwrap(),
            dst[0],
            *dst.last().unwrap(),
            mapping.orientation < 0,
        )
    });
    let affine = match affine {
        Ok(a) => a,
        Err(_) => return unmatched(&record.id),
    };
    let overlaid = match overlay(query_curve, &affine, false) {
        Ok(c) => c,
        Err(_) => return unmatched(&record.id),
    };

    let arcs = match extract_section(
        &record.spline,
        &record.features,
        &mapping,
        query_curve.total_length(),
    ) {
        Ok(a) => a,
        Err(_) => return unmatched(&record.id),
    };

    let query_rs = match resample_uniform(&overlaid, cfg.frechet_points) {
        Ok(c) => c,
        Err(_) => return unmatched(&record.id),
    };
    let matched_curve_indices: Vec<usize> = matched
        .iter()
        .map(|&(_, b)| record.features.nodes[b].0)
        .collect();
    let n_full = record.spline.len();

    let mut best: Option<(f64, OpenCurve<f64>)> = None;
    for arc in arcs {
        let start_idx = record
            .spline
            .points()
            .iter()
            .position(|p| *p == arc.points()[0])
            .unwrap_or(0);
        let oriented = orient_arc(&arc, n_full, start_idx, &matched_curve_indices);
        let arc_rs = match resample_uniform(&oriented, cfg.frechet_points) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let f = match frechet_distance(query_rs.points(), arc_rs.points()) {
            Ok(r) => r.distance,
            Err(_) => continue,
        };
        if best.as_ref().map_or(true, |(bf, _)| f < *bf) {
            best = Some((f, oriented));
        }
    }
    match best {
        Some((frechet, section)) => CandidateMatch {
            record_id: record.id.clone(),
            section: Some(section),
            mapping: Some(mapping),
            affine: Some(affine),
            frechet,
            energy: None,
        },
        None => unmatched(&record.id),
    }
}

/// Run the full pipeline for one occluded query curve.
///
/// Stages: smooth -> spline resample -> DCE -> per-record subgraph match,
/// section extraction, affine overlay and Frechet score -> prune to eta ->
/// GNCCP energy on the survivors -> final ranking (survivors ascending by
/// energy, remainder ascending by Frechet).
pub fn query(db: &LeafDatabase, occluded: &OpenCurve<f64>) -> Result<QueryResult> {
    if db.records.is_empty() {
        return Err(Error::EmptyInput("empty database".into()));
    }
    let cfg = &db.config;
    let mut stats = StageStats::default();

    let t0 = Instant::now();
    // center the query; scale is free because the subgraph cost is
    // similarity-scaled and the energy stage works on overlaid curves
    let mean = {
        let pts = occluded.points();
        let mut acc = Point2::new(0.0, 0.0);
        for p in pts {
            acc = acc + *p;
        }
        acc * (1.0 / pts.len() as f64)
    };
    let centered = OpenCurve::new(occluded.points().iter().map(|p| *p - mean).collect())?;
    let query_curve = spline_resample_open(&centered, cfg)?;
    let query_graph = extract_features(&query_curve, cfg.dce_k.min(query_curve.len()))?;
    stats.preprocess_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let mut candidates: Vec<CandidateMatch> = db
        .records
        .par_iter()
        .map(|record| candidate_for_record(record, &query_curve, &query_graph, cfg))
        .collect();
    stats.subgraph_ms = t1.elapsed().as_secs_f64() * 1e3;
    // the per-record stage interleaves matching and Frechet; report the
    // pruning split separately
    let t2 = Instant::now();
    let survivors = prune_candidates(&mut candidates, cfg.eta);
    stats.frechet_ms = t2.elapsed().as_secs_f64() * 1e3;

    let t3 = Instant::now();
    let bcfg = cfg.bundle_config();
    let weights = cfg.energy_weights();
    let gcfg = cfg.gnccp_config();
    let energies: Vec<Option<f64>> = candidates[..survivors]
        .par_iter()
        .map(|cand| {
            let section = cand.section.as_ref()?;
            let affine = cand.affine.as_ref()?;
            let overlaid = overlay(&query_curve, affine, false).ok()?;
            let q_e = resample_uniform(&overlaid, cfg.energy_points).ok()?;
            let s_e = resample_uniform(section, cfg.energy_points).ok()?;
            let bundle_p = build_bundle(&q_e, &bcfg).ok()?;
            let bundle_q = build_bundle(&s_e, &bcfg).ok()?;
            let r = gnccp_optimize(&bundle_p, &bundle_q, &weights, &gcfg).ok()?;
            Some(r.energy)
        })
        .collect();
    for (cand, e) in candidates[..survivors].iter_mut().zip(energies) {
        cand.energy = e;
    }
    // survivors ascending by energy (None sorts last), then the remainder
    candidates[..survivors].sort_by(|a, b| {
        let ea = a.energy.unwrap_or(f64::INFINITY);
        let eb = b.energy.unwrap_or(f64::INFINITY);
        ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal)
    });
    stats.gnccp_ms = t3.elapsed().as_secs_f64() * 1e3;

    let best_id = candidates[0].record_id.clone();
    Ok(QueryResult {
        ranked: candidates,
        best_id,
        stage_stats: stats,
    })
}

// ===== persistence =====

const DB_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    format_version: u32,
    config: RunConfig,
    records: Vec<ManifestRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    id: String,
    species: String,
    contour_file: String,
    features_file: String,
}

#[derive(Serialize, Deserialize)]
struct FeaturesFile {
    version: u32,
    closed: bool,
    source_len: usize,
    total_length: f64,
    spline: Vec<[f64; 2]>,
    nodes: Vec<(usize, [f64; 2])>,
    geodesic: Vec<Vec<f64>>,
}

/// Persist a database as a directory: a JSON manifest plus one contour file
/// and one feature file per record.
pub fn save_database(db: &LeafDatabase, dir: &Path) -> Result<()> {
    let records_dir = dir.join("records");
    fs::create_dir_all(&records_dir).map_err(|e| Error::io(records_dir.display().to_string(), e))?;
    let mut entries = Vec::with_capacity(db.records.len());
    for r in &db.records {
        let contour_file = format!("records/{}.contour", r.id);
        let features_file = format!("records/{}.features.json", r.id);
        io::write_curve(&dir.join(&contour_file), r.contour.points(), true)?;
        let features = FeaturesFile {
            version: DB_FORMAT_VERSION,
            closed: r.features.closed,
            source_len: r.features.source_len,
            total_length: r.features.total_length,
            spline: r.spline.points().iter().map(|p| [p.x, p.y]).collect(),
            nodes: r
                .features
                .nodes
                .iter()
                .map(|&(i, p)| (i, [p.x, p.y]))
                .collect(),
            geodesic: r.features.geodesic.clone(),
        };
        let path = dir.join(&features_file);
        let text = serde_json::to_string(&features)
            .map_err(|e| Error::Format(format!("serialize features: {e}")))?;
        fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        entries.push(ManifestRecord {
            id: r.id.clone(),
            species: r.species.clone(),
            contour_file,
            features_file,
        });
    }
    let manifest = ManifestFile {
        format_version: DB_FORMAT_VERSION,
        config: db.config.clone(),
        records: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("serialize manifest: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_database(dir: &Path) -> Result<LeafDatabase> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let manifest: ManifestFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if manifest.format_version != DB_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported database format version {}",
            manifest.format_version
        )));
    }
    if manifest.records.is_empty() {
        return Err(Error::EmptyInput("database manifest lists no records".into()));
    }
    let mut records = Vec::with_capacity(manifest.records.len());
    for entry in manifest.records {
        let contour = match io::read_curve(&dir.join(&entry.contour_file))? {
            io::AnyCurve::Closed(c) => c,
            io::AnyCurve::Open(_) => {
                return Err(Error::Format(format!("record {} is not closed", entry.id)))
            }
        };
        let fpath = dir.join(&entry.features_file);
        let ftext =
            fs::read_to_string(&fpath).map_err(|e| Error::io(fpath.display().to_string(), e))?;
        let features: FeaturesFile = serde_json::from_str(&ftext)
            .map_err(|e| Error::Format(format!("features of {}: {e}", entry.id)))?;
        if features.version != DB_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "record {}: unsupported features version {}",
                entry.id, features.version
            )));
        }
        let spline = Contour::new(
            features
                .spline
                .iter()
                .map(|&[x, y]| Point2::new(x, y))
                .collect(),
        )?;
        let graph = FeatureGraph::from_parts(
            features
                .nodes
                .iter()
                .map(|&(i, [x, y])| (i, Point2::new(x, y)))
                .collect(),
            features.geodesic,
            features.source_len,
            features.total_length,
            features.closed,
        )?;
        records.push(LeafRecord {
            id: entry.id,
            species: entry.species,
            contour,
            spline,
            features: graph,
        });
    }
    Ok(LeafDatabase {
        records,
        config: manifest.config,
    })
}
