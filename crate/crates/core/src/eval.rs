//! Retrieval quality: precision-recall over ranked query results, with
//! species-level relevance and optional equivalence groups of species that
//! count as mutually correct answers.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::pipeline::{LeafDatabase, QueryResult};

/// Precision and recall at one rank cutoff, averaged over queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrRow {
    pub rank: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrTable {
    pub rows: Vec<PrRow>,
    /// Fraction of queries whose top answer has the correct species.
    pub rank1_accuracy: f64,
    pub query_count: usize,
}

/// Species considered interchangeable when scoring.
pub type EquivalenceGroups = Vec<Vec<String>>;

fn accepted_species(truth: &str, equiv: Option<&EquivalenceGroups>) -> BTreeSet<String> {
    let mut ok = BTreeSet::new();
    ok.insert(truth.to_string());
    if let Some(groups) = equiv {
        for group in groups {
            if group.iter().any(|s| s == truth) {
                ok.extend(group.iter().cloned());
            }
        }
    }
    ok
}

/// Precision-recall table over species-level relevance.
///
/// `truth[i]` is the true species of `results[i]`. Every truth label must
/// exist in the database (possibly via an equivalence group).
pub fn rank_metrics(
    results: &[QueryResult],
    truth: &[String],
    db: &LeafDatabase,
    equiv: Option<&EquivalenceGroups>,
) -> Result<PrTable> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no query results to evaluate".into()));
    }
    if results.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} results vs {} truth labels",
            results.len(),
            truth.len()
        )));
    }
    let species_of: BTreeMap<&str, &str> = db
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.species.as_str()))
        .collect();
    let db_species: BTreeSet<&str> = species_of.values().cloned().collect();

    let max_rank = results.iter().map(|r| r.ranked.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(max_rank);
    let mut rank1_hits = 0usize;

    // per query: which ranked entries are relevant
    let mut relevance: Vec<Vec<bool>> = Vec::with_capacity(results.len());
    for (result, label) in results.iter().zip(truth) {
        let ok = accepted_species(label, equiv);
        if !ok.iter().any(|s| db_species.contains(s.as_str())) {
            return Err(Error::UnknownLabel(label.clone()));
        }
        let rel: Vec<bool> = result
            .ranked
            .iter()
            .map(|c| {
                species_of
                    .get(c.record_id.as_str())
                    .map(|s| ok.contains(*s))
                    .unwrap_or(false)
            })
            .collect();
        if rel.first().copied().unwrap_or(false) {
            rank1_hits += 1;
        }
        relevance.push(rel);
    }

    for rank in 1..=max_rank {
        let mut precision = 0.0;
        let mut recall = 0.0;
        for rel in &relevance {
            let upto = rank.min(rel.len());
            let hits = rel[..upto].iter().filter(|&&b| b).count() as f64;
            let total = rel.iter().filter(|&&b| b).count().max(1) as f64;
            precision += hits / rank as f64;
            recall += hits / total;
        }
        rows.push(PrRow {
            rank,
            precision: precision / results.len() as f64,
            recall: recall / results.len() as f64,
        });
    }

    Ok(PrTable {
        rows,
        rank1_accuracy: rank1_hits as f64 / results.len() as f64,
        query_count: results.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{CandidateMatch, QueryResult, StageStats};

    fn fake_result(ids: &[&str]) -> QueryResult {
        let ranked: Vec<CandidateMatch> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| CandidateMatch {
                record_id: id.to_string(),
                section: None,
                mapping: None,
                affine: None,
                frechet: i as f64,
                energy: None,
            })
            .collect();
        QueryResult {
            best_id: ids[0].to_string(),
            ranked,
            stage_stats: StageStats::default(),
        }
    }

    fn fake_db(entries: &[(&str, &str)]) -> LeafDatabase {
        use crate::geometry::{Contour, Point2};
        use crate::pipeline::{LeafRecord, RunConfig};
        let contour = {
            let pts = (0..16)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / 16.0;
                    Point2::new(a.cos(), a.sin())
                })
                .collect();
            Contour::new(pts).unwrap()
        };
        let features = crate::dce::extract_features(&contour, 5).unwrap();
        let records = entries
            .iter()
            .map(|(id, sp)| LeafRecord {
                id: id.to_string(),
                species: sp.to_string(),
                contour: contour.clone(),
                spline: contour.clone(),
                features: features.clone(),
            })
            .collect();
        LeafDatabase {
            records,
            config: RunConfig::default(),
        }
    }

    #[test]
    fn perfect_ranker_precision_one() {
        let db = fake_db(&[("a", "sp1"), ("b", "sp2"), ("c", "sp3")]);
        let results = vec![fake_result(&["a", "b", "c"])];
        let truth = vec!["sp1".to_string()];
        let table = rank_metrics(&results, &truth, &db, None).unwrap();
        assert_eq!(table.rank1_accuracy, 1.0);
        assert_eq!(table.rows[0].precision, 1.0);
        assert_eq!(table.rows[0].recall, 1.0); // single relevant record
    }

    #[test]
    fn random_ranker_near_chance() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let classes = 5;
        let entries: Vec<(String, String)> = (0..classes)
            .map(|c| (format!("r{c}"), format!("sp{c}")))
            .collect();
        let refs: Vec<(&str, &str)> = entries
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let db = fake_db(&refs);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut results = Vec::new();
        let mut truth = Vec::new();
        for t in 0..2000 {
            let mut ids: Vec<&str> = refs.iter().map(|(id, _)| *id).collect();
            ids.shuffle(&mut rng);
            results.push(fake_result(&ids));
            truth.push(format!("sp{}", t % classes));
        }
        let table = rank_metrics(&results, &truth, &db, None).unwrap();
        let expect = 1.0 / classes as f64;
        assert!(
            (table.rank1_accuracy - expect).abs() < 0.03,
            "rank1 {} vs chance {expect}",
            table.rank1_accuracy
        );
    }

    #[test]
    fn equivalence_groups_accept_close_species() {
        let db = fake_db(&[("a", "maple_red"), ("b", "maple_sycamore"), ("c", "oak")]);
        let results = vec![fake_result(&["b", "c", "a"])];
        let truth = vec!["maple_red".to_string()];
        let plain = rank_metrics(&results, &truth, &db, None).unwrap();
        assert_eq!(plain.rank1_accuracy, 0.0);
        let groups = vec![vec!["maple_red".to_string(), "maple_sycamore".to_string()]];
        let grouped = rank_metrics(&results, &truth, &db, Some(&groups)).unwrap();
        assert_eq!(grouped.rank1_accuracy, 1.0);
    }

    #[test]
    fn unknown_truth_label_errors() {
        let db = fake_db(&[("a", "sp1")]);
        let results = vec![fake_result(&["a"])];
        let truth = vec!["mystery".to_string()];
        assert!(rank_metrics(&results, &truth, &db, None).is_err());
    }

    #[test]
    fn empty_results_error() {
        let db = fake_db(&[("a", "sp1")]);
        assert!(rank_metrics(&[], &[], &db, None).is_err());
    }
}
