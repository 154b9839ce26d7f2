//! Citation corpora: the record type, loaders, the synthetic generator and
//! stratified sampling.

mod arnetminer;
mod canonical;
pub(crate) mod sampling;
mod synthetic;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use arnetminer::parse_arnetminer;
pub use canonical::{load_canonical, write_canonical};
pub use sampling::{cumulative_citations, stratified_sample, SampleReport};
pub use synthetic::{generate_synthetic, write_latents, LatentQuality, SyntheticCorpus, SyntheticParams};

/// One publication.
///
/// Field order is the canonical JSONL key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub id: String,
    pub year: i32,
    #[serde(default)]
    pub venue: String,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

impl PaperRecord {
    pub fn new(id: impl Into<String>, year: i32, venue: impl Into<String>, references: Vec<String>) -> Self {
        let mut rec = PaperRecord {
            id: id.into(),
            year,
            venue: venue.into(),
            references,
            domain_tag: None,
        };
        rec.normalize_references();
        rec
    }

    pub fn with_domain_tag(mut self, tag: impl Into<String>) -> Self {
        self.domain_tag = Some(tag.into());
        self
    }

    /// Drops duplicate and self references, keeping first occurrences in order.
    /// Returns how many entries were removed.
    pub(crate) fn normalize_references(&mut self) -> usize {
        let before = self.references.len();
        let mut seen = HashSet::with_capacity(before);
        let own = self.id.clone();
        self.references.retain(|r| r != &own && seen.insert(r.clone()));
        before - self.references.len()
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidRecord {
                id: String::new(),
                message: "empty id".into(),
            });
        }
        if self.year <= 0 {
            return Err(Error::InvalidRecord {
                id: self.id.clone(),
                message: format!("year must be positive, got {}", self.year),
            });
        }
        let mut seen = HashSet::with_capacity(self.references.len());
        for r in &self.references {
            if r == &self.id {
                return Err(Error::InvalidRecord {
                    id: self.id.clone(),
                    message: "paper cites itself".into(),
                });
            }
            if !seen.insert(r.as_str()) {
                return Err(Error::InvalidRecord {
                    id: self.id.clone(),
                    message: format!("duplicate reference `{r}`"),
                });
            }
        }
        Ok(())
    }
}

/// An ordered, immutable collection of papers with unique ids.
///
/// References to ids outside the corpus are kept on the records; they are
/// reported by [`Corpus::dangling_references`] and skipped by graph construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    papers: Vec<PaperRecord>,
    source_label: String,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(papers: Vec<PaperRecord>, source_label: impl Into<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(papers.len());
        for (i, p) in papers.iter().enumerate() {
            p.validate()?;
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(Corpus {
            papers,
            source_label: source_label.into(),
            index,
        })
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PaperRecord> {
        self.index.get(id).map(|&i| &self.papers[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Number of references (over all papers) whose target is not in the corpus.
    pub fn dangling_references(&self) -> usize {
        self.papers
            .iter()
            .flat_map(|p| p.references.iter())
            .filter(|r| !self.index.contains_key(r.as_str()))
            .count()
    }

    /// Inclusive (earliest, latest) publication year, `None` for an empty corpus.
    pub fn year_span(&self) -> Option<(i32, i32)> {
        let min = self.papers.iter().map(|p| p.year).min()?;
        let max = self.papers.iter().map(|p| p.year).max()?;
        Some((min, max))
    }

    /// A new corpus with the same label holding the papers at `positions`
    /// (in the given order).
    pub fn select(&self, positions: &[usize]) -> Result<Corpus> {
        let papers = positions.iter().map(|&i| self.papers[i].clone()).collect();
        Corpus::new(papers, self.source_label.clone())
    }

    pub fn into_papers(self) -> Vec<PaperRecord> {
        self.papers
    }
}

/// Summary of a load: counts plus human-readable warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub records: usize,
    pub skipped_records: usize,
    pub dropped_references: usize,
    pub dangling_references: usize,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_drops_self_and_duplicates() {
        let p = PaperRecord::new("a", 2000, "", vec!["b".into(), "a".into(), "b".into(), "c".into()]);
        assert_eq!(p.references, vec!["b".to_string(), "c".to_string()]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Corpus::new(
            vec![PaperRecord::new("x", 2000, "", vec![]), PaperRecord::new("x", 2001, "", vec![])],
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "x"));
    }

    #[test]
    fn non_positive_year_rejected() {
        assert!(Corpus::new(vec![PaperRecord::new("x", 0, "", vec![])], "t").is_err());
    }

    #[test]
    fn dangling_references_counted() {
        let c = Corpus::new(
            vec![
                PaperRecord::new("a", 2000, "", vec![]),
                PaperRecord::new("b", 2001, "", vec!["a".into(), "zzz".into()]),
            ],
            "t",
        )
        .unwrap();
        assert_eq!(c.dangling_references(), 1);
        assert_eq!(c.year_span(), Some((2000, 2001)));
    }
}
