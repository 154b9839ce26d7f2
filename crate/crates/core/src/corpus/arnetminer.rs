use std::io::BufRead;

use super::{Corpus, IngestReport, PaperRecord};
use crate::{Error, Result};

#[derive(Default)]
struct Block {
    start_line: usize,
    id: Option<String>,
    title_seen: bool,
    year: Option<String>,
    venue: String,
    references: Vec<String>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.id.is_none() && !self.title_seen && self.year.is_none() && self.references.is_empty()
    }
}

/// Parses the ArnetMiner line-prefix citation dump.
///
/// Records are separated by blank lines (a second `#*` title line also starts a
/// new record). Recognised prefixes: `#index` id, `#*` title, `#@` authors,
/// `#t` year, `#c` venue, `#%` one cited id, `#!` abstract. Anything else is
/// ignored. Records with a missing or malformed year (or no `#index`) are
/// skipped and counted; a repeated id is an error.
pub fn parse_arnetminer<R: BufRead>(reader: R) -> Result<(Corpus, IngestReport)> {
    let mut report = IngestReport::default();
    let mut papers: Vec<PaperRecord> = Vec::new();
    let mut seen = std::collections::HashMap::new();
    let mut block = Block::default();

    let mut finish = |block: Block, report: &mut IngestReport, papers: &mut Vec<PaperRecord>| -> Result<()> {
        if block.is_empty() {
            return Ok(());
        }
        report.records += 1;
        let Some(id) = block.id.filter(|s| !s.is_empty()) else {
            report.skipped_records += 1;
            report
                .warnings
                .push(format!("line {}: record without #index skipped", block.start_line));
            return Ok(());
        };
        let year = match block.year.as_deref().map(str::parse::<i32>) {
            Some(Ok(y)) if y > 0 => y,
            other => {
                report.skipped_records += 1;
                let raw = match other {
                    None => "missing".to_string(),
                    Some(_) => format!("`{}`", block.year.unwrap_or_default()),
                };
                report
                    .warnings
                    .push(format!("line {}: record `{id}` has malformed year ({raw}), skipped", block.start_line));
                return Ok(());
            }
        };
        if let Some(prev) = seen.insert(id.clone(), block.start_line) {
            return Err(Error::Parse {
                line: block.start_line,
                message: format!("duplicate id `{id}` (first seen at line {prev})"),
            });
        }
        let mut rec = PaperRecord {
            id,
            year,
            venue: block.venue,
            references: block.references,
            domain_tag: None,
        };
        report.dropped_references += rec.normalize_references();
        papers.push(rec);
        Ok(())
    };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() {
            finish(std::mem::take(&mut block), &mut report, &mut papers)?;
            continue;
        }
        if block.is_empty() {
            block.start_line = lineno;
        }
        if let Some(rest) = trimmed.strip_prefix("#index") {
            block.id = Some(rest.trim().to_string());
        } else if trimmed.starts_with("#*") {
            if block.title_seen {
                finish(std::mem::take(&mut block), &mut report, &mut papers)?;
                block.start_line = lineno;
            }
            block.title_seen = true;
        } else if let Some(rest) = trimmed.strip_prefix("#t") {
            block.year = Some(rest.trim().to_string());
        } else if let Some(rest) = trimmed.strip_prefix("#c") {
            block.venue = rest.trim().to_string();
        } else if let Some(rest) = trimmed.strip_prefix("#%") {
            let r = rest.trim();
            if !r.is_empty() {
                block.references.push(r.to_string());
            }
        }
        // `#@`, `#!` and unknown prefixes carry nothing we keep.
    }
    finish(block, &mut report, &mut papers)?;

    let corpus = Corpus::new(papers, "arnetminer")?;
    report.dangling_references = corpus.dangling_references();
    Ok((corpus, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<(Corpus, IngestReport)> {
        parse_arnetminer(s.as_bytes())
    }

    #[test]
    fn single_block_maps_fields() {
        let (c, _) = parse("#index 7\n#*T\n#t 2005\n#c VLDB\n#%3\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.papers()[0], PaperRecord::new("7", 2005, "VLDB", vec!["3".into()]));
        assert_eq!(c.source_label(), "arnetminer");
    }

    #[test]
    fn no_reference_lines_gives_empty_references() {
        let (c, _) = parse("#*Title\n#@A. Author\n#t2001\n#cKDD\n#index12\n#!abstract text\n").unwrap();
        assert!(c.papers()[0].references.is_empty());
        assert_eq!(c.papers()[0].id, "12");
        assert_eq!(c.papers()[0].venue, "KDD");
    }

    #[test]
    fn second_block_citing_first_resolves() {
        let text = "#*A\n#t2000\n#cX\n#index1\n\n#*B\n#t2003\n#cY\n#index2\n#%1\n";
        let (c, r) = parse(text).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.papers()[1].references, vec!["1".to_string()]);
        assert_eq!(r.dangling_references, 0);
        assert!(c.contains("1"));
    }

    #[test]
    fn malformed_year_is_skipped_and_counted() {
        let text = "#*A\n#tnineteen\n#index1\n\n#*B\n#t2003\n#index2\n";
        let (c, r) = parse(text).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(r.skipped_records, 1);
        assert_eq!(r.records, 2);
        assert!(r.warnings[0].contains("malformed year"));
    }

    #[test]
    fn duplicate_id_is_error_naming_id() {
        let text = "#*A\n#t2000\n#index9\n\n#*B\n#t2001\n#index9\n";
        let err = parse(text).unwrap_err().to_string();
        assert!(err.contains("`9`"), "{err}");
    }

    #[test]
    fn back_to_back_titles_split_records() {
        let (c, _) = parse("#*A\n#t2000\n#index1\n#*B\n#t2001\n#index2\n#%1\n").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn unknown_prefixes_ignored() {
        let (c, _) = parse("#index5\n#t1999\n#zfoo\nnoise\n").unwrap();
        assert_eq!(c.papers()[0].year, 1999);
    }
}
