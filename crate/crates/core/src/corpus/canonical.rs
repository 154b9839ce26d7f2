use std::io::{BufRead, Write};

use super::{Corpus, PaperRecord};
use crate::{Error, Result};

#[derive(serde::Deserialize)]
struct RawRecord {
    id: Option<String>,
    year: Option<i64>,
    #[serde(default)]
    venue: Option<String>,
    #[serde(default)]
    references: Vec<String>,
    #[serde(default)]
    domain_tag: Option<String>,
}

/// Reads canonical JSON lines. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn load_canonical<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut papers = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let id = raw.id.ok_or_else(|| Error::Parse {
            line: lineno,
            message: "missing `id`".into(),
        })?;
        let year = raw.year.ok_or_else(|| Error::Parse {
            line: lineno,
            message: "missing `year`".into(),
        })?;
        let year = i32::try_from(year).map_err(|_| Error::Parse {
            line: lineno,
            message: format!("year {year} out of range"),
        })?;
        let mut rec = PaperRecord {
            id,
            year,
            venue: raw.venue.unwrap_or_default(),
            references: raw.references,
            domain_tag: raw.domain_tag,
        };
        rec.normalize_references();
        papers.push(rec);
    }
    Corpus::new(papers, "canonical")
}

/// Writes one JSON object per paper, keys in the fixed order
/// `id, year, venue, references[, domain_tag]`, LF-terminated.
pub fn write_canonical<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    for p in corpus.papers() {
        serde_json::to_writer(&mut writer, p)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
