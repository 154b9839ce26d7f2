use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Corpus, PaperRecord};
use crate::{Error, Result};

/// Log-scale spread of the quality latent.
const QUALITY_SIGMA: f64 = 0.75;
/// Log-scale boost for the planted high-quality papers.
const PLANTED_SHIFT: f64 = 1.5;
/// Attention decay time constant, in years.
const AGING_YEARS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub n_papers: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub n_venues: usize,
    /// Exponent on `(citations + 1)` in the attachment weight.
    pub attachment_exponent: f64,
    /// Fraction of papers whose quality latent is shifted upwards.
    pub planted_quality_fraction: f64,
    pub mean_references: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            n_papers: 1000,
            first_year: 1990,
            last_year: 2014,
            n_venues: 20,
            attachment_exponent: 1.0,
            planted_quality_fraction: 0.1,
            mean_references: 8.0,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    fn validate(&self) -> Result<()> {
        if self.n_papers == 0 {
            return Err(Error::invalid("n_papers must be at least 1"));
        }
        if self.first_year <= 0 || self.last_year < self.first_year {
            return Err(Error::invalid(format!(
                "year range {}..={} is empty or non-positive",
                self.first_year, self.last_year
            )));
        }
        if self.n_venues == 0 {
            return Err(Error::invalid("n_venues must be at least 1"));
        }
        if !self.attachment_exponent.is_finite() || self.attachment_exponent < 0.0 {
            return Err(Error::invalid("attachment_exponent must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.planted_quality_fraction) {
            return Err(Error::invalid("planted_quality_fraction must lie in [0, 1]"));
        }
        if !self.mean_references.is_finite() || self.mean_references < 0.0 {
            return Err(Error::invalid("mean_references must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Hidden per-paper quality used to bias attachment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentQuality {
    pub id: String,
    pub quality: f64,
    pub planted: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub latents: Vec<LatentQuality>,
}

/// Generates a citation corpus by quality-biased preferential attachment.
///
/// Publication years are spread evenly over the range. Every paper draws a
/// Poisson number of references among papers of strictly earlier years, with
/// weight `quality * (citations + 1)^exponent * exp(-age / 4)`; citation counts
/// are frozen at the start of each year. Quality is log-normal, and a planted
/// fraction of papers gets its log-quality shifted up.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<SyntheticCorpus> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_papers;
    let span = (params.last_year - params.first_year + 1) as usize;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let years: Vec<i32> = (0..n).map(|i| params.first_year + (i * span / n) as i32).collect();
    let mut latents = Vec::with_capacity(n);
    let mut venues = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);
    for i in 0..n {
        let planted = rng.random_bool(params.planted_quality_fraction);
        let z: f64 = normal.sample(&mut rng);
        let log_q = QUALITY_SIGMA * z + if planted { PLANTED_SHIFT } else { 0.0 };
        latents.push(LatentQuality {
            id: paper_id(i),
            quality: log_q.exp(),
            planted,
        });
        venues.push(format!("V{:03}", rng.random_range(0..params.n_venues)));
        tags.push(if rng.random_bool(0.5) { "STEM" } else { "SocialScience" });
    }

    let poisson = if params.mean_references > 0.0 {
        Some(Poisson::new(params.mean_references).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };

    let mut citations = vec![0u32; n];
    let mut references: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut start = 0;
    while start < n {
        let year = years[start];
        let end = start + years[start..].iter().take_while(|&&y| y == year).count();
        // Candidates are exactly the papers of earlier years: indices 0..start.
        if start > 0 {
            if let Some(poisson) = &poisson {
                let weights: Vec<f64> = (0..start)
                    .map(|j| {
                        let age = (year - years[j]) as f64;
                        latents[j].quality
                            * (citations[j] as f64 + 1.0).powf(params.attachment_exponent)
                            * (-age / AGING_YEARS).exp()
                    })
                    .collect();
                let sampler = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
                for refs in references.iter_mut().take(end).skip(start) {
                    let k = (poisson.sample(&mut rng) as usize).min(start);
                    let mut chosen = std::collections::BTreeSet::new();
                    let mut attempts = 0;
                    while chosen.len() < k && attempts < 50 * (k + 1) {
                        chosen.insert(sampler.sample(&mut rng));
                        attempts += 1;
                    }
                    refs.extend(chosen);
                }
            }
        }
        for refs in &references[start..end] {
            for &j in refs {
                citations[j] += 1;
            }
        }
        start = end;
    }

    let papers = (0..n)
        .map(|i| PaperRecord {
            id: paper_id(i),
            year: years[i],
            venue: venues[i].clone(),
            references: references[i].iter().map(|&j| paper_id(j)).collect(),
            domain_tag: Some(tags[i].to_string()),
        })
        .collect();
    Ok(SyntheticCorpus {
        corpus: Corpus::new(papers, "synthetic")?,
        latents,
    })
}

fn paper_id(i: usize) -> String {
    format!("P{i:06}")
}

/// Sidecar CSV: `id,quality,planted`.
pub fn write_latents<W: Write>(latents: &[LatentQuality], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "quality", "planted"])?;
    for l in latents {
        w.write_record([l.id.as_str(), &l.quality.to_string(), if l.planted { "true" } else { "false" }])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_canonical;

    fn params(n: usize, seed: u64) -> SyntheticParams {
        SyntheticParams {
            n_papers: n,
            seed,
            ..Default::default()
        }
    }

    fn bytes(c: &Corpus) -> Vec<u8> {
        let mut buf = Vec::new();
        write_canonical(c, &mut buf).unwrap();
        buf
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic(&params(300, 42)).unwrap();
        let b = generate_synthetic(&params(300, 42)).unwrap();
        assert_eq!(bytes(&a.corpus), bytes(&b.corpus));
        assert_eq!(a.latents, b.latents);
        let c = generate_synthetic(&params(300, 43)).unwrap();
        assert_ne!(bytes(&a.corpus), bytes(&c.corpus));
    }

    #[test]
    fn exact_size() {
        let s = generate_synthetic(&params(100, 1)).unwrap();
        assert_eq!(s.corpus.len(), 100);
        assert_eq!(s.latents.len(), 100);
    }

    #[test]
    fn edges_point_strictly_backwards_in_time() {
        let s = generate_synthetic(&params(800, 7)).unwrap();
        let c = &s.corpus;
        let mut edges = 0;
        for p in c.papers() {
            for r in &p.references {
                let cited = c.get(r).expect("generator never dangles");
                assert!(p.year > cited.year, "{} ({}) -> {} ({})", p.id, p.year, cited.id, cited.year);
                edges += 1;
            }
        }
        assert!(edges > 1000);
    }

    #[test]
    fn quality_biases_citations() {
        let s = generate_synthetic(&params(2000, 3)).unwrap();
        let c = &s.corpus;
        let mut counts = vec![0usize; c.len()];
        for p in c.papers() {
            for r in &p.references {
                counts[c.position(r).unwrap()] += 1;
            }
        }
        // Compare planted vs. non-planted papers published in the first half.
        let half = c.len() / 2;
        let mean = |planted: bool| {
            let v: Vec<f64> = (0..half)
                .filter(|&i| s.latents[i].planted == planted)
                .map(|i| counts[i] as f64)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) > 2.0 * mean(false));
    }

    #[test]
    fn invalid_params() {
        assert!(generate_synthetic(&params(0, 1)).is_err());
        let mut p = params(10, 1);
        p.last_year = p.first_year - 1;
        assert!(generate_synthetic(&p).is_err());
        let mut p = params(10, 1);
        p.planted_quality_fraction = 1.5;
        assert!(generate_synthetic(&p).is_err());
    }

    #[test]
    fn latents_csv() {
        let s = generate_synthetic(&params(3, 1)).unwrap();
        let mut buf = Vec::new();
        write_latents(&s.latents, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("id,quality,planted\nP000000,"));
    }
}
