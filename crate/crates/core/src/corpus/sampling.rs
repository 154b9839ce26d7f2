use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Corpus;
use crate::{Error, Result};

/// Per-bin sizes of a stratified draw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    pub population: usize,
    pub bin_sizes: Vec<usize>,
    pub drawn: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Citations each paper has received from corpus papers published in or
/// before `reference_year`. Dangling references are ignored.
pub fn cumulative_citations(corpus: &Corpus, reference_year: i32) -> Vec<usize> {
    let mut counts = vec![0usize; corpus.len()];
    for p in corpus.papers().iter().filter(|p| p.year <= reference_year) {
        for r in &p.references {
            if let Some(j) = corpus.position(r) {
                counts[j] += 1;
            }
        }
    }
    counts
}

/// Splits `total` across groups in proportion to their sizes so that the
/// cumulative allocation tracks `cumsum * total / sum` rounded half-up.
pub(crate) fn proportional_allocation(sizes: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = sizes.iter().sum();
    if sum == 0 {
        return vec![0; sizes.len()];
    }
    let mut out = Vec::with_capacity(sizes.len());
    let mut cum = 0usize;
    let mut prev = 0usize;
    for &s in sizes {
        cum += s;
        let target = (2 * cum * total + sum) / (2 * sum);
        out.push(target - prev);
        prev = target;
    }
    out
}

/// Draws about `n_target` papers stratified by cumulative citation count as of
/// `reference_year`.
///
/// The population is every paper published in or before `reference_year`. It
/// is ranked by citation count (ties keep corpus order) and cut into `n_bins`
/// equal-population bins; each bin contributes in proportion to its size,
/// drawn uniformly without replacement. The sample keeps corpus order.
pub fn stratified_sample(
    corpus: &Corpus,
    n_target: usize,
    n_bins: usize,
    reference_year: i32,
    seed: u64,
) -> Result<(Corpus, SampleReport)> {
    if n_bins == 0 {
        return Err(Error::invalid("n_bins must be at least 1"));
    }
    let (lo, hi) = corpus
        .year_span()
        .ok_or_else(|| Error::degenerate("cannot sample from an empty corpus"))?;
    if reference_year < lo || reference_year > hi {
        return Err(Error::invalid(format!(
            "reference year {reference_year} outside corpus years {lo}..={hi}"
        )));
    }
    let counts = cumulative_citations(corpus, reference_year);
    let mut population: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus.papers()[i].year <= reference_year)
        .collect();
    if n_target > population.len() {
        return Err(Error::invalid(format!(
            "n_target {n_target} exceeds the {} papers published by {reference_year}",
            population.len()
        )));
    }
    population.sort_by_key(|&i| (counts[i], i));

    let n = population.len();
    let bins: Vec<&[usize]> = (0..n_bins)
        .map(|b| &population[b * n / n_bins..(b + 1) * n / n_bins])
        .collect();
    let bin_sizes: Vec<usize> = bins.iter().map(|b| b.len()).collect();
    let mut warnings = Vec::new();
    let empty = bin_sizes.iter().filter(|&&s| s == 0).count();
    if empty > 0 {
        warnings.push(format!(
            "{empty} of {n_bins} bins are empty; their share was redistributed"
        ));
        log::warn!("stratified_sample: {empty} empty bins redistributed");
    }
    let drawn = proportional_allocation(&bin_sizes, n_target);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(n_target);
    for (bin, &k) in bins.iter().zip(&drawn) {
        let picks = rand::seq::index::sample(&mut rng, bin.len(), k);
        chosen.extend(picks.into_iter().map(|i| bin[i]));
    }
    chosen.sort_unstable();
    let sample = corpus.select(&chosen)?;
    Ok((
        sample,
        SampleReport {
            population: n,
            bin_sizes,
            drawn,
            warnings,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PaperRecord;

    fn flat_corpus(n: usize) -> Corpus {
        let papers = (0..n).map(|i| PaperRecord::new(format!("p{i}"), 2000, "", vec![])).collect();
        Corpus::new(papers, "t").unwrap()
    }

    #[test]
    fn allocation_sums_and_tracks_proportions() {
        let sizes = [5, 5, 5, 5];
        assert_eq!(proportional_allocation(&sizes, 10).iter().sum::<usize>(), 10);
        let a = proportional_allocation(&[3, 7, 10], 7);
        assert_eq!(a.iter().sum::<usize>(), 7);
        for (s, k) in [3usize, 7, 10].iter().zip(&a) {
            let exact = *s as f64 * 7.0 / 20.0;
            assert!((*k as f64 - exact).abs() <= 1.0);
        }
    }

    #[test]
    fn single_bin_is_uniform_sample() {
        let c = flat_corpus(50);
        let (s, r) = stratified_sample(&c, 12, 1, 2000, 5).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(r.bin_sizes, vec![50]);
    }

    #[test]
    fn equal_citations_quantile_bins() {
        // 20 papers, all uncited: rank bins are 5/5/5/5 and 10 are drawn as 3/2/3/2 or similar.
        let c = flat_corpus(20);
        let (s, r) = stratified_sample(&c, 10, 4, 2000, 9).unwrap();
        assert_eq!(r.bin_sizes, vec![5, 5, 5, 5]);
        assert_eq!(s.len(), 10);
        for &d in &r.drawn {
            assert!((d as f64 - 2.5).abs() <= 1.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let c = flat_corpus(40);
        let (a, _) = stratified_sample(&c, 15, 3, 2000, 77).unwrap();
        let (b, _) = stratified_sample(&c, 15, 3, 2000, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_requested() {
        let c = flat_corpus(5);
        assert!(stratified_sample(&c, 6, 2, 2000, 1).is_err());
        assert!(stratified_sample(&c, 2, 2, 1990, 1).is_err());
    }

    #[test]
    fn empty_bins_warn() {
        let c = flat_corpus(3);
        let (s, r) = stratified_sample(&c, 3, 5, 2000, 1).unwrap();
        assert_eq!(s.len(), 3);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn bins_follow_citation_rank() {
        // a is cited by everyone, so it lands in the top bin.
        let mut papers = vec![PaperRecord::new("a", 2000, "", vec![])];
        for i in 0..7 {
            papers.push(PaperRecord::new(format!("c{i}"), 2001, "", vec!["a".into()]));
        }
        let c = Corpus::new(papers, "t").unwrap();
        let counts = cumulative_citations(&c, 2001);
        assert_eq!(counts[0], 7);
        assert_eq!(cumulative_citations(&c, 2000)[0], 0);
        // One bin per paper: every paper is drawn.
        let (s, r) = stratified_sample(&c, 8, 8, 2001, 3).unwrap();
        assert_eq!(r.drawn, vec![1; 8]);
        assert!(s.contains("a"));
    }
}
