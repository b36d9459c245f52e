use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::dataset::{DomainDataset, MultiViewSample};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// One step's worth of data: `n_b` labelled source samples and `n_b`
/// unlabelled target samples.
#[derive(Debug, Clone)]
pub struct PairedBatch<'a> {
    pub source: Vec<&'a MultiViewSample>,
    pub source_indices: Vec<usize>,
    pub target: Vec<&'a MultiViewSample>,
    pub target_indices: Vec<usize>,
}

impl PairedBatch<'_> {
    pub fn source_labels(&self) -> Vec<usize> {
        self.source
            .iter()
            .map(|s| s.label().expect("source samples are labelled"))
            .collect()
    }
}

/// Hands out dataset indices in shuffled order, reshuffling whenever the
/// current permutation is exhausted.
#[derive(Debug)]
struct CyclingSampler {
    order: Vec<usize>,
    pos: usize,
}

impl CyclingSampler {
    fn new(len: usize) -> Self {
        CyclingSampler {
            order: (0..len).collect(),
            pos: len,
        }
    }

    fn restart(&mut self, rng: &mut ChaCha8Rng) {
        self.order.shuffle(rng);
        self.pos = 0;
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.pos == self.order.len() {
            self.restart(rng);
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Paired source/target batch loader.
///
/// An epoch has `ceil(max(N_s, N_t) / n_b)` batches. Both datasets are
/// reshuffled at the start of each epoch; whichever runs out first restarts
/// with a fresh permutation.
#[derive(Debug)]
pub struct PairedLoader<'a> {
    source: &'a DomainDataset,
    target: &'a DomainDataset,
    batch_size: usize,
    source_rng: ChaCha8Rng,
    target_rng: ChaCha8Rng,
    source_sampler: CyclingSampler,
    target_sampler: CyclingSampler,
}

pub fn make_paired_loader<'a>(
    source: &'a DomainDataset,
    target: &'a DomainDataset,
    batch_size: usize,
    seed: u64,
) -> Result<PairedLoader<'a>> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Empty("paired loader needs non-empty datasets".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let base = substream(seed, Stream::Shuffle);
    let mut source_rng = base.clone();
    let mut target_rng = base;
    source_rng.set_stream(source_rng.get_stream() ^ 0x5);
    target_rng.set_stream(target_rng.get_stream() ^ 0x7);
    Ok(PairedLoader {
        source,
        target,
        batch_size,
        source_rng,
        target_rng,
        source_sampler: CyclingSampler::new(source.len()),
        target_sampler: CyclingSampler::new(target.len()),
    })
}

impl<'a> PairedLoader<'a> {
    pub fn batches_per_epoch(&self) -> usize {
        self.source.len().max(self.target.len()).div_ceil(self.batch_size)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Draws the full batch list of the next epoch.
    pub fn next_epoch(&mut self) -> Vec<PairedBatch<'a>> {
        self.source_sampler.restart(&mut self.source_rng);
        self.target_sampler.restart(&mut self.target_rng);
        (0..self.batches_per_epoch())
            .map(|_| {
                let source_indices: Vec<usize> = (0..self.batch_size)
                    .map(|_| self.source_sampler.next(&mut self.source_rng))
                    .collect();
                let target_indices: Vec<usize> = (0..self.batch_size)
                    .map(|_| self.target_sampler.next(&mut self.target_rng))
                    .collect();
                PairedBatch {
                    source: source_indices
                        .iter()
                        .map(|&i| &self.source.samples()[i])
                        .collect(),
                    target: target_indices
                        .iter()
                        .map(|&i| &self.target.samples()[i])
                        .collect(),
                    source_indices,
                    target_indices,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{Domain, Image};

    fn dataset(n: usize, domain: Domain) -> DomainDataset {
        let samples = (0..n)
            .map(|i| {
                let label = match domain {
                    Domain::Source => Some(i % 2),
                    Domain::Target => None,
                };
                MultiViewSample::new(vec![Image::zeros(1, 1, 1)], label, domain).unwrap()
            })
            .collect();
        DomainDataset::new(samples, 2, domain, None).unwrap()
    }

    #[test]
    fn unequal_sizes_cycle_the_shorter_domain() {
        let s = dataset(10, Domain::Source);
        let t = dataset(4, Domain::Target);
        let mut loader = make_paired_loader(&s, &t, 2, 3).unwrap();
        let batches = loader.next_epoch();
        assert_eq!(batches.len(), 5);
        let mut src: Vec<usize> = batches.iter().flat_map(|b| b.source_indices.clone()).collect();
        src.sort_unstable();
        assert_eq!(src, (0..10).collect::<Vec<_>>());
        let tgt: Vec<usize> = batches.iter().flat_map(|b| b.target_indices.clone()).collect();
        assert_eq!(tgt.len(), 10);
        // first 4 and next 4 are each complete permutations of the target set
        for chunk in [&tgt[0..4], &tgt[4..8]] {
            let mut c = chunk.to_vec();
            c.sort_unstable();
            assert_eq!(c, vec![0, 1, 2, 3]);
        }
        for b in &batches {
            assert_eq!(b.source.len(), 2);
            assert_eq!(b.target.len(), 2);
        }
    }

    #[test]
    fn equal_sizes_and_batch_give_one_batch() {
        let s = dataset(6, Domain::Source);
        let t = dataset(6, Domain::Target);
        let mut loader = make_paired_loader(&s, &t, 6, 0).unwrap();
        let batches = loader.next_epoch();
        assert_eq!(batches.len(), 1);
        let mut idx = batches[0].target_indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn seeded_loader_is_deterministic() {
        let s = dataset(9, Domain::Source);
        let t = dataset(5, Domain::Target);
        let run = |seed| {
            let mut l = make_paired_loader(&s, &t, 4, seed).unwrap();
            (0..3)
                .flat_map(|_| l.next_epoch())
                .map(|b| (b.source_indices, b.target_indices))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let s = dataset(4, Domain::Source);
        let empty = DomainDataset::new(vec![], 2, Domain::Target, None).unwrap();
        assert!(matches!(make_paired_loader(&s, &empty, 2, 0), Err(Error::Empty(_))));
    }
}
