//! Deterministic test corpus of partition instances with known answers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::PartitionInstance;
use crate::oracles::brute_force_partition;

/// A multiset together with its exhaustively verified answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub instance: PartitionInstance,
    /// True when some split into two equal-sum halves exists.
    pub balanced: bool,
}

/// Corpus size.
pub const CORPUS_SIZE: usize = 200;
/// Cap per answer class, so both classes get at least 80 entries.
const CLASS_CAP: usize = 120;

/// Draws a multiset of `m` elements uniformly from `lo..=hi`.
pub fn random_multiset(m: usize, lo: i64, hi: i64, rng: &mut ChaCha8Rng) -> PartitionInstance {
    let elements = (0..m).map(|_| rng.gen_range(lo..=hi)).collect();
    PartitionInstance::new(elements).expect("m > 0")
}

/// The fixed evaluation corpus: 200 multisets with between 2 and 12 elements
/// drawn from `[0, 50]`, each labeled by exhaustive search, with at least 80
/// positive and 80 negative entries. Deterministic across runs.
pub fn standard_corpus() -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x00c0_ffee);
    let mut out = Vec::with_capacity(CORPUS_SIZE);
    let mut yes = 0usize;
    let mut no = 0usize;
    while out.len() < CORPUS_SIZE {
        let m = rng.gen_range(2..=12usize);
        let instance = random_multiset(m, 0, 50, &mut rng);
        let balanced = brute_force_partition(&instance)
            .expect("corpus sizes are within the exhaustive cap")
            .is_some();
        let count = if balanced { &mut yes } else { &mut no };
        if *count == CLASS_CAP {
            continue;
        }
        *count += 1;
        out.push(CorpusEntry { instance, balanced });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_balanced_and_in_range() {
        let corpus = standard_corpus();
        assert_eq!(corpus.len(), CORPUS_SIZE);
        let yes = corpus.iter().filter(|e| e.balanced).count();
        let no = corpus.len() - yes;
        assert!(yes >= 80, "only {yes} positive entries");
        assert!(no >= 80, "only {no} negative entries");
        for e in &corpus {
            let m = e.instance.len();
            assert!((2..=12).contains(&m));
            assert!(e.instance.elements().iter().all(|&a| (0..=50).contains(&a)));
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(standard_corpus(), standard_corpus());
    }
}
