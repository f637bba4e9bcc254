use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, RelationDocument};

/// Train/dev/test partition with pairwise-disjoint document ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitSpec {
    pub train: Vec<RelationDocument>,
    pub dev: Vec<RelationDocument>,
    pub test: Vec<RelationDocument>,
}

impl SplitSpec {
    pub fn new(
        train: Vec<RelationDocument>,
        dev: Vec<RelationDocument>,
        test: Vec<RelationDocument>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for doc in train.iter().chain(&dev).chain(&test) {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(SplitSpec { train, dev, test })
    }
}

/// Random document-level split. Fractions apply to dev and test; the
/// remainder is train.
pub fn split_documents(
    docs: Vec<RelationDocument>,
    dev_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitSpec, CorpusError> {
    if !(0.0..1.0).contains(&dev_fraction)
        || !(0.0..1.0).contains(&test_fraction)
        || dev_fraction + test_fraction >= 1.0
    {
        return Err(CorpusError::Config(format!(
            "dev fraction {dev_fraction} and test fraction {test_fraction} must be in [0,1) with sum < 1"
        )));
    }
    let mut docs = docs;
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = docs.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    let n_dev = (n as f64 * dev_fraction).round() as usize;
    let test = docs.split_off(n - n_test);
    let dev = docs.split_off(n - n_test - n_dev);
    SplitSpec::new(docs, dev, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutSplit {
    /// Documents whose triples may be used for KGE training.
    pub kge_train: Vec<RelationDocument>,
    /// Documents whose (head, tail) pair never occurs in `kge_train`.
    pub re_test: Vec<RelationDocument>,
    pub heldout_pairs: BTreeSet<(String, String)>,
}

/// Holds out a fraction of the distinct (head, tail) entity pairs: every
/// document of a held-out pair goes to `re_test`, all others to
/// `kge_train`.
pub fn make_heldout_relation_split(
    docs: &[RelationDocument],
    holdout_fraction: f64,
    seed: u64,
) -> Result<HeldoutSplit, CorpusError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(CorpusError::Config(format!(
            "holdout fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let pairs: BTreeSet<(String, String)> = docs.iter().map(RelationDocument::pair_key).collect();
    if pairs.len() < 2 {
        return Err(CorpusError::DegenerateSplit(format!(
            "{} distinct entity pair(s); need at least 2 to keep both sides nonempty",
            pairs.len()
        )));
    }
    let mut order: Vec<(String, String)> = pairs.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_held =
        ((order.len() as f64 * holdout_fraction).round() as usize).clamp(1, order.len() - 1);
    let heldout_pairs: BTreeSet<(String, String)> = order.into_iter().take(n_held).collect();

    let (re_test, kge_train) = docs
        .iter()
        .cloned()
        .partition(|d| heldout_pairs.contains(&d.pair_key()));
    Ok(HeldoutSplit {
        kge_train,
        re_test,
        heldout_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn pair_doc(id: usize, h: usize, t: usize) -> RelationDocument {
        let text = format!("h{h} and t{t}");
        let h_len = format!("h{h}").len();
        let t_start = h_len + 5;
        RelationDocument::new(
            format!("d{id}"),
            text.clone(),
            Span::new(0, h_len),
            Span::new(t_start, text.len()),
            "r",
        )
        .unwrap()
    }

    #[test]
    fn fraction_must_be_open_interval() {
        let docs = vec![pair_doc(0, 0, 1), pair_doc(1, 1, 2)];
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                make_heldout_relation_split(&docs, f, 1),
                Err(CorpusError::Config(_))
            ));
        }
    }

    #[test]
    fn single_pair_is_degenerate() {
        let docs: Vec<_> = (0..5).map(|i| pair_doc(i, 1, 2)).collect();
        assert!(matches!(
            make_heldout_relation_split(&docs, 0.5, 1),
            Err(CorpusError::DegenerateSplit(_))
        ));
    }

    #[test]
    fn disjoint_pairs_and_deterministic() {
        let docs: Vec<_> = (0..100).map(|i| pair_doc(i, i, i + 1)).collect();
        let a = make_heldout_relation_split(&docs, 0.2, 7).unwrap();
        let b = make_heldout_relation_split(&docs, 0.2, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.heldout_pairs.len(), 20);
        assert_eq!(a.re_test.len(), 20);
        let train_pairs: HashSet<_> = a.kge_train.iter().map(|d| d.pair_key()).collect();
        let test_pairs: HashSet<_> = a.re_test.iter().map(|d| d.pair_key()).collect();
        assert!(train_pairs.is_disjoint(&test_pairs));
    }

    #[test]
    fn document_split_ids_disjoint() {
        let docs: Vec<_> = (0..50).map(|i| pair_doc(i, i, i + 1)).collect();
        let s = split_documents(docs, 0.1, 0.2, 3).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (35, 5, 10));
    }

    #[test]
    fn split_spec_rejects_shared_ids() {
        let d = pair_doc(0, 0, 1);
        assert!(SplitSpec::new(vec![d.clone()], vec![], vec![d]).is_err());
    }
}
