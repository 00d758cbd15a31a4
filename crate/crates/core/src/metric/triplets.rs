use rand::seq::index::sample;
use rand::Rng;

use super::{ExampleVector, MetricError};

/// Indices into an example slice: anchor, positive (same label, different
/// tweet) and negative (different label).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Samples up to `per_anchor` distinct (positive, negative) pairs for every
/// anchor; `None` enumerates all of them.
pub fn sample_triplets<R: Rng>(
    examples: &[ExampleVector],
    per_anchor: Option<usize>,
    rng: &mut R,
) -> Result<Vec<Triplet>, MetricError> {
    let mut labels: Vec<_> = examples.iter().map(|e| e.label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(MetricError::SingleClass);
    }

    let mut out = Vec::new();
    let mut lonely = 0usize;
    for (ai, anchor) in examples.iter().enumerate() {
        let positives: Vec<usize> = examples
            .iter()
            .enumerate()
            .filter(|(i, e)| *i != ai && e.label == anchor.label && e.tweet_id != anchor.tweet_id)
            .map(|(i, _)| i)
            .collect();
        let negatives: Vec<usize> = examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label != anchor.label)
            .map(|(i, _)| i)
            .collect();
        if positives.is_empty() {
            lonely += 1;
            continue;
        }
        let total = positives.len() * negatives.len();
        let push = |out: &mut Vec<Triplet>, k: usize| {
            out.push(Triplet {
                anchor: ai,
                positive: positives[k / negatives.len()],
                negative: negatives[k % negatives.len()],
            })
        };
        match per_anchor {
            Some(k) if k < total => {
                let mut picked = sample(rng, total, k).into_vec();
                picked.sort_unstable();
                for idx in picked {
                    push(&mut out, idx);
                }
            }
            _ => (0..total).for_each(|idx| push(&mut out, idx)),
        }
    }
    if lonely > 0 {
        log::warn!("{lonely} anchor(s) have no same-label partner and yield no triplets");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RelationLabel::{self, *};
    use crate::embedding::EmbeddingVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ex(id: &str, label: RelationLabel) -> ExampleVector {
        ExampleVector {
            tweet_id: id.into(),
            input: EmbeddingVector::new(vec![1.0]).unwrap(),
            label,
        }
    }

    #[test]
    fn reason_effect_triplet_is_enumerated() {
        let examples = vec![
            ex("whole world emotionally depressed everybody need smoke blunt relax", Reason),
            ex("Depressionarmy weed amp sleep I awake I depressed", Reason),
            ex("This weird rant like weed makes anxiety depression worse", Effect),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = sample_triplets(&examples, None, &mut rng).unwrap();
        assert!(t.contains(&Triplet { anchor: 0, positive: 1, negative: 2 }));
    }

    #[test]
    fn exhaustive_count() {
        let examples = vec![ex("r1", Reason), ex("r2", Reason), ex("e1", Effect)];
        let t = sample_triplets(&examples, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|t| t.negative == 2));
    }

    #[test]
    fn single_class_is_an_error() {
        let examples = vec![ex("a", Reason), ex("b", Reason)];
        assert!(matches!(
            sample_triplets(&examples, Some(4), &mut ChaCha8Rng::seed_from_u64(0)),
            Err(MetricError::SingleClass)
        ));
    }

    #[test]
    fn sampled_triplets_are_valid_and_capped() {
        let labels = [Reason, Effect, Addiction];
        let examples: Vec<_> = (0..30).map(|i| ex(&format!("t{i}"), labels[i % 3])).collect();
        let t = sample_triplets(&examples, Some(4), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t.len(), 30 * 4);
        for tr in &t {
            let (a, p, n) = (&examples[tr.anchor], &examples[tr.positive], &examples[tr.negative]);
            assert_eq!(a.label, p.label);
            assert_ne!(a.label, n.label);
            assert_ne!(a.tweet_id, p.tweet_id);
        }
        let again = sample_triplets(&examples, Some(4), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(t, again);
    }
}
