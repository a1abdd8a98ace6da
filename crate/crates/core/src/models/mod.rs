//! The token taggers and the utterance-level intent architectures:
//! hybrid (tagger + term-frequency rules), separate (seq2one), joint
//! (BOU/EOU-wrapped seq2seq) and hierarchical (taggers feeding a reduced
//! sequence to a second stage).

mod encoder;
mod hierarchical;
mod hybrid;
mod joint;
mod seq2one;
mod system;
mod tagger;
mod train;

pub use encoder::{Encoder, Linear};
pub use hierarchical::{hierarchical_reduce, HierarchicalPipeline, HierarchicalPrediction, Stage2, Stage2Kind};
pub use hybrid::{build_freq_table, hybrid_decide, hybrid_map, hybrid_ranking, FreqTable, HybridMode, HybridPipeline, HybridPrediction};
pub use joint::{decode_intent, train_joint, JointModel, JointPrediction, JOINT_LABELS};
pub use seq2one::{train_seq2one, IntentModel, IntentPrediction};
pub use system::{ModelSpec, Prediction, System};
pub use tagger::{train_tagger, TagOutput, TaggerModel, TaggerTask};
pub use train::{FitSummary, TrainConfig};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
