//! Character language models and text/speech embedding providers.

pub mod alphabet;
pub mod embed;
pub mod model;

pub use alphabet::{detokenize, tokenize, TokenSequence, VOCAB_SIZE};
pub use embed::{
    check_coverage, export_embeddings, import_embeddings, transcript_hash, write_elem,
    EmbeddingEntry, EmbeddingProvider, EmbeddingTable, ToyLm,
};
pub use model::{ntp_loss, LmConfig, LmMode, LmModel, LmStates};
