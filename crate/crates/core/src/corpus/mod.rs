//! Ingestion, preprocessing and the leave-one-out split.

mod embeddings;
mod interactions;
mod sequences;
mod split;

pub use embeddings::{
    align_to_vocab, decode_binary, encode_binary, load_embeddings, read_binary,
    read_embedding_file, read_text, write_binary, write_text, AlignOptions, AlignReport,
    EmbeddingFormat, EmbeddingMatrix, RawEmbeddings, SRAE_MAGIC, SRAE_VERSION,
};
pub use interactions::{load_interactions, read_interactions, Column, Interaction, InteractionLog, LogFormat};
pub use sequences::{build_sequences, ItemIndex, Preprocess, SequenceDataset, UserSequence, Vocab};
pub use split::{split_leave_one_out, SplitDataset, SplitUser};
