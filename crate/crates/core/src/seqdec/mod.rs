//! Method-name prediction: the trace encoder feeds an attention decoder
//! that emits sub-words, scored with order-free sub-token P/R/F1.

mod metric;
mod model;

pub use metric::{matched_subwords, split_subwords, subtoken_prf, subtoken_prf_words, Prf, SubtokenCounts};
pub use model::{
    predict_names, score_predictions, train_namer, write_predictions_tsv, Decoded, DecoderParams, NameModel, NameVocab, NamedProgram, Prediction, MAX_NAME_LEN,
    NAME_BEGIN, NAME_END, NAME_UNK,
};
