//! Question-side helpers: comparative-phrase unification and value filling.

mod unify;
mod values;

pub use unify::{unify_question, LexiconError, Placeholder, UnifyLexicon, UnifyRule, LEXICON_ENV};
pub use values::{
    extract_values, fill_values, CellIndex, ExtractOptions, FillError, Literal, ValueCandidate, ValueSource,
};

#[cfg(test)]
mod tests;
