//! Natural language to GraphQL: schema filtering, exemplar selection,
//! prompt assembly and a validate-and-retry generation loop.

mod exemplars;
mod filter;
mod prompt;
mod translate;

pub use exemplars::{jaccard, load_bank, rank_exemplars, select_exemplars, shipped_bank, exemplar_score, BankError, Exemplar};
pub use filter::{endpoint_keywords, endpoint_scores, filter_schema, filter_schema_with_llm, token_set, tokenize, SchemaSubset};
pub use prompt::{build_prompt, PromptBundle, PromptError, PROMPT_BYTE_LIMIT, TASK_RULES};
pub use translate::{
    extract_query, feedback_message, translate, Attempt, TranslateError, TranslateOptions, TranslationResult,
    DEFAULT_EXEMPLARS, DEFAULT_MAX_ATTEMPTS,
};
