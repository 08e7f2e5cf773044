//! Caption rewriting through a chat-completion endpoint.
//!
//! Each caption is sent as the user message under a fixed system prompt.
//! Replies are validated, cached on disk by request fingerprint, and retried
//! with exponential backoff; a caption whose requests all fail keeps its
//! original text so every image retains its full caption list.

mod cache;
mod correct;
mod paraphrase;
mod transport;

use serde::{Deserialize, Serialize};

pub use cache::{fingerprint, CacheEntry, ResponseCache};
pub use correct::{
    correct_caption, correct_corpus, validate_response, write_records_csv, CorrectionConfig,
    CorrectionRecord, CorrectionStatus, Corrector, RejectReason, Validation,
};
pub use paraphrase::paraphrase;
pub use transport::{
    parse_response, ChatMessage, ChatRequest, ChatTransport, HttpTransport, MockReply,
    MockTransport, TransportError,
};

/// Environment variable holding the API credential for live endpoints.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

pub const GRAMMAR_PROMPT: &str = "You are a helpful assistant that follows instructions extremely well. The following sentence may have several grammatical errors, please respond with a grammatically correct sentence that means the same thing and if possible, is more concise.";

/// Experimental: asks for one long, scene-level caption. The user message must
/// be a textual description of the scene; no image data is ever sent.
pub const DESCRIBE_PROMPT: &str = "You are a helpful assistant that follows instructions extremely well. The following text describes an overhead remote sensing image. Please respond with a single comprehensive caption for the image, starting with a short title followed by a colon.";

/// Example pair used by the default mock transport.
pub const EXAMPLE_ORIGINAL: &str = "many planes are parked next to a long building in an airport .";
pub const EXAMPLE_CORRECTED: &str =
    "Several planes are parked alongside a lengthy building at the airport.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    GrammarCorrect,
    FullDescribe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_text: String,
    pub mode: PromptMode,
}

impl PromptTemplate {
    pub fn new(mode: PromptMode) -> Self {
        let system_text = match mode {
            PromptMode::GrammarCorrect => GRAMMAR_PROMPT,
            PromptMode::FullDescribe => DESCRIBE_PROMPT,
        };
        PromptTemplate {
            system_text: system_text.to_string(),
            mode,
        }
    }

    pub fn grammar_correct() -> Self {
        Self::new(PromptMode::GrammarCorrect)
    }

    pub fn full_describe() -> Self {
        Self::new(PromptMode::FullDescribe)
    }

    pub fn request(&self, user_text: &str, model: &str, temperature: f64) -> ChatRequest {
        ChatRequest {
            model: model.to_string(),
            temperature,
            messages: vec![
                ChatMessage::system(self.system_text.clone()),
                ChatMessage::user(user_text),
            ],
        }
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::grammar_correct()
    }
}

/// Transport that answers like the default hermetic pipeline: the example
/// pair from the fixture table, rule-based paraphrases for everything else.
pub fn default_mock() -> MockTransport {
    MockTransport::paraphrasing().with_fixture(EXAMPLE_ORIGINAL, EXAMPLE_CORRECTED)
}
