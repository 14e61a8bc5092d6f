//! Normalization and tokenization for short noisy messages.
//!
//! The normalizer is deliberately blunt: lowercase everything, split on
//! Unicode whitespace, and strip ASCII punctuation. Two classes of tokens
//! carry meaning in their punctuation and are treated specially:
//!
//! * a token-initial `@` (user mention) or `#` (hashtag) is preserved;
//! * any token beginning with `http` is passed through verbatim apart from
//!   lowercasing, so URLs survive intact.
//!
//! Apostrophes and hyphens are removed without splitting the token
//! (`don't` becomes `dont`, `well-known` becomes `wellknown`). Tokens that
//! become empty are dropped. The transform is idempotent: running it over
//! its own re-joined output reproduces the same token sequence.

/// A normalized token and its index in the token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub position: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, position: usize) -> Self {
        Token { surface: surface.into(), position }
    }
}

/// Normalize `text` and split it into tokens.
pub fn normalize_tokenize(text: &str) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::new();
    for raw in text.split_whitespace() {
        let lowered = raw.to_lowercase();
        let surface = if lowered.starts_with("http") {
            lowered
        } else {
            strip_ascii_punctuation(&lowered)
        };
        if !surface.is_empty() {
            let position = out.len();
            out.push(Token { surface, position });
        }
    }
    out
}

/// Convenience view of the surfaces of a token slice.
pub fn surfaces(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.surface.clone()).collect()
}

fn strip_ascii_punctuation(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for (i, ch) in token.chars().enumerate() {
        if ch.is_ascii_punctuation() {
            if i == 0 && (ch == '@' || ch == '#') {
                out.push(ch);
            }
        } else {
            out.push(ch);
        }
    }
    out
}
