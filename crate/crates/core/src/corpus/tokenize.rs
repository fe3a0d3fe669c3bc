//! Message tokenizer with a closed emoticon inventory.
//!
//! Tokenization happens per whitespace-delimited chunk. Inside a chunk,
//! emoticons are recognized first (longest inventory entry wins), then the
//! remaining characters are split into word, number and punctuation tokens.
//! Apostrophes and hyphens stay inside a word only when both neighbours are
//! alphanumeric, so `don't` and `well-known` are single words while the
//! trailing `!` of `sick!` is its own token.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Emoticon,
    Punctuation,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    fn new(surface: impl Into<String>, kind: TokenKind) -> Self {
        Self {
            surface: surface.into(),
            kind,
        }
    }

    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emoticon {
    pub surface: String,
    pub polarity: Polarity,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InventoryError {
    #[error("emoticon inventory is empty")]
    Empty,
    #[error("emoticon {0:?} is empty or contains whitespace")]
    BadSurface(String),
    #[error("emoticon {0:?} listed twice")]
    Duplicate(String),
}

/// Closed set of emoticons recognized by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmoticonInventory {
    /// Entries in configuration order.
    entries: Vec<Emoticon>,
    /// Entries as char vectors, longest first, for greedy matching.
    by_length: Vec<(Vec<char>, Polarity)>,
}

const DEFAULT_POSITIVE: [&str; 7] = [":)", ":D", ":-)", ";)", ":P", "<3", "xD"];
const DEFAULT_NEGATIVE: [&str; 4] = [":(", ":-(", ":/", ":'("];

impl Default for EmoticonInventory {
    fn default() -> Self {
        let entries = DEFAULT_POSITIVE
            .iter()
            .map(|s| (s, Polarity::Positive))
            .chain(DEFAULT_NEGATIVE.iter().map(|s| (s, Polarity::Negative)))
            .map(|(s, polarity)| Emoticon {
                surface: (*s).to_string(),
                polarity,
            })
            .collect();
        Self::new(entries).expect("default inventory is valid")
    }
}

impl EmoticonInventory {
    pub fn new(entries: Vec<Emoticon>) -> Result<Self, InventoryError> {
        if entries.is_empty() {
            return Err(InventoryError::Empty);
        }
        for (i, e) in entries.iter().enumerate() {
            if e.surface.is_empty() || e.surface.chars().any(char::is_whitespace) {
                return Err(InventoryError::BadSurface(e.surface.clone()));
            }
            if entries[..i].iter().any(|prev| prev.surface == e.surface) {
                return Err(InventoryError::Duplicate(e.surface.clone()));
            }
        }
        let mut by_length: Vec<(Vec<char>, Polarity)> = entries
            .iter()
            .map(|e| (e.surface.chars().collect(), e.polarity))
            .collect();
        // Stable sort keeps configuration order among equal lengths.
        by_length.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        Ok(Self { entries, by_length })
    }

    pub fn entries(&self) -> &[Emoticon] {
        &self.entries
    }

    pub fn polarity(&self, surface: &str) -> Option<Polarity> {
        self.entries
            .iter()
            .find(|e| e.surface == surface)
            .map(|e| e.polarity)
    }

    /// Longest inventory entry starting at `at`, respecting alphanumeric
    /// boundaries for entries that begin or end with a letter or digit
    /// (so `xD` is not found inside `xDrive`).
    fn match_at(&self, chars: &[char], at: usize) -> Option<usize> {
        self.by_length.iter().find_map(|(surface, _)| {
            let end = at + surface.len();
            if end > chars.len() || chars[at..end] != surface[..] {
                return None;
            }
            let first_alnum = surface[0].is_alphanumeric();
            let last_alnum = surface[surface.len() - 1].is_alphanumeric();
            if first_alnum && at > 0 && chars[at - 1].is_alphanumeric() {
                return None;
            }
            if last_alnum && end < chars.len() && chars[end].is_alphanumeric() {
                return None;
            }
            Some(surface.len())
        })
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Splits `text` into tokens. Deterministic and total; empty input gives an
/// empty list.
pub fn tokenize(text: &str, inventory: &EmoticonInventory) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut segment_start = 0;
        let mut i = 0;
        while i < chars.len() {
            match inventory.match_at(&chars, i) {
                Some(len) => {
                    split_segment(&chars[segment_start..i], &mut tokens);
                    tokens.push(Token::new(
                        chars[i..i + len].iter().collect::<String>(),
                        TokenKind::Emoticon,
                    ));
                    i += len;
                    segment_start = i;
                }
                None => i += 1,
            }
        }
        split_segment(&chars[segment_start..], &mut tokens);
    }
    tokens
}

fn split_segment(chars: &[char], out: &mut Vec<Token>) {
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            out.push(Token::new(chars[i].to_string(), TokenKind::Punctuation));
            i += 1;
            continue;
        }
        let start = i;
        loop {
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            if i + 1 < chars.len() && is_joiner(chars[i]) && chars[i + 1].is_alphanumeric() {
                i += 1;
            } else {
                break;
            }
        }
        let run = &chars[start..i];
        let kind = if run.iter().all(char::is_ascii_digit) {
            TokenKind::Number
        } else {
            TokenKind::Word
        };
        out.push(Token::new(run.iter().collect::<String>(), kind));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(String, TokenKind)> {
        tokenize(text, &EmoticonInventory::default())
            .into_iter()
            .map(|t| (t.surface, t.kind))
            .collect()
    }

    fn t(s: &str, k: TokenKind) -> (String, TokenKind) {
        (s.to_string(), k)
    }

    use TokenKind::{Emoticon as Emo, Number, Punctuation, Word};

    #[test]
    fn sad_asthma() {
        assert_eq!(
            kinds("I hate asthma :("),
            vec![
                t("I", Word),
                t("hate", Word),
                t("asthma", Word),
                t(":(", Emo)
            ]
        );
    }

    #[test]
    fn trailing_punctuation_splits() {
        assert_eq!(
            kinds("so sick!!"),
            vec![
                t("so", Word),
                t("sick", Word),
                t("!", Punctuation),
                t("!", Punctuation)
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(kinds("").is_empty());
        assert!(kinds("  \t ").is_empty());
    }

    #[test]
    fn interior_joiners_stay_in_words() {
        assert_eq!(
            kinds("don't well-known -x- it's'"),
            vec![
                t("don't", Word),
                t("well-known", Word),
                t("-", Punctuation),
                t("x", Word),
                t("-", Punctuation),
                t("it's", Word),
                t("'", Punctuation),
            ]
        );
    }

    #[test]
    fn emoticon_glued_to_word() {
        assert_eq!(
            kinds("sick:( ok<3"),
            vec![
                t("sick", Word),
                t(":(", Emo),
                t("ok", Word),
                t("<3", Emo)
            ]
        );
    }

    #[test]
    fn letter_emoticons_need_boundaries() {
        assert_eq!(kinds("xDrive"), vec![t("xDrive", Word)]);
        assert_eq!(kinds("xD"), vec![t("xD", Emo)]);
        assert_eq!(
            kinds(":Done"),
            vec![t(":", Punctuation), t("Done", Word)]
        );
    }

    #[test]
    fn longest_emoticon_wins() {
        assert_eq!(kinds(":-("), vec![t(":-(", Emo)]);
        assert_eq!(kinds(":'("), vec![t(":'(", Emo)]);
    }

    #[test]
    fn numbers_and_mixed() {
        assert_eq!(
            kinds("type 2 3am 1,000"),
            vec![
                t("type", Word),
                t("2", Number),
                t("3am", Word),
                t("1", Number),
                t(",", Punctuation),
                t("000", Number),
            ]
        );
    }

    #[test]
    fn custom_inventory() {
        let inv = EmoticonInventory::new(vec![Emoticon {
            surface: "^_^".into(),
            polarity: Polarity::Positive,
        }])
        .unwrap();
        let toks = tokenize("yay ^_^ :)", &inv);
        assert_eq!(toks[1].kind, Emo);
        assert_eq!(toks[2].kind, Punctuation);
        assert_eq!(toks.len(), 4);
    }

    #[test]
    fn inventory_validation() {
        assert_eq!(EmoticonInventory::new(vec![]), Err(InventoryError::Empty));
        let dup = vec![
            Emoticon {
                surface: ":)".into(),
                polarity: Polarity::Positive,
            },
            Emoticon {
                surface: ":)".into(),
                polarity: Polarity::Negative,
            },
        ];
        assert!(matches!(
            EmoticonInventory::new(dup),
            Err(InventoryError::Duplicate(_))
        ));
    }
}
