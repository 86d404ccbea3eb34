//! Shared 64-entry character alphabet and tokenizer. The synthesizer and the
//! language model agree on this table, so every generated transcript is
//! tokenizable by construction.

use crate::error::{Error, Result};

/// Total vocabulary size including the three specials.
pub const VOCAB_SIZE: usize = 64;
pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const PAD: u32 = 2;
/// Offset of the first real character id.
const CHAR_BASE: u32 = 3;

pub const ALPHABET_VERSION: &str = "char64-v1";

/// The 61 printable characters: ascii lowercase, space, digits, apostrophe,
/// and the accented letters used by the non-English language tags.
pub const CHARS: [char; 61] = [
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
    's', 't', 'u', 'v', 'w', 'x', 'y', 'z', ' ', '0', '1', '2', '3', '4', '5', '6', '7', '8',
    '9', '\'', 'á', 'é', 'í', 'ó', 'ú', 'ñ', 'à', 'è', 'ì', 'ò', 'ù', 'â', 'ê', 'î', 'ô', 'û',
    'ç', 'ã', 'õ', 'ü', 'ö', 'ë', 'ï',
];

/// Index of `c` within [`CHARS`], if it is in the alphabet.
pub fn char_index(c: char) -> Option<usize> {
    CHARS.iter().position(|&x| x == c)
}

/// Token id of a character.
pub fn char_to_id(c: char) -> Option<u32> {
    char_index(c).map(|i| i as u32 + CHAR_BASE)
}

pub fn id_to_char(id: u32) -> Option<char> {
    let idx = id.checked_sub(CHAR_BASE)? as usize;
    CHARS.get(idx).copied()
}

pub fn is_special(id: u32) -> bool {
    id < CHAR_BASE
}

/// A tokenized transcript: BOS, character ids, EOS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub alphabet_version: &'static str,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// BOS-prefixed, EOS-terminated character tokenization.
pub fn tokenize(text: &str) -> Result<TokenSequence> {
    let mut ids = Vec::with_capacity(text.chars().count() + 2);
    ids.push(BOS);
    for c in text.chars() {
        let id = char_to_id(c).ok_or_else(|| {
            Error::domain(format!("character {c:?} is outside the alphabet"))
        })?;
        ids.push(id);
    }
    ids.push(EOS);
    Ok(TokenSequence {
        ids,
        alphabet_version: ALPHABET_VERSION,
    })
}

/// Back to text, skipping the special tokens.
pub fn detokenize(tokens: &TokenSequence) -> Result<String> {
    let mut out = String::new();
    for &id in &tokens.ids {
        if is_special(id) {
            continue;
        }
        let c = id_to_char(id)
            .ok_or_else(|| Error::domain(format!("token id {id} is outside the vocabulary")))?;
        out.push(c);
    }
    Ok(out)
}
