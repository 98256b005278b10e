//! Rule-based tokenization and normalization shared by every other module.
//!
//! A token is either a maximal run of letters/digits or a single other
//! non-whitespace character. Asterisks sitting *between* two alphanumeric
//! runs are kept inside the word, so obfuscated forms such as `х**ня` stay a
//! single token instead of being shredded into four.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Surface form of a token plus its byte span in the text it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

impl Token {
    pub fn new(text: impl Into<String>, span: Range<usize>) -> Self {
        Self { text: text.into(), span }
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

const OBFUSCATION_CHAR: char = '*';
const CLOSING: [&str; 8] = [".", ",", "!", "?", ":", ";", ")", "»"];
const OPENING: [&str; 2] = ["(", "«"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits `text` into tokens. Whitespace never produces tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !is_word_char(c) {
            let end = start + c.len_utf8();
            tokens.push(Token::new(&text[start..end], start..end));
            i += 1;
            continue;
        }
        let mut j = i;
        loop {
            while j < chars.len() && is_word_char(chars[j].1) {
                j += 1;
            }
            // absorb `**` only when a word character follows the run
            let mut k = j;
            while k < chars.len() && chars[k].1 == OBFUSCATION_CHAR {
                k += 1;
            }
            if k > j && k < chars.len() && is_word_char(chars[k].1) {
                j = k;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
        tokens.push(Token::new(&text[start..end], start..end));
        i = j;
    }
    tokens
}

/// Token texts only, for callers that do not need spans.
pub fn tokenize_words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// Joins tokens with single spaces, gluing closing punctuation to the left
/// and opening brackets to the right.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for token in tokens {
        let token = token.as_ref();
        if !glue_next && !CLOSING.contains(&token) {
            out.push(' ');
        }
        out.push_str(token);
        glue_next = OPENING.contains(&token);
    }
    out
}

/// Folds Cyrillic `ё`/`Ё` into `е`/`Е`; nothing else changes.
pub fn fold_yo(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'ё' => 'е',
            'Ё' => 'Е',
            c => c,
        })
        .collect()
}

/// Lowercase plus `ё` folding, the key used for case-insensitive matching.
pub fn fold_key(text: &str) -> String {
    fold_yo(&text.to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n").is_empty());
    }

    #[test]
    fn two_words() {
        assert_eq!(
            tokenize("abc def"),
            vec![Token::new("abc", 0..3), Token::new("def", 4..7)]
        );
    }

    #[test]
    fn punctuation_is_split_per_char() {
        assert_eq!(texts(&tokenize("сволочи!!!")), vec!["сволочи", "!", "!", "!"]);
        assert_eq!(texts(&tokenize("a-b")), vec!["a", "-", "b"]);
    }

    #[test]
    fn inner_asterisks_stay_in_word() {
        assert_eq!(
            texts(&tokenize("сколько же е**нутых в россии")),
            vec!["сколько", "же", "е**нутых", "в", "россии"]
        );
        assert_eq!(texts(&tokenize("е** x")), vec!["е", "*", "*", "x"]);
        assert_eq!(texts(&tokenize("**ть")), vec!["*", "*", "ть"]);
    }

    #[test]
    fn detokenize_examples() {
        assert_eq!(detokenize::<&str>(&[]), "");
        assert_eq!(detokenize(&["люди", "плохие", "!"]), "люди плохие!");
        assert_eq!(detokenize(&["a", "(", "b", ")"]), "a (b)");
        assert_eq!(detokenize(&["«", "x", "»", ","]), "«x»,");
    }

    #[test]
    fn yo_folding() {
        assert_eq!(fold_yo("ёж"), "еж");
        assert_eq!(fold_yo("тест"), "тест");
        assert_eq!(fold_yo("Ёлка ёлка"), "Елка елка");
    }

    proptest! {
        #[test]
        fn spans_slice_to_text(s in "\\PC{0,40}") {
            let tokens = tokenize(&s);
            let mut last_end = 0;
            for t in &tokens {
                prop_assert!(!t.span.is_empty());
                prop_assert!(t.span.start >= last_end);
                prop_assert_eq!(&s[t.span.clone()], t.text.as_str());
                last_end = t.span.end;
            }
        }

        #[test]
        fn retokenize_is_stable(s in "[a-zа-яё*!?.,()« »\\- ]{0,40}") {
            let tokens = tokenize_words(&s);
            prop_assert_eq!(&tokenize_words(&tokens.join(" ")), &tokens);
            prop_assert_eq!(&tokenize_words(&detokenize(&tokens)), &tokens);
        }

        #[test]
        fn fold_yo_keeps_char_count(s in "\\PC{0,30}") {
            prop_assert_eq!(fold_yo(&s).chars().count(), s.chars().count());
        }
    }
}
