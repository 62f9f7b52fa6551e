use std::fmt;

use super::SmilesError;

/// Lexical class of a SMILES token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Organic-subset atom written without brackets (`C`, `Cl`, `c`, ...).
    Atom,
    /// Whole bracket expression such as `[NH4+]`.
    BracketAtom,
    /// Ring-closure digit or `%nn`.
    RingClosure,
    /// One of `- = # $ : / \`.
    Bond,
    BranchOpen,
    BranchClose,
    Dot,
    Wildcard,
}

/// Classify a single token string, `None` if it is outside the grammar.
pub fn token_kind(token: &str) -> Option<TokenKind> {
    let bytes = token.as_bytes();
    match bytes {
        [b'[', .., b']'] if bytes.len() >= 3 => Some(TokenKind::BracketAtom),
        b"Cl" | b"Br" => Some(TokenKind::Atom),
        [b'%', d1, d2] if d1.is_ascii_digit() && d2.is_ascii_digit() => Some(TokenKind::RingClosure),
        [c] => match c {
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                Some(TokenKind::Atom)
            }
            b'0'..=b'9' => Some(TokenKind::RingClosure),
            b'-' | b'=' | b'#' | b'$' | b':' | b'/' | b'\\' => Some(TokenKind::Bond),
            b'(' => Some(TokenKind::BranchOpen),
            b')' => Some(TokenKind::BranchClose),
            b'.' => Some(TokenKind::Dot),
            b'*' => Some(TokenKind::Wildcard),
            _ => None,
        },
        _ => None,
    }
}

/// A SMILES string split into grammar tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn into_inner(self) -> Vec<String> {
        self.tokens
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tokens {
            f.write_str(t)?;
        }
        Ok(())
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Token strings with their byte offsets in the source text.
pub(crate) fn lex(text: &str) -> Result<Vec<(usize, &str)>, SmilesError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let len = match bytes[i] {
            b'[' => match bytes[i..].iter().position(|&c| c == b']') {
                Some(close) => close + 1,
                None => return Err(SmilesError::UnclosedBracket { position: i }),
            },
            b'C' if bytes.get(i + 1) == Some(&b'l') => 2,
            b'B' if bytes.get(i + 1) == Some(&b'r') => 2,
            b'%' => {
                let ok = bytes.get(i + 1).is_some_and(u8::is_ascii_digit)
                    && bytes.get(i + 2).is_some_and(u8::is_ascii_digit);
                if !ok {
                    return Err(SmilesError::Syntax {
                        position: i,
                        message: "'%' must be followed by two digits".into(),
                    });
                }
                3
            }
            c if c.is_ascii() && token_kind(std::str::from_utf8(&[c]).unwrap()).is_some() => 1,
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(SmilesError::IllegalCharacter { ch, position: i });
            }
        };
        i += len;
        out.push((start, &text[start..i]));
    }
    Ok(out)
}

/// Split a SMILES string into tokens by maximal munch.
///
/// Bracket atoms, `Cl`, `Br` and `%nn` are single tokens; every other
/// character is its own token. Only illegal characters are rejected, so
/// syntactically broken strings still tokenize.
pub fn tokenize_smiles(text: &str) -> Result<TokenSequence, SmilesError> {
    Ok(lex(text)?.into_iter().map(|(_, t)| t).collect())
}

/// Concatenate tokens back into a string.
pub fn detokenize(tokens: &TokenSequence) -> String {
    tokens.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_smiles(s).unwrap().into_inner()
    }

    #[test]
    fn simple_chain() {
        assert_eq!(toks("CCO"), ["C", "C", "O"]);
    }

    #[test]
    fn two_letter_halogens_are_single_tokens() {
        assert_eq!(toks("C(Cl)Br"), ["C", "(", "Cl", ")", "Br"]);
    }

    #[test]
    fn bracket_atom_is_one_token() {
        assert_eq!(toks("[NH4+]"), ["[NH4+]"]);
        assert_eq!(toks("C[C@@H](O)N"), ["C", "[C@@H]", "(", "O", ")", "N"]);
    }

    #[test]
    fn percent_ring_closures() {
        assert_eq!(toks("C%12CC%12"), ["C", "%12", "C", "C", "%12"]);
        assert!(tokenize_smiles("C%1").is_err());
    }

    #[test]
    fn sc_is_sulfur_then_aromatic_carbon() {
        assert_eq!(toks("Sc1ccccc1"), ["S", "c", "1", "c", "c", "c", "c", "c", "1"]);
    }

    #[test]
    fn illegal_characters_are_rejected() {
        assert_eq!(
            tokenize_smiles("CCX"),
            Err(SmilesError::IllegalCharacter { ch: 'X', position: 2 })
        );
        assert!(matches!(
            tokenize_smiles("C[NH4"),
            Err(SmilesError::UnclosedBracket { position: 1 })
        ));
        assert!(tokenize_smiles("CCé").is_err());
    }

    #[test]
    fn lexically_valid_garbage_tokenizes() {
        assert_eq!(toks("((1"), ["(", "(", "1"]);
    }

    #[test]
    fn detokenize_examples() {
        assert_eq!(detokenize(&TokenSequence::from_iter(["C", "C", "O"])), "CCO");
        assert_eq!(detokenize(&TokenSequence::default()), "");
    }

    #[test]
    fn every_token_is_in_grammar() {
        for s in ["CC(=O)Nc1ccc(O)cc1", "[13CH4]", "C/C=C\\C", "C.C", "C#N", "c1cc[nH]c1"] {
            for t in tokenize_smiles(s).unwrap().iter() {
                assert!(token_kind(t).is_some(), "{t}");
            }
        }
    }
}
