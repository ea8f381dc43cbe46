use serde::Serialize;

use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    OrganicAtom,
    BracketAtom,
    Bond,
    BranchOpen,
    BranchClose,
    RingClosure,
    Dot,
}

/// One lexeme of a SMILES string with its byte offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmilesToken {
    pub kind: TokenKind,
    pub lexeme: String,
    pub offset: usize,
}

const ORGANIC_TWO: [&str; 2] = ["Cl", "Br"];
const ORGANIC_ONE: [char; 8] = ['B', 'C', 'N', 'O', 'P', 'S', 'F', 'I'];
const AROMATIC_ONE: [char; 6] = ['b', 'c', 'n', 'o', 'p', 's'];

pub fn tokenize(s: &str) -> Result<Vec<SmilesToken>, SmilesError> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let (kind, len) = match c {
            '[' => {
                let close = s[i..]
                    .find(']')
                    .ok_or(SmilesError::UnbalancedBracket { offset: i })?;
                if s[i + 1..i + close].contains('[') {
                    return Err(SmilesError::UnbalancedBracket { offset: i });
                }
                (TokenKind::BracketAtom, close + 1)
            }
            ']' => return Err(SmilesError::UnbalancedBracket { offset: i }),
            '(' => (TokenKind::BranchOpen, 1),
            ')' => (TokenKind::BranchClose, 1),
            '.' => (TokenKind::Dot, 1),
            '-' | '=' | '#' | ':' | '/' | '\\' | '$' => (TokenKind::Bond, 1),
            '%' => {
                let digits = &s[i + 1..];
                if digits.len() < 2 || !digits.as_bytes()[..2].iter().all(u8::is_ascii_digit) {
                    return Err(SmilesError::UnexpectedChar { ch: '%', offset: i });
                }
                (TokenKind::RingClosure, 3)
            }
            '0'..='9' => (TokenKind::RingClosure, 1),
            _ if ORGANIC_TWO.iter().any(|t| s[i..].starts_with(t)) => (TokenKind::OrganicAtom, 2),
            _ if ORGANIC_ONE.contains(&c) || AROMATIC_ONE.contains(&c) => {
                (TokenKind::OrganicAtom, 1)
            }
            '*' => {
                return Err(SmilesError::UnknownElement {
                    symbol: "*".into(),
                    offset: i,
                })
            }
            _ if c.is_ascii_alphabetic() => {
                let end = s[i..]
                    .char_indices()
                    .skip(1)
                    .find(|(_, ch)| !ch.is_ascii_lowercase())
                    .map_or(s.len() - i, |(k, _)| k);
                return Err(SmilesError::UnknownElement {
                    symbol: s[i..i + end].to_string(),
                    offset: i,
                });
            }
            _ => {
                let ch = s[i..].chars().next().unwrap_or('?');
                return Err(SmilesError::UnexpectedChar { ch, offset: i });
            }
        };
        out.push(SmilesToken {
            kind,
            lexeme: s[start..start + len].to_string(),
            offset: start,
        });
        i += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexemes_round_trip() {
        for s in [
            "CC(=O)CCCC=O.O.[BH4-]",
            "[BH3-:2][H:3]",
            "C%12CC%12",
            "F/C=C\\Cl",
            "c1ccccc1Br",
        ] {
            let toks = tokenize(s).unwrap();
            let joined: String = toks.iter().map(|t| t.lexeme.as_str()).collect();
            assert_eq!(joined, s);
        }
    }

    #[test]
    fn kinds() {
        let toks = tokenize("C(=O)[O-].Cl1").unwrap();
        let kinds: Vec<TokenKind> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::OrganicAtom,
                TokenKind::BranchOpen,
                TokenKind::Bond,
                TokenKind::OrganicAtom,
                TokenKind::BranchClose,
                TokenKind::BracketAtom,
                TokenKind::Dot,
                TokenKind::OrganicAtom,
                TokenKind::RingClosure,
            ]
        );
    }

    #[test]
    fn unbalanced_bracket_offset() {
        assert_eq!(
            tokenize("CC[NH4+").unwrap_err(),
            SmilesError::UnbalancedBracket { offset: 2 }
        );
        assert_eq!(
            tokenize("CC]").unwrap_err(),
            SmilesError::UnbalancedBracket { offset: 2 }
        );
    }

    #[test]
    fn unknown_organic_symbol() {
        assert_eq!(
            tokenize("CXy").unwrap_err(),
            SmilesError::UnknownElement {
                symbol: "Xy".into(),
                offset: 1
            }
        );
    }
}
