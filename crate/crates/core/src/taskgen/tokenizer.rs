//! Fixed 260-token vocabulary for task inputs and MechSMILES targets.
//!
//! Bracket atoms are split into their parts. Map numbers and arrow indices
//! are cut into two-digit chunks (`10`..`99` are single tokens); ring
//! closures, hydrogen counts, charges and isotopes use single digits.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::element::Element;

pub const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];
pub const MARKERS: [&str; 3] = ["[reac]", "[prod]", "[mech]"];
const PUNCT: [&str; 20] = [
    "(", ")", "[", "]", ".", "=", "#", "-", "+", "\\", "/", ":", "@", "@@", "%", "|", ";", ",",
    " ", "*",
];
const AROMATIC: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];
const EXTRAS: [&str; 7] = [">", "~", "$", "?", "<mask>", "<sep>", "<cls>"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("no token covers `{text}` at byte {offset}")]
    Uncoverable { text: String, offset: usize },
    #[error("token id {0} is outside the vocabulary")]
    UnknownId(u32),
}

pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn build() -> Vocab {
        let mut tokens: Vec<String> = Vec::with_capacity(260);
        tokens.extend(SPECIALS.iter().map(|s| s.to_string()));
        tokens.extend(MARKERS.iter().map(|s| s.to_string()));
        tokens.extend(PUNCT.iter().map(|s| s.to_string()));
        tokens.extend(AROMATIC.iter().map(|s| s.to_string()));
        tokens.extend((0..100).map(|n| n.to_string()));
        tokens.extend((1..=118).map(|z| {
            Element::from_atomic_number(z)
                .expect("z in range")
                .symbol()
                .to_string()
        }));
        tokens.extend(EXTRAS.iter().map(|s| s.to_string()));
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub fn vocab() -> &'static Vocab {
    static VOCAB: OnceLock<Vocab> = OnceLock::new();
    VOCAB.get_or_init(Vocab::build)
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    out: Vec<&'a str>,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn take(&mut self, n: usize) {
        self.out.push(&self.text[self.pos..self.pos + n]);
        self.pos += n;
    }

    fn fail(&self) -> TokenError {
        let text: String = self.rest().chars().take(8).collect();
        TokenError::Uncoverable {
            text,
            offset: self.pos,
        }
    }

    /// Digit run in two-digit chunks; chunks with a leading zero split.
    fn number(&mut self) {
        let len = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        let end = self.pos + len;
        while self.pos < end {
            let n = (end - self.pos).min(2);
            if n == 2 && self.rest().as_bytes()[0] != b'0' {
                self.take(2);
            } else {
                self.take(1);
            }
        }
    }

    fn element(&mut self, bracket: bool) -> Result<(), TokenError> {
        let r = self.rest();
        if bracket {
            for aromatic in ["se", "as"] {
                if r.starts_with(aromatic) {
                    self.take(2);
                    return Ok(());
                }
            }
            if r.len() >= 2 && r.is_char_boundary(2) && Element::from_symbol(&r[..2]).is_some() {
                self.take(2);
                return Ok(());
            }
        } else if r.starts_with("Cl") || r.starts_with("Br") {
            self.take(2);
            return Ok(());
        }
        let c = r.as_bytes().first().copied().ok_or_else(|| self.fail())?;
        let one = &r[..1];
        if (c.is_ascii_uppercase() && Element::from_symbol(one).is_some())
            || AROMATIC.contains(&one)
        {
            self.take(1);
            Ok(())
        } else {
            Err(self.fail())
        }
    }

    fn bracket(&mut self) -> Result<(), TokenError> {
        self.take(1);
        while self
            .rest()
            .as_bytes()
            .first()
            .is_some_and(u8::is_ascii_digit)
        {
            self.take(1);
        }
        self.element(true)?;
        loop {
            let r = self.rest();
            let Some(&c) = r.as_bytes().first() else {
                return Err(self.fail());
            };
            match c {
                b']' => {
                    self.take(1);
                    return Ok(());
                }
                b'@' => self.take(if r.starts_with("@@") { 2 } else { 1 }),
                b'H' => self.take(1),
                b'+' | b'-' => self.take(1),
                b'0'..=b'9' => self.take(1),
                b':' => {
                    self.take(1);
                    self.number();
                }
                _ => return Err(self.fail()),
            }
        }
    }

    fn run(mut self) -> Result<Vec<&'a str>, TokenError> {
        let mut arrows = false;
        while self.pos < self.text.len() {
            let r = self.rest();
            if let Some(m) = MARKERS.iter().find(|m| r.starts_with(**m)) {
                self.take(m.len());
                arrows = false;
                continue;
            }
            let c = r.as_bytes()[0];
            match c {
                b'[' => self.bracket()?,
                b'|' => {
                    self.take(1);
                    arrows = true;
                }
                b'0'..=b'9' if arrows => self.number(),
                b'0'..=b'9' => self.take(1),
                b'%' => {
                    self.take(1);
                    self.number();
                }
                b'@' if r.starts_with("@@") => self.take(2),
                b'(' | b')' | b'.' | b'=' | b'#' | b'-' | b'+' | b'\\' | b'/' | b':' | b'@'
                | b';' | b',' | b' ' | b'*' | b'>' | b'~' | b'$' | b'?' => self.take(1),
                _ if !arrows => self.element(false)?,
                _ => return Err(self.fail()),
            }
        }
        Ok(self.out)
    }
}

/// Token strings of `text`; concatenating them gives `text` back.
pub fn tokens(text: &str) -> Result<Vec<&str>, TokenError> {
    Lexer {
        text,
        pos: 0,
        out: Vec::new(),
    }
    .run()
}

pub fn tokenize(text: &str) -> Result<Vec<u32>, TokenError> {
    let v = vocab();
    let mut offset = 0;
    tokens(text)?
        .into_iter()
        .map(|t| {
            let id = v.id(t).ok_or_else(|| TokenError::Uncoverable {
                text: t.to_string(),
                offset,
            });
            offset += t.len();
            id
        })
        .collect()
}

pub fn detokenize(ids: &[u32]) -> Result<String, TokenError> {
    let v = vocab();
    ids.iter()
        .map(|&id| v.token(id).ok_or(TokenError::UnknownId(id)))
        .collect()
}
