//! Typed tokens: the atomic unit of statements and proofs.
//!
//! A token is either a natural-language word or a math symbol. Math symbols
//! additionally carry the font they were rendered in, because `x` and
//! `\mathbf{x}` in the same article usually denote different objects. The
//! kind (and font) participate in token identity, so the word vocabulary and
//! the math vocabulary are disjoint by construction: the word "a" and the
//! math symbol "a" are different vocabulary items.

use alloc::borrow::ToOwned;
use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenKind {
    Word,
    Math,
}

/// A word token or a font-typed math token.
///
/// Fields are private so the "words carry no font" invariant cannot be
/// violated; construct through [`TypedToken::word`] and [`TypedToken::math`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypedToken {
    kind: TokenKind,
    // Font sorts/compares before surface so derived Ord groups math tokens
    // by font; any total order would do, it just has to be stable.
    font: Option<String>,
    surface: String,
}

impl TypedToken {
    pub fn word(surface: impl Into<String>) -> Self {
        Self {
            kind: TokenKind::Word,
            font: None,
            surface: surface.into(),
        }
    }

    pub fn math(font: impl Into<String>, surface: impl Into<String>) -> Self {
        Self {
            kind: TokenKind::Math,
            font: Some(font.into()),
            surface: surface.into(),
        }
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    /// Font name for math tokens, `None` for words.
    pub fn font(&self) -> Option<&str> {
        self.font.as_deref()
    }

    /// Serializes to the corpus wire form: `w:<surface>` or `m:<font>:<surface>`.
    pub fn encode(&self) -> String {
        match self.kind {
            TokenKind::Word => alloc::format!("w:{}", self.surface),
            TokenKind::Math => {
                alloc::format!("m:{}:{}", self.font.as_deref().unwrap_or(""), self.surface)
            }
        }
    }

    /// Parses the wire form. The surface may itself contain `:`; the font
    /// may not.
    pub fn decode(s: &str) -> Result<Self, TokenParseError> {
        if let Some(surface) = s.strip_prefix("w:") {
            if surface.is_empty() {
                return Err(TokenParseError::EmptySurface(s.to_owned()));
            }
            return Ok(Self::word(surface));
        }
        if let Some(rest) = s.strip_prefix("m:") {
            let (font, surface) = rest
                .split_once(':')
                .ok_or_else(|| TokenParseError::MissingFont(s.to_owned()))?;
            if font.is_empty() {
                return Err(TokenParseError::MissingFont(s.to_owned()));
            }
            if surface.is_empty() {
                return Err(TokenParseError::EmptySurface(s.to_owned()));
            }
            return Ok(Self::math(font, surface));
        }
        Err(TokenParseError::UnknownPrefix(s.to_owned()))
    }
}

impl fmt::Display for TypedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenParseError {
    UnknownPrefix(String),
    MissingFont(String),
    EmptySurface(String),
}

impl fmt::Display for TokenParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenParseError::UnknownPrefix(s) => {
                write!(f, "token {s:?} does not start with \"w:\" or \"m:\"")
            }
            TokenParseError::MissingFont(s) => write!(f, "math token {s:?} is missing a font"),
            TokenParseError::EmptySurface(s) => write!(f, "token {s:?} has an empty surface"),
        }
    }
}

impl core::error::Error for TokenParseError {}

/// Which token kinds a task variation admits: full texts, natural-language
/// words only, or math symbols only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Both,
    TextOnly,
    MathOnly,
}

impl InputMode {
    pub fn admits(self, kind: TokenKind) -> bool {
        match self {
            InputMode::Both => true,
            InputMode::TextOnly => kind == TokenKind::Word,
            InputMode::MathOnly => kind == TokenKind::Math,
        }
    }

    /// The tokens of `text` admitted under this mode, in order.
    pub fn restrict<'a>(self, text: &'a [TypedToken]) -> impl Iterator<Item = &'a TypedToken> {
        text.iter().filter(move |t| self.admits(t.kind()))
    }
}
