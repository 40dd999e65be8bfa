//! C2I: a fixed two-decimal-digit code for each of the 95 printable ASCII characters.
//!
//! Digits take codes 01-10, upper case 11-36, lower case 37-62, space 63, and the
//! remaining punctuation 64-95. Encoding text this way spends two decimal digits
//! per character instead of the three an ASCII-decimal encoding needs.

use std::fmt;

use thiserror::Error;

/// Characters in code order: `TABLE[i]` carries code `i + 1`.
const TABLE: [u8; 95] = *b"0123456789\
ABCDEFGHIJKLMNOPQRSTUVWXYZ\
abcdefghijklmnopqrstuvwxyz \
!\"#%&'()*+,-./:;<=>?@$^_[\\]`~{|}";
// Space (63) and '|' (94) are the two characters with no printed glyph in the reference table.

const fn reverse_table() -> [u8; 128] {
    let mut rev = [0u8; 128];
    let mut i = 0;
    while i < TABLE.len() {
        let c = TABLE[i];
        assert!(c >= 0x20 && c <= 0x7e, "table holds only printable ASCII");
        assert!(rev[c as usize] == 0, "table maps a character twice");
        rev[c as usize] = (i + 1) as u8;
        i += 1;
    }
    rev
}

/// Character byte to code; zero means unmapped. Built (and bijection-checked) at compile time.
const REVERSE: [u8; 128] = reverse_table();

pub const ALPHABET_SIZE: usize = TABLE.len();

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unsupported character {ch:?} (U+{:04X}) at position {position}", *.ch as u32)]
    UnsupportedCharacter { ch: char, position: usize },
    #[error("invalid code {code:?} at pair {index}")]
    InvalidCode { code: String, index: usize },
    #[error("digit stream has odd length {0}")]
    TruncatedStream(usize),
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::UnsupportedCharacter { .. } => "unsupported-character",
            CodecError::InvalidCode { .. } => "invalid-code",
            CodecError::TruncatedStream(_) => "truncated-stream",
        }
    }
}

/// A C2I code in `1..=95`; displays zero-padded to two digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct C2iCode(u8);

impl C2iCode {
    pub fn value(self) -> u8 {
        self.0
    }

    pub fn digits(self) -> [u8; 2] {
        [b'0' + self.0 / 10, b'0' + self.0 % 10]
    }
}

impl fmt::Display for C2iCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}", self.0)
    }
}

fn lookup(c: char) -> Option<C2iCode> {
    let b = u32::from(c);
    if b < 128 {
        match REVERSE[b as usize] {
            0 => None,
            code => Some(C2iCode(code)),
        }
    } else {
        None
    }
}

pub fn char_to_code(c: char) -> Result<C2iCode, CodecError> {
    lookup(c).ok_or(CodecError::UnsupportedCharacter { ch: c, position: 0 })
}

fn pair_to_char(pair: &[u8], index: usize) -> Result<char, CodecError> {
    let invalid = || CodecError::InvalidCode { code: String::from_utf8_lossy(pair).into_owned(), index };
    if pair.len() != 2 || !pair.iter().all(u8::is_ascii_digit) {
        return Err(invalid());
    }
    let code = (pair[0] - b'0') * 10 + (pair[1] - b'0');
    if code == 0 || code as usize > TABLE.len() {
        return Err(invalid());
    }
    Ok(TABLE[code as usize - 1] as char)
}

pub fn code_to_char(code: &str) -> Result<char, CodecError> {
    pair_to_char(code.as_bytes(), 0)
}

/// Concatenated two-digit codes; output is exactly twice the character count.
pub fn encode_text(text: &str) -> Result<String, CodecError> {
    let mut out = Vec::with_capacity(text.len() * 2);
    for (position, ch) in text.chars().enumerate() {
        let code = lookup(ch).ok_or(CodecError::UnsupportedCharacter { ch, position })?;
        out.extend_from_slice(&code.digits());
    }
    Ok(String::from_utf8(out).expect("digits are ASCII"))
}

pub fn decode_digits(digits: &str) -> Result<String, CodecError> {
    let bytes = digits.as_bytes();
    if !bytes.len().is_multiple_of(2) {
        return Err(CodecError::TruncatedStream(bytes.len()));
    }
    bytes.chunks_exact(2).enumerate().map(|(index, pair)| pair_to_char(pair, index)).collect()
}

/// `true` if every character of `text` has a C2I code.
pub fn is_encodable(text: &str) -> bool {
    text.chars().all(|c| lookup(c).is_some())
}

/// A text-to-decimal-digits encoding. Implementations are looked up by name.
pub trait TextEncoding: Send + Sync {
    fn name(&self) -> &'static str;
    fn digits_per_char(&self) -> usize;
    fn encode(&self, text: &str) -> Result<String, CodecError>;
    fn decode(&self, digits: &str) -> Result<String, CodecError>;
}

pub struct C2i;

impl TextEncoding for C2i {
    fn name(&self) -> &'static str {
        "c2i"
    }

    fn digits_per_char(&self) -> usize {
        2
    }

    fn encode(&self, text: &str) -> Result<String, CodecError> {
        encode_text(text)
    }

    fn decode(&self, digits: &str) -> Result<String, CodecError> {
        decode_digits(digits)
    }
}

/// Three-digit zero-padded byte values, e.g. `'S'` -> `"083"`.
pub struct AsciiDecimal;

impl TextEncoding for AsciiDecimal {
    fn name(&self) -> &'static str {
        "ascii-decimal"
    }

    fn digits_per_char(&self) -> usize {
        3
    }

    fn encode(&self, text: &str) -> Result<String, CodecError> {
        let mut out = String::with_capacity(text.len() * 3);
        for (position, ch) in text.chars().enumerate() {
            if !ch.is_ascii() {
                return Err(CodecError::UnsupportedCharacter { ch, position });
            }
            out.push_str(&format!("{:03}", ch as u8));
        }
        Ok(out)
    }

    fn decode(&self, digits: &str) -> Result<String, CodecError> {
        let bytes = digits.as_bytes();
        if !bytes.len().is_multiple_of(3) {
            return Err(CodecError::TruncatedStream(bytes.len()));
        }
        bytes
            .chunks_exact(3)
            .enumerate()
            .map(|(index, triple)| {
                std::str::from_utf8(triple)
                    .ok()
                    .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|s| s.parse::<u8>().ok())
                    .filter(u8::is_ascii)
                    .map(char::from)
                    .ok_or_else(|| CodecError::InvalidCode { code: String::from_utf8_lossy(triple).into_owned(), index })
            })
            .collect()
    }
}

static ENCODINGS: [&dyn TextEncoding; 2] = [&C2i, &AsciiDecimal];

pub fn encodings() -> &'static [&'static dyn TextEncoding] {
    &ENCODINGS
}

pub fn encoding_by_name(name: &str) -> Option<&'static dyn TextEncoding> {
    ENCODINGS.iter().copied().find(|e| e.name() == name)
}

/// Digit counts of C2I against ASCII-decimal over some sample of texts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadReport {
    pub characters: usize,
    pub c2i_digits: usize,
    pub ascii_digits: usize,
}

impl OverheadReport {
    pub fn measure<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Result<Self, CodecError> {
        let mut report = OverheadReport { characters: 0, c2i_digits: 0, ascii_digits: 0 };
        for text in texts {
            report.characters += text.chars().count();
            report.c2i_digits += C2i.encode(text)?.len();
            report.ascii_digits += AsciiDecimal.encode(text)?.len();
        }
        Ok(report)
    }

    /// Fractional saving of C2I relative to ASCII-decimal, in percent.
    pub fn reduction_percent(&self) -> f64 {
        if self.ascii_digits == 0 {
            return 0.0;
        }
        100.0 * (self.ascii_digits - self.c2i_digits) as f64 / self.ascii_digits as f64
    }
}

/// All 95 characters in code order.
pub fn alphabet() -> impl Iterator<Item = char> + Clone {
    TABLE.iter().map(|&b| b as char)
}
