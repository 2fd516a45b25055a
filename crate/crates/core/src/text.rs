//! Text normalization shared by loaders, the codec and the caches.

use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

/// Canonical no-answer marker as it appears in MS MARCO answers.
pub const NO_ANSWER: &str = "No Answer Present.";

/// Canonical composition (NFC) of `text`.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// True for the no-answer marker, ignoring case, surrounding whitespace
/// and one optional trailing period.
pub fn is_no_answer(text: &str) -> bool {
    let t = text.trim();
    let t = t.strip_suffix('.').unwrap_or(t);
    t.eq_ignore_ascii_case("no answer present")
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}
