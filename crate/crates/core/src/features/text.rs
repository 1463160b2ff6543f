use super::EmbeddingTable;

/// Divisor in the word-count squashing `1 - exp(-n / WORD_COUNT_SCALE)`.
pub const WORD_COUNT_SCALE: f64 = 5.0;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Elementwise max over the tokens' vectors. Tokens missing from the table
/// contribute the zero vector; no tokens at all yields zeros.
pub fn embed_text<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> Vec<f32> {
    let dim = table.dim();
    if tokens.is_empty() {
        return vec![0.0; dim];
    }
    let mut out = vec![f32::NEG_INFINITY; dim];
    for t in tokens {
        match table.get(t.as_ref()) {
            Some(v) => out.iter_mut().zip(v).for_each(|(o, &x)| *o = o.max(x)),
            None => out.iter_mut().for_each(|o| *o = o.max(0.0)),
        }
    }
    out
}

/// Maps a word count into `[0, 1)`.
///
/// Past roughly 180 words the value saturates at the largest `f64` below one,
/// so strict growth only holds while the difference is representable.
pub fn word_count_feature(n: usize) -> f64 {
    (-(-(n as f64) / WORD_COUNT_SCALE).exp_m1()).min(1.0 - f64::EPSILON / 2.0)
}
