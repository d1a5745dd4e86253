use ndarray::Array2;

pub const TEXT_TOKENS: usize = 8;
pub const TEXT_WIDTH: usize = 64;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Deterministic bag-of-character-bigrams embedding, `8 × 64`.
///
/// Each bigram of the lower-cased prompt (padded with one space on either
/// side) is hashed to a token row, a column and a sign. The result is scaled
/// by `1/√(bigram count)`; the empty prompt embeds to zeros.
pub fn embed_text(prompt: &str) -> Array2<f64> {
    let mut out = Array2::zeros((TEXT_TOKENS, TEXT_WIDTH));
    if prompt.is_empty() {
        return out;
    }
    let chars: Vec<char> = std::iter::once(' ')
        .chain(prompt.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    let count = chars.len() - 1;
    let scale = 1.0 / (count as f64).sqrt();
    for w in chars.windows(2) {
        let mut buf = [0u8; 8];
        let a = w[0].encode_utf8(&mut buf[..4]).len();
        let b = w[1].encode_utf8(&mut buf[a..]).len();
        let h = fnv1a(&buf[..a + b]);
        let row = (h % TEXT_TOKENS as u64) as usize;
        let col = ((h >> 8) % TEXT_WIDTH as u64) as usize;
        let sign = if (h >> 32) & 1 == 0 { 1.0 } else { -1.0 };
        out[[row, col]] += sign * scale;
    }
    out
}
