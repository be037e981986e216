//! Tokenization and longest-common-subsequence helpers shared by the text
//! index and the evaluation metrics.

/// Lowercases `text` and splits it on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Length of the longest common subsequence of two slices.
///
/// Plain two-row dynamic program, `O(|a|·|b|)` time and `O(min)` memory.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (outer, inner) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if inner.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; inner.len() + 1];
    let mut cur = vec![0usize; inner.len() + 1];
    for x in outer {
        for (j, y) in inner.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[inner.len()]
}

/// Rough token count: every alphanumeric run costs `ceil(len / chars_per_token)`
/// tokens, every other non-whitespace character costs one; the total is scaled
/// by `multiplier` and rounded up.
pub fn estimate_tokens(text: &str, chars_per_token: f64, multiplier: f64) -> usize {
    let mut total = 0usize;
    let mut run = 0usize;
    let flush = |run: &mut usize, total: &mut usize| {
        if *run > 0 {
            *total += (*run as f64 / chars_per_token).ceil() as usize;
            *run = 0;
        }
    };
    for c in text.chars() {
        if c.is_alphanumeric() {
            run += 1;
        } else {
            flush(&mut run, &mut total);
            if !c.is_whitespace() {
                total += 1;
            }
        }
    }
    flush(&mut run, &mut total);
    (total as f64 * multiplier).ceil() as usize
}
