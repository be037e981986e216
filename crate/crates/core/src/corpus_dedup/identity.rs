use super::DedupError;

/// Length of the longest common subsequence of two byte strings using the
/// bit-parallel recurrence `V ← (V + (V & M)) | (V & !M)` over the shorter
/// string; zero bits in `V` count the LCS.
pub fn lcs_length(a: &[u8], b: &[u8]) -> usize {
    let (pattern, text) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = pattern.len();
    if m == 0 {
        return 0;
    }
    let words = m.div_ceil(64);
    let mut masks = vec![0u64; 256 * words];
    for (i, &c) in pattern.iter().enumerate() {
        masks[c as usize * words + i / 64] |= 1u64 << (i % 64);
    }
    let mut v = vec![!0u64; words];
    for &c in text {
        let mask = &masks[c as usize * words..(c as usize + 1) * words];
        let mut carry = false;
        for (vw, &mw) in v.iter_mut().zip(mask) {
            let u = *vw & mw;
            let (s1, c1) = vw.overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            carry = c1 || c2;
            *vw = s2 | (*vw & !mw);
        }
    }
    let mut ones = 0usize;
    for (w, &vw) in v.iter().enumerate() {
        let bits = if w + 1 == words && m % 64 != 0 {
            vw & ((1u64 << (m % 64)) - 1)
        } else {
            vw
        };
        ones += bits.count_ones() as usize;
    }
    m - ones
}

/// Identity under the best match-maximizing global alignment (match 1,
/// mismatch 0, gaps 0), normalized by the shorter sequence length.
pub fn pairwise_identity(a: &str, b: &str) -> Result<f64, DedupError> {
    if a.is_empty() || b.is_empty() {
        return Err(DedupError::EmptySequence);
    }
    let matches = lcs_length(a.as_bytes(), b.as_bytes());
    Ok(matches as f64 / a.len().min(b.len()) as f64)
}

/// Sorted, distinct k-mers of `seq` packed into `u64` (k ≤ 8).
pub fn kmer_set(seq: &[u8], k: usize) -> Vec<u64> {
    assert!((1..=8).contains(&k), "k-mer size must be in 1..=8");
    if seq.len() < k {
        return Vec::new();
    }
    let mut out: Vec<u64> = seq
        .windows(k)
        .map(|w| w.iter().fold(0u64, |acc, &c| (acc << 8) | c as u64))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Size of the intersection of two sorted, distinct k-mer lists.
pub fn shared_kmers(a: &[u64], b: &[u64]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
