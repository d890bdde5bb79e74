//! Character-level longest common substring distance.
//!
//! Consistency compares consecutive responses by how much contiguous text
//! they share: reworded answers score worse than extended or repeated
//! ones. Distances work on characters, not bytes, so multibyte text is
//! measured by what a reader sees.

/// Length in characters of the longest substring common to `a` and `b`.
pub fn longest_common_substring_len(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // classic quadratic table, kept to one rolling row
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in &a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Distance in [0, 1]: zero for identical strings, one for strings with no
/// character in common. Two empty strings are identical, so distance zero.
pub fn lcs_distance(a: &str, b: &str) -> f64 {
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 0.0;
    }
    1.0 - longest_common_substring_len(a, b) as f64 / max_len as f64
}
