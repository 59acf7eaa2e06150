//! Small combinatorics toolkit: binomials and lexicographic k-subsets of `[n]`.

use std::sync::OnceLock;

/// Rows of Pascal's triangle kept in a lookup table.
const TABLE_ROWS: usize = 128;

fn pascal() -> &'static [Vec<u128>] {
    static TABLE: OnceLock<Vec<Vec<u128>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(TABLE_ROWS + 1);
        for n in 0..=TABLE_ROWS {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        rows
    })
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    if n as usize <= TABLE_ROWS {
        return Some(pascal()[n as usize][k as usize]);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Iterates over the `k`-subsets of `{1, …, n}` in lexicographic order, each
/// as a strictly increasing vector.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((1..=k).collect()) } else { None };
        Self { n, current }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        // Rightmost element that can still be incremented.
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - (k - 1 - i) {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

/// Zero-based lexicographic rank of a strictly increasing subset of `[n]`.
pub fn lex_rank(subset: &[usize], n: usize) -> u128 {
    let k = subset.len();
    let mut rank = 0u128;
    let mut prev = 0usize;
    for (i, &a) in subset.iter().enumerate() {
        for x in prev + 1..a {
            rank += binomial((n - x) as u64, (k - 1 - i) as u64).unwrap_or(0);
        }
        prev = a;
    }
    rank
}

/// Inverse of [`lex_rank`].
pub fn lex_unrank(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut x = 1usize;
    for i in 0..k {
        loop {
            let block = binomial((n - x) as u64, (k - 1 - i) as u64).unwrap_or(0);
            if rank < block {
                break;
            }
            rank -= block;
            x += 1;
        }
        out.push(x);
        x += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(100, 5), Some(75_287_520));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(7, 0), Some(1));
        assert_eq!(binomial(128, 64), Some(23_951_146_041_928_082_866_135_587_776_380_551_750));
        assert_eq!(binomial(129, 2), Some(129 * 64));
        assert_eq!(binomial(200, 100), None);
    }

    #[test]
    fn subsets_are_lexicographic_and_ranked() {
        let all: Vec<_> = Subsets::new(5, 3).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![1, 2, 3]);
        assert_eq!(all[9], vec![3, 4, 5]);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(lex_rank(s, 5), i as u128);
            assert_eq!(&lex_unrank(i as u128, 5, 3), s);
        }
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
    }

    #[test]
    fn degenerate_subsets() {
        assert_eq!(Subsets::new(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(Subsets::new(2, 3).count(), 0);
        assert_eq!(Subsets::new(4, 4).collect::<Vec<_>>(), vec![vec![1, 2, 3, 4]]);
    }
}
