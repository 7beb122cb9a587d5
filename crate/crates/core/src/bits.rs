//! Fixed-width bit rows for ego-local adjacency.

#[derive(Clone, Debug)]
pub(crate) struct BitRows {
    words: usize,
    data: Vec<u64>,
}

impl BitRows {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64).max(1);
        Self {
            words,
            data: vec![0; rows * words],
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize) {
        self.data[row * self.words + col / 64] |= 1 << (col % 64);
    }

    #[inline]
    pub(crate) fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.words + col / 64] & (1 << (col % 64)) != 0
    }

    #[inline]
    fn row(&self, row: usize) -> &[u64] {
        &self.data[row * self.words..(row + 1) * self.words]
    }

    /// Popcount of `self[a] & other[b]`; both tables must share a column space.
    #[inline]
    pub(crate) fn and_count(&self, a: usize, other: &BitRows, b: usize) -> usize {
        debug_assert_eq!(self.words, other.words);
        self.row(a)
            .iter()
            .zip(other.row(b))
            .map(|(x, y)| (x & y).count_ones() as usize)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_count_spans_words() {
        let mut m = BitRows::new(2, 130);
        for c in [0, 63, 64, 129] {
            m.set(0, c);
        }
        for c in [63, 64, 100, 129] {
            m.set(1, c);
        }
        assert_eq!(m.and_count(0, &m, 1), 3);
        assert!(m.get(0, 129) && !m.get(0, 100));
    }
}
