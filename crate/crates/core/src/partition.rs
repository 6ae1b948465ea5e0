use std::ops::Range;

/// Block boundaries of an extent `n` split over `p` ranks.
///
/// The first `n % p` ranks get `ceil(n / p)` entries and the rest
/// `floor(n / p)`; blocks may be empty when `p > n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    bounds: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, p: usize) -> Partition {
        assert!(p >= 1, "partition needs at least one rank");
        let (q, rem) = (n / p, n % p);
        let mut bounds = Vec::with_capacity(p + 1);
        bounds.push(0);
        let mut off = 0;
        for r in 0..p {
            off += q + usize::from(r < rem);
            bounds.push(off);
        }
        Partition { bounds }
    }

    pub fn extent(&self) -> usize {
        *self.bounds.last().unwrap()
    }

    pub fn ranks(&self) -> usize {
        self.bounds.len() - 1
    }

    /// `p + 1` nondecreasing offsets starting at 0 and ending at the extent.
    pub fn boundaries(&self) -> &[usize] {
        &self.bounds
    }

    pub fn range(&self, rank: usize) -> Range<usize> {
        self.bounds[rank]..self.bounds[rank + 1]
    }

    pub fn len_of(&self, rank: usize) -> usize {
        self.bounds[rank + 1] - self.bounds[rank]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Block sizes scaled by `factor` (elements per index along the split
    /// dimension), as used for gather/scatter counts.
    pub fn counts(&self, factor: usize) -> Vec<usize> {
        self.bounds.windows(2).map(|w| (w[1] - w[0]) * factor).collect()
    }

    /// Rank owning global index `i`.
    pub fn owner(&self, i: usize) -> usize {
        assert!(i < self.extent(), "index {i} outside extent {}", self.extent());
        // first boundary strictly greater than i, minus one
        self.bounds.partition_point(|&b| b <= i) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seven_over_four() {
        assert_eq!(Partition::new(7, 4).sizes(), vec![2, 2, 2, 1]);
    }

    #[test]
    fn four_over_four() {
        assert_eq!(Partition::new(4, 4).sizes(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn empty_blocks() {
        let p = Partition::new(2, 4);
        assert_eq!(p.sizes(), vec![1, 1, 0, 0]);
        assert_eq!(p.range(3), 2..2);
        assert_eq!(p.boundaries(), &[0, 1, 2, 2, 2]);
    }

    #[test]
    fn owner_skips_empty_blocks() {
        let p = Partition::new(2, 4);
        assert_eq!(p.owner(0), 0);
        assert_eq!(p.owner(1), 1);
        let p = Partition::new(7, 4);
        assert_eq!(
            (0..7).map(|i| p.owner(i)).collect::<Vec<_>>(),
            vec![0, 0, 1, 1, 2, 2, 3]
        );
    }

    proptest! {
        #[test]
        fn blocks_cover_and_balance(n in 0usize..200, p in 1usize..17) {
            let part = Partition::new(n, p);
            let sizes = part.sizes();
            prop_assert_eq!(sizes.len(), p);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            // larger blocks come first
            prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(part.boundaries()[0], 0);
            prop_assert_eq!(part.extent(), n);
        }
    }
}
