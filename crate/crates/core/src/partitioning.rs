//! Equal-size disjoint block partitions of `{0, …, n−1}`.
//!
//! Blocks all have size `⌊n/K⌋`; the `n mod K` leftover indices are dropped.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    n: usize,
    block_size: usize,
    blocks: Vec<Vec<usize>>,
    dropped: Vec<usize>,
    seed: Option<u64>,
}

impl BlockPartition {
    /// Sample size the partition was built for.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks `K`.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// Common block size `B = ⌊n/K⌋`.
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// All indices kept in some block, in block order.
    pub fn kept(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().flatten().copied()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if self.n != len {
            return Err(Error::PartitionMismatch {
                expected: self.n,
                actual: len,
            });
        }
        Ok(())
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidBlockCount { k, n });
    }
    Ok(())
}

/// Cuts `order` into `k` consecutive blocks of size `⌊n/k⌋`.
pub fn partition_from_order(order: Vec<usize>, k: usize) -> Result<BlockPartition> {
    let n = order.len();
    check_k(n, k)?;
    let block_size = n / k;
    let blocks = order.chunks(block_size).take(k).map(<[usize]>::to_vec).collect();
    let dropped = order[k * block_size..].to_vec();
    Ok(BlockPartition {
        n,
        block_size,
        blocks,
        dropped,
        seed: None,
    })
}

/// Block `k` holds `[k·B, (k+1)·B)`.
pub fn partition_contiguous(n: usize, k: usize) -> Result<BlockPartition> {
    check_k(n, k)?;
    partition_from_order((0..n).collect(), k)
}

/// Contiguous cut of a uniformly random permutation of `0..n`.
pub fn partition_random(n: usize, k: usize, seed: u64) -> Result<BlockPartition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = partition_random_with(n, k, &mut rng)?;
    p.seed = Some(seed);
    Ok(p)
}

/// As [`partition_random`], drawing the permutation from `rng`.
pub fn partition_random_with<R: rand::Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<BlockPartition> {
    check_k(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    partition_from_order(order, k)
}

/// `K` pairs of same-rank blocks from independent partitions of two samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalPairing {
    x: BlockPartition,
    y: BlockPartition,
}

impl DiagonalPairing {
    pub fn k(&self) -> usize {
        self.x.k()
    }

    pub fn x_partition(&self) -> &BlockPartition {
        &self.x
    }

    pub fn y_partition(&self) -> &BlockPartition {
        &self.y
    }

    /// Pair `k` is (X-block `k`, Y-block `k`).
    pub fn pairs(&self) -> impl Iterator<Item = (&[usize], &[usize])> + '_ {
        self.x
            .blocks()
            .iter()
            .zip(self.y.blocks())
            .map(|(a, b)| (a.as_slice(), b.as_slice()))
    }
}

/// Diagonal block pairing; contiguous without a seed, random otherwise.
pub fn diagonal_pairing(n: usize, m: usize, k: usize, seed: Option<u64>) -> Result<DiagonalPairing> {
    if k < 1 || k > n.min(m) {
        return Err(Error::InvalidBlockCount { k, n: n.min(m) });
    }
    let (x, y) = match seed {
        None => (partition_contiguous(n, k)?, partition_contiguous(m, k)?),
        Some(s) => (
            partition_random(n, k, derive_seed(s, &[0]))?,
            partition_random(m, k, derive_seed(s, &[1]))?,
        ),
    };
    Ok(DiagonalPairing { x, y })
}
