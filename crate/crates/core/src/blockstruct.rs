//! Block partitions of the parameter grid `Θ = [A B]ᵀ`.
//!
//! The grid has `n + m` rows and `n` columns. Row blocks are laid out
//! state blocks first, then input blocks, so row block `i < n̄` holds
//! `(A^{(j,i)})ᵀ` and row block `n̄ + l` holds `(B^{(j,l)})ᵀ` for column
//! block `j`. All indices in this module are zero-based.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold below which a block is treated as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionSizes", into = "PartitionSizes")]
pub struct BlockPartition {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionSizes {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
}

impl TryFrom<PartitionSizes> for BlockPartition {
    type Error = Error;

    fn try_from(s: PartitionSizes) -> Result<Self> {
        BlockPartition::from_sizes(s.row_sizes, s.col_sizes)
    }
}

impl From<BlockPartition> for PartitionSizes {
    fn from(p: BlockPartition) -> Self {
        PartitionSizes {
            row_sizes: p.row_sizes,
            col_sizes: p.col_sizes,
        }
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

impl BlockPartition {
    /// Builds a partition from state block sizes `n_1..n_n̄` and input block
    /// sizes `m_1..m_m̄`.
    pub fn new(state_sizes: &[usize], input_sizes: &[usize]) -> Result<Self> {
        let mut rows = state_sizes.to_vec();
        rows.extend_from_slice(input_sizes);
        Self::from_sizes(rows, state_sizes.to_vec())
    }

    /// Every block 1×1.
    pub fn unit(n: usize, m: usize) -> Result<Self> {
        Self::new(&vec![1; n], &vec![1; m])
    }

    /// `agents` state blocks of size `state_size` and as many input blocks
    /// of size `input_size`.
    pub fn uniform(agents: usize, state_size: usize, input_size: usize) -> Result<Self> {
        Self::new(&vec![state_size; agents], &vec![input_size; agents])
    }

    /// Builds a partition from explicit row and column size lists. The first
    /// `col_sizes.len()` row sizes must repeat the column sizes.
    pub fn from_sizes(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Result<Self> {
        if col_sizes.is_empty() {
            return Err(Error::InvalidPartition("no state blocks".into()));
        }
        if row_sizes.len() < col_sizes.len() {
            return Err(Error::InvalidPartition(format!(
                "{} row blocks cannot cover {} state blocks",
                row_sizes.len(),
                col_sizes.len()
            )));
        }
        if row_sizes.iter().chain(&col_sizes).any(|&s| s == 0) {
            return Err(Error::InvalidPartition("block sizes must be positive".into()));
        }
        if row_sizes[..col_sizes.len()] != col_sizes[..] {
            return Err(Error::InvalidPartition(format!(
                "state row blocks {:?} disagree with column blocks {:?}",
                &row_sizes[..col_sizes.len()],
                col_sizes
            )));
        }
        Ok(Self {
            row_offsets: offsets(&row_sizes),
            col_offsets: offsets(&col_sizes),
            row_sizes,
            col_sizes,
        })
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }

    /// n̄
    pub fn n_state_blocks(&self) -> usize {
        self.col_sizes.len()
    }

    /// m̄
    pub fn n_input_blocks(&self) -> usize {
        self.row_sizes.len() - self.col_sizes.len()
    }

    /// n̄ + m̄
    pub fn n_row_blocks(&self) -> usize {
        self.row_sizes.len()
    }

    pub fn n_col_blocks(&self) -> usize {
        self.col_sizes.len()
    }

    pub fn n(&self) -> usize {
        *self.col_offsets.last().unwrap()
    }

    pub fn m(&self) -> usize {
        self.dim() - self.n()
    }

    /// n + m, the row count of the parameter grid.
    pub fn dim(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn total_blocks(&self) -> usize {
        self.n_row_blocks() * self.n_col_blocks()
    }

    pub fn n_max(&self) -> usize {
        self.col_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn m_max(&self) -> usize {
        self.row_sizes[self.n_state_blocks()..]
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn p_max(&self) -> usize {
        self.n_max().max(self.m_max())
    }

    /// Maximum block size `D = p_max · n_max`.
    pub fn max_block_size(&self) -> usize {
        self.p_max() * self.n_max()
    }

    /// `D_j = p_max · n_j`.
    pub fn column_block_size(&self, j: usize) -> usize {
        self.p_max() * self.col_sizes[j]
    }

    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    pub fn col_range(&self, j: usize) -> Range<usize> {
        self.col_offsets[j]..self.col_offsets[j + 1]
    }

    /// Scalar row and column ranges of block `(i, j)`.
    pub fn block_range(&self, i: usize, j: usize) -> Result<(Range<usize>, Range<usize>)> {
        if i >= self.n_row_blocks() || j >= self.n_col_blocks() {
            return Err(Error::BlockIndex {
                row: i,
                col: j,
                rows: self.n_row_blocks(),
                cols: self.n_col_blocks(),
            });
        }
        Ok((self.row_range(i), self.col_range(j)))
    }

    /// Row block containing scalar row `r`.
    pub fn row_block_of(&self, r: usize) -> usize {
        self.row_offsets.partition_point(|&o| o <= r) - 1
    }

    pub fn check_grid(&self, theta: &DMatrix<f64>, context: &'static str) -> Result<()> {
        let expected = (self.dim(), self.n());
        if theta.shape() != expected {
            return Err(Error::Shape {
                context,
                expected,
                found: theta.shape(),
            });
        }
        Ok(())
    }
}

/// Largest absolute entry of block `(i, j)`. Indices must be valid.
pub(crate) fn block_max_abs(theta: &DMatrix<f64>, p: &BlockPartition, i: usize, j: usize) -> f64 {
    let mut m = 0.0f64;
    for c in p.col_range(j) {
        for r in p.row_range(i) {
            m = m.max(theta[(r, c)].abs());
        }
    }
    m
}

/// `‖Θ‖_block`: the sum over all blocks of their max-abs entry.
pub fn block_norm_sum(theta: &DMatrix<f64>, partition: &BlockPartition) -> Result<f64> {
    partition.check_grid(theta, "block_norm_sum")?;
    let mut total = 0.0;
    for j in 0..partition.n_col_blocks() {
        for i in 0..partition.n_row_blocks() {
            total += block_max_abs(theta, partition, i, j);
        }
    }
    Ok(total)
}

/// Boolean mask over the `(n̄+m̄) × n̄` block grid, `true` for nonzero blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSupport {
    rows: usize,
    cols: usize,
    mask: Vec<bool>,
}

impl BlockSupport {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            mask: vec![false; rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            mask: vec![true; rows * cols],
        }
    }

    pub fn for_partition(partition: &BlockPartition) -> Self {
        Self::empty(partition.n_row_blocks(), partition.n_col_blocks())
    }

    /// Builds a mask from row-major nested rows.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged support mask".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            mask: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        self.mask.chunks(self.cols.max(1)).map(<[bool]>::to_vec).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.mask[i * self.cols + j] = value;
    }

    /// `A_j`: nonzero row blocks of column block `j`.
    pub fn active_rows(&self, j: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.get(i, j)).collect()
    }

    /// `A_j^c`.
    pub fn inactive_rows(&self, j: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| !self.get(i, j)).collect()
    }

    /// `k_j`: number of nonzero blocks in column block `j`.
    pub fn k(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, j)).count()
    }

    pub fn k_max(&self) -> usize {
        (0..self.cols).map(|j| self.k(j)).max().unwrap_or(0)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.mask.iter().copied()
    }
}

/// Marks a block nonzero iff its max-abs entry exceeds `zero_tol`.
pub fn support_pattern(
    theta: &DMatrix<f64>,
    partition: &BlockPartition,
    zero_tol: f64,
) -> Result<BlockSupport> {
    partition.check_grid(theta, "support_pattern")?;
    if !(zero_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zero tolerance must be nonnegative, got {zero_tol}"
        )));
    }
    let mut support = BlockSupport::for_partition(partition);
    for j in 0..partition.n_col_blocks() {
        for i in 0..partition.n_row_blocks() {
            support.set(i, j, block_max_abs(theta, partition, i, j) > zero_tol);
        }
    }
    Ok(support)
}
