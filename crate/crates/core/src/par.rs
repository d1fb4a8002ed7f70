use rayon::prelude::*;

/// Rows are farmed out to the rayon pool once a call touches this many cells.
const PAR_CELLS: usize = 16_384;

/// Maps `f` over row indices `0..n`, in parallel for large problems. The
/// output is always in row order, so reductions over it stay deterministic
/// regardless of the number of workers.
pub(crate) fn map_rows<T, F>(n: usize, cells_per_row: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if n.saturating_mul(cells_per_row) >= PAR_CELLS {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}
