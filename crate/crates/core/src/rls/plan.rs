use crate::error::{Error, Result};

/// Sliding windows of `q` consecutive blocks advancing by `k` blocks.
///
/// Each slide drops the `k` oldest blocks and appends `k` new ones. When the
/// regular stride would leave trailing blocks uncovered, one extra window of
/// full length `q` is placed flush against the end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub q: usize,
    pub k: usize,
    pub total_blocks: usize,
    /// Inclusive `(start_block, end_block)` pairs in processing order.
    pub windows: Vec<(usize, usize)>,
}

impl WindowPlan {
    pub fn new(total_blocks: usize, q: usize, k: usize) -> Result<Self> {
        if !(1 <= k && k <= q && q <= total_blocks) {
            return Err(Error::invalid(format!(
                "window plan needs 1 <= k <= q <= total_blocks, got k={k}, q={q}, total={total_blocks}"
            )));
        }
        let mut windows: Vec<(usize, usize)> = (0..=total_blocks - q)
            .step_by(k)
            .map(|start| (start, start + q - 1))
            .collect();
        let last_end = windows.last().map(|w| w.1).unwrap_or(0);
        if last_end + 1 < total_blocks {
            windows.push((total_blocks - q, total_blocks - 1));
        }
        Ok(Self {
            q,
            k,
            total_blocks,
            windows,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn blocks_in(&self, window: usize) -> std::ops::RangeInclusive<usize> {
        let (start, end) = self.windows[window];
        start..=end
    }
}

pub fn make_window_plan(total_blocks: usize, q: usize, k: usize) -> Result<WindowPlan> {
    WindowPlan::new(total_blocks, q, k)
}
