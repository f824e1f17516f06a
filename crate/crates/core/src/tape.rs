//! Lazily extended tape of uniforms `U_1, U_2, ...` with per-cell memo slots.
//!
//! Cells are materialized on demand from one seeded generator, so the value at
//! index `n` does not depend on the order in which indices are requested. Each
//! cell carries a few slots caching transforms of its own uniform; under the
//! shift a cell is revisited by many consecutive samples and the slots let
//! those samples skip recomputing e.g. `-ln(1 - u)`.

use std::collections::VecDeque;

use thiserror::Error;

use crate::rng::GeneratorState;

/// Number of memo slots carried by each cell.
pub const MEMO_SLOTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TapeError {
    #[error("cell {index} was reclaimed (window starts at {window_start})")]
    ReclaimedCell { index: u64, window_start: u64 },
    #[error("window cannot move back from {window_start} to {requested}")]
    WindowRegression { requested: u64, window_start: u64 },
    #[error("transform id {0} is outside 0..{MEMO_SLOTS}")]
    InvalidTransform(u8),
    #[error("tape index 0 does not exist; indices are 1-based")]
    ZeroIndex,
}

/// Identifier of a pure transform cached in a memo slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransformId(u8);

impl TransformId {
    pub const fn new(id: u8) -> Result<Self, TapeError> {
        if (id as usize) < MEMO_SLOTS {
            Ok(Self(id))
        } else {
            Err(TapeError::InvalidTransform(id))
        }
    }

    /// Compile-time constructor for the ids used by built-in models.
    pub const fn constant(id: u8) -> Self {
        assert!((id as usize) < MEMO_SLOTS);
        Self(id)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct TapeCell {
    index: u64,
    value: f64,
    present: u8,
    memos: [f64; MEMO_SLOTS],
}

impl TapeCell {
    fn new(index: u64, value: f64) -> Self {
        Self {
            index,
            value,
            present: 0,
            memos: [0.0; MEMO_SLOTS],
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn memo(&self, id: TransformId) -> Option<f64> {
        (self.present & (1 << id.0) != 0).then(|| self.memos[id.0 as usize])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TapeStats {
    pub cells_generated: u64,
    pub memo_hits: u64,
    pub memo_misses: u64,
}

#[derive(Clone, Debug)]
pub struct Tape {
    seed: u64,
    window_start: u64,
    cells: VecDeque<TapeCell>,
    generator: GeneratorState,
    // index of the next cell the generator will produce
    next_index: u64,
    stats: TapeStats,
    memo_enabled: bool,
}

impl Tape {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            window_start: 1,
            cells: VecDeque::new(),
            generator: GeneratorState::from_seed(seed),
            next_index: 1,
            stats: TapeStats::default(),
            memo_enabled: true,
        }
    }

    /// Turns memo slots on or off. With memos off every transform is
    /// evaluated directly and no hit/miss is counted.
    pub fn with_memo(mut self, enabled: bool) -> Self {
        self.memo_enabled = enabled;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn memo_enabled(&self) -> bool {
        self.memo_enabled
    }

    pub fn window_start(&self) -> u64 {
        self.window_start
    }

    /// Highest materialized index, or `window_start - 1` when nothing is retained.
    pub fn high_index(&self) -> u64 {
        self.next_index - 1
    }

    pub fn retained(&self) -> usize {
        self.cells.len()
    }

    pub fn stats(&self) -> TapeStats {
        self.stats
    }

    fn cell_mut(&mut self, index: u64) -> Result<&mut TapeCell, TapeError> {
        if index == 0 {
            return Err(TapeError::ZeroIndex);
        }
        if index < self.window_start {
            return Err(TapeError::ReclaimedCell {
                index,
                window_start: self.window_start,
            });
        }
        while self.next_index <= index {
            let u = self.generator.next_uniform();
            self.stats.cells_generated += 1;
            // cells before the window are generated for stream alignment but not kept
            if self.next_index >= self.window_start {
                self.cells.push_back(TapeCell::new(self.next_index, u));
            }
            self.next_index += 1;
        }
        let offset = (index - self.window_start) as usize;
        Ok(&mut self.cells[offset])
    }

    /// The uniform at 1-based `index`, generating cells as needed.
    pub fn cell_value(&mut self, index: u64) -> Result<f64, TapeError> {
        self.cell_mut(index).map(|c| c.value)
    }

    pub fn cell(&mut self, index: u64) -> Result<&TapeCell, TapeError> {
        self.cell_mut(index).map(|c| &*c)
    }

    /// `f(cell_value(index))`, cached in the cell under `id`.
    ///
    /// `f` must be pure and the same `id` must always be paired with the same
    /// `f`; the cached bits are then identical to direct evaluation.
    pub fn memoized_transform(
        &mut self,
        index: u64,
        id: TransformId,
        f: impl FnOnce(f64) -> f64,
    ) -> Result<f64, TapeError> {
        let memo_enabled = self.memo_enabled;
        let cell = self.cell_mut(index)?;
        if !memo_enabled {
            return Ok(f(cell.value));
        }
        let bit = 1u8 << id.0;
        if cell.present & bit != 0 {
            let v = cell.memos[id.0 as usize];
            self.stats.memo_hits += 1;
            Ok(v)
        } else {
            let v = f(cell.value);
            cell.memos[id.0 as usize] = v;
            cell.present |= bit;
            self.stats.memo_misses += 1;
            Ok(v)
        }
    }

    /// Discards every cell with index below `new_start`.
    pub fn advance_window(&mut self, new_start: u64) -> Result<(), TapeError> {
        if new_start < self.window_start {
            return Err(TapeError::WindowRegression {
                requested: new_start,
                window_start: self.window_start,
            });
        }
        let drop = (new_start - self.window_start).min(self.cells.len() as u64) as usize;
        self.cells.drain(..drop);
        self.window_start = new_start;
        Ok(())
    }

    /// A read cursor whose first cell is `start`.
    pub fn cursor(&mut self, start: u64) -> Result<TapeCursor<'_>, TapeError> {
        if start == 0 {
            return Err(TapeError::ZeroIndex);
        }
        if start < self.window_start {
            return Err(TapeError::ReclaimedCell {
                index: start,
                window_start: self.window_start,
            });
        }
        Ok(TapeCursor {
            tape: self,
            start,
            position: start,
        })
    }
}

/// Sequential reader over a tape, starting at `start`.
///
/// A cursor with `start = k + 1` reads the shifted sequence `θ^k ω`.
#[derive(Debug)]
pub struct TapeCursor<'a> {
    tape: &'a mut Tape,
    start: u64,
    position: u64,
}

impl TapeCursor<'_> {
    pub fn start(&self) -> u64 {
        self.start
    }

    /// Next index to be read.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Number of cells read so far.
    pub fn consumed(&self) -> u64 {
        self.position - self.start
    }

    #[inline]
    pub fn next_uniform(&mut self) -> Result<f64, TapeError> {
        let v = self.tape.cell_value(self.position)?;
        self.position += 1;
        Ok(v)
    }

    #[inline]
    pub fn next_transformed(
        &mut self,
        id: TransformId,
        f: impl FnOnce(f64) -> f64,
    ) -> Result<f64, TapeError> {
        let v = self.tape.memoized_transform(self.position, id, f)?;
        self.position += 1;
        Ok(v)
    }

    /// Two transforms of the same cell, then advances past it.
    pub fn next_transformed_pair(
        &mut self,
        (id_a, fa): (TransformId, impl FnOnce(f64) -> f64),
        (id_b, fb): (TransformId, impl FnOnce(f64) -> f64),
    ) -> Result<(f64, f64), TapeError> {
        let a = self.tape.memoized_transform(self.position, id_a, fa)?;
        let b = self.tape.memoized_transform(self.position, id_b, fb)?;
        self.position += 1;
        Ok((a, b))
    }

    pub fn memo_enabled(&self) -> bool {
        self.tape.memo_enabled
    }
}
