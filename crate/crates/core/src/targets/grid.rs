use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::scalar::Real;

/// Dense per-cell values over a [`GridSpec`], stored row by row
/// (`k` major, `j` minor).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid2D<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> DenseGrid2D<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self::filled(grid, T::zero())
    }

    pub fn filled(grid: GridSpec<T>, value: T) -> Self {
        Self {
            values: vec![value; grid.cell_count()],
            grid,
        }
    }

    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for k in 0..grid.ny() {
            for j in 0..grid.nx() {
                values.push(f(j, k));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    fn index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.grid.nx() && k < self.grid.ny());
        k * self.grid.nx() + j
    }

    pub fn get(&self, j: usize, k: usize) -> T {
        self.values[self.index(j, k)]
    }

    pub fn set(&mut self, j: usize, k: usize, v: T) {
        let i = self.index(j, k);
        self.values[i] = v;
    }

    pub(crate) fn get_mut(&mut self, j: usize, k: usize) -> &mut T {
        let i = self.index(j, k);
        &mut self.values[i]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Row `k` (all `j` for one `y` band).
    pub fn row(&self, k: usize) -> &[T] {
        let nx = self.grid.nx();
        &self.values[k * nx..(k + 1) * nx]
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub(crate) fn same_grid(&self, other: &Self, name: &str) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{name} uses a different grid")));
        }
        Ok(())
    }
}
