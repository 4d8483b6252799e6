use std::io::Write;

use crate::convolution::TimeGrid;
use crate::error::{Error, Result};

/// Nodal solution vectors at time indices `-n_history ..= n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    n_dofs: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: TimeGrid, n_dofs: usize) -> Self {
        let rows = grid.n_history() + grid.n_steps() + 1;
        Self {
            grid,
            n_dofs,
            data: vec![0.0; rows * n_dofs],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn first_index(&self) -> isize {
        -(self.grid.n_history() as isize)
    }

    pub fn last_index(&self) -> isize {
        self.grid.n_steps() as isize
    }

    pub fn time(&self, n: isize) -> f64 {
        self.grid.time(n)
    }

    fn offset(&self, n: isize) -> usize {
        debug_assert!(n >= self.first_index() && n <= self.last_index(), "index {n} out of range");
        (n - self.first_index()) as usize * self.n_dofs
    }

    pub fn state(&self, n: isize) -> &[f64] {
        let o = self.offset(n);
        &self.data[o..o + self.n_dofs]
    }

    pub fn state_mut(&mut self, n: isize) -> &mut [f64] {
        let o = self.offset(n);
        &mut self.data[o..o + self.n_dofs]
    }

    pub fn try_state(&self, n: isize) -> Result<&[f64]> {
        if n < self.first_index() || n > self.last_index() {
            return Err(Error::InsufficientHistory {
                needed: n,
                first: self.first_index(),
                last: self.last_index(),
            });
        }
        Ok(self.state(n))
    }

    /// Copy covering `-n_history ..= n_steps` with fewer steps.
    pub fn truncated(&self, n_steps: usize) -> Result<Trajectory> {
        if n_steps > self.grid.n_steps() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} steps to {n_steps}",
                self.grid.n_steps()
            )));
        }
        let grid = TimeGrid::new(self.grid.dt(), self.grid.n_history(), n_steps)?;
        let rows = grid.n_history() + n_steps + 1;
        Ok(Trajectory {
            grid,
            n_dofs: self.n_dofs,
            data: self.data[..rows * self.n_dofs].to_vec(),
        })
    }

    /// Largest entry-wise difference over the common index range.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        let lo = self.first_index().max(other.first_index());
        let hi = self.last_index().min(other.last_index());
        let mut worst: f64 = 0.0;
        for n in lo..=hi {
            for (a, b) in self.state(n).iter().zip(other.state(n)) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Bitwise equality over the common index range.
    pub fn bitwise_eq_on_common(&self, other: &Trajectory) -> bool {
        let lo = self.first_index().max(other.first_index());
        let hi = self.last_index().min(other.last_index());
        self.n_dofs == other.n_dofs
            && (lo..=hi).all(|n| {
                self.state(n)
                    .iter()
                    .zip(other.state(n))
                    .all(|(a, b)| a.to_bits() == b.to_bits())
            })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// CSV with header `t,x_1,...,x_{n-1}`, history rows included.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.n_dofs {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header}")?;
        for n in self.first_index()..=self.last_index() {
            let mut line = format!("{}", self.time(n));
            for v in self.state(n) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
