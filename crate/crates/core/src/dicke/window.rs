use std::ops::RangeInclusive;

use crate::{Error, Result};

/// Contiguous interval of Dicke indices kept on one node.
///
/// The half-width is `K = floor(c sqrt(N) / 2)`, i.e. `c` binomial standard
/// deviations of the x-polarised distribution, centred on `floor(N / 2)` and
/// clamped to `[0, N]`. `c = inf` keeps the whole basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationWindow {
    atoms: usize,
    c: f64,
    half_width: usize,
    k_min: usize,
    k_max: usize,
}

impl TruncationWindow {
    pub fn new(atoms: usize, c: f64) -> Result<Self> {
        if atoms == 0 {
            return Err(Error::domain("truncation window needs at least one atom"));
        }
        if c.is_nan() || c <= 0.0 {
            return Err(Error::domain(format!("truncation constant must be positive, got {c}")));
        }
        let raw = (c * (atoms as f64).sqrt() / 2.0).floor();
        let half_width = if raw >= atoms as f64 { atoms } else { raw as usize };
        let center = atoms / 2;
        Ok(TruncationWindow {
            atoms,
            c,
            half_width,
            k_min: center.saturating_sub(half_width),
            k_max: (center + half_width).min(atoms),
        })
    }

    /// The untruncated basis `0..=N`.
    pub fn full(atoms: usize) -> Self {
        TruncationWindow {
            atoms,
            c: f64::INFINITY,
            half_width: atoms,
            k_min: 0,
            k_max: atoms,
        }
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn k_min(&self) -> usize {
        self.k_min
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.k_max - self.k_min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_full(&self) -> bool {
        self.k_min == 0 && self.k_max == self.atoms
    }

    /// True when `k -> N - k` maps the window onto itself.
    pub fn is_reflection_symmetric(&self) -> bool {
        self.k_min + self.k_max == self.atoms
    }

    pub fn contains(&self, k: usize) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    pub fn indices(&self) -> RangeInclusive<usize> {
        self.k_min..=self.k_max
    }

    pub(crate) fn check_atoms(&self, atoms: usize) -> Result<()> {
        if self.atoms != atoms {
            return Err(Error::domain(format!(
                "window built for N = {} used with N = {atoms}",
                self.atoms
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_width_follows_floor_formula() {
        let w = TruncationWindow::new(100, 3.0).unwrap();
        assert_eq!((w.half_width(), w.k_min(), w.k_max(), w.len()), (15, 35, 65, 31));
        let w = TruncationWindow::new(30, 3.0).unwrap();
        assert_eq!((w.half_width(), w.len()), (8, 17));
        let w = TruncationWindow::new(10_000, 3.0).unwrap();
        assert_eq!(w.len(), 301);
        let w = TruncationWindow::new(1_000_000, 3.0).unwrap();
        assert_eq!(w.len(), 3001);
    }

    #[test]
    fn small_n_clamps_to_full_basis() {
        let w = TruncationWindow::new(4, 3.0).unwrap();
        assert_eq!((w.k_min(), w.k_max()), (0, 4));
        assert!(w.is_full());
        assert!(TruncationWindow::new(7, f64::INFINITY).unwrap().is_full());
    }

    #[test]
    fn odd_n_centres_on_floor() {
        let w = TruncationWindow::new(101, 1.0).unwrap();
        assert_eq!((w.half_width(), w.k_min(), w.k_max()), (5, 45, 55));
        assert!(!w.is_reflection_symmetric());
        assert!(TruncationWindow::new(100, 1.0).unwrap().is_reflection_symmetric());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TruncationWindow::new(10, 0.0).is_err());
        assert!(TruncationWindow::new(10, -1.0).is_err());
        assert!(TruncationWindow::new(10, f64::NAN).is_err());
        assert!(TruncationWindow::new(0, 3.0).is_err());
    }
}
