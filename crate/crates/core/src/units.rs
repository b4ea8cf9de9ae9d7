//! Physical constants in Hartree atomic units.

use crate::scalar::Real;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT_AU: f64 = 137.035999;

/// Constants entering every kernel. Defaults to atomic units (ħ = e = m = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units<T> {
    pub hbar: T,
    pub charge: T,
    pub mass: T,
    pub c: T,
}

impl<T: Real> Default for Units<T> {
    fn default() -> Self {
        Units {
            hbar: T::one(),
            charge: T::one(),
            mass: T::one(),
            c: T::lit(SPEED_OF_LIGHT_AU),
        }
    }
}

impl<T: Real> Units<T> {
    /// `e/m`, the diamagnetic coefficient multiplying σ·A^inv in the current.
    #[inline]
    pub fn e_over_m(&self) -> T {
        self.charge / self.mass
    }
}
