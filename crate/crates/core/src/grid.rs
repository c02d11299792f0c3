//! Admissible rational weight sets `F_N` and `D_{N,K}`.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::scalar::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightGrid {
    /// `F_N = {k/N : k ∈ ℤ} ∩ [−N, N]`.
    F { n: u64 },
    /// `D_{N,K} = {a/b : |a| ≤ N, 1 ≤ b ≤ NK}`.
    D { n: u64, k: u64 },
}

impl WeightGrid {
    /// Exact membership test. Rationals are kept reduced, so for `D_{N,K}` the
    /// reduced representation is the one with the smallest numerator and
    /// denominator and deciding on it is exact.
    pub fn contains(&self, q: &Rational) -> bool {
        match *self {
            WeightGrid::F { n } => {
                let nn = BigInt::from(n);
                let scaled = q * Rational::from_integer(nn.clone());
                scaled.is_integer() && q.abs() <= Rational::from_integer(nn)
            }
            WeightGrid::D { n, k } => {
                if q.is_zero() {
                    return true;
                }
                q.numer().abs() <= BigInt::from(n) && *q.denom() <= BigInt::from(n) * BigInt::from(k)
            }
        }
    }

    /// Elements of `weights` outside the grid.
    pub fn violations<'a>(&self, weights: &'a [Rational]) -> Vec<&'a Rational> {
        weights.iter().filter(|w| !self.contains(w)).collect()
    }

    pub fn describe(&self) -> String {
        match self {
            WeightGrid::F { n } => format!("F_{n}"),
            WeightGrid::D { n, k } => format!("D_{{{n},{k}}}"),
        }
    }
}
