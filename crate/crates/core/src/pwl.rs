//! Continuous piecewise-linear functions `ℝ → ℝ` with finitely many knots.
//!
//! A [`Pwl`] is affine between consecutive knots and continues with fixed
//! slopes on the two unbounded rays. Every one-input ReLU network is such a
//! function, which gives exact Lipschitz constants and exact preimage
//! measures in one dimension.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::relu_net::ReluNetwork;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Pwl<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    left: T,
    right: T,
}

fn cmp<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("comparable values")
}

impl<T: Scalar> Pwl<T> {
    /// Knots must be strictly increasing and nonempty.
    pub fn new(xs: Vec<T>, ys: Vec<T>, left: T, right: T) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidArgument(
                "knot and value lists must be nonempty and equally long".into(),
            ));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("knots must be strictly increasing".into()));
        }
        Ok(Pwl { xs, ys, left, right })
    }

    /// `x ↦ a x + b`.
    pub fn affine(a: T, b: T) -> Self {
        Pwl {
            xs: vec![T::zero()],
            ys: vec![b],
            left: a.clone(),
            right: a,
        }
    }

    pub fn constant(c: T) -> Self {
        Self::affine(T::zero(), c)
    }

    pub fn knots(&self) -> &[T] {
        &self.xs
    }

    pub fn values(&self) -> &[T] {
        &self.ys
    }

    pub fn left_slope(&self) -> &T {
        &self.left
    }

    pub fn right_slope(&self) -> &T {
        &self.right
    }

    pub fn eval(&self, x: &T) -> T {
        let n = self.xs.len();
        if *x <= self.xs[0] {
            return self.ys[0].clone() + self.left.clone() * (x.clone() - self.xs[0].clone());
        }
        if *x >= self.xs[n - 1] {
            return self.ys[n - 1].clone() + self.right.clone() * (x.clone() - self.xs[n - 1].clone());
        }
        let i = self.xs.partition_point(|k| k <= x) - 1;
        self.interpolate(i, x)
    }

    fn interpolate(&self, i: usize, x: &T) -> T {
        let (x0, x1) = (&self.xs[i], &self.xs[i + 1]);
        let (y0, y1) = (&self.ys[i], &self.ys[i + 1]);
        y0.clone() + (y1.clone() - y0.clone()) * (x.clone() - x0.clone()) / (x1.clone() - x0.clone())
    }

    /// Evaluates at nondecreasing points in one merged sweep.
    pub fn eval_sorted(&self, points: &[T]) -> Vec<T> {
        let n = self.xs.len();
        let mut i = 0;
        points
            .iter()
            .map(|x| {
                if *x <= self.xs[0] || *x >= self.xs[n - 1] {
                    return self.eval(x);
                }
                while self.xs[i + 1] <= *x {
                    i += 1;
                }
                self.interpolate(i, x)
            })
            .collect()
    }

    /// Slope on `[xs[i], xs[i+1]]`.
    pub fn segment_slope(&self, i: usize) -> T {
        (self.ys[i + 1].clone() - self.ys[i].clone()) / (self.xs[i + 1].clone() - self.xs[i].clone())
    }

    /// `ρ ∘ self`.
    pub fn relu(&self) -> Self {
        let zero = T::zero();
        let mut xs = Vec::with_capacity(self.xs.len() + 2);
        let mut ys = Vec::with_capacity(self.xs.len() + 2);
        let n = self.xs.len();
        // zero crossing on the left ray
        if !self.left.is_zero() {
            let root = self.xs[0].clone() - self.ys[0].clone() / self.left.clone();
            if root < self.xs[0] {
                xs.push(root);
                ys.push(zero.clone());
            }
        }
        for i in 0..n {
            xs.push(self.xs[i].clone());
            ys.push(self.ys[i].relu());
            if i + 1 < n {
                let (y0, y1) = (&self.ys[i], &self.ys[i + 1]);
                if (*y0 < zero && *y1 > zero) || (*y0 > zero && *y1 < zero) {
                    let t = y0.clone() / (y0.clone() - y1.clone());
                    let root = self.xs[i].clone() + t * (self.xs[i + 1].clone() - self.xs[i].clone());
                    if root > self.xs[i] && root < self.xs[i + 1] {
                        xs.push(root);
                        ys.push(zero.clone());
                    }
                }
            }
        }
        if !self.right.is_zero() {
            let root = self.xs[n - 1].clone() - self.ys[n - 1].clone() / self.right.clone();
            if root > self.xs[n - 1] {
                xs.push(root);
                ys.push(zero.clone());
            }
        }
        // far-left values are positive iff the left slope is negative
        let left = if self.left < zero {
            self.left.clone()
        } else {
            zero.clone()
        };
        let right = if self.right > zero { self.right.clone() } else { zero };
        Pwl { xs, ys, left, right }.simplify()
    }

    /// `c + Σ aᵢ fᵢ`.
    pub fn linear_combination(terms: &[(T, &Pwl<T>)], constant: T) -> Self {
        if terms.is_empty() {
            return Self::constant(constant);
        }
        let mut xs: Vec<T> = terms.iter().flat_map(|(_, f)| f.xs.iter().cloned()).collect();
        xs.sort_by(cmp);
        xs.dedup();
        let mut ys = vec![constant; xs.len()];
        let mut left = T::zero();
        let mut right = T::zero();
        for (a, f) in terms {
            if a.is_zero() {
                continue;
            }
            for (y, v) in ys.iter_mut().zip(f.eval_sorted(&xs)) {
                *y = y.clone() + a.clone() * v;
            }
            left = left + a.clone() * f.left.clone();
            right = right + a.clone() * f.right.clone();
        }
        Pwl { xs, ys, left, right }.simplify()
    }

    pub fn scale(&self, a: &T) -> Self {
        Pwl {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| a.clone() * y.clone()).collect(),
            left: a.clone() * self.left.clone(),
            right: a.clone() * self.right.clone(),
        }
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &Pwl<T>, inner: &Pwl<T>) -> Self {
        let n = inner.xs.len();
        let mut xs: Vec<T> = inner.xs.clone();
        // preimages of the outer knots on each inner piece
        for u in &outer.xs {
            if !inner.left.is_zero() {
                let x = inner.xs[0].clone() + (u.clone() - inner.ys[0].clone()) / inner.left.clone();
                if x < inner.xs[0] {
                    xs.push(x);
                }
            }
            for i in 0..n.saturating_sub(1) {
                let (y0, y1) = (&inner.ys[i], &inner.ys[i + 1]);
                let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
                if u > lo && u < hi {
                    let t = (u.clone() - y0.clone()) / (y1.clone() - y0.clone());
                    let x = inner.xs[i].clone() + t * (inner.xs[i + 1].clone() - inner.xs[i].clone());
                    if x > inner.xs[i] && x < inner.xs[i + 1] {
                        xs.push(x);
                    }
                }
            }
            if !inner.right.is_zero() {
                let x = inner.xs[n - 1].clone() + (u.clone() - inner.ys[n - 1].clone()) / inner.right.clone();
                if x > inner.xs[n - 1] {
                    xs.push(x);
                }
            }
        }
        xs.sort_by(cmp);
        xs.dedup();
        let inner_vals = inner.eval_sorted(&xs);
        let ys: Vec<T> = inner_vals.iter().map(|v| outer.eval(v)).collect();
        let zero = T::zero();
        let left = match cmp(&inner.left, &zero) {
            Ordering::Equal => zero.clone(),
            // x → −∞ sends a positive-slope inner map to −∞
            Ordering::Greater => inner.left.clone() * outer.left.clone(),
            Ordering::Less => inner.left.clone() * outer.right.clone(),
        };
        let right = match cmp(&inner.right, &zero) {
            Ordering::Equal => zero,
            Ordering::Greater => inner.right.clone() * outer.right.clone(),
            Ordering::Less => inner.right.clone() * outer.left.clone(),
        };
        Pwl { xs, ys, left, right }.simplify()
    }

    /// Same values on `[lo, hi]` with `lo` and `hi` as knots; outside the
    /// interval the end pieces are continued.
    pub fn restrict(&self, lo: &T, hi: &T) -> Self {
        assert!(lo < hi, "empty restriction interval");
        let mut xs = vec![lo.clone()];
        xs.extend(self.xs.iter().filter(|x| *x > lo && *x < hi).cloned());
        xs.push(hi.clone());
        let ys = self.eval_sorted(&xs);
        let mut out = Pwl {
            xs,
            ys,
            left: T::zero(),
            right: T::zero(),
        };
        out.left = out.segment_slope(0);
        out.right = out.segment_slope(out.xs.len() - 2);
        out
    }

    /// Drops knots where the slope does not change (exact comparison).
    pub fn simplify(mut self) -> Self {
        if self.xs.len() <= 1 {
            return self;
        }
        let n = self.xs.len();
        let mut slopes = Vec::with_capacity(n + 1);
        slopes.push(self.left.clone());
        for i in 0..n - 1 {
            slopes.push(self.segment_slope(i));
        }
        slopes.push(self.right.clone());
        let keep: Vec<bool> = (0..n).map(|i| slopes[i] != slopes[i + 1]).collect();
        if keep.iter().all(|k| *k) {
            return self;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
            xs.push(self.xs[i].clone());
            ys.push(self.ys[i].clone());
        }
        if xs.is_empty() {
            // globally affine; keep one anchor
            xs.push(self.xs[0].clone());
            ys.push(self.ys[0].clone());
        }
        self.xs = xs;
        self.ys = ys;
        self
    }

    /// All slopes of the function, rays included.
    pub fn slopes(&self) -> Vec<T> {
        let mut out = vec![self.left.clone()];
        out.extend((0..self.xs.len() - 1).map(|i| self.segment_slope(i)));
        out.push(self.right.clone());
        out
    }

    /// Exact Lipschitz constant on `[lo, hi]`.
    pub fn lipschitz_on(&self, lo: &T, hi: &T) -> T {
        self.restrict(lo, hi)
            .slopes()
            .into_iter()
            .map(|s| s.abs())
            .fold(T::zero(), |m, s| if s > m { s } else { m })
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Pwl<U> {
        Pwl {
            xs: self.xs.iter().map(&f).collect(),
            ys: self.ys.iter().map(&f).collect(),
            left: f(&self.left),
            right: f(&self.right),
        }
    }
}

/// Exact piecewise-linear form of every output of a one-input network.
pub fn network_to_pwl<T: Scalar>(net: &ReluNetwork<T>) -> Result<Vec<Pwl<T>>> {
    if net.input_dim() != 1 {
        return Err(Error::dims("piecewise-linear conversion input", 1, net.input_dim()));
    }
    let first = &net.layers()[0];
    let mut units: Vec<Pwl<T>> = (0..first.rows())
        .map(|i| Pwl::affine(first.get(i, 0), first.offset()[i].clone()))
        .collect();
    for layer in &net.layers()[1..] {
        let active: Vec<Pwl<T>> = units.iter().map(Pwl::relu).collect();
        units = (0..layer.rows())
            .map(|i| {
                let terms: Vec<(T, &Pwl<T>)> = layer.row(i).iter().map(|(c, v)| (v.clone(), &active[*c])).collect();
                Pwl::linear_combination(&terms, layer.offset()[i].clone())
            })
            .collect();
    }
    Ok(units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu_net::identity_net;
    use crate::scalar::{int, ratio, Rational};

    fn tent() -> Pwl<Rational> {
        Pwl::new(
            vec![int(-1), int(0), int(1)],
            vec![int(0), int(1), int(0)],
            int(0),
            int(0),
        )
        .unwrap()
    }

    #[test]
    fn evaluation_inside_and_on_rays() {
        let f = Pwl::new(vec![0.0, 1.0], vec![0.0, 2.0], -1.0, 3.0).unwrap();
        assert_eq!(f.eval(&0.5), 1.0);
        assert_eq!(f.eval(&-2.0), 2.0);
        assert_eq!(f.eval(&2.0), 5.0);
        assert_eq!(f.eval_sorted(&[-2.0, 0.5, 2.0]), vec![2.0, 1.0, 5.0]);
    }

    #[test]
    fn relu_inserts_crossings() {
        let f = Pwl::affine(int(2), int(-1));
        let r = f.relu();
        assert_eq!(r.knots(), &[ratio(1, 2)]);
        assert_eq!(r.eval(&int(0)), int(0));
        assert_eq!(r.eval(&int(1)), int(1));
        let g = Pwl::new(vec![int(0), int(1)], vec![int(1), int(-1)], int(0), int(0)).unwrap();
        assert_eq!(g.relu().eval(&ratio(3, 4)), int(0));
        assert_eq!(g.relu().eval(&ratio(1, 4)), ratio(1, 2));
    }

    #[test]
    fn compose_tent_with_itself_gives_w_shape() {
        // g(x) = 2x on [0,1/2], 2−2x on [1/2,1]
        let g = Pwl::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![int(0), int(1), int(0)],
            int(0),
            int(0),
        )
        .unwrap();
        let gg = Pwl::compose(&g, &g);
        assert_eq!(gg.eval(&ratio(3, 8)), ratio(1, 2));
        assert_eq!(gg.eval(&ratio(1, 4)), int(1));
        assert_eq!(gg.knots().len(), 5);
        assert_eq!(gg.lipschitz_on(&int(0), &int(1)), int(4));
    }

    #[test]
    fn linear_combination_and_simplify() {
        let t = tent();
        let zero = Pwl::linear_combination(&[(int(1), &t), (int(-1), &t)], int(0));
        assert_eq!(zero.knots().len(), 1);
        assert_eq!(zero.eval(&ratio(1, 3)), int(0));
    }

    #[test]
    fn network_conversion_matches_evaluation() {
        let i1 = identity_net::<Rational>(1).unwrap();
        let p = network_to_pwl(&i1).unwrap();
        assert_eq!(p[0].eval(&ratio(-7, 3)), ratio(-7, 3));
        assert_eq!(p[0].knots().len(), 1);
        assert_eq!(p[0].lipschitz_on(&int(0), &int(1)), int(1));
    }

    #[test]
    fn restrict_keeps_values() {
        let t = tent();
        let r = t.restrict(&ratio(-1, 2), &ratio(1, 2));
        assert_eq!(r.knots(), &[ratio(-1, 2), int(0), ratio(1, 2)]);
        assert_eq!(r.eval(&ratio(1, 4)), ratio(3, 4));
    }
}
