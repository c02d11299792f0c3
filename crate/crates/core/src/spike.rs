//! The spike function `φ(x) = max{1 + min{x,0} − max{x,0}, 0}` and its exact
//! ReLU realization built from balanced max trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::relu_net::{compose_with_relu, AffineLayer, ReluNetwork};
use crate::scalar::{ceil_log2, Rational, Scalar};

/// Closed form of the spike function.
pub fn spike_value(x: &[f64]) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (1.0 + lo - hi).max(0.0)
}

/// Spike realization `Φ = W₂∘ρ∘Ψ∘ρ∘W₁` with `W₁ = (I_m, −I_m)ᵀ`.
#[derive(Clone, Debug)]
pub struct SpikeNetwork {
    pub m: usize,
    /// Full network `ℝ^m → ℝ`.
    pub net: ReluNetwork<Rational>,
    /// The block `Ψ: ℝ^{2m} → ℝ`, reading `(ρ(x), ρ(−x))` and returning
    /// `1 + min{x,0} − max{x,0}` before the final activation.
    pub inner: ReluNetwork<Rational>,
}

/// Architecture limits a spike network must respect.
pub fn spike_bounds(m: usize) -> (usize, usize, usize) {
    (ceil_log2(m + 1) + 4, 60 * m - 28, 6 * m)
}

// A linear form over the activations of the previous layer.
#[derive(Clone, Debug)]
struct Form {
    terms: Vec<(usize, i64)>,
    is_zero: bool,
}

impl Form {
    fn zero() -> Self {
        Form {
            terms: Vec::new(),
            is_zero: true,
        }
    }

    fn combine(&self, a: i64, other: &Form, b: i64) -> Vec<(usize, i64)> {
        let mut out: Vec<(usize, i64)> = self.terms.iter().map(|(c, v)| (*c, a * v)).collect();
        out.extend(other.terms.iter().map(|(c, v)| (*c, b * v)));
        out
    }

    fn negated(&self) -> Vec<(usize, i64)> {
        self.terms.iter().map(|(c, v)| (*c, -v)).collect()
    }
}

struct LayerBuilder {
    rows: Vec<Vec<(usize, i64)>>,
}

impl LayerBuilder {
    fn unit(&mut self, row: Vec<(usize, i64)>) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }
}

// One level of a max tree: pairs items and returns the forms of their maxima
// over the units of the new layer.
fn max_level(items: &[Form], layer: &mut LayerBuilder) -> Vec<Form> {
    let mut out = Vec::with_capacity(items.len().div_ceil(2));
    for pair in items.chunks(2) {
        match pair {
            [a, b] if b.is_zero => {
                // max(a, 0) = ρ(a)
                let h = layer.unit(a.terms.clone());
                out.push(Form {
                    terms: vec![(h, 1)],
                    is_zero: false,
                });
            }
            [a, b] => {
                // max(a, b) = ρ(a − b) + ρ(b) − ρ(−b)
                let h1 = layer.unit(a.combine(1, b, -1));
                let h2 = layer.unit(b.terms.clone());
                let h3 = layer.unit(b.negated());
                out.push(Form {
                    terms: vec![(h1, 1), (h2, 1), (h3, -1)],
                    is_zero: false,
                });
            }
            [t] if t.is_zero => out.push(Form::zero()),
            [t] => {
                // identity gadget t = ρ(t) − ρ(−t)
                let h1 = layer.unit(t.terms.clone());
                let h2 = layer.unit(t.negated());
                out.push(Form {
                    terms: vec![(h1, 1), (h2, -1)],
                    is_zero: false,
                });
            }
            _ => unreachable!(),
        }
    }
    out
}

fn to_layer<T: Scalar>(cols: usize, rows: Vec<Vec<(usize, i64)>>, offset: Vec<T>) -> Result<AffineLayer<T>> {
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().map(|(c, v)| (c, T::from_i64_value(v))).collect())
        .collect();
    AffineLayer::from_sparse(cols, rows, offset)
}

/// The block `Ψ` over inputs `(p, q) = (ρ(x), ρ(−x))`.
pub fn spike_inner<T: Scalar>(m: usize) -> Result<ReluNetwork<T>> {
    if m == 0 {
        return Err(Error::InvalidDimension("spike needs m ≥ 1".into()));
    }
    let x = |i: usize, sign: i64| Form {
        terms: vec![(i, sign), (m + i, -sign)],
        is_zero: false,
    };
    let mut maxes: Vec<Form> = (0..m).map(|i| x(i, 1)).chain([Form::zero()]).collect();
    // min{x, 0} = −max{−x, 0}
    let mut neg_maxes: Vec<Form> = (0..m).map(|i| x(i, -1)).chain([Form::zero()]).collect();
    let mut layers = Vec::new();
    let mut cols = 2 * m;
    while maxes.len() > 1 {
        let mut builder = LayerBuilder { rows: Vec::new() };
        let next_max = max_level(&maxes, &mut builder);
        let shift = builder.rows.len();
        let mut builder_neg = LayerBuilder { rows: Vec::new() };
        let mut next_neg = max_level(&neg_maxes, &mut builder_neg);
        for f in &mut next_neg {
            for (c, _) in &mut f.terms {
                *c += shift;
            }
        }
        builder.rows.extend(builder_neg.rows);
        let rows = builder.rows.len();
        layers.push(to_layer::<T>(cols, builder.rows, vec![T::zero(); rows])?);
        cols = rows;
        maxes = next_max;
        neg_maxes = next_neg;
    }
    // 1 + min − max = 1 − max{−x,0} − max{x,0}
    let mut last: Vec<(usize, i64)> = maxes[0].negated();
    last.extend(neg_maxes[0].negated());
    layers.push(to_layer::<T>(cols, vec![last], vec![T::one()])?);
    ReluNetwork::new(layers)
}

/// First layer `x ↦ N(x, −x) − (n, −n)` used by the scaled spikes `φ(Nx − n)`.
pub fn scaled_input_layer<T: Scalar>(scale: &T, center: &[T]) -> Result<AffineLayer<T>> {
    let m = center.len();
    let rows = (0..m)
        .map(|i| vec![(i, scale.clone())])
        .chain((0..m).map(|i| vec![(i, -scale.clone())]))
        .collect();
    let offset = center
        .iter()
        .map(|c| -c.clone())
        .chain(center.iter().cloned())
        .collect();
    AffineLayer::from_sparse(m, rows, offset)
}

/// Network computing `1 + min − max` at `N x − n`, i.e. `φ(Nx − n)` after one
/// more activation.
pub fn scaled_spike_core<T: Scalar>(scale: &T, center: &[T]) -> Result<ReluNetwork<T>> {
    let first = ReluNetwork::affine(scaled_input_layer(scale, center)?);
    compose_with_relu(&spike_inner(center.len())?, &first)
}

/// Exact spike network for dimension `m`, with its architecture checked
/// against [`spike_bounds`].
pub fn spike_network(m: usize) -> Result<SpikeNetwork> {
    let inner = spike_inner::<Rational>(m)?;
    let zero = vec![Rational::from_integer(0.into()); m];
    let core = scaled_spike_core(&Rational::from_integer(1.into()), &zero)?;
    let out = ReluNetwork::affine(AffineLayer::from_dense(
        vec![vec![Rational::from_integer(1.into())]],
        vec![Rational::from_integer(0.into())],
    )?);
    let net = compose_with_relu(&out, &core)?;
    let metrics = net.metrics();
    let (l, mm, w) = spike_bounds(m);
    if metrics.depth > l || metrics.connectivity > mm || metrics.width > w {
        return Err(Error::BoundViolation(format!(
            "spike network for m={m}: L={} (≤{l}), M={} (≤{mm}), W={} (≤{w})",
            metrics.depth, metrics.connectivity, metrics.width
        )));
    }
    Ok(SpikeNetwork { m, net, inner })
}

/// `Σ_n φ(Nx − n)` over the lattice points with `Nx − n ∈ (−1,1)^m`.
pub fn partition_sum(x: &[f64], n: u32) -> f64 {
    assert!(n >= 1, "resolution must be positive");
    let scaled: Vec<f64> = x.iter().map(|v| v * n as f64).collect();
    let m = x.len();
    let mut total = 0.0;
    for mask in 0..(1usize << m) {
        let mut point = Vec::with_capacity(m);
        let mut inside = true;
        for (i, &s) in scaled.iter().enumerate() {
            let base = s.floor() + ((mask >> i) & 1) as f64;
            let t = s - base;
            if t.abs() >= 1.0 {
                inside = false;
                break;
            }
            point.push(t);
        }
        if inside {
            total += spike_value(&point);
        }
    }
    total
}

/// Largest observed `|φ(x) − φ(y)| / ‖x − y‖_∞` over random pairs in
/// `[−2, 2]^m`; half the pairs are close neighbours so that local slopes are
/// probed. Identical points are skipped.
pub fn spike_lipschitz_check(m: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for t in 0..trials {
        let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = if t % 2 == 0 {
            (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect()
        } else {
            x.iter().map(|v| v + rng.gen_range(-1e-3..1e-3)).collect()
        };
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if dist == 0.0 {
            continue;
        }
        best = best.max((spike_value(&x) - spike_value(&y)).abs() / dist);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;

    #[test]
    fn closed_form_examples() {
        assert_eq!(spike_value(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(spike_value(&[0.5, 0.0]), 0.5);
        assert_eq!(spike_value(&[1.2, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn one_dimensional_tent() {
        let s = spike_network(1).unwrap();
        assert_eq!(s.net.to_f64().evaluate(&[0.25]).unwrap(), vec![0.75]);
        let metrics = s.net.metrics();
        assert_eq!(metrics.connectivity, 10);
        assert_eq!(metrics.weight_set, vec![int(-1), int(0), int(1)]);
    }

    #[test]
    fn network_matches_closed_form_small_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 1..=5 {
            let net = spike_network(m).unwrap().net.to_f64();
            for _ in 0..300 {
                let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let got = net.evaluate(&x).unwrap()[0];
                assert!((got - spike_value(&x)).abs() <= 1e-12, "m={m} x={x:?}");
            }
        }
    }

    #[test]
    fn bounds_hold_up_to_sixteen() {
        for m in 1..=16 {
            let s = spike_network(m).unwrap();
            let metrics = s.net.metrics();
            let (l, mm, w) = spike_bounds(m);
            assert!(metrics.depth <= l && metrics.connectivity <= mm && metrics.width <= w);
            assert_eq!(metrics.magnitude, int(1));
            assert!(metrics.weight_set.iter().all(|v| *v >= int(-1) && *v <= int(1)));
        }
    }

    #[test]
    fn partition_sum_examples() {
        assert!((partition_sum(&[0.37], 1) - 1.0).abs() < 1e-12);
        assert_eq!(partition_sum(&[0.5, 0.25], 4), 1.0);
        assert!((partition_sum(&[0.11, 0.77], 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_check() {
        assert!(spike_lipschitz_check(1, 2000, 3) <= 1.0 + 1e-9);
        assert!(spike_lipschitz_check(2, 2000, 4) <= 2.0 + 1e-9);
    }

    #[test]
    fn simplex_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = rng.gen_range(1..6);
            let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            x.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!((spike_value(&x) - (1.0 - x[0])).abs() < 1e-12);
            for k in 1..=m {
                let shifted: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if i < k { v - 1.0 } else { *v })
                    .collect();
                let expect = if k < m { x[k - 1] - x[k] } else { x[m - 1] };
                assert!((spike_value(&shifted) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(spike_network(0).is_err());
    }
}
