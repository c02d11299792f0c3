//! Quantized ReLU approximants `Σ_n h(f(n/N)) φ(Nx − n)` of Lipschitz
//! functions on `[0,1]^m`, the McShane extension, and Lipschitz estimation.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use num_traits::Signed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwl::network_to_pwl;
use crate::relu_net::{compose_affine, compose_with_relu, parallelize_shared, AffineLayer, ReluNetwork};
use crate::scalar::{int, Rational, Scalar};
use crate::spike::scaled_spike_core;

/// Relative slack when validating declared Lipschitz constants on samples.
const LIP_TOL: f64 = 1e-12;

/// Finite sample of a Lipschitz map `A → ℝⁿ` with declared constants.
/// Lipschitz constants use the sup norm on inputs and outputs.
#[derive(Clone, Debug)]
pub struct LipschitzSample {
    points: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    lip: f64,
    sup_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleMeta {
    pub lip: f64,
    pub sup_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

impl LipschitzSample {
    /// Validates dimensions, the sup-norm bound and pairwise Lipschitz
    /// consistency.
    pub fn new(points: Vec<Vec<f64>>, values: Vec<Vec<f64>>, lip: f64, sup_norm: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("sample has no points".into()));
        }
        if points.len() != values.len() {
            return Err(Error::dims("sample values", points.len(), values.len()));
        }
        if !(lip >= 0.0 && lip.is_finite() && sup_norm >= 0.0 && sup_norm.is_finite()) {
            return Err(Error::InvalidArgument(
                "lip and sup_norm must be finite and nonnegative".into(),
            ));
        }
        let m = points[0].len();
        let n = values[0].len();
        if m == 0 || n == 0 {
            return Err(Error::InvalidDimension(
                "sample points and values must be nonempty vectors".into(),
            ));
        }
        for (p, v) in points.iter().zip(&values) {
            if p.len() != m {
                return Err(Error::dims("sample point", m, p.len()));
            }
            if v.len() != n {
                return Err(Error::dims("sample value", n, v.len()));
            }
            if let Some(bad) = v.iter().find(|y| y.abs() > sup_norm * (1.0 + LIP_TOL)) {
                return Err(Error::InvalidArgument(format!(
                    "value {bad} at {p:?} exceeds declared sup_norm {sup_norm}"
                )));
            }
        }
        let violation = (0..points.len()).into_par_iter().find_map_any(|i| {
            (i + 1..points.len()).find_map(|j| {
                let dx = sup_dist(&points[i], &points[j]);
                let dy = sup_dist(&values[i], &values[j]);
                (dy > lip * dx * (1.0 + LIP_TOL) + 1e-15).then_some((i, j, dy / dx))
            })
        });
        if let Some((i, j, ratio)) = violation {
            return Err(Error::InvalidArgument(format!(
                "points {i} and {j} have difference quotient {ratio} above declared lip {lip}"
            )));
        }
        Ok(LipschitzSample {
            points,
            values,
            lip,
            sup_norm,
        })
    }

    /// Scalar-valued convenience constructor.
    pub fn scalar(points: Vec<Vec<f64>>, values: Vec<f64>, lip: f64, sup_norm: f64) -> Result<Self> {
        Self::new(points, values.into_iter().map(|v| vec![v]).collect(), lip, sup_norm)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn input_dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.values[0].len()
    }

    /// Sup-norm diameter of the sample points.
    pub fn diameter(&self) -> f64 {
        let m = self.input_dim();
        (0..m)
            .map(|c| {
                let (lo, hi) = self
                    .points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[c]), hi.max(p[c]))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Reads `x1,…,xm,y1,…,yn` rows (with a header line) plus the metadata
    /// sidecar JSON. Without `input_dim` in the metadata the last column is
    /// the only value.
    pub fn load(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta: SampleMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(csv_path)?;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let nums: Vec<f64> = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    offset: record.position().map(|p| p.byte() as usize).unwrap_or(0),
                    message: format!("row {}: {e}", line + 1),
                })?;
            let m = meta.input_dim.unwrap_or(nums.len().saturating_sub(1));
            if m == 0 || nums.len() <= m {
                return Err(Error::InvalidDimension(format!(
                    "row {} needs at least one coordinate and a value",
                    line + 1
                )));
            }
            let (x, v) = nums.split_at(m);
            points.push(x.to_vec());
            values.push(v.to_vec());
        }
        Self::new(points, values, meta.lip, meta.sup_norm)
    }

    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        let m = self.input_dim();
        let mut header: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        if self.output_dim() == 1 {
            header.push("value".into());
        } else {
            header.extend((1..=self.output_dim()).map(|i| format!("y{i}")));
        }
        w.write_record(&header)?;
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:?}")).collect();
            row.extend(v.iter().map(|y| format!("{y:?}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        let meta = SampleMeta {
            lip: self.lip,
            sup_norm: self.sup_norm,
            input_dim: Some(m),
        };
        std::fs::write(meta_path, serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }
}

/// `min_y (f(y) + Lip·‖x − y‖_∞)` for every output coordinate.
pub fn mcshane_extend(sample: &LipschitzSample, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != sample.input_dim() {
        return Err(Error::dims("extension point", sample.input_dim(), x.len()));
    }
    let mut best = vec![f64::INFINITY; sample.output_dim()];
    for (p, v) in sample.points.iter().zip(&sample.values) {
        let d = sample.lip * sup_dist(p, x);
        for (b, y) in best.iter_mut().zip(v) {
            *b = b.min(y + d);
        }
    }
    Ok(best)
}

type SharedFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A target function given as a closure with declared constants.
#[derive(Clone)]
pub struct LipschitzFunction {
    pub dim: usize,
    pub lip: f64,
    pub sup_norm: f64,
    f: SharedFn,
}

impl std::fmt::Debug for LipschitzFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LipschitzFunction")
            .field("dim", &self.dim)
            .field("lip", &self.lip)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

impl LipschitzFunction {
    pub fn new(dim: usize, lip: f64, sup_norm: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        LipschitzFunction {
            dim,
            lip,
            sup_norm,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `[N y] / N` with ties rounded away from zero. The product `N y` is formed
/// exactly, so the result always satisfies `|result − y| ≤ 1/(2N)`.
pub fn quantize_codebook(y: f64, n: u64) -> Result<Rational> {
    if n == 0 {
        return Err(Error::InvalidArgument("resolution N must be positive".into()));
    }
    let exact = Rational::from_float(y).ok_or_else(|| Error::Domain(format!("non-finite value {y}")))?;
    let nn = Rational::from_integer(n.into());
    let q = (exact * nn.clone()).round() / nn.clone();
    if q.abs() > nn {
        return Err(Error::Domain(format!(
            "quantized value {q} of {y} lies outside [−{n}, {n}]"
        )));
    }
    Ok(q)
}

/// `log₂` of the number of codebooks `(2N²+1)^{(N+1)^m}`.
pub fn codebook_log2_count(m: u32, n: u64) -> f64 {
    ((n + 1) as f64).powi(m as i32) * ((2 * n * n + 1) as f64).log2()
}

/// Interpolant network together with the data defining it.
#[derive(Clone, Debug)]
pub struct QuantizedApproximant {
    pub m: usize,
    pub n: u64,
    /// Declared bound on `|h(y) − y|`.
    pub delta: Rational,
    /// Codebook value at every node `n ∈ {0,…,N}^m`.
    pub grid_values: BTreeMap<Vec<usize>, Rational>,
    pub exact: ReluNetwork<Rational>,
    pub net: ReluNetwork<f64>,
}

/// Architecture limits of a quantized approximant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApproximantBounds {
    pub depth: usize,
    pub connectivity: usize,
    pub width: usize,
    pub magnitude: u64,
}

pub fn approximant_bounds(m: usize, n: u64) -> ApproximantBounds {
    let nodes = (n as usize + 1).pow(m as u32);
    ApproximantBounds {
        depth: crate::scalar::ceil_log2(m + 1) + 4,
        connectivity: nodes * (62 * m - 28),
        width: nodes * 6 * m,
        magnitude: n,
    }
}

/// Every multi-index of `{0,…,N}^m` in lexicographic order.
pub fn grid_nodes(m: usize, n: u64) -> Vec<Vec<usize>> {
    let side = n as usize + 1;
    let total = side.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut node = vec![0; m];
            for c in (0..m).rev() {
                node[c] = idx % side;
                idx /= side;
            }
            node
        })
        .collect()
}

/// Builds `Φ = F∘ρ∘P(Φ_{n,N})` with last-layer weights `h(f(n/N))`.
///
/// `h` maps the node value `f(n/N)` to an exact rational; the contract
/// `|h(y) − y| ≤ δ` is probed at every node.
pub fn build_fn(
    m: usize,
    n: u64,
    f: impl Fn(&[f64]) -> f64 + Sync,
    h: impl Fn(f64) -> Result<Rational> + Sync,
    delta: &Rational,
) -> Result<QuantizedApproximant> {
    if m == 0 {
        return Err(Error::InvalidDimension("input dimension must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("resolution N must be positive".into()));
    }
    let nodes = grid_nodes(m, n);
    let values: Vec<Rational> = nodes
        .par_iter()
        .map(|node| {
            let x: Vec<f64> = node.iter().map(|&k| k as f64 / n as f64).collect();
            let y = f(&x);
            let q = h(y)?;
            let exact_y = Rational::from_float(y).ok_or_else(|| Error::Domain(format!("non-finite f({x:?})")))?;
            if (q.clone() - exact_y).abs() > *delta {
                return Err(Error::Contract(format!(
                    "|h({y}) − {y}| exceeds δ = {delta} at node {node:?}"
                )));
            }
            Ok(q)
        })
        .collect::<Result<_>>()?;
    let scale = Rational::from_integer(n.into());
    let cores = nodes
        .par_iter()
        .map(|node| {
            let center: Vec<Rational> = node.iter().map(|&k| int(k as i64)).collect();
            scaled_spike_core(&scale, &center)
        })
        .collect::<Result<Vec<_>>>()?;
    let stacked = parallelize_shared(&cores)?;
    let row = AffineLayer::from_dense(vec![values.clone()], vec![int(0)])?;
    let exact = compose_with_relu(&ReluNetwork::affine(row), &stacked)?;
    let net = exact.to_f64();
    Ok(QuantizedApproximant {
        m,
        n,
        delta: delta.clone(),
        grid_values: nodes.into_iter().zip(values).collect(),
        exact,
        net,
    })
}

/// Identity codebook: node values are used exactly as computed.
pub fn identity_codebook(y: f64) -> Result<Rational> {
    Rational::from_float(y).ok_or_else(|| Error::Domain(format!("non-finite value {y}")))
}

fn check_unit_cube(sample: &LipschitzSample) -> Result<()> {
    for p in sample.points() {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("sample point {p:?} lies outside [0,1]^m")));
        }
    }
    Ok(())
}

fn check_resolution(sup_norm: f64, lip: f64, n: u64) -> Result<()> {
    if sup_norm + lip > n as f64 {
        return Err(Error::Precondition(format!(
            "‖f‖ + Lip(f) = {sup_norm} + {lip} = {} exceeds N = {n}; raise N or rescale f",
            sup_norm + lip
        )));
    }
    Ok(())
}

/// Quantized approximant of a scalar sample on `A ⊆ [0,1]^m`: McShane
/// extension at the grid nodes, rounding to `F_N`, then [`build_fn`].
pub fn build_quantized_approximant(sample: &LipschitzSample, n: u64) -> Result<QuantizedApproximant> {
    if sample.output_dim() != 1 {
        return Err(Error::dims("scalar approximant output", 1, sample.output_dim()));
    }
    check_unit_cube(sample)?;
    check_resolution(sample.sup_norm(), sample.lip(), n)?;
    let delta = Rational::new(1.into(), (2 * n).into());
    build_fn(
        sample.input_dim(),
        n,
        |x| mcshane_extend(sample, x).expect("dimension checked")[0],
        |y| quantize_codebook(y, n),
        &delta,
    )
}

/// Same as [`build_quantized_approximant`] for a closure target on `[0,1]^m`.
pub fn build_quantized_function(f: &LipschitzFunction, n: u64) -> Result<QuantizedApproximant> {
    check_resolution(f.sup_norm, f.lip, n)?;
    let delta = Rational::new(1.into(), (2 * n).into());
    build_fn(f.dim, n, |x| f.eval(x), |y| quantize_codebook(y, n), &delta)
}

/// Vector-valued target: one quantized approximant per output coordinate,
/// stacked on a shared input.
#[derive(Clone, Debug)]
pub struct VectorApproximant {
    pub coordinates: Vec<QuantizedApproximant>,
    pub exact: ReluNetwork<Rational>,
    pub net: ReluNetwork<f64>,
}

pub fn build_vector_approximant(sample: &LipschitzSample, n: u64) -> Result<VectorApproximant> {
    check_unit_cube(sample)?;
    check_resolution(sample.sup_norm(), sample.lip(), n)?;
    let delta = Rational::new(1.into(), (2 * n).into());
    let coordinates = (0..sample.output_dim())
        .map(|c| {
            build_fn(
                sample.input_dim(),
                n,
                |x| mcshane_extend(sample, x).expect("dimension checked")[c],
                |y| quantize_codebook(y, n),
                &delta,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let nets: Vec<_> = coordinates.iter().map(|q| q.exact.clone()).collect();
    let exact = parallelize_shared(&nets)?;
    let net = exact.to_f64();
    Ok(VectorApproximant {
        coordinates,
        exact,
        net,
    })
}

/// `κ(x) = ρ(x) − ρ(x − 1)` per coordinate: clamps inputs to `[0,1]^m`.
pub fn clamp_network<T: Scalar>(m: usize) -> Result<ReluNetwork<T>> {
    let rows = (0..m)
        .flat_map(|i| [vec![(i, T::one())], vec![(i, T::one())]])
        .collect();
    let offset = (0..m).flat_map(|_| [T::zero(), -T::one()]).collect();
    let first = AffineLayer::from_sparse(m, rows, offset)?;
    let second = AffineLayer::from_sparse(
        2 * m,
        (0..m)
            .map(|i| vec![(2 * i, T::one()), (2 * i + 1, -T::one())])
            .collect(),
        vec![T::zero(); m],
    )?;
    ReluNetwork::new(vec![first, second])
}

/// `Φ ∘ κ`, which agrees with `Φ` on `[0,1]^m` and is constant outside
/// along each clamped coordinate.
pub fn clamp_inputs<T: Scalar>(net: &ReluNetwork<T>) -> Result<ReluNetwork<T>> {
    compose_affine(net, &clamp_network(net.input_dim())?)
}

/// Input norm used by the sampled Lipschitz estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputNorm {
    Sup,
    One,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LipschitzMode {
    /// Exact constant from the breakpoints of a one-input network.
    Exact1D,
    /// Maximum difference quotient between neighbouring points of a regular
    /// grid with `resolution` cells per axis; a lower bound on the constant.
    Sampled { resolution: usize, norm: InputNorm },
}

/// Lipschitz estimate of `net` on the box `[lo, hi]`, taken per output
/// coordinate and maximized.
pub fn estimate_lipschitz(net: &ReluNetwork<f64>, lo: &[f64], hi: &[f64], mode: LipschitzMode) -> Result<f64> {
    let m = net.input_dim();
    if lo.len() != m || hi.len() != m {
        return Err(Error::dims("Lipschitz box", m, lo.len().min(hi.len())));
    }
    match mode {
        LipschitzMode::Exact1D => {
            let pieces = network_to_pwl(net)?;
            Ok(pieces
                .iter()
                .map(|p| p.lipschitz_on(&lo[0], &hi[0]))
                .fold(0.0, f64::max))
        }
        LipschitzMode::Sampled { resolution, norm } => {
            let g = resolution.max(1);
            let side = g + 1;
            let total = side.pow(m as u32);
            let coords = |mut idx: usize| -> Vec<usize> {
                let mut c = vec![0; m];
                for d in (0..m).rev() {
                    c[d] = idx % side;
                    idx /= side;
                }
                c
            };
            let point = |c: &[usize]| -> Vec<f64> {
                c.iter()
                    .enumerate()
                    .map(|(d, &k)| lo[d] + (hi[d] - lo[d]) * k as f64 / g as f64)
                    .collect()
            };
            let values: Vec<Vec<f64>> = (0..total)
                .into_par_iter()
                .map(|i| net.evaluate(&point(&coords(i))).expect("dimension checked"))
                .collect();
            // forward half of the neighbour offsets {−1,0,1}^m ∖ {0}
            let offsets: Vec<Vec<i64>> = (0..3usize.pow(m as u32))
                .map(|mut k| {
                    let mut o = vec![0i64; m];
                    for slot in o.iter_mut() {
                        *slot = (k % 3) as i64 - 1;
                        k /= 3;
                    }
                    o
                })
                .filter(|o| o.iter().find(|v| **v != 0).is_some_and(|v| *v > 0))
                .collect();
            let best = (0..total)
                .into_par_iter()
                .map(|i| {
                    let c = coords(i);
                    let x = point(&c);
                    let mut best = 0.0f64;
                    for o in &offsets {
                        let mut nb = Vec::with_capacity(m);
                        for d in 0..m {
                            let v = c[d] as i64 + o[d];
                            if v < 0 || v > g as i64 {
                                break;
                            }
                            nb.push(v as usize);
                        }
                        if nb.len() < m {
                            continue;
                        }
                        let j = nb.iter().fold(0, |acc, &v| acc * side + v);
                        let y = point(&nb);
                        let dx = match norm {
                            InputNorm::Sup => sup_dist(&x, &y),
                            InputNorm::One => x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum(),
                        };
                        if dx > 0.0 {
                            best = best.max(sup_dist(&values[i], &values[j]) / dx);
                        }
                    }
                    best
                })
                .reduce(|| 0.0, f64::max);
            Ok(best)
        }
    }
}

/// Largest `|f(x) − Φ(x)|` over the regular grid with `cells` cells per axis.
pub fn sup_grid_error(approx: &QuantizedApproximant, f: impl Fn(&[f64]) -> f64 + Sync, cells: usize) -> f64 {
    let m = approx.m;
    let nodes = grid_nodes(m, cells as u64);
    nodes
        .par_iter()
        .map(|node| {
            let x: Vec<f64> = node.iter().map(|&k| k as f64 / cells as f64).collect();
            (approx.net.evaluate(&x).expect("dimension checked")[0] - f(&x)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WeightGrid;
    use crate::relu_net::identity_net;
    use crate::scalar::ratio;

    #[test]
    fn mcshane_examples() {
        let s = LipschitzSample::scalar(vec![vec![0.5]], vec![1.0], 2.0, 1.0).unwrap();
        assert!((mcshane_extend(&s, &[0.7]).unwrap()[0] - 1.4).abs() < 1e-12);
        assert_eq!(mcshane_extend(&s, &[0.5]).unwrap()[0], 1.0);
        let flat = LipschitzSample::scalar(vec![vec![0.1], vec![0.9]], vec![0.3, 0.3], 0.0, 1.0).unwrap();
        assert_eq!(mcshane_extend(&flat, &[0.5]).unwrap()[0], 0.3);
    }

    #[test]
    fn sample_validation_rejects_steep_pairs() {
        assert!(LipschitzSample::scalar(vec![vec![0.0], vec![0.1]], vec![0.0, 1.0], 1.0, 1.0).is_err());
        assert!(LipschitzSample::scalar(vec![vec![0.0]], vec![2.0], 1.0, 1.0).is_err());
        assert!(LipschitzSample::scalar(vec![], vec![], 1.0, 1.0).is_err());
    }

    #[test]
    fn codebook_examples() {
        assert_eq!(quantize_codebook(0.234, 10).unwrap(), ratio(1, 5));
        assert_eq!(quantize_codebook(0.75, 4).unwrap(), ratio(3, 4));
        assert_eq!(quantize_codebook(0.375, 4).unwrap(), ratio(1, 2));
        assert_eq!(quantize_codebook(-0.375, 4).unwrap(), ratio(-1, 2));
        assert!(quantize_codebook(5.0, 2).is_err());
    }

    #[test]
    fn constant_function_reproduced() {
        let c = 0.3;
        let delta = int(0);
        let q = build_fn(2, 3, |_| c, identity_codebook, &delta).unwrap();
        for x in [[0.0, 0.0], [0.2, 0.9], [1.0, 0.5]] {
            assert!((q.net.evaluate(&x).unwrap()[0] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_function_interpolated_exactly() {
        let q = build_fn(1, 2, |x| x[0], identity_codebook, &int(0)).unwrap();
        assert_eq!(q.exact.evaluate(&[ratio(1, 4)]).unwrap()[0], ratio(1, 4));
    }

    #[test]
    fn contract_violation_detected() {
        let err = build_fn(1, 2, |x| x[0], |_| Ok(int(3)), &ratio(1, 4)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn tent_example() {
        let pts: Vec<Vec<f64>> = (0..=64).map(|i| vec![i as f64 / 64.0]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| (p[0] - 0.5).abs()).collect();
        let s = LipschitzSample::scalar(pts, vals, 1.0, 0.5).unwrap();
        let q = build_quantized_approximant(&s, 8).unwrap();
        let err = sup_grid_error(&q, |x| (x[0] - 0.5).abs(), 80);
        assert!(err <= 0.1875 + 1e-9, "error {err}");
        let metrics = q.exact.metrics();
        let b = approximant_bounds(1, 8);
        assert!(metrics.depth <= b.depth && metrics.connectivity <= b.connectivity && metrics.width <= b.width);
        assert!(metrics.magnitude <= int(8));
        let grid = WeightGrid::F { n: 8 };
        assert!(q.grid_values.values().all(|v| grid.contains(v)));
        let lip = estimate_lipschitz(&q.net, &[0.0], &[1.0], LipschitzMode::Exact1D).unwrap();
        assert!(lip <= 2.0 + 1e-9);
    }

    #[test]
    fn precondition_reported() {
        let s = LipschitzSample::scalar(vec![vec![0.0], vec![1.0]], vec![0.0, 3.0], 3.0, 3.0).unwrap();
        assert!(matches!(
            build_quantized_approximant(&s, 4),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lipschitz_estimates() {
        let i1 = identity_net::<f64>(1).unwrap();
        assert_eq!(
            estimate_lipschitz(&i1, &[0.0], &[1.0], LipschitzMode::Exact1D).unwrap(),
            1.0
        );
        let tent = crate::spike::scaled_spike_core(&4.0, &[0.0]).unwrap();
        let out = ReluNetwork::affine(AffineLayer::from_dense(vec![vec![1.0]], vec![0.0]).unwrap());
        let phi = compose_with_relu(&out, &tent).unwrap();
        assert_eq!(
            estimate_lipschitz(&phi, &[-1.0], &[1.0], LipschitzMode::Exact1D).unwrap(),
            4.0
        );
    }

    #[test]
    fn clamp_agrees_inside_cube() {
        let i2 = identity_net::<f64>(2).unwrap();
        let c = clamp_inputs(&i2).unwrap();
        assert_eq!(c.evaluate(&[0.25, 0.5]).unwrap(), vec![0.25, 0.5]);
        assert_eq!(c.evaluate(&[-1.0, 3.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn codebook_count() {
        assert!((codebook_log2_count(1, 2) - 3.0 * 9f64.log2()).abs() < 1e-12);
    }
}
