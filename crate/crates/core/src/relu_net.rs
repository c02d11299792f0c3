//! ReLU networks `W_L ∘ ρ ∘ W_{L−1} ∘ ρ ⋯ ρ ∘ W_1`, their composition algebra
//! and architecture metrics.
//!
//! Matrices are stored row-sparse: every row keeps its nonzero entries sorted
//! by column. Structural zeros are implicit and still belong to the weight set.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Signed;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Rational, Scalar};

/// Version tag written into every serialized network.
pub const NET_FORMAT: &str = "rectiflow-net-v1";

/// One affine map `x ↦ A x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer<T> {
    cols: usize,
    rows: Vec<Vec<(usize, T)>>,
    offset: Vec<T>,
}

impl<T: Scalar> AffineLayer<T> {
    /// Builds a layer from dense rows. Zero entries are dropped from storage.
    pub fn from_dense(matrix: Vec<Vec<T>>, offset: Vec<T>) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::InvalidDimension("layer with zero rows".into()));
        }
        let cols = matrix[0].len();
        if cols == 0 {
            return Err(Error::InvalidDimension("layer with zero columns".into()));
        }
        if offset.len() != matrix.len() {
            return Err(Error::dims("layer offset", matrix.len(), offset.len()));
        }
        let mut rows = Vec::with_capacity(matrix.len());
        for row in matrix {
            if row.len() != cols {
                return Err(Error::dims("layer row", cols, row.len()));
            }
            rows.push(row.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect());
        }
        Ok(AffineLayer { cols, rows, offset })
    }

    /// Builds a layer from per-row `(column, value)` lists. Entries may come in
    /// any order; duplicates are summed and zeros dropped.
    pub fn from_sparse(cols: usize, rows: Vec<Vec<(usize, T)>>, offset: Vec<T>) -> Result<Self> {
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidDimension("empty layer".into()));
        }
        if offset.len() != rows.len() {
            return Err(Error::dims("layer offset", rows.len(), offset.len()));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for row in rows {
            let mut acc: BTreeMap<usize, T> = BTreeMap::new();
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::InvalidArgument(format!(
                        "column {c} out of range for a layer with {cols} inputs"
                    )));
                }
                let e = acc.entry(c).or_insert_with(T::zero);
                *e = e.clone() + v;
            }
            clean.push(acc.into_iter().filter(|(_, v)| !v.is_zero()).collect());
        }
        Ok(AffineLayer {
            cols,
            rows: clean,
            offset,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn offset(&self) -> &[T] {
        &self.offset
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |(c, _)| *c)
            .map(|pos| self.rows[i][pos].1.clone())
            .unwrap_or_else(|_| T::zero())
    }

    pub fn dense_matrix(&self) -> Vec<Vec<T>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![T::zero(); self.cols];
                for (c, v) in row {
                    dense[*c] = v.clone();
                }
                dense
            })
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| {
                let mut acc = b.clone();
                for (c, v) in row {
                    acc = acc + v.clone() * x[*c].clone();
                }
                acc
            })
            .collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> AffineLayer<U> {
        AffineLayer {
            cols: self.cols,
            rows: self
                .rows
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|(c, v)| (*c, f(v)))
                        .filter(|(_, v)| !v.is_zero())
                        .collect()
                })
                .collect(),
            offset: self.offset.iter().map(&f).collect(),
        }
    }

    /// `self ∘ inner` as a single affine map.
    pub fn after(&self, inner: &AffineLayer<T>) -> Result<AffineLayer<T>> {
        if self.cols != inner.rows() {
            return Err(Error::dims("affine merge", self.cols, inner.rows()));
        }
        let mut rows = Vec::with_capacity(self.rows());
        let mut offset = Vec::with_capacity(self.rows());
        for (row, b) in self.rows.iter().zip(&self.offset) {
            let mut acc: BTreeMap<usize, T> = BTreeMap::new();
            let mut off = b.clone();
            for (k, a) in row {
                for (c, v) in inner.row(*k) {
                    let e = acc.entry(*c).or_insert_with(T::zero);
                    *e = e.clone() + a.clone() * v.clone();
                }
                off = off + a.clone() * inner.offset[*k].clone();
            }
            rows.push(acc.into_iter().collect());
            offset.push(off);
        }
        AffineLayer::from_sparse(inner.cols, rows, offset)
    }
}

/// Feed-forward ReLU network with at least one affine layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork<T> {
    layers: Vec<AffineLayer<T>>,
}

/// Architecture quantities of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkMetrics<T> {
    /// Number of affine layers `L`.
    pub depth: usize,
    /// Nonzero entries over all matrices and offsets.
    pub connectivity: usize,
    /// Largest of `N_0, …, N_L`.
    pub width: usize,
    /// Every value appearing as a matrix or offset entry, zeros included,
    /// sorted ascending without duplicates.
    pub weight_set: Vec<T>,
    /// Largest absolute weight.
    pub magnitude: T,
}

/// How [`ReluNetwork::pad_depth`] extends a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadMode {
    /// Append `1∘ρ` layers. Only valid where every output is nonnegative.
    NonNegative,
    /// Append identity gadgets `ρ(t) − ρ(−t)`; valid everywhere.
    IdentityGadget,
}

impl<T: Scalar> ReluNetwork<T> {
    pub fn new(layers: Vec<AffineLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidDimension("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::dims(
                    format!("layer {} input", i + 1),
                    pair[0].rows(),
                    pair[1].cols(),
                ));
            }
        }
        Ok(ReluNetwork { layers })
    }

    /// Single affine layer network.
    pub fn affine(layer: AffineLayer<T>) -> Self {
        ReluNetwork { layers: vec![layer] }
    }

    pub fn layers(&self) -> &[AffineLayer<T>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows()
    }

    /// `W_L(ρ(W_{L−1}(⋯ρ(W_1 x)⋯)))`.
    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("network input", self.input_dim(), x.len()));
        }
        let last = self.layers.len() - 1;
        let mut cur = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            for v in cur.iter_mut() {
                *v = v.relu();
            }
            cur = layer.apply(&cur);
        }
        debug_assert_eq!(cur.len(), self.layers[last].rows());
        Ok(cur)
    }

    /// Pre-activation values of every layer, used for continuity probes.
    pub fn pre_activations(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("network input", self.input_dim(), x.len()));
        }
        let mut out = Vec::with_capacity(self.depth());
        let mut cur = self.layers[0].apply(x);
        out.push(cur.clone());
        for layer in &self.layers[1..] {
            let act: Vec<T> = cur.iter().map(Scalar::relu).collect();
            cur = layer.apply(&act);
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> ReluNetwork<U> {
        ReluNetwork {
            layers: self.layers.iter().map(|l| l.map(&f)).collect(),
        }
    }

    /// Floating point mirror of the network.
    pub fn to_f64(&self) -> ReluNetwork<f64> {
        self.map(Scalar::to_f64)
    }

    pub fn metrics(&self) -> NetworkMetrics<T> {
        let mut connectivity = 0;
        let mut width = self.input_dim();
        let mut values: Vec<T> = Vec::new();
        let mut has_zero = false;
        for layer in &self.layers {
            width = width.max(layer.rows());
            connectivity += layer.nnz();
            if layer.nnz() < layer.rows() * layer.cols() {
                has_zero = true;
            }
            for row in &layer.rows {
                values.extend(row.iter().map(|(_, v)| v.clone()));
            }
            for b in &layer.offset {
                if b.is_zero() {
                    has_zero = true;
                } else {
                    connectivity += 1;
                    values.push(b.clone());
                }
            }
        }
        if has_zero {
            values.push(T::zero());
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("weights are ordered"));
        values.dedup();
        let magnitude = values
            .iter()
            .map(Signed::abs)
            .fold(T::zero(), |m, v| if v > m { v } else { m });
        NetworkMetrics {
            depth: self.depth(),
            connectivity,
            width,
            weight_set: values,
            magnitude,
        }
    }

    /// Extends the network to exactly `target` layers without changing its
    /// values on the declared domain (see [`PadMode`]).
    pub fn pad_depth(&self, target: usize, mode: PadMode) -> Result<Self> {
        let depth = self.depth();
        if target < depth {
            return Err(Error::InvalidArgument(format!(
                "cannot pad a depth-{depth} network down to depth {target}"
            )));
        }
        if target == depth {
            return Ok(self.clone());
        }
        let n = self.output_dim();
        let extra = target - depth;
        let mut layers = self.layers.clone();
        match mode {
            PadMode::NonNegative => {
                for _ in 0..extra {
                    layers.push(identity_layer(n));
                }
            }
            PadMode::IdentityGadget => {
                let last = layers.pop().expect("nonempty");
                let split = split_layer(n);
                layers.push(split.after(&last)?);
                for _ in 1..extra {
                    layers.push(split.after(&merge_layer(n))?);
                }
                layers.push(merge_layer(n));
            }
        }
        ReluNetwork::new(layers)
    }
}

/// `x ↦ x` on `ℝⁿ` as a single layer.
pub fn identity_layer<T: Scalar>(n: usize) -> AffineLayer<T> {
    AffineLayer::from_sparse(n, (0..n).map(|i| vec![(i, T::one())]).collect(), vec![T::zero(); n])
        .expect("valid identity layer")
}

/// `x ↦ (x, −x)`.
fn split_layer<T: Scalar>(n: usize) -> AffineLayer<T> {
    let rows = (0..n)
        .map(|i| vec![(i, T::one())])
        .chain((0..n).map(|i| vec![(i, -T::one())]))
        .collect();
    AffineLayer::from_sparse(n, rows, vec![T::zero(); 2 * n]).expect("valid split layer")
}

/// `(y, z) ↦ y − z`.
fn merge_layer<T: Scalar>(n: usize) -> AffineLayer<T> {
    let rows = (0..n).map(|i| vec![(i, T::one()), (n + i, -T::one())]).collect();
    AffineLayer::from_sparse(2 * n, rows, vec![T::zero(); n]).expect("valid merge layer")
}

/// The identity network `i_m = W₂∘ρ∘W₁` with `W₁ = (I, −I)ᵀ`, `W₂ = (I, −I)`.
pub fn identity_net<T: Scalar>(m: usize) -> Result<ReluNetwork<T>> {
    if m == 0 {
        return Err(Error::InvalidDimension("identity network needs m ≥ 1".into()));
    }
    ReluNetwork::new(vec![split_layer(m), merge_layer(m)])
}

fn check_same_depth<T: Scalar>(nets: &[ReluNetwork<T>]) -> Result<usize> {
    if nets.is_empty() {
        return Err(Error::Empty("no networks to stack".into()));
    }
    let depths: Vec<usize> = nets.iter().map(ReluNetwork::depth).collect();
    if depths.iter().any(|&d| d != depths[0]) {
        return Err(Error::DepthMismatch { depths });
    }
    Ok(depths[0])
}

fn stack<T: Scalar>(nets: &[ReluNetwork<T>], shared_input: bool) -> Result<ReluNetwork<T>> {
    let depth = check_same_depth(nets)?;
    if shared_input {
        let m = nets[0].input_dim();
        if let Some(bad) = nets.iter().find(|n| n.input_dim() != m) {
            return Err(Error::dims("shared network input", m, bad.input_dim()));
        }
    }
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let mut rows = Vec::new();
        let mut offset = Vec::new();
        let mut col_base = 0;
        for net in nets {
            let layer = &net.layers[l];
            let base = if l == 0 && shared_input { 0 } else { col_base };
            for i in 0..layer.rows() {
                rows.push(layer.row(i).iter().map(|(c, v)| (c + base, v.clone())).collect());
                offset.push(layer.offset[i].clone());
            }
            col_base += layer.cols();
        }
        let cols = if l == 0 && shared_input {
            nets[0].input_dim()
        } else {
            col_base
        };
        layers.push(AffineLayer::from_sparse(cols, rows, offset)?);
    }
    ReluNetwork::new(layers)
}

/// Block-diagonal stacking: the result maps `(x₁,…,x_ℓ)` to
/// `(Φ₁(x₁),…,Φ_ℓ(x_ℓ))`. All networks must share the same depth.
pub fn parallelize<T: Scalar>(nets: &[ReluNetwork<T>]) -> Result<ReluNetwork<T>> {
    stack(nets, false)
}

/// Like [`parallelize`] but every block reads the same input `x`, giving
/// `x ↦ (Φ₁(x),…,Φ_ℓ(x))`. Connectivity and width are the same as for the
/// block-diagonal version.
pub fn parallelize_shared<T: Scalar>(nets: &[ReluNetwork<T>]) -> Result<ReluNetwork<T>> {
    stack(nets, true)
}

/// `outer ∘ ρ ∘ inner`, of depth `L_outer + L_inner`.
pub fn compose_with_relu<T: Scalar>(outer: &ReluNetwork<T>, inner: &ReluNetwork<T>) -> Result<ReluNetwork<T>> {
    if inner.output_dim() != outer.input_dim() {
        return Err(Error::dims("composition", outer.input_dim(), inner.output_dim()));
    }
    let mut layers = inner.layers.clone();
    layers.extend(outer.layers.iter().cloned());
    ReluNetwork::new(layers)
}

/// `outer ∘ inner` without an activation in between; the last layer of
/// `inner` is merged into the first layer of `outer`.
pub fn compose_affine<T: Scalar>(outer: &ReluNetwork<T>, inner: &ReluNetwork<T>) -> Result<ReluNetwork<T>> {
    if inner.output_dim() != outer.input_dim() {
        return Err(Error::dims("composition", outer.input_dim(), inner.output_dim()));
    }
    let mut layers: Vec<AffineLayer<T>> = inner.layers[..inner.depth() - 1].to_vec();
    layers.push(outer.layers[0].after(&inner.layers[inner.depth() - 1])?);
    layers.extend(outer.layers[1..].iter().cloned());
    ReluNetwork::new(layers)
}

// ---------------------------------------------------------------------------
// Serialization

impl<T: Scalar> ReluNetwork<T> {
    /// Deterministic JSON encoding (`rectiflow-net-v1`). Exact rationals that
    /// are not integers are written as `"p/q"` strings.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("{\"format\":\"");
        out.push_str(NET_FORMAT);
        out.push_str("\",\"input_dim\":");
        out.push_str(&self.input_dim().to_string());
        out.push_str(",\"layers\":[");
        for (li, layer) in self.layers.iter().enumerate() {
            if li > 0 {
                out.push(',');
            }
            out.push_str("{\"matrix\":[");
            for (ri, row) in layer.dense_matrix().iter().enumerate() {
                if ri > 0 {
                    out.push(',');
                }
                out.push('[');
                for (ci, v) in row.iter().enumerate() {
                    if ci > 0 {
                        out.push(',');
                    }
                    out.push_str(&v.to_json().to_string());
                }
                out.push(']');
            }
            out.push_str("],\"offset\":[");
            for (bi, v) in layer.offset.iter().enumerate() {
                if bi > 0 {
                    out.push(',');
                }
                out.push_str(&v.to_json().to_string());
            }
            out.push_str("]}");
        }
        out.push_str("]}");
        out.into_bytes()
    }

    /// Parses the JSON encoding. Errors carry the byte offset of the problem;
    /// no partially built network is ever returned.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let file: NetFile = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        let mut expected_cols = file.input_dim;
        for (li, layer) in file.layers.into_iter().enumerate() {
            let rows: Vec<Vec<T>> = layer
                .matrix
                .into_iter()
                .map(|row| row.into_iter().map(|e| e.into_scalar()).collect())
                .collect();
            let offset: Vec<T> = layer.offset.into_iter().map(|e| e.into_scalar()).collect();
            let ncols = rows.first().map(Vec::len).unwrap_or(0);
            if ncols != expected_cols {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("layer {li} has {ncols} columns, expected {expected_cols}"),
                });
            }
            let layer = AffineLayer::from_dense(rows, offset).map_err(|e| Error::Parse {
                offset: 0,
                message: format!("layer {li}: {e}"),
            })?;
            expected_cols = layer.rows();
            layers.push(layer);
        }
        ReluNetwork::new(layers).map_err(|e| Error::Parse {
            offset: 0,
            message: e.to_string(),
        })
    }
}

fn json_error(bytes: &[u8], e: &serde_json::Error) -> Error {
    // convert serde_json's (line, column) into a byte offset
    let (line, col) = (e.line(), e.column());
    let mut offset = 0usize;
    let mut current = 1usize;
    for (i, b) in bytes.iter().enumerate() {
        if current == line {
            offset = i + col.saturating_sub(1);
            break;
        }
        if *b == b'\n' {
            current += 1;
        }
    }
    if line == 0 {
        offset = bytes.len();
    }
    Error::Parse {
        offset: offset.min(bytes.len()),
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    #[allow(dead_code)]
    format: FormatTag,
    input_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    matrix: Vec<Vec<Entry>>,
    offset: Vec<Entry>,
}

struct FormatTag;

impl<'de> Deserialize<'de> for FormatTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == NET_FORMAT {
            Ok(FormatTag)
        } else {
            Err(de::Error::custom(format!(
                "unsupported format tag {s:?}, expected {NET_FORMAT:?}"
            )))
        }
    }
}

enum Entry {
    Exact(Rational),
    Float(f64),
}

impl Entry {
    fn into_scalar<T: Scalar>(self) -> T {
        match self {
            Entry::Exact(q) => T::from_rational(&q),
            Entry::Float(v) => T::from_f64_value(v),
        }
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct EntryVisitor;
        impl<'de> Visitor<'de> for EntryVisitor {
            type Value = Entry;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a \"p/q\" string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Entry, E> {
                Ok(Entry::Exact(crate::scalar::int(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Entry, E> {
                Ok(Entry::Exact(Rational::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Entry, E> {
                if v.is_finite() {
                    Ok(Entry::Float(v))
                } else {
                    Err(E::custom("non-finite weight"))
                }
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Entry, E> {
                parse_rational(v).map(Entry::Exact).map_err(E::custom)
            }
            fn visit_seq<A: SeqAccess<'de>>(self, _seq: A) -> std::result::Result<Entry, A::Error> {
                Err(de::Error::custom("expected a scalar weight, found an array"))
            }
        }
        d.deserialize_any(EntryVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ratio};

    fn layer(m: Vec<Vec<f64>>, b: Vec<f64>) -> AffineLayer<f64> {
        AffineLayer::from_dense(m, b).unwrap()
    }

    #[test]
    fn identity_net_reproduces_input() {
        let i2 = identity_net::<f64>(2).unwrap();
        assert_eq!(i2.evaluate(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        let i3 = identity_net::<f64>(3).unwrap();
        assert_eq!(i3.evaluate(&[-1.0, 0.0, 2.0]).unwrap(), vec![-1.0, 0.0, 2.0]);
        let i1 = identity_net::<f64>(1).unwrap();
        assert_eq!(i1.evaluate(&[0.7]).unwrap(), vec![0.7]);
        assert!(identity_net::<f64>(0).is_err());
    }

    #[test]
    fn identity_metrics() {
        let m1 = identity_net::<Rational>(1).unwrap().metrics();
        assert_eq!(m1.connectivity, 4);
        assert_eq!(m1.magnitude, int(1));
        let m2 = identity_net::<Rational>(2).unwrap().metrics();
        assert_eq!(m2.width, 4);
        assert_eq!(m2.weight_set, vec![int(-1), int(0), int(1)]);
    }

    #[test]
    fn single_layer_and_hand_evaluation() {
        let id = ReluNetwork::affine(layer(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]));
        assert_eq!(id.evaluate(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let net = ReluNetwork::new(vec![
            layer(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]),
            layer(vec![vec![1.0, -1.0]], vec![0.0]),
        ])
        .unwrap();
        assert_eq!(net.evaluate(&[-5.0]).unwrap(), vec![-5.0]);
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let i2 = identity_net::<f64>(2).unwrap();
        match i2.evaluate(&[1.0]) {
            Err(Error::DimensionMismatch { expected, actual, .. }) => {
                assert_eq!((expected, actual), (2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parallelize_stacks_identities() {
        let i1 = identity_net::<f64>(1).unwrap();
        let p = parallelize(&[i1.clone(), i1.clone()]).unwrap();
        assert_eq!(p.evaluate(&[2.0, 3.0]).unwrap(), vec![2.0, 3.0]);
        let shallow = ReluNetwork::affine(identity_layer::<f64>(1));
        match parallelize(&[i1, shallow]) {
            Err(Error::DepthMismatch { depths }) => assert_eq!(depths, vec![2, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn compose_with_relu_clips_negative_intermediate() {
        let i1 = identity_net::<f64>(1).unwrap();
        let c = compose_with_relu(&i1, &i1).unwrap();
        assert_eq!(c.evaluate(&[5.0]).unwrap(), vec![5.0]);
        assert_eq!(c.evaluate(&[-5.0]).unwrap(), vec![0.0]);
        assert_eq!(c.depth(), 4);
    }

    #[test]
    fn compose_affine_merges_layers() {
        let i1 = identity_net::<f64>(1).unwrap();
        let c = compose_affine(&i1, &i1).unwrap();
        assert_eq!(c.depth(), 3);
        assert_eq!(c.evaluate(&[-5.0]).unwrap(), vec![-5.0]);
    }

    #[test]
    fn pad_depth_preserves_values() {
        let i1 = identity_net::<f64>(1).unwrap();
        assert_eq!(i1.pad_depth(2, PadMode::IdentityGadget).unwrap(), i1);
        let p = i1.pad_depth(4, PadMode::NonNegative).unwrap();
        assert_eq!(p.depth(), 4);
        assert_eq!(p.evaluate(&[0.3]).unwrap(), i1.evaluate(&[0.3]).unwrap());
        let g = i1.pad_depth(5, PadMode::IdentityGadget).unwrap();
        assert_eq!(g.depth(), 5);
        assert_eq!(g.evaluate(&[-0.3]).unwrap(), vec![-0.3]);
        assert!(i1.pad_depth(1, PadMode::NonNegative).is_err());
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let i2 = identity_net::<Rational>(2).unwrap();
        let bytes = i2.to_json_bytes();
        assert_eq!(bytes, i2.to_json_bytes());
        assert_eq!(ReluNetwork::<Rational>::from_json_bytes(&bytes).unwrap(), i2);
        let frac = ReluNetwork::affine(AffineLayer::from_dense(vec![vec![ratio(1, 3)]], vec![ratio(-5, 2)]).unwrap());
        let text = String::from_utf8(frac.to_json_bytes()).unwrap();
        assert!(text.contains("\"1/3\"") && text.contains("\"-5/2\""));
        assert_eq!(ReluNetwork::<Rational>::from_json_bytes(text.as_bytes()).unwrap(), frac);
    }

    #[test]
    fn json_rejects_corruption_with_offset() {
        let i2 = identity_net::<f64>(2).unwrap();
        let text = String::from_utf8(i2.to_json_bytes()).unwrap();
        let corrupted = text.replace(NET_FORMAT, "rectiflow-net-v0");
        match ReluNetwork::<f64>::from_json_bytes(corrupted.as_bytes()) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0 && offset < 40),
            other => panic!("unexpected {other:?}"),
        }
        let truncated = &text.as_bytes()[..text.len() - 5];
        match ReluNetwork::<f64>::from_json_bytes(truncated) {
            Err(Error::Parse { offset, .. }) => assert!(offset >= truncated.len() - 1),
            other => panic!("unexpected {other:?}"),
        }
        let bad_entry = text.replacen("1", "\"1/0\"", 3);
        assert!(matches!(
            ReluNetwork::<f64>::from_json_bytes(bad_entry.as_bytes()),
            Err(Error::Parse { .. })
        ));
    }
}
