//! Space-filling transport of Lebesgue measure on `[0,1]` onto uniform
//! mixtures of resolution `K`, and its exact ReLU realization.
//!
//! Coordinate `j` of the refined map is a sum over prefixes
//! `(k₁,…,k_{j−1})` of chains `f̂_j ∘ g_s ∘ L_{k_{j−1}} ∘ ⋯ ∘ f̂₂ ∘ g_s ∘ L_{k₁} ∘ f̃₁`
//! where `f̃₁` and the `f̂_j` are per-prefix CDF inverses, `L_ℓ(x) = Kx − ℓ + 1`
//! and `g_s` is the `s`-fold tent map.

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::checks::Check;
use crate::error::{Error, Result};
use crate::grid::WeightGrid;
use crate::measures::{
    histogram, midpoint_pushforward, mixture_to_discrete, quantize_simplex_exact, rng_from_seed, DiscreteMeasure,
    UniformMixture,
};
use crate::pwl::{network_to_pwl, Pwl};
use crate::relu_net::{compose_with_relu, parallelize_shared, AffineLayer, PadMode, ReluNetwork};
use crate::scalar::{frac, int, rational_to_f64, Rational, Scalar};
use crate::wasserstein::{w1, SolverOptions};
use crate::ExactNet;

// ---------------------------------------------------------------------------
// Sawtooth

/// `g_s(x)`: `0` outside `(0,1)`, otherwise `frac(2ˢx)` when `⌊2ˢx⌋` is even
/// and `1 − frac(2ˢx)` when it is odd.
pub fn sawtooth_value(x: f64, s: u32) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let y = x * (1u64 << s) as f64;
    let f = y.floor();
    let r = y - f;
    if (f as u64).is_multiple_of(2) {
        r
    } else {
        1.0 - r
    }
}

pub fn sawtooth_exact(x: &Rational, s: u32) -> Rational {
    if !x.is_positive() || *x >= Rational::one() {
        return Rational::zero();
    }
    let y = x * Rational::from_integer((1u64 << s).into());
    let f = y.floor();
    let r = &y - &f;
    if f.to_integer().is_even() {
        r
    } else {
        Rational::one() - r
    }
}

/// Hat `h_k` supported on `[(k−1)/2^{s−1}, k/2^{s−1}]` with peak 1; the hats
/// `k = 1,…,2^{s−1}` sum to `g_s`.
pub fn sawtooth_hat(x: f64, k: u32, s: u32) -> f64 {
    let scale = (1u64 << (s - 1)) as f64;
    sawtooth_value(scale * x - (k - 1) as f64, 1)
}

/// `g_s` as a 1→1 network of depth `s+1`, width 3 and `11s−3` nonzero
/// parameters.
pub fn sawtooth_network<T: Scalar>(s: u32) -> Result<ReluNetwork<T>> {
    if s == 0 {
        return Err(Error::InvalidArgument("sawtooth needs s ≥ 1".into()));
    }
    let c = |v: i64| T::from_i64_value(v);
    let offset = vec![c(0), c(-2), c(-2)];
    let first = AffineLayer::from_dense(vec![vec![c(2)], vec![c(4)], vec![c(2)]], offset.clone())?;
    let inner = AffineLayer::from_dense(
        vec![
            vec![c(2), c(-2), c(2)],
            vec![c(4), c(-4), c(4)],
            vec![c(2), c(-2), c(2)],
        ],
        offset,
    )?;
    let last = AffineLayer::from_dense(vec![vec![c(1), c(-1), c(1)]], vec![c(0)])?;
    let mut layers = vec![first];
    layers.extend(std::iter::repeat_n(inner, s as usize - 1));
    layers.push(last);
    ReluNetwork::new(layers)
}

fn sawtooth_pwl(s: u32) -> Pwl<Rational> {
    let teeth = 1usize << s;
    let xs = (0..=teeth).map(|i| frac(i, teeth)).collect();
    let ys = (0..=teeth).map(|i| int((i % 2) as i64)).collect();
    Pwl::new(xs, ys, Rational::zero(), Rational::zero()).expect("increasing knots")
}

/// `Θ_ℓ = V₂∘ρ∘V₁` realizing `L_ℓ(x) = Kx − ℓ + 1`.
pub fn theta_network<T: Scalar>(ell: usize, k: usize) -> Result<ReluNetwork<T>> {
    let kk = <T as Scalar>::from_usize(k);
    let v1 = AffineLayer::from_dense(vec![vec![T::one()], vec![-T::one()]], vec![T::zero(), T::zero()])?;
    let v2 = AffineLayer::from_dense(vec![vec![kk.clone(), -kk]], vec![T::from_i64_value(1 - ell as i64)])?;
    ReluNetwork::new(vec![v1, v2])
}

// ---------------------------------------------------------------------------
// CDF inverses

fn check_cdf_data(b: &[Rational], w: &[Rational], k: usize) -> Result<()> {
    if w.len() != k || b.len() != k + 1 {
        return Err(Error::dims("CDF weights", k, w.len()));
    }
    if let Some(i) = w.iter().position(|x| !x.is_positive()) {
        return Err(Error::ZeroWeight(format!("weight {} is {}", i + 1, w[i])));
    }
    let mut acc = Rational::zero();
    for i in 0..=k {
        if b[i] != acc {
            return Err(Error::InvalidArgument(format!(
                "breakpoint b_{i} = {} is not the partial sum {acc}",
                b[i]
            )));
        }
        if i < k {
            acc += &w[i];
        }
    }
    if !b[k].is_one() {
        return Err(Error::InvalidArgument(format!("weights sum to {}", b[k])));
    }
    Ok(())
}

fn inv_slope(k: usize, w: &Rational) -> Rational {
    Rational::one() / (Rational::from_integer(k.into()) * w)
}

/// One-hidden-layer CDF inverse
/// `x ↦ −ρ(−x) + Σ_{k=0}^{K−1} a_k ρ(x − b_k)` with `a₀ = 1/(Kw₁)` and
/// `a_k = 1/(Kw_{k+1}) − 1/(Kw_k)`.
pub fn cdf_inverse_network<T: Scalar>(b: &[Rational], w: &[Rational], k: usize) -> Result<ReluNetwork<T>> {
    check_cdf_data(b, w, k)?;
    let mut rows = vec![vec![(0, -T::one())], vec![(0, T::one())]];
    let mut offset = vec![T::zero(), T::zero()];
    let mut out = vec![(0, -T::one()), (1, T::from_rational(&inv_slope(k, &w[0])))];
    for i in 1..k {
        rows.push(vec![(0, T::one())]);
        offset.push(T::from_rational(&-b[i].clone()));
        let a = inv_slope(k, &w[i]) - inv_slope(k, &w[i - 1]);
        out.push((i + 1, T::from_rational(&a)));
    }
    let hidden = rows.len();
    ReluNetwork::new(vec![
        AffineLayer::from_sparse(1, rows, offset)?,
        AffineLayer::from_sparse(hidden, vec![out], vec![T::zero()])?,
    ])
}

/// Same function with every slope change split into two units carrying
/// `1/(Kw_{k+1})` and `−1/(Kw_k)`, so that each weight lies in `D_{N,K}`.
pub fn cdf_inverse_split<T: Scalar>(b: &[Rational], w: &[Rational], k: usize) -> Result<ReluNetwork<T>> {
    check_cdf_data(b, w, k)?;
    let mut rows = vec![vec![(0, -T::one())], vec![(0, T::one())]];
    let mut offset = vec![T::zero(), T::zero()];
    let mut out = vec![(0, -T::one()), (1, T::from_rational(&inv_slope(k, &w[0])))];
    for i in 1..k {
        for _ in 0..2 {
            rows.push(vec![(0, T::one())]);
            offset.push(T::from_rational(&-b[i].clone()));
        }
        let r = rows.len();
        out.push((r - 2, T::from_rational(&inv_slope(k, &w[i]))));
        out.push((r - 1, T::from_rational(&-inv_slope(k, &w[i - 1]))));
    }
    let hidden = rows.len();
    ReluNetwork::new(vec![
        AffineLayer::from_sparse(1, rows, offset)?,
        AffineLayer::from_sparse(hidden, vec![out], vec![T::zero()])?,
    ])
}

/// The CDF inverse as an exact piecewise-linear function on `ℝ`.
pub fn cdf_inverse_pwl(b: &[Rational], w: &[Rational], k: usize) -> Result<Pwl<Rational>> {
    check_cdf_data(b, w, k)?;
    let ys = (0..=k).map(|i| frac(i, k)).collect();
    Pwl::new(b.to_vec(), ys, Rational::one(), inv_slope(k, &w[k - 1]))
}

/// Evaluates the CDF inverse given breakpoints and weights, returning the
/// selected interval (1-based, `0` for `x < 0`, `K+1` for `x > 1`).
fn cdf_inverse_eval(b: &[Rational], w: &[Rational], k: usize, x: &Rational) -> Result<(usize, Rational)> {
    let kk = Rational::from_integer(k.into());
    if x.is_negative() {
        return Ok((0, x.clone()));
    }
    if *x > Rational::one() {
        if w[k - 1].is_zero() {
            return Err(Error::Domain(format!("slope beyond 1 undefined: w_{k} = 0")));
        }
        return Ok((k + 1, (x - Rational::one()) / (&kk * &w[k - 1]) + Rational::one()));
    }
    let i = (1..=k).find(|&i| i == k || *x < b[i]).expect("k ≥ 1");
    if w[i - 1].is_zero() {
        return Err(Error::Domain(format!("x = {x} falls in the zero-weight interval {i}")));
    }
    Ok((i, (x - &b[i]) / (&kk * &w[i - 1]) + frac(i, k)))
}

// ---------------------------------------------------------------------------
// Weight tree

/// Marginal and conditional weights of a mixture, indexed by prefixes
/// `(k₁,…,k_j)` (1-based). Level `j` stores `K^j` entries in lexicographic
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalWeightTree {
    d: usize,
    k: usize,
    marginals: Vec<Vec<Rational>>,
    conditionals: Vec<Vec<Option<Vec<Rational>>>>,
    breakpoints: Vec<Vec<Option<Vec<Rational>>>>,
}

impl ConditionalWeightTree {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn flat(&self, prefix: &[usize]) -> usize {
        prefix.iter().fold(0, |acc, &c| acc * self.k + (c - 1))
    }

    /// `w_{(k₁,…,k_j)}`; the empty prefix has weight 1.
    pub fn marginal(&self, prefix: &[usize]) -> &Rational {
        &self.marginals[prefix.len()][self.flat(prefix)]
    }

    /// `(w_{1|p},…,w_{K|p})`, undefined when `w_p = 0`.
    pub fn conditional(&self, prefix: &[usize]) -> Option<&[Rational]> {
        self.conditionals[prefix.len()][self.flat(prefix)].as_deref()
    }

    /// `(b_{0|p},…,b_{K|p})` with `b_{0|p} = 0` and `b_{K|p} = 1`.
    pub fn breakpoints(&self, prefix: &[usize]) -> Option<&[Rational]> {
        self.breakpoints[prefix.len()][self.flat(prefix)].as_deref()
    }

    /// All prefixes of length `len` in lexicographic order.
    pub fn prefixes(&self, len: usize) -> Vec<Vec<usize>> {
        let count = self.k.pow(len as u32);
        (0..count)
            .map(|mut idx| {
                let mut p = vec![0; len];
                for c in (0..len).rev() {
                    p[c] = idx % self.k + 1;
                    idx /= self.k;
                }
                p
            })
            .collect()
    }

    /// Prefixes of length `< d` whose marginal vanishes.
    pub fn zero_prefixes(&self) -> Vec<Vec<usize>> {
        (0..self.d)
            .flat_map(|len| self.prefixes(len))
            .filter(|p| self.marginal(p).is_zero())
            .collect()
    }
}

pub fn build_weight_tree(mix: &UniformMixture) -> Result<ConditionalWeightTree> {
    if !mix.is_exact() {
        return Err(Error::InvalidArgument("mixture weights must sum to exactly 1".into()));
    }
    let (d, k) = (mix.d(), mix.k());
    let mut marginals = vec![Vec::new(); d + 1];
    marginals[d] = mix.weights().to_vec();
    for j in (0..d).rev() {
        let below = &marginals[j + 1];
        marginals[j] = (0..k.pow(j as u32))
            .map(|i| below[i * k..(i + 1) * k].iter().cloned().sum())
            .collect();
    }
    let mut conditionals = Vec::with_capacity(d);
    let mut breakpoints = Vec::with_capacity(d);
    for j in 0..d {
        let mut cond_level = Vec::new();
        let mut bp_level = Vec::new();
        for (i, m) in marginals[j].iter().enumerate() {
            if m.is_zero() {
                cond_level.push(None);
                bp_level.push(None);
                continue;
            }
            let cond: Vec<Rational> = marginals[j + 1][i * k..(i + 1) * k].iter().map(|w| w / m).collect();
            let mut bp = vec![Rational::zero()];
            for c in &cond {
                let next = bp.last().unwrap() + c;
                bp.push(next);
            }
            debug_assert!(bp[k].is_one());
            cond_level.push(Some(cond));
            bp_level.push(Some(bp));
        }
        conditionals.push(cond_level);
        breakpoints.push(bp_level);
    }
    Ok(ConditionalWeightTree {
        d,
        k,
        marginals,
        conditionals,
        breakpoints,
    })
}

fn undefined(prefix: &[usize]) -> Error {
    Error::Domain(format!("conditional weights undefined for zero-mass prefix {prefix:?}"))
}

/// The bijection `f` of `[0,1]^d` with `f(K_k) = J_k`, evaluated exactly.
pub fn transport_map_exact(tree: &ConditionalWeightTree, x: &[Rational]) -> Result<Vec<Rational>> {
    if x.len() != tree.d {
        return Err(Error::dims("transport map input", tree.d, x.len()));
    }
    let (zero, one) = (Rational::zero(), Rational::one());
    let mut prefix = Vec::with_capacity(tree.d);
    let mut out = Vec::with_capacity(tree.d);
    for xj in x {
        if *xj < zero || *xj > one {
            return Err(Error::Domain(format!("point coordinate {xj} outside [0,1]")));
        }
        let w = tree.conditional(&prefix).ok_or_else(|| undefined(&prefix))?;
        let b = tree.breakpoints(&prefix).expect("defined with conditional");
        let (i, y) = cdf_inverse_eval(b, w, tree.k, xj)?;
        prefix.push(i);
        out.push(y);
    }
    Ok(out)
}

fn ell_map(k: usize, ell: usize, x: &Rational) -> Rational {
    Rational::from_integer(k.into()) * x - Rational::from_integer((ell as i64 - 1).into())
}

/// The refined map `f̃^(s)(t)` evaluated through the composition chains.
pub fn refined_map_exact(tree: &ConditionalWeightTree, s: u32, t: &Rational) -> Result<Vec<Rational>> {
    if s == 0 {
        return Err(Error::InvalidArgument("s must be at least 1".into()));
    }
    let k = tree.k;
    let root_w = tree.conditional(&[]).ok_or_else(|| undefined(&[]))?;
    let (_, first) = cdf_inverse_eval(tree.breakpoints(&[]).unwrap(), root_w, k, t)?;
    let mut level = vec![first.clone()];
    let mut out = vec![first];
    for len in 1..tree.d {
        let prefixes = tree.prefixes(len);
        let mut next = Vec::with_capacity(prefixes.len());
        for (idx, p) in prefixes.iter().enumerate() {
            let parent = &level[idx / k];
            let w = tree.conditional(p).ok_or_else(|| undefined(p))?;
            let b = tree.breakpoints(p).unwrap();
            let inner = sawtooth_exact(&ell_map(k, p[len - 1], parent), s);
            next.push(cdf_inverse_eval(b, w, k, &inner)?.1);
        }
        out.push(next.iter().cloned().sum());
        level = next;
    }
    Ok(out)
}

/// Coordinates of `f̃^(s)` as exact piecewise-linear functions on `ℝ`.
/// Requires strictly positive weights.
pub fn refined_map_pwl(tree: &ConditionalWeightTree, s: u32) -> Result<Vec<Pwl<Rational>>> {
    let k = tree.k;
    let g = sawtooth_pwl(s);
    let cdf = |p: &[usize]| -> Result<Pwl<Rational>> {
        let w = tree.conditional(p).ok_or_else(|| undefined(p))?;
        cdf_inverse_pwl(tree.breakpoints(p).unwrap(), w, k)
    };
    let first = cdf(&[])?;
    let mut level = vec![first.clone()];
    let mut out = vec![first];
    for len in 1..tree.d {
        let prefixes = tree.prefixes(len);
        let next = prefixes
            .par_iter()
            .enumerate()
            .map(|(idx, p)| {
                let ell = Pwl::affine(
                    Rational::from_integer(k.into()),
                    Rational::from_integer((1 - p[len - 1] as i64).into()),
                );
                let lifted = Pwl::compose(&ell, &level[idx / k]);
                let toothed = Pwl::compose(&g, &lifted);
                Ok(Pwl::compose(&cdf(p)?, &toothed))
            })
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<(Rational, &Pwl<Rational>)> = next.iter().map(|p| (Rational::one(), p)).collect();
        out.push(Pwl::linear_combination(&terms, Rational::zero()));
        level = next;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Network

/// Realization of `f̃^(s)` for a `(1/N)`-quantized mixture.
#[derive(Clone, Debug)]
pub struct TransportNetwork {
    pub net: ExactNet,
    pub d: usize,
    pub k: usize,
    pub n: u64,
    pub s: u32,
    pub tree: ConditionalWeightTree,
    pub mixture: UniformMixture,
}

/// Closed-form architecture bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportBounds {
    pub depth: usize,
    pub connectivity: f64,
    pub width: usize,
    pub magnitude: u64,
    pub lipschitz: f64,
}

pub fn transport_bounds(d: usize, k: usize, s: u32, n: u64) -> TransportBounds {
    let (df, kf, sf) = (d as f64, k as f64, s as f64);
    TransportBounds {
        depth: 3 + (d - 1) * (5 + s as usize),
        connectivity: 4.0 * df * (2.0 * kf + 3.0 * sf + 4.0) * kf.powi(d as i32) / (kf - 1.0),
        width: 4 * k.pow(d as u32),
        magnitude: n,
        lipschitz: 2f64.powf(sf * (df - 1.0)) * n as f64 / kf,
    }
}

pub fn build_transport_network(mix: &UniformMixture, s: u32) -> Result<TransportNetwork> {
    if s == 0 {
        return Err(Error::InvalidArgument("s must be at least 1".into()));
    }
    let (d, k) = (mix.d(), mix.k());
    if k < 2 {
        return Err(Error::InvalidArgument("resolution K must be at least 2".into()));
    }
    let n = mix
        .resolution_n()
        .ok_or_else(|| Error::Precondition("mixture is not marked as (1/N)-quantized".into()))?;
    let needed = (k.pow(d as u32) as u64).min(4);
    if n < needed {
        return Err(Error::Precondition(format!("N = {n} < min{{K^d, 4}} = {needed}")));
    }
    if let Some(i) = mix.weights().iter().position(Zero::is_zero) {
        return Err(Error::ZeroWeight(format!(
            "cell {:?} has weight 0; the transport map needs positive weights",
            mix.cell_of(i)
        )));
    }
    let tree = build_weight_tree(mix)?;
    let saw = sawtooth_network::<Rational>(s)?;
    let cdf =
        |p: &[usize]| cdf_inverse_split::<Rational>(tree.breakpoints(p).unwrap(), tree.conditional(p).unwrap(), k);

    let target = transport_bounds(d, k, s, n).depth;
    let mut level = vec![cdf(&[])?];
    let mut coords = Vec::with_capacity(d);
    for len in 0..d {
        if len > 0 {
            let prefixes = tree.prefixes(len);
            level = prefixes
                .par_iter()
                .enumerate()
                .map(|(idx, p)| {
                    let theta = theta_network::<Rational>(p[len - 1], k)?;
                    let chain = compose_with_relu(&theta, &level[idx / k])?;
                    let chain = compose_with_relu(&saw, &chain)?;
                    compose_with_relu(&cdf(p)?, &chain)
                })
                .collect::<Result<Vec<_>>>()?;
        }
        let stacked = parallelize_shared(&level)?;
        let ones = ReluNetwork::affine(AffineLayer::from_sparse(
            level.len(),
            vec![(0..level.len()).map(|c| (c, Rational::one())).collect()],
            vec![Rational::zero()],
        )?);
        let summed = compose_with_relu(&ones, &stacked)?;
        coords.push(summed.pad_depth(target, PadMode::NonNegative)?);
    }
    let net = parallelize_shared(&coords)?;
    Ok(TransportNetwork {
        net,
        d,
        k,
        n,
        s,
        tree,
        mixture: mix.clone(),
    })
}

impl TransportNetwork {
    pub fn bounds(&self) -> TransportBounds {
        transport_bounds(self.d, self.k, self.s, self.n)
    }

    pub fn grid(&self) -> WeightGrid {
        WeightGrid::D {
            n: self.n,
            k: self.k as u64,
        }
    }

    /// Exact coordinates of the network on `[0,1]`.
    pub fn coordinate_pwls(&self) -> Result<Vec<Pwl<Rational>>> {
        let (zero, one) = (Rational::zero(), Rational::one());
        Ok(network_to_pwl(&self.net)?
            .into_iter()
            .map(|p| p.restrict(&zero, &one).simplify())
            .collect())
    }

    /// Exact sup-norm Lipschitz constant on `[0,1]`.
    pub fn lipschitz(&self) -> Result<Rational> {
        let (zero, one) = (Rational::zero(), Rational::one());
        Ok(self
            .coordinate_pwls()?
            .iter()
            .map(|p| p.lipschitz_on(&zero, &one))
            .fold(Rational::zero(), |a, b| if b > a { b } else { a }))
    }

    pub fn checks(&self) -> Result<Vec<Check>> {
        let bounds = self.bounds();
        let metrics = self.net.metrics();
        let grid = self.grid();
        let outside = grid.violations(&metrics.weight_set).len();
        let lip = self.lipschitz()?;
        let lip_bound = Rational::from_integer((1u64 << (self.s as usize * (self.d - 1))).into())
            * Rational::new(self.n.into(), self.k.into());
        Ok(vec![
            Check::eq("depth", metrics.depth as f64, bounds.depth as f64),
            Check::le("connectivity", metrics.connectivity as f64, bounds.connectivity),
            Check::le("width", metrics.width as f64, bounds.width as f64),
            Check::eq(format!("weights outside {}", grid.describe()), outside as f64, 0.0),
            Check::decided(
                "magnitude",
                rational_to_f64(&metrics.magnitude),
                bounds.magnitude as f64,
                "<=",
                metrics.magnitude <= Rational::from_integer(self.n.into()),
            ),
            Check::decided(
                "lipschitz",
                rational_to_f64(&lip),
                rational_to_f64(&lip_bound),
                "<=",
                lip <= lip_bound,
            ),
        ])
    }
}

// ---------------------------------------------------------------------------
// Cell masses

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellMassMethod {
    /// Exact propagation of `λ|_[0,1]` through the piecewise-linear curve.
    Exact,
    /// Seeded sampling with a `4σ` binomial tolerance per cell.
    MonteCarlo { samples: usize, seed: u64 },
}

impl CellMassMethod {
    /// Exact for `d ≤ 2`, `10⁶` samples otherwise.
    pub fn default_for(d: usize, seed: u64) -> Self {
        if d <= 2 {
            CellMassMethod::Exact
        } else {
            CellMassMethod::MonteCarlo {
                samples: 1_000_000,
                seed,
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CellRow {
    /// Flat index into the refined grid of side `K·2^{s−1}`, lexicographic.
    pub cell_index: usize,
    pub expected: Rational,
    pub measured: f64,
    /// Present for the exact method.
    pub measured_exact: Option<Rational>,
    pub abs_err: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct CellMassReport {
    pub method: CellMassMethod,
    pub side: usize,
    pub rows: Vec<CellRow>,
    pub total: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

impl CellMassReport {
    /// Writes `cell_index,expected,measured,abs_err`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell_index", "expected", "measured", "abs_err"])?;
        for r in &self.rows {
            w.write_record([
                r.cell_index.to_string(),
                format!("{:?}", rational_to_f64(&r.expected)),
                format!("{:?}", r.measured),
                format!("{:?}", r.abs_err),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn expected_cell_masses(tnet: &TransportNetwork) -> Vec<Rational> {
    let (d, k) = (tnet.d, tnet.k);
    let sub = 1usize << (tnet.s - 1);
    let side = k * sub;
    let denom = Rational::from_integer((sub.pow(d as u32)).into());
    (0..side.pow(d as u32))
        .map(|mut idx| {
            let mut cell = vec![0; d];
            for c in (0..d).rev() {
                cell[c] = (idx % side) / sub + 1;
                idx /= side;
            }
            tnet.mixture.weight(&cell) / &denom
        })
        .collect()
}

/// Compares the push-forward mass of every refined cell
/// `C^{k₁}_{r₁} × ⋯ × C^{k_d}_{r_d}` with `w_k / 2^{d(s−1)}`.
pub fn cell_mass_check(tnet: &TransportNetwork, method: CellMassMethod) -> Result<CellMassReport> {
    let side = tnet.k << (tnet.s - 1);
    let expected = expected_cell_masses(tnet);
    let rows: Vec<CellRow> = match method {
        CellMassMethod::Exact => {
            let measured = exact_cell_masses(&tnet.coordinate_pwls()?, side)?;
            expected
                .into_iter()
                .zip(measured)
                .enumerate()
                .map(|(i, (e, m))| {
                    let err = (&m - &e).abs();
                    CellRow {
                        cell_index: i,
                        measured: rational_to_f64(&m),
                        abs_err: rational_to_f64(&err),
                        expected: e,
                        measured_exact: Some(m),
                        tolerance: 0.0,
                    }
                })
                .collect()
        }
        CellMassMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("sample count must be positive".into()));
            }
            let net = tnet.net.to_f64();
            let mut rng = rng_from_seed(seed);
            let ts: Vec<f64> = (0..samples).map(|_| rng.gen::<f64>()).collect();
            let counts = ts
                .par_chunks(4096)
                .map(|chunk| {
                    let mut local = vec![0usize; expected.len()];
                    for t in chunk {
                        let y = net.evaluate(&[*t])?;
                        let idx = y.iter().fold(0, |acc, v| {
                            let c = ((v * side as f64).floor().max(0.0) as usize).min(side - 1);
                            acc * side + c
                        });
                        local[idx] += 1;
                    }
                    Ok::<_, Error>(local)
                })
                .try_reduce(
                    || vec![0usize; expected.len()],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        Ok(a)
                    },
                )?;
            let nf = samples as f64;
            expected
                .into_iter()
                .zip(counts)
                .enumerate()
                .map(|(i, (e, c))| {
                    let p = rational_to_f64(&e);
                    let m = c as f64 / nf;
                    CellRow {
                        cell_index: i,
                        expected: e,
                        measured: m,
                        measured_exact: None,
                        abs_err: (m - p).abs(),
                        tolerance: 4.0 * (p * (1.0 - p) / nf).sqrt() + 1e-12,
                    }
                })
                .collect()
        }
    };
    let total = rows.iter().map(|r| r.measured).sum();
    let max_abs_err = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
    let passed = rows.iter().all(|r| match &r.measured_exact {
        Some(m) => *m == r.expected,
        None => r.abs_err <= r.tolerance,
    });
    Ok(CellMassReport {
        method,
        side,
        rows,
        total,
        max_abs_err,
        passed,
    })
}

/// Lebesgue measure of the preimage of every cell of the grid with `side`
/// cells per axis under a curve `[0,1] → [0,1]^d` given coordinate-wise.
pub fn exact_cell_masses(curve: &[Pwl<Rational>], side: usize) -> Result<Vec<Rational>> {
    let d = curve.len();
    let (zero, one) = (Rational::zero(), Rational::one());
    let mut knots: Vec<Rational> = vec![zero.clone(), one.clone()];
    for p in curve {
        knots.extend(p.knots().iter().filter(|x| **x > zero && **x < one).cloned());
    }
    knots.sort();
    knots.dedup();
    let values: Vec<Vec<Rational>> = curve.iter().map(|p| p.eval_sorted(&knots)).collect();
    let g = Rational::from_integer(side.into());
    let segments: Vec<usize> = (0..knots.len() - 1).collect();
    let partial = segments
        .par_chunks(64)
        .map(|chunk| {
            let mut mass = vec![Rational::zero(); side.pow(d as u32)];
            for &seg in chunk {
                let (t0, t1) = (&knots[seg], &knots[seg + 1]);
                let dt = t1 - t0;
                let mut cuts = vec![zero.clone(), one.clone()];
                for v in &values {
                    let (y0, y1) = (&v[seg] * &g, &v[seg + 1] * &g);
                    if y0 == y1 {
                        continue;
                    }
                    let (lo, hi) = if y0 < y1 { (&y0, &y1) } else { (&y1, &y0) };
                    let mut level = lo.floor() + Rational::one();
                    while level < *hi {
                        cuts.push((&level - &y0) / (&y1 - &y0));
                        level += Rational::one();
                    }
                }
                cuts.sort();
                cuts.dedup();
                for w in cuts.windows(2) {
                    let mid = (&w[0] + &w[1]) / Rational::from_integer(2.into());
                    let mut idx = 0usize;
                    for v in &values {
                        let y = &v[seg] + (&v[seg + 1] - &v[seg]) * &mid;
                        if y < zero || y > one {
                            return Err(Error::Domain(format!("curve leaves [0,1]^d with coordinate {y}")));
                        }
                        let c = (y * &g).floor().to_integer().to_usize().unwrap_or(side).min(side - 1);
                        idx = idx * side + c;
                    }
                    mass[idx] += (&w[1] - &w[0]) * &dt;
                }
            }
            Ok(mass)
        })
        .try_reduce(
            || vec![Rational::zero(); side.pow(d as u32)],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(partial)
}

// ---------------------------------------------------------------------------
// W₁ certificates

#[derive(Clone, Debug, serde::Serialize)]
pub struct W1Certificate {
    pub measured: f64,
    pub bound: f64,
    /// Discretization error of the push-forward side.
    pub curve_slack: f64,
    /// Discretization error of the reference side (0 for discrete targets).
    pub target_slack: f64,
    pub slack: f64,
    pub curve_atoms: usize,
    pub target_atoms: usize,
    pub holds: bool,
}

fn curve_f64(tnet: &TransportNetwork) -> Result<Vec<Pwl<f64>>> {
    Ok(tnet.coordinate_pwls()?.iter().map(|p| p.map(rational_to_f64)).collect())
}

/// `W₁(f̃^(s)#λ, μ) ≤ 1/(K2^{s−1})`, measured between `atoms` midpoint atoms
/// of the curve and a sub-grid discretization of the mixture.
pub fn w1_certificate(
    tnet: &TransportNetwork,
    atoms: usize,
    points_per_cell: usize,
    opts: SolverOptions,
) -> Result<W1Certificate> {
    let curve = midpoint_pushforward(&curve_f64(tnet)?, atoms)?;
    let target = mixture_to_discrete(&tnet.mixture, points_per_cell)?;
    let measured = w1(&curve.measure, &target.measure, opts)?;
    let bound = 1.0 / (tnet.k as f64 * (1u64 << (tnet.s - 1)) as f64);
    let slack = curve.slack + target.slack;
    Ok(W1Certificate {
        measured,
        bound,
        curve_slack: curve.slack,
        target_slack: target.slack,
        slack,
        curve_atoms: curve.measure.len(),
        target_atoms: target.measure.len(),
        holds: measured <= bound + slack,
    })
}

/// `W₁(μ, net#λ)` against a discrete target with the stated bound.
pub fn w1_against_discrete(
    tnet: &TransportNetwork,
    mu: &DiscreteMeasure,
    atoms: usize,
    bound: f64,
    opts: SolverOptions,
) -> Result<W1Certificate> {
    let curve = midpoint_pushforward(&curve_f64(tnet)?, atoms)?;
    let measured = w1(mu, &curve.measure, opts)?;
    Ok(W1Certificate {
        measured,
        bound,
        curve_slack: curve.slack,
        target_slack: 0.0,
        slack: curve.slack,
        curve_atoms: curve.measure.len(),
        target_atoms: mu.len(),
        holds: measured <= bound + curve.slack,
    })
}

// ---------------------------------------------------------------------------
// Σ: push-forward approximation of arbitrary measures

/// `Φ^{(1)}_{N,K}` for the `(1/N)`-quantized histogram of `μ` with
/// `N = 4K^{d+1}`.
#[derive(Clone, Debug)]
pub struct SigmaNetwork {
    pub transport: TransportNetwork,
}

pub fn sigma_resolution(d: usize, k: usize) -> u64 {
    4 * (k as u64).pow(d as u32 + 1)
}

pub fn build_sigma(mu: &DiscreteMeasure, k: usize) -> Result<SigmaNetwork> {
    if k < 2 {
        return Err(Error::InvalidArgument("K must be at least 2".into()));
    }
    let d = mu.dim();
    let n = sigma_resolution(d, k);
    let hist = histogram(mu, k)?;
    let total: Rational = hist.weights().iter().cloned().sum();
    // Floating point masses may sum to 1 ± ulp; normalize before rounding.
    let normalized: Vec<Rational> = hist.weights().iter().map(|w| w / &total).collect();
    let q = quantize_simplex_exact(&normalized, n)?;
    let mix = UniformMixture::new(d, k, q)?.with_resolution(n)?;
    Ok(SigmaNetwork {
        transport: build_transport_network(&mix, 1)?,
    })
}

/// `log₂` of the bound `(12K)^{K^d}` on the number of candidate networks.
pub fn sigma_log2_count_bound(d: usize, k: usize) -> f64 {
    (k as f64).powi(d as i32) * (12.0 * k as f64).log2()
}

/// `log₂` of the exact number of positive `(1/N)`-quantized weight vectors,
/// `binom(N−1, K^d−1)`, with `N = 4K^{d+1}`.
pub fn sigma_log2_count(d: usize, k: usize) -> f64 {
    let n = sigma_resolution(d, k);
    let cells = (k as u64).pow(d as u32);
    (1..cells).map(|i| ((n - i) as f64 / i as f64).log2()).sum()
}

impl SigmaNetwork {
    pub fn d(&self) -> usize {
        self.transport.d
    }

    pub fn k(&self) -> usize {
        self.transport.k
    }

    pub fn checks(&self) -> Result<Vec<Check>> {
        let (d, k) = (self.d(), self.k());
        let kd = k.pow(d as u32);
        let metrics = self.transport.net.metrics();
        let n = sigma_resolution(d, k);
        let grid = WeightGrid::D { n, k: k as u64 };
        let lip = self.transport.lipschitz()?;
        let lip_bound = Rational::from_integer(((1u64 << (d + 1)) * kd as u64).into());
        Ok(vec![
            Check::eq("depth", metrics.depth as f64, (3 + 6 * (d - 1)) as f64),
            Check::le("connectivity", metrics.connectivity as f64, (44 * d * kd) as f64),
            Check::le("width", metrics.width as f64, (4 * kd) as f64),
            Check::eq(
                format!("weights outside {}", grid.describe()),
                grid.violations(&metrics.weight_set).len() as f64,
                0.0,
            ),
            Check::decided(
                "magnitude",
                rational_to_f64(&metrics.magnitude),
                n as f64,
                "<=",
                metrics.magnitude <= Rational::from_integer(n.into()),
            ),
            Check::decided(
                "lipschitz",
                rational_to_f64(&lip),
                rational_to_f64(&lip_bound),
                "<=",
                lip <= lip_bound,
            ),
            Check::le(
                "log2 candidate count",
                sigma_log2_count(d, k),
                sigma_log2_count_bound(d, k),
            ),
        ])
    }

    /// `W₁(μ, Σ#λ) ≤ 3/K`.
    pub fn w1_certificate(&self, mu: &DiscreteMeasure, atoms: usize, opts: SolverOptions) -> Result<W1Certificate> {
        w1_against_discrete(&self.transport, mu, atoms, 3.0 / self.k() as f64, opts)
    }
}
