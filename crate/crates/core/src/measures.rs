//! Uniform mixtures of resolution `K`, simplex quantization, discrete
//! measures and their sampling.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwl::Pwl;
use crate::relu_net::ReluNetwork;
use crate::scalar::{parse_rational, rational_to_f64, Rational};

/// Name of the random generator used for every seeded computation.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Seeded generator shared by all sampling routines.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Finite weighted point cloud in `ℝⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("measure has no atoms".into()));
        }
        if points.len() != masses.len() {
            return Err(Error::dims("measure masses", points.len(), masses.len()));
        }
        let n = points[0].len();
        if n == 0 {
            return Err(Error::InvalidDimension(
                "atoms must have at least one coordinate".into(),
            ));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::dims("atom", n, p.len()));
        }
        if let Some(p) = points.iter().find(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument(format!("atom {p:?} is not finite")));
        }
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(format!("mass {m} is negative or not finite")));
        }
        Ok(DiscreteMeasure { points, masses })
    }

    /// Equal masses summing to one.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Checks the total against `expected` within `1e−12`.
    pub fn check_total(&self, expected: f64) -> Result<()> {
        let t = self.total_mass();
        if (t - expected).abs() > 1e-12 {
            return Err(Error::MassMismatch {
                source_total: t,
                target_total: expected,
            });
        }
        Ok(())
    }

    /// Removes zero-mass atoms.
    pub fn pruned(&self) -> Self {
        let (points, masses) = self
            .points
            .iter()
            .zip(&self.masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(p, m)| (p.clone(), *m))
            .unzip();
        DiscreteMeasure { points, masses }
    }

    /// Push-forward under a map.
    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        Self::new(self.points.iter().map(|p| f(p)).collect(), self.masses.clone())
    }

    /// Push-forward under a network.
    pub fn push_forward(&self, net: &ReluNetwork<f64>) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| net.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, self.masses.clone())
    }

    /// `Σ aᵢ μᵢ`.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure)]) -> Result<Self> {
        let mut points = Vec::new();
        let mut masses = Vec::new();
        for (a, mu) in parts {
            points.extend(mu.points.iter().cloned());
            masses.extend(mu.masses.iter().map(|m| a * m));
        }
        Self::new(points, masses)
    }

    /// Sup-norm diameter of the support.
    pub fn diameter(&self) -> f64 {
        (0..self.dim())
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

    /// Reads `x1,…,xn,mass` rows with a header line.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut points = Vec::new();
        let mut masses = Vec::new();
        for record in reader.records() {
            let record = record?;
            let offset = record.position().map(|p| p.byte() as usize).unwrap_or(0);
            let nums: Vec<f64> = record
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|e| Error::Parse {
                        offset,
                        message: format!("{s:?}: {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            if nums.len() < 2 {
                return Err(Error::Parse {
                    offset,
                    message: "row needs at least one coordinate and a mass".into(),
                });
            }
            let (x, m) = nums.split_at(nums.len() - 1);
            points.push(x.to_vec());
            masses.push(m[0]);
        }
        Self::new(points, masses)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        header.push("mass".into());
        w.write_record(&header)?;
        for (p, m) in self.points.iter().zip(&self.masses) {
            let mut row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
            row.push(format!("{m:?}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Measure `K^d Σ_k w_k λ_k` that is uniform on each cell of the `K`-grid of
/// `[0,1]^d`. Cells are ordered lexicographically with `k₁` most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformMixture {
    d: usize,
    k: usize,
    weights: Vec<Rational>,
    resolution_n: Option<u64>,
}

impl UniformMixture {
    /// Weights must be nonnegative and sum to exactly one.
    pub fn new(d: usize, k: usize, weights: Vec<Rational>) -> Result<Self> {
        let mix = Self::unchecked(d, k, weights)?;
        let total: Rational = mix.weights.iter().cloned().sum();
        if !total.is_one() {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(mix)
    }

    fn unchecked(d: usize, k: usize, weights: Vec<Rational>) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidDimension("mixture needs d ≥ 1 and K ≥ 1".into()));
        }
        let cells = k
            .checked_pow(d as u32)
            .ok_or_else(|| Error::TooLarge(format!("K^d for K={k}, d={d}")))?;
        if weights.len() != cells {
            return Err(Error::dims("mixture weights", cells, weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::InvalidArgument(format!("negative weight {w}")));
        }
        Ok(UniformMixture {
            d,
            k,
            weights,
            resolution_n: None,
        })
    }

    /// Floating point weights; the sum may drift from one by at most `1e−12`.
    pub fn from_f64(d: usize, k: usize, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, not 1")));
        }
        let exact = weights
            .iter()
            .map(|w| Rational::from_float(*w).ok_or_else(|| Error::InvalidArgument(format!("weight {w} not finite"))))
            .collect::<Result<Vec<_>>>()?;
        Self::unchecked(d, k, exact)
    }

    /// Uniform weights `1/K^d`.
    pub fn uniform(d: usize, k: usize) -> Result<Self> {
        let cells = k.pow(d as u32);
        Self::new(d, k, vec![Rational::new(1.into(), cells.into()); cells])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn resolution_n(&self) -> Option<u64> {
        self.resolution_n
    }

    pub fn cells(&self) -> usize {
        self.weights.len()
    }

    /// Sum of weights equals one exactly.
    pub fn is_exact(&self) -> bool {
        self.weights.iter().cloned().sum::<Rational>().is_one()
    }

    /// Flat index of a 1-based multi-index.
    pub fn index_of(&self, cell: &[usize]) -> usize {
        cell.iter().fold(0, |acc, &c| acc * self.k + (c - 1))
    }

    /// 1-based multi-index of a flat index.
    pub fn cell_of(&self, mut idx: usize) -> Vec<usize> {
        let mut cell = vec![0; self.d];
        for c in (0..self.d).rev() {
            cell[c] = idx % self.k + 1;
            idx /= self.k;
        }
        cell
    }

    pub fn weight(&self, cell: &[usize]) -> &Rational {
        &self.weights[self.index_of(cell)]
    }

    /// Marks the mixture as `(1/N)`-quantized after checking every weight.
    pub fn with_resolution(mut self, n: u64) -> Result<Self> {
        let nn = Rational::from_integer(n.into());
        if let Some(w) = self.weights.iter().find(|w| !(*w * &nn).is_integer()) {
            return Err(Error::InvalidArgument(format!("weight {w} is not a multiple of 1/{n}")));
        }
        self.resolution_n = Some(n);
        Ok(self)
    }

    /// Density of the mixture at `x` (`K^d w_k` on cell `k`).
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let cell = cell_index(x, self.k)?;
        let w = rational_to_f64(&self.weights[self.index_of(&cell)]);
        Ok(w * (self.k as f64).powi(self.d as i32))
    }

    /// Mass of the box `Π [lo_i, hi_i]` (boundaries carry no mass).
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let kf = self.k as f64;
        let mut total = 0.0;
        for (idx, w) in self.weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let cell = self.cell_of(idx);
            let mut frac = 1.0;
            for c in 0..self.d {
                let a = (cell[c] - 1) as f64 / kf;
                let b = cell[c] as f64 / kf;
                let overlap = (hi[c].min(b) - lo[c].max(a)).max(0.0);
                frac *= overlap * kf;
            }
            total += frac * rational_to_f64(w);
        }
        total
    }

    /// JSON form `{"d":…, "K":…, "weights": {"k1,…,kd": "p/q"}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let weights: BTreeMap<String, String> = (0..self.cells())
            .map(|i| {
                let key = self
                    .cell_of(i)
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                let w = &self.weights[i];
                (key, format!("{}/{}", w.numer(), w.denom()))
            })
            .collect();
        let mut obj = serde_json::json!({"d": self.d, "K": self.k, "weights": weights});
        if let Some(n) = self.resolution_n {
            obj["N"] = serde_json::json!(n);
        }
        obj
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize, Serialize)]
        struct Raw {
            d: usize,
            #[serde(rename = "K")]
            k: usize,
            weights: BTreeMap<String, serde_json::Value>,
            #[serde(rename = "N", default)]
            n: Option<u64>,
        }
        let raw: Raw = serde_json::from_value(value.clone())?;
        let cells = raw
            .k
            .checked_pow(raw.d as u32)
            .ok_or_else(|| Error::TooLarge("K^d overflows".into()))?;
        let mut weights = vec![Rational::zero(); cells];
        let probe = UniformMixture {
            d: raw.d,
            k: raw.k,
            weights: vec![],
            resolution_n: None,
        };
        for (key, v) in &raw.weights {
            let cell: Vec<usize> = key
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidArgument(format!("bad cell key {key:?}")))?;
            if cell.len() != raw.d || cell.iter().any(|&c| c == 0 || c > raw.k) {
                return Err(Error::InvalidArgument(format!(
                    "cell key {key:?} outside {{1,…,{}}}^{}",
                    raw.k, raw.d
                )));
            }
            let w = match v {
                serde_json::Value::String(s) => parse_rational(s)?,
                serde_json::Value::Number(n) => match n.as_i64() {
                    Some(i) => Rational::from_integer(i.into()),
                    None => Rational::from_float(n.as_f64().unwrap_or(f64::NAN))
                        .ok_or_else(|| Error::InvalidArgument(format!("bad weight {n}")))?,
                },
                other => return Err(Error::InvalidArgument(format!("bad weight {other}"))),
            };
            weights[probe.index_of(&cell)] = w;
        }
        let mix = Self::new(raw.d, raw.k, weights)?;
        match raw.n {
            Some(n) => mix.with_resolution(n),
            None => Ok(mix),
        }
    }
}

/// 1-based cell of `x` in the `K`-grid: `I_ℓ = [(ℓ−1)/K, ℓ/K)` with the last
/// interval closed. Decided exactly on the binary value of each coordinate.
pub fn cell_index(x: &[f64], k: usize) -> Result<Vec<usize>> {
    let kk = Rational::from_integer(k.into());
    x.iter()
        .map(|&v| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("point {x:?} lies outside [0,1]^d")));
            }
            let exact = Rational::from_float(v).expect("finite");
            let idx = (exact * &kk).floor().to_integer().to_usize().expect("small index");
            Ok(idx.min(k - 1) + 1)
        })
        .collect()
}

/// Cell weights `w_k = μ(J_k)` of a discrete measure on `[0,1]^d`; masses are
/// added exactly.
pub fn histogram(mu: &DiscreteMeasure, k: usize) -> Result<UniformMixture> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let d = mu.dim();
    let cells = k
        .checked_pow(d as u32)
        .ok_or_else(|| Error::TooLarge(format!("K^d for K={k}, d={d}")))?;
    let mut weights = vec![Rational::zero(); cells];
    let probe = UniformMixture {
        d,
        k,
        weights: vec![],
        resolution_n: None,
    };
    for (p, m) in mu.points().iter().zip(mu.masses()) {
        let cell = cell_index(p, k)?;
        weights[probe.index_of(&cell)] += Rational::from_float(*m).expect("finite mass");
    }
    UniformMixture::unchecked(d, k, weights)
}

/// Rounds simplex weights onto `ℕ/N` with all entries positive: floor the
/// first `n−1` entries, put the remainder into the last one, then move single
/// `1/N` units from the largest entry (first among ties) to the first zero
/// entry until none is left. The `ℓ¹` error stays within `4(n−1)/N`.
pub fn quantize_simplex_exact(w: &[Rational], n_res: u64) -> Result<Vec<Rational>> {
    let n = w.len();
    if n == 0 {
        return Err(Error::Empty("no simplex weights".into()));
    }
    if (n_res as usize) < n {
        return Err(Error::Precondition(format!(
            "N = {n_res} < n = {n}: cannot give every entry at least 1/N"
        )));
    }
    if let Some(x) = w.iter().find(|x| x.is_negative()) {
        return Err(Error::InvalidArgument(format!("negative simplex weight {x}")));
    }
    let nn = Rational::from_integer(n_res.into());
    let delta = Rational::one() / &nn;
    let mut out: Vec<Rational> = w[..n - 1].iter().map(|x| (x * &nn).floor() / &nn).collect();
    let partial: Rational = out.iter().cloned().sum();
    out.push(Rational::one() - partial);
    if out[n - 1].is_negative() {
        return Err(Error::InvalidArgument("simplex weights sum above one".into()));
    }
    while let Some(z) = out.iter().position(Zero::is_zero) {
        let mut big = 0;
        for i in 1..n {
            if out[i] > out[big] {
                big = i;
            }
        }
        out[big] -= &delta;
        out[z] += &delta;
    }
    Ok(out)
}

/// Floating point front end of [`quantize_simplex_exact`]; inputs must sum to
/// one within `1e−12`.
pub fn quantize_simplex(w: &[f64], n_res: u64) -> Result<Vec<Rational>> {
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("simplex weights sum to {total}")));
    }
    let exact = w
        .iter()
        .map(|x| Rational::from_float(*x).ok_or_else(|| Error::InvalidArgument(format!("weight {x} not finite"))))
        .collect::<Result<Vec<_>>>()?;
    quantize_simplex_exact(&exact, n_res)
}

/// Histogram at resolution `K` followed by simplex quantization at `N`.
pub fn quantized_mixture(mu: &DiscreteMeasure, k: usize, n_res: u64) -> Result<UniformMixture> {
    let hist = histogram(mu, k)?;
    let cells = hist.cells() as u64;
    if n_res < cells {
        return Err(Error::Precondition(format!("N = {n_res} < K^d = {cells}")));
    }
    let q = quantize_simplex_exact(&hist.weights, n_res)?;
    UniformMixture::new(hist.d, hist.k, q)?.with_resolution(n_res)
}

/// Equal-mass atoms `net(uᵢ)` with `uᵢ` uniform on `[0,1]` drawn from a
/// [`RNG_NAME`] generator.
pub fn sample_pushforward(net: &ReluNetwork<f64>, count: usize, seed: u64) -> Result<DiscreteMeasure> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    if net.input_dim() != 1 {
        return Err(Error::dims("push-forward input", 1, net.input_dim()));
    }
    let mut rng = rng_from_seed(seed);
    let points = (0..count)
        .map(|_| net.evaluate(&[rng.gen::<f64>()]))
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::uniform(points)
}

/// Discretized push-forward of `λ|_[0,1]` under a piecewise-linear curve.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub measure: DiscreteMeasure,
    /// Upper bound on the `W₁` distance between the discretization and the
    /// measure it replaces.
    pub slack: f64,
}

/// Midpoint atoms `Φ((i+½)/M)` of mass `1/M`. The slack is
/// `(1/M) Σᵢ max_{t ∈ Iᵢ} ‖Φ(t) − Φ(tᵢ)‖_∞`, evaluated exactly at the knots.
pub fn midpoint_pushforward(curve: &[Pwl<f64>], atoms: usize) -> Result<Discretization> {
    if curve.is_empty() || atoms == 0 {
        return Err(Error::Empty("curve or atom count".into()));
    }
    let m = atoms as f64;
    let mut points = Vec::with_capacity(atoms);
    let mut slack = 0.0;
    let mut cursors = vec![0usize; curve.len()];
    for i in 0..atoms {
        let (a, b) = (i as f64 / m, (i + 1) as f64 / m);
        let t = (i as f64 + 0.5) / m;
        let centre: Vec<f64> = curve.iter().map(|p| p.eval(&t)).collect();
        let mut worst = 0.0f64;
        for (c, p) in curve.iter().enumerate() {
            let ends = [p.eval(&a), p.eval(&b)];
            for v in ends {
                worst = worst.max((v - centre[c]).abs());
            }
            let knots = p.knots();
            while cursors[c] < knots.len() && knots[cursors[c]] <= a {
                cursors[c] += 1;
            }
            let mut j = cursors[c];
            while j < knots.len() && knots[j] < b {
                worst = worst.max((p.values()[j] - centre[c]).abs());
                j += 1;
            }
        }
        slack += worst / m;
        points.push(centre);
    }
    Ok(Discretization {
        measure: DiscreteMeasure::uniform(points)?,
        slack,
    })
}

/// Regular sub-grid of `q^d` atoms per cell, `q = ⌊ppc^{1/d}⌋`, carrying the
/// cell weight in equal parts.
#[derive(Clone, Debug)]
pub struct MixtureDiscretization {
    pub measure: DiscreteMeasure,
    pub per_axis: usize,
    /// Exact `W₁` distance between a uniform cube of side `h` and its centre is
    /// `d/(d+1)·h/2`; summed over sub-cells this gives `d/(d+1)·1/(2Kq)`.
    pub slack: f64,
    /// The looser bound `1/(2K·ppc^{1/d})` for perfect powers.
    pub nominal_bound: f64,
}

pub fn mixture_to_discrete(mix: &UniformMixture, points_per_cell: usize) -> Result<MixtureDiscretization> {
    if points_per_cell == 0 {
        return Err(Error::InvalidArgument("points_per_cell must be positive".into()));
    }
    let d = mix.d;
    let mut q = 1usize;
    while (q + 1).checked_pow(d as u32).is_some_and(|v| v <= points_per_cell) {
        q += 1;
    }
    let kf = mix.k as f64;
    let sub = q.pow(d as u32);
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for (idx, w) in mix.weights.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let cell = mix.cell_of(idx);
        let mass = rational_to_f64(w) / sub as f64;
        for s in 0..sub {
            let mut rem = s;
            let mut p = vec![0.0; d];
            for c in (0..d).rev() {
                let r = rem % q;
                rem /= q;
                p[c] = ((cell[c] - 1) as f64 + (r as f64 + 0.5) / q as f64) / kf;
            }
            points.push(p);
            masses.push(mass);
        }
    }
    let df = d as f64;
    Ok(MixtureDiscretization {
        measure: DiscreteMeasure::new(points, masses)?,
        per_axis: q,
        slack: df / (df + 1.0) / (2.0 * kf * q as f64),
        nominal_bound: 1.0 / (2.0 * kf * (points_per_cell as f64).powf(1.0 / df)),
    })
}

/// Midpoint-rule atoms of a mixture on a fine grid (used as a reference).
pub fn mixture_reference(mix: &UniformMixture, per_axis: usize) -> Result<DiscreteMeasure> {
    Ok(mixture_to_discrete(mix, per_axis.pow(mix.d as u32))?.measure)
}

/// Closed-form metric entropy bound `(2/ε)^d log₂(24/ε)` of the probability
/// measures on `[0,1]^d` under `W₁`.
pub fn metric_entropy_bound(d: u32, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} outside (0,1]")));
    }
    Ok((2.0 / epsilon).powi(d as i32) * (24.0 / epsilon).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu_net::{identity_net, AffineLayer};
    use crate::scalar::{int, ratio};

    #[test]
    fn simplex_examples() {
        assert_eq!(
            quantize_simplex(&[0.3, 0.7], 4).unwrap(),
            vec![ratio(1, 4), ratio(3, 4)]
        );
        assert_eq!(
            quantize_simplex(&[0.25, 0.75], 4).unwrap(),
            vec![ratio(1, 4), ratio(3, 4)]
        );
        assert_eq!(
            quantize_simplex(&[0.0, 1.0], 4).unwrap(),
            vec![ratio(1, 4), ratio(3, 4)]
        );
        assert!(matches!(
            quantize_simplex(&[0.2, 0.3, 0.5], 2),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn histogram_cells() {
        let mu = DiscreteMeasure::dirac(vec![0.1, 0.9]).unwrap();
        let h = histogram(&mu, 2).unwrap();
        assert_eq!(h.weight(&[1, 2]), &int(1));
        let edge = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        assert_eq!(histogram(&edge, 3).unwrap().weight(&[3]), &int(1));
        let pts: Vec<Vec<f64>> = (0..4)
            .flat_map(|i| (0..4).map(move |j| vec![(i as f64 + 0.5) / 4.0, (j as f64 + 0.5) / 4.0]))
            .collect();
        let grid = DiscreteMeasure::uniform(pts).unwrap();
        let h = histogram(&grid, 2).unwrap();
        assert!(h.weights().iter().all(|w| *w == ratio(1, 4)));
        let out = DiscreteMeasure::dirac(vec![1.5]).unwrap();
        assert!(matches!(histogram(&out, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn quantized_mixture_example() {
        let mu = DiscreteMeasure::dirac(vec![0.25]).unwrap();
        let q = quantized_mixture(&mu, 2, 4).unwrap();
        assert_eq!(q.weights(), &[ratio(3, 4), ratio(1, 4)]);
        assert_eq!(q.resolution_n(), Some(4));
    }

    #[test]
    fn pushforward_sampling() {
        let i1 = identity_net::<f64>(1).unwrap();
        let a = sample_pushforward(&i1, 4000, 9).unwrap();
        let mean: f64 = a.points().iter().map(|p| p[0]).sum::<f64>() / 4000.0;
        assert!((mean - 0.5).abs() < 3.0 / 4000f64.sqrt());
        assert_eq!(a, sample_pushforward(&i1, 4000, 9).unwrap());
        let constant = ReluNetwork::affine(AffineLayer::from_dense(vec![vec![0.0]], vec![0.7]).unwrap());
        let c = sample_pushforward(&constant, 10, 1).unwrap();
        assert!(c.points().iter().all(|p| p[0] == 0.7));
        assert!(sample_pushforward(&i1, 0, 1).is_err());
    }

    #[test]
    fn mixture_discretization() {
        let one = UniformMixture::uniform(1, 1).unwrap();
        let m = mixture_to_discrete(&one, 1).unwrap();
        assert_eq!(m.measure.points(), &[vec![0.5]]);
        let mix = UniformMixture::new(1, 2, vec![int(1), int(0)]).unwrap();
        let m = mixture_to_discrete(&mix, 3).unwrap();
        assert_eq!(m.measure.len(), 3);
        assert!((m.measure.total_mass() - 1.0).abs() < 1e-15);
        assert!(m.slack <= m.nominal_bound + 1e-15);
    }

    #[test]
    fn mixture_json_round_trip() {
        let mix = UniformMixture::new(2, 2, vec![ratio(1, 2), ratio(1, 4), ratio(1, 4), int(0)]).unwrap();
        let back = UniformMixture::from_json(&mix.to_json()).unwrap();
        assert_eq!(back, mix);
    }

    #[test]
    fn midpoint_slack_for_identity() {
        let id = Pwl::affine(1.0, 0.0);
        let disc = midpoint_pushforward(&[id], 10).unwrap();
        assert!((disc.slack - 0.05).abs() < 1e-12);
    }

    #[test]
    fn entropy_calculator() {
        assert!((metric_entropy_bound(1, 1.0).unwrap() - 2.0 * 24f64.log2()).abs() < 1e-12);
        assert!(metric_entropy_bound(1, 0.0).is_err());
    }
}
