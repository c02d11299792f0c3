//! Generation of (countably) rectifiable measures.
//!
//! A piece is a Lipschitz map `f: A → ℝⁿ` known through a sample, together
//! with an axis-aligned cube `Q ⊇ A`. Finite unions are packed into a single
//! piece on `[0,1]^m`; the pipeline then realizes `Ψ = Φ ∘ ρ ∘ Σ`, where `Φ`
//! approximates `f` after rescaling `Q` to the unit cube and `Σ` pushes
//! `λ|_[0,1]` onto the parameter measure.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{all_hold, Check};
use crate::error::{Error, Result};
use crate::grid::WeightGrid;
use crate::lipschitz_approx::{build_vector_approximant, LipschitzSample, VectorApproximant};
use crate::measures::{midpoint_pushforward, DiscreteMeasure, Discretization};
use crate::pwl::{network_to_pwl, Pwl};
use crate::relu_net::compose_with_relu;
use crate::scalar::{ceil_log2, rational_to_f64, Rational};
use crate::transport::{build_sigma, SigmaNetwork};
use crate::wasserstein::{sup_dist, w1, SolverOptions};
use crate::ExactNet;

pub const CERTIFICATE_SCHEMA_VERSION: u32 = 1;

const CUBE_TOL: f64 = 1e-12;

/// Axis-aligned cube given by its center and side length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDimension("cube needs at least one coordinate".into()));
        }
        if !(side >= 0.0 && side.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "cube side {side} must be finite and nonnegative"
            )));
        }
        Ok(Cube { center, side })
    }

    pub fn unit(m: usize) -> Self {
        Cube {
            center: vec![0.5; m],
            side: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().map(|c| c - self.side / 2.0).collect()
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        let tol = CUBE_TOL * self.side.max(1.0);
        a.len() == self.dim()
            && a.iter()
                .zip(&self.center)
                .all(|(x, c)| (x - c).abs() <= self.side / 2.0 + tol)
    }

    /// `φ(x) = s·x + c − s/2`, mapping `[0,1]^m` onto the cube.
    pub fn from_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(x, c)| self.side * x + c - self.side / 2.0)
            .collect()
    }

    /// `φ⁻¹`, clamped to `[0,1]`. A degenerate cube maps to the origin.
    pub fn to_unit(&self, a: &[f64]) -> Vec<f64> {
        if self.side == 0.0 {
            return vec![0.0; a.len()];
        }
        a.iter()
            .zip(&self.center)
            .map(|(a, c)| ((a - c + self.side / 2.0) / self.side).clamp(0.0, 1.0))
            .collect()
    }
}

/// A sampled Lipschitz map `f_k: A_k → ℝⁿ` with a cube `Q_k ⊇ A_k`.
#[derive(Clone, Debug)]
pub struct RectifiablePiece {
    sample: LipschitzSample,
    cube: Cube,
}

impl RectifiablePiece {
    pub fn new(sample: LipschitzSample, cube: Cube) -> Result<Self> {
        if cube.dim() != sample.input_dim() {
            return Err(Error::dims("cube dimension", sample.input_dim(), cube.dim()));
        }
        if let Some(p) = sample.points().iter().find(|p| !cube.contains(p)) {
            return Err(Error::Domain(format!(
                "domain point {p:?} lies outside the cube with center {:?} and side {}",
                cube.center, cube.side
            )));
        }
        Ok(RectifiablePiece { sample, cube })
    }

    /// Uses the cube of side `diam(A)` anchored at the lower corner of the
    /// bounding box of the sample.
    pub fn enclosing(sample: LipschitzSample) -> Result<Self> {
        let side = sample.diameter();
        let m = sample.input_dim();
        let lower: Vec<f64> = (0..m)
            .map(|c| sample.points().iter().map(|p| p[c]).fold(f64::INFINITY, f64::min))
            .collect();
        let center = lower.iter().map(|l| l + side / 2.0).collect();
        Self::new(sample, Cube::new(center, side)?)
    }

    pub fn sample(&self) -> &LipschitzSample {
        &self.sample
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn domain_dim(&self) -> usize {
        self.sample.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.sample.output_dim()
    }

    /// Sup-norm diameter of the sampled domain.
    pub fn domain_diameter(&self) -> f64 {
        self.sample.diameter()
    }

    /// Sup-norm diameter of the sampled image.
    pub fn image_diameter(&self) -> f64 {
        values_diameter(self.sample.values())
    }
}

fn values_diameter(values: &[Vec<f64>]) -> f64 {
    let n = values[0].len();
    (0..n)
        .map(|c| {
            let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v[c]), hi.max(v[c]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Result of [`pack_union`]: one piece on `[0,1]^m` whose image is the union
/// of the input images.
#[derive(Clone, Debug)]
pub struct PackedUnion {
    pub piece: RectifiablePiece,
    /// `2ℓ·max{diam(E), s_k Lip(f_k)}`.
    pub lip_bound: f64,
    /// First-coordinate slab `[(k−1)/ℓ, (2k−1)/(2ℓ)]` of each piece.
    pub slabs: Vec<(f64, f64)>,
    pub cubes: Vec<Cube>,
}

impl PackedUnion {
    pub fn ell(&self) -> usize {
        self.cubes.len()
    }

    /// `ψ_k⁻¹`: unit cube into the slab of piece `k` (0-based).
    pub fn embed(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let ell = self.ell() as f64;
        let mut y = x.to_vec();
        y[0] = x[0] / (2.0 * ell) + k as f64 / ell;
        y
    }

    /// Piece index and original domain point of a packed parameter, or `None`
    /// between slabs.
    pub fn unpack(&self, y: &[f64]) -> Option<(usize, Vec<f64>)> {
        let ell = self.ell() as f64;
        let k = self
            .slabs
            .iter()
            .position(|(lo, hi)| y[0] >= lo - CUBE_TOL && y[0] <= hi + CUBE_TOL)?;
        let mut x = y.to_vec();
        x[0] = (2.0 * ell * (y[0] - k as f64 / ell)).clamp(0.0, 1.0);
        Some((k, self.cubes[k].from_unit(&x)))
    }
}

/// Packs `ℓ` pieces into one map `g` on `[0,1]^m`: piece `k` is pulled back
/// through its cube and placed in the slab `[(k−1)/ℓ, (2k−1)/(2ℓ)] × [0,1]^{m−1}`.
pub fn pack_union(pieces: &[RectifiablePiece]) -> Result<PackedUnion> {
    let first = pieces
        .first()
        .ok_or_else(|| Error::Empty("pack_union needs at least one piece".into()))?;
    let (m, n) = (first.domain_dim(), first.output_dim());
    for p in pieces {
        if p.domain_dim() != m {
            return Err(Error::dims("piece domain dimension", m, p.domain_dim()));
        }
        if p.output_dim() != n {
            return Err(Error::dims("piece output dimension", n, p.output_dim()));
        }
    }
    let ell = pieces.len();
    let all_values: Vec<Vec<f64>> = pieces.iter().flat_map(|p| p.sample.values().iter().cloned()).collect();
    let diam_e = values_diameter(&all_values);
    let inner = pieces
        .iter()
        .map(|p| p.cube.side * p.sample.lip())
        .fold(diam_e, f64::max);
    let lip_bound = 2.0 * ell as f64 * inner;
    let sup = pieces.iter().map(|p| p.sample.sup_norm()).fold(0.0, f64::max);
    let cubes: Vec<Cube> = pieces.iter().map(|p| p.cube.clone()).collect();
    let slabs = (0..ell)
        .map(|k| (k as f64 / ell as f64, (2 * k + 1) as f64 / (2 * ell) as f64))
        .collect();
    let mut packed = PackedUnion {
        piece: RectifiablePiece {
            sample: first.sample.clone(),
            cube: Cube::unit(m),
        },
        lip_bound,
        slabs,
        cubes,
    };
    let mut points = Vec::with_capacity(all_values.len());
    for (k, p) in pieces.iter().enumerate() {
        for a in p.sample.points() {
            points.push(packed.embed(k, &p.cube.to_unit(a)));
        }
    }
    let sample = LipschitzSample::new(points, all_values, lip_bound, sup)?;
    packed.piece = RectifiablePiece::new(sample, Cube::unit(m))?;
    Ok(packed)
}

/// Density value in parameter space together with the Jacobian used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub value: f64,
    /// `Jf = √det(∇fᵀ∇f)`.
    pub jacobian: f64,
    /// One-sided Jacobians disagree: `x` sits on a kink of the interpolant.
    pub at_kink: bool,
}

/// Interpolant of an injective sample used to differentiate `f`.
#[derive(Clone, Debug)]
pub struct InjectiveSample {
    sample: LipschitzSample,
    /// Sample indices sorted by the first coordinate (used when `m = 1`).
    order: Vec<usize>,
    step: f64,
}

impl InjectiveSample {
    /// Validates numerical injectivity: distinct sample points must have
    /// images at sup-distance above `tol`.
    pub fn new(sample: LipschitzSample, tol: f64) -> Result<Self> {
        let pts = sample.points();
        let vals = sample.values();
        let clash = (0..pts.len()).into_par_iter().find_map_any(|i| {
            (i + 1..pts.len()).find_map(|j| {
                (sup_dist(&pts[i], &pts[j]) > 0.0 && sup_dist(&vals[i], &vals[j]) <= tol).then_some((i, j))
            })
        });
        if let Some((i, j)) = clash {
            return Err(Error::Domain(format!(
                "sample points {i} and {j} have images within {tol}; f is not numerically injective"
            )));
        }
        let m = sample.input_dim();
        if pts.len() < m + 1 {
            return Err(Error::Empty(format!(
                "need at least {} sample points to differentiate",
                m + 1
            )));
        }
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]));
        let step = 1e-6 * sample.diameter().max(f64::MIN_POSITIVE);
        Ok(InjectiveSample { sample, order, step })
    }

    /// Piecewise-linear interpolant for `m = 1`, constant beyond the sample.
    fn interp_1d(&self, t: f64) -> Vec<f64> {
        let pts = self.sample.points();
        let vals = self.sample.values();
        let key = |i: usize| pts[self.order[i]][0];
        let last = self.order.len() - 1;
        if t <= key(0) {
            return vals[self.order[0]].clone();
        }
        if t >= key(last) {
            return vals[self.order[last]].clone();
        }
        let hi = self.order.partition_point(|&i| pts[i][0] <= t).min(last);
        let lo = hi - 1;
        let (a, b) = (key(lo), key(hi));
        let w = if b > a { (t - a) / (b - a) } else { 0.0 };
        vals[self.order[lo]]
            .iter()
            .zip(&vals[self.order[hi]])
            .map(|(u, v)| u + w * (v - u))
            .collect()
    }

    /// Value and Jacobian of a least-squares affine fit over the nearest
    /// samples, for `m ≥ 2`.
    fn local_affine(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let pts = self.sample.points();
        let vals = self.sample.values();
        let m = x.len();
        let n = vals[0].len();
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| {
            let da: f64 = pts[a].iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum();
            let db: f64 = pts[b].iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum();
            da.total_cmp(&db)
        });
        idx.truncate((3 * m + 1).min(pts.len()));
        // Normal equations for [1, (p − x)] β = value, per output coordinate.
        let dim = m + 1;
        let mut ata = vec![vec![0.0; dim]; dim];
        let mut atb = vec![vec![0.0; n]; dim];
        for &i in &idx {
            let row: Vec<f64> = std::iter::once(1.0)
                .chain(pts[i].iter().zip(x).map(|(p, q)| p - q))
                .collect();
            for r in 0..dim {
                for c in 0..dim {
                    ata[r][c] += row[r] * row[c];
                }
                for (o, v) in vals[i].iter().enumerate() {
                    atb[r][o] += row[r] * v;
                }
            }
        }
        let beta = solve(ata, atb)
            .ok_or_else(|| Error::Domain(format!("sample points near {x:?} do not span {m} dimensions")))?;
        let value = beta[0].clone();
        let jac = (0..n).map(|o| (1..dim).map(|r| beta[r][o]).collect()).collect();
        Ok((value, jac))
    }

    /// Interpolated `f(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.sample.input_dim() {
            return Err(Error::dims("density point", self.sample.input_dim(), x.len()));
        }
        if x.len() == 1 {
            Ok(self.interp_1d(x[0]))
        } else {
            Ok(self.local_affine(x)?.0)
        }
    }

    /// `(Jf)(x)·φ(f(x))`.
    pub fn density(&self, phi: impl Fn(&[f64]) -> f64, x: &[f64]) -> Result<DensityEstimate> {
        let fx = self.eval(x)?;
        let (jacobian, at_kink, scale) = if x.len() == 1 {
            let h = self.step;
            let (l, c, r) = (self.interp_1d(x[0] - h), self.interp_1d(x[0]), self.interp_1d(x[0] + h));
            let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt() / h;
            let left = norm(&c, &l);
            let right = norm(&r, &c);
            let central = norm(&r, &l) / 2.0;
            let scale = self.sample.lip().max(left).max(right);
            (central, (left - right).abs() > 1e-6 * scale.max(1.0), scale)
        } else {
            let (_, jac) = self.local_affine(x)?;
            let m = x.len();
            let gram: Vec<Vec<f64>> = (0..m)
                .map(|a| (0..m).map(|b| jac.iter().map(|row| row[a] * row[b]).sum()).collect())
                .collect();
            let scale = (0..m).map(|a| gram[a][a].sqrt()).fold(0.0, f64::max).powi(m as i32);
            (determinant(gram).max(0.0).sqrt(), false, scale)
        };
        if jacobian.is_nan() || jacobian <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!(
                "near-singular Jacobian {jacobian:e} at {x:?}; the density is undefined there"
            )));
        }
        Ok(DensityEstimate {
            value: jacobian * phi(&fx),
            jacobian,
            at_kink,
        })
    }
}

/// One-shot form of [`InjectiveSample::density`] with injectivity tolerance
/// `1e−12·diam(E)`.
pub fn injective_density(sample: &LipschitzSample, phi: impl Fn(&[f64]) -> f64, x: &[f64]) -> Result<DensityEstimate> {
    let tol = 1e-12 * values_diameter(sample.values()).max(1.0);
    InjectiveSample::new(sample.clone(), tol)?.density(phi, x)
}

#[allow(clippy::needless_range_loop)]
fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Gaussian elimination for `A X = B` with several right-hand sides.
#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                for c in 0..b[r].len() {
                    b[r][c] -= f * b[col][c];
                }
            }
        }
    }
    for r in 0..n {
        let d = a[r][r];
        b[r].iter_mut().for_each(|v| *v /= d);
    }
    Some(b)
}

/// Bound terms, metrics and (once measured) the `W₁` comparison of a
/// pipeline network.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineCertificate {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n_res: u64,
    pub m: usize,
    pub n: usize,
    pub diam_a: f64,
    pub lip_f: f64,
    pub sup_f: f64,
    pub nu_mass: f64,
    /// `(m+1)(diam(A)Lip(f)+1)/N`.
    pub claimed_w1: f64,
    pub measured_w1: Option<f64>,
    pub slack: Option<f64>,
    pub lipschitz: f64,
    pub lipschitz_bound: f64,
    pub depth: usize,
    pub connectivity: usize,
    pub width: usize,
    pub magnitude: f64,
    pub checks: Vec<Check>,
    pub holds: bool,
}

/// `Ψ = Φ ∘ ρ ∘ Σ` with its parts.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub psi: ExactNet,
    pub phi: VectorApproximant,
    pub sigma: SigmaNetwork,
    pub cube: Cube,
    pub certificate: PipelineCertificate,
}

pub fn pipeline_claimed_w1(m: usize, diam_a: f64, lip_f: f64, n_res: u64) -> f64 {
    (m as f64 + 1.0) * (diam_a * lip_f + 1.0) / n_res as f64
}

/// Builds `Ψ` for a piece and a parameter measure `μ` on `[0,1]^m`, where
/// `[0,1]^m` is identified with the cube of side `diam(A)` at the lower
/// corner of the sampled domain.
pub fn build_pipeline(piece: &RectifiablePiece, mu: &DiscreteMeasure, n_res: u64) -> Result<Pipeline> {
    let (m, n) = (piece.domain_dim(), piece.output_dim());
    if mu.dim() != m {
        return Err(Error::dims("parameter measure dimension", m, mu.dim()));
    }
    if n_res == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let sample = piece.sample();
    let diam_a = piece.domain_diameter();
    let (lip_f, sup_f) = (sample.lip(), sample.sup_norm());
    if sup_f + diam_a * lip_f > n_res as f64 {
        return Err(Error::Precondition(format!(
            "‖f‖ + diam(A)·Lip(f) = {sup_f} + {diam_a}·{lip_f} = {} exceeds N = {n_res}",
            sup_f + diam_a * lip_f
        )));
    }
    let cube = RectifiablePiece::enclosing(sample.clone())?.cube;
    let g_points = sample.points().iter().map(|a| cube.to_unit(a)).collect();
    let g = LipschitzSample::new(g_points, sample.values().to_vec(), diam_a * lip_f, sup_f)?;
    let phi = build_vector_approximant(&g, n_res)?;
    let k = 3 * n_res as usize;
    let sigma = build_sigma(mu, k)?;
    let psi = compose_with_relu(&phi.exact, &sigma.transport.net)?;

    let zero = Rational::zero();
    let one = Rational::one();
    let lip = network_to_pwl(&psi)?
        .iter()
        .map(|p| p.lipschitz_on(&zero, &one))
        .fold(Rational::zero(), |a, b| if b > a { b } else { a });
    let lipschitz_bound = m as f64 * (6.0 * (n_res as f64 + 1.0)).powi(m as i32 + 1);
    let metrics = psi.metrics();
    let three_n = 3 * n_res;
    let big = 4 * three_n.pow(m as u32 + 1);
    let grid = WeightGrid::D { n: big, k: three_n };
    let per = (m * n) as f64 * (three_n as f64).powi(m as i32);
    let magnitude = rational_to_f64(&metrics.magnitude);
    let checks = vec![
        Check::le(
            "depth",
            metrics.depth as f64,
            (ceil_log2(m + 1) + 6 * (m - 1) + 7) as f64,
        ),
        Check::le("connectivity", metrics.connectivity as f64, 78.0 * per),
        Check::le("width", metrics.width as f64, 6.0 * per),
        Check::eq(
            format!("weights outside {}", grid.describe()),
            grid.violations(&metrics.weight_set).len() as f64,
            0.0,
        ),
        Check::decided(
            "magnitude",
            magnitude,
            big as f64,
            "<=",
            metrics.magnitude <= Rational::from_integer(big.into()),
        ),
        Check::le("lipschitz on [0,1]", rational_to_f64(&lip), lipschitz_bound),
    ];
    let certificate = PipelineCertificate {
        schema_version: CERTIFICATE_SCHEMA_VERSION,
        n_res,
        m,
        n,
        diam_a,
        lip_f,
        sup_f,
        nu_mass: 1.0,
        claimed_w1: pipeline_claimed_w1(m, diam_a, lip_f, n_res),
        measured_w1: None,
        slack: None,
        lipschitz: rational_to_f64(&lip),
        lipschitz_bound,
        depth: metrics.depth,
        connectivity: metrics.connectivity,
        width: metrics.width,
        magnitude,
        holds: all_hold(&checks),
        checks,
    };
    Ok(Pipeline {
        psi,
        phi,
        sigma,
        cube,
        certificate,
    })
}

impl Pipeline {
    /// Output coordinates of `Ψ` as functions on `ℝ`.
    pub fn curve(&self) -> Result<Vec<Pwl<f64>>> {
        Ok(network_to_pwl(&self.psi)?
            .iter()
            .map(|p| p.map(rational_to_f64))
            .collect())
    }

    /// Midpoint discretization of `Ψ#λ|_[0,1]`.
    pub fn pushforward(&self, atoms: usize) -> Result<Discretization> {
        midpoint_pushforward(&self.curve()?, atoms)
    }

    /// Measures `W₁(ν̂, Ψ#λ̂)` against a discretized target `ν̂` whose distance
    /// to `ν` is at most `nu_slack`, and records the check
    /// `measured ≤ claimed + slack`.
    pub fn certify_w1(&mut self, nu: &DiscreteMeasure, nu_slack: f64, atoms: usize, opts: SolverOptions) -> Result<()> {
        let disc = self.pushforward(atoms)?;
        let measured = w1(nu, &disc.measure, opts)?;
        let slack = nu_slack + disc.slack;
        let cert = &mut self.certificate;
        cert.measured_w1 = Some(measured);
        cert.slack = Some(slack);
        cert.checks.retain(|c| c.name != "w1");
        cert.checks.push(Check::le("w1", measured, cert.claimed_w1 + slack));
        cert.holds = all_hold(&cert.checks);
        Ok(())
    }
}

/// `f(t) = (cos t, sin t)` on `[0, π/2]`, sampled at `samples + 1` equally
/// spaced parameters. Unit speed, sup-norm Lipschitz constant 1.
pub fn quarter_circle(samples: usize) -> Result<RectifiablePiece> {
    if samples == 0 {
        return Err(Error::Empty("quarter circle needs at least one interval".into()));
    }
    let h = std::f64::consts::FRAC_PI_2;
    let ts: Vec<f64> = (0..=samples).map(|i| h * i as f64 / samples as f64).collect();
    let values = ts.iter().map(|t| vec![t.cos(), t.sin()]).collect();
    let sample = LipschitzSample::new(ts.into_iter().map(|t| vec![t]).collect(), values, 1.0, 1.0)?;
    RectifiablePiece::enclosing(sample)
}

/// `M` equal atoms at the midpoints `(i+½)/M`; `W₁` distance `1/(4M)` to
/// `λ|_[0,1]`.
pub fn midpoint_measure(atoms: usize) -> Result<DiscreteMeasure> {
    if atoms == 0 {
        return Err(Error::Empty("midpoint measure needs atoms".into()));
    }
    DiscreteMeasure::uniform((0..atoms).map(|i| vec![(i as f64 + 0.5) / atoms as f64]).collect())
}

/// Arc-length measure on the quarter circle, as the image of
/// [`midpoint_measure`]. Slack `(π/2)/(4M)`.
pub fn quarter_circle_target(atoms: usize) -> Result<Discretization> {
    let h = std::f64::consts::FRAC_PI_2;
    let mu = midpoint_measure(atoms)?;
    Ok(Discretization {
        measure: mu.map(|t| vec![(h * t[0]).cos(), (h * t[0]).sin()])?,
        slack: h / (4.0 * atoms as f64),
    })
}

/// First `ℓ` pieces of a countable family, renormalized.
#[derive(Clone, Debug)]
pub struct Truncation<T> {
    pub pieces: Vec<T>,
    pub weights: Vec<f64>,
    /// `ν(E_ℓ)`.
    pub kept_mass: f64,
    /// `(1 − ν(E_ℓ))·diam(E)`.
    pub tail_bound: f64,
}

/// Keeps the first `ℓ` `(piece, mass)` pairs of a possibly unbounded
/// iterator.
pub fn truncate_countable<T>(
    pieces: impl IntoIterator<Item = (T, f64)>,
    ell: usize,
    diam_e: f64,
) -> Result<Truncation<T>> {
    if ell == 0 {
        return Err(Error::InvalidArgument("ℓ must be at least 1".into()));
    }
    if !(diam_e >= 0.0 && diam_e.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "diam(E) = {diam_e} must be finite and nonnegative"
        )));
    }
    let (kept, masses): (Vec<T>, Vec<f64>) = pieces.into_iter().take(ell).unzip();
    if let Some(bad) = masses.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "piece mass {bad} must be finite and nonnegative"
        )));
    }
    let kept_mass: f64 = masses.iter().sum();
    if kept_mass > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!("piece masses sum to {kept_mass} > 1")));
    }
    if kept_mass <= 0.0 {
        return Err(Error::Domain("the first ℓ pieces carry no mass".into()));
    }
    let kept_mass = kept_mass.min(1.0);
    Ok(Truncation {
        pieces: kept,
        weights: masses.iter().map(|w| w / kept_mass).collect(),
        kept_mass,
        tail_bound: (1.0 - kept_mass) * diam_e,
    })
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must lie in (0,1]")));
    }
    Ok(())
}

fn bits(m: u32, n: u32, q: f64) -> f64 {
    3.0 * n as f64 * (3.0 * q).powi(m as i32) * (6.0 * q).log2()
}

/// `b(ε) = 3n(3⌈C/ε⌉)^m log₂(6⌈C/ε⌉)`.
pub fn bit_count(m: u32, n: u32, c: f64, eps: f64) -> Result<f64> {
    check_epsilon(eps)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C = {c} must be positive")));
    }
    Ok(bits(m, n, (c / eps).ceil()))
}

/// Tail-decay profiles `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kappa {
    /// `⌈log₂(1/ε)⌉`, at least 1.
    Exponential,
    /// `⌈ε^{−k}⌉`.
    Polynomial(u32),
}

impl Kappa {
    pub fn eval(&self, eps: f64) -> u64 {
        match *self {
            Kappa::Exponential => ((1.0 / eps).log2().ceil() as u64).max(1),
            Kappa::Polynomial(k) => eps.powi(-(k as i32)).ceil() as u64,
        }
    }

    /// Slope of `log b(ε)` against `log(1/ε)` the profile leads to,
    /// ignoring logarithmic factors.
    pub fn nominal_exponent(&self, m: u32) -> f64 {
        match *self {
            Kappa::Exponential => m as f64,
            Kappa::Polynomial(k) => (m * (k + 1)) as f64,
        }
    }
}

/// `3n(3⌈2(m+1)(C+1)κ(ε)/ε⌉)^m log₂(6⌈…⌉)`.
pub fn bit_count_countable(m: u32, n: u32, c: f64, kappa: impl Fn(f64) -> u64, eps: f64) -> Result<f64> {
    check_epsilon(eps)?;
    let k = kappa(eps);
    if k == 0 {
        return Err(Error::InvalidArgument(format!("κ({eps}) must be a positive integer")));
    }
    let q = (2.0 * (m as f64 + 1.0) * (c + 1.0) * k as f64 / eps).ceil();
    Ok(bits(m, n, q))
}

/// `κ` must not increase as `ε` grows.
pub fn check_kappa_monotone(kappa: impl Fn(f64) -> u64, grid: &[f64]) -> Result<()> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        let (a, b) = (kappa(w[0]), kappa(w[1]));
        if b > a {
            return Err(Error::InvalidArgument(format!(
                "κ is not monotone: κ({}) = {a} < κ({}) = {b}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// `count` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 || !(lo > 0.0 && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo < hi and at least two points, got [{lo}, {hi}] with {count}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Least-squares slope of `log b(ε)` against `log(1/ε)`.
pub fn scaling_exponent(eps: &[f64], bits: &[f64]) -> Result<f64> {
    if eps.len() != bits.len() {
        return Err(Error::dims("scaling fit", eps.len(), bits.len()));
    }
    if eps.len() < 2 {
        return Err(Error::Empty("scaling fit needs two points".into()));
    }
    let xs: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = bits.iter().map(|b| b.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("ε grid has a single distinct value".into()));
    }
    Ok(sxy / sxx)
}

/// Smallest constant `C` for which the class bound applies to a piece:
/// `(m+1)(diam(A)Lip(f)+1)`, and at least `‖f‖ + diam(A)Lip(f)` so that the
/// resolution `N = ⌈C/ε⌉` meets the pipeline precondition.
pub fn class_constant(m: usize, diam_a: f64, lip_f: f64, sup_f: f64) -> f64 {
    ((m as f64 + 1.0) * (diam_a * lip_f + 1.0)).max(sup_f + diam_a * lip_f)
}
