//! Exact `W₁` under the sup-norm ground metric between finite measures.
//!
//! The transportation problem is solved by a primal network simplex on the
//! complete bipartite graph. Arc costs are computed on demand, so memory is
//! linear in the number of atoms.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Default limit on the number of atoms per side.
pub const DEFAULT_MAX_ATOMS: usize = 5_000;

/// Masses may differ by this much in total.
pub const MASS_TOLERANCE: f64 = 1e-10;

pub fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub max_atoms: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

/// Flows of an optimal coupling.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    /// `(source index, target index, mass)` with positive mass.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual objective of the final potentials.
    pub dual_value: f64,
    /// Most negative reduced cost over all arcs (zero or slightly negative at
    /// optimality).
    pub min_reduced_cost: f64,
    pub pivots: usize,
}

impl TransportPlan {
    /// Row and column sums against the marginals, within `tol`.
    pub fn check_feasible(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<()> {
        let mut rows = vec![0.0; mu.len()];
        let mut cols = vec![0.0; nu.len()];
        for &(i, j, f) in &self.flows {
            if f < 0.0 {
                return Err(Error::Solver(format!("negative flow {f} on ({i},{j})")));
            }
            rows[i] += f;
            cols[j] += f;
        }
        for (i, (r, a)) in rows.iter().zip(mu.masses()).enumerate() {
            if (r - a).abs() > tol {
                return Err(Error::Solver(format!("row {i} sums to {r}, expected {a}")));
            }
        }
        for (j, (c, b)) in cols.iter().zip(nu.masses()).enumerate() {
            if (c - b).abs() > tol {
                return Err(Error::Solver(format!("column {j} sums to {c}, expected {b}")));
            }
        }
        Ok(())
    }

    /// Writes `src_idx,dst_idx,mass,cost_contrib`.
    pub fn write_csv<W: Write>(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src_idx", "dst_idx", "mass", "cost_contrib"])?;
        for &(i, j, f) in &self.flows {
            let c = f * sup_dist(&mu.points()[i], &nu.points()[j]);
            w.write_record([i.to_string(), j.to_string(), format!("{f:?}"), format!("{c:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::Empty("measure has no atoms".into()));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::dims("target atoms", mu.dim(), nu.dim()));
    }
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOLERANCE {
        return Err(Error::MassMismatch {
            source_total: a,
            target_total: b,
        });
    }
    Ok(())
}

pub fn w1_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    w1_discrete_with(mu, nu, SolverOptions::default())
}

pub fn w1_discrete_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: SolverOptions,
) -> Result<(f64, TransportPlan)> {
    check_pair(mu, nu)?;
    for (side, m) in [("source", mu), ("target", nu)] {
        if m.len() > opts.max_atoms {
            return Err(Error::TooLarge(format!(
                "{side} has {} atoms, limit is {}; coarsen the measure first",
                m.len(),
                opts.max_atoms
            )));
        }
    }
    let src: Vec<usize> = (0..mu.len()).filter(|&i| mu.masses()[i] > 0.0).collect();
    let dst: Vec<usize> = (0..nu.len()).filter(|&j| nu.masses()[j] > 0.0).collect();
    if src.is_empty() || dst.is_empty() {
        let plan = TransportPlan {
            flows: vec![],
            cost: 0.0,
            dual_value: 0.0,
            min_reduced_cost: 0.0,
            pivots: 0,
        };
        return Ok((0.0, plan));
    }
    let xs: Vec<&[f64]> = src.iter().map(|&i| mu.points()[i].as_slice()).collect();
    let ys: Vec<&[f64]> = dst.iter().map(|&j| nu.points()[j].as_slice()).collect();
    let a: Vec<f64> = src.iter().map(|&i| mu.masses()[i]).collect();
    let scale = mu.total_mass() / nu.total_mass();
    let b: Vec<f64> = dst.iter().map(|&j| nu.masses()[j] * scale).collect();

    let mut solver = Simplex::new(&xs, &ys, &a, &b);
    solver.run()?;
    let mut plan = solver.plan();
    for f in &mut plan.flows {
        f.0 = src[f.0];
        f.1 = dst[f.1];
    }
    Ok((plan.cost, plan))
}

/// Network simplex state. Nodes `0..n` are sources, `n..n+m` sinks and
/// `n+m` the root. Every non-root node `v` owns the tree arc to its parent;
/// sources always point towards the parent and sinks away from it.
struct Simplex<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [&'a [f64]],
    n: usize,
    m: usize,
    root: usize,
    big: f64,
    parent: Vec<usize>,
    flow: Vec<f64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    children: Vec<Vec<usize>>,
    pivots: usize,
    cursor: usize,
    tol: f64,
}

impl<'a> Simplex<'a> {
    fn new(xs: &'a [&'a [f64]], ys: &'a [&'a [f64]], a: &[f64], b: &[f64]) -> Self {
        let (n, m) = (xs.len(), ys.len());
        let root = n + m;
        let max_cost = xs
            .par_iter()
            .map(|x| ys.iter().map(|y| sup_dist(x, y)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
        let big = max_cost + 1.0;
        let mut parent = vec![root; n + m + 1];
        parent[root] = usize::MAX;
        let mut flow = vec![0.0; n + m + 1];
        flow[..n].copy_from_slice(a);
        flow[n..n + m].copy_from_slice(b);
        let mut depth = vec![1; n + m + 1];
        depth[root] = 0;
        let mut pi = vec![-big; n + m + 1];
        for p in &mut pi[n..n + m] {
            *p = big;
        }
        pi[root] = 0.0;
        let mut children = vec![Vec::new(); n + m + 1];
        children[root] = (0..n + m).collect();
        Simplex {
            xs,
            ys,
            n,
            m,
            root,
            big,
            parent,
            flow,
            depth,
            pi,
            children,
            pivots: 0,
            cursor: 0,
            tol: 1e-12 * (max_cost + 1.0),
        }
    }

    fn is_source(&self, v: usize) -> bool {
        v < self.n
    }

    /// Cost of the tree arc owned by `v`.
    fn tree_cost(&self, v: usize) -> f64 {
        let p = self.parent[v];
        if p == self.root {
            self.big
        } else if self.is_source(v) {
            sup_dist(self.xs[v], self.ys[p - self.n])
        } else {
            sup_dist(self.xs[p], self.ys[v - self.n])
        }
    }

    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        sup_dist(self.xs[i], self.ys[j]) + self.pi[i] - self.pi[self.n + j]
    }

    /// Most negative reduced cost in the next block of arcs, scanning at most
    /// one full round.
    fn price(&mut self) -> Option<(usize, usize)> {
        let total = self.n * self.m;
        let block = ((total as f64).sqrt() as usize).max(16).min(total);
        let mut scanned = 0;
        let mut best: Option<(usize, usize, f64)> = None;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let k = self.cursor;
                self.cursor = if k + 1 == total { 0 } else { k + 1 };
                let (i, j) = (k / self.m, k % self.m);
                let rc = self.reduced_cost(i, j);
                if rc < -self.tol && best.is_none_or(|b| rc < b.2) {
                    best = Some((i, j, rc));
                }
            }
            scanned = end;
            if best.is_some() {
                break;
            }
        }
        best.map(|(i, j, _)| (i, j))
    }

    fn pivot(&mut self, i: usize, j: usize) {
        self.pivots += 1;
        let u = i;
        let v = self.n + j;
        let rc = self.reduced_cost(i, j);
        // Cycle: u → v along the new arc, then back from v to u through the
        // tree. Find the apex and the blocking arc.
        let (mut a, mut b) = (u, v);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        let apex = a;
        let mut delta = f64::INFINITY;
        let mut leave: Option<usize> = None;
        let mut leave_on_u_side = false;
        // Tree path from the apex down to u is traversed parent → child; a
        // source's arc points up, so it loses flow.
        let mut x = u;
        while x != apex {
            if self.is_source(x) && self.flow[x] < delta {
                delta = self.flow[x];
                leave = Some(x);
                leave_on_u_side = true;
            }
            x = self.parent[x];
        }
        // Path from v up to the apex is traversed child → parent; a sink's arc
        // points down, so it loses flow. Ties go to the arc nearest the apex.
        let mut x = v;
        while x != apex {
            if !self.is_source(x) && self.flow[x] <= delta {
                delta = self.flow[x];
                leave = Some(x);
                leave_on_u_side = false;
            }
            x = self.parent[x];
        }
        let q = leave.expect("uncapacitated cycle has a backward arc");
        let mut x = u;
        while x != apex {
            self.flow[x] += if self.is_source(x) { -delta } else { delta };
            x = self.parent[x];
        }
        let mut x = v;
        while x != apex {
            self.flow[x] += if self.is_source(x) { delta } else { -delta };
            x = self.parent[x];
        }
        // Re-hang the subtree cut off below q from the entering endpoint.
        let (start, attach, shift) = if leave_on_u_side { (u, v, -rc) } else { (v, u, rc) };
        let mut path = vec![start];
        while *path.last().unwrap() != q {
            let last = *path.last().unwrap();
            path.push(self.parent[last]);
        }
        let old_parent_q = self.parent[q];
        remove_child(&mut self.children[old_parent_q], q);
        for t in (1..path.len()).rev() {
            let (child, par) = (path[t - 1], path[t]);
            remove_child(&mut self.children[par], child);
            self.children[child].push(par);
            self.parent[par] = child;
            self.flow[par] = self.flow[child];
        }
        self.parent[start] = attach;
        self.flow[start] = delta;
        self.children[attach].push(start);
        let base = self.depth[attach] + 1;
        let mut stack = vec![(start, base)];
        while let Some((node, dep)) = stack.pop() {
            self.depth[node] = dep;
            self.pi[node] += shift;
            for &c in &self.children[node] {
                stack.push((c, dep + 1));
            }
        }
    }

    /// Recomputes potentials from the tree to remove accumulated rounding.
    fn refresh_potentials(&mut self) {
        let mut stack = vec![self.root];
        self.pi[self.root] = 0.0;
        while let Some(node) = stack.pop() {
            for idx in 0..self.children[node].len() {
                let c = self.children[node][idx];
                let cost = self.tree_cost(c);
                self.pi[c] = if self.is_source(c) {
                    self.pi[node] - cost
                } else {
                    self.pi[node] + cost
                };
                stack.push(c);
            }
        }
    }

    fn full_scan_min(&self) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                (0..self.m)
                    .map(|j| self.reduced_cost(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    fn run(&mut self) -> Result<()> {
        let limit = 50 * (self.n + self.m) * (self.n + self.m).max(64);
        loop {
            while let Some((i, j)) = self.price() {
                self.pivot(i, j);
                if self.pivots > limit {
                    return Err(Error::Solver(format!("no convergence after {} pivots", self.pivots)));
                }
            }
            self.refresh_potentials();
            if self.full_scan_min() >= -self.tol {
                break;
            }
        }
        let stray: f64 = (0..self.n + self.m)
            .filter(|&v| self.parent[v] == self.root)
            .map(|v| self.flow[v])
            .sum();
        if stray > 10.0 * MASS_TOLERANCE {
            return Err(Error::Solver(format!("{stray} mass left on artificial arcs")));
        }
        Ok(())
    }

    fn plan(&self) -> TransportPlan {
        let mut flows = Vec::new();
        let mut cost = 0.0;
        for v in 0..self.n + self.m {
            let p = self.parent[v];
            if p == self.root || self.flow[v] <= 0.0 {
                continue;
            }
            let (i, j) = if self.is_source(v) {
                (v, p - self.n)
            } else {
                (p, v - self.n)
            };
            cost += self.flow[v] * sup_dist(self.xs[i], self.ys[j]);
            flows.push((i, j, self.flow[v]));
        }
        flows.sort_by_key(|f| (f.0, f.1));
        // With rc = c + πᵢ − π_j ≥ 0 the functions φ = −π on sources and
        // ψ = −π on sinks satisfy φᵢ − ψ_j ≤ cᵢⱼ.
        let mut row = vec![0.0; self.n];
        let mut col = vec![0.0; self.m];
        for &(i, j, f) in &flows {
            row[i] += f;
            col[j] += f;
        }
        let dual_value: f64 = (0..self.n).map(|i| -self.pi[i] * row[i]).sum::<f64>()
            - (0..self.m).map(|j| -self.pi[self.n + j] * col[j]).sum::<f64>();
        TransportPlan {
            flows,
            cost,
            dual_value,
            min_reduced_cost: self.full_scan_min().min(0.0),
            pivots: self.pivots,
        }
    }
}

fn remove_child(list: &mut Vec<usize>, c: usize) {
    if let Some(pos) = list.iter().position(|&x| x == c) {
        list.swap_remove(pos);
    }
}

/// `∫ |F_μ − F_ν|` for measures on the line.
pub fn w1_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_pair(mu, nu)?;
    if mu.dim() != 1 {
        return Err(Error::dims("one-dimensional atoms", 1, mu.dim()));
    }
    let mut events: Vec<(f64, f64)> = mu
        .points()
        .iter()
        .zip(mu.masses())
        .map(|(p, m)| (p[0], *m))
        .chain(nu.points().iter().zip(nu.masses()).map(|(p, m)| (p[0], -m)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for w in 0..events.len() {
        cdf_gap += events[w].1;
        if w + 1 < events.len() {
            total += cdf_gap.abs() * (events[w + 1].0 - events[w].0);
        }
    }
    Ok(total)
}

/// `W₁` by the closed form on the line and the simplex otherwise.
pub fn w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: SolverOptions) -> Result<f64> {
    if mu.dim() == 1 && nu.dim() == 1 {
        w1_1d(mu, nu)
    } else {
        Ok(w1_discrete_with(mu, nu, opts)?.0)
    }
}

/// Test function for the dual bound.
pub type TestFunction<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// `max_ψ ∫ψ dμ − ∫ψ dν` over test functions that are checked to be
/// 1-Lipschitz on every pair of atoms.
pub fn dual_lower_bound(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tests: &[TestFunction<'_>]) -> Result<f64> {
    check_pair(mu, nu)?;
    if tests.is_empty() {
        return Err(Error::Empty("no test functions".into()));
    }
    let atoms: Vec<&[f64]> = mu.points().iter().chain(nu.points()).map(|p| p.as_slice()).collect();
    let mut best = f64::NEG_INFINITY;
    for psi in tests {
        let vals: Vec<f64> = atoms.iter().map(|p| psi(p)).collect();
        let bad = (0..atoms.len()).into_par_iter().find_map_any(|s| {
            (s + 1..atoms.len()).find_map(|t| {
                let d = sup_dist(atoms[s], atoms[t]);
                ((vals[s] - vals[t]).abs() > d + 1e-12 * (1.0 + d)).then_some((s, t))
            })
        });
        if let Some((s, t)) = bad {
            return Err(Error::Contract(format!(
                "test function is not 1-Lipschitz between {:?} and {:?}",
                atoms[s], atoms[t]
            )));
        }
        let k = mu.len();
        let value: f64 = mu.masses().iter().zip(&vals[..k]).map(|(m, v)| m * v).sum::<f64>()
            - nu.masses().iter().zip(&vals[k..]).map(|(m, v)| m * v).sum::<f64>();
        best = best.max(value);
    }
    Ok(best)
}

/// Sup-norm diameter of the joint support.
pub fn joint_diameter(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let atoms: Vec<&Vec<f64>> = mu.points().iter().chain(nu.points()).collect();
    (0..atoms[0].len())
        .map(|c| {
            let lo = atoms.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
            let hi = atoms.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64], masses: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|p| vec![*p]).collect(), masses.to_vec()).unwrap()
    }

    #[test]
    fn small_examples() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let (c, plan) = w1_discrete(&mu, &mu).unwrap();
        assert!(c.abs() < 1e-15);
        assert!(plan.flows.iter().all(|f| f.0 == f.1));
        let (c, _) = w1_discrete(&line(&[0.0], &[1.0]), &line(&[1.0], &[1.0])).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
        let (c, plan) = w1_discrete(&mu, &line(&[0.5], &[1.0])).unwrap();
        assert!((c - 0.5).abs() < 1e-15);
        plan.check_feasible(&mu, &line(&[0.5], &[1.0]), 1e-12).unwrap();
    }

    #[test]
    fn closed_form_examples() {
        let delta = line(&[0.0], &[1.0]);
        let third = 1.0 / 3.0;
        let spread = line(&[0.0, 0.5, 1.0], &[third, third, third]);
        assert!((w1_1d(&delta, &spread).unwrap() - 0.5).abs() < 1e-12);
        let shifted = line(&[0.7, 1.2, 1.7], &[third, third, third]);
        assert!((w1_1d(&spread, &shifted).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(w1_1d(&spread, &delta).unwrap(), w1_1d(&delta, &spread).unwrap());
    }

    #[test]
    fn mismatch_and_empty() {
        let a = line(&[0.0], &[1.0]);
        let b = line(&[0.0], &[0.5]);
        assert!(matches!(w1_discrete(&a, &b), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn random_agreement_and_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let (n, m) = (rng.gen_range(1..30), rng.gen_range(1..30));
            let mk = |rng: &mut ChaCha8Rng, k: usize| {
                let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.01).collect();
                let s: f64 = w.iter().sum();
                let pts: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                line(&pts, &w.iter().map(|x| x / s).collect::<Vec<_>>())
            };
            let mu = mk(&mut rng, n);
            let nu = mk(&mut rng, m);
            let (c, plan) = w1_discrete(&mu, &nu).unwrap();
            let exact = w1_1d(&mu, &nu).unwrap();
            assert!((c - exact).abs() < 1e-9, "{c} vs {exact}");
            assert!((plan.dual_value - c).abs() < 1e-9);
            plan.check_feasible(&mu, &nu, 1e-10).unwrap();
            let psi = |x: &[f64]| x[0];
            let lb = dual_lower_bound(&mu, &nu, &[&psi]).unwrap();
            assert!(lb <= c + 1e-9);
        }
    }

    #[test]
    fn dual_rejects_steep_functions() {
        let a = line(&[0.0], &[1.0]);
        let b = line(&[1.0], &[1.0]);
        let id = |x: &[f64]| x[0];
        assert!((dual_lower_bound(&b, &a, &[&id]).unwrap() - 1.0).abs() < 1e-15);
        let steep = |x: &[f64]| 2.0 * x[0];
        assert!(matches!(dual_lower_bound(&a, &b, &[&steep]), Err(Error::Contract(_))));
    }

    #[test]
    fn plan_csv() {
        let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = line(&[0.5], &[1.0]);
        let (_, plan) = w1_discrete(&mu, &nu).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mu, &nu, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("src_idx,dst_idx,mass,cost_contrib\n0,0,0.5,0.25\n"));
    }
}
