use proptest::prelude::*;
use rectiflow::lipschitz_approx::{build_quantized_approximant, mcshane_extend, sup_grid_error, LipschitzSample};
use rectiflow::measures::DiscreteMeasure;
use rectiflow::wasserstein::{
    dual_lower_bound, joint_diameter, sup_dist, w1_1d, w1_discrete, w1_discrete_with, SolverOptions,
};

fn measure(d: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-1.0f64..=1.0, d), 1u32..20), 1..=max_atoms).prop_map(|atoms| {
        let total: u32 = atoms.iter().map(|(_, w)| w).sum();
        let (points, masses) = atoms.into_iter().map(|(p, w)| (p, w as f64 / total as f64)).unzip();
        DiscreteMeasure::new(points, masses).unwrap()
    })
}

/// Random Lipschitz function on `[0,1]` given by its slopes on `k` equal
/// pieces, shifted to keep the values small.
fn ramp(slopes: &[f64]) -> impl Fn(f64) -> f64 + Sync + '_ {
    move |x: f64| {
        let k = slopes.len() as f64;
        let mut acc = 0.0;
        for (i, s) in slopes.iter().enumerate() {
            let a = i as f64 / k;
            acc += s * (x - a).clamp(0.0, 1.0 / k);
        }
        acc
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn line_closed_form_matches_simplex(mu in measure(1, 50), nu in measure(1, 50)) {
        let (cost, plan) = w1_discrete(&mu, &nu).unwrap();
        prop_assert!((cost - w1_1d(&mu, &nu).unwrap()).abs() <= 1e-9);
        plan.check_feasible(&mu, &nu, 1e-10).unwrap();
    }

    #[test]
    fn primal_dominates_dual(mu in measure(2, 25), nu in measure(2, 25), c in prop::collection::vec(-1.0f64..1.0, 2)) {
        let (cost, plan) = w1_discrete(&mu, &nu).unwrap();
        let first = |x: &[f64]| x[0];
        let second = |x: &[f64]| -x[1];
        let cone = |x: &[f64]| sup_dist(x, &c);
        let lb = dual_lower_bound(&mu, &nu, &[&first, &second, &cone]).unwrap();
        prop_assert!(lb <= cost + 1e-9);
        prop_assert!((plan.dual_value - cost).abs() <= 1e-9 * (1.0 + cost));
        let flows: f64 = plan.flows.iter().map(|(i, j, f)| f * sup_dist(&mu.points()[*i], &nu.points()[*j])).sum();
        prop_assert!((flows - cost).abs() <= 1e-9);
    }

    #[test]
    fn triangle_and_diameter(a in measure(2, 20), b in measure(2, 20), c in measure(2, 20)) {
        let opts = SolverOptions::default();
        let ab = w1_discrete_with(&a, &b, opts).unwrap().0;
        let bc = w1_discrete_with(&b, &c, opts).unwrap().0;
        let ac = w1_discrete_with(&a, &c, opts).unwrap().0;
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(ab <= joint_diameter(&a, &b) + 1e-12);
    }

    #[test]
    fn mcshane_extension_is_lipschitz(
        pts in prop::collection::vec(0.0f64..=1.0, 1..12),
        slopes in prop::collection::vec(-2.0f64..=2.0, 5),
        probes in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 20),
    ) {
        let f = ramp(&slopes);
        let values: Vec<f64> = pts.iter().map(|x| f(*x)).collect();
        let sample = LipschitzSample::scalar(pts.iter().map(|x| vec![*x]).collect(), values.clone(), 2.0, 2.0).unwrap();
        for (p, v) in pts.iter().zip(&values) {
            prop_assert!((mcshane_extend(&sample, &[*p]).unwrap()[0] - v).abs() <= 1e-12);
        }
        for (x, y) in probes {
            let fx = mcshane_extend(&sample, &[x]).unwrap()[0];
            let fy = mcshane_extend(&sample, &[y]).unwrap()[0];
            prop_assert!((fx - fy).abs() <= 2.0 * (x - y).abs() + 1e-12);
        }
    }

    #[test]
    fn quantized_approximant_error(slopes in prop::collection::vec(-1.5f64..=1.5, 1..6), n_pow in 1u32..=4) {
        let n = 1u64 << n_pow;
        let f = ramp(&slopes);
        let lip = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        prop_assume!(lip + 1.5 <= n as f64);
        let pts: Vec<Vec<f64>> = (0..=64).map(|i| vec![i as f64 / 64.0]).collect();
        let vals = pts.iter().map(|p| f(p[0])).collect();
        let sample = LipschitzSample::scalar(pts, vals, lip, 1.5).unwrap();
        let approx = build_quantized_approximant(&sample, n).unwrap();
        let err = sup_grid_error(&approx, |x| mcshane_extend(&sample, x).unwrap()[0], 512);
        prop_assert!(err <= (lip + 0.5) / n as f64 + 1e-9, "{err}");
    }
}
