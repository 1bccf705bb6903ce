use proptest::prelude::*;

use wdnorm::cone::{self, ConeSpec};
use wdnorm::eigen::{self, EigenOptions};
use wdnorm::model::{self, DesignMatrix, IndexSet, NoiseModel};
use wdnorm::norms::{self, NormSpec, Partition};
use wdnorm::oracle::{self, DesignSource, ExperimentConfig, LambdaRule};
use wdnorm::solve::{self, SolveOptions};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn coef(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![1 => Just(0.0), 4 => -3.0..3.0f64],
        p,
    )
}

/// Every norm family on `p = 6` coordinates.
fn family() -> impl Strategy<Value = NormSpec> {
    let halves = Partition::new(vec![vec![0, 1, 2], vec![3, 4], vec![5]]).unwrap();
    prop_oneof![
        Just(NormSpec::L1),
        Just(NormSpec::Group(halves.clone())),
        Just(NormSpec::trivial_g(vec![1, 2])),
        Just(NormSpec::Cone(ConeSpec::FullOrthant)),
        Just(NormSpec::Cone(ConeSpec::Monotone)),
        Just(NormSpec::Cone(ConeSpec::GroupConstant(halves))),
        Just(NormSpec::Cone(ConeSpec::PolyhedralRays(vec![
            vec![1.0, 0.5, 0.0, 0.2, 0.0, 0.1],
            vec![0.0, 1.0, 1.0, 0.0, 0.3, 0.0],
            vec![0.2, 0.2, 0.2, 1.0, 1.0, 1.0],
        ]))),
    ]
}

fn subset(p: usize) -> impl Strategy<Value = IndexSet> {
    prop::collection::vec(any::<bool>(), p).prop_map(move |mask| {
        IndexSet::new(p, (0..p).filter(|&j| mask[j])).unwrap()
    })
}

fn design(n: usize, p: usize) -> impl Strategy<Value = DesignMatrix> {
    any::<u64>().prop_map(move |seed| model::gaussian_design(n, p, 0.3, seed).unwrap())
}

proptest! {
    #[test]
    fn restrict_is_idempotent_and_decomposes(beta in coef(7), s in subset(7)) {
        let once = model::restrict(&beta, &s).unwrap();
        prop_assert_eq!(&model::restrict(&once, &s).unwrap(), &once);
        let rest = model::restrict(&beta, &s.complement()).unwrap();
        let sum: Vec<f64> = once.iter().zip(&rest).map(|(a, b)| a + b).collect();
        prop_assert_eq!(sum, beta);
    }

    #[test]
    fn normalized_norm_is_homogeneous(v in prop::collection::vec(-5.0..5.0f64, 1..20), c in -10.0..10.0f64) {
        let base = model::normalized_norm(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let got = model::normalized_norm(&scaled).unwrap();
        prop_assert!((got - c.abs() * base).abs() <= 1e-12 * (c.abs() * base).max(1e-300));
    }

    #[test]
    fn seeded_noise_repeats(seed in any::<u64>(), n in 1usize..50) {
        let m = NoiseModel::gaussian(1.3, seed);
        prop_assert_eq!(model::draw_noise(&m, n).unwrap(), model::draw_noise(&m, n).unwrap());
    }

    #[test]
    fn norm_axioms(spec in family(), a in coef(6), b in coef(6), c in -4.0..4.0f64) {
        let na = norms::norm_eval(&spec, &a).unwrap();
        let nb = norms::norm_eval(&spec, &b).unwrap();
        let ca: Vec<f64> = a.iter().map(|x| c * x).collect();
        prop_assert!((norms::norm_eval(&spec, &ca).unwrap() - c.abs() * na).abs() <= 1e-9 * na.max(1.0));
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        prop_assert!(norms::norm_eval(&spec, &ab).unwrap() <= na + nb + 1e-9);
    }

    #[test]
    fn cauchy_schwarz(spec in family(), beta in coef(6), w in prop::collection::vec(-3.0..3.0f64, 6)) {
        let bound = norms::dual_norm_eval(&spec, &w).unwrap() * norms::norm_eval(&spec, &beta).unwrap();
        prop_assert!(dot(&w, &beta).abs() <= bound * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn weak_decomposability_on_allowed_sets(spec in family(), beta in coef(6), s in subset(6)) {
        let cert = norms::is_allowed_set(&spec, &s);
        if cert.allowed {
            prop_assert!(norms::weak_decomposability_slack(&spec, &s, &beta).unwrap() >= -1e-9);
        } else {
            prop_assert!(norms::residual_norm(&spec, &s).is_err());
        }
    }

    #[test]
    fn disallowed_counterexamples_break_decomposability(s in subset(6)) {
        let spec = NormSpec::Group(Partition::new(vec![vec![0, 1, 2], vec![3, 4], vec![5]]).unwrap());
        let cert = norms::is_allowed_set(&spec, &s);
        if let Some(beta) = cert.counterexample {
            // Moving off S along the counterexample grows Ω only to second
            // order, so no norm Ω^{S^c} can satisfy the decomposition.
            prop_assert!(!cert.allowed);
            let on = model::restrict(&beta, &s).unwrap();
            let off = model::restrict(&beta, &s.complement()).unwrap();
            let base = norms::norm_eval(&spec, &on).unwrap();
            let t = 1e-6;
            let moved: Vec<f64> = on.iter().zip(&off).map(|(a, b)| a + t * b).collect();
            let rate = (norms::norm_eval(&spec, &moved).unwrap() - base) / t;
            prop_assert!(rate <= 1e-4, "rate {rate}");
        }
    }

    #[test]
    fn prox_beats_perturbations(spec in family(), v in coef(6), t in 0.05..2.0f64, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let z = norms::prox(&spec, &v, t).unwrap();
        let value = |u: &[f64]| {
            0.5 * u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                + t * norms::norm_eval(&spec, u).unwrap()
        };
        let fz = value(&z);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for k in 0..200 {
            let scale = 10f64.powi(k % 4 - 3);
            let zp: Vec<f64> = z.iter().map(|x| x + scale * (rng.random::<f64>() - 0.5)).collect();
            prop_assert!(fz <= value(&zp) + 1e-8);
        }
    }

    #[test]
    fn cone_norm_sandwich(beta in coef(6), k in 1usize..=6) {
        let l1: f64 = beta.iter().map(|x| x.abs()).sum();
        for spec in [ConeSpec::FullOrthant, ConeSpec::Monotone] {
            prop_assert!(cone::cone_norm_eval(&spec, &beta).unwrap().value >= l1 - 1e-9);
        }
        // 1 on a prefix lies in the monotone cone
        let bs: Vec<f64> = beta.iter().enumerate().map(|(j, &b)| if j < k { b } else { 0.0 }).collect();
        let ub = (k as f64).sqrt() * dot(&bs, &bs).sqrt();
        prop_assert!(cone::cone_norm_eval(&ConeSpec::Monotone, &bs).unwrap().value <= ub + 1e-9);
    }

    #[test]
    fn monotone_blocks_never_merge_profitably(beta in coef(7)) {
        let part = cone::monotone_contiguous_partition(&beta);
        let value = |blocks: &[Vec<usize>]| -> f64 {
            blocks.iter().map(|b| {
                let ss: f64 = b.iter().map(|&j| beta[j - 1] * beta[j - 1]).sum();
                (b.len() as f64).sqrt() * ss.sqrt()
            }).sum()
        };
        let blocks = part.to_one_based();
        let base = value(&blocks);
        let levels: Vec<f64> = blocks.iter().map(|b| {
            (b.iter().map(|&j| beta[j - 1] * beta[j - 1]).sum::<f64>() / b.len() as f64).sqrt()
        }).collect();
        for t in 0..blocks.len().saturating_sub(1) {
            prop_assert!(levels[t] > levels[t + 1] || levels[t + 1] == 0.0);
            let mut merged = blocks.clone();
            let next = merged.remove(t + 1);
            merged[t].extend(next);
            prop_assert!(value(&merged) >= base - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigenvalue_decreases_in_l(x in design(12, 6), s in subset(6), l1 in 0.0..3.0f64, dl in 0.0..3.0f64) {
        prop_assume!(!s.is_empty());
        let opts = EigenOptions::default();
        let a = eigen::l1_eigenvalue(&x, &s, l1, &opts).unwrap();
        let b = eigen::l1_eigenvalue(&x, &s, l1 + dl, &opts).unwrap();
        prop_assert!(a.value >= b.value - 1e-9);
    }

    #[test]
    fn eigenvalue_witness_is_feasible(x in design(12, 6), s in subset(6), l in 0.0..4.0f64) {
        prop_assume!(!s.is_empty());
        let r = eigen::l1_eigenvalue(&x, &s, l, &EigenOptions::default()).unwrap();
        let on: f64 = s.indices().iter().map(|&j| r.witness[j].abs()).sum();
        let off: f64 = s.complement().indices().iter().map(|&j| r.witness[j].abs()).sum();
        prop_assert!((on - 1.0).abs() <= 1e-8);
        prop_assert!(off <= l + 1e-8);
        let obj = eigen::eigen_objective(&x, &s, &r.witness).unwrap();
        prop_assert!((obj - r.upper_bound).abs() <= 1e-8);
    }

    #[test]
    fn cone_condition_bounds_the_support_part(x in design(12, 6), s in subset(6), l in 0.1..3.0f64, dir in coef(6)) {
        prop_assume!(!s.is_empty());
        // Scale the S^c part of an arbitrary direction into the cone condition.
        let on: f64 = s.indices().iter().map(|&j| dir[j].abs()).sum();
        prop_assume!(on > 0.0);
        let off: f64 = s.complement().indices().iter().map(|&j| dir[j].abs()).sum();
        let shrink = if off > l * on { l * on / off } else { 1.0 };
        let beta: Vec<f64> = (0..6).map(|j| if s.contains(j) { dir[j] } else { shrink * dir[j] }).collect();
        let r = eigen::l1_eigenvalue(&x, &s, l, &EigenOptions::default()).unwrap();
        prop_assume!(r.lower_bound > 0.0);
        let gamma = 1.0 / r.lower_bound;
        let signed: Vec<f64> = (0..6).map(|j| if s.contains(j) { beta[j] } else { -beta[j] }).collect();
        let fit = model::normalized_norm(&x.mul(&signed)).unwrap();
        prop_assert!(on <= gamma * fit * (1.0 + 1e-7));
    }

    #[test]
    fn duplicated_column_in_set_is_degenerate(x in design(10, 5), l in 0.0..3.0f64) {
        let mut cols: Vec<Vec<f64>> = (0..5).map(|j| x.column(j).to_vec()).collect();
        cols.push(cols[0].clone());
        let xd = DesignMatrix::from_columns(&cols).unwrap();
        let s = IndexSet::new(6, [0, 5]).unwrap();
        let r = eigen::l1_eigenvalue(&xd, &s, l, &EigenOptions::default()).unwrap();
        prop_assert!(r.value <= 1e-8);
    }

    #[test]
    fn solution_scales_with_response(x in design(20, 6), y in prop::collection::vec(-2.0..2.0f64, 20), c in 0.2..5.0f64, frac in 0.05..0.6f64) {
        let spec = NormSpec::L1;
        let z: Vec<f64> = x.tmul(&y).iter().map(|v| v / 20.0).collect();
        let lambda = frac * norms::dual_norm_eval(&spec, &z).unwrap();
        let opts = SolveOptions { tolerance: 1e-11, ..SolveOptions::default() };
        let a = solve::solve_penalized_ls(&x, &y, lambda, &spec, &opts).unwrap();
        let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
        let b = solve::solve_penalized_ls(&x, &cy, c * lambda, &spec, &opts).unwrap();
        for (u, v) in a.beta.iter().zip(&b.beta) {
            prop_assert!((c * u - v).abs() <= 1e-8 * c.max(1.0));
        }
    }

    #[test]
    fn repeated_column_keeps_fitted_values(x in design(20, 5), y in prop::collection::vec(-2.0..2.0f64, 20), frac in 0.05..0.6f64) {
        let mut cols: Vec<Vec<f64>> = (0..5).map(|j| x.column(j).to_vec()).collect();
        cols.push(cols[2].clone());
        let xd = DesignMatrix::from_columns(&cols).unwrap();
        let z: Vec<f64> = x.tmul(&y).iter().map(|v| v / 20.0).collect();
        let lambda = frac * z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let opts = SolveOptions { tolerance: 1e-11, ..SolveOptions::default() };
        let a = solve::solve_penalized_ls(&x, &y, lambda, &NormSpec::L1, &opts).unwrap();
        let b = solve::solve_penalized_ls(&xd, &y, lambda, &NormSpec::L1, &opts).unwrap();
        for (u, v) in x.mul(&a.beta).iter().zip(&xd.mul(&b.beta)) {
            prop_assert!((u - v).abs() <= 1e-8);
        }
    }

    #[test]
    fn objective_history_is_monotone(spec in family(), x in design(20, 6), y in prop::collection::vec(-2.0..2.0f64, 20)) {
        let z: Vec<f64> = x.tmul(&y).iter().map(|v| v / 20.0).collect();
        let lambda = 0.2 * norms::dual_norm_eval(&spec, &z).unwrap();
        let opts = SolveOptions { record_history: true, max_iterations: 2000, ..SolveOptions::default() };
        let fit = solve::solve_penalized_ls(&x, &y, lambda, &spec, &opts).unwrap();
        for w in fit.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn larger_gamma_never_flips_a_pass(seed in 0u64..1000) {
        let cfg = ExperimentConfig {
            design: DesignSource::Gaussian { n: 30, p: 6, rho: 0.0, seed },
            beta0: vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            beta: None,
            set: None,
            norm: NormSpec::L1,
            sigma: 0.5,
            replicates: 1,
            seed,
            lambda: LambdaRule::default(),
            delta_slack: 0.1,
            eigen: EigenOptions::default(),
            eigen_upper: false,
            solver: SolveOptions::default(),
        };
        let rep = &oracle::oracle_check(&cfg).unwrap()[0];
        let (Some(g), Some(est), Some(slack)) = (rep.gamma2, rep.estimation_term, rep.slack) else {
            return Ok(());
        };
        let factor = est / g;
        for bigger in [g * 1.5, g * 10.0, f64::INFINITY] {
            let s = slack + factor * (bigger - g);
            prop_assert!(s >= slack);
        }
    }
}
