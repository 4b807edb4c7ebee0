use std::sync::Arc;

use heatrm_core::rm::{l2_dist, noise_stream};
use heatrm_core::*;
use proptest::prelude::*;

fn dominant() -> impl Strategy<Value = (TriDiag, Vec<f64>)> {
    (1usize..=24).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n - 1),
            prop::collection::vec(-1.0f64..1.0, n - 1),
            prop::collection::vec(0.05f64..3.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(sub, sup, extra, rhs)| {
                let diag = (0..n)
                    .map(|i| {
                        let l = if i > 0 { sub[i - 1].abs() } else { 0.0 };
                        let r = if i + 1 < n { sup[i].abs() } else { 0.0 };
                        l + r + extra[i]
                    })
                    .collect();
                (TriDiag::new(sub, diag, sup).unwrap(), rhs)
            })
    })
}

fn cn(a: f64, intervals: usize) -> TriDiag {
    TriDiag::symmetric_constant(intervals - 1, 2.0 + 2.0 * a, -a).unwrap()
}

proptest! {
    #[test]
    fn thomas_residual_is_small((m, rhs) in dominant()) {
        let x = m.thomas_solve(&rhs).unwrap();
        let r = m.matvec(&x).unwrap();
        let norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(l2_dist(&r, &rhs) <= 1e-12 * norm.max(1.0));
    }

    #[test]
    fn matvec_is_linear((m, x) in dominant(), s in -3.0f64..3.0) {
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 - 1.0).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| s * p + q).collect();
        let lhs = m.matvec(&combo).unwrap();
        let mx = m.matvec(&x).unwrap();
        let my = m.matvec(&y).unwrap();
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (s * mx[i] + my[i])).abs() <= 1e-11);
        }
    }

    #[test]
    fn implicit_plus_explicit_is_four_identity(d in 0.0f64..5.0, n in 2usize..40, t_end in 0.01f64..2.0) {
        let p = HeatProblem::sine(d, 0.0, 1.0).unwrap();
        let g = Grid::new(&p, n, 7, t_end).unwrap();
        let sys = assemble_cn(&g).unwrap();
        let sum = sys.implicit.add(&sys.explicit).unwrap();
        let tol = 4.0 * f64::EPSILON * (1.0 + g.ratio);
        prop_assert!(sum.diag().iter().all(|v| (v - 4.0).abs() <= tol));
        prop_assert!(sum.sub().iter().chain(sum.sup()).all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_is_affine_in_the_previous_level(
        u in prop::collection::vec(-2.0f64..2.0, 9),
        v in prop::collection::vec(-2.0f64..2.0, 9),
        lo in -1.0f64..1.0,
        hi in -1.0f64..1.0,
        s in -2.0f64..2.0,
    ) {
        let p = HeatProblem::new(0.7, 0.0, 1.0, Arc::new(|_| 0.0), Arc::new(move |t| lo + t), Arc::new(move |_| hi)).unwrap();
        let g = Grid::new(&p, 10, 4, 0.3).unwrap();
        let sys = assemble_cn(&g).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| s * a + (1.0 - s) * b).collect();
        let ru = sys.build_rhs(&p, &g, &u, 2).unwrap();
        let rv = sys.build_rhs(&p, &g, &v, 2).unwrap();
        let rw = sys.build_rhs(&p, &g, &w, 2).unwrap();
        for i in 0..9 {
            prop_assert!((rw[i] - (s * ru[i] + (1.0 - s) * rv[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn product_norm_is_submultiplicative(a in 0.1f64..3.0, i in 1usize..30, gap1 in 0usize..30, gap2 in 0usize..30) {
        let m = cn(a, 10);
        let (j, k) = (i + gap1, i + gap1 + gap2);
        let whole = product_norm(&m, i, k, 1.0).unwrap();
        let parts = product_norm(&m, i, j, 1.0).unwrap() * product_norm(&m, j, k, 1.0).unwrap();
        prop_assert!(whole <= parts * (1.0 + 1e-12) + 1e-300);
        prop_assert_eq!(product_norm(&m, i, i, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn hoeffding_decreases_in_k(eps in 1e-3f64..1.0, alpha in 1e-2f64..1e3, p in 0.1f64..2.0, k in 1usize..10_000) {
        let now = hoeffding_bound(eps, k, alpha, p);
        let next = hoeffding_bound(eps, k + 1, alpha, p);
        prop_assert!(next <= now);
        prop_assert!(next < now || now == 0.0);
    }

    #[test]
    fn noise_is_strictly_inside_the_ball(dim in 1usize..20, b in 1e-3f64..10.0, seed in any::<u64>()) {
        let noise = NoiseModel::uniform(dim, b).unwrap();
        let mut rng = noise_stream(seed, 0);
        let zero = vec![0.0; dim];
        for _ in 0..200 {
            prop_assert!(l2_dist(&noise.sample(&mut rng), &zero) < b);
        }
    }

    #[test]
    fn rm_solve_is_reproducible(seed in any::<u64>(), stream in 0u64..1000) {
        let a = cn(1.0, 6);
        let rhs = vec![1.0, -0.5, 0.25, 0.0, 2.0];
        let noise = NoiseModel::uniform(5, 0.3).unwrap();
        let mut cfg = RmConfig::new(500, vec![0.0; 5], seed);
        cfg.stream = stream;
        let (x1, t1) = rm_solve(&a, &rhs, &cfg, &noise).unwrap();
        let (x2, t2) = rm_solve(&a, &rhs, &cfg, &noise).unwrap();
        prop_assert_eq!(x1, x2);
        prop_assert_eq!(t1.err_norms, t2.err_norms);
    }
}
