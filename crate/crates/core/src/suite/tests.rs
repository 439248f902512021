use super::*;
use crate::linalg::Matrix;

fn p64(fid: u32, dim: usize, iid: u32) -> Problem<f64> {
    make_problem(fid, dim, iid).unwrap()
}

#[test]
fn instances_are_deterministic() {
    let a = p64(1, 5, 1);
    let b = p64(1, 5, 1);
    assert_eq!(a.transform(), b.transform());
    let c = p64(1, 5, 2);
    assert_ne!(a.xopt(), c.xopt());
}

#[test]
fn core_subset_is_supported() {
    for fid in [1, 2, 3, 5, 6, 8, 10, 12, 14, 15, 20, 21] {
        assert!(make_problem::<f64>(fid, 5, 1).is_ok(), "f{fid}");
    }
}

#[test]
fn unknown_function_lists_supported_ids() {
    let err = make_problem::<f64>(99, 5, 1).unwrap_err();
    match &err {
        Error::UnsupportedFunction { fid, supported } => {
            assert_eq!(*fid, 99);
            assert!(supported.starts_with("1, 2, 3"));
            assert!(supported.ends_with("24"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("unsupported function"));
}

#[test]
fn rejects_bad_dimension_and_instance() {
    assert!(make_problem::<f64>(1, 1, 1).is_err());
    assert!(make_problem::<f64>(1, 5, 0).is_err());
}

#[test]
fn rotations_are_orthogonal() {
    for fid in NATIVE_FIDS {
        for iid in 1..=5 {
            for dim in [5usize, 30] {
                let p = p64(fid, dim, iid);
                for m in [&p.transform().r, &p.transform().q] {
                    let rows: Vec<Vec<f64>> = m.chunks(dim).map(|c| c.to_vec()).collect();
                    let err = Matrix::from_rows(&rows).orthogonality_error();
                    assert!(err <= 1e-10, "f{fid} d{dim} i{iid}: {err}");
                }
            }
        }
    }
}

#[test]
fn optimum_location_lies_inside_inner_box() {
    for fid in NATIVE_FIDS.iter().copied().filter(|&f| f != 5) {
        for dim in [2usize, 5, 30] {
            let p = p64(fid, dim, 3);
            assert!(p.xopt().iter().all(|v| v.abs() <= 4.0), "f{fid} d{dim}");
        }
    }
    let p = p64(5, 5, 1);
    assert!(p.xopt().iter().all(|v| v.abs() == 5.0));
}

#[test]
fn fopt_is_clipped_and_rounded() {
    for fid in NATIVE_FIDS {
        for iid in 1..=5 {
            let f = p64(fid, 5, iid).fopt();
            assert!(f.abs() <= 1000.0);
            assert!(((f * 100.0).round() - f * 100.0).abs() < 1e-6);
        }
    }
}

#[test]
fn optimum_value_is_exact() {
    for fid in NATIVE_FIDS {
        for dim in [2usize, 5, 30] {
            let p = p64(fid, dim, 1);
            assert_eq!(p.evaluate(p.xopt()), p.fopt(), "f{fid} d{dim}");
        }
    }
}

#[test]
fn sphere_unit_offset() {
    let p = p64(1, 5, 1);
    let mut x = p.xopt().to_vec();
    x[0] += 1.0;
    assert!((p.evaluate(&x) - (p.fopt() + 1.0)).abs() < 1e-9);
}

#[test]
fn ellipsoid_core_matches_direct_sum() {
    for d in [2usize, 5, 10] {
        let z = vec![1.0f64; d];
        let mut oracle = 0.0;
        for i in 1..=d {
            oracle += 10f64.powf(6.0 * (i - 1) as f64 / (d - 1) as f64);
        }
        assert!((ellipsoid_core(&z) - oracle).abs() <= 1e-9 * oracle);
    }
}

#[test]
fn local_perturbation_never_improves_on_optimum() {
    let mut rng = crate::rng::rng_from_seed(17);
    for fid in NATIVE_FIDS.iter().copied().filter(|&f| f != 5) {
        for dim in [5usize, 30] {
            let p = p64(fid, dim, 2);
            let tol = 1e-12 * p.fopt().abs().max(1.0);
            for _ in 0..100 {
                let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = crate::linalg::norm(&u);
                let x: Vec<f64> = p.xopt().iter().zip(&u).map(|(a, b)| a + 1e-6 * b / n).collect();
                let v = p.evaluate(&x);
                assert!(v >= p.fopt() - tol, "f{fid} d{dim}: {v} < {}", p.fopt());
            }
        }
    }
}

#[test]
fn random_points_stay_above_optimum() {
    let mut rng = crate::rng::rng_from_seed(3);
    for fid in NATIVE_FIDS {
        let p = p64(fid, 5, 4);
        let tol = 1e-12 * p.fopt().abs().max(1.0);
        for _ in 0..500 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-7.0..7.0)).collect();
            let v = p.evaluate(&x);
            assert!(v.is_finite());
            assert!(v >= p.fopt() - tol, "f{fid}: {v}");
        }
    }
}

#[test]
fn single_precision_problem_tracks_double() {
    for fid in [1u32, 2, 8, 15] {
        let p = p64(fid, 5, 1);
        let q: Problem<f32> = make_problem(fid, 5, 1).unwrap();
        let x: Vec<f64> = p.xopt().iter().map(|v| v + 0.3).collect();
        let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let (a, b) = (p.evaluate(&x), q.evaluate(&xf) as f64);
        assert!((a - b).abs() <= 1e-3 * a.abs().max(1.0), "f{fid}: {a} vs {b}");
    }
}

#[test]
fn f0_is_uniform_and_replayable() {
    let mut f = make_f0(3, 11);
    let x = [0.5; 3];
    let a = f.evaluate(&x);
    let b = f.evaluate(&x);
    assert_ne!(a, b);
    let mut g = make_f0(3, 11);
    assert_eq!(g.evaluate(&x), a);
    assert_eq!(g.evaluate(&x), b);
    assert_eq!(Objective::bounds(&f), (0.0, 1.0));

    let mut h = make_f0(2, 5);
    let n = 100_000;
    let mean = (0..n).map(|_| h.evaluate(&[0.1, 0.9])).sum::<f64>() / n as f64;
    assert!((0.49..=0.51).contains(&mean), "{mean}");
}

#[test]
fn plugin_registry() {
    let mut suite = Suite::bbob();
    assert!(suite.register_fn(3, "clash", (-1.0, 1.0), None, |_| 0.0).is_err());
    suite.register_fn(101, "abs-sum", (-2.0, 2.0), Some(0.0), |x| x.iter().map(|v| v.abs()).sum()).unwrap();
    let mut obj = suite.make(101, 3, 1).unwrap();
    assert_eq!(obj.evaluate(&[1.0, -1.0, 0.5]), 2.5);
    assert_eq!(obj.bounds(), (-2.0, 2.0));
    assert_eq!(obj.fopt(), Some(0.0));
    assert!(suite.supported().contains(&101));
    let err = suite.make(102, 3, 1).err().unwrap();
    assert!(err.to_string().contains("101"));
    let native = suite.make(1, 5, 1).unwrap();
    assert_eq!(native.name(), "f1_d5_i1");
}
