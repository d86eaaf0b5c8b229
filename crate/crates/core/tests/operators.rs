use std::f64::consts::PI;

use pdtc::lattice::{orient_graph, sample_graph};
use pdtc::linalg::{frobenius, hermitian_expm, matvec};
use pdtc::operators::{build_hdd, build_hsl, build_operators, toggling_average, Axis};
use pdtc::C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(n: usize, seed: u64) -> pdtc::SpinGraph64 {
    orient_graph(&sample_graph::<f64>(n, 0.9, 1.1, seed).unwrap()).unwrap()
}

fn random_vec(dim: usize, seed: u64) -> Vec<C<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect()
}

fn max_gap(a: &[C<f64>], b: &[C<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn toggling_average_matches_spin_lock_for_multiples_of_four() {
    for n_spins in [4, 6] {
        let g = graph(n_spins, 2);
        let ops = build_operators(n_spins).unwrap();
        let hdd = build_hdd(&g, &ops, None).unwrap();
        let hsl = build_hsl(&g, &ops).unwrap().dense().unwrap();
        for n in [3, 7, 15] {
            let avg = toggling_average(&hdd, &ops, n, PI / 2.0).unwrap();
            assert!(frobenius(&(avg - &hsl)) < 1e-10, "L={n_spins} N={n}");
        }
    }
}

#[test]
fn toggling_residual_falls_as_one_over_n_plus_one() {
    // N + 1 = 5 and 9 leave the same unpaired frame, weighted 1/(N + 1).
    let g = graph(4, 5);
    let ops = build_operators(4).unwrap();
    let hdd = build_hdd(&g, &ops, None).unwrap();
    let hsl = build_hsl(&g, &ops).unwrap().dense().unwrap();
    let r4 = frobenius(&(toggling_average(&hdd, &ops, 4, PI / 2.0).unwrap() - &hsl));
    let r8 = frobenius(&(toggling_average(&hdd, &ops, 8, PI / 2.0).unwrap() - &hsl));
    assert!(r4 > 1e-3);
    assert!((r4 / r8 - 9.0 / 5.0).abs() < 1e-9, "{}", r4 / r8);
}

#[test]
fn pi_rotation_about_y_flips_z_and_keeps_hdd() {
    let n = 4;
    let g = graph(n, 9);
    let ops = build_operators(n).unwrap();
    let iy = ops.dense_collective::<f64>(Axis::Y).unwrap();
    let iz = ops.dense_collective::<f64>(Axis::Z).unwrap();
    let h = build_hdd(&g, &ops, None).unwrap().dense().unwrap();
    let r = hermitian_expm(&iy, PI);
    let rd = r.adjoint();
    assert!(frobenius(&(&rd * &iz * &r + &iz)) < 1e-12);
    assert!(frobenius(&(&rd * &h * &r - &h)) < 1e-12);
}

#[test]
fn matrix_free_agrees_with_dense() {
    for n in [3, 5, 6] {
        let ops = build_operators(n).unwrap();
        let g = graph(n, n as u64);
        let hdd = build_hdd(&g, &ops, Some(&vec![0.3; n])).unwrap();
        let hsl = build_hsl(&g, &ops).unwrap();
        for seed in 0..3 {
            let v = random_vec(ops.dim(), seed);
            let mut out = vec![C::new(0.0, 0.0); ops.dim()];
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                ops.apply_collective(axis, &v, &mut out);
                let d = matvec(&ops.dense_collective::<f64>(axis).unwrap(), &v);
                assert!(max_gap(&out, &d) < 1e-12);
                for k in 0..n {
                    ops.apply_site(axis, k, &v, &mut out);
                    let d = matvec(&ops.dense_site::<f64>(axis, k).unwrap(), &v);
                    assert!(max_gap(&out, &d) < 1e-12);
                }
            }
            hdd.apply(&v, &mut out);
            assert!(max_gap(&out, &matvec(&hdd.dense().unwrap(), &v)) < 1e-12);
            hsl.apply(&v, &mut out);
            assert!(max_gap(&out, &matvec(&hsl.dense().unwrap(), &v)) < 1e-12);
        }
    }
}

#[test]
fn spin_lock_conserves_total_x() {
    let g = graph(5, 1);
    let ops = build_operators(5).unwrap();
    let h = build_hsl(&g, &ops).unwrap().dense().unwrap();
    let ix = ops.dense_collective::<f64>(Axis::X).unwrap();
    assert!(frobenius(&(&h * &ix - &ix * &h)) < 1e-12);
}
