use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamforge_core::kernels::{ComplexSignal, Direction, GemmDims};
use streamforge_core::oracles::*;
use streamforge_core::{ScalarKind, StreamArray};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> StreamArray {
    StreamArray::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0f64..1.0)).collect()).unwrap()
}

#[test]
fn fast_native_agrees_with_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let (m, n, l) = (rng.gen_range(1..=300), rng.gen_range(1..=300), rng.gen_range(1..=300));
        let d = GemmDims::new(m, n, l).unwrap();
        let (a, b) = (random_matrix(&mut rng, m, l), random_matrix(&mut rng, l, n));
        let c = gemm_fast_native(&a, &b, d).unwrap();
        let err = gemm_error(&c, &a, &b, d).unwrap();
        assert!(err <= gemm_tolerance(ScalarKind::F64, l), "case {case} {m}x{n}x{l}: {err:e}");
    }
}

#[test]
fn fast_native_512_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(512);
    let d = GemmDims::cube(512).unwrap();
    let (a, b) = (random_matrix(&mut rng, 512, 512), random_matrix(&mut rng, 512, 512));
    let c = gemm_fast_native(&a, &b, d).unwrap();
    assert!(gemm_error(&c, &a, &b, d).unwrap() <= gemm_tolerance(ScalarKind::F64, 512));
}

#[test]
fn dft_round_trip_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1, 2, 7, 64, 100, 257] {
        let x: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let back = dft_oracle(&dft_oracle(&x, Direction::Forward), Direction::Inverse);
        assert!(rel_l2(&back, &x) <= 1e-12, "n = {n}");
    }
}

#[test]
fn native_fft_f32_within_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [16usize, 1024, 4096] {
        let x = ComplexSignal::from_interleaved((0..2 * n).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>()).unwrap();
        let y = fft_native(&x, Direction::Forward).unwrap();
        assert!(fft_error(&y, &x, Direction::Forward) <= fft_tolerance(ScalarKind::F32), "n = {n}");
    }
}

#[test]
fn f64_fft_reference_agrees_with_dft_past_cutoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 2 * DFT_MAX_LEN;
    let x: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let sig = ComplexSignal::from_pairs(&x).unwrap();
    for dir in [Direction::Forward, Direction::Inverse] {
        let fast = fft_reference(&sig, dir).unwrap();
        assert!(rel_l2(&fast, &dft_oracle(&x, dir)) <= 1e-13);
    }
}
