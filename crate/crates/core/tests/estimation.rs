//! Concentration of the training-based channel estimates.

use rateless_core::oracle::{chunk_estimate_hit_frequency, estimation_error_frequency, sampling_miss_frequency};

const B: usize = 8192;
const T: usize = 512;
const CHUNKS: usize = 8;

#[test]
fn estimation_error_event_is_rare() {
    let (code, round) = estimation_error_frequency(10_000, B, T, CHUNKS, 0.1, false, 11);
    println!("E1 frequency: code positions {code}, whole round {round}");
    assert!(code <= 0.01, "code-position E1 frequency {code}");
    assert!(round <= 0.01, "whole-round E1 frequency {round}");
}

#[test]
fn estimation_error_event_is_rare_for_contiguous_noise() {
    let (code, round) = estimation_error_frequency(10_000, B, T, CHUNKS, 0.1, true, 12);
    println!("E1 frequency, contiguous noise: code positions {code}, whole round {round}");
    assert!(code <= 0.01 && round <= 0.01);
}

#[test]
fn single_chunk_rounds_are_noisier() {
    let (one, _) = estimation_error_frequency(2000, B, T, 1, 0.1, false, 13);
    let (eight, _) = estimation_error_frequency(2000, B, T, 8, 0.1, false, 13);
    println!("E1 frequency by chunks per round: 1 -> {one}, 8 -> {eight}");
    assert!(one > eight);
}

#[test]
fn training_positions_concentrate_without_replacement() {
    let draws = 10_000;
    for (noisy, eps) in [(4096, 0.05), (4096, 0.1), (1024, 0.05), (8000, 0.03)] {
        let bound = 2.0 * (-2.0 * T as f64 * eps * eps).exp();
        let slack = 3.0 * (bound.min(0.25) * (1.0 - bound.min(0.25)) / draws as f64).sqrt();
        let freq = sampling_miss_frequency(B, T, noisy, eps, draws, noisy as u64);
        println!("contiguous run {noisy}/{B}, eps {eps}: frequency {freq}, bound {bound:.6}");
        assert!(freq <= bound + slack, "frequency {freq} above bound {bound}");
    }
}

#[test]
fn chunk_estimate_meets_hoeffding_frequency() {
    let (t, eps) = (1000usize, 0.05);
    let bound = 1.0 - 4.0 * (-2.0 * (t / 2) as f64 * eps * eps).exp();
    let freq = chunk_estimate_hit_frequency(16_000, t, 0.11, eps, 10_000, 21);
    println!("max-entry error <= {eps}: frequency {freq}, bound {bound:.4}");
    assert!(freq >= bound);
}
