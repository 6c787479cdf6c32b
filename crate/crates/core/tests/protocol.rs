//! End-to-end sessions: invariants, adaptivity and transcript format.

use rateless_core::channel::{family_mod_additive, family_z_or, generate_state_sequence, StateSequence, StateSpec};
use rateless_core::experiment::{
    feedback_within_bound, round_length_violations, run_experiment, ExperimentConfig, ParamMode,
};
use rateless_core::info::Distribution;
use rateless_core::protocol::{
    estimate_error_probs, m_star, random_message, run_session, DecoderMode, FeedbackMessage, ProtocolParams,
};
use rateless_core::seed::rng_from_seed;
use rateless_core::types::CompositionSpec;

fn small(n: usize) -> ProtocolParams {
    ProtocolParams {
        n,
        k: 8,
        b: 64,
        t: 8,
        eps1: 0.1,
        tau: 0.05,
        input_composition: CompositionSpec::from_weights(&[1, 1], 56).unwrap(),
        master_seed: 9,
    }
}

fn paper_regime(state: &str) -> ExperimentConfig {
    ExperimentConfig::from_key_values(&format!(
        "mode = asymptotic\nn = 200000\ntrials = 6\nstate = {state}\nlambda_star = 0.05\nr_target = 0.35"
    ))
    .unwrap()
}

#[test]
fn half_and_half_beats_empirical_capacity() {
    let rep = run_experiment(&paper_regime("piecewise 0.5:0 0.5:1")).unwrap();
    let s = &rep.summary;
    assert!(s.empirical_capacity.abs() < 1e-9);
    assert!(s.mean_rate >= 0.6, "mean rate {}", s.mean_rate);
    assert_eq!(s.eps_dec_hat, 0.0);
    assert_eq!(s.round_length_violations, 0);
}

#[test]
fn bsc_rate_in_paper_regime() {
    let rep = run_experiment(&paper_regime("iid 0.89,0.11")).unwrap();
    let s = &rep.summary;
    assert!(s.mean_rate >= 0.35, "mean rate {}", s.mean_rate);
    assert!(s.mean_rate <= s.empirical_mi);
    assert_eq!(s.eps_dec_hat, 0.0);
    assert_eq!(s.eps_ach_hat, 0.0);
}

#[test]
fn asymptotic_derivation_is_recorded() {
    let cfg = paper_regime("iid 1,0");
    assert!(matches!(cfg.mode, ParamMode::Asymptotic { .. }));
    let rep = run_experiment(&cfg).unwrap();
    let text = rep.summary.to_text();
    assert!(text.contains("k = 5138"));
    assert!(text.contains("b = 132"));
    assert!(text.contains("t = 12"));
}

#[test]
fn noisier_channels_need_longer_rounds() {
    let p = small(64 * 400);
    let fam = family_mod_additive();
    let mut prev = 0.0;
    for q in [0.0, 0.03, 0.08] {
        let z = generate_state_sequence(
            &StateSpec::Iid(Distribution::new(vec![1.0 - q, q]).unwrap()),
            2,
            p.n,
            &mut rng_from_seed(3),
        )
        .unwrap();
        let tr = run_session(&p, &fam, &z, &random_message(p.n, 1), 2, DecoderMode::Exhaustive).unwrap();
        let decoded: Vec<usize> =
            tr.rounds.iter().filter(|r| r.outcome == FeedbackMessage::Decoded).map(|r| r.chunks_used).collect();
        let mean = decoded.iter().sum::<usize>() as f64 / decoded.len() as f64;
        assert!(mean >= prev, "q = {q}: mean round length {mean} < {prev}");
        prev = mean;
    }
}

#[test]
fn z_channel_sessions_keep_invariants() {
    let p = small(64 * 300);
    let fam = family_z_or();
    for q in [0.0, 0.1, 0.3, 0.6] {
        let z = generate_state_sequence(
            &StateSpec::Iid(Distribution::new(vec![1.0 - q, q]).unwrap()),
            2,
            p.n,
            &mut rng_from_seed(5),
        )
        .unwrap();
        let est = estimate_error_probs(&p, &fam, &z, 4, 77, 0.01, DecoderMode::Exhaustive).unwrap();
        for o in &est.outcomes {
            let tr = &o.transcript;
            assert!(feedback_within_bound(tr));
            assert_eq!(round_length_violations(tr, &p, 1.0), 0);
            let spans: usize = tr.rounds.iter().map(|r| r.end - r.start).sum();
            assert_eq!(spans + tr.truncated_remainder(), p.n);
            assert!(tr.rounds.iter().all(|r| r.chunks_used <= m_star(&p)));
            assert!(tr.rounds.windows(2).all(|w| w[0].end == w[1].start));
            if tr.rounds.iter().all(|r| r.correct != Some(false)) {
                assert!(!o.prefix_error);
            }
        }
        assert!(est.eps_ach_hat <= est.eps_dec_hat + est.rate_shortfall_hat);
    }
}

#[test]
fn bad_noise_rounds_resend_the_same_bits() {
    // clean first half, then a zero-information stretch
    let p = small(64 * 200);
    let fam = family_mod_additive();
    let states: Vec<usize> = (0..p.n).map(|i| if i < p.n / 2 { 0 } else { i % 2 }).collect();
    let z = StateSequence::new(states, 2).unwrap();
    let msg = random_message(p.n, 4);
    let tr = run_session(&p, &fam, &z, &msg, 6, DecoderMode::Exhaustive).unwrap();
    assert!(tr.bad_noise_rounds() > 0);
    assert_eq!(tr.decoding_threshold, p.k * tr.decoded_rounds());
    // the j-th decoded round carries bits [jk, (j+1)k) however many bad
    // rounds came before it
    let decoded = tr.rounds.iter().filter(|r| r.outcome == FeedbackMessage::Decoded);
    for (j, r) in decoded.enumerate() {
        let bits = r.decoded_index.as_ref().unwrap().bits();
        assert_eq!(r.correct == Some(true), bits == &msg[j * p.k..(j + 1) * p.k]);
    }
    assert!(tr.rounds.iter().filter(|r| r.end <= p.n / 2).all(|r| r.correct == Some(true)));
}

#[test]
fn transcript_log_layout() {
    let p = small(64 * 6);
    let z = StateSequence::new(vec![0; p.n], 2).unwrap();
    let tr = run_session(&p, &family_mod_additive(), &z, &random_message(p.n, 8), 1, DecoderMode::Exhaustive).unwrap();
    let log = tr.to_log();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), tr.rounds.len() + 1);
    let fields: Vec<&str> = lines[0].split_whitespace().map(|f| f.split('=').next().unwrap()).collect();
    assert_eq!(fields, ["round", "r", "start", "end", "chunks", "outcome", "mi", "decoded", "correct", "feedback"]);
    assert!(lines[0].starts_with("round r=0 start=0 end=64 chunks=1 outcome=DECODED mi=1.000000000"));
    assert!(lines[0].ends_with("correct=true feedback=01"));
    assert!(lines.last().unwrap().starts_with("summary N=384 k=8 b=64 T=48 rate=0.125000000 rounds=6"));
    assert_eq!(tr.feedback_wire(), "01".repeat(6));
}

#[test]
fn random_coding_decoder_tracks_exhaustive_on_small_codes() {
    let p = small(64 * 300);
    let fam = family_mod_additive();
    let z = generate_state_sequence(
        &StateSpec::Iid(Distribution::new(vec![0.92, 0.08]).unwrap()),
        2,
        p.n,
        &mut rng_from_seed(3),
    )
    .unwrap();
    let a = estimate_error_probs(&p, &fam, &z, 8, 40, 0.0, DecoderMode::Exhaustive).unwrap();
    let b = estimate_error_probs(&p, &fam, &z, 8, 40, 0.0, DecoderMode::RandomCoding).unwrap();
    let wrong = |e: &rateless_core::protocol::ErrorEstimate| -> (usize, usize) {
        e.outcomes.iter().fold((0, 0), |(w, d), o| {
            (
                w + o.transcript.rounds.iter().filter(|r| r.correct == Some(false)).count(),
                d + o.transcript.decoded_rounds(),
            )
        })
    };
    let ((wa, da), (wb, db)) = (wrong(&a), wrong(&b));
    let (ra, rb) = (wa as f64 / da as f64, wb as f64 / db as f64);
    let sigma = (ra.max(rb) * (1.0 - ra.max(rb)) * (1.0 / da as f64 + 1.0 / db as f64)).sqrt();
    assert!((ra - rb).abs() <= 4.0 * sigma + 1e-3, "round error rates {ra} vs {rb}");
}
