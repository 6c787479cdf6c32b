//! Iterated rateless coding with randomized training and three-message
//! feedback.
//!
//! Time is divided into chunks of `b` channel uses. A round sends `k` message
//! bits with a fresh randomized rateless code; each chunk carries `t` pilots at
//! random positions and `b - t` code symbols. After every chunk the decoder
//! re-estimates the channel over the round and feeds back one of three 2-bit
//! messages: decode now, give up on this round, or keep going.

use std::fmt::{self, Write as _};

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelFamily, ChannelSession, StateSequence};
use crate::codebook::{build_codebook, encode_chunk, mmi_decode, MessageIndex, RatelessCodebook};
use crate::error::{Error, Result};
use crate::info::{mutual_information, Distribution};
use crate::random_coding::{simulate_mmi_decode, LazyCodebook};
use crate::seed::{derive_seed, rng_from_seed, sub_seed, Purpose};
use crate::training::{
    deinterleave_chunk, estimate_chunk_channel, estimate_round_channel, interleave_chunk, select_training_plan,
    ChannelEstimate,
};
use crate::types::CompositionSpec;

/// Feedback sent at the end of every chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackMessage {
    BadNoise,
    Decoded,
    KeepGoing,
}

impl FeedbackMessage {
    /// Two-bit wire code: 00, 01, 10.
    pub fn wire(self) -> &'static str {
        match self {
            FeedbackMessage::BadNoise => "00",
            FeedbackMessage::Decoded => "01",
            FeedbackMessage::KeepGoing => "10",
        }
    }

    pub fn from_wire(bits: &str) -> Result<Self> {
        match bits {
            "00" => Ok(FeedbackMessage::BadNoise),
            "01" => Ok(FeedbackMessage::Decoded),
            "10" => Ok(FeedbackMessage::KeepGoing),
            other => Err(Error::InvalidParameter(format!("invalid feedback word {other:?}"))),
        }
    }
}

impl fmt::Display for FeedbackMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackMessage::BadNoise => "BAD_NOISE",
            FeedbackMessage::Decoded => "DECODED",
            FeedbackMessage::KeepGoing => "KEEP_GOING",
        })
    }
}

/// How a round's code is realized and decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecoderMode {
    /// Exhaustive when the codebook fits, random-coding otherwise.
    #[default]
    Auto,
    /// Materialized codebook, every codeword scored.
    Exhaustive,
    /// Lazily regenerated codebook, decoder outcome sampled from the exact
    /// competitor score law (binary alphabets only).
    RandomCoding,
}

impl std::str::FromStr for DecoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "exhaustive" => Ok(Self::Exhaustive),
            "random-coding" => Ok(Self::RandomCoding),
            _ => Err(Error::InvalidParameter(format!("unknown decoder mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// Total blocklength `N`.
    pub n: usize,
    /// Message bits per round.
    pub k: usize,
    /// Chunk length.
    pub b: usize,
    /// Training symbols per chunk.
    pub t: usize,
    /// Rate gap subtracted from the estimated mutual information.
    pub eps1: f64,
    /// Bad-noise threshold.
    pub tau: f64,
    /// Type of every code chunk, length `b - t`.
    pub input_composition: CompositionSpec,
    /// Shared seed for all common randomness.
    pub master_seed: u64,
}

impl ProtocolParams {
    pub fn c(&self) -> usize {
        self.b - self.t
    }

    pub fn input_distribution(&self) -> Distribution {
        self.input_composition.distribution()
    }

    pub fn validate(&self, x_size: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.t >= self.b {
            return bad(format!("training count t = {} must be below chunk length b = {}", self.t, self.b));
        }
        if self.b > self.n {
            return bad(format!("chunk length b = {} exceeds blocklength N = {}", self.b, self.n));
        }
        if self.t % x_size != 0 {
            return bad(format!("|X| = {x_size} does not divide t = {}", self.t));
        }
        if self.input_composition.alphabet_size() != x_size {
            return bad("input composition alphabet differs from the channel input alphabet".into());
        }
        if self.input_composition.len() != self.c() {
            return bad(format!(
                "input composition length {} differs from b - t = {}",
                self.input_composition.len(),
                self.c()
            ));
        }
        if !(self.eps1 > 0.0) || !(self.tau > 0.0) {
            return bad("eps1 and tau must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        Ok(())
    }
}

/// `ceil(k / ((b - t) tau))`, the longest possible round in chunks.
pub fn m_star(params: &ProtocolParams) -> usize {
    let v = params.k as f64 / (params.c() as f64 * params.tau);
    (v - 1e-12).ceil().max(1.0) as usize
}

/// `k / ((b - t) C_max)`, the shortest round that can end in a decode.
pub fn m_lower(params: &ProtocolParams, c_max: f64) -> f64 {
    params.k as f64 / (params.c() as f64 * c_max)
}

/// Feedback after `n` chunks given the round estimate. Both inequalities are
/// strict and the decode test is applied first.
pub fn decoder_decision(round_estimate: &ChannelEstimate, n: usize, params: &ProtocolParams) -> Result<FeedbackMessage> {
    if n == 0 {
        return Err(Error::InvalidParameter("decision needs at least one chunk".into()));
    }
    let mi = mutual_information(&params.input_distribution(), &round_estimate.matrix)?;
    Ok(decide(mi, n, params))
}

fn decide(mi: f64, n: usize, params: &ProtocolParams) -> FeedbackMessage {
    let margin = mi - params.eps1;
    let empirical_rate = params.k as f64 / (params.c() as f64 * n as f64);
    if margin > empirical_rate {
        FeedbackMessage::Decoded
    } else if margin < params.tau {
        FeedbackMessage::BadNoise
    } else {
        FeedbackMessage::KeepGoing
    }
}

/// The code used for one round.
#[derive(Debug, Clone)]
pub enum RoundCode {
    Materialized(RatelessCodebook),
    Lazy(LazyCodebook),
}

impl RoundCode {
    pub fn build(params: &ProtocolParams, mode: DecoderMode, seed: u64) -> Result<Self> {
        let ms = m_star(params);
        let comp = &params.input_composition;
        let binary = comp.alphabet_size() == 2;
        let fits = build_fits(params.k, ms, params.c());
        match mode {
            DecoderMode::Exhaustive => Ok(Self::Materialized(build_codebook(ms, params.c(), params.k, comp, seed)?)),
            DecoderMode::RandomCoding => Ok(Self::Lazy(LazyCodebook::new(ms, params.c(), params.k, comp, seed)?)),
            DecoderMode::Auto if fits => Ok(Self::Materialized(build_codebook(ms, params.c(), params.k, comp, seed)?)),
            DecoderMode::Auto if binary => Ok(Self::Lazy(LazyCodebook::new(ms, params.c(), params.k, comp, seed)?)),
            DecoderMode::Auto => Err(Error::InvalidParameter(format!(
                "k = {} is too large for an exhaustive codebook and the input alphabet is not binary",
                params.k
            ))),
        }
    }

    fn chunk(&self, m: &MessageIndex, n: usize) -> Result<Vec<usize>> {
        match self {
            RoundCode::Materialized(cb) => encode_chunk(cb, m, n),
            RoundCode::Lazy(cb) => cb.chunk(m, n),
        }
    }
}

/// Auto mode materializes only small codebooks; they are rebuilt every round.
fn build_fits(k: usize, m_star: usize, c: usize) -> bool {
    k <= 12 && (1usize << k).saturating_mul(m_star).saturating_mul(c) <= 1 << 22
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub index: usize,
    pub chunks_used: usize,
    pub outcome: FeedbackMessage,
    /// Blocklength ran out before the round ended.
    pub truncated: bool,
    pub round_mi_estimate: f64,
    pub decoded_index: Option<MessageIndex>,
    pub correct: Option<bool>,
    pub start: usize,
    pub end: usize,
}

impl RoundRecord {
    /// Feedback words sent during this round, in order.
    pub fn feedback(&self) -> impl Iterator<Item = FeedbackMessage> + '_ {
        let last = if self.truncated { FeedbackMessage::KeepGoing } else { self.outcome };
        (0..self.chunks_used).map(move |i| if i + 1 == self.chunks_used { last } else { FeedbackMessage::KeepGoing })
    }
}

/// Runs one round for message `m`. Training positions of chunk `n` and the
/// decoder's randomness come from the master seed keyed by `round`.
pub fn run_round(
    code: &RoundCode,
    m: &MessageIndex,
    channel: &mut ChannelSession<'_>,
    params: &ProtocolParams,
    round: usize,
) -> Result<RoundRecord> {
    let ms = m_star(params);
    let x_size = params.input_composition.alphabet_size();
    let y_size = channel.family().y_size();
    let start = channel.cursor();
    let mut estimates: Vec<ChannelEstimate> = Vec::new();
    let mut x_code = Vec::new();
    let mut y_code = Vec::new();
    let mut mi = 0.0;
    let input = params.input_distribution();

    for n in 1..=ms {
        if channel.remaining() < params.b {
            return Ok(RoundRecord {
                index: round,
                chunks_used: n - 1,
                outcome: FeedbackMessage::KeepGoing,
                truncated: true,
                round_mi_estimate: mi,
                decoded_index: None,
                correct: None,
                start,
                end: channel.cursor(),
            });
        }
        let mut rng = rng_from_seed(sub_seed(params.master_seed, round as u64, Purpose::Training, n as u64));
        let plan = select_training_plan(params.b, params.t, x_size, &mut rng)?;
        let code_chunk = code.chunk(m, n)?;
        let sent = interleave_chunk(&code_chunk, &plan)?;
        let received = channel.transmit(&sent)?;
        estimates.push(estimate_chunk_channel(&received, &plan, y_size)?);
        x_code.extend(code_chunk);
        y_code.extend(deinterleave_chunk(&received, &plan)?);

        let round_est = estimate_round_channel(&estimates)?;
        mi = mutual_information(&input, &round_est.matrix)?;
        let mut decision = decide(mi, n, params);
        if n == ms && decision == FeedbackMessage::KeepGoing {
            decision = FeedbackMessage::BadNoise;
        }
        match decision {
            FeedbackMessage::KeepGoing => continue,
            FeedbackMessage::BadNoise => {
                return Ok(RoundRecord {
                    index: round,
                    chunks_used: n,
                    outcome: decision,
                    truncated: false,
                    round_mi_estimate: mi,
                    decoded_index: None,
                    correct: None,
                    start,
                    end: channel.cursor(),
                })
            }
            FeedbackMessage::Decoded => {
                let decoded = match code {
                    RoundCode::Materialized(cb) => mmi_decode(cb, &y_code, n)?,
                    RoundCode::Lazy(cb) => {
                        let seed = sub_seed(params.master_seed, round as u64, Purpose::Competitors, 0);
                        simulate_mmi_decode(m, &x_code, &y_code, cb.composition(), &mut rng_from_seed(seed))?
                    }
                };
                let correct = decoded == *m;
                return Ok(RoundRecord {
                    index: round,
                    chunks_used: n,
                    outcome: decision,
                    truncated: false,
                    round_mi_estimate: mi,
                    decoded_index: Some(decoded),
                    correct: Some(correct),
                    start,
                    end: channel.cursor(),
                });
            }
        }
    }
    unreachable!("the last chunk always ends the round")
}

/// Everything the decoder committed to over one blocklength.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub n: usize,
    pub k: usize,
    pub b: usize,
    pub rounds: Vec<RoundRecord>,
    /// Decoding threshold `T`, in bits.
    pub decoding_threshold: usize,
    pub message_estimate: Vec<bool>,
    pub feedback_bits_used: usize,
    pub achieved_rate: f64,
}

impl Transcript {
    /// Whether the estimate differs from the first `T` transmitted bits.
    pub fn prefix_error(&self, message_bits: &[bool]) -> bool {
        self.message_estimate.as_slice() != &message_bits[..self.decoding_threshold.min(message_bits.len())]
    }

    pub fn decoded_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.outcome == FeedbackMessage::Decoded).count()
    }

    pub fn bad_noise_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.outcome == FeedbackMessage::BadNoise).count()
    }

    /// Channel uses after the last chunk boundary that carried nothing.
    pub fn truncated_remainder(&self) -> usize {
        self.n - self.rounds.last().map_or(0, |r| r.end)
    }

    /// Feedback bit string, two bits per chunk.
    pub fn feedback_wire(&self) -> String {
        self.rounds.iter().flat_map(|r| r.feedback()).map(FeedbackMessage::wire).collect()
    }

    /// Line-oriented log: one `round` line per round, then a `summary` line.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for r in &self.rounds {
            let fb: String = r.feedback().map(FeedbackMessage::wire).collect();
            let _ = writeln!(
                out,
                "round r={} start={} end={} chunks={} outcome={}{} mi={:.9} decoded={} correct={} feedback={}",
                r.index,
                r.start,
                r.end,
                r.chunks_used,
                r.outcome,
                if r.truncated { " truncated" } else { "" },
                r.round_mi_estimate,
                r.decoded_index.as_ref().map_or("-".to_string(), MessageIndex::to_hex),
                r.correct.map_or("-".to_string(), |c| c.to_string()),
                fb,
            );
        }
        let _ = writeln!(
            out,
            "summary N={} k={} b={} T={} rate={:.9} rounds={} decoded={} bad_noise={} feedback_bits={}",
            self.n,
            self.k,
            self.b,
            self.decoding_threshold,
            self.achieved_rate,
            self.rounds.len(),
            self.decoded_rounds(),
            self.bad_noise_rounds(),
            self.feedback_bits_used,
        );
        out
    }
}

/// Sends `message_bits` over one blocklength. A round that ends in bad noise
/// is retried with the same `k` bits; a decoded round advances by `k` bits.
pub fn run_session(
    params: &ProtocolParams,
    family: &ChannelFamily,
    z_seq: &StateSequence,
    message_bits: &[bool],
    noise_seed: u64,
    mode: DecoderMode,
) -> Result<Transcript> {
    params.validate(family.x_size())?;
    if z_seq.len() != params.n {
        return Err(Error::DimensionMismatch { expected: params.n, actual: z_seq.len() });
    }
    let c_max = (family.x_size().min(family.y_size()) as f64).log2();
    let needed = (params.n as f64 * c_max).floor() as usize;
    if message_bits.len() < needed {
        return Err(Error::DimensionMismatch { expected: needed, actual: message_bits.len() });
    }
    let mut session = ChannelSession::new(family, z_seq, rng_from_seed(noise_seed));
    let mut rounds = Vec::new();
    let mut estimate = Vec::new();
    let mut sent = 0;
    while session.remaining() >= params.b && sent + params.k <= message_bits.len() {
        let r = rounds.len();
        let m = MessageIndex::from_bits(message_bits[sent..sent + params.k].to_vec());
        let code = RoundCode::build(params, mode, sub_seed(params.master_seed, r as u64, Purpose::Codebook, 0))?;
        let record = run_round(&code, &m, &mut session, params, r)?;
        if let Some(d) = &record.decoded_index {
            estimate.extend_from_slice(d.bits());
            sent += params.k;
        }
        let truncated = record.truncated;
        if record.chunks_used > 0 {
            rounds.push(record);
        }
        if truncated {
            break;
        }
    }
    let chunks: usize = rounds.iter().map(|r| r.chunks_used).sum();
    let t = estimate.len();
    Ok(Transcript {
        n: params.n,
        k: params.k,
        b: params.b,
        rounds,
        decoding_threshold: t,
        message_estimate: estimate,
        feedback_bits_used: 2 * chunks,
        achieved_rate: t as f64 / params.n as f64,
    })
}

/// Seeds used by one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub master: u64,
    pub noise: u64,
    pub message: u64,
}

impl TrialSeeds {
    /// Common randomness for trial `i` is `base + i`; channel noise and the
    /// message are keyed off it separately.
    pub fn for_trial(base: u64, trial: usize) -> Self {
        let master = base.wrapping_add(trial as u64);
        Self { master, noise: derive_seed(master, &[0x6e6f_6973_65]), message: derive_seed(master, &[0x6d_7367]) }
    }
}

/// Result of one simulated blocklength.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub transcript: Transcript,
    pub prefix_error: bool,
}

impl TrialOutcome {
    pub fn rate(&self) -> f64 {
        self.transcript.achieved_rate
    }
}

pub fn random_message(len: usize, seed: u64) -> Vec<bool> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| rng.gen()).collect()
}

pub fn run_trial(
    params: &ProtocolParams,
    family: &ChannelFamily,
    z_seq: &StateSequence,
    trial: usize,
    base_seed: u64,
    mode: DecoderMode,
) -> Result<TrialOutcome> {
    let seeds = TrialSeeds::for_trial(base_seed, trial);
    let c_max = (family.x_size().min(family.y_size()) as f64).log2();
    let message = random_message((params.n as f64 * c_max).floor() as usize, seeds.message);
    let p = ProtocolParams { master_seed: seeds.master, ..params.clone() };
    let transcript = run_session(&p, family, z_seq, &message, seeds.noise, mode)?;
    let prefix_error = transcript.prefix_error(&message);
    Ok(TrialOutcome { trial, seeds, transcript, prefix_error })
}

/// Monte Carlo estimates of the decoding and achievability error
/// probabilities for a fixed state sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub eps_dec_hat: f64,
    pub eps_ach_hat: f64,
    /// Frequency of `T/N <= R_target`.
    pub rate_shortfall_hat: f64,
    pub rate_mean: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub outcomes: Vec<TrialOutcome>,
}

pub fn estimate_error_probs(
    params: &ProtocolParams,
    family: &ChannelFamily,
    z_seq: &StateSequence,
    trials: usize,
    seed: u64,
    r_target: f64,
    mode: DecoderMode,
) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(params, family, z_seq, i, seed, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(outcomes, r_target))
}

pub fn summarize(outcomes: Vec<TrialOutcome>, r_target: f64) -> ErrorEstimate {
    let n = outcomes.len() as f64;
    let freq = |f: &dyn Fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
    let eps_dec_hat = freq(&|o| o.prefix_error);
    let eps_ach_hat = freq(&|o| r_target >= o.rate() && o.prefix_error);
    let rate_shortfall_hat = freq(&|o| r_target >= o.rate());
    let rates: Vec<f64> = outcomes.iter().map(TrialOutcome::rate).collect();
    ErrorEstimate {
        eps_dec_hat,
        eps_ach_hat,
        rate_shortfall_hat,
        rate_mean: rates.iter().sum::<f64>() / n,
        rate_min: rates.iter().cloned().fold(f64::INFINITY, f64::min),
        rate_max: rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        outcomes,
    }
}
