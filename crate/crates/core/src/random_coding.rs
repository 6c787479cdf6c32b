//! MMI decoding over codebooks too large to materialize.
//!
//! With `k` in the hundreds of bits the `2^k` codewords cannot be stored or
//! scored one by one. Every competing codeword is an independent uniform draw
//! from `{T_c(P)}^M`, independent of the received word, so the decoder's
//! behavior is fully described by the law of a single competitor's score.
//! For binary input and output the joint type of a competitor with the
//! received word is fixed by one number, the count `j` of positions where
//! both are 1; per chunk that count is hypergeometric and over `M` chunks it
//! is their sum. This module computes `P(score > s*)` and `P(score = s*)`
//! exactly (in the log domain, using exponential tilting so tails far below
//! `f64` range stay accurate), and from those draws the decoder's outcome.
//!
//! The transmitted codeword itself is regenerated on demand from the
//! codebook seed and the message bits.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::codebook::{JointCounts, MessageIndex, SCORE_TIE_TOL};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::types::{sample_fixed_composition, CompositionSpec};

/// Codebook whose codewords are regenerated from the seed when needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LazyCodebook {
    m_star: usize,
    c: usize,
    k: usize,
    composition: CompositionSpec,
    seed: u64,
}

impl LazyCodebook {
    pub fn new(m_star: usize, c: usize, k: usize, composition: &CompositionSpec, seed: u64) -> Result<Self> {
        if m_star == 0 {
            return Err(Error::InvalidParameter("m_star must be at least 1".into()));
        }
        if composition.len() != c {
            return Err(Error::InvalidParameter(format!(
                "composition has length {}, chunk length is {c}",
                composition.len()
            )));
        }
        Ok(Self { m_star, c, k, composition: composition.clone(), seed })
    }

    pub fn m_star(&self) -> usize {
        self.m_star
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn composition(&self) -> &CompositionSpec {
        &self.composition
    }

    fn message_key(m: &MessageIndex) -> Vec<u64> {
        let mut words: Vec<u64> = m
            .bits()
            .chunks(64)
            .map(|w| w.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
            .collect();
        words.push(m.k() as u64);
        words
    }

    /// Chunk `n` (1-based) of the codeword for `m`.
    pub fn chunk(&self, m: &MessageIndex, n: usize) -> Result<Vec<usize>> {
        if n == 0 || n > self.m_star {
            return Err(Error::InvalidParameter(format!("chunk {n} outside 1..={}", self.m_star)));
        }
        if m.k() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, actual: m.k() });
        }
        let mut key = Self::message_key(m);
        key.push(n as u64);
        let mut rng = rng_from_seed(derive_seed(self.seed, &key));
        Ok(sample_fixed_composition(&self.composition, &mut rng))
    }
}

/// Log-probabilities that one random competitor beats or ties the true
/// codeword's score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitorTail {
    pub ln_p_greater: f64,
    pub ln_p_tie: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(1 - e^lnp)`.
fn ln_one_minus_exp(lnp: f64) -> f64 {
    if lnp < -30.0 {
        -lnp.exp()
    } else if lnp >= 0.0 {
        f64::NEG_INFINITY
    } else {
        (-lnp.exp()).ln_1p()
    }
}

/// `m * ln(1 - p)` given `ln m` and `ln p`.
fn scaled_log_survival(ln_m: f64, ln_p: f64) -> f64 {
    if ln_m == f64::NEG_INFINITY || ln_p == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_p < -30.0 {
        -(ln_m + ln_p).exp()
    } else {
        ln_m.exp() * ln_one_minus_exp(ln_p)
    }
}

/// Log pmf of one chunk's overlap count, indexed from `lo`.
struct ChunkLaw {
    lo: usize,
    ln_pmf: Vec<f64>,
}

impl ChunkLaw {
    fn hypergeometric(c: usize, ones_y: usize, ones_x: usize, ln_fact: &[f64]) -> Self {
        let lo = (ones_x + ones_y).saturating_sub(c);
        let hi = ones_x.min(ones_y);
        let ln_choose = |n: usize, r: usize| ln_fact[n] - ln_fact[r] - ln_fact[n - r];
        let denom = ln_choose(c, ones_x);
        let ln_pmf = (lo..=hi)
            .map(|j| ln_choose(ones_y, j) + ln_choose(c - ones_y, ones_x - j) - denom)
            .collect();
        Self { lo, ln_pmf }
    }

    /// Normalized tilted pmf `p(j) e^{theta j} / Z(theta)` and `ln Z(theta)`.
    fn tilted(&self, theta: f64) -> (Vec<f64>, f64) {
        let logs = self.ln_pmf.iter().enumerate().map(|(i, lp)| lp + theta * (self.lo + i) as f64);
        let ln_z = log_sum_exp(logs.clone());
        (logs.map(|l| (l - ln_z).exp()).collect(), ln_z)
    }

    /// Mean and variance of the tilted law.
    fn tilted_moments(&self, theta: f64) -> (f64, f64) {
        let m = self
            .ln_pmf
            .iter()
            .enumerate()
            .map(|(i, lp)| lp + theta * i as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (i, lp) in self.ln_pmf.iter().enumerate() {
            let w = (lp + theta * i as f64 - m).exp();
            let i = i as f64;
            z += w;
            s1 += w * i;
            s2 += w * i * i;
        }
        let mean = s1 / z;
        (self.lo as f64 + mean, (s2 / z - mean * mean).max(0.0))
    }
}

/// `ln P(J in set)` where `J` is the sum of the chunk laws and `set` is a
/// contiguous run of totals, computed under tilt `theta`.
fn ln_prob_in(laws: &[ChunkLaw], theta: f64, select: impl Fn(usize) -> bool) -> f64 {
    let lo: usize = laws.iter().map(|l| l.lo).sum();
    let mut acc = vec![1.0f64];
    let mut ln_z_total = 0.0;
    for law in laws {
        let (w, ln_z) = law.tilted(theta);
        ln_z_total += ln_z;
        let mut next = vec![0.0; acc.len() + w.len() - 1];
        for (i, a) in acc.iter().enumerate() {
            if *a < 1e-300 {
                continue;
            }
            for (j, b) in w.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        acc = next;
    }
    let terms = acc
        .iter()
        .enumerate()
        .filter(|(i, p)| **p > 0.0 && select(lo + i))
        .map(|(i, p)| p.ln() - theta * (lo + i) as f64 + ln_z_total);
    log_sum_exp(terms.collect::<Vec<_>>().into_iter())
}

fn solve_tilt(laws: &[ChunkLaw], target: f64) -> f64 {
    let moments = |t: f64| {
        laws.iter().map(|l| l.tilted_moments(t)).fold((0.0, 0.0), |(m, v), (a, b)| (m + a, v + b))
    };
    let (m0, _) = moments(0.0);
    if (target - m0).abs() < 1e-9 {
        return 0.0;
    }
    // Newton inside a shrinking bracket; the tilt only conditions the sums,
    // so a loose solution is enough.
    let (mut lo, mut hi) = if target > m0 { (0.0, 60.0) } else { (-60.0, 0.0) };
    let mut theta = 0.0;
    for _ in 0..100 {
        let (mean, var) = moments(theta);
        if (mean - target).abs() < 1e-6 {
            break;
        }
        if mean < target {
            lo = theta;
        } else {
            hi = theta;
        }
        let step = theta - (mean - target) / var;
        theta = if var > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-12 {
            break;
        }
    }
    theta
}

/// Law of a random competitor's MMI score relative to the true codeword.
///
/// `x` is the true codeword prefix and `y` the received prefix (same length,
/// `M` whole chunks of `chunk.len()` symbols); both must be binary.
pub fn competitor_tail(x: &[usize], y: &[usize], chunk: &CompositionSpec) -> Result<CompetitorTail> {
    let c = chunk.len();
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    if x.is_empty() || x.len() % c != 0 {
        return Err(Error::InvalidParameter(format!("prefix length {} is not a positive multiple of {c}", x.len())));
    }
    if chunk.alphabet_size() != 2 {
        return Err(Error::InvalidParameter("random-coding decoder needs a binary input alphabet".into()));
    }
    if let Some(&s) = x.iter().chain(y).find(|&&s| s > 1) {
        return Err(Error::SymbolOutOfRange { symbol: s, alphabet: 2 });
    }
    let ones_x = chunk.counts()[1];
    let mut ln_fact = Vec::with_capacity(c + 1);
    for i in 0..=c {
        ln_fact.push(ln_gamma(i as f64 + 1.0));
    }
    let laws: Vec<ChunkLaw> = y
        .chunks(c)
        .map(|yc| ChunkLaw::hypergeometric(c, yc.iter().sum(), ones_x, &ln_fact))
        .collect();

    let n = x.len();
    let total_x: usize = ones_x * laws.len();
    let total_y: usize = y.iter().sum();
    let score = |j: usize| {
        JointCounts::from_counts(2, 2, vec![n + j - total_x - total_y, total_y - j, total_x - j, j]).mutual_information()
    };
    let j_true = x.iter().zip(y).filter(|(a, b)| **a == 1 && **b == 1).count();
    let s_true = score(j_true);

    let lo: usize = laws.iter().map(|l| l.lo).sum();
    let hi: usize = laws.iter().map(|l| l.lo + l.ln_pmf.len() - 1).sum();
    let scores: Vec<f64> = (lo..=hi).map(score).collect();
    let j_min = lo + scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite scores"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let is_greater = |j: usize| scores[j - lo] > s_true + SCORE_TIE_TOL;
    let is_tie = |j: usize| (scores[j - lo] - s_true).abs() <= SCORE_TIE_TOL;
    let in_event = |j: usize| scores[j - lo] >= s_true - SCORE_TIE_TOL;

    let mut ln_greater = f64::NEG_INFINITY;
    let mut ln_tie = f64::NEG_INFINITY;
    // Right of the score minimum the event is an upper tail, left of it a lower tail.
    if let Some(edge) = (j_min..=hi).find(|&j| in_event(j)) {
        let theta = solve_tilt(&laws, edge as f64).max(0.0);
        ln_greater = log_add_exp(ln_greater, ln_prob_in(&laws, theta, |j| j >= j_min && is_greater(j)));
        ln_tie = log_add_exp(ln_tie, ln_prob_in(&laws, theta, |j| j >= j_min && is_tie(j)));
    }
    if j_min > lo {
        if let Some(edge) = (lo..j_min).rev().find(|&j| in_event(j)) {
            let theta = solve_tilt(&laws, edge as f64).min(0.0);
            ln_greater = log_add_exp(ln_greater, ln_prob_in(&laws, theta, |j| j < j_min && is_greater(j)));
            ln_tie = log_add_exp(ln_tie, ln_prob_in(&laws, theta, |j| j < j_min && is_tie(j)));
        }
    }
    Ok(CompetitorTail { ln_p_greater: ln_greater.min(0.0), ln_p_tie: ln_tie.min(0.0) })
}

/// Probability that MMI decoding over `2^k` codewords does not return `m`,
/// given the tail law of one competitor. Lower-indexed competitors win ties.
pub fn mmi_error_probability(tail: &CompetitorTail, m: &MessageIndex) -> f64 {
    let k = m.k();
    let ln2 = std::f64::consts::LN_2;
    let ln_before = m.ln_value();
    // ln(2^k - 1 - v) = k ln2 + ln(1 - (v + 1) 2^-k)
    let ln_v_plus_one = log_add_exp(ln_before, 0.0);
    let ln_after = if k == 0 {
        f64::NEG_INFINITY
    } else {
        let frac = ln_v_plus_one - k as f64 * ln2;
        if frac >= -1e-15 {
            f64::NEG_INFINITY
        } else {
            k as f64 * ln2 + ln_one_minus_exp(frac)
        }
    };
    let ln_ge = log_add_exp(tail.ln_p_greater, tail.ln_p_tie).min(0.0);
    let ln_ok = scaled_log_survival(ln_before, ln_ge) + scaled_log_survival(ln_after, tail.ln_p_greater);
    -ln_ok.exp_m1()
}

/// One MMI decode against a random codebook, sampled exactly in law.
pub fn simulate_mmi_decode<R: Rng + ?Sized>(
    m: &MessageIndex,
    x: &[usize],
    y: &[usize],
    chunk: &CompositionSpec,
    rng: &mut R,
) -> Result<MessageIndex> {
    let tail = competitor_tail(x, y, chunk)?;
    let p_err = mmi_error_probability(&tail, m);
    if m.k() == 0 || rng.gen::<f64>() >= p_err {
        return Ok(m.clone());
    }
    loop {
        let wrong: Vec<bool> = (0..m.k()).map(|_| rng.gen()).collect();
        if wrong != m.bits() {
            return Ok(MessageIndex::from_bits(wrong));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook, empirical_mi_score, mmi_decode};
    use crate::seed::rng_from_seed;
    use crate::types::sample_piecewise_composition;

    /// Every member of `{T_c(P)}^M` for binary P, by brute force.
    fn all_piecewise(c: usize, ones: usize, m: usize) -> Vec<Vec<usize>> {
        let chunk: Vec<Vec<usize>> = (0u32..1 << c)
            .filter(|v| v.count_ones() as usize == ones)
            .map(|v| (0..c).map(|i| ((v >> i) & 1) as usize).collect())
            .collect();
        let mut out = vec![Vec::new()];
        for _ in 0..m {
            out = out
                .iter()
                .flat_map(|p| chunk.iter().map(move |ch| [p.clone(), ch.clone()].concat()))
                .collect();
        }
        out
    }

    #[test]
    fn tail_matches_exhaustive_count() {
        let mut rng = rng_from_seed(31);
        for (c, ones, m) in [(6usize, 3usize, 2usize), (6, 2, 2), (8, 4, 1), (4, 1, 3)] {
            let spec = CompositionSpec::new(vec![c - ones, ones]).unwrap();
            let all = all_piecewise(c, ones, m);
            for _ in 0..5 {
                let x = sample_piecewise_composition(m, &spec, &mut rng);
                let y: Vec<usize> = (0..c * m).map(|_| rng.gen_range(0..2)).collect();
                let s = empirical_mi_score(&x, &y).unwrap();
                let (mut gt, mut tie) = (0usize, 0usize);
                for w in &all {
                    let v = empirical_mi_score(w, &y).unwrap();
                    if v > s + SCORE_TIE_TOL {
                        gt += 1;
                    } else if (v - s).abs() <= SCORE_TIE_TOL {
                        tie += 1;
                    }
                }
                let tail = competitor_tail(&x, &y, &spec).unwrap();
                let total = all.len() as f64;
                assert!((tail.ln_p_greater.exp() - gt as f64 / total).abs() < 1e-9, "c={c} gt={gt}");
                assert!((tail.ln_p_tie.exp() - tie as f64 / total).abs() < 1e-9, "c={c} tie={tie}");
            }
        }
    }

    #[test]
    fn deep_tails_stay_finite() {
        // Noiseless 960-symbol chunk: a competitor must match exactly, so
        // P(tie) = 1 / C(960, 480), about 2^-954.
        let spec = CompositionSpec::new(vec![480, 480]).unwrap();
        let x = sample_piecewise_composition(1, &spec, &mut rng_from_seed(2));
        let tail = competitor_tail(&x, &x, &spec).unwrap();
        let expected = -(ln_gamma(961.0) - 2.0 * ln_gamma(481.0));
        // the complementary match (all bits flipped) ties as well
        assert!((tail.ln_p_tie - (expected + std::f64::consts::LN_2)).abs() < 1e-6, "{:?}", tail);
        assert_eq!(tail.ln_p_greater, f64::NEG_INFINITY);
        let m = MessageIndex::from_bits(vec![true; 512]);
        assert!(mmi_error_probability(&tail, &m) < 1e-100);
    }

    #[test]
    fn error_probability_accounts_for_tie_order() {
        let tail = CompetitorTail { ln_p_greater: f64::NEG_INFINITY, ln_p_tie: 0.5f64.ln() };
        // index 0 wins every tie; index 3 of 4 loses to each of 3 earlier ties
        assert_eq!(mmi_error_probability(&tail, &MessageIndex::from_value(0, 2).unwrap()), 0.0);
        let p = mmi_error_probability(&tail, &MessageIndex::from_value(3, 2).unwrap());
        assert!((p - (1.0 - 0.125)).abs() < 1e-12);
        let tail = CompetitorTail { ln_p_greater: 0.25f64.ln(), ln_p_tie: f64::NEG_INFINITY };
        let p = mmi_error_probability(&tail, &MessageIndex::from_value(1, 2).unwrap());
        assert!((p - (1.0 - 0.75f64.powi(3))).abs() < 1e-12);
    }

    #[test]
    fn simulated_decoder_matches_materialized_codebooks() {
        // Average error of exhaustive MMI decoding over random codebooks
        // against the averaged exact error probability, BSC(0.15).
        let (k, c, big_m) = (4usize, 8usize, 2usize);
        let spec = CompositionSpec::from_weights(&[1, 1], c).unwrap();
        let trials = 6000;
        let mut rng = rng_from_seed(77);
        let (mut hits, mut predicted) = (0usize, 0.0);
        for t in 0..trials {
            let cb = build_codebook(big_m, c, k, &spec, 1000 + t as u64).unwrap();
            let m = MessageIndex::from_value(rng.gen_range(0..16), k).unwrap();
            let x: Vec<usize> = cb.codeword(m.value().unwrap() as usize).iter().map(|&s| s as usize).collect();
            let y: Vec<usize> = x.iter().map(|&b| if rng.gen::<f64>() < 0.15 { 1 - b } else { b }).collect();
            if mmi_decode(&cb, &y, big_m).unwrap() != m {
                hits += 1;
            }
            predicted += mmi_error_probability(&competitor_tail(&x, &y, &spec).unwrap(), &m);
        }
        let observed = hits as f64 / trials as f64;
        let expected = predicted / trials as f64;
        let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((observed - expected).abs() < 4.0 * sigma, "observed {observed}, expected {expected}");
    }

    #[test]
    fn lazy_codebook_is_reproducible_and_typed() {
        let spec = CompositionSpec::new(vec![5, 3]).unwrap();
        let cb = LazyCodebook::new(4, 8, 100, &spec, 9).unwrap();
        let m = MessageIndex::from_bits((0..100).map(|i| i % 3 == 0).collect());
        let a = cb.chunk(&m, 2).unwrap();
        assert_eq!(a, cb.chunk(&m, 2).unwrap());
        assert_ne!(a, cb.chunk(&m, 3).unwrap());
        assert_eq!(crate::types::type_of(&a, 2).unwrap(), spec);
        assert!(cb.chunk(&m, 5).is_err());
    }

    #[test]
    fn rejects_non_binary_input() {
        let spec = CompositionSpec::new(vec![1, 1, 1]).unwrap();
        assert!(competitor_tail(&[0, 1, 2], &[0, 1, 1], &spec).is_err());
    }
}
