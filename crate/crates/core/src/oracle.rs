//! Brute-force cross-checks on small instances, written independently of the
//! code they check.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::channel::{family_mod_additive, ChannelSession, StateSequence};
use crate::codebook::{build_codebook, mmi_decode};
use crate::info::{
    binary_entropy, empirical_capacity, entropy, entropy_continuity_bound, mi_continuity_bound, mutual_information,
    state_averaged_channel, Channel, Distribution,
};
use crate::seed::{rng_from_seed, RandomSource};
use crate::training::{
    deinterleave_chunk, estimate_chunk_channel, estimate_round_channel, interleave_chunk, select_training_plan,
};
use crate::types::{log_composition_set_size, sample_fixed_composition, type_of, CompositionSpec};

/// Tolerance on bound comparisons.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub instances: usize,
    pub disagreements: usize,
    /// First few failing instances, described.
    pub failures: Vec<String>,
}

impl OracleReport {
    fn new(name: &str) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.disagreements += 1;
            if self.failures.len() < 10 {
                self.failures.push(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.disagreements == 0 && self.instances > 0
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} instances, {} disagreements", self.name, self.instances, self.disagreements)?;
        for fail in &self.failures {
            write!(f, "\n  {fail}")?;
        }
        Ok(())
    }
}

/// Empirical mutual information from a joint histogram via
/// `H(X) + H(Y) - H(X, Y)`.
fn brute_score(x: &[u8], y: &[usize]) -> f64 {
    let n = x.len() as f64;
    let mut joint: HashMap<(u8, usize), usize> = HashMap::new();
    let mut mx: HashMap<u8, usize> = HashMap::new();
    let mut my: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *mx.entry(a).or_default() += 1;
        *my.entry(b).or_default() += 1;
    }
    let h = |counts: &mut dyn Iterator<Item = usize>| -> f64 {
        counts.map(|c| c as f64 / n).map(|p| -p * p.log2()).sum()
    };
    h(&mut mx.values().copied()) + h(&mut my.values().copied()) - h(&mut joint.values().copied())
}

/// Scores every received word against every codeword for `k <= 3`, `c <= 6`
/// binary codebooks and compares the winner with the decoder's.
pub fn oracle_mmi(seed: u64) -> OracleReport {
    let mut report = OracleReport::new("mmi");
    for k in 1..=3 {
        for c in [2usize, 4, 6] {
            for m_star in 1..=2usize {
                for weights in [[1usize, 1], [1, c - 1]] {
                    let Ok(comp) = CompositionSpec::from_weights(&weights, c) else { continue };
                    for rep in 0..2u64 {
                        let cb_seed = seed ^ ((k as u64) << 32 | (c as u64) << 16 | (m_star as u64) << 8 | rep);
                        let cb = build_codebook(m_star, c, k, &comp, cb_seed).expect("valid codebook");
                        for n in 1..=m_star {
                            let len = n * c;
                            if len > 12 {
                                continue;
                            }
                            for word in 0u32..(1 << len) {
                                let y: Vec<usize> = (0..len).map(|i| (word >> i) as usize & 1).collect();
                                let scores: Vec<f64> =
                                    (0..cb.len()).map(|m| brute_score(&cb.codeword(m)[..len], &y)).collect();
                                let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                                let expect = scores.iter().position(|&s| s >= best - 1e-9).expect("nonempty");
                                let got = mmi_decode(&cb, &y, n).ok().and_then(|m| m.value());
                                report.record(got == Some(expect as u64), || {
                                    format!("k={k} c={c} M*={m_star} n={n} seed={cb_seed} y={y:?}: oracle {expect}, decoder {got:?}")
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    report
}

fn brute_mi(p: &[f64], w: &Channel) -> f64 {
    let ys = w.y_size();
    let mut total = 0.0;
    for y in 0..ys {
        let q: f64 = p.iter().enumerate().map(|(x, px)| px * w.prob(x, y)).sum();
        for (x, &px) in p.iter().enumerate() {
            let v = w.prob(x, y);
            if px > 0.0 && v > 0.0 {
                total += px * v * (v / q).log2();
            }
        }
    }
    total
}

fn random_channel(rng: &mut RandomSource, xs: usize, ys: usize) -> Channel {
    let rows = (0..xs)
        .map(|_| {
            let v: Vec<f64> = (0..ys).map(|_| rng.gen::<f64>().powi(2)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect();
    Channel::new(rows).expect("stochastic rows")
}

/// Grid search over input distributions at resolution `1e-3`, compared with
/// the iterative capacity solver.
pub fn oracle_capacity(seed: u64) -> OracleReport {
    const STEPS: usize = 1000;
    let mut report = OracleReport::new("capacity");
    let mut rng = rng_from_seed(seed);
    let mut channels: Vec<(String, Channel)> = Vec::new();
    for p in [0.0, 0.05, 0.11, 0.25, 0.5] {
        channels.push((format!("bsc({p})"), Channel::bsc(p).expect("valid")));
    }
    for q in [0.1, 0.3, 0.7, 1.0] {
        channels.push((format!("z({q})"), Channel::z_channel(q).expect("valid")));
    }
    channels.push(("erasure(0.2)".into(), Channel::new(vec![vec![0.8, 0.2, 0.0], vec![0.0, 0.2, 0.8]]).expect("valid")));
    for i in 0..8 {
        channels.push((format!("random2x2#{i}"), random_channel(&mut rng, 2, 2)));
        channels.push((format!("random2x3#{i}"), random_channel(&mut rng, 2, 3)));
    }
    for i in 0..2 {
        channels.push((format!("random3x3#{i}"), random_channel(&mut rng, 3, 3)));
    }
    for (name, w) in channels {
        let grid = match w.x_size() {
            2 => (0..=STEPS).map(|i| brute_mi(&[i as f64 / STEPS as f64, 1.0 - i as f64 / STEPS as f64], &w)).fold(0.0, f64::max),
            _ => {
                let mut best = 0.0f64;
                for i in 0..=STEPS {
                    for j in 0..=STEPS - i {
                        let p = [i as f64, j as f64, (STEPS - i - j) as f64].map(|v| v / STEPS as f64);
                        best = best.max(brute_mi(&p, &w));
                    }
                }
                best
            }
        };
        match empirical_capacity(&w, 1e-9) {
            Ok((c, _)) => report.record((c - grid).abs() <= 1e-3 && grid <= c + 1e-9, || {
                format!("{name}: grid {grid:.9}, solver {c:.9}")
            }),
            Err(e) => report.record(false, || format!("{name}: solver failed: {e}")),
        }
    }
    report
}

fn compositions(n: usize, size: usize) -> Vec<Vec<usize>> {
    if size == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, size - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Enumerates every sequence of length `n <= 12` over alphabets of size 2 and
/// 3, checks type class sizes, and chi-square tests the uniformity of
/// fixed-composition sampling on small classes.
pub fn oracle_types(seed: u64) -> OracleReport {
    let mut report = OracleReport::new("types");
    for size in [2usize, 3] {
        for n in 1..=12usize {
            let mut classes: HashMap<Vec<usize>, u64> = HashMap::new();
            let total = size.pow(n as u32);
            for code in 0..total {
                let mut counts = vec![0usize; size];
                let mut v = code;
                for _ in 0..n {
                    counts[v % size] += 1;
                    v /= size;
                }
                *classes.entry(counts).or_default() += 1;
            }
            for counts in compositions(n, size) {
                let enumerated = classes.get(&counts).copied().unwrap_or(0);
                let spec = CompositionSpec::new(counts.clone()).expect("valid counts");
                let counted = 2f64.powf(log_composition_set_size(&spec)).round() as u64;
                report.record(counted == enumerated, || {
                    format!("n={n} counts={counts:?}: enumerated {enumerated}, counted {counted}")
                });
            }
        }
    }

    let mut rng = rng_from_seed(seed);
    for counts in [vec![2usize, 2], vec![3, 3], vec![1, 4], vec![2, 2, 2], vec![3, 1, 1]] {
        let spec = CompositionSpec::new(counts.clone()).expect("valid counts");
        let size = 2f64.powf(log_composition_set_size(&spec)).round() as usize;
        let draws = 200 * size;
        let mut hist: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut wrong_type = 0;
        for _ in 0..draws {
            let s = sample_fixed_composition(&spec, &mut rng);
            if type_of(&s, spec.alphabet_size()).map(|t| t != spec).unwrap_or(true) {
                wrong_type += 1;
            }
            *hist.entry(s).or_default() += 1;
        }
        let expected = draws as f64 / size as f64;
        let chi2: f64 = hist.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum::<f64>()
            + (size - hist.len()) as f64 * expected;
        let limit = ChiSquared::new((size - 1) as f64).expect("df > 0").inverse_cdf(0.999);
        report.record(wrong_type == 0 && hist.len() == size && chi2 <= limit, || {
            format!("sampling {counts:?}: {} classes seen of {size}, chi2 {chi2:.3} > {limit:.3} or {wrong_type} wrong types", hist.len())
        });
    }
    report
}

fn random_distribution(rng: &mut RandomSource, size: usize) -> Vec<f64> {
    // sparse and peaked draws make the bounds nearly tight
    let mut v: Vec<f64> = (0..size)
        .map(|_| match rng.gen_range(0..4) {
            0 => 0.0,
            1 => rng.gen::<f64>().powi(6),
            _ => rng.gen::<f64>(),
        })
        .collect();
    if v.iter().sum::<f64>() == 0.0 {
        v[rng.gen_range(0..size)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Moves `p` toward `q` until the largest entry difference is at most `eps`.
fn within(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    let d = p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let lambda = if d > eps { eps / d } else { 1.0 };
    p.iter().zip(q).map(|(a, b)| a + lambda * (b - a)).collect()
}

fn renormalized(v: Vec<f64>) -> Distribution {
    let s: f64 = v.iter().sum();
    Distribution::new(v.into_iter().map(|x| (x / s).max(0.0)).collect()).expect("normalized")
}

/// Random pairs `(P, Q)` with entrywise distance at most `eps <= 1/2`.
pub fn entropy_bound_suite(instances: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("entropy_continuity");
    let mut rng = rng_from_seed(seed);
    for _ in 0..instances {
        let size = rng.gen_range(2..=6);
        let eps = rng.gen_range(1e-6..=0.5);
        let p = random_distribution(&mut rng, size);
        let target = random_distribution(&mut rng, size);
        let q = within(&p, &target, eps);
        let (p, q) = (renormalized(p), renormalized(q));
        let gap = (entropy(&p) - entropy(&q)).abs();
        let bound = entropy_continuity_bound(eps, size);
        report.record(gap <= bound + BOUND_TOL, || format!("|S|={size} eps={eps} P={:?} Q={:?}: {gap} > {bound}", p.probs(), q.probs()));
    }
    report
}

/// Random channel pairs with entrywise distance at most `eps <= 1/2` and a
/// random input distribution.
pub fn mi_bound_suite(instances: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("mi_continuity");
    let mut rng = rng_from_seed(seed);
    for _ in 0..instances {
        let xs = rng.gen_range(2..=4);
        let ys = rng.gen_range(2..=5);
        let eps = rng.gen_range(1e-6..=0.5);
        let mut w_rows = Vec::new();
        let mut v_rows = Vec::new();
        for _ in 0..xs {
            let a = random_distribution(&mut rng, ys);
            let b = random_distribution(&mut rng, ys);
            let b = within(&a, &b, eps);
            w_rows.push(renormalized(a));
            v_rows.push(renormalized(b));
        }
        let w = Channel::from_rows(w_rows).expect("rows");
        let v = Channel::from_rows(v_rows).expect("rows");
        let p = renormalized(random_distribution(&mut rng, xs));
        let gap = (mutual_information(&p, &w).expect("dims") - mutual_information(&p, &v).expect("dims")).abs();
        let bound = mi_continuity_bound(eps, ys);
        report.record(gap <= bound + BOUND_TOL, || format!("|X|={xs} |Y|={ys} eps={eps}: {gap} > {bound}"));
    }
    report
}

/// `h(x + e) - h(x) <= h(e) - h(0)` for `0 <= x <= x + e <= 1/2`.
pub fn concavity_suite(instances: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("concavity_increment");
    let mut rng = rng_from_seed(seed);
    for i in 0..instances {
        let (x, e) = match i % 4 {
            0 => (0.0, rng.gen_range(0.0..=0.5)),
            1 => {
                let e = rng.gen_range(0.0..=0.5);
                (0.5 - e, e)
            }
            _ => {
                let x: f64 = rng.gen_range(0.0..=0.5);
                (x, rng.gen_range(0.0..=0.5 - x))
            }
        };
        let lhs = binary_entropy(x + e) - binary_entropy(x);
        let rhs = binary_entropy(e) - binary_entropy(0.0);
        report.record(lhs <= rhs + BOUND_TOL, || format!("x={x} e={e}: {lhs} > {rhs}"));
    }
    report
}

/// `I(P, lW + (1-l)V) <= l I(P, W) + (1-l) I(P, V)`.
pub fn convexity_suite(instances: usize, seed: u64) -> OracleReport {
    let mut report = OracleReport::new("mi_convexity");
    let mut rng = rng_from_seed(seed);
    for _ in 0..instances {
        let xs = rng.gen_range(2..=4);
        let ys = rng.gen_range(2..=4);
        let w = Channel::from_rows((0..xs).map(|_| renormalized(random_distribution(&mut rng, ys))).collect()).expect("rows");
        let v = Channel::from_rows((0..xs).map(|_| renormalized(random_distribution(&mut rng, ys))).collect()).expect("rows");
        let p = renormalized(random_distribution(&mut rng, xs));
        let l: f64 = rng.gen();
        let mixed = w.mix(l, &v).expect("same dims");
        let lhs = mutual_information(&p, &mixed).expect("dims");
        let rhs = l * mutual_information(&p, &w).expect("dims") + (1.0 - l) * mutual_information(&p, &v).expect("dims");
        report.record(lhs <= rhs + BOUND_TOL, || format!("lambda={l}: {lhs} > {rhs}"));
    }
    report
}

/// Deviations of the round estimate from the channel averaged over the code
/// positions and over the whole round, for one simulated round on the
/// modulo-additive family with uniform input.
fn round_deviation(b: usize, t: usize, chunks: usize, states: &StateSequence, rng: &mut RandomSource) -> (f64, f64) {
    let fam = family_mod_additive();
    let comp = CompositionSpec::from_weights(&[1, 1], b - t).expect("even code length");
    let p = comp.distribution();
    let mut session = ChannelSession::new(&fam, states, rng_from_seed(rng.gen()));
    let mut estimates = Vec::new();
    let mut code_states = Vec::new();
    for n in 0..chunks {
        let plan = select_training_plan(b, t, 2, rng).expect("valid plan");
        let code = sample_fixed_composition(&comp, rng);
        let received = session.transmit(&interleave_chunk(&code, &plan).expect("sizes")).expect("in range");
        estimates.push(estimate_chunk_channel(&received, &plan, 2).expect("sizes"));
        code_states.extend(deinterleave_chunk(&states.states()[n * b..(n + 1) * b], &plan).expect("sizes"));
    }
    let est = mutual_information(&p, &estimate_round_channel(&estimates).expect("nonempty").matrix).expect("dims");
    let code_avg = state_averaged_channel(&fam, &StateSequence::new(code_states, 2).expect("binary")).expect("dims");
    let round_avg = state_averaged_channel(&fam, states).expect("dims");
    (
        (est - mutual_information(&p, &code_avg).expect("dims")).abs(),
        (est - mutual_information(&p, &round_avg).expect("dims")).abs(),
    )
}

fn iid_states(len: usize, rng: &mut RandomSource) -> StateSequence {
    let q: f64 = rng.gen_range(0.0..0.5);
    StateSequence::new((0..len).map(|_| (rng.gen::<f64>() < q) as usize).collect(), 2).expect("binary")
}

/// All noise in one contiguous run of random length and offset.
fn contiguous_states(len: usize, rng: &mut RandomSource) -> StateSequence {
    let run = rng.gen_range(0..=len / 2);
    let start = rng.gen_range(0..=len - run);
    StateSequence::new((0..len).map(|i| (i >= start && i < start + run) as usize).collect(), 2).expect("binary")
}

/// Frequencies of `|I(P, W_hat) - I(P, W)| > eps1 / 2` over simulated
/// rounds of `chunks` chunks, against the code-position and whole-round
/// averages. With `contiguous` every round concentrates its noise in one
/// run; otherwise rounds alternate between iid and contiguous noise.
pub fn estimation_error_frequency(
    rounds: usize,
    b: usize,
    t: usize,
    chunks: usize,
    eps1: f64,
    contiguous: bool,
    seed: u64,
) -> (f64, f64) {
    let mut rng = rng_from_seed(seed);
    let (mut code, mut round) = (0, 0);
    for i in 0..rounds {
        let z = if contiguous || i % 2 == 1 {
            contiguous_states(b * chunks, &mut rng)
        } else {
            iid_states(b * chunks, &mut rng)
        };
        let (d_code, d_round) = round_deviation(b, t, chunks, &z, &mut rng);
        code += (d_code > eps1 / 2.0) as usize;
        round += (d_round > eps1 / 2.0) as usize;
    }
    (code as f64 / rounds as f64, round as f64 / rounds as f64)
}

/// Fraction of draws where the state average over `t` random training
/// positions misses the chunk average by more than `eps`, with `noisy`
/// noise symbols in one contiguous block.
pub fn sampling_miss_frequency(b: usize, t: usize, noisy: usize, eps: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let start = (b - noisy) / 3;
    let whole = noisy as f64 / b as f64;
    let mut misses = 0;
    for _ in 0..draws {
        let plan = select_training_plan(b, t, 2, &mut rng).expect("valid plan");
        let hits = (0..2).flat_map(|x| plan.positions(x).iter()).filter(|&&i| i >= start && i < start + noisy).count();
        misses += ((hits as f64 / t as f64 - whole).abs() > eps) as usize;
    }
    misses as f64 / draws as f64
}

/// Fraction of chunks whose estimate of an iid BSC(`p`) is within `eps` of
/// it in every entry.
pub fn chunk_estimate_hit_frequency(b: usize, t: usize, p: f64, eps: f64, trials: usize, seed: u64) -> f64 {
    let fam = family_mod_additive();
    let truth = Channel::bsc(p).expect("valid crossover");
    let mut rng = rng_from_seed(seed);
    let mut ok = 0;
    for _ in 0..trials {
        let plan = select_training_plan(b, t, 2, &mut rng).expect("valid plan");
        let sent = interleave_chunk(&vec![0; b - t], &plan).expect("sizes");
        let z = StateSequence::new((0..b).map(|_| (rng.gen::<f64>() < p) as usize).collect(), 2).expect("binary");
        let mut s = ChannelSession::new(&fam, &z, rng_from_seed(rng.gen()));
        let est = estimate_chunk_channel(&s.transmit(&sent).expect("in range"), &plan, 2).expect("sizes");
        ok += (est.matrix.max_abs_diff(&truth) <= eps) as usize;
    }
    ok as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_score_examples() {
        assert!((brute_score(&[0, 1, 0, 1], &[0, 1, 0, 1]) - 1.0).abs() < 1e-12);
        assert!(brute_score(&[0, 0, 1, 1], &[0, 1, 0, 1]).abs() < 1e-12);
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(4, 2).len(), 5);
        assert_eq!(compositions(3, 3).len(), 10);
    }

    #[test]
    fn type_class_of_two_two() {
        let spec = CompositionSpec::new(vec![2, 2]).unwrap();
        assert_eq!(2f64.powf(log_composition_set_size(&spec)).round() as u64, 6);
    }

    #[test]
    fn suites_smoke() {
        assert!(concavity_suite(200, 1).passed());
        assert!(convexity_suite(200, 1).passed());
        assert!(entropy_bound_suite(200, 1).passed());
        assert!(mi_bound_suite(200, 1).passed());
    }

    #[test]
    fn report_formatting() {
        let mut r = OracleReport::new("x");
        r.record(true, String::new);
        r.record(false, || "bad".into());
        assert!(!r.passed());
        assert_eq!(r.to_string(), "x: 2 instances, 1 disagreements\n  bad");
    }
}
