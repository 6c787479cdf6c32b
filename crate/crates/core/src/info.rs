//! Entropy, mutual information and empirical capacity over finite alphabets.
//!
//! All quantities are in bits. Probabilities below [`ZERO_FLOOR`] are treated
//! as exact zeros inside entropy sums, so `0 log 0 = 0`.

use std::fmt::Write as _;

use crate::channel::{ChannelFamily, StateSequence};
use crate::error::{Error, Result};

/// Tolerance used when validating that a probability vector sums to one.
pub const PROB_TOL: f64 = 1e-12;

/// Entries smaller than this are skipped in `p log p` sums.
pub const ZERO_FLOOR: f64 = 1e-15;

/// Default iteration cap for [`empirical_capacity`].
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        Ok(Self { probs: vec![1.0 / size as f64; size] })
    }

    pub fn point_mass(size: usize, at: usize) -> Result<Self> {
        if at >= size {
            return Err(Error::SymbolOutOfRange { symbol: at, alphabet: size });
        }
        let mut probs = vec![0.0; size];
        probs[at] = 1.0;
        Ok(Self { probs })
    }

    /// Normalizes nonnegative counts into a distribution.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidDistribution("all counts are zero".into()));
        }
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-stochastic transition matrix `W(y|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    rows: Vec<Distribution>,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(x, r)| {
                Distribution::new(r).map_err(|e| Error::InvalidChannel(format!("row {x}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<Distribution>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidChannel("no input symbols".into()));
        };
        let y_size = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != y_size) {
            return Err(Error::DimensionMismatch { expected: y_size, actual: r.len() });
        }
        Ok(Self { rows })
    }

    pub fn identity(size: usize) -> Result<Self> {
        let rows = (0..size)
            .map(|x| Distribution::point_mass(size, x))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Binary Z-channel in which input 0 is received as 1 with probability `q`
    /// and input 1 is always received as 1.
    pub fn z_channel(q: f64) -> Result<Self> {
        Self::new(vec![vec![1.0 - q, q], vec![0.0, 1.0]])
    }

    pub fn x_size(&self) -> usize {
        self.rows.len()
    }

    pub fn y_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &Distribution {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x].probs[y]
    }

    pub fn max_abs_diff(&self, other: &Channel) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Output distribution induced by input distribution `p`.
    pub fn output_distribution(&self, p: &Distribution) -> Result<Distribution> {
        check_input_dim(p, self)?;
        let mut q = vec![0.0; self.y_size()];
        for (px, row) in p.probs.iter().zip(&self.rows) {
            for (qy, w) in q.iter_mut().zip(&row.probs) {
                *qy += px * w;
            }
        }
        Ok(Distribution { probs: q })
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, lambda: f64, other: &Channel) -> Result<Channel> {
        if self.x_size() != other.x_size() || self.y_size() != other.y_size() {
            return Err(Error::DimensionMismatch {
                expected: self.x_size() * self.y_size(),
                actual: other.x_size() * other.y_size(),
            });
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| Distribution {
                probs: a
                    .probs
                    .iter()
                    .zip(&b.probs)
                    .map(|(u, v)| lambda * u + (1.0 - lambda) * v)
                    .collect(),
            })
            .collect();
        Ok(Channel { rows })
    }

    /// Plain-text matrix: one row per line, whitespace-separated decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let line: Vec<String> = row.probs.iter().map(|p| format!("{p}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(parse_matrix(text, 0)?)
    }
}

/// Parses whitespace-separated decimal rows. Blank lines and `#` comments are
/// skipped; `line_offset` is added to reported line numbers.
pub fn parse_matrix(text: &str, line_offset: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: line_offset + i + 1,
                    msg: format!("{tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn check_input_dim(p: &Distribution, w: &Channel) -> Result<()> {
    if p.len() != w.x_size() {
        return Err(Error::DimensionMismatch { expected: w.x_size(), actual: p.len() });
    }
    Ok(())
}

fn plogp(p: f64) -> f64 {
    if p < ZERO_FLOOR {
        0.0
    } else {
        p * p.log2()
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Distribution) -> f64 {
    -p.probs.iter().map(|&x| plogp(x)).sum::<f64>()
}

/// Binary entropy function `h(p)` in bits.
pub fn binary_entropy(p: f64) -> f64 {
    -plogp(p) - plogp(1.0 - p)
}

/// Closed-form `I` of a Z-channel whose corrupted input has probability `px`
/// and is flipped with probability `q`.
pub fn z_channel_mi(px: f64, q: f64) -> f64 {
    let p1 = 1.0 - px + px * q;
    if p1 <= 0.0 {
        return 0.0;
    }
    binary_entropy(px) - p1 * binary_entropy(px * q / p1)
}

/// `I(P, W)` in bits.
pub fn mutual_information(p: &Distribution, w: &Channel) -> Result<f64> {
    let q = w.output_distribution(p)?;
    let mut mi = 0.0;
    for (px, row) in p.probs.iter().zip(&w.rows) {
        if *px < ZERO_FLOOR {
            continue;
        }
        for (wyx, qy) in row.probs.iter().zip(&q.probs) {
            if *wyx < ZERO_FLOOR {
                continue;
            }
            mi += px * wyx * (wyx / qy).log2();
        }
    }
    // Round-off can push identical-row channels slightly negative.
    Ok(mi.max(0.0))
}

/// Mutual information together with the pair that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MiResult {
    pub value: f64,
    pub input_dist: Distribution,
    pub channel: Channel,
}

impl MiResult {
    pub fn evaluate(input_dist: Distribution, channel: Channel) -> Result<Self> {
        let value = mutual_information(&input_dist, &channel)?;
        Ok(Self { value, input_dist, channel })
    }

    /// `log2 min(|X|, |Y|)`, the largest value any channel of this shape attains.
    pub fn c_max(&self) -> f64 {
        (self.channel.x_size().min(self.channel.y_size()) as f64).log2()
    }
}

/// `(1/N) sum_i W(.|., z_i)` for the given state sequence.
pub fn state_averaged_channel(family: &ChannelFamily, z_seq: &StateSequence) -> Result<Channel> {
    if z_seq.is_empty() {
        return Err(Error::Empty("state sequence"));
    }
    let counts = z_seq.type_counts(family.z_size())?;
    let q = Distribution::from_counts(&counts)?;
    channel_from_state_type(family, &q)
}

/// `sum_z W(.|., z) Q(z)`.
pub fn channel_from_state_type(family: &ChannelFamily, q: &Distribution) -> Result<Channel> {
    if q.len() != family.z_size() {
        return Err(Error::DimensionMismatch { expected: family.z_size(), actual: q.len() });
    }
    let (xs, ys) = (family.x_size(), family.y_size());
    let mut rows = vec![vec![0.0; ys]; xs];
    for (z, &qz) in q.probs().iter().enumerate() {
        if qz == 0.0 {
            continue;
        }
        let w = family.channel(z);
        for (x, row) in rows.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                *v += qz * w.prob(x, y);
            }
        }
    }
    let rows = rows.into_iter().map(|probs| Distribution { probs }).collect();
    Channel::from_rows(rows)
}

/// Divergence `D(W(.|x) || q)` in bits for every input row.
fn row_divergences(w: &Channel, q: &Distribution) -> Vec<f64> {
    w.rows
        .iter()
        .map(|row| {
            row.probs
                .iter()
                .zip(&q.probs)
                .filter(|(wy, _)| **wy >= ZERO_FLOOR)
                .map(|(wy, qy)| wy * (wy / qy).log2())
                .sum::<f64>()
                .max(0.0)
        })
        .collect()
}

/// `sup_P I(P, W)` by Blahut-Arimoto, stopping once the duality gap
/// `max_x D(W_x || q) - I(P, W)` falls below `tol`.
pub fn empirical_capacity(w: &Channel, tol: f64) -> Result<(f64, Distribution)> {
    empirical_capacity_with_limit(w, tol, DEFAULT_MAX_ITERATIONS)
}

pub fn empirical_capacity_with_limit(
    w: &Channel,
    tol: f64,
    max_iterations: usize,
) -> Result<(f64, Distribution)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut p = Distribution::uniform(w.x_size())?;
    let mut gap = f64::INFINITY;
    for _ in 0..max_iterations {
        let q = w.output_distribution(&p)?;
        let d = row_divergences(w, &q);
        let mi: f64 = p.probs.iter().zip(&d).map(|(px, dx)| px * dx).sum();
        gap = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - mi;
        if gap < tol {
            return Ok((mutual_information(&p, w)?, p));
        }
        // Shift exponents by the max for numerical stability.
        let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut next: Vec<f64> = p
            .probs
            .iter()
            .zip(&d)
            .map(|(px, dx)| px * (dx - dmax).exp2())
            .collect();
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= z);
        p = Distribution { probs: next };
    }
    Err(Error::NoConvergence { iterations: max_iterations, gap })
}

/// Bound on `|H(P) - H(Q)|` when `P` and `Q` differ by at most `eps` in
/// every entry of an alphabet of the given size.
pub fn entropy_continuity_bound(eps: f64, alphabet_size: usize) -> f64 {
    let s = alphabet_size.saturating_sub(1) as f64;
    let log_term = if s > 1.0 { s * s.log2() * eps } else { 0.0 };
    s * binary_entropy(eps) + log_term
}

/// Bound on `|I(P, W) - I(P, V)|` when the channels differ by at most `eps`
/// in every entry.
pub fn mi_continuity_bound(eps: f64, output_size: usize) -> f64 {
    2.0 * entropy_continuity_bound(eps, output_size)
}
