//! Method-of-types utilities: sequence types, exact composition-set sizes and
//! uniform sampling from fixed-composition sets.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::info::Distribution;

/// Exact symbol counts of a length-`n` sequence over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositionSpec {
    counts: Vec<usize>,
}

impl CompositionSpec {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("composition over an empty alphabet".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidParameter("composition of an empty sequence".into()));
        }
        Ok(Self { counts })
    }

    /// Scales integer weights (e.g. `[1, 1]` for uniform) up to length `n`.
    /// Fails unless the reduced denominator of the weights divides `n`.
    pub fn from_weights(weights: &[usize], n: usize) -> Result<Self> {
        let spec = Self::new(weights.to_vec())?;
        let denom = spec.denominator();
        if n == 0 || n % denom != 0 {
            return Err(Error::InvalidParameter(format!(
                "composition denominator {denom} does not divide length {n}"
            )));
        }
        let g = gcd_all(weights);
        let scale = n / denom;
        Self::new(weights.iter().map(|w| w / g * scale).collect())
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::from_counts(&self.counts).expect("nonempty composition")
    }

    /// Smallest length at which this type is realizable.
    pub fn denominator(&self) -> usize {
        self.len() / gcd_all(&self.counts)
    }

    /// Composition of `m` concatenated copies.
    pub fn repeated(&self, m: usize) -> Self {
        Self { counts: self.counts.iter().map(|c| c * m).collect() }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn gcd_all(v: &[usize]) -> usize {
    v.iter().fold(0, |g, &x| gcd(g, x))
}

/// Type (symbol counts) of `seq`.
pub fn type_of(seq: &[usize], alphabet_size: usize) -> Result<CompositionSpec> {
    if seq.is_empty() {
        return Err(Error::Empty("sequence"));
    }
    let mut counts = vec![0; alphabet_size];
    for &s in seq {
        *counts
            .get_mut(s)
            .ok_or(Error::SymbolOutOfRange { symbol: s, alphabet: alphabet_size })? += 1;
    }
    CompositionSpec::new(counts)
}

fn log2_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) / std::f64::consts::LN_2
}

/// `log2 (n! / prod_x counts[x]!)`, the size of the composition set in bits.
pub fn log_composition_set_size(spec: &CompositionSpec) -> f64 {
    let v = log2_factorial(spec.len()) - spec.counts.iter().map(|&c| log2_factorial(c)).sum::<f64>();
    // ln_gamma round-off around singleton sets
    v.max(0.0)
}

/// Uniform draw from the set of sequences with exactly this type.
pub fn sample_fixed_composition<R: Rng + ?Sized>(spec: &CompositionSpec, rng: &mut R) -> Vec<usize> {
    let mut seq: Vec<usize> = spec
        .counts
        .iter()
        .enumerate()
        .flat_map(|(x, &c)| std::iter::repeat(x).take(c))
        .collect();
    seq.shuffle(rng);
    seq
}

/// Concatenation of `m` independent uniform draws from the composition set.
pub fn sample_piecewise_composition<R: Rng + ?Sized>(
    m: usize,
    chunk_spec: &CompositionSpec,
    rng: &mut R,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(m * chunk_spec.len());
    for _ in 0..m {
        out.extend(sample_fixed_composition(chunk_spec, rng));
    }
    out
}

/// `log2 (|T_n(P)|^M / |T_{Mn}(P)|)` from exact multinomials.
pub fn cat_set_log_ratio(m: usize, spec: &CompositionSpec) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    m as f64 * log_composition_set_size(spec) - log_composition_set_size(&spec.repeated(m))
}
