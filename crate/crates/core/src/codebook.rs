//! Randomized `(M*, c, k)` rateless code with piecewise constant-composition
//! codewords and a maximum-mutual-information decoder.
//!
//! Every codeword is `m_star` chunks of `c` symbols, and every chunk has the
//! exact type given by `composition`. Codeword `m` is transmitted one chunk at
//! a time; after `M` chunks the decoder scores all codewords' length-`M c`
//! prefixes against the received word by empirical mutual information and
//! returns the best one, lowest index on ties.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::types::{sample_piecewise_composition, type_of, CompositionSpec};

/// Largest message size whose codebook may be fully materialized.
pub const MAX_MATERIALIZED_K: usize = 20;

/// Total symbol budget for a materialized codebook.
pub const MAX_CODEBOOK_SYMBOLS: usize = 1 << 28;

/// Scores within this distance are treated as tied.
pub const SCORE_TIE_TOL: f64 = 1e-12;

const MAGIC: &[u8; 4] = b"RLCB";
const FORMAT_VERSION: u8 = 1;

/// Message of `k` bits, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessageIndex {
    bits: Vec<bool>,
}

impl MessageIndex {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_value(value: u64, k: usize) -> Result<Self> {
        if k < 64 && value >> k != 0 {
            return Err(Error::InvalidParameter(format!("message {value} does not fit in {k} bits")));
        }
        let bits = (0..k)
            .map(|i| {
                let shift = k - 1 - i;
                shift < 64 && (value >> shift) & 1 == 1
            })
            .collect();
        Ok(Self { bits })
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Integer value when it fits in 64 bits.
    pub fn value(&self) -> Option<u64> {
        let lead = self.bits.len().saturating_sub(64);
        if self.bits[..lead].iter().any(|b| *b) {
            return None;
        }
        Some(self.bits[lead..].iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    /// Natural log of the integer value; `-inf` for zero.
    pub fn ln_value(&self) -> f64 {
        let Some(first) = self.bits.iter().position(|b| *b) else {
            return f64::NEG_INFINITY;
        };
        let top = &self.bits[first..self.bits.len().min(first + 53)];
        let mantissa = top.iter().fold(0f64, |acc, &b| acc * 2.0 + b as u8 as f64);
        let shift = self.bits.len() - first - top.len();
        mantissa.ln() + shift as f64 * std::f64::consts::LN_2
    }

    /// Hex rendering, left-padded to a whole number of nibbles.
    pub fn to_hex(&self) -> String {
        if self.bits.is_empty() {
            return "-".into();
        }
        let pad = (4 - self.bits.len() % 4) % 4;
        let padded: Vec<bool> = std::iter::repeat(false).take(pad).chain(self.bits.iter().copied()).collect();
        padded
            .chunks(4)
            .map(|nib| {
                let v = nib.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }
}

/// Joint symbol counts of two equal-length sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    x_size: usize,
    y_size: usize,
    counts: Vec<usize>,
}

impl JointCounts {
    pub fn zeros(x_size: usize, y_size: usize) -> Self {
        Self { x_size, y_size, counts: vec![0; x_size * y_size] }
    }

    pub fn from_sequences(x: &[usize], y: &[usize]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
        }
        if x.is_empty() {
            return Err(Error::Empty("sequence pair"));
        }
        let xs = x.iter().max().map_or(0, |m| m + 1);
        let ys = y.iter().max().map_or(0, |m| m + 1);
        let mut j = Self::zeros(xs, ys);
        for (&a, &b) in x.iter().zip(y) {
            j.add(a, b);
        }
        Ok(j)
    }

    pub fn from_counts(x_size: usize, y_size: usize, counts: Vec<usize>) -> Self {
        assert_eq!(counts.len(), x_size * y_size);
        Self { x_size, y_size, counts }
    }

    pub fn add(&mut self, x: usize, y: usize) {
        self.counts[x * self.y_size + y] += 1;
    }

    pub fn get(&self, x: usize, y: usize) -> usize {
        self.counts[x * self.y_size + y]
    }

    /// Mutual information of the joint type in bits.
    pub fn mutual_information(&self) -> f64 {
        let n: usize = self.counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let mut nx = vec![0usize; self.x_size];
        let mut ny = vec![0usize; self.y_size];
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                let c = self.get(x, y);
                nx[x] += c;
                ny[y] += c;
            }
        }
        let n = n as f64;
        let mut mi = 0.0;
        for x in 0..self.x_size {
            for y in 0..self.y_size {
                let c = self.get(x, y);
                if c > 0 {
                    let c = c as f64;
                    mi += c * (n * c / (nx[x] as f64 * ny[y] as f64)).log2();
                }
            }
        }
        (mi / n).max(0.0)
    }
}

/// Empirical mutual information of the joint type of `(x, y)`.
pub fn empirical_mi_score(x: &[usize], y: &[usize]) -> Result<f64> {
    Ok(JointCounts::from_sequences(x, y)?.mutual_information())
}

/// Fully materialized `2^k x (m_star c)` codebook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatelessCodebook {
    m_star: usize,
    c: usize,
    k: usize,
    composition: CompositionSpec,
    seed: u64,
    symbols: Vec<u8>,
}

impl RatelessCodebook {
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

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        1 << self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn codeword_len(&self) -> usize {
        self.m_star * self.c
    }

    pub fn codeword(&self, m: usize) -> &[u8] {
        let l = self.codeword_len();
        &self.symbols[m * l..(m + 1) * l]
    }

    /// Writes the binary dump: header followed by bit-packed symbols.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let alphabet = self.composition.alphabet_size();
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION, 0, 0, 0])?;
        for v in [self.m_star, self.c, self.k, alphabet] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for &cnt in self.composition.counts() {
            w.write_all(&(cnt as u32).to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&pack_symbols(&self.symbols, bits_per_symbol(alphabet)))?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::Codebook("bad magic".into()));
        }
        if head[4] != FORMAT_VERSION {
            return Err(Error::Codebook(format!("unsupported version {}", head[4])));
        }
        let mut u32s = [0usize; 4];
        for v in u32s.iter_mut() {
            *v = read_u32(&mut r)? as usize;
        }
        let [m_star, c, k, alphabet] = u32s;
        if alphabet == 0 || alphabet > 256 {
            return Err(Error::Codebook(format!("alphabet size {alphabet} unsupported")));
        }
        let counts = (0..alphabet).map(|_| read_u32(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let mut seed = [0u8; 8];
        r.read_exact(&mut seed)?;
        let composition = CompositionSpec::new(counts)?;
        check_shape(m_star, c, k, &composition)?;
        let total = (1usize << k) * m_star * c;
        let bits = bits_per_symbol(alphabet);
        let mut packed = vec![0u8; (total * bits).div_ceil(8)];
        r.read_exact(&mut packed)?;
        let symbols = unpack_symbols(&packed, bits, total);
        let cb = Self { m_star, c, k, composition, seed: u64::from_le_bytes(seed), symbols };
        for chunk in cb.symbols.chunks(c) {
            let chunk: Vec<usize> = chunk.iter().map(|&s| s as usize).collect();
            if type_of(&chunk, alphabet)? != cb.composition {
                return Err(Error::Codebook("chunk with wrong composition".into()));
            }
        }
        Ok(cb)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn bits_per_symbol(alphabet: usize) -> usize {
    (usize::BITS - (alphabet.max(2) - 1).leading_zeros()) as usize
}

fn pack_symbols(symbols: &[u8], bits: usize) -> Vec<u8> {
    let mut out = vec![0u8; (symbols.len() * bits).div_ceil(8)];
    for (i, &s) in symbols.iter().enumerate() {
        for b in 0..bits {
            if (s >> b) & 1 == 1 {
                let pos = i * bits + b;
                out[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    out
}

fn unpack_symbols(packed: &[u8], bits: usize, count: usize) -> Vec<u8> {
    (0..count)
        .map(|i| {
            (0..bits).fold(0u8, |acc, b| {
                let pos = i * bits + b;
                acc | (((packed[pos / 8] >> (pos % 8)) & 1) << b)
            })
        })
        .collect()
}

fn check_shape(m_star: usize, c: usize, k: usize, composition: &CompositionSpec) -> Result<()> {
    if m_star == 0 {
        return Err(Error::InvalidParameter("m_star must be at least 1".into()));
    }
    if composition.len() != c {
        return Err(Error::InvalidParameter(format!(
            "composition has length {}, chunk length is {c}",
            composition.len()
        )));
    }
    if composition.alphabet_size() > 256 {
        return Err(Error::InvalidParameter("input alphabet larger than 256".into()));
    }
    if k > MAX_MATERIALIZED_K {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the materialized codebook limit of {MAX_MATERIALIZED_K}"
        )));
    }
    if (1usize << k).saturating_mul(m_star).saturating_mul(c) > MAX_CODEBOOK_SYMBOLS {
        return Err(Error::InvalidParameter(format!(
            "codebook of 2^{k} x {m_star} x {c} symbols exceeds the memory budget"
        )));
    }
    Ok(())
}

/// Draws `2^k` codewords i.i.d. from `{T_c(P)}^{m_star}`, deterministically
/// from `seed`.
pub fn build_codebook(
    m_star: usize,
    c: usize,
    k: usize,
    composition: &CompositionSpec,
    seed: u64,
) -> Result<RatelessCodebook> {
    check_shape(m_star, c, k, composition)?;
    let mut rng = rng_from_seed(seed);
    let mut symbols = Vec::with_capacity((1 << k) * m_star * c);
    for _ in 0..1usize << k {
        symbols.extend(sample_piecewise_composition(m_star, composition, &mut rng).into_iter().map(|s| s as u8));
    }
    Ok(RatelessCodebook { m_star, c, k, composition: composition.clone(), seed, symbols })
}

/// The `n`-th chunk (1-based) of codeword `m`.
pub fn encode_chunk(cb: &RatelessCodebook, m: &MessageIndex, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > cb.m_star {
        return Err(Error::InvalidParameter(format!("chunk {n} outside 1..={}", cb.m_star)));
    }
    let idx = codeword_index(cb, m)?;
    Ok(cb.codeword(idx)[(n - 1) * cb.c..n * cb.c].iter().map(|&s| s as usize).collect())
}

fn codeword_index(cb: &RatelessCodebook, m: &MessageIndex) -> Result<usize> {
    if m.k() != cb.k {
        return Err(Error::DimensionMismatch { expected: cb.k, actual: m.k() });
    }
    Ok(m.value().expect("k bounded by MAX_MATERIALIZED_K") as usize)
}

/// MMI decoding from the first `big_m` chunks of every codeword.
pub fn mmi_decode(cb: &RatelessCodebook, y: &[usize], big_m: usize) -> Result<MessageIndex> {
    if big_m == 0 || big_m > cb.m_star {
        return Err(Error::InvalidParameter(format!("decode time {big_m} outside 1..={}", cb.m_star)));
    }
    let len = big_m * cb.c;
    if y.len() != len {
        return Err(Error::DimensionMismatch { expected: len, actual: y.len() });
    }
    let xs = cb.composition.alphabet_size();
    let ys = y.iter().max().map_or(1, |m| m + 1);
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut joint = JointCounts::zeros(xs, ys);
    for m in 0..cb.len() {
        joint.counts.iter_mut().for_each(|c| *c = 0);
        for (&x, &yy) in cb.codeword(m)[..len].iter().zip(y) {
            joint.add(x as usize, yy);
        }
        let score = joint.mutual_information();
        if score > best.1 + SCORE_TIE_TOL {
            best = (m, score);
        }
    }
    MessageIndex::from_value(best.0 as u64, cb.k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(c: usize) -> CompositionSpec {
        CompositionSpec::from_weights(&[1, 1], c).unwrap()
    }

    #[test]
    fn message_index_conversions() {
        let m = MessageIndex::from_value(5, 4).unwrap();
        assert_eq!(m.bits(), &[false, true, false, true]);
        assert_eq!(m.value(), Some(5));
        assert_eq!(m.to_hex(), "5");
        assert!((m.ln_value() - 5f64.ln()).abs() < 1e-12);
        assert!(MessageIndex::from_value(16, 4).is_err());
        let big = MessageIndex::from_bits([vec![true], vec![false; 99]].concat());
        assert_eq!(big.value(), None);
        assert!((big.ln_value() - 99.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(MessageIndex::from_value(0, 3).unwrap().ln_value(), f64::NEG_INFINITY);
    }

    #[test]
    fn codebook_is_deterministic_and_typed() {
        let p = CompositionSpec::new(vec![3, 5]).unwrap();
        let a = build_codebook(3, 8, 4, &p, 99).unwrap();
        assert_eq!(a, build_codebook(3, 8, 4, &p, 99).unwrap());
        for m in 0..16 {
            for chunk in a.codeword(m).chunks(8) {
                let chunk: Vec<usize> = chunk.iter().map(|&s| s as usize).collect();
                assert_eq!(type_of(&chunk, 2).unwrap(), p);
            }
        }
        // collision of all 4 codewords in both books has probability 56^-4
        let b = build_codebook(1, 8, 2, &p, 1).unwrap();
        let c = build_codebook(1, 8, 2, &p, 2).unwrap();
        assert_ne!(b, c);
    }

    #[test]
    fn codebook_guards() {
        let p = uniform(4);
        assert!(build_codebook(1, 4, 21, &p, 0).is_err());
        assert!(build_codebook(0, 4, 2, &p, 0).is_err());
        assert!(build_codebook(1, 6, 2, &p, 0).is_err());
    }

    #[test]
    fn chunks_partition_codeword() {
        let cb = build_codebook(4, 6, 3, &uniform(6), 5).unwrap();
        let m = MessageIndex::from_value(6, 3).unwrap();
        let whole: Vec<usize> = (1..=4).flat_map(|n| encode_chunk(&cb, &m, n).unwrap()).collect();
        let expected: Vec<usize> = cb.codeword(6).iter().map(|&s| s as usize).collect();
        assert_eq!(whole, expected);
        assert_eq!(encode_chunk(&cb, &m, 1).unwrap(), expected[..6]);
        assert!(encode_chunk(&cb, &m, 0).is_err());
        assert!(encode_chunk(&cb, &m, 5).is_err());
    }

    #[test]
    fn score_examples() {
        assert!((empirical_mi_score(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(empirical_mi_score(&[0, 1, 1, 0], &[1, 1, 1, 1]).unwrap(), 0.0);
        assert_eq!(empirical_mi_score(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert!(empirical_mi_score(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn noiseless_decode_recovers_message() {
        // k=3, c=8, M=2: the true codeword scores H(P) = 1 bit; check no rival
        // reaches that score on this seed so the decode is unambiguous.
        let cb = build_codebook(2, 8, 3, &uniform(8), 2024).unwrap();
        for m in 0..8u64 {
            let y: Vec<usize> = cb.codeword(m as usize).iter().map(|&s| s as usize).collect();
            let scores: Vec<f64> = (0..8)
                .map(|j| {
                    let x: Vec<usize> = cb.codeword(j).iter().map(|&s| s as usize).collect();
                    empirical_mi_score(&x, &y).unwrap()
                })
                .collect();
            assert!(scores.iter().enumerate().all(|(j, s)| j == m as usize || *s < 1.0 - 1e-9));
            assert_eq!(mmi_decode(&cb, &y, 2).unwrap().value(), Some(m));
        }
    }

    #[test]
    fn single_codeword_book() {
        let cb = build_codebook(1, 4, 0, &uniform(4), 3).unwrap();
        assert_eq!(cb.len(), 1);
        assert_eq!(mmi_decode(&cb, &[1, 1, 0, 1], 1).unwrap(), MessageIndex::from_bits(vec![]));
    }

    #[test]
    fn decode_is_invariant_to_output_relabeling() {
        let cb = build_codebook(2, 8, 4, &uniform(8), 77).unwrap();
        let y: Vec<usize> = (0..16).map(|i| (i * 7 + 3) % 3).collect();
        let relabeled: Vec<usize> = y.iter().map(|&v| [2, 0, 1][v]).collect();
        assert_eq!(mmi_decode(&cb, &y, 2).unwrap(), mmi_decode(&cb, &relabeled, 2).unwrap());
        assert!(mmi_decode(&cb, &y[..10], 2).is_err());
    }

    #[test]
    fn dump_round_trips_bit_exactly() {
        let p = CompositionSpec::new(vec![2, 1, 3]).unwrap();
        let cb = build_codebook(3, 6, 3, &p, 0xfeed).unwrap();
        let mut bytes = Vec::new();
        cb.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], b"RLCB\x01\0\0\0");
        // header: 4 u32 fields, 3 counts, seed; then 8*18 symbols at 2 bits
        assert_eq!(bytes.len(), 8 + 16 + 12 + 8 + (8 * 18 * 2) / 8);
        let back = RatelessCodebook::read_from(&bytes[..]).unwrap();
        assert_eq!(back, cb);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, bytes);

        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(RatelessCodebook::read_from(&corrupt[..]).is_err());
    }

    mod props {
        use super::*;
        use crate::info::{entropy, Distribution};
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn score_bounded_by_marginal_entropies(
                pairs in prop::collection::vec((0usize..3, 0usize..4), 1..60)
            ) {
                let (x, y): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
                let s = empirical_mi_score(&x, &y).unwrap();
                let hx = entropy(&Distribution::from_counts(&type_of(&x, 3).unwrap().counts().to_vec()).unwrap());
                let hy = entropy(&Distribution::from_counts(&type_of(&y, 4).unwrap().counts().to_vec()).unwrap());
                prop_assert!(s >= 0.0);
                prop_assert!(s <= hx.min(hy) + 1e-9);
            }

            #[test]
            fn score_invariant_to_relabeling(
                pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40)
            ) {
                let (x, y): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
                let px: Vec<usize> = x.iter().map(|&v| [2, 0, 1][v]).collect();
                let py: Vec<usize> = y.iter().map(|&v| [1, 2, 0][v]).collect();
                let a = empirical_mi_score(&x, &y).unwrap();
                let b = empirical_mi_score(&px, &py).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
