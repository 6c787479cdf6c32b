//! Forward channel simulation for arbitrary state sequences.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::info::{parse_matrix, Channel, Distribution};
use crate::seed::RandomSource;

/// Indexed set of channels `{W(y|x,z) : z in Z}` sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFamily {
    name: String,
    matrices: Vec<Channel>,
}

impl ChannelFamily {
    pub fn new(name: impl Into<String>, matrices: Vec<Channel>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidChannel("family has no states".into()));
        };
        let (xs, ys) = (first.x_size(), first.y_size());
        for m in &matrices {
            if m.x_size() != xs || m.y_size() != ys {
                return Err(Error::DimensionMismatch {
                    expected: xs * ys,
                    actual: m.x_size() * m.y_size(),
                });
            }
        }
        Ok(Self { name: name.into(), matrices })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn x_size(&self) -> usize {
        self.matrices[0].x_size()
    }

    pub fn y_size(&self) -> usize {
        self.matrices[0].y_size()
    }

    pub fn z_size(&self) -> usize {
        self.matrices.len()
    }

    pub fn channel(&self, z: usize) -> &Channel {
        &self.matrices[z]
    }

    /// Reads the text family format: a header line `x_size y_size z_size`
    /// followed by `z_size` matrices of `x_size` rows each.
    pub fn from_text(name: impl Into<String>, text: &str) -> Result<Self> {
        let rows = parse_matrix(text, 0)?;
        let Some(header) = rows.first() else {
            return Err(Error::Parse { line: 1, msg: "missing header".into() });
        };
        let dims: Vec<usize> = header
            .iter()
            .map(|v| {
                if v.fract() == 0.0 && *v >= 1.0 {
                    Ok(*v as usize)
                } else {
                    Err(Error::Parse { line: 1, msg: format!("bad dimension {v}") })
                }
            })
            .collect::<Result<_>>()?;
        let [xs, ys, zs] = dims[..] else {
            return Err(Error::Parse { line: 1, msg: "header needs x_size y_size z_size".into() });
        };
        let body = &rows[1..];
        if body.len() != xs * zs {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected {} matrix rows, found {}", xs * zs, body.len()),
            });
        }
        let matrices = body
            .chunks(xs)
            .map(|m| {
                if m.iter().any(|r| r.len() != ys) {
                    return Err(Error::DimensionMismatch { expected: ys, actual: m[0].len() });
                }
                Channel::new(m.to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, matrices)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.x_size(), self.y_size(), self.z_size());
        for m in &self.matrices {
            out.push('\n');
            out.push_str(&m.to_text());
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("file");
        Self::from_text(name, &text)
    }
}

/// Binary modulo-additive family: `y = x xor z`.
pub fn family_mod_additive() -> ChannelFamily {
    let clean = Channel::identity(2).expect("identity");
    let flip = Channel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).expect("flip");
    ChannelFamily::new("mod-additive", vec![clean, flip]).expect("shapes agree")
}

/// Binary OR family: `y = x` when `z = 0`, `y = 1` when `z = 1`.
pub fn family_z_or() -> ChannelFamily {
    let clean = Channel::identity(2).expect("identity");
    let stuck = Channel::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).expect("stuck");
    ChannelFamily::new("z-or", vec![clean, stuck]).expect("shapes agree")
}

/// Individual state sequence `z_1, ..., z_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSequence {
    states: Vec<usize>,
}

impl StateSequence {
    pub fn new(states: Vec<usize>, z_size: usize) -> Result<Self> {
        if let Some(&s) = states.iter().find(|&&s| s >= z_size) {
            return Err(Error::SymbolOutOfRange { symbol: s, alphabet: z_size });
        }
        Ok(Self { states })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Occurrence count of every state symbol.
    pub fn type_counts(&self, z_size: usize) -> Result<Vec<usize>> {
        let mut counts = vec![0; z_size];
        for &s in &self.states {
            *counts
                .get_mut(s)
                .ok_or(Error::SymbolOutOfRange { symbol: s, alphabet: z_size })? += 1;
        }
        Ok(counts)
    }

    /// Parses one symbol per line, or run-length pairs `count symbol`.
    pub fn from_text(text: &str, z_size: usize) -> Result<Self> {
        let mut states = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<usize>().map_err(|e| Error::Parse { line: i + 1, msg: format!("{tok:?}: {e}") })
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let (count, symbol) = match toks[..] {
                [s] => (1, parse(s)?),
                [c, s] => (parse(c)?, parse(s)?),
                _ => return Err(Error::Parse { line: i + 1, msg: "expected `symbol` or `count symbol`".into() }),
            };
            if symbol >= z_size {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("state {symbol} outside alphabet of size {z_size}"),
                });
            }
            states.extend(std::iter::repeat(symbol).take(count));
        }
        Ok(Self { states })
    }

    /// Run-length encoded text, one `count symbol` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut iter = self.states.iter().peekable();
        while let Some(&s) = iter.next() {
            let mut count = 1;
            while iter.peek() == Some(&&s) {
                iter.next();
                count += 1;
            }
            out.push_str(&format!("{count} {s}\n"));
        }
        out
    }
}

/// How one piece of a piecewise state sequence is filled.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentLaw {
    Fixed(usize),
    Iid(Distribution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub fraction: f64,
    pub law: SegmentLaw,
}

/// State-sequence generators.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Iid(Distribution),
    Piecewise(Vec<Segment>),
    Periodic(Vec<usize>),
    ExactType(Distribution),
    File(PathBuf),
}

fn draw<R: Rng + ?Sized>(q: &Distribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in q.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the round-off gap above the cumulative sum
    q.probs().iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Largest-remainder apportionment of `n` items according to `q`.
pub fn apportion(q: &Distribution, n: usize) -> Vec<usize> {
    let exact: Vec<f64> = q.probs().iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps ties in symbol order.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

pub fn generate_state_sequence(
    spec: &StateSpec,
    z_size: usize,
    n: usize,
    rng: &mut RandomSource,
) -> Result<StateSequence> {
    let check_dist = |q: &Distribution| {
        if q.len() != z_size {
            Err(Error::DimensionMismatch { expected: z_size, actual: q.len() })
        } else {
            Ok(())
        }
    };
    let states = match spec {
        StateSpec::Iid(q) => {
            check_dist(q)?;
            (0..n).map(|_| draw(q, rng)).collect()
        }
        StateSpec::Piecewise(segments) => {
            if segments.is_empty() {
                return Err(Error::InvalidParameter("piecewise sequence has no segments".into()));
            }
            if segments.iter().any(|s| !(s.fraction > 0.0)) {
                return Err(Error::InvalidParameter("segment fractions must be positive".into()));
            }
            let total: f64 = segments.iter().map(|s| s.fraction).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("segment fractions sum to {total}, not 1")));
            }
            let mut states = Vec::with_capacity(n);
            let mut cum = 0.0;
            for (i, seg) in segments.iter().enumerate() {
                cum += seg.fraction;
                let end = if i + 1 == segments.len() {
                    n
                } else {
                    ((cum * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
                };
                let len = end.saturating_sub(states.len());
                match &seg.law {
                    SegmentLaw::Fixed(z) => {
                        if *z >= z_size {
                            return Err(Error::SymbolOutOfRange { symbol: *z, alphabet: z_size });
                        }
                        states.extend(std::iter::repeat(*z).take(len));
                    }
                    SegmentLaw::Iid(q) => {
                        check_dist(q)?;
                        states.extend((0..len).map(|_| draw(q, rng)));
                    }
                }
            }
            states
        }
        StateSpec::Periodic(pattern) => {
            if pattern.is_empty() {
                return Err(Error::Empty("periodic pattern"));
            }
            pattern.iter().cycle().take(n).copied().collect()
        }
        StateSpec::ExactType(q) => {
            check_dist(q)?;
            let counts = apportion(q, n);
            let mut states: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(z, &c)| std::iter::repeat(z).take(c))
                .collect();
            states.shuffle(rng);
            states
        }
        StateSpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let seq = StateSequence::from_text(&text, z_size)?;
            if seq.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: seq.len() });
            }
            return Ok(seq);
        }
    };
    StateSequence::new(states, z_size)
}

/// Streaming access to the forward channel for one blocklength.
pub struct ChannelSession<'a> {
    family: &'a ChannelFamily,
    states: &'a StateSequence,
    cursor: usize,
    rng: RandomSource,
    // cumulative rows indexed [z][x], None for point masses
    samplers: Vec<Vec<RowSampler>>,
}

enum RowSampler {
    Deterministic(usize),
    Cumulative(Vec<f64>),
}

impl<'a> ChannelSession<'a> {
    pub fn new(family: &'a ChannelFamily, states: &'a StateSequence, rng: RandomSource) -> Self {
        let samplers = (0..family.z_size())
            .map(|z| {
                let w = family.channel(z);
                (0..w.x_size())
                    .map(|x| {
                        let row = w.row(x).probs();
                        match row.iter().position(|&p| p == 1.0) {
                            Some(y) => RowSampler::Deterministic(y),
                            None => RowSampler::Cumulative(
                                row.iter()
                                    .scan(0.0, |acc, p| {
                                        *acc += p;
                                        Some(*acc)
                                    })
                                    .collect(),
                            ),
                        }
                    })
                    .collect()
            })
            .collect();
        Self { family, states, cursor: 0, rng, samplers }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.states.len() - self.cursor
    }

    pub fn family(&self) -> &ChannelFamily {
        self.family
    }

    /// Sends `x` through `W(.|x_i, z_{cursor+i})` and advances the cursor.
    pub fn transmit(&mut self, x: &[usize]) -> Result<Vec<usize>> {
        if x.len() > self.remaining() {
            return Err(Error::BlocklengthExhausted { requested: x.len(), remaining: self.remaining() });
        }
        let x_size = self.family.x_size();
        let zs = &self.states.states()[self.cursor..self.cursor + x.len()];
        let mut y = Vec::with_capacity(x.len());
        for (&xi, &zi) in x.iter().zip(zs) {
            if xi >= x_size {
                return Err(Error::SymbolOutOfRange { symbol: xi, alphabet: x_size });
            }
            let yi = match &self.samplers[zi][xi] {
                RowSampler::Deterministic(y) => *y,
                RowSampler::Cumulative(cum) => {
                    let u: f64 = self.rng.gen();
                    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
                }
            };
            y.push(yi);
        }
        self.cursor += x.len();
        Ok(y)
    }
}
