//! Randomly placed training symbols and the chunk and round channel estimators.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::info::{Channel, Distribution};

/// Training positions of one chunk, partitioned by pilot symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPlan {
    b: usize,
    t: usize,
    /// `positions[x]` holds the ascending indices that carry pilot `x`.
    positions: Vec<Vec<usize>>,
    /// `slot[i]` is `Some(x)` when position `i` carries pilot `x`.
    slot: Vec<Option<usize>>,
}

impl TrainingPlan {
    pub fn from_positions(b: usize, positions: Vec<Vec<usize>>) -> Result<Self> {
        let mut slot = vec![None; b];
        let mut t = 0;
        let per = positions.first().map_or(0, Vec::len);
        for (x, set) in positions.iter().enumerate() {
            if set.len() != per {
                return Err(Error::InvalidParameter("training sets differ in size".into()));
            }
            for &i in set {
                match slot.get_mut(i) {
                    Some(s @ None) => *s = Some(x),
                    Some(Some(_)) => {
                        return Err(Error::InvalidParameter(format!("training position {i} used twice")))
                    }
                    None => return Err(Error::InvalidParameter(format!("training position {i} outside chunk"))),
                }
                t += 1;
            }
        }
        if t >= b && b > 0 {
            return Err(Error::InvalidParameter(format!("training count {t} must be below chunk length {b}")));
        }
        let mut positions = positions;
        positions.iter_mut().for_each(|s| s.sort_unstable());
        Ok(Self { b, t, positions, slot })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn x_size(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self, x: usize) -> &[usize] {
        &self.positions[x]
    }

    pub fn samples_per_input(&self) -> usize {
        self.t / self.x_size()
    }

    /// `b t |X|` followed by the sorted positions of each pilot set.
    pub fn serialize(&self) -> String {
        let sets: Vec<String> = self
            .positions
            .iter()
            .map(|s| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        format!("{} {} {} {}", self.b, self.t, self.x_size(), sets.join(";"))
    }
}

/// Draws `t` positions uniformly without replacement from `[0, b)` and splits
/// them at random into `x_size` equal pilot sets.
pub fn select_training_plan<R: Rng + ?Sized>(b: usize, t: usize, x_size: usize, rng: &mut R) -> Result<TrainingPlan> {
    if x_size == 0 || t % x_size != 0 {
        return Err(Error::InvalidParameter(format!("training count {t} not divisible by |X| = {x_size}")));
    }
    if t >= b {
        return Err(Error::InvalidParameter(format!("training count {t} must be below chunk length {b}")));
    }
    let mut chosen = index::sample(rng, b, t).into_vec();
    chosen.shuffle(rng);
    let per = t / x_size;
    let positions = chosen.chunks(per.max(1)).take(x_size).map(<[usize]>::to_vec).collect::<Vec<_>>();
    let positions = if per == 0 { vec![Vec::new(); x_size] } else { positions };
    TrainingPlan::from_positions(b, positions)
}

/// Places pilots at their positions and the code chunk, in order, elsewhere.
pub fn interleave_chunk(code_chunk: &[usize], plan: &TrainingPlan) -> Result<Vec<usize>> {
    if code_chunk.len() != plan.b - plan.t {
        return Err(Error::DimensionMismatch { expected: plan.b - plan.t, actual: code_chunk.len() });
    }
    let mut code = code_chunk.iter();
    Ok(plan
        .slot
        .iter()
        .map(|s| match s {
            Some(x) => *x,
            None => *code.next().expect("length checked"),
        })
        .collect())
}

/// Symbols at the non-training positions, in order.
pub fn deinterleave_chunk(chunk: &[usize], plan: &TrainingPlan) -> Result<Vec<usize>> {
    if chunk.len() != plan.b {
        return Err(Error::DimensionMismatch { expected: plan.b, actual: chunk.len() });
    }
    Ok(chunk.iter().zip(&plan.slot).filter(|(_, s)| s.is_none()).map(|(v, _)| *v).collect())
}

/// Channel estimate from training counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub matrix: Channel,
    pub samples_per_input: usize,
}

/// `W(y|x) = (|X|/t) |{j in T(x) : y_j = y}|`.
pub fn estimate_chunk_channel(received: &[usize], plan: &TrainingPlan, y_size: usize) -> Result<ChannelEstimate> {
    if received.len() != plan.b {
        return Err(Error::DimensionMismatch { expected: plan.b, actual: received.len() });
    }
    let per = plan.samples_per_input();
    if per == 0 {
        return Err(Error::InvalidParameter("no training samples to estimate from".into()));
    }
    let rows = plan
        .positions
        .iter()
        .map(|set| {
            let mut counts = vec![0usize; y_size];
            for &i in set {
                let y = received[i];
                *counts.get_mut(y).ok_or(Error::SymbolOutOfRange { symbol: y, alphabet: y_size })? += 1;
            }
            Distribution::from_counts(&counts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelEstimate { matrix: Channel::from_rows(rows)?, samples_per_input: per })
}

/// Entrywise mean of chunk estimates.
pub fn estimate_round_channel(chunk_estimates: &[ChannelEstimate]) -> Result<ChannelEstimate> {
    let Some(first) = chunk_estimates.first() else {
        return Err(Error::Empty("chunk estimates"));
    };
    let (xs, ys) = (first.matrix.x_size(), first.matrix.y_size());
    let mut sum = vec![vec![0.0; ys]; xs];
    for est in chunk_estimates {
        if est.matrix.x_size() != xs || est.matrix.y_size() != ys {
            return Err(Error::DimensionMismatch { expected: xs * ys, actual: est.matrix.x_size() * est.matrix.y_size() });
        }
        for (x, row) in sum.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                *v += est.matrix.prob(x, y);
            }
        }
    }
    let n = chunk_estimates.len() as f64;
    let rows = sum
        .into_iter()
        .map(|row| {
            let mut row: Vec<f64> = row.into_iter().map(|v| v / n).collect();
            // renormalize away accumulated round-off
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        })
        .collect();
    Ok(ChannelEstimate {
        matrix: Channel::new(rows)?,
        samples_per_input: first.samples_per_input * chunk_estimates.len(),
    })
}
