//! Least-squares isotonic regression by pool-adjacent-violators.

use crate::error::{Error, Result};

/// A pooled run of sorted inputs with one fitted value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub start: f64,
    pub end: f64,
    pub weight: f64,
    pub sum: f64,
}

impl Block {
    pub fn mean(&self) -> f64 {
        self.sum / self.weight
    }

    fn merge(&mut self, next: Block) {
        self.end = next.end;
        self.weight += next.weight;
        self.sum += next.sum;
    }
}

/// Sorts by `x` and pre-pools equal `x` into one weighted block each.
pub(crate) fn tie_groups(data: &[(f64, f64)]) -> Vec<Block> {
    let mut sorted: Vec<(f64, f64)> = data.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<Block> = Vec::new();
    for (x, y) in sorted {
        match groups.last_mut() {
            Some(g) if g.start == x => {
                g.weight += 1.0;
                g.sum += y;
            }
            _ => groups.push(Block {
                start: x,
                end: x,
                weight: 1.0,
                sum: y,
            }),
        }
    }
    groups
}

/// Non-decreasing least-squares fit of `y` on `x`.
///
/// Adjacent blocks are pooled only on a strict violation, so equal
/// neighbouring block values stay separate.
pub fn pava(data: &[(f64, f64)]) -> Result<Vec<Block>> {
    if data.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if let Some(&(x, y)) = data.iter().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite point ({x}, {y})")));
    }
    let mut stack: Vec<Block> = Vec::new();
    for group in tie_groups(data) {
        stack.push(group);
        while stack.len() >= 2 {
            let k = stack.len();
            let last = stack[k - 1];
            let prev = &mut stack[k - 2];
            // Cross-multiplied mean comparison; weights are positive.
            if prev.sum * last.weight > last.sum * prev.weight {
                prev.merge(last);
                stack.pop();
            } else {
                break;
            }
        }
    }
    Ok(stack)
}

/// Sum of squared residuals of the step fit `blocks` on `data`.
pub fn squared_error(blocks: &[Block], data: &[(f64, f64)]) -> f64 {
    data.iter()
        .map(|&(x, y)| {
            let d = y - step_value(blocks, x);
            d * d
        })
        .sum()
}

/// Value of the block whose interval holds `x`, clamped at both ends.
pub fn step_value(blocks: &[Block], x: f64) -> f64 {
    let idx = blocks.partition_point(|b| b.start <= x);
    blocks[idx.saturating_sub(1)].mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(blocks: &[Block]) -> Vec<f64> {
        blocks.iter().map(Block::mean).collect()
    }

    fn pts(y: &[f64]) -> Vec<(f64, f64)> {
        y.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect()
    }

    #[test]
    fn monotone_input_is_identity() {
        let b = pava(&pts(&[0.0, 1.0, 1.0])).unwrap();
        assert_eq!(values(&b), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn violating_pair_pools() {
        let b = pava(&pts(&[1.0, 0.0])).unwrap();
        assert_eq!(values(&b), vec![0.5]);
    }

    #[test]
    fn alternating_pools_middle() {
        let b = pava(&pts(&[0.0, 1.0, 0.0, 1.0])).unwrap();
        assert_eq!(values(&b), vec![0.0, 0.5, 1.0]);
        assert_eq!((b[1].start, b[1].end), (1.0, 2.0));
    }

    #[test]
    fn ties_share_a_block() {
        let b = pava(&[(1.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!(values(&b), vec![0.5, 1.0]);
        assert_eq!(b[0].weight, 2.0);
    }

    #[test]
    fn cascading_merge() {
        let b = pava(&pts(&[0.6, 0.8, 0.9, 0.0])).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].mean() - 0.575).abs() < 1e-15);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(pava(&[]).is_err());
    }

    #[test]
    fn step_value_clamps() {
        let b = pava(&pts(&[0.0, 1.0])).unwrap();
        assert_eq!(step_value(&b, -5.0), 0.0);
        assert_eq!(step_value(&b, 0.5), 0.0);
        assert_eq!(step_value(&b, 7.0), 1.0);
    }
}
