//! Slow, independent reference implementations used to check the fast
//! paths in tests. Compiled only for tests or with the `oracles` feature.

/// O(n²) pool-adjacent-violators: repeated left-to-right passes that merge
/// any adjacent pair whose means decrease, until a pass makes no merge.
/// Equal inputs are pooled first. Returns the fitted value of every input
/// point, in input order.
pub fn reference_pava(data: &[(f64, f64)]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].0.partial_cmp(&data[b].0).unwrap());

    // (sum, count, member indices)
    let mut blocks: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    for idx in order {
        let same_x = blocks.last().is_some_and(|b| data[b.2[0]].0 == data[idx].0);
        if same_x {
            let b = blocks.last_mut().unwrap();
            b.0 += data[idx].1;
            b.1 += 1.0;
            b.2.push(idx);
        } else {
            blocks.push((data[idx].1, 1.0, vec![idx]));
        }
    }

    loop {
        let mut merged = false;
        let mut i = 0;
        while i + 1 < blocks.len() {
            if blocks[i].0 / blocks[i].1 > blocks[i + 1].0 / blocks[i + 1].1 {
                let next = blocks.remove(i + 1);
                blocks[i].0 += next.0;
                blocks[i].1 += next.1;
                blocks[i].2.extend(next.2);
                merged = true;
            } else {
                i += 1;
            }
        }
        if !merged {
            break;
        }
    }

    let mut fitted = vec![0.0; data.len()];
    for (sum, count, members) in &blocks {
        for &m in members {
            fitted[m] = sum / count;
        }
    }
    fitted
}

pub fn sse(data: &[(f64, f64)], fitted: &[f64]) -> f64 {
    data.iter().zip(fitted).map(|(&(_, y), f)| (y - f).powi(2)).sum()
}

/// Reference for the auto-direction isotonic fit: both directions via
/// [`reference_pava`], decreasing kept only if better by more than `tie_tol`.
pub fn reference_isotonic_auto(data: &[(f64, u8)], tie_tol: f64) -> Vec<f64> {
    let up: Vec<(f64, f64)> = data.iter().map(|&(u, y)| (u, f64::from(y))).collect();
    let down: Vec<(f64, f64)> = data.iter().map(|&(u, y)| (-u, f64::from(y))).collect();
    let inc = reference_pava(&up);
    let dec = reference_pava(&down);
    if sse(&down, &dec) < sse(&up, &inc) - tie_tol {
        dec
    } else {
        inc
    }
}

/// Smallest squared error over every monotone (either direction) step fit
/// whose blocks are contiguous runs of the sorted distinct inputs and whose
/// values are the block means. Enumerates all 2^(k-1) contiguous partitions
/// of the k distinct inputs, so keep k small.
pub fn best_contiguous_monotone_sse(data: &[(f64, f64)]) -> f64 {
    let mut xs: Vec<f64> = data.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let k = xs.len();
    assert!(k <= 20, "exhaustive enumeration needs few distinct inputs");
    let group_of = |x: f64| xs.iter().position(|&v| v == x).unwrap();
    let mut g_sum = vec![0.0; k];
    let mut g_cnt = vec![0.0; k];
    for &(x, y) in data {
        let g = group_of(x);
        g_sum[g] += y;
        g_cnt[g] += 1.0;
    }

    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (k.saturating_sub(1))) {
        // Bit j set: a cut between group j and j + 1.
        let mut block_of = vec![0usize; k];
        let mut b = 0;
        for (j, slot) in block_of.iter_mut().enumerate() {
            *slot = b;
            if j + 1 < k && mask & (1 << j) != 0 {
                b += 1;
            }
        }
        let nb = b + 1;
        let mut s = vec![0.0; nb];
        let mut c = vec![0.0; nb];
        for j in 0..k {
            s[block_of[j]] += g_sum[j];
            c[block_of[j]] += g_cnt[j];
        }
        let means: Vec<f64> = s.iter().zip(&c).map(|(s, c)| s / c).collect();
        let up = means.windows(2).all(|w| w[0] <= w[1]);
        let down = means.windows(2).all(|w| w[0] >= w[1]);
        if !(up || down) {
            continue;
        }
        let err: f64 = data
            .iter()
            .map(|&(x, y)| (y - means[block_of[group_of(x)]]).powi(2))
            .sum();
        best = best.min(err);
    }
    best
}

/// Pairwise Mann-Whitney AUC: wins plus half-credit ties over all
/// positive/negative pairs.
pub fn brute_force_auc(points: &[(f64, u8)]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0u64;
    for &(sp, yp) in points {
        if yp != 1 {
            continue;
        }
        for &(sn, yn) in points {
            if yn != 0 {
                continue;
            }
            pairs += 1;
            if sp > sn {
                credit += 1.0;
            } else if sp == sn {
                credit += 0.5;
            }
        }
    }
    credit / pairs as f64
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<const N: usize>(f: impl Fn([f64; N]) -> f64, x: [f64; N], h: f64) -> [f64; N] {
    let mut g = [0.0; N];
    for k in 0..N {
        let mut up = x;
        let mut dn = x;
        up[k] += h;
        dn[k] -= h;
        g[k] = (f(up) - f(dn)) / (2.0 * h);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pava_examples() {
        let pts =
            |y: &[f64]| -> Vec<(f64, f64)> { y.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect() };
        assert_eq!(reference_pava(&pts(&[0.0, 1.0, 1.0])), vec![0.0, 1.0, 1.0]);
        assert_eq!(reference_pava(&pts(&[1.0, 0.0])), vec![0.5, 0.5]);
        assert_eq!(
            reference_pava(&pts(&[0.0, 1.0, 0.0, 1.0])),
            vec![0.0, 0.5, 0.5, 1.0]
        );
    }

    #[test]
    fn enumeration_finds_identity_on_monotone_data() {
        let d = [(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)];
        assert_eq!(best_contiguous_monotone_sse(&d), 0.0);
        let d = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0), (3.0, 1.0)];
        assert_eq!(best_contiguous_monotone_sse(&d), 0.5);
    }

    #[test]
    fn brute_force_auc_example() {
        assert_eq!(brute_force_auc(&[(1.0, 0), (2.0, 1), (3.0, 0), (4.0, 1)]), 0.75);
    }
}
