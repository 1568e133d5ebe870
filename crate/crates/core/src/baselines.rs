//! Non-learning placements: uniform random, greedy, and exhaustive search
//! for tiny instances.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rl::random_distinct;
use crate::selection::Selection;
use crate::system::{MaSlot, PaSlot};

pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<P> {
    pub best: P,
    pub value: f64,
    pub evaluated: u64,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Advance `c` to the next `k`-combination of `0..n` in lexicographic order.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Every `k`-combination of `0..n`, lexicographic.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut c: Vec<usize> = (0..k).collect();
    let mut out = vec![c.clone()];
    while next_combination(&mut c, n) {
        out.push(c.clone());
    }
    out
}

pub fn random_ma<R: Rng + ?Sized>(candidates: usize, antennas: usize, rng: &mut R) -> Result<Selection> {
    random_distinct(candidates, antennas, rng)
}

/// Distinct positions within each waveguide, drawn independently.
pub fn random_pa<R: Rng + ?Sized>(waveguides: usize, candidates: usize, per: usize, rng: &mut R) -> Result<Vec<Selection>> {
    (0..waveguides).map(|_| random_distinct(candidates, per, rng)).collect()
}

/// Adds antennas one at a time, each at the position that maximizes the
/// effective rank of the partial array. Ties go to the lowest index.
pub fn greedy_ma(slot: &MaSlot, antennas: usize) -> Result<Selection> {
    let n = slot.table.candidates();
    if antennas > n {
        return Err(Error::SelectionTooLarge { k: antennas, available: n });
    }
    let mut chosen = Vec::with_capacity(antennas);
    for _ in 0..antennas {
        let mut best: Option<(f64, usize)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let mut trial = chosen.clone();
            trial.push(i);
            let v = slot.effective_rank(&Selection::new(trial))?;
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, i));
            }
        }
        chosen.push(best.expect("a free position remains").1);
    }
    Ok(Selection::new(chosen))
}

/// Greedy over `(waveguide, position)` pairs until every waveguide carries
/// `per` antennas. Waveguides without antennas contribute zero rows.
pub fn greedy_pa(slot: &PaSlot, per: usize) -> Result<Vec<Selection>> {
    let n = slot.table.candidates();
    let k_wav = slot.table.waveguides();
    if per > n {
        return Err(Error::SelectionTooLarge { k: per, available: n });
    }
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); k_wav];
    for _ in 0..k_wav * per {
        let mut best: Option<(f64, usize, usize)> = None;
        for k in (0..k_wav).filter(|&k| chosen[k].len() < per) {
            for i in (0..n).filter(|i| !chosen[k].contains(i)) {
                let trial: Vec<Selection> = chosen
                    .iter()
                    .enumerate()
                    .map(|(kk, c)| {
                        let mut c = c.clone();
                        if kk == k {
                            c.push(i);
                        }
                        Selection::new(c)
                    })
                    .collect();
                let v = slot.effective_rank(&trial)?;
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, k, i));
                }
            }
        }
        let (_, k, i) = best.expect("a free slot remains");
        chosen[k].push(i);
    }
    Ok(chosen.into_iter().map(Selection::new).collect())
}

fn better(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Best unordered placement of `antennas` MAs. Ties resolve to the
/// lexicographically smallest combination.
pub fn exhaustive_ma(slot: &MaSlot, antennas: usize, budget: u128) -> Result<OracleResult<Selection>> {
    let n = slot.table.candidates();
    let count = binomial(n, antennas);
    if count > budget {
        return Err(Error::BudgetExceeded { count, cap: budget });
    }
    let combos = combinations(n, antennas);
    let scored = combos
        .par_iter()
        .map(|c| Ok((slot.effective_rank(&Selection::new(c.clone()))?, c.clone())))
        .collect::<Result<Vec<_>>>()?;
    let evaluated = scored.len() as u64;
    let (value, best) = scored.into_iter().reduce(better).ok_or(Error::SelectionTooLarge { k: antennas, available: n })?;
    Ok(OracleResult { best: Selection::new(best), value, evaluated })
}

/// Best per-waveguide placement, enumerating the product of the waveguides'
/// combination sets.
pub fn exhaustive_pa(slot: &PaSlot, per: usize, budget: u128) -> Result<OracleResult<Vec<Selection>>> {
    let n = slot.table.candidates();
    let k_wav = slot.table.waveguides();
    let per_guide = binomial(n, per);
    let count = (0..k_wav).try_fold(1u128, |acc, _| acc.checked_mul(per_guide)).unwrap_or(u128::MAX);
    if count > budget {
        return Err(Error::BudgetExceeded { count, cap: budget });
    }
    if per_guide == 0 {
        return Err(Error::SelectionTooLarge { k: per, available: n });
    }
    let combos = combinations(n, per);
    let radix = combos.len();
    let scored = (0..count as u64)
        .into_par_iter()
        .map(|code| {
            let mut rest = code as usize;
            let mut digits = vec![0usize; k_wav];
            for d in digits.iter_mut().rev() {
                *d = rest % radix;
                rest /= radix;
            }
            let sel: Vec<Selection> = digits.iter().map(|&d| Selection::new(combos[d].clone())).collect();
            let flat: Vec<usize> = digits.iter().flat_map(|&d| combos[d].iter().copied()).collect();
            Ok((slot.effective_rank(&sel)?, flat))
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluated = scored.len() as u64;
    let (value, flat) = scored.into_iter().reduce(better).expect("at least one placement");
    let best = flat.chunks(per).map(|c| Selection::new(c.to_vec())).collect();
    Ok(OracleResult { best, value, evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 2), 15);
        assert_eq!(binomial(100, 16), 1_345_860_629_046_814_650);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn combination_enumeration() {
        let all = combinations(5, 3);
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[9], vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
    }
}
