//! Cross-campaign comparison statistics: factor improvement, Vargha-Delaney
//! Â12, and the two-sided Mann-Whitney U test.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Above this many rank assignments the normal approximation takes over.
pub const EXACT_LIMIT: u128 = 200_000;
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("mean must be positive")]
    ZeroMean,
}

fn check(xs: &[f64]) -> Result<(), StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Mean TTE of the baseline over that of the other configuration; above one
/// means the other configuration is faster.
pub fn factor(mu_baseline: f64, mu_other: f64) -> Result<f64, StatsError> {
    if !(mu_baseline > 0.0 && mu_other > 0.0) {
        return Err(StatsError::ZeroMean);
    }
    Ok(mu_baseline / mu_other)
}

/// Pooled midranks, doubled so they stay integral. Returns ranks in input
/// order (x first, then y) and the tie-group sizes.
fn doubled_midranks(x: &[f64], y: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j; doubled midrank = i+1 + j
        let r2 = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            ranks[k] = r2;
        }
        ties.push((j - i) as u64);
        i = j;
    }
    (ranks, ties)
}

/// Vargha-Delaney Â12: probability that a draw from `x` exceeds one from
/// `y`, ties counting one half. Computed from the rank sum of `x`.
pub fn a12(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x)?;
    check(y)?;
    let (ranks, _) = doubled_midranks(x, y);
    let m = x.len() as f64;
    let n = y.len() as f64;
    let rank_sum = ranks[..x.len()].iter().sum::<u64>() as f64 / 2.0;
    Ok((rank_sum / m - (m + 1.0) / 2.0) / n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Whether `p_value` came from full enumeration.
    pub exact: bool,
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(u128::from(n - i)) / u128::from(i + 1);
        if acc == u128::MAX {
            break;
        }
    }
    acc
}

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// When `C(m+n, m) <= EXACT_LIMIT` the p-value counts every assignment of the
/// pooled ranks to a sample of size `m` whose U deviates from `mn/2` at least
/// as much as observed. Otherwise it uses the tie-corrected normal
/// approximation with continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney, StatsError> {
    check(x)?;
    check(y)?;
    let (ranks, ties) = doubled_midranks(x, y);
    let m = x.len() as u64;
    let n = y.len() as u64;
    let big_n = m + n;
    let r2: u64 = ranks[..x.len()].iter().sum();
    // 2U = 2R - m(m+1)
    let u2 = r2 as i64 - (m * (m + 1)) as i64;
    let u = u2 as f64 / 2.0;
    let dev2 = (u2 - (m * n) as i64).unsigned_abs();

    if binomial(big_n, m) <= EXACT_LIMIT {
        let p = exact_tail(&ranks, m as usize, |rank_sum| {
            let u2 = rank_sum as i64 - (m * (m + 1)) as i64;
            (u2 - (m * n) as i64).unsigned_abs() >= dev2
        });
        return Ok(MannWhitney {
            u,
            p_value: p.min(1.0),
            exact: true,
        });
    }

    let (mf, nf, nn) = (m as f64, n as f64, big_n as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nn * (nn - 1.0));
    let var = mf * nf / 12.0 * ((nn + 1.0) - tie_term);
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((dev2 as f64 / 2.0) - 0.5).max(0.0) / libm::sqrt(var);
        libm::erfc(z / core::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_value,
        exact: false,
    })
}

/// Fraction of size-`m` subsets of `ranks` whose (doubled) rank sum satisfies
/// `extreme`, by dynamic programming over subset sizes and sums.
fn exact_tail(ranks: &[u64], m: usize, extreme: impl Fn(u64) -> bool) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k * width + s]: subsets of size k with doubled rank sum s
    let mut ways = vec![0u64; (m + 1) * width];
    ways[0] = 1;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=m).rev() {
            for s in (r..width).rev() {
                let add = ways[(k - 1) * width + s - r];
                if add != 0 {
                    ways[k * width + s] += add;
                }
            }
        }
    }
    let row = &ways[m * width..];
    let total: u64 = row.iter().sum();
    let hits: u64 = row
        .iter()
        .enumerate()
        .filter(|&(s, _)| extreme(s as u64))
        .map(|(_, &w)| w)
        .sum();
    hits as f64 / total as f64
}

/// TTE of one run and whether it found a PoC before the timeout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunTte {
    pub tte: f64,
    pub reproduced: bool,
}

/// One configuration compared against a baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsSummary {
    pub runs: usize,
    pub runs_reproduced: usize,
    /// Mean over all runs, timeouts imputed.
    pub mu_tte: f64,
    /// Mean over reproducing runs only.
    pub mu_tte_reproduced: Option<f64>,
    pub factor: f64,
    /// Â12 of baseline TTEs over these TTEs: above 0.5 means this
    /// configuration tends to be faster.
    pub a12: f64,
    pub p_value: f64,
    pub significant: bool,
}

pub fn summarize(baseline: &[RunTte], runs: &[RunTte]) -> Result<StatsSummary, StatsError> {
    let base: Vec<f64> = baseline.iter().map(|r| r.tte).collect();
    let this: Vec<f64> = runs.iter().map(|r| r.tte).collect();
    check(&base)?;
    check(&this)?;
    let reproduced: Vec<f64> = runs.iter().filter(|r| r.reproduced).map(|r| r.tte).collect();
    let mu_base = mean(&base).ok_or(StatsError::EmptySample)?;
    let mu_tte = mean(&this).ok_or(StatsError::EmptySample)?;
    let mw = mann_whitney_u(&this, &base)?;
    Ok(StatsSummary {
        runs: runs.len(),
        runs_reproduced: reproduced.len(),
        mu_tte,
        mu_tte_reproduced: mean(&reproduced),
        factor: factor(mu_base, mu_tte)?,
        a12: a12(&base, &this)?,
        p_value: mw.p_value,
        significant: mw.p_value <= SIGNIFICANCE,
    })
}
