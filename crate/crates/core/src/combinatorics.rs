//! Log-space combinatorics: factorials, binomial coefficients and the number
//! of divisions of `n` elements into at most `k` subsets.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Below this argument `ln n!` is accumulated exactly; above it the Stirling
/// series is used, which is accurate to the last bit there.
const STIRLING_CUTOFF: u64 = 64;

/// Below this smaller operand `ln C(a, b)` is summed term by term, which avoids
/// cancellation between large factorials.
const DIRECT_BINOMIAL_CUTOFF: u64 = 64;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn stirling_ln_factorial(n: u64) -> f64 {
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    x * x.ln() - x + 0.5 * x.ln() + HALF_LN_2PI + series
}

fn small_ln_factorials() -> &'static [f64; STIRLING_CUTOFF as usize] {
    static TABLE: OnceLock<[f64; STIRLING_CUTOFF as usize]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; STIRLING_CUTOFF as usize];
        for i in 2..STIRLING_CUTOFF as usize {
            table[i] = table[i - 1] + (i as f64).ln();
        }
        table
    })
}

/// `ln n!` without a cache.
pub fn ln_factorial(n: u64) -> f64 {
    if n < STIRLING_CUTOFF {
        small_ln_factorials()[n as usize]
    } else {
        stirling_ln_factorial(n)
    }
}

fn ln_binomial_with(a: u64, b: u64, lf: impl Fn(u64) -> f64) -> f64 {
    let small = b.min(a - b);
    if small == 0 {
        return 0.0;
    }
    if small <= DIRECT_BINOMIAL_CUTOFF {
        let base = (a - small) as f64;
        (1..=small).map(|i| ((base + i as f64) / i as f64).ln()).sum()
    } else {
        lf(a) - lf(b) - lf(a - b)
    }
}

/// Natural log of the binomial coefficient `C(a, b)`.
pub fn log_binomial(a: u64, b: u64) -> Result<f64> {
    if b > a {
        return Err(Error::InvalidArgument(format!(
            "binomial C({a}, {b}) requires b <= a"
        )));
    }
    Ok(ln_binomial_with(a, b, ln_factorial))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln B(n, j)` for `j = 0..=k_max` where `B(n, j) = Σ_{i=1..j} S(n, i)`.
///
/// Runs the second-kind Stirling recurrence `S(r, i) = i S(r-1, i) + S(r-1, i-1)`
/// row by row in log space, keeping only columns up to `k_max`.
fn log_bell_row(n: usize, k_max: usize) -> Vec<f64> {
    let mut row = vec![f64::NEG_INFINITY; k_max + 1];
    row[0] = 0.0;
    for r in 1..=n {
        let top = r.min(k_max);
        for i in (1..=top).rev() {
            let stay = (i as f64).ln() + row[i];
            row[i] = log_add_exp(stay, row[i - 1]);
        }
        row[0] = f64::NEG_INFINITY;
    }
    let mut cumulative = vec![f64::NEG_INFINITY; k_max + 1];
    let mut acc = f64::NEG_INFINITY;
    for i in 1..=k_max {
        acc = log_add_exp(acc, row[i]);
        cumulative[i] = acc;
    }
    cumulative
}

/// Natural log of `B(n, k)`, the number of divisions of `n` elements into `k`
/// possibly empty subsets. `O(n k)`.
pub fn log_bell_divisions(n: usize, k: usize) -> Result<f64> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "B(n, k) requires 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    Ok(log_bell_row(n, k)[k])
}

/// Cached log-factorials and `ln B(n, k)` for one dataset size.
#[derive(Debug, Clone)]
pub struct CombinatoricsTables {
    n: usize,
    log_factorial: Vec<f64>,
    log_bell: Vec<f64>,
}

impl CombinatoricsTables {
    /// Tables for `n` curves and `m` points. Log-factorials are cached up to
    /// `m`; larger arguments fall back to the uncached path.
    pub fn new(n: usize, m: usize) -> Self {
        let small = small_ln_factorials();
        let log_factorial = (0..=m as u64)
            .map(|i| {
                if i < STIRLING_CUTOFF {
                    small[i as usize]
                } else {
                    stirling_ln_factorial(i)
                }
            })
            .collect();
        let log_bell = if n == 0 { vec![f64::NEG_INFINITY] } else { log_bell_row(n, n) };
        Self { n, log_factorial, log_bell }
    }

    pub fn curves(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn log_factorial(&self, i: u64) -> f64 {
        match self.log_factorial.get(i as usize) {
            Some(&v) => v,
            None => ln_factorial(i),
        }
    }

    #[inline]
    pub fn log_binomial(&self, a: u64, b: u64) -> f64 {
        debug_assert!(b <= a);
        ln_binomial_with(a, b, |i| self.log_factorial(i))
    }

    /// `ln B(n, k)` for the table's `n`; `k` in `1..=n`.
    #[inline]
    pub fn log_bell(&self, k: usize) -> f64 {
        debug_assert!(k >= 1 && k <= self.n);
        self.log_bell[k]
    }

    /// `ln C(a+b, a)`: the log-factorial excess of pooling two cell counts.
    #[inline]
    pub fn pooling_gain(&self, a: u64, b: u64) -> f64 {
        if a == 0 || b == 0 {
            return 0.0;
        }
        self.log_factorial(a + b) - self.log_factorial(a) - self.log_factorial(b)
    }
}
