use crate::error::{Error, Result};

/// Largest number of subsets an exact enumeration will visit.
pub const MAX_SUBSETS: u64 = 1_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub(crate) fn check_enumerable(n: usize, k: usize) -> Result<u64> {
    let count = binomial(n, k);
    if count > MAX_SUBSETS as u128 {
        return Err(Error::TooManySubsets {
            count,
            limit: MAX_SUBSETS,
        });
    }
    Ok(count as u64)
}
