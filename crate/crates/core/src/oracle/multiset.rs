//! Enumeration of dataset multisets (count vectors summing to `n`).

/// `C(n + m − 1, m − 1)`, saturating at `u128::MAX`.
pub fn multiset_count(n: usize, m: usize) -> u128 {
    if m == 0 {
        return if n == 0 { 1 } else { 0 };
    }
    let r = (m - 1).min(n) as u128;
    let top = (n + m - 1) as u128;
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (top - i) / (i + 1) is exact at every step.
        acc = match acc.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Visits every count vector of length `m` summing to `n`, in descending
/// lexicographic order starting at `[n, 0, ..., 0]`.
pub fn for_each_composition(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m == 0 {
        return;
    }
    let mut c = vec![0; m];
    c[0] = n;
    loop {
        f(&c);
        if !next_composition(&mut c) {
            break;
        }
    }
}

fn next_composition(c: &mut [usize]) -> bool {
    let m = c.len();
    if m < 2 {
        return false;
    }
    let tail = c[m - 1];
    c[m - 1] = 0;
    match (0..m - 1).rev().find(|&j| c[j] > 0) {
        Some(j) => {
            c[j] -= 1;
            c[j + 1] = tail + 1;
            true
        }
        None => {
            c[m - 1] = tail;
            false
        }
    }
}

/// `ln(n! / Π c_x!)`.
pub fn ln_multinomial(counts: &[usize], ln_fact: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    ln_fact[n] - counts.iter().map(|&c| ln_fact[c]).sum::<f64>()
}

pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(0.0);
    for i in 1..=n {
        v.push(v[i - 1] + (i as f64).ln());
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomial() {
        assert_eq!(multiset_count(2, 2), 3);
        assert_eq!(multiset_count(5, 5), 126);
        assert_eq!(multiset_count(0, 4), 1);
        assert_eq!(multiset_count(7, 1), 1);
        assert_eq!(multiset_count(1_000_000, 1_000), u128::MAX);
        assert!(multiset_count(60, 20) > 1_000_000);
    }

    #[test]
    fn enumeration_is_complete_and_distinct() {
        for m in 1..=5 {
            for n in 0..=5 {
                let mut seen = std::collections::HashSet::new();
                for_each_composition(n, m, |c| {
                    assert_eq!(c.iter().sum::<usize>(), n);
                    assert!(seen.insert(c.to_vec()));
                });
                assert_eq!(seen.len() as u128, multiset_count(n, m), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn multinomial_weights_sum_to_m_pow_n() {
        let lf = ln_factorials(6);
        for m in 1..=4usize {
            let mut total = 0.0;
            for_each_composition(6, m, |c| total += ln_multinomial(c, &lf).exp());
            assert!((total - (m as f64).powi(6)).abs() < 1e-6);
        }
    }
}
