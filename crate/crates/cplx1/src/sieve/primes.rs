//! Primality, least-prime-factor tables and factorization.

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{Error, Result};
use crate::linsys::matrix::{mul_mod, pow_mod};

/// Deterministic Miller–Rabin for all u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Smallest prime ≥ n.
pub fn next_prime(n: u64) -> u64 {
    let mut k = n.max(2);
    while !is_prime(k) {
        k += 1;
    }
    k
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return vec![];
    }
    let n = n as usize;
    let mut comp = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !comp[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                comp[j] = true;
                j += i;
            }
        }
    }
    out
}

/// W = ∏_{p ≤ ω} p.
pub fn primorial(omega: f64) -> BigInt {
    if omega < 2.0 {
        return BigInt::one();
    }
    primes_up_to(omega.floor() as u64)
        .into_iter()
        .fold(BigInt::one(), |a, p| a * BigInt::from(p))
}

/// Least-prime-factor table on [0, limit].
#[derive(Clone, Debug)]
pub struct LpfTable {
    lpf: Vec<u32>,
}

impl LpfTable {
    pub fn new(limit: u64) -> Self {
        let n = limit as usize;
        let mut lpf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=n {
            if lpf[i] == 0 {
                lpf[i] = i as u32;
                primes.push(i as u32);
            }
            let li = lpf[i];
            for &p in &primes {
                let k = i * p as usize;
                if p > li || k > n {
                    break;
                }
                lpf[k] = p;
            }
        }
        LpfTable { lpf }
    }

    pub fn limit(&self) -> u64 {
        self.lpf.len() as u64 - 1
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && self.lpf[n as usize] as u64 == n
    }

    /// Distinct prime factors with multiplicity; n ≤ limit.
    pub fn factor(&self, mut n: u64) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        while n > 1 {
            let p = self.lpf[n as usize] as u64;
            n /= p;
            match out.last_mut() {
                Some((q, e)) if *q == p => *e += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn pollard_rho(n: u64, budget: &mut u64) -> Result<u64> {
    if n % 2 == 0 {
        return Ok(2);
    }
    for c in 1u64.. {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            if *budget == 0 {
                return Err(Error::Budget(format!("factorization of {n}")));
            }
            *budget -= 1;
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return Ok(d);
        }
    }
    unreachable!()
}

/// Factor any u64: table lookup when possible, else trial division then Pollard rho.
pub fn factorize(n: u64, table: Option<&LpfTable>, mut budget: u64) -> Result<Vec<(u64, u32)>> {
    if let Some(t) = table {
        if n <= t.limit() {
            return Ok(t.factor(n));
        }
    }
    let mut primes = Vec::new();
    let mut m = n;
    let mut p = 2u64;
    while p * p <= m && p < 1000 {
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
        p += 1;
    }
    let mut stack = vec![m];
    while let Some(k) = stack.pop() {
        if k == 1 {
            continue;
        }
        if is_prime(k) {
            primes.push(k);
            continue;
        }
        let d = pollard_rho(k, &mut budget)?;
        stack.push(d);
        stack.push(k / d);
    }
    primes.sort_unstable();
    let mut out: Vec<(u64, u32)> = Vec::new();
    for q in primes {
        match out.last_mut() {
            Some((r, e)) if *r == q => *e += 1,
            _ => out.push((q, 1)),
        }
    }
    Ok(out)
}

/// Möbius function by trial division.
pub fn mobius(mut n: u64) -> i32 {
    let mut mu = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if n > 1 {
        mu = -mu;
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_matches_table() {
        let t = LpfTable::new(20000);
        for n in 0..20000 {
            assert_eq!(is_prime(n), t.is_prime(n), "{n}");
        }
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
        assert!(is_prime(18446744073709551557));
    }

    #[test]
    fn primorials() {
        assert_eq!(primorial(1.0), BigInt::from(1));
        assert_eq!(primorial(5.0), BigInt::from(30));
        assert_eq!(primorial(13.0), BigInt::from(30030));
        assert_eq!(primorial(5.5), BigInt::from(30));
    }

    #[test]
    fn factorization_routes_agree() {
        let t = LpfTable::new(100000);
        for n in [1u64, 2, 12, 97, 360, 99991, 65536] {
            assert_eq!(
                factorize(n, Some(&t), 1000).unwrap(),
                factorize(n, None, 100000).unwrap()
            );
        }
        let big = 1_000_003u64 * 999_983;
        assert_eq!(
            factorize(big, None, 1 << 20).unwrap(),
            vec![(999_983, 1), (1_000_003, 1)]
        );
    }

    #[test]
    fn mobius_values() {
        assert_eq!(mobius(1), 1);
        assert_eq!(mobius(6), 1);
        assert_eq!(mobius(30), -1);
        assert_eq!(mobius(12), 0);
    }
}
