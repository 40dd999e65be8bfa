//! Primality testing and safe-prime search.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

/// Rounds used wherever a modulus is accepted as prime.
pub const MILLER_RABIN_ROUNDS: usize = 40;

const SIEVE_LIMIT: u32 = 1 << 14;
/// Candidates tried from one random starting point before drawing a new one.
const SIEVE_WINDOW: u64 = 1 << 16;

fn small_primes() -> &'static [u32] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut composite = vec![false; SIEVE_LIMIT as usize];
        let mut out = Vec::new();
        for i in 2..SIEVE_LIMIT as usize {
            if !composite[i] {
                out.push(i as u32);
                let mut j = i * i;
                while j < SIEVE_LIMIT as usize {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        out
    })
}

/// Miller-Rabin with `rounds` random bases.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    if let Some(small) = n.to_u32() {
        if small < SIEVE_LIMIT {
            return small_primes().binary_search(&small).is_ok();
        }
    }
    for &p in small_primes().iter().take(64) {
        if (n % p).is_zero() {
            return false;
        }
    }

    let n_minus_one = n - 1u32;
    let shift = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> shift;

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..shift {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
            if x.is_one() {
                return false;
            }
        }
        return false;
    }
    true
}

fn fermat_base_two(n: &BigUint) -> bool {
    BigUint::from(2u32).modpow(&(n - 1u32), n).is_one()
}

/// Draws a safe prime `p = 2q + 1` of exactly `bits` bits.
///
/// Candidates for `q` are walked upward from a random odd start; both `q` and
/// `2q + 1` are sieved against small primes via running residues before any
/// exponentiation happens.
pub fn random_safe_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> (BigUint, BigUint) {
    assert!(bits >= 16, "safe prime search needs at least 16 bits");
    let q_bits = bits - 1;
    let primes = small_primes();
    loop {
        let mut q = rng.gen_biguint(q_bits);
        q.set_bit(q_bits - 1, true);
        q.set_bit(0, true);
        let residues: Vec<u64> = primes.iter().map(|&sp| (&q % sp).to_u64().unwrap()).collect();

        let mut step = 0u64;
        while step < SIEVE_WINDOW {
            let offset = 2 * step;
            step += 1;
            let sieved = primes.iter().zip(&residues).all(|(&sp, &r)| {
                let sp = sp as u64;
                let rq = (r + offset) % sp;
                rq != 0 && !(2 * rq + 1).is_multiple_of(sp)
            });
            if !sieved {
                continue;
            }
            let cand_q = &q + offset;
            if cand_q.bits() != q_bits {
                break;
            }
            if !fermat_base_two(&cand_q) {
                continue;
            }
            let cand_p = (&cand_q << 1) + 1u32;
            if !fermat_base_two(&cand_p) {
                continue;
            }
            if is_probable_prime(&cand_q, MILLER_RABIN_ROUNDS, rng)
                && is_probable_prime(&cand_p, MILLER_RABIN_ROUNDS, rng)
            {
                return (cand_p, cand_q);
            }
        }
    }
}

/// `true` when `alpha` generates the full group modulo the safe prime `p = 2q + 1`.
pub fn has_full_order(alpha: &BigUint, p: &BigUint, q: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    let alpha = alpha % p;
    if alpha.is_zero() {
        return false;
    }
    !alpha.modpow(&two, p).is_one() && !alpha.modpow(q, p).is_one()
}

/// Smallest residue of order p-1 modulo a safe prime.
pub fn smallest_generator(p: &BigUint, q: &BigUint) -> BigUint {
    let mut alpha = BigUint::from(2u32);
    while !has_full_order(&alpha, p, q) {
        alpha += 1u32;
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in 0..20_000u64 {
            assert_eq!(is_probable_prime(&BigUint::from(n), 8, &mut rng), trial_division(n), "{n}");
        }
        for n in (1u64 << 20)..(1u64 << 20) + 5_000 {
            assert_eq!(is_probable_prime(&BigUint::from(n), 8, &mut rng), trial_division(n), "{n}");
        }
    }

    #[test]
    fn rejects_carmichael_numbers() {
        let mut rng = StdRng::seed_from_u64(1);
        for n in [561u64, 41041, 825265, 321197185, 5394826801, 232250619601, 9746347772161] {
            assert!(!is_probable_prime(&BigUint::from(n), 40, &mut rng), "{n}");
        }
    }

    #[test]
    fn safe_prime_has_requested_width() {
        let mut rng = StdRng::seed_from_u64(42);
        for bits in [16u64, 17, 24, 64, 128] {
            let (p, q) = random_safe_prime(bits, &mut rng);
            assert_eq!(p.bits(), bits);
            assert_eq!(p, (&q << 1) + 1u32);
            if bits <= 24 {
                assert!(trial_division(p.to_u64().unwrap()));
                assert!(trial_division(q.to_u64().unwrap()));
            }
        }
    }

    #[test]
    fn generator_orders() {
        let p = BigUint::from(23u32);
        let q = BigUint::from(11u32);
        assert!(has_full_order(&BigUint::from(5u32), &p, &q));
        // 2 is a quadratic residue mod 23 (5^2 = 2), so its order is 11.
        assert!(!has_full_order(&BigUint::from(2u32), &p, &q));
        assert!(!has_full_order(&BigUint::from(22u32), &p, &q));
        assert_eq!(smallest_generator(&p, &q), BigUint::from(5u32));
    }
}
