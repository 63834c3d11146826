//! Threshold sharing over GF(256) as an alternate combination scheme: any
//! `k` of `n` shares reconstruct, fewer reveal nothing.
//!
//! Field: GF(2^8) with reducing polynomial `x^8 + x^4 + x^3 + x + 1`
//! (0x11B). Share abscissas are `x = 1..=n`; polynomial coefficients are
//! drawn from the keystream so sharing is reproducible from the key.

use super::{CipherKey, CodecError, LENGTH_PREFIX};
use crate::rng::keystream;

/// One share: the evaluation point and one field element per byte position
/// of the padded message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShamirShare {
    pub x: u8,
    pub y: Vec<u8>,
}

fn gf_mul(mut a: u8, mut b: u8) -> u8 {
    let mut product = 0;
    for _ in 0..8 {
        if b & 1 == 1 {
            product ^= a;
        }
        let carry = a & 0x80;
        a <<= 1;
        if carry != 0 {
            a ^= 0x1B; // x^8 = x^4 + x^3 + x + 1 (mod 0x11B)
        }
        b >>= 1;
    }
    product
}

fn gf_pow(mut base: u8, mut exp: u32) -> u8 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = gf_mul(acc, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    acc
}

/// Multiplicative inverse via `a^254`. `a` must be non-zero.
fn gf_inv(a: u8) -> u8 {
    debug_assert_ne!(a, 0);
    gf_pow(a, 254)
}

/// Evaluate `secret ^ a_1 x ^ ... ^ a_{k-1} x^{k-1}` at `x` by Horner's rule.
fn eval_poly(secret: u8, coeffs: &[u8], x: u8) -> u8 {
    let mut acc = 0;
    for &coeff in coeffs.iter().rev() {
        acc = gf_mul(acc, x) ^ coeff;
    }
    gf_mul(acc, x) ^ secret
}

/// Split `msg` into `n` shares of which any `k` reconstruct it.
///
/// The message is length-prefixed exactly as in [`super::pad_and_split`]
/// (single-block layout, no fill). Byte position `j` gets its own degree
/// `k-1` polynomial whose coefficients come from `keystream(key, j, k-1)`.
pub fn shamir_share(
    msg: &[u8],
    k: u8,
    n: u8,
    key: CipherKey,
) -> Result<Vec<ShamirShare>, CodecError> {
    if k < 2 || k > n {
        return Err(CodecError::BadThreshold { k, n });
    }
    if msg.len() as u64 >= 1 << 32 {
        return Err(CodecError::MessageTooLarge(msg.len() as u64));
    }
    let mut padded = Vec::with_capacity(msg.len() + LENGTH_PREFIX);
    padded.extend_from_slice(&(msg.len() as u32).to_be_bytes());
    padded.extend_from_slice(msg);

    let mut shares: Vec<ShamirShare> = (1..=n)
        .map(|x| ShamirShare {
            x,
            y: Vec::with_capacity(padded.len()),
        })
        .collect();
    for (j, &secret) in padded.iter().enumerate() {
        let coeffs = keystream(key.0, j as u64, k as usize - 1);
        for share in &mut shares {
            share.y.push(eval_poly(secret, &coeffs, share.x));
        }
    }
    Ok(shares)
}

/// Reconstruct the message from at least `k` shares by Lagrange
/// interpolation at `x = 0`, one byte position at a time.
pub fn shamir_reconstruct(shares: &[ShamirShare], k: u8) -> Result<Vec<u8>, CodecError> {
    if shares.len() < k as usize {
        return Err(CodecError::NotEnoughShares {
            needed: k,
            got: shares.len(),
        });
    }
    let mut seen = [false; 256];
    for share in shares {
        if share.x == 0 {
            return Err(CodecError::ZeroShareX);
        }
        if seen[share.x as usize] {
            return Err(CodecError::DuplicateShareX(share.x));
        }
        seen[share.x as usize] = true;
    }
    let used = &shares[..k as usize];
    let len = used[0].y.len();
    if len < LENGTH_PREFIX || used.iter().any(|s| s.y.len() != len) {
        return Err(CodecError::BlockLengthMismatch);
    }

    // Lagrange basis at 0 depends only on the abscissas.
    let basis: Vec<u8> = used
        .iter()
        .map(|si| {
            let mut num = 1;
            let mut den = 1;
            for sj in used {
                if sj.x != si.x {
                    num = gf_mul(num, sj.x);
                    den = gf_mul(den, sj.x ^ si.x);
                }
            }
            gf_mul(num, gf_inv(den))
        })
        .collect();

    let mut padded = Vec::with_capacity(len);
    for j in 0..len {
        let mut secret = 0;
        for (share, &weight) in used.iter().zip(&basis) {
            secret ^= gf_mul(share.y[j], weight);
        }
        padded.push(secret);
    }

    let prefix = u32::from_be_bytes(padded[..LENGTH_PREFIX].try_into().unwrap());
    let capacity = (len - LENGTH_PREFIX) as u64;
    if prefix as u64 > capacity {
        return Err(CodecError::CorruptLengthPrefix { prefix, capacity });
    }
    Ok(padded[LENGTH_PREFIX..LENGTH_PREFIX + prefix as usize].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_basics() {
        assert_eq!(gf_mul(2, 0x8D), 1);
        assert_eq!(gf_inv(2), 0x8D);
        for a in 1..=255u8 {
            assert_eq!(gf_mul(a, gf_inv(a)), 1);
        }
    }

    // f(x) = 0x53 ^ x, the k=2 polynomial with coefficient a_1 = 1.
    #[test]
    fn linear_polynomial_shares() {
        let coeffs = [0x01];
        assert_eq!(eval_poly(0x53, &coeffs, 1), 0x52);
        assert_eq!(eval_poly(0x53, &coeffs, 2), 0x51);
        assert_eq!(eval_poly(0x53, &coeffs, 3), 0x50);
    }

    #[test]
    fn zero_coefficients_give_constant_shares() {
        for secret in [0x00, 0x53, 0xFF] {
            for x in 1..=5 {
                assert_eq!(eval_poly(secret, &[0, 0], x), secret);
            }
        }
    }

    // Hand-run Lagrange over the two points (1, 0x52) and (3, 0x50):
    // basis weights are 3/(3^1) and 1/(1^3), i.e. 3*inv(2) and inv(2).
    #[test]
    fn manual_two_point_interpolation() {
        let w1 = gf_mul(3, gf_inv(3 ^ 1));
        let w3 = gf_mul(1, gf_inv(1 ^ 3));
        assert_eq!(gf_mul(0x52, w1) ^ gf_mul(0x50, w3), 0x53);
    }

    #[test]
    fn any_k_of_n_subsets_reconstruct() {
        let msg = b"threshold sharing";
        for n in 2..=6u8 {
            for k in 2..=n {
                let shares = shamir_share(msg, k, n, CipherKey(0xA5A5)).unwrap();
                for subset in subsets_of_size(n as usize, k as usize) {
                    let picked: Vec<ShamirShare> =
                        subset.iter().map(|&i| shares[i].clone()).collect();
                    assert_eq!(shamir_reconstruct(&picked, k).unwrap(), msg.to_vec());
                }
            }
        }
    }

    #[test]
    fn too_few_shares_fail() {
        let shares = shamir_share(b"secret", 3, 5, CipherKey(7)).unwrap();
        assert_eq!(
            shamir_reconstruct(&shares[..2], 3),
            Err(CodecError::NotEnoughShares { needed: 3, got: 2 })
        );
    }

    #[test]
    fn duplicate_and_zero_abscissas_rejected() {
        let shares = shamir_share(b"secret", 2, 3, CipherKey(7)).unwrap();
        let dup = vec![shares[0].clone(), shares[0].clone()];
        assert_eq!(
            shamir_reconstruct(&dup, 2),
            Err(CodecError::DuplicateShareX(1))
        );
        let mut bad = shares.clone();
        bad[1].x = 0;
        assert_eq!(shamir_reconstruct(&bad, 2), Err(CodecError::ZeroShareX));
    }

    #[test]
    fn bad_thresholds_rejected() {
        assert_eq!(
            shamir_share(b"x", 1, 3, CipherKey(0)),
            Err(CodecError::BadThreshold { k: 1, n: 3 })
        );
        assert_eq!(
            shamir_share(b"x", 4, 3, CipherKey(0)),
            Err(CodecError::BadThreshold { k: 4, n: 3 })
        );
    }

    #[test]
    fn empty_message_round_trips() {
        let shares = shamir_share(b"", 2, 4, CipherKey(1)).unwrap();
        assert_eq!(shamir_reconstruct(&shares[1..3], 2).unwrap(), Vec::<u8>::new());
    }

    fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = Vec::new();
        fn recurse(
            start: usize,
            n: usize,
            k: usize,
            current: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            if current.len() == k {
                out.push(current.clone());
                return;
            }
            for i in start..n {
                current.push(i);
                recurse(i + 1, n, k, current, out);
                current.pop();
            }
        }
        recurse(0, n, k, &mut current, &mut out);
        out
    }
}
