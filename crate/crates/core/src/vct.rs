//! Verifiable coin toss: a VRF built from the deterministic signature scheme,
//! and the threshold test that turns its output into a pass/fail election.
//!
//! A toss is keyed by the node's secret key and the canonical bytes of the
//! previous block header, so each node gets exactly one outcome per parent.
//! The VRF value is read as a big-endian 256-bit integer and passes when it
//! is at least the threshold `ceil((1 - pp) * 2^256)`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::crypto::{self, Digest256, PublicKey, SecretKey, Signature};
use crate::error::{Error, Result};

/// Largest denominator accepted when parsing a decimal pass probability.
pub const MAX_DECIMAL_DENOMINATOR: u64 = 1_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VrfOutput {
    pub proof: Signature,
    pub value: Digest256,
}

/// Exact rational probability in `[0, 1]`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PassProbability {
    numerator: u64,
    denominator: u64,
}

impl PassProbability {
    pub const ZERO: PassProbability = PassProbability {
        numerator: 0,
        denominator: 1,
    };
    pub const ONE: PassProbability = PassProbability {
        numerator: 1,
        denominator: 1,
    };

    pub fn new(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::InvalidPassProbability("denominator must be positive".into()));
        }
        if numerator > denominator {
            return Err(Error::InvalidPassProbability(format!(
                "{numerator}/{denominator} exceeds 1"
            )));
        }
        let g = numerator.gcd(&denominator);
        Ok(PassProbability {
            numerator: numerator / g,
            denominator: denominator / g,
        })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Parses `"0.1"`, `"1"`, `"0"` or `"1/8"`. Decimal inputs may carry at
    /// most nine fractional digits.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::InvalidPassProbability(format!("{s:?}: {why}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad("bad numerator"))?;
            let d: u64 = d.trim().parse().map_err(|_| bad("bad denominator"))?;
            return PassProbability::new(n, d);
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad("empty"));
        }
        if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad("not a non-negative decimal"));
        }
        if frac_part.len() > 9 {
            return Err(bad("more than 9 fractional digits"));
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad("integer part out of range"))?
        };
        let denominator = 10u64.pow(frac_part.len() as u32);
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad("bad fraction"))?
        };
        let numerator = int_val
            .checked_mul(denominator)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(|| bad("out of range"))?;
        debug_assert!(denominator <= MAX_DECIMAL_DENOMINATOR);
        PassProbability::new(numerator, denominator)
    }
}

impl fmt::Display for PassProbability {
    /// Exact decimal when the reduced denominator divides 10^9, `n/d` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if MAX_DECIMAL_DENOMINATOR.is_multiple_of(self.denominator) {
            let scaled = self.numerator * (MAX_DECIMAL_DENOMINATOR / self.denominator);
            let int = scaled / MAX_DECIMAL_DENOMINATOR;
            let frac = scaled % MAX_DECIMAL_DENOMINATOR;
            if frac == 0 {
                write!(f, "{int}")
            } else {
                let digits = format!("{frac:09}");
                write!(f, "{int}.{}", digits.trim_end_matches('0'))
            }
        } else {
            write!(f, "{}/{}", self.numerator, self.denominator)
        }
    }
}

impl FromStr for PassProbability {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PassProbability::parse(s)
    }
}

impl Serialize for PassProbability {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PassProbability {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PassProbability::parse(&s).map_err(de::Error::custom)
    }
}

/// Election threshold in `0 ..= 2^256`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Threshold {
    /// `t < 2^256`, stored big-endian.
    Finite([u8; 32]),
    /// `t == 2^256`: no 256-bit value passes.
    Never,
}

impl Threshold {
    /// Byte-wise comparison of big-endian arrays is numeric comparison.
    pub fn passes(&self, value: &Digest256) -> bool {
        match self {
            Threshold::Finite(t) => value.0 >= *t,
            Threshold::Never => false,
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        match self {
            Threshold::Finite(t) => BigUint::from_bytes_be(t),
            Threshold::Never => BigUint::from(1u8) << 256,
        }
    }
}

/// `ceil((1 - pp) * 2^256)` in exact integer arithmetic.
pub fn threshold_for(pp: PassProbability) -> Threshold {
    let fail = BigUint::from(pp.denominator - pp.numerator);
    let den = BigUint::from(pp.denominator);
    let scaled = fail << 256usize;
    let (q, r) = scaled.div_rem(&den);
    let t = if r == BigUint::from(0u8) { q } else { q + 1u8 };
    let bytes = t.to_bytes_be();
    if bytes.len() > 32 {
        return Threshold::Never;
    }
    let mut out = [0u8; 32];
    out[32 - bytes.len()..].copy_from_slice(&bytes);
    // BigUint encodes zero as a single zero byte, which the copy handles.
    Threshold::Finite(out)
}

pub fn vrf_eval(secret_key: &SecretKey, message: &[u8]) -> VrfOutput {
    let proof = crypto::sign(secret_key, message);
    let value = crypto::hash(proof.as_bytes());
    VrfOutput { proof, value }
}

pub fn vrf_verify(public_key: &PublicKey, message: &[u8], out: &VrfOutput) -> bool {
    crypto::hash(out.proof.as_bytes()) == out.value && crypto::verify(public_key, message, &out.proof)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Toss {
    pub pass: bool,
    pub out: VrfOutput,
}

/// One coin toss for the block following `prev_header_bytes`.
pub fn vct_toss(secret_key: &SecretKey, prev_header_bytes: &[u8], pp: PassProbability) -> Toss {
    toss_with_threshold(secret_key, prev_header_bytes, &threshold_for(pp))
}

/// Like [`vct_toss`] with a precomputed threshold.
pub fn toss_with_threshold(secret_key: &SecretKey, prev_header_bytes: &[u8], threshold: &Threshold) -> Toss {
    let out = vrf_eval(secret_key, prev_header_bytes);
    Toss {
        pass: threshold.passes(&out.value),
        out,
    }
}

pub fn vct_verify(public_key: &PublicKey, prev_header_bytes: &[u8], out: &VrfOutput, pp: PassProbability) -> bool {
    threshold_for(pp).passes(&out.value) && vrf_verify(public_key, prev_header_bytes, out)
}

/// Stake-weighted pass probability `min(1, pp_base * node_count * stake / total_stake)`.
///
/// With equal stakes (`stake == total_stake / node_count`) this is `pp_base`.
pub fn weighted_pass_probability(
    pp_base: PassProbability,
    stake: u64,
    total_stake: u64,
    node_count: u64,
) -> Result<PassProbability> {
    if total_stake == 0 {
        return Err(Error::ZeroTotalStake);
    }
    if stake > total_stake {
        return Err(Error::StakeExceedsTotal {
            stake,
            total: total_stake,
        });
    }
    if node_count == 0 {
        return Err(Error::InvalidPassProbability("node_count must be positive".into()));
    }
    let num = BigUint::from(pp_base.numerator) * node_count * stake;
    let den = BigUint::from(pp_base.denominator) * total_stake;
    if num >= den {
        return Ok(PassProbability::ONE);
    }
    let g = num.gcd(&den);
    let (num, den) = (num / &g, den / &g);
    let to_u64 = |v: BigUint| -> Result<u64> {
        u64::try_from(v).map_err(|_| Error::Overflow("weighted pass probability denominator".into()))
    };
    PassProbability::new(to_u64(num)?, to_u64(den)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::keygen;
    use proptest::prelude::*;

    fn pp(s: &str) -> PassProbability {
        PassProbability::parse(s).unwrap()
    }

    fn key(i: u32) -> crate::crypto::KeyPair {
        let mut seed = [0u8; 32];
        seed[..4].copy_from_slice(&i.to_be_bytes());
        keygen(&seed).unwrap()
    }

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(pp("0.1"), PassProbability::new(1, 10).unwrap());
        assert_eq!(pp("1"), PassProbability::ONE);
        assert_eq!(pp("1.000"), PassProbability::ONE);
        assert_eq!(pp("0"), PassProbability::ZERO);
        assert_eq!(pp(".25"), PassProbability::new(1, 4).unwrap());
        assert_eq!(pp("3/12"), PassProbability::new(1, 4).unwrap());
        assert_eq!(pp("0.000000001").denominator(), 1_000_000_000);
        assert!(PassProbability::parse("0.0000000001").is_err());
        assert!(PassProbability::parse("1.5").is_err());
        assert!(PassProbability::parse("-0.1").is_err());
        assert!(PassProbability::parse("abc").is_err());
        assert!(PassProbability::parse("").is_err());
        assert!(PassProbability::new(1, 0).is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["0.1", "0.25", "1", "0", "0.000000001", "1/3"] {
            assert_eq!(pp(s).to_string(), s);
            assert_eq!(pp(&pp(s).to_string()), pp(s));
        }
    }

    #[test]
    fn threshold_edge_values() {
        assert_eq!(threshold_for(PassProbability::ONE), Threshold::Finite([0u8; 32]));
        assert_eq!(threshold_for(PassProbability::ZERO), Threshold::Never);
        let mut half = [0u8; 32];
        half[0] = 0x80;
        assert_eq!(threshold_for(pp("0.5")), Threshold::Finite(half));
    }

    #[test]
    fn threshold_for_one_tenth_matches_exact_rational() {
        // ceil(9 * 2^256 / 10), computed independently with arbitrary-precision integers.
        let expected = "e666666666666666666666666666666666666666666666666666666666666667";
        match threshold_for(pp("0.1")) {
            Threshold::Finite(t) => assert_eq!(hex::encode(t), expected),
            Threshold::Never => panic!("finite threshold expected"),
        }
        assert_eq!(
            hex::encode(match threshold_for(pp("0.25")) {
                Threshold::Finite(t) => t,
                Threshold::Never => unreachable!(),
            }),
            "c000000000000000000000000000000000000000000000000000000000000000"
        );
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let t = threshold_for(pp("0.5"));
        let mut at = [0u8; 32];
        at[0] = 0x80;
        let mut below = [0xffu8; 32];
        below[0] = 0x7f;
        assert!(t.passes(&Digest256(at)));
        assert!(!t.passes(&Digest256(below)));
        assert!(!Threshold::Never.passes(&Digest256([0xff; 32])));
        assert!(threshold_for(PassProbability::ONE).passes(&Digest256::ZERO));
    }

    #[test]
    fn vrf_is_deterministic_and_verifiable() {
        let kp = key(1);
        let a = vrf_eval(&kp.secret_key, b"prev");
        let b = vrf_eval(&kp.secret_key, b"prev");
        assert_eq!(a, b);
        assert_eq!(a.value, crypto::hash(a.proof.as_bytes()));
        assert!(vrf_verify(&kp.public_key, b"prev", &a));
    }

    #[test]
    fn vrf_verify_rejects_altered_outputs() {
        let kp = key(2);
        let honest = vrf_eval(&kp.secret_key, b"prev");
        let mut wrong_value = honest.clone();
        wrong_value.value = crypto::hash(b"arbitrary");
        assert!(!vrf_verify(&kp.public_key, b"prev", &wrong_value));
        let other_msg = vrf_eval(&kp.secret_key, b"other");
        assert!(!vrf_verify(&kp.public_key, b"prev", &other_msg));
        assert!(!vrf_verify(&key(3).public_key, b"prev", &honest));
    }

    #[test]
    fn extreme_pass_probabilities() {
        for i in 0..50 {
            let kp = key(i);
            let always = vct_toss(&kp.secret_key, b"h", PassProbability::ONE);
            assert!(always.pass);
            assert!(vct_verify(&kp.public_key, b"h", &always.out, PassProbability::ONE));
            let never = vct_toss(&kp.secret_key, b"h", PassProbability::ZERO);
            assert!(!never.pass);
            assert!(!vct_verify(&kp.public_key, b"h", &never.out, PassProbability::ZERO));
        }
    }

    #[test]
    fn vct_verify_accepts_exactly_passing_tosses() {
        let p = pp("0.3");
        let mut saw_pass = false;
        let mut saw_fail = false;
        for i in 0..200 {
            let kp = key(i);
            let toss = vct_toss(&kp.secret_key, b"parent", p);
            assert_eq!(vct_verify(&kp.public_key, b"parent", &toss.out, p), toss.pass);
            saw_pass |= toss.pass;
            saw_fail |= !toss.pass;
        }
        assert!(saw_pass && saw_fail);
    }

    #[test]
    fn passing_toss_fails_stricter_probability_when_below_its_threshold() {
        let loose = pp("0.5");
        let strict = pp("0.01");
        let mut checked = 0;
        for i in 0..300 {
            let kp = key(i);
            let toss = vct_toss(&kp.secret_key, b"parent", loose);
            if toss.pass && !threshold_for(strict).passes(&toss.out.value) {
                assert!(vct_verify(&kp.public_key, b"parent", &toss.out, loose));
                assert!(!vct_verify(&kp.public_key, b"parent", &toss.out, strict));
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn weighted_examples() {
        let base = pp("0.1");
        assert_eq!(weighted_pass_probability(base, 10, 1000, 100).unwrap(), base);
        assert_eq!(
            weighted_pass_probability(base, 0, 1000, 100).unwrap(),
            PassProbability::ZERO
        );
        assert_eq!(
            weighted_pass_probability(base, 20, 1000, 100).unwrap(),
            PassProbability::new(1, 5).unwrap()
        );
        assert_eq!(
            weighted_pass_probability(base, 1000, 1000, 100).unwrap(),
            PassProbability::ONE
        );
        assert_eq!(weighted_pass_probability(base, 0, 0, 100), Err(Error::ZeroTotalStake));
        assert!(weighted_pass_probability(base, 5, 4, 1).is_err());
    }

    proptest! {
        #[test]
        fn threshold_is_monotone(a in 0u64..=1000, b in 0u64..=1000, d in 1u64..=1000) {
            let (lo, hi) = (a.min(b).min(d), a.max(b).min(d));
            let t_lo = threshold_for(PassProbability::new(lo, d).unwrap()).to_biguint();
            let t_hi = threshold_for(PassProbability::new(hi, d).unwrap()).to_biguint();
            prop_assert!(t_lo >= t_hi);
        }

        #[test]
        fn threshold_quantization_is_exact(n in 0u64..=1_000_000, d in 1u64..=1_000_000) {
            let n = n.min(d);
            let t = threshold_for(PassProbability::new(n, d).unwrap()).to_biguint();
            // d * t - (d - n) * 2^256 lies in [0, d)
            let lhs = BigUint::from(d) * &t;
            let rhs = BigUint::from(d - n) << 256;
            prop_assert!(lhs >= rhs);
            prop_assert!(lhs - rhs < BigUint::from(d));
        }

        #[test]
        fn equal_stakes_preserve_base(num in 0u64..=100, nodes in 1u64..=500, unit in 1u64..=1_000_000) {
            let base = PassProbability::new(num, 100).unwrap();
            let w = weighted_pass_probability(base, unit, unit * nodes, nodes).unwrap();
            prop_assert_eq!(w, base);
        }
    }
}
