//! Counter-based random numbers.
//!
//! Every random quantity in the crate is a pure function of a key (the user
//! seed plus a domain tag) and a 128-bit counter, evaluated with Philox4x32-10.
//! There is no generator state to thread through, so trials can run on any
//! number of workers in any order and still reproduce bit-identically.
//!
//! Gaussians use the cosine branch of Box–Muller with the `libm` software
//! implementations of `log`, `cos` and `sqrt`, which gives the same bits on
//! every platform.

/// Identifier of the uniform-to-normal transform, echoed in output metadata.
pub const RNG_TRANSFORM: &str =
    "philox4x32-10; box-muller cosine branch (libm); entries rounded to multiples of 2^-44";

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Domain tags keep independent uses of one seed on disjoint key streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Domain {
    Matrix = 0,
    OverlapSampling = 1,
    UniformSigns = 2,
}

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let prod = u64::from(a) * u64::from(b);
    ((prod >> 32) as u32, prod as u32)
}

/// The Philox4x32 bijection with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut key = key;
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// A keyed counter-based stream: `(seed, domain)` is the key and callers
/// supply the counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let tag = (domain as u32).wrapping_mul(0x85EB_CA6B);
        Self {
            key: [seed as u32, ((seed >> 32) as u32) ^ tag],
        }
    }

    /// Two 64-bit words for the counter `(stream, a, b)`.
    #[inline]
    pub fn words(&self, stream: u64, a: u32, b: u32) -> [u64; 2] {
        let out = philox4x32_10([b, a, stream as u32, (stream >> 32) as u32], self.key);
        [
            u64::from(out[0]) | (u64::from(out[1]) << 32),
            u64::from(out[2]) | (u64::from(out[3]) << 32),
        ]
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&self, stream: u64, a: u32, b: u32) -> f64 {
        unit_closed_open(self.words(stream, a, b)[0])
    }

    /// Uniform integer in `[0, bound)` by widening multiplication.
    #[inline]
    pub fn below(&self, stream: u64, a: u32, b: u32, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((u128::from(self.words(stream, a, b)[0]) * u128::from(bound)) >> 64) as u64
    }

    /// Standard normal for the counter `(stream, a, b)`.
    #[inline]
    pub fn normal(&self, stream: u64, a: u32, b: u32) -> f64 {
        let [w0, w1] = self.words(stream, a, b);
        // u1 in (0, 1] so the logarithm stays finite.
        let u1 = ((w0 >> 11) + 1) as f64 * TWO_POW_NEG_53;
        let u2 = unit_closed_open(w1);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(std::f64::consts::TAU * u2)
    }
}

const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[inline]
fn unit_closed_open(word: u64) -> f64 {
    (word >> 11) as f64 * TWO_POW_NEG_53
}
