//! Counter-based Gaussian streams.
//!
//! Every draw is a pure function of `(seed, domain, step, particle, lane)`, so
//! particle updates can be scheduled on any number of threads in any order
//! and still produce the same numbers. The block cipher is Philox4x32-10;
//! pairs of 64-bit uniforms go through Box-Muller.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
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

/// Uniform in the open interval (0, 1) from 53 random bits.
#[inline(always)]
fn open_unit(hi: u32, lo: u32) -> f64 {
    let bits = ((hi as u64) << 32 | lo as u64) >> 11;
    (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Independent stream families sharing one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Domain {
    Increments = 0,
    InitialLaw = 1,
    Auxiliary = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
    domain: u16,
}

impl CounterRng {
    pub fn new(seed: u64, domain: Domain) -> Self {
        Self { key: [seed as u32, (seed >> 32) as u32], domain: domain as u16 }
    }

    #[inline]
    fn block(&self, step: u64, particle: u32, block: u16) -> [u32; 4] {
        let ctr = [step as u32, (step >> 32) as u32, particle, (self.domain as u32) << 16 | block as u32];
        philox4x32_10(ctr, self.key)
    }

    /// Fills `out` with standard normals for `(step, particle)`.
    #[inline]
    pub fn normals(&self, step: u64, particle: u32, out: &mut [f64]) {
        for (b, pair) in out.chunks_mut(2).enumerate() {
            let r = self.block(step, particle, b as u16);
            let u1 = open_unit(r[0], r[1]);
            let u2 = open_unit(r[2], r[3]);
            let radius = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            pair[0] = radius * c;
            if pair.len() > 1 {
                pair[1] = radius * s;
            }
        }
    }

    /// Fills `out` with uniforms in (0, 1) for `(step, particle)`.
    pub fn uniforms(&self, step: u64, particle: u32, out: &mut [f64]) {
        for (b, pair) in out.chunks_mut(2).enumerate() {
            let r = self.block(step, particle, b as u16);
            pair[0] = open_unit(r[0], r[1]);
            if pair.len() > 1 {
                pair[1] = open_unit(r[2], r[3]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 reference implementation.
    #[test]
    fn philox_known_answers() {
        assert_eq!(philox4x32_10([0; 4], [0; 2]), [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]);
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]
        );
        assert_eq!(
            philox4x32_10([0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344], [0xa4093822, 0x299f31d0]),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    #[test]
    fn draws_are_pure_functions_of_the_counter() {
        let rng = CounterRng::new(42, Domain::Increments);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        rng.normals(7, 11, &mut a);
        rng.normals(7, 11, &mut b);
        assert_eq!(a, b);
        rng.normals(7, 12, &mut b);
        assert_ne!(a, b);
        let other = CounterRng::new(42, Domain::InitialLaw);
        other.normals(7, 11, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn normal_moments() {
        let rng = CounterRng::new(2024, Domain::Auxiliary);
        let n = 200_000u32;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        let mut z = [0.0; 2];
        for i in 0..n / 2 {
            rng.normals(0, i, &mut z);
            for v in z {
                s1 += v;
                s2 += v * v;
                s4 += v * v * v * v;
            }
        }
        let nf = n as f64;
        assert!((s1 / nf).abs() < 5.0 / nf.sqrt());
        assert!((s2 / nf - 1.0).abs() < 5.0 * 2f64.sqrt() / nf.sqrt());
        assert!((s4 / nf - 3.0).abs() < 5.0 * 96f64.sqrt() / nf.sqrt());
    }

    #[test]
    fn uniforms_stay_open() {
        let rng = CounterRng::new(0, Domain::Auxiliary);
        let mut u = [0.0; 4];
        for i in 0..10_000 {
            rng.uniforms(1, i, &mut u);
            assert!(u.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
