//! Spreading-code generation: m-sequences, small-set Kasami and Gold codes.

use super::SignalError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeFamily {
    Kasami,
    Gold,
}

/// Spreading codes assigned to beacons: code index = beacon id.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeBook {
    pub family: CodeFamily,
    pub chip_length: usize,
    pub samples_per_chip: usize,
    pub seed: u64,
    codes: Vec<Vec<i8>>,
}

impl CodeBook {
    pub fn count(&self) -> usize {
        self.codes.len()
    }

    pub fn code(&self, id: u32) -> Option<&[i8]> {
        self.codes.get(id as usize).map(|c| c.as_slice())
    }

    /// Samples in one code period.
    pub fn period_samples(&self) -> usize {
        self.chip_length * self.samples_per_chip
    }

    /// Rectangular-chip upsampled waveform of one period.
    pub fn upsampled(&self, id: u32) -> Option<Vec<f64>> {
        let code = self.code(id)?;
        let mut wave = Vec::with_capacity(self.period_samples());
        for &chip in code {
            for _ in 0..self.samples_per_chip {
                wave.push(chip as f64);
            }
        }
        Some(wave)
    }
}

// Primitive polynomial masks (bit i = coefficient of x^i, x^m implied).
fn primitive_poly(m: u32) -> u64 {
    match m {
        6 => 0b100_0011,            // x^6 + x + 1
        8 => 0b1_0001_1101,         // x^8 + x^4 + x^3 + x^2 + 1
        10 => 0b100_0000_1001,      // x^10 + x^3 + 1
        _ => unreachable!("unsupported register length"),
    }
}

/// Full-period m-sequence of degree m as 0/1 bits.
fn m_sequence(m: u32) -> Vec<u8> {
    let n = (1usize << m) - 1;
    let taps = primitive_poly(m) & !(1 << m);
    let mut state: u64 = 1;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push((state & 1) as u8);
        let fb = (state & taps).count_ones() & 1;
        state = (state >> 1) | ((fb as u64) << (m - 1));
    }
    out
}

fn to_pm1(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| 1 - 2 * b as i8).collect()
}

fn xor_shifted(u: &[u8], v: &[u8], shift: usize) -> Vec<u8> {
    let n = u.len();
    (0..n).map(|i| u[i] ^ v[(i + shift) % n]).collect()
}

/// Small-set Kasami family for even m: u and u xor shifts of its
/// 2^(m/2)+1 decimation. 2^(m/2) members, cross-correlation bounded by
/// 2^(m/2)+1.
fn kasami_family(m: u32) -> Vec<Vec<i8>> {
    let n = (1usize << m) - 1;
    let u = m_sequence(m);
    let s = (1usize << (m / 2)) + 1;
    let w: Vec<u8> = (0..n).map(|i| u[(s * i) % n]).collect();
    let mut family = vec![to_pm1(&u)];
    let short = (1usize << (m / 2)) - 1;
    for j in 0..short {
        family.push(to_pm1(&xor_shifted(&u, &w, j)));
    }
    family
}

/// Gold family for m not divisible by 4: u, its preferred decimation v, and
/// u xor shifts of v. 2^m + 1 members, cross-correlation bounded by
/// 2^((m+2)/2) + 1.
fn gold_family(m: u32) -> Vec<Vec<i8>> {
    let n = (1usize << m) - 1;
    let u = m_sequence(m);
    let q = (1usize << ((m + 2) / 2)) + 1;
    let v: Vec<u8> = (0..n).map(|i| u[(q * i) % n]).collect();
    let mut family = vec![to_pm1(&u), to_pm1(&v)];
    for j in 0..n {
        family.push(to_pm1(&xor_shifted(&u, &v, j)));
    }
    family
}

fn register_length(chip_length: usize) -> Option<u32> {
    match chip_length {
        63 => Some(6),
        255 => Some(8),
        1023 => Some(10),
        _ => None,
    }
}

/// Builds a codebook of `count` distinct codes. The seed picks which family
/// members get assigned to beacon ids, deterministically.
pub fn gen_codes(
    family: CodeFamily,
    chip_length: usize,
    count: usize,
    seed: u64,
) -> Result<CodeBook, SignalError> {
    let m = register_length(chip_length).ok_or_else(|| {
        SignalError::Config(format!(
            "chip_length {chip_length} unsupported; expected 63, 255 or 1023"
        ))
    })?;
    if count == 0 {
        return Err(SignalError::Config("codebook count must be positive".into()));
    }
    let members = match family {
        CodeFamily::Kasami => kasami_family(m),
        CodeFamily::Gold => {
            if m % 4 == 0 {
                // no preferred pair exists for m divisible by 4
                return Err(SignalError::Config(format!(
                    "gold codes unavailable at chip_length {chip_length}; use 63 or 1023"
                )));
            }
            gold_family(m)
        }
    };
    if count > members.len() {
        return Err(SignalError::Config(format!(
            "requested {count} codes but the {family:?}-{chip_length} family has {}",
            members.len()
        )));
    }
    let mut order: Vec<usize> = (0..members.len()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let codes: Vec<Vec<i8>> = order[..count]
        .iter()
        .map(|&i| members[i].clone())
        .collect();
    Ok(CodeBook {
        family,
        chip_length,
        samples_per_chip: 1,
        seed,
        codes,
    })
}

impl CodeBook {
    pub fn with_samples_per_chip(mut self, samples_per_chip: usize) -> Result<Self, SignalError> {
        if samples_per_chip == 0 {
            return Err(SignalError::Config(
                "samples_per_chip must be positive".into(),
            ));
        }
        self.samples_per_chip = samples_per_chip;
        Ok(self)
    }
}

/// Periodic cross-correlation of +/-1 chip sequences at every lag,
/// normalized by the length.
pub fn normalized_cross_correlation(a: &[i8], b: &[i8]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|lag| {
            let sum: i64 = (0..n)
                .map(|i| a[i] as i64 * b[(i + lag) % n] as i64)
                .sum();
            sum as f64 / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_cross(a: &[i8], b: &[i8]) -> f64 {
        normalized_cross_correlation(a, b)
            .iter()
            .fold(0.0f64, |m, &c| m.max(c.abs()))
    }

    #[test]
    fn m_sequences_have_full_period_and_balance() {
        for m in [6u32, 8, 10] {
            let seq = m_sequence(m);
            let n = (1usize << m) - 1;
            assert_eq!(seq.len(), n);
            let ones: usize = seq.iter().map(|&b| b as usize).sum();
            assert_eq!(ones, 1 << (m - 1));
            // no shorter period
            for p in 1..n {
                if n % p == 0 {
                    assert!((0..n).any(|i| seq[i] != seq[(i + p) % n]), "period {p}");
                }
            }
        }
    }

    #[test]
    fn kasami_255_pairwise_bound() {
        let book = gen_codes(CodeFamily::Kasami, 255, 4, 7).unwrap();
        let bound = 17.0 / 255.0 + 1e-12;
        for i in 0..4u32 {
            for j in 0..4u32 {
                if i == j {
                    continue;
                }
                let c = max_abs_cross(book.code(i).unwrap(), book.code(j).unwrap());
                assert!(c <= bound, "pair ({i},{j}) cross {c}");
            }
        }
    }

    #[test]
    fn gold_63_pairwise_bound() {
        let book = gen_codes(CodeFamily::Gold, 63, 4, 3).unwrap();
        let bound = 17.0 / 63.0 + 1e-12;
        for i in 0..4u32 {
            for j in (i + 1)..4u32 {
                let c = max_abs_cross(book.code(i).unwrap(), book.code(j).unwrap());
                assert!(c <= bound, "pair ({i},{j}) cross {c}");
            }
        }
    }

    #[test]
    fn single_code_autocorrelation_peak() {
        let book = gen_codes(CodeFamily::Kasami, 63, 1, 0).unwrap();
        let auto = normalized_cross_correlation(book.code(0).unwrap(), book.code(0).unwrap());
        assert_eq!(auto[0], 1.0);
        for &v in &auto[1..] {
            assert!(v.abs() < 1.0);
        }
    }

    #[test]
    fn codes_are_distinct_and_deterministic() {
        let a = gen_codes(CodeFamily::Kasami, 255, 16, 42).unwrap();
        let b = gen_codes(CodeFamily::Kasami, 255, 16, 42).unwrap();
        assert_eq!(a, b);
        for i in 0..16u32 {
            for j in (i + 1)..16u32 {
                assert_ne!(a.code(i), a.code(j));
            }
        }
        let c = gen_codes(CodeFamily::Kasami, 255, 16, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn configuration_errors() {
        assert!(gen_codes(CodeFamily::Kasami, 100, 4, 0).is_err());
        assert!(gen_codes(CodeFamily::Gold, 255, 4, 0).is_err());
        assert!(gen_codes(CodeFamily::Kasami, 63, 9, 0).is_err()); // capacity 8
        assert!(gen_codes(CodeFamily::Kasami, 63, 0, 0).is_err());
    }

    #[test]
    fn upsampling_repeats_chips() {
        let book = gen_codes(CodeFamily::Kasami, 63, 1, 0)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap();
        let chips = book.code(0).unwrap().to_vec();
        let wave = book.upsampled(0).unwrap();
        assert_eq!(wave.len(), 63 * 4);
        for (i, &w) in wave.iter().enumerate() {
            assert_eq!(w, chips[i / 4] as f64);
        }
    }
}
