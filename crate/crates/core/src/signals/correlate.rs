//! Matched filtering and correlation-peak ratio extraction.
//!
//! Correlations are circular over the capture length, computed with FFTs
//! (the default configuration runs 65k-sample captures, far past the point
//! where direct correlation is affordable).

use super::{QadaCapture, SignalError, PEAK_DOMINANCE_MIN};
use crate::qada::RatioPair;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

/// Correlations of one beacon's code against the three channels:
/// `s` for the sum, `t` for bottom-minus-top, `r` for left-minus-right.
#[derive(Debug, Clone)]
pub struct CorrelationTriple {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
}

/// How the ratios are read off the correlation triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RatioRule {
    /// Difference channels evaluated at the sum-channel peak lag (signed).
    #[default]
    SignedPeak,
    /// Independent channel maxima; loses the ratio signs, retained for
    /// comparison only.
    PaperLiteral,
}

/// Extracted ratio pair plus detection diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct RatioEstimate {
    pub ratios: RatioPair,
    /// Sum-channel peak lag in samples.
    pub peak_lag: usize,
    /// Set when the peak fails the dominance test over the second-highest
    /// non-adjacent lag.
    pub low_confidence: bool,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> =
        RefCell::new(HashMap::new());
    // code spectra are reused across every trial of a study
    static CODE_FFTS: RefCell<HashMap<u64, Arc<Vec<Complex<f64>>>>> =
        RefCell::new(HashMap::new());
}

fn plans_for(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

fn code_key(code: &[i8], samples_per_chip: usize, n: usize) -> u64 {
    // FNV-1a over the chips plus the layout parameters
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u64| {
        h ^= b;
        h = h.wrapping_mul(0x100000001b3);
    };
    for &c in code {
        eat(c as u8 as u64);
    }
    eat(samples_per_chip as u64);
    eat(n as u64);
    h
}

fn code_fft_for(
    code: &[i8],
    samples_per_chip: usize,
    n: usize,
    fwd: &Arc<dyn Fft<f64>>,
) -> Arc<Vec<Complex<f64>>> {
    let key = code_key(code, samples_per_chip, n);
    CODE_FFTS.with(|cell| {
        let mut map = cell.borrow_mut();
        map.entry(key)
            .or_insert_with(|| {
                let period = code.len() * samples_per_chip;
                let mut buf = vec![Complex::new(0.0, 0.0); n];
                for (i, b) in buf.iter_mut().enumerate().take(period) {
                    b.re = code[i / samples_per_chip] as f64;
                }
                fwd.process(&mut buf);
                Arc::new(buf)
            })
            .clone()
    })
}

/// Correlates the capture's three channels with one code (given in chips,
/// upsampled by `samples_per_chip` with rectangular pulses). Correlations
/// are circular: out[lag] = sum_n code[n] * channel[(n + lag) mod N].
///
/// The two difference channels share one forward and one inverse transform
/// (packed as real and imaginary parts), which roughly halves the cost per
/// call.
pub fn correlate(
    capture: &QadaCapture,
    code: &[i8],
    samples_per_chip: usize,
) -> Result<CorrelationTriple, SignalError> {
    let period = code.len() * samples_per_chip;
    let n = capture.sample_count();
    if n < period {
        return Err(SignalError::TooShort {
            capture: n,
            period,
        });
    }
    if capture.v_bt.len() != n || capture.v_lr.len() != n {
        return Err(SignalError::LengthMismatch);
    }
    let (fwd, inv) = plans_for(n);
    let code_fft = code_fft_for(code, samples_per_chip, n, &fwd);
    let inv_n = 1.0 / n as f64;

    // sum channel alone
    let mut sum_fft: Vec<Complex<f64>> = capture
        .v_sum
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fwd.process(&mut sum_fft);
    let mut s_buf: Vec<Complex<f64>> = sum_fft
        .iter()
        .zip(code_fft.iter())
        .map(|(v, c)| v * c.conj())
        .collect();
    inv.process(&mut s_buf);
    let s: Vec<f64> = s_buf.iter().map(|z| z.re * inv_n).collect();

    // difference channels packed: z = v_bt + i v_lr
    let mut packed: Vec<Complex<f64>> = capture
        .v_bt
        .iter()
        .zip(&capture.v_lr)
        .map(|(&b, &l)| Complex::new(b, l))
        .collect();
    fwd.process(&mut packed);
    // spectra of the real parts: B[k] = (Z[k] + conj(Z[N-k]))/2,
    // L[k] = -i (Z[k] - conj(Z[N-k]))/2; pack products as P_t + i P_r
    let mut q = vec![Complex::new(0.0, 0.0); n];
    for k in 0..n {
        let z_k = packed[k];
        let z_m = packed[(n - k) % n].conj();
        let b_k = 0.5 * (z_k + z_m);
        let l_k = Complex::new(0.0, -0.5) * (z_k - z_m);
        let c = code_fft[k].conj();
        q[k] = b_k * c + Complex::new(0.0, 1.0) * (l_k * c);
    }
    inv.process(&mut q);
    let t: Vec<f64> = q.iter().map(|z| z.re * inv_n).collect();
    let r: Vec<f64> = q.iter().map(|z| z.im * inv_n).collect();

    Ok(CorrelationTriple { s, t, r })
}

/// Reads the ratio pair at the sum-channel correlation peak.
pub fn extract_ratios(
    tri: &CorrelationTriple,
    samples_per_chip: usize,
    rule: RatioRule,
) -> Result<RatioEstimate, SignalError> {
    let n = tri.s.len();
    if n == 0 || tri.t.len() != n || tri.r.len() != n {
        return Err(SignalError::LengthMismatch);
    }
    let mut peak = 0usize;
    for (i, &v) in tri.s.iter().enumerate() {
        if !v.is_finite() {
            return Err(SignalError::DetectionFailure("non-finite correlation"));
        }
        if v > tri.s[peak] {
            peak = i;
        }
    }
    let s_peak = tri.s[peak];
    if s_peak <= 0.0 {
        return Err(SignalError::DetectionFailure("sum-channel peak not positive"));
    }
    // dominance over the best lag outside the correlation triangle
    let mut second = f64::NEG_INFINITY;
    for (i, &v) in tri.s.iter().enumerate() {
        let dist = (i as isize - peak as isize).unsigned_abs();
        let dist = dist.min(n - dist);
        if dist > samples_per_chip {
            second = second.max(v);
        }
    }
    let low_confidence = second > 0.0 && s_peak / second < PEAK_DOMINANCE_MIN;

    let ratios = match rule {
        RatioRule::SignedPeak => RatioPair {
            p_x: tri.r[peak] / s_peak,
            p_y: tri.t[peak] / s_peak,
        },
        RatioRule::PaperLiteral => {
            let max_of = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            RatioPair {
                p_x: max_of(&tri.r) / s_peak,
                p_y: max_of(&tri.t) / s_peak,
            }
        }
    };
    if !ratios.p_x.is_finite() || !ratios.p_y.is_finite() {
        return Err(SignalError::DetectionFailure("non-finite ratio"));
    }
    Ok(RatioEstimate {
        ratios,
        peak_lag: peak,
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{gen_codes, CodeFamily};

    fn capture_from(sum: Vec<f64>, bt: Vec<f64>, lr: Vec<f64>) -> QadaCapture {
        QadaCapture {
            v_sum: sum,
            v_bt: bt,
            v_lr: lr,
            snr_db: f64::INFINITY,
            seed: 0,
            out_of_field: Vec::new(),
        }
    }

    #[test]
    fn pure_code_peak_equals_energy() {
        let book = gen_codes(CodeFamily::Kasami, 63, 2, 1)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap();
        let wave = book.upsampled(0).unwrap();
        let amp = 0.37;
        let scaled: Vec<f64> = wave.iter().map(|w| amp * w).collect();
        let cap = capture_from(scaled.clone(), scaled.clone(), scaled);
        let tri = correlate(&cap, book.code(0).unwrap(), 4).unwrap();
        let energy: f64 = wave.iter().map(|w| w * w).sum();
        assert!((tri.s[0] - amp * energy).abs() < 1e-9 * energy);
        let peak = tri
            .s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 0);
    }

    #[test]
    fn cross_code_peak_is_bounded() {
        let book = gen_codes(CodeFamily::Kasami, 63, 2, 1)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap();
        let wave = book.upsampled(1).unwrap();
        let energy: f64 = wave.iter().map(|w| w * w).sum();
        let cap = capture_from(wave.clone(), wave.clone(), wave);
        let tri = correlate(&cap, book.code(0).unwrap(), 4).unwrap();
        let bound = (9.0 / 63.0) * energy + 1e-9 * energy;
        for &v in &tri.s {
            assert!(v.abs() <= bound, "cross-correlation {v} above bound {bound}");
        }
    }

    #[test]
    fn zero_capture_gives_zero_correlation() {
        let book = gen_codes(CodeFamily::Kasami, 63, 1, 1).unwrap();
        let n = book.period_samples();
        let cap = capture_from(vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let tri = correlate(&cap, book.code(0).unwrap(), 1).unwrap();
        for &v in tri.s.iter().chain(&tri.t).chain(&tri.r) {
            assert!(v.abs() < 1e-12);
        }
        assert!(matches!(
            extract_ratios(&tri, 1, RatioRule::SignedPeak),
            Err(SignalError::DetectionFailure(_))
        ));
    }

    #[test]
    fn correlation_is_linear() {
        let book = gen_codes(CodeFamily::Kasami, 63, 2, 5)
            .unwrap()
            .with_samples_per_chip(2)
            .unwrap();
        let a = book.upsampled(0).unwrap();
        let b = book.upsampled(1).unwrap();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let n = a.len();
        let cap_a = capture_from(a.clone(), vec![0.0; n], vec![0.0; n]);
        let cap_b = capture_from(b.clone(), vec![0.0; n], vec![0.0; n]);
        let cap_sum = capture_from(sum, vec![0.0; n], vec![0.0; n]);
        let ta = correlate(&cap_a, book.code(0).unwrap(), 2).unwrap();
        let tb = correlate(&cap_b, book.code(0).unwrap(), 2).unwrap();
        let ts = correlate(&cap_sum, book.code(0).unwrap(), 2).unwrap();
        for i in 0..n {
            assert!((ts.s[i] - (ta.s[i] + tb.s[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn capture_shorter_than_period_errors() {
        let book = gen_codes(CodeFamily::Kasami, 63, 1, 1)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap();
        let cap = capture_from(vec![0.0; 100], vec![0.0; 100], vec![0.0; 100]);
        assert!(matches!(
            correlate(&cap, book.code(0).unwrap(), 4),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn signed_ratios_at_peak() {
        let book = gen_codes(CodeFamily::Kasami, 63, 1, 2)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap();
        let wave = book.upsampled(0).unwrap();
        let bt: Vec<f64> = wave.iter().map(|w| 0.2 * w).collect();
        let lr: Vec<f64> = wave.iter().map(|w| -0.3 * w).collect();
        let cap = capture_from(wave, bt, lr);
        let tri = correlate(&cap, book.code(0).unwrap(), 4).unwrap();
        let est = extract_ratios(&tri, 4, RatioRule::SignedPeak).unwrap();
        assert!((est.ratios.p_x + 0.3).abs() < 1e-9);
        assert!((est.ratios.p_y - 0.2).abs() < 1e-9);
        assert_eq!(est.peak_lag, 0);
        assert!(!est.low_confidence);

        // the literal rule cannot produce the negative x ratio
        let lit = extract_ratios(&tri, 4, RatioRule::PaperLiteral).unwrap();
        assert!(lit.ratios.p_x > 0.0);
        assert!((lit.ratios.p_y - 0.2).abs() < 1e-9);
    }

    #[test]
    fn gain_invariance() {
        let book = gen_codes(CodeFamily::Kasami, 63, 1, 2)
            .unwrap()
            .with_samples_per_chip(4)
            .unwrap();
        let wave = book.upsampled(0).unwrap();
        for gain in [0.01, 1.0, 250.0] {
            let sum: Vec<f64> = wave.iter().map(|w| gain * w).collect();
            let bt: Vec<f64> = wave.iter().map(|w| gain * 0.41 * w).collect();
            let lr: Vec<f64> = wave.iter().map(|w| gain * -0.13 * w).collect();
            let cap = capture_from(sum, bt, lr);
            let tri = correlate(&cap, book.code(0).unwrap(), 4).unwrap();
            let est = extract_ratios(&tri, 4, RatioRule::SignedPeak).unwrap();
            assert!((est.ratios.p_x + 0.13).abs() < 1e-9);
            assert!((est.ratios.p_y - 0.41).abs() < 1e-9);
        }
    }
}
