//! Real polynomials and companion-matrix root finding.
//!
//! Roots come from the eigenvalues of the balanced companion matrix,
//! computed with a Francis double-shift QR iteration on its Hessenberg
//! form. `real_poly_roots` then classifies real eigenvalues, polishes each
//! with one Newton step and collapses multiplicities.

use super::{tol, NumericsError};

/// Dense real polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial, stripping exactly-zero leading coefficients.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut c = coeffs;
        while c.len() > 1 && c.last() == Some(&0.0) {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Polynomial { coeffs: c }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, &c)| c * (i + 1) as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            out[i] += a;
        }
        for (i, &b) in other.coeffs.iter().enumerate() {
            out[i] += b;
        }
        Polynomial::new(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Monic polynomial with the given roots; test and construction helper.
    pub fn from_roots(roots: &[f64]) -> Polynomial {
        roots.iter().fold(Polynomial::constant(1.0), |p, &r| {
            p.mul(&Polynomial::new(vec![-r, 1.0]))
        })
    }
}

/// All complex eigenvalues (re, im) of the polynomial's companion matrix.
///
/// Leading coefficients below `tol::LEADING_COEFF_RTOL` of the largest
/// coefficient are treated as degree reduction.
pub fn complex_roots(p: &Polynomial) -> Result<Vec<(f64, f64)>, NumericsError> {
    if p.is_zero() {
        return Err(NumericsError::ZeroPolynomial);
    }
    let max_c = p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut c: Vec<f64> = p.coeffs.iter().map(|&x| x / max_c).collect();
    while c.len() > 1 && c.last().unwrap().abs() <= tol::LEADING_COEFF_RTOL {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    // strip roots at the origin so the companion matrix stays well scaled
    let mut zeros_at_origin = 0;
    while c.first() == Some(&0.0) && c.len() > 1 {
        c.remove(0);
        zeros_at_origin += 1;
    }
    let n = c.len() - 1;
    let mut roots = Vec::with_capacity(n + zeros_at_origin);
    for _ in 0..zeros_at_origin {
        roots.push((0.0, 0.0));
    }
    if n == 0 {
        return Ok(roots);
    }

    let lead = *c.last().unwrap();
    // companion matrix, upper Hessenberg
    let mut a = vec![vec![0.0f64; n]; n];
    for j in 0..n {
        a[0][j] = -c[n - 1 - j] / lead;
    }
    for i in 1..n {
        a[i][i - 1] = 1.0;
    }
    balance(&mut a);
    let (wr, wi) = hqr(&mut a)?;
    roots.extend(wr.into_iter().zip(wi));
    Ok(roots)
}

/// Real roots of `p`, multiplicities collapsed.
///
/// Eigenvalues with |im| < cutoff * (1 + |re|) count as real; each root gets
/// one Newton polish step; roots failing the residual bound are dropped.
pub fn real_poly_roots(p: &Polynomial) -> Result<Vec<f64>, NumericsError> {
    let all = complex_roots(p)?;
    let max_c = p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let dp = p.derivative();
    let deg = p.degree() as i32;

    let mut reals: Vec<f64> = Vec::new();
    for (re, im) in all {
        if im.abs() >= tol::ROOT_IMAG_CUTOFF * (1.0 + re.abs()) {
            continue;
        }
        let mut r = re;
        let d = dp.eval(r);
        if d.abs() > f64::MIN_POSITIVE {
            let step = p.eval(r) / d;
            if step.is_finite() {
                r -= step;
            }
        }
        let bound = tol::ROOT_RESIDUAL_RTOL * max_c * r.abs().max(1.0).powi(deg);
        if p.eval(r).abs() <= bound {
            reals.push(r);
        }
    }
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    reals.dedup_by(|a, b| (*a - *b).abs() <= tol::ROOT_MERGE_RTOL * (1.0 + a.abs()));
    Ok(reals)
}

/// Iterative row/column norm balancing (radix-2) of a general matrix.
fn balance(a: &mut [Vec<f64>]) {
    let n = a.len();
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut f = 1.0;
                let s = c + r;
                let mut c2 = c;
                let mut g = r / RADIX;
                while c2 < g {
                    f *= RADIX;
                    c2 *= sqrdx;
                }
                g = r * RADIX;
                while c2 > g {
                    f /= RADIX;
                    c2 /= sqrdx;
                }
                if (c2 + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for j in 0..n {
                        a[j][i] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

fn same_sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.
/// The matrix is destroyed. Returns (real parts, imaginary parts).
#[allow(clippy::needless_range_loop)]
fn hqr(a: &mut [Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok((wr, wi)); // all-zero matrix
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // search for a single small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = a[(l - 1) as usize][(l - 1) as usize].abs()
                    + a[l as usize][l as usize].abs();
                let s = if s == 0.0 { anorm } else { s };
                if a[l as usize][(l - 1) as usize].abs() <= f64::EPSILON * s {
                    a[l as usize][(l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let l = l.max(0);
            let x = a[nn as usize][nn as usize];
            if l == nn {
                // one root found
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let y = a[(nn - 1) as usize][(nn - 1) as usize];
            let w = a[nn as usize][(nn - 1) as usize] * a[(nn - 1) as usize][nn as usize];
            if l == nn - 1 {
                // two roots found
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= 0.0 {
                    let z = p + same_sign(z, p);
                    wr[(nn - 1) as usize] = x + z;
                    wr[nn as usize] = if z != 0.0 { x - w / z } else { x + z };
                    wi[(nn - 1) as usize] = 0.0;
                    wi[nn as usize] = 0.0;
                } else {
                    wr[(nn - 1) as usize] = x + p;
                    wr[nn as usize] = x + p;
                    wi[(nn - 1) as usize] = -z;
                    wi[nn as usize] = z;
                }
                nn -= 2;
                break;
            }
            // no root yet; do an iteration
            if its == 30 {
                return Err(NumericsError::NoConvergence);
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    a[i][i] -= x;
                }
                let s = a[nn as usize][(nn - 1) as usize].abs()
                    + a[(nn - 1) as usize][(nn - 2) as usize].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // form shift, then look for two consecutive small subdiagonals
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let z = a[m as usize][m as usize];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1) as usize][m as usize] + a[m as usize][(m + 1) as usize];
                q = a[(m + 1) as usize][(m + 1) as usize] - z - rr - ss;
                r = a[(m + 2) as usize][(m + 1) as usize];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m as usize][(m - 1) as usize].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[(m - 1) as usize][(m - 1) as usize].abs()
                        + z.abs()
                        + a[(m + 1) as usize][(m + 1) as usize].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            let m = m.max(l);
            for i in (m + 2)..=nn {
                a[i as usize][(i - 2) as usize] = 0.0;
            }
            for i in (m + 3)..=nn {
                a[i as usize][(i - 3) as usize] = 0.0;
            }
            // double QR step on rows l..nn, columns m..nn
            let mut k = m;
            while k <= nn - 1 {
                if k != m {
                    p = a[k as usize][(k - 1) as usize];
                    q = a[(k + 1) as usize][(k - 1) as usize];
                    r = if k != nn - 1 {
                        a[(k + 2) as usize][(k - 1) as usize]
                    } else {
                        0.0
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = same_sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k as usize][(k - 1) as usize] = -a[k as usize][(k - 1) as usize];
                        }
                    } else {
                        a[k as usize][(k - 1) as usize] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    // row modification
                    for j in k as usize..=nn as usize {
                        let mut pp = a[k as usize][j] + q * a[(k + 1) as usize][j];
                        if k != nn - 1 {
                            pp += r * a[(k + 2) as usize][j];
                            a[(k + 2) as usize][j] -= pp * z;
                        }
                        a[(k + 1) as usize][j] -= pp * y;
                        a[k as usize][j] -= pp * x;
                    }
                    // column modification
                    let mmin = nn.min(k + 3);
                    for i in l as usize..=mmin as usize {
                        let mut pp = x * a[i][k as usize] + y * a[i][(k + 1) as usize];
                        if k != nn - 1 {
                            pp += z * a[i][(k + 2) as usize];
                            a[i][(k + 2) as usize] -= pp * r;
                        }
                        a[i][(k + 1) as usize] -= pp * q;
                        a[i][k as usize] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((wr, wi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_quadratic() {
        let p = Polynomial::new(vec![-1.0, 0.0, 1.0]); // x^2 - 1
        let roots = real_poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 1.0).abs() < 1e-12);
        assert!((roots[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triple_root_collapses() {
        // (x - 2)^3 = x^3 - 6x^2 + 12x - 8
        let p = Polynomial::new(vec![-8.0, 12.0, -6.0, 1.0]);
        let roots = real_poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 1, "got {roots:?}");
        assert!((roots[0] - 2.0).abs() < 1e-4, "got {roots:?}");
    }

    #[test]
    fn degree_seven_known_factorization() {
        // (x-1)(x+3)(x^2+1)(x-0.5)(x^2+4): real roots {-3, 0.5, 1}
        let p = Polynomial::from_roots(&[1.0, -3.0, 0.5])
            .mul(&Polynomial::new(vec![1.0, 0.0, 1.0]))
            .mul(&Polynomial::new(vec![4.0, 0.0, 1.0]));
        assert_eq!(p.degree(), 7);
        let roots = real_poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 3, "got {roots:?}");
        for (got, want) in roots.iter().zip([-3.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-9, "got {roots:?}");
        }
    }

    #[test]
    fn zero_polynomial_errors() {
        let p = Polynomial::new(vec![0.0, 0.0]);
        assert!(matches!(
            real_poly_roots(&p),
            Err(NumericsError::ZeroPolynomial)
        ));
    }

    #[test]
    fn constant_has_no_roots() {
        let p = Polynomial::constant(3.0);
        assert!(real_poly_roots(&p).unwrap().is_empty());
    }

    #[test]
    fn roots_at_origin() {
        // x^2 (x - 1)
        let p = Polynomial::new(vec![0.0, 0.0, -1.0, 1.0]);
        let roots = real_poly_roots(&p).unwrap();
        assert_eq!(roots.len(), 2, "got {roots:?}");
        assert!(roots[0].abs() < 1e-12 && (roots[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn residual_contract_on_random_degree_8() {
        let mut state = 0xfeed_beef_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 4.0 - 2.0
        };
        for _ in 0..100 {
            let coeffs: Vec<f64> = (0..9).map(|_| next()).collect();
            let p = Polynomial::new(coeffs);
            let max_c = p.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
            for r in real_poly_roots(&p).unwrap() {
                let bound = 1e-8 * max_c * r.abs().max(1.0).powi(p.degree() as i32);
                assert!(p.eval(r).abs() <= bound);
            }
        }
    }

    proptest! {
        #[test]
        fn root_construction_round_trip(
            seed in 0u64..2000,
            count in 1usize..=6,
        ) {
            // distinct real roots in [-10, 10], separated by at least 0.05
            let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D).wrapping_add(777);
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state as f64 / u64::MAX as f64) * 20.0 - 10.0
            };
            let mut roots: Vec<f64> = Vec::new();
            while roots.len() < count {
                let r = next();
                if roots.iter().all(|&x: &f64| (x - r).abs() > 0.05) {
                    roots.push(r);
                }
            }
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let p = Polynomial::from_roots(&roots);
            let found = real_poly_roots(&p).unwrap();
            prop_assert_eq!(found.len(), roots.len());
            for (f, r) in found.iter().zip(&roots) {
                prop_assert!((f - r).abs() < 1e-7 * (1.0 + r.abs()),
                    "found {:?} want {:?}", found, roots);
            }
        }
    }
}
