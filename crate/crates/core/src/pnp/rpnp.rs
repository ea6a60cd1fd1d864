//! Depth-ratio PnP: the n points split into (n-2) triplets sharing the edge
//! with the longest image separation. Each triplet contributes a quartic
//! constraint on the shared depth ratio; the squared-sum cost is minimized
//! at the real roots of its degree-7 derivative, and each root closes with a
//! linear solve for the residual rotation angle and the translation.

use super::{
    reproj_rms_norm, translation_for, validate, Correspondence, PnPSolution, PnpError,
    SolverKind,
};
use crate::geometry::RotationMatrix;
use crate::numerics::vec3::{self, Vec3};
use crate::numerics::{complex_roots, lstsq, Matrix, Polynomial};

/// Companion eigenvalues with |im| below this (relative) seed a depth-ratio
/// candidate; clustered near-double roots show up with imaginary parts far
/// above the generic round-off level, so this is deliberately loose. The
/// quartic-system polish and reprojection ranking weed out impostors.
const SEED_IMAG_RTOL: f64 = 1e-2;

pub fn rpnp(corr: &[Correspondence], h_ap_mm: f64) -> Result<PnPSolution, PnpError> {
    validate(corr)?;
    let n = corr.len();

    // base pair: longest image-space separation, ties toward low indices
    let (mut i1, mut i2, mut best_d) = (0usize, 1usize, -1.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = corr[i].image[0] - corr[j].image[0];
            let dy = corr[i].image[1] - corr[j].image[1];
            let d = (dx * dx + dy * dy).sqrt();
            if d > best_d {
                best_d = d;
                i1 = i;
                i2 = j;
            }
        }
    }
    if best_d < 1e-12 {
        return Err(PnpError::Degenerate("image points coincide".into()));
    }

    let ray = |c: &Correspondence| vec3::normalize([c.image[0], c.image[1], 1.0]);
    let v1 = ray(&corr[i1]);
    let v2 = ray(&corr[i2]);
    let l1 = vec3::dot(v1, v2);
    let p1 = corr[i1].world;
    let p2 = corr[i2].world;
    let d1 = vec3::norm(vec3::sub(p1, p2));
    if d1 < 1e-12 {
        return Err(PnpError::Degenerate("base world points coincide".into()));
    }

    // one quartic constraint per remaining point
    // W(x) = x^2 - 2 l1 x + 1 relates the base-edge scale to the depth
    // ratio x = d2/d1; eliminating the third depth from the two remaining
    // triangle constraints leaves a quartic in x.
    let w_poly = Polynomial::new(vec![1.0, -2.0 * l1, 1.0]);
    let mut quartics = Vec::with_capacity(n - 2);
    for (k, c) in corr.iter().enumerate() {
        if k == i1 || k == i2 {
            continue;
        }
        let vk = ray(c);
        let l2 = vec3::dot(v1, vk);
        let a5 = vec3::dot(v2, vk);
        let d2 = vec3::norm(vec3::sub(p1, c.world));
        let d3 = vec3::norm(vec3::sub(p2, c.world));
        if d2 < 1e-12 || d3 < 1e-12 {
            return Err(PnpError::Degenerate(format!("repeated world point {k}")));
        }
        let r2 = (d2 / d1) * (d2 / d1);
        let r3 = (d3 / d1) * (d3 / d1);
        let num = Polynomial::new(vec![-1.0, 0.0, 1.0]).add(&w_poly.scale(r2 - r3));
        let den = Polynomial::new(vec![-2.0 * l2, 2.0 * a5]);
        let c2 = Polynomial::constant(1.0).add(&w_poly.scale(-r2));
        let f = num
            .mul(&num)
            .add(&num.mul(&den).scale(-2.0 * l2))
            .add(&c2.mul(&den).mul(&den));
        quartics.push(f);
    }

    // minimize F = sum f_k^2 at the roots of its degree-7 derivative
    let mut f_prime = Polynomial::constant(0.0);
    for f in &quartics {
        f_prime = f_prime.add(&f.mul(&f.derivative()).scale(2.0));
    }
    let eigs = complex_roots(&f_prime).map_err(|e| PnpError::Degenerate(e.to_string()))?;
    let derivs: Vec<Polynomial> = quartics.iter().map(|f| f.derivative()).collect();

    let mut seeds: Vec<f64> = eigs
        .into_iter()
        .filter(|(re, im)| *re > 0.0 && im.abs() < SEED_IMAG_RTOL * (1.0 + re.abs()))
        .map(|(re, _)| re)
        .collect();
    // Gauss-Newton polish on the quartic residual system
    for seed in &mut seeds {
        for _ in 0..5 {
            let mut num = 0.0;
            let mut den = 0.0;
            for (f, fp) in quartics.iter().zip(&derivs) {
                let fv = f.eval(*seed);
                let dv = fp.eval(*seed);
                num += fv * dv;
                den += dv * dv;
            }
            if den < f64::MIN_POSITIVE {
                break;
            }
            let step = num / den;
            *seed -= step;
            if step.abs() < 1e-14 * (1.0 + seed.abs()) {
                break;
            }
        }
    }
    seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seeds.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + b.abs()));

    // model frame with its x axis along the base edge
    let p0 = vec3::scale(vec3::add(p1, p2), 0.5);
    let edge_w = vec3::normalize(vec3::sub(p2, p1));
    let r_model = vec3::complete_frame(edge_w); // columns: model axes in world
    let model_pts: Vec<Vec3> = corr
        .iter()
        .map(|c| vec3::mat_vec(&vec3::transpose(&r_model), vec3::sub(c.world, p0)))
        .collect();

    let mut best: Option<PnPSolution> = None;
    for d2 in seeds {
        // camera-frame edge direction fixed by the depth ratio
        let e = vec3::sub(vec3::scale(v2, d2), v1);
        let en = vec3::norm(e);
        if en < 1e-12 {
            continue;
        }
        let r_cam = vec3::complete_frame(vec3::scale(e, 1.0 / en));
        let ey = [r_cam[0][1], r_cam[1][1], r_cam[2][1]];
        let ez = [r_cam[0][2], r_cam[1][2], r_cam[2][2]];
        let ex = [r_cam[0][0], r_cam[1][0], r_cam[2][0]];

        // remaining rotation angle about the edge plus translation, linear
        // in (cos, sin, t)
        let mut a = Matrix::zeros(2 * n, 5);
        let mut b = vec![0.0; 2 * n];
        for (i, (c, g)) in corr.iter().zip(&model_pts).enumerate() {
            let ak = vec3::add(vec3::scale(ey, g[1]), vec3::scale(ez, g[2]));
            let bk = vec3::sub(vec3::scale(ez, g[1]), vec3::scale(ey, g[2]));
            let dk = vec3::scale(ex, g[0]);
            let (u, v) = (c.image[0], c.image[1]);
            a[(2 * i, 0)] = ak[0] - u * ak[2];
            a[(2 * i, 1)] = bk[0] - u * bk[2];
            a[(2 * i, 2)] = 1.0;
            a[(2 * i, 4)] = -u;
            b[2 * i] = u * dk[2] - dk[0];
            a[(2 * i + 1, 0)] = ak[1] - v * ak[2];
            a[(2 * i + 1, 1)] = bk[1] - v * bk[2];
            a[(2 * i + 1, 3)] = 1.0;
            a[(2 * i + 1, 4)] = -v;
            b[2 * i + 1] = v * dk[2] - dk[1];
        }
        let sol = lstsq(&a, &b);
        let (c, s) = (sol[0], sol[1]);
        let norm = (c * c + s * s).sqrt();
        if norm < 1e-12 {
            continue;
        }
        let theta = s.atan2(c);
        let (st, ct) = theta.sin_cos();
        let rot_x = [[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]];
        let r_full = vec3::mat_mul(
            &vec3::mat_mul(&r_cam, &rot_x),
            &vec3::transpose(&r_model),
        );
        let Ok(rotation) = RotationMatrix::try_new(r_full) else {
            continue;
        };
        // translation re-solved against the original world points
        let centered: Vec<Correspondence> = corr
            .iter()
            .map(|c| Correspondence {
                world: vec3::sub(c.world, p0),
                image: c.image,
            })
            .collect();
        let t_cen = translation_for(&rotation, &centered);
        let t = vec3::sub(t_cen, rotation.apply(p0));
        let Some(rms) = reproj_rms_norm(&rotation, t, corr) else {
            continue;
        };
        let cand = PnPSolution {
            rotation,
            translation: t,
            reproj_rms_mm: rms * h_ap_mm,
            method: SolverKind::Rpnp,
            refined: false,
        };
        if best
            .as_ref()
            .map(|bst| cand.reproj_rms_mm < bst.reproj_rms_mm)
            .unwrap_or(true)
        {
            best = Some(cand);
        }
    }
    best.ok_or(PnpError::NoValidSolution)
}
