//! Direct linear transform homography with isotropic normalization.

use super::PnpError;
use crate::numerics::vec3::Mat3;
use crate::numerics::{sym_eig, Matrix};

/// Isotropic (centroid + sqrt(2) mean distance) normalizing similarity.
fn normalize_points(pts: &[[f64; 2]]) -> (Vec<[f64; 2]>, [f64; 3]) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    let out = pts
        .iter()
        .map(|p| [s * (p[0] - cx), s * (p[1] - cy)])
        .collect();
    (out, [s, cx, cy])
}

fn collinearity_check(pts: &[[f64; 2]]) -> Result<(), PnpError> {
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let n = pts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let ax = pts[j][0] - pts[i][0];
                let ay = pts[j][1] - pts[i][1];
                let bx = pts[k][0] - pts[i][0];
                let by = pts[k][1] - pts[i][1];
                if (ax * by - ay * bx).abs() <= 1e-10 * scale * scale {
                    return Err(PnpError::Degenerate(format!(
                        "world points {i}, {j}, {k} are collinear"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Homography mapping plane points to normalized image points, up to scale,
/// with minimal algebraic residual. Normalized so H[2][2] = 1 when that
/// entry is not vanishing.
pub fn homography_dlt(world_plane: &[[f64; 2]], image: &[[f64; 2]]) -> Result<Mat3, PnpError> {
    if world_plane.len() < 4 || world_plane.len() != image.len() {
        return Err(PnpError::TooFewPoints {
            need: 4,
            got: world_plane.len().min(image.len()),
        });
    }
    collinearity_check(world_plane)?;

    let (wn, tw) = normalize_points(world_plane);
    let (im, ti) = normalize_points(image);
    let n = wn.len();
    let mut a = Matrix::zeros(2 * n, 9);
    for k in 0..n {
        let [x, y] = wn[k];
        let [u, v] = im[k];
        let r0 = 2 * k;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        let r1 = r0 + 1;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }
    let (_, vectors) = sym_eig(&a.ata()).expect("normal matrix is symmetric");
    let h = vectors.col(0);
    let hn = [
        [h[0], h[1], h[2]],
        [h[3], h[4], h[5]],
        [h[6], h[7], h[8]],
    ];

    // denormalize: H = Ti^-1 * Hn * Tw
    let [sw, cwx, cwy] = tw;
    let [si, cix, ciy] = ti;
    let tw_m = [[sw, 0.0, -sw * cwx], [0.0, sw, -sw * cwy], [0.0, 0.0, 1.0]];
    let ti_inv = [
        [1.0 / si, 0.0, cix],
        [0.0, 1.0 / si, ciy],
        [0.0, 0.0, 1.0],
    ];
    let mut full = crate::numerics::vec3::mat_mul(&ti_inv, &crate::numerics::vec3::mat_mul(&hn, &tw_m));
    if full[2][2].abs() > 1e-12 {
        let g = full[2][2];
        for row in &mut full {
            for v in row.iter_mut() {
                *v /= g;
            }
        }
    }
    Ok(full)
}

/// Applies a homography to a 2D point (homogeneous division included).
pub fn apply_homography(h: &Mat3, p: [f64; 2]) -> [f64; 2] {
    let w = h[2][0] * p[0] + h[2][1] * p[1] + h[2][2];
    [
        (h[0][0] * p[0] + h[0][1] * p[1] + h[0][2]) / w,
        (h[1][0] * p[0] + h[1][1] * p[1] + h[1][2]) / w,
    ]
}
