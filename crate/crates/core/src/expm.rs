//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).
//!
//! Diagonal Padé approximants satisfy `r(-X) = r(X)^{-1}`, so for skew
//! symmetric `X` the result is orthogonal up to rounding in the final solve.

use nalgebra::DMatrix;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(V - U)^{-1} (V + U)`.
fn pade_quotient(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular within the theta bounds")
}

/// Padé approximant of degree `m <= 9` using powers of `a`.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> DMatrix<f64> {
    let k = a.nrows();
    let eye = DMatrix::<f64>::identity(k, k);
    let a2 = a * a;
    let mut power = eye.clone();
    let mut u_inner = DMatrix::zeros(k, k);
    let mut v = DMatrix::zeros(k, k);
    for pair in b.chunks(2) {
        v += &power * pair[0];
        u_inner += &power * pair[1];
        power = &power * &a2;
    }
    pade_quotient(a * u_inner, v)
}

fn pade_13(a: &DMatrix<f64>) -> DMatrix<f64> {
    let b = &B13;
    let k = a.nrows();
    let eye = DMatrix::<f64>::identity(k, k);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &eye * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &eye * b[0];
    pade_quotient(u, v)
}

/// `e^A` for a square matrix.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "exponential of a non-square matrix");
    let k = a.nrows();
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = norm1(a);
    for (m, theta) in THETA {
        if norm <= theta {
            return match m {
                3 => pade_low(a, &B3),
                5 => pade_low(a, &B5),
                7 => pade_low(a, &B7),
                _ => pade_low(a, &B9),
            };
        }
    }
    let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = a * 2f64.powi(-squarings);
    let mut r = pade_13(&scaled);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn rotation_closed_form() {
        for &t in &[1e-4, 0.1, 1.0, 3.0, 20.0, 1000.0] {
            let a = dmatrix![0.0, t; -t, 0.0];
            let e = expm(&a);
            let expected = dmatrix![t.cos(), t.sin(); -t.sin(), t.cos()];
            assert!(max_diff(&e, &expected) < 1e-13 * t.max(1.0), "t = {t}");
        }
    }

    #[test]
    fn diagonal_and_nilpotent() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[-2.0, 0.0, 0.5, 7.0]));
        let e = expm(&d);
        for (i, v) in [-2.0f64, 0.0, 0.5, 7.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() < 1e-13 * v.exp());
        }
        let n = dmatrix![0.0, 1.0, 2.0; 0.0, 0.0, 3.0; 0.0, 0.0, 0.0];
        // I + N + N^2/2
        let expected = dmatrix![1.0, 1.0, 3.5; 0.0, 1.0, 3.0; 0.0, 0.0, 1.0];
        assert!(max_diff(&expm(&n), &expected) < 1e-14);
    }

    #[test]
    fn matches_nalgebra_exponential() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for &scale in &[1e-3, 0.2, 1.0, 4.0, 15.0] {
            for k in 1..=8 {
                let a = DMatrix::from_fn(k, k, |_, _| next() * scale);
                let ours = expm(&a);
                let theirs = a.clone().exp();
                let rel = max_diff(&ours, &theirs) / theirs.amax().max(1.0);
                assert!(rel < 1e-11, "k = {k}, scale = {scale}, rel = {rel}");
            }
        }
    }

    #[test]
    fn skew_exponential_is_orthogonal() {
        let a = dmatrix![
            0.0, 1.3, -0.4, 2.0;
            -1.3, 0.0, 0.7, -0.2;
            0.4, -0.7, 0.0, 1.1;
            -2.0, 0.2, -1.1, 0.0
        ];
        for &t in &[0.1, 1.0, 10.0] {
            let e = expm(&(&a * t));
            let gram = e.transpose() * &e;
            assert!(max_diff(&gram, &DMatrix::identity(4, 4)) < 1e-14 * t.max(1.0) * 10.0);
        }
    }
}
