//! Permutation-expansion determinant, kept as an independent oracle for the
//! factorization-based determinant.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dimension the expansion accepts (`10! = 3 628 800` terms).
pub const LEIBNIZ_CAP: usize = 10;

/// One nonzero term `sgn(sigma) * prod_w A[w, sigma(w)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeibnizTerm {
    pub permutation: Vec<usize>,
    pub sign: i8,
    pub product: f64,
}

/// Number of pairs `w < v` with `perm[w] > perm[v]`.
pub fn inversions(perm: &[usize]) -> usize {
    let mut count = 0;
    for w in 0..perm.len() {
        for v in w + 1..perm.len() {
            if perm[w] > perm[v] {
                count += 1;
            }
        }
    }
    count
}

/// `(-1)^{inversions}`.
pub fn permutation_sign(perm: &[usize]) -> i8 {
    if inversions(perm) % 2 == 0 {
        1
    } else {
        -1
    }
}

fn check(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidGame(format!("matrix {:?} is not square", a.shape())));
    }
    if a.nrows() > LEIBNIZ_CAP {
        return Err(Error::DimensionCap {
            dim: a.nrows(),
            cap: LEIBNIZ_CAP,
        });
    }
    Ok(())
}

/// Visits the permutations of `0..m` in lexicographic order, skipping any
/// branch that has already picked a zero entry. The inversion count is
/// built incrementally: placing column `c` at row `w` adds one inversion
/// per column larger than `c` already used by an earlier row.
fn expand(a: &DMatrix<f64>, mut visit: impl FnMut(&[usize], usize, f64)) {
    fn go(
        a: &DMatrix<f64>,
        row: usize,
        used: &mut [bool],
        perm: &mut Vec<usize>,
        inv: usize,
        prod: f64,
        visit: &mut dyn FnMut(&[usize], usize, f64),
    ) {
        let m = a.nrows();
        if row == m {
            visit(perm, inv, prod);
            return;
        }
        for col in 0..m {
            if used[col] {
                continue;
            }
            let entry = a[(row, col)];
            if entry == 0.0 {
                continue;
            }
            let added = used[col + 1..].iter().filter(|&&u| u).count();
            used[col] = true;
            perm.push(col);
            go(a, row + 1, used, perm, inv + added, prod * entry, visit);
            perm.pop();
            used[col] = false;
        }
    }
    let m = a.nrows();
    let mut used = vec![false; m];
    let mut perm = Vec::with_capacity(m);
    go(a, 0, &mut used, &mut perm, 0, 1.0, &mut visit);
}

/// Every permutation whose product is nonzero, in lexicographic order.
pub fn leibniz_terms(a: &DMatrix<f64>) -> Result<Vec<LeibnizTerm>> {
    check(a)?;
    let mut terms = Vec::new();
    expand(a, |perm, inv, prod| {
        terms.push(LeibnizTerm {
            permutation: perm.to_vec(),
            sign: if inv % 2 == 0 { 1 } else { -1 },
            product: prod,
        })
    });
    Ok(terms)
}

/// `det(A) = sum_sigma sgn(sigma) prod_w A[w, sigma(w)]` for `m <= 10`.
pub fn leibniz_det(a: &DMatrix<f64>) -> Result<f64> {
    check(a)?;
    let mut det = 0.0;
    expand(a, |_, inv, prod| {
        if inv % 2 == 0 {
            det += prod;
        } else {
            det -= prod;
        }
    });
    Ok(det)
}
