//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    if m.nrows() == 2 && m.ncols() == 2 {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let t = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
        return ((t + disc) / 2.0).sqrt();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Smallest singular value.
pub fn min_singular(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix not invertible", m.nrows(), m.ncols())))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("inverse has non-finite entries".into()));
    }
    Ok(inv)
}

/// Eigenvalues of a real square matrix, sorted by decreasing modulus.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = match m.nrows() {
        0 => Vec::new(),
        1 => vec![Complex::new(m[(0, 0)], 0.0)],
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let tr = a + d;
            let det = a * d - b * c;
            let disc = tr * tr / 4.0 - det;
            if disc >= 0.0 {
                let r = disc.sqrt();
                // avoid cancellation in the smaller root
                let big = tr / 2.0 + r.copysign(tr);
                let small = if big != 0.0 { det / big } else { tr / 2.0 - r.copysign(tr) };
                vec![Complex::new(big, 0.0), Complex::new(small, 0.0)]
            } else {
                let im = (-disc).sqrt();
                vec![Complex::new(tr / 2.0, im), Complex::new(tr / 2.0, -im)]
            }
        }
        _ => m.complex_eigenvalues().iter().copied().collect(),
    };
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    ev
}

/// Exact determinant of an integer matrix (fraction-free Bareiss elimination).
pub fn int_det(a: &[Vec<i64>]) -> Result<i128> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::param("matrix", "must be square"));
    }
    if n == 0 {
        return Ok(1);
    }
    let mut m: Vec<Vec<i128>> = a
        .iter()
        .map(|r| r.iter().map(|&v| v as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| m[i][k] != 0) else {
                return Ok(0);
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = m[i][j]
                    .checked_mul(m[k][k])
                    .and_then(|x| x.checked_sub(m[i][k].checked_mul(m[k][j])?))
                    .ok_or_else(|| Error::param("matrix", "entries too large"))?;
                m[i][j] = v / prev;
            }
        }
        prev = m[k][k];
    }
    Ok(sign * m[n - 1][n - 1])
}

pub fn int_to_f64(a: &[Vec<i64>]) -> DMatrix<f64> {
    let n = a.len();
    let c = a.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, c, |i, j| a[i][j] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bareiss_matches_cofactor_expansion() {
        assert_eq!(int_det(&[vec![2, 1], vec![1, 1]]).unwrap(), 1);
        assert_eq!(int_det(&[vec![0, 1], vec![1, 0]]).unwrap(), -1);
        let m = vec![vec![2, -3, 1], vec![2, 0, -1], vec![1, 4, 5]];
        // 2(0+4) +3(10+1) +1(8-0) = 49
        assert_eq!(int_det(&m).unwrap(), 49);
        assert_eq!(int_det(&[vec![1, 2], vec![2, 4]]).unwrap(), 0);
    }

    #[test]
    fn cat_map_eigenvalues() {
        let m = int_to_f64(&[vec![2, 1], vec![1, 1]]);
        let ev = eigenvalues(&m);
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((ev[0].re - phi2).abs() < 1e-14);
        assert!((ev[1].re - 1.0 / phi2).abs() < 1e-14);
    }

    #[test]
    fn rotation_eigenvalues_are_complex() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5]);
        let ev = eigenvalues(&m);
        assert!((ev[0].norm() - 1.0).abs() < 1e-12);
        assert!(ev[0].im.abs() > 0.9);
        assert!((ev[2].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_norm_matches_svd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let svd = m.clone().singular_values().max();
        assert!((op_norm(&m) - svd).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((op_norm(&m) - 4.0).abs() < 1e-12);
        assert!((min_singular(&m) - 3.0).abs() < 1e-12);
    }
}
