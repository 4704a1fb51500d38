//! Small complex-vector helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Hermitian inner product `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn scale(a: &[Complex64], s: f64) -> Vec<Complex64> {
    a.iter().map(|z| z * s).collect()
}

/// Unit vector along `a`; `None` for (numerically) zero vectors.
pub fn normalized(a: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = norm(a);
    if n < 1e-300 {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

/// Leading left singular vector of the matrix whose columns are `columns`,
/// i.e. the top eigenvector of `sum_k h_k h_k^H`.
///
/// Ties between the top two singular values break deterministically to the
/// first column's direction, and the global phase is fixed by making the
/// largest-magnitude entry real positive.
pub fn leading_left_singular(columns: &[&[Complex64]]) -> Vec<Complex64> {
    let nt = columns[0].len();
    let mut gram = DMatrix::<Complex64>::zeros(nt, nt);
    for col in columns {
        for i in 0..nt {
            for j in 0..nt {
                gram[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let top = order[0];
    let tied = nt > 1 && {
        let second = order[1];
        let lead = eig.eigenvalues[top].max(1e-300);
        (eig.eigenvalues[top] - eig.eigenvalues[second]).abs() <= 1e-9 * lead
    };
    let vec: Vec<Complex64> = if tied {
        match normalized(columns[0]) {
            Some(v) => v,
            None => eig.eigenvectors.column(top).iter().copied().collect(),
        }
    } else {
        eig.eigenvectors.column(top).iter().copied().collect()
    };
    fix_phase(vec)
}

fn fix_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let lead = v
        .iter()
        .cloned()
        .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
        .unwrap_or(Complex64::new(1.0, 0.0));
    if lead.norm() > 1e-300 {
        let rot = lead.conj() / lead.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_singular_vector_of_one_column_is_its_direction() {
        let h = vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, -2.0)];
        let v = leading_left_singular(&[&h]);
        // Same ray: |<v, h>| = ||h||.
        assert!((inner(&v, &h).norm() - norm(&h)).abs() < 1e-9);
        assert!((norm(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_column_wins() {
        let a = vec![Complex64::new(3.0, 0.0), Complex64::ZERO];
        let b = vec![Complex64::ZERO, Complex64::new(1.0, 0.0)];
        let v = leading_left_singular(&[&a, &b]);
        assert!(v[0].norm() > 0.99);
    }

    #[test]
    fn orthonormal_tie_breaks_to_first_column() {
        let a = vec![Complex64::new(1.0, 0.0), Complex64::ZERO];
        let b = vec![Complex64::ZERO, Complex64::new(1.0, 0.0)];
        let v = leading_left_singular(&[&a, &b]);
        assert!((inner(&v, &a).norm() - 1.0).abs() < 1e-9);
    }
}
