//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = m.nrows();
    let sym = hermitian_part(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    (values, vectors)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.abs()))
}

/// Spectral (operator 2-) norm.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    if hermiticity_defect(m) <= 1e-14 * scale {
        return largest_magnitude(&hermitian_part(m));
    }
    let anti = m * (-I);
    if hermiticity_defect(&anti) <= 1e-14 * scale {
        return largest_magnitude(&hermitian_part(&anti));
    }
    let gram = m.adjoint() * m;
    largest_magnitude(&hermitian_part(&gram)).sqrt()
}

/// Largest `|λ|` of a Hermitian matrix; eigenvalues only.
fn largest_magnitude(h: &CMatrix) -> f64 {
    h.clone().symmetric_eigenvalues().iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

/// `exp(-i h dt)` for Hermitian `h`.
pub fn unitary_exp(h: &CMatrix, dt: f64) -> CMatrix {
    let (e, u) = hermitian_eigen(h);
    let mut scaled = u.clone();
    for (j, &ej) in e.iter().enumerate() {
        let phase = C64::from_polar(1.0, -ej * dt);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    scaled * u.adjoint()
}

/// Nearest unitary in Frobenius norm (polar factor).
pub fn unitarize(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    u * vt
}

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Least-squares fit `log y = slope * log x + intercept`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_exp_of_pauli_x() {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let u = unitary_exp(&h, 0.3);
        assert!((u[(0, 0)] - c(0.3f64.cos())).norm() < 1e-14);
        assert!((u[(0, 1)] - C64::new(0.0, -0.3f64.sin())).norm() < 1e-14);
    }

    #[test]
    fn spectral_norm_of_nilpotent() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0), c(2.0), c(0.0), c(0.0)]);
        assert!((spectral_norm(&a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = [1e-1, 1e-2, 1e-3];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        let (s, b) = loglog_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12);
        assert!((b - 3f64.ln()).abs() < 1e-10);
    }
}
