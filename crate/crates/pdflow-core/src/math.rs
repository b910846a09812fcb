use crate::{Matrix, Vector};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn norm(v: &Vector) -> f64 {
    sqrt(v.dot(v))
}


pub fn dist(a: &Vector, b: &Vector) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        s += (x - y) * (x - y);
    }
    sqrt(s)
}

pub fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| if abs(*x) > m { abs(*x) } else { m })
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn sym_eigen(m: &Matrix) -> (Vector, Matrix) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = Vector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Matrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Minimum-norm solution of a symmetric system through its eigendecomposition.
pub fn sym_pinv_solve(m: &Matrix, rhs: &Vector, rel_cut: f64) -> Vector {
    let (vals, vecs) = sym_eigen(m);
    let top = vals.iter().fold(0.0f64, |a, v| if abs(*v) > a { abs(*v) } else { a });
    let cut = rel_cut * if top > 0.0 { top } else { 1.0 };
    let c = vecs.transpose() * rhs;
    let mut w = Vector::zeros(c.len());
    for i in 0..c.len() {
        if abs(vals[i]) > cut {
            w[i] = c[i] / vals[i];
        }
    }
    vecs * w
}
