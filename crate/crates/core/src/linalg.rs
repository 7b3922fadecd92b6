//! Small fixed-size helpers on top of nalgebra.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

pub type V3 = Vector3<f64>;
pub type M3 = Matrix3<f64>;
pub type C64 = Complex64;
pub type CV3 = Vector3<Complex64>;
pub type CM3 = Matrix3<Complex64>;

/// Rank-3 tensor `t[i][j][k]`.
pub type Tensor3 = [[[f64; 3]; 3]; 3];

pub const ZERO_T3: Tensor3 = [[[0.0; 3]; 3]; 3];

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Levi-Civita symbol.
pub fn levi(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub fn to_complex(m: &M3) -> CM3 {
    m.map(|x| C64::new(x, 0.0))
}

pub fn cvec(v: &V3) -> CV3 {
    v.map(|x| C64::new(x, 0.0))
}

pub fn re_part(m: &CM3) -> M3 {
    m.map(|z| z.re)
}

pub fn im_part(m: &CM3) -> M3 {
    m.map(|z| z.im)
}

pub fn re_vec(v: &CV3) -> V3 {
    v.map(|z| z.re)
}

/// Bilinear dot product, no conjugation.
pub fn bdot(a: &CV3, b: &CV3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `a · conj(b)`.
pub fn hdot(a: &CV3, b: &CV3) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

pub fn ccross(a: &CV3, b: &CV3) -> CV3 {
    CV3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

pub fn conj_vec(v: &CV3) -> CV3 {
    v.map(|z| z.conj())
}

pub fn symmetrize(m: &M3) -> M3 {
    (m + m.transpose()) * 0.5
}

pub fn csymmetrize(m: &CM3) -> CM3 {
    (m + m.transpose()) * C64::new(0.5, 0.0)
}

pub fn min_sym_eig(m: &M3) -> f64 {
    let e = SymmetricEigen::new(symmetrize(m));
    e.eigenvalues.min()
}

pub fn is_symmetric(m: &M3, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

/// Packs the upper triangle as (11, 12, 13, 22, 23, 33).
pub fn sym6(m: &M3) -> [f64; 6] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
}

pub fn from_sym6(v: &[f64]) -> M3 {
    M3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5])
}

pub fn csym6(m: &CM3) -> [C64; 6] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]
}

/// Infinity norm (max absolute row sum) of a complex matrix.
pub fn cnorm_inf(m: &CM3) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn cmax_abs(m: &CM3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Contracts `t_ijk a_j b_k`.
pub fn t3_contract2(t: &Tensor3, a: &M3) -> V3 {
    let mut out = V3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i] += t[i][j][k] * a[(j, k)];
            }
        }
    }
    out
}

pub fn t3_max_abs(t: &Tensor3) -> f64 {
    t.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Orthonormal frame as columns of a matrix together with eigenvalues, ascending.
pub fn sym_eigen(m: &M3) -> (V3, M3) {
    let e = SymmetricEigen::new(symmetrize(m));
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = V3::new(e.eigenvalues[idx[0]], e.eigenvalues[idx[1]], e.eigenvalues[idx[2]]);
    let mut vecs = M3::zeros();
    for (c, &k) in idx.iter().enumerate() {
        vecs.set_column(c, &e.eigenvectors.column(k));
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levi_civita_cross() {
        let a = V3::new(0.3, -1.0, 2.0);
        let b = V3::new(1.5, 0.2, -0.7);
        let cr = a.cross(&b);
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    s += levi(i, j, k) * a[j] * b[k];
                }
            }
            assert!((s - cr[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn sym6_roundtrip() {
        let m = M3::new(1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0);
        assert_eq!(from_sym6(&sym6(&m)), m);
    }

    #[test]
    fn eigen_sorted() {
        let m = M3::from_diagonal(&V3::new(3.0, 1.0, 2.0));
        let (vals, vecs) = sym_eigen(&m);
        assert_eq!(vals, V3::new(1.0, 2.0, 3.0));
        assert!((vecs.column(0).abs() - V3::new(0.0, 1.0, 0.0)).norm() < 1e-14);
    }
}
