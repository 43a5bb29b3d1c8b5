//! Small dense kernels on row-major `n × n` buffers.

/// Dot product with four independent accumulators so the loop vectorises.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// In-place lower Cholesky factor of a symmetric matrix; the strict upper
/// triangle is zeroed. Returns `false` if a pivot is not positive.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let (_, rest) = a.split_at_mut(j * n);
        let (row_j, below) = rest.split_at_mut(n);
        let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        row_j[j] = ljj;
        for v in row_j[j + 1..].iter_mut() {
            *v = 0.0;
        }
        let lj = &row_j[..j];
        for row_i in below.chunks_exact_mut(n) {
            let s = row_i[j] - dot(&row_i[..j], lj);
            row_i[j] = s / ljj;
        }
    }
    true
}

/// Solves `L v = b` in place for lower-triangular `L`.
#[inline]
pub fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s = b[i] - dot(row, &b[..i]);
        b[i] = s / l[i * n + i];
    }
}

/// Solves `Lᵀ v = b` in place for lower-triangular `L`.
pub fn backward_solve_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// `(L Lᵀ)⁻¹` from a lower Cholesky factor, full symmetric storage.
pub fn inverse_from_cholesky(l: &[f64], n: usize) -> Vec<f64> {
    // L⁻¹ column by column, stored row-major and lower-triangular
    let mut linv = vec![0.0; n * n];
    for i in 0..n {
        linv[i * n + i] = 1.0 / l[i * n + i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * n + k] * linv[k * n + j];
            }
            linv[i * n + j] = -s / l[i * n + i];
        }
    }
    // transpose for contiguous column access: t[j][k] = linv[k][j]
    let mut t = vec![0.0; n * n];
    for k in 0..n {
        for j in 0..=k {
            t[j * n + k] = linv[k * n + j];
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            // (L⁻ᵀ L⁻¹)_ij = Σ_k linv[k][i] linv[k][j], k ≥ max(i, j) = i
            let v = dot(&t[i * n + i..(i + 1) * n], &t[j * n + i..(j + 1) * n]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] =
                    (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
            }
        }
        a
    }

    #[test]
    fn cholesky_reconstructs_and_inverts() {
        for n in [1usize, 2, 5, 13] {
            let a = random_spd(n, n as u64);
            let mut l = a.clone();
            assert!(cholesky_in_place(&mut l, n));
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                    assert!((v - a[i * n + j]).abs() < 1e-10);
                }
            }
            let inv = inverse_from_cholesky(&l, n);
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
                }
            }
            let mut b: Vec<f64> = (0..n).map(|i| i as f64 - 1.0).collect();
            let orig = b.clone();
            forward_solve(&l, n, &mut b);
            backward_solve_transposed(&l, n, &mut b);
            for i in 0..n {
                let v: f64 = (0..n).map(|k| a[i * n + k] * b[k]).sum();
                assert!((v - orig[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_in_place(&mut a, 2));
    }
}
