//! Dense complex linear algebra on tiny n x n blocks (n <= 2 in practice).
//!
//! Matrices are row-major slices of length n*n, vectors slices of length n.
//! Everything is allocation-free so the per-site hot loops can use it.

use num_complex::Complex64 as C;

/// out = a * b.
pub fn mat_mul(a: &[C], b: &[C], n: usize, out: &mut [C]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = C::new(0.0, 0.0);
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

/// out = a * x.
pub fn mat_vec(a: &[C], x: &[C], n: usize, out: &mut [C]) {
    for i in 0..n {
        let mut acc = C::new(0.0, 0.0);
        for k in 0..n {
            acc += a[i * n + k] * x[k];
        }
        out[i] = acc;
    }
}

/// out = x ⊗ y* (rank-one matrix x y†).
pub fn outer(x: &[C], y: &[C], n: usize, out: &mut [C]) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = x[i] * y[j].conj();
        }
    }
}

/// out = [a, b] = a b - b a.
pub fn commutator(a: &[C], b: &[C], n: usize, out: &mut [C]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = C::new(0.0, 0.0);
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j] - b[i * n + k] * a[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

/// out = a†.
pub fn herm_conj(a: &[C], n: usize, out: &mut [C]) {
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = a[j * n + i].conj();
        }
    }
}

/// In-place anti-Hermitian projection a <- (a - a†)/2.
pub fn anti_herm_project(a: &mut [C], n: usize) {
    for i in 0..n {
        for j in i..n {
            let upper = a[i * n + j];
            let lower = a[j * n + i];
            let p = (upper - lower.conj()) * 0.5;
            a[i * n + j] = p;
            a[j * n + i] = -p.conj();
        }
    }
}

/// Re tr(a b†), the real Frobenius pairing; also valid for vectors.
pub fn frob_re(a: &[C], b: &[C]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Squared Frobenius norm.
pub fn frob_sq(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// tr(a).
pub fn trace(a: &[C], n: usize) -> C {
    (0..n).map(|i| a[i * n + i]).sum()
}


/// Inverse of an n x n matrix for n <= 2. Returns `None` if singular.
pub fn inverse(a: &[C], n: usize, out: &mut [C]) -> Option<()> {
    match n {
        1 => {
            if a[0].norm_sqr() < 1e-300 {
                return None;
            }
            out[0] = C::new(1.0, 0.0) / a[0];
            Some(())
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            if det.norm_sqr() < 1e-300 {
                return None;
            }
            let inv = C::new(1.0, 0.0) / det;
            out[0] = a[3] * inv;
            out[1] = -a[1] * inv;
            out[2] = -a[2] * inv;
            out[3] = a[0] * inv;
            Some(())
        }
        _ => unreachable!("rank above 2 is not supported"),
    }
}

/// Max entrywise deviation of g†g from the identity.
pub fn unitarity_defect(g: &[C], n: usize) -> f64 {
    let mut gtg = [C::new(0.0, 0.0); 4];
    let mut gh = [C::new(0.0, 0.0); 4];
    herm_conj(g, n, &mut gh[..n * n]);
    mat_mul(&gh[..n * n], g, n, &mut gtg[..n * n]);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
            worst = worst.max((gtg[i * n + j] - target).norm());
        }
    }
    worst
}
