//! Dense complex LU factorization with partial pivoting.
//!
//! Matrices are row-major slices of length `n * n`.

use num_complex::Complex64;

/// Pivots smaller than this fraction of their row's original scale are
/// treated as a breakdown.
pub const PIVOT_RELATIVE_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakdown {
    pub pivot: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<Complex64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors `a` in place of a copy. `a` must hold `n * n` entries.
    pub fn factor(a: &[Complex64], n: usize) -> Result<Self, Breakdown> {
        let mut lu = a.to_vec();
        let mut perm = Vec::new();
        factor_in_place(&mut lu, n, &mut perm)?;
        Ok(Self { n, lu, perm })
    }

    /// Reuses the storage of `self` for a new matrix of the same order.
    pub fn refactor(&mut self, a: &[Complex64]) -> Result<(), Breakdown> {
        self.lu.copy_from_slice(a);
        factor_in_place(&mut self.lu, self.n, &mut self.perm)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // Apply the row permutation recorded during factorization.
        for (k, &p) in self.perm.iter().enumerate() {
            if p != k {
                b.swap(k, p);
            }
        }
        for i in 1..n {
            let row = &self.lu[i * n..i * n + i];
            let mut acc = b[i];
            for (l, x) in row.iter().zip(&b[..i]) {
                acc -= l * x;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut acc = b[i];
            for (u, x) in row[i + 1..].iter().zip(&b[i + 1..]) {
                acc -= u * x;
            }
            b[i] = acc / row[i];
        }
    }
}

fn factor_in_place(a: &mut [Complex64], n: usize, perm: &mut Vec<usize>) -> Result<(), Breakdown> {
    assert_eq!(a.len(), n * n, "matrix storage does not match order {n}");
    perm.clear();
    let mut scale: Vec<f64> = a
        .chunks_exact(n)
        .map(|row| row.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .collect();

    for k in 0..n {
        let (mut p, mut best) = (k, a[k * n + k].norm());
        for i in k + 1..n {
            let v = a[i * n + k].norm();
            if v > best {
                p = i;
                best = v;
            }
        }
        perm.push(p);
        if p != k {
            let (head, tail) = a.split_at_mut(p * n);
            head[k * n..(k + 1) * n].swap_with_slice(&mut tail[..n]);
            scale.swap(k, p);
        }
        let threshold = PIVOT_RELATIVE_FLOOR * scale[k];
        if !(best > threshold) {
            return Err(Breakdown {
                pivot: best,
                threshold,
            });
        }

        let (upper, lower) = a.split_at_mut((k + 1) * n);
        let pivot_row = &upper[k * n..];
        let inv = pivot_row[k].inv();
        for row in lower.chunks_exact_mut(n) {
            let l = row[k] * inv;
            row[k] = l;
            if l == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (x, u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                *x -= l * u;
            }
        }
    }
    Ok(())
}

/// `max_i |(A x - b)_i|` for row-major `A`.
pub fn residual_inf(a: &[Complex64], x: &[Complex64], b: &[Complex64]) -> f64 {
    let n = b.len();
    a.chunks_exact(n)
        .zip(b)
        .map(|(row, bi)| {
            let ax: Complex64 = row.iter().zip(x).map(|(r, xi)| r * xi).sum();
            (ax - bi).norm()
        })
        .fold(0.0, f64::max)
}
