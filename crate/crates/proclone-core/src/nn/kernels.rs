//! Register-blocked f32 matrix kernels.
//!
//! Three accumulate variants cover every product the layers need:
//!
//! - [`gemm_nn`]:  C[m][n] += sum_k A[m][k] * B[k][n]
//! - [`gemm_nt`]:  C[m][n] += sum_p A[m][p] * B[n][p]
//! - [`gemm_tn`]:  C[i][j] += sum_b A[b][i] * B[b][j]
//!
//! All matrices are dense row-major slices. When the build target has
//! AVX2+FMA (the workspace builds with `target-cpu=native`), explicit
//! intrinsic microkernels run; otherwise a portable blocked fallback does.
//! Within one build, summation order and rounding are fixed, so results
//! are bitwise reproducible run to run.

/// C[m][n] += sum_k A[m][k] * B[k][n]. A is m x k, B is k x n, C is m x n.
pub fn gemm_nn(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    #[cfg(all(target_arch = "x86_64", target_feature = "avx2", target_feature = "fma"))]
    {
        fma::gemm_nn(c, a, b, m, k, n);
        return;
    }
    #[allow(unreachable_code)]
    portable::gemm_nn(c, a, b, m, k, n)
}

/// C[m][n] += sum_p A[m][p] * B[n][p]. A is m x p, B is n x p, C is m x n.
pub fn gemm_nt(c: &mut [f32], a: &[f32], b: &[f32], m: usize, p: usize, n: usize) {
    debug_assert_eq!(a.len(), m * p);
    debug_assert_eq!(b.len(), n * p);
    debug_assert_eq!(c.len(), m * n);
    #[cfg(all(target_arch = "x86_64", target_feature = "avx2", target_feature = "fma"))]
    {
        fma::gemm_nt(c, a, b, m, p, n);
        return;
    }
    #[allow(unreachable_code)]
    portable::gemm_nt(c, a, b, m, p, n)
}

/// C[i][j] += sum_b A[b][i] * B[b][j]. A is bb x i, B is bb x j, C is i x j.
pub fn gemm_tn(c: &mut [f32], a: &[f32], b: &[f32], bb: usize, i: usize, j: usize) {
    debug_assert_eq!(a.len(), bb * i);
    debug_assert_eq!(b.len(), bb * j);
    debug_assert_eq!(c.len(), i * j);
    #[cfg(all(target_arch = "x86_64", target_feature = "avx2", target_feature = "fma"))]
    {
        fma::gemm_tn(c, a, b, bb, i, j);
        return;
    }
    #[allow(unreachable_code)]
    portable::gemm_tn(c, a, b, bb, i, j)
}

#[cfg(all(target_arch = "x86_64", target_feature = "avx2", target_feature = "fma"))]
mod fma {
    #[cfg(target_arch = "x86_64")]
    use core::arch::x86_64::*;

    /// 4x32 microkernel: 16 accumulator vectors stay in registers, four
    /// row broadcasts share each group of B loads.
    #[inline]
    unsafe fn nn_4x32(c: &mut [f32], a: &[f32], b: &[f32], m0: usize, n0: usize, k: usize, n: usize) {
        let mut acc = [[_mm256_setzero_ps(); 4]; 4];
        for kk in 0..k {
            let bp = b.as_ptr().add(kk * n + n0);
            let bv = [
                _mm256_loadu_ps(bp),
                _mm256_loadu_ps(bp.add(8)),
                _mm256_loadu_ps(bp.add(16)),
                _mm256_loadu_ps(bp.add(24)),
            ];
            for mi in 0..4 {
                let av = _mm256_set1_ps(*a.get_unchecked((m0 + mi) * k + kk));
                for ni in 0..4 {
                    acc[mi][ni] = _mm256_fmadd_ps(av, bv[ni], acc[mi][ni]);
                }
            }
        }
        for mi in 0..4 {
            let cp = c.as_mut_ptr().add((m0 + mi) * n + n0);
            for ni in 0..4 {
                let prev = _mm256_loadu_ps(cp.add(8 * ni));
                _mm256_storeu_ps(cp.add(8 * ni), _mm256_add_ps(prev, acc[mi][ni]));
            }
        }
    }

    /// Row-tail variant: mb < 4 rows, full 32-column block.
    #[inline]
    unsafe fn nn_mx32(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        m0: usize,
        mb: usize,
        n0: usize,
        k: usize,
        n: usize,
    ) {
        let mut acc = [[_mm256_setzero_ps(); 4]; 3];
        for kk in 0..k {
            let bp = b.as_ptr().add(kk * n + n0);
            let bv = [
                _mm256_loadu_ps(bp),
                _mm256_loadu_ps(bp.add(8)),
                _mm256_loadu_ps(bp.add(16)),
                _mm256_loadu_ps(bp.add(24)),
            ];
            for mi in 0..mb {
                let av = _mm256_set1_ps(*a.get_unchecked((m0 + mi) * k + kk));
                for ni in 0..4 {
                    acc[mi][ni] = _mm256_fmadd_ps(av, bv[ni], acc[mi][ni]);
                }
            }
        }
        for mi in 0..mb {
            let cp = c.as_mut_ptr().add((m0 + mi) * n + n0);
            for ni in 0..4 {
                let prev = _mm256_loadu_ps(cp.add(8 * ni));
                _mm256_storeu_ps(cp.add(8 * ni), _mm256_add_ps(prev, acc[mi][ni]));
            }
        }
    }

    pub fn gemm_nn(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
        let n_main = n - n % 32;
        unsafe {
            let mut m0 = 0;
            while m0 + 4 <= m {
                let mut n0 = 0;
                while n0 < n_main {
                    nn_4x32(c, a, b, m0, n0, k, n);
                    n0 += 32;
                }
                m0 += 4;
            }
            if m0 < m {
                let mut n0 = 0;
                while n0 < n_main {
                    nn_mx32(c, a, b, m0, m - m0, n0, k, n);
                    n0 += 32;
                }
            }
        }
        if n_main < n {
            super::portable::nn_edge(c, a, b, 0, m, n_main, n - n_main, k, n);
        }
    }

    pub fn gemm_nt(c: &mut [f32], a: &[f32], b: &[f32], m: usize, p: usize, n: usize) {
        let chunks = p / 8;
        unsafe {
            let mut n0 = 0;
            while n0 + 2 <= n {
                let b0p = b.as_ptr().add(n0 * p);
                let b1p = b.as_ptr().add((n0 + 1) * p);
                let mut m0 = 0;
                while m0 + 4 <= m {
                    let mut acc = [[_mm256_setzero_ps(); 2]; 4];
                    for ch in 0..chunks {
                        let off = ch * 8;
                        let bv0 = _mm256_loadu_ps(b0p.add(off));
                        let bv1 = _mm256_loadu_ps(b1p.add(off));
                        for mi in 0..4 {
                            let av = _mm256_loadu_ps(a.as_ptr().add((m0 + mi) * p + off));
                            acc[mi][0] = _mm256_fmadd_ps(av, bv0, acc[mi][0]);
                            acc[mi][1] = _mm256_fmadd_ps(av, bv1, acc[mi][1]);
                        }
                    }
                    for mi in 0..4 {
                        let mut s0 = hsum(acc[mi][0]);
                        let mut s1 = hsum(acc[mi][1]);
                        for pp in chunks * 8..p {
                            let av = *a.get_unchecked((m0 + mi) * p + pp);
                            s0 += av * *b.get_unchecked(n0 * p + pp);
                            s1 += av * *b.get_unchecked((n0 + 1) * p + pp);
                        }
                        *c.get_unchecked_mut((m0 + mi) * n + n0) += s0;
                        *c.get_unchecked_mut((m0 + mi) * n + n0 + 1) += s1;
                    }
                    m0 += 4;
                }
                for mi in m0..m {
                    dot_tail(c, a, b, mi, n0, p, n);
                    dot_tail(c, a, b, mi, n0 + 1, p, n);
                }
                n0 += 2;
            }
            if n0 < n {
                for mi in 0..m {
                    dot_tail(c, a, b, mi, n0, p, n);
                }
            }
        }
    }

    #[inline]
    unsafe fn dot_tail(c: &mut [f32], a: &[f32], b: &[f32], mi: usize, nn: usize, p: usize, n: usize) {
        let mut acc = _mm256_setzero_ps();
        let chunks = p / 8;
        for ch in 0..chunks {
            let off = ch * 8;
            let av = _mm256_loadu_ps(a.as_ptr().add(mi * p + off));
            let bv = _mm256_loadu_ps(b.as_ptr().add(nn * p + off));
            acc = _mm256_fmadd_ps(av, bv, acc);
        }
        let mut sum = hsum(acc);
        for pp in chunks * 8..p {
            sum += *a.get_unchecked(mi * p + pp) * *b.get_unchecked(nn * p + pp);
        }
        *c.get_unchecked_mut(mi * n + nn) += sum;
    }

    #[inline]
    unsafe fn hsum(v: __m256) -> f32 {
        let hi = _mm256_extractf128_ps(v, 1);
        let lo = _mm256_castps256_ps128(v);
        let s = _mm_add_ps(lo, hi);
        let s = _mm_add_ps(s, _mm_movehl_ps(s, s));
        let s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
        _mm_cvtss_f32(s)
    }

    pub fn gemm_tn(c: &mut [f32], a: &[f32], b: &[f32], bb: usize, i: usize, j: usize) {
        let j_main = j - j % 8;
        unsafe {
            let mut b0 = 0;
            while b0 + 8 <= bb {
                for ii in 0..i {
                    let mut av = [_mm256_setzero_ps(); 8];
                    for (l, v) in av.iter_mut().enumerate() {
                        *v = _mm256_set1_ps(*a.get_unchecked((b0 + l) * i + ii));
                    }
                    let crow = c.as_mut_ptr().add(ii * j);
                    let mut jj = 0;
                    while jj < j_main {
                        let mut acc = _mm256_loadu_ps(crow.add(jj));
                        for l in 0..8 {
                            let bv = _mm256_loadu_ps(b.as_ptr().add((b0 + l) * j + jj));
                            acc = _mm256_fmadd_ps(av[l], bv, acc);
                        }
                        _mm256_storeu_ps(crow.add(jj), acc);
                        jj += 8;
                    }
                    for jj in j_main..j {
                        let mut sum = *c.get_unchecked(ii * j + jj);
                        for l in 0..8 {
                            sum += *a.get_unchecked((b0 + l) * i + ii)
                                * *b.get_unchecked((b0 + l) * j + jj);
                        }
                        *c.get_unchecked_mut(ii * j + jj) = sum;
                    }
                }
                b0 += 8;
            }
            for rem in b0..bb {
                for ii in 0..i {
                    let av = *a.get_unchecked(rem * i + ii);
                    if av == 0.0 {
                        continue;
                    }
                    let avv = _mm256_set1_ps(av);
                    let crow = c.as_mut_ptr().add(ii * j);
                    let mut jj = 0;
                    while jj < j_main {
                        let bv = _mm256_loadu_ps(b.as_ptr().add(rem * j + jj));
                        let acc = _mm256_loadu_ps(crow.add(jj));
                        _mm256_storeu_ps(crow.add(jj), _mm256_fmadd_ps(avv, bv, acc));
                        jj += 8;
                    }
                    for jj in j_main..j {
                        *c.get_unchecked_mut(ii * j + jj) +=
                            av * *b.get_unchecked(rem * j + jj);
                    }
                }
            }
        }
    }
}

pub(crate) mod portable {
    const MR: usize = 4;
    const NR: usize = 16;

    pub fn gemm_nn(c: &mut [f32], a: &[f32], b: &[f32], m: usize, k: usize, n: usize) {
        let mut m0 = 0;
        while m0 + MR <= m {
            let mut n0 = 0;
            while n0 + NR <= n {
                nn_block::<MR, NR>(c, a, b, m0, n0, k, n);
                n0 += NR;
            }
            if n0 < n {
                nn_edge(c, a, b, m0, MR, n0, n - n0, k, n);
            }
            m0 += MR;
        }
        if m0 < m {
            nn_edge(c, a, b, m0, m - m0,0, n, k, n);
        }
    }

    #[inline(always)]
    fn nn_block<const MB: usize, const NB: usize>(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        m0: usize,
        n0: usize,
        k: usize,
        n: usize,
    ) {
        let mut acc = [[0.0f32; NB]; MB];
        for kk in 0..k {
            let brow = &b[kk * n + n0..kk * n + n0 + NB];
            for mi in 0..MB {
                let av = a[(m0 + mi) * k + kk];
                for ni in 0..NB {
                    acc[mi][ni] += av * brow[ni];
                }
            }
        }
        for (mi, row) in acc.iter().enumerate() {
            let crow = &mut c[(m0 + mi) * n + n0..(m0 + mi) * n + n0 + NB];
            for ni in 0..NB {
                crow[ni] += row[ni];
            }
        }
    }

    pub(crate) fn nn_edge(
        c: &mut [f32],
        a: &[f32],
        b: &[f32],
        m0: usize,
        mb: usize,
        n0: usize,
        nb: usize,
        k: usize,
        n: usize,
    ) {
        for mi in 0..mb {
            let arow = &a[(m0 + mi) * k..(m0 + mi + 1) * k];
            for ni in 0..nb {
                let mut sum = 0.0f32;
                for kk in 0..k {
                    sum += arow[kk] * b[kk * n + n0 + ni];
                }
                c[(m0 + mi) * n + n0 + ni] += sum;
            }
        }
    }

    pub fn gemm_nt(c: &mut [f32], a: &[f32], b: &[f32], m: usize, p: usize, n: usize) {
        const LANES: usize = 8;
        for nn in 0..n {
            let brow = &b[nn * p..(nn + 1) * p];
            for mi in 0..m {
                let arow = &a[mi * p..(mi + 1) * p];
                let mut acc = [0.0f32; LANES];
                let chunks = p / LANES;
                for ch in 0..chunks {
                    let off = ch * LANES;
                    for l in 0..LANES {
                        acc[l] += arow[off + l] * brow[off + l];
                    }
                }
                let mut sum: f32 = acc.iter().sum();
                for pp in chunks * LANES..p {
                    sum += arow[pp] * brow[pp];
                }
                c[mi * n + nn] += sum;
            }
        }
    }

    pub fn gemm_tn(c: &mut [f32], a: &[f32], b: &[f32], bb: usize, i: usize, j: usize) {
        let mut b0 = 0;
        while b0 + 4 <= bb {
            for ii in 0..i {
                let a0 = a[b0 * i + ii];
                let a1 = a[(b0 + 1) * i + ii];
                let a2 = a[(b0 + 2) * i + ii];
                let a3 = a[(b0 + 3) * i + ii];
                let crow = &mut c[ii * j..(ii + 1) * j];
                for jj in 0..j {
                    crow[jj] += a0 * b[b0 * j + jj]
                        + a1 * b[(b0 + 1) * j + jj]
                        + a2 * b[(b0 + 2) * j + jj]
                        + a3 * b[(b0 + 3) * j + jj];
                }
            }
            b0 += 4;
        }
        for rem in b0..bb {
            let brow = &b[rem * j..(rem + 1) * j];
            for ii in 0..i {
                let av = a[rem * i + ii];
                if av != 0.0 {
                    let crow = &mut c[ii * j..(ii + 1) * j];
                    for jj in 0..j {
                        crow[jj] += av * brow[jj];
                    }
                }
            }
        }
    }
}
