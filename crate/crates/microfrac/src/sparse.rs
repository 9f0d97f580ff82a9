//! Sparse matrix support for the coupled two-field systems: CSR storage
//! with a reusable assembly pattern, ILU(0)-preconditioned restarted GMRES,
//! and a direct LU fallback.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Square CSR matrix. The structure (row_ptr/col_idx) is shared between
/// assemblies of the same mesh; only the values change.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Arc<[usize]>,
    pub col_idx: Arc<[usize]>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// max|b - A x| / max|b|.
    pub fn residual_inf(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.matvec(x, &mut ax);
        let num = ax
            .iter()
            .zip(b)
            .map(|(a, bb)| (bb - a).abs())
            .fold(0.0f64, f64::max);
        let den = b.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Sparsity pattern of a finite-element system plus, per element, the flat
/// value-slot index of each local (row, col) pair. Built once per mesh;
/// every assembly then scatter-adds in O(nnz).
#[derive(Debug)]
pub struct AssemblyPattern {
    pub n: usize,
    row_ptr: Arc<[usize]>,
    col_idx: Arc<[usize]>,
    slots: Vec<u32>,
    dofs_per_elem: usize,
}

impl AssemblyPattern {
    /// `element_dofs` yields the global DOF list of each element.
    pub fn build(n: usize, element_dofs: &[Vec<usize>]) -> Result<Self> {
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for dofs in element_dofs {
            for &r in dofs {
                for &c in dofs {
                    pairs.push((r as u32, c as u32));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut row_ptr = vec![0usize; n + 1];
        for &(r, _) in &pairs {
            row_ptr[r as usize + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx: Vec<usize> = pairs.iter().map(|&(_, c)| c as usize).collect();
        if col_idx.len() > u32::MAX as usize {
            return Err(Error::LinearSolver("pattern exceeds u32 slot indexing".into()));
        }

        let dofs_per_elem = element_dofs.first().map_or(0, |d| d.len());
        let mut slots = Vec::with_capacity(element_dofs.len() * dofs_per_elem * dofs_per_elem);
        for dofs in element_dofs {
            debug_assert_eq!(dofs.len(), dofs_per_elem);
            for &r in dofs {
                let lo = row_ptr[r];
                let hi = row_ptr[r + 1];
                for &c in dofs {
                    let k = col_idx[lo..hi]
                        .binary_search(&c)
                        .map_err(|_| Error::LinearSolver("assembly pattern inconsistency".into()))?;
                    slots.push((lo + k) as u32);
                }
            }
        }
        Ok(Self {
            n,
            row_ptr: row_ptr.into(),
            col_idx: col_idx.into(),
            slots,
            dofs_per_elem,
        })
    }

    pub fn zeros(&self) -> CsrMatrix {
        CsrMatrix {
            n: self.n,
            row_ptr: Arc::clone(&self.row_ptr),
            col_idx: Arc::clone(&self.col_idx),
            values: vec![0.0; self.col_idx.len()],
        }
    }

    /// Scatter-add one element's dense block (row-major, dofs^2 entries).
    pub fn scatter(&self, matrix: &mut CsrMatrix, elem: usize, block: &[f64]) {
        let k = self.dofs_per_elem * self.dofs_per_elem;
        let slots = &self.slots[elem * k..(elem + 1) * k];
        for (slot, v) in slots.iter().zip(block) {
            matrix.values[*slot as usize] += v;
        }
    }
}

/// ILU(0): incomplete LU on the original sparsity pattern. L has unit
/// diagonal and is stored below it, U on and above it.
pub struct Ilu0 {
    n: usize,
    row_ptr: Arc<[usize]>,
    col_idx: Arc<[usize]>,
    lu: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                if a.col_idx[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::LinearSolver(format!("ILU(0): missing diagonal in row {r}")));
            }
        }
        let mut lu = a.values.clone();
        // IKJ variant restricted to the existing pattern.
        let mut colmap = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (a.row_ptr[i], a.row_ptr[i + 1]);
            for k in lo..hi {
                colmap[a.col_idx[k]] = k;
            }
            for k in lo..hi {
                let j = a.col_idx[k];
                if j >= i {
                    break;
                }
                let pivot = lu[diag[j]];
                if pivot == 0.0 || !pivot.is_finite() {
                    return Err(Error::LinearSolver(format!("ILU(0): zero pivot in row {j}")));
                }
                let factor = lu[k] / pivot;
                lu[k] = factor;
                for kk in diag[j] + 1..a.row_ptr[j + 1] {
                    let slot = colmap[a.col_idx[kk]];
                    if slot != usize::MAX {
                        lu[slot] -= factor * lu[kk];
                    }
                }
            }
            for k in lo..hi {
                colmap[a.col_idx[k]] = usize::MAX;
            }
            if lu[diag[i]] == 0.0 {
                return Err(Error::LinearSolver(format!("ILU(0): zero pivot in row {i}")));
            }
        }
        Ok(Self {
            n,
            row_ptr: Arc::clone(&a.row_ptr),
            col_idx: Arc::clone(&a.col_idx),
            lu,
            diag,
        })
    }

    /// y = (LU)^-1 x by forward/backward substitution.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        for r in 0..self.n {
            let mut acc = y[r];
            for k in self.row_ptr[r]..self.diag[r] {
                acc -= self.lu[k] * y[self.col_idx[k]];
            }
            y[r] = acc;
        }
        for r in (0..self.n).rev() {
            let mut acc = y[r];
            for k in self.diag[r] + 1..self.row_ptr[r + 1] {
                acc -= self.lu[k] * y[self.col_idx[k]];
            }
            y[r] = acc / self.lu[self.diag[r]];
        }
    }
}

/// Restarted GMRES, right-preconditioned with ILU(0). The Arnoldi residual
/// equals the true residual of the unpreconditioned system, so `rel_tol`
/// bounds |b - A x| / |b| directly.
pub fn gmres_ilu0(
    a: &CsrMatrix,
    b: &[f64],
    restart: usize,
    max_iters: usize,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let n = a.n;
    let pre = Ilu0::factor(a)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let m = restart.max(1).min(n);
    let mut x = vec![0.0; n];
    let mut total = 0usize;
    let mut scratch = vec![0.0; n];

    while total < max_iters {
        a.matvec(&x, &mut scratch);
        let mut r: Vec<f64> = b.iter().zip(&scratch).map(|(bb, ax)| bb - ax).collect();
        let beta = norm(&r);
        if beta / bnorm < rel_tol {
            return Ok(x);
        }
        for v in &mut r {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut precond: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut cols = 0;

        for j in 0..m {
            if total >= max_iters {
                break;
            }
            total += 1;
            let mut z = vec![0.0; n];
            pre.apply(&basis[j], &mut z);
            let mut w = vec![0.0; n];
            a.matvec(&z, &mut w);
            precond.push(z);
            // Modified Gram-Schmidt.
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= hij * vk;
                }
            }
            let hjj = norm(&w);
            h[j + 1][j] = hjj;
            cols = j + 1;
            if hjj > 0.0 {
                basis.push(w.iter().map(|v| v / hjj).collect());
            }
            // Givens rotations keep the least-squares residual explicit.
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom == 0.0 {
                return Err(Error::LinearSolver("GMRES breakdown: zero Hessenberg column".into()));
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            if (g[j + 1].abs() / bnorm) < rel_tol || hjj == 0.0 {
                break;
            }
        }

        // Back-substitute the Hessenberg least squares and expand through
        // the preconditioned basis.
        let mut y = vec![0.0; cols];
        for i in (0..cols).rev() {
            let mut acc = g[i];
            for k in i + 1..cols {
                acc -= h[i][k] * y[k];
            }
            if h[i][i] == 0.0 {
                return Err(Error::LinearSolver("GMRES breakdown: singular Hessenberg".into()));
            }
            y[i] = acc / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xk, zk) in x.iter_mut().zip(&precond[i]) {
                *xk += yi * zk;
            }
        }

        a.matvec(&x, &mut scratch);
        let res: f64 = b
            .iter()
            .zip(&scratch)
            .map(|(bb, ax)| (bb - ax) * (bb - ax))
            .sum::<f64>()
            .sqrt();
        if res / bnorm < rel_tol {
            return Ok(x);
        }
    }
    Err(Error::LinearSolver(format!(
        "GMRES did not reach rel_tol after {max_iters} iterations"
    )))
}

/// Direct sparse LU. Verifies the computed solution; a singular or
/// numerically broken system reports an error instead of garbage.
pub fn direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    use faer::prelude::*;
    use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
    use faer::sparse::{SparseColMat, Triplet};

    // Sequential factorization keeps runs bit-for-bit reproducible.
    static SEQ: std::sync::Once = std::sync::Once::new();
    SEQ.call_once(|| faer::set_global_parallelism(faer::Par::Seq));

    let mut triplets = Vec::with_capacity(a.nnz());
    for r in 0..a.n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            triplets.push(Triplet::new(r, a.col_idx[k], a.values[k]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &triplets)
        .map_err(|e| Error::LinearSolver(format!("direct solver: bad matrix: {e:?}")))?;
    let sym = SymbolicLu::try_new(mat.symbolic())
        .map_err(|e| Error::LinearSolver(format!("direct solver: symbolic failure: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(sym, mat.as_ref())
        .map_err(|e| Error::LinearSolver(format!("direct solver: factorization failed: {e:?}")))?;

    let mut rhs = faer::Mat::<f64>::zeros(a.n, 1);
    for (i, &v) in b.iter().enumerate() {
        rhs[(i, 0)] = v;
    }
    let sol = lu.solve(&rhs);
    let x: Vec<f64> = (0..a.n).map(|i| sol[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolver("direct solver produced non-finite solution".into()));
    }
    let res = a.residual_inf(&x, b);
    if res > 1e-6 {
        return Err(Error::LinearSolver(format!(
            "direct solver residual {res:.3e} too large; system is singular or ill-conditioned"
        )));
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let dofs: Vec<Vec<usize>> = (0..n - 1).map(|i| vec![i, i + 1]).collect();
        let pattern = AssemblyPattern::build(n, &dofs).unwrap();
        let mut m = pattern.zeros();
        for e in 0..n - 1 {
            pattern.scatter(&mut m, e, &[2.0, -1.0, -1.0, 2.0]);
        }
        m
    }

    #[test]
    fn pattern_scatter_matches_dense() {
        let m = laplacian_1d(5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(1, 2), -1.0);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn gmres_solves_small_system() {
        let m = laplacian_1d(50);
        let b = vec![1.0; 50];
        let x = gmres_ilu0(&m, &b, 30, 500, 1e-10).unwrap();
        assert!(m.residual_inf(&x, &b) < 1e-9);
    }

    #[test]
    fn direct_and_gmres_agree() {
        let m = laplacian_1d(80);
        let b: Vec<f64> = (0..80).map(|i| (i as f64 * 0.7).sin()).collect();
        let xd = direct_solve(&m, &b).unwrap();
        let xg = gmres_ilu0(&m, &b, 40, 1000, 1e-12).unwrap();
        let diff = xd
            .iter()
            .zip(&xg)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let scale = xd.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        assert!(diff / scale < 1e-8, "diff={diff}, scale={scale}");
    }

    #[test]
    fn singular_system_is_an_error() {
        // Zero row makes the system rank deficient.
        let dofs = vec![vec![0usize, 1], vec![1usize, 2]];
        let pattern = AssemblyPattern::build(3, &dofs).unwrap();
        let mut m = pattern.zeros();
        pattern.scatter(&mut m, 0, &[1.0, 0.0, 0.0, 0.0]);
        pattern.scatter(&mut m, 1, &[0.0, 0.0, 0.0, 1.0]);
        let b = vec![1.0, 1.0, 1.0];
        assert!(direct_solve(&m, &b).is_err());
        assert!(gmres_ilu0(&m, &b, 3, 50, 1e-10).is_err());
    }

    #[test]
    fn identity_system_returns_rhs() {
        let dofs: Vec<Vec<usize>> = (0..4).map(|i| vec![i]).collect();
        let pattern = AssemblyPattern::build(4, &dofs).unwrap();
        let mut m = pattern.zeros();
        for e in 0..4 {
            pattern.scatter(&mut m, e, &[1.0]);
        }
        let b = vec![3.0, -1.0, 0.5, 2.0];
        assert_eq!(direct_solve(&m, &b).unwrap(), b);
        let x = gmres_ilu0(&m, &b, 4, 10, 1e-12).unwrap();
        for (a, e) in x.iter().zip(&b) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}
