//! Hermitian eigendecomposition over LAPACK's divide-and-conquer drivers.
//!
//! Matrices with no imaginary part anywhere are routed to `dsyevd`, which
//! runs several times faster than `zheevd` at the dimensions the dense
//! engines use. Buffers are column-major; eigenvector k lives at
//! `cols[k*n..(k+1)*n]`.

use std::error::Error;
use std::fmt;
use std::os::raw::{c_char, c_int};

use lapack_sys::__BindgenComplex;
use ndarray::Array2;

use crate::C64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EighError {
    NotSquare { rows: usize, cols: usize },
    Empty,
    /// Nonzero `info` from the named LAPACK driver.
    Lapack { driver: &'static str, code: i32 },
}

impl fmt::Display for EighError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquare { rows, cols } => {
                write!(f, "matrix is {rows}x{cols}, expected square")
            }
            Self::Empty => write!(f, "matrix is empty"),
            Self::Lapack { driver, code } => write!(f, "{driver} failed with info={code}"),
        }
    }
}

impl Error for EighError {}

/// Eigenvector storage. `Identity` is the fast path for diagonal
/// Hamiltonians, where projection is a copy.
pub(crate) enum EigVectors {
    Identity(usize),
    Real { n: usize, cols: Vec<f64> },
    Complex { n: usize, cols: Vec<C64> },
}

impl EigVectors {
    pub(crate) fn dim(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Real { n, .. } => *n,
            Self::Complex { n, .. } => *n,
        }
    }

    /// Coefficients of `psi` in the eigenbasis: `c = V^dagger psi`.
    pub(crate) fn project(&self, psi: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity(_) => psi.to_vec(),
            Self::Real { n, cols } => (0..*n)
                .map(|k| {
                    let col = &cols[k * n..(k + 1) * n];
                    col.iter().zip(psi).map(|(&v, &p)| p * v).sum()
                })
                .collect(),
            Self::Complex { n, cols } => (0..*n)
                .map(|k| {
                    let col = &cols[k * n..(k + 1) * n];
                    col.iter().zip(psi).map(|(&v, &p)| v.conj() * p).sum()
                })
                .collect(),
        }
    }

    /// Inverse of [`project`]: `V c` back in the computational basis.
    pub(crate) fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity(_) => c.to_vec(),
            Self::Real { n, cols } => {
                let mut out = vec![C64::new(0.0, 0.0); *n];
                for (k, &ck) in c.iter().enumerate() {
                    let col = &cols[k * n..(k + 1) * n];
                    for (o, &v) in out.iter_mut().zip(col) {
                        *o += ck * v;
                    }
                }
                out
            }
            Self::Complex { n, cols } => {
                let mut out = vec![C64::new(0.0, 0.0); *n];
                for (k, &ck) in c.iter().enumerate() {
                    let col = &cols[k * n..(k + 1) * n];
                    for (o, &v) in out.iter_mut().zip(col) {
                        *o += ck * v;
                    }
                }
                out
            }
        }
    }
}

pub(crate) struct Decomposition {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    pub vectors: EigVectors,
}

fn check_square(m: &Array2<C64>) -> Result<usize, EighError> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(EighError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(EighError::Empty);
    }
    Ok(rows)
}

fn is_real(m: &Array2<C64>) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Column-major copy of a Hermitian matrix. Column j of the output is the
/// conjugate of row j of the input, so reads and writes both stream.
fn to_col_major_complex(m: &Array2<C64>, n: usize) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let row = m.row(j);
        let dst = &mut buf[j * n..(j + 1) * n];
        for (d, z) in dst.iter_mut().zip(row.iter()) {
            *d = z.conj();
        }
    }
    buf
}

fn to_col_major_real(m: &Array2<C64>, n: usize) -> Vec<f64> {
    let mut buf = vec![0.0f64; n * n];
    for j in 0..n {
        let row = m.row(j);
        let dst = &mut buf[j * n..(j + 1) * n];
        for (d, z) in dst.iter_mut().zip(row.iter()) {
            *d = z.re;
        }
    }
    buf
}

fn zheevd(n: usize, a: &mut [C64], want_vectors: bool) -> Result<Vec<f64>, EighError> {
    let jobz = if want_vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = n as c_int;
    let mut w = vec![0.0f64; n];
    let mut info: c_int = 0;
    let query: c_int = -1;
    let mut work_q = __BindgenComplex { re: 0.0f64, im: 0.0f64 };
    let mut rwork_q = 0.0f64;
    let mut iwork_q: c_int = 0;
    let a_ptr = a.as_mut_ptr().cast::<__BindgenComplex<f64>>();
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &nn, a_ptr, &nn, w.as_mut_ptr(), &mut work_q, &query, &mut rwork_q,
            &query, &mut iwork_q, &query, &mut info,
        );
    }
    if info != 0 {
        return Err(EighError::Lapack { driver: "zheevd", code: info });
    }
    let lwork = work_q.re as c_int;
    let lrwork = rwork_q as c_int;
    let liwork = iwork_q;
    let mut work = vec![__BindgenComplex { re: 0.0f64, im: 0.0f64 }; lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0 as c_int; liwork as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &nn, a_ptr, &nn, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(EighError::Lapack { driver: "zheevd", code: info });
    }
    Ok(w)
}

fn dsyevd(n: usize, a: &mut [f64], want_vectors: bool) -> Result<Vec<f64>, EighError> {
    let jobz = if want_vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let nn = n as c_int;
    let mut w = vec![0.0f64; n];
    let mut info: c_int = 0;
    let query: c_int = -1;
    let mut work_q = 0.0f64;
    let mut iwork_q: c_int = 0;
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &nn, a.as_mut_ptr(), &nn, w.as_mut_ptr(), &mut work_q, &query,
            &mut iwork_q, &query, &mut info,
        );
    }
    if info != 0 {
        return Err(EighError::Lapack { driver: "dsyevd", code: info });
    }
    let lwork = work_q as c_int;
    let liwork = iwork_q;
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0 as c_int; liwork as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &nn, a.as_mut_ptr(), &nn, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(EighError::Lapack { driver: "dsyevd", code: info });
    }
    Ok(w)
}

/// Full eigendecomposition of a Hermitian matrix. The caller is expected
/// to have checked hermiticity already; the lower triangle is what LAPACK
/// reads.
pub(crate) fn decompose(m: &Array2<C64>) -> Result<Decomposition, EighError> {
    let n = check_square(m)?;
    if is_real(m) {
        let mut buf = to_col_major_real(m, n);
        let values = dsyevd(n, &mut buf, true)?;
        Ok(Decomposition { values, vectors: EigVectors::Real { n, cols: buf } })
    } else {
        let mut buf = to_col_major_complex(m, n);
        let values = zheevd(n, &mut buf, true)?;
        Ok(Decomposition { values, vectors: EigVectors::Complex { n, cols: buf } })
    }
}

/// Ascending eigenvalues of a Hermitian matrix; no vectors.
pub(crate) fn eigenvalues(m: &Array2<C64>) -> Result<Vec<f64>, EighError> {
    let n = check_square(m)?;
    if is_real(m) {
        let mut buf = to_col_major_real(m, n);
        dsyevd(n, &mut buf, false)
    } else {
        let mut buf = to_col_major_complex(m, n);
        zheevd(n, &mut buf, false)
    }
}

/// Spectral norm (largest |eigenvalue|) of a Hermitian matrix; eigenvalues
/// only, no vectors.
pub(crate) fn operator_norm(m: &Array2<C64>) -> Result<f64, EighError> {
    let values = eigenvalues(m)?;
    Ok(values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}
