//! Small dense helpers for node-stacked blocks.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm2(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|A - 1 r^T|_F`: distance of every row of `a` from the row vector `r`.
pub fn distance_to_row(a: &Array2<f64>, r: &Array1<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|row| row.iter().zip(r.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .expect("non-empty range");
        if m[[pivot, col]].abs() < 1e-300 {
            return Err(Error::InvalidParameter("singular system".into()));
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            x.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            if f != 0.0 {
                for k in col..n {
                    m[[row, k]] -= f * m[[col, k]];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[[row, k]] * x[k];
        }
        x[row] = acc / m[[row, row]];
    }
    Ok(x)
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array2<f64> {
    loop {
        let g = Array2::from_shape_simple_fn((d, d), || rng.sample::<f64, _>(StandardNormal));
        let mut q = Array2::<f64>::zeros((d, d));
        let mut ok = true;
        for j in 0..d {
            let mut v = g.column(j).to_owned();
            for k in 0..j {
                let qk = q.column(k);
                let proj = qk.dot(&v);
                v.scaled_add(-proj, &qk);
            }
            let nv = norm2(&v);
            if nv < 1e-8 {
                ok = false;
                break;
            }
            q.column_mut(j).assign(&(v / nv));
        }
        if ok {
            return q;
        }
    }
}
