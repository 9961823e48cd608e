//! Small symmetric eigensolver for the 4x4 metafeature covariance.

use crate::table::N_METAFEATURES;

const N: usize = N_METAFEATURES;

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
/// Returns unsorted eigenvalues and the matching eigenvectors as columns.
pub(crate) fn eigen_symmetric(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let mut norm = 0.0;
    for row in &a {
        for &x in row {
            norm += x * x;
        }
    }

    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..N {
            for q in (p + 1)..N {
                off += a[p][q] * a[p][q];
            }
        }
        if off <= 1e-32 * norm.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..N - 1 {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = a[p][p];
                let aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for i in 0..N {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = aip - s * (aiq + tau * aip);
                    a[p][i] = a[i][p];
                    a[i][q] = aiq + s * (aip - tau * aiq);
                    a[q][i] = a[i][q];
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = vip - s * (viq + tau * vip);
                    row[q] = viq + s * (vip - tau * viq);
                }
            }
        }
    }

    let mut eigenvalues = [0.0; N];
    for (i, row) in a.iter().enumerate() {
        eigenvalues[i] = row[i];
    }
    (eigenvalues, v)
}

/// Top eigenpairs sorted by descending eigenvalue, each eigenvector's sign
/// fixed so its largest-magnitude component is positive.
pub(crate) fn principal_axes(cov: [[f64; N]; N]) -> Vec<(f64, [f64; N])> {
    let (values, vectors) = eigen_symmetric(cov);
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .map(|col| {
            let mut vec = [0.0; N];
            for (d, row) in vectors.iter().enumerate() {
                vec[d] = row[col];
            }
            let mut lead = 0;
            for d in 1..N {
                if vec[d].abs() > vec[lead].abs() {
                    lead = d;
                }
            }
            if vec[lead] < 0.0 {
                for x in vec.iter_mut() {
                    *x = -*x;
                }
            }
            (values[col], vec)
        })
        .collect()
}
