use nalgebra::DMatrix;

use super::codec::{Reader, Writer};
use crate::dataset::RatingMatrix;
use crate::error::{LocaError, Result};

/// Item-item linear autoencoder with a zero diagonal, row-major `n × n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EaseModel {
    n_items: usize,
    weights: Vec<f64>,
    pub lambda: f64,
}

impl EaseModel {
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_items + j]
    }

    /// Row-major item-item weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Scores for a user given their positive items: `r_u · B`.
    pub fn score(&self, row: &[usize]) -> Vec<f64> {
        let n = self.n_items;
        let mut out = vec![0.0; n];
        for &i in row {
            let b = &self.weights[i * n..(i + 1) * n];
            out.iter_mut().zip(b).for_each(|(o, w)| *o += w);
        }
        out
    }

    /// Dense variant of [`EaseModel::score`].
    pub fn score_dense(&self, r: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_items;
        if r.len() != n {
            return Err(LocaError::DimensionMismatch {
                expected: n,
                actual: r.len(),
            });
        }
        let mut out = vec![0.0; n];
        for (i, &x) in r.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let b = &self.weights[i * n..(i + 1) * n];
            out.iter_mut().zip(b).for_each(|(o, w)| *o += x * w);
        }
        Ok(out)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        w.u64(self.n_items as u64);
        w.f64(self.lambda);
        w.f64s(&self.weights);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let n_items = r.u64()? as usize;
        let lambda = r.f64()?;
        let weights = r.f64s(n_items * n_items)?;
        Ok(EaseModel {
            n_items,
            weights,
            lambda,
        })
    }
}

/// Closed-form weighted EASE.
///
/// Minimizes `Σ_u t_u ‖r_u − r_u B‖² + λ‖B‖²` subject to `diag(B) = 0`.
/// With `G = XᵀDX + λI` and `P = G⁻¹` the solution is `B_ij = −P_ij / P_jj`
/// off the diagonal.
pub fn train_ease(train: &RatingMatrix, row_weights: &[f64], lambda: f64) -> Result<EaseModel> {
    let m = train.n_users();
    let n = train.n_items();
    if row_weights.len() != m {
        return Err(LocaError::DimensionMismatch {
            expected: m,
            actual: row_weights.len(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(LocaError::Config(format!("EASE lambda must be positive, got {lambda}")));
    }
    if row_weights.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(LocaError::Config("row weights must be finite and nonnegative".into()));
    }
    if !row_weights.iter().any(|&t| t > 0.0) {
        return Err(LocaError::Config("all row weights are zero".into()));
    }

    let mut gram = DMatrix::<f64>::zeros(n, n);
    for (row, &t) in train.rows().iter().zip(row_weights) {
        if t == 0.0 {
            continue;
        }
        for &i in row {
            for &j in row {
                gram[(i, j)] += t;
            }
        }
    }
    for i in 0..n {
        gram[(i, i)] += lambda;
    }

    let inverse = match gram.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => gram
            .try_inverse()
            .ok_or_else(|| LocaError::Numerical("EASE Gram matrix is singular".into()))?,
    };

    let mut weights = vec![0.0; n * n];
    for j in 0..n {
        let pjj = inverse[(j, j)];
        for i in 0..n {
            if i != j {
                weights[i * n + j] = -inverse[(i, j)] / pjj;
            }
        }
    }
    if weights.iter().any(|x| !x.is_finite()) {
        return Err(LocaError::Numerical("EASE produced non-finite weights".into()));
    }
    Ok(EaseModel {
        n_items: n,
        weights,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn toy() -> RatingMatrix {
        RatingMatrix::from_rows(2, vec![vec![0, 1], vec![0]]).unwrap()
    }

    #[test]
    fn two_by_two_by_hand() {
        let b = train_ease(&toy(), &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(b.weight(0, 0), 0.0);
        assert_eq!(b.weight(1, 1), 0.0);
        assert_abs_diff_eq!(b.weight(0, 1), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.weight(1, 0), 0.5, epsilon = 1e-12);

        let s = b.score_dense(&[1.0, 0.0]).unwrap();
        assert_eq!(s[0], 0.0);
        assert_abs_diff_eq!(s[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_eq!(b.score(&[]), vec![0.0, 0.0]);
        assert_eq!(b.score(&[1]), vec![b.weight(1, 0), 0.0]);
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let b = train_ease(&toy(), &[1.0, 1.0], 1e9).unwrap();
        assert!(b.weights().iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn zero_weight_equals_row_removal() {
        let x = RatingMatrix::from_rows(4, vec![vec![0, 1], vec![1, 2, 3], vec![0, 3], vec![2]]).unwrap();
        let with = train_ease(&x, &[1.0, 0.0, 2.0, 0.5], 10.0).unwrap();
        let without = train_ease(&x.select_users(&[0, 2, 3]), &[1.0, 2.0, 0.5], 10.0).unwrap();
        assert_eq!(with.weights(), without.weights());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            train_ease(&toy(), &[0.0, 0.0], 1.0),
            Err(LocaError::Config(_))
        ));
        assert!(matches!(
            train_ease(&toy(), &[1.0, 1.0], 0.0),
            Err(LocaError::Config(_))
        ));
        assert!(matches!(
            train_ease(&toy(), &[1.0], 1.0),
            Err(LocaError::DimensionMismatch { .. })
        ));
        let b = train_ease(&toy(), &[1.0, 1.0], 1.0).unwrap();
        assert!(b.score_dense(&[1.0]).is_err());
    }
}
