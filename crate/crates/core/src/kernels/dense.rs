use super::{check_len, relu_in_place, Matrix, Real};
use crate::error::Result;

/// `y = W x + b`, optionally followed by ReLU.
pub fn fc_forward<T: Real>(x: &[T], w: &Matrix<T>, b: &[T], relu: bool) -> Result<Vec<T>> {
    check_len("fc input", x.len(), w.cols)?;
    check_len("fc bias", b.len(), w.rows)?;
    let mut y: Vec<T> = (0..w.rows)
        .map(|r| w.row(r).iter().zip(x).map(|(&a, &v)| a * v).sum::<T>() + b[r])
        .collect();
    if relu {
        relu_in_place(&mut y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_relu() {
        let w = Matrix::<f64>::identity(3);
        let x = [1.0, -2.0, 3.0];
        assert_eq!(fc_forward(&x, &w, &[0.0; 3], false).unwrap(), vec![1.0, -2.0, 3.0]);
        assert_eq!(fc_forward(&x, &w, &[0.0; 3], true).unwrap(), vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn dim_mismatch() {
        let w = Matrix::<f32>::identity(3);
        assert!(fc_forward(&[1.0, 2.0], &w, &[0.0; 3], false).is_err());
        assert!(fc_forward(&[1.0, 2.0, 3.0], &w, &[0.0; 2], false).is_err());
    }
}
