//! Serialization conventions: complex numbers as `[re, im]`, matrices as
//! row-major nested arrays, vectors as arrays of pairs.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{CMatrix, CVector};

pub type Pair = [f64; 2];

pub fn pair(z: Complex64) -> Pair {
    [z.re, z.im]
}

pub fn unpair(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| pair(m[(i, j)])).collect())
        .collect()
}

pub fn rows_matrix(rows: &[Vec<Pair>]) -> Result<CMatrix, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| unpair(rows[i][j])))
}

pub fn vector_pairs(v: &CVector) -> Vec<Pair> {
    v.iter().copied().map(pair).collect()
}

pub fn pairs_vector(v: &[Pair]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().copied().map(unpair))
}

/// `#[serde(with = "complex")]`
pub mod complex {
    use super::*;

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Pair::deserialize(d).map(unpair)
    }
}

/// `#[serde(with = "complex_vec")]`
pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().copied().map(pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<Pair>::deserialize(d)?.into_iter().map(unpair).collect())
    }
}

/// `#[serde(with = "matrix")]`
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<Pair>>::deserialize(d)?;
        rows_matrix(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn row_major_layout() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, -1.0), c(3.0, 0.5), c(4.0, 0.0)]);
        let json = serde_json::to_string(&matrix_rows(&m)).unwrap();
        assert_eq!(json, "[[[1.0,0.0],[2.0,-1.0]],[[3.0,0.5],[4.0,0.0]]]");
        assert_eq!(rows_matrix(&matrix_rows(&m)).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[1.0, 0.0]]];
        assert!(rows_matrix(&rows).is_err());
    }
}
