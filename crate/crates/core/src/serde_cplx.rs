//! JSON shapes for complex arrays. A complex number is `[re, im]`, a vector is a
//! list of those, and a matrix is a list of rows.

use crate::linalg::{ComplexMatrix, ComplexVector, C64};
use nalgebra::DVector;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn mat_to_rows(m: &ComplexMatrix) -> Vec<Vec<C64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_mat(rows: &[Vec<C64>]) -> Result<ComplexMatrix, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err("ragged matrix rows".into());
    }
    Ok(ComplexMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub mod matrix_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[ComplexMatrix], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Vec<C64>>> = v.iter().map(mat_to_rows).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexMatrix>, D::Error> {
        let rows: Vec<Vec<Vec<C64>>> = Vec::deserialize(d)?;
        rows.iter()
            .map(|m| rows_to_mat(m).map_err(D::Error::custom))
            .collect()
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &ComplexVector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexVector, D::Error> {
        Ok(ComplexVector::from_vec(Vec::<C64>::deserialize(d)?))
    }
}

pub mod vector_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[ComplexVector], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<&[C64]> = v.iter().map(|x| x.as_slice()).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexVector>, D::Error> {
        let raw: Vec<Vec<C64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(ComplexVector::from_vec).collect())
    }
}

pub mod real_vector_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        let raw: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(DVector::from_vec).collect())
    }
}
