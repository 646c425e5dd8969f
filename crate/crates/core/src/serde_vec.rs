//! Serializes `Array1<f64>` as a plain sequence.

use ndarray::Array1;
use serde::{Serialize, Serializer};

pub fn serialize<S: Serializer>(v: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v.as_slice() {
        Some(sl) => sl.serialize(s),
        None => v.to_vec().serialize(s),
    }
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Array1<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|a| a.to_vec()).serialize(s)
    }
}

pub mod many {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Array1<f64>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|a| a.to_vec()))
    }
}
