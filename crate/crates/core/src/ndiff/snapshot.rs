//! Named-tensor snapshots: an 8-byte little-endian manifest length, a JSON
//! manifest `{"tensors": [{"name", "shape"}...]}`, then every tensor's values
//! as little-endian `f64` in manifest order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

pub fn write_snapshot<T: Scalar, W: Write>(mut w: W, tensors: &[(String, &Tensor<T>)]) -> Result<()> {
    let manifest = Manifest {
        tensors: tensors
            .iter()
            .map(|(name, t)| Entry { name: name.clone(), shape: t.shape().to_vec() })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, t) in tensors {
        for v in t.data() {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<T: Scalar, R: Read>(mut r: R) -> Result<Vec<(String, Tensor<T>)>> {
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(Error::invalid("snapshot manifest too large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let manifest: Manifest = serde_json::from_slice(&json)?;
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for e in manifest.tensors {
        let n: usize = e.shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            data.push(T::of(f64::from_le_bytes(buf)));
        }
        out.push((e.name, Tensor::new(e.shape, data)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 1..20), name in "[a-z_]{1,8}") {
            let t = Tensor::<f64>::new(vec![values.len()], values.clone()).unwrap();
            let s = Tensor::<f64>::scalar(values[0]);
            let mut buf = Vec::new();
            write_snapshot(&mut buf, &[(name.clone(), &t), ("s".into(), &s)]).unwrap();
            let back = read_snapshot::<f64, _>(buf.as_slice()).unwrap();
            prop_assert_eq!(&back[0].0, &name);
            prop_assert_eq!(&back[0].1, &t);
            prop_assert_eq!(&back[1].1, &s);
        }
    }
}
