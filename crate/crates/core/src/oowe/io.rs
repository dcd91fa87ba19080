use std::io::{Read, Write};

use super::model::{OoweModel, Params, Shape};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"OOWE";
const VERSION: u32 = 1;

/// Writes the model: magic, version, then `V, d, h, C, w` as little-endian
/// `u64`, then `E, W1, b1, W2, b2` as row-major little-endian `f64`.
/// AdaGrad state is not stored.
pub fn write_model<W: Write>(mut w: W, model: &OoweModel) -> std::io::Result<()> {
    let s = model.shape;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [s.rows, s.dim, s.hidden, s.categories, s.window] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for group in model.params.groups() {
        for x in group {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<OoweModel> {
    let bad = |what: &str| Error::Data(format!("model file: {what}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| bad("truncated header"))?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(bad("unsupported version"));
    }
    let mut dims = [0usize; 5];
    let mut b8 = [0u8; 8];
    for d in &mut dims {
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        *d = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| bad("dimension overflow"))?;
    }
    let [rows, dim, hidden, categories, window] = dims;
    if [rows, dim, hidden, categories, window].contains(&0) || rows.saturating_mul(dim) > (1 << 32) {
        return Err(bad("implausible dimensions"));
    }
    let shape = Shape {
        rows,
        dim,
        hidden,
        categories,
        window,
    };
    let mut params = Params::zeros(shape);
    for group in params.groups_mut() {
        for x in group.iter_mut() {
            r.read_exact(&mut b8).map_err(|_| bad("truncated body"))?;
            *x = f64::from_le_bytes(b8);
        }
    }
    Ok(OoweModel {
        shape,
        params,
        accum: Params::zeros(shape),
    })
}

/// `token<TAB>v1 ... vd` for every vocabulary word, in index order.
pub fn write_embeddings<W: Write>(mut w: W, model: &OoweModel, vocab: &Vocabulary) -> std::io::Result<()> {
    for (i, (word, _)) in vocab.words().enumerate() {
        let row: Vec<String> = model.embedding(i).iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{word}\t{}", row.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn roundtrip_and_corruption() {
        let shape = Shape {
            rows: 7,
            dim: 3,
            hidden: 2,
            categories: 6,
            window: 3,
        };
        let m = OoweModel::init(shape, &mut seeded(2));
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        let back = read_model(&buf[..]).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.shape, m.shape);
        assert!(read_model(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model(&bad[..]).is_err());
    }
}
