use crate::error::{Error, Result};
use crate::tensor::{BinaryTensor3, BinaryTensor4};

/// Binary convolution: places feature `f` with its top-left corner at every
/// active `S[f, r, c]` and ORs overlapping placements.
///
/// `R[a, r + dr, c + dc] = OR_f S[f, r, c] AND W[a, f, dr, dc]`, so the
/// output has `H_S + H_W - 1` rows and `W_S + W_W - 1` cols.
pub fn bconv(s: &BinaryTensor3, w: &BinaryTensor4) -> Result<BinaryTensor3> {
    let [fs, hs, ws] = s.dims();
    let [a_n, fw, hw, ww] = w.dims();
    if fs != fw {
        return Err(Error::Shape("bconv: S features must match W features"));
    }
    let mut r = BinaryTensor3::zeros(a_n, hs + hw - 1, ws + ww - 1)?;
    for f in 0..fs {
        for y in 0..hs {
            for x in 0..ws {
                if !s.get(f, y, x) {
                    continue;
                }
                for a in 0..a_n {
                    for dr in 0..hw {
                        for dc in 0..ww {
                            if w.get(a, f, dr, dc) {
                                r.set(a, y + dr, x + dc, true);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(r)
}
