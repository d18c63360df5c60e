use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

/// Connectivity of a translational pooling layer over a `(F, H, W)` array.
///
/// Every representation element `R[f, r, c]` owns one shift variable `U` per
/// offset `(dr, dc)` of the centered `pool_h x pool_w` window whose target
/// `S[f, r + dr, c + dc]` lies inside the array; shifts leaving the array are
/// dropped. U ids are contiguous per source element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolConnectivity {
    /// Flat index of the source `R` element of each shift.
    pub source: Vec<u32>,
    /// Flat index of the target `S` element of each shift.
    pub target: Vec<u32>,
    /// Offset of each shift.
    pub shift: Vec<(i32, i32)>,
    /// Shift ids owned by each `R` element.
    pub pools: Vec<Range<u32>>,
    /// Shift ids ORed into each `S` element.
    pub members: Vec<Vec<u32>>,
}

impl PoolConnectivity {
    pub fn num_shifts(&self) -> usize {
        self.source.len()
    }
}

pub fn pooling_connectivity(dims: [usize; 3], pool_h: usize, pool_w: usize) -> PoolConnectivity {
    let [f_n, h, w] = dims;
    let (hh, hw) = ((pool_h / 2) as i32, (pool_w / 2) as i32);
    let n = f_n * h * w;
    let mut pc = PoolConnectivity {
        source: Vec::new(),
        target: Vec::new(),
        shift: Vec::new(),
        pools: Vec::with_capacity(n),
        members: vec![Vec::new(); n],
    };
    for f in 0..f_n {
        for r in 0..h as i32 {
            for c in 0..w as i32 {
                let src = ((f * h) as i32 + r) * w as i32 + c;
                let start = pc.source.len() as u32;
                for dr in -hh..=hh {
                    for dc in -hw..=hw {
                        let (tr, tc) = (r + dr, c + dc);
                        if tr < 0 || tc < 0 || tr >= h as i32 || tc >= w as i32 {
                            continue;
                        }
                        let tgt = ((f * h) as i32 + tr) * w as i32 + tc;
                        let id = pc.source.len() as u32;
                        pc.source.push(src as u32);
                        pc.target.push(tgt as u32);
                        pc.shift.push((dr, dc));
                        pc.members[tgt as usize].push(id);
                    }
                }
                pc.pools.push(start..pc.source.len() as u32);
            }
        }
    }
    pc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_pool_is_identity() {
        let pc = pooling_connectivity([2, 3, 3], 1, 1);
        assert_eq!(pc.num_shifts(), 18);
        assert_eq!(pc.source, pc.target);
        assert!(pc.members.iter().all(|m| m.len() == 1));
    }

    #[test]
    fn border_shifts_dropped() {
        let pc = pooling_connectivity([1, 5, 5], 3, 3);
        let interior = 2 * 5 + 2;
        assert_eq!(pc.pools[interior].len(), 9);
        assert_eq!(pc.pools[0].len(), 4);
        assert_eq!(pc.members[interior].len(), 9);
        assert_eq!(pc.members[0].len(), 4);
        // edge (not corner) cell
        assert_eq!(pc.pools[2].len(), 6);
    }

    #[test]
    fn adjacent_sources_share_target() {
        let pc = pooling_connectivity([1, 1, 4], 1, 3);
        // S[0,0,1] is reachable from R at cols 0, 1, 2
        let srcs: Vec<u32> = pc.members[1].iter().map(|&u| pc.source[u as usize]).collect();
        assert_eq!(srcs, [0, 1, 2]);
    }
}
