//! 4-connected component labelling of change masks (two-pass union-find).

use super::ChangeMask;

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Labels each changed pixel with a component number starting at 1 (0 is
/// unchanged). Components are numbered in raster-scan order of their first
/// pixel. Returns the label image and the component count.
pub fn label_components(mask: &ChangeMask) -> (Vec<u32>, u64) {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let cells = mask.cells();
    let mut provisional = vec![u32::MAX; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !cells[i] {
                continue;
            }
            let left = (x > 0 && cells[i - 1]).then(|| provisional[i - 1]);
            let up = (y > 0 && cells[i - w]).then(|| provisional[i - w]);
            provisional[i] = match (left, up) {
                (None, None) => sets.make(),
                (Some(l), None) => l,
                (None, Some(u)) => u,
                (Some(l), Some(u)) => {
                    sets.union(l, u);
                    l.min(u)
                }
            };
        }
    }

    let mut dense = vec![0u32; sets.parent.len()];
    let mut next = 0u32;
    let mut out = vec![0u32; w * h];
    for i in 0..w * h {
        if provisional[i] == u32::MAX {
            continue;
        }
        let root = sets.find(provisional[i]) as usize;
        if dense[root] == 0 {
            next += 1;
            dense[root] = next;
        }
        out[i] = dense[root];
    }
    (out, u64::from(next))
}

pub fn count_components(mask: &ChangeMask) -> u64 {
    label_components(mask).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_and_diagonals() {
        // diagonal neighbours are separate under 4-connectivity
        let diag = ChangeMask::from_fn(3, 3, |x, y| x == y);
        assert_eq!(count_components(&diag), 3);

        // U shape merges late via the bottom row
        let u = ChangeMask::from_fn(5, 4, |x, y| x == 0 || x == 4 || y == 3);
        let (labels, n) = label_components(&u);
        assert_eq!(n, 1);
        assert!(labels.iter().all(|&l| l <= 1));

        assert_eq!(count_components(&ChangeMask::filled(4, 4, false)), 0);
        assert_eq!(count_components(&ChangeMask::filled(4, 4, true)), 1);
    }

    #[test]
    fn labels_are_scan_ordered() {
        let m = ChangeMask::from_fn(5, 1, |x, _| x != 2);
        let (labels, n) = label_components(&m);
        assert_eq!(n, 2);
        assert_eq!(labels, vec![1, 1, 0, 2, 2]);
    }
}
