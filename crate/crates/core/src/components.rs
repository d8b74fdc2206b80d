//! 8-connected component labeling on boolean masks.

use std::collections::VecDeque;

use crate::bbox::BBox;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Row-major pixel indices into the labeled mask.
    pub pixels: Vec<usize>,
    pub min_c: usize,
    pub min_r: usize,
    pub max_c: usize,
    pub max_r: usize,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Tight box in mask coordinates.
    pub fn bbox(&self) -> BBox {
        BBox::from_pixel_range(self.min_c, self.min_r, self.max_c, self.max_r)
    }
}

/// Components in order of their first pixel in raster order.
pub fn connected_components(mask: &[bool], width: usize, height: usize) -> Vec<Component> {
    debug_assert_eq!(mask.len(), width * height);
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Component {
            pixels: Vec::new(),
            min_c: usize::MAX,
            min_r: usize::MAX,
            max_c: 0,
            max_r: 0,
        };
        while let Some(i) = queue.pop_front() {
            let (c, r) = (i % width, i / width);
            comp.pixels.push(i);
            comp.min_c = comp.min_c.min(c);
            comp.min_r = comp.min_r.min(r);
            comp.max_c = comp.max_c.max(c);
            comp.max_r = comp.max_r.max(r);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                    if nc < 0 || nr < 0 || nc >= width as i64 || nr >= height as i64 {
                        continue;
                    }
                    let j = nr as usize * width + nc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.pixels.sort_unstable();
        out.push(comp);
    }
    out
}

/// Largest component; the earliest in raster order wins ties.
pub fn largest_component(mask: &[bool], width: usize, height: usize) -> Option<Component> {
    connected_components(mask, width, height)
        .into_iter()
        .fold(None, |best: Option<Component>, c| match best {
            Some(b) if b.len() >= c.len() => Some(b),
            _ => Some(c),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pixels_join() {
        #[rustfmt::skip]
        let m = [
            true, false, false,
            false, true, false,
            false, false, true,
        ];
        let cs = connected_components(&m, 3, 3);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].bbox(), BBox::new(0.0, 0.0, 3.0, 3.0));
    }

    #[test]
    fn separate_blobs_and_largest() {
        #[rustfmt::skip]
        let m = [
            true, false, false, true,
            false, false, false, true,
            false, false, false, true,
        ];
        let cs = connected_components(&m, 4, 3);
        assert_eq!(cs.len(), 2);
        let big = largest_component(&m, 4, 3).unwrap();
        assert_eq!(big.len(), 3);
        assert_eq!(big.bbox(), BBox::new(3.0, 0.0, 1.0, 3.0));
    }

    #[test]
    fn empty_mask_has_no_components() {
        assert!(largest_component(&[false; 6], 3, 2).is_none());
    }
}
