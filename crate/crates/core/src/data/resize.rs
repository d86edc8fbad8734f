//! Resolution adaptation between the source images and the `2^D` canvas.

/// Per-axis overlap weights for area averaging `src` cells onto `dst` cells.
/// Row `i` holds `(source index, overlap length)` pairs in source units.
fn overlaps(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let w = hi.min((s + 1) as f64) - lo.max(s as f64);
                    (w > 0.0).then_some((s, w))
                })
                .collect()
        })
        .collect()
}

/// Area-average resample of a row-major `h × w` image to `out_h × out_w`.
///
/// Each output pixel is the exact area-weighted mean of the source region it
/// covers, so the global mean is preserved for any size ratio and the result
/// stays inside the input range.
pub fn area_resample(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let ys = overlaps(h, out_h);
    let xs = overlaps(w, out_w);
    let cell = (h as f64 / out_h as f64) * (w as f64 / out_w as f64);
    let mut out = Vec::with_capacity(out_h * out_w);
    for wy in &ys {
        for wx in &xs {
            let mut acc = 0.0;
            for &(y, ay) in wy {
                let row = &src[y * w..(y + 1) * w];
                for &(x, ax) in wx {
                    acc += ay * ax * row[x];
                }
            }
            out.push((acc / cell).clamp(0.0, 1.0));
        }
    }
    out
}

/// Centered placement of an `h × w` image on a `side × side` canvas: a
/// zero-padded embedding when the canvas is larger, a center crop when smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CenteredRegion {
    pub canvas: usize,
    pub height: usize,
    pub width: usize,
}

impl CenteredRegion {
    pub fn new(canvas: usize, height: usize, width: usize) -> Self {
        Self { canvas, height, width }
    }

    fn offset(canvas: usize, len: usize) -> isize {
        (canvas as isize - len as isize) / 2
    }

    /// Source image → canvas.
    pub fn embed(&self, src: &[f64]) -> Vec<f64> {
        let (oy, ox) = (Self::offset(self.canvas, self.height), Self::offset(self.canvas, self.width));
        let mut out = vec![0.0; self.canvas * self.canvas];
        for cy in 0..self.canvas {
            let sy = cy as isize - oy;
            if sy < 0 || sy >= self.height as isize {
                continue;
            }
            for cx in 0..self.canvas {
                let sx = cx as isize - ox;
                if sx >= 0 && sx < self.width as isize {
                    out[cy * self.canvas + cx] = src[sy as usize * self.width + sx as usize];
                }
            }
        }
        out
    }

    /// Canvas → the `h × w` source window (the inverse of [`embed`] when padding).
    ///
    /// [`embed`]: CenteredRegion::embed
    pub fn extract(&self, canvas: &[f64]) -> Vec<f64> {
        let (oy, ox) = (Self::offset(self.canvas, self.height), Self::offset(self.canvas, self.width));
        let mut out = vec![0.0; self.height * self.width];
        for sy in 0..self.height {
            let cy = sy as isize + oy;
            if cy < 0 || cy >= self.canvas as isize {
                continue;
            }
            for sx in 0..self.width {
                let cx = sx as isize + ox;
                if cx >= 0 && cx < self.canvas as isize {
                    out[sy * self.width + sx] = canvas[cy as usize * self.canvas + cx as usize];
                }
            }
        }
        out
    }
}
