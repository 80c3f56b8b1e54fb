//! Affine warps about the image center with nearest-neighbour resampling.

/// `[a, b, tx; c, d, ty]` acting on centered `(x, y)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub m: [[f64; 3]; 2],
}

impl Affine {
    pub fn identity() -> Self {
        Affine { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Affine { m: [[1.0, 0.0, tx], [0.0, 1.0, ty]] }
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Affine { m: [[c, -s, 0.0], [s, c, 0.0]] }
    }

    pub fn scaling(s: f64) -> Self {
        Affine { m: [[s, 0.0, 0.0], [0.0, s, 0.0]] }
    }

    /// Horizontal shear by angle `phi`.
    pub fn shear(phi: f64) -> Self {
        Affine { m: [[1.0, phi.tan(), 0.0], [0.0, 1.0, 0.0]] }
    }

    /// Horizontal mirror.
    pub fn flip() -> Self {
        Affine { m: [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn then_after(&self, first: &Affine) -> Affine {
        let a = &self.m;
        let b = &first.m;
        let mut m = [[0.0; 3]; 2];
        for (r, row) in m.iter_mut().enumerate() {
            row[0] = a[r][0] * b[0][0] + a[r][1] * b[1][0];
            row[1] = a[r][0] * b[0][1] + a[r][1] * b[1][1];
            row[2] = a[r][0] * b[0][2] + a[r][1] * b[1][2] + a[r][2];
        }
        Affine { m }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        (m[0][0] * x + m[0][1] * y + m[0][2], m[1][0] * x + m[1][1] * y + m[1][2])
    }

    pub fn inverse(&self) -> Option<Affine> {
        let m = &self.m;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-12 || !det.is_finite() {
            return None;
        }
        let (a, b, c, d) = (m[1][1] / det, -m[0][1] / det, -m[1][0] / det, m[0][0] / det);
        Some(Affine {
            m: [
                [a, b, -(a * m[0][2] + b * m[1][2])],
                [c, d, -(c * m[0][2] + d * m[1][2])],
            ],
        })
    }
}

/// Warp `src` (`h x w x c`, row-major) into `dst` by the forward map `t`.
/// Pixels whose preimage falls outside the canvas are zero.
pub fn transform_image(src: &[u8], dst: &mut [u8], h: usize, w: usize, c: usize, t: &Affine) {
    let inv = t.inverse().unwrap_or_else(Affine::identity);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    for r in 0..h {
        for col in 0..w {
            let (sx, sy) = inv.apply(col as f64 - cx, r as f64 - cy);
            let (sx, sy) = ((sx + cx).round(), (sy + cy).round());
            let o = (r * w + col) * c;
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                let s = (sy as usize * w + sx as usize) * c;
                dst[o..o + c].copy_from_slice(&src[s..s + c]);
            } else {
                dst[o..o + c].fill(0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let t = Affine::rotation(0.3)
            .then_after(&Affine::shear(0.2))
            .then_after(&Affine::translation(2.0, -1.0));
        let i = t.inverse().unwrap();
        let (x, y) = t.apply(3.0, 4.0);
        let (bx, by) = i.apply(x, y);
        assert!((bx - 3.0).abs() < 1e-12 && (by - 4.0).abs() < 1e-12);
    }

    #[test]
    fn integer_translation_shifts_pixels() {
        let (h, w) = (4, 4);
        let src: Vec<u8> = (0..16).collect();
        let mut dst = vec![0; 16];
        transform_image(&src, &mut dst, h, w, 1, &Affine::translation(1.0, 0.0));
        assert_eq!(&dst[0..4], &[0, 0, 1, 2]);
        assert_eq!(&dst[4..8], &[0, 4, 5, 6]);
    }

    #[test]
    fn composition_order() {
        // translate then flip: x -> -(x + 1)
        let t = Affine::flip().then_after(&Affine::translation(1.0, 0.0));
        assert_eq!(t.apply(2.0, 0.0), (-3.0, 0.0));
    }
}
