//! Rasterizers. Both renderers sample each pixel at its center and are pure
//! functions of the concept-label row.

use std::f64::consts::PI;

use super::IMAGE_SIZE;

/// Saturation and value used for the floor and wall colors.
pub const ROOM_BACKGROUND: (f64, f64) = (0.5, 0.95);
/// Saturation and value used for the object tint; darker than any background
/// so the silhouette stays visible when hues coincide.
pub const ROOM_OBJECT: (f64, f64) = (1.0, 0.55);

/// Standard HSV to 8-bit RGB conversion; `h` in [0, 1).
pub fn hue_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor() as u32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let q8 = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
    [q8(r), q8(g), q8(b)]
}

fn sprite_inside(shape: u32, u: f64, v: f64, radius: f64) -> bool {
    match shape {
        // square
        0 => u.abs() <= 0.8 * radius && v.abs() <= 0.8 * radius,
        // ellipse, 2:1 aspect
        1 => {
            let a = u / radius;
            let b = v / (0.5 * radius);
            a * a + b * b <= 1.0
        }
        // heart: (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0 spans roughly [-1.14, 1.14] x [-1, 1.13]
        _ => {
            let k = 1.2 / radius;
            let x = u * k;
            let y = -v * k + 0.06;
            let r = x * x + y * y - 1.0;
            r * r * r - x * x * y * y * y <= 0.0
        }
    }
}

/// Render a sprites row `[shape, scale, rotation, x, y]` into a 64x64 binary canvas.
pub fn render_sprite(row: &[u32], out: &mut [u8]) {
    debug_assert_eq!(out.len(), IMAGE_SIZE * IMAGE_SIZE);
    let shape = row[0];
    let scale = 0.5 + 0.5 * f64::from(row[1]) / 5.0;
    let theta = 2.0 * PI * f64::from(row[2]) / 39.0;
    let cx = 20.0 + 24.0 * f64::from(row[3]) / 31.0;
    let cy = 20.0 + 24.0 * f64::from(row[4]) / 31.0;
    let radius = 14.0 * scale;
    let (sin, cos) = theta.sin_cos();
    let reach = 1.2 * radius + 1.0;
    let lo_y = ((cy - reach).floor().max(0.0)) as usize;
    let hi_y = ((cy + reach).ceil().min(IMAGE_SIZE as f64)) as usize;
    let lo_x = ((cx - reach).floor().max(0.0)) as usize;
    let hi_x = ((cx + reach).ceil().min(IMAGE_SIZE as f64)) as usize;
    out.fill(0);
    for py in lo_y..hi_y {
        let dy = py as f64 + 0.5 - cy;
        for px in lo_x..hi_x {
            let dx = px as f64 + 0.5 - cx;
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if sprite_inside(shape, u, v, radius) {
                out[py * IMAGE_SIZE + px] = 255;
            }
        }
    }
}

fn room_inside(shape: u32, u: f64, v: f64, radius: f64) -> bool {
    match shape {
        // cube
        0 => u.abs() <= 0.8 * radius && v.abs() <= 0.8 * radius,
        // cylinder, upright
        1 => u.abs() <= 0.55 * radius && v.abs() <= radius,
        // sphere
        2 => u * u + v * v <= 0.81 * radius * radius,
        // capsule, horizontal stadium
        _ => {
            let r = 0.45 * radius;
            let du = (u.abs() - r).max(0.0);
            du * du + v * v <= r * r
        }
    }
}

/// Render a rooms row `[floor_hue, wall_hue, object_hue, scale, shape, orientation]`
/// into a 64x64x3 canvas: wall in the top half, floor in the bottom half and a
/// tinted object silhouette offset horizontally by orientation.
pub fn render_room(row: &[u32], out: &mut [u8]) {
    debug_assert_eq!(out.len(), IMAGE_SIZE * IMAGE_SIZE * 3);
    let (bs, bv) = ROOM_BACKGROUND;
    let (os, ov) = ROOM_OBJECT;
    let floor = hue_to_rgb(f64::from(row[0]) / 10.0, bs, bv);
    let wall = hue_to_rgb(f64::from(row[1]) / 10.0, bs, bv);
    let object = hue_to_rgb(f64::from(row[2]) / 10.0, os, ov);
    let radius = 8.0 + 8.0 * f64::from(row[3]) / 7.0;
    let shape = row[4];
    let orientation = -30.0 + 60.0 * f64::from(row[5]) / 14.0;
    let cx = 32.0 + orientation / 3.0;
    let cy = 34.0;
    let half = IMAGE_SIZE / 2;
    for py in 0..IMAGE_SIZE {
        let background = if py < half { wall } else { floor };
        let dy = py as f64 + 0.5 - cy;
        for px in 0..IMAGE_SIZE {
            let dx = px as f64 + 0.5 - cx;
            let color = if room_inside(shape, dx, dy, radius) {
                object
            } else {
                background
            };
            let o = (py * IMAGE_SIZE + px) * 3;
            out[o..o + 3].copy_from_slice(&color);
        }
    }
}
