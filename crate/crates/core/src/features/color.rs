//! Per-pixel colour channels, each scaled to `[0, 1]`.
//!
//! * HSV: `H = hue° / 360`, `S = (max − min) / max` (0 for black),
//!   `V = max / 255`.
//! * CIE L*a*b*: sRGB companding removed, linear RGB → XYZ with the sRGB/D65
//!   matrix, white point `(0.95047, 1.0, 1.08883)`. Output
//!   `L* / 100`, `(a* + 128) / 255`, `(b* + 128) / 255`, clamped to `[0, 1]`.

pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    [hue / 360.0, sat, max]
}

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Unscaled `(L*, a*, b*)`.
pub fn rgb_to_lab_raw([r, g, b]: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let (fx, fy, fz) = (lab_f(x / 0.95047), lab_f(y / 1.0), lab_f(z / 1.08883));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn rgb_to_lab(px: [u8; 3]) -> [f64; 3] {
    let [l, a, b] = rgb_to_lab_raw(px);
    [
        (l / 100.0).clamp(0.0, 1.0),
        ((a + 128.0) / 255.0).clamp(0.0, 1.0),
        ((b + 128.0) / 255.0).clamp(0.0, 1.0),
    ]
}
