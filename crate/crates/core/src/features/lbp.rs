//! 8-neighbour local binary patterns bucketed into five coarse classes.
//!
//! Neighbours are visited clockwise from the top-left; bit `n` is set when
//! neighbour `n` is at least as bright as the centre. Borders replicate the
//! edge pixel. Each pixel falls into one [`LbpClass`].

/// Number of [`LbpClass`] buckets.
pub const LBP_BINS: usize = 5;

const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum LbpClass {
    /// All neighbours strictly brighter or all strictly darker (code 0 or 255,
    /// not flat): a spot.
    Spot = 0,
    /// Uniform pattern (two 0/1 transitions) with at most four set bits.
    UniformFew = 1,
    /// Uniform pattern with five to seven set bits.
    UniformMany = 2,
    /// More than two transitions.
    NonUniform = 3,
    /// Every neighbour equals the centre.
    Flat = 4,
}

/// Number of circular 0/1 transitions in an 8-bit code.
pub fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_left(1)).count_ones()
}

pub fn classify(code: u8, flat: bool) -> LbpClass {
    if flat {
        return LbpClass::Flat;
    }
    match transitions(code) {
        0 => LbpClass::Spot,
        2 if code.count_ones() <= 4 => LbpClass::UniformFew,
        2 => LbpClass::UniformMany,
        _ => LbpClass::NonUniform,
    }
}

/// LBP code and flatness at `(y, x)` of a row-major gray image.
pub fn lbp_code(gray: &[u8], height: usize, width: usize, y: usize, x: usize) -> (u8, bool) {
    let centre = gray[y * width + x];
    let mut code = 0u8;
    let mut flat = true;
    for (bit, (dy, dx)) in NEIGHBOURS.iter().enumerate() {
        let ny = (y as isize + dy).clamp(0, height as isize - 1) as usize;
        let nx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
        let v = gray[ny * width + nx];
        if v >= centre {
            code |= 1 << (7 - bit);
        }
        flat &= v == centre;
    }
    (code, flat)
}

/// Class of every pixel, row-major.
pub fn classify_image(gray: &[u8], height: usize, width: usize) -> Vec<LbpClass> {
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let (code, flat) = lbp_code(gray, height, width, y, x);
            out.push(classify(code, flat));
        }
    }
    out
}
